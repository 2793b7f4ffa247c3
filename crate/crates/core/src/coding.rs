//! Sparse coding: orthogonal matching pursuit and lasso by cyclic coordinate
//! descent.

use rayon::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_solve, dot, norm2, Mat};

/// Sparse coefficient vector over a dictionary of width `width`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseCode {
    support: Vec<usize>,
    values: Vec<f64>,
    width: usize,
}

impl SparseCode {
    pub fn zero(width: usize) -> Self {
        SparseCode {
            support: Vec::new(),
            values: Vec::new(),
            width,
        }
    }

    /// Builds a code from unordered `(index, value)` pairs; zero values are
    /// dropped and indices sorted.
    pub fn from_pairs(width: usize, pairs: impl IntoIterator<Item = (usize, f64)>) -> Result<Self> {
        let mut pairs: Vec<(usize, f64)> = pairs.into_iter().filter(|p| p.1 != 0.0).collect();
        pairs.sort_by_key(|p| p.0);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput("duplicate support index".into()));
        }
        if pairs.last().is_some_and(|p| p.0 >= width) {
            return Err(Error::InvalidInput("support index out of range".into()));
        }
        Ok(SparseCode {
            support: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
            width,
        })
    }

    pub fn from_dense(x: &[f64]) -> Self {
        let (support, values) = x
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(j, v)| (j, *v))
            .unzip();
        SparseCode {
            support,
            values,
            width: x.len(),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.values.iter().map(|v| v.abs()).sum()
    }

    pub fn get(&self, j: usize) -> f64 {
        self.support
            .binary_search(&j)
            .map_or(0.0, |p| self.values[p])
    }

    /// Sets coefficient `j`; a zero value removes it from the support.
    pub fn set(&mut self, j: usize, v: f64) {
        match self.support.binary_search(&j) {
            Ok(p) if v == 0.0 => {
                self.support.remove(p);
                self.values.remove(p);
            }
            Ok(p) => self.values[p] = v,
            Err(_) if v == 0.0 => {}
            Err(p) => {
                self.support.insert(p, j);
                self.values.insert(p, v);
            }
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.width];
        for (&j, &v) in self.support.iter().zip(&self.values) {
            x[j] = v;
        }
        x
    }

    /// `D x`.
    pub fn reconstruct(&self, d: &Dictionary) -> Vec<f64> {
        let mut out = vec![0.0; d.dim()];
        for (&j, &v) in self.support.iter().zip(&self.values) {
            axpy(v, d.atom(j), &mut out);
        }
        out
    }

    /// `y - D x`.
    pub fn residual(&self, y: &[f64], d: &Dictionary) -> Vec<f64> {
        let mut r = y.to_vec();
        for (&j, &v) in self.support.iter().zip(&self.values) {
            axpy(-v, d.atom(j), &mut r);
        }
        r
    }
}

/// Column-sparse `K x S` coefficient matrix; column `s` codes sample `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCodeMatrix {
    width: usize,
    columns: Vec<SparseCode>,
}

impl SparseCodeMatrix {
    pub fn new(width: usize, columns: Vec<SparseCode>) -> Result<Self> {
        if columns.iter().any(|c| c.width != width) {
            return Err(Error::InvalidInput("code widths differ".into()));
        }
        Ok(SparseCodeMatrix { width, columns })
    }

    pub fn zeros(width: usize, samples: usize) -> Self {
        SparseCodeMatrix {
            width,
            columns: vec![SparseCode::zero(width); samples],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_samples(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, s: usize) -> &SparseCode {
        &self.columns[s]
    }

    pub fn column_mut(&mut self, s: usize) -> &mut SparseCode {
        &mut self.columns[s]
    }

    pub fn columns(&self) -> &[SparseCode] {
        &self.columns
    }

    /// Ordered set of samples whose code uses atom `k`.
    pub fn row_support(&self, k: usize) -> Vec<usize> {
        self.columns
            .iter()
            .enumerate()
            .filter(|(_, c)| c.support.binary_search(&k).is_ok())
            .map(|(s, _)| s)
            .collect()
    }

    /// Writes `values[i]` into row `k`, column `omega[i]`.
    pub fn set_row(&mut self, k: usize, omega: &[usize], values: &[f64]) {
        for (&s, &v) in omega.iter().zip(values) {
            self.columns[s].set(k, v);
        }
    }

    pub fn to_dense(&self) -> Mat {
        Mat::from_fn(self.width, self.columns.len(), |k, s| {
            self.columns[s].get(k)
        })
    }
}

/// Sparse-coding parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodingConfig {
    pub t0: usize,
    pub lasso_tau: f64,
    pub lasso_tol: f64,
    pub lasso_max_sweeps: usize,
}

impl CodingConfig {
    pub fn new(t0: usize) -> Self {
        CodingConfig {
            t0,
            lasso_tau: 0.0,
            lasso_tol: 1e-8,
            lasso_max_sweeps: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t0 == 0 {
            return Err(Error::InvalidConfig("T0 must be at least 1".into()));
        }
        if !(self.lasso_tau >= 0.0) {
            return Err(Error::InvalidConfig(
                "lasso tau must be non-negative".into(),
            ));
        }
        if !(self.lasso_tol > 0.0) {
            return Err(Error::InvalidConfig(
                "lasso tolerance must be positive".into(),
            ));
        }
        Ok(())
    }
}

const OMP_RIDGE: f64 = 1e-12;
const OMP_RESIDUAL_FLOOR: f64 = 1e-12;

/// Greedy `T0`-sparse approximation of `y` over `d`.
pub fn omp_encode(y: &[f64], d: &Dictionary, t0: usize) -> Result<SparseCode> {
    Ok(omp_encode_with_path(y, d, t0)?.0)
}

/// OMP that also returns the residual norm before the first and after every
/// selection.
pub fn omp_encode_with_path(
    y: &[f64],
    d: &Dictionary,
    t0: usize,
) -> Result<(SparseCode, Vec<f64>)> {
    if t0 == 0 {
        return Err(Error::InvalidConfig("T0 must be at least 1".into()));
    }
    if t0 > d.width() {
        return Err(Error::InvalidConfig(format!(
            "T0 = {t0} exceeds dictionary width {}",
            d.width()
        )));
    }
    if t0 > d.dim() {
        return Err(Error::InvalidConfig(format!(
            "T0 = {t0} exceeds signal dimension {}",
            d.dim()
        )));
    }
    if y.len() != d.dim() {
        return Err(Error::InvalidInput(format!(
            "signal length {} does not match dictionary dimension {}",
            y.len(),
            d.dim()
        )));
    }
    let mut residual = y.to_vec();
    let mut path = vec![norm2(&residual)];
    let mut chosen: Vec<usize> = Vec::with_capacity(t0);
    let mut coef: Vec<f64> = Vec::new();
    let mut rhs: Vec<f64> = Vec::with_capacity(t0);

    while chosen.len() < t0 && *path.last().unwrap() >= OMP_RESIDUAL_FLOOR {
        let mut best = None;
        let mut best_abs = 0.0;
        for (j, atom) in d.atoms().enumerate() {
            if chosen.contains(&j) {
                continue;
            }
            let c = dot(atom, &residual).abs();
            if c > best_abs {
                best_abs = c;
                best = Some(j);
            }
        }
        let Some(j) = best else { break };
        chosen.push(j);
        rhs.push(dot(d.atom(j), y));

        let m = chosen.len();
        let gram = Mat::from_fn(m, m, |a, b| {
            let g = dot(d.atom(chosen[a]), d.atom(chosen[b]));
            if a == b {
                g + OMP_RIDGE
            } else {
                g
            }
        });
        let l = cholesky(&gram).ok_or_else(|| {
            Error::InvalidDictionary("selected atoms are numerically dependent".into())
        })?;
        coef = cholesky_solve(&l, &rhs);
        residual.copy_from_slice(y);
        for (&a, &v) in chosen.iter().zip(&coef) {
            axpy(-v, d.atom(a), &mut residual);
        }
        path.push(norm2(&residual));
    }
    let code = SparseCode::from_pairs(d.width(), chosen.into_iter().zip(coef))?;
    Ok((code, path))
}

fn soft_threshold(v: f64, tau: f64) -> f64 {
    if v > tau {
        v - tau
    } else if v < -tau {
        v + tau
    } else {
        0.0
    }
}

/// `½‖y − Dx‖² + τ‖x‖₁`.
pub fn lasso_objective(y: &[f64], d: &Dictionary, x: &SparseCode, tau: f64) -> f64 {
    let r = x.residual(y, d);
    0.5 * dot(&r, &r) + tau * x.l1_norm()
}

/// Outcome of a traced lasso solve.
#[derive(Debug, Clone)]
pub struct LassoRun {
    pub code: SparseCode,
    pub sweeps: usize,
    pub converged: bool,
    pub last_change: f64,
    /// Objective before the first sweep and after each sweep.
    pub objectives: Vec<f64>,
}

/// Lasso by cyclic coordinate descent, starting from `warm` when given.
pub fn lasso_encode(y: &[f64], d: &Dictionary, tau: f64, cfg: &CodingConfig) -> Result<SparseCode> {
    lasso_encode_from(y, d, tau, cfg, None)
}

pub fn lasso_encode_from(
    y: &[f64],
    d: &Dictionary,
    tau: f64,
    cfg: &CodingConfig,
    warm: Option<&SparseCode>,
) -> Result<SparseCode> {
    let run = lasso_run(y, d, tau, cfg, warm, false)?;
    if run.converged {
        Ok(run.code)
    } else {
        Err(Error::ConvergenceFailure {
            sweeps: run.sweeps,
            last_change: run.last_change,
            last: Box::new(run.code),
        })
    }
}

/// Runs coordinate descent and reports convergence instead of failing.
pub fn lasso_run(
    y: &[f64],
    d: &Dictionary,
    tau: f64,
    cfg: &CodingConfig,
    warm: Option<&SparseCode>,
    trace_objective: bool,
) -> Result<LassoRun> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidConfig(
            "lasso tau must be non-negative".into(),
        ));
    }
    if !(cfg.lasso_tol > 0.0) {
        return Err(Error::InvalidConfig(
            "lasso tolerance must be positive".into(),
        ));
    }
    if y.len() != d.dim() {
        return Err(Error::InvalidInput(
            "signal length does not match dictionary".into(),
        ));
    }
    let k = d.width();
    let mut x = warm.map_or_else(|| vec![0.0; k], SparseCode::to_dense);
    if x.len() != k {
        return Err(Error::InvalidInput(
            "warm start width does not match dictionary".into(),
        ));
    }
    let mut r = y.to_vec();
    for (j, &v) in x.iter().enumerate() {
        if v != 0.0 {
            axpy(-v, d.atom(j), &mut r);
        }
    }
    let objective =
        |r: &[f64], x: &[f64]| 0.5 * dot(r, r) + tau * x.iter().map(|v| v.abs()).sum::<f64>();
    let mut objectives = Vec::new();
    if trace_objective {
        objectives.push(objective(&r, &x));
    }
    let mut sweeps = 0;
    let mut last_change = f64::INFINITY;
    let mut converged = false;
    while sweeps < cfg.lasso_max_sweeps {
        sweeps += 1;
        let mut max_change = 0.0f64;
        for j in 0..k {
            let atom = d.atom(j);
            let old = x[j];
            // Atoms are unit-norm, so the coordinate minimizer needs no scaling.
            let new = soft_threshold(dot(atom, &r) + old, tau);
            if new != old {
                axpy(old - new, atom, &mut r);
                x[j] = new;
                max_change = max_change.max((new - old).abs());
            }
        }
        if trace_objective {
            objectives.push(objective(&r, &x));
        }
        last_change = max_change;
        if max_change < cfg.lasso_tol {
            converged = true;
            break;
        }
    }
    Ok(LassoRun {
        code: SparseCode::from_dense(&x),
        sweeps,
        converged,
        last_change,
        objectives,
    })
}

/// Smallest probed `τ` (60 bisection steps on `[0, ‖Dᵀy‖∞]`) whose lasso
/// solution has at most `T0` nonzeros.
pub fn select_tau_for_sparsity(
    y: &[f64],
    d: &Dictionary,
    t0: usize,
    cfg: &CodingConfig,
) -> Result<f64> {
    Ok(select_tau_with_code(y, d, t0, cfg)?.0)
}

/// As [`select_tau_for_sparsity`], also returning the lasso solution at the
/// selected `τ`.
pub fn select_tau_with_code(
    y: &[f64],
    d: &Dictionary,
    t0: usize,
    cfg: &CodingConfig,
) -> Result<(f64, SparseCode)> {
    if t0 == 0 {
        return Err(Error::InvalidConfig("T0 must be at least 1".into()));
    }
    let hi_start = d.correlations(y).iter().fold(0.0f64, |m, c| m.max(c.abs()));
    let mut best = (hi_start, SparseCode::zero(d.width()));
    let (mut lo, mut hi) = (0.0, hi_start);
    let mut warm: Option<SparseCode> = None;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        // A probe that hits the sweep cap is judged by its last iterate.
        let code = lasso_run(y, d, mid, cfg, warm.as_ref(), false)?.code;
        if code.nnz() <= t0 {
            hi = mid;
            best = (mid, code.clone());
        } else {
            lo = mid;
        }
        warm = Some(code);
    }
    Ok(best)
}

/// How samples are coded inside dictionary learning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SparseCoder {
    Omp,
    /// Lasso with one `τ` per coding pass: the largest per-sample
    /// sparsity-achieving `τ`, inflated by `1 + slack`.
    Lasso {
        slack: f64,
    },
}

/// Result of coding a batch of samples.
#[derive(Debug, Clone)]
pub struct BatchCodes {
    pub codes: SparseCodeMatrix,
    /// The common `τ` used by lasso coding.
    pub tau: Option<f64>,
}

/// Codes every column of `y` (samples as columns). Parallel over samples;
/// output order and values do not depend on scheduling.
pub fn encode_batch(y: &Mat, d: &Dictionary, t0: usize, coder: SparseCoder) -> Result<BatchCodes> {
    let samples: Vec<Vec<f64>> = y.columns().collect();
    encode_samples(&samples, d, t0, coder)
}

pub fn encode_samples(
    samples: &[Vec<f64>],
    d: &Dictionary,
    t0: usize,
    coder: SparseCoder,
) -> Result<BatchCodes> {
    match coder {
        SparseCoder::Omp => {
            let columns = samples
                .par_iter()
                .map(|y| omp_encode(y, d, t0))
                .collect::<Result<Vec<_>>>()?;
            Ok(BatchCodes {
                codes: SparseCodeMatrix::new(d.width(), columns)?,
                tau: None,
            })
        }
        SparseCoder::Lasso { slack } => {
            let cfg = CodingConfig::new(t0);
            let taus = samples
                .par_iter()
                .map(|y| select_tau_for_sparsity(y, d, t0, &cfg))
                .collect::<Result<Vec<_>>>()?;
            let tau = (1.0 + slack) * taus.iter().fold(0.0f64, |m, &t| m.max(t));
            let columns = samples
                .par_iter()
                .map(|y| lasso_run(y, d, tau, &cfg, None, false).map(|run| run.code))
                .collect::<Result<Vec<_>>>()?;
            Ok(BatchCodes {
                codes: SparseCodeMatrix::new(d.width(), columns)?,
                tau: Some(tau),
            })
        }
    }
}
