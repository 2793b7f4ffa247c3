//! Centralized K-SVD and the per-site local baseline.
//!
//! The atom update is shared with the distributed learner: the power-method
//! variant runs the same matrix-vector products and normalization that each
//! site performs, so a one-site network reproduces this module bit for bit.

use rand_chacha::ChaCha8Rng;

use crate::coding::{encode_samples, SparseCodeMatrix, SparseCoder};
use crate::diagnostics::representation_error_samples;
use crate::dictionary::{init_dictionary, reference_vector, Dictionary};
use crate::error::{Error, Result};
use crate::linalg::{
    axpy, dot, norm2, reference_top_eigenpair, spectral_norm, top_left_singular_vector, Mat,
};
use crate::rng::{random_unit_vector, stream_rng, Stream};

/// Frobenius norm below which a restricted residual carries no direction.
pub const EMPTY_ENERGY_TOL: f64 = 1e-12;
/// Norm below which a power-method iterate is treated as collapsed.
pub const COLLAPSE_TOL: f64 = 1e-14;

/// `q` or `-q`, whichever has a non-negative inner product with `d_ref`.
pub fn sign_align(d_ref: &[f64], q: &[f64]) -> Vec<f64> {
    if dot(d_ref, q) >= 0.0 {
        q.to_vec()
    } else {
        q.iter().map(|v| -v).collect()
    }
}

/// Normalizes a power-method iterate, failing if it has collapsed.
pub fn normalize_or_collapse(mut v: Vec<f64>, site: usize) -> Result<Vec<f64>> {
    let norm = norm2(&v);
    if !(norm >= COLLAPSE_TOL) {
        return Err(Error::PowerCollapse { site, norm });
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(v)
}

/// Columns `omega` of `E_k = Y - sum_{j != k} d_j x_j`: the residual of
/// the samples using atom `k`, with atom `k`'s own contribution added back.
pub fn restricted_residual(
    samples: &[Vec<f64>],
    d: &Dictionary,
    x: &SparseCodeMatrix,
    k: usize,
    omega: &[usize],
) -> Result<Mat> {
    let cols: Vec<Vec<f64>> = omega
        .iter()
        .map(|&s| error_column(&samples[s], d, x, k, s))
        .collect();
    Mat::from_columns(&cols)
}

fn error_column(y: &[f64], d: &Dictionary, x: &SparseCodeMatrix, k: usize, s: usize) -> Vec<f64> {
    let code = x.column(s);
    let mut col = y.to_vec();
    for (&j, &v) in code.support().iter().zip(code.values()) {
        if j != k {
            axpy(-v, d.atom(j), &mut col);
        }
    }
    col
}

/// Best rank-one approximation `d x_row` of `e` with unit `d`, using the
/// reference power iteration run to convergence; `d` is sign-aligned with
/// `d_ref`.
pub fn atom_update(e: &Mat, d_ref: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let energy = e.frobenius_norm();
    if energy < EMPTY_ENERGY_TOL {
        return Err(Error::EmptyEnergy { norm: energy });
    }
    let top = top_left_singular_vector(e).ok_or(Error::EmptyEnergy { norm: energy })?;
    let d = sign_align(d_ref, &top);
    let x_row = e.tr_matvec(&d);
    Ok((d, x_row))
}

/// Rank-one update computed with `tp` power iterations on `e e^T` from
/// `q_init`.
pub fn power_atom_update(
    e: &Mat,
    d_ref: &[f64],
    q_init: &[f64],
    tp: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = e.outer_gram();
    let mut q = q_init.to_vec();
    for _ in 0..tp {
        q = normalize_or_collapse(m.matvec(&q), 0)?;
    }
    let d = sign_align(d_ref, &q);
    let x_row = e.tr_matvec(&d);
    Ok((d, x_row))
}

/// How the dominant left singular vector of a restricted residual is found.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AtomSolver {
    /// Reference eigensolver run to tight tolerance.
    Reference,
    /// Fixed number of power iterations from a fresh shared start per atom.
    PowerIterations(usize),
}

/// Replacement for an atom no sample uses (or whose residual is empty).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnusedAtomRule {
    /// The worst-represented sample, normalized (lowest index on ties).
    WorstSample,
    /// A random unit vector from the shared atom-reset stream.
    SharedRandom,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KsvdConfig {
    pub t0: usize,
    pub iterations: usize,
    pub seed: u64,
    pub solver: AtomSolver,
    pub unused: UnusedAtomRule,
    pub coder: SparseCoder,
    pub record_snapshots: bool,
    /// Site sizes, in sample order. When set, per-atom spectral data needed
    /// by the diagnostics is recorded with each iteration.
    pub analysis_sites: Option<Vec<usize>>,
}

impl KsvdConfig {
    pub fn new(t0: usize, iterations: usize, seed: u64) -> Self {
        KsvdConfig {
            t0,
            iterations,
            seed,
            solver: AtomSolver::Reference,
            unused: UnusedAtomRule::WorstSample,
            coder: SparseCoder::Omp,
            record_snapshots: false,
            analysis_sites: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig(
                "at least one learning iteration is required".into(),
            ));
        }
        if self.t0 == 0 {
            return Err(Error::InvalidConfig("T0 must be at least 1".into()));
        }
        if self.solver == AtomSolver::PowerIterations(0) {
            return Err(Error::InvalidConfig(
                "power-iteration budget must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// State captured around one learning iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub dict_before: Dictionary,
    pub dict_after: Dictionary,
    pub codes_coded: SparseCodeMatrix,
    pub codes_updated: SparseCodeMatrix,
}

/// Spectral data of one atom's error matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomAnalysis {
    /// Top two eigenvalues of `E_kR E_kR^T` (zero when no sample uses the atom).
    pub lambda1: f64,
    pub lambda2: f64,
    /// `‖E_{i,k}‖₂` for each site block of the full error matrix `E_k`.
    pub block_norms: Vec<f64>,
}

/// Coding-stage and atom-stage data for the analysis constants.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationAnalysis {
    /// `min τ − |⟨d_j, y_s − D x_s⟩|` over samples and off-support atoms of
    /// the coding dictionary (lasso coding only).
    pub min_margin: Option<f64>,
    /// Largest `‖x_s‖₁` among the coded samples.
    pub eta_max: f64,
    pub atoms: Vec<AtomAnalysis>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub representation_error: f64,
    /// `|ω_k|` for each atom after coding.
    pub support_sizes: Vec<usize>,
    /// Atoms re-initialized by the unused-atom rule.
    pub replaced: Vec<usize>,
    /// Common lasso `τ` for this iteration's coding stage.
    pub tau: Option<f64>,
    pub snapshot: Option<Snapshot>,
    pub analysis: Option<IterationAnalysis>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LearnTrace {
    pub iterations: Vec<IterationRecord>,
}

impl LearnTrace {
    pub fn errors(&self) -> Vec<f64> {
        self.iterations
            .iter()
            .map(|r| r.representation_error)
            .collect()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.iterations.last().map(|r| r.representation_error)
    }
}

/// Random draws consumed by a learning run.
pub(crate) struct LearnerStreams {
    pub power_init: ChaCha8Rng,
    pub atom_reset: ChaCha8Rng,
}

impl LearnerStreams {
    pub fn new(seed: u64) -> Self {
        LearnerStreams {
            power_init: stream_rng(seed, Stream::PowerInit),
            atom_reset: stream_rng(seed, Stream::AtomReset),
        }
    }
}

/// `K`-atom dictionary learned from the columns of `y`, starting from
/// `init_dictionary(n, K, seed)`.
pub fn run_ksvd(y: &Mat, k: usize, cfg: &KsvdConfig) -> Result<(Dictionary, LearnTrace)> {
    cfg.validate()?;
    run_ksvd_from(y, init_dictionary(y.rows(), k, cfg.seed), cfg)
}

/// K-SVD from a given starting dictionary.
pub fn run_ksvd_from(
    y: &Mat,
    init: Dictionary,
    cfg: &KsvdConfig,
) -> Result<(Dictionary, LearnTrace)> {
    cfg.validate()?;
    if y.rows() != init.dim() {
        return Err(Error::InvalidInput(
            "data and dictionary dimensions differ".into(),
        ));
    }
    if let Some(sizes) = &cfg.analysis_sites {
        if sizes.iter().sum::<usize>() != y.cols() {
            return Err(Error::InvalidConfig(
                "analysis site sizes do not cover the data".into(),
            ));
        }
    }
    let samples: Vec<Vec<f64>> = y.columns().collect();
    let d_ref = reference_vector(y.rows(), cfg.seed);
    let mut streams = LearnerStreams::new(cfg.seed);
    let mut d = init;
    let mut trace = LearnTrace::default();
    for _ in 0..cfg.iterations {
        let (next, record) = ksvd_iteration_inner(&samples, d, &d_ref, cfg, &mut streams)?;
        d = next;
        trace.iterations.push(record);
    }
    Ok((d, trace))
}

/// One coding pass and one sweep of atom updates. Draws the per-atom power
/// start vectors from the `seed`'s power-init stream as a fresh run would.
pub fn ksvd_iteration(
    y: &Mat,
    d: &Dictionary,
    cfg: &KsvdConfig,
) -> Result<(Dictionary, SparseCodeMatrix)> {
    cfg.validate()?;
    let samples: Vec<Vec<f64>> = y.columns().collect();
    let d_ref = reference_vector(y.rows(), cfg.seed);
    let mut streams = LearnerStreams::new(cfg.seed);
    let cfg = KsvdConfig {
        record_snapshots: true,
        ..cfg.clone()
    };
    let (next, record) = ksvd_iteration_inner(&samples, d.clone(), &d_ref, &cfg, &mut streams)?;
    let codes = record.snapshot.expect("snapshot requested").codes_updated;
    Ok((next, codes))
}

fn ksvd_iteration_inner(
    samples: &[Vec<f64>],
    mut d: Dictionary,
    d_ref: &[f64],
    cfg: &KsvdConfig,
    streams: &mut LearnerStreams,
) -> Result<(Dictionary, IterationRecord)> {
    let n = d.dim();
    let batch = encode_samples(samples, &d, cfg.t0, cfg.coder)?;
    let mut x = batch.codes;
    let dict_before = cfg.record_snapshots.then(|| d.clone());
    let codes_coded = cfg.record_snapshots.then(|| x.clone());
    let mut analysis = cfg
        .analysis_sites
        .as_ref()
        .map(|_| coding_analysis(samples, &d, &x, batch.tau));

    let mut support_sizes = Vec::with_capacity(d.width());
    let mut replaced = Vec::new();
    for k in 0..d.width() {
        let q_init = random_unit_vector(&mut streams.power_init, n);
        let omega = x.row_support(k);
        support_sizes.push(omega.len());
        if let (Some(sizes), Some(a)) = (&cfg.analysis_sites, analysis.as_mut()) {
            a.atoms
                .push(atom_analysis(samples, &d, &x, k, &omega, sizes)?);
        }
        if omega.is_empty() {
            replace_atom(&mut d, k, samples, &x, cfg.unused, streams);
            replaced.push(k);
            continue;
        }
        let e = restricted_residual(samples, &d, &x, k, &omega)?;
        let update = match cfg.solver {
            AtomSolver::Reference => atom_update(&e, d_ref),
            AtomSolver::PowerIterations(tp) => power_atom_update(&e, d_ref, &q_init, tp),
        };
        match update {
            Ok((atom, x_row)) => {
                d.set_atom(k, &atom);
                x.set_row(k, &omega, &x_row);
            }
            Err(Error::EmptyEnergy { .. } | Error::PowerCollapse { .. }) => {
                replace_atom(&mut d, k, samples, &x, cfg.unused, streams);
                replaced.push(k);
            }
            Err(other) => return Err(other),
        }
    }
    let representation_error = representation_error_samples(samples, &d, &x)?;
    let snapshot = cfg.record_snapshots.then(|| Snapshot {
        dict_before: dict_before.expect("recorded"),
        dict_after: d.clone(),
        codes_coded: codes_coded.expect("recorded"),
        codes_updated: x.clone(),
    });
    Ok((
        d,
        IterationRecord {
            representation_error,
            support_sizes,
            replaced,
            tau: batch.tau,
            snapshot,
            analysis,
        },
    ))
}

fn replace_atom(
    d: &mut Dictionary,
    k: usize,
    samples: &[Vec<f64>],
    x: &SparseCodeMatrix,
    rule: UnusedAtomRule,
    streams: &mut LearnerStreams,
) {
    match rule {
        UnusedAtomRule::WorstSample => {
            let mut worst = None;
            let mut worst_norm = 0.0;
            for (s, y) in samples.iter().enumerate() {
                let r = norm2(&x.column(s).residual(y, d));
                if r > worst_norm {
                    worst_norm = r;
                    worst = Some(s);
                }
            }
            if let Some(s) = worst {
                let mut atom = samples[s].clone();
                let norm = norm2(&atom);
                if norm > 0.0 {
                    atom.iter_mut().for_each(|v| *v /= norm);
                    d.set_atom(k, &atom);
                }
            }
        }
        UnusedAtomRule::SharedRandom => {
            let atom = random_unit_vector(&mut streams.atom_reset, d.dim());
            d.set_atom(k, &atom);
        }
    }
}

fn coding_analysis(
    samples: &[Vec<f64>],
    d: &Dictionary,
    x: &SparseCodeMatrix,
    tau: Option<f64>,
) -> IterationAnalysis {
    let eta_max = x.columns().iter().map(|c| c.l1_norm()).fold(0.0, f64::max);
    let min_margin = tau.map(|tau| {
        let mut margin = f64::INFINITY;
        for (s, y) in samples.iter().enumerate() {
            let code = x.column(s);
            let r = code.residual(y, d);
            for (j, atom) in d.atoms().enumerate() {
                if code.support().binary_search(&j).is_err() {
                    margin = margin.min(tau - dot(atom, &r).abs());
                }
            }
        }
        margin
    });
    IterationAnalysis {
        min_margin,
        eta_max,
        atoms: Vec::with_capacity(d.width()),
    }
}

fn atom_analysis(
    samples: &[Vec<f64>],
    d: &Dictionary,
    x: &SparseCodeMatrix,
    k: usize,
    omega: &[usize],
    site_sizes: &[usize],
) -> Result<AtomAnalysis> {
    let (lambda1, lambda2) = if omega.is_empty() {
        (0.0, 0.0)
    } else {
        let e = restricted_residual(samples, d, x, k, omega)?;
        let top = reference_top_eigenpair(&e.outer_gram())?;
        (top.value, top.second_value)
    };
    let mut block_norms = Vec::with_capacity(site_sizes.len());
    let mut start = 0;
    for &size in site_sizes {
        let cols: Vec<Vec<f64>> = (start..start + size)
            .map(|s| error_column(&samples[s], d, x, k, s))
            .collect();
        block_norms.push(if cols.is_empty() {
            0.0
        } else {
            spectral_norm(&Mat::from_columns(&cols)?)?
        });
        start += size;
    }
    Ok(AtomAnalysis {
        lambda1,
        lambda2,
        block_norms,
    })
}

/// Independent K-SVD at each site with the shared seed.
pub fn run_local_ksvd(
    sites: &[Mat],
    k: usize,
    cfg: &KsvdConfig,
) -> Result<Vec<(Dictionary, LearnTrace)>> {
    sites.iter().map(|y| run_ksvd(y, k, cfg)).collect()
}
