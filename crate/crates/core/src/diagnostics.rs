//! Error metrics and the analysis constants computed from recorded runs.

use crate::cloud::power_method_iterates;
use crate::cloud::CloudTrace;
use crate::coding::SparseCodeMatrix;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::ksvd::LearnTrace;
use crate::linalg::{
    dot, min_eigenvalue_psd, norm2, outer, reference_top_eigenpair, spectral_norm, Mat,
};
use crate::network::{estimate_mixing_time, WeightMatrix};

/// `(1/nS) Σ_s ‖y_s − D x_s‖₂` over the columns of `y`.
pub fn representation_error(y: &Mat, d: &Dictionary, x: &SparseCodeMatrix) -> Result<f64> {
    let samples: Vec<Vec<f64>> = y.columns().collect();
    representation_error_samples(&samples, d, x)
}

pub fn representation_error_samples(
    samples: &[Vec<f64>],
    d: &Dictionary,
    x: &SparseCodeMatrix,
) -> Result<f64> {
    if samples.len() != x.num_samples() || x.width() != d.width() {
        return Err(Error::InvalidInput(
            "data, dictionary and codes disagree in shape".into(),
        ));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = samples
        .iter()
        .zip(x.columns())
        .map(|(y, c)| norm2(&c.residual(y, d)))
        .sum();
    Ok(total / (d.dim() * samples.len()) as f64)
}

const UNIT_CHECK: f64 = 1e-8;

/// `‖uuᵀ − vvᵀ‖₂`, the sine of the angle between unit vectors `u` and `v`.
pub fn projector_distance(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput("vectors differ in length".into()));
    }
    for w in [u, v] {
        if (norm2(w) - 1.0).abs() > UNIT_CHECK {
            return Err(Error::InvalidInput(format!("vector has norm {}", norm2(w))));
        }
    }
    spectral_norm(&outer(u, u).sub(&outer(v, v))?)
}

/// Mean projector distance between each site's atoms and the matching
/// atoms of `central`.
pub fn avg_atom_error(central: &Dictionary, sites: &[Dictionary]) -> Result<f64> {
    if sites.is_empty() {
        return Err(Error::InvalidInput("no site dictionaries".into()));
    }
    let mut sum = 0.0;
    for d in sites {
        if d.width() != central.width() || d.dim() != central.dim() {
            return Err(Error::InvalidInput("site dictionary shape differs".into()));
        }
        for k in 0..central.width() {
            sum += projector_distance(central.atom(k), d.atom(k))?;
        }
    }
    Ok(sum / (sites.len() * central.width()) as f64)
}

/// How the restricted-isometry constant was minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportScope {
    /// Every `T0`-subset of atoms.
    Exhaustive,
    /// Only supports that occurred in the run.
    Realized,
}

impl SupportScope {
    pub fn label(self) -> &'static str {
        match self {
            SupportScope::Exhaustive => "exhaustive",
            SupportScope::Realized => "realized",
        }
    }
}

const EXHAUSTIVE_LIMIT: f64 = 1e5;

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Smallest squared singular value of `D_I`.
fn min_sq_singular(d: &Dictionary, support: &[usize]) -> f64 {
    let gram = Mat::from_fn(support.len(), support.len(), |a, b| {
        dot(d.atom(support[a]), d.atom(support[b]))
    });
    min_eigenvalue_psd(&gram)
}

/// Minimum of `σ_T0(D_I)²` over all `T0`-subsets `I`.
pub fn c2_prime_exhaustive(d: &Dictionary, t0: usize) -> f64 {
    let k = d.width();
    let mut best = f64::INFINITY;
    let mut idx: Vec<usize> = (0..t0).collect();
    if t0 == 0 || t0 > k {
        return best;
    }
    loop {
        best = best.min(min_sq_singular(d, &idx));
        // Next combination in lexicographic order.
        let mut i = t0;
        while i > 0 && idx[i - 1] == k - t0 + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return best;
        }
        idx[i - 1] += 1;
        for j in i..t0 {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// `(C3′, C3)` from per-atom `(λ₁, λ₂)` pairs; atoms with `λ₁ = 0` are skipped.
pub fn p3_constants(lambdas: &[(f64, f64)]) -> (f64, f64) {
    let used: Vec<&(f64, f64)> = lambdas.iter().filter(|(l1, _)| *l1 > 0.0).collect();
    let c3_prime = used.iter().map(|(l1, l2)| l2 / l1).fold(0.0, f64::max);
    let l1_min = used.iter().map(|(l1, _)| *l1).fold(f64::INFINITY, f64::min);
    let c3 = (1.0 / (l1_min * (1.0 - c3_prime))).max(1.0);
    (c3_prime, c3)
}

/// `C2 = (√C2′ − C1² τ_min / 44)²`.
pub fn c2_from(c2_prime: f64, c1: f64, tau_min: f64) -> f64 {
    (c2_prime.sqrt() - c1 * c1 * tau_min / 44.0).powi(2)
}

/// Constants of the centralized run.
#[derive(Debug, Clone, PartialEq)]
pub struct KsvdConstants {
    pub c1: f64,
    pub c2_prime: f64,
    pub c2: f64,
    pub c3_prime: f64,
    pub c3: f64,
    pub c4: f64,
    pub tau_min: f64,
    pub eta_tau_max: f64,
    pub c2_scope: SupportScope,
    /// Every recorded coding margin, for re-checking `C1`.
    pub margins: Vec<f64>,
    /// Every recorded block norm, for re-checking `C4`.
    pub block_norms: Vec<f64>,
}

/// Computes `C1`–`C4` from a lasso-coded run recorded with snapshots and
/// per-site analysis.
pub fn compute_ksvd_constants(trace: &LearnTrace, t0: usize) -> Result<KsvdConstants> {
    if trace.iterations.is_empty() {
        return Err(Error::InsufficientTrace("no iterations recorded".into()));
    }
    let mut margins = Vec::new();
    let mut taus = Vec::new();
    let mut eta_tau_max = 0.0f64;
    let mut lambdas = Vec::new();
    let mut block_norms = Vec::new();
    let mut c2_prime = f64::INFINITY;
    let mut scope = SupportScope::Exhaustive;
    for (t, rec) in trace.iterations.iter().enumerate() {
        let snap = rec.snapshot.as_ref().ok_or_else(|| {
            Error::InsufficientTrace(format!("iteration {} has no snapshot", t + 1))
        })?;
        let an = rec.analysis.as_ref().ok_or_else(|| {
            Error::InsufficientTrace(format!("iteration {} has no analysis", t + 1))
        })?;
        let (Some(tau), Some(margin)) = (rec.tau, an.min_margin) else {
            return Err(Error::InsufficientTrace("run was not lasso-coded".into()));
        };
        taus.push(tau);
        margins.push(margin);
        eta_tau_max = eta_tau_max.max(an.eta_max);
        for a in &an.atoms {
            lambdas.push((a.lambda1, a.lambda2));
            block_norms.extend(&a.block_norms);
        }
        let d = &snap.dict_before;
        if binomial(d.width(), t0) <= EXHAUSTIVE_LIMIT {
            c2_prime = c2_prime.min(c2_prime_exhaustive(d, t0));
        } else {
            scope = SupportScope::Realized;
            for code in snap.codes_coded.columns() {
                if code.nnz() > 0 {
                    c2_prime = c2_prime.min(min_sq_singular(d, code.support()));
                }
            }
        }
    }
    let c1 = margins.iter().copied().fold(f64::INFINITY, f64::min);
    let tau_min = taus.iter().copied().fold(f64::INFINITY, f64::min);
    let (c3_prime, c3) = p3_constants(&lambdas);
    let c4 = block_norms.iter().copied().fold(1.0, f64::max);
    Ok(KsvdConstants {
        c1,
        c2_prime,
        c2: c2_from(c2_prime, c1, tau_min),
        c3_prime,
        c3,
        c4,
        tau_min,
        eta_tau_max,
        c2_scope: scope,
        margins,
        block_norms,
    })
}

/// Settings for [`compute_convergence_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceOptions {
    /// Requested final atom accuracy; clamped into its admissible interval.
    pub delta_d: f64,
    /// Power iterations used by the run.
    pub power_iterations: usize,
    /// Largest per-site sample count.
    pub s_max: usize,
    pub t0: usize,
}

/// Every analysis quantity of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisParams {
    pub c1: f64,
    pub c2_prime: f64,
    pub c2: f64,
    pub c3_prime: f64,
    pub c3: f64,
    pub c4: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub mu: f64,
    pub nu: f64,
    pub zeta: f64,
    /// Power-method accuracy `ε` used in the `T_p` bound.
    pub epsilon: f64,
    /// `μ ν^{T_p} + 4 ε^{3 T_p}` at the run's `T_p`.
    pub epsilon_param: f64,
    pub delta_d: f64,
    pub delta_d_clamped: bool,
    pub tau_min: f64,
    pub eta_tau_max: f64,
    pub t_mix: usize,
    pub required_tp: f64,
    /// `T_p T_mix ln(2αβ/ε) + T_mix ln(γ√N/α)`, the consensus-round scale.
    pub tc_scale: f64,
    pub c2_scope: SupportScope,
}

impl AnalysisParams {
    /// `(name, value, definition)` rows for reports.
    pub fn entries(&self) -> Vec<(&'static str, f64, &'static str)> {
        vec![
            ("C1", self.c1, "min over t,s and off-support j of tau_t - |<d_j, y_s - D x_s>|"),
            ("C2_prime", self.c2_prime, "min over t and supports I of sigma_T0(D_I)^2"),
            ("C2", self.c2, "(sqrt(C2') - C1^2 tau_min / 44)^2"),
            ("C3_prime", self.c3_prime, "max over t,k of lambda2 / lambda1 of E_kR E_kR^T"),
            ("C3", self.c3, "max(1, 1 / (min lambda1 * (1 - C3')))"),
            ("C4", self.c4, "max(1, max over t,i,k of ||E_ik||_2)"),
            ("alpha", self.alpha, "max over t,k of sum_i ||M_i||_2"),
            ("beta", self.beta, "max over t,k,t_p of 1 / ||M q_c(t_p)||_2"),
            ("gamma", self.gamma, "max over t,k of sqrt(sum_i ||M_i||_F^2)"),
            ("mu", self.mu, "max(1, max over t,k of tan(theta)) with cos(theta) = |<u1, q_init>|"),
            ("nu", self.nu, "max over t,k of lambda2 / lambda1 of sum_i M_i"),
            ("zeta", self.zeta, "K sqrt(2 S_max) (6 sqrt(K T0) / (tau_min C2) + eta_max)"),
            ("epsilon", self.epsilon, "0.5 min((10 alpha^2 beta^2)^(-1/(3 T_p)), ((1 - nu) / 4)^(1/3))"),
            ("epsilon_param", self.epsilon_param, "mu nu^T_p + 4 epsilon^(3 T_p)"),
            ("delta_d", self.delta_d, "target accuracy in (0, min(1/sqrt(2), C1^2 tau_min / (44 sqrt(2K))))"),
            (
                "delta_d_clamped",
                if self.delta_d_clamped { 1.0 } else { 0.0 },
                "1 if the requested delta_d was moved into its interval",
            ),
            ("tau_min", self.tau_min, "min over t of the lasso tau"),
            ("eta_tau_max", self.eta_tau_max, "max over t,s of ||x_s||_1"),
            ("T_mix", self.t_mix as f64, "min t >= 1 with max_i ||e_i^T W^t - 1^T/N||_2 <= 1/2"),
            (
                "required_Tp",
                self.required_tp,
                "ceil((2(T_d K - 2) ln(8 C3 C4^2 N + 5) + (T_d - 1) ln(1 + zeta) + ln(8 C3 C4 mu N sqrt(n) / delta_d)) / ln(1 / (nu + 4 epsilon^3)))",
            ),
            ("Tc_scale", self.tc_scale, "T_p T_mix ln(2 alpha beta / epsilon) + T_mix ln(gamma sqrt(N) / alpha)"),
            (
                "C2_exhaustive",
                if self.c2_scope == SupportScope::Exhaustive { 1.0 } else { 0.0 },
                "1 if C2' was minimized over every T0-subset, 0 if over realized supports",
            ),
        ]
    }
}

/// Network-side parameters of a cloud run recorded with its parts, combined
/// with the centralized constants.
pub fn compute_convergence_params(
    ctrace: &CloudTrace,
    w: &WeightMatrix,
    constants: &KsvdConstants,
    opts: &ConvergenceOptions,
) -> Result<AnalysisParams> {
    if ctrace.records.is_empty() {
        return Err(Error::InsufficientTrace(
            "cloud trace has no atom records".into(),
        ));
    }
    let tp = opts.power_iterations;
    if tp == 0 {
        return Err(Error::InvalidConfig(
            "power iterations must be positive".into(),
        ));
    }
    let mut alpha = 0.0f64;
    let mut beta = 0.0f64;
    let mut gamma = 0.0f64;
    let mut nu = 0.0f64;
    let mut tan_max = 0.0f64;
    let mut violations = Vec::new();
    let mut n = 0;
    for rec in &ctrace.records {
        let parts = rec
            .parts
            .as_ref()
            .ok_or_else(|| Error::InsufficientTrace("cloud run did not record its parts".into()))?;
        let mut total = parts.parts[0].clone();
        for m in &parts.parts[1..] {
            total.add_assign(m);
        }
        n = total.rows();
        if total.max_abs() == 0.0 {
            continue;
        }
        let mut spec_sum = 0.0;
        let mut frob_sq = 0.0;
        for m in &parts.parts {
            spec_sum += spectral_norm(m)?;
            frob_sq += m.frobenius_norm().powi(2);
        }
        alpha = alpha.max(spec_sum);
        gamma = gamma.max(frob_sq.sqrt());

        let top = reference_top_eigenpair(&total)?;
        let ratio = top.gap_ratio();
        if ratio >= 1.0 {
            violations.push((rec.t + 1, rec.k + 1));
        }
        nu = nu.max(ratio);
        let cos = dot(&top.vector, &parts.q_init).abs().min(1.0);
        let tan = if cos == 0.0 {
            f64::INFINITY
        } else {
            (1.0 - cos * cos).sqrt() / cos
        };
        tan_max = tan_max.max(tan);

        for q in power_method_iterates(&total, &parts.q_init, tp)? {
            beta = beta.max(1.0 / norm2(&total.matvec(&q)));
        }
    }
    if !violations.is_empty() {
        return Err(Error::GapViolation(violations));
    }
    let sites = ctrace.sites as f64;
    let k = ctrace.atoms as f64;
    let t_d = (ctrace.records.len() / ctrace.atoms) as f64;
    let t0 = opts.t0 as f64;
    let mu = tan_max.max(1.0);
    let c = constants;

    let zeta = k
        * (2.0 * opts.s_max as f64).sqrt()
        * (6.0 * (k * t0).sqrt() / (c.tau_min * c.c2) + c.eta_tau_max);

    let delta_upper =
        std::f64::consts::FRAC_1_SQRT_2.min(c.c1 * c.c1 * c.tau_min / (44.0 * (2.0 * k).sqrt()));
    let (delta_d, delta_d_clamped) = if opts.delta_d > 0.0 && opts.delta_d < delta_upper {
        (opts.delta_d, false)
    } else {
        (0.99 * delta_upper, true)
    };

    let tpf = tp as f64;
    let epsilon = 0.5
        * (10.0 * alpha * alpha * beta * beta)
            .powf(-1.0 / (3.0 * tpf))
            .min(((1.0 - nu) / 4.0).cbrt());
    let epsilon_param = mu * nu.powf(tpf) + 4.0 * epsilon.powf(3.0 * tpf);

    let growth = 8.0 * c.c3 * c.c4 * c.c4 * sites + 5.0;
    let numerator = 2.0 * (t_d * k - 2.0) * growth.ln()
        + (t_d - 1.0) * (1.0 + zeta).ln()
        + (8.0 * c.c3 * c.c4 * mu * sites * (n as f64).sqrt() / delta_d).ln();
    let denominator = (1.0 / (nu + 4.0 * epsilon.powi(3))).ln();
    let required_tp = (numerator / denominator).ceil().max(1.0);

    let t_mix = estimate_mixing_time(w)?;
    let tc_scale = tpf * t_mix as f64 * (2.0 * alpha * beta / epsilon).ln()
        + t_mix as f64 * (gamma * sites.sqrt() / alpha).ln();

    Ok(AnalysisParams {
        c1: c.c1,
        c2_prime: c.c2_prime,
        c2: c.c2,
        c3_prime: c.c3_prime,
        c3: c.c3,
        c4: c.c4,
        alpha,
        beta,
        gamma,
        mu,
        nu,
        zeta,
        epsilon,
        epsilon_param,
        delta_d,
        delta_d_clamped,
        tau_min: c.tau_min,
        eta_tau_max: c.eta_tau_max,
        t_mix,
        required_tp,
        tc_scale,
        c2_scope: c.c2_scope,
    })
}

/// Fraction of `(t, k, site)` triples whose cloud support `ω̃_{i,k}` equals
/// the centralized support restricted to that site's samples.
///
/// `central` must be recorded with snapshots over the pooled data in site
/// order; `site_sizes` gives the number of samples per site.
pub fn support_agreement(
    ctrace: &CloudTrace,
    central: &LearnTrace,
    site_sizes: &[usize],
) -> Result<f64> {
    let mut agree = 0usize;
    let mut total = 0usize;
    for rec in &ctrace.records {
        let parts = rec
            .parts
            .as_ref()
            .ok_or_else(|| Error::InsufficientTrace("cloud run did not record supports".into()))?;
        let snap = central
            .iterations
            .get(rec.t)
            .and_then(|r| r.snapshot.as_ref())
            .ok_or_else(|| Error::InsufficientTrace("centralized snapshot missing".into()))?;
        let omega = snap.codes_coded.row_support(rec.k);
        let mut start = 0;
        for (site, &size) in site_sizes.iter().enumerate() {
            let local: Vec<usize> = omega
                .iter()
                .filter(|&&s| s >= start && s < start + size)
                .map(|&s| s - start)
                .collect();
            if parts.omegas.get(site) == Some(&local) {
                agree += 1;
            }
            total += 1;
            start += size;
        }
    }
    if total == 0 {
        return Err(Error::InsufficientTrace("no supports to compare".into()));
    }
    Ok(agree as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::{AtomParts, AtomRecord};
    use crate::coding::SparseCode;
    use crate::network::{local_degree_weights, Topology};
    use crate::rng::{random_unit_vector, stream_rng, Stream};
    use proptest::prelude::*;

    #[test]
    fn exact_codes_have_zero_error() {
        let d = Dictionary::from_columns_normalized(&Mat::identity(3)).unwrap();
        let y = Mat::from_columns(&[vec![2.0, 0.0, 0.0], vec![0.0, -1.0, 0.0]]).unwrap();
        let x = SparseCodeMatrix::new(
            3,
            vec![
                SparseCode::from_pairs(3, [(0, 2.0)]).unwrap(),
                SparseCode::from_pairs(3, [(1, -1.0)]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(representation_error(&y, &d, &x).unwrap(), 0.0);
    }

    #[test]
    fn empty_codes_give_one_over_n() {
        let d = Dictionary::from_columns_normalized(&Mat::identity(4)).unwrap();
        let y = Mat::from_columns(&[vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 0.6, 0.8, 0.0]]).unwrap();
        let x = SparseCodeMatrix::zeros(4, 2);
        assert!((representation_error(&y, &d, &x).unwrap() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn three_sample_error_matches_manual_sum() {
        let d = Dictionary::from_columns_normalized(
            &Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
        )
        .unwrap();
        let y = Mat::from_columns(&[vec![1.0, 2.0], vec![-1.0, 0.5], vec![0.0, 3.0]]).unwrap();
        let x = SparseCodeMatrix::new(
            2,
            vec![
                SparseCode::from_pairs(2, [(0, 1.0)]).unwrap(),
                SparseCode::from_pairs(2, [(1, 0.5)]).unwrap(),
                SparseCode::zero(2),
            ],
        )
        .unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let r0 = ((1.0f64 - 1.0).powi(2) + 2.0f64.powi(2)).sqrt();
        let r1 = ((-1.0 - 0.5 * s).powi(2) + (0.5 - 0.5 * s).powi(2)).sqrt();
        let r2 = 3.0;
        let manual = (r0 + r1 + r2) / 6.0;
        assert!((representation_error(&y, &d, &x).unwrap() - manual).abs() < 1e-14);
    }

    #[test]
    fn projector_distance_cases() {
        assert!(projector_distance(&[1.0, 0.0], &[1.0, 0.0]).unwrap() < 1e-15);
        assert!((projector_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert!(matches!(
            projector_distance(&[1.0, 1.0], &[1.0, 0.0]),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn projector_distance_is_sine_of_angle() {
        let mut rng = stream_rng(3, Stream::Synthetic);
        for _ in 0..50 {
            let u = random_unit_vector(&mut rng, 6);
            let v = random_unit_vector(&mut rng, 6);
            let c = dot(&u, &v);
            let sine = (1.0 - c * c).sqrt();
            assert!((projector_distance(&u, &v).unwrap() - sine).abs() < 1e-10);
        }
    }

    #[test]
    fn orthonormal_dictionary_has_unit_c2_prime() {
        let d = Dictionary::from_columns_normalized(&Mat::identity(5)).unwrap();
        assert!((c2_prime_exhaustive(&d, 1) - 1.0).abs() < 1e-15);
        assert!((c2_prime_exhaustive(&d, 3) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn p3_hand_evaluation() {
        let (c3p, c3) = p3_constants(&[(2.0, 1.0), (2.0, 1.0)]);
        assert!((c3p - 0.5).abs() < 1e-15);
        assert_eq!(c3, 1.0);
    }

    #[test]
    fn c2_formula() {
        assert!((c2_from(0.25, 0.0, 1.0) - 0.25).abs() < 1e-15);
        let v = c2_from(0.5, 0.2, 0.3);
        assert!((v - (0.5f64.sqrt() - 0.04 * 0.3 / 44.0).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn combination_count_matches_binomial() {
        assert_eq!(binomial(12, 2), 66.0);
        assert_eq!(binomial(40, 3), 9880.0);
    }

    fn single_part_trace(e: &Mat, q_init: Vec<f64>) -> CloudTrace {
        CloudTrace {
            sites: 1,
            atoms: 1,
            corrections: vec![1.0],
            records: vec![AtomRecord {
                t: 0,
                k: 0,
                sites: Vec::new(),
                reset: false,
                held: 0,
                messages: 0,
                parts: Some(AtomParts {
                    q_init,
                    parts: vec![e.outer_gram()],
                    omegas: vec![vec![0, 1]],
                }),
            }],
            errors: vec![0.0],
            taus: Vec::new(),
            dictionaries: Vec::new(),
        }
    }

    fn unit_constants() -> KsvdConstants {
        KsvdConstants {
            c1: 0.1,
            c2_prime: 1.0,
            c2: 1.0,
            c3_prime: 0.5,
            c3: 1.0,
            c4: 1.0,
            tau_min: 0.5,
            eta_tau_max: 1.0,
            c2_scope: SupportScope::Exhaustive,
            margins: vec![0.1],
            block_norms: vec![1.0],
        }
    }

    #[test]
    fn convergence_params_hand_evaluation() {
        let e = Mat::diag(&[2.0, 1.0]);
        let q0 = vec![0.6, 0.8];
        let trace = single_part_trace(&e, q0);
        let w = local_degree_weights(&Topology::complete(1));
        let opts = ConvergenceOptions {
            delta_d: 0.01,
            power_iterations: 3,
            s_max: 2,
            t0: 1,
        };
        let p = compute_convergence_params(&trace, &w, &unit_constants(), &opts).unwrap();
        assert!((p.alpha - 4.0).abs() < 1e-10);
        assert!((p.gamma - 17f64.sqrt()).abs() < 1e-12);
        assert!((p.nu - 0.25).abs() < 1e-10);
        assert!((p.mu - 0.8 / 0.6).abs() < 1e-8);
        assert_eq!(p.t_mix, 1);
        // beta by hand: power iterates on diag(4, 1) from (0.6, 0.8).
        let mut q = [0.6f64, 0.8];
        let mut beta = 0.0f64;
        for _ in 0..3 {
            let v = [4.0 * q[0], q[1]];
            let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
            q = [v[0] / nv, v[1] / nv];
            let mq = [4.0 * q[0], q[1]];
            beta = beta.max(1.0 / (mq[0] * mq[0] + mq[1] * mq[1]).sqrt());
        }
        assert!((p.beta - beta).abs() < 1e-12);
    }

    #[test]
    fn zeta_matches_formula() {
        let e = Mat::diag(&[2.0, 1.0]);
        let trace = single_part_trace(&e, vec![0.6, 0.8]);
        let w = local_degree_weights(&Topology::complete(1));
        let c = unit_constants();
        let opts = ConvergenceOptions {
            delta_d: 0.01,
            power_iterations: 2,
            s_max: 100,
            t0: 3,
        };
        let p = compute_convergence_params(&trace, &w, &c, &opts).unwrap();
        let by_hand = 1.0 * (200f64).sqrt() * (6.0 * 3f64.sqrt() / (0.5 * 1.0) + 1.0);
        assert!((p.zeta - by_hand).abs() < 1e-9 * by_hand);
        // 0.01 lies above C1^2 tau_min / (44 sqrt(2)) for these constants.
        let upper = 0.1 * 0.1 * 0.5 / (44.0 * 2f64.sqrt());
        assert!(p.delta_d_clamped);
        assert!(p.delta_d > 0.0 && p.delta_d < upper);
        assert!(p.required_tp >= 1.0 && p.required_tp.is_finite());
    }

    #[test]
    fn gap_violation_is_reported() {
        let e = Mat::identity(2);
        let trace = single_part_trace(&e, vec![0.6, 0.8]);
        let w = local_degree_weights(&Topology::complete(1));
        let opts = ConvergenceOptions {
            delta_d: 0.01,
            power_iterations: 2,
            s_max: 2,
            t0: 1,
        };
        match compute_convergence_params(&trace, &w, &unit_constants(), &opts) {
            Err(Error::GapViolation(v)) => assert_eq!(v, vec![(1, 1)]),
            other => panic!("expected gap violation, got {other:?}"),
        }
    }

    #[test]
    fn missing_snapshots_are_insufficient() {
        let trace = LearnTrace::default();
        assert!(matches!(
            compute_ksvd_constants(&trace, 2),
            Err(Error::InsufficientTrace(_))
        ));
    }

    proptest! {
        #[test]
        fn projector_distance_is_sign_invariant(seed in 0u64..10_000) {
            let mut rng = stream_rng(seed, Stream::Synthetic);
            let u = random_unit_vector(&mut rng, 5);
            let v = random_unit_vector(&mut rng, 5);
            let neg: Vec<f64> = u.iter().map(|x| -x).collect();
            prop_assert_eq!(projector_distance(&u, &v).unwrap(), projector_distance(&neg, &v).unwrap());
        }

        #[test]
        fn projector_distance_bounds_vector_distance(seed in 0u64..10_000) {
            let mut rng = stream_rng(seed, Stream::Synthetic);
            let u = random_unit_vector(&mut rng, 4);
            let mut v = random_unit_vector(&mut rng, 4);
            if dot(&u, &v) < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
            prop_assert!(norm2(&diff) <= std::f64::consts::SQRT_2 * projector_distance(&u, &v).unwrap() + 1e-10);
        }
    }
}
