//! Cloud K-SVD: every site codes its own data, and each atom is agreed on by
//! a power method whose matrix-vector products are summed across the network
//! by corrected consensus.

use crate::coding::{encode_samples, SparseCodeMatrix, SparseCoder};
use crate::diagnostics::representation_error_samples;
use crate::dictionary::{init_dictionary, reference_vector, Dictionary};
use crate::error::{Error, Result};
use crate::ksvd::{normalize_or_collapse, restricted_residual, LearnerStreams};
use crate::linalg::{norm2, Mat};
use crate::network::{consensus_rounds, raw_corrections, WeightMatrix, CORRECTION_FLOOR};
use crate::rng::random_unit_vector;

pub use crate::ksvd::sign_align;

/// One site's data and current estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteState {
    pub id: usize,
    /// Local samples, one per column of the site's `Y_i`.
    pub samples: Vec<Vec<f64>>,
    pub dictionary: Dictionary,
    pub codes: SparseCodeMatrix,
}

impl SiteState {
    pub fn new(id: usize, y: &Mat, init: Dictionary) -> Result<Self> {
        if y.rows() != init.dim() {
            return Err(Error::InvalidConfig(format!(
                "site {id} data has dimension {}, dictionary has {}",
                y.rows(),
                init.dim()
            )));
        }
        Ok(SiteState {
            id,
            samples: y.columns().collect(),
            codes: SparseCodeMatrix::zeros(init.width(), y.cols()),
            dictionary: init,
        })
    }

    pub fn num_samples(&self) -> usize {
        self.samples.len()
    }
}

/// What a site does when its own power iterate vanishes while others do not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CollapsePolicy {
    /// Fail as soon as any site collapses.
    Fail,
    /// The site keeps its previous iterate; failure only if every site
    /// collapses in the same iteration.
    HoldPrevious,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DpmOptions {
    pub record_history: bool,
    pub collapse: CollapsePolicy,
}

impl Default for DpmOptions {
    fn default() -> Self {
        DpmOptions {
            record_history: false,
            collapse: CollapsePolicy::Fail,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DpmRun {
    /// Final unit iterate at each site.
    pub estimates: Vec<Vec<f64>>,
    /// Per power iteration, every site's unit iterate (when recorded).
    pub history: Vec<Vec<Vec<f64>>>,
    /// `[W^T_c e_1]_i`; sites whose value is below 1e-14 normalize the
    /// uncorrected state, which has the same direction.
    pub corrections: Vec<f64>,
    /// Vectors exchanged over non-self edges.
    pub messages: usize,
    /// Site-iterations in which a collapsed site held its previous iterate.
    pub held: usize,
}

/// Power method on `sum_i parts[i]`, with each product summed by `tc`
/// consensus rounds.
pub fn distributed_power_method(
    parts: &[Mat],
    w: &WeightMatrix,
    tp: usize,
    tc: usize,
    q_init: &[f64],
) -> Result<DpmRun> {
    distributed_power_method_with(parts, w, tp, tc, q_init, DpmOptions::default())
}

pub fn distributed_power_method_with(
    parts: &[Mat],
    w: &WeightMatrix,
    tp: usize,
    tc: usize,
    q_init: &[f64],
    opts: DpmOptions,
) -> Result<DpmRun> {
    let n = q_init.len();
    if parts.len() != w.sites() {
        return Err(Error::InvalidConfig(format!(
            "{} parts for {} sites",
            parts.len(),
            w.sites()
        )));
    }
    if parts.iter().any(|m| m.rows() != n || m.cols() != n) {
        return Err(Error::InvalidConfig("every part must be n x n".into()));
    }
    if tp == 0 || tc == 0 {
        return Err(Error::InvalidConfig(
            "power and consensus iteration counts must be positive".into(),
        ));
    }
    let corrections = raw_corrections(w, tc);
    let mut q: Vec<Vec<f64>> = vec![q_init.to_vec(); parts.len()];
    let mut history = Vec::new();
    let mut held = 0;
    for _ in 0..tp {
        let z: Vec<Vec<f64>> = parts.iter().zip(&q).map(|(m, qi)| m.matvec(qi)).collect();
        let summed = consensus_rounds(w, &z, tc);
        let mut next = Vec::with_capacity(parts.len());
        let mut collapsed = Vec::new();
        for (site, (mut v, &c)) in summed.into_iter().zip(&corrections).enumerate() {
            if c >= CORRECTION_FLOOR {
                v.iter_mut().for_each(|x| *x /= c);
            }
            match normalize_or_collapse(v, site) {
                Ok(u) => next.push(u),
                Err(e) => {
                    collapsed.push(e);
                    next.push(q[site].clone());
                }
            }
        }
        if !collapsed.is_empty() {
            if opts.collapse == CollapsePolicy::Fail || collapsed.len() == parts.len() {
                return Err(collapsed.swap_remove(0));
            }
            held += collapsed.len();
        }
        q = next;
        if opts.record_history {
            history.push(q.clone());
        }
    }
    Ok(DpmRun {
        estimates: q,
        history,
        corrections,
        messages: tp * tc * 2 * w.topology().edge_count(),
        held,
    })
}

/// Centralized power iterates `q_1, ..., q_tp` on `m` from `q_init`.
pub fn power_method_iterates(m: &Mat, q_init: &[f64], tp: usize) -> Result<Vec<Vec<f64>>> {
    let mut q = q_init.to_vec();
    let mut out = Vec::with_capacity(tp);
    for _ in 0..tp {
        q = normalize_or_collapse(m.matvec(&q), 0)?;
        out.push(q.clone());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudConfig {
    pub t0: usize,
    pub iterations: usize,
    pub power_iterations: usize,
    pub consensus_rounds: usize,
    pub seed: u64,
    pub coder: SparseCoder,
    /// Overrides the reference direction derived from `seed`.
    pub d_ref: Option<Vec<f64>>,
    /// Keep every `M_i`, `q_init` and `ω_i` for the diagnostics.
    pub record_parts: bool,
    /// Keep every site's dictionary after each iteration.
    pub record_dictionaries: bool,
}

impl CloudConfig {
    pub fn new(
        t0: usize,
        iterations: usize,
        power_iterations: usize,
        consensus_rounds: usize,
        seed: u64,
    ) -> Self {
        CloudConfig {
            t0,
            iterations,
            power_iterations,
            consensus_rounds,
            seed,
            coder: SparseCoder::Omp,
            d_ref: None,
            record_parts: false,
            record_dictionaries: false,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.iterations == 0 || self.power_iterations == 0 || self.consensus_rounds == 0 {
            return Err(Error::InvalidConfig(
                "T_d, T_p and T_c must all be at least 1".into(),
            ));
        }
        if self.t0 == 0 {
            return Err(Error::InvalidConfig("T0 must be at least 1".into()));
        }
        if let Some(r) = &self.d_ref {
            if r.len() != n || (norm2(r) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidConfig(
                    "reference vector must be unit-norm of length n".into(),
                ));
            }
        }
        Ok(())
    }
}

/// One site's view of one atom update.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteAtomRecord {
    pub omega_size: usize,
    /// `‖Ê_{i,k,R}‖_F` (zero when the site has no sample using the atom).
    pub residual_energy: f64,
}

/// Inputs to one distributed power method, kept for the diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct AtomParts {
    pub q_init: Vec<f64>,
    /// `M_i = Ê_{i,k,R} Ê_{i,k,R}^T`.
    pub parts: Vec<Mat>,
    /// `ω̃_{i,k}` per site.
    pub omegas: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomRecord {
    pub t: usize,
    pub k: usize,
    pub sites: Vec<SiteAtomRecord>,
    /// Re-initialized from the shared stream after a network-wide collapse.
    pub reset: bool,
    pub held: usize,
    pub messages: usize,
    pub parts: Option<AtomParts>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CloudTrace {
    pub sites: usize,
    pub atoms: usize,
    /// Consensus divisors `[W^T_c e_1]_i`, fixed for the run.
    pub corrections: Vec<f64>,
    /// `T_d * K` records, iteration-major.
    pub records: Vec<AtomRecord>,
    /// Pooled representation error after each iteration.
    pub errors: Vec<f64>,
    /// Per iteration, each site's common lasso `τ` (lasso coding only).
    pub taus: Vec<Vec<f64>>,
    /// Per iteration, each site's dictionary (when recorded).
    pub dictionaries: Vec<Vec<Dictionary>>,
}

impl CloudTrace {
    pub fn total_messages(&self) -> usize {
        self.records.iter().map(|r| r.messages).sum()
    }

    pub fn final_error(&self) -> Option<f64> {
        self.errors.last().copied()
    }

    /// Record of atom `k` in iteration `t` (both 0-based).
    pub fn record(&self, t: usize, k: usize) -> Option<&AtomRecord> {
        self.records.get(t * self.atoms + k)
    }
}

/// Builds the sites with the shared initial dictionary and runs cloud K-SVD.
pub fn cloud_ksvd(
    site_data: &[Mat],
    k: usize,
    w: &WeightMatrix,
    cfg: &CloudConfig,
) -> Result<(Vec<SiteState>, CloudTrace)> {
    let n = site_data.first().map_or(0, Mat::rows);
    let init = init_dictionary(n, k, cfg.seed);
    let mut sites = site_data
        .iter()
        .enumerate()
        .map(|(i, y)| SiteState::new(i, y, init.clone()))
        .collect::<Result<Vec<_>>>()?;
    let trace = cloud_ksvd_run(&mut sites, w, cfg)?;
    Ok((sites, trace))
}

/// Runs `cfg.iterations` rounds of cloud K-SVD in place.
pub fn cloud_ksvd_run(
    sites: &mut [SiteState],
    w: &WeightMatrix,
    cfg: &CloudConfig,
) -> Result<CloudTrace> {
    let Some(first) = sites.first() else {
        return Err(Error::InvalidConfig("no sites".into()));
    };
    let n = first.dictionary.dim();
    let k_atoms = first.dictionary.width();
    cfg.validate(n)?;
    if sites.len() != w.sites() {
        return Err(Error::InvalidConfig(format!(
            "{} sites but the network has {}",
            sites.len(),
            w.sites()
        )));
    }
    if sites
        .iter()
        .any(|s| s.dictionary.dim() != n || s.dictionary.width() != k_atoms)
    {
        return Err(Error::InvalidConfig(
            "sites disagree on dictionary shape".into(),
        ));
    }
    if sites.iter().any(|s| s.samples.iter().any(|y| y.len() != n)) {
        return Err(Error::InvalidConfig("site data dimensions differ".into()));
    }
    let d_ref = cfg
        .d_ref
        .clone()
        .unwrap_or_else(|| reference_vector(n, cfg.seed));
    let mut streams = LearnerStreams::new(cfg.seed);
    let opts = DpmOptions {
        record_history: false,
        collapse: CollapsePolicy::HoldPrevious,
    };
    let mut trace = CloudTrace {
        sites: sites.len(),
        atoms: k_atoms,
        corrections: raw_corrections(w, cfg.consensus_rounds),
        records: Vec::with_capacity(cfg.iterations * k_atoms),
        errors: Vec::with_capacity(cfg.iterations),
        taus: Vec::new(),
        dictionaries: Vec::new(),
    };

    for t in 0..cfg.iterations {
        let mut taus = Vec::new();
        for site in sites.iter_mut() {
            let batch = encode_samples(&site.samples, &site.dictionary, cfg.t0, cfg.coder)?;
            site.codes = batch.codes;
            taus.extend(batch.tau);
        }
        if !taus.is_empty() {
            trace.taus.push(taus);
        }

        for k in 0..k_atoms {
            let q_init = random_unit_vector(&mut streams.power_init, n);
            let mut omegas = Vec::with_capacity(sites.len());
            let mut residuals = Vec::with_capacity(sites.len());
            let mut parts = Vec::with_capacity(sites.len());
            let mut site_records = Vec::with_capacity(sites.len());
            for site in sites.iter() {
                let omega = site.codes.row_support(k);
                let e = if omega.is_empty() {
                    None
                } else {
                    Some(restricted_residual(
                        &site.samples,
                        &site.dictionary,
                        &site.codes,
                        k,
                        &omega,
                    )?)
                };
                parts.push(e.as_ref().map_or_else(|| Mat::zeros(n, n), Mat::outer_gram));
                site_records.push(SiteAtomRecord {
                    omega_size: omega.len(),
                    residual_energy: e.as_ref().map_or(0.0, Mat::frobenius_norm),
                });
                omegas.push(omega);
                residuals.push(e);
            }

            let dpm = distributed_power_method_with(
                &parts,
                w,
                cfg.power_iterations,
                cfg.consensus_rounds,
                &q_init,
                opts,
            );
            let (reset, held) = match dpm {
                Ok(run) => {
                    for ((site, q), (e, omega)) in sites
                        .iter_mut()
                        .zip(&run.estimates)
                        .zip(residuals.iter().zip(&omegas))
                    {
                        let atom = sign_align(&d_ref, q);
                        site.dictionary.set_atom(k, &atom);
                        if let Some(e) = e {
                            let x_row = e.tr_matvec(&atom);
                            site.codes.set_row(k, omega, &x_row);
                        }
                    }
                    (false, run.held)
                }
                Err(Error::PowerCollapse { .. }) => {
                    let atom = random_unit_vector(&mut streams.atom_reset, n);
                    for site in sites.iter_mut() {
                        site.dictionary.set_atom(k, &atom);
                    }
                    (true, 0)
                }
                Err(other) => return Err(other),
            };
            trace.records.push(AtomRecord {
                t,
                k,
                sites: site_records,
                reset,
                held,
                messages: cfg.power_iterations
                    * cfg.consensus_rounds
                    * 2
                    * w.topology().edge_count(),
                parts: cfg.record_parts.then(|| AtomParts {
                    q_init: q_init.clone(),
                    parts,
                    omegas,
                }),
            });
        }

        trace.errors.push(pooled_site_error(sites)?);
        if cfg.record_dictionaries {
            trace
                .dictionaries
                .push(sites.iter().map(|s| s.dictionary.clone()).collect());
        }
    }
    Ok(trace)
}

/// `(1/nS) Σ_i Σ_s ‖y_{i,s} − D̂_i x̂_{i,s}‖₂` over all sites.
pub fn pooled_site_error(sites: &[SiteState]) -> Result<f64> {
    let n = sites.first().map_or(1, |s| s.dictionary.dim()) as f64;
    let total: usize = sites.iter().map(SiteState::num_samples).sum();
    let mut sum = 0.0;
    for site in sites {
        let e = representation_error_samples(&site.samples, &site.dictionary, &site.codes)?;
        sum += e * n * site.num_samples() as f64;
    }
    Ok(sum / (n * total as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::projector_distance;
    use crate::linalg::outer;
    use crate::network::{gen_erdos_renyi_connected, local_degree_weights, Topology};
    use crate::rng::{gaussian_vector, stream_rng, Stream};

    fn random_psd(n: usize, seed: u64) -> Mat {
        let mut rng = stream_rng(seed, Stream::Synthetic);
        Mat::from_vec(n, n + 2, gaussian_vector(&mut rng, n * (n + 2)))
            .unwrap()
            .outer_gram()
    }

    #[test]
    fn single_site_matches_centralized_power_method() {
        let m = random_psd(5, 1);
        let w = local_degree_weights(&Topology::complete(1));
        let q0 = random_unit_vector(&mut stream_rng(1, Stream::PowerInit), 5);
        let run = distributed_power_method(std::slice::from_ref(&m), &w, 12, 3, &q0).unwrap();
        let central = power_method_iterates(&m, &q0, 12).unwrap();
        assert_eq!(run.estimates[0], central[11]);
        assert_eq!(run.messages, 0);
    }

    #[test]
    fn uniform_weights_match_centralized_iterates() {
        let m = random_psd(6, 2);
        let parts = vec![m.scale(0.25); 4];
        let w = local_degree_weights(&Topology::complete(4));
        let q0 = random_unit_vector(&mut stream_rng(2, Stream::PowerInit), 6);
        let run = distributed_power_method_with(
            &parts,
            &w,
            15,
            1,
            &q0,
            DpmOptions {
                record_history: true,
                ..DpmOptions::default()
            },
        )
        .unwrap();
        let central = power_method_iterates(&m, &q0, 15).unwrap();
        for (step, c) in run.history.iter().zip(&central) {
            for q in step {
                let diff = q
                    .iter()
                    .zip(c)
                    .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
                assert!(diff <= 1e-12, "diff {diff}");
            }
        }
    }

    #[test]
    fn zero_parts_collapse() {
        let w = local_degree_weights(&Topology::complete(2));
        let parts = vec![Mat::zeros(3, 3); 2];
        let q0 = vec![1.0, 0.0, 0.0];
        assert!(matches!(
            distributed_power_method(&parts, &w, 2, 2, &q0),
            Err(Error::PowerCollapse { .. })
        ));
    }

    #[test]
    fn sign_align_fixes_antipodes() {
        let r = vec![0.0, 1.0];
        assert_eq!(sign_align(&r, &[0.6, -0.8]), vec![-0.6, 0.8]);
        assert_eq!(sign_align(&r, &[1.0, 0.0]), vec![1.0, 0.0]);
    }

    #[test]
    fn replicated_data_on_complete_graph_stays_in_sync() {
        let mut rng = stream_rng(3, Stream::Synthetic);
        let cols: Vec<Vec<f64>> = (0..30)
            .map(|_| {
                let mut v = gaussian_vector(&mut rng, 6);
                let n = norm2(&v);
                v.iter_mut().for_each(|x| *x /= n);
                v
            })
            .collect();
        let y = Mat::from_columns(&cols).unwrap();
        let w = local_degree_weights(&Topology::complete(3));
        let cfg = CloudConfig {
            record_dictionaries: true,
            ..CloudConfig::new(2, 4, 8, 1, 5)
        };
        let (_, trace) = cloud_ksvd(&[y.clone(), y.clone(), y], 10, &w, &cfg).unwrap();
        for dicts in &trace.dictionaries {
            for k in 0..10 {
                for other in &dicts[1..] {
                    assert!(projector_distance(dicts[0].atom(k), other.atom(k)).unwrap() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn message_accounting() {
        let top = gen_erdos_renyi_connected(6, 0.5, 4).unwrap();
        let w = local_degree_weights(&top);
        let mut rng = stream_rng(4, Stream::Synthetic);
        let sites: Vec<Mat> = (0..6)
            .map(|_| Mat::from_vec(5, 8, gaussian_vector(&mut rng, 40)).unwrap())
            .collect();
        let cfg = CloudConfig::new(2, 2, 3, 4, 1);
        let (states, trace) = cloud_ksvd(&sites, 7, &w, &cfg).unwrap();
        assert_eq!(trace.records.len(), 2 * 7);
        for r in &trace.records {
            assert_eq!(r.messages, 3 * 4 * 2 * top.edge_count());
        }
        for s in &states {
            assert!(s.dictionary.max_norm_deviation() <= 1e-12);
        }
    }

    #[test]
    fn rejects_mismatched_dimensions() {
        let w = local_degree_weights(&Topology::complete(2));
        let a = Mat::zeros(4, 3);
        let b = Mat::zeros(5, 3);
        let init = init_dictionary(4, 3, 0);
        let mut sites = vec![SiteState::new(0, &a, init.clone()).unwrap()];
        assert!(SiteState::new(1, &b, init).is_err());
        assert!(cloud_ksvd_run(&mut sites, &w, &CloudConfig::new(1, 1, 1, 1, 0)).is_err());
    }

    #[test]
    fn rank_one_sum_is_found_exactly() {
        let mut rng = stream_rng(7, Stream::Synthetic);
        let u = random_unit_vector(&mut rng, 4);
        let big = outer(&u, &u);
        let parts = vec![big.scale(2.0), big.scale(1.0), Mat::zeros(4, 4)];
        let w = local_degree_weights(&Topology::path(3));
        let q0 = random_unit_vector(&mut rng, 4);
        let run = distributed_power_method(&parts, &w, 3, 50, &q0).unwrap();
        for q in &run.estimates {
            assert!(projector_distance(q, &u).unwrap() < 1e-10);
        }
    }
}
