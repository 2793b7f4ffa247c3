//! Synthetic union-of-subspaces data distributed over sites.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{axpy, normalize, Mat};
use crate::rng::{random_unit_vector, stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub sites: usize,
    pub samples_per_site: usize,
    pub n: usize,
    pub k: usize,
    pub t0: usize,
    pub sigma2: f64,
}

impl SyntheticConfig {
    /// Atoms available to each site: `⌈0.9 K⌉`.
    pub fn subdictionary_size(&self) -> usize {
        (0.9 * self.k as f64).ceil() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub truth: Dictionary,
    /// `n x S_i` data per site, unit-norm columns.
    pub sites: Vec<Mat>,
    /// Atom indices available to each site.
    pub subdictionaries: Vec<Vec<usize>>,
    /// Atoms combined into each sample, per site.
    pub atoms_used: Vec<Vec<Vec<usize>>>,
}

impl SyntheticData {
    /// All sites' samples side by side, in site order.
    pub fn pooled(&self) -> Mat {
        let refs: Vec<&Mat> = self.sites.iter().collect();
        Mat::hstack(&refs).expect("sites share a dimension")
    }
}

/// Ground-truth dictionary with uniformly random unit atoms; each site draws a
/// random subdictionary, and each sample combines `T0` of its atoms with
/// standard normal weights plus `N(0, σ²)` noise, then is normalized.
pub fn gen_synthetic_sites(cfg: &SyntheticConfig, seed: u64) -> Result<SyntheticData> {
    let sub = cfg.subdictionary_size();
    if cfg.n == 0 || cfg.k == 0 || cfg.sites == 0 || cfg.samples_per_site == 0 {
        return Err(Error::InvalidConfig(
            "synthetic dimensions must be positive".into(),
        ));
    }
    if cfg.t0 == 0 || cfg.t0 > sub || sub > cfg.k {
        return Err(Error::InvalidConfig(format!(
            "T0 = {} must be in 1..={sub} (subdictionary of {} atoms)",
            cfg.t0, cfg.k
        )));
    }
    if !(cfg.sigma2 >= 0.0) {
        return Err(Error::InvalidConfig(
            "noise variance must be non-negative".into(),
        ));
    }
    let mut rng = stream_rng(seed, Stream::Synthetic);
    let atoms: Vec<Vec<f64>> = (0..cfg.k)
        .map(|_| random_unit_vector(&mut rng, cfg.n))
        .collect();
    let truth = Dictionary::from_atoms(&atoms)?;
    let sigma = cfg.sigma2.sqrt();

    let mut sites = Vec::with_capacity(cfg.sites);
    let mut subdictionaries = Vec::with_capacity(cfg.sites);
    let mut atoms_used = Vec::with_capacity(cfg.sites);
    for _ in 0..cfg.sites {
        let mut subset = sample(&mut rng, cfg.k, sub).into_vec();
        subset.sort_unstable();
        let mut columns = Vec::with_capacity(cfg.samples_per_site);
        let mut used = Vec::with_capacity(cfg.samples_per_site);
        for _ in 0..cfg.samples_per_site {
            let mut chosen: Vec<usize> = sample(&mut rng, sub, cfg.t0)
                .into_iter()
                .map(|p| subset[p])
                .collect();
            chosen.sort_unstable();
            let mut y = vec![0.0; cfg.n];
            for &a in &chosen {
                let c: f64 = rng.sample(StandardNormal);
                axpy(c, truth.atom(a), &mut y);
            }
            for v in y.iter_mut() {
                let e: f64 = rng.sample(StandardNormal);
                *v += sigma * e;
            }
            normalize(&mut y);
            columns.push(y);
            used.push(chosen);
        }
        sites.push(Mat::from_columns(&columns)?);
        subdictionaries.push(subset);
        atoms_used.push(used);
    }
    Ok(SyntheticData {
        truth,
        sites,
        subdictionaries,
        atoms_used,
    })
}
