//! Experiment scenarios. Each returns a [`Report`] whose artifacts are
//! deterministic functions of the configuration.

mod constants;
mod dpm;
mod mnist;
mod online;
mod synthetic;

use cloud_ksvd::{gen_erdos_renyi_connected, local_degree_weights, SyntheticConfig, WeightMatrix};

use crate::config::{ExperimentConfig, Scenario};
use crate::error::Result;
use crate::output::Report;

pub use constants::{run_constants, PUBLISHED_VALUES};
pub use dpm::{run_dpm_floor, site_parts, DPM_PLATEAU_WINDOW};
pub use mnist::{
    load_mnist_dir, resolve_mnist_dir, run_mnist, MNIST_DIR_ENV, MNIST_IMAGES, MNIST_LABELS,
};
pub use online::{plateau_iteration, run_online, PLATEAU_TOL};
pub use synthetic::{run_atom_error, run_synth_compare};

pub fn run_scenario(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match cfg.scenario {
        Scenario::SynthCompare => run_synth_compare(cfg),
        Scenario::DpmFloor => run_dpm_floor(cfg),
        Scenario::AtomError => run_atom_error(cfg),
        Scenario::Online => run_online(cfg),
        Scenario::Constants => run_constants(cfg),
        Scenario::Mnist => run_mnist(cfg),
    }
}

/// Random connected topology with local-degree weights.
pub(crate) fn network(sites: usize, p: f64, seed: u64) -> Result<WeightMatrix> {
    Ok(local_degree_weights(&gen_erdos_renyi_connected(
        sites, p, seed,
    )?))
}

pub(crate) fn synthetic_config(cfg: &ExperimentConfig) -> SyntheticConfig {
    SyntheticConfig {
        sites: cfg.sites,
        samples_per_site: cfg.samples_per_site,
        n: cfg.n,
        k: cfg.k,
        t0: cfg.t0,
        sigma2: cfg.sigma2,
    }
}

pub(crate) fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, count) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    sum / count as f64
}
