use cloud_ksvd::cloud::{cloud_ksvd, CloudConfig};
use cloud_ksvd::coding::encode_batch;
use cloud_ksvd::diagnostics::{avg_atom_error, representation_error};
use cloud_ksvd::ksvd::{
    run_ksvd, run_local_ksvd, AtomSolver, KsvdConfig, LearnTrace, UnusedAtomRule,
};
use cloud_ksvd::{gen_synthetic_sites, Dictionary, Mat, SparseCoder};
use rayon::prelude::*;

use super::{mean, network, synthetic_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{Artifact, Report, Row};

const REPRESENTATION: &str = "representation_error";

/// Mean over sites of each local dictionary's error on the pooled data,
/// recoded with OMP.
fn pooled_error(pooled: &Mat, d: &Dictionary, t0: usize) -> Result<f64> {
    let codes = encode_batch(pooled, d, t0, SparseCoder::Omp)?.codes;
    Ok(representation_error(pooled, d, &codes)?)
}

fn snapshots(trace: &LearnTrace) -> impl Iterator<Item = &Dictionary> {
    trace
        .iterations
        .iter()
        .map(|r| &r.snapshot.as_ref().expect("snapshots recorded").dict_after)
}

const SYNTH_METHODS: [&str; 5] = [
    "centralized",
    "centralized-tp",
    "cloud",
    "local",
    "local-own",
];

/// Centralized, cloud and local K-SVD on the same synthetic network.
pub fn run_synth_compare(cfg: &ExperimentConfig) -> Result<Report> {
    let per_run: Vec<Vec<Row>> = cfg
        .run_seeds()
        .into_par_iter()
        .map(|seed| synth_compare_run(cfg, seed))
        .collect::<Result<_>>()?;

    let mut curves = Artifact::new("curves.csv", cfg.runs * SYNTH_METHODS.len() * cfg.t_d);
    per_run.into_iter().flatten().for_each(|r| curves.push(r));

    let mut report = Report::default();
    for method in SYNTH_METHODS {
        let finals = curves
            .select(method, "", REPRESENTATION)
            .filter(|r| r.iteration == Some(cfg.t_d))
            .map(|r| r.value);
        report.summary.push(format!(
            "{method:>15}: mean final representation error {:.5}",
            mean(finals)
        ));
    }
    report.artifacts.push(curves);
    Ok(report)
}

fn synth_compare_run(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Row>> {
    let data = gen_synthetic_sites(&synthetic_config(cfg), seed)?;
    let w = network(cfg.sites, cfg.p, seed)?;
    let pooled = data.pooled();

    let canonical = KsvdConfig::new(cfg.t0, cfg.t_d, seed);
    let (_, central) = run_ksvd(&pooled, cfg.k, &canonical)?;
    let budget = KsvdConfig {
        solver: AtomSolver::PowerIterations(cfg.t_p),
        unused: UnusedAtomRule::SharedRandom,
        ..canonical.clone()
    };
    let (_, central_tp) = run_ksvd(&pooled, cfg.k, &budget)?;
    let (_, cloud) = cloud_ksvd(
        &data.sites,
        cfg.k,
        &w,
        &CloudConfig::new(cfg.t0, cfg.t_d, cfg.t_p, cfg.t_c, seed),
    )?;
    let local_cfg = KsvdConfig {
        record_snapshots: true,
        ..canonical
    };
    let locals = run_local_ksvd(&data.sites, cfg.k, &local_cfg)?;

    let mut local_pooled = vec![0.0; cfg.t_d];
    let mut local_own = vec![0.0; cfg.t_d];
    for (_, trace) in &locals {
        for (t, d) in snapshots(trace).enumerate() {
            local_pooled[t] += pooled_error(&pooled, d, cfg.t0)? / cfg.sites as f64;
            local_own[t] += trace.iterations[t].representation_error / cfg.sites as f64;
        }
    }

    let curves: [Vec<f64>; 5] = [
        central.errors(),
        central_tp.errors(),
        cloud.errors.clone(),
        local_pooled,
        local_own,
    ];
    let mut rows = Vec::with_capacity(SYNTH_METHODS.len() * cfg.t_d);
    for (method, curve) in SYNTH_METHODS.iter().zip(curves) {
        for (t, v) in curve.into_iter().enumerate() {
            rows.push(Row::new(seed, method, "", Some(t + 1), REPRESENTATION, v));
        }
    }
    Ok(rows)
}

pub(crate) fn sweep_param(tp: usize, tc: usize) -> String {
    format!("tp={tp};tc={tc}")
}

const ATOM_METRICS: [&str; 3] = ["e_average", "e_average_budget", REPRESENTATION];

/// Per-iteration atom error of cloud K-SVD against centralized K-SVD over a
/// grid of power-iteration and consensus budgets.
pub fn run_atom_error(cfg: &ExperimentConfig) -> Result<Report> {
    let per_run: Vec<Vec<Row>> = cfg
        .run_seeds()
        .into_par_iter()
        .map(|seed| atom_error_run(cfg, seed))
        .collect::<Result<_>>()?;
    let grid = cfg.tp_values.len() * cfg.tc_values.len();
    let mut curves = Artifact::new("curves.csv", cfg.runs * grid * cfg.t_d * ATOM_METRICS.len());
    per_run.into_iter().flatten().for_each(|r| curves.push(r));

    let mut report = Report::default();
    for &tc in &cfg.tc_values {
        for &tp in &cfg.tp_values {
            let param = sweep_param(tp, tc);
            let finals = curves
                .select("cloud", &param, "e_average")
                .filter(|r| r.iteration == Some(cfg.t_d))
                .map(|r| r.value);
            report.summary.push(format!(
                "T_c = {tc:>2}, T_p = {tp}: mean final atom error {:.5}",
                mean(finals)
            ));
        }
    }
    report.artifacts.push(curves);
    Ok(report)
}

fn atom_error_run(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Row>> {
    let data = gen_synthetic_sites(&synthetic_config(cfg), seed)?;
    let w = network(cfg.sites, cfg.p, seed)?;
    let pooled = data.pooled();
    let tight = KsvdConfig {
        unused: UnusedAtomRule::SharedRandom,
        record_snapshots: true,
        ..KsvdConfig::new(cfg.t0, cfg.t_d, seed)
    };
    let (_, central) = run_ksvd(&pooled, cfg.k, &tight)?;
    let central_dicts: Vec<&Dictionary> = snapshots(&central).collect();

    let grid: Vec<(usize, usize)> = cfg
        .tp_values
        .iter()
        .flat_map(|&tp| cfg.tc_values.iter().map(move |&tc| (tp, tc)))
        .collect();
    let per_point: Vec<Vec<Row>> = grid
        .par_iter()
        .map(|&(tp, tc)| -> Result<Vec<Row>> {
            let budget = KsvdConfig {
                solver: AtomSolver::PowerIterations(tp),
                ..tight.clone()
            };
            let (_, central_tp) = run_ksvd(&pooled, cfg.k, &budget)?;
            let ccfg = CloudConfig {
                record_dictionaries: true,
                ..CloudConfig::new(cfg.t0, cfg.t_d, tp, tc, seed)
            };
            let (_, cloud) = cloud_ksvd(&data.sites, cfg.k, &w, &ccfg)?;
            let param = sweep_param(tp, tc);
            let mut rows = Vec::with_capacity(cfg.t_d * ATOM_METRICS.len());
            for (t, (site_dicts, budget_dict)) in cloud
                .dictionaries
                .iter()
                .zip(snapshots(&central_tp))
                .enumerate()
            {
                let values = [
                    avg_atom_error(central_dicts[t], site_dicts)?,
                    avg_atom_error(budget_dict, site_dicts)?,
                    cloud.errors[t],
                ];
                for (metric, v) in ATOM_METRICS.iter().zip(values) {
                    rows.push(Row::new(seed, "cloud", &param, Some(t + 1), metric, v));
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}
