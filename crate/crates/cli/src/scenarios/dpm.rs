use cloud_ksvd::cloud::{distributed_power_method_with, DpmOptions};
use cloud_ksvd::coding::encode_batch;
use cloud_ksvd::diagnostics::projector_distance;
use cloud_ksvd::ksvd::restricted_residual;
use cloud_ksvd::linalg::reference_top_eigenpair;
use cloud_ksvd::rng::random_unit_vector;
use cloud_ksvd::{gen_synthetic_sites, stream_rng, Mat, SparseCoder, Stream};
use rayon::prelude::*;

use super::{mean, network, synthetic_config};
use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{Artifact, Report, Row};

/// Trailing power iterations averaged into a plateau.
pub const DPM_PLATEAU_WINDOW: usize = 5;

/// Per-site parts `M_i = E_i E_i^T` as cloud K-SVD forms them: synthetic
/// site data coded against the generating dictionary, restricted to the samples
/// using the most used atom. Sites where that atom is unused get a zero part.
pub fn site_parts(cfg: &ExperimentConfig, seed: u64) -> Result<Vec<Mat>> {
    let data = gen_synthetic_sites(&synthetic_config(cfg), seed)?;
    let codes = data
        .sites
        .iter()
        .map(|y| encode_batch(y, &data.truth, cfg.t0, SparseCoder::Omp).map(|b| b.codes))
        .collect::<Result<Vec<_>, _>>()?;
    let usage = |k: usize| codes.iter().map(|c| c.row_support(k).len()).sum::<usize>();
    let atom = (0..cfg.k).fold(0, |best, k| if usage(k) > usage(best) { k } else { best });
    data.sites
        .iter()
        .zip(&codes)
        .map(|(y, x)| {
            let omega = x.row_support(atom);
            if omega.is_empty() {
                return Ok(Mat::zeros(cfg.n, cfg.n));
            }
            let samples: Vec<Vec<f64>> = y.columns().collect();
            Ok(restricted_residual(&samples, &data.truth, x, atom, &omega)?.outer_gram())
        })
        .collect()
}

/// Eigenvector error at site 0 per power iteration, for each consensus budget.
pub fn run_dpm_floor(cfg: &ExperimentConfig) -> Result<Report> {
    let per_run: Vec<(Vec<Row>, Vec<Row>)> = cfg
        .run_seeds()
        .into_par_iter()
        .map(|seed| dpm_run(cfg, seed))
        .collect::<Result<_>>()?;
    let points = cfg.runs * cfg.tc_values.len();
    let mut curves = Artifact::new("eig_error.csv", points * cfg.t_p);
    let mut plateaus = Artifact::new("plateaus.csv", points);
    for (c, p) in per_run {
        c.into_iter().for_each(|r| curves.push(r));
        p.into_iter().for_each(|r| plateaus.push(r));
    }
    let mut report = Report::default();
    for &tc in &cfg.tc_values {
        let m = mean(
            plateaus
                .select("dpm", &format!("tc={tc}"), "plateau")
                .map(|r| r.value),
        );
        report
            .summary
            .push(format!("T_c = {tc:>2}: mean plateau {m:.3e}"));
    }
    report.artifacts.push(curves);
    report.artifacts.push(plateaus);
    Ok(report)
}

fn dpm_run(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<Row>, Vec<Row>)> {
    let parts = site_parts(cfg, seed)?;
    let w = network(cfg.sites, cfg.p, seed)?;
    let q_init = random_unit_vector(&mut stream_rng(seed, Stream::PowerInit), cfg.n);
    let mut total = parts[0].clone();
    parts[1..].iter().for_each(|m| total.add_assign(m));
    let reference = reference_top_eigenpair(&total)?;

    let mut curves = Vec::new();
    let mut plateaus = Vec::new();
    for &tc in &cfg.tc_values {
        let opts = DpmOptions {
            record_history: true,
            ..DpmOptions::default()
        };
        let run = distributed_power_method_with(&parts, &w, cfg.t_p, tc, &q_init, opts)?;
        let param = format!("tc={tc}");
        let errors = run
            .history
            .iter()
            .map(|q| projector_distance(&reference.vector, &q[0]))
            .collect::<Result<Vec<_>, _>>()?;
        for (tp, &e) in errors.iter().enumerate() {
            curves.push(Row::new(seed, "dpm", &param, Some(tp + 1), "e_eig", e));
        }
        let window = DPM_PLATEAU_WINDOW.min(errors.len());
        let plateau = mean(errors[errors.len() - window..].iter().copied());
        plateaus.push(Row::new(seed, "dpm", &param, None, "plateau", plateau));
    }
    Ok((curves, plateaus))
}
