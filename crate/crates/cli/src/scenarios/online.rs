use std::collections::VecDeque;

use cloud_ksvd::dictionary::init_dictionary;
use cloud_ksvd::ksvd::{run_ksvd_from, KsvdConfig};
use cloud_ksvd::{gen_synthetic_sites, Mat, SyntheticConfig};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::output::{Artifact, Report, Row};

/// Relative distance to a period's best error counted as converged.
pub const PLATEAU_TOL: f64 = 0.01;

/// First 1-based iteration whose error is within [`PLATEAU_TOL`] of the
/// curve's minimum.
pub fn plateau_iteration(errors: &[f64]) -> usize {
    let best = errors.iter().copied().fold(f64::INFINITY, f64::min);
    errors
        .iter()
        .position(|&e| e <= best * (1.0 + PLATEAU_TOL))
        .map_or(0, |i| i + 1)
}

/// Rows per period besides the error curve.
const PERIOD_SUMMARIES: usize = 3;

/// Batches arrive periodically; K-SVD is warm-restarted on a bounded buffer
/// of the most recent samples.
pub fn run_online(cfg: &ExperimentConfig) -> Result<Report> {
    let per_run: Vec<(Vec<Row>, Vec<usize>)> = cfg
        .run_seeds()
        .into_par_iter()
        .map(|seed| online_run(cfg, seed))
        .collect::<Result<_>>()?;
    let mut curves = Artifact::new(
        "curves.csv",
        cfg.runs * cfg.periods * (cfg.t_d + PERIOD_SUMMARIES),
    );
    let mut report = Report::default();
    for (seed, (rows, plateaus)) in cfg.run_seeds().into_iter().zip(per_run) {
        rows.into_iter().for_each(|r| curves.push(r));
        report.summary.push(format!(
            "run {seed}: iterations to plateau per period {plateaus:?}"
        ));
    }
    report.artifacts.push(curves);
    Ok(report)
}

fn online_run(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<Row>, Vec<usize>)> {
    let stream = SyntheticConfig {
        sites: cfg.periods,
        samples_per_site: cfg.batch,
        n: cfg.n,
        k: cfg.k,
        t0: cfg.t0,
        sigma2: cfg.sigma2,
    };
    let data = gen_synthetic_sites(&stream, seed)?;
    let learner = KsvdConfig::new(cfg.t0, cfg.t_d, seed);
    let mut buffer: VecDeque<Vec<f64>> = VecDeque::with_capacity(cfg.buffer + cfg.batch);
    let mut d = init_dictionary(cfg.n, cfg.k, seed);
    let mut rows = Vec::new();
    let mut plateaus = Vec::with_capacity(cfg.periods);
    for (period, batch) in data.sites.iter().enumerate() {
        buffer.extend(batch.columns());
        while buffer.len() > cfg.buffer {
            buffer.pop_front();
        }
        let y = Mat::from_columns(buffer.make_contiguous())?;
        let (next, trace) = run_ksvd_from(&y, d, &learner)?;
        d = next;
        let errors = trace.errors();
        let param = format!("period={}", period + 1);
        for (t, &e) in errors.iter().enumerate() {
            rows.push(Row::new(
                seed,
                "ksvd",
                &param,
                Some(t + 1),
                "representation_error",
                e,
            ));
        }
        let plateau = plateau_iteration(&errors);
        plateaus.push(plateau);
        let last = *errors.last().expect("at least one iteration");
        rows.push(Row::new(
            seed,
            "ksvd",
            &param,
            Some(errors.len()),
            "period_end",
            last,
        ));
        rows.push(Row::new(
            seed,
            "ksvd",
            &param,
            None,
            "buffer_size",
            buffer.len() as f64,
        ));
        rows.push(Row::new(
            seed,
            "ksvd",
            &param,
            None,
            "plateau_iteration",
            plateau as f64,
        ));
    }
    Ok((rows, plateaus))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plateau_of_decreasing_curve() {
        assert_eq!(plateau_iteration(&[1.0, 0.5, 0.3, 0.2995, 0.299]), 3);
        assert_eq!(plateau_iteration(&[0.2, 0.2]), 1);
    }
}
