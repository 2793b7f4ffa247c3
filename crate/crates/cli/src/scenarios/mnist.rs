use std::path::{Path, PathBuf};

use cloud_ksvd::cloud::{cloud_ksvd, CloudConfig};
use cloud_ksvd::ksvd::{run_ksvd, KsvdConfig};
use cloud_ksvd::mnist::{downsample_28_to_16, load_mnist_idx, MnistSet};
use cloud_ksvd::{stream_rng, Dictionary, Mat, MinResidueClassifier, Stream};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::{mean, network};
use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::output::{Artifact, Report, Row};

pub const MNIST_IMAGES: &str = "images-idx3-ubyte";
pub const MNIST_LABELS: &str = "labels-idx1-ubyte";
const STANDARD_NAMES: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");

pub const MNIST_DIR_ENV: &str = "CLOUD_KSVD_MNIST_DIR";

/// The configured directory, else `$CLOUD_KSVD_MNIST_DIR`, else `data/mnist`.
pub fn resolve_mnist_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.mnist_dir
        .clone()
        .or_else(|| std::env::var_os(MNIST_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("data").join("mnist"))
}

/// Loads the IDX pair in `dir`, trying the short names first.
pub fn load_mnist_dir(dir: &Path) -> Result<MnistSet> {
    for (images, labels) in [(MNIST_IMAGES, MNIST_LABELS), STANDARD_NAMES] {
        let (i, l) = (dir.join(images), dir.join(labels));
        if i.is_file() && l.is_file() {
            return Ok(load_mnist_idx(&i, &l)?);
        }
    }
    Err(CliError::MissingData(dir.to_path_buf()))
}

struct ClassSplit {
    train: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

fn split_classes(set: &MnistSet, cfg: &ExperimentConfig, seed: u64) -> Result<Vec<ClassSplit>> {
    if set.rows != 28 || set.cols != 28 {
        return Err(CliError::Config(format!(
            "expected 28x28 images, got {}x{}",
            set.rows, set.cols
        )));
    }
    let mut rng = stream_rng(seed, Stream::Split);
    cfg.digits
        .iter()
        .map(|&digit| {
            let mut idx: Vec<usize> = (0..set.labels.len())
                .filter(|&i| set.labels[i] == digit)
                .collect();
            let needed = cfg.train_per_class + cfg.test_per_class;
            if idx.len() < needed {
                return Err(CliError::Config(format!(
                    "digit {digit} has {} images, {needed} needed",
                    idx.len()
                )));
            }
            idx.shuffle(&mut rng);
            let prep = |i: &usize| downsample_28_to_16(&set.images[*i]);
            Ok(ClassSplit {
                train: idx[..cfg.train_per_class].iter().map(prep).collect(),
                test: idx[cfg.train_per_class..needed].iter().map(prep).collect(),
            })
        })
        .collect()
}

/// Contiguous, near-equal shares of `samples` for `sites` sites.
fn share(samples: &[Vec<f64>], sites: usize) -> Result<Vec<Mat>> {
    let base = samples.len() / sites;
    let extra = samples.len() % sites;
    let mut start = 0;
    (0..sites)
        .map(|i| {
            let len = base + usize::from(i < extra);
            let m = Mat::from_columns(&samples[start..start + len]);
            start += len;
            Ok(m?)
        })
        .collect()
}

/// Dictionaries learned for one class by every method.
struct ClassDictionaries {
    central: Dictionary,
    cloud: Vec<Dictionary>,
    local: Vec<Dictionary>,
}

fn train_class(cfg: &ExperimentConfig, train: &[Vec<f64>], seed: u64) -> Result<ClassDictionaries> {
    let learner = KsvdConfig::new(cfg.t0, cfg.t_d, seed);
    let (central, _) = run_ksvd(&Mat::from_columns(train)?, cfg.k, &learner)?;
    let shares = share(train, cfg.sites)?;
    let w = network(cfg.sites, cfg.p, seed)?;
    let (sites, _) = cloud_ksvd(
        &shares,
        cfg.k,
        &w,
        &CloudConfig::new(cfg.t0, cfg.t_d, cfg.t_p, cfg.t_c, seed),
    )?;
    let local = shares
        .iter()
        .map(|y| run_ksvd(y, cfg.k, &learner).map(|(d, _)| d))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ClassDictionaries {
        central,
        cloud: sites.into_iter().map(|s| s.dictionary).collect(),
        local,
    })
}

/// Detection rate per class: correctly assigned test samples over test
/// samples of that class.
fn detection_rates(dicts: &[Dictionary], splits: &[ClassSplit], t0: usize) -> Result<Vec<f64>> {
    let clf = MinResidueClassifier::new(dicts, t0)?;
    splits
        .iter()
        .enumerate()
        .map(|(c, s)| {
            let hits = s
                .test
                .par_iter()
                .map(|y| clf.classify(y).map(|p| usize::from(p == c)))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(hits.iter().sum::<usize>() as f64 / s.test.len() as f64)
        })
        .collect()
}

/// Per-class dictionaries by centralized, cloud and local K-SVD, scored by
/// minimum-residue classification.
pub fn run_mnist(cfg: &ExperimentConfig) -> Result<Report> {
    let set = load_mnist_dir(&resolve_mnist_dir(cfg))?;
    let per_digit = 4 + 2 * cfg.sites;
    let mut rates = Artifact::new("detection.csv", cfg.runs * cfg.digits.len() * per_digit);
    let mut report = Report::default();
    for seed in cfg.run_seeds() {
        let splits = split_classes(&set, cfg, seed)?;
        let trained = splits
            .par_iter()
            .map(|s| train_class(cfg, &s.train, seed))
            .collect::<Result<Vec<_>>>()?;
        let gather = |f: &dyn Fn(&ClassDictionaries) -> Dictionary| {
            trained.iter().map(f).collect::<Vec<_>>()
        };
        let central = detection_rates(&gather(&|c| c.central.clone()), &splits, cfg.t0)?;
        let cloud = (0..cfg.sites)
            .map(|i| detection_rates(&gather(&|c| c.cloud[i].clone()), &splits, cfg.t0))
            .collect::<Result<Vec<_>>>()?;
        let local = (0..cfg.sites)
            .map(|i| detection_rates(&gather(&|c| c.local[i].clone()), &splits, cfg.t0))
            .collect::<Result<Vec<_>>>()?;

        for (c, digit) in cfg.digits.iter().enumerate() {
            let param = format!("digit={digit}");
            let mut push = |method: &str, v: f64| {
                rates.push(Row::new(seed, method, &param, None, "detection_rate", v))
            };
            let cloud_mean = mean(cloud.iter().map(|r| r[c]));
            let local_c: Vec<f64> = local.iter().map(|r| r[c]).collect();
            let local_min = local_c.iter().copied().fold(f64::INFINITY, f64::min);
            let local_max = local_c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            push("centralized", central[c]);
            push("cloud", cloud_mean);
            for (i, r) in cloud.iter().enumerate() {
                push(&format!("cloud-site-{i}"), r[c]);
            }
            for (i, &v) in local_c.iter().enumerate() {
                push(&format!("local-site-{i}"), v);
            }
            push("local-min", local_min);
            push("local-max", local_max);
            report.summary.push(format!(
                "split {seed} digit {digit}: centralized {:.3} cloud {cloud_mean:.3} local {local_min:.3}..{local_max:.3}",
                central[c]
            ));
        }
    }
    report.artifacts.push(rates);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shares_cover_samples_in_order() {
        let samples: Vec<Vec<f64>> = (0..7).map(|i| vec![i as f64]).collect();
        let parts = share(&samples, 3).unwrap();
        let sizes: Vec<usize> = parts.iter().map(Mat::cols).collect();
        assert_eq!(sizes, vec![3, 2, 2]);
        assert_eq!(parts[1].get(0, 0), 3.0);
    }
}
