//! Experiment configuration: scenario defaults, a TOML file and CLI flags,
//! merged in that order.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    SynthCompare,
    DpmFloor,
    AtomError,
    Online,
    Constants,
    Mnist,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::SynthCompare,
        Scenario::DpmFloor,
        Scenario::AtomError,
        Scenario::Online,
        Scenario::Constants,
        Scenario::Mnist,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::SynthCompare => "synth-compare",
            Scenario::DpmFloor => "dpm-floor",
            Scenario::AtomError => "atom-error",
            Scenario::Online => "online",
            Scenario::Constants => "constants",
            Scenario::Mnist => "mnist",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    /// Number of sites `N`.
    pub sites: usize,
    /// Samples per site `S_i`.
    pub samples_per_site: usize,
    pub n: usize,
    pub k: usize,
    pub t0: usize,
    /// Learning iterations `T_d`.
    pub t_d: usize,
    /// Power iterations `T_p`.
    pub t_p: usize,
    /// Consensus rounds `T_c`.
    pub t_c: usize,
    /// Edge probability of the random topology.
    pub p: f64,
    pub sigma2: f64,
    pub seed: u64,
    /// Monte-Carlo runs, seeded `seed, seed + 1, ...`.
    pub runs: usize,
    /// `T_c` sweep for `dpm-floor` and `atom-error`.
    pub tc_values: Vec<usize>,
    /// `T_p` sweep for `atom-error`.
    pub tp_values: Vec<usize>,
    /// Online arrivals.
    pub periods: usize,
    pub batch: usize,
    pub buffer: usize,
    /// Lasso `τ` inflation over the largest sparsity-achieving value.
    pub slack: f64,
    pub delta_d: f64,
    pub digits: Vec<u8>,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub full: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mnist_dir: Option<PathBuf>,
    pub out: PathBuf,
}

impl ExperimentConfig {
    /// Desk-scale defaults for a scenario.
    pub fn defaults(scenario: Scenario, seed: u64) -> Self {
        let base = ExperimentConfig {
            scenario,
            sites: 10,
            samples_per_site: 100,
            n: 20,
            k: 50,
            t0: 3,
            t_d: 40,
            t_p: 15,
            t_c: 15,
            p: 0.5,
            sigma2: 0.01,
            seed,
            runs: 5,
            tc_values: vec![15],
            tp_values: vec![15],
            periods: 6,
            batch: 500,
            buffer: 1000,
            slack: 0.05,
            delta_d: 0.01,
            digits: vec![0, 3, 5, 8, 9],
            train_per_class: 500,
            test_per_class: 100,
            full: false,
            mnist_dir: None,
            out: PathBuf::from("out").join(scenario.name()),
        };
        match scenario {
            Scenario::SynthCompare => base,
            Scenario::DpmFloor => ExperimentConfig {
                t_p: 25,
                tc_values: vec![3, 5, 10, 15],
                ..base
            },
            Scenario::AtomError => ExperimentConfig {
                t_d: 20,
                runs: 10,
                tc_values: vec![1, 10],
                tp_values: vec![2, 3, 4, 5],
                ..base
            },
            Scenario::Online => ExperimentConfig {
                sites: 1,
                t_d: 60,
                runs: 1,
                ..base
            },
            Scenario::Constants => ExperimentConfig {
                sites: 4,
                samples_per_site: 50,
                n: 17,
                k: 40,
                t_d: 10,
                runs: 1,
                ..base
            },
            Scenario::Mnist => ExperimentConfig {
                sites: 2,
                n: 256,
                k: 100,
                t0: 10,
                t_d: 20,
                runs: 1,
                ..base
            },
        }
    }

    /// Full-scale MNIST settings behind `--full`.
    fn apply_full(&mut self) {
        if self.scenario == Scenario::Mnist {
            self.sites = 10;
            self.k = 400;
            self.train_per_class = 5000;
            self.test_per_class = 1000;
            self.runs = 5;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        let positive = [
            ("sites", self.sites),
            ("samples_per_site", self.samples_per_site),
            ("n", self.n),
            ("k", self.k),
            ("t0", self.t0),
            ("t_d", self.t_d),
            ("t_p", self.t_p),
            ("t_c", self.t_c),
            ("runs", self.runs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return bad(format!("p = {} must lie in (0, 1]", self.p));
        }
        if !(self.sigma2 >= 0.0) || !(self.slack >= 0.0) || !(self.delta_d > 0.0) {
            return bad("sigma2 and slack must be non-negative, delta_d positive".into());
        }
        match self.scenario {
            Scenario::DpmFloor | Scenario::AtomError
                if self.tc_values.contains(&0) || self.tc_values.is_empty() =>
            {
                bad("tc_values must be non-empty and positive".into())
            }
            Scenario::AtomError if self.tp_values.contains(&0) || self.tp_values.is_empty() => {
                bad("tp_values must be non-empty and positive".into())
            }
            Scenario::Online if self.periods == 0 || self.batch == 0 || self.buffer == 0 => {
                bad("periods, batch and buffer must be positive".into())
            }
            Scenario::Mnist if self.n != 256 => bad("mnist works on 16x16 images (n = 256)".into()),
            Scenario::Mnist if self.digits.is_empty() || self.digits.iter().any(|&d| d > 9) => {
                bad("digits must be a non-empty list of 0..=9".into())
            }
            Scenario::Mnist if self.train_per_class < self.sites || self.test_per_class == 0 => {
                bad("every site needs training data and the test set must be non-empty".into())
            }
            _ => Ok(()),
        }
    }

    /// Seeds of the Monte-Carlo runs.
    pub fn run_seeds(&self) -> Vec<u64> {
        (0..self.runs as u64).map(|r| self.seed + r).collect()
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }
}

/// Optional fields shared by the config file and the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[arg(long, value_enum)]
    pub scenario: Option<Scenario>,
    #[arg(long = "sites", short = 'N')]
    pub sites: Option<usize>,
    #[arg(long)]
    pub samples_per_site: Option<usize>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, short = 'K')]
    pub k: Option<usize>,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub t_d: Option<usize>,
    #[arg(long)]
    pub t_p: Option<usize>,
    #[arg(long)]
    pub t_c: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub sigma2: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub runs: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    pub tc_values: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub tp_values: Option<Vec<usize>>,
    #[arg(long)]
    pub periods: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub buffer: Option<usize>,
    #[arg(long)]
    pub slack: Option<f64>,
    #[arg(long)]
    pub delta_d: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub digits: Option<Vec<u8>>,
    #[arg(long)]
    pub train_per_class: Option<usize>,
    #[arg(long)]
    pub test_per_class: Option<usize>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub full: Option<bool>,
    #[arg(long)]
    pub mnist_dir: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Overrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    /// Fields set here win over `base`.
    pub fn layered_over(self, base: Overrides) -> Overrides {
        macro_rules! pick {
            ($($f:ident),*) => { Overrides { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            scenario,
            sites,
            samples_per_site,
            n,
            k,
            t0,
            t_d,
            t_p,
            t_c,
            p,
            sigma2,
            seed,
            runs,
            tc_values,
            tp_values,
            periods,
            batch,
            buffer,
            slack,
            delta_d,
            digits,
            train_per_class,
            test_per_class,
            full,
            mnist_dir,
            out
        )
    }

    /// Resolves against the scenario defaults. The scenario and the seed are
    /// mandatory.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let scenario = self
            .scenario
            .ok_or_else(|| CliError::Config("no scenario given".into()))?;
        let seed = self
            .seed
            .ok_or_else(|| CliError::Config("a seed is required".into()))?;
        let mut cfg = ExperimentConfig::defaults(scenario, seed);
        if self.full == Some(true) {
            cfg.apply_full();
        }
        macro_rules! set {
            ($($f:ident),*) => { $(if let Some(v) = self.$f { cfg.$f = v; })* };
        }
        set!(
            sites,
            samples_per_site,
            n,
            k,
            t0,
            t_d,
            t_p,
            t_c,
            p,
            sigma2,
            runs,
            tc_values,
            tp_values,
            periods,
            batch,
            buffer,
            slack,
            delta_d,
            digits,
            train_per_class,
            test_per_class,
            full,
            out
        );
        if self.mnist_dir.is_some() {
            cfg.mnist_dir = self.mnist_dir;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_then_flags() {
        let file = Overrides::from_toml(
            "scenario = \"dpm-floor\"\nseed = 4\nt_p = 30\ntc_values = [3, 15]\n",
        )
        .unwrap();
        let flags = Overrides {
            t_p: Some(12),
            ..Default::default()
        };
        let cfg = flags.layered_over(file).resolve().unwrap();
        assert_eq!(cfg.scenario, Scenario::DpmFloor);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.t_p, 12);
        assert_eq!(cfg.tc_values, vec![3, 15]);
        assert_eq!(cfg.sites, 10);
    }

    #[test]
    fn seed_is_mandatory() {
        let o = Overrides {
            scenario: Some(Scenario::Online),
            ..Default::default()
        };
        assert!(matches!(o.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(Overrides::from_toml("seed = 1\nbogus = 2\n").is_err());
    }

    #[test]
    fn resolved_config_round_trips_through_toml() {
        for s in Scenario::ALL {
            let cfg = ExperimentConfig::defaults(s, 9);
            cfg.validate().unwrap();
            let back: ExperimentConfig = toml::from_str(&cfg.to_toml().unwrap()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn full_mnist_scale() {
        let o = Overrides {
            scenario: Some(Scenario::Mnist),
            seed: Some(0),
            full: Some(true),
            ..Default::default()
        };
        let cfg = o.resolve().unwrap();
        assert_eq!(
            (cfg.sites, cfg.k, cfg.train_per_class, cfg.test_per_class),
            (10, 400, 5000, 1000)
        );
    }

    #[test]
    fn invalid_probability_is_rejected() {
        let o = Overrides {
            scenario: Some(Scenario::SynthCompare),
            seed: Some(0),
            p: Some(0.0),
            ..Default::default()
        };
        assert!(o.resolve().is_err());
    }
}
