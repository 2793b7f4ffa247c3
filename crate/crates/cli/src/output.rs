//! Long-format CSV curves and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const CSV_HEADER: [&str; 6] = ["run", "method", "param", "iteration", "metric", "value"];

/// One value of one curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub run: u64,
    pub method: String,
    pub param: String,
    /// 1-based; `None` for summary values.
    pub iteration: Option<usize>,
    pub metric: String,
    pub value: f64,
}

impl Row {
    pub fn new(
        run: u64,
        method: &str,
        param: &str,
        iteration: Option<usize>,
        metric: &str,
        value: f64,
    ) -> Self {
        Row {
            run,
            method: method.to_owned(),
            param: param.to_owned(),
            iteration,
            metric: metric.to_owned(),
            value,
        }
    }

    fn fields(&self) -> [String; 6] {
        [
            self.run.to_string(),
            self.method.clone(),
            self.param.clone(),
            self.iteration.map(|i| i.to_string()).unwrap_or_default(),
            self.metric.clone(),
            format_value(self.value),
        ]
    }
}

/// Shortest round-trip decimal, switching to exponent form for very small or
/// large magnitudes.
pub fn format_value(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// A CSV file of a scenario together with the row count its configuration
/// implies.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub rows: Vec<Row>,
    pub declared_rows: usize,
}

impl Artifact {
    pub fn new(name: &str, declared_rows: usize) -> Self {
        Artifact {
            name: name.to_owned(),
            rows: Vec::with_capacity(declared_rows),
            declared_rows,
        }
    }

    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn check(&self) -> Result<()> {
        if self.rows.len() != self.declared_rows {
            return Err(CliError::RowCount {
                file: self.name.clone(),
                rows: self.rows.len(),
                declared: self.declared_rows,
            });
        }
        Ok(())
    }

    /// Rows matching a method, param and metric, in file order.
    pub fn select<'a>(
        &'a self,
        method: &'a str,
        param: &'a str,
        metric: &'a str,
    ) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.method == method && r.param == param && r.metric == metric)
    }

    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let wrap = |source| CliError::Csv {
            path: PathBuf::from(&self.name),
            source,
        };
        w.write_record(CSV_HEADER).map_err(wrap)?;
        for r in &self.rows {
            w.write_record(r.fields()).map_err(wrap)?;
        }
        w.into_inner().map_err(|e| CliError::Io {
            path: PathBuf::from(&self.name),
            source: e.into_error(),
        })
    }
}

/// Everything a scenario produced.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub artifacts: Vec<Artifact>,
    /// Extra structured-text files, as `(name, contents)`.
    pub texts: Vec<(String, String)>,
    /// Human-readable summary lines.
    pub summary: Vec<String>,
}

impl Report {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

#[derive(Serialize)]
struct FileEntry<'a> {
    name: &'a str,
    rows: usize,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    scenario: &'a str,
    seeds: Vec<u64>,
    files: Vec<FileEntry<'a>>,
    config: &'a ExperimentConfig,
}

pub const MANIFEST_NAME: &str = "manifest.toml";

pub fn manifest_text(cfg: &ExperimentConfig, report: &Report) -> Result<String> {
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.scenario.name(),
        seeds: cfg.run_seeds(),
        files: report
            .artifacts
            .iter()
            .map(|a| FileEntry {
                name: &a.name,
                rows: a.declared_rows,
            })
            .collect(),
        config: cfg,
    };
    Ok(toml::to_string(&manifest)?)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes every artifact, text file and the manifest under `dir`; returns
/// the written paths.
pub fn write_report(dir: &Path, cfg: &ExperimentConfig, report: &Report) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for a in &report.artifacts {
        a.check()?;
        let path = dir.join(&a.name);
        write_file(&path, &a.to_csv_bytes()?)?;
        written.push(path);
    }
    for (name, text) in &report.texts {
        let path = dir.join(name);
        write_file(&path, text.as_bytes())?;
        written.push(path);
    }
    let path = dir.join(MANIFEST_NAME);
    write_file(&path, manifest_text(cfg, report)?.as_bytes())?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let mut a = Artifact::new("x.csv", 2);
        a.push(Row::new(3, "cloud", "tc=1", Some(1), "e", 0.25));
        a.push(Row::new(3, "cloud", "a,b", None, "e", 1e-20));
        let text = String::from_utf8(a.to_csv_bytes().unwrap()).unwrap();
        assert_eq!(
            text,
            "run,method,param,iteration,metric,value\n3,cloud,tc=1,1,e,0.25\n3,cloud,\"a,b\",,e,1e-20\n"
        );
    }

    #[test]
    fn row_count_is_checked() {
        let mut a = Artifact::new("x.csv", 2);
        a.push(Row::new(0, "m", "", None, "e", 1.0));
        assert!(matches!(
            a.check(),
            Err(CliError::RowCount {
                rows: 1,
                declared: 2,
                ..
            })
        ));
    }
}
