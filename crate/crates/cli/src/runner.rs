//! Sweep execution: a bounded worker pool evaluates points while a single
//! writer commits their rows in sweep order, flushing after every point.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::experiments::{columns, evaluate, PointOutput};

pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Done,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct PointStatus {
    pub index: usize,
    pub value: Option<f64>,
    pub status: Status,
    pub rows: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub csv_schema_version: u32,
    pub columns: Vec<String>,
    pub workers: usize,
    pub started_unix: u64,
    pub wall_time_s: f64,
    pub csv: PathBuf,
    pub sidecar: Option<PathBuf>,
    pub points: Vec<PointStatus>,
}

impl RunManifest {
    pub fn failed(&self) -> usize {
        self.points.iter().filter(|p| p.status == Status::Failed).count()
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    output.with_extension("manifest.json")
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("modes.json")
}

fn format_row(row: &[f64]) -> String {
    let cells: Vec<String> = row.iter().map(|x| format!("{x:.16e}")).collect();
    cells.join(",")
}

pub fn run(config: &ExperimentConfig, workers: usize) -> Result<RunManifest> {
    let started = Instant::now();
    let started_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    if let Some(dir) = config.output.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let file = File::create(&config.output).with_context(|| format!("creating {}", config.output.display()))?;
    let mut csv = BufWriter::new(file);
    let cols = columns(config.experiment);
    writeln!(csv, "{}", cols.join(","))?;
    csv.flush()?;

    let points = config.points();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build()?;
    let (tx, rx) = mpsc::channel::<(usize, kerr_core::Result<PointOutput>)>();
    let mut statuses = Vec::with_capacity(points.len());
    let mut sidecar = None;

    std::thread::scope(|scope| -> Result<()> {
        let work: Vec<(usize, Option<f64>)> = points.iter().copied().enumerate().collect();
        scope.spawn(move || {
            pool.install(|| {
                work.into_par_iter().for_each_with(tx, |tx, (i, v)| {
                    let out = evaluate(config.experiment, &config.at(v), config.seed);
                    let _ = tx.send((i, out));
                });
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, out) in rx {
            pending.insert(i, out);
            while let Some(out) = pending.remove(&next) {
                let value = points[next];
                match out {
                    Ok(p) => {
                        for row in &p.rows {
                            writeln!(csv, "{}", format_row(row))?;
                        }
                        csv.flush()?;
                        if let Some(doc) = p.sidecar {
                            let path = sidecar_path(&config.output);
                            std::fs::write(&path, serde_json::to_string_pretty(&doc)?)?;
                            sidecar = Some(path);
                        }
                        statuses.push(PointStatus { index: next, value, status: Status::Done, rows: p.rows.len(), error: None });
                    }
                    Err(e) => statuses.push(PointStatus {
                        index: next,
                        value,
                        status: Status::Failed,
                        rows: 0,
                        error: Some(e.to_string()),
                    }),
                }
                next += 1;
            }
        }
        Ok(())
    })?;

    let manifest = RunManifest {
        config: config.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        csv_schema_version: CSV_SCHEMA_VERSION,
        columns: cols.iter().map(|c| c.to_string()).collect(),
        workers,
        started_unix,
        wall_time_s: started.elapsed().as_secs_f64(),
        csv: config.output.clone(),
        sidecar,
        points: statuses,
    };
    std::fs::write(manifest_path(&config.output), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
