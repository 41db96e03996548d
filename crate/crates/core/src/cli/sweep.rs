//! Cartesian parameter sweeps run on a worker pool.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::cli::config::RunConfig;
use crate::cli::output::{format_g, write_atomic};
use crate::cli::run::simulate;
use crate::error::{Error, Result};

/// Sweeps larger than this need `force`.
pub const MAX_SWEEP_RUNS: usize = 10_000;

pub const MANIFEST_NAME: &str = "manifest.tsv";

const SWEEPABLE: [&str; 7] = ["nbar1", "nbar2", "nbar", "delta", "kappa", "k", "tmax"];

/// One swept parameter and its values.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRange {
    pub key: String,
    pub values: Vec<f64>,
}

impl std::str::FromStr for SweepRange {
    type Err = Error;

    /// `key=start:stop:count` (inclusive, evenly spaced) or `key=v1,v2,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (key, spec) = s
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("sweep range '{s}' must look like key=start:stop:count")))?;
        let key = key.trim();
        if !SWEEPABLE.contains(&key) {
            return Err(Error::Config(format!(
                "cannot sweep '{key}' (sweepable: {})",
                SWEEPABLE.join(", ")
            )));
        }
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("sweep range '{s}': cannot parse '{v}'")))
        };
        let values = if spec.contains(':') {
            let parts: Vec<&str> = spec.split(':').collect();
            let [start, stop, count] = parts.as_slice() else {
                return Err(Error::Config(format!("sweep range '{s}' must have start:stop:count")));
            };
            let (start, stop) = (num(start)?, num(stop)?);
            let count: usize = count
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("sweep range '{s}': bad count")))?;
            match count {
                0 => return Err(Error::Config(format!("sweep range '{s}': count must be >= 1"))),
                1 => vec![start],
                _ => (0..count)
                    .map(|i| start + (stop - start) * i as f64 / (count - 1) as f64)
                    .collect(),
            }
        } else {
            spec.split(',').map(num).collect::<Result<Vec<_>>>()?
        };
        Ok(SweepRange {
            key: key.to_string(),
            values,
        })
    }
}

/// One point of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub file: String,
    pub settings: Vec<(String, f64)>,
    pub config: RunConfig,
}

/// Expand `ranges` over `base`; an empty list yields the base run alone.
pub fn expand(base: &RunConfig, ranges: &[SweepRange], force: bool) -> Result<Vec<SweepPoint>> {
    let total = ranges
        .iter()
        .try_fold(1usize, |acc, r| acc.checked_mul(r.values.len()))
        .unwrap_or(usize::MAX);
    if total > MAX_SWEEP_RUNS && !force {
        return Err(Error::InvalidParams(format!(
            "sweep has {total} runs (limit {MAX_SWEEP_RUNS}); pass --force to run it anyway"
        )));
    }
    let mut points: Vec<Vec<(String, f64)>> = vec![Vec::new()];
    for r in ranges {
        points = points
            .into_iter()
            .flat_map(|p| {
                r.values.iter().map(move |&v| {
                    let mut q = p.clone();
                    q.push((r.key.clone(), v));
                    q
                })
            })
            .collect();
    }
    let width = total.saturating_sub(1).to_string().len().max(4);
    points
        .into_iter()
        .enumerate()
        .map(|(i, settings)| {
            let mut config = base.clone();
            for (k, v) in &settings {
                config.set(k, &v.to_string())?;
            }
            config.validate()?;
            Ok(SweepPoint {
                file: format!("run_{i:0width$}.csv"),
                settings,
                config,
            })
        })
        .collect()
}

/// `filename<TAB>param=value;...`, one line per run.
pub fn manifest(points: &[SweepPoint]) -> String {
    let mut out = String::new();
    for p in points {
        let params: Vec<String> = p
            .settings
            .iter()
            .map(|(k, v)| format!("{k}={}", format_g(*v, 12)))
            .collect();
        out.push_str(&p.file);
        out.push('\t');
        out.push_str(&params.join(";"));
        out.push('\n');
    }
    out
}

/// Run every point concurrently, writing one CSV each plus the manifest.
pub fn run_sweep(points: &[SweepPoint], out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let files = points
        .par_iter()
        .map(|p| {
            let ts = simulate(&p.config)?;
            let path = out.join(&p.file);
            write_atomic(&path, ts.to_csv().as_bytes())?;
            log::info!("wrote {}", path.display());
            Ok(path)
        })
        .collect::<Result<Vec<_>>>()?;
    write_atomic(&out.join(MANIFEST_NAME), manifest(points).as_bytes())?;
    Ok(files)
}
