//! Run configuration: defaults, `key = value` files and validation.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::density::{Cutoff, DarkManifold};
use crate::error::{Error, Result};
use crate::initial_state::InitMode;
use crate::observables::Observable;
use crate::secular_solver::CoherenceFeeding;

pub const DEFAULT_SAMPLES: usize = 501;
pub const DEFAULT_TMAX: f64 = 50.0;

/// Everything that determines one simulated time series.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub nbar1: f64,
    pub nbar2: f64,
    /// `Delta / g`.
    pub delta: f64,
    /// `k / g`.
    pub kappa: f64,
    /// Final `g t`.
    pub tmax: f64,
    pub samples: usize,
    pub cutoff: Option<Cutoff>,
    pub observables: Vec<Observable>,
    pub init_mode: InitMode,
    pub manifold: DarkManifold,
    pub feeding: CoherenceFeeding,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            nbar1: 5.0,
            nbar2: 5.0,
            delta: 0.0,
            kappa: 0.0,
            tmax: DEFAULT_TMAX,
            samples: DEFAULT_SAMPLES,
            cutoff: None,
            observables: vec![Observable::Re],
            init_mode: InitMode::default(),
            manifold: DarkManifold::default(),
            feeding: CoherenceFeeding::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("nbar1", self.nbar1),
            ("nbar2", self.nbar2),
            ("delta", self.delta),
            ("kappa", self.kappa),
            ("tmax", self.tmax),
        ];
        for (name, v) in finite {
            if !v.is_finite() {
                return Err(Error::InvalidParams(format!("{name} must be finite, got {v}")));
            }
        }
        for (name, v) in [("nbar1", self.nbar1), ("nbar2", self.nbar2), ("kappa", self.kappa)] {
            if v < 0.0 {
                return Err(Error::InvalidParams(format!("{name} must be >= 0, got {v}")));
            }
        }
        if self.tmax <= 0.0 {
            return Err(Error::InvalidParams(format!("tmax must be > 0, got {}", self.tmax)));
        }
        if self.samples < 2 {
            return Err(Error::InvalidParams(format!("samples must be >= 2, got {}", self.samples)));
        }
        if self.observables.is_empty() {
            return Err(Error::InvalidParams("no observables requested".into()));
        }
        if let Some(c) = self.cutoff {
            if c.n1 < 1 || c.n2 < 1 {
                return Err(Error::InvalidCutoff {
                    n1: c.n1,
                    n2: c.n2,
                    reason: "both photon cutoffs must be >= 1".into(),
                });
            }
        }
        Ok(())
    }

    /// Uniform grid `0, tmax/(samples-1), ..., tmax`.
    pub fn time_grid(&self) -> Vec<f64> {
        let last = (self.samples - 1) as f64;
        (0..self.samples).map(|i| self.tmax * i as f64 / last).collect()
    }

    /// Apply one `key = value` setting; keys mirror the long flag names.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "nbar1" => self.nbar1 = parse_num(key, value)?,
            "nbar2" => self.nbar2 = parse_num(key, value)?,
            "nbar" => {
                self.nbar1 = parse_num(key, value)?;
                self.nbar2 = self.nbar1;
            }
            "delta" => self.delta = parse_num(key, value)?,
            "kappa" | "k" => self.kappa = parse_num(key, value)?,
            "tmax" => self.tmax = parse_num(key, value)?,
            "samples" => self.samples = parse_num(key, value)?,
            "cutoff" => self.cutoff = Some(parse_cutoff(value)?),
            "observables" => self.observables = parse_observables(value)?,
            "init-mode" => self.init_mode = value.parse()?,
            "manifold" => self.manifold = value.parse()?,
            "feeding" => self.feeding = value.parse()?,
            other => return Err(Error::Config(format!("unknown setting '{other}'"))),
        }
        Ok(())
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}'")))
}

/// `N1,N2`.
pub fn parse_cutoff(s: &str) -> Result<Cutoff> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => Ok(Cutoff::new(parse_num("cutoff", a)?, parse_num("cutoff", b)?)),
        _ => Err(Error::Config(format!("cutoff must look like N1,N2, got '{s}'"))),
    }
}

/// Comma-separated observable names.
pub fn parse_observables(s: &str) -> Result<Vec<Observable>> {
    s.split(',')
        .map(str::trim)
        .filter(|n| !n.is_empty())
        .map(Observable::from_str)
        .collect()
}

/// Settings from a flat `key = value` file. Blank lines and `#` comments are
/// ignored; later lines win.
pub fn read_settings(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_settings(&text)
}

pub fn parse_settings(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        RunConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::default();
        c.tmax = 0.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.samples = 1;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.kappa = f64::NAN;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.nbar2 = -1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn grid_endpoints() {
        let c = RunConfig {
            tmax: 2.0,
            samples: 5,
            ..RunConfig::default()
        };
        assert_eq!(c.time_grid(), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
    }

    #[test]
    fn settings_file() {
        let text = "# comment\nnbar1 = 2\nnbar2=3 # trailing\n\nobservables = Re, N1,G2_1\ncutoff = 14,15\nmanifold = paper3\n";
        let mut c = RunConfig::default();
        for (k, v) in parse_settings(text).unwrap() {
            c.set(&k, &v).unwrap();
        }
        assert_eq!((c.nbar1, c.nbar2), (2.0, 3.0));
        assert_eq!(c.observables, vec![Observable::Re, Observable::N1, Observable::G2_1]);
        assert_eq!(c.cutoff, Some(Cutoff::new(14, 15)));
        assert_eq!(c.manifold, DarkManifold::Paper3);
        assert!(parse_settings("nbar1 2").is_err());
        assert!(c.set("colour", "blue").is_err());
        assert!(c.set("observables", "Re,XX").is_err());
    }
}
