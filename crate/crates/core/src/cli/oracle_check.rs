//! Side-by-side comparison of the secular solver and the oracle.

use std::fmt::Write as _;

use crate::cli::config::RunConfig;
use crate::cli::output::TimeSeries;
use crate::cli::run::{effective_cutoff, simulate, simulate_oracle};
use crate::error::{Error, Result};
use crate::lindblad_oracle::MAX_FIELD_STATES;
use crate::observables::Observable;

/// Largest acceptable secular/oracle deviation for `obs`.
pub fn tolerance(obs: Observable) -> f64 {
    match obs {
        Observable::Re | Observable::Rg => 0.05,
        Observable::N1 | Observable::N2 => 0.1,
        Observable::G2_1 | Observable::G2_2 => 0.05,
        Observable::F1 | Observable::F2 => 0.05,
        Observable::S1 | Observable::S2 | Observable::Sigma3 => 0.1,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub observable: Observable,
    pub max_deviation: f64,
    /// Time of the largest deviation.
    pub at: f64,
    pub tolerance: f64,
    /// Samples where either solver left the value undefined.
    pub skipped: usize,
}

impl Comparison {
    pub fn passed(&self) -> bool {
        self.max_deviation <= self.tolerance
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub comparisons: Vec<Comparison>,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.comparisons.iter().all(Comparison::passed)
    }

    pub fn render(&self) -> String {
        let mut s = String::from("observable\tmax_abs_dev\tat_gt\ttolerance\tskipped\tresult\n");
        for c in &self.comparisons {
            let _ = writeln!(
                s,
                "{}\t{:.6e}\t{}\t{}\t{}\t{}",
                c.observable,
                c.max_deviation,
                c.at,
                c.tolerance,
                c.skipped,
                if c.passed() { "PASS" } else { "FAIL" }
            );
        }
        let _ = writeln!(s, "overall\t{}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }
}

/// Per-observable maximum deviation between two series on the same grid.
pub fn compare(secular: &TimeSeries, oracle: &TimeSeries) -> OracleReport {
    let comparisons = secular
        .observables
        .iter()
        .filter_map(|&obs| {
            let a = secular.column(obs)?;
            let b = oracle.column(obs)?;
            let mut worst = (0.0, 0.0);
            let mut skipped = 0;
            for ((x, y), &t) in a.iter().zip(&b).zip(&secular.t) {
                match (x, y) {
                    (Some(x), Some(y)) => {
                        let d = (x - y).abs();
                        if d > worst.0 || d.is_nan() {
                            worst = (d, t);
                        }
                    }
                    _ => skipped += 1,
                }
            }
            Some(Comparison {
                observable: obs,
                max_deviation: worst.0,
                at: worst.1,
                tolerance: tolerance(obs),
                skipped,
            })
        })
        .collect();
    OracleReport { comparisons }
}

/// Refuse configurations the oracle cannot afford before doing any work.
pub fn check_cost(config: &RunConfig) -> Result<()> {
    let cut = effective_cutoff(config);
    let size = (cut.n1 + 1) * (cut.n2 + 1);
    if size > MAX_FIELD_STATES {
        return Err(Error::OracleTooLarge {
            size,
            limit: MAX_FIELD_STATES,
        });
    }
    Ok(())
}

/// Run both solvers on `config` and compare them.
pub fn oracle_check(config: &RunConfig) -> Result<(TimeSeries, TimeSeries, OracleReport)> {
    config.validate()?;
    check_cost(config)?;
    let secular = simulate(config)?;
    let oracle = simulate_oracle(config)?;
    let report = compare(&secular, &oracle);
    Ok((secular, oracle, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn large_request_is_refused() {
        let c = RunConfig {
            nbar1: 30.0,
            nbar2: 30.0,
            ..RunConfig::default()
        };
        assert!(matches!(oracle_check(&c), Err(Error::OracleTooLarge { .. })));
    }

    #[test]
    fn compare_skips_undefined() {
        let a = TimeSeries {
            observables: vec![Observable::F2],
            t: vec![0.0, 1.0, 2.0],
            rows: vec![vec![Some(1.0)], vec![None], vec![Some(2.0)]],
        };
        let mut b = a.clone();
        b.rows[2][0] = Some(2.5);
        let r = compare(&a, &b);
        assert_eq!(r.comparisons[0].skipped, 1);
        assert_eq!(r.comparisons[0].max_deviation, 0.5);
        assert_eq!(r.comparisons[0].at, 2.0);
        assert!(!r.passed());
        assert!(r.render().ends_with("overall\tFAIL\n"));
    }

    #[test]
    fn lossless_agreement() {
        let c = RunConfig {
            nbar1: 0.5,
            nbar2: 0.5,
            delta: 1.0,
            tmax: 4.0,
            samples: 9,
            cutoff: Some(crate::density::Cutoff::new(12, 12)),
            observables: Observable::ALL.to_vec(),
            ..RunConfig::default()
        };
        let (_, _, r) = oracle_check(&c).unwrap();
        for cmp in &r.comparisons {
            assert!(cmp.max_deviation < 1e-6, "{cmp:?}");
        }
    }

    #[test]
    fn feeding_narrows_the_gap_to_the_oracle() {
        let base = RunConfig {
            nbar1: 1.0,
            nbar2: 1.0,
            kappa: 0.05,
            tmax: 6.0,
            samples: 61,
            cutoff: Some(crate::density::Cutoff::new(12, 12)),
            observables: vec![Observable::Re, Observable::S1],
            ..RunConfig::default()
        };
        let dev = |feeding| {
            let c = RunConfig { feeding, ..base.clone() };
            let (_, _, r) = oracle_check(&c).unwrap();
            (r.comparisons[0].max_deviation, r.comparisons[1].max_deviation)
        };
        let (re_fed, s_fed) = dev(crate::CoherenceFeeding::NearResonant);
        let (re_none, s_none) = dev(crate::CoherenceFeeding::None);
        assert!(re_fed < 0.02, "{re_fed}");
        assert!(s_fed < 0.5, "{s_fed}");
        assert!(re_none > 2.0 * re_fed && s_none > 2.0 * s_fed);
    }
}
