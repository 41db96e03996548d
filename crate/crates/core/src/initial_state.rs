//! Initial states: excited atom with coherent or Fock fields.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::density::{CoherenceOffset, Cutoff, DressedDensity, Spectrum};
use crate::dressed_basis::{Branch, DressedIndex, ModelParams};
use crate::error::{Error, Result};

/// Largest Poisson tail mass tolerated beyond a cutoff.
pub const MAX_TAIL_MASS: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum InitMode {
    /// Product coherent state with every cross-block coherence kept.
    #[default]
    FullCoherence,
    /// Only same-block terms (no cross-block coherence at all).
    BlockDiagonal,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-coherence" => Ok(InitMode::FullCoherence),
            "block-diagonal" => Ok(InitMode::BlockDiagonal),
            other => Err(Error::Config(format!("unknown init mode '{other}'"))),
        }
    }
}

/// Poisson probability `exp(-nbar) nbar^n / n!`.
pub fn poisson_weight(nbar: f64, n: usize) -> f64 {
    if nbar == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    (n as f64 * nbar.ln() - nbar - ln_fact).exp()
}

/// Probability mass above `cutoff`.
pub fn poisson_tail(nbar: f64, cutoff: usize) -> f64 {
    if nbar == 0.0 {
        return 0.0;
    }
    // Sum upward until terms are negligible; summing the tail directly keeps
    // full relative precision where `1 - sum` would not.
    let mut total = 0.0;
    let mut n = cutoff + 1;
    let mut term = poisson_weight(nbar, n);
    loop {
        total += term;
        n += 1;
        term *= nbar / n as f64;
        if (n as f64 > nbar && term < 1e-20 * total.max(1e-300)) || n > cutoff + 100_000 {
            break;
        }
    }
    total
}

/// Cutoff `ceil(nbar + 8 sqrt(max(nbar, 1)) + 10)`.
pub fn default_cutoff(nbar: f64) -> usize {
    (nbar + 8.0 * nbar.max(1.0).sqrt() + 10.0).ceil() as usize
}

/// Coherent amplitudes `c_n`, renormalized over `0..=cutoff`.
fn coherent_amplitudes(nbar: f64, cutoff: usize) -> Vec<f64> {
    let weights: Vec<f64> = (0..=cutoff).map(|n| poisson_weight(nbar, n)).collect();
    let norm: f64 = weights.iter().sum();
    weights.iter().map(|w| (w / norm).sqrt()).collect()
}

fn check_tail(mode: usize, nbar: f64, cutoff: usize) -> Result<()> {
    if !nbar.is_finite() || nbar < 0.0 {
        return Err(Error::InvalidParams(format!("nbar{mode} must be >= 0, got {nbar}")));
    }
    let tail = poisson_tail(nbar, cutoff);
    if tail >= MAX_TAIL_MASS {
        return Err(Error::CutoffTooSmall { mode, cutoff, tail });
    }
    Ok(())
}

/// Excited atom and two coherent fields with real amplitudes `sqrt(nbar_i)`.
///
/// Passing `None` selects [`default_cutoff`] per mode.
pub fn coherent_excited(
    params: &ModelParams,
    nbar1: f64,
    nbar2: f64,
    cutoff: Option<Cutoff>,
    mode: InitMode,
) -> Result<DressedDensity> {
    params.validate()?;
    let cut = cutoff.unwrap_or_else(|| Cutoff::new(default_cutoff(nbar1), default_cutoff(nbar2)));
    check_tail(1, nbar1, cut.n1)?;
    check_tail(2, nbar2, cut.n2)?;
    let c1 = coherent_amplitudes(nbar1, cut.n1);
    let c2 = coherent_amplitudes(nbar2, cut.n2);
    let spectrum = Arc::new(Spectrum::new(*params, cut));
    let mut w = DressedDensity::zeros(spectrum.clone());

    // <Psi^a_m|rho0|Psi^b_n> = c_e^a(m) c_e^b(n) c_{m1} c_{m2} c_{n1} c_{n2}:
    // only the excited component of each block overlaps |e>.
    let weight = |n1: usize, n2: usize| c1[n1] * c2[n2];
    for (n1, n2) in cut.iter() {
        let b = spectrum.block(n1, n2);
        let p = weight(n1, n2).powi(2);
        for branch in Branch::BOTH {
            let ce = b.amplitudes(branch).0;
            w.set_population(DressedIndex::new(n1, n2, branch), p * ce * ce);
        }
        let coh = p * b.amplitudes(Branch::Plus).0 * b.amplitudes(Branch::Minus).0;
        w.set_block_coherence(n1, n2, C64::new(coh, 0.0));
    }
    if mode == InitMode::FullCoherence {
        for off in CoherenceOffset::ALL {
            let (d1, d2) = off.shift();
            for (n1, n2) in cut.iter() {
                let (u1, u2) = (n1 + d1, n2 + d2);
                if !cut.contains(u1, u2) {
                    continue;
                }
                let lower = spectrum.block(n1, n2);
                let upper = spectrum.block(u1, u2);
                let amp = weight(u1, u2) * weight(n1, n2);
                for a in Branch::BOTH {
                    for b in Branch::BOTH {
                        let v = amp * upper.amplitudes(a).0 * lower.amplitudes(b).0;
                        w.set_cross_coherence(off, n1, n2, a, b, C64::new(v, 0.0));
                    }
                }
            }
        }
    }
    Ok(w)
}

/// Excited atom with Fock fields `|n1, n2>`.
pub fn fock_excited(params: &ModelParams, n1: usize, n2: usize) -> Result<DressedDensity> {
    params.validate()?;
    let cut = Cutoff::new(n1.max(1), n2.max(1));
    let spectrum = Arc::new(Spectrum::new(*params, cut));
    let mut w = DressedDensity::zeros(spectrum.clone());
    let b = spectrum.block(n1, n2);
    let (cp, cm) = (b.amplitudes(Branch::Plus).0, b.amplitudes(Branch::Minus).0);
    w.set_population(DressedIndex::new(n1, n2, Branch::Plus), cp * cp);
    w.set_population(DressedIndex::new(n1, n2, Branch::Minus), cm * cm);
    w.set_block_coherence(n1, n2, C64::new(cp * cm, 0.0));
    Ok(w)
}
