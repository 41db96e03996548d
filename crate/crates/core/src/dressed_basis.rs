//! Spectral data of the lossless two-photon Hamiltonian.
//!
//! The interaction couples `|+, n1, n2>` only to `|-, n1+1, n2+1>`, so the
//! Hamiltonian splits into 2x2 blocks labelled by `(n1, n2)`. Each block has
//! the dressed eigenstates
//!
//! ```text
//! |Psi+> = (g+/sqrt2) |+,n1,n2> + (g-/sqrt2) |-,n1+1,n2+1>
//! |Psi-> = (g-/sqrt2) |+,n1,n2> - (g+/sqrt2) |-,n1+1,n2+1>
//! ```
//!
//! with `g± = sqrt(1 ± delta / (2 Omega))` and the Rabi frequency
//! `Omega = sqrt(delta^2/4 + g^2 (n1+1)(n2+1))`. Bare ground states with a
//! vacuum mode (`|-, m, 0>`, `|-, 0, m>`) lie outside every block; they are
//! the dark states reached only through photon leakage.
//!
//! Units: `g` is normally 1 and every time is the product `g t`. Figure
//! captions quote a constant "δ" which is read here as `delta / g`.

use crate::error::{Error, Result};

/// Default absolute mode frequency (units of g) when none is supplied.
pub const DEFAULT_MODE_FREQUENCY: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    /// Atom-field coupling.
    pub g: f64,
    /// Two-photon detuning `omega0 - omega1 - omega2`.
    pub delta: f64,
    /// Cavity leak constant; each mode loses photons at rate `2 kappa`.
    pub kappa: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl ModelParams {
    pub fn new(delta: f64, kappa: f64) -> Result<Self> {
        let p = ModelParams {
            g: 1.0,
            delta,
            kappa,
            omega1: DEFAULT_MODE_FREQUENCY,
            omega2: DEFAULT_MODE_FREQUENCY,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_frequencies(mut self, omega1: f64, omega2: f64) -> Result<Self> {
        self.omega1 = omega1;
        self.omega2 = omega2;
        self.validate()?;
        Ok(self)
    }

    /// Atomic transition frequency implied by the detuning.
    pub fn omega0(&self) -> f64 {
        self.omega1 + self.omega2 + self.delta
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.g, self.delta, self.kappa, self.omega1, self.omega2]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParams("all parameters must be finite".into()));
        }
        if self.g <= 0.0 {
            return Err(Error::InvalidParams(format!("g must be > 0, got {}", self.g)));
        }
        if self.kappa < 0.0 {
            return Err(Error::InvalidParams(format!(
                "kappa must be >= 0, got {}",
                self.kappa
            )));
        }
        if self.omega1 <= 0.0 || self.omega2 <= 0.0 {
            return Err(Error::InvalidParams("mode frequencies must be > 0".into()));
        }
        if self.delta.abs() >= self.omega0().min(self.omega1).min(self.omega2) {
            log::warn!(
                "|delta| = {} is not small against the absolute frequencies; \
                 the rotating-wave model assumes it is",
                self.delta.abs()
            );
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    /// Storage slot: 0 for `+`, 1 for `-`.
    pub fn slot(self) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => 1,
        }
    }
}

/// Label of the dressed eigenstate `|Psi±_{n1 n2}>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DressedIndex {
    pub n1: usize,
    pub n2: usize,
    pub branch: Branch,
}

impl DressedIndex {
    pub fn new(n1: usize, n2: usize, branch: Branch) -> Self {
        DressedIndex { n1, n2, branch }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DarkSide {
    /// `|-, m, 0>` with `m >= 1`.
    Mode1,
    /// `|-, 0, m>` with `m >= 1`.
    Mode2,
    /// `|-, 0, 0>`.
    Origin,
}

/// A bare ground state that no dressed block spans.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DarkIndex {
    pub side: DarkSide,
    pub m: usize,
}

impl DarkIndex {
    pub fn mode1(m: usize) -> Self {
        debug_assert!(m >= 1);
        DarkIndex { side: DarkSide::Mode1, m }
    }

    pub fn mode2(m: usize) -> Self {
        debug_assert!(m >= 1);
        DarkIndex { side: DarkSide::Mode2, m }
    }

    pub fn origin() -> Self {
        DarkIndex { side: DarkSide::Origin, m: 0 }
    }

    /// Photon numbers `(n1, n2)` of the bare state.
    pub fn photons(&self) -> (usize, usize) {
        match self.side {
            DarkSide::Mode1 => (self.m, 0),
            DarkSide::Mode2 => (0, self.m),
            DarkSide::Origin => (0, 0),
        }
    }
}

pub fn rabi_frequency(n1: usize, n2: usize, p: &ModelParams) -> f64 {
    let photons = ((n1 + 1) * (n2 + 1)) as f64;
    (0.25 * p.delta * p.delta + p.g * p.g * photons).sqrt()
}

/// Ratio `delta / Omega_{n1 n2}`; a convenience quantity only.
pub fn detuning_ratio(n1: usize, n2: usize, p: &ModelParams) -> f64 {
    p.delta / rabi_frequency(n1, n2, p)
}

/// Mixing coefficient `g± = sqrt(1 ± delta / (2 Omega))`.
pub fn gamma(n1: usize, n2: usize, branch: Branch, p: &ModelParams) -> f64 {
    let b = BlockConstants::new(n1, n2, p);
    match branch {
        Branch::Plus => b.gamma_plus,
        Branch::Minus => b.gamma_minus,
    }
}

/// Eigenvalue `phi ± Omega` of the full Hamiltonian (hbar = 1).
pub fn eigen_energy(idx: DressedIndex, p: &ModelParams) -> f64 {
    let phi = p.omega1 * (idx.n1 as f64 + 0.5) + p.omega2 * (idx.n2 as f64 + 0.5);
    phi + idx.branch.sign() * rabi_frequency(idx.n1, idx.n2, p)
}

/// Amplitudes `(c_exc, c_gnd)` of `|Psi>` on `|+,n1,n2>` and `|-,n1+1,n2+1>`.
pub fn dressed_amplitudes(idx: DressedIndex, p: &ModelParams) -> (f64, f64) {
    BlockConstants::new(idx.n1, idx.n2, p).amplitudes(idx.branch)
}

/// Per-block constants, cached because every solver loop needs them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockConstants {
    pub omega: f64,
    pub gamma_plus: f64,
    pub gamma_minus: f64,
}

impl BlockConstants {
    pub fn new(n1: usize, n2: usize, p: &ModelParams) -> Self {
        let omega = rabi_frequency(n1, n2, p);
        let coupling = p.g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
        // The larger coefficient comes straight from the formula; the smaller
        // one from g+ g- = coupling / Omega, which avoids cancellation when
        // |delta| dominates.
        let product = coupling / omega;
        let big = (1.0 + p.delta.abs() / (2.0 * omega)).sqrt();
        let small = product / big;
        let (gamma_plus, gamma_minus) = if p.delta >= 0.0 {
            (big, small)
        } else {
            (small, big)
        };
        BlockConstants {
            omega,
            gamma_plus,
            gamma_minus,
        }
    }

    pub fn gamma(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Plus => self.gamma_plus,
            Branch::Minus => self.gamma_minus,
        }
    }

    pub fn amplitudes(&self, branch: Branch) -> (f64, f64) {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        match branch {
            Branch::Plus => (s * self.gamma_plus, s * self.gamma_minus),
            Branch::Minus => (s * self.gamma_minus, -s * self.gamma_plus),
        }
    }

    /// Mean total photon number `n1 + n2 + (g∓)^2` of `|Psi±>`.
    pub fn mean_photons(&self, n1: usize, n2: usize, branch: Branch) -> f64 {
        (n1 + n2) as f64 + self.gamma(branch.flip()).powi(2)
    }

    /// Interaction-frame energy `±Omega`.
    pub fn energy(&self, branch: Branch) -> f64 {
        branch.sign() * self.omega
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn params(delta: f64) -> ModelParams {
        ModelParams::new(delta, 0.0).unwrap()
    }

    /// Eigenvalues of the symmetric 2x2 block, computed independently.
    fn block_eigs(n1: usize, n2: usize, p: &ModelParams) -> (f64, f64) {
        let a = 0.5 * p.delta;
        let d = -0.5 * p.delta;
        let b = p.g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
        let mean = 0.5 * (a + d);
        let r = (0.25 * (a - d).powi(2) + b * b).sqrt();
        (mean + r, mean - r)
    }

    #[test]
    fn rabi_frequency_examples() {
        assert_abs_diff_eq!(rabi_frequency(0, 0, &params(0.0)), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(rabi_frequency(1, 2, &params(0.0)), 6f64.sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(rabi_frequency(0, 0, &params(2.0)), 2f64.sqrt(), epsilon = 1e-15);
        for (n1, n2, delta) in [(1, 2, 0.0), (0, 0, 2.0), (4, 7, -3.5)] {
            let p = params(delta);
            let (hi, lo) = block_eigs(n1, n2, &p);
            assert_abs_diff_eq!(0.5 * (hi - lo), rabi_frequency(n1, n2, &p), epsilon = 1e-12);
        }
    }

    #[test]
    fn gamma_examples() {
        let p = params(0.0);
        assert_abs_diff_eq!(gamma(3, 1, Branch::Plus, &p), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(gamma(3, 1, Branch::Minus, &p), 1.0, epsilon = 1e-15);

        let p = params(2.0);
        let gp = gamma(0, 0, Branch::Plus, &p);
        let gm = gamma(0, 0, Branch::Minus, &p);
        assert_abs_diff_eq!(gp, (1.0 + 0.5f64.sqrt()).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(gm, (1.0 - 0.5f64.sqrt()).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(gp * gp + gm * gm, 2.0, epsilon = 1e-14);

        let p = params(1e8);
        assert_abs_diff_eq!(gamma(0, 0, Branch::Plus, &p), 2f64.sqrt(), epsilon = 1e-7);
        assert!(gamma(0, 0, Branch::Minus, &p) < 1e-7);
    }

    #[test]
    fn eigen_energy_examples() {
        let p = params(0.0);
        assert_abs_diff_eq!(
            eigen_energy(DressedIndex::new(0, 0, Branch::Plus), &p),
            101.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            eigen_energy(DressedIndex::new(1, 1, Branch::Minus), &p),
            298.0,
            epsilon = 1e-12
        );
        let p = params(1.3);
        for (n1, n2) in [(0, 0), (2, 5)] {
            let up = eigen_energy(DressedIndex::new(n1, n2, Branch::Plus), &p);
            let dn = eigen_energy(DressedIndex::new(n1, n2, Branch::Minus), &p);
            assert_abs_diff_eq!(up - dn, 2.0 * rabi_frequency(n1, n2, &p), epsilon = 1e-12);
        }
    }

    #[test]
    fn amplitudes_at_resonance() {
        let p = params(0.0);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let (e, g) = dressed_amplitudes(DressedIndex::new(2, 3, Branch::Plus), &p);
        assert_abs_diff_eq!(e, s, epsilon = 1e-15);
        assert_abs_diff_eq!(g, s, epsilon = 1e-15);
        let (e, g) = dressed_amplitudes(DressedIndex::new(2, 3, Branch::Minus), &p);
        assert_abs_diff_eq!(e, s, epsilon = 1e-15);
        assert_abs_diff_eq!(g, -s, epsilon = 1e-15);
    }

    #[test]
    fn amplitudes_diagonalize_every_block() {
        for delta in [-7.0, 0.0, 0.3, 2.0, 10.0, 100.0] {
            let p = params(delta);
            for n1 in 0..=10 {
                for n2 in 0..=10 {
                    let b = BlockConstants::new(n1, n2, &p);
                    let coupling = p.g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                    assert_abs_diff_eq!(
                        b.gamma_plus.powi(2) + b.gamma_minus.powi(2),
                        2.0,
                        epsilon = 1e-12
                    );
                    assert_abs_diff_eq!(
                        b.gamma_plus * b.gamma_minus,
                        coupling / b.omega,
                        epsilon = 1e-12
                    );
                    let (ep, gp) = b.amplitudes(Branch::Plus);
                    let (em, gm) = b.amplitudes(Branch::Minus);
                    assert_abs_diff_eq!(ep * ep + gp * gp, 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(em * em + gm * gm, 1.0, epsilon = 1e-12);
                    assert_abs_diff_eq!(ep * em + gp * gm, 0.0, epsilon = 1e-12);
                    for branch in Branch::BOTH {
                        let (ce, cg) = b.amplitudes(branch);
                        let e = b.energy(branch);
                        let r0 = 0.5 * delta * ce + coupling * cg - e * ce;
                        let r1 = coupling * ce - 0.5 * delta * cg - e * cg;
                        assert!((r0 * r0 + r1 * r1).sqrt() <= 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn rabi_frequency_is_monotone() {
        for delta in [0.0, 10.0] {
            let p = params(delta);
            for n in 0..20 {
                for m in 0..20 {
                    let w = rabi_frequency(n, m, &p);
                    assert!(rabi_frequency(n + 1, m, &p) >= w);
                    assert!(rabi_frequency(n, m + 1, &p) >= w);
                }
            }
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        assert!(ModelParams::new(0.0, -0.1).is_err());
        assert!(ModelParams::new(f64::NAN, 0.0).is_err());
        let mut p = params(0.0);
        p.g = 0.0;
        assert!(p.validate().is_err());
    }
}
