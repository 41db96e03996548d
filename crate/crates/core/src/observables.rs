//! Observables evaluated from a dressed-basis density.
//!
//! `W` is the interaction-picture density, so every matrix element
//! `<x|O|y><y|W|x>` carries the phase `e^{i (E_x - E_y) t}`. Field operators
//! are the slowly varying ones (`a_i e^{i omega_i t}`), which leaves only the
//! Rabi frequencies `±Omega` in the phases. The atomic dipole is referred to
//! `omega0` and so keeps an extra `e^{-i delta t}`.
//!
//! Contributions from coherences that involve dark states are not tracked
//! and count as zero.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64 as C64;

use crate::density::{CoherenceOffset, DressedDensity};
use crate::dressed_basis::{Branch, DarkSide};
use crate::error::{Error, Result};

/// Below this `|<N_i>|` the correlation function is undefined.
pub const MIN_PHOTON_NUMBER: f64 = 1e-12;
/// Below this `|<sigma3>|` the dipole squeezing factors are undefined.
pub const MIN_INVERSION: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    One,
    Two,
}

impl Mode {
    pub fn number(self) -> usize {
        match self {
            Mode::One => 1,
            Mode::Two => 2,
        }
    }

    fn pick(self, n1: usize, n2: usize) -> usize {
        match self {
            Mode::One => n1,
            Mode::Two => n2,
        }
    }

    fn offsets(self) -> (CoherenceOffset, CoherenceOffset) {
        match self {
            Mode::One => (CoherenceOffset::Mode1, CoherenceOffset::Mode1Double),
            Mode::Two => (CoherenceOffset::Mode2, CoherenceOffset::Mode2Double),
        }
    }
}

fn phase(angle: f64) -> C64 {
    C64::from_polar(1.0, angle)
}

/// Expectation of an operator diagonal in the bare basis with eigenvalue
/// `f(excited, n1, n2)`.
fn bare_diagonal<F>(w: &DressedDensity, t: f64, f: F) -> f64
where
    F: Fn(bool, usize, usize) -> f64,
{
    let sp = w.spectrum();
    let mut acc = 0.0;
    for (n1, n2) in w.cutoff().iter() {
        let b = sp.block(n1, n2);
        let fe = f(true, n1, n2);
        let fg = f(false, n1 + 1, n2 + 1);
        for br in Branch::BOTH {
            let (ce, cg) = b.amplitudes(br);
            let pop = w.population(crate::dressed_basis::DressedIndex::new(n1, n2, br));
            acc += pop * (ce * ce * fe + cg * cg * fg);
        }
        // <Psi+|O|Psi-> = c_e+ c_e- (f_e - f_g), doubled with its conjugate.
        let (cep, _) = b.amplitudes(Branch::Plus);
        let (cem, _) = b.amplitudes(Branch::Minus);
        let off = cep * cem * (fe - fg);
        if off != 0.0 {
            let coh = w.block_coherence(n1, n2) * phase(-2.0 * b.omega * t);
            acc += 2.0 * off * coh.re;
        }
    }
    for d in w.dark_states() {
        let (m1, m2) = d.photons();
        acc += w.dark_population(d) * f(false, m1, m2);
    }
    acc
}

pub fn mean_photon(w: &DressedDensity, t: f64, mode: Mode) -> f64 {
    bare_diagonal(w, t, |_, n1, n2| mode.pick(n1, n2) as f64)
}

/// `(<R_e>, <R_g>)`.
pub fn atomic_populations(w: &DressedDensity, t: f64) -> (f64, f64) {
    let re = bare_diagonal(w, t, |e, _, _| if e { 1.0 } else { 0.0 });
    let rg = bare_diagonal(w, t, |e, _, _| if e { 0.0 } else { 1.0 });
    (re, rg)
}

pub fn inversion(w: &DressedDensity, t: f64) -> f64 {
    let (re, rg) = atomic_populations(w, t);
    re - rg
}

/// `<a_i^+2 a_i^2>`.
pub fn factorial_moment(w: &DressedDensity, t: f64, mode: Mode) -> f64 {
    bare_diagonal(w, t, |_, n1, n2| {
        let n = mode.pick(n1, n2) as f64;
        n * (n - 1.0)
    })
}

/// `G2_i = (<a+^2 a^2> - <a+ a>^2) / <a+ a>^2`; negative means antibunched.
pub fn second_order_correlation(w: &DressedDensity, t: f64, mode: Mode) -> Result<f64> {
    let n = mean_photon(w, t, mode);
    if n.abs() <= MIN_PHOTON_NUMBER {
        return Err(Error::DegenerateDenominator {
            mode: mode.number(),
            value: n,
        });
    }
    Ok((factorial_moment(w, t, mode) - n * n) / (n * n))
}

/// Slowly varying `<a_i>` and `<a_i^2>`.
pub fn field_moments(w: &DressedDensity, t: f64, mode: Mode) -> (C64, C64) {
    let sp = w.spectrum();
    let cut = w.cutoff();
    let (single, double) = mode.offsets();
    let mut a1 = C64::new(0.0, 0.0);
    let mut a2 = C64::new(0.0, 0.0);
    for (n1, n2) in cut.iter() {
        let lo = sp.block(n1, n2);
        let n = mode.pick(n1, n2) as f64;
        for (off, steps) in [(single, 1usize), (double, 2usize)] {
            let (d1, d2) = off.shift();
            if !cut.contains(n1 + d1, n2 + d2) {
                continue;
            }
            let up = sp.block(n1 + d1, n2 + d2);
            // Ladder factors on the excited and ground components.
            let (fe, fg) = if steps == 1 {
                ((n + 1.0).sqrt(), (n + 2.0).sqrt())
            } else {
                (((n + 1.0) * (n + 2.0)).sqrt(), ((n + 2.0) * (n + 3.0)).sqrt())
            };
            let mut acc = C64::new(0.0, 0.0);
            for b in Branch::BOTH {
                let (lbe, lbg) = lo.amplitudes(b);
                for a in Branch::BOTH {
                    let (uae, uag) = up.amplitudes(a);
                    let m = lbe * uae * fe + lbg * uag * fg;
                    let x = w.cross_coherence(off, n1, n2, a, b);
                    acc += x * m * phase((lo.energy(b) - up.energy(a)) * t);
                }
            }
            if steps == 1 {
                a1 += acc;
            } else {
                a2 += acc;
            }
        }
    }
    (a1, a2)
}

static BLOCK_DIAGONAL_WARNED: AtomicBool = AtomicBool::new(false);

/// First-quadrature squeezing factor `S = 4 (Delta X1)^2`; `S < 1` is squeezed.
pub fn field_squeezing(w: &DressedDensity, t: f64, mode: Mode) -> f64 {
    let (a, a2) = field_moments(w, t, mode);
    if a == C64::new(0.0, 0.0)
        && a2 == C64::new(0.0, 0.0)
        && !BLOCK_DIAGONAL_WARNED.swap(true, Ordering::Relaxed)
    {
        log::warn!(
            "field squeezing evaluated without cross-block coherences; \
             S reduces to 2<N> + 1 and never shows squeezing"
        );
    }
    let n = mean_photon(w, t, mode);
    2.0 * a2.re + 2.0 * n - 4.0 * a.re * a.re + 1.0
}

/// Slowly varying dipole `<R+> e^{-i omega0 t}`.
pub fn dipole(w: &DressedDensity, t: f64) -> C64 {
    let sp = w.spectrum();
    let cut = w.cutoff();
    let mut acc = C64::new(0.0, 0.0);
    for (n1, n2) in cut.iter() {
        if !cut.contains(n1 + 1, n2 + 1) {
            continue;
        }
        let lo = sp.block(n1, n2);
        let up = sp.block(n1 + 1, n2 + 1);
        for a in Branch::BOTH {
            let uae = up.amplitudes(a).0;
            for b in Branch::BOTH {
                let lbg = lo.amplitudes(b).1;
                let x = w.cross_coherence(CoherenceOffset::Both, n1, n2, a, b);
                acc += x.conj() * (uae * lbg) * phase((up.energy(a) - lo.energy(b)) * t);
            }
        }
    }
    acc * phase(-w.params().delta * t)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DipoleSqueezing {
    /// Dispersive component factor.
    pub f1: f64,
    /// Absorptive component factor.
    pub f2: f64,
    pub sigma3: f64,
}

pub fn atomic_dipole_squeezing(w: &DressedDensity, t: f64) -> Result<DipoleSqueezing> {
    let s3 = inversion(w, t);
    if s3.abs() <= MIN_INVERSION {
        return Err(Error::InversionNode(s3));
    }
    let s = dipole(w, t);
    Ok(DipoleSqueezing {
        f1: (1.0 - 4.0 * s.re * s.re) / s3.abs(),
        f2: (1.0 - 4.0 * s.im * s.im) / s3.abs(),
        sigma3: s3,
    })
}

/// Named scalar observables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Observable {
    N1,
    N2,
    Re,
    Rg,
    G2_1,
    G2_2,
    S1,
    S2,
    F1,
    F2,
    Sigma3,
}

impl Observable {
    pub const ALL: [Observable; 11] = [
        Observable::N1,
        Observable::N2,
        Observable::Re,
        Observable::Rg,
        Observable::G2_1,
        Observable::G2_2,
        Observable::S1,
        Observable::S2,
        Observable::F1,
        Observable::F2,
        Observable::Sigma3,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Observable::N1 => "N1",
            Observable::N2 => "N2",
            Observable::Re => "Re",
            Observable::Rg => "Rg",
            Observable::G2_1 => "G2_1",
            Observable::G2_2 => "G2_2",
            Observable::S1 => "S1",
            Observable::S2 => "S2",
            Observable::F1 => "F1",
            Observable::F2 => "F2",
            Observable::Sigma3 => "sigma3",
        }
    }

    /// Evaluate; `Ok(None)` marks a sample where the quantity is undefined.
    pub fn evaluate(self, w: &DressedDensity, t: f64) -> Result<Option<f64>> {
        let undefined = |r: Result<f64>| match r {
            Ok(v) => Ok(Some(v)),
            Err(Error::DegenerateDenominator { .. }) | Err(Error::InversionNode(_)) => Ok(None),
            Err(e) => Err(e),
        };
        match self {
            Observable::N1 => Ok(Some(mean_photon(w, t, Mode::One))),
            Observable::N2 => Ok(Some(mean_photon(w, t, Mode::Two))),
            Observable::Re => Ok(Some(atomic_populations(w, t).0)),
            Observable::Rg => Ok(Some(atomic_populations(w, t).1)),
            Observable::G2_1 => undefined(second_order_correlation(w, t, Mode::One)),
            Observable::G2_2 => undefined(second_order_correlation(w, t, Mode::Two)),
            Observable::S1 => Ok(Some(field_squeezing(w, t, Mode::One))),
            Observable::S2 => Ok(Some(field_squeezing(w, t, Mode::Two))),
            Observable::F1 => undefined(atomic_dipole_squeezing(w, t).map(|d| d.f1)),
            Observable::F2 => undefined(atomic_dipole_squeezing(w, t).map(|d| d.f2)),
            Observable::Sigma3 => Ok(Some(inversion(w, t))),
        }
    }
}

impl fmt::Display for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Observable::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::UnknownObservable(s.to_string()))
    }
}

/// Observable values at one time; `None` marks an undefined sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableSample {
    pub t: f64,
    pub values: Vec<(Observable, Option<f64>)>,
}

impl ObservableSample {
    pub fn evaluate(w: &DressedDensity, t: f64, names: &[Observable]) -> Result<Self> {
        let values = names
            .iter()
            .map(|&o| o.evaluate(w, t).map(|v| (o, v)))
            .collect::<Result<Vec<_>>>()?;
        Ok(ObservableSample { t, values })
    }

    pub fn get(&self, obs: Observable) -> Option<f64> {
        self.values.iter().find(|(o, _)| *o == obs).and_then(|(_, v)| *v)
    }
}

/// Total dark population on one side (diagnostics).
pub fn dark_side_total(w: &DressedDensity, side: DarkSide) -> f64 {
    w.dark_states()
        .into_iter()
        .filter(|d| d.side == side)
        .map(|d| w.dark_population(d))
        .sum()
}
