//! Brute-force master-equation integrator in the truncated bare basis.
//!
//! The density matrix is kept in the frame rotating at the free frequencies
//! (`(omega1 + omega2) Rz + omega1 N1 + omega2 N2`), where the Hamiltonian is
//! the time-independent `delta Rz + g (a1 a2 R+ + h.c.)` and the cavity
//! dissipator is unchanged. Expectation values in this frame are those of the
//! slowly varying operators (`a_i e^{i omega_i t}` and so on); the atomic
//! dipole picks up an extra `e^{-i delta t}` relative to `omega0`, see
//! [`slow_dipole`].
//!
//! Nothing here reuses the dressed-state machinery: the oracle exists to
//! check it.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::density::Cutoff;
use crate::dressed_basis::ModelParams;
use crate::error::{Error, Result};
use crate::initial_state::poisson_weight;
use crate::observables::{Observable, MIN_INVERSION, MIN_PHOTON_NUMBER};

/// Largest `(N1+1)(N2+1)` the oracle accepts.
pub const MAX_FIELD_STATES: usize = 400;
/// Tolerated trace drift over a run.
pub const TRACE_DRIFT_TOL: f64 = 1e-8;
/// Advisory bound on `dt * ||H||`.
pub const ADVISORY_DT_NORM: f64 = 0.05;

const NONE: usize = usize::MAX;

/// Full density matrix over `|atom, n1, n2>`, atom-major (`+` first).
#[derive(Clone, Debug, PartialEq)]
pub struct BareDensity {
    cutoff: Cutoff,
    dim: usize,
    data: Vec<C64>,
}

impl BareDensity {
    pub fn zeros(cutoff: Cutoff) -> Result<Self> {
        check_size(cutoff)?;
        let dim = 2 * cutoff.blocks();
        Ok(BareDensity {
            cutoff,
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
        })
    }

    /// Pure state `|psi><psi|` from an amplitude vector.
    pub fn from_pure(cutoff: Cutoff, psi: &[C64]) -> Result<Self> {
        let mut rho = Self::zeros(cutoff)?;
        if psi.len() != rho.dim {
            return Err(Error::InvalidParams(format!(
                "state vector has length {}, expected {}",
                psi.len(),
                rho.dim
            )));
        }
        for i in 0..rho.dim {
            for j in 0..rho.dim {
                rho.data[i * rho.dim + j] = psi[i] * psi[j].conj();
            }
        }
        Ok(rho)
    }

    /// Excited atom with real-amplitude coherent fields, renormalized over
    /// the truncated space.
    pub fn coherent_excited(nbar1: f64, nbar2: f64, cutoff: Cutoff) -> Result<Self> {
        let amps = |nbar: f64, n: usize| -> Vec<f64> {
            let w: Vec<f64> = (0..=n).map(|k| poisson_weight(nbar, k)).collect();
            let s: f64 = w.iter().sum();
            w.iter().map(|x| (x / s).sqrt()).collect()
        };
        let c1 = amps(nbar1, cutoff.n1);
        let c2 = amps(nbar2, cutoff.n2);
        let mut psi = vec![C64::new(0.0, 0.0); 2 * cutoff.blocks()];
        for n1 in 0..=cutoff.n1 {
            for n2 in 0..=cutoff.n2 {
                psi[index(&cutoff, true, n1, n2)] = C64::new(c1[n1] * c2[n2], 0.0);
            }
        }
        Self::from_pure(cutoff, &psi)
    }

    pub fn fock_excited(n1: usize, n2: usize, cutoff: Cutoff) -> Result<Self> {
        if !cutoff.contains(n1, n2) {
            return Err(Error::InvalidCutoff {
                n1: cutoff.n1,
                n2: cutoff.n2,
                reason: format!("Fock state ({n1}, {n2}) lies outside"),
            });
        }
        let mut psi = vec![C64::new(0.0, 0.0); 2 * cutoff.blocks()];
        psi[index(&cutoff, true, n1, n2)] = C64::new(1.0, 0.0);
        Self::from_pure(cutoff, &psi)
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn element(&self, bra: (bool, usize, usize), ket: (bool, usize, usize)) -> C64 {
        let c = &self.cutoff;
        self.get(index(c, bra.0, bra.1, bra.2), index(c, ket.0, ket.1, ket.2))
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|rho - rho^dagger|` entry.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    pub fn to_matrix(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.to_matrix().symmetric_eigen();
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            let v = self.data[i * d + i];
            self.data[i * d + i] = C64::new(v.re, 0.0);
            for j in (i + 1)..d {
                let avg = 0.5 * (self.data[i * d + j] + self.data[j * d + i].conj());
                self.data[i * d + j] = avg;
                self.data[j * d + i] = avg.conj();
            }
        }
    }
}

fn check_size(cutoff: Cutoff) -> Result<()> {
    let size = cutoff.blocks();
    if size > MAX_FIELD_STATES {
        return Err(Error::OracleTooLarge {
            size,
            limit: MAX_FIELD_STATES,
        });
    }
    Ok(())
}

/// Basis index of `|atom, n1, n2>`; `excited` selects `+`.
pub fn index(cutoff: &Cutoff, excited: bool, n1: usize, n2: usize) -> usize {
    let atom = if excited { 0 } else { 1 };
    (atom * (cutoff.n1 + 1) + n1) * (cutoff.n2 + 1) + n2
}

fn labels(cutoff: &Cutoff) -> Vec<(bool, usize, usize)> {
    let mut out = Vec::with_capacity(2 * cutoff.blocks());
    for excited in [true, false] {
        for n1 in 0..=cutoff.n1 {
            for n2 in 0..=cutoff.n2 {
                out.push((excited, n1, n2));
            }
        }
    }
    out
}

/// Lab-frame Hamiltonian `omega0 Rz + omega1 N1 + omega2 N2 + g (a1 a2 R+ + h.c.)`.
pub fn build_hamiltonian(p: &ModelParams, cutoff: Cutoff) -> Result<DMatrix<C64>> {
    check_size(cutoff)?;
    Ok(hamiltonian_matrix(p, cutoff, p.omega0(), p.omega1, p.omega2))
}

/// Rotating-frame Hamiltonian `delta Rz + g (a1 a2 R+ + h.c.)`.
pub fn build_rotating_hamiltonian(p: &ModelParams, cutoff: Cutoff) -> Result<DMatrix<C64>> {
    check_size(cutoff)?;
    Ok(hamiltonian_matrix(p, cutoff, p.delta, 0.0, 0.0))
}

fn hamiltonian_matrix(p: &ModelParams, cutoff: Cutoff, w0: f64, w1: f64, w2: f64) -> DMatrix<C64> {
    let lab = labels(&cutoff);
    let dim = lab.len();
    let mut h = DMatrix::from_element(dim, dim, C64::new(0.0, 0.0));
    for (i, &(e, n1, n2)) in lab.iter().enumerate() {
        let rz = if e { 0.5 } else { -0.5 };
        h[(i, i)] = C64::new(w0 * rz + w1 * n1 as f64 + w2 * n2 as f64, 0.0);
        if e && cutoff.contains(n1 + 1, n2 + 1) {
            let j = index(&cutoff, false, n1 + 1, n2 + 1);
            let c = p.g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
            h[(i, j)] = C64::new(c, 0.0);
            h[(j, i)] = C64::new(c, 0.0);
        }
    }
    h
}

/// Precomputed sparse structure of the rotating-frame Liouvillian.
struct Liouvillian {
    dim: usize,
    kappa: f64,
    energy: Vec<f64>,
    partner: Vec<usize>,
    coupling: Vec<f64>,
    up1: Vec<usize>,
    amp1: Vec<f64>,
    up2: Vec<usize>,
    amp2: Vec<f64>,
    photons: Vec<f64>,
}

impl Liouvillian {
    fn new(p: &ModelParams, cutoff: Cutoff) -> Self {
        let lab = labels(&cutoff);
        let dim = lab.len();
        let mut l = Liouvillian {
            dim,
            kappa: p.kappa,
            energy: vec![0.0; dim],
            partner: vec![NONE; dim],
            coupling: vec![0.0; dim],
            up1: vec![NONE; dim],
            amp1: vec![0.0; dim],
            up2: vec![NONE; dim],
            amp2: vec![0.0; dim],
            photons: vec![0.0; dim],
        };
        for (i, &(e, n1, n2)) in lab.iter().enumerate() {
            l.energy[i] = if e { 0.5 * p.delta } else { -0.5 * p.delta };
            l.photons[i] = (n1 + n2) as f64;
            if e && cutoff.contains(n1 + 1, n2 + 1) {
                let j = index(&cutoff, false, n1 + 1, n2 + 1);
                let c = p.g * (((n1 + 1) * (n2 + 1)) as f64).sqrt();
                l.partner[i] = j;
                l.coupling[i] = c;
                l.partner[j] = i;
                l.coupling[j] = c;
            }
            if n1 < cutoff.n1 {
                l.up1[i] = index(&cutoff, e, n1 + 1, n2);
                l.amp1[i] = ((n1 + 1) as f64).sqrt();
            }
            if n2 < cutoff.n2 {
                l.up2[i] = index(&cutoff, e, n1, n2 + 1);
                l.amp2[i] = ((n2 + 1) as f64).sqrt();
            }
        }
        l
    }

    /// `out = L[rho]`, filling the upper triangle and mirroring it.
    fn apply(&self, rho: &[C64], out: &mut [C64]) {
        let d = self.dim;
        let k = self.kappa;
        let minus_i = C64::new(0.0, -1.0);
        for i in 0..d {
            let (ei, pi, ci) = (self.energy[i], self.partner[i], self.coupling[i]);
            let (u1i, a1i, u2i, a2i) = (self.up1[i], self.amp1[i], self.up2[i], self.amp2[i]);
            let ni = self.photons[i];
            let row = &rho[i * d..(i + 1) * d];
            let prow = if pi != NONE { Some(&rho[pi * d..(pi + 1) * d]) } else { None };
            let u1row = if u1i != NONE { Some(&rho[u1i * d..(u1i + 1) * d]) } else { None };
            let u2row = if u2i != NONE { Some(&rho[u2i * d..(u2i + 1) * d]) } else { None };
            for j in i..d {
                let r = row[j];
                // [H, rho]_ij
                let mut comm = r * (ei - self.energy[j]);
                if let Some(pr) = prow {
                    comm += pr[j] * ci;
                }
                let pj = self.partner[j];
                if pj != NONE {
                    comm -= row[pj] * self.coupling[j];
                }
                let mut v = minus_i * comm;
                if k != 0.0 {
                    let mut jump = C64::new(0.0, 0.0);
                    if let Some(ur) = u1row {
                        let uj = self.up1[j];
                        if uj != NONE {
                            jump += ur[uj] * (a1i * self.amp1[j]);
                        }
                    }
                    if let Some(ur) = u2row {
                        let uj = self.up2[j];
                        if uj != NONE {
                            jump += ur[uj] * (a2i * self.amp2[j]);
                        }
                    }
                    v += k * (2.0 * jump - r * (ni + self.photons[j]));
                }
                out[i * d + j] = v;
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                out[j * d + i] = out[i * d + j].conj();
            }
        }
    }
}

/// Largest dressed Rabi frequency fully represented in the cutoff, a proxy
/// for `||H||` in the rotating frame.
pub fn hamiltonian_scale(p: &ModelParams, cutoff: Cutoff) -> f64 {
    let mut s = 0.5 * p.delta.abs();
    if cutoff.n1 >= 1 && cutoff.n2 >= 1 {
        s = s.max(crate::dressed_basis::rabi_frequency(cutoff.n1 - 1, cutoff.n2 - 1, p));
    }
    s.max(p.kappa * (cutoff.n1 + cutoff.n2) as f64)
}

/// Step satisfying the advisory `dt * ||H|| <= 0.05`.
pub fn advisory_dt(p: &ModelParams, cutoff: Cutoff) -> f64 {
    ADVISORY_DT_NORM / hamiltonian_scale(p, cutoff).max(1e-12)
}

struct Rk4 {
    k1: Vec<C64>,
    k2: Vec<C64>,
    k3: Vec<C64>,
    k4: Vec<C64>,
    tmp: Vec<C64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        let z = vec![C64::new(0.0, 0.0); n];
        Rk4 {
            k1: z.clone(),
            k2: z.clone(),
            k3: z.clone(),
            k4: z.clone(),
            tmp: z,
        }
    }

    fn step(&mut self, l: &Liouvillian, y: &mut [C64], h: f64) {
        l.apply(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k1[i] * (0.5 * h);
        }
        l.apply(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k2[i] * (0.5 * h);
        }
        l.apply(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + self.k3[i] * h;
        }
        l.apply(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += (self.k1[i] + (self.k2[i] + self.k3[i]) * 2.0 + self.k4[i]) * (h / 6.0);
        }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty()
        || t_grid.iter().any(|t| !t.is_finite() || *t < 0.0)
        || t_grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidParams(
            "time grid must be non-empty, non-negative and strictly ascending".into(),
        ));
    }
    Ok(())
}

/// Integrate from `t = 0`, calling `visit(i, rho)` at every grid time.
///
/// Steps are at most `dt` and land exactly on grid points.
pub fn integrate_with<F>(rho0: &BareDensity, p: &ModelParams, t_grid: &[f64], dt: f64, mut visit: F) -> Result<()>
where
    F: FnMut(usize, &BareDensity) -> Result<()>,
{
    p.validate()?;
    check_grid(t_grid)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParams(format!("dt must be > 0, got {dt}")));
    }
    let cutoff = rho0.cutoff;
    if dt > advisory_dt(p, cutoff) {
        log::debug!("oracle dt = {dt} exceeds the advisory {:.3e}", advisory_dt(p, cutoff));
    }
    let l = Liouvillian::new(p, cutoff);
    let mut rho = rho0.clone();
    let tr0 = rho.trace().re;
    let mut rk = Rk4::new(rho.data.len());
    let mut t = 0.0;
    for (i, &target) in t_grid.iter().enumerate() {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for _ in 0..steps {
                rk.step(&l, &mut rho.data, h);
                rho.symmetrize();
            }
            let drift = (rho.trace().re - tr0).abs();
            if drift > TRACE_DRIFT_TOL {
                return Err(Error::TraceDrift {
                    drift,
                    suggested_dt: 0.5 * h,
                });
            }
        }
        t = target;
        visit(i, &rho)?;
    }
    Ok(())
}

/// Densities at every grid time.
pub fn integrate(rho0: &BareDensity, p: &ModelParams, t_grid: &[f64], dt: f64) -> Result<Vec<BareDensity>> {
    let mut out = Vec::with_capacity(t_grid.len());
    integrate_with(rho0, p, t_grid, dt, |_, r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Largest element-wise change between runs at `dt` and `dt/2`.
pub fn step_halving_change(rho0: &BareDensity, p: &ModelParams, t_grid: &[f64], dt: f64) -> Result<f64> {
    let coarse = integrate(rho0, p, t_grid, dt)?;
    let mut worst: f64 = 0.0;
    integrate_with(rho0, p, t_grid, 0.5 * dt, |i, r| {
        for (a, b) in coarse[i].data.iter().zip(&r.data) {
            worst = worst.max((a - b).norm());
        }
        Ok(())
    })?;
    Ok(worst)
}

/// Operators whose expectation the oracle evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BareObservable {
    N1,
    N2,
    Re,
    Rg,
    A1,
    A1Sq,
    A2,
    A2Sq,
    SigmaMinus,
    Sigma3,
    A1DagSqA1Sq,
    A2DagSqA2Sq,
}

impl std::str::FromStr for BareObservable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use BareObservable::*;
        Ok(match s {
            "N1" => N1,
            "N2" => N2,
            "Re" => Re,
            "Rg" => Rg,
            "a1" => A1,
            "a1^2" => A1Sq,
            "a2" => A2,
            "a2^2" => A2Sq,
            "sigma-" => SigmaMinus,
            "sigma3" => Sigma3,
            "a1+^2a1^2" => A1DagSqA1Sq,
            "a2+^2a2^2" => A2DagSqA2Sq,
            other => return Err(Error::UnknownObservable(other.into())),
        })
    }
}

/// `Tr(rho O)` in the rotating frame.
pub fn expectation(rho: &BareDensity, obs: BareObservable) -> C64 {
    use BareObservable::*;
    let c = rho.cutoff;
    let mut acc = C64::new(0.0, 0.0);
    for (i, &(e, n1, n2)) in labels(&c).iter().enumerate() {
        let diag = rho.get(i, i);
        let (f1, f2) = (n1 as f64, n2 as f64);
        match obs {
            N1 => acc += diag * f1,
            N2 => acc += diag * f2,
            Re if e => acc += diag,
            Rg if !e => acc += diag,
            Sigma3 => acc += diag * if e { 1.0 } else { -1.0 },
            A1DagSqA1Sq => acc += diag * (f1 * (f1 - 1.0)),
            A2DagSqA2Sq => acc += diag * (f2 * (f2 - 1.0)),
            // Tr(rho a) = sum <n+1|rho|n> sqrt(n+1) over the mode index.
            A1 if n1 < c.n1 => acc += rho.get(index(&c, e, n1 + 1, n2), i) * (f1 + 1.0).sqrt(),
            A2 if n2 < c.n2 => acc += rho.get(index(&c, e, n1, n2 + 1), i) * (f2 + 1.0).sqrt(),
            A1Sq if n1 + 2 <= c.n1 => {
                acc += rho.get(index(&c, e, n1 + 2, n2), i) * ((f1 + 1.0) * (f1 + 2.0)).sqrt()
            }
            A2Sq if n2 + 2 <= c.n2 => {
                acc += rho.get(index(&c, e, n1, n2 + 2), i) * ((f2 + 1.0) * (f2 + 2.0)).sqrt()
            }
            // R- = |-><+|: Tr(rho R-) = sum <+,n|rho|-,n>.
            SigmaMinus if e => acc += rho.get(i, index(&c, false, n1, n2)),
            _ => {}
        }
    }
    acc
}

/// Slowly varying dipole `<R+> e^{-i omega0 t}` from a rotating-frame density.
pub fn slow_dipole(rho: &BareDensity, p: &ModelParams, t: f64) -> C64 {
    let r_plus = expectation(rho, BareObservable::SigmaMinus).conj();
    r_plus * C64::from_polar(1.0, -p.delta * t)
}

/// Named observable from a rotating-frame density; `None` where undefined.
pub fn observable_value(rho: &BareDensity, p: &ModelParams, t: f64, obs: Observable) -> Option<f64> {
    use BareObservable as B;
    let ex = |o: B| expectation(rho, o);
    let g2 = |n: B, f: B| {
        let n = ex(n).re;
        (n.abs() > MIN_PHOTON_NUMBER).then(|| (ex(f).re - n * n) / (n * n))
    };
    let squeeze = |a: B, a2: B, n: B| {
        let a = ex(a);
        2.0 * ex(a2).re + 2.0 * ex(n).re - 4.0 * a.re * a.re + 1.0
    };
    let dipole_factor = |absorptive: bool| {
        let s3 = ex(B::Sigma3).re;
        if s3.abs() <= MIN_INVERSION {
            return None;
        }
        let s = slow_dipole(rho, p, t);
        let c = if absorptive { s.im } else { s.re };
        Some((1.0 - 4.0 * c * c) / s3.abs())
    };
    match obs {
        Observable::N1 => Some(ex(B::N1).re),
        Observable::N2 => Some(ex(B::N2).re),
        Observable::Re => Some(ex(B::Re).re),
        Observable::Rg => Some(ex(B::Rg).re),
        Observable::Sigma3 => Some(ex(B::Sigma3).re),
        Observable::G2_1 => g2(B::N1, B::A1DagSqA1Sq),
        Observable::G2_2 => g2(B::N2, B::A2DagSqA2Sq),
        Observable::S1 => Some(squeeze(B::A1, B::A1Sq, B::N1)),
        Observable::S2 => Some(squeeze(B::A2, B::A2Sq, B::N2)),
        Observable::F1 => dipole_factor(false),
        Observable::F2 => dipole_factor(true),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn grid(tmax: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| tmax * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn hamiltonian_structure() {
        let mut p = ModelParams::new(0.7, 0.0).unwrap();
        let cut = Cutoff::new(3, 2);
        let h = build_hamiltonian(&p, cut).unwrap();
        assert_eq!((&h - h.adjoint()).norm(), 0.0);

        // Coupling only between |+,n1,n2> and |-,n1+1,n2+1>.
        let lab = labels(&cut);
        for i in 0..lab.len() {
            for j in 0..lab.len() {
                if i != j && h[(i, j)].norm() > 0.0 {
                    let (a, b) = (lab[i], lab[j]);
                    let (up, dn) = if a.0 { (a, b) } else { (b, a) };
                    assert!(up.0 && !dn.0);
                    assert_eq!((up.1 + 1, up.2 + 1), (dn.1, dn.2));
                }
            }
        }

        // Block splitting equals twice the Rabi frequency.
        let i = index(&cut, true, 0, 0);
        let j = index(&cut, false, 1, 1);
        let (a, b, c) = (h[(i, i)].re, h[(j, j)].re, h[(i, j)].re);
        let split = ((a - b).powi(2) + 4.0 * c * c).sqrt();
        assert_abs_diff_eq!(split, 2.0 * crate::dressed_basis::rabi_frequency(0, 0, &p), epsilon = 1e-12);

        p.g = 1e-300;
        let h0 = build_hamiltonian(&p, cut).unwrap();
        for (k, &(e, n1, n2)) in lab.iter().enumerate() {
            let rz = if e { 0.5 } else { -0.5 };
            let free = p.omega0() * rz + p.omega1 * n1 as f64 + p.omega2 * n2 as f64;
            assert_abs_diff_eq!(h0[(k, k)].re, free, epsilon = 1e-12);
        }
    }

    #[test]
    fn lossless_rabi_formula() {
        let cut = Cutoff::new(3, 3);
        for (n1, n2, delta) in [(0, 0, 0.0), (1, 2, 2.0)] {
            let p = ModelParams::new(delta, 0.0).unwrap();
            let rho0 = BareDensity::fock_excited(n1, n2, cut).unwrap();
            let ts = grid(5.0, 11);
            let w = crate::dressed_basis::rabi_frequency(n1, n2, &p);
            let amp = ((n1 + 1) * (n2 + 1)) as f64 / (w * w);
            for (t, rho) in ts.iter().zip(integrate(&rho0, &p, &ts, 1e-3).unwrap()) {
                let pe = expectation(&rho, BareObservable::Re).re;
                assert_abs_diff_eq!(pe, 1.0 - amp * (w * t).sin().powi(2), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn free_field_decays() {
        let mut p = ModelParams::new(0.0, 0.05).unwrap();
        p.g = 1e-300;
        let cut = Cutoff::new(16, 3);
        let rho0 = BareDensity::coherent_excited(2.0, 0.0, cut).unwrap();
        let ts = grid(10.0, 6);
        for (t, rho) in ts.iter().zip(integrate(&rho0, &p, &ts, 0.01).unwrap()) {
            let n = expectation(&rho, BareObservable::N1).re;
            assert_abs_diff_eq!(n, 2.0 * (-2.0 * 0.05 * t).exp(), epsilon = 1e-6);
            let a = expectation(&rho, BareObservable::A1);
            assert_abs_diff_eq!(a.re, 2f64.sqrt() * (-0.05 * t).exp(), epsilon = 1e-6);
        }
    }

    #[test]
    fn semigroup_property() {
        let p = ModelParams::new(0.5, 0.03).unwrap();
        let cut = Cutoff::new(6, 6);
        let rho0 = BareDensity::coherent_excited(1.0, 0.5, cut).unwrap();
        let direct = integrate(&rho0, &p, &[0.0, 3.0], 1e-3).unwrap().pop().unwrap();
        let half = integrate(&rho0, &p, &[0.0, 1.2], 1e-3).unwrap().pop().unwrap();
        let rest = integrate(&half, &p, &[0.0, 1.8], 1e-3).unwrap().pop().unwrap();
        for (a, b) in direct.data.iter().zip(&rest.data) {
            assert!((a - b).norm() < 1e-10);
        }
        assert!(direct.hermiticity_defect() < 1e-12);
        assert!(direct.min_eigenvalue() > -1e-7);
        assert_abs_diff_eq!(direct.trace().re, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn lossless_energy_is_conserved() {
        let p = ModelParams::new(1.0, 0.0).unwrap();
        let cut = Cutoff::new(6, 6);
        let h = build_rotating_hamiltonian(&p, cut).unwrap();
        let rho0 = BareDensity::coherent_excited(1.0, 1.0, cut).unwrap();
        let energy = |r: &BareDensity| (r.to_matrix() * &h).trace().re;
        let e0 = energy(&rho0);
        for rho in integrate(&rho0, &p, &grid(4.0, 5), 2e-3).unwrap() {
            assert_abs_diff_eq!(energy(&rho), e0, epsilon = 1e-8);
        }
    }

    #[test]
    fn expectation_examples() {
        let cut = Cutoff::new(16, 16);
        let rho = BareDensity::fock_excited(0, 0, cut).unwrap();
        assert_abs_diff_eq!(expectation(&rho, BareObservable::Re).re, 1.0);
        assert_abs_diff_eq!(expectation(&rho, BareObservable::N1).re, 0.0);
        let rho = BareDensity::coherent_excited(2.0, 1.0, cut).unwrap();
        assert_abs_diff_eq!(expectation(&rho, BareObservable::N1).re, 2.0, epsilon = 1e-6);
        let re = expectation(&rho, BareObservable::Re).re;
        let rg = expectation(&rho, BareObservable::Rg).re;
        assert_abs_diff_eq!(re + rg, 1.0, epsilon = 1e-14);
        assert!("bogus".parse::<BareObservable>().is_err());
        assert_eq!("sigma-".parse::<BareObservable>().unwrap(), BareObservable::SigmaMinus);
    }

    #[test]
    fn cost_guard() {
        assert!(matches!(
            BareDensity::zeros(Cutoff::new(20, 20)),
            Err(Error::OracleTooLarge { .. })
        ));
        assert!(BareDensity::zeros(Cutoff::new(19, 19)).is_ok());
        let p = ModelParams::new(0.0, 0.0).unwrap();
        assert!(build_hamiltonian(&p, Cutoff::new(40, 40)).is_err());
    }

    #[test]
    fn step_halving_converges() {
        let p = ModelParams::new(0.0, 0.02).unwrap();
        let cut = Cutoff::new(5, 5);
        let rho0 = BareDensity::coherent_excited(1.0, 1.0, cut).unwrap();
        let change = step_halving_change(&rho0, &p, &grid(2.0, 3), 0.5 * advisory_dt(&p, cut)).unwrap();
        assert!(change < 1e-8, "{change}");
    }
}
