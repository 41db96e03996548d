//! Secular dressed-state evolution.
//!
//! Populations obey a linear cascade: a photon leaving mode 1 (mode 2) moves
//! probability from block `(n1+1, n2)` (`(n1, n2+1)`) into block `(n1, n2)`,
//! and edge blocks leak into the dark states, which in turn cascade to
//! `|-,0,0>`. The transition rate between dressed states is
//! `2k |<Psi_target|a_i|Psi_source>|^2`; the outflow of `|Psi±_{n1n2}>` is
//! `2k (n1 + n2 + (g∓)^2)`, i.e. `2k` times its mean photon number.
//!
//! Coherences decay at the mean of the two outflow rates. For a same-block
//! `+/-` coherence that is `2k (n1 + n2 + 1)` exactly. Feeding of coherences
//! from higher blocks is controlled by [`CoherenceFeeding`]. A jump that keeps
//! both branch labels refills a coherence from the matching pair one photon
//! up at a phase mismatch set by differences of neighbouring Rabi
//! frequencies, which is slow next to `g`. So does a jump that flips both
//! labels of a cross-block coherence within one branch. Every other jump
//! carries a mismatch of order `2 Omega` and is dropped.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::density::{self, CoherenceOffset, Cutoff, DarkManifold, DressedDensity, Spectrum};
use crate::dressed_basis::{Branch, DarkIndex, DarkSide, DressedIndex, ModelParams};
use crate::error::{Error, Result};

/// Largest change tolerated between the `dt` and `dt/2` solutions.
pub const STEP_HALVING_TOL: f64 = 1e-8;
/// Upper bound on `kappa * dt`.
pub const MAX_KAPPA_DT: f64 = 1e-3;
/// Upper bound on `max_rate * dt`.
pub const MAX_RATE_DT: f64 = 0.5;
/// Upper bound on `|phase mismatch| * dt` for fed coherences.
pub const MAX_PHASE_DT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StateLabel {
    Dressed(DressedIndex),
    Dark(DarkIndex),
}

impl StateLabel {
    /// `E1 + E2` with `E_i = n_i + [atom excited]`; every photon jump lowers it
    /// by exactly one.
    pub fn excitation_level(&self) -> usize {
        match self {
            StateLabel::Dressed(d) => d.n1 + d.n2 + 2,
            StateLabel::Dark(d) => {
                let (a, b) = d.photons();
                a + b
            }
        }
    }
}

/// Sparse generator of the population cascade.
///
/// State `j`'s population leaves at `decay[j]`; row `i` lists the sources
/// feeding state `i` with their (non-negative) coefficients.
#[derive(Clone, Debug)]
pub struct RateGenerator {
    spectrum: Arc<Spectrum>,
    manifold: DarkManifold,
    labels: Vec<StateLabel>,
    decay: Vec<f64>,
    row_start: Vec<usize>,
    sources: Vec<usize>,
    coeffs: Vec<f64>,
}

fn dressed_slot(cut: &Cutoff, idx: DressedIndex) -> usize {
    2 * cut.block_slot(idx.n1, idx.n2) + idx.branch.slot()
}

fn dark_offset(cut: &Cutoff) -> usize {
    2 * cut.blocks()
}

/// `<Psi^a_n|a_mode|Psi^b_{n+e_mode}>`.
fn lowering_amplitude(
    sp: &Spectrum,
    n1: usize,
    n2: usize,
    a: Branch,
    b: Branch,
    mode: usize,
) -> f64 {
    let (s1, s2, n_mode) = if mode == 1 {
        (n1 + 1, n2, n1)
    } else {
        (n1, n2 + 1, n2)
    };
    let (te, tg) = sp.block(n1, n2).amplitudes(a);
    let (se, sg) = sp.block(s1, s2).amplitudes(b);
    te * se * ((n_mode + 1) as f64).sqrt() + tg * sg * ((n_mode + 2) as f64).sqrt()
}

fn lowering_strength(sp: &Spectrum, n1: usize, n2: usize, a: Branch, b: Branch, mode: usize) -> f64 {
    lowering_amplitude(sp, n1, n2, a, b, mode).powi(2)
}

/// Build the population generator for `params` truncated at `cutoff`.
pub fn build_generator(
    params: &ModelParams,
    cutoff: Cutoff,
    manifold: DarkManifold,
) -> Result<RateGenerator> {
    build_generator_for(Arc::new(Spectrum::new(*params, cutoff)), manifold)
}

pub(crate) fn build_generator_for(
    spectrum: Arc<Spectrum>,
    manifold: DarkManifold,
) -> Result<RateGenerator> {
    let cut = spectrum.cutoff;
    let p = spectrum.params;
    p.validate()?;
    if cut.n1 < 1 || cut.n2 < 1 {
        return Err(Error::InvalidCutoff {
            n1: cut.n1,
            n2: cut.n2,
            reason: "both photon cutoffs must be >= 1".into(),
        });
    }
    let nmax = cut.n1.max(cut.n2) as f64;
    if 2.0 * p.kappa * nmax * nmax >= p.g * (nmax + 1.0).sqrt() {
        log::warn!(
            "secular approximation strained: 2k n^2 = {:.3} >= g sqrt(n+1) = {:.3} at n = {}",
            2.0 * p.kappa * nmax * nmax,
            p.g * (nmax + 1.0).sqrt(),
            nmax
        );
    }
    let k2 = 2.0 * p.kappa;
    let keep_dark = |d: &DarkIndex| manifold == DarkManifold::Full || d.m <= 1;

    let mut labels = Vec::new();
    for (n1, n2) in cut.iter() {
        for b in Branch::BOTH {
            labels.push(StateLabel::Dressed(DressedIndex::new(n1, n2, b)));
        }
    }
    labels.extend(density::dark_states(&cut).into_iter().map(StateLabel::Dark));
    let n = labels.len();

    let mut decay = vec![0.0; n];
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let off = dark_offset(&cut);
    let dark_index = |d: DarkIndex| off + density::dark_slot(&cut, d).expect("dark state inside cutoff");

    for (i, label) in labels.iter().enumerate() {
        match *label {
            StateLabel::Dressed(idx) => {
                let b = spectrum.block(idx.n1, idx.n2);
                decay[i] = k2 * b.mean_photons(idx.n1, idx.n2, idx.branch);
                for (mode, (s1, s2)) in [(1, (idx.n1 + 1, idx.n2)), (2, (idx.n1, idx.n2 + 1))] {
                    if !cut.contains(s1, s2) {
                        continue;
                    }
                    for sb in Branch::BOTH {
                        let strength = lowering_strength(&spectrum, idx.n1, idx.n2, idx.branch, sb, mode);
                        let src = dressed_slot(&cut, DressedIndex::new(s1, s2, sb));
                        rows[i].push((src, k2 * strength));
                    }
                }
            }
            StateLabel::Dark(d) => {
                if !keep_dark(&d) {
                    continue;
                }
                decay[i] = k2 * d.m as f64;
                match d.side {
                    DarkSide::Origin => {
                        for up in [DarkIndex::mode1(1), DarkIndex::mode2(1)] {
                            rows[i].push((dark_index(up), k2));
                        }
                    }
                    DarkSide::Mode1 | DarkSide::Mode2 => {
                        // Edge block whose ground component loses its last
                        // photon of the other mode.
                        let (e1, e2) = if d.side == DarkSide::Mode1 {
                            (d.m - 1, 0)
                        } else {
                            (0, d.m - 1)
                        };
                        if cut.contains(e1, e2) {
                            let blk = spectrum.block(e1, e2);
                            for sb in Branch::BOTH {
                                let cg = blk.amplitudes(sb).1;
                                let src = dressed_slot(&cut, DressedIndex::new(e1, e2, sb));
                                rows[i].push((src, k2 * cg * cg));
                            }
                        }
                        let above = DarkIndex { side: d.side, m: d.m + 1 };
                        if let Some(s) = density::dark_slot(&cut, above) {
                            if keep_dark(&above) {
                                rows[i].push((off + s, k2 * (d.m + 1) as f64));
                            }
                        }
                    }
                }
            }
        }
    }

    let mut row_start = Vec::with_capacity(n + 1);
    let mut sources = Vec::new();
    let mut coeffs = Vec::new();
    row_start.push(0);
    for row in rows {
        for (s, c) in row {
            sources.push(s);
            coeffs.push(c);
        }
        row_start.push(sources.len());
    }
    Ok(RateGenerator {
        spectrum,
        manifold,
        labels,
        decay,
        row_start,
        sources,
        coeffs,
    })
}

impl RateGenerator {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[StateLabel] {
        &self.labels
    }

    pub fn manifold(&self) -> DarkManifold {
        self.manifold
    }

    pub fn cutoff(&self) -> Cutoff {
        self.spectrum.cutoff
    }

    /// Matrix entry `G[target][source]`.
    pub fn entry(&self, target: usize, source: usize) -> f64 {
        let mut v = if target == source { -self.decay[target] } else { 0.0 };
        for k in self.row_start[target]..self.row_start[target + 1] {
            if self.sources[k] == source {
                v += self.coeffs[k];
            }
        }
        v
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut m = vec![vec![0.0; n]; n];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = -self.decay[i];
            for k in self.row_start[i]..self.row_start[i + 1] {
                row[self.sources[k]] += self.coeffs[k];
            }
        }
        m
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums: Vec<f64> = self.decay.iter().map(|d| -d).collect();
        for i in 0..self.len() {
            for k in self.row_start[i]..self.row_start[i + 1] {
                sums[self.sources[k]] += self.coeffs[k];
            }
        }
        sums
    }

    pub fn is_zero(&self) -> bool {
        self.decay.iter().all(|&d| d == 0.0) && self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_rate(&self) -> f64 {
        self.decay.iter().copied().fold(0.0, f64::max)
    }

    /// Gather populations of `w` in generator order.
    pub fn pack(&self, w: &DressedDensity) -> Vec<f64> {
        let mut y = Vec::with_capacity(self.len());
        for p in w.populations_raw() {
            y.extend_from_slice(p);
        }
        y.extend_from_slice(w.dark_raw());
        y
    }

    /// Scatter a generator-ordered population vector into `w`.
    pub fn unpack(&self, y: &[f64], w: &mut DressedDensity) {
        let off = dark_offset(&self.cutoff());
        for (slot, p) in w.populations_raw_mut().iter_mut().enumerate() {
            *p = [y[2 * slot], y[2 * slot + 1]];
        }
        w.dark_raw_mut().copy_from_slice(&y[off..]);
    }

    fn derivative(&self, y: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = -self.decay[i] * y[i];
            for k in self.row_start[i]..self.row_start[i + 1] {
                acc += self.coeffs[k] * y[self.sources[k]];
            }
            *o = acc;
        }
    }

    /// Largest fixed step honoring both step bounds.
    pub fn max_step(&self) -> f64 {
        let k = self.spectrum.params.kappa;
        let mut dt = f64::INFINITY;
        if k > 0.0 {
            dt = dt.min(MAX_KAPPA_DT / k);
        }
        let r = self.max_rate();
        if r > 0.0 {
            dt = dt.min(MAX_RATE_DT / r);
        }
        dt
    }
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, gen: &RateGenerator, y: &mut [f64], h: f64) {
        gen.derivative(y, &mut self.k1);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        gen.derivative(&self.tmp, &mut self.k2);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        gen.derivative(&self.tmp, &mut self.k3);
        for i in 0..y.len() {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        gen.derivative(&self.tmp, &mut self.k4);
        for i in 0..y.len() {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::InvalidParams("empty time grid".into()));
    }
    if t_grid[0] != 0.0 {
        return Err(Error::InvalidParams("time grid must start at 0".into()));
    }
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParams("time grid must be finite and strictly ascending".into()));
    }
    Ok(())
}

/// Propagate populations over `t_grid`, calling `visit(i, y)` at every grid
/// time with the generator-ordered population vector.
///
/// Runs a `dt` and a `dt/2` integration side by side and fails if they ever
/// differ by more than [`STEP_HALVING_TOL`].
pub fn propagate_populations<F>(y0: &[f64], gen: &RateGenerator, t_grid: &[f64], visit: F) -> Result<()>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    propagate_populations_with_step(y0, gen, t_grid, gen.max_step(), visit)
}

fn propagate_populations_with_step<F>(
    y0: &[f64],
    gen: &RateGenerator,
    t_grid: &[f64],
    dt_max: f64,
    mut visit: F,
) -> Result<()>
where
    F: FnMut(usize, &[f64]) -> Result<()>,
{
    check_grid(t_grid)?;
    let mut fine = y0.to_vec();
    visit(0, &fine)?;
    if gen.is_zero() {
        for i in 1..t_grid.len() {
            visit(i, &fine)?;
        }
        return Ok(());
    }
    let mut coarse = y0.to_vec();
    let mut s_fine = Rk4Scratch::new(y0.len());
    let mut s_coarse = Rk4Scratch::new(y0.len());
    for i in 1..t_grid.len() {
        let span = t_grid[i] - t_grid[i - 1];
        let steps = (span / dt_max).ceil().max(1.0) as usize;
        let h = span / steps as f64;
        for _ in 0..steps {
            s_coarse.step(gen, &mut coarse, h);
            s_fine.step(gen, &mut fine, 0.5 * h);
            s_fine.step(gen, &mut fine, 0.5 * h);
        }
        let change = coarse
            .iter()
            .zip(&fine)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if change > STEP_HALVING_TOL {
            return Err(Error::StepSize {
                time: t_grid[i],
                change,
                suggested_dt: 0.25 * h,
            });
        }
        visit(i, &fine)?;
    }
    Ok(())
}

/// Populations (generator order) at every grid time.
pub fn evolve_populations(
    w0: &DressedDensity,
    gen: &RateGenerator,
    t_grid: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(t_grid.len());
    propagate_populations(&gen.pack(w0), gen, t_grid, |_, y| {
        out.push(y.to_vec());
        Ok(())
    })?;
    Ok(out)
}

/// Closed-form decay of the coherence `<m|W|n>` between dressed states.
pub fn offdiag_value(element0: C64, m: DressedIndex, n: DressedIndex, p: &ModelParams, t: f64) -> C64 {
    debug_assert!(m != n, "populations are not coherences");
    element0 * (-coherence_rate(m, n, p) * t).exp()
}

/// Decay constant of `<m|W|n>`: `k (<N>_m + <N>_n)`.
pub fn coherence_rate(m: DressedIndex, n: DressedIndex, p: &ModelParams) -> f64 {
    let bm = crate::dressed_basis::BlockConstants::new(m.n1, m.n2, p);
    let bn = crate::dressed_basis::BlockConstants::new(n.n1, n.n2, p);
    p.kappa * (bm.mean_photons(m.n1, m.n2, m.branch) + bn.mean_photons(n.n1, n.n2, n.branch))
}

/// Overwrite the coherences of `w` with those of `w0` decayed to time `t`.
fn decay_coherences(w0: &DressedDensity, w: &mut DressedDensity, t: f64) {
    let sp = w0.spectrum().clone();
    let cut = sp.cutoff;
    let k = sp.params.kappa;
    let coh = w.block_coh_raw_mut();
    for (n1, n2) in cut.iter() {
        let slot = cut.block_slot(n1, n2);
        coh[slot] = w0.block_coherence(n1, n2) * (-2.0 * k * t * (n1 + n2 + 1) as f64).exp();
    }
    for off in CoherenceOffset::ALL {
        let (d1, d2) = off.shift();
        let dst = w.cross_raw_mut(off);
        for (n1, n2) in cut.iter() {
            let (u1, u2) = (n1 + d1, n2 + d2);
            if !cut.contains(u1, u2) {
                continue;
            }
            let lo = sp.block(n1, n2);
            let up = sp.block(u1, u2);
            let slot = cut.block_slot(n1, n2);
            for a in Branch::BOTH {
                let na = up.mean_photons(u1, u2, a);
                for b in Branch::BOTH {
                    let nb = lo.mean_photons(n1, n2, b);
                    let v0 = w0.cross_coherence(off, n1, n2, a, b);
                    dst[slot][a.slot()][b.slot()] = v0 * (-k * t * (na + nb)).exp();
                }
            }
        }
    }
}

/// Treatment of coherence feeding from higher blocks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CoherenceFeeding {
    /// Every coherence decays in closed form.
    None,
    /// Coherences are also refilled from the pairs one photon up whose phase
    /// mismatch is slow, with that mismatch kept exactly.
    #[default]
    NearResonant,
}

impl std::str::FromStr for CoherenceFeeding {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CoherenceFeeding::None),
            "near-resonant" => Ok(CoherenceFeeding::NearResonant),
            other => Err(Error::InvalidParams(format!(
                "unknown coherence feeding '{other}' (expected none or near-resonant)"
            ))),
        }
    }
}

/// One fed coherence `<Psi^upper_{n+d}|W|Psi^lower_n>`; `offset: None` is the
/// same-block `+/-` coherence.
#[derive(Clone, Copy, Debug)]
struct FedEntry {
    offset: Option<CoherenceOffset>,
    n: (usize, usize),
    upper: Branch,
    lower: Branch,
}

impl FedEntry {
    fn shift(&self) -> (usize, usize) {
        self.offset.map_or((0, 0), CoherenceOffset::shift)
    }

    fn offset_slot(&self) -> usize {
        self.offset.map_or(0, |o| 1 + o as usize)
    }
}

/// Linear system for the fed coherences in the frame rotating with each
/// coherence's own frequency `w_i`:
/// `dz_i/dt = -decay_i z_i + e^{i w_i t} sum_j c_ij e^{-i w_j t} z_j`.
#[derive(Clone, Debug)]
struct FeedingGenerator {
    entries: Vec<FedEntry>,
    omega: Vec<f64>,
    decay: Vec<f64>,
    row_start: Vec<usize>,
    sources: Vec<u32>,
    coeffs: Vec<f64>,
    max_mismatch: f64,
}

impl FeedingGenerator {
    fn build(sp: &Spectrum) -> Self {
        let cut = sp.cutoff;
        let k = sp.params.kappa;
        let nb = cut.blocks();
        let pair = |a: Branch, b: Branch| 2 * a.slot() + b.slot();
        let mut index = vec![[[u32::MAX; 4]; 6]; nb];
        let mut entries = Vec::new();
        for (n1, n2) in cut.iter() {
            let e = FedEntry {
                offset: None,
                n: (n1, n2),
                upper: Branch::Plus,
                lower: Branch::Minus,
            };
            index[cut.block_slot(n1, n2)][0][pair(e.upper, e.lower)] = entries.len() as u32;
            entries.push(e);
        }
        for off in CoherenceOffset::ALL {
            let (d1, d2) = off.shift();
            for (n1, n2) in cut.iter() {
                if !cut.contains(n1 + d1, n2 + d2) {
                    continue;
                }
                for upper in Branch::BOTH {
                    for lower in Branch::BOTH {
                        let e = FedEntry {
                            offset: Some(off),
                            n: (n1, n2),
                            upper,
                            lower,
                        };
                        index[cut.block_slot(n1, n2)][e.offset_slot()][pair(upper, lower)] = entries.len() as u32;
                        entries.push(e);
                    }
                }
            }
        }
        let freq = |upper: Branch, lower: Branch, d: (usize, usize), n1: usize, n2: usize| {
            sp.block(n1 + d.0, n2 + d.1).energy(upper) - sp.block(n1, n2).energy(lower)
        };
        let omega = entries
            .iter()
            .map(|e| freq(e.upper, e.lower, e.shift(), e.n.0, e.n.1))
            .collect();
        let mut decay = Vec::with_capacity(entries.len());
        let mut row_start = vec![0];
        let mut sources = Vec::new();
        let mut coeffs = Vec::new();
        let mut max_mismatch: f64 = 0.0;
        for e in &entries {
            let (n1, n2) = e.n;
            let d = e.shift();
            let (u1, u2) = (n1 + d.0, n2 + d.1);
            decay.push(
                k * (sp.block(u1, u2).mean_photons(u1, u2, e.upper)
                    + sp.block(n1, n2).mean_photons(n1, n2, e.lower)),
            );
            // Source branch pairs whose phase mismatch is a difference of
            // neighbouring Rabi frequencies rather than a sum.
            let mut pairs = vec![(e.upper, e.lower)];
            if e.offset.is_some() && e.upper == e.lower {
                pairs.push((e.upper.flip(), e.lower.flip()));
            }
            for (mode, (s1, s2)) in [(1, (n1 + 1, n2)), (2, (n1, n2 + 1))] {
                if !cut.contains(s1 + d.0, s2 + d.1) {
                    continue;
                }
                for &(c, dd) in &pairs {
                    let coeff = 2.0
                        * k
                        * lowering_amplitude(sp, u1, u2, e.upper, c, mode)
                        * lowering_amplitude(sp, n1, n2, e.lower, dd, mode);
                    let mismatch = freq(e.upper, e.lower, d, n1, n2) - freq(c, dd, d, s1, s2);
                    max_mismatch = max_mismatch.max(mismatch.abs());
                    sources.push(index[cut.block_slot(s1, s2)][e.offset_slot()][pair(c, dd)]);
                    coeffs.push(coeff);
                }
            }
            row_start.push(sources.len());
        }
        FeedingGenerator {
            entries,
            omega,
            decay,
            row_start,
            sources,
            coeffs,
            max_mismatch,
        }
    }

    fn len(&self) -> usize {
        self.entries.len()
    }

    /// Largest fixed step honoring the damping, decay and phase bounds.
    fn max_step(&self, kappa: f64) -> f64 {
        let mut dt = f64::INFINITY;
        if kappa > 0.0 {
            dt = dt.min(MAX_KAPPA_DT / kappa);
        }
        let r = self.decay.iter().fold(0.0, |m: f64, &d| m.max(d));
        if r > 0.0 {
            dt = dt.min(MAX_RATE_DT / r);
        }
        if self.max_mismatch > 0.0 {
            dt = dt.min(MAX_PHASE_DT / self.max_mismatch);
        }
        dt
    }

    fn pack(&self, w: &DressedDensity) -> Vec<C64> {
        self.entries
            .iter()
            .map(|e| match e.offset {
                None => w.block_coherence(e.n.0, e.n.1),
                Some(off) => w.cross_coherence(off, e.n.0, e.n.1, e.upper, e.lower),
            })
            .collect()
    }

    fn unpack(&self, z: &[C64], w: &mut DressedDensity) {
        for (e, &v) in self.entries.iter().zip(z) {
            match e.offset {
                None => w.set_block_coherence(e.n.0, e.n.1, v),
                Some(off) => w.set_cross_coherence(off, e.n.0, e.n.1, e.upper, e.lower, v),
            }
        }
    }

    /// `phase[i]` must hold `e^{i w_i t}`; `lab` is scratch.
    fn derivative(&self, z: &[C64], phase: &[C64], lab: &mut [C64], out: &mut [C64]) {
        for ((l, zi), p) in lab.iter_mut().zip(z).zip(phase) {
            *l = zi * p.conj();
        }
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for j in self.row_start[i]..self.row_start[i + 1] {
                acc += lab[self.sources[j] as usize] * self.coeffs[j];
            }
            *o = phase[i] * acc - z[i] * self.decay[i];
        }
    }
}

/// Fixed-step RK4 for [`FeedingGenerator`] on the grid `t = j h`, with cubic
/// Hermite dense output between grid points.
struct FeedingStepper {
    h: f64,
    steps: usize,
    /// State and derivative at the two grid points bracketing the output.
    z: [Vec<C64>; 2],
    f: [Vec<C64>; 2],
    phase: Vec<C64>,
    half_turn: Vec<C64>,
    mid_phase: Vec<C64>,
    k: [Vec<C64>; 3],
    tmp: Vec<C64>,
    lab: Vec<C64>,
}

impl FeedingStepper {
    /// Grid points between phase resynchronizations.
    const RESYNC: usize = 256;

    fn new(gen: &FeedingGenerator, z0: Vec<C64>, h: f64) -> Self {
        let n = gen.len();
        let zero = || vec![C64::new(0.0, 0.0); n];
        let phase = vec![C64::new(1.0, 0.0); n];
        let mut lab = zero();
        let mut f0 = zero();
        gen.derivative(&z0, &phase, &mut lab, &mut f0);
        let mut s = FeedingStepper {
            h,
            steps: 0,
            z: [z0.clone(), z0],
            f: [f0.clone(), f0],
            phase,
            half_turn: gen.omega.iter().map(|w| C64::from_polar(1.0, 0.5 * w * h)).collect(),
            mid_phase: zero(),
            k: std::array::from_fn(|_| zero()),
            tmp: zero(),
            lab,
        };
        s.step(gen);
        s
    }

    /// Advance `z[1]` one step, keeping the previous point in `z[0]`.
    fn step(&mut self, gen: &FeedingGenerator) {
        let h = self.h;
        let n = self.tmp.len();
        self.z.swap(0, 1);
        self.f.swap(0, 1);
        for (m, (p, q)) in self.mid_phase.iter_mut().zip(self.phase.iter().zip(&self.half_turn)) {
            *m = p * q;
        }
        let (z0, f0) = (&self.z[0], &self.f[0]);
        for i in 0..n {
            self.tmp[i] = z0[i] + f0[i] * (0.5 * h);
        }
        gen.derivative(&self.tmp, &self.mid_phase, &mut self.lab, &mut self.k[0]);
        for i in 0..n {
            self.tmp[i] = z0[i] + self.k[0][i] * (0.5 * h);
        }
        gen.derivative(&self.tmp, &self.mid_phase, &mut self.lab, &mut self.k[1]);
        self.steps += 1;
        if self.steps % Self::RESYNC == 0 {
            let t = self.steps as f64 * h;
            for (p, w) in self.phase.iter_mut().zip(&gen.omega) {
                *p = C64::from_polar(1.0, w * t);
            }
        } else {
            for (p, (m, q)) in self.phase.iter_mut().zip(self.mid_phase.iter().zip(&self.half_turn)) {
                *p = m * q;
            }
        }
        for i in 0..n {
            self.tmp[i] = z0[i] + self.k[1][i] * h;
        }
        gen.derivative(&self.tmp, &self.phase, &mut self.lab, &mut self.k[2]);
        let [z0, z1] = &mut self.z;
        let f0 = &self.f[0];
        for i in 0..n {
            z1[i] = z0[i] + (f0[i] + (self.k[0][i] + self.k[1][i]) * 2.0 + self.k[2][i]) * (h / 6.0);
        }
        gen.derivative(&self.z[1], &self.phase, &mut self.lab, &mut self.f[1]);
    }

    /// Coherences at time `t`, which must not precede the bracketing interval.
    fn at(&mut self, gen: &FeedingGenerator, t: f64, out: &mut [C64]) {
        while (self.steps as f64) * self.h < t {
            self.step(gen);
        }
        let h = self.h;
        let t0 = (self.steps - 1) as f64 * h;
        let s = ((t - t0) / h).clamp(0.0, 1.0);
        let (s2, s3) = (s * s, s * s * s);
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = (s3 - 2.0 * s2 + s) * h;
        let h01 = 3.0 * s2 - 2.0 * s3;
        let h11 = (s3 - s2) * h;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.z[0][i] * h00 + self.f[0][i] * h10 + self.z[1][i] * h01 + self.f[1][i] * h11;
        }
    }
}

/// Secular evolution of one initial state.
#[derive(Clone, Debug)]
pub struct SecularEvolution {
    initial: DressedDensity,
    generator: RateGenerator,
    feeding: Option<FeedingGenerator>,
}

impl SecularEvolution {
    /// Evolution with the default [`CoherenceFeeding`].
    pub fn new(initial: DressedDensity, manifold: DarkManifold) -> Result<Self> {
        Self::with_feeding(initial, manifold, CoherenceFeeding::default())
    }

    pub fn with_feeding(initial: DressedDensity, manifold: DarkManifold, feeding: CoherenceFeeding) -> Result<Self> {
        let generator = build_generator_for(initial.spectrum().clone(), manifold)?;
        let feeding = match feeding {
            CoherenceFeeding::NearResonant if !generator.is_zero() => {
                Some(FeedingGenerator::build(initial.spectrum()))
            }
            _ => None,
        };
        Ok(SecularEvolution {
            initial,
            generator,
            feeding,
        })
    }

    pub fn generator(&self) -> &RateGenerator {
        &self.generator
    }

    pub fn initial(&self) -> &DressedDensity {
        &self.initial
    }

    pub fn feeding(&self) -> CoherenceFeeding {
        if self.feeding.is_some() || self.generator.is_zero() {
            CoherenceFeeding::NearResonant
        } else {
            CoherenceFeeding::None
        }
    }

    /// Visit the full density at every grid time.
    pub fn for_each_sample<F>(&self, t_grid: &[f64], mut visit: F) -> Result<()>
    where
        F: FnMut(usize, f64, &DressedDensity) -> Result<()>,
    {
        let mut w = self.initial.clone();
        let y0 = self.generator.pack(&self.initial);
        let mut fed = self.feeding.as_ref().map(|f| {
            let h = f.max_step(self.initial.params().kappa);
            log::debug!(
                "feeding {} coherences through {} terms, max mismatch {:.3}, step {:.3e}",
                f.len(),
                f.coeffs.len(),
                f.max_mismatch,
                h
            );
            let z0 = f.pack(&self.initial);
            let coarse = FeedingStepper::new(f, z0.clone(), h);
            let fine = FeedingStepper::new(f, z0, 0.5 * h);
            (f, coarse, fine, vec![C64::new(0.0, 0.0); f.len()], vec![C64::new(0.0, 0.0); f.len()])
        });
        propagate_populations_with_step(&y0, &self.generator, t_grid, self.generator.max_step(), |i, y| {
            let t = t_grid[i];
            self.generator.unpack(y, &mut w);
            decay_coherences(&self.initial, &mut w, t);
            if let Some((f, coarse, fine, zc, zf)) = fed.as_mut() {
                coarse.at(f, t, zc);
                fine.at(f, t, zf);
                let change = zc.iter().zip(zf.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                if change > STEP_HALVING_TOL {
                    return Err(Error::StepSize {
                        time: t,
                        change,
                        suggested_dt: 0.25 * coarse.h,
                    });
                }
                f.unpack(zf, &mut w);
            }
            visit(i, t, &w)
        })
    }

    /// Densities at every grid time. Memory grows with cutoff x samples;
    /// prefer [`Self::for_each_sample`] for large runs.
    pub fn sample(&self, t_grid: &[f64]) -> Result<Vec<DressedDensity>> {
        let mut out = Vec::with_capacity(t_grid.len());
        self.for_each_sample(t_grid, |_, _, w| {
            out.push(w.clone());
            Ok(())
        })?;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initial_state::{coherent_excited, fock_excited, InitMode};
    use approx::assert_abs_diff_eq;

    fn grid(tmax: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| tmax * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn zero_damping_gives_zero_generator() {
        let p = ModelParams::new(1.5, 0.0).unwrap();
        let g = build_generator(&p, Cutoff::new(4, 3), DarkManifold::Full).unwrap();
        assert!(g.is_zero());
        let w0 = coherent_excited(&p, 1.0, 1.0, Some(Cutoff::new(20, 20)), InitMode::FullCoherence).unwrap();
        let ev = SecularEvolution::new(w0.clone(), DarkManifold::Full).unwrap();
        let y0 = ev.generator().pack(&w0);
        for y in evolve_populations(&w0, ev.generator(), &grid(30.0, 7)).unwrap() {
            assert_eq!(y, y0);
        }
    }

    #[test]
    fn resonant_inflow_coefficient_reduces() {
        let k = 0.05;
        let p = ModelParams::new(0.0, k).unwrap();
        let cut = Cutoff::new(4, 4);
        let g = build_generator(&p, cut, DarkManifold::Full).unwrap();
        for (n1, n2) in [(0, 0), (1, 2), (2, 3)] {
            let w = crate::dressed_basis::rabi_frequency(n1, n2, &p);
            let w_up = crate::dressed_basis::rabi_frequency(n1 + 1, n2, &p);
            let bracket = (n1 + 1) as f64 / w + (n1 + 2) as f64 / w_up;
            let expected = k * (n2 + 1) as f64 / 2.0 * bracket * bracket;
            for b in Branch::BOTH {
                let t = dressed_slot(&cut, DressedIndex::new(n1, n2, b));
                let s = dressed_slot(&cut, DressedIndex::new(n1 + 1, n2, b));
                assert_abs_diff_eq!(g.entry(t, s), expected, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn inflow_matches_printed_bracket_form() {
        // Bracket form with gamma ratios, for a detuned model.
        let k = 0.02;
        let p = ModelParams::new(2.7, k).unwrap();
        let cut = Cutoff::new(5, 5);
        let g = build_generator(&p, cut, DarkManifold::Full).unwrap();
        let gm = |n1, n2, b| gamma(n1, n2, b, &p);
        use crate::dressed_basis::{gamma, rabi_frequency};
        for (n1, n2) in [(0, 0), (1, 3), (3, 2)] {
            for b in Branch::BOTH {
                let (nb, w, w1) = (b.flip(), rabi_frequency(n1, n2, &p), rabi_frequency(n1 + 1, n2, &p));
                let same = (n1 + 1) as f64 / w * gm(n1 + 1, n2, b) / gm(n1, n2, nb)
                    + (n1 + 2) as f64 / w1 * gm(n1, n2, nb) / gm(n1 + 1, n2, b);
                let cross = (n1 + 1) as f64 / w * gm(n1 + 1, n2, nb) / gm(n1, n2, nb)
                    - (n1 + 2) as f64 / w1 * gm(n1, n2, nb) / gm(n1 + 1, n2, nb);
                let pre = k * (n2 + 1) as f64 / 2.0;
                let t = dressed_slot(&cut, DressedIndex::new(n1, n2, b));
                let s_same = dressed_slot(&cut, DressedIndex::new(n1 + 1, n2, b));
                let s_cross = dressed_slot(&cut, DressedIndex::new(n1 + 1, n2, nb));
                assert_abs_diff_eq!(g.entry(t, s_same), pre * same * same, epsilon = 1e-12);
                assert_abs_diff_eq!(g.entry(t, s_cross), pre * cross * cross, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn full_manifold_conserves_probability() {
        for (delta, k) in [(0.0, 0.01), (3.0, 0.2), (-1.0, 1.0)] {
            let p = ModelParams::new(delta, k).unwrap();
            let g = build_generator(&p, Cutoff::new(3, 3), DarkManifold::Full).unwrap();
            for s in g.column_sums() {
                assert!(s.abs() < 1e-12, "column sum {s}");
            }
            let dense = g.to_dense();
            for (i, row) in dense.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    if i == j {
                        assert!(*v <= 0.0);
                    } else {
                        assert!(*v >= 0.0);
                    }
                }
            }
        }
        let p = ModelParams::new(0.0, 0.1).unwrap();
        let g = build_generator(&p, Cutoff::new(3, 3), DarkManifold::Paper3).unwrap();
        assert!(g.column_sums().iter().any(|s| s.abs() > 1e-6));
    }

    #[test]
    fn flow_only_lowers_excitation() {
        let p = ModelParams::new(1.0, 0.1).unwrap();
        let g = build_generator(&p, Cutoff::new(4, 3), DarkManifold::Full).unwrap();
        let labels = g.labels();
        let dense = g.to_dense();
        for (i, row) in dense.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if i != j && *v != 0.0 {
                    assert_eq!(labels[j].excitation_level(), labels[i].excitation_level() + 1);
                }
            }
        }
    }

    #[test]
    fn invalid_cutoff_is_rejected() {
        let p = ModelParams::new(0.0, 0.1).unwrap();
        assert!(matches!(
            build_generator(&p, Cutoff::new(0, 3), DarkManifold::Full),
            Err(Error::InvalidCutoff { .. })
        ));
    }

    #[test]
    fn vacuum_block_decays_exponentially() {
        for delta in [0.0, 1.3] {
            let k = 0.05;
            let p = ModelParams::new(delta, k).unwrap();
            let w0 = fock_excited(&p, 0, 0).unwrap();
            let ev = SecularEvolution::new(w0.clone(), DarkManifold::Full).unwrap();
            let ts = grid(20.0, 11);
            let b = w0.spectrum().block(0, 0);
            let samples = ev.sample(&ts).unwrap();
            for (t, w) in ts.iter().zip(&samples) {
                for br in Branch::BOTH {
                    let idx = DressedIndex::new(0, 0, br);
                    let rate = 2.0 * k * b.gamma(br.flip()).powi(2);
                    assert_abs_diff_eq!(w.population(idx), w0.population(idx) * (-rate * t).exp(), epsilon = 1e-9);
                }
                assert_abs_diff_eq!(w.trace(), 1.0, epsilon = 1e-12);
            }
            if delta == 0.0 {
                assert_abs_diff_eq!(2.0 * k * b.gamma_minus.powi(2), 2.0 * k, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn offdiag_examples() {
        let p = ModelParams::new(0.0, 0.0).unwrap();
        let c = C64::new(0.3, -0.2);
        let a = DressedIndex::new(1, 2, Branch::Plus);
        let b = DressedIndex::new(1, 2, Branch::Minus);
        assert_eq!(offdiag_value(c, a, b, &p, 100.0), c);

        let p = ModelParams::new(0.0, 0.1).unwrap();
        let one = C64::new(1.0, 0.0);
        let same = offdiag_value(
            one,
            DressedIndex::new(0, 0, Branch::Plus),
            DressedIndex::new(0, 0, Branch::Minus),
            &p,
            5.0,
        );
        assert_abs_diff_eq!(same.re, (-1.0f64).exp(), epsilon = 1e-15);
        let cross = offdiag_value(
            one,
            DressedIndex::new(1, 0, Branch::Plus),
            DressedIndex::new(0, 0, Branch::Plus),
            &p,
            5.0,
        );
        assert_abs_diff_eq!(cross.re, (-1.5f64).exp(), epsilon = 1e-15);

        // Same-block rate is 2k(n1+n2+1) for any detuning.
        let p = ModelParams::new(4.0, 0.1).unwrap();
        let r = coherence_rate(
            DressedIndex::new(2, 1, Branch::Plus),
            DressedIndex::new(2, 1, Branch::Minus),
            &p,
        );
        assert_abs_diff_eq!(r, 2.0 * 0.1 * 4.0, epsilon = 1e-14);
    }

    #[test]
    fn coherent_start_conserves_trace_and_fills_vacuum() {
        let p = ModelParams::new(0.0, 0.02).unwrap();
        let w0 = coherent_excited(&p, 1.0, 1.0, None, InitMode::FullCoherence).unwrap();
        let ev = SecularEvolution::with_feeding(w0, DarkManifold::Full, CoherenceFeeding::None).unwrap();
        let ts = grid(10.0 / 0.02, 6);
        let mut last_dark = 0.0;
        ev.for_each_sample(&ts, |_, _, w| {
            assert_abs_diff_eq!(w.trace(), 1.0, epsilon = 1e-9);
            assert!(w.dark_total() >= last_dark - 1e-15);
            last_dark = w.dark_total();
            Ok(())
        })
        .unwrap();
        let last = ev.sample(&ts).unwrap().pop().unwrap();
        assert!((last.dark_population(DarkIndex::origin()) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn higher_blocks_ignore_lower_perturbations() {
        let p = ModelParams::new(1.0, 0.05).unwrap();
        let w0 = coherent_excited(&p, 1.0, 1.0, Some(Cutoff::new(14, 14)), InitMode::FullCoherence).unwrap();
        let mut bumped = w0.clone();
        let idx = DressedIndex::new(2, 2, Branch::Plus);
        bumped.set_population(idx, w0.population(idx) + 0.01);
        let ts = grid(10.0, 5);
        let a = SecularEvolution::new(w0, DarkManifold::Full).unwrap().sample(&ts).unwrap();
        let b = SecularEvolution::new(bumped, DarkManifold::Full).unwrap().sample(&ts).unwrap();
        for (wa, wb) in a.iter().zip(&b) {
            for (n1, n2) in wa.cutoff().iter() {
                if n1 + n2 > 4 {
                    for br in Branch::BOTH {
                        let i = DressedIndex::new(n1, n2, br);
                        assert_eq!(wa.population(i), wb.population(i));
                    }
                }
            }
        }
    }

    #[test]
    fn bad_grids_are_rejected() {
        let p = ModelParams::new(0.0, 0.1).unwrap();
        let w0 = fock_excited(&p, 0, 0).unwrap();
        let ev = SecularEvolution::new(w0, DarkManifold::Full).unwrap();
        assert!(ev.sample(&[]).is_err());
        assert!(ev.sample(&[0.5, 1.0]).is_err());
        assert!(ev.sample(&[0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn feeding_restores_free_field_amplitude_decay() {
        // Far off resonance the field is nearly free, so |<a1>| = alpha e^{-kt}.
        let k = 0.05;
        let p = ModelParams::new(1e4, k).unwrap();
        let w0 = coherent_excited(&p, 1.0, 1.0, None, InitMode::FullCoherence).unwrap();
        let fed = SecularEvolution::new(w0.clone(), DarkManifold::Full).unwrap();
        let bare = SecularEvolution::with_feeding(w0, DarkManifold::Full, CoherenceFeeding::None).unwrap();
        assert_eq!(fed.feeding(), CoherenceFeeding::NearResonant);
        assert_eq!(bare.feeding(), CoherenceFeeding::None);
        let ts = grid(5.0, 6);
        let amp = |ev: &SecularEvolution| {
            let mut out = Vec::new();
            ev.for_each_sample(&ts, |_, t, w| {
                out.push(crate::observables::field_moments(w, t, crate::observables::Mode::One).0.norm());
                Ok(())
            })
            .unwrap();
            out
        };
        for (t, a) in ts.iter().zip(amp(&fed)) {
            assert_abs_diff_eq!(a, (-k * t).exp(), epsilon = 1e-3);
        }
        let last = *amp(&bare).last().unwrap();
        assert!(last < 0.7 * (-k * 5.0).exp(), "{last}");
    }

    #[test]
    fn feeding_parses() {
        assert_eq!("none".parse::<CoherenceFeeding>().unwrap(), CoherenceFeeding::None);
        assert_eq!("near-resonant".parse::<CoherenceFeeding>().unwrap(), CoherenceFeeding::NearResonant);
        assert!("full".parse::<CoherenceFeeding>().is_err());
    }
}
