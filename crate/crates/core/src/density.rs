//! Sparse dressed-basis density matrix.

use std::sync::Arc;

use num_complex::Complex64 as C64;

use crate::dressed_basis::{BlockConstants, Branch, DarkIndex, DarkSide, DressedIndex, ModelParams};
use crate::error::{Error, Result};

/// Photon-number truncation `(N1, N2)`: blocks with `n1 <= N1`, `n2 <= N2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Cutoff {
    pub n1: usize,
    pub n2: usize,
}

impl Cutoff {
    pub fn new(n1: usize, n2: usize) -> Self {
        Cutoff { n1, n2 }
    }

    pub fn blocks(&self) -> usize {
        (self.n1 + 1) * (self.n2 + 1)
    }

    pub fn block_slot(&self, n1: usize, n2: usize) -> usize {
        n1 * (self.n2 + 1) + n2
    }

    pub fn contains(&self, n1: usize, n2: usize) -> bool {
        n1 <= self.n1 && n2 <= self.n2
    }

    /// Iterate block labels in storage order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> {
        let n2max = self.n2;
        (0..=self.n1).flat_map(move |a| (0..=n2max).map(move |b| (a, b)))
    }
}

/// Block constants for every block inside a cutoff.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub params: ModelParams,
    pub cutoff: Cutoff,
    blocks: Vec<BlockConstants>,
}

impl Spectrum {
    pub fn new(params: ModelParams, cutoff: Cutoff) -> Self {
        let blocks = cutoff
            .iter()
            .map(|(a, b)| BlockConstants::new(a, b, &params))
            .collect();
        Spectrum {
            params,
            cutoff,
            blocks,
        }
    }

    pub fn block(&self, n1: usize, n2: usize) -> &BlockConstants {
        &self.blocks[self.cutoff.block_slot(n1, n2)]
    }
}

/// Block offsets `(dn1, dn2)` at which cross-block coherences are kept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CoherenceOffset {
    Mode1,
    Mode1Double,
    Mode2,
    Mode2Double,
    Both,
}

impl CoherenceOffset {
    pub const ALL: [CoherenceOffset; 5] = [
        CoherenceOffset::Mode1,
        CoherenceOffset::Mode1Double,
        CoherenceOffset::Mode2,
        CoherenceOffset::Mode2Double,
        CoherenceOffset::Both,
    ];

    pub fn shift(self) -> (usize, usize) {
        match self {
            CoherenceOffset::Mode1 => (1, 0),
            CoherenceOffset::Mode1Double => (2, 0),
            CoherenceOffset::Mode2 => (0, 1),
            CoherenceOffset::Mode2Double => (0, 2),
            CoherenceOffset::Both => (1, 1),
        }
    }

    pub fn from_shift(d1: usize, d2: usize) -> Option<Self> {
        Self::ALL.into_iter().find(|o| o.shift() == (d1, d2))
    }

    fn slot(self) -> usize {
        self as usize
    }
}

/// Which dark states the leakage cascade tracks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum DarkManifold {
    /// Every `|-, m, 0>`, `|-, 0, m>` reachable from the cutoff.
    #[default]
    Full,
    /// Only `|-,1,0>`, `|-,0,1>` and `|-,0,0>`.
    Paper3,
}

impl std::str::FromStr for DarkManifold {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(DarkManifold::Full),
            "paper3" => Ok(DarkManifold::Paper3),
            other => Err(Error::Config(format!("unknown manifold '{other}'"))),
        }
    }
}

/// Interaction-picture density matrix in the dressed basis.
///
/// Stores populations of every dressed and dark state, the `+/-` coherence of
/// each block, and cross-block coherences `<Psi^a_{n+d}|W|Psi^b_n>` for the
/// offsets `d` in [`CoherenceOffset`]. Nothing else is needed by the
/// observables.
#[derive(Clone, Debug)]
pub struct DressedDensity {
    spectrum: Arc<Spectrum>,
    pop: Vec<[f64; 2]>,
    block_coh: Vec<C64>,
    cross: [Vec<[[C64; 2]; 2]>; 5],
    dark: Vec<f64>,
}

impl DressedDensity {
    pub fn zeros(spectrum: Arc<Spectrum>) -> Self {
        let cut = spectrum.cutoff;
        let nb = cut.blocks();
        let zero = [[C64::new(0.0, 0.0); 2]; 2];
        DressedDensity {
            pop: vec![[0.0; 2]; nb],
            block_coh: vec![C64::new(0.0, 0.0); nb],
            cross: std::array::from_fn(|_| vec![zero; nb]),
            dark: vec![0.0; dark_len(&cut)],
            spectrum,
        }
    }

    pub fn cutoff(&self) -> Cutoff {
        self.spectrum.cutoff
    }

    pub fn params(&self) -> &ModelParams {
        &self.spectrum.params
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn population(&self, idx: DressedIndex) -> f64 {
        let cut = self.cutoff();
        if !cut.contains(idx.n1, idx.n2) {
            return 0.0;
        }
        self.pop[cut.block_slot(idx.n1, idx.n2)][idx.branch.slot()]
    }

    pub fn set_population(&mut self, idx: DressedIndex, value: f64) {
        let slot = self.cutoff().block_slot(idx.n1, idx.n2);
        self.pop[slot][idx.branch.slot()] = value;
    }

    /// `<Psi+_{n1 n2}|W|Psi-_{n1 n2}>`.
    pub fn block_coherence(&self, n1: usize, n2: usize) -> C64 {
        let cut = self.cutoff();
        if !cut.contains(n1, n2) {
            return C64::new(0.0, 0.0);
        }
        self.block_coh[cut.block_slot(n1, n2)]
    }

    pub fn set_block_coherence(&mut self, n1: usize, n2: usize, value: C64) {
        let slot = self.cutoff().block_slot(n1, n2);
        self.block_coh[slot] = value;
    }

    /// `<Psi^upper_{n+d}|W|Psi^lower_n>` where `n = (n1, n2)` is the lower block.
    pub fn cross_coherence(
        &self,
        offset: CoherenceOffset,
        n1: usize,
        n2: usize,
        upper: Branch,
        lower: Branch,
    ) -> C64 {
        let cut = self.cutoff();
        let (d1, d2) = offset.shift();
        if !cut.contains(n1 + d1, n2 + d2) {
            return C64::new(0.0, 0.0);
        }
        self.cross[offset.slot()][cut.block_slot(n1, n2)][upper.slot()][lower.slot()]
    }

    pub fn set_cross_coherence(
        &mut self,
        offset: CoherenceOffset,
        n1: usize,
        n2: usize,
        upper: Branch,
        lower: Branch,
        value: C64,
    ) {
        let slot = self.cutoff().block_slot(n1, n2);
        self.cross[offset.slot()][slot][upper.slot()][lower.slot()] = value;
    }

    pub fn dark_population(&self, idx: DarkIndex) -> f64 {
        dark_slot(&self.cutoff(), idx)
            .map(|s| self.dark[s])
            .unwrap_or(0.0)
    }

    pub fn set_dark_population(&mut self, idx: DarkIndex, value: f64) {
        if let Some(s) = dark_slot(&self.cutoff(), idx) {
            self.dark[s] = value;
        }
    }

    /// Every dark state the cutoff can reach.
    pub fn dark_states(&self) -> Vec<DarkIndex> {
        dark_states(&self.cutoff())
    }

    pub fn dark_total(&self) -> f64 {
        self.dark.iter().sum()
    }

    pub fn trace(&self) -> f64 {
        self.pop.iter().map(|p| p[0] + p[1]).sum::<f64>() + self.dark_total()
    }

    /// Drop every cross-block coherence.
    pub fn clear_cross_coherences(&mut self) {
        for v in self.cross.iter_mut() {
            v.fill([[C64::new(0.0, 0.0); 2]; 2]);
        }
    }

    pub fn has_cross_coherences(&self) -> bool {
        self.cross
            .iter()
            .any(|v| v.iter().flatten().flatten().any(|c| c.norm() > 0.0))
    }

    /// Generic dressed matrix element `<m|W|n>` where it is stored.
    ///
    /// Returns `None` for pairs whose block offset is not tracked.
    pub fn element(&self, m: DressedIndex, n: DressedIndex) -> Option<C64> {
        let cut = self.cutoff();
        if !cut.contains(m.n1, m.n2) || !cut.contains(n.n1, n.n2) {
            return Some(C64::new(0.0, 0.0));
        }
        if (m.n1, m.n2) == (n.n1, n.n2) {
            return Some(match (m.branch, n.branch) {
                (a, b) if a == b => C64::new(self.population(m), 0.0),
                (Branch::Plus, Branch::Minus) => self.block_coherence(m.n1, m.n2),
                _ => self.block_coherence(m.n1, m.n2).conj(),
            });
        }
        if m.n1 >= n.n1 && m.n2 >= n.n2 {
            let off = CoherenceOffset::from_shift(m.n1 - n.n1, m.n2 - n.n2)?;
            return Some(self.cross_coherence(off, n.n1, n.n2, m.branch, n.branch));
        }
        if n.n1 >= m.n1 && n.n2 >= m.n2 {
            return self.element(n, m).map(|c| c.conj());
        }
        None
    }

    pub(crate) fn populations_raw(&self) -> &[[f64; 2]] {
        &self.pop
    }

    pub(crate) fn populations_raw_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.pop
    }

    pub(crate) fn dark_raw(&self) -> &[f64] {
        &self.dark
    }

    pub(crate) fn dark_raw_mut(&mut self) -> &mut [f64] {
        &mut self.dark
    }

    pub(crate) fn block_coh_raw_mut(&mut self) -> &mut [C64] {
        &mut self.block_coh
    }

    pub(crate) fn cross_raw_mut(&mut self, offset: CoherenceOffset) -> &mut [[[C64; 2]; 2]] {
        &mut self.cross[offset.slot()]
    }
}

/// Dark storage: origin, then `|-,m,0>` for `m = 1..=N1+1`, then `|-,0,m>`
/// for `m = 1..=N2+1`.
pub(crate) fn dark_len(cut: &Cutoff) -> usize {
    1 + (cut.n1 + 1) + (cut.n2 + 1)
}

pub(crate) fn dark_slot(cut: &Cutoff, idx: DarkIndex) -> Option<usize> {
    match idx.side {
        DarkSide::Origin => Some(0),
        DarkSide::Mode1 if (1..=cut.n1 + 1).contains(&idx.m) => Some(idx.m),
        DarkSide::Mode2 if (1..=cut.n2 + 1).contains(&idx.m) => Some(cut.n1 + 1 + idx.m),
        _ => None,
    }
}

pub(crate) fn dark_states(cut: &Cutoff) -> Vec<DarkIndex> {
    let mut out = vec![DarkIndex::origin()];
    out.extend((1..=cut.n1 + 1).map(DarkIndex::mode1));
    out.extend((1..=cut.n2 + 1).map(DarkIndex::mode2));
    out
}
