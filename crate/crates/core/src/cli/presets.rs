//! Figure-reproduction presets: one curve family per figure.
//!
//! Time axes in the source figures are unlabeled, so `tmax` is an estimate
//! long enough to contain the first revival: 50 for mean photon numbers up
//! to 15, 120 from 30 up.

use crate::cli::config::RunConfig;
use crate::observables::Observable;

/// Parameter varied across the curves of one figure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Varied {
    Kappa,
    Delta,
}

impl Varied {
    pub fn key(self) -> &'static str {
        match self {
            Varied::Kappa => "kappa",
            Varied::Delta => "delta",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub title: &'static str,
    pub observable: Observable,
    pub nbar1: f64,
    pub nbar2: f64,
    /// Fixed detuning or damping; the varied one is ignored.
    pub delta: f64,
    pub kappa: f64,
    pub varied: Varied,
    pub values: &'static [f64],
    /// Vertical display offset of each curve in the original figure.
    pub offsets: &'static [f64],
    pub tmax: f64,
}

impl Preset {
    /// One configuration per curve, in caption order.
    pub fn curves(&self) -> Vec<RunConfig> {
        self.values
            .iter()
            .map(|&v| {
                let mut c = RunConfig {
                    nbar1: self.nbar1,
                    nbar2: self.nbar2,
                    delta: self.delta,
                    kappa: self.kappa,
                    tmax: self.tmax,
                    observables: vec![self.observable],
                    ..RunConfig::default()
                };
                match self.varied {
                    Varied::Kappa => c.kappa = v,
                    Varied::Delta => c.delta = v,
                }
                c
            })
            .collect()
    }
}

const K3: &[f64] = &[0.0, 0.001, 0.01];
const K4: &[f64] = &[0.0, 0.0001, 0.001, 0.01];
const D3: &[f64] = &[0.0, 20.0, 100.0];
const NONE3: &[f64] = &[0.0, 0.0, 0.0];
const NONE4: &[f64] = &[0.0, 0.0, 0.0, 0.0];
const NONE2: &[f64] = &[0.0, 0.0];

pub const PRESETS: [Preset; 16] = [
    Preset {
        name: "fig1",
        title: "Atomic population of an excited level",
        observable: Observable::Re,
        nbar1: 5.0,
        nbar2: 5.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K3,
        offsets: &[0.0, 0.0, -0.1],
        tmax: 50.0,
    },
    Preset {
        name: "fig2",
        title: "Atomic population of an excited level",
        observable: Observable::Re,
        nbar1: 5.0,
        nbar2: 5.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K3,
        offsets: &[0.2, 0.0, -0.2],
        tmax: 50.0,
    },
    Preset {
        name: "fig3",
        title: "Atomic population of an excited level",
        observable: Observable::Re,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: D3,
        offsets: NONE3,
        tmax: 120.0,
    },
    Preset {
        name: "fig4",
        title: "Atomic population of an excited level",
        observable: Observable::Re,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K4,
        offsets: &[-0.2, 0.0, 0.2, 0.4],
        tmax: 120.0,
    },
    Preset {
        name: "fig5",
        title: "Mean photon number in the first field mode",
        observable: Observable::N1,
        nbar1: 5.0,
        nbar2: 5.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: &[0.0, 10.0, 100.0],
        offsets: NONE3,
        tmax: 50.0,
    },
    Preset {
        name: "fig6",
        title: "Mean photon number in the first field mode",
        observable: Observable::N1,
        nbar1: 5.0,
        nbar2: 5.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K3,
        offsets: NONE3,
        tmax: 50.0,
    },
    Preset {
        name: "fig7",
        title: "Mean photon number in the first field mode",
        observable: Observable::N1,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: D3,
        offsets: NONE3,
        tmax: 120.0,
    },
    Preset {
        name: "fig8",
        title: "Mean photon number in the first field mode",
        observable: Observable::N1,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K4,
        offsets: NONE4,
        tmax: 120.0,
    },
    Preset {
        name: "fig9",
        title: "Second order correlation function for the first field mode",
        observable: Observable::G2_1,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: &[0.0, 10.0, 20.0, 100.0],
        offsets: NONE4,
        tmax: 120.0,
    },
    Preset {
        name: "fig10",
        title: "Second order correlation function for the first field mode",
        observable: Observable::G2_1,
        nbar1: 30.0,
        nbar2: 30.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: K3,
        offsets: NONE3,
        tmax: 120.0,
    },
    Preset {
        name: "fig11",
        title: "Squeezing in the first field mode",
        observable: Observable::S1,
        nbar1: 50.0,
        nbar2: 50.0,
        delta: 0.0,
        kappa: 0.0,
        varied: Varied::Delta,
        values: &[10.0, 100.0],
        offsets: NONE2,
        tmax: 120.0,
    },
    Preset {
        name: "fig12",
        title: "Squeezing in the first field mode",
        observable: Observable::S1,
        nbar1: 50.0,
        nbar2: 50.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: &[0.0, 0.0001],
        offsets: NONE2,
        tmax: 120.0,
    },
    Preset {
        name: "fig13",
        title: "Atomic dipole moment dispersive component",
        observable: Observable::F1,
        nbar1: 15.0,
        nbar2: 10.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: &[50.0, 100.0],
        offsets: NONE2,
        tmax: 50.0,
    },
    Preset {
        name: "fig14",
        title: "Atomic dipole moment absorptive component",
        observable: Observable::F2,
        nbar1: 15.0,
        nbar2: 10.0,
        delta: 0.0,
        kappa: 0.001,
        varied: Varied::Delta,
        values: &[50.0, 100.0],
        offsets: NONE2,
        tmax: 50.0,
    },
    Preset {
        name: "fig15",
        title: "Atomic dipole moment dispersive component",
        observable: Observable::F1,
        nbar1: 15.0,
        nbar2: 10.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: &[0.001, 0.01],
        offsets: NONE2,
        tmax: 50.0,
    },
    Preset {
        name: "fig16",
        title: "Atomic dipole moment absorptive component",
        observable: Observable::F2,
        nbar1: 15.0,
        nbar2: 10.0,
        delta: 10.0,
        kappa: 0.0,
        varied: Varied::Kappa,
        values: &[0.001, 0.01],
        offsets: NONE2,
        tmax: 50.0,
    },
];

pub fn find(name: &str) -> Option<&'static Preset> {
    PRESETS.iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_sixteen_exist() {
        for i in 1..=16 {
            let p = find(&format!("fig{i}")).unwrap();
            assert_eq!(p.values.len(), p.offsets.len());
            for c in p.curves() {
                c.validate().unwrap();
            }
        }
        assert!(find("fig17").is_none());
    }

    #[test]
    fn fig1_encodes_caption() {
        let curves = find("fig1").unwrap().curves();
        let ks: Vec<f64> = curves.iter().map(|c| c.kappa).collect();
        assert_eq!(ks, vec![0.0, 0.001, 0.01]);
        for c in &curves {
            assert_eq!((c.nbar1, c.nbar2, c.delta, c.tmax), (5.0, 5.0, 10.0, 50.0));
            assert_eq!(c.observables, vec![Observable::Re]);
        }
    }

    #[test]
    fn fig3_varies_detuning() {
        let curves = find("fig3").unwrap().curves();
        let ds: Vec<f64> = curves.iter().map(|c| c.delta).collect();
        assert_eq!(ds, vec![0.0, 20.0, 100.0]);
        assert!(curves.iter().all(|c| c.kappa == 0.001 && c.nbar1 == 30.0 && c.tmax == 120.0));
    }
}
