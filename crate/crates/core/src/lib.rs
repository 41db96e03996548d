//! Dissipative nondegenerate two-photon Jaynes-Cummings model.
//!
//! A three-level atom in ladder configuration couples to two cavity modes
//! through a two-photon transition; both modes leak at rate `k`. In the
//! strong-coupling (secular) regime the master equation reduces to rate
//! equations for dressed-state populations plus freely decaying coherences,
//! which [`secular_solver`] integrates. [`lindblad_oracle`] integrates the
//! full master equation in a truncated bare basis as a reference.

pub mod cli;
pub mod density;
pub mod dressed_basis;
pub mod error;
pub mod initial_state;
pub mod lindblad_oracle;
pub mod observables;
pub mod secular_solver;

pub use density::{CoherenceOffset, Cutoff, DarkManifold, DressedDensity, Spectrum};
pub use dressed_basis::{Branch, DarkIndex, DarkSide, DressedIndex, ModelParams};
pub use error::{Error, Result};
pub use initial_state::{coherent_excited, fock_excited, InitMode};
pub use observables::{Mode, Observable, ObservableSample};
pub use secular_solver::{build_generator, CoherenceFeeding, RateGenerator, SecularEvolution};
