//! Thermodynamic cost analysis of quantum operations on signal ensembles.
//!
//! All energies are in units of kT and all entropies in bits.

pub mod bounds;
pub mod ensemble;
pub mod error;
pub mod lp;
pub mod qmat;
pub mod random;
pub mod reversibility;
pub mod simulator;

pub use bounds::{analyze, dephasing_excess, landauer_term, offdiag_bound, ScanConfig, ThermoReport};
pub use ensemble::{align, AlignedCoefficients, QuantumOperation, SignalEnsemble};
pub use error::{Error, Result};
pub use qmat::{ComplexMatrix, DensityMatrix, C64};
pub use reversibility::{classify, ReversibilityVerdict, VerdictKind};
