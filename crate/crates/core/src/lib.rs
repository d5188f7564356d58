//! Coupled electron–nuclear dynamics under an applied laser pulse.
//!
//! Electrons live in a nonorthogonal basis of Cartesian Gaussian orbitals and
//! couple to the field through Peierls phases, dipole matrix elements and a
//! nuclear-velocity term. Nuclei are classical and move on Ehrenfest forces.
//! The driver adds reduced-Ehrenfest wavefunction collapse at excitation
//! events and a one-way ionization sink.
//!
//! Hartree atomic units throughout: ħ = mₑ = e = 1, c = 137.035999.

pub mod adiabatic;
pub mod branching;
pub mod coupling;
pub mod driver;
pub mod error;
pub mod field;
pub mod gaussian;
pub mod geometry;
pub mod ionization;
pub mod linalg;
pub mod model_basis;
pub mod nuclei;
pub mod oracles;
pub mod propagator;
pub mod units;

pub use adiabatic::{AdiabaticSnapshot, MomentumModel, PairClass};
pub use branching::{BranchEvent, SelectionPolicy, Trigger};
pub use coupling::{CouplingFlags, CouplingMode, MatrixSet, VelocityConvention};
pub use error::{Error, Result};
pub use field::{Envelope, PulseSpec};
pub use geometry::{Atom, SystemGeometry};
pub use ionization::SinkSpec;
pub use model_basis::{OrbitalSpec, PairTable, ShellKind, Species};
pub use nuclei::RepulsionSpec;
pub use propagator::ElectronState;

pub type C64 = num_complex::Complex64;
pub type CMatrix = nalgebra::DMatrix<C64>;
pub type CVector = nalgebra::DVector<C64>;
pub type Vec3 = nalgebra::Vector3<f64>;
