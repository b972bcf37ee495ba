//! Exact finite-level machinery for Toeplitz arrays over residually finite
//! groups: digit expansions with carries, odometer points, cylinder-tree
//! windows, the model sets they cut out, and fiber enumeration.
//!
//! Everything here is pure and allocation-only; IO lives in the `toeplitz`
//! crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
#[macro_use]
extern crate std;

pub mod expansion;
pub mod fiber;
pub mod group;
pub mod model_set;
pub mod odometer;
pub mod window;

/// Exact rational used for measures and densities.
pub type Rational = num_rational::Ratio<i128>;

pub use expansion::{CarryRange, CarryTrace, Digits, DomainError, DomainSequence};
pub use group::{ChainError, ChainGroup, CosetLabel, GroupKind, Heis, Heisenberg, Integers, Lattice, Plane};
pub use model_set::{Membership, Symbol, SymbolicPatch};
pub use odometer::{Cylinder, Distance, OdometerPoint};
pub use window::{DigitClass, ERule, PerfParams, Window, WindowKind, WindowSpec};
