//! Atomistic lattice dynamics with damping and inertia, the linear
//! elastodynamic continuum limit, and tools to measure how lattice solutions
//! approach the continuum solution as the lattice is refined.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod cell_energy;
pub mod continuum;
pub mod convergence;
pub mod discrete_ops;
pub mod dynamics;
pub mod error;
pub mod fields;
pub mod lattice;
pub mod quadrature;
pub mod smooth;

pub use error::{Error, Result};
pub use fields::{CellField, Grid, GridField, GridLayout, LatticeField};
pub use lattice::{BoxDomain, Lattice, LatticeSpec};
