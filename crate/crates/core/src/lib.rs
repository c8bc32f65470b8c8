//! Numerics for a one-dimensional high-contrast periodic medium modelled as a
//! three-edge periodic quantum graph: fibre M-matrices, Krein resolvents,
//! the homogenised δ′-type Kronig–Penney limit and its dispersion relations.

pub mod cell;
pub mod error;
pub mod fd;
pub mod grid;
pub mod harness;
pub mod kp_model;
pub mod mmatrix;
pub mod nystrom;
pub mod resolvent;
pub mod spectra;
pub mod transforms;
pub mod triple;

pub use cell::{make_cell, spectral_point, CellParams, Quasimomentum, SpectralPoint};
pub use error::{Error, Result};
pub use grid::{inner, EdgeFunction, EdgeId, StateVector};
pub use triple::{BoundaryData, MMatrix3, TripleKind};
