//! A numerical laboratory for Berezin quantization on the 2-sphere.
//!
//! The crate builds the finite-dimensional quantum spaces attached to the
//! sphere (ℏ = 1/k), quantizes classical observables and states through
//! Toeplitz operators, propagates Schrödinger dynamics, and measures how
//! quantum overlap quantities (fidelity, operator-norm overlap, speed
//! limits) track their classical counterparts (function dislocation,
//! support displacement, Hofer-type path length) across the semiclassical
//! regime — including experiments rescaled to shrinking phase-space scales.

pub mod axioms;
pub mod container;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod fit;
pub mod flow;
pub mod geom;
pub mod lagrangian;
pub mod linalg;
pub mod norms;
pub mod observable;
pub mod quad;
pub mod smallscale;
pub mod space;
pub mod state;
pub mod toeplitz;

pub use error::{CoreError, Result};
pub use geom::{Cap, EquatorialChart, SpherePoint};
pub use linalg::CMat;
pub use observable::Observable;
pub use space::QuantumSpace;
