//! Quantum particles in bounded regions whose boundary carries detectors.
//!
//! The crate discretises intervals and rectangles with traces chosen so that
//! the boundary quadruple Green identity holds to rounding error, builds every
//! dissipative extension from a boundary contraction `Φ`, evolves states with a
//! Crank–Nicolson step that is an exact contraction, and assembles the
//! detection-time density and POVM from the exit-space map
//! `√(1 − Φ†Φ) G₋`.

pub mod detection;
pub mod dtn;
pub mod error;
pub mod exec;
pub mod extensions;
pub mod grid;
pub mod numerics;
pub mod propagator;
pub mod quadruple;

pub use error::{Error, Result};
pub use exec::Execution;
pub use numerics::C64;
