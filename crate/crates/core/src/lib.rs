//! Q2FMM: circuit synthesis, desk-scale simulation and hardware cost analysis
//! for Trotterized time evolution of the 2D extended Hubbard model, with the
//! long-range Coulomb term approximated by a hierarchical (fast-multipole)
//! expansion over a quadtree of lattice boxes.
//!
//! The crate is organized along the pipeline:
//!
//! - [`lattice`]: lattice geometry and Fock (occupation) states;
//! - [`hierarchy`]: the quadtree of boxes, near fields and interaction lists;
//! - [`harmonics`] / [`multipole`]: classical solid-harmonic mathematics,
//!   multipole moments, translations, pair energies and brute-force oracles;
//! - [`fixedpoint`]: signed fixed-point register formats;
//! - [`circuit`] / [`arith`]: the reversible gate IR and arithmetic blocks
//!   (adders, multipliers, constant loads, phase ladders, COPY, inversion);
//! - [`synth`]: compilation of a lattice + hierarchy + expansion order into
//!   the full Trotter-step Coulomb circuit, plus the quantized classical
//!   evaluator that predicts its phases bit-exactly;
//! - [`sim`]: basis-state propagation, statevector simulation, dense exact
//!   evolution and Trotter-error sweeps;
//! - [`cost`]: hardware models, layout, scheduling and scaling sweeps.

pub mod arith;
pub mod circuit;
pub mod cost;
pub mod fixedpoint;
pub mod harmonics;
pub mod hierarchy;
pub mod lattice;
pub mod multipole;
pub mod sim;
pub mod synth;


pub use circuit::{Circuit, Gate, Register, RegisterRole};
pub use cost::{HardwareModel, ResourceReport};
pub use fixedpoint::FixedPointFormat;
pub use hierarchy::{BoxHierarchy, BoxId, LatticeBox};
pub use lattice::{FockState, LatticeSpec};
pub use multipole::MomentSet;
pub use synth::{SynthResult, SynthesisOptions};
