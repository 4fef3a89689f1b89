//! Runtime assertions for quantum programs.
//!
//! The pipeline has three stages. A program written in the assertion-extended
//! QASM dialect is parsed and inlined into a [`FlatProgram`](circuit::FlatProgram).
//! The program is then cut into executable [`Slice`](translate::Slice)s, each
//! carrying the measurements (and uncomputation) needed to check its assertions,
//! and the slice set is reduced by assertion movement, subset canceling and
//! slice concatenation. Finally the measurement counts of every slice are checked
//! against noise-adjusted expected distributions with a power-divergence
//! goodness-of-fit test.
//!
//! A dense statevector simulator is included both as an execution backend and
//! as a test oracle.
//!
//! The crate is `no_std` and only needs `alloc`; file formats and the command
//! line front end live in the `qassert` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod circuit;
pub mod device;
pub mod optimize;
pub mod qasm;
pub mod sim;
pub mod stats;
pub mod translate;
pub mod verify;

mod rng;

pub use num_complex::Complex64;
