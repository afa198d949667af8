//! Numerical laboratory for excitation transport in noisy quantum networks.
//!
//! Three groups of tools share a small dense-linear-algebra core:
//!
//! * **Transport** — Lindblad dynamics of single-excitation networks wired to
//!   an absorbing sink ([`network`], [`dynamics`], [`transport`]). Covers
//!   dephasing-assisted transport, dark-state analysis, disorder, and the
//!   seven-site FMO case study.
//! * **Chain mapping** — exact transformation of a system coupled to a star of
//!   bosonic modes into a nearest-neighbour chain via orthogonal-polynomial
//!   recurrences, with truncated-Fock propagation of both pictures to certify
//!   dynamical equivalence ([`chain`]).
//! * **Classicality** — reconstruction of dynamical maps from state snapshots
//!   and witness-based tests for random-unitary and measure-and-prepare
//!   structure ([`classicality`]).
//!
//! The [`runner`] module drives batch experiments from JSON configs and writes
//! deterministic CSV/JSON artifacts; the `exciton-lab` binary is a thin
//! wrapper around it. Each major capability also has a runnable example under
//! `examples/`.

pub mod chain;
pub mod classicality;
pub mod config;
pub mod dynamics;
pub mod error;
pub mod jsonio;
pub mod linalg;
pub mod network;
pub mod ode;
pub mod quantum;
pub mod runner;
pub mod transport;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use network::ExcitonNetwork;
pub use quantum::{ChoiMatrix, DensityMatrix, Superoperator};
