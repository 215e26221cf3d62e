//! Spectral laboratory for the dissipative Timoshenko system.
//!
//! The crate evolves the first-order form `U_t + A(U) U_x + L U = 0`,
//! `U = (v, u, z, y)`, on a periodic grid, analyses the Fourier symbol of its
//! linearization, measures Besov and Chemin-Lerner norms through a dyadic
//! Littlewood-Paley filter bank and fits decay rates of norm trajectories.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolution;
pub mod grid;
pub mod harness;
pub mod io;
pub mod littlewood_paley;
pub mod model;
pub mod stats;
pub mod symbol;

pub use error::{Error, Result};
pub use grid::{Grid, Spectrum};
pub use littlewood_paley::{BesovSpec, DyadicFilterBank, TimeSeriesField};
pub use model::{Component, ModelParams, PrimalData, SigmaKind, StateField};
