//! Compressed sensing toolkit for large tactile arrays.
//!
//! The pipeline runs in four stages:
//!
//! * [`sim`] produces ground-truth tactile frames from union-of-spheres
//!   objects pressed by a planar taxel array, and [`frame`] turns them into
//!   noisy, clipped sensor frames.
//! * [`measurement`] compresses sensor frames with hardware-friendly ±1
//!   operators (scrambled block Hadamard and separable Hadamard).
//! * [`recon`] recovers full-resolution frames by basis pursuit denoising
//!   (FISTA) in one of the orthonormal transforms from [`basis`].
//! * [`learning`] classifies objects directly from compressed observations
//!   with pairwise linear SVMs arranged as a decision DAG.
//!
//! Batch work (dataset generation, Gram matrices, pairwise training) is
//! data-parallel through rayon when the `parallel` feature is enabled and
//! runs sequentially otherwise.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod basis;
pub mod error;
pub mod frame;
pub mod learning;
pub mod linop;
pub mod measurement;
pub mod par;
pub mod recon;
pub mod rng;
pub mod sim;
pub mod tacf;

pub use error::{Error, Result};
pub use frame::{TactileFrame, FORCE_MAX};
