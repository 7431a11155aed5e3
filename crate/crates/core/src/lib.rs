//! Extrapolation auditing for random-forest permutation feature importance.
//!
//! Permuting a feature that depends on other features creates evaluation
//! points far from anything the model saw in training, which inflates
//! permutation feature importance (PFI). This crate measures that
//! extrapolation directly: every fitted tree keeps, per leaf, the in-bag
//! training rows that produced its prediction (the leaf community), and the
//! average distance from a permuted point to its leaf communities (ALCD) is
//! compared, pointwise, against the ALCD obtained by permuting an injected
//! independent Uniform(0,1) baseline feature. A paired sign-flip permutation
//! test turns the comparison into a per-feature p-value: low values flag
//! features whose PFI scores are inflated by extrapolation.
//!
//! The crate also ships the simulation generators used to exercise the test,
//! a permute-and-relearn importance oracle, a Minkowski metric family with
//! fractional exponents for high-dimensional sweeps, and a sparse PCA
//! front end that reduces wide datasets to few interpretable components
//! before auditing.

pub mod alcd;
pub mod data;
pub mod error;
pub mod forest;
pub mod importance;
pub mod simgen;
pub mod spca;
pub mod stream;
pub mod trip;

pub use error::{Error, Result};
