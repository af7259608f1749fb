//! Restricted isometry failure certificates for row-subsampled Fourier matrices over
//! F_p^n.
//!
//! A sampled row sequence that fails to *shatter* a `d`-dimensional subspace `V`
//! (its rows miss one of the `p^d` inner-product signatures against `V`) annihilates
//! an explicit `p^d`-sparse vector, so the sampled matrix cannot satisfy the
//! restricted isometry property at sparsity `p^d` for any `ε`. This crate provides:
//!
//! - [`field`]: exact F_p linear algebra, canonical subspaces and signatures;
//! - [`shattering`]: the shattering test and kernel certificates;
//! - [`fourier`]: dense Fourier submatrices and brute-force RIP constants;
//! - [`bounds`]: closed-form probability bounds and exact combinatorial oracles;
//! - [`family`]: pairwise-low-intersection subspace families;
//! - [`harness`]: reproducible Monte Carlo experiments and result emission;
//! - [`cli`]: the `riplb` command line.

pub mod bounds;
pub mod cli;
pub mod error;
pub mod family;
pub mod field;
pub mod fourier;
pub mod harness;
pub mod shattering;

pub use error::{Error, Result};
pub use field::{FieldParams, FpVector, Signature, Subspace};
pub use shattering::{SampleSeq, ShatterReport, SparseCertificate};
