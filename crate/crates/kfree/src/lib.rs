//! Statistics of k-free numbers (integers divisible by no k-th prime power)
//! in short intervals and in arithmetic progressions.
//!
//! The crate provides, as library modules plus a `kfree` command-line binary:
//!
//! * [`sieve`] — segmented bit-packed k-free sieves, counting via the Legendre
//!   identity, and windowed indicator queries;
//! * [`singular`] — certified evaluation of the singular series A_q(**h**) and
//!   the correlation sums B_j(H;q) / C_ℓ(H;q) on the product side;
//! * [`fourier`] — the same series from the exponential-sum side (admissible
//!   fractions, constrained tuple sums, majorant checks), used to cross-check
//!   the product side;
//! * [`tuples`] — exact counts of tuples of k-free values in progressions and
//!   the Möbius-split decomposition of those counts;
//! * [`moments`] — exact power sums of short-interval counts and progression
//!   residue counts, assembled into centered moments;
//! * [`verify`] — the executable acceptance checks shared by `kfree verify`
//!   and the integration test suite.
//!
//! Design notes that matter when reading the code: every irrational constant
//! is carried as a certified [`precision::Enclosure`] (value + error bound);
//! all big sums are accumulated in exact integer or fixed-point arithmetic so
//! results are deterministic and independent of the worker count; the
//! product-side and Fourier-side evaluations of C_ℓ are independent code paths
//! kept that way on purpose.

// House style: divisibility tests are written `n % p == 0` throughout — in
// number-theoretic code that form mirrors the notation p | n more directly
// than `is_multiple_of`.
#![allow(clippy::manual_is_multiple_of)]
// Tolerance validation is written `!(tol > 0.0)` on purpose: unlike
// `tol <= 0.0`, it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arith;
pub mod complex;
pub mod error;
pub mod fourier;
pub mod moments;
pub mod precision;
pub mod report;
pub mod shift;
pub mod sieve;
pub mod singular;
pub mod tuples;
pub mod verify;

pub use error::{Error, Result};

/// Exact rational parameter type for interval endpoints like H or X/q.
pub type Rat = num_rational::Ratio<i64>;
