//! Numerical tools for Poincaré (linearizing) functions of complex polynomials:
//! Koenigs series, order of growth, area-property sums, Poincaré series of the
//! underlying polynomial, and pushforwards of quadratic differentials.

// `!(x > y)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod area;
pub mod dynamics;
pub mod error;
pub mod linearizer;
pub mod numerics;
pub mod quad_diff;
pub mod region;
pub mod series;

pub use error::{Error, Result};
pub use linearizer::PoincareMap;
pub use num_complex::Complex64;
pub use numerics::{Polynomial, PowerSeries};
pub use region::RegionSpec;
pub use series::{SeriesEstimate, Verdict};
