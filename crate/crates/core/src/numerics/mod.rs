//! Dense matrices, pseudoinverse / least squares, and seeded random streams.

mod linalg;
mod matrix;
mod rng;

pub use linalg::{pseudoinverse, pseudoinverse_with_cutoff, solve_least_squares, PINV_RELATIVE_CUTOFF};
pub use matrix::Matrix;
pub use rng::{uniform, RngStream};
