//! Deterministic randomness, Gaussian tail functions, and small dense linear
//! algebra.
//!
//! Design notes:
//!
//! * Randomness flows through [`RngStream`], a `(seed, stream)` pair backed by
//!   a counter-based generator. Substreams derived from distinct ids are
//!   statistically independent and reproducible regardless of how much
//!   randomness sibling streams consume.
//! * Matrices here are at most a few dozen rows, so factorizations are plain
//!   partial-pivoting LU, Jacobi eigendecomposition, and one-sided Jacobi SVD
//!   — accuracy and determinism over throughput.
//! * [`q_function`] keeps full relative accuracy into the far tail (values
//!   below 1e-300) instead of computing `1 − Φ(x)` and losing everything to
//!   cancellation.

mod embed;
mod linalg;
mod mc;
mod qfunc;
mod rng;

pub use embed::{complex_to_real, complex_to_real_mat, real_to_complex, real_to_complex_mat};
pub use linalg::{
    cholesky, condition_number_1, eigh_jacobi, frobenius_norm, lstsq_min_norm, lu_inverse,
    lu_solve, pinv, svd_jacobi, symmetrize, symmetry_defect, ComplexMat, ComplexVec, RealMat,
    RealVec,
};
pub use mc::{hutchinson_trace, mc_mean, MeanEstimate, ProbeKind};
pub use qfunc::{erfc, normal_pdf, q_function, q_inverse};
pub use rng::RngStream;
