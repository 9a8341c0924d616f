//! Dense complex linear algebra and the quantum objects built on it.
//!
//! Operators are `nalgebra` matrices of `Complex64`. Tensor products follow
//! the usual convention that the first factor carries the most significant
//! index, so `kron(a, b)[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)]`.

mod ops;
mod random;
mod types;

pub use ops::{herm_expm, hs_inner, kron, partial_trace};
pub use random::{haar_isometry, haar_unitary, random_density_matrix, random_pure_state, SeededRng};
pub use types::{
    hermitian_deviation, identity, AsOperator, pauli_x, pauli_y, pauli_z, projector, ComplexMatrix,
    DensityMatrix, HermitianOperator, DENSITY_TRACE_TOL, HERMITIAN_TOL, PSD_TOL,
};

pub use num_complex::Complex64;

/// Shorthand for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "max_abs_diff: shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}
