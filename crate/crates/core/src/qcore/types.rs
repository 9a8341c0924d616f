use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;

/// Max-norm tolerance on `M - M†` for Hermitian operators.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Allowed deviation of a density matrix trace from one.
pub const DENSITY_TRACE_TOL: f64 = 1e-10;
/// Most negative eigenvalue still considered positive semidefinite.
pub const PSD_TOL: f64 = -1e-10;

/// `max |M - M†|`, or infinity for non-square input.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut dev = 0.0f64;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    (m + m.adjoint()).scale(0.5)
}

fn check_finite(m: &ComplexMatrix) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidArgument("matrix has non-finite entries".into()))
    }
}

pub fn identity(d: usize) -> ComplexMatrix {
    ComplexMatrix::identity(d, d)
}

/// `|k⟩⟨k|` in dimension `d`.
pub fn projector(d: usize, k: usize) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(d, d);
    m[(k, k)] = Complex64::new(1.0, 0.0);
    m
}

pub fn pauli_x() -> ComplexMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    ComplexMatrix::from_row_slice(2, 2, &[o, l, l, o])
}

pub fn pauli_y() -> ComplexMatrix {
    let o = Complex64::new(0.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    ComplexMatrix::from_row_slice(2, 2, &[o, -i, i, o])
}

pub fn pauli_z() -> ComplexMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    ComplexMatrix::from_row_slice(2, 2, &[l, o, o, -l])
}

/// A Hermitian matrix, checked to [`HERMITIAN_TOL`] on construction.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    matrix: ComplexMatrix,
}

impl HermitianOperator {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_finite(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self { matrix })
    }

    /// Takes `(M + M†)/2`. Used for operators that are Hermitian in exact
    /// arithmetic but carry round-off from products of unitaries.
    pub fn from_hermitian_part(matrix: &ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "expected square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        check_finite(matrix)?;
        Ok(Self {
            matrix: hermitian_part(matrix),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: identity(d) }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            matrix: ComplexMatrix::zeros(d, d),
        }
    }

    pub fn pauli_x() -> Self {
        Self { matrix: pauli_x() }
    }

    pub fn pauli_y() -> Self {
        Self { matrix: pauli_y() }
    }

    pub fn pauli_z() -> Self {
        Self { matrix: pauli_z() }
    }

    pub fn projector(d: usize, k: usize) -> Self {
        Self {
            matrix: projector(d, k),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            matrix: self.matrix.scale(s),
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }
}

impl std::ops::Add for &HermitianOperator {
    type Output = HermitianOperator;
    fn add(self, rhs: Self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

/// Unit-trace positive semidefinite Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        check_finite(&matrix)?;
        let dev = hermitian_deviation(&matrix);
        if dev > HERMITIAN_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {dev:.3e})"
            )));
        }
        Self::validated(matrix)
    }

    /// Symmetrises before validating trace and positivity.
    pub fn from_hermitian_part(matrix: &ComplexMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidDensityMatrix("not square".into()));
        }
        check_finite(matrix)?;
        Self::validated(hermitian_part(matrix))
    }

    fn validated(matrix: ComplexMatrix) -> Result<Self> {
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > DENSITY_TRACE_TOL || tr.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvalidDensityMatrix(format!("trace {tr} is not 1")));
        }
        let min_ev = matrix
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_ev < PSD_TOL {
            return Err(Error::InvalidDensityMatrix(format!(
                "negative eigenvalue {min_ev:.3e}"
            )));
        }
        Ok(Self { matrix })
    }

    /// `|ψ⟩⟨ψ|` for a (not necessarily normalised) nonzero vector.
    pub fn pure(psi: &DVector<Complex64>) -> Result<Self> {
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidArgument("state vector has zero norm".into()));
        }
        let v = psi.unscale(norm);
        Self::from_hermitian_part(&(&v * v.adjoint()))
    }

    pub fn basis_state(d: usize, k: usize) -> Self {
        Self {
            matrix: projector(d, k),
        }
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            matrix: identity(d).unscale(d as f64),
        }
    }

    /// Qubit state `(I + r·σ)/2`; requires `|r| ≤ 1`.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len2: f64 = r.iter().map(|x| x * x).sum();
        if len2 > 1.0 + 1e-12 {
            return Err(Error::InvalidDensityMatrix(format!(
                "Bloch vector length {} exceeds 1",
                len2.sqrt()
            )));
        }
        let m = (identity(2) + pauli_x().scale(r[0]) + pauli_y().scale(r[1]) + pauli_z().scale(r[2]))
            .scale(0.5);
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    /// `Tr(ρ²)`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Number of eigenvalues above `1e-12`.
    pub fn rank(&self) -> usize {
        self.eigenvalues().into_iter().filter(|&l| l > 1e-12).count()
    }

    /// Convex combination `α·self + (1-α)·other`.
    pub fn mix(&self, other: &DensityMatrix, alpha: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot mix dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Self::from_hermitian_part(&(self.matrix.scale(alpha) + other.matrix.scale(1.0 - alpha)))
    }
}

/// Borrow the underlying matrix of any operator-like value.
pub trait AsOperator {
    fn as_operator(&self) -> &ComplexMatrix;
}

impl AsOperator for ComplexMatrix {
    fn as_operator(&self) -> &ComplexMatrix {
        self
    }
}

impl AsOperator for HermitianOperator {
    fn as_operator(&self) -> &ComplexMatrix {
        &self.matrix
    }
}

impl AsOperator for DensityMatrix {
    fn as_operator(&self) -> &ComplexMatrix {
        &self.matrix
    }
}
