//! POVMs, effective POVMs, and the frame machinery used to decide which
//! observables a linear readout can reproduce.
//!
//! Hermitian operators on `C^d` are identified with vectors in `R^{d²}`
//! through the orthonormal basis of generalised Gell-Mann matrices together
//! with `I/√d`. In these coordinates the Hilbert–Schmidt inner product is
//! the Euclidean one, the frame operator is a real symmetric matrix, and
//! span and rank questions reduce to real linear algebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::qcore::{hs_inner, DensityMatrix, HermitianOperator, SeededRng, haar_isometry, PSD_TOL};
use crate::training::{truncated_pinv, Readout, TruncationPolicy};

/// Completeness tolerance `‖Σ μ_b − I‖_max`.
pub const COMPLETENESS_TOL: f64 = 1e-10;
/// Singular values below this fraction of the largest count as zero.
pub const RANK_THRESHOLD: f64 = 1e-10;
/// Relative residual below which an observable is considered in the span.
pub const SPAN_TOL: f64 = 1e-8;

fn completeness_error(elements: &[HermitianOperator], dim: usize) -> f64 {
    let mut sum = DMatrix::<Complex64>::identity(dim, dim).scale(-1.0);
    for e in elements {
        sum += e.matrix();
    }
    sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn check_elements(elements: &[HermitianOperator]) -> Result<usize> {
    let dim = elements
        .first()
        .map(HermitianOperator::dim)
        .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
    if let Some(b) = elements.iter().position(|e| e.dim() != dim) {
        return Err(Error::InvalidPovm(format!(
            "element {b} has dimension {}, expected {dim}",
            elements[b].dim()
        )));
    }
    for (b, e) in elements.iter().enumerate() {
        let min = e.min_eigenvalue();
        if min < PSD_TOL {
            return Err(Error::InvalidPovm(format!(
                "element {b} has negative eigenvalue {min:.3e}"
            )));
        }
    }
    Ok(dim)
}

/// A measurement `{μ_b}`: positive operators summing to the identity.
#[derive(Clone, Debug)]
pub struct Povm {
    dim: usize,
    elements: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(elements: Vec<HermitianOperator>) -> Result<Self> {
        let dim = check_elements(&elements)?;
        let err = completeness_error(&elements, dim);
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!(
                "elements sum to identity only within {err:.3e}"
            )));
        }
        Ok(Self { dim, elements })
    }

    pub fn computational_basis(d: usize) -> Self {
        Self {
            dim: d,
            elements: (0..d).map(|k| HermitianOperator::projector(d, k)).collect(),
        }
    }

    /// Symmetric informationally complete qubit POVM `(I + n_k·σ)/4` with
    /// the `n_k` at the vertices of a regular tetrahedron.
    pub fn tetrahedral() -> Self {
        let s2 = 2f64.sqrt();
        let vertices = [
            [0.0, 0.0, 1.0],
            [2.0 * s2 / 3.0, 0.0, -1.0 / 3.0],
            [-s2 / 3.0, (2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
            [-s2 / 3.0, -(2.0f64 / 3.0).sqrt(), -1.0 / 3.0],
        ];
        let elements = vertices
            .iter()
            .map(|&n| {
                let rho = DensityMatrix::from_bloch(n).expect("unit Bloch vector");
                HermitianOperator::from_hermitian_part(&rho.into_matrix().scale(0.5))
                    .expect("square")
            })
            .collect();
        Self { dim: 2, elements }
    }

    /// Rank-one POVM `μ_j = V†|j⟩⟨j|V` from a Haar-random isometry
    /// `V: C^d → C^n`.
    pub fn random_rank_one(d: usize, n_outcomes: usize, rng: &mut SeededRng) -> Result<Self> {
        let v = haar_isometry(d, n_outcomes, rng)?;
        let elements = (0..n_outcomes)
            .map(|j| {
                let row = v.row(j);
                HermitianOperator::from_hermitian_part(&(row.adjoint() * row))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { dim: d, elements })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    /// The same operators viewed as an effective POVM with no offsets.
    pub fn to_effective(&self) -> EffectivePovm {
        EffectivePovm {
            dim: self.dim,
            offsets: vec![0.0; self.elements.len()],
            elements: self.elements.clone(),
        }
    }
}

pub fn computational_basis_povm(d: usize) -> Povm {
    Povm::computational_basis(d)
}

/// Measurement pulled back to the input space, `p_b(ρ) = ⟨μ̃_b, ρ⟩ + c_b`.
///
/// The offsets `c_b` are zero except for reservoirs whose probabilities are
/// affine in `ρ`. On unit-trace inputs each outcome is equivalently measured
/// by the completed element `μ̃_b + c_b I`; the completed elements form a
/// genuine POVM.
#[derive(Clone, Debug)]
pub struct EffectivePovm {
    dim: usize,
    elements: Vec<HermitianOperator>,
    offsets: Vec<f64>,
}

impl EffectivePovm {
    pub fn new(elements: Vec<HermitianOperator>, offsets: Vec<f64>) -> Result<Self> {
        if elements.len() != offsets.len() {
            return Err(Error::InvalidPovm(format!(
                "{} elements but {} offsets",
                elements.len(),
                offsets.len()
            )));
        }
        let dim = elements
            .first()
            .map(HermitianOperator::dim)
            .ok_or_else(|| Error::InvalidPovm("no elements".into()))?;
        let candidate = Self::unchecked(elements, offsets);
        let completed = candidate.completed_elements();
        check_elements(&completed)?;
        let err = completeness_error(&completed, dim);
        if err > COMPLETENESS_TOL {
            return Err(Error::InvalidPovm(format!(
                "outcome probabilities sum to one only within {err:.3e}"
            )));
        }
        Ok(candidate)
    }

    pub fn linear(elements: Vec<HermitianOperator>) -> Result<Self> {
        let n = elements.len();
        Self::new(elements, vec![0.0; n])
    }

    /// Skips validation. Intended for tests of downstream error paths.
    pub fn unchecked(elements: Vec<HermitianOperator>, offsets: Vec<f64>) -> Self {
        let dim = elements.first().map(HermitianOperator::dim).unwrap_or(0);
        Self { dim, elements, offsets }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[HermitianOperator] {
        &self.elements
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn has_offsets(&self) -> bool {
        self.offsets.iter().any(|&c| c != 0.0)
    }

    /// `μ̃_b + c_b I` for every outcome.
    pub fn completed_elements(&self) -> Vec<HermitianOperator> {
        self.elements
            .iter()
            .zip(&self.offsets)
            .map(|(e, &c)| {
                if c == 0.0 {
                    e.clone()
                } else {
                    e + &HermitianOperator::identity(self.dim).scale(c)
                }
            })
            .collect()
    }

    /// Splits outcome `b` into two outcomes carrying half its weight each.
    pub fn split_outcome(&self, b: usize) -> Result<Self> {
        if b >= self.len() {
            return Err(Error::InvalidArgument(format!("no outcome {b}")));
        }
        let mut elements = self.elements.clone();
        let mut offsets = self.offsets.clone();
        elements[b] = elements[b].scale(0.5);
        offsets[b] *= 0.5;
        elements.push(elements[b].clone());
        offsets.push(offsets[b]);
        Self::new(elements, offsets)
    }
}

/// Gell-Mann coordinates of `x` (its Hermitian part, for non-Hermitian input).
///
/// Ordering: `I/√d`, then the symmetric and antisymmetric off-diagonal
/// generators for each pair `j < k`, then the `d − 1` diagonal generators.
pub fn vectorize(x: &DMatrix<Complex64>) -> DVector<f64> {
    let d = x.nrows();
    let mut v = Vec::with_capacity(d * d);
    let s2 = std::f64::consts::SQRT_2;
    v.push(x.trace().re / (d as f64).sqrt());
    for j in 0..d {
        for k in (j + 1)..d {
            v.push((x[(j, k)] + x[(k, j)]).re / s2);
            v.push((Complex64::i() * (x[(j, k)] - x[(k, j)])).re / s2);
        }
    }
    for l in 1..d {
        let head: f64 = (0..l).map(|j| x[(j, j)].re).sum();
        let norm = ((l * (l + 1)) as f64).sqrt();
        v.push((head - l as f64 * x[(l, l)].re) / norm);
    }
    DVector::from_vec(v)
}

/// Inverse of [`vectorize`].
pub fn devectorize(v: &DVector<f64>, d: usize) -> Result<HermitianOperator> {
    if v.len() != d * d {
        return Err(Error::DimensionMismatch(format!(
            "vector of length {} does not describe a {d}x{d} operator",
            v.len()
        )));
    }
    let mut m = DMatrix::<Complex64>::zeros(d, d);
    let s2 = std::f64::consts::SQRT_2;
    let mut idx = 0;
    let id = v[idx] / (d as f64).sqrt();
    idx += 1;
    for j in 0..d {
        m[(j, j)] += Complex64::new(id, 0.0);
    }
    for j in 0..d {
        for k in (j + 1)..d {
            let sym = v[idx] / s2;
            let anti = v[idx + 1] / s2;
            idx += 2;
            // symmetric: (E_jk + E_kj), antisymmetric: (-i E_jk + i E_kj)
            m[(j, k)] += Complex64::new(sym, -anti);
            m[(k, j)] += Complex64::new(sym, anti);
        }
    }
    for l in 1..d {
        let c = v[idx] / ((l * (l + 1)) as f64).sqrt();
        idx += 1;
        for j in 0..l {
            m[(j, j)] += Complex64::new(c, 0.0);
        }
        m[(l, l)] -= Complex64::new(l as f64 * c, 0.0);
    }
    HermitianOperator::new(m)
}

/// Column `b` holds the coordinates of operator `b`.
fn coordinate_matrix(ops: &[HermitianOperator], d: usize) -> DMatrix<f64> {
    let cols: Vec<DVector<f64>> = ops.iter().map(|o| vectorize(o.matrix())).collect();
    if cols.is_empty() {
        return DMatrix::zeros(d * d, 0);
    }
    DMatrix::from_columns(&cols)
}

fn relative_rank(a: &DMatrix<f64>, threshold: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s >= threshold * smax).count()
}

/// Dimension of the real span of the (completed) effective elements.
/// Informationally complete iff this equals `dim²`.
pub fn ic_rank(p: &EffectivePovm) -> usize {
    relative_rank(&coordinate_matrix(&p.completed_elements(), p.dim()), RANK_THRESHOLD)
}

pub fn is_informationally_complete(p: &EffectivePovm) -> bool {
    ic_rank(p) == p.dim() * p.dim()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpanCheck {
    pub in_span: bool,
    /// Hilbert–Schmidt norm of `O − Π(O)`.
    pub residual: f64,
}

/// Least-squares projection of `o` onto `span_R{μ̃_b}` (plus `I` when the
/// POVM carries offsets).
pub fn observable_in_span(p: &EffectivePovm, o: &HermitianOperator) -> Result<SpanCheck> {
    if o.dim() != p.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable has dimension {}, POVM acts on {}",
            o.dim(),
            p.dim()
        )));
    }
    let mut generators = p.elements().to_vec();
    if p.has_offsets() {
        generators.push(HermitianOperator::identity(p.dim()));
    }
    let g = coordinate_matrix(&generators, p.dim());
    let target = vectorize(o.matrix());
    let policy = TruncationPolicy {
        max_rank: None,
        relative_threshold: RANK_THRESHOLD,
    };
    let coeffs = truncated_pinv(&g, &policy) * &target;
    let residual = (&target - &g * coeffs).norm();
    let scale = target.norm();
    Ok(SpanCheck {
        in_span: residual <= SPAN_TOL * scale,
        residual,
    })
}

/// `S(X) = Σ_k μ̃_k ⟨μ̃_k, X⟩` as a real `d² × d²` matrix in Gell-Mann
/// coordinates.
#[derive(Clone, Debug)]
pub struct FrameOperator {
    dim: usize,
    matrix: DMatrix<f64>,
}

impl FrameOperator {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rank(&self) -> usize {
        relative_rank(&self.matrix, RANK_THRESHOLD * RANK_THRESHOLD)
    }

    pub fn apply(&self, x: &HermitianOperator) -> Result<HermitianOperator> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "frame operator on dimension {}, operator has {}",
                self.dim,
                x.dim()
            )));
        }
        devectorize(&(&self.matrix * vectorize(x.matrix())), self.dim)
    }
}

pub fn frame_operator(p: &EffectivePovm) -> FrameOperator {
    let g = coordinate_matrix(&p.completed_elements(), p.dim());
    FrameOperator {
        dim: p.dim(),
        matrix: &g * g.transpose(),
    }
}

/// Operators `μ̃*_k` with `X = Σ_k ⟨μ̃*_k, X⟩ μ̃_k = Σ_k ⟨μ̃_k, X⟩ μ̃*_k`.
#[derive(Clone, Debug)]
pub struct DualFrame {
    dim: usize,
    duals: Vec<HermitianOperator>,
}

impl DualFrame {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn duals(&self) -> &[HermitianOperator] {
        &self.duals
    }

    /// `Σ_k ⟨μ̃*_k, X⟩ μ̃_k`, with `μ̃_k` the completed elements of `p`.
    pub fn reconstruct(&self, p: &EffectivePovm, x: &HermitianOperator) -> Result<HermitianOperator> {
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for (dual, elem) in self.duals.iter().zip(p.completed_elements()) {
            acc += elem.matrix().scale(hs_inner(dual, x)?);
        }
        HermitianOperator::from_hermitian_part(&acc)
    }

    /// `Σ_k ⟨μ̃_k, X⟩ μ̃*_k`.
    pub fn reconstruct_dual(&self, p: &EffectivePovm, x: &HermitianOperator) -> Result<HermitianOperator> {
        let mut acc = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for (dual, elem) in self.duals.iter().zip(p.completed_elements()) {
            acc += dual.matrix().scale(hs_inner(&elem, x)?);
        }
        HermitianOperator::from_hermitian_part(&acc)
    }
}

/// `μ̃*_k = S⁻¹(μ̃_k)`. Fails unless `p` is informationally complete.
pub fn canonical_dual_frame(p: &EffectivePovm) -> Result<DualFrame> {
    let d = p.dim();
    let required = d * d;
    let g = coordinate_matrix(&p.completed_elements(), d);
    let rank = relative_rank(&g, RANK_THRESHOLD);
    if rank < required {
        return Err(Error::FrameOperatorSingular { rank, required });
    }
    let s = &g * g.transpose();
    let chol = s
        .cholesky()
        .ok_or(Error::FrameOperatorSingular { rank, required })?;
    let dual_coords = chol.solve(&g);
    let duals = dual_coords
        .column_iter()
        .map(|c| devectorize(&c.into_owned(), d).and_then(|h| HermitianOperator::from_hermitian_part(h.matrix())))
        .collect::<Result<Vec<_>>>()?;
    Ok(DualFrame { dim: d, duals })
}

/// Readout `W[i][k] = ⟨O_i, μ̃*_k⟩`, exact on every state.
pub fn exact_readout_from_duals(p: &EffectivePovm, targets: &[HermitianOperator]) -> Result<Readout> {
    let frame = canonical_dual_frame(p)?;
    if let Some(t) = targets.iter().find(|t| t.dim() != p.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "target has dimension {}, POVM acts on {}",
            t.dim(),
            p.dim()
        )));
    }
    let mut w = DMatrix::zeros(targets.len(), p.len());
    for (i, o) in targets.iter().enumerate() {
        for (k, dual) in frame.duals().iter().enumerate() {
            w[(i, k)] = hs_inner(o, dual)?;
        }
    }
    Ok(Readout::linear(w))
}
