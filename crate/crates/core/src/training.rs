//! Linear readout training: probability matrices, truncated pseudoinverse,
//! prediction, MSE and condition-number diagnostics.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::measurement::EffectivePovm;
use crate::qcore::{hs_inner, DensityMatrix, HermitianOperator, SeededRng};
use crate::sampling::{observe, outcome_probabilities, ShotConfig};

/// Column sums of a probability matrix must be within this of one.
pub const COLUMN_SUM_TOL: f64 = 1e-8;

/// `|Σ| × n_states` matrix; column `k` is the (estimated) outcome
/// distribution of state `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbabilityMatrix {
    entries: DMatrix<f64>,
    affine: bool,
}

impl ProbabilityMatrix {
    /// `affine` flags probabilities that are affine rather than linear in
    /// the input state; training then fits an explicit constant term.
    pub fn new(entries: DMatrix<f64>, affine: bool) -> Result<Self> {
        for (k, col) in entries.column_iter().enumerate() {
            let sum: f64 = col.iter().sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::InvalidArgument(format!(
                    "column {k} sums to {sum}"
                )));
            }
            if col.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidArgument(format!(
                    "column {k} has entries outside [0, 1]"
                )));
            }
        }
        Ok(Self { entries, affine })
    }

    pub fn from_columns(columns: &[Vec<f64>], affine: bool) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != rows) {
            return Err(Error::ShapeMismatch("columns have different lengths".into()));
        }
        let m = DMatrix::from_fn(rows, columns.len(), |b, k| columns[k][b]);
        Self::new(m, affine)
    }

    pub fn n_outcomes(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn is_affine(&self) -> bool {
        self.affine
    }

    /// Entries with a trailing all-ones row when affine.
    fn design(&self) -> DMatrix<f64> {
        if self.affine {
            let r = self.entries.nrows();
            self.entries.clone().insert_row(r, 1.0)
        } else {
            self.entries.clone()
        }
    }
}

/// `m × n_states` matrix of target values.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetMatrix {
    entries: DMatrix<f64>,
}

impl TargetMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("target matrix has non-finite entries".into()));
        }
        Ok(Self { entries })
    }

    /// `Tr(O_i ρ_k)` for every target/state pair.
    pub fn from_observables(observables: &[HermitianOperator], states: &[DensityMatrix]) -> Result<Self> {
        let mut m = DMatrix::zeros(observables.len(), states.len());
        for (i, o) in observables.iter().enumerate() {
            for (k, s) in states.iter().enumerate() {
                m[(i, k)] = hs_inner(o, s)?;
            }
        }
        Self::new(m)
    }

    pub fn from_row(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_row_slice(1, values.len(), values))
    }

    pub fn n_targets(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_states(&self) -> usize {
        self.entries.ncols()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }
}

/// Trained linear map `y = W p (+ b)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Readout {
    weights: DMatrix<f64>,
    bias: Option<DVector<f64>>,
}

impl Readout {
    pub fn linear(weights: DMatrix<f64>) -> Self {
        Self { weights, bias: None }
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    /// Constant term, present only for affine probability matrices.
    pub fn bias(&self) -> Option<&DVector<f64>> {
        self.bias.as_ref()
    }
}

/// Which singular values the pseudoinverse keeps.
///
/// A value survives if it is among the `max_rank` largest and at least
/// `relative_threshold · s_max`. Independently of the policy, values at the
/// floating-point noise floor (`max(rows, cols) · ε · s_max`) are dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub max_rank: Option<usize>,
    pub relative_threshold: f64,
}

impl TruncationPolicy {
    /// Keep `d²` singular values, the real dimension of the states on `C^d`.
    pub fn tomographic(input_dim: usize) -> Self {
        Self {
            max_rank: Some(input_dim * input_dim),
            relative_threshold: 0.0,
        }
    }

    /// Keep as many singular values as the Hilbert dimension.
    pub fn hilbert(input_dim: usize) -> Self {
        Self {
            max_rank: Some(input_dim),
            relative_threshold: 0.0,
        }
    }

    pub fn max_rank(max_rank: usize) -> Self {
        Self {
            max_rank: Some(max_rank),
            relative_threshold: 0.0,
        }
    }

    /// Plain Moore–Penrose pseudoinverse.
    pub fn disabled() -> Self {
        Self {
            max_rank: None,
            relative_threshold: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.relative_threshold) {
            return Err(Error::InvalidArgument(format!(
                "relative_threshold {} not in [0, 1)",
                self.relative_threshold
            )));
        }
        if self.max_rank == Some(0) {
            return Err(Error::InvalidArgument("max_rank must be positive".into()));
        }
        Ok(())
    }
}

struct TruncatedSvd {
    u: DMatrix<f64>,
    v_t: DMatrix<f64>,
    /// (original index, singular value), descending, retained only.
    kept: Vec<(usize, f64)>,
}

fn truncated_svd(a: &DMatrix<f64>, policy: &TruncationPolicy) -> TruncatedSvd {
    let (rows, cols) = a.shape();
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<(usize, f64)> = svd.singular_values.iter().copied().enumerate().collect();
    // stable: ties keep the earlier index
    order.sort_by(|x, y| y.1.total_cmp(&x.1));
    let smax = order.first().map_or(0.0, |x| x.1);
    let floor = rows.max(cols) as f64 * f64::EPSILON * smax;
    let cutoff = (policy.relative_threshold * smax).max(floor);
    let limit = policy.max_rank.unwrap_or(usize::MAX);
    let kept = order
        .into_iter()
        .filter(|&(_, s)| s > 0.0 && s >= cutoff && s > floor)
        .take(limit)
        .collect();
    TruncatedSvd { u, v_t, kept }
}

/// Singular values retained under `policy`, descending.
pub fn retained_singular_values(a: &DMatrix<f64>, policy: &TruncationPolicy) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    truncated_svd(a, policy).kept.into_iter().map(|(_, s)| s).collect()
}

/// SVD pseudoinverse keeping only the singular values allowed by `policy`.
pub fn truncated_pinv(a: &DMatrix<f64>, policy: &TruncationPolicy) -> DMatrix<f64> {
    let (rows, cols) = a.shape();
    let mut out = DMatrix::zeros(cols, rows);
    if a.is_empty() {
        return out;
    }
    let svd = truncated_svd(a, policy);
    for &(i, s) in &svd.kept {
        let v = svd.v_t.row(i).transpose();
        let u = svd.u.column(i);
        out += (v * u.transpose()) / s;
    }
    out
}

/// Exact or shot-noise-estimated probability columns for every state.
pub fn assemble(
    p: &EffectivePovm,
    states: &[DensityMatrix],
    shots: ShotConfig,
    rng: &mut SeededRng,
) -> Result<ProbabilityMatrix> {
    if let Some(s) = states.iter().find(|s| s.dim() != p.dim()) {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for POVM on {}",
            s.dim(),
            p.dim()
        )));
    }
    let columns = states
        .iter()
        .map(|s| observe(outcome_probabilities(p, s)?, shots, rng))
        .collect::<Result<Vec<_>>>()?;
    let rows = p.len();
    let m = DMatrix::from_fn(rows, columns.len(), |b, k| columns[k][b]);
    ProbabilityMatrix::new(m, p.has_offsets())
}

/// `W = Y P⁺`.
pub fn train(p: &ProbabilityMatrix, y: &TargetMatrix, policy: &TruncationPolicy) -> Result<Readout> {
    if p.n_states() != y.n_states() {
        return Err(Error::ShapeMismatch(format!(
            "{} probability columns vs {} target columns",
            p.n_states(),
            y.n_states()
        )));
    }
    if p.n_states() == 0 {
        return Err(Error::ShapeMismatch("no training states".into()));
    }
    policy.validate()?;
    let design = p.design();
    let w = y.entries() * truncated_pinv(&design, policy);
    if p.is_affine() {
        let n = p.n_outcomes();
        let bias = w.column(n).into_owned();
        let weights = w.columns(0, n).into_owned();
        Ok(Readout { weights, bias: Some(bias) })
    } else {
        Ok(Readout::linear(w))
    }
}

/// `W P`, plus the bias when present.
pub fn predict(w: &Readout, p: &ProbabilityMatrix) -> Result<TargetMatrix> {
    if w.weights.ncols() != p.n_outcomes() {
        return Err(Error::ShapeMismatch(format!(
            "readout expects {} outcomes, probability matrix has {}",
            w.weights.ncols(),
            p.n_outcomes()
        )));
    }
    let mut out = &w.weights * p.entries();
    if let Some(b) = &w.bias {
        for mut col in out.column_iter_mut() {
            col += b;
        }
    }
    TargetMatrix::new(out)
}

/// Mean over states of the squared 2-norm of the per-state error.
pub fn mse(predicted: &TargetMatrix, truth: &TargetMatrix) -> Result<f64> {
    if predicted.entries.shape() != truth.entries.shape() {
        return Err(Error::ShapeMismatch(format!(
            "{:?} vs {:?}",
            predicted.entries.shape(),
            truth.entries.shape()
        )));
    }
    let n = truth.n_states();
    if n == 0 {
        return Err(Error::ShapeMismatch("no states".into()));
    }
    Ok((&predicted.entries - &truth.entries).norm_squared() / n as f64)
}

/// `s_max / s_min` over the singular values kept by `policy`.
pub fn condition_number(p: &ProbabilityMatrix, policy: &TruncationPolicy) -> Result<f64> {
    matrix_condition_number(p.entries(), policy)
}

pub fn matrix_condition_number(a: &DMatrix<f64>, policy: &TruncationPolicy) -> Result<f64> {
    let sv = retained_singular_values(a, policy);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) => Ok(max / min),
        _ => Err(Error::ZeroMatrix),
    }
}
