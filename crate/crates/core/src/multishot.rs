//! Repeated injections of the same input state.
//!
//! Feeding `n` copies of `ρ` through the two-input map makes outcome
//! probabilities linear in `ρ^⊗n`, so polynomial functionals of degree up
//! to `n` become linearly retrievable when the measurement resolves enough
//! of the symmetric space.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measurement::Povm;
use crate::qcore::{hs_inner, DensityMatrix, HermitianOperator, SeededRng};
use crate::reservoirs::{interaction_step, Reservoir};
use crate::sampling::{observe, outcome_probabilities, ShotConfig};
use crate::training::{
    condition_number, mse, predict, train, ProbabilityMatrix, Readout, TargetMatrix, TruncationPolicy,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InjectionConfig {
    pub n_injections: usize,
    pub input_dim: usize,
}

impl InjectionConfig {
    pub fn new(n_injections: usize, input_dim: usize) -> Result<Self> {
        if n_injections == 0 {
            return Err(Error::InvalidArgument("at least one injection is required".into()));
        }
        if input_dim < 2 {
            return Err(Error::InvalidArgument(format!("input dimension {input_dim} < 2")));
        }
        Ok(Self { n_injections, input_dim })
    }

    pub fn symmetric_dimension(&self) -> Result<u64> {
        symmetric_dimension(self.n_injections, self.input_dim)
    }
}

#[derive(Clone, Debug)]
pub enum TargetFunctional {
    LinearObservable(HermitianOperator),
    /// `Tr(O ρ^k)`.
    PolyMoment(HermitianOperator, u32),
    /// `Tr(e^ρ)`.
    TraceExp,
    /// `√(1 − Tr ρ²)`.
    MixednessRoot,
    /// `Tr ρ²`.
    Purity,
}

impl TargetFunctional {
    /// Short label used in result tables.
    pub fn label(&self) -> String {
        match self {
            TargetFunctional::LinearObservable(_) => "linear".into(),
            TargetFunctional::PolyMoment(_, k) => format!("poly{k}"),
            TargetFunctional::TraceExp => "trace_exp".into(),
            TargetFunctional::MixednessRoot => "mixedness_root".into(),
            TargetFunctional::Purity => "purity".into(),
        }
    }
}

/// Smallest number of injections that can make a target exactly retrievable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum InjectionBound {
    Finite(usize),
    /// Not a polynomial in `ρ`; no finite number of injections suffices.
    Unbounded,
}

/// `η ← Φ(ρ ⊗ η)`, `n` times, starting from `eta0`.
pub fn iterate_injections(r: &Reservoir, rho: &DensityMatrix, eta0: &DensityMatrix, n: usize) -> Result<DensityMatrix> {
    if !r.has_interaction_map() {
        return Err(Error::NoInteractionMap(r.kind().name()));
    }
    let mut eta = eta0.clone();
    if eta.dim() != r.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "reservoir state of dimension {} for a reservoir of dimension {}",
            eta.dim(),
            r.output_dim()
        )));
    }
    for _ in 0..n {
        eta = interaction_step(r, rho, &eta)?;
    }
    Ok(eta)
}

/// `binom(m² + n − 1, n)`, the dimension of the symmetric subspace that
/// `ρ^⊗n` ranges over.
pub fn symmetric_dimension(n: usize, m: usize) -> Result<u64> {
    if n == 0 || m < 2 {
        return Err(Error::InvalidArgument(format!("symmetric_dimension({n}, {m})")));
    }
    let overflow = || Error::Overflow(format!("symmetric dimension for n = {n}, m = {m}"));
    let a = (m as u128).checked_mul(m as u128).ok_or_else(overflow)? - 1;
    let mut acc: u128 = 1;
    for i in 1..=n as u128 {
        // acc = binom(a + i − 1, i − 1) here, so the division is exact
        acc = acc.checked_mul(a + i).ok_or_else(overflow)? / i;
    }
    u64::try_from(acc).map_err(|_| overflow())
}

fn check_dim(o: &HermitianOperator, rho: &DensityMatrix) -> Result<()> {
    if o.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "observable of dimension {} for a state of dimension {}",
            o.dim(),
            rho.dim()
        )));
    }
    Ok(())
}

pub fn evaluate_target(t: &TargetFunctional, rho: &DensityMatrix) -> Result<f64> {
    match t {
        TargetFunctional::LinearObservable(o) => hs_inner(o, rho),
        TargetFunctional::PolyMoment(o, k) => {
            check_dim(o, rho)?;
            if *k == 0 {
                return Err(Error::InvalidArgument("moment order must be at least 1".into()));
            }
            let mut power = rho.matrix().clone();
            for _ in 1..*k {
                power = &power * rho.matrix();
            }
            Ok((o.matrix() * power).trace().re)
        }
        TargetFunctional::TraceExp => Ok(rho.eigenvalues().iter().map(|l| l.exp()).sum()),
        TargetFunctional::MixednessRoot => Ok((1.0 - rho.purity()).max(0.0).sqrt()),
        TargetFunctional::Purity => Ok(rho.purity()),
    }
}

pub fn min_injections(t: &TargetFunctional) -> InjectionBound {
    match t {
        TargetFunctional::LinearObservable(_) => InjectionBound::Finite(1),
        TargetFunctional::PolyMoment(_, k) => InjectionBound::Finite(*k as usize),
        TargetFunctional::Purity => InjectionBound::Finite(2),
        TargetFunctional::TraceExp | TargetFunctional::MixednessRoot => InjectionBound::Unbounded,
    }
}

/// Counting prediction for a generic reservoir: enough injections for the
/// degree and enough outcomes to resolve the symmetric space.
pub fn feasibility(t: &TargetFunctional, n: usize, m: usize, n_outcomes: usize) -> bool {
    let degree_ok = match min_injections(t) {
        InjectionBound::Finite(k) => n >= k,
        InjectionBound::Unbounded => false,
    };
    degree_ok
        && symmetric_dimension(n, m)
            .map(|d| d <= n_outcomes as u64)
            .unwrap_or(false)
}

/// Everything about a multi-injection experiment except the states.
#[derive(Clone, Debug)]
pub struct MultishotSetup<'a> {
    pub reservoir: &'a Reservoir,
    pub eta0: &'a DensityMatrix,
    pub n_injections: usize,
    /// Measurement on the reservoir output space.
    pub povm: &'a Povm,
    pub targets: &'a [TargetFunctional],
    pub shots: ShotConfig,
    pub policy: TruncationPolicy,
}

#[derive(Clone, Debug)]
pub struct MultishotOutcome {
    pub readout: Readout,
    pub train_mse: f64,
    pub test_mse: f64,
    pub condition_number: f64,
}

impl MultishotSetup<'_> {
    /// Exact outcome probabilities after `n` injections of each state.
    pub fn exact_probabilities(&self, states: &[DensityMatrix]) -> Result<Vec<Vec<f64>>> {
        if self.povm.dim() != self.reservoir.output_dim() {
            return Err(Error::DimensionMismatch(format!(
                "POVM on dimension {} for a reservoir output of dimension {}",
                self.povm.dim(),
                self.reservoir.output_dim()
            )));
        }
        let meas = self.povm.to_effective();
        states
            .par_iter()
            .map(|rho| {
                let eta = iterate_injections(self.reservoir, rho, self.eta0, self.n_injections)?;
                outcome_probabilities(&meas, &eta)
            })
            .collect()
    }

    /// Probability matrix under the configured shots. Sampling is sequential
    /// so results do not depend on the thread count.
    pub fn probability_matrix(&self, states: &[DensityMatrix], rng: &mut SeededRng) -> Result<ProbabilityMatrix> {
        let columns = self
            .exact_probabilities(states)?
            .into_iter()
            .map(|p| observe(p, self.shots, rng))
            .collect::<Result<Vec<_>>>()?;
        ProbabilityMatrix::from_columns(&columns, false)
    }

    pub fn targets_for(&self, states: &[DensityMatrix]) -> Result<TargetMatrix> {
        let mut m = nalgebra::DMatrix::zeros(self.targets.len(), states.len());
        for (i, t) in self.targets.iter().enumerate() {
            for (k, s) in states.iter().enumerate() {
                m[(i, k)] = evaluate_target(t, s)?;
            }
        }
        TargetMatrix::new(m)
    }
}

/// Train on `train_states`, evaluate on `test_states`.
pub fn multishot_pipeline(
    setup: &MultishotSetup<'_>,
    train_states: &[DensityMatrix],
    test_states: &[DensityMatrix],
    rng: &mut SeededRng,
) -> Result<MultishotOutcome> {
    InjectionConfig::new(setup.n_injections, setup.reservoir.input_dim())?;
    if setup.targets.is_empty() {
        return Err(Error::InvalidArgument("no targets".into()));
    }
    let p_train = setup.probability_matrix(train_states, rng)?;
    let p_test = setup.probability_matrix(test_states, rng)?;
    let y_train = setup.targets_for(train_states)?;
    let y_test = setup.targets_for(test_states)?;
    let readout = train(&p_train, &y_train, &setup.policy)?;
    let train_mse = mse(&predict(&readout, &p_train)?, &y_train)?;
    let test_mse = mse(&predict(&readout, &p_test)?, &y_test)?;
    let condition_number = condition_number(&p_train, &setup.policy)?;
    Ok(MultishotOutcome {
        readout,
        train_mse,
        test_mse,
        condition_number,
    })
}
