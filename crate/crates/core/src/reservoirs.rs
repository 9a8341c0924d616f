//! Reservoir dynamics and their effective measurements.
//!
//! Every reservoir maps an input state on `C^m` to a state on the measured
//! output space. The adjoint pulls an output POVM back to an effective POVM
//! on the input.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::measurement::{EffectivePovm, Povm};
use crate::qcore::{
    c64, haar_isometry, haar_unitary, herm_expm, hermitian_deviation, identity, kron,
    partial_trace, ComplexMatrix, Complex64, DensityMatrix, HermitianOperator, SeededRng,
};

const UNITARY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ReservoirKind {
    Isometry,
    EmbeddedUnitary,
    SpinNetwork,
    /// Haar-random unitary on input ⊗ reservoir with a fixed reservoir state.
    CoupledUnitary,
}

impl ReservoirKind {
    pub fn name(self) -> &'static str {
        match self {
            ReservoirKind::Isometry => "isometry",
            ReservoirKind::EmbeddedUnitary => "embedded_unitary",
            ReservoirKind::SpinNetwork => "spin_network",
            ReservoirKind::CoupledUnitary => "coupled_unitary",
        }
    }
}

#[derive(Clone, Debug)]
enum Dynamics {
    /// `V : C^m → C^m ⊗ C^n`; the first factor is discarded.
    Isometry { v: ComplexMatrix },
    /// `U` acts on `C^m ⊕ C^r`; the input block carries weight `1 − w`.
    EmbeddedUnitary {
        u: ComplexMatrix,
        eta0: DensityMatrix,
        input_weight: f64,
    },
    /// `U` acts on input ⊗ reservoir; the input factor is discarded.
    Coupled {
        u: ComplexMatrix,
        eta0: DensityMatrix,
        hamiltonian: Option<(HermitianOperator, f64)>,
    },
}

#[derive(Clone, Debug)]
pub struct Reservoir {
    kind: ReservoirKind,
    input_dim: usize,
    output_dim: usize,
    dynamics: Dynamics,
}

fn check_unitary(u: &ComplexMatrix, what: &str) -> Result<()> {
    let gram = u.adjoint() * u;
    let err = (gram - identity(u.ncols())).iter().map(|z| z.norm()).fold(0.0, f64::max);
    if err > UNITARY_TOL {
        return Err(Error::InvalidArgument(format!("{what} deviates from an isometry by {err:.3e}")));
    }
    Ok(())
}

impl Reservoir {
    /// `v` must be `(m·n) × m` with orthonormal columns; the output space is `C^n`.
    pub fn from_isometry(v: ComplexMatrix) -> Result<Self> {
        let m = v.ncols();
        if m == 0 || !v.nrows().is_multiple_of(m) {
            return Err(Error::DimensionMismatch(format!(
                "isometry of shape {}x{} does not map C^m into C^m ⊗ C^n",
                v.nrows(),
                m
            )));
        }
        check_unitary(&v, "V")?;
        Ok(Self {
            kind: ReservoirKind::Isometry,
            input_dim: m,
            output_dim: v.nrows() / m,
            dynamics: Dynamics::Isometry { v },
        })
    }

    /// `u` acts on `C^{m+r}` with `r = eta0.dim()`; the input block is
    /// `(1 − input_weight)ρ` and the reservoir block `input_weight·η₀`.
    pub fn from_embedded_unitary(u: ComplexMatrix, eta0: DensityMatrix, input_weight: f64) -> Result<Self> {
        let r = eta0.dim();
        if u.nrows() != u.ncols() || u.nrows() <= r {
            return Err(Error::DimensionMismatch(format!(
                "unitary of dimension {} cannot embed a reservoir of dimension {r}",
                u.nrows()
            )));
        }
        if !(input_weight > 0.0 && input_weight < 1.0) {
            return Err(Error::InvalidArgument(format!("input_weight {input_weight} not in (0, 1)")));
        }
        check_unitary(&u, "U")?;
        Ok(Self {
            kind: ReservoirKind::EmbeddedUnitary,
            input_dim: u.nrows() - r,
            output_dim: u.nrows(),
            dynamics: Dynamics::EmbeddedUnitary { u, eta0, input_weight },
        })
    }

    /// `u` acts on `C^m ⊗ C^r` with `r = eta0.dim()`.
    pub fn from_coupled_unitary(u: ComplexMatrix, eta0: DensityMatrix) -> Result<Self> {
        let r = eta0.dim();
        if u.nrows() != u.ncols() || !u.nrows().is_multiple_of(r) || u.nrows() / r < 1 {
            return Err(Error::DimensionMismatch(format!(
                "unitary of dimension {} does not act on C^m ⊗ C^{r}",
                u.nrows()
            )));
        }
        check_unitary(&u, "U")?;
        Ok(Self {
            kind: ReservoirKind::CoupledUnitary,
            input_dim: u.nrows() / r,
            output_dim: r,
            dynamics: Dynamics::Coupled { u, eta0, hamiltonian: None },
        })
    }

    /// Qubit 0 is the input; `eta0` lives on the remaining qubits.
    pub fn from_hamiltonian(h: HermitianOperator, t: f64, eta0: DensityMatrix) -> Result<Self> {
        let r = eta0.dim();
        if h.dim() != 2 * r {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian of dimension {} for one input qubit and a reservoir of dimension {r}",
                h.dim()
            )));
        }
        let u = herm_expm(&h, c64(0.0, -t));
        Ok(Self {
            kind: ReservoirKind::SpinNetwork,
            input_dim: 2,
            output_dim: r,
            dynamics: Dynamics::Coupled { u, eta0, hamiltonian: Some((h, t)) },
        })
    }

    pub fn kind(&self) -> ReservoirKind {
        self.kind
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Dimension of the measured output space.
    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    /// Reservoir state fed alongside the input, if the dynamics has one.
    pub fn eta0(&self) -> Option<&DensityMatrix> {
        match &self.dynamics {
            Dynamics::Isometry { .. } => None,
            Dynamics::EmbeddedUnitary { eta0, .. } | Dynamics::Coupled { eta0, .. } => Some(eta0),
        }
    }

    /// Hamiltonian and evolution time for spin networks.
    pub fn hamiltonian(&self) -> Option<(&HermitianOperator, f64)> {
        match &self.dynamics {
            Dynamics::Coupled { hamiltonian: Some((h, t)), .. } => Some((h, *t)),
            _ => None,
        }
    }

    /// Whether [`interaction_step`] is defined for this reservoir.
    pub fn has_interaction_map(&self) -> bool {
        !matches!(self.dynamics, Dynamics::EmbeddedUnitary { .. })
    }

    /// Unitary of the dynamics; the isometry for `Isometry` reservoirs.
    pub fn unitary(&self) -> &ComplexMatrix {
        match &self.dynamics {
            Dynamics::Isometry { v } => v,
            Dynamics::EmbeddedUnitary { u, .. } | Dynamics::Coupled { u, .. } => u,
        }
    }
}

pub fn build_isometry_reservoir(input_dim: usize, n_outcomes: usize, rng: &mut SeededRng) -> Result<Reservoir> {
    if input_dim == 0 || n_outcomes == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    Reservoir::from_isometry(haar_isometry(input_dim, input_dim * n_outcomes, rng)?)
}

/// Haar unitary on `C^{m+r}`, reservoir started in `|0⟩`.
pub fn build_embedded_unitary_reservoir(
    input_dim: usize,
    reservoir_dim: usize,
    input_weight: f64,
    rng: &mut SeededRng,
) -> Result<Reservoir> {
    if input_dim == 0 || reservoir_dim == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let u = haar_unitary(input_dim + reservoir_dim, rng);
    Reservoir::from_embedded_unitary(u, DensityMatrix::basis_state(reservoir_dim, 0), input_weight)
}

/// Haar unitary on `C^m ⊗ C^r`, reservoir started in `|0⟩`.
pub fn build_coupled_unitary_reservoir(input_dim: usize, reservoir_dim: usize, rng: &mut SeededRng) -> Result<Reservoir> {
    if input_dim == 0 || reservoir_dim == 0 {
        return Err(Error::InvalidArgument("dimensions must be positive".into()));
    }
    let u = haar_unitary(input_dim * reservoir_dim, rng);
    Reservoir::from_coupled_unitary(u, DensityMatrix::basis_state(reservoir_dim, 0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Topology {
    /// `0 – 1 – 2 – …`, input at the end of the chain.
    Chain,
    /// Input coupled to reservoir qubit 1; all reservoir pairs coupled.
    FullyConnectedSingleInput,
    /// Every pair coupled.
    FullyConnectedAllInput,
}

impl Topology {
    /// Unordered edges `(i, j)`, `i < j`, over `n_qubits` sites (site 0 is the input).
    pub fn edges(self, n_qubits: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        match self {
            Topology::Chain => out.extend((1..n_qubits).map(|j| (j - 1, j))),
            Topology::FullyConnectedSingleInput => {
                if n_qubits > 1 {
                    out.push((0, 1));
                }
                for i in 1..n_qubits {
                    out.extend(((i + 1)..n_qubits).map(|j| (i, j)));
                }
            }
            Topology::FullyConnectedAllInput => {
                for i in 0..n_qubits {
                    out.extend(((i + 1)..n_qubits).map(|j| (i, j)));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct SpinNetworkSpec {
    pub n_reservoir_qubits: usize,
    pub topology: Topology,
    /// Symmetric `(N_R+1) × (N_R+1)`; drawn from `coupling_range` when absent.
    pub couplings: Option<DMatrix<f64>>,
    /// One per reservoir qubit; drawn from `driving_range` when absent.
    pub drivings: Option<Vec<f64>>,
    pub time: f64,
    pub coupling_range: (f64, f64),
    pub driving_range: (f64, f64),
    /// Defaults to `|0…0⟩`.
    pub eta0: Option<DensityMatrix>,
}

impl SpinNetworkSpec {
    pub fn new(n_reservoir_qubits: usize, topology: Topology) -> Self {
        Self {
            n_reservoir_qubits,
            topology,
            couplings: None,
            drivings: None,
            time: 1.0,
            coupling_range: (-1.0, 1.0),
            driving_range: (0.0, 1.0),
            eta0: None,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_reservoir_qubits + 1
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_qubits();
        if self.n_reservoir_qubits == 0 {
            return Err(Error::InvalidArgument("need at least one reservoir qubit".into()));
        }
        if n > 14 {
            return Err(Error::Overflow(format!("{n} qubits exceed the dense simulation limit")));
        }
        if !self.time.is_finite() {
            return Err(Error::InvalidArgument("evolution time must be finite".into()));
        }
        for (name, (lo, hi)) in [("coupling_range", self.coupling_range), ("driving_range", self.driving_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::InvalidArgument(format!("{name} [{lo}, {hi}] is not an interval")));
            }
        }
        if let Some(j) = &self.couplings {
            if j.shape() != (n, n) {
                return Err(Error::DimensionMismatch(format!("couplings must be {n}x{n}")));
            }
            let edges = self.topology.edges(n);
            for a in 0..n {
                for b in 0..n {
                    if (j[(a, b)] - j[(b, a)]).abs() > 0.0 {
                        return Err(Error::InvalidArgument("couplings must be symmetric".into()));
                    }
                    let on_edge = edges.contains(&(a.min(b), a.max(b)));
                    if !on_edge && j[(a, b)] != 0.0 {
                        return Err(Error::InvalidArgument(format!(
                            "coupling ({a}, {b}) is not an edge of the topology"
                        )));
                    }
                }
            }
        }
        if let Some(d) = &self.drivings {
            if d.len() != self.n_reservoir_qubits {
                return Err(Error::DimensionMismatch(format!(
                    "{} drivings for {} reservoir qubits",
                    d.len(),
                    self.n_reservoir_qubits
                )));
            }
        }
        if let Some(e) = &self.eta0 {
            if e.dim() != 1 << self.n_reservoir_qubits {
                return Err(Error::DimensionMismatch("eta0 does not match the reservoir".into()));
            }
        }
        Ok(())
    }
}

fn draw(rng: &mut SeededRng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// `Σ_{i<j} J_ij (σ⁺_i σ⁻_j + σ⁺_j σ⁻_i) + Σ_i Δ_i σˣ_i` on `n_qubits`
/// sites; `drivings[k]` drives site `k + 1`, leaving the input undriven.
pub fn spin_hamiltonian(n_qubits: usize, couplings: &DMatrix<f64>, drivings: &[f64]) -> Result<HermitianOperator> {
    if couplings.shape() != (n_qubits, n_qubits) || drivings.len() + 1 != n_qubits {
        return Err(Error::DimensionMismatch("coupling or driving shape does not match".into()));
    }
    let dim = 1usize << n_qubits;
    let bit = |q: usize| 1usize << (n_qubits - 1 - q);
    let mut h = ComplexMatrix::zeros(dim, dim);
    for s in 0..dim {
        for i in 0..n_qubits {
            for j in (i + 1)..n_qubits {
                let jij = couplings[(i, j)];
                if jij == 0.0 {
                    continue;
                }
                let (bi, bj) = (s & bit(i) != 0, s & bit(j) != 0);
                if bi != bj {
                    h[(s ^ bit(i) ^ bit(j), s)] += Complex64::from(jij);
                }
            }
        }
        for (k, &d) in drivings.iter().enumerate() {
            if d != 0.0 {
                h[(s ^ bit(k + 1), s)] += Complex64::from(d);
            }
        }
    }
    HermitianOperator::new(h)
}

/// Draws unspecified couplings (edge order) then drivings (site order).
pub fn build_spin_hamiltonian(spec: &SpinNetworkSpec, rng: &mut SeededRng) -> Result<Reservoir> {
    spec.validate()?;
    let n = spec.n_qubits();
    let couplings = match &spec.couplings {
        Some(j) => j.clone(),
        None => {
            let mut j = DMatrix::zeros(n, n);
            for (a, b) in spec.topology.edges(n) {
                let v = draw(rng, spec.coupling_range);
                j[(a, b)] = v;
                j[(b, a)] = v;
            }
            j
        }
    };
    let drivings = match &spec.drivings {
        Some(d) => d.clone(),
        None => (0..spec.n_reservoir_qubits).map(|_| draw(rng, spec.driving_range)).collect(),
    };
    let h = spin_hamiltonian(n, &couplings, &drivings)?;
    let eta0 = spec
        .eta0
        .clone()
        .unwrap_or_else(|| DensityMatrix::basis_state(1 << spec.n_reservoir_qubits, 0));
    Reservoir::from_hamiltonian(h, spec.time, eta0)
}

fn check_input(r: &Reservoir, rho: &DensityMatrix) -> Result<()> {
    if rho.dim() != r.input_dim {
        return Err(Error::DimensionMismatch(format!(
            "state of dimension {} for a reservoir with input dimension {}",
            rho.dim(),
            r.input_dim
        )));
    }
    Ok(())
}

fn direct_sum(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (m, r) = (a.nrows(), b.nrows());
    let mut out = ComplexMatrix::zeros(m + r, m + r);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (r, r)).copy_from(b);
    out
}

/// `Λ(ρ)` on the measured output space.
pub fn apply_channel(r: &Reservoir, rho: &DensityMatrix) -> Result<DensityMatrix> {
    check_input(r, rho)?;
    let out = match &r.dynamics {
        Dynamics::Isometry { v } => {
            let full = v * rho.matrix() * v.adjoint();
            partial_trace(&full, &[r.input_dim, r.output_dim], &[1])?
        }
        Dynamics::EmbeddedUnitary { u, eta0, input_weight } => {
            let w = Complex64::from(*input_weight);
            let block = direct_sum(&(rho.matrix() * (Complex64::from(1.0) - w)), &(eta0.matrix() * w));
            u * block * u.adjoint()
        }
        Dynamics::Coupled { .. } => return interaction_step(r, rho, r.eta0().expect("coupled reservoir state")),
    };
    DensityMatrix::from_hermitian_part(&out)
}

/// One application of the two-input map `η ↦ Φ(ρ ⊗ η)`.
///
/// Isometry dynamics ignore `η`. Embedded unitaries have no such map
/// because their output space is not the reservoir space.
pub fn interaction_step(r: &Reservoir, rho: &DensityMatrix, eta: &DensityMatrix) -> Result<DensityMatrix> {
    check_input(r, rho)?;
    match &r.dynamics {
        Dynamics::Coupled { u, .. } => {
            if eta.dim() != r.output_dim {
                return Err(Error::DimensionMismatch(format!(
                    "reservoir state of dimension {} for a reservoir of dimension {}",
                    eta.dim(),
                    r.output_dim
                )));
            }
            let full = u * kron(rho.matrix(), eta.matrix()) * u.adjoint();
            DensityMatrix::from_hermitian_part(&partial_trace(&full, &[r.input_dim, r.output_dim], &[1])?)
        }
        Dynamics::Isometry { .. } => {
            if eta.dim() != r.output_dim {
                return Err(Error::DimensionMismatch("reservoir state does not match the output space".into()));
            }
            apply_channel(r, rho)
        }
        Dynamics::EmbeddedUnitary { .. } => Err(Error::NoInteractionMap(r.kind.name())),
    }
}

/// `Λ†(μ_b)` for every outcome; affine offsets for embedded unitaries.
pub fn effective_povm(r: &Reservoir, m: &Povm) -> Result<EffectivePovm> {
    if m.dim() != r.output_dim {
        return Err(Error::DimensionMismatch(format!(
            "POVM on dimension {} for a reservoir output of dimension {}",
            m.dim(),
            r.output_dim
        )));
    }
    let d = r.input_dim;
    let mut elements = Vec::with_capacity(m.len());
    let mut offsets = vec![0.0; m.len()];
    for (b, mu) in m.elements().iter().enumerate() {
        let pulled = match &r.dynamics {
            Dynamics::Isometry { v } => v.adjoint() * kron(&identity(d), mu.matrix()) * v,
            Dynamics::EmbeddedUnitary { u, eta0, input_weight } => {
                let full = u.adjoint() * mu.matrix() * u;
                let rd = eta0.dim();
                let lower = full.view((d, d), (rd, rd)).into_owned();
                offsets[b] = input_weight * (eta0.matrix() * lower).trace().re;
                full.view((0, 0), (d, d)).into_owned() * Complex64::from(1.0 - input_weight)
            }
            Dynamics::Coupled { u, eta0, .. } => {
                let heis = u.adjoint() * kron(&identity(d), mu.matrix()) * u;
                let weighted = kron(&identity(d), eta0.matrix()) * heis;
                partial_trace(&weighted, &[d, r.output_dim], &[0])?
            }
        };
        debug_assert!(hermitian_deviation(&pulled) < 1e-8);
        elements.push(HermitianOperator::from_hermitian_part(&pulled)?);
    }
    EffectivePovm::new(elements, offsets)
}
