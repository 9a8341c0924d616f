//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c64, ComplexMatrix, HermitianOperator};
use crate::reservoirs::Topology;
use crate::sampling::ShotConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub seed: u64,
    #[serde(default = "default_input_dim")]
    pub input_dim: usize,
    pub reservoirs: Vec<ReservoirSpec>,
    pub n_outcomes: Vec<usize>,
    #[serde(default)]
    pub povm: PovmSpec,
    pub states: StateSpec,
    pub shots: Vec<ShotSpec>,
    #[serde(default = "default_injections")]
    pub injections: Vec<usize>,
    pub targets: Vec<TargetSpec>,
    #[serde(default)]
    pub truncation: TruncationSpec,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

fn default_input_dim() -> usize {
    2
}

fn default_injections() -> Vec<usize> {
    vec![1]
}

fn default_trials() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReservoirSpec {
    Isometry {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    EmbeddedUnitary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default = "default_input_weight")]
        input_weight: f64,
    },
    SpinNetwork {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default)]
        topology: TopologySpec,
        #[serde(default = "default_coupling_range")]
        coupling_range: [f64; 2],
        #[serde(default = "default_driving_range")]
        driving_range: [f64; 2],
        #[serde(default = "default_time")]
        time: f64,
    },
    CoupledUnitary {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
}

fn default_input_weight() -> f64 {
    0.5
}

fn default_coupling_range() -> [f64; 2] {
    [-1.0, 1.0]
}

fn default_driving_range() -> [f64; 2] {
    [0.0, 1.0]
}

fn default_time() -> f64 {
    1.0
}

impl ReservoirSpec {
    /// Value of the `reservoir_kind` column.
    pub fn label(&self) -> String {
        let (name, kind) = match self {
            ReservoirSpec::Isometry { name } => (name, "isometry"),
            ReservoirSpec::EmbeddedUnitary { name, .. } => (name, "embedded_unitary"),
            ReservoirSpec::SpinNetwork { name, topology, .. } => {
                return name.clone().unwrap_or_else(|| format!("spin_network_{}", topology.name()));
            }
            ReservoirSpec::CoupledUnitary { name } => (name, "coupled_unitary"),
        };
        name.clone().unwrap_or_else(|| kind.to_string())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologySpec {
    #[default]
    Chain,
    FullyConnectedSingleInput,
    FullyConnectedAllInput,
}

impl TopologySpec {
    pub fn name(self) -> &'static str {
        match self {
            TopologySpec::Chain => "chain",
            TopologySpec::FullyConnectedSingleInput => "fully_connected_single_input",
            TopologySpec::FullyConnectedAllInput => "fully_connected_all_input",
        }
    }

    pub fn topology(self) -> Topology {
        match self {
            TopologySpec::Chain => Topology::Chain,
            TopologySpec::FullyConnectedSingleInput => Topology::FullyConnectedSingleInput,
            TopologySpec::FullyConnectedAllInput => Topology::FullyConnectedAllInput,
        }
    }
}

/// Measurement on the reservoir output space.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PovmSpec {
    #[default]
    Computational,
    /// Projective measurement in a Haar-random basis.
    RandomBasis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub train: usize,
    pub test: usize,
    /// 1 draws pure states; `input_dim` draws full-rank states.
    #[serde(default = "default_rank")]
    pub rank: usize,
}

fn default_rank() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShotSpec {
    Count(u64),
    Named(ExactTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactTag {
    Exact,
}

impl ShotSpec {
    pub fn exact() -> Self {
        ShotSpec::Named(ExactTag::Exact)
    }

    pub fn to_config(self) -> Result<ShotConfig> {
        match self {
            ShotSpec::Named(ExactTag::Exact) => Ok(ShotConfig::Exact),
            ShotSpec::Count(n) => ShotConfig::finite(n),
        }
    }

    /// Value of the `shots` column.
    pub fn label(self) -> String {
        match self {
            ShotSpec::Named(ExactTag::Exact) => "exact".into(),
            ShotSpec::Count(n) => n.to_string(),
        }
    }
}

/// A named Pauli, the identity, or an explicit matrix of `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ObservableSpec {
    Named(String),
    Matrix(Vec<Vec<[f64; 2]>>),
}

impl ObservableSpec {
    fn short(&self) -> String {
        match self {
            ObservableSpec::Named(s) => s.to_lowercase(),
            ObservableSpec::Matrix(_) => "o".into(),
        }
    }

    pub fn operator(&self, dim: usize) -> std::result::Result<HermitianOperator, String> {
        match self {
            ObservableSpec::Named(name) => {
                let op = match name.to_lowercase().as_str() {
                    "i" | "identity" => return Ok(HermitianOperator::identity(dim)),
                    "x" => HermitianOperator::pauli_x(),
                    "y" => HermitianOperator::pauli_y(),
                    "z" => HermitianOperator::pauli_z(),
                    other => return Err(format!("unknown observable {other:?}")),
                };
                if dim != 2 {
                    return Err(format!("Pauli observable {name:?} needs input_dim 2"));
                }
                Ok(op)
            }
            ObservableSpec::Matrix(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(format!("observable must be {dim}x{dim}"));
                }
                let m = ComplexMatrix::from_fn(dim, dim, |i, j| c64(rows[i][j][0], rows[i][j][1]));
                HermitianOperator::new(m).map_err(|e| e.to_string())
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    Linear {
        observable: ObservableSpec,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    Poly {
        observable: ObservableSpec,
        order: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
    },
    TraceExp,
    MixednessRoot,
    Purity,
}

impl TargetSpec {
    /// Value of the `target` column.
    pub fn label(&self) -> String {
        match self {
            TargetSpec::Linear { observable, name } => name.clone().unwrap_or_else(|| observable.short()),
            TargetSpec::Poly { observable, order, name } => {
                name.clone().unwrap_or_else(|| format!("poly{order}_{}", observable.short()))
            }
            TargetSpec::TraceExp => "trace_exp".into(),
            TargetSpec::MixednessRoot => "mixedness_root".into(),
            TargetSpec::Purity => "purity".into(),
        }
    }
}

/// How many singular values training keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RankSpec {
    Fixed(usize),
    Convention(RankConvention),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankConvention {
    /// Real dimension of the states reachable by `n` injections.
    Tomographic,
    /// Hilbert dimension of the `n`-copy input.
    Hilbert,
    /// No rank cap.
    None,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationSpec {
    pub max_rank: RankSpec,
    #[serde(default)]
    pub relative_threshold: f64,
}

impl Default for TruncationSpec {
    fn default() -> Self {
        Self {
            max_rank: RankSpec::Convention(RankConvention::Tomographic),
            relative_threshold: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub path: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { origin.to_string() } else { path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::config(
                "schema_version",
                format!("unsupported version {} (expected {SCHEMA_VERSION})", self.schema_version),
            ));
        }
        if self.input_dim < 2 {
            return Err(Error::config("input_dim", "must be at least 2"));
        }
        let non_empty = [
            ("reservoirs", self.reservoirs.is_empty()),
            ("n_outcomes", self.n_outcomes.is_empty()),
            ("shots", self.shots.is_empty()),
            ("injections", self.injections.is_empty()),
            ("targets", self.targets.is_empty()),
        ];
        for (field, empty) in non_empty {
            if empty {
                return Err(Error::config(field, "grid must not be empty"));
            }
        }
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.states.train == 0 {
            return Err(Error::config("states.train", "must be at least 1"));
        }
        if self.states.test == 0 {
            return Err(Error::config("states.test", "must be at least 1"));
        }
        if self.states.rank == 0 || self.states.rank > self.input_dim {
            return Err(Error::config("states.rank", format!("must lie in 1..={}", self.input_dim)));
        }
        for (i, &n) in self.n_outcomes.iter().enumerate() {
            if n == 0 {
                return Err(Error::config(format!("n_outcomes[{i}]"), "must be positive"));
            }
        }
        for (i, &n) in self.injections.iter().enumerate() {
            if n == 0 {
                return Err(Error::config(format!("injections[{i}]"), "must be positive"));
            }
        }
        for (i, s) in self.shots.iter().enumerate() {
            if s.to_config().is_err() {
                return Err(Error::config(format!("shots[{i}]"), "must be \"exact\" or a positive integer"));
            }
        }
        for (i, r) in self.reservoirs.iter().enumerate() {
            let at = |f: &str| format!("reservoirs[{i}].{f}");
            match r {
                ReservoirSpec::EmbeddedUnitary { input_weight, .. } => {
                    if !(*input_weight > 0.0 && *input_weight < 1.0) {
                        return Err(Error::config(at("input_weight"), "must lie in (0, 1)"));
                    }
                }
                ReservoirSpec::SpinNetwork { coupling_range, driving_range, time, .. } => {
                    if self.input_dim != 2 {
                        return Err(Error::config(at("kind"), "spin networks take a single input qubit"));
                    }
                    for (f, [lo, hi]) in [("coupling_range", coupling_range), ("driving_range", driving_range)] {
                        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                            return Err(Error::config(at(f), "must be a finite interval [lo, hi]"));
                        }
                    }
                    if !time.is_finite() {
                        return Err(Error::config(at("time"), "must be finite"));
                    }
                }
                ReservoirSpec::Isometry { .. } | ReservoirSpec::CoupledUnitary { .. } => {}
            }
        }
        for (i, t) in self.targets.iter().enumerate() {
            if let TargetSpec::Linear { observable, .. } | TargetSpec::Poly { observable, .. } = t {
                observable
                    .operator(self.input_dim)
                    .map_err(|m| Error::config(format!("targets[{i}].observable"), m))?;
            }
            if let TargetSpec::Poly { order: 0, .. } = t {
                return Err(Error::config(format!("targets[{i}].order"), "must be at least 1"));
            }
        }
        if let RankSpec::Fixed(0) = self.truncation.max_rank {
            return Err(Error::config("truncation.max_rank", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.truncation.relative_threshold) {
            return Err(Error::config("truncation.relative_threshold", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Number of result rows the sweep produces.
    pub fn row_count(&self) -> usize {
        self.reservoirs.len()
            * self.n_outcomes.len()
            * self.injections.len()
            * self.shots.len()
            * self.targets.len()
            * self.trials
    }
}
