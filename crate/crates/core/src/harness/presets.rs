//! Desk-scale configurations for the figure reproductions.

use super::config::*;

pub const DEFAULT_SEED: u64 = 20_240_917;

fn x() -> ObservableSpec {
    ObservableSpec::Named("x".into())
}

/// Traceful observable with a generic traceless part.
pub fn generic_observable() -> ObservableSpec {
    ObservableSpec::Matrix(vec![
        vec![[1.0, 0.0], [0.3, -0.2]],
        vec![[0.3, 0.2], [-0.4, 0.0]],
    ])
}

/// Isometry reservoirs of growing size under shot noise.
pub fn fig3(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed,
        input_dim: 2,
        reservoirs: vec![ReservoirSpec::Isometry { name: None }],
        n_outcomes: vec![2, 3, 4, 6, 8, 16],
        povm: PovmSpec::Computational,
        states: StateSpec { train: 100, test: 50, rank: 1 },
        shots: vec![ShotSpec::exact(), ShotSpec::Count(1_000), ShotSpec::Count(10_000), ShotSpec::Count(100_000)],
        injections: vec![1],
        targets: vec![
            TargetSpec::Linear { observable: x(), name: None },
            TargetSpec::Linear { observable: ObservableSpec::Named("z".into()), name: None },
        ],
        truncation: TruncationSpec::default(),
        trials: 10,
        record_timing: false,
        output: None,
    }
}

/// Spin networks over the three topologies.
pub fn fig4(seed: u64) -> ExperimentConfig {
    let spin = |topology| ReservoirSpec::SpinNetwork {
        name: None,
        topology,
        coupling_range: [0.0, 1.0],
        driving_range: [0.0, 1.0],
        time: 1.0,
    };
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed,
        input_dim: 2,
        reservoirs: vec![
            spin(TopologySpec::Chain),
            spin(TopologySpec::FullyConnectedSingleInput),
            spin(TopologySpec::FullyConnectedAllInput),
        ],
        n_outcomes: vec![2, 4, 8, 16],
        povm: PovmSpec::Computational,
        states: StateSpec { train: 1000, test: 100, rank: 1 },
        shots: vec![ShotSpec::exact(), ShotSpec::Count(10_000)],
        injections: vec![1],
        targets: vec![TargetSpec::Linear { observable: x(), name: None }],
        truncation: TruncationSpec::default(),
        trials: 10,
        record_timing: false,
        output: None,
    }
}

/// Multiple injections into a random coupled unitary with 16 outcomes.
pub fn fig6(seed: u64) -> ExperimentConfig {
    let mut targets: Vec<TargetSpec> = (1..=4)
        .map(|order| TargetSpec::Poly { observable: generic_observable(), order, name: None })
        .collect();
    targets.extend([TargetSpec::Purity, TargetSpec::TraceExp, TargetSpec::MixednessRoot]);
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed,
        input_dim: 2,
        reservoirs: vec![ReservoirSpec::CoupledUnitary { name: None }],
        n_outcomes: vec![16],
        povm: PovmSpec::Computational,
        states: StateSpec { train: 200, test: 50, rank: 2 },
        shots: vec![ShotSpec::exact(), ShotSpec::Count(10_000)],
        injections: (1..=5).collect(),
        targets,
        truncation: TruncationSpec::default(),
        trials: 5,
        record_timing: false,
        output: None,
    }
}

pub fn by_name(name: &str, seed: u64) -> Option<ExperimentConfig> {
    match name {
        "fig3" => Some(fig3(seed)),
        "fig4" => Some(fig4(seed)),
        "fig6" => Some(fig6(seed)),
        _ => None,
    }
}
