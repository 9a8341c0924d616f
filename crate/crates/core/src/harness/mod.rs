//! Seeded experiment sweeps driven by a JSON config.

mod config;
mod output;
pub mod presets;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

pub use config::{
    ExactTag, ExperimentConfig, ObservableSpec, OutputFormat, OutputSpec, PovmSpec, RankConvention, RankSpec,
    ReservoirSpec, ShotSpec, StateSpec, TargetSpec, TopologySpec, TruncationSpec, SCHEMA_VERSION,
};
pub use output::{emit_csv, emit_json, read_csv, read_json, CsvRowWriter, ResultRow, CSV_HEADER, ERROR_MARKER};

use crate::error::{Error, Result};
use crate::measurement::{computational_basis_povm, Povm};
use crate::multishot::{evaluate_target, symmetric_dimension, MultishotSetup, TargetFunctional};
use crate::qcore::{random_density_matrix, DensityMatrix, SeededRng};
use crate::reservoirs::{
    build_coupled_unitary_reservoir, build_embedded_unitary_reservoir, build_isometry_reservoir,
    build_spin_hamiltonian, effective_povm, Reservoir, SpinNetworkSpec,
};
use crate::sampling::{observe, outcome_probabilities};
use crate::training::{condition_number, mse, predict, train, ProbabilityMatrix, TargetMatrix, TruncationPolicy};

/// Stream id for a tuple of sweep coordinates.
///
/// Hashing the coordinates rather than enumerating grid points keeps a
/// row's randomness fixed when other grid points are added or removed.
pub fn stream_id(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p.as_bytes());
        h.update([0x1f]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

#[derive(Clone, Copy, Debug)]
struct Unit {
    reservoir: usize,
    outcomes: usize,
    injections: usize,
    trial: usize,
}

fn units(cfg: &ExperimentConfig) -> Vec<Unit> {
    let mut out = Vec::new();
    for reservoir in 0..cfg.reservoirs.len() {
        for outcomes in 0..cfg.n_outcomes.len() {
            for injections in 0..cfg.injections.len() {
                for trial in 0..cfg.trials {
                    out.push(Unit { reservoir, outcomes, injections, trial });
                }
            }
        }
    }
    out
}

fn build_reservoir(cfg: &ExperimentConfig, spec: &ReservoirSpec, n_outcomes: usize, rng: &mut SeededRng) -> Result<Reservoir> {
    let m = cfg.input_dim;
    match spec {
        ReservoirSpec::Isometry { .. } => build_isometry_reservoir(m, n_outcomes, rng),
        ReservoirSpec::EmbeddedUnitary { input_weight, .. } => {
            if n_outcomes <= m {
                return Err(Error::InvalidArgument(format!(
                    "embedded unitary needs more than {m} outcomes"
                )));
            }
            build_embedded_unitary_reservoir(m, n_outcomes - m, *input_weight, rng)
        }
        ReservoirSpec::SpinNetwork { topology, coupling_range, driving_range, time, .. } => {
            if n_outcomes < 2 || !n_outcomes.is_power_of_two() {
                return Err(Error::InvalidArgument(format!(
                    "spin network outcomes must be a power of two, got {n_outcomes}"
                )));
            }
            let mut s = SpinNetworkSpec::new(n_outcomes.trailing_zeros() as usize, topology.topology());
            s.coupling_range = (coupling_range[0], coupling_range[1]);
            s.driving_range = (driving_range[0], driving_range[1]);
            s.time = *time;
            build_spin_hamiltonian(&s, rng)
        }
        ReservoirSpec::CoupledUnitary { .. } => build_coupled_unitary_reservoir(m, n_outcomes, rng),
    }
}

fn target_functional(cfg: &ExperimentConfig, t: &TargetSpec) -> Result<TargetFunctional> {
    let op = |o: &ObservableSpec| o.operator(cfg.input_dim).map_err(Error::InvalidArgument);
    Ok(match t {
        TargetSpec::Linear { observable, .. } => TargetFunctional::LinearObservable(op(observable)?),
        TargetSpec::Poly { observable, order, .. } => TargetFunctional::PolyMoment(op(observable)?, *order),
        TargetSpec::TraceExp => TargetFunctional::TraceExp,
        TargetSpec::MixednessRoot => TargetFunctional::MixednessRoot,
        TargetSpec::Purity => TargetFunctional::Purity,
    })
}

/// Truncation policy for `n` injections of a `m`-dimensional input.
pub fn policy_for(spec: &TruncationSpec, n: usize, m: usize) -> Result<TruncationPolicy> {
    let max_rank = match spec.max_rank {
        RankSpec::Fixed(k) => Some(k),
        RankSpec::Convention(RankConvention::None) => None,
        RankSpec::Convention(RankConvention::Tomographic) => {
            let d = symmetric_dimension(n, m)?;
            Some(usize::try_from(d).map_err(|_| Error::Overflow("tomographic rank".into()))?)
        }
        RankSpec::Convention(RankConvention::Hilbert) => {
            let d = u32::try_from(n)
                .ok()
                .and_then(|n| m.checked_pow(n))
                .ok_or_else(|| Error::Overflow(format!("{m}^{n}")))?;
            Some(d)
        }
    };
    let policy = TruncationPolicy {
        max_rank,
        relative_threshold: spec.relative_threshold,
    };
    policy.validate()?;
    Ok(policy)
}

/// Exact probability columns for train and test states, plus the affine flag.
type Columns = (Vec<Vec<f64>>, Vec<Vec<f64>>, bool);

struct Prepared {
    columns: Columns,
    truth_train: Vec<Vec<f64>>,
    truth_test: Vec<Vec<f64>>,
    policy: TruncationPolicy,
}

fn prepare(cfg: &ExperimentConfig, u: Unit, targets: &[TargetFunctional]) -> Result<Prepared> {
    let spec = &cfg.reservoirs[u.reservoir];
    let label = spec.label();
    let n_outcomes = cfg.n_outcomes[u.outcomes];
    let n = cfg.injections[u.injections];
    let (nout_s, trial_s) = (n_outcomes.to_string(), u.trial.to_string());

    let mut rng = SeededRng::new(cfg.seed, stream_id(&["reservoir", &label, &nout_s, &trial_s]));
    let reservoir = build_reservoir(cfg, spec, n_outcomes, &mut rng)?;
    let povm = match cfg.povm {
        PovmSpec::Computational => computational_basis_povm(reservoir.output_dim()),
        PovmSpec::RandomBasis => {
            let mut rng = SeededRng::new(cfg.seed, stream_id(&["povm", &label, &nout_s, &trial_s]));
            let d = reservoir.output_dim();
            Povm::random_rank_one(d, d, &mut rng)?
        }
    };

    let mut rng = SeededRng::new(cfg.seed, stream_id(&["states", &trial_s]));
    let mut draw = |count: usize| -> Result<Vec<DensityMatrix>> {
        (0..count)
            .map(|_| random_density_matrix(cfg.input_dim, cfg.states.rank, &mut rng))
            .collect()
    };
    let train_states = draw(cfg.states.train)?;
    let test_states = draw(cfg.states.test)?;

    let truth = |states: &[DensityMatrix]| -> Result<Vec<Vec<f64>>> {
        targets
            .iter()
            .map(|t| states.iter().map(|s| evaluate_target(t, s)).collect())
            .collect()
    };
    let truth_train = truth(&train_states)?;
    let truth_test = truth(&test_states)?;

    let columns = if n == 1 {
        let eff = effective_povm(&reservoir, &povm)?;
        let probs = |states: &[DensityMatrix]| -> Result<Vec<Vec<f64>>> {
            states.iter().map(|s| outcome_probabilities(&eff, s)).collect()
        };
        (probs(&train_states)?, probs(&test_states)?, eff.has_offsets())
    } else {
        let eta0 = reservoir
            .eta0()
            .cloned()
            .unwrap_or_else(|| DensityMatrix::basis_state(reservoir.output_dim(), 0));
        let setup = MultishotSetup {
            reservoir: &reservoir,
            eta0: &eta0,
            n_injections: n,
            povm: &povm,
            targets,
            shots: crate::sampling::ShotConfig::Exact,
            policy: TruncationPolicy::disabled(),
        };
        (setup.exact_probabilities(&train_states)?, setup.exact_probabilities(&test_states)?, false)
    };
    let policy = policy_for(&cfg.truncation, n, cfg.input_dim)?;
    Ok(Prepared {
        columns,
        truth_train,
        truth_test,
        policy,
    })
}

struct Metrics {
    train_mse: f64,
    test_mse: f64,
    condition_number: f64,
}

fn fit(p_train: &ProbabilityMatrix, p_test: &ProbabilityMatrix, y_train: &[f64], y_test: &[f64], policy: &TruncationPolicy, kappa: f64) -> Result<Metrics> {
    let y_train = TargetMatrix::from_row(y_train)?;
    let y_test = TargetMatrix::from_row(y_test)?;
    let w = train(p_train, &y_train, policy)?;
    let m = Metrics {
        train_mse: mse(&predict(&w, p_train)?, &y_train)?,
        test_mse: mse(&predict(&w, p_test)?, &y_test)?,
        condition_number: kappa,
    };
    if !(m.train_mse.is_finite() && m.test_mse.is_finite() && m.condition_number.is_finite()) {
        return Err(Error::InvalidArgument("non-finite result".into()));
    }
    Ok(m)
}

fn run_unit(cfg: &ExperimentConfig, u: Unit) -> Vec<ResultRow> {
    let label = cfg.reservoirs[u.reservoir].label();
    let n_outcomes = cfg.n_outcomes[u.outcomes];
    let n = cfg.injections[u.injections];
    let row = |shots: &ShotSpec, target: &TargetSpec, outcome: Result<Metrics>, ms: f64| {
        let (train_mse, test_mse, condition_number, error) = match outcome {
            Ok(m) => (Some(m.train_mse), Some(m.test_mse), Some(m.condition_number), None),
            Err(e) => (None, None, None, Some(e.to_string())),
        };
        ResultRow {
            reservoir_kind: label.clone(),
            n_outcomes,
            n_injections: n,
            shots: shots.label(),
            target: target.label(),
            trial: u.trial,
            train_mse,
            test_mse,
            condition_number,
            wall_time_ms: if cfg.record_timing { ms } else { 0.0 },
            seed: cfg.seed,
            error,
        }
    };

    let start = Instant::now();
    let prepared = cfg
        .targets
        .iter()
        .map(|t| target_functional(cfg, t))
        .collect::<Result<Vec<_>>>()
        .and_then(|targets| prepare(cfg, u, &targets));
    let prep_ms = start.elapsed().as_secs_f64() * 1e3;
    let prepared = match prepared {
        Ok(p) => p,
        Err(e) => {
            let msg = e.to_string();
            return cfg
                .shots
                .iter()
                .flat_map(|s| cfg.targets.iter().map(move |t| (s, t)))
                .map(|(s, t)| row(s, t, Err(Error::InvalidArgument(msg.clone())), prep_ms))
                .collect();
        }
    };

    let (train_cols, test_cols, affine) = &prepared.columns;
    let mut rows = Vec::with_capacity(cfg.shots.len() * cfg.targets.len());
    for shots in &cfg.shots {
        let t0 = Instant::now();
        let sampled = (|| -> Result<(ProbabilityMatrix, ProbabilityMatrix, f64)> {
            let stream = stream_id(&[
                "noise",
                &label,
                &n_outcomes.to_string(),
                &n.to_string(),
                &shots.label(),
                &u.trial.to_string(),
            ]);
            let mut rng = SeededRng::new(cfg.seed, stream);
            let sc = shots.to_config()?;
            let mut sample = |cols: &[Vec<f64>]| -> Result<ProbabilityMatrix> {
                let observed = cols
                    .iter()
                    .map(|c| observe(c.clone(), sc, &mut rng))
                    .collect::<Result<Vec<_>>>()?;
                ProbabilityMatrix::from_columns(&observed, *affine)
            };
            let p_train = sample(train_cols)?;
            let p_test = sample(test_cols)?;
            let kappa = condition_number(&p_train, &prepared.policy)?;
            Ok((p_train, p_test, kappa))
        })();
        let shared_ms = prep_ms + t0.elapsed().as_secs_f64() * 1e3;
        for (i, target) in cfg.targets.iter().enumerate() {
            let t1 = Instant::now();
            let outcome = match &sampled {
                Ok((p_train, p_test, kappa)) => fit(
                    p_train,
                    p_test,
                    &prepared.truth_train[i],
                    &prepared.truth_test[i],
                    &prepared.policy,
                    *kappa,
                ),
                Err(e) => Err(Error::InvalidArgument(e.to_string())),
            };
            rows.push(row(shots, target, outcome, shared_ms + t1.elapsed().as_secs_f64() * 1e3));
        }
    }
    rows
}

/// Thread-pool options for [`run_experiment_with`].
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
}

/// Runs the sweep, handing each completed chunk of rows to `sink` in
/// coordinate order. Results do not depend on the number of workers.
pub fn run_experiment_with(
    cfg: &ExperimentConfig,
    options: RunOptions,
    sink: &mut dyn FnMut(&[ResultRow]) -> Result<()>,
) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = options.jobs {
        if j == 0 {
            return Err(Error::config("--jobs", "must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let all = units(cfg);
    let chunk = (pool.current_num_threads() * 4).max(1);
    let mut rows = Vec::with_capacity(cfg.row_count());
    for batch in all.chunks(chunk) {
        let done: Vec<Vec<ResultRow>> = pool.install(|| batch.par_iter().map(|&u| run_unit(cfg, u)).collect());
        let flat: Vec<ResultRow> = done.into_iter().flatten().collect();
        sink(&flat)?;
        rows.extend(flat);
    }
    Ok(rows)
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_experiment_with(cfg, RunOptions::default(), &mut |_| Ok(()))
}

/// Runs and writes `path`. CSV output grows chunk by chunk, so an
/// interrupted run keeps its completed rows; JSON is written at the end.
pub fn execute(cfg: &ExperimentConfig, path: &Path, format: OutputFormat, options: RunOptions) -> Result<Vec<ResultRow>> {
    match format {
        OutputFormat::Csv => {
            cfg.validate()?;
            let mut writer = CsvRowWriter::create(path)?;
            run_experiment_with(cfg, options, &mut |rows| writer.write_rows(rows))
        }
        OutputFormat::Json => {
            let rows = run_experiment_with(cfg, options, &mut |_| Ok(()))?;
            emit_json(&rows, path)?;
            Ok(rows)
        }
    }
}
