use qelm::harness::{
    emit_csv, emit_json, execute, presets, read_csv, read_json, run_experiment, run_experiment_with,
    ExperimentConfig, ObservableSpec, OutputFormat, ReservoirSpec, ResultRow, RunOptions, ShotSpec, StateSpec,
    TargetSpec, TruncationSpec, CSV_HEADER, SCHEMA_VERSION,
};
use qelm::Error;

fn minimal() -> ExperimentConfig {
    ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        seed: 3,
        input_dim: 2,
        reservoirs: vec![ReservoirSpec::Isometry { name: None }],
        n_outcomes: vec![8],
        povm: Default::default(),
        states: StateSpec { train: 40, test: 20, rank: 1 },
        shots: vec![ShotSpec::exact()],
        injections: vec![1],
        targets: vec![TargetSpec::Linear { observable: ObservableSpec::Named("x".into()), name: None }],
        truncation: TruncationSpec::default(),
        trials: 1,
        record_timing: false,
        output: None,
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

#[test]
fn minimal_config_gives_one_exact_row() {
    let rows = run_experiment(&minimal()).unwrap();
    assert_eq!(rows.len(), 1);
    let r = &rows[0];
    assert!(r.test_mse.unwrap() <= 1e-12);
    assert!(r.condition_number.unwrap() >= 1.0);
    assert_eq!((r.reservoir_kind.as_str(), r.shots.as_str(), r.target.as_str()), ("isometry", "exact", "x"));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = minimal();
    cfg.shots = vec![ShotSpec::exact(), ShotSpec::Count(500)];
    cfg.trials = 6;
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    execute(&cfg, &a, OutputFormat::Csv, RunOptions { jobs: Some(3) }).unwrap();
    execute(&cfg, &b, OutputFormat::Csv, RunOptions { jobs: Some(1) }).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn more_outcomes_help_under_shot_noise() {
    let mut cfg = minimal();
    cfg.n_outcomes = vec![2, 4, 8, 16];
    cfg.shots = vec![ShotSpec::Count(10_000)];
    cfg.states = StateSpec { train: 100, test: 50, rank: 1 };
    cfg.trials = 10;
    let rows = run_experiment(&cfg).unwrap();
    let med = |n: usize| median(rows.iter().filter(|r| r.n_outcomes == n).map(|r| r.test_mse.unwrap()).collect());
    assert!(med(2) > 50.0 * med(16), "{} vs {}", med(2), med(16));
}

#[test]
fn sweep_cardinality_and_order() {
    let mut cfg = minimal();
    cfg.reservoirs.push(ReservoirSpec::CoupledUnitary { name: None });
    cfg.n_outcomes = vec![4, 8];
    cfg.shots = vec![ShotSpec::exact(), ShotSpec::Count(100)];
    cfg.targets.push(TargetSpec::Purity);
    cfg.trials = 3;
    let mut chunks = 0;
    let rows = run_experiment_with(&cfg, RunOptions { jobs: Some(2) }, &mut |_| {
        chunks += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(rows.len(), cfg.row_count());
    assert_eq!(rows.len(), 2 * 2 * 2 * 2 * 3);
    assert!(chunks >= 2);
    assert_eq!(rows[0].reservoir_kind, "isometry");
    assert_eq!(rows.last().unwrap().reservoir_kind, "coupled_unitary");
    assert!(rows.iter().all(|r| !r.is_error()));
}

#[test]
fn adding_grid_points_keeps_existing_rows() {
    let mut small = minimal();
    small.shots = vec![ShotSpec::Count(1000)];
    small.trials = 2;
    let mut big = small.clone();
    big.n_outcomes = vec![4, 8, 16];
    big.shots = vec![ShotSpec::exact(), ShotSpec::Count(1000)];
    let a = run_experiment(&small).unwrap();
    let b = run_experiment(&big).unwrap();
    for row in &a {
        let twin = b
            .iter()
            .find(|r| r.n_outcomes == row.n_outcomes && r.shots == row.shots && r.trial == row.trial)
            .unwrap();
        assert_eq!(twin, row);
    }
}

#[test]
fn incompatible_dimensions_mark_rows_and_continue() {
    let mut cfg = minimal();
    cfg.reservoirs = vec![ReservoirSpec::SpinNetwork {
        name: None,
        topology: Default::default(),
        coupling_range: [-1.0, 1.0],
        driving_range: [0.0, 1.0],
        time: 1.0,
    }];
    cfg.n_outcomes = vec![3, 4];
    let rows = run_experiment(&cfg).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].is_error() && rows[0].test_mse.is_none());
    assert!(rows[1].test_mse.unwrap() <= 1e-12);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    emit_csv(&rows, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.lines().nth(1).unwrap().contains(",error,error,error,"));
    let back = read_csv(&path).unwrap();
    assert!(back[0].is_error() && !back[1].is_error());
}

#[test]
fn embedded_unitary_rows_use_affine_training() {
    let mut cfg = minimal();
    cfg.reservoirs = vec![ReservoirSpec::EmbeddedUnitary { name: None, input_weight: 0.5 }];
    cfg.n_outcomes = vec![2, 6];
    cfg.injections = vec![1, 2];
    let rows = run_experiment(&cfg).unwrap();
    assert!(rows[0].is_error(), "two outcomes leave no reservoir block");
    assert!(rows[2].test_mse.unwrap() <= 1e-12);
    // no two-input map to iterate
    assert!(rows[3].error.as_deref().unwrap().contains("interaction map"));
}

#[test]
fn empty_rows_write_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_csv(&[], &path).unwrap();
    assert_eq!(std::fs::read_to_string(&path).unwrap(), format!("{CSV_HEADER}\n"));
    assert!(read_csv(&path).unwrap().is_empty());
}

fn sample_rows() -> Vec<ResultRow> {
    let mut cfg = minimal();
    cfg.shots = vec![ShotSpec::exact(), ShotSpec::Count(300)];
    cfg.targets.push(TargetSpec::Poly {
        observable: presets::generic_observable(),
        order: 2,
        name: None,
    });
    cfg.trials = 3;
    cfg.record_timing = true;
    run_experiment(&cfg).unwrap()
}

#[test]
fn json_round_trip() {
    let rows = sample_rows();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.json");
    emit_json(&rows, &path).unwrap();
    assert_eq!(read_json(&path).unwrap(), rows);
}

#[test]
fn csv_values_parse_back_exactly() {
    let rows = sample_rows();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rows.csv");
    emit_csv(&rows, &path).unwrap();
    // generic reader: split on commas, parse floats
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_HEADER);
    for (line, row) in lines.zip(&rows) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 11);
        assert_eq!(f[6].parse::<f64>().unwrap(), row.train_mse.unwrap());
        assert_eq!(f[7].parse::<f64>().unwrap(), row.test_mse.unwrap());
        assert_eq!(f[8].parse::<f64>().unwrap(), row.condition_number.unwrap());
        assert_eq!(f[9].parse::<f64>().unwrap(), row.wall_time_ms);
    }
    assert_eq!(read_csv(&path).unwrap(), rows);
}

#[test]
fn timing_is_zero_unless_requested() {
    let rows = run_experiment(&minimal()).unwrap();
    assert!(rows.iter().all(|r| r.wall_time_ms == 0.0));
}

#[test]
fn config_errors_name_the_field() {
    let good = minimal().to_json_string();
    let parsed = ExperimentConfig::from_json_str(&good, "inline").unwrap();
    assert_eq!(parsed, minimal());

    let cases = [
        (good.replace("\"seed\": 3,", ""), "seed"),
        (good.replace("\"exact\"", "0"), "shots[0]"),
        (good.replace("\"exact\"", "\"infinite\""), "shots[0]"),
        (good.replace("\"trials\": 1", "\"trials\": 0"), "trials"),
        (good.replace("\"schema_version\": 1", "\"schema_version\": 9"), "schema_version"),
        (good.replace("\"train\": 40", "\"train\": 0"), "states.train"),
        (good.replace("\"x\"", "\"w\""), "targets[0].observable"),
        (good.replace("\"n_outcomes\": [\n    8\n  ]", "\"n_outcomes\": []"), "n_outcomes"),
        (good.replace("\"trials\"", "\"trails\""), "trails"),
    ];
    for (text, field) in cases {
        match ExperimentConfig::from_json_str(&text, "inline") {
            Err(Error::Config { path, message }) => {
                assert!(path.contains(field) || message.contains(field), "{field}: got {path}: {message}");
            }
            other => panic!("{field}: expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn presets_validate_and_round_trip() {
    for name in ["fig3", "fig4", "fig6"] {
        let cfg = presets::by_name(name, 1).unwrap();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json_str(&cfg.to_json_string(), name).unwrap();
        assert_eq!(back, cfg);
    }
    assert!(presets::by_name("fig5", 1).is_none());
}

#[test]
fn fig6_preset_shows_degree_staircase() {
    let mut cfg = presets::fig6(5);
    cfg.shots = vec![ShotSpec::exact()];
    cfg.trials = 1;
    cfg.injections = vec![1, 2, 3];
    let rows = run_experiment(&cfg).unwrap();
    let get = |target: &str, n: usize| {
        rows.iter()
            .find(|r| r.target == target && r.n_injections == n)
            .unwrap()
            .test_mse
            .unwrap()
    };
    assert!(get("poly1_o", 1) < 1e-10);
    assert!(get("poly2_o", 1) > 1e-6);
    assert!(get("poly2_o", 2) < 1e-10);
    assert!(get("purity", 2) < 1e-10);
    assert!(get("poly2_o", 3) > 1e-6, "20 symmetric components exceed 16 outcomes");
    assert!(get("trace_exp", 2) > 1e-10);
}
