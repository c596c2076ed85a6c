//! End-to-end subcommand contracts: flags, exit codes, file outputs, and
//! agreement with the library run in-process.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use damcast_core::bench::{
    dataset_scaler, invert_predictions, scale_dataset, train_cell_model, ModelKind, Overrides,
};
use damcast_core::boost::Variant;
use damcast_core::data::{ingest_csv, interpolate_missing, shift_timesteps, split_monthly, CsvSchema};
use damcast_core::model_io::{read_model, SavedModel};

fn damcast(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damcast"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "exit {:?}; stdout: {} stderr: {}",
        out.status.code(),
        stdout(out),
        stderr(out)
    );
}

fn synth(dir: &Path, days: u32, seed: &str, name: &str) {
    let out = damcast(
        dir,
        &["synth", "--days", &days.to_string(), "--seed", seed, "--out", name],
    );
    assert_exit(&out, 0);
}

#[test]
fn synth_is_deterministic_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 10, "42", "a.csv");
    synth(dir.path(), 10, "42", "b.csv");
    synth(dir.path(), 10, "43", "c.csv");
    let a = fs::read(dir.path().join("a.csv")).unwrap();
    let b = fs::read(dir.path().join("b.csv")).unwrap();
    let c = fs::read(dir.path().join("c.csv")).unwrap();
    assert_eq!(a, b, "same seed must give identical files");
    assert_ne!(a, c, "different seed must change the data");
}

#[test]
fn synth_output_round_trips_through_ingestion() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 14, "5", "d.csv");
    let frame = ingest_csv(&dir.path().join("d.csv"), &CsvSchema::default()).unwrap();
    assert_eq!(frame.n_hours(), 14 * 24);
    assert!(!frame.has_missing(), "generated data must be complete");
}

#[test]
fn synth_rejects_zero_days_as_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = damcast(dir.path(), &["synth", "--days", "0", "--out", "x.csv"]);
    assert_exit(&out, 1);
    assert!(!dir.path().join("x.csv").exists());
}

#[test]
fn synth_unwritable_path_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = damcast(
        dir.path(),
        &["synth", "--days", "2", "--out", "no_such_dir/x.csv"],
    );
    assert_exit(&out, 2);
}

#[test]
fn synth_honors_a_generator_spec_file() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("flat.spec"),
        "base_price 100\nnoise_scale 0\ndaily_amplitude 0\nweekly_amplitude 0\nannual_amplitude 0\n",
    )
    .unwrap();
    let out = damcast(
        dir.path(),
        &["synth", "--days", "2", "--out", "flat.csv", "--spec", "flat.spec"],
    );
    assert_exit(&out, 0);
    let frame = ingest_csv(&dir.path().join("flat.csv"), &CsvSchema::default()).unwrap();
    let price = frame.column("price_eur_mwh").unwrap();
    assert!(price.iter().all(|&p| p == 100.0), "noise-free flat spec");

    fs::write(dir.path().join("bad.spec"), "base_price banana\n").unwrap();
    let out = damcast(
        dir.path(),
        &["synth", "--days", "2", "--out", "y.csv", "--spec", "bad.spec"],
    );
    assert_exit(&out, 2);
}

#[test]
fn ingest_check_reports_shape_and_rejects_garbage() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 3, "1", "d.csv");
    let out = damcast(dir.path(), &["ingest-check", "--data", "d.csv"]);
    assert_exit(&out, 0);
    let text = stdout(&out);
    assert!(text.contains("hours: 72"));
    assert!(text.contains("price_eur_mwh: 0 missing"));
    assert!(text.contains("interpolation: ok"));

    fs::write(dir.path().join("junk.csv"), "not,a,frame\n1,2,3\n").unwrap();
    let out = damcast(dir.path(), &["ingest-check", "--data", "junk.csv"]);
    assert_exit(&out, 2);
}

#[test]
fn train_writes_a_model_that_reproduces_in_process_predictions() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 60, "11", "d.csv");
    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "levelwise_exact", "--window", "7",
            "--month", "2023-02", "--out", "m.model", "--seed", "7",
        ],
    );
    assert_exit(&out, 0);
    assert!(stdout(&out).contains("train mae "));

    // replicate the training pipeline in process with the same seed
    let raw = ingest_csv(&dir.path().join("d.csv"), &CsvSchema::default()).unwrap();
    let frame = interpolate_missing(&raw).unwrap();
    let ds = shift_timesteps(&frame, 24).unwrap();
    let split = split_monthly(&ds, 7, 2023, 2).unwrap();
    let scaler = dataset_scaler(&split.train).unwrap();
    let train_scaled = scale_dataset(&split.train, &scaler).unwrap();
    let trained = train_cell_model(
        ModelKind::Boosted(Variant::LevelwiseExact),
        &train_scaled,
        &Overrides::default(),
        7,
    )
    .unwrap();
    let test_scaled = scale_dataset(&split.test, &scaler).unwrap();
    let expect = invert_predictions(&scaler, &trained.predict(&test_scaled).unwrap()).unwrap();

    // the saved model plus saved scaler must give bitwise the same numbers
    let file = read_model(&dir.path().join("m.model")).unwrap();
    let saved_scaler = file.scaler.expect("train stores the scaler");
    assert_eq!(saved_scaler, scaler);
    let ensemble = match &file.model {
        SavedModel::Ensemble(e) => e,
        other => panic!("expected an ensemble, got {other:?}"),
    };
    let test_scaled2 = scale_dataset(&split.test, &saved_scaler).unwrap();
    let got =
        invert_predictions(&saved_scaler, &ensemble.predict_dataset(&test_scaled2).unwrap())
            .unwrap();
    assert_eq!(expect.len(), got.len());
    for (e, g) in expect.iter().zip(&got) {
        assert_eq!(e.to_bits(), g.to_bits(), "loaded model diverged");
    }
}

#[test]
fn train_rejects_bad_model_names_with_the_valid_list() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 40, "1", "d.csv");
    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "foo", "--window", "7", "--month",
            "2023-02", "--out", "m.model",
        ],
    );
    assert_exit(&out, 1);
    let err = stderr(&out);
    for name in [
        "lstm_ffec",
        "levelwise_exact",
        "leafwise_histogram",
        "oblivious_ordered",
    ] {
        assert!(err.contains(name), "error must list {name}: {err}");
    }

    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "naive", "--window", "7", "--month",
            "2023-02", "--out", "m.model",
        ],
    );
    assert_exit(&out, 1);
}

#[test]
fn train_window_exceeding_history_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 60, "1", "d.csv");
    // data starts 2023-01-01; a 90-day window before late February reaches
    // into 2022
    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "levelwise_exact", "--window", "90",
            "--month", "2023-02", "--out", "m.model",
        ],
    );
    assert_exit(&out, 2);

    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "levelwise_exact", "--window", "11",
            "--month", "2023-02", "--out", "m.model",
        ],
    );
    assert_exit(&out, 1);
    assert!(stderr(&out).contains("window"));
}

#[test]
fn evaluate_is_deterministic_and_needs_a_readable_model() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 60, "2", "d.csv");
    let out = damcast(
        dir.path(),
        &[
            "train", "--data", "d.csv", "--model", "oblivious_ordered", "--window", "14",
            "--month", "2023-02", "--out", "m.model", "--seed", "9",
        ],
    );
    assert_exit(&out, 0);

    let run = || {
        damcast(
            dir.path(),
            &[
                "evaluate", "--data", "d.csv", "--model-file", "m.model", "--window", "14",
                "--month", "2023-02",
            ],
        )
    };
    let a = run();
    assert_exit(&a, 0);
    let text = stdout(&a);
    for metric in ["mae ", "mape ", "rmse ", "r2 ", "fsi ", "n_hours "] {
        assert!(text.contains(metric), "missing {metric} in {text}");
    }
    let b = run();
    assert_eq!(stdout(&a), stdout(&b), "evaluation must be reproducible");

    let out = damcast(
        dir.path(),
        &[
            "evaluate", "--data", "d.csv", "--model-file", "missing.model", "--window", "14",
            "--month", "2023-02",
        ],
    );
    assert_exit(&out, 2);

    fs::write(dir.path().join("corrupt.model"), "damcast model v1\nkind ensemble\n").unwrap();
    let out = damcast(
        dir.path(),
        &[
            "evaluate", "--data", "d.csv", "--model-file", "corrupt.model", "--window", "14",
            "--month", "2023-02",
        ],
    );
    assert_exit(&out, 2);
}

fn write_config(dir: &Path, name: &str, models: &[&str]) {
    let mut cfg = String::from("market synth d.csv\nwindow 7\n");
    for m in models {
        cfg.push_str(&format!("model {m}\n"));
    }
    cfg.push_str("month 2023-02\nmonth 2023-03\nseed 4\nout rep\ntrees 20\nmax_depth 3\nlearning_rate 0.2\n");
    fs::write(dir.join(name), cfg).unwrap();
}

#[test]
fn benchmark_with_naive_only_reports_exactly_zero_skill() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 90, "3", "d.csv");
    write_config(dir.path(), "naive.cfg", &["naive"]);
    let out = damcast(dir.path(), &["benchmark", "--config", "naive.cfg"]);
    assert_exit(&out, 0);
    let results = fs::read_to_string(dir.path().join("rep/results.csv")).unwrap();
    let fsi_lines: Vec<&str> = results.lines().filter(|l| l.contains(",fsi,")).collect();
    assert!(!fsi_lines.is_empty());
    for line in fsi_lines {
        assert!(line.ends_with(",fsi,0"), "persistence skill must be 0: {line}");
    }
}

#[test]
fn benchmark_missing_market_file_names_it_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("bad.cfg"),
        "market synth absent.csv\nwindow 7\nmodel naive\nmonth 2023-02\nout rep\n",
    )
    .unwrap();
    let out = damcast(dir.path(), &["benchmark", "--config", "bad.cfg"]);
    assert_exit(&out, 2);
    assert!(stderr(&out).contains("absent.csv"));
}

#[test]
fn benchmark_out_flag_overrides_the_config_directory() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 90, "3", "d.csv");
    write_config(dir.path(), "b.cfg", &["naive", "levelwise_exact"]);
    let out = damcast(
        dir.path(),
        &["benchmark", "--config", "b.cfg", "--out", "elsewhere"],
    );
    assert_exit(&out, 0);
    assert!(dir.path().join("elsewhere/results.csv").exists());
    assert!(!dir.path().join("rep").exists(), "config dir must be untouched");
}

#[test]
fn report_recomputes_the_emitted_results_exactly() {
    let dir = tempfile::tempdir().unwrap();
    synth(dir.path(), 90, "3", "d.csv");
    write_config(dir.path(), "b.cfg", &["naive", "leafwise_histogram"]);
    let out = damcast(dir.path(), &["benchmark", "--config", "b.cfg"]);
    assert_exit(&out, 0);
    let out = damcast(dir.path(), &["report", "--traces", "rep/traces.csv"]);
    assert_exit(&out, 0);
    let emitted = fs::read_to_string(dir.path().join("rep/results.csv")).unwrap();
    assert_eq!(stdout(&out), emitted, "recomputation must match emission");

    fs::write(dir.path().join("junk.csv"), "nope\n").unwrap();
    let out = damcast(dir.path(), &["report", "--traces", "junk.csv"]);
    assert_exit(&out, 2);
}

#[test]
fn help_exits_zero_everywhere_and_bare_invocation_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["synth", "ingest-check", "train", "evaluate", "benchmark", "report"] {
        let out = damcast(dir.path(), &[sub, "--help"]);
        assert_exit(&out, 0);
        assert!(stdout(&out).contains("Usage"));
    }
    let out = damcast(dir.path(), &["--help"]);
    assert_exit(&out, 0);

    let out = damcast(dir.path(), &[]);
    assert_exit(&out, 1);

    let out = damcast(dir.path(), &["synth", "--days", "2", "--out", "x.csv", "--bogus"]);
    assert_exit(&out, 1);
}
