//! End-to-end command tests: exit codes, config validation, dataset schema
//! handling and re-analysis properties, both through the library entry
//! points and through the built binary.

use std::path::Path;
use std::process::Command;

use decoy_qkd::bounds::{BoundPolicy, Estimator};
use decoy_qkd::security::{AnalysisOptions, ProtocolVariant};

use decoy_qkd_cli::commands::{cmd_analyze, cmd_simulate, cmd_sweep, AnalyzeOverrides};
use decoy_qkd_cli::config::ConfigFile;
use decoy_qkd_cli::records::{read_metadata, read_records};
use decoy_qkd_cli::sweep::SweepVariable;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_decoy-qkd"))
}

fn small_config() -> ConfigFile {
    let mut file = ConfigFile::default();
    file.campaign.sessions = 20;
    file.campaign.session_duration_s = 0.5;
    file
}

fn write_config(dir: &Path, file: &ConfigFile) -> std::path::PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, toml::to_string(file).unwrap()).unwrap();
    path
}

#[test]
fn simulate_writes_labeled_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config().build().unwrap();
    let (dataset, summary) = cmd_simulate(&cfg, dir.path()).unwrap();

    assert_eq!(summary.sessions, 20);
    let records = read_records(&dataset).unwrap();
    assert_eq!(records.len(), 20);
    // synthetic time base
    assert_eq!(records[3].timestamp_offset_s, 3.0 * 0.5);

    // every output is labeled with variant + policy
    let meta = read_metadata(&dataset).unwrap();
    assert_eq!(meta.schema_version, decoy_qkd_cli::SCHEMA_VERSION);
    assert_eq!(meta.variant, "weak_plus_vacuum_corrected");
    assert_eq!(meta.vacuum_term, "half_weighted");
    assert_eq!(meta.n_std_devs, 10.0);
    assert!(meta.modeling_assumptions.contains("misalignment"));
}

#[test]
fn analyze_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config().build().unwrap();
    let (dataset, _) = cmd_simulate(&cfg, dir.path()).unwrap();
    let original = read_records(&dataset).unwrap();

    let (_, again) = cmd_analyze(
        &dataset,
        &cfg,
        &AnalyzeOverrides::default(),
        &dir.path().join("re"),
    )
    .unwrap();
    for (a, b) in original.iter().zip(&again) {
        assert_eq!(a.key_rate_bps.to_bits(), b.key_rate_bps.to_bits());
        assert_eq!(a.q1_lower.to_bits(), b.q1_lower.to_bits());
        assert_eq!(a.e1_upper.to_bits(), b.e1_upper.to_bits());
        assert_eq!(a.verdict, b.verdict);
    }
}

#[test]
fn reanalysis_orderings_hold_per_record() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config().build().unwrap();
    let (dataset, _) = cmd_simulate(&cfg, dir.path()).unwrap();
    let corrected = read_records(&dataset).unwrap();

    // the as-printed gain bound never beats the corrected one
    let printed_overrides = AnalyzeOverrides {
        policy: None,
        options: Some(AnalysisOptions {
            variant: ProtocolVariant::WeakPlusVacuumAsPrinted,
            ..cfg.options
        }),
    };
    let (_, printed) = cmd_analyze(&dataset, &cfg, &printed_overrides, &dir.path().join("p"))
        .unwrap();
    for (c, p) in corrected.iter().zip(&printed) {
        assert!(p.key_rate_bps <= c.key_rate_bps);
    }

    // dropping the widening never hurts the rate
    let k0 = AnalyzeOverrides {
        policy: Some(BoundPolicy::new(0.0, Estimator::Binomial).unwrap()),
        options: None,
    };
    let (_, unwidened) = cmd_analyze(&dataset, &cfg, &k0, &dir.path().join("k0")).unwrap();
    for (c, u) in corrected.iter().zip(&unwidened) {
        assert!(u.key_rate_bps >= c.key_rate_bps);
    }
}

#[test]
fn sweep_y0_emits_both_protocol_curves() {
    let dir = tempfile::tempdir().unwrap();
    // the reference 71 s statistics; sweeps never sample, so the campaign
    // size is irrelevant
    let cfg = ConfigFile::default().build().unwrap();
    let outcome = cmd_sweep(&cfg, SweepVariable::Y0, 1.34e-4, 2e-3, 12, dir.path()).unwrap();
    assert_eq!(outcome.crossings.len(), 2);
    let text = std::fs::read_to_string(&outcome.curve_path).unwrap();
    assert!(text.contains("weak_plus_vacuum_corrected"));
    assert!(text.contains("single_decoy"));
}

#[test]
fn sweep_distance_reoptimizes_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ConfigFile::default().build().unwrap();
    let outcome = cmd_sweep(&cfg, SweepVariable::Distance, 10.0, 40.0, 3, dir.path()).unwrap();
    let records = std::fs::read_to_string(&outcome.curve_path).unwrap();
    let rates: Vec<f64> = records
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(rates.len(), 3);
    // longer fiber, lower optimized rate
    assert!(rates[0] > rates[1] && rates[1] > rates[2], "{rates:?}");
}

#[test]
fn binary_simulate_and_analyze_succeed() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");

    let status = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("records.csv").exists());
    assert!(out.join("records.csv.meta.toml").exists());
    assert!(out.join("summary.toml").exists());

    let status = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(out.join("records.csv"))
        .arg("--out")
        .arg(out.join("re"))
        .arg("--quiet")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("re/records_reanalyzed.csv").exists());
}

#[test]
fn binary_rejects_bad_probability_sum_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = small_config();
    file.source.p_vacuum = 0.5; // simplex no longer closes
    let config = write_config(dir.path(), &file);

    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("p_signal + p_decoy + p_vacuum"),
        "stderr should name the failing field, got: {stderr}"
    );
}

#[test]
fn binary_rejects_unknown_config_key_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    std::fs::write(&config, "[source]\nmoo = 1.0\n").unwrap();
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn binary_rejects_truncated_dataset_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap()
        .success());

    // chop the dataset mid-row
    let dataset = out.join("records.csv");
    let text = std::fs::read_to_string(&dataset).unwrap();
    std::fs::write(&dataset, &text[..text.len() * 2 / 3]).unwrap();

    let output = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(&dataset)
        .arg("--out")
        .arg(out.join("re"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("schema"), "got: {stderr}");
}

#[test]
fn binary_rejects_schema_version_mismatch_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap()
        .success());

    let sidecar = out.join("records.csv.meta.toml");
    let text = std::fs::read_to_string(&sidecar).unwrap();
    std::fs::write(&sidecar, text.replace("schema_version = \"1\"", "schema_version = \"99\""))
        .unwrap();

    let output = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(out.join("records.csv"))
        .arg("--out")
        .arg(out.join("re"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("schema-version mismatch"));
}

#[test]
fn binary_missing_sidecar_is_io_error_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .arg("--quiet")
        .status()
        .unwrap()
        .success());
    std::fs::remove_file(out.join("records.csv.meta.toml")).unwrap();

    let output = bin()
        .args(["analyze", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(out.join("records.csv"))
        .arg("--out")
        .arg(out.join("re"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
}

#[test]
fn binary_rejects_empty_sweep_range_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let output = bin()
        .args(["sweep", "--variable", "y0", "--start", "0.2", "--stop", "0.1"])
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn binary_surfaces_infeasible_optimizer_ranges() {
    let dir = tempfile::tempdir().unwrap();
    let mut file = small_config();
    file.optimize.mu_lo = 0.05;
    file.optimize.mu_hi = 0.1;
    file.optimize.nu_lo = 0.2; // nu > mu over the whole grid
    file.optimize.nu_hi = 0.3;
    let config = write_config(dir.path(), &file);
    let output = bin()
        .args(["optimize", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&output.stderr).contains("empty feasible set"));
}

#[test]
fn binary_quiet_suppresses_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let output = bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .arg("--quiet")
        .output()
        .unwrap();
    assert!(output.status.success());
    assert!(output.stdout.is_empty());
}

#[test]
fn binary_seed_and_sessions_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let out = dir.path().join("out");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .args(["--seed", "7", "--sessions", "3", "--quiet"])
        .status()
        .unwrap()
        .success());
    let records = read_records(&out.join("records.csv")).unwrap();
    assert_eq!(records.len(), 3);
    let meta = read_metadata(&out.join("records.csv")).unwrap();
    assert_eq!(meta.master_seed, 7);
}
