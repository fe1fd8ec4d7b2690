use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use taxi_regions::pipeline::{Manifest, Pipeline, PipelineConfig, PipelineError, Stage, LABELS, LEAVES, MANIFEST, POINTS};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/three_taxis.toml")
}

fn pipeline(out: &Path, overrides: &[&str]) -> Pipeline {
    let overrides: Vec<String> = overrides.iter().map(|s| s.to_string()).collect();
    Pipeline::new(PipelineConfig::load(&fixture(), &overrides).unwrap(), out.to_path_buf()).unwrap()
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn full_run_records_every_stage() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), &[]);
    let reports = p.run_all().unwrap();
    assert_eq!(reports.len(), 6);
    let manifest = Manifest::load(dir.path()).unwrap();
    let names: Vec<&str> = manifest.stages.keys().map(String::as_str).collect();
    let mut expected: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
    expected.sort();
    assert_eq!(names, expected);
    for rec in manifest.stages.values() {
        assert_eq!(rec.config_hash, p.config_hash());
        for out in rec.outputs.keys() {
            assert!(dir.path().join(out).is_file(), "{out}");
        }
    }
    let points = fs::read_to_string(dir.path().join(POINTS)).unwrap();
    assert_eq!(points.lines().count(), 342);
    assert!(fs::read_to_string(dir.path().join(LABELS)).unwrap().starts_with("region_id;label;"));
}

#[test]
fn later_stage_without_inputs_names_the_producer() {
    let dir = tempfile::tempdir().unwrap();
    let p = pipeline(dir.path(), &[]);
    p.run(&[Stage::Ingest, Stage::Trips]).unwrap();
    match p.run_stage(Stage::Dtn) {
        Err(PipelineError::MissingArtifact { artifact, stage }) => {
            assert_eq!(stage, Stage::Regions);
            assert!(artifact.contains("events") || artifact.contains("leaves"), "{artifact}");
        }
        other => panic!("expected a missing artifact, got {other:?}"),
    }
    assert!(!dir.path().join(LEAVES).exists());
}

#[test]
fn stages_are_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    pipeline(a.path(), &[]).run_all().unwrap();
    pipeline(b.path(), &[]).run_all().unwrap();
    assert_eq!(snapshot(a.path()), snapshot(b.path()));

    let before = snapshot(a.path());
    pipeline(a.path(), &[]).run(&[Stage::Stats]).unwrap();
    assert_eq!(snapshot(a.path()), before);
}

#[test]
fn overrides_change_the_hash_and_reach_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let base = pipeline(dir.path(), &[]);
    let changed = pipeline(dir.path(), &["trips.d_threshold_m=75", "dtn.runs=2"]);
    assert_ne!(base.config_hash(), changed.config_hash());
    assert_eq!(changed.config.trips.d_threshold_m, 75.0);
    assert_eq!(changed.config.dtn.runs, 2);
    assert!(PipelineConfig::load(&fixture(), &["trips.nope=1".to_string()]).is_err());
}

#[test]
fn validation_reports_every_bad_field() {
    let text = fs::read_to_string(fixture()).unwrap();
    let text = text
        .replace("d_threshold_m = 50.0", "d_threshold_m = -1.0")
        .replace("threshold_fraction = 0.25", "threshold_fraction = 1.5")
        .replace("minsup = 0.2", "minsup = 0.0")
        .replace("runs = 5", "runs = 0");
    let cfg = PipelineConfig::from_toml(&text).unwrap();
    let Err(PipelineError::Config(errs)) = cfg.validate() else { panic!("expected config errors") };
    for field in ["trips.d_threshold_m", "regions.threshold_fraction", "functions.minsup", "dtn.runs"] {
        assert!(errs.iter().any(|e| e.starts_with(field)), "{field} missing from {errs:?}");
    }
    assert_eq!(errs.len(), 4);
    assert!(PipelineConfig::from_toml("rng_seed = 1\nunknown = 2").is_err());
}

#[test]
fn cli_runs_all_stages() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_taxi-regions"))
        .args(["all", "--config"])
        .arg(fixture())
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join(MANIFEST).is_file());
    let stdout = String::from_utf8_lossy(&out.stdout);
    for s in Stage::ALL {
        assert!(stdout.contains(&format!("[{}]", s.name())), "{stdout}");
    }

    let missing = Command::new(env!("CARGO_BIN_EXE_taxi-regions")).args(["trips", "--config"]).arg(fixture()).arg("--out").arg(dir.path().join("empty")).output().unwrap();
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains(POINTS));
}

#[test]
fn cli_fits_standalone_samples() {
    let dir = tempfile::tempdir().unwrap();
    let samples = dir.path().join("s.txt");
    let body: String = (1..=400).map(|i| format!("{}\n", 1.0 + (i as f64 * 0.37) % 25.0)).collect();
    fs::write(&samples, body).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_taxi-regions"))
        .args(["stats", "--samples"])
        .arg(&samples)
        .args(["--x-min", "1"])
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    for name in ["exponential", "lognormal", "powerlaw", "truncated_powerlaw"] {
        assert!(stdout.contains(name), "{stdout}");
    }
    assert!(dir.path().join("stats_samples.txt").is_file());
    assert!(dir.path().join("ccdf_samples.txt").is_file());

    fs::write(&samples, "1.0\nabc\n").unwrap();
    let bad = Command::new(env!("CARGO_BIN_EXE_taxi-regions")).args(["stats", "--samples"]).arg(&samples).output().unwrap();
    assert!(!bad.status.success());
}
