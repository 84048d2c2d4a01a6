#![allow(clippy::needless_range_loop)]

mod common;

use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::Command;

use common::{read, small_config};
use sparsewave::core::geo::{synth_bathymetry, BathymetryProfile, GridSpec};
use sparsewave::formats::{read_frame_series, read_json, read_pgm, read_report_csv, write_json};
use sparsewave::pipeline::*;
use sparsewave::Stage;

const STAGES: [Stage; 5] = [Stage::Simulate, Stage::Train, Stage::Reconstruct, Stage::Compare, Stage::Render];

fn manifest(out: &Path, s: Stage) -> RunManifest {
    read_json(&manifest_path(out, s)).unwrap()
}

#[test]
fn full_run_manifests_report_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let cfg = small_config();
    run_all(&cfg, out).unwrap();

    // every input of a stage was written by an earlier one
    let mut produced: HashSet<PathBuf> = HashSet::new();
    for s in STAGES {
        let m = manifest(out, s);
        assert_eq!(m.stage, s.to_string());
        assert_eq!(m.config_hash, cfg.hash());
        for i in &m.inputs {
            assert!(produced.contains(i), "{s} reads {} before it is written", i.display());
        }
        for o in &m.outputs {
            assert!(out.join(o).is_file(), "{} listed but missing", o.display());
        }
        produced.extend(m.outputs);
    }

    let rows = read_report_csv(&report_csv_path(out)).unwrap();
    assert_eq!(rows.len(), 2 * cfg.virtual_pairs.len() * cfg.test_epicenters.len());
    let methods: HashSet<&str> = rows.iter().map(|r| r.method.as_str()).collect();
    assert_eq!(methods, HashSet::from(["senseiver", "lihfp"]));
    for r in &rows {
        assert!(r.maxamp_mae_m >= 0.0 && r.waveform_mae_m >= 0.0);
        assert!(r.arrival_mae_min.is_none_or(|a| a >= 0.0));
    }

    let (_, recon) = read_frame_series(&recon_dir(out, "E1")).unwrap();
    let (meta, truth) = read_frame_series(&series_dir(out, "test", "E1")).unwrap();
    assert_eq!(meta.info.config_hash.as_deref(), Some(cfg.hash().as_str()));
    assert_eq!(meta.info.constants, Some(cfg.constants));
    assert_eq!(recon.times, truth.times);
    for k in &cfg.eval.render_frames {
        for kind in ["truth", "recon", "diff"] {
            let (w, h, px) = read_pgm(&out.join("render/E1").join(format!("frame_{k:03}_{kind}.pgm"))).unwrap();
            assert_eq!((w, h), (cfg.grid.nlon, cfg.grid.nlat));
            assert_eq!(px.len(), w * h);
        }
    }
}

#[test]
fn reruns_are_bitwise_identical() {
    let cfg = small_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&cfg, a.path()).unwrap();
    run_all(&cfg, b.path()).unwrap();
    for rel in [
        "dataset/train/T1/frames.bin",
        "dataset/test/E1/frames.bin",
        "model/checkpoint.bin",
        "model/loss.csv",
        "recon/E1/frames.bin",
        "compare/report.csv",
    ] {
        assert_eq!(read(&a.path().join(rel)), read(&b.path().join(rel)), "{rel} differs");
    }
}

#[test]
fn swapping_a_pair_changes_nothing() {
    let mut cfg = small_config();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_all(&cfg, a.path()).unwrap();
    cfg.virtual_pairs = cfg.virtual_pairs.iter().map(|(x, y)| (y.clone(), x.clone())).collect();
    // the pairs feed only compare; simulate and train outputs are reused
    copy_tree(a.path(), b.path());
    cmd_compare(&cfg, b.path()).unwrap();
    assert_eq!(read(&report_csv_path(a.path())), read(&report_csv_path(b.path())));
}

fn copy_tree(from: &Path, to: &Path) {
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dst = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            std::fs::create_dir_all(&dst).unwrap();
            copy_tree(&e.path(), &dst);
        } else {
            std::fs::copy(e.path(), dst).unwrap();
        }
    }
}

#[test]
fn no_epicenters_gives_empty_dataset_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg.train_epicenters.clear();
    cfg.test_epicenters.clear();
    let m = cmd_simulate(&cfg, dir.path()).unwrap();
    assert!(manifest_path(dir.path(), Stage::Simulate).is_file());
    assert!(!m.outputs.iter().any(|p| p.ends_with("frames.bin")));
    assert!(!dataset_dir(dir.path()).join("train").exists());
}

#[test]
fn train_without_dataset_is_a_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let e = cmd_train(&small_config(), dir.path()).unwrap_err();
    assert_eq!((e.stage, e.code), (Stage::Train, "missing-input"));
}

#[test]
fn zero_field_renders_mid_gray_and_identical_fields_black() {
    let spec = GridSpec::new(130.0, 160.0, 20.0, 50.0, 24, 16).unwrap();
    let b = synth_bathymetry(spec, BathymetryProfile::Seamount).unwrap();
    let zero = vec![0.0; spec.len()];
    let gray = signed_raster(&zero, &b, 0.5);
    assert_eq!(gray.len(), spec.nlon * spec.nlat);
    assert!(gray.iter().all(|&p| p == 127));
    let field: Vec<f64> = (0..spec.len()).map(|k| (k as f64 * 0.1).sin()).collect();
    assert!(abs_diff_raster(&field, &field, &b, 0.5).iter().all(|&p| p == 0));
    // saturation at the ends of the range
    assert!(signed_raster(&vec![1.0; spec.len()], &b, 0.5).iter().all(|&p| p == 254));
    assert!(signed_raster(&vec![-1.0; spec.len()], &b, 0.5).iter().all(|&p| p == 0));
}

#[test]
fn raster_is_north_up_and_marks_land() {
    let spec = GridSpec::new(130.0, 140.0, 20.0, 30.0, 20, 10).unwrap();
    let b = synth_bathymetry(spec, BathymetryProfile::Shelf).unwrap();
    let field: Vec<f64> = (0..spec.len()).map(|c| if spec.ij(c).1 == spec.nlat - 1 { 0.5 } else { 0.0 }).collect();
    let px = signed_raster(&field, &b, 0.5);
    for i in 0..spec.nlon {
        let c = spec.index(i, spec.nlat - 1);
        let want = if b.is_land(c) { LAND_SHADE } else { 254 };
        assert_eq!(px[i], want);
    }
    assert!(b.ocean_cells().len() < spec.len());
    assert_eq!(px.iter().filter(|&&p| p == LAND_SHADE).count(), spec.len() - b.ocean_cells().len());
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsewave"))
}

#[test]
fn cli_reports_one_error_line_and_fails() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\"grid\": 3}").unwrap();
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8(o.stderr).unwrap();
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("stage=config code=config-read detail="), "{err}");

    let mut c = small_config();
    c.test_epicenters[0].lon = 100.0;
    write_json(&cfg, &c).unwrap();
    let o = bin().args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8(o.stderr).unwrap().starts_with("stage=config code=invalid-config"));
}

#[test]
fn cli_config_prints_the_effective_config() {
    let o = bin().args(["config", "--seed", "5"]).output().unwrap();
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["grid"]["nlon"], 96);
    assert_ne!(v["model"]["seed"], 0);
}

#[test]
fn shipped_desk_config_matches_the_builtin_one() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.json");
    let mut cfg = sparsewave::ExperimentConfig::load(&path).unwrap();
    cfg.validate().unwrap();
    cfg.sensors = sparsewave::config::SensorSource::Inline(cfg.load_sensors().unwrap());
    assert_eq!(cfg.effective(), sparsewave::ExperimentConfig::desk().effective());
}
