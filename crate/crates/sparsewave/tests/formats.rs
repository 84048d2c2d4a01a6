use sparsewave::core::geo::*;
use sparsewave::core::lihfp::WaveformSeries;
use sparsewave::core::metrics::{ComparisonRow, FrameError, Method};
use sparsewave::core::model::{Model, ModelConfig};
use sparsewave::core::swe::{FrameSeries, PhysicalConstants, VelocityFrames};
use sparsewave::formats::*;

fn small_grid() -> BathymetryGrid {
    let spec = GridSpec::new(130.0, 140.0, 20.0, 28.0, 10, 8).unwrap();
    synth_bathymetry(spec, BathymetryProfile::Shelf).unwrap()
}

#[test]
fn bathymetry_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let b = small_grid();
    let path = dir.path().join("bathy.json");
    write_bathymetry(&path, &b).unwrap();
    let back = read_bathymetry(&path).unwrap();
    assert_eq!(back.spec(), b.spec());
    for (x, y) in back.z_b().iter().zip(b.z_b()) {
        assert_eq!(*x, *y as f32 as f64);
    }
}

#[test]
fn f32_values_survive_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.bin");
    let v = vec![0.0, -1.5, 3.25, 1e-7_f32 as f64, f32::MAX as f64];
    write_f32(&path, &v).unwrap();
    assert_eq!(read_f32(&path).unwrap(), v);
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 20);
}

#[test]
fn frame_series_round_trip_with_velocities() {
    let dir = tempfile::tempdir().unwrap();
    let b = small_grid();
    let spec = *b.spec();
    let n = 3;
    let fs = FrameSeries {
        spec,
        times: vec![0.0, 50.0, 100.0],
        eta: (0..n * spec.len()).map(|k| k as f64 * 0.25).collect(),
        velocities: Some(VelocityFrames {
            u: (0..n * spec.nlat * (spec.nlon + 1)).map(|k| k as f64).collect(),
            v: (0..n * (spec.nlat + 1) * spec.nlon).map(|k| -(k as f64)).collect(),
        }),
    };
    let ep = GeoPoint::new(135.0, 24.0).unwrap();
    let info = SeriesInfo {
        id: "X".into(),
        epicenter: Some(ep),
        constants: Some(PhysicalConstants::default()),
        config_hash: Some("abc".into()),
    };
    let written = write_frame_series(dir.path(), &fs, &info).unwrap();
    assert_eq!(written.len(), 3);
    let (meta, back) = read_frame_series(dir.path()).unwrap();
    assert_eq!(meta.info, info);
    assert_eq!(back.times, fs.times);
    assert_eq!(back.eta, fs.eta);
    let (bv, fv) = (back.velocities.unwrap(), fs.velocities.unwrap());
    assert_eq!(bv.u, fv.u);
    assert_eq!(bv.v, fv.v);
}

#[test]
fn truncated_frames_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let spec = *small_grid().spec();
    let fs = FrameSeries { spec, times: vec![0.0, 1.0], eta: vec![0.0; 2 * spec.len()], velocities: None };
    write_frame_series(dir.path(), &fs, &SeriesInfo::default()).unwrap();
    write_f32(&dir.path().join("frames.bin"), &vec![0.0; spec.len()]).unwrap();
    assert!(read_frame_series(dir.path()).is_err());
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ModelConfig { num_freq_bands: 4, latent_rows: 4, latent_dim: 8, num_heads: 2, mlp_hidden: 8, seed: 7, ..Default::default() };
    let model = Model::<f32>::new(cfg, 2.5).unwrap();
    let sensors = vec![Sensor { id: "A".into(), lon: 133.0, lat: 22.0 }];
    let spec = *small_grid().spec();
    let path = dir.path().join("m").join("ckpt.json");
    write_checkpoint(&path, &model, spec, &sensors).unwrap();
    let (manifest, back) = read_checkpoint(&path).unwrap();
    assert_eq!(manifest.grid, spec);
    assert_eq!(manifest.sensors, sensors);
    assert_eq!(manifest.param_count, model.param_count());
    assert_eq!(back.scale(), 2.5);
    assert_eq!(back.config(), model.config());
    let (a, b): (Vec<u32>, Vec<u32>) =
        (model.params().iter().map(|x| x.to_bits()).collect(), back.params().iter().map(|x| x.to_bits()).collect());
    assert_eq!(a, b);

    // a checkpoint whose blocks disagree with its config is refused
    std::fs::write(path.with_extension("bin"), vec![0u8; 8]).unwrap();
    assert!(read_checkpoint(&path).is_err());
}

#[test]
fn csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let loss = vec![1.0, 0.5, 0.125];
    write_loss_history(&dir.path().join("loss.csv"), &loss).unwrap();
    assert_eq!(read_loss_history(&dir.path().join("loss.csv")).unwrap(), loss);

    let errs = vec![
        FrameError { time: 0.0, value: Some(0.25), masked_pixel_count: 10 },
        FrameError { time: 50.0, value: None, masked_pixel_count: 0 },
    ];
    write_frame_errors(&dir.path().join("e.csv"), &errs).unwrap();
    assert_eq!(read_frame_errors(&dir.path().join("e.csv")).unwrap(), errs);

    let loc = GeoPoint::new(140.0, 25.0).unwrap();
    let w = WaveformSeries::new(vec![0.0, 60.0], vec![0.5, -0.25], loc);
    let csv = dir.path().join("w.csv");
    write_waveform(&csv, "P", &w).unwrap();
    let (side, back) = read_waveform(&csv).unwrap();
    assert_eq!(side.id, "P");
    assert_eq!(back, w);
}

#[test]
fn report_csv_keeps_missing_arrival_empty() {
    let dir = tempfile::tempdir().unwrap();
    let row = |method, arrival| ComparisonRow {
        epicenter_id: "E1".into(),
        virtual_id: "S01-S05".into(),
        method,
        arrival_mae_min: arrival,
        maxamp_mae_m: 0.5,
        waveform_mae_m: 0.125,
    };
    let path = dir.path().join("r.csv");
    write_report_csv(&path, &[row(Method::Senseiver, Some(1.5)), row(Method::Lihfp, None)]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "epicenter_id,virtual_id,method,arrival_mae_min,maxamp_mae_m,waveform_mae_m");
    assert_eq!(lines[1], "E1,S01-S05,senseiver,1.5,0.5,0.125");
    assert_eq!(lines[2], "E1,S01-S05,lihfp,,0.5,0.125");
    let back = read_report_csv(&path).unwrap();
    assert_eq!(back[1].arrival_mae_min, None);
    assert_eq!(back[0].method, "senseiver");
}

#[test]
fn pgm_round_trip_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.pgm");
    let px: Vec<u8> = (0..12).collect();
    write_pgm(&path, 4, 3, &px).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert!(bytes.starts_with(b"P5\n4 3\n255\n"));
    assert_eq!(read_pgm(&path).unwrap(), (4, 3, px));
    assert!(write_pgm(&path, 5, 3, &[0; 12]).is_err());
}
