//! Experiment stages. Each stage reads the artifacts of earlier stages from
//! the output directory and records what it read and wrote in
//! `manifests/<stage>.json`.
//!
//! ```text
//! dataset/  bathymetry.{json,bin} sensors.json {train,test}/<id>/{meta.json,frames.bin[,uv.bin]}
//! model/    checkpoint.{json,bin} loss.csv split.json
//! recon/    <id>/{meta.json,frames.bin,errors.csv,summary.json}
//! compare/  report.{json,csv} waveforms/<epicenter>/<virtual>_<kind>.{csv,json}
//! render/   <id>/frame_<k>_{truth,recon,diff}.pgm render.json
//! ```

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sparsewave_core::geo::{sample_field, BathymetryGrid, GeoPoint, Sensor, SensorNetwork};
use sparsewave_core::lihfp::{lihfp_virtual_waveform, midpoint, LihfpError, WaveformSeries};
use sparsewave_core::metrics::{
    median_filter, recon_error_frame, ComparisonRow, EvalReport, FrameError, Method,
};
use sparsewave_core::model::{encode_positions, train, Model, ModelError, Reconstructor, TrainData};
use sparsewave_core::swe::{simulate, EpicenterSource, FrameSeries, SimError, SimOptions};

use crate::config::{virtual_id, Epicenter, ExperimentConfig};
use crate::error::{Context, PipelineError, Stage};
use crate::formats::{self, SeriesInfo};

/// Record of one stage run. Paths are relative to the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub stage: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

struct Recorder<'a> {
    stage: Stage,
    out: &'a Path,
    started: u64,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    notes: Vec<String>,
}

impl<'a> Recorder<'a> {
    fn new(stage: Stage, out: &'a Path) -> Self {
        Self { stage, out, started: now(), inputs: Vec::new(), outputs: Vec::new(), notes: Vec::new() }
    }

    fn rel(&self, p: &Path) -> PathBuf {
        p.strip_prefix(self.out).map(Path::to_path_buf).unwrap_or_else(|_| p.to_path_buf())
    }

    fn read(&mut self, p: &Path) {
        let r = self.rel(p);
        if !self.inputs.contains(&r) {
            self.inputs.push(r);
        }
    }

    fn wrote(&mut self, paths: impl IntoIterator<Item = PathBuf>) {
        for p in paths {
            let r = self.rel(&p);
            self.outputs.push(r);
        }
    }

    fn finish(self, cfg: &ExperimentConfig) -> Result<RunManifest, PipelineError> {
        let m = RunManifest {
            stage: self.stage.to_string(),
            config_hash: cfg.hash(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix_s: self.started,
            finished_unix_s: now(),
            inputs: self.inputs,
            outputs: self.outputs,
            notes: self.notes,
        };
        let path = manifest_path(self.out, self.stage);
        formats::write_json(&path, &m).ctx(self.stage, "write")?;
        Ok(m)
    }
}

pub fn manifest_path(out: &Path, stage: Stage) -> PathBuf {
    out.join("manifests").join(format!("{stage}.json"))
}

pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}

pub fn series_dir(out: &Path, split: &str, id: &str) -> PathBuf {
    dataset_dir(out).join(split).join(id)
}

pub fn checkpoint_path(out: &Path) -> PathBuf {
    out.join("model").join("checkpoint.json")
}

pub fn recon_dir(out: &Path, id: &str) -> PathBuf {
    out.join("recon").join(id)
}

pub fn report_csv_path(out: &Path) -> PathBuf {
    out.join("compare").join("report.csv")
}

fn sim_code(e: &SimError) -> &'static str {
    match e {
        SimError::BlowUp { .. } => "blow-up",
        SimError::EpicenterOnLand { .. } => "epicenter-on-land",
        _ => "simulate",
    }
}

fn model_code(e: &ModelError) -> &'static str {
    match e {
        ModelError::Diverged(_) | ModelError::NonFiniteGradient(_) => "diverged",
        ModelError::NoFrames => "no-frames",
        _ => "model",
    }
}

/// Simulates every training and test epicenter.
pub fn cmd_simulate(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    const S: Stage = Stage::Simulate;
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut rec = Recorder::new(S, out);
    let bathy = cfg.load_bathymetry()?;
    let (net, warnings) = SensorNetwork::new(cfg.load_sensors()?, &bathy).ctx(S, "sensors")?;
    for w in warnings {
        rec.notes.push(format!("sensor {} moved from ({}, {}) to ({}, {})", w.id, w.from.lon, w.from.lat, w.to.lon, w.to.lat));
    }
    let ds = dataset_dir(out);
    let bathy_path = ds.join("bathymetry.json");
    formats::write_bathymetry(&bathy_path, &bathy).ctx(S, "write")?;
    rec.wrote([bathy_path.clone(), bathy_path.with_extension("bin")]);
    let sensors_path = ds.join("sensors.json");
    formats::write_sensors(&sensors_path, net.sensors()).ctx(S, "write")?;
    rec.wrote([sensors_path]);
    let config_path = ds.join("config.json");
    formats::write_json(&config_path, &cfg).ctx(S, "write")?;
    rec.wrote([config_path]);

    let opts = SimOptions { boundary: cfg.boundary, store_velocities: cfg.store_velocities, ..SimOptions::default() };
    let hash = cfg.hash();
    for (split, list) in [("train", &cfg.train_epicenters), ("test", &cfg.test_epicenters)] {
        for e in list {
            let src = EpicenterSource::new(e.location());
            let series = simulate(&src, &bathy, &cfg.constants, &opts, cfg.duration_s, cfg.out_interval_s)
                .map_err(|err| PipelineError::new(S, sim_code(&err), format!("epicenter {}: {err}", e.id)))?;
            let info = SeriesInfo {
                id: e.id.clone(),
                epicenter: Some(e.location()),
                constants: Some(cfg.constants),
                config_hash: Some(hash.clone()),
            };
            let written = formats::write_frame_series(&series_dir(out, split, &e.id), &series, &info).ctx(S, "write")?;
            rec.wrote(written);
        }
    }
    rec.finish(&cfg)
}

struct Dataset {
    bathy: BathymetryGrid,
    net: SensorNetwork,
}

fn load_dataset(out: &Path, stage: Stage, rec: &mut Recorder) -> Result<Dataset, PipelineError> {
    let ds = dataset_dir(out);
    let bathy_path = ds.join("bathymetry.json");
    let bathy = formats::read_bathymetry(&bathy_path).ctx(stage, "missing-input")?;
    rec.read(&bathy_path);
    rec.read(&bathy_path.with_extension("bin"));
    let sensors_path = ds.join("sensors.json");
    let sensors = formats::read_sensors(&sensors_path).ctx(stage, "missing-input")?;
    rec.read(&sensors_path);
    let (net, _) = SensorNetwork::new(sensors, &bathy).ctx(stage, "sensors")?;
    Ok(Dataset { bathy, net })
}

fn load_series(out: &Path, split: &str, id: &str, stage: Stage, rec: &mut Recorder) -> Result<FrameSeries, PipelineError> {
    let dir = series_dir(out, split, id);
    let (meta, series) = formats::read_frame_series(&dir).ctx(stage, "missing-input")?;
    rec.read(&dir.join("meta.json"));
    rec.read(&dir.join(&meta.frames));
    Ok(series)
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitRecord {
    frames_total: usize,
    train: Vec<usize>,
    held_out: Vec<usize>,
}

/// Trains on the training epicenters' frames and writes a checkpoint.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    const S: Stage = Stage::Train;
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut rec = Recorder::new(S, out);
    let ds = load_dataset(out, S, &mut rec)?;
    let mut all = Vec::new();
    for e in &cfg.train_epicenters {
        all.push(load_series(out, "train", &e.id, S, &mut rec)?);
    }
    for s in &all {
        if s.spec != *ds.bathy.spec() {
            return Err(PipelineError::new(S, "grid-mismatch", "frame series grid differs from bathymetry"));
        }
    }
    let frames: Vec<&[f64]> = all.iter().flat_map(|s| (0..s.n_frames()).map(move |k| s.frame(k))).collect();
    let data = TrainData { bathy: &ds.bathy, sensors: &ds.net, frames };
    let outcome = train::<f32>(&data, &cfg.model, &cfg.schedule).map_err(|e| PipelineError::new(S, model_code(&e), e))?;

    let ckpt = checkpoint_path(out);
    let written = formats::write_checkpoint(&ckpt, &outcome.model, *ds.bathy.spec(), ds.net.sensors()).ctx(S, "write")?;
    rec.wrote(written);
    let loss_path = out.join("model").join("loss.csv");
    formats::write_loss_history(&loss_path, &outcome.history).ctx(S, "write")?;
    rec.wrote([loss_path]);
    let split_path = out.join("model").join("split.json");
    let split = SplitRecord {
        frames_total: data.frames.len(),
        train: outcome.train_frames.clone(),
        held_out: outcome.held_out_frames.clone(),
    };
    formats::write_json(&split_path, &split).ctx(S, "write")?;
    rec.wrote([split_path]);
    if let Some(last) = outcome.history.last() {
        rec.notes.push(format!("final loss {last}"));
    }
    rec.finish(&cfg)
}

fn load_model(out: &Path, ds: &Dataset, stage: Stage, rec: &mut Recorder) -> Result<Model<f32>, PipelineError> {
    let ckpt = checkpoint_path(out);
    let (manifest, model) = formats::read_checkpoint(&ckpt).ctx(stage, "missing-input")?;
    rec.read(&ckpt);
    rec.read(&ckpt.with_extension("bin"));
    if manifest.grid != *ds.bathy.spec() {
        return Err(PipelineError::new(stage, "grid-mismatch", "checkpoint grid differs from dataset grid"));
    }
    if manifest.sensors != ds.net.sensors() {
        return Err(PipelineError::new(stage, "sensor-mismatch", "checkpoint sensors differ from dataset sensors"));
    }
    Ok(model)
}

fn find_epicenter<'c>(cfg: &'c ExperimentConfig, id: &str) -> Option<(&'static str, &'c Epicenter)> {
    cfg.test_epicenters
        .iter()
        .map(|e| ("test", e))
        .chain(cfg.train_epicenters.iter().map(|e| ("train", e)))
        .find(|(_, e)| e.id == id)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReconSummary {
    pub epicenter_id: String,
    pub frames: usize,
    pub global_mean_error: Option<f64>,
    pub trigger_time_min: Option<f64>,
}

/// Reconstructs every frame of the given epicenters (default: the test set).
pub fn cmd_reconstruct(cfg: &ExperimentConfig, out: &Path, ids: Option<&[String]>) -> Result<RunManifest, PipelineError> {
    const S: Stage = Stage::Reconstruct;
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut rec = Recorder::new(S, out);
    let ds = load_dataset(out, S, &mut rec)?;
    let model = load_model(out, &ds, S, &mut rec)?;
    let r = Reconstructor::new(&model, &ds.bathy, &ds.net.locations()).map_err(|e| PipelineError::new(S, "model", e))?;
    let hash = cfg.hash();
    let ids: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => cfg.test_epicenters.iter().map(|e| e.id.clone()).collect(),
    };
    for id in &ids {
        let (split, e) = find_epicenter(&cfg, id).ok_or_else(|| PipelineError::new(S, "unknown-epicenter", id))?;
        let truth = load_series(out, split, id, S, &mut rec)?;
        if truth.spec != *ds.bathy.spec() {
            return Err(PipelineError::new(S, "grid-mismatch", format!("epicenter {id}")));
        }
        let mut eta = Vec::with_capacity(truth.eta.len());
        let mut errors = Vec::with_capacity(truth.n_frames());
        for k in 0..truth.n_frames() {
            let frame = truth.frame(k);
            let readings = ds.net.read(frame, &ds.bathy).ctx(S, "sensors")?;
            let pred = r.field(&readings).map_err(|e| PipelineError::new(S, "model", e))?;
            errors.push(recon_error_frame(truth.times[k], frame, &pred, cfg.eval.mask_threshold_m));
            eta.extend(pred);
        }
        let recon = FrameSeries { spec: truth.spec, times: truth.times.clone(), eta, velocities: None };
        let dir = recon_dir(out, id);
        let info = SeriesInfo { id: id.clone(), epicenter: Some(e.location()), constants: None, config_hash: Some(hash.clone()) };
        rec.wrote(formats::write_frame_series(&dir, &recon, &info).ctx(S, "write")?);
        let err_path = dir.join("errors.csv");
        formats::write_frame_errors(&err_path, &errors).ctx(S, "write")?;
        rec.wrote([err_path]);
        let report = EvalReport::from_frames(errors, cfg.eval.trigger_level);
        let summary = ReconSummary {
            epicenter_id: id.clone(),
            frames: recon.n_frames(),
            global_mean_error: report.global_mean_error,
            trigger_time_min: report.trigger_time_min,
        };
        let sum_path = dir.join("summary.json");
        formats::write_json(&sum_path, &summary).ctx(S, "write")?;
        rec.wrote([sum_path]);
    }
    rec.finish(&cfg)
}

/// Evaluation of one epicenter: reconstruction errors plus virtual-point rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpicenterReport {
    pub epicenter_id: String,
    pub report: EvalReport,
}

/// A station record built from a sensor's readings.
fn station_series(series: &FrameSeries, s: &Sensor, bathy: &BathymetryGrid) -> Result<WaveformSeries, PipelineError> {
    let eta = (0..series.n_frames())
        .map(|k| sample_field(series.frame(k), bathy, s.location()))
        .collect::<Result<Vec<_>, _>>()
        .ctx(Stage::Compare, "sensors")?;
    Ok(WaveformSeries::new(series.times.clone(), eta, s.location()))
}

struct VirtualPoint {
    id: String,
    location: GeoPoint,
    stations: [Sensor; 2],
}

/// Virtual points from sensor pairs; pair order does not matter.
fn virtual_points(cfg: &ExperimentConfig, net: &SensorNetwork) -> Result<Vec<VirtualPoint>, PipelineError> {
    cfg.virtual_pairs
        .iter()
        .map(|(a, b)| {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let sa = net.get(a).ok_or_else(|| PipelineError::new(Stage::Compare, "unknown-sensor", a))?.clone();
            let sb = net.get(b).ok_or_else(|| PipelineError::new(Stage::Compare, "unknown-sensor", b))?.clone();
            let location = midpoint(sa.location(), sb.location()).ctx(Stage::Compare, "midpoint")?;
            Ok(VirtualPoint { id: virtual_id(a, b), location, stations: [sa, sb] })
        })
        .collect()
}

/// Truth, model and baseline waveforms at each virtual point of each test
/// epicenter, with their error rows.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    const S: Stage = Stage::Compare;
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut rec = Recorder::new(S, out);
    let ds = load_dataset(out, S, &mut rec)?;
    let model = load_model(out, &ds, S, &mut rec)?;
    let vps = virtual_points(&cfg, &ds.net)?;
    let locs: Vec<GeoPoint> = vps.iter().map(|v| v.location).collect();
    let model_err = |e: ModelError| PipelineError::new(S, "model", e);
    let a_s = encode_positions::<f32>(&ds.net.locations(), &ds.bathy, model.config()).map_err(model_err)?;
    let queries = model
        .prepare_queries(&encode_positions::<f32>(&locs, &ds.bathy, model.config()).map_err(model_err)?)
        .map_err(model_err)?;
    let thr = cfg.eval.arrival_threshold_m;

    let mut reports = Vec::new();
    let mut all_rows = Vec::new();
    for e in &cfg.test_epicenters {
        let truth = load_series(out, "test", &e.id, S, &mut rec)?;
        let err_path = recon_dir(out, &e.id).join("errors.csv");
        let frame_errors: Vec<FrameError> = formats::read_frame_errors(&err_path).ctx(S, "missing-input")?;
        rec.read(&err_path);

        let n = truth.n_frames();
        let mut decoded = vec![Vec::with_capacity(n); vps.len()];
        for k in 0..n {
            let readings = ds.net.read(truth.frame(k), &ds.bathy).ctx(S, "sensors")?;
            let z = model.encode(&readings, &a_s).map_err(model_err)?;
            for (dst, v) in decoded.iter_mut().zip(model.decode_prepared(&z, &queries).map_err(model_err)?) {
                dst.push(v);
            }
        }
        let mut rows = Vec::new();
        for (vp, raw) in vps.iter().zip(decoded) {
            let truth_w = WaveformSeries::new(
                truth.times.clone(),
                (0..n)
                    .map(|k| sample_field(truth.frame(k), &ds.bathy, vp.location))
                    .collect::<Result<_, _>>()
                    .ctx(S, "virtual-point")?,
                vp.location,
            );
            let model_w = median_filter(&WaveformSeries::new(truth.times.clone(), raw, vp.location), cfg.eval.median_kernel)
                .ctx(S, "median")?;
            let stations = [
                station_series(&truth, &vp.stations[0], &ds.bathy)?,
                station_series(&truth, &vp.stations[1], &ds.bathy)?,
            ];
            let base_w = lihfp_virtual_waveform(&stations, vp.location, &ds.bathy, thr).map_err(|err| {
                let code = match err {
                    LihfpError::NoSignal => "no-signal",
                    _ => "lihfp",
                };
                PipelineError::new(S, code, format!("epicenter {} virtual {}: {err}", e.id, vp.id))
            })?;
            let wdir = out.join("compare").join("waveforms").join(&e.id);
            for (kind, w) in [("truth", &truth_w), ("senseiver", &model_w), ("lihfp", &base_w)] {
                rec.wrote(formats::write_waveform(&wdir.join(format!("{}_{kind}.csv", vp.id)), &vp.id, w).ctx(S, "write")?);
            }
            for (method, w) in [(Method::Senseiver, &model_w), (Method::Lihfp, &base_w)] {
                rows.push(ComparisonRow::compute(&e.id, &vp.id, method, &truth_w, w, thr).ctx(S, "metrics")?);
            }
        }
        all_rows.extend(rows.iter().cloned());
        let mut report = EvalReport::from_frames(frame_errors, cfg.eval.trigger_level);
        report.rows = rows;
        reports.push(EpicenterReport { epicenter_id: e.id.clone(), report });
    }
    let json_path = out.join("compare").join("report.json");
    formats::write_json(&json_path, &reports).ctx(S, "write")?;
    let csv_path = report_csv_path(out);
    formats::write_report_csv(&csv_path, &all_rows).ctx(S, "write")?;
    rec.wrote([json_path, csv_path]);
    rec.finish(&cfg)
}

/// Gray level for land cells in every raster.
pub const LAND_SHADE: u8 = 255;

fn raster(bathy: &BathymetryGrid, value: impl Fn(usize) -> f64) -> Vec<u8> {
    let spec = bathy.spec();
    let mut px = Vec::with_capacity(spec.len());
    for j in (0..spec.nlat).rev() {
        for i in 0..spec.nlon {
            let c = spec.index(i, j);
            px.push(if bathy.is_land(c) { LAND_SHADE } else { (value(c).clamp(0.0, 1.0) * 254.0).round() as u8 });
        }
    }
    px
}

/// North-up raster of `η` mapped linearly from `[-range, range]` to `0..=254`;
/// zero is mid-gray.
pub fn signed_raster(field: &[f64], bathy: &BathymetryGrid, range: f64) -> Vec<u8> {
    raster(bathy, |c| (field[c] + range) / (2.0 * range))
}

/// North-up raster of `|a - b|` mapped linearly from `[0, range]` to `0..=254`.
pub fn abs_diff_raster(a: &[f64], b: &[f64], bathy: &BathymetryGrid, range: f64) -> Vec<u8> {
    raster(bathy, |c| (a[c] - b[c]).abs() / range)
}

#[derive(Debug, Serialize, Deserialize)]
struct RenderInfo {
    range_m: f64,
    land_shade: u8,
    frames: Vec<usize>,
}

/// Truth, reconstruction and difference images for the selected frames of
/// each reconstructed test epicenter.
pub fn cmd_render(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest, PipelineError> {
    const S: Stage = Stage::Render;
    cfg.validate()?;
    let cfg = cfg.effective();
    let mut rec = Recorder::new(S, out);
    let ds = load_dataset(out, S, &mut rec)?;
    let range = cfg.eval.render_range_m;
    let spec = *ds.bathy.spec();
    for e in &cfg.test_epicenters {
        let truth = load_series(out, "test", &e.id, S, &mut rec)?;
        let rdir = recon_dir(out, &e.id);
        let (meta, recon) = formats::read_frame_series(&rdir).ctx(S, "missing-input")?;
        rec.read(&rdir.join("meta.json"));
        rec.read(&rdir.join(&meta.frames));
        for &k in cfg.eval.render_frames.iter().filter(|&&k| k < truth.n_frames().min(recon.n_frames())) {
            let dir = out.join("render").join(&e.id);
            let images = [
                ("truth", signed_raster(truth.frame(k), &ds.bathy, range)),
                ("recon", signed_raster(recon.frame(k), &ds.bathy, range)),
                ("diff", abs_diff_raster(truth.frame(k), recon.frame(k), &ds.bathy, range)),
            ];
            for (kind, px) in images {
                let path = dir.join(format!("frame_{k:03}_{kind}.pgm"));
                formats::write_pgm(&path, spec.nlon, spec.nlat, &px).ctx(S, "write")?;
                rec.wrote([path]);
            }
        }
    }
    let info_path = out.join("render").join("render.json");
    let info = RenderInfo { range_m: range, land_shade: LAND_SHADE, frames: cfg.eval.render_frames.clone() };
    formats::write_json(&info_path, &info).ctx(S, "write")?;
    rec.wrote([info_path]);
    rec.finish(&cfg)
}

/// All stages in order.
pub fn run_all(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<RunManifest>, PipelineError> {
    Ok(vec![
        cmd_simulate(cfg, out)?,
        cmd_train(cfg, out)?,
        cmd_reconstruct(cfg, out, None)?,
        cmd_compare(cfg, out)?,
        cmd_render(cfg, out)?,
    ])
}
