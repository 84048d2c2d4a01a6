//! On-disk formats. Binary payloads are little-endian `f32`; headers and
//! manifests are JSON; tables are CSV.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};
use sparsewave_core::geo::{BathymetryGrid, GeoPoint, GridSpec, Sensor};
use sparsewave_core::lihfp::WaveformSeries;
use sparsewave_core::metrics::{ComparisonRow, FrameError};
use sparsewave_core::model::{BlockInfo, Model, ModelConfig};
use sparsewave_core::swe::{FrameSeries, PhysicalConstants, VelocityFrames};

use crate::error::FormatError;

fn p(path: &Path) -> String {
    path.display().to_string()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FormatError + '_ {
    move |source| FormatError::Io { path: p(path), source }
}

fn invalid(path: &Path, detail: impl Into<String>) -> FormatError {
    FormatError::Invalid { path: p(path), detail: detail.into() }
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| FormatError::Json { path: p(path), source })?;
    bytes.push(b'\n');
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    serde_json::from_slice(&bytes).map_err(|source| FormatError::Json { path: p(path), source })
}

pub fn write_f32(path: &Path, values: &[f64]) -> Result<(), FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(io_err(path))
}

pub fn read_f32(path: &Path) -> Result<Vec<f64>, FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.len() % 4 != 0 {
        return Err(invalid(path, "length is not a multiple of 4"));
    }
    Ok(bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect())
}

// ---------------------------------------------------------------- bathymetry

/// Header next to a raster of `z_b` values (meters, negative below sea level).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BathymetryHeader {
    pub grid: GridSpec,
    pub data: String,
}

pub fn write_bathymetry(json_path: &Path, bathy: &BathymetryGrid) -> Result<(), FormatError> {
    let bin = json_path.with_extension("bin");
    let name = bin.file_name().unwrap().to_string_lossy().into_owned();
    write_f32(&bin, bathy.z_b())?;
    write_json(json_path, &BathymetryHeader { grid: *bathy.spec(), data: name })
}

pub fn read_bathymetry(json_path: &Path) -> Result<BathymetryGrid, FormatError> {
    let header: BathymetryHeader = read_json(json_path)?;
    let bin = sibling(json_path, &header.data);
    let z = read_f32(&bin)?;
    BathymetryGrid::new(header.grid, z).map_err(|e| invalid(&bin, e.to_string()))
}

fn sibling(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

// ------------------------------------------------------------------- sensors

pub fn write_sensors(path: &Path, sensors: &[Sensor]) -> Result<(), FormatError> {
    write_json(path, sensors)
}

pub fn read_sensors(path: &Path) -> Result<Vec<Sensor>, FormatError> {
    read_json(path)
}

// -------------------------------------------------------------- frame series

/// Provenance stored next to a frame series.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub id: String,
    pub epicenter: Option<GeoPoint>,
    pub constants: Option<PhysicalConstants>,
    /// Hash of the config that produced the series.
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FrameSeriesMeta {
    #[serde(flatten)]
    pub info: SeriesInfo,
    pub grid: GridSpec,
    pub times_s: Vec<f64>,
    pub frames: String,
    pub velocities: Option<String>,
}

/// Writes `meta.json`, `frames.bin` and, when present, `uv.bin` (all `u`
/// frames followed by all `v` frames).
pub fn write_frame_series(dir: &Path, series: &FrameSeries, info: &SeriesInfo) -> Result<Vec<PathBuf>, FormatError> {
    let frames = dir.join("frames.bin");
    write_f32(&frames, &series.eta)?;
    let mut written = vec![frames];
    let velocities = match &series.velocities {
        Some(vel) => {
            let path = dir.join("uv.bin");
            let mut all = vel.u.clone();
            all.extend_from_slice(&vel.v);
            write_f32(&path, &all)?;
            written.push(path);
            Some("uv.bin".to_string())
        }
        None => None,
    };
    let meta = FrameSeriesMeta {
        info: info.clone(),
        grid: series.spec,
        times_s: series.times.clone(),
        frames: "frames.bin".into(),
        velocities,
    };
    let meta_path = dir.join("meta.json");
    write_json(&meta_path, &meta)?;
    written.insert(0, meta_path);
    Ok(written)
}

pub fn read_frame_series(dir: &Path) -> Result<(FrameSeriesMeta, FrameSeries), FormatError> {
    let meta_path = dir.join("meta.json");
    let meta: FrameSeriesMeta = read_json(&meta_path)?;
    let eta = read_f32(&dir.join(&meta.frames))?;
    let n = meta.times_s.len();
    if eta.len() != n * meta.grid.len() {
        return Err(invalid(&meta_path, "frames.bin size does not match grid and frame count"));
    }
    let velocities = match &meta.velocities {
        Some(name) => {
            let mut all = read_f32(&dir.join(name))?;
            let u_len = n * meta.grid.nlat * (meta.grid.nlon + 1);
            let v_len = n * (meta.grid.nlat + 1) * meta.grid.nlon;
            if all.len() != u_len + v_len {
                return Err(invalid(&meta_path, "uv.bin size does not match grid and frame count"));
            }
            let v = all.split_off(u_len);
            Some(VelocityFrames { u: all, v })
        }
        None => None,
    };
    let series = FrameSeries { spec: meta.grid, times: meta.times_s.clone(), eta, velocities };
    Ok((meta, series))
}

// ---------------------------------------------------------------- checkpoint

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CheckpointManifest {
    pub model: ModelConfig,
    pub scale: f64,
    pub param_count: usize,
    pub blocks: Vec<BlockInfo>,
    pub grid: GridSpec,
    pub sensors: Vec<Sensor>,
    pub data: String,
}

pub fn write_checkpoint(
    json_path: &Path,
    model: &Model<f32>,
    grid: GridSpec,
    sensors: &[Sensor],
) -> Result<Vec<PathBuf>, FormatError> {
    let bin = json_path.with_extension("bin");
    let mut bytes = Vec::with_capacity(model.param_count() * 4);
    for v in model.params() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(dir) = bin.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    fs::write(&bin, bytes).map_err(io_err(&bin))?;
    let manifest = CheckpointManifest {
        model: *model.config(),
        scale: model.scale(),
        param_count: model.param_count(),
        blocks: model.layout().blocks.clone(),
        grid,
        sensors: sensors.to_vec(),
        data: bin.file_name().unwrap().to_string_lossy().into_owned(),
    };
    write_json(json_path, &manifest)?;
    Ok(vec![json_path.to_path_buf(), bin])
}

pub fn read_checkpoint(json_path: &Path) -> Result<(CheckpointManifest, Model<f32>), FormatError> {
    let manifest: CheckpointManifest = read_json(json_path)?;
    let bin = sibling(json_path, &manifest.data);
    let bytes = fs::read(&bin).map_err(io_err(&bin))?;
    if bytes.len() != manifest.param_count * 4 {
        return Err(invalid(&bin, "parameter file size does not match manifest"));
    }
    let params: Vec<f32> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let model = Model::from_params(manifest.model, manifest.scale, params).map_err(|e| invalid(json_path, e.to_string()))?;
    if model.layout().blocks != manifest.blocks {
        return Err(invalid(json_path, "parameter blocks do not match the model config"));
    }
    Ok((manifest, model))
}

// ----------------------------------------------------------------------- CSV

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, FormatError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    csv::Writer::from_path(path).map_err(|source| FormatError::Csv { path: p(path), source })
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), FormatError> {
    let mut w = csv_writer(path)?;
    let wrap = |source| FormatError::Csv { path: p(path), source };
    for r in rows {
        w.serialize(r).map_err(wrap)?;
    }
    w.flush().map_err(io_err(path))
}

fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, FormatError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| FormatError::Csv { path: p(path), source })?;
    r.deserialize().collect::<Result<_, _>>().map_err(|source| FormatError::Csv { path: p(path), source })
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct LossRow {
    step: usize,
    loss: f64,
}

pub fn write_loss_history(path: &Path, history: &[f64]) -> Result<(), FormatError> {
    write_rows(path, history.iter().enumerate().map(|(step, &loss)| LossRow { step, loss }))
}

pub fn read_loss_history(path: &Path) -> Result<Vec<f64>, FormatError> {
    Ok(read_rows::<LossRow>(path)?.into_iter().map(|r| r.loss).collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameErrorRow {
    time_s: f64,
    error: Option<f64>,
    masked_pixels: usize,
}

pub fn write_frame_errors(path: &Path, errors: &[FrameError]) -> Result<(), FormatError> {
    write_rows(
        path,
        errors.iter().map(|e| FrameErrorRow { time_s: e.time, error: e.value, masked_pixels: e.masked_pixel_count }),
    )
}

pub fn read_frame_errors(path: &Path) -> Result<Vec<FrameError>, FormatError> {
    Ok(read_rows::<FrameErrorRow>(path)?
        .into_iter()
        .map(|r| FrameError { time: r.time_s, value: r.error, masked_pixel_count: r.masked_pixels })
        .collect())
}

#[derive(Debug, Serialize, Deserialize)]
struct WaveRow {
    time_s: f64,
    eta_m: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WaveformSidecar {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

/// `<stem>.csv` with `time_s,eta_m` and `<stem>.json` with `{id, lon, lat}`.
pub fn write_waveform(csv_path: &Path, id: &str, w: &WaveformSeries) -> Result<Vec<PathBuf>, FormatError> {
    write_rows(csv_path, w.times.iter().zip(&w.eta).map(|(&time_s, &eta_m)| WaveRow { time_s, eta_m }))?;
    let json = csv_path.with_extension("json");
    write_json(&json, &WaveformSidecar { id: id.into(), lon: w.location.lon, lat: w.location.lat })?;
    Ok(vec![csv_path.to_path_buf(), json])
}

pub fn read_waveform(csv_path: &Path) -> Result<(WaveformSidecar, WaveformSeries), FormatError> {
    let rows: Vec<WaveRow> = read_rows(csv_path)?;
    let side: WaveformSidecar = read_json(&csv_path.with_extension("json"))?;
    let w = WaveformSeries::new(
        rows.iter().map(|r| r.time_s).collect(),
        rows.iter().map(|r| r.eta_m).collect(),
        GeoPoint { lon: side.lon, lat: side.lat },
    );
    Ok((side, w))
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ReportCsvRow {
    pub epicenter_id: String,
    pub virtual_id: String,
    pub method: String,
    pub arrival_mae_min: Option<f64>,
    pub maxamp_mae_m: f64,
    pub waveform_mae_m: f64,
}

pub fn write_report_csv(path: &Path, rows: &[ComparisonRow]) -> Result<(), FormatError> {
    write_rows(
        path,
        rows.iter().map(|r| ReportCsvRow {
            epicenter_id: r.epicenter_id.clone(),
            virtual_id: r.virtual_id.clone(),
            method: r.method.as_str().into(),
            arrival_mae_min: r.arrival_mae_min,
            maxamp_mae_m: r.maxamp_mae_m,
            waveform_mae_m: r.waveform_mae_m,
        }),
    )
}

pub fn read_report_csv(path: &Path) -> Result<Vec<ReportCsvRow>, FormatError> {
    read_rows(path)
}

// ----------------------------------------------------------------------- PGM

/// Binary 8-bit grayscale PGM, first row written first.
pub fn write_pgm(path: &Path, width: usize, height: usize, pixels: &[u8]) -> Result<(), FormatError> {
    if pixels.len() != width * height {
        return Err(invalid(path, "pixel count does not match dimensions"));
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    write!(f, "P5\n{width} {height}\n255\n").map_err(io_err(path))?;
    f.write_all(pixels).map_err(io_err(path))
}

/// Width, height and pixels of a binary PGM.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    let mut fields = Vec::new();
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(invalid(path, "truncated header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(invalid(path, "not an 8-bit binary PGM"));
    }
    let parse = |s: &str| s.parse::<usize>().map_err(|_| invalid(path, "bad dimension"));
    let (w, h) = (parse(&fields[1])?, parse(&fields[2])?);
    let data = bytes.get(pos + 1..).unwrap_or_default().to_vec();
    if data.len() != w * h {
        return Err(invalid(path, "pixel data size mismatch"));
    }
    Ok((w, h, data))
}
