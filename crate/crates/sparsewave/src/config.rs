use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparsewave_core::geo::{central_angle_deg, synth_bathymetry, BathymetryGrid, BathymetryProfile, GeoPoint, GridSpec, Sensor};
use sparsewave_core::model::{ModelConfig, TrainSchedule};
use sparsewave_core::swe::{Boundary, PhysicalConstants};

use crate::error::{Context, PipelineError, Stage};
use crate::formats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BathymetrySource {
    Synthetic(BathymetryProfile),
    /// Path to a bathymetry header JSON.
    Raster(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SensorSource {
    Path(PathBuf),
    Inline(Vec<Sensor>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Epicenter {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

impl Epicenter {
    pub fn new(id: &str, lon: f64, lat: f64) -> Self {
        Self { id: id.into(), lon, lat }
    }

    pub fn location(&self) -> GeoPoint {
        GeoPoint { lon: self.lon, lat: self.lat }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalSettings {
    pub arrival_threshold_m: f64,
    pub mask_threshold_m: f64,
    pub trigger_level: f64,
    pub median_kernel: usize,
    /// Frame indices rendered as images.
    pub render_frames: Vec<usize>,
    /// Signed images map `[-render_range_m, render_range_m]` to black..white.
    pub render_range_m: f64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self {
            arrival_threshold_m: 0.03,
            mask_threshold_m: 1e-4,
            trigger_level: 0.1,
            median_kernel: 13,
            render_frames: vec![0, 72, 144, 216, 288],
            render_range_m: 0.5,
        }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub bathymetry: BathymetrySource,
    #[serde(default)]
    pub constants: PhysicalConstants,
    #[serde(default)]
    pub boundary: Boundary,
    pub duration_s: f64,
    pub out_interval_s: f64,
    /// Keep velocity frames on disk (large).
    #[serde(default)]
    pub store_velocities: bool,
    pub train_epicenters: Vec<Epicenter>,
    pub test_epicenters: Vec<Epicenter>,
    pub sensors: SensorSource,
    pub virtual_pairs: Vec<(String, String)>,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub schedule: TrainSchedule,
    #[serde(default)]
    pub eval: EvalSettings,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Master seed; model, split and sampling seeds are derived from it.
    pub seed: u64,
}

fn splitmix(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Desk-scale sensor ring around the seamount.
pub fn desk_sensors() -> Vec<Sensor> {
    [
        ("S01", 136.0, 26.0),
        ("S02", 145.0, 24.0),
        ("S03", 154.0, 27.0),
        ("S04", 156.0, 36.0),
        ("S05", 153.0, 45.0),
        ("S06", 144.0, 46.0),
        ("S07", 135.0, 44.0),
        ("S08", 133.0, 35.0),
    ]
    .into_iter()
    .map(|(id, lon, lat)| Sensor { id: id.into(), lon, lat })
    .collect()
}

impl ExperimentConfig {
    /// 96 × 96 cells over 30° × 30° with a central seamount, 8 sensors,
    /// 6 training and 2 test epicenters, 4 virtual midpoints.
    pub fn desk() -> Self {
        Self {
            grid: GridSpec::new(130.0, 160.0, 20.0, 50.0, 96, 96).unwrap(),
            bathymetry: BathymetrySource::Synthetic(BathymetryProfile::Seamount),
            constants: PhysicalConstants::default(),
            boundary: Boundary::Sponge,
            duration_s: 14_400.0,
            out_interval_s: 50.0,
            store_velocities: false,
            train_epicenters: vec![
                Epicenter::new("T1", 140.0, 30.0),
                Epicenter::new("T2", 149.0, 29.0),
                Epicenter::new("T3", 139.0, 39.0),
                Epicenter::new("T4", 150.0, 40.0),
                Epicenter::new("T5", 144.5, 34.5),
                Epicenter::new("T6", 146.0, 42.0),
            ],
            test_epicenters: vec![Epicenter::new("E1", 141.0, 31.0), Epicenter::new("E2", 149.0, 39.0)],
            sensors: SensorSource::Inline(desk_sensors()),
            virtual_pairs: vec![
                ("S01".into(), "S05".into()),
                ("S02".into(), "S07".into()),
                ("S03".into(), "S08".into()),
                ("S04".into(), "S06".into()),
            ],
            model: ModelConfig::default(),
            schedule: TrainSchedule {
                steps: 3000,
                batch_frames: 8,
                queries_per_frame: 256,
                lr: 1e-3,
                lr_final: 1e-5,
                ..TrainSchedule::default()
            },
            eval: EvalSettings::default(),
            output_dir: None,
            seed: 2024,
        }
    }

    /// Reads a JSON config; relative paths inside it resolve against the
    /// config file's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let mut cfg: Self = formats::read_json(path).ctx(Stage::Config, "config-read")?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let SensorSource::Path(p) = &mut cfg.sensors {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let BathymetrySource::Raster(p) = &mut cfg.bathymetry {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Copy with the model, split and sampling seeds derived from `seed`.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        c.model.seed = splitmix(self.seed, 1);
        c.schedule.frame_split_seed = splitmix(self.seed, 2);
        c.schedule.sample_seed = splitmix(self.seed, 3);
        c
    }

    /// Hex SHA-256 of the effective config's JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.effective()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load_bathymetry(&self) -> Result<BathymetryGrid, PipelineError> {
        match &self.bathymetry {
            BathymetrySource::Synthetic(profile) => {
                synth_bathymetry(self.grid, *profile).ctx(Stage::Config, "bathymetry")
            }
            BathymetrySource::Raster(path) => {
                let b = formats::read_bathymetry(path).ctx(Stage::Config, "bathymetry")?;
                if *b.spec() != self.grid {
                    return Err(PipelineError::new(Stage::Config, "grid-mismatch", "raster grid differs from config grid"));
                }
                Ok(b)
            }
        }
    }

    pub fn load_sensors(&self) -> Result<Vec<Sensor>, PipelineError> {
        match &self.sensors {
            SensorSource::Inline(s) => Ok(s.clone()),
            SensorSource::Path(p) => formats::read_sensors(p).ctx(Stage::Config, "sensors-read"),
        }
    }

    /// Structural checks that do not need the bathymetry.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |detail: String| Err(PipelineError::new(Stage::Config, "invalid-config", detail));
        if let Err(e) = self.grid.validate() {
            return bad(e.to_string());
        }
        if !(self.out_interval_s > 0.0) || !(self.duration_s >= 0.0) {
            return bad("duration_s must be >= 0 and out_interval_s > 0".into());
        }
        if let Err(e) = self.model.validate() {
            return bad(e.to_string());
        }
        let all: Vec<&Epicenter> = self.train_epicenters.iter().chain(&self.test_epicenters).collect();
        for (k, e) in all.iter().enumerate() {
            if all[..k].iter().any(|o| o.id == e.id) {
                return bad(format!("duplicate epicenter id {}", e.id));
            }
            if GeoPoint::new(e.lon, e.lat).is_err() || !self.grid.contains(e.location()) {
                return bad(format!("epicenter {} is outside the grid", e.id));
            }
        }
        for t in &self.test_epicenters {
            if self.train_epicenters.iter().any(|r| r.lon == t.lon && r.lat == t.lat) {
                return bad(format!("test epicenter {} coincides with a training epicenter", t.id));
            }
        }
        let sensors = self.load_sensors()?;
        for (a, b) in &self.virtual_pairs {
            for id in [a, b] {
                if !sensors.iter().any(|s| &s.id == id) {
                    return bad(format!("virtual pair references unknown sensor {id}"));
                }
            }
            if a == b {
                return bad(format!("virtual pair ({a}, {b}) repeats a sensor"));
            }
        }
        if self.eval.median_kernel.is_multiple_of(2) {
            return bad("median_kernel must be odd".into());
        }
        Ok(())
    }

    /// Great-circle distance in degrees from each test epicenter to its
    /// nearest training epicenter.
    pub fn test_offsets_deg(&self) -> Vec<f64> {
        self.test_epicenters
            .iter()
            .map(|t| {
                self.train_epicenters
                    .iter()
                    .map(|r| central_angle_deg(t.location(), r.location()))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }
}

/// Id of the virtual point between two sensors; order-independent.
pub fn virtual_id(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}-{b}")
    } else {
        format!("{b}-{a}")
    }
}
