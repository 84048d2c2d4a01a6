use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{encode_positions, EncodedPositions, Model, ModelConfig, ModelError, Scalar};
use crate::geo::{BathymetryGrid, GeoPoint, SensorNetwork};
use crate::metrics::DEFAULT_MASK_THRESHOLD_M;

/// Mean squared error.
pub fn loss(pred: &[f64], truth: &[f64]) -> Result<f64, ModelError> {
    if pred.is_empty() {
        return Err(ModelError::Empty);
    }
    if pred.len() != truth.len() {
        return Err(ModelError::Shape("prediction and truth lengths differ"));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / pred.len() as f64)
}

/// One frame's worth of supervised data.
#[derive(Debug, Clone)]
pub struct FrameBatch<'a, F> {
    /// Sensor readings in meters.
    pub values: Vec<f64>,
    pub sensors: &'a EncodedPositions<F>,
    pub queries: EncodedPositions<F>,
    /// Wave heights in meters at the queries.
    pub targets: Vec<f64>,
}

impl<F: Scalar> Model<F> {
    /// Mean squared error (standardized units) over every query of every
    /// frame, and its gradient in parameter layout order.
    pub fn gradients(&self, batch: &[FrameBatch<'_, F>]) -> Result<(f64, Vec<F>), ModelError> {
        let total: usize = batch.iter().map(|b| b.targets.len()).sum();
        if total == 0 {
            return Err(ModelError::Empty);
        }
        let weight = 1.0 / total as f64;
        let mut grads = vec![F::zero(); self.param_count()];
        let mut sse = 0.0;
        for b in batch {
            sse += self.frame_loss_grad(&b.values, b.sensors, &b.queries, &b.targets, weight, &mut grads)?;
        }
        self.check_grads(&grads)?;
        Ok((sse * weight, grads))
    }
}

/// Moment estimates and hyperparameters of Adam.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<F> {
    pub m: Vec<F>,
    pub v: Vec<F>,
    pub step: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl<F: Scalar> AdamState<F> {
    pub fn new(n: usize, lr: f64) -> Self {
        Self { m: vec![F::zero(); n], v: vec![F::zero(); n], step: 0, lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<F: Scalar>(params: &mut [F], grads: &[F], opt: &mut AdamState<F>) {
    debug_assert_eq!(params.len(), grads.len());
    opt.step += 1;
    let t = opt.step as i32;
    let c1 = 1.0 - opt.beta1.powi(t);
    let c2 = 1.0 - opt.beta2.powi(t);
    let (b1, b2) = (F::from_f64(opt.beta1).unwrap(), F::from_f64(opt.beta2).unwrap());
    let lr = F::from_f64(opt.lr / c1).unwrap();
    let rc2 = F::from_f64(1.0 / c2).unwrap();
    let eps = F::from_f64(opt.eps).unwrap();
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(opt.m.iter_mut()).zip(opt.v.iter_mut()) {
        *m = b1 * *m + (F::one() - b1) * g;
        *v = b2 * *v + (F::one() - b2) * g * g;
        *p = *p - lr * *m / ((*v * rc2).sqrt() + eps);
    }
}

/// Optimization settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct TrainSchedule {
    pub steps: usize,
    pub batch_frames: usize,
    pub queries_per_frame: usize,
    pub lr: f64,
    /// Learning rate reached at the last step by cosine decay; `lr` keeps it constant.
    pub lr_final: f64,
    pub frame_split_seed: u64,
    /// Seed for frame and query sampling.
    pub sample_seed: u64,
    pub train_fraction: f64,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            steps: 1000,
            batch_frames: 4,
            queries_per_frame: 256,
            lr: 1e-3,
            lr_final: 1e-3,
            frame_split_seed: 0,
            sample_seed: 0,
            train_fraction: 0.8,
        }
    }
}

impl TrainSchedule {
    pub fn lr_at(&self, step: usize) -> f64 {
        if self.steps <= 1 {
            return self.lr;
        }
        let x = step as f64 / (self.steps - 1) as f64;
        self.lr_final + 0.5 * (self.lr - self.lr_final) * (1.0 + (core::f64::consts::PI * x).cos())
    }
}

/// Random partition of `0..n` into training and held-out frame indices, both
/// sorted. The training part has `floor(fraction·n)` frames, at least one.
pub fn split_frames(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let n_train = ((fraction * n as f64 + 1e-9).floor() as usize).clamp(1, n);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train = idx[..n_train].to_vec();
    let mut held = idx[n_train..].to_vec();
    train.sort_unstable();
    held.sort_unstable();
    (train, held)
}

/// Half the queries uniform over `ocean` (positions into it), half uniform
/// over `wave`; all uniform when `wave` is empty.
pub fn sample_queries<R: Rng>(n_ocean: usize, wave: &[usize], count: usize, rng: &mut R) -> Vec<usize> {
    let n_wave = if wave.is_empty() { 0 } else { count / 2 };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count - n_wave {
        out.push(rng.random_range(0..n_ocean));
    }
    for _ in 0..n_wave {
        out.push(wave[rng.random_range(0..wave.len())]);
    }
    out
}

/// Frames (full grids, land ignored) observed by a sensor network.
#[derive(Debug, Clone)]
pub struct TrainData<'a> {
    pub bathy: &'a BathymetryGrid,
    pub sensors: &'a SensorNetwork,
    pub frames: Vec<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub model: Model<F>,
    /// Loss before each update, standardized units.
    pub history: Vec<f64>,
    pub train_frames: Vec<usize>,
    pub held_out_frames: Vec<usize>,
}

fn ocean_points(bathy: &BathymetryGrid) -> Vec<GeoPoint> {
    let spec = bathy.spec();
    bathy
        .ocean_cells()
        .iter()
        .map(|&c| {
            let (i, j) = spec.ij(c);
            spec.cell_center(i, j)
        })
        .collect()
}

/// Trains a freshly initialized model on the training split of `data`.
pub fn train<F: Scalar>(
    data: &TrainData<'_>,
    cfg: &ModelConfig,
    schedule: &TrainSchedule,
) -> Result<TrainOutcome<F>, ModelError> {
    let (train_frames, held_out_frames) = split_frames(data.frames.len(), schedule.train_fraction, schedule.frame_split_seed);
    if train_frames.is_empty() {
        return Err(ModelError::NoFrames);
    }
    if data.sensors.is_empty() {
        return Err(ModelError::NoObservations);
    }
    let bathy = data.bathy;
    let ocean = bathy.ocean_cells();
    if ocean.is_empty() {
        return Err(ModelError::NoOcean);
    }
    let scale = train_frames
        .iter()
        .flat_map(|&k| ocean.iter().map(move |&c| data.frames[k][c].abs()))
        .fold(0.0f64, f64::max);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let mut model = Model::<F>::new(*cfg, scale)?;
    let mut history = Vec::with_capacity(schedule.steps);
    if schedule.steps == 0 {
        return Ok(TrainOutcome { model, history, train_frames, held_out_frames });
    }

    let a_s = encode_positions::<F>(&data.sensors.locations(), bathy, cfg)?;
    let a_all = encode_positions::<F>(&ocean_points(bathy), bathy, cfg)?;
    let mut readings = Vec::with_capacity(train_frames.len());
    let mut waves = Vec::with_capacity(train_frames.len());
    for &k in &train_frames {
        let f = data.frames[k];
        readings.push(data.sensors.read(f, bathy).map_err(|_| ModelError::Shape("frame does not match grid"))?);
        let wave: Vec<usize> = (0..ocean.len()).filter(|&p| f[ocean[p]].abs() > DEFAULT_MASK_THRESHOLD_M).collect();
        waves.push(wave);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(schedule.sample_seed);
    let mut opt = AdamState::new(model.param_count(), schedule.lr);
    let per_step = schedule.batch_frames.clamp(1, train_frames.len());
    let mut order: Vec<usize> = (0..train_frames.len()).collect();
    for step in 0..schedule.steps {
        order.shuffle(&mut rng);
        let mut batch = Vec::with_capacity(per_step);
        for &slot in &order[..per_step] {
            let f = data.frames[train_frames[slot]];
            let picks = sample_queries(ocean.len(), &waves[slot], schedule.queries_per_frame.max(1), &mut rng);
            batch.push(FrameBatch {
                values: readings[slot].clone(),
                sensors: &a_s,
                queries: a_all.select(&picks),
                targets: picks.iter().map(|&p| f[ocean[p]]).collect(),
            });
        }
        let (l, grads) = model.gradients(&batch)?;
        if !l.is_finite() {
            return Err(ModelError::Diverged(step));
        }
        history.push(l);
        opt.lr = schedule.lr_at(step);
        adam_step(model.params_mut(), &grads, &mut opt);
    }
    Ok(TrainOutcome { model, history, train_frames, held_out_frames })
}

/// Reconstructs full grids from sensor readings, reusing the encodings of
/// sensors and ocean cells across frames.
#[derive(Debug, Clone)]
pub struct Reconstructor<'a, F> {
    model: &'a Model<F>,
    bathy: &'a BathymetryGrid,
    sensors: EncodedPositions<F>,
    queries: super::DecoderQueries<F>,
}

impl<'a, F: Scalar> Reconstructor<'a, F> {
    pub fn new(model: &'a Model<F>, bathy: &'a BathymetryGrid, sensors: &[GeoPoint]) -> Result<Self, ModelError> {
        let cfg = model.config();
        let sensors = encode_positions::<F>(sensors, bathy, cfg)?;
        let queries = model.prepare_queries(&encode_positions::<F>(&ocean_points(bathy), bathy, cfg)?)?;
        Ok(Self { model, bathy, sensors, queries })
    }

    /// Wave height at every cell, NaN on land.
    pub fn field(&self, readings: &[f64]) -> Result<Vec<f64>, ModelError> {
        let z = self.model.encode(readings, &self.sensors)?;
        let values = self.model.decode_prepared(&z, &self.queries)?;
        let mut out = vec![f64::NAN; self.bathy.spec().len()];
        for (&c, v) in self.bathy.ocean_cells().iter().zip(values) {
            out[c] = v;
        }
        Ok(out)
    }
}

/// Wave height at every cell from one set of readings, NaN on land.
pub fn reconstruct_field<F: Scalar>(
    model: &Model<F>,
    readings: &[f64],
    sensors: &[GeoPoint],
    bathy: &BathymetryGrid,
) -> Result<Vec<f64>, ModelError> {
    Reconstructor::new(model, bathy, sensors)?.field(readings)
}
