//! Evaluation quantities: masked normalized reconstruction error, trigger
//! time, arrival time, amplitude and waveform errors, median filtering and the
//! continuity residual of a simulated run.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::geo::BathymetryGrid;
use crate::lihfp::WaveformSeries;
use crate::swe::{CGrid, FrameSeries};

/// Pixels with `|truth|` at or below this are excluded from the error.
pub const DEFAULT_MASK_THRESHOLD_M: f64 = 1e-4;
pub const DEFAULT_TRIGGER_LEVEL: f64 = 0.1;
pub const DEFAULT_MEDIAN_KERNEL: usize = 13;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("median kernel must be odd, got {0}")]
    EvenKernel(usize),
    #[error("empty series")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series has no stored velocity frames")]
    MissingVelocities,
    #[error("need at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("frame series does not match the bathymetry grid")]
    GridMismatch,
}

/// Normalized error of one reconstructed frame.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FrameError {
    /// Seconds.
    pub time: f64,
    /// `None` when no pixel passes the mask.
    pub value: Option<f64>,
    pub masked_pixel_count: usize,
}

/// Mean over pixels with `|truth| > mask_threshold` of `|truth - pred|`,
/// divided by the frame's `max |truth|`. Non-finite truth pixels (land) are
/// skipped.
pub fn recon_error_frame(time: f64, truth: &[f64], pred: &[f64], mask_threshold: f64) -> FrameError {
    debug_assert_eq!(truth.len(), pred.len());
    let max_abs = truth.iter().filter(|x| x.is_finite()).fold(0.0f64, |m, x| m.max(x.abs()));
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, p) in truth.iter().zip(pred) {
        if t.is_finite() && t.abs() > mask_threshold {
            sum += (t - p).abs();
            count += 1;
        }
    }
    let value = (count > 0).then(|| sum / count as f64 / max_abs);
    FrameError { time, value, masked_pixel_count: count }
}

/// Earliest frame time (minutes) after which every defined error is below
/// `level`. `None` if the last defined error is not.
pub fn trigger_time(errors: &[FrameError], level: f64) -> Option<f64> {
    let defined: Vec<(f64, f64)> = errors.iter().filter_map(|e| e.value.map(|v| (e.time, v))).collect();
    let first = defined.first()?;
    match defined.iter().rposition(|&(_, v)| v >= level) {
        None => Some(first.0 / 60.0),
        Some(k) if k + 1 == defined.len() => None,
        Some(k) => Some(defined[k + 1].0 / 60.0),
    }
}

/// Time (minutes) of the first sample with `|η| >= threshold`.
pub fn arrival_time(w: &WaveformSeries, threshold: f64) -> Option<f64> {
    w.arrival_index(threshold).map(|k| w.times[k] / 60.0)
}

/// Largest `|η|`.
pub fn max_amplitude(w: &WaveformSeries) -> Result<f64, MetricsError> {
    if w.eta.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(w.eta.iter().fold(0.0f64, |m, x| m.max(x.abs())))
}

/// Sliding median with edge-value padding.
pub fn median_filter(w: &WaveformSeries, kernel: usize) -> Result<WaveformSeries, MetricsError> {
    Ok(WaveformSeries::new(w.times.clone(), median_filter_values(&w.eta, kernel)?, w.location))
}

pub fn median_filter_values(x: &[f64], kernel: usize) -> Result<Vec<f64>, MetricsError> {
    if kernel.is_multiple_of(2) {
        return Err(MetricsError::EvenKernel(kernel));
    }
    let n = x.len();
    let half = kernel / 2;
    let mut window = vec![0.0; kernel];
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        for (o, slot) in window.iter_mut().enumerate() {
            let idx = (k + o).saturating_sub(half).min(n - 1);
            *slot = x[idx];
        }
        window.sort_by(|a, b| a.total_cmp(b));
        out.push(window[half]);
    }
    Ok(out)
}

/// Mean `|a - b|` over a shared time axis.
pub fn waveform_mae(a: &WaveformSeries, b: &WaveformSeries) -> Result<f64, MetricsError> {
    if a.eta.len() != b.eta.len() {
        return Err(MetricsError::LengthMismatch(a.eta.len(), b.eta.len()));
    }
    if a.eta.is_empty() {
        return Err(MetricsError::Empty);
    }
    Ok(a.eta.iter().zip(&b.eta).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.eta.len() as f64)
}

/// Continuity residual of one interior frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualFrame {
    pub time: f64,
    /// `∂h/∂t + ∇·(u h)` per cell, 0 on land.
    pub residual: Vec<f64>,
    /// `∂h/∂t` per cell by central difference.
    pub dhdt: Vec<f64>,
}

/// Raw residual fields at every interior frame.
pub fn continuity_residual_fields(
    series: &FrameSeries,
    bathy: &BathymetryGrid,
) -> Result<Vec<ResidualFrame>, MetricsError> {
    let n = series.n_frames();
    if n < 3 {
        return Err(MetricsError::TooFewFrames(n));
    }
    if series.velocities.is_none() {
        return Err(MetricsError::MissingVelocities);
    }
    if series.spec != *bathy.spec() || !series.is_consistent() {
        return Err(MetricsError::GridMismatch);
    }
    let grid = CGrid::new(bathy);
    let depth: Vec<f64> = bathy.z_b().iter().map(|z| -z).collect();
    let mut out = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let span = series.times[k + 1] - series.times[k - 1];
        let (prev, cur, next) = (series.frame(k - 1), series.frame(k), series.frame(k + 1));
        let h: Vec<f64> = cur.iter().zip(&depth).map(|(e, d)| e + d).collect();
        let div = grid.flux_divergence(&h, series.u_frame(k).unwrap(), series.v_frame(k).unwrap());
        let mut dhdt = vec![0.0; h.len()];
        let mut residual = vec![0.0; h.len()];
        for &c in bathy.ocean_cells() {
            dhdt[c] = (next[c] - prev[c]) / span;
            residual[c] = dhdt[c] + div[c];
        }
        out.push(ResidualFrame { time: series.times[k], residual, dhdt });
    }
    Ok(out)
}

/// Per interior frame: mean `|r|` over pixels with `|η| > 1e-4`, divided by
/// the frame's `max |∂h/∂t|`. Frames with no wave pixels or no motion give 0.
pub fn continuity_residual(series: &FrameSeries, bathy: &BathymetryGrid) -> Result<Vec<(f64, f64)>, MetricsError> {
    let fields = continuity_residual_fields(series, bathy)?;
    Ok(fields
        .iter()
        .enumerate()
        .map(|(k, f)| {
            let eta = series.frame(k + 1);
            let scale = f.dhdt.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let mut sum = 0.0;
            let mut count = 0usize;
            for &c in bathy.ocean_cells() {
                if eta[c].abs() > DEFAULT_MASK_THRESHOLD_M {
                    sum += f.residual[c].abs();
                    count += 1;
                }
            }
            let value = if count == 0 || scale == 0.0 { 0.0 } else { sum / count as f64 / scale };
            (f.time, value)
        })
        .collect())
}

/// Which reconstruction produced a virtual waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Method {
    Senseiver,
    Lihfp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Senseiver => "senseiver",
            Method::Lihfp => "lihfp",
        }
    }
}

/// Errors of one method's waveform at one virtual point for one event.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComparisonRow {
    pub epicenter_id: String,
    pub virtual_id: String,
    pub method: Method,
    /// `None` when exactly one of truth and estimate has an arrival.
    pub arrival_mae_min: Option<f64>,
    pub maxamp_mae_m: f64,
    pub waveform_mae_m: f64,
}

impl ComparisonRow {
    pub fn compute(
        epicenter_id: &str,
        virtual_id: &str,
        method: Method,
        truth: &WaveformSeries,
        estimate: &WaveformSeries,
        arrival_threshold: f64,
    ) -> Result<Self, MetricsError> {
        let arrival_mae_min = match (arrival_time(truth, arrival_threshold), arrival_time(estimate, arrival_threshold)) {
            (Some(a), Some(b)) => Some((a - b).abs()),
            (None, None) => Some(0.0),
            _ => None,
        };
        Ok(Self {
            epicenter_id: epicenter_id.into(),
            virtual_id: virtual_id.into(),
            method,
            arrival_mae_min,
            maxamp_mae_m: (max_amplitude(truth)? - max_amplitude(estimate)?).abs(),
            waveform_mae_m: waveform_mae(truth, estimate)?,
        })
    }
}

/// Aggregated evaluation of a run.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalReport {
    pub frame_errors: Vec<FrameError>,
    pub global_mean_error: Option<f64>,
    pub trigger_time_min: Option<f64>,
    pub rows: Vec<ComparisonRow>,
}

impl EvalReport {
    pub fn from_frames(frame_errors: Vec<FrameError>, level: f64) -> Self {
        let global_mean_error = mean_error(&frame_errors);
        let trigger_time_min = trigger_time(&frame_errors, level);
        Self { frame_errors, global_mean_error, trigger_time_min, rows: Vec::new() }
    }
}

/// Mean of the defined frame errors.
pub fn mean_error(errors: &[FrameError]) -> Option<f64> {
    let vals: Vec<f64> = errors.iter().filter_map(|e| e.value).collect();
    (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::GeoPoint;

    fn ws(eta: &[f64]) -> WaveformSeries {
        let times = (0..eta.len()).map(|k| 50.0 * k as f64).collect();
        WaveformSeries::new(times, eta.to_vec(), GeoPoint { lon: 0.0, lat: 0.0 })
    }

    fn fe(vals: &[f64]) -> Vec<FrameError> {
        vals.iter()
            .enumerate()
            .map(|(k, &v)| FrameError { time: 50.0 * k as f64, value: Some(v), masked_pixel_count: 1 })
            .collect()
    }

    #[test]
    fn recon_error_examples() {
        let truth = [10.0, 4.0, -6.0, 2.0, 0.0];
        let e = recon_error_frame(0.0, &truth, &truth, 1e-4);
        assert_eq!(e.value, Some(0.0));
        assert_eq!(e.masked_pixel_count, 4);
        let pred = [11.0, 5.0, -5.0, 3.0, 7.0];
        assert_eq!(recon_error_frame(0.0, &truth, &pred, 1e-4).value, Some(0.1));
        let quiet = [1e-5, -5e-5, 0.0];
        let e = recon_error_frame(0.0, &quiet, &[1.0, 1.0, 1.0], 1e-4);
        assert_eq!(e, FrameError { time: 0.0, value: None, masked_pixel_count: 0 });
    }

    #[test]
    fn land_pixels_do_not_count() {
        let truth = [1.0, 0.0, -0.5];
        let pred = [1.0, f64::NAN, -0.5];
        assert_eq!(recon_error_frame(0.0, &truth, &pred, 1e-4).value, Some(0.0));
    }

    #[test]
    fn trigger_examples() {
        assert_eq!(trigger_time(&fe(&[0.05, 0.01, 0.09]), 0.1), Some(0.0));
        assert_eq!(trigger_time(&fe(&[0.5, 0.09, 0.2, 0.05, 0.04]), 0.1), Some(2.5));
        assert_eq!(trigger_time(&fe(&[0.05, 0.2]), 0.1), None);
        assert_eq!(trigger_time(&[], 0.1), None);
    }

    #[test]
    fn arrival_examples() {
        assert_eq!(arrival_time(&ws(&[0.0; 5]), 0.03), None);
        assert_eq!(arrival_time(&ws(&[0.0, 0.01, 0.05, 0.0]), 0.03), Some(100.0 / 60.0));
        assert_eq!(arrival_time(&ws(&[0.0, -0.04, 0.0]), 0.03), Some(50.0 / 60.0));
    }

    #[test]
    fn max_amplitude_examples() {
        assert_eq!(max_amplitude(&ws(&[0.0; 3])), Ok(0.0));
        assert_eq!(max_amplitude(&ws(&[0.1, -0.4, 0.3])), Ok(0.4));
        assert_eq!(max_amplitude(&ws(&[])), Err(MetricsError::Empty));
        let sine: Vec<f64> = (0..10_000).map(|k| 0.7 * (k as f64 * 0.001).sin()).collect();
        assert!((max_amplitude(&ws(&sine)).unwrap() - 0.7).abs() < 1e-6);
    }

    #[test]
    fn median_examples() {
        assert_eq!(median_filter_values(&[1.0, 9.0, 2.0], 3), Ok(vec![1.0, 2.0, 2.0]));
        assert_eq!(median_filter_values(&[3.0; 7], 13), Ok(vec![3.0; 7]));
        let x = [0.3, -1.0, 2.0, 5.0];
        assert_eq!(median_filter_values(&x, 1), Ok(x.to_vec()));
        assert_eq!(median_filter_values(&x, 4), Err(MetricsError::EvenKernel(4)));
        assert_eq!(median_filter_values(&[], 3), Ok(vec![]));
    }

    #[test]
    fn waveform_mae_examples() {
        let a = ws(&[0.1, -0.2, 0.3]);
        assert_eq!(waveform_mae(&a, &a), Ok(0.0));
        let b = ws(&[0.15, -0.15, 0.35]);
        assert!((waveform_mae(&a, &b).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(waveform_mae(&ws(&[0.0, 1.0]), &ws(&[1.0, 1.0])), Ok(0.5));
        assert_eq!(waveform_mae(&ws(&[0.0]), &ws(&[1.0, 1.0])), Err(MetricsError::LengthMismatch(1, 2)));
    }

    #[test]
    fn comparison_row_missing_arrival() {
        let t = ws(&[0.0, 0.1, 0.0]);
        let e = ws(&[0.0, 0.01, 0.0]);
        let r = ComparisonRow::compute("e", "v", Method::Lihfp, &t, &e, 0.03).unwrap();
        assert_eq!(r.arrival_mae_min, None);
        assert!((r.maxamp_mae_m - 0.09).abs() < 1e-15);
    }
}
