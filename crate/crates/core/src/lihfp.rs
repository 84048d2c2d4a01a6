//! Virtual waveforms by time-aligned, depth-corrected interpolation of
//! station records.
//!
//! For a virtual point `v` and stations `i` with arrival times `T_i`:
//!
//! 1. arrivals are the first sample with `|η| >= threshold`; silent stations drop out
//! 2. `T_v` is the inverse-distance weighted mean of the `T_i`
//! 3. each record is shifted by `T_v - T_i`, rounded to whole samples, zero filled
//! 4. each record is scaled by Green's law, `(H_i / H_v)^(1/4)`
//! 5. the output is the inverse-distance weighted mean of the shifted, scaled records
//!
//! Weights are `1 / max(d_i, d_floor)` with `d_floor` one cell diagonal. A
//! virtual point that coincides with a station returns that station's record.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::geo::{great_circle_midpoint, haversine_distance, BathymetryGrid, GeoPoint};

/// Default arrival threshold, meters.
pub const DEFAULT_ARRIVAL_THRESHOLD_M: f64 = 0.03;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LihfpError {
    #[error("antipodal points have no unique midpoint")]
    Antipodal,
    #[error("no-signal: no contributing station reaches the arrival threshold")]
    NoSignal,
    #[error("virtual point ({lon}, {lat}) is on land")]
    OnLand { lon: f64, lat: f64 },
    #[error("no contributing stations")]
    NoStations,
    #[error("station records do not share a uniform time axis")]
    TimeAxisMismatch,
}

/// Wave height time series at one location.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveformSeries {
    /// Seconds, uniformly spaced.
    pub times: Vec<f64>,
    /// Meters.
    pub eta: Vec<f64>,
    pub location: GeoPoint,
}

impl WaveformSeries {
    pub fn new(times: Vec<f64>, eta: Vec<f64>, location: GeoPoint) -> Self {
        Self { times, eta, location }
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }

    /// Sample spacing in seconds (0 for fewer than two samples).
    pub fn spacing(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Index of the first sample with `|η| >= threshold`.
    pub fn arrival_index(&self, threshold: f64) -> Option<usize> {
        self.eta.iter().position(|x| x.abs() >= threshold)
    }
}

/// Where a virtual sensor sits and which stations feed it.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualPointSpec {
    pub location: GeoPoint,
    pub stations: Vec<String>,
}

impl VirtualPointSpec {
    /// Midpoint of two stations, fed by those two.
    pub fn between(a_id: &str, a: GeoPoint, b_id: &str, b: GeoPoint) -> Result<Self, LihfpError> {
        Ok(Self { location: midpoint(a, b)?, stations: vec![a_id.into(), b_id.into()] })
    }
}

pub fn midpoint(a: GeoPoint, b: GeoPoint) -> Result<GeoPoint, LihfpError> {
    great_circle_midpoint(a, b).ok_or(LihfpError::Antipodal)
}

fn green_factor(h_station: f64, h_virtual: f64) -> f64 {
    (h_station / h_virtual).sqrt().sqrt()
}

/// Synthesizes the waveform at `v` from the station records.
pub fn lihfp_virtual_waveform(
    stations: &[WaveformSeries],
    v: GeoPoint,
    bathy: &BathymetryGrid,
    arrival_threshold: f64,
) -> Result<WaveformSeries, LihfpError> {
    let first = stations.first().ok_or(LihfpError::NoStations)?;
    if !bathy.is_ocean_at(v) {
        return Err(LihfpError::OnLand { lon: v.lon, lat: v.lat });
    }
    let times = &first.times;
    if stations.iter().any(|s| s.times != *times || s.eta.len() != times.len()) {
        return Err(LihfpError::TimeAxisMismatch);
    }
    let n = times.len();
    let dt = first.spacing();
    let h_v = bathy.depth_at(v);

    // (station, arrival seconds, distance)
    let live: Vec<(&WaveformSeries, f64, f64)> = stations
        .iter()
        .filter_map(|s| {
            s.arrival_index(arrival_threshold)
                .map(|k| (s, times[k], haversine_distance(s.location, v)))
        })
        .collect();
    if live.is_empty() {
        return Err(LihfpError::NoSignal);
    }

    if let Some(&(s, _, _)) = live.iter().find(|(_, _, d)| *d == 0.0) {
        let g = green_factor(bathy.depth_at(s.location), h_v);
        let eta = s.eta.iter().map(|x| g * x).collect();
        return Ok(WaveformSeries::new(times.clone(), eta, v));
    }

    let d_floor = bathy.spec().cell_diagonal_m();
    let raw: Vec<f64> = live.iter().map(|(_, _, d)| 1.0 / d.max(d_floor)).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let t_v: f64 = live.iter().zip(&weights).map(|((_, t, _), w)| w * t).sum();

    let mut out = vec![0.0; n];
    for ((s, t_i, _), w) in live.iter().zip(&weights) {
        let shift = if dt > 0.0 { ((t_v - t_i) / dt).round() as i64 } else { 0 };
        let g = green_factor(bathy.depth_at(s.location), h_v);
        let scale = w * g;
        for (k, o) in out.iter_mut().enumerate() {
            let src = k as i64 - shift;
            if (0..n as i64).contains(&src) {
                *o += scale * s.eta[src as usize];
            }
        }
    }
    Ok(WaveformSeries::new(times.clone(), out, v))
}
