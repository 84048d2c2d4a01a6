use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::{ModelConfig, ModelError, Scalar};
use crate::geo::{BathymetryGrid, GeoPoint};

/// One encoded vector per location, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPositions<F> {
    pub dim: usize,
    pub data: Vec<F>,
}

impl<F: Scalar> EncodedPositions<F> {
    pub fn len(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, k: usize) -> &[F] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    /// Rows picked by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.dim);
        for &k in idx {
            data.extend_from_slice(self.row(k));
        }
        Self { dim: self.dim, data }
    }
}

/// Geometric frequencies from 1 to `max_freq`.
pub fn frequencies(cfg: &ModelConfig) -> Vec<f64> {
    let k = cfg.num_freq_bands;
    let top = cfg.max_freq as f64;
    (0..k)
        .map(|i| if k == 1 { 1.0 } else { top.powf(i as f64 / (k - 1) as f64) })
        .collect()
}

/// Longitude and latitude mapped to `[-1, 1]` over the grid bounds, and
/// clamped depth divided by the domain's maximum depth, each expanded to
/// `[x, sin(π f_k x)…, cos(π f_k x)…]`.
pub fn encode_positions<F: Scalar>(
    points: &[GeoPoint],
    bathy: &BathymetryGrid,
    cfg: &ModelConfig,
) -> Result<EncodedPositions<F>, ModelError> {
    let spec = bathy.spec();
    let freqs = frequencies(cfg);
    let dim = cfg.encoding_dim();
    let max_depth = bathy.max_depth();
    let mut data = Vec::with_capacity(points.len() * dim);
    for &p in points {
        if !spec.contains(p) {
            return Err(ModelError::OffGrid { lon: p.lon, lat: p.lat });
        }
        let x = 2.0 * (p.lon - spec.lon_min) / (spec.lon_max - spec.lon_min) - 1.0;
        let y = 2.0 * (p.lat - spec.lat_min) / (spec.lat_max - spec.lat_min) - 1.0;
        let z = (bathy.depth_at(p) / max_depth).min(1.0);
        for c in [x.clamp(-1.0, 1.0), y.clamp(-1.0, 1.0), z] {
            data.push(F::from_f64(c).unwrap());
            for f in &freqs {
                data.push(F::from_f64((core::f64::consts::PI * f * c).sin()).unwrap());
            }
            for f in &freqs {
                data.push(F::from_f64((core::f64::consts::PI * f * c).cos()).unwrap());
            }
        }
    }
    Ok(EncodedPositions { dim, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{synth_bathymetry, BathymetryProfile, GridSpec};

    #[test]
    fn dims_and_center() {
        let spec = GridSpec::new(-10.0, 10.0, -10.0, 10.0, 16, 16).unwrap();
        let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
        let cfg = ModelConfig::default();
        assert_eq!(cfg.encoding_dim(), 195);
        let e = encode_positions::<f64>(&[GeoPoint { lon: 0.0, lat: 0.0 }], &b, &cfg).unwrap();
        assert_eq!(e.dim, 195);
        let k = cfg.num_freq_bands;
        for c in 0..2 {
            let r = &e.row(0)[c * (2 * k + 1)..(c + 1) * (2 * k + 1)];
            assert_eq!(r[0], 0.0);
            assert!(r[1..=k].iter().all(|&s| s == 0.0));
            assert!(r[k + 1..].iter().all(|&s| s == 1.0));
        }
    }

    #[test]
    fn frequencies_span_range() {
        let f = frequencies(&ModelConfig::default());
        assert_eq!(f[0], 1.0);
        assert!((f[31] - 64.0).abs() < 1e-9);
        let one = ModelConfig { num_freq_bands: 1, ..ModelConfig::default() };
        assert_eq!(frequencies(&one), [1.0]);
    }

    #[test]
    fn off_grid_rejected() {
        let spec = GridSpec::new(-10.0, 10.0, -10.0, 10.0, 16, 16).unwrap();
        let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
        let r = encode_positions::<f32>(&[GeoPoint { lon: 20.0, lat: 0.0 }], &b, &ModelConfig::default());
        assert!(matches!(r, Err(ModelError::OffGrid { .. })));
    }
}
