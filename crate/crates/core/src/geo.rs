//! Spatial domain: lat-lon grid, bathymetry, land mask, sensors and
//! great-circle geometry.
//!
//! Cells are indexed row-major with latitude as the outer (slow) index:
//! `idx = j * nlon + i`, where `i` counts eastward from `lon_min` and `j`
//! counts northward from `lat_min`.

use alloc::string::String;
use alloc::vec::Vec;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

/// Mean Earth radius used for every distance in the crate.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Standard gravity, m/s².
pub const GRAVITY: f64 = 9.80665;

/// Cells whose still-water depth is below this are treated as land.
pub const MIN_DEPTH_CLAMP_M: f64 = 10.0;

/// Default number of midpoint samples for [`travel_time`].
pub const DEFAULT_PATH_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("latitude {0} outside [-90, 90]")]
    BadLatitude(f64),
    #[error("longitude {0} outside [-180, 360)")]
    BadLongitude(f64),
    #[error("invalid grid: {0}")]
    BadGrid(&'static str),
    #[error("field has {got} values, grid has {expected} cells")]
    FieldSize { expected: usize, got: usize },
    #[error("point ({lon}, {lat}) is outside the grid")]
    OffGrid { lon: f64, lat: f64 },
    #[error("sensor-on-land at ({lon}, {lat})")]
    SensorOnLand { lon: f64, lat: f64 },
    #[error("no-wet-path between the two points")]
    NoWetPath,
    #[error("point ({lon}, {lat}) is on land")]
    OnLand { lon: f64, lat: f64 },
    #[error("duplicate sensor id {0:?}")]
    DuplicateSensor(String),
    #[error("grid has no ocean cell")]
    NoOcean,
}

/// A location on the sphere in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    /// Longitudes are kept as given (no re-wrapping) and must lie in [-180, 360).
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::BadLatitude(lat));
        }
        if !(-180.0..360.0).contains(&lon) {
            return Err(GeoError::BadLongitude(lon));
        }
        Ok(Self { lon, lat })
    }

    fn to_unit_vector(self) -> [f64; 3] {
        let (lon, lat) = (self.lon.to_radians(), self.lat.to_radians());
        [lat.cos() * lon.cos(), lat.cos() * lon.sin(), lat.sin()]
    }

    fn from_unit_vector(v: [f64; 3], lon_hint: f64) -> Self {
        let lat = v[2].atan2((v[0] * v[0] + v[1] * v[1]).sqrt()).to_degrees();
        let mut lon = v[1].atan2(v[0]).to_degrees();
        // keep the caller's wrap convention
        if lon_hint >= 180.0 && lon < 0.0 {
            lon += 360.0;
        }
        Self { lon, lat }
    }
}

/// Great-circle central angle in radians.
pub fn central_angle(a: GeoPoint, b: GeoPoint) -> f64 {
    let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = (p2 - p1).abs();
    let dlam = (b.lon - a.lon).abs().to_radians();
    let s = (dphi * 0.5).sin().powi(2) + p1.cos() * p2.cos() * (dlam * 0.5).sin().powi(2);
    2.0 * s.sqrt().min(1.0).asin()
}

/// Great-circle central angle in degrees.
pub fn central_angle_deg(a: GeoPoint, b: GeoPoint) -> f64 {
    central_angle(a, b).to_degrees()
}

/// Haversine distance in meters.
pub fn haversine_distance(a: GeoPoint, b: GeoPoint) -> f64 {
    EARTH_RADIUS_M * central_angle(a, b)
}

/// Point at fraction `t` along the great circle from `a` to `b`.
pub fn interpolate_great_circle(a: GeoPoint, b: GeoPoint, t: f64) -> GeoPoint {
    let omega = central_angle(a, b);
    if omega < 1e-15 {
        return a;
    }
    let (va, vb) = (a.to_unit_vector(), b.to_unit_vector());
    let s = omega.sin();
    let wa = ((1.0 - t) * omega).sin() / s;
    let wb = (t * omega).sin() / s;
    let v = [
        wa * va[0] + wb * vb[0],
        wa * va[1] + wb * vb[1],
        wa * va[2] + wb * vb[2],
    ];
    GeoPoint::from_unit_vector(v, a.lon.max(b.lon))
}

/// Great-circle midpoint, or `None` for (near-)antipodal inputs.
///
/// Computed from the sum of unit vectors, so `midpoint(a, b) == midpoint(b, a)` bitwise.
pub fn great_circle_midpoint(a: GeoPoint, b: GeoPoint) -> Option<GeoPoint> {
    if a == b {
        return Some(a);
    }
    let (va, vb) = (a.to_unit_vector(), b.to_unit_vector());
    let v = [va[0] + vb[0], va[1] + vb[1], va[2] + vb[2]];
    let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    if norm < 1e-9 {
        return None;
    }
    Some(GeoPoint::from_unit_vector(v, a.lon.max(b.lon)))
}

/// Uniform lat-lon raster.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub nlon: usize,
    pub nlat: usize,
}

impl GridSpec {
    pub fn new(
        lon_min: f64,
        lon_max: f64,
        lat_min: f64,
        lat_max: f64,
        nlon: usize,
        nlat: usize,
    ) -> Result<Self, GeoError> {
        let spec = Self { lon_min, lon_max, lat_min, lat_max, nlon, nlat };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if self.nlon < 8 || self.nlat < 8 {
            return Err(GeoError::BadGrid("nlon and nlat must be at least 8"));
        }
        if !(self.lon_max > self.lon_min) || !(self.lat_max > self.lat_min) {
            return Err(GeoError::BadGrid("max bound must exceed min bound"));
        }
        if self.lat_min < -90.0 || self.lat_max > 90.0 {
            return Err(GeoError::BadGrid("latitude bounds outside [-90, 90]"));
        }
        if self.lat_min <= -90.0 || self.lat_max >= 90.0 {
            return Err(GeoError::BadGrid("grid may not touch a pole"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nlon * self.nlat
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dlon(&self) -> f64 {
        (self.lon_max - self.lon_min) / self.nlon as f64
    }

    pub fn dlat(&self) -> f64 {
        (self.lat_max - self.lat_min) / self.nlat as f64
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nlon + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.nlon, idx / self.nlon)
    }

    pub fn cell_lon(&self, i: usize) -> f64 {
        self.lon_min + (i as f64 + 0.5) * self.dlon()
    }

    pub fn cell_lat(&self, j: usize) -> f64 {
        self.lat_min + (j as f64 + 0.5) * self.dlat()
    }

    pub fn cell_center(&self, i: usize, j: usize) -> GeoPoint {
        GeoPoint { lon: self.cell_lon(i), lat: self.cell_lat(j) }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lon >= self.lon_min && p.lon <= self.lon_max && p.lat >= self.lat_min && p.lat <= self.lat_max
    }

    /// Cell containing `p` (points on the max edge belong to the last cell).
    pub fn cell_of(&self, p: GeoPoint) -> Option<(usize, usize)> {
        if !self.contains(p) {
            return None;
        }
        let i = ((p.lon - self.lon_min) / self.dlon()).floor() as usize;
        let j = ((p.lat - self.lat_min) / self.dlat()).floor() as usize;
        Some((i.min(self.nlon - 1), j.min(self.nlat - 1)))
    }

    /// Nearest cell with indices clamped into the grid.
    pub fn nearest_cell_clamped(&self, p: GeoPoint) -> (usize, usize) {
        let fi = ((p.lon - self.lon_min) / self.dlon()).floor();
        let fj = ((p.lat - self.lat_min) / self.dlat()).floor();
        let i = fi.max(0.0).min((self.nlon - 1) as f64) as usize;
        let j = fj.max(0.0).min((self.nlat - 1) as f64) as usize;
        (i, j)
    }

    /// Zonal cell width at row `j`, meters (cos-latitude metric).
    pub fn dx_m(&self, j: usize) -> f64 {
        EARTH_RADIUS_M * self.cell_lat(j).to_radians().cos() * self.dlon().to_radians()
    }

    /// Meridional cell height, meters.
    pub fn dy_m(&self) -> f64 {
        EARTH_RADIUS_M * self.dlat().to_radians()
    }

    /// Length of the longest cell diagonal, meters.
    pub fn cell_diagonal_m(&self) -> f64 {
        let dy = self.dy_m();
        (0..self.nlat)
            .map(|j| {
                let dx = self.dx_m(j);
                (dx * dx + dy * dy).sqrt()
            })
            .fold(0.0, f64::max)
    }
}

/// Synthetic bathymetry shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum BathymetryProfile {
    /// 4000 m everywhere.
    Flat,
    /// Linear ramp from -4000 m in the westernmost column to +50 m in the easternmost.
    Shelf,
    /// Flat plus a Gaussian bump of 3500 m at the domain center.
    Seamount,
}

pub const ABYSSAL_DEPTH_M: f64 = 4000.0;
pub const SHELF_TOP_M: f64 = 50.0;
pub const SEAMOUNT_HEIGHT_M: f64 = 3500.0;

/// Seafloor height raster with its derived land mask.
#[derive(Debug, Clone, PartialEq)]
pub struct BathymetryGrid {
    spec: GridSpec,
    z_b: Vec<f64>,
    land: Vec<bool>,
    ocean_cells: Vec<usize>,
}

impl BathymetryGrid {
    pub fn new(spec: GridSpec, z_b: Vec<f64>) -> Result<Self, GeoError> {
        spec.validate()?;
        if z_b.len() != spec.len() {
            return Err(GeoError::FieldSize { expected: spec.len(), got: z_b.len() });
        }
        let land: Vec<bool> = z_b.iter().map(|&z| !(z < -MIN_DEPTH_CLAMP_M)).collect();
        let ocean_cells = (0..spec.len()).filter(|&k| !land[k]).collect();
        Ok(Self { spec, z_b, land, ocean_cells })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn z_b(&self) -> &[f64] {
        &self.z_b
    }

    pub fn land_mask(&self) -> &[bool] {
        &self.land
    }

    #[inline]
    pub fn is_land(&self, idx: usize) -> bool {
        self.land[idx]
    }

    /// Indices of ocean cells in ascending order.
    pub fn ocean_cells(&self) -> &[usize] {
        &self.ocean_cells
    }

    /// Clamped still-water depth `max(-z_b, MIN_DEPTH_CLAMP_M)`.
    #[inline]
    pub fn depth(&self, idx: usize) -> f64 {
        (-self.z_b[idx]).max(MIN_DEPTH_CLAMP_M)
    }

    pub fn max_depth(&self) -> f64 {
        self.ocean_cells.iter().map(|&k| -self.z_b[k]).fold(MIN_DEPTH_CLAMP_M, f64::max)
    }

    /// Clamped depth of the cell nearest to `p` (indices clamped into the grid).
    pub fn depth_at(&self, p: GeoPoint) -> f64 {
        let (i, j) = self.spec.nearest_cell_clamped(p);
        self.depth(self.spec.index(i, j))
    }

    pub fn is_ocean_at(&self, p: GeoPoint) -> bool {
        match self.spec.cell_of(p) {
            Some((i, j)) => !self.land[self.spec.index(i, j)],
            None => false,
        }
    }

    /// Center of the ocean cell closest (great-circle) to `p`.
    pub fn nearest_ocean_center(&self, p: GeoPoint) -> Result<GeoPoint, GeoError> {
        let mut best: Option<(f64, usize)> = None;
        for &k in &self.ocean_cells {
            let (i, j) = self.spec.ij(k);
            let d = central_angle(p, self.spec.cell_center(i, j));
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, k));
            }
        }
        let (_, k) = best.ok_or(GeoError::NoOcean)?;
        let (i, j) = self.spec.ij(k);
        Ok(self.spec.cell_center(i, j))
    }
}

/// Deterministic synthetic bathymetry.
pub fn synth_bathymetry(spec: GridSpec, profile: BathymetryProfile) -> Result<BathymetryGrid, GeoError> {
    spec.validate()?;
    let mut z = Vec::with_capacity(spec.len());
    let lon_c = 0.5 * (spec.lon_min + spec.lon_max);
    let lat_c = 0.5 * (spec.lat_min + spec.lat_max);
    let sigma = 0.1 * (spec.lon_max - spec.lon_min).min(spec.lat_max - spec.lat_min);
    for j in 0..spec.nlat {
        for i in 0..spec.nlon {
            let p = spec.cell_center(i, j);
            let zb = match profile {
                BathymetryProfile::Flat => -ABYSSAL_DEPTH_M,
                BathymetryProfile::Shelf => {
                    let frac = i as f64 / (spec.nlon - 1) as f64;
                    -ABYSSAL_DEPTH_M + (ABYSSAL_DEPTH_M + SHELF_TOP_M) * frac
                }
                BathymetryProfile::Seamount => {
                    let r2 = (p.lon - lon_c).powi(2) + (p.lat - lat_c).powi(2);
                    -ABYSSAL_DEPTH_M + SEAMOUNT_HEIGHT_M * (-r2 / (2.0 * sigma * sigma)).exp()
                }
            };
            z.push(zb);
        }
    }
    BathymetryGrid::new(spec, z)
}

/// Bilinear interpolation of a per-cell field at `p`.
///
/// Land cells drop out of the 4-point stencil and the remaining weights are
/// renormalized. Points in the half cell next to the grid edge use the edge
/// row/column.
pub fn sample_field(field: &[f64], bathy: &BathymetryGrid, p: GeoPoint) -> Result<f64, GeoError> {
    let spec = bathy.spec();
    if field.len() != spec.len() {
        return Err(GeoError::FieldSize { expected: spec.len(), got: field.len() });
    }
    let stencil = bilinear_stencil(spec, p)?;
    let mut acc = 0.0;
    let mut wsum = 0.0;
    for (k, w) in stencil {
        if w == 0.0 || bathy.is_land(k) {
            continue;
        }
        acc += w * field[k];
        wsum += w;
    }
    if wsum == 0.0 {
        return Err(GeoError::SensorOnLand { lon: p.lon, lat: p.lat });
    }
    Ok(acc / wsum)
}

/// The four `(cell index, weight)` pairs of the bilinear stencil at `p`.
pub fn bilinear_stencil(spec: &GridSpec, p: GeoPoint) -> Result<[(usize, f64); 4], GeoError> {
    if !spec.contains(p) {
        return Err(GeoError::OffGrid { lon: p.lon, lat: p.lat });
    }
    let (i0, i1, tx) = axis_weights((p.lon - spec.lon_min) / spec.dlon() - 0.5, spec.nlon);
    let (j0, j1, ty) = axis_weights((p.lat - spec.lat_min) / spec.dlat() - 0.5, spec.nlat);
    Ok([
        (spec.index(i0, j0), (1.0 - tx) * (1.0 - ty)),
        (spec.index(i1, j0), tx * (1.0 - ty)),
        (spec.index(i0, j1), (1.0 - tx) * ty),
        (spec.index(i1, j1), tx * ty),
    ])
}

fn axis_weights(f: f64, n: usize) -> (usize, usize, f64) {
    if f <= 0.0 {
        return (0, 0, 0.0);
    }
    let last = (n - 1) as f64;
    if f >= last {
        return (n - 1, n - 1, 0.0);
    }
    let i0 = f.floor();
    (i0 as usize, i0 as usize + 1, f - i0)
}

/// Long-wave travel time in seconds along the great circle from `a` to `b`.
///
/// Midpoint rule over `nsamples` equal segments with local speed
/// `sqrt(g * H)`, `H = max(-z_b, MIN_DEPTH_CLAMP_M)`. Land samples are
/// evaluated at the clamped depth; only a path with no wet sample fails.
pub fn travel_time(a: GeoPoint, b: GeoPoint, bathy: &BathymetryGrid, nsamples: usize) -> Result<f64, GeoError> {
    let nsamples = nsamples.max(1);
    let dist = haversine_distance(a, b);
    if dist == 0.0 {
        return Ok(0.0);
    }
    // canonical endpoint order makes the result bitwise symmetric
    let (a, b) = if (a.lon, a.lat) <= (b.lon, b.lat) { (a, b) } else { (b, a) };
    let spec = bathy.spec();
    let ds = dist / nsamples as f64;
    let mut total = 0.0;
    let mut wet = false;
    for k in 0..nsamples {
        let t = (k as f64 + 0.5) / nsamples as f64;
        let p = interpolate_great_circle(a, b, t);
        let (i, j) = spec.nearest_cell_clamped(p);
        let idx = spec.index(i, j);
        wet |= !bathy.is_land(idx);
        total += ds / (GRAVITY * bathy.depth(idx)).sqrt();
    }
    if !wet {
        return Err(GeoError::NoWetPath);
    }
    Ok(total)
}

/// A fixed observation point.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sensor {
    pub id: String,
    pub lon: f64,
    pub lat: f64,
}

impl Sensor {
    pub fn location(&self) -> GeoPoint {
        GeoPoint { lon: self.lon, lat: self.lat }
    }
}

/// A sensor that was moved onto the nearest ocean cell center.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapWarning {
    pub id: String,
    pub from: GeoPoint,
    pub to: GeoPoint,
}

/// Ordered set of sensors with unique ids, all on ocean cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorNetwork {
    sensors: Vec<Sensor>,
}

impl SensorNetwork {
    /// Validates ids and places every sensor on an ocean cell, snapping
    /// those that fall on land (or off the grid) to the nearest ocean cell center.
    pub fn new(sensors: Vec<Sensor>, bathy: &BathymetryGrid) -> Result<(Self, Vec<SnapWarning>), GeoError> {
        let mut warnings = Vec::new();
        let mut placed: Vec<Sensor> = Vec::with_capacity(sensors.len());
        for s in sensors {
            if placed.iter().any(|p| p.id == s.id) {
                return Err(GeoError::DuplicateSensor(s.id));
            }
            GeoPoint::new(s.lon, s.lat)?;
            let loc = s.location();
            if bathy.is_ocean_at(loc) {
                placed.push(s);
            } else {
                let to = bathy.nearest_ocean_center(loc)?;
                warnings.push(SnapWarning { id: s.id.clone(), from: loc, to });
                placed.push(Sensor { id: s.id, lon: to.lon, lat: to.lat });
            }
        }
        Ok((Self { sensors: placed }, warnings))
    }

    pub fn sensors(&self) -> &[Sensor] {
        &self.sensors
    }

    pub fn len(&self) -> usize {
        self.sensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sensors.is_empty()
    }

    pub fn locations(&self) -> Vec<GeoPoint> {
        self.sensors.iter().map(Sensor::location).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Sensor> {
        self.sensors.iter().find(|s| s.id == id)
    }

    /// Samples `field` at every sensor.
    pub fn read(&self, field: &[f64], bathy: &BathymetryGrid) -> Result<Vec<f64>, GeoError> {
        self.sensors.iter().map(|s| sample_field(field, bathy, s.location())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use core::f64::consts::PI;

    fn pt(lon: f64, lat: f64) -> GeoPoint {
        GeoPoint::new(lon, lat).unwrap()
    }

    fn spec16() -> GridSpec {
        GridSpec::new(0.0, 16.0, -8.0, 8.0, 16, 16).unwrap()
    }

    #[test]
    fn haversine_examples() {
        assert_eq!(haversine_distance(pt(0.0, 0.0), pt(0.0, 0.0)), 0.0);
        // R * pi / 180
        let one_deg = EARTH_RADIUS_M * PI / 180.0;
        assert!((one_deg - 111_194.9).abs() < 0.1);
        assert!((haversine_distance(pt(0.0, 0.0), pt(1.0, 0.0)) - one_deg).abs() < 1e-6);
        let quarter = EARTH_RADIUS_M * PI / 2.0;
        assert!((quarter - 10_007_543.0).abs() < 1.0);
        assert!((haversine_distance(pt(0.0, 0.0), pt(0.0, 90.0)) - quarter).abs() < 1e-6);
    }

    #[test]
    fn haversine_wraps_longitude() {
        assert!(haversine_distance(pt(-10.0, 5.0), pt(350.0, 5.0)) < 1e-6);
    }

    #[test]
    fn bad_points_rejected() {
        assert!(matches!(GeoPoint::new(0.0, 91.0), Err(GeoError::BadLatitude(_))));
        assert!(matches!(GeoPoint::new(360.0, 0.0), Err(GeoError::BadLongitude(_))));
    }

    #[test]
    fn grid_validation() {
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 7, 8).is_err());
        assert!(GridSpec::new(1.0, 1.0, 0.0, 1.0, 8, 8).is_err());
        assert!(GridSpec::new(0.0, 1.0, 0.0, 1.0, 8, 8).is_ok());
    }

    #[test]
    fn flat_bathymetry_is_all_ocean() {
        let b = synth_bathymetry(spec16(), BathymetryProfile::Flat).unwrap();
        assert!(b.z_b().iter().all(|&z| z == -4000.0));
        assert!(b.land_mask().iter().all(|&l| !l));
        assert_eq!(b.ocean_cells().len(), 256);
    }

    #[test]
    fn shelf_mask_matches_clamp() {
        let b = synth_bathymetry(spec16(), BathymetryProfile::Shelf).unwrap();
        let mut any_land = false;
        for (k, &z) in b.z_b().iter().enumerate() {
            assert_eq!(b.is_land(k), z >= -MIN_DEPTH_CLAMP_M);
            any_land |= b.is_land(k);
        }
        assert!(any_land);
    }

    #[test]
    fn seamount_peak() {
        // odd cell counts put a cell center exactly on the bump center
        let spec = GridSpec::new(0.0, 17.0, -8.5, 8.5, 17, 17).unwrap();
        let b = synth_bathymetry(spec, BathymetryProfile::Seamount).unwrap();
        let peak = b.z_b().iter().cloned().fold(f64::MIN, f64::max);
        assert!((peak - (-500.0)).abs() < 1e-9);
        let b = synth_bathymetry(spec16(), BathymetryProfile::Seamount).unwrap();
        let peak = b.z_b().iter().cloned().fold(f64::MIN, f64::max);
        assert!(peak < -500.0 && peak > -900.0);
    }

    #[test]
    fn sample_at_center_and_midpoint() {
        let spec = spec16();
        let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
        let field: Vec<f64> = (0..spec.len()).map(|k| k as f64 * 0.25).collect();
        let c = spec.cell_center(3, 5);
        assert_eq!(sample_field(&field, &b, c).unwrap(), field[spec.index(3, 5)]);
        // linear in lon
        let lin: Vec<f64> = (0..spec.len()).map(|k| 2.0 * spec.cell_lon(spec.ij(k).0)).collect();
        let mid = GeoPoint { lon: 0.5 * (spec.cell_lon(4) + spec.cell_lon(5)), lat: spec.cell_lat(7) };
        let v = sample_field(&lin, &b, mid).unwrap();
        let expected = 0.5 * (lin[spec.index(4, 7)] + lin[spec.index(5, 7)]);
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn sample_on_land_errors() {
        let spec = spec16();
        let mut z = vec![-4000.0; spec.len()];
        for j in 4..12 {
            for i in 4..12 {
                z[spec.index(i, j)] = 100.0;
            }
        }
        let b = BathymetryGrid::new(spec, z).unwrap();
        let field = vec![1.0; spec.len()];
        let p = GeoPoint { lon: 8.0, lat: 0.0 };
        assert!(matches!(sample_field(&field, &b, p), Err(GeoError::SensorOnLand { .. })));
        // stencil straddling the coast renormalizes onto the wet cells
        let coast = GeoPoint { lon: spec.cell_lon(3) + 0.5, lat: spec.cell_lat(8) };
        assert!((sample_field(&field, &b, coast).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            sample_field(&field, &b, GeoPoint { lon: 20.0, lat: 0.0 }),
            Err(GeoError::OffGrid { .. })
        ));
    }

    #[test]
    fn travel_time_uniform_depths() {
        let spec = GridSpec::new(-5.0, 5.0, -5.0, 5.0, 16, 16).unwrap();
        let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
        let a = pt(-0.5, 0.0);
        assert_eq!(travel_time(a, a, &b, 256).unwrap(), 0.0);
        let c = (GRAVITY * 4000.0).sqrt();
        assert!((c - 198.057).abs() < 1e-3);
        let dlon = (198_045.0 / EARTH_RADIUS_M).to_degrees();
        let t = travel_time(a, pt(-0.5 + dlon, 0.0), &b, 256).unwrap();
        assert!((t - 1000.0).abs() < 0.5, "{t}");

        let shallow = BathymetryGrid::new(spec, vec![-1000.0; spec.len()]).unwrap();
        let dlon = (99_022.0 / EARTH_RADIUS_M).to_degrees();
        let t = travel_time(a, pt(-0.5 + dlon, 0.0), &shallow, 256).unwrap();
        assert!((t - 1000.0).abs() < 0.5, "{t}");
    }

    #[test]
    fn travel_time_all_land_fails() {
        let spec = spec16();
        let b = BathymetryGrid::new(spec, vec![5.0; spec.len()]).unwrap();
        let r = travel_time(pt(1.0, 0.0), pt(5.0, 1.0), &b, 32);
        assert_eq!(r, Err(GeoError::NoWetPath));
    }

    #[test]
    fn midpoint_examples() {
        let m = great_circle_midpoint(pt(0.0, 0.0), pt(10.0, 0.0)).unwrap();
        assert!((m.lon - 5.0).abs() < 1e-12 && m.lat.abs() < 1e-12);
        let m = great_circle_midpoint(pt(0.0, 0.0), pt(0.0, 10.0)).unwrap();
        assert!(m.lon.abs() < 1e-12 && (m.lat - 5.0).abs() < 1e-12);
        let a = pt(140.0, 35.0);
        assert_eq!(great_circle_midpoint(a, a), Some(a));
        assert_eq!(great_circle_midpoint(pt(0.0, 0.0), pt(180.0, 0.0)), None);
        // eastern-hemisphere convention survives
        let m = great_circle_midpoint(pt(200.0, 10.0), pt(210.0, 10.0)).unwrap();
        assert!(m.lon > 200.0 && m.lon < 210.0);
    }

    #[test]
    fn sensors_snap_off_land() {
        let spec = spec16();
        let mut z = vec![-4000.0; spec.len()];
        z[spec.index(2, 2)] = 20.0;
        let b = BathymetryGrid::new(spec, z).unwrap();
        let land_pt = spec.cell_center(2, 2);
        let sensors = vec![
            Sensor { id: "a".into(), lon: land_pt.lon, lat: land_pt.lat },
            Sensor { id: "b".into(), lon: 10.2, lat: 3.3 },
        ];
        let (net, warn) = SensorNetwork::new(sensors, &b).unwrap();
        assert_eq!(warn.len(), 1);
        assert_eq!(warn[0].id, "a");
        assert!(net.sensors().iter().all(|s| b.is_ocean_at(s.location())));
        assert_eq!(net.get("b").unwrap().lon, 10.2);
        let dup = vec![
            Sensor { id: "a".into(), lon: 1.0, lat: 1.0 },
            Sensor { id: "a".into(), lon: 2.0, lat: 1.0 },
        ];
        assert!(matches!(SensorNetwork::new(dup, &b), Err(GeoError::DuplicateSensor(_))));
    }
}
