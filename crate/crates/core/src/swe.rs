//! Shallow-water solver on a spherical lat-lon Arakawa C-grid.
//!
//! Thickness `h` lives at cell centers, zonal velocity `u` on west/east
//! faces and meridional velocity `v` on south/north faces:
//!
//! * `u[j * (nlon + 1) + i]` is the west face of cell `(i, j)`
//! * `v[j * nlon + i]` is the south face of cell `(i, j)`
//!
//! Time stepping is forward-backward: continuity first (flux form, so the
//! volume sum telescopes), then momentum with the updated surface. The
//! Coriolis term alternates, `u` uses the old `v` and `v` uses the new `u`.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use thiserror::Error;

use crate::geo::{central_angle, BathymetryGrid, GeoPoint, GridSpec, EARTH_RADIUS_M, GRAVITY};

/// Width of the sponge layer in cells.
pub const SPONGE_CELLS: usize = 10;
/// Per-step damping at the outermost sponge cell.
pub const SPONGE_MAX_DAMPING: f64 = 0.05;
/// Courant number used to pick the internal time step.
pub const DEFAULT_CFL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("blow-up at cell ({i}, {j}) at t = {t} s")]
    BlowUp { i: usize, j: usize, t: f64 },
    #[error("epicenter ({lon}, {lat}) is not on an ocean cell")]
    EpicenterOnLand { lon: f64, lat: f64 },
    #[error("invalid physical constants: {0}")]
    BadConstants(&'static str),
    #[error("invalid source: {0}")]
    BadSource(&'static str),
    #[error("invalid schedule: {0}")]
    BadSchedule(&'static str),
    #[error("state does not match the grid")]
    ShapeMismatch,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct PhysicalConstants {
    pub g: f64,
    pub omega: f64,
    pub beta: f64,
    pub c_d: f64,
    /// Biharmonic viscosity in m⁴/s; `None` selects `0.01 * dx_min⁴ / dt`.
    pub nu4: Option<f64>,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self { g: GRAVITY, omega: 7.292e-5, beta: 0.015, c_d: 2.5e-3, nu4: None }
    }
}

impl PhysicalConstants {
    /// Gravity waves only: no rotation, drag or viscosity.
    pub fn inviscid_nonrotating() -> Self {
        Self { omega: 0.0, c_d: 0.0, nu4: Some(0.0), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.g > 0.0) {
            return Err(SimError::BadConstants("g must be positive"));
        }
        if !(self.omega >= 0.0) {
            return Err(SimError::BadConstants("omega must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.beta) {
            return Err(SimError::BadConstants("beta must lie in [0, 1)"));
        }
        if !(self.c_d >= 0.0) {
            return Err(SimError::BadConstants("c_d must be non-negative"));
        }
        if let Some(nu) = self.nu4 {
            if !(nu >= 0.0) {
                return Err(SimError::BadConstants("nu4 must be non-negative"));
            }
        }
        Ok(())
    }
}

/// `f = 2 Ω sin(lat)`.
pub fn coriolis_parameter(lat_deg: f64, consts: &PhysicalConstants) -> f64 {
    2.0 * consts.omega * lat_deg.to_radians().sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Boundary {
    /// Reflective walls; volume is conserved.
    #[default]
    Closed,
    /// Reflective walls behind a linear damping ramp.
    Sponge,
}

/// Flat-topped super-Gaussian surface displacement.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpicenterSource {
    pub x0: GeoPoint,
    #[cfg_attr(feature = "serde", serde(default = "default_amplitude"))]
    pub amplitude: f64,
    /// Multiplies the squared great-circle angle (radians²).
    #[cfg_attr(feature = "serde", serde(default = "default_width"))]
    pub width_param: f64,
}

#[cfg(feature = "serde")]
fn default_amplitude() -> f64 {
    5.0
}
#[cfg(feature = "serde")]
fn default_width() -> f64 {
    250.0
}

impl EpicenterSource {
    pub fn new(x0: GeoPoint) -> Self {
        Self { x0, amplitude: 5.0, width_param: 250.0 }
    }

    /// Surface elevation at angular distance `r` radians from the epicenter.
    pub fn displacement(&self, r: f64) -> f64 {
        let s = self.width_param * r * r;
        self.amplitude * (-(s * s) * (s * s)).exp()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweState {
    /// Fluid thickness, 0 on land.
    pub h: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl SweState {
    /// Water at rest: `h = -z_b`, no flow.
    pub fn rest(bathy: &BathymetryGrid) -> Self {
        let spec = bathy.spec();
        let h = (0..spec.len())
            .map(|k| if bathy.is_land(k) { 0.0 } else { -bathy.z_b()[k] })
            .collect();
        Self {
            h,
            u: vec![0.0; spec.nlat * (spec.nlon + 1)],
            v: vec![0.0; (spec.nlat + 1) * spec.nlon],
            t: 0.0,
        }
    }

    /// Surface elevation `h + z_b`, 0 on land.
    pub fn eta(&self, bathy: &BathymetryGrid) -> Vec<f64> {
        self.h
            .iter()
            .zip(bathy.z_b())
            .enumerate()
            .map(|(k, (&h, &z))| if bathy.is_land(k) { 0.0 } else { h + z })
            .collect()
    }
}

pub fn initial_condition(src: &EpicenterSource, bathy: &BathymetryGrid) -> Result<SweState, SimError> {
    if !(src.amplitude > 0.0) || !(src.width_param > 0.0) {
        return Err(SimError::BadSource("amplitude and width_param must be positive"));
    }
    if !bathy.is_ocean_at(src.x0) {
        return Err(SimError::EpicenterOnLand { lon: src.x0.lon, lat: src.x0.lat });
    }
    let spec = bathy.spec();
    let mut state = SweState::rest(bathy);
    for &k in bathy.ocean_cells() {
        let (i, j) = spec.ij(k);
        let r = central_angle(spec.cell_center(i, j), src.x0);
        state.h[k] += src.displacement(r);
    }
    Ok(state)
}

/// Largest stable step for the given Courant number.
pub fn stable_dt(bathy: &BathymetryGrid, consts: &PhysicalConstants, cfl: f64) -> f64 {
    cfl * min_spacing(bathy.spec()) / (consts.g * bathy.max_depth()).sqrt()
}

fn min_spacing(spec: &GridSpec) -> f64 {
    (0..spec.nlat).map(|j| spec.dx_m(j)).fold(spec.dy_m(), f64::min)
}

/// Staggered-grid geometry: metric lengths, cell areas and open faces.
#[derive(Debug, Clone)]
pub struct CGrid {
    nx: usize,
    ny: usize,
    dy: f64,
    /// zonal width at cell-center rows
    dx: Vec<f64>,
    /// zonal width at v-face rows (ny + 1)
    dx_v: Vec<f64>,
    area: Vec<f64>,
    u_open: Vec<bool>,
    v_open: Vec<bool>,
}

impl CGrid {
    /// Faces between two ocean cells are open; all others, including the
    /// outer boundary, carry no normal flow.
    pub fn new(bathy: &BathymetryGrid) -> Self {
        let spec = *bathy.spec();
        let (nx, ny) = (spec.nlon, spec.nlat);
        let dlam = spec.dlon().to_radians();
        let dy = spec.dy_m();
        let dx: Vec<f64> = (0..ny).map(|j| spec.dx_m(j)).collect();
        let dx_v: Vec<f64> = (0..=ny)
            .map(|j| {
                let lat = spec.lat_min + j as f64 * spec.dlat();
                EARTH_RADIUS_M * lat.to_radians().cos() * dlam
            })
            .collect();
        let area = dx.iter().map(|&d| d * dy).collect();
        let ocean = |i: usize, j: usize| !bathy.is_land(spec.index(i, j));
        let mut u_open = vec![false; ny * (nx + 1)];
        for j in 0..ny {
            for i in 1..nx {
                u_open[j * (nx + 1) + i] = ocean(i - 1, j) && ocean(i, j);
            }
        }
        let mut v_open = vec![false; (ny + 1) * nx];
        for j in 1..ny {
            for i in 0..nx {
                v_open[j * nx + i] = ocean(i, j - 1) && ocean(i, j);
            }
        }
        Self { nx, ny, dy, dx, dx_v, area, u_open, v_open }
    }

    #[inline]
    pub fn ui(&self, j: usize, i: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn vi(&self, j: usize, i: usize) -> usize {
        j * self.nx + i
    }

    pub fn cell_area(&self, j: usize) -> f64 {
        self.area[j]
    }

    pub fn u_open(&self, k: usize) -> bool {
        self.u_open[k]
    }

    pub fn v_open(&self, k: usize) -> bool {
        self.v_open[k]
    }

    /// `∇·(u h)` at every cell from centered face thicknesses, 0 on cells
    /// without open faces.
    pub fn flux_divergence(&self, h: &[f64], u: &[f64], v: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut flux_u = vec![0.0; u.len()];
        for j in 0..ny {
            for i in 1..nx {
                let k = self.ui(j, i);
                if self.u_open[k] {
                    let hf = 0.5 * (h[j * nx + i - 1] + h[j * nx + i]);
                    flux_u[k] = u[k] * hf * self.dy;
                }
            }
        }
        let mut flux_v = vec![0.0; v.len()];
        for j in 1..ny {
            for i in 0..nx {
                let k = self.vi(j, i);
                if self.v_open[k] {
                    let hf = 0.5 * (h[(j - 1) * nx + i] + h[j * nx + i]);
                    flux_v[k] = v[k] * hf * self.dx_v[j];
                }
            }
        }
        let mut div = vec![0.0; nx * ny];
        for j in 0..ny {
            for i in 0..nx {
                let net = flux_u[self.ui(j, i + 1)] - flux_u[self.ui(j, i)] + flux_v[self.vi(j + 1, i)]
                    - flux_v[self.vi(j, i)];
                div[j * nx + i] = net / self.area[j];
            }
        }
        div
    }
}

/// Precomputed geometry and coefficients for repeated stepping.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    bathy: &'a BathymetryGrid,
    consts: PhysicalConstants,
    boundary: Boundary,
    dt: f64,
    nu4: f64,
    grid: CGrid,
    nx: usize,
    ny: usize,
    f_u: Vec<f64>,
    f_v: Vec<f64>,
    sponge: Vec<f64>,
}

impl<'a> Stepper<'a> {
    pub fn new(
        bathy: &'a BathymetryGrid,
        consts: PhysicalConstants,
        boundary: Boundary,
        dt: f64,
    ) -> Result<Self, SimError> {
        consts.validate()?;
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::BadSchedule("dt must be positive"));
        }
        let spec = *bathy.spec();
        let (nx, ny) = (spec.nlon, spec.nlat);
        let grid = CGrid::new(bathy);
        let f_u = (0..ny).map(|j| coriolis_parameter(spec.cell_lat(j), &consts)).collect();
        let f_v = (0..=ny)
            .map(|j| coriolis_parameter(spec.lat_min + j as f64 * spec.dlat(), &consts))
            .collect();
        let mut sponge = vec![0.0; nx * ny];
        if boundary == Boundary::Sponge {
            for j in 0..ny {
                for i in 0..nx {
                    let d = i.min(j).min(nx - 1 - i).min(ny - 1 - j);
                    if d < SPONGE_CELLS {
                        sponge[j * nx + i] =
                            SPONGE_MAX_DAMPING * (SPONGE_CELLS - d) as f64 / SPONGE_CELLS as f64;
                    }
                }
            }
        }
        let nu4 = consts.nu4.unwrap_or_else(|| 0.01 * min_spacing(&spec).powi(4) / dt);
        Ok(Self {
            bathy,
            consts,
            boundary,
            dt,
            nu4,
            grid,
            nx,
            ny,
            f_u,
            f_v,
            sponge,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Effective biharmonic coefficient.
    pub fn nu4(&self) -> f64 {
        self.nu4
    }

    #[inline]
    fn ui(&self, j: usize, i: usize) -> usize {
        self.grid.ui(j, i)
    }

    #[inline]
    fn vi(&self, j: usize, i: usize) -> usize {
        self.grid.vi(j, i)
    }

    pub fn grid(&self) -> &CGrid {
        &self.grid
    }

    fn check_shape(&self, s: &SweState) -> Result<(), SimError> {
        let (nx, ny) = (self.nx, self.ny);
        if s.h.len() != nx * ny || s.u.len() != ny * (nx + 1) || s.v.len() != (ny + 1) * nx {
            return Err(SimError::ShapeMismatch);
        }
        Ok(())
    }

    /// Advances one forward-backward step.
    pub fn step(&self, state: &SweState) -> Result<SweState, SimError> {
        self.check_shape(state)?;
        let (nx, ny, dt) = (self.nx, self.ny, self.dt);
        let bathy = self.bathy;
        let z_b = bathy.z_b();

        // continuity
        let div = self.grid.flux_divergence(&state.h, &state.u, &state.v);
        let mut h = state.h.clone();
        for &c in bathy.ocean_cells() {
            h[c] -= dt * div[c];
        }
        let eta: Vec<f64> = (0..nx * ny).map(|c| if bathy.is_land(c) { 0.0 } else { h[c] + z_b[c] }).collect();

        let g_eff = (1.0 - self.consts.beta) * self.consts.g;
        let c_d = self.consts.c_d;

        // zonal momentum, old v for rotation
        let lap_u = self.laplacian_u(&state.u);
        let bilap_u = if self.nu4 > 0.0 { self.laplacian_u(&lap_u) } else { vec![0.0; lap_u.len()] };
        let mut u = state.u.clone();
        for j in 0..ny {
            for i in 1..nx {
                let k = self.ui(j, i);
                if !self.grid.u_open[k] {
                    continue;
                }
                let (cw, ce) = (j * nx + i - 1, j * nx + i);
                let uc = state.u[k];
                let vbar = 0.25
                    * (state.v[self.vi(j, i - 1)]
                        + state.v[self.vi(j, i)]
                        + state.v[self.vi(j + 1, i - 1)]
                        + state.v[self.vi(j + 1, i)]);
                let dx = self.grid.dx[j];
                let pg = -g_eff * (eta[ce] - eta[cw]) / dx;
                let cor = self.f_u[j] * vbar;
                let dudx = if uc > 0.0 {
                    (uc - state.u[k - 1]) / dx
                } else {
                    (state.u[k + 1] - uc) / dx
                };
                let dudy = if vbar > 0.0 {
                    if j > 0 { (uc - state.u[self.ui(j - 1, i)]) / self.grid.dy } else { 0.0 }
                } else if j + 1 < ny {
                    (state.u[self.ui(j + 1, i)] - uc) / self.grid.dy
                } else {
                    0.0
                };
                let adv = uc * dudx + vbar * dudy;
                let hf = 0.5 * (h[cw] + h[ce]);
                let drag = c_d * (uc * uc + vbar * vbar).sqrt() * uc / hf;
                u[k] = uc + dt * (pg + cor - adv - drag - self.nu4 * bilap_u[k]);
            }
        }

        // meridional momentum, new u for rotation
        let lap_v = self.laplacian_v(&state.v);
        let bilap_v = if self.nu4 > 0.0 { self.laplacian_v(&lap_v) } else { vec![0.0; lap_v.len()] };
        let mut v = state.v.clone();
        for j in 1..ny {
            for i in 0..nx {
                let k = self.vi(j, i);
                if !self.grid.v_open[k] {
                    continue;
                }
                let (cs, cn) = ((j - 1) * nx + i, j * nx + i);
                let vc = state.v[k];
                let ubar = 0.25
                    * (u[self.ui(j - 1, i)] + u[self.ui(j - 1, i + 1)] + u[self.ui(j, i)] + u[self.ui(j, i + 1)]);
                let dxv = self.grid.dx_v[j];
                let pg = -g_eff * (eta[cn] - eta[cs]) / self.grid.dy;
                let cor = -self.f_v[j] * ubar;
                let dvdx = if ubar > 0.0 {
                    if i > 0 { (vc - state.v[k - 1]) / dxv } else { 0.0 }
                } else if i + 1 < nx {
                    (state.v[k + 1] - vc) / dxv
                } else {
                    0.0
                };
                let dvdy = if vc > 0.0 {
                    (vc - state.v[self.vi(j - 1, i)]) / self.grid.dy
                } else {
                    (state.v[self.vi(j + 1, i)] - vc) / self.grid.dy
                };
                let adv = ubar * dvdx + vc * dvdy;
                let hf = 0.5 * (h[cs] + h[cn]);
                let drag = c_d * (vc * vc + ubar * ubar).sqrt() * vc / hf;
                v[k] = vc + dt * (pg + cor - adv - drag - self.nu4 * bilap_v[k]);
            }
        }

        if self.boundary == Boundary::Sponge {
            self.apply_sponge(&mut h, &mut u, &mut v);
        }

        let next = SweState { h, u, v, t: state.t + dt };
        self.check_finite(&next)?;
        Ok(next)
    }

    fn laplacian_u(&self, u: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; u.len()];
        let dy2 = self.grid.dy * self.grid.dy;
        for j in 0..ny {
            let dx2 = self.grid.dx[j] * self.grid.dx[j];
            for i in 1..nx {
                let k = self.ui(j, i);
                if !self.grid.u_open[k] {
                    continue;
                }
                let c = u[k];
                let nb = |kk: usize| if self.grid.u_open[kk] { u[kk] } else { c };
                let w = nb(k - 1);
                let e = nb(k + 1);
                let s = if j > 0 { nb(self.ui(j - 1, i)) } else { c };
                let n = if j + 1 < ny { nb(self.ui(j + 1, i)) } else { c };
                out[k] = (e - 2.0 * c + w) / dx2 + (n - 2.0 * c + s) / dy2;
            }
        }
        out
    }

    fn laplacian_v(&self, v: &[f64]) -> Vec<f64> {
        let (nx, ny) = (self.nx, self.ny);
        let mut out = vec![0.0; v.len()];
        let dy2 = self.grid.dy * self.grid.dy;
        for j in 1..ny {
            let dx2 = self.grid.dx_v[j] * self.grid.dx_v[j];
            for i in 0..nx {
                let k = self.vi(j, i);
                if !self.grid.v_open[k] {
                    continue;
                }
                let c = v[k];
                let nb = |kk: usize| if self.grid.v_open[kk] { v[kk] } else { c };
                let w = if i > 0 { nb(k - 1) } else { c };
                let e = if i + 1 < nx { nb(k + 1) } else { c };
                let s = nb(self.vi(j - 1, i));
                let n = nb(self.vi(j + 1, i));
                out[k] = (e - 2.0 * c + w) / dx2 + (n - 2.0 * c + s) / dy2;
            }
        }
        out
    }

    fn apply_sponge(&self, h: &mut [f64], u: &mut [f64], v: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let z_b = self.bathy.z_b();
        for &c in self.bathy.ocean_cells() {
            let gamma = self.sponge[c];
            if gamma > 0.0 {
                h[c] = -z_b[c] + (1.0 - gamma) * (h[c] + z_b[c]);
            }
        }
        for j in 0..ny {
            for i in 1..nx {
                let gamma = self.sponge[j * nx + i - 1].max(self.sponge[j * nx + i]);
                u[self.ui(j, i)] *= 1.0 - gamma;
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let gamma = self.sponge[(j - 1) * nx + i].max(self.sponge[j * nx + i]);
                v[self.vi(j, i)] *= 1.0 - gamma;
            }
        }
    }

    fn check_finite(&self, s: &SweState) -> Result<(), SimError> {
        let nx = self.nx;
        for &c in self.bathy.ocean_cells() {
            let hc = s.h[c];
            if !hc.is_finite() || hc <= 0.0 {
                return Err(SimError::BlowUp { i: c % nx, j: c / nx, t: s.t });
            }
        }
        for (k, &x) in s.u.iter().enumerate() {
            if !x.is_finite() {
                let (j, i) = (k / (nx + 1), k % (nx + 1));
                return Err(SimError::BlowUp { i: i.min(nx - 1), j, t: s.t });
            }
        }
        for (k, &x) in s.v.iter().enumerate() {
            if !x.is_finite() {
                let (j, i) = (k / nx, k % nx);
                return Err(SimError::BlowUp { i, j: j.min(self.ny - 1), t: s.t });
            }
        }
        Ok(())
    }

    /// `Σ h · cell_area` over ocean cells, m³.
    pub fn total_volume(&self, s: &SweState) -> f64 {
        self.bathy.ocean_cells().iter().map(|&c| s.h[c] * self.grid.area[c / self.nx]).sum()
    }

    /// Kinetic plus available potential energy, divided by density.
    pub fn total_energy(&self, s: &SweState) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let z_b = self.bathy.z_b();
        let g_eff = (1.0 - self.consts.beta) * self.consts.g;
        let mut e = 0.0;
        for &c in self.bathy.ocean_cells() {
            let eta = s.h[c] + z_b[c];
            e += 0.5 * g_eff * eta * eta * self.grid.area[c / nx];
        }
        for j in 0..ny {
            for i in 1..nx {
                let k = self.ui(j, i);
                if self.grid.u_open[k] {
                    let hf = 0.5 * (s.h[j * nx + i - 1] + s.h[j * nx + i]);
                    e += 0.5 * hf * s.u[k] * s.u[k] * self.grid.dx[j] * self.grid.dy;
                }
            }
        }
        for j in 1..ny {
            for i in 0..nx {
                let k = self.vi(j, i);
                if self.grid.v_open[k] {
                    let hf = 0.5 * (s.h[(j - 1) * nx + i] + s.h[j * nx + i]);
                    e += 0.5 * hf * s.v[k] * s.v[k] * self.grid.dx_v[j] * self.grid.dy;
                }
            }
        }
        e
    }

    /// [`total_energy`](Self::total_energy) plus the time-staggering term
    /// `-½ dt g' Σ η ∇·(h u) area` of the forward-backward update. Without
    /// forcing or damping this is the quantity the scheme conserves; the
    /// plain energy oscillates about it by O(dt).
    pub fn discrete_energy(&self, s: &SweState) -> f64 {
        let z_b = self.bathy.z_b();
        let g_eff = (1.0 - self.consts.beta) * self.consts.g;
        let div = self.grid.flux_divergence(&s.h, &s.u, &s.v);
        let cross: f64 = self
            .bathy
            .ocean_cells()
            .iter()
            .map(|&c| (s.h[c] + z_b[c]) * div[c] * self.grid.area[c / self.nx])
            .sum();
        self.total_energy(s) - 0.5 * self.dt * g_eff * cross
    }
}

/// One step with a freshly built [`Stepper`] and closed boundaries.
pub fn step(state: &SweState, bathy: &BathymetryGrid, consts: &PhysicalConstants, dt: f64) -> Result<SweState, SimError> {
    Stepper::new(bathy, *consts, Boundary::Closed, dt)?.step(state)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SimOptions {
    pub boundary: Boundary,
    pub cfl: f64,
    pub store_velocities: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self { boundary: Boundary::Closed, cfl: DEFAULT_CFL, store_velocities: true }
    }
}

/// Velocity snapshots aligned with [`FrameSeries::times`].
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFrames {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Time-ordered surface elevation snapshots on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    pub spec: GridSpec,
    pub times: Vec<f64>,
    /// Frame-major, then row-major cells.
    pub eta: Vec<f64>,
    pub velocities: Option<VelocityFrames>,
}

impl FrameSeries {
    pub fn n_frames(&self) -> usize {
        self.times.len()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        let n = self.spec.len();
        &self.eta[k * n..(k + 1) * n]
    }

    pub fn u_len(&self) -> usize {
        self.spec.nlat * (self.spec.nlon + 1)
    }

    pub fn v_len(&self) -> usize {
        (self.spec.nlat + 1) * self.spec.nlon
    }

    pub fn u_frame(&self, k: usize) -> Option<&[f64]> {
        let n = self.u_len();
        self.velocities.as_ref().map(|vel| &vel.u[k * n..(k + 1) * n])
    }

    pub fn v_frame(&self, k: usize) -> Option<&[f64]> {
        let n = self.v_len();
        self.velocities.as_ref().map(|vel| &vel.v[k * n..(k + 1) * n])
    }

    /// Output spacing in seconds (0 for a single frame).
    pub fn interval(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Storage sizes and uniform time spacing.
    pub fn is_consistent(&self) -> bool {
        let n = self.times.len();
        if self.eta.len() != n * self.spec.len() {
            return false;
        }
        if let Some(vel) = &self.velocities {
            if vel.u.len() != n * self.u_len() || vel.v.len() != n * self.v_len() {
                return false;
            }
        }
        let dt = self.interval();
        self.times.windows(2).all(|w| w[1] > w[0] && ((w[1] - w[0]) - dt).abs() <= 1e-9 * dt.abs().max(1.0))
    }
}

/// Integrates from the source and records a frame every `out_interval` seconds,
/// starting with the initial condition at `t = 0` and ending at `duration`.
pub fn simulate(
    src: &EpicenterSource,
    bathy: &BathymetryGrid,
    consts: &PhysicalConstants,
    opts: &SimOptions,
    duration: f64,
    out_interval: f64,
) -> Result<FrameSeries, SimError> {
    if !(out_interval > 0.0) || !(duration >= 0.0) {
        return Err(SimError::BadSchedule("duration must be >= 0 and out_interval > 0"));
    }
    let ratio = duration / out_interval;
    let n_out = ratio.round();
    if (ratio - n_out).abs() > 1e-9 * ratio.max(1.0) {
        return Err(SimError::BadSchedule("duration must be a multiple of out_interval"));
    }
    let n_out = n_out as usize;
    if !(opts.cfl > 0.0) {
        return Err(SimError::BadSchedule("cfl must be positive"));
    }
    let dt_max = stable_dt(bathy, consts, opts.cfl);
    let substeps = (out_interval / dt_max).ceil().max(1.0) as usize;
    let dt = out_interval / substeps as f64;
    let stepper = Stepper::new(bathy, *consts, opts.boundary, dt)?;

    let spec = *bathy.spec();
    let mut state = initial_condition(src, bathy)?;
    let mut times = Vec::with_capacity(n_out + 1);
    let mut eta = Vec::with_capacity((n_out + 1) * spec.len());
    let mut vel = opts.store_velocities.then(|| VelocityFrames { u: Vec::new(), v: Vec::new() });
    let mut record = |k: usize, s: &SweState| {
        times.push(k as f64 * out_interval);
        eta.extend(s.eta(bathy));
        if let Some(vel) = vel.as_mut() {
            vel.u.extend_from_slice(&s.u);
            vel.v.extend_from_slice(&s.v);
        }
    };
    record(0, &state);
    for k in 1..=n_out {
        for _ in 0..substeps {
            state = stepper.step(&state)?;
        }
        state.t = k as f64 * out_interval;
        record(k, &state);
    }
    Ok(FrameSeries { spec, times, eta, velocities: vel })
}
