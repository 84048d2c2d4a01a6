//! Sparse-sensor reconstruction of tsunami wavefields.
//!
//! * [`geo`]: lat-lon grid, bathymetry, sensors, great-circle geometry
//! * [`swe`]: shallow-water solver producing surface-elevation frames
//! * [`model`]: attention encoder-decoder mapping sensor readings to a full field
//! * [`lihfp`]: interpolation baseline for virtual waveforms
//! * [`metrics`]: reconstruction error, arrival times, filtering, physics residual
//!
//! The crate is `no_std` and only needs an allocator.

#![no_std]
// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod geo;
pub mod swe;
pub mod lihfp;
pub mod metrics;
pub mod model;
