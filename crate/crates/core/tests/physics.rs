use sparsewave_core::geo::*;
use sparsewave_core::metrics::*;
use sparsewave_core::swe::*;

fn desk_seamount() -> BathymetryGrid {
    let spec = GridSpec::new(130.0, 160.0, 20.0, 50.0, 96, 96).unwrap();
    synth_bathymetry(spec, BathymetryProfile::Seamount).unwrap()
}

fn pt(lon: f64, lat: f64) -> GeoPoint {
    GeoPoint::new(lon, lat).unwrap()
}

/// Least-squares slope of y against x.
fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

#[test]
fn front_travels_at_shallow_water_speed() {
    let spec = GridSpec::new(130.0, 160.0, 10.0, 40.0, 96, 96).unwrap();
    let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
    let x0 = pt(145.0, 15.0);
    let fs = simulate(&EpicenterSource::new(x0), &b, &PhysicalConstants::inviscid_nonrotating(), &SimOptions::default(), 6000.0, 10.0)
        .unwrap();
    // arrival of the 3 cm front along a meridian, distance against time
    let mut pts = Vec::new();
    for k in 0..20 {
        let p = pt(145.0, 20.0 + k as f64);
        if let Some(f) = (0..fs.n_frames()).find(|&f| sample_field(fs.frame(f), &b, p).unwrap().abs() >= 0.03) {
            pts.push((fs.times[f], haversine_distance(x0, p)));
        }
    }
    assert!(pts.len() >= 10, "front reached only {} stations", pts.len());
    let c = slope(&pts);
    let expected = (GRAVITY * 4000.0f64).sqrt();
    assert!((expected - 198.06).abs() < 0.01);
    assert!((c / expected - 1.0).abs() < 0.02, "front speed {c} vs {expected}");
}

#[test]
fn closed_basin_conserves_volume_over_a_full_run() {
    let b = desk_seamount();
    let consts = PhysicalConstants::default();
    let mut state = initial_condition(&EpicenterSource::new(pt(142.0, 33.0)), &b).unwrap();
    let stepper = Stepper::new(&b, consts, Boundary::Closed, 10.0).unwrap();
    let v0 = stepper.total_volume(&state);
    // 14400 s at 10 s per step covers the 289 output frames of a standard run
    for _ in 0..1440 {
        state = stepper.step(&state).unwrap();
    }
    let drift = (stepper.total_volume(&state) - v0).abs() / v0;
    assert!(drift < 1e-9, "relative volume drift {drift:e}");
}

#[test]
fn rest_state_survives_many_steps() {
    let b = desk_seamount();
    let stepper = Stepper::new(&b, PhysicalConstants::default(), Boundary::Sponge, 10.0).unwrap();
    let mut s = SweState::rest(&b);
    for _ in 0..100 {
        s = stepper.step(&s).unwrap();
    }
    let eta = s.eta(&b);
    assert!(eta.iter().all(|e| e.abs() < 1e-12));
    assert!(s.u.iter().chain(&s.v).all(|x| x.abs() < 1e-12));
}

#[test]
fn dissipative_closed_run_does_not_gain_energy() {
    let b = desk_seamount();
    let consts = PhysicalConstants::default();
    assert!(consts.c_d > 0.0);
    let stepper = Stepper::new(&b, consts, Boundary::Closed, 10.0).unwrap();
    let mut s = initial_condition(&EpicenterSource::new(pt(142.0, 33.0)), &b).unwrap();
    let mut e_prev = stepper.discrete_energy(&s);
    let e0 = stepper.total_energy(&s);
    for frame in 0..120 {
        for _ in 0..5 {
            s = stepper.step(&s).unwrap();
        }
        let e = stepper.discrete_energy(&s);
        assert!(e <= e_prev * (1.0 + 1e-6), "energy grew at frame {frame}: {e_prev} -> {e}");
        e_prev = e;
    }
    assert!(stepper.total_energy(&s) < e0);
}

#[test]
fn centered_source_on_flat_equatorial_box_is_mirror_symmetric() {
    let spec = GridSpec::new(130.0, 160.0, -15.0, 15.0, 60, 60).unwrap();
    let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
    let consts = PhysicalConstants { omega: 0.0, ..PhysicalConstants::default() };
    let fs = simulate(&EpicenterSource::new(pt(145.0, 0.0)), &b, &consts, &SimOptions::default(), 3000.0, 500.0).unwrap();
    let (nx, ny) = (spec.nlon, spec.nlat);
    for k in 0..fs.n_frames() {
        let f = fs.frame(k);
        for j in 0..ny {
            for i in 0..nx {
                let a = f[spec.index(i, j)];
                assert!((a - f[spec.index(nx - 1 - i, j)]).abs() < 1e-9, "lon mirror, frame {k}");
                assert!((a - f[spec.index(i, ny - 1 - j)]).abs() < 1e-9, "lat mirror, frame {k}");
            }
        }
    }
}

#[test]
fn standard_run_has_289_frames_and_starts_at_the_source_peak() {
    let b = desk_seamount();
    let src = EpicenterSource::new(pt(142.0, 33.0));
    let opts = SimOptions { store_velocities: false, ..Default::default() };
    let fs = simulate(&src, &b, &PhysicalConstants::default(), &opts, 14_400.0, 50.0).unwrap();
    assert_eq!(fs.n_frames(), 289);
    assert_eq!(fs.times[288], 14_400.0);
    let peak = fs.frame(0).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    // the source is centered between cells, so the peak is the formula at the nearest center
    let nearest = b.ocean_cells().iter().map(|&c| {
        let (i, j) = b.spec().ij(c);
        central_angle(b.spec().cell_center(i, j), src.x0)
    });
    let r = nearest.fold(f64::INFINITY, f64::min);
    assert!((peak - src.displacement(r)).abs() < 1e-9);
    assert!(peak <= src.amplitude + 1e-9);

    let zero = simulate(&src, &b, &PhysicalConstants::default(), &opts, 0.0, 50.0).unwrap();
    assert_eq!(zero.n_frames(), 1);
    assert_eq!(zero.frame(0), initial_condition(&src, &b).unwrap().eta(&b).as_slice());
}

#[test]
fn source_profile_values() {
    let src = EpicenterSource::new(pt(142.0, 33.0));
    assert_eq!(src.displacement(0.0), 5.0);
    let r = 1.0 / 250f64.sqrt();
    assert!((src.displacement(r) - 1.8394).abs() < 1e-4);
    assert!(src.displacement(0.2) < 1e-12);
}

#[test]
fn coriolis_values() {
    let c = PhysicalConstants::default();
    assert_eq!(coriolis_parameter(0.0, &c), 0.0);
    assert!((coriolis_parameter(90.0, &c) - 1.4584e-4).abs() < 1e-8);
    assert!((coriolis_parameter(45.0, &c) - 1.0312e-4).abs() < 1e-8);
}

#[test]
fn desk_run_satisfies_continuity() {
    let b = desk_seamount();
    let opts = SimOptions { boundary: Boundary::Closed, ..Default::default() };
    let fs = simulate(&EpicenterSource::new(pt(142.0, 33.0)), &b, &PhysicalConstants::default(), &opts, 14_400.0, 50.0).unwrap();
    let r = continuity_residual(&fs, &b).unwrap();
    assert_eq!(r.len(), 287);
    let mean = r.iter().map(|x| x.1).sum::<f64>() / r.len() as f64;
    assert!(mean < 5e-2, "mean normalized residual {mean}");
}

#[test]
fn rest_series_has_zero_residual() {
    let b = desk_seamount();
    let fs = simulate_rest(&b, 5);
    assert!(continuity_residual(&fs, &b).unwrap().iter().all(|&(_, r)| r == 0.0));
}

fn simulate_rest(b: &BathymetryGrid, n: usize) -> FrameSeries {
    let spec = *b.spec();
    FrameSeries {
        spec,
        times: (0..n).map(|k| 50.0 * k as f64).collect(),
        eta: vec![0.0; n * spec.len()],
        velocities: Some(VelocityFrames {
            u: vec![0.0; n * spec.nlat * (spec.nlon + 1)],
            v: vec![0.0; n * (spec.nlat + 1) * spec.nlon],
        }),
    }
}

#[test]
fn manufactured_linear_rise_gives_exact_rate() {
    let spec = GridSpec::new(130.0, 140.0, 20.0, 30.0, 12, 10).unwrap();
    let b = synth_bathymetry(spec, BathymetryProfile::Flat).unwrap();
    let rate = 2.5e-4;
    let mut fs = simulate_rest(&b, 6);
    for k in 0..6 {
        let t = fs.times[k];
        let n = spec.len();
        fs.eta[k * n..(k + 1) * n].iter_mut().for_each(|e| *e = 0.01 + rate * t);
    }
    let fields = continuity_residual_fields(&fs, &b).unwrap();
    for f in &fields {
        for &c in b.ocean_cells() {
            assert!((f.residual[c] - rate).abs() < 1e-12);
        }
    }
    // uniform residual divided by the uniform rate
    for (_, r) in continuity_residual(&fs, &b).unwrap() {
        assert!((r - 1.0).abs() < 1e-12);
    }
}

#[test]
fn residual_needs_velocities_and_three_frames() {
    let b = desk_seamount();
    let mut fs = simulate_rest(&b, 5);
    fs.velocities = None;
    assert!(matches!(continuity_residual(&fs, &b), Err(MetricsError::MissingVelocities)));
    let short = simulate_rest(&b, 2);
    assert!(matches!(continuity_residual(&short, &b), Err(MetricsError::TooFewFrames(2))));
}
