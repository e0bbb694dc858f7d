use std::ops::ControlFlow;

use quintic_core::grid::{inner, RadialField, RadialGrid, WaveState};
use quintic_core::ground_state::{energy, GroundState, SolitonParams};
use quintic_core::solver::{evolve_linear, evolve_observed, Dynamics, LinearMode, SolverConfig};
use quintic_core::spectrum::{compute_ground_spectrum, project_off_mode, Method};

fn bump(r: f64, center: f64, width: f64) -> f64 {
    let x = (r - center) / width;
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp() * std::f64::consts::E
    } else {
        0.0
    }
}

/// Even extension `f̄` of the bump centered at the origin.
fn even_bump(r: f64, width: f64) -> f64 {
    bump(r.abs(), 0.0, width)
}

/// Exact radial free wave with data `(f, 0)`.
fn dalembert(r: f64, t: f64, width: f64) -> f64 {
    if r == 0.0 {
        // limit: ∂_s (s f̄(s)) at s = t
        let h = 1e-5;
        let g = |s: f64| s * even_bump(s, width);
        return (g(t + h) - g(t - h)) / (2.0 * h);
    }
    ((r + t) * even_bump(r + t, width) + (r - t) * even_bump(r - t, width)) / (2.0 * r)
}

fn run(s0: &WaveState, dynamics: Dynamics, cfl: f64, t_max: f64) -> WaveState {
    let cfg = SolverConfig {
        cfl,
        t_max,
        support_radius: 1.0,
        causal_margin: 0.0,
        stop_on_outcome: false,
        ..Default::default()
    };
    evolve_observed(s0, dynamics, None, &cfg, &[], |_| ControlFlow::Continue(()))
        .unwrap()
        .1
}

#[test]
fn free_wave_matches_dalembert_at_second_order() {
    let width = 3.0;
    let t = 6.0;
    let err = |dr: f64| {
        let grid = RadialGrid::with_extent(20.0, dr).unwrap();
        let u = RadialField::from_fn(grid, |r| even_bump(r, width));
        let s0 = WaveState::new(u, RadialField::zeros(grid), 0.0).unwrap();
        let s = run(&s0, Dynamics::Free, 0.5, t);
        grid.nodes()
            .zip(s.u.values())
            .map(|(r, v)| (v - dalembert(r, s.t, width)).abs())
            .fold(0.0, f64::max)
    };
    let (a, b) = (err(0.02), err(0.01));
    eprintln!("dalembert errors {a:e} {b:e}");
    assert!(b < 1e-3);
    assert!((3.5..4.5).contains(&(a / b)), "ratio {}", a / b);
}

/// Gaussian truncated where it falls below 1e-15: compactly supported on the
/// grid but with no resolvable edge.
fn gaussian_cut(r: f64, amplitude: f64, sigma: f64) -> f64 {
    let x = r / sigma;
    if x <= 6.0 {
        amplitude * (-x * x).exp()
    } else {
        0.0
    }
}

#[test]
fn energy_drift_is_small_and_fourth_order() {
    let grid = RadialGrid::with_extent(60.0, 0.01).unwrap();
    let u = RadialField::from_fn(grid, |r| gaussian_cut(r, 0.3, 1.0));
    let ut = RadialField::from_fn(grid, |r| gaussian_cut(r, 0.1, 1.5));
    let s0 = WaveState::new(u, ut, 0.0).unwrap();
    let e0 = energy(&s0);
    let drift = |cfl: f64| (energy(&run(&s0, Dynamics::Nonlinear, cfl, 50.0)) - e0).abs() / e0.abs();
    let (a, b) = (drift(0.5), drift(0.25));
    eprintln!("energy drift {a:e} {b:e} order {}", (a / b).log2());
    assert!(a <= 1e-6);
    assert!((a / b).log2() >= 3.5, "order {}", (a / b).log2());
}

#[test]
fn finite_speed_of_propagation() {
    for dr in [0.02, 0.01] {
        let grid = RadialGrid::with_extent(40.0, dr).unwrap();
        let support = 6.0;
        let u = RadialField::from_fn(grid, |r| gaussian_cut(r, 0.5, 1.0));
        let ut = RadialField::from_fn(grid, |r| gaussian_cut(r, 0.2, 1.0));
        let s0 = WaveState::new(u, ut, 0.0).unwrap();
        for t in [5.0, 20.0] {
            let s = run(&s0, Dynamics::Nonlinear, 0.5, t);
            let beyond = grid
                .nodes()
                .zip(s.u.values().iter().zip(s.ut.values()))
                .filter(|(r, _)| *r > support + s.t + 2.0 * dr)
                .map(|(_, (u, ut))| u.abs().max(ut.abs()))
                .fold(0.0, f64::max);
            assert!(beyond <= 1e-10, "dr {dr} t {t}: {beyond:e}");
        }
    }
}

#[test]
fn spatial_convergence_is_second_order() {
    let final_state = |dr: f64| {
        let grid = RadialGrid::with_extent(30.0, dr).unwrap();
        let u = RadialField::from_fn(grid, |r| gaussian_cut(r, 0.5, 1.0));
        let s0 = WaveState::new(u, RadialField::zeros(grid), 0.0).unwrap();
        run(&s0, Dynamics::Nonlinear, 0.5, 10.0)
    };
    let coarse = final_state(0.04);
    let mid = final_state(0.02);
    let fine = final_state(0.01);
    // compare on the coarse nodes
    let diff = |a: &WaveState, b: &WaveState, stride: usize| {
        a.u.values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - b.u.values()[i * stride]).abs())
            .fold(0.0, f64::max)
    };
    let e1 = diff(&coarse, &mid, 2);
    let e2 = diff(&mid, &fine, 2);
    assert!(e1 / e2 >= 3.5, "ratio {}", e1 / e2);
}

#[test]
fn strong_huygens_at_origin() {
    let grid = RadialGrid::with_extent(40.0, 0.01).unwrap();
    let support = 6.0;
    let u = RadialField::from_fn(grid, |r| gaussian_cut(r, 1.0, 1.0));
    let s0 = WaveState::new(u, RadialField::zeros(grid), 0.0).unwrap();
    let cfg = SolverConfig {
        t_max: 25.0,
        support_radius: support,
        causal_margin: 0.0,
        stop_on_outcome: false,
        record_stride: 1,
        ..Default::default()
    };
    let rec = evolve_linear(&s0, SolitonParams::unit(), &cfg, LinearMode::Free, &[0.0]).unwrap();
    let late = rec
        .samples
        .iter()
        .filter(|s| s.t > support)
        .map(|s| s.probes[0].abs())
        .fold(0.0, f64::max);
    assert!(late <= 1e-8, "late origin amplitude {late:e}");
}

#[test]
fn unstable_mode_grows_like_cosh() {
    let grid = RadialGrid::with_extent(60.0, 0.02).unwrap();
    let gs = GroundState::new(grid).unwrap();
    let sd = compute_ground_spectrum(grid, Method::Matrix).unwrap();
    let potential = gs.field().map(|w| -5.0 * w.powi(4));
    let s0 = WaveState::new(sd.g0.clone(), RadialField::zeros(grid), 0.0).unwrap();
    let cfg = SolverConfig {
        t_max: 5.0,
        support_radius: 40.0,
        causal_margin: 0.0,
        stop_on_outcome: false,
        record_stride: 10,
        ..Default::default()
    };
    let mut worst = 0.0_f64;
    evolve_observed(&s0, Dynamics::Potential(potential), None, &cfg, &[], |s| {
        let c = inner(&s.u, &sd.g0).unwrap();
        worst = worst.max((c / (sd.k0 * s.t).cosh() - 1.0).abs());
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(worst <= 0.01, "worst relative deviation {worst:e}");

    // the analytic potential gives the same law to within discretization
    let rec = evolve_linear(&s0, SolitonParams::unit(), &cfg, LinearMode::WithPotential, &[0.0]).unwrap();
    let last = rec.samples.last().unwrap();
    let expected = sd.g0.values()[0] * (sd.k0 * last.t).cosh();
    assert!((last.probes[0] / expected - 1.0).abs() <= 0.01);
}

#[test]
fn orthogonal_velocity_does_not_excite_the_mode() {
    let grid = RadialGrid::with_extent(60.0, 0.02).unwrap();
    let gs = GroundState::new(grid).unwrap();
    let sd = compute_ground_spectrum(grid, Method::Matrix).unwrap();
    let potential = gs.field().map(|w| -5.0 * w.powi(4));
    let raw = RadialField::from_fn(grid, |r| gaussian_cut(r - 3.0, 1.0, 0.7) * (r <= 7.0) as u8 as f64);
    let f = project_off_mode(&raw, &sd.g0).unwrap();
    let f_norm = inner(&f, &f).unwrap().sqrt();
    let s0 = WaveState::new(RadialField::zeros(grid), f, 0.0).unwrap();
    let cfg = SolverConfig {
        t_max: 10.0,
        support_radius: 40.0,
        causal_margin: 0.0,
        stop_on_outcome: false,
        record_stride: 10,
        ..Default::default()
    };
    let mut worst = 0.0_f64;
    evolve_observed(&s0, Dynamics::Potential(potential), None, &cfg, &[], |s| {
        worst = worst.max(inner(&s.u, &sd.g0).unwrap().abs());
        ControlFlow::Continue(())
    })
    .unwrap();
    assert!(worst <= 1e-3 * f_norm, "leak {worst:e} vs {f_norm:e}");
}
