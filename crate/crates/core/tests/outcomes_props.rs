mod common;

use common::{base_set, rng};
use dblab_core::model::ModelParams;
use dblab_core::outcomes::{backload, expected_work_time, route_probabilities, simulate, sweep, trajectory_probabilities, SimConfig, SweepVariable};
use dblab_core::solver::{solve, PolicySchedule};
use rand::RngExt;

#[test]
fn closed_form_matches_simulation_on_random_schedules() {
    let mut r = rng(10);
    for i in 0..10 {
        let t = r.random_range(0.5..6.0);
        let p = ModelParams::new(r.random_range(0.1..0.9), r.random_range(0.3..2.0), r.random_range(0.3..2.0), 0.5, 5.0, t).unwrap();
        let nu = r.random_range(0.3..3.0);
        let (a, b) = (r.random_range(0.0..t), r.random_range(0.0..t));
        let s = PolicySchedule::from_periods(&p, a.min(b), (a - b).abs(), t - a.max(b));
        let o = route_probabilities(&s, &p, nu).unwrap();
        assert!((o.p_total - o.p_initial_doing - o.p_think_route - o.p_hail_mary).abs() <= 1e-10);
        let mc = simulate(&s, &p, nu, &SimConfig { reps: 1_000_000, seed: i }).unwrap();
        assert!((mc.success_rate - o.p_total).abs() <= 3.0 * mc.success_se, "case {i}: {} vs {}", mc.success_rate, o.p_total);
        assert!((mc.expected_work - o.expected_work).abs() <= 3.0 * mc.work_se, "case {i}: {} vs {}", mc.expected_work, o.expected_work);
    }
}

#[test]
fn reference_work_time_matches_simulation() {
    let (p, _) = base_set(1.9);
    let s = PolicySchedule::from_periods(&p, 0.0, 0.7, 1.2);
    let w = expected_work_time(&s, &p, 1.0).unwrap();
    let mc = simulate(&s, &p, 1.0, &SimConfig { reps: 1_000_000, seed: 99 }).unwrap();
    assert!((mc.expected_work - w).abs() <= 3.0 * mc.work_se, "{} vs {w}", mc.expected_work);
}

#[test]
fn seeds_control_the_draws() {
    let (p, _) = base_set(1.9);
    let s = PolicySchedule::from_periods(&p, 0.0, 0.7, 1.2);
    let a = simulate(&s, &p, 1.0, &SimConfig { reps: 50_000, seed: 1 }).unwrap();
    let b = simulate(&s, &p, 1.0, &SimConfig { reps: 50_000, seed: 1 }).unwrap();
    let c = simulate(&s, &p, 1.0, &SimConfig { reps: 50_000, seed: 2 }).unwrap();
    assert_eq!(a.success_rate.to_bits(), b.success_rate.to_bits());
    assert_eq!(a.expected_work.to_bits(), b.expected_work.to_bits());
    assert_ne!(a.success_rate, c.success_rate);
}

#[test]
fn hopeless_doing_never_succeeds() {
    let p = ModelParams::new(1e-12, 0.75, 1.0, 0.5, 5.0, 2.0).unwrap();
    let s = PolicySchedule::from_periods(&p, 0.0, 0.0, 2.0);
    let mc = simulate(&s, &p, 1.0, &SimConfig { reps: 100_000, seed: 5 }).unwrap();
    assert_eq!(mc.success_rate, 0.0);
}

#[test]
fn backloading_on_random_schedules() {
    let mut r = rng(55);
    for _ in 0..100 {
        let t = r.random_range(0.5..8.0);
        let p = ModelParams::new(r.random_range(0.05..0.95), r.random_range(0.2..3.0), r.random_range(0.2..3.0), 0.5, 5.0, t).unwrap();
        let nu = p.p_bar * p.lambda * r.random_range(1.0..5.0);
        let (a, b) = (r.random_range(0.0..t), r.random_range(0.0..t));
        let s = PolicySchedule::from_periods(&p, a.min(b), (a - b).abs(), t - a.max(b));
        let before = route_probabilities(&s, &p, nu).unwrap().p_total;
        let after = route_probabilities(&backload(&s, &p), &p, nu).unwrap().p_total;
        assert!(after >= before - 1e-12, "{s:?} nu = {nu}");
    }
}

#[test]
fn horizon_sweep_shapes() {
    let (p, m) = base_set(1.0);
    let grid: Vec<f64> = (0..=28).map(|i| 1.0 + 0.25 * i as f64).collect();
    let rows = sweep(&p, &m, SweepVariable::Horizon, &grid).unwrap();
    let pts: Vec<_> = rows.iter().map(|r| r.result.clone().unwrap()).collect();
    for w in pts.windows(2) {
        assert!(w[1].schedule.tau1 >= w[0].schedule.tau1 - 1e-6);
        assert!(w[1].schedule.tau2 >= w[0].schedule.tau2 - 1e-6);
        assert!(w[1].outcome.p_total >= w[0].outcome.p_total - 1e-9);
    }
    for x in &pts {
        assert!(x.outcome.p_total <= x.p_total_backloaded + 1e-12);
    }
    let long = solve(&p.with_horizon(30.0), &m).unwrap();
    assert!(route_probabilities(&long, &p.with_horizon(30.0), 1.0).unwrap().p_total >= 0.99);
}

#[test]
fn sweep_keeps_failures_in_their_rows() {
    let (p, _) = base_set(1.0);
    let risky = dblab_core::ProgressModel::RiskyArm { p_bar_nu: 0.9, nu: 1.0, b_nu: 6.0, c_nu: 0.1 };
    let rows = sweep(&p, &risky, SweepVariable::Horizon, &[1.0, 2.0]).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.result.is_err()));
    assert!(sweep(&p, &risky, SweepVariable::Horizon, &[]).is_err());
}

#[test]
fn trajectories_reconcile_with_routes() {
    let (p, _) = base_set(4.0);
    let s = PolicySchedule::from_periods(&p, 0.6, 2.0, 1.4);
    let grid: Vec<f64> = (0..=400).map(|i| i as f64 * 0.01).collect();
    let tr = trajectory_probabilities(&s, &p, &grid).unwrap();
    for w in tr.windows(2) {
        assert!(w[1].p_progress >= w[0].p_progress - 1e-15);
        assert!(w[1].p_solution >= w[0].p_solution - 1e-15);
        assert!(w[1].p_neither <= w[0].p_neither + 1e-15);
    }
    let o = route_probabilities(&s, &p, 1.0).unwrap();
    let end = tr.last().unwrap();
    assert!((end.p_solution - o.p_initial_doing - o.p_hail_mary).abs() <= 1e-10);
    // Converting progress within the remaining time is what separates the two.
    let reach = 0.75 * (-0.75f64 * 0.6).exp() + 0.25;
    let converted = o.p_think_route / reach;
    let progressed = end.p_progress / reach;
    assert!(converted < progressed);
    assert!((end.p_progress + end.p_solution + end.p_neither - 1.0).abs() <= 1e-12);
    assert!(trajectory_probabilities(&s, &p, &[4.5]).is_err());
}
