use std::fs;
use std::path::{Path, PathBuf};

use dblab_core::dp::{coarse_intervals, dp_no_feedback, dp_reduced, dp_two_stage, thinking_runs, Action, DPSolution, Interval};
use dblab_core::outcomes::{conversion_rate, trajectory_probabilities, SweepRow};
use dblab_core::solver::{belief_thresholds, solve_with, Thresholds};
use dblab_core::{route_probabilities, simulate as run_simulation, sweep as run_sweep, validate_model, PolicySchedule};
use serde::Serialize;

use crate::config::{parse_range, GridSpec, OracleKind, RunConfig};
use crate::exit::{Failure, Kind};
use crate::format::{num, round12};
use crate::Common;

pub const SWEEP_HEADER: [&str; 11] =
    ["grid_value", "tau1", "tau2", "tau3", "structure", "p_total", "p_do_initial", "p_think", "p_hailmary", "p_total_backloaded", "expected_work"];
pub const TRAJECTORY_HEADER: [&str; 4] = ["t", "p_progress", "p_solution", "p_neither"];
pub const SIMULATE_HEADER: [&str; 4] = ["estimate", "std_err", "reps", "seed"];

/// Points on the trajectory time grid.
const TRAJECTORY_STEPS: usize = 200;

fn load(c: &Common) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(dt) = c.dt {
        cfg.oracle.dt = dt;
    }
    if let Some(r) = c.reps {
        cfg.sim.reps = r;
    }
    if let Some(s) = c.seed {
        cfg.sim.seed = s;
    }
    if let Some(g) = &c.grid {
        parse_range(g)?;
        cfg.sweep.grid = GridSpec::Range(g.clone());
    }
    if let Some(v) = c.variable {
        cfg.sweep.variable = v;
    }
    cfg.agent.check()?;
    cfg.model.check()?;
    Ok(cfg)
}

fn out_path(dir: &Path, name: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::output(format!("cannot create output directory {}: {e}", dir.display())))?;
    Ok(dir.join(name))
}

fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, Failure> {
    let path = out_path(dir, name)?;
    fs::write(&path, text).map_err(|e| Failure::output(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let bad = |e: csv::Error| Failure::output(format!("cannot encode {name}: {e}"));
    w.write_record(header).map_err(bad)?;
    for r in rows {
        w.write_record(r).map_err(bad)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::output(format!("cannot encode {name}: {e}")))?;
    write_text(dir, name, &String::from_utf8(bytes).expect("csv is utf-8"))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    s
}

fn schedule_for(cfg: &RunConfig) -> Result<PolicySchedule, Failure> {
    match cfg.schedule {
        Some(p) => {
            let s = PolicySchedule::from_periods(&cfg.agent, p.tau1, p.tau2, p.tau3);
            if (s.horizon() - cfg.agent.t).abs() > 1e-9 * cfg.agent.t.max(1.0) {
                return Err(Failure::validation(format!("schedule periods sum to {} but T is {}", s.horizon(), cfg.agent.t)));
            }
            Ok(s)
        }
        None => Ok(solve_with(&cfg.agent, &cfg.model, &cfg.solver.options())?),
    }
}

#[derive(Serialize)]
struct ThresholdOut {
    p_hat: Option<f64>,
    p_tilde: Option<f64>,
    p_check: Option<f64>,
    #[serde(rename = "T1")]
    t1: f64,
}

impl From<Thresholds> for ThresholdOut {
    fn from(t: Thresholds) -> Self {
        ThresholdOut { p_hat: t.p_hat.map(round12), p_tilde: t.p_tilde.map(round12), p_check: t.p_check.map(round12), t1: round12(t.t1) }
    }
}

#[derive(Serialize)]
struct ScheduleOut {
    tau1: f64,
    tau2: f64,
    tau3: f64,
    structure: String,
    q_at_switch: f64,
    terminal_belief: f64,
    no_shirk: bool,
    thresholds: ThresholdOut,
}

pub fn solve(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let s = solve_with(&cfg.agent, &cfg.model, &cfg.solver.options())?;
    let th = belief_thresholds(&cfg.agent, &cfg.model)?;
    let out = ScheduleOut {
        tau1: round12(s.tau1),
        tau2: round12(s.tau2),
        tau3: round12(s.tau3),
        structure: s.structure.to_string(),
        q_at_switch: round12(s.q_at_switch),
        terminal_belief: round12(s.terminal_belief),
        no_shirk: s.no_shirk(&cfg.agent),
        thresholds: th.into(),
    };
    let path = write_text(&c.out, "schedule.json", &to_json(&out))?;
    println!("structure {}  T {}", s.structure, num(cfg.agent.t));
    println!("  initial doing  {}", num(s.tau1));
    println!("  thinking       {}", num(s.tau2));
    println!("  final doing    {}", num(s.tau3));
    println!("  belief at final doing {}, terminal belief {}", num(s.q_at_switch), num(s.terminal_belief));
    println!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct IntervalOut {
    action: Action,
    start: f64,
    end: f64,
    uncertainty: f64,
}

fn intervals_out(v: &[Interval]) -> Vec<IntervalOut> {
    v.iter().map(|i| IntervalOut { action: i.action, start: round12(i.start), end: round12(i.end), uncertainty: round12(i.uncertainty) }).collect()
}

#[derive(Serialize)]
struct VerifyOut {
    oracle: OracleKind,
    dt: f64,
    tolerance: f64,
    /// Absent when the solver is not applicable to this configuration.
    solver_switches: Option<Vec<f64>>,
    oracle_switches: Vec<f64>,
    deltas: Vec<f64>,
    max_delta: Option<f64>,
    pass: bool,
    note: Option<String>,
    intervals: Vec<IntervalOut>,
    coarse_intervals: Vec<IntervalOut>,
    thinking_runs: usize,
    think_reverts_to_do: bool,
}

/// Pairs switch times, ignoring any within `tol` of either end of the horizon.
fn compare_switches(solver: &[f64], oracle: &[f64], horizon: f64, tol: f64) -> (Vec<f64>, bool) {
    let inner = |v: &[f64]| v.iter().copied().filter(|&x| x > tol && x < horizon - tol).collect::<Vec<_>>();
    let (a, b) = (inner(solver), inner(oracle));
    let deltas: Vec<f64> = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).collect();
    let ok = a.len() == b.len() && deltas.iter().all(|&d| d <= tol);
    (deltas, ok)
}

fn reverts(dp: &DPSolution) -> bool {
    dp.switch_times.windows(2).any(|w| w[0].action == Action::Think && w[1].action == Action::Do)
}

pub fn verify(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let t = cfg.agent.t;
    let dt = cfg.oracle.dt;
    let grid = cfg.oracle.grid(t)?;
    let tol = 5.0 * dt;
    let mut note = None;
    let (dp, solver) = match cfg.oracle.kind {
        OracleKind::Reduced => {
            let dp = dp_reduced(&cfg.agent, &cfg.model, &grid)?;
            (dp, Some(solve_with(&cfg.agent, &cfg.model, &cfg.solver.options())?))
        }
        OracleKind::TwoStage => {
            let dp = dp_two_stage(&cfg.agent, &cfg.model, &grid)?;
            match validate_model(&cfg.agent, &cfg.model).into_result() {
                Ok(()) => (dp, Some(solve_with(&cfg.agent, &cfg.model, &cfg.solver.options())?)),
                Err(e) => {
                    note = Some(format!("oracle only, solver not applicable: {e}"));
                    (dp, None)
                }
            }
        }
        OracleKind::NoFeedback => {
            note = Some("oracle only: the no-feedback variant has no three-period solver".into());
            (dp_no_feedback(&cfg.no_feedback()?, t, &grid)?, None)
        }
    };
    let oracle_switches = dp.switch_points();
    let (deltas, agree) = match &solver {
        Some(s) => compare_switches(&s.switch_times(), &oracle_switches, t, tol),
        None => (Vec::new(), true),
    };
    let coarse = coarse_intervals(&dp, cfg.oracle.window);
    let back = reverts(&dp);
    // Without feedback, thinking can never hand back to doing.
    let pass = agree && !(cfg.oracle.kind == OracleKind::NoFeedback && back);
    let out = VerifyOut {
        oracle: cfg.oracle.kind,
        dt,
        tolerance: tol,
        solver_switches: solver.map(|s| s.switch_times().into_iter().map(round12).collect()),
        oracle_switches: oracle_switches.iter().copied().map(round12).collect(),
        max_delta: deltas.iter().copied().reduce(f64::max).map(round12),
        deltas: deltas.into_iter().map(round12).collect(),
        pass,
        note,
        intervals: intervals_out(&dp.switch_times),
        thinking_runs: thinking_runs(&coarse),
        coarse_intervals: intervals_out(&coarse),
        think_reverts_to_do: back,
    };
    let path = write_text(&c.out, "verify.json", &to_json(&out))?;
    let shape: Vec<String> = coarse.iter().map(|i| format!("{:?}[{}, {}]", i.action, num(round4(i.start)), num(round4(i.end)))).collect();
    println!("{} oracle at dt {}: {}", kind_name(cfg.oracle.kind), num(dt), if pass { "PASS" } else { "FAIL" });
    if let Some(m) = out.max_delta {
        println!("  max switch delta {} (tolerance {})", num(m), num(tol));
    }
    if let Some(n) = &out.note {
        println!("  {n}");
    }
    println!("  {} thinking run(s): {}", out.thinking_runs, shape.join(" "));
    println!("wrote {}", path.display());
    if pass {
        Ok(())
    } else {
        Err(Failure { kind: Kind::Solver, message: format!("solver and oracle disagree beyond {} (see {})", num(tol), path.display()) })
    }
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

fn kind_name(k: OracleKind) -> &'static str {
    match k {
        OracleKind::Reduced => "reduced",
        OracleKind::TwoStage => "two-stage",
        OracleKind::NoFeedback => "no-feedback",
    }
}

fn sweep_record(row: &SweepRow) -> Vec<String> {
    let g = num(row.grid_value);
    match &row.result {
        Ok(p) => {
            let (s, o) = (&p.schedule, &p.outcome);
            vec![
                g,
                num(s.tau1),
                num(s.tau2),
                num(s.tau3),
                s.structure.to_string(),
                num(o.p_total),
                num(o.p_initial_doing),
                num(o.p_think_route),
                num(o.p_hail_mary),
                num(p.p_total_backloaded),
                num(o.expected_work),
            ]
        }
        Err(_) => {
            let mut r = vec![String::new(); SWEEP_HEADER.len()];
            r[0] = g;
            r[4] = "ERROR".into();
            r
        }
    }
}

pub fn sweep(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let grid = cfg.sweep.grid.points()?;
    let rows = run_sweep(&cfg.agent, &cfg.model, cfg.sweep.variable, &grid)?;
    let mut failed = 0;
    for r in &rows {
        if let Err(e) = &r.result {
            eprintln!("dblab: {} = {}: {e}", cfg.sweep.variable, num(r.grid_value));
            failed += 1;
        }
    }
    let records: Vec<Vec<String>> = rows.iter().map(sweep_record).collect();
    let path = write_csv(&c.out, "sweep.csv", &SWEEP_HEADER, &records)?;
    println!("{} points over {}, {} failed; wrote {}", rows.len(), cfg.sweep.variable, failed, path.display());
    Ok(())
}

pub fn simulate(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let schedule = schedule_for(&cfg)?;
    let nu = conversion_rate(&cfg.model)?;
    let est = run_simulation(&schedule, &cfg.agent, nu, &cfg.sim.config())?;
    let exact = route_probabilities(&schedule, &cfg.agent, nu)?;
    let (reps, seed) = (est.reps.to_string(), est.seed.to_string());
    let rows = vec![
        vec![num(est.success_rate), num(est.success_se), reps.clone(), seed.clone()],
        vec![num(est.expected_work), num(est.work_se), reps, seed],
    ];
    let path = write_csv(&c.out, "simulate.csv", &SIMULATE_HEADER, &rows)?;
    println!("success rate {} +- {} (closed form {})", num(est.success_rate), num(est.success_se), num(exact.p_total));
    println!("expected work {} +- {} (closed form {})", num(est.expected_work), num(est.work_se), num(exact.expected_work));
    println!("wrote {}", path.display());
    Ok(())
}

pub fn trajectory(c: &Common) -> Result<(), Failure> {
    let cfg = load(c)?;
    let schedule = schedule_for(&cfg)?;
    let t = cfg.agent.t;
    let grid: Vec<f64> = (0..=TRAJECTORY_STEPS).map(|i| t * i as f64 / TRAJECTORY_STEPS as f64).collect();
    let points = trajectory_probabilities(&schedule, &cfg.agent, &grid)?;
    let rows: Vec<Vec<String>> = points.iter().map(|p| vec![num(p.t), num(p.p_progress), num(p.p_solution), num(p.p_neither)]).collect();
    let path = write_csv(&c.out, "trajectory.csv", &TRAJECTORY_HEADER, &rows)?;
    println!("{} points on [0, {}]; wrote {}", rows.len(), num(t), path.display());
    Ok(())
}

pub fn show_config(c: &Common) -> Result<(), Failure> {
    println!("{}", load(c)?.emit());
    Ok(())
}
