//! Scenario orchestration: plant + observer + controller in lockstep, trace
//! capture, and CSV/plot-stub emission.
//!
//! A run is single-threaded and deterministic for a given configuration;
//! independent runs share no mutable state.

use std::fmt::Write as _;
use std::path::Path;

use crate::analysis::{h1_norm, phi_norms};
use crate::config::{Mode, ScenarioConfig};
use crate::controller::control_law;
use crate::equilibrium::{steady_state_profile, EquilibriumProfile};
use crate::error::{Error, Result};
use crate::kernel::{solve_observer_kernel, KernelKind, KernelTable};
use crate::model::{linearize, to_error_coords};
use crate::observer::{observer_step, ObserverState};
use crate::phi::PhiGain;
use crate::simulator::{measure, plant_step, PlantState};

/// One trace record. The CSV columns are a subset; the extras support the
/// verification suites.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub l: f64,
    pub c_c: f64,
    pub y1: f64,
    pub y2: f64,
    pub u: f64,
    pub q_s: f64,
    pub h1_u: f64,
    pub h1_uhat: f64,
    pub h1_tilde: f64,
    pub x_norm: f64,
    pub x_hat_norm: f64,
    pub x_tilde_norm: f64,
    /// sup over the grid of |u_hat - u| (observer error, error coordinates).
    pub sup_tilde: f64,
    /// Theorem-2 composite norm Phi (squared norms).
    pub phi_full: f64,
    pub clamped: bool,
}

/// Concentration profiles at one instant, in physical coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    pub l: f64,
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    pub c_hat: Vec<f64>,
    pub c_eq: Vec<f64>,
}

/// Result of a scenario run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    pub snapshots: Vec<Snapshot>,
    /// Setup notes, speed-bound violations, clamp events.
    pub log: Vec<String>,
    pub final_plant: PlantState<f64>,
    pub final_obs: ObserverState<f64>,
    /// Lemma-style front-speed bound min{g/(3 gamma2), D/(8 l_bar),
    /// (g + lambda)/(2 gamma1)} (m/s); violations are logged, never fatal.
    pub speed_bound: f64,
    pub speed_violations: usize,
}

/// Front-speed bound for the given configuration (m/s).
pub fn speed_bound(cfg: &ScenarioConfig) -> f64 {
    let g = cfg.params.degradation;
    let d = cfg.params.diffusivity;
    let a = g / (3.0 * cfg.gains.gamma2);
    let b = d / (8.0 * cfg.l_bar);
    let c = (g + cfg.gains.lambda) / (2.0 * cfg.gains.gamma1);
    a.min(b).min(c)
}

/// Standard initial plant state: constant `c0_factor * c_inf` at length `l0`.
pub fn initial_plant(cfg: &ScenarioConfig) -> PlantState<f64> {
    let c0 = cfg.c0_factor * cfg.params.cone_equilibrium;
    PlantState::from_profile(|_| c0, cfg.l0, cfg.grid_n)
}

/// Standard initial observer state: physical estimate identically zero, i.e.
/// `u_hat = -c_eq`, `x_hat = [-c_inf, l0 - l_s]` (the length is measured),
/// with the Dirichlet end made consistent.
pub fn initial_observer(cfg: &ScenarioConfig, eq: &EquilibriumProfile<f64>) -> ObserverState<f64> {
    let n = cfg.grid_n;
    let mut u_hat: Vec<f64> = (0..n)
        .map(|i| -eq.eval(cfg.l0 * i as f64 / (n - 1) as f64))
        .collect();
    let x_hat = [-cfg.params.cone_equilibrium, cfg.l0 - eq.setpoint];
    let model = linearize(&cfg.params, eq);
    u_hat[n - 1] = model.h_vector[0] * x_hat[0] + model.h_vector[1] * x_hat[1];
    ObserverState { u_hat, x_hat, time: 0.0 }
}

/// Runs the standard scenario for the configuration: stock initial data and
/// a freshly solved observer kernel (for observer modes).
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<SimulationTrace> {
    let table = match cfg.mode {
        Mode::PlantOnly => None,
        _ => Some(solve_observer_kernel(
            &cfg.params,
            cfg.gains.lambda,
            cfg.gains.gamma1,
            cfg.l_bar,
            cfg.kernel_grid_n,
            cfg.kernel_tol,
        )?),
    };
    run_scenario_with(cfg, table.as_ref())
}

/// Like [`run_scenario`] but with a caller-supplied kernel table (e.g. from
/// a cache). `None` disables the distributed injection.
pub fn run_scenario_with(
    cfg: &ScenarioConfig,
    table: Option<&KernelTable<f64>>,
) -> Result<SimulationTrace> {
    let eq = steady_state_profile(&cfg.params, cfg.l_s)?;
    let plant0 = initial_plant(cfg);
    let obs0 = initial_observer(cfg, &eq);
    run_scenario_from(cfg, plant0, obs0, table)
}

/// Runs the scenario loop from explicit initial states.
pub fn run_scenario_from(
    cfg: &ScenarioConfig,
    plant0: PlantState<f64>,
    obs0: ObserverState<f64>,
    table: Option<&KernelTable<f64>>,
) -> Result<SimulationTrace> {
    cfg.validate()?;
    if let Some(t) = table {
        if t.kind != KernelKind::ObserverGain {
            return Err(Error::InvalidParameter(
                "scenario needs the observer gain kernel (P), got the direct kernel".into(),
            ));
        }
    }
    let eq = steady_state_profile(&cfg.params, cfg.l_s)?;
    let model = linearize(&cfg.params, &eq);
    let phi = PhiGain::new(
        &model,
        cfg.params.degradation,
        cfg.params.advection,
        cfg.params.diffusivity,
        &cfg.gains.k_row,
    );

    let mut log = Vec::new();
    log.push(format!(
        "setup: mode {:?}, n = {}, dt = {:.3e} s, t_final = {:.3e} s",
        cfg.mode, cfg.grid_n, cfg.dt, cfg.t_final
    ));
    log.push(format!(
        "setup: dropped linearization cross term coefficient {:.6e}",
        model.dropped_cross_term
    ));
    for w in cfg.gain_warnings()? {
        log.push(format!("gain warning: {w}"));
    }
    let v_bar = speed_bound(cfg);
    log.push(format!("setup: front-speed bound v_bar = {v_bar:.6e} m/s"));

    let steps = (cfg.t_final / cfg.dt).round().max(1.0) as usize;
    let cadence_steps = (cfg.cadence / cfg.dt).round().max(1.0) as usize;
    // Up to 9 evenly spaced profile snapshots, always including both ends.
    let snap_slots = 8usize;
    let snapshot_steps: Vec<usize> =
        (0..=snap_slots).map(|k| k * steps / snap_slots).collect();

    let mut plant = plant0;
    let mut obs = obs0;
    plant.time = 0.0;
    obs.time = 0.0;

    let mut rows = Vec::new();
    let mut snapshots = Vec::new();
    let mut speed_violations = 0usize;
    let mut clamp_events = 0usize;

    for step in 0..=steps {
        let meas = measure(&plant, &eq);
        let (u_cmd, q_s, clamped) = match cfg.mode {
            Mode::ClosedLoop => {
                let v = control_law(
                    &obs,
                    plant.l,
                    &phi,
                    &model,
                    &cfg.params,
                    cfg.gains.gamma2,
                    eq.q_s_star,
                    cfg.clamp_influx,
                );
                // Keep the observer consistent with the applied influx.
                (eq.q_s_star - v.q_s, v.q_s, v.clamped)
            }
            _ => (0.0, eq.q_s_star, false),
        };
        if clamped {
            clamp_events += 1;
            if clamp_events <= 10 {
                log.push(format!("clamp: q_s saturated at 0 at t = {:.6e} s", plant.time));
            }
        }

        if step % cadence_steps == 0 || step == steps {
            rows.push(make_row(&plant, &obs, &eq, &meas, u_cmd, q_s, clamped)?);
        }
        if snapshot_steps.contains(&step) {
            snapshots.push(make_snapshot(&plant, &obs, &eq));
        }
        if step == steps {
            break;
        }

        let next_plant = plant_step(&plant, &cfg.params, q_s, cfg.dt)?;
        let l_dot = (next_plant.l - plant.l) / cfg.dt;
        if l_dot.abs() > v_bar {
            speed_violations += 1;
            if speed_violations <= 10 {
                log.push(format!(
                    "speed bound: |l_dot| = {:.6e} exceeds v_bar = {:.6e} at t = {:.6e} s",
                    l_dot.abs(),
                    v_bar,
                    plant.time
                ));
            }
        }
        if next_plant.l > cfg.l_bar {
            return Err(Error::DomainExceeded { l: next_plant.l, l_bar: cfg.l_bar });
        }
        if !matches!(cfg.mode, Mode::PlantOnly) {
            obs = observer_step(
                &obs,
                &cfg.params,
                &model,
                &cfg.gains.l_col,
                &eq,
                table,
                &meas,
                u_cmd,
                cfg.dt,
            )?;
        } else {
            obs.time += cfg.dt;
        }
        plant = next_plant;
    }

    if speed_violations > 10 {
        log.push(format!("speed bound: {speed_violations} total violations"));
    }
    if clamp_events > 10 {
        log.push(format!("clamp: {clamp_events} total saturation events"));
    }

    Ok(SimulationTrace {
        rows,
        snapshots,
        log,
        final_plant: plant,
        final_obs: obs,
        speed_bound: v_bar,
        speed_violations,
    })
}

fn make_row(
    plant: &PlantState<f64>,
    obs: &ObserverState<f64>,
    eq: &EquilibriumProfile<f64>,
    meas: &crate::simulator::Measurements<f64>,
    u_cmd: f64,
    q_s: f64,
    clamped: bool,
) -> Result<TraceRow> {
    let (u, x) = to_error_coords(&plant.c, plant.cone_concentration(), plant.l, eq)?;
    let tilde: Vec<f64> = obs.u_hat.iter().zip(&u).map(|(a, b)| a - b).collect();
    let x_tilde = [obs.x_hat[0] - x[0], obs.x_hat[1] - x[1]];
    let (_, phi_full) = phi_norms(plant, obs, eq)?;
    Ok(TraceRow {
        t: plant.time,
        l: plant.l,
        c_c: plant.cone_concentration(),
        y1: meas.y1,
        y2: meas.y2,
        u: u_cmd,
        q_s,
        h1_u: h1_norm(&u, plant.l)?,
        h1_uhat: h1_norm(&obs.u_hat, plant.l)?,
        h1_tilde: h1_norm(&tilde, plant.l)?,
        x_norm: (x[0] * x[0] + x[1] * x[1]).sqrt(),
        x_hat_norm: (obs.x_hat[0] * obs.x_hat[0] + obs.x_hat[1] * obs.x_hat[1]).sqrt(),
        x_tilde_norm: (x_tilde[0] * x_tilde[0] + x_tilde[1] * x_tilde[1]).sqrt(),
        sup_tilde: tilde.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        phi_full,
        clamped,
    })
}

fn make_snapshot(
    plant: &PlantState<f64>,
    obs: &ObserverState<f64>,
    eq: &EquilibriumProfile<f64>,
) -> Snapshot {
    let n = plant.grid_n();
    let l = plant.l;
    let x: Vec<f64> = (0..n).map(|i| l * i as f64 / (n - 1) as f64).collect();
    let c_eq: Vec<f64> = x.iter().map(|&xi| eq.eval(xi)).collect();
    let c_hat: Vec<f64> = obs.u_hat.iter().zip(&c_eq).map(|(u, e)| u + e).collect();
    Snapshot { time: plant.time, l, x, c: plant.c.clone(), c_hat, c_eq }
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Renders the trace CSV (fixed column schema, deterministic formatting).
pub fn trace_csv(trace: &SimulationTrace) -> String {
    let mut out = String::new();
    out.push_str("t,l,c_c,y1,y2,U,q_s,h1_u,h1_uhat,h1_tilde,|X|,|X̂|,|X̃|\n");
    for r in &trace.rows {
        let cols = [
            r.t, r.l, r.c_c, r.y1, r.y2, r.u, r.q_s, r.h1_u, r.h1_uhat, r.h1_tilde, r.x_norm,
            r.x_hat_norm, r.x_tilde_norm,
        ];
        let line: Vec<String> = cols.iter().map(|&v| fmt(v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

/// Renders one snapshot CSV (columns x, c, c_hat, c_eq).
pub fn snapshot_csv(s: &Snapshot) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# t = {}", fmt(s.time));
    out.push_str("x,c,c_hat,c_eq\n");
    for i in 0..s.x.len() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt(s.x[i]),
            fmt(s.c[i]),
            fmt(s.c_hat[i]),
            fmt(s.c_eq[i])
        );
    }
    out
}

const PLOT_STUB: &str = r##"#!/usr/bin/env python3
"""Plots trace.csv and the profile snapshots emitted next to this script."""
import csv
import glob
import os.path as p

import matplotlib.pyplot as plt

here = p.dirname(p.abspath(__file__))
with open(p.join(here, "trace.csv")) as f:
    rows = list(csv.DictReader(f))
t = [float(r["t"]) for r in rows]

fig, axes = plt.subplots(2, 2, figsize=(10, 7))
axes[0][0].plot(t, [1e6 * float(r["l"]) for r in rows])
axes[0][0].set(xlabel="t (s)", ylabel="l (um)", title="axon length")
axes[0][1].plot(t, [float(r["c_c"]) for r in rows])
axes[0][1].set(xlabel="t (s)", ylabel="c_c (mol/m^3)", title="cone concentration")
axes[1][0].semilogy(t, [max(float(r["h1_tilde"]), 1e-300) for r in rows])
axes[1][0].set(xlabel="t (s)", ylabel="||u_tilde||_H1", title="observer error")
axes[1][1].plot(t, [float(r["q_s"]) for r in rows])
axes[1][1].set(xlabel="t (s)", ylabel="q_s (mol/m^4)", title="soma influx")
fig.tight_layout()
fig.savefig(p.join(here, "trace.png"), dpi=150)

fig2, ax = plt.subplots(figsize=(7, 5))
for path in sorted(glob.glob(p.join(here, "profile_*.csv"))):
    with open(path) as f:
        header = f.readline()  # "# t = ..."
        data = list(csv.DictReader(f))
    label = header.strip().lstrip("# ")
    ax.plot([1e6 * float(r["x"]) for r in data], [float(r["c"]) for r in data], label=label)
ax.set(xlabel="x (um)", ylabel="c (mol/m^3)", title="concentration profiles")
ax.legend(fontsize=7)
fig2.tight_layout()
fig2.savefig(p.join(here, "profiles.png"), dpi=150)
print("wrote trace.png and profiles.png")
"##;

/// Writes trace.csv, profile_XXX.csv, run.log, and plot.py into `dir`.
pub fn write_outputs(trace: &SimulationTrace, dir: &Path) -> Result<()> {
    let io_err = |e: std::io::Error| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("writing outputs in {}: {e}", dir.display()),
        ))
    };
    std::fs::create_dir_all(dir).map_err(io_err)?;
    std::fs::write(dir.join("trace.csv"), trace_csv(trace)).map_err(io_err)?;
    for (i, s) in trace.snapshots.iter().enumerate() {
        std::fs::write(dir.join(format!("profile_{i:03}.csv")), snapshot_csv(s)).map_err(io_err)?;
    }
    let mut logtext = trace.log.join("\n");
    logtext.push('\n');
    std::fs::write(dir.join("run.log"), logtext).map_err(io_err)?;
    std::fs::write(dir.join("plot.py"), PLOT_STUB).map_err(io_err)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short_cfg(mode: Mode) -> ScenarioConfig {
        let mut cfg = ScenarioConfig::reference(mode);
        cfg.t_final = 1.0;
        cfg.cadence = 0.1;
        cfg
    }

    #[test]
    fn speed_bound_is_the_minimum_of_the_three_terms() {
        let cfg = ScenarioConfig::reference(Mode::ClosedLoop);
        let g = cfg.params.degradation;
        let by_hand = (g / (3.0 * cfg.gains.gamma2))
            .min(cfg.params.diffusivity / (8.0 * cfg.l_bar))
            .min((g + cfg.gains.lambda) / (2.0 * cfg.gains.gamma1));
        assert_eq!(speed_bound(&cfg), by_hand);
        assert!(speed_bound(&cfg) > 0.0);
    }

    #[test]
    fn equilibrium_initial_data_stays_at_equilibrium() {
        let cfg = short_cfg(Mode::ClosedLoop);
        let eq = steady_state_profile(&cfg.params, cfg.l_s).unwrap();
        let plant0 = PlantState::from_profile(|x| eq.eval(x), cfg.l_s, cfg.grid_n);
        let obs0 = ObserverState::zeroed(cfg.grid_n);
        let trace = run_scenario_from(&cfg, plant0, obs0, None).unwrap();
        let last = trace.rows.last().unwrap();
        assert!(
            (last.l - cfg.l_s).abs() < 1e-3 * cfg.l_s,
            "length drifted to {}",
            last.l
        );
        for r in &trace.rows {
            assert!(
                r.u.abs() < 1e-2 * eq.q_s_star.abs(),
                "control left zero: U = {} at t = {}",
                r.u,
                r.t
            );
        }
    }

    #[test]
    fn plant_only_mode_grows_toward_setpoint() {
        let mut cfg = short_cfg(Mode::PlantOnly);
        cfg.t_final = 5.0;
        let trace = run_scenario_with(&cfg, None).unwrap();
        // c0 = 2 c_inf > c_inf, so the axon elongates from the start.
        assert!(trace.final_plant.l > cfg.l0);
        assert!(trace.final_obs.u_hat.iter().all(|v| *v != f64::NAN));
    }

    #[test]
    fn trace_is_deterministic_and_well_formed() {
        let cfg = short_cfg(Mode::OpenLoopObserver);
        let t1 = run_scenario(&cfg).unwrap();
        let t2 = run_scenario(&cfg).unwrap();
        assert_eq!(trace_csv(&t1), trace_csv(&t2));
        let csv = trace_csv(&t1);
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,l,c_c,y1,y2,U,q_s,h1_u,h1_uhat,h1_tilde,|X|,|X̂|,|X̃|"
        );
        // 1 s at 0.1 s cadence: 11 rows.
        assert_eq!(t1.rows.len(), 11);
        assert_eq!(t1.snapshots.len(), 9);
        for line in lines {
            assert_eq!(line.split(',').count(), 13);
        }
        // Dirichlet consistency: last sample is c_c by construction.
        let fp = &t1.final_plant;
        assert_eq!(fp.c[fp.c.len() - 1], fp.cone_concentration());
    }

    #[test]
    fn outputs_land_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = short_cfg(Mode::PlantOnly);
        let trace = run_scenario_with(&cfg, None).unwrap();
        write_outputs(&trace, dir.path()).unwrap();
        assert!(dir.path().join("trace.csv").exists());
        assert!(dir.path().join("profile_000.csv").exists());
        assert!(dir.path().join("plot.py").exists());
        let snap = std::fs::read_to_string(dir.path().join("profile_000.csv")).unwrap();
        assert!(snap.lines().nth(1).unwrap() == "x,c,c_hat,c_eq");
    }

    #[test]
    fn rejects_wrong_kernel_kind() {
        let cfg = short_cfg(Mode::OpenLoopObserver);
        let q = crate::kernel::solve_direct_kernel(
            &cfg.params,
            cfg.gains.lambda,
            cfg.gains.gamma1,
            cfg.l_bar,
            33,
            1e-8,
        )
        .unwrap();
        assert!(run_scenario_with(&cfg, Some(&q)).is_err());
    }
}
