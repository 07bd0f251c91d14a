//! Scenario-level commands shared by the CLI and the bindings.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::averaging::{closeness_runs, report_from_runs, ClosenessReport};
use crate::error::{EscError, Result};
use crate::plants::Plant;
use crate::scenario::Scenario;
use crate::sim::{simulate, Trajectory};

/// Pitch margin, in rad from the singular value, below which a run is flagged.
pub const PITCH_WARNING_MARGIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub application: String,
    /// Mean of J over the last 10% of samples.
    pub final_window_j: f64,
    pub initial_j: f64,
    pub max_abs_u_hat: f64,
    pub wall_seconds: f64,
    pub steps: usize,
    pub dt_s: f64,
    pub t_final_s: f64,
    pub warnings: Vec<String>,
}

impl std::fmt::Display for RunReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenario        {} ({})", self.scenario, self.application)?;
        writeln!(f, "steps           {} at dt = {:.6e} s over {} s", self.steps, self.dt_s, self.t_final_s)?;
        writeln!(f, "J(0)            {:.6}", self.initial_j)?;
        writeln!(f, "final-window J  {:.6e}", self.final_window_j)?;
        writeln!(f, "max |u_hat|     {:.6e}", self.max_abs_u_hat)?;
        write!(f, "wall time       {:.3} s", self.wall_seconds)?;
        for w in &self.warnings {
            write!(f, "\nwarning: {w}")?;
        }
        Ok(())
    }
}

/// Run-time overrides applied on top of a loaded scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunOverrides {
    pub dt_s: Option<f64>,
    pub t_final_s: Option<f64>,
    pub decimate: Option<usize>,
}

impl RunOverrides {
    pub fn apply(&self, scenario: &Scenario) -> Result<Scenario> {
        let mut s = scenario.clone();
        if let Some(dt) = self.dt_s {
            s.dt_s = Some(dt);
        }
        if let Some(t) = self.t_final_s {
            s.t_final_s = t;
        }
        if let Some(d) = self.decimate {
            s.decimate = d;
        }
        s.validate()?;
        Ok(s)
    }
}

fn margin_warnings(plant: &dyn Plant, traj: &Trajectory) -> Vec<String> {
    if plant.name() != "quadcopter" {
        return Vec::new();
    }
    let worst = traj
        .states
        .iter()
        .map(|s| s.kin.to_vec()[1].abs())
        .fold(0.0, f64::max);
    let margin = std::f64::consts::FRAC_PI_2 - worst;
    if margin < PITCH_WARNING_MARGIN {
        vec![format!("pitch came within {margin:.4} rad of the Euler-angle singularity")]
    } else {
        Vec::new()
    }
}

/// Simulates a validated scenario and summarizes the run.
pub fn run_scenario(scenario: &Scenario) -> Result<(Trajectory, RunReport)> {
    let plant = scenario.build_plant()?;
    let params = scenario.params()?;
    let x0 = scenario.initial_state()?;
    let opts = scenario.sim_options();
    let dt = opts.resolve_dt(params.omega);

    let start = Instant::now();
    let traj = simulate(plant.as_ref(), &params, &x0, scenario.t_final_s, &opts)?;
    let wall_seconds = start.elapsed().as_secs_f64();

    let mut warnings = params.gain_ordering_warnings();
    warnings.extend(margin_warnings(plant.as_ref(), &traj));
    let report = RunReport {
        scenario: scenario.name.clone(),
        application: scenario.plant.application().into(),
        final_window_j: traj.final_window_objective(),
        initial_j: traj.objective.first().copied().unwrap_or(f64::NAN),
        max_abs_u_hat: traj.states.iter().map(|s| s.u_hat.abs()).fold(0.0, f64::max),
        wall_seconds,
        steps: ((scenario.t_final_s / dt) - 1e-9).ceil().max(1.0) as usize,
        dt_s: dt,
        t_final_s: scenario.t_final_s,
        warnings,
    };
    Ok((traj, report))
}

/// Header row of the trajectory file.
pub fn trajectory_header(plant: &dyn Plant, traj: &Trajectory) -> Vec<String> {
    let mut header = vec!["time_s".to_string()];
    header.extend(plant.velocity_labels());
    header.extend(plant.kin_labels());
    header.push("u_hat".into());
    if traj.states.first().is_some_and(|s| s.h.is_some()) {
        header.push("h".into());
    }
    header.push("J".into());
    header.extend((1..=plant.dof()).map(|i| format!("u_{i}")));
    header
}

pub fn write_trajectory(path: &Path, plant: &dyn Plant, traj: &Trajectory) -> Result<()> {
    let csv_err = |e: csv::Error| EscError::io(path, std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(trajectory_header(plant, traj)).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::new();
    for i in 0..traj.len() {
        let s = &traj.states[i];
        row.clear();
        row.push(traj.times[i].to_string());
        row.extend(s.qdot.iter().map(f64::to_string));
        row.extend(s.kin.to_vec().iter().map(f64::to_string));
        row.push(s.u_hat.to_string());
        if let Some(h) = s.h {
            row.push(h.to_string());
        }
        row.push(traj.objective[i].to_string());
        row.extend(traj.inputs[i].iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| EscError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("reports serialize to JSON");
    std::fs::write(path, text + "\n").map_err(|e| EscError::io(path, e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| EscError::io(dir, e))
}

/// Files written by one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutputs {
    pub trajectory: PathBuf,
    pub summary: PathBuf,
}

/// Runs the scenario, writing `<name>.csv` and `<name>.summary.json` into `out_dir`.
pub fn cmd_run(scenario: &Scenario, out_dir: &Path) -> Result<(RunReport, RunOutputs)> {
    ensure_dir(out_dir)?;
    let (traj, report) = run_scenario(scenario)?;
    let plant = scenario.build_plant()?;
    let outputs = RunOutputs {
        trajectory: out_dir.join(format!("{}.csv", scenario.name)),
        summary: out_dir.join(format!("{}.summary.json", scenario.name)),
    };
    write_trajectory(&outputs.trajectory, plant.as_ref(), &traj)?;
    write_json(&outputs.summary, &report)?;
    Ok((report, outputs))
}

/// `{ω, 2ω, 4ω}` for the scenario's frequency.
pub fn default_omegas(scenario: &Scenario) -> Vec<f64> {
    let w = scenario.controller.omega_rad_per_s;
    vec![w, 2.0 * w, 4.0 * w]
}

/// Paired full and averaged runs at each frequency.
///
/// Writes one full and one averaged trajectory per frequency plus
/// `<name>.closeness.json` when `out_dir` is given.
pub fn cmd_compare_averaged(scenario: &Scenario, omegas: &[f64], out_dir: Option<&Path>) -> Result<ClosenessReport> {
    let plant = scenario.build_plant()?;
    let params = scenario.params()?;
    let x0 = scenario.initial_state()?;
    let horizon = scenario.compare_horizon();
    let runs = closeness_runs(plant.as_ref(), &params, &x0, horizon, omegas)?;
    let report = report_from_runs(&runs, horizon);
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        for run in &runs {
            let stem = format!("{}.omega{}", scenario.name, run.omega);
            write_trajectory(&dir.join(format!("{stem}.full.csv")), plant.as_ref(), &run.full)?;
            write_trajectory(&dir.join(format!("{stem}.averaged.csv")), plant.as_ref(), &run.averaged)?;
        }
        write_json(&dir.join(format!("{}.closeness.json", scenario.name)), &report)?;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Omega,
    K,
    /// Scalar multiple of the oscillatory gains.
    AScale,
    /// Scalar multiple of the estimate gains.
    CScale,
}

impl FromStr for SweepParam {
    type Err = EscError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omega" => Ok(SweepParam::Omega),
            "k" => Ok(SweepParam::K),
            "a-scale" | "a_scale" => Ok(SweepParam::AScale),
            "c-scale" | "c_scale" => Ok(SweepParam::CScale),
            other => Err(EscError::Usage(format!(
                "unknown sweep parameter `{other}` (expected omega, k, a-scale or c-scale)"
            ))),
        }
    }
}

impl SweepParam {
    pub fn apply(self, scenario: &Scenario, value: f64) -> Result<Scenario> {
        let mut s = scenario.clone();
        let c = &mut s.controller;
        match self {
            SweepParam::Omega => c.omega_rad_per_s = value,
            SweepParam::K => c.k = value,
            SweepParam::AScale => c.a.iter_mut().for_each(|a| *a *= value),
            SweepParam::CScale => c.c.iter_mut().for_each(|g| *g *= value),
        }
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: Option<RunReport>,
    pub error: Option<String>,
}

/// One run per value; a failing row is recorded and the others still run.
pub fn cmd_sweep(scenario: &Scenario, param: SweepParam, values: &[f64], out_dir: Option<&Path>) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(EscError::Usage("sweep needs at least one value".into()));
    }
    let rows: Vec<SweepRow> = values
        .par_iter()
        .map(|&value| match param.apply(scenario, value).and_then(|s| run_scenario(&s)) {
            Ok((_, report)) => SweepRow {
                value,
                report: Some(report),
                error: None,
            },
            Err(e) => SweepRow {
                value,
                report: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    if let Some(dir) = out_dir {
        ensure_dir(dir)?;
        write_json(&dir.join(format!("{}.sweep.json", scenario.name)), &rows)?;
    }
    Ok(rows)
}
