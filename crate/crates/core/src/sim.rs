//! Fixed-step integration and trajectory recording.
//!
//! Both the oscillatory closed loop and its averaged counterpart are flattened
//! into the layout `[q̇ (n) | kinematic state (m) | û | h?]` and advanced with
//! classical RK4 at a constant step.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{EscError, Result};
use crate::escvs::{ClosedLoop, EscVsParams};
use crate::plants::{KinematicState, Plant};

/// Default number of integration steps per perturbation period.
pub const STEPS_PER_PERIOD: f64 = 200.0;
/// Coarsest admissible resolution of the perturbation period.
pub const MIN_STEPS_PER_PERIOD: f64 = 20.0;

/// Classical RK4 with reusable stage buffers.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    scratch: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            scratch: vec![0.0; dim],
        }
    }

    /// Advances `state` in place by one step of size `dt` starting at `t`.
    pub fn step<F>(&mut self, mut rhs: F, state: &mut [f64], t: f64, dt: f64) -> Result<()>
    where
        F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
    {
        let n = state.len();
        if self.k1.len() != n {
            *self = Rk4::new(n);
        }
        let half = 0.5 * dt;

        rhs(t, state, &mut self.k1)?;
        check_stage(&self.k1, t)?;

        for i in 0..n {
            self.scratch[i] = state[i] + half * self.k1[i];
        }
        rhs(t + half, &self.scratch, &mut self.k2)?;
        check_stage(&self.k2, t + half)?;

        for i in 0..n {
            self.scratch[i] = state[i] + half * self.k2[i];
        }
        rhs(t + half, &self.scratch, &mut self.k3)?;
        check_stage(&self.k3, t + half)?;

        for i in 0..n {
            self.scratch[i] = state[i] + dt * self.k3[i];
        }
        rhs(t + dt, &self.scratch, &mut self.k4)?;
        check_stage(&self.k4, t + dt)?;

        for i in 0..n {
            state[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        check_stage(state, t + dt)
    }
}

fn check_stage(values: &[f64], t: f64) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(component) => Err(EscError::IntegrationDiverged { time: t, component }),
        None => Ok(()),
    }
}

/// One classical RK4 step of `rhs` from `(t, state)`.
pub fn rk4_step<F>(rhs: F, state: &[f64], t: f64, dt: f64) -> Result<Vec<f64>>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    if !(dt > 0.0) {
        return Err(EscError::invalid("dt", "step size must be positive"));
    }
    let mut next = state.to_vec();
    Rk4::new(state.len()).step(rhs, &mut next, t, dt)?;
    Ok(next)
}

/// Index ranges of the flat state vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub dof: usize,
    pub kin_dim: usize,
    pub filter: bool,
}

impl StateLayout {
    pub fn for_plant(plant: &dyn Plant, filter: bool) -> Self {
        StateLayout {
            dof: plant.dof(),
            kin_dim: plant.kin_dim(),
            filter,
        }
    }

    pub fn qdot(&self) -> std::ops::Range<usize> {
        0..self.dof
    }

    pub fn kin(&self) -> std::ops::Range<usize> {
        self.dof..self.dof + self.kin_dim
    }

    pub fn u_hat(&self) -> usize {
        self.dof + self.kin_dim
    }

    pub fn h(&self) -> Option<usize> {
        self.filter.then(|| self.dof + self.kin_dim + 1)
    }

    pub fn len(&self) -> usize {
        self.dof + self.kin_dim + 1 + usize::from(self.filter)
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Full closed-loop state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub qdot: Vec<f64>,
    pub kin: KinematicState,
    pub u_hat: f64,
    pub h: Option<f64>,
}

impl SimState {
    pub fn layout(&self) -> StateLayout {
        StateLayout {
            dof: self.qdot.len(),
            kin_dim: self.kin.dim(),
            filter: self.h.is_some(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.layout().len());
        flat.extend_from_slice(&self.qdot);
        flat.extend(self.kin.to_vec());
        flat.push(self.u_hat);
        if let Some(h) = self.h {
            flat.push(h);
        }
        flat
    }

    /// Rebuilds a state from `flat`, using `template` for the kinematic variant.
    pub fn from_flat(layout: StateLayout, template: &KinematicState, flat: &[f64]) -> Self {
        SimState {
            qdot: flat[layout.qdot()].to_vec(),
            kin: template.with_values(&flat[layout.kin()]),
            u_hat: flat[layout.u_hat()],
            h: layout.h().map(|i| flat[i]),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }
}

/// Time-stamped record of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SimState>,
    pub inputs: Vec<Vec<f64>>,
    pub objective: Vec<f64>,
}

impl Trajectory {
    fn with_capacity(cap: usize) -> Self {
        Trajectory {
            times: Vec::with_capacity(cap),
            states: Vec::with_capacity(cap),
            inputs: Vec::with_capacity(cap),
            objective: Vec::with_capacity(cap),
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> Option<&SimState> {
        self.states.last()
    }

    /// First index of the trailing `fraction` of the run (at least one sample).
    pub fn window_start(&self, fraction: f64) -> usize {
        let n = self.len();
        let count = ((n as f64) * fraction).ceil() as usize;
        n - count.clamp(1, n.max(1))
    }

    /// Mean of `f` over the trailing `fraction` of recorded samples.
    pub fn final_window_mean<F>(&self, fraction: f64, f: F) -> f64
    where
        F: Fn(usize) -> f64,
    {
        let start = self.window_start(fraction);
        let n = self.len() - start;
        (start..self.len()).map(f).sum::<f64>() / n as f64
    }

    pub fn final_window_objective(&self) -> f64 {
        self.final_window_mean(0.1, |i| self.objective[i])
    }
}

/// Integration settings shared by every run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimOptions {
    /// Step size; defaults to one two-hundredth of the perturbation period.
    pub dt: Option<f64>,
    /// Record every `decimate`-th step.
    pub decimate: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            dt: None,
            decimate: 1,
        }
    }
}

impl SimOptions {
    pub fn with_dt(dt: f64) -> Self {
        SimOptions {
            dt: Some(dt),
            decimate: 1,
        }
    }

    pub fn resolve_dt(&self, omega: f64) -> f64 {
        self.dt.unwrap_or_else(|| default_dt(omega))
    }
}

pub fn default_dt(omega: f64) -> f64 {
    TAU / omega / STEPS_PER_PERIOD
}

/// A flat-state vector field with a plant attached.
pub trait Dynamics: Sync {
    fn plant(&self) -> &dyn Plant;
    fn layout(&self) -> StateLayout;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
    /// Applied generalized-force vector at `(t, x)`.
    fn input(&self, t: f64, x: &[f64]) -> Vec<f64>;
}

/// Integrates `system` from `x0` over `[0, t_final]` at fixed step `dt`.
pub fn integrate(
    system: &dyn Dynamics,
    x0: &SimState,
    t_final: f64,
    dt: f64,
    decimate: usize,
) -> Result<Trajectory> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(EscError::invalid("t_final", "must be positive and finite"));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(EscError::invalid("dt", "must be positive and finite"));
    }
    if decimate == 0 {
        return Err(EscError::invalid("decimate", "must be at least 1"));
    }
    let layout = system.layout();
    if x0.layout() != layout {
        return Err(EscError::invalid(
            "initial_state",
            format!("state layout {:?} does not match system layout {layout:?}", x0.layout()),
        ));
    }
    let plant = system.plant();

    let mut x = x0.to_flat();
    plant.project(&mut x[layout.kin()]);
    plant.validate_kin(&x[layout.kin()]).map_err(|e| e.at_time(0.0))?;
    if let Some(component) = x.iter().position(|v| !v.is_finite()) {
        return Err(EscError::IntegrationDiverged { time: 0.0, component });
    }

    let steps = ((t_final / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut traj = Trajectory::with_capacity(steps / decimate + 2);
    let record = |traj: &mut Trajectory, t: f64, x: &[f64]| {
        traj.times.push(t);
        traj.states.push(SimState::from_flat(layout, &x0.kin, x));
        traj.inputs.push(system.input(t, x));
        traj.objective.push(plant.objective(&x[layout.kin()]));
    };
    record(&mut traj, 0.0, &x);

    let mut rk4 = Rk4::new(layout.len());
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        rk4.step(|t, x, dx| system.rhs(t, x, dx), &mut x, t, dt)?;
        let kin = &mut x[layout.kin()];
        plant.project(kin);
        plant.validate_kin(kin).map_err(|e| e.at_time(t + dt))?;
        if step % decimate == 0 {
            record(&mut traj, step as f64 * dt, &x);
        }
    }
    Ok(traj)
}

/// Runs the oscillatory closed loop of `plant` under `params` from `x0`.
pub fn simulate(
    plant: &dyn Plant,
    params: &EscVsParams,
    x0: &SimState,
    t_final: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let system = ClosedLoop::new(plant, params)?;
    let dt = opts.resolve_dt(params.omega);
    check_resolution(dt, params.omega)?;
    integrate(&system, x0, t_final, dt, opts.decimate)
}

/// Checks the perturbation-resolution precondition `dt ≤ (2π/ω)/20`.
pub fn check_resolution(dt: f64, omega: f64) -> Result<()> {
    let limit = TAU / omega / MIN_STEPS_PER_PERIOD;
    if dt > limit * (1.0 + 1e-12) {
        return Err(EscError::invalid(
            "dt",
            format!("{dt} s resolves fewer than 20 steps per perturbation period (limit {limit} s)"),
        ));
    }
    Ok(())
}
