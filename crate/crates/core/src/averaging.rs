//! Averaged counterpart of the closed loop and the checks built on it.
//!
//! The averaged vector field is
//!
//! ```text
//! q̇̄' = f(q̄, q̇̄) + C û̄ + ¼ M₂₂ A
//! û̄' = −(k/2) ∇J · A
//! ```
//!
//! with kinematics propagated exactly as in the full loop. `M₂₂` and `∇J` are
//! obtained by probing the black-box drift and objective with central
//! differences; the averaging layer never sees closed forms.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use nalgebra::DMatrix;

use crate::error::{EscError, Result};
use crate::escvs::EscVsParams;
use crate::plants::Plant;
use crate::sim::{check_resolution, default_dt, integrate, Dynamics, SimOptions, SimState, StateLayout, Trajectory};

pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Per-step slack allowed in the Lyapunov descent check.
pub const LYAPUNOV_TOLERANCE: f64 = 1e-6;

fn drift_at(plant: &dyn Plant, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()> {
    plant.drift(kin, qdot, out);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(EscError::StateCorruption(format!(
            "drift of `{}` is not finite at q̇ = {qdot:?}",
            plant.name()
        )));
    }
    Ok(())
}

/// Velocity Hessians of each drift component, `H[i][(k, j)] = ∂²fᵢ/∂q̇ₖ∂q̇ⱼ`.
///
/// Under A2 the Hessian does not depend on `q̇`, so the four-point stencil is
/// centred on zero velocity at the given configuration, where cancellation
/// error is smallest.
pub fn velocity_hessians(plant: &dyn Plant, kin: &[f64], fd_step: f64) -> Result<Vec<DMatrix<f64>>> {
    if !(fd_step > 0.0) {
        return Err(EscError::invalid("fd_step", "must be positive"));
    }
    let n = plant.dof();
    let h = fd_step;
    let mut hess = vec![DMatrix::zeros(n, n); n];
    let mut point = vec![0.0; n];
    let mut f = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for k in 0..n {
        for j in k..n {
            for (slot, (sk, sj)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].into_iter().enumerate() {
                point.fill(0.0);
                point[k] += sk * h;
                point[j] += sj * h;
                drift_at(plant, kin, &point, &mut f[slot])?;
            }
            for i in 0..n {
                let d = (f[0][i] - f[1][i] - f[2][i] + f[3][i]) / (4.0 * h * h);
                hess[i][(k, j)] = d;
                hess[i][(j, k)] = d;
            }
        }
    }
    Ok(hess)
}

/// `M₂₂(i, k) = Σⱼ ∂²fᵢ/∂q̇ₖ∂q̇ⱼ aⱼ`.
pub fn m22(plant: &dyn Plant, kin: &[f64], a: &[f64], fd_step: f64) -> Result<DMatrix<f64>> {
    let n = plant.dof();
    if a.len() != n {
        return Err(EscError::invalid("a", format!("expected {n} entries, got {}", a.len())));
    }
    let hess = velocity_hessians(plant, kin, fd_step)?;
    let a = nalgebra::DVector::from_column_slice(a);
    let mut m = DMatrix::zeros(n, n);
    for (i, h) in hess.iter().enumerate() {
        let row = h * &a;
        for k in 0..n {
            m[(i, k)] = row[k];
        }
    }
    Ok(m)
}

/// `M₂₂ A`, taken as the second directional derivative of the drift along `A`.
pub fn m22_times_a(plant: &dyn Plant, kin: &[f64], a: &[f64], fd_step: f64, out: &mut [f64]) -> Result<()> {
    let n = plant.dof();
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        out.fill(0.0);
        return Ok(());
    }
    let h = fd_step;
    let plus: Vec<f64> = a.iter().map(|x| h * x / norm).collect();
    let minus: Vec<f64> = plus.iter().map(|x| -x).collect();
    let (mut fp, mut f0, mut fm) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    drift_at(plant, kin, &plus, &mut fp)?;
    drift_at(plant, kin, &vec![0.0; n], &mut f0)?;
    drift_at(plant, kin, &minus, &mut fm)?;
    for i in 0..n {
        out[i] = (fp[i] - 2.0 * f0[i] + fm[i]) / (h * h) * norm * norm;
    }
    Ok(())
}

/// Nested central difference `∂/∂q̇ⱼ (∂fᵢ/∂q̇ₖ)` about `qdot`, differencing `k` first.
pub fn mixed_partial(
    plant: &dyn Plant,
    kin: &[f64],
    qdot: &[f64],
    (i, k, j): (usize, usize, usize),
    (hk, hj): (f64, f64),
) -> Result<f64> {
    let n = plant.dof();
    let mut out = vec![0.0; n];
    let mut eval = |dk: f64, dj: f64| -> Result<f64> {
        let mut p = qdot.to_vec();
        p[k] += dk;
        p[j] += dj;
        drift_at(plant, kin, &p, &mut out)?;
        Ok(out[i])
    };
    let inner = |e: &mut dyn FnMut(f64, f64) -> Result<f64>, dj: f64| -> Result<f64> {
        Ok((e(hk, dj)? - e(-hk, dj)?) / (2.0 * hk))
    };
    Ok((inner(&mut eval, hj)? - inner(&mut eval, -hj)?) / (2.0 * hj))
}

/// Largest third directional derivative of the drift in velocity about `qdot`.
///
/// Probes every axis, every axis pair and the supplied extra directions with
/// the stencil `[f(2h) − 2f(h) + 2f(−h) − f(−2h)] / (2h³)`.
pub fn velocity_third_derivative(
    plant: &dyn Plant,
    kin: &[f64],
    qdot: &[f64],
    step: f64,
    extra_dirs: &[Vec<f64>],
) -> Result<f64> {
    let n = plant.dof();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        let mut e = vec![0.0; n];
        e[k] = 1.0;
        dirs.push(e);
        for j in k + 1..n {
            let mut e = vec![0.0; n];
            e[k] = std::f64::consts::FRAC_1_SQRT_2;
            e[j] = std::f64::consts::FRAC_1_SQRT_2;
            dirs.push(e);
        }
    }
    dirs.extend(extra_dirs.iter().cloned());

    let scale = qdot.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let h = step * scale;
    let mut worst = 0.0f64;
    let mut f = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for dir in &dirs {
        for (slot, s) in [2.0, 1.0, -1.0, -2.0].into_iter().enumerate() {
            let p: Vec<f64> = qdot.iter().zip(dir).map(|(q, d)| q + s * h * d).collect();
            drift_at(plant, kin, &p, &mut f[slot])?;
        }
        for i in 0..n {
            let d3 = (f[0][i] - 2.0 * f[1][i] + 2.0 * f[2][i] - f[3][i]) / (2.0 * h * h * h);
            worst = worst.max(d3.abs());
        }
    }
    Ok(worst)
}

/// Central-difference gradient of the objective in the kinematic coordinates it reads.
pub fn grad_objective(plant: &dyn Plant, kin: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    plant.validate_kin(kin)?;
    let mut probe = kin.to_vec();
    (0..kin.len())
        .map(|i| {
            let h = fd_step * kin[i].abs().max(1.0);
            probe[i] = kin[i] + h;
            let up = plant.objective(&probe);
            probe[i] = kin[i] - h;
            let down = plant.objective(&probe);
            probe[i] = kin[i];
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// Gradient of the objective with respect to the generalized coordinates.
///
/// Entry `j` probes the kinematic displacement produced by holding a unit
/// velocity along channel `j` for time `±h`.
pub fn coordinate_gradient(plant: &dyn Plant, kin: &[f64], fd_step: f64) -> Result<Vec<f64>> {
    let n = plant.dof();
    let m = kin.len();
    let mut unit = vec![0.0; n];
    let mut dir = vec![0.0; m];
    let mut probe = vec![0.0; m];
    let h = fd_step;
    (0..n)
        .map(|j| {
            unit.fill(0.0);
            unit[j] = 1.0;
            plant.kinematics(kin, &unit, &mut dir)?;
            for (p, (k, d)) in probe.iter_mut().zip(kin.iter().zip(&dir)) {
                *p = k + h * d;
            }
            let up = plant.objective(&probe);
            for (p, (k, d)) in probe.iter_mut().zip(kin.iter().zip(&dir)) {
                *p = k - h * d;
            }
            let down = plant.objective(&probe);
            Ok((up - down) / (2.0 * h))
        })
        .collect()
}

/// The averaged closed loop. Carries the filter state along when the full loop
/// has one so both systems share a layout; the filter never feeds back here.
#[derive(Debug, Clone)]
pub struct AveragedSystem<'a> {
    plant: &'a dyn Plant,
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub k: f64,
    pub hpf_gain: Option<f64>,
    pub fd_step: f64,
    layout: StateLayout,
}

impl<'a> AveragedSystem<'a> {
    pub fn new(plant: &'a dyn Plant, params: &EscVsParams) -> Result<Self> {
        params.validate_for(plant)?;
        Ok(AveragedSystem {
            plant,
            a: params.a.clone(),
            c: params.c.clone(),
            k: params.k,
            hpf_gain: params.hpf_gain,
            fd_step: DEFAULT_FD_STEP,
            layout: StateLayout::for_plant(plant, params.hpf_gain.is_some()),
        })
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        self.fd_step = fd_step;
        self
    }

    /// Averaged right-hand side; `t` is accepted for interface symmetry only.
    pub fn averaged_rhs(&self, _t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let l = self.layout;
        let (qdot, kin) = (&x[l.qdot()], &x[l.kin()]);
        let u_hat = x[l.u_hat()];

        let n = l.dof;
        let mut correction = vec![0.0; n];
        m22_times_a(self.plant, kin, &self.a, self.fd_step, &mut correction)?;
        drift_at(self.plant, kin, qdot, &mut dx[l.qdot()])?;
        for (i, d) in dx[l.qdot()].iter_mut().enumerate() {
            *d += self.c[i] * u_hat + 0.25 * correction[i];
        }
        self.plant.kinematics(kin, qdot, &mut dx[l.kin()])?;

        let grad = coordinate_gradient(self.plant, kin, self.fd_step)?;
        let grad_dot_a: f64 = grad.iter().zip(&self.a).map(|(g, a)| g * a).sum();
        dx[l.u_hat()] = 0.25 * (-2.0 * self.k * grad_dot_a);

        if let (Some(ih), Some(e)) = (l.h(), self.hpf_gain) {
            dx[ih] = -e * x[ih] + self.plant.objective(kin);
        }
        Ok(())
    }
}

impl Dynamics for AveragedSystem<'_> {
    fn plant(&self) -> &dyn Plant {
        self.plant
    }

    fn layout(&self) -> StateLayout {
        self.layout
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        self.averaged_rhs(t, x, dx).map_err(|e| e.at_time(t))
    }

    fn input(&self, _t: f64, x: &[f64]) -> Vec<f64> {
        let u_hat = x[self.layout.u_hat()];
        self.c.iter().map(|c| c * u_hat).collect()
    }
}

/// Integrates the averaged system at the step the full loop would use for `params.omega`.
pub fn simulate_averaged(
    plant: &dyn Plant,
    params: &EscVsParams,
    x0: &SimState,
    t_final: f64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    let system = AveragedSystem::new(plant, params)?;
    let dt = opts.resolve_dt(params.omega);
    integrate(&system, x0, t_final, dt, opts.decimate)
}

/// Sup-norm deviations between a full and an averaged run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    /// Over the velocity and kinematic channels.
    pub state: f64,
    /// Over the estimate channel alone.
    pub u_hat: f64,
}

/// Compares two runs sample by sample.
pub fn sup_deviation(full: &Trajectory, averaged: &Trajectory) -> Result<Deviation> {
    if full.len() != averaged.len() {
        return Err(EscError::invalid(
            "trajectory",
            format!("sample counts differ ({} vs {})", full.len(), averaged.len()),
        ));
    }
    match (full.states.first(), averaged.states.first()) {
        (Some(a), Some(b)) if a == b => {}
        _ => return Err(EscError::invalid("initial_state", "full and averaged runs must start from the same state")),
    }
    let mut dev = Deviation { state: 0.0, u_hat: 0.0 };
    for (x, y) in full.states.iter().zip(&averaged.states) {
        let kin_x = x.kin.to_vec();
        let kin_y = y.kin.to_vec();
        let state = x
            .qdot
            .iter()
            .zip(&y.qdot)
            .chain(kin_x.iter().zip(&kin_y))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        dev.state = dev.state.max(state);
        dev.u_hat = dev.u_hat.max((x.u_hat - y.u_hat).abs());
    }
    Ok(dev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClosenessReport {
    pub omegas: Vec<f64>,
    /// Sup-norm deviation over velocity and kinematic channels, per frequency.
    pub sup_errors: Vec<f64>,
    /// `sup_errors[i + 1] / sup_errors[i]`.
    pub decay_ratios: Vec<f64>,
    /// Sup-norm deviation of the estimate channel, reported for reference.
    pub u_hat_sup_errors: Vec<f64>,
    pub t_final: f64,
}

impl ClosenessReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.sup_errors.windows(2).all(|w| w[1] < w[0])
    }
}

/// Full and averaged runs at one frequency.
#[derive(Debug, Clone)]
pub struct PairedRun {
    pub omega: f64,
    pub full: Trajectory,
    pub averaged: Trajectory,
    pub deviation: Deviation,
}

/// Runs both systems at `omega` with the default step for that frequency.
pub fn paired_run(
    plant: &dyn Plant,
    params: &EscVsParams,
    x0: &SimState,
    t_final: f64,
    omega: f64,
    dt: Option<f64>,
) -> Result<PairedRun> {
    let params = params.with_omega(omega);
    let dt = dt.unwrap_or_else(|| default_dt(omega));
    check_resolution(dt, omega)?;
    let opts = SimOptions::with_dt(dt);
    let full = crate::sim::simulate(plant, &params, x0, t_final, &opts)?;
    let averaged = simulate_averaged(plant, &params, x0, t_final, &opts)?;
    let deviation = sup_deviation(&full, &averaged)?;
    Ok(PairedRun {
        omega,
        full,
        averaged,
        deviation,
    })
}

fn validate_omegas(omegas: &[f64]) -> Result<()> {
    if omegas.len() < 3 {
        return Err(EscError::invalid("omegas", "at least three frequencies are required"));
    }
    if omegas.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(EscError::invalid("omegas", "frequencies must be positive"));
    }
    if omegas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(EscError::invalid("omegas", "frequencies must be strictly increasing"));
    }
    Ok(())
}

/// Paired runs at every frequency, evaluated in parallel.
pub fn closeness_runs(
    plant: &dyn Plant,
    params: &EscVsParams,
    x0: &SimState,
    t_final: f64,
    omegas: &[f64],
) -> Result<Vec<PairedRun>> {
    validate_omegas(omegas)?;
    omegas
        .par_iter()
        .map(|&w| paired_run(plant, params, x0, t_final, w, None))
        .collect()
}

pub fn report_from_runs(runs: &[PairedRun], t_final: f64) -> ClosenessReport {
    let sup_errors: Vec<f64> = runs.iter().map(|r| r.deviation.state).collect();
    let decay_ratios = sup_errors.windows(2).map(|w| w[1] / w[0]).collect();
    ClosenessReport {
        omegas: runs.iter().map(|r| r.omega).collect(),
        decay_ratios,
        u_hat_sup_errors: runs.iter().map(|r| r.deviation.u_hat).collect(),
        sup_errors,
        t_final,
    }
}

/// Measures how the full-to-averaged deviation shrinks as `ω` grows.
pub fn closeness_sweep(
    plant: &dyn Plant,
    params: &EscVsParams,
    x0: &SimState,
    t_final: f64,
    omegas: &[f64],
) -> Result<ClosenessReport> {
    let runs = closeness_runs(plant, params, x0, t_final, omegas)?;
    Ok(report_from_runs(&runs, t_final))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    pub monotone: bool,
    pub max_increase: f64,
    /// Length of the initial window excluded from the descent check, in s.
    pub transient_s: f64,
    pub initial_value: f64,
    pub final_value: f64,
}

/// One averaged time constant `1/min|cᵢ|`, capped at 5% of the run.
pub fn transient_window(c: &[f64], t_final: f64) -> f64 {
    let min_c = c
        .iter()
        .map(|c| c.abs())
        .filter(|c| *c > 0.0)
        .fold(f64::INFINITY, f64::min);
    (1.0 / min_c).min(0.05 * t_final)
}

/// Descent check on sampled values `V(tᵢ)` after `transient_s`.
pub fn descent_check(times: &[f64], values: &[f64], transient_s: f64, tolerance: f64) -> LyapunovReport {
    let max_increase = times
        .windows(2)
        .zip(values.windows(2))
        .filter(|(t, _)| t[0] >= transient_s)
        .map(|(_, v)| v[1] - v[0])
        .fold(f64::NEG_INFINITY, f64::max);
    let max_increase = if max_increase.is_finite() { max_increase } else { 0.0 };
    LyapunovReport {
        monotone: max_increase <= tolerance,
        max_increase,
        transient_s,
        initial_value: values.first().copied().unwrap_or(0.0),
        final_value: values.last().copied().unwrap_or(0.0),
    }
}

/// `V = J − J*` along the averaged trajectory from `x0`.
pub fn lyapunov_check(
    sys: &AveragedSystem<'_>,
    x0: &SimState,
    t_final: f64,
    dt: f64,
) -> Result<LyapunovReport> {
    let traj = integrate(sys, x0, t_final, dt, 1)?;
    let j_star = sys.plant.optimal_objective();
    let values: Vec<f64> = traj.objective.iter().map(|j| j - j_star).collect();
    Ok(descent_check(
        &traj.times,
        &values,
        transient_window(&sys.c, t_final),
        LYAPUNOV_TOLERANCE,
    ))
}
