//! Single-perturbation extremum seeking control law.
//!
//! The applied input is `u = C û + A ω cos(ωt)` with one scalar estimate `û`
//! shared by every channel. The estimate adapts as `û̇ = k J ω cos(ωt)`, or
//! `û̇ = k (J − e h) ω cos(ωt)` with `ḣ = −e h + J` when the measurement is
//! high-pass filtered.

use serde::{Deserialize, Serialize};

use crate::error::{EscError, Result};
use crate::plants::Plant;
use crate::sim::{Dynamics, StateLayout};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscVsParams {
    /// Oscillatory gain vector `A`.
    pub a: Vec<f64>,
    /// Estimate gain vector `C`.
    pub c: Vec<f64>,
    /// Learning gain.
    pub k: f64,
    /// Perturbation frequency in rad/s.
    pub omega: f64,
    /// High-pass filter gain `e` in 1/s.
    pub hpf_gain: Option<f64>,
}

impl EscVsParams {
    pub fn new(a: Vec<f64>, c: Vec<f64>, k: f64, omega: f64, hpf_gain: Option<f64>) -> Result<Self> {
        let params = EscVsParams {
            a,
            c,
            k,
            omega,
            hpf_gain,
        };
        params.validate()?;
        Ok(params)
    }

    /// All gains zero and adaptation off: the plant evolves under its drift alone.
    pub fn unforced(n: usize, omega: f64) -> Self {
        EscVsParams {
            a: vec![0.0; n],
            c: vec![0.0; n],
            k: 0.0,
            omega,
            hpf_gain: None,
        }
    }

    pub fn is_unforced(&self) -> bool {
        self.k == 0.0 && self.a.iter().chain(self.c.iter()).all(|g| *g == 0.0)
    }

    pub fn dof(&self) -> usize {
        self.a.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(EscError::invalid("omega", "perturbation frequency must be positive"));
        }
        if !(self.k > 0.0 && self.k.is_finite()) && !self.is_unforced() {
            return Err(EscError::invalid("k", "learning gain must be positive"));
        }
        if self.a.len() != self.c.len() {
            return Err(EscError::invalid(
                "c",
                format!("length {} differs from length {} of a", self.c.len(), self.a.len()),
            ));
        }
        if self.a.is_empty() {
            return Err(EscError::invalid("a", "gain vectors must not be empty"));
        }
        if let Some(i) = self.a.iter().position(|g| !g.is_finite()) {
            return Err(EscError::invalid("a", format!("entry {i} is not finite")));
        }
        if let Some(i) = self.c.iter().position(|g| !g.is_finite()) {
            return Err(EscError::invalid("c", format!("entry {i} is not finite")));
        }
        if let Some(e) = self.hpf_gain {
            if !(e > 0.0 && e.is_finite()) {
                return Err(EscError::invalid("hpf_gain", "filter gain must be positive"));
            }
        }
        Ok(())
    }

    pub fn validate_for(&self, plant: &dyn Plant) -> Result<()> {
        self.validate()?;
        if self.dof() != plant.dof() {
            return Err(EscError::invalid(
                "a",
                format!(
                    "{} gains given but plant `{}` has {} generalized velocities",
                    self.dof(),
                    plant.name(),
                    plant.dof()
                ),
            ));
        }
        Ok(())
    }

    /// Channels where the estimate gain does not dominate the oscillatory gain.
    pub fn gain_ordering_warnings(&self) -> Vec<String> {
        self.a
            .iter()
            .zip(self.c.iter())
            .enumerate()
            .filter(|(_, (a, c))| c.abs() <= a.abs() && (**a != 0.0 || **c != 0.0))
            .map(|(i, (a, c))| {
                format!("gain ordering: channel {} has |c| = {} not larger than |a| = {}", i + 1, c.abs(), a.abs())
            })
            .collect()
    }

    pub fn with_omega(&self, omega: f64) -> Self {
        EscVsParams {
            omega,
            ..self.clone()
        }
    }
}

/// Per-step controller output.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSample {
    pub u: Vec<f64>,
    pub u_hat_dot: f64,
    pub h_dot: Option<f64>,
}

/// `u = c û + a ω cos(ωt)`.
pub fn control_input(params: &EscVsParams, u_hat: f64, t: f64) -> Vec<f64> {
    let dither = params.omega * (params.omega * t).cos();
    params
        .c
        .iter()
        .zip(params.a.iter())
        .map(|(c, a)| c * u_hat + a * dither)
        .collect()
}

/// Unfiltered adaptation `k J ω cos(ωt)`.
pub fn adapt(params: &EscVsParams, objective: f64, t: f64) -> f64 {
    params.k * objective * params.omega * (params.omega * t).cos()
}

/// Filtered adaptation: returns `(k (J − e h) ω cos(ωt), −e h + J)`.
pub fn adapt_hpf(params: &EscVsParams, objective: f64, h: f64, t: f64) -> Result<(f64, f64)> {
    let e = params.hpf_gain.ok_or(EscError::MissingHpfGain)?;
    let u_hat_dot = params.k * (objective - e * h) * params.omega * (params.omega * t).cos();
    Ok((u_hat_dot, -e * h + objective))
}

/// Evaluates the full controller at one instant.
pub fn sample(params: &EscVsParams, u_hat: f64, objective: f64, h: Option<f64>, t: f64) -> Result<ControlSample> {
    let u = control_input(params, u_hat, t);
    let (u_hat_dot, h_dot) = match h {
        Some(h) => {
            let (du, dh) = adapt_hpf(params, objective, h, t)?;
            (du, Some(dh))
        }
        None => (adapt(params, objective, t), None),
    };
    Ok(ControlSample { u, u_hat_dot, h_dot })
}

/// The oscillatory closed loop `q̈ = f + C û + A ω cos(ωt)` with its adaptation law.
#[derive(Debug, Clone, Copy)]
pub struct ClosedLoop<'a> {
    plant: &'a dyn Plant,
    params: &'a EscVsParams,
    layout: StateLayout,
}

impl<'a> ClosedLoop<'a> {
    pub fn new(plant: &'a dyn Plant, params: &'a EscVsParams) -> Result<Self> {
        params.validate_for(plant)?;
        Ok(ClosedLoop {
            plant,
            params,
            layout: StateLayout::for_plant(plant, params.hpf_gain.is_some()),
        })
    }

    pub fn params(&self) -> &EscVsParams {
        self.params
    }
}

impl Dynamics for ClosedLoop<'_> {
    fn plant(&self) -> &dyn Plant {
        self.plant
    }

    fn layout(&self) -> StateLayout {
        self.layout
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        let l = self.layout;
        let (qdot, kin) = (&x[l.qdot()], &x[l.kin()]);
        let u_hat = x[l.u_hat()];

        self.plant.drift(kin, qdot, &mut dx[l.qdot()]);
        let dither = self.params.omega * (self.params.omega * t).cos();
        for ((d, c), a) in dx[l.qdot()].iter_mut().zip(&self.params.c).zip(&self.params.a) {
            *d += c * u_hat + a * dither;
        }
        self.plant
            .kinematics(kin, qdot, &mut dx[l.kin()])
            .map_err(|e| e.at_time(t))?;

        let objective = self.plant.objective(kin);
        match l.h() {
            Some(ih) => {
                let (du, dh) = adapt_hpf(self.params, objective, x[ih], t)?;
                dx[l.u_hat()] = du;
                dx[ih] = dh;
            }
            None => dx[l.u_hat()] = adapt(self.params, objective, t),
        }
        Ok(())
    }

    fn input(&self, t: f64, x: &[f64]) -> Vec<f64> {
        control_input(self.params, x[self.layout.u_hat()], t)
    }
}
