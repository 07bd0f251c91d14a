use serde::{Deserialize, Serialize};

use super::{labels, KinematicState, Plant};
use crate::error::{EscError, Result};

/// Acceleration-controlled unicycle with linear dissipation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnicycleParams {
    pub d_v: f64,
    pub d_omega: f64,
    /// Source position `(x_d, y_d)` in m.
    pub target: [f64; 2],
}

impl UnicycleParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.d_v >= 0.0 && self.d_v.is_finite()) {
            return Err(EscError::invalid("d_v_per_s", "must be non-negative"));
        }
        if !(self.d_omega >= 0.0 && self.d_omega.is_finite()) {
            return Err(EscError::invalid("d_omega_per_s", "must be non-negative"));
        }
        if self.target.iter().any(|c| !c.is_finite()) {
            return Err(EscError::invalid("target_m", "must be finite"));
        }
        Ok(())
    }
}

/// `(−d_Ω Ω, −d_v v)`.
pub fn unicycle_drift(p: &UnicycleParams, omega: f64, v: f64) -> [f64; 2] {
    [-p.d_omega * omega, -p.d_v * v]
}

/// Heading-integrated kinematics `(ẋ, ẏ, θ̇) = (v cos θ, v sin θ, Ω)`.
pub fn unicycle_kinematics(pose: &[f64; 3], v: f64, omega: f64) -> [f64; 3] {
    let (s, c) = pose[2].sin_cos();
    [v * c, v * s, omega]
}

/// Squared distance to the target.
pub fn unicycle_objective(pose: &[f64; 3], target: &[f64; 2]) -> f64 {
    let dx = pose[0] - target[0];
    let dy = pose[1] - target[1];
    dx * dx + dy * dy
}

/// Unicycle plant with `q̇ = [Ω, v]` and pose `(x, y, θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Unicycle {
    pub params: UnicycleParams,
}

impl Unicycle {
    pub fn new(params: UnicycleParams) -> Result<Self> {
        params.validate()?;
        Ok(Unicycle { params })
    }
}

impl Plant for Unicycle {
    fn name(&self) -> &str {
        "unicycle"
    }

    fn dof(&self) -> usize {
        2
    }

    fn kin_dim(&self) -> usize {
        3
    }

    fn drift(&self, _kin: &[f64], qdot: &[f64], out: &mut [f64]) {
        out.copy_from_slice(&unicycle_drift(&self.params, qdot[0], qdot[1]));
    }

    fn kinematics(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&unicycle_kinematics(&[kin[0], kin[1], kin[2]], qdot[1], qdot[0]));
        Ok(())
    }

    fn objective(&self, kin: &[f64]) -> f64 {
        unicycle_objective(&[kin[0], kin[1], kin[2]], &self.params.target)
    }

    fn velocity_labels(&self) -> Vec<String> {
        labels(&["omega", "v"])
    }

    fn kin_labels(&self) -> Vec<String> {
        labels(&["x", "y", "heading"])
    }

    fn kin_template(&self) -> KinematicState {
        KinematicState::Pose {
            x: 0.0,
            y: 0.0,
            heading: 0.0,
        }
    }
}
