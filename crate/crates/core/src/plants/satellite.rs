use serde::{Deserialize, Serialize};

use super::quaternion::{self, quaternion_rate, satellite_objective};
use super::{labels, vec3, KinematicState, Plant, Vec3};
use crate::error::{EscError, Result};

/// Satellite body with three body-aligned reaction wheels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatelliteParams {
    pub inertia: [f64; 3],
    pub rw_inertia: [f64; 3],
    pub damping: [f64; 3],
    /// Scalar-last desired attitude.
    pub q_desired: [f64; 4],
}

impl SatelliteParams {
    pub fn validate(&self) -> Result<()> {
        if self.inertia.iter().any(|i| !(*i > 0.0 && i.is_finite())) {
            return Err(EscError::invalid("inertia_kg_m2", "entries must be positive"));
        }
        if self.rw_inertia.iter().any(|i| !(*i > 0.0 && i.is_finite())) {
            return Err(EscError::invalid("rw_inertia_kg_m2", "entries must be positive"));
        }
        if self.damping.iter().any(|d| !(*d >= 0.0 && d.is_finite())) {
            return Err(EscError::invalid("damping_n_m_s", "entries must be non-negative"));
        }
        quaternion::ensure_unit(&self.q_desired, "desired")
            .map_err(|e| EscError::invalid("q_desired", e.to_string()))
    }
}

/// Body block `−I⁻¹(Ω × IΩ) − I⁻¹(Ω × I_RW Ω_RW) − I⁻¹DΩ`; the wheel block has no drift.
pub fn satellite_drift(p: &SatelliteParams, omega: &Vec3, omega_rw: &Vec3) -> [f64; 6] {
    let inertia = vec3(p.inertia);
    let h_body = inertia.component_mul(omega);
    let h_wheels = vec3(p.rw_inertia).component_mul(omega_rw);
    let torque = omega.cross(&h_body) + omega.cross(&h_wheels) + vec3(p.damping).component_mul(omega);
    let body = -torque.component_div(&inertia);
    [body.x, body.y, body.z, 0.0, 0.0, 0.0]
}

/// Maps a wheel torque onto body and wheel accelerations: `[I⁻¹τ; −I_RW⁻¹τ]`.
pub fn satellite_input_map(p: &SatelliteParams, tau_rw: &Vec3) -> [f64; 6] {
    let body = tau_rw.component_div(&vec3(p.inertia));
    let wheels = -tau_rw.component_div(&vec3(p.rw_inertia));
    [body.x, body.y, body.z, wheels.x, wheels.y, wheels.z]
}

/// Satellite attitude plant, `q̇ = [Ω, Ω_RW]`, measured through the error quaternion.
#[derive(Debug, Clone, PartialEq)]
pub struct Satellite {
    pub params: SatelliteParams,
}

impl Satellite {
    pub fn new(params: SatelliteParams) -> Result<Self> {
        params.validate()?;
        Ok(Satellite { params })
    }
}

impl Plant for Satellite {
    fn name(&self) -> &str {
        "satellite"
    }

    fn dof(&self) -> usize {
        6
    }

    fn kin_dim(&self) -> usize {
        4
    }

    fn drift(&self, _kin: &[f64], qdot: &[f64], out: &mut [f64]) {
        let omega = Vec3::new(qdot[0], qdot[1], qdot[2]);
        let omega_rw = Vec3::new(qdot[3], qdot[4], qdot[5]);
        out.copy_from_slice(&satellite_drift(&self.params, &omega, &omega_rw));
    }

    fn kinematics(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()> {
        let q = [kin[0], kin[1], kin[2], kin[3]];
        out.copy_from_slice(&quaternion_rate(&q, &Vec3::new(qdot[0], qdot[1], qdot[2])));
        Ok(())
    }

    fn objective(&self, kin: &[f64]) -> f64 {
        satellite_objective(&[kin[0], kin[1], kin[2], kin[3]], &self.params.q_desired)
    }

    fn project(&self, kin: &mut [f64]) {
        quaternion::normalize(kin);
    }

    fn validate_kin(&self, kin: &[f64]) -> Result<()> {
        quaternion::ensure_unit(&[kin[0], kin[1], kin[2], kin[3]], "attitude")
    }

    fn velocity_labels(&self) -> Vec<String> {
        labels(&["omega_x", "omega_y", "omega_z", "omega_rw_x", "omega_rw_y", "omega_rw_z"])
    }

    fn kin_labels(&self) -> Vec<String> {
        labels(&["q1", "q2", "q3", "q4"])
    }

    fn kin_template(&self) -> KinematicState {
        KinematicState::Quaternion {
            q: [0.0, 0.0, 0.0, 1.0],
        }
    }
}
