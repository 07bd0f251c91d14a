use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use super::{labels, vec3, KinematicState, Plant, Vec3};
use crate::error::{EscError, Result};

/// Distance from ±π/2 at which the 3-2-1 kinematics are declared singular.
pub const PITCH_GUARD_MARGIN: f64 = 0.01;

/// Attitude-only quadcopter with linear rotational drag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadcopterParams {
    pub inertia: [f64; 3],
    pub rot_drag: [f64; 3],
    /// Desired `(ψ, θ, φ)` in rad.
    pub euler_desired: [f64; 3],
}

impl QuadcopterParams {
    pub fn validate(&self) -> Result<()> {
        if self.inertia.iter().any(|i| !(*i > 0.0 && i.is_finite())) {
            return Err(EscError::invalid("inertia_kg_m2", "entries must be positive"));
        }
        if self.rot_drag.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(EscError::invalid("rot_drag_n_m_s", "entries must be non-negative"));
        }
        Ok(())
    }
}

/// `−I⁻¹(Ω × IΩ + k_r Ω)`.
pub fn quad_drift(p: &QuadcopterParams, omega: &Vec3) -> Vec3 {
    let inertia = vec3(p.inertia);
    let torque = omega.cross(&inertia.component_mul(omega)) + vec3(p.rot_drag).component_mul(omega);
    -torque.component_div(&inertia)
}

pub(crate) fn check_pitch(theta: f64) -> Result<()> {
    if !(theta.abs() < FRAC_PI_2 - PITCH_GUARD_MARGIN) {
        return Err(EscError::KinematicSingularity {
            time: f64::NAN,
            pitch: theta,
        });
    }
    Ok(())
}

/// 3-2-1 Euler-angle rates `(ψ̇, θ̇, φ̇)` from the body rate.
pub fn euler_kinematics(eta: &[f64; 3], omega: &Vec3) -> Result<[f64; 3]> {
    let [_, theta, phi] = *eta;
    check_pitch(theta)?;
    let (sp, cp) = phi.sin_cos();
    let (st, ct) = theta.sin_cos();
    let (w1, w2, w3) = (omega.x, omega.y, omega.z);
    Ok([
        (sp * w2 + cp * w3) / ct,
        (cp * ct * w2 - sp * ct * w3) / ct,
        (ct * w1 + sp * st * w2 + cp * st * w3) / ct,
    ])
}

/// `J = (ψ − ψ_d)² + (θ − θ_d)² + (φ − φ_d)²`.
pub fn quad_objective(eta: &[f64; 3], eta_desired: &[f64; 3]) -> f64 {
    eta.iter()
        .zip(eta_desired.iter())
        .map(|(a, d)| (a - d) * (a - d))
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Quadcopter {
    pub params: QuadcopterParams,
}

impl Quadcopter {
    pub fn new(params: QuadcopterParams) -> Result<Self> {
        params.validate()?;
        Ok(Quadcopter { params })
    }
}

impl Plant for Quadcopter {
    fn name(&self) -> &str {
        "quadcopter"
    }

    fn dof(&self) -> usize {
        3
    }

    fn kin_dim(&self) -> usize {
        3
    }

    fn drift(&self, _kin: &[f64], qdot: &[f64], out: &mut [f64]) {
        let f = quad_drift(&self.params, &Vec3::new(qdot[0], qdot[1], qdot[2]));
        out.copy_from_slice(f.as_slice());
    }

    fn kinematics(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()> {
        let rates = euler_kinematics(&[kin[0], kin[1], kin[2]], &Vec3::new(qdot[0], qdot[1], qdot[2]))?;
        out.copy_from_slice(&rates);
        Ok(())
    }

    fn objective(&self, kin: &[f64]) -> f64 {
        quad_objective(&[kin[0], kin[1], kin[2]], &self.params.euler_desired)
    }

    fn validate_kin(&self, kin: &[f64]) -> Result<()> {
        check_pitch(kin[1])
    }

    fn velocity_labels(&self) -> Vec<String> {
        labels(&["omega_x", "omega_y", "omega_z"])
    }

    fn kin_labels(&self) -> Vec<String> {
        labels(&["psi", "theta", "phi"])
    }

    fn kin_template(&self) -> KinematicState {
        KinematicState::Euler { angles: [0.0; 3] }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table2() -> QuadcopterParams {
        QuadcopterParams {
            inertia: [0.0075, 0.0075, 0.013],
            rot_drag: [0.1, 0.1, 0.15],
            euler_desired: [0.0; 3],
        }
    }

    #[test]
    fn zero_rate_has_zero_drift() {
        assert_eq!(quad_drift(&table2(), &Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn yaw_spin_only_sees_drag() {
        let p = table2();
        let f = quad_drift(&p, &Vec3::new(0.0, 0.0, 1.0));
        // Ω × IΩ = (0,0,1) × (0,0,0.013) = 0
        assert_eq!(f.x, 0.0);
        assert_eq!(f.y, 0.0);
        assert_relative_eq!(f.z, -0.15 / 0.013, epsilon = 1e-12);
        assert_relative_eq!(f.z, -11.538_461_538_461_538, epsilon = 1e-12);
    }

    #[test]
    fn brute_force_oracle() {
        let p = table2();
        let w = [0.3, -1.2, 0.7];
        let iw = [p.inertia[0] * w[0], p.inertia[1] * w[1], p.inertia[2] * w[2]];
        let g = [
            w[1] * iw[2] - w[2] * iw[1],
            w[2] * iw[0] - w[0] * iw[2],
            w[0] * iw[1] - w[1] * iw[0],
        ];
        let f = quad_drift(&p, &vec3(w));
        for i in 0..3 {
            let expected = -(g[i] + p.rot_drag[i] * w[i]) / p.inertia[i];
            assert_relative_eq!(f[i], expected, epsilon = 1e-12);
        }
    }

    #[test]
    fn unit_inertia_small_rate_is_linear_drag() {
        let p = QuadcopterParams {
            inertia: [1.0; 3],
            ..table2()
        };
        let w = Vec3::new(1e-6, -2e-6, 3e-6);
        let f = quad_drift(&p, &w);
        for i in 0..3 {
            assert_relative_eq!(f[i], -p.rot_drag[i] * w[i], max_relative = 1e-5);
        }
    }

    #[test]
    fn level_attitude_roll_rate_drives_phi() {
        let rates = euler_kinematics(&[0.3, 0.0, 0.0], &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(rates, [0.0, 0.0, 1.0]);
        let rates = euler_kinematics(&[0.3, 0.2, -0.1], &Vec3::zeros()).unwrap();
        assert_eq!(rates, [0.0; 3]);
    }

    #[test]
    fn pitch_guard() {
        assert!(matches!(
            euler_kinematics(&[0.0, FRAC_PI_2 - 0.005, 0.0], &Vec3::zeros()),
            Err(EscError::KinematicSingularity { .. })
        ));
        assert!(euler_kinematics(&[0.0, -(FRAC_PI_2 - 0.02), 0.0], &Vec3::zeros()).is_ok());
    }

    #[test]
    fn objective_examples() {
        assert_eq!(quad_objective(&[0.1, 0.2, 0.3], &[0.1, 0.2, 0.3]), 0.0);
        let j = quad_objective(&[0.1745, 0.2618, 0.2094], &[0.0; 3]);
        assert_relative_eq!(j, 0.1745f64.powi(2) + 0.2618f64.powi(2) + 0.2094f64.powi(2));
        // The printed angles are rounded, so J(0) lands at 0.14284.
        assert!((j - 0.1429).abs() < 1e-4);
        assert_eq!(
            quad_objective(&[-0.1, 0.2, -0.3], &[0.0; 3]),
            quad_objective(&[0.1, -0.2, 0.3], &[0.0; 3])
        );
    }
}
