use serde::{Deserialize, Serialize};

use super::quaternion::{self, error_quaternion_unchecked, quaternion_rate, rotation_matrix};
use super::{labels, vec3, KinematicState, Plant, Vec3};
use crate::error::{EscError, Result};

/// Diagonal inertia and scalar mass of a rigid body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigidBodyParams {
    pub inertia: [f64; 3],
    pub mass: f64,
}

impl RigidBodyParams {
    pub fn validate(&self) -> Result<()> {
        if self.inertia.iter().any(|i| !(*i > 0.0 && i.is_finite())) {
            return Err(EscError::invalid("inertia", "entries must be positive"));
        }
        if !(self.mass > 0.0 && self.mass.is_finite()) {
            return Err(EscError::invalid("mass", "must be positive"));
        }
        Ok(())
    }
}

/// `[−I⁻¹(Ω × IΩ); −M⁻¹(Ω × v)]`.
pub fn rigid_body_drift(p: &RigidBodyParams, omega: &Vec3, v: &Vec3) -> [f64; 6] {
    let inertia = vec3(p.inertia);
    let ang = -omega.cross(&inertia.component_mul(omega)).component_div(&inertia);
    let lin = -omega.cross(v) / p.mass;
    [ang.x, ang.y, ang.z, lin.x, lin.y, lin.z]
}

/// Free rigid body with `q̇ = [Ω, v]`, attitude quaternion and inertial position.
///
/// The objective sums the squared vector part of the attitude error and the
/// squared position error.
#[derive(Debug, Clone, PartialEq)]
pub struct CustomRigidBody {
    pub params: RigidBodyParams,
    pub q_desired: [f64; 4],
    pub position_desired: [f64; 3],
}

impl CustomRigidBody {
    pub fn new(params: RigidBodyParams, q_desired: [f64; 4], position_desired: [f64; 3]) -> Result<Self> {
        params.validate()?;
        quaternion::ensure_unit(&q_desired, "desired")?;
        Ok(CustomRigidBody {
            params,
            q_desired,
            position_desired,
        })
    }
}

impl Plant for CustomRigidBody {
    fn name(&self) -> &str {
        "custom-rigid-body"
    }

    fn dof(&self) -> usize {
        6
    }

    fn kin_dim(&self) -> usize {
        7
    }

    fn drift(&self, _kin: &[f64], qdot: &[f64], out: &mut [f64]) {
        let omega = Vec3::new(qdot[0], qdot[1], qdot[2]);
        let v = Vec3::new(qdot[3], qdot[4], qdot[5]);
        out.copy_from_slice(&rigid_body_drift(&self.params, &omega, &v));
    }

    fn kinematics(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()> {
        let q = [kin[0], kin[1], kin[2], kin[3]];
        let omega = Vec3::new(qdot[0], qdot[1], qdot[2]);
        let v = Vec3::new(qdot[3], qdot[4], qdot[5]);
        out[..4].copy_from_slice(&quaternion_rate(&q, &omega));
        let p_dot = rotation_matrix(&q) * v;
        out[4..].copy_from_slice(p_dot.as_slice());
        Ok(())
    }

    fn objective(&self, kin: &[f64]) -> f64 {
        let q = [kin[0], kin[1], kin[2], kin[3]];
        let e = error_quaternion_unchecked(&q, &self.q_desired);
        let attitude = e[0] * e[0] + e[1] * e[1] + e[2] * e[2];
        let position: f64 = kin[4..]
            .iter()
            .zip(self.position_desired.iter())
            .map(|(p, d)| (p - d) * (p - d))
            .sum();
        attitude + position
    }

    fn project(&self, kin: &mut [f64]) {
        quaternion::normalize(&mut kin[..4]);
    }

    fn validate_kin(&self, kin: &[f64]) -> Result<()> {
        quaternion::ensure_unit(&[kin[0], kin[1], kin[2], kin[3]], "attitude")
    }

    fn velocity_labels(&self) -> Vec<String> {
        labels(&["omega_x", "omega_y", "omega_z", "v_x", "v_y", "v_z"])
    }

    fn kin_labels(&self) -> Vec<String> {
        labels(&["q1", "q2", "q3", "q4", "x", "y", "z"])
    }

    fn kin_template(&self) -> KinematicState {
        KinematicState::Attitude {
            q: [0.0, 0.0, 0.0, 1.0],
            position: [0.0; 3],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn table_inertia() -> RigidBodyParams {
        RigidBodyParams {
            inertia: [1.0, 2.0, 3.0],
            mass: 2.0,
        }
    }

    /// Cross product written out component by component.
    fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[1] * b[2] - a[2] * b[1],
            a[2] * b[0] - a[0] * b[2],
            a[0] * b[1] - a[1] * b[0],
        ]
    }

    #[test]
    fn zero_rate_has_zero_drift() {
        let f = rigid_body_drift(&table_inertia(), &Vec3::zeros(), &Vec3::new(1.0, -2.0, 3.0));
        assert_eq!(f, [0.0; 6]);
    }

    #[test]
    fn hand_computed_gyroscopic_term() {
        let f = rigid_body_drift(&table_inertia(), &Vec3::new(1.0, 1.0, 1.0), &Vec3::zeros());
        // Ω × 𝕀Ω = (1, −2, 1), so −𝕀⁻¹(Ω × 𝕀Ω) = (−1, 1, −1/3).
        assert_relative_eq!(f[0], -1.0, epsilon = 1e-15);
        assert_relative_eq!(f[1], 1.0, epsilon = 1e-15);
        assert_relative_eq!(f[2], -1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(&f[3..], &[0.0; 3]);
    }

    #[test]
    fn matches_brute_force_cross_product() {
        let p = table_inertia();
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..100 {
            let w: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let v: [f64; 3] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            let iw = [w[0] * p.inertia[0], w[1] * p.inertia[1], w[2] * p.inertia[2]];
            let g = cross(w, iw);
            let t = cross(w, v);
            let f = rigid_body_drift(&p, &vec3(w), &vec3(v));
            for i in 0..3 {
                assert_relative_eq!(f[i], -g[i] / p.inertia[i], epsilon = 1e-13);
                assert_relative_eq!(f[3 + i], -t[i] / p.mass, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn gyroscopic_term_does_no_work() {
        let inertia = vec3([1.0, 2.0, 3.0]);
        let mut rng = StdRng::seed_from_u64(2);
        for _ in 0..1000 {
            let w = Vec3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            );
            let power = w.dot(&w.cross(&inertia.component_mul(&w)));
            assert!(power.abs() < 1e-12, "{power}");
        }
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let p = RigidBodyParams {
            inertia: [1.0, 1.0, 1.0],
            mass: 0.0,
        };
        assert!(p.validate().is_err());
    }

    #[test]
    fn objective_vanishes_at_target() {
        let body = CustomRigidBody::new(table_inertia(), [0.0, 0.0, 0.0, 1.0], [1.0, 2.0, 3.0]).unwrap();
        assert_eq!(body.objective(&[0.0, 0.0, 0.0, 1.0, 1.0, 2.0, 3.0]), 0.0);
        assert!(body.objective(&[0.0, 0.0, 0.0, 1.0, 0.0, 2.0, 3.0]) > 0.0);
    }
}
