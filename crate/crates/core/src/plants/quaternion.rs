//! Scalar-last quaternion helpers: `Q = [Q1, Q2, Q3, Q4]` with `Q4` the scalar part.

use nalgebra::Matrix3;

use super::Vec3;
use crate::error::{EscError, Result};

/// Accepted deviation of `|Q|` from one at operation boundaries.
pub const UNIT_TOLERANCE: f64 = 1e-6;

pub fn norm(q: &[f64; 4]) -> f64 {
    q.iter().map(|c| c * c).sum::<f64>().sqrt()
}

pub fn normalize(q: &mut [f64]) {
    let n = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if n > 0.0 && n.is_finite() {
        q.iter_mut().for_each(|c| *c /= n);
    }
}

pub(crate) fn ensure_unit(q: &[f64; 4], what: &str) -> Result<()> {
    let n = norm(q);
    if (n - 1.0).abs() > UNIT_TOLERANCE || !n.is_finite() {
        return Err(EscError::StateCorruption(format!(
            "{what} quaternion has norm {n}, expected 1 within {UNIT_TOLERANCE}"
        )));
    }
    Ok(())
}

/// `Q̇ = ½ E(Q) Ω` without the unit-norm check.
pub fn quaternion_rate(q: &[f64; 4], omega: &Vec3) -> [f64; 4] {
    let [q1, q2, q3, q4] = *q;
    let (w1, w2, w3) = (omega.x, omega.y, omega.z);
    [
        0.5 * (q4 * w1 - q3 * w2 + q2 * w3),
        0.5 * (q3 * w1 + q4 * w2 - q1 * w3),
        0.5 * (-q2 * w1 + q1 * w2 + q4 * w3),
        0.5 * (-q1 * w1 - q2 * w2 - q3 * w3),
    ]
}

/// Attitude kinematics for a body-frame angular velocity.
pub fn quaternion_kinematics(q: &[f64; 4], omega: &Vec3) -> Result<[f64; 4]> {
    ensure_unit(q, "attitude")?;
    Ok(quaternion_rate(q, omega))
}

pub(crate) fn error_quaternion_unchecked(q: &[f64; 4], qd: &[f64; 4]) -> [f64; 4] {
    let [q1, q2, q3, q4] = *q;
    let [d1, d2, d3, d4] = *qd;
    [
        d4 * q1 + d3 * q2 - d2 * q3 - d1 * q4,
        -d3 * q1 + d4 * q2 + d1 * q3 - d2 * q4,
        d2 * q1 - d1 * q2 + d4 * q3 - d3 * q4,
        d1 * q1 + d2 * q2 + d3 * q3 + d4 * q4,
    ]
}

/// Error quaternion between the current attitude `q` and the desired `q_desired`.
pub fn error_quaternion(q: &[f64; 4], q_desired: &[f64; 4]) -> Result<[f64; 4]> {
    ensure_unit(q, "attitude")?;
    ensure_unit(q_desired, "desired")?;
    Ok(error_quaternion_unchecked(q, q_desired))
}

/// `J = Qe1² + Qe2² + Qe3²`.
pub fn satellite_objective(q: &[f64; 4], q_desired: &[f64; 4]) -> f64 {
    let e = error_quaternion_unchecked(q, q_desired);
    e[0] * e[0] + e[1] * e[1] + e[2] * e[2]
}

/// Body-to-inertial rotation matrix consistent with `quaternion_rate`.
pub fn rotation_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let [x, y, z, w] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - z * w),
        2.0 * (x * z + y * w),
        2.0 * (x * y + z * w),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - x * w),
        2.0 * (x * z - y * w),
        2.0 * (y * z + x * w),
        1.0 - 2.0 * (x * x + y * y),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_unit(rng: &mut StdRng) -> [f64; 4] {
        let mut q = [0.0; 4];
        for c in q.iter_mut() {
            *c = rng.random_range(-1.0..1.0);
        }
        normalize(&mut q);
        q
    }

    #[test]
    fn zero_rate_gives_zero_derivative() {
        let q = [0.5, 0.5, 0.5, 0.5];
        assert_eq!(quaternion_kinematics(&q, &Vec3::zeros()).unwrap(), [0.0; 4]);
    }

    #[test]
    fn identity_attitude_row_read() {
        let q = [0.0, 0.0, 0.0, 1.0];
        let dq = quaternion_kinematics(&q, &Vec3::new(0.8, 0.0, 0.0)).unwrap();
        assert_eq!(dq, [0.4, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn flow_is_tangent_to_the_unit_sphere() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..1000 {
            let q = random_unit(&mut rng);
            let w = Vec3::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let dq = quaternion_kinematics(&q, &w).unwrap();
            let dot: f64 = q.iter().zip(dq.iter()).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-12, "Q·Q̇ = {dot}");
        }
    }

    #[test]
    fn non_unit_input_is_rejected() {
        let q = [0.0, 0.0, 0.0, 1.01];
        assert!(matches!(
            quaternion_kinematics(&q, &Vec3::zeros()),
            Err(EscError::StateCorruption(_))
        ));
        assert!(error_quaternion(&q, &[0.0, 0.0, 0.0, 1.0]).is_err());
    }

    #[test]
    fn identity_desired_reduces_to_input() {
        let mut rng = StdRng::seed_from_u64(11);
        let q = random_unit(&mut rng);
        let e = error_quaternion(&q, &[0.0, 0.0, 0.0, 1.0]).unwrap();
        for i in 0..4 {
            assert_relative_eq!(e[i], q[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn matching_attitude_has_zero_vector_error() {
        let mut rng = StdRng::seed_from_u64(3);
        let q = random_unit(&mut rng);
        let e = error_quaternion(&q, &q).unwrap();
        for c in &e[..3] {
            assert!(c.abs() < 1e-15);
        }
        assert_relative_eq!(e[3].abs(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn error_quaternion_is_unit() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..1000 {
            let e = error_quaternion(&random_unit(&mut rng), &random_unit(&mut rng)).unwrap();
            assert!((norm(&e) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn satellite_objective_examples() {
        let qd = [0.0, 0.0, 0.0, 1.0];
        assert_eq!(satellite_objective(&qd, &qd), 0.0);
        let q0 = [0.57, 0.57, 0.57, 0.159];
        assert_relative_eq!(satellite_objective(&q0, &qd), 0.9747, epsilon = 1e-12);
        let neg = q0.map(|c| -c);
        assert_eq!(satellite_objective(&neg, &qd), satellite_objective(&q0, &qd));
    }

    #[test]
    fn rotation_matrix_is_consistent_with_kinematics() {
        // d/dt R = R [Ω]×, so (R(q + ε q̇) − R(q)) / ε ≈ R [Ω]×.
        let mut rng = StdRng::seed_from_u64(19);
        let q = random_unit(&mut rng);
        let w = Vec3::new(0.3, -0.7, 1.1);
        let dq = quaternion_rate(&q, &w);
        let eps = 1e-7;
        let qp: [f64; 4] = std::array::from_fn(|i| q[i] + eps * dq[i]);
        let qm: [f64; 4] = std::array::from_fn(|i| q[i] - eps * dq[i]);
        let d_r = (rotation_matrix(&qp) - rotation_matrix(&qm)) / (2.0 * eps);
        let expected = rotation_matrix(&q) * w.cross_matrix();
        assert!((d_r - expected).abs().max() < 1e-7);
        let r = rotation_matrix(&q);
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
    }
}
