//! Drift, kinematics and objective measurement for the supported plants.
//!
//! Every plant is a second-order system `q̈ = f(q, q̇) + u` whose
//! configuration is never materialized directly: each keeps an auxiliary
//! kinematic state (quaternion, Euler triple, planar pose) propagated from the
//! generalized velocities, and the objective reads only that state.

use std::fmt::Debug;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::Result;

pub mod quadcopter;
pub mod quaternion;
pub mod rigid_body;
pub mod satellite;
pub mod unicycle;

pub use quadcopter::{euler_kinematics, quad_drift, quad_objective, Quadcopter, QuadcopterParams};
pub use quaternion::{error_quaternion, quaternion_kinematics, satellite_objective};
pub use rigid_body::{rigid_body_drift, CustomRigidBody, RigidBodyParams};
pub use satellite::{satellite_drift, satellite_input_map, Satellite, SatelliteParams};
pub use unicycle::{
    unicycle_drift, unicycle_kinematics, unicycle_objective, Unicycle, UnicycleParams,
};

pub type Vec3 = Vector3<f64>;

pub(crate) fn vec3(a: [f64; 3]) -> Vec3 {
    Vec3::new(a[0], a[1], a[2])
}

/// Auxiliary kinematic state read by the objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum KinematicState {
    /// Scalar-last unit quaternion `[Q1, Q2, Q3, Q4]`.
    Quaternion { q: [f64; 4] },
    /// 3-2-1 Euler angles `(ψ, θ, φ)` in rad.
    Euler { angles: [f64; 3] },
    /// Planar pose in m and rad.
    Pose { x: f64, y: f64, heading: f64 },
    /// Attitude quaternion plus inertial position, for the generic rigid body.
    Attitude { q: [f64; 4], position: [f64; 3] },
}

impl KinematicState {
    pub fn dim(&self) -> usize {
        match self {
            KinematicState::Quaternion { .. } => 4,
            KinematicState::Euler { .. } | KinematicState::Pose { .. } => 3,
            KinematicState::Attitude { .. } => 7,
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            KinematicState::Quaternion { q } => q.to_vec(),
            KinematicState::Euler { angles } => angles.to_vec(),
            KinematicState::Pose { x, y, heading } => vec![*x, *y, *heading],
            KinematicState::Attitude { q, position } => {
                q.iter().chain(position.iter()).copied().collect()
            }
        }
    }

    /// Same variant as `self`, filled from `values`.
    pub fn with_values(&self, v: &[f64]) -> Self {
        debug_assert_eq!(v.len(), self.dim());
        match self {
            KinematicState::Quaternion { .. } => KinematicState::Quaternion {
                q: [v[0], v[1], v[2], v[3]],
            },
            KinematicState::Euler { .. } => KinematicState::Euler {
                angles: [v[0], v[1], v[2]],
            },
            KinematicState::Pose { .. } => KinematicState::Pose {
                x: v[0],
                y: v[1],
                heading: v[2],
            },
            KinematicState::Attitude { .. } => KinematicState::Attitude {
                q: [v[0], v[1], v[2], v[3]],
                position: [v[4], v[5], v[6]],
            },
        }
    }

    /// Quaternion part, when the state carries one.
    pub fn quaternion(&self) -> Option<[f64; 4]> {
        match self {
            KinematicState::Quaternion { q } | KinematicState::Attitude { q, .. } => Some(*q),
            _ => None,
        }
    }
}

/// Black-box plant contract consumed by the controller and the averaging layer.
///
/// Slices follow the flat state layout: `kin` has `kin_dim()` entries,
/// `qdot` and drift outputs have `dof()` entries.
pub trait Plant: Send + Sync + Debug {
    fn name(&self) -> &str;

    /// Number of generalized velocities `n`.
    fn dof(&self) -> usize;

    fn kin_dim(&self) -> usize;

    /// Drift `f(q, q̇)`, written into `out`.
    fn drift(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]);

    /// Kinematic derivative driven by `qdot`; linear in `qdot` for every plant here.
    fn kinematics(&self, kin: &[f64], qdot: &[f64], out: &mut [f64]) -> Result<()>;

    fn objective(&self, kin: &[f64]) -> f64;

    /// Projects the kinematic state back onto its manifold after a step.
    fn project(&self, _kin: &mut [f64]) {}

    /// Rejects kinematic states outside the valid region.
    fn validate_kin(&self, _kin: &[f64]) -> Result<()> {
        Ok(())
    }

    fn velocity_labels(&self) -> Vec<String>;

    fn kin_labels(&self) -> Vec<String>;

    /// Minimum value of the objective; zero for every bundled plant.
    fn optimal_objective(&self) -> f64 {
        0.0
    }

    fn kin_template(&self) -> KinematicState;
}

pub(crate) fn labels(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
