//! Declarative scenario files.
//!
//! A scenario is a TOML document with a top-level run block, a `[plant]` table
//! selected by its `application` key and a `[controller]` table. Every field
//! carries its unit in the name.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{EscError, Result};
use crate::escvs::EscVsParams;
use crate::plants::{
    quaternion, CustomRigidBody, KinematicState, Plant, Quadcopter, QuadcopterParams, RigidBodyParams, Satellite,
    SatelliteParams, Unicycle, UnicycleParams,
};
use crate::sim::{SimOptions, SimState};

/// Initial quaternions may sit this far from unit norm; they are normalized at the start of a run.
pub const INITIAL_QUATERNION_TOLERANCE: f64 = 1e-3;

pub const APPLICATIONS: [&str; 4] = ["satellite", "quadcopter", "unicycle", "custom-rigid-body"];

const PRESETS: [(&str, &str); 3] = [
    ("satellite-table1", include_str!("../presets/satellite-table1.toml")),
    ("quadcopter-table2", include_str!("../presets/quadcopter-table2.toml")),
    ("unicycle-table3", include_str!("../presets/unicycle-table3.toml")),
];

/// Overrides the default output directory of the CLI.
pub const OUT_DIR_ENV: &str = "ESCVS_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub t_final_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default = "one")]
    pub decimate: usize,
    /// Horizon of the full-versus-averaged comparison; the run horizon when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare_t_final_s: Option<f64>,
    pub plant: PlantSpec,
    pub controller: ControllerSpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "application", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PlantSpec {
    Satellite {
        inertia_kg_m2: [f64; 3],
        rw_inertia_kg_m2: [f64; 3],
        damping_n_m_s: [f64; 3],
        q_desired: [f64; 4],
        q0: [f64; 4],
        omega0_rad_per_s: [f64; 3],
        omega_rw0_rad_per_s: [f64; 3],
    },
    Quadcopter {
        inertia_kg_m2: [f64; 3],
        rot_drag_n_m_s: [f64; 3],
        euler_desired_rad: [f64; 3],
        euler0_rad: [f64; 3],
        omega0_rad_per_s: [f64; 3],
    },
    Unicycle {
        d_v_per_s: f64,
        d_omega_per_s: f64,
        target_m: [f64; 2],
        position0_m: [f64; 2],
        #[serde(default)]
        heading0_rad: f64,
        v0_m_per_s: f64,
        omega0_rad_per_s: f64,
    },
    CustomRigidBody {
        inertia_kg_m2: [f64; 3],
        mass_kg: f64,
        q_desired: [f64; 4],
        position_desired_m: [f64; 3],
        q0: [f64; 4],
        position0_m: [f64; 3],
        omega0_rad_per_s: [f64; 3],
        v0_m_per_s: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub a: Vec<f64>,
    pub c: Vec<f64>,
    pub k: f64,
    pub omega_rad_per_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hpf_gain_per_s: Option<f64>,
    #[serde(default)]
    pub u_hat0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
}

fn check_initial_quaternion(q: &[f64; 4], field: &str) -> Result<()> {
    let n = quaternion::norm(q);
    if !n.is_finite() || (n - 1.0).abs() > INITIAL_QUATERNION_TOLERANCE {
        return Err(EscError::invalid(
            field,
            format!("norm {n} is not within {INITIAL_QUATERNION_TOLERANCE} of 1"),
        ));
    }
    Ok(())
}

fn finite(values: &[f64], field: &str) -> Result<()> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(EscError::invalid(field, "entries must be finite"));
    }
    Ok(())
}

impl PlantSpec {
    pub fn application(&self) -> &'static str {
        match self {
            PlantSpec::Satellite { .. } => "satellite",
            PlantSpec::Quadcopter { .. } => "quadcopter",
            PlantSpec::Unicycle { .. } => "unicycle",
            PlantSpec::CustomRigidBody { .. } => "custom-rigid-body",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Plant>> {
        Ok(match self {
            PlantSpec::Satellite {
                inertia_kg_m2,
                rw_inertia_kg_m2,
                damping_n_m_s,
                q_desired,
                ..
            } => Box::new(Satellite::new(SatelliteParams {
                inertia: *inertia_kg_m2,
                rw_inertia: *rw_inertia_kg_m2,
                damping: *damping_n_m_s,
                q_desired: *q_desired,
            })?),
            PlantSpec::Quadcopter {
                inertia_kg_m2,
                rot_drag_n_m_s,
                euler_desired_rad,
                ..
            } => {
                finite(euler_desired_rad, "euler_desired_rad")?;
                Box::new(Quadcopter::new(QuadcopterParams {
                    inertia: *inertia_kg_m2,
                    rot_drag: *rot_drag_n_m_s,
                    euler_desired: *euler_desired_rad,
                })?)
            }
            PlantSpec::Unicycle {
                d_v_per_s,
                d_omega_per_s,
                target_m,
                ..
            } => Box::new(Unicycle::new(UnicycleParams {
                d_v: *d_v_per_s,
                d_omega: *d_omega_per_s,
                target: *target_m,
            })?),
            PlantSpec::CustomRigidBody {
                inertia_kg_m2,
                mass_kg,
                q_desired,
                position_desired_m,
                ..
            } => Box::new(CustomRigidBody::new(
                RigidBodyParams {
                    inertia: *inertia_kg_m2,
                    mass: *mass_kg,
                },
                *q_desired,
                *position_desired_m,
            )?),
        })
    }

    /// Initial velocities and kinematic state.
    pub fn initial(&self) -> Result<(Vec<f64>, KinematicState)> {
        let (qdot, kin) = match self {
            PlantSpec::Satellite {
                q0,
                omega0_rad_per_s,
                omega_rw0_rad_per_s,
                ..
            } => {
                check_initial_quaternion(q0, "q0")?;
                let qdot = omega0_rad_per_s.iter().chain(omega_rw0_rad_per_s).copied().collect();
                (qdot, KinematicState::Quaternion { q: *q0 })
            }
            PlantSpec::Quadcopter {
                euler0_rad,
                omega0_rad_per_s,
                ..
            } => (omega0_rad_per_s.to_vec(), KinematicState::Euler { angles: *euler0_rad }),
            PlantSpec::Unicycle {
                position0_m,
                heading0_rad,
                v0_m_per_s,
                omega0_rad_per_s,
                ..
            } => (
                vec![*omega0_rad_per_s, *v0_m_per_s],
                KinematicState::Pose {
                    x: position0_m[0],
                    y: position0_m[1],
                    heading: *heading0_rad,
                },
            ),
            PlantSpec::CustomRigidBody {
                q0,
                position0_m,
                omega0_rad_per_s,
                v0_m_per_s,
                ..
            } => {
                check_initial_quaternion(q0, "q0")?;
                let qdot = omega0_rad_per_s.iter().chain(v0_m_per_s).copied().collect();
                (
                    qdot,
                    KinematicState::Attitude {
                        q: *q0,
                        position: *position0_m,
                    },
                )
            }
        };
        finite(&qdot, "initial velocities")?;
        finite(&kin.to_vec(), "initial kinematic state")?;
        Ok((qdot, kin))
    }
}

impl ControllerSpec {
    pub fn params(&self) -> Result<EscVsParams> {
        let params = EscVsParams {
            a: self.a.clone(),
            c: self.c.clone(),
            k: self.k,
            omega: self.omega_rad_per_s,
            hpf_gain: self.hpf_gain_per_s,
        };
        params.validate().map_err(|e| match e {
            EscError::InvalidParameter { field, reason } => EscError::InvalidParameter {
                field: match field.as_str() {
                    "omega" => "omega_rad_per_s".into(),
                    "hpf_gain" => "hpf_gain_per_s".into(),
                    _ => field,
                },
                reason,
            },
            other => other,
        })?;
        Ok(params)
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_final_s > 0.0 && self.t_final_s.is_finite()) {
            return Err(EscError::invalid("t_final_s", "must be positive"));
        }
        if let Some(dt) = self.dt_s {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(EscError::invalid("dt_s", "must be positive"));
            }
        }
        if let Some(t) = self.compare_t_final_s {
            if !(t > 0.0 && t.is_finite()) {
                return Err(EscError::invalid("compare_t_final_s", "must be positive"));
            }
        }
        if self.decimate == 0 {
            return Err(EscError::invalid("decimate", "must be at least 1"));
        }
        let plant = self.plant.build()?;
        let params = self.controller.params()?;
        params.validate_for(plant.as_ref())?;
        self.plant.initial()?;
        if self.controller.h0.is_some() && self.controller.hpf_gain_per_s.is_none() {
            return Err(EscError::invalid("h0", "filter state given without hpf_gain_per_s"));
        }
        for (v, field) in [(self.controller.u_hat0, "u_hat0"), (self.controller.h0.unwrap_or(0.0), "h0")] {
            if !v.is_finite() {
                return Err(EscError::invalid(field, "must be finite"));
            }
        }
        if let Some(dt) = self.dt_s {
            crate::sim::check_resolution(dt, params.omega)?;
        }
        Ok(())
    }

    pub fn build_plant(&self) -> Result<Box<dyn Plant>> {
        self.plant.build()
    }

    pub fn params(&self) -> Result<EscVsParams> {
        self.controller.params()
    }

    pub fn initial_state(&self) -> Result<SimState> {
        let (qdot, kin) = self.plant.initial()?;
        let h = self
            .controller
            .hpf_gain_per_s
            .map(|_| self.controller.h0.unwrap_or(0.0));
        Ok(SimState {
            qdot,
            kin,
            u_hat: self.controller.u_hat0,
            h,
        })
    }

    pub fn compare_horizon(&self) -> f64 {
        self.compare_t_final_s.unwrap_or(self.t_final_s)
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions {
            dt: self.dt_s,
            decimate: self.decimate,
        }
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| EscError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        if let Some(app) = table
            .get("plant")
            .and_then(|p| p.get("application"))
            .and_then(|a| a.as_str())
        {
            if !APPLICATIONS.contains(&app) {
                return Err(EscError::UnknownApplication(app.into()));
            }
        }
        let scenario: Scenario = toml::from_str(text).map_err(|e| EscError::Parse {
            path: origin.into(),
            message: e.to_string(),
        })?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario fields are always representable in TOML")
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EscError::io(path, e))?;
    Scenario::from_toml_str(&text, &path.display().to_string())
}

pub fn write_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, scenario.to_toml_string()).map_err(|e| EscError::io(path, e))
}

pub fn preset_names() -> impl Iterator<Item = &'static str> {
    PRESETS.iter().map(|(n, _)| *n)
}

/// Source text of a bundled preset.
pub fn preset_source(name: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn preset(name: &str) -> Result<Scenario> {
    let text = preset_source(name).ok_or_else(|| {
        EscError::Usage(format!(
            "unknown preset `{name}` (available: {})",
            preset_names().collect::<Vec<_>>().join(", ")
        ))
    })?;
    Scenario::from_toml_str(text, name)
}

/// Loads `arg` as a file when it exists, otherwise as a preset name.
pub fn resolve(arg: &str) -> Result<Scenario> {
    let path = Path::new(arg);
    if path.exists() {
        return load_scenario(path);
    }
    if preset_source(arg).is_some() {
        return preset(arg);
    }
    Err(EscError::io(
        path,
        std::io::Error::new(std::io::ErrorKind::NotFound, "no such scenario file or preset"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_load() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            assert_eq!(s.name, name);
        }
    }

    #[test]
    fn unicycle_preset_matches_table() {
        let s = preset("unicycle-table3").unwrap();
        match &s.plant {
            PlantSpec::Unicycle {
                d_v_per_s,
                d_omega_per_s,
                target_m,
                position0_m,
                v0_m_per_s,
                omega0_rad_per_s,
                ..
            } => {
                assert_eq!((*d_v_per_s, *d_omega_per_s), (0.2, 0.1));
                assert_eq!(*target_m, [1.0, 1.0]);
                assert_eq!(*position0_m, [2.0, 2.0]);
                assert_eq!((*v0_m_per_s, *omega0_rad_per_s), (0.0, 3.0));
            }
            other => panic!("{other:?}"),
        }
        let c = &s.controller;
        assert_eq!(c.a, vec![1e-4, 1e-2]);
        assert_eq!(c.c, vec![1.0, 6.0]);
        assert_eq!((c.k, c.hpf_gain_per_s, c.omega_rad_per_s), (5.0, Some(1.0), 20.0));
    }

    #[test]
    fn satellite_preset_matches_table() {
        let s = preset("satellite-table1").unwrap();
        match &s.plant {
            PlantSpec::Satellite {
                inertia_kg_m2,
                rw_inertia_kg_m2,
                damping_n_m_s,
                q_desired,
                q0,
                omega0_rad_per_s,
                omega_rw0_rad_per_s,
            } => {
                assert_eq!(*inertia_kg_m2, [1.0, 2.0, 3.0]);
                assert_eq!(*rw_inertia_kg_m2, [0.005; 3]);
                assert_eq!(*damping_n_m_s, [0.2, 0.4, 0.6]);
                assert_eq!(*q_desired, [0.0, 0.0, 0.0, 1.0]);
                assert_eq!(*q0, [0.57, 0.57, 0.57, 0.159]);
                assert_eq!(*omega0_rad_per_s, [0.01; 3]);
                assert_eq!(*omega_rw0_rad_per_s, [0.0; 3]);
            }
            other => panic!("{other:?}"),
        }
        let c = &s.controller;
        assert_eq!(c.a, vec![1e-5, 3e-5, 4e-5, -2e-3, -6e-3, -8e-3]);
        assert_eq!(c.c, vec![4.05, 4.1, 2.7667, -810.0, -1640.0, -1660.0]);
        assert_eq!((c.k, c.hpf_gain_per_s, c.omega_rad_per_s), (4.84375, Some(2.26), 30.0));
        assert_eq!((c.u_hat0, c.h0), (0.0, Some(0.0)));
    }

    #[test]
    fn quadcopter_preset_matches_table() {
        let s = preset("quadcopter-table2").unwrap();
        match &s.plant {
            PlantSpec::Quadcopter {
                inertia_kg_m2,
                rot_drag_n_m_s,
                euler_desired_rad,
                euler0_rad,
                omega0_rad_per_s,
            } => {
                assert_eq!(*inertia_kg_m2, [0.0075, 0.0075, 0.013]);
                assert_eq!(*rot_drag_n_m_s, [0.1, 0.1, 0.15]);
                assert_eq!(*euler_desired_rad, [0.0; 3]);
                assert_eq!(*euler0_rad, [0.1745, 0.2618, 0.2094]);
                assert_eq!(*omega0_rad_per_s, [0.0; 3]);
            }
            other => panic!("{other:?}"),
        }
        let c = &s.controller;
        assert_eq!(c.a, vec![0.000005, 0.0000075, 0.0000085]);
        assert_eq!(c.c, vec![0.07525, 0.238, 0.149]);
        assert_eq!((c.k, c.hpf_gain_per_s, c.omega_rad_per_s), (3.8, None, 20.0));
        assert!(s.initial_state().unwrap().h.is_none());
    }

    #[test]
    fn round_trip() {
        for name in preset_names() {
            let s = preset(name).unwrap();
            let again = Scenario::from_toml_str(&s.to_toml_string(), "round-trip").unwrap();
            assert_eq!(s, again);
        }
    }

    #[test]
    fn zero_omega_names_the_field() {
        let text = preset_source("unicycle-table3")
            .unwrap()
            .replace("omega_rad_per_s = 20.0", "omega_rad_per_s = 0.0");
        match Scenario::from_toml_str(&text, "t") {
            Err(EscError::InvalidParameter { field, .. }) => assert!(field.contains("omega"), "{field}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_application() {
        let text = preset_source("unicycle-table3")
            .unwrap()
            .replace("application = \"unicycle\"", "application = \"blimp\"");
        assert!(matches!(
            Scenario::from_toml_str(&text, "t"),
            Err(EscError::UnknownApplication(a)) if a == "blimp"
        ));
    }

    #[test]
    fn parse_errors_carry_location() {
        let text = preset_source("unicycle-table3").unwrap().replace("k = 5.0", "k = \"five\"");
        match Scenario::from_toml_str(&text, "t") {
            Err(EscError::Parse { message, .. }) => assert!(message.contains("line"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn mismatched_gain_length_is_rejected() {
        let text = preset_source("unicycle-table3")
            .unwrap()
            .replace("c = [1.0, 6.0]", "c = [1.0, 6.0, 2.0]");
        assert!(matches!(
            Scenario::from_toml_str(&text, "t"),
            Err(EscError::InvalidParameter { .. })
        ));
    }

    #[test]
    fn far_from_unit_initial_quaternion_is_rejected() {
        let text = preset_source("satellite-table1")
            .unwrap()
            .replace("q0 = [0.57, 0.57, 0.57, 0.159]", "q0 = [0.6, 0.6, 0.6, 0.2]");
        assert!(matches!(
            Scenario::from_toml_str(&text, "t"),
            Err(EscError::InvalidParameter { field, .. }) if field == "q0"
        ));
    }
}
