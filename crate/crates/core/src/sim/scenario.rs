//! Scenario description: everything one closed-loop run needs.
//!
//! Every section except `[vehicle]` and `[trajectory]` may be omitted.
//! Omitted vehicle fields take the values of
//! [`VehicleParams::symmetric`], omitted estimated
//! parameters match the true vehicle.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

use super::trajectory::TrajectoryConfig;
use crate::allocation::AllocatorConfig;
use crate::controller::{EstimatedParams, Gains};
use crate::fdi::FdiConfig;
use crate::vehicle::{RotorSpec, SpinConfig, VehicleParams};
use crate::{Error, Result};

/// Rotor geometry and physics. Rotors sit on a symmetric layout, rotor 1
/// on the body x-axis and the rest spaced counter-clockwise seen from above.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleSection {
    /// Spin pattern, one letter per rotor: `P` counter-clockwise, `N`
    /// clockwise.
    pub config: String,
    /// Rotor count; must equal the length of `config` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotors: Option<usize>,
    /// Arm length [m].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arm: Option<f64>,
    /// Mass [kg].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    /// Principal inertia `[Jx, Jy, Jz]` [kg m²].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[f64; 3]>,
    /// κ_T [N s²].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thrust_factor: Option<f64>,
    /// κ_μ, yaw torque per unit thrust [m].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_factor: Option<f64>,
    /// κ_D [N s/m].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_factor: Option<f64>,
    /// κ_R [N m s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotational_damping: Option<f64>,
    /// F_max per rotor [N].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_thrust: Option<f64>,
    /// Motor lag time constant [s].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motor_time_constant: Option<f64>,
    /// [m/s²].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
}

impl VehicleSection {
    pub fn with_config(config: &str) -> Self {
        VehicleSection {
            config: config.to_owned(),
            rotors: None,
            arm: None,
            mass: None,
            inertia: None,
            thrust_factor: None,
            torque_factor: None,
            drag_factor: None,
            rotational_damping: None,
            max_thrust: None,
            motor_time_constant: None,
            gravity: None,
        }
    }

    pub fn params(&self) -> Result<VehicleParams> {
        self.build().map_err(|e| match e {
            Error::InvalidParameter { field, reason } if !field.starts_with("vehicle.") => {
                Error::invalid(format!("vehicle.{field}"), reason)
            }
            other => other,
        })
    }

    fn build(&self) -> Result<VehicleParams> {
        let config: SpinConfig = self
            .config
            .parse()
            .map_err(|e: Error| Error::invalid("vehicle.config", e.to_string()))?;
        if let Some(n) = self.rotors {
            if n != config.len() {
                return Err(Error::invalid(
                    "vehicle.config",
                    format!("has {} letters but vehicle.rotors = {n}", config.len()),
                ));
            }
        }
        let mut p = VehicleParams::symmetric(&config)?;
        if let Some(arm) = self.arm {
            p.rotors = RotorSpec::symmetric(&config, arm)?;
        }
        let set = |slot: &mut f64, value: Option<f64>| {
            if let Some(v) = value {
                *slot = v;
            }
        };
        set(&mut p.mass, self.mass);
        set(&mut p.thrust_factor, self.thrust_factor);
        set(&mut p.torque_factor, self.torque_factor);
        set(&mut p.drag_factor, self.drag_factor);
        set(&mut p.rotational_damping, self.rotational_damping);
        set(&mut p.max_thrust, self.max_thrust);
        set(&mut p.motor_time_constant, self.motor_time_constant);
        set(&mut p.gravity, self.gravity);
        if let Some(j) = self.inertia {
            p.inertia = Vector3::from(j);
        }
        p.validate()?;
        Ok(p)
    }
}

fn default_separation() -> f64 {
    4.0
}

/// Loop gains [1/s], each `[x, y, z]` or `[φ, θ, ψ]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attitude: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    /// Minimum ratio between adjacent inner loops.
    #[serde(default = "default_separation")]
    pub separation: f64,
}

impl Default for GainSection {
    fn default() -> Self {
        GainSection {
            rate: None,
            attitude: None,
            velocity: None,
            position: None,
            separation: default_separation(),
        }
    }
}

impl GainSection {
    pub fn gains(&self) -> Result<Gains> {
        let d = Gains::default();
        let pick = |v: Option<[f64; 3]>, fallback| v.map_or(fallback, Vector3::from);
        let g = Gains {
            rate: pick(self.rate, d.rate),
            attitude: pick(self.attitude, d.attitude),
            velocity: pick(self.velocity, d.velocity),
            position: pick(self.position, d.position),
        };
        g.validate(self.separation)?;
        Ok(g)
    }
}

/// Parameters the controller believes; omitted fields copy the vehicle.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatedSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mass: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rotational_damping: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drag_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<f64>,
}

impl EstimatedSection {
    pub fn estimated(&self, params: &VehicleParams) -> Result<EstimatedParams> {
        let m = EstimatedParams::matched(params);
        let e = EstimatedParams {
            mass: self.mass.unwrap_or(m.mass),
            inertia: self.inertia.map_or(m.inertia, Vector3::from),
            rotational_damping: self.rotational_damping.unwrap_or(m.rotational_damping),
            drag_factor: self.drag_factor.unwrap_or(m.drag_factor),
            gravity: self.gravity.unwrap_or(m.gravity),
        };
        e.validate()?;
        Ok(e)
    }
}

fn default_regularization() -> f64 {
    1e-9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocatorSection {
    /// Diagonal of W, one entry per rotor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

impl Default for AllocatorSection {
    fn default() -> Self {
        AllocatorSection {
            weights: None,
            regularization: default_regularization(),
            max_iter: None,
        }
    }
}

impl AllocatorSection {
    pub fn config(&self, rotors: usize) -> Result<AllocatorConfig> {
        let cfg = AllocatorConfig {
            weights: self.weights.as_ref().map(|w| DVector::from_column_slice(w)),
            regularization: self.regularization,
            max_iter: self.max_iter,
        };
        cfg.validate(rotors)?;
        Ok(cfg)
    }
}

fn default_start_time() -> f64 {
    2.0
}

fn default_persistence() -> u32 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FdiSection {
    /// Residual threshold [N]; default a quarter of the hover thrust per
    /// rotor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    /// [s].
    #[serde(default = "default_start_time")]
    pub start_time: f64,
    /// Consecutive samples over threshold before latching.
    #[serde(default = "default_persistence")]
    pub persistence: u32,
}

impl Default for FdiSection {
    fn default() -> Self {
        FdiSection {
            threshold: None,
            start_time: default_start_time(),
            persistence: default_persistence(),
        }
    }
}

impl FdiSection {
    pub fn config(&self, params: &VehicleParams) -> Result<FdiConfig> {
        let d = FdiConfig::for_hover_thrust(params.hover_thrust_per_rotor());
        let cfg = FdiConfig {
            threshold: self.threshold.unwrap_or(d.threshold),
            start_time: self.start_time,
            persistence: self.persistence,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// A rotor stops producing thrust at `t_inject` and stays failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultEvent {
    /// [s].
    pub t_inject: f64,
    /// Zero-based here, one-based in files.
    #[serde(with = "one_based")]
    pub rotor: usize,
}

mod one_based {
    use serde::{de, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(rotor: &usize, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(*rotor as u64 + 1)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<usize, D::Error> {
        let n = u64::deserialize(d)?;
        if n == 0 {
            return Err(de::Error::custom("rotors are numbered from 1"));
        }
        Ok(n as usize - 1)
    }
}

fn default_dt() -> f64 {
    1e-3
}

fn default_divisor() -> u32 {
    2
}

fn default_depth() -> usize {
    2
}

fn default_crash_angle() -> f64 {
    85.0
}

fn default_ground_tolerance() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    /// Plant step [s].
    #[serde(default = "default_dt")]
    pub dt: f64,
    /// Plant steps per control and FDI step.
    #[serde(default = "default_divisor")]
    pub control_divisor: u32,
    /// Run length [s].
    pub duration: f64,
    /// Seed for the thrust measurement noise.
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation of the thrust measurement noise [N].
    #[serde(default)]
    pub thrust_noise: f64,
    /// Failure sets up to this size are analysed before the run.
    #[serde(default = "default_depth")]
    pub reduction_depth: usize,
    /// Roll or pitch magnitude that ends the run [deg].
    #[serde(default = "default_crash_angle")]
    pub crash_angle_deg: f64,
    /// How far below the ground the vehicle may sink before the run ends
    /// [m].
    #[serde(default = "default_ground_tolerance")]
    pub ground_tolerance: f64,
}

impl SimConfig {
    pub fn new(duration: f64) -> Self {
        SimConfig {
            dt: default_dt(),
            control_divisor: default_divisor(),
            duration,
            seed: 0,
            thrust_noise: 0.0,
            reduction_depth: default_depth(),
            crash_angle_deg: default_crash_angle(),
            ground_tolerance: default_ground_tolerance(),
        }
    }

    pub fn control_period(&self) -> f64 {
        self.dt * f64::from(self.control_divisor)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid("sim.dt", "must be > 0"));
        }
        if self.control_divisor == 0 {
            return Err(Error::invalid("sim.control_divisor", "must be >= 1"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("sim.duration", "must be > 0"));
        }
        if !(self.thrust_noise >= 0.0 && self.thrust_noise.is_finite()) {
            return Err(Error::invalid("sim.thrust_noise", "must be >= 0"));
        }
        if !(self.crash_angle_deg > 0.0 && self.crash_angle_deg < 90.0) {
            return Err(Error::invalid("sim.crash_angle_deg", "must be in (0, 90)"));
        }
        if !(self.ground_tolerance >= 0.0) {
            return Err(Error::invalid("sim.ground_tolerance", "must be >= 0"));
        }
        Ok(())
    }
}

/// Where the CLI writes results, relative to `--out`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svg: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub vehicle: VehicleSection,
    #[serde(default)]
    pub gains: GainSection,
    #[serde(default)]
    pub estimated: EstimatedSection,
    #[serde(default)]
    pub allocator: AllocatorSection,
    #[serde(default)]
    pub fdi: FdiSection,
    pub trajectory: TrajectoryConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultEvent>,
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputSection,
}

/// A scenario with every section resolved into model types.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub params: VehicleParams,
    pub gains: Gains,
    pub estimated: EstimatedParams,
    pub allocator: AllocatorConfig,
    pub fdi: FdiConfig,
}

impl Scenario {
    /// Checks every section and builds the model types.
    pub fn resolve(&self) -> Result<ResolvedScenario> {
        let params = self.vehicle.params()?;
        let n = params.rotor_count();
        self.sim.validate()?;
        super::trajectory::ReferenceProfile::new(&self.trajectory)?;
        for (i, fault) in self.faults.iter().enumerate() {
            if !(fault.t_inject >= 0.0 && fault.t_inject.is_finite()) {
                return Err(Error::invalid(format!("faults[{i}].t_inject"), "must be >= 0"));
            }
            if fault.rotor >= n {
                return Err(Error::invalid(
                    format!("faults[{i}].rotor"),
                    format!("{} is outside 1..={n}", fault.rotor + 1),
                ));
            }
        }
        Ok(ResolvedScenario {
            gains: self.gains.gains()?,
            estimated: self.estimated.estimated(&params)?,
            allocator: self.allocator.config(n)?,
            fdi: self.fdi.config(&params)?,
            params,
        })
    }
}
