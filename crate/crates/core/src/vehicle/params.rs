use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::{Error, Result};

/// Rotor spin direction, seen from above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    /// Counter-clockwise, `P`, γ = +1.
    Ccw,
    /// Clockwise, `N`, γ = −1.
    Cw,
}

impl Spin {
    pub fn sign(self) -> f64 {
        match self {
            Spin::Ccw => 1.0,
            Spin::Cw => -1.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Spin::Ccw => 'P',
            Spin::Cw => 'N',
        }
    }
}

/// Spin directions of every rotor, in rotor order.
///
/// Parsed from strings such as `"PPNNPN"`: `P` marks a counter-clockwise
/// rotor and `N` a clockwise one.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig(Vec<Spin>);

impl SpinConfig {
    pub fn new(spins: Vec<Spin>) -> Self {
        SpinConfig(spins)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[Spin] {
        &self.0
    }
}

impl FromStr for SpinConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spins = s
            .trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c.to_ascii_uppercase() {
                'P' => Ok(Spin::Ccw),
                'N' => Ok(Spin::Cw),
                other => Err(Error::invalid(
                    "config",
                    format!("character {} is {other:?}, expected 'P' or 'N'", i + 1),
                )),
            })
            .collect::<Result<Vec<_>>>()?;
        if spins.is_empty() {
            return Err(Error::invalid("config", "empty configuration string"));
        }
        Ok(SpinConfig(spins))
    }
}

impl fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.letter()))
    }
}

/// Geometry of one rotor in the body x-y plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorSpec {
    /// Distance from the centre of gravity [m].
    pub arm: f64,
    /// Angle from the body x-axis [rad], kept in `[0, 2π)`.
    pub angle: f64,
    pub spin: Spin,
}

impl RotorSpec {
    pub fn new(arm: f64, angle: f64, spin: Spin) -> Result<Self> {
        if !(arm > 0.0 && arm.is_finite()) {
            return Err(Error::invalid("arm", format!("{arm} must be > 0")));
        }
        if !angle.is_finite() {
            return Err(Error::invalid("angle", "must be finite"));
        }
        Ok(RotorSpec {
            arm,
            angle: angle.rem_euclid(TAU),
            spin,
        })
    }

    /// Rotors numbered counter-clockwise at equal spacing,
    /// `δ_n = 2π n / N` for zero-based `n`.
    pub fn symmetric(config: &SpinConfig, arm: f64) -> Result<Vec<RotorSpec>> {
        let count = config.len() as f64;
        config
            .spins()
            .iter()
            .enumerate()
            .map(|(n, &spin)| RotorSpec::new(arm, TAU * n as f64 / count, spin))
            .collect()
    }
}

/// Physical description of a co-planar multicopter.
#[derive(Debug, Clone, PartialEq)]
pub struct VehicleParams {
    pub rotors: Vec<RotorSpec>,
    /// Mass [kg].
    pub mass: f64,
    /// Principal moments of inertia `(J_x, J_y, J_z)` [kg·m²].
    pub inertia: Vector3<f64>,
    /// Thrust factor κ_T [N·s²], `f = κ_T Ω²` with Ω in rad/s.
    pub thrust_factor: f64,
    /// Torque factor κ_μ [m], yaw moment per newton of thrust.
    pub torque_factor: f64,
    /// Translational drag factor κ_D [kg/m].
    pub drag_factor: f64,
    /// Rotational damping factor κ_R [N·m·s].
    pub rotational_damping: f64,
    /// Per-rotor thrust limit [N].
    pub max_thrust: f64,
    /// Motor first-order lag time constant [s].
    pub motor_time_constant: f64,
    /// Gravitational acceleration [m/s²].
    pub gravity: f64,
}

impl VehicleParams {
    /// Hexacopter used throughout the examples and default scenarios.
    ///
    /// Mass, inertia, arm length, torque factor and thrust limit follow a
    /// widely used 1.5 kg research hexacopter. The rotational damping is
    /// large enough that a yaw-uncontrolled vehicle settles to a spin of a
    /// few rad/s.
    pub fn hexacopter(config: &SpinConfig) -> Result<Self> {
        if config.len() != 6 {
            return Err(Error::Dimension {
                what: "hexacopter configuration string",
                expected: 6,
                got: config.len(),
            });
        }
        Self::symmetric(config)
    }

    /// The hexacopter's physical values on a symmetric layout with any
    /// number of rotors.
    pub fn symmetric(config: &SpinConfig) -> Result<Self> {
        let params = VehicleParams {
            rotors: RotorSpec::symmetric(config, 0.275)?,
            mass: 1.535,
            inertia: Vector3::new(0.0411, 0.0478, 0.0599),
            thrust_factor: 1.0e-5,
            torque_factor: 0.1,
            drag_factor: 0.05,
            rotational_damping: 0.2,
            max_thrust: 6.125,
            motor_time_constant: 0.02,
            gravity: 9.80,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn rotor_count(&self) -> usize {
        self.rotors.len()
    }

    pub fn spin_config(&self) -> SpinConfig {
        SpinConfig(self.rotors.iter().map(|r| r.spin).collect())
    }

    /// Weight `m·g` [N].
    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    /// Per-rotor thrust at hover with all rotors sharing the load equally.
    pub fn hover_thrust_per_rotor(&self) -> f64 {
        self.weight() / self.rotor_count() as f64
    }

    pub fn validate(&self) -> Result<()> {
        if self.rotors.len() < 4 {
            return Err(Error::invalid(
                "rotors",
                format!("{} rotors, at least 4 required", self.rotors.len()),
            ));
        }
        for (i, rotor) in self.rotors.iter().enumerate() {
            if !(rotor.arm > 0.0 && rotor.arm.is_finite()) {
                return Err(Error::invalid(format!("rotors[{}].arm", i + 1), "must be > 0"));
            }
        }
        let positive = [
            ("mass", self.mass),
            ("inertia.x", self.inertia.x),
            ("inertia.y", self.inertia.y),
            ("inertia.z", self.inertia.z),
            ("thrust_factor", self.thrust_factor),
            ("torque_factor", self.torque_factor),
            ("max_thrust", self.max_thrust),
            ("motor_time_constant", self.motor_time_constant),
            ("gravity", self.gravity),
        ];
        for (field, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::invalid(field, format!("{value} must be > 0")));
            }
        }
        for (field, value) in [
            ("drag_factor", self.drag_factor),
            ("rotational_damping", self.rotational_damping),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::invalid(field, format!("{value} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Binary per-rotor health, `true` for a working rotor.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HealthVector(Vec<bool>);

impl HealthVector {
    pub fn nominal(rotors: usize) -> Self {
        HealthVector(vec![true; rotors])
    }

    /// All rotors healthy except the zero-based indices in `failed`.
    pub fn with_failed(rotors: usize, failed: &[usize]) -> Result<Self> {
        let mut health = Self::nominal(rotors);
        for &n in failed {
            health.fail(n)?;
        }
        Ok(health)
    }

    pub fn from_flags(flags: Vec<bool>) -> Self {
        HealthVector(flags)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_healthy(&self, n: usize) -> bool {
        self.0[n]
    }

    /// ε_n as a number.
    pub fn factor(&self, n: usize) -> f64 {
        if self.0[n] {
            1.0
        } else {
            0.0
        }
    }

    pub fn fail(&mut self, n: usize) -> Result<()> {
        match self.0.get_mut(n) {
            Some(flag) => {
                *flag = false;
                Ok(())
            }
            None => Err(Error::invalid(
                "rotor",
                format!("index {} outside 1..={}", n + 1, self.0.len()),
            )),
        }
    }

    /// Zero-based indices of failed rotors, ascending.
    pub fn failed(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&n| !self.0[n]).collect()
    }

    pub fn healthy_count(&self) -> usize {
        self.0.iter().filter(|&&h| h).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.0
    }
}
