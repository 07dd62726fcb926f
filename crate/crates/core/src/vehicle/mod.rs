//! Physical model of a co-planar multicopter.
//!
//! Frames are north-east-down: the inertial z axis and the body z axis
//! point down, so gravity is `+g e₃` and rotor thrust acts along `−e₃` of
//! the body. Rotor speeds are rad/s internally.

mod dynamics;
mod effectiveness;
mod integrate;
mod params;

pub use dynamics::{
    dynamics_deriv, gamma1, gamma2, motor_deriv, rotation_matrix, wrap_angle, RigidBodyState,
    StateDerivative,
};
pub(crate) use dynamics::check_kinematics;
pub use effectiveness::{build_effectiveness, rotor_thrusts, EffectivenessMatrix, MotorState, Wrench};
pub use integrate::{step_rk4, PlantState};
pub use params::{HealthVector, RotorSpec, Spin, SpinConfig, VehicleParams};
