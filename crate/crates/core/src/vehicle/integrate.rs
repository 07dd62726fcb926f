use nalgebra::DVector;

use super::{
    build_effectiveness, dynamics::wrap_angle, dynamics_deriv, motor_deriv, rotor_thrusts,
    EffectivenessMatrix, HealthVector, MotorState, RigidBodyState, VehicleParams, Wrench,
};
use crate::{Error, Result};

/// Rigid body plus rotor speeds, integrated together.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub body: RigidBodyState,
    pub motor: MotorState,
}

impl PlantState {
    /// Wrench currently produced by the rotors.
    pub fn wrench(&self, params: &VehicleParams, health: &HealthVector) -> Result<Wrench> {
        let b = build_effectiveness(params, health)?;
        Ok(b.apply(&rotor_thrusts(&self.motor, params, health)))
    }

    fn to_vector(&self) -> DVector<f64> {
        let n = self.motor.0.len();
        let mut x = DVector::zeros(12 + n);
        self.body.to_slice(&mut x.as_mut_slice()[..12]);
        x.rows_mut(12, n).copy_from(&self.motor.0);
        x
    }

    fn from_vector(x: &DVector<f64>) -> Self {
        let n = x.len() - 12;
        PlantState {
            body: RigidBodyState::from_slice(&x.as_slice()[..12]),
            motor: MotorState(x.rows(12, n).into_owned()),
        }
    }
}

fn coupled_deriv(
    x: &DVector<f64>,
    command: &DVector<f64>,
    b: &EffectivenessMatrix,
    health: &HealthVector,
    params: &VehicleParams,
) -> Result<DVector<f64>> {
    let plant = PlantState::from_vector(x);
    let wrench = b.apply(&rotor_thrusts(&plant.motor, params, health));
    let d = dynamics_deriv(&plant.body, wrench.thrust, &wrench.moment(), params)?;
    let n = plant.motor.0.len();
    let mut out = DVector::zeros(12 + n);
    out.rows_mut(0, 3).copy_from(&d.position);
    out.rows_mut(3, 3).copy_from(&d.velocity);
    out.rows_mut(6, 3).copy_from(&d.attitude);
    out.rows_mut(9, 3).copy_from(&d.rates);
    out.rows_mut(12, n)
        .copy_from(&motor_deriv(&plant.motor.0, command, params.motor_time_constant));
    Ok(out)
}

/// One classical fourth-order Runge-Kutta step of the coupled rigid-body
/// and motor-lag dynamics, holding `command` constant over the step.
pub fn step_rk4(
    plant: &PlantState,
    command: &DVector<f64>,
    health: &HealthVector,
    params: &VehicleParams,
    dt: f64,
) -> Result<PlantState> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("{dt} must be > 0")));
    }
    let n = params.rotor_count();
    if plant.motor.0.len() != n || command.len() != n {
        return Err(Error::Dimension {
            what: "motor vector length",
            expected: n,
            got: plant.motor.0.len().min(command.len()),
        });
    }
    let b = build_effectiveness(params, health)?;
    let x = plant.to_vector();
    let k1 = coupled_deriv(&x, command, &b, health, params)?;
    let k2 = coupled_deriv(&(&x + &k1 * (dt / 2.0)), command, &b, health, params)?;
    let k3 = coupled_deriv(&(&x + &k2 * (dt / 2.0)), command, &b, health, params)?;
    let k4 = coupled_deriv(&(&x + &k3 * dt), command, &b, health, params)?;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let mut out = PlantState::from_vector(&next);
    out.body.attitude.z = wrap_angle(out.body.attitude.z);
    Ok(out)
}
