use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{DVector, Matrix3, Rotation3, Vector3};

use super::VehicleParams;
use crate::{Error, Result};

/// Kinematics are rejected when roll or pitch come this close to ±π/2.
const SINGULARITY_MARGIN: f64 = 1e-9;

/// Rigid-body state in a north-east-down inertial frame.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RigidBodyState {
    /// Inertial position [m]; altitude is `-position.z`.
    pub position: Vector3<f64>,
    /// Inertial velocity [m/s].
    pub velocity: Vector3<f64>,
    /// ZYX Euler angles `(φ, θ, ψ)` [rad].
    pub attitude: Vector3<f64>,
    /// Body rates `(p, q, r)` [rad/s].
    pub rates: Vector3<f64>,
}

impl RigidBodyState {
    pub fn at_rest(position: Vector3<f64>, heading: f64) -> Self {
        RigidBodyState {
            position,
            attitude: Vector3::new(0.0, 0.0, wrap_angle(heading)),
            ..Default::default()
        }
    }

    pub fn altitude(&self) -> f64 {
        -self.position.z
    }

    pub fn is_finite(&self) -> bool {
        [self.position, self.velocity, self.attitude, self.rates]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    pub(crate) fn to_slice(self, out: &mut [f64]) {
        out[0..3].copy_from_slice(self.position.as_slice());
        out[3..6].copy_from_slice(self.velocity.as_slice());
        out[6..9].copy_from_slice(self.attitude.as_slice());
        out[9..12].copy_from_slice(self.rates.as_slice());
    }

    pub(crate) fn from_slice(s: &[f64]) -> Self {
        RigidBodyState {
            position: Vector3::new(s[0], s[1], s[2]),
            velocity: Vector3::new(s[3], s[4], s[5]),
            attitude: Vector3::new(s[6], s[7], s[8]),
            rates: Vector3::new(s[9], s[10], s[11]),
        }
    }
}

/// Time derivative of [`RigidBodyState`], field for field.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub attitude: Vector3<f64>,
    pub rates: Vector3<f64>,
}

/// Wraps an angle to `[-π, π)`.
pub fn wrap_angle(angle: f64) -> f64 {
    (angle + PI).rem_euclid(TAU) - PI
}

/// Body-to-inertial rotation, `R = R_z(ψ) R_y(θ) R_x(φ)`.
pub fn rotation_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    Rotation3::from_euler_angles(attitude.x, attitude.y, attitude.z).into_inner()
}

pub(crate) fn check_kinematics(attitude: &Vector3<f64>) -> Result<()> {
    let limit = FRAC_PI_2 - SINGULARITY_MARGIN;
    if attitude.x.abs() >= limit || attitude.y.abs() >= limit || !attitude.iter().all(|a| a.is_finite()) {
        return Err(Error::Singularity {
            roll: attitude.x,
            pitch: attitude.y,
        });
    }
    Ok(())
}

/// Diagonal of Γ1 = diag(1, cos φ, cos φ / cos θ).
pub fn gamma1(attitude: &Vector3<f64>) -> Vector3<f64> {
    let (phi, theta) = (attitude.x, attitude.y);
    Vector3::new(1.0, phi.cos(), phi.cos() / theta.cos())
}

/// The rate-dependent remainder Γ2 of the Euler kinematics.
pub fn gamma2(attitude: &Vector3<f64>, rates: &Vector3<f64>) -> Vector3<f64> {
    let (sin_phi, cos_phi) = attitude.x.sin_cos();
    let theta = attitude.y;
    let (q, r) = (rates.y, rates.z);
    Vector3::new(
        q * sin_phi * theta.tan() + r * cos_phi * theta.tan(),
        -r * sin_phi,
        q * sin_phi / theta.cos(),
    )
}

/// Nonlinear rigid-body equations of motion under total thrust `thrust` and
/// body moment `moment`.
pub fn dynamics_deriv(
    state: &RigidBodyState,
    thrust: f64,
    moment: &Vector3<f64>,
    params: &VehicleParams,
) -> Result<StateDerivative> {
    check_kinematics(&state.attitude)?;
    let v = state.velocity;
    let omega = state.rates;
    let j = params.inertia;
    let rotation = rotation_matrix(&state.attitude);

    let attitude_rate = gamma1(&state.attitude).component_mul(&omega) + gamma2(&state.attitude, &omega);
    let acceleration = Vector3::new(0.0, 0.0, params.gravity)
        - rotation * Vector3::z() * (thrust / params.mass)
        - v * (v.norm() * params.drag_factor / params.mass);
    let angular_momentum = j.component_mul(&omega);
    let torque = moment - omega.cross(&angular_momentum) - omega * params.rotational_damping;
    let angular_acceleration = torque.component_div(&j);

    Ok(StateDerivative {
        position: v,
        velocity: acceleration,
        attitude: attitude_rate,
        rates: angular_acceleration,
    })
}

/// First-order motor lag, `dΩ/dt = (Ω_cmd − Ω) / τ_motor`.
pub fn motor_deriv(omega: &DVector<f64>, command: &DVector<f64>, time_constant: f64) -> DVector<f64> {
    (command - omega) / time_constant
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::SpinConfig;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hex() -> VehicleParams {
        let cfg: SpinConfig = "PPNNPN".parse().unwrap();
        VehicleParams::hexacopter(&cfg).unwrap()
    }

    /// Euler-angle equations of motion written out component by component.
    fn reference_deriv(
        s: &RigidBodyState,
        thrust: f64,
        tq: &Vector3<f64>,
        p: &VehicleParams,
    ) -> [f64; 12] {
        let (phi, th, psi) = (s.attitude.x, s.attitude.y, s.attitude.z);
        let (pp, qq, rr) = (s.rates.x, s.rates.y, s.rates.z);
        let [u, v, w] = [s.velocity.x, s.velocity.y, s.velocity.z];
        let speed = (u * u + v * v + w * w).sqrt();
        let k = p.drag_factor / p.mass;
        // third column of the ZYX rotation matrix
        let r13 = psi.cos() * th.sin() * phi.cos() + psi.sin() * phi.sin();
        let r23 = psi.sin() * th.sin() * phi.cos() - psi.cos() * phi.sin();
        let r33 = th.cos() * phi.cos();
        let a = thrust / p.mass;
        let (jx, jy, jz) = (p.inertia.x, p.inertia.y, p.inertia.z);
        let kr = p.rotational_damping;
        [
            u,
            v,
            w,
            -a * r13 - k * speed * u,
            -a * r23 - k * speed * v,
            p.gravity - a * r33 - k * speed * w,
            pp + qq * phi.sin() * th.tan() + rr * phi.cos() * th.tan(),
            qq * phi.cos() - rr * phi.sin(),
            (qq * phi.sin() + rr * phi.cos()) / th.cos(),
            (tq.x - (jz - jy) * qq * rr - kr * pp) / jx,
            (tq.y - (jx - jz) * pp * rr - kr * qq) / jy,
            (tq.z - (jy - jx) * pp * qq - kr * rr) / jz,
        ]
    }

    fn flatten(d: &StateDerivative) -> [f64; 12] {
        let mut out = [0.0; 12];
        out[0..3].copy_from_slice(d.position.as_slice());
        out[3..6].copy_from_slice(d.velocity.as_slice());
        out[6..9].copy_from_slice(d.attitude.as_slice());
        out[9..12].copy_from_slice(d.rates.as_slice());
        out
    }

    #[test]
    fn hover_trim_is_equilibrium() {
        let p = hex();
        let s = RigidBodyState::at_rest(Vector3::new(1.0, 2.0, -3.0), 0.4);
        let d = dynamics_deriv(&s, p.weight(), &Vector3::zeros(), &p).unwrap();
        assert!(flatten(&d).iter().all(|x| x.abs() < 1e-14), "{d:?}");
    }

    #[test]
    fn free_fall_accelerates_down() {
        let p = hex();
        let s = RigidBodyState::default();
        let d = dynamics_deriv(&s, 0.0, &Vector3::zeros(), &p).unwrap();
        assert_eq!(d.velocity, Vector3::new(0.0, 0.0, p.gravity));
    }

    #[test]
    fn singular_pitch_is_reported() {
        let p = hex();
        let mut s = RigidBodyState::default();
        s.attitude.y = FRAC_PI_2;
        assert!(matches!(
            dynamics_deriv(&s, 1.0, &Vector3::zeros(), &p),
            Err(Error::Singularity { .. })
        ));
    }

    #[test]
    fn motor_lag_derivative() {
        let d = motor_deriv(&DVector::from_element(2, 100.0), &DVector::from_element(2, 200.0), 0.05);
        assert_relative_eq!(d[0], 2000.0, epsilon = 1e-9);
        let still = motor_deriv(&DVector::from_element(2, 7.0), &DVector::from_element(2, 7.0), 0.05);
        assert_eq!(still.norm(), 0.0);
    }

    #[test]
    fn wrap_angle_range() {
        assert_relative_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_relative_eq!(wrap_angle(-PI), -PI);
        assert_relative_eq!(wrap_angle(0.3), 0.3);
    }

    proptest! {
        #[test]
        fn matches_component_form(
            pos in prop::array::uniform3(-10.0..10.0f64),
            vel in prop::array::uniform3(-5.0..5.0f64),
            phi in -1.2..1.2f64, theta in -1.2..1.2f64, psi in -3.1..3.1f64,
            rates in prop::array::uniform3(-4.0..4.0f64),
            thrust in 0.0..40.0f64,
            tq in prop::array::uniform3(-2.0..2.0f64),
        ) {
            let p = hex();
            let s = RigidBodyState {
                position: Vector3::from(pos),
                velocity: Vector3::from(vel),
                attitude: Vector3::new(phi, theta, psi),
                rates: Vector3::from(rates),
            };
            let tq = Vector3::from(tq);
            let got = flatten(&dynamics_deriv(&s, thrust, &tq, &p).unwrap());
            let want = reference_deriv(&s, thrust, &tq, &p);
            for (g, w) in got.iter().zip(want) {
                prop_assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "{g} vs {w}");
            }
        }

        #[test]
        fn rotation_is_orthonormal(phi in -1.5..1.5f64, theta in -1.5..1.5f64, psi in -PI..PI) {
            let r = rotation_matrix(&Vector3::new(phi, theta, psi));
            prop_assert!((r.transpose() * r - Matrix3::identity()).norm() < 1e-12);
        }
    }
}
