//! Four-loop nonlinear dynamic inversion cascade.
//!
//! Each loop inverts its part of the model so that its error obeys
//! `ė = −K e`: position produces a velocity command, velocity a thrust and
//! tilt command, attitude a body-rate command, and the rate loop the
//! moment demand. Reference derivatives are taken as zero.

use std::f64::consts::PI;

use nalgebra::{Matrix2, Vector2, Vector3};

use crate::controllability::{Channel, ControlScope};
use crate::vehicle::{check_kinematics, gamma1, gamma2, RigidBodyState, VehicleParams, Wrench};
use crate::{Error, Result};

/// Diagonal loop gains [1/s].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gains {
    pub rate: Vector3<f64>,
    pub attitude: Vector3<f64>,
    /// `(k_u, k_v, k_w)`.
    pub velocity: Vector3<f64>,
    pub position: Vector3<f64>,
}

impl Default for Gains {
    fn default() -> Self {
        Gains {
            rate: Vector3::repeat(32.0),
            attitude: Vector3::repeat(8.0),
            velocity: Vector3::repeat(2.0),
            position: Vector3::repeat(1.0),
        }
    }
}

impl Gains {
    /// Checks positivity and loop ordering. Each inner loop must be at
    /// least `separation` times faster than the next outer one up to the
    /// velocity loop; the velocity loop must be at least as fast as the
    /// position loop.
    pub fn validate(&self, separation: f64) -> Result<()> {
        let loops = [
            ("gains.rate", self.rate),
            ("gains.attitude", self.attitude),
            ("gains.velocity", self.velocity),
            ("gains.position", self.position),
        ];
        for (name, k) in loops {
            if !k.iter().all(|&g| g > 0.0 && g.is_finite()) {
                return Err(Error::invalid(name, "all diagonal entries must be > 0"));
            }
        }
        let ordered = |inner: Vector3<f64>, outer: Vector3<f64>, factor: f64| inner.min() >= factor * outer.max();
        if !ordered(self.rate, self.attitude, separation) {
            return Err(Error::invalid(
                "gains.rate",
                format!("rate loop must be {separation}x faster than the attitude loop"),
            ));
        }
        if !ordered(self.attitude, self.velocity, separation) {
            return Err(Error::invalid(
                "gains.attitude",
                format!("attitude loop must be {separation}x faster than the velocity loop"),
            ));
        }
        if !ordered(self.velocity, self.position, 1.0) {
            return Err(Error::invalid(
                "gains.velocity",
                "velocity loop must be at least as fast as the position loop",
            ));
        }
        Ok(())
    }
}

/// The controller's own copy of the plant parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatedParams {
    pub mass: f64,
    pub inertia: Vector3<f64>,
    pub rotational_damping: f64,
    pub drag_factor: f64,
    pub gravity: f64,
}

impl EstimatedParams {
    pub fn matched(params: &VehicleParams) -> Self {
        EstimatedParams {
            mass: params.mass,
            inertia: params.inertia,
            rotational_damping: params.rotational_damping,
            drag_factor: params.drag_factor,
            gravity: params.gravity,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("estimated.mass", self.mass),
            ("estimated.inertia.x", self.inertia.x),
            ("estimated.inertia.y", self.inertia.y),
            ("estimated.inertia.z", self.inertia.z),
            ("estimated.gravity", self.gravity),
        ];
        for (field, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("{v} must be > 0")));
            }
        }
        for (field, v) in [
            ("estimated.rotational_damping", self.rotational_damping),
            ("estimated.drag_factor", self.drag_factor),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(field, format!("{v} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// Command saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandLimits {
    /// Bound on |φ_d| and |θ_d| [rad].
    pub max_tilt: f64,
    /// Upper bound on the thrust demand [N].
    pub max_thrust: f64,
    /// Below this thrust demand the tilt command is held [N].
    pub min_thrust_for_tilt: f64,
}

impl CommandLimits {
    pub fn for_vehicle(params: &VehicleParams) -> Self {
        CommandLimits {
            max_tilt: 35f64.to_radians(),
            max_thrust: params.max_thrust * params.rotor_count() as f64,
            min_thrust_for_tilt: 1e-3,
        }
    }
}

/// Γ3(ψ).
pub fn gamma3(psi: f64) -> Matrix2<f64> {
    let (s, c) = psi.sin_cos();
    Matrix2::new(-s, -c, c, -s)
}

/// Inverse of Γ3(ψ). Γ3 is a rotation scaled by one, so this is its transpose.
pub fn gamma3_inv(psi: f64) -> Matrix2<f64> {
    gamma3(psi).transpose()
}

/// Wraps to `(−π, π]`.
fn wrap_error(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// `v_d = K_x (x_d − x)`.
pub fn position_loop(position: &Vector3<f64>, target: &Vector3<f64>, gain: &Vector3<f64>) -> Vector3<f64> {
    gain.component_mul(&(target - position))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityCommand {
    pub roll: f64,
    pub pitch: f64,
    pub thrust: f64,
    /// The tilt was held because the thrust demand was too small to tilt.
    pub tilt_held: bool,
}

/// Thrust and tilt commands that give `v̇ = K_v (v_d − v)`.
///
/// The thrust demand is computed first and then used as the total thrust
/// in the tilt equation. `held_tilt` is returned when the thrust demand is
/// below `limits.min_thrust_for_tilt`.
pub fn velocity_loop(
    state: &RigidBodyState,
    velocity_target: &Vector3<f64>,
    est: &EstimatedParams,
    gain: &Vector3<f64>,
    limits: &CommandLimits,
    held_tilt: (f64, f64),
) -> Result<VelocityCommand> {
    check_kinematics(&state.attitude)?;
    let v = state.velocity;
    let (phi, theta, psi) = (state.attitude.x, state.attitude.y, state.attitude.z);
    let err = velocity_target - v;
    let drag = est.drag_factor * v.norm() / est.mass;

    let thrust = est.mass / (phi.cos() * theta.cos()) * (est.gravity - gain.z * err.z - drag * v.z);
    let thrust = thrust.clamp(0.0, limits.max_thrust);

    if thrust <= limits.min_thrust_for_tilt {
        return Ok(VelocityCommand {
            roll: held_tilt.0,
            pitch: held_tilt.1,
            thrust,
            tilt_held: true,
        });
    }
    let horizontal = Vector2::new(gain.x * err.x + drag * v.x, gain.y * err.y + drag * v.y);
    let tilt = gamma3_inv(psi) * horizontal * (est.mass / (thrust * phi.cos()));
    let tan_max = limits.max_tilt.tan();
    let sin_max = limits.max_tilt.sin();
    Ok(VelocityCommand {
        roll: tilt.x.clamp(-tan_max, tan_max).atan(),
        pitch: tilt.y.clamp(-sin_max, sin_max).asin(),
        thrust,
        tilt_held: false,
    })
}

/// `ω_d = Γ1⁻¹ (K_Φ e_Φ − Γ2)`, with the heading error wrapped.
pub fn attitude_loop(
    attitude: &Vector3<f64>,
    target: &Vector3<f64>,
    rates: &Vector3<f64>,
    gain: &Vector3<f64>,
) -> Result<Vector3<f64>> {
    check_kinematics(attitude)?;
    let mut err = target - attitude;
    err.z = wrap_error(err.z);
    Ok((gain.component_mul(&err) - gamma2(attitude, rates)).component_div(&gamma1(attitude)))
}

/// `T_d = ω × J̃ω + κ̃_R ω + J̃ K_ω (ω_d − ω)`.
pub fn rate_loop(
    rates: &Vector3<f64>,
    target: &Vector3<f64>,
    est: &EstimatedParams,
    gain: &Vector3<f64>,
) -> Vector3<f64> {
    let j = est.inertia;
    rates.cross(&j.component_mul(rates))
        + rates * est.rotational_damping
        + j.component_mul(&gain.component_mul(&(target - rates)))
}

/// Position and heading to follow.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Reference {
    pub position: Vector3<f64>,
    pub heading: f64,
}

/// Everything one pass of the cascade produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdiOutput {
    pub demand: Wrench,
    /// Wrench rows the allocator is asked to meet.
    pub mask: [bool; 4],
    pub velocity_target: Vector3<f64>,
    pub attitude_target: Vector3<f64>,
    pub rate_target: Vector3<f64>,
    pub tilt_held: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NdiController {
    pub gains: Gains,
    pub estimated: EstimatedParams,
    pub limits: CommandLimits,
    held_tilt: (f64, f64),
}

impl NdiController {
    pub fn new(gains: Gains, estimated: EstimatedParams, limits: CommandLimits) -> Self {
        NdiController {
            gains,
            estimated,
            limits,
            held_tilt: (0.0, 0.0),
        }
    }

    /// One pass of the cascade. In a reduced scope the error of the
    /// uncontrolled attitude angle is zeroed and its wrench row is left
    /// out of the mask; every loop still runs.
    pub fn step(&mut self, state: &RigidBodyState, reference: &Reference, scope: ControlScope) -> Result<NdiOutput> {
        let g = &self.gains;
        let velocity_target = position_loop(&state.position, &reference.position, &g.position);
        let cmd = velocity_loop(state, &velocity_target, &self.estimated, &g.velocity, &self.limits, self.held_tilt)?;
        self.held_tilt = (cmd.roll, cmd.pitch);

        let mut attitude_target = Vector3::new(cmd.roll, cmd.pitch, reference.heading);
        let mut mask = [true; 4];
        if let ControlScope::Reduced(channel) = scope {
            mask[channel.row()] = false;
            match channel {
                Channel::Roll => attitude_target.x = state.attitude.x,
                Channel::Pitch => attitude_target.y = state.attitude.y,
                Channel::Yaw => attitude_target.z = state.attitude.z,
                Channel::Altitude => {}
            }
        }
        let rate_target = attitude_loop(&state.attitude, &attitude_target, &state.rates, &g.attitude)?;
        let moment = rate_loop(&state.rates, &rate_target, &self.estimated, &g.rate);
        Ok(NdiOutput {
            demand: Wrench::from_parts(cmd.thrust, moment),
            mask,
            velocity_target,
            attitude_target,
            rate_target,
            tilt_held: cmd.tilt_held,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{dynamics_deriv, SpinConfig};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn hex() -> VehicleParams {
        VehicleParams::hexacopter(&"PPNNPN".parse::<SpinConfig>().unwrap()).unwrap()
    }

    fn controller(p: &VehicleParams) -> NdiController {
        NdiController::new(Gains::default(), EstimatedParams::matched(p), CommandLimits::for_vehicle(p))
    }

    #[test]
    fn default_gains_are_valid() {
        Gains::default().validate(4.0).unwrap();
        let mut g = Gains::default();
        g.rate = Vector3::repeat(20.0);
        assert!(g.validate(4.0).is_err());
        g = Gains::default();
        g.position.x = -1.0;
        assert!(g.validate(4.0).is_err());
    }

    #[test]
    fn position_loop_examples() {
        assert_eq!(position_loop(&Vector3::zeros(), &Vector3::zeros(), &Vector3::repeat(1.0)), Vector3::zeros());
        assert_eq!(
            position_loop(&Vector3::zeros(), &Vector3::new(1.0, 2.0, 3.0), &Vector3::repeat(1.0)),
            Vector3::new(1.0, 2.0, 3.0)
        );
        assert_eq!(
            position_loop(&Vector3::new(-2.0, 0.0, 1.0), &Vector3::zeros(), &Vector3::new(0.5, 0.5, 1.0)),
            Vector3::new(1.0, 0.0, -1.0)
        );
    }

    #[test]
    fn gamma3_examples() {
        assert_eq!(gamma3(0.0), Matrix2::new(0.0, -1.0, 1.0, 0.0));
        assert_eq!(gamma3_inv(0.0), Matrix2::new(0.0, 1.0, -1.0, 0.0));
        for psi in [-PI, -1.0, 0.3, 2.0, PI] {
            assert_relative_eq!(gamma3(psi) * gamma3_inv(psi), Matrix2::identity(), epsilon = 1e-15);
        }
    }

    #[test]
    fn hover_velocity_loop() {
        let p = hex();
        let est = EstimatedParams::matched(&p);
        let s = RigidBodyState::default();
        let cmd = velocity_loop(&s, &Vector3::zeros(), &est, &Vector3::repeat(2.0), &CommandLimits::for_vehicle(&p), (0.0, 0.0)).unwrap();
        assert_relative_eq!(cmd.thrust, p.weight(), epsilon = 1e-12);
        assert_eq!((cmd.roll, cmd.pitch), (0.0, 0.0));
    }

    #[test]
    fn tilt_held_when_thrust_vanishes() {
        let p = hex();
        let est = EstimatedParams::matched(&p);
        let mut s = RigidBodyState::default();
        s.velocity.z = -50.0;
        let cmd = velocity_loop(&s, &Vector3::new(3.0, 0.0, 20.0), &est, &Vector3::repeat(2.0), &CommandLimits::for_vehicle(&p), (0.1, -0.2)).unwrap();
        assert!(cmd.tilt_held);
        assert_eq!((cmd.roll, cmd.pitch), (0.1, -0.2));
    }

    #[test]
    fn attitude_loop_at_level() {
        let k = Vector3::repeat(8.0);
        let target = Vector3::new(0.1, -0.2, 0.3);
        assert_eq!(attitude_loop(&Vector3::zeros(), &Vector3::zeros(), &Vector3::zeros(), &k).unwrap(), Vector3::zeros());
        assert_relative_eq!(attitude_loop(&Vector3::zeros(), &target, &Vector3::zeros(), &k).unwrap(), k.component_mul(&target), epsilon = 1e-12);
    }

    #[test]
    fn attitude_loop_hand_evaluation() {
        let (phi, th) = (0.2f64, 0.3f64);
        let w = Vector3::new(0.1, -0.2, 0.05);
        let att = Vector3::new(phi, th, 0.0);
        let target = att + Vector3::new(0.1, 0.0, -0.1);
        let got = attitude_loop(&att, &target, &w, &Vector3::repeat(2.0)).unwrap();
        let (q, r) = (w.y, w.z);
        let g2 = [
            q * phi.sin() * th.tan() + r * phi.cos() * th.tan(),
            -r * phi.sin(),
            q * phi.sin() / th.cos(),
        ];
        let want = Vector3::new(
            (2.0 * 0.1 - g2[0]) / 1.0,
            (0.0 - g2[1]) / phi.cos(),
            (2.0 * -0.1 - g2[2]) / (phi.cos() / th.cos()),
        );
        assert_relative_eq!(got, want, epsilon = 1e-12);
    }

    #[test]
    fn rate_loop_examples() {
        let p = hex();
        let est = EstimatedParams::matched(&p);
        let k = Vector3::repeat(32.0);
        assert_eq!(rate_loop(&Vector3::zeros(), &Vector3::zeros(), &est, &k), Vector3::zeros());
        let w = Vector3::new(0.0, 0.0, 1.5);
        let wd = Vector3::new(0.2, 0.0, 1.0);
        let want = w * est.rotational_damping + est.inertia.component_mul(&k.component_mul(&(wd - w)));
        assert_relative_eq!(rate_loop(&w, &wd, &est, &k), want, epsilon = 1e-15);
    }

    #[test]
    fn hover_demand() {
        let p = hex();
        let mut c = controller(&p);
        let s = RigidBodyState::at_rest(Vector3::new(0.0, 0.0, -2.0), 0.0);
        let reference = Reference { position: s.position, heading: 0.0 };
        let out = c.step(&s, &reference, ControlScope::Full).unwrap();
        assert_relative_eq!(out.demand.thrust, p.weight(), epsilon = 1e-12);
        assert_eq!(out.demand.moment(), Vector3::zeros());
        assert_eq!(out.mask, [true; 4]);
    }

    #[test]
    fn reduced_yaw_keeps_other_rows() {
        let p = hex();
        let s = RigidBodyState {
            position: Vector3::new(0.3, -0.2, -2.0),
            velocity: Vector3::new(0.5, 0.1, -0.1),
            attitude: Vector3::new(0.05, -0.03, 1.0),
            rates: Vector3::new(0.1, 0.2, -2.0),
        };
        let reference = Reference { position: Vector3::new(1.0, 0.0, -3.0), heading: 0.0 };
        let full = controller(&p).step(&s, &reference, ControlScope::Full).unwrap();
        let reduced = controller(&p).step(&s, &reference, ControlScope::Reduced(Channel::Yaw)).unwrap();
        assert_eq!(reduced.mask, [true, true, true, false]);
        assert_eq!(full.demand.thrust, reduced.demand.thrust);
        assert_eq!(full.demand.roll, reduced.demand.roll);
        assert_eq!(full.demand.pitch, reduced.demand.pitch);
        assert_ne!(full.demand.yaw, reduced.demand.yaw);
        assert_eq!(reduced.attitude_target.z, s.attitude.z);
    }

    #[test]
    fn rate_loop_inverts_rotational_dynamics() {
        let p = hex();
        let est = EstimatedParams::matched(&p);
        let k = Gains::default().rate;
        let mut s = RigidBodyState::default();
        s.rates = Vector3::new(0.4, -0.3, 1.1);
        let wd = Vector3::new(0.1, 0.2, -0.3);
        let t = rate_loop(&s.rates, &wd, &est, &k);
        let d = dynamics_deriv(&s, p.weight(), &t, &p).unwrap();
        assert_relative_eq!(d.rates, k.component_mul(&(wd - s.rates)), epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn tilt_commands_are_clamped(
            v in prop::array::uniform3(-30.0..30.0f64),
            vd in prop::array::uniform3(-30.0..30.0f64),
            att in prop::array::uniform3(-1.0..1.0f64),
        ) {
            let p = hex();
            let limits = CommandLimits::for_vehicle(&p);
            let s = RigidBodyState { velocity: Vector3::from(v), attitude: Vector3::from(att), ..Default::default() };
            let cmd = velocity_loop(&s, &Vector3::from(vd), &EstimatedParams::matched(&p), &Vector3::repeat(2.0), &limits, (0.0, 0.0)).unwrap();
            prop_assert!(cmd.roll.abs() <= limits.max_tilt + 1e-12);
            prop_assert!(cmd.pitch.abs() <= limits.max_tilt + 1e-12);
            prop_assert!(cmd.thrust >= 0.0 && cmd.thrust <= limits.max_thrust);
        }

        #[test]
        fn velocity_loop_matches_expanded_form(
            v in prop::array::uniform3(-3.0..3.0f64),
            vd in prop::array::uniform3(-3.0..3.0f64),
            phi in -0.3..0.3f64, theta in -0.3..0.3f64, psi in -PI..PI,
        ) {
            let p = hex();
            let mut est = EstimatedParams::matched(&p);
            est.drag_factor = 0.0;
            let mut limits = CommandLimits::for_vehicle(&p);
            limits.max_tilt = 1.5;
            let s = RigidBodyState { velocity: Vector3::from(v), attitude: Vector3::new(phi, theta, psi), ..Default::default() };
            let k = Vector3::new(2.0, 3.0, 4.0);
            let vd = Vector3::from(vd);
            let cmd = velocity_loop(&s, &vd, &est, &k, &limits, (0.0, 0.0)).unwrap();
            let e = vd - Vector3::from(v);
            let ft = est.mass / (phi.cos() * theta.cos()) * (est.gravity - k.z * e.z);
            prop_assume!(ft > 0.0 && ft < limits.max_thrust);
            let a = k.x * e.x;
            let b = k.y * e.y;
            // Γ3⁻¹ = [[−sin ψ, cos ψ], [−cos ψ, −sin ψ]]
            let scale = est.mass / (ft * phi.cos());
            let tan_phi = scale * (-psi.sin() * a + psi.cos() * b);
            let sin_theta = scale * (-psi.cos() * a - psi.sin() * b);
            prop_assume!(tan_phi.abs() < limits.max_tilt.tan() && sin_theta.abs() < limits.max_tilt.sin());
            prop_assert!((cmd.thrust - ft).abs() < 1e-12 * ft);
            prop_assert!((cmd.roll - tan_phi.atan()).abs() < 1e-12);
            prop_assert!((cmd.pitch - sin_theta.asin()).abs() < 1e-12);
        }

        #[test]
        fn heading_wrap_invariance(
            att in prop::array::uniform3(-1.0..1.0f64),
            target in prop::array::uniform3(-1.0..1.0f64),
            rates in prop::array::uniform3(-2.0..2.0f64),
        ) {
            let k = Vector3::new(8.0, 7.0, 6.0);
            let att = Vector3::from(att);
            let target = Vector3::from(target);
            let shift = Vector3::new(0.0, 0.0, 2.0 * PI);
            let a = attitude_loop(&att, &target, &Vector3::from(rates), &k).unwrap();
            let b = attitude_loop(&(att + shift), &(target + shift), &Vector3::from(rates), &k).unwrap();
            prop_assert!((a - b).norm() < 1e-9);
        }

        #[test]
        fn step_is_deterministic(x in prop::array::uniform3(-5.0..5.0f64), r in -3.0..3.0f64) {
            let p = hex();
            let s = RigidBodyState { position: Vector3::from(x), rates: Vector3::new(0.0, 0.0, r), ..Default::default() };
            let reference = Reference { position: Vector3::zeros(), heading: 0.5 };
            let a = controller(&p).step(&s, &reference, ControlScope::Full).unwrap();
            let b = controller(&p).step(&s, &reference, ControlScope::Full).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
