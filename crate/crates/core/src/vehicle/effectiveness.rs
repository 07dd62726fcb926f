use nalgebra::{DMatrix, DVector, Vector3, Vector4};

use super::{HealthVector, VehicleParams};
use crate::{Error, Result};

/// Total thrust and body moments `[F_T, L, M, N]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Wrench {
    /// Total thrust [N].
    pub thrust: f64,
    /// Roll moment L [N·m].
    pub roll: f64,
    /// Pitch moment M [N·m].
    pub pitch: f64,
    /// Yaw moment N [N·m].
    pub yaw: f64,
}

impl Wrench {
    pub fn new(thrust: f64, roll: f64, pitch: f64, yaw: f64) -> Self {
        Wrench {
            thrust,
            roll,
            pitch,
            yaw,
        }
    }

    /// `[m·g, 0, 0, 0]`, the wrench that holds hover.
    pub fn hover(params: &VehicleParams) -> Self {
        Wrench::new(params.weight(), 0.0, 0.0, 0.0)
    }

    pub fn from_parts(thrust: f64, moment: Vector3<f64>) -> Self {
        Wrench::new(thrust, moment.x, moment.y, moment.z)
    }

    pub fn moment(&self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::new(self.thrust, self.roll, self.pitch, self.yaw)
    }

    pub fn from_vector(v: &Vector4<f64>) -> Self {
        Wrench::new(v[0], v[1], v[2], v[3])
    }

    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(self.to_vector().as_slice())
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|x| x.is_finite())
    }
}

/// The 4×N map from rotor thrusts to [`Wrench`].
///
/// Column `n` is `ε_n · [1, r_n sin δ_n, r_n cos δ_n, γ_n κ_μ]ᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectivenessMatrix(DMatrix<f64>);

impl EffectivenessMatrix {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != 4 {
            return Err(Error::Dimension {
                what: "effectiveness matrix rows",
                expected: 4,
                got: matrix.nrows(),
            });
        }
        Ok(EffectivenessMatrix(matrix))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn rotor_count(&self) -> usize {
        self.0.ncols()
    }

    /// Wrench produced by the thrust vector `f`.
    pub fn apply(&self, f: &DVector<f64>) -> Wrench {
        let w = &self.0 * f;
        Wrench::new(w[0], w[1], w[2], w[3])
    }

    /// The matrix with wrench row `row` deleted (3×N).
    pub fn without_row(&self, row: usize) -> DMatrix<f64> {
        self.0.clone().remove_row(row)
    }
}

pub fn build_effectiveness(
    params: &VehicleParams,
    health: &HealthVector,
) -> Result<EffectivenessMatrix> {
    let n = params.rotor_count();
    if health.len() != n {
        return Err(Error::Dimension {
            what: "health vector length",
            expected: n,
            got: health.len(),
        });
    }
    let mut b = DMatrix::zeros(4, n);
    for (i, rotor) in params.rotors.iter().enumerate() {
        if !health.is_healthy(i) {
            continue;
        }
        let (sin, cos) = rotor.angle.sin_cos();
        b[(0, i)] = 1.0;
        b[(1, i)] = rotor.arm * sin;
        b[(2, i)] = rotor.arm * cos;
        b[(3, i)] = rotor.spin.sign() * params.torque_factor;
    }
    Ok(EffectivenessMatrix(b))
}

/// Rotor speeds Ω [rad/s].
#[derive(Debug, Clone, PartialEq)]
pub struct MotorState(pub DVector<f64>);

impl MotorState {
    pub fn stopped(rotors: usize) -> Self {
        MotorState(DVector::zeros(rotors))
    }

    /// Every rotor spinning at the speed that gives `m·g / N` thrust.
    pub fn hover(params: &VehicleParams) -> Self {
        let omega = (params.hover_thrust_per_rotor() / params.thrust_factor).sqrt();
        MotorState(DVector::from_element(params.rotor_count(), omega))
    }

    pub fn speeds(&self) -> &DVector<f64> {
        &self.0
    }
}

/// Produced thrust `f_n = ε_n κ_T Ω_n²`.
pub fn rotor_thrusts(
    motor: &MotorState,
    params: &VehicleParams,
    health: &HealthVector,
) -> DVector<f64> {
    DVector::from_fn(motor.0.len(), |n, _| {
        let omega = motor.0[n];
        health.factor(n) * params.thrust_factor * omega * omega
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{RotorSpec, SpinConfig};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    fn hex(config: &str) -> VehicleParams {
        VehicleParams::hexacopter(&config.parse().unwrap()).unwrap()
    }

    #[test]
    fn symmetric_hexacopter_rows() {
        let p = hex("PNPNPN");
        let b = build_effectiveness(&p, &HealthVector::nominal(6)).unwrap();
        let m = b.matrix();
        for n in 0..6 {
            assert_eq!(m[(0, n)], 1.0);
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            assert_eq!(m[(3, n)], sign * p.torque_factor);
        }
        assert!(m.row(1).sum().abs() < 1e-15);
        assert!(m.row(2).sum().abs() < 1e-15);
    }

    #[test]
    fn failed_rotor_zeroes_column() {
        let p = hex("PNPNPN");
        let nominal = build_effectiveness(&p, &HealthVector::nominal(6)).unwrap();
        let failed = build_effectiveness(&p, &HealthVector::with_failed(6, &[2]).unwrap()).unwrap();
        for n in 0..6 {
            if n == 2 {
                assert!(failed.matrix().column(n).iter().all(|&x| x == 0.0));
            } else {
                assert_eq!(failed.matrix().column(n), nominal.matrix().column(n));
            }
        }
    }

    #[test]
    fn quadcopter_first_column() {
        let cfg: SpinConfig = "PNPN".parse().unwrap();
        let mut p = hex("PNPNPN");
        p.rotors = RotorSpec::symmetric(&cfg, 0.2).unwrap();
        p.torque_factor = 0.01;
        assert_relative_eq!(p.rotors[1].angle, FRAC_PI_2);
        let b = build_effectiveness(&p, &HealthVector::nominal(4)).unwrap();
        let col = b.matrix().column(0);
        assert_eq!(col[0], 1.0);
        assert_eq!(col[1], 0.0);
        assert_relative_eq!(col[2], 0.2);
        assert_relative_eq!(col[3], 0.01);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = hex("PNPNPN");
        assert!(matches!(
            build_effectiveness(&p, &HealthVector::nominal(4)),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn thrusts_follow_square_law_and_health() {
        let mut p = hex("PNPNPN");
        p.thrust_factor = 1e-5;
        let motor = MotorState(DVector::from_element(6, 400.0));
        let f = rotor_thrusts(&motor, &p, &HealthVector::with_failed(6, &[1]).unwrap());
        assert_relative_eq!(f[0], 1.6, epsilon = 1e-12);
        assert_eq!(f[1], 0.0);
        let zero = rotor_thrusts(&MotorState::stopped(6), &p, &HealthVector::nominal(6));
        assert!(zero.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn uniform_hover_thrust_gives_pure_lift() {
        for cfg in ["PNPNPN", "PPNNPN"] {
            let p = hex(cfg);
            let b = build_effectiveness(&p, &HealthVector::nominal(6)).unwrap();
            let w = b.apply(&DVector::from_element(6, p.hover_thrust_per_rotor()));
            assert_relative_eq!(w.thrust, p.weight(), epsilon = 1e-12);
            assert!(w.roll.abs() < 1e-12 && w.pitch.abs() < 1e-12 && w.yaw.abs() < 1e-12);
        }
    }
}
