use nalgebra::{DMatrix, DVector, SMatrix, Vector4};

use super::Channel;
use crate::vehicle::{build_effectiveness, EffectivenessMatrix, HealthVector, VehicleParams};
use crate::Result;

/// Hover linearisation `ẋ = A x + B (τ − G)` with state
/// `[h, φ, θ, ψ, v_h, p, q, r]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearHoverModel {
    pub a: SMatrix<f64, 8, 8>,
    pub b: SMatrix<f64, 8, 4>,
    /// `G = [m g, 0, 0, 0]`.
    pub gravity: Vector4<f64>,
    /// Diagonal of `J_f = diag(−m, J_x, J_y, J_z)`.
    pub generalized_inertia: Vector4<f64>,
    /// Health-masked effectiveness that defines the attainable set.
    pub effectiveness: EffectivenessMatrix,
    pub max_thrust: f64,
}

/// Names of the hover-model states, in order.
pub const STATE_LABELS: [&str; 8] = ["h", "phi", "theta", "psi", "v_h", "p", "q", "r"];

pub fn linear_hover_model(params: &VehicleParams, health: &HealthVector) -> Result<LinearHoverModel> {
    let effectiveness = build_effectiveness(params, health)?;
    let jf = Vector4::new(-params.mass, params.inertia.x, params.inertia.y, params.inertia.z);
    let mut a = SMatrix::<f64, 8, 8>::zeros();
    let mut b = SMatrix::<f64, 8, 4>::zeros();
    for i in 0..4 {
        a[(i, i + 4)] = 1.0;
        b[(i + 4, i)] = 1.0 / jf[i];
    }
    Ok(LinearHoverModel {
        a,
        b,
        gravity: Vector4::new(params.weight(), 0.0, 0.0, 0.0),
        generalized_inertia: jf,
        effectiveness,
        max_thrust: params.max_thrust,
    })
}

impl LinearHoverModel {
    pub fn controllability_rank(&self) -> usize {
        controllability_rank(&dyn_matrix(&self.a), &dyn_matrix(&self.b))
    }

    pub fn reduce(&self, channel: Channel) -> ReducedHoverModel {
        ReducedHoverModel::from_full(self, channel)
    }
}

/// Three of the four decoupled hover channels, `channel` removed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedHoverModel {
    pub channel: Channel,
    /// 6×6.
    pub a: DMatrix<f64>,
    /// 6×3.
    pub b: DMatrix<f64>,
    pub gravity: DVector<f64>,
    /// Effectiveness with the row of `channel` removed (3×N).
    pub allocation: DMatrix<f64>,
    pub max_thrust: f64,
}

impl ReducedHoverModel {
    pub fn from_full(full: &LinearHoverModel, channel: Channel) -> Self {
        let k = channel.row();
        // state k is the position-like coordinate, k + 4 its derivative
        let a = dyn_matrix(&full.a).remove_rows_at(&[k, k + 4]).remove_columns_at(&[k, k + 4]);
        let b = dyn_matrix(&full.b).remove_rows_at(&[k, k + 4]).remove_column(k);
        let gravity = DVector::from_column_slice(full.gravity.as_slice()).remove_row(k);
        ReducedHoverModel {
            channel,
            a,
            b,
            gravity,
            allocation: full.effectiveness.without_row(k),
            max_thrust: full.max_thrust,
        }
    }

    pub fn controllability_rank(&self) -> usize {
        controllability_rank(&self.a, &self.b)
    }
}

fn dyn_matrix<const R: usize, const C: usize>(m: &SMatrix<f64, R, C>) -> DMatrix<f64> {
    DMatrix::from_column_slice(R, C, m.as_slice())
}

/// Rank of `[B, AB, …, A^{n−1}B]`.
pub fn controllability_rank(a: &DMatrix<f64>, b: &DMatrix<f64>) -> usize {
    let n = a.nrows();
    let m = b.ncols();
    let mut c = DMatrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        c.columns_mut(k * m, m).copy_from(&block);
        block = a * &block;
    }
    let scale = c.abs().max().max(1.0);
    c.rank(1e-10 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::SpinConfig;

    fn hex(cfg: &str) -> VehicleParams {
        VehicleParams::hexacopter(&cfg.parse::<SpinConfig>().unwrap()).unwrap()
    }

    #[test]
    fn block_structure_and_full_rank() {
        let p = hex("PPNNPN");
        let model = linear_hover_model(&p, &HealthVector::nominal(6)).unwrap();
        assert_eq!(model.gravity, Vector4::new(p.weight(), 0.0, 0.0, 0.0));
        assert_eq!(model.b[(4, 0)], -1.0 / p.mass);
        assert_eq!(model.b[(7, 3)], 1.0 / p.inertia.z);
        assert_eq!(model.a.fixed_view::<4, 4>(0, 4), SMatrix::<f64, 4, 4>::identity());
        assert_eq!(model.controllability_rank(), 8);
    }

    #[test]
    fn reduced_models_drop_the_channel() {
        let p = hex("PPNNPN");
        let model = linear_hover_model(&p, &HealthVector::with_failed(6, &[4]).unwrap()).unwrap();
        for channel in Channel::ALL {
            let reduced = model.reduce(channel);
            assert_eq!(reduced.a.shape(), (6, 6));
            assert_eq!(reduced.b.shape(), (6, 3));
            assert_eq!(reduced.allocation.shape(), (3, 6));
            assert_eq!(reduced.controllability_rank(), 6);
        }
        let yaw = model.reduce(Channel::Yaw);
        assert_eq!(yaw.gravity.as_slice(), &[p.weight(), 0.0, 0.0]);
        assert_eq!(yaw.b[(3, 0)], -1.0 / p.mass);
        assert_eq!(yaw.b[(5, 2)], 1.0 / p.inertia.y);
        let alt = model.reduce(Channel::Altitude);
        assert_eq!(alt.gravity.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn rank_detects_uncontrollable_pair() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.0]);
        assert_eq!(controllability_rank(&a, &b), 1);
    }
}
