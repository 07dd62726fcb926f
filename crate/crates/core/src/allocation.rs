//! Redistributed pseudo-inverse allocation.
//!
//! The weighted, regularised pseudo-inverse solution
//! `f = c + W⁻¹Bᵀ(BW⁻¹Bᵀ + εI)⁻¹(τ_d − B₀c)` is computed, every free rotor
//! that leaves its thrust box is frozen at the violated bound (its offset
//! `c_n` set to the bound, its column of `B` zeroed), and the remaining
//! demand is redistributed over the free rotors. Rotors reported faulty are
//! frozen at zero thrust with their column removed from both `B` and `B₀`
//! before the first pass.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::controllability::{Channel, ControlScope};
use crate::vehicle::{EffectivenessMatrix, HealthVector, Wrench};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AllocatorConfig {
    /// Diagonal of the weighting matrix W; `None` means identity.
    pub weights: Option<DVector<f64>>,
    /// Regularisation ε added to `B W⁻¹ Bᵀ`.
    pub regularization: f64,
    /// Redistribution pass limit; `None` means one pass per rotor.
    pub max_iter: Option<usize>,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        AllocatorConfig {
            weights: None,
            regularization: 1e-9,
            max_iter: None,
        }
    }
}

impl AllocatorConfig {
    pub fn validate(&self, rotors: usize) -> Result<()> {
        if let Some(w) = &self.weights {
            if w.len() != rotors {
                return Err(Error::Dimension {
                    what: "allocation weights",
                    expected: rotors,
                    got: w.len(),
                });
            }
            if !w.iter().all(|&x| x > 0.0 && x.is_finite()) {
                return Err(Error::invalid("allocation.weights", "entries must be > 0"));
            }
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            return Err(Error::invalid("allocation.regularization", "must be >= 0"));
        }
        if self.max_iter == Some(0) {
            return Err(Error::invalid("allocation.max_iter", "must be >= 1"));
        }
        Ok(())
    }

    fn inverse_weights(&self, n: usize) -> DVector<f64> {
        match &self.weights {
            Some(w) => w.map(|x| 1.0 / x),
            None => DVector::from_element(n, 1.0),
        }
    }
}

/// Why a rotor is out of the redistribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frozen {
    Free,
    Faulty,
    AtLower,
    AtUpper,
}

/// Output of one [`rpi_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct RpiSolution {
    pub thrusts: DVector<f64>,
    /// Offset vector c.
    pub offsets: DVector<f64>,
    pub frozen: Vec<Frozen>,
    pub iterations: usize,
}

impl RpiSolution {
    /// Index vector d: 1 for every frozen rotor.
    pub fn index_vector(&self) -> Vec<u8> {
        self.frozen.iter().map(|f| u8::from(*f != Frozen::Free)).collect()
    }

    pub fn saturated(&self) -> Vec<usize> {
        (0..self.frozen.len())
            .filter(|&n| matches!(self.frozen[n], Frozen::AtLower | Frozen::AtUpper))
            .collect()
    }
}

/// The redistribution loop on an arbitrary `m×N` effectiveness `b0`, with
/// per-rotor bounds `[lower, upper]` (either may be infinite).
pub fn rpi_solve(
    b0: &DMatrix<f64>,
    demand: &DVector<f64>,
    health: &HealthVector,
    cfg: &AllocatorConfig,
    lower: f64,
    upper: f64,
) -> Result<RpiSolution> {
    let (m, n) = b0.shape();
    if demand.len() != m {
        return Err(Error::Dimension {
            what: "allocation demand",
            expected: m,
            got: demand.len(),
        });
    }
    if health.len() != n {
        return Err(Error::Dimension {
            what: "health vector length",
            expected: n,
            got: health.len(),
        });
    }
    cfg.validate(n)?;
    let w_inv = cfg.inverse_weights(n);
    let max_iter = cfg.max_iter.unwrap_or(n).max(1);

    let mut frozen: Vec<Frozen> = (0..n)
        .map(|i| if health.is_healthy(i) { Frozen::Free } else { Frozen::Faulty })
        .collect();
    let mut offsets = DVector::zeros(n);
    let mut original = b0.clone();
    for (i, state) in frozen.iter().enumerate() {
        if *state == Frozen::Faulty {
            original.column_mut(i).fill(0.0);
        }
    }

    let mut thrusts = offsets.clone();
    let mut iterations = 0;
    while iterations < max_iter {
        if frozen.iter().all(|f| *f != Frozen::Free) {
            thrusts = offsets.clone();
            break;
        }
        iterations += 1;
        let mut working = original.clone();
        for (i, state) in frozen.iter().enumerate() {
            if *state != Frozen::Free {
                working.column_mut(i).fill(0.0);
            }
        }
        let remaining = demand - &original * &offsets;
        thrusts = &offsets + weighted_pinv_apply(&working, &w_inv, cfg.regularization, &remaining);

        let mut changed = false;
        for i in 0..n {
            if frozen[i] != Frozen::Free {
                thrusts[i] = offsets[i];
                continue;
            }
            if thrusts[i] < lower {
                frozen[i] = Frozen::AtLower;
                offsets[i] = lower;
                changed = true;
            } else if thrusts[i] > upper {
                frozen[i] = Frozen::AtUpper;
                offsets[i] = upper;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for i in 0..n {
            if frozen[i] != Frozen::Free {
                thrusts[i] = offsets[i];
            }
        }
    }
    thrusts.apply(|x| *x = x.clamp(lower, upper));
    for (i, state) in frozen.iter().enumerate() {
        if *state == Frozen::Faulty {
            thrusts[i] = 0.0;
        }
    }
    Ok(RpiSolution {
        thrusts,
        offsets,
        frozen,
        iterations,
    })
}

/// `W⁻¹Bᵀ(BW⁻¹Bᵀ + εI)⁻¹ r`.
fn weighted_pinv_apply(b: &DMatrix<f64>, w_inv: &DVector<f64>, eps: f64, r: &DVector<f64>) -> DVector<f64> {
    let m = b.nrows();
    let bw = DMatrix::from_fn(b.nrows(), b.ncols(), |i, j| b[(i, j)] * w_inv[j]);
    let gram = &bw * b.transpose() + DMatrix::<f64>::identity(m, m) * eps;
    let y = match gram.clone().cholesky() {
        Some(chol) => chol.solve(r),
        None => gram
            .pseudo_inverse(1e-12)
            .map(|pinv| pinv * r)
            .unwrap_or_else(|_| DVector::zeros(m)),
    };
    bw.transpose() * y
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationResult {
    /// Rotor thrusts [N], inside `[0, F_max]`.
    pub thrusts: DVector<f64>,
    /// Full wrench the thrusts produce under the estimated health.
    pub achieved: Wrench,
    /// Norm of the miss over the allocated rows.
    pub residual: f64,
    pub iterations: usize,
    pub saturated: Vec<usize>,
    pub offsets: DVector<f64>,
    pub index_vector: Vec<u8>,
    pub scope: ControlScope,
    /// No healthy rotor was left to allocate.
    pub exhausted: bool,
}

fn masked(b: &EffectivenessMatrix, health: &HealthVector) -> DMatrix<f64> {
    let mut m = b.matrix().clone();
    for i in health.failed() {
        m.column_mut(i).fill(0.0);
    }
    m
}

fn finish(
    solution: RpiSolution,
    b: &EffectivenessMatrix,
    health: &HealthVector,
    achieved_rows: &DVector<f64>,
    demand: &DVector<f64>,
    scope: ControlScope,
) -> AllocationResult {
    let achieved_full = masked(b, health) * &solution.thrusts;
    AllocationResult {
        achieved: Wrench::new(achieved_full[0], achieved_full[1], achieved_full[2], achieved_full[3]),
        residual: (achieved_rows - demand).norm(),
        iterations: solution.iterations,
        saturated: solution.saturated(),
        index_vector: solution.index_vector(),
        exhausted: health.healthy_count() == 0,
        offsets: solution.offsets,
        thrusts: solution.thrusts,
        scope,
    }
}

/// Allocate the full wrench demand. `b` is the healthy effectiveness;
/// rotors failed in `health` are masked.
pub fn rpi_allocate(
    demand: &Wrench,
    b: &EffectivenessMatrix,
    health: &HealthVector,
    cfg: &AllocatorConfig,
    max_thrust: f64,
) -> Result<AllocationResult> {
    if !demand.is_finite() {
        return Err(Error::invalid("demand", "non-finite wrench demand"));
    }
    let tau = demand.to_dvector();
    let solution = rpi_solve(b.matrix(), &tau, health, cfg, 0.0, max_thrust)?;
    let rows = masked(b, health) * &solution.thrusts;
    Ok(finish(solution, b, health, &rows, &tau, ControlScope::Full))
}

/// Allocate only the three rows left after removing `channel`.
pub fn reduced_allocate(
    demand: &Vector3<f64>,
    channel: Channel,
    b: &EffectivenessMatrix,
    health: &HealthVector,
    cfg: &AllocatorConfig,
    max_thrust: f64,
) -> Result<AllocationResult> {
    if !demand.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("demand", "non-finite wrench demand"));
    }
    let tau = DVector::from_column_slice(demand.as_slice());
    let reduced = b.without_row(channel.row());
    let solution = rpi_solve(&reduced, &tau, health, cfg, 0.0, max_thrust)?;
    let mut reduced_masked = reduced;
    for i in health.failed() {
        reduced_masked.column_mut(i).fill(0.0);
    }
    let rows = reduced_masked * &solution.thrusts;
    Ok(finish(solution, b, health, &rows, &tau, ControlScope::Reduced(channel)))
}

/// `Ω_cmd = √(f / κ_T)` [rad/s].
pub fn thrust_to_speed_cmd(thrusts: &DVector<f64>, thrust_factor: f64) -> Result<DVector<f64>> {
    if let Some(n) = thrusts.iter().position(|&f| !(f >= 0.0)) {
        return Err(Error::invalid(
            format!("thrust[{}]", n + 1),
            format!("{} is negative", thrusts[n]),
        ));
    }
    Ok(thrusts.map(|f| (f / thrust_factor).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vehicle::{build_effectiveness, SpinConfig, VehicleParams};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn setup(cfg: &str) -> (VehicleParams, EffectivenessMatrix) {
        let p = VehicleParams::hexacopter(&cfg.parse::<SpinConfig>().unwrap()).unwrap();
        let b = build_effectiveness(&p, &HealthVector::nominal(6)).unwrap();
        (p, b)
    }

    #[test]
    fn symmetric_hover_is_uniform() {
        let (p, b) = setup("PNPNPN");
        let r = rpi_allocate(&Wrench::hover(&p), &b, &HealthVector::nominal(6), &AllocatorConfig::default(), p.max_thrust).unwrap();
        for f in r.thrusts.iter() {
            assert_relative_eq!(*f, p.weight() / 6.0, epsilon = 1e-8);
        }
        assert_eq!(r.iterations, 1);
        assert!(r.residual < 1e-7);
        assert!(r.saturated.is_empty());
    }

    #[test]
    fn zero_demand_zero_thrust() {
        let (p, b) = setup("PPNNPN");
        let r = rpi_allocate(&Wrench::default(), &b, &HealthVector::nominal(6), &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert_eq!(r.thrusts.norm(), 0.0);
    }

    #[test]
    fn faulty_rotor_masked_and_hover_met() {
        let (p, b) = setup("PPNNPN");
        let health = HealthVector::with_failed(6, &[0]).unwrap();
        let r = rpi_allocate(&Wrench::hover(&p), &b, &health, &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert_eq!(r.thrusts[0], 0.0);
        assert!(r.residual < 1e-6, "residual {}", r.residual);
        assert_eq!(r.index_vector[0], 1);
    }

    #[test]
    fn saturation_is_redistributed() {
        let (p, b) = setup("PPNNPN");
        let demand = Wrench::new(p.weight(), 2.5, 0.0, 0.0);
        let r = rpi_allocate(&demand, &b, &HealthVector::nominal(6), &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert!(!r.saturated.is_empty(), "{:?}", r.thrusts);
        assert!(r.iterations > 1);
        assert!(r.thrusts.iter().all(|&f| (0.0..=p.max_thrust).contains(&f)));
    }

    #[test]
    fn reduced_yaw_hover_is_feasible() {
        let (p, b) = setup("PPNNPN");
        let health = HealthVector::with_failed(6, &[4]).unwrap();
        let demand = Vector3::new(p.weight(), 0.0, 0.0);
        let r = reduced_allocate(&demand, Channel::Yaw, &b, &health, &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert!(r.residual < 1e-6);
        assert_eq!(r.thrusts[4], 0.0);
        assert_eq!(r.scope, ControlScope::Reduced(Channel::Yaw));
        // the yaw row is free, so a nonzero yaw moment is left over
        assert!(r.achieved.yaw.abs() > 1e-3);
    }

    #[test]
    fn reduced_differs_from_full() {
        let (p, b) = setup("PPNNPN");
        let health = HealthVector::nominal(6);
        let full_demand = Wrench::new(p.weight(), 0.05, -0.05, 0.1);
        let cfg = AllocatorConfig::default();
        let full = rpi_allocate(&full_demand, &b, &health, &cfg, p.max_thrust).unwrap();
        let reduced = reduced_allocate(&Channel::Yaw.remove_from(&full_demand.to_vector()), Channel::Yaw, &b, &health, &cfg, p.max_thrust).unwrap();
        assert!((full.thrusts - reduced.thrusts).norm() > 1e-6);
    }

    #[test]
    fn all_failed_is_best_effort() {
        let (p, b) = setup("PPNNPN");
        let health = HealthVector::with_failed(6, &[0, 1, 2, 3, 4, 5]).unwrap();
        let r = rpi_allocate(&Wrench::hover(&p), &b, &health, &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert!(r.exhausted);
        assert_eq!(r.thrusts.norm(), 0.0);
        assert_relative_eq!(r.residual, p.weight());
        let r = reduced_allocate(&Vector3::new(p.weight(), 0.0, 0.0), Channel::Yaw, &b, &health, &AllocatorConfig::default(), p.max_thrust).unwrap();
        assert_eq!(r.thrusts.norm(), 0.0);
    }

    #[test]
    fn pre_zeroed_column_equals_fault_flag() {
        let (p, b) = setup("PPNNPN");
        let demand = Wrench::new(p.weight() * 1.2, 0.3, -0.2, 0.05);
        let cfg = AllocatorConfig::default();
        let flagged = rpi_allocate(&demand, &b, &HealthVector::with_failed(6, &[2]).unwrap(), &cfg, p.max_thrust).unwrap();
        let mut zeroed = b.matrix().clone();
        zeroed.column_mut(2).fill(0.0);
        let zeroed = EffectivenessMatrix::from_matrix(zeroed).unwrap();
        let pre = rpi_allocate(&demand, &zeroed, &HealthVector::nominal(6), &cfg, p.max_thrust).unwrap();
        assert_relative_eq!(flagged.thrusts, pre.thrusts, epsilon = 1e-12);
    }

    #[test]
    fn speed_commands() {
        let f = DVector::from_vec(vec![0.0, 1e-5, 1.6]);
        let omega = thrust_to_speed_cmd(&f, 1e-5).unwrap();
        assert_eq!(omega[0], 0.0);
        assert_relative_eq!(omega[1], 1.0);
        assert_relative_eq!(omega[2], 400.0, epsilon = 1e-9);
        assert!(thrust_to_speed_cmd(&DVector::from_vec(vec![-1.0]), 1e-5).is_err());
    }

    #[test]
    fn config_validation() {
        let cfg = AllocatorConfig {
            weights: Some(DVector::from_vec(vec![1.0, -1.0])),
            ..Default::default()
        };
        assert!(cfg.validate(2).is_err());
        assert!(cfg.validate(3).is_err());
    }

    proptest! {
        #[test]
        fn thrusts_stay_in_box(
            thrust in 0.0..60.0f64,
            roll in -3.0..3.0f64, pitch in -3.0..3.0f64, yaw in -1.0..1.0f64,
            failed in prop::collection::vec(0usize..6, 0..3),
        ) {
            let (p, b) = setup("PPNNPN");
            let health = HealthVector::with_failed(6, &failed).unwrap();
            let r = rpi_allocate(&Wrench::new(thrust, roll, pitch, yaw), &b, &health, &AllocatorConfig::default(), p.max_thrust).unwrap();
            for (n, f) in r.thrusts.iter().enumerate() {
                prop_assert!(*f >= 0.0 && *f <= p.max_thrust);
                if !health.is_healthy(n) {
                    prop_assert_eq!(*f, 0.0);
                }
            }
            prop_assert!(r.iterations <= 6);
        }
    }
}
