//! Cross-module properties checked on random instances.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use coplanar::allocation::{rpi_allocate, AllocatorConfig};
use coplanar::controllability::{
    linear_hover_model, membership_oracle, signed_authority, ArcaiRow, Channel, IndexOptions, Verdict,
};
use coplanar::vehicle::{build_effectiveness, HealthVector, Spin, SpinConfig, VehicleParams, Wrench};

fn spins(n: usize) -> impl Strategy<Value = SpinConfig> {
    proptest::collection::vec(any::<bool>(), n)
        .prop_map(|v| SpinConfig::new(v.into_iter().map(|p| if p { Spin::Ccw } else { Spin::Cw }).collect()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Inside the set the oracle's sampled support margin can only
    /// overestimate the boundary distance, and should come close to it.
    #[test]
    fn oracle_distance_matches_index_magnitude(
        cols in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 4..7),
        frac in proptest::collection::vec(0.2f64..0.8, 7),
        seed in 0u64..1000,
    ) {
        let n = cols.len();
        let b = DMatrix::from_fn(3, n, |i, j| cols[j][i]);
        let f = DVector::from_fn(n, |j, _| frac[j]);
        let point = &b * f;
        let rho = signed_authority(&b, 1.0, &point, &IndexOptions::default()).unwrap().rho;
        prop_assume!(rho > 1e-6);
        let report = membership_oracle(&b, 1.0, &point, 10_000, seed).unwrap();
        prop_assert_eq!(report.verdict, Verdict::Inside);
        prop_assert!(report.distance >= rho - 1e-9, "{} < {}", report.distance, rho);
        prop_assert!(report.distance <= rho * 1.01 + 1e-9, "{} >> {}", report.distance, rho);
    }

    /// Outside the set, the index never claims more violation than the
    /// Euclidean distance to the set.
    #[test]
    fn outside_index_is_bounded_by_distance(
        cols in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 3), 4..7),
        offset in proptest::collection::vec(-4.0f64..4.0, 3),
    ) {
        let n = cols.len();
        let b = DMatrix::from_fn(3, n, |i, j| cols[j][i]);
        let point = DVector::from_column_slice(&offset);
        let rho = signed_authority(&b, 1.0, &point, &IndexOptions::default()).unwrap().rho;
        prop_assume!(rho < -1e-6);
        let report = membership_oracle(&b, 1.0, &point, 10_000, 1).unwrap();
        prop_assert_eq!(report.verdict, Verdict::Outside);
        prop_assert!(rho >= report.distance - 1e-7, "{} < {}", rho, report.distance);
    }

    /// Structural rank holds for any co-planar layout with at least four
    /// healthy rotors that still span the wrench space.
    #[test]
    fn hover_model_rank(config in spins(6), failed in 0usize..6) {
        let params = VehicleParams::hexacopter(&config).unwrap();
        let health = HealthVector::with_failed(6, &[failed]).unwrap();
        let model = linear_hover_model(&params, &health).unwrap();
        let b = model.effectiveness.matrix();
        if b.rank(1e-9) == 4 {
            prop_assert_eq!(model.controllability_rank(), 8);
        }
        for channel in Channel::ATTITUDE {
            let reduced = model.reduce(channel);
            if reduced.allocation.rank(1e-9) == 3 {
                prop_assert_eq!(reduced.controllability_rank(), 6);
            }
        }
    }

    /// A ball around G inside the full set projects to a ball of the same
    /// radius inside the reduced one.
    #[test]
    fn reduced_index_dominates_full(config in spins(6), failed in 0usize..6) {
        let params = VehicleParams::hexacopter(&config).unwrap();
        let health = HealthVector::with_failed(6, &[failed]).unwrap();
        let row = ArcaiRow::compute(&params, &health).unwrap();
        prop_assume!(row.full.rho > 0.0);
        for channel in Channel::ALL {
            prop_assert!(row.reduced(channel).rho >= row.full.rho - 1e-9);
        }
    }
}

/// Whenever the full index is positive, the hover wrench is allocated
/// exactly inside the bounds. Every hexacopter spin pattern and single
/// failure is checked.
#[test]
fn controllable_hover_is_allocated_exactly() {
    let mut checked = 0;
    for bits in 0u32..64 {
        let config = SpinConfig::new((0..6).map(|i| if bits >> i & 1 == 1 { Spin::Ccw } else { Spin::Cw }).collect());
        let params = VehicleParams::hexacopter(&config).unwrap();
        let b = build_effectiveness(&params, &HealthVector::nominal(6)).unwrap();
        let g = Wrench::hover(&params);
        for failed in 0..6 {
            let health = HealthVector::with_failed(6, &[failed]).unwrap();
            if ArcaiRow::compute(&params, &health).unwrap().full.rho <= 1e-6 {
                continue;
            }
            checked += 1;
            let result = rpi_allocate(&g, &b, &health, &AllocatorConfig::default(), params.max_thrust).unwrap();
            assert!(result.residual < 1e-6 * (1.0 + params.weight()), "{config} rotor {}: {}", failed + 1, result.residual);
            assert_eq!(result.thrusts[failed], 0.0);
        }
    }
    assert!(checked > 0);
}
