//! Independent check of the authority indices.
//!
//! Membership of a point in the attainable set is decided by solving the
//! box-constrained least-squares problem `min ‖B f − τ‖, 0 ≤ f ≤ F` and
//! certifying the answer: a feasible `f` with zero residual proves
//! membership, and a strictly separating direction built from the residual
//! proves exclusion. Boundary distance of an interior point is estimated
//! from the support function, `min_ξ h_T(ξ) − ξᵀτ` over random unit `ξ`,
//! followed by a local random search around the best directions. Neither
//! route enumerates facets.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Inside,
    Outside,
    Inconclusive,
}

/// Closest attainable wrench found by projected gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct NearestPoint {
    pub thrusts: DVector<f64>,
    pub distance: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub verdict: Verdict,
    /// Signed distance estimate: boundary distance when inside, minus the
    /// distance to the set when outside.
    pub distance: f64,
    /// `‖B f − τ‖` of the best feasible thrust vector.
    pub residual: f64,
}

/// Support function `h_T(ξ) = max_{f ∈ box} ξᵀ B f`.
pub fn support(b: &DMatrix<f64>, max_thrust: f64, direction: &DVector<f64>) -> f64 {
    b.column_iter().map(|c| direction.dot(&c).max(0.0) * max_thrust).sum()
}

/// Accelerated projected gradient on `½‖B f − τ‖²` over the thrust box,
/// with adaptive restart.
pub fn nearest_attainable(b: &DMatrix<f64>, max_thrust: f64, tau: &DVector<f64>, max_iter: usize) -> NearestPoint {
    let n = b.ncols();
    let gram = b.transpose() * b;
    let lipschitz = gram.clone().symmetric_eigenvalues().max().max(0.0);
    if lipschitz == 0.0 {
        return NearestPoint {
            thrusts: DVector::zeros(n),
            distance: tau.norm(),
            iterations: 0,
        };
    }
    let step = 1.0 / lipschitz;
    let bt_tau = b.transpose() * tau;
    let project = |f: &mut DVector<f64>| f.apply(|x| *x = x.clamp(0.0, max_thrust));
    let objective = |f: &DVector<f64>| (b * f - tau).norm_squared();

    let mut f = DVector::from_element(n, max_thrust / 2.0);
    let mut y = f.clone();
    let mut t = 1.0_f64;
    let mut last = objective(&f);
    let tol = 1e-30 * (1.0 + tau.norm_squared());
    let mut iterations = 0;
    let mut stalled = 0;
    for k in 0..max_iter {
        iterations = k + 1;
        let grad = &gram * &y - &bt_tau;
        let mut next = &y - grad * step;
        project(&mut next);
        let value = objective(&next);
        if value > last {
            // restart momentum
            y = f.clone();
            t = 1.0;
            continue;
        }
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        y = &next + (&next - &f) * ((t - 1.0) / t_next);
        t = t_next;
        f = next;
        if last - value <= 1e-15 * value {
            stalled += 1;
        } else {
            stalled = 0;
        }
        last = value;
        if value <= tol || stalled > 2_000 {
            break;
        }
    }
    NearestPoint {
        distance: last.sqrt(),
        thrusts: f,
        iterations,
    }
}

/// Decide whether `tau ∈ T` and estimate its signed boundary distance.
pub fn membership_oracle(
    b: &DMatrix<f64>,
    max_thrust: f64,
    tau: &DVector<f64>,
    samples: usize,
    seed: u64,
) -> Result<OracleReport> {
    if samples < 10_000 {
        return Err(Error::invalid("samples", format!("{samples} < 10000")));
    }
    if tau.len() != b.nrows() {
        return Err(Error::Dimension {
            what: "query length",
            expected: b.nrows(),
            got: tau.len(),
        });
    }
    let scale = 1.0 + tau.norm() + max_thrust * b.abs().max() * b.ncols() as f64;
    let nearest = nearest_attainable(b, max_thrust, tau, 200_000);
    let residual = nearest.distance;

    let verdict = if residual <= 1e-9 * scale {
        Verdict::Inside
    } else {
        let gap = tau - b * &nearest.thrusts;
        let xi = &gap / gap.norm();
        let separation = xi.dot(tau) - support(b, max_thrust, &xi);
        if separation > 1e-12 * scale {
            Verdict::Outside
        } else {
            Verdict::Inconclusive
        }
    };

    let distance = match verdict {
        Verdict::Inside => boundary_distance(b, max_thrust, tau, samples, seed),
        Verdict::Outside => -residual,
        Verdict::Inconclusive => 0.0,
    };
    Ok(OracleReport {
        verdict,
        distance,
        residual,
    })
}

fn boundary_distance(b: &DMatrix<f64>, max_thrust: f64, tau: &DVector<f64>, samples: usize, seed: u64) -> f64 {
    let m = b.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let margin = |xi: &DVector<f64>| support(b, max_thrust, xi) - xi.dot(tau);
    let random_unit = |rng: &mut ChaCha8Rng| {
        let v = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = v.norm();
        v / norm
    };

    let mut best: Vec<(f64, DVector<f64>)> = Vec::with_capacity(samples);
    for _ in 0..samples {
        let xi = random_unit(&mut rng);
        best.push((margin(&xi), xi));
    }
    best.sort_by(|a, b| a.0.total_cmp(&b.0));
    best.truncate(8);

    let mut overall = f64::INFINITY;
    for (mut value, mut xi) in best {
        let mut radius = 0.2;
        while radius > 1e-9 {
            let mut improved = false;
            for _ in 0..32 {
                let trial = &xi + random_unit(&mut rng) * radius;
                let trial = &trial / trial.norm();
                let v = margin(&trial);
                if v < value {
                    value = v;
                    xi = trial;
                    improved = true;
                }
            }
            if !improved {
                radius *= 0.5;
            }
        }
        overall = overall.min(value);
    }
    overall
}
