use std::collections::HashSet;

use nalgebra::{DMatrix, DVector, Vector3};

use super::oracle::nearest_attainable;
use crate::vehicle::{EffectivenessMatrix, Wrench};
use crate::{Error, Result};

/// Relative size below which a subset of columns is treated as not
/// spanning a facet.
const FACET_RANK_TOL: f64 = 1e-10;
/// Relative size below which the index is reported as exactly zero.
const ZERO_TOL: f64 = 1e-10;
/// Grid used to recognise the same facet normal from different subsets.
const NORMAL_GRID: f64 = 1e-10;

/// Signed distance of the demand point from the boundary of the attainable
/// set. Positive inside, non-positive otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuthorityIndex {
    pub rho: f64,
    /// The attainable set has an empty interior in this wrench space.
    pub degenerate: bool,
}

impl AuthorityIndex {
    pub fn is_positive(&self) -> bool {
        self.rho > 0.0
    }
}

/// Options for [`signed_authority`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IndexOptions {
    /// Optional per-row scaling applied to the effectiveness and demand
    /// before measuring distance. `None` keeps the raw mixed units.
    pub row_scale: Option<Vec<f64>>,
}

/// Full-wrench index for `G` against `T = {B f : 0 ≤ f ≤ F_max}`.
pub fn acai(b: &EffectivenessMatrix, max_thrust: f64, gravity: &Wrench) -> Result<AuthorityIndex> {
    signed_authority(b.matrix(), max_thrust, &gravity.to_dvector(), &IndexOptions::default())
}

/// Reduced-wrench index on a 3×N effectiveness with one row removed.
pub fn arcai(b_reduced: &DMatrix<f64>, max_thrust: f64, gravity: &Vector3<f64>) -> Result<AuthorityIndex> {
    if b_reduced.nrows() != 3 {
        return Err(Error::Dimension {
            what: "reduced effectiveness rows",
            expected: 3,
            got: b_reduced.nrows(),
        });
    }
    let g = DVector::from_column_slice(gravity.as_slice());
    signed_authority(b_reduced, max_thrust, &g, &IndexOptions::default())
}

/// Signed boundary distance of `point` in the zonotope generated by the
/// columns of `b` over `[0, max_thrust]`.
///
/// Every facet of the zonotope is parallel to `m − 1` generators. For each
/// such subset `S` with unit normal `ξ`, the zonotope lies in the slab
/// `|ξᵀ(τ − c)| ≤ (F/2) Σ_k |ξᵀ b_k|` around its centre `c`, and the margin
/// of `point` inside that slab is exactly its distance to the facet pair.
/// The minimum margin over all facet directions is the distance to the
/// boundary when `point` is inside and negative when it is outside.
pub fn signed_authority(
    b: &DMatrix<f64>,
    max_thrust: f64,
    point: &DVector<f64>,
    options: &IndexOptions,
) -> Result<AuthorityIndex> {
    let m = b.nrows();
    if point.len() != m {
        return Err(Error::Dimension {
            what: "demand vector length",
            expected: m,
            got: point.len(),
        });
    }
    if m < 2 {
        return Err(Error::Dimension {
            what: "wrench dimension",
            expected: 2,
            got: m,
        });
    }
    if !(max_thrust > 0.0 && max_thrust.is_finite()) {
        return Err(Error::invalid("max_thrust", format!("{max_thrust} must be > 0")));
    }

    let (b, point) = match &options.row_scale {
        Some(scale) => {
            if scale.len() != m {
                return Err(Error::Dimension {
                    what: "row scale length",
                    expected: m,
                    got: scale.len(),
                });
            }
            let d = DMatrix::from_diagonal(&DVector::from_column_slice(scale));
            (&d * b, &d * point)
        }
        None => (b.clone(), point.clone()),
    };

    let columns: Vec<DVector<f64>> = b
        .column_iter()
        .filter(|c| c.norm() > 0.0)
        .map(|c| c.into_owned())
        .collect();
    let half = max_thrust / 2.0;
    let offset: DVector<f64> = columns.iter().fold(DVector::zeros(m), |acc, c| acc + c * half) - &point;

    let max_col = columns.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let scale = max_thrust * max_col * columns.len() as f64 + point.norm();
    let full_dimensional = !columns.is_empty() && b.rank(FACET_RANK_TOL * max_col.max(1e-300)) == m;

    let mut seen = HashSet::new();
    let mut rho = f64::INFINITY;
    for subset in combinations(columns.len(), m - 1) {
        let Some(normal) = facet_normal(&columns, &subset) else {
            continue;
        };
        if !seen.insert(normal_key(&normal)) {
            continue;
        }
        let half_width: f64 = columns.iter().map(|c| normal.dot(c).abs()).sum::<f64>() * half;
        let margin = half_width - normal.dot(&offset).abs();
        rho = rho.min(margin);
    }

    if rho.is_infinite() {
        // no facet at all: T is a point, segment or other flat piece
        let nearest = nearest_attainable(&b, max_thrust, &point, 50_000);
        return Ok(AuthorityIndex {
            rho: -nearest.distance,
            degenerate: true,
        });
    }
    if rho.abs() <= ZERO_TOL * scale {
        rho = 0.0;
    }
    Ok(AuthorityIndex {
        rho,
        degenerate: !full_dimensional,
    })
}

/// Unit normal to the span of `m − 1` columns, or `None` if they do not
/// span a hyperplane. Uses the generalized cross product (signed cofactors).
fn facet_normal(columns: &[DVector<f64>], subset: &[usize]) -> Option<DVector<f64>> {
    let m = columns[0].len();
    let s = DMatrix::from_columns(&subset.iter().map(|&k| columns[k].clone()).collect::<Vec<_>>());
    let mut normal = DVector::zeros(m);
    for i in 0..m {
        let minor = s.clone().remove_row(i);
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        normal[i] = sign * minor.determinant();
    }
    let volume: f64 = subset.iter().map(|&k| columns[k].norm()).product();
    let norm = normal.norm();
    if norm <= FACET_RANK_TOL * volume {
        return None;
    }
    Some(normal / norm)
}

fn normal_key(normal: &DVector<f64>) -> Vec<i64> {
    // ξ and −ξ describe the same slab
    let lead = normal.iter().find(|x| x.abs() > 1e-6).copied().unwrap_or(1.0);
    let sign = lead.signum();
    normal.iter().map(|x| (sign * x / NORMAL_GRID).round() as i64).collect()
}

/// All `k`-subsets of `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            extend(i + 1, n, k, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    extend(0, n, k, &mut Vec::with_capacity(k), &mut out);
    out
}
