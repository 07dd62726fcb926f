use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use super::index::{signed_authority, IndexOptions};
use super::linear::linear_hover_model;
use super::{Channel, ControlScope};
use crate::vehicle::{HealthVector, VehicleParams};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ControllabilityReport {
    /// Signed authority index in raw wrench units.
    pub rho: f64,
    pub degenerate: bool,
    pub rank_ok: bool,
    /// `rank_ok && rho > 0`.
    pub controllable: bool,
    /// Zero-based failed rotors.
    pub failure_set: Vec<usize>,
    pub scope: ControlScope,
}

/// Controllability of the hover model for one health pattern and scope.
pub fn analyze(
    params: &VehicleParams,
    health: &HealthVector,
    scope: ControlScope,
    options: &IndexOptions,
) -> Result<ControllabilityReport> {
    let model = linear_hover_model(params, health)?;
    let (rank_ok, index) = match scope {
        ControlScope::Full => {
            let g = DVector::from_column_slice(model.gravity.as_slice());
            let index = signed_authority(model.effectiveness.matrix(), params.max_thrust, &g, options)?;
            (model.controllability_rank() == 8, index)
        }
        ControlScope::Reduced(channel) => {
            let reduced = model.reduce(channel);
            let options = match &options.row_scale {
                Some(scale) => {
                    let mut scale = scale.clone();
                    scale.remove(channel.row());
                    IndexOptions { row_scale: Some(scale) }
                }
                None => IndexOptions::default(),
            };
            let index = signed_authority(&reduced.allocation, params.max_thrust, &reduced.gravity, &options)?;
            (reduced.controllability_rank() == 6, index)
        }
    };
    Ok(ControllabilityReport {
        rho: index.rho,
        degenerate: index.degenerate,
        rank_ok,
        controllable: rank_ok && index.rho > 0.0,
        failure_set: health.failed(),
        scope,
    })
}

/// Full-state reports for every failure set of size ≤ `max_failures`,
/// laid out as a symmetric N×N grid: cell `(i, i)` is the single failure
/// of rotor `i`, cell `(i, j)` the pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureGrid {
    pub nominal: ControllabilityReport,
    pub cells: Vec<Vec<Option<ControllabilityReport>>>,
}

impl FailureGrid {
    pub fn size(&self) -> usize {
        self.cells.len()
    }

    pub fn cell(&self, i: usize, j: usize) -> Option<&ControllabilityReport> {
        self.cells[i][j].as_ref()
    }
}

pub fn failure_grid(params: &VehicleParams, max_failures: usize) -> Result<FailureGrid> {
    let n = params.rotor_count();
    let opts = IndexOptions::default();
    let nominal = analyze(params, &HealthVector::nominal(n), ControlScope::Full, &opts)?;
    let mut cells = vec![vec![None; n]; n];
    if max_failures >= 1 {
        for i in 0..n {
            let health = HealthVector::with_failed(n, &[i])?;
            cells[i][i] = Some(analyze(params, &health, ControlScope::Full, &opts)?);
        }
    }
    if max_failures >= 2 {
        for i in 0..n {
            for j in i + 1..n {
                let health = HealthVector::with_failed(n, &[i, j])?;
                let report = analyze(params, &health, ControlScope::Full, &opts)?;
                cells[j][i] = Some(report.clone());
                cells[i][j] = Some(report);
            }
        }
    }
    Ok(FailureGrid { nominal, cells })
}

/// Full and reduced reports for one health pattern.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcaiRow {
    pub failure_set: Vec<usize>,
    pub full: ControllabilityReport,
    pub roll: ControllabilityReport,
    pub pitch: ControllabilityReport,
    pub yaw: ControllabilityReport,
    /// Altitude-uncontrolled variant, reported separately from the
    /// attitude columns.
    pub altitude: ControllabilityReport,
}

impl ArcaiRow {
    pub fn compute(params: &VehicleParams, health: &HealthVector) -> Result<Self> {
        let opts = IndexOptions::default();
        let reduced = |c| analyze(params, health, ControlScope::Reduced(c), &opts);
        Ok(ArcaiRow {
            failure_set: health.failed(),
            full: analyze(params, health, ControlScope::Full, &opts)?,
            roll: reduced(Channel::Roll)?,
            pitch: reduced(Channel::Pitch)?,
            yaw: reduced(Channel::Yaw)?,
            altitude: reduced(Channel::Altitude)?,
        })
    }

    pub fn reduced(&self, channel: Channel) -> &ControllabilityReport {
        match channel {
            Channel::Altitude => &self.altitude,
            Channel::Roll => &self.roll,
            Channel::Pitch => &self.pitch,
            Channel::Yaw => &self.yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArcaiTable {
    pub nominal: ArcaiRow,
    /// Row `n` is the single failure of rotor `n`.
    pub single: Vec<ArcaiRow>,
}

pub fn arcai_table(params: &VehicleParams) -> Result<ArcaiTable> {
    let n = params.rotor_count();
    let nominal = ArcaiRow::compute(params, &HealthVector::nominal(n))?;
    let single = (0..n)
        .map(|i| ArcaiRow::compute(params, &HealthVector::with_failed(n, &[i])?))
        .collect::<Result<Vec<_>>>()?;
    Ok(ArcaiTable { nominal, single })
}

/// What the vehicle can still control after a set of failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reduction {
    Full,
    Reduced(Channel),
    Lost,
}

impl Reduction {
    pub fn scope(self) -> ControlScope {
        match self {
            Reduction::Reduced(c) => ControlScope::Reduced(c),
            Reduction::Full | Reduction::Lost => ControlScope::Full,
        }
    }
}

impl fmt::Display for Reduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Reduction::Lost => f.write_str("lost"),
            other => write!(f, "{}", other.scope()),
        }
    }
}

impl FromStr for Reduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Reduction::Full),
            "lost" => Ok(Reduction::Lost),
            _ => s
                .strip_prefix("reduced-")
                .and_then(Channel::from_name)
                .map(Reduction::Reduced)
                .ok_or_else(|| Error::invalid("mode", format!("unknown mode '{s}'"))),
        }
    }
}

/// Precomputed controllability for failure sets, used to decide
/// reconfiguration in flight.
#[derive(Debug, Clone)]
pub struct ReductionTable {
    params: VehicleParams,
    rows: HashMap<Vec<usize>, ArcaiRow>,
}

impl ReductionTable {
    /// Evaluates every failure set with at most `depth` rotors.
    pub fn precompute(params: &VehicleParams, depth: usize) -> Result<Self> {
        let n = params.rotor_count();
        let mut rows = HashMap::new();
        for k in 0..=depth.min(n) {
            for set in super::index::combinations(n, k) {
                let row = ArcaiRow::compute(params, &HealthVector::with_failed(n, &set)?)?;
                rows.insert(set, row);
            }
        }
        Ok(ReductionTable {
            params: params.clone(),
            rows,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, failure_set: &[usize]) -> bool {
        self.rows.contains_key(failure_set)
    }

    /// Row for `health`, computed and cached if it was not precomputed.
    pub fn row(&mut self, health: &HealthVector) -> Result<&ArcaiRow> {
        let key = health.failed();
        if !self.rows.contains_key(&key) {
            let row = ArcaiRow::compute(&self.params, health)?;
            self.rows.insert(key.clone(), row);
        }
        Ok(&self.rows[&key])
    }

    pub fn plan(&mut self, health: &HealthVector) -> Result<Reduction> {
        Ok(plan_reduction(self.row(health)?))
    }
}

/// Full control when the full index is positive; otherwise the attitude
/// channel whose removal leaves the largest positive reduced index, with
/// ties resolved toward yaw, then pitch, then roll. Altitude is never
/// chosen.
pub fn plan_reduction(row: &ArcaiRow) -> Reduction {
    if row.full.controllable {
        return Reduction::Full;
    }
    let mut choice: Option<(Channel, f64)> = None;
    for channel in [Channel::Yaw, Channel::Pitch, Channel::Roll] {
        let report = row.reduced(channel);
        if !report.controllable {
            continue;
        }
        let better = match choice {
            None => true,
            Some((_, best)) => report.rho > best + 1e-12 * best.abs().max(1.0),
        };
        if better {
            choice = Some((channel, report.rho));
        }
    }
    match choice {
        Some((channel, _)) => Reduction::Reduced(channel),
        None => Reduction::Lost,
    }
}
