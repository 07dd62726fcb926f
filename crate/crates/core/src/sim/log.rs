//! Per-control-step records of a run.

use nalgebra::{DVector, Vector3};

use crate::controllability::Reduction;
use crate::vehicle::Wrench;

/// One control step. Angles and rates are in radians here; the CSV writer
/// converts them to degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub t: f64,
    /// NED [m].
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    /// `(φ, θ, ψ)`.
    pub attitude: Vector3<f64>,
    /// `(p, q, r)`.
    pub rates: Vector3<f64>,
    pub reference_position: Vector3<f64>,
    pub reference_heading: f64,
    /// Wrench demanded by the controller.
    pub demand: Wrench,
    /// Wrench the rotors actually produce.
    pub achieved: Wrench,
    /// Allocated thrusts [N].
    pub thrusts: DVector<f64>,
    pub speed_commands: DVector<f64>,
    pub speeds: DVector<f64>,
    pub residuals: DVector<f64>,
    /// Estimated health, 1 healthy and 0 failed.
    pub health: DVector<f64>,
    pub mode: Reduction,
    pub allocation_residual: f64,
    pub iterations: usize,
}

impl LogRecord {
    pub fn position_error(&self) -> f64 {
        (self.position - self.reference_position).norm()
    }
}

/// Records in time order. Columns are fixed; see [`SimLog::header`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimLog {
    pub rotors: usize,
    pub records: Vec<LogRecord>,
}

impl SimLog {
    pub fn new(rotors: usize) -> Self {
        SimLog {
            rotors,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn push(&mut self, record: LogRecord) {
        debug_assert!(self.records.last().is_none_or(|r| r.t < record.t));
        self.records.push(record);
    }

    /// Column names in output order. Per-rotor columns are numbered from 1.
    pub fn header(&self) -> Vec<String> {
        let mut h: Vec<String> = [
            "t", "x", "y", "z", "u", "v", "w", "phi", "theta", "psi", "p", "q", "r", "x_ref", "y_ref", "z_ref",
            "psi_ref", "thrust_d", "roll_d", "pitch_d", "yaw_d", "thrust_a", "roll_a", "pitch_a", "yaw_a",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        for prefix in ["f", "omega_cmd", "omega", "residual", "eps_hat"] {
            h.extend((1..=self.rotors).map(|n| format!("{prefix}{n}")));
        }
        h.extend(["mode", "alloc_residual", "iterations"].map(String::from));
        h
    }

    /// Records with `t >= t0`.
    pub fn since(&self, t0: f64) -> &[LogRecord] {
        let start = self.records.partition_point(|r| r.t < t0);
        &self.records[start..]
    }

    pub fn end_time(&self) -> Option<f64> {
        self.records.last().map(|r| r.t)
    }

    /// Largest position error over `[t0, t1]`.
    pub fn max_position_error(&self, t0: f64, t1: f64) -> f64 {
        self.since(t0)
            .iter()
            .take_while(|r| r.t <= t1)
            .map(LogRecord::position_error)
            .fold(0.0, f64::max)
    }
}
