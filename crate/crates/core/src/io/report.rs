//! Tables and text summaries for controllability results and runs.

use std::fmt::Write as _;

use super::table::CsvTable;
use crate::controllability::{
    analyze, combinations, plan_reduction, ArcaiRow, ArcaiTable, ControlScope, ControllabilityReport, IndexOptions,
};
use crate::sim::{RunStatus, Scenario, SimRun};
use crate::vehicle::{HealthVector, VehicleParams};
use crate::Result;

/// `1+3` style label, `none` for the empty set.
pub fn set_label(set: &[usize]) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|n| (n + 1).to_string()).collect::<Vec<_>>().join("+")
}

fn report_cells(r: &ControllabilityReport) -> [String; 4] {
    [
        format!("{:.8e}", r.rho),
        u8::from(r.degenerate).to_string(),
        u8::from(r.rank_ok).to_string(),
        u8::from(r.controllable).to_string(),
    ]
}

/// Full-state index for every failure set of at most `max_failures`
/// rotors, nominal first.
pub fn acai_sweep_table(params: &VehicleParams, max_failures: usize) -> Result<CsvTable> {
    let n = params.rotor_count();
    let mut rows = Vec::new();
    for k in 0..=max_failures.min(n) {
        for set in combinations(n, k) {
            let r = analyze(params, &HealthVector::with_failed(n, &set)?, ControlScope::Full, &IndexOptions::default())?;
            let mut row = vec![set_label(&set)];
            row.extend(report_cells(&r));
            rows.push(row);
        }
    }
    Ok(CsvTable {
        header: ["failed", "rho", "degenerate", "rank_ok", "controllable"].map(String::from).to_vec(),
        rows,
    })
}

/// Full and reduced indices per failure set, with the reconfiguration
/// chosen for it.
pub fn arcai_rows_table<'a>(rows: impl IntoIterator<Item = &'a ArcaiRow>) -> CsvTable {
    let header = [
        "failed",
        "rho_full",
        "rho_phi",
        "rho_theta",
        "rho_psi",
        "rho_h",
        "controllable",
        "plan",
    ]
    .map(String::from)
    .to_vec();
    let rows = rows
        .into_iter()
        .map(|r| {
            let mut row = vec![set_label(&r.failure_set)];
            row.extend([&r.full, &r.roll, &r.pitch, &r.yaw, &r.altitude].map(|c| format!("{:.8e}", c.rho)));
            row.push(u8::from(r.full.controllable).to_string());
            row.push(plan_reduction(r).to_string());
            row
        })
        .collect();
    CsvTable { header, rows }
}

pub fn arcai_table_csv(table: &ArcaiTable) -> CsvTable {
    arcai_rows_table(std::iter::once(&table.nominal).chain(&table.single))
}

/// Human-readable run summary, one `key: value` per line.
pub fn run_summary(scenario: &Scenario, run: &SimRun) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "scenario: {}", scenario.name);
    match &run.status {
        RunStatus::Completed => {
            let _ = writeln!(s, "status: completed");
        }
        RunStatus::Crashed { t, reason } => {
            let _ = writeln!(s, "status: crashed at {t:.3} s ({reason})");
        }
    }
    let _ = writeln!(s, "records: {}", run.log.len());
    if let Some(end) = run.log.end_time() {
        let _ = writeln!(s, "end_time: {end:.3} s");
    }
    for fault in &scenario.faults {
        let _ = writeln!(s, "fault: rotor {} at {:.3} s", fault.rotor + 1, fault.t_inject);
    }
    for d in &run.detections {
        let latency = d.latency().map(|l| format!(", latency {:.1} ms", 1e3 * l)).unwrap_or_else(|| ", no matching fault".into());
        let _ = writeln!(s, "detected: rotor {} at {:.3} s{latency}", d.rotor + 1, d.detected_at);
    }
    for m in &run.mode_changes {
        let _ = writeln!(s, "mode: {} -> {} at {:.3} s (failed {})", m.from, m.to, m.t, set_label(&m.failure_set));
    }
    let _ = writeln!(s, "final_mode: {}", run.final_mode());
    let err = run.log.records.iter().map(|r| r.position_error()).fold(0.0, f64::max);
    let _ = writeln!(s, "max_position_error: {err:.4} m");
    let tilt = run
        .log
        .records
        .iter()
        .map(|r| r.attitude.x.abs().max(r.attitude.y.abs()))
        .fold(0.0, f64::max);
    let _ = writeln!(s, "max_tilt: {:.3} deg", tilt.to_degrees());
    if let Some(last) = run.log.records.last() {
        let _ = writeln!(s, "final_yaw_rate: {:.3} deg/s", last.rates.z.to_degrees());
    }
    s
}
