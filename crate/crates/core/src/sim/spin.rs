//! Steady yaw spin after the yaw channel is given up.

use super::log::SimLog;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinCheck {
    /// Mean yaw rate over the window [rad/s].
    pub rate: f64,
    /// Standard deviation of the yaw rate over the window [rad/s].
    pub std: f64,
    /// Mean of `|N − κ_R r_ss|` over the window [N m].
    pub torque_balance_residual: f64,
    /// `std <= 5 %` of `|rate|`, with a 1e-9 rad/s floor so a rate that
    /// is zero to rounding counts as steady.
    pub steady: bool,
}

/// Yaw-rate statistics over the last `window` seconds of `log`, with the
/// yaw moment balance against rotational damping `κ_R`.
pub fn steady_spin_check(log: &SimLog, window: f64, rotational_damping: f64) -> Result<SpinCheck> {
    let end = log
        .end_time()
        .ok_or_else(|| Error::invalid("log", "empty log"))?;
    let start = log.records[0].t;
    if !(window > 0.0) || end - start < window {
        return Err(Error::invalid(
            "window",
            format!("{window} s is longer than the {:.3} s log", end - start),
        ));
    }
    let tail = log.since(end - window);
    let count = tail.len() as f64;
    let rate = tail.iter().map(|r| r.rates.z).sum::<f64>() / count;
    let var = tail.iter().map(|r| (r.rates.z - rate).powi(2)).sum::<f64>() / count;
    let std = var.sqrt();
    let balance = rotational_damping * rate;
    let torque_balance_residual = tail.iter().map(|r| (r.achieved.yaw - balance).abs()).sum::<f64>() / count;
    Ok(SpinCheck {
        rate,
        std,
        torque_balance_residual,
        steady: std <= (0.05 * rate.abs()).max(1e-9),
    })
}
