//! Rotor fault detection from thrust residuals.
//!
//! The thrust each rotor actually produces is compared against what a
//! healthy onboard model of the motor predicts for the same command. A
//! rotor whose residual exceeds the threshold for `persistence`
//! consecutive samples, after the start time, is declared failed and stays
//! failed.

use nalgebra::DVector;

use crate::vehicle::HealthVector;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdiConfig {
    /// Residual threshold Δ₀ [N].
    pub threshold: f64,
    /// Detection is inactive before this time [s].
    pub start_time: f64,
    /// Consecutive exceedances needed to declare a fault.
    pub persistence: u32,
}

impl FdiConfig {
    /// Threshold at a quarter of the per-rotor hover thrust, start at 2 s,
    /// two consecutive samples.
    pub fn for_hover_thrust(hover_thrust: f64) -> Self {
        FdiConfig {
            threshold: 0.25 * hover_thrust,
            start_time: 2.0,
            persistence: 2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return Err(Error::invalid("fdi.threshold", "must be > 0"));
        }
        if !(self.start_time > 0.0 && self.start_time.is_finite()) {
            return Err(Error::invalid("fdi.start_time", "must be > 0"));
        }
        if self.persistence == 0 {
            return Err(Error::invalid("fdi.persistence", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdiState {
    pub estimated: HealthVector,
    /// Latest `|Δf|` per rotor [N].
    pub residuals: DVector<f64>,
    pub counters: Vec<u32>,
    /// Time at which each rotor was declared failed.
    pub detected_at: Vec<Option<f64>>,
}

impl FdiState {
    pub fn new(rotors: usize) -> Self {
        FdiState {
            estimated: HealthVector::nominal(rotors),
            residuals: DVector::zeros(rotors),
            counters: vec![0; rotors],
            detected_at: vec![None; rotors],
        }
    }

    pub fn is_latched(&self, n: usize) -> bool {
        !self.estimated.is_healthy(n)
    }

    /// Processes one sample and returns the rotors newly declared failed.
    pub fn update(
        &mut self,
        t: f64,
        measured: &DVector<f64>,
        model: &DVector<f64>,
        cfg: &FdiConfig,
    ) -> Result<Vec<usize>> {
        let n = self.counters.len();
        for (what, v) in [("measured thrust", measured), ("model thrust", model)] {
            if v.len() != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        self.residuals = (measured - model).abs();
        let mut fresh = Vec::new();
        if t < cfg.start_time {
            return Ok(fresh);
        }
        for i in 0..n {
            if self.is_latched(i) {
                continue;
            }
            if self.residuals[i] > cfg.threshold {
                self.counters[i] += 1;
            } else {
                self.counters[i] = 0;
            }
            if self.counters[i] >= cfg.persistence {
                self.estimated.fail(i)?;
                self.detected_at[i] = Some(t);
                fresh.push(i);
            }
        }
        Ok(fresh)
    }
}

/// Functional form of [`FdiState::update`].
pub fn fdi_update(
    state: &FdiState,
    t: f64,
    measured: &DVector<f64>,
    model: &DVector<f64>,
    cfg: &FdiConfig,
) -> Result<FdiState> {
    let mut next = state.clone();
    next.update(t, measured, model, cfg)?;
    Ok(next)
}

/// Healthy first-order motor model driven by the speed commands.
#[derive(Debug, Clone, PartialEq)]
pub struct OnboardThrustModel {
    speeds: DVector<f64>,
    time_constant: f64,
    thrust_factor: f64,
}

impl OnboardThrustModel {
    pub fn new(initial_speeds: DVector<f64>, time_constant: f64, thrust_factor: f64) -> Self {
        OnboardThrustModel {
            speeds: initial_speeds,
            time_constant,
            thrust_factor,
        }
    }

    /// Advances the model by `dt` with `command` held, using the exact
    /// solution of the lag.
    pub fn propagate(&mut self, command: &DVector<f64>, dt: f64) {
        let decay = (-dt / self.time_constant).exp();
        self.speeds = command + (&self.speeds - command) * decay;
    }

    /// Thrust a healthy rotor would produce now, `κ_T Ω²`.
    pub fn thrusts(&self) -> DVector<f64> {
        self.speeds.map(|w| self.thrust_factor * w * w)
    }

    pub fn speeds(&self) -> &DVector<f64> {
        &self.speeds
    }
}

/// Model thrust after a history of commands, each held for `dt`, starting
/// from rest.
pub fn model_thrust(commands: &[DVector<f64>], time_constant: f64, thrust_factor: f64, dt: f64) -> Option<DVector<f64>> {
    let first = commands.first()?;
    let mut model = OnboardThrustModel::new(DVector::zeros(first.len()), time_constant, thrust_factor);
    for cmd in commands {
        model.propagate(cmd, dt);
    }
    Some(model.thrusts())
}
