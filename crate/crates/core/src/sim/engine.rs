//! The closed-loop run.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::log::{LogRecord, SimLog};
use super::scenario::Scenario;
use super::trajectory::ReferenceProfile;
use crate::allocation::{reduced_allocate, rpi_allocate, thrust_to_speed_cmd};
use crate::controllability::{Reduction, ReductionTable};
use crate::controller::{CommandLimits, NdiController};
use crate::fdi::{FdiState, OnboardThrustModel};
use crate::vehicle::{
    build_effectiveness, rotor_thrusts, step_rk4, HealthVector, MotorState, PlantState, RigidBodyState,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    Crashed { t: f64, reason: String },
}

impl RunStatus {
    pub fn is_crashed(&self) -> bool {
        matches!(self, RunStatus::Crashed { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub rotor: usize,
    /// Injection time of the matching fault, if any.
    pub injected_at: Option<f64>,
    pub detected_at: f64,
}

impl Detection {
    pub fn latency(&self) -> Option<f64> {
        self.injected_at.map(|t| self.detected_at - t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeChange {
    pub t: f64,
    pub from: Reduction,
    pub to: Reduction,
    /// Estimated failure set that triggered the change.
    pub failure_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub log: SimLog,
    pub status: RunStatus,
    pub detections: Vec<Detection>,
    pub mode_changes: Vec<ModeChange>,
}

impl SimRun {
    pub fn final_mode(&self) -> Reduction {
        self.mode_changes.last().map_or(Reduction::Full, |m| m.to)
    }
}

/// Monotone switching: once reduced, never back to full.
fn next_mode(current: Reduction, planned: Reduction) -> Reduction {
    match (current, planned) {
        (Reduction::Reduced(c), Reduction::Full) => Reduction::Reduced(c),
        (_, p) => p,
    }
}

fn crash_reason(body: &RigidBodyState, limit: f64, floor: f64) -> Option<String> {
    if !body.is_finite() {
        return Some("non-finite state".into());
    }
    if body.attitude.x.abs() >= limit || body.attitude.y.abs() >= limit {
        return Some(format!(
            "attitude limit exceeded (roll {:.1} deg, pitch {:.1} deg)",
            body.attitude.x.to_degrees(),
            body.attitude.y.to_degrees()
        ));
    }
    if body.altitude() < floor {
        return Some(format!("altitude {:.3} m below ground", body.altitude()));
    }
    None
}

/// Runs `scenario` to completion or crash.
///
/// The plant advances at `sim.dt`. Every `control_divisor` plant steps the
/// FDI compares measured thrust with a healthy onboard motor model, a new
/// estimated failure set triggers a reconfiguration decision, and the
/// controller and allocator produce fresh speed commands. Faults hit the
/// true vehicle at their injection time.
pub fn run_scenario(scenario: &Scenario) -> Result<SimRun> {
    let resolved = scenario.resolve()?;
    let params = &resolved.params;
    let sim = &scenario.sim;
    let n = params.rotor_count();
    let profile = ReferenceProfile::new(&scenario.trajectory)?;
    let mut table = ReductionTable::precompute(params, sim.reduction_depth.min(n))?;
    let b = build_effectiveness(params, &HealthVector::nominal(n))?;
    let mut controller = NdiController::new(resolved.gains, resolved.estimated, CommandLimits::for_vehicle(params));

    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let noise = if sim.thrust_noise > 0.0 {
        Some(Normal::new(0.0, sim.thrust_noise).map_err(|e| Error::invalid("sim.thrust_noise", e.to_string()))?)
    } else {
        None
    };

    let start = profile.at(0.0);
    let mut plant = PlantState {
        body: RigidBodyState::at_rest(start.position, start.heading),
        motor: MotorState::hover(params),
    };
    let mut onboard = OnboardThrustModel::new(plant.motor.0.clone(), params.motor_time_constant, params.thrust_factor);
    let mut truth = HealthVector::nominal(n);
    let mut fdi = FdiState::new(n);
    let mut mode = Reduction::Full;
    let mut command = plant.motor.0.clone();

    let mut faults: Vec<_> = scenario
        .faults
        .iter()
        .map(|f| ((f.t_inject / sim.dt - 1e-9).ceil().max(0.0) as u64, f.rotor, f.t_inject))
        .collect();
    faults.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

    let steps = (sim.duration / sim.dt).round() as u64;
    let divisor = u64::from(sim.control_divisor);
    let control_dt = sim.control_period();
    let tilt_limit = sim.crash_angle_deg.to_radians();
    let floor = -sim.ground_tolerance;

    let mut run = SimRun {
        log: SimLog::new(n),
        status: RunStatus::Completed,
        detections: Vec::new(),
        mode_changes: Vec::new(),
    };

    for k in 0..=steps {
        let t = k as f64 * sim.dt;
        for &(_, rotor, _) in faults.iter().filter(|f| f.0 == k) {
            if truth.is_healthy(rotor) {
                truth.fail(rotor)?;
            }
        }

        if k % divisor == 0 {
            let mut measured = rotor_thrusts(&plant.motor, params, &truth);
            if let Some(dist) = &noise {
                measured.apply(|f| *f += dist.sample(&mut rng));
            }
            let fresh = fdi.update(t, &measured, &onboard.thrusts(), &resolved.fdi)?;
            for &rotor in &fresh {
                run.detections.push(Detection {
                    rotor,
                    injected_at: faults.iter().find(|f| f.1 == rotor).map(|f| f.2),
                    detected_at: t,
                });
            }
            if !fresh.is_empty() {
                let next = next_mode(mode, table.plan(&fdi.estimated)?);
                if next != mode {
                    run.mode_changes.push(ModeChange {
                        t,
                        from: mode,
                        to: next,
                        failure_set: fdi.estimated.failed(),
                    });
                    mode = next;
                }
            }

            let reference = profile.at(t);
            let scope = mode.scope();
            let out = match controller.step(&plant.body, &reference, scope) {
                Ok(out) => out,
                Err(Error::Singularity { roll, pitch }) => {
                    run.status = RunStatus::Crashed {
                        t,
                        reason: format!(
                            "kinematic singularity (roll {:.1} deg, pitch {:.1} deg)",
                            roll.to_degrees(),
                            pitch.to_degrees()
                        ),
                    };
                    break;
                }
                Err(e) => return Err(e),
            };
            let allocation = match mode {
                Reduction::Reduced(channel) => reduced_allocate(
                    &channel.remove_from(&out.demand.to_vector()),
                    channel,
                    &b,
                    &fdi.estimated,
                    &resolved.allocator,
                    params.max_thrust,
                )?,
                Reduction::Full | Reduction::Lost => {
                    rpi_allocate(&out.demand, &b, &fdi.estimated, &resolved.allocator, params.max_thrust)?
                }
            };
            command = thrust_to_speed_cmd(&allocation.thrusts, params.thrust_factor)?;
            onboard.propagate(&command, control_dt);

            run.log.push(LogRecord {
                t,
                position: plant.body.position,
                velocity: plant.body.velocity,
                attitude: plant.body.attitude,
                rates: plant.body.rates,
                reference_position: reference.position,
                reference_heading: reference.heading,
                demand: out.demand,
                achieved: plant.wrench(params, &truth)?,
                thrusts: allocation.thrusts,
                speed_commands: command.clone(),
                speeds: plant.motor.0.clone(),
                residuals: fdi.residuals.clone(),
                health: DVector::from_iterator(n, (0..n).map(|i| fdi.estimated.factor(i))),
                mode,
                allocation_residual: allocation.residual,
                iterations: allocation.iterations,
            });
        }

        if k == steps {
            break;
        }
        plant = match step_rk4(&plant, &command, &truth, params, sim.dt) {
            Ok(next) => next,
            Err(Error::Singularity { .. }) => {
                run.status = RunStatus::Crashed {
                    t,
                    reason: "kinematic singularity".into(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if let Some(reason) = crash_reason(&plant.body, tilt_limit, floor) {
            run.status = RunStatus::Crashed {
                t: t + sim.dt,
                reason,
            };
            break;
        }
    }
    Ok(run)
}
