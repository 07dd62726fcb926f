//! Reference generation, scenarios and the closed-loop engine.

mod engine;
mod log;
mod scenario;
mod spin;
mod trajectory;

pub use engine::{run_scenario, Detection, ModeChange, RunStatus, SimRun};
pub use log::{LogRecord, SimLog};
pub use scenario::{
    AllocatorSection, EstimatedSection, FaultEvent, FdiSection, GainSection, OutputSection, ResolvedScenario,
    Scenario, SimConfig, VehicleSection,
};
pub use spin::{steady_spin_check, SpinCheck};
pub use trajectory::{
    generate_reference, HeadingMode, ReferenceProfile, SegmentKind, TrajectoryConfig, TrajectorySegment,
};
