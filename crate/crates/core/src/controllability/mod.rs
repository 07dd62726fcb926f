//! Hover controllability of co-planar multicopters under rotor failure.
//!
//! The hover dynamics linearise into four decoupled double integrators
//! driven by `τ − G`, where the wrench `τ` is confined to the attainable
//! set `T = {B f : f ∈ [0, F_max]^N}`, a zonotope. Controllability then
//! reduces to a rank condition, which holds structurally, plus the sign of
//! the signed distance from `G` to the boundary of `T`. Dropping one
//! channel from the wrench gives the reduced index on a 3-D zonotope.

mod index;
mod linear;
mod oracle;
mod sweep;

use std::fmt;

use nalgebra::{Vector3, Vector4};

pub use index::{acai, arcai, combinations, signed_authority, AuthorityIndex, IndexOptions};
pub use linear::{controllability_rank, linear_hover_model, LinearHoverModel, ReducedHoverModel, STATE_LABELS};
pub use oracle::{membership_oracle, nearest_attainable, support, NearestPoint, OracleReport, Verdict};
pub use sweep::{
    analyze, arcai_table, failure_grid, plan_reduction, ArcaiRow, ArcaiTable, ControllabilityReport,
    FailureGrid, Reduction, ReductionTable,
};

/// One of the four wrench channels, in wrench row order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Channel {
    Altitude,
    Roll,
    Pitch,
    Yaw,
}

impl Channel {
    pub const ALL: [Channel; 4] = [Channel::Altitude, Channel::Roll, Channel::Pitch, Channel::Yaw];
    pub const ATTITUDE: [Channel; 3] = [Channel::Roll, Channel::Pitch, Channel::Yaw];

    /// Row of this channel in `[F_T, L, M, N]`.
    pub fn row(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Channel::Altitude => "h",
            Channel::Roll => "phi",
            Channel::Pitch => "theta",
            Channel::Yaw => "psi",
        }
    }

    pub fn from_name(name: &str) -> Option<Channel> {
        Channel::ALL.into_iter().find(|c| c.name() == name)
    }

    /// The three remaining components of a full wrench vector, in order.
    pub fn remove_from(self, wrench: &Vector4<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        let mut k = 0;
        for (i, value) in wrench.iter().enumerate() {
            if i != self.row() {
                out[k] = *value;
                k += 1;
            }
        }
        out
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Which channels the controller and allocator act on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ControlScope {
    #[default]
    Full,
    /// Every channel except the one given.
    Reduced(Channel),
}

impl fmt::Display for ControlScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlScope::Full => f.write_str("full"),
            ControlScope::Reduced(c) => write!(f, "reduced-{c}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn remove_from_keeps_order() {
        let w = Vector4::new(1.0, 2.0, 3.0, 4.0);
        assert_eq!(Channel::Yaw.remove_from(&w), Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(Channel::Roll.remove_from(&w), Vector3::new(1.0, 3.0, 4.0));
        assert_eq!(Channel::from_name("theta"), Some(Channel::Pitch));
    }
}
