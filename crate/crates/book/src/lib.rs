//! The guide's chapters, compiled so that every listing runs as a
//! doc-test.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/vehicle.md")]
pub mod vehicle {}
#[doc = include_str!("../../../book/src/controllability.md")]
pub mod controllability {}
#[doc = include_str!("../../../book/src/control.md")]
pub mod control {}
#[doc = include_str!("../../../book/src/fdi.md")]
pub mod fdi {}
#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}
#[doc = include_str!("../../../book/src/files.md")]
pub mod files {}
