//! Simulated managed systems implementing [`asr_core::mape::ManagedSystem`].
//!
//! - [`deltaiot`]: a 15-mote IoT mesh with 216 routing options.
//! - [`sbs`]: a service-based health-monitoring workflow with 13500 options.

pub mod deltaiot;
pub mod profile;
pub mod sbs;
pub mod walk;

pub use deltaiot::{DeltaIoT, IoTConfig};
pub use sbs::{Sbs, SbsConfig};
