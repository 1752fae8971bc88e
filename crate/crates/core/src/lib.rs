//! Normalized Kähler-Ricci flow on `M × E` (base times flat torus fiber),
//! solved as a parabolic complex Monge-Ampère equation for the potential `φ`.

pub mod analysis;
pub mod config;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod io;
pub mod oracle;

pub use error::{Error, Result};
