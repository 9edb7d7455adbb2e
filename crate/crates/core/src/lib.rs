//! Event-graph (GEST) story building: capability registry, transactional
//! session backend, temporal scheduler, symbolic executor and a procedural
//! reference agent.

pub mod cover;
pub mod error;
pub mod executor;
pub mod gest;
pub mod procedural;
pub mod registry;
pub mod rules;
pub mod schedule;
pub mod server;
pub mod replay;
pub mod session;
pub mod tools;
pub mod validate;

pub use error::{ErrorCode, ToolError};
pub use gest::GestGraph;
pub use registry::CapabilityRegistry;
