//! Runs deployments: starts and stops nodes in dependency order, watches
//! their health and serves a JSON control API.

pub mod api;
pub mod persist;
pub mod process;
pub mod session;
pub mod supervisor;

pub use session::{load_session, DeploymentSession, Event, NodeState, SessionError, StatusSnapshot, Timing};
pub use supervisor::{ReplaceError, SharedLoader, Supervisor};
