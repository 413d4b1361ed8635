//! Keeps a deployment's node states on disk between command-line runs, so
//! that `deploy up` can return while its nodes keep running and a later
//! `deploy down` can find them again.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::process;
use crate::session::{DeploymentSession, Event, NodeState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SavedNode {
    pub state: NodeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<u32>,
    pub since_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SavedState {
    pub deployment: String,
    pub nodes: BTreeMap<String, SavedNode>,
    #[serde(default)]
    pub events: Vec<Event>,
}

/// `<dir>/.compdsl/<stem>.state.json` for a deployment file `<dir>/<stem>.ddsl`.
pub fn state_path(ddsl_path: &Path) -> PathBuf {
    let dir = ddsl_path.parent().unwrap_or(Path::new("."));
    let stem = ddsl_path.file_stem().map_or_else(|| "deployment".into(), |s| s.to_string_lossy().into_owned());
    dir.join(".compdsl").join(format!("{stem}.state.json"))
}

/// Per-node log directory next to the state file.
pub fn log_dir(ddsl_path: &Path) -> PathBuf {
    state_path(ddsl_path).with_extension("").with_extension("logs")
}

pub fn snapshot(session: &DeploymentSession) -> SavedState {
    let nodes = session
        .runtimes()
        .map(|rt| {
            let saved = SavedNode {
                state: rt.state,
                pid: rt.process.as_ref().map(|p| p.pid()),
                since_ms: rt.running_since_ms.unwrap_or(rt.last_transition_ms),
                last_error: rt.last_error.clone(),
            };
            (rt.node_id.clone(), saved)
        })
        .collect();
    SavedState { deployment: session.deployment.name.clone(), nodes, events: session.events().to_vec() }
}

pub fn save(session: &DeploymentSession, path: &Path) -> io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let text = serde_json::to_string_pretty(&snapshot(session)).map_err(io::Error::other)?;
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)
}

/// Reads a state file. A missing file is `Ok(None)`.
pub fn load(path: &Path) -> io::Result<Option<SavedState>> {
    match std::fs::read_to_string(path) {
        Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e),
    }
}

/// Brings a fresh session up to date with a saved state. Nodes recorded as
/// running are adopted when their process is still alive and otherwise
/// marked failed. Nodes no longer in the deployment are ignored.
pub fn apply(session: &mut DeploymentSession, saved: SavedState) {
    session.restore_events(saved.events);
    for (id, node) in saved.nodes {
        if session.runtime(&id).is_none() {
            continue;
        }
        match node.state {
            NodeState::Running | NodeState::Starting => {
                let alive = node.pid.is_some_and(|pid| session.adopt(&id, pid, node.since_ms));
                if !alive {
                    session.mark_lost(&id, node.since_ms);
                }
            }
            NodeState::Failed => session.restore(&id, NodeState::Failed, node.last_error, node.since_ms),
            NodeState::Stopped => session.restore(&id, NodeState::Stopped, None, node.since_ms),
        }
    }
}

/// True when any saved node still has a live process.
pub fn any_alive(saved: &SavedState) -> bool {
    saved.nodes.values().filter_map(|n| n.pid).any(process::pid_alive)
}
