//! A running deployment: node states, start/stop cascades and health checks.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use compdsl_core::ddsl::{
    check_deployment, graph_to_dot, graph_to_json, DependencyGraph, DeploymentModel, GraphError, GraphJson,
};
use compdsl_core::{ComponentLoader, Diagnostic};

use crate::process::{self, ProcessHandle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeState {
    Stopped,
    Starting,
    Running,
    Failed,
}

impl NodeState {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeState::Stopped => "stopped",
            NodeState::Starting => "starting",
            NodeState::Running => "running",
            NodeState::Failed => "failed",
        }
    }

    /// The legal transitions. `running -> failed` is how a crash detected by
    /// the health check is recorded.
    pub fn can_become(self, to: NodeState) -> bool {
        use NodeState::*;
        matches!(
            (self, to),
            (Stopped, Starting)
                | (Starting, Running)
                | (Starting, Failed)
                | (Starting, Stopped)
                | (Running, Stopped)
                | (Running, Failed)
                | (Failed, Starting)
        )
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub seq: u64,
    /// Milliseconds since the Unix epoch.
    pub at_ms: u64,
    pub node_id: String,
    pub from: NodeState,
    pub to: NodeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub health_period: Duration,
    pub start_timeout: Duration,
    pub stop_grace: Duration,
    /// Poll interval while waiting for a starting node.
    pub poll: Duration,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            health_period: Duration::from_millis(500),
            start_timeout: Duration::from_secs(10),
            stop_grace: Duration::from_secs(3),
            poll: Duration::from_millis(50),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SessionError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("node {node} is on host {host}; only local execution is supported")]
    RemoteHost { node: String, host: String },
    #[error("node {node} failed to start: {message}")]
    StartFailed { node: String, message: String },
    #[error("cannot stop {node}: dependents still running: {}", dependents.join(", "))]
    DependentsRunning { node: String, dependents: Vec<String> },
    #[error("unknown graph format {0} (expected dot or json)")]
    UnknownFormat(String),
    #[error("{0}")]
    Graph(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::UnknownNode(_) => "unknown-node",
            SessionError::RemoteHost { .. } => "remote-host",
            SessionError::StartFailed { .. } => "start-failed",
            SessionError::DependentsRunning { .. } => "dependents-running",
            SessionError::UnknownFormat(_) => "unknown-format",
            SessionError::Graph(_) => "graph",
        }
    }

    pub fn node_id(&self) -> Option<&str> {
        match self {
            SessionError::UnknownNode(n) => Some(n),
            SessionError::RemoteHost { node, .. }
            | SessionError::StartFailed { node, .. }
            | SessionError::DependentsRunning { node, .. } => Some(node),
            _ => None,
        }
    }
}

impl From<GraphError> for SessionError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::UnknownNode(n) => SessionError::UnknownNode(n),
            other => SessionError::Graph(other.to_string()),
        }
    }
}

#[derive(Debug)]
pub struct NodeRuntime {
    pub node_id: String,
    pub state: NodeState,
    pub process: Option<ProcessHandle>,
    pub last_transition_ms: u64,
    pub running_since_ms: Option<u64>,
    pub last_error: Option<String>,
    /// Consecutive failed port probes of a running node.
    port_misses: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NodeStatus {
    pub id: String,
    pub component: String,
    pub host: String,
    pub port: u16,
    pub state: NodeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pid: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub last_error: Option<String>,
    pub last_transition_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uptime_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatusSnapshot {
    pub deployment: String,
    pub nodes: Vec<NodeStatus>,
    pub graph: GraphJson,
}

impl StatusSnapshot {
    pub fn state(&self, id: &str) -> Option<NodeState> {
        self.nodes.iter().find(|n| n.id == id).map(|n| n.state)
    }
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Called with each new event, after the transition has been applied.
pub type Observer = Arc<dyn Fn(&DeploymentSession, &Event) + Send + Sync>;

pub struct DeploymentSession {
    pub deployment: DeploymentModel,
    pub graph: DependencyGraph,
    pub base_dir: PathBuf,
    pub timing: Timing,
    /// Where node output goes; discarded when unset.
    pub log_dir: Option<PathBuf>,
    runtimes: BTreeMap<String, NodeRuntime>,
    events: Vec<Event>,
    next_seq: u64,
    observer: Option<Observer>,
}

impl fmt::Debug for DeploymentSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DeploymentSession")
            .field("deployment", &self.deployment.name)
            .field("runtimes", &self.runtimes)
            .field("events", &self.events.len())
            .finish()
    }
}

/// Checks `deployment` and builds a session with every node stopped.
/// Warnings are returned alongside; any error refuses the load.
pub fn load_session(
    deployment: DeploymentModel,
    base_dir: &Path,
    loader: &dyn ComponentLoader,
    timing: Timing,
) -> Result<(DeploymentSession, Vec<Diagnostic>), Vec<Diagnostic>> {
    let check = check_deployment(&deployment, base_dir, loader);
    let Some(graph) = check.graph else {
        return Err(check.diagnostics);
    };
    let session = DeploymentSession::new(deployment, graph, base_dir, timing);
    Ok((session, check.diagnostics))
}

impl DeploymentSession {
    pub fn new(deployment: DeploymentModel, graph: DependencyGraph, base_dir: &Path, timing: Timing) -> Self {
        let now = now_ms();
        let runtimes = deployment
            .nodes
            .iter()
            .map(|n| {
                let rt = NodeRuntime {
                    node_id: n.id.clone(),
                    state: NodeState::Stopped,
                    process: None,
                    last_transition_ms: now,
                    running_since_ms: None,
                    last_error: None,
                    port_misses: 0,
                };
                (n.id.clone(), rt)
            })
            .collect();
        DeploymentSession {
            deployment,
            graph,
            base_dir: base_dir.to_path_buf(),
            timing,
            log_dir: None,
            runtimes,
            events: Vec::new(),
            next_seq: 1,
            observer: None,
        }
    }

    pub fn set_observer(&mut self, observer: Observer) {
        self.observer = Some(observer);
    }

    /// Continue event numbering after `last_seq`.
    pub fn continue_events_after(&mut self, last_seq: u64) {
        self.next_seq = self.next_seq.max(last_seq + 1);
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn runtime(&self, id: &str) -> Option<&NodeRuntime> {
        self.runtimes.get(id)
    }

    pub fn state(&self, id: &str) -> Option<NodeState> {
        self.runtimes.get(id).map(|r| r.state)
    }

    pub fn all_stopped(&self) -> bool {
        self.runtimes.values().all(|r| r.state != NodeState::Running && r.state != NodeState::Starting)
    }

    fn transition(&mut self, id: &str, to: NodeState, message: Option<String>) {
        let rt = self.runtimes.get_mut(id).expect("transition of unknown node");
        let from = rt.state;
        assert!(from.can_become(to), "illegal transition {from} -> {to} for {id}");
        let at = now_ms();
        rt.state = to;
        rt.last_transition_ms = at;
        rt.port_misses = 0;
        match to {
            NodeState::Running => rt.running_since_ms = Some(at),
            _ => rt.running_since_ms = None,
        }
        match to {
            NodeState::Failed => rt.last_error = message.clone(),
            NodeState::Starting => rt.last_error = None,
            _ => {}
        }
        let event = Event { seq: self.next_seq, at_ms: at, node_id: id.to_string(), from, to, message };
        self.next_seq += 1;
        tracing::info!(node = id, %from, %to, "transition");
        self.events.push(event.clone());
        if let Some(obs) = self.observer.clone() {
            obs(self, &event);
        }
    }

    fn node_known(&self, id: &str) -> Result<(), SessionError> {
        if self.runtimes.contains_key(id) {
            Ok(())
        } else {
            Err(SessionError::UnknownNode(id.to_string()))
        }
    }

    /// Starts `target` and everything it transitively requires, in start
    /// order, one node at a time. Nodes already running are skipped. Returns
    /// the nodes actually started.
    pub fn start_node(&mut self, target: &str) -> Result<Vec<String>, SessionError> {
        self.node_known(target)?;
        let order = self.graph.start_order(target)?;
        self.start_sequence(&order)
    }

    /// Starts every node, dependencies first.
    pub fn start_all(&mut self) -> Result<Vec<String>, SessionError> {
        let order = self.graph.full_start_order()?;
        self.start_sequence(&order)
    }

    fn start_sequence(&mut self, order: &[String]) -> Result<Vec<String>, SessionError> {
        for id in order {
            let node = self.deployment.node(id).expect("graph node without spec");
            if !process::is_local_host(&node.host) {
                return Err(SessionError::RemoteHost { node: id.clone(), host: node.host.clone() });
            }
        }
        let mut started = Vec::new();
        for id in order {
            if self.state(id) == Some(NodeState::Running) {
                continue;
            }
            self.start_one(id)?;
            started.push(id.clone());
        }
        Ok(started)
    }

    fn start_one(&mut self, id: &str) -> Result<(), SessionError> {
        let node = self.deployment.node(id).expect("unknown node").clone();
        // A leftover process of a failed node is cleaned up before a retry.
        if let Some(mut old) = self.runtimes.get_mut(id).and_then(|r| r.process.take()) {
            old.terminate(self.timing.stop_grace);
        }
        self.transition(id, NodeState::Starting, None);
        let fail = |s: &mut Self, message: String| {
            s.transition(id, NodeState::Failed, Some(message.clone()));
            Err(SessionError::StartFailed { node: id.to_string(), message })
        };
        let mut handle = match process::spawn(&node, &self.base_dir, self.log_dir.as_deref()) {
            Ok(h) => h,
            Err(message) => return fail(self, message),
        };
        let deadline = Instant::now() + self.timing.start_timeout;
        let mut next_tick = Instant::now() + self.timing.health_period;
        loop {
            if let Some(exit) = handle.exited() {
                return fail(self, exit);
            }
            if process::port_open(&node.host, node.port, Duration::from_millis(100)) {
                break;
            }
            if Instant::now() >= deadline {
                handle.terminate(self.timing.stop_grace);
                let msg = format!("not listening on {} after {:?}", node.endpoint(), self.timing.start_timeout);
                return fail(self, msg);
            }
            if Instant::now() >= next_tick {
                self.health_tick();
                next_tick = Instant::now() + self.timing.health_period;
            }
            thread::sleep(self.timing.poll);
        }
        self.runtimes.get_mut(id).expect("runtime").process = Some(handle);
        self.transition(id, NodeState::Running, None);
        Ok(())
    }

    /// Running nodes that transitively require `id`, in stop order.
    pub fn running_dependents(&self, id: &str) -> Result<Vec<String>, SessionError> {
        let order = self.graph.stop_order(id)?;
        Ok(order
            .into_iter()
            .filter(|n| n != id && matches!(self.state(n), Some(NodeState::Running | NodeState::Starting)))
            .collect())
    }

    /// Stops `target`. With `cascade`, running dependents are stopped first
    /// in reverse start order; without it the request is refused while any
    /// dependent runs. Returns the nodes actually stopped.
    pub fn stop_node(&mut self, target: &str, cascade: bool) -> Result<Vec<String>, SessionError> {
        self.node_known(target)?;
        let dependents = self.running_dependents(target)?;
        if !cascade && !dependents.is_empty() {
            return Err(SessionError::DependentsRunning { node: target.to_string(), dependents });
        }
        let mut stopped = Vec::new();
        for id in dependents.iter().chain(std::iter::once(&target.to_string())) {
            if self.stop_one(id) {
                stopped.push(id.clone());
            }
        }
        Ok(stopped)
    }

    /// Stops every node, dependents first.
    pub fn stop_all(&mut self) -> Result<Vec<String>, SessionError> {
        let order = self.graph.full_stop_order()?;
        Ok(order.into_iter().filter(|id| self.stop_one(id)).collect())
    }

    fn stop_one(&mut self, id: &str) -> bool {
        let grace = self.timing.stop_grace;
        let rt = self.runtimes.get_mut(id).expect("runtime");
        let process = rt.process.take();
        let state = rt.state;
        if let Some(mut p) = process {
            p.terminate(grace);
        }
        match state {
            NodeState::Running | NodeState::Starting => {
                self.transition(id, NodeState::Stopped, None);
                true
            }
            _ => false,
        }
    }

    /// One round of health checks over running nodes: the process must be
    /// alive and its port must accept connections. A dead process fails the
    /// node at once; an unresponsive port only after two consecutive misses.
    pub fn health_tick(&mut self) {
        let ids: Vec<String> =
            self.runtimes.iter().filter(|(_, r)| r.state == NodeState::Running).map(|(id, _)| id.clone()).collect();
        for id in ids {
            let node = self.deployment.node(&id).expect("node").clone();
            let rt = self.runtimes.get_mut(&id).expect("runtime");
            let exit = match rt.process.as_mut() {
                Some(p) => p.exited(),
                None => Some("process handle lost".to_string()),
            };
            let failure = if let Some(msg) = exit {
                rt.process = None;
                Some(msg)
            } else if process::port_open(&node.host, node.port, Duration::from_millis(100)) {
                rt.port_misses = 0;
                None
            } else {
                rt.port_misses += 1;
                (rt.port_misses >= 2).then(|| format!("not listening on {}", node.endpoint()))
            };
            if let Some(msg) = failure {
                self.transition(&id, NodeState::Failed, Some(msg));
            }
        }
    }

    /// Registers a process started by an earlier invocation as `running`.
    /// Returns false (and leaves the node alone) unless `pid` still runs
    /// the node's executable.
    pub fn adopt(&mut self, id: &str, pid: u32, running_since_ms: u64) -> bool {
        let Some(exe) = self.deployment.node(id).and_then(|n| n.executable.clone()) else { return false };
        let exe = process::resolve(&self.base_dir, &exe);
        if !process::pid_runs(pid, &exe) {
            return false;
        }
        let Some(rt) = self.runtimes.get_mut(id) else { return false };
        rt.state = NodeState::Running;
        rt.process = Some(ProcessHandle::Adopted(pid));
        rt.running_since_ms = Some(running_since_ms);
        rt.last_transition_ms = running_since_ms;
        true
    }

    /// Restores a non-running state recorded earlier, without an event.
    pub fn restore(&mut self, id: &str, state: NodeState, last_error: Option<String>, at_ms: u64) {
        if let Some(rt) = self.runtimes.get_mut(id) {
            rt.state = state;
            rt.last_error = last_error;
            rt.last_transition_ms = at_ms;
        }
    }

    /// Records that a node believed running disappeared while nobody was
    /// supervising it.
    pub fn mark_lost(&mut self, id: &str, running_since_ms: u64) {
        if let Some(rt) = self.runtimes.get_mut(id) {
            rt.state = NodeState::Running;
            rt.running_since_ms = Some(running_since_ms);
        }
        self.transition(id, NodeState::Failed, Some("process exited while unsupervised".into()));
    }

    pub fn restore_events(&mut self, events: Vec<Event>) {
        let last = events.last().map_or(0, |e| e.seq);
        self.events = events;
        self.continue_events_after(last);
    }

    fn states(&self) -> BTreeMap<String, String> {
        self.runtimes.iter().map(|(id, r)| (id.clone(), r.state.as_str().to_string())).collect()
    }

    pub fn status(&self) -> StatusSnapshot {
        let now = now_ms();
        let nodes = self
            .graph
            .nodes
            .iter()
            .map(|g| {
                let rt = &self.runtimes[&g.id];
                NodeStatus {
                    id: g.id.clone(),
                    component: g.component.clone(),
                    host: g.host.clone(),
                    port: g.port,
                    state: rt.state,
                    pid: rt.process.as_ref().map(ProcessHandle::pid),
                    last_error: rt.last_error.clone(),
                    last_transition_ms: rt.last_transition_ms,
                    uptime_ms: rt.running_since_ms.map(|s| now.saturating_sub(s)),
                }
            })
            .collect();
        StatusSnapshot { deployment: self.deployment.name.clone(), nodes, graph: self.graph_json() }
    }

    pub fn graph_json(&self) -> GraphJson {
        graph_to_json(&self.graph, Some(&self.states()))
    }

    pub fn export_graph(&self, format: &str) -> Result<String, SessionError> {
        match format {
            "dot" => Ok(graph_to_dot(&self.deployment.name, &self.graph, Some(&self.states()))),
            "json" => Ok(serde_json::to_string_pretty(&self.graph_json()).expect("graph serializes")),
            other => Err(SessionError::UnknownFormat(other.to_string())),
        }
    }

    /// Forgets running processes without stopping them, so that they
    /// outlive this session.
    pub fn detach(&mut self) {
        for rt in self.runtimes.values_mut() {
            rt.process = None;
        }
    }

    /// Pids of running nodes, for persisting.
    pub fn pids(&self) -> BTreeMap<String, u32> {
        self.runtimes
            .iter()
            .filter_map(|(id, r)| r.process.as_ref().map(|p| (id.clone(), p.pid())))
            .collect()
    }

    pub fn runtimes(&self) -> impl Iterator<Item = &NodeRuntime> {
        self.runtimes.values()
    }
}
