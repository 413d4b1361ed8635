//! The control loop that owns a session. Every mutation is a message to
//! the loop; status and events are read from snapshots it publishes.

use std::path::{Path, PathBuf};
use std::sync::mpsc::{self, RecvTimeoutError};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use compdsl_core::ddsl::{check_deployment, parse_ddsl, print_ddsl, DeploymentModel};
use compdsl_core::{ComponentLoader, Diagnostic};

use crate::session::{DeploymentSession, Event, SessionError, StatusSnapshot};

pub type SharedLoader = Arc<dyn ComponentLoader + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum ReplaceError {
    #[error("nodes are still running: {}", .0.join(", "))]
    NodesRunning(Vec<String>),
    #[error("deployment has errors")]
    Invalid(Vec<Diagnostic>),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("supervisor has shut down")]
    Closed,
}

type Reply<T> = mpsc::Sender<T>;

enum Command {
    Start(String, Reply<Result<Vec<String>, SessionError>>),
    StartAll(Reply<Result<Vec<String>, SessionError>>),
    Stop(String, bool, Reply<Result<Vec<String>, SessionError>>),
    StopAll(Reply<Result<Vec<String>, SessionError>>),
    Replace(DeploymentModel, Reply<Result<Vec<Diagnostic>, ReplaceError>>),
    Shutdown,
}

struct Shared {
    snapshot: StatusSnapshot,
    deployment: DeploymentModel,
    events: Vec<Event>,
    closed: bool,
}

struct Inner {
    shared: Mutex<Shared>,
    changed: Condvar,
}

impl Inner {
    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|p| p.into_inner())
    }

    fn publish(&self, session: &DeploymentSession, event: Option<&Event>) {
        let mut s = self.lock();
        s.snapshot = session.status();
        s.deployment = session.deployment.clone();
        if let Some(e) = event {
            s.events.push(e.clone());
        }
        drop(s);
        self.changed.notify_all();
    }
}

/// Handle to a running control loop. Cheap to share behind an `Arc`.
pub struct Supervisor {
    inner: Arc<Inner>,
    tx: mpsc::Sender<Command>,
    thread: Mutex<Option<JoinHandle<()>>>,
    base_dir: PathBuf,
}

impl Supervisor {
    /// Starts the control loop. `ddsl_path` is where replaced deployments
    /// are written back; `loader` checks them.
    pub fn spawn(mut session: DeploymentSession, ddsl_path: Option<PathBuf>, loader: SharedLoader) -> Self {
        let inner = Arc::new(Inner {
            shared: Mutex::new(Shared {
                snapshot: session.status(),
                deployment: session.deployment.clone(),
                events: session.events().to_vec(),
                closed: false,
            }),
            changed: Condvar::new(),
        });
        install_observer(&mut session, &inner);
        let base_dir = session.base_dir.clone();
        let (tx, rx) = mpsc::channel();
        let loop_inner = inner.clone();
        let thread = thread::Builder::new()
            .name("compdsl-supervisor".into())
            .spawn(move || control_loop(session, rx, loop_inner, ddsl_path, loader))
            .expect("spawn supervisor thread");
        Supervisor { inner, tx, thread: Mutex::new(Some(thread)), base_dir }
    }

    fn call<T>(&self, make: impl FnOnce(Reply<T>) -> Command, closed: T) -> T {
        let (reply, rx) = mpsc::channel();
        if self.tx.send(make(reply)).is_err() {
            return closed;
        }
        rx.recv().unwrap_or(closed)
    }

    fn closed_err() -> Result<Vec<String>, SessionError> {
        Err(SessionError::Graph("supervisor has shut down".into()))
    }

    pub fn start(&self, id: &str) -> Result<Vec<String>, SessionError> {
        self.call(|r| Command::Start(id.to_string(), r), Self::closed_err())
    }

    pub fn start_all(&self) -> Result<Vec<String>, SessionError> {
        self.call(Command::StartAll, Self::closed_err())
    }

    pub fn stop(&self, id: &str, cascade: bool) -> Result<Vec<String>, SessionError> {
        self.call(|r| Command::Stop(id.to_string(), cascade, r), Self::closed_err())
    }

    pub fn stop_all(&self) -> Result<Vec<String>, SessionError> {
        self.call(Command::StopAll, Self::closed_err())
    }

    /// Replaces the deployment. Allowed only while no node runs; the new
    /// model is checked and written back to disk in canonical form.
    pub fn replace(&self, model: DeploymentModel) -> Result<Vec<Diagnostic>, ReplaceError> {
        self.call(|r| Command::Replace(model, r), Err(ReplaceError::Closed))
    }

    /// Directory the deployment's relative paths are resolved against.
    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn status(&self) -> StatusSnapshot {
        self.inner.lock().snapshot.clone()
    }

    pub fn deployment(&self) -> DeploymentModel {
        self.inner.lock().deployment.clone()
    }

    /// Events with `seq > since`, waiting up to `timeout` for one to arrive.
    pub fn events_since(&self, since: u64, timeout: Duration) -> Vec<Event> {
        let deadline = Instant::now() + timeout;
        let mut s = self.inner.lock();
        loop {
            let newer: Vec<Event> = s.events.iter().filter(|e| e.seq > since).cloned().collect();
            let now = Instant::now();
            if !newer.is_empty() || s.closed || now >= deadline {
                return newer;
            }
            s = self.inner.changed.wait_timeout(s, deadline - now).unwrap_or_else(|p| p.into_inner()).0;
        }
    }

    /// Stops every node and ends the control loop.
    pub fn shutdown(&self) {
        let _ = self.tx.send(Command::Shutdown);
        if let Some(t) = self.thread.lock().unwrap_or_else(|p| p.into_inner()).take() {
            let _ = t.join();
        }
    }
}

impl Drop for Supervisor {
    fn drop(&mut self) {
        self.shutdown();
    }
}

fn install_observer(session: &mut DeploymentSession, inner: &Arc<Inner>) {
    let weak = Arc::downgrade(inner);
    session.set_observer(Arc::new(move |s: &DeploymentSession, e: &Event| {
        if let Some(inner) = weak.upgrade() {
            inner.publish(s, Some(e));
        }
    }));
}

fn control_loop(
    mut session: DeploymentSession,
    rx: mpsc::Receiver<Command>,
    inner: Arc<Inner>,
    ddsl_path: Option<PathBuf>,
    loader: SharedLoader,
) {
    let mut next_tick = Instant::now() + session.timing.health_period;
    loop {
        let wait = next_tick.saturating_duration_since(Instant::now());
        match rx.recv_timeout(wait) {
            Ok(Command::Shutdown) | Err(RecvTimeoutError::Disconnected) => break,
            Ok(cmd) => handle(&mut session, cmd, &inner, ddsl_path.as_ref(), &loader),
            Err(RecvTimeoutError::Timeout) => {}
        }
        if Instant::now() >= next_tick {
            session.health_tick();
            next_tick = Instant::now() + session.timing.health_period;
        }
    }
    let _ = session.stop_all();
    inner.lock().closed = true;
    inner.publish(&session, None);
}

fn handle(
    session: &mut DeploymentSession,
    cmd: Command,
    inner: &Arc<Inner>,
    ddsl_path: Option<&PathBuf>,
    loader: &SharedLoader,
) {
    // The snapshot is published before replying so that a caller reading
    // status right after a command sees its effect.
    fn answer<T>(inner: &Inner, session: &DeploymentSession, reply: Reply<T>, value: T) {
        inner.publish(session, None);
        let _ = reply.send(value);
    }
    match cmd {
        Command::Start(id, reply) => {
            let r = session.start_node(&id);
            answer(inner, session, reply, r);
        }
        Command::StartAll(reply) => {
            let r = session.start_all();
            answer(inner, session, reply, r);
        }
        Command::Stop(id, cascade, reply) => {
            let r = session.stop_node(&id, cascade);
            answer(inner, session, reply, r);
        }
        Command::StopAll(reply) => {
            let r = session.stop_all();
            answer(inner, session, reply, r);
        }
        Command::Replace(model, reply) => {
            let r = replace(session, model, inner, ddsl_path, loader);
            answer(inner, session, reply, r);
        }
        Command::Shutdown => {}
    }
}

fn replace(
    session: &mut DeploymentSession,
    model: DeploymentModel,
    inner: &Arc<Inner>,
    ddsl_path: Option<&PathBuf>,
    loader: &SharedLoader,
) -> Result<Vec<Diagnostic>, ReplaceError> {
    let running: Vec<String> = session
        .runtimes()
        .filter(|r| matches!(r.state, crate::NodeState::Running | crate::NodeState::Starting))
        .map(|r| r.node_id.clone())
        .collect();
    if !running.is_empty() {
        return Err(ReplaceError::NodesRunning(running));
    }
    let mut model = model;
    if let Some(p) = ddsl_path {
        model.origin = p.display().to_string();
    }
    // Names arrive as free-form JSON strings; the canonical text must parse
    // back to the same model or it could not be written out.
    let text = print_ddsl(&model);
    match parse_ddsl(&text, &model.origin) {
        Ok(reparsed) if reparsed == model => {}
        Ok(_) => {
            let d = Diagnostic::error("not-representable", "deployment cannot be written as DDSL unchanged");
            return Err(ReplaceError::Invalid(vec![d]));
        }
        Err(diags) => return Err(ReplaceError::Invalid(diags.into_vec())),
    }
    let check = check_deployment(&model, &session.base_dir, loader.as_ref());
    let Some(graph) = check.graph else {
        return Err(ReplaceError::Invalid(check.diagnostics));
    };
    if let Some(path) = ddsl_path {
        write_atomically(path, &text)
            .map_err(|source| ReplaceError::Io { path: path.display().to_string(), source })?;
    }
    let last_seq = session.events().last().map_or(0, |e| e.seq);
    let mut fresh = DeploymentSession::new(model, graph, &session.base_dir, session.timing);
    fresh.log_dir = session.log_dir.clone();
    fresh.restore_events(session.events().to_vec());
    fresh.continue_events_after(last_seq);
    install_observer(&mut fresh, inner);
    *session = fresh;
    Ok(check.diagnostics)
}

fn write_atomically(path: &PathBuf, text: &str) -> std::io::Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).map_or_else(|| PathBuf::from("."), PathBuf::from);
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

