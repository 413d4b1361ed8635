//! Child processes of a deployment: spawning, liveness and shutdown.

use std::fs::{File, OpenOptions};
use std::net::{TcpStream, ToSocketAddrs};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use compdsl_core::ddsl::NodeSpec;

/// Environment passed to every spawned node.
pub const ENV_NODE_ID: &str = "COMPDSL_NODE_ID";
pub const ENV_HOST: &str = "COMPDSL_HOST";
pub const ENV_PORT: &str = "COMPDSL_PORT";

#[derive(Debug)]
pub enum ProcessHandle {
    /// Spawned by this process.
    Child(Child),
    /// Spawned by an earlier invocation and recorded in a state file.
    Adopted(u32),
}

impl ProcessHandle {
    pub fn pid(&self) -> u32 {
        match self {
            ProcessHandle::Child(c) => c.id(),
            ProcessHandle::Adopted(pid) => *pid,
        }
    }

    /// Exit description once the process is gone, `None` while it runs.
    pub fn exited(&mut self) -> Option<String> {
        match self {
            ProcessHandle::Child(c) => match c.try_wait() {
                Ok(Some(status)) => Some(format!("process exited ({status})")),
                Ok(None) => None,
                Err(e) => Some(format!("cannot query process: {e}")),
            },
            ProcessHandle::Adopted(pid) => (!pid_alive(*pid)).then(|| "process exited".to_string()),
        }
    }

    fn signal(&self, sig: libc::c_int) {
        let Ok(pid) = libc::pid_t::try_from(self.pid()) else { return };
        // SAFETY: kill has no memory-safety preconditions.
        unsafe {
            libc::kill(pid, sig);
        }
    }

    /// SIGTERM, then SIGKILL once `grace` has passed.
    pub fn terminate(&mut self, grace: Duration) {
        if self.exited().is_some() {
            return;
        }
        self.signal(libc::SIGTERM);
        let deadline = Instant::now() + grace;
        while Instant::now() < deadline {
            if self.exited().is_some() {
                return;
            }
            thread::sleep(Duration::from_millis(20));
        }
        self.signal(libc::SIGKILL);
        let deadline = Instant::now() + Duration::from_secs(1);
        while self.exited().is_none() && Instant::now() < deadline {
            thread::sleep(Duration::from_millis(10));
        }
    }
}

/// True for a live, non-zombie process.
pub fn pid_alive(pid: u32) -> bool {
    let Ok(p) = libc::pid_t::try_from(pid) else { return false };
    // SAFETY: signal 0 only checks for existence and permission.
    if unsafe { libc::kill(p, 0) } != 0 {
        return false;
    }
    match std::fs::read_to_string(format!("/proc/{pid}/stat")) {
        // The state letter follows the parenthesized command name.
        Ok(stat) => stat.rsplit_once(')').and_then(|(_, rest)| rest.trim_start().chars().next()) != Some('Z'),
        Err(_) => true,
    }
}

/// Whether `pid` still runs `exe`, to avoid adopting a recycled pid.
pub fn pid_runs(pid: u32, exe: &Path) -> bool {
    if !pid_alive(pid) {
        return false;
    }
    match std::fs::read(format!("/proc/{pid}/cmdline")) {
        Ok(cmdline) => {
            let argv0 = cmdline.split(|b| *b == 0).next().unwrap_or_default();
            Path::new(&*String::from_utf8_lossy(argv0)) == exe
        }
        Err(_) => true,
    }
}

pub fn is_local_host(host: &str) -> bool {
    matches!(host, "localhost" | "0.0.0.0" | "::1" | "::") || host.starts_with("127.")
}

/// Whether something accepts TCP connections on `host:port`.
pub fn port_open(host: &str, port: u16, timeout: Duration) -> bool {
    let host = if host == "0.0.0.0" { "127.0.0.1" } else { host };
    let Ok(addrs) = (host, port).to_socket_addrs() else { return false };
    addrs.into_iter().any(|a| TcpStream::connect_timeout(&a, timeout).is_ok())
}

pub fn resolve(base_dir: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

fn output(log_dir: Option<&Path>, node: &str) -> std::io::Result<(Stdio, Stdio)> {
    let Some(dir) = log_dir else {
        return Ok((Stdio::null(), Stdio::null()));
    };
    std::fs::create_dir_all(dir)?;
    let file: File = OpenOptions::new().create(true).append(true).open(dir.join(format!("{node}.log")))?;
    Ok((Stdio::from(file.try_clone()?), Stdio::from(file)))
}

/// Starts `<executable> [config]` in `base_dir`, in its own process group so
/// that it outlives a terminal interrupt aimed at the caller.
pub fn spawn(node: &NodeSpec, base_dir: &Path, log_dir: Option<&Path>) -> Result<ProcessHandle, String> {
    let exe = node.executable.as_deref().ok_or("node declares no executable")?;
    let exe = resolve(base_dir, exe);
    if !exe.is_file() {
        return Err(format!("executable {} does not exist", exe.display()));
    }
    let (stdout, stderr) = output(log_dir, &node.id).map_err(|e| format!("cannot open log file: {e}"))?;
    let mut cmd = Command::new(&exe);
    if let Some(cfg) = &node.config {
        cmd.arg(resolve(base_dir, cfg));
    }
    cmd.current_dir(base_dir)
        .env(ENV_NODE_ID, &node.id)
        .env(ENV_HOST, &node.host)
        .env(ENV_PORT, node.port.to_string())
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .process_group(0);
    cmd.spawn().map(ProcessHandle::Child).map_err(|e| format!("cannot start {}: {e}", exe.display()))
}
