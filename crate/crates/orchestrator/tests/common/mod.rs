#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use compdsl_core::ddsl::{parse_ddsl, DeploymentModel};
use compdsl_core::Workspace;
use compdsl_orchestrator::{load_session, DeploymentSession, Timing};

pub const STUB: &str = env!("CARGO_BIN_EXE_compdsl-stub");

pub fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
    pub ddsl: PathBuf,
    pub ports: [u16; 3],
}

impl Fixture {
    pub fn base(&self) -> &Path {
        self.dir.path()
    }

    pub fn model(&self) -> DeploymentModel {
        let text = std::fs::read_to_string(&self.ddsl).unwrap();
        parse_ddsl(&text, &self.ddsl.display().to_string()).unwrap()
    }

    pub fn session(&self) -> DeploymentSession {
        let ws = Workspace::default();
        let (s, _) = load_session(self.model(), self.base(), &ws, fast_timing()).unwrap();
        s
    }
}

/// The demo deployment copied to a temp dir, every node running the stub on
/// a free port.
pub fn demo_fixture() -> Fixture {
    let dir = tempfile::tempdir().unwrap();
    for entry in std::fs::read_dir(demo_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    let ports = [free_port(), free_port(), free_port()];
    let mut text = std::fs::read_to_string(dir.path().join("demo.ddsl")).unwrap();
    for exe in ["bin/speechcomp", "bin/mouthcomp", "bin/jointmotorcomp"] {
        text = text.replace(exe, STUB);
    }
    for (old, new) in ["10021", "10022", "10067"].iter().zip(ports) {
        text = text.replace(&format!(":{old};"), &format!(":{new};"));
    }
    let ddsl = dir.path().join("demo.ddsl");
    std::fs::write(&ddsl, text).unwrap();
    Fixture { dir, ddsl, ports }
}

pub fn fast_timing() -> Timing {
    Timing {
        health_period: Duration::from_millis(100),
        start_timeout: Duration::from_secs(5),
        stop_grace: Duration::from_secs(1),
        poll: Duration::from_millis(20),
    }
}

pub fn shared_loader() -> compdsl_orchestrator::SharedLoader {
    Arc::new(Workspace::default())
}

pub fn kill(pid: u32) {
    unsafe {
        libc::kill(pid as i32, libc::SIGKILL);
    }
}

pub fn wait_until(timeout: Duration, mut f: impl FnMut() -> bool) -> bool {
    let deadline = Instant::now() + timeout;
    while Instant::now() < deadline {
        if f() {
            return true;
        }
        std::thread::sleep(Duration::from_millis(10));
    }
    f()
}

/// One HTTP/1.1 request with `Connection: close`; returns status and body.
pub fn http(addr: &str, method: &str, path: &str, body: Option<&str>) -> (u16, serde_json::Value) {
    let mut s = TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(30))).unwrap();
    let body = body.unwrap_or("");
    let req = format!(
        "{method} {path} HTTP/1.1\r\nHost: {addr}\r\nConnection: close\r\nContent-Type: application/json\r\nContent-Length: {}\r\n\r\n{body}",
        body.len()
    );
    s.write_all(req.as_bytes()).unwrap();
    let mut raw = Vec::new();
    s.read_to_end(&mut raw).unwrap();
    let text = String::from_utf8(raw).unwrap();
    let (head, rest) = text.split_once("\r\n\r\n").unwrap();
    let status = head.split(' ').nth(1).unwrap().parse().unwrap();
    let chunked = head.lines().any(|l| l.eq_ignore_ascii_case("transfer-encoding: chunked"));
    let payload = if chunked { dechunk(rest) } else { rest.to_string() };
    let json = if payload.is_empty() { serde_json::Value::Null } else { serde_json::from_str(&payload).unwrap() };
    (status, json)
}

fn dechunk(mut s: &str) -> String {
    let mut out = String::new();
    loop {
        let (size, rest) = s.split_once("\r\n").unwrap();
        let n = usize::from_str_radix(size.trim(), 16).unwrap();
        if n == 0 {
            return out;
        }
        out.push_str(&rest[..n]);
        s = &rest[n + 2..];
    }
}
