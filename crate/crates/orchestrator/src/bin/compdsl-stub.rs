//! Stand-in node process for tests and demos. Listens on the endpoint the
//! orchestrator hands it and accepts connections until terminated.
//!
//! An optional config file may set `Stub.StartDelayMs` (wait before
//! listening) and `Stub.Fail = true` (exit with status 3 instead).

use std::net::TcpListener;
use std::time::Duration;

use compdsl_core::pdsl::parse_legacy_config;
use compdsl_orchestrator::process::{ENV_HOST, ENV_PORT};

fn main() {
    let host = std::env::var(ENV_HOST).unwrap_or_else(|_| "127.0.0.1".into());
    let Some(port) = std::env::var(ENV_PORT).ok().and_then(|p| p.parse::<u16>().ok()) else {
        eprintln!("compdsl-stub: {ENV_PORT} is not set");
        std::process::exit(2);
    };
    let mut delay_ms = 0u64;
    let mut fail = false;
    if let Some(path) = std::env::args().nth(1) {
        let text = std::fs::read_to_string(&path).unwrap_or_else(|e| {
            eprintln!("compdsl-stub: {path}: {e}");
            std::process::exit(2);
        });
        if let Ok(cfg) = parse_legacy_config(&text) {
            delay_ms = cfg.get("Stub.StartDelayMs").and_then(|e| e.raw.parse().ok()).unwrap_or(0);
            fail = cfg.get("Stub.Fail").is_some_and(|e| e.raw == "true");
        }
    }
    std::thread::sleep(Duration::from_millis(delay_ms));
    if fail {
        eprintln!("compdsl-stub: failing on request");
        std::process::exit(3);
    }
    let listener = TcpListener::bind((host.as_str(), port)).unwrap_or_else(|e| {
        eprintln!("compdsl-stub: bind {host}:{port}: {e}");
        std::process::exit(1);
    });
    for conn in listener.incoming() {
        drop(conn);
    }
}
