use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

const COMPDSL: &str = env!("CARGO_BIN_EXE_compdsl");

fn compdsl(args: &[&str]) -> (i32, Value) {
    let o: Output = Command::new(COMPDSL).arg("--json").args(args).stdin(Stdio::null()).output().unwrap();
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)));
    (o.status.code().unwrap(), v)
}

fn stub() -> PathBuf {
    let stub = Path::new(COMPDSL).with_file_name("compdsl-stub");
    if !stub.is_file() {
        let cargo = std::env::var("CARGO").unwrap_or_else(|_| "cargo".into());
        let ok = Command::new(cargo)
            .args(["build", "-p", "compdsl-orchestrator", "--bin", "compdsl-stub"])
            .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
            .status()
            .unwrap()
            .success();
        assert!(ok && stub.is_file());
    }
    stub
}

fn fixture() -> (tempfile::TempDir, String) {
    let dir = tempfile::tempdir().unwrap();
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo");
    for e in std::fs::read_dir(demo).unwrap() {
        let p = e.unwrap().path();
        std::fs::copy(&p, dir.path().join(p.file_name().unwrap())).unwrap();
    }
    let ddsl = dir.path().join("demo.ddsl");
    let mut text = std::fs::read_to_string(&ddsl).unwrap();
    for exe in ["bin/speechcomp", "bin/mouthcomp", "bin/jointmotorcomp"] {
        text = text.replace(exe, stub().to_str().unwrap());
    }
    for port in ["10021", "10022", "10067"] {
        let free = TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
        text = text.replace(&format!(":{port};"), &format!(":{free};"));
    }
    std::fs::write(&ddsl, text).unwrap();
    (dir, ddsl.to_string_lossy().into_owned())
}

fn state<'a>(v: &'a Value, id: &str) -> &'a str {
    v["result"]["status"]["nodes"].as_array().unwrap().iter().find(|n| n["id"] == id).unwrap()["state"].as_str().unwrap()
}

#[test]
fn later_invocations_see_running_nodes() {
    let (_dir, ddsl) = fixture();
    let (code, v) = compdsl(&["deploy", "up", &ddsl, "--target", "mouth"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["started"], serde_json::json!(["jointmotor", "mouth"]));

    let (code, v) = compdsl(&["deploy", "status", &ddsl]);
    assert_eq!(code, 0);
    assert_eq!(state(&v, "mouth"), "running");
    assert_eq!(state(&v, "speech"), "stopped");

    let (code, v) = compdsl(&["deploy", "down", &ddsl, "--target", "jointmotor"]);
    assert_eq!(code, 1);
    assert_eq!(v["diagnostics"][0]["code"], "dependents-running");
    assert!(v["diagnostics"][0]["message"].as_str().unwrap().contains("mouth"));
    assert_eq!(state(&v, "jointmotor"), "running");

    // Starting the rest only starts speech.
    let (code, v) = compdsl(&["deploy", "up", &ddsl]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["started"], serde_json::json!(["speech"]));

    let (code, v) = compdsl(&["deploy", "down", &ddsl]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(v["result"]["stopped"], serde_json::json!(["speech", "mouth", "jointmotor"]));
}

#[test]
fn a_node_killed_between_invocations_shows_failed() {
    let (_dir, ddsl) = fixture();
    let (code, v) = compdsl(&["deploy", "up", &ddsl, "--target", "jointmotor"]);
    assert_eq!(code, 0, "{v}");
    let pid = v["result"]["status"]["nodes"].as_array().unwrap().iter().find(|n| n["id"] == "jointmotor").unwrap()["pid"]
        .as_u64()
        .unwrap();
    unsafe {
        libc::kill(pid as i32, libc::SIGKILL);
    }
    std::thread::sleep(std::time::Duration::from_millis(100));
    let (_, v) = compdsl(&["deploy", "status", &ddsl, "--target", "jointmotor"]);
    assert_eq!(state(&v, "jointmotor"), "failed");
    assert_eq!(v["result"]["status"]["nodes"].as_array().unwrap().len(), 1);
    // Failed nodes can be started again.
    let (code, v) = compdsl(&["deploy", "up", &ddsl, "--target", "jointmotor"]);
    assert_eq!(code, 0, "{v}");
    assert_eq!(state(&v, "jointmotor"), "running");
    compdsl(&["deploy", "down", &ddsl]);
}
