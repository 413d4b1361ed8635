//! The three-component speech example, checked end to end through the
//! filesystem loader.

use std::fs;
use std::path::{Path, PathBuf};

use compdsl_core::cdsl::CommKind;
use compdsl_core::ddsl::{build_graph, check_deployment, graph_to_dot, graph_to_json, parse_ddsl, EdgeKind};
use compdsl_core::pdsl::{bind_legacy, parse_legacy_config, parse_pdsl, Value};
use compdsl_core::{ComponentLoader, Workspace};

fn demo_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../demo")
}

/// Copy of the demo directory that a test may mutate.
fn demo_copy() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    for entry in fs::read_dir(demo_dir()).unwrap() {
        let p = entry.unwrap().path();
        if p.is_file() {
            fs::copy(&p, tmp.path().join(p.file_name().unwrap())).unwrap();
        }
    }
    tmp
}

fn load(dir: &Path) -> compdsl_core::ddsl::DeploymentModel {
    let path = dir.join("demo.ddsl");
    parse_ddsl(&fs::read_to_string(&path).unwrap(), &path.display().to_string()).unwrap()
}

#[test]
fn components_link() {
    let ws = Workspace::default();
    let speech = ws.load_component("SpeechComp.cdsl", &demo_dir()).unwrap();
    let requires: Vec<&str> = speech.linked.model.names(CommKind::Requires).collect();
    assert_eq!(requires, ["Mouth"]);
    let (module, iface) = speech.linked.interface_by_name("Speech").unwrap();
    assert_eq!(module.name, "Speech");
    assert_eq!(iface.methods[0].name, "say");
}

#[test]
fn deployment_checks_clean() {
    let dir = demo_dir();
    let check = check_deployment(&load(&dir), &dir, &Workspace::default());
    let errors: Vec<_> = check.diagnostics.iter().filter(|d| d.is_error()).collect();
    assert!(errors.is_empty(), "{errors:?}");
    // Executables are not built in the repository.
    assert!(check.diagnostics.iter().all(|d| d.code == "missing-executable"));
    assert_eq!(check.diagnostics.len(), 3);
}

#[test]
fn dependency_chain() {
    let dir = demo_dir();
    let graph = build_graph(&load(&dir), &dir, &Workspace::default()).unwrap().graph;
    let edges: Vec<(&str, &str, &str)> =
        graph.edges.iter().map(|e| (e.from.as_str(), e.to.as_str(), e.interface.as_str())).collect();
    assert_eq!(edges, [("mouth", "jointmotor", "JointMotor"), ("speech", "mouth", "Mouth")]);
    assert!(graph.edges.iter().all(|e| e.kind == EdgeKind::Requires));
    assert_eq!(graph.start_order("speech").unwrap(), ["jointmotor", "mouth", "speech"]);
    assert_eq!(graph.stop_order("jointmotor").unwrap(), ["speech", "mouth", "jointmotor"]);

    let dot = graph_to_dot("Demo", &graph, None);
    assert_eq!(dot.matches("[label=\"").count(), 5);
    assert_eq!(dot.matches("style=solid").count(), 2);
    assert!(dot.contains("\"speech\" [label=\"speech\\nSpeechComp\"];"));
    let json = graph_to_json(&graph, None);
    assert_eq!(json.nodes.len(), 3);
}

#[test]
fn out_of_range_baud_rate_is_attributed_to_its_node() {
    let dir = demo_copy();
    let conf = dir.path().join("jointmotor.conf");
    let text = fs::read_to_string(&conf).unwrap().replace("BaudRate = 115200", "BaudRate = 42");
    fs::write(&conf, text).unwrap();
    let check = check_deployment(&load(dir.path()), dir.path(), &Workspace::default());
    let errors: Vec<_> = check.diagnostics.iter().filter(|d| d.is_error()).collect();
    assert_eq!(errors.len(), 1, "{errors:?}");
    assert_eq!(errors[0].code, "range-violation");
    assert_eq!(errors[0].node.as_deref(), Some("jointmotor"));
    assert!(check.graph.is_none());
}

#[test]
fn speech_parameter_binds() {
    let schema = parse_pdsl(&fs::read_to_string(demo_dir().join("SpeechComp.pdsl")).unwrap(), "s").unwrap();
    let cfg = parse_legacy_config(&fs::read_to_string(demo_dir().join("speech.conf")).unwrap()).unwrap();
    let inst = bind_legacy(&schema, &cfg, "SpeechComp").unwrap();
    assert_eq!(inst.get("mouthSynchronization"), Some(&Value::Bool(true)));
}

#[test]
fn missing_config_is_a_warning() {
    let dir = demo_copy();
    fs::remove_file(dir.path().join("mouth.conf")).unwrap();
    let check = check_deployment(&load(dir.path()), dir.path(), &Workspace::default());
    assert!(!check.has_errors());
    assert!(check.diagnostics.iter().any(|d| d.code == "missing-config" && d.node.as_deref() == Some("mouth")));
}
