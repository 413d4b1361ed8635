//! Deployment-level diagnostics over small synthetic component sets.

use std::fs;
use std::path::Path;

use compdsl_core::ddsl::{build_graph, check_deployment, parse_ddsl};
use compdsl_core::Workspace;

/// Writes `X.idsl` for each interface and one CDSL per component spec
/// `(name, implements, requires)`.
fn setup(dir: &Path, components: &[(&str, &[&str], &[&str])]) {
    let mut ifaces: Vec<&str> = components.iter().flat_map(|(_, i, r)| i.iter().chain(r.iter()).copied()).collect();
    ifaces.sort();
    ifaces.dedup();
    for i in &ifaces {
        fs::write(dir.join(format!("{i}.idsl")), format!("module {i} {{ interface {i} {{ void ping(); }}; }};")).unwrap();
    }
    for (name, implements, requires) in components {
        let mut imports = String::new();
        for i in implements.iter().chain(requires.iter()) {
            imports.push_str(&format!("import \"{i}.idsl\";\n"));
        }
        let mut comm = String::new();
        if !implements.is_empty() {
            comm.push_str(&format!("implements {};", implements.join(", ")));
        }
        if !requires.is_empty() {
            comm.push_str(&format!("requires {};", requires.join(", ")));
        }
        fs::write(dir.join(format!("{name}.cdsl")), format!("{imports}component {name} {{ communications {{ {comm} }}; }};"))
            .unwrap();
    }
}

fn deployment(nodes: &[(&str, &str)], extra: &str) -> String {
    let mut s = String::from("deployment T {\n");
    for (i, (id, comp)) in nodes.iter().enumerate() {
        s.push_str(&format!("node {id} {{ component \"{comp}.cdsl\"; endpoint 127.0.0.1:{}; {} }};\n", 20000 + i, if *id == "a" { extra } else { "" }));
    }
    s.push_str("};\n");
    s
}

fn codes(dir: &Path, ddsl: &str) -> Vec<String> {
    let model = parse_ddsl(ddsl, "t.ddsl").unwrap();
    check_deployment(&model, dir, &Workspace::default())
        .diagnostics
        .into_iter()
        .filter(|d| d.is_error())
        .map(|d| d.code)
        .collect()
}

#[test]
fn unresolved_requirement() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &[], &["X"])]);
    assert_eq!(codes(dir.path(), &deployment(&[("a", "A")], "")), ["unresolved-requirement"]);
}

#[test]
fn ambiguous_provider_and_pin() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &[], &["X"]), ("B", &["X"], &[]), ("C", &["X"], &[])]);
    let nodes = [("a", "A"), ("b", "B"), ("c", "C")];
    assert_eq!(codes(dir.path(), &deployment(&nodes, "")), ["ambiguous-provider"]);
    assert!(codes(dir.path(), &deployment(&nodes, "provider X = c;")).is_empty());
    let model = parse_ddsl(&deployment(&nodes, "provider X = c;"), "t").unwrap();
    let graph = build_graph(&model, dir.path(), &Workspace::default()).unwrap().graph;
    assert_eq!(graph.providers_of("a").into_iter().collect::<Vec<_>>(), ["c"]);
}

#[test]
fn pin_to_non_provider() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &[], &["X"]), ("B", &["X"], &[]), ("C", &["Y"], &[])]);
    let nodes = [("a", "A"), ("b", "B"), ("c", "C")];
    assert_eq!(codes(dir.path(), &deployment(&nodes, "provider X = c;")), ["invalid-pin"]);
    assert_eq!(codes(dir.path(), &deployment(&nodes, "provider X = nobody;")), ["invalid-pin"]);
}

#[test]
fn two_cycle() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &["Y"], &["X"]), ("B", &["X"], &["Y"])]);
    let model = parse_ddsl(&deployment(&[("a", "A"), ("b", "B")], ""), "t").unwrap();
    let err = build_graph(&model, dir.path(), &Workspace::default()).unwrap_err();
    assert_eq!(err.len(), 1);
    assert_eq!(err.0[0].code, "requires-cycle");
    assert!(err.0[0].message.ends_with("a, b"));
}

#[test]
fn self_satisfaction_drops_the_edge() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &["X"], &["X"])]);
    let model = parse_ddsl(&deployment(&[("a", "A")], ""), "t").unwrap();
    let graph = build_graph(&model, dir.path(), &Workspace::default()).unwrap().graph;
    assert!(graph.edges.is_empty());
}

#[test]
fn missing_component_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = codes(dir.path(), &deployment(&[("a", "Nope")], ""));
    assert_eq!(c[0], "component-load-failed");
}

#[test]
fn missing_executable_is_only_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path(), &[("A", &[], &[])]);
    let model = parse_ddsl(
        "deployment T { node a { component \"A.cdsl\"; executable \"bin/none\"; endpoint h:1; }; };",
        "t",
    )
    .unwrap();
    let check = check_deployment(&model, dir.path(), &Workspace::default());
    assert!(!check.has_errors());
    assert_eq!(check.diagnostics[0].code, "missing-executable");
}

#[test]
fn topics_without_publisher_warn() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("T.idsl"), "module T { interface T { void tick(); }; };").unwrap();
    fs::write(dir.path().join("S.cdsl"), "import \"T.idsl\"; component S { communications { subscribesTo T; }; };").unwrap();
    fs::write(dir.path().join("P.cdsl"), "import \"T.idsl\"; component P { communications { publishes T; }; };").unwrap();
    let lonely = parse_ddsl("deployment D { node s { component \"S.cdsl\"; endpoint h:1; }; };", "t").unwrap();
    let build = build_graph(&lonely, dir.path(), &Workspace::default()).unwrap();
    assert_eq!(build.warnings[0].code, "no-publisher");
    let both = parse_ddsl(
        "deployment D { node s { component \"S.cdsl\"; endpoint h:1; }; node p { component \"P.cdsl\"; endpoint h:2; }; };",
        "t",
    )
    .unwrap();
    let graph = build_graph(&both, dir.path(), &Workspace::default()).unwrap().graph;
    assert_eq!(graph.edges.len(), 1);
    assert_eq!(graph.start_order("s").unwrap(), ["s"]);
}
