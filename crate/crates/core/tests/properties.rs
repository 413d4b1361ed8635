use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use proptest::prelude::*;

use compdsl_core::cdsl::{ComponentModel, InterfaceRef, LinkedComponent};
use compdsl_core::codegen::{cpp, generate_component, write_fileset, Artifact, FileKind};
use compdsl_core::ddsl::{derive_graph, parse_ddsl, print_ddsl, DependencyGraph, Edge, EdgeKind, GraphNode};
use compdsl_core::idsl::{parse_idsl, print_idsl, resolve_idsl, IdslModule};
use compdsl_core::loader::{ImportedModule, LoadedComponent};
use compdsl_core::pdsl::{bind_legacy, parse_legacy_config, parse_pdsl};

fn ident() -> impl Strategy<Value = String> {
    "[A-Z][a-zA-Z0-9]{0,6}".prop_map(|s| format!("T{s}"))
}

fn basic() -> impl Strategy<Value = &'static str> {
    prop::sample::select(vec!["bool", "byte", "short", "int", "long", "float", "double", "string"])
}

/// Random IDSL text: a few structs over basic types, sequences of them and
/// an interface using them.
fn idsl_text() -> impl Strategy<Value = String> {
    (
        prop::collection::btree_set(ident(), 1..5),
        prop::collection::vec(basic(), 1..6),
        prop::collection::vec(("[a-z]{1,6}", prop::collection::vec(basic(), 0..4), any::<bool>()), 0..5),
    )
        .prop_map(|(names, types, methods)| {
            let names: Vec<String> = names.into_iter().collect();
            let mut s = String::from("module Gen {\n");
            for (i, n) in names.iter().enumerate() {
                s.push_str(&format!("struct {n} {{ "));
                for (j, t) in types.iter().enumerate() {
                    s.push_str(&format!("{t} f{j}; "));
                }
                if i > 0 {
                    s.push_str(&format!("{} prev; ", names[i - 1]));
                }
                s.push_str("};\n");
                s.push_str(&format!("sequence<{n}> {n}List;\n"));
            }
            s.push_str("interface Api {\n");
            let mut seen = BTreeSet::new();
            for (m, params, ret) in methods {
                if !seen.insert(m.clone()) || ["in", "out", "map", "void", "module", "enum", "struct", "sequence", "throws", "interface", "exception"]
                    .contains(&m.as_str())
                    || ["bool", "byte", "short", "int", "long", "float", "double", "string"].contains(&m.as_str())
                {
                    continue;
                }
                let ps: Vec<String> = params.iter().enumerate().map(|(k, t)| format!("{t} p{k}")).collect();
                let r = if ret { format!("{}List", names[0]) } else { "void".into() };
                s.push_str(&format!("{r} {m}({});\n", ps.join(", ")));
            }
            s.push_str("};\n};\n");
            s
        })
}

fn graph(n: usize, edges: &[(usize, usize)]) -> DependencyGraph {
    let nodes = (0..n).map(|i| GraphNode { id: format!("n{i:02}"), component: "C".into(), host: "h".into(), port: 1 }).collect();
    let mut es: Vec<Edge> = edges
        .iter()
        .filter(|(a, b)| a > b)
        .map(|(a, b)| Edge { from: format!("n{a:02}"), to: format!("n{b:02}"), interface: "I".into(), kind: EdgeKind::Requires })
        .collect();
    es.sort();
    es.dedup();
    DependencyGraph { nodes, edges: es }
}

fn dag() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..9).prop_flat_map(|n| (Just(n), prop::collection::vec((0..n, 0..n), 0..20)))
}

fn loaded(name: &str, implements: &[&str], requires: &[&str]) -> Arc<LoadedComponent> {
    let mut model = ComponentModel::new(name);
    model.implements = implements.iter().map(|i| InterfaceRef::new(i)).collect();
    model.requires = requires.iter().map(|i| InterfaceRef::new(i)).collect();
    Arc::new(LoadedComponent { path: PathBuf::from(format!("{name}.cdsl")), linked: LinkedComponent { model, modules: Vec::new() } })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn idsl_round_trip(text in idsl_text()) {
        let first = resolve_idsl(parse_idsl(&text, "g").unwrap()).unwrap();
        let printed = print_idsl(&first);
        let second = resolve_idsl(parse_idsl(&printed, "g").unwrap()).unwrap();
        prop_assert_eq!(&first, &second);
        prop_assert_eq!(print_idsl(&second), printed);
    }

    #[test]
    fn inheritance_is_unexpressible(parent in ident(), child in ident()) {
        let text = format!("module M {{ interface {child} extends {parent} {{ void f(); }}; }};");
        let err = parse_idsl(&text, "m").unwrap_err();
        prop_assert_eq!(&err.0[0].code, "syntax");
        prop_assert!(err.0[0].message.contains("extends"));
    }

    #[test]
    fn ddsl_round_trip(ports in prop::collection::btree_set(1u16..=65535, 0..8), with_exe in any::<bool>()) {
        let mut text = String::from("deployment R {\n");
        for (i, p) in ports.iter().enumerate() {
            let exe = if with_exe { format!("executable \"bin/n{i}\";") } else { String::new() };
            text.push_str(&format!("node n{i} {{ component \"C{i}.cdsl\"; {exe} endpoint 10.0.0.{}:{p}; }};\n", i + 1));
        }
        text.push_str("};");
        let first = parse_ddsl(&text, "r").unwrap();
        let second = parse_ddsl(&print_ddsl(&first), "r").unwrap();
        prop_assert_eq!(first, second);
    }

    /// A value binds without violations exactly when it lies in the declared
    /// closed interval.
    #[test]
    fn int_range_validation(lo in -1000i64..1000, span in 0i64..1000, v in -3000i64..3000) {
        let hi = lo + span;
        let schema = parse_pdsl(&format!("parameters P {{ int X in [{lo}, {hi}]; }};"), "p").unwrap();
        let cfg = parse_legacy_config(&format!("C.X = {v}\n")).unwrap();
        let ok = bind_legacy(&schema, &cfg, "C").is_ok();
        prop_assert_eq!(ok, lo <= v && v <= hi);
    }

    #[test]
    fn float_range_validation(lo in -100.0f64..100.0, span in 0.0f64..100.0, v in -300.0f64..300.0) {
        let hi = lo + span;
        let schema = parse_pdsl(&format!("parameters P {{ float X in [{lo:?}, {hi:?}]; }};"), "p").unwrap();
        let cfg = parse_legacy_config(&format!("C.X = {v:?}\n")).unwrap();
        let ok = bind_legacy(&schema, &cfg, "C").is_ok();
        prop_assert_eq!(ok, lo <= v && v <= hi);
    }

    #[test]
    fn start_order_is_topological((n, edges) in dag(), target in 0usize..9) {
        let g = graph(n, &edges);
        let target = format!("n{:02}", target % n);
        let order = g.start_order(&target).unwrap();
        prop_assert_eq!(order.last(), Some(&target));
        let pos: BTreeMap<&str, usize> = order.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        for e in &g.edges {
            if let (Some(u), Some(v)) = (pos.get(e.from.as_str()), pos.get(e.to.as_str())) {
                prop_assert!(v < u);
            }
        }
        // Closure: every provider of an included node is included.
        for id in &order {
            for p in g.providers_of(id) {
                prop_assert!(pos.contains_key(p));
            }
        }
    }

    #[test]
    fn start_order_ignores_input_order((n, edges) in dag(), seed in any::<u64>()) {
        let g = graph(n, &edges);
        let mut shuffled = g.clone();
        let len = shuffled.nodes.len();
        shuffled.nodes.rotate_left((seed as usize) % len);
        shuffled.edges.reverse();
        prop_assert_eq!(g.full_start_order().unwrap(), shuffled.full_start_order().unwrap());
        prop_assert!(g.cycles().is_empty());
    }

    #[test]
    fn pins_never_add_ambiguity(providers in 1usize..4, pin in 0usize..4) {
        let mut nodes = String::from("node a { component \"A\"; endpoint h:1; PIN };\n");
        let mut comps = BTreeMap::new();
        comps.insert("a", loaded("A", &[], &["X"]));
        let ids: Vec<String> = (0..providers).map(|i| format!("p{i}")).collect();
        for (i, id) in ids.iter().enumerate() {
            nodes.push_str(&format!("node {id} {{ component \"P\"; endpoint h:{}; }};\n", i + 2));
        }
        for id in &ids {
            comps.insert(id.as_str(), loaded("P", &["X"], &[]));
        }
        let ambiguities = |text: &str| {
            let model = parse_ddsl(&format!("deployment D {{ {text} }};"), "d").unwrap();
            derive_graph(&model, &comps).1.iter().filter(|d| d.code == "ambiguous-provider").count()
        };
        let before = ambiguities(&nodes.replace("PIN", ""));
        let after = ambiguities(&nodes.replace("PIN", &format!("provider X = p{};", pin % providers)));
        prop_assert!(after <= before);
        prop_assert_eq!(after, 0);
    }

    #[test]
    fn inert_nodes_change_no_edges(extra in 0usize..4) {
        let mut comps = BTreeMap::new();
        comps.insert("s", loaded("S", &[], &["M"]));
        comps.insert("m", loaded("M", &["M"], &[]));
        let base = "node s { component \"S\"; endpoint h:1; }; node m { component \"M\"; endpoint h:2; };";
        let model = parse_ddsl(&format!("deployment D {{ {base} }};"), "d").unwrap();
        let (g0, _) = derive_graph(&model, &comps);
        let ids: Vec<String> = (0..extra).map(|i| format!("z{i}")).collect();
        let mut more = base.to_string();
        for (i, id) in ids.iter().enumerate() {
            more.push_str(&format!("node {id} {{ component \"Z\"; endpoint h:{}; }};", i + 10));
        }
        for id in &ids {
            comps.insert(id.as_str(), loaded("Z", &[], &[]));
        }
        let model = parse_ddsl(&format!("deployment D {{ {more} }};"), "d").unwrap();
        let (g1, _) = derive_graph(&model, &comps);
        prop_assert_eq!(g0.edges, g1.edges);
    }
}

fn api_module(methods: usize) -> Arc<ImportedModule> {
    let mut module = String::from("module Api {\n");
    for i in 0..4 {
        module.push_str(&format!("interface I{i} {{"));
        for m in 0..methods {
            module.push_str(&format!(" void m{m}(int x);"));
        }
        module.push_str(" };\n");
    }
    module.push_str("};");
    let module: IdslModule = resolve_idsl(parse_idsl(&module, "api").unwrap()).unwrap();
    Arc::new(ImportedModule { path: PathBuf::from("Api.idsl"), module })
}

fn component(implements: &[usize], requires: &[usize], methods: usize) -> LinkedComponent {
    let mut model = ComponentModel::new("Gen");
    let r = |i: &usize| {
        let mut r = InterfaceRef::new(&format!("I{i}"));
        r.module = Some("Api".into());
        r
    };
    model.implements = implements.iter().map(r).collect();
    model.requires = requires.iter().map(r).collect();
    LinkedComponent { model, modules: vec![api_module(methods)] }
}

fn subset() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::btree_set(0usize..4, 0..4).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn codegen_structure(implements in subset(), requires in subset(), methods in 0usize..4) {
        let c = component(&implements, &requires, methods);
        let set = generate_component(&c, None, &cpp::backend()).unwrap();
        prop_assert_eq!(set.of_artifact(Artifact::ProxySetup).count(), requires.len());
        prop_assert_eq!(set.of_artifact(Artifact::ServantStub).count(), implements.len());
        prop_assert!(set.of_kind(FileKind::Specific).count() >= 1);
        prop_assert!(set.of_kind(FileKind::Generic).count() >= 1);
        let again = generate_component(&c, None, &cpp::backend()).unwrap();
        prop_assert_eq!(set, again);
    }

    #[test]
    fn adding_a_requirement_touches_only_generic_files(implements in subset(), requires in subset(), extra in 0usize..4) {
        prop_assume!(!requires.contains(&extra));
        let before = generate_component(&component(&implements, &requires, 2), None, &cpp::backend()).unwrap();
        let mut more = requires.clone();
        more.push(extra);
        let after = generate_component(&component(&implements, &more, 2), None, &cpp::backend()).unwrap();
        for f in &after.files {
            if before.file(&f.rel_path) != Some(f) {
                prop_assert_eq!(f.kind, FileKind::Generic, "{}", f.rel_path);
            }
        }
    }

    /// Specific files keep their last manual edit across any sequence of
    /// regenerations with varying models.
    #[test]
    fn regeneration_never_clobbers_specific_files(
        steps in prop::collection::vec((subset(), subset(), 0usize..3, prop::option::of("[a-z ]{0,20}")), 1..6)
    ) {
        let dir = tempfile::tempdir().unwrap();
        let mut expected: BTreeMap<String, String> = BTreeMap::new();
        for (implements, requires, methods, edit) in steps {
            let set = generate_component(&component(&implements, &requires, methods), None, &cpp::backend()).unwrap();
            write_fileset(&set, dir.path()).unwrap();
            for f in set.of_kind(FileKind::Specific) {
                expected.entry(f.rel_path.clone()).or_insert_with(|| f.content.clone());
            }
            if let Some(text) = edit {
                let path = "src/specificworker.cpp".to_string();
                std::fs::write(dir.path().join(&path), &text).unwrap();
                expected.insert(path, text);
            }
            for (path, content) in &expected {
                prop_assert_eq!(&std::fs::read_to_string(dir.path().join(path)).unwrap(), content);
            }
        }
    }
}
