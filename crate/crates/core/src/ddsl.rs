//! Deployment descriptions: which component runs where with which
//! configuration, and the dependency graph precomputed from them.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cdsl::CommKind;
use crate::diag::{Diagnostic, Diagnostics};
use crate::loader::{ComponentLoader, LoadedComponent};
use crate::pdsl::{bind_legacy_named, legacy_prefix, parse_legacy_config_named, parse_pdsl};
use crate::source::{quote, Cursor, Pos, TokenKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProviderPin {
    pub interface: String,
    pub node: String,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    /// CDSL file, relative to the deployment file.
    pub component: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub executable: Option<String>,
    pub host: String,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub providers: Vec<ProviderPin>,
    #[serde(skip)]
    pub pos: Pos,
}

impl NodeSpec {
    pub fn pin(&self, interface: &str) -> Option<&str> {
        self.providers.iter().find(|p| p.interface == interface).map(|p| p.node.as_str())
    }

    pub fn endpoint(&self) -> String {
        format!("{}:{}", self.host, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeploymentModel {
    pub name: String,
    #[serde(skip)]
    pub origin: String,
    pub nodes: Vec<NodeSpec>,
}

impl DeploymentModel {
    pub fn node(&self, id: &str) -> Option<&NodeSpec> {
        self.nodes.iter().find(|n| n.id == id)
    }

    /// Model-level invariants: unique node ids, unique endpoints, valid ports.
    pub fn check_invariants(&self) -> Diagnostics {
        let mut diags = Diagnostics::new();
        let mut ids = HashSet::new();
        let mut endpoints: HashMap<(String, u16), &str> = HashMap::new();
        for n in &self.nodes {
            if !ids.insert(n.id.as_str()) {
                diags.push(
                    Diagnostic::error("duplicate-node", format!("duplicate node id {}", n.id))
                        .at(&self.origin, n.pos)
                        .for_node(&n.id),
                );
            }
            if n.port == 0 || n.host.is_empty() {
                diags.push(
                    Diagnostic::error("malformed-endpoint", format!("malformed endpoint {}", n.endpoint()))
                        .at(&self.origin, n.pos)
                        .for_node(&n.id),
                );
            }
            if let Some(other) = endpoints.insert((n.host.clone(), n.port), &n.id) {
                diags.push(
                    Diagnostic::error(
                        "duplicate-endpoint",
                        format!("duplicate endpoint {} used by nodes {other} and {}", n.endpoint(), n.id),
                    )
                    .at(&self.origin, n.pos)
                    .for_node(&n.id),
                );
            }
            let mut pinned = HashSet::new();
            for pin in &n.providers {
                if !pinned.insert(&pin.interface) {
                    diags.push(
                        Diagnostic::error("duplicate-pin", format!("interface {} pinned twice", pin.interface))
                            .at(&self.origin, pin.pos)
                            .for_node(&n.id),
                    );
                }
            }
        }
        diags
    }
}

pub fn parse_ddsl(text: &str, origin: &str) -> Result<DeploymentModel, Diagnostics> {
    let mut cur = Cursor::new(text, origin)?;
    cur.expect_keyword("deployment")?;
    let (name, _) = cur.expect_ident()?;
    cur.expect_punct('{')?;
    let mut nodes = Vec::new();
    while !cur.is_punct('}') {
        nodes.push(parse_node(&mut cur)?);
    }
    cur.expect_punct('}')?;
    cur.eat_punct(';');
    cur.expect_eof()?;
    let model = DeploymentModel { name, origin: origin.to_string(), nodes };
    let diags = model.check_invariants();
    diags.into_result(model)
}

fn parse_node(cur: &mut Cursor<'_>) -> Result<NodeSpec, Diagnostics> {
    let pos = cur.expect_keyword("node")?;
    let (id, _) = cur.expect_ident()?;
    cur.expect_punct('{')?;
    let mut component = None;
    let mut executable = None;
    let mut endpoint: Option<(String, u16)> = None;
    let mut config = None;
    let mut providers = Vec::new();
    while !cur.is_punct('}') {
        let fpos = cur.pos();
        let field = match &cur.peek().kind {
            TokenKind::Ident(s) => s.clone(),
            _ => return Err(cur.unexpected(&["`component`", "`executable`", "`endpoint`", "`config`", "`provider`", "`}`"])),
        };
        let duplicate = |set: bool| -> Result<(), Diagnostics> {
            if set {
                Err(cur.error_at("duplicate-field", format!("node {id}: duplicate field {field}"), fpos).into())
            } else {
                Ok(())
            }
        };
        match field.as_str() {
            "component" => {
                duplicate(component.is_some())?;
                cur.bump();
                component = Some(cur.expect_string()?.0);
            }
            "executable" => {
                duplicate(executable.is_some())?;
                cur.bump();
                executable = Some(cur.expect_string()?.0);
            }
            "config" => {
                duplicate(config.is_some())?;
                cur.bump();
                config = Some(cur.expect_string()?.0);
            }
            "endpoint" => {
                duplicate(endpoint.is_some())?;
                cur.bump();
                endpoint = Some(parse_endpoint(cur)?);
            }
            "provider" => {
                cur.bump();
                let (interface, ppos) = cur.expect_ident()?;
                cur.expect_punct('=')?;
                let (node, _) = cur.expect_ident()?;
                providers.push(ProviderPin { interface, node, pos: ppos });
            }
            _ => return Err(cur.unexpected(&["`component`", "`executable`", "`endpoint`", "`config`", "`provider`", "`}`"])),
        }
        cur.expect_punct(';')?;
    }
    cur.expect_punct('}')?;
    cur.expect_punct(';')?;
    let missing = |what: &str| -> Diagnostics {
        cur.error_at("missing-field", format!("node {id} has no {what}"), pos).into()
    };
    let component = component.ok_or_else(|| missing("component"))?;
    let (host, port) = endpoint.ok_or_else(|| missing("endpoint"))?;
    Ok(NodeSpec { id, component, executable, host, port, config, providers, pos })
}

fn parse_endpoint(cur: &mut Cursor<'_>) -> Result<(String, u16), Diagnostics> {
    let pos = cur.pos();
    let malformed = |cur: &Cursor<'_>, why: &str| -> Diagnostics {
        cur.error_at("malformed-endpoint", format!("malformed endpoint: {why}"), pos).into()
    };
    let Some((host, _)) = cur.adjacent_run(':') else {
        return Err(malformed(cur, "missing host"));
    };
    if !host.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_')) {
        return Err(malformed(cur, &format!("invalid host `{host}`")));
    }
    if !cur.eat_punct(':') {
        return Err(malformed(cur, "expected `host:port`"));
    }
    let TokenKind::Number(digits) = cur.peek().kind.clone() else {
        return Err(malformed(cur, "missing port"));
    };
    cur.bump();
    match digits.parse::<u32>() {
        Ok(port @ 1..=65535) => Ok((host, port as u16)),
        _ => Err(malformed(cur, &format!("port `{digits}` is not in 1..65535"))),
    }
}

/// Canonical deployment text.
pub fn print_ddsl(model: &DeploymentModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "deployment {}\n{{", model.name);
    for (i, n) in model.nodes.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        let _ = writeln!(out, "\tnode {}\n\t{{", n.id);
        let _ = writeln!(out, "\t\tcomponent {};", quote(&n.component));
        if let Some(exe) = &n.executable {
            let _ = writeln!(out, "\t\texecutable {};", quote(exe));
        }
        let _ = writeln!(out, "\t\tendpoint {}:{};", n.host, n.port);
        if let Some(cfg) = &n.config {
            let _ = writeln!(out, "\t\tconfig {};", quote(cfg));
        }
        for p in &n.providers {
            let _ = writeln!(out, "\t\tprovider {} = {};", p.interface, p.node);
        }
        out.push_str("\t};\n");
    }
    out.push_str("};\n");
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Requires,
    Topic,
}

/// `from` needs `to`: a required interface, or a subscribed topic that `to`
/// publishes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub interface: String,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: String,
    pub component: String,
    pub host: String,
    pub port: u16,
}

/// Nodes sorted by id and edges sorted lexicographically, so that equal
/// deployments give equal graphs regardless of declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DependencyGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("unknown node {0}")]
    UnknownNode(String),
    #[error("requires cycle among {}", .0.join(", "))]
    Cycle(Vec<String>),
}

impl DependencyGraph {
    pub fn node(&self, id: &str) -> Option<&GraphNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    fn requires(&self) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(|e| e.kind == EdgeKind::Requires)
    }

    /// Nodes `id` requires directly.
    pub fn providers_of(&self, id: &str) -> BTreeSet<&str> {
        self.requires().filter(|e| e.from == id).map(|e| e.to.as_str()).collect()
    }

    /// Nodes that require `id` directly.
    pub fn dependents_of(&self, id: &str) -> BTreeSet<&str> {
        self.requires().filter(|e| e.to == id).map(|e| e.from.as_str()).collect()
    }

    fn check_known(&self, id: &str) -> Result<(), GraphError> {
        if self.node(id).is_some() {
            Ok(())
        } else {
            Err(GraphError::UnknownNode(id.to_string()))
        }
    }

    fn closure<'a>(&'a self, start: &'a str, next: impl Fn(&'a str) -> BTreeSet<&'a str>) -> BTreeSet<&'a str> {
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(n) = stack.pop() {
            for m in next(n) {
                if seen.insert(m) {
                    stack.push(m);
                }
            }
        }
        seen
    }

    /// Kahn's algorithm over `set`, where `blockers(n)` must all be emitted
    /// before `n`; ready nodes are taken in ascending id order.
    fn ordered<'a>(
        &'a self,
        set: &BTreeSet<&'a str>,
        blockers: impl Fn(&'a str) -> BTreeSet<&'a str>,
    ) -> Result<Vec<String>, GraphError> {
        let mut pending: BTreeMap<&str, BTreeSet<&str>> = set
            .iter()
            .map(|n| (*n, blockers(n).into_iter().filter(|b| set.contains(b) && b != n).collect()))
            .collect();
        let mut out = Vec::with_capacity(set.len());
        while !pending.is_empty() {
            let Some(next) = pending.iter().find(|(_, b)| b.is_empty()).map(|(n, _)| *n) else {
                return Err(GraphError::Cycle(pending.keys().map(|s| s.to_string()).collect()));
            };
            pending.remove(next);
            for b in pending.values_mut() {
                b.remove(next);
            }
            out.push(next.to_string());
        }
        Ok(out)
    }

    /// The `requires` closure of `target`, dependencies first and `target`
    /// last, ties broken by ascending node id. Topic edges are ignored.
    pub fn start_order(&self, target: &str) -> Result<Vec<String>, GraphError> {
        self.check_known(target)?;
        let set = self.closure(target, |n| self.providers_of(n));
        self.ordered(&set, |n| self.providers_of(n))
    }

    /// Every node, dependencies first.
    pub fn full_start_order(&self) -> Result<Vec<String>, GraphError> {
        let set = self.nodes.iter().map(|n| n.id.as_str()).collect();
        self.ordered(&set, |n| self.providers_of(n))
    }

    /// `target` and everything that transitively requires it, each node
    /// before the nodes it requires. This is the order for a cascading stop.
    pub fn stop_order(&self, target: &str) -> Result<Vec<String>, GraphError> {
        self.check_known(target)?;
        let set = self.closure(target, |n| self.dependents_of(n));
        self.ordered(&set, |n| self.dependents_of(n))
    }

    /// Every node, dependents first.
    pub fn full_stop_order(&self) -> Result<Vec<String>, GraphError> {
        let set = self.nodes.iter().map(|n| n.id.as_str()).collect();
        self.ordered(&set, |n| self.dependents_of(n))
    }

    /// Strongly connected components of the `requires` edges with more than
    /// one node, each sorted by id.
    pub fn cycles(&self) -> Vec<Vec<String>> {
        let ids: Vec<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let mut adj = vec![Vec::new(); ids.len()];
        for e in self.requires() {
            if let (Some(&a), Some(&b)) = (index.get(e.from.as_str()), index.get(e.to.as_str())) {
                adj[a].push(b);
            }
        }
        let mut sccs: Vec<Vec<String>> = tarjan(&adj)
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| {
                let mut names: Vec<String> = c.into_iter().map(|i| ids[i].to_string()).collect();
                names.sort();
                names
            })
            .collect();
        sccs.sort();
        sccs
    }
}

fn tarjan(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        adj: &'a [Vec<usize>],
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        next: usize,
        out: Vec<Vec<usize>>,
    }
    fn visit(s: &mut State<'_>, v: usize) {
        s.index[v] = Some(s.next);
        s.low[v] = s.next;
        s.next += 1;
        s.stack.push(v);
        s.on_stack[v] = true;
        for &w in &s.adj[v] {
            match s.index[w] {
                None => {
                    visit(s, w);
                    s.low[v] = s.low[v].min(s.low[w]);
                }
                Some(iw) if s.on_stack[w] => s.low[v] = s.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(s.low[v]) == s.index[v] {
            let mut comp = Vec::new();
            while let Some(w) = s.stack.pop() {
                s.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            s.out.push(comp);
        }
    }
    let n = adj.len();
    let mut s = State {
        adj,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        next: 0,
        out: Vec::new(),
    };
    for v in 0..n {
        if s.index[v].is_none() {
            visit(&mut s, v);
        }
    }
    s.out
}

/// A successfully built graph plus the non-fatal findings.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphBuild {
    pub graph: DependencyGraph,
    pub warnings: Vec<Diagnostic>,
}

/// Loads every node's component and derives the edges from the components'
/// requires/implements and subscribesTo/publishes lists.
pub fn build_graph(
    deployment: &DeploymentModel,
    base_dir: &Path,
    loader: &dyn ComponentLoader,
) -> Result<GraphBuild, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut components: BTreeMap<&str, Arc<LoadedComponent>> = BTreeMap::new();
    for n in &deployment.nodes {
        match loader.load_component(&n.component, base_dir) {
            Ok(c) => {
                components.insert(n.id.as_str(), c);
            }
            Err(errs) => {
                diags.push(
                    Diagnostic::error("component-load-failed", format!("cannot load component {}", n.component))
                        .at(&deployment.origin, n.pos)
                        .for_node(&n.id),
                );
                diags.extend(errs.into_iter().map(|d| d.for_node(&n.id)));
            }
        }
    }
    let (graph, graph_diags) = derive_graph(deployment, &components);
    diags.extend(graph_diags);
    let warnings = diags.iter().filter(|d| !d.is_error()).cloned().collect();
    diags.into_result(GraphBuild { graph, warnings })
}

/// Edge derivation over already-loaded components. Nodes whose component
/// failed to load still appear as graph nodes but contribute no edges.
pub fn derive_graph(
    deployment: &DeploymentModel,
    components: &BTreeMap<&str, Arc<LoadedComponent>>,
) -> (DependencyGraph, Vec<Diagnostic>) {
    let origin = &deployment.origin;
    let mut diags = Vec::new();
    let names = |kind: CommKind, id: &str| -> Vec<String> {
        components
            .get(id)
            .map(|c| c.linked.model.names(kind).map(str::to_string).collect())
            .unwrap_or_default()
    };
    let offers = |kind: CommKind, id: &str, iface: &str| -> bool {
        components.get(id).is_some_and(|c| c.linked.model.names(kind).any(|n| n == iface))
    };

    let mut nodes: Vec<GraphNode> = deployment
        .nodes
        .iter()
        .map(|n| GraphNode {
            id: n.id.clone(),
            component: components.get(n.id.as_str()).map_or_else(String::new, |c| c.linked.model.name.clone()),
            host: n.host.clone(),
            port: n.port,
        })
        .collect();
    nodes.sort_by(|a, b| a.id.cmp(&b.id));
    let ids: Vec<&str> = nodes.iter().map(|n| n.id.as_str()).collect();

    let mut edges = BTreeSet::new();
    for n in &deployment.nodes {
        let required = names(CommKind::Requires, &n.id);
        for iface in &required {
            if let Some(pinned) = n.pin(iface) {
                if !ids.contains(&pinned) {
                    diags.push(
                        Diagnostic::error("invalid-pin", format!("provider {iface} = {pinned}: no node {pinned}"))
                            .at(origin, n.pos)
                            .for_node(&n.id),
                    );
                } else if !offers(CommKind::Implements, pinned, iface) {
                    diags.push(
                        Diagnostic::error(
                            "invalid-pin",
                            format!("provider {iface} = {pinned}: node {pinned} does not implement {iface}"),
                        )
                        .at(origin, n.pos)
                        .for_node(&n.id),
                    );
                } else if pinned != n.id {
                    edges.insert(Edge {
                        from: n.id.clone(),
                        to: pinned.to_string(),
                        interface: iface.clone(),
                        kind: EdgeKind::Requires,
                    });
                }
                continue;
            }
            let providers: Vec<&str> = ids.iter().copied().filter(|id| offers(CommKind::Implements, id, iface)).collect();
            match providers.as_slice() {
                [] => diags.push(
                    Diagnostic::error(
                        "unresolved-requirement",
                        format!("no node implements required interface {iface}"),
                    )
                    .at(origin, n.pos)
                    .for_node(&n.id),
                ),
                [only] if *only == n.id => {}
                [only] => {
                    edges.insert(Edge {
                        from: n.id.clone(),
                        to: only.to_string(),
                        interface: iface.clone(),
                        kind: EdgeKind::Requires,
                    });
                }
                many => diags.push(
                    Diagnostic::error(
                        "ambiguous-provider",
                        format!(
                            "required interface {iface} is implemented by nodes {}; pin one with `provider {iface} = <node>;`",
                            many.join(", ")
                        ),
                    )
                    .at(origin, n.pos)
                    .for_node(&n.id),
                ),
            }
        }
        for pin in &n.providers {
            if !required.contains(&pin.interface) {
                diags.push(
                    Diagnostic::warning("unused-pin", format!("node does not require {}", pin.interface))
                        .at(origin, pin.pos)
                        .for_node(&n.id),
                );
            }
        }
        for topic in names(CommKind::SubscribesTo, &n.id) {
            let publishers: Vec<&str> = ids
                .iter()
                .copied()
                .filter(|id| *id != n.id && offers(CommKind::Publishes, id, &topic))
                .collect();
            if publishers.is_empty() {
                diags.push(
                    Diagnostic::warning("no-publisher", format!("no node publishes subscribed topic {topic}"))
                        .at(origin, n.pos)
                        .for_node(&n.id),
                );
            }
            for p in publishers {
                edges.insert(Edge { from: n.id.clone(), to: p.to_string(), interface: topic.clone(), kind: EdgeKind::Topic });
            }
        }
    }

    let graph = DependencyGraph { nodes, edges: edges.into_iter().collect() };
    for cycle in graph.cycles() {
        let mut d = Diagnostic::error("requires-cycle", format!("requires cycle among nodes {}", cycle.join(", ")))
            .in_file(origin);
        d.node = cycle.first().cloned();
        diags.push(d);
    }
    (graph, diags)
}

/// Everything a static check found, plus the graph when it could be built.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentCheck {
    pub diagnostics: Vec<Diagnostic>,
    pub graph: Option<DependencyGraph>,
}

impl DeploymentCheck {
    pub fn has_errors(&self) -> bool {
        self.diagnostics.iter().any(Diagnostic::is_error)
    }
}

/// Static deployment check: component loading and linking, graph
/// construction, presence of executables and configuration files, and
/// validation of each node's configuration against the parameter schema
/// found beside its component (`<Component>.pdsl`), keyed by the
/// component name (see [`legacy_prefix`]).
pub fn check_deployment(deployment: &DeploymentModel, base_dir: &Path, loader: &dyn ComponentLoader) -> DeploymentCheck {
    let origin = &deployment.origin;
    let mut diags: Vec<Diagnostic> = deployment.check_invariants().into_vec();

    let mut components: BTreeMap<&str, Arc<LoadedComponent>> = BTreeMap::new();
    for n in &deployment.nodes {
        match loader.load_component(&n.component, base_dir) {
            Ok(c) => {
                components.insert(n.id.as_str(), c);
            }
            Err(errs) => {
                diags.push(
                    Diagnostic::error("component-load-failed", format!("cannot load component {}", n.component))
                        .at(origin, n.pos)
                        .for_node(&n.id),
                );
                diags.extend(errs.into_iter().map(|d| d.for_node(&n.id)));
            }
        }
    }
    let (graph, graph_diags) = derive_graph(deployment, &components);
    diags.extend(graph_diags);

    for n in &deployment.nodes {
        match &n.executable {
            None => diags.push(
                Diagnostic::warning("no-executable", "node declares no executable").at(origin, n.pos).for_node(&n.id),
            ),
            Some(exe) if !base_dir.join(exe).is_file() => diags.push(
                Diagnostic::warning("missing-executable", format!("executable {exe} does not exist"))
                    .at(origin, n.pos)
                    .for_node(&n.id),
            ),
            Some(_) => {}
        }
        let Some(cfg) = &n.config else { continue };
        let cfg_path = base_dir.join(cfg);
        if !cfg_path.is_file() {
            diags.push(
                Diagnostic::warning("missing-config", format!("configuration file {cfg} does not exist"))
                    .at(origin, n.pos)
                    .for_node(&n.id),
            );
            continue;
        }
        let Some(component) = components.get(n.id.as_str()) else { continue };
        diags.extend(check_node_config(component, &cfg_path).into_iter().map(|d| d.for_node(&n.id)));
    }

    let has_errors = diags.iter().any(Diagnostic::is_error);
    DeploymentCheck { diagnostics: diags, graph: (!has_errors).then_some(graph) }
}

fn check_node_config(component: &LoadedComponent, cfg_path: &Path) -> Vec<Diagnostic> {
    let schema_path = component.path.with_extension("pdsl");
    if !schema_path.is_file() {
        return Vec::new();
    }
    let read = |p: &Path| {
        std::fs::read_to_string(p).map_err(|e| {
            vec![Diagnostic::error("io", format!("cannot read {}: {e}", p.display())).in_file(&p.display().to_string())]
        })
    };
    let run = || -> Result<(), Vec<Diagnostic>> {
        let schema_text = read(&schema_path)?;
        let schema = parse_pdsl(&schema_text, &schema_path.display().to_string()).map_err(Diagnostics::into_vec)?;
        let cfg_origin = cfg_path.display().to_string();
        let legacy = parse_legacy_config_named(&read(cfg_path)?, &cfg_origin).map_err(Diagnostics::into_vec)?;
        let prefix = legacy_prefix(&schema, &component.linked.model.name, &legacy);
        bind_legacy_named(&schema, &legacy, &prefix, &cfg_origin)
            .map(|_| ())
            .map_err(Diagnostics::into_vec)
    };
    run().err().unwrap_or_default()
}

fn dot_id(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn state_color(state: &str) -> &'static str {
    match state {
        "running" => "palegreen",
        "starting" => "gold",
        "failed" => "tomato",
        _ => "lightgray",
    }
}

/// GraphViz rendering: nodes labeled `id\ncomponent`, requires edges solid,
/// topic edges dashed. When `states` is given each node also shows and is
/// colored by its state.
pub fn graph_to_dot(name: &str, graph: &DependencyGraph, states: Option<&BTreeMap<String, String>>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "digraph {} {{", dot_id(name));
    out.push_str("  rankdir=LR;\n  node [shape=box];\n");
    for n in &graph.nodes {
        let state = states.and_then(|s| s.get(&n.id));
        match state {
            Some(st) => {
                let _ = writeln!(
                    out,
                    "  {} [label=\"{}\\n{}\\n[{st}]\", style=filled, fillcolor={}];",
                    dot_id(&n.id),
                    n.id,
                    n.component,
                    state_color(st)
                );
            }
            None => {
                let _ = writeln!(out, "  {} [label=\"{}\\n{}\"];", dot_id(&n.id), n.id, n.component);
            }
        }
    }
    for e in &graph.edges {
        let style = match e.kind {
            EdgeKind::Requires => "solid",
            EdgeKind::Topic => "dashed",
        };
        let _ = writeln!(
            out,
            "  {} -> {} [label={}, style={style}];",
            dot_id(&e.from),
            dot_id(&e.to),
            dot_id(&e.interface)
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJsonNode {
    pub id: String,
    pub component: String,
    pub host: String,
    pub port: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub nodes: Vec<GraphJsonNode>,
    pub edges: Vec<Edge>,
}

pub fn graph_to_json(graph: &DependencyGraph, states: Option<&BTreeMap<String, String>>) -> GraphJson {
    GraphJson {
        nodes: graph
            .nodes
            .iter()
            .map(|n| GraphJsonNode {
                id: n.id.clone(),
                component: n.component.clone(),
                host: n.host.clone(),
                port: n.port,
                state: states.and_then(|s| s.get(&n.id).cloned()),
            })
            .collect(),
        edges: graph.edges.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DEMO: &str = r#"deployment Demo {
        node speech { component "SpeechComp.cdsl"; executable "bin/speech"; endpoint 127.0.0.1:10001; config "speech.conf"; };
        node mouth { component "MouthComp.cdsl"; executable "bin/mouth"; endpoint 127.0.0.1:10002; };
        node jointmotor { component "JointMotorComp.cdsl"; endpoint localhost:10067; };
    };"#;

    fn graph(nodes: &[&str], edges: &[(&str, &str)]) -> DependencyGraph {
        let mut nodes: Vec<GraphNode> = nodes
            .iter()
            .map(|id| GraphNode { id: id.to_string(), component: id.to_uppercase(), host: "h".into(), port: 1 })
            .collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        let mut edges: Vec<Edge> = edges
            .iter()
            .map(|(a, b)| Edge { from: a.to_string(), to: b.to_string(), interface: "I".into(), kind: EdgeKind::Requires })
            .collect();
        edges.sort();
        DependencyGraph { nodes, edges }
    }

    /// Every ordering of `nodes` that respects the edges, by enumeration.
    fn all_topological_orders(g: &DependencyGraph, nodes: &[&str]) -> Vec<Vec<String>> {
        fn permute(items: &mut Vec<String>, k: usize, out: &mut Vec<Vec<String>>) {
            if k == items.len() {
                out.push(items.clone());
                return;
            }
            for i in k..items.len() {
                items.swap(k, i);
                permute(items, k + 1, out);
                items.swap(k, i);
            }
        }
        let mut all = Vec::new();
        permute(&mut nodes.iter().map(|s| s.to_string()).collect(), 0, &mut all);
        all.retain(|order| {
            g.edges.iter().all(|e| {
                let (Some(u), Some(v)) = (order.iter().position(|n| *n == e.from), order.iter().position(|n| *n == e.to))
                else {
                    return true;
                };
                v < u
            })
        });
        all
    }

    #[test]
    fn parses_case_study_deployment() {
        let d = parse_ddsl(DEMO, "demo.ddsl").unwrap();
        assert_eq!(d.nodes.len(), 3);
        assert_eq!(d.nodes[0].endpoint(), "127.0.0.1:10001");
        assert_eq!(d.nodes[2].host, "localhost");
        assert_eq!(d.nodes[2].executable, None);
        assert_eq!(d.nodes[0].config.as_deref(), Some("speech.conf"));
    }

    #[test]
    fn empty_deployment() {
        assert!(parse_ddsl("deployment D { };", "d").unwrap().nodes.is_empty());
    }

    #[test]
    fn duplicate_endpoint() {
        let err = parse_ddsl(
            r#"deployment D { node a { component "A.cdsl"; endpoint 127.0.0.1:10067; };
                node b { component "B.cdsl"; endpoint 127.0.0.1:10067; }; };"#,
            "d",
        )
        .unwrap_err();
        assert_eq!(err.len(), 1);
        assert_eq!(err.0[0].code, "duplicate-endpoint");
    }

    #[test]
    fn parse_errors() {
        let code = |src: &str| parse_ddsl(src, "d").unwrap_err().0[0].code.clone();
        assert_eq!(
            code(r#"deployment D { node a { component "A"; endpoint h:1; }; node a { component "B"; endpoint h:2; }; };"#),
            "duplicate-node"
        );
        assert_eq!(code(r#"deployment D { node a { component "A"; endpoint h:70000; }; };"#), "malformed-endpoint");
        assert_eq!(code(r#"deployment D { node a { component "A"; endpoint h:0; }; };"#), "malformed-endpoint");
        assert_eq!(code(r#"deployment D { node a { component "A"; endpoint :80; }; };"#), "malformed-endpoint");
        assert_eq!(code(r#"deployment D { node a { component "A"; }; };"#), "missing-field");
        assert_eq!(
            code(r#"deployment D { node a { component "A"; component "B"; endpoint h:1; }; };"#),
            "duplicate-field"
        );
        assert_eq!(code(r#"deployment D { node a { component "A"; endpoint h:1; color red; }; };"#), "syntax");
    }

    #[test]
    fn hostnames_with_dashes_and_dots() {
        let d = parse_ddsl(r#"deployment D { node a { component "A"; endpoint robot-1.lab.local:9000; }; };"#, "d").unwrap();
        assert_eq!(d.nodes[0].host, "robot-1.lab.local");
        assert_eq!(d.nodes[0].port, 9000);
    }

    #[test]
    fn print_is_canonical() {
        let d = parse_ddsl(DEMO, "demo.ddsl").unwrap();
        let printed = print_ddsl(&d);
        assert!(printed.starts_with("deployment Demo\n{\n\tnode speech\n\t{\n\t\tcomponent \"SpeechComp.cdsl\";\n"));
        assert_eq!(parse_ddsl(&printed, "demo.ddsl").unwrap(), d);
        assert_eq!(print_ddsl(&parse_ddsl(&printed, "x").unwrap()), printed);
    }

    #[test]
    fn start_order_chain() {
        let g = graph(&["speech", "mouth", "jointmotor"], &[("speech", "mouth"), ("mouth", "jointmotor")]);
        assert_eq!(g.start_order("speech").unwrap(), ["jointmotor", "mouth", "speech"]);
        assert_eq!(g.start_order("jointmotor").unwrap(), ["jointmotor"]);
        assert_eq!(g.stop_order("jointmotor").unwrap(), ["speech", "mouth", "jointmotor"]);
        assert_eq!(g.start_order("nope"), Err(GraphError::UnknownNode("nope".into())));
    }

    #[test]
    fn diamond_order_is_the_smallest_valid_topological_order() {
        let g = graph(&["A", "B", "C", "D"], &[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]);
        let order = g.start_order("A").unwrap();
        // Dependencies first means a valid order reversed against the edges;
        // enumerate all of them and take the one the tie-break rule selects.
        let valid = all_topological_orders(&g, &["A", "B", "C", "D"]);
        assert!(valid.contains(&order));
        assert_eq!(valid.len(), 2);
        assert_eq!(order, ["D", "B", "C", "A"]);
    }

    #[test]
    fn topic_edges_do_not_constrain_order() {
        let mut g = graph(&["a", "b"], &[]);
        g.edges.push(Edge { from: "a".into(), to: "b".into(), interface: "T".into(), kind: EdgeKind::Topic });
        assert_eq!(g.start_order("a").unwrap(), ["a"]);
    }

    #[test]
    fn cycles_are_found() {
        let g = graph(&["A", "B", "C"], &[("A", "B"), ("B", "A"), ("C", "A")]);
        assert_eq!(g.cycles(), vec![vec!["A".to_string(), "B".to_string()]]);
    }

    #[test]
    fn dot_and_json_export() {
        let g = graph(&["speech", "mouth"], &[("speech", "mouth")]);
        let dot = graph_to_dot("Demo", &g, None);
        assert!(dot.contains("\"speech\" [label=\"speech\\nSPEECH\"];"));
        assert!(dot.contains("\"speech\" -> \"mouth\" [label=\"I\", style=solid];"));
        let empty = graph_to_dot("E", &DependencyGraph::default(), None);
        assert_eq!(empty, "digraph \"E\" {\n  rankdir=LR;\n  node [shape=box];\n}\n");
        let json = serde_json::to_string(&graph_to_json(&g, None)).unwrap();
        let back: GraphJson = serde_json::from_str(&json).unwrap();
        assert_eq!(back.edges, g.edges);
    }
}
