//! The `compdsl` command line.
//!
//! Exit codes: 0 when everything succeeded, 1 when at least one error
//! diagnostic was produced, 2 for usage errors. With `--json` exactly one
//! JSON document is written to standard output, failures included.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use compdsl_core::cdsl::Language;
use compdsl_core::codegen::{generate_component, write_fileset, Backend};
use compdsl_core::ddsl::{check_deployment, parse_ddsl, DeploymentModel};
use compdsl_core::idsl::{parse_idsl, resolve_idsl};
use compdsl_core::pdsl::{bind_legacy_named, legacy_prefix, parse_legacy_config_named, parse_pdsl, ParameterSchema};
use compdsl_core::{ComponentLoader, Diagnostic, Diagnostics, Workspace};
use compdsl_orchestrator::api::{self, ApiState};
use compdsl_orchestrator::{load_session, persist, DeploymentSession, SessionError, Supervisor, Timing};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DIAGNOSTICS: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "compdsl", version, about = "Component DSL toolchain")]
struct Cli {
    /// Print one JSON document instead of human-readable text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Parse and check a DSL file, chosen by extension unless --kind is given.
    Check {
        file: PathBuf,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Generate a component skeleton.
    Gen {
        cdsl: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Parameter schema; defaults to `<stem>.pdsl` beside the CDSL file.
        #[arg(long)]
        schema: Option<PathBuf>,
        /// Target language tag; defaults to the component's language.
        #[arg(long)]
        backend: Option<String>,
    },
    #[command(subcommand)]
    Config(ConfigCmd),
    #[command(subcommand)]
    Deploy(DeployCmd),
    /// Run a deployment under supervision and serve the HTTP API.
    Serve {
        ddsl: PathBuf,
        #[arg(long, default_value = "127.0.0.1:7878")]
        listen: String,
        /// Directory scanned by `GET /api/components`; defaults to the
        /// deployment's directory.
        #[arg(long)]
        components: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum ConfigCmd {
    /// Bind a legacy `key = value` file against a schema.
    Validate {
        schema: PathBuf,
        conf: PathBuf,
        #[arg(long)]
        prefix: Option<String>,
    },
}

#[derive(Subcommand, Debug)]
enum DeployCmd {
    /// Check a deployment and print its start order.
    Plan {
        ddsl: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Start a node with its dependencies, or every node.
    Up {
        ddsl: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Stop a node, or every node.
    Down {
        ddsl: PathBuf,
        #[arg(long)]
        target: Option<String>,
        /// Stop running dependents first instead of refusing.
        #[arg(long)]
        cascade: bool,
    },
    Status {
        ddsl: PathBuf,
        #[arg(long)]
        target: Option<String>,
    },
    /// Export the dependency graph.
    Graph {
        ddsl: PathBuf,
        #[arg(long, value_enum, default_value = "dot")]
        format: GraphFormat,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Idsl,
    Cdsl,
    Pdsl,
    Ddsl,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GraphFormat {
    Dot,
    Json,
}

/// What a command produced: diagnostics go to stderr, the rest to stdout.
struct Outcome {
    diagnostics: Vec<Diagnostic>,
    result: Value,
    text: String,
}

impl Outcome {
    fn new(result: Value, text: impl Into<String>) -> Self {
        Outcome { diagnostics: Vec::new(), result, text: text.into() }
    }

    fn failed(diagnostics: Vec<Diagnostic>) -> Self {
        Outcome { diagnostics, result: Value::Null, text: String::new() }
    }

    fn with(mut self, diags: impl IntoIterator<Item = Diagnostic>) -> Self {
        self.diagnostics.extend(diags);
        self
    }

    fn exit_code(&self) -> i32 {
        if self.diagnostics.iter().any(Diagnostic::is_error) {
            EXIT_DIAGNOSTICS
        } else {
            EXIT_OK
        }
    }
}

struct Usage(String);

type CmdResult = Result<Outcome, Usage>;

/// Runs one invocation. `args` includes the program name.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let json_mode = args.iter().skip(1).any(|a| a == "--json");
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            if json_mode {
                let doc = if code == EXIT_OK {
                    json!({ "ok": true, "exitCode": 0, "text": e.to_string() })
                } else {
                    usage_doc(&e.kind().to_string(), &e.to_string())
                };
                let _ = writeln!(out, "{doc}");
            } else if code == EXIT_OK {
                let _ = write!(out, "{e}");
            } else {
                let _ = write!(err, "{e}");
            }
            return code;
        }
    };
    let command = command_name(&cli.cmd);
    match execute(cli.cmd) {
        Ok(outcome) => {
            let code = outcome.exit_code();
            if cli.json {
                let doc = json!({
                    "ok": code == EXIT_OK,
                    "exitCode": code,
                    "command": command,
                    "diagnostics": outcome.diagnostics,
                    "result": outcome.result,
                });
                let _ = writeln!(out, "{doc}");
            } else {
                for d in &outcome.diagnostics {
                    let _ = writeln!(err, "{d}");
                }
                if !outcome.text.is_empty() {
                    let _ = write!(out, "{}", outcome.text);
                    if !outcome.text.ends_with('\n') {
                        let _ = writeln!(out);
                    }
                }
            }
            code
        }
        Err(Usage(message)) => {
            if cli.json {
                let _ = writeln!(out, "{}", usage_doc("usage", &message));
            } else {
                let _ = writeln!(err, "error: {message}");
            }
            EXIT_USAGE
        }
    }
}

fn usage_doc(kind: &str, message: &str) -> Value {
    json!({
        "ok": false,
        "exitCode": EXIT_USAGE,
        "error": { "code": "usage", "kind": kind, "message": message.trim_end() },
    })
}

fn command_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::Check { .. } => "check",
        Cmd::Gen { .. } => "gen",
        Cmd::Config(ConfigCmd::Validate { .. }) => "config validate",
        Cmd::Deploy(DeployCmd::Plan { .. }) => "deploy plan",
        Cmd::Deploy(DeployCmd::Up { .. }) => "deploy up",
        Cmd::Deploy(DeployCmd::Down { .. }) => "deploy down",
        Cmd::Deploy(DeployCmd::Status { .. }) => "deploy status",
        Cmd::Deploy(DeployCmd::Graph { .. }) => "deploy graph",
        Cmd::Serve { .. } => "serve",
    }
}

fn execute(cmd: Cmd) -> CmdResult {
    let ws = Workspace::from_env();
    match cmd {
        Cmd::Check { file, kind } => check(&ws, &file, kind),
        Cmd::Gen { cdsl, out, schema, backend } => gen(&ws, &cdsl, &out, schema.as_deref(), backend.as_deref()),
        Cmd::Config(ConfigCmd::Validate { schema, conf, prefix }) => Ok(config_validate(&schema, &conf, prefix)),
        Cmd::Deploy(d) => deploy(ws, d),
        Cmd::Serve { ddsl, listen, components } => Ok(serve(ws, &ddsl, &listen, components)),
    }
}

fn read(path: &Path) -> Result<String, Vec<Diagnostic>> {
    std::fs::read_to_string(path).map_err(|e| {
        let origin = path.display().to_string();
        vec![Diagnostic::error("io", format!("cannot read {origin}: {e}")).in_file(&origin)]
    })
}

fn dir_of(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn kind_of(path: &Path) -> Option<Kind> {
    match path.extension()?.to_str()? {
        "idsl" => Some(Kind::Idsl),
        "cdsl" => Some(Kind::Cdsl),
        "pdsl" => Some(Kind::Pdsl),
        "ddsl" => Some(Kind::Ddsl),
        _ => None,
    }
}

fn check(ws: &Workspace, file: &Path, kind: Option<Kind>) -> CmdResult {
    let Some(kind) = kind.or_else(|| kind_of(file)) else {
        return Err(Usage(format!(
            "cannot tell the language of {} from its extension; pass --kind",
            file.display()
        )));
    };
    let origin = file.display().to_string();
    let outcome = match kind {
        Kind::Idsl => match read(file).and_then(|t| {
            parse_idsl(&t, &origin).and_then(resolve_idsl).map_err(Diagnostics::into_vec)
        }) {
            Ok(m) => {
                let n = m.declarations.len();
                Outcome::new(json!({ "kind": "idsl", "module": m.name, "declarations": n }), format!("{origin}: ok (module {}, {n} declarations)", m.name))
            }
            Err(d) => Outcome::failed(d),
        },
        Kind::Cdsl => match ws.load_component(&file.to_string_lossy(), Path::new(".")) {
            Ok(c) => {
                let name = &c.linked.model.name;
                Outcome::new(json!({ "kind": "cdsl", "component": name }), format!("{origin}: ok (component {name})"))
            }
            Err(d) => Outcome::failed(d.into_vec()),
        },
        Kind::Pdsl => match read(file).and_then(|t| parse_pdsl(&t, &origin).map_err(Diagnostics::into_vec)) {
            Ok(s) => {
                let n = s.params.len();
                Outcome::new(json!({ "kind": "pdsl", "schema": s.name, "params": n }), format!("{origin}: ok (schema {}, {n} parameters)", s.name))
            }
            Err(d) => Outcome::failed(d),
        },
        Kind::Ddsl => match load_deployment(file) {
            Ok(model) => {
                let check = check_deployment(&model, &dir_of(file), ws);
                let ok = !check.has_errors();
                let text = if ok { format!("{origin}: ok (deployment {}, {} nodes)", model.name, model.nodes.len()) } else { String::new() };
                Outcome::new(json!({ "kind": "ddsl", "deployment": model.name, "nodes": model.nodes.len() }), text)
                    .with(check.diagnostics)
            }
            Err(d) => Outcome::failed(d),
        },
    };
    Ok(outcome)
}

fn load_deployment(path: &Path) -> Result<DeploymentModel, Vec<Diagnostic>> {
    let text = read(path)?;
    parse_ddsl(&text, &path.display().to_string()).map_err(Diagnostics::into_vec)
}

fn load_schema(path: &Path) -> Result<ParameterSchema, Vec<Diagnostic>> {
    let text = read(path)?;
    parse_pdsl(&text, &path.display().to_string()).map_err(Diagnostics::into_vec)
}

fn gen(ws: &Workspace, cdsl: &Path, out: &Path, schema: Option<&Path>, backend: Option<&str>) -> CmdResult {
    let language = match backend {
        None => None,
        Some(tag) => match Language::ALL.into_iter().find(|l| l.tag() == tag) {
            Some(l) => Some(l),
            None => {
                let known: Vec<&str> = Language::ALL.iter().map(|l| l.tag()).collect();
                return Err(Usage(format!("unknown backend {tag}; expected one of {}", known.join(", "))));
            }
        },
    };
    let component = match ws.load_component(&cdsl.to_string_lossy(), Path::new(".")) {
        Ok(c) => c,
        Err(d) => return Ok(Outcome::failed(d.into_vec())),
    };
    let schema_path = schema.map(Path::to_path_buf).or_else(|| {
        let sibling = cdsl.with_extension("pdsl");
        sibling.is_file().then_some(sibling)
    });
    let schema = match schema_path.as_deref().map(load_schema).transpose() {
        Ok(s) => s,
        Err(d) => return Ok(Outcome::failed(d)),
    };
    let language = language.unwrap_or(component.linked.model.language);
    let origin = cdsl.display().to_string();
    let set = match Backend::for_language(language)
        .and_then(|b| generate_component(&component.linked, schema.as_ref(), &b))
    {
        Ok(set) => set,
        Err(e) => return Ok(Outcome::failed(vec![Diagnostic::error("codegen", e.to_string()).in_file(&origin)])),
    };
    let report = match write_fileset(&set, out) {
        Ok(r) => r,
        Err(e) => {
            let d = Diagnostic::error("io", e.to_string()).in_file(&e.path);
            let mut o = Outcome::failed(vec![d]);
            o.result = json!({ "files": e.report.entries });
            return Ok(o);
        }
    };
    let text: String = report.entries.iter().map(|e| format!("{:<11} {}\n", e.action.to_string(), e.path)).collect();
    Ok(Outcome::new(
        json!({
            "component": set.component_name,
            "language": language.tag(),
            "out": out.display().to_string(),
            "files": report.entries,
        }),
        text,
    ))
}

fn config_validate(schema_path: &Path, conf: &Path, prefix: Option<String>) -> Outcome {
    let schema = match load_schema(schema_path) {
        Ok(s) => s,
        Err(d) => return Outcome::failed(d),
    };
    let origin = conf.display().to_string();
    let legacy = match read(conf).and_then(|t| parse_legacy_config_named(&t, &origin).map_err(Diagnostics::into_vec)) {
        Ok(l) => l,
        Err(d) => return Outcome::failed(d),
    };
    // Without --prefix the component name is taken from the schema file.
    let prefix = prefix.unwrap_or_else(|| {
        let stem = schema_path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
        legacy_prefix(&schema, &stem, &legacy)
    });
    match bind_legacy_named(&schema, &legacy, &prefix, &origin) {
        Ok(instance) => {
            let text = format!("{origin}: ok ({} parameters bound under {prefix})", instance.values.len());
            Outcome::new(json!({ "prefix": prefix, "violations": 0, "values": instance.values }), text)
        }
        Err(d) => {
            let diags = d.into_vec();
            let n = diags.iter().filter(|d| d.is_error()).count();
            let mut o = Outcome::failed(diags);
            o.result = json!({ "prefix": prefix, "violations": n });
            o
        }
    }
}

fn session_diag(e: &SessionError) -> Diagnostic {
    let d = Diagnostic::error(e.code(), e.to_string());
    match e.node_id() {
        Some(n) => d.for_node(n),
        None => d,
    }
}

/// A deployment loaded for running: checked, with any saved state applied.
struct Loaded {
    session: DeploymentSession,
    warnings: Vec<Diagnostic>,
    state_path: PathBuf,
}

fn open_session(ws: &Workspace, ddsl: &Path, timing: Timing) -> Result<Loaded, Vec<Diagnostic>> {
    let model = load_deployment(ddsl)?;
    let (mut session, warnings) = load_session(model, &dir_of(ddsl), ws, timing)?;
    let state_path = persist::state_path(ddsl);
    let saved = persist::load(&state_path).map_err(|e| {
        vec![Diagnostic::error("io", format!("cannot read {}: {e}", state_path.display()))]
    })?;
    if let Some(saved) = saved {
        persist::apply(&mut session, saved);
    }
    session.log_dir = Some(persist::log_dir(ddsl));
    Ok(Loaded { session, warnings, state_path })
}

fn save(loaded: &mut Loaded) -> Option<Diagnostic> {
    let r = persist::save(&loaded.session, &loaded.state_path);
    // Running processes belong to the state file from here on.
    loaded.session.detach();
    r.err().map(|e| Diagnostic::error("io", format!("cannot write {}: {e}", loaded.state_path.display())))
}

fn status_text(session: &DeploymentSession, only: Option<&str>) -> String {
    let mut out = String::new();
    for n in session.status().nodes {
        if only.is_some_and(|t| t != n.id) {
            continue;
        }
        let pid = n.pid.map_or_else(|| "-".to_string(), |p| p.to_string());
        out.push_str(&format!("{:<16} {:<9} {:<22} pid {pid}", n.id, n.state.as_str(), format!("{}:{}", n.host, n.port)));
        if let Some(e) = &n.last_error {
            out.push_str(&format!("  ({e})"));
        }
        out.push('\n');
    }
    out
}

fn deploy(ws: Workspace, cmd: DeployCmd) -> CmdResult {
    let outcome = match cmd {
        DeployCmd::Plan { ddsl, target } => {
            let model = match load_deployment(&ddsl) {
                Ok(m) => m,
                Err(d) => return Ok(Outcome::failed(d)),
            };
            let check = check_deployment(&model, &dir_of(&ddsl), &ws);
            let Some(graph) = &check.graph else {
                return Ok(Outcome::failed(check.diagnostics));
            };
            let order = match &target {
                Some(t) if graph.node(t).is_none() => {
                    return Ok(Outcome::failed(vec![session_diag(&SessionError::UnknownNode(t.clone()))]));
                }
                Some(t) => graph.start_order(t),
                None => graph.full_start_order(),
            };
            match order {
                Ok(order) => {
                    let text = order.join(" ");
                    Outcome::new(json!({ "startOrder": order }), text).with(check.diagnostics)
                }
                Err(e) => Outcome::failed(vec![Diagnostic::error("requires-cycle", e.to_string())]),
            }
        }
        DeployCmd::Up { ddsl, target } => {
            let mut loaded = match open_session(&ws, &ddsl, Timing::default()) {
                Ok(l) => l,
                Err(d) => return Ok(Outcome::failed(d)),
            };
            let first_new = loaded.session.events().last().map_or(0, |e| e.seq);
            let r = match &target {
                Some(t) => loaded.session.start_node(t),
                None => loaded.session.start_all(),
            };
            let events: Vec<_> = loaded.session.events().iter().filter(|e| e.seq > first_new).cloned().collect();
            let status = loaded.session.status();
            let text = status_text(&loaded.session, None);
            let mut diags = std::mem::take(&mut loaded.warnings);
            let started = match r {
                Ok(s) => s,
                Err(e) => {
                    diags.push(session_diag(&e));
                    Vec::new()
                }
            };
            diags.extend(save(&mut loaded));
            Outcome::new(json!({ "started": started, "events": events, "status": status }), text).with(diags)
        }
        DeployCmd::Down { ddsl, target, cascade } => {
            let mut loaded = match open_session(&ws, &ddsl, Timing::default()) {
                Ok(l) => l,
                Err(d) => return Ok(Outcome::failed(d)),
            };
            let first_new = loaded.session.events().last().map_or(0, |e| e.seq);
            let r = match &target {
                Some(t) => loaded.session.stop_node(t, cascade),
                None => loaded.session.stop_all(),
            };
            let events: Vec<_> = loaded.session.events().iter().filter(|e| e.seq > first_new).cloned().collect();
            let status = loaded.session.status();
            let text = status_text(&loaded.session, None);
            let mut diags = Vec::new();
            let stopped = match r {
                Ok(s) => s,
                Err(e) => {
                    diags.push(session_diag(&e));
                    Vec::new()
                }
            };
            diags.extend(save(&mut loaded));
            Outcome::new(json!({ "stopped": stopped, "events": events, "status": status }), text).with(diags)
        }
        DeployCmd::Status { ddsl, target } => {
            let mut loaded = match open_session(&ws, &ddsl, Timing::default()) {
                Ok(l) => l,
                Err(d) => return Ok(Outcome::failed(d)),
            };
            if let Some(t) = &target {
                if loaded.session.runtime(t).is_none() {
                    return Ok(Outcome::failed(vec![session_diag(&SessionError::UnknownNode(t.clone()))]));
                }
            }
            let mut status = loaded.session.status();
            if let Some(t) = &target {
                status.nodes.retain(|n| &n.id == t);
            }
            let text = status_text(&loaded.session, target.as_deref());
            let diags: Vec<Diagnostic> = save(&mut loaded).into_iter().collect();
            Outcome::new(json!({ "status": status, "events": loaded.session.events() }), text).with(diags)
        }
        DeployCmd::Graph { ddsl, format } => {
            let mut loaded = match open_session(&ws, &ddsl, Timing::default()) {
                Ok(l) => l,
                Err(d) => return Ok(Outcome::failed(d)),
            };
            let tag = match format {
                GraphFormat::Dot => "dot",
                GraphFormat::Json => "json",
            };
            let text = loaded.session.export_graph(tag).expect("known format");
            loaded.session.detach();
            let result = match format {
                GraphFormat::Dot => json!({ "format": "dot", "graph": text }),
                GraphFormat::Json => json!({ "format": "json", "graph": loaded.session.graph_json() }),
            };
            Outcome::new(result, text).with(loaded.warnings)
        }
    };
    Ok(outcome)
}

fn serve(ws: Workspace, ddsl: &Path, listen: &str, components: Option<PathBuf>) -> Outcome {
    let mut loaded = match open_session(&ws, ddsl, Timing::default()) {
        Ok(l) => l,
        Err(d) => return Outcome::failed(d),
    };
    let warnings = std::mem::take(&mut loaded.warnings);
    // The server now owns whatever `deploy up` left running.
    let _ = std::fs::remove_file(&loaded.state_path);
    let loader: Arc<dyn ComponentLoader + Send + Sync> = Arc::new(ws);
    let supervisor = Arc::new(Supervisor::spawn(loaded.session, Some(ddsl.to_path_buf()), loader.clone()));
    let state = ApiState { supervisor: supervisor.clone(), loader, components_dir: components };
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => return Outcome::failed(vec![Diagnostic::error("io", e.to_string())]),
    };
    let served: std::io::Result<String> = rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(listen).await?;
        let addr = listener.local_addr()?;
        for w in &warnings {
            eprintln!("{w}");
        }
        // Announced on stderr so that stdout keeps a single result document.
        eprintln!("listening on http://{addr}");
        api::serve(listener, state, shutdown_signal()).await?;
        Ok(addr.to_string())
    });
    supervisor.shutdown();
    match served {
        Ok(addr) => Outcome::new(json!({ "listen": addr }), String::new()),
        Err(e) => Outcome::failed(vec![Diagnostic::error("io", format!("cannot serve on {listen}: {e}"))]),
    }
}

async fn shutdown_signal() {
    use tokio::signal::unix::{signal, SignalKind};
    let mut term = match signal(SignalKind::terminate()) {
        Ok(s) => s,
        Err(_) => {
            let _ = tokio::signal::ctrl_c().await;
            return;
        }
    };
    tokio::select! {
        _ = tokio::signal::ctrl_c() => {}
        _ = term.recv() => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv: Vec<&str> = std::iter::once("compdsl").chain(args.iter().copied()).collect();
        let code = run_cli(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(&[]).0, EXIT_USAGE);
        assert_eq!(run(&["frobnicate"]).0, EXIT_USAGE);
        assert_eq!(run(&["deploy", "graph", "x.ddsl", "--format", "svg"]).0, EXIT_USAGE);
    }

    #[test]
    fn usage_errors_are_json_with_flag() {
        let (code, out, _) = run(&["--json", "frobnicate"]);
        assert_eq!(code, EXIT_USAGE);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["error"]["code"], "usage");
        assert_eq!(v["exitCode"], 2);
    }

    #[test]
    fn unknown_extension_needs_kind() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("speech.txt");
        std::fs::write(&p, "module M { };").unwrap();
        let p = p.to_str().unwrap();
        assert_eq!(run(&["check", p]).0, EXIT_USAGE);
        let (code, out, _) = run(&["check", p, "--kind", "idsl"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("module M"));
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run(&["--help"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("deploy"));
    }

    #[test]
    fn unknown_backend_is_usage_error() {
        let (code, _, err) = run(&["gen", "x.cdsl", "-o", "out", "--backend", "cobol"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("cobol"));
    }
}
