//! Model-to-text generation of component skeletons.
//!
//! A component is split into generic files, owned by the generator and
//! rewritten on every run, and specific files, owned by the programmer and
//! written only when absent. The split is per file.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::Write as _;
use std::path::{Component, Path, PathBuf};

use serde::Serialize;

use crate::cdsl::{CommKind, InterfaceRef, Language, LinkedComponent};
use crate::idsl::{BasicType, Declaration, Direction, Field, IdslModule, InterfaceDef, MethodDef, TypeRef};
use crate::pdsl::{Literal, ParamSpec, ParamType, ParameterSchema, Range};

/// First-line marker of every generic file, without comment syntax.
pub const BANNER: &str = "GENERATED — regenerated on every build; do not edit";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FileKind {
    Generic,
    Specific,
}

impl fmt::Display for FileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FileKind::Generic => "generic",
            FileKind::Specific => "specific",
        })
    }
}

/// Logical outputs a backend must be able to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Artifact {
    MainEntry,
    GenericWorker,
    SpecificWorker,
    ServantStub,
    ProxySetup,
    Publisher,
    Subscriber,
    ConfigAccessor,
    BuildManifest,
    Metadata,
    InterfaceDecls,
}

impl Artifact {
    pub const ALL: [Artifact; 11] = [
        Artifact::MainEntry,
        Artifact::GenericWorker,
        Artifact::SpecificWorker,
        Artifact::ServantStub,
        Artifact::ProxySetup,
        Artifact::Publisher,
        Artifact::Subscriber,
        Artifact::ConfigAccessor,
        Artifact::BuildManifest,
        Artifact::Metadata,
        Artifact::InterfaceDecls,
    ];
}

impl fmt::Display for Artifact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedFile {
    pub rel_path: String,
    pub content: String,
    pub kind: FileKind,
    pub artifact: Artifact,
    /// Interface or module the file was generated for, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GeneratedFileSet {
    pub component_name: String,
    pub files: Vec<GeneratedFile>,
}

impl GeneratedFileSet {
    pub fn file(&self, rel_path: &str) -> Option<&GeneratedFile> {
        self.files.iter().find(|f| f.rel_path == rel_path)
    }

    pub fn of_artifact(&self, artifact: Artifact) -> impl Iterator<Item = &GeneratedFile> {
        self.files.iter().filter(move |f| f.artifact == artifact)
    }

    pub fn of_kind(&self, kind: FileKind) -> impl Iterator<Item = &GeneratedFile> {
        self.files.iter().filter(move |f| f.kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodegenError {
    #[error("no code generation backend for language {0}")]
    NoBackend(Language),
    #[error("backend {backend} has no template for artifact {artifact}")]
    MissingArtifact { backend: Language, artifact: Artifact },
    #[error("component language is {component} but backend is {backend}")]
    LanguageMismatch { component: Language, backend: Language },
    #[error("interface {0} is not linked to a definition")]
    Unlinked(String),
}

/// What a template sees. `interface` is set for per-interface artifacts,
/// `module` for interface declarations.
pub struct TemplateInput<'a> {
    pub component: Option<&'a LinkedComponent>,
    pub schema: Option<&'a ParameterSchema>,
    pub interface: Option<(&'a IdslModule, &'a InterfaceDef)>,
    pub module: Option<&'a IdslModule>,
}

/// A rendered file before kind and artifact are attached.
pub struct Rendered {
    pub rel_path: String,
    pub content: String,
}

pub type Template = fn(&TemplateInput<'_>) -> Vec<Rendered>;

#[derive(Clone)]
pub struct Backend {
    pub language: Language,
    templates: BTreeMap<Artifact, Template>,
}

impl fmt::Debug for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Backend")
            .field("language", &self.language)
            .field("artifacts", &self.templates.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Backend {
    pub fn new(language: Language) -> Self {
        Backend { language, templates: BTreeMap::new() }
    }

    pub fn for_language(language: Language) -> Result<Self, CodegenError> {
        match language {
            Language::Cpp => Ok(cpp::backend()),
            Language::Python => Err(CodegenError::NoBackend(language)),
        }
    }

    pub fn with(mut self, artifact: Artifact, template: Template) -> Self {
        self.templates.insert(artifact, template);
        self
    }

    pub fn without(mut self, artifact: Artifact) -> Self {
        self.templates.remove(&artifact);
        self
    }

    pub fn covers(&self, artifact: Artifact) -> bool {
        self.templates.contains_key(&artifact)
    }

    fn render(&self, artifact: Artifact, input: &TemplateInput<'_>) -> Result<Vec<Rendered>, CodegenError> {
        let template = self
            .templates
            .get(&artifact)
            .ok_or(CodegenError::MissingArtifact { backend: self.language, artifact })?;
        Ok(template(input))
    }
}

/// Name of the specific-worker method a servant or subscriber delegates to.
pub fn hook_name(interface: &str, method: &str) -> String {
    format!("{interface}_{method}")
}

fn linked<'a>(
    component: &'a LinkedComponent,
    r: &InterfaceRef,
) -> Result<(&'a IdslModule, &'a InterfaceDef), CodegenError> {
    component.interface(r).ok_or_else(|| CodegenError::Unlinked(r.name.clone()))
}

/// Generates the full file set of one component.
pub fn generate_component(
    component: &LinkedComponent,
    schema: Option<&ParameterSchema>,
    backend: &Backend,
) -> Result<GeneratedFileSet, CodegenError> {
    let model = &component.model;
    if model.language != backend.language {
        return Err(CodegenError::LanguageMismatch { component: model.language, backend: backend.language });
    }
    if let Some(artifact) = Artifact::ALL.into_iter().find(|a| !backend.covers(*a)) {
        return Err(CodegenError::MissingArtifact { backend: backend.language, artifact });
    }
    for kind in CommKind::ALL {
        for r in model.comm(kind) {
            linked(component, r)?;
        }
    }

    let mut files = Vec::new();
    let base = TemplateInput { component: Some(component), schema, interface: None, module: None };
    let mut emit = |artifact: Artifact, kind: FileKind, subject: Option<&str>, rendered: Vec<Rendered>| {
        files.extend(rendered.into_iter().map(|r| GeneratedFile {
            rel_path: r.rel_path,
            content: r.content,
            kind,
            artifact,
            subject: subject.map(str::to_string),
        }));
    };

    for artifact in [Artifact::MainEntry, Artifact::GenericWorker, Artifact::ConfigAccessor, Artifact::BuildManifest, Artifact::Metadata] {
        emit(artifact, FileKind::Generic, None, backend.render(artifact, &base)?);
    }
    emit(Artifact::SpecificWorker, FileKind::Specific, None, backend.render(Artifact::SpecificWorker, &base)?);

    let per_interface = [
        (CommKind::Implements, Artifact::ServantStub),
        (CommKind::Requires, Artifact::ProxySetup),
        (CommKind::Publishes, Artifact::Publisher),
        (CommKind::SubscribesTo, Artifact::Subscriber),
    ];
    for (kind, artifact) in per_interface {
        for r in model.comm(kind) {
            let input = TemplateInput { interface: Some(linked(component, r)?), ..base };
            emit(artifact, FileKind::Generic, Some(&r.name), backend.render(artifact, &input)?);
        }
    }
    for m in &component.modules {
        let input = TemplateInput { module: Some(&m.module), ..base };
        let rendered = backend.render(Artifact::InterfaceDecls, &input)?;
        emit(
            Artifact::InterfaceDecls,
            FileKind::Generic,
            Some(&m.module.name),
            rendered
                .into_iter()
                .map(|r| Rendered { rel_path: format!("src/generated/{}", r.rel_path), content: r.content })
                .collect(),
        );
    }

    let mut seen = BTreeSet::new();
    files.retain(|f| seen.insert(f.rel_path.clone()));
    files.sort_by(|a, b| a.rel_path.cmp(&b.rel_path));
    Ok(GeneratedFileSet { component_name: model.name.clone(), files })
}

/// Declarations of one IDSL module: types plus abstract operation
/// signatures. All files are generic.
pub fn generate_interface_artifacts(module: &IdslModule, backend: &Backend) -> Result<GeneratedFileSet, CodegenError> {
    let input = TemplateInput { component: None, schema: None, interface: None, module: Some(module) };
    let files = backend
        .render(Artifact::InterfaceDecls, &input)?
        .into_iter()
        .map(|r| GeneratedFile {
            rel_path: r.rel_path,
            content: r.content,
            kind: FileKind::Generic,
            artifact: Artifact::InterfaceDecls,
            subject: Some(module.name.clone()),
        })
        .collect();
    Ok(GeneratedFileSet { component_name: module.name.clone(), files })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WriteAction {
    Created,
    Overwritten,
    Preserved,
    /// A stale generated file no longer part of the set.
    Removed,
    Failed,
}

impl fmt::Display for WriteAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WriteAction::Created => "created",
            WriteAction::Overwritten => "overwritten",
            WriteAction::Preserved => "preserved",
            WriteAction::Removed => "removed",
            WriteAction::Failed => "failed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WriteEntry {
    pub path: String,
    pub kind: FileKind,
    pub action: WriteAction,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct WriteReport {
    pub entries: Vec<WriteEntry>,
}

impl WriteReport {
    pub fn action(&self, path: &str) -> Option<WriteAction> {
        self.entries.iter().find(|e| e.path == path).map(|e| e.action)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
    /// Everything done before the failure, with the failing file marked.
    pub report: WriteReport,
}

fn safe_rel_path(rel: &str) -> Option<PathBuf> {
    let p = Path::new(rel);
    p.components().all(|c| matches!(c, Component::Normal(_))).then(|| p.to_path_buf())
}

fn atomic_write(path: &Path, content: &str) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(content.as_bytes())?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn is_generated(path: &Path) -> bool {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| t.lines().next().map(|l| l.contains(BANNER)))
        .unwrap_or(false)
}

fn files_under(dir: &Path, out: &mut Vec<PathBuf>) {
    let Ok(rd) = std::fs::read_dir(dir) else { return };
    for entry in rd.flatten() {
        let p = entry.path();
        if p.is_dir() {
            files_under(&p, out);
        } else {
            out.push(p);
        }
    }
}

/// Writes `set` below `out_dir`: generic files always, specific files only
/// when absent. Generated files under `src/generated/` that are no longer
/// part of the set are removed; files without the banner are left alone.
pub fn write_fileset(set: &GeneratedFileSet, out_dir: &Path) -> Result<WriteReport, WriteError> {
    let mut report = WriteReport::default();
    let fail = |report: &mut WriteReport, path: &str, kind: FileKind, source: std::io::Error| {
        report.entries.push(WriteEntry { path: path.to_string(), kind, action: WriteAction::Failed });
        WriteError { path: path.to_string(), source, report: report.clone() }
    };
    for f in &set.files {
        let Some(rel) = safe_rel_path(&f.rel_path) else {
            let err = std::io::Error::new(std::io::ErrorKind::InvalidInput, "path escapes the output directory");
            return Err(fail(&mut report, &f.rel_path, f.kind, err));
        };
        let target = out_dir.join(rel);
        let exists = target.exists();
        let action = match (f.kind, exists) {
            (FileKind::Specific, true) => WriteAction::Preserved,
            (_, false) => WriteAction::Created,
            (FileKind::Generic, true) => WriteAction::Overwritten,
        };
        if action != WriteAction::Preserved {
            if let Err(e) = atomic_write(&target, &f.content) {
                return Err(fail(&mut report, &f.rel_path, f.kind, e));
            }
        }
        report.entries.push(WriteEntry { path: f.rel_path.clone(), kind: f.kind, action });
    }

    let wanted: BTreeSet<PathBuf> = set.files.iter().map(|f| out_dir.join(&f.rel_path)).collect();
    let mut existing = Vec::new();
    files_under(&out_dir.join("src/generated"), &mut existing);
    existing.sort();
    for p in existing {
        if wanted.contains(&p) || !is_generated(&p) {
            continue;
        }
        let rel = p.strip_prefix(out_dir).unwrap_or(&p).to_string_lossy().replace('\\', "/");
        if let Err(e) = std::fs::remove_file(&p) {
            return Err(fail(&mut report, &rel, FileKind::Generic, e));
        }
        report.entries.push(WriteEntry { path: rel, kind: FileKind::Generic, action: WriteAction::Removed });
    }
    Ok(report)
}

/// The C++ reference backend.
pub mod cpp {
    use super::*;

    pub fn backend() -> Backend {
        Backend::new(Language::Cpp)
            .with(Artifact::MainEntry, main_entry)
            .with(Artifact::GenericWorker, generic_worker)
            .with(Artifact::SpecificWorker, specific_worker)
            .with(Artifact::ServantStub, servant)
            .with(Artifact::ProxySetup, proxy)
            .with(Artifact::Publisher, publisher)
            .with(Artifact::Subscriber, subscriber)
            .with(Artifact::ConfigAccessor, config)
            .with(Artifact::BuildManifest, build_manifest)
            .with(Artifact::Metadata, metadata)
            .with(Artifact::InterfaceDecls, interface_decls)
    }

    fn banner() -> String {
        format!("// {BANNER}\n")
    }

    fn one(rel_path: String, content: String) -> Vec<Rendered> {
        vec![Rendered { rel_path, content }]
    }

    fn component<'a>(input: &TemplateInput<'a>) -> &'a LinkedComponent {
        input.component.expect("component template without component")
    }

    fn iface<'a>(input: &TemplateInput<'a>) -> (&'a IdslModule, &'a InterfaceDef) {
        input.interface.expect("interface template without interface")
    }

    fn basic(b: BasicType) -> &'static str {
        match b {
            BasicType::Bool => "bool",
            BasicType::Byte => "std::uint8_t",
            BasicType::Short => "std::int16_t",
            BasicType::Int => "std::int32_t",
            BasicType::Long => "std::int64_t",
            BasicType::Float => "float",
            BasicType::Double => "double",
            BasicType::String => "std::string",
        }
    }

    /// Type as seen from outside the module's namespace.
    fn qualified(module: &str, ty: &TypeRef) -> String {
        match ty {
            TypeRef::Basic(b) => basic(*b).to_string(),
            TypeRef::Named(n) => format!("{module}::{}", n.name),
        }
    }

    fn local(ty: &TypeRef) -> String {
        match ty {
            TypeRef::Basic(b) => basic(*b).to_string(),
            TypeRef::Named(n) => n.name.clone(),
        }
    }

    fn param_list(module: Option<&str>, m: &MethodDef) -> String {
        m.params
            .iter()
            .map(|p| {
                let ty = module.map_or_else(|| local(&p.ty), |md| qualified(md, &p.ty));
                match (p.direction, &p.ty) {
                    (Direction::Out, _) => format!("{ty}& {}", p.name),
                    (Direction::In, TypeRef::Basic(b)) if *b != BasicType::String => format!("{ty} {}", p.name),
                    (Direction::In, _) => format!("const {ty}& {}", p.name),
                }
            })
            .collect::<Vec<_>>()
            .join(", ")
    }

    fn arg_list(m: &MethodDef) -> String {
        m.params.iter().map(|p| p.name.as_str()).collect::<Vec<_>>().join(", ")
    }

    fn returns(module: Option<&str>, m: &MethodDef) -> String {
        match &m.returns {
            None => "void".to_string(),
            Some(t) => module.map_or_else(|| local(t), |md| qualified(md, t)),
        }
    }

    fn hooks(c: &LinkedComponent) -> Vec<(String, &IdslModule, &MethodDef)> {
        let mut out = Vec::new();
        for r in c.model.implements.iter().chain(&c.model.subscribes_to) {
            if let Some((module, def)) = c.interface(r) {
                for m in &def.methods {
                    out.push((hook_name(&def.name, &m.name), module, m));
                }
            }
        }
        out
    }

    fn snake(name: &str) -> String {
        let mut out = String::new();
        for (i, ch) in name.chars().enumerate() {
            if ch.is_ascii_uppercase() {
                if i > 0 {
                    out.push('_');
                }
                out.push(ch.to_ascii_lowercase());
            } else {
                out.push(ch);
            }
        }
        out
    }

    fn cpp_string(s: &str) -> String {
        let mut out = String::from("\"");
        for ch in s.chars() {
            match ch {
                '"' => out.push_str("\\\""),
                '\\' => out.push_str("\\\\"),
                '\n' => out.push_str("\\n"),
                '\t' => out.push_str("\\t"),
                c => out.push(c),
            }
        }
        out.push('"');
        out
    }

    fn main_entry(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let m = &c.model;
        let mut s = banner();
        s.push_str("#include <csignal>\n#include <cstdio>\n#include <exception>\n\n#include \"../specificworker.h\"\n\n");
        s.push_str("namespace component_info {\n");
        let _ = writeln!(s, "constexpr const char* name = {};", cpp_string(&m.name));
        let _ = writeln!(s, "constexpr const char* language = {};", cpp_string(m.language.tag()));
        match &m.statemachine {
            Some(sm) => {
                let _ = writeln!(s, "constexpr const char* statemachine = {};", cpp_string(sm));
            }
            None => s.push_str("constexpr const char* statemachine = nullptr;\n"),
        }
        match &m.gui {
            Some(g) => {
                let _ = writeln!(
                    s,
                    "constexpr const char* gui_toolkit = {};\nconstexpr const char* gui_widget = {};",
                    cpp_string(&g.toolkit),
                    cpp_string(&g.widget)
                );
            }
            None => s.push_str("constexpr const char* gui_toolkit = nullptr;\nconstexpr const char* gui_widget = nullptr;\n"),
        }
        s.push_str("}  // namespace component_info\n\n");
        s.push_str(
            "namespace {\nvolatile std::sig_atomic_t stop_requested = 0;\nvoid on_signal(int) { stop_requested = 1; }\n}  // namespace\n\n",
        );
        s.push_str("int main(int argc, char** argv)\n{\n");
        s.push_str("\tif (argc < 2) {\n");
        let _ = writeln!(s, "\t\tstd::fprintf(stderr, \"usage: %s <config file>\\n\", argv[0]);");
        s.push_str("\t\treturn 2;\n\t}\n");
        s.push_str("\tstd::signal(SIGINT, on_signal);\n\tstd::signal(SIGTERM, on_signal);\n");
        s.push_str("\ttry {\n\t\tauto config = Config::load(argv[1]);\n\t\tSpecificWorker worker(config);\n");
        s.push_str("\t\tworker.connect_proxies();\n\t\tworker.start_servants();\n");
        s.push_str("\t\twhile (!stop_requested) {\n\t\t\tworker.step();\n\t\t}\n\t\tworker.shutdown();\n");
        s.push_str("\t} catch (const std::exception& e) {\n");
        let _ = writeln!(s, "\t\tstd::fprintf(stderr, \"%s: %s\\n\", component_info::name, e.what());");
        s.push_str("\t\treturn 1;\n\t}\n\treturn 0;\n}\n");
        one("src/generated/main.cpp".into(), s)
    }

    fn generic_worker(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let m = &c.model;
        let mut s = banner();
        s.push_str("#pragma once\n\n#include <atomic>\n#include <chrono>\n#include <memory>\n#include <string>\n#include <thread>\n\n");
        s.push_str("#include \"config.h\"\n");
        for r in &m.requires {
            let _ = writeln!(s, "#include \"proxies/{}Proxy.h\"", r.name);
        }
        for r in &m.publishes {
            let _ = writeln!(s, "#include \"topics/{}Publisher.h\"", r.name);
        }
        for r in &m.implements {
            let _ = writeln!(s, "#include \"servants/{}Servant.h\"", r.name);
        }
        for r in &m.subscribes_to {
            let _ = writeln!(s, "#include \"topics/{}Subscriber.h\"", r.name);
        }
        s.push_str("\nclass GenericWorker\n{\npublic:\n");
        s.push_str("\texplicit GenericWorker(const Config& config) : config_(config) {}\n");
        s.push_str("\tvirtual ~GenericWorker() = default;\n\n");
        s.push_str("\t// Called in a loop by main until a stop signal arrives.\n");
        s.push_str("\tvirtual void compute() {}\n\n");
        s.push_str("\tvoid step()\n\t{\n\t\tcompute();\n\t\tstd::this_thread::sleep_for(std::chrono::milliseconds(config_.period_ms()));\n\t}\n\n");
        s.push_str("\t// Liveness as reported to supervisors.\n\tvirtual bool healthy() const { return alive_; }\n\n");
        s.push_str("\tvoid connect_proxies()\n\t{\n");
        for r in &m.requires {
            let _ = writeln!(s, "\t\t{} = make_{}Proxy(config_);", proxy_member(&r.name), r.name);
        }
        for r in &m.publishes {
            let _ = writeln!(s, "\t\t{} = make_{}Publisher(config_);", publisher_member(&r.name), r.name);
        }
        s.push_str("\t}\n\n\tvoid start_servants();\n");
        s.push_str("\tvoid shutdown() { alive_ = false; }\n");
        let hooks = hooks(c);
        if !hooks.is_empty() {
            s.push_str("\n\t// Hooks implemented by SpecificWorker.\n");
        }
        for (name, module, method) in &hooks {
            let _ = writeln!(
                s,
                "\tvirtual {} {name}({}) {{ throw std::logic_error(\"{name} not implemented\"); }}",
                returns(Some(&module.name), method),
                param_list(Some(&module.name), method)
            );
        }
        s.push_str("\nprotected:\n\tConfig config_;\n\tstd::atomic<bool> alive_{true};\n");
        for r in &m.requires {
            let _ = writeln!(s, "\tstd::shared_ptr<{0}Proxy> {1};", r.name, proxy_member(&r.name));
        }
        for r in &m.publishes {
            let _ = writeln!(s, "\tstd::shared_ptr<{0}Publisher> {1};", r.name, publisher_member(&r.name));
        }
        s.push_str("};\n\ninline void GenericWorker::start_servants()\n{\n");
        for r in &m.implements {
            let _ = writeln!(
                s,
                "\tserve(std::make_shared<{0}Servant>(this), config_.endpoint({1}));",
                r.name,
                cpp_string(&format!("{}.Endpoints", m.name))
            );
        }
        for r in &m.subscribes_to {
            let _ = writeln!(s, "\tsubscribe(std::make_shared<{0}Subscriber>(this), {1});", r.name, cpp_string(&r.name));
        }
        s.push_str("}\n");
        one("src/generated/genericworker.h".into(), s)
    }

    fn proxy_member(iface: &str) -> String {
        format!("{}_proxy", snake(iface))
    }

    fn publisher_member(iface: &str) -> String {
        format!("{}_publisher", snake(iface))
    }

    fn specific_worker(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let hooks = hooks(c);
        let mut h = String::from("#pragma once\n\n#include \"generated/genericworker.h\"\n\n");
        h.push_str("class SpecificWorker : public GenericWorker\n{\npublic:\n");
        h.push_str("\texplicit SpecificWorker(const Config& config);\n\n\tvoid compute() override;\n");
        for (name, module, method) in &hooks {
            let _ = writeln!(
                h,
                "\t{} {name}({}) override;",
                returns(Some(&module.name), method),
                param_list(Some(&module.name), method)
            );
        }
        h.push_str("};\n");

        let mut cpp = String::from("#include \"specificworker.h\"\n\n");
        cpp.push_str("SpecificWorker::SpecificWorker(const Config& config) : GenericWorker(config) {}\n\n");
        cpp.push_str("void SpecificWorker::compute()\n{\n}\n");
        for (name, module, method) in &hooks {
            let ret = returns(Some(&module.name), method);
            let _ = write!(
                cpp,
                "\n{ret} SpecificWorker::{name}({})\n{{\n",
                param_list(Some(&module.name), method)
            );
            if method.returns.is_some() {
                let _ = writeln!(cpp, "\treturn {ret}{{}};");
            }
            cpp.push_str("}\n");
        }
        vec![
            Rendered { rel_path: "src/specificworker.h".into(), content: h },
            Rendered { rel_path: "src/specificworker.cpp".into(), content: cpp },
        ]
    }

    fn servant(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let (module, def) = iface(input);
        let mut s = banner();
        let _ = writeln!(s, "#pragma once\n\n#include \"../interfaces/{}.h\"\n", module.name);
        s.push_str("class GenericWorker;\n\n");
        let _ = writeln!(s, "class {0}Servant : public {1}::{0}\n{{\npublic:", def.name, module.name);
        let _ = writeln!(s, "\texplicit {}Servant(GenericWorker* worker) : worker_(worker) {{}}", def.name);
        for m in &def.methods {
            let _ = writeln!(
                s,
                "\t{} {}({}) override;",
                returns(Some(&module.name), m),
                m.name,
                param_list(Some(&module.name), m)
            );
        }
        s.push_str("\nprivate:\n\tGenericWorker* worker_;\n};\n");
        if !def.methods.is_empty() {
            s.push_str("\n#include \"../genericworker.h\"\n");
        }
        for m in &def.methods {
            let _ = write!(
                s,
                "\ninline {} {}Servant::{}({})\n{{\n\t{}worker_->{}({});\n}}\n",
                returns(Some(&module.name), m),
                def.name,
                m.name,
                param_list(Some(&module.name), m),
                if m.returns.is_some() { "return " } else { "" },
                hook_name(&def.name, &m.name),
                arg_list(m)
            );
        }
        one(format!("src/generated/servants/{}Servant.h", def.name), s)
    }

    fn proxy(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let (module, def) = iface(input);
        let key = format!("{}.{}Proxy", c.model.name, def.name);
        let mut s = banner();
        s.push_str("#pragma once\n\n#include <memory>\n#include <string>\n\n");
        s.push_str("// a) proxy class definition\n");
        let _ = writeln!(s, "#include \"../interfaces/{}.h\"\n#include \"../config.h\"\n#include \"../runtime.h\"\n", module.name);
        let _ = writeln!(s, "class {0}Proxy : public {1}::{0}\n{{\npublic:", def.name, module.name);
        let _ = writeln!(s, "\texplicit {}Proxy(const std::string& endpoint) : channel_(endpoint) {{}}", def.name);
        for m in &def.methods {
            let ret = returns(Some(&module.name), m);
            let args = arg_list(m);
            let _ = writeln!(
                s,
                "\t{ret} {}({}) override {{ {}channel_.invoke<{ret}>({}{}{args}); }}",
                m.name,
                param_list(Some(&module.name), m),
                if m.returns.is_some() { "return " } else { "" },
                cpp_string(&m.name),
                if args.is_empty() { "" } else { ", " }
            );
        }
        s.push_str("\nprivate:\n\truntime::Channel channel_;\n};\n\n");
        let _ = writeln!(s, "inline std::shared_ptr<{0}Proxy> make_{0}Proxy(const Config& config)\n{{", def.name);
        s.push_str("\t// b) read from the configuration file how to reach the remote component\n");
        let _ = writeln!(s, "\tconst std::string endpoint = config.endpoint({});", cpp_string(&key));
        s.push_str("\t// c) create the proxy object\n");
        let _ = writeln!(s, "\tauto proxy = std::make_shared<{}Proxy>(endpoint);", def.name);
        s.push_str("\t// d) hand it to the worker, which stores it for the specific code\n\treturn proxy;\n}\n");
        one(format!("src/generated/proxies/{}Proxy.h", def.name), s)
    }

    fn publisher(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let (module, def) = iface(input);
        let mut s = banner();
        let _ = writeln!(
            s,
            "#pragma once\n\n#include <memory>\n\n#include \"../interfaces/{}.h\"\n#include \"../config.h\"\n#include \"../runtime.h\"\n",
            module.name
        );
        let _ = writeln!(s, "class {0}Publisher : public {1}::{0}\n{{\npublic:", def.name, module.name);
        let _ = writeln!(s, "\texplicit {}Publisher(runtime::Topic topic) : topic_(std::move(topic)) {{}}", def.name);
        for m in &def.methods {
            let args = arg_list(m);
            let _ = writeln!(
                s,
                "\t{} {}({}) override {{ topic_.publish({}{}{args}); }}",
                returns(Some(&module.name), m),
                m.name,
                param_list(Some(&module.name), m),
                cpp_string(&m.name),
                if args.is_empty() { "" } else { ", " }
            );
        }
        s.push_str("\nprivate:\n\truntime::Topic topic_;\n};\n\n");
        let _ = writeln!(s, "inline std::shared_ptr<{0}Publisher> make_{0}Publisher(const Config& config)\n{{", def.name);
        let _ = writeln!(
            s,
            "\treturn std::make_shared<{}Publisher>(runtime::Topic(config.endpoint({}), {}));\n}}",
            def.name,
            cpp_string(&format!("{}.{}Topic", c.model.name, def.name)),
            cpp_string(&def.name)
        );
        one(format!("src/generated/topics/{}Publisher.h", def.name), s)
    }

    fn subscriber(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let (module, def) = iface(input);
        let mut s = banner();
        let _ = writeln!(s, "#pragma once\n\n#include \"../interfaces/{}.h\"\n\nclass GenericWorker;\n", module.name);
        let _ = writeln!(s, "class {0}Subscriber : public {1}::{0}\n{{\npublic:", def.name, module.name);
        let _ = writeln!(s, "\texplicit {}Subscriber(GenericWorker* worker) : worker_(worker) {{}}", def.name);
        for m in &def.methods {
            let _ = writeln!(
                s,
                "\t{} {}({}) override;",
                returns(Some(&module.name), m),
                m.name,
                param_list(Some(&module.name), m)
            );
        }
        s.push_str("\nprivate:\n\tGenericWorker* worker_;\n};\n");
        if !def.methods.is_empty() {
            s.push_str("\n#include \"../genericworker.h\"\n");
        }
        for m in &def.methods {
            let _ = write!(
                s,
                "\ninline {} {}Subscriber::{}({})\n{{\n\t{}worker_->{}({});\n}}\n",
                returns(Some(&module.name), m),
                def.name,
                m.name,
                param_list(Some(&module.name), m),
                if m.returns.is_some() { "return " } else { "" },
                hook_name(&def.name, &m.name),
                arg_list(m)
            );
        }
        one(format!("src/generated/topics/{}Subscriber.h", def.name), s)
    }

    fn param_cpp_type(p: &ParamSpec) -> String {
        param_type(&p.name, &p.ty)
    }

    fn param_type(name: &str, ty: &ParamType) -> String {
        match ty {
            ParamType::Int => "std::int64_t".into(),
            ParamType::Float => "double".into(),
            ParamType::Bool => "bool".into(),
            ParamType::String => "std::string".into(),
            ParamType::Enum(_) => format!("{name}Value"),
            ParamType::List(elem) => format!("std::vector<{}>", param_type(name, elem)),
            ParamType::Struct(s) => s.clone(),
        }
    }

    fn literal(name: &str, ty: &ParamType, lit: &Literal) -> String {
        match (ty, lit) {
            (ParamType::Float, Literal::Int(i)) => format!("{i}.0"),
            (ParamType::Float, Literal::Float(x)) => format!("{x:?}"),
            (_, Literal::Int(i)) => format!("{i}"),
            (_, Literal::Float(x)) => format!("{x:?}"),
            (_, Literal::Bool(b)) => b.to_string(),
            (_, Literal::Str(s)) => format!("std::string({})", cpp_string(s)),
            (_, Literal::Ident(id)) => format!("{name}Value::{id}"),
            (ParamType::List(elem), Literal::List(items)) => {
                let items: Vec<String> = items.iter().map(|i| literal(name, elem, i)).collect();
                format!("{}{{{}}}", param_type(name, ty), items.join(", "))
            }
            (_, Literal::List(items) | Literal::Tuple(items)) => {
                let items: Vec<String> = items.iter().map(|i| literal(name, &ParamType::String, i)).collect();
                format!("{}{{{}}}", param_type(name, ty), items.join(", "))
            }
        }
    }

    fn struct_literal(schema: &ParameterSchema, name: &str, ty: &ParamType, lit: &Literal) -> String {
        match (ty, lit) {
            (ParamType::Struct(s), Literal::Tuple(items)) => {
                let fields = schema.struct_def(s).map(|d| d.fields.as_slice()).unwrap_or_default();
                let parts: Vec<String> = fields
                    .iter()
                    .zip(items)
                    .map(|(f, l)| struct_literal(schema, &f.name, &f.ty, l))
                    .collect();
                format!("{s}{{{}}}", parts.join(", "))
            }
            (ParamType::List(elem), Literal::List(items)) => {
                let parts: Vec<String> = items.iter().map(|l| struct_literal(schema, name, elem, l)).collect();
                format!("{}{{{}}}", param_type(name, ty), parts.join(", "))
            }
            _ => literal(name, ty, lit),
        }
    }

    /// C++ condition that is true when `v` violates `range`.
    fn range_violation(name: &str, ty: &ParamType, range: &Range) -> String {
        match range {
            Range::Interval(lo, hi) => {
                format!("v < {} || v > {}", literal(name, ty, lo), literal(name, ty, hi))
            }
            Range::Set(items) => {
                let eqs: Vec<String> = items.iter().map(|l| format!("v != {}", literal(name, ty, l))).collect();
                eqs.join(" && ")
            }
        }
    }

    fn parse_expr(name: &str, ty: &ParamType, raw: &str) -> String {
        match ty {
            ParamType::Int => format!("runtime::to_int({raw})"),
            ParamType::Float => format!("runtime::to_float({raw})"),
            ParamType::Bool => format!("runtime::to_bool({raw})"),
            ParamType::String => format!("runtime::trim({raw})"),
            ParamType::Enum(_) => format!("parse_{name}Value({raw})"),
            ParamType::Struct(s) => format!("parse_{s}({raw})"),
            ParamType::List(elem) => parse_expr(name, elem, raw),
        }
    }

    fn config(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let name = &c.model.name;
        let mut s = banner();
        s.push_str("#pragma once\n\n#include <cstdint>\n#include <stdexcept>\n#include <string>\n#include <vector>\n\n#include \"runtime.h\"\n\n");
        let empty;
        let schema = match input.schema {
            Some(sch) => sch,
            None => {
                empty = ParameterSchema {
                    name: String::new(),
                    origin: String::new(),
                    structs: Vec::new(),
                    params: Vec::new(),
                    pos: Default::default(),
                };
                &empty
            }
        };

        for p in &schema.params {
            if let ParamType::Enum(lits) = innermost(&p.ty) {
                let _ = writeln!(s, "enum class {}Value {{ {} }};\n", p.name, lits.join(", "));
                let _ = writeln!(s, "inline {0}Value parse_{0}Value(const std::string& raw)\n{{", p.name);
                s.push_str("\tconst std::string v = runtime::trim(raw);\n");
                for l in lits {
                    let _ = writeln!(s, "\tif (v == {}) return {}Value::{l};", cpp_string(l), p.name);
                }
                let _ = writeln!(
                    s,
                    "\tthrow std::invalid_argument(\"{}: unknown literal \" + v);\n}}\n",
                    p.name
                );
            }
        }
        for st in &schema.structs {
            let _ = writeln!(s, "struct {}\n{{", st.name);
            for f in &st.fields {
                let _ = writeln!(s, "\t{} {};", param_type(&f.name, &f.ty), f.name);
            }
            s.push_str("};\n\n");
        }
        for st in &schema.structs {
            let _ = writeln!(s, "inline {0} parse_{0}(const std::string& raw)\n{{", st.name);
            let _ = writeln!(
                s,
                "\tconst auto parts = runtime::split(raw, ',');\n\tif (parts.size() != {}) throw std::invalid_argument(\"{}: expected {} fields\");",
                st.fields.len(),
                st.name,
                st.fields.len()
            );
            let _ = writeln!(s, "\t{} out;", st.name);
            for (i, f) in st.fields.iter().enumerate() {
                let _ = writeln!(s, "\tout.{} = {};", f.name, parse_expr(&f.name, &f.ty, &format!("parts[{i}]")));
            }
            s.push_str("\treturn out;\n}\n\n");
        }

        s.push_str("class Config\n{\npublic:\n");
        s.push_str("\tstatic Config load(const std::string& path)\n\t{\n");
        s.push_str("\t\tConfig c;\n\t\tc.file_ = runtime::LegacyFile::read(path);\n");
        let _ = writeln!(s, "\t\tc.prefix_ = {};", cpp_string(name));
        if let Some(short) = name.strip_suffix("Comp").filter(|s| !s.is_empty() && !schema.params.is_empty()) {
            let probes: Vec<String> = schema
                .params
                .iter()
                .map(|p| {
                    let suffix = if matches!(p.ty, ParamType::List(_)) { "0" } else { "" };
                    format!("c.file_.has(p + \".{}{suffix}\")", p.legacy_name())
                })
                .collect();
            let _ = writeln!(s, "\t\tconst auto binds = [&](const std::string& p) {{ return {}; }};", probes.join(" || "));
            let _ = writeln!(s, "\t\tif (!binds(c.prefix_) && binds({0})) c.prefix_ = {0};", cpp_string(short));
        }
        for p in &schema.params {
            let key = format!("c.prefix_ + \".{}\"", p.legacy_name());
            match &p.ty {
                ParamType::List(_) => {
                    let _ = writeln!(
                        s,
                        "\t\tif (c.file_.has({key} + \"0\")) {{\n\t\t\t{} items;\n\t\t\tfor (std::size_t i = 0; c.file_.has({key} + std::to_string(i)); ++i)\n\t\t\t\titems.push_back({});\n\t\t\tc.set_{}(items);\n\t\t}}",
                        param_cpp_type(p),
                        parse_expr(&p.name, &p.ty, &format!("c.file_.raw({key} + std::to_string(i))")),
                        p.name
                    );
                }
                _ => {
                    let _ = writeln!(
                        s,
                        "\t\tif (c.file_.has({key})) c.set_{}({});",
                        p.name,
                        parse_expr(&p.name, &p.ty, &format!("c.file_.raw({key})"))
                    );
                }
            }
            if p.default.is_none() && !p.optional {
                let _ = writeln!(
                    s,
                    "\t\telse if (!c.file_.has({key}{})) throw std::runtime_error(\"missing parameter {}\");",
                    if matches!(p.ty, ParamType::List(_)) { " + \"0\"" } else { "" },
                    p.legacy_name()
                );
            }
        }
        s.push_str("\t\treturn c;\n\t}\n\n");
        s.push_str("\t// Endpoint strings are read verbatim, e.g. `Comp.MouthProxy = tcp -h host -p 10000`.\n");
        s.push_str("\tstd::string endpoint(const std::string& key) const { return file_.has(key) ? file_.raw(key) : std::string(); }\n\n");
        s.push_str("\tint period_ms() const { return 100; }\n");

        for p in &schema.params {
            let ty = param_cpp_type(p);
            let _ = writeln!(s, "\n\t// {} {}{}", p.ty, p.name, p.range.as_ref().map(|r| format!(" in {r}")).unwrap_or_default());
            let _ = writeln!(s, "\tconst {ty}& get_{0}() const {{ return {0}_; }}", p.name);
            match (&p.range, &p.ty) {
                (Some(range), ParamType::List(elem)) => {
                    let _ = writeln!(
                        s,
                        "\tvoid set_{0}(const {ty}& values)\n\t{{\n\t\tfor (const auto& v : values)\n\t\t\tif ({1}) throw std::out_of_range(\"{0} outside {2}\");\n\t\t{0}_ = values;\n\t}}",
                        p.name,
                        range_violation(&p.name, elem, range),
                        range
                    );
                }
                (Some(range), _) => {
                    let _ = writeln!(
                        s,
                        "\tvoid set_{0}(const {ty}& v)\n\t{{\n\t\tif ({1}) throw std::out_of_range(\"{0} outside {2}\");\n\t\t{0}_ = v;\n\t}}",
                        p.name,
                        range_violation(&p.name, &p.ty, range),
                        range
                    );
                }
                (None, _) => {
                    let _ = writeln!(s, "\tvoid set_{0}(const {ty}& v) {{ {0}_ = v; }}", p.name);
                }
            }
        }

        s.push_str("\nprivate:\n\truntime::LegacyFile file_;\n\tstd::string prefix_;\n");
        for p in &schema.params {
            let init = p
                .default
                .as_ref()
                .map(|d| format!(" = {}", struct_literal(schema, &p.name, &p.ty, d)))
                .unwrap_or_else(|| "{}".into());
            let _ = writeln!(s, "\t{} {}_{init};", param_cpp_type(p), p.name);
        }
        s.push_str("};\n");
        vec![Rendered { rel_path: "src/generated/config.h".into(), content: s }, runtime()]
    }

    fn innermost(ty: &ParamType) -> &ParamType {
        match ty {
            ParamType::List(elem) => innermost(elem),
            t => t,
        }
    }

    /// Support code shared by the other generic files: legacy file reading
    /// and a middleware-neutral channel.
    fn runtime() -> Rendered {
        let mut s = banner();
        s.push_str(
            r#"#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace runtime {

inline std::string trim(const std::string& s)
{
	const auto b = s.find_first_not_of(" \t\r\n");
	if (b == std::string::npos) return {};
	const auto e = s.find_last_not_of(" \t\r\n");
	return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep)
{
	std::vector<std::string> out;
	std::string::size_type start = 0;
	for (;;) {
		const auto at = s.find(sep, start);
		out.push_back(trim(s.substr(start, at == std::string::npos ? std::string::npos : at - start)));
		if (at == std::string::npos) return out;
		start = at + 1;
	}
}

inline std::int64_t to_int(const std::string& s) { return std::stoll(trim(s)); }
inline double to_float(const std::string& s) { return std::stod(trim(s)); }

inline bool to_bool(const std::string& s)
{
	const auto v = trim(s);
	if (v == "true") return true;
	if (v == "false") return false;
	throw std::invalid_argument("not a bool: " + v);
}

// Flat `key = value` file; `#` starts a comment line.
class LegacyFile
{
public:
	static LegacyFile read(const std::string& path)
	{
		std::ifstream in(path);
		if (!in) throw std::runtime_error("cannot open " + path);
		LegacyFile f;
		std::string line;
		while (std::getline(in, line)) {
			const auto t = trim(line);
			if (t.empty() || t[0] == '#') continue;
			const auto eq = t.find('=');
			if (eq == std::string::npos) throw std::runtime_error("line has no '=': " + t);
			f.entries_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
		}
		return f;
	}

	bool has(const std::string& key) const { return entries_.count(key) != 0; }
	const std::string& raw(const std::string& key) const { return entries_.at(key); }

private:
	std::map<std::string, std::string> entries_;
};

// Transport binding is supplied by the middleware adapter at link time.
class Channel
{
public:
	explicit Channel(std::string endpoint) : endpoint_(std::move(endpoint)) {}
	template <typename R, typename... Args>
	R invoke(const char* method, const Args&... args);
	const std::string& endpoint() const { return endpoint_; }

private:
	std::string endpoint_;
};

class Topic
{
public:
	Topic(std::string endpoint, std::string name) : endpoint_(std::move(endpoint)), name_(std::move(name)) {}
	template <typename... Args>
	void publish(const char* method, const Args&... args);

private:
	std::string endpoint_;
	std::string name_;
};

}  // namespace runtime

template <typename Servant>
void serve(std::shared_ptr<Servant> servant, const std::string& endpoint);

template <typename Subscriber>
void subscribe(std::shared_ptr<Subscriber> subscriber, const std::string& topic);
"#,
        );
        Rendered { rel_path: "src/generated/runtime.h".into(), content: s }
    }

    fn build_manifest(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let c = component(input);
        let m = &c.model;
        let mut s = format!("# {BANNER}\n");
        s.push_str("cmake_minimum_required(VERSION 3.16)\n");
        let _ = writeln!(s, "project({} CXX)\n", m.name);
        s.push_str("set(CMAKE_CXX_STANDARD 17)\nset(CMAKE_CXX_STANDARD_REQUIRED ON)\n\n");
        let _ = writeln!(
            s,
            "add_executable({0}\n\t${{CMAKE_CURRENT_SOURCE_DIR}}/main.cpp\n\t${{CMAKE_CURRENT_SOURCE_DIR}}/../specificworker.cpp\n)",
            m.name
        );
        let _ = writeln!(
            s,
            "target_include_directories({} PRIVATE ${{CMAKE_CURRENT_SOURCE_DIR}} ${{CMAKE_CURRENT_SOURCE_DIR}}/..)",
            m.name
        );
        if !m.classes.is_empty() {
            let _ = writeln!(s, "\nset(COMPONENT_CLASSES {})", m.classes.join(" "));
            s.push_str("foreach(cls IN LISTS COMPONENT_CLASSES)\n\tstring(TOLOWER ${cls} file)\n");
            let _ = writeln!(
                s,
                "\tif(EXISTS ${{CMAKE_CURRENT_SOURCE_DIR}}/../${{file}}.cpp)\n\t\ttarget_sources({} PRIVATE ${{CMAKE_CURRENT_SOURCE_DIR}}/../${{file}}.cpp)\n\tendif()\nendforeach()",
                m.name
            );
        }
        if !m.libs.is_empty() {
            s.push('\n');
            for lib in &m.libs {
                let _ = writeln!(s, "find_package({lib} QUIET)");
            }
            let _ = writeln!(s, "target_link_libraries({} PRIVATE {})", m.name, m.libs.join(" "));
        }
        one("src/generated/CMakeLists.txt".into(), s)
    }

    #[derive(Serialize)]
    struct Meta<'a> {
        #[serde(rename = "_generated")]
        generated: &'static str,
        name: &'a str,
        language: &'static str,
        implements: Vec<&'a str>,
        requires: Vec<&'a str>,
        publishes: Vec<&'a str>,
        #[serde(rename = "subscribesTo")]
        subscribes_to: Vec<&'a str>,
        params: Vec<MetaParam>,
    }

    #[derive(Serialize)]
    struct MetaParam {
        name: String,
        #[serde(rename = "type")]
        ty: String,
        #[serde(skip_serializing_if = "Option::is_none")]
        default: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        range: Option<String>,
    }

    fn metadata(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let m = &component(input).model;
        let meta = Meta {
            generated: BANNER,
            name: &m.name,
            language: m.language.tag(),
            implements: m.names(CommKind::Implements).collect(),
            requires: m.names(CommKind::Requires).collect(),
            publishes: m.names(CommKind::Publishes).collect(),
            subscribes_to: m.names(CommKind::SubscribesTo).collect(),
            params: input
                .schema
                .map(|s| {
                    s.params
                        .iter()
                        .map(|p| MetaParam {
                            name: p.name.clone(),
                            ty: p.ty.to_string(),
                            default: p.default.as_ref().map(ToString::to_string),
                            range: p.range.as_ref().map(ToString::to_string),
                        })
                        .collect()
                })
                .unwrap_or_default(),
        };
        let mut text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
        text.push('\n');
        one("component.meta.json".into(), text)
    }

    fn fields(out: &mut String, fields: &[Field]) {
        for f in fields {
            let _ = writeln!(out, "\t{} {};", local(&f.ty), f.name);
        }
    }

    /// Data declarations ordered so that each comes after the types it
    /// embeds by value, then interfaces in source order.
    fn declaration_order(module: &IdslModule) -> Vec<&Declaration> {
        fn visit<'a>(module: &'a IdslModule, d: &'a Declaration, done: &mut BTreeSet<&'a str>, out: &mut Vec<&'a Declaration>) {
            if !done.insert(d.name()) {
                return;
            }
            let deps: Vec<&TypeRef> = match d {
                Declaration::Struct { fields, .. } | Declaration::Exception { fields, .. } => fields.iter().map(|f| &f.ty).collect(),
                Declaration::Sequence { element, .. } => vec![element],
                Declaration::Map { key, value, .. } => vec![key, value],
                _ => Vec::new(),
            };
            for t in deps {
                if let TypeRef::Named(n) = t {
                    if let Some(dep) = module.declaration(&n.name) {
                        visit(module, dep, done, out);
                    }
                }
            }
            out.push(d);
        }
        let mut done = BTreeSet::new();
        let mut out = Vec::new();
        for d in module.declarations.iter().filter(|d| !matches!(d, Declaration::Interface(_))) {
            visit(module, d, &mut done, &mut out);
        }
        out.extend(module.declarations.iter().filter(|d| matches!(d, Declaration::Interface(_))));
        out
    }

    fn interface_decls(input: &TemplateInput<'_>) -> Vec<Rendered> {
        let module = input.module.expect("interface declarations without module");
        let mut s = banner();
        s.push_str("#pragma once\n\n#include <cstdint>\n#include <exception>\n#include <map>\n#include <string>\n#include <vector>\n\n");
        let _ = writeln!(s, "namespace {} {{", module.name);
        for d in declaration_order(module) {
            s.push('\n');
            match d {
                Declaration::Enum { name, literals, .. } => {
                    let _ = writeln!(s, "enum class {name} {{ {} }};", literals.join(", "));
                }
                Declaration::Struct { name, fields: fs, .. } => {
                    let _ = writeln!(s, "struct {name}\n{{");
                    fields(&mut s, fs);
                    s.push_str("};\n");
                }
                Declaration::Exception { name, fields: fs, .. } => {
                    let _ = writeln!(s, "struct {name} : public std::exception\n{{");
                    fields(&mut s, fs);
                    let _ = writeln!(s, "\tconst char* what() const noexcept override {{ return \"{name}\"; }}");
                    s.push_str("};\n");
                }
                Declaration::Sequence { name, element, .. } => {
                    let _ = writeln!(s, "using {name} = std::vector<{}>;", local(element));
                }
                Declaration::Map { name, key, value, .. } => {
                    let _ = writeln!(s, "using {name} = std::map<{}, {}>;", local(key), local(value));
                }
                Declaration::Interface(def) => {
                    let _ = writeln!(s, "class {}\n{{\npublic:\n\tvirtual ~{}() = default;", def.name, def.name);
                    for m in &def.methods {
                        if !m.throws.is_empty() {
                            let _ = writeln!(s, "\t// throws {}", m.throws.join(", "));
                        }
                        let _ = writeln!(s, "\tvirtual {} {}({}) = 0;", returns(None, m), m.name, param_list(None, m));
                    }
                    s.push_str("};\n");
                }
            }
        }
        let _ = writeln!(s, "\n}}  // namespace {}", module.name);
        one(format!("interfaces/{}.h", module.name), s)
    }
}
