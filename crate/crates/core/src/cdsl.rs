//! Component description language: what a component provides, requires,
//! publishes and subscribes to, plus build metadata.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use crate::diag::{Diagnostic, Diagnostics};
use crate::idsl::{IdslModule, InterfaceDef};
use crate::loader::{IdslLoader, ImportedModule};
use crate::source::{quote, Cursor, Pos, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    #[default]
    Cpp,
    Python,
}

impl Language {
    pub const ALL: [Language; 2] = [Language::Cpp, Language::Python];

    pub fn tag(self) -> &'static str {
        match self {
            Language::Cpp => "cpp",
            Language::Python => "python",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Language::ALL
            .into_iter()
            .find(|l| l.tag() == s)
            .ok_or_else(|| format!("unknown language tag {s}"))
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum CommKind {
    #[serde(rename = "implements")]
    Implements,
    #[serde(rename = "requires")]
    Requires,
    #[serde(rename = "publishes")]
    Publishes,
    #[serde(rename = "subscribesTo")]
    SubscribesTo,
}

impl CommKind {
    pub const ALL: [CommKind; 4] = [CommKind::Implements, CommKind::Requires, CommKind::Publishes, CommKind::SubscribesTo];

    pub fn keyword(self) -> &'static str {
        match self {
            CommKind::Implements => "implements",
            CommKind::Requires => "requires",
            CommKind::Publishes => "publishes",
            CommKind::SubscribesTo => "subscribesTo",
        }
    }

    fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.keyword() == s)
    }
}

/// An interface named in a communications statement. `module` is the IDSL
/// module that defines it, set by [`link_component`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceRef {
    pub name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub module: Option<String>,
    #[serde(skip)]
    pub pos: Pos,
}

impl InterfaceRef {
    pub fn new(name: &str) -> Self {
        InterfaceRef { name: name.to_string(), module: None, pos: Pos::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Import {
    pub path: String,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gui {
    pub toolkit: String,
    pub widget: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ComponentModel {
    pub name: String,
    #[serde(skip)]
    pub origin: String,
    pub imports: Vec<Import>,
    pub implements: Vec<InterfaceRef>,
    pub requires: Vec<InterfaceRef>,
    pub publishes: Vec<InterfaceRef>,
    pub subscribes_to: Vec<InterfaceRef>,
    pub language: Language,
    pub gui: Option<Gui>,
    pub statemachine: Option<String>,
    pub libs: Vec<String>,
    pub classes: Vec<String>,
    #[serde(skip)]
    pub pos: Pos,
}

impl ComponentModel {
    pub fn new(name: &str) -> Self {
        ComponentModel {
            name: name.to_string(),
            origin: String::new(),
            imports: Vec::new(),
            implements: Vec::new(),
            requires: Vec::new(),
            publishes: Vec::new(),
            subscribes_to: Vec::new(),
            language: Language::Cpp,
            gui: None,
            statemachine: None,
            libs: Vec::new(),
            classes: Vec::new(),
            pos: Pos::default(),
        }
    }

    pub fn comm(&self, kind: CommKind) -> &Vec<InterfaceRef> {
        match kind {
            CommKind::Implements => &self.implements,
            CommKind::Requires => &self.requires,
            CommKind::Publishes => &self.publishes,
            CommKind::SubscribesTo => &self.subscribes_to,
        }
    }

    pub fn comm_mut(&mut self, kind: CommKind) -> &mut Vec<InterfaceRef> {
        match kind {
            CommKind::Implements => &mut self.implements,
            CommKind::Requires => &mut self.requires,
            CommKind::Publishes => &mut self.publishes,
            CommKind::SubscribesTo => &mut self.subscribes_to,
        }
    }

    pub fn names(&self, kind: CommKind) -> impl Iterator<Item = &str> {
        self.comm(kind).iter().map(|r| r.name.as_str())
    }
}

/// Parses a component description. Interface names stay unbound and import
/// paths are kept verbatim.
pub fn parse_cdsl(text: &str, origin: &str) -> Result<ComponentModel, Diagnostics> {
    let mut cur = Cursor::new(text, origin)?;
    let mut imports = Vec::new();
    while cur.is_keyword("import") {
        let pos = cur.bump().pos;
        let (path, _) = cur.expect_string()?;
        cur.expect_punct(';')?;
        imports.push(Import { path, pos });
    }
    if !cur.is_keyword("component") {
        return Err(cur.unexpected(&["`import`", "`component`"]));
    }
    let pos = cur.bump().pos;
    let (name, _) = cur.expect_ident()?;
    let mut model = ComponentModel::new(&name);
    model.origin = origin.to_string();
    model.imports = imports;
    model.pos = pos;

    cur.expect_punct('{')?;
    let mut seen_sections: HashSet<String> = HashSet::new();
    while !cur.is_punct('}') {
        let (section, spos) = match &cur.peek().kind {
            TokenKind::Ident(s) => (s.clone(), cur.pos()),
            _ => return Err(cur.unexpected(&["section keyword", "`}`"])),
        };
        if !matches!(section.as_str(), "communications" | "language" | "gui" | "statemachine" | "libs" | "classes") {
            return Err(cur.error_at("unknown-section", format!("unknown section keyword {section}"), spos).into());
        }
        if !seen_sections.insert(section.clone()) {
            return Err(cur.error_at("duplicate-section", format!("duplicate section {section}"), spos).into());
        }
        cur.bump();
        match section.as_str() {
            "communications" => parse_communications(&mut cur, &mut model)?,
            "language" => {
                let (tag, tpos) = cur.expect_ident()?;
                model.language = tag
                    .parse()
                    .map_err(|msg: String| Diagnostics::from(cur.error_at("unknown-language", msg, tpos)))?;
            }
            "gui" => {
                let (toolkit, _) = cur.expect_ident()?;
                cur.expect_punct('(')?;
                let (widget, _) = cur.expect_ident()?;
                cur.expect_punct(')')?;
                model.gui = Some(Gui { toolkit, widget });
            }
            "statemachine" => model.statemachine = Some(cur.expect_string()?.0),
            "libs" => model.libs = string_list(&mut cur)?,
            "classes" => model.classes = string_list(&mut cur)?,
            _ => unreachable!(),
        }
        cur.expect_punct(';')?;
    }
    cur.expect_punct('}')?;
    cur.eat_punct(';');
    cur.expect_eof()?;
    Ok(model)
}

fn string_list(cur: &mut Cursor<'_>) -> Result<Vec<String>, Diagnostics> {
    let mut items = vec![cur.expect_string()?.0];
    while cur.eat_punct(',') {
        items.push(cur.expect_string()?.0);
    }
    Ok(items)
}

fn parse_communications(cur: &mut Cursor<'_>, model: &mut ComponentModel) -> Result<(), Diagnostics> {
    cur.expect_punct('{')?;
    while !cur.is_punct('}') {
        let kind = match &cur.peek().kind {
            TokenKind::Ident(s) => CommKind::from_keyword(s),
            _ => None,
        };
        let Some(kind) = kind else {
            return Err(cur.unexpected(&["`implements`", "`requires`", "`publishes`", "`subscribesTo`", "`}`"]));
        };
        cur.bump();
        loop {
            let (name, pos) = cur.expect_ident()?;
            if model.comm(kind).iter().any(|r| r.name == name) {
                return Err(cur
                    .error_at(
                        "duplicate-interface",
                        format!("interface {name} listed twice in {}", kind.keyword()),
                        pos,
                    )
                    .into());
            }
            model.comm_mut(kind).push(InterfaceRef { name, module: None, pos });
            if !cur.eat_punct(',') {
                break;
            }
        }
        cur.expect_punct(';')?;
    }
    cur.expect_punct('}')?;
    Ok(())
}

/// Canonical rendering. Sections appear in a fixed order; list contents keep
/// their source order.
pub fn print_cdsl(model: &ComponentModel) -> String {
    let mut out = String::new();
    for imp in &model.imports {
        let _ = writeln!(out, "import {};", quote(&imp.path));
    }
    if !model.imports.is_empty() {
        out.push('\n');
    }
    let _ = writeln!(out, "component {}\n{{", model.name);
    out.push_str("\tcommunications\n\t{\n");
    for kind in CommKind::ALL {
        let names: Vec<&str> = model.names(kind).collect();
        if !names.is_empty() {
            let _ = writeln!(out, "\t\t{} {};", kind.keyword(), names.join(", "));
        }
    }
    out.push_str("\t};\n");
    let _ = writeln!(out, "\tlanguage {};", model.language);
    if let Some(gui) = &model.gui {
        let _ = writeln!(out, "\tgui {}({});", gui.toolkit, gui.widget);
    }
    if let Some(sm) = &model.statemachine {
        let _ = writeln!(out, "\tstatemachine {};", quote(sm));
    }
    if !model.libs.is_empty() {
        let libs: Vec<String> = model.libs.iter().map(|s| quote(s)).collect();
        let _ = writeln!(out, "\tlibs {};", libs.join(", "));
    }
    if !model.classes.is_empty() {
        let classes: Vec<String> = model.classes.iter().map(|s| quote(s)).collect();
        let _ = writeln!(out, "\tclasses {};", classes.join(", "));
    }
    out.push_str("};\n");
    out
}

/// A component whose interface names are all bound to definitions in its
/// imported IDSL modules.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkedComponent {
    pub model: ComponentModel,
    /// Imported modules in import order, duplicates removed.
    pub modules: Vec<Arc<ImportedModule>>,
}

impl LinkedComponent {
    pub fn module(&self, name: &str) -> Option<&IdslModule> {
        self.modules.iter().map(|m| &m.module).find(|m| m.name == name)
    }

    /// The definition bound to an interface reference.
    pub fn interface(&self, r: &InterfaceRef) -> Option<(&IdslModule, &InterfaceDef)> {
        let module = self.module(r.module.as_deref()?)?;
        Some((module, module.interface(&r.name)?))
    }

    pub fn interface_by_name(&self, name: &str) -> Option<(&IdslModule, &InterfaceDef)> {
        CommKind::ALL
            .into_iter()
            .flat_map(|k| self.model.comm(k))
            .find(|r| r.name == name)
            .and_then(|r| self.interface(r))
    }
}

/// Binds each communication entry to exactly one interface definition among
/// the imported modules. Imports are resolved through `loader`, relative to
/// `base_dir`.
pub fn link_component(
    model: &ComponentModel,
    base_dir: &Path,
    loader: &dyn IdslLoader,
) -> Result<LinkedComponent, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut modules: Vec<Arc<ImportedModule>> = Vec::new();
    for imp in &model.imports {
        match loader.load_idsl(&imp.path, base_dir) {
            Ok(m) => {
                if !modules.iter().any(|seen| seen.path == m.path) {
                    modules.push(m);
                }
            }
            Err(errs) => {
                diags.push(
                    Diagnostic::error("import-failed", format!("cannot load import {}", imp.path))
                        .at(&model.origin, imp.pos),
                );
                diags.extend(errs);
            }
        }
    }

    let mut providers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for m in &modules {
        for iface in m.module.interfaces() {
            providers.entry(iface.name.as_str()).or_default().push(m.module.name.as_str());
        }
    }

    let mut linked = model.clone();
    for kind in CommKind::ALL {
        for r in linked.comm_mut(kind) {
            match providers.get(r.name.as_str()).map(Vec::as_slice) {
                Some([only]) => r.module = Some(only.to_string()),
                Some(many) if many.len() > 1 => {
                    r.module = None;
                    diags.push(
                        Diagnostic::error(
                            "ambiguous-interface",
                            format!("ambiguous interface {} defined in modules {}", r.name, many.join(", ")),
                        )
                        .at(&model.origin, r.pos),
                    );
                }
                _ => {
                    r.module = None;
                    diags.push(
                        Diagnostic::error("unresolved-interface", format!("unresolved interface {}", r.name))
                            .at(&model.origin, r.pos),
                    );
                }
            }
        }
    }

    diags.into_result(LinkedComponent { model: linked, modules })
}
