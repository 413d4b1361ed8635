//! Interface definition language: a middleware-neutral subset of Slice with
//! data types, exceptions and interfaces. Interfaces cannot inherit.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::diag::{Diagnostic, Diagnostics};
use crate::source::{Cursor, Pos, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BasicType {
    Bool,
    Byte,
    Short,
    Int,
    Long,
    Float,
    Double,
    String,
}

impl BasicType {
    pub const ALL: [BasicType; 8] = [
        BasicType::Bool,
        BasicType::Byte,
        BasicType::Short,
        BasicType::Int,
        BasicType::Long,
        BasicType::Float,
        BasicType::Double,
        BasicType::String,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            BasicType::Bool => "bool",
            BasicType::Byte => "byte",
            BasicType::Short => "short",
            BasicType::Int => "int",
            BasicType::Long => "long",
            BasicType::Float => "float",
            BasicType::Double => "double",
            BasicType::String => "string",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.keyword() == s)
    }
}

/// Words that cannot name a declaration, field or parameter type.
pub const RESERVED: &[&str] = &[
    "module", "enum", "struct", "sequence", "map", "exception", "interface", "void", "out", "throws",
    "bool", "byte", "short", "int", "long", "float", "double", "string",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DeclKind {
    Enum,
    Struct,
    Sequence,
    Map,
    Exception,
    Interface,
}

impl DeclKind {
    pub fn keyword(self) -> &'static str {
        match self {
            DeclKind::Enum => "enum",
            DeclKind::Struct => "struct",
            DeclKind::Sequence => "sequence",
            DeclKind::Map => "map",
            DeclKind::Exception => "exception",
            DeclKind::Interface => "interface",
        }
    }

    fn is_data_type(self) -> bool {
        !matches!(self, DeclKind::Exception | DeclKind::Interface)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum TypeRef {
    Basic(BasicType),
    Named(NamedType),
}

/// Reference to a declaration by name. `target` is filled in by
/// [`resolve_idsl`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NamedType {
    pub name: String,
    #[serde(skip)]
    pub pos: Pos,
    pub target: Option<DeclKind>,
}

impl TypeRef {
    pub fn named(name: &str) -> Self {
        TypeRef::Named(NamedType { name: name.to_string(), pos: Pos::default(), target: None })
    }

    pub fn name(&self) -> &str {
        match self {
            TypeRef::Basic(b) => b.keyword(),
            TypeRef::Named(n) => &n.name,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Field {
    pub ty: TypeRef,
    pub name: String,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    In,
    Out,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Param {
    pub direction: Direction,
    pub ty: TypeRef,
    pub name: String,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodDef {
    pub name: String,
    /// `None` for `void`.
    pub returns: Option<TypeRef>,
    pub params: Vec<Param>,
    pub throws: Vec<String>,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InterfaceDef {
    pub name: String,
    pub methods: Vec<MethodDef>,
    #[serde(skip)]
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Declaration {
    Enum { name: String, literals: Vec<String>, #[serde(skip)] pos: Pos },
    Struct { name: String, fields: Vec<Field>, #[serde(skip)] pos: Pos },
    Sequence { name: String, element: TypeRef, #[serde(skip)] pos: Pos },
    Map { name: String, key: TypeRef, value: TypeRef, #[serde(skip)] pos: Pos },
    Exception { name: String, fields: Vec<Field>, #[serde(skip)] pos: Pos },
    Interface(InterfaceDef),
}

impl Declaration {
    pub fn name(&self) -> &str {
        match self {
            Declaration::Enum { name, .. }
            | Declaration::Struct { name, .. }
            | Declaration::Sequence { name, .. }
            | Declaration::Map { name, .. }
            | Declaration::Exception { name, .. } => name,
            Declaration::Interface(i) => &i.name,
        }
    }

    pub fn kind(&self) -> DeclKind {
        match self {
            Declaration::Enum { .. } => DeclKind::Enum,
            Declaration::Struct { .. } => DeclKind::Struct,
            Declaration::Sequence { .. } => DeclKind::Sequence,
            Declaration::Map { .. } => DeclKind::Map,
            Declaration::Exception { .. } => DeclKind::Exception,
            Declaration::Interface(_) => DeclKind::Interface,
        }
    }

    pub fn pos(&self) -> Pos {
        match self {
            Declaration::Enum { pos, .. }
            | Declaration::Struct { pos, .. }
            | Declaration::Sequence { pos, .. }
            | Declaration::Map { pos, .. }
            | Declaration::Exception { pos, .. } => *pos,
            Declaration::Interface(i) => i.pos,
        }
    }

    fn type_refs_mut(&mut self) -> Vec<&mut TypeRef> {
        match self {
            Declaration::Enum { .. } => Vec::new(),
            Declaration::Struct { fields, .. } | Declaration::Exception { fields, .. } => {
                fields.iter_mut().map(|f| &mut f.ty).collect()
            }
            Declaration::Sequence { element, .. } => vec![element],
            Declaration::Map { key, value, .. } => vec![key, value],
            Declaration::Interface(i) => i
                .methods
                .iter_mut()
                .flat_map(|m| m.returns.iter_mut().chain(m.params.iter_mut().map(|p| &mut p.ty)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdslModule {
    pub name: String,
    #[serde(skip)]
    pub origin: String,
    pub declarations: Vec<Declaration>,
    #[serde(skip)]
    pub pos: Pos,
}

impl IdslModule {
    pub fn new(name: &str) -> Self {
        IdslModule { name: name.to_string(), origin: String::new(), declarations: Vec::new(), pos: Pos::default() }
    }

    pub fn interfaces(&self) -> impl Iterator<Item = &InterfaceDef> {
        self.declarations.iter().filter_map(|d| match d {
            Declaration::Interface(i) => Some(i),
            _ => None,
        })
    }

    pub fn interface(&self, name: &str) -> Option<&InterfaceDef> {
        self.interfaces().find(|i| i.name == name)
    }

    pub fn declaration(&self, name: &str) -> Option<&Declaration> {
        self.declarations.iter().find(|d| d.name() == name)
    }

    /// Every type reference in declaration order.
    pub fn type_refs(&self) -> Vec<&TypeRef> {
        let mut out = Vec::new();
        for d in &self.declarations {
            match d {
                Declaration::Enum { .. } => {}
                Declaration::Struct { fields, .. } | Declaration::Exception { fields, .. } => {
                    out.extend(fields.iter().map(|f| &f.ty))
                }
                Declaration::Sequence { element, .. } => out.push(element),
                Declaration::Map { key, value, .. } => {
                    out.push(key);
                    out.push(value);
                }
                Declaration::Interface(i) => {
                    for m in &i.methods {
                        out.extend(m.returns.iter());
                        out.extend(m.params.iter().map(|p| &p.ty));
                    }
                }
            }
        }
        out
    }
}

/// Parses one IDSL file. The result is unresolved: named types carry no
/// target yet.
pub fn parse_idsl(text: &str, origin: &str) -> Result<IdslModule, Diagnostics> {
    let mut cur = Cursor::new(text, origin)?;
    let pos = cur.expect_keyword("module")?;
    let (name, _) = cur.expect_ident()?;
    cur.expect_punct('{')?;
    let mut declarations = Vec::new();
    while !cur.is_punct('}') {
        declarations.push(parse_decl(&mut cur)?);
    }
    cur.expect_punct('}')?;
    cur.eat_punct(';');
    cur.expect_eof()?;
    Ok(IdslModule { name, origin: origin.to_string(), declarations, pos })
}

const DECL_KEYWORDS: [&str; 6] = ["`enum`", "`struct`", "`sequence`", "`map`", "`exception`", "`interface`"];

fn parse_decl(cur: &mut Cursor<'_>) -> Result<Declaration, Diagnostics> {
    let pos = cur.pos();
    let keyword = match &cur.peek().kind {
        TokenKind::Ident(s) => s.clone(),
        _ => {
            let mut expected = DECL_KEYWORDS.to_vec();
            expected.push("`}`");
            return Err(cur.unexpected(&expected));
        }
    };
    let decl = match keyword.as_str() {
        "enum" => {
            cur.bump();
            let name = decl_name(cur)?;
            cur.expect_punct('{')?;
            let mut literals = vec![cur.expect_ident()?.0];
            while cur.eat_punct(',') {
                literals.push(cur.expect_ident()?.0);
            }
            cur.expect_punct('}')?;
            Declaration::Enum { name, literals, pos }
        }
        "struct" | "exception" => {
            cur.bump();
            let name = decl_name(cur)?;
            cur.expect_punct('{')?;
            let mut fields = Vec::new();
            while !cur.is_punct('}') {
                let fpos = cur.pos();
                let ty = parse_type_ref(cur)?;
                let (fname, _) = cur.expect_ident()?;
                cur.expect_punct(';')?;
                fields.push(Field { ty, name: fname, pos: fpos });
            }
            cur.expect_punct('}')?;
            if keyword == "struct" {
                Declaration::Struct { name, fields, pos }
            } else {
                Declaration::Exception { name, fields, pos }
            }
        }
        "sequence" => {
            cur.bump();
            cur.expect_punct('<')?;
            let element = parse_type_ref(cur)?;
            cur.expect_punct('>')?;
            let name = decl_name(cur)?;
            Declaration::Sequence { name, element, pos }
        }
        "map" => {
            cur.bump();
            cur.expect_punct('<')?;
            let key = parse_type_ref(cur)?;
            cur.expect_punct(',')?;
            let value = parse_type_ref(cur)?;
            cur.expect_punct('>')?;
            let name = decl_name(cur)?;
            Declaration::Map { name, key, value, pos }
        }
        "interface" => {
            cur.bump();
            let name = decl_name(cur)?;
            // No inheritance clause exists in the grammar; anything but `{`
            // (e.g. `extends`) is rejected right here.
            cur.expect_punct('{')?;
            let mut methods = Vec::new();
            while !cur.is_punct('}') {
                methods.push(parse_method(cur)?);
            }
            cur.expect_punct('}')?;
            Declaration::Interface(InterfaceDef { name, methods, pos })
        }
        _ => {
            let mut expected = DECL_KEYWORDS.to_vec();
            expected.push("`}`");
            return Err(cur.unexpected(&expected));
        }
    };
    cur.expect_punct(';')?;
    Ok(decl)
}

fn decl_name(cur: &mut Cursor<'_>) -> Result<String, Diagnostics> {
    let (name, pos) = cur.expect_ident()?;
    if RESERVED.contains(&name.as_str()) {
        return Err(cur.error_at("syntax", format!("`{name}` is reserved and cannot name a declaration"), pos).into());
    }
    Ok(name)
}

fn parse_type_ref(cur: &mut Cursor<'_>) -> Result<TypeRef, Diagnostics> {
    let pos = cur.pos();
    match &cur.peek().kind {
        TokenKind::Ident(s) if s == "void" => {
            Err(cur.error_at("syntax", "`void` is only allowed as a return type", pos).into())
        }
        TokenKind::Ident(s) if RESERVED.contains(&s.as_str()) && BasicType::from_keyword(s).is_none() => {
            Err(cur.unexpected(&["type"]))
        }
        TokenKind::Ident(s) => {
            let t = match BasicType::from_keyword(s) {
                Some(b) => TypeRef::Basic(b),
                None => TypeRef::Named(NamedType { name: s.clone(), pos, target: None }),
            };
            cur.bump();
            Ok(t)
        }
        _ => Err(cur.unexpected(&["type"])),
    }
}

fn parse_method(cur: &mut Cursor<'_>) -> Result<MethodDef, Diagnostics> {
    let pos = cur.pos();
    let returns = if cur.eat_keyword("void") { None } else { Some(parse_type_ref(cur)?) };
    let (name, _) = cur.expect_ident()?;
    cur.expect_punct('(')?;
    let mut params = Vec::new();
    if !cur.is_punct(')') {
        loop {
            let ppos = cur.pos();
            let direction = if cur.eat_keyword("out") { Direction::Out } else { Direction::In };
            let ty = parse_type_ref(cur)?;
            let (pname, _) = cur.expect_ident()?;
            params.push(Param { direction, ty, name: pname, pos: ppos });
            if !cur.eat_punct(',') {
                break;
            }
        }
    }
    cur.expect_punct(')')?;
    let mut throws = Vec::new();
    if cur.eat_keyword("throws") {
        throws.push(cur.expect_ident()?.0);
        while cur.eat_punct(',') {
            throws.push(cur.expect_ident()?.0);
        }
    }
    cur.expect_punct(';')?;
    Ok(MethodDef { name, returns, params, throws, pos })
}

/// Binds every named type to its declaration and checks the module's
/// semantic rules. All problems are reported, not just the first.
pub fn resolve_idsl(mut module: IdslModule) -> Result<IdslModule, Diagnostics> {
    let origin = module.origin.clone();
    let mut diags = Diagnostics::new();
    let mut symbols: BTreeMap<String, DeclKind> = BTreeMap::new();

    for decl in &module.declarations {
        if symbols.insert(decl.name().to_string(), decl.kind()).is_some() {
            diags.push(
                Diagnostic::error("duplicate-declaration", format!("duplicate declaration {}", decl.name()))
                    .at(&origin, decl.pos()),
            );
        }
    }

    for decl in &mut module.declarations {
        for tref in decl.type_refs_mut() {
            if let TypeRef::Named(named) = tref {
                match symbols.get(&named.name) {
                    None => diags.push(
                        Diagnostic::error("unresolved-type", format!("unresolved type {}", named.name))
                            .at(&origin, named.pos),
                    ),
                    Some(kind) if !kind.is_data_type() => diags.push(
                        Diagnostic::error(
                            "not-a-data-type",
                            format!("{} is an {}, not a data type", named.name, kind.keyword()),
                        )
                        .at(&origin, named.pos),
                    ),
                    Some(kind) => named.target = Some(*kind),
                }
            }
        }
    }

    for decl in &module.declarations {
        match decl {
            Declaration::Enum { name, literals, pos } => {
                let mut seen = HashSet::new();
                for lit in literals {
                    if !seen.insert(lit) {
                        diags.push(
                            Diagnostic::error(
                                "duplicate-enum-literal",
                                format!("duplicate literal {lit} in enum {name}"),
                            )
                            .at(&origin, *pos),
                        );
                    }
                }
            }
            Declaration::Struct { name, fields, .. } | Declaration::Exception { name, fields, .. } => {
                let mut seen = HashSet::new();
                for f in fields {
                    if !seen.insert(&f.name) {
                        diags.push(
                            Diagnostic::error("duplicate-field", format!("duplicate field {} in {name}", f.name))
                                .at(&origin, f.pos),
                        );
                    }
                }
            }
            Declaration::Map { name, key, pos, .. } => {
                if !matches!(key, TypeRef::Basic(_)) {
                    diags.push(
                        Diagnostic::error(
                            "non-basic-map-key",
                            format!("map {name} key type {} is not a basic type", key.name()),
                        )
                        .at(&origin, *pos),
                    );
                }
            }
            Declaration::Sequence { .. } => {}
            Declaration::Interface(iface) => {
                let mut methods = HashSet::new();
                for m in &iface.methods {
                    if !methods.insert(&m.name) {
                        diags.push(
                            Diagnostic::error(
                                "duplicate-method",
                                format!("duplicate method {} in interface {}", m.name, iface.name),
                            )
                            .at(&origin, m.pos),
                        );
                    }
                    let mut params = HashSet::new();
                    for p in &m.params {
                        if !params.insert(&p.name) {
                            diags.push(
                                Diagnostic::error(
                                    "duplicate-parameter",
                                    format!("duplicate parameter {} in method {}", p.name, m.name),
                                )
                                .at(&origin, p.pos),
                            );
                        }
                    }
                    for t in &m.throws {
                        match symbols.get(t) {
                            Some(DeclKind::Exception) => {}
                            Some(kind) => diags.push(
                                Diagnostic::error(
                                    "not-an-exception",
                                    format!("{t} in throws clause of {} is an {}", m.name, kind.keyword()),
                                )
                                .at(&origin, m.pos),
                            ),
                            None => diags.push(
                                Diagnostic::error(
                                    "unresolved-exception",
                                    format!("unresolved exception {t} in throws clause of {}", m.name),
                                )
                                .at(&origin, m.pos),
                            ),
                        }
                    }
                }
            }
        }
    }

    diags.into_result(module)
}

/// Canonical text for `module`. Stable across runs; reparses to an equal AST.
pub fn print_idsl(module: &IdslModule) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "module {}\n{{", module.name);
    for (i, decl) in module.declarations.iter().enumerate() {
        if i > 0 {
            out.push('\n');
        }
        print_decl(&mut out, decl);
    }
    out.push_str("};\n");
    out
}

fn print_fields(out: &mut String, fields: &[Field]) {
    for f in fields {
        let _ = writeln!(out, "\t\t{} {};", f.ty.name(), f.name);
    }
}

fn print_decl(out: &mut String, decl: &Declaration) {
    match decl {
        Declaration::Enum { name, literals, .. } => {
            let _ = writeln!(out, "\tenum {name} {{ {} }};", literals.join(", "));
        }
        Declaration::Struct { name, fields, .. } => {
            let _ = writeln!(out, "\tstruct {name}\n\t{{");
            print_fields(out, fields);
            out.push_str("\t};\n");
        }
        Declaration::Exception { name, fields, .. } => {
            let _ = writeln!(out, "\texception {name}\n\t{{");
            print_fields(out, fields);
            out.push_str("\t};\n");
        }
        Declaration::Sequence { name, element, .. } => {
            let _ = writeln!(out, "\tsequence<{}> {name};", element.name());
        }
        Declaration::Map { name, key, value, .. } => {
            let _ = writeln!(out, "\tmap<{}, {}> {name};", key.name(), value.name());
        }
        Declaration::Interface(iface) => {
            let _ = writeln!(out, "\tinterface {}\n\t{{", iface.name);
            for m in &iface.methods {
                let _ = writeln!(out, "\t\t{};", method_signature(m));
            }
            out.push_str("\t};\n");
        }
    }
}

/// `ret name(params) throws ...` without the trailing semicolon.
pub fn method_signature(m: &MethodDef) -> String {
    let ret = m.returns.as_ref().map_or("void", TypeRef::name);
    let params: Vec<String> = m
        .params
        .iter()
        .map(|p| match p.direction {
            Direction::In => format!("{} {}", p.ty.name(), p.name),
            Direction::Out => format!("out {} {}", p.ty.name(), p.name),
        })
        .collect();
    let mut s = format!("{ret} {}({})", m.name, params.join(", "));
    if !m.throws.is_empty() {
        let _ = write!(s, " throws {}", m.throws.join(", "));
    }
    s
}
