//! Parameter schemas, the legacy flat `key = value` configuration format,
//! binding of legacy files against a schema, and range validation.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};

use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Serialize, Serializer};

use crate::diag::{Diagnostic, Diagnostics};
use crate::source::{quote, Cursor, Pos, TokenKind};

#[derive(Debug, Clone, PartialEq)]
pub enum ParamType {
    Int,
    Float,
    Bool,
    String,
    Enum(Vec<String>),
    List(Box<ParamType>),
    Struct(String),
}

impl fmt::Display for ParamType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamType::Int => f.write_str("int"),
            ParamType::Float => f.write_str("float"),
            ParamType::Bool => f.write_str("bool"),
            ParamType::String => f.write_str("string"),
            ParamType::Enum(lits) => write!(f, "enum {{ {} }}", lits.join(", ")),
            ParamType::List(elem) => write!(f, "list<{elem}>"),
            ParamType::Struct(name) => f.write_str(name),
        }
    }
}

/// A literal as written in a schema (defaults and range bounds).
#[derive(Debug, Clone, PartialEq)]
pub enum Literal {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    /// Bare identifier, used for enum literals.
    Ident(String),
    List(Vec<Literal>),
    /// Positional struct value.
    Tuple(Vec<Literal>),
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(i) => write!(f, "{i}"),
            // Debug keeps a `.0` on integral floats, so the text reparses as a float.
            Literal::Float(x) => write!(f, "{x:?}"),
            Literal::Bool(b) => write!(f, "{b}"),
            Literal::Str(s) => f.write_str(&quote(s)),
            Literal::Ident(s) => f.write_str(s),
            Literal::List(items) => write!(f, "[{}]", join(items)),
            Literal::Tuple(items) => write!(f, "({})", join(items)),
        }
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Clone, PartialEq)]
pub enum Range {
    /// Closed interval.
    Interval(Literal, Literal),
    Set(Vec<Literal>),
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Range::Interval(lo, hi) => write!(f, "[{lo}, {hi}]"),
            Range::Set(items) => write!(f, "{{{}}}", join(items)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructField {
    pub ty: ParamType,
    pub name: String,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructDef {
    pub name: String,
    pub fields: Vec<StructField>,
    pub pos: Pos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub ty: ParamType,
    /// Key base name in legacy files when it differs from `name`.
    pub legacy: Option<String>,
    pub default: Option<Literal>,
    pub optional: bool,
    pub range: Option<Range>,
    pub pos: Pos,
}

impl ParamSpec {
    pub fn legacy_name(&self) -> &str {
        self.legacy.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSchema {
    pub name: String,
    pub origin: String,
    pub structs: Vec<StructDef>,
    pub params: Vec<ParamSpec>,
    pub pos: Pos,
}

impl ParameterSchema {
    pub fn struct_def(&self, name: &str) -> Option<&StructDef> {
        self.structs.iter().find(|s| s.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.name == name)
    }
}

/// Words that cannot name a struct, field or parameter.
pub const RESERVED: &[&str] = &[
    "parameters", "struct", "optional", "legacy", "in", "int", "float", "bool", "string", "enum", "list", "true",
    "false",
];

pub fn parse_pdsl(text: &str, origin: &str) -> Result<ParameterSchema, Diagnostics> {
    let mut cur = Cursor::new(text, origin)?;
    let pos = cur.expect_keyword("parameters")?;
    let (name, _) = cur.expect_ident()?;
    cur.expect_punct('{')?;
    let mut schema = ParameterSchema { name, origin: origin.to_string(), structs: Vec::new(), params: Vec::new(), pos };
    while !cur.is_punct('}') {
        if cur.is_keyword("struct") {
            let spos = cur.bump().pos;
            let sname = item_name(&mut cur)?;
            cur.expect_punct('{')?;
            let mut fields = Vec::new();
            while !cur.is_punct('}') {
                let fpos = cur.pos();
                let ty = parse_type(&mut cur)?;
                let fname = item_name(&mut cur)?;
                cur.expect_punct(';')?;
                fields.push(StructField { ty, name: fname, pos: fpos });
            }
            cur.expect_punct('}')?;
            cur.expect_punct(';')?;
            schema.structs.push(StructDef { name: sname, fields, pos: spos });
        } else {
            schema.params.push(parse_param(&mut cur)?);
        }
    }
    cur.expect_punct('}')?;
    cur.eat_punct(';');
    cur.expect_eof()?;
    check_schema(&schema)?;
    Ok(schema)
}

fn item_name(cur: &mut Cursor<'_>) -> Result<String, Diagnostics> {
    let (name, pos) = cur.expect_ident()?;
    if RESERVED.contains(&name.as_str()) {
        return Err(cur.error_at("syntax", format!("`{name}` is reserved and cannot be used as a name"), pos).into());
    }
    Ok(name)
}

fn parse_type(cur: &mut Cursor<'_>) -> Result<ParamType, Diagnostics> {
    let word = match &cur.peek().kind {
        TokenKind::Ident(s) => s.clone(),
        _ => return Err(cur.unexpected(&["type"])),
    };
    let pos = cur.pos();
    cur.bump();
    Ok(match word.as_str() {
        "int" => ParamType::Int,
        "float" => ParamType::Float,
        "bool" => ParamType::Bool,
        "string" => ParamType::String,
        "enum" => {
            cur.expect_punct('{')?;
            let mut lits = vec![enum_literal(cur)?];
            while cur.eat_punct(',') {
                lits.push(enum_literal(cur)?);
            }
            cur.expect_punct('}')?;
            ParamType::Enum(lits)
        }
        "list" => {
            cur.expect_punct('<')?;
            let elem = parse_type(cur)?;
            cur.expect_punct('>')?;
            ParamType::List(Box::new(elem))
        }
        other if RESERVED.contains(&other) => {
            return Err(cur.error_at("syntax", format!("expected type, found `{other}`"), pos).into())
        }
        other => ParamType::Struct(other.to_string()),
    })
}

fn enum_literal(cur: &mut Cursor<'_>) -> Result<String, Diagnostics> {
    let (lit, pos) = cur.expect_ident()?;
    if lit == "true" || lit == "false" {
        return Err(cur.error_at("syntax", format!("`{lit}` cannot be an enum literal"), pos).into());
    }
    Ok(lit)
}

fn parse_param(cur: &mut Cursor<'_>) -> Result<ParamSpec, Diagnostics> {
    let pos = cur.pos();
    let optional = cur.eat_keyword("optional");
    let ty = parse_type(cur)?;
    let name = item_name(cur)?;
    let legacy = if cur.eat_keyword("legacy") { Some(cur.expect_string()?.0) } else { None };
    let default = if cur.eat_punct('=') { Some(parse_literal(cur)?) } else { None };
    let range = if cur.eat_keyword("in") {
        if cur.eat_punct('[') {
            let lo = parse_literal(cur)?;
            cur.expect_punct(',')?;
            let hi = parse_literal(cur)?;
            cur.expect_punct(']')?;
            Some(Range::Interval(lo, hi))
        } else if cur.eat_punct('{') {
            let mut items = vec![parse_literal(cur)?];
            while cur.eat_punct(',') {
                items.push(parse_literal(cur)?);
            }
            cur.expect_punct('}')?;
            Some(Range::Set(items))
        } else {
            return Err(cur.unexpected(&["`[`", "`{`"]));
        }
    } else {
        None
    };
    cur.expect_punct(';')?;
    Ok(ParamSpec { name, ty, legacy, default, optional, range, pos })
}

fn parse_number(cur: &mut Cursor<'_>, negative: bool) -> Result<Literal, Diagnostics> {
    let pos = cur.pos();
    let TokenKind::Number(text) = cur.peek().kind.clone() else {
        return Err(cur.unexpected(&["number"]));
    };
    cur.bump();
    let signed = if negative { format!("-{text}") } else { text.clone() };
    if !text.contains(['.', 'e', 'E']) {
        if let Ok(i) = signed.parse::<i64>() {
            return Ok(Literal::Int(i));
        }
    }
    signed
        .parse::<f64>()
        .ok()
        .filter(|x| x.is_finite())
        .map(Literal::Float)
        .ok_or_else(|| cur.error_at("syntax", format!("invalid number `{signed}`"), pos).into())
}

fn parse_literal(cur: &mut Cursor<'_>) -> Result<Literal, Diagnostics> {
    match cur.peek().kind.clone() {
        TokenKind::Punct('-') => {
            cur.bump();
            parse_number(cur, true)
        }
        TokenKind::Number(_) => parse_number(cur, false),
        TokenKind::Str(s) => {
            cur.bump();
            Ok(Literal::Str(s))
        }
        TokenKind::Ident(s) => {
            cur.bump();
            Ok(match s.as_str() {
                "true" => Literal::Bool(true),
                "false" => Literal::Bool(false),
                _ => Literal::Ident(s),
            })
        }
        TokenKind::Punct(open @ ('[' | '(')) => {
            let close = if open == '[' { ']' } else { ')' };
            cur.bump();
            let mut items = Vec::new();
            if !cur.is_punct(close) {
                items.push(parse_literal(cur)?);
                while cur.eat_punct(',') {
                    items.push(parse_literal(cur)?);
                }
            }
            cur.expect_punct(close)?;
            Ok(if open == '[' { Literal::List(items) } else { Literal::Tuple(items) })
        }
        _ => Err(cur.unexpected(&["literal"])),
    }
}

fn check_type(schema: &ParameterSchema, ty: &ParamType, pos: Pos, diags: &mut Diagnostics) {
    match ty {
        ParamType::Struct(name) if schema.struct_def(name).is_none() => diags.push(
            Diagnostic::error("unresolved-type", format!("unresolved struct {name}")).at(&schema.origin, pos),
        ),
        ParamType::List(elem) => check_type(schema, elem, pos, diags),
        ParamType::Enum(lits) => {
            let mut seen = HashSet::new();
            for l in lits {
                if !seen.insert(l) {
                    diags.push(
                        Diagnostic::error("duplicate-enum-literal", format!("duplicate enum literal {l}"))
                            .at(&schema.origin, pos),
                    );
                }
            }
        }
        _ => {}
    }
}

fn check_schema(schema: &ParameterSchema) -> Result<(), Diagnostics> {
    let mut diags = Diagnostics::new();
    let origin = &schema.origin;
    let mut structs = HashSet::new();
    for s in &schema.structs {
        if !structs.insert(&s.name) {
            diags.push(Diagnostic::error("duplicate-name", format!("duplicate struct {}", s.name)).at(origin, s.pos));
        }
        let mut fields = HashSet::new();
        for f in &s.fields {
            if !fields.insert(&f.name) {
                diags.push(
                    Diagnostic::error("duplicate-name", format!("duplicate field {} in struct {}", f.name, s.name))
                        .at(origin, f.pos),
                );
            }
            check_type(schema, &f.ty, f.pos, &mut diags);
        }
    }
    // Recursive struct definitions would make values infinitely deep.
    for s in &schema.structs {
        if struct_reaches(schema, &s.name, &s.name, &mut HashSet::new()) {
            diags.push(
                Diagnostic::error("recursive-struct", format!("struct {} contains itself", s.name)).at(origin, s.pos),
            );
        }
    }
    let mut params = HashSet::new();
    for p in &schema.params {
        if !params.insert(&p.name) {
            diags.push(Diagnostic::error("duplicate-name", format!("duplicate parameter {}", p.name)).at(origin, p.pos));
        }
        check_type(schema, &p.ty, p.pos, &mut diags);
        if diags.has_errors() {
            continue;
        }
        if let Some(range) = &p.range {
            if let Err(msg) = check_range_decl(schema, &p.ty, range) {
                diags.push(Diagnostic::error("invalid-range", format!("parameter {}: {msg}", p.name)).at(origin, p.pos));
                continue;
            }
        }
        if let Some(default) = &p.default {
            match literal_value(schema, &p.ty, default) {
                Err(msg) => diags.push(
                    Diagnostic::error("invalid-default", format!("parameter {}: default {default}: {msg}", p.name))
                        .at(origin, p.pos),
                ),
                Ok(value) => {
                    if let Some(range) = &p.range {
                        if range_violation(&value, range).is_some() {
                            diags.push(
                                Diagnostic::error(
                                    "default-out-of-range",
                                    format!("default {default} outside range {range}"),
                                )
                                .at(origin, p.pos),
                            );
                        }
                    }
                }
            }
        }
    }
    diags.into_result(())
}

fn struct_reaches(schema: &ParameterSchema, from: &str, target: &str, seen: &mut HashSet<String>) -> bool {
    if !seen.insert(from.to_string()) {
        return false;
    }
    let Some(def) = schema.struct_def(from) else { return false };
    def.fields.iter().any(|f| {
        let mut ty = &f.ty;
        while let ParamType::List(inner) = ty {
            ty = inner;
        }
        matches!(ty, ParamType::Struct(n) if n == target || struct_reaches(schema, n, target, seen))
    })
}

fn check_range_decl(schema: &ParameterSchema, ty: &ParamType, range: &Range) -> Result<(), String> {
    match (ty, range) {
        (ParamType::Int | ParamType::Float, Range::Interval(lo, hi)) => {
            let lo_v = literal_value(schema, ty, lo)?;
            let hi_v = literal_value(schema, ty, hi)?;
            if lo_v.as_f64() > hi_v.as_f64() {
                return Err(format!("empty interval {range}"));
            }
            Ok(())
        }
        (ParamType::Int | ParamType::Float | ParamType::String | ParamType::Enum(_), Range::Set(items)) => {
            items.iter().try_for_each(|l| literal_value(schema, ty, l).map(|_| ()))
        }
        (_, Range::Interval(..)) => Err(format!("interval ranges apply only to int and float, not {ty}")),
        (_, Range::Set(_)) => Err(format!("value sets apply only to int, float, string and enum, not {ty}")),
    }
}

/// A typed configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Enum(String),
    List(Vec<Value>),
    /// Field values in declaration order.
    Struct(Vec<(String, Value)>),
}

impl Value {
    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn field(&self, name: &str) -> Option<&Value> {
        match self {
            Value::Struct(fields) => fields.iter().find(|(n, _)| n == name).map(|(_, v)| v),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Float(x) => write!(f, "{x}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Str(s) | Value::Enum(s) => f.write_str(s),
            Value::List(items) => write!(f, "[{}]", join(items)),
            Value::Struct(fields) => {
                let vals: Vec<&Value> = fields.iter().map(|(_, v)| v).collect();
                write!(f, "({})", join(&vals))
            }
        }
    }
}

impl Serialize for Value {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Value::Int(i) => s.serialize_i64(*i),
            Value::Float(x) => s.serialize_f64(*x),
            Value::Bool(b) => s.serialize_bool(*b),
            Value::Str(v) | Value::Enum(v) => s.serialize_str(v),
            Value::List(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            Value::Struct(fields) => {
                let mut map = s.serialize_map(Some(fields.len()))?;
                for (k, v) in fields {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

/// Converts a schema literal to a value of type `ty`.
pub fn literal_value(schema: &ParameterSchema, ty: &ParamType, lit: &Literal) -> Result<Value, String> {
    match (ty, lit) {
        (ParamType::Int, Literal::Int(i)) => Ok(Value::Int(*i)),
        (ParamType::Float, Literal::Int(i)) => Ok(Value::Float(*i as f64)),
        (ParamType::Float, Literal::Float(x)) => Ok(Value::Float(*x)),
        (ParamType::Bool, Literal::Bool(b)) => Ok(Value::Bool(*b)),
        (ParamType::String, Literal::Str(s)) => Ok(Value::Str(s.clone())),
        (ParamType::Enum(lits), Literal::Ident(s) | Literal::Str(s)) => {
            if lits.contains(s) {
                Ok(Value::Enum(s.clone()))
            } else {
                Err(format!("{s} is not one of {}", lits.join(", ")))
            }
        }
        (ParamType::List(elem), Literal::List(items)) => {
            items.iter().map(|l| literal_value(schema, elem, l)).collect::<Result<_, _>>().map(Value::List)
        }
        (ParamType::Struct(name), Literal::Tuple(items)) => {
            let def = schema.struct_def(name).ok_or_else(|| format!("unresolved struct {name}"))?;
            if def.fields.len() != items.len() {
                return Err(format!("struct {name} has {} fields, got {}", def.fields.len(), items.len()));
            }
            def.fields
                .iter()
                .zip(items)
                .map(|(f, l)| literal_value(schema, &f.ty, l).map(|v| (f.name.clone(), v)))
                .collect::<Result<_, _>>()
                .map(Value::Struct)
        }
        _ => Err(format!("expected {ty}")),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    Missing,
    TypeMismatch,
    BelowLowerBound,
    AboveUpperBound,
    NotInSet,
    UnknownParameter,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ViolationKind::Missing => "missing required value",
            ViolationKind::TypeMismatch => "type mismatch",
            ViolationKind::BelowLowerBound => "below lower bound",
            ViolationKind::AboveUpperBound => "above upper bound",
            ViolationKind::NotInSet => "not in allowed set",
            ViolationKind::UnknownParameter => "unknown parameter",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub param: String,
    pub value: Option<String>,
    pub kind: ViolationKind,
    /// The constraint that failed, e.g. `[9600, 921600]` or `float`.
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.param, self.kind)?;
        if let Some(v) = &self.value {
            write!(f, " (value {v}, constraint {})", self.constraint)
        } else {
            write!(f, " ({})", self.constraint)
        }
    }
}

fn range_violation(value: &Value, range: &Range) -> Option<ViolationKind> {
    match range {
        Range::Interval(lo, hi) => {
            let (below, above) = match (value, lo, hi) {
                (Value::Int(i), Literal::Int(l), Literal::Int(h)) => (i < l, i > h),
                _ => {
                    let x = value.as_f64()?;
                    (x < literal_f64(lo)?, x > literal_f64(hi)?)
                }
            };
            if below {
                Some(ViolationKind::BelowLowerBound)
            } else if above {
                Some(ViolationKind::AboveUpperBound)
            } else {
                None
            }
        }
        Range::Set(items) => {
            let hit = items.iter().any(|l| match (value, l) {
                (Value::Int(a), Literal::Int(b)) => a == b,
                (Value::Float(a), Literal::Int(b)) => *a == *b as f64,
                (Value::Float(a), Literal::Float(b)) => a == b,
                (Value::Str(a), Literal::Str(b)) => a == b,
                (Value::Enum(a), Literal::Ident(b) | Literal::Str(b)) => a == b,
                _ => false,
            });
            (!hit).then_some(ViolationKind::NotInSet)
        }
    }
}

fn literal_f64(l: &Literal) -> Option<f64> {
    match l {
        Literal::Int(i) => Some(*i as f64),
        Literal::Float(x) => Some(*x),
        _ => None,
    }
}

fn type_matches(schema: &ParameterSchema, ty: &ParamType, value: &Value) -> bool {
    match (ty, value) {
        (ParamType::Int, Value::Int(_))
        | (ParamType::Float, Value::Float(_))
        | (ParamType::Bool, Value::Bool(_))
        | (ParamType::String, Value::Str(_)) => true,
        (ParamType::Enum(lits), Value::Enum(v)) => lits.contains(v),
        (ParamType::List(elem), Value::List(items)) => items.iter().all(|v| type_matches(schema, elem, v)),
        (ParamType::Struct(name), Value::Struct(fields)) => schema.struct_def(name).is_some_and(|def| {
            def.fields.len() == fields.len()
                && def.fields.iter().zip(fields).all(|(f, (n, v))| f.name == *n && type_matches(schema, &f.ty, v))
        }),
        _ => false,
    }
}

/// A concrete set of parameter values for one schema.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigInstance {
    pub schema: String,
    pub values: BTreeMap<String, Value>,
}

impl ConfigInstance {
    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.get(name)
    }
}

/// All problems with `instance` measured against `schema`. Empty means the
/// configuration is valid.
pub fn validate_config(schema: &ParameterSchema, instance: &ConfigInstance) -> Vec<Violation> {
    let mut out = Vec::new();
    for p in &schema.params {
        let Some(value) = instance.values.get(&p.name) else {
            if !p.optional && p.default.is_none() {
                out.push(Violation {
                    param: p.name.clone(),
                    value: None,
                    kind: ViolationKind::Missing,
                    constraint: p.ty.to_string(),
                });
            }
            continue;
        };
        if !type_matches(schema, &p.ty, value) {
            out.push(Violation {
                param: p.name.clone(),
                value: Some(value.to_string()),
                kind: ViolationKind::TypeMismatch,
                constraint: p.ty.to_string(),
            });
            continue;
        }
        if let Some(range) = &p.range {
            if let Some(kind) = range_violation(value, range) {
                out.push(Violation {
                    param: p.name.clone(),
                    value: Some(value.to_string()),
                    kind,
                    constraint: range.to_string(),
                });
            }
        }
    }
    for name in instance.values.keys() {
        if schema.param(name).is_none() {
            out.push(Violation {
                param: name.clone(),
                value: instance.values.get(name).map(ToString::to_string),
                kind: ViolationKind::UnknownParameter,
                constraint: format!("schema {}", schema.name),
            });
        }
    }
    out
}

/// Canonical schema text: structs first, then parameters, each in source order.
pub fn print_pdsl(schema: &ParameterSchema) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "parameters {}\n{{", schema.name);
    for s in &schema.structs {
        let _ = writeln!(out, "\tstruct {}\n\t{{", s.name);
        for f in &s.fields {
            let _ = writeln!(out, "\t\t{} {};", f.ty, f.name);
        }
        out.push_str("\t};\n");
    }
    for p in &schema.params {
        out.push('\t');
        if p.optional {
            out.push_str("optional ");
        }
        let _ = write!(out, "{} {}", p.ty, p.name);
        if let Some(l) = &p.legacy {
            let _ = write!(out, " legacy {}", quote(l));
        }
        if let Some(d) = &p.default {
            let _ = write!(out, " = {d}");
        }
        if let Some(r) = &p.range {
            let _ = write!(out, " in {r}");
        }
        out.push_str(";\n");
    }
    out.push_str("};\n");
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LegacyEntry {
    pub key: String,
    pub raw: String,
    pub line: u32,
}

/// The flat `key = value` configuration format.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct LegacyConfig {
    pub entries: Vec<LegacyEntry>,
}

impl LegacyConfig {
    pub fn get(&self, key: &str) -> Option<&LegacyEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// True when some parameter of `schema` has a key under `prefix`.
    pub fn binds_any(&self, schema: &ParameterSchema, prefix: &str) -> bool {
        schema.params.iter().any(|p| {
            let key = format!("{prefix}.{}", p.legacy_name());
            match p.ty {
                ParamType::List(_) => self.get(&format!("{key}0")).is_some(),
                _ => self.get(&key).is_some(),
            }
        })
    }
}

/// Key prefix for a component's parameters: the component name, or the name
/// without its `Comp` suffix when only that form carries parameters
/// (`JointMotorComp` reads `JointMotor.*` keys).
pub fn legacy_prefix(schema: &ParameterSchema, component: &str, legacy: &LegacyConfig) -> String {
    match component.strip_suffix("Comp") {
        Some(short)
            if !short.is_empty() && !legacy.binds_any(schema, component) && legacy.binds_any(schema, short) =>
        {
            short.to_string()
        }
        _ => component.to_string(),
    }
}

pub fn parse_legacy_config(text: &str) -> Result<LegacyConfig, Diagnostics> {
    parse_legacy_config_named(text, "<config>")
}

/// Like [`parse_legacy_config`], with `origin` attached to diagnostics.
pub fn parse_legacy_config_named(text: &str, origin: &str) -> Result<LegacyConfig, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut entries: Vec<LegacyEntry> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx as u32 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, raw)) = trimmed.split_once('=') else {
            diags.push(
                Diagnostic::error("missing-equals", format!("line has no `=`: {trimmed}"))
                    .at(origin, Pos::new(lineno, 1)),
            );
            continue;
        };
        let key = key.trim().to_string();
        if !seen.insert(key.clone()) {
            diags.push(Diagnostic::error("duplicate-key", format!("duplicate key {key}")).at(origin, Pos::new(lineno, 1)));
            continue;
        }
        entries.push(LegacyEntry { key, raw: raw.trim().to_string(), line: lineno });
    }
    diags.into_result(LegacyConfig { entries })
}

fn convert_scalar(ty: &ParamType, raw: &str) -> Result<Value, String> {
    let raw = raw.trim();
    match ty {
        ParamType::Int => raw.parse::<i64>().map(Value::Int).map_err(|_| format!("`{raw}` is not an int")),
        ParamType::Float => raw
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .map(Value::Float)
            .ok_or_else(|| format!("`{raw}` is not a float")),
        ParamType::Bool => match raw {
            "true" => Ok(Value::Bool(true)),
            "false" => Ok(Value::Bool(false)),
            _ => Err(format!("`{raw}` is not a bool (expected true or false)")),
        },
        ParamType::String => Ok(Value::Str(raw.to_string())),
        ParamType::Enum(lits) => {
            if lits.iter().any(|l| l == raw) {
                Ok(Value::Enum(raw.to_string()))
            } else {
                Err(format!("`{raw}` is not one of {}", lits.join(", ")))
            }
        }
        ParamType::List(_) | ParamType::Struct(_) => Err(format!("{ty} cannot appear inside a flat tuple")),
    }
}

fn split_tuple(raw: &str) -> Vec<&str> {
    raw.split(',').map(str::trim).collect()
}

/// Converts one raw legacy value. Structs and lists are comma-separated
/// tuples whose items must be scalars.
fn convert_raw(schema: &ParameterSchema, ty: &ParamType, raw: &str) -> Result<Value, (String, &'static str)> {
    match ty {
        ParamType::Struct(name) => {
            let def = schema.struct_def(name).ok_or((format!("unresolved struct {name}"), "conversion"))?;
            let parts = split_tuple(raw);
            if parts.len() != def.fields.len() {
                return Err((
                    format!("struct {name} has {} fields but the value has {}", def.fields.len(), parts.len()),
                    "arity-mismatch",
                ));
            }
            def.fields
                .iter()
                .zip(parts)
                .map(|(f, part)| {
                    convert_scalar(&f.ty, part)
                        .map(|v| (f.name.clone(), v))
                        .map_err(|e| (format!("field {}: {e}", f.name), "conversion"))
                })
                .collect::<Result<_, _>>()
                .map(Value::Struct)
        }
        ParamType::List(elem) => {
            if raw.trim().is_empty() {
                return Ok(Value::List(Vec::new()));
            }
            split_tuple(raw)
                .into_iter()
                .map(|part| convert_scalar(elem, part).map_err(|e| (e, "conversion")))
                .collect::<Result<_, _>>()
                .map(Value::List)
        }
        _ => convert_scalar(ty, raw).map_err(|e| (e, "conversion")),
    }
}

/// Binds a legacy configuration against a schema, reading keys
/// `<prefix>.<name>`. List parameters read the dense suffix-indexed keys
/// `<prefix>.<name>0`, `<prefix>.<name>1`, ... . Missing keys fall back to
/// defaults, and the result is validated before it is returned.
pub fn bind_legacy(
    schema: &ParameterSchema,
    legacy: &LegacyConfig,
    prefix: &str,
) -> Result<ConfigInstance, Diagnostics> {
    bind_legacy_named(schema, legacy, prefix, "<config>")
}

pub fn bind_legacy_named(
    schema: &ParameterSchema,
    legacy: &LegacyConfig,
    prefix: &str,
    origin: &str,
) -> Result<ConfigInstance, Diagnostics> {
    let mut diags = Diagnostics::new();
    let mut values = BTreeMap::new();
    let at = |line: u32| Pos::new(line, 1);

    for p in &schema.params {
        let base = format!("{prefix}.{}", p.legacy_name());
        let bound = match &p.ty {
            ParamType::List(elem) => {
                let indexed: BTreeMap<usize, &LegacyEntry> = legacy
                    .entries
                    .iter()
                    .filter_map(|e| {
                        let suffix = e.key.strip_prefix(&base)?;
                        if suffix.is_empty() || !suffix.bytes().all(|b| b.is_ascii_digit()) {
                            return None;
                        }
                        // `M01` would alias `M1`; only canonical indices count.
                        if suffix.len() > 1 && suffix.starts_with('0') {
                            return None;
                        }
                        Some((suffix.parse().ok()?, e))
                    })
                    .collect();
                if indexed.is_empty() {
                    None
                } else if let Some((gap, _)) = indexed.keys().enumerate().find(|(i, k)| *i != **k) {
                    diags.push(
                        Diagnostic::error("list-gap", format!("list {} is missing key {base}{gap}", p.name))
                            .in_file(origin),
                    );
                    continue;
                } else {
                    let mut items = Vec::new();
                    let mut ok = true;
                    for entry in indexed.values() {
                        match convert_raw(schema, elem, &entry.raw) {
                            Ok(v) => items.push(v),
                            Err((msg, code)) => {
                                ok = false;
                                diags.push(
                                    Diagnostic::error(code, format!("{}: {msg}", entry.key)).at(origin, at(entry.line)),
                                );
                            }
                        }
                    }
                    if !ok {
                        continue;
                    }
                    Some(Value::List(items))
                }
            }
            ty => match legacy.get(&base) {
                None => None,
                Some(entry) => match convert_raw(schema, ty, &entry.raw) {
                    Ok(v) => Some(v),
                    Err((msg, code)) => {
                        diags.push(Diagnostic::error(code, format!("{}: {msg}", entry.key)).at(origin, at(entry.line)));
                        continue;
                    }
                },
            },
        };

        let value = match (bound, &p.default) {
            (Some(v), _) => v,
            (None, Some(d)) => match literal_value(schema, &p.ty, d) {
                Ok(v) => v,
                Err(msg) => {
                    diags.push(Diagnostic::error("invalid-default", format!("{}: {msg}", p.name)).in_file(origin));
                    continue;
                }
            },
            (None, None) if p.optional => continue,
            (None, None) => {
                diags.push(
                    Diagnostic::error("missing-key", format!("missing required key {base}"))
                        .in_file(origin),
                );
                continue;
            }
        };
        values.insert(p.name.clone(), value);
    }

    let instance = ConfigInstance { schema: schema.name.clone(), values };
    for v in validate_config(schema, &instance) {
        let line = legacy
            .get(&format!("{prefix}.{}", schema.param(&v.param).map_or(v.param.as_str(), |p| p.legacy_name())))
            .map(|e| e.line);
        let mut d = Diagnostic::error("range-violation", v.to_string()).in_file(origin);
        if let Some(line) = line {
            d = d.at(origin, at(line));
        }
        diags.push(d);
    }
    diags.into_result(instance)
}
