//! Line-oriented model file format.
//!
//! ```text
//! # two robot types sharing a resource
//! [types]
//! A 2 initial={A}
//! B 1
//!
//! [states]
//! {A}
//! {B}
//! {R} resource=2
//! {A,R}
//! {B,R}
//!
//! [reactions]
//! {A} + {R} <-> {A,R} : 3, 1
//! {B} + {R} <-> {B,R} : 1, 1
//!
//! [query]
//! free = {A} + {B}
//! busy = {A,R} + {B,R}
//!
//! [params]
//! nu = 1e-12
//! ```
//!
//! Multiplicities are written `2*S` or by repeating a state. `0` denotes the
//! empty complex. A type without `initial=` starts in the unique state whose
//! type set is exactly that type.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::crn::{Composition, Crn, QueryGroup, QuerySpec, StateId};
use crate::error::{Error, Result};

/// Scalar analysis parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
}

impl ParamValue {
    pub fn as_f64(self) -> f64 {
        match self {
            ParamValue::Int(i) => i as f64,
            ParamValue::Real(r) => r,
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Real(r) => write!(f, "{r:?}"),
        }
    }
}

/// A parsed and validated model: network, database, query and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub crn: Crn,
    pub composition: Composition,
    pub query: QuerySpec,
    pub params: BTreeMap<String, ParamValue>,
}

impl ModelFile {
    pub fn param_f64(&self, key: &str) -> Option<f64> {
        self.params.get(key).map(|v| v.as_f64())
    }

    pub fn param_u64(&self, key: &str) -> Option<u64> {
        match self.params.get(key)? {
            ParamValue::Int(i) if *i >= 0 => Some(*i as u64),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Types,
    States,
    Reactions,
    Query,
    Params,
}

fn syntax(line: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        message: message.into(),
    }
}

fn invalid(line: usize, message: impl Into<String>) -> Error {
    Error::Validation {
        line: Some(line),
        message: message.into(),
    }
}

struct TypeLine {
    line: usize,
    name: String,
    count: u64,
    initial: Option<String>,
}

struct ReactionLine {
    line: usize,
    lhs: Vec<(String, u32)>,
    rhs: Vec<(String, u32)>,
    reversible: bool,
    rates: Vec<f64>,
}

struct QueryLine {
    line: usize,
    name: String,
    states: Vec<String>,
}

/// Parses and validates a model file.
pub fn parse_spec(text: &str) -> Result<ModelFile> {
    let mut section = Section::None;
    let mut types: Vec<TypeLine> = Vec::new();
    let mut states: Vec<(usize, String, Option<u64>)> = Vec::new();
    let mut reactions: Vec<ReactionLine> = Vec::new();
    let mut queries: Vec<QueryLine> = Vec::new();
    let mut params = BTreeMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if content.starts_with('[') {
            section = match content {
                "[types]" => Section::Types,
                "[states]" => Section::States,
                "[reactions]" => Section::Reactions,
                "[query]" => Section::Query,
                "[params]" => Section::Params,
                other => return Err(syntax(line, format!("unknown section header `{other}`"))),
            };
            continue;
        }
        match section {
            Section::None => return Err(syntax(line, "content before the first section header")),
            Section::Types => types.push(parse_type_line(line, content)?),
            Section::States => {
                let (label, resource) = parse_state_line(line, content)?;
                states.push((line, label, resource));
            }
            Section::Reactions => reactions.push(parse_reaction_line(line, content)?),
            Section::Query => queries.push(parse_query_line(line, content)?),
            Section::Params => {
                let (k, v) = parse_param_line(line, content)?;
                if params.insert(k.clone(), v).is_some() {
                    return Err(invalid(line, format!("duplicate parameter `{k}`")));
                }
            }
        }
    }

    let mut builder = Crn::builder();
    let mut resource_counts = IndexMap::new();
    for (line, label, resource) in &states {
        builder.add_state(label.clone()).map_err(|e| relocate(e, *line))?;
        if let Some(count) = resource {
            resource_counts.insert(label.clone(), *count);
        }
    }

    let mut type_counts = IndexMap::new();
    for t in &types {
        if type_counts.insert(t.name.clone(), t.count).is_some() {
            return Err(invalid(t.line, format!("duplicate type `{}`", t.name)));
        }
        if let Some(initial) = &t.initial {
            if builder.state_id(initial).is_none() {
                return Err(invalid(t.line, format!("unknown state `{initial}`")));
            }
        }
        builder.add_type(t.name.clone(), t.initial.as_deref());
    }

    let resolve = |line: usize, terms: &[(String, u32)], builder: &crate::crn::CrnBuilder| {
        terms
            .iter()
            .map(|(label, m)| {
                builder
                    .state_id(label)
                    .map(|id| (id, *m))
                    .ok_or_else(|| invalid(line, format!("unknown state `{label}`")))
            })
            .collect::<Result<Vec<(StateId, u32)>>>()
    };
    for r in &reactions {
        let lhs = resolve(r.line, &r.lhs, &builder)?;
        let rhs = resolve(r.line, &r.rhs, &builder)?;
        if r.reversible {
            builder
                .add_reversible(&lhs, &rhs, r.rates[0], r.rates[1])
                .map_err(|e| relocate(e, r.line))?;
        } else {
            builder
                .add_reaction(&lhs, &rhs, r.rates[0])
                .map_err(|e| relocate(e, r.line))?;
        }
    }
    let crn = builder.build().map_err(|e| match e {
        Error::MissingInitialState(name) => {
            let line = types.iter().find(|t| t.name == name).map_or(0, |t| t.line);
            invalid(line, format!("type `{name}` has no initial state declaration"))
        }
        other => other,
    })?;

    for t in &types {
        if !crn.states().iter().any(|s| s.types().contains(&t.name)) {
            return Err(invalid(
                t.line,
                format!("type `{}` does not appear in any state label", t.name),
            ));
        }
    }

    let mut groups = Vec::with_capacity(queries.len());
    for q in &queries {
        if groups.iter().any(|g: &QueryGroup| g.name == q.name) {
            return Err(invalid(q.line, format!("duplicate query component `{}`", q.name)));
        }
        let states = q
            .states
            .iter()
            .map(|label| {
                crn.state_id(label)
                    .ok_or_else(|| invalid(q.line, format!("unknown state `{label}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        groups.push(QueryGroup {
            name: q.name.clone(),
            states,
        });
    }
    let query = QuerySpec::new(groups, crn.n_states()).map_err(|e| {
        let line = queries.last().map_or(0, |q| q.line);
        relocate(e, line)
    })?;

    Ok(ModelFile {
        crn,
        composition: Composition::new(type_counts, resource_counts),
        query,
        params,
    })
}

fn relocate(e: Error, line: usize) -> Error {
    match e {
        Error::Validation { line: None, message } => Error::Validation {
            line: Some(line),
            message,
        },
        other => other,
    }
}

fn parse_count(line: usize, s: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| syntax(line, format!("expected a non-negative integer, found `{s}`")))
}

fn parse_number(line: usize, s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| syntax(line, format!("expected a number, found `{}`", s.trim())))
}

fn parse_type_line(line: usize, content: &str) -> Result<TypeLine> {
    let fields: Vec<&str> = content.split_whitespace().collect();
    if fields.len() < 2 || fields.len() > 3 {
        return Err(syntax(line, "expected `name count [initial=<state>]`"));
    }
    let initial = match fields.get(2) {
        Some(f) => Some(
            f.strip_prefix("initial=")
                .filter(|s| !s.is_empty())
                .ok_or_else(|| syntax(line, format!("unexpected attribute `{f}`")))?
                .to_owned(),
        ),
        None => None,
    };
    Ok(TypeLine {
        line,
        name: fields[0].to_owned(),
        count: parse_count(line, fields[1])?,
        initial,
    })
}

fn parse_state_line(line: usize, content: &str) -> Result<(String, Option<u64>)> {
    let fields: Vec<&str> = content.split_whitespace().collect();
    match fields.as_slice() {
        [label] => Ok(((*label).to_owned(), None)),
        [label, attr] => {
            let count = attr
                .strip_prefix("resource=")
                .ok_or_else(|| syntax(line, format!("unexpected attribute `{attr}`")))?;
            Ok(((*label).to_owned(), Some(parse_count(line, count)?)))
        }
        _ => Err(syntax(line, "expected `label [resource=<count>]`")),
    }
}

fn parse_complex(line: usize, side: &str) -> Result<Vec<(String, u32)>> {
    let side = side.trim();
    if side == "0" || side == "∅" {
        return Ok(Vec::new());
    }
    let mut terms: Vec<(String, u32)> = Vec::new();
    for term in side.split('+') {
        let term = term.trim();
        if term.is_empty() {
            return Err(syntax(line, "empty term in complex"));
        }
        let (mult, label) = match term.split_once('*') {
            Some((m, l)) => {
                let m = m
                    .trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|m| *m > 0)
                    .ok_or_else(|| syntax(line, format!("invalid multiplicity in `{term}`")))?;
                (m, l.trim())
            }
            None => (1, term),
        };
        if label.is_empty() || label.contains(char::is_whitespace) {
            return Err(syntax(line, format!("invalid state reference `{term}`")));
        }
        match terms.iter_mut().find(|(l, _)| l == label) {
            Some((_, m)) => *m += mult,
            None => terms.push((label.to_owned(), mult)),
        }
    }
    Ok(terms)
}

fn parse_reaction_line(line: usize, content: &str) -> Result<ReactionLine> {
    let (equation, rates) = content
        .split_once(':')
        .ok_or_else(|| syntax(line, "expected `lhs -> rhs : k` or `lhs <-> rhs : kf, kb`"))?;
    let (lhs, rhs, reversible) = if let Some((l, r)) = equation.split_once("<->") {
        (l, r, true)
    } else if let Some((l, r)) = equation.split_once("->") {
        (l, r, false)
    } else {
        return Err(syntax(line, "missing `->` or `<->`"));
    };
    let rates = rates
        .split(',')
        .map(|s| parse_number(line, s))
        .collect::<Result<Vec<f64>>>()?;
    let expected = if reversible { 2 } else { 1 };
    if rates.len() != expected {
        return Err(syntax(
            line,
            format!("expected {expected} rate constant(s), found {}", rates.len()),
        ));
    }
    if let Some(k) = rates.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(invalid(
            line,
            format!("rate constant must be finite and positive, got {k}"),
        ));
    }
    Ok(ReactionLine {
        line,
        lhs: parse_complex(line, lhs)?,
        rhs: parse_complex(line, rhs)?,
        reversible,
        rates,
    })
}

fn parse_query_line(line: usize, content: &str) -> Result<QueryLine> {
    let (name, rhs) = content
        .split_once('=')
        .ok_or_else(|| syntax(line, "expected `name = S1 + S2`"))?;
    let name = name.trim();
    if name.is_empty() || name.contains(char::is_whitespace) {
        return Err(syntax(line, "invalid query component name"));
    }
    let rhs = rhs.trim();
    let states = if rhs.is_empty() {
        Vec::new()
    } else {
        rhs.split('+')
            .map(|s| {
                let s = s.trim();
                if s.is_empty() || s.contains(char::is_whitespace) {
                    Err(syntax(line, "invalid state reference in query"))
                } else {
                    Ok(s.to_owned())
                }
            })
            .collect::<Result<Vec<_>>>()?
    };
    Ok(QueryLine {
        line,
        name: name.to_owned(),
        states,
    })
}

fn parse_param_line(line: usize, content: &str) -> Result<(String, ParamValue)> {
    let (k, v) = content
        .split_once('=')
        .ok_or_else(|| syntax(line, "expected `key = value`"))?;
    let (k, v) = (k.trim(), v.trim());
    if k.is_empty() || k.contains(char::is_whitespace) {
        return Err(syntax(line, "invalid parameter name"));
    }
    let value = if let Ok(i) = v.parse::<i64>() {
        ParamValue::Int(i)
    } else {
        ParamValue::Real(parse_number(line, v)?)
    };
    Ok((k.to_owned(), value))
}

fn write_complex(out: &mut String, crn: &Crn, complex: usize) {
    let c = &crn.complexes()[complex];
    let mut first = true;
    for (s, m) in c.support() {
        if !first {
            out.push_str(" + ");
        }
        first = false;
        if m > 1 {
            let _ = write!(out, "{m}*");
        }
        out.push_str(crn.states()[s].label());
    }
    if first {
        out.push('0');
    }
}

/// Canonical text form; `parse_spec(&serialize_spec(m)) == m`.
pub fn serialize_spec(model: &ModelFile) -> String {
    let crn = &model.crn;
    let mut out = String::new();
    out.push_str("[types]\n");
    for t in crn.types() {
        let _ = writeln!(
            out,
            "{} {} initial={}",
            t.name,
            model.composition.count(&t.name),
            crn.states()[t.initial].label()
        );
    }
    out.push_str("\n[states]\n");
    for s in crn.states() {
        out.push_str(s.label());
        if let Some(r) = model.composition.resource_counts.get(s.label()) {
            let _ = write!(out, " resource={r}");
        }
        out.push('\n');
    }
    out.push_str("\n[reactions]\n");
    let reactions = crn.reactions();
    let mut l = 0;
    while l < reactions.len() {
        let r = &reactions[l];
        write_complex(&mut out, crn, r.source);
        let paired = reactions
            .get(l + 1)
            .is_some_and(|n| n.source == r.target && n.target == r.source);
        if paired {
            out.push_str(" <-> ");
            write_complex(&mut out, crn, r.target);
            let _ = writeln!(out, " : {:?}, {:?}", r.rate, reactions[l + 1].rate);
            l += 2;
        } else {
            out.push_str(" -> ");
            write_complex(&mut out, crn, r.target);
            let _ = writeln!(out, " : {:?}", r.rate);
            l += 1;
        }
    }
    if !model.query.is_empty() {
        out.push_str("\n[query]\n");
        for g in model.query.groups() {
            let _ = write!(out, "{} =", g.name);
            for (i, &s) in g.states.iter().enumerate() {
                out.push_str(if i == 0 { " " } else { " + " });
                out.push_str(crn.states()[s].label());
            }
            out.push('\n');
        }
    }
    if !model.params.is_empty() {
        out.push_str("\n[params]\n");
        for (k, v) in &model.params {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    out
}
