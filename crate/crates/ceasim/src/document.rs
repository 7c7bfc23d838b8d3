//! Sectioned model documents.
//!
//! A document is one text file that declares a complete model: parameters,
//! survival distributions, state values, per-strategy transitions, and run
//! settings, plus optional sensitivity and population sections. The format
//! is line-oriented: `[section]` headers, `key = value` entries, and `#`
//! comment lines. Expressions are double-quoted strings handed verbatim to
//! the expression parser, so the whole expression grammar lives in one place.
//!
//! ```text
//! [parameters]
//! p_death = "0.05"
//! p_sick  = "rescale_prob(0.3, from = 2)"
//!
//! [states.well]
//! cost = "100"
//! utility = "1"
//!
//! [states.sick]
//! cost = "1000 + 200 * state_time"
//! utility = "0.5"
//!
//! [transition.care]
//! row.well = "C", "p_sick"
//! row.sick = "0.1", "C"
//!
//! [strategies]
//! order = care
//!
//! [run]
//! cycles = 10
//! cost = cost
//! effect = utility
//! ```
//!
//! `load_model` parses every expression and resolves every cross-reference
//! eagerly, so a document that loads will not fail later for structural
//! reasons. Every diagnostic carries the file, the section and key it points
//! at, and the byte offset of the offending line.

use std::collections::HashSet;
use std::error::Error;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use crate::expr::{parse_expression, Arg, Expr, UnaryOp};
use crate::lifetable::LifeTable;
use crate::model::{
    CountingMethod, ModelError, ModelSpec, StateSpec, StrategySpec, TransitionEntry,
    TransitionSpec, TunnelLimits,
};
use crate::params::{
    ParameterDefinition, ParameterSet, SurvivalExtraction, SurvivalRegistry, SurvivalTemplate,
    TimeAxis,
};
use crate::survival::SurvivalData;
use crate::uncertainty::{DsaEntry, DsaSpec, Marginal, PopulationTable, PsaSpec};

/// A located diagnostic: file, section, key, and the byte offset of the line
/// the problem was found on.
#[derive(Debug, Clone)]
pub struct DocumentError {
    pub file: PathBuf,
    pub section: Option<String>,
    pub key: Option<String>,
    /// Byte offset of the start of the offending line.
    pub offset: usize,
    pub message: String,
}

impl fmt::Display for DocumentError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.file.display(), self.offset)?;
        if let Some(section) = &self.section {
            write!(f, ": [{section}]")?;
            if let Some(key) = &self.key {
                write!(f, " {key}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl Error for DocumentError {}

/// Everything a document can declare: the model itself plus the optional
/// analysis inputs that commands pick up when present.
#[derive(Debug, Clone)]
pub struct LoadedModel {
    pub spec: ModelSpec,
    pub dsa: Option<DsaSpec>,
    pub psa: Option<PsaSpec>,
    pub population: Option<PopulationTable>,
    pub lifetable: Option<LifeTable>,
}

/// Reads and assembles a model document. File references (survival data,
/// life tables, population tables) resolve relative to the document's
/// directory.
pub fn load_model(path: impl AsRef<Path>) -> Result<LoadedModel, DocumentError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DocumentError {
        file: path.to_path_buf(),
        section: None,
        key: None,
        offset: 0,
        message: format!("cannot read model document: {e}"),
    })?;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    assemble(path, &dir, &text)
}

// ---------------------------------------------------------------------------
// Raw pass: lines -> sections of (key, value) entries, all offsets recorded.

#[derive(Debug)]
struct RawEntry {
    key: String,
    value: String,
    offset: usize,
}

#[derive(Debug)]
struct RawSection {
    name: String,
    offset: usize,
    entries: Vec<RawEntry>,
}

fn is_word(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Words joined by single dots: `run`, `states.well`, `row.well`.
fn is_dotted_word(s: &str) -> bool {
    !s.is_empty() && s.split('.').all(is_word)
}

fn parse_document(file: &Path, text: &str) -> Result<Vec<RawSection>, DocumentError> {
    let fail = |offset: usize, message: String| DocumentError {
        file: file.to_path_buf(),
        section: None,
        key: None,
        offset,
        message,
    };
    let mut sections: Vec<RawSection> = Vec::new();
    let mut seen = HashSet::new();
    let mut offset = 0usize;
    for raw_line in text.split('\n') {
        let line_offset = offset;
        offset += raw_line.len() + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(fail(line_offset, format!("malformed section header `{line}`")));
            };
            let name = name.trim();
            if !is_dotted_word(name) {
                return Err(fail(line_offset, format!("bad section name `{name}`")));
            }
            if !seen.insert(name.to_string()) {
                return Err(fail(line_offset, format!("section [{name}] appears twice")));
            }
            sections.push(RawSection {
                name: name.to_string(),
                offset: line_offset,
                entries: Vec::new(),
            });
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(fail(line_offset, format!("expected `key = value`, got `{line}`")));
        };
        let key = line[..eq].trim();
        let value = line[eq + 1..].trim();
        if !is_dotted_word(key) {
            return Err(fail(line_offset, format!("bad key `{key}`")));
        }
        if value.is_empty() || value.starts_with('=') {
            return Err(fail(line_offset, format!("key `{key}` has no value")));
        }
        let Some(section) = sections.last_mut() else {
            return Err(fail(
                line_offset,
                format!("`{key}` appears before any [section] header"),
            ));
        };
        section.entries.push(RawEntry {
            key: key.to_string(),
            value: value.to_string(),
            offset: line_offset,
        });
    }
    Ok(sections)
}

// ---------------------------------------------------------------------------
// Value interpreters. Each borrows a context so diagnostics stay located.

#[derive(Clone, Copy)]
struct Ctx<'a> {
    file: &'a Path,
    section: &'a str,
}

impl<'a> Ctx<'a> {
    fn fail(&self, key: Option<&str>, offset: usize, message: impl Into<String>) -> DocumentError {
        DocumentError {
            file: self.file.to_path_buf(),
            section: Some(self.section.to_string()),
            key: key.map(str::to_string),
            offset,
            message: message.into(),
        }
    }

    fn at(&self, entry: &RawEntry, message: impl Into<String>) -> DocumentError {
        self.fail(Some(&entry.key), entry.offset, message)
    }
}

fn quoted<'v>(ctx: Ctx, entry: &'v RawEntry) -> Result<&'v str, DocumentError> {
    let v = entry.value.as_str();
    if v.len() >= 2 && v.starts_with('"') && v.ends_with('"') {
        let inner = &v[1..v.len() - 1];
        if !inner.contains('"') {
            return Ok(inner);
        }
    }
    Err(ctx.at(entry, format!("expected one double-quoted string, got `{v}`")))
}

fn expr_value(ctx: Ctx, entry: &RawEntry) -> Result<Expr, DocumentError> {
    let src = quoted(ctx, entry)?;
    parse_expression(src).map_err(|e| ctx.at(entry, format!("in expression `{src}`: {e}")))
}

fn parse_number(ctx: Ctx, entry: &RawEntry, part: &str) -> Result<f64, DocumentError> {
    let n: f64 = part
        .trim()
        .parse()
        .map_err(|_| ctx.at(entry, format!("expected a number, got `{}`", part.trim())))?;
    if !n.is_finite() {
        return Err(ctx.at(entry, format!("number `{}` is not finite", part.trim())));
    }
    Ok(n)
}

fn number_value(ctx: Ctx, entry: &RawEntry) -> Result<f64, DocumentError> {
    parse_number(ctx, entry, &entry.value)
}

fn number_list(ctx: Ctx, entry: &RawEntry) -> Result<Vec<f64>, DocumentError> {
    entry.value.split(',').map(|part| parse_number(ctx, entry, part)).collect()
}

fn usize_value(ctx: Ctx, entry: &RawEntry) -> Result<usize, DocumentError> {
    entry
        .value
        .parse()
        .map_err(|_| ctx.at(entry, format!("expected a whole number, got `{}`", entry.value)))
}

fn bool_value(ctx: Ctx, entry: &RawEntry) -> Result<bool, DocumentError> {
    match entry.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(ctx.at(entry, format!("expected `true` or `false`, got `{other}`"))),
    }
}

fn word_value(ctx: Ctx, entry: &RawEntry) -> Result<String, DocumentError> {
    let v = entry.value.as_str();
    if is_word(v) {
        Ok(v.to_string())
    } else {
        Err(ctx.at(entry, format!("expected a name, got `{v}`")))
    }
}

fn word_list(ctx: Ctx, entry: &RawEntry) -> Result<Vec<String>, DocumentError> {
    entry
        .value
        .split(',')
        .map(|part| {
            let part = part.trim();
            if is_word(part) {
                Ok(part.to_string())
            } else {
                Err(ctx.at(entry, format!("expected a comma-separated list of names, got `{part}`")))
            }
        })
        .collect()
}

/// `"a", "b", "c"` — commas inside the quotes belong to the entry.
fn quoted_list(ctx: Ctx, entry: &RawEntry) -> Result<Vec<String>, DocumentError> {
    let bad = |m: &str| ctx.at(entry, format!("{m} (expected `\"a\", \"b\", ...`)"));
    let mut out = Vec::new();
    let mut rest = entry.value.trim_start();
    loop {
        let Some(tail) = rest.strip_prefix('"') else {
            return Err(bad("expected a double-quoted entry"));
        };
        let Some(end) = tail.find('"') else {
            return Err(bad("unterminated quote"));
        };
        out.push(tail[..end].to_string());
        rest = tail[end + 1..].trim_start();
        if rest.is_empty() {
            break;
        }
        let Some(after) = rest.strip_prefix(',') else {
            return Err(bad("expected `,` between entries"));
        };
        rest = after.trim_start();
    }
    Ok(out)
}

fn resolve(dir: &Path, value: &str) -> PathBuf {
    let p = Path::new(value);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

// ---------------------------------------------------------------------------
// Parameter definitions: a top-level compute_surv call becomes a survival
// extraction; anywhere deeper it is rejected here rather than at run time.

fn literal_number(expr: &Expr) -> Option<f64> {
    match expr {
        Expr::Number(v) => Some(*v),
        Expr::Unary { op: UnaryOp::Neg, operand } => match operand.as_ref() {
            Expr::Number(v) => Some(-v),
            _ => None,
        },
        _ => None,
    }
}

fn contains_call(expr: &Expr, target: &str) -> bool {
    match expr {
        Expr::Number(_) | Expr::Ident(_) => false,
        Expr::Unary { operand, .. } => contains_call(operand, target),
        Expr::Binary { lhs, rhs, .. } => contains_call(lhs, target) || contains_call(rhs, target),
        Expr::Call { name, args } => {
            name == target || args.iter().any(|a| contains_call(&a.value, target))
        }
    }
}

fn to_definition(
    ctx: Ctx,
    entry: &RawEntry,
    expr: Expr,
) -> Result<ParameterDefinition, DocumentError> {
    if let Expr::Call { name, args } = &expr {
        if name == "compute_surv" {
            return survival_extraction(ctx, entry, args).map(ParameterDefinition::Survival);
        }
    }
    if contains_call(&expr, "compute_surv") {
        return Err(ctx.at(entry, "compute_surv must be the entire parameter definition"));
    }
    Ok(ParameterDefinition::Expr(expr))
}

/// `compute_surv(<distribution>, <model_time|state_time>[, cycle_length][, km_limit])`;
/// the trailing two may be named and must be number literals.
fn survival_extraction(
    ctx: Ctx,
    entry: &RawEntry,
    args: &[Arg],
) -> Result<SurvivalExtraction, DocumentError> {
    let usage =
        "usage: compute_surv(<distribution>, <model_time|state_time>[, cycle_length][, km_limit])";
    let bad = |m: String| ctx.at(entry, format!("{m}; {usage}"));
    if args.len() < 2 || args.len() > 4 {
        return Err(bad(format!("compute_surv takes 2 to 4 arguments, got {}", args.len())));
    }
    let distribution = match &args[0] {
        Arg { name: None, value: Expr::Ident(name) } => name.clone(),
        _ => return Err(bad("the first argument must name a survival declaration".into())),
    };
    let time = match &args[1] {
        Arg { name: None, value: Expr::Ident(axis) } if axis == "model_time" => TimeAxis::ModelTime,
        Arg { name: None, value: Expr::Ident(axis) } if axis == "state_time" => TimeAxis::StateTime,
        _ => return Err(bad("the second argument must be model_time or state_time".into())),
    };
    let mut extraction = SurvivalExtraction::new(distribution, time);
    let mut named_seen = HashSet::new();
    for (i, arg) in args.iter().enumerate().skip(2) {
        let slot = match arg.name.as_deref() {
            Some("cycle_length") | Some("km_limit") => arg.name.as_deref().unwrap(),
            Some(other) => return Err(bad(format!("unknown argument name `{other}`"))),
            // positional: third is cycle_length, fourth is km_limit
            None => {
                if i == 2 {
                    "cycle_length"
                } else {
                    "km_limit"
                }
            }
        };
        if !named_seen.insert(slot) {
            return Err(bad(format!("`{slot}` given twice")));
        }
        let Some(v) = literal_number(&arg.value) else {
            return Err(bad(format!("`{slot}` must be a number literal")));
        };
        match slot {
            "cycle_length" => {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(bad(format!("cycle_length must be positive, got {v}")));
                }
                extraction.cycle_length = v;
            }
            _ => {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(bad(format!("km_limit must be at least 0, got {v}")));
                }
                extraction.km_limit = Some(v);
            }
        }
    }
    Ok(extraction)
}

// ---------------------------------------------------------------------------
// Assembly.

fn assemble(file: &Path, dir: &Path, text: &str) -> Result<LoadedModel, DocumentError> {
    let sections = parse_document(file, text)?;
    let top_fail = |offset: usize, message: String| DocumentError {
        file: file.to_path_buf(),
        section: None,
        key: None,
        offset,
        message,
    };

    let mut params_s: Option<&RawSection> = None;
    let mut survival_s: Vec<(&str, &RawSection)> = Vec::new();
    let mut states_s: Vec<(&str, &RawSection)> = Vec::new();
    let mut transitions_s: Vec<(&str, &RawSection)> = Vec::new();
    let mut strategies_s: Option<&RawSection> = None;
    let mut run_s: Option<&RawSection> = None;
    let mut dsa_s: Option<&RawSection> = None;
    let mut psa_s: Option<&RawSection> = None;
    let mut population_s: Option<&RawSection> = None;
    for s in &sections {
        let (head, tail) = match s.name.split_once('.') {
            Some((head, tail)) => (head, Some(tail)),
            None => (s.name.as_str(), None),
        };
        match (head, tail) {
            ("parameters", None) => params_s = Some(s),
            ("strategies", None) => strategies_s = Some(s),
            ("run", None) => run_s = Some(s),
            ("dsa", None) => dsa_s = Some(s),
            ("psa", None) => psa_s = Some(s),
            ("population", None) => population_s = Some(s),
            ("survival" | "states" | "transition", None) => {
                return Err(top_fail(
                    s.offset,
                    format!("[{0}] needs a name: [{0}.<name>]", s.name),
                ));
            }
            ("survival", Some(name)) if is_word(name) => survival_s.push((name, s)),
            ("states", Some(name)) if is_word(name) => states_s.push((name, s)),
            ("transition", Some(name)) if is_word(name) => transitions_s.push((name, s)),
            ("survival" | "states" | "transition", Some(name)) => {
                return Err(top_fail(s.offset, format!("bad name `{name}` in [{}]", s.name)));
            }
            _ => return Err(top_fail(s.offset, format!("unknown section [{}]", s.name))),
        }
    }
    let missing =
        |name: &str| top_fail(0, format!("missing required section [{name}]"));
    let params_s = params_s.ok_or_else(|| missing("parameters"))?;
    let strategies_s = strategies_s.ok_or_else(|| missing("strategies"))?;
    let run_s = run_s.ok_or_else(|| missing("run"))?;

    // [parameters]
    let pctx = Ctx { file, section: "parameters" };
    let mut defs = Vec::new();
    let mut seen = HashSet::new();
    for entry in &params_s.entries {
        if entry.key.contains('.') {
            return Err(pctx.at(entry, "parameter names cannot contain `.`"));
        }
        if !seen.insert(entry.key.as_str()) {
            return Err(pctx.at(entry, "duplicate parameter"));
        }
        let expr = expr_value(pctx, entry)?;
        defs.push((entry.key.clone(), to_definition(pctx, entry, expr)?));
    }

    // [survival.<name>]
    let mut templates = Vec::new();
    for (name, s) in &survival_s {
        let ctx = Ctx { file, section: &s.name };
        let mut family: Option<String> = None;
        let mut data: Option<SurvivalData> = None;
        let mut km_limit: Option<(f64, usize)> = None;
        let mut args: Vec<(String, Expr)> = Vec::new();
        let mut seen = HashSet::new();
        for entry in &s.entries {
            if !seen.insert(entry.key.as_str()) {
                return Err(ctx.at(entry, "duplicate key"));
            }
            match entry.key.as_str() {
                "family" => family = Some(word_value(ctx, entry)?),
                "data" => {
                    let path = resolve(dir, &entry.value);
                    data = Some(
                        SurvivalData::from_csv(&path).map_err(|e| ctx.at(entry, e.to_string()))?,
                    );
                }
                "km_limit" => km_limit = Some((number_value(ctx, entry)?, entry.offset)),
                _ => {
                    if entry.key.contains('.') {
                        return Err(ctx.at(entry, "argument names cannot contain `.`"));
                    }
                    if family.is_none() {
                        return Err(ctx.at(
                            entry,
                            "distribution arguments must follow a `family` key",
                        ));
                    }
                    args.push((entry.key.clone(), expr_value(ctx, entry)?));
                }
            }
        }
        if family.is_none() && data.is_none() {
            return Err(ctx.fail(None, s.offset, "declares neither a `family` nor `data`"));
        }
        if let Some((k, offset)) = km_limit {
            if !(k >= 0.0) || !k.is_finite() {
                return Err(ctx.fail(Some("km_limit"), offset, format!("must be at least 0, got {k}")));
            }
            if k > 0.0 && (family.is_none() || data.is_none()) {
                return Err(ctx.fail(
                    Some("km_limit"),
                    offset,
                    "a join point needs both a `family` and `data`",
                ));
            }
        }
        let mut template = match family {
            Some(f) => SurvivalTemplate::parametric(f, args),
            None => SurvivalTemplate::from_data(data.take().expect("checked above")),
        };
        if let Some(d) = data {
            template = template.with_data(d);
        }
        if let Some((k, _)) = km_limit {
            template = template.with_km_limit(k);
        }
        templates.push((name.to_string(), template));
    }
    let surv_offset = survival_s.first().map(|(_, s)| s.offset).unwrap_or(0);
    let registry = SurvivalRegistry::new(templates).map_err(|e| DocumentError {
        file: file.to_path_buf(),
        section: Some("survival".to_string()),
        key: None,
        offset: surv_offset,
        message: e.to_string(),
    })?;
    let parameters = ParameterSet::new(defs, registry)
        .map_err(|e| pctx.fail(None, params_s.offset, e.to_string()))?;

    // [states.<name>]
    let mut state_values: Vec<(&str, &RawSection, Vec<(String, Expr)>)> = Vec::new();
    for (name, s) in &states_s {
        let ctx = Ctx { file, section: &s.name };
        let mut values = Vec::new();
        let mut seen = HashSet::new();
        for entry in &s.entries {
            if entry.key.contains('.') {
                return Err(ctx.at(entry, "value names cannot contain `.`"));
            }
            if !seen.insert(entry.key.as_str()) {
                return Err(ctx.at(entry, "duplicate value"));
            }
            values.push((entry.key.clone(), expr_value(ctx, entry)?));
        }
        state_values.push((name, s, values));
    }

    // [transition.<strategy>]
    let mut transitions: Vec<(&str, &RawSection, TransitionSpec)> = Vec::new();
    for (name, s) in &transitions_s {
        let ctx = Ctx { file, section: &s.name };
        let mut order: Vec<String> = Vec::new();
        let mut rows: Vec<(&RawEntry, Vec<TransitionEntry>)> = Vec::new();
        let mut seen = HashSet::new();
        for entry in &s.entries {
            let Some(state) = entry.key.strip_prefix("row.") else {
                return Err(ctx.at(entry, "transition keys must look like `row.<state>`"));
            };
            if !is_word(state) {
                return Err(ctx.at(entry, format!("bad state name `{state}`")));
            }
            if !seen.insert(state) {
                return Err(ctx.at(entry, "duplicate row"));
            }
            let mut cells = Vec::new();
            for cell in quoted_list(ctx, entry)? {
                let cell = cell.trim();
                if cell == "C" {
                    cells.push(TransitionEntry::Complement);
                } else {
                    let expr = parse_expression(cell)
                        .map_err(|e| ctx.at(entry, format!("in entry `{cell}`: {e}")))?;
                    cells.push(TransitionEntry::Expr(expr));
                }
            }
            order.push(state.to_string());
            rows.push((entry, cells));
        }
        let n = order.len();
        let mut entries = Vec::with_capacity(n * n);
        for (entry, cells) in rows {
            if cells.len() != n {
                return Err(ctx.at(
                    entry,
                    format!("row has {} entries, expected {n} (one per state)", cells.len()),
                ));
            }
            entries.extend(cells);
        }
        let spec = TransitionSpec::new(order, entries)
            .map_err(|e| ctx.fail(None, s.offset, e.to_string()))?;
        transitions.push((name, s, spec));
    }

    // [strategies]
    let sctx = Ctx { file, section: "strategies" };
    let mut order_entry: Option<&RawEntry> = None;
    for entry in &strategies_s.entries {
        match entry.key.as_str() {
            "order" if order_entry.is_some() => {
                return Err(sctx.at(entry, "`order` given twice"));
            }
            "order" => order_entry = Some(entry),
            _ => return Err(sctx.at(entry, "the only [strategies] key is `order`")),
        }
    }
    let order_entry = order_entry
        .ok_or_else(|| sctx.fail(None, strategies_s.offset, "missing the `order` key"))?;
    let order = word_list(sctx, order_entry)?;
    let mut seen = HashSet::new();
    for name in &order {
        if !seen.insert(name.as_str()) {
            return Err(sctx.at(order_entry, format!("duplicate strategy `{name}`")));
        }
        if !transitions.iter().any(|(t, _, _)| t == name) {
            return Err(sctx.at(order_entry, format!("no [transition.{name}] section")));
        }
    }
    for (name, s, _) in &transitions {
        if !order.iter().any(|o| o == name) {
            return Err(top_fail(
                s.offset,
                format!("[transition.{name}] is not listed in [strategies]"),
            ));
        }
    }

    // Per-strategy assembly; all strategies share the state list and values.
    let first_states = transitions[0].2.states().to_vec();
    for (name, s, spec) in &transitions {
        if spec.states() != first_states.as_slice() {
            return Err(top_fail(
                s.offset,
                format!(
                    "[transition.{name}] does not use the same ordered state list as [transition.{}]",
                    transitions[0].0
                ),
            ));
        }
    }
    for (name, s, _) in &state_values {
        if !first_states.iter().any(|st| st == name) {
            return Err(top_fail(
                s.offset,
                format!("state `{name}` is not in the transition matrix"),
            ));
        }
    }
    let mut strategies = Vec::new();
    for name in &order {
        let (_, ts, tspec) = transitions.iter().find(|(t, _, _)| t == name).expect("checked");
        let mut states = Vec::with_capacity(first_states.len());
        for state in &first_states {
            let Some((_, _, values)) = state_values.iter().find(|(n, _, _)| n == state) else {
                return Err(top_fail(ts.offset, format!("state `{state}` has no [states.{state}] section")));
            };
            states.push((state.clone(), StateSpec::new(values.clone())));
        }
        let strategy = StrategySpec::new(name.clone(), tspec.clone(), states).map_err(|e| {
            // anchor value-set mismatches at the offending states section
            let offset = match &e {
                ModelError::ValueSetMismatch { state, .. } => state_values
                    .iter()
                    .find(|(n, _, _)| n == state)
                    .map(|(_, s, _)| s.offset)
                    .unwrap_or(ts.offset),
                _ => ts.offset,
            };
            top_fail(offset, e.to_string())
        })?;
        strategies.push(strategy);
    }
    let value_names: Vec<&str> =
        state_values.first().map(|(_, _, v)| v.iter().map(|(n, _)| n.as_str()).collect()).unwrap_or_default();

    // [run]
    let rctx = Ctx { file, section: "run" };
    let mut cycles: Option<usize> = None;
    let mut cost: Option<&RawEntry> = None;
    let mut effect: Option<&RawEntry> = None;
    let mut method = CountingMethod::default();
    let mut init: Option<Vec<f64>> = None;
    let mut inflow: Vec<(String, Expr)> = Vec::new();
    let mut limits = TunnelLimits::none();
    let mut discount_first_cycle = true;
    let mut lifetable: Option<LifeTable> = None;
    let mut seen = HashSet::new();
    for entry in &run_s.entries {
        if !seen.insert(entry.key.as_str()) {
            return Err(rctx.at(entry, "duplicate key"));
        }
        match entry.key.as_str() {
            "cycles" => {
                let n = usize_value(rctx, entry)?;
                if n == 0 {
                    return Err(rctx.at(entry, "cycle count must be at least 1"));
                }
                cycles = Some(n);
            }
            "cost" => cost = Some(entry),
            "effect" => effect = Some(entry),
            "method" => {
                method = CountingMethod::parse(&entry.value).ok_or_else(|| {
                    rctx.at(
                        entry,
                        format!(
                            "unknown counting method `{}` (expected start, end, or life-table)",
                            entry.value
                        ),
                    )
                })?;
            }
            "init" => {
                let counts = number_list(rctx, entry)?;
                if counts.len() != first_states.len() {
                    return Err(rctx.at(
                        entry,
                        format!(
                            "init needs {} counts (one per state), got {}",
                            first_states.len(),
                            counts.len()
                        ),
                    ));
                }
                if let Some(bad) = counts.iter().find(|c| **c < 0.0) {
                    return Err(rctx.at(entry, format!("init counts cannot be negative, got {bad}")));
                }
                init = Some(counts);
            }
            "state_cycle_limit" => {
                let limit = usize_value(rctx, entry)?;
                if limit == 0 {
                    return Err(rctx.at(entry, "state_cycle_limit must be at least 1"));
                }
                limits.global = Some(limit);
            }
            "discount_first_cycle" => discount_first_cycle = bool_value(rctx, entry)?,
            "lifetable" => {
                let path = resolve(dir, &entry.value);
                lifetable =
                    Some(LifeTable::load(&path).map_err(|e| rctx.at(entry, e.to_string()))?);
            }
            key => {
                if let Some(state) = key.strip_prefix("inflow.") {
                    if !first_states.iter().any(|s| s == state) {
                        return Err(rctx.at(entry, format!("inflow names unknown state `{state}`")));
                    }
                    let expr = expr_value(rctx, entry)?;
                    let mut uses_state_time = false;
                    expr.visit_idents(&mut |name| uses_state_time |= name == "state_time");
                    if uses_state_time {
                        return Err(rctx.at(
                            entry,
                            "inflow cannot reference state_time; new entrants have no dwell time",
                        ));
                    }
                    inflow.push((state.to_string(), expr));
                } else if let Some(state) = key.strip_prefix("state_cycle_limit.") {
                    if !first_states.iter().any(|s| s == state) {
                        return Err(rctx.at(
                            entry,
                            format!("state_cycle_limit names unknown state `{state}`"),
                        ));
                    }
                    let limit = usize_value(rctx, entry)?;
                    if limit == 0 {
                        return Err(rctx.at(entry, "state_cycle_limit must be at least 1"));
                    }
                    limits.per_state.insert(state.to_string(), limit);
                } else {
                    return Err(rctx.at(entry, format!("unknown [run] key `{key}`")));
                }
            }
        }
    }
    let cycles = cycles
        .ok_or_else(|| rctx.fail(None, run_s.offset, "missing the `cycles` key"))?;
    let cost = cost.ok_or_else(|| rctx.fail(None, run_s.offset, "missing the `cost` key"))?;
    let effect =
        effect.ok_or_else(|| rctx.fail(None, run_s.offset, "missing the `effect` key"))?;
    for entry in [cost, effect] {
        let name = word_value(rctx, entry)?;
        if !value_names.iter().any(|v| *v == name) {
            return Err(rctx.at(
                entry,
                format!("`{name}` is not a state value name (known: {})", value_names.join(", ")),
            ));
        }
    }
    let init = init.unwrap_or_else(|| {
        let mut v = vec![0.0; first_states.len()];
        v[0] = ModelSpec::DEFAULT_INIT_TOTAL;
        v
    });

    let spec = ModelSpec {
        parameters,
        strategies,
        cycles,
        cost: cost.value.clone(),
        effect: effect.value.clone(),
        method,
        init,
        inflow,
        limits,
        discount_first_cycle,
    };
    spec.validate().map_err(|e| DocumentError {
        file: file.to_path_buf(),
        section: Some("run".to_string()),
        key: None,
        offset: run_s.offset,
        message: e.to_string(),
    })?;

    // [dsa]
    let dsa = match dsa_s {
        None => None,
        Some(s) => {
            let ctx = Ctx { file, section: "dsa" };
            let mut entries = Vec::new();
            let mut seen = HashSet::new();
            for entry in &s.entries {
                if !seen.insert(entry.key.as_str()) {
                    return Err(ctx.at(entry, "duplicate parameter"));
                }
                if !spec.parameters.contains(&entry.key) {
                    return Err(ctx.at(entry, "unknown parameter"));
                }
                let bounds = number_list(ctx, entry)?;
                let [low, high] = bounds[..] else {
                    return Err(ctx.at(
                        entry,
                        format!("expected `low, high`, got {} numbers", bounds.len()),
                    ));
                };
                if !(low <= high) {
                    return Err(ctx.at(entry, format!("low bound {low} exceeds high bound {high}")));
                }
                entries.push(DsaEntry { parameter: entry.key.clone(), low, high });
            }
            Some(DsaSpec::new(entries))
        }
    };

    // [psa]
    let psa = match psa_s {
        None => None,
        Some(s) => {
            let ctx = Ctx { file, section: "psa" };
            let mut marginals: Vec<(String, Marginal)> = Vec::new();
            let mut correlates: Vec<(&RawEntry, String, String, f64)> = Vec::new();
            let mut seen = HashSet::new();
            for entry in &s.entries {
                if entry.key == "correlate" {
                    let (a, b, rho) = correlate_value(ctx, entry)?;
                    correlates.push((entry, a, b, rho));
                    continue;
                }
                if !seen.insert(entry.key.as_str()) {
                    return Err(ctx.at(entry, "duplicate parameter"));
                }
                if !spec.parameters.contains(&entry.key) {
                    return Err(ctx.at(entry, "unknown parameter"));
                }
                marginals.push((entry.key.clone(), marginal_value(ctx, entry)?));
            }
            for (entry, a, b, _) in &correlates {
                for name in [a, b] {
                    if !marginals.iter().any(|(m, _)| m == name) {
                        return Err(ctx.at(
                            entry,
                            format!("correlate names `{name}`, which has no marginal in [psa]"),
                        ));
                    }
                }
            }
            let psa = PsaSpec {
                parameters: marginals,
                correlations: correlates.into_iter().map(|(_, a, b, r)| (a, b, r)).collect(),
            };
            // surface bad marginals and non-PD correlations at load, not mid-analysis
            crate::uncertainty::sample_psa(&psa, 1, 0)
                .map_err(|e| ctx.fail(None, s.offset, e.to_string()))?;
            Some(psa)
        }
    };

    // [population]
    let population = match population_s {
        None => None,
        Some(s) => {
            let ctx = Ctx { file, section: "population" };
            let mut file_entry: Option<&RawEntry> = None;
            for entry in &s.entries {
                match entry.key.as_str() {
                    "file" if file_entry.is_some() => {
                        return Err(ctx.at(entry, "`file` given twice"));
                    }
                    "file" => file_entry = Some(entry),
                    _ => return Err(ctx.at(entry, "the only [population] key is `file`")),
                }
            }
            let entry =
                file_entry.ok_or_else(|| ctx.fail(None, s.offset, "missing the `file` key"))?;
            let table = PopulationTable::load(&resolve(dir, &entry.value))
                .map_err(|e| ctx.at(entry, e.to_string()))?;
            for column in &table.columns {
                if !spec.parameters.contains(column) {
                    return Err(ctx.at(
                        entry,
                        format!("population column `{column}` is not a model parameter"),
                    ));
                }
            }
            Some(table)
        }
    };

    Ok(LoadedModel { spec, dsa, psa, population, lifetable })
}

/// `correlate = a, b, rho`
fn correlate_value(ctx: Ctx, entry: &RawEntry) -> Result<(String, String, f64), DocumentError> {
    let parts: Vec<&str> = entry.value.split(',').map(str::trim).collect();
    let [a, b, rho] = parts[..] else {
        return Err(ctx.at(entry, format!("expected `a, b, rho`, got `{}`", entry.value)));
    };
    for name in [a, b] {
        if !is_word(name) {
            return Err(ctx.at(entry, format!("expected a parameter name, got `{name}`")));
        }
    }
    Ok((a.to_string(), b.to_string(), parse_number(ctx, entry, rho)?))
}

/// `normal(mean, sd)`, `lognormal(mean, sd)`, `gamma(mean, sd)`,
/// `binomial(prob, size)`, `poisson(mean)`
fn marginal_value(ctx: Ctx, entry: &RawEntry) -> Result<Marginal, DocumentError> {
    let v = entry.value.trim();
    let usage = "expected normal(mean, sd), lognormal(mean, sd), gamma(mean, sd), \
                 binomial(prob, size), or poisson(mean)";
    let bad = |m: String| ctx.at(entry, format!("{m}; {usage}"));
    let Some(open) = v.find('(') else {
        return Err(bad(format!("`{v}` is not a distribution")));
    };
    let Some(inner) = v[open + 1..].strip_suffix(')') else {
        return Err(bad(format!("`{v}` is missing the closing `)`")));
    };
    let family = v[..open].trim();
    let nums = number_list(ctx, &RawEntry {
        key: entry.key.clone(),
        value: inner.to_string(),
        offset: entry.offset,
    })?;
    match (family, nums.len()) {
        ("normal", 2) => Ok(Marginal::Normal { mean: nums[0], sd: nums[1] }),
        ("lognormal", 2) => Ok(Marginal::LogNormal { mean: nums[0], sd: nums[1] }),
        ("gamma", 2) => Ok(Marginal::Gamma { mean: nums[0], sd: nums[1] }),
        ("binomial", 2) => {
            let size = nums[1];
            if size < 0.0 || size.fract() != 0.0 || size > u64::MAX as f64 {
                return Err(bad(format!("binomial size must be a whole number, got {size}")));
            }
            Ok(Marginal::Binomial { prob: nums[0], size: size as u64 })
        }
        ("poisson", 1) => Ok(Marginal::Poisson { mean: nums[0] }),
        _ => Err(bad(format!("unknown distribution `{family}` with {} arguments", nums.len()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_model;
    use proptest::prelude::*;
    use std::io::Write as _;

    fn load_str(text: &str) -> Result<LoadedModel, DocumentError> {
        assemble(Path::new("test.cfg"), Path::new("."), text)
    }

    const MINIMAL: &str = r#"
[parameters]
p_sick = "0.2"
p_dead = "0.05"

[states.well]
cost = "100"
utility = "1"

[states.sick]
cost = "1000"
utility = "0.5"

[transition.care]
row.well = "C", "p_sick"
row.sick = "p_dead", "C"

[strategies]
order = care

[run]
cycles = 10
cost = cost
effect = utility
"#;

    #[test]
    fn state_values_may_build_on_the_entries_above_them() {
        let text = MINIMAL.replace(r#"utility = "1""#, r#"utility = "cost * 0.01""#);
        let loaded = load_str(&text).unwrap();
        let result = run_model(&loaded.spec, None).unwrap();
        assert!(result.strategies[0].total("utility").unwrap() > 0.0);

        // Referencing an entry declared below is rejected at load time.
        let text = MINIMAL.replace(r#"cost = "100""#, r#"cost = "utility * 100""#);
        let err = load_str(&text).unwrap_err();
        assert_eq!(err.section.as_deref(), Some("run"));
        assert!(err.message.contains("utility"), "{err}");
    }

    #[test]
    fn minimal_document_loads_and_runs() {
        let loaded = load_str(MINIMAL).unwrap();
        let spec = &loaded.spec;
        assert_eq!(spec.cycles, 10);
        assert_eq!(spec.cost, "cost");
        assert_eq!(spec.method, CountingMethod::LifeTable);
        assert_eq!(spec.init, vec![1000.0, 0.0]);
        assert!(spec.discount_first_cycle);
        assert!(loaded.dsa.is_none() && loaded.psa.is_none() && loaded.population.is_none());
        let result = run_model(spec, None).unwrap();
        assert_eq!(result.strategies.len(), 1);
    }

    #[test]
    fn full_document_loads_every_section() {
        let dir = tempfile::tempdir().unwrap();
        let mut surv = std::fs::File::create(dir.path().join("surv.csv")).unwrap();
        writeln!(surv, "time,status").unwrap();
        for t in [1.0, 2.0, 3.0, 4.0] {
            writeln!(surv, "{t},1").unwrap();
        }
        writeln!(surv, "5.0,0").unwrap();
        drop(surv);
        let mut lt = std::fs::File::create(dir.path().join("lt.csv")).unwrap();
        writeln!(lt, "age_lo,age_hi,sex,prob").unwrap();
        writeln!(lt, "0,60,MLE,0.004").unwrap();
        writeln!(lt, "60,,MLE,0.02").unwrap();
        drop(lt);
        let mut pop = std::fs::File::create(dir.path().join("pop.csv")).unwrap();
        writeln!(pop, "rate_sick,.weights").unwrap();
        writeln!(pop, "0.1,2").unwrap();
        writeln!(pop, "0.3,1").unwrap();
        drop(pop);

        let text = r#"
# a model exercising every section
[parameters]
rate_sick = "0.2"
compute_surv_helper = "rate_to_prob(rate_sick)"
p_sick = "rescale_prob(compute_surv_helper, from = 1)"
p_dead = "compute_surv(fit, state_time)"
p_dead_km = "compute_surv(km, model_time, 1, km_limit = 2)"
mortality = "mortality_prob(40 + model_time, 1)"

[survival.fit]
family = weibull
shape = "1.2"
scale = "8 + 0 * rate_sick"

[survival.km]
family = exp
rate = "0.1"
data = surv.csv
km_limit = 2

[states.well]
cost = "100"
utility = "discount(1, 0.03)"

[states.sick]
cost = "1000 + 0 * p_dead_km + 0 * mortality"
utility = "0.5"

[transition.care]
row.well = "C", "p_sick"
row.sick = "p_dead", "C"

[transition.wait]
row.well = "C", "p_sick * 1.1"
row.sick = "p_dead", "C"

[strategies]
order = care, wait

[run]
cycles = 5
cost = cost
effect = utility
method = end
init = 800, 200
inflow.well = "10 + model_time"
state_cycle_limit = 4
state_cycle_limit.sick = 3
discount_first_cycle = false
lifetable = lt.csv

[dsa]
rate_sick = 0.1, 0.3

[psa]
rate_sick = gamma(0.2, 0.05)
compute_surv_helper = normal(0.18, 0.02)
correlate = rate_sick, compute_surv_helper, 0.4

[population]
file = pop.csv
"#;
        let path = dir.path().join("model.cfg");
        std::fs::write(&path, text).unwrap();
        let loaded = load_model(&path).unwrap();
        assert_eq!(loaded.spec.method, CountingMethod::End);
        assert_eq!(loaded.spec.init, vec![800.0, 200.0]);
        assert_eq!(loaded.spec.inflow.len(), 1);
        assert_eq!(loaded.spec.limits.for_state("sick"), Some(3));
        assert_eq!(loaded.spec.limits.for_state("well"), Some(4));
        assert!(!loaded.spec.discount_first_cycle);
        assert!(loaded.lifetable.is_some());
        let dsa = loaded.dsa.as_ref().unwrap();
        assert_eq!(dsa.entries.len(), 1);
        assert_eq!((dsa.entries[0].low, dsa.entries[0].high), (0.1, 0.3));
        let psa = loaded.psa.as_ref().unwrap();
        assert_eq!(psa.parameters.len(), 2);
        assert_eq!(psa.correlations, vec![( "rate_sick".to_string(), "compute_surv_helper".to_string(), 0.4)]);
        assert_eq!(loaded.population.as_ref().unwrap().rows.len(), 2);
        let result = run_model(&loaded.spec, loaded.lifetable.as_ref()).unwrap();
        assert_eq!(result.strategies.len(), 2);
    }

    #[test]
    fn diagnostics_carry_file_section_key_and_offset() {
        let text = MINIMAL.replace("p_sick = \"0.2\"", "p_sick = not quoted");
        let err = load_str(&text).unwrap_err();
        assert_eq!(err.section.as_deref(), Some("parameters"));
        assert_eq!(err.key.as_deref(), Some("p_sick"));
        let offset = text.find("p_sick =").unwrap();
        assert_eq!(err.offset, offset);
        let shown = err.to_string();
        assert!(
            shown.starts_with(&format!("test.cfg:{offset}: [parameters] p_sick:")),
            "got {shown}"
        );
    }

    #[test]
    fn entry_before_any_section_is_an_error() {
        let err = load_str("cycles = 10\n").unwrap_err();
        assert!(err.message.contains("before any [section]"), "{}", err.message);
        assert!(err.section.is_none());
    }

    #[test]
    fn malformed_headers_and_keys_are_rejected() {
        for (text, needle) in [
            ("[run\ncycles = 1\n", "malformed section header"),
            ("[states.]\n", "bad section name"),
            ("[run]\n9lives = 1\n", "bad key"),
            ("[run]\ncycles\n", "expected `key = value`"),
            ("[run]\ncycles =\n", "has no value"),
            ("[run]\ncycles == 3\n", "has no value"),
            ("[run]\n[run]\n", "appears twice"),
        ] {
            let err = load_str(text).unwrap_err();
            assert!(err.message.contains(needle), "`{text}` -> {}", err.message);
        }
    }

    #[test]
    fn missing_required_sections_are_named() {
        let err = load_str("[parameters]\np = \"1\"\n").unwrap_err();
        assert!(err.message.contains("[strategies]") || err.message.contains("[run]"));
        let err = load_str("[run]\ncycles = 1\n").unwrap_err();
        assert!(err.message.contains("[parameters]"));
    }

    #[test]
    fn unknown_and_unnamed_sections_are_rejected() {
        let err = load_str(&format!("{MINIMAL}\n[notes]\nx = 1\n")).unwrap_err();
        assert!(err.message.contains("unknown section [notes]"));
        let err = load_str("[states]\nx = \"1\"\n").unwrap_err();
        assert!(err.message.contains("[states.<name>]"), "{}", err.message);
    }

    #[test]
    fn expression_errors_point_at_the_entry() {
        let text = MINIMAL.replace("p_sick = \"0.2\"", "p_sick = \"0.2 +\"");
        let err = load_str(&text).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("p_sick"));
        assert!(err.message.contains("syntax error"), "{}", err.message);
    }

    #[test]
    fn double_complement_cites_the_rule() {
        let text = MINIMAL.replace(r#"row.well = "C", "p_sick""#, r#"row.well = "C", "C""#);
        let err = load_str(&text).unwrap_err();
        assert_eq!(err.section.as_deref(), Some("transition.care"));
        assert!(err.message.contains("more than one complement"), "{}", err.message);
    }

    #[test]
    fn ragged_rows_and_bad_cells_are_located() {
        let text = MINIMAL.replace(r#"row.well = "C", "p_sick""#, r#"row.well = "C""#);
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("expected 2"), "{}", err.message);

        let text = MINIMAL.replace(r#"row.well = "C", "p_sick""#, r#"row.well = "C", p_sick"#);
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("double-quoted"), "{}", err.message);

        let text =
            MINIMAL.replace(r#"row.well = "C", "p_sick""#, r#"row.well = "C", "p_sick +""#);
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("syntax error"), "{}", err.message);

        let text = MINIMAL.replace(r#"row.well = "C", "p_sick""#, r#"well = "C", "p_sick""#);
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("row.<state>"), "{}", err.message);
    }

    #[test]
    fn strategy_cross_references_must_resolve() {
        let text = MINIMAL.replace("order = care", "order = care, other");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("no [transition.other]"), "{}", err.message);

        let text = format!(
            "{MINIMAL}\n[transition.extra]\nrow.well = \"C\", \"p_sick\"\nrow.sick = \"p_dead\", \"C\"\n"
        );
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("not listed in [strategies]"), "{}", err.message);

        let text = MINIMAL.replace("order = care", "order = care, care");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("duplicate strategy"), "{}", err.message);
    }

    #[test]
    fn state_sections_must_match_the_matrix() {
        let text = MINIMAL.replace("[states.sick]", "[states.gone]");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("not in the transition matrix"), "{}", err.message);

        let text = format!("{MINIMAL}\n[states.extra]\ncost = \"1\"\n");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("not in the transition matrix"), "{}", err.message);

        let text = MINIMAL.replace("utility = \"0.5\"", "happiness = \"0.5\"");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("defines values"), "{}", err.message);
    }

    #[test]
    fn run_section_diagnostics() {
        for (from, to, needle) in [
            ("cycles = 10", "cycles = 0", "at least 1"),
            ("cycles = 10", "cycles = ten", "whole number"),
            ("cost = cost", "cost = price", "not a state value name"),
            ("effect = utility", "effect = utility\nmethod = never", "unknown counting method"),
            ("effect = utility", "effect = utility\ninit = 1, 2, 3", "init needs 2 counts"),
            ("effect = utility", "effect = utility\ninit = -1, 1", "cannot be negative"),
            ("effect = utility", "effect = utility\ninflow.gone = \"1\"", "unknown state"),
            (
                "effect = utility",
                "effect = utility\ninflow.well = \"state_time\"",
                "state_time",
            ),
            ("effect = utility", "effect = utility\nstate_cycle_limit = 0", "at least 1"),
            (
                "effect = utility",
                "effect = utility\nstate_cycle_limit.gone = 2",
                "unknown state",
            ),
            ("effect = utility", "effect = utility\ndiscount_first_cycle = maybe", "true"),
            ("effect = utility", "effect = utility\nbudget = 100", "unknown [run] key"),
            ("effect = utility", "effect = utility\neffect = cost", "duplicate key"),
        ] {
            let text = MINIMAL.replace(from, to);
            let err = load_str(&text).unwrap_err();
            assert_eq!(err.section.as_deref(), Some("run"), "{to}: {}", err.message);
            assert!(err.message.contains(needle), "`{to}` -> {}", err.message);
        }
        let text = MINIMAL.replace("cycles = 10\n", "");
        let err = load_str(&text).unwrap_err();
        assert!(err.message.contains("missing the `cycles` key"), "{}", err.message);
    }

    #[test]
    fn compute_surv_argument_errors() {
        let with_fit = |def: &str| {
            MINIMAL.replace(
                "p_dead = \"0.05\"",
                &format!("p_dead = \"{def}\"\n\n[survival.fit]\nfamily = exp\nrate = \"0.1\""),
            )
        };
        let loaded = load_str(&with_fit("compute_surv(fit, model_time, 0.5, 0)")).unwrap();
        assert!(loaded.spec.parameters.contains("p_dead"));
        for (def, needle) in [
            ("compute_surv(fit)", "2 to 4 arguments"),
            ("compute_surv(1, model_time)", "name a survival declaration"),
            ("compute_surv(fit, sometime)", "model_time or state_time"),
            ("compute_surv(fit, model_time, rate)", "number literal"),
            ("compute_surv(fit, model_time, 0)", "must be positive"),
            ("compute_surv(fit, model_time, km_limit = -1)", "at least 0"),
            ("compute_surv(fit, model_time, km_limit = 1, km_limit = 2)", "given twice"),
            ("compute_surv(fit, model_time, size = 2)", "unknown argument name"),
            ("1 + compute_surv(fit, model_time)", "entire parameter definition"),
            ("ifelse(1, compute_surv(fit, model_time), 0)", "entire parameter definition"),
        ] {
            let err = load_str(&with_fit(def)).unwrap_err();
            assert!(err.message.contains(needle), "`{def}` -> {}", err.message);
        }
    }

    #[test]
    fn survival_section_diagnostics() {
        let base = MINIMAL.to_string();
        for (extra, needle) in [
            ("[survival.fit]\nkm_limit = 1\n", "neither a `family` nor `data`"),
            ("[survival.fit]\nrate = \"0.1\"\n", "must follow a `family` key"),
            ("[survival.fit]\nfamily = exp\nrate = \"0.1\"\nkm_limit = 1\n", "needs both"),
            ("[survival.fit]\nfamily = exp\nrate = \"0.1\"\nkm_limit = -1\n", "at least 0"),
            ("[survival.fit]\nfamily = exp\nrate = \"0.1\"\nrate = \"0.2\"\n", "duplicate key"),
        ] {
            let err = load_str(&format!("{base}\n{extra}")).unwrap_err();
            assert!(err.message.contains(needle), "`{extra}` -> {}", err.message);
        }
    }

    #[test]
    fn dsa_section_diagnostics() {
        for (extra, needle) in [
            ("[dsa]\nmystery = 1, 2\n", "unknown parameter"),
            ("[dsa]\np_sick = 1\n", "expected `low, high`"),
            ("[dsa]\np_sick = 2, 1\n", "exceeds high bound"),
            ("[dsa]\np_sick = 0.1, 0.3\np_sick = 0.2, 0.4\n", "duplicate parameter"),
        ] {
            let err = load_str(&format!("{MINIMAL}\n{extra}")).unwrap_err();
            assert_eq!(err.section.as_deref(), Some("dsa"));
            assert!(err.message.contains(needle), "`{extra}` -> {}", err.message);
        }
    }

    #[test]
    fn psa_section_diagnostics() {
        for (extra, needle) in [
            ("[psa]\nmystery = normal(1, 2)\n", "unknown parameter"),
            ("[psa]\np_sick = flat(1, 2)\n", "unknown distribution"),
            ("[psa]\np_sick = normal(1)\n", "unknown distribution `normal` with 1"),
            ("[psa]\np_sick = normal\n", "not a distribution"),
            ("[psa]\np_sick = normal(1, 2\n", "missing the closing"),
            ("[psa]\np_sick = binomial(0.2, 10.5)\n", "whole number"),
            ("[psa]\np_sick = normal(0.2, -1)\n", "sd > 0"),
            ("[psa]\ncorrelate = p_sick, p_dead, 0.5\n", "no marginal"),
            ("[psa]\np_sick = normal(0.2, 0.1)\ncorrelate = p_sick, 0.5\n", "expected `a, b, rho`"),
            (
                "[psa]\np_sick = normal(0.2, 0.1)\np_dead = normal(0.05, 0.01)\ncorrelate = p_sick, p_dead, 1.5\n",
                "correlation",
            ),
        ] {
            let err = load_str(&format!("{MINIMAL}\n{extra}")).unwrap_err();
            assert_eq!(err.section.as_deref(), Some("psa"), "`{extra}` -> {}", err.message);
            assert!(err.message.contains(needle), "`{extra}` -> {}", err.message);
        }
    }

    #[test]
    fn population_section_diagnostics() {
        let err = load_str(&format!("{MINIMAL}\n[population]\n")).unwrap_err();
        assert!(err.message.contains("missing the `file` key"), "{}", err.message);
        let err = load_str(&format!("{MINIMAL}\n[population]\nrows = 3\n")).unwrap_err();
        assert!(err.message.contains("only [population] key"), "{}", err.message);
        let err = load_str(&format!("{MINIMAL}\n[population]\nfile = nowhere.csv\n")).unwrap_err();
        assert_eq!(err.key.as_deref(), Some("file"));
    }

    #[test]
    fn missing_file_is_a_located_diagnostic() {
        let err = load_model("no/such/model.cfg").unwrap_err();
        assert!(err.message.contains("cannot read model document"));
        assert_eq!(err.offset, 0);
    }

    proptest! {
        // Total over arbitrary input: any byte soup yields Ok or a located
        // diagnostic, never a panic.
        #[test]
        fn loader_never_panics_on_arbitrary_text(text in "\\PC{0,600}") {
            let _ = load_str(&text);
        }

        #[test]
        fn loader_never_panics_on_liney_text(
            lines in prop::collection::vec("[ \\[\\]=,\"#a-z0-9_.+*/()-]{0,40}", 0..40),
        ) {
            let _ = load_str(&lines.join("\n"));
        }

        // Mutations of a valid document: still total, and diagnostics always
        // carry the document's file name.
        #[test]
        fn loader_is_total_under_mutation(
            at in any::<prop::sample::Index>(),
            len in 0usize..20,
            insert in "[ \\[\\]=,\"a-z_.]{0,12}",
        ) {
            let mut text = MINIMAL.to_string();
            let start = at.index(text.len());
            let end = (start + len).min(text.len());
            while !text.is_char_boundary(start) || !text.is_char_boundary(end) {
                // MINIMAL is ASCII, so boundaries always hold; keep the guard cheap
                break;
            }
            text.replace_range(start..end, &insert);
            match load_str(&text) {
                Ok(_) => {}
                Err(e) => prop_assert_eq!(e.file, PathBuf::from("test.cfg")),
            }
        }
    }
}
