//! Ordered parameter definitions and their evaluation into per-cycle
//! numeric tables.
//!
//! Parameters form a single flat list evaluated strictly in declaration
//! order; each definition may reference the reserved time variables and any
//! name declared before it. A definition is either an expression or a
//! survival extraction — a reference to a named distribution whose
//! per-cycle event probabilities become the column. Keeping extractions as
//! first-class definitions (rather than a function call evaluated inline)
//! keeps the table purely numeric while letting sensitivity analyses swap
//! the distribution's arguments like any other parameter.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::expr::{
    eval_expression, Bindings, EvalContext, EvalError, Expr, RESERVED_NAMES, SEX_CODE_NAMES,
};
use crate::survival::{
    compute_surv, Parametric, SurvivalData, SurvivalDistribution, SurvivalError,
};

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("duplicate parameter `{0}`")]
    DuplicateName(String),
    #[error("parameter name `{0}` is reserved")]
    ReservedName(String),
    #[error("parameter `{param}` references `{name}`, which is not defined at that point")]
    UnresolvedReference { param: String, name: String },
    #[error("parameter `{param}` references unknown survival distribution `{dist}`")]
    UnknownDistribution { param: String, dist: String },
    #[error("parameter `{param}`: {source}")]
    Eval { param: String, source: EvalError },
    #[error("parameter `{param}`: {source}")]
    Survival { param: String, source: SurvivalError },
    #[error("duplicate survival distribution `{0}`")]
    DuplicateDistribution(String),
    #[error("survival distribution `{name}` needs a parametric family, raw data, or both")]
    EmptyDeclaration { name: String },
    #[error("survival distribution `{name}`: unknown family `{family}` (expected exponential, weibull, lognormal, gamma, or gompertz)")]
    UnknownFamily { name: String, family: String },
    #[error("survival distribution `{name}` ({family}) is missing parameter `{arg}`")]
    MissingDistributionArg { name: String, family: &'static str, arg: &'static str },
    #[error("survival distribution `{name}` ({family}) does not take a parameter `{arg}`")]
    UnknownDistributionArg { name: String, family: &'static str, arg: String },
    #[error("survival distribution `{name}`: km_limit must be a non-negative duration, got {value}")]
    BadTemplateKmLimit { name: String, value: f64 },
    #[error("survival distribution `{name}`: km_limit needs both raw data and a parametric tail")]
    KmLimitNeedsBoth { name: String },
    #[error("survival distribution `{name}`: parameter `{arg}` must have the same value in every cycle")]
    NonConstantArg { name: String, arg: String },
    #[error("parameter `{param}`: cycle_length must be positive, got {value}")]
    BadCycleLength { param: String, value: f64 },
}

/// Canonical parametric families and the argument names they require.
const FAMILIES: [(&str, &[&str]); 5] = [
    ("exponential", &["rate"]),
    ("weibull", &["shape", "scale"]),
    ("lognormal", &["meanlog", "sdlog"]),
    ("gamma", &["shape", "rate"]),
    ("gompertz", &["shape", "rate"]),
];

fn canonical_family(family: &str) -> Option<&'static str> {
    match family {
        "exp" | "exponential" => Some("exponential"),
        "weibull" => Some("weibull"),
        "lnorm" | "lognormal" => Some("lognormal"),
        "gamma" => Some("gamma"),
        "gompertz" => Some("gompertz"),
        _ => None,
    }
}

/// A survival distribution declared by name: a parametric family whose
/// arguments are expressions (so sensitivity analyses can vary them), raw
/// observations, or both. With both and `km_limit > 0`, extraction splices
/// the product-limit estimate of the data before the parametric tail.
#[derive(Debug, Clone)]
pub struct SurvivalTemplate {
    pub family: Option<(String, Vec<(String, Expr)>)>,
    pub data: Option<SurvivalData>,
    pub km_limit: f64,
}

impl SurvivalTemplate {
    pub fn parametric(family: impl Into<String>, args: Vec<(String, Expr)>) -> SurvivalTemplate {
        SurvivalTemplate { family: Some((family.into(), args)), data: None, km_limit: 0.0 }
    }

    pub fn from_data(data: SurvivalData) -> SurvivalTemplate {
        SurvivalTemplate { family: None, data: Some(data), km_limit: 0.0 }
    }

    pub fn with_data(mut self, data: SurvivalData) -> SurvivalTemplate {
        self.data = Some(data);
        self
    }

    pub fn with_km_limit(mut self, km_limit: f64) -> SurvivalTemplate {
        self.km_limit = km_limit;
        self
    }

    /// Identifiers the template's argument expressions reference.
    fn referenced_idents(&self) -> Vec<&str> {
        let mut out = Vec::new();
        if let Some((_, args)) = &self.family {
            for (_, expr) in args {
                expr.visit_idents(&mut |name| out.push(name));
            }
        }
        out
    }
}

/// Named survival declarations, validated once at construction.
#[derive(Debug, Clone, Default)]
pub struct SurvivalRegistry {
    entries: Vec<(String, SurvivalTemplate)>,
    index: HashMap<String, usize>,
}

impl SurvivalRegistry {
    pub fn new(entries: Vec<(String, SurvivalTemplate)>) -> Result<SurvivalRegistry, ParamError> {
        let mut index = HashMap::new();
        for (i, (name, template)) in entries.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(ParamError::DuplicateDistribution(name.clone()));
            }
            if template.family.is_none() && template.data.is_none() {
                return Err(ParamError::EmptyDeclaration { name: name.clone() });
            }
            if !template.km_limit.is_finite() || template.km_limit < 0.0 {
                return Err(ParamError::BadTemplateKmLimit {
                    name: name.clone(),
                    value: template.km_limit,
                });
            }
            if template.km_limit > 0.0 && (template.family.is_none() || template.data.is_none()) {
                return Err(ParamError::KmLimitNeedsBoth { name: name.clone() });
            }
            if let Some((family, args)) = &template.family {
                let canonical = canonical_family(family).ok_or_else(|| ParamError::UnknownFamily {
                    name: name.clone(),
                    family: family.clone(),
                })?;
                let required = FAMILIES
                    .iter()
                    .find(|(f, _)| *f == canonical)
                    .map(|(_, a)| *a)
                    .expect("canonical family is listed");
                for req in required {
                    if !args.iter().any(|(a, _)| a == req) {
                        return Err(ParamError::MissingDistributionArg {
                            name: name.clone(),
                            family: canonical,
                            arg: req,
                        });
                    }
                }
                for (arg, _) in args {
                    if !required.contains(&arg.as_str()) {
                        return Err(ParamError::UnknownDistributionArg {
                            name: name.clone(),
                            family: canonical,
                            arg: arg.clone(),
                        });
                    }
                }
            }
        }
        Ok(SurvivalRegistry { entries, index })
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(name, _)| name.as_str())
    }

    pub fn get(&self, name: &str) -> Option<&SurvivalTemplate> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    /// Builds the concrete distribution for a declaration, evaluating its
    /// argument expressions (which must be cycle-constant) under `ctx`.
    fn realize(
        &self,
        name: &str,
        ctx: &EvalContext,
    ) -> Result<(SurvivalDistribution, f64), ParamError> {
        let template = self.get(name).expect("caller resolved the name");
        let family = template
            .family
            .as_ref()
            .map(|(family, args)| {
                let canonical = canonical_family(family).expect("validated at construction");
                let mut values = HashMap::new();
                for (arg, expr) in args {
                    let col = eval_expression(expr, ctx).map_err(|source| ParamError::Eval {
                        param: name.to_string(),
                        source,
                    })?;
                    let first = col.first().copied().unwrap_or(f64::NAN);
                    if col.iter().any(|&v| v != first) {
                        return Err(ParamError::NonConstantArg {
                            name: name.to_string(),
                            arg: arg.clone(),
                        });
                    }
                    values.insert(arg.as_str(), first);
                }
                let arg = |key: &str| values.get(key).copied().expect("validated at construction");
                let built = match canonical {
                    "exponential" => Parametric::exponential(arg("rate")),
                    "weibull" => Parametric::weibull(arg("shape"), arg("scale")),
                    "lognormal" => Parametric::lognormal(arg("meanlog"), arg("sdlog")),
                    "gamma" => Parametric::gamma(arg("shape"), arg("rate")),
                    "gompertz" => Parametric::gompertz(arg("shape"), arg("rate")),
                    _ => unreachable!("canonical family"),
                };
                built.map_err(|source| ParamError::Survival { param: name.to_string(), source })
            })
            .transpose()?;
        let dist = match (family, &template.data) {
            (Some(family), Some(data)) => SurvivalDistribution::fitted(family, data.clone()),
            (Some(family), None) => SurvivalDistribution::Parametric(family),
            (None, Some(data)) => SurvivalDistribution::KaplanMeier(data.km_curve()),
            (None, None) => unreachable!("validated at construction"),
        };
        Ok((dist, template.km_limit))
    }
}

/// Which cycle counter a survival extraction walks along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeAxis {
    ModelTime,
    StateTime,
}

/// `compute_surv` applied to a named declaration, as a parameter definition.
#[derive(Debug, Clone)]
pub struct SurvivalExtraction {
    pub distribution: String,
    pub time: TimeAxis,
    /// Duration of one model cycle in the distribution's time unit.
    pub cycle_length: f64,
    /// Overrides the declaration's km_limit when set.
    pub km_limit: Option<f64>,
}

impl SurvivalExtraction {
    pub fn new(distribution: impl Into<String>, time: TimeAxis) -> SurvivalExtraction {
        SurvivalExtraction {
            distribution: distribution.into(),
            time,
            cycle_length: 1.0,
            km_limit: None,
        }
    }
}

#[derive(Debug, Clone)]
pub enum ParameterDefinition {
    Expr(Expr),
    Survival(SurvivalExtraction),
}

impl ParameterDefinition {
    fn visit_idents<'a>(&'a self, visit: &mut impl FnMut(&'a str)) {
        match self {
            ParameterDefinition::Expr(expr) => expr.visit_idents(visit),
            ParameterDefinition::Survival(ext) => {
                if ext.time == TimeAxis::StateTime {
                    visit("state_time");
                }
            }
        }
    }
}

impl From<Expr> for ParameterDefinition {
    fn from(expr: Expr) -> ParameterDefinition {
        ParameterDefinition::Expr(expr)
    }
}

/// Ordered, validated parameter definitions plus the survival declarations
/// they may draw from.
#[derive(Debug, Clone)]
pub struct ParameterSet {
    defs: Vec<(String, ParameterDefinition)>,
    index: HashMap<String, usize>,
    survival: SurvivalRegistry,
}

impl ParameterSet {
    pub fn new(
        defs: Vec<(String, ParameterDefinition)>,
        survival: SurvivalRegistry,
    ) -> Result<ParameterSet, ParamError> {
        let mut index = HashMap::new();
        for (i, (name, _)) in defs.iter().enumerate() {
            if RESERVED_NAMES.contains(&name.as_str()) {
                return Err(ParamError::ReservedName(name.clone()));
            }
            if index.insert(name.clone(), i).is_some() {
                return Err(ParamError::DuplicateName(name.clone()));
            }
        }
        let set = ParameterSet { defs, index, survival };
        set.validate_references()?;
        Ok(set)
    }

    pub fn empty() -> ParameterSet {
        ParameterSet {
            defs: Vec::new(),
            index: HashMap::new(),
            survival: SurvivalRegistry::default(),
        }
    }

    fn validate_references(&self) -> Result<(), ParamError> {
        let mut seen: HashSet<&str> = HashSet::new();
        for (name, def) in &self.defs {
            if let ParameterDefinition::Survival(ext) = def {
                if self.survival.get(&ext.distribution).is_none() {
                    return Err(ParamError::UnknownDistribution {
                        param: name.clone(),
                        dist: ext.distribution.clone(),
                    });
                }
                // The declaration's argument expressions are evaluated at
                // this point of the sequence, so they see the same scope.
                let template = self.survival.get(&ext.distribution).expect("just checked");
                for ident in template.referenced_idents() {
                    self.check_ident(name, ident, &seen)?;
                }
            }
            let mut unresolved = None;
            def.visit_idents(&mut |ident| {
                if unresolved.is_none() {
                    if let Err(e) = self.check_ident(name, ident, &seen) {
                        unresolved = Some(e);
                    }
                }
            });
            if let Some(e) = unresolved {
                return Err(e);
            }
            seen.insert(name);
        }
        Ok(())
    }

    fn check_ident(
        &self,
        param: &str,
        ident: &str,
        seen: &HashSet<&str>,
    ) -> Result<(), ParamError> {
        let known = RESERVED_NAMES.contains(&ident)
            || SEX_CODE_NAMES.iter().any(|(code, _)| *code == ident)
            || seen.contains(ident);
        if known {
            Ok(())
        } else {
            Err(ParamError::UnresolvedReference {
                param: param.to_string(),
                name: ident.to_string(),
            })
        }
    }

    /// Replaces existing names in place and appends new ones at the end,
    /// returning a freshly validated set.
    pub fn modify(
        &self,
        patch: Vec<(String, ParameterDefinition)>,
    ) -> Result<ParameterSet, ParamError> {
        let mut defs = self.defs.clone();
        let mut patched: HashSet<String> = HashSet::new();
        for (name, def) in patch {
            if !patched.insert(name.clone()) {
                return Err(ParamError::DuplicateName(name));
            }
            match self.index.get(&name) {
                Some(&i) => defs[i] = (name, def),
                None => defs.push((name, def)),
            }
        }
        ParameterSet::new(defs, self.survival.clone())
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.iter().map(|(name, _)| name.as_str())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn definition(&self, name: &str) -> Option<&ParameterDefinition> {
        self.index.get(name).map(|&i| &self.defs[i].1)
    }

    pub fn survival(&self) -> &SurvivalRegistry {
        &self.survival
    }

    /// Names whose values depend on `state_time`, directly or through any
    /// chain of earlier parameters. These columns only exist inside an
    /// expanded state context.
    pub fn state_time_dependent(&self) -> HashSet<String> {
        let mut dependent: HashSet<String> = HashSet::new();
        for (name, def) in &self.defs {
            let mut touches = false;
            let mut check = |ident: &str| {
                if ident == "state_time" || dependent.contains(ident) {
                    touches = true;
                }
            };
            def.visit_idents(&mut check);
            if let ParameterDefinition::Survival(ext) = def {
                if let Some(template) = self.survival.get(&ext.distribution) {
                    for ident in template.referenced_idents() {
                        check(ident);
                    }
                }
            }
            if touches {
                dependent.insert(name.clone());
            }
        }
        dependent
    }

    /// Evaluates every definition in order. Columns pre-bound in
    /// `base.bindings` ride along into the result for downstream
    /// consumers; definitions themselves may only reference declared
    /// names, so overriding a value means modifying its definition.
    pub fn evaluate(&self, base: &EvalContext) -> Result<ParameterTable, ParamError> {
        self.evaluate_filtered(base, None)
    }

    /// Evaluation that skips the named columns; the engine uses this to
    /// build the state-time-free base table. Skipped names must not be
    /// referenced by retained definitions (guaranteed when skipping exactly
    /// the state-time-dependent closure).
    pub(crate) fn evaluate_skipping(
        &self,
        base: &EvalContext,
        skip: &HashSet<String>,
    ) -> Result<ParameterTable, ParamError> {
        self.evaluate_filtered(base, Some(skip))
    }

    fn evaluate_filtered(
        &self,
        base: &EvalContext,
        skip: Option<&HashSet<String>>,
    ) -> Result<ParameterTable, ParamError> {
        let mut bindings = base.bindings.clone();
        let mut names = Vec::with_capacity(self.defs.len());
        for (name, def) in &self.defs {
            if skip.is_some_and(|s| s.contains(name)) {
                continue;
            }
            let mut ctx = *base;
            ctx.bindings = &bindings;
            let column = match def {
                ParameterDefinition::Expr(expr) => {
                    eval_expression(expr, &ctx).map_err(|source| ParamError::Eval {
                        param: name.clone(),
                        source,
                    })?
                }
                ParameterDefinition::Survival(ext) => self.extract_survival(name, ext, &ctx)?,
            };
            bindings
                .push(name, column)
                .map_err(|source| ParamError::Eval { param: name.clone(), source })?;
            names.push(name.clone());
        }
        Ok(ParameterTable { cycles: base.cycles, names, bindings })
    }

    fn extract_survival(
        &self,
        param: &str,
        ext: &SurvivalExtraction,
        ctx: &EvalContext,
    ) -> Result<Vec<f64>, ParamError> {
        if !(ext.cycle_length.is_finite() && ext.cycle_length > 0.0) {
            return Err(ParamError::BadCycleLength {
                param: param.to_string(),
                value: ext.cycle_length,
            });
        }
        let (dist, declared_limit) = self.survival.realize(&ext.distribution, ctx)?;
        let km_limit = ext.km_limit.unwrap_or(declared_limit);
        let times: Vec<f64> = match ext.time {
            TimeAxis::ModelTime => (1..=ctx.cycles).map(|k| k as f64).collect(),
            TimeAxis::StateTime => ctx
                .state_time
                .ok_or(ParamError::Eval {
                    param: param.to_string(),
                    source: EvalError::StateTimeUnavailable,
                })?
                .to_vec(),
        };
        compute_surv(&dist, &times, ext.cycle_length, km_limit)
            .map_err(|source| ParamError::Survival { param: param.to_string(), source })
    }
}

/// Result of evaluating a parameter set: the pre-bound columns plus one
/// column of length T per parameter, in declaration order.
#[derive(Debug, Clone)]
pub struct ParameterTable {
    cycles: usize,
    names: Vec<String>,
    bindings: Bindings,
}

impl ParameterTable {
    pub fn cycles(&self) -> usize {
        self.cycles
    }

    /// Parameter names in declaration order (pre-bound columns excluded).
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.bindings.get(name)
    }

    /// All columns, parameters and pre-bound values alike, for downstream
    /// expression evaluation.
    pub fn bindings(&self) -> &Bindings {
        &self.bindings
    }

    pub fn into_bindings(self) -> Bindings {
        self.bindings
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_expression;
    use approx::assert_relative_eq;

    fn expr(src: &str) -> ParameterDefinition {
        ParameterDefinition::Expr(parse_expression(src).unwrap())
    }

    fn set(defs: &[(&str, &str)]) -> ParameterSet {
        build(defs).unwrap()
    }

    fn build(defs: &[(&str, &str)]) -> Result<ParameterSet, ParamError> {
        ParameterSet::new(
            defs.iter().map(|(n, e)| (n.to_string(), expr(e))).collect(),
            SurvivalRegistry::default(),
        )
    }

    fn eval(ps: &ParameterSet, cycles: usize) -> ParameterTable {
        let bindings = Bindings::new();
        let ctx = EvalContext::new(cycles, "base", &bindings);
        ps.evaluate(&ctx).unwrap()
    }

    #[test]
    fn modify_replaces_in_place_and_sees_earlier_names() {
        let ps = set(&[("a", "1"), ("b", "a + 1")]);
        let modified = ps.modify(vec![("b".into(), expr("a + 2"))]).unwrap();
        let table = eval(&modified, 4);
        assert_eq!(table.column("b").unwrap(), &[3.0; 4]);
        assert_eq!(modified.names().collect::<Vec<_>>(), vec!["a", "b"]);
    }

    #[test]
    fn forward_references_are_rejected() {
        let err = build(&[("b", "a + 1")]).unwrap_err();
        assert!(matches!(err, ParamError::UnresolvedReference { param, name }
            if param == "b" && name == "a"));
        // Also when a modification introduces the dangling reference.
        let ps = set(&[("a", "1"), ("b", "a + 1")]);
        assert!(ps.modify(vec![("a".into(), expr("b * 2"))]).is_err());
    }

    #[test]
    fn chained_modifications_flatten_into_one_ordered_set() {
        let base = set(&[("p_disease_base", "0.25"), ("med_effect", "0.5")]);
        let step1 = base
            .modify(vec![("p_disease_med".into(), expr("p_disease_base * med_effect"))])
            .unwrap();
        let step2 = step1.modify(vec![("dr".into(), expr("0.05"))]).unwrap();
        assert_eq!(
            step2.names().collect::<Vec<_>>(),
            vec!["p_disease_base", "med_effect", "p_disease_med", "dr"]
        );
        let table = eval(&step2, 3);
        assert_eq!(table.column("p_disease_med").unwrap(), &[0.125; 3]);
    }

    #[test]
    fn state_time_switch_reproduces_the_hospital_cost_schedule() {
        let ps = set(&[
            ("n_years", "9"),
            ("cost_hospit_cycle", "ifelse(state_time < n_years, 11000, 9000)"),
        ]);
        let st: Vec<f64> = (1..=10).map(|k| k as f64).collect();
        let bindings = Bindings::new();
        let ctx = EvalContext::new(10, "base", &bindings).with_state_time(&st);
        let table = ps.evaluate(&ctx).unwrap();
        let mut expected = vec![11000.0; 8];
        expected.extend([9000.0, 9000.0]);
        assert_eq!(table.column("cost_hospit_cycle").unwrap(), expected.as_slice());
    }

    #[test]
    fn empty_set_yields_a_table_with_no_columns() {
        let table = eval(&ParameterSet::empty(), 5);
        assert_eq!(table.cycles(), 5);
        assert!(table.names().is_empty());
    }

    #[test]
    fn duplicate_and_reserved_names_are_rejected() {
        assert!(matches!(
            build(&[("a", "1"), ("a", "2")]),
            Err(ParamError::DuplicateName(_))
        ));
        assert!(matches!(
            build(&[("model_time", "1")]),
            Err(ParamError::ReservedName(_))
        ));
        let ps = set(&[("a", "1")]);
        assert!(matches!(
            ps.modify(vec![("x".into(), expr("1")), ("x".into(), expr("2"))]),
            Err(ParamError::DuplicateName(_))
        ));
    }

    #[test]
    fn independent_definitions_are_order_stable() {
        let forward = set(&[("u", "model_time * 2"), ("v", "3")]);
        let backward = set(&[("v", "3"), ("u", "model_time * 2")]);
        let (tf, tb) = (eval(&forward, 6), eval(&backward, 6));
        assert_eq!(tf.column("u").unwrap(), tb.column("u").unwrap());
        assert_eq!(tf.column("v").unwrap(), tb.column("v").unwrap());
    }

    #[test]
    fn evaluation_is_pure_and_prefix_consistent() {
        let ps = set(&[("a", "model_time ^ 2"), ("b", "a / (model_time + 1)")]);
        let t1 = eval(&ps, 10);
        let t2 = eval(&ps, 10);
        assert_eq!(t1.column("b").unwrap(), t2.column("b").unwrap());
        let t5 = eval(&ps, 5);
        assert_eq!(&t1.column("a").unwrap()[..5], t5.column("a").unwrap());
        assert_eq!(&t1.column("b").unwrap()[..5], t5.column("b").unwrap());
    }

    #[test]
    fn pre_bound_columns_ride_along_but_are_not_referencable() {
        // Definitions only see declared names...
        assert!(matches!(
            build(&[("double_age", "age_base * 2")]),
            Err(ParamError::UnresolvedReference { .. })
        ));
        // ...but extra columns in the context survive into the table for
        // downstream expression evaluation.
        let ps = set(&[("a", "1")]);
        let mut bindings = Bindings::new();
        bindings.push("age_base", vec![20.0; 3]).unwrap();
        let ctx = EvalContext::new(3, "base", &bindings);
        let table = ps.evaluate(&ctx).unwrap();
        assert_eq!(table.column("age_base").unwrap(), &[20.0; 3]);
        assert_eq!(table.names(), &["a".to_string()]);
    }

    fn weibull_registry(shape: &str, scale: &str) -> SurvivalRegistry {
        SurvivalRegistry::new(vec![(
            "dist_death".into(),
            SurvivalTemplate::parametric(
                "weibull",
                vec![
                    ("shape".into(), parse_expression(shape).unwrap()),
                    ("scale".into(), parse_expression(scale).unwrap()),
                ],
            ),
        )])
        .unwrap()
    }

    #[test]
    fn survival_extraction_matches_direct_computation() {
        let ps = ParameterSet::new(
            vec![(
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::ModelTime,
                )),
            )],
            weibull_registry("1.5", "5"),
        )
        .unwrap();
        let table = eval(&ps, 6);
        let direct = compute_surv(
            &SurvivalDistribution::weibull(1.5, 5.0).unwrap(),
            &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(table.column("p_death").unwrap(), direct.as_slice());
        assert_relative_eq!(
            table.column("p_death").unwrap()[0],
            0.085559356392783,
            max_relative = 1e-10
        );
    }

    #[test]
    fn survival_arguments_see_earlier_parameters() {
        let defs = vec![
            ("fit_shape".into(), expr("1.5")),
            ("fit_scale".into(), expr("5")),
            (
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::ModelTime,
                )),
            ),
        ];
        let ps = ParameterSet::new(defs, weibull_registry("fit_shape", "fit_scale")).unwrap();
        let base = eval(&ps, 3);
        // Varying the upstream parameter flows into the extraction.
        let varied = ps.modify(vec![("fit_scale".into(), expr("8"))]).unwrap();
        let table = eval(&varied, 3);
        let direct = compute_surv(
            &SurvivalDistribution::weibull(1.5, 8.0).unwrap(),
            &[1.0, 2.0, 3.0],
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(table.column("p_death").unwrap(), direct.as_slice());
        assert_ne!(base.column("p_death").unwrap(), table.column("p_death").unwrap());
    }

    #[test]
    fn extraction_argument_scope_is_the_extraction_point() {
        // The registry references `fit_shape`, declared after the
        // extraction: rejected, same rule as any forward reference.
        let defs = vec![
            ("fit_scale".into(), expr("5")),
            (
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::ModelTime,
                )),
            ),
            ("fit_shape".into(), expr("1.5")),
        ];
        let err = ParameterSet::new(defs, weibull_registry("fit_shape", "fit_scale")).unwrap_err();
        assert!(matches!(err, ParamError::UnresolvedReference { name, .. } if name == "fit_shape"));
    }

    #[test]
    fn state_time_extraction_requires_a_state_context() {
        let ps = ParameterSet::new(
            vec![(
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::StateTime,
                )),
            )],
            weibull_registry("1.5", "5"),
        )
        .unwrap();
        let bindings = Bindings::new();
        let ctx = EvalContext::new(4, "base", &bindings);
        assert!(matches!(
            ps.evaluate(&ctx).unwrap_err(),
            ParamError::Eval { source: EvalError::StateTimeUnavailable, .. }
        ));
        // Dwell times 3,4,... give the probabilities for those cycles.
        let st = vec![3.0, 4.0, 5.0, 6.0];
        let ctx = EvalContext::new(4, "base", &bindings).with_state_time(&st);
        let table = ps.evaluate(&ctx).unwrap();
        let direct = compute_surv(
            &SurvivalDistribution::weibull(1.5, 5.0).unwrap(),
            &st,
            1.0,
            0.0,
        )
        .unwrap();
        assert_eq!(table.column("p_death").unwrap(), direct.as_slice());
    }

    #[test]
    fn km_limit_declaration_splices_data_before_the_tail() {
        let times = vec![0.4, 8.7, 7.0, 5.1, 9.2, 1.0, 0.5, 3.3, 1.8, 3.0];
        let events = vec![true; 10];
        let data = SurvivalData::new(times.clone(), events.clone()).unwrap();
        let registry = SurvivalRegistry::new(vec![(
            "dist_death".into(),
            SurvivalTemplate::parametric(
                "weibull",
                vec![
                    ("shape".into(), parse_expression("1.5").unwrap()),
                    ("scale".into(), parse_expression("5").unwrap()),
                ],
            )
            .with_data(data.clone())
            .with_km_limit(5.0),
        )])
        .unwrap();
        let ps = ParameterSet::new(
            vec![(
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::ModelTime,
                )),
            )],
            registry,
        )
        .unwrap();
        let table = eval(&ps, 8);
        let fitted = SurvivalDistribution::fitted(Parametric::weibull(1.5, 5.0).unwrap(), data);
        let ks: Vec<f64> = (1..=8).map(|k| k as f64).collect();
        let direct = compute_surv(&fitted, &ks, 1.0, 5.0).unwrap();
        assert_eq!(table.column("p_death").unwrap(), direct.as_slice());
    }

    #[test]
    fn registry_validation_catches_malformed_declarations() {
        let shape = ("shape".to_string(), parse_expression("1.5").unwrap());
        let scale = ("scale".to_string(), parse_expression("5").unwrap());
        let weibull = SurvivalTemplate::parametric("weibull", vec![shape.clone(), scale.clone()]);
        assert!(matches!(
            SurvivalRegistry::new(vec![
                ("d".into(), weibull.clone()),
                ("d".into(), weibull.clone())
            ]),
            Err(ParamError::DuplicateDistribution(_))
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![(
                "d".into(),
                SurvivalTemplate { family: None, data: None, km_limit: 0.0 }
            )]),
            Err(ParamError::EmptyDeclaration { .. })
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![(
                "d".into(),
                SurvivalTemplate::parametric("cauchy", vec![])
            )]),
            Err(ParamError::UnknownFamily { .. })
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![(
                "d".into(),
                SurvivalTemplate::parametric("weibull", vec![shape.clone()])
            )]),
            Err(ParamError::MissingDistributionArg { arg: "scale", .. })
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![(
                "d".into(),
                SurvivalTemplate::parametric(
                    "weibull",
                    vec![shape.clone(), scale.clone(), ("rate".into(), parse_expression("1").unwrap())]
                )
            )]),
            Err(ParamError::UnknownDistributionArg { .. })
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![("d".into(), weibull.clone().with_km_limit(5.0))]),
            Err(ParamError::KmLimitNeedsBoth { .. })
        ));
        assert!(matches!(
            SurvivalRegistry::new(vec![("d".into(), weibull.with_km_limit(-1.0))]),
            Err(ParamError::BadTemplateKmLimit { .. })
        ));
    }

    #[test]
    fn non_constant_distribution_arguments_are_rejected() {
        let ps = ParameterSet::new(
            vec![(
                "p_death".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::ModelTime,
                )),
            )],
            weibull_registry("model_time", "5"),
        )
        .unwrap();
        let bindings = Bindings::new();
        let ctx = EvalContext::new(4, "base", &bindings);
        assert!(matches!(
            ps.evaluate(&ctx).unwrap_err(),
            ParamError::NonConstantArg { arg, .. } if arg == "shape"
        ));
    }

    #[test]
    fn state_time_dependence_is_transitive() {
        let defs = vec![
            ("n".to_string(), expr("9")),
            ("c".to_string(), expr("ifelse(state_time < n, 1, 0)")),
            ("d".to_string(), expr("c * 2")),
            ("e".to_string(), expr("n + 1")),
        ];
        let ps = ParameterSet::new(defs, SurvivalRegistry::default()).unwrap();
        let dep = ps.state_time_dependent();
        assert!(dep.contains("c") && dep.contains("d"));
        assert!(!dep.contains("n") && !dep.contains("e"));
        // Extractions along the dwell axis count too.
        let ps2 = ParameterSet::new(
            vec![(
                "p".into(),
                ParameterDefinition::Survival(SurvivalExtraction::new(
                    "dist_death",
                    TimeAxis::StateTime,
                )),
            )],
            weibull_registry("1.5", "5"),
        )
        .unwrap();
        assert!(ps2.state_time_dependent().contains("p"));
    }

    #[test]
    fn base_table_can_skip_the_state_time_closure() {
        let defs = vec![
            ("n".to_string(), expr("9")),
            ("c".to_string(), expr("ifelse(state_time < n, 1, 0)")),
            ("d".to_string(), expr("c * 2")),
            ("e".to_string(), expr("n + 1")),
        ];
        let ps = ParameterSet::new(defs, SurvivalRegistry::default()).unwrap();
        let bindings = Bindings::new();
        let ctx = EvalContext::new(4, "base", &bindings);
        let skip = ps.state_time_dependent();
        let table = ps.evaluate_skipping(&ctx, &skip).unwrap();
        assert_eq!(table.names(), &["n".to_string(), "e".to_string()]);
        assert_eq!(table.column("e").unwrap(), &[10.0; 4]);
        assert!(table.column("c").is_none());
        // Full evaluation without a state context keeps erroring.
        assert!(ps.evaluate(&ctx).is_err());
    }
}
