//! Expression evaluation over per-cycle numeric sequences.
//!
//! Every expression evaluates to a `Vec<f64>` of length `cycles`. Number
//! literals broadcast, arithmetic and comparisons are element-wise, and
//! comparisons yield 1.0/0.0. Division by zero and non-finite intermediate
//! results are hard errors rather than silent NaN propagation: a cohort
//! fraction that goes non-finite would poison every later cycle.

use std::collections::HashMap;

use thiserror::Error;

use super::{Arg, BinaryOp, Expr, UnaryOp, RESERVED_NAMES, SEX_CODE_NAMES};
use crate::lifetable::{LifeTable, LifeTableError};

/// Builtin functions the evaluator understands, in documentation order.
pub const BUILTIN_FUNCTIONS: [&str; 10] = [
    "ifelse",
    "combine_probs",
    "discount",
    "rate_to_prob",
    "or_to_prob",
    "rr_to_prob",
    "rescale_prob",
    "rescale_discount_rate",
    "dispatch_strategy",
    "mortality_prob",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("unknown variable `{0}`")]
    UnknownIdent(String),
    #[error("`state_time` is only defined inside a state context")]
    StateTimeUnavailable,
    #[error("unknown function `{0}` (builtins: {})", BUILTIN_FUNCTIONS.join(", "))]
    UnknownFunction(String),
    #[error("`compute_surv` must form the entire definition of a parameter")]
    ComputeSurvPlacement,
    #[error("`{func}`: {message}")]
    BadCall { func: String, message: String },
    #[error("division by zero at cycle {cycle}")]
    DivisionByZero { cycle: usize },
    #[error("non-finite result at cycle {cycle}")]
    NonFinite { cycle: usize },
    #[error("`dispatch_strategy` has no branch for strategy `{0}`")]
    MissingStrategyBranch(String),
    #[error("`{0}` is reserved and cannot be bound")]
    ReservedName(String),
    #[error("duplicate binding `{0}`")]
    DuplicateBinding(String),
    #[error("no life table is configured, `mortality_prob` is unavailable")]
    NoLifeTable,
    #[error("life table: {0}")]
    LifeTable(String),
}

impl From<LifeTableError> for EvalError {
    fn from(err: LifeTableError) -> EvalError {
        EvalError::LifeTable(err.to_string())
    }
}

fn bad_call(func: &str, message: impl Into<String>) -> EvalError {
    EvalError::BadCall { func: func.to_string(), message: message.into() }
}

/// Ordered name -> column map. Columns keep their insertion order so
/// evaluation and reporting stay deterministic.
#[derive(Debug, Clone, Default)]
pub struct Bindings {
    names: Vec<String>,
    cols: Vec<Vec<f64>>,
    index: HashMap<String, usize>,
}

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn push(&mut self, name: &str, col: Vec<f64>) -> Result<(), EvalError> {
        if RESERVED_NAMES.contains(&name) {
            return Err(EvalError::ReservedName(name.to_string()));
        }
        if self.index.contains_key(name) {
            return Err(EvalError::DuplicateBinding(name.to_string()));
        }
        self.index.insert(name.to_string(), self.cols.len());
        self.names.push(name.to_string());
        self.cols.push(col);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.cols[i].as_slice())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.cols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.names.iter().map(String::as_str).zip(self.cols.iter().map(Vec::as_slice))
    }
}

/// Everything an expression can see during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    /// Number of cycles T; every value has this length.
    pub cycles: usize,
    /// Name of the running strategy, consulted by `dispatch_strategy`.
    pub strategy: &'a str,
    /// Named columns (parameters evaluated so far).
    pub bindings: &'a Bindings,
    /// Per-cycle `state_time` values; absent outside a state context.
    pub state_time: Option<&'a [f64]>,
    /// Mortality table backing `mortality_prob`, when configured.
    pub lifetable: Option<&'a LifeTable>,
    /// Default for `discount`: leave the first cycle undiscounted.
    pub discount_first_cycle: bool,
}

impl<'a> EvalContext<'a> {
    pub fn new(cycles: usize, strategy: &'a str, bindings: &'a Bindings) -> EvalContext<'a> {
        EvalContext {
            cycles,
            strategy,
            bindings,
            state_time: None,
            lifetable: None,
            discount_first_cycle: true,
        }
    }

    pub fn with_state_time(mut self, state_time: &'a [f64]) -> EvalContext<'a> {
        debug_assert_eq!(state_time.len(), self.cycles);
        self.state_time = Some(state_time);
        self
    }

    pub fn with_lifetable(mut self, table: &'a LifeTable) -> EvalContext<'a> {
        self.lifetable = Some(table);
        self
    }

    pub fn with_discount_first_cycle(mut self, flag: bool) -> EvalContext<'a> {
        self.discount_first_cycle = flag;
        self
    }
}

/// Evaluates `expr` to one value per cycle.
pub fn eval_expression(expr: &Expr, ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
    match expr {
        Expr::Number(n) => Ok(vec![*n; ctx.cycles]),
        Expr::Ident(name) => eval_ident(name, ctx),
        Expr::Unary { op, operand } => {
            let mut v = eval_expression(operand, ctx)?;
            match op {
                UnaryOp::Neg => v.iter_mut().for_each(|x| *x = -*x),
                UnaryOp::Not => v.iter_mut().for_each(|x| *x = bool_to_f64(*x == 0.0)),
            }
            Ok(v)
        }
        Expr::Binary { op, lhs, rhs } => {
            let a = eval_expression(lhs, ctx)?;
            let b = eval_expression(rhs, ctx)?;
            eval_binary(*op, a, &b)
        }
        Expr::Call { name, args } => eval_call(name, args, ctx),
    }
}

fn eval_ident(name: &str, ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
    if let Some(col) = ctx.bindings.get(name) {
        return Ok(col.to_vec());
    }
    match name {
        "model_time" | "markov_cycle" => Ok((1..=ctx.cycles).map(|t| t as f64).collect()),
        "state_time" => match ctx.state_time {
            Some(st) => Ok(st.to_vec()),
            None => Err(EvalError::StateTimeUnavailable),
        },
        _ => {
            for (label, code) in SEX_CODE_NAMES {
                if name == label {
                    return Ok(vec![code; ctx.cycles]);
                }
            }
            Err(EvalError::UnknownIdent(name.to_string()))
        }
    }
}

fn bool_to_f64(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

fn eval_binary(op: BinaryOp, mut a: Vec<f64>, b: &[f64]) -> Result<Vec<f64>, EvalError> {
    for (i, (x, &y)) in a.iter_mut().zip(b).enumerate() {
        let cycle = i + 1;
        *x = match op {
            BinaryOp::Add => *x + y,
            BinaryOp::Sub => *x - y,
            BinaryOp::Mul => *x * y,
            BinaryOp::Div => {
                if y == 0.0 {
                    return Err(EvalError::DivisionByZero { cycle });
                }
                *x / y
            }
            BinaryOp::Pow => x.powf(y),
            BinaryOp::Lt => bool_to_f64(*x < y),
            BinaryOp::Le => bool_to_f64(*x <= y),
            BinaryOp::Gt => bool_to_f64(*x > y),
            BinaryOp::Ge => bool_to_f64(*x >= y),
            BinaryOp::Eq => bool_to_f64(*x == y),
            BinaryOp::Ne => bool_to_f64(*x != y),
            BinaryOp::And => bool_to_f64(*x != 0.0 && y != 0.0),
            BinaryOp::Or => bool_to_f64(*x != 0.0 || y != 0.0),
        };
        if !x.is_finite() {
            return Err(EvalError::NonFinite { cycle });
        }
    }
    Ok(a)
}

/// Binds call arguments to declared slots: positionals fill left to right,
/// named arguments fill their slot directly. Returns one optional
/// expression per slot; arity and requiredness are checked by the caller.
fn bind_args<'e>(
    func: &str,
    args: &'e [Arg],
    slots: &[&str],
) -> Result<Vec<Option<&'e Expr>>, EvalError> {
    let mut bound: Vec<Option<&Expr>> = vec![None; slots.len()];
    let mut next_positional = 0;
    for arg in args {
        match &arg.name {
            Some(name) => {
                let slot = slots
                    .iter()
                    .position(|s| s == name)
                    .ok_or_else(|| bad_call(func, format!("unknown argument `{name}`")))?;
                if bound[slot].is_some() {
                    return Err(bad_call(func, format!("argument `{name}` given twice")));
                }
                bound[slot] = Some(&arg.value);
            }
            None => {
                while next_positional < slots.len() && bound[next_positional].is_some() {
                    next_positional += 1;
                }
                if next_positional >= slots.len() {
                    return Err(bad_call(
                        func,
                        format!("takes at most {} arguments", slots.len()),
                    ));
                }
                bound[next_positional] = Some(&arg.value);
                next_positional += 1;
            }
        }
    }
    Ok(bound)
}

fn required<'e>(
    func: &str,
    bound: &[Option<&'e Expr>],
    slots: &[&str],
    slot: usize,
) -> Result<&'e Expr, EvalError> {
    bound[slot].ok_or_else(|| bad_call(func, format!("missing argument `{}`", slots[slot])))
}

/// Evaluates an argument that must be the same for every cycle and returns
/// that single value. Used for structural arguments like rates and periods
/// where a per-cycle value would make the formula ambiguous.
fn eval_constant(func: &str, name: &str, expr: &Expr, ctx: &EvalContext) -> Result<f64, EvalError> {
    let v = eval_expression(expr, ctx)?;
    let first = v[0];
    if v.iter().any(|&x| x != first) {
        return Err(bad_call(func, format!("argument `{name}` must not vary over cycles")));
    }
    Ok(first)
}

fn check_prob(func: &str, name: &str, v: &[f64]) -> Result<(), EvalError> {
    for (i, &p) in v.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) {
            return Err(bad_call(
                func,
                format!("argument `{name}` must be a probability in [0, 1], got {p} at cycle {}", i + 1),
            ));
        }
    }
    Ok(())
}

fn eval_call(name: &str, args: &[Arg], ctx: &EvalContext) -> Result<Vec<f64>, EvalError> {
    match name {
        "ifelse" => {
            let slots = ["condition", "yes", "no"];
            let bound = bind_args(name, args, &slots)?;
            let cond = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let yes = eval_expression(required(name, &bound, &slots, 1)?, ctx)?;
            let no = eval_expression(required(name, &bound, &slots, 2)?, ctx)?;
            Ok(cond
                .iter()
                .zip(yes.iter().zip(&no))
                .map(|(&c, (&y, &n))| if c != 0.0 { y } else { n })
                .collect())
        }
        "combine_probs" => {
            if args.is_empty() {
                return Err(bad_call(name, "needs at least one probability"));
            }
            let mut keep = vec![1.0; ctx.cycles];
            for (i, arg) in args.iter().enumerate() {
                if arg.name.is_some() {
                    return Err(bad_call(name, "takes positional arguments only"));
                }
                let p = eval_expression(&arg.value, ctx)?;
                check_prob(name, &format!("#{}", i + 1), &p)?;
                for (k, &pi) in keep.iter_mut().zip(&p) {
                    *k *= 1.0 - pi;
                }
            }
            Ok(keep.into_iter().map(|k| 1.0 - k).collect())
        }
        "discount" => {
            let slots = ["x", "r", "first"];
            let bound = bind_args(name, args, &slots)?;
            let x = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let r = eval_constant(name, "r", required(name, &bound, &slots, 1)?, ctx)?;
            if r < 0.0 {
                return Err(bad_call(name, format!("rate r must be non-negative, got {r}")));
            }
            let first_undiscounted = match bound[2] {
                Some(expr) => eval_constant(name, "first", expr, ctx)? != 0.0,
                None => ctx.discount_first_cycle,
            };
            Ok(x.iter()
                .enumerate()
                .map(|(i, &v)| {
                    let t = i + 1;
                    let exponent = if first_undiscounted { t - 1 } else { t } as f64;
                    v / (1.0 + r).powf(exponent)
                })
                .collect())
        }
        "rate_to_prob" => {
            let slots = ["r", "per"];
            let bound = bind_args(name, args, &slots)?;
            let r = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let per = match bound[1] {
                Some(expr) => eval_constant(name, "per", expr, ctx)?,
                None => 1.0,
            };
            if per <= 0.0 {
                return Err(bad_call(name, format!("period must be positive, got {per}")));
            }
            for (i, &ri) in r.iter().enumerate() {
                if ri < 0.0 {
                    return Err(bad_call(name, format!("rate must be non-negative, got {ri} at cycle {}", i + 1)));
                }
            }
            Ok(r.into_iter().map(|ri| 1.0 - (-ri * per).exp()).collect())
        }
        "or_to_prob" => {
            let slots = ["or", "p0"];
            let bound = bind_args(name, args, &slots)?;
            let or = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let p0 = eval_expression(required(name, &bound, &slots, 1)?, ctx)?;
            check_prob(name, "p0", &p0)?;
            or.iter()
                .zip(&p0)
                .enumerate()
                .map(|(i, (&o, &p))| {
                    if o < 0.0 {
                        return Err(bad_call(name, format!("odds ratio must be non-negative, got {o}")));
                    }
                    if p >= 1.0 {
                        return Err(EvalError::DivisionByZero { cycle: i + 1 });
                    }
                    let odds = o * p / (1.0 - p);
                    Ok(odds / (1.0 + odds))
                })
                .collect()
        }
        "rr_to_prob" => {
            let slots = ["rr", "p0"];
            let bound = bind_args(name, args, &slots)?;
            let rr = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let p0 = eval_expression(required(name, &bound, &slots, 1)?, ctx)?;
            check_prob(name, "p0", &p0)?;
            rr.iter()
                .zip(&p0)
                .enumerate()
                .map(|(i, (&rel, &p))| {
                    if rel < 0.0 {
                        return Err(bad_call(name, format!("risk ratio must be non-negative, got {rel}")));
                    }
                    let out = rel * p;
                    if out > 1.0 {
                        return Err(bad_call(
                            name,
                            format!("rr * p0 = {out} exceeds 1 at cycle {}", i + 1),
                        ));
                    }
                    Ok(out)
                })
                .collect()
        }
        "rescale_prob" => {
            let slots = ["p", "from", "to"];
            let bound = bind_args(name, args, &slots)?;
            let p = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            check_prob(name, "p", &p)?;
            let from = eval_constant(name, "from", required(name, &bound, &slots, 1)?, ctx)?;
            let to = match bound[2] {
                Some(expr) => eval_constant(name, "to", expr, ctx)?,
                None => 1.0,
            };
            if from <= 0.0 || to <= 0.0 {
                return Err(bad_call(name, "periods `from` and `to` must be positive"));
            }
            Ok(p.into_iter().map(|pi| 1.0 - (1.0 - pi).powf(to / from)).collect())
        }
        "rescale_discount_rate" => {
            let slots = ["r", "from", "to"];
            let bound = bind_args(name, args, &slots)?;
            let r = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let from = eval_constant(name, "from", required(name, &bound, &slots, 1)?, ctx)?;
            let to = eval_constant(name, "to", required(name, &bound, &slots, 2)?, ctx)?;
            if from <= 0.0 || to <= 0.0 {
                return Err(bad_call(name, "periods `from` and `to` must be positive"));
            }
            r.into_iter()
                .enumerate()
                .map(|(i, ri)| {
                    if ri <= -1.0 {
                        return Err(bad_call(name, format!("rate must exceed -1, got {ri}")));
                    }
                    let out = (1.0 + ri).powf(to / from) - 1.0;
                    if !out.is_finite() {
                        return Err(EvalError::NonFinite { cycle: i + 1 });
                    }
                    Ok(out)
                })
                .collect()
        }
        "dispatch_strategy" => {
            let mut fallthrough = None;
            for arg in args {
                match &arg.name {
                    Some(branch) if branch == ctx.strategy => {
                        return eval_expression(&arg.value, ctx);
                    }
                    Some(_) => {}
                    None => {
                        if fallthrough.is_some() {
                            return Err(bad_call(name, "at most one unnamed default branch"));
                        }
                        fallthrough = Some(&arg.value);
                    }
                }
            }
            match fallthrough {
                Some(expr) => eval_expression(expr, ctx),
                None => Err(EvalError::MissingStrategyBranch(ctx.strategy.to_string())),
            }
        }
        "mortality_prob" => {
            let slots = ["age", "sex"];
            let bound = bind_args(name, args, &slots)?;
            let table = ctx.lifetable.ok_or(EvalError::NoLifeTable)?;
            let ages = eval_expression(required(name, &bound, &slots, 0)?, ctx)?;
            let sexes = eval_expression(required(name, &bound, &slots, 1)?, ctx)?;
            Ok(table.mortality_probs(&ages, &sexes)?)
        }
        "compute_surv" => Err(EvalError::ComputeSurvPlacement),
        other => Err(EvalError::UnknownFunction(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_expression;
    use super::*;
    use crate::lifetable::{LifeTable, LifeTableRow, Sex};
    use approx::assert_relative_eq;

    fn eval_str(src: &str, cycles: usize) -> Result<Vec<f64>, EvalError> {
        let bindings = Bindings::new();
        let ctx = EvalContext::new(cycles, "base", &bindings);
        eval_expression(&parse_expression(src).unwrap(), &ctx)
    }

    #[test]
    fn scalars_broadcast_to_cycle_length() {
        assert_eq!(eval_str("2 + 3", 4).unwrap(), vec![5.0; 4]);
    }

    #[test]
    fn model_time_and_alias_count_from_one() {
        assert_eq!(eval_str("model_time", 3).unwrap(), vec![1.0, 2.0, 3.0]);
        assert_eq!(eval_str("markov_cycle * 2", 3).unwrap(), vec![2.0, 4.0, 6.0]);
    }

    #[test]
    fn comparisons_yield_indicator_values() {
        assert_eq!(eval_str("model_time <= 2", 4).unwrap(), vec![1.0, 1.0, 0.0, 0.0]);
        assert_eq!(eval_str("model_time == 2", 3).unwrap(), vec![0.0, 1.0, 0.0]);
        assert_eq!(eval_str("!(model_time == 2)", 3).unwrap(), vec![1.0, 0.0, 1.0]);
        assert_eq!(
            eval_str("model_time > 1 && model_time < 3", 3).unwrap(),
            vec![0.0, 1.0, 0.0]
        );
    }

    #[test]
    fn state_time_requires_a_state_context() {
        assert_eq!(eval_str("state_time", 2).unwrap_err(), EvalError::StateTimeUnavailable);
        let bindings = Bindings::new();
        let st = vec![4.0, 4.0, 4.0];
        let ctx = EvalContext::new(3, "base", &bindings).with_state_time(&st);
        let v = eval_expression(&parse_expression("state_time + 1").unwrap(), &ctx).unwrap();
        assert_eq!(v, vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn bindings_resolve_before_sex_codes_and_reserved_names_are_protected() {
        let mut bindings = Bindings::new();
        bindings.push("MLE", vec![9.0, 9.0]).unwrap();
        let ctx = EvalContext::new(2, "base", &bindings);
        let v = eval_expression(&parse_expression("MLE").unwrap(), &ctx).unwrap();
        assert_eq!(v, vec![9.0, 9.0]);
        assert_eq!(eval_str("FMLE", 1).unwrap(), vec![2.0]);
        assert_eq!(
            Bindings::new().push("model_time", vec![1.0]).unwrap_err(),
            EvalError::ReservedName("model_time".to_string())
        );
        assert!(matches!(eval_str("no_such", 1).unwrap_err(), EvalError::UnknownIdent(_)));
    }

    #[test]
    fn division_by_zero_reports_the_cycle() {
        let err = eval_str("1 / (model_time - 2)", 3).unwrap_err();
        assert_eq!(err, EvalError::DivisionByZero { cycle: 2 });
    }

    #[test]
    fn non_finite_results_are_rejected() {
        assert!(matches!(eval_str("10 ^ 1000", 1).unwrap_err(), EvalError::NonFinite { .. }));
    }

    #[test]
    fn ifelse_selects_element_wise_and_evaluates_both_branches() {
        assert_eq!(
            eval_str("ifelse(model_time < 3, 10, 20)", 4).unwrap(),
            vec![10.0, 10.0, 20.0, 20.0]
        );
        // Both branches evaluate: an error in the unselected branch still
        // surfaces.
        assert!(matches!(
            eval_str("ifelse(model_time > 0, 1, 1 / 0)", 2).unwrap_err(),
            EvalError::DivisionByZero { .. }
        ));
    }

    #[test]
    fn combine_probs_is_complement_of_survival_product() {
        let v = eval_str("combine_probs(0.1, 0.2)", 1).unwrap();
        assert_relative_eq!(v[0], 1.0 - 0.9 * 0.8, max_relative = 1e-12);
        let err = eval_str("combine_probs(1.2)", 1).unwrap_err();
        assert!(matches!(err, EvalError::BadCall { .. }));
    }

    #[test]
    fn discount_leaves_first_cycle_whole_by_default() {
        let v = eval_str("discount(100, 0.05)", 3).unwrap();
        assert_relative_eq!(v[0], 100.0, max_relative = 1e-12);
        assert_relative_eq!(v[1], 95.23809523809524, max_relative = 1e-12);
        assert_relative_eq!(v[2], 90.70294784580499, max_relative = 1e-12);
        let v = eval_str("discount(100, r = 0.05, first = 0)", 2).unwrap();
        assert_relative_eq!(v[0], 95.23809523809524, max_relative = 1e-12);
        let v = eval_str("discount(100, 0)", 3).unwrap();
        assert_eq!(v, vec![100.0; 3]);
    }

    #[test]
    fn discount_flag_defaults_to_context_convention() {
        let bindings = Bindings::new();
        let ctx = EvalContext::new(2, "base", &bindings).with_discount_first_cycle(false);
        let v = eval_expression(&parse_expression("discount(100, 0.05)").unwrap(), &ctx).unwrap();
        assert_relative_eq!(v[0], 95.23809523809524, max_relative = 1e-12);
    }

    #[test]
    fn conversion_builtins_match_closed_forms() {
        let v = eval_str("rate_to_prob(0.1)", 1).unwrap();
        assert_relative_eq!(v[0], 0.09516258196404048, max_relative = 1e-12);
        let v = eval_str("rate_to_prob(0.1, per = 2)", 1).unwrap();
        assert_relative_eq!(v[0], 1.0 - (-0.2f64).exp(), max_relative = 1e-12);
        let v = eval_str("or_to_prob(2, 0.3)", 1).unwrap();
        assert_relative_eq!(v[0], 0.46153846153846156, max_relative = 1e-12);
        let v = eval_str("rr_to_prob(1.5, 0.2)", 1).unwrap();
        assert_relative_eq!(v[0], 0.3, max_relative = 1e-12);
        let v = eval_str("rescale_prob(0.19, from = 2)", 1).unwrap();
        assert_relative_eq!(v[0], 0.1, max_relative = 1e-12);
        let v = eval_str("rescale_prob(0.1, from = 1, to = 2)", 1).unwrap();
        assert_relative_eq!(v[0], 1.0 - 0.9f64.powi(2), max_relative = 1e-12);
        let v = eval_str("rescale_discount_rate(0.1025, 2, 1)", 1).unwrap();
        assert_relative_eq!(v[0], 0.05, max_relative = 1e-12);
    }

    #[test]
    fn rr_to_prob_rejects_probabilities_beyond_one() {
        assert!(matches!(
            eval_str("rr_to_prob(4, 0.3)", 1).unwrap_err(),
            EvalError::BadCall { .. }
        ));
    }

    #[test]
    fn dispatch_strategy_picks_only_the_running_branch() {
        let bindings = Bindings::new();
        let expr = parse_expression("dispatch_strategy(base = 1, med = 1 / 0)").unwrap();
        let ctx = EvalContext::new(2, "base", &bindings);
        // The `med` branch would divide by zero; it must stay unevaluated.
        assert_eq!(eval_expression(&expr, &ctx).unwrap(), vec![1.0, 1.0]);
        let ctx = EvalContext::new(2, "surg", &bindings);
        assert_eq!(
            eval_expression(&expr, &ctx).unwrap_err(),
            EvalError::MissingStrategyBranch("surg".to_string())
        );
    }

    #[test]
    fn mortality_prob_uses_the_context_table() {
        let table = LifeTable::from_rows(vec![
            LifeTableRow { age_lo: 0.0, age_hi: Some(50.0), sex: Sex::Male, prob: 0.01 },
            LifeTableRow { age_lo: 50.0, age_hi: None, sex: Sex::Male, prob: 0.2 },
        ])
        .unwrap();
        let mut bindings = Bindings::new();
        bindings.push("age", vec![48.0, 49.0, 50.0]).unwrap();
        let ctx = EvalContext::new(3, "base", &bindings).with_lifetable(&table);
        let expr = parse_expression("mortality_prob(age + model_time, MLE)").unwrap();
        let v = eval_expression(&expr, &ctx).unwrap();
        assert_eq!(v, vec![0.01, 0.2, 0.2]);
        let bare = Bindings::new();
        let ctx = EvalContext::new(1, "base", &bare);
        let expr = parse_expression("mortality_prob(10, 1)").unwrap();
        assert_eq!(eval_expression(&expr, &ctx).unwrap_err(), EvalError::NoLifeTable);
    }

    #[test]
    fn unknown_functions_fail_at_evaluation_not_parse() {
        let expr = parse_expression("frobnicate(1)").unwrap();
        let bindings = Bindings::new();
        let ctx = EvalContext::new(1, "base", &bindings);
        assert!(matches!(
            eval_expression(&expr, &ctx).unwrap_err(),
            EvalError::UnknownFunction(_)
        ));
        assert_eq!(
            eval_str("compute_surv(d, time = model_time)", 1).unwrap_err(),
            EvalError::ComputeSurvPlacement
        );
    }

    #[test]
    fn named_argument_binding_rejects_duplicates_and_unknowns() {
        assert!(matches!(
            eval_str("discount(100, r = 0.05, r = 0.02)", 1).unwrap_err(),
            EvalError::BadCall { .. }
        ));
        assert!(matches!(
            eval_str("discount(100, rate = 0.05)", 1).unwrap_err(),
            EvalError::BadCall { .. }
        ));
        assert!(matches!(
            eval_str("discount(100)", 1).unwrap_err(),
            EvalError::BadCall { .. }
        ));
    }

    #[test]
    fn structural_arguments_must_be_cycle_constant() {
        assert!(matches!(
            eval_str("discount(100, r = model_time / 100)", 2).unwrap_err(),
            EvalError::BadCall { .. }
        ));
        assert!(matches!(
            eval_str("rate_to_prob(0.1, per = model_time)", 2).unwrap_err(),
            EvalError::BadCall { .. }
        ));
    }

    #[test]
    fn paper_style_tunnel_cost_schedule() {
        let mut bindings = Bindings::new();
        bindings.push("n_years", vec![9.0; 10]).unwrap();
        let st: Vec<f64> = (1..=10).map(|s| s as f64).collect();
        let ctx = EvalContext::new(10, "base", &bindings).with_state_time(&st);
        let expr = parse_expression("ifelse(state_time < n_years, 11000, 9000)").unwrap();
        let v = eval_expression(&expr, &ctx).unwrap();
        let mut want = vec![11000.0; 8];
        want.extend([9000.0, 9000.0]);
        assert_eq!(v, want);
    }
}
