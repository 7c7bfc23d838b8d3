//! Expression language for model definitions.
//!
//! Every quantity in a model (transition probabilities, state values,
//! parameter definitions, inflow counts) is an expression over named
//! parameters and the reserved time variables. Expressions evaluate to
//! numeric sequences with one element per cycle, so a single definition
//! like `ifelse(state_time < n_years, 11000, 9000)` describes a whole
//! trajectory at once. Scalars broadcast to the cycle length and
//! comparisons yield 1/0, which keeps the language closed over sequences.
//!
//! The reserved variables are `model_time` (cycle index, starting at 1),
//! its alias `markov_cycle`, and `state_time` (cycles spent in the current
//! state, only defined inside a state context). They cannot be shadowed.

mod eval;
mod parser;
mod print;

pub use eval::{eval_expression, Bindings, EvalContext, EvalError, BUILTIN_FUNCTIONS};
pub use parser::{parse_expression, ParseError};

/// Names with fixed meaning that bindings may not shadow.
pub const RESERVED_NAMES: [&str; 3] = ["model_time", "markov_cycle", "state_time"];

/// Identifiers that resolve to sex codes when no binding shadows them.
pub const SEX_CODE_NAMES: [(&str, f64); 3] = [("MLE", 1.0), ("FMLE", 2.0), ("BTSX", 3.0)];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

/// One argument in a call, optionally named (`discount(x, r = dr)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub name: Option<String>,
    pub value: Expr,
}

impl Arg {
    pub fn positional(value: Expr) -> Arg {
        Arg { name: None, value }
    }

    pub fn named(name: impl Into<String>, value: Expr) -> Arg {
        Arg { name: Some(name.into()), value }
    }
}

/// Parsed expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    Ident(String),
    Unary { op: UnaryOp, operand: Box<Expr> },
    Binary { op: BinaryOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Call { name: String, args: Vec<Arg> },
}

impl Expr {
    pub fn number(value: f64) -> Expr {
        Expr::Number(value)
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinaryOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }
    }

    pub fn unary(op: UnaryOp, operand: Expr) -> Expr {
        Expr::Unary { op, operand: Box::new(operand) }
    }

    pub fn call(name: impl Into<String>, args: Vec<Arg>) -> Expr {
        Expr::Call { name: name.into(), args }
    }

    /// Visits every referenced identifier, including those inside call
    /// arguments. Argument names and function names are not identifiers.
    pub fn visit_idents<'a>(&'a self, visit: &mut impl FnMut(&'a str)) {
        match self {
            Expr::Number(_) => {}
            Expr::Ident(name) => visit(name),
            Expr::Unary { operand, .. } => operand.visit_idents(visit),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.visit_idents(visit);
                rhs.visit_idents(visit);
            }
            Expr::Call { args, .. } => {
                for arg in args {
                    arg.value.visit_idents(visit);
                }
            }
        }
    }

    /// All referenced identifiers in first-appearance order, deduplicated.
    pub fn idents(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        self.visit_idents(&mut |name| {
            if !seen.contains(&name) {
                seen.push(name);
            }
        });
        seen
    }

    /// True when the tree mentions `name` anywhere, in any call branch.
    pub fn references(&self, name: &str) -> bool {
        let mut found = false;
        self.visit_idents(&mut |n| found |= n == name);
        found
    }

    /// All called function names, deduplicated, any depth.
    pub fn called_functions(&self) -> Vec<&str> {
        fn walk<'a>(expr: &'a Expr, out: &mut Vec<&'a str>) {
            match expr {
                Expr::Number(_) | Expr::Ident(_) => {}
                Expr::Unary { operand, .. } => walk(operand, out),
                Expr::Binary { lhs, rhs, .. } => {
                    walk(lhs, out);
                    walk(rhs, out);
                }
                Expr::Call { name, args } => {
                    if !out.contains(&name.as_str()) {
                        out.push(name);
                    }
                    for arg in args {
                        walk(&arg.value, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// True when the expression is the literal complement-free constant `v`.
    pub fn is_literal(&self, v: f64) -> bool {
        matches!(self, Expr::Number(n) if *n == v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ident_collection_covers_call_arguments() {
        let e = parse_expression("ifelse(state_time == 1, cost_surg, 0) + dispatch_strategy(a = x, b = y)")
            .unwrap();
        assert_eq!(e.idents(), vec!["state_time", "cost_surg", "x", "y"]);
        assert!(e.references("state_time"));
        assert!(!e.references("a"));
        assert_eq!(e.called_functions(), vec!["ifelse", "dispatch_strategy"]);
    }

    #[test]
    fn duplicate_idents_are_reported_once() {
        let e = parse_expression("p * p + p").unwrap();
        assert_eq!(e.idents(), vec!["p"]);
    }
}
