//! Canonical text form for expressions.
//!
//! The printer inserts parentheses only where precedence demands them, so
//! printing a parsed tree and re-parsing the output yields a structurally
//! identical tree. Used for diagram labels and anywhere a definition is
//! echoed back to the user.

use std::fmt;

use super::{BinaryOp, Expr, UnaryOp};

const PREC_OR: u8 = 1;
const PREC_AND: u8 = 2;
const PREC_CMP: u8 = 3;
const PREC_ADD: u8 = 4;
const PREC_MUL: u8 = 5;
const PREC_POW: u8 = 6;
const PREC_UNARY: u8 = 7;
const PREC_ATOM: u8 = 8;

fn op_symbol(op: BinaryOp) -> &'static str {
    match op {
        BinaryOp::Add => "+",
        BinaryOp::Sub => "-",
        BinaryOp::Mul => "*",
        BinaryOp::Div => "/",
        BinaryOp::Pow => "^",
        BinaryOp::Lt => "<",
        BinaryOp::Le => "<=",
        BinaryOp::Gt => ">",
        BinaryOp::Ge => ">=",
        BinaryOp::Eq => "==",
        BinaryOp::Ne => "!=",
        BinaryOp::And => "&&",
        BinaryOp::Or => "||",
    }
}

fn op_prec(op: BinaryOp) -> u8 {
    match op {
        BinaryOp::Or => PREC_OR,
        BinaryOp::And => PREC_AND,
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge | BinaryOp::Eq | BinaryOp::Ne => {
            PREC_CMP
        }
        BinaryOp::Add | BinaryOp::Sub => PREC_ADD,
        BinaryOp::Mul | BinaryOp::Div => PREC_MUL,
        BinaryOp::Pow => PREC_POW,
    }
}

fn prec(expr: &Expr) -> u8 {
    match expr {
        Expr::Number(n) if *n < 0.0 => PREC_UNARY,
        Expr::Number(_) | Expr::Ident(_) | Expr::Call { .. } => PREC_ATOM,
        Expr::Unary { .. } => PREC_UNARY,
        Expr::Binary { op, .. } => op_prec(*op),
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, child: &Expr, min_prec: u8) -> fmt::Result {
    if prec(child) < min_prec {
        write!(f, "({child})")
    } else {
        write!(f, "{child}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Number(n) => write!(f, "{n}"),
            Expr::Ident(name) => f.write_str(name),
            Expr::Unary { op, operand } => {
                let symbol = match op {
                    UnaryOp::Neg => "-",
                    UnaryOp::Not => "!",
                };
                f.write_str(symbol)?;
                write_child(f, operand, PREC_UNARY)
            }
            Expr::Binary { op, lhs, rhs } => {
                let p = op_prec(*op);
                // `^` is right-associative, everything else groups left.
                let (lmin, rmin) = if *op == BinaryOp::Pow { (p + 1, p) } else { (p, p + 1) };
                write_child(f, lhs, lmin)?;
                write!(f, " {} ", op_symbol(*op))?;
                write_child(f, rhs, rmin)
            }
            Expr::Call { name, args } => {
                write!(f, "{name}(")?;
                for (i, arg) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if let Some(argname) = &arg.name {
                        write!(f, "{argname} = ")?;
                    }
                    write!(f, "{}", arg.value)?;
                }
                f.write_str(")")
            }
        }
    }
}
