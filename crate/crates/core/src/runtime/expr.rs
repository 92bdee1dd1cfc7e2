//! Expression evaluation over a session's value tree.

use std::cmp::Ordering;

use thiserror::Error;

use crate::ast::{BinaryOp, Expr, UnaryOp};
use crate::value::{BasicValue, ValueTree};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{0}")]
pub struct EvalError(pub String);

fn err<T>(msg: String) -> Result<T, EvalError> {
    Err(EvalError(msg))
}

/// Reads the root at `path`; absent paths read as empty.
pub fn read_root<S: AsRef<str>>(state: &ValueTree, path: &[S]) -> BasicValue {
    state
        .get_path(path)
        .map(|n| n.root().clone())
        .unwrap_or_default()
}

pub fn eval_expr(expr: &Expr, state: &ValueTree) -> Result<BasicValue, EvalError> {
    match expr {
        Expr::Literal(v) => Ok(v.clone()),
        Expr::Path(p) => Ok(read_root(state, &p.segments)),
        Expr::IsDefined(p) => Ok(BasicValue::Bool(
            state.get_path(&p.segments).is_some_and(ValueTree::is_defined),
        )),
        Expr::Unary(op, e) => unary(*op, eval_expr(e, state)?),
        Expr::Binary { op, lhs, rhs, .. } => match op {
            BinaryOp::And | BinaryOp::Or => {
                let l = truth(&eval_expr(lhs, state)?, op.symbol())?;
                if l == (*op == BinaryOp::Or) {
                    return Ok(BasicValue::Bool(l));
                }
                Ok(BasicValue::Bool(truth(&eval_expr(rhs, state)?, op.symbol())?))
            }
            _ => binary(*op, eval_expr(lhs, state)?, eval_expr(rhs, state)?),
        },
    }
}

pub fn truth(v: &BasicValue, context: &str) -> Result<bool, EvalError> {
    match v {
        BasicValue::Bool(b) => Ok(*b),
        other => err(format!(
            "`{context}` needs a bool, found {}",
            other.type_name()
        )),
    }
}

fn unary(op: UnaryOp, v: BasicValue) -> Result<BasicValue, EvalError> {
    match (op, v) {
        (UnaryOp::Not, v) => Ok(BasicValue::Bool(!truth(&v, "!")?)),
        (UnaryOp::Neg, BasicValue::Int(i)) => Ok(BasicValue::Int(i.wrapping_neg())),
        (UnaryOp::Neg, BasicValue::Long(l)) => Ok(BasicValue::Long(l.wrapping_neg())),
        (UnaryOp::Neg, BasicValue::Double(d)) => Ok(BasicValue::Double(-d)),
        (UnaryOp::Neg, v) => err(format!("cannot negate {}", v.type_name())),
    }
}

/// Both operands widened to a common numeric representation.
enum Num {
    Int(i32, i32),
    Long(i64, i64),
    Double(f64, f64),
}

fn as_f64(v: &BasicValue) -> Option<f64> {
    match v {
        BasicValue::Int(i) => Some(*i as f64),
        BasicValue::Long(l) => Some(*l as f64),
        BasicValue::Double(d) => Some(*d),
        _ => None,
    }
}

fn as_i64(v: &BasicValue) -> Option<i64> {
    match v {
        BasicValue::Int(i) => Some(*i as i64),
        BasicValue::Long(l) => Some(*l),
        _ => None,
    }
}

fn numeric(l: &BasicValue, r: &BasicValue) -> Option<Num> {
    use BasicValue::*;
    match (l, r) {
        (Int(a), Int(b)) => Some(Num::Int(*a, *b)),
        (Double(_), _) | (_, Double(_)) => Some(Num::Double(as_f64(l)?, as_f64(r)?)),
        _ => Some(Num::Long(as_i64(l)?, as_i64(r)?)),
    }
}

fn arith(op: BinaryOp, l: &BasicValue, r: &BasicValue) -> Result<BasicValue, EvalError> {
    let Some(n) = numeric(l, r) else {
        return err(format!(
            "cannot apply `{}` to {} and {}",
            op.symbol(),
            l.type_name(),
            r.type_name()
        ));
    };
    let div_zero = || err(format!("division by zero in `{}`", op.symbol()));
    Ok(match n {
        Num::Int(a, b) => BasicValue::Int(match op {
            BinaryOp::Add => a.wrapping_add(b),
            BinaryOp::Sub => a.wrapping_sub(b),
            BinaryOp::Mul => a.wrapping_mul(b),
            BinaryOp::Div if b == 0 => return div_zero(),
            BinaryOp::Div => a.wrapping_div(b),
            BinaryOp::Rem if b == 0 => return div_zero(),
            BinaryOp::Rem => a.wrapping_rem(b),
            _ => unreachable!(),
        }),
        Num::Long(a, b) => BasicValue::Long(match op {
            BinaryOp::Add => a.wrapping_add(b),
            BinaryOp::Sub => a.wrapping_sub(b),
            BinaryOp::Mul => a.wrapping_mul(b),
            BinaryOp::Div if b == 0 => return div_zero(),
            BinaryOp::Div => a.wrapping_div(b),
            BinaryOp::Rem if b == 0 => return div_zero(),
            BinaryOp::Rem => a.wrapping_rem(b),
            _ => unreachable!(),
        }),
        Num::Double(a, b) => BasicValue::Double(match op {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
            BinaryOp::Rem => a % b,
            _ => unreachable!(),
        }),
    })
}

/// Equality on basic values. Numbers compare by value across int, long
/// and double; empty equals only empty; other kinds must match exactly.
pub fn values_equal(l: &BasicValue, r: &BasicValue) -> bool {
    match numeric(l, r) {
        Some(Num::Int(a, b)) => a == b,
        Some(Num::Long(a, b)) => a == b,
        Some(Num::Double(a, b)) => a == b,
        None => l == r,
    }
}

fn compare(op: BinaryOp, l: &BasicValue, r: &BasicValue) -> Result<bool, EvalError> {
    let ord = match (numeric(l, r), l, r) {
        (Some(Num::Int(a, b)), ..) => Some(a.cmp(&b)),
        (Some(Num::Long(a, b)), ..) => Some(a.cmp(&b)),
        (Some(Num::Double(a, b)), ..) => a.partial_cmp(&b),
        (None, BasicValue::Str(a), BasicValue::Str(b)) => Some(a.cmp(b)),
        _ => {
            return err(format!(
                "cannot compare {} with {}",
                l.type_name(),
                r.type_name()
            ))
        }
    };
    // NaN compares false
    Ok(ord.is_some_and(|o| match op {
        BinaryOp::Lt => o == Ordering::Less,
        BinaryOp::Le => o != Ordering::Greater,
        BinaryOp::Gt => o == Ordering::Greater,
        BinaryOp::Ge => o != Ordering::Less,
        _ => unreachable!(),
    }))
}

fn binary(op: BinaryOp, l: BasicValue, r: BasicValue) -> Result<BasicValue, EvalError> {
    use BasicValue::*;
    match op {
        BinaryOp::Add => match (l, r) {
            (Empty, v) | (v, Empty) => Ok(v),
            (l @ Str(_), r) | (l, r @ Str(_)) => Ok(Str(format!("{l}{r}"))),
            (l, r) => arith(op, &l, &r),
        },
        BinaryOp::Sub | BinaryOp::Mul | BinaryOp::Div | BinaryOp::Rem => arith(op, &l, &r),
        BinaryOp::Eq => Ok(Bool(values_equal(&l, &r))),
        BinaryOp::Ne => Ok(Bool(!values_equal(&l, &r))),
        BinaryOp::Lt | BinaryOp::Le | BinaryOp::Gt | BinaryOp::Ge => {
            Ok(Bool(compare(op, &l, &r)?))
        }
        BinaryOp::And => Ok(Bool(truth(&l, "&&")? && truth(&r, "&&")?)),
        BinaryOp::Or => Ok(Bool(truth(&l, "||")? || truth(&r, "||")?)),
    }
}
