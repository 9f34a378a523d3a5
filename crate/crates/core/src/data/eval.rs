use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};

use thiserror::Error;

use super::expr::{BinOp, Expr, Expression, Func, Ref};
use super::DataTable;
use crate::math;
use crate::runtime::StateKey;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("unresolved reference `{0}`")]
    UnresolvedRef(String),
    #[error("domain error in `{op}`")]
    DomainError { op: &'static str },
}

/// Source of reference values during evaluation.
pub trait Scope {
    fn lookup(&self, r: &Ref) -> Option<f64>;
    /// Seconds since session start.
    fn clock(&self) -> f64;
}

/// Runtime inputs for evaluation: scalar equipment variables, one cursor per
/// table, and the session clock.
#[derive(Debug, Clone)]
pub struct EvalContext<'a> {
    pub state: BTreeMap<StateKey, f64>,
    pub tables: &'a [DataTable],
    pub cursors: BTreeMap<String, usize>,
    pub clock: f64,
}

impl<'a> EvalContext<'a> {
    pub fn new(tables: &'a [DataTable], clock: f64) -> Self {
        Self {
            state: BTreeMap::new(),
            tables,
            cursors: BTreeMap::new(),
            clock,
        }
    }

    pub fn with_state(mut self, instance: &str, var: &str, value: f64) -> Self {
        self.state.insert(StateKey::new(instance, var), value);
        self
    }

    pub fn with_cursor(mut self, table: &str, row: usize) -> Self {
        self.cursors.insert(table.to_string(), row);
        self
    }
}

impl Scope for EvalContext<'_> {
    fn lookup(&self, r: &Ref) -> Option<f64> {
        match self.tables.iter().find(|t| t.name == r.scope) {
            Some(table) => {
                let row = self.cursors.get(&r.scope).copied().unwrap_or(0);
                table.value(&r.name, row)
            }
            None => self.state.get(&StateKey::new(&r.scope, &r.name)).copied(),
        }
    }

    fn clock(&self) -> f64 {
        self.clock
    }
}

/// Evaluates in IEEE-754 double precision. Division by zero, `log` of a
/// non-positive value, `clamp` with `lo > hi`, and any non-finite
/// intermediate result are domain errors.
pub fn evaluate(e: &Expression, scope: &impl Scope) -> Result<f64, EvalError> {
    eval_expr(e.ast(), scope)
}

pub(crate) fn eval_expr(e: &Expr, scope: &impl Scope) -> Result<f64, EvalError> {
    match e {
        Expr::Number(v) => Ok(*v),
        Expr::Clock => Ok(scope.clock()),
        Expr::Ref(r) => scope
            .lookup(r)
            .ok_or_else(|| EvalError::UnresolvedRef(r.to_string())),
        Expr::Neg(inner) => Ok(-eval_expr(inner, scope)?),
        Expr::Binary(op, a, b) => {
            let x = eval_expr(a, scope)?;
            let y = eval_expr(b, scope)?;
            let v = match op {
                BinOp::Add => x + y,
                BinOp::Sub => x - y,
                BinOp::Mul => x * y,
                BinOp::Div if y == 0.0 => return Err(EvalError::DomainError { op: "/" }),
                BinOp::Div => x / y,
                BinOp::Pow => math::powf(x, y),
            };
            finite(v, op.symbol())
        }
        Expr::Call(func, args) => {
            let mut values = [0.0f64; 3];
            let v = match func {
                Func::Min | Func::Max => {
                    let mut acc = eval_expr(&args[0], scope)?;
                    for a in &args[1..] {
                        let x = eval_expr(a, scope)?;
                        acc = if *func == Func::Min {
                            acc.min(x)
                        } else {
                            acc.max(x)
                        };
                    }
                    acc
                }
                _ => {
                    for (slot, a) in values.iter_mut().zip(args) {
                        *slot = eval_expr(a, scope)?;
                    }
                    let x = values[0];
                    match func {
                        Func::Abs => x.abs(),
                        Func::Sin => math::sin(x),
                        Func::Cos => math::cos(x),
                        Func::Exp => math::exp(x),
                        Func::Log if x <= 0.0 => return Err(EvalError::DomainError { op: "log" }),
                        Func::Log => math::ln(x),
                        Func::Clamp => {
                            let (lo, hi) = (values[1], values[2]);
                            if lo > hi {
                                return Err(EvalError::DomainError { op: "clamp" });
                            }
                            x.max(lo).min(hi)
                        }
                        Func::Min | Func::Max => unreachable!(),
                    }
                }
            };
            finite(v, func.name())
        }
    }
}

fn finite(v: f64, op: &'static str) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(EvalError::DomainError { op })
    }
}
