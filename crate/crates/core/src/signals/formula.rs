use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Real-valued term over signal values at a single time point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Signal(String),
    Const(f64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    /// Constant times a term.
    Scale(f64, Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn signal(name: &str) -> Expr {
        Expr::Signal(name.to_string())
    }

    pub fn eval(&self, lookup: &impl Fn(&str) -> f64) -> f64 {
        match self {
            Expr::Signal(n) => lookup(n),
            Expr::Const(c) => *c,
            Expr::Add(a, b) => a.eval(lookup) + b.eval(lookup),
            Expr::Sub(a, b) => a.eval(lookup) - b.eval(lookup),
            Expr::Scale(c, e) => c * e.eval(lookup),
            Expr::Abs(e) => e.eval(lookup).abs(),
        }
    }

    pub(crate) fn collect_signals<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Signal(n) => {
                out.insert(n);
            }
            Expr::Const(_) => {}
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.collect_signals(out);
                b.collect_signals(out);
            }
            Expr::Scale(_, e) | Expr::Abs(e) => e.collect_signals(out),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    fn symbol(self) -> &'static str {
        match self {
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

/// Bounded-time STL formula. Temporal bounds are in seconds relative to the
/// evaluation time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Pred { expr: Expr, cmp: Cmp, threshold: f64 },
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
    Always { lo: f64, hi: f64, body: Box<Formula> },
    Eventually { lo: f64, hi: f64, body: Box<Formula> },
}

impl Formula {
    pub fn pred(expr: Expr, cmp: Cmp, threshold: f64) -> Formula {
        Formula::Pred { expr, cmp, threshold }
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Formula, b: Formula) -> Formula {
        Formula::Implies(Box::new(a), Box::new(b))
    }

    pub fn always(lo: f64, hi: f64, body: Formula) -> Formula {
        Formula::Always { lo, hi, body: Box::new(body) }
    }

    pub fn eventually(lo: f64, hi: f64, body: Formula) -> Formula {
        Formula::Eventually { lo, hi, body: Box::new(body) }
    }

    /// Margin of an atomic predicate: positive when it holds.
    pub(crate) fn margin(expr_value: f64, cmp: Cmp, threshold: f64) -> f64 {
        match cmp {
            Cmp::Lt | Cmp::Le => threshold - expr_value,
            Cmp::Gt | Cmp::Ge => expr_value - threshold,
        }
    }

    /// Names of all signals referenced by the formula.
    pub fn signals(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Formula::Pred { expr, .. } => expr.collect_signals(out),
            Formula::Not(f) => f.collect(out),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
                a.collect(out);
                b.collect(out);
            }
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => body.collect(out),
        }
    }

    /// Nesting depth of operators; a predicate has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Pred { .. } => 0,
            Formula::Not(f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => 1 + a.depth().max(b.depth()),
            Formula::Always { body, .. } | Formula::Eventually { body, .. } => 1 + body.depth(),
        }
    }

    /// Look-ahead in seconds needed beyond the evaluation time.
    pub fn horizon(&self) -> f64 {
        match self {
            Formula::Pred { .. } => 0.0,
            Formula::Not(f) => f.horizon(),
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => a.horizon().max(b.horizon()),
            Formula::Always { hi, body, .. } | Formula::Eventually { hi, body, .. } => hi + body.horizon(),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Signal(n) => write!(f, "{n}"),
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Add(a, b) => write!(f, "{a} + {b}"),
            Expr::Sub(a, b) => match **b {
                Expr::Add(..) | Expr::Sub(..) => write!(f, "{a} - ({b})"),
                _ => write!(f, "{a} - {b}"),
            },
            Expr::Scale(c, e) => match **e {
                Expr::Add(..) | Expr::Sub(..) => write!(f, "{c} * ({e})"),
                _ => write!(f, "{c} * {e}"),
            },
            Expr::Abs(e) => write!(f, "abs({e})"),
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred { expr, cmp, threshold } => write!(f, "({expr} {} {threshold})", cmp.symbol()),
            Formula::Not(a) => write!(f, "not {a}"),
            Formula::And(a, b) => write!(f, "({a} and {b})"),
            Formula::Or(a, b) => write!(f, "({a} or {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
            Formula::Always { lo, hi, body } => write!(f, "always[{lo},{hi}] {body}"),
            Formula::Eventually { lo, hi, body } => write!(f, "eventually[{lo},{hi}] {body}"),
        }
    }
}
