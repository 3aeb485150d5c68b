use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assertion::{Assertion, PureOp};

/// Side-effect-free expression of the mini-language and of surface assertions.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Expr {
    Var(String),
    Num(i64),
    /// `e->f`
    Field(Box<Expr>, String),
    /// `*e`
    Deref(Box<Expr>),
    /// `&e`, where `e` is a variable, a field access or a dereference
    AddrOf(Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<String>) -> Self {
        Expr::Var(name.into())
    }

    pub fn field(base: Expr, f: impl Into<String>) -> Self {
        Expr::Field(Box::new(base), f.into())
    }

    pub fn deref(e: Expr) -> Self {
        Expr::Deref(Box::new(e))
    }

    pub fn is_memory_read(&self) -> bool {
        match self {
            Expr::Field(..) | Expr::Deref(_) => true,
            Expr::AddrOf(inner) => match &**inner {
                Expr::Field(b, _) => b.is_memory_read(),
                Expr::Deref(b) => b.is_memory_read(),
                _ => false,
            },
            Expr::Var(_) | Expr::Num(_) => false,
        }
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Expr::Var(v) => {
                out.insert(v.clone());
            }
            Expr::Num(_) => {}
            Expr::Field(b, _) | Expr::Deref(b) | Expr::AddrOf(b) => b.collect_vars(out),
        }
    }

    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Expr {
        match self {
            Expr::Var(v) => Expr::Var(f(v)),
            Expr::Num(n) => Expr::Num(*n),
            Expr::Field(b, fld) => Expr::Field(Box::new(b.rename(f)), fld.clone()),
            Expr::Deref(b) => Expr::Deref(Box::new(b.rename(f))),
            Expr::AddrOf(b) => Expr::AddrOf(Box::new(b.rename(f))),
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(v) => f.write_str(v),
            Expr::Num(n) => write!(f, "{n}"),
            Expr::Field(b, fld) => match &**b {
                Expr::Var(_) | Expr::Num(_) | Expr::Field(..) => write!(f, "{b}->{fld}"),
                _ => write!(f, "({b})->{fld}"),
            },
            Expr::Deref(b) => match &**b {
                Expr::Var(_) | Expr::Num(_) => write!(f, "*{b}"),
                _ => write!(f, "*({b})"),
            },
            Expr::AddrOf(b) => match &**b {
                Expr::Var(_) => write!(f, "&{b}"),
                _ => write!(f, "&({b})"),
            },
        }
    }
}

/// Boolean condition of `while`/`if`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cond {
    Lit(bool),
    Cmp(PureOp, Expr, Expr),
    Not(Box<Cond>),
    And(Box<Cond>, Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
}

impl Cond {
    pub fn rename(&self, f: &impl Fn(&str) -> String) -> Cond {
        match self {
            Cond::Lit(b) => Cond::Lit(*b),
            Cond::Cmp(op, l, r) => Cond::Cmp(*op, l.rename(f), r.rename(f)),
            Cond::Not(c) => Cond::Not(Box::new(c.rename(f))),
            Cond::And(a, b) => Cond::And(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Cond::Or(a, b) => Cond::Or(Box::new(a.rename(f)), Box::new(b.rename(f))),
        }
    }

    pub fn negate(&self) -> Cond {
        Cond::Not(Box::new(self.clone()))
    }

    pub fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        match self {
            Cond::Lit(_) => {}
            Cond::Cmp(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            Cond::Not(c) => c.collect_vars(out),
            Cond::And(a, b) | Cond::Or(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }
}

impl fmt::Display for Cond {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cond::Lit(b) => write!(f, "{}", if *b { "1" } else { "0" }),
            Cond::Cmp(op, l, r) => write!(f, "{l} {} {r}", op.symbol()),
            Cond::Not(c) => write!(f, "!({c})"),
            Cond::And(a, b) => write!(f, "({a}) && ({b})"),
            Cond::Or(a, b) => write!(f, "({a}) || ({b})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LValue {
    Var(String),
    Field(Expr, String),
    Deref(Expr),
}

impl fmt::Display for LValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LValue::Var(v) => f.write_str(v),
            LValue::Field(b, fld) => write!(f, "{}", Expr::field(b.clone(), fld.clone())),
            LValue::Deref(e) => write!(f, "{}", Expr::deref(e.clone())),
        }
    }
}

/// Statement kinds. Every statement carries its source line in [`Stmt`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StmtKind {
    Skip,
    Assign(LValue, Expr),
    Seq(Vec<Stmt>),
    If(Cond, Box<Stmt>, Box<Stmt>),
    While(Cond, Box<Stmt>),
    Call(String, Vec<Expr>),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Stmt {
    pub kind: StmtKind,
    pub line: usize,
}

impl Stmt {
    pub fn new(kind: StmtKind, line: usize) -> Self {
        Stmt { kind, line }
    }

    pub fn skip() -> Self {
        Stmt::new(StmtKind::Skip, 0)
    }

    /// Sequential composition, flattening nested sequences and dropping skips.
    pub fn seq(stmts: Vec<Stmt>) -> Stmt {
        let mut flat = vec![];
        for s in stmts {
            match s.kind {
                StmtKind::Seq(inner) => flat.extend(Stmt::seq(inner).into_flat()),
                StmtKind::Skip => {}
                _ => flat.push(s),
            }
        }
        match flat.len() {
            0 => Stmt::skip(),
            1 => flat.pop().unwrap(),
            _ => {
                let line = flat[0].line;
                Stmt::new(StmtKind::Seq(flat), line)
            }
        }
    }

    /// Top-level statements of a (possibly nested) sequence.
    pub fn into_flat(self) -> Vec<Stmt> {
        match self.kind {
            StmtKind::Seq(v) => v.into_iter().flat_map(Stmt::into_flat).collect(),
            StmtKind::Skip => vec![],
            _ => vec![self],
        }
    }

    pub fn has_loop(&self) -> bool {
        match &self.kind {
            StmtKind::While(..) => true,
            StmtKind::Seq(v) => v.iter().any(Stmt::has_loop),
            StmtKind::If(_, a, b) => a.has_loop() || b.has_loop(),
            StmtKind::Skip | StmtKind::Assign(..) | StmtKind::Call(..) => false,
        }
    }

    pub fn has_call(&self) -> bool {
        match &self.kind {
            StmtKind::Call(..) => true,
            StmtKind::Seq(v) => v.iter().any(Stmt::has_call),
            StmtKind::If(_, a, b) => a.has_call() || b.has_call(),
            StmtKind::While(_, b) => b.has_call(),
            StmtKind::Skip | StmtKind::Assign(..) => false,
        }
    }

    /// Structural equality ignoring line numbers.
    pub fn same_shape(&self, other: &Stmt) -> bool {
        match (&self.kind, &other.kind) {
            (StmtKind::Seq(a), StmtKind::Seq(b)) => {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
            }
            (StmtKind::If(c1, a1, b1), StmtKind::If(c2, a2, b2)) => {
                c1 == c2 && a1.same_shape(a2) && b1.same_shape(b2)
            }
            (StmtKind::While(c1, b1), StmtKind::While(c2, b2)) => c1 == c2 && b1.same_shape(b2),
            (a, b) => a == b,
        }
    }
}

impl fmt::Display for Stmt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            StmtKind::Skip => f.write_str(";"),
            StmtKind::Assign(l, e) => write!(f, "{l} = {e};"),
            StmtKind::Seq(v) => {
                for (i, s) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{s}")?;
                }
                Ok(())
            }
            StmtKind::If(c, a, b) => write!(f, "if ({c}) {{ {a} }} else {{ {b} }}"),
            StmtKind::While(c, b) => write!(f, "while ({c}) {{ {b} }}"),
            StmtKind::Call(name, args) => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "{name}({});", args.join(", "))
            }
        }
    }
}

/// Surface assertion atom before dereference desugaring.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SurfaceAtom {
    Cmp(PureOp, Expr, Expr),
    Emp,
    True,
    Pred(String, Vec<Expr>),
    MapsTo(Expr, Expr),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceHeap {
    pub binders: Vec<String>,
    pub atoms: Vec<SurfaceAtom>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SurfaceAssertion {
    pub disjuncts: Vec<SurfaceHeap>,
}

/// Annotated function of a `.invc` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Func {
    pub name: String,
    pub params: Vec<String>,
    pub requires: Assertion,
    pub ensures: Assertion,
    /// Expected invariants, one per loop in source order, for golden checks.
    pub invariants: Vec<Assertion>,
    pub body: Stmt,
    pub line: usize,
}
