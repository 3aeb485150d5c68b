use std::collections::BTreeSet;

use super::ast::{Cond, Func, LValue, Stmt, StmtKind};
use super::FrontendError;

/// A body decomposed around its first top-level loop.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitProgram {
    pub before: Stmt,
    pub cond: Cond,
    pub body: Stmt,
    pub after: Stmt,
}

impl SplitProgram {
    pub fn recompose(&self) -> Stmt {
        let line = self.body.line;
        Stmt::seq(vec![
            self.before.clone(),
            Stmt::new(StmtKind::While(self.cond.clone(), Box::new(self.body.clone())), line),
            self.after.clone(),
        ])
    }
}

pub fn split_program(body: &Stmt) -> Result<SplitProgram, FrontendError> {
    let flat = body.clone().into_flat();
    let idx = flat
        .iter()
        .position(|s| matches!(s.kind, StmtKind::While(..)))
        .ok_or(FrontendError::NoLoop)?;
    let mut before = flat;
    let mut after = before.split_off(idx);
    let the_loop = after.remove(0);
    let StmtKind::While(cond, inner) = the_loop.kind else { unreachable!() };
    Ok(SplitProgram { before: Stmt::seq(before), cond, body: *inner, after: Stmt::seq(after) })
}

/// Replaces every call by the callee's body, with the callee's variables
/// renamed to `{var}_{callee}{n}` and parameters bound by assignments.
pub fn inline_calls(body: &Stmt, funcs: &[Func]) -> Result<Stmt, FrontendError> {
    let mut counter = 0;
    inline(body, funcs, &mut vec![], &mut counter)
}

fn inline(s: &Stmt, funcs: &[Func], stack: &mut Vec<String>, counter: &mut usize) -> Result<Stmt, FrontendError> {
    let kind = match &s.kind {
        StmtKind::Call(name, args) => {
            let f = funcs
                .iter()
                .find(|f| f.name == *name)
                .ok_or_else(|| FrontendError::UnknownFunc(name.clone()))?;
            if stack.contains(name) {
                return Err(FrontendError::Recursion(name.clone()));
            }
            if f.params.len() != args.len() {
                return Err(FrontendError::CallArity {
                    name: name.clone(),
                    expected: f.params.len(),
                    found: args.len(),
                });
            }
            *counter += 1;
            let n = *counter;
            let rename = |v: &str| format!("{v}_{name}{n}");
            stack.push(name.clone());
            let callee = inline(&f.body, funcs, stack, counter)?;
            stack.pop();
            let mut stmts: Vec<Stmt> = f
                .params
                .iter()
                .zip(args)
                .map(|(p, a)| Stmt::new(StmtKind::Assign(LValue::Var(rename(p)), a.clone()), s.line))
                .collect();
            stmts.push(rename_stmt(&callee, &rename));
            return Ok(Stmt::seq(stmts));
        }
        StmtKind::Seq(v) => {
            StmtKind::Seq(v.iter().map(|x| inline(x, funcs, stack, counter)).collect::<Result<_, _>>()?)
        }
        StmtKind::If(c, a, b) => StmtKind::If(
            c.clone(),
            Box::new(inline(a, funcs, stack, counter)?),
            Box::new(inline(b, funcs, stack, counter)?),
        ),
        StmtKind::While(c, b) => StmtKind::While(c.clone(), Box::new(inline(b, funcs, stack, counter)?)),
        other => other.clone(),
    };
    Ok(Stmt::new(kind, s.line))
}

fn rename_stmt(s: &Stmt, f: &impl Fn(&str) -> String) -> Stmt {
    let kind = match &s.kind {
        StmtKind::Skip => StmtKind::Skip,
        StmtKind::Assign(lv, e) => {
            let lv = match lv {
                LValue::Var(v) => LValue::Var(f(v)),
                LValue::Field(b, fld) => LValue::Field(b.rename(f), fld.clone()),
                LValue::Deref(b) => LValue::Deref(b.rename(f)),
            };
            StmtKind::Assign(lv, e.rename(f))
        }
        StmtKind::Seq(v) => StmtKind::Seq(v.iter().map(|x| rename_stmt(x, f)).collect()),
        StmtKind::If(c, a, b) => StmtKind::If(c.rename(f), Box::new(rename_stmt(a, f)), Box::new(rename_stmt(b, f))),
        StmtKind::While(c, b) => StmtKind::While(c.rename(f), Box::new(rename_stmt(b, f))),
        StmtKind::Call(n, args) => StmtKind::Call(n.clone(), args.iter().map(|a| a.rename(f)).collect()),
    };
    Stmt::new(kind, s.line)
}

/// Variables assigned anywhere in `s`.
pub fn assigned_vars(s: &Stmt, out: &mut BTreeSet<String>) {
    match &s.kind {
        StmtKind::Assign(LValue::Var(v), _) => {
            out.insert(v.clone());
        }
        StmtKind::Seq(v) => v.iter().for_each(|x| assigned_vars(x, out)),
        StmtKind::If(_, a, b) => {
            assigned_vars(a, out);
            assigned_vars(b, out);
        }
        StmtKind::While(_, b) => assigned_vars(b, out),
        _ => {}
    }
}
