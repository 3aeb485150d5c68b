use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::search::eval_op;
use super::{ConcreteHeap, Loc, Val};
use crate::frontend::ast::{Cond, Expr, LValue, Stmt, StmtKind};

pub const DEFAULT_ITERATION_CAP: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum Fault {
    #[error("line {line}: null dereference in `{expr}`")]
    NullDeref { line: usize, expr: String },
    #[error("line {line}: access to unallocated cell in `{expr}`")]
    Unalloc { line: usize, expr: String },
    #[error("line {line}: loop exceeded {cap} iterations")]
    IterationCap { line: usize, cap: usize },
    #[error("line {line}: {what}")]
    Unsupported { line: usize, what: String },
}

struct Machine {
    heap: ConcreteHeap,
    cap: usize,
}

impl Machine {
    fn addr(&self, e: &Expr, line: usize) -> Result<Option<Loc>, Fault> {
        let a = match e {
            Expr::Field(b, f) => match self.eval(b, line)? {
                Val::Int(0) => return Err(Fault::NullDeref { line, expr: e.to_string() }),
                Val::Int(k) => Val::Field(k, f.clone()),
                _ => return Err(Fault::Unalloc { line, expr: e.to_string() }),
            },
            Expr::Deref(b) => self.eval(b, line)?,
            _ => unreachable!("not a memory access"),
        };
        match a {
            Val::Int(0) | Val::Field(0, _) => Err(Fault::NullDeref { line, expr: e.to_string() }),
            Val::Stack(_) => Ok(None),
            other => {
                let loc = other.loc().unwrap();
                if self.heap.get(&loc).is_none() {
                    return Err(Fault::Unalloc { line, expr: e.to_string() });
                }
                Ok(Some(loc))
            }
        }
    }

    fn stack_var(&self, e: &Expr, line: usize) -> Result<String, Fault> {
        match e {
            Expr::Deref(b) => match self.eval(b, line)? {
                Val::Stack(x) => Ok(x),
                _ => unreachable!(),
            },
            _ => unreachable!(),
        }
    }

    fn eval(&self, e: &Expr, line: usize) -> Result<Val, Fault> {
        match e {
            Expr::Var(v) => self.heap.store.get(v).cloned().ok_or_else(|| Fault::Unsupported {
                line,
                what: format!("read of uninitialized variable `{v}`"),
            }),
            Expr::Num(n) => Ok(Val::Int(*n)),
            Expr::Field(..) | Expr::Deref(_) => match self.addr(e, line)? {
                Some(loc) => Ok(self.heap.get(&loc).unwrap().clone()),
                None => {
                    let x = self.stack_var(e, line)?;
                    self.eval(&Expr::Var(x), line)
                }
            },
            Expr::AddrOf(inner) => match &**inner {
                Expr::Var(x) => Ok(Val::Stack(x.clone())),
                Expr::Field(b, f) => match self.eval(b, line)? {
                    Val::Int(k) => Ok(Val::Field(k, f.clone())),
                    _ => Err(Fault::Unalloc { line, expr: e.to_string() }),
                },
                Expr::Deref(b) => self.eval(b, line),
                _ => Err(Fault::Unsupported { line, what: format!("address of `{inner}`") }),
            },
        }
    }

    fn cond(&self, c: &Cond, line: usize) -> Result<bool, Fault> {
        Ok(match c {
            Cond::Lit(b) => *b,
            Cond::Cmp(op, l, r) => eval_op(*op, &self.eval(l, line)?, &self.eval(r, line)?),
            Cond::Not(c) => !self.cond(c, line)?,
            // C short-circuit evaluation
            Cond::And(a, b) => self.cond(a, line)? && self.cond(b, line)?,
            Cond::Or(a, b) => self.cond(a, line)? || self.cond(b, line)?,
        })
    }

    fn run(&mut self, s: &Stmt) -> Result<(), Fault> {
        let line = s.line;
        match &s.kind {
            StmtKind::Skip => {}
            StmtKind::Assign(lv, e) => {
                let v = self.eval(e, line)?;
                match lv {
                    LValue::Var(x) => {
                        self.heap.store.insert(x.clone(), v);
                    }
                    LValue::Field(b, f) => {
                        let target = Expr::field(b.clone(), f.clone());
                        let loc = self.addr(&target, line)?.expect("field cells live on the heap");
                        self.heap.set(loc, v);
                    }
                    LValue::Deref(b) => {
                        let target = Expr::deref(b.clone());
                        match self.addr(&target, line)? {
                            Some(loc) => self.heap.set(loc, v),
                            None => {
                                let x = self.stack_var(&target, line)?;
                                self.heap.store.insert(x, v);
                            }
                        }
                    }
                }
            }
            StmtKind::Seq(v) => {
                for x in v {
                    self.run(x)?;
                }
            }
            StmtKind::If(c, a, b) => {
                if self.cond(c, line)? {
                    self.run(a)?;
                } else {
                    self.run(b)?;
                }
            }
            StmtKind::While(c, body) => {
                let mut n = 0;
                while self.cond(c, line)? {
                    n += 1;
                    if n > self.cap {
                        return Err(Fault::IterationCap { line, cap: self.cap });
                    }
                    self.run(body)?;
                }
            }
            StmtKind::Call(name, _) => {
                return Err(Fault::Unsupported { line, what: format!("call to `{name}` (inline calls first)") })
            }
        }
        Ok(())
    }
}

/// Runs `s` on `h` with C-like semantics.
pub fn concrete_exec(h: &ConcreteHeap, s: &Stmt, iteration_cap: usize) -> Result<ConcreteHeap, Fault> {
    let mut m = Machine { heap: h.clone(), cap: iteration_cap };
    m.run(s)?;
    Ok(m.heap)
}

pub fn eval_cond(h: &ConcreteHeap, c: &Cond) -> Result<bool, Fault> {
    Machine { heap: h.clone(), cap: 0 }.cond(c, 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_stmts;

    #[test]
    fn null_load_faults() {
        let h = ConcreteHeap::new().with_var("p", 0);
        let s = parse_stmts("t = p->tail;").unwrap();
        assert!(matches!(concrete_exec(&h, &s, 10), Err(Fault::NullDeref { line: 1, .. })));
    }

    #[test]
    fn skip_is_identity() {
        let h = ConcreteHeap::new().with_var("p", 1).with_cell(1, "tail", 0);
        assert_eq!(concrete_exec(&h, &Stmt::skip(), 10).unwrap(), h);
    }

    #[test]
    fn reverse_body_once() {
        let h = ConcreteHeap::new().with_var("v", 1).with_var("w", 0).with_cell(1, "tail", 0);
        let s = parse_stmts("t = v->tail; v->tail = w; w = v; v = t;").unwrap();
        let out = concrete_exec(&h, &s, 10).unwrap();
        assert_eq!(out.store["v"], Val::Int(0));
        assert_eq!(out.store["w"], Val::Int(1));
        assert_eq!(out.get(&(1, "tail".into())), Some(&Val::Int(0)));
    }

    #[test]
    fn unallocated_store_faults() {
        let h = ConcreteHeap::new().with_var("p", 2).with_cell(1, "tail", 0);
        let s = parse_stmts("p->tail = 0;").unwrap();
        assert!(matches!(concrete_exec(&h, &s, 10), Err(Fault::Unalloc { .. })));
    }

    #[test]
    fn divergence_hits_the_cap() {
        let h = ConcreteHeap::new().with_var("x", 1);
        let s = parse_stmts("while (x != 0) { x = 1; }").unwrap();
        assert!(matches!(concrete_exec(&h, &s, 5), Err(Fault::IterationCap { cap: 5, .. })));
    }
}
