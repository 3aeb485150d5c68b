use std::collections::BTreeSet;

use super::ast::{Cond, Expr, Func, LValue, Stmt, StmtKind, SurfaceAssertion, SurfaceAtom, SurfaceHeap};
use super::lexer::{lex, Tok, Token};
use super::FrontendError;
use crate::assertion::{desugar_with, Assertion, PredicateDef, PredicateRegistry, PureOp, StackModel};

const KEYWORDS: &[&str] = &[
    "predicate", "func", "requires", "ensures", "invariant", "exists", "emp", "True", "while", "if", "else",
    "mapsto",
];

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub(crate) fn new(src: &str) -> Result<Self, FrontendError> {
        Ok(Parser { toks: lex(src)?, pos: 0 })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, FrontendError> {
        let (l, c) = self.here();
        Err(FrontendError::syntax(l, c, msg))
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Num(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    pub(crate) fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn at_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(x) if x == kw)
    }

    pub(crate) fn at_eof(&self) -> bool {
        *self.peek() == Tok::Eof
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.at_sym(s) {
            self.bump();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect_sym(&mut self, s: &str) -> Result<(), FrontendError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.err(format!("expected identifier, found {}", self.describe())),
        }
    }

    fn ident_list(&mut self, close: &str) -> Result<Vec<String>, FrontendError> {
        let mut out = vec![];
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(self.ident()?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> Result<Expr, FrontendError> {
        if self.eat_sym("*") {
            return Ok(Expr::deref(self.expr()?));
        }
        if self.eat_sym("&") {
            let inner = self.expr()?;
            return match inner {
                Expr::Var(_) | Expr::Field(..) | Expr::Deref(_) => Ok(Expr::AddrOf(Box::new(inner))),
                _ => self.err(format!("cannot take the address of `{inner}`")),
            };
        }
        let mut e = self.primary()?;
        while self.eat_sym("->") {
            e = Expr::field(e, self.ident()?);
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, FrontendError> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Expr::Num(n))
            }
            Tok::Ident(s) if s == "NULL" || s == "null" => {
                self.bump();
                Ok(Expr::Num(0))
            }
            Tok::Ident(_) => Ok(Expr::Var(self.ident()?)),
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            _ => self.err(format!("expected expression, found {}", self.describe())),
        }
    }

    fn cmp_op(&mut self) -> Option<(PureOp, bool)> {
        let r = match self.peek() {
            Tok::Sym("==") => (PureOp::Eq, false),
            Tok::Sym("!=") => (PureOp::Neq, false),
            Tok::Sym("<") => (PureOp::Lt, false),
            Tok::Sym(">") => (PureOp::Gt, false),
            // `a <= b` is `!(a > b)`
            Tok::Sym("<=") => (PureOp::Gt, true),
            Tok::Sym(">=") => (PureOp::Lt, true),
            _ => return None,
        };
        self.bump();
        Some(r)
    }

    // ---- conditions ----

    pub(crate) fn cond(&mut self) -> Result<Cond, FrontendError> {
        let mut c = self.cond_and()?;
        while self.eat_sym("||") {
            c = Cond::Or(Box::new(c), Box::new(self.cond_and()?));
        }
        Ok(c)
    }

    fn cond_and(&mut self) -> Result<Cond, FrontendError> {
        let mut c = self.cond_not()?;
        while self.eat_sym("&&") {
            c = Cond::And(Box::new(c), Box::new(self.cond_not()?));
        }
        Ok(c)
    }

    fn cond_not(&mut self) -> Result<Cond, FrontendError> {
        if self.eat_sym("!") {
            return Ok(self.cond_not()?.negate());
        }
        if self.at_kw("true") || self.at_kw("false") {
            let b = self.at_kw("true");
            self.bump();
            return Ok(Cond::Lit(b));
        }
        // Either a comparison whose left operand is parenthesized, or a
        // parenthesized condition.
        let save = self.pos;
        if let Ok(c) = self.cond_atom() {
            return Ok(c);
        }
        self.pos = save;
        if self.eat_sym("(") {
            let c = self.cond()?;
            self.expect_sym(")")?;
            return Ok(c);
        }
        self.cond_atom()
    }

    fn cond_atom(&mut self) -> Result<Cond, FrontendError> {
        let l = self.expr()?;
        match self.cmp_op() {
            Some((op, negated)) => {
                let c = Cond::Cmp(op, l, self.expr()?);
                Ok(if negated { c.negate() } else { c })
            }
            None => {
                if matches!(self.peek(), Tok::Sym("&&") | Tok::Sym("||") | Tok::Sym(")") | Tok::Eof) {
                    Ok(match l {
                        Expr::Num(n) => Cond::Lit(n != 0),
                        e => Cond::Cmp(PureOp::Neq, e, Expr::Num(0)),
                    })
                } else {
                    self.err(format!("expected comparison, found {}", self.describe()))
                }
            }
        }
    }

    // ---- assertions ----

    pub(crate) fn surface_assertion(&mut self) -> Result<SurfaceAssertion, FrontendError> {
        let mut disjuncts = vec![self.surface_heap()?];
        while self.eat_sym("||") {
            disjuncts.push(self.surface_heap()?);
        }
        Ok(SurfaceAssertion { disjuncts })
    }

    fn surface_heap(&mut self) -> Result<SurfaceHeap, FrontendError> {
        let mut binders = vec![];
        if self.at_kw("exists") {
            self.bump();
            while !self.at_sym(",") {
                let b = self.ident()?;
                if binders.contains(&b) {
                    return self.err(format!("binder `{b}` repeated"));
                }
                binders.push(b);
            }
            self.bump();
        }
        let mut atoms = vec![self.surface_atom()?];
        while self.eat_sym("&&") || self.eat_sym("*") {
            atoms.push(self.surface_atom()?);
        }
        Ok(SurfaceHeap { binders, atoms })
    }

    fn surface_atom(&mut self) -> Result<SurfaceAtom, FrontendError> {
        if self.at_kw("emp") {
            self.bump();
            return Ok(SurfaceAtom::Emp);
        }
        if self.at_kw("True") {
            self.bump();
            return Ok(SurfaceAtom::True);
        }
        if self.at_kw("false") {
            self.bump();
            return Ok(SurfaceAtom::Cmp(PureOp::Neq, Expr::Num(0), Expr::Num(0)));
        }
        if let (Tok::Ident(name), Tok::Sym("(")) = (self.peek().clone(), self.peek_at(1)) {
            if !KEYWORDS.contains(&name.as_str()) && name != "NULL" {
                self.bump();
                self.bump();
                let mut args = vec![];
                if !self.eat_sym(")") {
                    loop {
                        args.push(self.expr()?);
                        if self.eat_sym(")") {
                            break;
                        }
                        self.expect_sym(",")?;
                    }
                }
                return Ok(SurfaceAtom::Pred(name, args));
            }
        }
        if self.at_sym("(") {
            let save = self.pos;
            if let Ok(a) = self.surface_cmp() {
                return Ok(a);
            }
            self.pos = save;
            self.bump();
            let a = self.surface_atom()?;
            self.expect_sym(")")?;
            return Ok(a);
        }
        self.surface_cmp()
    }

    fn surface_cmp(&mut self) -> Result<SurfaceAtom, FrontendError> {
        let l = self.expr()?;
        if self.at_kw("mapsto") {
            self.bump();
            return Ok(SurfaceAtom::MapsTo(l, self.expr()?));
        }
        match self.cmp_op() {
            Some((_, true)) => self.err("`<=`/`>=` are not assertion operators"),
            Some((op, false)) => Ok(SurfaceAtom::Cmp(op, l, self.expr()?)),
            None => self.err(format!("expected comparison, found {}", self.describe())),
        }
    }

    // ---- statements ----

    fn block(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.here().0;
        self.expect_sym("{")?;
        let mut stmts = vec![];
        while !self.eat_sym("}") {
            if self.at_eof() {
                return self.err("unclosed `{`");
            }
            stmts.push(self.stmt()?);
        }
        let mut s = Stmt::seq(stmts);
        if s.line == 0 {
            s.line = line;
        }
        Ok(s)
    }

    pub(crate) fn stmt(&mut self) -> Result<Stmt, FrontendError> {
        let line = self.here().0;
        if self.at_sym("{") {
            return self.block();
        }
        if self.eat_sym(";") {
            return Ok(Stmt::new(StmtKind::Skip, line));
        }
        if self.at_kw("while") {
            self.bump();
            self.expect_sym("(")?;
            let c = self.cond()?;
            self.expect_sym(")")?;
            let body = self.stmt()?;
            return Ok(Stmt::new(StmtKind::While(c, Box::new(body)), line));
        }
        if self.at_kw("if") {
            self.bump();
            self.expect_sym("(")?;
            let c = self.cond()?;
            self.expect_sym(")")?;
            let then = self.stmt()?;
            let els = if self.at_kw("else") {
                self.bump();
                self.stmt()?
            } else {
                Stmt::new(StmtKind::Skip, line)
            };
            return Ok(Stmt::new(StmtKind::If(c, Box::new(then), Box::new(els)), line));
        }
        if let (Tok::Ident(name), Tok::Sym("(")) = (self.peek().clone(), self.peek_at(1)) {
            self.bump();
            self.bump();
            let mut args = vec![];
            if !self.eat_sym(")") {
                loop {
                    args.push(self.expr()?);
                    if self.eat_sym(")") {
                        break;
                    }
                    self.expect_sym(",")?;
                }
            }
            self.expect_sym(";")?;
            return Ok(Stmt::new(StmtKind::Call(name, args), line));
        }
        let lhs = self.expr()?;
        let lv = match lhs {
            Expr::Var(v) => LValue::Var(v),
            Expr::Field(b, f) => LValue::Field(*b, f),
            Expr::Deref(e) => LValue::Deref(*e),
            other => return self.err(format!("`{other}` is not assignable")),
        };
        self.expect_sym("=")?;
        let rhs = self.expr()?;
        self.expect_sym(";")?;
        Ok(Stmt::new(StmtKind::Assign(lv, rhs), line))
    }

    // ---- top level ----

    fn assertion(
        &mut self,
        reg: &PredicateRegistry,
        extra: Option<(&str, usize)>,
    ) -> Result<Assertion, FrontendError> {
        let line = self.here().0;
        let s = self.surface_assertion()?;
        let arity = |n: &str| match extra {
            Some((name, k)) if name == n => Some(k),
            _ => reg.arity(n),
        };
        desugar_with(&s, &arity, StackModel::Value).map_err(|e| FrontendError::Desugar { line, source: e })
    }

    pub(crate) fn file(
        &mut self,
        mut reg: PredicateRegistry,
    ) -> Result<(PredicateRegistry, Vec<Func>), FrontendError> {
        let mut funcs: Vec<Func> = vec![];
        let mut names = BTreeSet::new();
        while !self.at_eof() {
            let line = self.here().0;
            if self.at_kw("predicate") {
                self.bump();
                let name = self.ident()?;
                self.expect_sym("(")?;
                let params = self.ident_list(")")?;
                self.expect_sym("=")?;
                let body = self.assertion(&reg, Some((&name, params.len())))?;
                self.expect_sym(";")?;
                let def = PredicateDef { name, params, branches: body.disjuncts };
                reg.register(def).map_err(|e| FrontendError::Registry { line, source: e })?;
            } else if self.at_kw("func") {
                self.bump();
                let name = self.ident()?;
                if !names.insert(name.clone()) {
                    return Err(FrontendError::DuplicateFunc { name, line });
                }
                self.expect_sym("(")?;
                let params = self.ident_list(")")?;
                let mut requires = Assertion::single(crate::assertion::SymbolicHeap::emp());
                let mut ensures = Assertion::single(crate::assertion::SymbolicHeap::emp());
                let mut invariants = vec![];
                loop {
                    if self.at_kw("requires") {
                        self.bump();
                        self.expect_sym(":")?;
                        requires = self.assertion(&reg, None)?;
                    } else if self.at_kw("ensures") {
                        self.bump();
                        self.expect_sym(":")?;
                        ensures = self.assertion(&reg, None)?;
                    } else if self.at_kw("invariant") {
                        self.bump();
                        self.expect_sym(":")?;
                        invariants.push(self.assertion(&reg, None)?);
                    } else {
                        break;
                    }
                }
                let body = self.block()?;
                funcs.push(Func { name, params, requires, ensures, invariants, body, line });
            } else {
                return self.err(format!("expected `predicate` or `func`, found {}", self.describe()));
            }
        }
        Ok((reg, funcs))
    }
}
