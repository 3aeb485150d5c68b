//! Parser for `.invc` files: predicate definitions and annotated functions
//! in a small C-like language.

pub mod ast;
mod lexer;
mod parser;
mod transform;

use thiserror::Error;

use crate::assertion::{desugar, Assertion, DesugarError, PredicateRegistry, RegistryError};
use ast::{Cond, Func, Stmt, SurfaceAssertion};
use parser::Parser;

pub use transform::{assigned_vars, inline_calls, split_program, SplitProgram};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FrontendError {
    #[error("{line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("line {line}: {source}")]
    Registry { line: usize, source: RegistryError },
    #[error("line {line}: {source}")]
    Desugar { line: usize, source: DesugarError },
    #[error("line {line}: function `{name}` is already defined")]
    DuplicateFunc { name: String, line: usize },
    #[error("unknown function `{0}`")]
    UnknownFunc(String),
    #[error("recursive call cycle through `{0}`")]
    Recursion(String),
    #[error("call to `{name}` passes {found} arguments, expected {expected}")]
    CallArity { name: String, expected: usize, found: usize },
    #[error("no loop at the top level of the body")]
    NoLoop,
}

impl FrontendError {
    pub(crate) fn syntax(line: usize, col: usize, msg: impl Into<String>) -> Self {
        FrontendError::Syntax { line, col, msg: msg.into() }
    }

    /// `(line, column)` of a syntax error.
    pub fn position(&self) -> Option<(usize, usize)> {
        match self {
            FrontendError::Syntax { line, col, .. } => Some((*line, *col)),
            _ => None,
        }
    }
}

/// Parses a whole file into its predicate registry and functions.
pub fn parse_file(text: &str) -> Result<(PredicateRegistry, Vec<Func>), FrontendError> {
    parse_file_with(text, PredicateRegistry::new())
}

/// Like [`parse_file`], with `base` predicates already in scope.
pub fn parse_file_with(
    text: &str,
    base: PredicateRegistry,
) -> Result<(PredicateRegistry, Vec<Func>), FrontendError> {
    Parser::new(text)?.file(base)
}

fn whole<T>(text: &str, f: impl FnOnce(&mut Parser) -> Result<T, FrontendError>) -> Result<T, FrontendError> {
    let mut p = Parser::new(text)?;
    let v = f(&mut p)?;
    if !p.at_eof() {
        p.expect_sym("<end of input>")?;
    }
    Ok(v)
}

pub fn parse_surface_assertion(text: &str) -> Result<SurfaceAssertion, FrontendError> {
    whole(text, |p| p.surface_assertion())
}

/// Parses and desugars an assertion against `reg`.
pub fn parse_assertion(text: &str, reg: &PredicateRegistry) -> Result<Assertion, FrontendError> {
    let s = parse_surface_assertion(text)?;
    desugar(&s, reg).map_err(|e| FrontendError::Desugar { line: 1, source: e })
}

pub fn parse_cond(text: &str) -> Result<Cond, FrontendError> {
    whole(text, |p| p.cond())
}

/// Parses a statement list (without surrounding braces).
pub fn parse_stmts(text: &str) -> Result<Stmt, FrontendError> {
    whole(text, |p| {
        let mut v = vec![];
        while !p.at_eof() {
            v.push(p.stmt()?);
        }
        Ok(Stmt::seq(v))
    })
}

/// Parses one `source |- target` line.
pub fn parse_entailment(text: &str, reg: &PredicateRegistry) -> Result<(Assertion, Assertion), FrontendError> {
    let (src, tgt) = whole(text, |p| {
        let a = p.surface_assertion()?;
        p.expect_sym("|-")?;
        let b = p.surface_assertion()?;
        Ok((a, b))
    })?;
    let d = |s: &SurfaceAssertion| desugar(s, reg).map_err(|e| FrontendError::Desugar { line: 1, source: e });
    Ok((d(&src)?, d(&tgt)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::StmtKind;

    const LISTREP: &str = "predicate listrep(x) = x == 0 && emp || exists z, x->tail == z * listrep(z);";

    #[test]
    fn empty_file_parses() {
        let (reg, funcs) = parse_file("").unwrap();
        assert!(reg.is_empty());
        assert!(funcs.is_empty());
    }

    #[test]
    fn parses_reverse() {
        let src = format!(
            "{LISTREP}
            func reverse(p)
              requires: w == 0 && v == p && listrep(p)
              ensures: listrep(w)
            {{
              while (v != 0) {{
                t = v->tail; //@ v == p && listrep(p)
                v->tail = w;
                w = v;
                v = t;
              }}
            }}"
        );
        let (reg, funcs) = parse_file(&src).unwrap();
        assert_eq!(reg.len(), 1);
        assert_eq!(funcs.len(), 1);
        assert_eq!(funcs[0].requires.to_string(), "w == 0 && v == p && listrep(p)");
        assert!(matches!(funcs[0].body.kind, StmtKind::While(..)));
    }

    #[test]
    fn predicate_without_base_case_is_rejected() {
        let err = parse_file("predicate listrep(x) = listrep(x);").unwrap_err();
        assert!(matches!(err, FrontendError::Registry { source: RegistryError::NoBaseCase(_), .. }));
    }

    #[test]
    fn unknown_predicate_in_annotation() {
        let err = parse_file("func f(x) requires: foo(x) { x = 0; }").unwrap_err();
        assert!(matches!(err, FrontendError::Desugar { source: DesugarError::UnknownPredicate(_), .. }));
    }

    #[test]
    fn syntax_error_carries_position() {
        let err = parse_file("func f(x) {\n  x = ;\n}").unwrap_err();
        assert_eq!(err.position(), Some((2, 7)));
    }

    #[test]
    fn listbox_definitions_parse() {
        let src = format!(
            "{LISTREP}
            predicate listbox_rep(x) = exists p, *x == p && listrep(p);
            predicate listbox_seg(x,y) = x == y && emp || exists p, *x == p && listbox_seg(&(p->tail),y);"
        );
        let (reg, _) = parse_file(&src).unwrap();
        let seg = reg.get("listbox_seg").unwrap();
        assert_eq!(seg.branches[1].to_string(), "exists p, *x == p && listbox_seg(&(p->tail),y)");
    }

    #[test]
    fn tree_definition_desugars_argument_reads() {
        let src = "predicate tree_rep(x) = x == 0 && emp || \
                   exists d, x->data==d && tree_rep(x->left) * tree_rep(x->right);";
        let (reg, _) = parse_file(src).unwrap();
        let b = &reg.get("tree_rep").unwrap().branches[1];
        assert_eq!(b.binders.len(), 3);
        assert_eq!(b.spatial.len(), 5);
    }

    #[test]
    fn conditions_with_parenthesized_reads() {
        let c = parse_cond("(*x)->tail != 0 && !(y == 0)").unwrap();
        assert_eq!(c.to_string(), "((*x)->tail != 0) && (!(y == 0))");
    }

    #[test]
    fn entailment_line() {
        let (reg, _) = parse_file(LISTREP).unwrap();
        let (a, b) = parse_entailment("x == 0 && emp |- listrep(x)", &reg).unwrap();
        assert_eq!(a.to_string(), "x == 0 && emp");
        assert_eq!(b.to_string(), "listrep(x)");
    }
}
