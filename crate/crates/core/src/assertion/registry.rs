use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::subst::{apply_free, Subst};
use super::{fresh_name_avoiding, SpatialAtom, SymbolicHeap, Term};

/// Inductive predicate `name(params) = branch_1 || .. || branch_n`. Parameters
/// occur in the branches as program variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateDef {
    pub name: String,
    pub params: Vec<String>,
    pub branches: Vec<SymbolicHeap>,
}

impl PredicateDef {
    pub fn arity(&self) -> usize {
        self.params.len()
    }

    pub fn is_recursive_branch(&self, i: usize) -> bool {
        self.branches[i].spatial.iter().any(|s| s.pred_name() == Some(self.name.as_str()))
    }

    /// Branches without any predicate application.
    pub fn base_branches(&self) -> impl Iterator<Item = (usize, &SymbolicHeap)> {
        self.branches.iter().enumerate().filter(|(_, b)| !b.has_predicates())
    }

    /// Branches instantiated with `args`, binders renamed apart from `avoid`.
    pub fn instantiate(&self, args: &[Term], avoid: &BTreeSet<String>) -> Vec<SymbolicHeap> {
        let mut used = avoid.clone();
        for a in args {
            let mut vs = BTreeSet::new();
            a.collect_vars(&mut vs);
            for v in vs {
                if let Term::ProgVar(n) | Term::LogicVar(n) = v {
                    used.insert(n);
                }
            }
        }
        self.branches
            .iter()
            .map(|b| {
                let mut map: Subst =
                    self.params.iter().zip(args).map(|(p, a)| (Term::var(p.clone()), a.clone())).collect();
                let mut local = used.clone();
                let mut binders = vec![];
                for x in &b.binders {
                    let fresh = fresh_name_avoiding(x, &local);
                    local.insert(fresh.clone());
                    map.insert(Term::logic(x.clone()), Term::logic(fresh.clone()));
                    binders.push(fresh);
                }
                let mut out = apply_free(b, &map);
                out.binders = binders;
                out
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("predicate `{0}` is already defined")]
    Duplicate(String),
    #[error("predicate `{pred}` refers to unknown predicate `{unknown}`")]
    UnknownPredicate { pred: String, unknown: String },
    #[error("predicate `{pred}` applies `{callee}` to {found} arguments, expected {expected}")]
    Arity { pred: String, callee: String, expected: usize, found: usize },
    #[error("predicate `{0}` has no base case")]
    NoBaseCase(String),
    #[error("branch {branch} of predicate `{pred}` recurses without owning a cell")]
    Imprecise { pred: String, branch: usize },
    #[error("predicate `{pred}` mentions `{var}`, which is not a parameter")]
    FreeVariable { pred: String, var: String },
    #[error("predicate `{0}` repeats a parameter name")]
    DuplicateParam(String),
}

/// Immutable-after-build table of predicate definitions, in registration order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateRegistry {
    defs: BTreeMap<String, PredicateDef>,
    order: Vec<String>,
}

impl PredicateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, def: PredicateDef) -> Result<(), RegistryError> {
        let name = def.name.clone();
        if self.defs.contains_key(&name) {
            return Err(RegistryError::Duplicate(name));
        }
        let params: BTreeSet<&String> = def.params.iter().collect();
        if params.len() != def.params.len() {
            return Err(RegistryError::DuplicateParam(name));
        }
        if (0..def.branches.len()).all(|i| def.is_recursive_branch(i)) {
            return Err(RegistryError::NoBaseCase(name));
        }
        for (i, b) in def.branches.iter().enumerate() {
            for v in b.prog_vars() {
                if !params.contains(&v) {
                    return Err(RegistryError::FreeVariable { pred: name, var: v });
                }
            }
            for s in &b.spatial {
                if let SpatialAtom::PredApp { pred, args } = s {
                    let expected = if *pred == name {
                        def.arity()
                    } else {
                        self.arity(pred).ok_or_else(|| RegistryError::UnknownPredicate {
                            pred: name.clone(),
                            unknown: pred.clone(),
                        })?
                    };
                    if expected != args.len() {
                        return Err(RegistryError::Arity {
                            pred: name,
                            callee: pred.clone(),
                            expected,
                            found: args.len(),
                        });
                    }
                }
            }
            let owns_cell = b.spatial.iter().any(|s| matches!(s, SpatialAtom::PointsTo { .. }));
            if b.has_predicates() && !owns_cell {
                return Err(RegistryError::Imprecise { pred: name, branch: i });
            }
        }
        self.order.push(name.clone());
        self.defs.insert(name, def);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&PredicateDef> {
        self.defs.get(name)
    }

    pub fn arity(&self, name: &str) -> Option<usize> {
        self.defs.get(name).map(PredicateDef::arity)
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    /// Definitions in registration order.
    pub fn defs(&self) -> impl Iterator<Item = &PredicateDef> {
        self.order.iter().map(|n| &self.defs[n])
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.order.iter().map(String::as_str)
    }

    /// Restriction to the named predicates and everything they reference.
    pub fn closure_of(&self, roots: &BTreeSet<String>) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack: Vec<String> = roots.iter().cloned().collect();
        while let Some(n) = stack.pop() {
            if !out.insert(n.clone()) {
                continue;
            }
            if let Some(d) = self.get(&n) {
                for b in &d.branches {
                    stack.extend(b.spatial.iter().filter_map(|s| s.pred_name().map(str::to_string)));
                }
            }
        }
        out
    }
}
