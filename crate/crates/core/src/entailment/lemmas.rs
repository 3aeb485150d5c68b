use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::assertion::{fresh_name_avoiding, Assertion, PredicateDef, PredicateRegistry, SpatialAtom, SymbolicHeap, Term};
use crate::oracle::{counter_model, OracleConfig, OracleError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LemmaKind {
    EmptyCase,
    OneStepFold,
    SegmentCompose,
}

/// `premise |- conclusion`, with the predicate parameters (and the
/// segment midpoint) as program variables acting as pattern variables.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lemma {
    pub kind: LemmaKind,
    pub pred: String,
    pub premise: SymbolicHeap,
    pub conclusion: SpatialAtom,
}

impl std::fmt::Display for Lemma {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?}: {} |- {}", self.kind, self.premise, self.conclusion)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LemmaError {
    #[error("lemma `{lemma}` is invalid; counter-model: {model}")]
    Invalid { lemma: String, model: String },
    #[error("validating `{lemma}`: {source}")]
    Oracle { lemma: String, source: OracleError },
}

fn param_terms(def: &PredicateDef) -> Vec<Term> {
    def.params.iter().map(|p| Term::var(p.clone())).collect()
}

/// Shape of a segment predicate `P(x, y)`: a base branch equating the two
/// parameters and recursive calls of the form `P(_, y)`.
pub(crate) fn is_segment(def: &PredicateDef) -> bool {
    if def.arity() != 2 {
        return false;
    }
    let (x, y) = (Term::var(def.params[0].clone()), Term::var(def.params[1].clone()));
    let base_eq = def.base_branches().any(|(_, b)| {
        b.pure.iter().any(|p| {
            p.op == crate::assertion::PureOp::Eq && ((p.lhs == x && p.rhs == y) || (p.lhs == y && p.rhs == x))
        })
    });
    let threads = (0..def.branches.len()).filter(|&i| def.is_recursive_branch(i)).all(|i| {
        def.branches[i].spatial.iter().all(|s| match s {
            SpatialAtom::PredApp { pred, args } if *pred == def.name => args[1] == y && args[0] != x,
            _ => true,
        })
    });
    base_eq && threads
}

/// `P(x,m) * P(m,y) |- P(x,y)` follows by induction on `P(x,m)` when `y`
/// occurs nowhere in a branch except as the threaded argument.
fn composes_by_induction(def: &PredicateDef) -> bool {
    let y = Term::var(def.params[1].clone());
    (0..def.branches.len()).filter(|&i| def.is_recursive_branch(i)).all(|i| {
        let b = &def.branches[i];
        let in_pure = b.pure.iter().any(|p| p.lhs.mentions(&y) || p.rhs.mentions(&y));
        let in_spatial = b.spatial.iter().any(|s| match s {
            SpatialAtom::PredApp { pred, args } if *pred == def.name => args[0].mentions(&y),
            other => other.terms().iter().any(|t| t.mentions(&y)),
        });
        !in_pure && !in_spatial
    })
}

/// Fields stored at the first parameter in recursive branches.
pub(crate) fn root_fields(def: &PredicateDef) -> BTreeSet<String> {
    let x = Term::var(def.params[0].clone());
    def.branches
        .iter()
        .flat_map(|b| b.spatial.iter())
        .filter_map(|s| match s {
            SpatialAtom::PointsTo { addr: Term::FieldAddr(b, f), .. } if **b == x => Some(f.clone()),
            _ => None,
        })
        .collect()
}

/// Fold lemmas for `def`. Composition lemmas `P(x,m) * Q(m,..) |- Q(x,..)` are
/// proposed for segment predicates `P` and every `Q` rooted at the same
/// fields; the `Q = P` instance must hold, other instances are kept only when
/// the oracle accepts them.
pub fn derive_lemmas(reg: &PredicateRegistry, def: &PredicateDef) -> Result<Vec<Lemma>, LemmaError> {
    let head = SpatialAtom::pred(def.name.clone(), param_terms(def));
    // a branch entails its own head, no check needed
    let mut kept = vec![];
    for (i, b) in def.branches.iter().enumerate() {
        let kind = if def.is_recursive_branch(i) { LemmaKind::OneStepFold } else { LemmaKind::EmptyCase };
        kept.push(Lemma { kind, pred: def.name.clone(), premise: b.clone(), conclusion: head.clone() });
    }
    let mut out = vec![];
    if is_segment(def) {
        let fields = root_fields(def);
        for q in reg.defs() {
            if q.arity() == 0 || (q.name != def.name && (fields.is_empty() || root_fields(q) != fields)) {
                continue;
            }
            let mut used: BTreeSet<String> = q.params.iter().cloned().collect();
            used.extend(def.params.iter().cloned());
            let x = fresh_name_avoiding("x", &used);
            used.insert(x.clone());
            let m = fresh_name_avoiding("m", &used);
            let rest: Vec<Term> = q.params[1..].iter().map(|p| Term::var(p.clone())).collect();
            if rest.iter().any(|t| *t == Term::var(x.clone())) {
                continue;
            }
            let with_root = |r: &str| {
                let mut a = vec![Term::var(r.to_string())];
                a.extend(rest.iter().cloned());
                a
            };
            let premise = SymbolicHeap::new(
                vec![],
                vec![],
                vec![
                    SpatialAtom::pred(def.name.clone(), vec![Term::var(x.clone()), Term::var(m.clone())]),
                    SpatialAtom::pred(q.name.clone(), with_root(&m)),
                ],
            );
            let lemma = Lemma {
                kind: LemmaKind::SegmentCompose,
                pred: def.name.clone(),
                premise,
                conclusion: SpatialAtom::pred(q.name.clone(), with_root(&x)),
            };
            if q.name == def.name && composes_by_induction(def) {
                kept.push(lemma);
            } else {
                out.push((lemma, q.name == def.name));
            }
        }
    }
    for (lemma, required) in out {
        let premise = Assertion::single(lemma.premise.clone());
        let concl = Assertion::single(SymbolicHeap::new(vec![], vec![], vec![lemma.conclusion.clone()]));
        let cm = match counter_model(reg, &premise, &concl, OracleConfig::with_addrs(3)) {
            Ok(cm) => cm,
            Err(source) if required => return Err(LemmaError::Oracle { lemma: lemma.to_string(), source }),
            Err(e) => {
                log::debug!("discarding lemma {lemma}: {e}");
                continue;
            }
        };
        match cm {
            None => kept.push(lemma),
            Some(m) if required => return Err(LemmaError::Invalid { lemma: lemma.to_string(), model: m.to_string() }),
            Some(m) => log::debug!("discarding lemma {lemma}: counter-model {m}"),
        }
    }
    Ok(kept)
}

/// Lemmas for every registered predicate, in registration order.
pub fn derive_all(reg: &PredicateRegistry) -> Result<Vec<Lemma>, LemmaError> {
    let mut out = vec![];
    for d in reg.defs() {
        out.extend(derive_lemmas(reg, d)?);
    }
    Ok(out)
}
