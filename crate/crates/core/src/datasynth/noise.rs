//! Noise and taboo atom templates derived from a predicate definition.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assertion::{PredicateDef, PredicateRegistry, PureAtom, PureOp, SpatialAtom, SymbolicHeap, Term};
use crate::entailment::{is_segment, root_fields};

/// A template argument: a hole `{}` or a fixed term.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Slot {
    Hole,
    Fixed(Term),
}

impl Slot {
    fn matches(&self, t: &Term) -> bool {
        match self {
            Slot::Hole => true,
            Slot::Fixed(f) => f == t,
        }
    }

    fn rename(&self, map: &BTreeMap<Term, Term>) -> Slot {
        match self {
            Slot::Fixed(t) => Slot::Fixed(map.get(t).cloned().unwrap_or_else(|| t.clone())),
            Slot::Hole => Slot::Hole,
        }
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Slot::Hole => write!(f, "{{}}"),
            Slot::Fixed(t) => write!(f, "{t}"),
        }
    }
}

/// Atom shapes with holes. A field template's value is always a hole.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Template {
    Eq(Slot, Slot),
    Neq(Slot, Slot),
    Field { root: Slot, field: String },
    Pred { name: String, args: Vec<Slot> },
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Template::Eq(a, b) => write!(f, "{a}=={b}"),
            Template::Neq(a, b) => write!(f, "{a}!={b}"),
            Template::Field { root, field } => write!(f, "{root}->{field}=={{}}"),
            Template::Pred { name, args } => {
                let args: Vec<String> = args.iter().map(|a| a.to_string()).collect();
                write!(f, "{name}({})", args.join(","))
            }
        }
    }
}

/// An instance of a template, ready to conjoin.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Atom {
    Pure(PureAtom),
    Spatial(SpatialAtom),
}

impl Template {
    pub fn holes(&self) -> usize {
        let count = |s: &[&Slot]| s.iter().filter(|s| ***s == Slot::Hole).count();
        match self {
            Template::Eq(a, b) | Template::Neq(a, b) => count(&[a, b]),
            Template::Field { root, .. } => count(&[root]) + 1,
            Template::Pred { args, .. } => count(&args.iter().collect::<Vec<_>>()),
        }
    }

    /// Fills the holes left to right from `fill`.
    pub fn instantiate(&self, fill: &[Term]) -> Atom {
        let mut it = fill.iter();
        let mut take = |s: &Slot| match s {
            Slot::Fixed(t) => t.clone(),
            Slot::Hole => it.next().expect("one term per hole").clone(),
        };
        match self {
            Template::Eq(a, b) => Atom::Pure(PureAtom::eq(take(a), take(b))),
            Template::Neq(a, b) => Atom::Pure(PureAtom::neq(take(a), take(b))),
            Template::Field { root, field } => {
                let r = take(root);
                let v = take(&Slot::Hole);
                Atom::Spatial(SpatialAtom::points_to(Term::field(r, field.clone()), v))
            }
            Template::Pred { name, args } => Atom::Spatial(SpatialAtom::pred(name.clone(), args.iter().map(take).collect())),
        }
    }

    pub fn matches_pure(&self, p: &PureAtom) -> bool {
        let both = |a: &Slot, b: &Slot| (a.matches(&p.lhs) && b.matches(&p.rhs)) || (a.matches(&p.rhs) && b.matches(&p.lhs));
        match self {
            Template::Eq(a, b) => p.op == PureOp::Eq && both(a, b),
            Template::Neq(a, b) => p.op == PureOp::Neq && both(a, b),
            _ => false,
        }
    }

    pub fn matches_spatial(&self, s: &SpatialAtom) -> bool {
        match (self, s) {
            (Template::Field { root, field }, SpatialAtom::PointsTo { addr: Term::FieldAddr(b, f), .. }) => {
                f == field && root.matches(b)
            }
            (Template::Pred { name, args }, SpatialAtom::PredApp { pred, args: a }) => {
                name == pred && args.len() == a.len() && args.iter().zip(a).all(|(s, t)| s.matches(t))
            }
            _ => false,
        }
    }

    fn rename(&self, map: &BTreeMap<Term, Term>) -> Template {
        match self {
            Template::Eq(a, b) => Template::Eq(a.rename(map), b.rename(map)),
            Template::Neq(a, b) => Template::Neq(a.rename(map), b.rename(map)),
            Template::Field { root, field } => Template::Field { root: root.rename(map), field: field.clone() },
            Template::Pred { name, args } => {
                Template::Pred { name: name.clone(), args: args.iter().map(|s| s.rename(map)).collect() }
            }
        }
    }
}

/// Atoms safe to add around a predicate's unfoldings, and atoms that would
/// describe memory the predicate already owns. Fixed terms are the
/// definition's parameters until [`NoiseSpec::for_args`] is applied.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub noise_templates: Vec<Template>,
    pub taboo_templates: Vec<Template>,
}

impl NoiseSpec {
    /// The spec with `def`'s parameters replaced by `args`.
    pub fn for_args(&self, def: &PredicateDef, args: &[Term]) -> NoiseSpec {
        let map: BTreeMap<Term, Term> =
            def.params.iter().map(|p| Term::var(p.clone())).zip(args.iter().cloned()).collect();
        NoiseSpec {
            noise_templates: self.noise_templates.iter().map(|t| t.rename(&map)).collect(),
            taboo_templates: self.taboo_templates.iter().map(|t| t.rename(&map)).collect(),
        }
    }

    pub fn noise_strings(&self) -> Vec<String> {
        self.noise_templates.iter().map(|t| t.to_string()).collect()
    }

    pub fn taboo_strings(&self) -> Vec<String> {
        self.taboo_templates.iter().map(|t| t.to_string()).collect()
    }
}

/// Atoms of `h` that instantiate some template in `taboo`, printed.
pub fn taboo_instances(h: &SymbolicHeap, taboo: &[Template]) -> Vec<String> {
    let mut out = vec![];
    for p in &h.pure {
        if taboo.iter().any(|t| t.matches_pure(p)) {
            out.push(p.to_string());
        }
    }
    for s in &h.spatial {
        if taboo.iter().any(|t| t.matches_spatial(s)) {
            out.push(s.to_string());
        }
    }
    out
}

/// Fields the definition stores at each parameter, over all branches.
fn owned_fields(def: &PredicateDef) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for b in &def.branches {
        for s in &b.spatial {
            if let SpatialAtom::PointsTo { addr: Term::FieldAddr(base, f), .. } = s {
                if let Term::ProgVar(p) = base.as_ref() {
                    if def.params.contains(p) {
                        out.entry(p.clone()).or_default().insert(f.clone());
                    }
                }
            }
        }
    }
    out
}

pub fn derive_noise_taboo(reg: &PredicateRegistry, def: &PredicateDef) -> NoiseSpec {
    let owned = owned_fields(def);
    let fields: BTreeSet<String> = owned.values().flatten().cloned().collect();
    let roots = root_fields(def);
    // unary predicates over the same cells
    let family: Vec<String> = reg
        .defs()
        .filter(|q| q.arity() == 1 && !roots.is_empty() && root_fields(q) == roots)
        .map(|q| q.name.clone())
        .collect();
    let pred = |name: &str, s: Slot| Template::Pred { name: name.to_string(), args: vec![s] };
    let field = |root: Slot, f: &str| Template::Field { root, field: f.to_string() };

    let mut taboo = vec![];
    for p in &def.params {
        let Some(fs) = owned.get(p) else { continue };
        let at = || Slot::Fixed(Term::var(p.clone()));
        taboo.extend(fs.iter().map(|f| field(at(), f)));
        taboo.extend(family.iter().map(|q| pred(q, at())));
    }

    let mut noise = vec![Template::Eq(Slot::Hole, Slot::Hole), Template::Neq(Slot::Hole, Slot::Hole)];
    noise.extend(family.iter().map(|q| pred(q, Slot::Hole)));
    noise.extend(fields.iter().map(|f| field(Slot::Hole, f)));
    if is_segment(def) {
        for p in def.params.iter().filter(|p| !owned.contains_key(*p)) {
            let at = || Slot::Fixed(Term::var(p.clone()));
            noise.extend(family.iter().map(|q| pred(q, at())));
            noise.extend(fields.iter().map(|f| field(at(), f)));
        }
    }
    noise.retain(|t| !taboo.contains(t));
    NoiseSpec { noise_templates: noise, taboo_templates: taboo }
}
