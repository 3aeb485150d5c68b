use std::fmt;

use super::{SpatialAtom, SymbolicHeap, Term};

pub(super) fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::ProgVar(v) | Term::LogicVar(v) => f.write_str(v),
        Term::Const(c) => write!(f, "{c}"),
        Term::FieldAddr(b, field) => {
            f.write_str("&(")?;
            fmt_base(b, f)?;
            write!(f, "->{field})")
        }
        Term::AddrOf(v) => write!(f, "&{v}"),
    }
}

// A term in the base position of `->`: compound terms need parentheses.
fn fmt_base(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::FieldAddr(..) | Term::AddrOf(_) => {
            f.write_str("(")?;
            fmt_term(t, f)?;
            f.write_str(")")
        }
        _ => fmt_term(t, f),
    }
}

pub(super) fn fmt_spatial(s: &SpatialAtom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match s {
        SpatialAtom::Emp => f.write_str("emp"),
        SpatialAtom::True => f.write_str("True"),
        SpatialAtom::PointsTo { addr: Term::FieldAddr(b, field), value } => {
            fmt_base(b, f)?;
            write!(f, "->{field} == {value}")
        }
        SpatialAtom::PointsTo { addr: addr @ Term::AddrOf(_), value } => {
            write!(f, "{addr} mapsto {value}")
        }
        SpatialAtom::PointsTo { addr, value } => {
            f.write_str("*")?;
            fmt_base(addr, f)?;
            write!(f, " == {value}")
        }
        SpatialAtom::PredApp { pred, args } => {
            write!(f, "{pred}(")?;
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")
        }
    }
}

pub(super) fn fmt_heap(h: &SymbolicHeap, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    if !h.binders.is_empty() {
        write!(f, "exists {}, ", h.binders.join(" "))?;
    }
    let mut items: Vec<String> = h.pure.iter().map(|p| p.to_string()).collect();
    let mut starred = vec![];
    for s in &h.spatial {
        match s {
            SpatialAtom::Emp => {}
            SpatialAtom::PointsTo { .. } => items.push(s.to_string()),
            SpatialAtom::PredApp { .. } | SpatialAtom::True => starred.push(s.to_string()),
        }
    }
    if starred.is_empty() {
        items.push("emp".to_string());
        return f.write_str(&items.join(" && "));
    }
    if !items.is_empty() {
        write!(f, "{} && ", items.join(" && "))?;
    }
    f.write_str(&starred.join(" * "))
}
