//! Bundled benchmark programs.

use crate::assertion::PredicateRegistry;
use crate::frontend::ast::Func;
use crate::frontend::{parse_file, FrontendError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CorpusFile {
    /// Family name, also the file stem.
    pub name: &'static str,
    pub source: &'static str,
}

pub const FILES: &[CorpusFile] = &[
    CorpusFile { name: "list", source: include_str!("../corpus/list.invc") },
    CorpusFile { name: "dlist", source: include_str!("../corpus/dlist.invc") },
    CorpusFile { name: "listbox", source: include_str!("../corpus/listbox.invc") },
    CorpusFile { name: "tree", source: include_str!("../corpus/tree.invc") },
    CorpusFile { name: "double_iter", source: include_str!("../corpus/double_iter.invc") },
    CorpusFile { name: "list_of_list", source: include_str!("../corpus/list_of_list.invc") },
];

pub fn file(name: &str) -> Option<&'static CorpusFile> {
    FILES.iter().find(|f| f.name == name)
}

impl CorpusFile {
    pub fn parse(&self) -> Result<(PredicateRegistry, Vec<Func>), FrontendError> {
        parse_file(self.source)
    }
}

/// Every predicate defined somewhere in the corpus. A name defined in
/// several files keeps its first definition.
pub fn registry() -> PredicateRegistry {
    let mut out = PredicateRegistry::new();
    for f in FILES {
        let (reg, _) = f.parse().expect("bundled corpus parses");
        for d in reg.defs() {
            if out.get(&d.name).is_none() {
                out.register(d.clone()).expect("corpus predicate registers");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_file_parses() {
        for f in FILES {
            let (reg, funcs) = f.parse().unwrap_or_else(|e| panic!("{}: {e}", f.name));
            assert!(!reg.is_empty() && !funcs.is_empty(), "{}", f.name);
        }
    }

    #[test]
    fn union_registry_has_every_name() {
        let all = registry();
        for f in FILES {
            for n in f.parse().unwrap().0.names() {
                assert!(all.get(n).is_some(), "{n}");
            }
        }
    }
}
