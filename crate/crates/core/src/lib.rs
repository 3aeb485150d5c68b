//! Separation-logic loop invariant generation.

pub mod assertion;
pub mod frontend;
pub mod oracle;
pub mod entailment;
pub mod symexec;
pub mod inference;
pub mod invgen;
pub mod datasynth;
pub mod corpus;
