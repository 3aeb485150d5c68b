//! Entailment checking and frame inference over symbolic heaps.

mod lemmas;
mod normalize;
mod prover;
mod pure;

pub use lemmas::{derive_all, derive_lemmas, Lemma, LemmaError, LemmaKind};
pub(crate) use lemmas::{is_segment, root_fields};
pub use normalize::{is_refuted, normalize, unfold_at};
pub use prover::{EntailOutcome, FrameResult, Prover, ProverConfig};
pub use pure::PureCtx;
