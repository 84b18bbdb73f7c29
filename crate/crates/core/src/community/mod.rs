//! Community detection: Louvain modularity maximisation followed by a
//! size-constrained split/merge refinement run to a fixpoint.

mod level;
mod louvain;
mod nmi;
mod partition;
mod refine;

pub use louvain::{louvain, louvain_observed, PassEvent};
pub use nmi::nmi;
pub use partition::{modularity, Partition};
pub use refine::{merge_small, refine, split_large, RefineOutcome, RefinementConfig, RoundRecord};
