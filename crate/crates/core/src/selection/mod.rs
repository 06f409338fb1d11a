//! Feature ranking and context-based row filtering.

pub mod discretize;
pub mod filter;
pub mod mi;
pub mod mrmr;

pub use discretize::{discretize, discretize_column, BinStrategy, DiscretizationSpec};
pub use filter::{context_filter, ContextFilterRules, FilterOutcome};
pub use mi::{entropy, mutual_information};
pub use mrmr::{mrmr_rank, mrmr_rank_discrete, MrmrRanking, MrmrScheme, RankedFeature};
