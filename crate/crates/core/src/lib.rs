//! Generalized hypertree decompositions with incremental updates.
//!
//! The crate computes width-bounded generalized hypertree decompositions
//! (GHDs) of hypergraphs by a complete top-down search and, given a
//! decomposition plus an elementary modification of the hypergraph,
//! produces a decomposition of the modified hypergraph of the same width
//! by reusing the parts of the old tree the modification did not touch.
//!
//! Entry points:
//! - [`hypergraph::Hypergraph`]: the hypergraph model with parsing,
//!   induced subhypergraphs, and component computation.
//! - [`decompose::decompose`]: the width-`k` construction;
//!   [`decompose::validate`] and [`decompose::ghw_oracle`] check results.
//! - [`modify`]: the six elementary modification classes and their
//!   application.
//! - [`update::update_pipeline`]: the incremental route, combining minimal
//!   mutable subtrees and scene mappings.
//! - [`mod@bench`]: the Classic-versus-Update benchmark harness behind the
//!   CLI's `bench` subcommand.

mod bits;

pub mod bench;
pub mod decompose;
pub mod fixtures;
pub mod hypergraph;
pub mod modify;
pub mod update;

pub use decompose::{decompose, ghw_oracle, validate, DecomposeOutcome, Ghd, GhdNode};
pub use hypergraph::{EdgeSet, Hypergraph, VertexSet};
pub use modify::{apply, generate, ModClass, Modification};
pub use update::{minimal_mutable_subtree, scene_creation, update_pipeline};
