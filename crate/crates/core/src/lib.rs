//! Decomposable graphs as clique-dependent bipartite graphs.
//!
//! A state couples a node/clique-node incidence with a junction graph over
//! clique-nodes in which the maximal clique-nodes form a junction forest and
//! sub-cliques hang off their parents. [`moves`] implements the connect and
//! disconnect edits with sub-clique promotion, [`sampler`] drives a
//! node-wise Metropolis–Hastings chain over those edits, and [`oracle`] holds
//! brute-force references used to cross-check everything at small sizes.

pub mod bipartite;
pub mod graph;
pub mod moves;
pub mod nodeset;
pub mod oracle;
pub mod par;
pub mod sampler;

pub use bipartite::{CliqueNodeId, RepresentationState};
pub use graph::UndirectedGraph;
pub use nodeset::{NodeId, NodeSet};
