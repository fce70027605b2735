//! The clique-dependent bipartite state: node/clique-node incidence `Z`
//! plus the junction graph `T` over clique-nodes.
//!
//! Clique-nodes live in an elastic slot pool. A slot is reused after its
//! clique-node is retired, but every reuse bumps the slot generation so a
//! [`CliqueNodeId`] never names two different clique-nodes within a run.
//! The pool has a cap (default `4·|Θ|`); moves that would allocate beyond it
//! are not offered.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{
    build_junction_tree, check_rip, maximal_cliques_chordal, mcs_peo, RipViolation, UndirectedGraph,
};
use crate::nodeset::{NodeId, NodeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CliqueNodeId {
    pub slot: u32,
    pub generation: u32,
}

impl fmt::Display for CliqueNodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.generation == 0 {
            write!(f, "{}", self.slot)
        } else {
            write!(f, "{}@{}", self.slot, self.generation)
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StateError {
    #[error("unknown node {0}")]
    UnknownNode(usize),
    #[error("unknown clique-node {0}")]
    UnknownCliqueNode(CliqueNodeId),
    #[error("clique-node pool exhausted (cap {0})")]
    PoolExhausted(usize),
    #[error("graph is not decomposable: {0}")]
    NotDecomposable(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone)]
struct Slot {
    generation: u32,
    next_generation: u32,
    members: Option<NodeSet>,
}


/// Node/clique-node incidence with a reverse index.
#[derive(Debug, Clone)]
pub struct BipartiteState {
    labels: Vec<Option<String>>,
    slots: Vec<Slot>,
    reverse: Vec<BTreeSet<CliqueNodeId>>,
    cap: usize,
}

/// Graph over clique-nodes with the maximal subset flagged.
#[derive(Debug, Clone)]
pub struct JunctionGraph {
    adj: Vec<BTreeSet<CliqueNodeId>>,
    maximal: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct RepresentationState {
    z: BipartiteState,
    t: JunctionGraph,
}

/// Equal when labels, cap, live clique-node ids with their memberships and
/// flags, and `T` agree. Allocation history of free slots is ignored.
impl PartialEq for RepresentationState {
    fn eq(&self, other: &Self) -> bool {
        self.z.labels == other.z.labels
            && self.z.cap == other.z.cap
            && self.clique_ids().eq(other.clique_ids())
            && self.clique_ids().all(|k| {
                self.members(k) == other.members(k)
                    && self.is_maximal(k) == other.is_maximal(k)
                    && self.neighbors(k) == other.neighbors(k)
            })
    }
}

impl Eq for RepresentationState {}

impl BipartiteState {
    /// Clique-nodes containing `i`, i.e. `nei(θ_i, Z)`.
    pub fn containing(&self, i: usize) -> &BTreeSet<CliqueNodeId> {
        &self.reverse[i]
    }

    pub fn members(&self, k: CliqueNodeId) -> Option<&NodeSet> {
        let slot = self.slots.get(k.slot as usize)?;
        if slot.generation != k.generation {
            return None;
        }
        slot.members.as_ref()
    }
}

impl JunctionGraph {
    pub fn neighbors(&self, k: CliqueNodeId) -> &BTreeSet<CliqueNodeId> {
        &self.adj[k.slot as usize]
    }

    pub fn is_maximal(&self, k: CliqueNodeId) -> bool {
        self.maximal[k.slot as usize]
    }
}

impl RepresentationState {
    /// Empty state over `n` unlabelled nodes with no clique-nodes. Not valid
    /// for `n > 0` until every node is covered.
    pub fn empty(n: usize) -> Self {
        Self {
            z: BipartiteState {
                labels: vec![None; n],
                slots: Vec::new(),
                reverse: vec![BTreeSet::new(); n],
                cap: 4 * n,
            },
            t: JunctionGraph {
                adj: Vec::new(),
                maximal: Vec::new(),
            },
        }
    }

    pub fn z(&self) -> &BipartiteState {
        &self.z
    }

    pub fn t(&self) -> &JunctionGraph {
        &self.t
    }

    pub fn node_count(&self) -> usize {
        self.z.labels.len()
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.z.labels
    }

    pub fn set_label(&mut self, i: usize, label: &str) -> Result<(), StateError> {
        self.check_node(i)?;
        if self.node_by_label(label).is_some_and(|j| j != i) {
            return Err(StateError::Parse {
                line: 0,
                msg: format!("duplicate label {label:?}"),
            });
        }
        self.z.labels[i] = Some(label.to_string());
        Ok(())
    }

    pub fn node_label(&self, i: usize) -> String {
        self.z.labels[i].clone().unwrap_or_else(|| i.to_string())
    }

    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        self.z.labels.iter().position(|l| l.as_deref() == Some(label))
    }

    /// Resolves a label, falling back to a numeric id.
    pub fn resolve_node(&self, token: &str) -> Option<usize> {
        self.node_by_label(token)
            .or_else(|| token.parse().ok().filter(|&i| i < self.node_count()))
    }

    pub fn cap(&self) -> usize {
        self.z.cap
    }

    pub fn set_cap(&mut self, cap: usize) {
        self.z.cap = cap;
    }

    pub fn check_node(&self, i: usize) -> Result<(), StateError> {
        if i < self.node_count() {
            Ok(())
        } else {
            Err(StateError::UnknownNode(i))
        }
    }

    pub fn check_clique(&self, k: CliqueNodeId) -> Result<(), StateError> {
        if self.z.members(k).is_some() {
            Ok(())
        } else {
            Err(StateError::UnknownCliqueNode(k))
        }
    }

    pub fn is_live(&self, k: CliqueNodeId) -> bool {
        self.z.members(k).is_some()
    }

    /// Live clique-node ids in ascending slot order.
    pub fn clique_ids(&self) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.z.slots.iter().enumerate().filter_map(|(s, slot)| {
            slot.members.as_ref().map(|_| CliqueNodeId {
                slot: s as u32,
                generation: slot.generation,
            })
        })
    }

    pub fn live_count(&self) -> usize {
        self.z.slots.iter().filter(|s| s.members.is_some()).count()
    }

    pub fn has_free_capacity(&self) -> bool {
        self.live_count() < self.z.cap
    }

    /// Id currently occupying `slot`, if live.
    pub fn id_at(&self, slot: u32) -> Option<CliqueNodeId> {
        let s = self.z.slots.get(slot as usize)?;
        s.members.as_ref().map(|_| CliqueNodeId {
            slot,
            generation: s.generation,
        })
    }

    /// Panics on a stale id; callers validate ids at API boundaries.
    pub fn members(&self, k: CliqueNodeId) -> &NodeSet {
        self.z.members(k).unwrap_or_else(|| panic!("stale clique-node id {k}"))
    }

    pub fn is_maximal(&self, k: CliqueNodeId) -> bool {
        self.t.is_maximal(k)
    }

    pub fn neighbors(&self, k: CliqueNodeId) -> &BTreeSet<CliqueNodeId> {
        self.t.neighbors(k)
    }

    pub fn degree(&self, k: CliqueNodeId) -> usize {
        self.t.neighbors(k).len()
    }

    pub fn has_edge(&self, a: CliqueNodeId, b: CliqueNodeId) -> bool {
        self.t.neighbors(a).contains(&b)
    }

    pub fn containing(&self, i: usize) -> &BTreeSet<CliqueNodeId> {
        self.z.containing(i)
    }

    pub fn contains(&self, k: CliqueNodeId, i: usize) -> bool {
        self.members(k).contains(i)
    }

    pub fn maximal_ids(&self) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.clique_ids().filter(|&k| self.is_maximal(k))
    }

    pub fn sub_ids(&self) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.clique_ids().filter(|&k| !self.is_maximal(k))
    }

    /// `pa(x)`: maximal T-neighbours of a clique-node.
    pub fn parents(&self, k: CliqueNodeId) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.neighbors(k).iter().copied().filter(|&x| self.is_maximal(x))
    }

    /// Member labels concatenated when all are single characters, otherwise
    /// comma separated. The empty set renders as `∅`.
    pub fn render_set(&self, set: &NodeSet) -> String {
        if set.is_empty() {
            return "∅".to_string();
        }
        let parts: Vec<String> = set.iter().map(|i| self.node_label(i)).collect();
        if parts.iter().all(|p| p.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join(",")
        }
    }

    pub fn clique_label(&self, k: CliqueNodeId) -> String {
        self.render_set(self.members(k))
    }

    /// Edges of `T` as ordered pairs `a < b`.
    pub fn t_edges(&self) -> Vec<(CliqueNodeId, CliqueNodeId)> {
        let mut out = Vec::new();
        for a in self.clique_ids() {
            for &b in self.neighbors(a) {
                if a < b {
                    out.push((a, b));
                }
            }
        }
        out
    }

    // -- primitive mutations; the move calculus journals these ----------------

    pub(crate) fn alloc(&mut self, members: NodeSet, maximal: bool) -> Result<CliqueNodeId, StateError> {
        if !self.has_free_capacity() {
            return Err(StateError::PoolExhausted(self.z.cap));
        }
        let slot = match self.z.slots.iter().position(|s| s.members.is_none()) {
            Some(s) => s,
            None => {
                self.z.slots.push(Slot {
                    generation: 0,
                    next_generation: 0,
                    members: None,
                });
                self.t.adj.push(BTreeSet::new());
                self.t.maximal.push(false);
                self.z.slots.len() - 1
            }
        };
        let generation = self.z.slots[slot].next_generation;
        let id = CliqueNodeId {
            slot: slot as u32,
            generation,
        };
        self.insert_at(id, members, maximal);
        Ok(id)
    }

    /// Places a clique-node at an exact id. The slot must be free.
    pub(crate) fn insert_at(&mut self, id: CliqueNodeId, members: NodeSet, maximal: bool) {
        let s = id.slot as usize;
        while self.z.slots.len() <= s {
            self.z.slots.push(Slot {
                generation: 0,
                next_generation: 0,
                members: None,
            });
            self.t.adj.push(BTreeSet::new());
            self.t.maximal.push(false);
        }
        let slot = &mut self.z.slots[s];
        assert!(slot.members.is_none(), "slot {s} occupied");
        slot.generation = id.generation;
        slot.next_generation = slot.next_generation.max(id.generation + 1);
        for i in members.iter() {
            self.z.reverse[i].insert(id);
        }
        slot.members = Some(members);
        self.t.maximal[s] = maximal;
        self.t.adj[s].clear();
    }

    /// Removes a clique-node that has no remaining T-edges.
    pub(crate) fn retire(&mut self, id: CliqueNodeId) -> (NodeSet, bool) {
        let s = id.slot as usize;
        assert!(self.t.adj[s].is_empty(), "retiring clique-node {id} with live edges");
        let members = self.z.slots[s].members.take().expect("live clique-node");
        for i in members.iter() {
            self.z.reverse[i].remove(&id);
        }
        let was_max = std::mem::replace(&mut self.t.maximal[s], false);
        (members, was_max)
    }

    /// Sets `z_ki`; returns the previous bit.
    pub(crate) fn set_member(&mut self, k: CliqueNodeId, i: usize, present: bool) -> bool {
        let m = self.z.slots[k.slot as usize].members.as_mut().expect("live clique-node");
        let before = m.contains(i);
        if present {
            m.insert(i);
            self.z.reverse[i].insert(k);
        } else {
            m.remove(i);
            self.z.reverse[i].remove(&k);
        }
        before
    }

    pub(crate) fn set_maximal(&mut self, k: CliqueNodeId, maximal: bool) -> bool {
        std::mem::replace(&mut self.t.maximal[k.slot as usize], maximal)
    }

    pub(crate) fn add_edge(&mut self, a: CliqueNodeId, b: CliqueNodeId) -> bool {
        assert_ne!(a, b, "self-loop in T");
        self.t.adj[b.slot as usize].insert(a);
        self.t.adj[a.slot as usize].insert(b)
    }

    pub(crate) fn remove_edge(&mut self, a: CliqueNodeId, b: CliqueNodeId) -> bool {
        self.t.adj[b.slot as usize].remove(&a);
        self.t.adj[a.slot as usize].remove(&b)
    }
}

/// `project`: nodes adjacent iff some clique-node contains both.
pub fn project(state: &RepresentationState) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(state.node_count());
    for (i, l) in state.labels().iter().enumerate() {
        if let Some(l) = l {
            // Labels are unique in a state, so this cannot fail.
            let _ = g.set_label(i, l);
        }
    }
    for k in state.clique_ids() {
        let m: Vec<usize> = state.members(k).iter().collect();
        for (x, &u) in m.iter().enumerate() {
            for &v in &m[x + 1..] {
                let _ = g.add_edge(u, v);
            }
        }
    }
    g
}

/// Builds a state with one maximal clique-node per maximal clique, joined by
/// the maximum-weight junction forest, and no sub-cliques.
pub fn from_graph(g: &UndirectedGraph) -> Result<RepresentationState, StateError> {
    let peo = mcs_peo(g).map_err(|e| StateError::NotDecomposable(e.to_string()))?;
    let cs = maximal_cliques_chordal(g, &peo).map_err(|e| StateError::NotDecomposable(e.to_string()))?;
    let cliques = cs.sorted_cliques();
    let jt = build_junction_tree(&cliques);
    let mut st = RepresentationState::empty(g.node_count());
    for (i, l) in g.labels().iter().enumerate() {
        if let Some(l) = l {
            st.z.labels[i] = Some(l.clone());
        }
    }
    st.z.cap = st.z.cap.max(cliques.len());
    let ids: Vec<CliqueNodeId> = cliques
        .into_iter()
        .map(|c| st.alloc(c, true).expect("cap covers maximal cliques"))
        .collect();
    for e in &jt.edges {
        st.add_edge(ids[e.a], ids[e.b]);
    }
    Ok(st)
}

/// Restricted view of `T` on the clique-nodes containing one node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InducedSubtree {
    pub node: NodeId,
    pub all: Vec<CliqueNodeId>,
    pub maximal: Vec<CliqueNodeId>,
    pub sub: Vec<CliqueNodeId>,
    pub edges: Vec<(CliqueNodeId, CliqueNodeId)>,
    pub maximal_edges: Vec<(CliqueNodeId, CliqueNodeId)>,
}

impl InducedSubtree {
    /// Number of connected pieces of the maximal part.
    pub fn maximal_components(&self) -> usize {
        self.maximal.len() - self.maximal_edges.len()
    }

    /// Degree of a maximal clique-node within the maximal part.
    pub fn maximal_degree(&self, k: CliqueNodeId) -> usize {
        self.maximal_edges.iter().filter(|(a, b)| *a == k || *b == k).count()
    }
}

pub fn induced_subtree(state: &RepresentationState, i: usize) -> Result<InducedSubtree, StateError> {
    state.check_node(i)?;
    let all: Vec<CliqueNodeId> = state.containing(i).iter().copied().collect();
    let maximal: Vec<CliqueNodeId> = all.iter().copied().filter(|&k| state.is_maximal(k)).collect();
    let sub: Vec<CliqueNodeId> = all.iter().copied().filter(|&k| !state.is_maximal(k)).collect();
    let mut edges = Vec::new();
    for &a in &all {
        for &b in state.neighbors(a) {
            if a < b && state.contains(b, i) {
                edges.push((a, b));
            }
        }
    }
    let maximal_edges = edges
        .iter()
        .copied()
        .filter(|&(a, b)| state.is_maximal(a) && state.is_maximal(b))
        .collect();
    Ok(InducedSubtree {
        node: NodeId(i),
        all,
        maximal,
        sub,
        edges,
        maximal_edges,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Structure(String),
    EmptyCliqueNode(CliqueNodeId),
    UncoveredNode(usize),
    NotDecomposable { witness: usize },
    /// A maximal clique of the projection has no maximal clique-node.
    UncoveredMaximalClique(NodeSet),
    /// Flagged maximal but its membership is not a maximal clique.
    FlaggedNotMaximal(CliqueNodeId),
    DuplicateMaximal(CliqueNodeId, CliqueNodeId),
    NotForest(CliqueNodeId, CliqueNodeId),
    Rip {
        a: CliqueNodeId,
        b: CliqueNodeId,
        via: CliqueNodeId,
    },
    SubCliqueNotNested {
        sub: CliqueNodeId,
        neighbor: CliqueNodeId,
    },
}

impl Violation {
    pub fn describe(&self, st: &RepresentationState) -> String {
        let cl = |k: &CliqueNodeId| {
            if st.is_live(*k) {
                format!("{} ({})", k, st.clique_label(*k))
            } else {
                k.to_string()
            }
        };
        match self {
            Violation::Structure(s) => format!("structural inconsistency: {s}"),
            Violation::EmptyCliqueNode(k) => format!("clique-node {k} is empty"),
            Violation::UncoveredNode(i) => format!("node {} belongs to no clique-node", st.node_label(*i)),
            Violation::NotDecomposable { witness } => format!(
                "projected graph is not decomposable (fails at node {})",
                st.node_label(*witness)
            ),
            Violation::UncoveredMaximalClique(c) => {
                format!("maximal clique {} is not flagged by any clique-node", st.render_set(c))
            }
            Violation::FlaggedNotMaximal(k) => format!("clique-node {} is flagged maximal but is not a maximal clique", cl(k)),
            Violation::DuplicateMaximal(a, b) => {
                format!("clique-nodes {} and {} flag the same maximal clique", cl(a), cl(b))
            }
            Violation::NotForest(a, b) => format!("maximal edge {} -- {} closes a cycle", cl(a), cl(b)),
            Violation::Rip { a, b, via } => format!(
                "running intersection fails: {} ∩ {} not contained in {}",
                cl(a),
                cl(b),
                cl(via)
            ),
            Violation::SubCliqueNotNested { sub, neighbor } => {
                format!("sub-clique {} is not contained in neighbour {}", cl(sub), cl(neighbor))
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self, st: &RepresentationState) -> String {
        self.violations.iter().map(|v| v.describe(st) + "\n").collect()
    }
}

/// Checks the clique-dependent conditions: maximal flags index exactly the
/// maximal cliques of the projection, `T(𝒞)` is a forest with running
/// intersection, and every sub-clique nests in each of its T-neighbours.
pub fn verify_clique_dependent(st: &RepresentationState) -> ValidationReport {
    let mut v = Vec::new();
    // Structure.
    for k in st.clique_ids() {
        for i in st.members(k).iter() {
            if i >= st.node_count() || !st.containing(i).contains(&k) {
                v.push(Violation::Structure(format!("membership of {k} not mirrored for node {i}")));
            }
        }
        for &n in st.neighbors(k) {
            if !st.is_live(n) {
                v.push(Violation::Structure(format!("edge {k} -- {n} to a retired clique-node")));
            } else if !st.neighbors(n).contains(&k) {
                v.push(Violation::Structure(format!("edge {k} -- {n} not symmetric")));
            }
        }
        if st.members(k).is_empty() {
            v.push(Violation::EmptyCliqueNode(k));
        }
    }
    for i in 0..st.node_count() {
        for &k in st.containing(i) {
            if !st.is_live(k) || !st.contains(k, i) {
                v.push(Violation::Structure(format!("reverse entry {k} for node {i} is stale")));
            }
        }
        if st.containing(i).is_empty() {
            v.push(Violation::UncoveredNode(i));
        }
    }
    if !v.is_empty() {
        return ValidationReport { violations: v };
    }

    // (1) maximal flags against the projection's maximal cliques.
    let g = project(st);
    match mcs_peo(&g) {
        Err(e) => v.push(Violation::NotDecomposable { witness: e.witness.0 }),
        Ok(peo) => {
            let cs = maximal_cliques_chordal(&g, &peo).expect("mcs ordering is perfect");
            let mut flagged: BTreeMap<NodeSet, CliqueNodeId> = BTreeMap::new();
            for k in st.maximal_ids() {
                if let Some(prev) = flagged.insert(st.members(k).clone(), k) {
                    v.push(Violation::DuplicateMaximal(prev, k));
                }
            }
            let truth: BTreeSet<NodeSet> = cs.cliques.into_iter().collect();
            for c in &truth {
                if !flagged.contains_key(c) {
                    v.push(Violation::UncoveredMaximalClique(c.clone()));
                }
            }
            for (m, k) in &flagged {
                if !truth.contains(m) {
                    v.push(Violation::FlaggedNotMaximal(*k));
                }
            }
        }
    }

    // (2)+(3) forest and running intersection on T(𝒞).
    let maxes: Vec<CliqueNodeId> = st.maximal_ids().collect();
    let index: BTreeMap<CliqueNodeId, usize> = maxes.iter().enumerate().map(|(x, &k)| (k, x)).collect();
    let sets: Vec<NodeSet> = maxes.iter().map(|&k| st.members(k).clone()).collect();
    let mut edges = Vec::new();
    for &a in &maxes {
        for &b in st.neighbors(a) {
            if a < b && st.is_maximal(b) {
                edges.push((index[&a], index[&b]));
            }
        }
    }
    match check_rip(&sets, &edges) {
        Ok(()) => {}
        Err(RipViolation::NotForest { a, b }) => v.push(Violation::NotForest(maxes[a], maxes[b])),
        Err(RipViolation::Intersection { a, b, via }) => v.push(Violation::Rip {
            a: maxes[a],
            b: maxes[b],
            via: maxes[via],
        }),
    }

    // (4) sub-cliques nest in every T-neighbour.
    for s in st.sub_ids() {
        for &n in st.neighbors(s) {
            if !st.members(s).is_subset(st.members(n)) {
                v.push(Violation::SubCliqueNotNested { sub: s, neighbor: n });
            }
        }
    }
    ValidationReport { violations: v }
}

/// Structural fingerprint of a state, invariant under clique-node id
/// renaming. Two states produced by the move calculus describe the same
/// configuration iff their forms are equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalForm {
    pub node_count: usize,
    pub maximal: Vec<NodeSet>,
    pub maximal_edges: Vec<(NodeSet, NodeSet)>,
    /// Sub-clique membership with its sorted neighbour descriptors
    /// `(neighbour is maximal, neighbour membership)`.
    pub subs: Vec<(NodeSet, Vec<(bool, NodeSet)>)>,
}

pub fn canonical_form(st: &RepresentationState) -> CanonicalForm {
    let mut maximal: Vec<NodeSet> = st.maximal_ids().map(|k| st.members(k).clone()).collect();
    maximal.sort();
    let mut maximal_edges = Vec::new();
    let mut subs = Vec::new();
    for k in st.clique_ids() {
        if st.is_maximal(k) {
            for &n in st.neighbors(k) {
                if k < n && st.is_maximal(n) {
                    let (a, b) = (st.members(k).clone(), st.members(n).clone());
                    maximal_edges.push(if a <= b { (a, b) } else { (b, a) });
                }
            }
        } else {
            let mut nb: Vec<(bool, NodeSet)> = st
                .neighbors(k)
                .iter()
                .map(|&n| (st.is_maximal(n), st.members(n).clone()))
                .collect();
            nb.sort();
            subs.push((st.members(k).clone(), nb));
        }
    }
    maximal_edges.sort();
    subs.sort();
    CanonicalForm {
        node_count: st.node_count(),
        maximal,
        maximal_edges,
        subs,
    }
}

// -- state document -----------------------------------------------------------

const HEADER: &str = "# clique-dependent bipartite state";

/// Canonical text document: `[nodes]`, `[clique_nodes]`, `[t_edges]`.
pub fn snapshot(st: &RepresentationState) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("[nodes]\n");
    out.push_str(&format!("count {}\n", st.node_count()));
    for (i, l) in st.labels().iter().enumerate() {
        if let Some(l) = l {
            out.push_str(&format!("{i} {l}\n"));
        }
    }
    out.push_str("[clique_nodes]\n");
    out.push_str(&format!("cap {}\n", st.cap()));
    for k in st.clique_ids() {
        out.push_str(&format!("{k} {}", if st.is_maximal(k) { "max" } else { "sub" }));
        for i in st.members(k).iter() {
            out.push(' ');
            out.push_str(&st.node_label(i));
        }
        out.push('\n');
    }
    out.push_str("[t_edges]\n");
    for (a, b) in st.t_edges() {
        out.push_str(&format!("{} {}\n", a.slot, b.slot));
    }
    out
}

/// A parsed document: the state plus any sections this module does not own,
/// returned as `(name, [(line number, line)])`.
pub type ExtraSections = Vec<(String, Vec<(usize, String)>)>;

pub fn restore(text: &str) -> Result<RepresentationState, StateError> {
    let (st, extra) = restore_with_extras(text)?;
    if let Some((name, lines)) = extra.first() {
        return Err(StateError::Parse {
            line: lines.first().map_or(0, |l| l.0),
            msg: format!("unknown section [{name}]"),
        });
    }
    Ok(st)
}

type Section = (String, usize, Vec<(usize, String)>);

pub fn restore_with_extras(text: &str) -> Result<(RepresentationState, ExtraSections), StateError> {
    let mut sections: Vec<Section> = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push((name.to_string(), ln + 1, Vec::new()));
        } else if let Some(sec) = sections.last_mut() {
            sec.2.push((ln + 1, line.to_string()));
        } else {
            return Err(StateError::Parse {
                line: ln + 1,
                msg: "content before the first section".into(),
            });
        }
    }
    let perr = |line: usize, msg: String| StateError::Parse { line, msg };

    let mut st = RepresentationState::empty(0);
    let mut extra = Vec::new();
    let mut seen = BTreeSet::new();
    let mut pending_edges = Vec::new();
    let mut pending_cliques = Vec::new();
    let mut cap = None;
    for (name, header_line, lines) in sections {
        if !seen.insert(name.clone()) {
            return Err(perr(header_line, format!("duplicate section [{name}]")));
        }
        match name.as_str() {
            "nodes" => {
                let mut count = None;
                let mut labels = Vec::new();
                for (ln, l) in &lines {
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    match toks.as_slice() {
                        ["count", n] => {
                            count = Some(n.parse::<usize>().map_err(|_| perr(*ln, "bad node count".into()))?)
                        }
                        [id, label] => {
                            let id: usize = id.parse().map_err(|_| perr(*ln, format!("bad node id {id:?}")))?;
                            if label.parse::<usize>().is_ok() {
                                return Err(perr(*ln, format!("label {label:?} must not be numeric")));
                            }
                            labels.push((*ln, id, label.to_string()));
                        }
                        _ => return Err(perr(*ln, "expected `count <n>` or `<id> <label>`".into())),
                    }
                }
                let n = count.ok_or_else(|| perr(header_line, "missing `count` in [nodes]".into()))?;
                let old_cap = st.z.cap;
                st = RepresentationState::empty(n);
                st.z.cap = st.z.cap.max(old_cap);
                for (ln, id, label) in labels {
                    if id >= n {
                        return Err(perr(ln, format!("node id {id} out of range")));
                    }
                    st.set_label(id, &label).map_err(|e| perr(ln, e.to_string()))?;
                }
            }
            "clique_nodes" => {
                for (ln, l) in &lines {
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    match toks.as_slice() {
                        ["cap", c] => cap = Some(c.parse::<usize>().map_err(|_| perr(*ln, "bad cap".into()))?),
                        [id, kind, members @ ..] => {
                            let id = parse_clique_id(id).ok_or_else(|| perr(*ln, format!("bad clique-node id {id:?}")))?;
                            let maximal = match *kind {
                                "max" => true,
                                "sub" => false,
                                other => return Err(perr(*ln, format!("expected `max` or `sub`, found {other:?}"))),
                            };
                            pending_cliques.push((*ln, id, maximal, members.iter().map(|s| s.to_string()).collect::<Vec<_>>()));
                        }
                        _ => return Err(perr(*ln, "expected `<id> max|sub <members...>`".into())),
                    }
                }
            }
            "t_edges" => {
                for (ln, l) in &lines {
                    let toks: Vec<&str> = l.split_whitespace().collect();
                    match toks.as_slice() {
                        [a, b] => {
                            let a: u32 = a.parse().map_err(|_| perr(*ln, format!("bad slot {a:?}")))?;
                            let b: u32 = b.parse().map_err(|_| perr(*ln, format!("bad slot {b:?}")))?;
                            pending_edges.push((*ln, a, b));
                        }
                        _ => return Err(perr(*ln, "expected `<slot> <slot>`".into())),
                    }
                }
            }
            _ => extra.push((name, lines)),
        }
    }
    if !pending_cliques.is_empty() && !seen.contains("nodes") {
        return Err(perr(1, "[clique_nodes] requires a [nodes] section".into()));
    }
    for (ln, id, maximal, members) in pending_cliques {
        if st.id_at(id.slot).is_some() {
            return Err(perr(ln, format!("duplicate clique-node slot {}", id.slot)));
        }
        let mut set = NodeSet::new();
        for m in &members {
            let i = st.resolve_node(m).ok_or_else(|| perr(ln, format!("unknown node {m:?}")))?;
            set.insert(i);
        }
        st.insert_at(id, set, maximal);
    }
    for (ln, a, b) in pending_edges {
        let ia = st.id_at(a).ok_or_else(|| perr(ln, format!("edge names unknown slot {a}")))?;
        let ib = st.id_at(b).ok_or_else(|| perr(ln, format!("edge names unknown slot {b}")))?;
        if ia == ib {
            return Err(perr(ln, format!("self-loop on slot {a}")));
        }
        st.add_edge(ia, ib);
    }
    st.z.cap = cap.unwrap_or(st.z.cap).max(st.live_count());
    Ok((st, extra))
}

fn parse_clique_id(tok: &str) -> Option<CliqueNodeId> {
    match tok.split_once('@') {
        Some((s, g)) => Some(CliqueNodeId {
            slot: s.parse().ok()?,
            generation: g.parse().ok()?,
        }),
        None => Some(CliqueNodeId {
            slot: tok.parse().ok()?,
            generation: 0,
        }),
    }
}

/// Graphviz rendering of `T`: maximal clique-nodes red and solid, sub-cliques
/// dashed; edges inside `T(𝒞)` solid, all others dashed.
pub fn to_dot(st: &RepresentationState) -> String {
    let mut out = String::from("graph T {\n");
    for k in st.clique_ids() {
        let style = if st.is_maximal(k) {
            "shape=ellipse, color=red, style=solid"
        } else {
            "shape=ellipse, style=dashed"
        };
        out.push_str(&format!("  c{} [label=\"{}\", {style}];\n", k.slot, st.clique_label(k)));
    }
    for (a, b) in st.t_edges() {
        let style = if st.is_maximal(a) && st.is_maximal(b) {
            "solid"
        } else {
            "dashed"
        };
        out.push_str(&format!("  c{} -- c{} [style={style}];\n", a.slot, b.slot));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = include_str!("../fixtures/worked.state");

    fn worked() -> RepresentationState {
        restore(WORKED).unwrap()
    }

    fn by_label(st: &RepresentationState, label: &str, maximal: bool) -> CliqueNodeId {
        st.clique_ids()
            .find(|&k| st.clique_label(k) == label && st.is_maximal(k) == maximal)
            .unwrap()
    }

    #[test]
    fn worked_is_valid_and_projects_to_14_edges() {
        let st = worked();
        assert!(verify_clique_dependent(&st).is_valid());
        let g = project(&st);
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.edge_count(), 14);
        assert_eq!(st.maximal_ids().count(), 5);
        assert_eq!(st.sub_ids().count(), 10);
    }

    #[test]
    fn sub_cliques_are_transparent_to_projection() {
        let st = worked();
        let mut bare = st.clone();
        for s in st.sub_ids().collect::<Vec<_>>() {
            for n in bare.neighbors(s).clone() {
                bare.remove_edge(s, n);
            }
            bare.retire(s);
        }
        assert_eq!(project(&bare), project(&st));
        assert!(verify_clique_dependent(&bare).is_valid());
    }

    #[test]
    fn single_clique_projects_to_triangle() {
        let mut st = RepresentationState::empty(3);
        st.alloc([0, 1, 2].into_iter().collect(), true).unwrap();
        let g = project(&st);
        assert_eq!(g.edge_count(), 3);
        assert!(verify_clique_dependent(&st).is_valid());
    }

    #[test]
    fn shrunken_cdf_is_reported() {
        let mut st = worked();
        let cdf = by_label(&st, "CDF", true);
        let c = st.node_by_label("C").unwrap();
        st.set_member(cdf, c, false);
        let rep = verify_clique_dependent(&st);
        assert!(!rep.is_valid());
        let cdf_set: NodeSet = ["C", "D", "F"].iter().map(|l| st.node_by_label(l).unwrap()).collect();
        assert!(rep.violations.contains(&Violation::UncoveredMaximalClique(cdf_set)));
        assert!(rep.violations.contains(&Violation::FlaggedNotMaximal(cdf)));
    }

    #[test]
    fn empty_state_is_valid() {
        let st = RepresentationState::empty(0);
        assert!(verify_clique_dependent(&st).is_valid());
        assert_eq!(restore("").unwrap(), st);
    }

    #[test]
    fn induced_subtrees_on_worked() {
        let st = worked();
        let c = st.node_by_label("C").unwrap();
        let t = induced_subtree(&st, c).unwrap();
        let mut maxl: Vec<String> = t.maximal.iter().map(|&k| st.clique_label(k)).collect();
        maxl.sort();
        assert_eq!(maxl, ["ABCD", "CDF", "CEF"]);
        assert_eq!(t.maximal_edges.len(), 2);
        assert_eq!(t.maximal_components(), 1);
        let mut subl: Vec<String> = t.sub.iter().map(|&k| st.clique_label(k)).collect();
        subl.sort();
        assert_eq!(subl, ["AC", "ACD", "CD", "CF"]);

        let i = st.node_by_label("I").unwrap();
        let t = induced_subtree(&st, i).unwrap();
        assert_eq!(t.maximal.len(), 1);
        assert_eq!(t.sub.len(), 1);
        assert_eq!(st.clique_label(t.sub[0]), "HI");

        assert!(matches!(induced_subtree(&st, 99), Err(StateError::UnknownNode(99))));
    }

    #[test]
    fn from_graph_cases() {
        let g = project(&worked());
        let st = from_graph(&g).unwrap();
        assert_eq!(st.maximal_ids().count(), 5);
        assert_eq!(st.sub_ids().count(), 0);
        assert_eq!(st.t_edges().len(), 4);
        assert!(verify_clique_dependent(&st).is_valid());
        assert_eq!(project(&st), g);

        let empty = from_graph(&UndirectedGraph::new(4)).unwrap();
        assert_eq!(empty.maximal_ids().count(), 4);
        assert!(empty.t_edges().is_empty());
        assert!(verify_clique_dependent(&empty).is_valid());

        let mut c4 = UndirectedGraph::new(4);
        for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
            c4.add_edge(u, v).unwrap();
        }
        assert!(matches!(from_graph(&c4), Err(StateError::NotDecomposable(_))));
    }

    #[test]
    fn snapshot_round_trips_fixture_bytes() {
        let st = worked();
        assert_eq!(snapshot(&st), WORKED);
    }

    #[test]
    fn restore_keeps_invalid_states_for_validation() {
        let text = WORKED.replace("1 max C D F", "1 max D F");
        let st = restore(&text).unwrap();
        assert!(!verify_clique_dependent(&st).is_valid());
    }

    #[test]
    fn restore_reports_line_numbers() {
        let text = "[nodes]\ncount 2\n0 A\n[clique_nodes]\n0 max A Q\n";
        match restore(text) {
            Err(StateError::Parse { line, msg }) => {
                assert_eq!(line, 5);
                assert!(msg.contains("Q"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(restore("[nodes]\ncount 1\n[bogus]\nx\n").is_err());
        assert!(restore("0 max A\n").is_err());
    }

    #[test]
    fn pool_generations_never_repeat() {
        let mut st = RepresentationState::empty(2);
        let a = st.alloc(NodeSet::singleton(0), true).unwrap();
        st.retire(a);
        let b = st.alloc(NodeSet::singleton(0), true).unwrap();
        assert_eq!(a.slot, b.slot);
        assert_ne!(a, b);
        st.set_cap(1);
        assert_eq!(st.alloc(NodeSet::singleton(1), true), Err(StateError::PoolExhausted(1)));
    }

    #[test]
    fn dot_marks_maximal_and_sub() {
        let dot = to_dot(&worked());
        assert_eq!(dot.matches("color=red, style=solid").count(), 5);
        assert_eq!(dot.matches("shape=ellipse, style=dashed").count(), 10);
        assert_eq!(to_dot(&RepresentationState::empty(0)), "graph T {\n}\n");
    }

    #[test]
    fn canonical_form_ignores_slot_ids() {
        let st = worked();
        let ids: Vec<CliqueNodeId> = st.clique_ids().collect();
        let n = ids.len() as u32;
        let moved = |k: CliqueNodeId| CliqueNodeId {
            slot: n - 1 - k.slot,
            generation: 0,
        };
        let mut other = RepresentationState::empty(st.node_count());
        for (i, l) in st.labels().iter().enumerate() {
            other.set_label(i, l.as_deref().unwrap()).unwrap();
        }
        for &k in &ids {
            other.insert_at(moved(k), st.members(k).clone(), st.is_maximal(k));
        }
        for (a, b) in st.t_edges() {
            other.add_edge(moved(a), moved(b));
        }
        assert_ne!(snapshot(&other), snapshot(&st));
        assert_eq!(canonical_form(&other), canonical_form(&st));
    }
}
