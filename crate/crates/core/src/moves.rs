//! Connect/disconnect moves on a clique-dependent state.
//!
//! [`move_sets`] computes, for one node, the clique-nodes it may leave
//! (boundary sets) and join (neighbour sets). [`apply_connect`] and
//! [`apply_disconnect`] perform the edit together with the junction-graph
//! maintenance it requires and return a [`TreeEdit`] journal whose inverse
//! restores the pre-state.

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::bipartite::{CliqueNodeId, RepresentationState, StateError};
use crate::nodeset::{NodeId, NodeSet};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MoveError {
    #[error(transparent)]
    State(#[from] StateError),
    #[error("clique-node {0} is not maximal")]
    NotMaximal(CliqueNodeId),
    #[error("clique-node {clique} does not contain node {node}")]
    NotMember { clique: CliqueNodeId, node: usize },
    #[error("impermissible move: {0}")]
    Impermissible(String),
    #[error("invalid promotion: {0}")]
    InvalidPromotion(String),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MoveSets {
    pub node: usize,
    pub bd_max: BTreeSet<CliqueNodeId>,
    pub bd_sub: BTreeSet<CliqueNodeId>,
    pub nei_max: BTreeSet<CliqueNodeId>,
    pub nei_sub: BTreeSet<CliqueNodeId>,
}

impl MoveSets {
    pub fn contains(&self, k: CliqueNodeId) -> bool {
        self.bd_max.contains(&k) || self.bd_sub.contains(&k) || self.nei_max.contains(&k) || self.nei_sub.contains(&k)
    }

    pub fn boundary(&self) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.bd_max.iter().chain(&self.bd_sub).copied()
    }

    pub fn neighbours(&self) -> impl Iterator<Item = CliqueNodeId> + '_ {
        self.nei_max.iter().chain(&self.nei_sub).copied()
    }
}

/// How a connect target relates to the node's induced subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConnectKind {
    /// Sub-clique with a parent that already contains the node.
    SubWithinParent,
    /// Sub-clique of `parent`, a maximal clique-node adjacent to `anchor`
    /// in the node's induced clique subtree.
    SubAcross { parent: CliqueNodeId, anchor: CliqueNodeId },
    /// Maximal clique-node adjacent to `anchor`.
    MaxAdjacent { anchor: CliqueNodeId },
    /// Representative of a component of `T(𝒞)` the node does not touch.
    MaxForeign { anchor: CliqueNodeId },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum MoveKind {
    Connect,
    Disconnect,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Move {
    pub kind: MoveKind,
    pub node: usize,
    pub target: CliqueNodeId,
    pub promotion: Option<CliqueNodeId>,
}

impl Move {
    pub fn connect(node: usize, target: CliqueNodeId) -> Self {
        Self {
            kind: MoveKind::Connect,
            node,
            target,
            promotion: None,
        }
    }

    pub fn disconnect(node: usize, target: CliqueNodeId, promotion: Option<CliqueNodeId>) -> Self {
        Self {
            kind: MoveKind::Disconnect,
            node,
            target,
            promotion,
        }
    }

    pub fn describe(&self, st: &RepresentationState) -> String {
        let verb = match self.kind {
            MoveKind::Connect => "connect",
            MoveKind::Disconnect => "disconnect",
        };
        let mut s = format!("{verb} {} {}", st.node_label(self.node), st.clique_label(self.target));
        if let Some(p) = self.promotion {
            s.push_str(&format!(" promote {}", st.clique_label(p)));
        }
        s
    }
}

// -- journal ------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum PrimitiveEdit {
    AddCliqueNode {
        id: CliqueNodeId,
        members: NodeSet,
        maximal: bool,
    },
    RemoveCliqueNode {
        id: CliqueNodeId,
        members: NodeSet,
        maximal: bool,
    },
    SetMember {
        clique: CliqueNodeId,
        node: usize,
        present: bool,
    },
    SetMaximal {
        clique: CliqueNodeId,
        maximal: bool,
    },
    AddEdge(CliqueNodeId, CliqueNodeId),
    RemoveEdge(CliqueNodeId, CliqueNodeId),
}

impl PrimitiveEdit {
    pub fn inverse(&self) -> PrimitiveEdit {
        use PrimitiveEdit::*;
        match self.clone() {
            AddCliqueNode { id, members, maximal } => RemoveCliqueNode { id, members, maximal },
            RemoveCliqueNode { id, members, maximal } => AddCliqueNode { id, members, maximal },
            SetMember { clique, node, present } => SetMember {
                clique,
                node,
                present: !present,
            },
            SetMaximal { clique, maximal } => SetMaximal {
                clique,
                maximal: !maximal,
            },
            AddEdge(a, b) => RemoveEdge(a, b),
            RemoveEdge(a, b) => AddEdge(a, b),
        }
    }

    fn apply(&self, st: &mut RepresentationState) {
        use PrimitiveEdit::*;
        match self {
            AddCliqueNode { id, members, maximal } => st.insert_at(*id, members.clone(), *maximal),
            RemoveCliqueNode { id, .. } => {
                st.retire(*id);
            }
            SetMember { clique, node, present } => {
                st.set_member(*clique, *node, *present);
            }
            SetMaximal { clique, maximal } => {
                st.set_maximal(*clique, *maximal);
            }
            AddEdge(a, b) => {
                st.add_edge(*a, *b);
            }
            RemoveEdge(a, b) => {
                st.remove_edge(*a, *b);
            }
        }
    }

    pub fn describe(&self, st: &RepresentationState) -> String {
        use PrimitiveEdit::*;
        match self {
            AddCliqueNode { id, members, maximal } => format!(
                "add clique-node {id} {{{}}} {}",
                st.render_set(members),
                if *maximal { "max" } else { "sub" }
            ),
            RemoveCliqueNode { id, members, .. } => format!("remove clique-node {id} {{{}}}", st.render_set(members)),
            SetMember { clique, node, present } => {
                format!("z[{clique}, {}] = {}", st.node_label(*node), u8::from(*present))
            }
            SetMaximal { clique, maximal } => {
                format!("{} {clique}", if *maximal { "flag maximal" } else { "unflag maximal" })
            }
            AddEdge(a, b) => format!("add edge {a} -- {b}"),
            RemoveEdge(a, b) => format!("remove edge {a} -- {b}"),
        }
    }
}

/// Ordered list of primitive edits. Replaying [`TreeEdit::inverse`] after the
/// edit restores the pre-state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TreeEdit {
    pub edits: Vec<PrimitiveEdit>,
}

impl TreeEdit {
    pub fn inverse(&self) -> TreeEdit {
        TreeEdit {
            edits: self.edits.iter().rev().map(PrimitiveEdit::inverse).collect(),
        }
    }

    pub fn apply(&self, st: &mut RepresentationState) {
        for e in &self.edits {
            e.apply(st);
        }
    }

    pub fn len(&self) -> usize {
        self.edits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }

    pub fn render(&self, st: &RepresentationState) -> String {
        self.edits.iter().map(|e| e.describe(st) + "\n").collect()
    }
}

struct Journal<'a> {
    st: &'a mut RepresentationState,
    edits: Vec<PrimitiveEdit>,
}

impl<'a> Journal<'a> {
    fn new(st: &'a mut RepresentationState) -> Self {
        Self { st, edits: Vec::new() }
    }

    fn set_member(&mut self, clique: CliqueNodeId, node: usize, present: bool) {
        if self.st.set_member(clique, node, present) != present {
            self.edits.push(PrimitiveEdit::SetMember { clique, node, present });
        }
    }

    fn set_maximal(&mut self, clique: CliqueNodeId, maximal: bool) {
        if self.st.set_maximal(clique, maximal) != maximal {
            self.edits.push(PrimitiveEdit::SetMaximal { clique, maximal });
        }
    }

    fn add_edge(&mut self, a: CliqueNodeId, b: CliqueNodeId) {
        if a != b && self.st.add_edge(a, b) {
            self.edits.push(PrimitiveEdit::AddEdge(a, b));
        }
    }

    fn remove_edge(&mut self, a: CliqueNodeId, b: CliqueNodeId) {
        if self.st.remove_edge(a, b) {
            self.edits.push(PrimitiveEdit::RemoveEdge(a, b));
        }
    }

    fn retire(&mut self, id: CliqueNodeId) {
        for n in self.st.neighbors(id).clone() {
            self.remove_edge(id, n);
        }
        let (members, maximal) = self.st.retire(id);
        self.edits.push(PrimitiveEdit::RemoveCliqueNode { id, members, maximal });
    }

    fn alloc(&mut self, members: NodeSet, maximal: bool) -> Result<CliqueNodeId, StateError> {
        let id = self.st.alloc(members.clone(), maximal)?;
        self.edits.push(PrimitiveEdit::AddCliqueNode { id, members, maximal });
        Ok(id)
    }

    /// Demotes `loser` into a sub-clique of `winner`, moving every other edge
    /// of `loser` onto `winner`. A singleton left hanging off `winner` alone
    /// is retired instead, mirroring the singleton a full disconnect creates.
    fn absorb(&mut self, winner: CliqueNodeId, loser: CliqueNodeId) {
        self.set_maximal(loser, false);
        for n in self.st.neighbors(loser).clone() {
            if n != winner {
                self.remove_edge(loser, n);
                self.add_edge(winner, n);
            }
        }
        self.add_edge(winner, loser);
        if self.st.members(loser).len() == 1 && self.st.degree(loser) == 1 {
            self.retire(loser);
        }
    }

    fn finish(self) -> TreeEdit {
        TreeEdit { edits: self.edits }
    }

    fn rollback(self) {
        let edit = TreeEdit { edits: self.edits };
        edit.inverse().apply(self.st);
    }
}

// -- move sets ----------------------------------------------------------------

/// Maximal clique-nodes containing `i` (`T^{i|𝒞}`).
fn subtree_maximal(st: &RepresentationState, i: usize) -> Vec<CliqueNodeId> {
    st.containing(i).iter().copied().filter(|&k| st.is_maximal(k)).collect()
}

/// Maximal clique-node with the smallest membership.
fn first_by_members(st: &RepresentationState, it: impl IntoIterator<Item = CliqueNodeId>) -> Option<CliqueNodeId> {
    it.into_iter().min_by(|a, b| st.members(*a).cmp(st.members(*b)).then(a.cmp(b)))
}

/// Components of `T(𝒞)`, as a map from maximal clique-node to its
/// component's representative: the member with the smallest membership.
pub fn maximal_components(st: &RepresentationState) -> BTreeMap<CliqueNodeId, CliqueNodeId> {
    let mut root = BTreeMap::new();
    for k in st.maximal_ids() {
        if root.contains_key(&k) {
            continue;
        }
        let mut comp = vec![k];
        let mut stack = vec![k];
        root.insert(k, k);
        while let Some(x) = stack.pop() {
            for n in st.parents(x) {
                if let Entry::Vacant(e) = root.entry(n) {
                    e.insert(k);
                    comp.push(n);
                    stack.push(n);
                }
            }
        }
        let rep = first_by_members(st, comp.iter().copied()).expect("non-empty component");
        for c in comp {
            root.insert(c, rep);
        }
    }
    root
}

/// Whether disconnecting `i` from maximal `s` without promotion would need a
/// fresh singleton clique-node.
fn needs_singleton(st: &RepresentationState, s: CliqueNodeId, maxes: &[CliqueNodeId]) -> bool {
    maxes == [s] && st.members(s).len() > 1
}

pub fn move_sets(st: &RepresentationState, i: usize) -> Result<MoveSets, MoveError> {
    st.check_node(i)?;
    let maxes = subtree_maximal(st, i);
    let in_sub: BTreeSet<CliqueNodeId> = maxes.iter().copied().collect();
    let mut out = MoveSets {
        node: i,
        ..Default::default()
    };
    for &s in &maxes {
        let deg = st.parents(s).filter(|n| in_sub.contains(n)).count();
        if deg <= 1 {
            let blocked = !st.has_free_capacity()
                && needs_singleton(st, s, &maxes)
                && promotion_candidates(st, s, i)?.is_empty();
            if !blocked {
                out.bd_max.insert(s);
            }
        }
    }
    for &k in st.containing(i) {
        if !st.is_maximal(k) {
            out.bd_sub.insert(k);
        }
    }
    for k in connect_targets(st, i, &maxes).into_keys() {
        if st.is_maximal(k) {
            out.nei_max.insert(k);
        } else {
            out.nei_sub.insert(k);
        }
    }
    Ok(out)
}

fn connect_targets(st: &RepresentationState, i: usize, maxes: &[CliqueNodeId]) -> BTreeMap<CliqueNodeId, ConnectKind> {
    let mut out = BTreeMap::new();
    let mut across: Vec<(CliqueNodeId, CliqueNodeId)> = Vec::new();
    for &y in maxes {
        for &n in st.neighbors(y) {
            if st.contains(n, i) {
                continue;
            }
            if st.is_maximal(n) {
                out.insert(n, ConnectKind::MaxAdjacent { anchor: y });
                across.push((n, y));
            } else {
                out.insert(n, ConnectKind::SubWithinParent);
            }
        }
    }
    across.sort_by(|a, b| st.members(a.0).cmp(st.members(b.0)).then(a.0.cmp(&b.0)));
    for (p, y) in across {
        let sep = st.members(p).intersection(st.members(y));
        for &x in st.neighbors(p) {
            if st.is_maximal(x) || st.contains(x, i) || out.contains_key(&x) {
                continue;
            }
            if st.parents(x).any(|q| st.contains(q, i)) {
                continue;
            }
            if sep.is_proper_subset(st.members(x)) {
                out.insert(x, ConnectKind::SubAcross { parent: p, anchor: y });
            }
        }
    }
    if let Some(anchor) = first_by_members(st, maxes.iter().copied()) {
        let comps = maximal_components(st);
        let own: BTreeSet<CliqueNodeId> = maxes.iter().map(|k| comps[k]).collect();
        let reps: BTreeSet<CliqueNodeId> = comps.values().copied().filter(|r| !own.contains(r)).collect();
        for r in reps {
            out.insert(r, ConnectKind::MaxForeign { anchor });
        }
    }
    out
}

/// Classifies `s` as a connect target for `i`, or `None` when it is not one.
pub fn classify_connect(st: &RepresentationState, i: usize, s: CliqueNodeId) -> Result<Option<ConnectKind>, MoveError> {
    st.check_node(i)?;
    st.check_clique(s)?;
    let maxes = subtree_maximal(st, i);
    Ok(connect_targets(st, i, &maxes).get(&s).copied())
}

/// `{s ∩ r : r a maximal T-neighbour of s containing i}`, or `{∅}`.
pub fn separators_containing(st: &RepresentationState, s: CliqueNodeId, i: usize) -> Result<Vec<NodeSet>, MoveError> {
    st.check_node(i)?;
    st.check_clique(s)?;
    if !st.is_maximal(s) {
        return Err(MoveError::NotMaximal(s));
    }
    if !st.contains(s, i) {
        return Err(MoveError::NotMember { clique: s, node: i });
    }
    let mut seps: BTreeSet<NodeSet> = st
        .parents(s)
        .filter(|&r| st.contains(r, i))
        .map(|r| st.members(s).intersection(st.members(r)))
        .collect();
    if seps.is_empty() {
        seps.insert(NodeSet::new());
    }
    Ok(seps.into_iter().collect())
}

/// Sub-cliques of `s` containing `i` with a single T-edge whose membership
/// strictly contains every separator of `s` through `i`.
pub fn promotion_candidates(st: &RepresentationState, s: CliqueNodeId, i: usize) -> Result<Vec<CliqueNodeId>, MoveError> {
    let seps = separators_containing(st, s, i)?;
    Ok(st
        .neighbors(s)
        .iter()
        .copied()
        .filter(|&x| {
            !st.is_maximal(x)
                && st.contains(x, i)
                && st.degree(x) == 1
                && seps.iter().all(|sep| sep.is_proper_subset(st.members(x)))
        })
        .collect())
}

/// Argmax of `weight(members, i)` over the candidates; ties go to the larger
/// membership, then the lexicographically smaller one, then the lower id.
pub fn choose_promotion(
    st: &RepresentationState,
    s: CliqueNodeId,
    i: usize,
    weight: &dyn Fn(&NodeSet, usize) -> f64,
) -> Result<Option<CliqueNodeId>, MoveError> {
    let cands = promotion_candidates(st, s, i)?;
    let mut best: Option<(f64, CliqueNodeId)> = None;
    for x in cands {
        let w = weight(st.members(x), i);
        let better = match best {
            None => true,
            Some((bw, b)) => {
                let (mx, mb) = (st.members(x), st.members(b));
                w > bw || (w == bw && (mx.len() > mb.len() || (mx.len() == mb.len() && mx < mb)))
            }
        };
        if better {
            best = Some((w, x));
        }
    }
    Ok(best.map(|b| b.1))
}

// -- edits --------------------------------------------------------------------

pub fn apply_connect(st: &mut RepresentationState, i: usize, s: CliqueNodeId) -> Result<TreeEdit, MoveError> {
    st.check_node(i)?;
    st.check_clique(s)?;
    if st.contains(s, i) {
        return Err(MoveError::Impermissible(format!(
            "{} already contains {}",
            st.clique_label(s),
            st.node_label(i)
        )));
    }
    let kind = classify_connect(st, i, s)?.ok_or_else(|| {
        MoveError::Impermissible(format!(
            "{} is not adjacent to the induced subtree of {}",
            st.clique_label(s),
            st.node_label(i)
        ))
    })?;
    let mut j = Journal::new(st);
    match kind {
        ConnectKind::SubWithinParent => {
            j.set_member(s, i, true);
            for x in j.st.neighbors(s).clone() {
                if !j.st.contains(x, i) {
                    j.remove_edge(x, s);
                }
            }
        }
        ConnectKind::SubAcross { parent: p, anchor: y } => {
            j.set_member(s, i, true);
            j.set_maximal(s, true);
            j.remove_edge(y, p);
            j.add_edge(y, s);
            for x in j.st.neighbors(s).clone() {
                if x != p && x != y {
                    j.remove_edge(x, s);
                }
            }
            let grown = j.st.members(s).clone();
            for x in j.st.neighbors(p).clone() {
                if x != s && !j.st.is_maximal(x) && j.st.members(x).is_subset(&grown) {
                    j.add_edge(x, s);
                }
            }
            for d in [y, p] {
                if j.st.members(d).is_subset(&grown) {
                    j.absorb(s, d);
                }
            }
        }
        ConnectKind::MaxAdjacent { anchor: y } => {
            j.set_member(s, i, true);
            if j.st.members(y).is_subset(j.st.members(s)) {
                j.absorb(s, y);
            }
        }
        ConnectKind::MaxForeign { anchor: y } => {
            j.set_member(s, i, true);
            j.add_edge(y, s);
            if j.st.members(y).is_subset(j.st.members(s)) {
                j.absorb(s, y);
            }
        }
    }
    Ok(j.finish())
}

pub fn apply_disconnect(
    st: &mut RepresentationState,
    i: usize,
    s: CliqueNodeId,
    promotion: Option<CliqueNodeId>,
) -> Result<TreeEdit, MoveError> {
    st.check_node(i)?;
    st.check_clique(s)?;
    if !st.contains(s, i) {
        return Err(MoveError::Impermissible(format!(
            "{} does not contain {}",
            st.clique_label(s),
            st.node_label(i)
        )));
    }
    if !st.is_maximal(s) {
        if promotion.is_some() {
            return Err(MoveError::InvalidPromotion("promotion applies only to maximal targets".into()));
        }
        let mut j = Journal::new(st);
        j.set_member(s, i, false);
        if j.st.members(s).is_empty() {
            j.retire(s);
        }
        return Ok(j.finish());
    }

    let maxes = subtree_maximal(st, i);
    let in_sub: BTreeSet<CliqueNodeId> = maxes.iter().copied().collect();
    let through: Vec<CliqueNodeId> = st.parents(s).filter(|n| in_sub.contains(n)).collect();
    if through.len() > 1 {
        return Err(MoveError::Impermissible(format!(
            "{} is not a leaf of the induced clique subtree of {}",
            st.clique_label(s),
            st.node_label(i)
        )));
    }
    if let Some(o) = promotion {
        if !promotion_candidates(st, s, i)?.contains(&o) {
            return Err(MoveError::InvalidPromotion(format!(
                "{} is not a qualifying sub-clique of {}",
                if st.is_live(o) { st.clique_label(o) } else { o.to_string() },
                st.clique_label(s)
            )));
        }
    }

    let mut j = Journal::new(st);
    let before = j.st.neighbors(s).clone();
    j.set_member(s, i, false);
    match promotion {
        Some(o) => {
            j.set_maximal(o, true);
            if j.st.members(o).len() == 1 {
                j.remove_edge(o, s);
            }
            let target = j.st.members(o).clone();
            for &x in &before {
                if x == o || j.st.is_maximal(x) || !j.st.contains(x, i) {
                    continue;
                }
                j.remove_edge(x, s);
                if j.st.members(x).is_subset(&target) {
                    j.add_edge(x, o);
                } else if j.st.degree(x) == 0 {
                    j.retire(x);
                }
            }
            for &r in &through {
                j.remove_edge(s, r);
                j.add_edge(o, r);
            }
        }
        None => {
            for &x in &before {
                if j.st.is_maximal(x) || !j.st.contains(x, i) {
                    continue;
                }
                j.remove_edge(x, s);
                if j.st.degree(x) == 0 {
                    j.retire(x);
                }
            }
        }
    }

    let shrunk = j.st.members(s).clone();
    if shrunk.is_empty() {
        j.retire(s);
    } else {
        let hosts: Vec<CliqueNodeId> = j.st.parents(s).filter(|&x| shrunk.is_subset(j.st.members(x))).collect();
        let host = first_by_members(j.st, hosts);
        if let Some(x) = host {
            j.absorb(x, s);
        }
    }
    if j.st.containing(i).is_empty() {
        if let Err(e) = j.alloc(NodeSet::singleton(i), true) {
            j.rollback();
            return Err(e.into());
        }
    }
    Ok(j.finish())
}

pub fn apply_move(st: &mut RepresentationState, mv: &Move) -> Result<TreeEdit, MoveError> {
    match mv.kind {
        MoveKind::Connect => {
            if mv.promotion.is_some() {
                return Err(MoveError::InvalidPromotion("connect moves take no promotion".into()));
            }
            apply_connect(st, mv.node, mv.target)
        }
        MoveKind::Disconnect => apply_disconnect(st, mv.node, mv.target, mv.promotion),
    }
}

/// Every move the node may make, with maximal disconnects promoted by
/// `weight` per [`choose_promotion`].
pub fn node_moves(
    st: &RepresentationState,
    i: usize,
    weight: &dyn Fn(&NodeSet, usize) -> f64,
) -> Result<(MoveSets, Vec<Move>), MoveError> {
    let sets = move_sets(st, i)?;
    let mut out = Vec::new();
    for &s in &sets.bd_max {
        out.push(Move::disconnect(i, s, choose_promotion(st, s, i, weight)?));
    }
    for &s in &sets.bd_sub {
        out.push(Move::disconnect(i, s, None));
    }
    for s in sets.neighbours() {
        out.push(Move::connect(i, s));
    }
    Ok((sets, out))
}

// -- disconnect table ---------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableRow {
    pub node: NodeId,
    pub clique: CliqueNodeId,
    pub separators: Vec<NodeSet>,
    pub candidates: Vec<CliqueNodeId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TableRecord {
    pub node: String,
    pub clique: String,
    pub separators: Vec<String>,
    pub candidates: Vec<String>,
}

/// One row per (node, maximal clique-node containing it), sorted by node
/// label then clique label.
pub fn disconnect_table(st: &RepresentationState) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for i in 0..st.node_count() {
        for &s in st.containing(i) {
            if !st.is_maximal(s) {
                continue;
            }
            let separators = separators_containing(st, s, i).expect("member of maximal clique-node");
            let candidates = promotion_candidates(st, s, i).expect("member of maximal clique-node");
            rows.push(TableRow {
                node: NodeId(i),
                clique: s,
                separators,
                candidates,
            });
        }
    }
    rows.sort_by_cached_key(|r| (st.node_label(r.node.0), st.clique_label(r.clique), r.clique));
    rows
}

pub fn table_records(st: &RepresentationState, rows: &[TableRow]) -> Vec<TableRecord> {
    rows.iter()
        .map(|r| {
            let mut separators: Vec<String> = r.separators.iter().map(|s| st.render_set(s)).collect();
            separators.sort();
            let mut candidates: Vec<String> = r.candidates.iter().map(|&c| st.clique_label(c)).collect();
            candidates.sort();
            TableRecord {
                node: st.node_label(r.node.0),
                clique: st.clique_label(r.clique),
                separators,
                candidates,
            }
        })
        .collect()
}

fn braces(items: &[String]) -> String {
    if items.is_empty() {
        "{∅}".to_string()
    } else {
        format!("{{{}}}", items.join(", "))
    }
}

/// Aligned text form: header plus one line per row.
pub fn render_table(st: &RepresentationState, rows: &[TableRow]) -> String {
    let recs = table_records(st, rows);
    let mut lines: Vec<[String; 4]> = vec![[
        "node".into(),
        "clique".into(),
        "separators".into(),
        "candidates".into(),
    ]];
    for r in recs {
        lines.push([r.node, r.clique, braces(&r.separators), braces(&r.candidates)]);
    }
    let width = |c: usize| lines.iter().map(|l| l[c].chars().count()).max().unwrap_or(0);
    let widths = [width(0), width(1), width(2)];
    let mut out = String::new();
    for l in &lines {
        for (c, w) in widths.iter().enumerate() {
            out.push_str(&l[c]);
            out.push_str(&" ".repeat(w - l[c].chars().count() + 2));
        }
        out.push_str(&l[3]);
        out.push('\n');
    }
    out
}

// -- membership-only sets -------------------------------------------------------

/// Separator set computed from memberships alone: the maximal elements of
/// `{s ∩ q : q maximal, q ≠ s, i ∈ q}`, or `{∅}`.
pub fn separators_tree_free(st: &RepresentationState, s: CliqueNodeId, i: usize) -> Vec<NodeSet> {
    let all: BTreeSet<NodeSet> = st
        .containing(i)
        .iter()
        .copied()
        .filter(|&q| q != s && st.is_maximal(q))
        .map(|q| st.members(s).intersection(st.members(q)))
        .collect();
    let mut out: Vec<NodeSet> = all
        .iter()
        .filter(|a| !all.iter().any(|b| a.is_proper_subset(b)))
        .cloned()
        .collect();
    if out.is_empty() {
        out.push(NodeSet::new());
    }
    out
}

/// The four sets from membership algebra only, without consulting `T`.
pub fn move_sets_tree_free(st: &RepresentationState, i: usize) -> Result<MoveSets, MoveError> {
    st.check_node(i)?;
    let maxes = subtree_maximal(st, i);
    let reach = maxes.iter().fold(NodeSet::new(), |acc, &k| acc.union(st.members(k)));
    let mut out = MoveSets {
        node: i,
        ..Default::default()
    };
    for &s in &maxes {
        let seps = separators_tree_free(st, s, i);
        let covered = seps
            .iter()
            .all(|sep| st.clique_ids().any(|k| k != s && sep.is_subset(st.members(k))));
        if covered {
            out.bd_max.insert(s);
        }
    }
    for k in st.clique_ids() {
        if st.contains(k, i) {
            if !st.is_maximal(k) {
                out.bd_sub.insert(k);
            }
            continue;
        }
        let meet = st.members(k).intersection(&reach);
        if maxes.iter().any(|&y| meet.is_subset(st.members(y))) {
            if st.is_maximal(k) {
                out.nei_max.insert(k);
            } else {
                out.nei_sub.insert(k);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SetComparison {
    pub tree: Vec<String>,
    pub tree_free: Vec<String>,
    pub only_tree: Vec<String>,
    pub only_tree_free: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NodeDifferential {
    pub node: String,
    pub agree: bool,
    pub bd_max: SetComparison,
    pub bd_sub: SetComparison,
    pub nei_max: SetComparison,
    pub nei_sub: SetComparison,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DifferentialReport {
    pub nodes: Vec<NodeDifferential>,
    pub discrepancies: usize,
}

fn compare(st: &RepresentationState, a: &BTreeSet<CliqueNodeId>, b: &BTreeSet<CliqueNodeId>) -> SetComparison {
    let name = |k: &CliqueNodeId| format!("{}:{}", k, st.clique_label(*k));
    SetComparison {
        tree: a.iter().map(name).collect(),
        tree_free: b.iter().map(name).collect(),
        only_tree: a.difference(b).map(name).collect(),
        only_tree_free: b.difference(a).map(name).collect(),
    }
}

/// Compares [`move_sets`] with [`move_sets_tree_free`] on every node.
pub fn differential_report(st: &RepresentationState) -> Result<DifferentialReport, MoveError> {
    let mut nodes = Vec::new();
    let mut discrepancies = 0;
    for i in 0..st.node_count() {
        let t = move_sets(st, i)?;
        let f = move_sets_tree_free(st, i)?;
        let parts = [
            compare(st, &t.bd_max, &f.bd_max),
            compare(st, &t.bd_sub, &f.bd_sub),
            compare(st, &t.nei_max, &f.nei_max),
            compare(st, &t.nei_sub, &f.nei_sub),
        ];
        let diff: usize = parts.iter().map(|p| p.only_tree.len() + p.only_tree_free.len()).sum();
        discrepancies += diff;
        let [bd_max, bd_sub, nei_max, nei_sub] = parts;
        nodes.push(NodeDifferential {
            node: st.node_label(i),
            agree: diff == 0,
            bd_max,
            bd_sub,
            nei_max,
            nei_sub,
        });
    }
    Ok(DifferentialReport { nodes, discrepancies })
}
