//! Classical decomposable-graph machinery: maximum cardinality search,
//! maximal cliques of chordal graphs, junction forests and the
//! clique/separator factorization.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nodeset::{NodeId, NodeSet};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("self-loop on node {0}")]
    SelfLoop(usize),
    #[error("node {node} out of range (graph has {count} nodes)")]
    NodeOutOfRange { node: usize, count: usize },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("invalid elimination ordering: {0}")]
    InvalidPeo(String),
}

/// Simple undirected graph on dense node ids `0..n`, with optional labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UndirectedGraph {
    adj: Vec<NodeSet>,
    labels: Vec<Option<String>>,
}

impl UndirectedGraph {
    pub fn new(n: usize) -> Self {
        Self {
            adj: vec![NodeSet::new(); n],
            labels: vec![None; n],
        }
    }

    pub fn with_labels<S: AsRef<str>>(labels: &[S]) -> Result<Self, GraphError> {
        let mut g = Self::new(labels.len());
        for (i, l) in labels.iter().enumerate() {
            g.set_label(i, l.as_ref())?;
        }
        Ok(g)
    }

    /// Builds a graph from an edge bitmask over the pairs `(u, v)`, `u < v`,
    /// enumerated lexicographically.
    pub fn from_edge_mask(n: usize, mask: u64) -> Self {
        let mut g = Self::new(n);
        for (bit, (u, v)) in pair_index(n).enumerate() {
            if mask >> bit & 1 == 1 {
                g.adj[u].insert(v);
                g.adj[v].insert(u);
            }
        }
        g
    }

    pub fn edge_mask(&self) -> u64 {
        let mut mask = 0u64;
        for (bit, (u, v)) in pair_index(self.node_count()).enumerate() {
            if self.has_edge(u, v) {
                mask |= 1 << bit;
            }
        }
        mask
    }

    pub fn set_label(&mut self, node: usize, label: &str) -> Result<(), GraphError> {
        self.check(node)?;
        if self
            .labels
            .iter()
            .enumerate()
            .any(|(i, l)| i != node && l.as_deref() == Some(label))
        {
            return Err(GraphError::DuplicateLabel(label.to_string()));
        }
        self.labels[node] = Some(label.to_string());
        Ok(())
    }

    pub fn labels(&self) -> &[Option<String>] {
        &self.labels
    }

    pub fn label(&self, node: usize) -> Option<&str> {
        self.labels.get(node).and_then(|l| l.as_deref())
    }

    /// Label if present, otherwise the numeric id.
    pub fn display_label(&self, node: usize) -> String {
        self.label(node).map_or_else(|| node.to_string(), str::to_string)
    }

    pub fn node_by_label(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.as_deref() == Some(label))
    }

    fn check(&self, node: usize) -> Result<(), GraphError> {
        if node < self.adj.len() {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange {
                node,
                count: self.adj.len(),
            })
        }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool, GraphError> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        self.adj[v].insert(u);
        Ok(self.adj[u].insert(v))
    }

    pub fn remove_edge(&mut self, u: usize, v: usize) -> bool {
        if u >= self.adj.len() || v >= self.adj.len() {
            return false;
        }
        self.adj[v].remove(u);
        self.adj[u].remove(v)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.adj.len() && self.adj[u].contains(v)
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(NodeSet::len).sum::<usize>() / 2
    }

    pub fn neighbors(&self, v: usize) -> &NodeSet {
        &self.adj[v]
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&v| v > u).map(move |v| (u, v)))
    }

    pub fn is_complete(&self, set: &NodeSet) -> bool {
        set.iter().all(|u| set.iter().all(|v| u == v || self.has_edge(u, v)))
    }

    /// Connected components as node sets, ordered by smallest member.
    pub fn components(&self) -> Vec<NodeSet> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for s in 0..n {
            if seen[s] {
                continue;
            }
            let mut comp = NodeSet::new();
            let mut stack = vec![s];
            seen[s] = true;
            while let Some(u) = stack.pop() {
                comp.insert(u);
                for v in self.adj[u].iter() {
                    if !seen[v] {
                        seen[v] = true;
                        stack.push(v);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// Parses the edge-list text format: `u v` per line, `#` comments,
    /// optional `node <id> <label>` and `nodes <count>` lines. Endpoints may be
    /// given by label or numeric id.
    pub fn parse_edge_list(text: &str) -> Result<Self, GraphError> {
        let mut declared: Vec<(usize, String)> = Vec::new();
        let mut count = 0usize;
        let mut edge_lines = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let toks: Vec<&str> = line.split_whitespace().collect();
            let perr = |msg: &str| GraphError::Parse {
                line: ln + 1,
                msg: msg.to_string(),
            };
            match toks.as_slice() {
                ["node", id, label] => {
                    let id: usize = id.parse().map_err(|_| perr("bad node id"))?;
                    count = count.max(id + 1);
                    declared.push((id, label.to_string()));
                }
                ["nodes", n] => {
                    count = count.max(n.parse().map_err(|_| perr("bad node count"))?);
                }
                [u, v] => edge_lines.push((ln + 1, u.to_string(), v.to_string())),
                _ => return Err(perr("expected `u v`, `node <id> <label>` or `nodes <n>`")),
            }
        }
        let resolve = |tok: &str, line: usize, count: &mut usize| -> Result<usize, GraphError> {
            if let Some((id, _)) = declared.iter().find(|(_, l)| l == tok) {
                return Ok(*id);
            }
            let id: usize = tok.parse().map_err(|_| GraphError::Parse {
                line,
                msg: format!("unknown node {tok:?}"),
            })?;
            *count = (*count).max(id + 1);
            Ok(id)
        };
        let mut edges = Vec::new();
        for (line, u, v) in &edge_lines {
            let u = resolve(u, *line, &mut count)?;
            let v = resolve(v, *line, &mut count)?;
            edges.push((*line, u, v));
        }
        let mut g = Self::new(count);
        for (id, label) in &declared {
            g.set_label(*id, label)?;
        }
        for (line, u, v) in edges {
            g.add_edge(u, v).map_err(|e| GraphError::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(g)
    }

    pub fn to_edge_list(&self) -> String {
        let mut out = format!("nodes {}\n", self.node_count());
        for (i, l) in self.labels.iter().enumerate() {
            if let Some(l) = l {
                out.push_str(&format!("node {i} {l}\n"));
            }
        }
        for (u, v) in self.edges() {
            out.push_str(&format!("{} {}\n", self.display_label(u), self.display_label(v)));
        }
        out
    }
}

/// Pairs `(u, v)`, `u < v`, in lexicographic order; bit `k` of an edge mask
/// refers to the `k`-th pair.
pub fn pair_index(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |u| (u + 1..n).map(move |v| (u, v)))
}

/// A perfect elimination ordering: first element is eliminated first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Peo(pub Vec<NodeId>);

/// Maximum cardinality search rejected the graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NotChordal {
    /// A node whose previously visited neighbours do not form a clique.
    pub witness: NodeId,
    pub visit_order: Vec<NodeId>,
}

impl fmt::Display for NotChordal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "not chordal: earlier neighbours of node {} are not complete", self.witness)
    }
}

/// Maximum cardinality search. Ties go to the lowest node id.
pub fn mcs_visit_order(g: &UndirectedGraph) -> Vec<usize> {
    let n = g.node_count();
    let mut weight = vec![0usize; n];
    let mut visited = vec![false; n];
    let mut buckets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n + 1];
    buckets[0].extend(0..n);
    let mut top = 0usize;
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        while buckets[top].is_empty() {
            top -= 1;
        }
        let v = buckets[top].pop_first().expect("non-empty bucket");
        visited[v] = true;
        order.push(v);
        for u in g.neighbors(v).iter() {
            if !visited[u] {
                buckets[weight[u]].remove(&u);
                weight[u] += 1;
                buckets[weight[u]].insert(u);
                top = top.max(weight[u]);
            }
        }
    }
    order
}

/// Runs maximum cardinality search and returns the reverse visit order as a
/// perfect elimination ordering, or the node at which the ordering fails.
pub fn mcs_peo(g: &UndirectedGraph) -> Result<Peo, NotChordal> {
    let order = mcs_visit_order(g);
    let n = g.node_count();
    let mut pos = vec![0usize; n];
    for (k, &v) in order.iter().enumerate() {
        pos[v] = k;
    }
    // earlier(v): neighbours visited before v. For the ordering to be perfect,
    // earlier(v) minus its last-visited member p must lie in earlier(p).
    for &v in &order {
        let earlier: Vec<usize> = g.neighbors(v).iter().filter(|&u| pos[u] < pos[v]).collect();
        let Some(&p) = earlier.iter().max_by_key(|&&u| pos[u]) else {
            continue;
        };
        for &u in &earlier {
            if u != p && !g.has_edge(u, p) {
                return Err(NotChordal {
                    witness: NodeId(v),
                    visit_order: order.into_iter().map(NodeId).collect(),
                });
            }
        }
    }
    Ok(Peo(order.into_iter().rev().map(NodeId).collect()))
}

pub fn is_chordal(g: &UndirectedGraph) -> bool {
    mcs_peo(g).is_ok()
}

/// Maximal cliques and the separator multiset of a decomposable graph.
///
/// `cliques` are listed in a perfect ordering sequence; `separators[j]` pairs
/// with the clique that introduced it. Empty separators (first clique of a
/// connected component) are not recorded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CliqueSet {
    pub cliques: Vec<NodeSet>,
    pub separators: Vec<NodeSet>,
}

impl CliqueSet {
    pub fn sorted_cliques(&self) -> Vec<NodeSet> {
        let mut c = self.cliques.clone();
        c.sort();
        c
    }

    pub fn sorted_separators(&self) -> Vec<NodeSet> {
        let mut s = self.separators.clone();
        s.sort();
        s
    }
}

pub fn maximal_cliques_chordal(g: &UndirectedGraph, peo: &Peo) -> Result<CliqueSet, GraphError> {
    let n = g.node_count();
    if peo.0.len() != n {
        return Err(GraphError::InvalidPeo(format!(
            "ordering has {} entries, graph has {n} nodes",
            peo.0.len()
        )));
    }
    let mut pos = vec![usize::MAX; n];
    for (k, v) in peo.0.iter().enumerate() {
        if v.0 >= n || pos[v.0] != usize::MAX {
            return Err(GraphError::InvalidPeo(format!("node {v} repeated or out of range")));
        }
        pos[v.0] = k;
    }
    let mut candidates: Vec<(usize, NodeSet)> = Vec::with_capacity(n);
    for (k, v) in peo.0.iter().enumerate() {
        let later: NodeSet = g.neighbors(v.0).iter().filter(|&u| pos[u] > k).collect();
        if !g.is_complete(&later) {
            return Err(GraphError::InvalidPeo(format!(
                "later neighbours of node {v} are not complete"
            )));
        }
        let mut c = later;
        c.insert(v.0);
        candidates.push((k, c));
    }
    let mut maximal: Vec<(usize, NodeSet)> = candidates
        .iter()
        .filter(|(_, c)| !candidates.iter().any(|(_, d)| c.is_proper_subset(d)))
        .cloned()
        .collect();
    // Reverse elimination order is a running-intersection ordering.
    maximal.sort_by_key(|m| std::cmp::Reverse(m.0));
    let cliques: Vec<NodeSet> = maximal.into_iter().map(|(_, c)| c).collect();
    let mut separators = Vec::new();
    let mut seen = NodeSet::new();
    for c in &cliques {
        let s = c.intersection(&seen);
        if !s.is_empty() {
            separators.push(s);
        }
        seen = seen.union(c);
    }
    Ok(CliqueSet { cliques, separators })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionEdge {
    pub a: usize,
    pub b: usize,
    pub separator: NodeSet,
}

/// Junction forest over a list of node sets, edges by clique index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JunctionTreeClassic {
    pub cliques: Vec<NodeSet>,
    pub edges: Vec<JunctionEdge>,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }
    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut x = x;
        while self.0[x] != r {
            let next = self.0[x];
            self.0[x] = r;
            x = next;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.0[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Maximum-weight spanning forest of the clique intersection graph, weight
/// `|C_a ∩ C_b|`. Pairs with empty intersection are never joined. Ties go to
/// the lexicographically smallest index pair.
pub fn build_junction_tree(cliques: &[NodeSet]) -> JunctionTreeClassic {
    let k = cliques.len();
    let mut cand: Vec<(usize, usize, usize)> = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            let w = cliques[a].intersection(&cliques[b]).len();
            if w > 0 {
                cand.push((w, a, b));
            }
        }
    }
    cand.sort_by(|x, y| y.0.cmp(&x.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut uf = UnionFind::new(k);
    let mut edges = Vec::new();
    for (_, a, b) in cand {
        if uf.union(a, b) {
            edges.push(JunctionEdge {
                a,
                b,
                separator: cliques[a].intersection(&cliques[b]),
            });
        }
    }
    JunctionTreeClassic {
        cliques: cliques.to_vec(),
        edges,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RipViolation {
    /// The edge closes a cycle, so paths are not unique.
    NotForest { a: usize, b: usize },
    /// `cliques[a] ∩ cliques[b]` is not contained in `cliques[via]`, which
    /// lies on the path between them.
    Intersection { a: usize, b: usize, via: usize },
}

/// Checks the running intersection property on every pair of sets joined by a
/// path of `edges`. Pairs in different components are exempt.
pub fn check_rip(sets: &[NodeSet], edges: &[(usize, usize)]) -> Result<(), RipViolation> {
    let k = sets.len();
    let mut adj = vec![Vec::new(); k];
    let mut uf = UnionFind::new(k);
    for &(a, b) in edges {
        if !uf.union(a, b) {
            return Err(RipViolation::NotForest { a, b });
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    for src in 0..k {
        // DFS from src tracking the running intersection of the path.
        let mut stack = vec![(src, usize::MAX, sets[src].clone())];
        while let Some((u, parent, path_meet)) = stack.pop() {
            if u != src {
                let need = sets[src].intersection(&sets[u]);
                if !need.is_subset(&path_meet) {
                    // Locate an offending intermediate for the report.
                    let via = path_between(&adj, src, u)
                        .into_iter()
                        .find(|&w| !need.is_subset(&sets[w]))
                        .unwrap_or(u);
                    return Err(RipViolation::Intersection { a: src, b: u, via });
                }
            }
            for &w in &adj[u] {
                if w != parent {
                    stack.push((w, u, path_meet.intersection(&sets[w])));
                }
            }
        }
    }
    Ok(())
}

fn path_between(adj: &[Vec<usize>], a: usize, b: usize) -> Vec<usize> {
    let mut prev = vec![usize::MAX; adj.len()];
    let mut stack = vec![a];
    prev[a] = a;
    while let Some(u) = stack.pop() {
        for &w in &adj[u] {
            if prev[w] == usize::MAX {
                prev[w] = u;
                stack.push(w);
            }
        }
    }
    let mut path = vec![b];
    let mut cur = b;
    while cur != a && prev[cur] != usize::MAX {
        cur = prev[cur];
        path.push(cur);
    }
    path
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RipReport {
    pub holds: bool,
    pub violation: Option<RipViolation>,
}

pub fn verify_rip(jt: &JunctionTreeClassic) -> RipReport {
    let edges: Vec<(usize, usize)> = jt.edges.iter().map(|e| (e.a, e.b)).collect();
    match check_rip(&jt.cliques, &edges) {
        Ok(()) => RipReport {
            holds: true,
            violation: None,
        },
        Err(v) => RipReport {
            holds: false,
            violation: Some(v),
        },
    }
}

/// Numerator and denominator index sets of the clique/separator factorization.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactorizationTerms {
    pub numerator: Vec<NodeSet>,
    pub denominator: Vec<NodeSet>,
}

impl FactorizationTerms {
    /// `Σ_C logp(C) − Σ_S logp(S)`.
    pub fn fold_log<F: Fn(&NodeSet) -> f64>(&self, logp: F) -> f64 {
        self.numerator.iter().map(&logp).sum::<f64>() - self.denominator.iter().map(&logp).sum::<f64>()
    }
}

pub fn factorization_terms(cs: &CliqueSet) -> FactorizationTerms {
    FactorizationTerms {
        numerator: cs.cliques.clone(),
        denominator: cs.separators.clone(),
    }
}
