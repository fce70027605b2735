//! Brute-force references for small inputs.
//!
//! Everything here is deliberately naive and independent of the incremental
//! machinery it checks: chordality by exhaustive elimination search, the
//! decomposable census by sweeping every edge mask, and permissible moves by
//! flipping single membership bits and re-deriving the junction structure
//! from scratch.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::bipartite::{from_graph, project, verify_clique_dependent, CliqueNodeId, RepresentationState, StateError};
use crate::graph::{build_junction_tree, pair_index, UndirectedGraph};
use crate::moves::{apply_move, node_moves, Move, MoveError, MoveKind};
use crate::nodeset::NodeSet;
use crate::par::{map_indices, ExecMode};

pub const CHORDALITY_LIMIT: usize = 9;
pub const CENSUS_LIMIT: usize = 5;
pub const FLIP_LIMIT: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("{what} is limited to {limit} nodes, got {n}")]
    TooLarge { what: &'static str, n: usize, limit: usize },
    #[error("census parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// True iff the graph admits a perfect elimination ordering, found by
/// searching every ordering with memoisation over the remaining node set.
pub fn reference_chordality(g: &UndirectedGraph) -> Result<bool, OracleError> {
    let n = g.node_count();
    if n > CHORDALITY_LIMIT {
        return Err(OracleError::TooLarge {
            what: "reference chordality",
            n,
            limit: CHORDALITY_LIMIT,
        });
    }
    let adj: Vec<u32> = (0..n)
        .map(|v| g.neighbors(v).iter().fold(0u32, |m, u| m | 1 << u))
        .collect();
    let mut memo = HashMap::new();
    Ok(eliminable((1u32 << n) - 1, &adj, &mut memo))
}

fn eliminable(rest: u32, adj: &[u32], memo: &mut HashMap<u32, bool>) -> bool {
    if rest.count_ones() <= 3 {
        // Every graph on at most three nodes is chordal.
        return true;
    }
    if let Some(&r) = memo.get(&rest) {
        return r;
    }
    let mut ok = false;
    let mut bits = rest;
    while bits != 0 {
        let v = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let nb = adj[v] & rest;
        let simplicial = (0..adj.len())
            .filter(|&u| nb >> u & 1 == 1)
            .all(|u| nb & !(1 << u) & !adj[u] == 0);
        if simplicial && eliminable(rest & !(1 << v), adj, memo) {
            ok = true;
            break;
        }
    }
    memo.insert(rest, ok);
    ok
}

/// Every labelled decomposable graph on `n` nodes, as edge masks over
/// [`pair_index`] order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphCensus {
    pub n: usize,
    pub chordal_graphs: Vec<u64>,
    pub count: usize,
}

impl GraphCensus {
    /// `n <n>`, `count <k>`, then one decimal mask per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("n {}\ncount {}\n", self.n, self.count);
        for m in &self.chordal_graphs {
            out.push_str(&format!("{m}\n"));
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, OracleError> {
        let mut lines = text.lines().enumerate().map(|(x, l)| (x + 1, l.trim()));
        let mut header = |key: &str| -> Result<usize, OracleError> {
            let (ln, l) = lines.next().ok_or(OracleError::Parse {
                line: 0,
                msg: format!("missing {key}"),
            })?;
            l.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or(OracleError::Parse {
                    line: ln,
                    msg: format!("expected `{key} <int>`"),
                })
        };
        let n = header("n")?;
        let count = header("count")?;
        let mut masks = Vec::new();
        for (ln, l) in lines.filter(|(_, l)| !l.is_empty()) {
            masks.push(l.parse().map_err(|_| OracleError::Parse {
                line: ln,
                msg: format!("bad mask {l:?}"),
            })?);
        }
        if masks.len() != count {
            return Err(OracleError::Parse {
                line: 2,
                msg: format!("count {count} but {} masks", masks.len()),
            });
        }
        Ok(Self {
            n,
            chordal_graphs: masks,
            count,
        })
    }
}

pub fn enumerate_decomposable(n: usize, mode: ExecMode) -> Result<GraphCensus, OracleError> {
    if n > CENSUS_LIMIT {
        return Err(OracleError::TooLarge {
            what: "decomposable census",
            n,
            limit: CENSUS_LIMIT,
        });
    }
    let pairs = pair_index(n).count();
    let total = 1usize << pairs;
    let keep = map_indices(mode, total, |m| {
        reference_chordality(&UndirectedGraph::from_edge_mask(n, m as u64)).expect("n within limit")
    });
    let chordal_graphs: Vec<u64> = (0..total as u64).filter(|&m| keep[m as usize]).collect();
    Ok(GraphCensus {
        n,
        count: chordal_graphs.len(),
        chordal_graphs,
    })
}

/// One membership bit: `(node, clique-node, new value)`.
pub type Flip = (usize, CliqueNodeId, bool);

/// Every single membership flip that can be completed to a valid state.
///
/// A flip is completed by optionally dropping sub-cliques that contain the
/// node, adding a singleton if the node is left uncovered, re-deriving the
/// maximal flags from the projection, rebuilding the junction forest and
/// reattaching sub-cliques to nesting maximal clique-nodes. The flip is kept
/// if some completion passes [`verify_clique_dependent`].
pub fn brute_force_moves(st: &RepresentationState) -> Result<BTreeSet<Flip>, OracleError> {
    let n = st.node_count();
    if n > FLIP_LIMIT {
        return Err(OracleError::TooLarge {
            what: "brute-force moves",
            n,
            limit: FLIP_LIMIT,
        });
    }
    let ids: Vec<CliqueNodeId> = st.clique_ids().collect();
    let mut out = BTreeSet::new();
    for i in 0..n {
        for &k in &ids {
            let bit = !st.contains(k, i);
            if flip_completes(st, i, k, bit) {
                out.insert((i, k, bit));
            }
        }
    }
    Ok(out)
}

/// Membership flip a move makes on its target.
pub fn move_flip(mv: &Move) -> Flip {
    (mv.node, mv.target, mv.kind == MoveKind::Connect)
}

fn flip_completes(st: &RepresentationState, i: usize, k: CliqueNodeId, bit: bool) -> bool {
    let mut members: BTreeMap<CliqueNodeId, NodeSet> = st.clique_ids().map(|c| (c, st.members(c).clone())).collect();
    let m = members.get_mut(&k).expect("live id");
    if bit {
        m.insert(i);
    } else {
        m.remove(i);
    }
    let droppable: Vec<CliqueNodeId> = st
        .sub_ids()
        .filter(|&s| s != k && members[&s].contains(i))
        .collect();
    (0u32..1 << droppable.len()).any(|mask| {
        let mut m = members.clone();
        for (x, s) in droppable.iter().enumerate() {
            if mask >> x & 1 == 1 {
                m.remove(s);
            }
        }
        rebuild(st, &m, i).is_some_and(|p| verify_clique_dependent(&p).is_valid())
    })
}

fn rebuild(st: &RepresentationState, members: &BTreeMap<CliqueNodeId, NodeSet>, i: usize) -> Option<RepresentationState> {
    let n = st.node_count();
    let mut p = RepresentationState::empty(n);
    for x in 0..n {
        if let Some(l) = &st.labels()[x] {
            p.set_label(x, l).ok()?;
        }
    }
    p.set_cap(usize::MAX);
    for (&c, m) in members {
        if !m.is_empty() {
            p.insert_at(c, m.clone(), false);
        }
    }
    if p.containing(i).is_empty() {
        p.alloc(NodeSet::singleton(i), false).ok()?;
    }
    let g = project(&p);
    let truth = from_graph(&g).ok()?;
    let cliques: BTreeSet<NodeSet> = truth.maximal_ids().map(|c| truth.members(c).clone()).collect();
    let mut flagged: BTreeMap<NodeSet, CliqueNodeId> = BTreeMap::new();
    for c in p.clique_ids().collect::<Vec<_>>() {
        let m = p.members(c);
        if cliques.contains(m) && !flagged.contains_key(m) {
            flagged.insert(m.clone(), c);
            p.set_maximal(c, true);
        }
    }
    let order: Vec<CliqueNodeId> = flagged.values().copied().collect();
    let sets: Vec<NodeSet> = flagged.keys().cloned().collect();
    for e in build_junction_tree(&sets).edges {
        p.add_edge(order[e.a], order[e.b]);
    }
    for s in p.sub_ids().collect::<Vec<_>>() {
        let mut attached = false;
        let old: Vec<CliqueNodeId> = st.neighbors(s).iter().copied().filter(|nb| p.is_live(*nb)).collect();
        for nb in old {
            if p.is_maximal(nb) && p.members(s).is_subset(p.members(nb)) {
                p.add_edge(s, nb);
                attached = true;
            }
        }
        if !attached {
            if let Some((_, &host)) = flagged.iter().find(|(m, _)| p.members(s).is_subset(m)) {
                p.add_edge(s, host);
            }
        }
    }
    Some(p)
}

/// Emitted moves whose flip the oracle does not accept.
pub fn unsound_moves(st: &RepresentationState, nodes: &[usize]) -> Result<Vec<Move>, MoveError> {
    let oracle = brute_force_moves(st).map_err(|e| MoveError::Impermissible(e.to_string()))?;
    let weight = |_: &NodeSet, _: usize| 0.5;
    let mut bad = Vec::new();
    for &i in nodes {
        let (_, moves) = node_moves(st, i, &weight)?;
        bad.extend(moves.into_iter().filter(|m| !oracle.contains(&move_flip(m))));
    }
    Ok(bad)
}

/// A valid state reached by `steps` uniformly chosen permissible moves from
/// `n` isolated singletons.
pub fn random_state(n: usize, steps: usize, seed: u64) -> Result<RepresentationState, StateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut st = from_graph(&UndirectedGraph::new(n))?;
    let weight = |_: &NodeSet, _: usize| 0.5;
    for _ in 0..steps {
        let i = rng.random_range(0..n);
        let moves = match node_moves(&st, i, &weight) {
            Ok((_, m)) => m,
            Err(MoveError::State(e)) => return Err(e),
            Err(e) => unreachable!("{e}"),
        };
        if let Some(mv) = moves.choose(&mut rng) {
            apply_move(&mut st, mv).expect("emitted move applies");
        }
    }
    Ok(st)
}

/// Uniformly random undirected graph on `n` nodes.
pub fn random_graph(n: usize, rng: &mut impl Rng) -> UndirectedGraph {
    let mut g = UndirectedGraph::new(n);
    for (u, v) in pair_index(n) {
        if rng.random_bool(0.5) {
            g.add_edge(u, v).expect("in range");
        }
    }
    g
}
