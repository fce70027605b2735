//! Node-driven Metropolis–Hastings over clique-dependent states.
//!
//! Each step picks a node uniformly, draws one move (or a hold) from that
//! node's proposal menu, and accepts it against an injected log-target. The
//! reverse proposal probability is computed exactly by enumerating every
//! node's menu in the proposed state and summing the mass of moves that lead
//! back to the current state up to clique-node renaming.
//!
//! Draws for step `t` come from a ChaCha stream keyed by `(seed, t)`, so a
//! run is reproducible from its seed and step counter alone and the batched
//! executor can evaluate future steps speculatively.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bipartite::{
    canonical_form, induced_subtree, project, restore_with_extras, snapshot, verify_clique_dependent, CanonicalForm,
    CliqueNodeId, RepresentationState, StateError,
};
use crate::graph::is_chordal;
use crate::moves::{apply_move, classify_connect, move_sets, node_moves, ConnectKind, Move, MoveError, MoveKind, MoveSets};
use crate::nodeset::NodeSet;
use crate::par::{map_indices, ExecMode};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Move(#[from] MoveError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("step {step}: invalid state after {mv}\n{report}")]
    InvalidState { step: u64, mv: String, report: String },
    #[error("bad configuration: {0}")]
    Config(String),
}

/// `f(clique-node, node)`: the probability that the node belongs to the
/// clique-node when the coordinate is free to move.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum AffinityModel {
    Constant(f64),
    /// `σ(a·|members| + b)`.
    SizeLogistic { a: f64, b: f64 },
}

impl AffinityModel {
    pub fn eval(&self, members: &NodeSet, _node: usize) -> f64 {
        match *self {
            AffinityModel::Constant(p) => p.clamp(0.0, 1.0),
            AffinityModel::SizeLogistic { a, b } => 1.0 / (1.0 + (-(a * members.len() as f64 + b)).exp()),
        }
    }

    pub fn weight(&self) -> impl Fn(&NodeSet, usize) -> f64 + '_ {
        move |m, i| self.eval(m, i)
    }
}

impl FromStr for AffinityModel {
    type Err = SamplerError;

    /// `const:<p>` or `size:<a>,<b>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || SamplerError::Config(format!("unknown affinity {s:?}; expected const:<p> or size:<a>,<b>"));
        let (name, args) = s.split_once(':').ok_or_else(bad)?;
        match name {
            "const" => {
                let p: f64 = args.parse().map_err(|_| bad())?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(SamplerError::Config(format!("affinity {p} outside [0, 1]")));
                }
                Ok(AffinityModel::Constant(p))
            }
            "size" => {
                let (a, b) = args.split_once(',').ok_or_else(bad)?;
                Ok(AffinityModel::SizeLogistic {
                    a: a.trim().parse().map_err(|_| bad())?,
                    b: b.trim().parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AffinityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AffinityModel::Constant(p) => write!(f, "const:{p}"),
            AffinityModel::SizeLogistic { a, b } => write!(f, "size:{a},{b}"),
        }
    }
}

/// `P(z_ki = 1 | rest)`: `f` on free coordinates, the current bit otherwise.
pub fn conditional_prob(st: &RepresentationState, k: CliqueNodeId, i: usize, f: &AffinityModel) -> Result<f64, SamplerError> {
    st.check_clique(k)?;
    let sets = move_sets(st, i)?;
    Ok(if sets.contains(k) {
        f.eval(st.members(k), i)
    } else if st.contains(k, i) {
        1.0
    } else {
        0.0
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathJoint {
    pub prob: f64,
    pub log: f64,
}

/// Product of `f` over the node's induced subtree and `1 − f` over its
/// neighbour set.
pub fn path_joint(st: &RepresentationState, i: usize, f: &AffinityModel) -> Result<PathJoint, SamplerError> {
    let sets = move_sets(st, i)?;
    Ok(path_joint_with(st, i, f, &sets))
}

fn path_joint_with(st: &RepresentationState, i: usize, f: &AffinityModel, sets: &MoveSets) -> PathJoint {
    let mut prob = 1.0;
    let mut log = 0.0;
    for &k in st.containing(i) {
        let p = f.eval(st.members(k), i);
        prob *= p;
        log += p.ln();
    }
    for k in sets.neighbours() {
        let q = 1.0 - f.eval(st.members(k), i);
        prob *= q;
        log += q.ln();
    }
    PathJoint { prob, log }
}

/// The same quantity as [`path_joint`] written as a product over every
/// clique-node with membership and neighbour indicators as exponents. Returns
/// the logarithm.
pub fn path_joint_exponent_form(st: &RepresentationState, i: usize, f: &AffinityModel) -> Result<f64, SamplerError> {
    let sets = move_sets(st, i)?;
    let nei: BTreeSet<CliqueNodeId> = sets.neighbours().collect();
    let mut log = 0.0;
    for k in st.clique_ids() {
        let p = f.eval(st.members(k), i);
        let z = u8::from(st.contains(k, i)) as f64;
        let delta = u8::from(nei.contains(&k)) as f64;
        if z > 0.0 {
            log += z * p.ln();
        }
        if delta > 0.0 && z == 0.0 {
            log += (1.0 - z) * delta * (1.0 - p).ln();
        }
    }
    Ok(log)
}

/// Proposal menu for one node. Masses are within-node probabilities; the
/// node itself is picked with probability `1/|Θ|`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProposalSpec {
    pub node: usize,
    pub moves: Vec<(Move, f64)>,
    /// Maximal boundary clique-nodes adjacent to a constrained connect target.
    pub constrained: BTreeSet<CliqueNodeId>,
    pub hold: f64,
}

impl ProposalSpec {
    pub fn total(&self) -> f64 {
        self.moves.iter().map(|m| m.1).sum()
    }
}

pub fn enumerate_proposals(st: &RepresentationState, i: usize, f: &AffinityModel) -> Result<ProposalSpec, SamplerError> {
    let weight = f.weight();
    let (sets, moves) = node_moves(st, i, &weight)?;
    let n = st.node_count() as f64;
    let mut constrained_targets = BTreeSet::new();
    for &k in &sets.nei_max {
        constrained_targets.insert(k);
    }
    for &k in &sets.nei_sub {
        if matches!(classify_connect(st, i, k)?, Some(ConnectKind::SubAcross { .. })) {
            constrained_targets.insert(k);
        }
    }
    let constrained: BTreeSet<CliqueNodeId> = sets
        .bd_max
        .iter()
        .copied()
        .filter(|&b| st.neighbors(b).iter().any(|x| constrained_targets.contains(x)))
        .collect();
    let m = constrained.len() as f64;
    let mut out = Vec::with_capacity(moves.len());
    for mv in moves {
        let in_family = match mv.kind {
            MoveKind::Disconnect => constrained.contains(&mv.target),
            MoveKind::Connect => constrained_targets.contains(&mv.target),
        };
        let mass = if in_family && m > 0.0 { 1.0 / (n * m) } else { 1.0 / n };
        out.push((mv, mass));
    }
    let total: f64 = out.iter().map(|m| m.1).sum();
    if total > 1.0 {
        for m in &mut out {
            m.1 /= total;
        }
    }
    let total: f64 = out.iter().map(|m| m.1).sum();
    Ok(ProposalSpec {
        node: i,
        moves: out,
        constrained,
        hold: (1.0 - total).max(0.0),
    })
}

/// Log stationary density, up to a constant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Target {
    Uniform,
    /// Sum over nodes of the log path joint, minus `penalty` per edge of the
    /// projected graph.
    PathJoint { penalty: f64 },
}

impl Target {
    pub fn log_density(&self, st: &RepresentationState, f: &AffinityModel) -> Result<f64, SamplerError> {
        match *self {
            Target::Uniform => Ok(0.0),
            Target::PathJoint { penalty } => {
                let mut total = 0.0;
                for i in 0..st.node_count() {
                    total += path_joint(st, i, f)?.log;
                }
                if penalty != 0.0 {
                    total -= penalty * project(st).edge_count() as f64;
                }
                Ok(total)
            }
        }
    }
}

impl FromStr for Target {
    type Err = SamplerError;

    /// `uniform`, `path-joint` or `path-joint:<penalty>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "uniform" => Ok(Target::Uniform),
            None if s == "path-joint" => Ok(Target::PathJoint { penalty: 0.0 }),
            Some(("path-joint", p)) => Ok(Target::PathJoint {
                penalty: p
                    .parse()
                    .map_err(|_| SamplerError::Config(format!("bad penalty {p:?}")))?,
            }),
            _ => Err(SamplerError::Config(format!(
                "unknown target {s:?}; expected uniform or path-joint[:penalty]"
            ))),
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Uniform => write!(f, "uniform"),
            Target::PathJoint { penalty } if *penalty == 0.0 => write!(f, "path-joint"),
            Target::PathJoint { penalty } => write!(f, "path-joint:{penalty}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum CheckProfile {
    /// Validate after every step.
    #[default]
    Debug,
    /// Validate every 100 steps.
    Fast,
}

impl CheckProfile {
    pub fn period(self) -> u64 {
        match self {
            CheckProfile::Debug => 1,
            CheckProfile::Fast => 100,
        }
    }
}

impl FromStr for CheckProfile {
    type Err = SamplerError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "debug" => Ok(CheckProfile::Debug),
            "fast" => Ok(CheckProfile::Fast),
            _ => Err(SamplerError::Config(format!("unknown check profile {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConfig {
    pub affinity: AffinityModel,
    pub target: Target,
    pub check: CheckProfile,
    pub trace_capacity: usize,
    pub exec: ExecMode,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            affinity: AffinityModel::Constant(0.5),
            target: Target::Uniform,
            check: CheckProfile::Debug,
            trace_capacity: 1 << 16,
            exec: ExecMode::Parallel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub node: usize,
    pub kind: &'static str,
    pub accepted: bool,
    pub edges: usize,
    pub n_maximal: usize,
    pub max_clique: usize,
}

impl StepRecord {
    pub const HEADER: &'static str = "step\tnode\tmove\taccepted\tedges\tn_maximal\tmax_clique";

    pub fn to_tsv(&self, st: &RepresentationState) -> String {
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.step,
            st.node_label(self.node),
            self.kind,
            u8::from(self.accepted),
            self.edges,
            self.n_maximal,
            self.max_clique
        )
    }
}

#[derive(Debug, Clone)]
pub struct ChainState {
    pub state: RepresentationState,
    pub seed: u64,
    pub step: u64,
    pub trace: VecDeque<StepRecord>,
    pub capacity: usize,
}

impl ChainState {
    pub fn new(state: RepresentationState, seed: u64, capacity: usize) -> Self {
        Self {
            state,
            seed,
            step: 0,
            trace: VecDeque::new(),
            capacity,
        }
    }

    fn push(&mut self, rec: StepRecord) {
        if self.capacity == 0 {
            return;
        }
        if self.trace.len() == self.capacity {
            self.trace.pop_front();
        }
        self.trace.push_back(rec);
    }

    /// State document followed by a `[chain]` section holding the seed and
    /// step counter, which together fix the generator position.
    pub fn checkpoint(&self) -> String {
        let mut out = snapshot(&self.state);
        out.push_str(&format!("[chain]\nseed {}\nstep {}\n", self.seed, self.step));
        out
    }

    pub fn resume(text: &str, capacity: usize) -> Result<Self, SamplerError> {
        let (state, extra) = restore_with_extras(text)?;
        let mut seed = None;
        let mut step = None;
        for (name, lines) in extra {
            if name != "chain" {
                return Err(StateError::Parse {
                    line: lines.first().map_or(0, |l| l.0),
                    msg: format!("unknown section [{name}]"),
                }
                .into());
            }
            for (ln, l) in lines {
                let perr = |msg: String| StateError::Parse { line: ln, msg };
                match l.split_whitespace().collect::<Vec<_>>().as_slice() {
                    ["seed", v] => seed = Some(v.parse().map_err(|_| perr(format!("bad seed {v:?}")))?),
                    ["step", v] => step = Some(v.parse().map_err(|_| perr(format!("bad step {v:?}")))?),
                    _ => return Err(perr(format!("unexpected {l:?} in [chain]")).into()),
                }
            }
        }
        let (Some(seed), Some(step)) = (seed, step) else {
            return Err(SamplerError::Config("checkpoint lacks a [chain] section with seed and step".into()));
        };
        Ok(Self {
            state,
            seed,
            step,
            trace: VecDeque::new(),
            capacity,
        })
    }
}

/// Generator for one step.
pub fn keyed_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Nodes that appear in a membership present in one form and not the other.
/// A move only rewrites memberships containing its own node, so no other
/// node can turn one form into the other.
fn changed_nodes(a: &CanonicalForm, b: &CanonicalForm) -> NodeSet {
    let count = |f: &CanonicalForm| {
        let mut m: BTreeMap<NodeSet, isize> = BTreeMap::new();
        for s in f.maximal.iter().chain(f.subs.iter().map(|x| &x.0)) {
            *m.entry(s.clone()).or_default() += 1;
        }
        m
    };
    let mut diff = count(a);
    for (s, c) in count(b) {
        *diff.entry(s).or_default() -= c;
    }
    diff.into_iter()
        .filter(|(_, c)| *c != 0)
        .fold(NodeSet::new(), |acc, (s, _)| acc.union(&s))
}

/// Probability of proposing a state canonically equal to `to` from `from`.
pub fn proposal_prob(
    from: &RepresentationState,
    to: &CanonicalForm,
    f: &AffinityModel,
    mode: ExecMode,
) -> Result<f64, SamplerError> {
    let n = from.node_count();
    let movers = changed_nodes(&canonical_form(from), to);
    let parts = map_indices(mode, n, |j| -> Result<f64, SamplerError> {
        if !movers.contains(j) {
            return Ok(0.0);
        }
        let spec = enumerate_proposals(from, j, f)?;
        let mut mass = 0.0;
        for (mv, p) in &spec.moves {
            let mut y = from.clone();
            apply_move(&mut y, mv)?;
            if &canonical_form(&y) == to {
                mass += p;
            }
        }
        Ok(mass)
    });
    let mut total = 0.0;
    for p in parts {
        total += p?;
    }
    Ok(total / n as f64)
}

/// Outcome of one step evaluated against a fixed current state.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub node: usize,
    pub mv: Option<Move>,
    pub accepted: bool,
    pub next: Option<RepresentationState>,
}

/// Metropolis–Hastings acceptance probability for moving `x → y`.
pub fn acceptance(
    x: &RepresentationState,
    y: &RepresentationState,
    cfg: &ChainConfig,
) -> Result<f64, SamplerError> {
    let cx = canonical_form(x);
    let cy = canonical_form(y);
    if cx == cy {
        return Ok(1.0);
    }
    let fwd = proposal_prob(x, &cy, &cfg.affinity, cfg.exec)?;
    let rev = proposal_prob(y, &cx, &cfg.affinity, cfg.exec)?;
    if rev == 0.0 {
        return Ok(0.0);
    }
    let log_ratio = cfg.target.log_density(y, &cfg.affinity)? - cfg.target.log_density(x, &cfg.affinity)?;
    if log_ratio == f64::NEG_INFINITY {
        return Ok(0.0);
    }
    Ok((log_ratio.exp() * rev / fwd).min(1.0))
}

/// Evaluates step `step` of the chain seeded by `seed` from state `x`.
pub fn step_outcome(x: &RepresentationState, seed: u64, step: u64, cfg: &ChainConfig) -> Result<StepOutcome, SamplerError> {
    let n = x.node_count();
    if n == 0 {
        return Ok(StepOutcome {
            node: 0,
            mv: None,
            accepted: true,
            next: None,
        });
    }
    let mut rng = keyed_rng(seed, step);
    let node = rng.random_range(0..n);
    let u_move: f64 = rng.random();
    let u_accept: f64 = rng.random();
    let spec = enumerate_proposals(x, node, &cfg.affinity)?;
    let mut acc = 0.0;
    let mut chosen = None;
    for (mv, p) in &spec.moves {
        acc += p;
        if u_move < acc {
            chosen = Some(*mv);
            break;
        }
    }
    let Some(mv) = chosen else {
        return Ok(StepOutcome {
            node,
            mv: None,
            accepted: true,
            next: None,
        });
    };
    let mut y = x.clone();
    apply_move(&mut y, &mv)?;
    let a = acceptance(x, &y, cfg)?;
    let accepted = u_accept < a;
    Ok(StepOutcome {
        node,
        mv: Some(mv),
        accepted,
        next: accepted.then_some(y),
    })
}

fn summary_record(st: &RepresentationState, step: u64, out: &StepOutcome) -> StepRecord {
    let kind = match out.mv.map(|m| m.kind) {
        None => "hold",
        Some(MoveKind::Connect) => "connect",
        Some(MoveKind::Disconnect) => "disconnect",
    };
    StepRecord {
        step,
        node: out.node,
        kind,
        accepted: out.accepted,
        edges: project(st).edge_count(),
        n_maximal: st.maximal_ids().count(),
        max_clique: st.maximal_ids().map(|k| st.members(k).len()).max().unwrap_or(0),
    }
}

fn commit(chain: &mut ChainState, out: StepOutcome, cfg: &ChainConfig) -> Result<StepRecord, SamplerError> {
    let step = chain.step;
    let mv = out.mv;
    if let Some(next) = out.next.clone() {
        chain.state = next;
    }
    chain.step += 1;
    if chain.step.is_multiple_of(cfg.check.period()) {
        check_state(&chain.state).map_err(|report| SamplerError::InvalidState {
            step,
            mv: mv.map_or_else(|| "hold".to_string(), |m| format!("{m:?}")),
            report,
        })?;
    }
    let rec = summary_record(&chain.state, step, &out);
    chain.push(rec.clone());
    Ok(rec)
}

/// Validity plus chordality of the projection.
pub fn check_state(st: &RepresentationState) -> Result<(), String> {
    let rep = verify_clique_dependent(st);
    if !rep.is_valid() {
        return Err(rep.render(st));
    }
    if !is_chordal(&project(st)) {
        return Err("projected graph is not chordal".into());
    }
    Ok(())
}

pub fn mh_step(chain: &mut ChainState, cfg: &ChainConfig) -> Result<StepRecord, SamplerError> {
    let out = step_outcome(&chain.state, chain.seed, chain.step, cfg)?;
    commit(chain, out, cfg)
}

/// Runs `steps` steps, calling `visit` with each record and the state it
/// left. With `window > 1`, up to `window` future steps are evaluated at once
/// against the current state and committed in order up to and including the
/// first accepted move; the result equals sequential execution exactly.
pub fn run_visit(
    chain: &mut ChainState,
    cfg: &ChainConfig,
    steps: u64,
    window: usize,
    visit: &mut dyn FnMut(&StepRecord, &RepresentationState),
) -> Result<(), SamplerError> {
    let end = chain.step + steps;
    if window <= 1 {
        while chain.step < end {
            let rec = mh_step(chain, cfg)?;
            visit(&rec, &chain.state);
        }
        return Ok(());
    }
    let inner = ChainConfig {
        exec: ExecMode::Sequential,
        ..*cfg
    };
    while chain.step < end {
        let w = window.min((end - chain.step) as usize);
        let base = chain.step;
        let outs = map_indices(cfg.exec, w, |k| step_outcome(&chain.state, chain.seed, base + k as u64, &inner));
        for out in outs {
            let out = out?;
            let changed = out.next.is_some();
            let rec = commit(chain, out, cfg)?;
            visit(&rec, &chain.state);
            if changed {
                break;
            }
        }
    }
    Ok(())
}

pub fn run_batched(
    chain: &mut ChainState,
    cfg: &ChainConfig,
    steps: u64,
    window: usize,
) -> Result<Vec<StepRecord>, SamplerError> {
    let mut records = Vec::with_capacity(steps as usize);
    run_visit(chain, cfg, steps, window.max(2), &mut |r, _| records.push(r.clone()))?;
    Ok(records)
}

pub fn run(chain: &mut ChainState, cfg: &ChainConfig, steps: u64) -> Result<Vec<StepRecord>, SamplerError> {
    let mut records = Vec::with_capacity(steps as usize);
    run_visit(chain, cfg, steps, 1, &mut |r, _| records.push(r.clone()))?;
    Ok(records)
}

/// One-step transition probabilities from `x`, grouped by canonical state.
/// Only reachable targets are listed; the self-transition includes hold and
/// rejection mass.
pub fn kernel_row(
    x: &RepresentationState,
    cfg: &ChainConfig,
) -> Result<Vec<(CanonicalForm, RepresentationState, f64)>, SamplerError> {
    let n = x.node_count() as f64;
    let cx = canonical_form(x);
    let mut row: BTreeMap<CanonicalForm, (RepresentationState, f64)> = BTreeMap::new();
    let mut acc_cache: HashMap<CanonicalForm, f64> = HashMap::new();
    let mut stay = 0.0;
    for i in 0..x.node_count() {
        let spec = enumerate_proposals(x, i, &cfg.affinity)?;
        stay += spec.hold / n;
        for (mv, p) in spec.moves {
            let mut y = x.clone();
            apply_move(&mut y, &mv)?;
            let cy = canonical_form(&y);
            if cy == cx {
                stay += p / n;
                continue;
            }
            let a = match acc_cache.get(&cy) {
                Some(a) => *a,
                None => {
                    let a = acceptance(x, &y, cfg)?;
                    acc_cache.insert(cy.clone(), a);
                    a
                }
            };
            stay += p / n * (1.0 - a);
            if a > 0.0 {
                row.entry(cy).or_insert_with(|| (y, 0.0)).1 += p / n * a;
            }
        }
    }
    let mut out: Vec<_> = row.into_iter().map(|(c, (s, p))| (c, s, p)).collect();
    out.push((cx, x.clone(), stay));
    Ok(out)
}

/// Clique-nodes a node's moves may read or write: its induced subtree plus
/// its neighbour set.
pub fn footprint(st: &RepresentationState, i: usize) -> Result<BTreeSet<CliqueNodeId>, SamplerError> {
    let sets = move_sets(st, i)?;
    let sub = induced_subtree(st, i)?;
    Ok(sub.all.into_iter().chain(sets.neighbours()).collect())
}

/// Greedy colouring of nodes by overlapping footprints. Nodes are placed
/// fewest conflicts first (ties by id), each into the first batch it does
/// not overlap.
pub fn independent_batches(st: &RepresentationState) -> Result<Vec<Vec<usize>>, SamplerError> {
    let n = st.node_count();
    let prints: Vec<BTreeSet<CliqueNodeId>> = (0..n).map(|i| footprint(st, i)).collect::<Result<_, _>>()?;
    let conflicts = |a: usize, b: usize| !prints[a].is_disjoint(&prints[b]);
    let degree: Vec<usize> = (0..n).map(|i| (0..n).filter(|&j| j != i && conflicts(i, j)).count()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (degree[i], i));
    let mut batches: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match batches.iter_mut().find(|b| b.iter().all(|&j| !conflicts(i, j))) {
            Some(b) => b.push(i),
            None => batches.push(vec![i]),
        }
    }
    for b in &mut batches {
        b.sort_unstable();
    }
    Ok(batches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bipartite::restore;

    fn worked() -> RepresentationState {
        restore(include_str!("../fixtures/worked.state")).unwrap()
    }

    fn clique(st: &RepresentationState, l: &str, maximal: bool) -> CliqueNodeId {
        st.clique_ids()
            .find(|&k| st.clique_label(k) == l && st.is_maximal(k) == maximal)
            .unwrap()
    }

    #[test]
    fn conditionals_on_worked() {
        let st = worked();
        let f = AffinityModel::Constant(0.3);
        let c = st.node_by_label("C").unwrap();
        let h = st.node_by_label("H").unwrap();
        assert_eq!(conditional_prob(&st, clique(&st, "CDF", true), c, &f).unwrap(), 1.0);
        assert_eq!(conditional_prob(&st, clique(&st, "EF", false), h, &f).unwrap(), 0.3);
        let zero = AffinityModel::Constant(0.0);
        for i in 0..st.node_count() {
            for k in move_sets(&st, i).unwrap().boundary() {
                assert_eq!(conditional_prob(&st, k, i, &zero).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn path_joint_of_i() {
        let st = worked();
        let f = AffinityModel::Constant(0.5);
        let i = st.node_by_label("I").unwrap();
        let q = move_sets(&st, i).unwrap().neighbours().count();
        assert_eq!(q, 2);
        let pj = path_joint(&st, i, &f).unwrap();
        assert!((pj.prob - 0.5f64.powi(2 + q as i32)).abs() < 1e-15);
        assert!((path_joint_exponent_form(&st, i, &f).unwrap() - pj.log).abs() < 1e-12);
        assert_eq!(path_joint(&st, i, &AffinityModel::Constant(1.0)).unwrap().prob, 0.0);

        let mut one = RepresentationState::empty(1);
        one.alloc(NodeSet::singleton(0), true).unwrap();
        assert!((path_joint(&one, 0, &AffinityModel::Constant(0.3)).unwrap().prob - 0.3).abs() < 1e-15);
    }

    #[test]
    fn proposals_for_a() {
        let st = worked();
        let a = st.node_by_label("A").unwrap();
        let spec = enumerate_proposals(&st, a, &AffinityModel::Constant(0.5)).unwrap();
        assert_eq!(spec.moves.len(), 8);
        assert!(spec.moves.iter().all(|m| (m.1 - 1.0 / 9.0).abs() < 1e-15));
        assert_eq!(spec.constrained.len(), 1);
        assert!((spec.hold - 1.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn menu_mass_is_bounded() {
        let st = worked();
        for i in 0..st.node_count() {
            let spec = enumerate_proposals(&st, i, &AffinityModel::Constant(0.5)).unwrap();
            assert!(spec.total() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn parsing() {
        assert_eq!("const:0.25".parse::<AffinityModel>().unwrap(), AffinityModel::Constant(0.25));
        assert_eq!(
            "size:1,-2".parse::<AffinityModel>().unwrap(),
            AffinityModel::SizeLogistic { a: 1.0, b: -2.0 }
        );
        assert!("const:2".parse::<AffinityModel>().is_err());
        assert_eq!("path-joint:0.5".parse::<Target>().unwrap(), Target::PathJoint { penalty: 0.5 });
        assert!("fast".parse::<CheckProfile>().is_ok());
    }

    #[test]
    fn batches_on_worked() {
        let st = worked();
        let batches = independent_batches(&st).unwrap();
        let a = st.node_by_label("A").unwrap();
        let i = st.node_by_label("I").unwrap();
        assert!(batches.iter().any(|b| b.contains(&a) && b.contains(&i)));
        let total: usize = batches.iter().map(Vec::len).sum();
        assert_eq!(total, 9);
    }

    #[test]
    fn complete_graph_has_singleton_batches() {
        let mut st = RepresentationState::empty(4);
        st.alloc((0..4).collect(), true).unwrap();
        assert_eq!(independent_batches(&st).unwrap().len(), 4);
    }

    #[test]
    fn batched_equals_sequential() {
        let cfg = ChainConfig {
            target: Target::PathJoint { penalty: 0.0 },
            ..Default::default()
        };
        let mut a = ChainState::new(worked(), 7, 100);
        let mut b = a.clone();
        let ra = run(&mut a, &cfg, 60).unwrap();
        let rb = run_batched(&mut b, &cfg, 60, 8).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a.state, b.state);
    }

    #[test]
    fn checkpoint_round_trip() {
        let cfg = ChainConfig::default();
        let mut a = ChainState::new(worked(), 3, 10);
        run(&mut a, &cfg, 20).unwrap();
        let mut b = ChainState::resume(&a.checkpoint(), 10).unwrap();
        assert_eq!(b.step, 20);
        run(&mut a, &cfg, 20).unwrap();
        run(&mut b, &cfg, 20).unwrap();
        assert_eq!(snapshot(&a.state), snapshot(&b.state));
        assert_eq!(a.trace.len(), 10);
    }
}
