use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgGroup, Parser, Subcommand, ValueEnum};

use cliquedep::bipartite::{from_graph, project, restore, snapshot, to_dot, verify_clique_dependent};
use cliquedep::graph::{is_chordal, mcs_peo, UndirectedGraph};
use cliquedep::moves::{
    apply_move, differential_report, disconnect_table, move_sets, render_table, table_records, Move,
};
use cliquedep::oracle::enumerate_decomposable;
use cliquedep::par::ExecMode;
use cliquedep::sampler::{
    run_visit, AffinityModel, ChainConfig, ChainState, CheckProfile, SamplerError, StepRecord, Target,
};
use cliquedep::{CliqueNodeId, RepresentationState};

#[derive(Parser)]
#[command(version, about = "Clique-dependent representations of decomposable graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a state file; exit 1 if it is not a valid clique-dependent state.
    Validate { state: PathBuf },
    /// Print every (node, maximal clique) disconnect with its separators and
    /// promotion candidates.
    Table {
        state: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Apply one connect or disconnect and print the resulting state.
    #[command(group(ArgGroup::new("kind").required(true).args(["connect", "disconnect"])))]
    Move {
        state: PathBuf,
        /// Node label or index.
        #[arg(long)]
        node: String,
        /// Clique-node label (e.g. `ABCD`) or id (`slot` or `slot@generation`).
        #[arg(long)]
        target: String,
        #[arg(long)]
        connect: bool,
        #[arg(long)]
        disconnect: bool,
        /// Sub-clique to promote when disconnecting from a maximal clique.
        #[arg(long)]
        promote: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the Metropolis–Hastings chain.
    Sample(SampleArgs),
    /// Export a state.
    #[command(group(ArgGroup::new("format").required(true).args(["dot", "edges"])))]
    Export {
        state: PathBuf,
        #[arg(long)]
        dot: bool,
        /// Edge list of the projected graph.
        #[arg(long)]
        edges: bool,
    },
    /// Compare tree-conditioned and membership-only move sets as JSON.
    Differential { state: PathBuf },
    /// List every decomposable graph on n ≤ 5 nodes as edge masks.
    Census {
        #[arg(long)]
        n: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Exec {
    Sequential,
    Parallel,
}

#[derive(clap::Args)]
struct SampleArgs {
    /// State file, edge list with `--edges`, or checkpoint with `--resume`.
    input: PathBuf,
    #[arg(long, conflicts_with = "resume")]
    edges: bool,
    #[arg(long)]
    resume: bool,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    /// `const:<p>` or `size:<a>,<b>`.
    #[arg(long, default_value = "const:0.5")]
    f: String,
    /// `uniform`, `path-joint` or `path-joint:<penalty>`.
    #[arg(long, default_value = "path-joint")]
    target: String,
    /// `debug` checks every step, `fast` every 100.
    #[arg(long, env = "CLIQUEDEP_CHECK", default_value = "debug")]
    check: String,
    /// Tab-separated trace, one line per step.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Final state plus seed and step counter.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Exec::Parallel)]
    exec: Exec,
    /// Steps evaluated speculatively per batch.
    #[arg(long, default_value_t = 1)]
    window: usize,
}

enum Failure {
    Invalid(String),
    Parse(String),
    Impermissible(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Parse(_) => 2,
            Failure::Impermissible(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Parse(m) | Failure::Impermissible(m) => m,
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<RepresentationState, Failure> {
    let text = read(path)?;
    if text.trim().is_empty() {
        return Err(Failure::Parse(format!("{}: empty state file", path.display())));
    }
    restore(&text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display())))
}

fn write_out(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Parse(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn validity(st: &RepresentationState) -> Result<(), String> {
    let rep = verify_clique_dependent(st);
    if !rep.is_valid() {
        return Err(rep.render(st));
    }
    if let Err(e) = mcs_peo(&project(st)) {
        return Err(format!("projected graph is not decomposable: {e}\n"));
    }
    Ok(())
}

fn cmd_validate(path: &Path) -> CmdResult {
    let st = load(path)?;
    validity(&st).map_err(Failure::Invalid)?;
    let g = project(&st);
    println!(
        "valid: {} nodes, {} edges, {} maximal cliques, {} sub-cliques",
        st.node_count(),
        g.edge_count(),
        st.maximal_ids().count(),
        st.sub_ids().count()
    );
    Ok(())
}

fn load_valid(path: &Path) -> Result<RepresentationState, Failure> {
    let st = load(path)?;
    validity(&st).map_err(Failure::Invalid)?;
    Ok(st)
}

fn cmd_table(path: &Path, json: bool) -> CmdResult {
    let st = load_valid(path)?;
    let rows = disconnect_table(&st);
    if json {
        println!("{}", serde_json::to_string_pretty(&table_records(&st, &rows)).expect("serialisable"));
    } else {
        print!("{}", render_table(&st, &rows));
    }
    Ok(())
}

/// Resolves a clique-node token. Labels matching several clique-nodes pick
/// by flag (`maximal` first when asked, sub-cliques first otherwise), then
/// the lowest id.
fn resolve_clique(st: &RepresentationState, token: &str, maximal: bool) -> Result<CliqueNodeId, Failure> {
    let by_id = || -> Option<CliqueNodeId> {
        let (slot, generation) = match token.split_once('@') {
            Some((s, g)) => (s.parse().ok()?, Some(g.parse::<u32>().ok()?)),
            None => (token.parse().ok()?, None),
        };
        let id = st.id_at(slot)?;
        generation.is_none_or(|g| g == id.generation).then_some(id)
    };
    if let Some(id) = by_id() {
        return Ok(id);
    }
    st.clique_ids()
        .filter(|&k| st.clique_label(k) == token)
        .min_by_key(|&k| (st.is_maximal(k) != maximal, k))
        .ok_or_else(|| Failure::Parse(format!("no clique-node {token:?}")))
}

fn cmd_move(
    path: &Path,
    node: &str,
    target: &str,
    connect: bool,
    promote: Option<&str>,
    out: Option<&Path>,
) -> CmdResult {
    let mut st = load_valid(path)?;
    let i = st
        .resolve_node(node)
        .ok_or_else(|| Failure::Parse(format!("no node {node:?}")))?;
    let s = resolve_clique(&st, target, true)?;
    let promotion = promote.map(|p| resolve_clique(&st, p, false)).transpose()?;
    if connect && promotion.is_some() {
        return Err(Failure::Parse("--promote only applies to --disconnect".into()));
    }
    let mv = if connect {
        Move::connect(i, s)
    } else {
        Move::disconnect(i, s, promotion)
    };
    let sets = move_sets(&st, i).map_err(|e| Failure::Parse(e.to_string()))?;
    let (name, l) = (st.node_label(i), st.clique_label(s));
    let listed = if connect {
        sets.nei_max.contains(&s) || sets.nei_sub.contains(&s)
    } else {
        sets.bd_max.contains(&s) || sets.bd_sub.contains(&s)
    };
    let before = st.clone();
    let edit = apply_move(&mut st, &mv).map_err(|e| Failure::Impermissible(e.to_string()))?;
    if !listed {
        let set = if connect { "neighbour set" } else { "boundary set" };
        return Err(Failure::Impermissible(format!("{l} is not in the {set} of {name}")));
    }
    validity(&st).map_err(Failure::Invalid)?;
    let mut text = format!("# {}\n", mv.describe(&before));
    for line in edit.render(&st).lines() {
        text.push_str(&format!("# {line}\n"));
    }
    text.push_str(&snapshot(&st));
    write_out(out, &text)
}

fn parse_cfg(args: &SampleArgs) -> Result<ChainConfig, Failure> {
    let cfg_err = |e: SamplerError| Failure::Parse(e.to_string());
    Ok(ChainConfig {
        affinity: args.f.parse::<AffinityModel>().map_err(cfg_err)?,
        target: args.target.parse::<Target>().map_err(cfg_err)?,
        check: args.check.parse::<CheckProfile>().map_err(cfg_err)?,
        trace_capacity: 0,
        exec: match args.exec {
            Exec::Sequential => ExecMode::Sequential,
            Exec::Parallel => ExecMode::Parallel,
        },
    })
}

fn cmd_sample(args: &SampleArgs) -> CmdResult {
    let cfg = parse_cfg(args)?;
    let mut chain = if args.resume {
        let text = read(&args.input)?;
        ChainState::resume(&text, 0).map_err(|e| Failure::Parse(format!("{}: {e}", args.input.display())))?
    } else if args.edges {
        let g = UndirectedGraph::parse_edge_list(&read(&args.input)?)
            .map_err(|e| Failure::Parse(format!("{}: {e}", args.input.display())))?;
        if !is_chordal(&g) {
            return Err(Failure::Invalid(format!("{}: graph is not decomposable", args.input.display())));
        }
        ChainState::new(from_graph(&g).expect("chordal"), args.seed, 0)
    } else {
        ChainState::new(load(&args.input)?, args.seed, 0)
    };
    validity(&chain.state).map_err(Failure::Invalid)?;

    let mut trace = match &args.trace {
        Some(p) => {
            let f = fs::File::create(p).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?;
            let mut w = BufWriter::new(f);
            writeln!(w, "{}", StepRecord::HEADER).map_err(io_err)?;
            Some(w)
        }
        None => None,
    };
    let mut accepted = 0u64;
    let mut holds = 0u64;
    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    let mut graphs: HashSet<Vec<(usize, usize)>> = HashSet::from([project(&chain.state).edges().collect()]);
    let mut trajectory = Vec::new();
    let mut written: io::Result<()> = Ok(());
    let stride = (args.steps / 10).max(1);
    let mut done = 0;
    while done < args.steps {
        let chunk = stride.min(args.steps - done);
        run_visit(&mut chain, &cfg, chunk, args.window, &mut |r, st| {
            if r.kind == "hold" {
                holds += 1;
            } else if r.accepted {
                accepted += 1;
                graphs.insert(project(st).edges().collect());
            }
            *histogram.entry(r.max_clique).or_default() += 1;
            if let (Some(w), Ok(())) = (trace.as_mut(), &written) {
                written = writeln!(w, "{}", r.to_tsv(st));
            }
        })
        .map_err(|e| Failure::Invalid(e.to_string()))?;
        std::mem::replace(&mut written, Ok(())).map_err(io_err)?;
        done += chunk;
        trajectory.push(chain.state.maximal_ids().count());
    }
    if let Some(mut w) = trace {
        w.flush().map_err(io_err)?;
    }
    if let Some(p) = &args.checkpoint {
        fs::write(p, chain.checkpoint()).map_err(|e| Failure::Parse(format!("{}: {e}", p.display())))?;
    }

    let proposed = args.steps - holds;
    let rate = if proposed == 0 { 0.0 } else { accepted as f64 / proposed as f64 };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let _ = writeln!(out, "steps {}", args.steps);
    let _ = writeln!(out, "final step {}", chain.step);
    let _ = writeln!(out, "proposed {proposed}");
    let _ = writeln!(out, "accepted {accepted}");
    let _ = writeln!(out, "acceptance rate {rate:.4}");
    let _ = writeln!(out, "final edges {}", project(&chain.state).edge_count());
    let _ = writeln!(out, "distinct graphs visited {}", graphs.len());
    let hist: Vec<String> = histogram.iter().map(|(k, v)| format!("{k}:{v}")).collect();
    let _ = writeln!(out, "max clique size histogram {}", hist.join(" "));
    let traj: Vec<String> = trajectory.iter().map(usize::to_string).collect();
    let _ = writeln!(out, "maximal clique count trajectory {}", traj.join(" "));
    Ok(())
}

fn io_err(e: io::Error) -> Failure {
    Failure::Parse(e.to_string())
}

fn cmd_export(path: &Path, dot: bool) -> CmdResult {
    let st = load(path)?;
    if dot {
        print!("{}", to_dot(&st));
    } else {
        print!("{}", project(&st).to_edge_list());
    }
    Ok(())
}

fn cmd_differential(path: &Path) -> CmdResult {
    let st = load_valid(path)?;
    let report = differential_report(&st).map_err(|e| Failure::Invalid(e.to_string()))?;
    println!("{}", serde_json::to_string_pretty(&report).expect("serialisable"));
    Ok(())
}

fn cmd_census(n: usize) -> CmdResult {
    let census = enumerate_decomposable(n, ExecMode::Parallel).map_err(|e| Failure::Parse(e.to_string()))?;
    print!("{}", census.to_text());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate { state } => cmd_validate(state),
        Command::Table { state, json } => cmd_table(state, *json),
        Command::Move {
            state,
            node,
            target,
            connect,
            disconnect: _,
            promote,
            out,
        } => cmd_move(state, node, target, *connect, promote.as_deref(), out.as_deref()),
        Command::Sample(args) => cmd_sample(args),
        Command::Export { state, dot, edges: _ } => cmd_export(state, *dot),
        Command::Differential { state } => cmd_differential(state),
        Command::Census { n } => cmd_census(*n),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let msg = f.message();
            eprint!("error: {msg}");
            if !msg.ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(f.code())
        }
    }
}
