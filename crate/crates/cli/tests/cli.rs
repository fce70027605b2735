use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cliquedep::bipartite::{canonical_form, restore};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cliquedep"))
        .args(args)
        .env_remove("CLIQUEDEP_CHECK")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_exit_codes() {
    let worked = fixture("worked.state");
    assert_eq!(cli(&["validate", path(&worked)]).status.code(), Some(0));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.state");
    let text = fs::read_to_string(&worked).unwrap().replace("1 max C D F", "1 sub C D F");
    fs::write(&bad, text).unwrap();
    let o = cli(&["validate", path(&bad)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("maximal clique CDF is not flagged"));

    let empty = dir.path().join("empty.state");
    fs::write(&empty, "").unwrap();
    assert_eq!(cli(&["validate", path(&empty)]).status.code(), Some(2));

    let garbled = dir.path().join("garbled.state");
    fs::write(&garbled, "[nodes]\ncount x\n").unwrap();
    let o = cli(&["validate", path(&garbled)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"));
}

#[test]
fn table_matches_fixture() {
    let o = cli(&["table", path(&fixture("worked.state"))]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), fs::read_to_string(fixture("disconnect_table.txt")).unwrap());
}

#[test]
fn triangle_table() {
    let dir = tempfile::tempdir().unwrap();
    let tri = dir.path().join("tri.state");
    fs::write(&tri, "[nodes]\ncount 3\n0 X\n1 Y\n2 Z\n[clique_nodes]\n0 max 0 1 2\n[t_edges]\n").unwrap();
    let o = cli(&["table", path(&tri)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.contains("{∅}")));
}

#[test]
fn move_reproduces_worked_transitions() {
    let dir = tempfile::tempdir().unwrap();
    let worked = fixture("worked.state");
    let cases: [(&[&str], &str); 2] = [
        (&["--node", "H", "--target", "EF", "--connect"], "connect_h_ef.state"),
        (&["--node", "C", "--target", "ABCD", "--disconnect", "--promote", "ACD"], "disconnect_c_abcd.state"),
    ];
    for (flags, expected) in cases {
        let out = dir.path().join(expected);
        let mut args = vec!["move", path(&worked)];
        args.extend_from_slice(flags);
        args.extend_from_slice(&["--out", path(&out)]);
        let o = cli(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let got = restore(&fs::read_to_string(&out).unwrap()).unwrap();
        let want = restore(&fs::read_to_string(fixture(expected)).unwrap()).unwrap();
        assert_eq!(canonical_form(&got), canonical_form(&want), "{expected}");
        assert_eq!(cli(&["validate", path(&out)]).status.code(), Some(0));
    }
}

#[test]
fn post_connect_table_has_efh() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("connect_h_ef.state");
    let o = cli(&["move", path(&fixture("worked.state")), "--node", "H", "--target", "EF", "--connect", "--out", path(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let table = stdout(&cli(&["table", path(&out)]));
    assert!(table.lines().any(|l| l.split_whitespace().take(2).eq(["H", "EFH"])));
}

#[test]
fn interior_disconnect_is_refused() {
    let o = cli(&["move", path(&fixture("worked.state")), "--node", "C", "--target", "CDF", "--disconnect"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("not a leaf of the induced clique subtree"));
    let o = cli(&["move", path(&fixture("worked.state")), "--node", "A", "--target", "HI", "--connect"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn export_dot() {
    let o = cli(&["export", path(&fixture("worked.state")), "--dot"]);
    let dot = stdout(&o);
    assert_eq!(dot.matches("color=red, style=solid").count(), 5);
    assert_eq!(dot.lines().filter(|l| l.contains("shape=ellipse") && l.contains("style=dashed")).count(), 10);

    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.state");
    fs::write(&empty, "[nodes]\ncount 0\n").unwrap();
    assert_eq!(stdout(&cli(&["export", path(&empty), "--dot"])), "graph T {\n}\n");
}

#[test]
fn sampling_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let worked = fixture("worked.state");
    let run = |name: &str, extra: &[&str]| {
        let trace = dir.path().join(name);
        let mut args = vec!["sample", path(&worked), "--trace", path(&trace), "--seed", "1", "--steps", "1000", "--check", "fast"];
        args.extend_from_slice(extra);
        let o = cli(&args);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(trace).unwrap()
    };
    let a = run("a.tsv", &[]);
    let b = run("b.tsv", &[]);
    let c = run("c.tsv", &["--window", "8", "--exec", "sequential"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1001);
}

#[test]
fn zero_steps_keeps_state() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, ckpt) = (dir.path().join("t.tsv"), dir.path().join("c.state"));
    let worked = fixture("worked.state");
    let o = cli(&["sample", path(&worked), "--steps", "0", "--trace", path(&trace), "--checkpoint", path(&ckpt)]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 1);
    let text = fs::read_to_string(&ckpt).unwrap();
    let state_part = text.split("[chain]").next().unwrap();
    assert_eq!(state_part, fs::read_to_string(&worked).unwrap());
}

#[test]
fn resume_continues_the_chain() {
    let dir = tempfile::tempdir().unwrap();
    let worked = fixture("worked.state");
    let (c1, c2, full) = (dir.path().join("c1"), dir.path().join("c2"), dir.path().join("full"));
    let base = ["--seed", "5", "--check", "fast"];
    let mut a = vec!["sample", path(&worked), "--steps", "300", "--checkpoint", path(&c1)];
    a.extend_from_slice(&base);
    assert_eq!(cli(&a).status.code(), Some(0));
    let mut b = vec!["sample", path(&c1), "--resume", "--steps", "300", "--checkpoint", path(&c2)];
    b.extend_from_slice(&base);
    assert_eq!(cli(&b).status.code(), Some(0));
    let mut f = vec!["sample", path(&worked), "--steps", "600", "--checkpoint", path(&full)];
    f.extend_from_slice(&base);
    assert_eq!(cli(&f).status.code(), Some(0));
    assert_eq!(fs::read_to_string(c2).unwrap(), fs::read_to_string(full).unwrap());
}

#[test]
fn four_node_chain_visits_the_census() {
    let dir = tempfile::tempdir().unwrap();
    let edges = dir.path().join("empty.edges");
    fs::write(&edges, "node 0 A\nnode 1 B\nnode 2 C\nnode 3 D\n").unwrap();
    let census = stdout(&cli(&["census", "--n", "4"]));
    let expected: usize = census.lines().nth(1).unwrap().strip_prefix("count ").unwrap().parse().unwrap();
    let o = cli(&[
        "sample", path(&edges), "--edges", "--steps", "100000", "--target", "uniform", "--seed", "11", "--exec",
        "sequential",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    let visited: usize = out
        .lines()
        .find_map(|l| l.strip_prefix("distinct graphs visited "))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(visited, expected);
}

#[test]
fn bad_config_is_rejected() {
    let o = cli(&["sample", path(&fixture("worked.state")), "--f", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    let o = cli(&["census", "--n", "6"]);
    assert_eq!(o.status.code(), Some(2));
}
