use std::collections::BTreeSet;

use cliquedep::bipartite::{
    canonical_form, from_graph, induced_subtree, project, restore, snapshot, verify_clique_dependent,
};
use cliquedep::graph::{
    build_junction_tree, is_chordal, maximal_cliques_chordal, mcs_peo, pair_index, verify_rip, UndirectedGraph,
};
use cliquedep::moves::{apply_move, disconnect_table, maximal_components, node_moves, table_records, MoveKind};
use cliquedep::oracle::{random_state, reference_chordality};
use cliquedep::sampler::{enumerate_proposals, independent_batches, kernel_row, AffinityModel, ChainConfig, Target};
use cliquedep::{NodeSet, RepresentationState};
use proptest::prelude::*;

fn graph() -> impl Strategy<Value = UndirectedGraph> {
    (1usize..=8).prop_flat_map(|n| {
        let pairs = pair_index(n).count() as u32;
        any::<u64>().prop_map(move |m| UndirectedGraph::from_edge_mask(n, if pairs == 64 { m } else { m & ((1 << pairs) - 1) }))
    })
}

fn chordal_graph() -> impl Strategy<Value = UndirectedGraph> {
    state(8).prop_map(|st| {
        let mut g = UndirectedGraph::new(st.node_count());
        for (u, v) in project(&st).edges() {
            g.add_edge(u, v).unwrap();
        }
        g
    })
}

fn state(max_n: usize) -> impl Strategy<Value = RepresentationState> {
    (2usize..=max_n, 0usize..80, any::<u64>()).prop_map(|(n, steps, seed)| random_state(n, steps, seed).unwrap())
}

fn weight(_: &NodeSet, _: usize) -> f64 {
    0.5
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn mcs_matches_reference(g in graph()) {
        prop_assert_eq!(mcs_peo(&g).is_ok(), reference_chordality(&g).unwrap());
    }

    #[test]
    fn cliques_reconstruct_edges(g in chordal_graph()) {
        let peo = mcs_peo(&g).unwrap();
        let cs = maximal_cliques_chordal(&g, &peo).unwrap();
        let mut rebuilt = UndirectedGraph::new(g.node_count());
        for c in &cs.cliques {
            let m = c.to_vec();
            for (x, &u) in m.iter().enumerate() {
                for &v in &m[x + 1..] {
                    rebuilt.add_edge(u, v).unwrap();
                }
            }
        }
        prop_assert_eq!(rebuilt.edge_mask(), g.edge_mask());
        for a in &cs.cliques {
            for b in &cs.cliques {
                prop_assert!(a == b || !a.is_subset(b));
            }
        }
        prop_assert_eq!(cs.separators.len(), cs.cliques.len() - g.components().len());
        prop_assert!(verify_rip(&build_junction_tree(&cs.sorted_cliques())).holds);
    }

    #[test]
    fn from_graph_round_trips(g in chordal_graph()) {
        let st = from_graph(&g).unwrap();
        prop_assert!(verify_clique_dependent(&st).is_valid());
        prop_assert_eq!(project(&st).edge_mask(), g.edge_mask());
    }

    #[test]
    fn random_states_are_valid(st in state(7)) {
        let rep = verify_clique_dependent(&st);
        prop_assert!(rep.is_valid(), "{}", rep.render(&st));
        prop_assert!(is_chordal(&project(&st)));
    }

    #[test]
    fn snapshot_round_trips(st in state(7)) {
        let text = snapshot(&st);
        let back = restore(&text).unwrap();
        prop_assert_eq!(snapshot(&back), text);
        prop_assert_eq!(back, st);
    }

    #[test]
    fn induced_maximal_part_is_connected_per_component(st in state(7)) {
        let comps = maximal_components(&st);
        for i in 0..st.node_count() {
            let sub = induced_subtree(&st, i).unwrap();
            let touched: BTreeSet<_> = sub.maximal.iter().map(|k| comps[k]).collect();
            prop_assert_eq!(sub.maximal_components(), touched.len());
        }
    }

    #[test]
    fn sub_cliques_are_transparent(st in state(7)) {
        let masks: BTreeSet<_> = st.maximal_ids().map(|k| st.members(k).clone()).collect();
        let mut g = UndirectedGraph::new(st.node_count());
        for m in masks {
            let v = m.to_vec();
            for (x, &a) in v.iter().enumerate() {
                for &b in &v[x + 1..] {
                    g.add_edge(a, b).unwrap();
                }
            }
        }
        prop_assert_eq!(g.edge_mask(), project(&st).edge_mask());
    }

    #[test]
    fn moves_are_sound_and_invertible(st in state(6)) {
        let base_form = canonical_form(&st);
        for i in 0..st.node_count() {
            let (_, moves) = node_moves(&st, i, &weight).unwrap();
            for mv in moves {
                let mut post = st.clone();
                let edit = apply_move(&mut post, &mv).unwrap();
                let rep = verify_clique_dependent(&post);
                prop_assert!(rep.is_valid(), "{}: {}", mv.describe(&st), rep.render(&post));
                let g = project(&post);
                prop_assert!(is_chordal(&g));
                let before = project(&st);
                for (u, v) in pair_index(st.node_count()) {
                    if g.has_edge(u, v) != before.has_edge(u, v) {
                        prop_assert!(u == i || v == i, "{} changed edge {u}-{v}", mv.describe(&st));
                    }
                }
                let sub_only = match mv.kind {
                    MoveKind::Disconnect => !st.is_maximal(mv.target),
                    MoveKind::Connect => !st.is_maximal(mv.target) && st.parents(mv.target).any(|p| st.contains(p, i)),
                };
                if sub_only {
                    prop_assert_eq!(g.edge_mask(), before.edge_mask(), "{}", mv.describe(&st));
                }
                edit.inverse().apply(&mut post);
                prop_assert_eq!(canonical_form(&post), base_form.clone());
            }
        }
    }

    #[test]
    fn proposal_mass_is_bounded(st in state(7), p in 0.0f64..=1.0) {
        let f = AffinityModel::Constant(p);
        for i in 0..st.node_count() {
            let spec = enumerate_proposals(&st, i, &f).unwrap();
            prop_assert!(spec.total() <= 1.0 + 1e-12);
            prop_assert!((spec.total() + spec.hold - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn table_is_relabelling_equivariant(st in state(6), rot in 1usize..5) {
        let n = st.node_count();
        let names: Vec<String> = (0..n).map(|x| format!("n{x}")).collect();
        let mut a = st.clone();
        let mut b = st.clone();
        for x in 0..n {
            a.set_label(x, &format!("tmp{x}")).unwrap();
            b.set_label(x, &format!("tmp{x}")).unwrap();
        }
        for x in 0..n {
            a.set_label(x, &names[x]).unwrap();
            b.set_label(x, &names[(x + rot) % n]).unwrap();
        }
        let ra = table_records(&a, &disconnect_table(&a));
        let rb = table_records(&b, &disconnect_table(&b));
        let rename_one = |s: &str| -> String {
            match s.strip_prefix('n').and_then(|x| x.parse::<usize>().ok()) {
                Some(x) => names[(x + rot) % n].clone(),
                None => s.to_string(),
            }
        };
        let rename = |s: &str| s.split(',').map(rename_one).collect::<Vec<_>>().join(",");
        let rename_all = |v: &[String]| {
            let mut v: Vec<String> = v.iter().map(|s| rename(s)).collect();
            v.sort();
            v
        };
        let sorted = |v: &[String]| {
            let mut v = v.to_vec();
            v.sort();
            v
        };
        let mut mapped: Vec<_> = ra
            .iter()
            .map(|r| (rename(&r.node), rename(&r.clique), rename_all(&r.separators), rename_all(&r.candidates)))
            .collect();
        let mut got: Vec<_> = rb
            .iter()
            .map(|r| (r.node.clone(), r.clique.clone(), sorted(&r.separators), sorted(&r.candidates)))
            .collect();
        mapped.sort();
        got.sort();
        prop_assert_eq!(mapped, got);
    }

    #[test]
    fn batches_have_disjoint_footprints_and_commute(st in state(6), pick in any::<u64>()) {
        let batches = independent_batches(&st).unwrap();
        let mut covered: Vec<usize> = batches.iter().flatten().copied().collect();
        covered.sort_unstable();
        prop_assert_eq!(covered, (0..st.node_count()).collect::<Vec<_>>());
        for batch in batches.iter().filter(|b| b.len() > 1) {
            let chosen: Vec<_> = batch
                .iter()
                .filter_map(|&i| {
                    let (_, moves) = node_moves(&st, i, &weight).unwrap();
                    (!moves.is_empty()).then(|| moves[(pick as usize + i) % moves.len()])
                })
                .collect();
            let mut fwd = st.clone();
            for mv in &chosen {
                apply_move(&mut fwd, mv).unwrap();
            }
            let mut rev = st.clone();
            for mv in chosen.iter().rev() {
                apply_move(&mut rev, mv).unwrap();
            }
            prop_assert!(verify_clique_dependent(&fwd).is_valid());
            prop_assert_eq!(canonical_form(&fwd), canonical_form(&rev));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn kernel_rows_are_distributions(st in state(4), p in 0.05f64..0.95) {
        let cfg = ChainConfig {
            affinity: AffinityModel::Constant(p),
            target: Target::PathJoint { penalty: 0.3 },
            ..Default::default()
        };
        let row = kernel_row(&st, &cfg).unwrap();
        let total: f64 = row.iter().map(|r| r.2).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
        prop_assert!(row.iter().all(|r| r.2 >= -1e-15));
    }
}
