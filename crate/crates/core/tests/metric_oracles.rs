use std::collections::{BTreeMap, BTreeSet};

use deob_core::cfg::Digraph;
use deob_core::metrics::{bleu, bleu_text, ged, srs_graphs, EditOp, Exactness, DEFAULT_BUDGET};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Edges = BTreeSet<(usize, usize)>;

fn edge_set(g: &Digraph) -> Edges {
    g.succ.iter().enumerate().flat_map(|(u, ss)| ss.iter().map(move |&v| (u, v))).collect()
}

/// Every edit path corresponds to a partial matching of nodes; try them all.
fn brute_force_ged(g1: &Digraph, g2: &Digraph) -> u64 {
    let (e1, e2) = (edge_set(g1), edge_set(g2));
    let mut best = u64::MAX;
    let mut map: Vec<Option<usize>> = Vec::new();
    let mut used = vec![false; g2.len()];
    fn go(u: usize, g1: &Digraph, g2: &Digraph, e1: &Edges, e2: &Edges, map: &mut Vec<Option<usize>>, used: &mut Vec<bool>, best: &mut u64) {
        if u == g1.len() {
            let deleted = map.iter().filter(|m| m.is_none()).count();
            let mapped = map.len() - deleted;
            let inserted = g2.len() - mapped;
            let kept = e1
                .iter()
                .filter(|&&(a, b)| matches!((map[a], map[b]), (Some(x), Some(y)) if e2.contains(&(x, y))))
                .count();
            let cost = deleted + inserted + (e1.len() - kept) + (e2.len() - kept);
            *best = (*best).min(cost as u64);
            return;
        }
        map.push(None);
        go(u + 1, g1, g2, e1, e2, map, used, best);
        map.pop();
        for v in 0..g2.len() {
            if !used[v] {
                used[v] = true;
                map.push(Some(v));
                go(u + 1, g1, g2, e1, e2, map, used, best);
                map.pop();
                used[v] = false;
            }
        }
    }
    go(0, g1, g2, &e1, &e2, &mut map, &mut used, &mut best);
    best
}

fn isomorphic(g1: &Digraph, g2: &Digraph) -> bool {
    let (e1, e2) = (edge_set(g1), edge_set(g2));
    if g1.len() != g2.len() || e1.len() != e2.len() {
        return false;
    }
    let n = g1.len();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        if e1.iter().all(|&(a, b)| e2.contains(&(perm[a], perm[b]))) {
            return true;
        }
        // next lexicographic permutation
        let Some(i) = (0..n.saturating_sub(1)).rev().find(|&i| perm[i] < perm[i + 1]) else { return false };
        let j = (i + 1..n).rev().find(|&j| perm[j] > perm[i]).unwrap();
        perm.swap(i, j);
        perm[i + 1..].reverse();
    }
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Digraph {
    let density: f64 = rng.gen_range(0.0..0.7);
    let mut g = Digraph::new(n);
    for u in 0..n {
        for v in 0..n {
            if rng.gen_bool(density) {
                g.add_edge(u, v);
            }
        }
    }
    g
}

fn graph(n: usize, edges: &[(usize, usize)]) -> Digraph {
    let mut g = Digraph::new(n);
    for &(u, v) in edges {
        g.add_edge(u, v);
    }
    g
}

#[test]
fn oracle_examples() {
    let p3 = graph(3, &[(0, 1), (1, 2)]);
    let p4 = graph(4, &[(0, 1), (1, 2), (2, 3)]);
    assert_eq!(brute_force_ged(&p3, &p4), 2);
    assert_eq!(brute_force_ged(&graph(2, &[(0, 1)]), &graph(1, &[])), 2);
    assert_eq!(brute_force_ged(&p3, &graph(3, &[(2, 1), (1, 0)])), 0);
}

#[test]
fn astar_matches_brute_force_on_200_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6ed);
    let mut mismatches = Vec::new();
    for _ in 0..200 {
        let n1 = rng.gen_range(1..=7);
        let n2 = rng.gen_range(1..=8 - n1);
        let (a, b) = (random_graph(&mut rng, n1), random_graph(&mut rng, n2));
        let r = ged(&a, &b, DEFAULT_BUDGET);
        assert_eq!(r.exactness, Exactness::Exact);
        let expected = brute_force_ged(&a, &b);
        if r.cost != expected {
            mismatches.push((a, b, r.cost, expected));
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:?}");
}

#[test]
fn bleu_brevity_example_is_frozen() {
    let v = bleu_text("a b c d", "a b c d e");
    assert!((v - 0.778_800_783_071_404_9).abs() < 1e-12, "{v}");
}

/// Second BLEU built on joined-string n-gram counts.
fn reference_bleu(cand: &[String], refr: &[String]) -> f64 {
    if cand.is_empty() || refr.is_empty() {
        return 0.0;
    }
    let grams = |t: &[String], n: usize| {
        let mut m: BTreeMap<String, i64> = BTreeMap::new();
        for i in 0..t.len().saturating_sub(n - 1) {
            *m.entry(t[i..i + n].join("\u{1}")).or_default() += 1;
        }
        m
    };
    let orders = 4.min(cand.len()).min(refr.len());
    let mut logs = 0.0;
    for n in 1..=orders {
        let (c, r) = (grams(cand, n), grams(refr, n));
        let total: i64 = c.values().sum();
        let hit: i64 = c.iter().map(|(g, k)| (*k).min(*r.get(g).unwrap_or(&0))).sum();
        logs += if hit == 0 { 1e-9f64.ln() } else { (hit as f64 / total as f64).ln() };
    }
    let (c, r) = (cand.len() as f64, refr.len() as f64);
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * (logs / orders as f64).exp()
}

fn small_graph() -> impl Strategy<Value = Digraph> {
    (1usize..=6).prop_flat_map(|n| {
        proptest::collection::vec((0..n, 0..n), 0..=n * 2).prop_map(move |es| graph(n, &es))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn ged_is_symmetric_and_zero_iff_isomorphic(a in small_graph(), b in small_graph()) {
        let (x, y) = (ged(&a, &b, DEFAULT_BUDGET), ged(&b, &a, DEFAULT_BUDGET));
        prop_assert_eq!(x.cost, y.cost);
        prop_assert_eq!(x.cost == 0, isomorphic(&a, &b));
    }

    #[test]
    fn edit_script_accounts_for_sizes(a in small_graph(), b in small_graph()) {
        let r = ged(&a, &b, DEFAULT_BUDGET);
        prop_assert_eq!(r.script.len() as u64, r.cost);
        let count = |f: fn(&EditOp) -> bool| r.script.iter().filter(|o| f(o)).count() as i64;
        let nodes = a.len() as i64 - count(|o| matches!(o, EditOp::DeleteNode(_))) + count(|o| matches!(o, EditOp::InsertNode(_)));
        let edges = edge_set(&a).len() as i64 - count(|o| matches!(o, EditOp::DeleteEdge(..))) + count(|o| matches!(o, EditOp::InsertEdge(..)));
        prop_assert_eq!((nodes, edges), (b.len() as i64, edge_set(&b).len() as i64));
    }

    #[test]
    fn bounded_mode_never_undercuts_exact(a in small_graph(), b in small_graph()) {
        let exact = srs_graphs(&a, &b, DEFAULT_BUDGET);
        let approx = srs_graphs(&a, &b, 0);
        prop_assert!(approx.ged >= exact.ged);
        prop_assert!(approx.srs <= exact.srs);
        prop_assert!((0.0..=1.0).contains(&exact.srs));
    }

    #[test]
    fn bleu_agrees_with_reference(c in proptest::collection::vec("[a-c]", 0..9), r in proptest::collection::vec("[a-c]", 0..9)) {
        let (cs, rs): (Vec<&str>, Vec<&str>) = (c.iter().map(String::as_str).collect(), r.iter().map(String::as_str).collect());
        let v = bleu(&cs, &rs);
        prop_assert!((v - reference_bleu(&c, &r)).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&v));
        if !c.is_empty() {
            prop_assert_eq!(bleu(&cs, &cs), 1.0);
        }
    }
}
