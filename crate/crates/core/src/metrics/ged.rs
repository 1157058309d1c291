//! Unlabeled graph edit distance with unit node and edge costs.
//!
//! Substituting one node for another is free, so an optimal edit path maps
//! every node of the smaller graph into the larger one: deleting a node while
//! a spare node is inserted costs 2 and never saves an edge edit. The search
//! therefore runs over injections and derives the edit script from the best one.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use serde::Serialize;

use crate::cfg::Digraph;

/// Largest combined node count searched exactly.
pub const DEFAULT_BUDGET: usize = 24;
/// Expansions allowed when only testing graphs over the budget for isomorphism.
const ISOMORPHISM_EXPANSIONS: usize = 200_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Exactness {
    Exact,
    UpperBound,
}

impl fmt::Display for Exactness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Exactness::Exact => "exact",
            Exactness::UpperBound => "upper-bound",
        })
    }
}

/// Node indices refer to the first graph for deletions and the second for insertions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EditOp {
    DeleteNode(usize),
    InsertNode(usize),
    DeleteEdge(usize, usize),
    InsertEdge(usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GedResult {
    pub cost: u64,
    pub exactness: Exactness,
    pub script: Vec<EditOp>,
}

/// Adjacency as bit rows; parallel edges collapse.
#[derive(Debug, Clone)]
struct Bits {
    rows: Vec<u128>,
    edges: Vec<(usize, usize)>,
}

impl Bits {
    fn new(g: &Digraph) -> Self {
        assert!(g.len() <= 128, "graphs above 128 nodes are not supported");
        let mut rows = vec![0u128; g.len()];
        for (u, ss) in g.succ.iter().enumerate() {
            for &v in ss {
                rows[u] |= 1 << v;
            }
        }
        let n = g.len();
        let edges = (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|&(u, v)| rows[u] >> v & 1 == 1).collect();
        Bits { rows, edges }
    }

    fn len(&self) -> usize {
        self.rows.len()
    }

    fn has(&self, u: usize, v: usize) -> bool {
        self.rows[u] >> v & 1 == 1
    }
}

/// Number of distinct edges, the quantity GED counts.
pub fn edge_set_size(g: &Digraph) -> usize {
    Bits::new(g).edges.len()
}

/// Edit script turning `a` into `b` for an injection `map` from `a` into `b`.
fn script_for(a: &Bits, b: &Bits, map: &[usize]) -> Vec<EditOp> {
    let mut image = vec![None; b.len()];
    for (u, &v) in map.iter().enumerate() {
        image[v] = Some(u);
    }
    let mut ops: Vec<EditOp> = (0..b.len()).filter(|&v| image[v].is_none()).map(EditOp::InsertNode).collect();
    for &(u, v) in &a.edges {
        if !b.has(map[u], map[v]) {
            ops.push(EditOp::DeleteEdge(u, v));
        }
    }
    for &(x, y) in &b.edges {
        let covered = matches!((image[x], image[y]), (Some(u), Some(v)) if a.has(u, v));
        if !covered {
            ops.push(EditOp::InsertEdge(x, y));
        }
    }
    ops
}

fn mirror(op: EditOp) -> EditOp {
    match op {
        EditOp::DeleteNode(u) => EditOp::InsertNode(u),
        EditOp::InsertNode(u) => EditOp::DeleteNode(u),
        EditOp::DeleteEdge(u, v) => EditOp::InsertEdge(u, v),
        EditOp::InsertEdge(u, v) => EditOp::DeleteEdge(u, v),
    }
}

/// Injection from degree matching: an upper bound, often tight on near-isomorphic CFGs.
fn assignment_map(a: &Bits, b: &Bits) -> Vec<usize> {
    if a.len() == 0 {
        return vec![];
    }
    let deg = |g: &Bits, u: usize| {
        let out = g.rows[u].count_ones() as i64;
        let inn = (0..g.len()).filter(|&w| g.has(w, u)).count() as i64;
        (out, inn, g.has(u, u))
    };
    let weights: Vec<Vec<i64>> = (0..a.len())
        .map(|u| {
            let (o1, i1, s1) = deg(a, u);
            (0..b.len())
                .map(|v| {
                    let (o2, i2, s2) = deg(b, v);
                    -((o1 - o2).abs() + (i1 - i2).abs() + i64::from(s1 != s2))
                })
                .collect()
        })
        .collect();
    let m = Matrix::from_rows(weights).expect("rectangular");
    kuhn_munkres(&m).1
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
struct State {
    f: u64,
    depth: Reverse<usize>,
    g: u64,
    map: Vec<u8>,
    used: u128,
}

/// A* over injections of `a` into `b` (`a` no larger). Nodes of `a` are
/// assigned in `order`. States not cheaper than `bound` are pruned; returns
/// `None` when nothing beats it or the expansion limit runs out.
fn astar(a: &Bits, b: &Bits, bound: u64, limit: Option<usize>) -> Option<(u64, Vec<usize>)> {
    let n1 = a.len();
    let order = search_order(a);
    let fixed = (b.len() - n1) as u64;
    // edges with an endpoint outside the first k assigned nodes
    let mut rest1 = vec![0u64; n1 + 1];
    for (k, r) in rest1.iter_mut().enumerate() {
        let mut done = 0u128;
        for &u in &order[..k] {
            done |= 1 << u;
        }
        *r = a.edges.iter().filter(|&&(u, v)| done >> u & 1 == 0 || done >> v & 1 == 0).count() as u64;
    }
    let rest2 = |used: u128| b.edges.iter().filter(|&&(x, y)| used >> x & 1 == 0 || used >> y & 1 == 0).count() as u64;

    let mut heap = BinaryHeap::new();
    let h0 = rest1[0].abs_diff(b.edges.len() as u64);
    heap.push(Reverse(State { f: fixed + h0, depth: Reverse(0), g: fixed, map: vec![], used: 0 }));
    let mut expansions = 0usize;
    while let Some(Reverse(s)) = heap.pop() {
        if s.f >= bound {
            return None;
        }
        let k = s.map.len();
        if k == n1 {
            let map: Vec<usize> = {
                let mut m = vec![0; n1];
                for (i, &v) in s.map.iter().enumerate() {
                    m[order[i]] = v as usize;
                }
                m
            };
            return Some((s.f, map));
        }
        expansions += 1;
        if limit.is_some_and(|l| expansions > l) {
            return None;
        }
        let u = order[k];
        for v in 0..b.len() {
            if s.used >> v & 1 == 1 {
                continue;
            }
            let mut g = s.g + u64::from(a.has(u, u) != b.has(v, v));
            for (j, &w) in s.map.iter().enumerate() {
                let (uj, w) = (order[j], w as usize);
                g += u64::from(a.has(u, uj) != b.has(v, w));
                g += u64::from(a.has(uj, u) != b.has(w, v));
            }
            let used = s.used | 1 << v;
            let f = if k + 1 == n1 { g + rest2(used) } else { g + rest1[k + 1].abs_diff(rest2(used)) };
            if f < bound {
                let mut map = s.map.clone();
                map.push(v as u8);
                heap.push(Reverse(State { f, depth: Reverse(k + 1), g, map, used }));
            }
        }
    }
    None
}

/// Breadth-first from node 0, highest degree first among the rest, so early
/// assignments constrain each other.
fn search_order(a: &Bits) -> Vec<usize> {
    let n = a.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    let degree = |u: usize| a.rows[u].count_ones() as usize + (0..n).filter(|&w| a.has(w, u)).count();
    while order.len() < n {
        let start = (0..n).filter(|&u| !seen[u]).max_by_key(|&u| (u == 0, degree(u), Reverse(u))).expect("unseen node");
        let mut queue = std::collections::VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for v in 0..n {
                if !seen[v] && (a.has(u, v) || a.has(v, u)) {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
    }
    order
}

/// Graph edit distance. Exact when the graphs together have at most `budget`
/// nodes; otherwise exact only if they turn out isomorphic, else the cost of a
/// degree-matching assignment flagged as an upper bound.
pub fn ged(g1: &Digraph, g2: &Digraph, budget: usize) -> GedResult {
    let (b1, b2) = (Bits::new(g1), Bits::new(g2));
    let swapped = b1.len() > b2.len();
    let (a, b) = if swapped { (&b2, &b1) } else { (&b1, &b2) };

    let upper = assignment_map(a, b);
    let upper_cost = script_for(a, b, &upper).len() as u64;
    let (map, exactness) = if upper_cost == 0 {
        (upper, Exactness::Exact)
    } else if a.len() + b.len() <= budget {
        match astar(a, b, upper_cost, None) {
            Some((_, m)) => (m, Exactness::Exact),
            None => (upper, Exactness::Exact),
        }
    } else if a.len() == b.len() && a.edges.len() == b.edges.len() {
        match astar(a, b, 1, Some(ISOMORPHISM_EXPANSIONS)) {
            Some((_, m)) => (m, Exactness::Exact),
            None => (upper, Exactness::UpperBound),
        }
    } else {
        (upper, Exactness::UpperBound)
    };
    let mut script = script_for(a, b, &map);
    if swapped {
        script = script.into_iter().map(mirror).collect();
    }
    GedResult { cost: script.len() as u64, exactness, script }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn graph(n: usize, edges: &[(usize, usize)]) -> Digraph {
        let mut g = Digraph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v);
        }
        g
    }

    #[test]
    fn isomorphic_paths() {
        let r = ged(&graph(3, &[(0, 1), (1, 2)]), &graph(3, &[(2, 0), (0, 1)]), DEFAULT_BUDGET);
        assert_eq!((r.cost, r.exactness), (0, Exactness::Exact));
    }

    #[test]
    fn path3_vs_path4() {
        let r = ged(&graph(3, &[(0, 1), (1, 2)]), &graph(4, &[(0, 1), (1, 2), (2, 3)]), DEFAULT_BUDGET);
        assert_eq!(r.cost, 2);
        assert_eq!(r.script.iter().filter(|o| matches!(o, EditOp::InsertNode(_))).count(), 1);
    }

    #[test]
    fn edge_vs_single_node_is_symmetric() {
        let (a, b) = (graph(2, &[(0, 1)]), graph(1, &[]));
        let (x, y) = (ged(&a, &b, DEFAULT_BUDGET), ged(&b, &a, DEFAULT_BUDGET));
        assert_eq!((x.cost, y.cost), (2, 2));
        assert!(x.script.contains(&EditOp::DeleteNode(1)) || x.script.contains(&EditOp::DeleteNode(0)));
    }

    #[test]
    fn parallel_edges_collapse() {
        assert_eq!(edge_set_size(&graph(2, &[(0, 1), (0, 1)])), 1);
    }

    #[test]
    fn over_budget_isomorphic_cycles_are_exact() {
        let ring = |n: usize, shift: usize| graph(n, &(0..n).map(|i| ((i + shift) % n, (i + shift + 1) % n)).collect::<Vec<_>>());
        let r = ged(&ring(20, 0), &ring(20, 7), DEFAULT_BUDGET);
        assert_eq!((r.cost, r.exactness), (0, Exactness::Exact));
    }

    #[test]
    fn over_budget_distinct_graphs_are_bounded() {
        let path = |n: usize| graph(n, &(0..n - 1).map(|i| (i, i + 1)).collect::<Vec<_>>());
        let r = ged(&path(15), &path(16), DEFAULT_BUDGET);
        assert_eq!(r.exactness, Exactness::UpperBound);
        assert!(r.cost >= 2);
    }
}
