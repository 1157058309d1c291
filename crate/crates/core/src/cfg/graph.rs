//! Index-based digraph algorithms shared by control flow graphs and
//! recovered state graphs.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

/// Adjacency lists over nodes `0..n`. Parallel edges are kept as given.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Digraph {
    pub succ: Vec<Vec<usize>>,
}

impl Digraph {
    pub fn new(n: usize) -> Self {
        Digraph { succ: vec![Vec::new(); n] }
    }

    pub fn len(&self) -> usize {
        self.succ.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succ.is_empty()
    }

    pub fn add_edge(&mut self, from: usize, to: usize) {
        self.succ[from].push(to);
    }

    pub fn preds(&self) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); self.len()];
        for (u, ss) in self.succ.iter().enumerate() {
            for &v in ss {
                p[v].push(u);
            }
        }
        p
    }

    pub fn reachable(&self, entry: usize) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        let mut stack = vec![entry];
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u], true) {
                continue;
            }
            stack.extend(self.succ[u].iter().copied().filter(|&v| !seen[v]));
        }
        seen
    }

    fn reverse_postorder(&self, entry: usize) -> Vec<usize> {
        let mut seen = vec![false; self.len()];
        let mut post = Vec::with_capacity(self.len());
        let mut stack = vec![(entry, 0usize)];
        seen[entry] = true;
        while let Some((u, i)) = stack.pop() {
            if i < self.succ[u].len() {
                stack.push((u, i + 1));
                let v = self.succ[u][i];
                if !seen[v] {
                    seen[v] = true;
                    stack.push((v, 0));
                }
            } else {
                post.push(u);
            }
        }
        post.reverse();
        post
    }

    /// Immediate dominators (Cooper, Harvey and Kennedy). `None` for the
    /// entry and for unreachable nodes.
    pub fn immediate_dominators(&self, entry: usize) -> Vec<Option<usize>> {
        let rpo = self.reverse_postorder(entry);
        let mut order = vec![usize::MAX; self.len()];
        for (k, &u) in rpo.iter().enumerate() {
            order[u] = k;
        }
        let preds = self.preds();
        let mut idom: Vec<Option<usize>> = vec![None; self.len()];
        idom[entry] = Some(entry);
        let mut changed = true;
        while changed {
            changed = false;
            for &u in rpo.iter().skip(1) {
                let mut new: Option<usize> = None;
                for &p in &preds[u] {
                    if idom[p].is_none() {
                        continue;
                    }
                    new = Some(match new {
                        None => p,
                        Some(mut a) => {
                            let mut b = p;
                            while a != b {
                                while order[a] > order[b] {
                                    a = idom[a].expect("processed");
                                }
                                while order[b] > order[a] {
                                    b = idom[b].expect("processed");
                                }
                            }
                            a
                        }
                    });
                }
                if new.is_some() && idom[u] != new {
                    idom[u] = new;
                    changed = true;
                }
            }
        }
        idom[entry] = None;
        idom
    }

    /// Does `a` dominate `b`? Both must be reachable.
    pub fn dominates(idom: &[Option<usize>], entry: usize, a: usize, b: usize) -> bool {
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            if cur == entry {
                return false;
            }
            match idom[cur] {
                Some(d) => cur = d,
                None => return false,
            }
        }
    }

    /// Edges whose target dominates their source, restricted to reachable nodes.
    pub fn back_edges(&self, entry: usize) -> BTreeSet<(usize, usize)> {
        let idom = self.immediate_dominators(entry);
        let reach = self.reachable(entry);
        let mut out = BTreeSet::new();
        for (u, ss) in self.succ.iter().enumerate() {
            if !reach[u] {
                continue;
            }
            for &v in ss {
                if Self::dominates(&idom, entry, v, u) {
                    out.insert((u, v));
                }
            }
        }
        out
    }

    /// Kahn's algorithm over nodes reachable from `entry`, ignoring `skip`
    /// edges. Ready nodes are taken smallest index first. `Err` carries the
    /// nodes that could not be ordered (on or behind a cycle).
    pub fn topo_order(&self, entry: usize, skip: &BTreeSet<(usize, usize)>) -> Result<Vec<usize>, Vec<usize>> {
        let reach = self.reachable(entry);
        let mut indeg = vec![0usize; self.len()];
        for (u, ss) in self.succ.iter().enumerate() {
            if !reach[u] {
                continue;
            }
            for &v in ss {
                if !skip.contains(&(u, v)) {
                    indeg[v] += 1;
                }
            }
        }
        let mut heap: BinaryHeap<Reverse<usize>> =
            (0..self.len()).filter(|&u| reach[u] && indeg[u] == 0).map(Reverse).collect();
        let mut order = Vec::new();
        while let Some(Reverse(u)) = heap.pop() {
            order.push(u);
            for &v in &self.succ[u] {
                if skip.contains(&(u, v)) {
                    continue;
                }
                indeg[v] -= 1;
                if indeg[v] == 0 {
                    heap.push(Reverse(v));
                }
            }
        }
        let total = reach.iter().filter(|&&r| r).count();
        if order.len() == total {
            Ok(order)
        } else {
            Err((0..self.len()).filter(|&u| reach[u] && indeg[u] > 0).collect())
        }
    }

    /// Weakly connected components.
    pub fn component_count(&self) -> usize {
        let mut parent: Vec<usize> = (0..self.len()).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            let mut c = x;
            while p[c] != r {
                let next = p[c];
                p[c] = r;
                c = next;
            }
            r
        }
        for (u, ss) in self.succ.iter().enumerate() {
            for &v in ss {
                let (a, b) = (find(&mut parent, u), find(&mut parent, v));
                if a != b {
                    parent[a] = b;
                }
            }
        }
        (0..self.len()).filter(|&u| find(&mut parent, u) == u).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(n: usize, edges: &[(usize, usize)]) -> Digraph {
        let mut g = Digraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn diamond_dominators() {
        let g = graph(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]);
        let idom = g.immediate_dominators(0);
        assert_eq!(idom, vec![None, Some(0), Some(0), Some(0)]);
        assert!(g.back_edges(0).is_empty());
    }

    #[test]
    fn irreducible_has_no_back_edges_but_a_cycle() {
        // 0 -> 1, 0 -> 2, 1 <-> 2
        let g = graph(3, &[(0, 1), (0, 2), (1, 2), (2, 1)]);
        let back = g.back_edges(0);
        assert!(back.is_empty());
        assert!(g.topo_order(0, &back).is_err());
    }

    #[test]
    fn components() {
        let g = graph(4, &[(0, 1)]);
        assert_eq!(g.component_count(), 3);
    }
}
