//! Per-function control flow graphs: lowering from the syntax tree,
//! dominator-based back edges, loop-aware topological order and size
//! statistics.

pub mod graph;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::{emit::expr_to_string, Block, Expr, FunctionDecl, NodeId, Program, Stmt, StmtKind};
pub use graph::Digraph;

pub type BlockId = usize;
pub type BackEdgeSet = BTreeSet<(BlockId, BlockId)>;

#[derive(Debug, Clone, PartialEq)]
pub enum Terminator {
    Goto(BlockId),
    Branch { cond: Expr, on_true: BlockId, on_false: BlockId },
    Return(Option<Expr>),
    /// Control reaches the end of the function body.
    FallOff,
}

/// Straight-line statements: only declarations, assignments, prints and calls.
#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock {
    pub id: BlockId,
    pub stmts: Vec<Stmt>,
    pub term: Terminator,
}

impl BasicBlock {
    pub fn successors(&self) -> Vec<BlockId> {
        match &self.term {
            Terminator::Goto(t) => vec![*t],
            Terminator::Branch { on_true, on_false, .. } => vec![*on_true, *on_false],
            Terminator::Return(_) | Terminator::FallOff => vec![],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Guard {
    Always,
    True(Expr),
    False(Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
    pub guard: Guard,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub function: String,
    pub blocks: Vec<BasicBlock>,
    pub entry: BlockId,
    /// For each `if` statement id: the first block of its then and else arms.
    pub if_arms: BTreeMap<NodeId, (BlockId, Option<BlockId>)>,
    /// For each `while` statement id: its header block.
    pub loop_headers: BTreeMap<NodeId, BlockId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("graph is irreducible: blocks {remaining:?} cannot be ordered after removing back edges")]
pub struct CycleError {
    pub remaining: Vec<BlockId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfgStats {
    pub nodes: usize,
    pub edges: usize,
    pub cyclomatic: i64,
}

impl Cfg {
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for b in &self.blocks {
            match &b.term {
                Terminator::Goto(t) => out.push(Edge { from: b.id, to: *t, guard: Guard::Always }),
                Terminator::Branch { cond, on_true, on_false } => {
                    out.push(Edge { from: b.id, to: *on_true, guard: Guard::True(cond.clone()) });
                    out.push(Edge { from: b.id, to: *on_false, guard: Guard::False(cond.clone()) });
                }
                Terminator::Return(_) | Terminator::FallOff => {}
            }
        }
        out
    }

    pub fn exits(&self) -> BTreeSet<BlockId> {
        self.blocks.iter().filter(|b| b.successors().is_empty()).map(|b| b.id).collect()
    }

    pub fn digraph(&self) -> Digraph {
        let mut g = Digraph::new(self.blocks.len());
        for b in &self.blocks {
            for s in b.successors() {
                g.add_edge(b.id, s);
            }
        }
        g
    }

    pub fn unreachable(&self) -> BTreeSet<BlockId> {
        let reach = self.digraph().reachable(self.entry);
        (0..self.blocks.len()).filter(|&b| !reach[b]).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.blocks.iter().map(|b| b.successors().len()).sum()
    }

    /// Deterministic DOT text: nodes in id order, then one edge per line.
    pub fn to_dot(&self) -> String {
        let unreachable = self.unreachable();
        let mut out = format!("digraph \"{}\" {{\n", self.function);
        for b in &self.blocks {
            let mut label = format!("b{} ({})", b.id, b.stmts.len());
            match &b.term {
                Terminator::Return(_) => label.push_str(" ret"),
                Terminator::FallOff => label.push_str(" end"),
                _ => {}
            }
            let style = if unreachable.contains(&b.id) { ", style=dashed" } else { "" };
            let _ = writeln!(out, "  b{} [label=\"{}\"{}];", b.id, label, style);
        }
        for e in self.edges() {
            let label = match &e.guard {
                Guard::Always => String::new(),
                Guard::True(c) => format!(" [label=\"T: {}\"]", escape(&expr_to_string(c))),
                Guard::False(_) => " [label=\"F\"]".to_string(),
            };
            let _ = writeln!(out, "  b{} -> b{}{};", e.from, e.to, label);
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}

struct Builder {
    blocks: Vec<BasicBlock>,
    closed: Vec<bool>,
    cur: BlockId,
    if_arms: BTreeMap<NodeId, (BlockId, Option<BlockId>)>,
    loop_headers: BTreeMap<NodeId, BlockId>,
}

impl Builder {
    fn new_block(&mut self) -> BlockId {
        let id = self.blocks.len();
        self.blocks.push(BasicBlock { id, stmts: Vec::new(), term: Terminator::FallOff });
        self.closed.push(false);
        id
    }

    /// After a `return` the current block is closed; code that follows lives
    /// in a fresh block with no predecessors.
    fn ensure_open(&mut self) {
        if self.closed[self.cur] {
            self.cur = self.new_block();
        }
    }

    fn finish(&mut self, term: Terminator) {
        let b = self.cur;
        self.blocks[b].term = term;
        self.closed[b] = true;
    }

    /// Close the current block with a jump to `target` unless it already ended.
    fn jump_to(&mut self, target: BlockId) {
        if !self.closed[self.cur] {
            self.finish(Terminator::Goto(target));
        }
    }

    fn lower_block(&mut self, b: &Block) {
        for s in &b.stmts {
            self.lower_stmt(s);
        }
    }

    fn lower_stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::If { cond, then_block, else_block } => {
                self.ensure_open();
                let then_b = self.new_block();
                let else_b = else_block.as_ref().map(|_| self.new_block());
                let join = self.new_block();
                self.if_arms.insert(s.id, (then_b, else_b));
                self.finish(Terminator::Branch { cond: cond.clone(), on_true: then_b, on_false: else_b.unwrap_or(join) });
                self.cur = then_b;
                self.lower_block(then_block);
                self.jump_to(join);
                if let (Some(eb), Some(block)) = (else_b, else_block) {
                    self.cur = eb;
                    self.lower_block(block);
                    self.jump_to(join);
                }
                self.cur = join;
            }
            StmtKind::While { cond, body } => {
                self.ensure_open();
                let header = if self.blocks[self.cur].stmts.is_empty() {
                    self.cur
                } else {
                    let h = self.new_block();
                    self.finish(Terminator::Goto(h));
                    h
                };
                let body_b = self.new_block();
                let exit = self.new_block();
                self.loop_headers.insert(s.id, header);
                self.cur = header;
                self.finish(Terminator::Branch { cond: cond.clone(), on_true: body_b, on_false: exit });
                self.cur = body_b;
                self.lower_block(body);
                self.jump_to(header);
                self.cur = exit;
            }
            StmtKind::Block(b) => self.lower_block(b),
            StmtKind::Return(e) => {
                self.ensure_open();
                self.finish(Terminator::Return(e.clone()));
            }
            StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::Print(_) | StmtKind::Call { .. } => {
                self.ensure_open();
                self.blocks[self.cur].stmts.push(s.clone());
            }
        }
    }
}

pub fn build_cfg(f: &FunctionDecl) -> Cfg {
    let mut b = Builder {
        blocks: Vec::new(),
        closed: Vec::new(),
        cur: 0,
        if_arms: BTreeMap::new(),
        loop_headers: BTreeMap::new(),
    };
    b.cur = b.new_block();
    b.lower_block(&f.body);
    if !b.closed[b.cur] {
        b.finish(Terminator::FallOff);
    }
    Cfg { function: f.name.clone(), blocks: b.blocks, entry: 0, if_arms: b.if_arms, loop_headers: b.loop_headers }
}

/// One graph per function, in declaration order.
pub fn build_program_cfgs(p: &Program) -> Vec<Cfg> {
    p.functions.iter().map(build_cfg).collect()
}

/// Edges (among reachable blocks) whose target dominates their source.
pub fn detect_back_edges(g: &Cfg) -> BackEdgeSet {
    g.digraph().back_edges(g.entry)
}

/// Topological order of the reachable blocks of `g` minus `back`, smallest id first among ready blocks.
pub fn topo_order(g: &Cfg, back: &BackEdgeSet) -> Result<Vec<BlockId>, CycleError> {
    g.digraph().topo_order(g.entry, back).map_err(|remaining| CycleError { remaining })
}

/// Node count, edge count and cyclomatic complexity E - N + 2P, with P the
/// number of weakly connected components (unreachable blocks included).
pub fn cfg_stats(g: &Cfg) -> CfgStats {
    let d = g.digraph();
    let nodes = g.blocks.len();
    let edges = g.edge_count();
    let p = d.component_count();
    CfgStats { nodes, edges, cyclomatic: edges as i64 - nodes as i64 + 2 * p as i64 }
}
