//! Control flow flattening: every reachable basic block becomes one arm of a
//! dispatcher loop that switches on a fresh state variable.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cfg::{build_cfg, BlockId, Terminator};
use crate::frontend::{BinOp, Block, Expr, FunctionDecl, Program, RetType, Stmt, StmtKind};

use super::{fresh_name, stream_rng, ObfuscateError, Profile, Recipe};

/// Dispatcher layout for one function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateSpec {
    pub function: String,
    pub state_var: String,
    /// Holds the return value until the dispatcher exits; absent for void functions.
    pub ret_var: Option<String>,
    pub initial: i64,
    pub exit: i64,
    /// Reachable blocks of the function's graph, ascending.
    pub blocks: Vec<BlockId>,
    /// State label of `blocks[i]`.
    pub labels: Vec<i64>,
    /// Arm emission order as indices into `blocks`.
    pub arm_order: Vec<usize>,
}

fn reachable_blocks(f: &FunctionDecl) -> Vec<BlockId> {
    let cfg = build_cfg(f);
    let reach = cfg.digraph().reachable(cfg.entry);
    (0..cfg.blocks.len()).filter(|&b| reach[b]).collect()
}

fn plan(p: &Program, fi: usize, profile: Profile, seed: u64) -> Option<StateSpec> {
    let f = &p.functions[fi];
    let blocks = reachable_blocks(f);
    if blocks.len() < 2 {
        return None;
    }
    let mut taken: BTreeSet<String> = p.globals.iter().map(|g| g.name.clone()).collect();
    taken.extend(p.functions.iter().map(|f| f.name.clone()));
    taken.extend(f.params.iter().cloned());
    taken.extend(f.locals());
    let state_var = fresh_name("cff_state", &mut taken);
    let ret_var = (f.ret == RetType::Int).then(|| fresh_name("cff_ret", &mut taken));
    let n = blocks.len();
    let (labels, exit, arm_order) = match profile {
        Profile::Limited => ((0..n as i64).collect::<Vec<_>>(), n as i64, (0..n).collect::<Vec<_>>()),
        Profile::Diverse => {
            let mut rng = stream_rng(seed, 3, fi as u64);
            let mut seen = BTreeSet::new();
            let mut drawn = Vec::with_capacity(n + 1);
            while drawn.len() <= n {
                let v: i64 = rng.gen_range(0..1 << 31);
                if seen.insert(v) {
                    drawn.push(v);
                }
            }
            let exit = drawn.pop().expect("n + 1 labels");
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            (drawn, exit, order)
        }
    };
    let initial = labels[blocks.iter().position(|&b| b == 0).expect("entry is reachable")];
    Some(StateSpec { function: f.name.clone(), state_var, ret_var, initial, exit, blocks, labels, arm_order })
}

/// Flatten every function with at least two reachable blocks.
pub fn flatten(p: &Program, profile: Profile, seed: u64) -> (Program, Recipe) {
    let specs: Vec<StateSpec> = (0..p.functions.len()).filter_map(|fi| plan(p, fi, profile, seed)).collect();
    let out = apply(p, &specs).expect("fresh plan fits its own program");
    let mut recipe = Recipe::empty(super::Mode::Cff, profile, seed);
    recipe.functions = specs;
    (out, recipe)
}

fn set_state(var: &str, label: i64) -> Stmt {
    Stmt::assign(var, Expr::int(label))
}

fn undeclare(s: &Stmt) -> Stmt {
    match &s.kind {
        StmtKind::Decl { name, init } => Stmt::assign(name, init.clone().unwrap_or_else(|| Expr::int(0))),
        _ => s.clone(),
    }
}

fn flatten_function(f: &FunctionDecl, spec: &StateSpec) -> Result<FunctionDecl, ObfuscateError> {
    let cfg = build_cfg(f);
    if reachable_blocks(f) != spec.blocks {
        return Err(ObfuscateError::RecipeMismatch(format!("block layout of {} differs", f.name)));
    }
    let n = spec.blocks.len();
    let mut sorted_order = spec.arm_order.clone();
    sorted_order.sort_unstable();
    if spec.labels.len() != n || sorted_order != (0..n).collect::<Vec<_>>() {
        return Err(ObfuscateError::RecipeMismatch(format!("label table of {} is malformed", f.name)));
    }
    let label: BTreeMap<BlockId, i64> = spec.blocks.iter().copied().zip(spec.labels.iter().copied()).collect();
    let sigma = spec.state_var.as_str();

    let mut arms = Vec::with_capacity(n);
    for &i in &spec.arm_order {
        let block = &cfg.blocks[spec.blocks[i]];
        let mut stmts: Vec<Stmt> = block.stmts.iter().map(undeclare).collect();
        match &block.term {
            Terminator::Goto(t) => stmts.push(set_state(sigma, label[t])),
            Terminator::Branch { cond, on_true, on_false } => stmts.push(Stmt::new(StmtKind::If {
                cond: cond.clone(),
                then_block: Block::new(vec![set_state(sigma, label[on_true])]),
                else_block: Some(Block::new(vec![set_state(sigma, label[on_false])])),
            })),
            Terminator::Return(value) => {
                if let (Some(rv), Some(e)) = (&spec.ret_var, value) {
                    stmts.push(Stmt::assign(rv, e.clone()));
                }
                stmts.push(set_state(sigma, spec.exit));
            }
            Terminator::FallOff => stmts.push(set_state(sigma, spec.exit)),
        }
        arms.push((spec.labels[i], Block::new(stmts)));
    }

    let mut chain: Option<Block> = None;
    for (l, body) in arms.into_iter().rev() {
        let test = Expr::binary(BinOp::Eq, Expr::var(sigma), Expr::int(l));
        let arm = Stmt::new(StmtKind::If { cond: test, then_block: body, else_block: chain.take() });
        chain = Some(Block::new(vec![arm]));
    }

    let mut body: Vec<Stmt> = f.locals().into_iter().map(|l| Stmt::decl(l, None)).collect();
    body.push(Stmt::decl(sigma, Some(Expr::int(spec.initial))));
    if let Some(rv) = &spec.ret_var {
        body.push(Stmt::decl(rv, Some(Expr::int(0))));
    }
    body.push(Stmt::new(StmtKind::While {
        cond: Expr::binary(BinOp::Ne, Expr::var(sigma), Expr::int(spec.exit)),
        body: chain.unwrap_or_default(),
    }));
    if let Some(rv) = &spec.ret_var {
        body.push(Stmt::new(StmtKind::Return(Some(Expr::var(rv)))));
    }
    Ok(FunctionDecl { body: Block::new(body), ..f.clone() })
}

/// Apply recorded dispatcher layouts.
pub fn apply(p: &Program, specs: &[StateSpec]) -> Result<Program, ObfuscateError> {
    let mut out = p.clone();
    for spec in specs {
        let f = out
            .functions
            .iter_mut()
            .find(|f| f.name == spec.function)
            .ok_or_else(|| ObfuscateError::RecipeMismatch(format!("no function {}", spec.function)))?;
        *f = flatten_function(f, spec)?;
    }
    out.renumber();
    Ok(out)
}
