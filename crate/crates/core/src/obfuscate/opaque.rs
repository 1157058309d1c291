//! Bogus control flow: wrap statements in opaque conditionals whose dead arm
//! only writes a fresh local.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::frontend::{BinOp, Block, Expr, GlobalDecl, GlobalKind, NodeId, Program, Span, Stmt, StmtKind};

use super::patterns::{pattern_by_id, pattern_library, Outcome};
use super::{fresh_name, stream_rng, ObfuscateError, Profile, Recipe};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperandGlobal {
    pub name: String,
    pub value: i64,
}

/// One inserted predicate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instantiation {
    pub index: usize,
    pub pattern: String,
    /// Node id of the wrapped statement in the input program.
    pub site: NodeId,
    /// Which way the predicate always goes; the genuine code sits on that arm.
    pub orientation: Outcome,
    pub globals: Vec<OperandGlobal>,
    pub junk: String,
    pub junk_init: i64,
    pub junk_step: i64,
}

fn eligible(s: &Stmt) -> bool {
    matches!(
        s.kind,
        StmtKind::Assign { .. } | StmtKind::Print(_) | StmtKind::Call { .. } | StmtKind::If { .. } | StmtKind::While { .. }
    )
}

/// Statements that may be wrapped, in pre-order over all functions.
/// Declarations (scoping), returns and bare blocks are excluded.
pub fn insertion_sites(p: &Program) -> Vec<NodeId> {
    let mut out = Vec::new();
    p.walk_stmts(&mut |_, s| {
        if eligible(s) {
            out.push(s.id);
        }
    });
    out
}

/// Choose K sites and predicate instances, then apply them.
pub fn insert_opaque(p: &Program, k: usize, profile: Profile, seed: u64) -> Result<(Program, Recipe), ObfuscateError> {
    let mut sites = insertion_sites(p);
    if k > sites.len() {
        return Err(ObfuscateError::InsufficientSites { requested: k, available: sites.len() });
    }
    sites.shuffle(&mut stream_rng(seed, 1, 0));
    let library = pattern_library(profile);
    let mut taken = p.all_names();
    let mut insts = Vec::with_capacity(k);
    for (index, &site) in sites.iter().take(k).enumerate() {
        let mut rng = stream_rng(seed, 2, index as u64);
        let pattern = library[rng.gen_range(0..library.len())];
        let (lo, hi) = pattern.domain.sample_range();
        let globals = ["x", "y"][..pattern.arity]
            .iter()
            .map(|op| OperandGlobal { name: fresh_name(&format!("op{index}{op}"), &mut taken), value: rng.gen_range(lo..hi) })
            .collect();
        insts.push(Instantiation {
            index,
            pattern: pattern.id.to_string(),
            site,
            orientation: pattern.outcome,
            globals,
            junk: fresh_name(&format!("junk{index}"), &mut taken),
            junk_init: rng.gen_range(1..1000),
            junk_step: rng.gen_range(1..1000),
        });
    }
    let out = apply(p, &insts)?;
    let mut recipe = Recipe::empty(super::Mode::Opaque, profile, seed);
    recipe.k = k;
    recipe.instantiations = insts;
    Ok((out, recipe))
}

fn bogus_block(inst: &Instantiation) -> Block {
    let x = Expr::var(&inst.globals[0].name);
    Block::new(vec![
        Stmt::decl(&inst.junk, Some(Expr::int(inst.junk_init))),
        Stmt::assign(
            &inst.junk,
            Expr::binary(BinOp::Add, Expr::binary(BinOp::Mul, Expr::var(&inst.junk), x), Expr::int(inst.junk_step)),
        ),
    ])
}

fn wrap(inst: &Instantiation, genuine: Stmt) -> Result<Stmt, ObfuscateError> {
    let pattern = pattern_by_id(&inst.pattern).ok_or_else(|| ObfuscateError::RecipeMismatch(format!("unknown pattern {}", inst.pattern)))?;
    if inst.globals.len() != pattern.arity {
        return Err(ObfuscateError::RecipeMismatch(format!("pattern {} takes {} operands", pattern.id, pattern.arity)));
    }
    let names: Vec<String> = inst.globals.iter().map(|g| g.name.clone()).collect();
    let cond = pattern.instantiate(&names);
    let real = Block::new(vec![genuine]);
    let (then_block, else_block) = match inst.orientation {
        Outcome::True => (real, bogus_block(inst)),
        Outcome::False => (bogus_block(inst), real),
    };
    Ok(Stmt::new(StmtKind::If { cond, then_block, else_block: Some(else_block) }))
}

fn wrap_block(b: &mut Block, by_site: &BTreeMap<NodeId, &Instantiation>, used: &mut usize) -> Result<(), ObfuscateError> {
    for s in &mut b.stmts {
        for cb in s.child_blocks_mut() {
            wrap_block(cb, by_site, used)?;
        }
        if let Some(inst) = by_site.get(&s.id) {
            if !eligible(s) {
                return Err(ObfuscateError::RecipeMismatch(format!("node {} is not an insertion site", s.id)));
            }
            let genuine = std::mem::replace(s, Stmt::new(StmtKind::Block(Block::default())));
            *s = wrap(inst, genuine)?;
            *used += 1;
        }
    }
    Ok(())
}

/// Apply recorded instantiations to `p`, whose node ids must match the sites.
pub fn apply(p: &Program, insts: &[Instantiation]) -> Result<Program, ObfuscateError> {
    let by_site: BTreeMap<NodeId, &Instantiation> = insts.iter().map(|i| (i.site, i)).collect();
    if by_site.len() != insts.len() {
        return Err(ObfuscateError::RecipeMismatch("two predicates at one site".into()));
    }
    let mut out = p.clone();
    let mut used = 0;
    for f in &mut out.functions {
        wrap_block(&mut f.body, &by_site, &mut used)?;
    }
    if used != insts.len() {
        return Err(ObfuscateError::RecipeMismatch(format!("{} of {} sites found", used, insts.len())));
    }
    for inst in insts {
        for g in &inst.globals {
            if out.all_names().contains(&g.name) {
                return Err(ObfuscateError::RecipeMismatch(format!("{} already bound", g.name)));
            }
            out.globals.push(GlobalDecl { name: g.name.clone(), kind: GlobalKind::Scalar(g.value), span: Span::default() });
        }
    }
    out.renumber();
    Ok(out)
}
