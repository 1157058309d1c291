//! Replace every user-chosen name with a positional one: functions `f*`,
//! parameters `p*`, locals `v*`, globals `g*`. `main` keeps its name.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ast::*;

fn shuffled<T: Clone>(items: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

fn rename_expr(e: &mut Expr, map: &BTreeMap<String, String>) {
    e.walk_mut(&mut |x| match &mut x.kind {
        ExprKind::Var(n) | ExprKind::Index(n, _) | ExprKind::Call(n, _) => {
            if let Some(new) = map.get(n.as_str()) {
                *n = new.clone();
            }
        }
        _ => {}
    });
}

fn rename_block(b: &mut Block, map: &BTreeMap<String, String>) {
    for s in &mut b.stmts {
        match &mut s.kind {
            StmtKind::Decl { name, .. } => {
                if let Some(new) = map.get(name.as_str()) {
                    *name = new.clone();
                }
            }
            StmtKind::Assign { target: LValue::Var(n) | LValue::Index(n, _), .. } | StmtKind::Call { name: n, .. } => {
                if let Some(new) = map.get(n.as_str()) {
                    *n = new.clone();
                }
            }
            _ => {}
        }
        for e in s.own_exprs_mut() {
            rename_expr(e, map);
        }
        for cb in s.child_blocks_mut() {
            rename_block(cb, map);
        }
    }
}

pub fn strip_identifiers(program: &Program, seed: u64) -> Program {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut global_map = BTreeMap::new();

    let globals: Vec<String> = program.globals.iter().map(|g| g.name.clone()).collect();
    for (k, name) in shuffled(&globals, &mut rng).into_iter().enumerate() {
        global_map.insert(name, format!("g{k}"));
    }
    let funcs: Vec<String> = program.functions.iter().map(|f| f.name.clone()).filter(|n| n != "main").collect();
    for (k, name) in shuffled(&funcs, &mut rng).into_iter().enumerate() {
        global_map.insert(name, format!("f{k}"));
    }

    let mut out = program.clone();
    for g in &mut out.globals {
        g.name = global_map[&g.name].clone();
    }
    for f in &mut out.functions {
        let mut map = global_map.clone();
        for (k, p) in shuffled(&f.params, &mut rng).into_iter().enumerate() {
            map.insert(p, format!("p{k}"));
        }
        for (k, l) in shuffled(&f.locals(), &mut rng).into_iter().enumerate() {
            map.insert(l, format!("v{k}"));
        }
        if let Some(new) = map.get(&f.name) {
            f.name = new.clone();
        }
        f.params = f.params.iter().map(|p| map[p].clone()).collect();
        rename_block(&mut f.body, &map);
    }
    out.renumber();
    out
}
