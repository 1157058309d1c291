//! Seeded obfuscating transforms: opaque predicates, control flow
//! flattening and their composition. Every decision is recorded in a
//! [`Recipe`] and transforms are applied from the recipe, so replay is exact.

pub mod flatten;
pub mod opaque;
pub mod patterns;
mod recipe;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cfg::{BlockId, Cfg};
use crate::frontend::{Program, StmtKind};

pub use flatten::{flatten, StateSpec};
pub use opaque::{insert_opaque, Instantiation, OperandGlobal};
pub use patterns::{pattern_by_id, pattern_library, Domain, Outcome, PredicatePattern};
pub use recipe::RecipeParseError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Opaque,
    Cff,
    OpaqueCff,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Opaque, Mode::Cff, Mode::OpaqueCff];

    pub fn uses_opaque(self) -> bool {
        self != Mode::Cff
    }

    pub fn uses_cff(self) -> bool {
        self != Mode::Opaque
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    Limited,
    Diverse,
}

impl Profile {
    pub const ALL: [Profile; 2] = [Profile::Limited, Profile::Diverse];
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Opaque => "opaque",
            Mode::Cff => "cff",
            Mode::OpaqueCff => "opaque-cff",
        })
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Limited => "limited",
            Profile::Diverse => "diverse",
        })
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Mode::ALL.into_iter().find(|m| m.to_string() == s).ok_or_else(|| format!("unknown mode {s:?} (opaque, cff, opaque-cff)"))
    }
}

impl FromStr for Profile {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Profile::ALL.into_iter().find(|p| p.to_string() == s).ok_or_else(|| format!("unknown profile {s:?} (limited, diverse)"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ObfuscateError {
    #[error("only {available} insertion sites available, {requested} requested")]
    InsufficientSites { requested: usize, available: usize },
    #[error("recipe does not fit this program: {0}")]
    RecipeMismatch(String),
}

/// Everything needed to reproduce an obfuscation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub mode: Mode,
    pub profile: Profile,
    #[serde(with = "recipe::seed_format")]
    pub seed: u64,
    pub k: usize,
    pub instantiations: Vec<Instantiation>,
    pub functions: Vec<StateSpec>,
}

impl Recipe {
    pub fn empty(mode: Mode, profile: Profile, seed: u64) -> Self {
        Recipe { mode, profile, seed, k: 0, instantiations: Vec::new(), functions: Vec::new() }
    }
}

/// Independent generator for one decision stream, so that adding more
/// predicates or functions does not disturb earlier choices.
pub(crate) fn stream_rng(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.wrapping_mul(1 << 32).wrapping_add(index));
    rng
}

/// `base`, or `base_N` for the smallest N that is not taken. The result is added to `taken`.
pub(crate) fn fresh_name(base: &str, taken: &mut BTreeSet<String>) -> String {
    let mut name = base.to_string();
    let mut n = 1;
    while taken.contains(&name) {
        name = format!("{base}_{n}");
        n += 1;
    }
    taken.insert(name.clone());
    name
}

/// Plan and apply one obfuscation.
pub fn obfuscate(p: &Program, mode: Mode, profile: Profile, seed: u64, k: usize) -> Result<(Program, Recipe), ObfuscateError> {
    let mut recipe = Recipe::empty(mode, profile, seed);
    let mut out = p.clone();
    if mode.uses_opaque() {
        let (q, r) = insert_opaque(&out, k, profile, seed)?;
        out = q;
        recipe.k = r.k;
        recipe.instantiations = r.instantiations;
    }
    if mode.uses_cff() {
        let (q, r) = flatten(&out, profile, seed);
        out = q;
        recipe.functions = r.functions;
    }
    Ok((out, recipe))
}

/// Re-apply a recorded recipe without consulting any random source.
pub fn replay(p: &Program, recipe: &Recipe) -> Result<Program, ObfuscateError> {
    let mut out = p.clone();
    if !recipe.instantiations.is_empty() {
        out = opaque::apply(&out, &recipe.instantiations)?;
    }
    if !recipe.functions.is_empty() {
        out = flatten::apply(&out, &recipe.functions)?;
    }
    Ok(out)
}

/// Blocks holding the bogus code of each instantiation, as `(function, block)`
/// in instantiation order. A bogus block is the one that initializes the
/// instantiation's junk local.
pub fn bogus_blocks(cfgs: &[Cfg], recipe: &Recipe) -> Vec<(String, BlockId)> {
    let mut out = Vec::new();
    for inst in &recipe.instantiations {
        for c in cfgs {
            for b in &c.blocks {
                let hit = b.stmts.iter().any(|s| match &s.kind {
                    StmtKind::Decl { name, init: Some(_) } => *name == inst.junk,
                    StmtKind::Assign { target, value } => target.name() == inst.junk && !value.mentions(&inst.junk),
                    _ => false,
                });
                if hit {
                    out.push((c.function.clone(), b.id));
                }
            }
        }
    }
    out
}
