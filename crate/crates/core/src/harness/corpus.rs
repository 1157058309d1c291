//! Benchmark programs with embedded inputs and golden outputs.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::cfg::{build_cfg, cfg_stats};
use crate::frontend::{parse_source, FrontendError, Program};
use crate::interp::{run, DEFAULT_STEP_LIMIT};
use crate::obfuscate::opaque::insertion_sites;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Group {
    Group1,
    Group2,
}

impl Group {
    pub const ALL: [Group; 2] = [Group::Group1, Group::Group2];

    pub fn dir(self) -> &'static str {
        match self {
            Group::Group1 => "group1",
            Group::Group2 => "group2",
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.dir())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusProgram {
    pub name: String,
    pub group: Group,
    pub source: String,
    pub program: Program,
    pub golden: String,
}

impl CorpusProgram {
    /// Sum of per-function cyclomatic complexity.
    pub fn cyclomatic(&self) -> i64 {
        self.program.functions.iter().map(|f| cfg_stats(&build_cfg(f)).cyclomatic).sum()
    }

    pub fn insertion_sites(&self) -> usize {
        insertion_sites(&self.program).len()
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{name}: {source}")]
    Parse { name: String, source: FrontendError },
    #[error("{name}: golden output missing")]
    MissingGolden { name: String },
    #[error("corpus check failed: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    /// Group 1 first, names ascending within a group.
    pub programs: Vec<CorpusProgram>,
}

macro_rules! embedded {
    ($($group:ident / $name:literal),* $(,)?) => {
        &[$((
            Group::$group,
            $name,
            include_str!(concat!("../../corpus/", embedded!(@dir $group), "/", $name, ".src")),
            include_str!(concat!("../../corpus/", embedded!(@dir $group), "/", $name, ".out")),
        )),*]
    };
    (@dir Group1) => { "group1" };
    (@dir Group2) => { "group2" };
}

const EMBEDDED: &[(Group, &str, &str, &str)] = embedded![
    Group1 / "bfs",
    Group1 / "binary_search",
    Group1 / "dfs",
    Group1 / "dijkstra",
    Group1 / "heap_sort",
    Group1 / "knapsack",
    Group1 / "matrix_mult",
    Group1 / "merge_sort",
    Group1 / "quick_sort",
    Group2 / "avl",
    Group2 / "huffman",
    Group2 / "nqueens",
];

fn entry(group: Group, name: &str, source: String, golden: String) -> Result<CorpusProgram, CorpusError> {
    let program = parse_source(&source).map_err(|source| CorpusError::Parse { name: name.to_string(), source })?;
    Ok(CorpusProgram { name: name.to_string(), group, source, program, golden })
}

impl Corpus {
    /// The twelve benchmarks compiled into the library.
    pub fn builtin() -> Self {
        let programs = EMBEDDED
            .iter()
            .map(|&(g, name, src, out)| entry(g, name, src.to_string(), out.to_string()).expect("embedded corpus parses"))
            .collect();
        Corpus { programs }
    }

    /// Load `group1/*.src` and `group2/*.src` with `*.out` goldens beside them.
    pub fn load(dir: &Path) -> Result<Self, CorpusError> {
        let mut programs = Vec::new();
        for group in Group::ALL {
            let gdir = dir.join(group.dir());
            let mut paths: Vec<PathBuf> = fs::read_dir(&gdir)
                .map_err(|source| CorpusError::Io { path: gdir.clone(), source })?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "src"))
                .collect();
            paths.sort();
            for path in paths {
                let name = path.file_stem().expect("has extension").to_string_lossy().into_owned();
                let source = fs::read_to_string(&path).map_err(|source| CorpusError::Io { path: path.clone(), source })?;
                let out_path = path.with_extension("out");
                if !out_path.exists() {
                    return Err(CorpusError::MissingGolden { name });
                }
                let golden = fs::read_to_string(&out_path).map_err(|source| CorpusError::Io { path: out_path.clone(), source })?;
                programs.push(entry(group, &name, source, golden)?);
            }
        }
        Ok(Corpus { programs })
    }

    pub fn group(&self, g: Group) -> impl Iterator<Item = &CorpusProgram> {
        self.programs.iter().filter(move |p| p.group == g)
    }

    pub fn get(&self, name: &str) -> Option<&CorpusProgram> {
        self.programs.iter().find(|p| p.name == name)
    }

    pub fn mean_cyclomatic(&self, g: Group) -> f64 {
        let v: Vec<i64> = self.group(g).map(CorpusProgram::cyclomatic).collect();
        v.iter().sum::<i64>() as f64 / v.len().max(1) as f64
    }

    /// Twelve programs split nine and three, each running cleanly to its
    /// golden output, with the second group more complex on average.
    pub fn validate(&self) -> Result<(), CorpusError> {
        let sizes = (self.group(Group::Group1).count(), self.group(Group::Group2).count());
        if sizes != (9, 3) {
            return Err(CorpusError::Invalid(format!("expected 9 + 3 programs, found {} + {}", sizes.0, sizes.1)));
        }
        for p in &self.programs {
            let out = run(&p.program, DEFAULT_STEP_LIMIT);
            if !out.is_ok() {
                return Err(CorpusError::Invalid(format!("{}: {}", p.name, out.status)));
            }
            if out.stdout != p.golden {
                return Err(CorpusError::Invalid(format!("{}: output differs from golden", p.name)));
            }
        }
        let (c1, c2) = (self.mean_cyclomatic(Group::Group1), self.mean_cyclomatic(Group::Group2));
        if c2 <= c1 {
            return Err(CorpusError::Invalid(format!("group2 mean cyclomatic {c2} not above group1 {c1}")));
        }
        Ok(())
    }
}
