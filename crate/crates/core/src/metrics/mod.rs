//! Structural similarity of control flow graphs and BLEU over program output.

pub mod bleu;
pub mod ged;

use std::collections::BTreeSet;
use std::fmt;
use std::io;

use serde::Serialize;

use crate::cfg::{build_cfg, Cfg, Digraph};
use crate::frontend::{parse_source, Program};
use crate::interp::{outputs_equal, run, ExecStatus, DEFAULT_STEP_LIMIT};

pub use bleu::{bleu, bleu_text};
pub use ged::{edge_set_size, ged, EditOp, Exactness, GedResult, DEFAULT_BUDGET};

/// |V| + |E| with parallel edges counted once.
pub fn graph_size(g: &Digraph) -> usize {
    g.len() + edge_set_size(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Similarity {
    pub ged: u64,
    /// Normalizer: the larger of the two graph sizes.
    pub size: usize,
    pub d: f64,
    pub srs: f64,
    pub exactness: Exactness,
}

/// `d` is capped at 1: with unit costs the edit distance can exceed the
/// larger graph's size, e.g. isolated nodes against a dense smaller graph.
pub fn srs_graphs(g1: &Digraph, g2: &Digraph, budget: usize) -> Similarity {
    let r = ged(g1, g2, budget);
    let size = graph_size(g1).max(graph_size(g2));
    let d = (r.cost as f64 / size as f64).min(1.0);
    Similarity { ged: r.cost, size, d, srs: 1.0 - d, exactness: r.exactness }
}

pub fn srs(c1: &Cfg, c2: &Cfg) -> Similarity {
    srs_graphs(&c1.digraph(), &c2.digraph(), DEFAULT_BUDGET)
}

/// Functions are paired by name when both programs declare the same names,
/// otherwise by declaration order (identifier stripping renames functions but
/// keeps their order). An unpaired function counts as fully inserted or
/// deleted. The result is the mean of per-function SRS weighted by each pair's
/// normalizer, which is `1 - sum(min(ged, size)) / sum(size)`.
pub fn program_srs(a: &Program, b: &Program, budget: usize) -> Similarity {
    let cfgs = |p: &Program| p.functions.iter().map(|f| (f.name.clone(), build_cfg(f).digraph())).collect::<Vec<_>>();
    let (ga, mut gb) = (cfgs(a), cfgs(b));
    let names = |g: &[(String, Digraph)]| g.iter().map(|(n, _)| n.clone()).collect::<BTreeSet<_>>();
    if names(&ga) == names(&gb) {
        gb.sort_by_key(|(n, _)| ga.iter().position(|(m, _)| m == n));
    }
    let (mut ged_sum, mut capped_sum, mut size_sum, mut exact) = (0u64, 0u64, 0usize, true);
    for i in 0..ga.len().max(gb.len()) {
        match (ga.get(i), gb.get(i)) {
            (Some((_, x)), Some((_, y))) => {
                let s = srs_graphs(x, y, budget);
                ged_sum += s.ged;
                capped_sum += s.ged.min(s.size as u64);
                size_sum += s.size;
                exact &= s.exactness == Exactness::Exact;
            }
            (Some((_, g)), None) | (None, Some((_, g))) => {
                ged_sum += graph_size(g) as u64;
                capped_sum += graph_size(g) as u64;
                size_sum += graph_size(g);
            }
            (None, None) => unreachable!("index below the longer list"),
        }
    }
    let d = if size_sum == 0 { 0.0 } else { capped_sum as f64 / size_sum as f64 };
    Similarity {
        ged: ged_sum,
        size: size_sum,
        d,
        srs: 1.0 - d,
        exactness: if exact { Exactness::Exact } else { Exactness::UpperBound },
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", content = "detail", rename_all = "kebab-case")]
pub enum EvalStatus {
    Ok,
    ParseError(String),
    ExecError(String),
    /// The obfuscation step itself failed, so there is nothing to score.
    ObfuscationError(String),
    /// No completion was obtained from the model backend.
    BackendError(String),
}

impl fmt::Display for EvalStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalStatus::Ok => "ok",
            EvalStatus::ParseError(_) => "parse-error",
            EvalStatus::ExecError(_) => "exec-error",
            EvalStatus::ObfuscationError(_) => "obfuscation-error",
            EvalStatus::BackendError(_) => "backend-error",
        })
    }
}

/// Metrics of a candidate against the original. Unavailable values are
/// `None`, shown as `NA`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub similarity: Option<Similarity>,
    pub bleu: Option<f64>,
    pub outputs_equal: bool,
    pub status: EvalStatus,
}

impl MetricReport {
    pub fn not_available(status: EvalStatus) -> Self {
        MetricReport { similarity: None, bleu: None, outputs_equal: false, status }
    }

    pub fn srs(&self) -> Option<f64> {
        self.similarity.map(|s| s.srs)
    }

    pub fn exactness(&self) -> Option<Exactness> {
        self.similarity.map(|s| s.exactness)
    }
}

pub fn evaluate_pair(original: &Program, candidate: &Program) -> MetricReport {
    let reference = run(original, DEFAULT_STEP_LIMIT);
    let out = run(candidate, DEFAULT_STEP_LIMIT);
    if out.status != ExecStatus::Ok {
        return MetricReport::not_available(EvalStatus::ExecError(out.status.to_string()));
    }
    MetricReport {
        similarity: Some(program_srs(original, candidate, DEFAULT_BUDGET)),
        bleu: Some(bleu_text(&out.stdout, &reference.stdout)),
        outputs_equal: outputs_equal(&reference, &out),
        status: EvalStatus::Ok,
    }
}

/// Like [`evaluate_pair`] for candidate source text, which may not parse.
pub fn evaluate_source(original: &Program, candidate: &str) -> MetricReport {
    match parse_source(candidate) {
        Ok(c) => evaluate_pair(original, &c),
        Err(e) => MetricReport::not_available(EvalStatus::ParseError(e.to_string())),
    }
}

pub const CSV_HEADER: [&str; 11] =
    ["program", "mode", "profile", "seed", "K", "engine", "srs", "srs_exactness", "bleu", "outputs_equal", "status"];

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub program: String,
    pub mode: String,
    pub profile: String,
    pub seed: u64,
    pub k: usize,
    pub engine: String,
    pub report: MetricReport,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x:.6}"))
}

impl MetricRow {
    pub fn record(&self) -> [String; 11] {
        let r = &self.report;
        [
            self.program.clone(),
            self.mode.clone(),
            self.profile.clone(),
            self.seed.to_string(),
            self.k.to_string(),
            self.engine.clone(),
            fmt_opt(r.srs()),
            r.exactness().map_or_else(|| "NA".to_string(), |e| e.to_string()),
            fmt_opt(r.bleu),
            r.outputs_equal.to_string(),
            r.status.to_string(),
        ]
    }
}

pub fn write_csv<W: io::Write>(w: W, rows: &[MetricRow]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(CSV_HEADER)?;
    for row in rows {
        out.write_record(row.record())?;
    }
    out.flush()?;
    Ok(())
}
