use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};

use deob_core::cfg::build_program_cfgs;
use deob_core::deobfuscate::deobfuscate;
use deob_core::frontend::{emit, parse_source, Program};
use deob_core::harness::{
    has_row_failures, run_exp1, run_exp2, write_summary_csv, Corpus, Engine, Experiment, ExperimentPlan, LlmEngine, DEFAULT_SEEDS,
    EXP1_K,
};
use deob_core::interp::{run, DEFAULT_STEP_LIMIT};
use deob_core::llm::{run_llm_deobfuscation, BackendConfig, LlmClient, PromptMode, PromptOptions};
use deob_core::metrics::{evaluate_source, write_csv, EvalStatus, MetricRow};
use deob_core::obfuscate::{obfuscate, Mode, Profile};

#[derive(Parser)]
#[command(name = "deob", version, about = "Obfuscate, deobfuscate and score MiniLang programs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Apply a seeded obfuscation and optionally save its recipe.
    Obfuscate(ObfuscateArgs),
    /// Recover a readable program with the static or the model engine.
    Deobfuscate(DeobfuscateArgs),
    /// Execute a program and print its output.
    Run {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Score a candidate against an original.
    Eval(EvalArgs),
    /// Run an experiment grid over the corpus and write CSV rows.
    Bench(BenchArgs),
}

#[derive(Args)]
struct ObfuscateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    mode: Mode,
    #[arg(long, default_value = "limited")]
    profile: Profile,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Opaque predicates to insert; ignored by `cff`.
    #[arg(long, default_value_t = EXP1_K)]
    opaque_count: usize,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    recipe: Option<PathBuf>,
}

#[derive(Args)]
struct LlmArgs {
    /// Base URL of an OpenAI-compatible API; defaults to DEOB_LLM_ENDPOINT.
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Answer prompts from a recorded transcript instead of the network.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Append live completions to this transcript.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long, default_value = "cot")]
    prompt: PromptMode,
    #[arg(long)]
    few_shot: bool,
}

impl LlmArgs {
    fn engine(&self) -> Result<LlmEngine> {
        let mut cfg = match (&self.replay, &self.endpoint) {
            (Some(path), _) => BackendConfig::replay(path),
            (None, Some(endpoint)) => BackendConfig {
                api_key: std::env::var("DEOB_LLM_KEY").ok(),
                ..BackendConfig::http(endpoint.clone(), self.model.clone().unwrap_or_default())
            },
            (None, None) => BackendConfig::from_env()?,
        };
        if let Some(m) = &self.model {
            cfg.model = m.clone();
        }
        if let Some(t) = self.temperature {
            cfg.temperature = t;
        }
        cfg.record_to = self.record.clone();
        let client = LlmClient::new(cfg)?;
        Ok(LlmEngine { client, options: PromptOptions { mode: self.prompt, few_shot: self.few_shot } })
    }
}

#[derive(Args)]
struct DeobfuscateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, default_value = "static")]
    engine: Engine,
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report of what was found and removed.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    llm: LlmArgs,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    candidate: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Write Graphviz files of both programs' CFGs into this directory.
    #[arg(long)]
    dump_cfg: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    experiment: Experiment,
    /// Corpus directory with group1/ and group2/; the built-in corpus otherwise.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "static")]
    engines: Vec<Engine>,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SEEDS)]
    seeds: Vec<u64>,
    #[arg(long)]
    out: PathBuf,
    /// JSON lines mirror of the rows.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Group means for exp2; defaults to `<out>` with a `.summary.csv` suffix.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Override the profile grid.
    #[arg(long)]
    profile: Option<Profile>,
    /// Predicates per program for exp1.
    #[arg(long)]
    opaque_count: Option<usize>,
    #[command(flatten)]
    llm: LlmArgs,
}

/// A command that ran to completion, possibly with failed rows.
enum Outcome {
    Done,
    RowFailures,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_file(path: &Path) -> Result<Program> {
    let src = read(path)?;
    parse_source(&src).with_context(|| format!("parsing {}", path.display()))
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing stdout"),
    }
}

fn cmd_obfuscate(a: &ObfuscateArgs) -> Result<Outcome> {
    let p = parse_file(&a.input)?;
    let k = if a.mode.uses_opaque() { a.opaque_count } else { 0 };
    let (obf, recipe) = obfuscate(&p, a.mode, a.profile, a.seed, k)?;
    write_out(a.out.as_deref(), &emit(&obf))?;
    if let Some(path) = &a.recipe {
        fs::write(path, recipe.to_text()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(Outcome::Done)
}

fn cmd_deobfuscate(a: &DeobfuscateArgs) -> Result<Outcome> {
    match a.engine {
        Engine::Static => {
            let p = parse_file(&a.input)?;
            let (q, report) = deobfuscate(&p);
            write_out(a.out.as_deref(), &emit(&q))?;
            if let Some(path) = &a.report {
                fs::write(path, report.to_json() + "\n")?;
            }
            Ok(Outcome::Done)
        }
        Engine::Llm => {
            let engine = a.llm.engine()?;
            let src = read(&a.input)?;
            let (cand, res) = run_llm_deobfuscation(&src, engine.options, &engine.client);
            if let Some(path) = &a.report {
                let doc = serde_json::json!({
                    "engine": "llm",
                    "model": engine.client.config().model,
                    "prompt": engine.options.mode.to_string(),
                    "few_shot": engine.options.few_shot,
                    "failure": res.candidate.as_ref().err().map(|e| e.to_string()),
                    "warnings": res.warnings,
                    "usage": res.usage,
                    "response": res.raw,
                });
                fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
            }
            match cand {
                Some(q) => {
                    write_out(a.out.as_deref(), &emit(&q))?;
                    Ok(Outcome::Done)
                }
                None => {
                    eprintln!("deob: no usable candidate: {}", res.candidate.unwrap_err());
                    Ok(Outcome::RowFailures)
                }
            }
        }
    }
}

fn cmd_run(input: &Path) -> Result<Outcome> {
    let p = parse_file(input)?;
    let out = run(&p, DEFAULT_STEP_LIMIT);
    io::stdout().write_all(out.stdout.as_bytes())?;
    if out.is_ok() {
        Ok(Outcome::Done)
    } else {
        eprintln!("deob: {}", out.status);
        Ok(Outcome::RowFailures)
    }
}

fn dump_cfgs(dir: &Path, tag: &str, p: &Program) -> Result<()> {
    fs::create_dir_all(dir)?;
    for g in build_program_cfgs(p) {
        let path = dir.join(format!("{tag}.{}.dot", g.function));
        fs::write(&path, g.to_dot()).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<Outcome> {
    let original = parse_file(&a.original)?;
    let candidate = read(&a.candidate)?;
    let report = evaluate_source(&original, &candidate);
    if let Some(dir) = &a.dump_cfg {
        dump_cfgs(dir, "original", &original)?;
        if let Ok(c) = parse_source(&candidate) {
            dump_cfgs(dir, "candidate", &c)?;
        }
    }
    let ok = report.status == EvalStatus::Ok;
    let row = MetricRow {
        program: a.original.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()),
        mode: "none".into(),
        profile: "none".into(),
        seed: 0,
        k: 0,
        engine: "none".into(),
        report,
    };
    match a.format {
        Format::Csv => write_csv(io::stdout().lock(), std::slice::from_ref(&row))?,
        Format::Json => writeln!(io::stdout(), "{}", serde_json::to_string_pretty(&row)?)?,
    }
    Ok(if ok { Outcome::Done } else { Outcome::RowFailures })
}

fn summary_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.summary.csv"))
}

fn cmd_bench(a: &BenchArgs) -> Result<Outcome> {
    let corpus = match &a.corpus {
        Some(dir) => Corpus::load(dir)?,
        None => Corpus::builtin(),
    };
    corpus.validate()?;
    if a.engines.is_empty() || a.seeds.is_empty() {
        bail!("--engines and --seeds must not be empty");
    }
    let llm = if a.engines.contains(&Engine::Llm) { Some(a.llm.engine()?) } else { None };
    let mut plan = ExperimentPlan::new(a.experiment, a.engines.clone(), a.seeds.clone());
    if let Some(p) = a.profile {
        plan.profiles = vec![p];
    }
    if let (Experiment::Exp1, Some(k)) = (a.experiment, a.opaque_count) {
        plan.ks = vec![k];
    }
    let rows = match a.experiment {
        Experiment::Exp1 => run_exp1(&plan, &corpus, llm.as_ref()),
        Experiment::Exp2 => {
            let (rows, means) = run_exp2(&plan, &corpus, llm.as_ref());
            let path = a.summary.clone().unwrap_or_else(|| summary_path(&a.out));
            let f = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_summary_csv(f, &means)?;
            rows
        }
    };
    let f = fs::File::create(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    write_csv(f, &rows)?;
    if let Some(path) = &a.json {
        let mut text = String::new();
        for row in &rows {
            text.push_str(&serde_json::to_string(row)?);
            text.push('\n');
        }
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    let failed = rows.iter().filter(|r| r.report.status != EvalStatus::Ok).count();
    eprintln!("deob: {} rows, {failed} not available", rows.len());
    Ok(if has_row_failures(&rows) { Outcome::RowFailures } else { Outcome::Done })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return ExitCode::SUCCESS;
            }
            if !e.render().to_string().contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Obfuscate(a) => cmd_obfuscate(a),
        Command::Deobfuscate(a) => cmd_deobfuscate(a),
        Command::Run { input } => cmd_run(input),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match result {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::RowFailures) => ExitCode::from(2),
        Err(e) => {
            eprintln!("deob: {e:#}");
            ExitCode::from(1)
        }
    }
}
