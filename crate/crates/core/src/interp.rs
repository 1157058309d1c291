//! Reference executor. Two drivers share one expression evaluator: a
//! big-step walk over the syntax tree, and a block stepper over the lowered
//! control flow graphs that also records per-block coverage.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::Serialize;

use crate::cfg::{build_cfg, BlockId, Cfg, Terminator};
use crate::frontend::normalize::fold_binary;
use crate::frontend::{BinOp, Block, Expr, ExprKind, FunctionDecl, GlobalKind, LValue, Program, Span, Stmt, StmtKind, UnaryOp};

pub const DEFAULT_STEP_LIMIT: u64 = 10_000_000;

/// Deepest call chain allowed before the run is aborted.
pub const MAX_CALL_DEPTH: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuntimeErrorKind {
    DivisionByZero,
    ModuloByZero,
    IndexOutOfBounds,
    MissingMain,
    CallDepthExceeded,
}

impl fmt::Display for RuntimeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RuntimeErrorKind::DivisionByZero => "division-by-zero",
            RuntimeErrorKind::ModuloByZero => "modulo-by-zero",
            RuntimeErrorKind::IndexOutOfBounds => "index-out-of-bounds",
            RuntimeErrorKind::MissingMain => "missing-main",
            RuntimeErrorKind::CallDepthExceeded => "call-depth-exceeded",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExecStatus {
    Ok,
    RuntimeError { kind: RuntimeErrorKind, span: Span },
    StepLimit,
}

impl fmt::Display for ExecStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecStatus::Ok => f.write_str("ok"),
            ExecStatus::RuntimeError { kind, span } => write!(f, "runtime-error({kind}) at {span}"),
            ExecStatus::StepLimit => f.write_str("step-limit"),
        }
    }
}

/// Coverage counts: function name to block id to times entered.
pub type Coverage = BTreeMap<String, BTreeMap<BlockId, u64>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutput {
    pub stdout: String,
    pub status: ExecStatus,
    pub steps: u64,
    pub coverage: Option<Coverage>,
}

impl ExecOutput {
    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }
}

/// Both runs finished normally and printed the same bytes.
pub fn outputs_equal(a: &ExecOutput, b: &ExecOutput) -> bool {
    a.is_ok() && b.is_ok() && a.stdout == b.stdout
}

enum Abort {
    Error(RuntimeErrorKind, Span),
    StepLimit,
}

enum Flow {
    Normal,
    Return(i64),
}

type Res<T> = Result<T, Abort>;

struct Machine<'p> {
    functions: HashMap<&'p str, &'p FunctionDecl>,
    scalars: HashMap<String, i64>,
    arrays: HashMap<String, Vec<i64>>,
    cfgs: Option<HashMap<String, &'p Cfg>>,
    coverage: Coverage,
    out: String,
    steps: u64,
    limit: u64,
    depth: usize,
}

impl<'p> Machine<'p> {
    fn new(p: &'p Program, limit: u64) -> Self {
        let mut scalars = HashMap::new();
        let mut arrays = HashMap::new();
        for g in &p.globals {
            match g.kind {
                GlobalKind::Scalar(v) => {
                    scalars.insert(g.name.clone(), v);
                }
                GlobalKind::Array(n) => {
                    arrays.insert(g.name.clone(), vec![0; n]);
                }
            }
        }
        Machine {
            functions: p.functions.iter().map(|f| (f.name.as_str(), f)).collect(),
            scalars,
            arrays,
            cfgs: None,
            coverage: Coverage::new(),
            out: String::new(),
            steps: 0,
            limit,
            depth: 0,
        }
    }

    fn tick(&mut self) -> Res<()> {
        self.steps += 1;
        if self.steps > self.limit {
            Err(Abort::StepLimit)
        } else {
            Ok(())
        }
    }

    fn read(&self, frame: &HashMap<String, i64>, name: &str) -> i64 {
        match frame.get(name) {
            Some(v) => *v,
            None => self.scalars.get(name).copied().unwrap_or(0),
        }
    }

    fn write(&mut self, frame: &mut HashMap<String, i64>, name: &str, v: i64) {
        if let Some(slot) = frame.get_mut(name) {
            *slot = v;
        } else if let Some(slot) = self.scalars.get_mut(name) {
            *slot = v;
        } else {
            frame.insert(name.to_string(), v);
        }
    }

    fn slot(&mut self, name: &str, idx: i64, span: Span) -> Res<&mut i64> {
        let arr = self.arrays.get_mut(name).ok_or(Abort::Error(RuntimeErrorKind::IndexOutOfBounds, span))?;
        usize::try_from(idx)
            .ok()
            .and_then(|i| arr.get_mut(i))
            .ok_or(Abort::Error(RuntimeErrorKind::IndexOutOfBounds, span))
    }

    fn eval(&mut self, frame: &mut HashMap<String, i64>, e: &Expr) -> Res<i64> {
        Ok(match &e.kind {
            ExprKind::Int(v) => *v,
            ExprKind::Var(n) => self.read(frame, n),
            ExprKind::Index(n, i) => {
                let i = self.eval(frame, i)?;
                *self.slot(n, i, e.span)?
            }
            ExprKind::Unary(UnaryOp::Neg, x) => self.eval(frame, x)?.wrapping_neg(),
            ExprKind::Unary(UnaryOp::Not, x) => (self.eval(frame, x)? == 0) as i64,
            ExprKind::Binary(BinOp::And, l, r) => (self.eval(frame, l)? != 0 && self.eval(frame, r)? != 0) as i64,
            ExprKind::Binary(BinOp::Or, l, r) => (self.eval(frame, l)? != 0 || self.eval(frame, r)? != 0) as i64,
            ExprKind::Binary(op, l, r) => {
                let a = self.eval(frame, l)?;
                let b = self.eval(frame, r)?;
                match fold_binary(*op, a, b) {
                    Some(v) => v,
                    None if *op == BinOp::Div => return Err(Abort::Error(RuntimeErrorKind::DivisionByZero, e.span)),
                    None => return Err(Abort::Error(RuntimeErrorKind::ModuloByZero, e.span)),
                }
            }
            ExprKind::Call(name, args) => self.call(frame, name, args, e.span)?,
        })
    }

    fn call(&mut self, frame: &mut HashMap<String, i64>, name: &str, args: &[Expr], span: Span) -> Res<i64> {
        let mut values = Vec::with_capacity(args.len());
        for a in args {
            values.push(self.eval(frame, a)?);
        }
        let f = *self.functions.get(name).ok_or(Abort::Error(RuntimeErrorKind::MissingMain, span))?;
        self.invoke(f, values, span)
    }

    fn invoke(&mut self, f: &'p FunctionDecl, args: Vec<i64>, span: Span) -> Res<i64> {
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Abort::Error(RuntimeErrorKind::CallDepthExceeded, span));
        }
        self.depth += 1;
        let mut frame: HashMap<String, i64> = f.params.iter().cloned().zip(args).collect();
        let result = match self.cfgs.as_ref().and_then(|m| m.get(&f.name).copied()) {
            Some(cfg) => self.walk_cfg(cfg, &mut frame),
            None => self.exec_block(&mut frame, &f.body).map(|flow| match flow {
                Flow::Return(v) => v,
                Flow::Normal => 0,
            }),
        };
        self.depth -= 1;
        result
    }

    /// Straight-line statement shared by both drivers.
    fn exec_simple(&mut self, frame: &mut HashMap<String, i64>, s: &Stmt) -> Res<()> {
        match &s.kind {
            StmtKind::Decl { name, init } => {
                let v = match init {
                    Some(e) => self.eval(frame, e)?,
                    None => 0,
                };
                frame.insert(name.clone(), v);
            }
            StmtKind::Assign { target: LValue::Var(n), value } => {
                let v = self.eval(frame, value)?;
                self.write(frame, n, v);
            }
            StmtKind::Assign { target: LValue::Index(n, i), value } => {
                let i = self.eval(frame, i)?;
                let v = self.eval(frame, value)?;
                *self.slot(n, i, s.span)? = v;
            }
            StmtKind::Print(e) => {
                let v = self.eval(frame, e)?;
                self.out.push_str(&v.to_string());
                self.out.push('\n');
            }
            StmtKind::Call { name, args } => {
                self.call(frame, name, args, s.span)?;
            }
            _ => unreachable!("compound statement in straight-line position"),
        }
        Ok(())
    }

    fn exec_block(&mut self, frame: &mut HashMap<String, i64>, b: &Block) -> Res<Flow> {
        for s in &b.stmts {
            if let Flow::Return(v) = self.exec_stmt(frame, s)? {
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_stmt(&mut self, frame: &mut HashMap<String, i64>, s: &Stmt) -> Res<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::If { cond, then_block, else_block } => {
                if self.eval(frame, cond)? != 0 {
                    self.exec_block(frame, then_block)
                } else if let Some(b) = else_block {
                    self.exec_block(frame, b)
                } else {
                    Ok(Flow::Normal)
                }
            }
            StmtKind::While { cond, body } => {
                while self.eval(frame, cond)? != 0 {
                    if let Flow::Return(v) = self.exec_block(frame, body)? {
                        return Ok(Flow::Return(v));
                    }
                    self.tick()?;
                }
                Ok(Flow::Normal)
            }
            StmtKind::Block(b) => self.exec_block(frame, b),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(frame, e)?,
                    None => 0,
                };
                Ok(Flow::Return(v))
            }
            _ => {
                self.exec_simple(frame, s)?;
                Ok(Flow::Normal)
            }
        }
    }

    fn walk_cfg(&mut self, cfg: &Cfg, frame: &mut HashMap<String, i64>) -> Res<i64> {
        let mut b = cfg.entry;
        loop {
            *self.coverage.entry(cfg.function.clone()).or_default().entry(b).or_insert(0) += 1;
            let block = &cfg.blocks[b];
            for s in &block.stmts {
                self.tick()?;
                self.exec_simple(frame, s)?;
            }
            self.tick()?;
            match &block.term {
                Terminator::Goto(t) => b = *t,
                Terminator::Branch { cond, on_true, on_false } => {
                    b = if self.eval(frame, cond)? != 0 { *on_true } else { *on_false };
                }
                Terminator::Return(Some(e)) => return self.eval(frame, e),
                Terminator::Return(None) | Terminator::FallOff => return Ok(0),
            }
        }
    }

    fn run_main(mut self, p: &'p Program) -> ExecOutput {
        let status = match p.function("main") {
            None => ExecStatus::RuntimeError { kind: RuntimeErrorKind::MissingMain, span: Span::default() },
            Some(main) => match self.invoke(main, Vec::new(), main.span) {
                Ok(_) => ExecStatus::Ok,
                Err(Abort::StepLimit) => ExecStatus::StepLimit,
                Err(Abort::Error(kind, span)) => ExecStatus::RuntimeError { kind, span },
            },
        };
        let coverage = self.cfgs.is_some().then_some(self.coverage);
        ExecOutput { stdout: self.out, status, steps: self.steps, coverage }
    }
}

/// Execute `main` by walking the syntax tree.
pub fn run(p: &Program, step_limit: u64) -> ExecOutput {
    Machine::new(p, step_limit).run_main(p)
}

/// Execute `main` by stepping through basic blocks, counting block entries.
/// Every block of every supplied graph appears in the coverage map, unexecuted
/// ones with count 0.
pub fn run_instrumented(p: &Program, cfgs: &[Cfg], step_limit: u64) -> ExecOutput {
    let mut m = Machine::new(p, step_limit);
    for c in cfgs {
        m.coverage.insert(c.function.clone(), c.blocks.iter().map(|b| (b.id, 0)).collect());
    }
    m.cfgs = Some(cfgs.iter().map(|c| (c.function.clone(), c)).collect());
    m.run_main(p)
}

/// Convenience: lower every function and run instrumented.
pub fn run_with_coverage(p: &Program, step_limit: u64) -> ExecOutput {
    let cfgs: Vec<Cfg> = p.functions.iter().map(build_cfg).collect();
    run_instrumented(p, &cfgs, step_limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_source;

    fn exec(src: &str) -> ExecOutput {
        run(&parse_source(src).unwrap(), DEFAULT_STEP_LIMIT)
    }

    #[test]
    fn prints_sum() {
        let o = exec("int main(){print(2+3); return 0;}");
        assert_eq!(o.stdout, "5\n");
        assert!(o.is_ok());
    }

    #[test]
    fn division_by_zero() {
        let o = exec("int main(){ int z = 0; print(1 / z); return 0; }");
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::DivisionByZero, .. }));
        let o = exec("int main(){ int z = 0; print(1 % z); return 0; }");
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::ModuloByZero, .. }));
    }

    #[test]
    fn index_out_of_bounds() {
        let o = exec("int a[3]; int main(){ a[3] = 1; return 0; }");
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::IndexOutOfBounds, .. }));
        let o = exec("int a[3]; int main(){ print(a[-1]); return 0; }");
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::IndexOutOfBounds, .. }));
    }

    #[test]
    fn missing_main() {
        let o = run(&Program::default(), 10);
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::MissingMain, .. }));
    }

    #[test]
    fn wrapping_and_truncation() {
        let o = exec("int main(){ int m = 9223372036854775807; print(m + 1); print(-7 / 2); print(-7 % 2); return 0; }");
        assert_eq!(o.stdout, "-9223372036854775808\n-3\n-1\n");
    }

    #[test]
    fn short_circuit() {
        let o = exec("int main(){ int z = 0; print(z != 0 && 1 / z > 0); print(z == 0 || 1 / z > 0); return 0; }");
        assert_eq!(o.stdout, "0\n1\n");
    }

    #[test]
    fn step_limit() {
        let o = run(&parse_source("int main(){ while (1) { } return 0; }").unwrap(), 1000);
        assert_eq!(o.status, ExecStatus::StepLimit);
    }

    #[test]
    fn recursion_and_depth_limit() {
        let o = exec("int fact(int n) { if (n < 2) { return 1; } return n * fact(n - 1); } int main(){ print(fact(10)); return 0; }");
        assert_eq!(o.stdout, "3628800\n");
        let o = exec("int f(int n) { return f(n + 1); } int main(){ print(f(0)); return 0; }");
        assert!(matches!(o.status, ExecStatus::RuntimeError { kind: RuntimeErrorKind::CallDepthExceeded, .. }));
    }

    #[test]
    fn locals_reset_each_iteration() {
        let o = exec("int main(){ int i = 0; while (i < 3) { int t; t = t + i; print(t); i = i + 1; } return 0; }");
        assert_eq!(o.stdout, "0\n1\n2\n");
    }

    #[test]
    fn equality_gated_by_status() {
        let a = exec("int main(){ print(1); return 0; }");
        assert!(outputs_equal(&a, &a.clone()));
        let mut b = a.clone();
        b.status = ExecStatus::StepLimit;
        assert!(!outputs_equal(&a, &b));
        let c = exec("int main(){ print(1); print(1 / 0); return 0; }");
        assert!(!outputs_equal(&a, &c));
    }

    #[test]
    fn walker_matches_tree_and_counts_blocks() {
        let src = "int g = 0; void bump(int k) { g = g + k; } int main(){ int i = 0; while (i < 4) { if (i % 2 == 0) { bump(i); } else { print(i); } i = i + 1; } print(g); return 0; }";
        let p = parse_source(src).unwrap();
        let a = run(&p, DEFAULT_STEP_LIMIT);
        let b = run_with_coverage(&p, DEFAULT_STEP_LIMIT);
        assert!(outputs_equal(&a, &b));
        let cov = b.coverage.unwrap();
        assert_eq!(cov["bump"][&0], 2);
        assert!(cov["main"].values().all(|&c| c >= 1));
    }

    #[test]
    fn empty_main_covers_only_entry() {
        let p = parse_source("void main(){ }").unwrap();
        let o = run_with_coverage(&p, 100);
        assert_eq!(o.coverage.unwrap()["main"], BTreeMap::from([(0, 1)]));
    }
}
