//! Command-line front end.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use crate::analysis::{analyze, Analysis, AnalysisConfig};
use crate::bounds::Bound;
use crate::interp::{check_bounds, run, CheckConfig, Scheduler, DEFAULT_FUEL};
use crate::its::{Program, State};
use crate::parser::parse_named;
use crate::smt::SmtConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_UNBOUNDED: i32 = 2;
pub const EXIT_COUNTEREXAMPLE: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "rho-bound", version, about = "Runtime and size bounds for integer programs with recursive calls")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Input program.
    pub path: PathBuf,
    /// External SMT-LIB2 solver command (default: $RHO_BOUND_SMT, else the internal solver).
    #[arg(long)]
    pub smt: Option<String>,
    /// Solver timeout in seconds.
    #[arg(long, default_value_t = 10)]
    pub timeout: u64,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Infer runtime and size bounds.
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate the program from one initial state.
    Run {
        #[command(flatten)]
        common: Common,
        /// Initial values, e.g. `a=0,x=2,y=0`.
        #[arg(long)]
        init: String,
        /// Random scheduler seed; first-match scheduling if absent.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = DEFAULT_FUEL)]
        fuel: u64,
        /// Print the final evaluation tree as DOT.
        #[arg(long)]
        dot: bool,
    },
    /// Analyze, then test the bounds against random runs.
    Check {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        #[arg(long, default_value_t = 16)]
        range: i64,
        /// Seed for the initial states.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random scheduler seeds, in addition to first-match.
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 2, 3])]
        seeds: Vec<u64>,
        #[arg(long, default_value_t = crate::interp::CHECK_FUEL)]
        fuel: u64,
        /// Replace every runtime bound by 0 (self-test of the checker).
        #[arg(long)]
        inject: bool,
    },
    /// Print the result variable graph as DOT.
    Graph {
        #[command(flatten)]
        common: Common,
    },
}

impl Common {
    fn smt_config(&self) -> SmtConfig {
        let mut cfg = SmtConfig::from_env();
        if let Some(c) = &self.smt {
            cfg.command = Some(c.clone());
        }
        cfg.timeout = Duration::from_secs(self.timeout);
        cfg
    }

    fn analysis_config(&self) -> AnalysisConfig {
        AnalysisConfig { smt: self.smt_config(), ..AnalysisConfig::default() }
    }
}

fn load(path: &PathBuf, err: &mut dyn Write) -> Option<Program> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(err, "error: cannot read {}: {e}", path.display());
            return None;
        }
    };
    match parse_named(&text, &path.display().to_string()) {
        Ok(p) if p.transitions.is_empty() => {
            let _ = writeln!(err, "error: {}: no rules", path.display());
            None
        }
        Ok(p) => Some(p),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

fn analyze_or_report(p: &Program, common: &Common, err: &mut dyn Write) -> Option<Analysis> {
    match analyze(p, &common.analysis_config()) {
        Ok(a) => Some(a),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            None
        }
    }
}

pub fn parse_init(prog: &Program, text: &str) -> Result<State, String> {
    let mut given: BTreeMap<String, BigInt> = BTreeMap::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = part.split_once('=').ok_or_else(|| format!("expected `name=value`, got `{part}`"))?;
        let v: BigInt = v.trim().parse().map_err(|_| format!("invalid value for `{}`", k.trim()))?;
        given.insert(k.trim().to_string(), v);
    }
    for k in given.keys() {
        if !prog.variables.contains(k) {
            return Err(format!("unknown variable `{k}`"));
        }
    }
    prog.variables
        .iter()
        .map(|v| given.get(v).map(|x| (v.clone(), x.clone())).ok_or_else(|| format!("missing value for `{v}`")))
        .collect()
}

fn cmd_analyze(common: &Common, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(p) = load(&common.path, err) else { return EXIT_INPUT };
    let Some(a) = analyze_or_report(&p, common, err) else { return EXIT_INPUT };
    let _ = match common.format {
        Format::Text => write!(out, "{}", a.report_text()),
        Format::Json => writeln!(out, "{}", serde_json::to_string_pretty(&a.report_json()).unwrap()),
        Format::Dot => write!(out, "{}", a.rvg.to_dot(&a.program)),
    };
    if a.overall.is_finite() {
        EXIT_OK
    } else {
        EXIT_UNBOUNDED
    }
}

fn cmd_run(common: &Common, init: &str, seed: Option<u64>, fuel: u64, dot: bool, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(p) = load(&common.path, err) else { return EXIT_INPUT };
    let sigma0 = match parse_init(&p, init) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let sched = match seed {
        Some(s) => Scheduler::random(s),
        None => Scheduler::first_match(),
    }
    .with_fuel(fuel);
    let r = run(&p, &sigma0, sched);
    if dot || common.format == Format::Dot {
        let _ = write!(out, "{}", r.tree.to_dot(&p));
        return EXIT_OK;
    }
    if common.format == Format::Json {
        let v = serde_json::json!({
            "edges": r.edge_counts,
            "calls": r.call_counts,
            "total": r.total,
            "exhausted": r.exhausted,
        });
        let _ = writeln!(out, "{}", serde_json::to_string_pretty(&v).unwrap());
        return EXIT_OK;
    }
    for (t, n) in &r.edge_counts {
        let _ = writeln!(out, "{t}: {n}");
    }
    let _ = writeln!(out, "total: {}", r.total);
    if r.exhausted {
        let _ = writeln!(out, "exhausted: fuel {fuel} used up");
    }
    EXIT_OK
}

#[allow(clippy::too_many_arguments)]
fn cmd_check(
    common: &Common,
    trials: usize,
    range: i64,
    seed: u64,
    seeds: &[u64],
    fuel: u64,
    inject: bool,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> i32 {
    let Some(p) = load(&common.path, err) else { return EXIT_INPUT };
    let Some(a) = analyze_or_report(&p, common, err) else { return EXIT_INPUT };
    let mut rb = a.rb_by_id();
    if inject {
        for b in rb.values_mut() {
            *b = Bound::zero();
        }
    }
    let cfg = CheckConfig { trials, range, seed, schedulers: seeds.to_vec(), fuel };
    match check_bounds(&p, &rb, &a.sb_by_id(), &cfg) {
        Ok(()) => {
            let _ = writeln!(out, "ok: {trials} initial states, {} schedulers", seeds.len() + 1);
            EXIT_OK
        }
        Err(cex) => {
            let _ = writeln!(out, "counterexample: {cex}");
            EXIT_COUNTEREXAMPLE
        }
    }
}

fn cmd_graph(common: &Common, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let Some(p) = load(&common.path, err) else { return EXIT_INPUT };
    let cfg = common.smt_config();
    let prog = crate::invariants::strengthen(&p);
    let sloc = match crate::size::local_size_bounds(&prog, &cfg) {
        Ok(s) => s,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INPUT;
        }
    };
    let _ = write!(out, "{}", crate::size::build_rvg(&prog, &sloc).to_dot(&prog));
    EXIT_OK
}

/// Runs the command line `args` (including the program name) and returns the exit code.
pub fn run_cli<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = if e.use_stderr() { write!(err, "{}", e.render()) } else { write!(out, "{}", e.render()) };
            return code;
        }
    };
    match &cli.command {
        Command::Analyze { common } => cmd_analyze(common, out, err),
        Command::Run { common, init, seed, fuel, dot } => cmd_run(common, init, *seed, *fuel, *dot, out, err),
        Command::Check { common, trials, range, seed, seeds, fuel, inject } => {
            cmd_check(common, *trials, *range, *seed, seeds, *fuel, *inject, out, err)
        }
        Command::Graph { common } => cmd_graph(common, out, err),
    }
}
