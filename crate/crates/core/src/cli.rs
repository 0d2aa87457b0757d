//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on unreadable or invalid input, 2 when the
//! command ran but found nothing (no successful run, unreachable mission,
//! rejected trace).

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use crate::environment::{Environment, EnvironmentDef};
use crate::hlpn::Hlpn;
use crate::logic::Observation;
use crate::ltl::{compile_with_initial, parse_formula, CompileOptions, Formula};
use crate::robot_net::{build_robot_net, RobotDef};
use crate::simulator::{run_batch, BatchConfig, Metric, SimConfig, Trace, DEFAULT_MAX_STEPS, DEFAULT_SAMPLE_BUDGET};
use crate::spec_net::{SpecNet, SpecNetDef, SpecOpn};
use crate::verifier::{bfs_optimum, eval_ltl, observations, replay_detailed, SearchResult, DEFAULT_STATE_BOUND};

#[derive(Debug, Parser)]
#[command(name = "hlpn", version, about = "Petri-net motion planning for robot teams")]
pub struct Cli {
    /// JSON file with default values for any flag.
    #[arg(long, env = "HLPN_CONFIG", global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte-Carlo plan search; writes one trace per run.
    Plan(PlanArgs),
    /// Compile an LTL mission into a mission net (JSON and DOT).
    CompileSpec(CompileArgs),
    /// Exact optimum and witness by state-space search.
    Oracle(OracleArgs),
    /// Render the system, mission and robot nets as one DOT graph.
    ExportDot(ModelArgs),
    /// Replay traces and check them against the mission.
    CheckTrace(CheckArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct ModelArgs {
    #[arg(long)]
    pub env: Option<PathBuf>,
    #[arg(long)]
    pub robots: Option<PathBuf>,
    /// Mission net JSON, or `{"ltl": "..."}`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub metric: Option<Metric>,
    #[arg(long)]
    pub sample_budget: Option<usize>,
    /// Run simulations on all cores.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Args)]
pub struct CompileArgs {
    #[arg(long)]
    pub env: Option<PathBuf>,
    /// Formula text; alternatively `--spec` with an `{"ltl": ...}` file.
    #[arg(long)]
    pub ltl: Option<String>,
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Robots file; their initial cells fix the first observation.
    #[arg(long)]
    pub robots: Option<PathBuf>,
    /// Mission net JSON output (stdout if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// DOT output.
    #[arg(long)]
    pub dot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub metric: Option<Metric>,
    /// Maximum number of product states explored.
    #[arg(long)]
    pub bound: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// JSON-lines trace file.
    #[arg(long)]
    pub trace: PathBuf,
    /// Only check the trace with this run index.
    #[arg(long)]
    pub run: Option<u64>,
    /// Formula to evaluate instead of the one in the spec file.
    #[arg(long)]
    pub ltl: Option<String>,
}

/// Defaults read from `--config`.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub env: Option<PathBuf>,
    pub robots: Option<PathBuf>,
    pub spec: Option<PathBuf>,
    pub runs: Option<u64>,
    pub max_steps: Option<usize>,
    pub seed: Option<u64>,
    pub metric: Option<Metric>,
    pub sample_budget: Option<usize>,
    pub parallel: Option<bool>,
}

/// Fully resolved plan settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub env: PathBuf,
    pub robots: PathBuf,
    pub spec: PathBuf,
    pub runs: u64,
    pub max_steps: usize,
    pub seed: u64,
    pub metric: Metric,
    pub sample_budget: usize,
    pub parallel: bool,
    pub out: Option<PathBuf>,
}

#[derive(Debug)]
pub enum Failure {
    /// Bad or missing input; exit code 1.
    Input(String),
    /// Nothing found; exit code 2.
    Negative(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Input(_) => 1,
            Failure::Negative(_) => 2,
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn input<E: std::fmt::Display>(path: &Path) -> impl Fn(E) -> Failure + '_ {
    move |e| Failure::Input(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(input(path))
}

fn json_error(path: &Path, e: serde_json::Error) -> Failure {
    Failure::Input(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
}

fn load_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}

fn required<'a>(v: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a PathBuf> {
    v.as_ref()
        .ok_or_else(|| Failure::Input(format!("missing --{flag} (or `{flag}` in the config file)")))
}

fn load_config(path: Option<&Path>) -> CliResult<ConfigFile> {
    match path {
        Some(p) => load_json(p),
        None => Ok(ConfigFile::default()),
    }
}

pub fn load_environment(path: &Path) -> CliResult<Environment> {
    let def: EnvironmentDef = load_json(path)?;
    Environment::new(def).map_err(input(path))
}

pub fn load_robots(path: &Path) -> CliResult<Vec<RobotDef>> {
    load_json(path)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LtlSpec {
    ltl: String,
}

/// A mission given either as a net or as a formula.
#[derive(Debug, Clone)]
pub enum SpecSource {
    Net(SpecNetDef),
    Ltl(Formula),
}

pub fn load_spec(path: &Path) -> CliResult<SpecSource> {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    if value.get("ltl").is_some() {
        let s: LtlSpec = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
        parse_formula(&s.ltl).map(SpecSource::Ltl).map_err(input(path))
    } else {
        serde_json::from_str(&text)
            .map(SpecSource::Net)
            .map_err(|e| json_error(path, e))
    }
}

/// Builds the mission net. Formulas are compiled for the observation of
/// the given initial placement.
pub fn build_spec(source: &SpecSource, env: &Environment, first: Observation, origin: &Path) -> CliResult<SpecNet> {
    match source {
        SpecSource::Net(def) => SpecNet::from_def(def).map_err(input(origin)),
        SpecSource::Ltl(f) => compile_with_initial(f, env, first, CompileOptions::default()).map_err(input(origin)),
    }
}

pub struct LoadedModel {
    pub model: Hlpn,
    pub formula: Option<Formula>,
}

pub fn load_model(env: &Path, robots: &Path, spec: &Path) -> CliResult<LoadedModel> {
    let environment = load_environment(env)?;
    let defs = load_robots(robots)?;
    let opns = defs
        .iter()
        .map(|d| build_robot_net(&environment, d))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input(robots))?;
    let first = environment.observation(&opns.iter().map(|r| r.cell()).collect::<Vec<_>>());
    let source = load_spec(spec)?;
    let net = build_spec(&source, &environment, first, spec)?;
    let model = Hlpn::new(Arc::new(environment), opns, SpecOpn::new(net)).map_err(input(spec))?;
    model.initial_state().map_err(input(robots))?;
    Ok(LoadedModel {
        model,
        formula: match source {
            SpecSource::Ltl(f) => Some(f),
            SpecSource::Net(_) => None,
        },
    })
}

fn model_paths(args: &ModelArgs, cfg: &ConfigFile) -> CliResult<(PathBuf, PathBuf, PathBuf)> {
    let env = args.env.clone().or_else(|| cfg.env.clone());
    let robots = args.robots.clone().or_else(|| cfg.robots.clone());
    let spec = args.spec.clone().or_else(|| cfg.spec.clone());
    Ok((
        required(&env, "env")?.clone(),
        required(&robots, "robots")?.clone(),
        required(&spec, "spec")?.clone(),
    ))
}

pub fn resolve_plan(args: &PlanArgs, cfg: &ConfigFile) -> CliResult<RunConfig> {
    let (env, robots, spec) = model_paths(&args.model, cfg)?;
    let rc = RunConfig {
        env,
        robots,
        spec,
        runs: args.runs.or(cfg.runs).unwrap_or(100),
        max_steps: args.max_steps.or(cfg.max_steps).unwrap_or(DEFAULT_MAX_STEPS),
        seed: args.seed.or(cfg.seed).unwrap_or(0),
        metric: args.metric.or(cfg.metric).unwrap_or_default(),
        sample_budget: args.sample_budget.or(cfg.sample_budget).unwrap_or(DEFAULT_SAMPLE_BUDGET),
        parallel: args.parallel || cfg.parallel.unwrap_or(false),
        out: args.model.out.clone(),
    };
    if rc.runs == 0 {
        return Err(Failure::Input("--runs must be at least 1".into()));
    }
    if rc.max_steps == 0 {
        return Err(Failure::Input("--max-steps must be at least 1".into()));
    }
    Ok(rc)
}

fn write_output(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(input(p)),
        None => stdout
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Input(format!("stdout: {e}"))),
    }
}

pub fn cmd_plan(rc: &RunConfig, stdout: &mut dyn Write, stderr: &mut dyn Write) -> CliResult<()> {
    let loaded = load_model(&rc.env, &rc.robots, &rc.spec)?;
    let model = &loaded.model;
    let result = run_batch(
        model,
        &BatchConfig {
            master_seed: rc.seed,
            runs: rc.runs,
            sim: SimConfig {
                max_steps: rc.max_steps,
                sample_budget: rc.sample_budget,
            },
            metric: rc.metric,
            parallel: rc.parallel,
        },
    );
    if let Some(out) = &rc.out {
        let mut lines = String::new();
        for t in &result.traces {
            lines.push_str(&t.to_json());
            lines.push('\n');
        }
        std::fs::write(out, lines).map_err(input(out))?;
    }
    let summary = json!({
        "stats": result.stats,
        "timing": result.timing,
    });
    writeln!(stdout, "{}", serde_json::to_string_pretty(&summary).expect("summary serializes"))
        .map_err(|e| Failure::Input(format!("stdout: {e}")))?;
    match &result.stats.best {
        Some(best) => {
            let _ = writeln!(
                stderr,
                "best plan (run {}, {} moves, {} steps): {}",
                best.run, best.total_moves, best.sync_steps, best.plan
            );
            Ok(())
        }
        None => Err(Failure::Negative(format!(
            "no run out of {} reached a final place",
            rc.runs
        ))),
    }
}

pub fn cmd_compile_spec(args: &CompileArgs, cfg: &ConfigFile, stdout: &mut dyn Write) -> CliResult<()> {
    let env_path = args.env.clone().or_else(|| cfg.env.clone());
    let env_path = required(&env_path, "env")?;
    let env = load_environment(env_path)?;
    let (formula, origin) = match (&args.ltl, &args.spec) {
        (Some(text), _) => (
            parse_formula(text).map_err(|e| Failure::Input(format!("--ltl: {e}")))?,
            PathBuf::from("--ltl"),
        ),
        (None, Some(p)) => match load_spec(p)? {
            SpecSource::Ltl(f) => (f, p.clone()),
            SpecSource::Net(_) => {
                return Err(Failure::Input(format!("{}: not an {{\"ltl\": ...}} file", p.display())))
            }
        },
        (None, None) => return Err(Failure::Input("missing --ltl or --spec".into())),
    };
    let robots = args.robots.clone().or_else(|| cfg.robots.clone());
    let first = match &robots {
        Some(p) => {
            let defs = load_robots(p)?;
            let mut cells = Vec::new();
            for d in &defs {
                cells.push(env.cell_index(&d.initial_cell).map_err(input(p))?);
            }
            env.observation(&cells)
        }
        None => env.free_observation(),
    };
    let net = build_spec(&SpecSource::Ltl(formula), &env, first, &origin)?;
    if let Some(dot) = &args.dot {
        std::fs::write(dot, net.to_dot(Some(net.initial))).map_err(input(dot))?;
    }
    write_output(args.out.as_deref(), &(net.to_def().to_json() + "\n"), stdout)
}

pub fn cmd_oracle(args: &OracleArgs, cfg: &ConfigFile, stdout: &mut dyn Write) -> CliResult<()> {
    let (env, robots, spec) = model_paths(&args.model, cfg)?;
    let loaded = load_model(&env, &robots, &spec)?;
    let metric = args.metric.or(cfg.metric).unwrap_or_default();
    let result = bfs_optimum(&loaded.model, metric, args.bound.unwrap_or(DEFAULT_STATE_BOUND))
        .map_err(|e| Failure::Input(e.to_string()))?;
    match result {
        SearchResult::Optimal { optimum, witness } => {
            let guards: Vec<String> = witness
                .steps
                .iter()
                .map(|s| {
                    let net = loaded.model.spec().net();
                    net.transition_index(&s.spec_t)
                        .map(|t| net.transitions[t].guard.to_string())
                        .unwrap_or_default()
                })
                .collect();
            let v = json!({
                "metric": metric,
                "optimum": optimum,
                "sync_steps": witness.metric.sync_steps,
                "total_moves": witness.metric.total_moves,
                "guards": guards,
                "witness": witness,
            });
            let text = serde_json::to_string_pretty(&v).expect("serializes") + "\n";
            write_output(args.model.out.as_deref(), &text, stdout)
        }
        SearchResult::Unreachable => {
            let text = serde_json::to_string_pretty(&json!({ "metric": metric, "optimum": null })).expect("serializes") + "\n";
            write_output(args.model.out.as_deref(), &text, stdout)?;
            Err(Failure::Negative("no final place is reachable".into()))
        }
    }
}

/// One graph: the system net with its two places and |R| transitions, plus
/// a cluster per object net.
pub fn system_dot(model: &Hlpn) -> String {
    let mut s = String::from("digraph hlpn {\n  rankdir=LR;\n  compound=true;\n");
    s.push_str("  subgraph cluster_system {\n    label=\"system net\";\n");
    let n = model.team_size();
    let tokens: Vec<&str> = model.robots().iter().map(|r| r.robot_id()).collect();
    writeln!(s, "    \"Rb\" [shape=circle, label=\"Rb\\n{}\"];", tokens.join(", ")).unwrap();
    s.push_str("    \"Ms\" [shape=circle, label=\"Ms\\nspec\"];\n");
    for i in 1..=n {
        writeln!(s, "    \"t{i}\" [shape=box, label=\"t{i}\\ngef\"];").unwrap();
        writeln!(s, "    \"Rb\" -> \"t{i}\" [label=\"{i}\"];").unwrap();
        writeln!(s, "    \"t{i}\" -> \"Rb\" [label=\"{i}\"];").unwrap();
        writeln!(s, "    \"Ms\" -> \"t{i}\";").unwrap();
        writeln!(s, "    \"t{i}\" -> \"Ms\";").unwrap();
    }
    s.push_str("  }\n");
    let spec = model.spec();
    s.push_str("  subgraph cluster_spec {\n    label=\"mission\";\n");
    spec.net().write_dot_body(&mut s, "spec_", Some(spec.marked()), "    ");
    s.push_str("  }\n");
    for r in model.robots() {
        writeln!(s, "  subgraph \"cluster_{}\" {{\n    label=\"{}\";", r.robot_id(), r.robot_id()).unwrap();
        r.net().write_dot_body(&mut s, &format!("{}_", r.robot_id()), Some(r.marked()), "    ");
        s.push_str("  }\n");
    }
    s.push_str("}\n");
    s
}

pub fn cmd_export_dot(args: &ModelArgs, cfg: &ConfigFile, stdout: &mut dyn Write) -> CliResult<()> {
    let (env, robots, spec) = model_paths(args, cfg)?;
    let loaded = load_model(&env, &robots, &spec)?;
    write_output(args.out.as_deref(), &system_dot(&loaded.model), stdout)
}

pub fn cmd_check_trace(args: &CheckArgs, cfg: &ConfigFile, stdout: &mut dyn Write) -> CliResult<()> {
    let (env, robots, spec) = model_paths(&args.model, cfg)?;
    let loaded = load_model(&env, &robots, &spec)?;
    let formula = match &args.ltl {
        Some(text) => Some(parse_formula(text).map_err(|e| Failure::Input(format!("--ltl: {e}")))?),
        None => loaded.formula.clone(),
    };
    let text = read(&args.trace)?;
    let mut traces = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let t = Trace::from_json(line).map_err(|e| {
            Failure::Input(format!("{}:{}:{}: {e}", args.trace.display(), i + 1, e.column()))
        })?;
        if args.run.is_none() || t.run == args.run {
            traces.push(t);
        }
    }
    if traces.is_empty() {
        return Err(Failure::Input(format!("{}: no trace to check", args.trace.display())));
    }
    let mut all = true;
    let mut report = String::new();
    for t in &traces {
        let replayed = replay_detailed(t, &loaded.model);
        let ltl = formula
            .as_ref()
            .map(|f| eval_ltl(f, loaded.model.env().props(), &observations(t, &loaded.model)));
        let verdict = replayed.is_ok() && ltl.unwrap_or(true);
        all &= verdict;
        let v = json!({
            "run": t.run,
            "replay": replayed.is_ok(),
            "replay_error": replayed.err().map(|e| e.to_string()),
            "ltl": ltl,
            "verdict": verdict,
        });
        report.push_str(&v.to_string());
        report.push('\n');
    }
    write_output(args.model.out.as_deref(), &report, stdout)?;
    if all {
        Ok(())
    } else {
        Err(Failure::Negative("trace rejected".into()))
    }
}

/// Runs a parsed command line; returns the process exit code.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let result = load_config(cli.config.as_deref()).and_then(|cfg| match &cli.command {
        Command::Plan(a) => resolve_plan(a, &cfg).and_then(|rc| cmd_plan(&rc, stdout, stderr)),
        Command::CompileSpec(a) => cmd_compile_spec(a, &cfg, stdout),
        Command::Oracle(a) => cmd_oracle(a, &cfg, stdout),
        Command::ExportDot(a) => cmd_export_dot(a, &cfg, stdout),
        Command::CheckTrace(a) => cmd_check_trace(a, &cfg, stdout),
    });
    match result {
        Ok(()) => 0,
        Err(f) => {
            let msg = match &f {
                Failure::Input(m) => format!("error: {m}"),
                Failure::Negative(m) => m.clone(),
            };
            let _ = writeln!(stderr, "{msg}");
            f.code()
        }
    }
}
