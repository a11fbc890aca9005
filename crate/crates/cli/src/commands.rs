//! Subcommands and their exit codes.

use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand};
use pyrofront_core::fronts::write_ledger_csv;
use pyrofront_core::monitor::write_reports_ndjson;
use pyrofront_core::runner::{run_parallel, standard_strategies, RunOptions};
use pyrofront_core::strategies::StrategyContext;
use pyrofront_core::{
    new_game, Cell, FrontsTracker, HypothesisTracker, Mode, Monitor, SaveFile, ScenarioSpec, Session, StrategySpec,
};
use serde_json::{json, Map, Value};

/// Success.
pub const EXIT_OK: u8 = 0;
/// A monitor check failed or a replay diverged.
pub const EXIT_FAILED: u8 = 1;
/// Bad arguments or configuration.
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "pyrofront", version, about = "Firefighting on layered planar lattices")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Play by hand: one JSON list of [x,y,k] orders per line on stdin.
    Play(PlayArgs),
    /// Play a built-in strategy for a number of turns.
    Auto(AutoArgs),
    /// Run the monitor over a strategy suite or a saved replay.
    Verify(VerifyArgs),
    /// Scenario files.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
    /// Write the ledger as CSV or the check reports as NDJSON for a replay.
    Export(ExportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Scenario file, `{"name", "q", "h", "params"}`.
    #[arg(long, conflicts_with = "name")]
    pub scenario: Option<PathBuf>,
    /// Builder name: pyramid, canonical, single or custom.
    #[arg(long)]
    pub name: Option<String>,
    #[arg(long, default_value_t = 2)]
    pub q: u8,
    #[arg(long, default_value_t = 1)]
    pub h: u32,
    /// Builder parameter, `key=value`; values are parsed as JSON when possible.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Debug, Args)]
pub struct PlayArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, env = "PYROFRONT_MODE", default_value_t = Mode::Exploratory)]
    pub mode: Mode,
    /// Write the save file here on exit.
    #[arg(long)]
    pub save: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AutoArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub strategy: String,
    /// Strategy parameter, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub strategy_params: Vec<String>,
    #[arg(long, default_value_t = 100)]
    pub steps: u32,
    /// Keep playing after containment.
    #[arg(long)]
    pub no_stop: bool,
    #[arg(long, env = "PYROFRONT_MODE", default_value_t = Mode::Exploratory)]
    pub mode: Mode,
    #[arg(long)]
    pub save: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Scenario file for the strategy suite.
    #[arg(long, required_unless_present = "replay")]
    pub scenario: Option<PathBuf>,
    /// Number of seeded random strategies besides null and greedy.
    #[arg(long, default_value_t = 25)]
    pub seeds: u64,
    #[arg(long, default_value_t = 100)]
    pub steps: u32,
    /// Verify a saved game instead of the suite.
    #[arg(long, conflicts_with = "scenario")]
    pub replay: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum ScenarioCommand {
    /// Print a scenario file; a summary of the built scenario goes to stderr.
    Build {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Save file to replay.
    #[arg(long)]
    pub replay: PathBuf,
    /// Ledger rows as CSV (`-` for stdout).
    #[arg(long, required_unless_present = "ndjson")]
    pub csv: Option<PathBuf>,
    /// Every check report as NDJSON (`-` for stdout).
    #[arg(long)]
    pub ndjson: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
}

/// An error with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    fn config(error: anyhow::Error) -> Self {
        Self { code: EXIT_CONFIG, error }
    }
}

trait ConfigContext<T> {
    fn config_err(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> ConfigContext<T> for Result<T, E> {
    fn config_err(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::config(e.into()))
    }
}

fn parse_params(raw: &[String]) -> anyhow::Result<Map<String, Value>> {
    let mut out = Map::new();
    for kv in raw {
        let (k, v) = kv.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got {kv:?}"))?;
        let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        out.insert(k.to_string(), value);
    }
    Ok(out)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

impl ScenarioArgs {
    pub fn spec(&self) -> anyhow::Result<ScenarioSpec> {
        let mut spec = match (&self.scenario, &self.name) {
            (Some(path), _) => read_json(path)?,
            (None, Some(name)) => ScenarioSpec::new(name, self.q, self.h),
            (None, None) => bail!("give --scenario FILE or --name NAME"),
        };
        spec.params.extend(parse_params(&self.params)?);
        spec.build()?;
        Ok(spec)
    }
}

pub fn run(cli: Cli) -> Result<u8, Failure> {
    match cli.command {
        Command::Play(args) => play(args, io::stdin().lock(), io::stdout().lock()),
        Command::Auto(args) => auto(args),
        Command::Verify(args) => verify(args),
        Command::Scenario(ScenarioCommand::Build { scenario, out }) => build(scenario, out),
        Command::Export(args) => export(args),
        Command::Serve(args) => serve(args),
    }
}

fn turn_line(session: &Session) -> Value {
    let game = session.game();
    let view = session.view(None);
    json!({
        "t": game.t(),
        "burning": game.burning_count(),
        "protected": game.protected_count(),
        "contained": game.contained(),
        "remaining_budget": view.state.remaining_budget,
        "strict_remaining": view.strict_remaining,
        "hash": view.hash,
    })
}

pub fn play(args: PlayArgs, input: impl BufRead, mut out: impl Write) -> Result<u8, Failure> {
    let spec = args.scenario.spec().config_err()?;
    let mut session = Session::create(&spec, args.mode).config_err()?;
    let io_err = |e: io::Error| Failure { code: EXIT_FAILED, error: e.into() };
    writeln!(out, "{}", turn_line(&session)).map_err(io_err)?;
    for line in input.lines() {
        let line = line.map_err(io_err)?;
        let line = line.trim();
        if line == "quit" {
            break;
        }
        let orders: Vec<Cell> = if line.is_empty() {
            Vec::new()
        } else {
            match serde_json::from_str(line) {
                Ok(o) => o,
                Err(e) => {
                    writeln!(out, "{}", json!({ "error": e.to_string() })).map_err(io_err)?;
                    continue;
                }
            }
        };
        match session.step(orders) {
            Ok(_) => writeln!(out, "{}", turn_line(&session)),
            Err(e) => writeln!(out, "{}", json!({ "error": e.to_string() })),
        }
        .map_err(io_err)?;
    }
    if let Some(path) = args.save {
        write_json(&path, &session.save()).config_err()?;
    }
    Ok(EXIT_OK)
}

pub fn auto(args: AutoArgs) -> Result<u8, Failure> {
    let spec = args.scenario.spec().config_err()?;
    let mut session = Session::create(&spec, args.mode).config_err()?;
    let strategy = StrategySpec { strategy: args.strategy.clone(), params: parse_params(&args.strategy_params).config_err()? };
    let mut player = strategy.build(session.config()).config_err()?;
    let config = session.config().clone();
    let mut contained_at = None;
    for _ in 0..args.steps {
        let order = player
            .decide(&StrategyContext::new(session.game(), &config))
            .map_err(|e| Failure { code: EXIT_FAILED, error: e.into() })?;
        session.step(order.cells).map_err(|e| Failure { code: EXIT_FAILED, error: e.into() })?;
        if session.game().contained() && contained_at.is_none() {
            contained_at = Some(session.game().t());
            if !args.no_stop {
                break;
            }
        }
    }
    let game = session.game();
    let failures = session.monitor().map(|m| m.failure_count());
    if args.json {
        let report = json!({
            "scenario": spec,
            "strategy": strategy,
            "t": game.t(),
            "contained_at": contained_at,
            "burning": game.burning_count(),
            "protected": game.protected_count(),
            "orders_spent": game.orders_spent(),
            "hash": session.hashes().last(),
            "monitor_failures": failures,
        });
        println!("{report}");
    } else {
        match contained_at {
            Some(t) => println!("contained at t={t}"),
            None => println!("not contained after t={}", game.t()),
        }
        println!("burning {} protected {} orders {}", game.burning_count(), game.protected_count(), game.orders_spent());
        if let Some(n) = failures {
            println!("monitor failures {n}");
        }
    }
    if let Some(path) = args.save {
        write_json(&path, &session.save()).config_err()?;
    }
    Ok(EXIT_OK)
}

pub fn verify(args: VerifyArgs) -> Result<u8, Failure> {
    if let Some(path) = args.replay {
        let save: SaveFile = read_json(&path).config_err()?;
        let session = match Session::load(&save) {
            Ok(s) => s,
            Err(e) => {
                println!("FAIL replay: {e}");
                return Ok(EXIT_FAILED);
            }
        };
        let failures = session.monitor().map_or(0, |m| m.failure_count());
        for f in session.monitor().map(|m| m.failures()).unwrap_or_default() {
            println!("{}", serde_json::to_string(f).unwrap_or_default());
        }
        let status = if failures == 0 { "PASS" } else { "FAIL" };
        println!("{status} replay t={} hashes={} monitor_failures={failures}", session.game().t(), session.hashes().len());
        return Ok(if failures == 0 { EXIT_OK } else { EXIT_FAILED });
    }

    let path = args.scenario.expect("clap requires --scenario without --replay");
    let spec: ScenarioSpec = read_json(&path).config_err()?;
    let scenario = spec.build().config_err()?;
    if scenario.quad.is_none() {
        return Err(Failure::config(anyhow!("scenario {:?} has no fronts structure to monitor", spec.name)));
    }
    println!("{}", scenario.summary());
    let jobs: Vec<_> = standard_strategies(args.seeds).into_iter().map(|s| (scenario.clone(), s)).collect();
    let mut total = 0u64;
    for ((_, strategy), outcome) in jobs.iter().zip(run_parallel(&jobs, &RunOptions::new(args.steps))) {
        let result = outcome.map_err(|e| Failure { code: EXIT_FAILED, error: e.into() })?;
        let failures = result.monitor_failures();
        total += failures;
        for f in &result.failures {
            println!("{}", serde_json::to_string(f).unwrap_or_default());
        }
        println!(
            "{} {} {} steps={} monitor_failures={failures} hypothesis={}",
            if failures == 0 { "PASS" } else { "FAIL" },
            result.strategy,
            serde_json::to_string(&strategy.params).unwrap_or_default(),
            result.steps,
            serde_json::to_string(&result.hypothesis).unwrap_or_default(),
        );
    }
    println!("{} runs, {total} monitor failures", jobs.len());
    Ok(if total == 0 { EXIT_OK } else { EXIT_FAILED })
}

fn build(args: ScenarioArgs, out: Option<PathBuf>) -> Result<u8, Failure> {
    let spec = args.spec().config_err()?;
    let scenario = spec.build().config_err()?;
    eprintln!("{}", scenario.summary());
    match out {
        Some(path) => write_json(&path, &spec).config_err()?,
        None => println!("{}", serde_json::to_string_pretty(&spec).config_err()?),
    }
    Ok(EXIT_OK)
}

fn sink(path: &Path) -> anyhow::Result<Box<dyn Write>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdout().lock()))
    } else {
        let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        Ok(Box::new(io::BufWriter::new(file)))
    }
}

pub fn export(args: ExportArgs) -> Result<u8, Failure> {
    let save: SaveFile = read_json(&args.replay).config_err()?;
    let scenario = save.scenario.build().config_err()?;
    let quad = scenario
        .quad
        .clone()
        .ok_or_else(|| anyhow!("scenario {:?} has no fronts structure", save.scenario.name))
        .config_err()?;
    let failed = |e: anyhow::Error| Failure { code: EXIT_FAILED, error: e };
    let config = &scenario.config;
    let mut game = new_game(config).config_err()?;
    let mut tracker = FrontsTracker::new(scenario.kind, quad, &game).config_err()?;
    let hypothesis =
        HypothesisTracker::new(scenario.kind, tracker.lambda(), tracker.phi(0).unwrap_or(0), scenario.rate_ok());
    let mut monitor = Monitor::new(scenario.kind, Some(hypothesis)).record_all(true);
    monitor.observe_initial(&tracker);
    for entry in &save.replay {
        game.apply(&pyrofront_core::ProtectionOrder::new(entry.orders.clone()), config)
            .map_err(|e| failed(e.into()))?;
        let record = tracker.advance(&game).map_err(|e| failed(e.into()))?;
        monitor.observe(&record, &tracker, &game);
    }
    if let Some(path) = &args.csv {
        let mut out = sink(path).map_err(failed)?;
        write_ledger_csv(tracker.rows(), &mut out).map_err(|e| failed(e.into()))?;
        out.flush().map_err(|e| failed(e.into()))?;
    }
    if let Some(path) = &args.ndjson {
        let mut out = sink(path).map_err(failed)?;
        write_reports_ndjson(monitor.reports(), &mut out).map_err(|e| failed(e.into()))?;
        out.flush().map_err(|e| failed(e.into()))?;
    }
    Ok(EXIT_OK)
}

fn serve(args: ServeArgs) -> Result<u8, Failure> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure { code: EXIT_FAILED, error: e.into() })?;
    runtime
        .block_on(crate::server::serve(&args.host, args.port))
        .map_err(|e| Failure { code: EXIT_FAILED, error: e })?;
    Ok(EXIT_OK)
}
