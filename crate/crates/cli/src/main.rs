//! `hrlnav` command-line front end.
//!
//! Exit codes: 0 success, 2 configuration or argument error, 3 runtime
//! failure (including non-finite training values), 4 I/O failure or an
//! unreadable/corrupt input file.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use hrlnav::benchmarks::{comparison_table, evaluate, write_comparison_csv, EvalError, MetricsReport};
use hrlnav::config::{ConfigError, RunConfig};
use hrlnav::hierarchy::{
    describe_bundle, load_bundle, read_log, write_log_header, write_log_row, LearnerKind, Learner, LogError,
    TrainError, Trainer, TrainingMode,
};
use hrlnav::neuralnet::{Checkpoint, CheckpointError};
use hrlnav::plot;
use hrlnav::policy::{PolicyContext, PolicyError, PolicyRegistry};
use hrlnav::simworld::World;

/// Overrides the output directory of every subcommand.
const OUTPUT_DIR_ENV: &str = "HRLNAV_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "hrlnav", version, about = "Hierarchical DQN + TD3 robot navigation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a flat TD3 controller or the DQN + TD3 hierarchy.
    Train(TrainArgs),
    /// Evaluate a checkpoint (or scripted policy) and write a metrics report.
    Eval(EvalArgs),
    /// Render reward and loss curves from training logs as SVG.
    Plot(PlotArgs),
    /// Compare checkpoints and scripted baselines on the same seeded episodes.
    Bench(BenchArgs),
    /// Print a checkpoint's metadata and network shapes.
    InspectCheckpoint(InspectArgs),
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in world name (`empty`, `corridor`) or world file; repeatable.
    #[arg(long = "world")]
    worlds: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Episode step cap.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// `td3` (flat) or `hrl` (hierarchical).
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    episodes: Option<u64>,
    /// joint, alternating, frozen_high or frozen_low.
    #[arg(long)]
    training_mode: Option<String>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Continue a run from one of its checkpoints.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    /// Registered policy name; defaults to the checkpoint's own kind.
    #[arg(long)]
    policy: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    /// A* reference grid resolution in metres (0 disables it).
    #[arg(long)]
    astar_resolution: Option<f64>,
}

#[derive(Args)]
struct PlotArgs {
    /// Training log CSV files.
    #[arg(required = true)]
    logs: Vec<PathBuf>,
    /// Moving-average window in episodes.
    #[arg(long, default_value_t = 100)]
    window: usize,
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Trained checkpoints to compare; repeatable.
    #[arg(long = "checkpoint")]
    checkpoints: Vec<PathBuf>,
    /// Extra registered policies (scripted baselines); repeatable.
    #[arg(long = "policy")]
    policies: Vec<String>,
    #[arg(long)]
    episodes: Option<usize>,
    #[arg(long)]
    astar_resolution: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    checkpoint: PathBuf,
}

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn config(m: impl Into<String>) -> Self {
        Self { code: 2, message: m.into() }
    }

    fn runtime(m: impl Into<String>) -> Self {
        Self { code: 3, message: m.into() }
    }

    fn io(m: impl Into<String>) -> Self {
        Self { code: 4, message: m.into() }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => CliError::io(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        CliError::io(format!("checkpoint: {e}"))
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Config(_) | TrainError::Hierarchy(_) => CliError::config(e.to_string()),
            TrainError::Checkpoint(c) => c.into(),
            TrainError::Observer(m) => CliError::io(m),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Agent(_) => CliError::runtime(e.to_string()),
            _ => CliError::config(e.to_string()),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Policy(p) => p.into(),
            EvalError::Empty => CliError::config(e.to_string()),
            other => CliError::runtime(other.to_string()),
        }
    }
}

impl From<LogError> for CliError {
    fn from(e: LogError) -> Self {
        CliError::io(e.to_string())
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::io(format!("{}: {e}", path.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Plot(a) => cmd_plot(a),
        Command::Bench(a) => cmd_bench(a),
        Command::InspectCheckpoint(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

/// Config file (or defaults) with the shared flags applied.
fn resolve_config(common: &CommonArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if !common.worlds.is_empty() {
        cfg.worlds = common.worlds.clone();
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(m) = common.max_steps {
        cfg.env.max_steps = m;
    }
    cfg.output_dir = output_dir(common.output_dir.as_ref(), &cfg.output_dir);
    Ok(cfg)
}

/// Flag, then environment variable, then config value.
fn output_dir(flag: Option<&PathBuf>, configured: &Path) -> PathBuf {
    if let Some(p) = flag {
        return p.clone();
    }
    match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => configured.to_path_buf(),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn load_worlds(names: &[String]) -> Result<Vec<Arc<World>>, CliError> {
    names.iter().map(|n| hrlnav::config::resolve_world(n).map(Arc::new).map_err(CliError::from)).collect()
}

fn load_checkpoint(path: &Path) -> Result<Checkpoint, CliError> {
    if !path.exists() {
        return Err(io_err(path, "no such checkpoint"));
    }
    Checkpoint::load(path).map_err(|e| io_err(path, e))
}

fn cmd_train(a: TrainArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(m) = &a.mode {
        cfg.mode = LearnerKind::parse(m).ok_or_else(|| CliError::config(format!("unknown mode `{m}` (expected td3 or hrl)")))?;
    }
    if let Some(n) = a.episodes {
        cfg.training.episodes = n;
    }
    if let Some(m) = &a.training_mode {
        cfg.hierarchy.training_mode = parse_training_mode(m)?;
    }
    if let Some(n) = a.checkpoint_every {
        cfg.training.checkpoint_every = n;
    }
    cfg.validate()?;
    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let ckpt_dir = out.join("checkpoints");

    let mut trainer = match &a.resume {
        Some(path) => {
            let ck = load_checkpoint(path)?;
            let (learner, state) = load_bundle(&ck)?;
            let mut state = state.ok_or_else(|| CliError::config(format!("{}: not a training checkpoint", path.display())))?;
            // The run keeps its worlds unless they are named explicitly.
            if !a.common.worlds.is_empty() || a.common.config.is_some() || state.worlds.is_empty() {
                state.worlds = cfg.worlds.clone();
            }
            if let Some(n) = a.episodes {
                state.config.episodes = n.max(state.episode);
            }
            let worlds = load_worlds(&state.worlds)?;
            Trainer::resume(learner, &worlds, state)?
        }
        None => {
            let worlds = cfg.load_worlds()?;
            let learner = Learner::new(cfg.mode, cfg.learner_setup(), cfg.seed)?;
            let mut t = Trainer::new(learner, &worlds, cfg.training.clone(), cfg.seed)?;
            t.state.worlds = cfg.worlds.clone();
            write_file(&out.join("config.toml"), cfg.to_toml().as_bytes())?;
            t
        }
    };

    let log_path = out.join("train_log.csv");
    let appending = a.resume.is_some() && log_path.exists();
    let file = fs::OpenOptions::new()
        .create(true)
        .append(appending)
        .write(true)
        .truncate(!appending)
        .open(&log_path)
        .map_err(|e| io_err(&log_path, e))?;
    let mut log = csv::Writer::from_writer(file);
    if !appending {
        write_log_header(&mut log).map_err(|e| io_err(&log_path, e))?;
    }
    let every = trainer.state.config.checkpoint_every;
    let total = trainer.state.config.episodes;
    let mut goals = 0u64;
    let result = trainer.run(|t, _record, row| {
        write_log_row(&mut log, row).map_err(|e| TrainError::Observer(format!("{}: {e}", log_path.display())))?;
        log.flush().map_err(|e| TrainError::Observer(format!("{}: {e}", log_path.display())))?;
        if row.outcome == hrlnav::simworld::OutcomeKind::GoalReached {
            goals += 1;
        }
        let done = t.state.episode;
        if every > 0 && done % every == 0 {
            fs::create_dir_all(&ckpt_dir).map_err(|e| TrainError::Observer(format!("{}: {e}", ckpt_dir.display())))?;
            let p = ckpt_dir.join(format!("episode_{done:06}.ckpt"));
            t.checkpoint().save(&p).map_err(|e| TrainError::Observer(format!("{}: {e}", p.display())))?;
        }
        if done % 100 == 0 || done == total {
            eprintln!("episode {done}/{total}: {goals} goals in the last block");
            goals = 0;
        }
        Ok(())
    });
    if let Err(e) = result {
        let episode = trainer.state.episode;
        let mut err = CliError::from(e);
        err.message = format!("training stopped at episode {episode}: {}", err.message);
        return Err(err);
    }
    let final_path = out.join("final.ckpt");
    trainer.checkpoint().save(&final_path).map_err(|e| io_err(&final_path, e))?;
    println!("trained {} episodes; log {}; checkpoint {}", trainer.state.episode, log_path.display(), final_path.display());
    Ok(())
}

fn parse_training_mode(s: &str) -> Result<TrainingMode, CliError> {
    Ok(match s {
        "joint" => TrainingMode::Joint,
        "alternating" => TrainingMode::Alternating,
        "frozen_high" => TrainingMode::FrozenHigh,
        "frozen_low" => TrainingMode::FrozenLow,
        other => return Err(CliError::config(format!("unknown training mode `{other}`"))),
    })
}

/// A loaded checkpoint together with the worlds it was trained on.
struct LoadedAgent {
    learner: Arc<Learner>,
    trained_worlds: Vec<String>,
}

fn load_agent(path: &Path) -> Result<LoadedAgent, CliError> {
    let ck = load_checkpoint(path)?;
    let (learner, state) = load_bundle(&ck)?;
    Ok(LoadedAgent { learner: Arc::new(learner), trained_worlds: state.map(|s| s.worlds).unwrap_or_default() })
}

fn cmd_eval(a: EvalArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(n) = a.episodes {
        cfg.eval.episodes = n;
    }
    if let Some(r) = a.astar_resolution {
        cfg.eval.astar_resolution = r;
    }
    if let Some(s) = a.common.seed {
        cfg.eval.seed = s;
    }
    let agent = a.checkpoint.as_deref().map(load_agent).transpose()?;
    let registry = PolicyRegistry::with_builtins();
    let policy_name = match (&a.policy, &agent) {
        (Some(p), _) => p.clone(),
        (None, Some(ag)) => ag.learner.kind.as_str().to_string(),
        (None, None) => return Err(CliError::config("eval needs --checkpoint or --policy")),
    };
    let ctx = PolicyContext { learner: agent.as_ref().map(|ag| Arc::clone(&ag.learner)) };
    let mut policy = registry.build(&policy_name, &ctx)?;
    let world_names = pick_worlds(&a.common, &cfg, agent.as_ref());
    let worlds = load_worlds(&world_names)?;
    let mut env = agent.as_ref().map(|ag| ag.learner.setup.env.clone()).unwrap_or_else(|| cfg.env.clone());
    if let Some(m) = a.common.max_steps {
        env.max_steps = m;
    }
    let report = evaluate(policy.as_mut(), &worlds, &env, &cfg.eval.options())?;

    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let mut csv_bytes = Vec::new();
    report.write_csv(&mut csv_bytes).map_err(|e| CliError::io(e.to_string()))?;
    write_file(&out.join("eval_report.csv"), &csv_bytes)?;
    let summary = report.summary();
    write_file(&out.join("eval_summary.txt"), summary.as_bytes())?;
    write_overlay(&out.join("eval_trajectories.svg"), &worlds[0], &report)?;
    print!("{summary}");
    Ok(())
}

/// Explicit `--world` flags, then a config file's list, then the worlds the
/// checkpoint was trained on, then the config default.
fn pick_worlds(common: &CommonArgs, cfg: &RunConfig, agent: Option<&LoadedAgent>) -> Vec<String> {
    if !common.worlds.is_empty() || common.config.is_some() {
        return cfg.worlds.clone();
    }
    match agent {
        Some(ag) if !ag.trained_worlds.is_empty() => ag.trained_worlds.clone(),
        _ => cfg.worlds.clone(),
    }
}

fn write_overlay(path: &Path, world: &World, report: &MetricsReport) -> Result<(), CliError> {
    let traces: Vec<(String, Vec<_>)> = report
        .rows
        .iter()
        .filter(|r| r.world == world.name)
        .take(10)
        .map(|r| (format!("episode {} ({})", r.episode, r.outcome.as_str()), r.trajectory.clone()))
        .collect();
    write_file(path, plot::trajectory_overlay(world, &traces).as_bytes())
}

fn cmd_plot(a: PlotArgs) -> Result<(), CliError> {
    let out = output_dir(a.output_dir.as_ref(), Path::new("."));
    create_dir(&out)?;
    for path in &a.logs {
        let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
        let rows = read_log(file).map_err(|e| io_err(path, e))?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("log");
        let reward = plot::reward_chart(&rows, a.window).ok_or_else(|| io_err(path, "no finite rewards to plot"))?;
        let reward_path = out.join(format!("{stem}_reward.svg"));
        write_file(&reward_path, reward.as_bytes())?;
        println!("{}", reward_path.display());
        match plot::loss_chart(&rows, a.window) {
            Some(svg) => {
                let p = out.join(format!("{stem}_loss.svg"));
                write_file(&p, svg.as_bytes())?;
                println!("{}", p.display());
            }
            None => eprintln!("{}: no loss values logged; skipping loss curve", path.display()),
        }
    }
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), CliError> {
    let mut cfg = resolve_config(&a.common)?;
    if let Some(n) = a.episodes {
        cfg.eval.episodes = n;
    }
    if let Some(r) = a.astar_resolution {
        cfg.eval.astar_resolution = r;
    }
    if let Some(s) = a.common.seed {
        cfg.eval.seed = s;
    }
    if a.checkpoints.is_empty() {
        return Err(CliError::config("bench needs at least one --checkpoint"));
    }
    let agents: Vec<(String, LoadedAgent)> = a
        .checkpoints
        .iter()
        .map(|p| {
            let label = p.file_stem().and_then(|s| s.to_str()).unwrap_or("checkpoint").to_string();
            load_agent(p).map(|ag| (label, ag))
        })
        .collect::<Result<_, _>>()?;
    let world_names = pick_worlds(&a.common, &cfg, agents.first().map(|(_, ag)| ag));
    let worlds = load_worlds(&world_names)?;
    let mut env = agents[0].1.learner.setup.env.clone();
    if let Some(m) = a.common.max_steps {
        env.max_steps = m;
    }
    let registry = PolicyRegistry::with_builtins();
    let options = cfg.eval.options();
    let mut reports = Vec::new();
    for (i, (label, ag)) in agents.iter().enumerate() {
        let ctx = PolicyContext { learner: Some(Arc::clone(&ag.learner)) };
        let mut names = vec![ag.learner.kind.as_str().to_string()];
        if ag.learner.kind == LearnerKind::Hierarchical {
            names.push("hrl-random-high".into());
        }
        for name in names {
            let mut policy = registry.build(&name, &ctx)?;
            let mut report = evaluate(policy.as_mut(), &worlds, &env, &options)?;
            report.policy = format!("{name}[{i}:{label}]");
            reports.push(report);
        }
    }
    let baselines = if a.policies.is_empty() { vec!["goal-seeker".to_string(), "random".to_string()] } else { a.policies.clone() };
    for name in &baselines {
        let ctx = PolicyContext { learner: Some(Arc::clone(&agents[0].1.learner)) };
        let mut policy = registry.build(name, &ctx)?;
        reports.push(evaluate(policy.as_mut(), &worlds, &env, &options)?);
    }

    let out = cfg.output_dir.clone();
    create_dir(&out)?;
    let mut bytes = Vec::new();
    write_comparison_csv(&reports, &mut bytes).map_err(|e| CliError::io(e.to_string()))?;
    write_file(&out.join("bench_comparison.csv"), &bytes)?;
    for (i, r) in reports.iter().enumerate() {
        let mut b = Vec::new();
        r.write_csv(&mut b).map_err(|e| CliError::io(e.to_string()))?;
        write_file(&out.join(format!("bench_{i:02}.csv")), &b)?;
    }
    let table = comparison_table(&reports);
    write_file(&out.join("bench_summary.txt"), table.as_bytes())?;
    print!("{table}");
    std::io::stdout().flush().map_err(|e| CliError::io(e.to_string()))?;
    Ok(())
}

fn cmd_inspect(a: InspectArgs) -> Result<(), CliError> {
    let ck = load_checkpoint(&a.checkpoint)?;
    print!("{}", describe_bundle(&ck)?);
    Ok(())
}
