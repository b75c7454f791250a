//! The four subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use emberline::bench::{run_benchmark, BenchConfig, BenchMode};
use emberline::calibration::{
    burn_probability_map, calibrate, iou, threshold_mask, CalibrationError, CalibrationOptions, CalibrationResult,
    CalibrationTarget, LossConfig, SelfCalibrationSetup, SelfCalibrationTask,
};
use emberline::geodata::{parse_ascii_grid, Raster};
use emberline::rl::{
    episode_key, run_batch_episodes, run_episode, smooth, train_reinforce, EnvConfig, FireEnv, HeuristicPolicy,
    LinearSoftmaxPolicy, Policy, RandomPolicy, ReturnStats, RlError, TrainOptions,
};
use emberline::{
    fire_fraction_stats, run_deterministic, run_stochastic, ContinuousState, Dims, FireFractions, RngKey, RunOptions,
    SimConfig, SpreadParams,
};

use crate::manifest::Manifest;
use crate::options::{create_dir, read_text, record_spread, write_text, LandscapeArgs, SpreadArgs};
use crate::snapshot::{write_all, AgentMarker, Snapshot};
use crate::CliError;

const PARAM_NAMES: [&str; 6] = SpreadParams::<f64>::NAMES;

fn print_fractions(label: &str, f: &FireFractions) {
    println!(
        "{label}: unburned {:.4} burning {:.4} burned {:.4}",
        f.unburned, f.burning, f.burned
    );
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RunMode {
    Stochastic,
    Deterministic,
}

impl RunMode {
    fn name(self) -> &'static str {
        match self {
            RunMode::Stochastic => "stochastic",
            RunMode::Deterministic => "deterministic",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub landscape: LandscapeArgs,
    #[command(flatten)]
    pub spread: SpreadArgs,
    /// Number of time steps.
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, value_enum, default_value_t = RunMode::Stochastic)]
    pub mode: RunMode,
    /// Seed of the stochastic run.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write every intermediate state to trajectory.snap.
    #[arg(long)]
    pub record: bool,
    #[arg(long, default_value = "emberline-out")]
    pub out_dir: PathBuf,
    /// Replay the options stored in a manifest; flags given explicitly win.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

pub fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let land = args.landscape.build()?;
    let cfg = args.spread.resolve(SimConfig::default())?;
    let grid = &land.grid;
    let initial = grid.fire().clone();
    let opts = if args.record {
        RunOptions::recorded(args.steps)
    } else {
        RunOptions::steps(args.steps)
    };
    let engine_err = |e: emberline::engine::EngineError| CliError::Input(e.to_string());

    let started = Instant::now();
    let (final_fire, trajectory, fractions, burn_map) = match args.mode {
        RunMode::Stochastic => {
            let out = run_stochastic(&initial, grid, &cfg, RngKey::new(args.seed), &opts).map_err(engine_err)?;
            let f = fire_fraction_stats(&out.final_state);
            (out.final_state, out.trajectory, f, None)
        }
        RunMode::Deterministic => {
            let start = ContinuousState::from_fire(&initial);
            let out = run_deterministic(&start, grid, &cfg.params(), &opts).map_err(engine_err)?;
            let f = fire_fraction_stats(&out.final_state);
            let traj = out.trajectory.iter().map(|s| s.most_likely_fire()).collect();
            let map = burn_probability_map(&out.final_state);
            (out.final_state.most_likely_fire(), traj, f, Some(map))
        }
    };
    eprintln!("simulated {} steps in {:.3} s", args.steps, started.elapsed().as_secs_f64());

    create_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("initial.snap"), &Snapshot::new(initial, 0).to_text())?;
    write_text(
        &args.out_dir.join("final.snap"),
        &Snapshot::new(final_fire, args.steps).to_text(),
    )?;
    if args.record {
        let snaps: Vec<Snapshot> = trajectory
            .into_iter()
            .enumerate()
            .map(|(t, fire)| Snapshot::new(fire, t))
            .collect();
        write_text(&args.out_dir.join("trajectory.snap"), &write_all(&snaps))?;
    }
    if let Some(map) = burn_map {
        let raster = Raster::from_model(grid.dims(), land.cellsize, None, &map)
            .map_err(|e| CliError::Input(e.to_string()))?;
        write_text(
            &args.out_dir.join("burn_probability.asc"),
            &emberline::geodata::write_ascii_grid(&raster),
        )?;
    }

    let mut m = Manifest::new("run");
    args.landscape.record(&mut m);
    record_spread(&mut m, &cfg);
    m.set("steps", args.steps)
        .set("mode", args.mode.name())
        .set("seed", args.seed)
        .set("record", args.record);
    write_text(&args.out_dir.join("manifest.txt"), &m.to_text())?;

    print_fractions(&format!("step {}", args.steps), &fractions);
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct CalibrateArgs {
    #[command(flatten)]
    pub landscape: LandscapeArgs,
    /// Starting parameters.
    #[command(flatten)]
    pub spread: SpreadArgs,
    /// Observed burn mask, an ASCII grid of 0/1 values.
    #[arg(long)]
    pub target: Option<PathBuf>,
    /// Steps between ignition and the observed mask.
    #[arg(long, default_value_t = 30)]
    pub horizon: usize,
    #[arg(long, default_value_t = 1.0)]
    pub bce_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mse_weight: f64,
    #[arg(long, default_value_t = 4)]
    pub pool_size: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub bce_epsilon: f64,
    #[arg(long, default_value_t = 300)]
    pub iterations: usize,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    /// Probability at which the prediction counts as burned when scoring IoU.
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Parameters to hold fixed, comma separated (p_base, alpha_w1, ...).
    #[arg(long, value_delimiter = ',')]
    pub fix: Vec<String>,
    /// Recover known parameters from a synthetic target instead of fitting `--target`.
    #[arg(long)]
    pub self_test: bool,
    /// Seed of the self-test landscape and starting point.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value = "emberline-out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn calibration_error(e: CalibrationError) -> CliError {
    match e {
        CalibrationError::NonFiniteLoss { .. } | CalibrationError::NonFiniteGradient { .. } => {
            CliError::Numerical(e.to_string())
        }
        CalibrationError::InvalidLossConfig(_)
        | CalibrationError::InvalidParameter(_)
        | CalibrationError::HorizonTooLong { .. } => CliError::Usage(e.to_string()),
        _ => CliError::Input(e.to_string()),
    }
}

fn read_mask(path: &Path, dims: Dims) -> Result<Vec<bool>, CliError> {
    let raster = parse_ascii_grid(read_text(path)?.as_bytes())
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if raster.dims() != dims {
        return Err(CliError::Input(format!(
            "{}: target is {}x{}, landscape is {}x{}",
            path.display(),
            raster.nrows,
            raster.ncols,
            dims.height,
            dims.width
        )));
    }
    let model = raster.model_values();
    let mut mask = Vec::with_capacity(model.len());
    for (i, &v) in model.iter().enumerate() {
        if raster.is_nodata_value(v) || v == 0.0 {
            mask.push(false);
        } else if v == 1.0 {
            mask.push(true);
        } else {
            let cell = dims.cell(i);
            return Err(CliError::Input(format!(
                "{}: value {v} at row {} col {} is not 0 or 1",
                path.display(),
                cell.row,
                cell.col
            )));
        }
    }
    Ok(mask)
}

fn calibration_log(result: &CalibrationResult) -> String {
    let mut s = format!("# iteration loss {}\n", PARAM_NAMES.join(" "));
    for rec in &result.history {
        let _ = write!(s, "{} {}", rec.iteration, rec.loss);
        for v in rec.params.to_array() {
            let _ = write!(s, " {v}");
        }
        s.push('\n');
    }
    s
}

pub fn cmd_calibrate(args: &CalibrateArgs) -> Result<(), CliError> {
    let lc = LossConfig {
        bce_weight: args.bce_weight,
        mse_weight: args.mse_weight,
        pool_size: args.pool_size,
        bce_epsilon: args.bce_epsilon,
    };
    let mut fixed = [false; 6];
    for name in &args.fix {
        let i = PARAM_NAMES
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| CliError::Usage(format!("--fix: unknown parameter {name:?}")))?;
        fixed[i] = true;
    }

    let mut m = Manifest::new("calibrate");
    let started = Instant::now();
    let (report, initial_loss, iou_value, truth) = if args.self_test {
        if fixed.iter().any(|&f| f) {
            return Err(CliError::Usage("--fix cannot be combined with --self-test".into()));
        }
        let task = SelfCalibrationTask::new(&SelfCalibrationSetup::default(), args.seed).map_err(calibration_error)?;
        let report = task.run(&lc, args.iterations, args.lr).map_err(calibration_error)?;
        let initial = report.initial_loss;
        let score = report.iou;
        (report.result, initial, score, Some(task.truth))
    } else {
        let target_path = args
            .target
            .as_ref()
            .ok_or_else(|| CliError::Usage("calibrate needs --target or --self-test".into()))?;
        let land = args.landscape.build()?;
        let grid = &land.grid;
        let mask = read_mask(target_path, grid.dims())?;
        let target = CalibrationTarget::new(grid.dims(), mask, args.horizon).map_err(calibration_error)?;
        let init = args.spread.resolve(SimConfig::default())?.params();
        let initial = ContinuousState::from_fire(grid.fire());
        let mut opts = CalibrationOptions::new(init, args.iterations);
        opts.lr = args.lr;
        opts.fixed = fixed;
        let result = calibrate(grid, &initial, &target, &lc, &opts).map_err(calibration_error)?;
        let end = run_deterministic(&initial, grid, &result.best, &RunOptions::steps(args.horizon))
            .map_err(|e| CliError::Input(e.to_string()))?;
        let pred = threshold_mask(&burn_probability_map(&end.final_state), args.threshold);
        let score = iou(&pred, target.mask());
        let initial_loss = result.history[0].loss;

        args.landscape.record(&mut m);
        record_spread(&mut m, &SimConfig::default().with_params(init));
        m.set("target", target_path.display());
        if !args.fix.is_empty() {
            m.set("fix", args.fix.join(","));
        }
        (result, initial_loss, score, None)
    };
    eprintln!(
        "calibrated {} iterations in {:.3} s",
        args.iterations,
        started.elapsed().as_secs_f64()
    );

    create_dir(&args.out_dir)?;
    write_text(&args.out_dir.join("calibration.log"), &calibration_log(&report))?;

    let mut summary = String::new();
    let _ = writeln!(summary, "iterations = {}", args.iterations);
    let _ = writeln!(summary, "initial_loss = {initial_loss}");
    let _ = writeln!(summary, "best_loss = {}", report.best_loss);
    let _ = writeln!(summary, "loss_ratio = {}", report.best_loss / initial_loss);
    let _ = writeln!(summary, "iou = {iou_value}");
    for (name, v) in PARAM_NAMES.iter().zip(report.best.to_array()) {
        let _ = writeln!(summary, "{name} = {v}");
    }
    if let Some(truth) = &truth {
        for (name, v) in PARAM_NAMES.iter().zip(truth.to_array()) {
            let _ = writeln!(summary, "true_{name} = {v}");
        }
    }
    write_text(&args.out_dir.join("calibration_summary.txt"), &summary)?;

    m.set("self-test", args.self_test)
        .set("seed", args.seed)
        .set("horizon", args.horizon)
        .set("bce-weight", args.bce_weight)
        .set("mse-weight", args.mse_weight)
        .set("pool-size", args.pool_size)
        .set("bce-epsilon", args.bce_epsilon)
        .set("iterations", args.iterations)
        .set("lr", args.lr)
        .set("threshold", args.threshold);
    write_text(&args.out_dir.join("manifest.txt"), &m.to_text())?;

    println!(
        "initial loss {initial_loss:.6} best loss {:.6} ratio {:.4} iou {iou_value:.4}",
        report.best_loss,
        report.best_loss / initial_loss
    );
    let fitted: Vec<String> = PARAM_NAMES
        .iter()
        .zip(report.best.to_array())
        .map(|(n, v)| format!("{n}={v:.4}"))
        .collect();
    println!("fitted {}", fitted.join(" "));
    if args.self_test {
        if iou_value > 0.8 {
            println!("self-test PASS (iou {iou_value:.4} > 0.8)");
        } else {
            return Err(CliError::Numerical(format!(
                "self-test failed: iou {iou_value:.4} is not above 0.8"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BenchModeArg {
    Stochastic,
    Deterministic,
    Both,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    /// Grid sizes, comma separated: N for NxN or HxW.
    #[arg(long, value_delimiter = ',', default_value = "64", value_parser = parse_size)]
    pub grid_sizes: Vec<Dims>,
    /// Batch sizes, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,16")]
    pub batch_sizes: Vec<usize>,
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    /// Timed runs per row, after one untimed warm-up.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, value_enum, default_value_t = BenchModeArg::Both)]
    pub mode: BenchModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn parse_size(s: &str) -> Result<Dims, String> {
    let num = |t: &str| -> Result<usize, String> {
        match t.trim().parse::<usize>() {
            Ok(n) if n >= 2 => Ok(n),
            _ => Err(format!("grid size {s:?} needs integers of at least 2")),
        }
    };
    match s.split_once(['x', 'X']) {
        Some((h, w)) => Ok(Dims::new(num(h)?, num(w)?)),
        None => {
            let n = num(s)?;
            Ok(Dims::new(n, n))
        }
    }
}

pub fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    if args.steps == 0 || args.repeats == 0 || args.batch_sizes.iter().any(|&b| b == 0) {
        return Err(CliError::Usage("steps, repeats and batch sizes must be at least 1".into()));
    }
    let modes: &[BenchMode] = match args.mode {
        BenchModeArg::Stochastic => &[BenchMode::Stochastic],
        BenchModeArg::Deterministic => &[BenchMode::Deterministic],
        BenchModeArg::Both => &[BenchMode::Stochastic, BenchMode::Deterministic],
    };
    println!(
        "{:>9} {:>6} {:>13} {:>8} {:>22} {:>24} {:>7}",
        "grid", "batch", "mode", "rng", "steps/s (mean±std)", "cell-steps/s (mean±std)", "repeats"
    );
    for &dims in &args.grid_sizes {
        for &batch in &args.batch_sizes {
            for &mode in modes {
                let mut cfg = BenchConfig::new(dims, batch, mode);
                cfg.steps = args.steps;
                cfg.repeats = args.repeats;
                cfg.seed = args.seed;
                let r = run_benchmark(&cfg).map_err(|e| CliError::Usage(e.to_string()))?;
                let (sm, ss) = r.steps_per_sec();
                let (cm, cs) = r.cell_steps_per_sec();
                let rng = match mode {
                    BenchMode::Stochastic => "included",
                    BenchMode::Deterministic => "excluded",
                };
                println!(
                    "{:>9} {:>6} {:>13} {:>8} {:>22} {:>24} {:>7}",
                    format!("{}x{}", dims.height, dims.width),
                    batch,
                    mode.to_string(),
                    rng,
                    format!("{sm:.1}±{ss:.1}"),
                    format!("{cm:.3e}±{cs:.1e}"),
                    r.run_seconds.len()
                );
            }
        }
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    println!("available cores: {cores}");
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    /// 20x20 grid with near-critical spread.
    Default,
    /// 10x10 grid with slow spread, used for training.
    SlowSpread,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyKind {
    Random,
    Heuristic,
    /// Train a linear softmax policy with REINFORCE, then evaluate it.
    Train,
}

#[derive(Debug, Clone, Args)]
pub struct RlDemoArgs {
    #[arg(long, value_enum, default_value_t = Preset::Default)]
    pub preset: Preset,
    #[arg(long)]
    pub height: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub view_radius: Option<usize>,
    /// Water drops per episode.
    #[arg(long)]
    pub water: Option<u32>,
    /// Penalty per burning cell per step.
    #[arg(long)]
    pub burn_penalty: Option<f64>,
    #[arg(long)]
    pub max_steps: Option<usize>,
    #[arg(long)]
    pub wind_speed: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub wind_direction: Option<f64>,
    #[arg(long)]
    pub ignitions: Option<usize>,
    /// Only consume water when the drop lands on a burning cell.
    #[arg(long)]
    pub no_waste: bool,
    #[command(flatten)]
    pub spread: SpreadArgs,
    #[arg(long, value_enum, default_value_t = PolicyKind::Heuristic)]
    pub policy: PolicyKind,
    /// Episodes to run, or training episodes with `--policy train`
    /// (defaults 200 and 10000).
    #[arg(long)]
    pub episodes: Option<usize>,
    /// Evaluation episodes after training.
    #[arg(long, default_value_t = 200)]
    pub eval_episodes: usize,
    #[arg(long, default_value_t = 0.03)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.9)]
    pub discount: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write episode traces here.
    #[arg(long)]
    pub trace_dir: Option<PathBuf>,
    /// Number of traced episodes.
    #[arg(long, default_value_t = 1)]
    pub traces: usize,
    #[arg(long, default_value = "emberline-out")]
    pub out_dir: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn rl_error(e: RlError) -> CliError {
    match e {
        RlError::NonFiniteParameters { .. } => CliError::Numerical(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    }
}

impl RlDemoArgs {
    fn env_config(&self) -> Result<EnvConfig, CliError> {
        let mut cfg = match self.preset {
            Preset::Default => EnvConfig::default(),
            Preset::SlowSpread => EnvConfig::slow_spread(),
        };
        cfg.dims = Dims::new(
            self.height.unwrap_or(cfg.dims.height),
            self.width.unwrap_or(cfg.dims.width),
        );
        cfg.view_radius = self.view_radius.unwrap_or(cfg.view_radius);
        cfg.water_capacity = self.water.unwrap_or(cfg.water_capacity);
        cfg.burn_penalty = self.burn_penalty.unwrap_or(cfg.burn_penalty);
        cfg.max_steps = self.max_steps.unwrap_or(cfg.max_steps);
        cfg.wind_speed = self.wind_speed.unwrap_or(cfg.wind_speed);
        cfg.wind_direction = self.wind_direction.unwrap_or(cfg.wind_direction);
        cfg.n_ignitions = self.ignitions.unwrap_or(cfg.n_ignitions);
        cfg.no_waste = self.no_waste;
        cfg.sim = self.spread.resolve(cfg.sim)?;
        cfg.sim.max_steps = cfg.max_steps;
        cfg.validate().map_err(rl_error)?;
        Ok(cfg)
    }
}

fn stats_text(name: &str, s: &ReturnStats) -> String {
    format!(
        "policy = {name}\nepisodes = {}\nmean_return = {}\nstd_return = {}\nsuccess_rate = {}\n",
        s.returns.len(),
        s.mean,
        s.std,
        s.success_rate
    )
}

fn trace_text(env: &FireEnv, policy: &dyn Policy, key: RngKey) -> String {
    let ep = run_episode(env, policy, key);
    let mut s = String::new();
    for (t, state) in ep.states.iter().enumerate() {
        if t > 0 {
            let tr = &ep.transitions[t - 1];
            let _ = writeln!(
                s,
                "# action {:?}/{:?} reward {}",
                tr.action.movement, tr.action.valve, tr.reward
            );
        }
        let snap = Snapshot {
            fire: state.fire.clone(),
            step: state.step,
            agent: Some(AgentMarker {
                cell: state.agent,
                water: state.water,
            }),
        };
        snap.write_to(&mut s);
    }
    let _ = writeln!(s, "# return {} success {}", ep.total_return, ep.success);
    s
}

pub fn cmd_rl_demo(args: &RlDemoArgs) -> Result<(), CliError> {
    let cfg = args.env_config()?;
    let env = FireEnv::new(cfg.clone()).map_err(rl_error)?;
    let key = RngKey::new(args.seed);
    create_dir(&args.out_dir)?;

    let started = Instant::now();
    let (name, policy, episodes): (&str, Box<dyn Policy>, usize) = match args.policy {
        PolicyKind::Random => ("random", Box::new(RandomPolicy), args.episodes.unwrap_or(200)),
        PolicyKind::Heuristic => ("heuristic", Box::new(HeuristicPolicy), args.episodes.unwrap_or(200)),
        PolicyKind::Train => {
            let train_episodes = args.episodes.unwrap_or(10_000);
            let opts = TrainOptions {
                episodes: train_episodes,
                lr: args.lr,
                discount: args.discount,
                seed: args.seed,
            };
            let result = train_reinforce(&env, LinearSoftmaxPolicy::for_env(&cfg), &opts).map_err(rl_error)?;
            let mut curve = String::from("# episode return smoothed_100\n");
            for (e, (r, sm)) in result.history.iter().zip(smooth(&result.history, 100)).enumerate() {
                let _ = writeln!(curve, "{e} {r} {sm}");
            }
            write_text(&args.out_dir.join("training_returns.txt"), &curve)?;
            if train_episodes >= 10 {
                let tenth = train_episodes / 10;
                let sm = smooth(&result.history, 100);
                let first = sm[..tenth].iter().sum::<f64>() / tenth as f64;
                let last = sm[train_episodes - tenth..].iter().sum::<f64>() / tenth as f64;
                println!("training: smoothed return first 10% {first:.3} last 10% {last:.3}");
            }
            ("train", Box::new(result.policy), args.eval_episodes)
        }
    };
    let stats = run_batch_episodes(&env, policy.as_ref(), episodes, key).map_err(rl_error)?;
    eprintln!("rl-demo finished in {:.3} s", started.elapsed().as_secs_f64());

    let text = stats_text(name, &stats);
    write_text(&args.out_dir.join("rl_stats.txt"), &text)?;
    println!(
        "policy {name}: episodes {} mean return {:.4} std {:.4} success rate {:.3}",
        episodes, stats.mean, stats.std, stats.success_rate
    );

    if let Some(dir) = &args.trace_dir {
        create_dir(dir)?;
        for k in 0..args.traces {
            let path = dir.join(format!("episode_{k:03}.snap"));
            write_text(&path, &trace_text(&env, policy.as_ref(), episode_key(key, k)))?;
        }
    }

    let mut m = Manifest::new("rl-demo");
    m.set("preset", match args.preset {
        Preset::Default => "default",
        Preset::SlowSpread => "slow-spread",
    })
    .set("height", cfg.dims.height)
    .set("width", cfg.dims.width)
    .set("view-radius", cfg.view_radius)
    .set("water", cfg.water_capacity)
    .set("burn-penalty", cfg.burn_penalty)
    .set("max-steps", cfg.max_steps)
    .set("wind-speed", cfg.wind_speed)
    .set("wind-direction", cfg.wind_direction)
    .set("ignitions", cfg.n_ignitions)
    .set("no-waste", cfg.no_waste);
    record_spread(&mut m, &cfg.sim);
    m.set("policy", name)
        .set("episodes", args.episodes.unwrap_or(match args.policy {
            PolicyKind::Train => 10_000,
            _ => 200,
        }))
        .set("eval-episodes", args.eval_episodes)
        .set("lr", args.lr)
        .set("discount", args.discount)
        .set("seed", args.seed)
        .set("traces", args.traces);
    write_text(&args.out_dir.join("manifest.txt"), &m.to_text())?;
    Ok(())
}
