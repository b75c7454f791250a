//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any fails.

use std::f64::consts::{LN_2, PI};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use emberline::autodiff::{lift_constant, lift_parameter};
use emberline::bench::{run_benchmark, BenchConfig, BenchMode};
use emberline::calibration::{
    bce, burn_probability_map, calibrate, iou, loss_and_gradient, pooled_mse, rollout_loss, threshold_mask,
    AdamState, CalibrationOptions, CalibrationTarget, LossConfig, SelfCalibrationReport, SelfCalibrationSetup,
    SelfCalibrationTask,
};
use emberline::geodata::{
    parse_ascii_grid, slope_from_dem, synthetic_environment, write_ascii_grid, Raster, SyntheticOptions,
};
use emberline::grid::offset_angle;
use emberline::kernel::{arrival_intensity, ignition_probability, kappa_slope, kappa_wind, potential};
use emberline::rl::{
    run_batch_episodes, run_episode, smooth, train_reinforce, Action, EnvConfig, EnvState, FireEnv,
    HeuristicPolicy, LinearSoftmaxPolicy, Move, Observation, Policy, RandomPolicy, TrainOptions, Valve,
};
use emberline::{
    fire_fraction_stats, run_batch, run_deterministic, run_stochastic, step_batch, step_deterministic,
    step_stochastic, BatchState, CellIndex, CellState, ContinuousState, Dims, Dual, FireState, FuelField,
    GridState, NeighborOffset, RngKey, RunOptions, Scalar, SimConfig, SlopeField, SpreadParams, WindField,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn within_time(started: Instant, limit: Duration, detail: String) -> Outcome {
    let took = started.elapsed();
    ensure!(took < limit, "took {:.1} s, limit {} s", took.as_secs_f64(), limit.as_secs());
    Ok(format!("{detail} ({:.1} s)", took.as_secs_f64()))
}

fn cfg_with(f: impl FnOnce(&mut SimConfig)) -> SimConfig {
    let mut c = SimConfig::default();
    f(&mut c);
    c
}

fn uniform_grid(dims: Dims, fuel: (f64, f64), wind: (f64, f64), fire: FireState) -> GridState {
    GridState::new(
        dims,
        fire,
        WindField::uniform(dims, wind.0, wind.1).unwrap(),
        FuelField::uniform(dims, fuel.0, fuel.1).unwrap(),
        SlopeField::flat(dims),
    )
    .unwrap()
}

fn cell(row: usize, col: usize) -> CellIndex {
    CellIndex { row, col }
}

/// Landscape with wind, relief and patchy fuel.
fn varied_grid(dims: Dims, seed: u64, wind_speed: f64) -> GridState {
    let opts = SyntheticOptions {
        forest_density: 1.0,
        wind_speed,
        wind_direction: 0.7,
        ..SyntheticOptions::default()
    };
    synthetic_environment(dims, seed, &opts).unwrap()
}

fn random_state(dims: Dims, key: RngKey) -> ContinuousState<f64> {
    let n = dims.len();
    let (mut un, mut burn, mut bd) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for i in 0..n as u64 {
        let a = key.uniform(3 * i);
        let b = key.uniform(3 * i + 1);
        let c = key.uniform(3 * i + 2);
        let s = a + b + c;
        un.push(a / s);
        burn.push(b / s);
        bd.push(1.0 - a / s - b / s);
    }
    ContinuousState::new(dims, un, burn, bd).unwrap()
}

fn kernel_examples() -> Result<usize, String> {
    let mut n = 0;
    let p = cfg_with(|c| {
        c.alpha_w1 = 0.1;
        c.alpha_w2 = 0.2;
        c.alpha_s = 0.5;
    })
    .params();
    for d in NeighborOffset::ALL {
        ensure!(kappa_wind(0.0, 1.3, d, &p) == 1.0, "calm wind factor is not 1");
        let aligned = kappa_wind(5.0, offset_angle(d), d, &p);
        ensure!(close(aligned, (0.1f64 * 5.0).exp(), 1e-9), "aligned wind factor {aligned}");
        let opposed = kappa_wind(5.0, offset_angle(d) + PI, d, &p);
        ensure!(close(opposed, (0.5f64).exp() * (-2.0f64).exp(), 1e-9), "opposed wind factor {opposed}");
        ensure!(close(opposed, 0.22313, 5e-6), "opposed wind factor {opposed}");
    }
    n += 3;
    ensure!(kappa_slope(0.0, &p) == 1.0, "flat slope factor");
    ensure!(close(kappa_slope(0.3, &p), 0.15f64.exp(), 1e-9), "uphill slope factor");
    ensure!(close(kappa_slope(0.3, &p), 1.16183, 5e-6), "uphill slope factor");
    ensure!(close(kappa_slope(-0.3, &p), (-0.15f64).exp(), 1e-9), "downhill slope factor");
    ensure!(close(kappa_slope(-0.3, &p), 0.86071, 5e-6), "downhill slope factor");
    n += 3;

    let dims = Dims::new(5, 5);
    let fire = FireState::with_ignitions(dims, &[cell(2, 2)]).unwrap();
    let dead = varied_grid(dims, 3, 4.0);
    let dead = GridState::new(
        dims,
        fire.clone(),
        dead.wind().clone(),
        FuelField::uniform(dims, -1.0, 0.4).unwrap(),
        dead.slope().clone(),
    )
    .unwrap();
    for d in NeighborOffset::ALL {
        ensure!(potential(cell(2, 2), d, &dead, &p) == 0.0, "potential without canopy");
    }
    let base = SimConfig { p_base: 0.3, ..SimConfig::default() }.params();
    let plain = uniform_grid(dims, (0.0, 0.0), (0.0, 0.0), fire.clone());
    let fueled = uniform_grid(dims, (0.5, -0.5), (0.0, 0.0), fire.clone());
    for d in NeighborOffset::ALL {
        ensure!(close(potential(cell(2, 2), d, &plain, &base), 0.3, 1e-9), "neutral potential");
        ensure!(close(potential(cell(2, 2), d, &fueled, &base), 0.225, 1e-9), "fuel-scaled potential");
    }
    n += 3;

    let zero = vec![0.0; dims.len()];
    ensure!(arrival_intensity(cell(2, 2), &zero, &plain, &base) == 0.0, "intensity without fire");
    let p04 = SimConfig { p_base: 0.4, ..SimConfig::default() }.params();
    let mut one = zero.clone();
    one[dims.index(cell(2, 1))] = 1.0;
    ensure!(close(arrival_intensity(cell(2, 2), &one, &plain, &p04), 0.4, 1e-9), "single-neighbor intensity");
    let p01 = SimConfig { p_base: 0.1, ..SimConfig::default() }.params();
    let mut ring = zero.clone();
    for d in NeighborOffset::ALL {
        ring[dims.index(dims.neighbor(cell(2, 2), d).unwrap())] = 1.0;
    }
    ensure!(close(arrival_intensity(cell(2, 2), &ring, &plain, &p01), 0.8, 1e-9), "eight-neighbor intensity");
    n += 3;

    let g1 = SimConfig { alpha_gamma: 1.0, ..SimConfig::default() }.params();
    ensure!(ignition_probability(cell(1, 1), 0.0, &plain, &g1) == 0.0, "ignition without sparks");
    ensure!(close(ignition_probability(cell(1, 1), LN_2, &plain, &g1), 0.5, 1e-9), "ignition at ln 2");
    for lambda in [0.0, 0.5, 7.0, 1e6] {
        ensure!(ignition_probability(cell(1, 1), lambda, &dead, &g1) == 0.0, "ignition without canopy");
    }
    n += 3;
    Ok(n)
}

/// Empirical one-step ignition frequencies of the 8 neighbors against their
/// analytic probabilities. Returns the largest deviation in units of σ.
fn one_step_agreement(samples: u64) -> Result<f64, String> {
    let dims = Dims::new(8, 8);
    let center = cell(4, 3);
    let base = varied_grid(dims, 11, 3.0);
    let fire = FireState::with_ignitions(dims, &[center]).unwrap();
    let grid = base.with_fire(fire.clone()).unwrap();
    let cfg = SimConfig {
        p_base: 0.15,
        alpha_s: 2.0,
        ..SimConfig::default()
    };
    let params = cfg.params();
    let weights: Vec<f64> = fire
        .cells()
        .iter()
        .map(|&s| if s == CellState::Burning { 1.0 } else { 0.0 })
        .collect();
    let mut counts = vec![0u64; dims.len()];
    for k in 0..samples {
        let next = step_stochastic(&fire, &grid, &cfg, RngKey::new(2024).with_stream(k));
        for (i, s) in next.cells().iter().enumerate() {
            if *s == CellState::Burning && i != dims.index(center) {
                counts[i] += 1;
            }
        }
    }
    let mut worst: f64 = 0.0;
    for i in 0..dims.len() {
        let v = dims.cell(i);
        if v == center {
            continue;
        }
        let lambda = arrival_intensity(v, &weights, &grid, &params);
        let p = ignition_probability(v, lambda, &grid, &params);
        let freq = counts[i] as f64 / samples as f64;
        if p == 0.0 {
            ensure!(counts[i] == 0, "cell {v:?} ignited without a burning neighbor");
            continue;
        }
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        let z = (freq - p).abs() / sigma;
        ensure!(z <= 4.0, "cell {v:?}: frequency {freq} vs analytic {p} ({z:.2}σ)");
        worst = worst.max(z);
    }
    Ok(worst)
}

fn engine_examples() -> Result<usize, String> {
    let mut n = 0;
    let dims = Dims::new(10, 12);
    let grid = varied_grid(dims, 5, 2.0);
    let cfg = SimConfig::default();
    let key = RngKey::new(77);

    let cold = FireState::unburned(dims);
    ensure!(step_stochastic(&cold, &grid, &cfg, key) == cold, "spread without fire");
    let fire = FireState::with_ignitions(dims, &[cell(3, 3), cell(7, 9)]).unwrap();
    let frozen = SimConfig {
        p_base: 0.0,
        p_continue: 1.0,
        ..cfg
    };
    let out = run_stochastic(&fire, &grid, &frozen, key, &RunOptions::steps(100)).unwrap();
    ensure!(out.final_state == fire, "absorbing burning set changed");
    n += 2;
    one_step_agreement(100_000)?;
    n += 1;

    let params = cfg.params();
    let calm = ContinuousState::from_fire(&cold);
    ensure!(step_deterministic(&calm, &grid, &params) == calm, "all-unburned state changed");
    let one_dims = Dims::new(3, 3);
    let mut single = FireState::unburned(one_dims);
    single.set(cell(1, 1), CellState::Burning);
    let still = uniform_grid(one_dims, (0.0, 0.0), (0.0, 0.0), single.clone());
    let half = SimConfig {
        p_base: 0.0,
        p_continue: 0.5,
        ..cfg
    }
    .params();
    let next = step_deterministic(&ContinuousState::from_fire(&single), &still, &half);
    let c = one_dims.index(cell(1, 1));
    ensure!(
        next.p_burn()[c] == 0.5 && next.p_bd()[c] == 0.5 && next.p_un()[c] == 0.0,
        "burning cell after one step: {} {} {}",
        next.p_un()[c],
        next.p_burn()[c],
        next.p_bd()[c]
    );
    for k in 0..20 {
        let s = step_deterministic(&random_state(dims, RngKey::new(k)), &grid, &params);
        for i in 0..dims.len() {
            let sum = s.p_un()[i] + s.p_burn()[i] + s.p_bd()[i];
            ensure!(close(sum, 1.0, 1e-12), "triple sums to {sum}");
        }
    }
    n += 3;

    ensure!(run_stochastic(&fire, &grid, &cfg, key, &RunOptions::steps(0)).unwrap().final_state == fire, "zero-step run");
    let rec = run_stochastic(&fire, &grid, &cfg, key, &RunOptions::recorded(5)).unwrap();
    ensure!(rec.trajectory.len() == 6, "trajectory has {} states", rec.trajectory.len());
    ensure!(rec.trajectory[0] == fire && rec.trajectory[5] == rec.final_state, "trajectory endpoints");
    let plain = run_stochastic(&fire, &grid, &cfg, key, &RunOptions::steps(200)).unwrap();
    let recorded = run_stochastic(&fire, &grid, &cfg, key, &RunOptions::recorded(200)).unwrap();
    ensure!(plain.final_state == recorded.final_state, "recording changed the stochastic result");
    let start = ContinuousState::from_fire(&fire);
    let dplain = run_deterministic(&start, &grid, &params, &RunOptions::steps(200)).unwrap();
    let drec = run_deterministic(&start, &grid, &params, &RunOptions::recorded(200)).unwrap();
    ensure!(dplain.final_state == drec.final_state, "recording changed the deterministic result");
    n += 3;

    let solo = BatchState::stochastic(vec![fire.clone()], 9).unwrap();
    match step_batch(&solo, &grid, &cfg) {
        BatchState::Stochastic { fires, .. } => ensure!(
            fires[0] == step_stochastic(&fire, &grid, &cfg, RngKey::new(9).with_stream(0)),
            "batch of one differs from a single step"
        ),
        _ => return Err("batch changed mode".into()),
    }
    let dsolo = BatchState::deterministic(vec![start.clone()]).unwrap();
    match step_batch(&dsolo, &grid, &cfg) {
        BatchState::Deterministic { states } => ensure!(
            states[0] == step_deterministic(&start, &grid, &params),
            "deterministic batch of one differs"
        ),
        _ => return Err("batch changed mode".into()),
    }
    batch_member_matches_solo(&grid, &fire, 16, 40)?;
    let copies = BatchState::deterministic(vec![start.clone(); 6]).unwrap();
    match run_batch(&copies, &grid, &cfg, 25) {
        BatchState::Deterministic { states } => {
            ensure!(states.iter().all(|s| *s == states[0]), "deterministic copies diverged")
        }
        _ => return Err("batch changed mode".into()),
    }
    n += 3;

    let f = fire_fraction_stats(&FireState::unburned(Dims::new(20, 20)));
    ensure!((f.unburned, f.burning, f.burned) == (1.0, 0.0, 0.0), "all-unburned fractions");
    let five: Vec<CellIndex> = (0..5).map(|k| cell(k, 2 * k)).collect();
    let f = fire_fraction_stats(&FireState::with_ignitions(Dims::new(20, 20), &five).unwrap());
    ensure!(
        (f.unburned, f.burning, f.burned) == (395.0 / 400.0, 5.0 / 400.0, 0.0),
        "five burning cells"
    );
    let rs = random_state(dims, RngKey::new(5));
    let f = fire_fraction_stats(&rs);
    let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
    ensure!(
        close(f.unburned, mean(rs.p_un()), 1e-12)
            && close(f.burning, mean(rs.p_burn()), 1e-12)
            && close(f.burned, mean(rs.p_bd()), 1e-12),
        "continuous fractions"
    );
    n += 3;
    Ok(n)
}

/// Every member of a stochastic batch against a solo run on its stream.
fn batch_member_matches_solo(grid: &GridState, fire: &FireState, members: usize, steps: usize) -> Result<(), String> {
    let cfg = SimConfig::default();
    let seed = 31;
    let batch = BatchState::stochastic(vec![fire.clone(); members], seed).unwrap();
    let BatchState::Stochastic { fires, .. } = run_batch(&batch, grid, &cfg, steps) else {
        return Err("batch changed mode".into());
    };
    for (k, member) in fires.iter().enumerate() {
        let key = RngKey::new(seed).with_stream(k as u64);
        let solo = run_stochastic(fire, grid, &cfg, key, &RunOptions::steps(steps)).unwrap();
        ensure!(*member == solo.final_state, "batch member {k} differs from its solo run");
    }
    let distinct = fires.iter().filter(|f| **f != fires[0]).count();
    ensure!(distinct > 0, "all batch members identical; streams are not independent");
    Ok(())
}

fn autodiff_examples() -> Result<usize, String> {
    let c: Dual = lift_constant(3.5);
    ensure!(c.value == 3.5 && c.grad == [0.0; 6], "constant lift");
    let x: Dual = lift_parameter(2, -1.25).unwrap();
    let z: Dual = lift_constant(0.0);
    ensure!(z + x == x && x + z == x, "zero is not an additive identity");
    let prod = lift_constant::<6>(2.5) * lift_parameter(4, 0.8).unwrap();
    let mut want = [0.0; 6];
    want[4] = 2.5;
    ensure!(close(prod.value, 2.0, 1e-12) && prod.grad == want, "constant times parameter");
    let p0: Dual = lift_parameter(0, 0.3).unwrap();
    ensure!(p0.value == 0.3 && p0.grad == [1.0, 0.0, 0.0, 0.0, 0.0, 0.0], "parameter lift");
    for (i, xv) in [(0, 0.0), (3, 1.7), (5, -2.2)] {
        let e = lift_parameter::<6>(i, xv).unwrap().exp();
        ensure!(close(e.grad[i], xv.exp(), 1e-12), "exp derivative");
        let cz = lift_parameter::<6>(i, 0.0).unwrap().cos();
        ensure!(cz.value == 1.0 && cz.grad[i] == 0.0, "cos at 0");
    }
    Ok(6)
}

fn calibration_examples() -> Result<usize, String> {
    let mut n = 0;
    let dims = Dims::new(8, 8);
    let cold: ContinuousState = ContinuousState::from_fire(&FireState::unburned(dims));
    ensure!(burn_probability_map(&cold).iter().all(|&v| v == 0.0), "unburned map");
    let mut un = vec![1.0; dims.len()];
    let mut burn = vec![0.0; dims.len()];
    let mut bd = vec![0.0; dims.len()];
    (un[9], burn[9], bd[9]) = (0.2, 0.3, 0.5);
    let one = ContinuousState::new(dims, un, burn, bd).unwrap();
    ensure!(close(burn_probability_map(&one)[9], 0.8, 1e-12), "complement of p_un");
    let rs = random_state(dims, RngKey::new(8));
    let map = burn_probability_map(&rs);
    ensure!(
        map.iter().zip(rs.p_un()).all(|(m, u)| *m == 1.0 - u),
        "map is not 1 - p_un"
    );
    n += 3;

    let mask: Vec<bool> = (0..dims.len()).map(|i| i % 3 == 0 || i % 7 == 2).collect();
    let exact: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let eps = 1e-6;
    let b: f64 = bce(&exact, &mask, eps);
    ensure!(close(b, -(1.0 - eps).ln(), 1e-12), "bce of a perfect prediction is {b}");
    ensure!(pooled_mse::<f64>(&exact, &mask, dims, 4) == 0.0, "mse of a perfect prediction");
    let halves = vec![0.5; dims.len()];
    ensure!(close(bce(&halves, &mask, eps), LN_2, 1e-9), "bce at 0.5");
    let noisy: Vec<f64> = (0..dims.len()).map(|i| RngKey::new(1).uniform(i as u64)).collect();
    let plain = noisy
        .iter()
        .zip(&exact)
        .map(|(p, t)| (p - t).powi(2))
        .sum::<f64>()
        / dims.len() as f64;
    ensure!(close(pooled_mse(&noisy, &mask, dims, 1), plain, 1e-12), "pool size 1");
    n += 3;

    let lr = 1e-2;
    let adam = AdamState::new(lr);
    let theta = [0.5, -1.0, 2.0, 0.0, 3.0, -0.2];
    let grad = [0.3, -2.0, 1e-3, 5.0, -0.04, 7.0];
    let (_, next) = adam.step(&grad, &theta).unwrap();
    for i in 0..6 {
        let step = theta[i] - next[i];
        ensure!(close(step.abs(), lr, 1e-6 * lr / grad[i].abs().min(1.0)), "first Adam step {step}");
        ensure!(step.signum() == grad[i].signum(), "Adam step direction");
    }
    let (_, same) = adam.step(&[0.0; 6], &theta).unwrap();
    ensure!(same == theta, "zero gradient moved theta");
    ensure!(adam.step(&grad, &theta).unwrap() == adam.step(&grad, &theta).unwrap(), "Adam is not deterministic");
    n += 3;

    let grid = varied_grid(Dims::new(12, 12), 2, 3.0);
    let initial = ContinuousState::from_fire(grid.fire());
    let truth = SimConfig::default().params();
    let end = run_deterministic(&initial, &grid, &truth, &RunOptions::steps(6)).unwrap();
    let target = CalibrationTarget::new(
        grid.dims(),
        threshold_mask(&burn_probability_map(&end.final_state), 0.5),
        6,
    )
    .unwrap();
    let lc = LossConfig::default();
    let init = SpreadParams {
        p_base: 0.2,
        ..truth
    };
    let zero = calibrate(&grid, &initial, &target, &lc, &CalibrationOptions::new(init, 0)).unwrap();
    let l0 = rollout_loss::<f64>(&grid, &initial, &target, &lc, &init).unwrap();
    ensure!(zero.history.len() == 1 && zero.best == init, "zero iterations");
    ensure!(close(zero.history[0].loss, l0, 1e-12), "zero-iteration loss");
    let five = calibrate(&grid, &initial, &target, &lc, &CalibrationOptions::new(init, 5)).unwrap();
    ensure!(five.history.len() == 6, "history has {} entries", five.history.len());
    ensure!(
        five.history.iter().enumerate().all(|(i, r)| r.iteration == i),
        "history is not one entry per iteration"
    );
    n += 2;
    let report = self_calibration()?;
    ensure!(report.loss_ratio() < 0.1 && report.iou > 0.8, "self-calibration");
    n += 1;

    let a: Vec<bool> = (0..64).map(|i| i < 16).collect();
    ensure!(iou(&a, &a) == 1.0, "identical masks");
    let disjoint: Vec<bool> = (0..64).map(|i| (32..40).contains(&i)).collect();
    ensure!(iou(&a, &disjoint) == 0.0, "disjoint masks");
    let wider: Vec<bool> = (0..64).map(|i| i < 32).collect();
    ensure!(iou(&wider, &a) == 0.5, "covering mask with equal extra area");
    n += 3;
    Ok(n)
}

fn criterion_1() -> Outcome {
    let started = Instant::now();
    let counts = [
        ("spread-kernel", kernel_examples()?),
        ("sim-engine", engine_examples()?),
        ("autodiff", autodiff_examples()?),
        ("calibration", calibration_examples()?),
    ];
    let total: usize = counts.iter().map(|c| c.1).sum();
    let parts: Vec<String> = counts.iter().map(|(m, k)| format!("{m} {k}")).collect();
    within_time(
        started,
        Duration::from_secs(60),
        format!("{total} worked examples ({})", parts.join(", ")),
    )
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let dims = Dims::new(32, 32);
    let mut worst: f64 = 0.0;
    for k in 0..1000u64 {
        let grid = varied_grid(dims, k % 20, (k % 7) as f64);
        let key = RngKey::new(k);
        let cfg = SimConfig {
            p_base: 0.05 + 0.5 * key.uniform(1 << 40),
            p_continue: key.uniform((1 << 40) + 1),
            ..SimConfig::default()
        };
        let out = run_deterministic(&random_state(dims, key), &grid, &cfg.params(), &RunOptions::steps(200)).unwrap();
        let s = out.final_state;
        for i in 0..dims.len() {
            worst = worst.max((s.p_un()[i] + s.p_burn()[i] + s.p_bd()[i] - 1.0).abs());
        }
    }
    ensure!(worst <= 1e-12, "largest deviation from 1 is {worst:e}");
    within_time(
        started,
        Duration::from_secs(60),
        format!("1000 states x 200 steps on 32x32, max |sum - 1| = {worst:.1e}"),
    )
}

fn criterion_3() -> Outcome {
    let started = Instant::now();
    let worst = one_step_agreement(100_000)?;
    within_time(
        started,
        Duration::from_secs(60),
        format!("100000 steps, all 63 cells within 4σ (worst {worst:.2}σ)"),
    )
}

fn criterion_4() -> Outcome {
    let started = Instant::now();
    let grid = varied_grid(Dims::new(16, 16), 4, 3.0);
    let initial = ContinuousState::from_fire(grid.fire());
    let horizon = 20;
    let truth = SimConfig::default().params();
    let end = run_deterministic(&initial, &grid, &truth, &RunOptions::steps(horizon)).unwrap();
    let target = CalibrationTarget::new(
        grid.dims(),
        threshold_mask(&burn_probability_map(&end.final_state), 0.5),
        horizon,
    )
    .unwrap();
    let lc = LossConfig::default();
    let at = SpreadParams {
        p_base: 0.22,
        alpha_w1: 0.14,
        alpha_w2: 0.25,
        alpha_s: 0.8,
        alpha_gamma: 1.3,
        p_continue: 0.45,
    };
    let (_, grad) = loss_and_gradient(&grid, &initial, &target, &lc, &at).unwrap();
    let base = at.to_array();
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for i in 0..6 {
        let h = 1e-5 * base[i].abs().max(0.1);
        let eval = |x: f64| {
            let mut a = base;
            a[i] = x;
            rollout_loss::<f64>(&grid, &initial, &target, &lc, &SpreadParams::from_array(a)).unwrap()
        };
        let fd = (eval(base[i] + h) - eval(base[i] - h)) / (2.0 * h);
        let rel = (grad[i] - fd).abs() / fd.abs().max(grad[i].abs());
        ensure!(
            rel < 1e-3,
            "{}: forward {:.6e} vs finite difference {fd:.6e} (relative error {rel:.2e})",
            SpreadParams::<f64>::NAMES[i],
            grad[i]
        );
        worst = worst.max(rel);
        parts.push(format!("{}={:.3e}", SpreadParams::<f64>::NAMES[i], grad[i]));
    }
    Ok(format!(
        "16x16, 20 steps, max relative error {worst:.1e} [{}] ({:.1} s)",
        parts.join(" "),
        started.elapsed().as_secs_f64()
    ))
}

/// Task seed used by the acceptance run; see README for the seed study.
const SELF_CALIBRATION_SEED: u64 = 1;

/// The 300-iteration self-calibration and its wall time, computed once and
/// shared by criteria 1 and 5.
fn self_calibration_timed() -> Result<&'static (SelfCalibrationReport, Duration), String> {
    static REPORT: OnceLock<Result<(SelfCalibrationReport, Duration), String>> = OnceLock::new();
    REPORT
        .get_or_init(|| {
            let started = Instant::now();
            let task = SelfCalibrationTask::new(&SelfCalibrationSetup::default(), SELF_CALIBRATION_SEED)
                .map_err(|e| e.to_string())?;
            let report = task.run(&LossConfig::default(), 300, 0.05).map_err(|e| e.to_string())?;
            Ok((report, started.elapsed()))
        })
        .as_ref()
        .map_err(Clone::clone)
}

fn self_calibration() -> Result<&'static SelfCalibrationReport, String> {
    self_calibration_timed().map(|r| &r.0)
}

fn criterion_5() -> Outcome {
    let task = SelfCalibrationTask::new(&SelfCalibrationSetup::default(), SELF_CALIBRATION_SEED).map_err(|e| e.to_string())?;
    let floor = rollout_loss::<f64>(&task.grid, &task.initial, &task.target, &LossConfig::default(), &task.truth)
        .map_err(|e| e.to_string())?;
    let (report, took) = self_calibration_timed()?;
    let detail = format!(
        "32x32, 300 Adam iterations: loss {:.4} -> {:.4} (ratio {:.4}, loss at true parameters {floor:.4}), IoU {:.4}",
        report.initial_loss,
        report.result.best_loss,
        report.loss_ratio(),
        report.iou
    );
    ensure!(report.result.history.len() == 301, "history length {}", report.result.history.len());
    ensure!(report.loss_ratio() < 0.1, "{detail}");
    ensure!(report.iou > 0.8, "{detail}");
    ensure!(*took < Duration::from_secs(600), "calibration took {:.1} s", took.as_secs_f64());
    Ok(format!("{detail} ({:.1} s)", took.as_secs_f64()))
}

fn criterion_6() -> Outcome {
    let started = Instant::now();
    let dims = Dims::new(64, 64);
    let grid = varied_grid(dims, 0, 2.0);
    batch_member_matches_solo(&grid, grid.fire(), 16, 50)?;

    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let rate = |batch: usize| -> Result<f64, String> {
        let mut cfg = BenchConfig::new(dims, batch, BenchMode::Stochastic);
        cfg.steps = 50;
        cfg.repeats = 5;
        Ok(run_benchmark(&cfg).map_err(|e| e.to_string())?.cell_steps_per_sec().0)
    };
    let one = rate(1)?;
    let sixteen = rate(16)?;
    let detail = format!(
        "16 members match solo runs; 64x64 cell-steps/s batch 1 {one:.3e}, batch 16 {sixteen:.3e} ({:.2}x) on {cores} core(s)",
        sixteen / one
    );
    ensure!(sixteen >= one, "{detail}");
    within_time(started, Duration::from_secs(300), detail)
}

/// Walks randomly but never opens the valve.
struct ClosedValve;

impl Policy for ClosedValve {
    fn act(&self, _env: &FireEnv, _state: &EnvState, _obs: &Observation, key: RngKey) -> Action {
        Action::new(Move::ALL[key.below(0, 5) as usize], Valve::Closed)
    }
}

fn criterion_7() -> Outcome {
    let started = Instant::now();
    let env = FireEnv::new(EnvConfig::default()).map_err(|e| e.to_string())?;
    for k in 0..20 {
        let key = RngKey::new(99).with_stream(k);
        let ep = run_episode(&env, &ClosedValve, key);
        let initial = &ep.states[0].fire;
        let bare = run_stochastic(
            initial,
            &env.grid().with_fire(initial.clone()).unwrap(),
            &env.config().sim,
            key,
            &RunOptions::recorded(ep.len()),
        )
        .unwrap();
        for (t, state) in ep.states.iter().enumerate() {
            ensure!(state.fire == bare.trajectory[t], "episode {k} step {t}: env fire differs from the bare run");
        }
    }

    let key = RngKey::new(7);
    let heuristic = run_batch_episodes(&env, &HeuristicPolicy, 200, key).map_err(|e| e.to_string())?;
    let random = run_batch_episodes(&env, &RandomPolicy, 200, key).map_err(|e| e.to_string())?;
    ensure!(
        heuristic.mean > random.mean,
        "heuristic mean return {} vs random {}",
        heuristic.mean,
        random.mean
    );

    let slow = FireEnv::new(EnvConfig::slow_spread()).map_err(|e| e.to_string())?;
    let opts = TrainOptions::default();
    let trained = train_reinforce(&slow, LinearSoftmaxPolicy::for_env(slow.config()), &opts).map_err(|e| e.to_string())?;
    let smoothed = smooth(&trained.history, 100);
    let tenth = smoothed.len() / 10;
    let first = smoothed[..tenth].iter().sum::<f64>() / tenth as f64;
    let last = smoothed[smoothed.len() - tenth..].iter().sum::<f64>() / tenth as f64;
    let detail = format!(
        "closed valve matches bare runs (20 episodes); mean return heuristic {:.2} vs random {:.2} (200 episodes); \
         REINFORCE {} episodes smoothed return first 10% {first:.3} -> last 10% {last:.3}",
        heuristic.mean, random.mean, opts.episodes
    );
    ensure!(last > first, "{detail}");
    within_time(started, Duration::from_secs(900), detail)
}

fn criterion_8() -> Outcome {
    let started = Instant::now();
    for k in 0..50u64 {
        let key = RngKey::new(4000 + k);
        let dims = Dims::new(3 + key.below(0, 20) as usize, 3 + key.below(1, 20) as usize);
        let n = dims.len() as u64;
        let nodata = if k % 2 == 0 { Some(-9999.0) } else { None };
        let values: Vec<f64> = (0..n)
            .map(|i| match (key.below(10 + i, 10), nodata) {
                (0, Some(nd)) => nd,
                (1, _) => (key.below(1_000_000 + i, 2000) as f64) - 1000.0,
                _ => (key.uniform(2_000_000 + i) - 0.3) * 10f64.powi(key.below(3_000_000 + i, 12) as i32 - 4),
            })
            .collect();
        let mut r = Raster::new(dims.height, dims.width, 0.5 + key.uniform(2) * 90.0, nodata, values).unwrap();
        r.xllcorner = key.uniform(3) * 1e6;
        r.yllcorner = -key.uniform(4) * 1e5;
        let text = write_ascii_grid(&r);
        let back = parse_ascii_grid(text.as_bytes()).map_err(|e| e.to_string())?;
        ensure!(back == r, "raster {k} did not round-trip");
        ensure!(
            back.values.iter().zip(&r.values).all(|(a, b)| a.to_bits() == b.to_bits()),
            "raster {k} values differ in bits"
        );
        ensure!(write_ascii_grid(&back) == text, "raster {k} reserialized differently");
    }

    let mut checked = 0usize;
    for k in 0..50u64 {
        let key = RngKey::new(5000 + k);
        let dims = Dims::new(4 + key.below(0, 30) as usize, 4 + key.below(1, 30) as usize);
        let scale = 1.0 + key.uniform(2) * 200.0;
        let elev: Vec<f64> = (0..dims.len() as u64).map(|i| key.uniform(100 + i) * scale).collect();
        let dem = Raster::new(dims.height, dims.width, 5.0 + key.uniform(3) * 50.0, None, elev).unwrap();
        let slope = slope_from_dem(&dem);
        for row in 1..dims.height - 1 {
            for col in 1..dims.width - 1 {
                let u = cell(row, col);
                for d in NeighborOffset::ALL {
                    let v = dims.neighbor(u, d).unwrap();
                    let (a, b) = (slope.get(u, d), slope.get(v, d.opposite()));
                    ensure!(a == -b, "DEM {k}: slope({u:?}, {d:?}) = {a} but reverse is {b}");
                    checked += 1;
                }
            }
        }
    }
    within_time(
        started,
        Duration::from_secs(60),
        format!("50 rasters round-trip bit-exact; slope antisymmetric on {checked} interior cell-directions of 50 DEMs"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 worked-example suite", criterion_1),
        ("2 simplex conservation", criterion_2),
        ("3 one-step stochastic/analytic agreement", criterion_3),
        ("4 gradient fidelity", criterion_4),
        ("5 self-calibration recovery", criterion_5),
        ("6 batch equivalence and scaling", criterion_6),
        ("7 RL environment sanity", criterion_7),
        ("8 ingestion round-trips", criterion_8),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS criterion {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {name}: {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
