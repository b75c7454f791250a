//! Gradient-based fitting of the six spread parameters to an observed burn mask.
//!
//! A calibration run rolls out the deterministic model with dual-number
//! parameters, scores the ever-burned probability map against the mask with
//! a BCE term plus an MSE term on average-pooled maps, and updates the
//! parameters with Adam in an unconstrained space (see [`ThetaTransform`]).

use thiserror::Error;

use crate::autodiff::{Dual, Scalar, NUM_PARAMS};
use crate::engine::{run_deterministic, ContinuousState, EngineError, RunOptions};
use crate::geodata::{synthetic_environment, SyntheticOptions};
use crate::grid::{Dims, GridState, SpreadParams};
use crate::rng::RngKey;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("{what} has dims {got:?}, expected {expected:?}")]
    DimensionMismatch {
        what: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("target mask has no burned cells")]
    EmptyTarget,
    #[error("invalid loss config: {0}")]
    InvalidLossConfig(String),
    #[error("non-finite gradient component {index}: {value}")]
    NonFiniteGradient { index: usize, value: f64 },
    #[error("non-finite loss {loss} at iteration {iteration}")]
    NonFiniteLoss { iteration: usize, loss: f64 },
    #[error("horizon {horizon} exceeds the configured maximum {max}")]
    HorizonTooLong { horizon: usize, max: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Observed burn perimeter at `horizon` steps after ignition.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTarget {
    dims: Dims,
    mask: Vec<bool>,
    horizon: usize,
}

impl CalibrationTarget {
    pub fn new(dims: Dims, mask: Vec<bool>, horizon: usize) -> Result<Self, CalibrationError> {
        if mask.len() != dims.len() {
            return Err(CalibrationError::DimensionMismatch {
                what: "burn mask",
                expected: dims.as_tuple(),
                got: (mask.len(), 1),
            });
        }
        if !mask.iter().any(|&m| m) {
            return Err(CalibrationError::EmptyTarget);
        }
        Ok(Self { dims, mask, horizon })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub bce_weight: f64,
    pub mse_weight: f64,
    /// Side of the square, non-overlapping pooling window.
    pub pool_size: usize,
    /// Predictions are clamped into `[ε, 1 − ε]` before taking logs.
    pub bce_epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            bce_weight: 1.0,
            mse_weight: 1.0,
            pool_size: 4,
            bce_epsilon: 1e-6,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: &str| Err(CalibrationError::InvalidLossConfig(m.into()));
        if !(self.bce_weight >= 0.0 && self.mse_weight >= 0.0) {
            return bad("weights must be nonnegative");
        }
        if self.bce_weight == 0.0 && self.mse_weight == 0.0 {
            return bad("at least one weight must be positive");
        }
        if self.pool_size == 0 {
            return bad("pool_size must be positive");
        }
        if !(self.bce_epsilon > 0.0 && self.bce_epsilon < 0.5) {
            return bad("bce_epsilon must be in (0, 0.5)");
        }
        Ok(())
    }
}

/// Probability that each cell is burning or burned out, i.e. `1 − p_un`.
pub fn burn_probability_map<T: Scalar>(state: &ContinuousState<T>) -> Vec<T> {
    state
        .p_burn()
        .iter()
        .zip(state.p_bd())
        .map(|(&b, &d)| b + d)
        .collect()
}

/// Non-overlapping `k`×`k` average pooling. Edge windows average over their
/// in-bounds cells only.
pub fn avg_pool<T: Scalar>(values: &[T], dims: Dims, k: usize) -> Vec<T> {
    let out_h = dims.height.div_ceil(k);
    let out_w = dims.width.div_ceil(k);
    let mut out = Vec::with_capacity(out_h * out_w);
    for br in 0..out_h {
        for bc in 0..out_w {
            let rows = br * k..((br + 1) * k).min(dims.height);
            let cols = bc * k..((bc + 1) * k).min(dims.width);
            let n = rows.len() * cols.len();
            let mut acc = T::zero();
            for r in rows {
                for c in cols.clone() {
                    acc += values[r * dims.width + c];
                }
            }
            out.push(acc.scale(1.0 / n as f64));
        }
    }
    out
}

/// Mean binary cross-entropy of clamped predictions against the mask.
pub fn bce<T: Scalar>(pred: &[T], mask: &[bool], epsilon: f64) -> T {
    let mut acc = T::zero();
    for (&p, &m) in pred.iter().zip(mask) {
        let p = p.clamp(epsilon, 1.0 - epsilon);
        acc += if m { -p.ln() } else { -(T::one() - p).ln() };
    }
    acc.scale(1.0 / pred.len() as f64)
}

/// MSE between the average-pooled prediction and the average-pooled mask.
pub fn pooled_mse<T: Scalar>(pred: &[T], mask: &[bool], dims: Dims, pool_size: usize) -> T {
    let target: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let pp = avg_pool(pred, dims, pool_size);
    let pt = avg_pool(&target, dims, pool_size);
    let mut acc = T::zero();
    for (&a, &b) in pp.iter().zip(&pt) {
        let d = a - T::from_f64(b);
        acc += d * d;
    }
    acc.scale(1.0 / pp.len() as f64)
}

/// `bce_weight·BCE + mse_weight·pooled MSE`.
pub fn loss<T: Scalar>(pred: &[T], target: &CalibrationTarget, lc: &LossConfig) -> Result<T, CalibrationError> {
    if pred.len() != target.dims.len() {
        return Err(CalibrationError::DimensionMismatch {
            what: "prediction",
            expected: target.dims.as_tuple(),
            got: (pred.len(), 1),
        });
    }
    let mut total = T::zero();
    if lc.bce_weight > 0.0 {
        total += bce(pred, &target.mask, lc.bce_epsilon).scale(lc.bce_weight);
    }
    if lc.mse_weight > 0.0 {
        total += pooled_mse(pred, &target.mask, target.dims, lc.pool_size).scale(lc.mse_weight);
    }
    Ok(total)
}

/// Loss of a deterministic rollout of `target.horizon()` steps.
pub fn rollout_loss<T: Scalar>(
    grid: &GridState,
    initial: &ContinuousState<f64>,
    target: &CalibrationTarget,
    lc: &LossConfig,
    params: &SpreadParams<T>,
) -> Result<T, CalibrationError> {
    if target.dims != grid.dims() {
        return Err(CalibrationError::DimensionMismatch {
            what: "target",
            expected: grid.dims().as_tuple(),
            got: target.dims.as_tuple(),
        });
    }
    let start = initial.map(T::from_f64);
    let out = run_deterministic(&start, grid, params, &RunOptions::steps(target.horizon))?;
    loss(&burn_probability_map(&out.final_state), target, lc)
}

/// Rollout loss and its gradient with respect to the six spread parameters
/// themselves (not the unconstrained coordinates).
pub fn loss_and_gradient(
    grid: &GridState,
    initial: &ContinuousState<f64>,
    target: &CalibrationTarget,
    lc: &LossConfig,
    params: &SpreadParams<f64>,
) -> Result<(f64, [f64; NUM_PARAMS]), CalibrationError> {
    let lifted = params.lift(|i, x| Dual::<NUM_PARAMS>::parameter(i, x).expect("index < 6"));
    let l = rollout_loss(grid, initial, target, lc, &lifted)?;
    Ok((l.value, l.grad))
}

/// Maps unconstrained optimizer coordinates to valid spread parameters.
///
/// `p_base` and `alpha_gamma` go through softplus, `p_continue` through the
/// logistic function; the three exponents are used as-is.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ThetaTransform;

/// Keeps `p_continue` strictly inside (0, 1) when inverting the logistic map.
const LOGIT_MARGIN: f64 = 1e-12;

fn softplus<T: Scalar>(x: T) -> T {
    // log(1 + e^x) without overflow
    if x.value() > 0.0 {
        x + (T::one() + (-x).exp()).ln()
    } else {
        (T::one() + x.exp()).ln()
    }
}

fn logistic<T: Scalar>(x: T) -> T {
    if x.value() >= 0.0 {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

impl ThetaTransform {
    pub fn to_params<T: Scalar>(&self, z: &[T; NUM_PARAMS]) -> SpreadParams<T> {
        SpreadParams {
            p_base: softplus(z[0]),
            alpha_w1: z[1],
            alpha_w2: z[2],
            alpha_s: z[3],
            alpha_gamma: softplus(z[4]),
            p_continue: logistic(z[5]),
        }
    }

    pub fn to_unconstrained(&self, p: &SpreadParams<f64>) -> Result<[f64; NUM_PARAMS], CalibrationError> {
        if !(p.p_base > 0.0) || !(p.alpha_gamma > 0.0) {
            return Err(CalibrationError::InvalidParameter(
                "p_base and alpha_gamma must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&p.p_continue) {
            return Err(CalibrationError::InvalidParameter(
                "p_continue must be in [0, 1]".into(),
            ));
        }
        let inv_softplus = |y: f64| y + (-(-y).exp_m1()).ln();
        let pc = p.p_continue.clamp(LOGIT_MARGIN, 1.0 - LOGIT_MARGIN);
        Ok([
            inv_softplus(p.p_base),
            p.alpha_w1,
            p.alpha_w2,
            p.alpha_s,
            inv_softplus(p.alpha_gamma),
            pc.ln() - (-pc).ln_1p(),
        ])
    }
}

/// Adam optimizer state with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: [f64; NUM_PARAMS],
    pub v: [f64; NUM_PARAMS],
    pub t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-2)
    }
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self {
            m: [0.0; NUM_PARAMS],
            v: [0.0; NUM_PARAMS],
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    /// One bias-corrected update. Returns the new state and parameters.
    pub fn step(
        &self,
        grad: &[f64; NUM_PARAMS],
        theta: &[f64; NUM_PARAMS],
    ) -> Result<(AdamState, [f64; NUM_PARAMS]), CalibrationError> {
        if let Some(index) = grad.iter().position(|g| !g.is_finite()) {
            return Err(CalibrationError::NonFiniteGradient {
                index,
                value: grad[index],
            });
        }
        let mut next = self.clone();
        next.t += 1;
        let bc1 = 1.0 - self.beta1.powi(next.t as i32);
        let bc2 = 1.0 - self.beta2.powi(next.t as i32);
        let mut theta_next = *theta;
        for i in 0..NUM_PARAMS {
            next.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            next.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let m_hat = next.m[i] / bc1;
            let v_hat = next.v[i] / bc2;
            theta_next[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok((next, theta_next))
    }
}

/// `adam_step`: free-function form of [`AdamState::step`].
pub fn adam_step(
    state: &AdamState,
    grad: &[f64; NUM_PARAMS],
    theta: &[f64; NUM_PARAMS],
) -> Result<(AdamState, [f64; NUM_PARAMS]), CalibrationError> {
    state.step(grad, theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    pub iterations: usize,
    pub init: SpreadParams<f64>,
    pub lr: f64,
    /// Parameters marked `true` are held at their initial value.
    pub fixed: [bool; NUM_PARAMS],
    pub max_horizon: usize,
}

impl CalibrationOptions {
    pub fn new(init: SpreadParams<f64>, iterations: usize) -> Self {
        Self {
            iterations,
            init,
            lr: 0.05,
            fixed: [false; NUM_PARAMS],
            max_horizon: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub loss: f64,
    pub params: SpreadParams<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    /// Parameters with the lowest loss seen.
    pub best: SpreadParams<f64>,
    pub best_loss: f64,
    /// One record per evaluated iterate: `iterations + 1` entries.
    pub history: Vec<IterationRecord>,
}

/// Fits the spread parameters by Adam on deterministic rollouts.
///
/// Iterate `i` is evaluated (loss and gradient), recorded, and then updated,
/// except the last one which is only evaluated. The result is deterministic
/// given its inputs.
pub fn calibrate(
    grid: &GridState,
    initial: &ContinuousState<f64>,
    target: &CalibrationTarget,
    lc: &LossConfig,
    opts: &CalibrationOptions,
) -> Result<CalibrationResult, CalibrationError> {
    lc.validate()?;
    if target.horizon > opts.max_horizon {
        return Err(CalibrationError::HorizonTooLong {
            horizon: target.horizon,
            max: opts.max_horizon,
        });
    }
    let transform = ThetaTransform;
    let mut z = transform.to_unconstrained(&opts.init)?;
    let mut adam = AdamState::new(opts.lr);
    let mut history = Vec::with_capacity(opts.iterations + 1);
    let mut best: Option<(f64, SpreadParams<f64>)> = None;

    for iteration in 0..=opts.iterations {
        let zd: [Dual; NUM_PARAMS] = std::array::from_fn(|i| {
            if opts.fixed[i] {
                Dual::constant(z[i])
            } else {
                Dual::parameter(i, z[i]).expect("index < 6")
            }
        });
        let params_d = transform.to_params(&zd);
        let params = params_d.lift(|_, d| d.value);
        let l = rollout_loss(grid, initial, target, lc, &params_d)?;
        if !l.value.is_finite() {
            return Err(CalibrationError::NonFiniteLoss {
                iteration,
                loss: l.value,
            });
        }
        history.push(IterationRecord {
            iteration,
            loss: l.value,
            params,
        });
        if best.as_ref().map_or(true, |(b, _)| l.value < *b) {
            best = Some((l.value, params));
        }
        if iteration < opts.iterations {
            let (next_adam, next_z) = adam.step(&l.grad, &z)?;
            adam = next_adam;
            z = next_z;
        }
    }
    let (best_loss, best) = best.expect("at least one evaluation");
    Ok(CalibrationResult {
        best,
        best_loss,
        history,
    })
}

/// Intersection over union of two masks; 1 when both are empty.
pub fn iou(pred: &[bool], target: &[bool]) -> f64 {
    assert_eq!(pred.len(), target.len(), "masks must have equal size");
    let mut inter = 0usize;
    let mut union = 0usize;
    for (&p, &t) in pred.iter().zip(target) {
        inter += (p && t) as usize;
        union += (p || t) as usize;
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Cells whose value is at least `threshold`.
pub fn threshold_mask(values: &[f64], threshold: f64) -> Vec<bool> {
    values.iter().map(|&v| v >= threshold).collect()
}

/// A synthetic calibration problem with known answer: the target mask is
/// the thresholded ever-burned map of a deterministic rollout at `truth`,
/// and `init` is `truth` with each parameter scaled by 0.5 or 1.5, chosen
/// independently at random.
#[derive(Debug, Clone, PartialEq)]
pub struct SelfCalibrationTask {
    pub grid: GridState,
    pub initial: ContinuousState<f64>,
    pub target: CalibrationTarget,
    pub truth: SpreadParams<f64>,
    pub init: SpreadParams<f64>,
    pub threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCalibrationSetup {
    pub dims: Dims,
    pub horizon: usize,
    pub truth: SpreadParams<f64>,
    pub threshold: f64,
    pub wind_speed: f64,
    pub wind_direction: f64,
}

impl Default for SelfCalibrationSetup {
    fn default() -> Self {
        Self {
            dims: Dims::new(32, 32),
            horizon: 30,
            truth: SpreadParams {
                p_base: 0.1,
                alpha_w1: 0.1,
                alpha_w2: 0.3,
                alpha_s: 0.5,
                alpha_gamma: 1.0,
                p_continue: 0.6,
            },
            threshold: 0.5,
            wind_speed: 6.0,
            wind_direction: 0.5,
        }
    }
}

/// Largest `p_continue` a perturbed initialization may take.
const MAX_INIT_P_CONTINUE: f64 = 0.95;

impl SelfCalibrationTask {
    pub fn new(setup: &SelfCalibrationSetup, seed: u64) -> Result<Self, CalibrationError> {
        let opts = SyntheticOptions {
            forest_density: 0.85,
            wind_speed: setup.wind_speed,
            wind_direction: setup.wind_direction,
            ..SyntheticOptions::default()
        };
        let grid = synthetic_environment(setup.dims, seed, &opts)
            .map_err(|e| CalibrationError::InvalidParameter(e.to_string()))?;
        let initial = ContinuousState::from_fire(grid.fire());
        let out = run_deterministic(&initial, &grid, &setup.truth, &RunOptions::steps(setup.horizon))?;
        let mask = threshold_mask(&burn_probability_map(&out.final_state), setup.threshold);
        let target = CalibrationTarget::new(setup.dims, mask, setup.horizon)?;

        let key = RngKey::new(seed).with_stream(PERTURB_STREAM);
        let mut init = setup
            .truth
            .lift(|i, x| if key.uniform(i as u64) < 0.5 { 0.5 * x } else { 1.5 * x });
        init.p_continue = init.p_continue.min(MAX_INIT_P_CONTINUE);
        Ok(Self {
            grid,
            initial,
            target,
            truth: setup.truth,
            init,
            threshold: setup.threshold,
        })
    }

    /// Thresholded ever-burned map after a rollout at `params`.
    pub fn predicted_mask(&self, params: &SpreadParams<f64>) -> Result<Vec<bool>, CalibrationError> {
        let out = run_deterministic(&self.initial, &self.grid, params, &RunOptions::steps(self.target.horizon))?;
        Ok(threshold_mask(&burn_probability_map(&out.final_state), self.threshold))
    }

    pub fn run(&self, lc: &LossConfig, iterations: usize, lr: f64) -> Result<SelfCalibrationReport, CalibrationError> {
        let mut opts = CalibrationOptions::new(self.init, iterations);
        opts.lr = lr;
        let result = calibrate(&self.grid, &self.initial, &self.target, lc, &opts)?;
        let initial_loss = result.history[0].loss;
        let iou = iou(&self.predicted_mask(&result.best)?, self.target.mask());
        Ok(SelfCalibrationReport {
            initial_loss,
            iou,
            result,
        })
    }
}

const PERTURB_STREAM: u64 = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct SelfCalibrationReport {
    pub initial_loss: f64,
    /// Overlap of the thresholded prediction at the best parameters with the target.
    pub iou: f64,
    pub result: CalibrationResult,
}

impl SelfCalibrationReport {
    pub fn loss_ratio(&self) -> f64 {
        self.result.best_loss / self.initial_loss
    }
}
