//! Mild-solution evaluation and Picard iteration.
//!
//! A trajectory lives on [-d, T] with every impulse time present twice (left
//! and right value). The mild-solution operator P maps a trajectory to
//!
//! ```text
//! (Pu)(t) = S_α(t)φ(0) + K_α(t)ϕ(0)
//!         + Σ_{t_i<t} [ S_α(t-t_i) I_i(u(t_i⁻)) + K_α(t-t_i) Q_i(u(t_i⁻)) ]
//!         + ∫_0^t T_α(t-s) f(s, u(ρ(s, u_s))) ds,
//! ```
//!
//! with f read from the input trajectory (Picard form, never self-referential)
//! and the delayed argument taken pointwise at the evaluated delay target.
//! The convolution is product-integrated: f is piecewise linear on the grid,
//! the smooth Mittag-Leffler factor of the T_α kernel is sampled at subcell
//! midpoints, and the singular weight τ^{α-1} is integrated exactly per cell.
//!
//! Under the contraction condition of the hypotheses module the iteration
//! u ← Pu converges geometrically from any bounded initial guess; the solver
//! starts from the homogeneous part S_α(t)φ(0) + K_α(t)ϕ(0).

use std::collections::HashMap;

use thiserror::Error;

use crate::fraccalc::{FracCalcError, SampledFunction};
use crate::mlfunc::MlError;
use crate::operators::{OperatorError, OperatorFunctionKind, SpectralOperator};

pub type StateVec = Vec<f64>;
pub type HistoryFn = Box<dyn Fn(f64) -> StateVec + Send + Sync>;
pub type ForcingFn = Box<dyn Fn(f64, &[f64]) -> StateVec + Send + Sync>;
pub type ImpulseMap = Box<dyn Fn(&[f64]) -> StateVec + Send + Sync>;
pub type ScalarFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;

/// Slack accepted on domain boundaries before reporting a range error.
const RANGE_SLACK: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("fractional order must lie in (1,2), got {0}")]
    OrderOutOfRange(f64),
    #[error("horizon must be positive, got {0}")]
    BadHorizon(f64),
    #[error("delay depth must be nonnegative, got {0}")]
    NegativeDelayDepth(f64),
    #[error("impulse times must satisfy 0 < t_1 < … < t_m < T strictly; impulse {index} at t = {time} violates this")]
    ImpulseOrdering { index: usize, time: f64 },
    #[error("{what} has dimension {got}, operator has dimension {dim}")]
    DimensionMismatch { what: &'static str, dim: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    BadConfig(&'static str),
    #[error("delay causality violated at s = {s}: evaluated target {target} outside [{lo}, {s}]")]
    DelayCausality { s: f64, target: f64, lo: f64 },
    #[error("time {t} outside the trajectory domain [{lo}, {hi}]")]
    OutOfDomain { t: f64, lo: f64, hi: f64 },
    #[error("picard iteration did not converge after {iterations} iterations: last delta {final_delta:e}, last ratio {last_ratio:?}")]
    NonConvergence { iterations: usize, final_delta: f64, last_ratio: Option<f64> },
    #[error("trajectory samples are inconsistent: {0}")]
    BadTrajectory(&'static str),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    FracCalc(#[from] FracCalcError),
}

/// Delay law ρ producing the evaluation time of the delayed argument.
pub enum DelaySpec {
    /// No delay: the forcing reads the current state, ρ(s, u_s) = s.
    None,
    /// Fixed lag τ ≥ 0: ρ(s, u_s) = s - τ.
    Constant(f64),
    /// Pointwise state-dependent law ρ(s, u_s) = ρ1(s) · ρ2(‖u_s(0)‖),
    /// with the Euclidean norm of the current state.
    StateDependent { rho1: ScalarFn, rho2: ScalarFn },
}

impl DelaySpec {
    fn target(&self, s: f64, current_norm: f64) -> f64 {
        match self {
            DelaySpec::None => s,
            DelaySpec::Constant(tau) => s - tau,
            DelaySpec::StateDependent { rho1, rho2 } => rho1(s) * rho2(current_norm),
        }
    }
}

/// One impulse: at `time`, the state jumps by `state_jump(u(t⁻))` and the
/// derivative by `slope_jump(u(t⁻))`.
pub struct Impulse {
    pub time: f64,
    pub state_jump: ImpulseMap,
    pub slope_jump: ImpulseMap,
}

/// Full description of the initial-value problem on [-d, T].
pub struct ProblemSpec {
    pub alpha: f64,
    pub horizon: f64,
    pub delay_depth: f64,
    pub operator: SpectralOperator,
    /// φ on [-d, 0].
    pub history: HistoryFn,
    /// ϕ = φ' on [-d, 0]; only ϕ(0) enters the solution formula.
    pub history_slope: HistoryFn,
    /// f(t, v) where v is the delayed state.
    pub forcing: ForcingFn,
    pub delay: DelaySpec,
    pub impulses: Vec<Impulse>,
}

impl ProblemSpec {
    pub fn dim(&self) -> usize {
        self.operator.dim()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.alpha > 1.0 && self.alpha < 2.0) {
            return Err(SolverError::OrderOutOfRange(self.alpha));
        }
        if !(self.horizon > 0.0) {
            return Err(SolverError::BadHorizon(self.horizon));
        }
        if !(self.delay_depth >= 0.0) {
            return Err(SolverError::NegativeDelayDepth(self.delay_depth));
        }
        let mut prev = 0.0;
        for (i, imp) in self.impulses.iter().enumerate() {
            if !(imp.time > prev && imp.time < self.horizon) {
                return Err(SolverError::ImpulseOrdering { index: i + 1, time: imp.time });
            }
            prev = imp.time;
        }
        let dim = self.dim();
        let phi0 = (self.history)(0.0);
        if phi0.len() != dim {
            return Err(SolverError::DimensionMismatch {
                what: "history value",
                dim,
                got: phi0.len(),
            });
        }
        let vphi0 = (self.history_slope)(0.0);
        if vphi0.len() != dim {
            return Err(SolverError::DimensionMismatch {
                what: "history slope",
                dim,
                got: vphi0.len(),
            });
        }
        if let DelaySpec::Constant(tau) = self.delay {
            if tau < 0.0 {
                return Err(SolverError::BadConfig("constant delay must be nonnegative"));
            }
        }
        Ok(())
    }
}

/// Discretization parameters.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    /// Base time step; each smooth piece is cut into an integer number of
    /// cells of step at most roughly this.
    pub step: f64,
    /// Picard stopping tolerance in the discrete sup norm.
    pub tol: f64,
    pub max_iter: usize,
    /// Subcells per grid cell when sampling the smooth kernel factor.
    pub quad_refine: usize,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.step > 0.0) {
            return Err(SolverError::BadConfig("step must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(SolverError::BadConfig("tolerance must be positive"));
        }
        if self.max_iter == 0 {
            return Err(SolverError::BadConfig("max_iter must be at least 1"));
        }
        if self.quad_refine == 0 {
            return Err(SolverError::BadConfig("quad_refine must be at least 1"));
        }
        Ok(())
    }
}

/// Which branch of a duplicated impulse node a sample represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Interior,
    Left,
    Right,
}

impl Side {
    pub fn marker(&self) -> &'static str {
        match self {
            Side::Interior => ".",
            Side::Left => "L",
            Side::Right => "R",
        }
    }

    pub fn from_marker(s: &str) -> Option<Side> {
        match s {
            "." => Some(Side::Interior),
            "L" => Some(Side::Left),
            "R" => Some(Side::Right),
            _ => None,
        }
    }
}

/// Piecewise solution samples on [-d, T] with duplicated impulse nodes.
#[derive(Debug, Clone)]
pub struct Trajectory {
    times: Vec<f64>,
    sides: Vec<Side>,
    values: Vec<StateVec>,
    /// ϕ(0), the derivative at t = 0.
    pub initial_slope: StateVec,
    pub alpha: f64,
    pub operator: SpectralOperator,
}

impl Trajectory {
    /// Reassemble a trajectory from stored samples (e.g. a CSV read-back).
    pub fn from_samples(
        times: Vec<f64>,
        sides: Vec<Side>,
        values: Vec<StateVec>,
        initial_slope: StateVec,
        alpha: f64,
        operator: SpectralOperator,
    ) -> Result<Self, SolverError> {
        if times.len() != sides.len() || times.len() != values.len() || times.is_empty() {
            return Err(SolverError::BadTrajectory("length mismatch between columns"));
        }
        let dim = operator.dim();
        if values.iter().any(|v| v.len() != dim) || initial_slope.len() != dim {
            return Err(SolverError::BadTrajectory("state dimension mismatch"));
        }
        for i in 1..times.len() {
            if times[i] < times[i - 1] {
                return Err(SolverError::BadTrajectory("times must be nondecreasing"));
            }
            if times[i] == times[i - 1] && !(sides[i - 1] == Side::Left && sides[i] == Side::Right)
            {
                return Err(SolverError::BadTrajectory(
                    "duplicated nodes must form a left/right pair",
                ));
            }
        }
        Ok(Self { times, sides, values, initial_slope, alpha, operator })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn values(&self) -> &[StateVec] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.times[0]
    }

    pub fn end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    /// Index of the t = 0 node where the main interval starts.
    pub(crate) fn main_start(&self) -> usize {
        self.times.partition_point(|&t| t < 0.0)
    }

    /// Value at time t by linear interpolation, returning the left value at
    /// duplicated impulse nodes (the trajectory is left-continuous there).
    pub fn eval(&self, t: f64) -> Result<StateVec, SolverError> {
        let (lo, hi) = (self.start(), self.end());
        let slack = RANGE_SLACK * (1.0 + hi.abs().max(lo.abs()));
        if t < lo - slack || t > hi + slack {
            return Err(SolverError::OutOfDomain { t, lo, hi });
        }
        let t = t.clamp(lo, hi);
        let idx = self.times.partition_point(|&x| x < t);
        if idx < self.times.len() && self.times[idx] == t {
            return Ok(self.values[idx].clone());
        }
        if idx == 0 {
            return Ok(self.values[0].clone());
        }
        if idx == self.times.len() {
            return Ok(self.values[idx - 1].clone());
        }
        let (t0, t1) = (self.times[idx - 1], self.times[idx]);
        let w = (t - t0) / (t1 - t0);
        Ok(self.values[idx - 1]
            .iter()
            .zip(&self.values[idx])
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect())
    }

    /// Value at time t preferring the requested side at duplicated nodes.
    pub fn eval_side(&self, t: f64, side: Side) -> Result<StateVec, SolverError> {
        if side == Side::Right {
            let idx = self.times.partition_point(|&x| x < t);
            if idx < self.times.len() && self.times[idx] == t {
                let pick = if idx + 1 < self.times.len() && self.times[idx + 1] == t {
                    idx + 1
                } else {
                    idx
                };
                return Ok(self.values[pick].clone());
            }
        }
        self.eval(t)
    }

    /// Max-abs jump defect |u(t_k⁺) - u(t_k⁻) - I_k(u(t_k⁻))| per impulse.
    pub fn jump_defects(&self, impulses: &[Impulse]) -> Vec<f64> {
        let mut out = Vec::new();
        for imp in impulses {
            let idx = self.times.partition_point(|&x| x < imp.time);
            if idx + 1 >= self.times.len() || self.times[idx] != imp.time {
                out.push(f64::NAN);
                continue;
            }
            let left = &self.values[idx];
            let right = &self.values[idx + 1];
            let jump = (imp.state_jump)(left);
            let defect = right
                .iter()
                .zip(left)
                .zip(&jump)
                .map(|((r, l), j)| (r - l - j).abs())
                .fold(0.0, f64::max);
            out.push(defect);
        }
        out
    }

    /// Discrete sup-norm distance: max over nodes of the max-abs coordinate
    /// difference. Grids must agree.
    pub fn sup_distance(&self, other: &Trajectory) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

/// Segment evaluation u_c(θ) = u(c + θ) of the history at offset θ ∈ [-d, 0],
/// left value at exact impulse times.
pub fn eval_history_segment(
    traj: &Trajectory,
    c: f64,
    theta: f64,
) -> Result<StateVec, SolverError> {
    traj.eval(c + theta)
}

/// Grid with duplicated impulse nodes and per-node impulse counts.
pub(crate) struct GridLayout {
    pub times: Vec<f64>,
    pub sides: Vec<Side>,
    /// Number of impulses acting at this node: k for t ∈ (t_k, t_{k+1}],
    /// k-1 at the left node of t_k, k at its right node.
    pub epochs: Vec<usize>,
    /// Index of the t = 0 node.
    pub main_start: usize,
}

pub(crate) fn build_grid(prob: &ProblemSpec, cfg: &SolverConfig) -> GridLayout {
    let mut times = Vec::new();
    let mut sides = Vec::new();
    let mut epochs = Vec::new();
    if prob.delay_depth > 0.0 {
        let n = ((prob.delay_depth / cfg.step).round() as usize).max(1);
        let h = prob.delay_depth / n as f64;
        for j in 0..n {
            times.push(-prob.delay_depth + j as f64 * h);
            sides.push(Side::Interior);
            epochs.push(0);
        }
    }
    let main_start = times.len();
    let mut bounds = vec![0.0];
    bounds.extend(prob.impulses.iter().map(|imp| imp.time));
    bounds.push(prob.horizon);
    for p in 0..bounds.len() - 1 {
        let (a, b) = (bounds[p], bounds[p + 1]);
        let n = (((b - a) / cfg.step).round() as usize).max(1);
        let h = (b - a) / n as f64;
        // piece-start node: t = 0 for the first piece, the right branch of an
        // impulse node otherwise
        times.push(a);
        sides.push(if p == 0 { Side::Interior } else { Side::Right });
        epochs.push(p);
        let last_piece = p == bounds.len() - 2;
        for j in 1..=n {
            let t = if j == n { b } else { a + j as f64 * h };
            times.push(t);
            sides.push(if j == n && !last_piece { Side::Left } else { Side::Interior });
            epochs.push(p);
        }
    }
    GridLayout { times, sides, epochs, main_start }
}

/// Scalar multiplier cache for the three operator functions; keyed by the
/// exact bits of the elapsed time so repeated lattice values are reused
/// across nodes and Picard iterations.
pub(crate) struct MultiplierCache {
    alpha: f64,
    eigenvalues: Vec<f64>,
    maps: [Vec<HashMap<u64, f64>>; 3],
    /// (τ^α, τ^{α+1}) pairs for the exact kernel moments.
    powers: HashMap<u64, (f64, f64)>,
}

impl MultiplierCache {
    pub fn new(op: &SpectralOperator, alpha: f64) -> Self {
        let n = op.dim();
        Self {
            alpha,
            eigenvalues: op.eigenvalues().to_vec(),
            maps: [vec![HashMap::new(); n], vec![HashMap::new(); n], vec![HashMap::new(); n]],
            powers: HashMap::new(),
        }
    }

    fn kind_index(kind: OperatorFunctionKind) -> usize {
        match kind {
            OperatorFunctionKind::InitialValue => 0,
            OperatorFunctionKind::InitialSlope => 1,
            OperatorFunctionKind::Forcing => 2,
        }
    }

    fn multiplier(
        &mut self,
        kind: OperatorFunctionKind,
        mode: usize,
        t: f64,
    ) -> Result<f64, SolverError> {
        let map = &mut self.maps[Self::kind_index(kind)][mode];
        if let Some(&v) = map.get(&t.to_bits()) {
            return Ok(v);
        }
        let v = crate::operators::opfunc_multiplier(kind, self.alpha, self.eigenvalues[mode], t)?;
        map.insert(t.to_bits(), v);
        Ok(v)
    }

    /// E_{α,α}(μ τ^α): the T_α multiplier without its τ^{α-1} weight.
    fn kernel_factor(&mut self, mode: usize, tau: f64) -> Result<f64, SolverError> {
        let map = &mut self.maps[Self::kind_index(OperatorFunctionKind::Forcing)][mode];
        if let Some(&v) = map.get(&tau.to_bits()) {
            return Ok(v);
        }
        let params = crate::mlfunc::MlParams::new(self.alpha, self.alpha)?;
        let v = crate::mlfunc::ml_e(params, self.eigenvalues[mode] * tau.powf(self.alpha))?;
        map.insert(tau.to_bits(), v);
        Ok(v)
    }

    fn kernel_powers(&mut self, tau: f64) -> (f64, f64) {
        if let Some(&p) = self.powers.get(&tau.to_bits()) {
            return p;
        }
        let p = (tau.powf(self.alpha), tau.powf(self.alpha + 1.0));
        self.powers.insert(tau.to_bits(), p);
        (p.0, p.1)
    }
}

/// One convolution cell: f linear between (s0, f0) and (s1, f1), s0 < s1.
struct Cell<'a> {
    s0: f64,
    s1: f64,
    f0: &'a [f64],
    f1: &'a [f64],
}

/// ∫_0^t T_α(t-s) f(s) ds per eigenmode: piecewise-linear f, exact moments of
/// τ^{α-1}, smooth factor E_{α,α}(μ τ^α) frozen at subcell midpoints.
fn convolve_cells(
    cache: &mut MultiplierCache,
    cells: &[Cell<'_>],
    t: f64,
    quad_refine: usize,
    dim: usize,
) -> Result<StateVec, SolverError> {
    let alpha = cache.alpha;
    let mut acc = vec![0.0; dim];
    for cell in cells {
        if cell.s0 >= t {
            break;
        }
        let end = cell.s1.min(t);
        let width = cell.s1 - cell.s0;
        let q = quad_refine;
        for sub in 0..q {
            let a = cell.s0 + width * sub as f64 / q as f64;
            if a >= t {
                break;
            }
            let b_raw =
                if sub == q - 1 { cell.s1 } else { cell.s0 + width * (sub + 1) as f64 / q as f64 };
            let b = b_raw.min(end);
            if b <= a {
                continue;
            }
            let (ta, tb) = (t - a, t - b);
            let (ta_a, ta_a1) = cache.kernel_powers(ta);
            let (tb_a, tb_a1) = cache.kernel_powers(tb);
            let m0 = (ta_a - tb_a) / alpha;
            let m1 = (ta_a1 - tb_a1) / (alpha + 1.0);
            let tau_mid = t - 0.5 * (a + b);
            for mode in 0..dim {
                let e_mid = cache.kernel_factor(mode, tau_mid)?;
                let slope = (cell.f1[mode] - cell.f0[mode]) / width;
                // f(s) = f0 + slope (s - s0) = (f0 + slope (t - s0)) - slope τ
                let c0 = cell.f0[mode] + slope * (t - cell.s0);
                let c1 = -slope;
                acc[mode] += e_mid * (c0 * m0 + c1 * m1);
            }
        }
    }
    Ok(acc)
}

/// Forcing convolution at a single time for an externally sampled forcing.
/// `fvals` is the forcing sampled on the solver grid from 0 up to at least t.
pub fn convolve_t(
    prob: &ProblemSpec,
    fvals: &SampledFunction,
    t: f64,
    quad_refine: usize,
) -> Result<StateVec, SolverError> {
    if quad_refine == 0 {
        return Err(SolverError::BadConfig("quad_refine must be at least 1"));
    }
    let dim = prob.dim();
    if fvals.dim() != dim {
        return Err(SolverError::DimensionMismatch {
            what: "forcing samples",
            dim,
            got: fvals.dim(),
        });
    }
    let mut cache = MultiplierCache::new(&prob.operator, prob.alpha);
    let grid = fvals.grid();
    let values = fvals.values();
    let cells: Vec<Cell<'_>> = (0..fvals.len() - 1)
        .map(|j| Cell { s0: grid[j], s1: grid[j + 1], f0: &values[j], f1: &values[j + 1] })
        .collect();
    convolve_cells(&mut cache, &cells, t, quad_refine, dim)
}

fn delayed_forcing_values(
    traj: &Trajectory,
    prob: &ProblemSpec,
    layout: &GridLayout,
) -> Result<Vec<StateVec>, SolverError> {
    let mut fv = vec![Vec::new(); layout.times.len()];
    let lo = -prob.delay_depth;
    for i in layout.main_start..layout.times.len() {
        let s = layout.times[i];
        let norm = traj.values[i].iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut r = prob.delay.target(s, norm);
        let slack = RANGE_SLACK * (1.0 + prob.horizon);
        if r < lo - slack || r > s + slack {
            return Err(SolverError::DelayCausality { s, target: r, lo });
        }
        r = r.clamp(lo, s);
        let delayed = traj.eval(r)?;
        fv[i] = (prob.forcing)(s, &delayed);
        if fv[i].len() != prob.dim() {
            return Err(SolverError::DimensionMismatch {
                what: "forcing output",
                dim: prob.dim(),
                got: fv[i].len(),
            });
        }
    }
    Ok(fv)
}

fn apply_p_with_cache(
    traj: &Trajectory,
    prob: &ProblemSpec,
    cfg: &SolverConfig,
    layout: &GridLayout,
    cache: &mut MultiplierCache,
) -> Result<Trajectory, SolverError> {
    let dim = prob.dim();
    let phi0 = (prob.history)(0.0);
    let vphi0 = (prob.history_slope)(0.0);

    let fv = delayed_forcing_values(traj, prob, layout)?;

    // impulse jumps read from the input trajectory's left values
    let mut state_jumps = Vec::with_capacity(prob.impulses.len());
    let mut slope_jumps = Vec::with_capacity(prob.impulses.len());
    for imp in &prob.impulses {
        let left = traj.eval(imp.time)?;
        let sj = (imp.state_jump)(&left);
        let qj = (imp.slope_jump)(&left);
        if sj.len() != dim || qj.len() != dim {
            return Err(SolverError::DimensionMismatch {
                what: "impulse map output",
                dim,
                got: sj.len().max(qj.len()),
            });
        }
        state_jumps.push(sj);
        slope_jumps.push(qj);
    }

    let mut values = traj.values.clone();
    for i in layout.main_start..layout.times.len() {
        let t = layout.times[i];
        let mut acc = vec![0.0; dim];
        for mode in 0..dim {
            let s = cache.multiplier(OperatorFunctionKind::InitialValue, mode, t)?;
            let k = cache.multiplier(OperatorFunctionKind::InitialSlope, mode, t)?;
            acc[mode] = s * phi0[mode] + k * vphi0[mode];
        }
        for kk in 0..layout.epochs[i] {
            let dt = t - prob.impulses[kk].time;
            for mode in 0..dim {
                let s = cache.multiplier(OperatorFunctionKind::InitialValue, mode, dt)?;
                let k = cache.multiplier(OperatorFunctionKind::InitialSlope, mode, dt)?;
                acc[mode] += s * state_jumps[kk][mode] + k * slope_jumps[kk][mode];
            }
        }
        // convolution over all nonempty cells strictly before t
        let mut cells = Vec::new();
        for j in layout.main_start..i {
            if layout.times[j + 1] > layout.times[j] {
                cells.push(Cell {
                    s0: layout.times[j],
                    s1: layout.times[j + 1],
                    f0: &fv[j],
                    f1: &fv[j + 1],
                });
            }
        }
        let conv = convolve_cells(cache, &cells, t, cfg.quad_refine, dim)?;
        for mode in 0..dim {
            acc[mode] += conv[mode];
        }
        values[i] = acc;
    }

    Ok(Trajectory {
        times: layout.times.clone(),
        sides: layout.sides.clone(),
        values,
        initial_slope: vphi0,
        alpha: prob.alpha,
        operator: prob.operator.clone(),
    })
}

/// One application of the mild-solution operator P to a trajectory on the
/// grid implied by `cfg`. The history part is copied from φ; the forcing is
/// evaluated on the input trajectory.
pub fn apply_p(
    traj: &Trajectory,
    prob: &ProblemSpec,
    cfg: &SolverConfig,
) -> Result<Trajectory, SolverError> {
    prob.validate()?;
    cfg.validate()?;
    let layout = build_grid(prob, cfg);
    if layout.times.len() != traj.len() {
        return Err(SolverError::BadTrajectory("trajectory grid does not match configuration"));
    }
    let mut cache = MultiplierCache::new(&prob.operator, prob.alpha);
    apply_p_with_cache(traj, prob, cfg, &layout, &mut cache)
}

/// Initial Picard guess: history on [-d, 0], homogeneous part
/// S_α(t)φ(0) + K_α(t)ϕ(0) on (0, T].
fn initial_guess(
    prob: &ProblemSpec,
    layout: &GridLayout,
    cache: &mut MultiplierCache,
) -> Result<Trajectory, SolverError> {
    let dim = prob.dim();
    let phi0 = (prob.history)(0.0);
    let vphi0 = (prob.history_slope)(0.0);
    let mut values = Vec::with_capacity(layout.times.len());
    for i in 0..layout.times.len() {
        let t = layout.times[i];
        if i < layout.main_start {
            let v = (prob.history)(t);
            if v.len() != dim {
                return Err(SolverError::DimensionMismatch {
                    what: "history value",
                    dim,
                    got: v.len(),
                });
            }
            values.push(v);
        } else {
            let mut v = vec![0.0; dim];
            for mode in 0..dim {
                let s = cache.multiplier(OperatorFunctionKind::InitialValue, mode, t)?;
                let k = cache.multiplier(OperatorFunctionKind::InitialSlope, mode, t)?;
                v[mode] = s * phi0[mode] + k * vphi0[mode];
            }
            values.push(v);
        }
    }
    Ok(Trajectory {
        times: layout.times.clone(),
        sides: layout.sides.clone(),
        values,
        initial_slope: vphi0,
        alpha: prob.alpha,
        operator: prob.operator.clone(),
    })
}

/// Result of a converged Picard iteration.
pub struct PicardOutcome {
    pub trajectory: Trajectory,
    pub iterations: usize,
    /// Sup-norm distance between the last two iterates.
    pub final_delta: f64,
    /// Last ratio ‖u⁽ⁿ⁺¹⁾-u⁽ⁿ⁾‖ / ‖u⁽ⁿ⁾-u⁽ⁿ⁻¹⁾‖, when two steps exist.
    pub last_ratio: Option<f64>,
}

/// Solve u = Pu by Picard iteration from the homogeneous initial guess.
pub fn picard_solve(prob: &ProblemSpec, cfg: &SolverConfig) -> Result<PicardOutcome, SolverError> {
    prob.validate()?;
    cfg.validate()?;
    let layout = build_grid(prob, cfg);
    let mut cache = MultiplierCache::new(&prob.operator, prob.alpha);
    let mut current = initial_guess(prob, &layout, &mut cache)?;
    let mut prev_delta: Option<f64> = None;
    let mut last_ratio: Option<f64> = None;
    for iter in 1..=cfg.max_iter {
        let next = apply_p_with_cache(&current, prob, cfg, &layout, &mut cache)?;
        let delta = next.sup_distance(&current);
        if let Some(p) = prev_delta {
            if p > 0.0 {
                last_ratio = Some(delta / p);
            }
        }
        current = next;
        if delta <= cfg.tol {
            return Ok(PicardOutcome {
                trajectory: current,
                iterations: iter,
                final_delta: delta,
                last_ratio,
            });
        }
        prev_delta = Some(delta);
    }
    Err(SolverError::NonConvergence {
        iterations: cfg.max_iter,
        final_delta: prev_delta.unwrap_or(f64::NAN),
        last_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mlfunc::{self, MlParams};
    use approx::assert_abs_diff_eq;

    fn constant_history(v: StateVec) -> HistoryFn {
        Box::new(move |_| v.clone())
    }

    fn zero_forcing(dim: usize) -> ForcingFn {
        Box::new(move |_, _| vec![0.0; dim])
    }

    fn zero_map(dim: usize) -> ImpulseMap {
        Box::new(move |_| vec![0.0; dim])
    }

    fn free_problem(alpha: f64) -> ProblemSpec {
        // A = 0 scalar, f ≡ 0, u(0) = 1, u'(0) = 0.5, one impulse
        ProblemSpec {
            alpha,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![0.0], "zero").unwrap(),
            history: constant_history(vec![1.0]),
            history_slope: constant_history(vec![0.5]),
            forcing: zero_forcing(1),
            delay: DelaySpec::None,
            impulses: vec![Impulse {
                time: 0.5,
                state_jump: Box::new(|_| vec![0.25]),
                slope_jump: Box::new(|_| vec![0.4]),
            }],
        }
    }

    fn cfg(h: f64) -> SolverConfig {
        SolverConfig { step: h, tol: 1e-10, max_iter: 30, quad_refine: 2 }
    }

    #[test]
    fn free_motion_with_impulse_is_piecewise_linear() {
        // S = I and K = tI on the zero operator, so the closed form is
        // u = 1 + 0.5 t (+ 0.25 + 0.4 (t - 1/2) past the impulse)
        let prob = free_problem(1.5);
        let out = picard_solve(&prob, &cfg(1.0 / 64.0)).unwrap();
        assert!(out.iterations <= 2, "P is constant in u; got {} iterations", out.iterations);
        for (i, &t) in out.trajectory.times().iter().enumerate() {
            let mut expect = 1.0 + 0.5 * t;
            let after = t > 0.5 || (t == 0.5 && out.trajectory.sides()[i] == Side::Right);
            if after {
                expect += 0.25 + 0.4 * (t - 0.5);
            }
            assert_abs_diff_eq!(out.trajectory.values()[i][0], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn jump_exactness() {
        let prob = free_problem(1.3);
        let out = picard_solve(&prob, &cfg(1.0 / 64.0)).unwrap();
        let defects = out.trajectory.jump_defects(&prob.impulses);
        assert!(defects[0] <= 1e-12, "jump defect {:.3e}", defects[0]);
    }

    #[test]
    fn constant_forcing_reproduces_power_solution() {
        // A = 0, f ≡ 1, zero data: u(t) = t^α/Γ(α+1)
        let alpha = 1.5;
        let prob = ProblemSpec {
            alpha,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![0.0], "zero").unwrap(),
            history: constant_history(vec![0.0]),
            history_slope: constant_history(vec![0.0]),
            forcing: Box::new(|_, _| vec![1.0]),
            delay: DelaySpec::None,
            impulses: vec![],
        };
        let out = picard_solve(&prob, &cfg(1.0 / 256.0)).unwrap();
        let norm = mlfunc::gamma(alpha + 1.0).unwrap();
        for (i, &t) in out.trajectory.times().iter().enumerate() {
            let expect = t.powf(alpha) / norm;
            assert_abs_diff_eq!(out.trajectory.values()[i][0], expect, epsilon = 1e-6);
        }
    }

    #[test]
    fn homogeneous_scalar_matches_mittag_leffler() {
        // μ = -1, f ≡ 0: u(t) = E_{α,1}(-t^α); P is constant so one sweep wins
        let alpha = 1.5;
        let prob = ProblemSpec {
            alpha,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![-1.0], "scalar").unwrap(),
            history: constant_history(vec![1.0]),
            history_slope: constant_history(vec![0.0]),
            forcing: zero_forcing(1),
            delay: DelaySpec::None,
            impulses: vec![],
        };
        let out = picard_solve(&prob, &cfg(1.0 / 256.0)).unwrap();
        let params = MlParams::new(alpha, 1.0).unwrap();
        for (i, &t) in out.trajectory.times().iter().enumerate() {
            let expect = mlfunc::ml_e(params, -t.powf(alpha)).unwrap();
            assert_abs_diff_eq!(out.trajectory.values()[i][0], expect, epsilon = 1e-9);
        }
        // fixed-point residual within twice the tolerance
        let reapplied = apply_p(&out.trajectory, &prob, &cfg(1.0 / 256.0)).unwrap();
        assert!(reapplied.sup_distance(&out.trajectory) <= 2e-10);
    }

    #[test]
    fn convolution_moments_zero_eigenvalue() {
        // μ = 0: ∫_0^t τ^{α-1}/Γ(α) f(t-τ) dτ has closed moments
        let alpha = 1.5;
        let prob = ProblemSpec {
            alpha,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![0.0], "zero").unwrap(),
            history: constant_history(vec![0.0]),
            history_slope: constant_history(vec![0.0]),
            forcing: zero_forcing(1),
            delay: DelaySpec::None,
            impulses: vec![],
        };
        let n = 64;
        let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let ones = SampledFunction::scalar(grid.clone(), vec![1.0; n + 1]).unwrap();
        let v = convolve_t(&prob, &ones, 1.0, 2).unwrap();
        assert_abs_diff_eq!(v[0], 0.752252778063675, epsilon = 1e-12);

        let ramp = SampledFunction::scalar(grid.clone(), grid.clone()).unwrap();
        let v = convolve_t(&prob, &ramp, 1.0, 2).unwrap();
        assert_abs_diff_eq!(v[0], 0.3009011112254701, epsilon = 1e-12);
    }

    #[test]
    fn convolution_derived_value_negative_eigenvalue() {
        // ∫_0^1 τ^{1/2} E_{1.5,1.5}(-τ^{1.5}) dτ, frozen by adaptive quadrature
        let expected = 0.60337063468191192;
        let prob = ProblemSpec {
            alpha: 1.5,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![-1.0], "scalar").unwrap(),
            history: constant_history(vec![0.0]),
            history_slope: constant_history(vec![0.0]),
            forcing: zero_forcing(1),
            delay: DelaySpec::None,
            impulses: vec![],
        };
        let mut errs = Vec::new();
        for n in [256usize, 1024] {
            let grid: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
            let ones = SampledFunction::scalar(grid, vec![1.0; n + 1]).unwrap();
            let v = convolve_t(&prob, &ones, 1.0, 2).unwrap();
            errs.push((v[0] - expected).abs());
        }
        assert!(errs[0] < 1e-5, "coarse error {:.2e}", errs[0]);
        assert!(errs[1] < errs[0] / 2.0, "no convergence toward the frozen value: {errs:?}");
    }

    #[test]
    fn history_segment_evaluation() {
        let prob = ProblemSpec {
            alpha: 1.5,
            horizon: 1.0,
            delay_depth: 0.5,
            operator: SpectralOperator::new(vec![0.0], "zero").unwrap(),
            history: Box::new(|t| vec![2.0 + t]),
            history_slope: constant_history(vec![1.0]),
            forcing: zero_forcing(1),
            delay: DelaySpec::None,
            impulses: vec![Impulse {
                time: 0.5,
                state_jump: Box::new(|_| vec![1.0]),
                slope_jump: zero_map(1),
            }],
        };
        let out = picard_solve(&prob, &cfg(1.0 / 32.0)).unwrap();
        // θ = 0 at c = 0 returns φ(0)
        let v = eval_history_segment(&out.trajectory, 0.0, 0.0).unwrap();
        assert_abs_diff_eq!(v[0], 2.0, epsilon = 1e-12);
        // left value at the impulse time
        let v = eval_history_segment(&out.trajectory, 0.5, 0.0).unwrap();
        let expect_left = 2.0 + 0.5; // u = 2 + t before the jump on the zero operator
        assert_abs_diff_eq!(v[0], expect_left, epsilon = 1e-10);
        // interpolation reproduces linears mid-cell inside the history
        let v = eval_history_segment(&out.trajectory, 0.0, -0.21).unwrap();
        assert_abs_diff_eq!(v[0], 2.0 - 0.21, epsilon = 1e-12);
    }

    #[test]
    fn delay_causality_violation_is_reported() {
        let prob = ProblemSpec {
            alpha: 1.5,
            horizon: 1.0,
            delay_depth: 0.0,
            operator: SpectralOperator::new(vec![0.0], "zero").unwrap(),
            history: constant_history(vec![0.0]),
            history_slope: constant_history(vec![0.0]),
            forcing: Box::new(|_, v| v.to_vec()),
            // ρ(s) = s + 1/2 points into the future
            delay: DelaySpec::StateDependent {
                rho1: Box::new(|s| s + 0.5),
                rho2: Box::new(|_| 1.0),
            },
            impulses: vec![],
        };
        match picard_solve(&prob, &cfg(1.0 / 16.0)) {
            Err(SolverError::DelayCausality { .. }) => {}
            other => panic!("expected causality error, got {:?}", other.map(|_| ())),
        }
    }

    #[test]
    fn constant_delay_reads_history() {
        let prob = ProblemSpec {
            alpha: 1.4,
            horizon: 0.5,
            delay_depth: 0.5,
            operator: SpectralOperator::new(vec![-1.0], "scalar").unwrap(),
            history: Box::new(|t| vec![1.0 + t]),
            history_slope: constant_history(vec![1.0]),
            forcing: Box::new(|_, v| vec![0.5 * v[0]]),
            delay: DelaySpec::Constant(0.3),
            impulses: vec![],
        };
        let out = picard_solve(&prob, &cfg(1.0 / 64.0)).unwrap();
        assert!(out.final_delta <= 1e-10);
        assert!(out.trajectory.values().iter().all(|v| v[0].is_finite()));
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut prob = free_problem(1.5);
        prob.impulses[0].time = 1.5; // beyond the horizon
        assert!(matches!(
            picard_solve(&prob, &cfg(0.1)),
            Err(SolverError::ImpulseOrdering { .. })
        ));
        let mut prob = free_problem(1.5);
        prob.alpha = 2.3;
        assert!(matches!(picard_solve(&prob, &cfg(0.1)), Err(SolverError::OrderOutOfRange(_))));
        let prob = free_problem(1.5);
        let bad = SolverConfig { step: 0.0, tol: 1e-8, max_iter: 5, quad_refine: 1 };
        assert!(matches!(picard_solve(&prob, &bad), Err(SolverError::BadConfig(_))));
    }

    #[test]
    fn grid_snaps_impulses_onto_nodes() {
        // impulse at an off-lattice time still lands exactly on the grid
        let mut prob = free_problem(1.5);
        prob.impulses[0].time = 0.3137;
        let layout = build_grid(&prob, &cfg(1.0 / 64.0));
        let hits: Vec<usize> =
            (0..layout.times.len()).filter(|&i| layout.times[i] == 0.3137).collect();
        assert_eq!(hits.len(), 2, "impulse time must appear as a left/right pair");
        assert_eq!(layout.sides[hits[0]], Side::Left);
        assert_eq!(layout.sides[hits[1]], Side::Right);
    }
}
