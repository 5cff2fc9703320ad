//! Block updates for `U`, `W` and `V`, the sum-power projection, dual
//! bisection, extrapolation, and the WMMSE / MMMSE / A-MMMSE drivers.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    cholesky, eigvals_hermitian, fro_sq, hermitian_part, identity, max_asymmetry, real, solve_hpd, CMat,
};
use crate::model::{init_precoders, ChannelSet, PrecoderSet, ReceiverSet, Stage, SystemConfig, WeightMatrixSet};
use crate::objective::{compute_bounds, weighted_sum_rate, wmmse_objective, BoundsReport, PrecoderSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Wmmse,
    Mmmse,
    Ammmse,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Wmmse, Algorithm::Mmmse, Algorithm::Ammmse];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Wmmse => "wmmse",
            Algorithm::Mmmse => "mmmse",
            Algorithm::Ammmse => "ammmse",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "wmmse" => Ok(Algorithm::Wmmse),
            "mmmse" => Ok(Algorithm::Mmmse),
            "ammmse" => Ok(Algorithm::Ammmse),
            _ => Err(Error::InvalidConfig { field: "algorithm", reason: format!("unknown algorithm `{s}`") }),
        }
    }
}

/// Fixed step size of the projected gradient precoder update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// Use `gamma_safe` from the realization's [`BoundsReport`].
    Safe,
    Fixed(f64),
}

impl StepSize {
    pub fn resolve(self, bounds: &BoundsReport) -> f64 {
        match self {
            StepSize::Safe => bounds.gamma_safe,
            StepSize::Fixed(g) => g,
        }
    }
}

impl Serialize for StepSize {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            StepSize::Safe => s.serialize_str("safe"),
            StepSize::Fixed(g) => s.serialize_f64(*g),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverOptions {
    pub algorithm: Algorithm,
    pub gamma: StepSize,
    pub omega: f64,
    /// Stage-switch threshold on the relative WSR change.
    pub eps1: f64,
    /// Termination threshold on the relative WSR change.
    pub eps2: f64,
    pub max_iters: usize,
    pub bisect_tol: f64,
    pub bisect_max: usize,
    /// Latch the weighted stage once entered. `false` re-tests `eps1` every iteration.
    pub latch_stage: bool,
    /// Keep every `(U, W, V)` iterate in the result.
    #[serde(skip)]
    pub record_iterates: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Wmmse,
            gamma: StepSize::Safe,
            omega: 0.0,
            eps1: 0.1,
            eps2: 1e-3,
            max_iters: 1000,
            bisect_tol: 1e-4,
            bisect_max: 100,
            latch_stage: true,
            record_iterates: false,
        }
    }
}

impl SolverOptions {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidConfig { field, reason: reason.to_string() });
        if !(0.0..1.0).contains(&self.omega) {
            return bad("omega", "must lie in [0, 1)");
        }
        if let StepSize::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad("gamma", "must be positive and finite");
            }
        }
        if self.eps1.is_nan() || self.eps1 <= 0.0 {
            return bad("eps1", "must be positive");
        }
        if self.eps2.is_nan() || self.eps2 <= 0.0 {
            return bad("eps2", "must be positive");
        }
        if self.eps2 > self.eps1 {
            return bad("eps2", "must not exceed eps1");
        }
        if self.max_iters == 0 {
            return bad("max_iters", "must be at least 1");
        }
        if self.bisect_tol.is_nan() || self.bisect_tol <= 0.0 {
            return bad("bisect_tol", "must be positive");
        }
        if self.bisect_max == 0 {
            return bad("bisect_max", "must be at least 1");
        }
        Ok(())
    }
}

/// One outer iteration of a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub t: usize,
    pub wsr_bits: f64,
    pub f_value: f64,
    pub total_power: f64,
    pub stage: Stage,
    /// `f(U^t, W^{t-1}, V_hat)`.
    pub f_after_u: f64,
    /// `f(U^t, W^t, V_hat)`.
    pub f_after_w: f64,
    /// `f(U^t, W^t, V^t)`.
    pub f_after_v: f64,
    /// `|WSR^t - WSR^{t-1}| / WSR^{t-1}`, `+inf` at `t = 1`.
    pub rel_change: f64,
}

/// Block variables of one iteration, kept when `record_iterates` is set.
#[derive(Debug, Clone)]
pub struct IterateSnapshot {
    pub receivers: ReceiverSet,
    pub weight_matrices: WeightMatrixSet,
    /// Feasible precoder `V^t` produced by the iteration.
    pub precoders: PrecoderSet,
    /// Point at which `U^t`, `W^t` and the gradient were evaluated.
    pub anchor: PrecoderSet,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub algorithm: Algorithm,
    pub final_precoders: PrecoderSet,
    pub trace: Vec<IterationRecord>,
    pub iterations: usize,
    pub converged: bool,
    /// `||V - P(V - gamma_safe grad f)||_F / max(1, ||V||_F)` at the final precoder
    /// with freshly optimal `U` and `W`.
    pub stationarity_residual: f64,
    /// First iteration run in the weighted stage.
    pub switch_iteration: Option<usize>,
    pub initial_wsr_bits: f64,
    pub bounds: BoundsReport,
    pub gamma: f64,
    /// Exact precoder updates whose bisection hit its iteration cap.
    pub bisection_failures: usize,
    pub iterates: Vec<IterateSnapshot>,
}

impl SolveResult {
    pub fn final_wsr_bits(&self) -> f64 {
        self.trace.last().map_or(self.initial_wsr_bits, |r| r.wsr_bits)
    }
}

/// MMSE receivers `U_k = (sum_j H_k V_j V_j^H H_k^H + sigma^2 I)^{-1} H_k V_k`.
pub fn update_receivers(channels: &ChannelSet, precoders: &PrecoderSet, sigma2: f64) -> Result<ReceiverSet> {
    let mut out = Vec::with_capacity(channels.users());
    for (k, h) in channels.channels().iter().enumerate() {
        let hv: Vec<CMat> = precoders.0.iter().map(|v| h * v).collect();
        let mut c = identity(h.nrows()) * real(sigma2);
        for g in &hv {
            c += g * g.adjoint();
        }
        let u = solve_hpd(&c, &hv[k]).ok_or_else(|| Error::NonFinite(format!("receive covariance of user {k}")))?;
        out.push(u);
    }
    Ok(ReceiverSet(out))
}

/// `W_k = (I - U_k^H H_k V_k)^{-1}`, symmetrized.
///
/// The argument equals `E_k` only when `U_k` is the MMSE receiver for `V`; any
/// other receiver generally makes it non-Hermitian or singular and is rejected.
pub fn update_weight_matrices(
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    precoders: &PrecoderSet,
) -> Result<WeightMatrixSet> {
    let mut out = Vec::with_capacity(channels.users());
    for (k, h) in channels.channels().iter().enumerate() {
        let u = &receivers.0[k];
        let d = u.ncols();
        let e = identity(d) - u.adjoint() * h * &precoders.0[k];
        let scale = e.norm().max(1.0);
        let eig = eigvals_hermitian(&e);
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if max_asymmetry(&e) > 1e-8 * scale || condition.is_nan() || condition >= 1e12 {
            return Err(Error::IllConditionedWeight { user: k, condition });
        }
        let w = solve_hpd(&e, &identity(d)).ok_or(Error::IllConditionedWeight { user: k, condition })?;
        out.push(hermitian_part(&w));
    }
    Ok(WeightMatrixSet { matrices: out, stage: Stage::Weighted })
}

/// Projection onto `sum_k Tr(V_k V_k^H) <= p_max` by uniform scaling.
pub fn project_sum_power(precoders: &PrecoderSet, p_max: f64) -> PrecoderSet {
    let power = precoders.total_power();
    if power <= p_max {
        precoders.clone()
    } else {
        precoders.scale((p_max / power).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct BisectionOutcome {
    pub lambda: f64,
    pub precoders: PrecoderSet,
    pub converged: bool,
    pub iterations: usize,
}

/// Relative slack below `p_max` accepted for an active constraint.
pub const ACTIVE_POWER_SLACK: f64 = 1e-3;

fn shifted_solve(a: &CMat, b: &[CMat], lambda: f64) -> Option<PrecoderSet> {
    let shifted = a + identity(a.nrows()) * real(lambda);
    let chol = cholesky(&shifted)?;
    let mut out = Vec::with_capacity(b.len());
    for bk in b {
        let v = chol.solve(bk);
        if !crate::linalg::is_finite(&v) {
            return None;
        }
        out.push(v);
    }
    Some(PrecoderSet(out))
}

/// Finds the sum-power multiplier `lambda` with `V_k = (A + lambda I)^{-1} B_k`.
///
/// Returns `lambda = 0` when the unconstrained solution is feasible. Otherwise
/// bisects on `[0, sqrt(sum ||B_k||^2 / p_max)]` until the bracket is narrower
/// than `tol` and the feasible endpoint carries at least
/// `(1 - ACTIVE_POWER_SLACK) p_max`, or until `max_iter` halvings.
pub fn bisect_dual(a: &CMat, b: &[CMat], p_max: f64, tol: f64, max_iter: usize) -> BisectionOutcome {
    if let Some(v0) = shifted_solve(a, b, 0.0) {
        if v0.total_power() <= p_max {
            return BisectionOutcome { lambda: 0.0, precoders: v0, converged: true, iterations: 0 };
        }
    }
    let b_energy: f64 = b.iter().map(fro_sq).sum();
    if b_energy == 0.0 {
        let zeros = PrecoderSet(b.iter().map(|bk| CMat::zeros(bk.nrows(), bk.ncols())).collect());
        return BisectionOutcome { lambda: 0.0, precoders: zeros, converged: true, iterations: 0 };
    }
    let mut lo = 0.0;
    let mut hi = (b_energy / p_max).sqrt();
    // ||V_k(hi)|| <= ||B_k|| / hi, so the upper end is always feasible
    let mut v_hi = shifted_solve(a, b, hi).expect("A + lambda I is positive definite for lambda > 0");
    let target = p_max * (1.0 - ACTIVE_POWER_SLACK);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        if hi - lo < tol && v_hi.total_power() >= target {
            converged = true;
            break;
        }
        let mid = 0.5 * (lo + hi);
        iterations += 1;
        match shifted_solve(a, b, mid) {
            Some(v) if v.total_power() <= p_max => {
                hi = mid;
                v_hi = v;
            }
            _ => lo = mid,
        }
    }
    if !converged && hi < tol && v_hi.total_power() < target {
        // singular A with B in its range: power stays below budget as lambda -> 0,
        // so the constraint does not bind at this resolution
        return BisectionOutcome { lambda: 0.0, precoders: v_hi, converged: true, iterations };
    }
    BisectionOutcome { lambda: hi, precoders: v_hi, converged, iterations }
}

/// Exact minimizer of the precoder subproblem over the power ball.
///
/// Alternative exact solvers (for instance a low-dimensional subspace
/// reformulation) plug in through this trait.
pub trait SubproblemSolver {
    fn solve(&self, system: &PrecoderSystem, p_max: f64, options: &SolverOptions) -> BisectionOutcome;
}

/// Dense Cholesky solves with bisection on the shared dual variable.
#[derive(Debug, Clone, Copy, Default)]
pub struct DualBisection;

impl SubproblemSolver for DualBisection {
    fn solve(&self, system: &PrecoderSystem, p_max: f64, options: &SolverOptions) -> BisectionOutcome {
        bisect_dual(&system.a, &system.b, p_max, options.bisect_tol, options.bisect_max)
    }
}

pub fn update_precoders_exact(
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    weights: &[f64],
    p_max: f64,
    options: &SolverOptions,
) -> BisectionOutcome {
    update_precoders_with(&DualBisection, channels, receivers, weight_matrices, weights, p_max, options)
}

pub fn update_precoders_with(
    solver: &impl SubproblemSolver,
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    weights: &[f64],
    p_max: f64,
    options: &SolverOptions,
) -> BisectionOutcome {
    let system = PrecoderSystem::assemble(channels, receivers, weight_matrices, weights);
    solver.solve(&system, p_max, options)
}

/// `V_k = P(V_hat_k - gamma grad_k f(V_hat))`.
pub fn pgd_precoder_step(
    anchor: &PrecoderSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    channels: &ChannelSet,
    weights: &[f64],
    gamma: f64,
    p_max: f64,
) -> PrecoderSet {
    let system = PrecoderSystem::assemble(channels, receivers, weight_matrices, weights);
    pgd_step_on(&system, anchor, gamma, p_max)
}

pub(crate) fn pgd_step_on(system: &PrecoderSystem, anchor: &PrecoderSet, gamma: f64, p_max: f64) -> PrecoderSet {
    let moved =
        PrecoderSet(anchor.0.iter().enumerate().map(|(k, v)| v - system.gradient(v, k) * real(gamma)).collect());
    project_sum_power(&moved, p_max)
}

/// `V_hat = V^{t-1} + omega (V^{t-1} - V^{t-2})`.
pub fn extrapolate(current: &PrecoderSet, previous: &PrecoderSet, omega: f64) -> PrecoderSet {
    if omega == 0.0 {
        return current.clone();
    }
    PrecoderSet(current.0.iter().zip(&previous.0).map(|(c, p)| c + (c - p) * real(omega)).collect())
}

fn relative_change(current: f64, previous: f64) -> f64 {
    let diff = (current - previous).abs();
    if previous != 0.0 {
        diff / previous.abs()
    } else if diff == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Projected-gradient residual at `v` with `U`, `W` re-optimized for `v`.
pub fn stationarity_residual(
    channels: &ChannelSet,
    precoders: &PrecoderSet,
    weights: &[f64],
    bounds: &BoundsReport,
) -> Result<f64> {
    let u = update_receivers(channels, precoders, bounds.sigma2)?;
    let w = update_weight_matrices(channels, &u, precoders)?;
    let system = PrecoderSystem::assemble(channels, &u, &w, weights);
    let stepped = pgd_step_on(&system, precoders, bounds.gamma_safe, bounds.p_max);
    Ok(stepped.distance(precoders) / precoders.norm().max(1.0))
}

pub fn run_wmmse(channels: &ChannelSet, config: &SystemConfig, options: &SolverOptions) -> Result<SolveResult> {
    expect_algorithm(options, Algorithm::Wmmse)?;
    solve(channels, config, options)
}

pub fn run_mmmse(channels: &ChannelSet, config: &SystemConfig, options: &SolverOptions) -> Result<SolveResult> {
    expect_algorithm(options, Algorithm::Mmmse)?;
    solve(channels, config, options)
}

pub fn run_ammmse(channels: &ChannelSet, config: &SystemConfig, options: &SolverOptions) -> Result<SolveResult> {
    expect_algorithm(options, Algorithm::Ammmse)?;
    solve(channels, config, options)
}

fn expect_algorithm(options: &SolverOptions, expected: Algorithm) -> Result<()> {
    if options.algorithm != expected {
        return Err(Error::InvalidConfig {
            field: "algorithm",
            reason: format!("driver for {expected} called with {}", options.algorithm),
        });
    }
    Ok(())
}

/// Number of consecutive collapsed iterations that flags A-MMMSE divergence.
const DIVERGENCE_PATIENCE: usize = 5;

/// Runs the algorithm selected in `options` from the Gaussian initial point
/// drawn with `config.init_seed`.
pub fn solve(channels: &ChannelSet, config: &SystemConfig, options: &SolverOptions) -> Result<SolveResult> {
    config.validate()?;
    options.validate()?;
    let v0 = init_precoders(config, project_sum_power);
    solve_from(channels, config, options, v0)
}

pub fn solve_from(
    channels: &ChannelSet,
    config: &SystemConfig,
    options: &SolverOptions,
    v0: PrecoderSet,
) -> Result<SolveResult> {
    options.validate()?;
    let sigma2 = channels.noise_power()?;
    let weights = &config.weights;
    let p_max = config.p_max;
    let k_users = channels.users();
    if k_users != config.k || channels.shape() != (config.n, config.m) {
        return Err(Error::ShapeMismatch("channel set does not match the system config".into()));
    }
    let bounds = compute_bounds(channels, weights, p_max, sigma2);
    let gamma = options.gamma.resolve(&bounds);
    let algorithm = options.algorithm;
    let f = |u: &ReceiverSet, w: &WeightMatrixSet, v: &PrecoderSet| wmmse_objective(u, w, v, channels, weights, sigma2);

    let initial_wsr = weighted_sum_rate(channels, &v0, weights)?;
    let mut v_prev = v0.clone();
    let mut v = v0;
    let mut w_prev = WeightMatrixSet::identity(k_users, config.d);
    let mut wsr_prev = initial_wsr;
    let mut rel_prev = f64::INFINITY;
    let mut weighted_latched = false;
    let mut switch_iteration = None;
    let mut trace = Vec::new();
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut bisection_failures = 0;
    let mut best_wsr = initial_wsr;
    let mut collapsed_run = 0;

    for t in 1..=options.max_iters {
        let stage = match algorithm {
            Algorithm::Wmmse => Stage::Weighted,
            _ => {
                let pass = rel_prev <= options.eps1;
                if pass || (options.latch_stage && weighted_latched) {
                    Stage::Weighted
                } else {
                    Stage::Unweighted
                }
            }
        };
        if stage == Stage::Weighted {
            weighted_latched = true;
            if algorithm != Algorithm::Wmmse && switch_iteration.is_none() {
                switch_iteration = Some(t);
            }
        }

        let anchor =
            if algorithm == Algorithm::Ammmse && t >= 2 { extrapolate(&v, &v_prev, options.omega) } else { v.clone() };
        let u = update_receivers(channels, &anchor, sigma2)?;
        let f_after_u = f(&u, &w_prev, &anchor)?;
        let w = match stage {
            Stage::Weighted => update_weight_matrices(channels, &u, &anchor)?,
            Stage::Unweighted => WeightMatrixSet::identity(k_users, config.d),
        };
        let f_after_w = f(&u, &w, &anchor)?;
        let v_new = match algorithm {
            Algorithm::Ammmse => pgd_precoder_step(&anchor, &u, &w, channels, weights, gamma, p_max),
            Algorithm::Wmmse | Algorithm::Mmmse => {
                let out = update_precoders_exact(channels, &u, &w, weights, p_max, options);
                if !out.converged {
                    bisection_failures += 1;
                }
                out.precoders
            }
        };
        debug_assert!(v_new.is_feasible(p_max));
        let f_after_v = f(&u, &w, &v_new)?;
        let wsr = weighted_sum_rate(channels, &v_new, weights)?;
        let rel_change = if t == 1 { f64::INFINITY } else { relative_change(wsr, wsr_prev) };
        trace.push(IterationRecord {
            t,
            wsr_bits: wsr / std::f64::consts::LN_2,
            f_value: f_after_v,
            total_power: v_new.total_power(),
            stage,
            f_after_u,
            f_after_w,
            f_after_v,
            rel_change,
        });

        if algorithm == Algorithm::Ammmse {
            best_wsr = best_wsr.max(wsr);
            collapsed_run = if wsr < 0.5 * best_wsr { collapsed_run + 1 } else { 0 };
            if collapsed_run >= DIVERGENCE_PATIENCE || !wsr.is_finite() {
                return Err(Error::UnstableParameters { gamma, omega: options.omega, iteration: t });
            }
        }
        if options.record_iterates {
            iterates.push(IterateSnapshot {
                receivers: u,
                weight_matrices: w.clone(),
                precoders: v_new.clone(),
                anchor,
            });
        }

        v_prev = std::mem::replace(&mut v, v_new);
        w_prev = w;
        wsr_prev = wsr;
        rel_prev = rel_change;
        if stage == Stage::Weighted && rel_change <= options.eps2 {
            converged = true;
            break;
        }
    }

    let stationarity = stationarity_residual(channels, &v, weights, &bounds)?;
    Ok(SolveResult {
        algorithm,
        final_precoders: v,
        iterations: trace.len(),
        trace,
        converged,
        stationarity_residual: stationarity,
        switch_iteration,
        initial_wsr_bits: initial_wsr / std::f64::consts::LN_2,
        bounds,
        gamma,
        bisection_failures,
        iterates,
    })
}
