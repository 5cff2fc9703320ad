//! Independent oracles: finite-difference gradients, a projected-gradient
//! reference for the precoder subproblem, single-user water-filling and a
//! scan of the eigenvalue / norm bounds along recorded iterates.
//!
//! Everything here re-derives its formula from scratch; none of it calls the
//! solver or objective routines it is used to check.

use nalgebra::SVD;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::linalg::{eigvals_hermitian, fro_sq, CMat};
use crate::model::{ChannelSet, PrecoderSet, ReceiverSet, Stage, WeightMatrixSet};
use crate::objective::BoundsReport;
use crate::solvers::IterateSnapshot;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    pub instances: usize,
    pub passed: bool,
    pub tolerance: f64,
    /// Human-readable description of each failed check.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl OracleReport {
    pub fn new(
        name: impl Into<String>,
        tolerance: f64,
        max_abs_error: f64,
        max_rel_error: f64,
        instances: usize,
    ) -> Self {
        Self {
            name: name.into(),
            max_abs_error,
            max_rel_error,
            instances,
            passed: max_rel_error <= tolerance,
            tolerance,
            failures: Vec::new(),
        }
    }

    /// Combines reports of the same oracle over more instances.
    pub fn merge(mut self, other: &OracleReport) -> Self {
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.max_rel_error = self.max_rel_error.max(other.max_rel_error);
        self.instances += other.instances;
        self.passed = self.max_rel_error <= self.tolerance;
        self.failures.extend(other.failures.iter().cloned());
        self
    }
}

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Central differences over the real and imaginary part of every entry.
/// Returns `df/dRe + i df/dIm` per entry.
pub fn finite_diff_gradient(objective: impl Fn(&PrecoderSet) -> f64, v: &PrecoderSet, h: f64) -> Vec<CMat> {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut out = Vec::with_capacity(v.0.len());
    let mut probe = v.clone();
    for k in 0..v.0.len() {
        let (rows, cols) = v.0[k].shape();
        let mut g = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                let base = v.0[k][(i, j)];
                let mut partial = [0.0; 2];
                for (slot, dir) in [Complex64::new(1.0, 0.0), Complex64::new(0.0, 1.0)].into_iter().enumerate() {
                    probe.0[k][(i, j)] = base + dir * h;
                    let plus = objective(&probe);
                    probe.0[k][(i, j)] = base - dir * h;
                    let minus = objective(&probe);
                    partial[slot] = (plus - minus) / (2.0 * h);
                }
                probe.0[k][(i, j)] = base;
                g[(i, j)] = Complex64::new(partial[0], partial[1]);
            }
        }
        out.push(g);
    }
    out
}

/// MSE matrix built literally from its definition, with the N x N
/// interference-plus-noise covariance formed explicitly.
pub fn naive_mse_matrix(h: &CMat, u: &CMat, precoders: &PrecoderSet, k: usize, sigma2: f64) -> CMat {
    let n = h.nrows();
    let d = u.ncols();
    let mut r = CMat::zeros(n, n);
    for (j, v) in precoders.0.iter().enumerate() {
        if j != k {
            r += h * v * v.adjoint() * h.adjoint();
        }
    }
    for i in 0..n {
        r[(i, i)] += Complex64::new(sigma2, 0.0);
    }
    let a = CMat::identity(d, d) - u.adjoint() * h * &precoders.0[k];
    &a * a.adjoint() + u.adjoint() * r * u
}

/// `sum_k alpha_k (Tr(W_k E_k) - ln det W_k)` with `ln det` from eigenvalues.
pub fn naive_objective(
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    weights: &[f64],
    sigma2: f64,
) -> f64 {
    let mut total = 0.0;
    for k in 0..channels.users() {
        let e = naive_mse_matrix(channels.channel(k), &receivers.0[k], precoders, k, sigma2);
        let w = &weight_matrices.matrices[k];
        let mut tr = 0.0;
        for i in 0..w.nrows() {
            for j in 0..w.ncols() {
                tr += (w[(i, j)] * e[(j, i)]).re;
            }
        }
        let logdet: f64 = eigvals_hermitian(w).iter().map(|x| x.ln()).sum();
        total += weights[k] * (tr - logdet);
    }
    total
}

/// Largest eigenvalue of a Hermitian PSD matrix by power iteration.
pub fn power_iteration_lambda_max(a: &CMat, max_iter: usize, tol: f64) -> f64 {
    let n = a.nrows();
    let mut x = CMat::from_fn(n, 1, |i, _| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * i as f64));
    let mut nrm = x.norm();
    x /= Complex64::new(nrm, 0.0);
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let y = a * &x;
        let next = (x.adjoint() * &y)[(0, 0)].re;
        nrm = y.norm();
        if nrm == 0.0 {
            return 0.0;
        }
        x = y / Complex64::new(nrm, 0.0);
        if (next - lambda).abs() <= tol * next.abs().max(1e-300) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// `sum_k Tr(V_k^H A V_k) - 2 Re Tr(B_k^H V_k)`, entrywise.
pub fn subproblem_objective(a: &CMat, b: &[CMat], v: &PrecoderSet) -> f64 {
    let mut total = 0.0;
    for (vk, bk) in v.0.iter().zip(b) {
        let av = a * vk;
        for i in 0..vk.nrows() {
            for j in 0..vk.ncols() {
                total += (vk[(i, j)].conj() * av[(i, j)]).re - 2.0 * (bk[(i, j)].conj() * vk[(i, j)]).re;
            }
        }
    }
    total
}

#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub precoders: PrecoderSet,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub const REFERENCE_TOL: f64 = 1e-8;
pub const REFERENCE_MAX_ITERS: usize = 1_000_000;

fn project_ball(v: &mut PrecoderSet, p_max: f64) {
    let power: f64 = v.0.iter().map(fro_sq).sum();
    if power > p_max {
        let c = Complex64::new((p_max / power).sqrt(), 0.0);
        for vk in &mut v.0 {
            *vk *= c;
        }
    }
}

/// Projected gradient on `min sum_k Tr(V_k^H A V_k) - 2 Re Tr(B_k^H V_k)`
/// over the power ball, step `1 / lambda_max(A + eps I)`, until the
/// gradient-mapping norm drops below `tol`.
pub fn reference_subproblem_solver(a: &CMat, b: &[CMat], p_max: f64, tol: f64) -> ReferenceSolution {
    let m = a.nrows();
    let eps = 1e-12 * a.diagonal().iter().map(|z| z.re.abs()).sum::<f64>().max(1.0);
    let mut shifted = a.clone();
    for i in 0..m {
        shifted[(i, i)] += Complex64::new(eps, 0.0);
    }
    let lip = power_iteration_lambda_max(&shifted, 100_000, 1e-14);
    let step = Complex64::new(1.0 / lip, 0.0);
    let mut v = PrecoderSet(b.iter().map(|bk| CMat::zeros(bk.nrows(), bk.ncols())).collect());
    let mut residual = f64::INFINITY;
    for it in 0..REFERENCE_MAX_ITERS {
        let mut next = PrecoderSet(v.0.iter().zip(b).map(|(vk, bk)| vk - (a * vk - bk) * step).collect());
        project_ball(&mut next, p_max);
        let moved: f64 = v.0.iter().zip(&next.0).map(|(x, y)| fro_sq(&(x - y))).sum::<f64>().sqrt();
        residual = moved * lip;
        v = next;
        if residual < tol {
            return ReferenceSolution { precoders: v, iterations: it + 1, residual, converged: true };
        }
    }
    ReferenceSolution { precoders: v, iterations: REFERENCE_MAX_ITERS, residual, converged: false }
}

/// Capacity-achieving `d`-stream precoder for a single user by SVD and
/// water-filling. Rate in nats.
pub fn single_user_waterfilling(h: &CMat, p_max: f64, sigma2: f64, d: usize) -> (f64, CMat) {
    let (n, m) = h.shape();
    let svd = SVD::new(h.clone(), false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let mut modes: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
    modes.sort_by(|x, y| y.0.total_cmp(&x.0));
    let count = m.min(n).min(d);
    let gains: Vec<f64> = modes[..count].iter().map(|(s, _)| s * s / sigma2).collect();

    let mut powers = vec![0.0; count];
    for active in (1..=count).rev() {
        if gains[active - 1] <= 0.0 {
            continue;
        }
        let inv_sum: f64 = gains[..active].iter().map(|g| 1.0 / g).sum();
        let level = (p_max + inv_sum) / active as f64;
        if level > 1.0 / gains[active - 1] {
            for i in 0..active {
                powers[i] = level - 1.0 / gains[i];
            }
            break;
        }
    }
    let rate = gains.iter().zip(&powers).map(|(g, p)| (1.0 + g * p).ln()).sum();
    let mut precoder = CMat::zeros(m, d);
    for (col, ((_, idx), p)) in modes[..count].iter().zip(&powers).enumerate() {
        let dir = v_t.row(*idx).adjoint();
        precoder.set_column(col, &(dir * Complex64::new(p.sqrt(), 0.0)));
    }
    (rate, precoder)
}

/// Slack added to each bound before a check counts as a violation.
pub const EK_FLOOR_SLACK: f64 = 1e-9;
pub const U_NORM_SLACK: f64 = 1e-9;
pub const W_NORM_SLACK: f64 = 1e-6;
pub const SMOOTHNESS_SLACK: f64 = 1e-6;

/// Scans recorded iterates for the eigenvalue floor of `E_k`, the norm bounds
/// on `U_k` and `W_k` (weighted stage), and the spectral bound on
/// `F = 2 sum_m alpha_m H_m^H U_m W_m U_m^H H_m`.
///
/// `passed` means zero violations; `max_rel_error` is the largest excess over
/// `bound + slack`, relative to the bound.
pub fn check_lemma_bounds(
    channels: &ChannelSet,
    iterates: &[IterateSnapshot],
    weights: &[f64],
    bounds: &BoundsReport,
) -> OracleReport {
    let sigma2 = bounds.sigma2;
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut failures = Vec::new();
    let mut record = |family: &str, t: usize, user: Option<usize>, value: f64, bound: f64, slack: f64, upper: bool| {
        let excess = if upper { value - bound } else { bound - value };
        max_abs = max_abs.max(excess.max(0.0));
        let beyond = excess - slack;
        if beyond > 0.0 {
            max_rel = max_rel.max(beyond / bound.abs().max(f64::MIN_POSITIVE));
            let who = user.map_or(String::new(), |k| format!(" user {k}"));
            failures.push(format!("{family} violated at iterate {t}{who}: {value:.6e} vs bound {bound:.6e}"));
        }
    };

    for (t, it) in iterates.iter().enumerate() {
        let (_, m) = channels.shape();
        let mut f = CMat::zeros(m, m);
        for k in 0..channels.users() {
            let h = channels.channel(k);
            let u = &it.receivers.0[k];
            let w = &it.weight_matrices.matrices[k];
            let d = u.ncols();

            let e = naive_mse_matrix(h, u, &it.precoders, k, sigma2);
            let lam = eigvals_hermitian(&e)[0];
            record("E_k eigenvalue floor", t, Some(k), lam, bounds.ek_floor, EK_FLOOR_SLACK, false);

            record("U_k norm", t, Some(k), fro_sq(u), d as f64 / sigma2, U_NORM_SLACK, true);

            if it.weight_matrices.stage == Stage::Weighted {
                let r = bounds.p_max * bounds.kappa + sigma2;
                let bound = d as f64 * r * r / (sigma2 * sigma2);
                record("W_k norm", t, Some(k), fro_sq(w), bound, W_NORM_SLACK, true);
            }

            let g = h.adjoint() * u;
            f += &g * w * g.adjoint() * Complex64::new(2.0 * weights[k], 0.0);
        }
        let spec = eigvals_hermitian(&f).last().copied().unwrap_or(0.0);
        record("F smoothness", t, None, spec, bounds.l_v, SMOOTHNESS_SLACK, true);
    }

    let mut report = OracleReport::new("lemma_bounds", 0.0, max_abs, max_rel, iterates.len());
    report.failures = failures;
    report
}

/// Relative Frobenius error of the analytic gradient against central
/// differences of [`naive_objective`], over all users.
pub fn gradient_check(
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    precoders: &PrecoderSet,
    weights: &[f64],
) -> OracleReport {
    let sigma2 = channels.noise_power().expect("noise power set");
    let fd = finite_diff_gradient(
        |v| naive_objective(receivers, weight_matrices, v, channels, weights, sigma2),
        precoders,
        FD_STEP,
    );
    let mut diff = 0.0;
    let mut scale = 0.0;
    for (k, g_fd) in fd.iter().enumerate() {
        let g = crate::objective::gradient_v(receivers, weight_matrices, &precoders.0[k], channels, weights, k);
        diff += fro_sq(&(g - g_fd));
        scale += fro_sq(g_fd);
    }
    let abs = diff.sqrt();
    let rel = if scale > 0.0 { abs / scale.sqrt() } else { abs };
    OracleReport::new("gradient_fd", GRADIENT_REL_TOL, abs, rel, 1)
}

pub const GRADIENT_REL_TOL: f64 = 1e-6;
pub const EXACT_PRECODER_REL_TOL: f64 = 1e-4;
pub const EXACT_OBJECTIVE_ABS_TOL: f64 = 1e-8;

/// `A = sum_m alpha_m H_m^H U_m W_m U_m^H H_m`, `B_k = alpha_k H_k^H U_k W_k`,
/// assembled independently of the solver.
pub fn naive_subproblem(
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    weights: &[f64],
) -> (CMat, Vec<CMat>) {
    let (_, m) = channels.shape();
    let mut a = CMat::zeros(m, m);
    let mut b = Vec::new();
    for k in 0..channels.users() {
        let h = channels.channel(k);
        let u = &receivers.0[k];
        let w = &weight_matrices.matrices[k];
        let alpha = Complex64::new(weights[k], 0.0);
        a += h.adjoint() * u * w * u.adjoint() * h * alpha;
        b.push(h.adjoint() * u * w * alpha);
    }
    (a, b)
}

#[derive(Debug, Clone, Copy)]
pub struct ExactSolverComparison {
    pub objective_abs_diff: f64,
    pub precoder_rel_diff: f64,
    pub reference_converged: bool,
    pub lambda: f64,
}

impl ExactSolverComparison {
    pub fn passed(&self) -> bool {
        self.reference_converged
            && self.objective_abs_diff <= EXACT_OBJECTIVE_ABS_TOL
            && self.precoder_rel_diff <= EXACT_PRECODER_REL_TOL
    }

    pub fn reports(&self) -> [OracleReport; 2] {
        [
            OracleReport::new(
                "exact_solver_precoder",
                EXACT_PRECODER_REL_TOL,
                self.precoder_rel_diff,
                self.precoder_rel_diff,
                1,
            ),
            // absolute agreement is the criterion for the objective
            OracleReport::new(
                "exact_solver_objective",
                EXACT_OBJECTIVE_ABS_TOL,
                self.objective_abs_diff,
                self.objective_abs_diff,
                1,
            ),
        ]
    }
}

/// Compares the bisection-based exact precoder update with the projected
/// gradient reference on the same subproblem.
pub fn exact_solver_check(
    channels: &ChannelSet,
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    weights: &[f64],
    p_max: f64,
    options: &crate::solvers::SolverOptions,
) -> ExactSolverComparison {
    let exact = crate::solvers::update_precoders_exact(channels, receivers, weight_matrices, weights, p_max, options);
    let (a, b) = naive_subproblem(channels, receivers, weight_matrices, weights);
    let reference = reference_subproblem_solver(&a, &b, p_max, REFERENCE_TOL);
    let f_exact = subproblem_objective(&a, &b, &exact.precoders);
    let f_ref = subproblem_objective(&a, &b, &reference.precoders);
    let denom = reference.precoders.norm().max(f64::MIN_POSITIVE);
    ExactSolverComparison {
        objective_abs_diff: (f_exact - f_ref).abs(),
        precoder_rel_diff: exact.precoders.distance(&reference.precoders) / denom,
        reference_converged: reference.converged,
        lambda: exact.lambda,
    }
}

/// Bisection settings tight enough for the exact update to meet the
/// reference-solver agreement tolerances.
pub fn tight_bisection(options: &crate::solvers::SolverOptions) -> crate::solvers::SolverOptions {
    crate::solvers::SolverOptions { bisect_tol: 1e-13, bisect_max: 200, ..options.clone() }
}

/// Gradient and exact-solver oracles at the MMSE receiver / weights of the
/// initial precoder of one realization.
pub fn instance_oracles(
    channels: &ChannelSet,
    config: &crate::model::SystemConfig,
    options: &crate::solvers::SolverOptions,
) -> Vec<OracleReport> {
    use crate::solvers::{project_sum_power, update_receivers, update_weight_matrices};
    let Ok(sigma2) = channels.noise_power() else { return Vec::new() };
    let v = crate::model::init_precoders(config, project_sum_power);
    let Ok(u) = update_receivers(channels, &v, sigma2) else { return Vec::new() };
    let Ok(w) = update_weight_matrices(channels, &u, &v) else { return Vec::new() };
    let mut out = vec![gradient_check(channels, &u, &w, &v, &config.weights)];
    out.extend(
        exact_solver_check(channels, &u, &w, &config.weights, config.p_max, &tight_bisection(options)).reports(),
    );
    out
}
