//! MSE matrices, rates, the weighted sum-MSE objective, its precoder gradient
//! and the smoothness / eigenvalue bounds that govern the step size.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{gram_lambda_max, identity, is_finite, logdet_hpd, real, trace_re, CMat};
use crate::model::{ChannelSet, PrecoderSet, ReceiverSet, WeightMatrixSet};

/// Step-size and eigenvalue bounds for one channel realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `max_k sigma_max(H_k^H H_k)`.
    pub kappa: f64,
    /// Smoothness bound `2 alpha_bar K kappa / sigma^2`.
    pub l_v: f64,
    /// `1 / l_v`.
    pub gamma_safe: f64,
    /// Lower bound on `lambda_min(E_k)` for any receiver and feasible precoder.
    pub ek_floor: f64,
    pub alpha_bar: f64,
    pub sigma2: f64,
    pub p_max: f64,
}

impl BoundsReport {
    pub fn u_fro_sq_bound(&self, d: usize) -> f64 {
        d as f64 / self.sigma2
    }

    pub fn w_fro_sq_bound(&self, d: usize) -> f64 {
        let r = self.p_max * self.kappa + self.sigma2;
        d as f64 * r * r / (self.sigma2 * self.sigma2)
    }

    pub fn w_lambda_max_bound(&self) -> f64 {
        1.0 / self.ek_floor
    }
}

/// Rates and objective at one iterate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSnapshot {
    pub wsr_bits: f64,
    pub wsr_nats: f64,
    pub f_value: f64,
    pub total_power: f64,
}

impl ObjectiveSnapshot {
    pub fn evaluate(
        channels: &ChannelSet,
        receivers: &ReceiverSet,
        weight_matrices: &WeightMatrixSet,
        precoders: &PrecoderSet,
        weights: &[f64],
    ) -> Result<Self> {
        let sigma2 = channels.noise_power()?;
        let wsr_nats = weighted_sum_rate(channels, precoders, weights)?;
        let f_value = wmmse_objective(receivers, weight_matrices, precoders, channels, weights, sigma2)?;
        Ok(Self { wsr_bits: wsr_nats / LN_2, wsr_nats, f_value, total_power: precoders.total_power() })
    }
}

fn check_user_count(what: &str, got: usize, expected: usize) -> Result<()> {
    if got != expected {
        return Err(Error::ShapeMismatch(format!("{what}: expected {expected} users, got {got}")));
    }
    Ok(())
}

/// `E_k = (I - U^H H V_k)(I - U^H H V_k)^H + sum_{j != k} U^H H V_j V_j^H H^H U + sigma^2 U^H U`.
pub fn mse_matrix(h: &CMat, u: &CMat, precoders: &PrecoderSet, k: usize, sigma2: f64) -> Result<CMat> {
    let d = u.ncols();
    if u.nrows() != h.nrows() {
        return Err(Error::ShapeMismatch(format!("receiver has {} rows, channel has {}", u.nrows(), h.nrows())));
    }
    for (j, v) in precoders.0.iter().enumerate() {
        if v.nrows() != h.ncols() || v.ncols() != d {
            return Err(Error::ShapeMismatch(format!(
                "precoder {j} is {:?}, expected ({}, {d})",
                v.shape(),
                h.ncols()
            )));
        }
    }
    let uh_h = u.adjoint() * h;
    let own = identity(d) - &uh_h * &precoders.0[k];
    let mut e = &own * own.adjoint() + u.adjoint() * u * real(sigma2);
    for (j, v) in precoders.0.iter().enumerate() {
        if j != k {
            let t = &uh_h * v;
            e += &t * t.adjoint();
        }
    }
    Ok(e)
}

/// Received covariance `sum_{j in users} H V_j V_j^H H^H + sigma^2 I`.
fn received_covariance<'a>(h: &CMat, vs: impl Iterator<Item = &'a CMat>, sigma2: f64) -> CMat {
    let mut c = identity(h.nrows()) * real(sigma2);
    for v in vs {
        let hv = h * v;
        c += &hv * hv.adjoint();
    }
    c
}

/// Achievable rate of user `k` in nats, via
/// `ln det(C_all) - ln det(C_interference)`.
pub fn user_rate(h: &CMat, precoders: &PrecoderSet, sigma2: f64, k: usize) -> Result<f64> {
    if !is_finite(h) {
        return Err(Error::NonFinite(format!("channel of user {k}")));
    }
    if sigma2.is_nan() || sigma2 <= 0.0 {
        return Err(Error::InvalidConfig { field: "noise_power", reason: "must be positive".into() });
    }
    let full = received_covariance(h, precoders.0.iter(), sigma2);
    let interf =
        received_covariance(h, precoders.0.iter().enumerate().filter(|(j, _)| *j != k).map(|(_, v)| v), sigma2);
    let (Some(a), Some(b)) = (logdet_hpd(&full), logdet_hpd(&interf)) else {
        return Err(Error::NonFinite(format!("covariance of user {k}")));
    };
    Ok((a - b).max(0.0))
}

/// `sum_k alpha_k R_k` in nats.
pub fn weighted_sum_rate(channels: &ChannelSet, precoders: &PrecoderSet, weights: &[f64]) -> Result<f64> {
    let sigma2 = channels.noise_power()?;
    check_user_count("precoders", precoders.users(), channels.users())?;
    check_user_count("weights", weights.len(), channels.users())?;
    let mut acc = 0.0;
    for (k, h) in channels.channels().iter().enumerate() {
        acc += weights[k] * user_rate(h, precoders, sigma2, k)?;
    }
    Ok(acc)
}

/// `f = sum_k alpha_k (Tr(W_k E_k) - ln det W_k)`.
pub fn wmmse_objective(
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    precoders: &PrecoderSet,
    channels: &ChannelSet,
    weights: &[f64],
    sigma2: f64,
) -> Result<f64> {
    let k_users = channels.users();
    check_user_count("receivers", receivers.0.len(), k_users)?;
    check_user_count("weight matrices", weight_matrices.matrices.len(), k_users)?;
    check_user_count("precoders", precoders.users(), k_users)?;
    check_user_count("weights", weights.len(), k_users)?;
    let mut f = 0.0;
    for k in 0..k_users {
        let e = mse_matrix(channels.channel(k), &receivers.0[k], precoders, k, sigma2)?;
        let w = &weight_matrices.matrices[k];
        let logdet = logdet_hpd(w).ok_or(Error::ObjectiveDomain { user: k })?;
        f += weights[k] * (trace_re(&(w * e)) - logdet);
    }
    Ok(f)
}

/// Quadratic model of the precoder subproblem with `U`, `W` fixed:
/// `sum_k Tr(V_k^H A V_k) - 2 Re Tr(B_k^H V_k)` with
/// `A = sum_m alpha_m H_m^H U_m W_m U_m^H H_m` and `B_k = alpha_k H_k^H U_k W_k`.
#[derive(Debug, Clone)]
pub struct PrecoderSystem {
    pub a: CMat,
    pub b: Vec<CMat>,
}

impl PrecoderSystem {
    pub fn assemble(
        channels: &ChannelSet,
        receivers: &ReceiverSet,
        weight_matrices: &WeightMatrixSet,
        weights: &[f64],
    ) -> Self {
        let (_, m) = channels.shape();
        let mut a = CMat::zeros(m, m);
        let mut b = Vec::with_capacity(channels.users());
        for (k, h) in channels.channels().iter().enumerate() {
            let g = h.adjoint() * &receivers.0[k];
            let gw = &g * &weight_matrices.matrices[k];
            a += &gw * g.adjoint() * real(weights[k]);
            b.push(gw * real(weights[k]));
        }
        Self { a: crate::linalg::hermitian_part(&a), b }
    }

    /// `2 (A V_k - B_k)`.
    pub fn gradient(&self, v_k: &CMat, k: usize) -> CMat {
        (&self.a * v_k - &self.b[k]) * real(2.0)
    }

    pub fn gradient_all(&self, precoders: &PrecoderSet) -> Vec<CMat> {
        precoders.0.iter().enumerate().map(|(k, v)| self.gradient(v, k)).collect()
    }

    /// Value of the quadratic model (the V-dependent part of `f`).
    pub fn objective(&self, precoders: &PrecoderSet) -> f64 {
        precoders
            .0
            .iter()
            .zip(&self.b)
            .map(|(v, b)| trace_re(&(v.adjoint() * &self.a * v)) - 2.0 * trace_re(&(b.adjoint() * v)))
            .sum()
    }
}

/// Gradient of `f` with respect to `V_k`.
pub fn gradient_v(
    receivers: &ReceiverSet,
    weight_matrices: &WeightMatrixSet,
    v_k: &CMat,
    channels: &ChannelSet,
    weights: &[f64],
    k: usize,
) -> CMat {
    PrecoderSystem::assemble(channels, receivers, weight_matrices, weights).gradient(v_k, k)
}

pub fn compute_bounds(channels: &ChannelSet, weights: &[f64], p_max: f64, sigma2: f64) -> BoundsReport {
    let kappa = channels.channels().iter().map(gram_lambda_max).fold(0.0, f64::max);
    let alpha_bar = weights.iter().copied().fold(0.0, f64::max);
    let k = channels.users() as f64;
    let l_v = 2.0 * alpha_bar * k * kappa / sigma2;
    BoundsReport {
        kappa,
        l_v,
        gamma_safe: sigma2 / (2.0 * alpha_bar * k * kappa),
        ek_floor: sigma2 / (p_max * kappa + sigma2),
        alpha_bar,
        sigma2,
        p_max,
    }
}
