//! System configuration, channel realizations and the three block variables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fro_sq, identity, is_finite, max_asymmetry, CMat};
use num_complex::Complex64;

/// Name and version of the generator behind every random draw.
pub const RNG_NAME: &str = "rand_chacha 0.9 ChaCha20Rng::seed_from_u64";

/// Dimensions, power budget and seeds of one downlink MU-MIMO instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Base-station antennas.
    pub m: usize,
    /// Receive antennas per user.
    pub n: usize,
    /// Number of users.
    pub k: usize,
    /// Streams per user.
    pub d: usize,
    /// Total transmit power budget in watts.
    pub p_max: f64,
    /// Average per-user receive SNR without precoding, in dB.
    pub snr_db: f64,
    /// User priorities, one per user.
    pub weights: Vec<f64>,
    pub channel_seed: u64,
    pub init_seed: u64,
}

impl SystemConfig {
    /// Builds a configuration with unit weights, `p_max = 10` and seeds 0.
    pub fn new(m: usize, n: usize, k: usize, d: usize, snr_db: f64) -> Result<Self> {
        let cfg = Self { m, n, k, d, p_max: 10.0, snr_db, weights: vec![1.0; k], channel_seed: 0, init_seed: 0 };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_seeds(mut self, channel_seed: u64, init_seed: u64) -> Self {
        self.channel_seed = channel_seed;
        self.init_seed = init_seed;
        self
    }

    pub fn with_p_max(mut self, p_max: f64) -> Result<Self> {
        self.p_max = p_max;
        self.validate()?;
        Ok(self)
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        self.weights = weights;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidConfig { field, reason: reason.to_string() });
        if self.m == 0 {
            return bad("M", "must be positive");
        }
        if self.n == 0 {
            return bad("N", "must be positive");
        }
        if self.k == 0 {
            return bad("K", "must be positive");
        }
        if self.d == 0 {
            return bad("d", "must be positive");
        }
        if self.d > self.n {
            return bad("d", "must not exceed N");
        }
        if !(self.p_max > 0.0 && self.p_max.is_finite()) {
            return bad("p_max", "must be a positive finite number");
        }
        if !self.snr_db.is_finite() {
            return bad("snr_db", "must be finite");
        }
        if self.weights.len() != self.k {
            return Err(Error::InvalidConfig {
                field: "weights",
                reason: format!("expected {} entries, got {}", self.k, self.weights.len()),
            });
        }
        if self.weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return bad("weights", "all entries must be positive and finite");
        }
        Ok(())
    }

    pub fn alpha_bar(&self) -> f64 {
        self.weights.iter().copied().fold(f64::MIN, f64::max)
    }
}

/// Per-user channel matrices `H_k` (N x M) and the common noise power.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    channels: Vec<CMat>,
    noise_power: Option<f64>,
}

impl ChannelSet {
    pub fn new(channels: Vec<CMat>) -> Result<Self> {
        let Some(first) = channels.first() else {
            return Err(Error::ShapeMismatch("channel set must hold at least one user".into()));
        };
        let (n, m) = first.shape();
        for (k, h) in channels.iter().enumerate() {
            if h.shape() != (n, m) {
                return Err(Error::ShapeMismatch(format!("channel {k} is {:?}, expected ({n}, {m})", h.shape())));
            }
            if !is_finite(h) {
                return Err(Error::NonFinite(format!("channel {k}")));
            }
        }
        Ok(Self { channels, noise_power: None })
    }

    pub fn with_noise_power(mut self, sigma2: f64) -> Result<Self> {
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidConfig {
                field: "noise_power",
                reason: format!("must be positive and finite, got {sigma2}"),
            });
        }
        self.noise_power = Some(sigma2);
        Ok(self)
    }

    pub fn channels(&self) -> &[CMat] {
        &self.channels
    }

    pub fn channel(&self, k: usize) -> &CMat {
        &self.channels[k]
    }

    pub fn noise_power(&self) -> Result<f64> {
        self.noise_power.ok_or(Error::NoisePowerUnset)
    }

    pub fn users(&self) -> usize {
        self.channels.len()
    }

    /// `(N, M)`.
    pub fn shape(&self) -> (usize, usize) {
        self.channels[0].shape()
    }

    /// Every channel multiplied by `c`; the noise power is dropped.
    pub fn scaled(&self, c: f64) -> Self {
        Self { channels: self.channels.iter().map(|h| h * Complex64::new(c, 0.0)).collect(), noise_power: None }
    }
}

/// The transmit precoders `V_k`, each M x d.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet(pub Vec<CMat>);

impl PrecoderSet {
    pub fn zeros(k: usize, m: usize, d: usize) -> Self {
        Self(vec![CMat::zeros(m, d); k])
    }

    /// `sum_k Tr(V_k V_k^H)`.
    pub fn total_power(&self) -> f64 {
        self.0.iter().map(fro_sq).sum()
    }

    pub fn is_feasible(&self, p_max: f64) -> bool {
        self.total_power() <= p_max * (1.0 + 1e-12)
    }

    pub fn scale(&self, c: f64) -> Self {
        let c = Complex64::new(c, 0.0);
        Self(self.0.iter().map(|v| v * c).collect())
    }

    /// `self + c * other`, blockwise.
    pub fn axpy(&self, c: f64, other: &Self) -> Self {
        let c = Complex64::new(c, 0.0);
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a + b * c).collect())
    }

    /// Frobenius distance over all blocks.
    pub fn distance(&self, other: &Self) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| fro_sq(&(a - b))).sum::<f64>().sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.total_power().sqrt()
    }

    pub fn users(&self) -> usize {
        self.0.len()
    }
}

/// Receive combiners `U_k`, each N x d.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverSet(pub Vec<CMat>);

impl ReceiverSet {
    pub fn zeros(k: usize, n: usize, d: usize) -> Self {
        Self(vec![CMat::zeros(n, d); k])
    }
}

/// Whether the MSE weights are pinned to identity (sum-MSE stage) or updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Unweighted,
    Weighted,
}

impl Stage {
    /// Integer code used in trace files.
    pub fn code(self) -> u8 {
        match self {
            Stage::Unweighted => 0,
            Stage::Weighted => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Stage::Unweighted),
            1 => Some(Stage::Weighted),
            _ => None,
        }
    }
}

/// MSE weight matrices `W_k`, each d x d Hermitian positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrixSet {
    pub matrices: Vec<CMat>,
    pub stage: Stage,
}

impl WeightMatrixSet {
    pub fn identity(k: usize, d: usize) -> Self {
        Self { matrices: vec![identity(d); k], stage: Stage::Unweighted }
    }

    /// Checks the Hermitian and positive-definite invariants.
    pub fn check(&self) -> Result<()> {
        for (k, w) in self.matrices.iter().enumerate() {
            if max_asymmetry(w) > 1e-10 || crate::linalg::cholesky(w).is_none() {
                return Err(Error::ObjectiveDomain { user: k });
            }
        }
        Ok(())
    }
}

fn gaussian_matrix(rng: &mut ChaCha20Rng, rows: usize, cols: usize) -> CMat {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    // row-major draw order, real part then imaginary part
    let mut data = Vec::with_capacity(rows * cols);
    for _ in 0..rows * cols {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        data.push(Complex64::new(re * scale, im * scale));
    }
    CMat::from_row_slice(rows, cols, &data)
}

/// Draws i.i.d. CN(0, 1) channels from `config.channel_seed`. Noise power is left unset.
pub fn generate_channels(config: &SystemConfig) -> Result<ChannelSet> {
    config.validate()?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.channel_seed);
    let channels = (0..config.k).map(|_| gaussian_matrix(&mut rng, config.n, config.m)).collect();
    ChannelSet::new(channels)
}

/// Noise power giving the requested average receive SNR:
/// `10^{mean_k log10(||H_k||_F^2 / N)} * 10^{-snr/10}`.
pub fn compute_noise_power(channels: &ChannelSet, snr_db: f64) -> Result<f64> {
    let (n, _) = channels.shape();
    let mut acc = 0.0;
    for (k, h) in channels.channels().iter().enumerate() {
        let energy = fro_sq(h);
        if energy <= 0.0 {
            return Err(Error::DegenerateChannel { user: k });
        }
        acc += (energy / n as f64).log10();
    }
    let mean = acc / channels.users() as f64;
    Ok(10f64.powf(mean - snr_db / 10.0))
}

/// Generates channels and attaches the SNR-derived noise power.
pub fn generate_instance(config: &SystemConfig) -> Result<ChannelSet> {
    let channels = generate_channels(config)?;
    let sigma2 = compute_noise_power(&channels, config.snr_db)?;
    channels.with_noise_power(sigma2)
}

/// Raw CN(0, 1) precoder draw from `config.init_seed`, before projection.
pub fn draw_gaussian_precoders(config: &SystemConfig) -> PrecoderSet {
    let mut rng = ChaCha20Rng::seed_from_u64(config.init_seed);
    PrecoderSet((0..config.k).map(|_| gaussian_matrix(&mut rng, config.m, config.d)).collect())
}

/// Gaussian initial precoders mapped into the power ball by `project`.
pub fn init_precoders(config: &SystemConfig, project: impl FnOnce(&PrecoderSet, f64) -> PrecoderSet) -> PrecoderSet {
    project(&draw_gaussian_precoders(config), config.p_max)
}
