//! Channel parameterization and per-link success probabilities.
//!
//! A link succeeds when the instantaneous SNR at the receiver reaches the
//! threshold ψ. The mean SNR at distance ρ is `K·P_tx·ρ^{-α} / W`; lognormal
//! shadowing multiplies it by `e^{σZ}`; Nakagami-m fading makes the
//! instantaneous SNR Gamma distributed around that mean.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::specialfn::{binomial, log_factorial, upper_incomplete_gamma_ratio, CompensatedSum};

/// Above this value of mψ/y the series terms are formed in log space.
const LOG_SPACE_THRESHOLD: f64 = 700.0;

/// Converts a decibel quantity to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a shadowing spread in dB to natural-log units.
pub fn sigma_from_db(sigma_db: f64) -> f64 {
    sigma_db * std::f64::consts::LN_10 / 10.0
}

/// Link-level parameters. All quantities are linear.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Transmit power, mW.
    pub ptx: f64,
    /// Noise power, mW.
    pub w: f64,
    /// Path-loss constant (mean path loss is `k·ρ^{-alpha}`).
    pub k: f64,
    /// SNR threshold.
    pub psi: f64,
    /// Path-loss exponent.
    pub alpha: f64,
    /// Standard deviation of the natural log of the path loss.
    pub sigma: f64,
    /// Nakagami fading severity.
    pub m: u32,
}

impl Default for ChannelParams {
    /// K = 10 dB, P_tx = 1 mW, W = 0.01 mW, ψ = 10 dB, α = 4, no shadowing, Rayleigh.
    fn default() -> Self {
        Self { ptx: 1.0, w: 0.01, k: 10.0, psi: 10.0, alpha: 4.0, sigma: 0.0, m: 1 }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [("ptx", self.ptx), ("w", self.w), ("k", self.k), ("psi", self.psi), ("alpha", self.alpha)];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return domain(format!("{name} must be finite and > 0, got {v}"));
            }
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return domain(format!("sigma must be finite and >= 0, got {}", self.sigma));
        }
        if self.m == 0 {
            return domain("m must be a positive integer");
        }
        Ok(())
    }

    pub fn with_m(self, m: u32) -> Self {
        Self { m, ..self }
    }

    pub fn with_alpha(self, alpha: f64) -> Self {
        Self { alpha, ..self }
    }

    pub fn with_sigma(self, sigma: f64) -> Self {
        Self { sigma, ..self }
    }

    /// θ = mψW / (K·P_tx).
    pub fn theta(&self) -> f64 {
        self.m as f64 * self.psi * self.w / (self.k * self.ptx)
    }

    /// Mean received SNR (before shadowing) at distance `rho`.
    pub fn mean_snr(&self, rho: f64) -> f64 {
        self.snr_scale() * rho.powf(-self.alpha)
    }

    /// K·P_tx / W, the mean SNR at unit distance.
    pub fn snr_scale(&self) -> f64 {
        self.k * self.ptx / self.w
    }

    /// Range of the deterministic disk model, (K·P_tx / (ψW))^{1/α}.
    pub fn disk_radius(&self) -> f64 {
        (self.snr_scale() / self.psi).powf(1.0 / self.alpha)
    }
}

/// Receive diversity structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(tag = "scheme", content = "branches", rename_all = "lowercase")]
pub enum DiversityScheme {
    #[default]
    None,
    /// Maximal ratio combining over `M` branches.
    Mrc(u32),
    /// Selection combining over `M` branches.
    Sc(u32),
}

impl DiversityScheme {
    pub fn branches(&self) -> u32 {
        match *self {
            Self::None => 1,
            Self::Mrc(b) | Self::Sc(b) => b,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.branches() == 0 {
            return domain("diversity order M must be >= 1");
        }
        Ok(())
    }

    /// Single-branch combiners collapse to [`DiversityScheme::None`].
    pub fn normalized(self) -> Self {
        if self.branches() == 1 {
            Self::None
        } else {
            self
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Mrc(_) => "mrc",
            Self::Sc(_) => "sc",
        }
    }
}

impl fmt::Display for DiversityScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::None => f.write_str("none"),
            Self::Mrc(b) => write!(f, "mrc(M={b})"),
            Self::Sc(b) => write!(f, "sc(M={b})"),
        }
    }
}

/// Coefficients β_kn of `[Σ_{k<m} x^k / k!]^n` for n = 0..=M.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaTable {
    m: u32,
    rows: Vec<Vec<f64>>,
}

impl BetaTable {
    pub fn m(&self) -> u32 {
        self.m
    }

    /// Largest power n held by the table.
    pub fn max_n(&self) -> u32 {
        (self.rows.len() - 1) as u32
    }

    /// β_kn, zero outside 0 ≤ k ≤ n(m-1).
    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.rows.get(n).and_then(|row| row.get(k)).copied().unwrap_or(0.0)
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }
}

/// Builds β_kn by the multinomial recursion
/// β_kn = Σ_{i=k-m+1}^{k} β_{i,n-1} / (k-i)!, keeping only 0 ≤ i ≤ (n-1)(m-1).
pub fn build_beta_table(m: u32, diversity_order: u32) -> Result<BetaTable> {
    if m == 0 || diversity_order == 0 {
        return domain("build_beta_table requires m >= 1 and M >= 1");
    }
    let m = m as usize;
    let inv_fact: Vec<f64> = (0..m).map(|j| (-log_factorial(j as u64)).exp()).collect();
    let mut rows = vec![vec![1.0]];
    for n in 1..=diversity_order as usize {
        let prev = &rows[n - 1];
        let prev_max = (n - 1) * (m - 1);
        let row: Vec<f64> = (0..=n * (m - 1))
            .map(|k| {
                let lo = (k + 1).saturating_sub(m);
                let hi = k.min(prev_max);
                (lo..=hi).map(|i| prev[i] * inv_fact[k - i]).sum()
            })
            .collect();
        rows.push(row);
    }
    Ok(BetaTable { m: m as u32, rows })
}

fn check_snr(y: f64) -> Result<()> {
    if !(y > 0.0) {
        return domain(format!("average SNR must be > 0, got {y}"));
    }
    Ok(())
}

/// P[γ ≥ ψ] for a single Nakagami-m branch with mean SNR `y`.
pub fn success_prob_nakagami(y: f64, params: &ChannelParams) -> Result<f64> {
    check_snr(y)?;
    upper_incomplete_gamma_ratio(params.m, params.m as f64 * params.psi / y)
}

/// Success probability after maximal ratio combining of `diversity_order`
/// i.i.d. branches, each with mean SNR `y`.
pub fn success_prob_mrc(y: f64, diversity_order: u32, params: &ChannelParams) -> Result<f64> {
    check_snr(y)?;
    if diversity_order == 0 {
        return domain("diversity order M must be >= 1");
    }
    upper_incomplete_gamma_ratio(params.m * diversity_order, params.m as f64 * params.psi / y)
}

/// Success probability after selection combining, via the β_kn expansion.
pub fn success_prob_sc(y: f64, diversity_order: u32, params: &ChannelParams, beta: &BetaTable) -> Result<f64> {
    check_snr(y)?;
    if diversity_order == 0 {
        return domain("diversity order M must be >= 1");
    }
    if beta.m() != params.m || beta.max_n() < diversity_order {
        return domain(format!(
            "beta table built for (m={}, M={}) cannot serve (m={}, M={diversity_order})",
            beta.m(),
            beta.max_n(),
            params.m
        ));
    }
    let x = params.m as f64 * params.psi / y;
    let log_space = x > LOG_SPACE_THRESHOLD;
    let ln_x = x.ln();
    let mut total = CompensatedSum::new();
    for n in 1..=diversity_order as usize {
        let sign = if n % 2 == 1 { 1.0 } else { -1.0 };
        let c = binomial(diversity_order, n as u32);
        let nf = n as f64;
        let row = beta.row(n);
        if log_space {
            for (k, &b) in row.iter().enumerate() {
                total.add(sign * c * b * (k as f64 * ln_x - nf * x).exp());
            }
        } else {
            let decay = (-nf * x).exp();
            let mut power = 1.0;
            for &b in row {
                total.add(sign * c * b * power * decay);
                power *= x;
            }
        }
    }
    Ok(total.value().clamp(0.0, 1.0))
}

/// Density of the linear path loss `a` at distance `rho` under lognormal
/// shadowing with median `K·ρ^{-α}`.
pub fn path_loss_pdf(a: f64, rho: f64, params: &ChannelParams) -> Result<f64> {
    if !(a > 0.0) || !(rho > 0.0) {
        return domain(format!("path_loss_pdf requires a > 0 and rho > 0, got a={a}, rho={rho}"));
    }
    if !(params.sigma > 0.0) {
        return domain("path_loss_pdf is singular for sigma = 0");
    }
    let s = params.sigma;
    let z = (a.ln() - (params.k.ln() - params.alpha * rho.ln())) / s;
    Ok((-0.5 * z * z).exp() / ((2.0 * PI).sqrt() * s * a))
}

/// Success probability for a fixed channel and diversity scheme, with the
/// β table prepared once.
#[derive(Debug, Clone)]
pub struct LinkModel {
    params: ChannelParams,
    scheme: DiversityScheme,
    beta: Option<BetaTable>,
}

impl LinkModel {
    pub fn new(params: ChannelParams, scheme: DiversityScheme) -> Result<Self> {
        params.validate()?;
        scheme.validate()?;
        let scheme = scheme.normalized();
        let beta = match scheme {
            DiversityScheme::Sc(b) => Some(build_beta_table(params.m, b)?),
            _ => None,
        };
        Ok(Self { params, scheme, beta })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn scheme(&self) -> DiversityScheme {
        self.scheme
    }

    /// Success probability given the (post-shadowing) mean branch SNR `y`.
    pub fn success_prob(&self, y: f64) -> Result<f64> {
        match (self.scheme, &self.beta) {
            (DiversityScheme::None, _) => success_prob_nakagami(y, &self.params),
            (DiversityScheme::Mrc(b), _) => success_prob_mrc(y, b, &self.params),
            (DiversityScheme::Sc(b), Some(beta)) => success_prob_sc(y, b, &self.params, beta),
            (DiversityScheme::Sc(_), None) => Err(Error::Domain("selection combining without beta table".into())),
        }
    }
}
