//! Closed forms for the second moment of the communication range, E[R²],
//! and the resulting node isolation probability `exp(-λπE[R²])`.
//!
//! Every fading family shares the same skeleton:
//! `(2/α)·θ^{-2/α}·e^{2σ²/α²}·S`, where `S` is a finite sum of
//! `Γ(2/α + l)` terms. Shadowing enters only through the exponential factor.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::channel::{build_beta_table, BetaTable, ChannelParams, DiversityScheme};
use crate::error::{domain, Error, Result};
use crate::specialfn::{binomial, gamma_fn, CompensatedSum};

/// Largest diversity order accepted by the selection-combining closed form.
pub const MAX_SC_BRANCHES: u32 = 16;

/// Decimal digits the SC alternating sum may lose before it is rejected.
const MAX_DIGITS_LOST: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsolationQuery {
    pub params: ChannelParams,
    pub scheme: DiversityScheme,
    /// Nodes per square meter.
    pub node_density: f64,
}

impl IsolationQuery {
    pub fn new(params: ChannelParams, scheme: DiversityScheme, node_density: f64) -> Self {
        Self { params, scheme, node_density }
    }
}

/// e^{2σ²/α²}
pub fn shadowing_factor(params: &ChannelParams) -> f64 {
    (2.0 * params.sigma * params.sigma / (params.alpha * params.alpha)).exp()
}

/// Γ(2/α + l) for l = 0..len, from one gamma evaluation and the recurrence.
fn shifted_gammas(alpha: f64, len: usize) -> Result<Vec<f64>> {
    let x = 2.0 / alpha;
    let mut out = Vec::with_capacity(len);
    let mut g = gamma_fn(x)?;
    for l in 0..len {
        out.push(g);
        g *= x + l as f64;
    }
    Ok(out)
}

/// Σ_{l<terms} Γ(2/α + l) / l!
fn gamma_series(alpha: f64, terms: u32) -> Result<f64> {
    let x = 2.0 / alpha;
    let mut term = gamma_fn(x)?;
    let mut sum = CompensatedSum::new();
    sum.add(term);
    for l in 1..terms {
        let l = l as f64;
        term *= (x + l - 1.0) / l;
        sum.add(term);
    }
    Ok(sum.value())
}

/// (2/α)·θ^{-2/α}
fn range_prefactor(params: &ChannelParams) -> f64 {
    2.0 / params.alpha * params.theta().powf(-2.0 / params.alpha)
}

/// E[R²] with path loss and shadowing only (no fading): `(KP_tx/(ψW))^{2/α}·e^{2σ²/α²}`.
pub fn expected_r2_shadow_only(params: &ChannelParams) -> Result<f64> {
    params.validate()?;
    Ok((params.snr_scale() / params.psi).powf(2.0 / params.alpha) * shadowing_factor(params))
}

/// E[R²] under Nakagami-m fading without shadowing; σ is ignored.
pub fn expected_r2_nakagami(params: &ChannelParams) -> Result<f64> {
    params.validate()?;
    Ok(range_prefactor(params) * gamma_series(params.alpha, params.m)?)
}

/// E[R²] under Nakagami-m fading with lognormal shadowing.
pub fn expected_r2_nakagami_shadow(params: &ChannelParams) -> Result<f64> {
    Ok(expected_r2_nakagami(params)? * shadowing_factor(params))
}

/// E[R²] with maximal ratio combining over `diversity_order` branches.
pub fn expected_r2_mrc(params: &ChannelParams, diversity_order: u32) -> Result<f64> {
    params.validate()?;
    if diversity_order == 0 {
        return domain("diversity order M must be >= 1");
    }
    let series = gamma_series(params.alpha, params.m * diversity_order)?;
    Ok(range_prefactor(params) * series * shadowing_factor(params))
}

/// E[R²] with selection combining over `diversity_order` branches.
///
/// The inner alternating sum is accumulated with compensation; if it still
/// cancels away more than six significant digits the result is rejected.
pub fn expected_r2_sc(params: &ChannelParams, diversity_order: u32, beta: &BetaTable) -> Result<f64> {
    params.validate()?;
    if diversity_order == 0 {
        return domain("diversity order M must be >= 1");
    }
    if diversity_order > MAX_SC_BRANCHES {
        return domain(format!(
            "selection combining supports at most {MAX_SC_BRANCHES} branches, got {diversity_order}"
        ));
    }
    if beta.m() != params.m || beta.max_n() < diversity_order {
        return domain(format!(
            "beta table built for (m={}, M={}) cannot serve (m={}, M={diversity_order})",
            beta.m(),
            beta.max_n(),
            params.m
        ));
    }
    if diversity_order == 1 {
        return expected_r2_nakagami_shadow(params);
    }
    let x = 2.0 / params.alpha;
    let gammas = shifted_gammas(params.alpha, (diversity_order * (params.m - 1) + 1) as usize)?;

    let mut terms = Vec::new();
    for h in 1..=diversity_order {
        let sign = if h % 2 == 1 { 1.0 } else { -1.0 };
        let c = binomial(diversity_order, h);
        let ln_h = (h as f64).ln();
        for (l, &b) in beta.row(h as usize).iter().enumerate() {
            let l_f = l as f64;
            terms.push(sign * c * b * (-(x + l_f) * ln_h).exp() * gammas[l]);
        }
    }
    // smallest magnitudes first
    terms.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let sum: CompensatedSum = terms.into_iter().collect();
    let value = sum.value();
    if !(value > 0.0) {
        return Err(Error::Cancellation { context: "selection-combining range sum", digits_lost: f64::INFINITY });
    }
    let digits_lost = (sum.max_abs_term() / value).log10();
    if digits_lost > MAX_DIGITS_LOST {
        return Err(Error::Cancellation { context: "selection-combining range sum", digits_lost });
    }
    Ok(range_prefactor(params) * value * shadowing_factor(params))
}

/// E[R²] for any scheme, dispatched on the normalized diversity scheme.
pub fn expected_r2(params: &ChannelParams, scheme: DiversityScheme) -> Result<f64> {
    scheme.validate()?;
    match scheme.normalized() {
        DiversityScheme::None => expected_r2_nakagami_shadow(params),
        DiversityScheme::Mrc(b) => expected_r2_mrc(params, b),
        DiversityScheme::Sc(b) => {
            params.validate()?;
            let beta = build_beta_table(params.m, b)?;
            expected_r2_sc(params, b, &beta)
        }
    }
}

/// exp(-λπE[R²]).
pub fn isolation_from_r2(node_density: f64, er2: f64) -> f64 {
    (-node_density * PI * er2).exp()
}

pub fn isolation_probability(query: &IsolationQuery) -> Result<f64> {
    if !(query.node_density >= 0.0) {
        return domain(format!("node density must be >= 0, got {}", query.node_density));
    }
    if query.node_density == 0.0 {
        return Ok(1.0);
    }
    let er2 = expected_r2(&query.params, query.scheme)?;
    Ok(isolation_from_r2(query.node_density, er2))
}

/// Smallest node density for which the isolation probability is at most `target_p_i`.
pub fn min_density_for_isolation(params: &ChannelParams, scheme: DiversityScheme, target_p_i: f64) -> Result<f64> {
    if !(target_p_i > 0.0 && target_p_i < 1.0) {
        return domain(format!("target isolation probability must lie in (0, 1), got {target_p_i}"));
    }
    let er2 = expected_r2(params, scheme)?;
    Ok(-target_p_i.ln() / (PI * er2))
}

/// Required density λ(σ) at a fixed isolation probability for each spread in `sigma_grid`.
pub fn density_spread_tradeoff(
    params: &ChannelParams,
    scheme: DiversityScheme,
    target_p_i: f64,
    sigma_grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if sigma_grid.is_empty() {
        return domain("sigma grid must not be empty");
    }
    sigma_grid
        .iter()
        .map(|&sigma| {
            if !(sigma >= 0.0) {
                return domain(format!("sigma must be >= 0, got {sigma}"));
            }
            let lambda = min_density_for_isolation(&params.with_sigma(sigma), scheme, target_p_i)?;
            Ok((sigma, lambda))
        })
        .collect()
}
