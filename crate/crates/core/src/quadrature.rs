//! Numerical evaluation of the range-moment integrals.
//!
//! These routines never use the closed forms; they integrate the success
//! probability directly and serve as the oracle for [`crate::analytic`].
//! They are also the only route for non-integer Nakagami m.
//!
//! Radial integrals are taken in `v = ρ²`, so `E[R²] = ∫_0^∞ P_S(c·v^{-α/2}) dv`
//! with `c = K·P_tx/W`. The integrand is bounded and smooth at the origin for
//! every α, and decays like a Gamma tail once `c·v^{-α/2}` drops below ψ.
//! The half-line is covered by geometrically growing panels, each
//! integrated by adaptive Gauss–Kronrod (7/15). Lognormal shadowing is a
//! standard-normal expectation and is handled by Gauss–Hermite.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::channel::{path_loss_pdf, ChannelParams, DiversityScheme, LinkModel};
use crate::error::{domain, Error, Result};
use crate::specialfn::{regularized_upper_gamma, CompensatedSum};

/// Tolerances and rule sizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    /// Cap on the total number of subintervals per radial integral.
    pub max_subdivisions: usize,
    /// Gauss–Hermite nodes used for the lognormal average.
    pub hermite_order: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self { rel_tol: 1e-9, max_subdivisions: 10_000, hermite_order: 64 }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return domain(format!("rel_tol must be > 0, got {}", self.rel_tol));
        }
        if self.hermite_order < 8 {
            return domain(format!("hermite_order must be >= 8, got {}", self.hermite_order));
        }
        if self.max_subdivisions == 0 {
            return domain("max_subdivisions must be >= 1");
        }
        Ok(())
    }
}

// Gauss–Kronrod 7/15 abscissae and weights on [-1, 1].
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// One Kronrod-15 estimate with |K15 - G7| as its error.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Result of a finite-interval adaptive integration.
#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

/// Globally adaptive Gauss–Kronrod on `[a, b]`: the segment with the largest
/// error estimate is bisected until the summed error meets
/// `max(abs_tol, rel_tol·|value|)`.
pub fn integrate_adaptive(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_subdivisions: usize,
) -> Result<Integral> {
    let (value, error) = gk15(f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    loop {
        if total_err <= abs_tol.max(rel_tol * total.abs()) {
            break;
        }
        if heap.len() >= max_subdivisions {
            return Err(Error::NonConvergence { estimate: total, error: total_err, subdivisions: heap.len() });
        }
        let worst = heap.pop().expect("heap never empties");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval can no longer be split in floating point
            heap.push(worst);
            return Err(Error::NonConvergence { estimate: total, error: total_err, subdivisions: heap.len() });
        }
        let (lv, le) = gk15(f, worst.a, mid);
        let (rv, re) = gk15(f, mid, worst.b);
        total += lv + rv - worst.value;
        total_err += le + re - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: lv, error: le });
        heap.push(Segment { a: mid, b: worst.b, value: rv, error: re });
    }
    let subdivisions = heap.len();
    let mut value = CompensatedSum::new();
    let mut error = 0.0;
    for s in heap {
        value.add(s.value);
        error += s.error;
    }
    Ok(Integral { value: value.value(), error, subdivisions })
}

const MAX_PANELS: usize = 400;

/// ∫_0^∞ f over panels [0, s], [s, 2s], [2s, 4s], … until two consecutive
/// panels contribute negligibly. `f` should be eventually monotone decaying.
pub fn integrate_semi_infinite(f: &dyn Fn(f64) -> f64, scale: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return domain(format!("panel scale must be finite and > 0, got {scale}"));
    }
    let mut total = CompensatedSum::new();
    let mut budget = spec.max_subdivisions;
    let mut lo = 0.0;
    let mut width = scale;
    let mut quiet = 0;
    for _ in 0..MAX_PANELS {
        let hi = lo + width;
        let abs_tol = 0.1 * spec.rel_tol * total.value().abs();
        let panel = integrate_adaptive(f, lo, hi, abs_tol, spec.rel_tol, budget)?;
        budget = budget.saturating_sub(panel.subdivisions).max(1);
        total.add(panel.value);
        if panel.value.abs() <= 1e-3 * spec.rel_tol * total.value().abs() {
            quiet += 1;
            if quiet == 2 {
                return Ok(total.value());
            }
        } else {
            quiet = 0;
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::NonConvergence {
        estimate: total.value(),
        error: f64::NAN,
        subdivisions: spec.max_subdivisions - budget,
    })
}

/// Gauss–Hermite rule rescaled to expectations over a standard normal:
/// `E[f(Z)] ≈ Σ weights[i]·f(nodes[i])`.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    /// Shared rule of the given order, computed once per process.
    pub fn standard_normal(order: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry(order).or_insert_with(|| Arc::new(Self::compute(order))).clone()
    }

    /// Newton iteration on the orthonormal Hermite recurrence.
    fn compute(n: usize) -> Self {
        const PI_M4: f64 = 0.751_125_544_464_942_5; // π^{-1/4}
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let half = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..half {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.855_75 * (2.0 * nf + 1.0).powf(-0.166_67),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = PI_M4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt_pi = PI.sqrt();
        Self {
            nodes: x.iter().map(|t| t * std::f64::consts::SQRT_2).collect(),
            weights: w.iter().map(|v| v / sqrt_pi).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// E[f(Z)] for Z ~ N(0, 1).
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * f(z)).collect::<CompensatedSum>().value()
    }

    pub fn try_expect(&self, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
        let mut sum = CompensatedSum::new();
        for (&z, &w) in self.nodes.iter().zip(&self.weights) {
            sum.add(w * f(z)?);
        }
        Ok(sum.value())
    }
}

/// ∫_0^∞ P_S(snr_scale·v^{-α/2}) dv.
fn radial_integral(
    success: &dyn Fn(f64) -> f64,
    snr_scale: f64,
    psi: f64,
    alpha: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let panel = (snr_scale / psi).powf(2.0 / alpha);
    let integrand = |v: f64| success(snr_scale * v.powf(-0.5 * alpha));
    integrate_semi_infinite(&integrand, panel, spec)
}

/// E[R²] with fading but no shadowing: `∫_0^∞ 2ρ·P_S(K·P_tx·ρ^{-α}/W) dρ`.
/// `success` maps a mean SNR to a success probability; σ is ignored.
pub fn expected_r2_numeric_fading(
    success: &dyn Fn(f64) -> f64,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    radial_integral(success, params.snr_scale(), params.psi, params.alpha, spec)
}

/// E[R²] with fading and lognormal shadowing: the radial integral with the
/// mean SNR scaled by `e^{σz}`, averaged over z ~ N(0, 1).
pub fn expected_r2_numeric_fading_shadow(
    success: &dyn Fn(f64) -> f64,
    params: &ChannelParams,
    spec: &QuadratureSpec,
) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    if !(params.sigma > 0.0) {
        return domain("expected_r2_numeric_fading_shadow requires sigma > 0");
    }
    let rule = GaussHermite::standard_normal(spec.hermite_order);
    rule.try_expect(|z| {
        radial_integral(success, params.snr_scale() * (params.sigma * z).exp(), params.psi, params.alpha, spec)
    })
}

/// Dispatches on σ between the shadowed and unshadowed numeric forms.
pub fn expected_r2_numeric(success: &dyn Fn(f64) -> f64, params: &ChannelParams, spec: &QuadratureSpec) -> Result<f64> {
    if params.sigma > 0.0 {
        expected_r2_numeric_fading_shadow(success, params, spec)
    } else {
        expected_r2_numeric_fading(success, params, spec)
    }
}

/// Numeric E[R²] for integer m under any scheme, integrating the
/// per-scheme success probability of [`LinkModel`].
pub fn expected_r2_quadrature(params: &ChannelParams, scheme: DiversityScheme, spec: &QuadratureSpec) -> Result<f64> {
    let link = LinkModel::new(*params, scheme)?;
    let success = |y: f64| link.success_prob(y).unwrap_or(f64::NAN);
    finite(expected_r2_numeric(&success, params, spec)?, spec)
}

/// Numeric E[R²] with a real Nakagami shape; `params.m` is ignored.
pub fn expected_r2_quadrature_real_m(
    params: &ChannelParams,
    m: f64,
    scheme: DiversityScheme,
    spec: &QuadratureSpec,
) -> Result<f64> {
    let success = real_m_success(m, scheme, params.psi)?;
    finite(expected_r2_numeric(&success, params, spec)?, spec)
}

fn finite(value: f64, spec: &QuadratureSpec) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonConvergence { estimate: value, error: f64::NAN, subdivisions: spec.max_subdivisions })
    }
}

/// E[R²] with path loss and lognormal shadowing only, integrating the
/// path-loss density directly: `∫ 2ρ dρ ∫_{ψW/P_tx}^∞ f(a | ρ) da`.
pub fn expected_r2_numeric_nofade(params: &ChannelParams, spec: &QuadratureSpec) -> Result<f64> {
    params.validate()?;
    spec.validate()?;
    if !(params.sigma > 0.0) {
        return domain("expected_r2_numeric_nofade requires sigma > 0");
    }
    let sigma = params.sigma;
    let ln_floor = (params.psi * params.w / params.ptx).ln();
    // P[l(ρ) ≥ ψW/P_tx], integrated over t = ln a
    let coverage = |v: f64| -> f64 {
        let rho = v.sqrt();
        let median = params.k.ln() - params.alpha * rho.ln();
        let lo = ln_floor.max(median - 40.0 * sigma);
        let hi = median + 40.0 * sigma;
        if lo >= hi {
            return 0.0;
        }
        let density = |t: f64| {
            let a = t.exp();
            path_loss_pdf(a, rho, params).map(|p| p * a).unwrap_or(0.0)
        };
        integrate_adaptive(&density, lo, hi, 1e-3 * spec.rel_tol, spec.rel_tol, spec.max_subdivisions)
            .map(|i| i.value)
            .unwrap_or(f64::NAN)
    };
    let value = integrate_semi_infinite(&coverage, params.disk_radius().powi(2), spec)?;
    if value.is_nan() {
        return Err(Error::NonConvergence { estimate: value, error: f64::NAN, subdivisions: spec.max_subdivisions });
    }
    Ok(value)
}

/// Γ(m, mψ/y) / Γ(m) for real m ≥ 0.5.
pub fn success_prob_real_m(y: f64, m: f64, psi: f64) -> Result<f64> {
    if !(y > 0.0) {
        return domain(format!("average SNR must be > 0, got {y}"));
    }
    if !(m >= 0.5) || !m.is_finite() {
        return domain(format!("Nakagami m must be >= 0.5, got {m}"));
    }
    regularized_upper_gamma(m, m * psi / y)
}

/// Success probability for real-valued m under any diversity scheme.
/// MRC uses shape mM; SC uses `1 - (1 - P_S)^M` on independent branches.
pub fn real_m_success(m: f64, scheme: DiversityScheme, psi: f64) -> Result<impl Fn(f64) -> f64> {
    if !(m >= 0.5) || !m.is_finite() {
        return domain(format!("Nakagami m must be >= 0.5, got {m}"));
    }
    scheme.validate()?;
    let scheme = scheme.normalized();
    Ok(move |y: f64| {
        if !(y > 0.0) {
            return 0.0;
        }
        match scheme {
            DiversityScheme::None => regularized_upper_gamma(m, m * psi / y).unwrap_or(f64::NAN),
            DiversityScheme::Mrc(b) => regularized_upper_gamma(m * b as f64, m * psi / y).unwrap_or(f64::NAN),
            DiversityScheme::Sc(b) => {
                let single = regularized_upper_gamma(m, m * psi / y).unwrap_or(f64::NAN);
                1.0 - (1.0 - single).powi(b as i32)
            }
        }
    })
}

/// Link success probability averaged over shadowing: `E_Z[P_S(y·e^{σZ})]`,
/// where `y` is the unshadowed mean SNR.
pub fn shadow_averaged_success(link: &LinkModel, y: f64, spec: &QuadratureSpec) -> Result<f64> {
    let sigma = link.params().sigma;
    if sigma == 0.0 {
        return link.success_prob(y);
    }
    GaussHermite::standard_normal(spec.hermite_order).try_expect(|z| link.success_prob(y * (sigma * z).exp()))
}
