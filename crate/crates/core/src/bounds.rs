//! Closed-form certification arithmetic: the ρ̄ bounds on the averaging
//! remainders, the bound chains of the unbiased and classical stability
//! conditions (delayed and delay-free), and the feasibility predicates
//! built on them.
//!
//! Every `|1 − x|` is taken as an absolute value. Differences of two such
//! factors are formed algebraically when both arguments lie in `[0, 1]`,
//! since at `ε* ~ 1e−14` the literal difference of two numbers next to 1
//! carries no significant digits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dither::inv_sqrt_floor;
use crate::estimator::Variant;
use crate::plant::UncertaintyBounds;

/// Constants of the delayed ρ̄ bounds.
pub const RHO1_COEFF: f64 = 0.19245;
pub const RHO2_COEFF: f64 = 0.3849;
pub const RHO4_COEFF: f64 = 0.19245;
pub const C_PI_FACTOR: f64 = 3.3072;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("delayed regime requires d_max >= 1 (use the delay-free path for d_max = 0)")]
    Regime,
    #[error("delay-free regime requires d_max = 0, got {0}")]
    DelayFreeWithDelay(usize),
    #[error("chain undefined: nonpositive denominator {name} = {value:e}")]
    ChainUndefined { name: &'static str, value: f64 },
    #[error("invalid bound inputs: {0}")]
    Invalid(String),
    #[error("empty region: sigma1 = {sigma1} does not exceed alpha0*|a| = {dither}")]
    EmptyRegion { sigma1: f64, dither: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayRegime {
    Delayed,
    DelayFree,
}

impl DelayRegime {
    pub fn for_d_max(d_max: usize) -> Self {
        if d_max == 0 {
            DelayRegime::DelayFree
        } else {
            DelayRegime::Delayed
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub d_max: usize,
    pub amplitudes: Vec<f64>,
    pub k: f64,
    pub lambda: f64,
    pub omega_h: f64,
    pub alpha0: f64,
    pub epsilon_star: f64,
    pub sigma: f64,
    pub uncertainty: UncertaintyBounds,
    pub variant: Variant,
    pub regime: DelayRegime,
}

impl BoundInputs {
    /// The 3-D example: `aᵢ = 0.1`, `k = λ = 0.005`, `ω_h = 0.015`,
    /// `α₀ = 1`, `H_m = 9.5`, `H_M = 111`, `σ₀ = ΔQ = 1`, `Q₀ = 0`.
    pub fn example_3d(variant: Variant, d_max: usize, epsilon_star: f64, sigma: f64) -> Self {
        Self {
            n: 3,
            d_max,
            amplitudes: vec![0.1; 3],
            k: 0.005,
            lambda: 0.005,
            omega_h: 0.015,
            alpha0: 1.0,
            epsilon_star,
            sigma,
            uncertainty: UncertaintyBounds::example_3d(),
            variant,
            regime: DelayRegime::for_d_max(d_max),
        }
    }

    pub fn with(&self, epsilon_star: f64, sigma: f64) -> Self {
        Self { epsilon_star, sigma, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), BoundsError> {
        let bad = |m: &str| Err(BoundsError::Invalid(m.to_string()));
        if self.n == 0 || self.amplitudes.len() != self.n {
            return bad("amplitudes must have length n >= 1");
        }
        if self.amplitudes.iter().any(|a| *a == 0.0 || !a.is_finite()) {
            return bad("amplitudes must be nonzero and finite");
        }
        if !(self.epsilon_star > 0.0 && self.epsilon_star.is_finite()) {
            return bad("epsilon_star must be positive");
        }
        if !(self.k >= 0.0 && self.lambda >= 0.0 && self.omega_h >= 0.0) {
            return bad("k, lambda and omega_h must be nonnegative");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be nonnegative");
        }
        self.uncertainty.validate().map_err(|e| BoundsError::Invalid(e.to_string()))?;
        match self.regime {
            DelayRegime::Delayed if self.d_max == 0 => Err(BoundsError::Regime),
            DelayRegime::DelayFree if self.d_max != 0 => Err(BoundsError::DelayFreeWithDelay(self.d_max)),
            _ => Ok(()),
        }
    }

    fn amp_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    fn amp_sq_sum(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum()
    }

    fn inv_amp_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| 1.0 / (a * a)).sum::<f64>().sqrt()
    }
}

/// `|1 − x|`.
pub fn abs_one_minus(x: f64) -> f64 {
    (1.0 - x).abs()
}

/// `|1 − x|^p`, accurate for tiny `x`.
pub fn abs_one_minus_pow(x: f64, p: f64) -> f64 {
    if p == 0.0 {
        return 1.0;
    }
    let ln = if x < 1.0 { (-x).ln_1p() } else { (x - 1.0).ln() };
    (p * ln).exp()
}

/// `|1 − x| − |1 − y|`.
pub fn decay_gap(x: f64, y: f64) -> f64 {
    if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
        y - x
    } else {
        abs_one_minus(x) - abs_one_minus(y)
    }
}

/// `|1 − x|² − |1 − y|`.
pub fn decay_gap_sq(x: f64, y: f64) -> f64 {
    if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
        y - 2.0 * x + x * x
    } else {
        abs_one_minus(x).powi(2) - abs_one_minus(y)
    }
}

/// `cᵢ` of the ρ̄₃ bound, evaluated at `ε`.
pub fn c_coeff(n: usize, d_max: usize, epsilon: f64, i: usize) -> f64 {
    let se = epsilon.sqrt();
    let nd = (n * d_max) as f64;
    let p = C_PI_FACTOR * PI * i as f64;
    (nd + se) * (2.0 * nd + se) / 12.0 + (se * (se + nd) + (d_max * d_max * n * n) as f64 * (1.0 + 1.0 / p)) / p
}

/// `c̄ᵢ` of the delay-free ρ̄₃ bound.
pub fn c_bar_coeff(n: usize, i: usize) -> f64 {
    let nf = n as f64;
    let w = 2.0 * PI * i as f64 / (2.0 * nf + 1.0);
    (nf + 1.0) * (4.0 * nf + 3.0) / 6.0 + (1.0 / (4.0 * w.sin().abs())) * ((1.0 / w.tan()).abs() + 2.0 * nf + 2.0 + 1.0 / (2.0 * nf + 1.0))
}

/// ρ̄₁..ρ̄₄ for `D_M ≥ 1`; the bounds on `ρ_l` are `ρ̄_l √ε`.
pub fn rho_bars_delayed(inputs: &BoundInputs) -> Result<[f64; 4], BoundsError> {
    if inputs.d_max == 0 {
        return Err(BoundsError::Regime);
    }
    let n = inputs.n;
    let a = &inputs.amplitudes;
    let nd = (n * inputs.d_max) as f64;
    let h_max = inputs.uncertainty.h_max;
    let k = inputs.k;

    let harmonic: f64 = (1..=n).map(|i| 1.0 / i as f64).sum();
    let mut cross = 0.0;
    for i in 1..=n {
        for l in 1..=n {
            if i != l {
                let ratio = (a[l - 1] / a[i - 1]).abs();
                cross += ratio * (1.0 / (i as f64 - l as f64).abs() + 1.0 / (i + l) as f64);
            }
        }
    }
    let inv_weighted: f64 = (1..=n).map(|i| 1.0 / (i as f64 * a[i - 1].abs())).sum();
    let c_term: f64 = (1..=n)
        .map(|i| {
            let c = c_coeff(n, inputs.d_max, inputs.epsilon_star, i);
            c * c / (a[i - 1] * a[i - 1])
        })
        .sum::<f64>()
        .sqrt();

    Ok([
        RHO1_COEFF * nd * k * h_max * (harmonic + cross),
        RHO2_COEFF * nd * k * inv_weighted,
        k * h_max * inputs.amp_sq_sum() * c_term,
        RHO4_COEFF * nd * k * inv_weighted,
    ])
}

/// ρ̄₁..ρ̄₄ for `D_M = 0`, `T = 2n+1`; the bounds on `ρ_l` are `ρ̄_l ε`.
pub fn rho_bars_delay_free(inputs: &BoundInputs) -> [f64; 4] {
    let n = inputs.n;
    let a = &inputs.amplitudes;
    let h_max = inputs.uncertainty.h_max;
    let k = inputs.k;
    let w = |i: usize| 2.0 * PI * i as f64 / (2 * n + 1) as f64;

    let mut s1: f64 = (1..=n).map(|i| 1.0 / w(i).sin().abs()).sum();
    for i in 1..=n {
        for l in 1..=n {
            if i != l {
                let ratio = (a[l - 1] / a[i - 1]).abs();
                s1 += ratio * (1.0 / ((w(i) - w(l)) / 2.0).sin().abs() + 1.0 / ((w(i) + w(l)) / 2.0).sin().abs());
            }
        }
    }
    let s2: f64 = (1..=n).map(|i| 1.0 / (a[i - 1].abs() * (w(i) / 2.0).sin().abs())).sum();
    let c_term: f64 = (1..=n)
        .map(|i| {
            let c = c_bar_coeff(n, i);
            c * c / (a[i - 1] * a[i - 1])
        })
        .sum::<f64>()
        .sqrt();
    [k * h_max / 2.0 * s1, k * s2, k * h_max * inputs.amp_sq_sum() * c_term, k / 2.0 * s2]
}

/// ρ̄ for the inputs' regime.
pub fn rho_bars(inputs: &BoundInputs) -> Result<[f64; 4], BoundsError> {
    match inputs.regime {
        DelayRegime::Delayed => rho_bars_delayed(inputs),
        DelayRegime::DelayFree => Ok(rho_bars_delay_free(inputs)),
    }
}

/// Every constant of a bound chain. `sigma_eta` exists only for the
/// unbiased variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundChain {
    pub rho_bar: [f64; 4],
    pub sigma_y: f64,
    pub sigma_eta: Option<f64>,
    pub delta: f64,
    pub delta_out: f64,
    pub delta_g: f64,
    pub delta_y: f64,
}

impl BoundChain {
    /// `(name, value)` pairs in evaluation order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        let mut out = vec![
            ("rho_bar_1", self.rho_bar[0]),
            ("rho_bar_2", self.rho_bar[1]),
            ("rho_bar_3", self.rho_bar[2]),
            ("rho_bar_4", self.rho_bar[3]),
            ("sigma_y", self.sigma_y),
        ];
        if let Some(se) = self.sigma_eta {
            out.push(("sigma_eta", se));
        }
        out.extend([("delta", self.delta), ("delta_out", self.delta_out), ("delta_g", self.delta_g), ("delta_y", self.delta_y)]);
        out
    }
}

fn effective_d(inputs: &BoundInputs) -> usize {
    match inputs.regime {
        DelayRegime::Delayed => inputs.d_max,
        DelayRegime::DelayFree => 0,
    }
}

/// `σ_y = (H_M/2) |1−ε*λ|^{−2D_M} (σ + α₀|a|)²`.
pub fn sigma_y_unbiased(inputs: &BoundInputs) -> f64 {
    let eps = inputs.epsilon_star;
    let d = effective_d(inputs) as f64;
    let spread = inputs.sigma + inputs.alpha0 * inputs.amp_norm();
    inputs.uncertainty.h_max / 2.0 * abs_one_minus_pow(eps * inputs.lambda, -2.0 * d) * spread * spread
}

/// `σ_η = ΔQ |1−ε*ω_h|^{−D_M} + ε*ω_h σ_y / (|1−ε*λ|² − |1−ε*ω_h|)`.
pub fn sigma_eta_unbiased(inputs: &BoundInputs, sigma_y: f64) -> Result<f64, BoundsError> {
    let eps = inputs.epsilon_star;
    let d = effective_d(inputs) as f64;
    let gap = decay_gap_sq(eps * inputs.lambda, eps * inputs.omega_h);
    if !(gap > 0.0) {
        return Err(BoundsError::ChainUndefined { name: "|1-eps*lambda|^2 - |1-eps*omega_h|", value: gap });
    }
    let head = inputs.uncertainty.delta_q * abs_one_minus_pow(eps * inputs.omega_h, -d);
    let tail = eps * inputs.omega_h * sigma_y;
    Ok(head + if tail == 0.0 { 0.0 } else { tail / gap })
}

/// Unbiased chain, evaluated in the order σ_y → σ_η → Δ → Δ̄_out → Δ_G → Δ_Y.
pub fn chain_theorem1(inputs: &BoundInputs) -> Result<BoundChain, BoundsError> {
    inputs.validate()?;
    if !(inputs.alpha0 > 0.0) {
        return Err(BoundsError::Invalid("alpha0 must be positive for the unbiased chain".into()));
    }
    let eps = inputs.epsilon_star;
    let se = eps.sqrt();
    let d = effective_d(inputs);
    let df = d as f64;
    let lam = inputs.lambda;
    let wh = inputs.omega_h;
    let k = inputs.k;
    let a0 = inputs.alpha0;
    let h_max = inputs.uncertainty.h_max;
    let h_min = inputs.uncertainty.h_min;
    let sigma = inputs.sigma;

    let gap_k = decay_gap(eps * lam, eps * k * h_min);
    if !(gap_k > 0.0) {
        return Err(BoundsError::ChainUndefined { name: "|1-eps*lambda| - |1-eps*k*H_m|", value: gap_k });
    }

    let rho = rho_bars(inputs)?;
    let a_norm = inputs.amp_norm();
    let inv_a = inputs.inv_amp_norm();
    let l_abs = abs_one_minus(eps * lam);
    let w_abs = abs_one_minus(eps * wh);
    let spread = sigma + a0 * a_norm;

    let sigma_y = sigma_y_unbiased(inputs);
    let sigma_eta = sigma_eta_unbiased(inputs, sigma_y)?;
    let delta = 2.0 * k / a0 * (h_max / 2.0 * spread * spread + sigma_eta) * inv_a;
    let delta_out = if d == 0 {
        0.0
    } else {
        let shrink = (1.0 - se) * df;
        let oscill = lam * se + 2.0 * PI / shrink * (PI * se / shrink + 1.0);
        k * df * h_max / a0
            * inv_a
            * spread
            * (1.0 + abs_one_minus_pow(eps * lam, -df))
            * (2.0 * se * k * (sigma_y + sigma_eta) / a0 * inv_a + a0 * a_norm * oscill / l_abs)
    };
    let delta_g = rho[0] * sigma + rho[1] * sigma_eta / a0 + rho[2] * a0 + rho[3] * sigma * sigma * h_max / a0;
    let x = delta + se * delta_out;
    let delta_y = k * h_max * delta_g
        + rho[0] * x
        + wh * rho[1] / a0 * (sigma_y + sigma_eta)
        + rho[1] * lam * (sigma_eta * w_abs + eps * wh * sigma_y) / (a0 * l_abs)
        + rho[2] * a0 * lam
        + 2.0 * rho[3] * sigma / a0 * h_max * x
        + delta_out
        + eps * rho[3] / a0 * h_max * x * x
        + rho[3] / a0 * lam / l_abs * h_max * (sigma + eps * x).powi(2);

    Ok(BoundChain { rho_bar: rho, sigma_y, sigma_eta: Some(sigma_eta), delta, delta_out, delta_g, delta_y })
}

/// Classical chain (no filter, `α ≡ 1`).
pub fn chain_theorem2(inputs: &BoundInputs) -> Result<BoundChain, BoundsError> {
    inputs.validate()?;
    let eps = inputs.epsilon_star;
    let se = eps.sqrt();
    let d = effective_d(inputs);
    let df = d as f64;
    let k = inputs.k;
    let h_max = inputs.uncertainty.h_max;
    let sigma = inputs.sigma;
    let q_top = inputs.uncertainty.q0 + inputs.uncertainty.delta_q;

    let rho = rho_bars(inputs)?;
    let a_norm = inputs.amp_norm();
    let inv_a = inputs.inv_amp_norm();
    let spread = sigma + a_norm;

    let sigma_y = h_max / 2.0 * spread * spread;
    let delta = 2.0 * k * (sigma_y + q_top) * inv_a;
    let delta_out = if d == 0 {
        0.0
    } else {
        let shrink = (1.0 - se) * df;
        2.0 * k * df * h_max * inv_a * spread * (se * delta + 2.0 * PI * a_norm / shrink * (PI * se / shrink + 1.0))
    };
    let delta_g = rho[0] * sigma + rho[1] * q_top + rho[2] + rho[3] * sigma * sigma * h_max;
    let x = delta + se * delta_out;
    let delta_y = k * h_max * delta_g + rho[0] * x + 2.0 * rho[3] * sigma * h_max * x + delta_out + eps * rho[3] * h_max * x * x;

    Ok(BoundChain { rho_bar: rho, sigma_y, sigma_eta: None, delta, delta_out, delta_g, delta_y })
}

pub fn chain(inputs: &BoundInputs) -> Result<BoundChain, BoundsError> {
    match inputs.variant {
        Variant::Unbiased => chain_theorem1(inputs),
        Variant::Classical => chain_theorem2(inputs),
    }
}

/// Residual of one condition; satisfied when `margin > threshold`
/// (or `>= 0` for the non-strict period condition).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMargin {
    pub name: String,
    pub margin: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityVerdict {
    pub feasible: bool,
    pub margins: Vec<ConditionMargin>,
    pub reason: Option<String>,
    pub chain: Option<BoundChain>,
}

impl FeasibilityVerdict {
    /// Name of the condition with the smallest margin.
    pub fn tightest(&self) -> Option<&ConditionMargin> {
        self.margins.iter().min_by(|a, b| a.margin.total_cmp(&b.margin))
    }
}

/// Options shared by the predicates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredicateOptions {
    /// Strict inequalities must hold by more than this amount.
    pub strict_margin: f64,
}

impl Default for PredicateOptions {
    fn default() -> Self {
        Self { strict_margin: 0.0 }
    }
}

fn period_margin(inputs: &BoundInputs) -> ConditionMargin {
    let n = inputs.n as f64;
    let lhs = inputs.n as u64 as f64 * inputs.d_max as f64 * inv_sqrt_floor(inputs.epsilon_star) as f64;
    let margin = lhs - (2.0 * n + 1.0);
    ConditionMargin { name: "period".into(), margin, satisfied: margin >= 0.0 }
}

fn strict(name: &str, margin: f64, opts: PredicateOptions) -> ConditionMargin {
    ConditionMargin { name: name.into(), margin, satisfied: margin > opts.strict_margin }
}

fn finish(margins: Vec<ConditionMargin>, chain: Option<BoundChain>, reason: Option<String>) -> FeasibilityVerdict {
    let feasible = reason.is_none() && margins.iter().all(|m| m.satisfied);
    let reason = reason.or_else(|| margins.iter().find(|m| !m.satisfied).map(|m| format!("condition {} violated", m.name)));
    FeasibilityVerdict { feasible, margins, reason, chain }
}

/// Unbiased stability conditions: the period condition (delayed only), the
/// step-size condition and the σ inequality; the delay-free regime uses the
/// `σ₀ + 2εΔ_G + ε²Δ_Y/(…) < σ` form.
pub fn feasible_theorem1(inputs: &BoundInputs, opts: PredicateOptions) -> FeasibilityVerdict {
    if let Err(e) = inputs.validate() {
        return finish(vec![], None, Some(e.to_string()));
    }
    let eps = inputs.epsilon_star;
    let lam = inputs.lambda;
    let k = inputs.k;
    let h_min = inputs.uncertainty.h_min;
    let mut margins = Vec::new();

    margins.push(strict("gain_ordering", (k * h_min - lam).min(inputs.omega_h - 2.0 * lam), opts));
    if inputs.regime == DelayRegime::Delayed {
        margins.push(period_margin(inputs));
    }
    let step = eps * (lam + k * h_min).max(inputs.omega_h + 2.0 * lam - eps * lam * lam);
    margins.push(strict("step_size", 2.0 - step, opts));

    let chain = match chain_theorem1(inputs) {
        Ok(c) => c,
        Err(e) => return finish(margins, None, Some(e.to_string())),
    };
    let gap = decay_gap(eps * lam, eps * k * h_min);
    let se = eps.sqrt();
    let lhs = match inputs.regime {
        DelayRegime::Delayed => {
            let d = inputs.d_max as f64;
            (inputs.uncertainty.sigma0 + se * chain.delta_g * abs_one_minus_pow(eps * lam, d)) * abs_one_minus_pow(eps * k * h_min, -d)
                + se * chain.delta_g
                + se * se * se * chain.delta_y / gap
        }
        DelayRegime::DelayFree => inputs.uncertainty.sigma0 + 2.0 * eps * chain.delta_g + eps * eps * chain.delta_y / gap,
    };
    margins.push(strict("sigma", inputs.sigma - lhs, opts));
    finish(margins, Some(chain), None)
}

/// Classical stability conditions (period, `ε*kH_m < 2`, σ inequality).
pub fn feasible_theorem2(inputs: &BoundInputs, opts: PredicateOptions) -> FeasibilityVerdict {
    if let Err(e) = inputs.validate() {
        return finish(vec![], None, Some(e.to_string()));
    }
    let eps = inputs.epsilon_star;
    let kh = inputs.k * inputs.uncertainty.h_min;
    let mut margins = Vec::new();
    if inputs.regime == DelayRegime::Delayed {
        margins.push(period_margin(inputs));
    }
    margins.push(strict("step_size", 2.0 - eps * kh, opts));

    let chain = match chain_theorem2(inputs) {
        Ok(c) => c,
        Err(e) => return finish(margins, None, Some(e.to_string())),
    };
    let gap = decay_gap(0.0, eps * kh);
    let se = eps.sqrt();
    let tail = |scale: f64| if chain.delta_y == 0.0 { 0.0 } else { scale * chain.delta_y / gap };
    let lhs = match inputs.regime {
        DelayRegime::Delayed => {
            let d = inputs.d_max as f64;
            (inputs.uncertainty.sigma0 + se * chain.delta_g) * abs_one_minus_pow(eps * kh, -d) + se * chain.delta_g + tail(se * se * se)
        }
        DelayRegime::DelayFree => inputs.uncertainty.sigma0 + 2.0 * eps * chain.delta_g + tail(eps * eps),
    };
    margins.push(strict("sigma", inputs.sigma - lhs, opts));
    finish(margins, Some(chain), None)
}

pub fn feasible(inputs: &BoundInputs, opts: PredicateOptions) -> FeasibilityVerdict {
    match inputs.variant {
        Variant::Unbiased => feasible_theorem1(inputs, opts),
        Variant::Classical => feasible_theorem2(inputs, opts),
    }
}

/// Radius of the set the classical error is attracted to, at step size
/// `epsilon`: `√ε(Δ_G + εΔ_Y/(1−|1−εkH_m|))`, or with `ε` in place of `√ε`
/// in the delay-free regime.
pub fn ultimate_bound_radius(epsilon: f64, chain: &BoundChain, inputs: &BoundInputs) -> f64 {
    let kh = inputs.k * inputs.uncertainty.h_min;
    let tail = if chain.delta_y == 0.0 { 0.0 } else { epsilon * chain.delta_y / decay_gap(0.0, epsilon * kh) };
    let scale = match inputs.regime {
        DelayRegime::Delayed => epsilon.sqrt(),
        DelayRegime::DelayFree => epsilon,
    };
    scale * (chain.delta_g + tail)
}

/// Certified σ for a map that is only locally quadratic within `σ₁`.
pub fn region_for_local_map(sigma1: f64, alpha0: f64, amplitudes: &[f64]) -> Result<f64, BoundsError> {
    let dither = alpha0 * amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
    let sigma = sigma1 - dither;
    if sigma > 0.0 {
        Ok(sigma)
    } else {
        Err(BoundsError::EmptyRegion { sigma1, dither })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaps_match_literal_forms_away_from_cancellation() {
        for (x, y) in [(0.1, 0.3), (0.5, 0.2), (1.5, 0.2), (0.3, 1.7)] {
            assert!((decay_gap(x, y) - (abs_one_minus(x) - abs_one_minus(y))).abs() < 1e-15);
            assert!((decay_gap_sq(x, y) - (abs_one_minus(x).powi(2) - abs_one_minus(y))).abs() < 1e-15);
        }
        assert!((decay_gap(1e-17, 3e-17) - 2e-17).abs() < 1e-32);
        assert!((abs_one_minus_pow(0.1, -2.0) - 1.0 / 0.81).abs() < 1e-14);
        assert!((abs_one_minus_pow(2.5, 3.0) - 3.375).abs() < 1e-13);
    }

    #[test]
    fn zero_gain_zero_rho_bars() {
        let mut b = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-8, 1.5);
        b.k = 0.0;
        assert_eq!(rho_bars_delayed(&b).unwrap(), [0.0; 4]);
        b.d_max = 0;
        b.regime = DelayRegime::DelayFree;
        assert_eq!(rho_bars_delay_free(&b), [0.0; 4]);
    }

    #[test]
    fn delayed_requires_delay() {
        let mut b = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-8, 1.5);
        b.d_max = 0;
        assert_eq!(rho_bars_delayed(&b), Err(BoundsError::Regime));
        assert_eq!(chain_theorem1(&b), Err(BoundsError::Regime));
    }

    #[test]
    fn doubling_delay_doubles_linear_bars() {
        let b5 = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-10, 1.5);
        let b10 = BoundInputs { d_max: 10, ..b5.clone() };
        let r5 = rho_bars_delayed(&b5).unwrap();
        let r10 = rho_bars_delayed(&b10).unwrap();
        for l in [0, 1, 3] {
            assert!((r10[l] - 2.0 * r5[l]).abs() <= 1e-14 * r10[l]);
        }
    }

    #[test]
    fn single_channel_delay_free_rho2() {
        let b = BoundInputs { n: 1, amplitudes: vec![0.4], k: 0.3, ..BoundInputs::example_3d(Variant::Unbiased, 0, 1e-3, 1.5) };
        let r = rho_bars_delay_free(&b);
        assert!((r[1] - 0.3 / (0.4 * (PI / 3.0).sin())).abs() < 1e-14);
        assert!((r[3] - 0.5 * r[1]).abs() < 1e-15);
    }

    #[test]
    fn sigma_eta_vanishes_on_degenerate_probe() {
        let mut b = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-6, 0.0);
        b.alpha0 = 0.0;
        b.uncertainty.delta_q = 0.0;
        let sy = sigma_y_unbiased(&b);
        assert_eq!(sy, 0.0);
        assert_eq!(sigma_eta_unbiased(&b, sy).unwrap(), 0.0);
    }

    #[test]
    fn delay_free_has_no_outer_term() {
        let b = BoundInputs::example_3d(Variant::Unbiased, 0, 1e-6, 1.6);
        assert_eq!(chain_theorem1(&b).unwrap().delta_out, 0.0);
        let b = BoundInputs::example_3d(Variant::Classical, 0, 1e-6, 1.6);
        assert_eq!(chain_theorem2(&b).unwrap().delta_out, 0.0);
    }

    #[test]
    fn chain_undefined_names_denominator() {
        let mut b = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-6, 1.6);
        b.omega_h = 0.001; // ω_h < 2λ
        match chain_theorem1(&b) {
            Err(BoundsError::ChainUndefined { name, .. }) => assert!(name.contains("omega_h")),
            other => panic!("{other:?}"),
        }
        let v = feasible_theorem1(&b, PredicateOptions::default());
        assert!(!v.feasible);
        assert!(v.reason.unwrap().contains("omega_h"));
    }

    #[test]
    fn classical_zero_gain_chain() {
        let mut b = BoundInputs::example_3d(Variant::Classical, 5, 1e-6, 1.6);
        b.k = 0.0;
        let c = chain_theorem2(&b).unwrap();
        assert_eq!(c.rho_bar, [0.0; 4]);
        assert_eq!((c.delta, c.delta_out, c.delta_g, c.delta_y), (0.0, 0.0, 0.0, 0.0));
        assert!(feasible_theorem2(&b, PredicateOptions::default()).feasible);
        assert_eq!(ultimate_bound_radius(1e-6, &c, &b), 0.0);
        let below = b.with(1e-6, 0.9);
        assert!(!feasible_theorem2(&below, PredicateOptions::default()).feasible);
    }

    #[test]
    fn period_condition() {
        // n D ⌊1/√ε⌋ = 3·5·⌊1/0.2⌋ = 75 ≥ 7 but with ε = 0.9: 15·1 = 15 ≥ 7;
        // D = 1, n = 1: 1·⌊1/√0.5⌋ = 1 < 3
        let b = BoundInputs { n: 1, amplitudes: vec![0.1], ..BoundInputs::example_3d(Variant::Unbiased, 1, 0.5, 1.6) };
        let v = feasible_theorem1(&b, PredicateOptions::default());
        assert!(!v.feasible);
        assert!(v.margins.iter().any(|m| m.name == "period" && !m.satisfied));
        let v = feasible_theorem2(&BoundInputs { variant: Variant::Classical, ..b }, PredicateOptions::default());
        assert!(v.margins.iter().any(|m| m.name == "period" && !m.satisfied));
    }

    #[test]
    fn sigma_not_above_sigma0_is_infeasible() {
        for eps in [1e-16, 1e-12, 1e-8] {
            for d in [0, 5] {
                let b = BoundInputs::example_3d(Variant::Unbiased, d, eps, 1.0);
                let v = feasible_theorem1(&b, PredicateOptions::default());
                assert!(!v.feasible);
                assert!(v.margins.iter().any(|m| m.name == "sigma" && !m.satisfied));
            }
        }
    }

    #[test]
    fn classical_step_condition() {
        let b = BoundInputs::example_3d(Variant::Classical, 0, 2.0 / (0.005 * 9.5), 1.6);
        let v = feasible_theorem2(&b, PredicateOptions::default());
        assert!(v.margins.iter().any(|m| m.name == "step_size" && !m.satisfied));
    }

    #[test]
    fn region_formula() {
        assert_eq!(region_for_local_map(2.0, 0.0, &[0.1; 3]).unwrap(), 2.0);
        let r = region_for_local_map(2.0, 0.1, &[0.1; 3]).unwrap();
        assert!((r - (2.0 - 0.1 * 0.03f64.sqrt())).abs() < 1e-15);
        assert!(matches!(region_for_local_map(0.01, 0.1, &[0.1; 3]), Err(BoundsError::EmptyRegion { .. })));
    }

    #[test]
    fn delay_free_radius_scales_linearly() {
        let b = BoundInputs::example_3d(Variant::Classical, 0, 1e-5, 1.6);
        let c = chain_theorem2(&b).unwrap();
        let r1 = ultimate_bound_radius(1e-6, &c, &b);
        let r2 = ultimate_bound_radius(2e-6, &c, &b);
        // Δ_Y term: ε·Δ_Y/(εkH_m) is ε-independent, so r ∝ ε
        assert!((r2 / r1 - 2.0).abs() < 1e-6);
        let bd = BoundInputs::example_3d(Variant::Classical, 5, 1e-8, 1.6);
        let cd = chain_theorem2(&bd).unwrap();
        let q = ultimate_bound_radius(4e-8, &cd, &bd) / ultimate_bound_radius(1e-8, &cd, &bd);
        assert!((q - 2.0).abs() < 1e-6);
    }
}
