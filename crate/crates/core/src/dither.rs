//! Sinusoidal perturbation and demodulation signals, the period law, the
//! decaying dither gain and the averaging machinery (window averages and
//! the ρ functions) used by the certification checks.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DitherError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("amplitude a_{0} must be nonzero and finite")]
    BadAmplitude(usize),
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error("gain parameters must be positive: {0}")]
    BadGain(&'static str),
    #[error("rho index must be in 1..=4, got {0}")]
    BadRhoIndex(usize),
    #[error("dither gain exhausted at step {step} (alpha = {alpha:e})")]
    GainExhausted { step: u64, alpha: f64 },
}

/// Below this value the gain is treated as numerically exhausted.
pub const GAIN_FLOOR: f64 = 1e-280;

/// `⌊1/√ε⌋` computed exactly on top of the floating-point estimate.
pub fn inv_sqrt_floor(epsilon: f64) -> u64 {
    let mut m = (1.0 / epsilon.sqrt()).floor().max(0.0) as u64;
    // correct possible off-by-one from rounding
    while m > 0 && (m as f64) * (m as f64) * epsilon > 1.0 {
        m -= 1;
    }
    while ((m + 1) as f64) * ((m + 1) as f64) * epsilon <= 1.0 {
        m += 1;
    }
    m
}

/// `T = max{ n·D_M·⌊1/√ε⌋, 2n+1 }`.
pub fn make_period(n: usize, d_max: usize, epsilon: f64) -> u64 {
    let slow = (n as u64).saturating_mul(d_max as u64).saturating_mul(inv_sqrt_floor(epsilon));
    slow.max(2 * n as u64 + 1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DitherConfig {
    amplitudes: Vec<f64>,
    epsilon: f64,
    d_max: usize,
    period: u64,
    frequencies: Vec<f64>,
}

impl DitherConfig {
    pub fn new(amplitudes: Vec<f64>, epsilon: f64, d_max: usize) -> Result<Self, DitherError> {
        let n = amplitudes.len();
        if n == 0 {
            return Err(DitherError::EmptyDimension);
        }
        if let Some(i) = amplitudes.iter().position(|a| *a == 0.0 || !a.is_finite()) {
            return Err(DitherError::BadAmplitude(i + 1));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(DitherError::BadEpsilon(epsilon));
        }
        let period = make_period(n, d_max, epsilon);
        let frequencies = (1..=n).map(|i| 2.0 * PI * i as f64 / period as f64).collect();
        Ok(Self { amplitudes, epsilon, d_max, period, frequencies })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// `sin(ωᵢ j)` for every channel, with the phase reduced modulo `T`.
    #[inline]
    pub fn fill_sines(&self, j: u64, out: &mut [f64]) {
        let phase = (j % self.period) as f64;
        for (o, w) in out.iter_mut().zip(&self.frequencies) {
            *o = (w * phase).sin();
        }
    }

    /// `S(j)`, with `Sᵢ(j) = aᵢ sin(ωᵢ j)`.
    pub fn dither_vec(&self, j: u64) -> Vec<f64> {
        let mut s = vec![0.0; self.dim()];
        self.fill_sines(j, &mut s);
        s.iter_mut().zip(&self.amplitudes).for_each(|(v, a)| *v *= a);
        s
    }

    /// `M(j)`, with `Mᵢ(j) = (2/aᵢ) sin(ωᵢ j)`.
    pub fn demod_vec(&self, j: u64) -> Vec<f64> {
        let mut m = vec![0.0; self.dim()];
        self.fill_sines(j, &mut m);
        m.iter_mut().zip(&self.amplitudes).for_each(|(v, a)| *v *= 2.0 / a);
        m
    }

    /// Euclidean norm of the amplitude vector.
    pub fn amplitude_norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

/// `α(j) = α₀ λ̄ʲ` with `λ̄ = 1 − ελ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSchedule {
    alpha0: f64,
    lambda: f64,
    epsilon: f64,
}

impl GainSchedule {
    pub fn new(alpha0: f64, lambda: f64, epsilon: f64) -> Result<Self, DitherError> {
        if !(alpha0 >= 0.0 && alpha0.is_finite()) {
            return Err(DitherError::BadGain("alpha0"));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(DitherError::BadGain("lambda"));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(DitherError::BadEpsilon(epsilon));
        }
        Ok(Self { alpha0, lambda, epsilon })
    }

    /// Constant unit gain, as used by the classical loop.
    pub fn unit(epsilon: f64) -> Self {
        Self { alpha0: 1.0, lambda: 0.0, epsilon }
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn lambda_bar(&self) -> f64 {
        1.0 - self.epsilon * self.lambda
    }

    /// `ln|λ̄|`, accurate for tiny `ελ`.
    pub fn ln_lambda_bar(&self) -> f64 {
        let x = self.epsilon * self.lambda;
        if x < 1.0 {
            (-x).ln_1p()
        } else {
            (x - 1.0).ln()
        }
    }

    /// Exact `α(j)` via `exp(j·ln λ̄)`.
    pub fn exact(&self, j: u64) -> f64 {
        if self.lambda == 0.0 {
            return self.alpha0;
        }
        let lb = self.lambda_bar();
        let mag = self.alpha0 * (j as f64 * self.ln_lambda_bar()).exp();
        if lb < 0.0 && j % 2 == 1 {
            -mag
        } else {
            mag
        }
    }

    pub fn gain(&self, j: u64) -> Result<f64, DitherError> {
        let alpha = self.exact(j);
        if alpha.abs() < GAIN_FLOOR {
            Err(DitherError::GainExhausted { step: j, alpha })
        } else {
            Ok(alpha)
        }
    }

    pub fn tracker(&self) -> GainTracker {
        GainTracker { schedule: *self, j: 0, value: self.alpha0 }
    }
}

/// Incremental `α(j)`: one multiply per step with an exact refresh every
/// [`GainTracker::REFRESH`] steps.
#[derive(Debug, Clone)]
pub struct GainTracker {
    schedule: GainSchedule,
    j: u64,
    value: f64,
}

impl GainTracker {
    pub const REFRESH: u64 = 100_000;

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn step_index(&self) -> u64 {
        self.j
    }

    pub fn advance(&mut self) {
        self.j += 1;
        if self.j % Self::REFRESH == 0 {
            self.value = self.schedule.exact(self.j);
        } else {
            self.value *= self.schedule.lambda_bar();
        }
    }
}

/// The four `a_l(i)` terms for a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct ATerms {
    pub a1: DMatrix<f64>,
    pub a2: DVector<f64>,
    pub a3: DVector<f64>,
    pub a4: DVector<f64>,
}

/// `a₁ = −k M Sᵀ H + k H`, `a₂ = k M`, `a₃ = −½ k M SᵀHS`, `a₄ = −½ k M`.
pub fn a_terms(cfg: &DitherConfig, k: f64, hessian: &DMatrix<f64>, i: u64) -> ATerms {
    let s = DVector::from_vec(cfg.dither_vec(i));
    let m = DVector::from_vec(cfg.demod_vec(i));
    let sh = hessian * &s;
    let shs = s.dot(&sh);
    ATerms {
        a1: (-k) * &m * s.transpose() * hessian + k * hessian,
        a2: k * &m,
        a3: (-0.5 * k * shs) * &m,
        a4: (-0.5 * k) * &m,
    }
}

/// Window averages over `[t, t+T−1]`: `(⟨M⟩, ⟨M Sᵀ⟩, ⟨M SᵀHS⟩)`.
pub fn averaging_sums(cfg: &DitherConfig, hessian: &DMatrix<f64>, t: u64) -> (DVector<f64>, DMatrix<f64>, DVector<f64>) {
    let n = cfg.dim();
    let mut m_sum = DVector::zeros(n);
    let mut ms_sum = DMatrix::zeros(n, n);
    let mut msh_sum = DVector::zeros(n);
    for j in t..t + cfg.period() {
        let s = DVector::from_vec(cfg.dither_vec(j));
        let m = DVector::from_vec(cfg.demod_vec(j));
        let shs = s.dot(&(hessian * &s));
        m_sum += &m;
        ms_sum += &m * s.transpose();
        msh_sum += shs * &m;
    }
    let inv = 1.0 / cfg.period() as f64;
    (m_sum * inv, ms_sum * inv, msh_sum * inv)
}

/// All four ρ functions at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoSet {
    pub rho1: DMatrix<f64>,
    pub rho2: DVector<f64>,
    pub rho3: DVector<f64>,
    pub rho4: DVector<f64>,
}

impl RhoSet {
    /// `[‖ρ₁‖₂, |ρ₂|, |ρ₃|, |ρ₄|]`, with the induced 2-norm for ρ₁.
    pub fn norms(&self) -> [f64; 4] {
        [spectral_norm(&self.rho1), self.rho2.norm(), self.rho3.norm(), self.rho4.norm()]
    }
}

/// One ρ function evaluated at a step.
#[derive(Debug, Clone, PartialEq)]
pub enum RhoValue {
    Matrix(DMatrix<f64>),
    Vector(DVector<f64>),
}

impl RhoValue {
    pub fn norm(&self) -> f64 {
        match self {
            RhoValue::Matrix(m) => spectral_norm(m),
            RhoValue::Vector(v) => v.norm(),
        }
    }
}

/// `ρ_l(j) = −(ε/T) Σ_{i=j}^{j+T−1} (j+T−i) a_l(i)` for all `l`, by direct
/// summation. O(T) per call; meant for tests and diagnostics.
pub fn rho_all(cfg: &DitherConfig, k: f64, hessian: &DMatrix<f64>, j: u64) -> RhoSet {
    let n = cfg.dim();
    let t = cfg.period();
    let mut rho1 = DMatrix::zeros(n, n);
    let mut rho2 = DVector::zeros(n);
    let mut rho3 = DVector::zeros(n);
    let mut rho4 = DVector::zeros(n);
    let mut sin = vec![0.0; n];
    let amps = cfg.amplitudes();
    let mut s = DVector::zeros(n);
    let mut m = DVector::zeros(n);
    for i in j..j + t {
        let w = (j + t - i) as f64;
        cfg.fill_sines(i, &mut sin);
        for c in 0..n {
            s[c] = amps[c] * sin[c];
            m[c] = 2.0 / amps[c] * sin[c];
        }
        let shs = s.dot(&(hessian * &s));
        // Σ w·(−k M Sᵀ H + k H)
        rho1 += (-k * w) * &m * s.transpose() * hessian + (k * w) * hessian;
        rho2 += (k * w) * &m;
        rho3 += (-0.5 * k * shs * w) * &m;
        rho4 += (-0.5 * k * w) * &m;
    }
    let scale = -cfg.epsilon() / t as f64;
    RhoSet { rho1: rho1 * scale, rho2: rho2 * scale, rho3: rho3 * scale, rho4: rho4 * scale }
}

/// Single `ρ_l(j)`, `l ∈ 1..=4`.
pub fn rho_exact(cfg: &DitherConfig, k: f64, hessian: &DMatrix<f64>, l: usize, j: u64) -> Result<RhoValue, DitherError> {
    if !(1..=4).contains(&l) {
        return Err(DitherError::BadRhoIndex(l));
    }
    let set = rho_all(cfg, k, hessian, j);
    Ok(match l {
        1 => RhoValue::Matrix(set.rho1),
        2 => RhoValue::Vector(set.rho2),
        3 => RhoValue::Vector(set.rho3),
        _ => RhoValue::Vector(set.rho4),
    })
}

/// Componentwise maximum of `[‖ρ_l(j)‖]` over `samples` evenly spaced steps
/// of one period (every step when `samples >= T`).
pub fn rho_period_max(cfg: &DitherConfig, k: f64, hessian: &DMatrix<f64>, samples: u64) -> [f64; 4] {
    let t = cfg.period();
    let count = samples.clamp(1, t);
    let mut best = [0.0f64; 4];
    for s in 0..count {
        let j = s * t / count;
        let norms = rho_all(cfg, k, hessian, j).norms();
        for (b, v) in best.iter_mut().zip(norms) {
            *b = b.max(v);
        }
    }
    best
}

pub(crate) fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    let ata = m.transpose() * m;
    let ev = nalgebra::SymmetricEigen::new(ata).eigenvalues;
    ev.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt()
}
