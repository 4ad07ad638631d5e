//! The extremum-seeking loops.
//!
//! Both variants share the input law `θ(j) = θ̂(j) + α(j) S(j)` (with
//! `θ(j) = θ(0)` while `j ≤ D_M`) and the delayed measurement channel.
//! The unbiased loop divides the demodulated innovation `y − η` by the
//! decaying gain and high-pass filters the measurement; the classical loop
//! fixes `α ≡ 1`, `η ≡ 0`.
//!
//! Runs are streamed through an [`Observer`]; [`run`] collects a decimated
//! [`Trajectory`], while searches plug in their own statistics observers so
//! long horizons never need per-step storage.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dither::{rho_all, DitherConfig, DitherError, GainSchedule, GainTracker, GAIN_FLOOR};
use crate::plant::{measure, DelayModel, DelaySampler, InputRing, PlantError, QuadraticMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Plant(#[from] PlantError),
    #[error(transparent)]
    Dither(#[from] DitherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Unbiased,
    Classical,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Unbiased => "unbiased",
            Variant::Classical => "classical",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsParams {
    pub k: f64,
    pub omega_h: f64,
    pub variant: Variant,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsRunConfig {
    pub map: QuadraticMap,
    pub delay: DelayModel,
    pub dither: DitherConfig,
    /// Ignored by the classical variant, which uses `α ≡ 1`.
    pub gain: GainSchedule,
    pub params: EsParams,
    pub theta0: Vec<f64>,
    /// Initial filter value `Q₀`; held on `[0, D_M]`.
    pub q0: f64,
    pub horizon: u64,
    pub decimation: u64,
}

/// Initial condition used for the 3-D example runs.
pub const EXAMPLE_THETA0: [f64; 3] = [1.3, 3.5, 0.5];

/// Default decimation: full rate up to 10⁶ steps, every 1000th beyond.
pub fn default_decimation(horizon: u64) -> u64 {
    if horizon > 1_000_000 {
        1000
    } else {
        1
    }
}

impl EsRunConfig {
    /// The 3-D example with `aᵢ = 0.1`, `k = 0.005`, `λ = 0.005`,
    /// `ω_h = 0.015`, `α₀ = 1` and `θ(0) = (1.3, 3.5, 0.5)`.
    pub fn example_3d(variant: Variant, delay: DelayModel, epsilon: f64, horizon: u64) -> Self {
        let d_max = delay.d_max();
        Self {
            map: QuadraticMap::example_3d(),
            delay,
            dither: DitherConfig::new(vec![0.1; 3], epsilon, d_max).expect("valid example dither"),
            gain: GainSchedule::new(1.0, 0.005, epsilon).expect("valid example gain"),
            params: EsParams { k: 0.005, omega_h: 0.015, variant },
            theta0: EXAMPLE_THETA0.to_vec(),
            q0: 0.0,
            horizon,
            decimation: default_decimation(horizon),
        }
    }

    /// Same configuration with a different `ε` (period and gain rebuilt).
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, EstimatorError> {
        let mut out = self.clone();
        out.dither = DitherConfig::new(self.dither.amplitudes().to_vec(), epsilon, self.delay.d_max())?;
        out.gain = GainSchedule::new(self.gain.alpha0(), self.gain.lambda(), epsilon)?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), EstimatorError> {
        let n = self.map.dim();
        let bad = |m: String| Err(EstimatorError::Config(m));
        if self.dither.dim() != n {
            return bad(format!("dither dimension {} != map dimension {n}", self.dither.dim()));
        }
        if self.theta0.len() != n {
            return bad(format!("theta0 dimension {} != map dimension {n}", self.theta0.len()));
        }
        if self.dither.d_max() != self.delay.d_max() {
            return bad("dither and delay model disagree on d_max".into());
        }
        if self.gain.epsilon() != self.dither.epsilon() {
            return bad("gain schedule and dither disagree on epsilon".into());
        }
        if !(self.params.k >= 0.0 && self.params.k.is_finite()) {
            return bad("k must be nonnegative".into());
        }
        if !(self.params.omega_h >= 0.0 && self.params.omega_h.is_finite()) {
            return bad("omega_h must be nonnegative".into());
        }
        if self.decimation == 0 {
            return bad("decimation must be at least 1".into());
        }
        if self.theta0.iter().any(|v| !v.is_finite()) || !self.q0.is_finite() {
            return bad("theta0 and q0 must be finite".into());
        }
        Ok(())
    }

    /// `|θ(0) − θ*|`.
    pub fn initial_error(&self) -> f64 {
        dist(&self.theta0, self.map.theta_star())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Everything observable at step `j`, before the update to `j+1`.
#[derive(Debug, Clone, Copy)]
pub struct StepView<'a> {
    pub j: u64,
    pub theta_hat: &'a [f64],
    pub theta: &'a [f64],
    pub y: f64,
    pub eta: f64,
    pub alpha: f64,
    pub err: f64,
}

pub trait Observer {
    fn observe(&mut self, step: &StepView<'_>);
}

impl<F: FnMut(&StepView<'_>)> Observer for F {
    fn observe(&mut self, step: &StepView<'_>) {
        self(step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    /// `α(j)` fell below the representable floor; the run stopped at `step`.
    PrecisionFloor { step: u64 },
    /// The estimate left the finite range at `step`.
    Diverged { step: u64 },
}

/// Unbiased update: the bracket `ε k (y − η)` first, the quotient by `α` last.
pub fn unbiased_update(
    theta_hat: &mut [f64],
    eta: &mut f64,
    demod: &[f64],
    y: f64,
    alpha: f64,
    epsilon: f64,
    k: f64,
    omega_h: f64,
) {
    let innovation = y - *eta;
    if innovation == 0.0 {
        return;
    }
    let bracket = epsilon * k * innovation;
    for (t, m) in theta_hat.iter_mut().zip(demod) {
        *t -= bracket * m / alpha;
    }
    *eta += epsilon * omega_h * innovation;
}

/// Classical update `θ̂⁺ = θ̂ − ε k M y`.
pub fn classical_update(theta_hat: &mut [f64], demod: &[f64], y: f64, epsilon: f64, k: f64) {
    let scale = epsilon * k * y;
    for (t, m) in theta_hat.iter_mut().zip(demod) {
        *t -= scale * m;
    }
}

/// Mutable state of one run. Single-threaded; owns its RNG.
pub struct EsState<'c> {
    cfg: &'c EsRunConfig,
    j: u64,
    theta_hat: Vec<f64>,
    theta: Vec<f64>,
    eta: f64,
    gain: GainTracker,
    sampler: DelaySampler<'c>,
    ring: InputRing,
    sines: Vec<f64>,
    demod: Vec<f64>,
    inv_amp: Vec<f64>,
}

/// Outcome of advancing one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepOutcome {
    Advanced,
    Stopped(RunStatus),
}

impl<'c> EsState<'c> {
    pub fn new(cfg: &'c EsRunConfig) -> Result<Self, EstimatorError> {
        cfg.validate()?;
        let n = cfg.map.dim();
        Ok(Self {
            cfg,
            j: 0,
            theta_hat: cfg.theta0.clone(),
            theta: cfg.theta0.clone(),
            eta: cfg.q0,
            gain: cfg.gain.tracker(),
            sampler: cfg.delay.sampler(),
            ring: InputRing::new(n, cfg.delay.d_max()),
            sines: vec![0.0; n],
            demod: vec![0.0; n],
            inv_amp: cfg.dither.amplitudes().iter().map(|a| 1.0 / a).collect(),
        })
    }

    pub fn step_index(&self) -> u64 {
        self.j
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Apply the input for step `j`, measure, report to `obs`, update to `j+1`.
    pub fn step(&mut self, obs: &mut impl Observer) -> Result<StepOutcome, EstimatorError> {
        let cfg = self.cfg;
        let j = self.j;
        let d_max = cfg.delay.d_max();
        let unbiased = cfg.params.variant == Variant::Unbiased;
        let alpha = if unbiased { self.gain.value() } else { 1.0 };
        if unbiased && cfg.gain.alpha0() > 0.0 && alpha.abs() < GAIN_FLOOR {
            return Ok(StepOutcome::Stopped(RunStatus::PrecisionFloor { step: j }));
        }

        cfg.dither.fill_sines(j, &mut self.sines);
        if j <= d_max as u64 {
            self.theta.copy_from_slice(&cfg.theta0);
        } else {
            let amps = cfg.dither.amplitudes();
            for i in 0..self.theta.len() {
                self.theta[i] = self.theta_hat[i] + alpha * amps[i] * self.sines[i];
            }
        }
        self.ring.push(j, &self.theta);

        let y = if j >= d_max as u64 {
            let delay = self.sampler.sample(j)?;
            measure(&cfg.map, &self.ring, j, delay, d_max)
        } else {
            0.0
        };
        let eta = if unbiased { self.eta } else { 0.0 };
        let err = dist(&self.theta_hat, cfg.map.theta_star());
        obs.observe(&StepView { j, theta_hat: &self.theta_hat, theta: &self.theta, y, eta, alpha, err });

        if j >= d_max as u64 {
            for i in 0..self.demod.len() {
                self.demod[i] = 2.0 * self.inv_amp[i] * self.sines[i];
            }
            let eps = cfg.dither.epsilon();
            if unbiased {
                unbiased_update(&mut self.theta_hat, &mut self.eta, &self.demod, y, alpha, eps, cfg.params.k, cfg.params.omega_h);
            } else {
                classical_update(&mut self.theta_hat, &self.demod, y, eps, cfg.params.k);
            }
        }
        self.j += 1;
        self.gain.advance();
        if self.theta_hat.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            return Ok(StepOutcome::Stopped(RunStatus::Diverged { step: self.j }));
        }
        Ok(StepOutcome::Advanced)
    }
}

/// Drive a run through `obs` for `cfg.horizon` steps.
pub fn run_observed(cfg: &EsRunConfig, obs: &mut impl Observer) -> Result<RunStatus, EstimatorError> {
    let mut state = EsState::new(cfg)?;
    while state.step_index() < cfg.horizon {
        if let StepOutcome::Stopped(status) = state.step(obs)? {
            return Ok(status);
        }
    }
    Ok(RunStatus::Completed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub j: u64,
    pub theta_hat: Vec<f64>,
    pub theta: Vec<f64>,
    pub y: f64,
    pub eta: f64,
    pub alpha: f64,
    pub err: f64,
    /// Largest per-step `err` over `[j, j + decimation)`.
    pub window_err_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub decimation: u64,
    pub records: Vec<Record>,
    pub status: RunStatus,
}

impl Trajectory {
    pub fn max_err(&self) -> f64 {
        self.records.iter().map(|r| r.window_err_max).fold(0.0, f64::max)
    }
}

/// Observer that keeps every `decimation`-th step plus per-window maxima.
pub struct TrajectorySink {
    decimation: u64,
    records: Vec<Record>,
}

impl TrajectorySink {
    pub fn new(decimation: u64) -> Self {
        Self { decimation: decimation.max(1), records: Vec::new() }
    }

    pub fn finish(self, dim: usize, status: RunStatus) -> Trajectory {
        Trajectory { dim, decimation: self.decimation, records: self.records, status }
    }
}

impl Observer for TrajectorySink {
    fn observe(&mut self, s: &StepView<'_>) {
        if s.j % self.decimation == 0 {
            self.records.push(Record {
                j: s.j,
                theta_hat: s.theta_hat.to_vec(),
                theta: s.theta.to_vec(),
                y: s.y,
                eta: s.eta,
                alpha: s.alpha,
                err: s.err,
                window_err_max: s.err,
            });
        } else if let Some(last) = self.records.last_mut() {
            last.window_err_max = last.window_err_max.max(s.err);
        }
    }
}

/// Run and collect a decimated trajectory. Deterministic given the config
/// (including the delay seed).
pub fn run(cfg: &EsRunConfig) -> Result<Trajectory, EstimatorError> {
    let mut sink = TrajectorySink::new(cfg.decimation);
    let status = run_observed(cfg, &mut sink)?;
    Ok(sink.finish(cfg.map.dim(), status))
}

/// Simulate the loop directly in error coordinates `θ̃ = θ̂ − θ*`,
/// `η̃ = η − Q*`, with the measurement deviation `y − Q*` formed as
/// `½|θ̃(j−D) + α(j−D)S(j−D)|²_H`.
///
/// Records carry error coordinates: `theta_hat` holds `θ̃`, `theta` holds
/// `θ − θ*`, `y` holds `y − Q*`, `eta` holds `η̃`.
pub fn run_error_system(cfg: &EsRunConfig) -> Result<Trajectory, EstimatorError> {
    cfg.validate()?;
    let map = &cfg.map;
    let n = map.dim();
    let d_max = cfg.delay.d_max() as u64;
    let q_star = map.q_star();
    let eps = cfg.dither.epsilon();
    let k = cfg.params.k;
    let unbiased = cfg.params.variant == Variant::Unbiased;
    let initial: Vec<f64> = cfg.theta0.iter().zip(map.theta_star()).map(|(a, b)| a - b).collect();

    let mut sampler = cfg.delay.sampler();
    // input errors θ(i) − θ*, kept for the delay window
    let mut inputs: std::collections::VecDeque<Vec<f64>> = std::collections::VecDeque::new();
    let mut theta_tilde = initial.clone();
    let mut eta_tilde = if unbiased { cfg.q0 - q_star } else { -q_star };
    let mut sink = TrajectorySink::new(cfg.decimation);
    let mut status = RunStatus::Completed;

    for j in 0..cfg.horizon {
        let alpha = if unbiased { cfg.gain.exact(j) } else { 1.0 };
        if unbiased && cfg.gain.alpha0() > 0.0 && alpha.abs() < GAIN_FLOOR {
            status = RunStatus::PrecisionFloor { step: j };
            break;
        }
        let s = cfg.dither.dither_vec(j);
        let m = cfg.dither.demod_vec(j);
        let input: Vec<f64> = if j <= d_max {
            initial.clone()
        } else {
            theta_tilde.iter().zip(&s).map(|(t, si)| t + alpha * si).collect()
        };
        inputs.push_back(input.clone());
        if inputs.len() > d_max as usize + 1 {
            inputs.pop_front();
        }
        let y_dev = if j >= d_max {
            let d = sampler.sample(j)? as u64;
            let delayed = &inputs[inputs.len() - 1 - d as usize];
            0.5 * map.quad_form(delayed)
        } else {
            -q_star
        };
        sink.observe(&StepView {
            j,
            theta_hat: &theta_tilde,
            theta: &input,
            y: y_dev,
            eta: eta_tilde,
            alpha,
            err: theta_tilde.iter().map(|v| v * v).sum::<f64>().sqrt(),
        });
        if j >= d_max {
            if unbiased {
                // current-input quadratic term, added and removed as in the
                // split form of the error dynamics
                let cur: Vec<f64> = theta_tilde.iter().zip(&s).map(|(t, si)| t + alpha * si).collect();
                let half_cur = 0.5 * map.quad_form(&cur);
                let first = y_dev - half_cur;
                let second = half_cur - eta_tilde;
                for i in 0..n {
                    if first == 0.0 && second == 0.0 {
                        break;
                    }
                    let g = eps * k * m[i] / alpha;
                    theta_tilde[i] = theta_tilde[i] - g * first - g * second;
                }
                eta_tilde -= eps * cfg.params.omega_h * (eta_tilde - y_dev);
            } else {
                let bracket = q_star + y_dev;
                for i in 0..n {
                    theta_tilde[i] -= eps * k * m[i] * bracket;
                }
            }
        }
        if theta_tilde.iter().any(|v| !v.is_finite() || v.abs() > 1e150) {
            status = RunStatus::Diverged { step: j + 1 };
            break;
        }
    }
    Ok(sink.finish(n, status))
}

/// Per-step transform diagnostics: `G(j)` and `z(j) = θ̃(j) − G(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformPoint {
    pub j: u64,
    pub g: Vec<f64>,
    pub z: Vec<f64>,
    pub g_norm: f64,
}

/// Evaluate `G(j) = ρ₁θ̃ + ρ₂α⁻¹η̃ + ρ₃α + ρ₄α⁻¹|θ̃|²_H` (zero before `D_M`)
/// at every record of a trajectory produced by [`run`]. Each point costs
/// O(T); pass a decimated trajectory.
pub fn transform_diagnostics(traj: &Trajectory, cfg: &EsRunConfig, map: &QuadraticMap) -> Vec<TransformPoint> {
    let n = map.dim();
    let d_max = cfg.delay.d_max() as u64;
    traj.records
        .iter()
        .map(|r| {
            let theta_tilde: Vec<f64> = r.theta_hat.iter().zip(map.theta_star()).map(|(a, b)| a - b).collect();
            let g = if r.j < d_max {
                vec![0.0; n]
            } else {
                let rho = rho_all(&cfg.dither, cfg.params.k, map.hessian(), r.j);
                let eta_tilde = r.eta - map.q_star();
                let tt = nalgebra::DVector::from_column_slice(&theta_tilde);
                let quad = map.quad_form(&theta_tilde);
                let g = &rho.rho1 * &tt + (eta_tilde / r.alpha) * &rho.rho2 + r.alpha * &rho.rho3 + (quad / r.alpha) * &rho.rho4;
                g.iter().copied().collect()
            };
            let z = theta_tilde.iter().zip(&g).map(|(t, gi)| t - gi).collect();
            let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            TransformPoint { j: r.j, g, z, g_norm }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n1_config(variant: Variant, d_max: usize) -> EsRunConfig {
        let map = QuadraticMap::new(vec![1.0], 0.5, nalgebra::DMatrix::from_element(1, 1, 2.0)).unwrap();
        EsRunConfig {
            map,
            delay: DelayModel::constant(d_max),
            dither: DitherConfig::new(vec![1.0], 0.01, d_max).unwrap(),
            gain: GainSchedule::new(1.0, 0.0, 0.01).unwrap(),
            params: EsParams { k: 0.01, omega_h: 0.5, variant },
            theta0: vec![0.0],
            q0: 0.0,
            horizon: 50,
            decimation: 1,
        }
    }

    #[test]
    fn no_innovation_no_motion() {
        let mut th = vec![1.0, -2.0];
        let mut eta = 3.0;
        unbiased_update(&mut th, &mut eta, &[0.7, -0.4], 3.0, 0.5, 0.1, 2.0, 1.0);
        assert_eq!(th, vec![1.0, -2.0]);
        assert_eq!(eta, 3.0);
        classical_update(&mut th, &[0.7, -0.4], 0.0, 0.1, 2.0);
        assert_eq!(th, vec![1.0, -2.0]);
        classical_update(&mut th, &[0.0, 0.0], 5.0, 0.1, 2.0);
        assert_eq!(th, vec![1.0, -2.0]);
    }

    #[test]
    fn single_step_hand_cases() {
        // n = 1, H = 2, θ* = 1, Q* = 0.5, k = 0.01, ε = 0.01, α = 1, D_M = 0,
        // a = 1, ω_h = 0.5 ⇒ T = 3, ω = 2π/3.
        // Step 0: θ(0) = 0, y = 0.5 + ½·2·1 = 1.5, η = 0, M(0) = 0 ⇒ θ̂ stays 0,
        //         η(1) = 0 + 0.01·0.5·1.5 = 0.0075.
        // Step 1: S(1) = sin(2π/3) = √3/2, θ(1) = √3/2,
        //         y = 0.5 + (√3/2 − 1)² = 0.5 + 0.0179491924311227…,
        //         θ̂(2) = −0.01·0.01·√3·(y − 0.0075).
        let cfg = n1_config(Variant::Unbiased, 0);
        let mut st = EsState::new(&cfg).unwrap();
        let mut seen = Vec::new();
        let mut obs = |s: &StepView<'_>| seen.push((s.j, s.y, s.eta, s.theta[0]));
        st.step(&mut obs).unwrap();
        assert_eq!(st.theta_hat(), &[0.0]);
        assert!((st.eta() - 0.0075).abs() < 1e-15);
        st.step(&mut obs).unwrap();
        let r3 = 3f64.sqrt();
        let y1 = 0.5 + (r3 / 2.0 - 1.0).powi(2);
        assert!((seen[1].1 - y1).abs() < 1e-15);
        let expected = -1e-4 * r3 * (y1 - 0.0075);
        assert!((st.theta_hat()[0] - expected).abs() < 1e-17);

        // classical: same first steps but η ≡ 0
        let cfg = n1_config(Variant::Classical, 0);
        let mut st = EsState::new(&cfg).unwrap();
        let mut noop = |_: &StepView<'_>| {};
        st.step(&mut noop).unwrap();
        st.step(&mut noop).unwrap();
        let expected = -1e-4 * r3 * y1;
        assert!((st.theta_hat()[0] - expected).abs() < 1e-17);
    }

    #[test]
    fn frozen_before_delay_bound() {
        let mut cfg = n1_config(Variant::Unbiased, 4);
        cfg.horizon = 4;
        let traj = run(&cfg).unwrap();
        assert_eq!(traj.records.len(), 4);
        for r in &traj.records {
            assert_eq!(r.y, 0.0);
            assert_eq!(r.theta_hat, vec![0.0]);
            assert_eq!(r.theta, vec![0.0]);
        }
        cfg.horizon = 8;
        let traj = run(&cfg).unwrap();
        // θ(j) = θ(0) for j ≤ D_M, θ̂ frozen through j = D_M
        assert_eq!(traj.records[4].theta, vec![0.0]);
        assert_eq!(traj.records[4].theta_hat, vec![0.0]);
        assert_eq!(traj.records[4].eta, 0.0);
    }

    #[test]
    fn zero_horizon_is_empty() {
        let mut cfg = n1_config(Variant::Classical, 0);
        cfg.horizon = 0;
        let traj = run(&cfg).unwrap();
        assert!(traj.records.is_empty());
        assert_eq!(traj.status, RunStatus::Completed);
    }

    #[test]
    fn precision_floor_status() {
        let mut cfg = n1_config(Variant::Unbiased, 0);
        cfg.gain = GainSchedule::new(1.0, 50.0, 0.01).unwrap();
        cfg.params.k = 0.0;
        cfg.horizon = 10_000;
        let traj = run(&cfg).unwrap();
        assert!(matches!(traj.status, RunStatus::PrecisionFloor { .. }));
    }

    #[test]
    fn fixed_point_of_error_system() {
        let mut cfg = n1_config(Variant::Unbiased, 2);
        cfg.theta0 = vec![1.0];
        cfg.q0 = 0.5;
        cfg.gain = GainSchedule::new(0.0, 0.0, 0.01).unwrap();
        let traj = run_error_system(&cfg).unwrap();
        assert_eq!(traj.status, RunStatus::Completed);
        assert_eq!(traj.records.len(), 50);
        for r in &traj.records {
            assert_eq!(r.theta_hat[0], 0.0);
            assert_eq!(r.eta, 0.0);
        }
    }

    #[test]
    fn window_maxima_cover_skipped_steps() {
        let cfg = EsRunConfig { decimation: 100, ..EsRunConfig::example_3d(Variant::Classical, DelayModel::constant(5), 1e-3, 2000) };
        let full = run(&EsRunConfig { decimation: 1, ..cfg.clone() }).unwrap();
        let dec = run(&cfg).unwrap();
        assert_eq!(dec.records.len(), 20);
        for r in &dec.records {
            let m = full.records[r.j as usize..(r.j + 100) as usize].iter().map(|x| x.err).fold(0.0, f64::max);
            assert_eq!(r.window_err_max, m);
        }
    }
}
