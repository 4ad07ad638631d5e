//! Maximal step-size searches.
//!
//! The theorem search bisects `ε*` in log space against a stability
//! predicate for every σ on a grid and keeps the best pair. The simulation
//! search runs the loop itself and asks a [`ConvergenceCriterion`] whether
//! it converged within the horizon.
//!
//! With the `parallel` feature the σ grid and the simulation seeds are
//! spread over a rayon pool; [`Execution::Sequential`] forces one thread.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bounds::{self, BoundChain, BoundInputs, ConditionMargin, PredicateOptions};
use crate::estimator::{run_observed, EsRunConfig, EstimatorError, Observer, RunStatus, StepView, Variant};
use crate::plant::DelayModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SearchError {
    #[error("invalid search configuration: {0}")]
    Config(String),
    #[error("infeasible in bracket: tightest condition {condition} (margin {margin:e})")]
    InfeasibleInBracket { condition: String, margin: f64 },
    #[error("bracket too high: criterion fails down to epsilon = {lo:e} ({reason})")]
    BracketTooHigh { lo: f64, reason: String },
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SigmaGrid {
    /// Exclusive lower end.
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl SigmaGrid {
    /// `steps` points on `(min, max]`.
    pub fn points(&self) -> Vec<f64> {
        let h = (self.max - self.min) / self.steps as f64;
        (1..=self.steps).map(|i| if i == self.steps { self.max } else { self.min + h * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonBracket {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMode {
    UnbiasedExponential,
    ClassicalPractical,
}

/// Pass rule for one simulated run.
///
/// Unbiased: the largest error over the tail must fall below
/// `fail_ratio · err(D_M)` and the per-window maxima over `[D_M, horizon)`
/// must not increase. Classical: the error must stay below `sigma` for the
/// whole run and the tail maximum must lie within `radius_slack` times the
/// ultimate-bound radius at the simulated `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCriterion {
    pub mode: CriterionMode,
    #[serde(default = "defaults::tail_fraction")]
    pub tail_fraction: f64,
    #[serde(default = "defaults::fail_ratio")]
    pub fail_ratio: f64,
    #[serde(default = "defaults::envelope_windows")]
    pub envelope_windows: usize,
    #[serde(default = "defaults::sigma")]
    pub sigma: f64,
    #[serde(default = "defaults::radius_slack")]
    pub radius_slack: f64,
}

mod defaults {
    pub fn tail_fraction() -> f64 {
        0.1
    }
    pub fn fail_ratio() -> f64 {
        1e-2
    }
    pub fn envelope_windows() -> usize {
        10
    }
    pub fn sigma() -> f64 {
        1.6
    }
    pub fn radius_slack() -> f64 {
        2.0
    }
}

impl ConvergenceCriterion {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            mode: match variant {
                Variant::Unbiased => CriterionMode::UnbiasedExponential,
                Variant::Classical => CriterionMode::ClassicalPractical,
            },
            tail_fraction: defaults::tail_fraction(),
            fail_ratio: defaults::fail_ratio(),
            envelope_windows: defaults::envelope_windows(),
            sigma: defaults::sigma(),
            radius_slack: defaults::radius_slack(),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let ok = self.tail_fraction > 0.0
            && self.tail_fraction <= 1.0
            && self.fail_ratio > 0.0
            && self.envelope_windows >= 1
            && self.sigma > 0.0
            && self.radius_slack > 0.0;
        if ok {
            Ok(())
        } else {
            Err(SearchError::Config("criterion thresholds must be positive and tail_fraction in (0, 1]".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    pub sigma_grid: SigmaGrid,
    pub epsilon_bracket: EpsilonBracket,
    #[serde(default = "SearchConfig::default_tol")]
    pub bisection_tol: f64,
    #[serde(default = "SearchConfig::default_max_steps")]
    pub max_bisection_steps: usize,
    /// Strict conditions must hold by more than this.
    #[serde(default)]
    pub strict_margin: f64,
    #[serde(default = "SearchConfig::default_horizon")]
    pub sim_horizon: u64,
    #[serde(default = "SearchConfig::default_seeds")]
    pub sim_seeds: Vec<u64>,
    /// Log-grid density of the downward simulation scan.
    #[serde(default = "SearchConfig::default_scan_density")]
    pub sim_scan_per_decade: usize,
    pub sim_criterion: ConvergenceCriterion,
}

impl SearchConfig {
    fn default_tol() -> f64 {
        0.05
    }
    fn default_max_steps() -> usize {
        40
    }
    fn default_horizon() -> u64 {
        2_000_000
    }
    fn default_seeds() -> Vec<u64> {
        vec![1, 2, 3]
    }
    fn default_scan_density() -> usize {
        4
    }

    /// σ on 30 points of `(σ₀, 2σ₀]`, `ε*` in `[1e−16, 1e−1]`.
    pub fn defaults(sigma0: f64, variant: Variant) -> Self {
        Self {
            sigma_grid: SigmaGrid { min: sigma0, max: 2.0 * sigma0, steps: 30 },
            epsilon_bracket: EpsilonBracket { lo: 1e-16, hi: 1e-1 },
            bisection_tol: Self::default_tol(),
            max_bisection_steps: Self::default_max_steps(),
            strict_margin: 0.0,
            sim_horizon: Self::default_horizon(),
            sim_seeds: Self::default_seeds(),
            sim_scan_per_decade: Self::default_scan_density(),
            sim_criterion: ConvergenceCriterion::for_variant(variant),
        }
    }

    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.into()));
        let b = self.epsilon_bracket;
        if !(b.lo > 0.0 && b.lo < b.hi && b.hi.is_finite()) {
            return bad("epsilon_bracket needs 0 < lo < hi");
        }
        if self.sigma_grid.steps == 0 || !(self.sigma_grid.max > self.sigma_grid.min) {
            return bad("sigma_grid needs steps >= 1 and max > min");
        }
        if !(self.bisection_tol > 0.0 && self.bisection_tol < 0.5) {
            return bad("bisection_tol must lie in (0, 0.5)");
        }
        if self.max_bisection_steps == 0 || self.sim_scan_per_decade == 0 {
            return bad("max_bisection_steps and sim_scan_per_decade must be positive");
        }
        self.sim_criterion.validate()
    }

    fn opts(&self) -> PredicateOptions {
        PredicateOptions { strict_margin: self.strict_margin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Theorem,
    Simulation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Theorem => "theorem",
            Method::Simulation => "simulation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Parallel,
    Sequential,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evidence that `ε*` is maximal: predicate values at `ε*(1 + i·tol)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Maximality {
    pub probes: Vec<(f64, bool)>,
    pub certified: bool,
    /// The log-grid fallback scan was needed.
    pub fallback_scan: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport {
    pub variant: Variant,
    pub d_max: usize,
    pub method: Method,
    pub sigma: f64,
    pub epsilon_star: f64,
    pub decay_rate: f64,
    pub margins: Vec<ConditionMargin>,
    pub chain: Option<BoundChain>,
    pub maximality: Maximality,
    pub note: Option<String>,
}

/// `1 − ε*λ` (unbiased) or `1 − ε*kH_m` (classical).
pub fn decay_rate(variant: Variant, epsilon: f64, k: f64, lambda: f64, h_min: f64) -> f64 {
    match variant {
        Variant::Unbiased => 1.0 - epsilon * lambda,
        Variant::Classical => 1.0 - epsilon * k * h_min,
    }
}

/// Largest `ε` in the bracket for which `pred` holds, assuming `pred` is
/// monotone; `None` if `pred(lo)` fails. Stops once `hi/lo ≤ 1 + width`
/// or after `max_steps`.
fn log_bisect(pred: &dyn Fn(f64) -> bool, lo: f64, hi: f64, width: f64, max_steps: usize) -> Option<f64> {
    if !pred(lo) {
        return None;
    }
    if pred(hi) {
        return Some(hi);
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    let target = width.ln_1p();
    for _ in 0..max_steps {
        if b - a <= target {
            break;
        }
        let m = 0.5 * (a + b);
        if pred(m.exp()) {
            a = m;
        } else {
            b = m;
        }
    }
    Some(a.exp())
}

fn probe(pred: &dyn Fn(f64) -> bool, eps: f64, tol: f64, hi: f64) -> Vec<(f64, bool)> {
    (1..=3).map(|i| eps * (1.0 + tol * i as f64)).filter(|e| *e <= hi).map(|e| (e, pred(e))).collect()
}

/// Bisection, 3-point probing above the result, and a 200-point log scan
/// if a probe passes. The bracket is narrowed to a thousandth of `tol` so
/// that σ grid points are ranked on resolved values, not on
/// tolerance-sized steps.
fn max_epsilon_1d(pred: &dyn Fn(f64) -> bool, bracket: EpsilonBracket, tol: f64, max_steps: usize) -> Option<(f64, Maximality)> {
    let width = 1e-3 * tol;
    let first = log_bisect(pred, bracket.lo, bracket.hi, width, max_steps);
    if let Some(eps) = first {
        let probes = probe(pred, eps, tol, bracket.hi);
        if probes.iter().all(|(_, ok)| !ok) {
            return Some((eps, Maximality { probes, certified: true, fallback_scan: false }));
        }
    }
    // fallback: largest passing point on a 200-point log grid, refined
    // against its upper neighbour
    let (la, lb) = (bracket.lo.ln(), bracket.hi.ln());
    let grid: Vec<f64> = (0..200).map(|i| (la + (lb - la) * i as f64 / 199.0).exp()).collect();
    let top = (0..grid.len()).rev().find(|&i| pred(grid[i]))?;
    let eps = if top + 1 < grid.len() { log_bisect(pred, grid[top], grid[top + 1], width, max_steps).unwrap_or(grid[top]) } else { grid[top] };
    let probes = probe(pred, eps, tol, bracket.hi);
    let certified = probes.iter().all(|(_, ok)| !ok);
    Some((eps, Maximality { probes, certified, fallback_scan: true }))
}

fn map_grid<T: Send, F: Fn(f64) -> T + Sync + Send>(grid: &[f64], exec: Execution, f: F) -> Vec<T> {
    #[cfg(feature = "parallel")]
    if exec == Execution::Parallel {
        use rayon::prelude::*;
        return grid.par_iter().map(|&s| f(s)).collect();
    }
    let _ = exec;
    grid.iter().map(|&s| f(s)).collect()
}

/// Best `(σ, ε*)` over the σ grid under the stability predicate of
/// `inputs.variant` (the delay-free conditions when `D_M = 0`).
pub fn max_epsilon_theorem(inputs: &BoundInputs, search: &SearchConfig) -> Result<FeasibilityReport, SearchError> {
    max_epsilon_theorem_with(inputs, search, Execution::default())
}

pub fn max_epsilon_theorem_with(inputs: &BoundInputs, search: &SearchConfig, exec: Execution) -> Result<FeasibilityReport, SearchError> {
    search.validate()?;
    let opts = search.opts();
    let grid = search.sigma_grid.points();
    let per_sigma = map_grid(&grid, exec, |sigma| {
        let pred = |eps: f64| bounds::feasible(&inputs.with(eps, sigma), opts).feasible;
        max_epsilon_1d(&pred, search.epsilon_bracket, search.bisection_tol, search.max_bisection_steps).map(|(eps, m)| (sigma, eps, m))
    });

    // ties resolved toward the smaller σ
    let best = per_sigma.into_iter().flatten().fold(None::<(f64, f64, Maximality)>, |acc, cur| match acc {
        Some(a) if a.1 >= cur.1 => Some(a),
        _ => Some(cur),
    });
    let Some((sigma, eps, maximality)) = best else {
        let mid = grid[grid.len() / 2];
        let verdict = bounds::feasible(&inputs.with(search.epsilon_bracket.lo, mid), opts);
        let (condition, margin) = match verdict.tightest() {
            Some(m) if verdict.reason.as_deref().is_none_or(|r| r.starts_with("condition")) => (m.name.clone(), m.margin),
            _ => (verdict.reason.unwrap_or_else(|| "unknown".into()), f64::NAN),
        };
        return Err(SearchError::InfeasibleInBracket { condition, margin });
    };
    let verdict = bounds::feasible(&inputs.with(eps, sigma), opts);
    Ok(FeasibilityReport {
        variant: inputs.variant,
        d_max: inputs.d_max,
        method: Method::Theorem,
        sigma,
        epsilon_star: eps,
        decay_rate: decay_rate(inputs.variant, eps, inputs.k, inputs.lambda, inputs.uncertainty.h_min),
        margins: verdict.margins,
        chain: verdict.chain,
        maximality,
        note: None,
    })
}

/// Streaming statistics for the convergence criterion.
#[derive(Debug, Clone)]
pub struct CriterionStats {
    d_max: u64,
    horizon: u64,
    tail_start: u64,
    window_len: u64,
    pub err_at_d_max: f64,
    pub max_err: f64,
    pub tail_max: f64,
    pub window_max: Vec<f64>,
}

impl CriterionStats {
    pub fn new(criterion: &ConvergenceCriterion, d_max: u64, horizon: u64) -> Self {
        let span = horizon.saturating_sub(d_max).max(1);
        let windows = criterion.envelope_windows as u64;
        let tail_len = ((horizon as f64) * criterion.tail_fraction).ceil() as u64;
        Self {
            d_max,
            horizon,
            tail_start: horizon.saturating_sub(tail_len.max(1)),
            window_len: span.div_ceil(windows).max(1),
            err_at_d_max: f64::NAN,
            max_err: 0.0,
            tail_max: 0.0,
            window_max: vec![0.0; windows as usize],
        }
    }
}

impl Observer for CriterionStats {
    fn observe(&mut self, s: &StepView<'_>) {
        self.max_err = self.max_err.max(s.err);
        if s.j == self.d_max {
            self.err_at_d_max = s.err;
        }
        if s.j >= self.d_max {
            let w = ((s.j - self.d_max) / self.window_len) as usize;
            if let Some(slot) = self.window_max.get_mut(w) {
                *slot = slot.max(s.err);
            }
        }
        if s.j >= self.tail_start && s.j < self.horizon {
            self.tail_max = self.tail_max.max(s.err);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimVerdict {
    pub pass: bool,
    pub reason: String,
    pub tail_max: f64,
    pub max_err: f64,
}

/// Everything a simulation search needs besides `ε`: the run to repeat and
/// the bound inputs used for the classical radius.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTemplate {
    pub run: EsRunConfig,
    pub bounds: BoundInputs,
}

impl SimTemplate {
    /// The 3-D example with uniformly random delays on `{0, …, D_M}`.
    pub fn example_3d(variant: Variant, d_max: usize, horizon: u64) -> Self {
        let delay = if d_max == 0 { DelayModel::zero() } else { DelayModel::uniform(d_max, 1) };
        let mut run = EsRunConfig::example_3d(variant, delay, 1e-4, horizon);
        run.decimation = 1;
        Self { run, bounds: BoundInputs::example_3d(variant, d_max, 1e-4, 1.6) }
    }
}

fn judge(stats: &CriterionStats, status: RunStatus, criterion: &ConvergenceCriterion, radius: f64) -> SimVerdict {
    let verdict = |pass: bool, reason: String| SimVerdict { pass, reason, tail_max: stats.tail_max, max_err: stats.max_err };
    match status {
        RunStatus::Completed => {}
        RunStatus::Diverged { step } => return verdict(false, format!("diverged at step {step}")),
        RunStatus::PrecisionFloor { step } => return verdict(false, format!("gain reached the precision floor at step {step}")),
    }
    if stats.horizon <= stats.d_max {
        return verdict(false, "horizon does not extend past D_M".into());
    }
    match criterion.mode {
        CriterionMode::UnbiasedExponential => {
            let limit = criterion.fail_ratio * stats.err_at_d_max;
            if !(stats.tail_max < limit) {
                return verdict(
                    false,
                    format!("no convergence within horizon: tail max {:.3e} >= {:.3e} = fail_ratio * err(D_M)", stats.tail_max, limit),
                );
            }
            if let Some(w) = stats.window_max.windows(2).position(|p| p[1] > p[0]) {
                return verdict(false, format!("error envelope increases after window {w}"));
            }
            verdict(true, "converged".into())
        }
        CriterionMode::ClassicalPractical => {
            if !(stats.max_err < criterion.sigma) {
                return verdict(false, format!("error {:.3e} leaves sigma = {}", stats.max_err, criterion.sigma));
            }
            let limit = criterion.radius_slack * radius;
            if !(stats.tail_max < limit) {
                return verdict(false, format!("no convergence within horizon: tail max {:.3e} >= {:.3e} = slack * radius", stats.tail_max, limit));
            }
            verdict(true, "converged".into())
        }
    }
}

/// Simulate `template` at `epsilon` with one delay seed and judge it.
pub fn evaluate_run(template: &SimTemplate, epsilon: f64, seed: u64, horizon: u64, criterion: &ConvergenceCriterion) -> Result<SimVerdict, SearchError> {
    let mut cfg = template.run.with_epsilon(epsilon)?;
    cfg.horizon = horizon;
    cfg.delay = cfg.delay.with_seed(seed);
    let mut stats = CriterionStats::new(criterion, cfg.delay.d_max() as u64, horizon);
    let status = run_observed(&cfg, &mut stats)?;
    let radius = match criterion.mode {
        CriterionMode::ClassicalPractical => classical_radius(&template.bounds, epsilon, criterion.sigma),
        CriterionMode::UnbiasedExponential => f64::NAN,
    };
    Ok(judge(&stats, status, criterion, radius))
}

/// Ultimate-bound radius of the classical loop at `ε` with the chain also
/// evaluated at `ε`; infinite when the chain is undefined.
pub fn classical_radius(b: &BoundInputs, epsilon: f64, sigma: f64) -> f64 {
    let inputs = BoundInputs { variant: Variant::Classical, ..b.with(epsilon, sigma) };
    match bounds::chain_theorem2(&inputs) {
        Ok(chain) => bounds::ultimate_bound_radius(epsilon, &chain, &inputs),
        Err(_) => f64::INFINITY,
    }
}

/// Evaluate every seed (once for deterministic delays); pass only if all pass.
pub fn evaluate_epsilon(template: &SimTemplate, epsilon: f64, search: &SearchConfig, exec: Execution) -> Result<SimVerdict, SearchError> {
    let seeds: Vec<u64> = if template.run.delay.is_stochastic() { search.sim_seeds.clone() } else { vec![0] };
    if seeds.is_empty() {
        return Err(SearchError::Config("stochastic delay needs at least one seed".into()));
    }
    let seed_vals: Vec<f64> = seeds.iter().map(|s| *s as f64).collect();
    let verdicts = map_grid(&seed_vals, exec, |s| evaluate_run(template, epsilon, s as u64, search.sim_horizon, &search.sim_criterion));
    let mut worst: Option<SimVerdict> = None;
    for v in verdicts {
        let v = v?;
        if !v.pass {
            return Ok(v);
        }
        if worst.as_ref().is_none_or(|w| v.tail_max > w.tail_max) {
            worst = Some(v);
        }
    }
    Ok(worst.expect("at least one seed"))
}

/// Largest `ε` at which the simulated loop converges for every seed.
///
/// A fixed horizon makes very small `ε` fail as well (too slow to
/// converge), so the pass set is an interval. The search scans a log grid
/// downward from the top of the bracket, takes the first passing point and
/// bisects between it and the failing point above.
pub fn max_epsilon_simulation(template: &SimTemplate, search: &SearchConfig) -> Result<FeasibilityReport, SearchError> {
    max_epsilon_simulation_with(template, search, Execution::default())
}

pub fn max_epsilon_simulation_with(template: &SimTemplate, search: &SearchConfig, exec: Execution) -> Result<FeasibilityReport, SearchError> {
    search.validate()?;
    let b = search.epsilon_bracket;
    let decades = (b.hi / b.lo).log10();
    let points = ((decades * search.sim_scan_per_decade as f64).ceil() as usize).max(1);
    let at = |i: usize| (b.hi.ln() - (b.hi.ln() - b.lo.ln()) * i as f64 / points as f64).exp();

    let mut last_reason = String::new();
    let mut found = None;
    for i in 0..=points {
        let v = evaluate_epsilon(template, at(i), search, exec)?;
        if v.pass {
            found = Some(i);
            break;
        }
        last_reason = v.reason;
    }
    let Some(i) = found else {
        return Err(SearchError::BracketTooHigh { lo: b.lo, reason: last_reason });
    };

    let pred = |eps: f64| evaluate_epsilon(template, eps, search, exec).map(|v| v.pass).unwrap_or(false);
    let (eps, maximality) = if i == 0 {
        let probes = vec![];
        (at(0), Maximality { probes, certified: false, fallback_scan: false })
    } else {
        let eps = log_bisect(&pred, at(i), at(i - 1), search.bisection_tol, search.max_bisection_steps).unwrap_or(at(i));
        let probes = probe(&pred, eps, search.bisection_tol, b.hi);
        let certified = probes.iter().all(|(_, ok)| !ok);
        (eps, Maximality { probes, certified, fallback_scan: false })
    };
    let bi = &template.bounds;
    let note = (i == 0).then(|| "criterion passes at the top of the bracket".to_string());
    Ok(FeasibilityReport {
        variant: template.run.params.variant,
        d_max: template.run.delay.d_max(),
        method: Method::Simulation,
        sigma: search.sim_criterion.sigma,
        epsilon_star: eps,
        decay_rate: decay_rate(template.run.params.variant, eps, bi.k, bi.lambda, bi.uncertainty.h_min),
        margins: vec![],
        chain: None,
        maximality,
        note,
    })
}

/// Delay bounds of the example tables.
pub const TABLE_DELAYS: [usize; 3] = [0, 5, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub variant: Variant,
    pub d_max: usize,
    /// Absent for simulation rows.
    pub sigma: Option<f64>,
    pub epsilon_star: f64,
    pub decay_rate: f64,
    pub method: Method,
}

impl From<&FeasibilityReport> for TableRow {
    fn from(r: &FeasibilityReport) -> Self {
        Self {
            variant: r.variant,
            d_max: r.d_max,
            sigma: (r.method == Method::Theorem).then_some(r.sigma),
            epsilon_star: r.epsilon_star, decay_rate: r.decay_rate, method: r.method }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReproduceOptions {
    pub theorem: bool,
    pub simulation: bool,
    /// Skip the `D_M = 50` simulation rows.
    pub fast: bool,
}

/// Theorem and simulation rows for `D_M ∈ {0, 5, 50}`. Rows that cannot
/// be produced are returned as errors alongside the rows that can.
pub fn table_reproduce(
    variant: Variant,
    search: &SearchConfig,
    opts: ReproduceOptions,
) -> (Vec<TableRow>, Vec<(usize, Method, SearchError)>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    if opts.theorem {
        for d in TABLE_DELAYS {
            let inputs = BoundInputs::example_3d(variant, d, 1e-8, 1.5);
            match max_epsilon_theorem(&inputs, search) {
                Ok(r) => rows.push(TableRow::from(&r)),
                Err(e) => failures.push((d, Method::Theorem, e)),
            }
        }
    }
    if opts.simulation {
        for d in TABLE_DELAYS {
            if opts.fast && d == 50 {
                continue;
            }
            let template = SimTemplate::example_3d(variant, d, search.sim_horizon);
            match max_epsilon_simulation(&template, search) {
                Ok(r) => rows.push(TableRow::from(&r)),
                Err(e) => failures.push((d, Method::Simulation, e)),
            }
        }
    }
    (rows, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigma_grid_excludes_lower_end() {
        let g = SigmaGrid { min: 1.0, max: 2.0, steps: 30 }.points();
        assert_eq!(g.len(), 30);
        assert!(g[0] > 1.0);
        assert_eq!(*g.last().unwrap(), 2.0);
    }

    #[test]
    fn bisection_finds_threshold() {
        let pred = |e: f64| e <= 3.7e-9;
        let (eps, m) = max_epsilon_1d(&pred, EpsilonBracket { lo: 1e-16, hi: 1e-1 }, 0.05, 40).unwrap();
        assert!(eps <= 3.7e-9 && eps * 1.05 > 3.7e-9);
        assert!(m.certified && !m.fallback_scan);
    }

    #[test]
    fn non_monotone_predicate_falls_back_to_scan() {
        // a narrow second band that only the probe at ε(1 + 2·tol) sees
        let pred = |e: f64| e <= 1e-10 || (1.095e-10..=1.105e-10).contains(&e);
        let (eps, m) = max_epsilon_1d(&pred, EpsilonBracket { lo: 1e-16, hi: 1e-1 }, 0.05, 40).unwrap();
        assert!(m.fallback_scan);
        assert!(pred(eps));
        assert!(!m.certified);
    }

    #[test]
    fn nothing_feasible() {
        let pred = |_: f64| false;
        assert!(max_epsilon_1d(&pred, EpsilonBracket { lo: 1e-16, hi: 1e-1 }, 0.05, 40).is_none());
    }

    #[test]
    fn criterion_validation() {
        let mut c = ConvergenceCriterion::for_variant(Variant::Unbiased);
        assert!(c.validate().is_ok());
        c.fail_ratio = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn decay_rates() {
        assert_eq!(decay_rate(Variant::Unbiased, 1e-3, 0.005, 0.005, 9.5), 1.0 - 5e-6);
        assert!((decay_rate(Variant::Classical, 1e-3, 0.005, 0.005, 9.5) - (1.0 - 4.75e-5)).abs() < 1e-16);
    }
}
