//! The unknown quadratic map, its delayed measurement channel and the
//! delay generators that drive it.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("hessian must be square with side {0}")]
    NotSquare(usize),
    #[error("hessian is not symmetric (entry ({row}, {col}) differs by {diff:e})")]
    NotSymmetric { row: usize, col: usize, diff: f64 },
    #[error("hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("delay {value} exceeds bound d_max = {d_max}")]
    DelayOutOfRange { value: i64, d_max: usize },
    #[error("delay sequence exhausted at step {0}")]
    SequenceExhausted(u64),
    #[error("uncertainty bounds invalid: {0}")]
    Uncertainty(&'static str),
}

/// `Q(θ) = Q* + ½ (θ − θ*)ᵀ H (θ − θ*)` with `H > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticMap {
    theta_star: Vec<f64>,
    q_star: f64,
    hessian: DMatrix<f64>,
    // row-major copy for the hot loop
    flat: Vec<f64>,
}

impl QuadraticMap {
    pub fn new(theta_star: Vec<f64>, q_star: f64, hessian: DMatrix<f64>) -> Result<Self, PlantError> {
        let n = theta_star.len();
        if n == 0 {
            return Err(PlantError::Dimension { expected: 1, got: 0 });
        }
        if hessian.nrows() != n || hessian.ncols() != n {
            return Err(PlantError::NotSquare(n));
        }
        if !q_star.is_finite() || theta_star.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFinite("theta_star/q_star"));
        }
        if hessian.iter().any(|v| !v.is_finite()) {
            return Err(PlantError::NonFinite("hessian"));
        }
        let scale = hessian.amax().max(f64::MIN_POSITIVE);
        for r in 0..n {
            for c in (r + 1)..n {
                let diff = (hessian[(r, c)] - hessian[(c, r)]).abs();
                if diff > 1e-12 * scale {
                    return Err(PlantError::NotSymmetric { row: r, col: c, diff });
                }
            }
        }
        if hessian.clone().cholesky().is_none() {
            return Err(PlantError::NotPositiveDefinite);
        }
        let flat = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| hessian[(r, c)])
            .collect();
        Ok(Self { theta_star, q_star, hessian, flat })
    }

    /// Build from a row-major list of rows.
    pub fn from_rows(theta_star: Vec<f64>, q_star: f64, rows: &[Vec<f64>]) -> Result<Self, PlantError> {
        let n = theta_star.len();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(PlantError::NotSquare(n));
        }
        let h = DMatrix::from_fn(n, n, |r, c| rows[r][c]);
        Self::new(theta_star, q_star, h)
    }

    /// The 3-D example map: θ* = (2, 4, 1), Q* = 0.
    pub fn example_3d() -> Self {
        let h = DMatrix::from_row_slice(3, 3, &[100.0, 30.0, 5.0, 30.0, 20.0, 5.0, 5.0, 5.0, 50.0]);
        Self::new(vec![2.0, 4.0, 1.0], 0.0, h).expect("example map is valid")
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn q_star(&self) -> f64 {
        self.q_star
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn hessian_rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        (0..n).map(|r| self.flat[r * n..(r + 1) * n].to_vec()).collect()
    }

    /// Ascending eigenvalues of the Hessian.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.hessian.clone()).eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn eval(&self, theta: &[f64]) -> Result<f64, PlantError> {
        if theta.len() != self.dim() {
            return Err(PlantError::Dimension { expected: self.dim(), got: theta.len() });
        }
        Ok(self.eval_unchecked(theta))
    }

    pub(crate) fn eval_unchecked(&self, theta: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for r in 0..n {
            let er = theta[r] - self.theta_star[r];
            let mut row = 0.0;
            for c in 0..n {
                row += self.flat[r * n + c] * (theta[c] - self.theta_star[c]);
            }
            acc += er * row;
        }
        self.q_star + 0.5 * acc
    }

    /// `|e|²_H = eᵀ H e`.
    pub fn quad_form(&self, e: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for r in 0..n {
            let mut row = 0.0;
            for c in 0..n {
                row += self.flat[r * n + c] * e[c];
            }
            acc += e[r] * row;
        }
        acc
    }
}

/// Generator family for `D(j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayKind {
    Zero,
    Constant { d: usize },
    UniformRandom { seed: u64 },
    Sequence { values: Vec<i64> },
}

/// A delay generator together with its known bound `D_M`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayModel {
    kind: DelayKind,
    d_max: usize,
}

impl DelayModel {
    pub fn new(kind: DelayKind, d_max: usize) -> Result<Self, PlantError> {
        match &kind {
            DelayKind::Constant { d } if *d > d_max => {
                return Err(PlantError::DelayOutOfRange { value: *d as i64, d_max })
            }
            DelayKind::Sequence { values } => {
                if let Some(&v) = values.iter().find(|&&v| v < 0 || v as u64 > d_max as u64) {
                    return Err(PlantError::DelayOutOfRange { value: v, d_max });
                }
            }
            _ => {}
        }
        Ok(Self { kind, d_max })
    }

    pub fn zero() -> Self {
        Self { kind: DelayKind::Zero, d_max: 0 }
    }

    pub fn constant(d: usize) -> Self {
        Self { kind: DelayKind::Constant { d }, d_max: d }
    }

    pub fn uniform(d_max: usize, seed: u64) -> Self {
        Self { kind: DelayKind::UniformRandom { seed }, d_max }
    }

    pub fn kind(&self) -> &DelayKind {
        &self.kind
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn is_stochastic(&self) -> bool {
        matches!(self.kind, DelayKind::UniformRandom { .. })
    }

    /// Same model with a different seed (no-op for deterministic kinds).
    pub fn with_seed(&self, seed: u64) -> Self {
        let kind = match self.kind {
            DelayKind::UniformRandom { .. } => DelayKind::UniformRandom { seed },
            ref k => k.clone(),
        };
        Self { kind, d_max: self.d_max }
    }

    pub fn sampler(&self) -> DelaySampler<'_> {
        let rng = match self.kind {
            DelayKind::UniformRandom { seed } => Some(Xoshiro256PlusPlus::seed_from_u64(seed)),
            _ => None,
        };
        DelaySampler { model: self, rng, uniform: Uniform::new_inclusive(0, self.d_max).expect("0 <= d_max") }
    }
}

/// Per-run delay state. Owns the run's RNG; never shared between runs.
#[derive(Debug, Clone)]
pub struct DelaySampler<'a> {
    model: &'a DelayModel,
    rng: Option<Xoshiro256PlusPlus>,
    uniform: Uniform<usize>,
}

impl DelaySampler<'_> {
    /// `D(j)`. Uniform draws are inclusive over `{0, …, D_M}` and
    /// rejection-sampled, so there is no modulo bias.
    pub fn sample(&mut self, j: u64) -> Result<usize, PlantError> {
        match &self.model.kind {
            DelayKind::Zero => Ok(0),
            DelayKind::Constant { d } => Ok(*d),
            DelayKind::UniformRandom { .. } => {
                let rng = self.rng.as_mut().expect("seeded at construction");
                Ok(self.uniform.sample(rng))
            }
            DelayKind::Sequence { values } => values
                .get(j as usize)
                .map(|&v| v as usize)
                .ok_or(PlantError::SequenceExhausted(j)),
        }
    }
}

/// Ring buffer holding the last `D_M + 1` applied inputs.
#[derive(Debug, Clone)]
pub struct InputRing {
    n: usize,
    len: usize,
    data: Vec<f64>,
    // step index of the newest entry, if any
    newest: Option<u64>,
}

impl InputRing {
    pub fn new(n: usize, d_max: usize) -> Self {
        Self { n, len: d_max + 1, data: vec![0.0; n * (d_max + 1)], newest: None }
    }

    /// Store `θ(j)`. Steps must be pushed consecutively from 0.
    pub fn push(&mut self, j: u64, theta: &[f64]) {
        debug_assert_eq!(self.newest.map_or(0, |k| k + 1), j);
        let slot = (j % self.len as u64) as usize;
        self.data[slot * self.n..(slot + 1) * self.n].copy_from_slice(theta);
        self.newest = Some(j);
    }

    /// `θ(i)`; `i` must lie within the last `D_M + 1` pushed steps.
    pub fn get(&self, i: u64) -> &[f64] {
        let newest = self.newest.expect("ring is empty");
        assert!(i <= newest && newest - i < self.len as u64, "step {i} is outside the delay window");
        let slot = (i % self.len as u64) as usize;
        &self.data[slot * self.n..(slot + 1) * self.n]
    }
}

/// Delayed measurement: `0` while `j < D_M`, otherwise `Q(θ(j − D(j)))`.
pub fn measure(map: &QuadraticMap, history: &InputRing, j: u64, delay: usize, d_max: usize) -> f64 {
    if j < d_max as u64 {
        return 0.0;
    }
    assert!(delay <= d_max, "delay {delay} exceeds d_max {d_max}");
    let src = j.checked_sub(delay as u64).expect("j - D(j) < 0 with j >= D_M");
    map.eval_unchecked(history.get(src))
}

/// Prior knowledge about the map: Hessian range, initial-error radius and
/// the extremum-value interval `|Q* − Q₀| ≤ ΔQ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UncertaintyBounds {
    pub h_min: f64,
    pub h_max: f64,
    pub sigma0: f64,
    pub q0: f64,
    pub delta_q: f64,
}

impl UncertaintyBounds {
    /// Values used with the 3-D example map.
    pub fn example_3d() -> Self {
        Self { h_min: 9.5, h_max: 111.0, sigma0: 1.0, q0: 0.0, delta_q: 1.0 }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        if !(self.h_min > 0.0) {
            return Err(PlantError::Uncertainty("h_min must be positive"));
        }
        if !(self.h_min <= self.h_max) {
            return Err(PlantError::Uncertainty("h_min must not exceed h_max"));
        }
        if !(self.sigma0 > 0.0) {
            return Err(PlantError::Uncertainty("sigma0 must be positive"));
        }
        if !(self.delta_q >= 0.0) {
            return Err(PlantError::Uncertainty("delta_q must be nonnegative"));
        }
        if !self.q0.is_finite() {
            return Err(PlantError::Uncertainty("q0 must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimum_at_theta_star() {
        let map = QuadraticMap::example_3d();
        assert_eq!(map.eval(&[2.0, 4.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn unit_offset_along_first_axis() {
        let map = QuadraticMap::example_3d();
        assert_eq!(map.eval(&[3.0, 4.0, 1.0]).unwrap(), 50.0);
    }

    #[test]
    fn isotropic_case() {
        for n in 1..6 {
            let map = QuadraticMap::new(vec![0.5; n], 1.25, DMatrix::identity(n, n) * 2.0).unwrap();
            let theta = vec![1.5; n];
            assert!((map.eval(&theta).unwrap() - (1.25 + n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let map = QuadraticMap::example_3d();
        assert_eq!(map.eval(&[1.0, 2.0]), Err(PlantError::Dimension { expected: 3, got: 2 }));
    }

    #[test]
    fn rejects_bad_hessians() {
        let asym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(matches!(QuadraticMap::new(vec![0.0; 2], 0.0, asym), Err(PlantError::NotSymmetric { .. })));
        let indef = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert_eq!(QuadraticMap::new(vec![0.0; 2], 0.0, indef), Err(PlantError::NotPositiveDefinite));
    }

    #[test]
    fn example_spectrum() {
        // Full spectrum of the 3×3 example Hessian; the two extreme values
        // round to 9.749 and 110.66, the middle one is ≈ 49.59.
        let ev = QuadraticMap::example_3d().eigenvalues();
        assert_eq!(ev.len(), 3);
        assert!((ev[0] - 9.749_071_12).abs() < 1e-6);
        assert!((ev[1] - 49.590_439_39).abs() < 1e-6);
        assert!((ev[2] - 110.660_489_49).abs() < 1e-6);
        assert!((ev.iter().sum::<f64>() - 170.0).abs() < 1e-9);
    }

    #[test]
    fn deterministic_delays() {
        let zero = DelayModel::zero();
        let constant = DelayModel::constant(5);
        let mut zs = zero.sampler();
        let mut cs = constant.sampler();
        for j in 0..100 {
            assert_eq!(zs.sample(j).unwrap(), 0);
            assert_eq!(cs.sample(j).unwrap(), 5);
        }
    }

    #[test]
    fn sequence_exhaustion_and_validation() {
        let m = DelayModel::new(DelayKind::Sequence { values: vec![0, 2, 1] }, 2).unwrap();
        let mut s = m.sampler();
        assert_eq!(s.sample(1).unwrap(), 2);
        assert_eq!(s.sample(3), Err(PlantError::SequenceExhausted(3)));
        assert!(DelayModel::new(DelayKind::Sequence { values: vec![3] }, 2).is_err());
        assert!(DelayModel::new(DelayKind::Sequence { values: vec![-1] }, 2).is_err());
        assert!(DelayModel::new(DelayKind::Constant { d: 4 }, 3).is_err());
    }

    #[test]
    fn uniform_frequencies() {
        let model = DelayModel::uniform(5, 42);
        let mut s = model.sampler();
        let mut counts = [0u32; 6];
        let draws = 1_000_000;
        for j in 0..draws {
            counts[s.sample(j).unwrap()] += 1;
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 1.0 / 6.0).abs() < 0.01 / 6.0, "frequency {freq}");
        }
    }

    #[test]
    fn measurement_gating_and_shift() {
        let map = QuadraticMap::example_3d();
        let mut ring = InputRing::new(3, 3);
        for j in 0..3u64 {
            ring.push(j, &[j as f64, 0.0, 0.0]);
            assert_eq!(measure(&map, &ring, j, 0, 3), 0.0);
        }
        for j in 3..10u64 {
            ring.push(j, &[j as f64, 0.0, 0.0]);
            let y = measure(&map, &ring, j, 3, 3);
            assert_eq!(y, map.eval(&[(j - 3) as f64, 0.0, 0.0]).unwrap());
        }
        let mut ring0 = InputRing::new(3, 0);
        ring0.push(0, &[1.0, 1.0, 1.0]);
        assert_eq!(measure(&map, &ring0, 0, 0, 0), map.eval(&[1.0, 1.0, 1.0]).unwrap());
    }

    #[test]
    fn uncertainty_validation() {
        assert!(UncertaintyBounds::example_3d().validate().is_ok());
        let mut u = UncertaintyBounds::example_3d();
        u.h_min = 200.0;
        assert!(u.validate().is_err());
    }
}
