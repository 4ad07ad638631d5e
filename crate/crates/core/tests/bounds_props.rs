use std::f64::consts::PI;

use esdelay::bounds::*;
use esdelay::Variant;
use proptest::prelude::*;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs())
}

#[test]
fn example_rho_bars_by_hand() {
    // n = 3, D_M = 5, a = 0.1, k = 0.005, H_M = 111
    // Σ1/i = 11/6; cross sum with unit ratios = 197/30; total 8.4
    // Σ 1/(i a_i) = 10·11/6
    let b = BoundInputs::example_3d(Variant::Unbiased, 5, 1e-10, 1.6);
    let r = rho_bars_delayed(&b).unwrap();
    assert!(close(r[0], 0.19245 * 15.0 * 0.005 * 111.0 * 8.4, 1e-14));
    assert!(close(r[1], 0.3849 * 15.0 * 0.005 * 110.0 / 6.0, 1e-14));
    assert!(close(r[3], 0.5 * r[1], 1e-14));
    assert!(close(r[0], 13.458_028_5, 1e-9));
    assert!(close(r[1], 0.529_237_5, 1e-9));
}

#[test]
fn delay_free_rho_bars_by_hand() {
    // n = 2: ω = 2π/5, 4π/5
    let b = BoundInputs {
        n: 2,
        amplitudes: vec![0.2, 0.1],
        uncertainty: esdelay::UncertaintyBounds { h_min: 1.0, h_max: 4.0, sigma0: 1.0, q0: 0.0, delta_q: 1.0 },
        ..BoundInputs::example_3d(Variant::Classical, 0, 1e-3, 1.5)
    };
    let (w1, w2) = (2.0 * PI / 5.0, 4.0 * PI / 5.0);
    let s = |x: f64| x.sin().abs();
    let cross = (0.1 / 0.2) * (1.0 / s((w1 - w2) / 2.0) + 1.0 / s((w1 + w2) / 2.0))
        + (0.2 / 0.1) * (1.0 / s((w2 - w1) / 2.0) + 1.0 / s((w1 + w2) / 2.0));
    let r = rho_bars_delay_free(&b);
    assert!(close(r[0], 0.005 * 4.0 / 2.0 * (1.0 / s(w1) + 1.0 / s(w2) + cross), 1e-13));
    let s2 = 1.0 / (0.2 * s(w1 / 2.0)) + 1.0 / (0.1 * s(w2 / 2.0));
    assert!(close(r[1], 0.005 * s2, 1e-13));
    let cbar = |w: f64| 3.0 * 11.0 / 6.0 + (1.0 / (4.0 * s(w))) * ((1.0 / w.tan()).abs() + 6.0 + 0.2);
    let r3 = 0.005 * 4.0 * 0.05 * ((cbar(w1) / 0.2).powi(2) + (cbar(w2) / 0.1).powi(2)).sqrt();
    assert!(close(r[2], r3, 1e-13));
}

/// Literal transcription of the classical chain with plain `|1 − x|`
/// arithmetic; valid where no cancellation occurs.
fn classical_oracle(b: &BoundInputs) -> (f64, f64, f64, f64) {
    let r = rho_bars(b).unwrap();
    let eps = b.epsilon_star;
    let se = eps.sqrt();
    let d = b.d_max as f64;
    let an = (b.amplitudes.iter().map(|a| a * a).sum::<f64>()).sqrt();
    let ian = (b.amplitudes.iter().map(|a| 1.0 / (a * a)).sum::<f64>()).sqrt();
    let u = &b.uncertainty;
    let sy = u.h_max / 2.0 * (b.sigma + an).powi(2);
    let dg = r[0] * b.sigma + r[1] * (u.q0 + u.delta_q) + r[2] + r[3] * b.sigma.powi(2) * u.h_max;
    let delta = 2.0 * b.k * (sy + u.q0 + u.delta_q) * ian;
    let dout = if b.d_max == 0 {
        0.0
    } else {
        2.0 * b.k * d * u.h_max * ian * (b.sigma + an) * (se * delta + 2.0 * PI * an / ((1.0 - se) * d) * (PI * se / ((1.0 - se) * d) + 1.0))
    };
    let x = delta + se * dout;
    let dy = b.k * u.h_max * dg + r[0] * x + 2.0 * r[3] * b.sigma * u.h_max * x + dout + eps * r[3] * u.h_max * x * x;
    (sy, delta, dg, dy)
}

fn unbiased_oracle(b: &BoundInputs) -> (f64, f64, f64, f64, f64) {
    let r = rho_bars(b).unwrap();
    let eps = b.epsilon_star;
    let se = eps.sqrt();
    let d = b.d_max as f64;
    let a0 = b.alpha0;
    let an = (b.amplitudes.iter().map(|a| a * a).sum::<f64>()).sqrt();
    let ian = (b.amplitudes.iter().map(|a| 1.0 / (a * a)).sum::<f64>()).sqrt();
    let u = &b.uncertainty;
    let l = (1.0 - eps * b.lambda).abs();
    let w = (1.0 - eps * b.omega_h).abs();
    let sy = u.h_max / 2.0 * l.powf(-2.0 * d) * (b.sigma + a0 * an).powi(2);
    let se_ = u.delta_q * w.powf(-d) + eps * b.omega_h * sy / (l * l - w);
    let delta = 2.0 * b.k / a0 * (u.h_max / 2.0 * (b.sigma + a0 * an).powi(2) + se_) * ian;
    let dout = if b.d_max == 0 {
        0.0
    } else {
        let q = (1.0 - se) * d;
        b.k * d * u.h_max / a0 * ian * (b.sigma + a0 * an) * (1.0 + l.powf(-d))
            * (2.0 * se * b.k * (sy + se_) / a0 * ian + a0 * an * (b.lambda * se + 2.0 * PI / q * (PI * se / q + 1.0)) / l)
    };
    let dg = r[0] * b.sigma + r[1] * se_ / a0 + r[2] * a0 + r[3] * b.sigma.powi(2) * u.h_max / a0;
    let x = delta + se * dout;
    let dy = b.k * u.h_max * dg
        + r[0] * x
        + b.omega_h * r[1] / a0 * (sy + se_)
        + r[1] * b.lambda * (se_ * w + eps * b.omega_h * sy) / (a0 * l)
        + r[2] * a0 * b.lambda
        + 2.0 * r[3] * b.sigma / a0 * u.h_max * x
        + dout
        + eps * r[3] / a0 * u.h_max * x * x
        + r[3] / a0 * b.lambda / l * u.h_max * (b.sigma + eps * x).powi(2);
    (sy, se_, delta, dg, dy)
}

#[test]
fn chains_match_literal_oracle() {
    for d in [0usize, 3, 5, 50] {
        for eps in [1e-6, 1e-4] {
            for sigma in [1.2, 1.7] {
                let b = BoundInputs::example_3d(Variant::Classical, d, eps, sigma);
                let c = chain_theorem2(&b).unwrap();
                let (sy, delta, dg, dy) = classical_oracle(&b);
                assert!(close(c.sigma_y, sy, 1e-12) && close(c.delta, delta, 1e-12));
                assert!(close(c.delta_g, dg, 1e-12) && close(c.delta_y, dy, 1e-12), "D={d} eps={eps}");
                assert!(c.sigma_eta.is_none());

                let b = BoundInputs { variant: Variant::Unbiased, alpha0: 0.7, ..b };
                let c = chain_theorem1(&b).unwrap();
                let (sy, se, delta, dg, dy) = unbiased_oracle(&b);
                // the filter gap loses ~8 digits at ε = 1e−6 in the literal form
                assert!(close(c.sigma_y, sy, 1e-12));
                assert!(close(c.sigma_eta.unwrap(), se, 1e-7));
                assert!(close(c.delta, delta, 1e-7) && close(c.delta_g, dg, 1e-7) && close(c.delta_y, dy, 1e-7), "D={d} eps={eps}");
            }
        }
    }
}

#[test]
fn chain_entries_finite_and_nonnegative() {
    for v in [Variant::Unbiased, Variant::Classical] {
        for d in [0, 5, 50] {
            for eps in [1e-16, 1e-12, 1e-8, 1e-4] {
                let c = chain(&BoundInputs::example_3d(v, d, eps, 1.6)).unwrap();
                for (name, val) in c.entries() {
                    assert!(val.is_finite() && val >= 0.0, "{v} D={d} eps={eps} {name}={val}");
                }
            }
        }
    }
}

#[test]
fn table_points() {
    let opts = PredicateOptions::default();
    let b = BoundInputs::example_3d(Variant::Unbiased, 5, 0.36e-11, 1.7);
    assert!(feasible_theorem1(&b, opts).feasible);
    assert!(!feasible_theorem1(&b.with(0.36e-10, 1.7), opts).feasible);
    let b = BoundInputs::example_3d(Variant::Classical, 5, 0.66e-10, 1.6);
    assert!(feasible_theorem2(&b, opts).feasible);
    assert!(!feasible_theorem2(&b.with(0.66e-9, 1.6), opts).feasible);
    let b = BoundInputs::example_3d(Variant::Unbiased, 0, 0.43e-5, 1.6);
    assert!(feasible_theorem1(&b, opts).feasible);
}

#[test]
fn strict_margin_tightens() {
    let b = BoundInputs::example_3d(Variant::Unbiased, 5, 0.36e-11, 1.7);
    let v = feasible_theorem1(&b, PredicateOptions::default());
    let sigma_margin = v.margins.iter().find(|m| m.name == "sigma").unwrap().margin;
    assert!(sigma_margin > 0.0);
    assert!(!feasible_theorem1(&b, PredicateOptions { strict_margin: 2.0 * sigma_margin }).feasible);
}

#[test]
fn rho_bars_increase_with_delay() {
    let mut prev = [0.0; 4];
    for d in 1..=20 {
        let r = rho_bars_delayed(&BoundInputs::example_3d(Variant::Unbiased, d, 1e-8, 1.6)).unwrap();
        for l in [0, 1, 3] {
            assert!(r[l] > prev[l]);
        }
        prev = r;
    }
}

proptest! {
    #[test]
    fn decay_ordering_matches_step_condition(
        lambda in 1e-4f64..1.0,
        kh_extra in 1e-3f64..3.0,
        wh_extra in 1e-3f64..3.0,
        log_eps in -3.0f64..1.0,
    ) {
        let kh = lambda + kh_extra;
        let wh = 2.0 * lambda + wh_extra;
        let eps = 10f64.powf(log_eps);
        let step = eps * (lambda + kh).max(wh + 2.0 * lambda - eps * lambda * lambda);
        prop_assume!((step - 2.0).abs() > 1e-9);
        let ordered = decay_gap(eps * lambda, eps * kh) > 0.0 && decay_gap_sq(eps * lambda, eps * wh) > 0.0;
        prop_assert_eq!(ordered, step < 2.0);
    }

    #[test]
    fn chain_nondecreasing_in_sigma(
        s1 in 1.0f64..3.0,
        ds in 0.0f64..1.0,
        log_eps in -15.0f64..-4.0,
        d in prop::sample::select(vec![0usize, 1, 5, 50]),
        unbiased in any::<bool>(),
    ) {
        let v = if unbiased { Variant::Unbiased } else { Variant::Classical };
        let eps = 10f64.powf(log_eps);
        let lo = chain(&BoundInputs::example_3d(v, d, eps, s1)).unwrap();
        let hi = chain(&BoundInputs::example_3d(v, d, eps, s1 + ds)).unwrap();
        for ((name, a), (_, b)) in lo.entries().into_iter().zip(hi.entries()) {
            prop_assert!(b >= a * (1.0 - 1e-14), "{} decreased", name);
        }
    }

    #[test]
    fn rho_bars_scale_with_gain(k in 1e-4f64..1.0, d in 0usize..20) {
        let base = BoundInputs::example_3d(Variant::Classical, d, 1e-6, 1.5);
        let r1 = rho_bars(&BoundInputs { k, ..base.clone() }).unwrap();
        let r2 = rho_bars(&BoundInputs { k: 2.0 * k, ..base }).unwrap();
        for l in 0..4 {
            prop_assert!((r2[l] - 2.0 * r1[l]).abs() <= 1e-13 * r2[l]);
        }
    }
}
