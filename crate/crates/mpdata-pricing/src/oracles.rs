//! Analytic and semi-analytic reference prices: Black-Scholes call/put,
//! corridor value, the Bjerksund-Stensland (1993) American-put
//! approximation, and a binomial-tree brute-force oracle.

use crate::error::{Error, Result};

/// Inputs shared by the closed-form references.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticInputs {
    pub s0: f64,
    pub k: f64,
    pub r: f64,
    pub sigma: f64,
    pub t: f64,
}

impl AnalyticInputs {
    pub fn new(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> Result<Self> {
        if s0 <= 0.0 || k <= 0.0 || sigma <= 0.0 || t <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "analytic inputs require s0, k, sigma, t > 0 (got s0={s0}, k={k}, sigma={sigma}, t={t})"
            )));
        }
        Ok(AnalyticInputs { s0, k, r, sigma, t })
    }
}

// Rational approximations for erf/erfc after W. J. Cody,
// accurate to ~1e-16 relative over the double range.
const ERF_A: [f64; 5] = [
    3.16112374387056560e0,
    1.13864154151050156e2,
    3.77485237685302021e2,
    3.20937758913846947e3,
    1.85777706184603153e-1,
];
const ERF_B: [f64; 4] = [
    2.36012909523441209e1,
    2.44024637934444173e2,
    1.28261652607737228e3,
    2.84423683343917062e3,
];
const ERF_C: [f64; 9] = [
    5.64188496988670089e-1,
    8.88314979438837594e0,
    6.61191906371416295e1,
    2.98635138197400131e2,
    8.81952221241769090e2,
    1.71204761263407058e3,
    2.05107837782607147e3,
    1.23033935479799725e3,
    2.15311535474403846e-8,
];
const ERF_D: [f64; 8] = [
    1.57449261107098347e1,
    1.17693950891312499e2,
    5.37181101862009858e2,
    1.62138957456669019e3,
    3.29079923573345963e3,
    4.36261909014324716e3,
    3.43936767414372164e3,
    1.23033935480374942e3,
];
const ERF_P: [f64; 6] = [
    3.05326634961232344e-1,
    3.60344899949804439e-1,
    1.25781726111229246e-1,
    1.60837851487422766e-2,
    6.58749161529837803e-4,
    1.63153871373020978e-2,
];
const ERF_Q: [f64; 5] = [
    2.56852019228982242e0,
    1.87295284992346047e0,
    5.27905102951428412e-1,
    6.05183413124413191e-2,
    2.33520497626869185e-3,
];
const INV_SQRT_PI: f64 = 5.641_895_835_477_562_9e-1;

/// exp(-y^2) split so the argument reduction keeps full precision.
fn exp_neg_square(y: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp()
}

fn erfc_positive(y: f64) -> f64 {
    debug_assert!(y >= 0.46875);
    if y <= 4.0 {
        let mut num = ERF_C[8] * y;
        let mut den = y;
        for i in 0..7 {
            num = (num + ERF_C[i]) * y;
            den = (den + ERF_D[i]) * y;
        }
        exp_neg_square(y) * (num + ERF_C[7]) / (den + ERF_D[7])
    } else if y < 26.5 {
        let ysq = 1.0 / (y * y);
        let mut num = ERF_P[5] * ysq;
        let mut den = ysq;
        for i in 0..4 {
            num = (num + ERF_P[i]) * ysq;
            den = (den + ERF_Q[i]) * ysq;
        }
        let poly = ysq * (num + ERF_P[4]) / (den + ERF_Q[4]);
        exp_neg_square(y) * (INV_SQRT_PI - poly) / y
    } else {
        0.0
    }
}

pub fn erf(x: f64) -> f64 {
    let y = x.abs();
    if y <= 0.46875 {
        let ysq = y * y;
        let mut num = ERF_A[4] * ysq;
        let mut den = ysq;
        for i in 0..3 {
            num = (num + ERF_A[i]) * ysq;
            den = (den + ERF_B[i]) * ysq;
        }
        x * (num + ERF_A[3]) / (den + ERF_B[3])
    } else {
        let tail = erfc_positive(y);
        if x > 0.0 {
            1.0 - tail
        } else {
            tail - 1.0
        }
    }
}

pub fn erfc(x: f64) -> f64 {
    if x.abs() <= 0.46875 {
        1.0 - erf(x)
    } else if x > 0.0 {
        erfc_positive(x)
    } else {
        2.0 - erfc_positive(-x)
    }
}

/// Standard normal cumulative distribution function.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn d1(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    ((s0 / k).ln() + (r + sigma * sigma / 2.0) * t) / (sigma * t.sqrt())
}

/// Black-Scholes European call.
pub fn bs_call(inputs: &AnalyticInputs) -> f64 {
    let AnalyticInputs { s0, k, r, sigma, t } = *inputs;
    let d1 = d1(s0, k, r, sigma, t);
    let d2 = d1 - sigma * t.sqrt();
    s0 * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
}

/// Black-Scholes European put.
pub fn bs_put(inputs: &AnalyticInputs) -> f64 {
    let AnalyticInputs { s0, k, r, sigma, t } = *inputs;
    let d1 = d1(s0, k, r, sigma, t);
    let d2 = d1 - sigma * t.sqrt();
    k * (-r * t).exp() * norm_cdf(-d2) - s0 * norm_cdf(-d1)
}

/// Value of a corridor (long call at `k1`, short call at `k2`) at t = 0.
pub fn corridor_value(s0: f64, k1: f64, k2: f64, r: f64, sigma: f64, t: f64) -> f64 {
    if k1 == k2 {
        return 0.0;
    }
    let lo = AnalyticInputs { s0, k: k1, r, sigma, t };
    let hi = AnalyticInputs { s0, k: k2, r, sigma, t };
    bs_call(&lo) - bs_call(&hi)
}

/// The phi auxiliary function of the 1993 flat-boundary approximation.
fn bs93_phi(s: f64, t: f64, gamma: f64, h: f64, i: f64, r: f64, b: f64, sigma: f64) -> f64 {
    let v2 = sigma * sigma;
    let lambda = (-r + gamma * b + 0.5 * gamma * (gamma - 1.0) * v2) * t;
    let d = -((s / h).ln() + (b + (gamma - 0.5) * v2) * t) / (sigma * t.sqrt());
    let kappa = 2.0 * b / v2 + 2.0 * gamma - 1.0;
    lambda.exp()
        * s.powf(gamma)
        * (norm_cdf(d) - (i / s).powf(kappa) * norm_cdf(d - 2.0 * (i / s).ln() / (sigma * t.sqrt())))
}

/// American call under cost of carry `b`; early exercise only pays when b < r.
fn bs93_call(s: f64, k: f64, t: f64, r: f64, b: f64, sigma: f64) -> f64 {
    let v2 = sigma * sigma;
    if b >= r {
        let d1 = ((s / k).ln() + (b + v2 / 2.0) * t) / (sigma * t.sqrt());
        let d2 = d1 - sigma * t.sqrt();
        return s * ((b - r) * t).exp() * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2);
    }
    let beta = (0.5 - b / v2) + ((b / v2 - 0.5).powi(2) + 2.0 * r / v2).sqrt();
    let b_inf = beta / (beta - 1.0) * k;
    let b_0 = if r != b { k.max(r / (r - b) * k) } else { k };
    let ht = -(b * t + 2.0 * sigma * t.sqrt()) * b_0 / (b_inf - b_0);
    let trigger = b_0 + (b_inf - b_0) * (1.0 - ht.exp());
    if s >= trigger {
        return s - k;
    }
    let alpha = (trigger - k) * trigger.powf(-beta);
    alpha * s.powf(beta) - alpha * bs93_phi(s, t, beta, trigger, trigger, r, b, sigma)
        + bs93_phi(s, t, 1.0, trigger, trigger, r, b, sigma)
        - bs93_phi(s, t, 1.0, k, trigger, r, b, sigma)
        - k * bs93_phi(s, t, 0.0, trigger, trigger, r, b, sigma)
        + k * bs93_phi(s, t, 0.0, k, trigger, r, b, sigma)
}

/// Bjerksund-Stensland (1993) American put, via the put-from-call duality
/// P(S, K, T, r, b) = C(K, S, T, r - b, -b) with b = r (no dividends).
pub fn bjerksund_stensland_put(inputs: &AnalyticInputs) -> f64 {
    let AnalyticInputs { s0, k, r, sigma, t } = *inputs;
    bs93_call(k, s0, t, 0.0, -r, sigma)
}

fn binomial_put(inputs: &AnalyticInputs, n_steps: usize, american: bool) -> Result<f64> {
    if n_steps < 1 {
        return Err(Error::InvalidParameter("n_steps must be at least 1".into()));
    }
    let AnalyticInputs { s0, k, r, sigma, t } = *inputs;
    let dt = t / n_steps as f64;
    let up = (sigma * dt.sqrt()).exp();
    let down = 1.0 / up;
    if !up.is_finite() || down <= 0.0 || up == down {
        return Err(Error::InvalidParameter(format!(
            "degenerate tree factors (up = {up})"
        )));
    }
    let disc = (-r * dt).exp();
    let p = ((r * dt).exp() - down) / (up - down);
    let mut values: Vec<f64> = (0..=n_steps)
        .map(|j| {
            let s = s0 * up.powi(j as i32) * down.powi((n_steps - j) as i32);
            (k - s).max(0.0)
        })
        .collect();
    for i in (0..n_steps).rev() {
        for j in 0..=i {
            let cont = disc * (p * values[j + 1] + (1.0 - p) * values[j]);
            values[j] = if american {
                let s = s0 * up.powi(j as i32) * down.powi((i - j) as i32);
                cont.max(k - s)
            } else {
                cont
            };
        }
        values.truncate(i + 1);
    }
    Ok(values[0])
}

/// Cox-Ross-Rubinstein recombining-tree American put with exercise checked
/// at every node.
pub fn binomial_american_put(inputs: &AnalyticInputs, n_steps: usize) -> Result<f64> {
    binomial_put(inputs, n_steps, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    // reference values frozen from a high-precision erfc oracle (mpmath, 30 digits)
    const NORM_CDF_REFERENCE: [(f64, f64); 15] = [
        (0.0, 0.5),
        (0.5, 0.6914624612740131),
        (1.0, 0.84134474606854295),
        (2.0, 0.97724986805182079),
        (3.0, 0.99865010196836991),
        (4.0, 0.99996832875816688),
        (6.0, 0.99999999901341235),
        (8.0, 0.99999999999999938),
        (-0.5, 0.3085375387259869),
        (-1.0, 0.15865525393145705),
        (-2.0, 0.022750131948179207),
        (-3.0, 0.0013498980316300945),
        (-4.0, 3.1671241833119921e-5),
        (-6.0, 9.8658764503769814e-10),
        (-8.0, 6.2209605742717841e-16),
    ];

    // (tenure, spot, paper BS93 column, paper European column)
    const TABLE_REFERENCE: [(f64, f64, f64, f64); 15] = [
        (0.25, 80.0, 20.000, 18.089),
        (0.25, 90.0, 10.011, 9.045),
        (0.25, 100.0, 3.162, 3.037),
        (0.25, 110.0, 0.649, 0.640),
        (0.25, 120.0, 0.087, 0.086),
        (0.50, 80.0, 20.000, 16.648),
        (0.50, 90.0, 10.240, 8.834),
        (0.50, 100.0, 4.109, 3.785),
        (0.50, 110.0, 1.372, 1.312),
        (0.50, 120.0, 0.385, 0.376),
        (3.00, 80.0, 20.000, 10.253),
        (3.00, 90.0, 11.668, 6.783),
        (3.00, 100.0, 6.896, 4.406),
        (3.00, 110.0, 4.118, 2.826),
        (3.00, 120.0, 2.510, 1.797),
    ];

    fn inputs(s0: f64, k: f64, r: f64, sigma: f64, t: f64) -> AnalyticInputs {
        AnalyticInputs::new(s0, k, r, sigma, t).unwrap()
    }

    #[test]
    fn cdf_matches_high_precision_references() {
        for &(x, expected) in &NORM_CDF_REFERENCE {
            assert_relative_eq!(norm_cdf(x), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn cdf_basic_values() {
        assert_eq!(norm_cdf(0.0), 0.5);
        assert_abs_diff_eq!(norm_cdf(1.959964), 0.975, epsilon = 1e-6);
        assert_abs_diff_eq!(norm_cdf(40.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn cdf_symmetry() {
        for &x in &[0.1, 0.7, 1.3, 2.9, 4.4, 7.5] {
            assert_abs_diff_eq!(norm_cdf(x) + norm_cdf(-x), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn call_limits() {
        let almost_zero_strike = inputs(100.0, 1e-12, 0.05, 0.2, 1.0);
        assert_relative_eq!(bs_call(&almost_zero_strike), 100.0, max_relative = 1e-9);
        let near_expiry = inputs(110.0, 100.0, 0.05, 0.2, 1e-10);
        assert_relative_eq!(bs_call(&near_expiry), 10.0, max_relative = 1e-6);
        let near_expiry_otm = inputs(90.0, 100.0, 0.05, 0.2, 1e-10);
        assert_abs_diff_eq!(bs_call(&near_expiry_otm), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn call_value_from_put_parity_benchmark() {
        // put = 3.037 at (100, 100, 0.08, 0.2, 0.25) implies call ~ 5.017
        let c = bs_call(&inputs(100.0, 100.0, 0.08, 0.2, 0.25));
        assert_abs_diff_eq!(c, 5.017, epsilon = 5e-4);
    }

    #[test]
    fn put_reproduces_published_european_values() {
        for &(t, s0, _, euro) in &TABLE_REFERENCE {
            let p = bs_put(&inputs(s0, 100.0, 0.08, 0.2, t));
            assert_abs_diff_eq!(p, euro, epsilon = 5e-4);
        }
    }

    #[test]
    fn put_solute_transport_parameter_set_is_finite() {
        // K = 1, sigma^2 = 2, r = 0, S0 = 1, T = 1
        let p = bs_put(&inputs(1.0, 1.0, 0.0, std::f64::consts::SQRT_2, 1.0));
        assert!(p.is_finite() && p > 0.0);
        assert_relative_eq!(p, 2.0 * norm_cdf(std::f64::consts::FRAC_1_SQRT_2) - 1.0, max_relative = 1e-12);
    }

    #[test]
    fn corridor_degenerate_and_limits() {
        assert_eq!(corridor_value(1.0, 0.75, 0.75, 0.008, 0.6, 0.5), 0.0);
        let wide = corridor_value(1.0, 1e-9, 1e9, 0.008, 0.6, 0.5);
        assert_relative_eq!(wide, 1.0, max_relative = 1e-6);
    }

    #[test]
    fn corridor_asymptotes() {
        // deep out of the money -> 0; deep in -> discounted width
        let lo = corridor_value(0.05, 0.75, 1.75, 0.008, 0.6, 0.5);
        assert_abs_diff_eq!(lo, 0.0, epsilon = 1e-6);
        let hi = corridor_value(60.0, 0.75, 1.75, 0.008, 0.6, 0.5);
        assert_relative_eq!(hi, (-0.008f64 * 0.5).exp() * 1.0, max_relative = 1e-6);
    }

    #[test]
    fn bs93_reproduces_published_values() {
        for &(t, s0, bs93, _) in &TABLE_REFERENCE {
            let p = bjerksund_stensland_put(&inputs(s0, 100.0, 0.08, 0.2, t));
            assert_abs_diff_eq!(p, bs93, epsilon = 5e-4);
        }
    }

    #[test]
    fn bs93_deep_itm_hits_immediate_exercise() {
        // the dual call's spot sits above the flat boundary: exactly intrinsic
        let p = bjerksund_stensland_put(&inputs(80.0, 100.0, 0.08, 0.2, 0.25));
        assert_eq!(p, 20.0);
    }

    #[test]
    fn tree_single_period_deep_itm_floor() {
        let v = binomial_american_put(&inputs(50.0, 100.0, 0.08, 0.2, 0.25), 1).unwrap();
        assert!(v >= 50.0);
    }

    #[test]
    fn tree_zero_rate_has_no_exercise_premium() {
        let i = inputs(100.0, 100.0, 0.0, 0.2, 0.5);
        let american = binomial_put(&i, 500, true).unwrap();
        let european = binomial_put(&i, 500, false).unwrap();
        assert_abs_diff_eq!(american, european, epsilon = 1e-12);
    }

    #[test]
    fn tree_converges_near_published_benchmark() {
        // frozen from this oracle at n = 4000; BS93 gives 3.1618 for the same
        // inputs, i.e. the flat-boundary approximation sits ~0.06 below
        let i = inputs(100.0, 100.0, 0.08, 0.2, 0.25);
        let tree = binomial_american_put(&i, 4000).unwrap();
        assert_abs_diff_eq!(tree, 3.2246, epsilon = 2e-3);
        let gap = tree - bjerksund_stensland_put(&i);
        assert!(gap > 0.0 && gap < 0.08, "BS93 gap {gap}");
    }

    #[test]
    fn tree_european_limit_matches_closed_form() {
        let i = inputs(100.0, 110.0, 0.05, 0.25, 1.0);
        let tree = binomial_put(&i, 4000, false).unwrap();
        assert_abs_diff_eq!(tree, bs_put(&i), epsilon = 2e-3);
    }

    #[test]
    fn tree_rejects_bad_steps() {
        assert!(binomial_american_put(&inputs(100.0, 100.0, 0.08, 0.2, 0.25), 0).is_err());
    }

    proptest! {
        #[test]
        fn put_call_parity(
            s0 in 10.0f64..300.0,
            k in 10.0f64..300.0,
            r in -0.05f64..0.15,
            sigma in 0.05f64..0.9,
            t in 0.05f64..5.0,
        ) {
            let i = AnalyticInputs { s0, k, r, sigma, t };
            let lhs = bs_call(&i) - bs_put(&i);
            let rhs = s0 - k * (-r * t).exp();
            let scale = s0.max(k);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * scale,
                "parity violated by {}", (lhs - rhs).abs());
        }

        #[test]
        fn put_monotone_in_spot(
            s0 in 20.0f64..200.0,
            bump in 0.01f64..5.0,
        ) {
            let a = bs_put(&AnalyticInputs { s0, k: 100.0, r: 0.05, sigma: 0.3, t: 1.0 });
            let b = bs_put(&AnalyticInputs { s0: s0 + bump, k: 100.0, r: 0.05, sigma: 0.3, t: 1.0 });
            prop_assert!(b <= a + 1e-12);
        }

        #[test]
        fn corridor_monotone_in_spot(
            s0 in 0.1f64..5.0,
            bump in 0.001f64..0.5,
        ) {
            let a = corridor_value(s0, 0.75, 1.75, 0.008, 0.6, 0.5);
            let b = corridor_value(s0 + bump, 0.75, 1.75, 0.008, 0.6, 0.5);
            prop_assert!(b >= a - 1e-12);
        }

        #[test]
        fn tree_american_dominates_european(
            s0 in 50.0f64..150.0,
            sigma in 0.1f64..0.5,
            t in 0.1f64..2.0,
        ) {
            let i = AnalyticInputs { s0, k: 100.0, r: 0.08, sigma, t };
            let a = binomial_put(&i, 200, true).unwrap();
            let e = binomial_put(&i, 200, false).unwrap();
            prop_assert!(a >= e - 1e-12);
        }
    }
}
