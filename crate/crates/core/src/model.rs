//! Closed-form scaling model.
//!
//! A problem (or a whole benchmark curve) is described by a per-unit success
//! probability `p_x` and an asymptotic ceiling `f_max`. Parallel sampling and
//! sequential rethinking share the same performance function
//! `F(N) = f_max * (1 - (1 - p_x)^N)`, so everything here is strategy-agnostic.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used to decide that the saturation quotient is an integer.
const INTEGRAL_SNAP: f64 = 1e-9;

/// Parameter pair of one scaling curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingModel {
    p_x: f64,
    f_max: f64,
}

impl ScalingModel {
    /// Both parameters must lie in `(0, 1]`.
    pub fn new(p_x: f64, f_max: f64) -> Result<Self> {
        check_unit_interval("p_x", p_x)?;
        check_unit_interval("f_max", f_max)?;
        Ok(Self { p_x, f_max })
    }

    pub fn p_x(&self) -> f64 {
        self.p_x
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    /// `(1 - p_x)^n`: probability that none of `n` units succeeds.
    pub fn all_fail_probability(&self, n: u64) -> f64 {
        survival(self.p_x, n)
    }

    /// `F(n)`, the expected metric after `n` units.
    pub fn hit_probability(&self, n: u64) -> f64 {
        self.f_max * (1.0 - survival(self.p_x, n))
    }

    /// Probability that the first success happens exactly at unit `k` (1-based).
    pub fn first_success_pmf(&self, k: u64) -> f64 {
        if k == 0 {
            return 0.0;
        }
        survival(self.p_x, k - 1) * self.p_x
    }

    /// `F(n + 1) - F(n) = f_max * p_x * (1 - p_x)^n`.
    pub fn marginal_gain(&self, n: u64) -> f64 {
        self.f_max * self.p_x * survival(self.p_x, n)
    }

    /// Smallest budget whose next unit gains less than `threshold`.
    ///
    /// When even the first unit gains no more than the threshold
    /// (`epsilon >= f_max * p_x`) the result is `1` with the degenerate flag
    /// set. A model with `p_x = 1` saturates after one unit; that limit is
    /// returned without evaluating the logarithmic form. Results too large for
    /// `u64` saturate at `u64::MAX`.
    pub fn saturation_point(&self, threshold: GainThreshold) -> SaturationPoint {
        let epsilon = threshold.epsilon();
        let initial_gain = self.f_max * self.p_x;
        if epsilon >= initial_gain {
            return SaturationPoint::degenerate();
        }
        if self.p_x >= 1.0 {
            return SaturationPoint::at(1);
        }

        let quotient = (epsilon / initial_gain).ln() / (-self.p_x).ln_1p();
        let nearest = quotient.round();
        if (quotient - nearest).abs() <= INTEGRAL_SNAP * nearest.max(1.0) {
            // (1 - p)^m == epsilon / (f_max p) exactly: the inequality is strict.
            return SaturationPoint::at(to_count(nearest).saturating_add(1));
        }

        let mut n = to_count(quotient.floor()).saturating_add(1).max(1);
        // The logarithmic form and the direct gain can disagree by an ulp at
        // the boundary; settle on the direct evaluation.
        for _ in 0..4 {
            if n > 1 && self.marginal_gain(n - 1) < epsilon {
                n -= 1;
            } else if n < u64::MAX && self.marginal_gain(n) >= epsilon {
                n += 1;
            } else {
                break;
            }
        }
        SaturationPoint::at(n)
    }
}

/// Minimum worthwhile marginal gain per extra unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainThreshold(f64);

impl GainThreshold {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::param(
                "epsilon",
                format!("must be a finite value > 0, got {epsilon}"),
            ));
        }
        Ok(Self(epsilon))
    }

    pub fn epsilon(&self) -> f64 {
        self.0
    }
}

/// Predicted plateau budget `N*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SaturationPoint {
    pub n_star: u64,
    /// Set when the threshold already exceeds the first unit's gain.
    pub degenerate: bool,
}

impl SaturationPoint {
    fn at(n_star: u64) -> Self {
        Self {
            n_star: n_star.max(1),
            degenerate: false,
        }
    }

    fn degenerate() -> Self {
        Self {
            n_star: 1,
            degenerate: true,
        }
    }
}

/// `(1 - p)^n` for `p` in `(0, 1]`.
///
/// Uses `powi` when `1 - p` is exactly representable and the log domain
/// (`exp(n * ln_1p(-p))`) otherwise, so tiny probabilities keep full precision.
pub(crate) fn survival(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    if p >= 1.0 {
        return 0.0;
    }
    let q = 1.0 - p;
    if 1.0 - q == p && n <= i32::MAX as u64 {
        q.powi(n as i32)
    } else {
        (n as f64 * (-p).ln_1p()).exp()
    }
}

fn to_count(x: f64) -> u64 {
    // `as` saturates for out-of-range floats.
    x as u64
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(
            name,
            format!("must lie in (0, 1], got {value}"),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(p: f64, f: f64) -> ScalingModel {
        ScalingModel::new(p, f).unwrap()
    }

    fn eps(e: f64) -> GainThreshold {
        GainThreshold::new(e).unwrap()
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(ScalingModel::new(0.0, 0.5).is_err());
        assert!(ScalingModel::new(1.5, 0.5).is_err());
        assert!(ScalingModel::new(0.5, 0.0).is_err());
        assert!(ScalingModel::new(f64::NAN, 0.5).is_err());
        assert!(GainThreshold::new(0.0).is_err());
        assert!(GainThreshold::new(-1e-3).is_err());
        assert!(GainThreshold::new(f64::INFINITY).is_err());
    }

    #[test]
    fn hit_probability_worked_values() {
        assert_eq!(model(0.5, 1.0).hit_probability(2), 0.75);
        assert_eq!(model(1.0, 0.9).hit_probability(1), 0.9);
    }

    #[test]
    fn all_fail_probability_worked_values() {
        assert_eq!(model(0.5, 1.0).all_fail_probability(3), 0.125);
        assert_eq!(model(1.0, 1.0).all_fail_probability(7), 0.0);

        let mut repeated = 1.0;
        for _ in 0..10 {
            repeated *= 0.8;
        }
        let direct = model(0.2, 1.0).all_fail_probability(10);
        assert!((direct - repeated).abs() < 1e-15);
        assert!((direct - 0.10737).abs() < 1e-5);
    }

    #[test]
    fn first_success_pmf_worked_values() {
        let m = model(0.5, 1.0);
        assert_eq!(m.first_success_pmf(1), 0.5);
        assert_eq!(m.first_success_pmf(3), 0.125);

        let m = model(0.3, 1.0);
        let summed: f64 = (1..=4).map(|k| m.first_success_pmf(k)).sum();
        assert!((summed - 0.7599).abs() < 1e-12);
        assert!((summed - (1.0 - m.all_fail_probability(4))).abs() < 1e-15);
    }

    #[test]
    fn marginal_gain_worked_values() {
        let m = model(0.5, 1.0);
        assert_eq!(m.marginal_gain(0), 0.5);
        assert_eq!(m.marginal_gain(5), 0.015625);
        assert_eq!(m.hit_probability(6) - m.hit_probability(5), 0.015625);
        assert_eq!(model(1.0, 1.0).marginal_gain(1), 0.0);
    }

    #[test]
    fn saturation_point_half_probability() {
        let m = model(0.5, 1.0);
        let brute = (0u64..).find(|&n| m.marginal_gain(n) < 0.01).unwrap();
        assert_eq!(brute, 6);
        assert_eq!(
            m.saturation_point(eps(0.01)),
            SaturationPoint {
                n_star: 6,
                degenerate: false
            }
        );
    }

    #[test]
    fn saturation_point_degenerate_branch() {
        let sp = model(0.5, 1.0).saturation_point(eps(0.6));
        assert_eq!(sp.n_star, 1);
        assert!(sp.degenerate);

        // exactly at the boundary
        let m = model(0.25, 0.8);
        let sp = m.saturation_point(eps(0.8 * 0.25));
        assert_eq!(sp.n_star, 1);
        assert!(sp.degenerate);
    }

    #[test]
    fn saturation_point_certain_success() {
        let sp = model(1.0, 0.7).saturation_point(eps(0.01));
        assert_eq!(sp.n_star, 1);
        assert!(!sp.degenerate);
    }

    #[test]
    fn saturation_point_exact_integral_quotient() {
        // (1/2)^5 = 1/32 exactly, so the gain at N = 5 equals epsilon and N* = 6.
        let m = model(0.5, 1.0);
        let sp = m.saturation_point(eps(0.5 / 32.0));
        assert_eq!(sp.n_star, 6);
        assert_eq!(m.marginal_gain(5), 0.5 / 32.0);
    }

    #[test]
    fn saturation_point_tiny_probability() {
        let m = model(1e-5, 1.0);
        let sp = m.saturation_point(eps(1e-7));
        assert!(!sp.degenerate);
        assert!(m.marginal_gain(sp.n_star) < 1e-7);
        assert!(m.marginal_gain(sp.n_star - 1) >= 1e-7);
    }

    #[test]
    fn survival_log_domain_matches_powers() {
        // 1 - 1e-5 is not exact; the log-domain branch is used.
        let p: f64 = 1e-5;
        let expected = (-p * 1e4 - p * p * 1e4 / 2.0).exp();
        assert!((survival(p, 10_000) - expected).abs() < 1e-11);
        assert_eq!(survival(0.25, 0), 1.0);
        assert_eq!(survival(1.0, 3), 0.0);
    }
}
