//! Normal draws restricted to an interval.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

/// Standard normal restricted to `[a, b]`, `a < b`, at least one side finite
/// or both infinite. Uses normal, uniform or exponential rejection depending
/// on where the interval sits.
pub fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    debug_assert!(a < b);
    if b <= 0.0 {
        return -standard_truncated(-b, -a, rng);
    }
    if a <= 0.0 {
        if b - a >= 2.0 {
            loop {
                let x: f64 = StandardNormal.sample(rng);
                if x >= a && x <= b {
                    return x;
                }
            }
        }
        loop {
            let x = rng.random_range(a..=b);
            if rng.random::<f64>().ln() <= -0.5 * x * x {
                return x;
            }
        }
    }
    // 0 < a < b
    if 0.5 * (b * b - a * a) < 1.0 {
        loop {
            let x = rng.random_range(a..=b);
            if rng.random::<f64>().ln() <= 0.5 * (a * a - x * x) {
                return x;
            }
        }
    }
    let alpha = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let x = a + e / alpha;
        if x > b {
            continue;
        }
        if rng.random::<f64>().ln() <= -0.5 * (x - alpha) * (x - alpha) {
            return x;
        }
    }
}

/// `N(mean, sd^2)` restricted to `[lo, hi]`. When the standardized interval
/// collapses in floating point the draw is the point of `[lo, hi]` nearest
/// to `mean`.
pub fn truncated_normal<R: Rng + ?Sized>(mean: f64, sd: f64, lo: f64, hi: f64, rng: &mut R) -> f64 {
    let (a, b) = ((lo - mean) / sd, (hi - mean) / sd);
    if !(a < b) {
        return mean.clamp(lo, hi);
    }
    let x = mean + sd * standard_truncated(a, b, rng);
    x.clamp(lo, hi)
}

#[cfg(test)]
mod tests {
    use statrs::distribution::{Continuous, ContinuousCDF, Normal};

    use super::*;
    use crate::rng::seeded;

    fn moments(a: f64, b: f64) -> (f64, f64) {
        let n = Normal::standard();
        let z = n.cdf(b) - n.cdf(a);
        let mean = (n.pdf(a) - n.pdf(b)) / z;
        let second = 1.0 + (a * n.pdf(a) - b * n.pdf(b)) / z;
        (mean, second - mean * mean)
    }

    #[test]
    fn matches_closed_form_moments() {
        let mut rng = seeded(5);
        for (a, b) in [
            (-1.0, 1.0),
            (-3.0, 4.0),
            (0.5, 0.9),
            (2.0, 6.0),
            (4.0, 40.0),
            (-7.0, -6.5),
            (-0.2, 0.1),
        ] {
            let m = 200_000;
            let xs: Vec<f64> = (0..m).map(|_| standard_truncated(a, b, &mut rng)).collect();
            assert!(xs.iter().all(|x| *x >= a && *x <= b));
            let mean = xs.iter().sum::<f64>() / m as f64;
            let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / m as f64;
            let (em, ev) = moments(a, b);
            let se = (ev / m as f64).sqrt();
            assert!(
                (mean - em).abs() < 5.0 * se,
                "[{a},{b}] mean {mean} vs {em}"
            );
            assert!(
                (var - ev).abs() < 0.02 * ev + 1e-6,
                "[{a},{b}] var {var} vs {ev}"
            );
        }
    }

    #[test]
    fn far_mean_collapses_to_nearest_bound() {
        let mut rng = seeded(5);
        assert_eq!(truncated_normal(1e200, 0.1, -3.0, 3.0, &mut rng), 3.0);
        assert_eq!(truncated_normal(-1e200, 0.1, -3.0, 3.0, &mut rng), -3.0);
        assert!(truncated_normal(f64::NAN, 0.1, -3.0, 3.0, &mut rng).is_nan());
    }
}
