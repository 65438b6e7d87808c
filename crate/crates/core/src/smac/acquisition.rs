//! Expected improvement and its squared generalization, for maximization.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

/// `E[max(X - f_max, 0)]` for `X ~ N(mu, sigma^2)`.
pub fn expected_improvement(mu: f64, sigma: f64, f_max: f64) -> f64 {
    debug_assert!(sigma >= 0.0, "negative sigma {sigma}");
    if sigma > 0.0 {
        let z = (mu - f_max) / sigma;
        // Clamp rounding noise in the far tail.
        (sigma * (z * normal_cdf(z) + normal_pdf(z))).max(0.0)
    } else {
        (mu - f_max).max(0.0)
    }
}

/// `E[max(X - f_max, 0)^2]` for `X ~ N(mu, sigma^2)`.
pub fn generalized_expected_improvement(mu: f64, sigma: f64, f_max: f64) -> f64 {
    debug_assert!(sigma >= 0.0, "negative sigma {sigma}");
    if sigma > 0.0 {
        let z = (mu - f_max) / sigma;
        (sigma * sigma * ((z * z + 1.0) * normal_cdf(z) + z * normal_pdf(z))).max(0.0)
    } else {
        (mu - f_max).max(0.0).powi(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_limits() {
        assert_eq!(expected_improvement(2.0, 0.0, 0.0), 2.0);
        assert_eq!(expected_improvement(-1.0, 0.0, 0.0), 0.0);
        assert_eq!(generalized_expected_improvement(2.0, 0.0, 0.0), 4.0);
        assert_eq!(generalized_expected_improvement(-1.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn at_the_incumbent() {
        assert!((expected_improvement(3.0, 1.0, 3.0) - 0.398_942_280_4).abs() < 1e-9);
        assert!((generalized_expected_improvement(3.0, 1.0, 3.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn vanishing_tail() {
        let g = generalized_expected_improvement(-6.0, 1.0, 0.0);
        assert!((0.0..1e-6).contains(&g), "{g}");
        let e = expected_improvement(-6.0, 1.0, 0.0);
        assert!((0.0..1e-6).contains(&e), "{e}");
    }

    #[test]
    fn ei_increases_with_mean() {
        let mut prev = expected_improvement(-5.0, 0.7, 0.0);
        for i in 1..=100 {
            let mu = -5.0 + 0.1 * i as f64;
            let ei = expected_improvement(mu, 0.7, 0.0);
            assert!(ei > prev, "mu {mu}");
            prev = ei;
        }
    }

    #[test]
    fn ei_grows_with_uncertainty_below_incumbent() {
        for mu in [-3.0, -1.0, -0.1, 0.0] {
            let mut prev = expected_improvement(mu, 0.0, 0.0);
            for i in 1..=60 {
                let ei = expected_improvement(mu, 0.05 * i as f64, 0.0);
                assert!(ei >= prev, "mu {mu} sigma {}", 0.05 * i as f64);
                prev = ei;
            }
        }
    }

    #[test]
    fn cdf_reference_values() {
        assert!((normal_cdf(0.0) - 0.5).abs() < 1e-15);
        assert!((normal_cdf(1.959_963_984_540_054) - 0.975).abs() < 1e-10);
        assert!((normal_cdf(-3.0) / 0.001_349_898_031_630_094_6 - 1.0).abs() < 1e-9);
    }
}
