//! Gamma function.

use crate::error::{invalid, Result};

/// Γ(s) for s > 0.
pub fn gamma_fn(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("gamma_fn requires s > 0, got {s}")));
    }
    Ok(statrs::function::gamma::gamma(s))
}

/// ln Γ(s) for s > 0.
pub fn ln_gamma(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(invalid(format!("ln_gamma requires s > 0, got {s}")));
    }
    Ok(statrs::function::gamma::ln_gamma(s))
}

/// 1/Γ(s) on the whole real line, zero at the poles.
pub(crate) fn recip_gamma(s: f64) -> f64 {
    if s <= 0.0 && s == s.floor() {
        return 0.0;
    }
    1.0 / statrs::function::gamma::gamma(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadConfig};

    #[test]
    fn integer_and_half_values() {
        assert!((gamma_fn(1.0).unwrap() - 1.0).abs() < 1e-14);
        assert!((gamma_fn(5.0).unwrap() - 24.0).abs() < 1e-12);
        let sqrt_pi = std::f64::consts::PI.sqrt();
        assert!((gamma_fn(0.5).unwrap() - sqrt_pi).abs() < 1e-14);
    }

    #[test]
    fn matches_euler_integral() {
        for s in [0.7, 1.3, 2.5, 4.2] {
            // Substitute z = x^(1/s) so the integrand stays bounded at zero.
            let cfg = QuadConfig::with_rel_tol(1e-12);
            let head = integrate(|x: f64| (-x.powf(1.0 / s)).exp() / s, 0.0, 1.0, &cfg).unwrap().value;
            let tail = integrate(|z: f64| z.powf(s - 1.0) * (-z).exp(), 1.0, 60.0, &cfg).unwrap().value;
            let g = gamma_fn(s).unwrap();
            assert!(((head + tail) - g).abs() / g < 1e-10, "s={s}");
        }
    }

    #[test]
    fn recurrence_holds() {
        for s in [0.01, 0.3, 0.9, 3.3] {
            let lhs = gamma_fn(s + 1.0).unwrap();
            let rhs = s * gamma_fn(s).unwrap();
            assert!((lhs - rhs).abs() / lhs < 1e-13);
        }
    }

    #[test]
    fn rejects_nonpositive() {
        assert!(gamma_fn(0.0).is_err());
        assert!(gamma_fn(-1.5).is_err());
    }

    #[test]
    fn reciprocal_vanishes_at_poles() {
        assert_eq!(recip_gamma(0.0), 0.0);
        assert_eq!(recip_gamma(-2.0), 0.0);
        assert!((recip_gamma(-0.5) - 1.0 / (-2.0 * std::f64::consts::PI.sqrt())).abs() < 1e-14);
    }
}
