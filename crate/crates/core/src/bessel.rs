//! Modified Bessel function K_ν and the decaying solution family of
//! y'' = λ² t^m y.
//!
//! With γ = (m+2)/2, ν = 1/(2γ) and s = λ t^γ / γ, the normalized decaying
//! solution is
//!
//! ```text
//! y_λ(t) = C0 (λ^{1/γ} t)^{1/2} K_ν(s) = 2^{1-ν}/Γ(ν) · s^ν K_ν(s),
//! ```
//!
//! so everything reduces to g_μ(s) = s^μ K_μ(s) for μ ∈ {ν, 1−ν}. Large
//! arguments go through the integral K_μ(s) = ∫₀^∞ e^{−s cosh z} cosh(μz) dz
//! carried with the factor e^{−s} split off; small arguments use the
//! ascending series.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadConfig};
use crate::special::{gamma_fn, recip_gamma};

/// Where to cut the infinite K_ν integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum TailPolicy {
    /// Cut at cosh Z = 1 + (ln(1/abs_tol) + 40)/t, where the scaled integrand
    /// e^{-t(cosh z - 1)} has dropped below abs_tol·e^{-40}.
    LogTolerance,
    /// Fixed upper limit.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BesselEvalConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub z_max_policy: TailPolicy,
    /// Below this argument s^μ K_μ(s) is summed from its series.
    pub series_crossover: f64,
}

impl Default for BesselEvalConfig {
    fn default() -> Self {
        Self {
            abs_tol: 1e-14,
            rel_tol: 1e-12,
            z_max_policy: TailPolicy::LogTolerance,
            series_crossover: 1.0,
        }
    }
}

impl BesselEvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("abs_tol", self.abs_tol), ("rel_tol", self.rel_tol)] {
            if !(v > 0.0 && v <= 1e-3) {
                return Err(invalid(format!("{name} must lie in (0, 1e-3], got {v}")));
            }
        }
        if !(self.series_crossover >= 0.0 && self.series_crossover <= 2.0) {
            return Err(invalid("series crossover must lie in [0, 2]"));
        }
        Ok(())
    }

    fn quad(&self) -> QuadConfig {
        QuadConfig {
            abs_tol: 1e-300,
            rel_tol: self.rel_tol,
            max_panels: 500,
        }
    }

    fn z_max(&self, t: f64) -> f64 {
        match self.z_max_policy {
            TailPolicy::LogTolerance => (1.0 + ((1.0 / self.abs_tol).ln() + 40.0) / t).acosh(),
            TailPolicy::Fixed(z) => z,
        }
    }
}

/// e^t K_ν(t) by quadrature.
pub fn bessel_k_scaled(nu: f64, t: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(invalid(format!("bessel_k needs t > 0, got {t}")));
    }
    if !nu.is_finite() {
        return Err(invalid("bessel_k order must be finite"));
    }
    let nu = nu.abs();
    let z_max = cfg.z_max(t);
    // Integrand is flat until cosh z ~ 1 + 1/t, then decays doubly exponentially.
    let knee = (1.0 + 1.0 / t).acosh().min(0.5 * z_max);
    let f = |z: f64| (-t * (z.cosh() - 1.0)).exp() * (nu * z).cosh();
    let r = integrate_with_breaks(f, &[0.0, knee, z_max], &cfg.quad())?;
    Ok(r.value)
}

/// K_ν(t) from its integral representation, for t > 0.
pub fn bessel_k(nu: f64, t: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    Ok(bessel_k_scaled(nu, t, cfg)? * (-t).exp())
}

/// s^μ K_μ(s) from the ascending series, 0 < μ < 1.
fn g_series(mu: f64, s: f64) -> f64 {
    let x = 0.25 * s * s;
    let mut a = 0.0;
    let mut b = 0.0;
    let mut term_a = recip_gamma(1.0 - mu);
    let mut term_b = recip_gamma(1.0 + mu);
    for k in 0..60 {
        a += term_a;
        b += term_b;
        let kf = k as f64 + 1.0;
        term_a *= x / (kf * (kf - mu));
        term_b *= x / (kf * (kf + mu));
        if term_a.abs() < 1e-17 * a.abs() && term_b.abs() < 1e-17 * b.abs() {
            break;
        }
    }
    PI / (2.0 * (mu * PI).sin()) * (2f64.powf(mu) * a - 2f64.powf(-mu) * s.powf(2.0 * mu) * b)
}

/// e^s · s^μ K_μ(s), the exponentially scaled g_μ.
fn g_scaled(mu: f64, s: f64, cfg: &BesselEvalConfig) -> Result<f64> {
    if s == 0.0 {
        return Ok(2f64.powf(mu - 1.0) * gamma_fn(mu)?);
    }
    if s < cfg.series_crossover && mu > 0.0 && mu < 1.0 {
        return Ok(g_series(mu, s) * s.exp());
    }
    Ok((mu * s.ln()).exp() * bessel_k_scaled(mu, s, cfg)?)
}

/// C0 = γ^{-1/(2γ)} 2^{1-1/(2γ)} / Γ(1/(2γ)).
pub fn c0_constant(m: f64) -> Result<f64> {
    let (g, nu) = gamma_nu(m)?;
    Ok(g.powf(-nu) * 2f64.powf(1.0 - nu) / gamma_fn(nu)?)
}

/// C0' = −lim_{t→0+} y_1'(t) = (2γ)^{1-2ν} Γ(1−ν)/Γ(ν).
pub fn c0_prime(m: f64) -> Result<f64> {
    let (g, nu) = gamma_nu(m)?;
    Ok((2.0 * g).powf(1.0 - 2.0 * nu) * gamma_fn(1.0 - nu)? / gamma_fn(nu)?)
}

fn gamma_nu(m: f64) -> Result<(f64, f64)> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(invalid(format!("m must be finite and nonnegative, got {m}")));
    }
    let g = (m + 2.0) / 2.0;
    Ok((g, 1.0 / (2.0 * g)))
}

/// Selects y_λ for a given (m, λ) and carries the derived constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeSolutionHandle {
    pub m: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub nu: f64,
    pub c0: f64,
    pub c0_prime: f64,
    pub cfg: BesselEvalConfig,
    /// 2^{1-ν}/Γ(ν), so that y = prefactor · s^ν K_ν(s).
    prefactor: f64,
}

impl OdeSolutionHandle {
    pub fn new(m: f64, lambda: f64) -> Result<Self> {
        Self::with_config(m, lambda, BesselEvalConfig::default())
    }

    pub fn with_config(m: f64, lambda: f64, cfg: BesselEvalConfig) -> Result<Self> {
        cfg.validate()?;
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        let (gamma, nu) = gamma_nu(m)?;
        Ok(Self {
            m,
            lambda,
            gamma,
            nu,
            c0: c0_constant(m)?,
            c0_prime: c0_prime(m)?,
            cfg,
            prefactor: 2f64.powf(1.0 - nu) / gamma_fn(nu)?,
        })
    }

    /// Same m and configuration with a different λ.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { lambda, ..*self })
    }

    /// s = λ t^γ / γ.
    pub fn phase(&self, t: f64) -> f64 {
        self.lambda * t.powf(self.gamma) / self.gamma
    }

    /// (y_λ(t) e^{s}, s).
    pub fn y_scaled(&self, t: f64) -> Result<(f64, f64)> {
        check_time(t)?;
        let s = self.phase(t);
        Ok((self.prefactor * g_scaled(self.nu, s, &self.cfg)?, s))
    }

    /// (∂ₜy_λ(t) e^{s}, s).
    pub fn dy_scaled(&self, t: f64) -> Result<(f64, f64)> {
        check_time(t)?;
        let s = self.phase(t);
        let k = -self.prefactor * self.gamma.powf(1.0 - 2.0 * self.nu) * self.lambda.powf(1.0 / self.gamma);
        Ok((k * g_scaled(1.0 - self.nu, s, &self.cfg)?, s))
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("t must be finite and nonnegative, got {t}")));
    }
    Ok(())
}

/// y_λ(t); equals 1 at t = 0.
pub fn y_lambda(h: &OdeSolutionHandle, t: f64) -> Result<f64> {
    if t == 0.0 {
        return Ok(1.0);
    }
    let (y, s) = h.y_scaled(t)?;
    Ok(y * (-s).exp())
}

/// ∂ₜy_λ(t) via d/ds(s^ν K_ν(s)) = −s^ν K_{1−ν}(s); equals −C0' λ^{1/γ} at t = 0.
pub fn dy_lambda(h: &OdeSolutionHandle, t: f64) -> Result<f64> {
    let (dy, s) = h.dy_scaled(t)?;
    Ok(dy * (-s).exp())
}

/// Centered-difference residual y'' − λ² t^m y at `t` with step `step`.
pub fn ode_residual(h: &OdeSolutionHandle, t: f64, step: f64) -> Result<f64> {
    if !(step > 0.0 && t - step >= 0.0) {
        return Err(invalid("residual stencil must stay in t >= 0"));
    }
    let ym = y_lambda(h, t - step)?;
    let y0 = y_lambda(h, t)?;
    let yp = y_lambda(h, t + step)?;
    Ok((yp - 2.0 * y0 + ym) / (step * step) - h.lambda * h.lambda * t.powf(h.m) * y0)
}

/// Empirical envelope constants of y_λ and ∂ₜy_λ on the asymptotic range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsReport {
    /// Grid points with λ t^γ ≥ T0.
    pub t_used: Vec<f64>,
    /// y_λ / [(λ^{1/γ}t)^{−m/4} exp(−s)].
    pub y_ratio_min: f64,
    pub y_ratio_max: f64,
    /// |∂ₜy_λ| / [t^{m/2} λ y_λ].
    pub dy_ratio_min: f64,
    pub dy_ratio_max: f64,
    /// Smallest C with every ratio in [1/C, C].
    pub band_constant: f64,
    /// (max − min)/max of the y ratio.
    pub y_flatness: f64,
    pub y_decreasing: bool,
    pub dy_magnitude_decreasing: bool,
}

/// Measures the envelope bands of y_λ and its derivative on the part of
/// `t_grid` where λ t^γ ≥ `t0`.
pub fn check_y_asymptotics(h: &OdeSolutionHandle, t_grid: &[f64], t0: f64) -> Result<AsymptoticsReport> {
    if t_grid.is_empty() {
        return Err(Error::InsufficientData("empty time grid".into()));
    }
    let t_used: Vec<f64> = t_grid
        .iter()
        .copied()
        .filter(|&t| h.lambda * t.powf(h.gamma) >= t0)
        .collect();
    if t_used.is_empty() {
        return Err(Error::InsufficientData(format!("no grid point satisfies lambda t^gamma >= {t0}")));
    }
    let mut yr = Vec::with_capacity(t_used.len());
    let mut dr = Vec::with_capacity(t_used.len());
    let mut ys = Vec::with_capacity(t_used.len());
    let mut dys = Vec::with_capacity(t_used.len());
    for &t in &t_used {
        let (y_sc, s) = h.y_scaled(t)?;
        let (dy_sc, _) = h.dy_scaled(t)?;
        let x = h.lambda.powf(1.0 / h.gamma) * t;
        yr.push(y_sc * x.powf(h.m / 4.0));
        dr.push(dy_sc.abs() / (t.powf(h.m / 2.0) * h.lambda * y_sc));
        ys.push((y_sc.ln() - s, t));
        dys.push(((-dy_sc).ln() - s, t));
    }
    let min_max = |v: &[f64]| {
        v.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (y_lo, y_hi) = min_max(&yr);
    let (d_lo, d_hi) = min_max(&dr);
    let band = [y_hi, 1.0 / y_lo, d_hi, 1.0 / d_lo]
        .into_iter()
        .fold(1.0f64, f64::max);
    let decreasing = |v: &[(f64, f64)]| v.windows(2).all(|w| w[1].1 <= w[0].1 || w[1].0 < w[0].0);
    Ok(AsymptoticsReport {
        y_ratio_min: y_lo,
        y_ratio_max: y_hi,
        dy_ratio_min: d_lo,
        dy_ratio_max: d_hi,
        band_constant: band,
        y_flatness: (y_hi - y_lo) / y_hi,
        y_decreasing: decreasing(&ys),
        dy_magnitude_decreasing: decreasing(&dys),
        t_used,
    })
}
