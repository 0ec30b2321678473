//! Closed-form exponents, critical curves, regime classification and
//! lifespan-bound formulas.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default absolute tolerance for classifying a curve value as zero.
pub const DEFAULT_CRITICAL_TOL: f64 = 1e-9;

/// Dimension, diffusion strengths and nonlinearity powers of the system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExponentConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub m1: f64,
    pub m2: f64,
    pub p: f64,
    pub q: f64,
}

impl ExponentConfig {
    pub fn new(n: u32, m1: f64, m2: f64, p: f64, q: f64) -> Result<Self> {
        let cfg = Self { n, m1, m2, p, q };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(invalid("N must be at least 1"));
        }
        check_m(self.m1)?;
        check_m(self.m2)?;
        check_power(self.p, "p")?;
        check_power(self.q, "q")?;
        Ok(())
    }

    pub fn equal_speeds(&self) -> bool {
        self.m1 == self.m2
    }
}

fn check_m(m: f64) -> Result<()> {
    if !(m >= 0.0) || !m.is_finite() {
        return Err(invalid(format!("diffusion strength must be a finite nonnegative number, got {m}")));
    }
    Ok(())
}

fn check_power(x: f64, name: &str) -> Result<()> {
    if !(x > 1.0) || !x.is_finite() {
        return Err(invalid(format!("{name} must be a finite number > 1, got {x}")));
    }
    Ok(())
}

fn check_pq(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && q > 0.0) {
        return Err(invalid(format!("exponents must be positive, got p={p}, q={q}")));
    }
    if !(p * q > 1.0) {
        return Err(invalid(format!("need pq > 1, got pq={}", p * q)));
    }
    Ok(())
}

/// γ(m) = (m+2)/2.
pub fn gamma_exponent(m: f64) -> Result<f64> {
    check_m(m)?;
    Ok((m + 2.0) / 2.0)
}

pub fn f_ss(n: u32, m: f64, p: f64, q: f64) -> Result<f64> {
    check_m(m)?;
    check_pq(p, q)?;
    let n = n as f64;
    Ok(-(m + 2.0) * (n - 1.0) / 4.0 - m / 4.0 - m / (2.0 * q) + (p + 2.0 + 1.0 / q) / (p * q - 1.0))
}

pub fn gamma_ss(n: u32, m: f64, p: f64, q: f64) -> Result<f64> {
    Ok(f_ss(n, m, p, q)?.max(f_ss(n, m, q, p)?))
}

pub fn f_gg(n: u32, m: f64, p: f64, q: f64) -> Result<f64> {
    check_pq(p, q)?;
    let g = gamma_exponent(m)?;
    Ok(2.0 * (p + 1.0) / (p * q - 1.0) - (g * n as f64 - 1.0))
}

pub fn gamma_gg(n: u32, m: f64, p: f64, q: f64) -> Result<f64> {
    Ok(f_gg(n, m, p, q)?.max(f_gg(n, m, q, p)?))
}

/// Strauss-type curve for unequal speeds; undefined when m1 = m2.
pub fn omega_ss(cfg: &ExponentConfig) -> Result<f64> {
    if cfg.m1 > cfg.m2 {
        f_ss(cfg.n, cfg.m1, cfg.p, cfg.q)
    } else if cfg.m1 < cfg.m2 {
        f_ss(cfg.n, cfg.m2, cfg.q, cfg.p)
    } else {
        Err(Error::UndefinedForEqualSpeeds)
    }
}

/// Glassey-type curve for unequal speeds; undefined when m1 = m2.
pub fn omega_gg(cfg: &ExponentConfig) -> Result<f64> {
    if cfg.m1 > cfg.m2 {
        f_gg(cfg.n, cfg.m1, cfg.p, cfg.q)
    } else if cfg.m1 < cfg.m2 {
        f_gg(cfg.n, cfg.m2, cfg.p, cfg.q)
    } else {
        Err(Error::UndefinedForEqualSpeeds)
    }
}

/// The quadratic γ_S(N, m, ρ) whose positive root is the Strauss exponent.
pub fn gamma_s_poly(n: u32, m: f64, rho: f64) -> f64 {
    let k = (m + 2.0) * n as f64 / 2.0;
    -(k - 1.0) * rho * rho - (-k + m - 1.0) * rho + (m + 2.0)
}

/// Positive root of ρ ↦ γ_S(N, m, ρ).
pub fn rho_strauss(n: u32, m: f64) -> Result<f64> {
    check_m(m)?;
    let k = (m + 2.0) * n as f64 / 2.0;
    let a = -(k - 1.0);
    let b = k - m + 1.0;
    let c = m + 2.0;
    if a.abs() < 1e-14 {
        return Err(Error::InfiniteExponent(format!(
            "leading coefficient vanishes for N={n}, m={m}"
        )));
    }
    // a < 0 < c, so the discriminant is positive and the roots have opposite signs.
    let disc = b * b - 4.0 * a * c;
    let mut rho = (-b - disc.sqrt()) / (2.0 * a);
    let deriv = |r: f64| 2.0 * a * r + b;
    for _ in 0..2 {
        let d = deriv(rho);
        if d != 0.0 {
            rho -= gamma_s_poly(n, m, rho) / d;
        }
    }
    Ok(rho)
}

/// Classical Strauss exponent for m = 0, N ≥ 2.
pub fn rho_strauss_classical(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(Error::InfiniteExponent("Strauss exponent is infinite for N=1".into()));
    }
    let n = n as f64;
    Ok((n + 1.0 + (n * n + 10.0 * n - 7.0).sqrt()) / (2.0 * (n - 1.0)))
}

/// Conformal exponent ((m+2)N+6)/((m+2)N−2).
pub fn rho_conf(n: u32, m: f64) -> Result<f64> {
    check_m(m)?;
    let k = (m + 2.0) * n as f64;
    if !(k > 2.0) {
        return Err(invalid(format!("conformal exponent needs (m+2)N > 2, got {k}")));
    }
    Ok((k + 6.0) / (k - 2.0))
}

/// Glassey-type monomial 2 − ((m+2)N/2 − 1)(ρ − 1).
pub fn gamma_g(n: u32, m: f64, rho: f64) -> f64 {
    2.0 - ((m + 2.0) * n as f64 / 2.0 - 1.0) * (rho - 1.0)
}

/// Glassey exponent 1 + 2/(N−1).
pub fn rho_glassey(n: u32) -> Result<f64> {
    if n < 2 {
        return Err(invalid("Glassey exponent needs N >= 2"));
    }
    Ok(1.0 + 2.0 / (n as f64 - 1.0))
}

pub fn gamma_l(n: u32, m: f64, theta: f64) -> Result<f64> {
    check_m(m)?;
    if !(theta > 1.0) {
        return Err(invalid(format!("gamma_l needs theta > 1, got {theta}")));
    }
    let a = (m + 2.0) * (n as f64 - 1.0);
    Ok(m / 4.0 + a / 4.0 - a / (2.0 * theta) - 1.0 / theta)
}

fn positive_beta(beta: f64) -> Result<f64> {
    if beta > 0.0 {
        Ok(beta)
    } else {
        Err(Error::OutsideValidRange {
            value: beta,
            reason: "critical beta must be positive".into(),
        })
    }
}

/// β = N/2 − 1/(m1+2) − 1/q used for the coupled critical case.
pub fn critical_beta_system(n: u32, m1: f64, q: f64) -> Result<f64> {
    check_m(m1)?;
    check_power(q, "q")?;
    positive_beta(n as f64 / 2.0 - 1.0 / (m1 + 2.0) - 1.0 / q)
}

/// β used for the equal-speed reduction with p = q.
pub fn critical_beta_single(n: u32, m: f64, p: f64) -> Result<f64> {
    check_m(m)?;
    check_power(p, "p")?;
    let n = n as f64;
    positive_beta(-2.0 * m / (2.0 * (m + 2.0)) - m * p / (2.0 * (m + 2.0)) - (n - 1.0) * p / 2.0 + n)
}

/// max(t^γ(m1)/γ(m1), t^γ(m2)/γ(m2)).
pub fn propagation_envelope(m1: f64, m2: f64, t: f64) -> f64 {
    let g1 = (m1 + 2.0) / 2.0;
    let g2 = (m2 + 2.0) / 2.0;
    let t = t.max(0.0);
    (t.powf(g1) / g1).max(t.powf(g2) / g2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    GlasseySubcritical,
    StraussSubcritical,
    StraussCritical,
    NoBlowupPredicted,
}

impl Regime {
    pub fn code(self) -> &'static str {
        match self {
            Regime::GlasseySubcritical => "G",
            Regime::StraussSubcritical => "S",
            Regime::StraussCritical => "C",
            Regime::NoBlowupPredicted => "-",
        }
    }
}

/// Shape of a lifespan upper bound.
///
/// `PowerLaw(e)` means T ≤ A ε^{-e}; `ExpPowerLaw(e)` means T ≤ exp(A ε^{-e}).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundKind {
    PowerLaw(f64),
    ExpPowerLaw(f64),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CurveSource {
    Glassey,
    Strauss,
}

/// One applicable row of the lifespan case table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub source: CurveSource,
    pub curve_value: f64,
    pub kind: BoundKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub config: ExponentConfig,
    /// Ω_SS for unequal speeds, Γ_SS for equal speeds.
    pub omega_ss: f64,
    /// Ω_GG for unequal speeds, Γ_GG for equal speeds (diagnostic only there).
    pub omega_gg: f64,
    pub equal_speeds: bool,
    pub regime: Regime,
    /// The operative bound: the tightest applicable row.
    pub bound_kind: BoundKind,
    pub rows: Vec<BoundRow>,
    pub tol: f64,
}

impl RegimeReport {
    /// Ω behind the primary power-law bound, if any.
    pub fn primary_omega(&self) -> Option<f64> {
        match self.bound_kind {
            BoundKind::PowerLaw(e) => Some(1.0 / e),
            _ => None,
        }
    }
}

/// Applies the lifespan case tables to `cfg`.
///
/// Every applicable row is kept in `rows`; the primary bound is the power
/// law with the largest curve value when one exists, then the exponential
/// row. Curve values within `tol` of zero count as critical.
pub fn classify_regime(cfg: &ExponentConfig, tol: f64) -> Result<RegimeReport> {
    cfg.validate()?;
    if !(tol >= 0.0) {
        return Err(invalid("classification tolerance must be nonnegative"));
    }
    let ExponentConfig { n, m1, m2, p, q } = *cfg;
    let equal = cfg.equal_speeds();
    let (ss, gg) = if equal {
        (gamma_ss(n, m1, p, q)?, gamma_gg(n, m1, p, q)?)
    } else {
        (omega_ss(cfg)?, omega_gg(cfg)?)
    };
    let mut rows = Vec::new();
    let blowup = ss >= -tol;
    let critical = ss.abs() <= tol;
    if blowup {
        if !equal && gg > tol {
            rows.push(BoundRow {
                source: CurveSource::Glassey,
                curve_value: gg,
                kind: BoundKind::PowerLaw(1.0 / gg),
            });
        }
        if ss > tol {
            rows.push(BoundRow {
                source: CurveSource::Strauss,
                curve_value: ss,
                kind: BoundKind::PowerLaw(1.0 / ss),
            });
        }
        if critical && n >= 2 {
            let e = if equal {
                if p == q {
                    p * (p - 1.0)
                } else {
                    (p * (p * q - 1.0)).min(q * (p * q - 1.0))
                }
            } else if m1 > m2 {
                q * (p * q - 1.0)
            } else {
                p * (p * q - 1.0)
            };
            rows.push(BoundRow {
                source: CurveSource::Strauss,
                curve_value: ss,
                kind: BoundKind::ExpPowerLaw(e),
            });
        }
    }
    let primary = rows
        .iter()
        .filter(|r| matches!(r.kind, BoundKind::PowerLaw(_)))
        .max_by(|a, b| a.curve_value.total_cmp(&b.curve_value))
        .or_else(|| rows.iter().find(|r| matches!(r.kind, BoundKind::ExpPowerLaw(_))))
        .copied();
    let regime = match primary {
        Some(BoundRow {
            source: CurveSource::Glassey,
            ..
        }) => Regime::GlasseySubcritical,
        Some(BoundRow {
            kind: BoundKind::PowerLaw(_),
            ..
        }) => Regime::StraussSubcritical,
        Some(_) => Regime::StraussCritical,
        // Critical in one dimension: finite lifespan without a rate.
        None if blowup && critical => Regime::StraussCritical,
        None => Regime::NoBlowupPredicted,
    };
    Ok(RegimeReport {
        config: *cfg,
        omega_ss: ss,
        omega_gg: gg,
        equal_speeds: equal,
        regime,
        bound_kind: primary.map_or(BoundKind::None, |r| r.kind),
        rows,
        tol,
    })
}

/// Regime labels over a (p, q) lattice. `labels[i][j]` belongs to
/// `(p_axis[i], q_axis[j])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveGrid {
    pub n: u32,
    pub m1: f64,
    pub m2: f64,
    pub p_axis: Vec<f64>,
    pub q_axis: Vec<f64>,
    pub labels: Vec<Vec<Regime>>,
}

fn check_axis(axis: &[f64], name: &str) -> Result<()> {
    if axis.is_empty() {
        return Err(invalid(format!("{name} grid is empty")));
    }
    if axis.iter().any(|&x| !(x > 1.0) || !x.is_finite()) {
        return Err(invalid(format!("{name} grid values must be finite and > 1")));
    }
    if axis.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid(format!("{name} grid must be strictly increasing")));
    }
    Ok(())
}

pub fn region_sample(n: u32, m1: f64, m2: f64, p_grid: &[f64], q_grid: &[f64], tol: f64) -> Result<CurveGrid> {
    check_axis(p_grid, "p")?;
    check_axis(q_grid, "q")?;
    let labels = p_grid
        .iter()
        .map(|&p| {
            q_grid
                .iter()
                .map(|&q| Ok(classify_regime(&ExponentConfig::new(n, m1, m2, p, q)?, tol)?.regime))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CurveGrid {
        n,
        m1,
        m2,
        p_axis: p_grid.to_vec(),
        q_axis: q_grid.to_vec(),
        labels,
    })
}

/// `count` log-spaced points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Default region axis: log-spaced on [1.01, 10].
pub fn default_region_axis(count: usize) -> Vec<f64> {
    log_grid(1.01, 10.0, count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn gamma_exponent_values() {
        assert_eq!(gamma_exponent(0.0).unwrap(), 1.0);
        assert_eq!(gamma_exponent(2.0).unwrap(), 2.0);
        assert_eq!(gamma_exponent(1.0).unwrap(), 1.5);
        assert!(gamma_exponent(-0.1).is_err());
    }

    #[test]
    fn f_ss_examples() {
        assert!((f_ss(3, 0.0, 2.0, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((f_ss(1, 0.0, 2.0, 3.0).unwrap() - 13.0 / 15.0).abs() < 1e-15);
        let rho = 1.0 + SQRT2;
        assert!(f_ss(3, 0.0, rho, rho).unwrap().abs() < 1e-12);
        assert!(f_ss(3, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn f_gg_examples() {
        assert!((f_gg(1, 0.0, 2.0, 2.0).unwrap() - 2.0).abs() < 1e-15);
        assert!((f_gg(3, 2.0, 2.0, 2.0).unwrap() + 3.0).abs() < 1e-15);
        let g = gamma_ss(3, 0.0, 2.0, 3.0).unwrap();
        assert_eq!(g, f_ss(3, 0.0, 2.0, 3.0).unwrap().max(f_ss(3, 0.0, 3.0, 2.0).unwrap()));
    }

    #[test]
    fn omega_branches() {
        let a = ExponentConfig::new(2, 1.0, 0.0, 2.0, 3.0).unwrap();
        assert_eq!(omega_ss(&a).unwrap(), f_ss(2, 1.0, 2.0, 3.0).unwrap());
        let b = ExponentConfig::new(2, 0.0, 1.0, 2.0, 3.0).unwrap();
        assert_eq!(omega_ss(&b).unwrap(), f_ss(2, 1.0, 3.0, 2.0).unwrap());
        let c = ExponentConfig::new(2, 1.0, 1.0, 2.0, 3.0).unwrap();
        assert!(matches!(omega_ss(&c), Err(Error::UndefinedForEqualSpeeds)));
        assert!(matches!(omega_gg(&c), Err(Error::UndefinedForEqualSpeeds)));
    }

    #[test]
    fn strauss_roots() {
        assert!((rho_strauss(3, 0.0).unwrap() - (1.0 + SQRT2)).abs() < 1e-14);
        assert!((rho_strauss(2, 0.0).unwrap() - (3.0 + 17f64.sqrt()) / 2.0).abs() < 1e-14);
        for n in 2..=8 {
            let a = rho_strauss(n, 0.0).unwrap();
            let b = rho_strauss_classical(n).unwrap();
            assert!((a - b).abs() < 1e-13, "N={n}");
        }
        assert!(gamma_s_poly(3, 0.0, rho_strauss(3, 0.0).unwrap()).abs() < 1e-10);
        assert!(matches!(rho_strauss(1, 0.0), Err(Error::InfiniteExponent(_))));
    }

    #[test]
    fn conformal_and_glassey() {
        assert!((rho_conf(3, 1.0).unwrap() - 15.0 / 7.0).abs() < 1e-15);
        assert!(rho_conf(1, 0.0).is_err());
        for (n, m) in [(1, 0.0), (3, 2.0), (5, 0.5)] {
            assert_eq!(gamma_g(n, m, 1.0), 2.0);
        }
        assert_eq!(rho_glassey(3).unwrap(), 2.0);
        assert!(rho_glassey(1).is_err());
        // The Glassey monomial vanishes at ρ_G when m = 0.
        assert!(gamma_g(3, 0.0, rho_glassey(3).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn gamma_l_examples() {
        assert!((gamma_l(1, 0.0, 2.0).unwrap() + 0.5).abs() < 1e-15);
        assert!(gamma_l(2, 2.0, 2.0).unwrap().abs() < 1e-15);
        let lhs = -f_gg(3, 1.0, 3.0, 2.0).unwrap() / 3.0 + gamma_l(3, 1.0, 3.0).unwrap();
        assert!((lhs + f_ss(3, 1.0, 2.0, 3.0).unwrap()).abs() < 1e-12);
        assert!(gamma_l(3, 1.0, 1.0).is_err());
    }

    #[test]
    fn critical_betas() {
        assert!((critical_beta_system(3, 1.0, 2.0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((critical_beta_single(2, 0.0, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(
            critical_beta_system(1, 0.0, 1.5),
            Err(Error::OutsideValidRange { .. })
        ));
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(propagation_envelope(2.0, 0.0, 1.0), 1.0);
        assert_eq!(propagation_envelope(2.0, 0.0, 3.0), 4.5);
        assert_eq!(propagation_envelope(1.0, 1.0, 2.0), 2f64.powf(1.5) / 1.5);
        assert_eq!(propagation_envelope(2.0, 0.0, 4.0), 8.0);
    }

    #[test]
    fn critical_equal_speed_classification() {
        let rho = rho_strauss(3, 0.0).unwrap();
        let cfg = ExponentConfig::new(3, 0.0, 0.0, rho, rho).unwrap();
        let r = classify_regime(&cfg, DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(r.regime, Regime::StraussCritical);
        assert_eq!(r.bound_kind, BoundKind::ExpPowerLaw(rho * (rho - 1.0)));
    }

    #[test]
    fn one_dimensional_equal_speeds_power_law() {
        let cfg = ExponentConfig::new(1, 0.0, 0.0, 2.0, 2.0).unwrap();
        let r = classify_regime(&cfg, DEFAULT_CRITICAL_TOL).unwrap();
        assert!(r.omega_gg > 0.0);
        assert!(matches!(r.bound_kind, BoundKind::PowerLaw(e) if e > 0.0));
    }

    #[test]
    fn unequal_speeds_report_both_rows() {
        let cfg = ExponentConfig::new(1, 1.0, 0.0, 2.0, 2.0).unwrap();
        let r = classify_regime(&cfg, DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert!((r.omega_gg - 1.5).abs() < 1e-15);
        assert!((r.omega_ss - 1.0).abs() < 1e-15);
        assert_eq!(r.regime, Regime::GlasseySubcritical);
        assert!((r.primary_omega().unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn unequal_speed_critical_rows() {
        // Solve F_SS(3, 1, p, 1.5) = 0 for p by bisection, then classify.
        let q = 1.5;
        let f = |p: f64| f_ss(3, 1.0, p, q).unwrap();
        let (mut lo, mut hi) = (1.01, 10.0);
        assert!(f(lo) > 0.0 && f(hi) < 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid
            } else {
                hi = mid
            }
        }
        let p = 0.5 * (lo + hi);
        let a = classify_regime(&ExponentConfig::new(3, 1.0, 0.0, p, q).unwrap(), 1e-9).unwrap();
        assert_eq!(a.regime, Regime::StraussCritical);
        assert_eq!(a.bound_kind, BoundKind::ExpPowerLaw(q * (p * q - 1.0)));
        let b = classify_regime(&ExponentConfig::new(3, 0.0, 1.0, q, p).unwrap(), 1e-9).unwrap();
        assert_eq!(b.regime, Regime::StraussCritical);
        assert_eq!(b.bound_kind, BoundKind::ExpPowerLaw(q * (p * q - 1.0)));
    }

    #[test]
    fn large_powers_predict_no_blowup() {
        let cfg = ExponentConfig::new(3, 1.0, 0.0, 9.0, 9.0).unwrap();
        let r = classify_regime(&cfg, DEFAULT_CRITICAL_TOL).unwrap();
        assert!(r.omega_ss < 0.0 && r.omega_gg < 0.0);
        assert_eq!(r.regime, Regime::NoBlowupPredicted);
        assert_eq!(r.bound_kind, BoundKind::None);
    }

    #[test]
    fn region_corners() {
        let axis = default_region_axis(12);
        assert!((axis[0] - 1.01).abs() < 1e-14 && (axis[11] - 10.0).abs() < 1e-12);
        let g = region_sample(3, 1.0, 0.0, &axis, &axis, DEFAULT_CRITICAL_TOL).unwrap();
        assert_ne!(g.labels[0][0], Regime::NoBlowupPredicted);
        assert_eq!(g.labels[11][11], Regime::NoBlowupPredicted);
        let rho = rho_strauss(3, 0.0).unwrap();
        let one = region_sample(3, 0.0, 0.0, &[rho], &[rho], DEFAULT_CRITICAL_TOL).unwrap();
        assert_eq!(one.labels[0][0], Regime::StraussCritical);
        assert!(region_sample(3, 0.0, 0.0, &[], &[2.0], 1e-9).is_err());
        assert!(region_sample(3, 0.0, 0.0, &[3.0, 2.0], &[2.0], 1e-9).is_err());
    }

    proptest! {
        #[test]
        fn swap_symmetry(n in 1u32..7, m in 0.0f64..4.0, p in 1.0001f64..10.0, q in 1.0001f64..10.0) {
            prop_assert_eq!(gamma_ss(n, m, p, q).unwrap(), gamma_ss(n, m, q, p).unwrap());
            prop_assert_eq!(gamma_gg(n, m, p, q).unwrap(), gamma_gg(n, m, q, p).unwrap());
        }

        #[test]
        fn branch_symmetry(n in 1u32..7, m1 in 0.0f64..4.0, m2 in 0.0f64..4.0, p in 1.0001f64..10.0, q in 1.0001f64..10.0) {
            prop_assume!(m1 != m2);
            let a = ExponentConfig::new(n, m1, m2, p, q).unwrap();
            let b = ExponentConfig::new(n, m2, m1, q, p).unwrap();
            prop_assert_eq!(omega_ss(&a).unwrap(), omega_ss(&b).unwrap());
        }

        #[test]
        fn gamma_l_identity(n in 1u32..7, m in 0.0f64..4.0, p in 1.0001f64..10.0, q in 1.0001f64..10.0) {
            let lhs = -f_gg(n, m, q, p).unwrap() / q + gamma_l(n, m, q).unwrap();
            let rhs = -f_ss(n, m, p, q).unwrap();
            prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + rhs.abs()));
        }

        #[test]
        fn critical_is_stable_under_small_perturbation(n in 2u32..6, m in 0.0f64..3.0, dp in -1.0f64..1.0, dq in -1.0f64..1.0) {
            let rho = rho_strauss(n, m).unwrap();
            let tol = 1e-6;
            // ‖∇F_SS‖ is O(10) near the diagonal root; stay well inside tol/‖∇‖.
            let h = tol / 1e3;
            let cfg = ExponentConfig::new(n, m, m, rho + h * dp, rho + h * dq).unwrap();
            let r = classify_regime(&cfg, tol).unwrap();
            prop_assert_ne!(r.regime, Regime::NoBlowupPredicted);
        }

        #[test]
        fn power_law_exponents_positive(n in 1u32..6, m1 in 0.0f64..3.0, m2 in 0.0f64..3.0, p in 1.01f64..10.0, q in 1.01f64..10.0) {
            let r = classify_regime(&ExponentConfig::new(n, m1, m2, p, q).unwrap(), 1e-9).unwrap();
            for row in &r.rows {
                if let BoundKind::PowerLaw(e) = row.kind {
                    prop_assert!(e > 0.0);
                }
            }
            if r.regime == Regime::StraussCritical {
                prop_assert!(r.omega_ss.abs() <= 1e-9);
            }
        }
    }
}
