//! Special solutions of the free equation ∂ₜ²w − t^m Δw = 0 and the cutoff
//! test functions built from them.
//!
//! * w_λ(x,t) = y_λ(t) φ_λ(x), separable and positive.
//! * W_β(x,t) = ∫₀¹ w_λ(x,t) λ^{β−1} dλ, a superposition that decays like
//!   t^{−(m+2)β/2}.
//!
//! The λ-integral is computed after the substitution λ = σ^{1/β}, which
//! absorbs the endpoint weight: ∫₀¹ F(λ)λ^{β−1}dλ = β^{−1}∫₀¹ F(σ^{1/β})dσ.
//! Since Δφ_λ = λ²φ_λ and ∂ₜ²y_λ = λ² t^m y_λ, the second derivatives of
//! W_β are t^m W_{β+2} and W_{β+2}.

use serde::{Deserialize, Serialize};

use crate::bessel::{BesselEvalConfig, OdeSolutionHandle};
use crate::eigenfunctions::{phi_derivative_scaled, phi_scaled, RadialStencil};
use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breaks, QuadConfig};

/// Default lower gate T0 on λ t^γ (resp. t^γ) for asymptotic checks.
pub const DEFAULT_T0: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SolutionKind {
    Single { lambda: f64 },
    Integrated { beta: f64 },
}

/// Selects w_{λ,m} or W_{β,m} in dimension N together with evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpecialSolutionHandle {
    pub kind: SolutionKind,
    pub m: f64,
    #[serde(rename = "N")]
    pub n: u32,
    /// λ-integration settings for the integrated kind.
    pub quadrature: QuadConfig,
    pub bessel: BesselEvalConfig,
}

impl SpecialSolutionHandle {
    pub fn single(n: u32, m: f64, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(invalid(format!("lambda must be positive, got {lambda}")));
        }
        Self::build(n, m, SolutionKind::Single { lambda })
    }

    pub fn integrated(n: u32, m: f64, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(invalid(format!("beta must be positive, got {beta}")));
        }
        Self::build(n, m, SolutionKind::Integrated { beta })
    }

    fn build(n: u32, m: f64, kind: SolutionKind) -> Result<Self> {
        if n < 1 {
            return Err(invalid("dimension N must be at least 1"));
        }
        if !(m >= 0.0) || !m.is_finite() {
            return Err(invalid(format!("m must be finite and nonnegative, got {m}")));
        }
        Ok(Self {
            kind,
            m,
            n,
            quadrature: QuadConfig {
                abs_tol: 1e-300,
                rel_tol: 1e-11,
                max_panels: 400,
            },
            bessel: BesselEvalConfig::default(),
        })
    }

    pub fn with_lambda_tolerance(mut self, rel_tol: f64) -> Self {
        self.quadrature.rel_tol = rel_tol;
        self
    }

    pub fn gamma(&self) -> f64 {
        (self.m + 2.0) / 2.0
    }

    fn ode(&self, lambda: f64) -> Result<OdeSolutionHandle> {
        OdeSolutionHandle::with_config(self.m, lambda, self.bessel)
    }

    fn beta(&self) -> Result<f64> {
        match self.kind {
            SolutionKind::Integrated { beta } => Ok(beta),
            SolutionKind::Single { .. } => Err(invalid("operation needs an integrated (W_beta) handle")),
        }
    }

    fn lambda(&self) -> Result<f64> {
        match self.kind {
            SolutionKind::Single { lambda } => Ok(lambda),
            SolutionKind::Integrated { .. } => Err(invalid("operation needs a single (w_lambda) handle")),
        }
    }
}

fn check_point(x_norm: f64, t: f64) -> Result<()> {
    if !(x_norm >= 0.0) || !x_norm.is_finite() || !(t >= 0.0) || !t.is_finite() {
        return Err(invalid(format!("need |x| >= 0 and t >= 0, got ({x_norm}, {t})")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Part {
    Value,
    TimeDerivative,
    RadialDerivative,
}

/// w_λ, ∂ₜw_λ or ∂_r w_λ at one point, combining scaled factors in log space.
fn w_part(ode: &OdeSolutionHandle, n: u32, x_norm: f64, t: f64, part: Part) -> Result<f64> {
    let lambda = ode.lambda;
    let r = lambda * x_norm;
    let (y, s) = match part {
        Part::TimeDerivative => ode.dy_scaled(t)?,
        _ => ode.y_scaled(t)?,
    };
    let phi = match part {
        Part::RadialDerivative => lambda * phi_derivative_scaled(n, r)?,
        _ => phi_scaled(n, r)?,
    };
    if y == 0.0 || phi == 0.0 {
        return Ok(0.0);
    }
    Ok(y * phi * (r - s).exp())
}

/// w_{λ,m}(x,t) = y_λ(t) φ_λ(x).
pub fn w_eval(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    check_point(x_norm, t)?;
    w_part(&h.ode(h.lambda()?)?, h.n, x_norm, t, Part::Value)
}

/// ∂ₜw_{λ,m}(x,t).
pub fn dw_dt(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    check_point(x_norm, t)?;
    w_part(&h.ode(h.lambda()?)?, h.n, x_norm, t, Part::TimeDerivative)
}

/// ∂_r w_{λ,m}(x,t).
pub fn dw_dr(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    check_point(x_norm, t)?;
    w_part(&h.ode(h.lambda()?)?, h.n, x_norm, t, Part::RadialDerivative)
}

/// ∫₀¹ (part of w_λ)(x,t) λ^{β−1} dλ.
fn lambda_integral(h: &SpecialSolutionHandle, beta: f64, x_norm: f64, t: f64, part: Part) -> Result<f64> {
    check_point(x_norm, t)?;
    let base = h.ode(1.0)?;
    let inv_beta = 1.0 / beta;
    let f = |sigma: f64| -> f64 {
        let lambda = sigma.powf(inv_beta);
        if lambda == 0.0 {
            return match part {
                Part::Value => 1.0,
                _ => 0.0,
            };
        }
        base.with_lambda(lambda)
            .and_then(|ode| w_part(&ode, h.n, x_norm, t, part))
            .unwrap_or(f64::NAN)
    };
    // Decay rate of the integrand in λ is κ = t^γ/γ − |x|; resolve λ ~ 1/κ.
    let kappa = t.powf(h.gamma()) / h.gamma() - x_norm;
    let mut breaks = vec![0.0];
    if kappa > 1.0 {
        for c in [0.25, 1.0, 4.0, 16.0, 64.0] {
            let l = c / kappa;
            if l < 1.0 {
                breaks.push(l.powf(beta));
            }
        }
    }
    breaks.push(1.0);
    let r = integrate_with_breaks(f, &breaks, &h.quadrature)?;
    if !r.value.is_finite() {
        return Err(Error::Quadrature {
            estimate: r.value,
            error: r.error,
            evaluations: r.evaluations,
        });
    }
    Ok(r.value * inv_beta)
}

/// W_{β,m}(x,t).
#[allow(non_snake_case)]
pub fn W_eval(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    lambda_integral(h, h.beta()?, x_norm, t, Part::Value)
}

/// W_{β+shift,m}(x,t) for the same handle.
#[allow(non_snake_case)]
pub fn W_shifted(h: &SpecialSolutionHandle, shift: f64, x_norm: f64, t: f64) -> Result<f64> {
    let b = h.beta()? + shift;
    if !(b > 0.0) {
        return Err(invalid("shifted beta must stay positive"));
    }
    lambda_integral(h, b, x_norm, t, Part::Value)
}

/// ∂ₜW_{β,m}(x,t).
#[allow(non_snake_case)]
pub fn dW_dt(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    lambda_integral(h, h.beta()?, x_norm, t, Part::TimeDerivative)
}

/// ∂_r W_{β,m}(x,t).
#[allow(non_snake_case)]
pub fn dW_dr(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    lambda_integral(h, h.beta()?, x_norm, t, Part::RadialDerivative)
}

/// Value and first/second derivatives of a special solution at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Jet {
    pub value: f64,
    pub dt: f64,
    pub dtt: f64,
    pub dr: f64,
    pub lap: f64,
}

/// All derivatives needed by the test-function machinery, analytically.
pub fn special_jet(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<Jet> {
    let tm = t.powf(h.m);
    match h.kind {
        SolutionKind::Single { lambda } => {
            let ode = h.ode(lambda)?;
            let value = w_part(&ode, h.n, x_norm, t, Part::Value)?;
            Ok(Jet {
                value,
                dt: w_part(&ode, h.n, x_norm, t, Part::TimeDerivative)?,
                dtt: lambda * lambda * tm * value,
                dr: w_part(&ode, h.n, x_norm, t, Part::RadialDerivative)?,
                lap: lambda * lambda * value,
            })
        }
        SolutionKind::Integrated { beta } => {
            let w2 = lambda_integral(h, beta + 2.0, x_norm, t, Part::Value)?;
            Ok(Jet {
                value: lambda_integral(h, beta, x_norm, t, Part::Value)?,
                dt: lambda_integral(h, beta, x_norm, t, Part::TimeDerivative)?,
                dtt: tm * w2,
                dr: lambda_integral(h, beta, x_norm, t, Part::RadialDerivative)?,
                lap: w2,
            })
        }
    }
}

fn eval_value(h: &SpecialSolutionHandle, x_norm: f64, t: f64) -> Result<f64> {
    match h.kind {
        SolutionKind::Single { .. } => w_eval(h, x_norm, t),
        SolutionKind::Integrated { .. } => W_eval(h, x_norm, t),
    }
}

/// Residual of ∂ₜ² − t^mΔ at one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualLevel {
    pub dt: f64,
    pub dr: f64,
    pub max_abs: f64,
    /// max_abs divided by max |∂ₜ²·| over the same samples.
    pub max_rel: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub levels: Vec<ResidualLevel>,
    /// log2 ratios of successive max_abs values.
    pub orders: Vec<f64>,
    /// Order between the last two levels.
    pub observed_order: f64,
}

/// Discrete free-equation residual under simultaneous (dt, dr) halving.
///
/// At each level the residual (u(t+dt) − 2u(t) + u(t−dt))/dt² − t^m Δ_dr u(t)
/// is formed on the radial grid [0, r_max] for each t in `t_points`.
pub fn free_residual(
    h: &SpecialSolutionHandle,
    r_max: f64,
    t_points: &[f64],
    dt0: f64,
    dr0: f64,
    levels: usize,
) -> Result<ResidualReport> {
    if t_points.is_empty() || levels < 2 {
        return Err(Error::InsufficientData("need time samples and at least two levels".into()));
    }
    if t_points.iter().any(|&t| !(t - dt0 > 0.0)) {
        return Err(Error::Precondition("time samples must satisfy t > dt0".into()));
    }
    if !(r_max >= 2.0 * dr0) {
        return Err(Error::Precondition("radial range must hold at least 3 points".into()));
    }
    let mut out = Vec::with_capacity(levels);
    for level in 0..levels {
        let scale = 0.5f64.powi(level as i32);
        let (dt, dr) = (dt0 * scale, dr0 * scale);
        let stencil = RadialStencil::covering(h.n, dr, r_max)?;
        let r = stencil.r_grid();
        let mut max_abs = 0.0f64;
        let mut max_dtt = 0.0f64;
        for &t in t_points {
            let row = |tt: f64| r.iter().map(|&x| eval_value(h, x, tt)).collect::<Result<Vec<f64>>>();
            let (um, u0, up) = (row(t - dt)?, row(t)?, row(t + dt)?);
            let lap = stencil.laplacian_into_vec(&u0);
            let tm = t.powf(h.m);
            for i in 0..r.len() {
                let dtt = (up[i] - 2.0 * u0[i] + um[i]) / (dt * dt);
                max_abs = max_abs.max((dtt - tm * lap[i]).abs());
                max_dtt = max_dtt.max(dtt.abs());
            }
        }
        out.push(ResidualLevel {
            dt,
            dr,
            max_abs,
            max_rel: max_abs / max_dtt,
        });
    }
    let orders: Vec<f64> = out.windows(2).map(|w| (w[0].max_abs / w[1].max_abs).log2()).collect();
    Ok(ResidualReport {
        observed_order: *orders.last().expect("at least two levels"),
        levels: out,
        orders,
    })
}

impl RadialStencil {
    fn laplacian_into_vec(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.laplacian_into(u, &mut out);
        out
    }
}

/// Rectangular (|x|, t) sampling used by the estimate checkers. Radii are
/// placed at fractions of the light-cone radius r0 + t^γ/γ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleLattice {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    /// Largest fraction of the cone radius sampled (strictly below 1).
    pub frac_max: f64,
    pub nx: usize,
}

impl SampleLattice {
    pub fn new(t_min: f64, t_max: f64, nt: usize, frac_max: f64, nx: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max > t_min) || nt < 2 || nx < 1 || !(0.0..1.0).contains(&frac_max) {
            return Err(invalid("malformed sample lattice"));
        }
        Ok(Self {
            t_min,
            t_max,
            nt,
            frac_max,
            nx,
        })
    }

    /// Doubles the density and extends the time range by half.
    pub fn refined(&self) -> Self {
        Self {
            t_max: self.t_max + 0.5 * (self.t_max - self.t_min),
            nt: 2 * self.nt - 1,
            nx: 2 * self.nx - 1,
            ..self.clone()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let (a, b) = (self.t_min.ln(), self.t_max.ln());
        (0..self.nt)
            .map(|i| (a + (b - a) * i as f64 / (self.nt - 1) as f64).exp())
            .collect()
    }

    /// Radius fractions in [0, frac_max], denser near the cone.
    pub fn fractions(&self) -> Vec<f64> {
        if self.nx == 1 {
            return vec![0.0];
        }
        (0..self.nx)
            .map(|j| {
                let u = j as f64 / (self.nx - 1) as f64;
                self.frac_max * (1.0 - (1.0 - u) * (1.0 - u))
            })
            .collect()
    }

    pub fn points(&self, r0: f64, gamma: f64) -> Vec<(f64, f64)> {
        let fr = self.fractions();
        self.times()
            .into_iter()
            .flat_map(|t| {
                let cone = r0 + t.powf(gamma) / gamma;
                fr.iter().map(move |f| (f * cone, t)).collect::<Vec<_>>()
            })
            .collect()
    }
}

/// A calibrated constant measured on a lattice and on its refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub samples: usize,
    /// Extremal ratio on the base lattice (a min for lower bounds, a sup for upper).
    pub constant: f64,
    pub constant_refined: f64,
    /// (|x|, t) where the refined extremum is attained.
    pub worst: (f64, f64),
    pub passed: bool,
}

/// Refined constant may move by at most this factor for a pass.
pub const STABILITY_FACTOR: f64 = 2.0;

fn calibrate<F>(points: &[(f64, f64)], refined: &[(f64, f64)], upper: bool, ratio: F) -> Result<CalibrationReport>
where
    F: Fn(f64, f64) -> Result<f64> + Sync,
{
    if points.is_empty() {
        return Err(Error::InsufficientData("no sample satisfies the time gate".into()));
    }
    let extreme = |pts: &[(f64, f64)]| -> Result<(f64, (f64, f64))> {
        use rayon::prelude::*;
        let vals = pts
            .par_iter()
            .map(|&(x, t)| ratio(x, t).map(|v| (v, (x, t))))
            .collect::<Result<Vec<_>>>()?;
        let pick = vals.into_iter().fold(None, |acc: Option<(f64, (f64, f64))>, (v, p)| match acc {
            None => Some((v, p)),
            Some((a, q)) => {
                let better = if upper { v > a } else { v < a };
                Some(if better { (v, p) } else { (a, q) })
            }
        });
        Ok(pick.expect("non-empty"))
    };
    let (c, _) = extreme(points)?;
    let (c2, worst) = extreme(refined)?;
    let stable = c2 / c <= STABILITY_FACTOR && c / c2 <= STABILITY_FACTOR;
    let valid = c.is_finite() && c2.is_finite() && c > 0.0 && c2 > 0.0;
    Ok(CalibrationReport {
        samples: points.len(),
        constant: c,
        constant_refined: c2,
        worst,
        passed: valid && stable,
    })
}

fn gated(points: Vec<(f64, f64)>, t_gate: f64) -> Vec<(f64, f64)> {
    points.into_iter().filter(|&(_, t)| t > t_gate).collect()
}

/// Lower estimate W_β(x,t) ≥ c t^{−(m+2)β/2} for t > (2T0)^{1/γ}: reports
/// min of W·t^{(m+2)β/2}.
#[allow(non_snake_case)]
pub fn check_W_lower(h: &SpecialSolutionHandle, r0: f64, lattice: &SampleLattice, t0: f64) -> Result<CalibrationReport> {
    let beta = h.beta()?;
    let g = h.gamma();
    let gate = (2.0 * t0).powf(1.0 / g);
    let pts = gated(lattice.points(r0, g), gate);
    let refined = gated(lattice.refined().points(r0, g), gate);
    calibrate(&pts, &refined, false, |x, t| {
        Ok(W_eval(h, x, t)? * t.powf((h.m + 2.0) * beta / 2.0))
    })
}

/// Interior estimate for β > N/2 − 1/(m+2): reports
/// sup of W / [t^{−m/4−(N−1)(m+2)/4}(r0 + t^γ/γ − |x|)^{N/2−β−1/(m+2)}].
#[allow(non_snake_case)]
pub fn check_W_upper_interior(
    h: &SpecialSolutionHandle,
    r0: f64,
    lattice: &SampleLattice,
    t0: f64,
) -> Result<CalibrationReport> {
    let beta = h.beta()?;
    let (m, nf, g) = (h.m, h.n as f64, h.gamma());
    let floor = nf / 2.0 - 1.0 / (m + 2.0);
    if !(beta > floor) {
        return Err(Error::Precondition(format!("interior estimate needs beta > {floor}, got {beta}")));
    }
    let gate = t0.powf(1.0 / g);
    let pts = gated(lattice.points(r0, g), gate);
    let refined = gated(lattice.refined().points(r0, g), gate);
    let e = nf / 2.0 - beta - 1.0 / (m + 2.0);
    calibrate(&pts, &refined, true, |x, t| {
        let gap = r0 + t.powf(g) / g - x;
        let bound = t.powf(-m / 4.0 - (nf - 1.0) * (m + 2.0) / 4.0) * gap.powf(e);
        Ok(W_eval(h, x, t)? / bound)
    })
}

/// Alternative estimate for N ≥ 2 and 1/2 − 1/(m+2) < β < N/2 − 1/(m+2):
/// reports sup of W / [t^{−m/4}(r0 + t^γ/γ + |x|)^{−β+1/2−1/(m+2)}].
#[allow(non_snake_case)]
pub fn check_W_upper_alt(h: &SpecialSolutionHandle, r0: f64, lattice: &SampleLattice, t0: f64) -> Result<CalibrationReport> {
    let beta = h.beta()?;
    let (m, nf, g) = (h.m, h.n as f64, h.gamma());
    if h.n < 2 {
        return Err(Error::Precondition("alternative estimate needs N >= 2".into()));
    }
    let (lo, hi) = (0.5 - 1.0 / (m + 2.0), nf / 2.0 - 1.0 / (m + 2.0));
    if !(beta > lo && beta < hi) {
        return Err(Error::Precondition(format!("alternative estimate needs beta in ({lo}, {hi}), got {beta}")));
    }
    let gate = t0.powf(1.0 / g);
    let pts = gated(lattice.points(r0, g), gate);
    let refined = gated(lattice.refined().points(r0, g), gate);
    let e = -beta + 0.5 - 1.0 / (m + 2.0);
    calibrate(&pts, &refined, true, |x, t| {
        let bound = t.powf(-m / 4.0) * (r0 + t.powf(g) / g + x).powf(e);
        Ok(W_eval(h, x, t)? / bound)
    })
}

/// Derivative estimate |∂ₜW_β| ≤ C[exp(t^{−γ}|x|) t^{−γβ−1} + t^{m/2} W_{β+1}]
/// for t > 1: reports sup of the ratio.
#[allow(non_snake_case)]
pub fn check_dW_bound(h: &SpecialSolutionHandle, r0: f64, lattice: &SampleLattice) -> Result<CalibrationReport> {
    let beta = h.beta()?;
    let (m, g) = (h.m, h.gamma());
    let pts = gated(lattice.points(r0, g), 1.0);
    let refined = gated(lattice.refined().points(r0, g), 1.0);
    calibrate(&pts, &refined, true, |x, t| {
        let a = (t.powf(-g) * x).exp() * t.powf(-g * (beta + 1.0 / g));
        let b = t.powf(m / 2.0) * W_shifted(h, 1.0, x, t)?;
        Ok(dW_dt(h, x, t)?.abs() / (a + b))
    })
}

/// Profile of the smooth time cutoff and which variant is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffConfig {
    pub radius: f64,
    pub k: u32,
    /// η* (vanishing below 1/2) instead of η.
    pub starred: bool,
}

impl CutoffConfig {
    pub fn new(radius: f64, k: u32, starred: bool) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid(format!("cutoff radius must be positive, got {radius}")));
        }
        if k < 2 {
            return Err(invalid(format!("cutoff power k must be at least 2, got {k}")));
        }
        Ok(Self { radius, k, starred })
    }

    /// Smallest admissible k for nonlinearity powers p, q: k ≥ max(2p', 2q').
    pub fn min_power(p: f64, q: f64) -> u32 {
        let dual = |x: f64| x / (x - 1.0);
        (2.0 * dual(p)).max(2.0 * dual(q)).ceil().max(2.0) as u32
    }
}

fn bump(z: f64) -> (f64, f64, f64) {
    if z <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    let b = (-1.0 / z).exp();
    let z2 = z * z;
    (b, b / z2, b * (1.0 / (z2 * z2) - 2.0 / (z2 * z)))
}

/// (η, η', η'') of the base profile at s.
pub fn eta_jet(s: f64) -> (f64, f64, f64) {
    if s < 0.5 {
        return (1.0, 0.0, 0.0);
    }
    if s >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let (f0, f1, f2) = bump(2.0 - 2.0 * s);
    let (g0, g1, g2) = bump(2.0 * s - 1.0);
    // d/ds: f' = −2B'(a), g' = 2B'(b), f'' = 4B''(a), g'' = 4B''(b).
    let (fp, fpp) = (-2.0 * f1, 4.0 * f2);
    let (gp, gpp) = (2.0 * g1, 4.0 * g2);
    let d = f0 + g0;
    let dp = fp + gp;
    let num = fp * g0 - f0 * gp;
    let nump = fpp * g0 - f0 * gpp;
    (f0 / d, num / (d * d), nump / (d * d) - 2.0 * num * dp / (d * d * d))
}

/// η(s), or η*(s) when `starred`.
pub fn eta(cfg: &CutoffConfig, s: f64) -> f64 {
    if cfg.starred && s < 0.5 {
        return 0.0;
    }
    eta_jet(s).0
}

/// (η_R, ∂ₜη_R, ∂ₜ²η_R) at time t, with η_R(t) = η(t/R).
pub fn eta_r_jet(cfg: &CutoffConfig, t: f64) -> (f64, f64, f64) {
    let s = t / cfg.radius;
    if cfg.starred && s < 0.5 {
        return (0.0, 0.0, 0.0);
    }
    let (e, e1, e2) = eta_jet(s);
    (e, e1 / cfg.radius, e2 / (cfg.radius * cfg.radius))
}

/// (η_R^k, ∂ₜ(η_R^k), ∂ₜ²(η_R^k)) at time t.
pub fn composite_eta_power(cfg: &CutoffConfig, t: f64) -> (f64, f64, f64) {
    let (e, e1, e2) = eta_r_jet(cfg, t);
    let k = cfg.k as i32;
    let kf = cfg.k as f64;
    let ek1 = e.powi(k - 1);
    (
        ek1 * e,
        kf * ek1 * e1,
        kf * (kf - 1.0) * e.powi(k - 2) * e1 * e1 + kf * ek1 * e2,
    )
}

/// χ(r) = η(1/2 + (r − a)/(2(b − a))): 1 on [0, a], 0 beyond b.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpatialCutoff {
    pub inner: f64,
    pub outer: f64,
}

impl SpatialCutoff {
    pub fn new(inner: f64, outer: f64) -> Result<Self> {
        if !(inner >= 0.0 && outer > inner) {
            return Err(invalid("spatial cutoff needs 0 <= inner < outer"));
        }
        Ok(Self { inner, outer })
    }

    /// (χ, χ', χ'').
    pub fn jet(&self, r: f64) -> (f64, f64, f64) {
        let w = 2.0 * (self.outer - self.inner);
        let (e, e1, e2) = eta_jet(0.5 + (r - self.inner) / w);
        (e, e1 / w, e2 / (w * w))
    }
}

/// Φ(x,t) = base(x,t) · χ(|x|) · η_R(t)^k. A missing base means base ≡ 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeTestFunction {
    pub base: Option<SpecialSolutionHandle>,
    pub cutoff: CutoffConfig,
    pub spatial: SpatialCutoff,
    #[serde(rename = "N")]
    pub n: u32,
}

impl CompositeTestFunction {
    pub fn new(base: Option<SpecialSolutionHandle>, cutoff: CutoffConfig, spatial: SpatialCutoff, n: u32) -> Result<Self> {
        if let Some(b) = &base {
            if b.n != n {
                return Err(invalid("base solution dimension differs from test function dimension"));
            }
        }
        Ok(Self {
            base,
            cutoff,
            spatial,
            n,
        })
    }

    /// Φ_{λ,m}: w_λ χ η_R^k, with χ ≡ 1 on the ball of radius `inner`.
    pub fn single(n: u32, m: f64, lambda: f64, cutoff: CutoffConfig, spatial: SpatialCutoff) -> Result<Self> {
        Self::new(Some(SpecialSolutionHandle::single(n, m, lambda)?), cutoff, spatial, n)
    }
}

/// Φ and the derivatives entering the weak formulation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompositeValue {
    pub value: f64,
    pub dt: f64,
    pub dtt: f64,
    pub dr: f64,
    pub lap: f64,
}

/// Evaluates Φ with analytic product-rule derivatives.
pub fn composite_eval(f: &CompositeTestFunction, x_norm: f64, t: f64) -> Result<CompositeValue> {
    check_point(x_norm, t)?;
    let (e, e1, e2) = eta_r_jet(&f.cutoff, t);
    let (c, c1, c2) = f.spatial.jet(x_norm);
    if e == 0.0 && e1 == 0.0 && e2 == 0.0 || c == 0.0 && c1 == 0.0 && c2 == 0.0 {
        return Ok(CompositeValue::default());
    }
    let b = match &f.base {
        Some(h) => special_jet(h, x_norm, t)?,
        None => Jet {
            value: 1.0,
            ..Jet::default()
        },
    };
    let k = f.cutoff.k as f64;
    let ek = e.powi(f.cutoff.k as i32);
    let ek1 = e.powi(f.cutoff.k as i32 - 1);
    let ek2 = e.powi(f.cutoff.k as i32 - 2);
    let time = b.value * ek;
    let time_t = b.dt * ek + b.value * k * ek1 * e1;
    let time_tt = b.dtt * ek + 2.0 * b.dt * k * ek1 * e1 + b.value * (k * (k - 1.0) * ek2 * e1 * e1 + k * ek1 * e2);
    let lap_chi = if x_norm > 0.0 {
        c2 + (f.n as f64 - 1.0) / x_norm * c1
    } else {
        f.n as f64 * c2
    };
    Ok(CompositeValue {
        value: time * c,
        dt: time_t * c,
        dtt: time_tt * c,
        dr: (b.dr * c + b.value * c1) * ek,
        lap: (b.lap * c + 2.0 * b.dr * c1 + b.value * lap_chi) * ek,
    })
}
