//! Radial finite-difference solver for the coupled system
//!
//! ```text
//! u_tt − t^{m1} Δu = a|v|^p,   v_tt − t^{m2} Δv = b|u|^q
//! ```
//!
//! with a variable-step leapfrog in time, blow-up detection and
//! extrapolation, finite-propagation auditing, the weak-form identity
//! against composite test functions, the Y functional, and ε sweeps.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bessel::{dy_lambda, y_lambda, OdeSolutionHandle};
use crate::eigenfunctions::{phi, phi_derivative, sphere_area, RadialStencil};
use crate::error::{invalid, Error, Result};
use crate::exponents::{propagation_envelope, ExponentConfig};
use crate::quadrature::{integrate_with_breaks, trapezoid, QuadConfig};
use crate::test_solutions::{
    composite_eta_power, composite_eval, dw_dt, w_eval, CompositeTestFunction, CompositeValue, SolutionKind,
    SpecialSolutionHandle, W_eval,
};

/// Radial profile shape on [0, r0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Profile {
    Zero,
    /// amplitude · exp(1 − 1/(1 − (r/r0)²)), peak `amplitude` at the origin.
    Bump { amplitude: f64 },
}

impl Profile {
    pub fn eval(&self, r: f64, r0: f64) -> f64 {
        match *self {
            Profile::Zero => 0.0,
            Profile::Bump { amplitude } => {
                let rho = r / r0;
                if rho >= 1.0 {
                    0.0
                } else {
                    amplitude * (1.0 - 1.0 / (1.0 - rho * rho)).exp()
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Profile::Zero) || matches!(self, Profile::Bump { amplitude } if *amplitude == 0.0)
    }
}

/// Data shapes (f₁, g₁, f₂, g₂) with common support radius r0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataProfile {
    pub f1: Profile,
    pub g1: Profile,
    pub f2: Profile,
    pub g2: Profile,
    pub r0: f64,
}

impl Default for DataProfile {
    fn default() -> Self {
        Self {
            f1: Profile::Zero,
            g1: Profile::Bump { amplitude: 1.0 },
            f2: Profile::Zero,
            g2: Profile::Bump { amplitude: 1.0 },
            r0: 1.0,
        }
    }
}

impl DataProfile {
    fn is_zero(&self) -> bool {
        self.f1.is_zero() && self.g1.is_zero() && self.f2.is_zero() && self.g2.is_zero()
    }
}

fn default_one() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Everything defining one initial-value problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub exponents: ExponentConfig,
    pub epsilon: f64,
    #[serde(default)]
    pub data: DataProfile,
    #[serde(default = "default_one")]
    pub a: f64,
    #[serde(default = "default_one")]
    pub b: f64,
    /// Source terms switched on; off gives the linear (free) system.
    #[serde(default = "default_true")]
    pub nonlinear: bool,
}

impl ProblemConfig {
    pub fn new(exponents: ExponentConfig, epsilon: f64) -> Result<Self> {
        let cfg = Self {
            exponents,
            epsilon,
            data: DataProfile::default(),
            a: 1.0,
            b: 1.0,
            nonlinear: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn linear(mut self) -> Self {
        self.nonlinear = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.exponents.validate()?;
        // ε = 0 is admitted for the trivial zero solution.
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(invalid(format!("epsilon must be finite and nonnegative, got {}", self.epsilon)));
        }
        if !(self.data.r0 > 0.0) || !self.data.r0.is_finite() {
            return Err(invalid(format!("support radius r0 must be positive, got {}", self.data.r0)));
        }
        if !(self.a > 0.0) || !(self.b > 0.0) {
            return Err(invalid("nonlinearity constants a, b must be positive"));
        }
        Ok(())
    }

    fn source_u(&self, v: f64) -> f64 {
        if self.nonlinear {
            self.a * v.abs().powf(self.exponents.p)
        } else {
            0.0
        }
    }

    fn source_v(&self, u: f64) -> f64 {
        if self.nonlinear {
            self.b * u.abs().powf(self.exponents.q)
        } else {
            0.0
        }
    }

    /// ODE blow-up rates (α_u, α_v): u ~ (T−t)^{−α_u}, v ~ (T−t)^{−α_v}.
    pub fn blowup_rates(&self) -> (f64, f64) {
        let (p, q) = (self.exponents.p, self.exponents.q);
        let d = p * q - 1.0;
        (2.0 * (p + 1.0) / d, 2.0 * (q + 1.0) / d)
    }
}

/// Discretisation and stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridParams {
    pub dr: f64,
    pub c_cfl: f64,
    pub speed_floor: f64,
    /// dt ≤ c_nl / sqrt(max(p a |v|^{p−1}, q b |u|^{q−1})).
    pub c_nl: f64,
    /// Outer radius; `None` picks one just beyond the causal region.
    pub domain_radius: Option<f64>,
    pub max_steps: usize,
    /// Keep every `store_stride`-th level in the history (0 keeps none).
    pub store_stride: usize,
    pub support_tol: f64,
}

impl Default for GridParams {
    fn default() -> Self {
        Self {
            dr: 0.02,
            c_cfl: 0.4,
            speed_floor: 0.05,
            c_nl: 0.05,
            domain_radius: None,
            max_steps: 5_000_000,
            store_stride: 0,
            support_tol: 1e-6,
        }
    }
}

impl GridParams {
    pub fn with_dr(dr: f64) -> Self {
        Self {
            dr,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dr > 0.0) || !self.dr.is_finite() {
            return Err(invalid(format!("dr must be positive, got {}", self.dr)));
        }
        if !(self.c_cfl > 0.0 && self.c_cfl < 1.0) {
            return Err(invalid(format!("c_cfl must lie in (0, 1), got {}", self.c_cfl)));
        }
        if !(self.speed_floor > 0.0) || !(self.c_nl > 0.0) || !(self.support_tol > 0.0) {
            return Err(invalid("speed floor, c_nl and support tolerance must be positive"));
        }
        Ok(())
    }

    /// Short label recorded alongside lifespans.
    pub fn dt_policy(&self) -> String {
        format!("cfl={};floor={};nl={}", self.c_cfl, self.speed_floor, self.c_nl)
    }
}

/// Outer boundary treatment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Boundary {
    Dirichlet,
    /// Values of w_λ for (u, v) at the outer radius; used by the linear oracle.
    Exact {
        u: SpecialSolutionHandle,
        v: SpecialSolutionHandle,
    },
}

/// Solution arrays at the current time level.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialField {
    pub stencil: RadialStencil,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub u_prev: Vec<f64>,
    pub v_prev: Vec<f64>,
    /// Second-order velocities at the current level.
    pub ut: Vec<f64>,
    pub vt: Vec<f64>,
    pub t: f64,
    pub dt_prev: Option<f64>,
    pub support_radius: f64,
}

/// Stepper state: problem, controls, field and cached accelerations.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub config: ProblemConfig,
    pub grid: GridParams,
    pub field: RadialField,
    pub boundary: Boundary,
    pub steps: usize,
    acc_u: Vec<f64>,
    acc_v: Vec<f64>,
    lap: Vec<f64>,
}

/// Builds the state at t = 0 with u = εf₁, v = εf₂, u_t = εg₁, v_t = εg₂.
pub fn build_problem(cfg: &ProblemConfig, grid: &GridParams, t_max: f64) -> Result<SolverState> {
    cfg.validate()?;
    grid.validate()?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(invalid(format!("T_max must be positive, got {t_max}")));
    }
    let e = &cfg.exponents;
    let required = cfg.data.r0 + propagation_envelope(e.m1, e.m2, t_max);
    let radius = match grid.domain_radius {
        Some(r) => {
            if r < required {
                return Err(Error::DomainTooSmall { required, actual: r });
            }
            r
        }
        None => 1.05 * required + 20.0 * grid.dr,
    };
    let stencil = RadialStencil::covering(e.n, grid.dr, radius)?;
    let r = stencil.r_grid();
    let d = &cfg.data;
    let eps = cfg.epsilon;
    let prof = |p: &Profile| -> Vec<f64> { r.iter().map(|&x| eps * p.eval(x, d.r0)).collect() };
    let support = if eps > 0.0 && !d.is_zero() { d.r0 } else { 0.0 };
    SolverState::from_arrays(
        *cfg,
        *grid,
        stencil,
        [prof(&d.f1), prof(&d.g1), prof(&d.f2), prof(&d.g2)],
        Boundary::Dirichlet,
        Some(support),
    )
}

/// Linear problem started from w_λ data for both components (speeds m1, m2)
/// on [0, radius], with exact boundary values.
pub fn build_special_problem(
    exponents: ExponentConfig,
    lambda: f64,
    radius: f64,
    grid: &GridParams,
) -> Result<SolverState> {
    grid.validate()?;
    let hu = SpecialSolutionHandle::single(exponents.n, exponents.m1, lambda)?;
    let hv = SpecialSolutionHandle::single(exponents.n, exponents.m2, lambda)?;
    let stencil = RadialStencil::covering(exponents.n, grid.dr, radius)?;
    let r = stencil.r_grid();
    let vals = |h: &SpecialSolutionHandle, f: fn(&SpecialSolutionHandle, f64, f64) -> Result<f64>| {
        r.iter().map(|&x| f(h, x, 0.0)).collect::<Result<Vec<f64>>>()
    };
    let data = [vals(&hu, w_eval)?, vals(&hu, dw_dt)?, vals(&hv, w_eval)?, vals(&hv, dw_dt)?];
    let cfg = ProblemConfig {
        exponents,
        epsilon: 1.0,
        data: DataProfile {
            r0: radius,
            ..DataProfile::default()
        },
        a: 1.0,
        b: 1.0,
        nonlinear: false,
    };
    SolverState::from_arrays(cfg, *grid, stencil, data, Boundary::Exact { u: hu, v: hv }, None)
}

impl SolverState {
    /// State from explicit initial arrays [u0, ut0, v0, vt0] on `stencil`.
    pub fn from_arrays(
        config: ProblemConfig,
        grid: GridParams,
        stencil: RadialStencil,
        data: [Vec<f64>; 4],
        boundary: Boundary,
        support_radius: Option<f64>,
    ) -> Result<Self> {
        let [u, ut, v, vt] = data;
        if [&u, &ut, &v, &vt].iter().any(|a| a.len() != stencil.len) {
            return Err(invalid("initial arrays must match the grid length"));
        }
        let n = stencil.len;
        let support = support_radius.unwrap_or_else(|| measure_support(&stencil, &u, &v, grid.support_tol));
        let mut state = Self {
            config,
            grid,
            field: RadialField {
                stencil,
                u_prev: u.clone(),
                v_prev: v.clone(),
                u,
                v,
                ut,
                vt,
                t: 0.0,
                dt_prev: None,
                support_radius: support,
            },
            boundary,
            steps: 0,
            acc_u: vec![0.0; n],
            acc_v: vec![0.0; n],
            lap: vec![0.0; n],
        };
        state.refresh_acceleration();
        Ok(state)
    }

    fn refresh_acceleration(&mut self) {
        let f = &self.field;
        let e = &self.config.exponents;
        let (cu, cv) = (f.t.powf(e.m1), f.t.powf(e.m2));
        f.stencil.laplacian_into(&f.u, &mut self.lap);
        for i in 0..f.u.len() {
            self.acc_u[i] = cu * self.lap[i] + self.config.source_u(f.v[i]);
        }
        f.stencil.laplacian_into(&f.v, &mut self.lap);
        for i in 0..f.v.len() {
            self.acc_v[i] = cv * self.lap[i] + self.config.source_v(f.u[i]);
        }
    }

    /// (max|u|, max|v|) at the current level.
    pub fn amplitudes(&self) -> (f64, f64) {
        (max_abs(&self.field.u), max_abs(&self.field.v))
    }

    fn speed(&self, t: f64) -> f64 {
        let e = &self.config.exponents;
        t.powf(e.m1 / 2.0).max(t.powf(e.m2 / 2.0)).max(self.grid.speed_floor)
    }

    /// Step size: the CFL condition dt · speed(t + dt) = c_cfl · dr with the
    /// (nondecreasing) floored speed taken at the end of the step, capped by
    /// the nonlinear growth rate.
    pub fn next_dt(&self) -> f64 {
        let e = &self.config.exponents;
        let t = self.field.t;
        let target = self.grid.c_cfl * self.grid.dr;
        let (mut lo, mut hi) = (0.0, target / self.speed(t));
        if hi * self.speed(t + hi) > target {
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if mid * self.speed(t + mid) > target {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi = lo;
        }
        let mut dt = hi;
        if self.config.nonlinear {
            let (au, av) = self.amplitudes();
            let rate = (e.p * self.config.a * av.powf(e.p - 1.0)).max(e.q * self.config.b * au.powf(e.q - 1.0));
            if rate > 0.0 {
                dt = dt.min(self.grid.c_nl / rate.sqrt());
            }
        }
        dt
    }

    /// Advances one level with step `dt`.
    pub fn step_by(&mut self, dt: f64) -> Result<()> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("time step must be positive, got {dt}")));
        }
        let n = self.field.u.len();
        let mut u_new = vec![0.0; n];
        let mut v_new = vec![0.0; n];
        {
            let f = &self.field;
            match f.dt_prev {
                None => {
                    // Taylor start: the t^m Δ term is already zero in acc when m > 0 at t = 0.
                    let h = 0.5 * dt * dt;
                    for i in 0..n {
                        u_new[i] = f.u[i] + dt * f.ut[i] + h * self.acc_u[i];
                        v_new[i] = f.v[i] + dt * f.vt[i] + h * self.acc_v[i];
                    }
                }
                Some(hb) => {
                    let ratio = dt / hb;
                    let h = 0.5 * dt * (dt + hb);
                    for i in 0..n {
                        u_new[i] = f.u[i] + ratio * (f.u[i] - f.u_prev[i]) + h * self.acc_u[i];
                        v_new[i] = f.v[i] + ratio * (f.v[i] - f.v_prev[i]) + h * self.acc_v[i];
                    }
                }
            }
        }
        let t_new = self.field.t + dt;
        match &self.boundary {
            Boundary::Dirichlet => {
                u_new[n - 1] = 0.0;
                v_new[n - 1] = 0.0;
            }
            Boundary::Exact { u, v } => {
                let r = self.field.stencil.radius();
                u_new[n - 1] = w_eval(u, r, t_new)?;
                v_new[n - 1] = w_eval(v, r, t_new)?;
            }
        }
        if u_new.iter().chain(v_new.iter()).any(|x| !x.is_finite()) {
            return Err(Error::Diverged {
                t: t_new,
                reason: "non-finite value in field".into(),
            });
        }
        let f = &mut self.field;
        f.u_prev = std::mem::replace(&mut f.u, u_new);
        f.v_prev = std::mem::replace(&mut f.v, v_new);
        f.t = t_new;
        f.dt_prev = Some(dt);
        self.steps += 1;
        self.refresh_acceleration();
        let f = &mut self.field;
        for i in 0..n {
            f.ut[i] = (f.u[i] - f.u_prev[i]) / dt + 0.5 * dt * self.acc_u[i];
            f.vt[i] = (f.v[i] - f.v_prev[i]) / dt + 0.5 * dt * self.acc_v[i];
        }
        f.support_radius = measure_support(&f.stencil, &f.u, &f.v, self.grid.support_tol);
        Ok(())
    }

    /// One explicit step with the adaptive dt.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.next_dt();
        self.step_by(dt)
    }

    /// Steps until exactly `t_end`, clamping the last step.
    pub fn advance_to(&mut self, t_end: f64) -> Result<()> {
        while self.field.t < t_end {
            let dt = self.next_dt();
            let rest = t_end - self.field.t;
            let h = if dt >= rest {
                rest
            } else if 2.0 * dt > rest {
                0.5 * rest
            } else {
                dt
            };
            self.step_by(h)?;
            if self.steps > self.grid.max_steps {
                return Err(Error::Diverged {
                    t: self.field.t,
                    reason: "step budget exhausted".into(),
                });
            }
        }
        Ok(())
    }

    pub fn snapshot(&self) -> Snapshot {
        let f = &self.field;
        Snapshot {
            t: f.t,
            u: f.u.clone(),
            v: f.v.clone(),
            ut: f.ut.clone(),
            vt: f.vt.clone(),
        }
    }
}

fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Largest grid radius where |u| or |v| reaches `tol`; 0 if none does.
pub fn measure_support(stencil: &RadialStencil, u: &[f64], v: &[f64], tol: f64) -> f64 {
    (0..u.len())
        .rev()
        .find(|&i| u[i].abs() >= tol || v[i].abs() >= tol)
        .map_or(0.0, |i| stencil.r(i))
}

/// Stored time level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub ut: Vec<f64>,
    pub vt: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Component {
    U,
    V,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    /// `t_est` is the extrapolated blow-up time, `t_cross` the threshold crossing.
    BlewUp {
        t_est: f64,
        t_cross: f64,
        component: Component,
    },
    ReachedTmax,
    Diverged {
        t: f64,
        reason: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub t: f64,
    pub dt: f64,
    pub amp_u: f64,
    pub amp_v: f64,
    pub support: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub max_amp_u: f64,
    pub max_amp_v: f64,
    pub steps: usize,
    pub trace: Vec<TracePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationOutcome {
    pub status: RunStatus,
    pub stencil: RadialStencil,
    pub history: Vec<Snapshot>,
    pub diagnostics: Diagnostics,
    pub threshold: f64,
    pub t_max: f64,
}

impl SimulationOutcome {
    pub fn blew_up(&self) -> bool {
        matches!(self.status, RunStatus::BlewUp { .. })
    }

    /// Blow-up time re-estimated from the trace as if `threshold` had been
    /// the stopping amplitude.
    pub fn estimate_at(&self, threshold: f64, cfg: &ProblemConfig) -> Option<f64> {
        let RunStatus::BlewUp { component, .. } = self.status else {
            return None;
        };
        let (au, av) = cfg.blowup_rates();
        let alpha = match component {
            Component::U => au,
            Component::V => av,
        };
        let amps: Vec<(f64, f64)> = self
            .diagnostics
            .trace
            .iter()
            .map(|p| {
                (
                    p.t,
                    match component {
                        Component::U => p.amp_u,
                        Component::V => p.amp_v,
                    },
                )
            })
            .collect();
        estimate_blowup_time(&amps, threshold, alpha)
    }
}

/// Extrapolated blow-up time from an amplitude trace (t, A): fits A^{−1/α}
/// linearly in t over the last two decades below `threshold` and returns
/// the zero of the fit. `None` when the trace never reaches `threshold`.
pub fn estimate_blowup_time(trace: &[(f64, f64)], threshold: f64, alpha: f64) -> Option<f64> {
    let cross = trace.iter().position(|&(_, a)| a >= threshold)?;
    let t_cross = trace[cross].0;
    let lo = threshold * 1e-2;
    let pts: Vec<(f64, f64)> = trace[..=cross]
        .iter()
        .filter(|&&(_, a)| a >= lo && a > 0.0)
        .map(|&(t, a)| (t, a.powf(-1.0 / alpha)))
        .collect();
    if pts.len() < 3 || !(alpha > 0.0) {
        return Some(t_cross);
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    if !(sxx > 0.0) {
        return Some(t_cross);
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Some(t_cross);
    }
    let t0 = mt - my / slope;
    Some(t0.max(t_cross))
}

/// Steps until an amplitude reaches `threshold`, `t_max` is reached, or the
/// run diverges. Stores history according to `grid.store_stride`.
pub fn run_until_blowup(mut state: SolverState, t_max: f64, threshold: f64) -> Result<SimulationOutcome> {
    let (au0, av0) = state.amplitudes();
    if !(threshold > 10.0 * au0.max(av0)) {
        return Err(Error::Precondition(format!(
            "threshold {threshold} must exceed ten times the initial amplitude {}",
            au0.max(av0)
        )));
    }
    let stride = state.grid.store_stride;
    let mut history = Vec::new();
    let mut trace = vec![TracePoint {
        t: 0.0,
        dt: 0.0,
        amp_u: au0,
        amp_v: av0,
        support: state.field.support_radius,
    }];
    if stride > 0 {
        history.push(state.snapshot());
    }
    let (mut max_u, mut max_v) = (au0, av0);
    let status = loop {
        if state.field.t >= t_max * (1.0 - 1e-14) {
            break RunStatus::ReachedTmax;
        }
        if state.steps >= state.grid.max_steps {
            break RunStatus::Diverged {
                t: state.field.t,
                reason: "step budget exhausted".into(),
            };
        }
        let dt = state.next_dt().min(t_max - state.field.t);
        if let Err(e) = state.step_by(dt) {
            match e {
                Error::Diverged { t, reason } => break RunStatus::Diverged { t, reason },
                other => return Err(other),
            }
        }
        let (au, av) = state.amplitudes();
        max_u = max_u.max(au);
        max_v = max_v.max(av);
        trace.push(TracePoint {
            t: state.field.t,
            dt,
            amp_u: au,
            amp_v: av,
            support: state.field.support_radius,
        });
        if stride > 0 && state.steps.is_multiple_of(stride) {
            history.push(state.snapshot());
        }
        if au >= threshold || av >= threshold {
            let component = if au / threshold >= av / threshold {
                Component::U
            } else {
                Component::V
            };
            break RunStatus::BlewUp {
                t_est: state.field.t,
                t_cross: state.field.t,
                component,
            };
        }
    };
    if stride > 0 && history.last().map(|s| s.t) != Some(state.field.t) {
        history.push(state.snapshot());
    }
    let mut outcome = SimulationOutcome {
        status,
        stencil: state.field.stencil,
        history,
        diagnostics: Diagnostics {
            max_amp_u: max_u,
            max_amp_v: max_v,
            steps: state.steps,
            trace,
        },
        threshold,
        t_max,
    };
    if let Some(t_est) = outcome.estimate_at(threshold, &state.config) {
        if let RunStatus::BlewUp { t_est: ref mut est, .. } = outcome.status {
            *est = t_est.min(t_max);
        }
    }
    Ok(outcome)
}

/// Default slack, in grid cells, for numerical precursors ahead of the front.
pub const FINITE_SPEED_CELLS: f64 = 10.0;

/// Result of checking support growth against r0 + envelope(t) + c·dr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteSpeedReport {
    pub checked: usize,
    /// Largest support − allowed radius (negative when inside).
    pub worst_excess: f64,
    pub worst_t: f64,
    pub passed: bool,
}

/// Audits the numerical support recorded at every step against the causal
/// envelope plus `c_dr` cells.
pub fn audit_finite_speed(outcome: &SimulationOutcome, cfg: &ProblemConfig, c_dr: f64) -> FiniteSpeedReport {
    let e = &cfg.exponents;
    let dr = outcome.stencil.dr;
    let r0 = if cfg.epsilon > 0.0 && !cfg.data.is_zero() { cfg.data.r0 } else { 0.0 };
    let mut worst = f64::NEG_INFINITY;
    let mut worst_t = 0.0;
    let mut checked = 0;
    for p in &outcome.diagnostics.trace {
        if p.support == 0.0 {
            worst = worst.max(-c_dr * dr);
            checked += 1;
            continue;
        }
        let allowed = r0 + propagation_envelope(e.m1, e.m2, p.t) + c_dr * dr;
        let excess = p.support - allowed;
        if excess > worst {
            worst = excess;
            worst_t = p.t;
        }
        checked += 1;
    }
    FiniteSpeedReport {
        checked,
        worst_excess: worst,
        worst_t,
        passed: worst <= 0.0,
    }
}

/// Discrete energy Σ_fields ∫ (w_t² + t^m w_r²) dx of a snapshot.
pub fn energy(snapshot: &Snapshot, stencil: &RadialStencil, cfg: &ProblemConfig) -> Result<f64> {
    let area = sphere_area(stencil.n)?;
    let r = stencil.r_grid();
    let e = &cfg.exponents;
    let part = |w: &[f64], wt: &[f64], m: f64| {
        let wr = radial_gradient(stencil, w);
        let c = snapshot.t.powf(m);
        let dens: Vec<f64> = (0..w.len())
            .map(|i| (wt[i] * wt[i] + c * wr[i] * wr[i]) * r[i].powi(stencil.n as i32 - 1))
            .collect();
        trapezoid(&r, &dens)
    };
    Ok(area * (part(&snapshot.u, &snapshot.ut, e.m1) + part(&snapshot.v, &snapshot.vt, e.m2)))
}

/// Second-order ∂_r on the grid (zero at the origin).
pub fn radial_gradient(stencil: &RadialStencil, w: &[f64]) -> Vec<f64> {
    let n = w.len();
    let h = stencil.dr;
    let mut out = vec![0.0; n];
    for i in 1..n - 1 {
        out[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h);
    out
}

/// Writes stored snapshots as CSV rows `t,r,u,v`.
pub fn write_snapshots_csv(outcome: &SimulationOutcome, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "t,r,u,v")?;
    for s in &outcome.history {
        for i in 0..s.u.len() {
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e}",
                s.t,
                outcome.stencil.r(i),
                s.u[i],
                s.v[i]
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Equation {
    First,
    Second,
}

/// Both sides of the weak identity for one equation, plus the twice
/// integrated-by-parts right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakFormReport {
    /// ∫ w_t(0)Φ(0) dx + ∬ G Φ.
    pub lhs: f64,
    /// −∬ w_t Φ_t + ∬ t^m w_r Φ_r.
    pub rhs: f64,
    /// ∫ w(0)Φ_t(0) dx + ∬ w (Φ_tt − t^m ΔΦ).
    pub rhs_ibp: f64,
}

impl WeakFormReport {
    pub fn relative_gap(&self) -> f64 {
        (self.lhs - self.rhs).abs() / self.rhs.abs().max(self.lhs.abs()).max(f64::MIN_POSITIVE)
    }
}

/// Φ and derivatives on the product grid times × radii (row per time).
pub fn tabulate_test_function(
    f: &CompositeTestFunction,
    times: &[f64],
    radii: &[f64],
) -> Result<Vec<Vec<CompositeValue>>> {
    match f.base {
        None => separable_table(f, times, radii, None),
        Some(h) => match h.kind {
            SolutionKind::Single { lambda } => {
                let ode = OdeSolutionHandle::with_config(h.m, lambda, h.bessel)?;
                separable_table(f, times, radii, Some((ode, h.n)))
            }
            SolutionKind::Integrated { .. } => times
                .par_iter()
                .map(|&t| radii.iter().map(|&r| composite_eval(f, r, t)).collect())
                .collect(),
        },
    }
}

fn separable_table(
    f: &CompositeTestFunction,
    times: &[f64],
    radii: &[f64],
    base: Option<(OdeSolutionHandle, u32)>,
) -> Result<Vec<Vec<CompositeValue>>> {
    let nf = f.n as f64;
    // Time factor y(t) η_R(t)^k and its first two derivatives.
    let time: Vec<(f64, f64, f64)> = times
        .par_iter()
        .map(|&t| {
            let (y, y1, y2) = match &base {
                Some((ode, _)) => {
                    let y = y_lambda(ode, t)?;
                    (y, dy_lambda(ode, t)?, ode.lambda * ode.lambda * t.powf(ode.m) * y)
                }
                None => (1.0, 0.0, 0.0),
            };
            let (e, e1, e2) = composite_eta_power(&f.cutoff, t);
            Ok((y * e, y1 * e + y * e1, y2 * e + 2.0 * y1 * e1 + y * e2))
        })
        .collect::<Result<_>>()?;
    // Space factor φ_λ(r) χ(r), its radial derivative and Laplacian.
    let space: Vec<(f64, f64, f64)> = radii
        .iter()
        .map(|&r| {
            let (c, c1, c2) = f.spatial.jet(r);
            let (p, p1, plap) = match &base {
                Some((ode, n)) => {
                    let l = ode.lambda;
                    let p = phi(*n, l * r)?;
                    (p, l * phi_derivative(*n, l * r)?, l * l * p)
                }
                None => (1.0, 0.0, 0.0),
            };
            let lap_c = if r > 0.0 { c2 + (nf - 1.0) / r * c1 } else { nf * c2 };
            Ok((p * c, p1 * c + p * c1, plap * c + 2.0 * p1 * c1 + p * lap_c))
        })
        .collect::<Result<_>>()?;
    Ok(time
        .iter()
        .map(|&(tv, t1, t2)| {
            space
                .iter()
                .map(|&(x, x1, xl)| CompositeValue {
                    value: tv * x,
                    dt: t1 * x,
                    dtt: t2 * x,
                    dr: tv * x1,
                    lap: tv * xl,
                })
                .collect()
        })
        .collect())
}

/// Space-time quadrature of the weak identity for the selected equation
/// over the stored history (trapezoid in r and in t).
pub fn weak_form_residual(
    outcome: &SimulationOutcome,
    cfg: &ProblemConfig,
    f: &CompositeTestFunction,
    which: Equation,
) -> Result<WeakFormReport> {
    let st = &outcome.stencil;
    let hist = &outcome.history;
    if hist.len() < 2 || hist[0].t != 0.0 {
        return Err(Error::Precondition("weak form needs a stored history starting at t = 0".into()));
    }
    if f.n != st.n {
        return Err(Error::Precondition("test function dimension differs from the grid".into()));
    }
    let t_end = hist.last().map_or(0.0, |s| s.t);
    if f.cutoff.radius > t_end * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!(
            "test function support [0, {}] exceeds the simulated horizon {t_end}",
            f.cutoff.radius
        )));
    }
    if f.spatial.outer > st.radius() {
        return Err(Error::Precondition(format!(
            "spatial cutoff {} exceeds the domain radius {}",
            f.spatial.outer,
            st.radius()
        )));
    }
    let e = &cfg.exponents;
    let m = match which {
        Equation::First => e.m1,
        Equation::Second => e.m2,
    };
    let r = st.r_grid();
    let area = sphere_area(st.n)?;
    let weight: Vec<f64> = r.iter().map(|x| area * x.powi(st.n as i32 - 1)).collect();
    let times: Vec<f64> = hist.iter().map(|s| s.t).collect();
    let table = tabulate_test_function(f, &times, &r)?;
    let pick = |s: &Snapshot| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        match which {
            Equation::First => (s.u.clone(), s.ut.clone(), s.v.iter().map(|&x| cfg.source_u(x)).collect()),
            Equation::Second => (s.v.clone(), s.vt.clone(), s.u.iter().map(|&x| cfg.source_v(x)).collect()),
        }
    };
    let rows: Vec<(f64, f64, f64)> = hist
        .par_iter()
        .zip(table.par_iter())
        .map(|(s, phi_row)| {
            let (w, wt, g) = pick(s);
            let wr = radial_gradient(st, &w);
            let c = s.t.powf(m);
            let mut src = vec![0.0; r.len()];
            let mut bulk = vec![0.0; r.len()];
            let mut ibp = vec![0.0; r.len()];
            for i in 0..r.len() {
                let p = &phi_row[i];
                src[i] = weight[i] * g[i] * p.value;
                bulk[i] = weight[i] * (-wt[i] * p.dt + c * wr[i] * p.dr);
                ibp[i] = weight[i] * w[i] * (p.dtt - c * p.lap);
            }
            (trapezoid(&r, &src), trapezoid(&r, &bulk), trapezoid(&r, &ibp))
        })
        .collect();
    let (w0, wt0, _) = pick(&hist[0]);
    let init: Vec<f64> = (0..r.len()).map(|i| weight[i] * wt0[i] * table[0][i].value).collect();
    let init_ibp: Vec<f64> = (0..r.len()).map(|i| weight[i] * w0[i] * table[0][i].dt).collect();
    let col = |k: usize| -> Vec<f64> {
        rows.iter()
            .map(|x| match k {
                0 => x.0,
                1 => x.1,
                _ => x.2,
            })
            .collect()
    };
    Ok(WeakFormReport {
        lhs: trapezoid(&r, &init) + trapezoid(&times, &col(0)),
        rhs: trapezoid(&times, &col(1)),
        rhs_ibp: trapezoid(&r, &init_ibp) + trapezoid(&times, &col(2)),
    })
}

/// Values of the Y functional and its two checks on a grid of R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YReport {
    pub radii: Vec<f64>,
    /// Y(R) by nested quadrature.
    pub y: Vec<f64>,
    /// Y(R) = ∫ S(t) K(t/R) dt, the single-integral form.
    pub y_dual: Vec<f64>,
    /// M*(R) = ∫ S(t) η*(t/R)^k dt.
    pub m_star: Vec<f64>,
    /// Central difference of Y at each R.
    pub dy_fd: Vec<f64>,
    /// ∫ S(t) η(t/R)^k dt, the dominating quantity.
    pub dominating: Vec<f64>,
    /// max |dY/dR − M*(R)/R| over the grid, divided by max M*(R)/R.
    pub identity_error: f64,
    pub dual_gap: f64,
    pub domination_holds: bool,
}

/// Time-mass S(t) = ∫𝒲(x,t) dx as a piecewise linear function on nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassProfile {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
}

impl MassProfile {
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.t.len();
        if n == 0 || t < self.t[0] || t > self.t[n - 1] {
            return 0.0;
        }
        let j = self.t.partition_point(|&x| x <= t).clamp(1, n - 1);
        let (t0, t1) = (self.t[j - 1], self.t[j]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        self.s[j - 1] * (1.0 - w) + self.s[j] * w
    }
}

/// S(t_j) = ∫ a|v|^p W_β(r, t_j) dx on every `stride`-th stored level.
pub fn mass_profile(
    outcome: &SimulationOutcome,
    cfg: &ProblemConfig,
    w: &SpecialSolutionHandle,
    stride: usize,
) -> Result<MassProfile> {
    if !matches!(w.kind, SolutionKind::Integrated { .. }) {
        return Err(invalid("Y functional needs an integrated (W_beta) handle"));
    }
    let st = &outcome.stencil;
    let r = st.r_grid();
    let area = sphere_area(st.n)?;
    let snaps: Vec<&Snapshot> = outcome.history.iter().step_by(stride.max(1)).collect();
    let s = snaps
        .par_iter()
        .map(|snap| {
            let mut dens = vec![0.0; r.len()];
            for i in 0..r.len() {
                let g = cfg.source_u(snap.v[i]);
                if g == 0.0 {
                    continue;
                }
                let wv = W_eval(w, r[i], snap.t)?;
                let val = g * wv;
                if val < 0.0 {
                    return Err(Error::Precondition(format!(
                        "negative density {val} at r = {}, t = {}",
                        r[i], snap.t
                    )));
                }
                dens[i] = area * r[i].powi(st.n as i32 - 1) * val;
            }
            Ok(trapezoid(&r, &dens))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(MassProfile {
        t: snaps.iter().map(|s| s.t).collect(),
        s,
    })
}

fn eta_pow(s: f64, k: u32) -> f64 {
    crate::test_solutions::eta_jet(s).0.powi(k as i32)
}

/// Y functional checks for a nonnegative mass S(t) supported in [0, t_end];
/// `nodes` are kinks of S used as quadrature breakpoints.
pub fn y_functional_from_mass<S: Fn(f64) -> f64 + Sync>(
    s: S,
    nodes: &[f64],
    t_end: f64,
    k: u32,
    radii: &[f64],
) -> Result<YReport> {
    if radii.iter().any(|&r| !(r > 0.0) || r > t_end * (1.0 + 1e-12)) {
        return Err(Error::Precondition(format!("Y radii must lie in (0, {t_end}]")));
    }
    let inner = QuadConfig {
        abs_tol: 1e-300,
        rel_tol: 1e-13,
        max_panels: 4000,
    };
    let outer = QuadConfig {
        rel_tol: 1e-12,
        ..inner
    };
    let breaks_in = |a: f64, b: f64, extra: &[f64]| -> Vec<f64> {
        let mut v: Vec<f64> = std::iter::once(a)
            .chain(nodes.iter().copied().filter(|&x| x > a && x < b))
            .chain(extra.iter().copied().filter(|&x| x > a && x < b))
            .chain(std::iter::once(b))
            .collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let m_star = |sigma: f64| -> Result<f64> {
        if sigma <= 0.0 {
            return Ok(0.0);
        }
        let b = sigma.min(t_end);
        let a = 0.5 * sigma;
        if b <= a {
            return Ok(0.0);
        }
        Ok(integrate_with_breaks(|t| s(t) * eta_pow(t / sigma, k), &breaks_in(a, b, &[]), &inner)?.value)
    };
    let y_of = |big_r: f64| -> Result<f64> {
        let mut kinks: Vec<f64> = nodes.iter().map(|x| 2.0 * x).collect();
        kinks.extend_from_slice(nodes);
        let br = breaks_in(0.0, big_r, &kinks);
        let mut err = None;
        let v = integrate_with_breaks(
            |sg| match m_star(sg) {
                Ok(m) if sg > 0.0 => m / sg,
                Ok(_) => 0.0,
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            },
            &br,
            &outer,
        )?
        .value;
        match err {
            Some(e) => Err(e),
            None => Ok(v),
        }
    };
    let kernel = |a: f64| -> Result<f64> {
        if a >= 1.0 {
            return Ok(0.0);
        }
        let lo = a.max(0.5);
        Ok(crate::quadrature::integrate(|b| eta_pow(b, k) / b, lo, 1.0, &inner)?.value)
    };
    let rows: Vec<[f64; 5]> = radii
        .par_iter()
        .map(|&big_r| {
            let y = y_of(big_r)?;
            let h = 1e-4 * big_r;
            let dy = (y_of(big_r + h.min(t_end - big_r).max(0.0))? - y_of(big_r - h)?)
                / (h.min(t_end - big_r).max(0.0) + h);
            let ms = m_star(big_r)?;
            let br = breaks_in(0.0, big_r, &[0.5 * big_r]);
            let mut kerr = None;
            let y_dual = integrate_with_breaks(
                |t| match kernel(t / big_r) {
                    Ok(kv) => s(t) * kv,
                    Err(e) => {
                        kerr.get_or_insert(e);
                        0.0
                    }
                },
                &br,
                &outer,
            )?
            .value;
            if let Some(e) = kerr {
                return Err(e);
            }
            let dom = integrate_with_breaks(|t| s(t) * eta_pow(t / big_r, k), &br, &inner)?.value;
            Ok([y, y_dual, ms, dy, dom])
        })
        .collect::<Result<_>>()?;
    let scale = rows
        .iter()
        .zip(radii)
        .map(|(row, &big_r)| (row[2] / big_r).abs())
        .fold(0.0f64, f64::max);
    let mut identity_error = 0.0f64;
    let mut dual_gap = 0.0f64;
    let mut holds = true;
    for (row, &big_r) in rows.iter().zip(radii) {
        if scale > 0.0 {
            identity_error = identity_error.max((row[3] - row[2] / big_r).abs() / scale);
        }
        if row[0] != 0.0 || row[1] != 0.0 {
            dual_gap = dual_gap.max((row[0] - row[1]).abs() / row[0].abs().max(row[1].abs()));
        }
        holds &= row[0] <= row[4] * (1.0 + 1e-10);
    }
    Ok(YReport {
        radii: radii.to_vec(),
        y: rows.iter().map(|r| r[0]).collect(),
        y_dual: rows.iter().map(|r| r[1]).collect(),
        m_star: rows.iter().map(|r| r[2]).collect(),
        dy_fd: rows.iter().map(|r| r[3]).collect(),
        dominating: rows.iter().map(|r| r[4]).collect(),
        identity_error,
        dual_gap,
        domination_holds: holds,
    })
}

/// Y functional of 𝒲 = a|v|^p W_β built from a stored history.
pub fn y_functional(
    outcome: &SimulationOutcome,
    cfg: &ProblemConfig,
    w: &SpecialSolutionHandle,
    k: u32,
    radii: &[f64],
    stride: usize,
) -> Result<YReport> {
    let mass = mass_profile(outcome, cfg, w, stride)?;
    let t_end = mass.t.last().copied().unwrap_or(0.0);
    y_functional_from_mass(|t| mass.eval(t), &mass.t, t_end, k, radii)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RecordStatus {
    BlewUp,
    ReachedTmax,
    Failed(String),
}

/// One point of the sampled map ε ↦ T(ε).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LifespanRecord {
    pub epsilon: f64,
    /// Extrapolated blow-up time; +∞ when no blow-up was observed.
    pub t_measured: f64,
    pub threshold_used: f64,
    pub dr: f64,
    pub dt_policy: String,
    pub status: RecordStatus,
    /// (threshold, T_est) for each robustness threshold.
    #[serde(default)]
    pub threshold_estimates: Vec<(f64, f64)>,
}

impl LifespanRecord {
    pub fn blew_up(&self) -> bool {
        self.status == RecordStatus::BlewUp && self.t_measured.is_finite()
    }

    /// (max − min)/min of the threshold estimates.
    pub fn threshold_spread(&self) -> Option<f64> {
        if self.threshold_estimates.len() < 2 {
            return None;
        }
        let lo = self.threshold_estimates.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let hi = self.threshold_estimates.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        Some((hi - lo) / lo)
    }
}

/// Grid, horizon and thresholds shared by every run in a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPolicy {
    pub grid: GridParams,
    pub t_max: f64,
    /// Robustness thresholds; the run stops at the largest.
    pub thresholds: Vec<f64>,
}

impl Default for SweepPolicy {
    fn default() -> Self {
        Self {
            grid: GridParams::default(),
            t_max: 50.0,
            thresholds: vec![1e6, 1e7, 1e8],
        }
    }
}

/// Runs one blow-up simulation per ε in parallel; records keep input order.
pub fn sweep_lifespan(base: &ProblemConfig, epsilons: &[f64], policy: &SweepPolicy) -> Vec<LifespanRecord> {
    let top = policy.thresholds.iter().copied().fold(0.0, f64::max);
    epsilons
        .par_iter()
        .map(|&eps| {
            let cfg = ProblemConfig { epsilon: eps, ..*base };
            let mut rec = LifespanRecord {
                epsilon: eps,
                t_measured: f64::INFINITY,
                threshold_used: top,
                dr: policy.grid.dr,
                dt_policy: policy.grid.dt_policy(),
                status: RecordStatus::ReachedTmax,
                threshold_estimates: Vec::new(),
            };
            let outcome = build_problem(&cfg, &policy.grid, policy.t_max)
                .and_then(|s| run_until_blowup(s, policy.t_max, top));
            match outcome {
                Err(e) => rec.status = RecordStatus::Failed(e.to_string()),
                Ok(out) => match out.status {
                    RunStatus::BlewUp { t_est, .. } => {
                        rec.status = RecordStatus::BlewUp;
                        rec.t_measured = t_est;
                        rec.threshold_estimates = policy
                            .thresholds
                            .iter()
                            .filter_map(|&th| out.estimate_at(th, &cfg).map(|t| (th, t)))
                            .collect();
                    }
                    RunStatus::ReachedTmax => {}
                    RunStatus::Diverged { t, reason } => {
                        rec.status = RecordStatus::Failed(format!("diverged at t = {t}: {reason}"))
                    }
                },
            }
            rec
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_solutions::{CutoffConfig, SpatialCutoff};

    fn cfg(n: u32, m1: f64, m2: f64, p: f64, q: f64, eps: f64) -> ProblemConfig {
        ProblemConfig::new(ExponentConfig::new(n, m1, m2, p, q).unwrap(), eps).unwrap()
    }

    #[test]
    fn zero_data_stays_zero() {
        let c = cfg(3, 1.0, 0.0, 2.0, 2.0, 0.0);
        let grid = GridParams {
            store_stride: 10,
            ..GridParams::with_dr(0.05)
        };
        let s = build_problem(&c, &grid, 1.0).unwrap();
        assert!(s.field.u.iter().all(|&x| x == 0.0));
        assert_eq!(s.field.support_radius, 0.0);
        let out = run_until_blowup(s, 1.0, 1e6).unwrap();
        assert_eq!(out.status, RunStatus::ReachedTmax);
        assert!(out.history.iter().all(|h| h.u.iter().chain(&h.v).all(|&x| x == 0.0)));
        let audit = audit_finite_speed(&out, &c, FINITE_SPEED_CELLS);
        assert!(audit.passed);
    }

    #[test]
    fn bump_support_at_start() {
        let c = cfg(2, 1.0, 0.0, 2.0, 2.0, 0.5);
        let s = build_problem(&c, &GridParams::with_dr(0.05), 1.0).unwrap();
        assert_eq!(s.field.support_radius, 1.0);
        assert_eq!(s.field.t, 0.0);
        assert!((s.field.vt[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn domain_check_uses_envelope() {
        let c = cfg(3, 2.0, 0.0, 2.0, 2.0, 1.0);
        let grid = GridParams {
            domain_radius: Some(8.9),
            ..GridParams::with_dr(0.1)
        };
        match build_problem(&c, &grid, 4.0).unwrap_err() {
            Error::DomainTooSmall { required, .. } => assert!((required - 9.0).abs() < 1e-12),
            e => panic!("unexpected {e}"),
        }
        let ok = GridParams {
            domain_radius: Some(9.0),
            ..grid
        };
        assert!(build_problem(&c, &ok, 4.0).is_ok());
    }

    #[test]
    fn first_step_is_taylor() {
        let mut c = cfg(3, 1.0, 1.0, 2.0, 3.0, 0.7);
        c.data.f1 = Profile::Bump { amplitude: 1.0 };
        c.data.f2 = Profile::Bump { amplitude: 0.5 };
        let mut s = build_problem(&c, &GridParams::with_dr(0.05), 1.0).unwrap();
        let (u0, ut0, v0) = (s.field.u.clone(), s.field.ut.clone(), s.field.v.clone());
        let dt = 0.01;
        s.step_by(dt).unwrap();
        for i in 0..u0.len() - 1 {
            let expect = u0[i] + dt * ut0[i] + 0.5 * dt * dt * v0[i].abs().powi(2);
            assert!((s.field.u[i] - expect).abs() < 1e-15, "i = {i}");
        }
    }

    #[test]
    fn blowup_estimator_on_exact_profile() {
        let (tb, alpha) = (3.0f64, 2.0);
        let trace: Vec<(f64, f64)> = (0..8000)
            .map(|i| {
                let t = tb * (1.0 - 0.998f64.powi(i));
                (t, (tb - t).powf(-alpha))
            })
            .collect();
        let est = estimate_blowup_time(&trace, 1e6, alpha).unwrap();
        assert!((est - tb).abs() < 1e-9);
        assert!(estimate_blowup_time(&trace[..10], 1e6, alpha).is_none());
    }

    #[test]
    fn wave_energy_conserved_m0() {
        let mut c = cfg(3, 0.0, 0.0, 2.0, 2.0, 1.0).linear();
        c.data.f1 = Profile::Bump { amplitude: 1.0 };
        c.data.g1 = Profile::Zero;
        let grid = GridParams {
            store_stride: 20,
            ..GridParams::with_dr(0.01)
        };
        let s = build_problem(&c, &grid, 2.0).unwrap();
        let out = run_until_blowup(s, 2.0, 1e6).unwrap();
        let e0 = energy(&out.history[0], &out.stencil, &c).unwrap();
        let drift = out
            .history
            .iter()
            .map(|h| (energy(h, &out.stencil, &c).unwrap() - e0).abs() / e0)
            .fold(0.0, f64::max);
        assert!(drift < 1e-3, "drift {drift}");
        let audit = audit_finite_speed(&out, &c, FINITE_SPEED_CELLS);
        assert!(audit.passed, "{audit:?}");
    }

    #[test]
    fn separable_table_matches_pointwise() {
        let f = CompositeTestFunction::single(
            3,
            1.0,
            0.7,
            CutoffConfig::new(2.0, 4, false).unwrap(),
            SpatialCutoff::new(2.0, 3.0).unwrap(),
        )
        .unwrap();
        let times = [0.0, 0.4, 1.1, 1.7];
        let radii = [0.0, 0.5, 2.2, 2.9];
        let table = tabulate_test_function(&f, &times, &radii).unwrap();
        for (i, &t) in times.iter().enumerate() {
            for (j, &r) in radii.iter().enumerate() {
                let p = composite_eval(&f, r, t).unwrap();
                let q = table[i][j];
                for (a, b) in [(p.value, q.value), (p.dt, q.dt), (p.dtt, q.dtt), (p.dr, q.dr), (p.lap, q.lap)] {
                    assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()), "t={t} r={r}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn weak_form_zero_data() {
        let c = cfg(2, 1.0, 0.0, 2.0, 2.0, 0.0);
        let grid = GridParams {
            store_stride: 1,
            ..GridParams::with_dr(0.1)
        };
        let out = run_until_blowup(build_problem(&c, &grid, 1.0).unwrap(), 1.0, 1e6).unwrap();
        let f = CompositeTestFunction::new(
            None,
            CutoffConfig::new(1.0, 4, false).unwrap(),
            SpatialCutoff::new(1.5, 2.0).unwrap(),
            2,
        )
        .unwrap();
        let rep = weak_form_residual(&out, &c, &f, Equation::First).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.rhs_ibp), (0.0, 0.0, 0.0));
    }

    #[test]
    fn y_functional_zero_and_bump() {
        let radii = [1.0, 2.0, 3.0];
        let z = y_functional_from_mass(|_| 0.0, &[], 4.0, 4, &radii).unwrap();
        assert!(z.y.iter().all(|&y| y == 0.0));
        // Narrow mass at t0 = 1: Y is zero until R passes t0.
        let s = |t: f64| (-((t - 1.0) / 0.02).powi(2)).exp();
        let rep = y_functional_from_mass(s, &[], 4.0, 4, &[0.9, 1.5, 2.5, 3.5]).unwrap();
        assert!(rep.y[0] < 1e-10);
        assert!(rep.y[1] > 0.0 && rep.y[3] > rep.y[2] && rep.y[2] > rep.y[1]);
        assert!(rep.identity_error < 1e-6, "{}", rep.identity_error);
        assert!(rep.domination_holds);
        assert!(rep.dual_gap < 1e-8);
    }

    #[test]
    fn mass_profile_interpolates() {
        let m = MassProfile {
            t: vec![0.0, 1.0, 3.0],
            s: vec![0.0, 2.0, 0.0],
        };
        assert_eq!(m.eval(0.5), 1.0);
        assert_eq!(m.eval(2.0), 1.0);
        assert_eq!(m.eval(3.5), 0.0);
    }
}
