//! Command-line surface: `tricomi <subcommand> [flags]`.
//!
//! Configuration comes from an optional TOML file (`--config`) whose keys
//! mirror [`LabConfig`], with individual flags taking precedence. Exit codes:
//! 0 success or PASS, 1 FAIL or runtime error, 2 usage or configuration error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::bessel::{bessel_k, c0_prime, y_lambda, BesselEvalConfig, OdeSolutionHandle};
use crate::eigenfunctions::{apply_radial_laplacian, phi, RadialStencil};
use crate::error::{Error, Result};
use crate::exponents::{
    classify_regime, critical_beta_single, critical_beta_system, default_region_axis, f_gg, f_ss, gamma_gg, gamma_l,
    gamma_ss, omega_gg, omega_ss, region_sample, rho_conf, rho_glassey, rho_strauss, BoundKind, ExponentConfig,
    DEFAULT_CRITICAL_TOL,
};
use crate::simulator::{
    audit_finite_speed, build_problem, build_special_problem, energy, run_until_blowup, sweep_lifespan,
    write_snapshots_csv, DataProfile, GridParams, ProblemConfig, Profile, RunStatus, SweepPolicy,
    FINITE_SPEED_CELLS,
};
use crate::test_solutions::{
    check_W_lower, check_W_upper_alt, check_W_upper_interior, check_dW_bound, dW_dt, free_residual, w_eval, W_eval,
    SampleLattice, SpecialSolutionHandle, DEFAULT_T0,
};
use crate::toolkit::{
    compare_with_prediction, export_lifespan_plot, export_records, export_region_plot, fit_power_law, import_records,
    RecordFormat, RunManifest, Verdict,
};

/// Exponent keys as they appear in a config file; all optional so flags can
/// fill the gaps.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentKeys {
    #[serde(rename = "N")]
    pub n: Option<u32>,
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub p: Option<f64>,
    pub q: Option<f64>,
}

/// Everything a command may need, as read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LabConfig {
    pub exponents: ExponentKeys,
    /// ε for `simulate`; the whole list is used by `sweep`.
    pub epsilons: Vec<f64>,
    pub data: DataProfile,
    pub a: f64,
    pub b: f64,
    pub grid: GridParams,
    pub t_max: f64,
    pub thresholds: Vec<f64>,
    pub tol_fraction: f64,
    pub critical_tol: f64,
    pub out: Option<PathBuf>,
}

impl Default for LabConfig {
    fn default() -> Self {
        Self {
            exponents: ExponentKeys::default(),
            epsilons: (0..6).map(|i| 0.8 * 0.5f64.powi(i)).collect(),
            data: DataProfile::default(),
            a: 1.0,
            b: 1.0,
            grid: GridParams::default(),
            t_max: 60.0,
            thresholds: vec![1e6, 1e7, 1e8],
            tol_fraction: 0.25,
            critical_tol: DEFAULT_CRITICAL_TOL,
            out: None,
        }
    }
}

impl LabConfig {
    pub fn exponent_config(&self) -> Result<ExponentConfig> {
        let e = &self.exponents;
        let missing = |name: &str| Error::InvalidParameter(format!("missing exponent key {name} (config or --{name})"));
        ExponentConfig::new(
            e.n.ok_or_else(|| missing("N"))?,
            e.m1.ok_or_else(|| missing("m1"))?,
            e.m2.ok_or_else(|| missing("m2"))?,
            e.p.ok_or_else(|| missing("p"))?,
            e.q.ok_or_else(|| missing("q"))?,
        )
    }

    pub fn problem(&self, epsilon: f64) -> Result<ProblemConfig> {
        let cfg = ProblemConfig {
            exponents: self.exponent_config()?,
            epsilon,
            data: self.data,
            a: self.a,
            b: self.b,
            nonlinear: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn threshold(&self) -> f64 {
        self.thresholds.iter().copied().fold(0.0, f64::max)
    }

    fn apply(&mut self, f: &CommonFlags) {
        let e = &mut self.exponents;
        e.n = f.n.or(e.n);
        e.m1 = f.m1.or(e.m1);
        e.m2 = f.m2.or(e.m2);
        e.p = f.p.or(e.p);
        e.q = f.q.or(e.q);
        if let Some(eps) = &f.eps {
            self.epsilons = eps.clone();
        }
        if let Some(dr) = f.grid_dr {
            self.grid.dr = dr;
        }
        if let Some(t) = f.tmax {
            self.t_max = t;
        }
        if let Some(th) = f.threshold {
            self.thresholds.retain(|&x| x < th);
            self.thresholds.push(th);
        }
        if f.out.is_some() {
            self.out = f.out.clone();
        }
    }
}

#[derive(Debug, Clone, Default, clap::Args)]
struct CommonFlags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long = "N", global = true)]
    n: Option<u32>,
    #[arg(long, global = true)]
    m1: Option<f64>,
    #[arg(long, global = true)]
    m2: Option<f64>,
    #[arg(long, global = true)]
    p: Option<f64>,
    #[arg(long, global = true)]
    q: Option<f64>,
    /// Comma-separated ε values.
    #[arg(long, global = true, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    #[arg(long = "grid-dr", global = true)]
    grid_dr: Option<f64>,
    #[arg(long, global = true)]
    tmax: Option<f64>,
    /// Stopping amplitude (largest robustness threshold).
    #[arg(long, global = true)]
    threshold: Option<f64>,
    /// Output path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Parser)]
#[command(name = "tricomi", version, about = "Critical curves, special solutions and blow-up runs for weakly coupled Tricomi systems")]
struct Cli {
    #[command(flatten)]
    common: CommonFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    /// w_λ(x,t)
    W,
    /// W_β(x,t)
    Integrated,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print curve values, exponents and the lifespan regime.
    Curves,
    /// Write the (p,q) regime plot as SVG.
    Region {
        #[arg(long, default_value_t = 60)]
        points: usize,
    },
    /// Evaluate w_λ or W_β and optionally run the bound checkers.
    Special {
        #[arg(long, value_enum, default_value_t = Kind::W)]
        kind: Kind,
        /// m of the special solution (defaults to m1).
        #[arg(long)]
        m: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        x: f64,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Run the lower/upper/derivative bound checkers for W_β.
        #[arg(long)]
        check: bool,
    },
    /// Run the quick invariant suite.
    Verify,
    /// One blow-up run at the first ε.
    Simulate {
        /// Store every k-th level and dump snapshots to this CSV.
        #[arg(long)]
        snapshots: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        stride: usize,
    },
    /// ε sweep written as lifespan records.
    Sweep,
    /// Fit records and compare with the predicted bound.
    Fit {
        /// Records file (CSV or .json); defaults to --out.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Optional SVG of the fit.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
}

/// Parses `argv` (including the program name) and runs the command,
/// writing human-readable output to `out`. Returns the exit code.
pub fn run<I, T>(argv: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = write!(out, "{e}");
            return code;
        }
    };
    let cfg = match load_config(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            return 2;
        }
    };
    match dispatch(&cli.command, &cfg, out) {
        Ok(code) => code,
        Err(e @ (Error::InvalidParameter(_) | Error::Parse(_) | Error::DomainTooSmall { .. })) => {
            let _ = writeln!(out, "error: {e}");
            2
        }
        Err(e) => {
            let _ = writeln!(out, "error: {e}");
            1
        }
    }
}

fn load_config(flags: &CommonFlags) -> Result<LabConfig> {
    let mut cfg = match &flags.config {
        Some(path) => parse_config(&std::fs::read_to_string(path)?)?,
        None => LabConfig::default(),
    };
    cfg.apply(flags);
    Ok(cfg)
}

/// Parses a TOML config; unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<LabConfig> {
    toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn dispatch(cmd: &Command, cfg: &LabConfig, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Curves => curves(cfg, out),
        Command::Region { points } => region(cfg, *points, out),
        Command::Special {
            kind,
            m,
            lambda,
            beta,
            x,
            t,
            check,
        } => special(cfg, *kind, *m, *lambda, *beta, *x, *t, *check, out),
        Command::Verify => verify(out),
        Command::Simulate { snapshots, stride } => simulate(cfg, snapshots.as_deref(), *stride, out),
        Command::Sweep => sweep(cfg, out),
        Command::Fit { records, plot } => fit(cfg, records.as_deref(), plot.as_deref(), out),
    }
}

fn show(r: Result<f64>) -> String {
    match r {
        Ok(v) => format!("{v:.12}"),
        Err(e) => format!("undefined ({e})"),
    }
}

fn curves(cfg: &LabConfig, out: &mut dyn Write) -> Result<i32> {
    let e = cfg.exponent_config()?;
    let (n, m1, m2, p, q) = (e.n, e.m1, e.m2, e.p, e.q);
    writeln!(out, "config: N={n} m1={m1} m2={m2} p={p} q={q}")?;
    writeln!(out, "F_SS(N,m1,p,q) = {}", show(f_ss(n, m1, p, q)))?;
    writeln!(out, "F_SS(N,m2,q,p) = {}", show(f_ss(n, m2, q, p)))?;
    writeln!(out, "F_GG(N,m1,p,q) = {}", show(f_gg(n, m1, p, q)))?;
    writeln!(out, "F_GG(N,m2,p,q) = {}", show(f_gg(n, m2, p, q)))?;
    writeln!(out, "Gamma_SS(N,m1,p,q) = {}", show(gamma_ss(n, m1, p, q)))?;
    writeln!(out, "Gamma_GG(N,m1,p,q) = {}", show(gamma_gg(n, m1, p, q)))?;
    writeln!(out, "Omega_SS = {}", show(omega_ss(&e)))?;
    writeln!(out, "Omega_GG = {}", show(omega_gg(&e)))?;
    for (name, m) in [("m1", m1), ("m2", m2)] {
        writeln!(out, "rho_S(N,{name}) = {}", show(rho_strauss(n, m)))?;
        writeln!(out, "rho_conf(N,{name}) = {}", show(rho_conf(n, m)))?;
    }
    writeln!(out, "rho_Glassey(N) = {}", show(rho_glassey(n)))?;
    writeln!(out, "gamma_l(N,m1,q) = {}", show(gamma_l(n, m1, q)))?;
    writeln!(out, "beta_crit(system) = {}", show(critical_beta_system(n, m1, q)))?;
    writeln!(out, "beta_crit(single,p) = {}", show(critical_beta_single(n, m1, p)))?;
    let rep = classify_regime(&e, cfg.critical_tol)?;
    writeln!(out, "regime = {:?} [{}]", rep.regime, rep.regime.code())?;
    for row in &rep.rows {
        writeln!(out, "row: {:?} curve value {:.12} bound {}", row.source, row.curve_value, bound(row.kind))?;
    }
    writeln!(out, "bound = {}", bound(rep.bound_kind))?;
    Ok(0)
}

fn bound(k: BoundKind) -> String {
    match k {
        BoundKind::PowerLaw(x) => format!("T <= A eps^-{x:.12}"),
        BoundKind::ExpPowerLaw(x) => format!("T <= exp(A eps^-{x:.12})"),
        BoundKind::None => "none".into(),
    }
}

fn out_path(cfg: &LabConfig, default: &str) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn manifest_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn region(cfg: &LabConfig, points: usize, out: &mut dyn Write) -> Result<i32> {
    let e = cfg.exponent_config()?;
    if points < 2 {
        return Err(Error::InvalidParameter("region needs at least 2 points per axis".into()));
    }
    let axis = default_region_axis(points);
    let grid = region_sample(e.n, e.m1, e.m2, &axis, &axis, cfg.critical_tol)?;
    let path = out_path(cfg, "region.svg");
    export_region_plot(&grid, &path)?;
    RunManifest::new("region", cfg, vec![path.clone()])?.write(&manifest_path(&path))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn special(
    cfg: &LabConfig,
    kind: Kind,
    m: Option<f64>,
    lambda: f64,
    beta: f64,
    x: f64,
    t: f64,
    check: bool,
    out: &mut dyn Write,
) -> Result<i32> {
    let n = cfg.exponents.n.unwrap_or(3);
    let m = m.or(cfg.exponents.m1).unwrap_or(1.0);
    match kind {
        Kind::W => {
            let h = SpecialSolutionHandle::single(n, m, lambda)?;
            writeln!(out, "w_lambda(N={n}, m={m}, lambda={lambda}) at |x|={x}, t={t}: {:.15e}", w_eval(&h, x, t)?)?;
        }
        Kind::Integrated => {
            let h = SpecialSolutionHandle::integrated(n, m, beta)?;
            writeln!(out, "W_beta(N={n}, m={m}, beta={beta}) at |x|={x}, t={t}: {:.15e}", W_eval(&h, x, t)?)?;
            writeln!(out, "dW/dt: {:.15e}", dW_dt(&h, x, t)?)?;
        }
    }
    if !check {
        return Ok(0);
    }
    let h = SpecialSolutionHandle::integrated(n, m, beta)?;
    let lattice = SampleLattice::new(2.0, 20.0, 8, 0.95, 6)?;
    let r0 = 1.0;
    let reports = [
        ("W lower bound", check_W_lower(&h, r0, &lattice, DEFAULT_T0)),
        ("W upper bound (interior)", check_W_upper_interior(&h, r0, &lattice, DEFAULT_T0)),
        ("W upper bound (alternate)", check_W_upper_alt(&h, r0, &lattice, DEFAULT_T0)),
        ("dW/dt bound", check_dW_bound(&h, r0, &lattice)),
    ];
    let mut ok = true;
    for (name, rep) in reports {
        match rep {
            Ok(r) => {
                ok &= r.passed;
                writeln!(
                    out,
                    "{} {name}: constant {:.4e}, refined {:.4e}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.constant,
                    r.constant_refined
                )?;
            }
            Err(Error::Precondition(msg)) => writeln!(out, "SKIP {name}: {msg}")?,
            Err(e) => {
                ok = false;
                writeln!(out, "FAIL {name}: {e}")?;
            }
        }
    }
    Ok(if ok { 0 } else { 1 })
}

/// One named check of the quick suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &str, f: impl FnOnce() -> Result<(bool, String)>) -> SuiteCheck {
    let (passed, detail) = f().unwrap_or_else(|e| (false, format!("error: {e}")));
    SuiteCheck {
        name: name.into(),
        passed,
        detail,
    }
}

fn order(errs: &[f64]) -> Vec<f64> {
    errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

fn in_band(orders: &[f64], lo: f64, hi: f64) -> bool {
    orders.last().is_some_and(|&o| o >= lo && o <= hi)
}

/// The invariant suite behind `verify`: anchors, convergence orders, curve
/// algebra and a short simulator oracle. Takes well under a minute.
pub fn invariant_suite() -> Vec<SuiteCheck> {
    let mut v = Vec::new();
    v.push(check("bessel K_1/2 closed form", || {
        let cfg = BesselEvalConfig::default();
        let mut worst = 0.0f64;
        for t in [0.05, 0.5, 1.0, 5.0, 50.0] {
            let exact = (std::f64::consts::PI / (2.0 * t)).sqrt() * (-t).exp();
            worst = worst.max((bessel_k(0.5, t, &cfg)? - exact).abs() / exact);
        }
        Ok((worst < 1e-8, format!("max rel err {worst:.2e}")))
    }));
    v.push(check("y_lambda m=0 exponential", || {
        let mut worst = 0.0f64;
        for lambda in [0.1, 1.0, 5.0] {
            let h = OdeSolutionHandle::new(0.0, lambda)?;
            for i in 0..=50 {
                let t = 0.2 * i as f64;
                worst = worst.max((y_lambda(&h, t)? - (-lambda * t).exp()).abs());
            }
        }
        Ok((worst < 1e-8, format!("max abs err {worst:.2e}")))
    }));
    v.push(check("y_lambda ODE residual order", || {
        let mut detail = String::new();
        let mut ok = true;
        for m in [1.0, 2.0] {
            let h = OdeSolutionHandle::new(m, 1.0)?;
            let errs: Vec<f64> = [0.04, 0.02, 0.01]
                .iter()
                .map(|&s| ode_residual_max(&h, s))
                .collect::<Result<_>>()?;
            let o = order(&errs);
            ok &= in_band(&o, 1.7, 2.3);
            detail += &format!("m={m}: {:.3} ", o.last().copied().unwrap_or(f64::NAN));
        }
        Ok((ok, detail))
    }));
    v.push(check("phi N=3 closed form", || {
        let mut worst = 0.0f64;
        for r in [0.1f64, 1.0, 5.0, 20.0] {
            let exact = r.sinh() / r;
            worst = worst.max((phi(3, r)? - exact).abs() / exact);
        }
        Ok((worst < 1e-10, format!("max rel err {worst:.2e}")))
    }));
    v.push(check("eigenfunction identity order", || {
        let mut ok = true;
        let mut detail = String::new();
        for n in 1..=4u32 {
            let errs: Vec<f64> = [0.1, 0.05, 0.025]
                .iter()
                .map(|&dr| {
                    let st = RadialStencil::covering(n, dr, 4.0)?;
                    let f: Vec<f64> = st.r_grid().iter().map(|&r| phi(n, r)).collect::<Result<_>>()?;
                    let lap = apply_radial_laplacian(&st, &f)?;
                    Ok((0..st.len - 1).map(|i| (lap[i] - f[i]).abs() / f[i]).fold(0.0, f64::max))
                })
                .collect::<Result<_>>()?;
            let o = order(&errs);
            ok &= in_band(&o, 1.7, 2.3);
            detail += &format!("N={n}: {:.3} ", o.last().copied().unwrap_or(f64::NAN));
        }
        Ok((ok, detail))
    }));
    v.push(check("free-equation residual order", || {
        let w = SpecialSolutionHandle::single(3, 1.0, 1.0)?;
        let big = SpecialSolutionHandle::integrated(3, 1.0, 1.0)?;
        let rw = free_residual(&w, 3.0, &[0.5, 1.0, 1.5], 0.1, 0.1, 3)?;
        let rb = free_residual(&big, 3.0, &[1.0, 1.5], 0.1, 0.1, 3)?;
        let ok = (rw.observed_order - 2.0).abs() <= 0.3 && (rb.observed_order - 2.0).abs() <= 0.3;
        Ok((ok, format!("w: {:.3}, W: {:.3}", rw.observed_order, rb.observed_order)))
    }));
    v.push(check("critical curve algebra", || {
        let mut worst = 0.0f64;
        for n in 2..=6u32 {
            for m in [0.0, 1.0, 2.0, 3.0] {
                let rho = rho_strauss(n, m)?;
                worst = worst.max(f_ss(n, m, rho, rho)?.abs());
            }
        }
        let e = ExponentConfig::new(3, 1.0, 0.0, 2.0, 3.0)?;
        let sw = ExponentConfig::new(3, 0.0, 1.0, 3.0, 2.0)?;
        let sym = omega_ss(&e)? == omega_ss(&sw)?;
        Ok((worst < 1e-8 && sym, format!("max |F_SS(rho_S)| {worst:.2e}, Omega_SS swap symmetry {sym}")))
    }));
    v.push(check("C0' limit", || {
        let h = OdeSolutionHandle::new(1.0, 1.0)?;
        let s = 1e-6;
        let fd = (1.0 - y_lambda(&h, s)?) / s;
        let c = c0_prime(1.0)?;
        Ok(((fd - c).abs() < 1e-4, format!("-y'(0) ~ {fd:.6}, C0' = {c:.6}")))
    }));
    v.push(check("simulator linear oracle order", || {
        let e = ExponentConfig::new(3, 1.0, 1.0, 2.0, 2.0)?;
        let h = SpecialSolutionHandle::single(3, 1.0, 1.0)?;
        let errs: Vec<f64> = [0.01, 0.005, 0.0025]
            .iter()
            .map(|&dr| {
                let mut s = build_special_problem(e, 1.0, 3.0, &GridParams::with_dr(dr))?;
                s.advance_to(1.0)?;
                let r = s.field.stencil.r_grid();
                r.iter()
                    .enumerate()
                    .map(|(i, &x)| Ok((s.field.u[i] - w_eval(&h, x, 1.0)?).abs()))
                    .try_fold(0.0f64, |m, e: Result<f64>| Ok(m.max(e?)))
            })
            .collect::<Result<_>>()?;
        let o = order(&errs);
        Ok((in_band(&o, 1.7, 2.3), format!("orders {o:.3?}")))
    }));
    v.push(check("simulator energy and propagation", || {
        let mut c = ProblemConfig::new(ExponentConfig::new(3, 0.0, 0.0, 2.0, 2.0)?, 1.0)?.linear();
        c.data.f1 = Profile::Bump { amplitude: 1.0 };
        let grid = GridParams {
            store_stride: 20,
            ..GridParams::with_dr(0.01)
        };
        let out = run_until_blowup(build_problem(&c, &grid, 2.0)?, 2.0, 1e6)?;
        let e0 = energy(&out.history[0], &out.stencil, &c)?;
        let mut drift = 0.0f64;
        for s in &out.history {
            drift = drift.max((energy(s, &out.stencil, &c)? - e0).abs() / e0);
        }
        let audit = audit_finite_speed(&out, &c, FINITE_SPEED_CELLS);
        Ok((
            drift < 1e-3 && audit.passed,
            format!("energy drift {drift:.2e}, support excess {:.3e}", audit.worst_excess),
        ))
    }));
    v
}

fn ode_residual_max(h: &OdeSolutionHandle, step: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for t in [0.5, 1.0, 1.5, 2.0] {
        worst = worst.max(crate::bessel::ode_residual(h, t, step)?.abs());
    }
    Ok(worst)
}

fn verify(out: &mut dyn Write) -> Result<i32> {
    let checks = invariant_suite();
    let mut ok = true;
    for c in &checks {
        ok &= c.passed;
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
    }
    writeln!(out, "{}/{} checks passed", checks.iter().filter(|c| c.passed).count(), checks.len())?;
    Ok(if ok { 0 } else { 1 })
}

fn first_eps(cfg: &LabConfig) -> Result<f64> {
    cfg.epsilons
        .first()
        .copied()
        .ok_or_else(|| Error::InvalidParameter("no epsilon given".into()))
}

fn simulate(cfg: &LabConfig, snapshots: Option<&Path>, stride: usize, out: &mut dyn Write) -> Result<i32> {
    let eps = first_eps(cfg)?;
    let problem = cfg.problem(eps)?;
    let mut grid = cfg.grid;
    if snapshots.is_some() {
        grid.store_stride = stride.max(1);
    }
    let state = build_problem(&problem, &grid, cfg.t_max)?;
    let threshold = cfg.threshold();
    let outcome = run_until_blowup(state, cfg.t_max, threshold)?;
    match &outcome.status {
        RunStatus::BlewUp {
            t_est,
            t_cross,
            component,
        } => {
            writeln!(out, "blow-up: T_est = {t_est:.10}, crossing at {t_cross:.10} ({component:?})")?;
            for &th in &cfg.thresholds {
                if let Some(t) = outcome.estimate_at(th, &problem) {
                    writeln!(out, "  threshold {th:e}: T_est = {t:.10}")?;
                }
            }
        }
        RunStatus::ReachedTmax => writeln!(out, "no blow-up before T_max = {}", cfg.t_max)?,
        RunStatus::Diverged { t, reason } => writeln!(out, "diverged at t = {t}: {reason}")?,
    }
    let d = &outcome.diagnostics;
    writeln!(out, "steps {}, max |u| {:.4e}, max |v| {:.4e}", d.steps, d.max_amp_u, d.max_amp_v)?;
    let audit = audit_finite_speed(&outcome, &problem, FINITE_SPEED_CELLS);
    writeln!(
        out,
        "finite propagation audit: {} (worst excess {:.3e} at t = {:.4})",
        if audit.passed { "PASS" } else { "FAIL" },
        audit.worst_excess,
        audit.worst_t
    )?;
    let mut outputs = Vec::new();
    if let Some(p) = snapshots {
        write_snapshots_csv(&outcome, p)?;
        writeln!(out, "wrote {}", p.display())?;
        outputs.push(p.to_path_buf());
        RunManifest::new("simulate", cfg, outputs)?.write(&manifest_path(p))?;
    }
    Ok(if audit.passed { 0 } else { 1 })
}

fn sweep(cfg: &LabConfig, out: &mut dyn Write) -> Result<i32> {
    let base = cfg.problem(first_eps(cfg)?)?;
    if cfg.epsilons.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::InvalidParameter("sweep epsilons must be positive".into()));
    }
    let policy = SweepPolicy {
        grid: cfg.grid,
        t_max: cfg.t_max,
        thresholds: cfg.thresholds.clone(),
    };
    let records = sweep_lifespan(&base, &cfg.epsilons, &policy);
    for r in &records {
        writeln!(
            out,
            "eps {:.6e}: T = {:.10} ({:?}) threshold spread {}",
            r.epsilon,
            r.t_measured,
            r.status,
            r.threshold_spread().map_or("n/a".into(), |s| format!("{s:.2e}"))
        )?;
    }
    let path = out_path(cfg, "lifespans.csv");
    export_records(&records, &path, RecordFormat::Csv)?;
    RunManifest::new("sweep", cfg, vec![path.clone()])?.write(&manifest_path(&path))?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(0)
}

fn fit(cfg: &LabConfig, records: Option<&Path>, plot: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let path = records
        .map(Path::to_path_buf)
        .unwrap_or_else(|| out_path(cfg, "lifespans.csv"));
    let recs = import_records(&path)?;
    let fit = fit_power_law(&recs)?;
    let report = classify_regime(&cfg.exponent_config()?, cfg.critical_tol)?;
    let cmp = compare_with_prediction(&fit, &report, cfg.tol_fraction)?;
    writeln!(
        out,
        "fit: slope {:.6} +- {:.6} over {} points ({} excluded)",
        fit.slope,
        fit.stderr,
        fit.n_points,
        fit.excluded.len()
    )?;
    for x in &fit.excluded {
        writeln!(out, "  excluded eps {:.6e}: {}", x.epsilon, x.reason)?;
    }
    match cmp.predicted_exponent {
        Some(pe) => writeln!(
            out,
            "predicted exponent 1/Omega = {pe:.6}; measured -slope = {:.6}; limit {:.6}",
            cmp.measured_exponent,
            (1.0 + cfg.tol_fraction) * pe
        )?,
        None => writeln!(out, "no power-law bound for {:?}", report.regime)?,
    }
    writeln!(
        out,
        "verdict: {:?}{}",
        cmp.verdict,
        if cmp.sharpness_observed { " (sharpness observed)" } else { "" }
    )?;
    if let Some(p) = plot {
        export_lifespan_plot(&recs, Some(&fit), cmp.predicted_exponent, p)?;
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(match cmp.verdict {
        Verdict::Fail => 1,
        Verdict::Pass | Verdict::NotDeskScale => 0,
    })
}
