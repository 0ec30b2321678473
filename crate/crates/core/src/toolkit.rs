//! Lifespan fitting, comparison with the predicted bound, record
//! persistence, SVG plots and run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::exponents::{f_ss, rho_strauss, CurveGrid, Regime, RegimeReport};
use crate::simulator::{LifespanRecord, RecordStatus};

/// A record left out of a fit, with the reason.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Excluded {
    pub epsilon: f64,
    pub reason: String,
}

/// Least-squares fit log T = intercept + slope · log ε.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    pub n_points: usize,
    pub excluded: Vec<Excluded>,
}

/// Fits the blow-up records; records without blow-up are excluded.
pub fn fit_power_law(records: &[LifespanRecord]) -> Result<FitResult> {
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for r in records {
        if r.blew_up() && r.epsilon > 0.0 && r.t_measured > 0.0 {
            pts.push((r.epsilon.ln(), r.t_measured.ln()));
        } else {
            let reason = match &r.status {
                RecordStatus::ReachedTmax => "no blow-up before T_max".to_string(),
                RecordStatus::Failed(msg) => format!("run failed: {msg}"),
                RecordStatus::BlewUp => "non-positive or non-finite values".to_string(),
            };
            excluded.push(Excluded {
                epsilon: r.epsilon,
                reason,
            });
        }
    }
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "power-law fit needs at least 3 blow-up records, got {}",
            pts.len()
        )));
    }
    // Sorting makes the sums independent of input order.
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    excluded.sort_by(|a, b| a.epsilon.total_cmp(&b.epsilon));
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InsufficientData("all records share one epsilon".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    Ok(FitResult {
        slope,
        intercept,
        stderr: (ssr / (n - 2.0) / sxx).sqrt(),
        n_points: pts.len(),
        excluded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Pass,
    Fail,
    /// The operative bound is not a power law (exponential lifespans).
    NotDeskScale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub verdict: Verdict,
    /// −slope of the fit.
    pub measured_exponent: f64,
    /// 1/Ω of the primary bound, when it is a power law.
    pub predicted_exponent: Option<f64>,
    pub tol_fraction: f64,
    /// −slope ≥ (1 − tol)/Ω: the decay matches the bound's rate.
    pub sharpness_observed: bool,
}

/// Upper-bound verdict: PASS when −slope ≤ (1 + tol)/Ω.
pub fn compare_with_prediction(fit: &FitResult, report: &RegimeReport, tol_fraction: f64) -> Result<Comparison> {
    if !(tol_fraction >= 0.0) {
        return Err(invalid("tolerance fraction must be nonnegative"));
    }
    let measured = -fit.slope;
    let Some(omega) = report.primary_omega() else {
        return Ok(Comparison {
            verdict: Verdict::NotDeskScale,
            measured_exponent: measured,
            predicted_exponent: None,
            tol_fraction,
            sharpness_observed: false,
        });
    };
    let predicted = 1.0 / omega;
    let verdict = if measured <= (1.0 + tol_fraction) * predicted {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(Comparison {
        verdict,
        measured_exponent: measured,
        predicted_exponent: Some(predicted),
        tol_fraction,
        sharpness_observed: measured >= (1.0 - tol_fraction) * predicted,
    })
}

pub const CSV_HEADER: [&str; 5] = ["epsilon", "T_measured", "threshold", "dr", "dt_policy"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecordFormat {
    Csv,
    Json,
}

fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x > 0.0 {
        "inf".into()
    } else {
        format!("{x}")
    }
}

/// Records as CSV text with the fixed header and 17 significant digits.
pub fn records_to_csv(records: &[LifespanRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        w.write_record([
            fmt_f64(r.epsilon),
            fmt_f64(r.t_measured),
            fmt_f64(r.threshold_used),
            fmt_f64(r.dr),
            r.dt_policy.clone(),
        ])
        .map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Parses CSV written by [`records_to_csv`]. Rows with a finite T are
/// blow-up records; `inf` marks runs that reached T_max.
pub fn records_from_csv(text: &str) -> Result<Vec<LifespanRecord>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().map_err(csv_err)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Parse(format!("unexpected CSV header {header:?}")));
    }
    let num = |s: &str, line: usize| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::Parse(format!("line {line}: bad number {s:?}: {e}")))
    };
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row.map_err(csv_err)?;
        let line = i + 2;
        if row.len() != 5 {
            return Err(Error::Parse(format!("line {line}: expected 5 fields, got {}", row.len())));
        }
        let t = num(&row[1], line)?;
        out.push(LifespanRecord {
            epsilon: num(&row[0], line)?,
            t_measured: t,
            threshold_used: num(&row[2], line)?,
            dr: num(&row[3], line)?,
            dt_policy: row[4].to_string(),
            status: if t.is_finite() {
                RecordStatus::BlewUp
            } else {
                RecordStatus::ReachedTmax
            },
            threshold_estimates: Vec::new(),
        });
    }
    Ok(out)
}

pub fn export_records(records: &[LifespanRecord], path: &Path, format: RecordFormat) -> Result<()> {
    let text = match format {
        RecordFormat::Csv => records_to_csv(records)?,
        RecordFormat::Json => serde_json::to_string_pretty(records).map_err(|e| Error::Parse(e.to_string()))?,
    };
    std::fs::write(path, text)?;
    Ok(())
}

/// Reads records; the format follows the file extension (`.json` or CSV).
pub fn import_records(path: &Path) -> Result<Vec<LifespanRecord>> {
    let text = std::fs::read_to_string(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
    } else {
        records_from_csv(&text)
    }
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 640.0;
const MARGIN: f64 = 60.0;

fn regime_color(r: Regime) -> &'static str {
    match r {
        Regime::GlasseySubcritical => "#d95f02",
        Regime::StraussSubcritical => "#1b9e77",
        Regime::StraussCritical => "#7570b3",
        Regime::NoBlowupPredicted => "#f0f0f0",
    }
}

/// Log-scale axis map from [lo, hi] to pixel range [a, b].
struct LogAxis {
    lo: f64,
    hi: f64,
    a: f64,
    b: f64,
}

impl LogAxis {
    fn map(&self, x: f64) -> f64 {
        self.a + (self.b - self.a) * (x.ln() - self.lo.ln()) / (self.hi.ln() - self.lo.ln())
    }
}

/// Roots in q of F(p, ·) on the axis range, one per sign change.
fn roots_in_q(f: &dyn Fn(f64, f64) -> Result<f64>, p: f64, q_lo: f64, q_hi: f64) -> Result<Vec<f64>> {
    let qs = crate::exponents::log_grid(q_lo, q_hi, 400);
    let mut out = Vec::new();
    let mut prev = f(p, qs[0])?;
    for w in qs.windows(2) {
        let next = f(p, w[1])?;
        if prev == 0.0 {
            out.push(w[0]);
        } else if prev.signum() != next.signum() && next != 0.0 {
            let (mut a, mut b, mut fa) = (w[0], w[1], prev);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                let fm = f(p, mid)?;
                if fm.signum() == fa.signum() {
                    a = mid;
                    fa = fm;
                } else {
                    b = mid;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = next;
    }
    Ok(out)
}

/// Polyline points of the zero set of F over the plot window.
fn critical_curve(f: &dyn Fn(f64, f64) -> Result<f64>, p_lo: f64, p_hi: f64, q_lo: f64, q_hi: f64) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::new();
    for p in crate::exponents::log_grid(p_lo, p_hi, 300) {
        if let Some(&q) = roots_in_q(f, p, q_lo, q_hi)?.first() {
            pts.push((p, q));
        }
    }
    Ok(pts)
}

/// Region plot: regime-coloured cells with the critical curves overlaid.
/// Unequal speeds get the single curve of the faster component; equal
/// speeds get F_SS(p,q) = 0, its swap, and their diagonal intersection.
pub fn region_plot_svg(grid: &CurveGrid) -> Result<String> {
    let (p_lo, p_hi) = (grid.p_axis[0], *grid.p_axis.last().expect("non-empty axis"));
    let (q_lo, q_hi) = (grid.q_axis[0], *grid.q_axis.last().expect("non-empty axis"));
    let (x_lo, x_hi) = (p_lo.min(q_lo), p_hi.max(q_hi));
    let xa = LogAxis {
        lo: x_lo,
        hi: x_hi,
        a: MARGIN,
        b: PLOT_W - 20.0,
    };
    let ya = LogAxis {
        lo: x_lo,
        hi: x_hi,
        a: PLOT_H - MARGIN,
        b: 20.0,
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(
        s,
        r#"<title>Blow-up regimes, N={}, m1={}, m2={}</title>"#,
        grid.n, grid.m1, grid.m2
    );
    let edges = |axis: &[f64], i: usize| -> (f64, f64) {
        let lo = if i == 0 { axis[0] } else { (axis[i - 1] * axis[i]).sqrt() };
        let hi = if i + 1 == axis.len() {
            axis[i]
        } else {
            (axis[i] * axis[i + 1]).sqrt()
        };
        (lo, hi)
    };
    for (i, row) in grid.labels.iter().enumerate() {
        let (pa, pb) = edges(&grid.p_axis, i);
        for (j, &lab) in row.iter().enumerate() {
            let (qa, qb) = edges(&grid.q_axis, j);
            let (x0, x1) = (xa.map(pa), xa.map(pb));
            let (y0, y1) = (ya.map(qb), ya.map(qa));
            let _ = writeln!(
                s,
                r#"<rect class="cell regime-{}" x="{x0:.2}" y="{y0:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                lab.code(),
                (x1 - x0).max(0.0),
                (y1 - y0).max(0.0),
                regime_color(lab)
            );
        }
    }
    let n = grid.n;
    let curves: Vec<(&str, Vec<(f64, f64)>)> = if grid.m1 == grid.m2 {
        let m = grid.m1;
        vec![
            ("F_SS(N,m,p,q)=0", critical_curve(&|p, q| f_ss(n, m, p, q), p_lo, p_hi, q_lo, q_hi)?),
            ("F_SS(N,m,q,p)=0", critical_curve(&|p, q| f_ss(n, m, q, p), p_lo, p_hi, q_lo, q_hi)?),
        ]
    } else if grid.m1 > grid.m2 {
        let m = grid.m1;
        vec![("F_SS(N,m1,p,q)=0", critical_curve(&|p, q| f_ss(n, m, p, q), p_lo, p_hi, q_lo, q_hi)?)]
    } else {
        let m = grid.m2;
        vec![("F_SS(N,m2,q,p)=0", critical_curve(&|p, q| f_ss(n, m, q, p), p_lo, p_hi, q_lo, q_hi)?)]
    };
    for (label, pts) in &curves {
        let path: Vec<String> = pts
            .iter()
            .map(|&(p, q)| format!("{:.2},{:.2}", xa.map(p), ya.map(q)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline class="critical" data-label="{label}" fill="none" stroke="black" stroke-width="2" points="{}"/>"#,
            path.join(" ")
        );
    }
    if grid.m1 == grid.m2 {
        let rho = rho_strauss(n, grid.m1)?;
        if rho >= x_lo && rho <= x_hi {
            let _ = writeln!(
                s,
                r#"<circle class="intersection" data-rho="{rho:.12}" cx="{:.2}" cy="{:.2}" r="5" fill="red"/>"#,
                xa.map(rho),
                ya.map(rho)
            );
        }
    }
    axes(&mut s, &xa, &ya, "p", "q");
    s.push_str("</svg>\n");
    Ok(s)
}

fn axes(s: &mut String, xa: &LogAxis, ya: &LogAxis, xl: &str, yl: &str) {
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        xa.a, ya.a, xa.b, ya.a
    );
    let _ = writeln!(
        s,
        r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#,
        xa.a, ya.a, xa.a, ya.b
    );
    for (v, anchor) in [(xa.lo, "start"), (xa.hi, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="{anchor}">{v:.3}</text>"#,
            xa.map(v),
            ya.a + 16.0
        );
    }
    for v in [ya.lo, ya.hi] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{v:.3}</text>"#,
            xa.a - 4.0,
            ya.map(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{xl}</text>"#,
        0.5 * (xa.a + xa.b),
        ya.a + 36.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" font-size="14" text-anchor="middle">{yl}</text>"#,
        xa.a - 40.0,
        0.5 * (ya.a + ya.b)
    );
}

pub fn export_region_plot(grid: &CurveGrid, path: &Path) -> Result<()> {
    std::fs::write(path, region_plot_svg(grid)?)?;
    Ok(())
}

/// Log-log plot of T against ε with the fitted line and, when given, a
/// guide of slope −`predicted_exponent` through the data centroid.
pub fn lifespan_plot_svg(records: &[LifespanRecord], fit: Option<&FitResult>, predicted_exponent: Option<f64>) -> String {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.blew_up() && r.epsilon > 0.0)
        .map(|r| (r.epsilon, r.t_measured))
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(s, "<title>Lifespan against epsilon</title>");
    if pts.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let fold = |f: fn(f64, f64) -> f64, init: f64, sel: fn(&(f64, f64)) -> f64| pts.iter().map(sel).fold(init, f);
    let (e_lo, e_hi) = (fold(f64::min, f64::INFINITY, |p| p.0), fold(f64::max, 0.0, |p| p.0));
    let (t_lo, t_hi) = (fold(f64::min, f64::INFINITY, |p| p.1), fold(f64::max, 0.0, |p| p.1));
    let pad = |lo: f64, hi: f64| if hi > lo { (lo / 1.2, hi * 1.2) } else { (lo / 2.0, hi * 2.0) };
    let (e_lo, e_hi) = pad(e_lo, e_hi);
    let (t_lo, t_hi) = pad(t_lo, t_hi);
    let xa = LogAxis {
        lo: e_lo,
        hi: e_hi,
        a: MARGIN,
        b: PLOT_W - 20.0,
    };
    let ya = LogAxis {
        lo: t_lo,
        hi: t_hi,
        a: PLOT_H - MARGIN,
        b: 20.0,
    };
    for &(e, t) in &pts {
        let _ = writeln!(
            s,
            r#"<circle class="record" cx="{:.2}" cy="{:.2}" r="4" fill="black"/>"#,
            xa.map(e),
            ya.map(t)
        );
    }
    let line = |s: &mut String, class: &str, slope: f64, intercept: f64, dash: &str| {
        let y = |e: f64| (intercept + slope * e.ln()).exp();
        let _ = writeln!(
            s,
            r#"<line class="{class}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="blue" stroke-dasharray="{dash}"/>"#,
            xa.map(e_lo),
            ya.map(y(e_lo)),
            xa.map(e_hi),
            ya.map(y(e_hi))
        );
    };
    if let Some(f) = fit {
        line(&mut s, "fit", f.slope, f.intercept, "none");
    }
    if let Some(pe) = predicted_exponent {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0.ln()).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
        line(&mut s, "predicted", -pe, my + pe * mx, "6,4");
    }
    axes(&mut s, &xa, &ya, "epsilon", "T");
    s.push_str("</svg>\n");
    s
}

pub fn export_lifespan_plot(
    records: &[LifespanRecord],
    fit: Option<&FitResult>,
    predicted_exponent: Option<f64>,
    path: &Path,
) -> Result<()> {
    std::fs::write(path, lifespan_plot_svg(records, fit, predicted_exponent))?;
    Ok(())
}

/// What is needed to rerun a command and where its outputs went.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub module_versions: BTreeMap<String, String>,
    /// Random seeds used (none: every computation is deterministic).
    pub seeds: Vec<u64>,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<PathBuf>,
}

/// Hex SHA-256 of the compact JSON serialization of `value`.
pub fn config_hash<T: Serialize>(value: &T) -> Result<String> {
    let json = serde_json::to_vec(value).map_err(|e| Error::Parse(e.to_string()))?;
    let digest = Sha256::digest(&json);
    Ok(digest.iter().fold(String::with_capacity(64), |mut acc, b| {
        let _ = write!(acc, "{b:02x}");
        acc
    }))
}

impl RunManifest {
    pub fn new<T: Serialize>(command: &str, config: &T, outputs: Vec<PathBuf>) -> Result<Self> {
        let value = serde_json::to_value(config).map_err(|e| Error::Parse(e.to_string()))?;
        let version = env!("CARGO_PKG_VERSION").to_string();
        let module_versions = [
            "bessel",
            "eigenfunctions",
            "exponents",
            "simulator",
            "test_solutions",
            "toolkit",
        ]
        .into_iter()
        .map(|m| (m.to_string(), version.clone()))
        .collect();
        Ok(Self {
            command: command.to_string(),
            config_hash: config_hash(&value)?,
            config: value,
            module_versions,
            seeds: Vec::new(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            outputs,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        serde_json::from_str(&std::fs::read_to_string(path)?).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::{classify_regime, default_region_axis, region_sample, ExponentConfig};
    use proptest::prelude::*;

    fn rec(eps: f64, t: f64) -> LifespanRecord {
        LifespanRecord {
            epsilon: eps,
            t_measured: t,
            threshold_used: 1e8,
            dr: 0.02,
            dt_policy: "cfl=0.4;floor=0.05;nl=0.05".into(),
            status: if t.is_finite() {
                RecordStatus::BlewUp
            } else {
                RecordStatus::ReachedTmax
            },
            threshold_estimates: Vec::new(),
        }
    }

    #[test]
    fn exact_power_law() {
        let recs: Vec<_> = [0.8, 0.4, 0.2, 0.1, 0.05].iter().map(|&e: &f64| rec(e, e.powi(-2))).collect();
        let fit = fit_power_law(&recs).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!(fit.intercept.abs() < 1e-12);
        assert_eq!(fit.n_points, 5);
    }

    #[test]
    fn noisy_power_law() {
        // Fixed ±1% multiplicative perturbations.
        let noise = [0.01, -0.01, 0.007, -0.004, 0.0, 0.009, -0.008];
        let recs: Vec<_> = noise
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let e = 0.8 * 0.5f64.powi(i as i32);
                rec(e, 3.0 * e.powf(-1.5) * (1.0 + d))
            })
            .collect();
        let fit = fit_power_law(&recs).unwrap();
        assert!((fit.slope + 1.5).abs() < 0.05);
    }

    #[test]
    fn non_blowup_records_excluded() {
        let mut recs: Vec<_> = [0.8, 0.4, 0.2].iter().map(|&e: &f64| rec(e, 1.0 / e)).collect();
        recs.push(rec(0.01, f64::INFINITY));
        let fit = fit_power_law(&recs).unwrap();
        assert_eq!(fit.n_points, 3);
        assert_eq!(fit.excluded.len(), 1);
        assert_eq!(fit.excluded[0].epsilon, 0.01);
        assert!(matches!(fit_power_law(&recs[..2]), Err(Error::InsufficientData(_))));
    }

    fn glassey_report() -> RegimeReport {
        classify_regime(&ExponentConfig::new(1, 1.0, 0.0, 2.0, 2.0).unwrap(), 1e-9).unwrap()
    }

    fn fit_with_slope(slope: f64) -> FitResult {
        FitResult {
            slope,
            intercept: 0.0,
            stderr: 0.0,
            n_points: 5,
            excluded: Vec::new(),
        }
    }

    #[test]
    fn verdict_semantics() {
        let rep = glassey_report();
        let omega = rep.primary_omega().unwrap();
        let exact = compare_with_prediction(&fit_with_slope(-1.0 / omega), &rep, 0.25).unwrap();
        assert_eq!(exact.verdict, Verdict::Pass);
        assert!(exact.sharpness_observed);
        let steep = compare_with_prediction(&fit_with_slope(-2.0 / omega), &rep, 0.25).unwrap();
        assert_eq!(steep.verdict, Verdict::Fail);
        let shallow = compare_with_prediction(&fit_with_slope(-0.3 / omega), &rep, 0.25).unwrap();
        assert_eq!(shallow.verdict, Verdict::Pass);
        assert!(!shallow.sharpness_observed);
    }

    #[test]
    fn critical_regime_not_desk_scale() {
        // Ω_SS = 0 on a Strauss-critical point found by bisection in q.
        let f = |q: f64| crate::exponents::omega_ss(&ExponentConfig::new(3, 1.0, 0.0, 1.5, q).unwrap()).unwrap();
        let (mut a, mut b) = (1.01, 10.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if f(a).signum() == f(m).signum() {
                a = m;
            } else {
                b = m;
            }
        }
        let rep = classify_regime(&ExponentConfig::new(3, 1.0, 0.0, 1.5, 0.5 * (a + b)).unwrap(), 1e-9).unwrap();
        assert_eq!(rep.regime, Regime::StraussCritical);
        let c = compare_with_prediction(&fit_with_slope(-1.0), &rep, 0.25).unwrap();
        assert_eq!(c.verdict, Verdict::NotDeskScale);
    }

    #[test]
    fn empty_csv_has_header() {
        assert_eq!(records_to_csv(&[]).unwrap(), "epsilon,T_measured,threshold,dr,dt_policy\n");
        assert!(records_from_csv("epsilon,T_measured,threshold,dr,dt_policy\n").unwrap().is_empty());
        assert!(records_from_csv("a,b\n1,2\n").is_err());
    }

    #[test]
    fn csv_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        let recs = vec![rec(0.8, 5.555168028154433), rec(0.1, f64::INFINITY)];
        export_records(&recs, &path, RecordFormat::Csv).unwrap();
        let back = import_records(&path).unwrap();
        assert_eq!(back, recs);
        let jpath = dir.path().join("records.json");
        export_records(&recs[..1], &jpath, RecordFormat::Json).unwrap();
        assert_eq!(import_records(&jpath).unwrap(), recs[..1].to_vec());
    }

    #[test]
    fn region_plot_curves() {
        let axis = default_region_axis(24);
        let eq = region_sample(3, 1.0, 1.0, &axis, &axis, 1e-9).unwrap();
        let svg = region_plot_svg(&eq).unwrap();
        assert_eq!(svg.matches(r#"<polyline class="critical""#).count(), 2);
        assert_eq!(svg.matches(r#"<circle class="intersection""#).count(), 1);
        let uneq = region_sample(3, 1.0, 0.0, &axis, &axis, 1e-9).unwrap();
        let svg = region_plot_svg(&uneq).unwrap();
        assert_eq!(svg.matches(r#"<polyline class="critical""#).count(), 1);
        assert_eq!(svg.matches("<circle").count(), 0);
    }

    #[test]
    fn intersection_lies_on_both_curves() {
        let rho = rho_strauss(3, 1.0).unwrap();
        assert!(f_ss(3, 1.0, rho, rho).unwrap().abs() < 1e-10);
    }

    #[test]
    fn lifespan_plot_has_fit_and_guide() {
        let recs: Vec<_> = [0.8, 0.4, 0.2].iter().map(|&e: &f64| rec(e, 2.0 / e)).collect();
        let fit = fit_power_law(&recs).unwrap();
        let svg = lifespan_plot_svg(&recs, Some(&fit), Some(1.0));
        assert_eq!(svg.matches(r#"class="record""#).count(), 3);
        assert!(svg.contains(r#"class="fit""#) && svg.contains(r#"class="predicted""#));
    }

    #[test]
    fn manifest_hash_is_stable() {
        let cfg = ExponentConfig::new(3, 1.0, 0.0, 2.0, 2.0).unwrap();
        let a = RunManifest::new("curves", &cfg, vec![]).unwrap();
        let b = RunManifest::new("curves", &cfg, vec![]).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_eq!(a.config_hash.len(), 64);
        let other = ExponentConfig::new(3, 1.0, 0.0, 2.0, 2.5).unwrap();
        assert_ne!(config_hash(&other).unwrap(), config_hash(&cfg).unwrap());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        a.write(&p).unwrap();
        assert_eq!(RunManifest::read(&p).unwrap(), a);
    }

    proptest! {
        #[test]
        fn fit_is_order_invariant(
            exps in proptest::collection::vec(-3.0f64..0.0, 3..8),
            noise in proptest::collection::vec(-0.05f64..0.05, 8),
            seed in 0usize..1000,
        ) {
            let recs: Vec<_> = exps
                .iter()
                .enumerate()
                .map(|(i, &x)| {
                    let e = x.exp() * (1.0 + 1e-3 * i as f64);
                    rec(e, 2.0 * e.powf(-0.7) * (1.0 + noise[i]))
                })
                .collect();
            let mut shuffled = recs.clone();
            let len = shuffled.len();
            shuffled.rotate_left(seed % len);
            shuffled.swap(0, len - 1);
            let a = fit_power_law(&recs).unwrap();
            let b = fit_power_law(&shuffled).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn csv_round_trip_is_bit_exact(
            vals in proptest::collection::vec((1e-6f64..1e3, 1e-3f64..1e6, 1e-4f64..1.0), 0..10),
        ) {
            let recs: Vec<_> = vals
                .iter()
                .map(|&(e, t, dr)| LifespanRecord { dr, ..rec(e, t) })
                .collect();
            let back = records_from_csv(&records_to_csv(&recs).unwrap()).unwrap();
            prop_assert_eq!(back.len(), recs.len());
            for (a, b) in back.iter().zip(&recs) {
                prop_assert_eq!(a.epsilon.to_bits(), b.epsilon.to_bits());
                prop_assert_eq!(a.t_measured.to_bits(), b.t_measured.to_bits());
                prop_assert_eq!(a.dr.to_bits(), b.dr.to_bits());
            }
        }
    }
}
