//! Critical exponents β and δ: predictions from (k, tail regime) and
//! log-log fits of solver output near θ_c.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::meanfield::{pressure_rank2, solve_m, theta_c, ModelSpec, DEFAULT_TOL};
use crate::weights::TailRegime;

/// Default fit window in the relative distance ε to criticality.
pub const DEFAULT_WINDOW: (f64, f64) = (1e-5, 1e-2);
pub const DEFAULT_POINTS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictedExponents {
    pub beta: f64,
    pub delta: f64,
    pub log_correction: bool,
}

/// Exponent table: finite k-th moment gives (1/(k-2), k-1); a power law
/// with τ ∈ (3, k+1) gives (1/(τ-3), τ-2); τ = k+1 gives the finite-moment
/// values with a logarithmic correction.
pub fn predicted_exponents(k: usize, regime: TailRegime) -> Result<PredictedExponents> {
    if k < 4 || !k.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!("k must be even and >= 4, got {k}")));
    }
    let kf = k as f64;
    Ok(match regime {
        TailRegime::FiniteMoment => PredictedExponents { beta: 1.0 / (kf - 2.0), delta: kf - 1.0, log_correction: false },
        TailRegime::PowerLaw(tau) => {
            if !(tau > 3.0 && tau < kf + 1.0) {
                return Err(Error::InvalidParameter(format!("power-law tau = {tau} outside (3, {})", kf + 1.0)));
            }
            PredictedExponents { beta: 1.0 / (tau - 3.0), delta: tau - 2.0, log_correction: false }
        }
        TailRegime::Boundary(_) => PredictedExponents { beta: 1.0 / (kf - 2.0), delta: kf - 1.0, log_correction: true },
    })
}

/// Ordinary least squares y = a + b x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub r_squared: f64,
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() || n < 3 {
        return Err(Error::InvalidParameter("regression needs at least three paired points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Degenerate("regression abscissae are all equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let slope_stderr = (sse / (nf - 2.0) / sxx).sqrt();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(LinearFit { slope, intercept, slope_stderr, r_squared })
}

/// Fitted exponent with its regression diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub estimate: f64,
    pub stderr: f64,
    pub window: (f64, f64),
    pub n_points: usize,
    pub r_squared: f64,
    pub log_corrected: bool,
}

fn geometric_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let r = (hi / lo).powf(1.0 / (n - 1) as f64);
    (0..n).map(|i| if i == n - 1 { hi } else { lo * r.powi(i as i32) }).collect()
}

fn check_window(window: (f64, f64), n_points: usize, max_hi: f64) -> Result<()> {
    let (lo, hi) = window;
    if !(lo > 0.0 && hi > lo && hi <= max_hi) {
        return Err(Error::InvalidParameter(format!("fit window ({lo}, {hi}) must satisfy 0 < lo < hi <= {max_hi}")));
    }
    if n_points < 5 {
        return Err(Error::InvalidParameter(format!("need at least 5 fit points, got {n_points}")));
    }
    Ok(())
}

fn corrected(x: f64, log_corrected: bool) -> f64 {
    if log_corrected { (x / (1.0 / x).ln()).ln() } else { x.ln() }
}

/// Fits m⁺ ≍ ε^β on θ = θ_c(1 + ε), ε geometric over `window`, at h = 0.
/// With `log_corrected` the abscissa is ε / log(1/ε).
pub fn fit_beta(model: &ModelSpec, window: (f64, f64), n_points: usize, log_corrected: bool) -> Result<ExponentFit> {
    check_window(window, n_points, 0.1)?;
    let base = model.with_h(0.0)?;
    let tc = theta_c(&base)?;
    let eps = geometric_grid(window.0, window.1, n_points);
    let ms = eps
        .par_iter()
        .map(|&e| solve_m(&base.with_theta(tc * (1.0 + e))?, DEFAULT_TOL).map(|r| r.m_plus))
        .collect::<Result<Vec<_>>>()?;
    for (&e, &m) in eps.iter().zip(&ms) {
        if !(m > 0.0) {
            return Err(Error::WindowTooWide(e));
        }
    }
    let x: Vec<f64> = eps.iter().map(|&e| corrected(e, log_corrected)).collect();
    let y: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
    let fit = ols(&x, &y)?;
    Ok(ExponentFit {
        estimate: fit.slope,
        stderr: fit.slope_stderr,
        window,
        n_points,
        r_squared: fit.r_squared,
        log_corrected,
    })
}

/// Fits m⁺(θ_c, h) ≍ h^{1/δ} on a geometric h grid; the estimate is
/// 1/slope. With `log_corrected` the abscissa is h / log(1/h).
pub fn fit_delta(model: &ModelSpec, window: (f64, f64), n_points: usize, log_corrected: bool) -> Result<ExponentFit> {
    check_window(window, n_points, 0.1)?;
    let at_c = model.with_h(0.0)?;
    let tc = theta_c(&at_c)?;
    let at_c = at_c.with_theta(tc)?;
    let hs = geometric_grid(window.0, window.1, n_points);
    let ms = hs
        .par_iter()
        .map(|&h| solve_m(&at_c.with_h(h)?, DEFAULT_TOL).map(|r| r.m_plus))
        .collect::<Result<Vec<_>>>()?;
    for (&h, &m) in hs.iter().zip(&ms) {
        if !(m > 0.0) {
            return Err(Error::WindowTooWide(h));
        }
    }
    let x: Vec<f64> = hs.iter().map(|&h| corrected(h, log_corrected)).collect();
    let y: Vec<f64> = ms.iter().map(|m| m.ln()).collect();
    let fit = ols(&x, &y)?;
    Ok(ExponentFit {
        estimate: 1.0 / fit.slope,
        stderr: fit.slope_stderr / (fit.slope * fit.slope),
        window,
        n_points,
        r_squared: fit.r_squared,
        log_corrected,
    })
}

/// Which parameter a magnetization curve sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Control {
    Theta,
    H,
}

/// One row of a sweep; failed solves keep their error message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurveRow {
    pub theta: f64,
    pub h: f64,
    pub m_plus: f64,
    pub pressure: f64,
    pub residual: f64,
    pub error: Option<String>,
}

/// Solves on every grid value of the control parameter, in parallel.
pub fn magnetization_curve(model: &ModelSpec, control: Control, grid: &[f64]) -> Result<Vec<CurveRow>> {
    if grid.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidParameter("sweep grid must be sorted ascending".into()));
    }
    let theta0 = model.theta()?;
    Ok(grid
        .par_iter()
        .map(|&v| {
            let (theta, h) = match control {
                Control::Theta => (v, model.h()),
                Control::H => (theta0, v),
            };
            let attempt = || -> Result<CurveRow> {
                let m = model.with_theta(theta)?.with_h(h)?;
                let fp = solve_m(&m, DEFAULT_TOL)?;
                Ok(CurveRow {
                    theta,
                    h,
                    m_plus: fp.m_plus,
                    pressure: pressure_rank2(&m, &fp)?,
                    residual: fp.residual,
                    error: None,
                })
            };
            attempt().unwrap_or_else(|e| CurveRow {
                theta,
                h,
                m_plus: f64::NAN,
                pressure: f64::NAN,
                residual: f64::NAN,
                error: Some(e.to_string()),
            })
        })
        .collect())
}

/// Writes rows as CSV with header `theta,h,m_plus,pressure,residual`.
pub fn write_curve_csv<W: std::io::Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["theta", "h", "m_plus", "pressure", "residual"])?;
    for r in rows {
        w.write_record([r.theta, r.h, r.m_plus, r.pressure, r.residual].map(|v| format!("{v:.16e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_curve_csv`].
pub fn read_curve_csv<R: std::io::Read>(input: R) -> Result<Vec<CurveRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["theta", "h", "m_plus", "pressure", "residual"] {
        return Err(Error::Config(format!("unexpected sweep header {headers:?}")));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let v = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(e.to_string()))?;
        rows.push(CurveRow { theta: v[0], h: v[1], m_plus: v[2], pressure: v[3], residual: v[4], error: None });
    }
    Ok(rows)
}
