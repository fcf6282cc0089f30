//! Runtime scaling: mean steps per input size and least-squares fits.

use serde::{Deserialize, Serialize};

use super::{run_trials, TrialPlan};
use crate::{Error, Result};

/// `y ≈ coefficient · x^exponent`, fitted on log-log axes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r_squared: f64,
}

/// `y ≈ slope · ln x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogFit {
    pub slope: f64,
    pub intercept: f64,
    pub max_residual: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a·x + b`; returns `(a, b, r²)`.
fn least_squares(points: &[(f64, f64)]) -> Option<(f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let a = sxy / sxx;
    let b = my - a * mx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some((a, b, r2))
}

/// Power law through positive `(x, y)` points. `None` with fewer than two
/// distinct `x` or a nonpositive coordinate.
pub fn fit_power_law(points: &[(f64, f64)]) -> Option<PowerFit> {
    if points.iter().any(|&(x, y)| x <= 0.0 || y <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let (exponent, log_c, r_squared) = least_squares(&logs)?;
    Some(PowerFit {
        exponent,
        coefficient: log_c.exp(),
        r_squared,
    })
}

pub fn fit_log_linear(points: &[(f64, f64)]) -> Option<LogFit> {
    if points.iter().any(|&(x, _)| x <= 0.0) {
        return None;
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y)).collect();
    let (slope, intercept, r_squared) = least_squares(&logs)?;
    let max_residual = logs
        .iter()
        .map(|&(lx, y)| (y - slope * lx - intercept).abs())
        .fold(0.0, f64::max);
    Some(LogFit {
        slope,
        intercept,
        max_residual,
        r_squared,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingRow {
    pub n: u64,
    pub trials: u64,
    pub timeouts: u64,
    pub mean_steps: f64,
    pub max_steps: u64,
    pub accept_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    pub fit: PowerFit,
}

/// Mean steps of each plan (one per input size) and the fitted exponent.
pub fn scaling_probe(
    plans: &[TrialPlan],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<ScalingTable> {
    if plans.len() < 3 {
        return Err(Error::InvalidParameter(
            "a scaling probe needs at least three sizes".into(),
        ));
    }
    let mut rows = Vec::with_capacity(plans.len());
    for plan in plans {
        let s = run_trials(plan, trials, seed, workers)?;
        rows.push(ScalingRow {
            n: plan.input.len() as u64,
            trials,
            timeouts: s.timeouts,
            mean_steps: s.mean_steps,
            max_steps: s.max_steps,
            accept_rate: s.accept_rate,
        });
    }
    let points: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_steps)).collect();
    let fit = fit_power_law(&points).ok_or_else(|| {
        Error::InvalidParameter("scaling sizes must be distinct and nonempty".into())
    })?;
    Ok(ScalingTable { rows, fit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::langspace::dima2_member;
    use crate::protocols::{ProtocolContext, ProtocolId};
    use crate::provers::ProverSpec;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&x: &f64| (x, 3.0 * x.powf(1.5)))
            .collect();
        let f = fit_power_law(&pts).unwrap();
        assert!((f.exponent - 1.5).abs() < 1e-12);
        assert!((f.coefficient - 3.0).abs() < 1e-9);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
        assert!(fit_power_law(&[(1.0, 1.0)]).is_none());
        assert!(fit_power_law(&[(1.0, 0.0), (2.0, 1.0)]).is_none());
    }

    #[test]
    fn exact_log_line() {
        let pts: Vec<(f64, f64)> = [1.0, 10.0, 100.0]
            .iter()
            .map(|&x: &f64| (x, 7.0 * x.ln() + 2.0))
            .collect();
        let f = fit_log_linear(&pts).unwrap();
        assert!((f.slope - 7.0).abs() < 1e-12 && (f.intercept - 2.0).abs() < 1e-12);
        assert!(f.max_residual < 1e-12);
    }

    #[test]
    fn dima2_is_linear() {
        let plans: Vec<TrialPlan> = (1..=3)
            .map(|k| {
                TrialPlan::new(
                    ProtocolId::Dima2,
                    dima2_member(k),
                    ProverSpec::Honest,
                    ProtocolContext::default(),
                )
            })
            .collect();
        let t = scaling_probe(&plans, 20, 0, 0).unwrap();
        assert!((0.8..=1.2).contains(&t.fit.exponent), "{:?}", t.fit);
        assert!(scaling_probe(&plans[..2], 5, 0, 0).is_err());
    }
}
