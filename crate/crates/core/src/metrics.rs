//! Scores for angular predictions.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Angular distance `min over l in {-1, 0, 1} of |a + 2pi l - b|`, in `[0, pi]`
/// for angles in `[0, 2pi)`.
pub fn circ_residual(a: f64, b: f64) -> f64 {
    let d = a - b;
    d.abs().min((d + TAU).abs()).min((d - TAU).abs())
}

fn check_aligned(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::invalid(format!("score inputs differ in length ({a} vs {b})")));
    }
    if a == 0 {
        return Err(Error::invalid("cannot score an empty test set"));
    }
    Ok(())
}

/// Mean squared circular residual. Note there is no outer square root; see
/// `rmse_circular_sqrt` for that.
pub fn rmse_circular(y: &[f64], pred: &[f64]) -> Result<f64> {
    check_aligned(y.len(), pred.len())?;
    Ok(y.iter()
        .zip(pred)
        .map(|(a, b)| circ_residual(*a, *b).powi(2))
        .sum::<f64>()
        / y.len() as f64)
}

pub fn rmse_circular_sqrt(y: &[f64], pred: &[f64]) -> Result<f64> {
    rmse_circular(y, pred).map(f64::sqrt)
}

/// Shift of a sample onto the branch closest to the observation.
fn anchor(sample: f64, obs: f64) -> f64 {
    [sample - TAU, sample, sample + TAU]
        .into_iter()
        .min_by(|a, b| (a - obs).abs().total_cmp(&(b - obs).abs()))
        .expect("three candidates")
}

/// CRPS of one observation from `T` predictive samples by quantile
/// decomposition: `(2/T) sum_t (1(y < s_(t)) - p_t)(s_(t) - y)` with levels
/// `p_t = (t - 1/2) / T` and `s_(t)` the anchored samples in ascending order.
pub fn crps_point(obs: f64, samples: &[f64]) -> f64 {
    let t = samples.len() as f64;
    let mut s: Vec<f64> = samples.iter().map(|&v| anchor(v, obs)).collect();
    s.sort_by(f64::total_cmp);
    let sum: f64 = s
        .iter()
        .enumerate()
        .map(|(i, &q)| {
            let p = (i as f64 + 0.5) / t;
            let ind = if obs < q { 1.0 } else { 0.0 };
            (ind - p) * (q - obs)
        })
        .sum();
    2.0 * sum / t
}

/// Average CRPS over test points; `samples[j]` holds the draws for point `j`.
pub fn crps(y: &[f64], samples: &[Vec<f64>]) -> Result<f64> {
    check_aligned(y.len(), samples.len())?;
    if let Some(bad) = samples.iter().find(|s| s.len() < 2) {
        return Err(Error::invalid(format!(
            "CRPS needs at least 2 samples per point, got {}",
            bad.len()
        )));
    }
    // Adding 0.0 turns a -0.0 from an all-zero sum into 0.0.
    Ok(y.iter().zip(samples).map(|(o, s)| crps_point(*o, s)).sum::<f64>() / y.len() as f64 + 0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub rmse_circular: f64,
    pub rmse_circular_sqrt: f64,
    pub crps: f64,
    pub n: usize,
    pub residuals: Vec<f64>,
}

pub fn score(y: &[f64], mean_wrapped: &[f64], samples: &[Vec<f64>]) -> Result<ScoreReport> {
    let rmse = rmse_circular(y, mean_wrapped)?;
    Ok(ScoreReport {
        rmse_circular: rmse,
        rmse_circular_sqrt: rmse.sqrt(),
        crps: crps(y, samples)?,
        n: y.len(),
        residuals: y.iter().zip(mean_wrapped).map(|(a, b)| circ_residual(*a, *b)).collect(),
    })
}
