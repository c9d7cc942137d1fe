//! Affect-regression metrics and trajectory shape statistics.
//!
//! Moments are population moments (divide by `n`) throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictions paired with ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedSeries<'a> {
    predicted: &'a [f64],
    truth: &'a [f64],
}

impl<'a> PairedSeries<'a> {
    pub fn new(predicted: &'a [f64], truth: &'a [f64]) -> Result<Self> {
        if predicted.len() != truth.len() {
            return Err(Error::Shape(format!("{} predictions vs {} targets", predicted.len(), truth.len())));
        }
        if predicted.is_empty() {
            return Err(Error::EmptyInput("paired series".into()));
        }
        if predicted.iter().chain(truth).any(|v| !v.is_finite()) {
            return Err(Error::DegenerateInput("non-finite value in series".into()));
        }
        Ok(Self { predicted, truth })
    }

    pub fn len(&self) -> usize {
        self.predicted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predicted.is_empty()
    }

    pub fn predicted(&self) -> &[f64] {
        self.predicted
    }

    pub fn truth(&self) -> &[f64] {
        self.truth
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population variances and covariance.
fn moments(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let n = x.len() as f64;
    let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
        cxy += (a - mx) * (b - my);
    }
    (mx, my, vx / n, vy / n, cxy / n)
}

pub fn rmse(s: &PairedSeries<'_>) -> f64 {
    let sq: f64 = s.predicted.iter().zip(s.truth).map(|(p, t)| (p - t) * (p - t)).sum();
    (sq / s.len() as f64).sqrt()
}

/// Pearson correlation.
pub fn corr(s: &PairedSeries<'_>) -> Result<f64> {
    let (_, _, vx, vy, cxy) = moments(s.predicted, s.truth);
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::DegenerateInput("correlation of a constant series".into()));
    }
    Ok((cxy / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// -1, 0 or +1; zero only for an exact zero.
pub fn sign(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Sign agreement rate.
pub fn sagr(s: &PairedSeries<'_>) -> f64 {
    let agree = s.predicted.iter().zip(s.truth).filter(|(p, t)| sign(**p) == sign(**t)).count();
    agree as f64 / s.len() as f64
}

/// Concordance correlation coefficient,
/// `2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2)`.
pub fn ccc(s: &PairedSeries<'_>) -> Result<f64> {
    let (mx, my, vx, vy, cxy) = moments(s.predicted, s.truth);
    if vx == 0.0 && vy == 0.0 {
        return Err(Error::DegenerateInput("concordance of two constant series".into()));
    }
    Ok(2.0 * cxy / (vx + vy + (mx - my) * (mx - my)))
}

/// One row of a per-axis metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisMetrics {
    pub axis: String,
    pub rmse: f64,
    pub corr: f64,
    pub sagr: f64,
    pub ccc: f64,
}

impl AxisMetrics {
    pub fn compute(axis: &str, predicted: &[f64], truth: &[f64]) -> Result<Self> {
        let s = PairedSeries::new(predicted, truth)?;
        Ok(Self { axis: axis.to_owned(), rmse: rmse(&s), corr: corr(&s)?, sagr: sagr(&s), ccc: ccc(&s)? })
    }
}

/// Writes `axis,rmse,corr,sagr,ccc` rows.
pub fn write_metrics_report(rows: &[AxisMetrics], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(Error::io(format!("writing {}", path.display())))?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increasing,
    Decreasing,
}

/// Spearman rank correlation of a per-step series against step index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub spearman_rho: f64,
    pub n_steps: usize,
    pub direction: Direction,
}

/// 1-based ranks with ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman correlation between two equally long series (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    let s = PairedSeries::new(x, y)?;
    let (rx, ry) = (average_ranks(s.predicted), average_ranks(s.truth));
    corr(&PairedSeries::new(&rx, &ry)?)
}

/// Rank agreement of `series` with step order. A constant series reports
/// `rho = 0`, increasing.
pub fn monotonicity(series: &[f64]) -> Result<MonotonicityReport> {
    if series.len() < 3 {
        return Err(Error::DegenerateInput(format!("monotonicity needs at least 3 steps, got {}", series.len())));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite value in series".into()));
    }
    let steps: Vec<f64> = (0..series.len()).map(|i| i as f64).collect();
    let rho = if series.iter().all(|&v| v == series[0]) { 0.0 } else { spearman(series, &steps)? };
    let direction = if rho < 0.0 { Direction::Decreasing } else { Direction::Increasing };
    Ok(MonotonicityReport { spearman_rho: rho, n_steps: series.len(), direction })
}

/// Centred 3-point moving average; the endpoints average their two available points.
pub fn moving_average3(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            x[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect()
}

/// Number of times the sign of `a - b` changes, skipping exact ties.
pub fn crossings(a: &[f64], b: &[f64]) -> usize {
    let signs: Vec<i8> = a.iter().zip(b).map(|(x, y)| sign(x - y)).filter(|&s| s != 0).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}
