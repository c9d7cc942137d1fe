//! Brute-force metric definitions used as oracles.
//!
//! Moments come from the pairwise-difference identity
//! `cov(x, y) = 1/(2 n^2) * sum_i sum_j (x_i - x_j)(y_i - y_j)`,
//! so they share no code path with the library's two-pass moments.

pub fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

pub fn cov(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (x[i] - x[j]) * (y[i] - y[j]);
        }
    }
    s / (2.0 * (n * n) as f64)
}

pub fn rmse(p: &[f64], t: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..p.len() {
        s += (p[i] - t[i]).powi(2);
    }
    (s / p.len() as f64).sqrt()
}

/// `None` when either series is constant.
pub fn corr(p: &[f64], t: &[f64]) -> Option<f64> {
    let (vp, vt) = (cov(p, p), cov(t, t));
    if vp == 0.0 || vt == 0.0 {
        return None;
    }
    Some(cov(p, t) / (vp * vt).sqrt())
}

pub fn sagr(p: &[f64], t: &[f64]) -> f64 {
    let sign = |v: f64| {
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let agree = (0..p.len()).filter(|&i| sign(p[i]) == sign(t[i])).count();
    agree as f64 / p.len() as f64
}

/// `None` when both series are constant.
pub fn ccc(p: &[f64], t: &[f64]) -> Option<f64> {
    let (vp, vt) = (cov(p, p), cov(t, t));
    if vp == 0.0 && vt == 0.0 {
        return None;
    }
    let d = mean(p) - mean(t);
    Some(2.0 * cov(p, t) / (vp + vt + d * d))
}

/// Average 1-based rank of each element, by counting smaller and equal values.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    corr(&ranks(x), &ranks(y))
}
