//! Drift/martingale split of the proportion increments.
//!
//! With `R_n = B_n` every increment decomposes exactly as
//! `Z_{n+1} - Z_n = Z_n H_n + Delta_{n+1}` where
//!
//! ```text
//! H_n         = B_{n+1}/(S_n + B_{n+1}) (1 - Z_n) (I{Z_n < U} - I{Z_n > L})
//! Delta_{n+1} = B_{n+1}/(S_n + B_{n+1}) (X_{n+1} - Z_n) ((1 - Z_n) I{Z_n < U} + Z_n I{Z_n > L})
//! ```
//!
//! `H_n` vanishes strictly between the barriers and `Delta` is a martingale
//! difference. The products `T_n = prod_{i=1}^{n-1} (1 + H_i)` and the tail
//! products `F_n = prod_{i>=n} (1 + H_i)` (truncated at the horizon) are
//! computed alongside.
//!
//! Index conventions: `h[n]` and `delta[n]` are indexed by the transition
//! `n -> n + 1`, so `delta[n]` holds `Delta_{n+1}`. Every other series is
//! indexed by time `0..=N`; `t_product[0]` is set to 1 (the product is empty
//! at both `n = 0` and `n = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::urn::PathRecord;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSeries {
    pub h: Vec<f64>,
    pub delta: Vec<f64>,
    /// `M_n = sum_{i<=n} Delta_i`, with `M_0 = 0`.
    pub m_martingale: Vec<f64>,
    pub t_product: Vec<f64>,
    /// `W_n = Z_n / T_n`.
    pub w: Vec<f64>,
    pub f_tail: Vec<f64>,
    /// Black weight `J_n`.
    pub black_count: Vec<f64>,
    /// Red weight `S_n - J_n`.
    pub red_count: Vec<f64>,
    /// Last transition at which `H_n != 0`; beyond it `F_n = 1` exactly.
    pub last_nonzero_h: Option<usize>,
}

impl DecompositionSeries {
    /// `sum_{n < k} |H_n|` for `k = 1..=N`.
    pub fn abs_h_partial_sums(&self) -> Vec<f64> {
        self.h
            .iter()
            .scan(0.0, |acc, h| {
                *acc += h.abs();
                Some(*acc)
            })
            .collect()
    }
}

/// Compute every decomposition series of a replay-consistent `R_n = B_n` path.
pub fn compute_series(path: &PathRecord) -> Result<DecompositionSeries> {
    if path.draws.iter().any(|d| d.red_amount.is_some_and(|r| r != d.amount)) {
        return Err(UrnError::Hypothesis(
            "the decomposition requires R_n = B_n on every step".into(),
        ));
    }
    let states = path.replay()?;
    let n = path.horizon();
    let (lower, upper) = (path.barriers.lower, path.barriers.upper);

    let mut h = Vec::with_capacity(n);
    let mut delta = Vec::with_capacity(n);
    for (i, draw) in path.draws.iter().enumerate() {
        let z = path.z_series[i];
        let s = path.s_series[i];
        let frac = draw.amount / (s + draw.amount);
        let black_open = if z < upper { 1.0 } else { 0.0 };
        let red_open = if z > lower { 1.0 } else { 0.0 };
        let x = if draw.x { 1.0 } else { 0.0 };
        h.push(frac * (1.0 - z) * (black_open - red_open));
        delta.push(frac * (x - z) * ((1.0 - z) * black_open + z * red_open));
    }

    let mut m_martingale = Vec::with_capacity(n + 1);
    m_martingale.push(0.0);
    for d in &delta {
        let last = *m_martingale.last().unwrap();
        m_martingale.push(last + d);
    }

    let mut t_product = vec![1.0; n + 1];
    for k in 2..=n {
        t_product[k] = t_product[k - 1] * (1.0 + h[k - 1]);
    }
    let w = path
        .z_series
        .iter()
        .zip(&t_product)
        .map(|(z, t)| z / t)
        .collect();

    let mut f_tail = vec![1.0; n + 1];
    for k in (0..n).rev() {
        f_tail[k] = f_tail[k + 1] * (1.0 + h[k]);
    }

    let black_count: Vec<f64> = states.iter().map(|s| s.black).collect();
    let red_count = states.iter().map(|s| s.total - s.black).collect();
    let last_nonzero_h = h.iter().rposition(|&v| v != 0.0);

    Ok(DecompositionSeries {
        h,
        delta,
        m_martingale,
        t_product,
        w,
        f_tail,
        black_count,
        red_count,
        last_nonzero_h,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub max_abs_residual: f64,
    /// Residual divided by `max(Z_n, Z_{n+1})`.
    pub max_rel_residual: f64,
    /// Transition `n -> n + 1` where the relative residual peaks.
    pub worst_index: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Check `Z_{n+1} - Z_n = Z_n H_n + Delta_{n+1}` on every step. Passes iff
/// the largest relative residual is at most `tol`.
pub fn verify_identity(path: &PathRecord, series: &DecompositionSeries, tol: f64) -> IdentityReport {
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut worst = 0;
    let steps = series.h.len().min(path.z_series.len().saturating_sub(1));
    for i in 0..steps {
        let (z0, z1) = (path.z_series[i], path.z_series[i + 1]);
        let residual = ((z1 - z0) - (z0 * series.h[i] + series.delta[i])).abs();
        let scale = z0.abs().max(z1.abs()).max(f64::MIN_POSITIVE);
        let rel = residual / scale;
        max_abs = max_abs.max(residual);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
    }
    IdentityReport {
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        worst_index: worst,
        tolerance: tol,
        pass: max_rel <= tol,
    }
}

/// Largest relative gap between `W_n` and `Z_1 + sum_{i=1}^{n-1} Delta_{i+1} / T_{i+1}`
/// over `n = 1..=N`.
pub fn martingale_representation_residual(path: &PathRecord, series: &DecompositionSeries) -> f64 {
    let n = series.h.len();
    if n == 0 {
        return 0.0;
    }
    let mut acc = path.z_series[1];
    let mut worst: f64 = 0.0;
    for k in 1..=n {
        if k > 1 {
            acc += series.delta[k - 1] / series.t_product[k];
        }
        let w = series.w[k];
        worst = worst.max((w - acc).abs() / w.abs().max(f64::MIN_POSITIVE));
    }
    worst
}

/// `S_n / n` for `n = 1..=N`.
pub fn sn_over_n(path: &PathRecord) -> Vec<f64> {
    path.s_series
        .iter()
        .enumerate()
        .skip(1)
        .map(|(n, s)| s / n as f64)
        .collect()
}
