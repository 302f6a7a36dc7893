//! Estimators and goodness-of-fit machinery.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::provenance::Provenance;
use crate::urn::PathRecord;

/// Limiting conditional variance `q z (1 - z) / m^2`.
pub fn sigma2(m: f64, q: f64, z: f64) -> Result<f64> {
    if !(m > 0.0) {
        return Err(UrnError::Hypothesis(format!(
            "limiting mean m = {m} must be > 0"
        )));
    }
    if q < m * m * (1.0 - 1e-12) {
        return Err(UrnError::validation(
            "q",
            format!("second moment {q} is below m^2 = {}", m * m),
        ));
    }
    Ok(q * z * (1.0 - z) / (m * m))
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum LimitMethod {
    #[default]
    Terminal,
    TailAverage {
        window: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitEstimate {
    pub z_hat: f64,
    pub method: LimitMethod,
    pub horizon: usize,
}

pub fn estimate_limit(path: &PathRecord, method: LimitMethod) -> Result<LimitEstimate> {
    estimate_limit_from_series(&path.z_series, method)
}

/// `z_series` holds `Z_0..Z_N`.
pub fn estimate_limit_from_series(z_series: &[f64], method: LimitMethod) -> Result<LimitEstimate> {
    let Some(&last) = z_series.last() else {
        return Err(UrnError::EmptySample("z series"));
    };
    let horizon = z_series.len() - 1;
    let z_hat = match method {
        LimitMethod::Terminal => last,
        LimitMethod::TailAverage { window } => {
            if window == 0 || window > horizon {
                return Err(UrnError::validation(
                    "limit_estimator.window",
                    format!("must lie in 1..={horizon}"),
                ));
            }
            let tail = &z_series[z_series.len() - window..];
            tail.iter().sum::<f64>() / window as f64
        }
    };
    Ok(LimitEstimate {
        z_hat,
        method,
        horizon,
    })
}

/// Standard normal CDF, via the complementary error function (libm's
/// port of the Sun fdlibm `erfc`, accurate to within a few ulp).
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a continuous CDF.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<f64> {
    if sample.is_empty() {
        return Err(UrnError::EmptySample("ks sample"));
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let d = sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            above.max(below)
        })
        .fold(0.0, f64::max);
    Ok(d.clamp(0.0, 1.0))
}

/// Asymptotic p-value `P(K > sqrt(n) d)` from the Kolmogorov series.
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let lambda = (n as f64).sqrt() * d;
    if !(lambda > 0.0) {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100_000u64 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> Result<KsOutcome> {
    let statistic = ks_statistic(sample, cdf)?;
    Ok(KsOutcome {
        statistic,
        p_value: ks_pvalue(statistic, sample.len()),
        n: sample.len(),
    })
}

/// Largest fraction of `samples` in a single width-`bin_width` cell of `[0, 1]`.
pub fn max_atom_mass(samples: &[f64], bin_width: f64) -> Result<f64> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(UrnError::validation("bin_width", "must be > 0"));
    }
    if samples.is_empty() {
        return Ok(0.0);
    }
    let bins = (1.0 / bin_width).ceil() as usize;
    let mut counts = vec![0usize; bins.max(1)];
    for &x in samples {
        let idx = ((x / bin_width).floor().max(0.0) as usize).min(counts.len() - 1);
        counts[idx] += 1;
    }
    let max = counts.into_iter().max().unwrap_or(0);
    Ok(max as f64 / samples.len() as f64)
}

/// Sample mean and sample second raw moment.
pub fn empirical_moments(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(UrnError::EmptySample("moments"));
    }
    let n = values.len() as f64;
    let (s1, s2) = values
        .iter()
        .fold((0.0, 0.0), |(a, b), &v| (a + v, b + v * v));
    Ok((s1 / n, s2 / n))
}

/// How a report's statistic or p-value is judged.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", content = "threshold", rename_all = "snake_case")]
pub enum Gate {
    PValueAbove(f64),
    PValueBelow(f64),
    StatisticBelow(f64),
    StatisticAtMost(f64),
    StatisticAbove(f64),
    StatisticAtLeast(f64),
    /// Reported without a pass/fail decision.
    Exploratory,
    /// Not applicable to this configuration.
    Skipped,
}

impl Gate {
    pub fn threshold(&self) -> Option<f64> {
        match *self {
            Gate::PValueAbove(t)
            | Gate::PValueBelow(t)
            | Gate::StatisticBelow(t)
            | Gate::StatisticAtMost(t)
            | Gate::StatisticAbove(t)
            | Gate::StatisticAtLeast(t) => Some(t),
            Gate::Exploratory | Gate::Skipped => None,
        }
    }

    pub fn evaluate(&self, statistic: f64, p_value: Option<f64>) -> Option<bool> {
        let p = p_value.unwrap_or(f64::NAN);
        match *self {
            Gate::PValueAbove(t) => Some(p > t),
            Gate::PValueBelow(t) => Some(p < t),
            Gate::StatisticBelow(t) => Some(statistic < t),
            Gate::StatisticAtMost(t) => Some(statistic <= t),
            Gate::StatisticAbove(t) => Some(statistic > t),
            Gate::StatisticAtLeast(t) => Some(statistic >= t),
            Gate::Exploratory | Gate::Skipped => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub suite: String,
    pub name: String,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub gate: Gate,
    /// `None` for exploratory or skipped reports.
    pub pass: Option<bool>,
    pub sample_size: usize,
    pub provenance: Provenance,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl TestReport {
    pub fn new(
        suite: &str,
        name: &str,
        statistic: f64,
        p_value: Option<f64>,
        gate: Gate,
        sample_size: usize,
        provenance: Provenance,
    ) -> Self {
        TestReport {
            suite: suite.to_string(),
            name: name.to_string(),
            statistic,
            p_value,
            gate,
            pass: gate.evaluate(statistic, p_value),
            sample_size,
            provenance,
            details: BTreeMap::new(),
            note: None,
        }
    }

    pub fn skipped(suite: &str, name: &str, reason: &str, provenance: Provenance) -> Self {
        let mut report = Self::new(suite, name, f64::NAN, None, Gate::Skipped, 0, provenance);
        report.note = Some(reason.to_string());
        report
    }

    pub fn with_detail(mut self, key: &str, value: f64) -> Self {
        self.details.insert(key.to_string(), value);
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn threshold(&self) -> Option<f64> {
        self.gate.threshold()
    }

    /// A gated report that did not pass.
    pub fn failed(&self) -> bool {
        self.pass == Some(false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigma2_examples() {
        assert_eq!(sigma2(1.0, 1.0, 0.5).unwrap(), 0.25);
        assert_eq!(sigma2(3.0, 10.0, 0.0).unwrap(), 0.0);
        assert!((sigma2(2.0, 5.0, 0.25).unwrap() - 0.234375).abs() < 1e-15);
        assert!(matches!(sigma2(0.0, 1.0, 0.5), Err(UrnError::Hypothesis(_))));
        assert!(sigma2(2.0, 3.0, 0.5).is_err());
    }

    #[test]
    fn sigma2_shape() {
        let at = |z| sigma2(1.5, 3.0, z).unwrap();
        for i in 1..100 {
            let z = i as f64 / 100.0;
            assert!((at(z) - at(1.0 - z)).abs() < 1e-15);
            assert!(at(z) <= at(0.5));
            assert!(at(z) > 0.0);
        }
        assert_eq!(at(1.0), 0.0);
    }

    #[test]
    fn limit_estimates() {
        let flat = [0.5; 20];
        assert_eq!(estimate_limit_from_series(&flat, LimitMethod::Terminal).unwrap().z_hat, 0.5);
        let tail = estimate_limit_from_series(&flat, LimitMethod::TailAverage { window: 5 }).unwrap();
        assert_eq!(tail.z_hat, 0.5);
        let est = estimate_limit_from_series(&[0.4, 0.5, 0.6], LimitMethod::TailAverage { window: 2 }).unwrap();
        assert!((est.z_hat - 0.55).abs() < 1e-15);
        assert_eq!(est.horizon, 2);
        assert!(estimate_limit_from_series(&[0.4, 0.5], LimitMethod::TailAverage { window: 2 }).is_err());
        assert!(estimate_limit_from_series(&[], LimitMethod::Terminal).is_err());
    }

    #[test]
    fn normal_cdf_points() {
        assert_eq!(standard_normal_cdf(0.0), 0.5);
        assert!((standard_normal_cdf(1.959964) - 0.975).abs() < 1e-6);
        let mut prev = 0.0;
        for i in -8000..=8000 {
            let x = i as f64 * 1e-3;
            let f = standard_normal_cdf(x);
            assert!((f + standard_normal_cdf(-x) - 1.0).abs() < 1e-12);
            assert!(f >= prev);
            prev = f;
        }
    }

    #[test]
    fn ks_examples() {
        let unif = |x: f64| x.clamp(0.0, 1.0);
        assert!((ks_statistic(&[0.25, 0.5, 0.75], unif).unwrap() - 0.25).abs() < 1e-15);
        let n = 40;
        let quantiles: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        assert!((ks_statistic(&quantiles, unif).unwrap() - 0.5 / n as f64).abs() < 1e-15);
        assert_eq!(ks_statistic(&[0.5], unif).unwrap(), 0.5);
        assert!(ks_statistic(&[], unif).is_err());
    }

    #[test]
    fn ks_pvalue_examples() {
        assert_eq!(ks_pvalue(0.0, 100), 1.0);
        let p = ks_pvalue(1.36 / 10.0, 100);
        assert!((p - 0.049).abs() < 0.002, "{p}");
        assert!(ks_pvalue(10.0 / 10.0, 100) < 1e-12);
    }

    #[test]
    fn atoms() {
        assert_eq!(max_atom_mass(&[0.3; 50], 0.01).unwrap(), 1.0);
        assert_eq!(max_atom_mass(&[0.1, 0.9], 0.5).unwrap(), 0.5);
        assert_eq!(max_atom_mass(&[1.0, 1.0, 0.0], 0.25).unwrap(), 2.0 / 3.0);
        assert!(max_atom_mass(&[0.5], 0.0).is_err());
    }

    #[test]
    fn uniform_sample_has_no_atoms() {
        let key = crate::rng::StreamKey::new(31);
        let xs: Vec<f64> = (0..10_000).map(|i| key.at_step(i).uniform()).collect();
        // 100 bins, expected 100 per bin, sd ~ 10
        assert!(max_atom_mass(&xs, 1e-2).unwrap() < 0.02);
    }

    #[test]
    fn moments() {
        assert_eq!(empirical_moments(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 1.0));
        assert_eq!(empirical_moments(&[0.0, 2.0]).unwrap(), (1.0, 2.0));
        assert_eq!(empirical_moments(&vec![3.0; 100_000]).unwrap(), (3.0, 9.0));
        assert!(empirical_moments(&[]).is_err());
    }

    #[test]
    fn gates() {
        let prov = Provenance {
            config_hash: "x".into(),
            master_seed: 1,
        };
        let r = TestReport::new("s", "n", 0.3, Some(0.02), Gate::PValueAbove(0.01), 10, prov.clone());
        assert_eq!(r.pass, Some(true));
        assert_eq!(r.threshold(), Some(0.01));
        let r = TestReport::new("s", "n", 0.3, None, Gate::StatisticBelow(0.3), 10, prov.clone());
        assert!(r.failed());
        let r = TestReport::new("s", "n", 0.3, None, Gate::Exploratory, 10, prov);
        assert_eq!(r.pass, None);
    }

    proptest! {
        #[test]
        fn ks_invariant_under_affine_maps(
            raw in proptest::collection::vec(0.0f64..1.0, 1..60),
            scale in 0.1f64..10.0,
            shift in -5.0f64..5.0,
        ) {
            let cdf = |x: f64| x.clamp(0.0, 1.0);
            let d0 = ks_statistic(&raw, cdf).unwrap();
            let mapped: Vec<f64> = raw.iter().map(|x| shift + scale * x).collect();
            let d1 = ks_statistic(&mapped, |y| cdf((y - shift) / scale)).unwrap();
            prop_assert!((d0 - d1).abs() < 1e-9);
        }

        #[test]
        fn ks_pvalue_decreasing(n in 1usize..5000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(ks_pvalue(lo, n) >= ks_pvalue(hi, n) - 1e-12);
        }
    }
}
