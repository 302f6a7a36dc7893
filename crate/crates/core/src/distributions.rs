//! Laws of the reinforcement amounts `B_n` and of the barrier pair `(L, U)`.
//!
//! Every reinforcement family carries closed-form moments so that the
//! limiting variance `q Z (1 - Z) / m^2` can be evaluated without estimator
//! noise; [`crate::stats::empirical_moments`] provides the sample-based
//! cross-check.

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Result, UrnError};
use crate::urn::Barriers;

const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Per-step values of a deterministic (time-varying) reinforcement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Schedule {
    /// `B_n = base + amplitude * n^(-exponent)` for `n >= 1`.
    PowerDecay {
        base: f64,
        amplitude: f64,
        exponent: f64,
    },
    /// `B_n = values[n - 1]`, holding the final entry once the table is exhausted.
    Table { values: Vec<f64> },
}

impl Schedule {
    pub fn value(&self, n: u64) -> f64 {
        let n = n.max(1);
        match self {
            Schedule::PowerDecay {
                base,
                amplitude,
                exponent,
            } => base + amplitude * (n as f64).powf(-exponent),
            Schedule::Table { values } => {
                let idx = ((n - 1) as usize).min(values.len() - 1);
                values[idx]
            }
        }
    }

    /// Closed interval containing every value the schedule takes.
    fn range(&self) -> (f64, f64) {
        match self {
            Schedule::PowerDecay {
                base, amplitude, ..
            } => {
                let first = base + amplitude;
                (first.min(*base), first.max(*base))
            }
            Schedule::Table { values } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Schedule::PowerDecay {
                base,
                amplitude,
                exponent,
            } => {
                if !(base.is_finite() && amplitude.is_finite()) {
                    return Err(UrnError::validation("schedule", "non-finite coefficient"));
                }
                if !(*exponent > 0.0 && exponent.is_finite()) {
                    return Err(UrnError::validation("schedule.exponent", "must be > 0"));
                }
            }
            Schedule::Table { values } => {
                if values.is_empty() {
                    return Err(UrnError::validation("schedule.values", "must be nonempty"));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(UrnError::validation("schedule.values", "non-finite entry"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ReinforcementFamily {
    PointMass {
        value: f64,
    },
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `scale * Beta(alpha, beta)`.
    ScaledBeta {
        alpha: f64,
        beta: f64,
        scale: f64,
    },
    /// Deterministic but time-varying `B_n`; the limits must be declared.
    DeterministicSequence {
        schedule: Schedule,
        limit_mean: f64,
        limit_second_moment: f64,
    },
}

impl ReinforcementFamily {
    fn support_range(&self) -> (f64, f64) {
        match self {
            ReinforcementFamily::PointMass { value } => (*value, *value),
            ReinforcementFamily::Discrete { values, .. } => values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                }),
            ReinforcementFamily::Uniform { low, high } => (*low, *high),
            ReinforcementFamily::ScaledBeta { scale, .. } => (0.0, *scale),
            ReinforcementFamily::DeterministicSequence { schedule, .. } => schedule.range(),
        }
    }

    fn validate(&self) -> Result<()> {
        let finite = |field: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(UrnError::validation(field, "must be finite"))
            }
        };
        match self {
            ReinforcementFamily::PointMass { value } => finite("reinforcement.value", *value)?,
            ReinforcementFamily::Discrete {
                values,
                probabilities,
            } => {
                if values.is_empty() {
                    return Err(UrnError::validation("reinforcement.values", "must be nonempty"));
                }
                if values.len() != probabilities.len() {
                    return Err(UrnError::validation(
                        "reinforcement.probabilities",
                        format!(
                            "length {} does not match {} values",
                            probabilities.len(),
                            values.len()
                        ),
                    ));
                }
                for &v in values {
                    finite("reinforcement.values", v)?;
                }
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(UrnError::validation(
                        "reinforcement.probabilities",
                        "entries must be finite and >= 0",
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(UrnError::validation(
                        "reinforcement.probabilities",
                        format!("must sum to 1 (got {total})"),
                    ));
                }
            }
            ReinforcementFamily::Uniform { low, high } => {
                finite("reinforcement.low", *low)?;
                finite("reinforcement.high", *high)?;
                if low >= high {
                    return Err(UrnError::validation("reinforcement", "low must be < high"));
                }
            }
            ReinforcementFamily::ScaledBeta { alpha, beta, scale } => {
                for (name, v) in [("alpha", alpha), ("beta", beta), ("scale", scale)] {
                    if !(v.is_finite() && *v > 0.0) {
                        return Err(UrnError::validation(
                            format!("reinforcement.{name}"),
                            "must be finite and > 0",
                        ));
                    }
                }
            }
            ReinforcementFamily::DeterministicSequence {
                schedule,
                limit_mean,
                limit_second_moment,
            } => {
                schedule.validate()?;
                finite("reinforcement.limit_mean", *limit_mean)?;
                finite("reinforcement.limit_second_moment", *limit_second_moment)?;
                if *limit_mean < 0.0 {
                    return Err(UrnError::validation("reinforcement.limit_mean", "must be >= 0"));
                }
            }
        }
        let (lo, _) = self.support_range();
        if lo < 0.0 {
            return Err(UrnError::validation(
                "reinforcement",
                format!("support must be nonnegative (minimum {lo})"),
            ));
        }
        Ok(())
    }
}

/// First two moments of a reinforcement amount.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
}

/// `m = lim E(B_n)` and `q = lim E(B_n^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitMoments {
    pub m: f64,
    pub q: f64,
}

impl LimitMoments {
    /// `m > 0`, required by the conditional CLT.
    pub fn clt_hypothesis_holds(&self) -> bool {
        self.m > 0.0
    }

    /// `q / m^2`, the factor by which the limiting variance exceeds `Z (1 - Z)`.
    pub fn dispersion_ratio(&self) -> f64 {
        self.q / (self.m * self.m)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ReinforcementRepr {
    #[serde(flatten)]
    family: ReinforcementFamily,
    bound: Option<f64>,
}

/// Law of the reinforcement sequence, bounded by `bound` (the constant `c`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ReinforcementRepr", into = "ReinforcementRepr")]
pub struct ReinforcementSpec {
    family: ReinforcementFamily,
    bound: f64,
    beta: Option<Beta<f64>>,
}

impl TryFrom<ReinforcementRepr> for ReinforcementSpec {
    type Error = UrnError;

    fn try_from(repr: ReinforcementRepr) -> Result<Self> {
        ReinforcementSpec::new(repr.family, repr.bound)
    }
}

impl From<ReinforcementSpec> for ReinforcementRepr {
    fn from(spec: ReinforcementSpec) -> Self {
        ReinforcementRepr {
            family: spec.family,
            bound: Some(spec.bound),
        }
    }
}

impl ReinforcementSpec {
    /// Validates the family; `bound` defaults to the supremum of the support
    /// (or 1 when the support is `{0}`).
    pub fn new(family: ReinforcementFamily, bound: Option<f64>) -> Result<Self> {
        family.validate()?;
        let (_, hi) = family.support_range();
        let bound = match bound {
            Some(c) => {
                if !(c.is_finite() && c > 0.0) {
                    return Err(UrnError::validation(
                        "reinforcement.bound",
                        "must be finite and > 0 (a zero bound forces liminf E(B_n) = 0)",
                    ));
                }
                if hi > c {
                    return Err(UrnError::validation(
                        "reinforcement.bound",
                        format!("support reaches {hi}, above the bound {c}"),
                    ));
                }
                c
            }
            None if hi > 0.0 => hi,
            None => 1.0,
        };
        let beta = match &family {
            ReinforcementFamily::ScaledBeta { alpha, beta, .. } => Some(
                Beta::new(*alpha, *beta)
                    .map_err(|e| UrnError::validation("reinforcement", e.to_string()))?,
            ),
            _ => None,
        };
        Ok(ReinforcementSpec {
            family,
            bound,
            beta,
        })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        Self::new(ReinforcementFamily::PointMass { value }, None)
    }

    pub fn discrete(values: Vec<f64>, probabilities: Vec<f64>) -> Result<Self> {
        Self::new(
            ReinforcementFamily::Discrete {
                values,
                probabilities,
            },
            None,
        )
    }

    pub fn uniform(low: f64, high: f64) -> Result<Self> {
        Self::new(ReinforcementFamily::Uniform { low, high }, None)
    }

    pub fn scaled_beta(alpha: f64, beta: f64, scale: f64) -> Result<Self> {
        Self::new(ReinforcementFamily::ScaledBeta { alpha, beta, scale }, None)
    }

    pub fn family(&self) -> &ReinforcementFamily {
        &self.family
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// Draw `B_n`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> f64 {
        match &self.family {
            ReinforcementFamily::PointMass { value } => *value,
            ReinforcementFamily::Discrete {
                values,
                probabilities,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probabilities) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // rounding in the cumulative sum; fall back on the last atom with mass
                let last = probabilities.iter().rposition(|&p| p > 0.0).unwrap_or(0);
                values[last]
            }
            ReinforcementFamily::Uniform { low, high } => {
                let u: f64 = rng.random();
                (low + (high - low) * u).min(*high)
            }
            ReinforcementFamily::ScaledBeta { scale, .. } => {
                let beta = self.beta.as_ref().expect("beta sampler built in constructor");
                scale * beta.sample(rng)
            }
            ReinforcementFamily::DeterministicSequence { schedule, .. } => schedule.value(n),
        }
    }

    /// Exact `(E(B_n), E(B_n^2))`.
    pub fn analytic_moments(&self, n: u64) -> Moments {
        match &self.family {
            ReinforcementFamily::PointMass { value } => Moments {
                mean: *value,
                second_moment: value * value,
            },
            ReinforcementFamily::Discrete {
                values,
                probabilities,
            } => {
                let (mean, second_moment) = values
                    .iter()
                    .zip(probabilities)
                    .fold((0.0, 0.0), |(m, s), (v, p)| (m + p * v, s + p * v * v));
                Moments {
                    mean,
                    second_moment,
                }
            }
            ReinforcementFamily::Uniform { low, high } => Moments {
                mean: (low + high) / 2.0,
                second_moment: (low * low + low * high + high * high) / 3.0,
            },
            ReinforcementFamily::ScaledBeta { alpha, beta, scale } => {
                let s = alpha + beta;
                let mean = alpha / s;
                let second = alpha * (alpha + 1.0) / (s * (s + 1.0));
                Moments {
                    mean: scale * mean,
                    second_moment: scale * scale * second,
                }
            }
            ReinforcementFamily::DeterministicSequence { schedule, .. } => {
                let v = schedule.value(n);
                Moments {
                    mean: v,
                    second_moment: v * v,
                }
            }
        }
    }

    /// The limiting pair `(m, q)`.
    pub fn limit_moments(&self) -> LimitMoments {
        match &self.family {
            ReinforcementFamily::DeterministicSequence {
                limit_mean,
                limit_second_moment,
                ..
            } => LimitMoments {
                m: *limit_mean,
                q: *limit_second_moment,
            },
            _ => {
                let Moments {
                    mean,
                    second_moment,
                } = self.analytic_moments(1);
                LimitMoments {
                    m: mean,
                    q: second_moment,
                }
            }
        }
    }

    /// Finite support as `(value, probability)` pairs, when the law has one
    /// and does not depend on `n`.
    pub fn finite_support(&self) -> Option<Vec<(f64, f64)>> {
        match &self.family {
            ReinforcementFamily::PointMass { value } => Some(vec![(*value, 1.0)]),
            ReinforcementFamily::Discrete {
                values,
                probabilities,
            } => Some(
                values
                    .iter()
                    .copied()
                    .zip(probabilities.iter().copied())
                    .filter(|(_, p)| *p > 0.0)
                    .collect(),
            ),
            _ => None,
        }
    }

    /// True when `B_n` is almost surely constant (so `q = m^2`).
    pub fn is_degenerate(&self) -> bool {
        match &self.family {
            ReinforcementFamily::PointMass { .. } | ReinforcementFamily::DeterministicSequence { .. } => true,
            ReinforcementFamily::Discrete { .. } => self.finite_support().is_some_and(|s| s.len() == 1),
            _ => false,
        }
    }
}

/// Law of the barrier pair, sampled once per path at time zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BarrierSpec {
    Fixed {
        lower: f64,
        upper: f64,
    },
    /// `L, U` i.i.d. uniform on `[0, 1)`, redrawn until `L < U`.
    IndependentUniformPair,
    DiscreteJoint {
        pairs: Vec<(f64, f64)>,
        probabilities: Vec<f64>,
    },
}

impl BarrierSpec {
    pub fn fixed(lower: f64, upper: f64) -> Result<Self> {
        let spec = BarrierSpec::Fixed { lower, upper };
        spec.validate()?;
        Ok(spec)
    }

    /// The classical urn without barriers.
    pub fn none() -> Self {
        BarrierSpec::Fixed {
            lower: 0.0,
            upper: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BarrierSpec::Fixed { lower, upper } => {
                Barriers::new(*lower, *upper).map(|_| ())
            }
            BarrierSpec::IndependentUniformPair => Ok(()),
            BarrierSpec::DiscreteJoint {
                pairs,
                probabilities,
            } => {
                if pairs.is_empty() || pairs.len() != probabilities.len() {
                    return Err(UrnError::validation(
                        "barriers.probabilities",
                        "need one probability per pair and at least one pair",
                    ));
                }
                for &(l, u) in pairs {
                    Barriers::new(l, u)?;
                }
                if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                    return Err(UrnError::validation(
                        "barriers.probabilities",
                        "entries must be finite and >= 0",
                    ));
                }
                let total: f64 = probabilities.iter().sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(UrnError::validation(
                        "barriers.probabilities",
                        format!("must sum to 1 (got {total})"),
                    ));
                }
                Ok(())
            }
        }
    }

    /// The barrier pair when it is not random.
    pub fn as_fixed(&self) -> Option<Barriers> {
        match self {
            BarrierSpec::Fixed { lower, upper } => Some(Barriers {
                lower: *lower,
                upper: *upper,
            }),
            BarrierSpec::DiscreteJoint { pairs, probabilities } => {
                let live: Vec<_> = pairs
                    .iter()
                    .zip(probabilities)
                    .filter(|(_, &p)| p > 0.0)
                    .map(|(pair, _)| *pair)
                    .collect();
                match live.as_slice() {
                    [(l, u)] => Some(Barriers { lower: *l, upper: *u }),
                    _ => None,
                }
            }
            BarrierSpec::IndependentUniformPair => None,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Barriers {
        match self {
            BarrierSpec::Fixed { lower, upper } => Barriers {
                lower: *lower,
                upper: *upper,
            },
            BarrierSpec::IndependentUniformPair => loop {
                let lower: f64 = rng.random();
                let upper: f64 = rng.random();
                if lower < upper {
                    return Barriers { lower, upper };
                }
            },
            BarrierSpec::DiscreteJoint {
                pairs,
                probabilities,
            } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut chosen = pairs.len() - 1;
                for (i, p) in probabilities.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        chosen = i;
                        break;
                    }
                }
                let (lower, upper) = pairs[chosen];
                Barriers { lower, upper }
            }
        }
    }
}
