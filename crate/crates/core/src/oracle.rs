//! Exact law of the urn at small horizons by exhaustive tree expansion.
//!
//! Each step branches on the colour drawn (weights `Z`, `1 - Z`) and on every
//! atom of the reinforcement law; children with bit-identical `(black, total)`
//! weights are merged. With integer initial weights and integer atoms every
//! weight is a small integer, so the merge is exact.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributions::ReinforcementSpec;
use crate::error::{Result, UrnError};
use crate::urn::{Barriers, StepDraw, UrnState};

pub const MAX_HORIZON: usize = 14;
pub const MAX_BRANCHES: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    pub z: f64,
    pub s: f64,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub support: Vec<SupportPoint>,
    pub horizon: usize,
}

impl ExactDistribution {
    pub fn total_probability(&self) -> f64 {
        self.support.iter().map(|p| p.probability).sum()
    }

    /// Law of `Z_h` alone, keyed by the bit pattern of `z`.
    pub fn z_marginal(&self) -> BTreeMap<u64, f64> {
        let mut out = BTreeMap::new();
        for p in &self.support {
            *out.entry(p.z.to_bits()).or_insert(0.0) += p.probability;
        }
        out
    }

    /// Total-variation distance between the `Z_h` marginal and the empirical
    /// law of `samples`.
    pub fn total_variation_to(&self, samples: &[f64]) -> f64 {
        let exact = self.z_marginal();
        let mut empirical: BTreeMap<u64, f64> = BTreeMap::new();
        let w = 1.0 / samples.len() as f64;
        for z in samples {
            *empirical.entry(z.to_bits()).or_insert(0.0) += w;
        }
        let mut keys: Vec<u64> = exact.keys().chain(empirical.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        0.5 * keys
            .iter()
            .map(|k| (exact.get(k).unwrap_or(&0.0) - empirical.get(k).unwrap_or(&0.0)).abs())
            .sum::<f64>()
    }
}

/// Expand every path of `horizon` steps.
pub fn enumerate_exact(
    b: f64,
    r: f64,
    barriers: Barriers,
    reinforcement: &ReinforcementSpec,
    horizon: usize,
) -> Result<ExactDistribution> {
    let atoms = reinforcement.finite_support().ok_or_else(|| {
        UrnError::validation("reinforcement", "exact enumeration needs a finite-support law")
    })?;
    if horizon > MAX_HORIZON {
        return Err(UrnError::Capacity(format!(
            "horizon {horizon} exceeds the enumeration cap {MAX_HORIZON}"
        )));
    }
    let branches = (2.0 * atoms.len() as f64).powi(horizon as i32);
    if branches > MAX_BRANCHES {
        return Err(UrnError::Capacity(format!(
            "{branches:e} branches exceed the guard {MAX_BRANCHES:e}"
        )));
    }

    let start = UrnState::init(b, r, barriers)?;
    let mut layer: BTreeMap<(u64, u64), (UrnState, f64)> = BTreeMap::new();
    layer.insert(key(&start), (start, 1.0));
    for _ in 0..horizon {
        let mut next: BTreeMap<(u64, u64), (UrnState, f64)> = BTreeMap::new();
        for (state, p) in layer.values() {
            for (x, px) in [(true, state.z), (false, 1.0 - state.z)] {
                if px == 0.0 {
                    continue;
                }
                for &(amount, pa) in &atoms {
                    let child = state.step(&StepDraw {
                        x,
                        amount,
                        red_amount: None,
                    });
                    next.entry(key(&child))
                        .and_modify(|(_, q)| *q += p * px * pa)
                        .or_insert((child, p * px * pa));
                }
            }
        }
        layer = next;
    }

    let support = layer
        .into_values()
        .map(|(s, probability)| SupportPoint {
            z: s.z,
            s: s.total,
            probability,
        })
        .collect();
    Ok(ExactDistribution { support, horizon })
}

fn key(state: &UrnState) -> (u64, u64) {
    (state.black.to_bits(), state.total.to_bits())
}

/// `E(Z_h) = sum z p`.
pub fn exact_mean_z(dist: &ExactDistribution) -> f64 {
    dist.support.iter().map(|p| p.z * p.probability).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> ReinforcementSpec {
        ReinforcementSpec::point_mass(1.0).unwrap()
    }

    fn free() -> Barriers {
        Barriers::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn one_step_polya() {
        let d = enumerate_exact(1.0, 1.0, free(), &unit(), 1).unwrap();
        assert_eq!(d.support.len(), 2);
        let mut zs: Vec<(f64, f64)> = d.support.iter().map(|p| (p.z, p.probability)).collect();
        zs.sort_by(|a, b| a.0.total_cmp(&b.0));
        assert_eq!(zs, vec![(1.0 / 3.0, 0.5), (2.0 / 3.0, 0.5)]);
    }

    /// Classical Pólya urn from (1, 1): `Z_n` uniform on `(1 + j)/(n + 2)`.
    #[test]
    fn polya_uniform_law() {
        for n in 1..=10 {
            let d = enumerate_exact(1.0, 1.0, free(), &unit(), n).unwrap();
            assert_eq!(d.support.len(), n + 1);
            for p in &d.support {
                let j = p.z * (n as f64 + 2.0) - 1.0;
                assert!((j - j.round()).abs() < 1e-9);
                assert!((p.probability - 1.0 / (n as f64 + 1.0)).abs() < 1e-12);
            }
            assert!((exact_mean_z(&d) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_reinforcement_is_a_point() {
        let zero = ReinforcementSpec::point_mass(0.0).unwrap();
        let d = enumerate_exact(2.0, 3.0, Barriers::new(0.3, 0.6).unwrap(), &zero, 5).unwrap();
        assert_eq!(d.support, vec![SupportPoint { z: 0.4, s: 5.0, probability: 1.0 }]);
    }

    #[test]
    fn martingale_mean_without_barriers() {
        let spec = ReinforcementSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        for h in 0..=10 {
            let d = enumerate_exact(1.0, 3.0, free(), &spec, h).unwrap();
            assert!((d.total_probability() - 1.0).abs() < 1e-12);
            assert!((exact_mean_z(&d) - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn sub_and_super_martingale_with_one_barrier() {
        let mut prev_sub: f64 = 0.0;
        let mut prev_super: f64 = 1.0;
        for h in 0..=8 {
            // U = 1: H_n >= 0, so E Z_n is non-decreasing
            let sub = exact_mean_z(&enumerate_exact(1.0, 1.0, Barriers::new(0.5, 1.0).unwrap(), &unit(), h).unwrap());
            assert!(sub >= prev_sub - 1e-12);
            assert!(sub >= 0.5 - 1e-12);
            prev_sub = sub;
            // L = 0: non-increasing
            let sup = exact_mean_z(&enumerate_exact(1.0, 1.0, Barriers::new(0.0, 0.5).unwrap(), &unit(), h).unwrap());
            assert!(sup <= prev_super + 1e-12);
            prev_super = sup;
        }
        assert!(prev_sub > 0.5);
    }

    #[test]
    fn guards() {
        let two = ReinforcementSpec::discrete(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        assert!(matches!(enumerate_exact(1.0, 1.0, free(), &two, 14), Err(UrnError::Capacity(_))));
        assert!(matches!(enumerate_exact(1.0, 1.0, free(), &unit(), 15), Err(UrnError::Capacity(_))));
        assert!(enumerate_exact(1.0, 1.0, free(), &unit(), 14).is_ok());
        let cont = ReinforcementSpec::uniform(0.0, 1.0).unwrap();
        assert!(enumerate_exact(1.0, 1.0, free(), &cont, 3).is_err());
    }

    #[test]
    fn total_variation_of_exact_samples() {
        let d = enumerate_exact(1.0, 1.0, free(), &unit(), 1).unwrap();
        assert_eq!(d.total_variation_to(&[1.0 / 3.0, 2.0 / 3.0]), 0.0);
        assert!((d.total_variation_to(&[1.0 / 3.0]) - 0.5).abs() < 1e-15);
    }
}
