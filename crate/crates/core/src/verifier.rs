//! Verification of adaptation options against quality models.
//!
//! Quality estimates are the managed system's analytic ground truth plus
//! zero-mean Gaussian noise. Verification time is simulated from a per-option
//! cost so that efficiency metrics can be computed quickly.

use std::time::Instant;

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{AdaptationOption, AdaptationSpace, QualityVector, UncertaintyVector};
use crate::goals::GoalSet;
use crate::seed::derived_rng;
use crate::{Error, Result};

/// Noise-free quality of an option under the given uncertainties.
pub trait GroundTruth: Sync {
    fn n_qualities(&self) -> usize;
    fn qualities(&self, option: &AdaptationOption, u: &UncertaintyVector) -> QualityVector;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    pub quality: usize,
    pub noise_std: f64,
    /// Simulated verification cost per option, in milliseconds.
    pub cost_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationResult {
    pub ids: Vec<usize>,
    pub qualities: Vec<QualityVector>,
    pub t_sim_ms: f64,
    pub t_real_ms: f64,
}

impl VerificationResult {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verifier {
    pub models: Vec<QualityModel>,
}

impl Verifier {
    pub fn new(models: Vec<QualityModel>) -> Result<Self> {
        for m in &models {
            if !(m.noise_std.is_finite()
                && m.noise_std >= 0.0
                && m.cost_ms.is_finite()
                && m.cost_ms >= 0.0)
            {
                return Err(Error::Config(format!(
                    "quality model {} needs finite non-negative noise and cost",
                    m.quality
                )));
            }
        }
        Ok(Self { models })
    }

    /// Simulated cost of verifying one option with every model.
    pub fn cost_per_option(&self) -> f64 {
        self.models.iter().map(|m| m.cost_ms).sum()
    }

    /// Fails unless every goal quality has a quality model.
    pub fn check_coverage(&self, goals: &GoalSet) -> Result<()> {
        match goals
            .goals()
            .find(|g| !self.models.iter().any(|m| m.quality == g.quality))
        {
            Some(g) => Err(Error::Config(format!(
                "no quality model for goal quality {}",
                g.quality
            ))),
            None => Ok(()),
        }
    }

    /// Estimates the qualities of `ids` in input order. Noise for an option is
    /// drawn from a stream keyed by `(seed, option id)`, so the same option
    /// gets the same estimate regardless of what else is verified with it.
    /// Qualities without a model are reported as NaN.
    pub fn verify(
        &self,
        space: &AdaptationSpace,
        ids: &[usize],
        u: &UncertaintyVector,
        truth: &dyn GroundTruth,
        goals: &GoalSet,
        seed: u64,
    ) -> Result<VerificationResult> {
        self.check_coverage(goals)?;
        let nq = truth.n_qualities();
        if let Some(m) = self.models.iter().find(|m| m.quality >= nq) {
            return Err(Error::Config(format!(
                "quality model for index {} but the system has {nq} qualities",
                m.quality
            )));
        }
        for &id in ids {
            space.option(id)?;
        }
        let start = Instant::now();
        let qualities: Vec<QualityVector> = ids
            .par_iter()
            .map(|&id| {
                let exact = truth.qualities(&space.options()[id], u);
                let mut out = vec![f64::NAN; nq];
                let mut rng = derived_rng(seed, "verify-noise", id as u64);
                for m in &self.models {
                    let mut v = exact[m.quality];
                    if m.noise_std > 0.0 {
                        let n = Normal::new(0.0, m.noise_std).expect("validated std");
                        v += n.sample(&mut rng);
                    }
                    out[m.quality] = v;
                }
                QualityVector(out)
            })
            .collect();
        Ok(VerificationResult {
            ids: ids.to_vec(),
            qualities,
            t_sim_ms: ids.len() as f64 * self.cost_per_option(),
            t_real_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Dimension;
    use crate::goals::Goal;

    struct Linear;
    impl GroundTruth for Linear {
        fn n_qualities(&self) -> usize {
            2
        }
        fn qualities(&self, o: &AdaptationOption, u: &UncertaintyVector) -> QualityVector {
            QualityVector(vec![o.config[0] + u.values()[0], 2.0 * o.config[0]])
        }
    }

    fn setup(n: usize) -> (AdaptationSpace, UncertaintyVector) {
        let space = AdaptationSpace::enumerate(vec![Dimension::new(
            "d",
            (0..n).map(|i| i as f64).collect(),
        )])
        .unwrap();
        let mut u = UncertaintyVector::new();
        u.push("u", "", 0.5);
        (space, u)
    }

    fn models(std: f64, cost: f64) -> Verifier {
        Verifier::new(vec![
            QualityModel {
                quality: 0,
                noise_std: std,
                cost_ms: cost,
            },
            QualityModel {
                quality: 1,
                noise_std: std,
                cost_ms: 0.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn noiseless_equals_ground_truth() {
        let (space, u) = setup(5);
        let ids: Vec<usize> = (0..5).collect();
        let r = models(0.0, 1.0)
            .verify(&space, &ids, &u, &Linear, &GoalSet::default(), 1)
            .unwrap();
        for (id, q) in r.ids.iter().zip(&r.qualities) {
            assert_eq!(q, &Linear.qualities(&space.options()[*id], &u));
        }
    }

    #[test]
    fn simulated_time_is_linear() {
        let (space, u) = setup(216);
        let ids: Vec<usize> = (0..216).collect();
        let v = models(0.0, 100.0);
        let r = v
            .verify(&space, &ids, &u, &Linear, &GoalSet::default(), 1)
            .unwrap();
        assert_eq!(r.t_sim_ms, 21600.0);
        let r = v
            .verify(&space, &ids[..7], &u, &Linear, &GoalSet::default(), 1)
            .unwrap();
        assert_eq!(r.t_sim_ms, 700.0);
        let r = v
            .verify(&space, &[], &u, &Linear, &GoalSet::default(), 1)
            .unwrap();
        assert_eq!(r.t_sim_ms, 0.0);
    }

    #[test]
    fn same_seed_same_estimates() {
        let (space, u) = setup(20);
        let ids: Vec<usize> = (0..20).collect();
        let v = models(1.0, 1.0);
        let a = v
            .verify(&space, &ids, &u, &Linear, &GoalSet::default(), 9)
            .unwrap();
        let b = v
            .verify(&space, &ids, &u, &Linear, &GoalSet::default(), 9)
            .unwrap();
        assert_eq!(a.qualities, b.qualities);
        let c = v
            .verify(&space, &ids[5..8], &u, &Linear, &GoalSet::default(), 9)
            .unwrap();
        assert_eq!(c.qualities, a.qualities[5..8]);
    }

    #[test]
    fn missing_goal_model_is_config_error() {
        let (space, u) = setup(2);
        let v = Verifier::new(vec![QualityModel {
            quality: 0,
            noise_std: 0.0,
            cost_ms: 1.0,
        }])
        .unwrap();
        let gs = GoalSet::new([Goal::minimize(1)]).unwrap();
        assert!(matches!(
            v.verify(&space, &[0], &u, &Linear, &gs, 0),
            Err(Error::Config(_))
        ));
        assert!(Verifier::new(vec![QualityModel {
            quality: 0,
            noise_std: -1.0,
            cost_ms: 0.0
        }])
        .is_err());
    }

    #[test]
    fn noise_is_uncorrelated_across_options_and_qualities() {
        let n = 10_000;
        let space = AdaptationSpace::enumerate(vec![Dimension::new("d", vec![0.0; n])]).unwrap();
        let mut u = UncertaintyVector::new();
        u.push("u", "", 0.0);
        let ids: Vec<usize> = (0..n).collect();
        let r = models(1.0, 0.0)
            .verify(&space, &ids, &u, &Linear, &GoalSet::default(), 3)
            .unwrap();
        let a: Vec<f64> = r.qualities.iter().map(|q| q[0]).collect();
        let b: Vec<f64> = r.qualities.iter().map(|q| q[1]).collect();
        let corr = |x: &[f64], y: &[f64]| {
            let m = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / m, y.iter().sum::<f64>() / m);
            let cov: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
            let vx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
            let vy: f64 = y.iter().map(|q| (q - my).powi(2)).sum();
            cov / (vx * vy).sqrt()
        };
        assert!(corr(&a, &b).abs() < 0.05);
        assert!(corr(&a[..n - 1], &a[1..]).abs() < 0.05);
    }
}
