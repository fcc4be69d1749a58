//! Seeded Monte-Carlo checks of regression inference on synthetic cohorts.

use serde::Serialize;

use crate::error::Result;
use crate::exec::Execution;
use crate::phantom::{simulate_records, CohortSimSpec, EffectSpec, FlagAssignment, OutcomeEffects};
use crate::stats::clinical::{fit_model, Outcome, Predictor, PredictorSet};

#[derive(Debug, Clone, Copy)]
pub struct CalibrationConfig {
    pub n: usize,
    pub effect: EffectSpec,
    pub predictor: Predictor,
    pub flags: FlagAssignment,
    pub replications: usize,
    pub seed: u64,
}

impl CalibrationConfig {
    /// Baseline NIHSS with the given split effect and noise level.
    pub fn split_effect(
        n: usize,
        beta_split: f64,
        sigma: f64,
        replications: usize,
        seed: u64,
    ) -> Self {
        let mut effect = OutcomeEffects::default().nihss_baseline;
        effect.split = beta_split;
        effect.sigma = sigma;
        CalibrationConfig {
            n,
            effect,
            predictor: Predictor::Split,
            flags: FlagAssignment::Probabilities {
                overlap: 110.0 / 487.0,
                split: 170.0 / 487.0,
            },
            replications,
            seed,
        }
    }

    fn true_beta(&self) -> f64 {
        match self.predictor {
            Predictor::Overlap => self.effect.overlap,
            Predictor::Split => self.effect.split,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Replicate {
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_value: f64,
    pub clamp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibrationSummary {
    pub true_beta: f64,
    pub replicates: Vec<Replicate>,
}

impl CalibrationSummary {
    pub fn covered(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.ci_low <= self.true_beta && self.true_beta <= r.ci_high)
            .count()
    }

    pub fn coverage(&self) -> f64 {
        self.covered() as f64 / self.replicates.len() as f64
    }

    /// Fraction of replicates with p < `alpha`.
    pub fn rejection_rate(&self, alpha: f64) -> f64 {
        let k = self.replicates.iter().filter(|r| r.p_value < alpha).count();
        k as f64 / self.replicates.len() as f64
    }

    pub fn mean_estimate(&self) -> f64 {
        self.replicates.iter().map(|r| r.estimate).sum::<f64>() / self.replicates.len() as f64
    }
}

/// Replicate `i` simulates with seed `cfg.seed + i`.
pub fn run_calibration(cfg: &CalibrationConfig, exec: Execution) -> Result<CalibrationSummary> {
    let mut effects = OutcomeEffects::default();
    effects.nihss_baseline = cfg.effect;
    let spec = CohortSimSpec {
        n: cfg.n,
        flags: cfg.flags,
        effects,
        missing_rate_day180: 0.0,
        missing_rate_day365: 0.0,
    };
    let replicates = exec
        .map_range(cfg.replications, |i| -> Result<Replicate> {
            let cohort = simulate_records(&spec, cfg.seed.wrapping_add(i as u64))?;
            let fit = fit_model(
                &cohort.records,
                &cohort.flags,
                PredictorSet::Single(cfg.predictor),
                Outcome::NihssBaseline,
            )?;
            let j = fit
                .predictor_index(cfg.predictor)
                .expect("predictor column present");
            let r = &fit.result;
            Ok(Replicate {
                estimate: r.coefficients[j],
                ci_low: r.ci_low[j],
                ci_high: r.ci_high[j],
                p_value: r.p_values[j],
                clamp_rate: cohort.clamped.nihss_baseline as f64 / cfg.n as f64,
            })
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibrationSummary {
        true_beta: cfg.true_beta(),
        replicates,
    })
}
