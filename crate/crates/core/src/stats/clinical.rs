//! Outcome regression on tract integrity with clinical covariates.
//!
//! Every model regresses one outcome on one integrity predictor plus
//! age, sex (male = 1), ln haematoma volume, IVH volume and treatment
//! (surgery = 1). Subjects missing the outcome are dropped per model.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::ols::{ols_fit_named, Matrix, RegressionResult};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrity::IntegrityFlags;

pub const NIHSS_MOTOR_MAX: f64 = 19.0;
pub const MRS_MAX: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Sex {
    Male,
    Female,
}

impl FromStr for Sex {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(format!("unknown sex '{other}'")),
        }
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sex::Male => "male",
            Sex::Female => "female",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Treatment {
    Surgery,
    Medical,
}

impl FromStr for Treatment {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "surgery" | "surgical" => Ok(Treatment::Surgery),
            "medical" => Ok(Treatment::Medical),
            other => Err(format!("unknown treatment '{other}'")),
        }
    }
}

impl fmt::Display for Treatment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Treatment::Surgery => "surgery",
            Treatment::Medical => "medical",
        })
    }
}

/// One subject's covariates and outcome scores.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectRecord {
    pub id: String,
    pub age: f64,
    pub sex: Sex,
    pub treatment: Treatment,
    pub haematoma_volume_ml: f64,
    pub ivh_volume_ml: f64,
    pub nihss_motor_baseline: f64,
    pub nihss_motor_day180: Option<f64>,
    pub mrs_day365: Option<f64>,
}

impl SubjectRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: String| Error::InvalidRecord {
            id: self.id.clone(),
            message,
        };
        if self.id.trim().is_empty() {
            return Err(bad("empty id".into()));
        }
        if !self.age.is_finite() || self.age < 0.0 {
            return Err(bad(format!("age {} is invalid", self.age)));
        }
        if !(self.haematoma_volume_ml > 0.0 && self.haematoma_volume_ml.is_finite()) {
            return Err(Error::NonPositiveHaematomaVolume {
                id: self.id.clone(),
                value: self.haematoma_volume_ml,
            });
        }
        if !(self.ivh_volume_ml >= 0.0 && self.ivh_volume_ml.is_finite()) {
            return Err(bad(format!("IVH volume {} is invalid", self.ivh_volume_ml)));
        }
        let in_range = |v: f64, max: f64| (0.0..=max).contains(&v);
        if !in_range(self.nihss_motor_baseline, NIHSS_MOTOR_MAX) {
            return Err(bad(format!(
                "baseline motor NIHSS {} outside 0-19",
                self.nihss_motor_baseline
            )));
        }
        if let Some(v) = self.nihss_motor_day180 {
            if !in_range(v, NIHSS_MOTOR_MAX) {
                return Err(bad(format!("day-180 motor NIHSS {v} outside 0-19")));
            }
        }
        if let Some(v) = self.mrs_day365 {
            if !in_range(v, MRS_MAX) {
                return Err(bad(format!("day-365 mRS {v} outside 0-6")));
            }
        }
        Ok(())
    }
}

/// The five NIHSS motor items: facial palsy (0-3) and four limbs (0-4).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MotorNihssComponents {
    pub facial_palsy: u8,
    pub upper_left: u8,
    pub upper_right: u8,
    pub lower_left: u8,
    pub lower_right: u8,
}

/// Motor NIHSS composite, 0 to 19.
pub fn motor_nihss(c: &MotorNihssComponents) -> Result<u8> {
    let items = [
        ("facial_palsy", c.facial_palsy, 3),
        ("upper_left", c.upper_left, 4),
        ("upper_right", c.upper_right, 4),
        ("lower_left", c.lower_left, 4),
        ("lower_right", c.lower_right, 4),
    ];
    let mut total = 0u8;
    for (name, value, max) in items {
        if value > max {
            return Err(Error::ComponentOutOfRange {
                name,
                value: value as i64,
                max: max as i64,
            });
        }
        total += value;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Predictor {
    Overlap,
    Split,
}

impl Predictor {
    pub fn term(self) -> &'static str {
        match self {
            Predictor::Overlap => "haematoma_overlap",
            Predictor::Split => "tract_split",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Predictor::Overlap => "Haematoma overlap",
            Predictor::Split => "Tract splitting",
        }
    }

    fn value(self, flags: IntegrityFlags) -> f64 {
        let on = match self {
            Predictor::Overlap => flags.overlap,
            Predictor::Split => flags.split,
        };
        if on {
            1.0
        } else {
            0.0
        }
    }
}

/// Which integrity predictors enter a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum PredictorSet {
    Single(Predictor),
    /// Both predictors in one model.
    Joint,
}

impl PredictorSet {
    pub fn predictors(self) -> Vec<Predictor> {
        match self {
            PredictorSet::Single(p) => vec![p],
            PredictorSet::Joint => vec![Predictor::Overlap, Predictor::Split],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PredictorSet::Single(p) => p.label(),
            PredictorSet::Joint => "Joint (overlap + split)",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Outcome {
    NihssBaseline,
    NihssDay180,
    MrsDay365,
}

impl Outcome {
    pub const ALL: [Outcome; 3] = [
        Outcome::NihssBaseline,
        Outcome::NihssDay180,
        Outcome::MrsDay365,
    ];

    pub fn value(self, r: &SubjectRecord) -> Option<f64> {
        match self {
            Outcome::NihssBaseline => Some(r.nihss_motor_baseline),
            Outcome::NihssDay180 => r.nihss_motor_day180,
            Outcome::MrsDay365 => r.mrs_day365,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Outcome::NihssBaseline => "NIHSS day 1",
            Outcome::NihssDay180 => "NIHSS day 180",
            Outcome::MrsDay365 => "mRS day 365",
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Outcome::NihssBaseline => "nihss_motor_d1",
            Outcome::NihssDay180 => "nihss_motor_d180",
            Outcome::MrsDay365 => "mrs_d365",
        }
    }
}

/// Integrity flags for one subject, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubjectFlags {
    pub id: String,
    pub flags: IntegrityFlags,
}

/// Pairs every record with its integrity flags. Both sides must carry
/// the same set of unique ids.
pub fn align_flags(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
) -> Result<Vec<IntegrityFlags>> {
    let mut by_id = BTreeMap::new();
    for row in integrity {
        if by_id.insert(row.id.as_str(), row.flags).is_some() {
            return Err(Error::IdMismatch(format!(
                "duplicate id '{}' in integrity results",
                row.id
            )));
        }
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::with_capacity(cohort.len());
    for r in cohort {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::IdMismatch(format!(
                "duplicate id '{}' in records",
                r.id
            )));
        }
        match by_id.get(r.id.as_str()) {
            Some(f) => out.push(*f),
            None => {
                return Err(Error::IdMismatch(format!(
                    "subject '{}' has no integrity result",
                    r.id
                )))
            }
        }
    }
    if let Some(extra) = by_id.keys().find(|id| !seen.contains(*id)) {
        return Err(Error::IdMismatch(format!(
            "integrity result for '{extra}' has no subject record"
        )));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Design {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub term_names: Vec<String>,
    pub ids: Vec<String>,
    /// Subjects dropped for a missing outcome.
    pub dropped: usize,
}

pub const COVARIATE_TERMS: [&str; 5] = [
    "age",
    "sex_male",
    "ln_haematoma_volume",
    "ivh_volume",
    "treatment_surgery",
];

/// Design columns: intercept, predictor(s), age, sex, ln(HV), IVH, treatment.
pub fn build_design_matrix(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
    predictors: PredictorSet,
    outcome: Outcome,
) -> Result<Design> {
    let flags = align_flags(cohort, integrity)?;
    let preds = predictors.predictors();
    let mut term_names = vec!["intercept".to_string()];
    term_names.extend(preds.iter().map(|p| p.term().to_string()));
    term_names.extend(COVARIATE_TERMS.iter().map(|s| s.to_string()));

    let mut rows = Vec::with_capacity(cohort.len());
    let mut y = Vec::with_capacity(cohort.len());
    let mut ids = Vec::with_capacity(cohort.len());
    let mut dropped = 0;
    for (r, f) in cohort.iter().zip(flags) {
        if !(r.haematoma_volume_ml > 0.0) {
            return Err(Error::NonPositiveHaematomaVolume {
                id: r.id.clone(),
                value: r.haematoma_volume_ml,
            });
        }
        let Some(outcome_value) = outcome.value(r) else {
            dropped += 1;
            continue;
        };
        let mut row = Vec::with_capacity(term_names.len());
        row.push(1.0);
        row.extend(preds.iter().map(|p| p.value(f)));
        row.push(r.age);
        row.push(if r.sex == Sex::Male { 1.0 } else { 0.0 });
        row.push(r.haematoma_volume_ml.ln());
        row.push(r.ivh_volume_ml);
        row.push(if r.treatment == Treatment::Surgery {
            1.0
        } else {
            0.0
        });
        rows.push(row);
        y.push(outcome_value);
        ids.push(r.id.clone());
    }
    if rows.is_empty() {
        return Err(Error::EmptyCohortAfterFiltering {
            outcome: outcome.key().to_string(),
            dropped,
        });
    }
    Ok(Design {
        x: Matrix::from_rows(&rows),
        y,
        term_names,
        ids,
        dropped,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelFit {
    pub predictors: PredictorSet,
    pub outcome: Outcome,
    pub dropped: usize,
    pub result: RegressionResult,
}

impl ModelFit {
    /// Coefficient index of `p` in this model.
    pub fn predictor_index(&self, p: Predictor) -> Option<usize> {
        self.result.term_index(p.term())
    }
}

pub fn fit_model(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
    predictors: PredictorSet,
    outcome: Outcome,
) -> Result<ModelFit> {
    let design = build_design_matrix(cohort, integrity, predictors, outcome)?;
    let result = ols_fit_named(&design.x, &design.y, design.term_names)?;
    Ok(ModelFit {
        predictors,
        outcome,
        dropped: design.dropped,
        result,
    })
}

fn fit_all(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
    specs: Vec<(PredictorSet, Outcome)>,
    exec: Execution,
) -> Result<Vec<ModelFit>> {
    exec.map(&specs, |&(p, o)| fit_model(cohort, integrity, p, o))
        .into_iter()
        .collect()
}

/// The six single-predictor models, ordered by outcome then predictor
/// (overlap before split).
pub fn fit_single_predictor_models(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
    exec: Execution,
) -> Result<Vec<ModelFit>> {
    let specs = Outcome::ALL
        .iter()
        .flat_map(|&o| [Predictor::Overlap, Predictor::Split].map(|p| (PredictorSet::Single(p), o)))
        .collect();
    fit_all(cohort, integrity, specs, exec)
}

/// One model per outcome with both integrity predictors.
pub fn fit_joint_models(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
    exec: Execution,
) -> Result<Vec<ModelFit>> {
    let specs = Outcome::ALL
        .iter()
        .map(|&o| (PredictorSet::Joint, o))
        .collect();
    fit_all(cohort, integrity, specs, exec)
}

pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.0001 {
        "****"
    } else if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        "(ns)"
    }
}

pub fn format_p(p: f64) -> String {
    if p.is_nan() {
        "NA".to_string()
    } else if p < 0.0001 {
        "<0.0001".to_string()
    } else if p < 0.001 {
        format!("{p:.4}")
    } else {
        format!("{p:.3}")
    }
}

/// `0.028 *`, `<0.0001 ****`, `0.097 (ns)`.
pub fn format_p_with_stars(p: f64) -> String {
    if p.is_nan() {
        return "NA".to_string();
    }
    format!("{} {}", format_p(p), significance_stars(p))
}

/// `2.13 [1.38, 2.87]`
pub fn format_coef_ci(beta: f64, lo: f64, hi: f64) -> String {
    format!("{beta:.2} [{lo:.2}, {hi:.2}]")
}
