//! Report rendering: metadata headers and the regression summary table.

use std::fmt::Write as _;

use serde::Serialize;

use crate::cohort::QUANTILE_CONVENTION;
use crate::stats::clinical::{
    format_coef_ci, format_p_with_stars, ModelFit, Outcome, Predictor, PredictorSet,
};

pub const TOOL_VERSION: &str = concat!("cstkit ", env!("CARGO_PKG_VERSION"));
pub const SE_TYPE: &str = "classical OLS (homoskedastic), t-based 95% CI";

/// Provenance carried at the top of every report file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportMetadata {
    pub tool: String,
    pub threshold: String,
    pub connectivity: String,
    pub min_component: String,
    pub haematoma_source: String,
    pub quantile_convention: String,
    pub se_type: String,
}

impl ReportMetadata {
    pub fn new(
        threshold: String,
        connectivity: String,
        min_component: String,
        haematoma_source: String,
    ) -> Self {
        ReportMetadata {
            tool: TOOL_VERSION.to_string(),
            threshold,
            connectivity,
            min_component,
            haematoma_source,
            quantile_convention: QUANTILE_CONVENTION.to_string(),
            se_type: SE_TYPE.to_string(),
        }
    }

    pub fn pairs(&self) -> [(&'static str, &str); 7] {
        [
            ("tool", &self.tool),
            ("threshold", &self.threshold),
            ("connectivity", &self.connectivity),
            ("min_component", &self.min_component),
            ("haematoma_source", &self.haematoma_source),
            ("quantile_convention", &self.quantile_convention),
            ("se_type", &self.se_type),
        ]
    }

    /// `# key: value` lines.
    pub fn header(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.pairs() {
            let _ = writeln!(out, "# {k}: {v}");
        }
        out
    }

    /// Rebuilds metadata from `# key: value` lines; unknown keys are ignored
    /// and absent ones read as "unknown".
    pub fn from_header(text: &str) -> Self {
        let mut m = ReportMetadata::new(
            "unknown".into(),
            "unknown".into(),
            "unknown".into(),
            "unknown".into(),
        );
        for line in text.lines() {
            let Some(rest) = line.strip_prefix('#') else {
                continue;
            };
            let Some((k, v)) = rest.split_once(':') else {
                continue;
            };
            let v = v.trim().to_string();
            match k.trim() {
                "threshold" => m.threshold = v,
                "connectivity" => m.connectivity = v,
                "min_component" => m.min_component = v,
                "haematoma_source" => m.haematoma_source = v,
                _ => {}
            }
        }
        m
    }
}

fn pad(s: &str, w: usize) -> String {
    format!("{s:<w$}", w = w)
}

fn width(s: &str) -> usize {
    s.chars().count()
}

fn find(models: &[ModelFit], set: PredictorSet, outcome: Outcome) -> Option<&ModelFit> {
    models
        .iter()
        .find(|m| m.predictors == set && m.outcome == outcome)
}

/// Cells for one predictor in one model: coefficient line and p line.
fn cells(fit: Option<&ModelFit>, p: Predictor) -> (String, String) {
    match fit.and_then(|f| f.predictor_index(p).map(|j| (f, j))) {
        Some((f, j)) => {
            let r = &f.result;
            (
                format_coef_ci(r.coefficients[j], r.ci_low[j], r.ci_high[j]),
                format_p_with_stars(r.p_values[j]),
            )
        }
        None => ("NA".into(), "NA".into()),
    }
}

/// Outcome rows by predictor columns. Single-predictor models fill each
/// column from its own fit; joint models fill both from one fit.
pub fn regression_table(models: &[ModelFit], joint: bool) -> String {
    let preds = [Predictor::Overlap, Predictor::Split];
    let mut rows: Vec<[String; 4]> = vec![[
        String::new(),
        String::new(),
        preds[0].label().to_string(),
        preds[1].label().to_string(),
    ]];
    for o in Outcome::ALL {
        let (c0, p0, c1, p1) = if joint {
            let f = find(models, PredictorSet::Joint, o);
            let (c0, p0) = cells(f, preds[0]);
            let (c1, p1) = cells(f, preds[1]);
            (c0, p0, c1, p1)
        } else {
            let (c0, p0) = cells(find(models, PredictorSet::Single(preds[0]), o), preds[0]);
            let (c1, p1) = cells(find(models, PredictorSet::Single(preds[1]), o), preds[1]);
            (c0, p0, c1, p1)
        };
        rows.push([
            o.label().to_string(),
            "β Coefficient [95% CI]".into(),
            c0,
            c1,
        ]);
        rows.push([String::new(), "p-value".into(), p0, p1]);
    }
    let mut w = [0usize; 4];
    for r in &rows {
        for (i, c) in r.iter().enumerate() {
            w[i] = w[i].max(width(c));
        }
    }
    let mut out = String::new();
    for r in &rows {
        let line = format!(
            "{}  {}  {}  {}",
            pad(&r[0], w[0]),
            pad(&r[1], w[1]),
            pad(&r[2], w[2]),
            r[3]
        );
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        format!("{x:.6}")
    }
}

/// Full coefficient listing for every model.
pub fn model_details(models: &[ModelFit]) -> String {
    let mut out = String::new();
    for m in models {
        let r = &m.result;
        let _ = writeln!(
            out,
            "[{} ~ {}] n = {}, dropped (missing outcome) = {}, dof = {}, R² = {:.4}{}",
            m.outcome.label(),
            m.predictors.label(),
            r.n,
            m.dropped,
            r.dof,
            r.r_squared,
            if r.degenerate {
                ", exact fit (inference undefined)"
            } else {
                ""
            }
        );
        let tw = r
            .term_names
            .iter()
            .map(|t| width(t))
            .max()
            .unwrap_or(4)
            .max(4);
        let _ = writeln!(
            out,
            "  {}  {:>12}  {:>12}  {:>12}  {:>12}  {:>10}  {}",
            pad("term", tw),
            "coef",
            "se",
            "ci_low",
            "ci_high",
            "t",
            "p"
        );
        for (j, t) in r.term_names.iter().enumerate() {
            let _ = writeln!(
                out,
                "  {}  {:>12.4}  {:>12.4}  {:>12.4}  {:>12.4}  {:>10}  {}",
                pad(t, tw),
                r.coefficients[j],
                r.standard_errors[j],
                r.ci_low[j],
                r.ci_high[j],
                if r.t_stats[j].is_nan() {
                    "NA".to_string()
                } else {
                    format!("{:.3}", r.t_stats[j])
                },
                format_p_with_stars(r.p_values[j])
            );
        }
        out.push('\n');
    }
    out
}

pub const REGRESSION_CSV_COLUMNS: [&str; 13] = [
    "model",
    "outcome",
    "term",
    "coef",
    "se",
    "ci_low",
    "ci_high",
    "t",
    "p",
    "stars",
    "n",
    "dropped",
    "r_squared",
];

/// One row per coefficient of every model.
pub fn regression_csv(models: &[ModelFit]) -> String {
    let mut out = REGRESSION_CSV_COLUMNS.join(",");
    out.push('\n');
    for m in models {
        let r = &m.result;
        for (j, t) in r.term_names.iter().enumerate() {
            let stars = if r.p_values[j].is_nan() {
                "NA"
            } else {
                crate::stats::clinical::significance_stars(r.p_values[j])
            };
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{:.6}",
                m.predictors.label(),
                m.outcome.key(),
                t,
                num(r.coefficients[j]),
                num(r.standard_errors[j]),
                num(r.ci_low[j]),
                num(r.ci_high[j]),
                num(r.t_stats[j]),
                if r.p_values[j].is_nan() {
                    "NA".to_string()
                } else {
                    format!("{:.6e}", r.p_values[j])
                },
                stars,
                r.n,
                m.dropped,
                r.r_squared
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metadata_header_round_trip() {
        let m = ReportMetadata::new("0.5".into(), "26".into(), "0".into(), "manual".into());
        let h = m.header();
        assert!(h.starts_with("# tool: cstkit "));
        assert!(h.contains("# se_type: classical OLS"));
        assert_eq!(ReportMetadata::from_header(&h), m);
    }
}
