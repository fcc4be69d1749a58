//! Cohort summary table stratified by tract integrity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::stats::clinical::{align_flags, Sex, SubjectFlags, SubjectRecord, Treatment};

pub const QUANTILE_CONVENTION: &str = "type-7 (linear interpolation of order statistics)";

/// Type-7 quantile of already sorted values.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Median (midpoint of the middle two for even n) and `Q3 - Q1`.
pub fn median_iqr(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    };
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    Ok((median, iqr))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Stratum {
    All,
    CstInvolvement,
    NoCstInvolvement,
    TractSplit,
    NoSplit,
}

impl Stratum {
    pub const ALL: [Stratum; 5] = [
        Stratum::All,
        Stratum::CstInvolvement,
        Stratum::NoCstInvolvement,
        Stratum::TractSplit,
        Stratum::NoSplit,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stratum::All => "All",
            Stratum::CstInvolvement => "CST involvement",
            Stratum::NoCstInvolvement => "No CST involvement",
            Stratum::TractSplit => "Tract split",
            Stratum::NoSplit => "No split",
        }
    }

    fn key(self) -> &'static str {
        match self {
            Stratum::All => "all",
            Stratum::CstInvolvement => "cst_involvement",
            Stratum::NoCstInvolvement => "no_cst_involvement",
            Stratum::TractSplit => "tract_split",
            Stratum::NoSplit => "no_split",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MedianIqr {
    pub median: f64,
    pub iqr: f64,
    /// Subjects with a non-missing value.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratumSummary {
    pub stratum: Stratum,
    pub n: usize,
    pub age_mean: Option<f64>,
    pub male_n: usize,
    pub surgery_n: usize,
    pub haematoma_volume_mean: Option<f64>,
    pub ivh_volume_mean: Option<f64>,
    pub nihss_baseline: Option<MedianIqr>,
    pub nihss_day180: Option<MedianIqr>,
    pub mrs_day365: Option<MedianIqr>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortTable {
    pub columns: Vec<StratumSummary>,
}

/// Order-independent mean (values are summed in sorted order).
fn mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn summarize_scores(values: Vec<f64>) -> Option<MedianIqr> {
    let n = values.len();
    median_iqr(&values)
        .ok()
        .map(|(median, iqr)| MedianIqr { median, iqr, n })
}

fn summarize(stratum: Stratum, members: &[&SubjectRecord]) -> StratumSummary {
    StratumSummary {
        stratum,
        n: members.len(),
        age_mean: mean(members.iter().map(|r| r.age).collect()),
        male_n: members.iter().filter(|r| r.sex == Sex::Male).count(),
        surgery_n: members
            .iter()
            .filter(|r| r.treatment == Treatment::Surgery)
            .count(),
        haematoma_volume_mean: mean(members.iter().map(|r| r.haematoma_volume_ml).collect()),
        ivh_volume_mean: mean(members.iter().map(|r| r.ivh_volume_ml).collect()),
        nihss_baseline: summarize_scores(members.iter().map(|r| r.nihss_motor_baseline).collect()),
        nihss_day180: summarize_scores(
            members
                .iter()
                .filter_map(|r| r.nihss_motor_day180)
                .collect(),
        ),
        mrs_day365: summarize_scores(members.iter().filter_map(|r| r.mrs_day365).collect()),
    }
}

pub fn build_cohort_table(
    cohort: &[SubjectRecord],
    integrity: &[SubjectFlags],
) -> Result<CohortTable> {
    if cohort.is_empty() {
        return Err(Error::EmptyCohort);
    }
    let flags = align_flags(cohort, integrity)?;
    let columns = Stratum::ALL
        .iter()
        .map(|&s| {
            let members: Vec<&SubjectRecord> = cohort
                .iter()
                .zip(&flags)
                .filter(|(_, f)| match s {
                    Stratum::All => true,
                    Stratum::CstInvolvement => f.overlap,
                    Stratum::NoCstInvolvement => !f.overlap,
                    Stratum::TractSplit => f.split,
                    Stratum::NoSplit => !f.split,
                })
                .map(|(r, _)| r)
                .collect();
            summarize(s, &members)
        })
        .collect();
    Ok(CohortTable { columns })
}

/// Up to two decimals with trailing zeros removed: `10`, `4.5`, `2.25`.
pub fn format_trimmed(x: f64) -> String {
    let s = format!("{x:.2}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn fmt_mean(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| format!("{v:.1}"))
}

fn fmt_mi(x: Option<MedianIqr>) -> String {
    x.map_or_else(
        || "NA".to_string(),
        |m| format!("{} [{}]", format_trimmed(m.median), format_trimmed(m.iqr)),
    )
}

impl CohortTable {
    pub fn column(&self, s: Stratum) -> &StratumSummary {
        self.columns
            .iter()
            .find(|c| c.stratum == s)
            .expect("every stratum is present")
    }

    fn text_rows(&self) -> Vec<(String, Vec<String>)> {
        let row = |label: &str, f: &dyn Fn(&StratumSummary) -> String| {
            (label.to_string(), self.columns.iter().map(f).collect())
        };
        vec![
            row("n", &|c| c.n.to_string()),
            row("Age (mean)", &|c| fmt_mean(c.age_mean)),
            row("Sex male (n)", &|c| c.male_n.to_string()),
            row("Surgery (n)", &|c| c.surgery_n.to_string()),
            row("Haematoma volume, mL (mean)", &|c| {
                fmt_mean(c.haematoma_volume_mean)
            }),
            row("IVH volume, mL (mean)", &|c| fmt_mean(c.ivh_volume_mean)),
            row("NIHSS baseline (median [IQR])", &|c| {
                fmt_mi(c.nihss_baseline)
            }),
            row("NIHSS day 180 (median [IQR])", &|c| fmt_mi(c.nihss_day180)),
            row("mRS day 365 (median [IQR])", &|c| fmt_mi(c.mrs_day365)),
        ]
    }

    /// Aligned plain-text table with a footer on per-cell counts.
    pub fn render_text(&self) -> String {
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().map(|c| c.stratum.label().to_string()));
        let mut rows = vec![header];
        for (label, cells) in self.text_rows() {
            let mut r = vec![label];
            r.extend(cells);
            rows.push(r);
        }
        let ncols = rows[0].len();
        let widths: Vec<usize> = (0..ncols)
            .map(|i| rows.iter().map(|r| r[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for r in &rows {
            let line: Vec<String> = r
                .iter()
                .enumerate()
                .map(|(i, cell)| {
                    if i == 0 {
                        format!("{cell:<w$}", w = widths[i])
                    } else {
                        format!("{cell:>w$}", w = widths[i])
                    }
                })
                .collect();
            out.push_str(line.join("  ").trim_end());
            out.push('\n');
        }
        out.push('\n');
        let cell_n = |m: Option<MedianIqr>| m.map_or(0, |m| m.n).to_string();
        for (label, get) in [
            (
                "NIHSS baseline",
                (|c: &StratumSummary| c.nihss_baseline) as fn(&StratumSummary) -> Option<MedianIqr>,
            ),
            ("NIHSS day 180", |c| c.nihss_day180),
            ("mRS day 365", |c| c.mrs_day365),
        ] {
            let ns: Vec<String> = self.columns.iter().map(|c| cell_n(get(c))).collect();
            out.push_str(&format!("non-missing n, {label}: {}\n", ns.join(", ")));
        }
        out.push_str(&format!("IQR = Q3 - Q1, quantiles {QUANTILE_CONVENTION}\n"));
        out
    }

    /// One row per stratum with numeric cells.
    pub fn render_csv(&self) -> String {
        let mut out = String::from(
            "stratum,n,age_mean,male_n,surgery_n,hv_mean_ml,ivh_mean_ml,\
nihss_d1_median,nihss_d1_iqr,nihss_d1_n,nihss_d180_median,nihss_d180_iqr,nihss_d180_n,\
mrs_d365_median,mrs_d365_iqr,mrs_d365_n\n",
        );
        let num = |x: Option<f64>| x.map_or_else(String::new, |v| format!("{v:.4}"));
        let mi = |m: Option<MedianIqr>| match m {
            Some(m) => format!(
                "{},{},{}",
                format_trimmed(m.median),
                format_trimmed(m.iqr),
                m.n
            ),
            None => ",,0".to_string(),
        };
        for c in &self.columns {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                c.stratum.key(),
                c.n,
                num(c.age_mean),
                c.male_n,
                c.surgery_n,
                num(c.haematoma_volume_mean),
                num(c.ivh_volume_mean),
                mi(c.nihss_baseline),
                mi(c.nihss_day180),
                mi(c.mrs_day365),
            ));
        }
        out
    }
}
