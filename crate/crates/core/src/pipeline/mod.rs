//! Batch commands behind the `cstkit` binary. Each returns values as well as
//! writing files so the same paths can be driven from tests.

pub mod kv;
pub mod manifest;
pub mod report;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cohort::{build_cohort_table, CohortTable};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrity::{assess_integrity, dice, IntegrityFlags, IntegrityResult};
use crate::mask::{filter_small_components, Connectivity, MaskVolume};
use crate::nifti::{binarize, binarize_relative, read_volume};
use crate::phantom::{
    generate_phantom, generate_synthetic_cohort, CohortSimSpec, Phantom, PhantomSpec,
    SyntheticCohort,
};
use crate::stats::clinical::{
    fit_joint_models, fit_single_predictor_models, ModelFit, SubjectFlags, SubjectRecord,
};
use crate::stats::records::write_records;

pub use manifest::{parse_phantom_spec, render_phantom_spec, ManifestSubject, RunManifest};
pub use report::{ReportMetadata, SE_TYPE, TOOL_VERSION};

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// How a probability-like volume becomes a mask.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// Voxels with value strictly above the cut-off.
    Absolute(f64),
    /// Cut-off at `min + fraction * (max - min)` of each volume.
    Relative(f64),
}

impl Threshold {
    pub fn describe(self) -> String {
        match self {
            Threshold::Absolute(t) => format!("{t} (absolute, value > threshold)"),
            Threshold::Relative(f) => {
                format!("{f} of value range (relative, value > min + f*(max-min))")
            }
        }
    }
}

pub fn load_mask(path: &Path, threshold: Threshold) -> Result<MaskVolume> {
    let vol = read_volume(path)?;
    match threshold {
        Threshold::Absolute(t) => Ok(binarize(&vol, t)),
        Threshold::Relative(f) => Ok(binarize_relative(&vol, f)),
    }
}

/// Dice between two mask files.
pub fn run_dice(pred: &Path, truth: &Path, threshold: Threshold) -> Result<f64> {
    let a = load_mask(pred, threshold)?;
    let b = load_mask(truth, threshold)?;
    dice(&a, &b)
}

#[derive(Debug, Clone)]
pub struct IntegrityOptions {
    pub threshold: Threshold,
    pub connectivity: Connectivity,
    pub min_component: usize,
    /// Overrides both the manifest and per-subject midlines.
    pub midline_x: Option<f64>,
    pub exec: Execution,
}

impl Default for IntegrityOptions {
    fn default() -> Self {
        IntegrityOptions {
            threshold: Threshold::Absolute(0.5),
            connectivity: Connectivity::TwentySix,
            min_component: 0,
            midline_x: None,
            exec: Execution::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectRow {
    pub id: String,
    pub result: IntegrityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubjectFailure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrityRun {
    pub metadata: ReportMetadata,
    pub rows: Vec<SubjectRow>,
    pub failures: Vec<SubjectFailure>,
}

pub fn assess_subject(
    s: &ManifestSubject,
    opts: &IntegrityOptions,
    manifest_midline: Option<f64>,
) -> Result<IntegrityResult> {
    let mut cst = load_mask(&s.cst_path, opts.threshold)?;
    let mut haem = load_mask(&s.haematoma_path, opts.threshold)?;
    if opts.min_component > 1 {
        cst = filter_small_components(&cst, opts.min_component, opts.connectivity);
        haem = filter_small_components(&haem, opts.min_component, opts.connectivity);
    }
    let midline = opts.midline_x.or(s.midline_x).or(manifest_midline);
    assess_integrity(&cst, &haem, midline)
}

/// Assesses every subject. Per-subject errors are logged and collected, never
/// propagated; rows and failures are sorted by id.
pub fn run_integrity(manifest: &RunManifest, opts: &IntegrityOptions) -> IntegrityRun {
    let outcomes = opts.exec.map(&manifest.subjects, |s| {
        (
            s.id.clone(),
            assess_subject(s, opts, manifest.midline_override),
        )
    });
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in outcomes {
        match r {
            Ok(result) => rows.push(SubjectRow { id, result }),
            Err(e) => {
                log::warn!("subject {id}: {e}");
                failures.push(SubjectFailure {
                    id,
                    error: e.to_string(),
                });
            }
        }
    }
    rows.sort_by(|a, b| a.id.cmp(&b.id));
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    let metadata = ReportMetadata::new(
        opts.threshold.describe(),
        opts.connectivity.count().to_string(),
        opts.min_component.to_string(),
        manifest
            .haematoma_source
            .clone()
            .unwrap_or_else(|| "unspecified".into()),
    );
    IntegrityRun {
        metadata,
        rows,
        failures,
    }
}

pub const INTEGRITY_COLUMNS: [&str; 8] = [
    "id",
    "overlap",
    "overlap_voxels",
    "split",
    "split_left",
    "split_right",
    "cst_ml",
    "haematoma_ml",
];

impl IntegrityRun {
    pub fn to_csv(&self) -> String {
        let mut out = self.metadata.header();
        out.push_str(&INTEGRITY_COLUMNS.join(","));
        out.push('\n');
        for r in &self.rows {
            let x = &r.result;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{:.4},{:.4}",
                r.id,
                x.overlap,
                x.overlap_voxels,
                x.split,
                x.split_left,
                x.split_right,
                x.cst_volume_ml,
                x.haematoma_volume_ml
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("integrity run serializes");
        s.push('\n');
        s
    }

    /// Writes `integrity.csv` and `integrity.json`, plus `failures.txt` when
    /// any subject failed.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("integrity.csv"), &self.to_csv())?;
        write_text(&dir.join("integrity.json"), &self.to_json())?;
        if !self.failures.is_empty() {
            let mut t = String::new();
            for f in &self.failures {
                let _ = writeln!(t, "{}: {}", f.id, f.error);
            }
            write_text(&dir.join("failures.txt"), &t)?;
        }
        Ok(())
    }
}

fn parse_bool(s: &str, line: usize, path: &str) -> Result<bool> {
    match s.trim() {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(Error::Parse {
            path: path.to_string(),
            line,
            message: format!("expected true/false, found '{other}'"),
        }),
    }
}

/// Reads an integrity table written by [`IntegrityRun::to_csv`], returning the
/// flags and the metadata found in its header.
pub fn parse_integrity_table(
    text: &str,
    source: &str,
) -> Result<(Vec<SubjectFlags>, ReportMetadata)> {
    let metadata = ReportMetadata::from_header(text);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse {
                path: source.to_string(),
                line: 1,
                message: format!("missing column '{name}'"),
            })
    };
    let (ci, co, cs) = (col("id")?, col("overlap")?, col("split")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        out.push(SubjectFlags {
            id: rec.get(ci).unwrap_or("").to_string(),
            flags: IntegrityFlags {
                overlap: parse_bool(rec.get(co).unwrap_or(""), line, source)?,
                split: parse_bool(rec.get(cs).unwrap_or(""), line, source)?,
            },
        });
    }
    Ok((out, metadata))
}

pub fn read_integrity_table(path: &Path) -> Result<(Vec<SubjectFlags>, ReportMetadata)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_integrity_table(&text, &path.display().to_string())
}

#[derive(Debug, Clone)]
pub struct Analysis {
    pub metadata: ReportMetadata,
    pub table: CohortTable,
    pub models: Vec<ModelFit>,
    pub joint: Option<Vec<ModelFit>>,
}

pub fn run_analysis(
    records: &[SubjectRecord],
    flags: &[SubjectFlags],
    metadata: ReportMetadata,
    joint: bool,
    exec: Execution,
) -> Result<Analysis> {
    let table = build_cohort_table(records, flags)?;
    let models = fit_single_predictor_models(records, flags, exec)?;
    let joint = if joint {
        Some(fit_joint_models(records, flags, exec)?)
    } else {
        None
    };
    Ok(Analysis {
        metadata,
        table,
        models,
        joint,
    })
}

impl Analysis {
    pub fn cohort_text(&self) -> String {
        let mut out = self.metadata.header();
        out.push('\n');
        out.push_str(&self.table.render_text());
        out
    }

    pub fn cohort_csv(&self) -> String {
        let mut out = self.metadata.header();
        out.push_str(&self.table.render_csv());
        out
    }

    pub fn regression_text(&self) -> String {
        let mut out = self.metadata.header();
        out.push_str(
            "\nOutcome regressions, one integrity predictor per model.\n\
             Covariates: age, sex (male), ln haematoma volume, IVH volume, treatment (surgery).\n\
             Complete-case per outcome. Stars: * p<0.05, ** p<0.01, *** p<0.001, **** p<0.0001.\n\n",
        );
        out.push_str(&report::regression_table(&self.models, false));
        if let Some(j) = &self.joint {
            out.push_str("\nJoint models, both integrity predictors together.\n\n");
            out.push_str(&report::regression_table(j, true));
        }
        out.push_str("\nModel details\n\n");
        out.push_str(&report::model_details(&self.models));
        if let Some(j) = &self.joint {
            out.push_str(&report::model_details(j));
        }
        out
    }

    pub fn regression_csv(&self) -> String {
        let mut all = self.models.clone();
        if let Some(j) = &self.joint {
            all.extend(j.iter().cloned());
        }
        let mut out = self.metadata.header();
        out.push_str(&report::regression_csv(&all));
        out
    }

    /// Writes `cohort_table.{txt,csv}` and `regression.{txt,csv}`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("cohort_table.txt"), &self.cohort_text())?;
        write_text(&dir.join("cohort_table.csv"), &self.cohort_csv())?;
        write_text(&dir.join("regression.txt"), &self.regression_text())?;
        write_text(&dir.join("regression.csv"), &self.regression_csv())
    }
}

pub fn truth_text(t: &IntegrityResult) -> String {
    let list = |v: &[usize]| {
        v.iter()
            .map(|z| z.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "overlap = {}\noverlap_voxels = {}\nsplit = {}\nsplit_left = {}\nsplit_right = {}\n\
missing_left = {}\nmissing_right = {}\ngap_slices_left = {}\ngap_slices_right = {}\n\
cst_ml = {:.4}\nhaematoma_ml = {:.4}\nmidline_x = {}\n",
        t.overlap,
        t.overlap_voxels,
        t.split,
        t.split_left,
        t.split_right,
        t.missing_left,
        t.missing_right,
        list(&t.gap_slices_left),
        list(&t.gap_slices_right),
        t.cst_volume_ml,
        t.haematoma_volume_ml,
        t.midline_world_x,
    )
}

/// Writes `cst.nii.gz`, `haematoma.nii.gz`, `truth.txt` and `spec.txt`.
pub fn run_phantom(spec: &PhantomSpec, out_dir: &Path) -> Result<Phantom> {
    let p = generate_phantom(spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    p.cst.write(out_dir.join("cst.nii.gz"))?;
    p.haematoma.write(out_dir.join("haematoma.nii.gz"))?;
    write_text(&out_dir.join("truth.txt"), &truth_text(&p.truth))?;
    write_text(&out_dir.join("spec.txt"), &render_phantom_spec(spec))?;
    Ok(p)
}

pub const SIM_HAEMATOMA_SOURCE: &str = "synthetic phantom";

/// Files written by [`run_cohort_sim`].
#[derive(Debug, Clone)]
pub struct CohortSimOutput {
    pub cohort: SyntheticCohort,
    pub records_path: PathBuf,
    pub truth_path: PathBuf,
    pub manifest_path: Option<PathBuf>,
}

/// Simulates a cohort and writes `records.csv`, `truth_flags.csv`,
/// `simulation.txt`, and with `write_masks` a mask pair per subject under
/// `masks/` plus a `manifest.txt` pointing at them.
pub fn run_cohort_sim(
    spec: &CohortSimSpec,
    seed: u64,
    out_dir: &Path,
    write_masks: bool,
    exec: Execution,
) -> Result<CohortSimOutput> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let (cohort, phantoms) = if write_masks {
        let (c, p) = generate_synthetic_cohort(spec, seed, exec)?;
        (c, Some(p))
    } else {
        (crate::phantom::simulate_records(spec, seed)?, None)
    };

    let records_path = out_dir.join("records.csv");
    let mut buf = Vec::new();
    write_records(&cohort.records, &mut buf)?;
    fs::write(&records_path, &buf).map_err(|e| Error::io(&records_path, e))?;

    let truth_path = out_dir.join("truth_flags.csv");
    let mut t = String::from("id,overlap,split\n");
    for f in &cohort.flags {
        let _ = writeln!(t, "{},{},{}", f.id, f.flags.overlap, f.flags.split);
    }
    write_text(&truth_path, &t)?;

    let manifest_path = match &phantoms {
        Some(ps) => {
            let mask_dir = out_dir.join("masks");
            fs::create_dir_all(&mask_dir).map_err(|e| Error::io(&mask_dir, e))?;
            let items: Vec<(usize, &Phantom)> = ps.iter().enumerate().collect();
            exec.map(&items, |&(i, p)| -> Result<()> {
                let id = &cohort.flags[i].id;
                p.cst.write(mask_dir.join(format!("{id}_cst.nii.gz")))?;
                p.haematoma
                    .write(mask_dir.join(format!("{id}_haematoma.nii.gz")))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let subjects: Vec<(String, String, String)> = cohort
                .flags
                .iter()
                .map(|f| {
                    (
                        f.id.clone(),
                        format!("masks/{}_cst.nii.gz", f.id),
                        format!("masks/{}_haematoma.nii.gz", f.id),
                    )
                })
                .collect();
            let path = out_dir.join("manifest.txt");
            write_text(
                &path,
                &RunManifest::render(&subjects, Some("records.csv"), Some(SIM_HAEMATOMA_SOURCE)),
            )?;
            Some(path)
        }
        None => None,
    };

    write_text(
        &out_dir.join("simulation.txt"),
        &simulation_summary(spec, seed, &cohort),
    )?;
    Ok(CohortSimOutput {
        cohort,
        records_path,
        truth_path,
        manifest_path,
    })
}

fn simulation_summary(spec: &CohortSimSpec, seed: u64, cohort: &SyntheticCohort) -> String {
    let n_overlap = cohort.flags.iter().filter(|f| f.flags.overlap).count();
    let n_split = cohort.flags.iter().filter(|f| f.flags.split).count();
    let c = &cohort.clamped;
    let mut out = format!(
        "# tool: {TOOL_VERSION}\nseed = {seed}\nn = {}\noverlap = {n_overlap}\nsplit = {n_split}\n",
        spec.n
    );
    let _ = writeln!(out, "missing_rate_day180 = {}", spec.missing_rate_day180);
    let _ = writeln!(out, "missing_rate_day365 = {}", spec.missing_rate_day365);
    for (name, e) in [
        ("nihss_motor_d1", &spec.effects.nihss_baseline),
        ("nihss_motor_d180", &spec.effects.nihss_day180),
        ("mrs_d365", &spec.effects.mrs_day365),
    ] {
        let _ = writeln!(
            out,
            "effects.{name} = intercept {} overlap {} split {} age {} sex_male {} ln_haematoma_volume {} ivh_volume {} treatment_surgery {} sigma {}",
            e.intercept, e.overlap, e.split, e.age, e.sex_male, e.ln_haematoma_volume, e.ivh_volume, e.treatment_surgery, e.sigma
        );
    }
    let _ = writeln!(
        out,
        "clamped = nihss_motor_d1 {} nihss_motor_d180 {} mrs_d365 {} of {} generated values (rate {:.4})",
        c.nihss_baseline,
        c.nihss_day180,
        c.mrs_day365,
        c.total,
        c.rate()
    );
    out
}
