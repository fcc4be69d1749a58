//! Run manifests and phantom spec files.
//!
//! Manifest keys (global): `records`, `threshold`, `connectivity`,
//! `min_component`, `midline_x`, `output_dir`, `haematoma_source` (free
//! text recording where the haematoma masks came from). Each `[subject <id>]`
//! section needs `cst` and `haematoma` paths and may set `midline_x`.
//! Relative paths are resolved against the manifest's directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::kv::Document;
use crate::error::{Error, Result};
use crate::mask::Connectivity;
use crate::phantom::PhantomSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestSubject {
    pub id: String,
    pub cst_path: PathBuf,
    pub haematoma_path: PathBuf,
    pub midline_x: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub subjects: Vec<ManifestSubject>,
    pub records_path: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub connectivity: Option<Connectivity>,
    pub min_component: Option<usize>,
    pub midline_override: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub haematoma_source: Option<String>,
}

fn resolve(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::parse(&text, &path.display().to_string(), base)
    }

    pub fn parse(text: &str, source: &str, base: &Path) -> Result<Self> {
        let doc = Document::parse(text, source)?;
        let mut m = RunManifest {
            subjects: Vec::new(),
            records_path: None,
            threshold: None,
            connectivity: None,
            min_component: None,
            midline_override: None,
            output_dir: None,
            haematoma_source: None,
        };
        for e in &doc.global {
            match e.key.as_str() {
                "records" => m.records_path = Some(resolve(base, &e.value)),
                "threshold" => m.threshold = Some(doc.value(e)?),
                "connectivity" => {
                    let n: u32 = doc.value(e)?;
                    m.connectivity = Some(
                        Connectivity::from_count(n)
                            .ok_or_else(|| doc.error(e.line, "connectivity must be 6 or 26"))?,
                    );
                }
                "min_component" => m.min_component = Some(doc.value(e)?),
                "midline_x" => m.midline_override = Some(doc.value(e)?),
                "output_dir" => m.output_dir = Some(resolve(base, &e.value)),
                "haematoma_source" => m.haematoma_source = Some(e.value.clone()),
                other => return Err(doc.error(e.line, format!("unknown key '{other}'"))),
            }
        }
        for s in &doc.sections {
            if s.kind != "subject" {
                return Err(doc.error(s.line, format!("unknown section '{}'", s.kind)));
            }
            if s.label.is_empty() {
                return Err(doc.error(s.line, "subject section needs an id"));
            }
            let (mut cst, mut haem, mut midline) = (None, None, None);
            for e in &s.entries {
                match e.key.as_str() {
                    "cst" => cst = Some(resolve(base, &e.value)),
                    "haematoma" => haem = Some(resolve(base, &e.value)),
                    "midline_x" => midline = Some(doc.value(e)?),
                    other => {
                        return Err(doc.error(e.line, format!("unknown subject key '{other}'")))
                    }
                }
            }
            m.subjects.push(ManifestSubject {
                id: s.label.clone(),
                cst_path: cst
                    .ok_or_else(|| doc.error(s.line, format!("subject {} lacks 'cst'", s.label)))?,
                haematoma_path: haem.ok_or_else(|| {
                    doc.error(s.line, format!("subject {} lacks 'haematoma'", s.label))
                })?,
                midline_x: midline,
            });
        }
        Ok(m)
    }

    /// Non-empty, unique ids, and every referenced file exists.
    pub fn validate(&self) -> Result<()> {
        if self.subjects.is_empty() {
            return Err(Error::Manifest("no subjects listed".into()));
        }
        let mut seen = BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.id) {
                return Err(Error::Manifest(format!("duplicate subject id '{}'", s.id)));
            }
        }
        for s in &self.subjects {
            for p in [&s.cst_path, &s.haematoma_path] {
                if !p.exists() {
                    return Err(Error::Manifest(format!(
                        "subject {}: {} does not exist",
                        s.id,
                        p.display()
                    )));
                }
            }
        }
        if let Some(r) = &self.records_path {
            if !r.exists() {
                return Err(Error::Manifest(format!(
                    "records file {} does not exist",
                    r.display()
                )));
            }
        }
        Ok(())
    }

    /// Renders a manifest with paths written as given.
    pub fn render(
        subjects: &[(String, String, String)],
        records: Option<&str>,
        haematoma_source: Option<&str>,
    ) -> String {
        let mut out = String::from("# cstkit run manifest\n");
        if let Some(r) = records {
            let _ = writeln!(out, "records = {r}");
        }
        if let Some(h) = haematoma_source {
            let _ = writeln!(out, "haematoma_source = {h}");
        }
        for (id, cst, haem) in subjects {
            let _ = write!(out, "\n[subject {id}]\ncst = {cst}\nhaematoma = {haem}\n");
        }
        out
    }
}

/// Parses a phantom spec; unspecified keys keep their defaults.
///
/// Keys: `dims`, `voxel_size`, `tract_radius_vox`, `tract_x_offsets`,
/// `tract_z_range`, `gap_slices_left`, `gap_slices_right`, `missing_left`,
/// `missing_right`, `haematoma_center`, `haematoma_radii`, `seed`.
pub fn parse_phantom_spec(text: &str, source: &str) -> Result<PhantomSpec> {
    let doc = Document::parse(text, source)?;
    if let Some(s) = doc.sections.first() {
        return Err(doc.error(s.line, "phantom specs have no sections"));
    }
    let mut spec = PhantomSpec::default();
    for e in &doc.global {
        match e.key.as_str() {
            "dims" => spec.dims = doc.array(e)?,
            "voxel_size" => spec.voxel_size = doc.array(e)?,
            "tract_radius_vox" => spec.tract_radius_vox = doc.value(e)?,
            "tract_x_offsets" => {
                let [l, r] = doc.array::<f64, 2>(e)?;
                spec.tract_x_offsets = (l, r);
            }
            "tract_z_range" => {
                let [lo, hi] = doc.array::<usize, 2>(e)?;
                spec.tract_z_range = (lo, hi);
            }
            "gap_slices_left" => spec.gap_slices_left = doc.list(e)?,
            "gap_slices_right" => spec.gap_slices_right = doc.list(e)?,
            "missing_left" => spec.missing_left = doc.value(e)?,
            "missing_right" => spec.missing_right = doc.value(e)?,
            "haematoma_center" => spec.haematoma_center = doc.array(e)?,
            "haematoma_radii" => spec.haematoma_radii = doc.array(e)?,
            "seed" => spec.seed = doc.value(e)?,
            other => return Err(doc.error(e.line, format!("unknown key '{other}'"))),
        }
    }
    Ok(spec)
}

pub fn render_phantom_spec(spec: &PhantomSpec) -> String {
    let join = |v: &[usize]| {
        v.iter()
            .map(|z| z.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    let arr = |v: &[f64]| {
        v.iter()
            .map(|z| z.to_string())
            .collect::<Vec<_>>()
            .join(" ")
    };
    format!(
        "dims = {} {} {}\nvoxel_size = {}\ntract_radius_vox = {}\ntract_x_offsets = {} {}\n\
tract_z_range = {} {}\ngap_slices_left = {}\ngap_slices_right = {}\nmissing_left = {}\n\
missing_right = {}\nhaematoma_center = {}\nhaematoma_radii = {}\nseed = {}\n",
        spec.dims[0],
        spec.dims[1],
        spec.dims[2],
        arr(&spec.voxel_size),
        spec.tract_radius_vox,
        spec.tract_x_offsets.0,
        spec.tract_x_offsets.1,
        spec.tract_z_range.0,
        spec.tract_z_range.1,
        join(&spec.gap_slices_left),
        join(&spec.gap_slices_right),
        spec.missing_left,
        spec.missing_right,
        arr(&spec.haematoma_center),
        arr(&spec.haematoma_radii),
        spec.seed,
    )
}
