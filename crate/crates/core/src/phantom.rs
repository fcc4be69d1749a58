//! Synthetic bilateral tract + haematoma volumes with known integrity, and
//! synthetic cohorts whose outcomes follow a known linear model.
//!
//! Phantom truth is computed from the geometric description (column and
//! ellipsoid membership of voxel centres), never from the mask code.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, LogNormal, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::integrity::{IntegrityFlags, IntegrityResult};
use crate::mask::MaskVolume;
use crate::nifti::VolumeHeader;
use crate::stats::clinical::{
    Sex, SubjectFlags, SubjectRecord, Treatment, MRS_MAX, NIHSS_MOTOR_MAX,
};

/// Relative per-slice jitter of the tract radius.
pub const RADIUS_JITTER: f64 = 0.15;
/// Jittered radii never drop below this (voxels), so every non-gap slice
/// contains the voxel nearest the column axis.
pub const MIN_RADIUS_VOX: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhantomSpec {
    pub dims: [usize; 3],
    pub voxel_size: [f64; 3],
    pub tract_radius_vox: f64,
    /// World x (mm) of the left and right column axes.
    pub tract_x_offsets: (f64, f64),
    /// Inclusive range of axial slices the columns span.
    pub tract_z_range: (usize, usize),
    pub gap_slices_left: Vec<usize>,
    pub gap_slices_right: Vec<usize>,
    pub missing_left: bool,
    pub missing_right: bool,
    /// World coordinates (mm).
    pub haematoma_center: [f64; 3],
    /// Semi-axes (mm).
    pub haematoma_radii: [f64; 3],
    pub seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            dims: [32, 32, 32],
            voxel_size: [1.0, 1.0, 1.0],
            tract_radius_vox: 2.0,
            tract_x_offsets: (9.0, 22.0),
            tract_z_range: (4, 27),
            gap_slices_left: Vec::new(),
            gap_slices_right: Vec::new(),
            missing_left: false,
            missing_right: false,
            haematoma_center: [22.0, 15.5, 16.0],
            haematoma_radii: [4.0, 4.0, 4.0],
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Geometry resolved from a spec: column axes in voxel units and the
/// per-slice jittered radii.
struct Geometry {
    axis_x: [f64; 2],
    axis_y: f64,
    radii: [Vec<f64>; 2],
    present: [Vec<bool>; 2],
}

impl PhantomSpec {
    pub fn header(&self) -> Result<VolumeHeader> {
        VolumeHeader::new(self.dims, self.voxel_size)
    }

    /// World x of the volume centre; the laterality plane.
    pub fn midline_world_x(&self) -> f64 {
        (self.dims[0] as f64 - 1.0) / 2.0 * self.voxel_size[0]
    }

    fn max_radius(&self) -> f64 {
        (self.tract_radius_vox * (1.0 + RADIUS_JITTER)).max(MIN_RADIUS_VOX)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| d == 0) || self.voxel_size.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidSpec(
                "dims and voxel sizes must be positive".into(),
            ));
        }
        if !(self.tract_radius_vox > 0.0) {
            return Err(Error::InvalidSpec("tract radius must be positive".into()));
        }
        if self.haematoma_radii.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::InvalidSpec(
                "haematoma radii must be positive".into(),
            ));
        }
        if self.missing_left && self.missing_right {
            return Err(Error::InvalidSpec(
                "at least one tract side must be present".into(),
            ));
        }
        let (zmin, zmax) = self.tract_z_range;
        if zmin > zmax {
            return Err(Error::InvalidSpec(format!(
                "tract z range {zmin}..{zmax} is empty"
            )));
        }
        for (name, gaps) in [
            ("left", &self.gap_slices_left),
            ("right", &self.gap_slices_right),
        ] {
            if let Some(z) = gaps.iter().find(|&&z| z <= zmin || z >= zmax) {
                return Err(Error::InvalidSpec(format!(
                    "{name} gap slice {z} is not strictly inside {zmin}..{zmax}"
                )));
            }
        }
        let mid = self.midline_world_x() / self.voxel_size[0];
        let r = self.max_radius();
        let lx = self.tract_x_offsets.0 / self.voxel_size[0];
        let rx = self.tract_x_offsets.1 / self.voxel_size[0];
        if !(lx + r < mid && rx - r > mid) {
            return Err(Error::InvalidSpec(format!(
                "columns at x = {} and {} mm (radius {r:.2} voxels) must lie on opposite sides of the midline {} mm",
                self.tract_x_offsets.0,
                self.tract_x_offsets.1,
                self.midline_world_x()
            )));
        }

        let [nx, ny, nz] = self.dims.map(|d| d as f64 - 1.0);
        let cy = ny / 2.0;
        if lx - r < 0.0 || rx + r > nx || cy - r < 0.0 || cy + r > ny || zmax as f64 > nz {
            return Err(Error::GeometryOutOfBounds(format!(
                "tract columns do not fit in dims {:?}",
                self.dims
            )));
        }
        for axis in 0..3 {
            let extent = (self.dims[axis] as f64 - 1.0) * self.voxel_size[axis];
            let c = self.haematoma_center[axis];
            let rad = self.haematoma_radii[axis];
            if c - rad < 0.0 || c + rad > extent {
                return Err(Error::GeometryOutOfBounds(format!(
                    "haematoma exceeds the volume along axis {axis}"
                )));
            }
        }
        Ok(())
    }

    fn geometry(&self) -> Geometry {
        let nz = self.dims[2];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut radii = [vec![0.0; nz], vec![0.0; nz]];
        for side in radii.iter_mut() {
            for r in side.iter_mut() {
                let u: f64 = rng.random_range(-RADIUS_JITTER..=RADIUS_JITTER);
                *r = (self.tract_radius_vox * (1.0 + u)).max(MIN_RADIUS_VOX);
            }
        }
        let (zmin, zmax) = self.tract_z_range;
        let present_for = |missing: bool, gaps: &[usize]| -> Vec<bool> {
            (0..nz)
                .map(|z| !missing && z >= zmin && z <= zmax && !gaps.contains(&z))
                .collect()
        };
        Geometry {
            axis_x: [
                self.tract_x_offsets.0 / self.voxel_size[0],
                self.tract_x_offsets.1 / self.voxel_size[0],
            ],
            axis_y: (self.dims[1] as f64 - 1.0) / 2.0,
            radii,
            present: [
                present_for(self.missing_left, &self.gap_slices_left),
                present_for(self.missing_right, &self.gap_slices_right),
            ],
        }
    }

    /// Whether a voxel centre lies inside the haematoma ellipsoid.
    pub fn in_haematoma(&self, x: usize, y: usize, z: usize) -> bool {
        let p = [x, y, z];
        (0..3)
            .map(|a| {
                let d = (p[a] as f64 * self.voxel_size[a] - self.haematoma_center[a])
                    / self.haematoma_radii[a];
                d * d
            })
            .sum::<f64>()
            <= 1.0
    }
}

impl Geometry {
    fn in_column(&self, side: usize, x: usize, y: usize, z: usize) -> bool {
        if !self.present[side][z] {
            return false;
        }
        let dx = x as f64 - self.axis_x[side];
        let dy = y as f64 - self.axis_y;
        let r = self.radii[side][z];
        dx * dx + dy * dy <= r * r
    }

    fn in_tract(&self, x: usize, y: usize, z: usize) -> bool {
        self.in_column(0, x, y, z) || self.in_column(1, x, y, z)
    }
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub cst: MaskVolume,
    pub haematoma: MaskVolume,
    pub truth: IntegrityResult,
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let header = spec.header()?;
    let geo = spec.geometry();
    let [nx, ny, nz] = spec.dims;
    let mut cst = MaskVolume::empty(header.clone());
    let mut haematoma = MaskVolume::empty(header.clone());
    let mut overlap_voxels = 0;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let t = geo.in_tract(x, y, z);
                let h = spec.in_haematoma(x, y, z);
                if t {
                    cst.set(x, y, z, true);
                }
                if h {
                    haematoma.set(x, y, z, true);
                }
                if t && h {
                    overlap_voxels += 1;
                }
            }
        }
    }
    let sorted = |v: &[usize], missing: bool| -> Vec<usize> {
        if missing {
            return Vec::new();
        }
        let mut v = v.to_vec();
        v.sort_unstable();
        v.dedup();
        v
    };
    let gap_slices_left = sorted(&spec.gap_slices_left, spec.missing_left);
    let gap_slices_right = sorted(&spec.gap_slices_right, spec.missing_right);
    let split_left = spec.missing_left || !gap_slices_left.is_empty();
    let split_right = spec.missing_right || !gap_slices_right.is_empty();
    let vv = header.voxel_volume_ml();
    let truth = IntegrityResult {
        overlap: overlap_voxels > 0,
        overlap_voxels,
        split: split_left || split_right,
        split_left,
        split_right,
        missing_left: spec.missing_left,
        missing_right: spec.missing_right,
        gap_slices_left,
        gap_slices_right,
        cst_volume_ml: cst.voxel_count() as f64 * vv,
        haematoma_volume_ml: haematoma.voxel_count() as f64 * vv,
        midline_world_x: spec.midline_world_x(),
    };
    Ok(Phantom {
        cst,
        haematoma,
        truth,
    })
}

/// Random phantom geometry on a 24³ grid (2 mm voxels) whose truth flags
/// equal `flags`.
pub fn spec_for_flags(flags: IntegrityFlags, seed: u64) -> PhantomSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let vs = 2.0;
    let n = 24usize;
    let radius = rng.random_range(1.2..1.6);
    let lx = rng.random_range(5.0..7.0);
    let rx = rng.random_range(16.0..18.0);
    let zmin = rng.random_range(1..=4usize);
    let zmax = rng.random_range(19..=22usize);
    let mut spec = PhantomSpec {
        dims: [n, n, n],
        voxel_size: [vs; 3],
        tract_radius_vox: radius,
        tract_x_offsets: (lx * vs, rx * vs),
        tract_z_range: (zmin, zmax),
        gap_slices_left: Vec::new(),
        gap_slices_right: Vec::new(),
        missing_left: false,
        missing_right: false,
        haematoma_center: [0.0; 3],
        haematoma_radii: [vs; 3],
        seed,
    };

    if flags.split {
        if rng.random_bool(0.1) {
            if rng.random_bool(0.5) {
                spec.missing_left = true;
            } else {
                spec.missing_right = true;
            }
        } else {
            let which = rng.random_range(0..3);
            let punch = |rng: &mut ChaCha8Rng| -> Vec<usize> {
                let k = rng.random_range(1..=3);
                let start = rng.random_range(zmin + 1..zmax - k);
                (start..start + k).collect()
            };
            if which != 1 {
                spec.gap_slices_left = punch(&mut rng);
            }
            if which != 0 {
                spec.gap_slices_right = punch(&mut rng);
            }
        }
    }

    let cy = (n as f64 - 1.0) / 2.0;
    if flags.overlap {
        // centred on the axis of a present column, at a present slice
        let side = if spec.missing_left {
            Side::Right
        } else if spec.missing_right || rng.random_bool(0.5) {
            Side::Left
        } else {
            Side::Right
        };
        let (ax, gaps) = match side {
            Side::Left => (lx, &spec.gap_slices_left),
            Side::Right => (rx, &spec.gap_slices_right),
        };
        let z = loop {
            let z = rng.random_range(zmin + 2..=zmax - 2);
            if !gaps.contains(&z) {
                break z;
            }
        };
        spec.haematoma_center = [ax * vs, cy * vs, z as f64 * vs];
        spec.haematoma_radii = [
            rng.random_range(1.5..3.0) * vs,
            rng.random_range(1.5..3.0) * vs,
            rng.random_range(1.5..2.0) * vs,
        ];
    } else if rng.random_bool(0.5) {
        // between the columns
        let mid = (n as f64 - 1.0) / 2.0;
        let z = rng.random_range(6.0..17.0);
        spec.haematoma_center = [mid * vs, cy * vs, z * vs];
        spec.haematoma_radii = [
            rng.random_range(1.0..2.2) * vs,
            rng.random_range(1.5..4.0) * vs,
            rng.random_range(1.5..4.0) * vs,
        ];
    } else {
        // anterior to the tracts
        let ry = rng.random_range(1.0..2.5);
        let y = cy + radius * (1.0 + RADIUS_JITTER) + ry + rng.random_range(0.6..1.5);
        let z = rng.random_range(6.0..17.0);
        spec.haematoma_center = [rng.random_range(6.0..17.0) * vs, y * vs, z * vs];
        spec.haematoma_radii = [
            rng.random_range(1.5..4.0) * vs,
            ry * vs,
            rng.random_range(1.5..4.0) * vs,
        ];
    }
    spec
}

/// Linear outcome model: `intercept + Σ β·covariate + N(0, σ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EffectSpec {
    pub intercept: f64,
    pub overlap: f64,
    pub split: f64,
    pub age: f64,
    pub sex_male: f64,
    pub ln_haematoma_volume: f64,
    pub ivh_volume: f64,
    pub treatment_surgery: f64,
    pub sigma: f64,
}

impl EffectSpec {
    pub fn mean(&self, r: &SubjectRecord, flags: IntegrityFlags) -> f64 {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        self.intercept
            + self.overlap * b(flags.overlap)
            + self.split * b(flags.split)
            + self.age * r.age
            + self.sex_male * b(r.sex == Sex::Male)
            + self.ln_haematoma_volume * r.haematoma_volume_ml.ln()
            + self.ivh_volume * r.ivh_volume_ml
            + self.treatment_surgery * b(r.treatment == Treatment::Surgery)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeEffects {
    pub nihss_baseline: EffectSpec,
    pub nihss_day180: EffectSpec,
    pub mrs_day365: EffectSpec,
}

impl Default for OutcomeEffects {
    fn default() -> Self {
        OutcomeEffects {
            nihss_baseline: EffectSpec {
                intercept: 3.0,
                overlap: 0.94,
                split: 2.13,
                age: 0.02,
                sex_male: 0.3,
                ln_haematoma_volume: 1.0,
                ivh_volume: 0.05,
                treatment_surgery: 0.0,
                sigma: 3.0,
            },
            nihss_day180: EffectSpec {
                intercept: -2.0,
                overlap: 1.32,
                split: 3.55,
                age: 0.05,
                sex_male: 0.0,
                ln_haematoma_volume: 1.2,
                ivh_volume: 0.1,
                treatment_surgery: -0.5,
                sigma: 3.0,
            },
            mrs_day365: EffectSpec {
                intercept: 0.3,
                overlap: 0.27,
                split: 0.86,
                age: 0.02,
                sex_male: 0.0,
                ln_haematoma_volume: 0.45,
                ivh_volume: 0.05,
                treatment_surgery: -0.2,
                sigma: 0.9,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum FlagAssignment {
    /// Exactly this many subjects carry each flag, chosen at random.
    Counts { overlap: usize, split: usize },
    /// Independent Bernoulli draws.
    Probabilities { overlap: f64, split: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortSimSpec {
    pub n: usize,
    pub flags: FlagAssignment,
    pub effects: OutcomeEffects,
    pub missing_rate_day180: f64,
    pub missing_rate_day365: f64,
}

impl CohortSimSpec {
    /// Flag counts scaled from the 487-subject reference marginals
    /// (110 with overlap, 170 with a split).
    pub fn with_reference_marginals(n: usize) -> Self {
        let scale = |k: usize| ((k * n) as f64 / 487.0).round() as usize;
        CohortSimSpec {
            n,
            flags: FlagAssignment::Counts {
                overlap: scale(110),
                split: scale(170),
            },
            effects: OutcomeEffects::default(),
            missing_rate_day180: 0.05,
            missing_rate_day365: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct ClampReport {
    pub nihss_baseline: usize,
    pub nihss_day180: usize,
    pub mrs_day365: usize,
    /// Outcome values generated (non-missing).
    pub total: usize,
}

impl ClampReport {
    pub fn rate(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        (self.nihss_baseline + self.nihss_day180 + self.mrs_day365) as f64 / self.total as f64
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCohort {
    pub records: Vec<SubjectRecord>,
    /// Intended integrity flags, one per record.
    pub flags: Vec<SubjectFlags>,
    pub clamped: ClampReport,
}

pub fn subject_id(i: usize) -> String {
    format!("SIM{:04}", i + 1)
}

fn pick_flags(
    n: usize,
    assign: FlagAssignment,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<IntegrityFlags>> {
    let mut flags = vec![IntegrityFlags::default(); n];
    match assign {
        FlagAssignment::Counts { overlap, split } => {
            if overlap > n || split > n {
                return Err(Error::InvalidSpec(format!(
                    "flag counts ({overlap}, {split}) exceed cohort size {n}"
                )));
            }
            let mut idx: Vec<usize> = (0..n).collect();
            idx.shuffle(rng);
            for &i in &idx[..overlap] {
                flags[i].overlap = true;
            }
            idx.shuffle(rng);
            for &i in &idx[..split] {
                flags[i].split = true;
            }
        }
        FlagAssignment::Probabilities { overlap, split } => {
            let bo = Bernoulli::new(overlap).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            let bs = Bernoulli::new(split).map_err(|e| Error::InvalidSpec(e.to_string()))?;
            for f in flags.iter_mut() {
                f.overlap = bo.sample(rng);
                f.split = bs.sample(rng);
            }
        }
    }
    Ok(flags)
}

fn lognormal_with_mean(mean: f64, sigma: f64) -> LogNormal<f64> {
    LogNormal::new(mean.ln() - sigma * sigma / 2.0, sigma).expect("valid log-normal")
}

/// Records and intended flags only; no masks.
///
/// Covariates: age ~ N(61.3, 12²) truncated to 35..85; male with
/// probability 299/487; surgery with probability 247/487; haematoma volume
/// log-normal with mean 43.3 mL; IVH zero with probability 0.4, otherwise
/// log-normal with mean 4 mL. Outcomes follow `spec.effects` and are
/// clamped to their score ranges.
pub fn simulate_records(spec: &CohortSimSpec, seed: u64) -> Result<SyntheticCohort> {
    if spec.n < 20 {
        return Err(Error::InvalidSpec(format!(
            "cohort size {} is below 20",
            spec.n
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let flags = pick_flags(spec.n, spec.flags, &mut rng)?;

    let age_dist = Normal::new(61.3, 12.0).expect("valid normal");
    let hv_dist = lognormal_with_mean(43.3, 0.6);
    let ivh_dist = lognormal_with_mean(4.0, 0.8);
    let male = Bernoulli::new(299.0 / 487.0).expect("valid probability");
    let surgery = Bernoulli::new(247.0 / 487.0).expect("valid probability");
    let miss180 =
        Bernoulli::new(spec.missing_rate_day180).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let miss365 =
        Bernoulli::new(spec.missing_rate_day365).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let std_normal = Normal::new(0.0, 1.0).expect("valid normal");

    let mut clamped = ClampReport::default();
    let mut records = Vec::with_capacity(spec.n);
    for (i, &f) in flags.iter().enumerate() {
        let age = loop {
            let a = age_dist.sample(&mut rng);
            if (35.0..=85.0).contains(&a) {
                break a;
            }
        };
        let sex = if male.sample(&mut rng) {
            Sex::Male
        } else {
            Sex::Female
        };
        let treatment = if surgery.sample(&mut rng) {
            Treatment::Surgery
        } else {
            Treatment::Medical
        };
        let hv = hv_dist.sample(&mut rng);
        let ivh = if rng.random_bool(0.4) {
            0.0
        } else {
            ivh_dist.sample(&mut rng)
        };
        let mut rec = SubjectRecord {
            id: subject_id(i),
            age,
            sex,
            treatment,
            haematoma_volume_ml: hv,
            ivh_volume_ml: ivh,
            nihss_motor_baseline: 0.0,
            nihss_motor_day180: None,
            mrs_day365: None,
        };
        // noise is drawn for every outcome so missingness does not shift the stream
        let draw = |e: &EffectSpec, max: f64, count: &mut usize, rng: &mut ChaCha8Rng| {
            let v = e.mean(&rec, f) + e.sigma * std_normal.sample(rng);
            if !(0.0..=max).contains(&v) {
                *count += 1;
            }
            v.clamp(0.0, max)
        };
        let d1 = draw(
            &spec.effects.nihss_baseline,
            NIHSS_MOTOR_MAX,
            &mut clamped.nihss_baseline,
            &mut rng,
        );
        let d180 = draw(
            &spec.effects.nihss_day180,
            NIHSS_MOTOR_MAX,
            &mut clamped.nihss_day180,
            &mut rng,
        );
        let m365 = draw(
            &spec.effects.mrs_day365,
            MRS_MAX,
            &mut clamped.mrs_day365,
            &mut rng,
        );
        let drop180 = miss180.sample(&mut rng);
        let drop365 = miss365.sample(&mut rng);
        rec.nihss_motor_baseline = d1;
        rec.nihss_motor_day180 = (!drop180).then_some(d180);
        rec.mrs_day365 = (!drop365).then_some(m365);
        clamped.total += 3;
        records.push(rec);
    }
    let flags = records
        .iter()
        .zip(flags)
        .map(|(r, f)| SubjectFlags {
            id: r.id.clone(),
            flags: f,
        })
        .collect();
    Ok(SyntheticCohort {
        records,
        flags,
        clamped,
    })
}

/// Records plus a phantom mask pair per subject realizing its flags.
/// Subject `i` uses phantom seed `seed + i`.
pub fn generate_synthetic_cohort(
    spec: &CohortSimSpec,
    seed: u64,
    exec: Execution,
) -> Result<(SyntheticCohort, Vec<Phantom>)> {
    let cohort = simulate_records(spec, seed)?;
    let phantoms = exec
        .map_range(cohort.flags.len(), |i| {
            let flags = cohort.flags[i].flags;
            let pspec = spec_for_flags(flags, seed.wrapping_add(i as u64));
            let p = generate_phantom(&pspec)?;
            if p.truth.flags() != flags {
                return Err(Error::InvalidSpec(format!(
                    "phantom for subject {} does not realize {flags:?}",
                    cohort.flags[i].id
                )));
            }
            Ok(p)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok((cohort, phantoms))
}
