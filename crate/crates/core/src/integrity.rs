//! Tract integrity measures: Dice agreement, haematoma overlap and
//! per-side split detection.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mask::{check_same_grid, MaskVolume};

/// Dice similarity `2|a∩b| / (|a|+|b|)`. Two empty masks score 1.0.
pub fn dice(a: &MaskVolume, b: &MaskVolume) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let total = a.voxel_count() + b.voxel_count();
    if total == 0 {
        log::warn!("dice of two empty masks; reporting 1.0");
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / total as f64)
}

/// Whether the tract shares any voxel with the haematoma, and how many.
pub fn haematoma_overlap(cst: &MaskVolume, haematoma: &MaskVolume) -> Result<(bool, usize)> {
    let n = cst.intersection_count(haematoma)?;
    Ok((n > 0, n))
}

/// The tract divided at a sagittal plane of constant world x.
#[derive(Debug, Clone)]
pub struct SideMasks {
    pub left: MaskVolume,
    pub right: MaskVolume,
    pub midline_world_x: f64,
}

/// World x of the volume's central voxel.
pub fn default_midline(cst: &MaskVolume) -> f64 {
    let h = cst.header();
    let centre = h.dims.map(|d| (d as f64 - 1.0) / 2.0);
    h.world(centre)[0]
}

/// Voxels with world x at or below the midline go left, the rest right.
pub fn split_by_laterality(cst: &MaskVolume, midline: Option<f64>) -> Result<SideMasks> {
    if cst.is_empty() {
        return Err(Error::EmptyMask("CST mask has no voxels".into()));
    }
    let midline_world_x = midline.unwrap_or_else(|| default_midline(cst));
    let h = cst.header();
    let mut left = MaskVolume::empty(h.clone());
    let mut right = MaskVolume::empty(h.clone());
    for i in cst.set_indices() {
        let [x, y, z] = h.coords(i);
        let wx = h.world([x as f64, y as f64, z as f64])[0];
        if wx <= midline_world_x {
            left.set(x, y, z, true);
        } else {
            right.set(x, y, z, true);
        }
    }
    Ok(SideMasks {
        left,
        right,
        midline_world_x,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct SideSplit {
    pub split: bool,
    /// The side has no voxels at all.
    pub missing: bool,
    /// Empty axial slices strictly inside the side's z-extent.
    pub gap_slices: Vec<usize>,
    pub z_extent: Option<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitResult {
    pub split: bool,
    pub left: SideSplit,
    pub right: SideSplit,
}

fn side_split(side: &MaskVolume) -> SideSplit {
    let [nx, ny, nz] = side.dims();
    let plane = nx * ny;
    let occupied: Vec<bool> = side
        .bits()
        .chunks_exact(plane)
        .take(nz)
        .map(|slice| slice.iter().any(|&b| b))
        .collect();
    let zmin = occupied.iter().position(|&o| o);
    let zmax = occupied.iter().rposition(|&o| o);
    match (zmin, zmax) {
        (Some(lo), Some(hi)) => {
            let gap_slices: Vec<usize> = (lo + 1..hi).filter(|&z| !occupied[z]).collect();
            SideSplit {
                split: !gap_slices.is_empty(),
                missing: false,
                gap_slices,
                z_extent: Some((lo, hi)),
            }
        }
        _ => SideSplit {
            split: true,
            missing: true,
            gap_slices: Vec::new(),
            z_extent: None,
        },
    }
}

/// Per-side split detection. A side is split when an axial slice strictly
/// inside its own z-extent is empty, or when the side is absent entirely.
pub fn detect_split(cst: &MaskVolume, midline: Option<f64>) -> Result<SplitResult> {
    let sides = split_by_laterality(cst, midline)?;
    Ok(detect_split_sides(&sides))
}

pub fn detect_split_sides(sides: &SideMasks) -> SplitResult {
    let left = side_split(&sides.left);
    let right = side_split(&sides.right);
    SplitResult {
        split: left.split || right.split,
        left,
        right,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrityResult {
    pub overlap: bool,
    pub overlap_voxels: usize,
    pub split: bool,
    pub split_left: bool,
    pub split_right: bool,
    pub missing_left: bool,
    pub missing_right: bool,
    pub gap_slices_left: Vec<usize>,
    pub gap_slices_right: Vec<usize>,
    pub cst_volume_ml: f64,
    pub haematoma_volume_ml: f64,
    pub midline_world_x: f64,
}

impl IntegrityResult {
    pub fn flags(&self) -> IntegrityFlags {
        IntegrityFlags {
            overlap: self.overlap,
            split: self.split,
        }
    }
}

/// The two binary integrity measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize)]
pub struct IntegrityFlags {
    pub overlap: bool,
    pub split: bool,
}

pub fn assess_integrity(
    cst: &MaskVolume,
    haematoma: &MaskVolume,
    midline: Option<f64>,
) -> Result<IntegrityResult> {
    check_same_grid(cst.header(), haematoma.header())?;
    let (overlap, overlap_voxels) = haematoma_overlap(cst, haematoma)?;
    let sides = split_by_laterality(cst, midline)?;
    let split = detect_split_sides(&sides);
    Ok(IntegrityResult {
        overlap,
        overlap_voxels,
        split: split.split,
        split_left: split.left.split,
        split_right: split.right.split,
        missing_left: split.left.missing,
        missing_right: split.right.missing,
        gap_slices_left: split.left.gap_slices,
        gap_slices_right: split.right.gap_slices,
        cst_volume_ml: cst.volume_ml(),
        haematoma_volume_ml: haematoma.volume_ml(),
        midline_world_x: sides.midline_world_x,
    })
}
