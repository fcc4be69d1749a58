//! Binary voxel masks and the set operations the metrics are built on.

use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nifti::{self, Datatype, ScalarVolume, VolumeHeader};

/// Per-element affine tolerance (mm) for treating two grids as the same.
pub const AFFINE_TOLERANCE: f64 = 1e-3;
const VOXEL_SIZE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub enum Connectivity {
    /// Face neighbours only.
    Six,
    /// Face, edge and corner neighbours.
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Option<Self> {
        match n {
            6 => Some(Connectivity::Six),
            26 => Some(Connectivity::TwentySix),
            _ => None,
        }
    }

    pub fn count(self) -> u32 {
        match self {
            Connectivity::Six => 6,
            Connectivity::TwentySix => 26,
        }
    }

    pub fn offsets(self) -> Vec<[isize; 3]> {
        let mut out = Vec::with_capacity(26);
        for dz in -1isize..=1 {
            for dy in -1isize..=1 {
                for dx in -1isize..=1 {
                    let manhattan = dx.abs() + dy.abs() + dz.abs();
                    let keep = match self {
                        Connectivity::Six => manhattan == 1,
                        Connectivity::TwentySix => manhattan > 0,
                    };
                    if keep {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaskVolume {
    header: VolumeHeader,
    bits: Vec<bool>,
}

impl MaskVolume {
    pub fn new(header: VolumeHeader, bits: Vec<bool>) -> Result<Self> {
        header.validate()?;
        if bits.len() != header.voxel_count() {
            return Err(Error::GridMismatch(format!(
                "{} mask bits for dims {:?}",
                bits.len(),
                header.dims
            )));
        }
        Ok(MaskVolume { header, bits })
    }

    pub(crate) fn from_parts(header: VolumeHeader, bits: Vec<bool>) -> Self {
        debug_assert_eq!(bits.len(), header.voxel_count());
        MaskVolume { header, bits }
    }

    pub fn empty(header: VolumeHeader) -> Self {
        let n = header.voxel_count();
        MaskVolume {
            header,
            bits: vec![false; n],
        }
    }

    pub fn header(&self) -> &VolumeHeader {
        &self.header
    }

    pub fn dims(&self) -> [usize; 3] {
        self.header.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.header.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: bool) {
        let i = self.header.index(x, y, z);
        self.bits[i] = value;
    }

    pub fn voxel_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Mask volume in millilitres.
    pub fn volume_ml(&self) -> f64 {
        self.voxel_count() as f64 * self.header.voxel_volume_ml()
    }

    /// Iterator over the linear indices of set voxels.
    pub fn set_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
    }

    /// Voxelwise AND; the header is taken from `self`.
    pub fn intersect(&self, other: &MaskVolume) -> Result<MaskVolume> {
        check_same_grid(&self.header, &other.header)?;
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        Ok(MaskVolume::from_parts(self.header.clone(), bits))
    }

    /// `|self ∩ other|` without materializing the intersection.
    pub fn intersection_count(&self, other: &MaskVolume) -> Result<usize> {
        check_same_grid(&self.header, &other.header)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(&a, &b)| a && b)
            .count())
    }

    pub fn to_volume(&self) -> ScalarVolume {
        let mut header = self.header.clone();
        header.datatype = Datatype::Uint8;
        header.scale_slope = 1.0;
        header.scale_intercept = 0.0;
        ScalarVolume {
            header,
            voxels: self
                .bits
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        nifti::write_volume(&self.to_volume(), path, Datatype::Uint8)
    }
}

pub fn check_same_grid(a: &VolumeHeader, b: &VolumeHeader) -> Result<()> {
    if a.dims != b.dims {
        return Err(Error::GridMismatch(format!(
            "dims {:?} vs {:?}",
            a.dims, b.dims
        )));
    }
    if a.voxel_size
        .iter()
        .zip(&b.voxel_size)
        .any(|(x, y)| (x - y).abs() > VOXEL_SIZE_TOLERANCE)
    {
        return Err(Error::GridMismatch(format!(
            "voxel sizes {:?} vs {:?}",
            a.voxel_size, b.voxel_size
        )));
    }
    let max_diff = a
        .affine
        .iter()
        .flatten()
        .zip(b.affine.iter().flatten())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    if max_diff > AFFINE_TOLERANCE {
        return Err(Error::AffineMismatch { max_diff });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabeling {
    /// 0 is background, components are numbered from 1.
    pub labels: Vec<u32>,
    /// Voxel count of component `i + 1`, in descending order.
    pub component_sizes: Vec<usize>,
}

impl ComponentLabeling {
    pub fn len(&self) -> usize {
        self.component_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.component_sizes.is_empty()
    }
}

/// Labels connected components. Label 1 is the largest; equal sizes are
/// ordered by the smallest linear index in each component.
pub fn connected_components(m: &MaskVolume, connectivity: Connectivity) -> ComponentLabeling {
    let [nx, ny, nz] = m.dims();
    let offsets = connectivity.offsets();
    let mut provisional = vec![0u32; m.bits.len()];
    let mut sizes: Vec<usize> = Vec::new();
    let mut queue = VecDeque::new();

    // Scanning in linear order discovers components by their smallest index.
    for start in 0..m.bits.len() {
        if !m.bits[start] || provisional[start] != 0 {
            continue;
        }
        let label = sizes.len() as u32 + 1;
        provisional[start] = label;
        queue.push_back(start);
        let mut size = 0usize;
        while let Some(i) = queue.pop_front() {
            size += 1;
            let [x, y, z] = m.header.coords(i);
            for off in &offsets {
                let (qx, qy, qz) = (
                    x as isize + off[0],
                    y as isize + off[1],
                    z as isize + off[2],
                );
                if qx < 0 || qy < 0 || qz < 0 {
                    continue;
                }
                let (qx, qy, qz) = (qx as usize, qy as usize, qz as usize);
                if qx >= nx || qy >= ny || qz >= nz {
                    continue;
                }
                let j = m.header.index(qx, qy, qz);
                if m.bits[j] && provisional[j] == 0 {
                    provisional[j] = label;
                    queue.push_back(j);
                }
            }
        }
        sizes.push(size);
    }

    let mut order: Vec<usize> = (0..sizes.len()).collect();
    // stable: ties keep discovery order
    order.sort_by(|&a, &b| sizes[b].cmp(&sizes[a]));
    let mut remap = vec![0u32; sizes.len() + 1];
    for (new, &old) in order.iter().enumerate() {
        remap[old + 1] = new as u32 + 1;
    }
    let labels = provisional.iter().map(|&l| remap[l as usize]).collect();
    let component_sizes = order.iter().map(|&i| sizes[i]).collect();
    ComponentLabeling {
        labels,
        component_sizes,
    }
}

/// Keeps only components with at least `min_voxels` voxels.
pub fn filter_small_components(
    m: &MaskVolume,
    min_voxels: usize,
    connectivity: Connectivity,
) -> MaskVolume {
    if min_voxels <= 1 {
        return m.clone();
    }
    let labeling = connected_components(m, connectivity);
    let keep: Vec<bool> = std::iter::once(false)
        .chain(labeling.component_sizes.iter().map(|&s| s >= min_voxels))
        .collect();
    let bits = labeling.labels.iter().map(|&l| keep[l as usize]).collect();
    MaskVolume::from_parts(m.header.clone(), bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> VolumeHeader {
        VolumeHeader::new([n, n, n], [1.0; 3]).unwrap()
    }

    #[test]
    fn counts_and_volume() {
        let mut m = MaskVolume::empty(grid(3));
        assert_eq!(m.voxel_count(), 0);
        assert_eq!(m.volume_ml(), 0.0);
        m.set(1, 1, 1, true);
        assert_eq!(m.voxel_count(), 1);
        let full = MaskVolume::new(grid(3), vec![true; 27]).unwrap();
        assert_eq!(full.voxel_count(), 27);
    }

    #[test]
    fn volume_in_millilitres() {
        let m = MaskVolume::new(grid(10), vec![true; 1000]).unwrap();
        assert!((m.volume_ml() - 1.0).abs() < 1e-12);
        let h = VolumeHeader::new([433, 100, 1], [1.0; 3]).unwrap();
        let m = MaskVolume::new(h, vec![true; 43_300]).unwrap();
        assert!((m.volume_ml() - 43.3).abs() < 1e-9);
        let h = VolumeHeader::new([2, 1, 1], [2.0, 2.5, 4.0]).unwrap();
        let m = MaskVolume::new(h, vec![true, false]).unwrap();
        assert!((m.volume_ml() - 0.02).abs() < 1e-12);
    }

    #[test]
    fn intersect_laws() {
        let mut a = MaskVolume::empty(grid(4));
        let mut b = MaskVolume::empty(grid(4));
        a.set(0, 0, 0, true);
        a.set(1, 0, 0, true);
        b.set(1, 0, 0, true);
        b.set(2, 0, 0, true);
        b.set(0, 0, 0, true);
        assert_eq!(a.intersect(&a).unwrap(), a);
        // a ⊂ b
        assert_eq!(a.intersect(&b).unwrap(), a);
        let mut c = MaskVolume::empty(grid(4));
        c.set(3, 3, 3, true);
        assert!(a.intersect(&c).unwrap().is_empty());
    }

    #[test]
    fn grid_checks() {
        let a = MaskVolume::empty(grid(4));
        let b = MaskVolume::empty(grid(5));
        assert!(matches!(a.intersect(&b), Err(Error::GridMismatch(_))));

        let h = VolumeHeader::new([4, 4, 4], [1.0, 1.0, 2.0]).unwrap();
        let c = MaskVolume::empty(h);
        assert!(matches!(a.intersect(&c), Err(Error::GridMismatch(_))));

        let mut shifted = grid(4).affine;
        shifted[0][3] = 5e-4;
        let d = MaskVolume::empty(grid(4).with_affine(shifted).unwrap());
        assert!(a.intersect(&d).is_ok());
        shifted[0][3] = 2e-3;
        let e = MaskVolume::empty(grid(4).with_affine(shifted).unwrap());
        assert!(matches!(a.intersect(&e), Err(Error::AffineMismatch { .. })));
    }

    #[test]
    fn components_opposite_corners() {
        let mut m = MaskVolume::empty(grid(4));
        m.set(0, 0, 0, true);
        m.set(3, 3, 3, true);
        let cc = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(cc.component_sizes, vec![1, 1]);
        // tie: smallest linear index gets label 1
        assert_eq!(cc.labels[0], 1);
        assert_eq!(cc.labels[63], 2);
    }

    #[test]
    fn components_solid_cube() {
        let m = MaskVolume::new(grid(3), vec![true; 27]).unwrap();
        let cc = connected_components(&m, Connectivity::Six);
        assert_eq!(cc.component_sizes, vec![27]);
        assert!(cc.labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn components_diagonal_pair() {
        let mut m = MaskVolume::empty(grid(2));
        m.set(0, 0, 0, true);
        m.set(1, 1, 1, true);
        assert_eq!(connected_components(&m, Connectivity::TwentySix).len(), 1);
        assert_eq!(connected_components(&m, Connectivity::Six).len(), 2);
    }

    #[test]
    fn largest_component_first() {
        let mut m = MaskVolume::empty(grid(6));
        m.set(0, 0, 0, true);
        for x in 0..4 {
            m.set(x, 5, 5, true);
        }
        let cc = connected_components(&m, Connectivity::TwentySix);
        assert_eq!(cc.component_sizes, vec![4, 1]);
        assert_eq!(cc.labels[0], 2);
        assert_eq!(cc.labels[m.header().index(0, 5, 5)], 1);
    }

    #[test]
    fn filter_components() {
        let mut m = MaskVolume::empty(grid(12));
        assert_eq!(filter_small_components(&m, 0, Connectivity::TwentySix), m);
        m.set(0, 0, 0, true);
        assert!(filter_small_components(&m, 2, Connectivity::TwentySix).is_empty());
        // 100-voxel slab and a 3-voxel rod
        for x in 2..12 {
            for y in 2..12 {
                m.set(x, y, 6, true);
            }
        }
        m.set(0, 0, 0, false);
        for z in 0..3 {
            m.set(0, 0, z, true);
        }
        let f = filter_small_components(&m, 10, Connectivity::TwentySix);
        assert_eq!(f.voxel_count(), 100);
        assert!(!f.get(0, 0, 0));
        assert_eq!(filter_small_components(&f, 10, Connectivity::TwentySix), f);
    }
}
