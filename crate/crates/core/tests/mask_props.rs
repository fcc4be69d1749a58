mod common;

use std::collections::HashMap;

use proptest::prelude::*;

use cst_core::integrity::{detect_split, dice, haematoma_overlap};
use cst_core::mask::{connected_components, filter_small_components, Connectivity, MaskVolume};
use cst_core::nifti::VolumeHeader;

use common::{brute_counts, brute_dice_fraction, min_label_components, scan_side};

fn mask_strategy(max: usize) -> impl Strategy<Value = MaskVolume> {
    (1..=max, 1..=max, 1..=max, 0.05f64..0.7).prop_flat_map(|(nx, ny, nz, p)| {
        proptest::collection::vec(proptest::bool::weighted(p), nx * ny * nz).prop_map(move |bits| {
            MaskVolume::new(VolumeHeader::new([nx, ny, nz], [1.0; 3]).unwrap(), bits).unwrap()
        })
    })
}

fn pair_strategy(max: usize) -> impl Strategy<Value = (MaskVolume, MaskVolume)> {
    (1..=max, 1..=max, 1..=max).prop_flat_map(|(nx, ny, nz)| {
        let n = nx * ny * nz;
        let mk = move |bits: Vec<bool>| {
            MaskVolume::new(VolumeHeader::new([nx, ny, nz], [1.0; 3]).unwrap(), bits).unwrap()
        };
        (
            proptest::collection::vec(any::<bool>(), n).prop_map(mk),
            proptest::collection::vec(any::<bool>(), n).prop_map(mk),
        )
    })
}

fn conn_strategy() -> impl Strategy<Value = Connectivity> {
    prop_oneof![Just(Connectivity::Six), Just(Connectivity::TwentySix)]
}

fn mirror_x(m: &MaskVolume) -> MaskVolume {
    let [nx, ny, nz] = m.dims();
    let mut out = MaskVolume::empty(m.header().clone());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                out.set(nx - 1 - x, y, z, m.get(x, y, z));
            }
        }
    }
    out
}

/// Shifts the mask inside a larger grid.
fn embed(m: &MaskVolume, pad: [usize; 3]) -> MaskVolume {
    let [nx, ny, nz] = m.dims();
    let h = VolumeHeader::new(
        [nx + pad[0] + 1, ny + pad[1] + 1, nz + pad[2] + 1],
        [1.0; 3],
    )
    .unwrap();
    let mut out = MaskVolume::empty(h);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if m.get(x, y, z) {
                    out.set(x + pad[0], y + pad[1], z + pad[2], true);
                }
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn intersection_laws((a, b) in pair_strategy(7)) {
        let ab = a.intersect(&b).unwrap();
        prop_assert_eq!(&ab, &b.intersect(&a).unwrap());
        prop_assert_eq!(&a.intersect(&a).unwrap(), &a);
        prop_assert_eq!(&ab.intersect(&b).unwrap(), &ab);
        let (_, _, both) = brute_counts(&a, &b);
        prop_assert_eq!(ab.voxel_count(), both);
        prop_assert_eq!(a.intersection_count(&b).unwrap(), both);
    }

    #[test]
    fn dice_matches_counts_and_invariants((a, b) in pair_strategy(7)) {
        let d = dice(&a, &b).unwrap();
        let (num, den) = brute_dice_fraction(&a, &b);
        let expected = if den == 0 { 1.0 } else { num as f64 / den as f64 };
        prop_assert_eq!(d, expected);
        prop_assert_eq!(d, dice(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&d));
        prop_assert_eq!(dice(&a, &a).unwrap(), 1.0);
        prop_assert_eq!(dice(&mirror_x(&a), &mirror_x(&b)).unwrap(), d);
        prop_assert_eq!(dice(&embed(&a, [2, 1, 3]), &embed(&b, [2, 1, 3])).unwrap(), d);
    }

    #[test]
    fn components_match_label_propagation(m in mask_strategy(7), conn in conn_strategy()) {
        let lab = connected_components(&m, conn);
        let oracle = min_label_components(&m, conn);
        // same partition: a bijection between labels
        let mut fwd: HashMap<u32, usize> = HashMap::new();
        let mut back: HashMap<usize, u32> = HashMap::new();
        for (i, (&l, &o)) in lab.labels.iter().zip(&oracle).enumerate() {
            prop_assert_eq!(l == 0, o == usize::MAX, "voxel {}", i);
            if l == 0 { continue; }
            prop_assert_eq!(*fwd.entry(l).or_insert(o), o);
            prop_assert_eq!(*back.entry(o).or_insert(l), l);
        }
        prop_assert_eq!(fwd.len(), lab.len());
        let mut sizes: Vec<usize> = back.keys().map(|&o| oracle.iter().filter(|&&x| x == o).count()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        prop_assert_eq!(&sizes, &lab.component_sizes);
        prop_assert_eq!(lab.component_sizes.iter().sum::<usize>(), m.voxel_count());
    }

    #[test]
    fn six_connectivity_never_merges_more(m in mask_strategy(6)) {
        let six = connected_components(&m, Connectivity::Six).len();
        let full = connected_components(&m, Connectivity::TwentySix).len();
        prop_assert!(six >= full);
    }

    #[test]
    fn filtering_keeps_exactly_the_large_components(m in mask_strategy(6), min in 0usize..6, conn in conn_strategy()) {
        let f = filter_small_components(&m, min, conn);
        let oracle = min_label_components(&m, conn);
        for (i, &o) in oracle.iter().enumerate() {
            let keep = o != usize::MAX && oracle.iter().filter(|&&x| x == o).count() >= min.max(1);
            prop_assert_eq!(f.bits()[i], keep);
        }
        prop_assert_eq!(&filter_small_components(&f, min, conn), &f);
    }

    #[test]
    fn overlap_agrees_with_counts((a, b) in pair_strategy(6)) {
        let (flag, n) = haematoma_overlap(&a, &b).unwrap();
        let (_, _, both) = brute_counts(&a, &b);
        prop_assert_eq!(n, both);
        prop_assert_eq!(flag, both > 0);
    }

    #[test]
    fn split_matches_slice_scan(m in mask_strategy(8), mid in 0.0f64..8.0) {
        prop_assume!(!m.is_empty());
        let r = detect_split(&m, Some(mid)).unwrap();
        let (ls, lm) = scan_side(&m, mid, true);
        let (rs, rm) = scan_side(&m, mid, false);
        prop_assert_eq!((r.left.split, r.left.missing), (ls, lm));
        prop_assert_eq!((r.right.split, r.right.missing), (rs, rm));
        prop_assert_eq!(r.split, ls || rs);
    }

    #[test]
    fn split_is_mirror_symmetric(m in mask_strategy(8)) {
        prop_assume!(!m.is_empty());
        let [nx, _, _] = m.dims();
        // the default midline is the centre of x, which mirroring fixes;
        // voxels exactly on it stay left, so use an even width
        prop_assume!(nx % 2 == 0);
        let r = detect_split(&m, None).unwrap();
        let mr = detect_split(&mirror_x(&m), None).unwrap();
        prop_assert_eq!(&r.left, &mr.right);
        prop_assert_eq!(&r.right, &mr.left);
    }
}
