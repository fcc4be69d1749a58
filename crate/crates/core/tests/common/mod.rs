//! Independent reference implementations used by the integration tests.
//! None of these call into the code paths they check.

#![allow(dead_code)]

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use cst_core::mask::{Connectivity, MaskVolume};
use cst_core::nifti::VolumeHeader;
use cst_core::phantom::PhantomSpec;

pub fn cube(n: usize) -> VolumeHeader {
    VolumeHeader::new([n, n, n], [1.0; 3]).unwrap()
}

pub fn random_mask(rng: &mut ChaCha8Rng, header: &VolumeHeader, density: f64) -> MaskVolume {
    let bits = (0..header.voxel_count())
        .map(|_| rng.random_bool(density))
        .collect();
    MaskVolume::new(header.clone(), bits).unwrap()
}

/// Voxel counts by coordinate loops: (|a|, |b|, |a∩b|).
pub fn brute_counts(a: &MaskVolume, b: &MaskVolume) -> (usize, usize, usize) {
    let [nx, ny, nz] = a.dims();
    let (mut ca, mut cb, mut both) = (0, 0, 0);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let (p, q) = (a.get(x, y, z), b.get(x, y, z));
                ca += p as usize;
                cb += q as usize;
                both += (p && q) as usize;
            }
        }
    }
    (ca, cb, both)
}

/// Dice as an exact fraction `(2|a∩b|, |a|+|b|)`.
pub fn brute_dice_fraction(a: &MaskVolume, b: &MaskVolume) -> (usize, usize) {
    let (ca, cb, both) = brute_counts(a, b);
    (2 * both, ca + cb)
}

fn neighbours(conn: Connectivity) -> Vec<[isize; 3]> {
    let mut v = Vec::new();
    for dz in -1isize..=1 {
        for dy in -1isize..=1 {
            for dx in -1isize..=1 {
                let manhattan = dx.abs() + dy.abs() + dz.abs();
                let ok = match conn {
                    Connectivity::Six => manhattan == 1,
                    Connectivity::TwentySix => manhattan >= 1,
                };
                if ok {
                    v.push([dx, dy, dz]);
                }
            }
        }
    }
    v
}

/// Connected components by iterated minimum-label propagation until a
/// fixed point. Returns a label per voxel (`usize::MAX` for background).
pub fn min_label_components(m: &MaskVolume, conn: Connectivity) -> Vec<usize> {
    let [nx, ny, nz] = m.dims();
    let idx = |x: usize, y: usize, z: usize| x + nx * (y + ny * z);
    let mut label: Vec<usize> = (0..nx * ny * nz)
        .map(|i| {
            let (x, y, z) = (i % nx, (i / nx) % ny, i / (nx * ny));
            if m.get(x, y, z) {
                i
            } else {
                usize::MAX
            }
        })
        .collect();
    let offs = neighbours(conn);
    loop {
        let mut changed = false;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let i = idx(x, y, z);
                    if label[i] == usize::MAX {
                        continue;
                    }
                    for o in &offs {
                        let (qx, qy, qz) =
                            (x as isize + o[0], y as isize + o[1], z as isize + o[2]);
                        if qx < 0
                            || qy < 0
                            || qz < 0
                            || qx >= nx as isize
                            || qy >= ny as isize
                            || qz >= nz as isize
                        {
                            continue;
                        }
                        let j = idx(qx as usize, qy as usize, qz as usize);
                        if label[j] < label[i] {
                            label[i] = label[j];
                            changed = true;
                        }
                    }
                }
            }
        }
        if !changed {
            return label;
        }
    }
}

/// Per-side verdict from a direct slice scan: (split, missing).
pub fn scan_side(m: &MaskVolume, midline: f64, left: bool) -> (bool, bool) {
    let [nx, ny, nz] = m.dims();
    let h = m.header();
    let occupied: Vec<bool> = (0..nz)
        .map(|z| {
            (0..ny).any(|y| {
                (0..nx).any(|x| {
                    let wx = h.affine[0][0] * x as f64
                        + h.affine[0][1] * y as f64
                        + h.affine[0][2] * z as f64
                        + h.affine[0][3];
                    let on_side = if left { wx <= midline } else { wx > midline };
                    on_side && m.get(x, y, z)
                })
            })
        })
        .collect();
    let Some(lo) = occupied.iter().position(|&o| o) else {
        return (true, true);
    };
    let hi = occupied.iter().rposition(|&o| o).unwrap();
    ((lo..=hi).any(|z| !occupied[z]), false)
}

/// Haematoma voxels recomputed from the ellipsoid equation.
pub fn ellipsoid_mask(spec: &PhantomSpec) -> Vec<bool> {
    let [nx, ny, nz] = spec.dims;
    let mut out = Vec::with_capacity(nx * ny * nz);
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let p = [x as f64, y as f64, z as f64];
                let mut s = 0.0;
                for a in 0..3 {
                    let d = (p[a] * spec.voxel_size[a] - spec.haematoma_center[a])
                        / spec.haematoma_radii[a];
                    s += d * d;
                }
                out.push(s <= 1.0);
            }
        }
    }
    out
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize, rule: &[(f64, f64)]) -> f64 {
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = a + (p as f64 + 0.5) * h;
        let s: f64 = rule.iter().map(|&(x, w)| w * f(mid + 0.5 * h * x)).sum();
        total += 0.5 * h * s;
    }
    total
}

/// Student-t CDF via the substitution t = √ν·tan θ, which turns the density
/// into a multiple of cos^(ν-1) θ on (-π/2, π/2). Tails are integrated
/// directly so small probabilities keep their absolute accuracy.
pub fn t_cdf_quadrature(t: f64, nu: f64) -> f64 {
    let rule = gauss_legendre(20);
    let f = |th: f64| {
        let c = th.cos();
        if c <= 0.0 {
            0.0
        } else {
            ((nu - 1.0) * c.ln()).exp()
        }
    };
    let half = std::f64::consts::FRAC_PI_2;
    let panels = 4000;
    let total = integrate(f, 0.0, half, panels, &rule);
    let a = (t.abs() / nu.sqrt()).atan();
    let tail = integrate(f, a, half, panels, &rule);
    let upper = 0.5 * tail / total;
    if t >= 0.0 {
        1.0 - upper
    } else {
        upper
    }
}

pub fn to_rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Exact least-squares solution of the normal equations (XᵀX)β = Xᵀy over
/// the rationals, with the f64 inputs taken as exact values.
pub fn exact_ols(x: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let k = x[0].len();
    let xr: Vec<Vec<BigRational>> = x
        .iter()
        .map(|r| r.iter().map(|&v| to_rational(v)).collect())
        .collect();
    let yr: Vec<BigRational> = y.iter().map(|&v| to_rational(v)).collect();
    let mut a = vec![vec![BigRational::zero(); k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            let mut s = BigRational::zero();
            for r in &xr {
                s += &r[i] * &r[j];
            }
            a[i][j] = s;
        }
        let mut s = BigRational::zero();
        for (r, yv) in xr.iter().zip(&yr) {
            s += &r[i] * yv;
        }
        a[i][k] = s;
    }
    for c in 0..k {
        let p = (c..k).find(|&r| !a[r][c].is_zero()).expect("full rank");
        a.swap(c, p);
        let piv = a[c][c].clone();
        for j in c..=k {
            a[c][j] = &a[c][j] / &piv;
        }
        for r in 0..k {
            if r != c && !a[r][c].is_zero() {
                let f = a[r][c].clone();
                for j in c..=k {
                    let d = &f * &a[c][j];
                    a[r][j] -= d;
                }
            }
        }
    }
    debug_assert!(a[0][0] == BigRational::one());
    a.iter().map(|row| rational_to_f64(&row[k])).collect()
}

pub fn rational_to_f64(r: &BigRational) -> f64 {
    // scale to keep ~60 significant bits before converting
    let shift = 64i64 - (r.numer().bits() as i64 - r.denom().bits() as i64);
    let scaled = if shift >= 0 {
        (r.numer() << shift as usize) / r.denom()
    } else {
        r.numer() / (r.denom() << (-shift) as usize)
    };
    let v: f64 = BigInt::to_f64(&scaled).unwrap();
    v * 2f64.powi(-shift as i32)
}

/// Type-7 quantile straight from the definition on a sorted copy.
pub fn type7(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}
