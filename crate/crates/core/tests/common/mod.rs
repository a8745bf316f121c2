//! Independent brute-force oracles and random fixtures shared by integration tests.
#![allow(dead_code)]

use brats_core::volume::{Grid, LabelCoding, LabelVolume, Mask, RegionProbSet, Spacing};
use rand::rngs::StdRng;
use rand::Rng;

pub fn voxel_coords(shape: [usize; 3]) -> impl Iterator<Item = [usize; 3]> {
    let [nx, ny, nz] = shape;
    (0..nz).flat_map(move |z| (0..ny).flat_map(move |y| (0..nx).map(move |x| [x, y, z])))
}

pub fn is_set(m: &Mask, p: [usize; 3]) -> bool {
    *m.get(p[0], p[1], p[2])
}

/// Voxel-count Dice with integer counts.
pub fn oracle_dice(a: &Mask, b: &Mask) -> f64 {
    let mut na = 0u64;
    let mut nb = 0u64;
    let mut both = 0u64;
    for p in voxel_coords(a.shape()) {
        let (x, y) = (is_set(a, p), is_set(b, p));
        na += x as u64;
        nb += y as u64;
        both += (x && y) as u64;
    }
    2.0 * both as f64 / (na + nb) as f64
}

/// Set voxels with at least one 6-neighbor outside the mask or the array.
pub fn oracle_surface(m: &Mask) -> Vec<[usize; 3]> {
    let shape = m.shape();
    let neighbors: [[i64; 3]; 6] = [
        [1, 0, 0],
        [-1, 0, 0],
        [0, 1, 0],
        [0, -1, 0],
        [0, 0, 1],
        [0, 0, -1],
    ];
    voxel_coords(shape)
        .filter(|&p| is_set(m, p))
        .filter(|&p| {
            neighbors.iter().any(|d| {
                let q: Vec<i64> = (0..3).map(|k| p[k] as i64 + d[k]).collect();
                let inside = (0..3).all(|k| q[k] >= 0 && q[k] < shape[k] as i64);
                !inside || !is_set(m, [q[0] as usize, q[1] as usize, q[2] as usize])
            })
        })
        .collect()
}

pub fn euclid(p: [usize; 3], q: [usize; 3], s: [f64; 3]) -> f64 {
    (0..3)
        .map(|k| {
            let d = (p[k] as f64 - q[k] as f64) * s[k];
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Exhaustive directed surface distances.
pub fn oracle_directed(a: &Mask, b: &Mask, spacing: Spacing) -> Vec<f64> {
    let s = spacing.as_array();
    let sb = oracle_surface(b);
    oracle_surface(a)
        .into_iter()
        .map(|p| {
            sb.iter()
                .map(|&q| euclid(p, q, s))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Linear-interpolation percentile at position (n - 1) q / 100.
pub fn oracle_percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = (v.len() - 1) as f64 * q / 100.0;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (pos - lo as f64) * (v[hi] - v[lo])
}

pub fn oracle_hd95(a: &Mask, b: &Mask, spacing: Spacing) -> f64 {
    let ab = oracle_percentile(&oracle_directed(a, b, spacing), 95.0);
    let ba = oracle_percentile(&oracle_directed(b, a, spacing), 95.0);
    ab.max(ba)
}

/// Fractional rank by counting: 1 + #strictly better + #ties / 2.
pub fn oracle_ranks(values: &[f64], higher_better: bool) -> Vec<f64> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let mut r = 1.0;
            for (j, &w) in values.iter().enumerate() {
                if i == j {
                    continue;
                }
                if w == v {
                    r += 0.5;
                } else if (w > v) == higher_better {
                    r += 1.0;
                }
            }
            r
        })
        .collect()
}

pub fn random_shape(rng: &mut StdRng, max: usize) -> [usize; 3] {
    [
        rng.gen_range(1..=max),
        rng.gen_range(1..=max),
        rng.gen_range(1..=max),
    ]
}

/// Random mask made of a few axis-aligned boxes plus salt noise, nonempty.
pub fn random_mask(rng: &mut StdRng, shape: [usize; 3]) -> Mask {
    let mut m = Grid::filled(shape, false).unwrap();
    let boxes = rng.gen_range(1..=3);
    for _ in 0..boxes {
        let lo: Vec<usize> = (0..3).map(|k| rng.gen_range(0..shape[k])).collect();
        let hi: Vec<usize> = (0..3).map(|k| rng.gen_range(lo[k]..shape[k])).collect();
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    m.set(x, y, z, true);
                }
            }
        }
    }
    let noise = rng.gen_range(0.0..0.1);
    for v in m.as_mut_slice() {
        if rng.gen_bool(noise) {
            *v = !*v;
        }
    }
    if !m.any() {
        m.set(0, 0, 0, true);
    }
    m
}

pub fn random_spacing(rng: &mut StdRng) -> Spacing {
    Spacing::new(
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.3..3.0),
        rng.gen_range(0.3..3.0),
    )
    .unwrap()
}

/// Label volume with a nested blob: edema shell, necrotic core, enhancing rim fragments.
pub fn random_label_volume(rng: &mut StdRng, shape: [usize; 3], spacing: Spacing) -> LabelVolume {
    let c = LabelCoding::default();
    let codes = [c.background, c.necrosis, c.edema, c.enhancing];
    let mut g = Grid::filled(shape, c.background).unwrap();
    let center: Vec<f64> = (0..3)
        .map(|k| rng.gen_range(0.0..shape[k] as f64))
        .collect();
    let radius = rng.gen_range(0.5..(shape.iter().copied().max().unwrap() as f64 / 2.0).max(1.0));
    let et_prob = rng.gen_range(0.0..1.0);
    for p in voxel_coords(shape) {
        let d = (0..3)
            .map(|k| (p[k] as f64 - center[k]).powi(2))
            .sum::<f64>()
            .sqrt();
        let label = if d > radius {
            if rng.gen_bool(0.01) {
                codes[rng.gen_range(1..4)]
            } else {
                c.background
            }
        } else if d > 0.6 * radius {
            c.edema
        } else if rng.gen_bool(et_prob) {
            c.enhancing
        } else {
            c.necrosis
        };
        g.set(p[0], p[1], p[2], label);
    }
    LabelVolume::new(g, spacing, c).unwrap()
}

pub fn random_probs(rng: &mut StdRng, shape: [usize; 3]) -> RegionProbSet {
    let n: usize = shape.iter().product();
    let mut g =
        || Grid::from_vec(shape, (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect()).unwrap();
    let (wt, tc, et) = (g(), g(), g());
    RegionProbSet::new(wt, tc, et, Spacing::default()).unwrap()
}

/// Jackknife fixture found by randomized search: removing algorithm "A" swaps
/// the order of "B" and "C". Rows are [Dice WT, TC, ET, HD95 WT, TC, ET] for
/// case 0 then case 1.
pub const FLIP_FIXTURE: [[f64; 12]; 3] = [
    [0.8, 0.9, 0.9, 9.0, 5.0, 5.0, 0.9, 0.7, 0.8, 5.0, 9.0, 9.0],
    [0.8, 0.7, 0.7, 9.0, 2.0, 2.0, 0.7, 0.9, 0.8, 9.0, 2.0, 5.0],
    [0.8, 0.8, 0.8, 2.0, 9.0, 2.0, 0.7, 0.7, 0.7, 5.0, 9.0, 2.0],
];

/// Brute-force rank-then-aggregate scores for rows laid out like [`FLIP_FIXTURE`].
pub fn oracle_scores(rows: &[&[f64]]) -> Vec<f64> {
    let n = rows.len();
    let cols = rows[0].len();
    let mut sums = vec![0.0; n];
    for c in 0..cols {
        let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
        for (s, r) in sums.iter_mut().zip(oracle_ranks(&col, c % 6 < 3)) {
            *s += r;
        }
    }
    sums.iter().map(|s| s / cols as f64 / n as f64).collect()
}
