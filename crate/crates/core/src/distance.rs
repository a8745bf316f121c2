//! Mask surfaces and exact anisotropic Euclidean distance transforms.
//!
//! The distance transform is the separable lower-envelope algorithm of
//! Felzenszwalb and Huttenlocher, run once per axis with the squared physical
//! spacing of that axis as the parabola weight. It yields exact squared
//! distances (up to floating point rounding) to the nearest feature voxel.

use crate::volume::{Grid, Mask, Shape, Spacing};

/// Inclusive voxel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundingBox {
    pub lo: [usize; 3],
    pub hi: [usize; 3],
}

impl BoundingBox {
    pub fn extent(&self) -> Shape {
        [
            self.hi[0] - self.lo[0] + 1,
            self.hi[1] - self.lo[1] + 1,
            self.hi[2] - self.lo[2] + 1,
        ]
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            lo: std::array::from_fn(|k| self.lo[k].min(other.lo[k])),
            hi: std::array::from_fn(|k| self.hi[k].max(other.hi[k])),
        }
    }

    fn include(&mut self, p: [usize; 3]) {
        for k in 0..3 {
            self.lo[k] = self.lo[k].min(p[k]);
            self.hi[k] = self.hi[k].max(p[k]);
        }
    }
}

/// Bounding box of the set voxels, `None` for an empty mask.
pub fn bounding_box(mask: &Mask) -> Option<BoundingBox> {
    let [nx, ny, nz] = mask.shape();
    let data = mask.as_slice();
    let mut bbox: Option<BoundingBox> = None;
    for z in 0..nz {
        for y in 0..ny {
            let row = &data[nx * (y + ny * z)..nx * (y + ny * z + 1)];
            let Some(first) = row.iter().position(|&v| v) else {
                continue;
            };
            let last = row.iter().rposition(|&v| v).unwrap_or(first);
            match bbox.as_mut() {
                Some(b) => {
                    b.include([first, y, z]);
                    b.include([last, y, z]);
                }
                None => {
                    bbox = Some(BoundingBox {
                        lo: [first, y, z],
                        hi: [last, y, z],
                    })
                }
            }
        }
    }
    bbox
}

/// Surface voxels of a mask as `[x, y, z]` coordinates in ascending linear order.
///
/// A set voxel is on the surface when at least one of its six face neighbors is
/// unset or lies outside the array.
pub fn surface_voxels(mask: &Mask) -> Vec<[usize; 3]> {
    let Some(bbox) = bounding_box(mask) else {
        return Vec::new();
    };
    let [nx, ny, nz] = mask.shape();
    let data = mask.as_slice();
    let (sy, sz) = (nx, nx * ny);
    let mut out = Vec::new();
    for z in bbox.lo[2]..=bbox.hi[2] {
        for y in bbox.lo[1]..=bbox.hi[1] {
            for x in bbox.lo[0]..=bbox.hi[0] {
                let i = x + sy * y + sz * z;
                if !data[i] {
                    continue;
                }
                let interior = x > 0
                    && x + 1 < nx
                    && y > 0
                    && y + 1 < ny
                    && z > 0
                    && z + 1 < nz
                    && data[i - 1]
                    && data[i + 1]
                    && data[i - sy]
                    && data[i + sy]
                    && data[i - sz]
                    && data[i + sz];
                if !interior {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// Lower envelope of parabolas `w2 (q - p)^2 + f(p)` over the finite sites of `f`.
struct Envelope {
    sites: Vec<usize>,
    bounds: Vec<f64>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Self {
            sites: vec![0; n],
            bounds: vec![0.0; n + 1],
        }
    }

    fn transform(&mut self, f: &[f64], w2: f64, out: &mut [f64]) {
        let n = f.len();
        let Some(first) = f.iter().position(|v| v.is_finite()) else {
            out.fill(f64::INFINITY);
            return;
        };
        let v = &mut self.sites;
        let z = &mut self.bounds;
        let mut k = 0usize;
        v[0] = first;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in first + 1..n {
            if !f[q].is_finite() {
                continue;
            }
            let fq = f[q] + w2 * (q * q) as f64;
            // z[0] is -inf, so the scan always stops at k >= 0
            let mut s;
            loop {
                let p = v[k];
                s = (fq - (f[p] + w2 * (p * p) as f64)) / (2.0 * w2 * (q - p) as f64);
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k = 0usize;
        for (q, o) in out.iter_mut().enumerate() {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let p = v[k];
            let d = q.abs_diff(p) as f64;
            *o = w2 * d * d + f[p];
        }
    }
}

/// In-place squared distance transform of a dense grid where finite entries are
/// the seed costs (0 at features) and `INFINITY` marks non-features.
fn transform_in_place(values: &mut [f64], shape: Shape, spacing: [f64; 3]) {
    let [nx, ny, nz] = shape;
    let strides = [1, nx, nx * ny];
    let lens = [nx, ny, nz];
    for axis in 0..3 {
        let n = lens[axis];
        if n == 1 {
            continue;
        }
        let w2 = spacing[axis] * spacing[axis];
        let stride = strides[axis];
        let mut env = Envelope::new(n);
        let mut line = vec![0.0; n];
        let mut out = vec![0.0; n];
        let (a, b) = match axis {
            0 => (1, 2),
            1 => (0, 2),
            _ => (0, 1),
        };
        for j in 0..lens[b] {
            for i in 0..lens[a] {
                let base = i * strides[a] + j * strides[b];
                for (t, l) in line.iter_mut().enumerate() {
                    *l = values[base + t * stride];
                }
                env.transform(&line, w2, &mut out);
                for (t, &o) in out.iter().enumerate() {
                    values[base + t * stride] = o;
                }
            }
        }
    }
}

/// Squared Euclidean distance (mm²) from every voxel to the nearest set voxel of
/// `features`. All entries are infinite when `features` is empty.
pub fn squared_distance_transform(features: &Mask, spacing: Spacing) -> Grid<f64> {
    let mut values: Vec<f64> = features
        .as_slice()
        .iter()
        .map(|&f| if f { 0.0 } else { f64::INFINITY })
        .collect();
    transform_in_place(&mut values, features.shape(), spacing.as_array());
    Grid::from_vec(features.shape(), values).expect("shape preserved")
}

fn bbox_of_points(points: &[[usize; 3]]) -> Option<BoundingBox> {
    let (&first, rest) = points.split_first()?;
    let mut b = BoundingBox {
        lo: first,
        hi: first,
    };
    for &p in rest {
        b.include(p);
    }
    Some(b)
}

/// Distances from each query point to the nearest feature point, in mm.
///
/// The transform runs only over the bounding box of both point sets; distances
/// to a finite feature set do not depend on the grid beyond that box.
pub fn nearest_distances(
    queries: &[[usize; 3]],
    features: &[[usize; 3]],
    spacing: Spacing,
) -> Vec<f64> {
    let (Some(qb), Some(fb)) = (bbox_of_points(queries), bbox_of_points(features)) else {
        return vec![f64::INFINITY; queries.len()];
    };
    let bbox = qb.union(&fb);
    let ext = bbox.extent();
    let local = |p: [usize; 3]| {
        (p[0] - bbox.lo[0]) + ext[0] * ((p[1] - bbox.lo[1]) + ext[1] * (p[2] - bbox.lo[2]))
    };
    let mut values = vec![f64::INFINITY; ext[0] * ext[1] * ext[2]];
    for &p in features {
        values[local(p)] = 0.0;
    }
    transform_in_place(&mut values, ext, spacing.as_array());
    queries.iter().map(|&p| values[local(p)].sqrt()).collect()
}
