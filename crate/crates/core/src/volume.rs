//! Dense 3D grids, label volumes and the WT/TC/ET region algebra.
//!
//! All grids are stored with `x` varying fastest, i.e. voxel `(x, y, z)` lives at
//! `x + nx * (y + ny * z)`. This is the NIfTI on-disk order, so decoded payloads
//! can be used without transposition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid extents `(nx, ny, nz)`.
pub type Shape = [usize; 3];

/// Physical voxel extents in millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spacing {
    dx: f64,
    dy: f64,
    dz: f64,
}

impl Spacing {
    pub fn new(dx: f64, dy: f64, dz: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(dx) && ok(dy) && ok(dz) {
            Ok(Self { dx, dy, dz })
        } else {
            Err(Error::InvalidSpacing(dx, dy, dz))
        }
    }

    pub fn isotropic(d: f64) -> Result<Self> {
        Self::new(d, d, d)
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn dy(&self) -> f64 {
        self.dy
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.dx, self.dy, self.dz]
    }

    /// Volume of one voxel in mm³.
    pub fn voxel_volume(&self) -> f64 {
        self.dx * self.dy * self.dz
    }
}

impl Default for Spacing {
    fn default() -> Self {
        Self {
            dx: 1.0,
            dy: 1.0,
            dz: 1.0,
        }
    }
}

/// A dense 3D array.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    shape: Shape,
    data: Vec<T>,
}

fn voxel_count(shape: Shape) -> Result<usize> {
    if shape.contains(&0) {
        return Err(Error::InvalidShape(shape));
    }
    shape
        .iter()
        .try_fold(1usize, |acc, &n| acc.checked_mul(n))
        .ok_or(Error::InvalidShape(shape))
}

impl<T> Grid<T> {
    pub fn from_vec(shape: Shape, data: Vec<T>) -> Result<Self> {
        let n = voxel_count(shape)?;
        if data.len() != n {
            return Err(Error::DataLength {
                shape,
                actual: data.len(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    /// Number of voxels.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.shape[0] * (y + self.shape[1] * z)
    }

    #[inline]
    pub fn coords(&self, i: usize) -> [usize; 3] {
        let [nx, ny, _] = self.shape;
        [i % nx, (i / nx) % ny, i / (nx * ny)]
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> &T {
        &self.data[self.index(x, y, z)]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, value: T) {
        let i = self.index(x, y, z);
        self.data[i] = value;
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            shape: self.shape,
            data: self.data.iter().map(f).collect(),
        }
    }

    pub(crate) fn same_shape<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.shape == other.shape {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                left: self.shape,
                right: other.shape,
            })
        }
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(shape: Shape, value: T) -> Result<Self> {
        let n = voxel_count(shape)?;
        Ok(Self {
            shape,
            data: vec![value; n],
        })
    }
}

/// Binary mask, one byte per voxel.
pub type Mask = Grid<bool>;

/// Real-valued voxel map (probabilities, decoded intensities).
pub type ProbMap = Grid<f64>;

impl Grid<bool> {
    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn any(&self) -> bool {
        self.data.iter().any(|&v| v)
    }

    /// Voxelwise `self ⊆ other`; returns the first violating voxel index.
    fn first_outside(&self, other: &Mask) -> Option<usize> {
        self.data
            .iter()
            .zip(&other.data)
            .position(|(&a, &b)| a && !b)
    }
}

/// Numeric codes of the four tumor classes in a label map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelCoding {
    pub background: u8,
    pub necrosis: u8,
    pub edema: u8,
    pub enhancing: u8,
}

impl LabelCoding {
    pub fn new(background: u8, necrosis: u8, edema: u8, enhancing: u8) -> Result<Self> {
        let coding = Self {
            background,
            necrosis,
            edema,
            enhancing,
        };
        coding.validate()?;
        Ok(coding)
    }

    pub fn validate(&self) -> Result<()> {
        let codes = self.codes();
        for i in 0..4 {
            for j in i + 1..4 {
                if codes[i] == codes[j] {
                    return Err(Error::InvalidCoding(codes));
                }
            }
        }
        Ok(())
    }

    /// `[background, necrosis, edema, enhancing]`.
    pub fn codes(&self) -> [u8; 4] {
        [self.background, self.necrosis, self.edema, self.enhancing]
    }

    pub fn contains(&self, code: u8) -> bool {
        self.codes().contains(&code)
    }
}

impl Default for LabelCoding {
    fn default() -> Self {
        Self {
            background: 0,
            necrosis: 1,
            edema: 2,
            enhancing: 4,
        }
    }
}

/// A validated label map: every voxel holds one of the four coded classes.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelVolume {
    labels: Grid<u8>,
    spacing: Spacing,
    coding: LabelCoding,
}

impl LabelVolume {
    pub fn new(labels: Grid<u8>, spacing: Spacing, coding: LabelCoding) -> Result<Self> {
        coding.validate()?;
        if let Some(i) = labels.data.iter().position(|&c| !coding.contains(c)) {
            return Err(Error::UnknownLabel {
                code: labels.data[i] as i64,
                index: labels.coords(i),
            });
        }
        Ok(Self {
            labels,
            spacing,
            coding,
        })
    }

    /// All-background volume.
    pub fn background(shape: Shape, spacing: Spacing, coding: LabelCoding) -> Result<Self> {
        Ok(Self {
            labels: Grid::filled(shape, coding.background)?,
            spacing,
            coding,
        })
    }

    pub fn labels(&self) -> &Grid<u8> {
        &self.labels
    }

    pub fn shape(&self) -> Shape {
        self.labels.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    pub fn coding(&self) -> LabelCoding {
        self.coding
    }

    pub fn into_labels(self) -> Grid<u8> {
        self.labels
    }

    /// Mask of a single region, derived from the class codes.
    pub fn region_mask(&self, region: Region) -> Mask {
        let c = self.coding;
        match region {
            Region::Wt => self.labels.map(|&v| v != c.background),
            Region::Tc => self.labels.map(|&v| v == c.necrosis || v == c.enhancing),
            Region::Et => self.labels.map(|&v| v == c.enhancing),
        }
    }

    pub fn regions(&self) -> RegionMaskSet {
        RegionMaskSet {
            wt: self.region_mask(Region::Wt),
            tc: self.region_mask(Region::Tc),
            et: self.region_mask(Region::Et),
            spacing: self.spacing,
        }
    }
}

/// The three evaluated tumor regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Region {
    /// Whole tumor: necrosis, edema and enhancing tumor.
    #[serde(rename = "WT")]
    Wt,
    /// Tumor core: necrosis and enhancing tumor.
    #[serde(rename = "TC")]
    Tc,
    /// Enhancing tumor.
    #[serde(rename = "ET")]
    Et,
}

impl Region {
    pub const ALL: [Region; 3] = [Region::Wt, Region::Tc, Region::Et];

    pub fn name(self) -> &'static str {
        match self {
            Region::Wt => "WT",
            Region::Tc => "TC",
            Region::Et => "ET",
        }
    }

    pub fn parse(s: &str) -> Option<Region> {
        match s {
            "WT" => Some(Region::Wt),
            "TC" => Some(Region::Tc),
            "ET" => Some(Region::Et),
            _ => None,
        }
    }
}

impl std::fmt::Display for Region {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Nested region masks, `et ⊆ tc ⊆ wt`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMaskSet {
    wt: Mask,
    tc: Mask,
    et: Mask,
    spacing: Spacing,
}

impl RegionMaskSet {
    pub fn new(wt: Mask, tc: Mask, et: Mask, spacing: Spacing) -> Result<Self> {
        wt.same_shape(&tc)?;
        wt.same_shape(&et)?;
        let outside = et.first_outside(&tc).or_else(|| tc.first_outside(&wt));
        if let Some(i) = outside {
            return Err(Error::NestingViolation(wt.coords(i)));
        }
        Ok(Self {
            wt,
            tc,
            et,
            spacing,
        })
    }

    pub fn get(&self, region: Region) -> &Mask {
        match region {
            Region::Wt => &self.wt,
            Region::Tc => &self.tc,
            Region::Et => &self.et,
        }
    }

    pub fn shape(&self) -> Shape {
        self.wt.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }

    /// The masks as `{0, 1}` probabilities.
    pub fn to_probs(&self) -> RegionProbSet {
        let f = |m: &Mask| m.map(|&v| if v { 1.0 } else { 0.0 });
        RegionProbSet {
            wt: f(&self.wt),
            tc: f(&self.tc),
            et: f(&self.et),
            spacing: self.spacing,
        }
    }
}

/// Per-voxel sigmoid outputs for the three regions.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionProbSet {
    wt: ProbMap,
    tc: ProbMap,
    et: ProbMap,
    spacing: Spacing,
}

impl RegionProbSet {
    pub fn new(wt: ProbMap, tc: ProbMap, et: ProbMap, spacing: Spacing) -> Result<Self> {
        wt.same_shape(&tc)?;
        wt.same_shape(&et)?;
        for map in [&wt, &tc, &et] {
            if let Some(i) = map.data.iter().position(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::ProbabilityOutOfRange {
                    value: map.data[i],
                    index: map.coords(i),
                });
            }
        }
        Ok(Self {
            wt,
            tc,
            et,
            spacing,
        })
    }

    pub(crate) fn from_parts_unchecked(
        wt: ProbMap,
        tc: ProbMap,
        et: ProbMap,
        spacing: Spacing,
    ) -> Self {
        Self {
            wt,
            tc,
            et,
            spacing,
        }
    }

    pub fn get(&self, region: Region) -> &ProbMap {
        match region {
            Region::Wt => &self.wt,
            Region::Tc => &self.tc,
            Region::Et => &self.et,
        }
    }

    pub fn shape(&self) -> Shape {
        self.wt.shape
    }

    pub fn spacing(&self) -> Spacing {
        self.spacing
    }
}

/// Region masks of a label volume. Nesting holds by construction.
pub fn labels_to_regions(volume: &LabelVolume) -> RegionMaskSet {
    volume.regions()
}

fn check_threshold(threshold: f64) -> Result<()> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold))
    }
}

/// Hierarchical reconstruction of a label map from region probabilities.
///
/// A voxel is background below the WT gate, edema below the TC gate, necrosis
/// below the ET gate and enhancing tumor otherwise, so an ET probability is only
/// consulted once both enclosing regions are accepted.
pub fn regions_to_labels(
    probs: &RegionProbSet,
    threshold: f64,
    coding: LabelCoding,
) -> Result<LabelVolume> {
    check_threshold(threshold)?;
    coding.validate()?;
    let data = probs
        .wt
        .data
        .iter()
        .zip(&probs.tc.data)
        .zip(&probs.et.data)
        .map(|((&wt, &tc), &et)| {
            if wt < threshold {
                coding.background
            } else if tc < threshold {
                coding.edema
            } else if et < threshold {
                coding.necrosis
            } else {
                coding.enhancing
            }
        })
        .collect();
    Ok(LabelVolume {
        labels: Grid {
            shape: probs.shape(),
            data,
        },
        spacing: probs.spacing,
        coding,
    })
}

/// Thresholded region masks, identical to `labels_to_regions(regions_to_labels(p))`.
pub fn binarize_regions(probs: &RegionProbSet, threshold: f64) -> Result<RegionMaskSet> {
    check_threshold(threshold)?;
    let wt = probs.wt.map(|&p| p >= threshold);
    let tc = Grid {
        shape: wt.shape,
        data: wt
            .data
            .iter()
            .zip(&probs.tc.data)
            .map(|(&w, &p)| w && p >= threshold)
            .collect(),
    };
    let et = Grid {
        shape: wt.shape,
        data: tc
            .data
            .iter()
            .zip(&probs.et.data)
            .map(|(&t, &p)| t && p >= threshold)
            .collect(),
    };
    Ok(RegionMaskSet {
        wt,
        tc,
        et,
        spacing: probs.spacing,
    })
}

/// Physical volume of a mask in mm³.
pub fn region_volume_mm3(mask: &Mask, spacing: Spacing) -> f64 {
    mask.count() as f64 * spacing.voxel_volume()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn single(code: u8) -> LabelVolume {
        let c = LabelCoding::default();
        let mut g = Grid::filled([3, 3, 3], c.background).unwrap();
        g.set(1, 1, 1, code);
        LabelVolume::new(g, Spacing::default(), c).unwrap()
    }

    fn probs1(wt: f64, tc: f64, et: f64) -> RegionProbSet {
        let g = |v| Grid::filled([1, 1, 1], v).unwrap();
        RegionProbSet::new(g(wt), g(tc), g(et), Spacing::default()).unwrap()
    }

    #[test]
    fn enhancing_voxel_in_all_regions() {
        let r = single(4).regions();
        for region in Region::ALL {
            assert!(*r.get(region).get(1, 1, 1), "{region}");
            assert_eq!(r.get(region).count(), 1);
        }
    }

    #[test]
    fn edema_voxel_only_in_whole_tumor() {
        let r = single(2).regions();
        assert!(*r.wt.get(1, 1, 1));
        assert!(!r.tc.any());
        assert!(!r.et.any());
    }

    #[test]
    fn necrosis_voxel_in_core() {
        let r = single(1).regions();
        assert!(r.wt.any() && r.tc.any() && !r.et.any());
    }

    #[test]
    fn background_volume_has_empty_regions() {
        let v =
            LabelVolume::background([4, 5, 6], Spacing::default(), LabelCoding::default()).unwrap();
        let r = labels_to_regions(&v);
        assert!(!r.wt.any() && !r.tc.any() && !r.et.any());
    }

    #[test]
    fn unknown_code_names_code_and_voxel() {
        let mut g = Grid::filled([2, 2, 2], 0u8).unwrap();
        g.set(1, 0, 1, 3);
        let err = LabelVolume::new(g, Spacing::default(), LabelCoding::default()).unwrap_err();
        match err {
            Error::UnknownLabel { code, index } => {
                assert_eq!(code, 3);
                assert_eq!(index, [1, 0, 1]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn coding_must_be_distinct() {
        assert!(LabelCoding::new(0, 1, 1, 4).is_err());
        assert!(LabelCoding::new(0, 3, 2, 1).is_ok());
    }

    #[test]
    fn spacing_rejects_nonpositive() {
        assert!(Spacing::new(1.0, 0.0, 1.0).is_err());
        assert!(Spacing::new(1.0, f64::NAN, 1.0).is_err());
        assert!(Spacing::new(-1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn hierarchical_decision_rule() {
        let c = LabelCoding::default();
        let label = |p: RegionProbSet| regions_to_labels(&p, 0.5, c).unwrap().labels.data[0];
        assert_eq!(label(probs1(0.9, 0.9, 0.9)), c.enhancing);
        assert_eq!(label(probs1(0.9, 0.2, 0.9)), c.edema);
        assert_eq!(label(probs1(0.4, 0.9, 0.9)), c.background);
        assert_eq!(label(probs1(0.9, 0.6, 0.4)), c.necrosis);
    }

    #[test]
    fn threshold_must_be_open_unit_interval() {
        let p = probs1(0.5, 0.5, 0.5);
        assert!(regions_to_labels(&p, 0.0, LabelCoding::default()).is_err());
        assert!(binarize_regions(&p, 1.0).is_err());
    }

    #[test]
    fn binarize_extremes() {
        let g = |v| Grid::filled([2, 3, 2], v).unwrap();
        let ones = RegionProbSet::new(g(1.0), g(1.0), g(1.0), Spacing::default()).unwrap();
        let m = binarize_regions(&ones, 0.5).unwrap();
        assert!(Region::ALL.iter().all(|&r| m.get(r).count() == 12));
        let zeros = RegionProbSet::new(g(0.0), g(0.0), g(0.0), Spacing::default()).unwrap();
        let m = binarize_regions(&zeros, 0.5).unwrap();
        assert!(Region::ALL.iter().all(|&r| !m.get(r).any()));
    }

    #[test]
    fn binarize_gates_on_core() {
        let m = binarize_regions(&probs1(0.9, 0.2, 0.9), 0.5).unwrap();
        assert!(m.wt.data[0] && !m.tc.data[0] && !m.et.data[0]);
    }

    #[test]
    fn probability_range_is_checked() {
        let g = |v| Grid::filled([1, 1, 1], v).unwrap();
        assert!(RegionProbSet::new(g(1.5), g(0.0), g(0.0), Spacing::default()).is_err());
        assert!(RegionProbSet::new(g(f64::NAN), g(0.0), g(0.0), Spacing::default()).is_err());
        let short = Grid::filled([1, 1, 2], 0.0).unwrap();
        assert!(matches!(
            RegionProbSet::new(g(0.0), short, g(0.0), Spacing::default()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn nesting_is_enforced() {
        let f = |v| Grid::filled([1, 1, 1], v).unwrap();
        let err = RegionMaskSet::new(f(true), f(false), f(true), Spacing::default());
        assert!(matches!(err, Err(Error::NestingViolation([0, 0, 0]))));
    }

    #[test]
    fn volume_in_cubic_millimeters() {
        let mut m = Grid::filled([5, 5, 5], false).unwrap();
        assert_eq!(region_volume_mm3(&m, Spacing::default()), 0.0);
        for x in 0..5 {
            m.set(x, 0, 0, true);
            m.set(x, 1, 0, true);
        }
        assert_eq!(region_volume_mm3(&m, Spacing::default()), 10.0);
        assert_eq!(
            region_volume_mm3(&m, Spacing::new(1.0, 1.0, 2.0).unwrap()),
            20.0
        );
    }

    fn label_volume() -> impl Strategy<Value = LabelVolume> {
        (1usize..6, 1usize..6, 1usize..6).prop_flat_map(|(nx, ny, nz)| {
            proptest::collection::vec(
                prop_oneof![Just(0u8), Just(1), Just(2), Just(4)],
                nx * ny * nz,
            )
            .prop_map(move |d| {
                LabelVolume::new(
                    Grid::from_vec([nx, ny, nz], d).unwrap(),
                    Spacing::default(),
                    LabelCoding::default(),
                )
                .unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn regions_are_nested(v in label_volume()) {
            let r = v.regions();
            prop_assert!(r.et.first_outside(&r.tc).is_none());
            prop_assert!(r.tc.first_outside(&r.wt).is_none());
        }

        #[test]
        fn nested_masks_roundtrip_through_labels(v in label_volume()) {
            let masks = v.regions();
            let back = regions_to_labels(&masks.to_probs(), 0.5, LabelCoding::default()).unwrap();
            prop_assert_eq!(&back, &v);
            prop_assert_eq!(back.regions(), masks.clone());
            prop_assert_eq!(binarize_regions(&masks.to_probs(), 0.5).unwrap(), masks);
        }

        #[test]
        fn reconstruction_uses_configured_codes(
            p in proptest::collection::vec((0.0..=1.0f64, 0.0..=1.0f64, 0.0..=1.0f64), 1..40),
            t in 0.05..0.95f64,
        ) {
            let n = p.len();
            let g = |f: fn(&(f64, f64, f64)) -> f64| Grid::from_vec([n, 1, 1], p.iter().map(f).collect()).unwrap();
            let probs = RegionProbSet::new(g(|v| v.0), g(|v| v.1), g(|v| v.2), Spacing::default()).unwrap();
            let coding = LabelCoding::new(7, 3, 5, 9).unwrap();
            let labels = regions_to_labels(&probs, t, coding).unwrap();
            prop_assert!(labels.labels.data.iter().all(|&c| coding.contains(c)));
            prop_assert_eq!(labels.regions(), binarize_regions(&probs, t).unwrap());
        }

        #[test]
        fn volume_is_additive_and_linear(
            bits in proptest::collection::vec(0u8..3, 1..64),
            dx in 0.1..4.0f64, dy in 0.1..4.0f64, dz in 0.1..4.0f64, k in 0.1..5.0f64,
        ) {
            let n = bits.len();
            let a = Grid::from_vec([n, 1, 1], bits.iter().map(|&b| b == 1).collect()).unwrap();
            let b = Grid::from_vec([n, 1, 1], bits.iter().map(|&b| b == 2).collect()).unwrap();
            let ab = Grid::from_vec([n, 1, 1], bits.iter().map(|&b| b != 0).collect()).unwrap();
            let s = Spacing::new(dx, dy, dz).unwrap();
            let sum = region_volume_mm3(&a, s) + region_volume_mm3(&b, s);
            prop_assert!((region_volume_mm3(&ab, s) - sum).abs() <= 1e-9 * sum.max(1.0));
            let scaled = Spacing::new(k * dx, dy, dz).unwrap();
            let lin = k * region_volume_mm3(&ab, s);
            prop_assert!((region_volume_mm3(&ab, scaled) - lin).abs() <= 1e-9 * lin.max(1.0));
        }
    }
}
