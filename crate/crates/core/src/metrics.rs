//! Per-case segmentation metrics.
//!
//! Dice and HD95 are computed per region. Regions whose reference or prediction
//! is empty are scored by [`SpecialCasePolicy`] instead, mirroring the challenge
//! platform: an empty prediction on an empty reference is perfect, anything
//! else involving an empty mask gets the worst values.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregate::percentile_of_sorted;
use crate::distance::{nearest_distances, surface_voxels};
use crate::error::{Error, Result};
use crate::volume::{LabelVolume, Mask, Region, RegionMaskSet, RegionProbSet, Spacing};

/// Smoothing constant of the soft Dice.
pub const SOFT_DICE_SMOOTH: f64 = 1e-5;

/// Values assigned when the reference or the prediction of a region is empty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpecialCasePolicy {
    pub worst_dice: f64,
    pub worst_hd95: f64,
    pub perfect_dice: f64,
    pub perfect_hd95: f64,
}

impl Default for SpecialCasePolicy {
    fn default() -> Self {
        Self {
            worst_dice: 0.0,
            worst_hd95: 373.13,
            perfect_dice: 1.0,
            perfect_hd95: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCase {
    None,
    BothEmpty,
    RefEmptyPredNonempty,
    RefNonemptyPredEmpty,
}

impl SpecialCase {
    pub fn name(self) -> &'static str {
        match self {
            SpecialCase::None => "none",
            SpecialCase::BothEmpty => "both_empty",
            SpecialCase::RefEmptyPredNonempty => "ref_empty_pred_nonempty",
            SpecialCase::RefNonemptyPredEmpty => "ref_nonempty_pred_empty",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            SpecialCase::None,
            SpecialCase::BothEmpty,
            SpecialCase::RefEmptyPredNonempty,
            SpecialCase::RefNonemptyPredEmpty,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

/// Dice and HD95 of one region of one case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub region: Region,
    pub dice: f64,
    pub hd95: f64,
    pub special_case: SpecialCase,
}

/// Dice overlap `2|a ∩ b| / (|a| + |b|)`.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    a.same_shape(b)?;
    let (mut na, mut nb, mut both) = (0u64, 0u64, 0u64);
    for (&x, &y) in a.as_slice().iter().zip(b.as_slice()) {
        na += x as u64;
        nb += y as u64;
        both += (x && y) as u64;
    }
    if na + nb == 0 {
        return Err(Error::Domain(
            "dice is undefined for two empty masks; use evaluate_case".into(),
        ));
    }
    Ok((2 * both) as f64 / (na + nb) as f64)
}

fn nonempty_surfaces(a: &Mask, b: &Mask) -> Result<(Vec<[usize; 3]>, Vec<[usize; 3]>)> {
    a.same_shape(b)?;
    let sa = surface_voxels(a);
    let sb = surface_voxels(b);
    if sa.is_empty() || sb.is_empty() {
        return Err(Error::Domain(
            "surface distances need two nonempty masks".into(),
        ));
    }
    Ok((sa, sb))
}

/// Directed surface distances in mm: `a → b` then `b → a`.
///
/// Each entry is the distance from one surface voxel of the source mask to the
/// nearest surface voxel of the other mask, ordered by source voxel position.
pub fn surface_distances(a: &Mask, b: &Mask, spacing: Spacing) -> Result<(Vec<f64>, Vec<f64>)> {
    let (sa, sb) = nonempty_surfaces(a, b)?;
    Ok((
        nearest_distances(&sa, &sb, spacing),
        nearest_distances(&sb, &sa, spacing),
    ))
}

fn p95(mut d: Vec<f64>) -> f64 {
    d.sort_unstable_by(f64::total_cmp);
    percentile_of_sorted(&d, 95.0)
}

/// 95th percentile Hausdorff distance: the larger of the two directed 95th
/// percentiles of the surface distances.
pub fn hd95(a: &Mask, b: &Mask, spacing: Spacing) -> Result<f64> {
    let (ab, ba) = surface_distances(a, b, spacing)?;
    Ok(p95(ab).max(p95(ba)))
}

fn check_pair(reference: &LabelVolume, prediction: &LabelVolume) -> Result<()> {
    reference.labels().same_shape(prediction.labels())?;
    if reference.spacing() != prediction.spacing() {
        return Err(Error::SpacingMismatch);
    }
    if reference.coding() != prediction.coding() {
        return Err(Error::CodingMismatch);
    }
    Ok(())
}

/// Scores one region pair, applying the empty-mask policy.
pub fn evaluate_region(
    region: Region,
    reference: &Mask,
    prediction: &Mask,
    spacing: Spacing,
    policy: &SpecialCasePolicy,
) -> Result<MetricRecord> {
    reference.same_shape(prediction)?;
    let special_case = match (reference.any(), prediction.any()) {
        (false, false) => SpecialCase::BothEmpty,
        (false, true) => SpecialCase::RefEmptyPredNonempty,
        (true, false) => SpecialCase::RefNonemptyPredEmpty,
        (true, true) => SpecialCase::None,
    };
    let (dice, hd95) = match special_case {
        SpecialCase::BothEmpty => (policy.perfect_dice, policy.perfect_hd95),
        SpecialCase::RefEmptyPredNonempty | SpecialCase::RefNonemptyPredEmpty => {
            (policy.worst_dice, policy.worst_hd95)
        }
        SpecialCase::None => (
            self::dice(reference, prediction)?,
            self::hd95(reference, prediction, spacing)?,
        ),
    };
    Ok(MetricRecord {
        region,
        dice,
        hd95,
        special_case,
    })
}

/// WT, TC and ET records of one case under the default policy.
pub fn evaluate_case(
    reference: &LabelVolume,
    prediction: &LabelVolume,
) -> Result<[MetricRecord; 3]> {
    evaluate_case_with(reference, prediction, &SpecialCasePolicy::default())
}

pub fn evaluate_case_with(
    reference: &LabelVolume,
    prediction: &LabelVolume,
    policy: &SpecialCasePolicy,
) -> Result<[MetricRecord; 3]> {
    check_pair(reference, prediction)?;
    let spacing = reference.spacing();
    let mut out = [MetricRecord {
        region: Region::Wt,
        dice: 0.0,
        hd95: 0.0,
        special_case: SpecialCase::None,
    }; 3];
    for (slot, region) in out.iter_mut().zip(Region::ALL) {
        *slot = evaluate_region(
            region,
            &reference.region_mask(region),
            &prediction.region_mask(region),
            spacing,
            policy,
        )?;
    }
    Ok(out)
}

/// Evaluates many cases on the current rayon pool; output order follows input order.
pub fn evaluate_batch(
    cases: &[(&LabelVolume, &LabelVolume)],
    policy: &SpecialCasePolicy,
) -> Result<Vec<[MetricRecord; 3]>> {
    cases
        .par_iter()
        .map(|(r, p)| evaluate_case_with(r, p, policy))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiceMode {
    /// Soft Dice per sample, then averaged over samples.
    Sample,
    /// Sums pooled over the whole batch as if it were one sample.
    Batch,
}

#[derive(Default, Clone, Copy)]
struct SoftSums {
    intersection: f64,
    pred: f64,
    reference: f64,
}

impl SoftSums {
    fn of(p: &[f64], g: &Mask) -> Self {
        let mut s = SoftSums::default();
        for (&p, &g) in p.iter().zip(g.as_slice()) {
            if g {
                s.intersection += p;
                s.reference += 1.0;
            }
            s.pred += p;
        }
        s
    }

    fn add(&mut self, o: SoftSums) {
        self.intersection += o.intersection;
        self.pred += o.pred;
        self.reference += o.reference;
    }

    fn dice(&self) -> f64 {
        (2.0 * self.intersection + SOFT_DICE_SMOOTH)
            / (self.pred + self.reference + SOFT_DICE_SMOOTH)
    }
}

/// Forward value of the smoothed soft Dice over a batch, averaged over regions.
pub fn soft_dice(probs: &[RegionProbSet], refs: &[RegionMaskSet], mode: DiceMode) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    if probs.len() != refs.len() {
        return Err(Error::LengthMismatch(format!(
            "{} probability sets vs {} reference sets",
            probs.len(),
            refs.len()
        )));
    }
    for (p, g) in probs.iter().zip(refs) {
        p.get(Region::Wt).same_shape(g.get(Region::Wt))?;
    }
    let n = probs.len() as f64;
    let mut total = 0.0;
    for region in Region::ALL {
        let sums = probs
            .iter()
            .zip(refs)
            .map(|(p, g)| SoftSums::of(p.get(region).as_slice(), g.get(region)));
        total += match mode {
            DiceMode::Sample => sums.map(|s| s.dice()).sum::<f64>() / n,
            DiceMode::Batch => {
                let mut acc = SoftSums::default();
                sums.for_each(|s| acc.add(s));
                acc.dice()
            }
        };
    }
    Ok(total / 3.0)
}
