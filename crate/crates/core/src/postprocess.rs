//! Enhancing tumor removal below a volume threshold and the threshold search.
//!
//! When the predicted enhancing tumor of a case is smaller than the threshold it
//! is relabeled to necrosis, which keeps WT and TC intact and turns a likely
//! false positive into an empty ET prediction. The threshold is tuned on labeled
//! data by two criteria: mean ET Dice and the ranking score of each candidate
//! threshold treated as a competing algorithm.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate_case_with, MetricRecord, SpecialCasePolicy};
use crate::ranking::{brats_ranking, Criterion, MetricTable};
use crate::volume::{region_volume_mm3, LabelVolume, Region};

/// Offset added to each observed ET volume when building default candidates.
pub const CANDIDATE_EPSILON_MM3: f64 = 0.5;

fn check_threshold(threshold_mm3: f64) -> Result<()> {
    if threshold_mm3.is_finite() && threshold_mm3 >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(threshold_mm3))
    }
}

pub fn et_volume_mm3(volume: &LabelVolume) -> f64 {
    region_volume_mm3(&volume.region_mask(Region::Et), volume.spacing())
}

fn without_enhancing(volume: &LabelVolume) -> LabelVolume {
    let c = volume.coding();
    let labels = volume
        .labels()
        .map(|&v| if v == c.enhancing { c.necrosis } else { v });
    LabelVolume::new(labels, volume.spacing(), c).expect("relabeling keeps valid codes")
}

/// Relabels all enhancing tumor to necrosis when its volume is below the threshold.
pub fn apply_et_threshold(prediction: &LabelVolume, threshold_mm3: f64) -> Result<LabelVolume> {
    check_threshold(threshold_mm3)?;
    if et_volume_mm3(prediction) < threshold_mm3 {
        Ok(without_enhancing(prediction))
    } else {
        Ok(prediction.clone())
    }
}

/// `{0}` plus every distinct predicted ET volume `v` and `v + ε`, ascending.
pub fn default_candidates<'a>(predictions: impl IntoIterator<Item = &'a LabelVolume>) -> Vec<f64> {
    let mut out = vec![0.0];
    for p in predictions {
        let v = et_volume_mm3(p);
        out.push(v);
        out.push(v + CANDIDATE_EPSILON_MM3);
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold_mm3: f64,
    pub mean_et_dice: f64,
    pub mean_et_hd95: f64,
    /// Cases scoring the perfect (Dice, HD95) pair on ET.
    pub perfect_count: usize,
    /// Cases scoring the worst (Dice, HD95) pair on ET.
    pub worst_count: usize,
    /// Cases whose postprocessed prediction has no enhancing tumor.
    pub empty_et_count: usize,
    /// Score of this threshold in a ranking against all other candidates.
    pub ranking_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSweepResult {
    pub case_count: usize,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionCriterion {
    Dice,
    Rank,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub best_by_dice: f64,
    pub best_by_rank: f64,
}

impl ThresholdChoice {
    pub fn select(&self, criterion: SelectionCriterion) -> f64 {
        match criterion {
            SelectionCriterion::Dice => self.best_by_dice,
            SelectionCriterion::Rank => self.best_by_rank,
        }
    }
}

fn check_candidates(candidates: &[f64]) -> Result<()> {
    if candidates.is_empty() {
        return Err(Error::EmptyInput("threshold candidates"));
    }
    for &t in candidates {
        check_threshold(t)?;
    }
    if candidates.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain(
            "threshold candidates must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// ET outcome of one case with and without removal.
struct CaseOutcome {
    et_volume: f64,
    kept: MetricRecord,
    removed: MetricRecord,
    kept_empty: bool,
}

impl CaseOutcome {
    fn at(&self, threshold: f64) -> (MetricRecord, bool) {
        if self.et_volume < threshold {
            (self.removed, true)
        } else {
            (self.kept, self.kept_empty)
        }
    }
}

/// Evaluates every candidate threshold over a labeled dataset.
///
/// Removal is all-or-nothing per case, so each case is evaluated once as
/// predicted and once with ET removed; each candidate then selects per case.
pub fn sweep_thresholds(
    cases: &[(LabelVolume, LabelVolume)],
    candidates: &[f64],
) -> Result<ThresholdSweepResult> {
    sweep_thresholds_with(cases, candidates, &SpecialCasePolicy::default())
}

pub fn sweep_thresholds_with(
    cases: &[(LabelVolume, LabelVolume)],
    candidates: &[f64],
    policy: &SpecialCasePolicy,
) -> Result<ThresholdSweepResult> {
    if cases.is_empty() {
        return Err(Error::EmptyInput("cases"));
    }
    check_candidates(candidates)?;
    let outcomes: Vec<CaseOutcome> = cases
        .par_iter()
        .map(|(reference, prediction)| {
            let et = |records: [MetricRecord; 3]| records[2];
            let kept = et(evaluate_case_with(reference, prediction, policy)?);
            let removed = et(evaluate_case_with(
                reference,
                &without_enhancing(prediction),
                policy,
            )?);
            Ok(CaseOutcome {
                et_volume: et_volume_mm3(prediction),
                kept,
                removed,
                kept_empty: !prediction.region_mask(Region::Et).any(),
            })
        })
        .collect::<Result<_>>()?;

    let n = cases.len();
    let mut rows = Vec::with_capacity(candidates.len());
    let mut per_candidate = Vec::with_capacity(candidates.len());
    for &t in candidates {
        let picked: Vec<(MetricRecord, bool)> = outcomes.iter().map(|o| o.at(t)).collect();
        let records: Vec<MetricRecord> = picked.iter().map(|p| p.0).collect();
        rows.push(SweepRow {
            threshold_mm3: t,
            mean_et_dice: records.iter().map(|r| r.dice).sum::<f64>() / n as f64,
            mean_et_hd95: records.iter().map(|r| r.hd95).sum::<f64>() / n as f64,
            perfect_count: records
                .iter()
                .filter(|r| r.dice == policy.perfect_dice && r.hd95 == policy.perfect_hd95)
                .count(),
            worst_count: records
                .iter()
                .filter(|r| r.dice == policy.worst_dice && r.hd95 == policy.worst_hd95)
                .count(),
            empty_et_count: picked.iter().filter(|p| p.1).count(),
            ranking_score: 0.0,
        });
        per_candidate.push(records);
    }

    let ranking = brats_ranking(&pseudo_algorithm_table(candidates, &per_candidate)?)?;
    for (row, s) in rows.iter_mut().zip(&ranking.algorithms) {
        row.ranking_score = s.score;
    }
    Ok(ThresholdSweepResult {
        case_count: n,
        rows,
    })
}

/// One pseudo-algorithm per threshold, ranked on the ET Dice and ET HD95 columns.
pub fn pseudo_algorithm_table(
    thresholds: &[f64],
    et_records: &[Vec<MetricRecord>],
) -> Result<MetricTable> {
    let algorithms = thresholds.iter().map(|t| format!("t={t}")).collect();
    let case_count = et_records.first().map_or(0, Vec::len);
    let cases = (0..case_count).map(|c| c.to_string()).collect();
    let mut values = Vec::with_capacity(thresholds.len() * case_count * 2);
    for records in et_records {
        for r in records {
            values.extend(Criterion::ET.iter().map(|c| c.of(r)));
        }
    }
    MetricTable::new(algorithms, cases, Criterion::ET.to_vec(), values)
}

/// Best threshold per criterion; ties go to the smallest threshold.
pub fn optimize_threshold(sweep: &ThresholdSweepResult) -> Result<ThresholdChoice> {
    let first = sweep
        .rows
        .first()
        .ok_or(Error::EmptyInput("threshold sweep"))?;
    let mut by_dice = first;
    let mut by_rank = first;
    for row in &sweep.rows[1..] {
        if row.mean_et_dice > by_dice.mean_et_dice {
            by_dice = row;
        }
        if row.ranking_score < by_rank.ranking_score {
            by_rank = row;
        }
    }
    Ok(ThresholdChoice {
        best_by_dice: by_dice.threshold_mm3,
        best_by_rank: by_rank.threshold_mm3,
    })
}

/// Applies a threshold to many predictions on the current rayon pool.
pub fn apply_et_threshold_batch(
    predictions: &[LabelVolume],
    threshold_mm3: f64,
) -> Result<Vec<LabelVolume>> {
    predictions
        .par_iter()
        .map(|p| apply_et_threshold(p, threshold_mm3))
        .collect()
}
