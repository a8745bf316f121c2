//! Averaging of sigmoid region probabilities across models and configurations.
//!
//! Members of one configuration are averaged first, then the configuration
//! means are averaged, so a configuration with many models has the same weight
//! as one with few.
//!
//! Per voxel the values are sorted before summation, which makes the output
//! bitwise independent of member order, and the mean is clamped to the member
//! range to absorb rounding.

use crate::error::{Error, Result};
use crate::volume::{
    regions_to_labels, Grid, LabelCoding, LabelVolume, ProbMap, Region, RegionProbSet,
};

fn check_compatible(members: &[&RegionProbSet]) -> Result<()> {
    let first = members[0];
    for m in &members[1..] {
        first.get(Region::Wt).same_shape(m.get(Region::Wt))?;
        if m.spacing() != first.spacing() {
            return Err(Error::SpacingMismatch);
        }
    }
    Ok(())
}

/// Order-independent weighted mean of `(value, weight)` pairs; sorts in place.
fn weighted_mean(pairs: &mut [(f64, f64)]) -> f64 {
    pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let mut num = 0.0;
    let mut den = 0.0;
    for &(v, w) in pairs.iter() {
        num += v * w;
        den += w;
    }
    let lo = pairs[0].0;
    let hi = pairs[pairs.len() - 1].0;
    (num / den).clamp(lo, hi)
}

fn combine(members: &[&RegionProbSet], weights: &[f64]) -> Result<RegionProbSet> {
    check_compatible(members)?;
    let shape = members[0].shape();
    let mut pairs = vec![(0.0, 0.0); members.len()];
    let mut maps: Vec<ProbMap> = Vec::with_capacity(3);
    for region in Region::ALL {
        let slices: Vec<&[f64]> = members.iter().map(|m| m.get(region).as_slice()).collect();
        let data: Vec<f64> = (0..slices[0].len())
            .map(|i| {
                for ((p, s), &w) in pairs.iter_mut().zip(&slices).zip(weights) {
                    *p = (s[i], w);
                }
                weighted_mean(&mut pairs)
            })
            .collect();
        maps.push(Grid::from_vec(shape, data)?);
    }
    let et = maps.pop().unwrap();
    let tc = maps.pop().unwrap();
    let wt = maps.pop().unwrap();
    Ok(RegionProbSet::from_parts_unchecked(
        wt,
        tc,
        et,
        members[0].spacing(),
    ))
}

/// Voxelwise arithmetic mean of the members.
pub fn average_probs(members: &[RegionProbSet]) -> Result<RegionProbSet> {
    if members.is_empty() {
        return Err(Error::EmptyInput("ensemble members"));
    }
    let refs: Vec<&RegionProbSet> = members.iter().collect();
    combine(&refs, &vec![1.0; members.len()])
}

/// Mean over configurations of each configuration's member mean.
pub fn two_level_ensemble(configurations: &[Vec<RegionProbSet>]) -> Result<RegionProbSet> {
    two_level_ensemble_weighted(configurations, &vec![1.0; configurations.len()])
}

/// As [`two_level_ensemble`] with one nonnegative weight per configuration.
pub fn two_level_ensemble_weighted(
    configurations: &[Vec<RegionProbSet>],
    weights: &[f64],
) -> Result<RegionProbSet> {
    if configurations.is_empty() {
        return Err(Error::EmptyInput("ensemble configurations"));
    }
    if weights.len() != configurations.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights for {} configurations",
            weights.len(),
            configurations.len()
        )));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Domain(
            "configuration weights must be nonnegative, finite and not all zero".into(),
        ));
    }
    if configurations.iter().any(Vec::is_empty) {
        return Err(Error::EmptyInput("configuration without members"));
    }
    let means = configurations
        .iter()
        .map(|c| average_probs(c))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&RegionProbSet> = means.iter().collect();
    combine(&refs, weights)
}

/// Two-level ensemble followed by hierarchical label reconstruction.
pub fn ensemble_predict(
    configurations: &[Vec<RegionProbSet>],
    threshold: f64,
    coding: LabelCoding,
) -> Result<LabelVolume> {
    regions_to_labels(&two_level_ensemble(configurations)?, threshold, coding)
}

/// Running voxelwise mean for members that arrive one at a time.
///
/// Keeps one accumulator per region instead of every member, at the cost of
/// depending on the order in which members are added.
#[derive(Debug, Clone)]
pub struct StreamingMean {
    sums: Option<[Vec<f64>; 3]>,
    shape: [usize; 3],
    spacing: Option<crate::volume::Spacing>,
    count: usize,
}

impl Default for StreamingMean {
    fn default() -> Self {
        Self::new()
    }
}

impl StreamingMean {
    pub fn new() -> Self {
        Self {
            sums: None,
            shape: [0; 3],
            spacing: None,
            count: 0,
        }
    }

    pub fn add(&mut self, member: &RegionProbSet) -> Result<()> {
        match (&mut self.sums, self.spacing) {
            (Some(sums), Some(spacing)) => {
                if member.shape() != self.shape {
                    return Err(Error::ShapeMismatch {
                        left: self.shape,
                        right: member.shape(),
                    });
                }
                if member.spacing() != spacing {
                    return Err(Error::SpacingMismatch);
                }
                for (sum, region) in sums.iter_mut().zip(Region::ALL) {
                    for (s, v) in sum.iter_mut().zip(member.get(region).as_slice()) {
                        *s += v;
                    }
                }
            }
            _ => {
                self.sums = Some(Region::ALL.map(|r| member.get(r).as_slice().to_vec()));
                self.shape = member.shape();
                self.spacing = Some(member.spacing());
            }
        }
        self.count += 1;
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn finish(self) -> Result<RegionProbSet> {
        let (Some(sums), Some(spacing)) = (self.sums, self.spacing) else {
            return Err(Error::EmptyInput("ensemble members"));
        };
        let n = self.count as f64;
        let [wt, tc, et] = sums.map(|s| {
            Grid::from_vec(
                self.shape,
                s.into_iter().map(|v| (v / n).clamp(0.0, 1.0)).collect(),
            )
        });
        Ok(RegionProbSet::from_parts_unchecked(wt?, tc?, et?, spacing))
    }
}
