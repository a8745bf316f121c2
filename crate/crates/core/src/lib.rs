//! Evaluation and ranking toolkit for brain tumor segmentation challenges.
//!
//! The crate covers the full evaluation path of a BraTS-style challenge:
//!
//! * [`volume`]: label volumes, the WT/TC/ET region algebra and probability maps.
//! * [`nifti`]: a NIfTI-1 subset reader/writer plus the RV1 raw fixture format.
//! * [`metrics`]: Dice, surface distances, HD95 and the empty-reference policy.
//! * [`ranking`]: "rank then aggregate" scoring and leave-one-out stability.
//! * [`aggregate`]: percentiles and Table-style summary statistics.
//! * [`postprocess`]: enhancing tumor removal below a volume threshold.
//! * [`ensemble`]: equal-influence averaging of sigmoid outputs.

pub mod aggregate;
pub mod distance;
pub mod ensemble;
mod error;
pub mod metrics;
pub mod nifti;
pub mod postprocess;
pub mod ranking;
pub mod volume;

pub use error::{Error, Result};
pub use metrics::{evaluate_case, MetricRecord, SpecialCase, SpecialCasePolicy};
pub use ranking::{brats_ranking, MetricTable, RankResult};
pub use volume::{
    Grid, LabelCoding, LabelVolume, Mask, ProbMap, Region, RegionMaskSet, RegionProbSet, Shape,
    Spacing,
};
