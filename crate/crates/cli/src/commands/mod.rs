pub mod ensemble;
pub mod evaluate;
pub mod leaderboard;
pub mod postprocess;
pub mod rank;

use std::path::{Path, PathBuf};

use brats_core::nifti::{read_label_volume, read_prob_map};
use brats_core::{LabelCoding, LabelVolume, RegionProbSet};

use crate::error::{Category, CliError, CliResult, Context};

/// Runs `f` on a rayon pool with `jobs` workers, or rayon's default size.
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        if n == 0 {
            return Err(CliError::new(
                Category::Validation,
                "--jobs must be at least 1",
            ));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::new(Category::Io, format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

pub fn load_labels(path: &Path, coding: LabelCoding) -> CliResult<LabelVolume> {
    read_label_volume(path, coding).context(path.display())
}

pub fn load_probs(paths: &[PathBuf; 3]) -> CliResult<RegionProbSet> {
    let [wt, tc, et] = paths
        .each_ref()
        .map(|p| read_prob_map(p).context(p.display()));
    let ((wt, spacing), (tc, tc_spacing), (et, et_spacing)) = (wt?, tc?, et?);
    if tc_spacing != spacing || et_spacing != spacing {
        return Err(brats_core::Error::SpacingMismatch).context(paths[0].display());
    }
    RegionProbSet::new(wt, tc, et, spacing).context(paths[0].display())
}

/// Output file for a case; ids must not escape the output directory.
pub fn case_output(dir: &Path, case_id: &str) -> CliResult<PathBuf> {
    if case_id.contains(['/', '\\']) || case_id == "." || case_id == ".." {
        return Err(CliError::new(
            Category::Validation,
            format!("case_id {case_id:?} cannot be used as a file name"),
        ));
    }
    Ok(dir.join(format!("{case_id}.nii.gz")))
}
