use std::collections::HashMap;
use std::path::{Path, PathBuf};

use brats_core::ensemble::{two_level_ensemble_weighted, StreamingMean};
use brats_core::nifti::write_label_volume;
use brats_core::postprocess::apply_et_threshold;
use brats_core::volume::regions_to_labels;
use clap::Args;
use rayon::prelude::*;

use super::{case_output, load_probs, with_jobs};
use crate::config::Config;
use crate::error::{Category, CliError, CliResult, Context};
use crate::manifest::{parse_ensemble_manifest, EnsembleCase};
use crate::output::{ensure_dir, Staged};

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    /// CSV with case_id, configuration, wt_prob_path, tc_prob_path, et_prob_path.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Configuration weight as `NAME=WEIGHT`; unlisted configurations weigh 1.
    #[arg(long = "weight")]
    pub weights: Vec<String>,
    /// Probability threshold for label reconstruction.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Also relabel small ET predictions, threshold in mm^3.
    #[arg(long)]
    pub et_threshold: Option<f64>,
}

fn parse_weights(inputs: &[String]) -> CliResult<HashMap<String, f64>> {
    let mut out = HashMap::new();
    for s in inputs {
        let bad = || {
            CliError::new(
                Category::Validation,
                format!("--weight {s:?}: expected NAME=WEIGHT"),
            )
        };
        let (name, w) = s.split_once('=').ok_or_else(bad)?;
        let w: f64 = w.parse().map_err(|_| bad())?;
        if out.insert(name.to_owned(), w).is_some() {
            return Err(CliError::new(
                Category::Validation,
                format!("configuration {name:?} weighted twice"),
            ));
        }
    }
    Ok(out)
}

fn ensemble_case(
    case: &EnsembleCase,
    weights: &HashMap<String, f64>,
    threshold: f64,
    et_threshold: Option<f64>,
    config: &Config,
    target: &Path,
) -> CliResult<()> {
    let mut means = Vec::with_capacity(case.configurations.len());
    let mut w = Vec::with_capacity(case.configurations.len());
    for (name, members) in &case.configurations {
        let mut acc = StreamingMean::new();
        for paths in members {
            acc.add(&load_probs(paths)?).context(paths[0].display())?;
        }
        means.push(vec![acc.finish()?]);
        w.push(weights.get(name).copied().unwrap_or(1.0));
    }
    let probs = two_level_ensemble_weighted(&means, &w)?;
    let mut labels = regions_to_labels(&probs, threshold, config.coding)?;
    if let Some(t) = et_threshold {
        labels = apply_et_threshold(&labels, t)?;
    }
    write_label_volume(target, &labels)?;
    Ok(())
}

pub fn run(args: &EnsembleArgs, config: &Config, jobs: Option<usize>) -> CliResult<()> {
    let weights = parse_weights(&args.weights)?;
    let cases = parse_ensemble_manifest(&args.manifest)?;
    if let Some(name) = weights.keys().find(|n| {
        !cases
            .iter()
            .any(|c| c.configurations.iter().any(|(k, _)| k == *n))
    }) {
        return Err(CliError::new(
            Category::Validation,
            format!("weight given for unknown configuration {name:?}"),
        ));
    }
    let threshold = args.threshold.unwrap_or(config.probability_threshold);
    let et_threshold = args.et_threshold.or(config.et_threshold_mm3);

    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    let mut targets = Vec::with_capacity(cases.len());
    for c in &cases {
        targets.push(staged.reserve(case_output(&args.out_dir, &c.case_id)?)?);
    }
    let outcomes: Vec<CliResult<()>> = with_jobs(jobs, || {
        cases
            .par_iter()
            .zip(&targets)
            .map(|(c, t)| ensemble_case(c, &weights, threshold, et_threshold, config, t))
            .collect()
    })?;
    for (c, outcome) in cases.iter().zip(outcomes) {
        outcome.context(format_args!("case {:?}", c.case_id))?;
    }
    staged.commit()?;
    eprintln!("ensembled {} cases", cases.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_parsing() {
        let w = parse_weights(&["3d=2".into(), "2d=0.5".into()]).unwrap();
        assert_eq!(w["3d"], 2.0);
        assert!(parse_weights(&["3d".into()]).is_err());
        assert!(parse_weights(&["a=1".into(), "a=2".into()]).is_err());
    }
}
