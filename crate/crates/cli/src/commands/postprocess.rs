use std::path::PathBuf;

use brats_core::nifti::write_label_volume;
use brats_core::postprocess::{
    apply_et_threshold, default_candidates, optimize_threshold, sweep_thresholds_with,
    SelectionCriterion, ThresholdChoice,
};
use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{case_output, load_labels, with_jobs};
use crate::config::Config;
use crate::error::{Category, CliError, CliResult, Context};
use crate::manifest::{parse_manifest, parse_prediction_manifest};
use crate::output::{csv_bytes, ensure_dir, fmt_f64, json_bytes, Staged};

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Candidate thresholds in mm^3; defaults to every observed ET volume and that volume + 0.5.
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Criterion {
    Dice,
    Rank,
}

#[derive(Debug, Args)]
pub struct ApplyArgs {
    /// CSV with case_id and prediction_path.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// ET volume threshold in mm^3.
    #[arg(long, conflicts_with = "choice")]
    pub threshold: Option<f64>,
    /// choice.json written by optimize-postprocess.
    #[arg(long)]
    pub choice: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "rank", requires = "choice")]
    pub criterion: Criterion,
}

#[derive(Debug, Serialize, Deserialize)]
struct ChoiceFile {
    case_count: usize,
    best_by_dice: f64,
    best_by_rank: f64,
}

pub fn run_optimize(args: &OptimizeArgs, config: &Config, jobs: Option<usize>) -> CliResult<()> {
    let manifest = parse_manifest(&args.manifest)?;
    let (cases, sweep) = with_jobs(jobs, || -> CliResult<_> {
        let loaded: Vec<CliResult<_>> = manifest
            .cases
            .par_iter()
            .map(|c| {
                let r = load_labels(c.reference.as_deref().unwrap(), config.coding)?;
                let p = load_labels(&c.prediction, config.coding)?;
                Ok((r, p))
            })
            .collect();
        let cases = manifest
            .cases
            .iter()
            .zip(loaded)
            .map(|(c, r)| r.context(format_args!("case {:?}", c.case_id)))
            .collect::<CliResult<Vec<_>>>()?;
        let candidates = match args
            .candidates
            .clone()
            .or_else(|| config.threshold_candidates.clone())
        {
            Some(mut c) => {
                c.sort_by(f64::total_cmp);
                c.dedup();
                c
            }
            None => default_candidates(cases.iter().map(|c| &c.1)),
        };
        let sweep = sweep_thresholds_with(&cases, &candidates, &config.policy)?;
        Ok((cases.len(), sweep))
    })??;
    let choice = optimize_threshold(&sweep)?;

    let rows = sweep.rows.iter().map(|r| {
        vec![
            fmt_f64(r.threshold_mm3),
            fmt_f64(r.mean_et_dice),
            fmt_f64(r.mean_et_hd95),
            r.perfect_count.to_string(),
            r.worst_count.to_string(),
            r.empty_et_count.to_string(),
            fmt_f64(r.ranking_score),
        ]
    });
    let header = [
        "threshold_mm3",
        "mean_et_dice",
        "mean_et_hd95",
        "perfect_count",
        "worst_count",
        "empty_et_count",
        "ranking_score",
    ];
    let choice_file = ChoiceFile {
        case_count: cases,
        best_by_dice: choice.best_by_dice,
        best_by_rank: choice.best_by_rank,
    };
    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    staged.add(args.out_dir.join("sweep.csv"), &csv_bytes(&header, rows))?;
    staged.add(args.out_dir.join("choice.json"), &json_bytes(&choice_file))?;
    staged.commit()?;
    eprintln!(
        "best threshold: {} mm^3 by mean ET Dice, {} mm^3 by ranking",
        choice.best_by_dice, choice.best_by_rank
    );
    Ok(())
}

fn resolve_threshold(args: &ApplyArgs, config: &Config) -> CliResult<f64> {
    if let Some(t) = args.threshold {
        return Ok(t);
    }
    if let Some(path) = &args.choice {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: ChoiceFile = serde_json::from_str(&text)
            .map_err(|e| CliError::new(Category::Format, format!("{}: {e}", path.display())))?;
        let choice = ThresholdChoice {
            best_by_dice: file.best_by_dice,
            best_by_rank: file.best_by_rank,
        };
        return Ok(choice.select(match args.criterion {
            Criterion::Dice => SelectionCriterion::Dice,
            Criterion::Rank => SelectionCriterion::Rank,
        }));
    }
    config.et_threshold_mm3.ok_or_else(|| {
        CliError::new(
            Category::Config,
            "no threshold: pass --threshold or --choice, or set et_threshold_mm3 in the config",
        )
    })
}

pub fn run_apply(args: &ApplyArgs, config: &Config, jobs: Option<usize>) -> CliResult<()> {
    let threshold = resolve_threshold(args, config)?;
    let manifest = parse_prediction_manifest(&args.manifest)?;
    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    let mut targets = Vec::with_capacity(manifest.cases.len());
    for c in &manifest.cases {
        targets.push(staged.reserve(case_output(&args.out_dir, &c.case_id)?)?);
    }
    let outcomes: Vec<CliResult<()>> = with_jobs(jobs, || {
        manifest
            .cases
            .par_iter()
            .zip(&targets)
            .map(|(c, target)| {
                let prediction = load_labels(&c.prediction, config.coding)?;
                let processed = apply_et_threshold(&prediction, threshold)?;
                write_label_volume(target, &processed)?;
                Ok(())
            })
            .collect()
    })?;
    for (c, outcome) in manifest.cases.iter().zip(outcomes) {
        outcome.context(format_args!("case {:?}", c.case_id))?;
    }
    staged.commit()?;
    eprintln!(
        "postprocessed {} cases at {threshold} mm^3",
        manifest.cases.len()
    );
    Ok(())
}
