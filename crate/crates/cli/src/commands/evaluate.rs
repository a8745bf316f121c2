use std::path::PathBuf;

use brats_core::aggregate::{summarize, SummaryStats};
use brats_core::metrics::{evaluate_case_with, soft_dice, DiceMode};
use brats_core::ranking::Criterion;
use brats_core::MetricRecord;
use clap::Args;
use rayon::prelude::*;

use super::{load_labels, load_probs, with_jobs};
use crate::config::Config;
use crate::error::{CliResult, Context};
use crate::manifest::{parse_manifest, CaseEntry};
use crate::output::{csv_bytes, ensure_dir, fmt_f64, metrics_csv, Staged};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// CSV with case_id, reference_path, prediction_path.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out_dir: PathBuf,
}

struct CaseResult {
    records: [MetricRecord; 3],
    soft_dice: Option<f64>,
}

fn evaluate_one(case: &CaseEntry, config: &Config) -> CliResult<CaseResult> {
    let reference = load_labels(case.reference.as_deref().unwrap(), config.coding)?;
    let prediction = load_labels(&case.prediction, config.coding)?;
    let records = evaluate_case_with(&reference, &prediction, &config.policy)?;
    let soft_dice = match &case.probs {
        Some(paths) => {
            let probs = load_probs(paths)?;
            let refs = reference.regions();
            Some(soft_dice(&[probs], &[refs], DiceMode::Sample)?)
        }
        None => None,
    };
    Ok(CaseResult { records, soft_dice })
}

pub const SUMMARY_ROWS: [&str; 5] = ["Mean", "StdDev", "Median", "25quantile", "75quantile"];

fn summary_csv(results: &[(String, [MetricRecord; 3])]) -> CliResult<Vec<u8>> {
    let mut header = vec!["statistic".to_owned()];
    let mut stats: Vec<SummaryStats> = Vec::new();
    for crit in Criterion::ALL {
        header.push(format!("{}_{}", crit.metric.name(), crit.region));
        let values: Vec<f64> = results
            .iter()
            .map(|(_, recs)| crit.of(recs.iter().find(|r| r.region == crit.region).unwrap()))
            .collect();
        stats.push(summarize(&values)?);
    }
    let pick = |s: &SummaryStats, row: usize| match row {
        0 => s.mean,
        1 => s.stddev,
        2 => s.median,
        3 => s.p25,
        _ => s.p75,
    };
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    Ok(csv_bytes(
        &header,
        SUMMARY_ROWS.iter().enumerate().map(|(i, label)| {
            std::iter::once(label.to_string())
                .chain(stats.iter().map(|s| fmt_f64(pick(s, i))))
                .collect()
        }),
    ))
}

pub fn run(args: &EvaluateArgs, config: &Config, jobs: Option<usize>) -> CliResult<()> {
    let manifest = parse_manifest(&args.manifest)?;
    let outcomes: Vec<CliResult<CaseResult>> = with_jobs(jobs, || {
        manifest
            .cases
            .par_iter()
            .map(|c| evaluate_one(c, config))
            .collect()
    })?;
    let mut results = Vec::with_capacity(outcomes.len());
    let mut soft = Vec::new();
    for (case, outcome) in manifest.cases.iter().zip(outcomes) {
        let r = outcome.context(format_args!("case {:?}", case.case_id))?;
        if let Some(s) = r.soft_dice {
            soft.push(vec![case.case_id.clone(), fmt_f64(s)]);
        }
        results.push((case.case_id.clone(), r.records));
    }

    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    staged.add(args.out_dir.join("metrics.csv"), &metrics_csv(&results))?;
    staged.add(args.out_dir.join("summary.csv"), &summary_csv(&results)?)?;
    if !soft.is_empty() {
        staged.add(
            args.out_dir.join("soft_dice.csv"),
            &csv_bytes(&["case_id", "soft_dice"], soft),
        )?;
    }
    staged.commit()?;
    eprintln!("evaluated {} cases", results.len());
    Ok(())
}
