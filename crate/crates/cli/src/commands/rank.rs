use std::collections::HashMap;
use std::path::{Path, PathBuf};

use brats_core::ranking::{jackknife_stability, MetricTable};
use brats_core::{brats_ranking, MetricRecord};
use clap::Args;

use crate::error::{Category, CliError, CliResult};
use crate::output::{csv_bytes, ensure_dir, json_bytes, read_metrics_csv, CaseRecords, Staged};

#[derive(Debug, Args)]
pub struct RankArgs {
    /// metrics.csv files as `[ID=]PATH`; the id defaults to the parent directory
    /// of a file named metrics.csv, otherwise to the file stem.
    #[arg(long, num_args = 2.., required = true)]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct StabilityArgs {
    #[arg(long, num_args = 3.., required = true)]
    pub metrics: Vec<String>,
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn default_id(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    if path.file_name().is_some_and(|n| n == "metrics.csv") {
        let parent = path
            .parent()
            .and_then(Path::file_name)
            .map(|s| s.to_string_lossy().into_owned());
        if let Some(p) = parent {
            return p;
        }
    }
    stem.unwrap_or_else(|| path.display().to_string())
}

pub fn parse_metrics_arg(arg: &str) -> (String, PathBuf) {
    match arg.split_once('=') {
        Some((id, path)) if !id.is_empty() && !Path::new(arg).exists() => {
            (id.to_owned(), PathBuf::from(path))
        }
        _ => {
            let path = PathBuf::from(arg);
            (default_id(&path), path)
        }
    }
}

/// Aligns per-algorithm records on the first algorithm's case order.
pub fn build_table(submissions: Vec<(String, CaseRecords)>) -> CliResult<MetricTable> {
    let mut ids: Vec<String> = Vec::new();
    for (id, _) in &submissions {
        if ids.contains(id) {
            return Err(CliError::new(
                Category::Validation,
                format!("duplicate algorithm id {id:?}"),
            ));
        }
        ids.push(id.clone());
    }
    let cases: Vec<String> = submissions[0].1.iter().map(|(c, _)| c.clone()).collect();
    let mut records = Vec::with_capacity(submissions.len());
    for (id, rows) in submissions {
        check_case_set(&cases, rows.iter().map(|(c, _)| c.as_str()))
            .map_err(|m| CliError::new(Category::Validation, format!("algorithm {id:?}: {m}")))?;
        let by_case: HashMap<String, [MetricRecord; 3]> = rows.into_iter().collect();
        records.push(cases.iter().map(|c| by_case[c]).collect());
    }
    Ok(MetricTable::from_records(ids, cases, &records)?)
}

/// Explains how `got` differs from `expected` as sets.
pub fn check_case_set<'a>(
    expected: &[String],
    got: impl Iterator<Item = &'a str>,
) -> Result<(), String> {
    let got: Vec<&str> = got.collect();
    if let Some(missing) = expected.iter().find(|c| !got.contains(&c.as_str())) {
        return Err(format!("missing case {missing:?}"));
    }
    if let Some(extra) = got.iter().find(|c| !expected.iter().any(|e| e == *c)) {
        return Err(format!("unexpected case {extra:?}"));
    }
    Ok(())
}

fn load(inputs: &[String]) -> CliResult<MetricTable> {
    let submissions = inputs
        .iter()
        .map(|s| {
            let (id, path) = parse_metrics_arg(s);
            Ok((id, read_metrics_csv(&path)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    build_table(submissions)
}

pub fn run_rank(args: &RankArgs) -> CliResult<()> {
    let result = brats_ranking(&load(&args.metrics)?)?;
    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    staged.add(args.out_dir.join("leaderboard.json"), &json_bytes(&result))?;
    staged.commit()?;
    for a in result.order() {
        let s = &result.algorithms[a];
        eprintln!("{:>3}  {}  {}", s.position, s.score, s.algorithm);
    }
    Ok(())
}

pub fn run_stability(args: &StabilityArgs) -> CliResult<()> {
    let report = jackknife_stability(&load(&args.metrics)?)?;
    let flips = csv_bytes(
        &["removed", "first", "second", "full_pool", "reduced_pool"],
        report.flips.iter().map(|f| {
            vec![
                f.removed.clone(),
                f.first.clone(),
                f.second.clone(),
                f.full_pool.name().to_owned(),
                f.reduced_pool.name().to_owned(),
            ]
        }),
    );
    ensure_dir(&args.out_dir)?;
    let mut staged = Staged::new();
    staged.add(args.out_dir.join("flips.csv"), &flips)?;
    staged.add(args.out_dir.join("stability.json"), &json_bytes(&report))?;
    staged.commit()?;
    eprintln!("{} order flips", report.flips.len());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metrics_arg_parsing() {
        assert_eq!(
            parse_metrics_arg("A=x/metrics.csv"),
            ("A".into(), "x/metrics.csv".into())
        );
        assert_eq!(parse_metrics_arg("runs/unet/metrics.csv").0, "unet");
        assert_eq!(parse_metrics_arg("runs/unet.csv").0, "unet");
    }

    #[test]
    fn case_set_messages() {
        let expected = vec!["a".to_owned(), "b".to_owned()];
        assert!(check_case_set(&expected, ["b", "a"].into_iter()).is_ok());
        assert_eq!(
            check_case_set(&expected, ["a"].into_iter()).unwrap_err(),
            "missing case \"b\""
        );
        assert!(check_case_set(&expected, ["a", "b", "c"].into_iter())
            .unwrap_err()
            .contains("\"c\""));
    }
}
