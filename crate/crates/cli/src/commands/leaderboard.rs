//! Persistent leaderboard: submitted per-case metrics plus the ranking over all
//! of them, rewritten by temp file and rename on every change.

use std::path::{Path, PathBuf};

use brats_core::metrics::SpecialCase;
use brats_core::ranking::Criterion;
use brats_core::{brats_ranking, MetricRecord, RankResult, Region};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use super::rank::{build_table, check_case_set};
use crate::error::{Category, CliError, CliResult};
use crate::output::{json_bytes, read_metrics_csv, write_atomic};

#[derive(Debug, Subcommand)]
pub enum LeaderboardCommand {
    /// Adds a submission and re-ranks the stored pool.
    Add(AddArgs),
    /// Re-ranks the stored pool.
    Recompute(StoreArgs),
}

#[derive(Debug, Args)]
pub struct StoreArgs {
    #[arg(long)]
    pub store: PathBuf,
}

#[derive(Debug, Args)]
pub struct AddArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub metrics: PathBuf,
    #[arg(long)]
    pub algorithm_id: String,
    /// Unix seconds; defaults to now.
    #[arg(long)]
    pub timestamp: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaseScores {
    pub case_id: String,
    pub dice_wt: f64,
    pub dice_tc: f64,
    pub dice_et: f64,
    pub hd95_wt: f64,
    pub hd95_tc: f64,
    pub hd95_et: f64,
}

impl CaseScores {
    fn from_records(case_id: String, records: &[MetricRecord; 3]) -> Self {
        let v =
            Criterion::ALL.map(|c| c.of(records.iter().find(|r| r.region == c.region).unwrap()));
        Self {
            case_id,
            dice_wt: v[0],
            dice_tc: v[1],
            dice_et: v[2],
            hd95_wt: v[3],
            hd95_tc: v[4],
            hd95_et: v[5],
        }
    }

    fn to_records(&self) -> [MetricRecord; 3] {
        let (dice, hd95) = (
            [self.dice_wt, self.dice_tc, self.dice_et],
            [self.hd95_wt, self.hd95_tc, self.hd95_et],
        );
        std::array::from_fn(|i| MetricRecord {
            region: Region::ALL[i],
            dice: dice[i],
            hd95: hd95[i],
            special_case: SpecialCase::None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub algorithm_id: String,
    pub timestamp: u64,
    pub cases: Vec<CaseScores>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Store {
    pub submissions: Vec<Submission>,
    pub ranking: Option<RankResult>,
}

fn store_err(path: &Path, msg: impl std::fmt::Display) -> CliError {
    CliError::new(Category::Leaderboard, format!("{}: {msg}", path.display()))
}

impl Store {
    /// A missing file is an empty store.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Self::default()),
            Err(e) => return Err(CliError::io(path, e)),
        };
        serde_json::from_str(&text).map_err(|e| store_err(path, e))
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        write_atomic(path, &json_bytes(self))
    }

    pub fn add(&mut self, submission: Submission) -> Result<(), String> {
        if self
            .submissions
            .iter()
            .any(|s| s.algorithm_id == submission.algorithm_id)
        {
            return Err(format!(
                "algorithm id {:?} already submitted",
                submission.algorithm_id
            ));
        }
        if let Some(first) = self.submissions.first() {
            let expected: Vec<String> = first.cases.iter().map(|c| c.case_id.clone()).collect();
            check_case_set(
                &expected,
                submission.cases.iter().map(|c| c.case_id.as_str()),
            )?;
        }
        self.submissions.push(submission);
        Ok(())
    }

    pub fn recompute(&mut self) -> CliResult<()> {
        if self.submissions.is_empty() {
            self.ranking = None;
            return Ok(());
        }
        let table = build_table(
            self.submissions
                .iter()
                .map(|s| {
                    let rows = s
                        .cases
                        .iter()
                        .map(|c| (c.case_id.clone(), c.to_records()))
                        .collect();
                    (s.algorithm_id.clone(), rows)
                })
                .collect(),
        )
        .map_err(|e| CliError::new(Category::Leaderboard, e.message))?;
        self.ranking = Some(brats_ranking(&table)?);
        Ok(())
    }
}

fn now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub fn run(command: &LeaderboardCommand) -> CliResult<()> {
    let (path, store) = match command {
        LeaderboardCommand::Add(args) => {
            let mut store = Store::load(&args.store)?;
            let cases = read_metrics_csv(&args.metrics)?
                .into_iter()
                .map(|(id, recs)| CaseScores::from_records(id, &recs))
                .collect();
            store
                .add(Submission {
                    algorithm_id: args.algorithm_id.clone(),
                    timestamp: args.timestamp.unwrap_or_else(now),
                    cases,
                })
                .map_err(|m| store_err(&args.store, m))?;
            store.recompute()?;
            (&args.store, store)
        }
        LeaderboardCommand::Recompute(args) => {
            let mut store = Store::load(&args.store)?;
            store.recompute()?;
            (&args.store, store)
        }
    };
    store.save(path)?;
    if let Some(r) = &store.ranking {
        for a in r.order() {
            let s = &r.algorithms[a];
            eprintln!("{:>3}  {}  {}", s.position, s.score, s.algorithm);
        }
    }
    Ok(())
}
