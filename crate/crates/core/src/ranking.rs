//! "Rank then aggregate" challenge ranking.
//!
//! Every algorithm is ranked separately in each (case, region, metric) column,
//! the ranks are averaged over all columns and the mean rank is divided by the
//! number of algorithms. Ties share the mean of the positions they span, so each
//! column contributes the same rank mass `N (N + 1) / 2`.
//!
//! Fractional ranks are multiples of one half, so rank sums are accumulated as
//! exact integers (doubled ranks) and divided once at the end. Scores are
//! therefore independent of column order and thread scheduling.

use std::cmp::Ordering;
use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricRecord;
use crate::volume::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Dice,
    Hd95,
}

impl Metric {
    pub fn direction(self) -> Direction {
        match self {
            Metric::Dice => Direction::HigherBetter,
            Metric::Hd95 => Direction::LowerBetter,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Dice => "Dice",
            Metric::Hd95 => "HD95",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

/// One ranked quantity within a case: a metric on a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Criterion {
    pub region: Region,
    pub metric: Metric,
}

impl Criterion {
    pub const fn new(region: Region, metric: Metric) -> Self {
        Self { region, metric }
    }

    /// The six per-case criteria: Dice then HD95, each over WT, TC, ET.
    pub const ALL: [Criterion; 6] = [
        Criterion::new(Region::Wt, Metric::Dice),
        Criterion::new(Region::Tc, Metric::Dice),
        Criterion::new(Region::Et, Metric::Dice),
        Criterion::new(Region::Wt, Metric::Hd95),
        Criterion::new(Region::Tc, Metric::Hd95),
        Criterion::new(Region::Et, Metric::Hd95),
    ];

    /// Dice and HD95 of enhancing tumor only.
    pub const ET: [Criterion; 2] = [
        Criterion::new(Region::Et, Metric::Dice),
        Criterion::new(Region::Et, Metric::Hd95),
    ];

    pub fn of(&self, record: &MetricRecord) -> f64 {
        match self.metric {
            Metric::Dice => record.dice,
            Metric::Hd95 => record.hd95,
        }
    }
}

/// Algorithms × cases × criteria, fully populated.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricTable {
    algorithms: Vec<String>,
    cases: Vec<String>,
    criteria: Vec<Criterion>,
    // [algorithm][case][criterion]
    values: Vec<f64>,
}

fn check_unique(ids: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::InvalidTable(format!("duplicate {what} id {id:?}")));
        }
    }
    Ok(())
}

impl MetricTable {
    pub fn new(
        algorithms: Vec<String>,
        cases: Vec<String>,
        criteria: Vec<Criterion>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if algorithms.is_empty() {
            return Err(Error::InvalidTable("no algorithms".into()));
        }
        if cases.is_empty() {
            return Err(Error::InvalidTable("no cases".into()));
        }
        if criteria.is_empty() {
            return Err(Error::InvalidTable("no criteria".into()));
        }
        check_unique(&algorithms, "algorithm")?;
        check_unique(&cases, "case")?;
        if criteria.iter().collect::<HashSet<_>>().len() != criteria.len() {
            return Err(Error::InvalidTable("duplicate criterion".into()));
        }
        let expected = algorithms.len() * cases.len() * criteria.len();
        if values.len() != expected {
            return Err(Error::InvalidTable(format!(
                "expected {expected} values, got {}",
                values.len()
            )));
        }
        let table = Self {
            algorithms,
            cases,
            criteria,
            values,
        };
        for a in 0..table.algorithms.len() {
            for c in 0..table.cases.len() {
                for (k, crit) in table.criteria.iter().enumerate() {
                    let v = table.value(a, c, k);
                    let ok = match crit.metric {
                        Metric::Dice => (0.0..=1.0).contains(&v),
                        Metric::Hd95 => v.is_finite() && v >= 0.0,
                    };
                    if !ok {
                        return Err(Error::InvalidTable(format!(
                            "{} {} = {v} for algorithm {:?}, case {:?}",
                            crit.region,
                            crit.metric.name(),
                            table.algorithms[a],
                            table.cases[c]
                        )));
                    }
                }
            }
        }
        Ok(table)
    }

    /// Six-criterion table from per-case region records.
    ///
    /// `records[a][c]` holds the WT, TC and ET records of algorithm `a` on case `c`.
    pub fn from_records(
        algorithms: Vec<String>,
        cases: Vec<String>,
        records: &[Vec<[MetricRecord; 3]>],
    ) -> Result<Self> {
        Self::from_records_with(algorithms, cases, &Criterion::ALL, records)
    }

    pub fn from_records_with(
        algorithms: Vec<String>,
        cases: Vec<String>,
        criteria: &[Criterion],
        records: &[Vec<[MetricRecord; 3]>],
    ) -> Result<Self> {
        if records.len() != algorithms.len() {
            return Err(Error::InvalidTable(format!(
                "{} algorithms but {} record sets",
                algorithms.len(),
                records.len()
            )));
        }
        let mut values = Vec::with_capacity(algorithms.len() * cases.len() * criteria.len());
        for (a, per_case) in records.iter().enumerate() {
            if per_case.len() != cases.len() {
                return Err(Error::InvalidTable(format!(
                    "algorithm {:?} has {} cases, expected {}",
                    algorithms[a],
                    per_case.len(),
                    cases.len()
                )));
            }
            for regions in per_case {
                for crit in criteria {
                    let rec = regions
                        .iter()
                        .find(|r| r.region == crit.region)
                        .ok_or_else(|| {
                            Error::InvalidTable(format!("missing {} record", crit.region))
                        })?;
                    values.push(crit.of(rec));
                }
            }
        }
        Self::new(algorithms, cases, criteria.to_vec(), values)
    }

    pub fn algorithms(&self) -> &[String] {
        &self.algorithms
    }

    pub fn cases(&self) -> &[String] {
        &self.cases
    }

    pub fn criteria(&self) -> &[Criterion] {
        &self.criteria
    }

    pub fn value(&self, algorithm: usize, case: usize, criterion: usize) -> f64 {
        let (m, k) = (self.cases.len(), self.criteria.len());
        self.values[(algorithm * m + case) * k + criterion]
    }

    /// The same table without one algorithm.
    pub fn without_algorithm(&self, algorithm: usize) -> Result<Self> {
        if self.algorithms.len() < 2 {
            return Err(Error::InvalidTable(
                "cannot remove the only algorithm".into(),
            ));
        }
        let block = self.cases.len() * self.criteria.len();
        let mut algorithms = self.algorithms.clone();
        algorithms.remove(algorithm);
        let values = self
            .values
            .chunks(block)
            .enumerate()
            .filter(|&(a, _)| a != algorithm)
            .flat_map(|(_, c)| c.iter().copied())
            .collect();
        Ok(Self {
            algorithms,
            cases: self.cases.clone(),
            criteria: self.criteria.clone(),
            values,
        })
    }

    fn column(&self, case: usize, criterion: usize) -> Vec<f64> {
        (0..self.algorithms.len())
            .map(|a| self.value(a, case, criterion))
            .collect()
    }
}

/// Twice the fractional rank of every entry; exact for any tie pattern.
fn doubled_ranks(values: &[f64], direction: Direction) -> Result<Vec<u64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput("rank column"));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in rank column".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    let better = |a: &usize, b: &usize| match direction {
        Direction::HigherBetter => values[*b].total_cmp(&values[*a]),
        Direction::LowerBetter => values[*a].total_cmp(&values[*b]),
    };
    order.sort_by(better);
    let mut ranks = vec![0u64; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        // -0.0 and 0.0 are the same score
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1 ..= end share (start + 1 + end) / 2
        let shared = (start + 1 + end) as u64;
        for &i in &order[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    Ok(ranks)
}

/// Fractional ranks of one column; rank 1 is best.
pub fn rank_column(values: &[f64], direction: Direction) -> Result<Vec<f64>> {
    Ok(doubled_ranks(values, direction)?
        .into_iter()
        .map(|r| r as f64 / 2.0)
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmScore {
    pub algorithm: String,
    /// Mean rank over all ranked columns, in `[1, N]`.
    pub mean_rank: f64,
    /// Mean rank divided by the number of algorithms, in `(0, 1]`; lower is better.
    pub score: f64,
    /// 1 + number of algorithms with a strictly lower score.
    pub position: usize,
}

/// Scores in table order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    pub algorithms: Vec<AlgorithmScore>,
    /// Algorithm ids by ascending score, ties in table order.
    pub ordering: Vec<String>,
}

impl RankResult {
    pub fn score_of(&self, algorithm: &str) -> Option<f64> {
        self.algorithms
            .iter()
            .find(|a| a.algorithm == algorithm)
            .map(|a| a.score)
    }

    /// Indices (table order) sorted by ascending score.
    pub fn order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.algorithms.len()).collect();
        idx.sort_by(|&a, &b| {
            self.algorithms[a]
                .score
                .total_cmp(&self.algorithms[b].score)
                .then(a.cmp(&b))
        });
        idx
    }
}

/// Ranks every (case, criterion) column and aggregates per algorithm.
pub fn brats_ranking(table: &MetricTable) -> Result<RankResult> {
    let n = table.algorithms.len();
    let columns: Vec<(usize, usize)> = (0..table.cases.len())
        .flat_map(|c| (0..table.criteria.len()).map(move |k| (c, k)))
        .collect();
    let per_column: Vec<Vec<u64>> = columns
        .par_iter()
        .map(|&(c, k)| doubled_ranks(&table.column(c, k), table.criteria[k].metric.direction()))
        .collect::<Result<_>>()?;
    let mut sums = vec![0u64; n];
    for ranks in &per_column {
        for (s, r) in sums.iter_mut().zip(ranks) {
            *s += r;
        }
    }
    let denom = 2 * columns.len() as u64;
    let scores: Vec<f64> = sums
        .iter()
        .map(|&s| s as f64 / (denom * n as u64) as f64)
        .collect();
    let algorithms: Vec<AlgorithmScore> = sums
        .iter()
        .enumerate()
        .map(|(a, &s)| AlgorithmScore {
            algorithm: table.algorithms[a].clone(),
            mean_rank: s as f64 / denom as f64,
            score: scores[a],
            position: 1 + sums.iter().filter(|&&o| o < s).count(),
        })
        .collect();
    let mut result = RankResult {
        algorithms,
        ordering: Vec::new(),
    };
    result.ordering = result
        .order()
        .into_iter()
        .map(|i| table.algorithms[i].clone())
        .collect();
    Ok(result)
}

/// Relative standing of `first` with respect to `second`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Better,
    Tied,
    Worse,
}

impl Relation {
    fn between(first: f64, second: f64) -> Self {
        match first.total_cmp(&second) {
            Ordering::Less => Relation::Better,
            Ordering::Equal => Relation::Tied,
            Ordering::Greater => Relation::Worse,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Relation::Better => "better",
            Relation::Tied => "tied",
            Relation::Worse => "worse",
        }
    }
}

/// A pair whose relative order changed after removing one algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderFlip {
    pub removed: String,
    pub first: String,
    pub second: String,
    pub full_pool: Relation,
    pub reduced_pool: Relation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionRange {
    pub algorithm: String,
    pub best: usize,
    pub worst: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub full: RankResult,
    pub flips: Vec<OrderFlip>,
    /// Positions over the full pool and every leave-one-out pool containing the algorithm.
    pub position_ranges: Vec<PositionRange>,
}

/// Leave-one-algorithm-out re-ranking.
pub fn jackknife_stability(table: &MetricTable) -> Result<StabilityReport> {
    let n = table.algorithms.len();
    if n < 3 {
        return Err(Error::Domain(format!(
            "jackknife needs at least 3 algorithms, got {n}"
        )));
    }
    let full = brats_ranking(table)?;
    let mut ranges: Vec<(usize, usize)> = full
        .algorithms
        .iter()
        .map(|a| (a.position, a.position))
        .collect();
    let mut flips = Vec::new();
    for removed in 0..n {
        let reduced = brats_ranking(&table.without_algorithm(removed)?)?;
        // reduced index -> full index
        let full_index = |r: usize| if r < removed { r } else { r + 1 };
        for (r, s) in reduced.algorithms.iter().enumerate() {
            let range = &mut ranges[full_index(r)];
            range.0 = range.0.min(s.position);
            range.1 = range.1.max(s.position);
        }
        for i in 0..n - 1 {
            for j in i + 1..n - 1 {
                let (fi, fj) = (full_index(i), full_index(j));
                let before =
                    Relation::between(full.algorithms[fi].score, full.algorithms[fj].score);
                let after =
                    Relation::between(reduced.algorithms[i].score, reduced.algorithms[j].score);
                if before != after {
                    flips.push(OrderFlip {
                        removed: table.algorithms[removed].clone(),
                        first: table.algorithms[fi].clone(),
                        second: table.algorithms[fj].clone(),
                        full_pool: before,
                        reduced_pool: after,
                    });
                }
            }
        }
    }
    let position_ranges = ranges
        .into_iter()
        .enumerate()
        .map(|(a, (best, worst))| PositionRange {
            algorithm: table.algorithms[a].clone(),
            best,
            worst,
        })
        .collect();
    Ok(StabilityReport {
        full,
        flips,
        position_ranges,
    })
}
