//! CSV/JSON serialization and all-or-nothing file output.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use brats_core::metrics::SpecialCase;
use brats_core::{MetricRecord, Region};
use serde::Serialize;
use tempfile::NamedTempFile;

use crate::error::{Category, CliError, CliResult};

/// Files staged next to their destinations and renamed into place together.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<()> {
        let mut tmp = temp_beside(&path)?;
        tmp.write_all(bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push((tmp, path));
        Ok(())
    }

    /// Reserves a temp path beside `path`; the caller writes to it before [`Staged::commit`].
    pub fn reserve(&mut self, path: PathBuf) -> CliResult<PathBuf> {
        let tmp = temp_beside(&path)?;
        let staged = tmp.path().to_path_buf();
        self.files.push((tmp, path));
        Ok(staged)
    }

    pub fn commit(self) -> CliResult<()> {
        for (tmp, path) in self.files {
            tmp.persist(&path)
                .map_err(|e| CliError::io(&path, e.error))?;
        }
        Ok(())
    }
}

fn temp_beside(path: &Path) -> CliResult<NamedTempFile> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    // keep the extension so writers that dispatch on it see the real one
    let suffix = path
        .file_name()
        .map(|n| format!(".{}", n.to_string_lossy()))
        .unwrap_or_default();
    tempfile::Builder::new()
        .prefix(".brats-eval-")
        .suffix(&suffix)
        .tempfile_in(dir)
        .map_err(|e| CliError::io(dir, e))
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> CliResult<()> {
    let mut staged = Staged::new();
    staged.add(path.to_path_buf(), bytes)?;
    staged.commit()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory csv");
    for row in rows {
        w.write_record(&row).expect("in-memory csv");
    }
    w.into_inner().expect("in-memory csv")
}

pub fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(value).expect("serializable");
    out.push(b'\n');
    out
}

/// Per-case WT, TC and ET records keyed by case id.
pub type CaseRecords = Vec<(String, [MetricRecord; 3])>;

pub const METRICS_HEADER: [&str; 5] = ["case_id", "region", "dice", "hd95", "special_case"];

pub fn metrics_csv(cases: &[(String, [MetricRecord; 3])]) -> Vec<u8> {
    csv_bytes(
        &METRICS_HEADER,
        cases.iter().flat_map(|(id, records)| {
            records.iter().map(move |r| {
                vec![
                    id.clone(),
                    r.region.name().to_owned(),
                    fmt_f64(r.dice),
                    fmt_f64(r.hd95),
                    r.special_case.name().to_owned(),
                ]
            })
        }),
    )
}

/// Per-case records of one metrics.csv, in first-appearance order.
pub fn read_metrics_csv(path: &Path) -> CliResult<CaseRecords> {
    let bad = |line: u64, msg: String| {
        CliError::new(
            Category::Validation,
            format!("{}: row {line}: {msg}", path.display()),
        )
    };
    let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| CliError::new(Category::Validation, format!("{}: {e}", path.display())))?
        .clone();
    let col = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::new(
                Category::Validation,
                format!("{}: missing column {name:?}", path.display()),
            )
        })
    };
    let [c_id, c_region, c_dice, c_hd, c_special] = METRICS_HEADER.map(col);
    let (c_id, c_region, c_dice, c_hd, c_special) = (c_id?, c_region?, c_dice?, c_hd?, c_special?);

    let mut order: Vec<String> = Vec::new();
    let mut found: HashMap<String, [Option<MetricRecord>; 3]> = HashMap::new();
    for record in reader.records() {
        let record = record
            .map_err(|e| CliError::new(Category::Validation, format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |i: usize| record.get(i).unwrap_or("");
        let id = field(c_id).to_owned();
        if id.is_empty() {
            return Err(bad(line, "empty case_id".into()));
        }
        let region = Region::parse(field(c_region))
            .ok_or_else(|| bad(line, format!("unknown region {:?}", field(c_region))))?;
        let number = |i: usize| {
            field(i)
                .parse::<f64>()
                .map_err(|_| bad(line, format!("{:?} is not a number", field(i))))
        };
        let special_case = SpecialCase::parse(field(c_special))
            .ok_or_else(|| bad(line, format!("unknown special_case {:?}", field(c_special))))?;
        let rec = MetricRecord {
            region,
            dice: number(c_dice)?,
            hd95: number(c_hd)?,
            special_case,
        };
        let slot = found.entry(id.clone()).or_insert_with(|| {
            order.push(id.clone());
            [None; 3]
        });
        let i = Region::ALL.iter().position(|&r| r == region).unwrap();
        if slot[i].replace(rec).is_some() {
            return Err(bad(line, format!("duplicate {region} row for case {id:?}")));
        }
    }
    if order.is_empty() {
        return Err(CliError::new(
            Category::Validation,
            format!("{}: no rows", path.display()),
        ));
    }
    order
        .into_iter()
        .map(|id| {
            let slots = found[&id];
            match slots {
                [Some(a), Some(b), Some(c)] => Ok((id, [a, b, c])),
                _ => Err(CliError::new(
                    Category::Validation,
                    format!("{}: case {id:?} lacks a WT, TC or ET row", path.display()),
                )),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(region: Region, dice: f64, hd95: f64) -> MetricRecord {
        MetricRecord {
            region,
            dice,
            hd95,
            special_case: SpecialCase::None,
        }
    }

    #[test]
    fn metrics_roundtrip_exact() {
        let cases = vec![
            (
                "c2".to_owned(),
                Region::ALL.map(|r| rec(r, 0.1 + 0.2, 1.0 / 3.0)),
            ),
            ("c1".to_owned(), Region::ALL.map(|r| rec(r, 1.0, 373.13))),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        write_atomic(&path, &metrics_csv(&cases)).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), cases);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(
            text.starts_with("case_id,region,dice,hd95,special_case\nc2,WT,0.30000000000000004,")
        );
        assert!(text.contains("c1,ET,1,373.13,none"));
    }

    #[test]
    fn incomplete_case_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        std::fs::write(
            &path,
            "case_id,region,dice,hd95,special_case\na,WT,1,0,none\n",
        )
        .unwrap();
        assert!(read_metrics_csv(&path)
            .unwrap_err()
            .message
            .contains("lacks"));
    }

    #[test]
    fn staged_files_appear_only_on_commit() {
        let dir = tempfile::tempdir().unwrap();
        let target = dir.path().join("out.csv");
        let mut staged = Staged::new();
        staged.add(target.clone(), b"x").unwrap();
        assert!(!target.exists());
        staged.commit().unwrap();
        assert_eq!(std::fs::read(&target).unwrap(), b"x");
        let mut dropped = Staged::new();
        dropped.add(dir.path().join("never.csv"), b"y").unwrap();
        drop(dropped);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
