//! Case manifests: header-bearing CSV files whose relative paths resolve
//! against the manifest's own directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Category, CliError, CliResult};

pub const PROB_COLUMNS: [&str; 3] = ["wt_prob_path", "tc_prob_path", "et_prob_path"];

#[derive(Debug, Clone, PartialEq)]
pub struct CaseEntry {
    /// Line in the manifest file, header is line 1.
    pub line: u64,
    pub case_id: String,
    pub reference: Option<PathBuf>,
    pub prediction: PathBuf,
    /// WT, TC and ET probability maps.
    pub probs: Option<[PathBuf; 3]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub cases: Vec<CaseEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleCase {
    pub case_id: String,
    /// Configuration name and its members, in manifest order.
    pub configurations: Vec<(String, Vec<[PathBuf; 3]>)>,
}

fn manifest_err(path: &Path, line: Option<u64>, msg: impl std::fmt::Display) -> CliError {
    let at = match line {
        Some(l) => format!("{}: row {l}", path.display()),
        None => path.display().to_string(),
    };
    CliError::new(Category::Manifest, format!("{at}: {msg}"))
}

struct Table {
    path: PathBuf,
    base: PathBuf,
    headers: Vec<String>,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read(path: &Path) -> CliResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(file);
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| manifest_err(path, None, e))?
            .iter()
            .map(str::to_owned)
            .collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line());
                manifest_err(path, line, e)
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self {
            path: path.to_path_buf(),
            base,
            headers,
            rows,
        })
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    fn require(&self, name: &str) -> CliResult<usize> {
        self.column(name)
            .ok_or_else(|| manifest_err(&self.path, None, format!("missing column {name:?}")))
    }

    fn text(&self, line: u64, record: &csv::StringRecord, col: usize) -> CliResult<String> {
        let value = record.get(col).unwrap_or("");
        if value.is_empty() {
            return Err(manifest_err(
                &self.path,
                Some(line),
                format!("empty {:?}", self.headers[col]),
            ));
        }
        Ok(value.to_owned())
    }

    fn file(&self, line: u64, record: &csv::StringRecord, col: usize) -> CliResult<PathBuf> {
        let path = self.base.join(self.text(line, record, col)?);
        if !path.is_file() {
            return Err(manifest_err(
                &self.path,
                Some(line),
                format!("{} not found: {}", self.headers[col], path.display()),
            ));
        }
        Ok(path)
    }

    fn prob_columns(&self, required: bool) -> CliResult<Option<[usize; 3]>> {
        let found = PROB_COLUMNS.map(|c| self.column(c));
        match found {
            [Some(a), Some(b), Some(c)] => Ok(Some([a, b, c])),
            [None, None, None] if !required => Ok(None),
            _ => {
                let missing = PROB_COLUMNS
                    .iter()
                    .zip(found)
                    .find(|(_, f)| f.is_none())
                    .map(|(c, _)| *c)
                    .unwrap();
                Err(manifest_err(
                    &self.path,
                    None,
                    format!("missing column {missing:?}"),
                ))
            }
        }
    }
}

/// Manifest for commands that compare predictions with references.
pub fn parse_manifest(path: &Path) -> CliResult<Manifest> {
    parse(path, true)
}

/// Manifest where `reference_path` is optional.
pub fn parse_prediction_manifest(path: &Path) -> CliResult<Manifest> {
    parse(path, false)
}

fn parse(path: &Path, need_reference: bool) -> CliResult<Manifest> {
    let table = Table::read(path)?;
    let id_col = table.require("case_id")?;
    let ref_col = if need_reference {
        Some(table.require("reference_path")?)
    } else {
        table.column("reference_path")
    };
    let pred_col = table.require("prediction_path")?;
    let prob_cols = table.prob_columns(false)?;

    let mut seen = HashSet::new();
    let mut cases = Vec::with_capacity(table.rows.len());
    for (line, record) in &table.rows {
        let line = *line;
        let case_id = table.text(line, record, id_col)?;
        if !seen.insert(case_id.clone()) {
            return Err(manifest_err(
                path,
                Some(line),
                format!("duplicate case_id {case_id:?}"),
            ));
        }
        let reference = ref_col.map(|c| table.file(line, record, c)).transpose()?;
        let prediction = table.file(line, record, pred_col)?;
        let probs = match prob_cols {
            Some(cols) => {
                let [a, b, c] = cols.map(|c| table.file(line, record, c));
                Some([a?, b?, c?])
            }
            None => None,
        };
        cases.push(CaseEntry {
            line,
            case_id,
            reference,
            prediction,
            probs,
        });
    }
    if cases.is_empty() {
        return Err(manifest_err(path, None, "no cases"));
    }
    Ok(Manifest { cases })
}

/// Ensemble manifest: one row per member with `case_id`, `configuration` and
/// the three probability map columns.
pub fn parse_ensemble_manifest(path: &Path) -> CliResult<Vec<EnsembleCase>> {
    let table = Table::read(path)?;
    let id_col = table.require("case_id")?;
    let config_col = table.require("configuration")?;
    let prob_cols = table.prob_columns(true)?.unwrap();

    let mut cases: Vec<EnsembleCase> = Vec::new();
    for (line, record) in &table.rows {
        let line = *line;
        let case_id = table.text(line, record, id_col)?;
        let configuration = table.text(line, record, config_col)?;
        let [a, b, c] = prob_cols.map(|c| table.file(line, record, c));
        let member = [a?, b?, c?];
        let case = match cases.iter_mut().position(|c| c.case_id == case_id) {
            Some(i) => &mut cases[i],
            None => {
                cases.push(EnsembleCase {
                    case_id,
                    configurations: Vec::new(),
                });
                cases.last_mut().unwrap()
            }
        };
        match case
            .configurations
            .iter_mut()
            .find(|(name, _)| *name == configuration)
        {
            Some((_, members)) => members.push(member),
            None => case.configurations.push((configuration, vec![member])),
        }
    }
    if cases.is_empty() {
        return Err(manifest_err(path, None, "no cases"));
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(manifest: &str, files: &[&str]) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        for f in files {
            std::fs::write(dir.path().join(f), b"").unwrap();
        }
        let path = dir.path().join("manifest.csv");
        std::fs::write(&path, manifest).unwrap();
        (dir, path)
    }

    #[test]
    fn two_rows() {
        let (dir, path) = setup(
            "case_id,reference_path,prediction_path\na,ra.nii,pa.nii\nb,rb.nii,pb.nii\n",
            &["ra.nii", "pa.nii", "rb.nii", "pb.nii"],
        );
        let m = parse_manifest(&path).unwrap();
        assert_eq!(m.cases.len(), 2);
        assert_eq!(m.cases[1].case_id, "b");
        assert_eq!(m.cases[1].line, 3);
        assert_eq!(m.cases[0].prediction, dir.path().join("pa.nii"));
        assert!(m.cases[0].probs.is_none());
    }

    #[test]
    fn duplicate_id_names_it() {
        let (_dir, path) = setup(
            "case_id,reference_path,prediction_path\nBraTS_001,r,p\nBraTS_001,r,p\n",
            &["r", "p"],
        );
        let err = parse_manifest(&path).unwrap_err();
        assert_eq!(err.category, Category::Manifest);
        assert!(
            err.message.contains("BraTS_001") && err.message.contains("row 3"),
            "{err}"
        );
    }

    #[test]
    fn missing_column() {
        let (_dir, path) = setup("case_id,prediction_path\na,p\n", &["p"]);
        let err = parse_manifest(&path).unwrap_err();
        assert!(err.message.contains("reference_path"), "{err}");
        assert!(parse_prediction_manifest(&path).is_ok());
    }

    #[test]
    fn missing_file_has_row() {
        let (_dir, path) = setup(
            "case_id,reference_path,prediction_path\na,r,p\nb,r,gone.nii\n",
            &["r", "p"],
        );
        let err = parse_manifest(&path).unwrap_err();
        assert!(
            err.message.contains("row 3") && err.message.contains("gone.nii"),
            "{err}"
        );
    }

    #[test]
    fn partial_probability_columns_rejected() {
        let (_dir, path) = setup(
            "case_id,reference_path,prediction_path,wt_prob_path\na,r,p,w\n",
            &["r", "p", "w"],
        );
        assert!(parse_manifest(&path)
            .unwrap_err()
            .message
            .contains("tc_prob_path"));
    }

    #[test]
    fn ensemble_groups_in_order() {
        let (_dir, path) = setup(
            "case_id,configuration,wt_prob_path,tc_prob_path,et_prob_path\n\
             b,3d,w,t,e\na,3d,w,t,e\nb,2d,w,t,e\nb,3d,w,t,e\n",
            &["w", "t", "e"],
        );
        let cases = parse_ensemble_manifest(&path).unwrap();
        assert_eq!(cases.len(), 2);
        assert_eq!(cases[0].case_id, "b");
        let names: Vec<_> = cases[0]
            .configurations
            .iter()
            .map(|(n, m)| (n.as_str(), m.len()))
            .collect();
        assert_eq!(names, [("3d", 2), ("2d", 1)]);
    }
}
