use std::path::Path;

use super::BenchError;
use crate::chem::{standardize, Molecule};

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub smiles: String,
    pub target: f64,
    /// Standardized structure.
    pub molecule: Molecule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub records: Vec<Record>,
    pub target_units: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn molecules(&self, indices: &[usize]) -> Vec<Molecule> {
        indices
            .iter()
            .map(|&i| self.records[i].molecule.clone())
            .collect()
    }

    pub fn targets(&self, indices: &[usize]) -> Vec<f64> {
        indices.iter().map(|&i| self.records[i].target).collect()
    }
}

/// A dropped input row. `line` is 1-based and counts the header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejection {
    pub line: usize,
    pub smiles: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

/// Reads a headered CSV. Rows with an unparseable SMILES, a missing cell or
/// a non-finite target are dropped and listed in `rejections`. Duplicates
/// are kept.
pub fn load_csv(
    path: &Path,
    smiles_column: &str,
    target_column: &str,
) -> Result<LoadedDataset, BenchError> {
    let csv_err = |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = reader.headers().map_err(csv_err)?.clone();
    let find = |column: &str| {
        headers
            .iter()
            .position(|h| h == column)
            .ok_or_else(|| BenchError::MissingColumn {
                path: path.to_path_buf(),
                column: column.to_string(),
                available: headers.iter().collect::<Vec<_>>().join(", "),
            })
    };
    let s_col = find(smiles_column)?;
    let t_col = find(target_column)?;

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (k, row) in reader.records().enumerate() {
        let line = k + 2;
        let row = row.map_err(csv_err)?;
        let smiles = row.get(s_col).unwrap_or("").to_string();
        let reject = |reason: String| Rejection {
            line,
            smiles: smiles.clone(),
            reason,
        };
        let Some(target_cell) = row.get(t_col) else {
            rejections.push(reject("missing target cell".into()));
            continue;
        };
        let target = match target_cell.parse::<f64>() {
            Ok(t) if t.is_finite() => t,
            _ => {
                rejections.push(reject(format!("non-numeric target '{target_cell}'")));
                continue;
            }
        };
        match standardize(&smiles) {
            Ok(molecule) => records.push(Record {
                smiles,
                target,
                molecule,
            }),
            Err(e) => rejections.push(reject(e.to_string())),
        }
    }
    if records.is_empty() {
        return Err(BenchError::NoValidRows {
            path: path.to_path_buf(),
            rejected: rejections.len(),
        });
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(LoadedDataset {
        dataset: Dataset {
            name,
            records,
            target_units: String::new(),
        },
        rejections,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn rejects_bad_rows_and_keeps_duplicates() {
        let f = file("smiles,y\nCCO,1.0\nC1CC,2.0\nCCO, 1.5\nc1ccccc1,abc\n  CCN  ,3\n");
        let loaded = load_csv(f.path(), "smiles", "y").unwrap();
        let ds = &loaded.dataset;
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.records[0].smiles, "CCO");
        assert_eq!(ds.records[1].smiles, "CCO");
        assert_eq!(ds.records[2].smiles, "CCN");
        assert_eq!(ds.targets(&[0, 1, 2]), vec![1.0, 1.5, 3.0]);
        let lines: Vec<usize> = loaded.rejections.iter().map(|r| r.line).collect();
        assert_eq!(lines, vec![3, 5]);
        assert!(loaded.rejections[1].reason.contains("abc"));
    }

    #[test]
    fn missing_column_lists_available() {
        let f = file("smiles,y\nCCO,1\n");
        let err = load_csv(f.path(), "smiles", "logS").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("logS") && msg.contains("smiles, y"), "{msg}");
    }

    #[test]
    fn no_valid_rows_is_an_error() {
        let f = file("smiles,y\nC1CC,1\n(,2\n");
        assert!(matches!(
            load_csv(f.path(), "smiles", "y"),
            Err(BenchError::NoValidRows { rejected: 2, .. })
        ));
    }
}
