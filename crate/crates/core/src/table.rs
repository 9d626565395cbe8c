//! Id-keyed numeric matrices stored as CSV: a header row `id,<name>,...`
//! followed by one row per patient. Used for handcrafted features, deep
//! features, and screened gene matrices. Values are written with Rust's
//! shortest round-trip float formatting, so write-then-read is bit exact.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use ndarray::{Array2, Axis};

use crate::error::{GgrError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub ids: Vec<String>,
    pub names: Vec<String>,
    /// `ids.len() x names.len()`.
    pub values: Array2<f64>,
}

impl FeatureTable {
    pub fn new(ids: Vec<String>, names: Vec<String>, values: Array2<f64>) -> Result<Self> {
        if values.dim() != (ids.len(), names.len()) {
            return Err(GgrError::Shape(format!(
                "table values {:?} do not match {} ids x {} names",
                values.dim(),
                ids.len(),
                names.len()
            )));
        }
        check_unique(&names, "column names")?;
        check_unique(&ids, "patient ids")?;
        Ok(Self { ids, names, values })
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.ids.iter().position(|x| x == id)
    }

    /// Reorders rows to follow `ids`; every id must be present.
    pub fn align_to(&self, ids: &[String]) -> Result<FeatureTable> {
        let index: HashMap<&str, usize> =
            self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        let rows = ids
            .iter()
            .map(|id| {
                index
                    .get(id.as_str())
                    .copied()
                    .ok_or_else(|| GgrError::UnknownPatient(id.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FeatureTable {
            ids: ids.to_vec(),
            names: self.names.clone(),
            values: self.values.select(Axis(0), &rows),
        })
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| GgrError::io(path, e))?;
        Self::from_reader(file)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        if header.is_empty() {
            return Err(GgrError::format("feature csv", "empty header"));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for record in rdr.records() {
            let record = record?;
            ids.push(record[0].to_string());
            for cell in record.iter().skip(1) {
                let v: f64 = cell.trim().parse().map_err(|_| {
                    GgrError::format("feature csv", format!("bad number `{cell}`"))
                })?;
                if !v.is_finite() {
                    return Err(GgrError::NonFinite("feature csv"));
                }
                data.push(v);
            }
        }
        let values = Array2::from_shape_vec((ids.len(), names.len()), data)
            .map_err(|e| GgrError::Shape(e.to_string()))?;
        Self::new(ids, names, values)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| GgrError::io(path, e))?;
        self.to_writer(file)
    }

    pub fn to_writer(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.ids.iter().zip(self.values.rows()) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(id.clone());
            rec.extend(row.iter().map(|v| format!("{v}")));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| GgrError::io("<csv writer>", e))?;
        Ok(())
    }
}

pub(crate) fn check_unique(items: &[String], what: &str) -> Result<()> {
    let mut seen = HashSet::with_capacity(items.len());
    for it in items {
        if !seen.insert(it.as_str()) {
            return Err(GgrError::format("table", format!("duplicate {what} entry `{it}`")));
        }
    }
    Ok(())
}
