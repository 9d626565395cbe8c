use std::path::Path;

use ndarray::Array2;

use crate::error::{GgrError, Result};
use crate::table::check_unique;

/// Cells spelled like this in a gene CSV are recorded as missing.
pub const MISSING_TOKENS: [&str; 3] = ["NA", "N/A", ""];

/// Patients x genes FPKM matrix with explicit missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneExpressionTable {
    pub patient_ids: Vec<String>,
    pub gene_names: Vec<String>,
    pub values: Array2<Option<f64>>,
}

impl GeneExpressionTable {
    pub fn new(
        patient_ids: Vec<String>,
        gene_names: Vec<String>,
        values: Array2<Option<f64>>,
    ) -> Result<Self> {
        if values.dim() != (patient_ids.len(), gene_names.len()) {
            return Err(GgrError::Shape(format!(
                "gene values {:?} vs {} patients x {} genes",
                values.dim(),
                patient_ids.len(),
                gene_names.len()
            )));
        }
        check_unique(&gene_names, "gene names")?;
        check_unique(&patient_ids, "patient ids")?;
        if let Some(v) = values.iter().flatten().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(GgrError::format("gene csv", format!("expression {v} is not a non-negative number")));
        }
        Ok(Self {
            patient_ids,
            gene_names,
            values,
        })
    }

    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_none()).count()
    }

    pub fn row_of(&self, id: &str) -> Option<usize> {
        self.patient_ids.iter().position(|p| p == id)
    }

    pub fn from_reader(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = rdr.headers()?.clone();
        let gene_names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
        let mut ids = Vec::new();
        let mut cells = Vec::new();
        for record in rdr.records() {
            let record = record?;
            ids.push(record[0].trim().to_string());
            for cell in record.iter().skip(1) {
                let cell = cell.trim();
                if MISSING_TOKENS.contains(&cell) {
                    cells.push(None);
                } else {
                    let v: f64 = cell
                        .parse()
                        .map_err(|_| GgrError::format("gene csv", format!("bad expression `{cell}`")))?;
                    cells.push(Some(v));
                }
            }
        }
        let values = Array2::from_shape_vec((ids.len(), gene_names.len()), cells)
            .map_err(|e| GgrError::Shape(e.to_string()))?;
        Self::new(ids, gene_names, values)
    }

    pub fn to_writer(&self, writer: impl std::io::Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.gene_names.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.patient_ids.iter().zip(self.values.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| match v {
                Some(x) => format!("{x}"),
                None => "NA".to_string(),
            }));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| GgrError::io("<csv writer>", e))?;
        Ok(())
    }
}

pub fn load_gene_table(path: impl AsRef<Path>) -> Result<GeneExpressionTable> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| GgrError::io(path, e))?;
    GeneExpressionTable::from_reader(file)
}

pub fn save_gene_table(path: impl AsRef<Path>, table: &GeneExpressionTable) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| GgrError::io(path, e))?;
    table.to_writer(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_missing_cell() {
        let t = GeneExpressionTable::from_reader("id,A,B,C\np1,1,2,NA\np2,3,4,5\n".as_bytes()).unwrap();
        assert_eq!(t.missing_count(), 1);
        assert_eq!(t.values[[0, 2]], None);
    }

    #[test]
    fn all_missing_tokens() {
        let t = GeneExpressionTable::from_reader("id,A,B,C\np1,N/A,,NA\n".as_bytes()).unwrap();
        assert_eq!(t.missing_count(), 3);
    }

    #[test]
    fn duplicate_gene_rejected() {
        assert!(GeneExpressionTable::from_reader("id,A,A\np1,1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn ragged_rejected() {
        assert!(GeneExpressionTable::from_reader("id,A,B\np1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn number_forms() {
        let t = GeneExpressionTable::from_reader("id,A,B,C\np1,1.5,0,2e3\n".as_bytes()).unwrap();
        let row: Vec<_> = t.values.row(0).to_vec();
        assert_eq!(row, vec![Some(1.5), Some(0.0), Some(2000.0)]);
    }

    #[test]
    fn negative_rejected() {
        assert!(GeneExpressionTable::from_reader("id,A\np1,-1\n".as_bytes()).is_err());
    }
}
