//! Patient records, cohort screening, on-disk cohort directories and the
//! planted-signal synthetic generator.

mod genes;
pub mod synth;
mod volume;

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{GgrError, Result};
use crate::table::FeatureTable;

pub use genes::{load_gene_table, save_gene_table, GeneExpressionTable, MISSING_TOKENS};
pub use synth::{generate_synthetic_cohort, SyntheticSpec};
pub use volume::{
    decode_mask, decode_volume, encode_mask, encode_volume, load_mask, load_volume, save_mask,
    save_volume, CtVolume, TumorMask,
};

#[derive(Debug, Clone, PartialEq)]
pub struct PatientRecord {
    pub id: String,
    pub volume: CtVolume,
    pub mask: Option<TumorMask>,
    pub genes: Option<Vec<f64>>,
    /// `true` means recurrence.
    pub recurrence: Option<bool>,
    pub deep_features: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `"real"` or `"synthetic"`.
    pub kind: String,
    pub seed: Option<u64>,
    /// Indices (into the screened gene columns) of genes that carry planted
    /// signal; empty for real data.
    #[serde(default)]
    pub informative_genes: Vec<usize>,
    #[serde(default)]
    pub note: String,
}

impl Provenance {
    pub fn real() -> Self {
        Self {
            kind: "real".into(),
            seed: None,
            informative_genes: Vec::new(),
            note: String::new(),
        }
    }
}

/// Screened cohort: every record has a mask, a label and a complete gene row.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortDataset {
    pub records: Vec<PatientRecord>,
    pub gene_names: Vec<String>,
    pub provenance: Provenance,
    pub deep_feature_names: Option<Vec<String>>,
}

impl CohortDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.records.iter().map(|r| r.id.clone()).collect()
    }

    pub fn labels(&self) -> Vec<bool> {
        self.records
            .iter()
            .map(|r| r.recurrence.expect("screened record has a label"))
            .collect()
    }

    pub fn gene_matrix(&self) -> FeatureTable {
        let n = self.records.len();
        let g = self.gene_names.len();
        let mut values = Array2::zeros((n, g));
        for (mut row, rec) in values.axis_iter_mut(Axis(0)).zip(&self.records) {
            let genes = rec.genes.as_ref().expect("screened record has genes");
            row.assign(&ndarray::ArrayView1::from(genes.as_slice()));
        }
        FeatureTable::new(self.ids(), self.gene_names.clone(), values).expect("consistent cohort")
    }

    pub fn gene_table(&self) -> GeneExpressionTable {
        let m = self.gene_matrix();
        GeneExpressionTable::new(m.ids, m.names, m.values.mapv(Some)).expect("consistent cohort")
    }

    /// Deep features as a table, when every record carries them.
    pub fn deep_matrix(&self) -> Option<FeatureTable> {
        let names = self.deep_feature_names.clone()?;
        let rows: Option<Vec<&Vec<f64>>> =
            self.records.iter().map(|r| r.deep_features.as_ref()).collect();
        let rows = rows?;
        let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
        let values = Array2::from_shape_vec((rows.len(), names.len()), flat).ok()?;
        FeatureTable::new(self.ids(), names, values).ok()
    }
}

/// Drops unusable patients and genes.
///
/// A patient is kept when it has a non-empty mask, a recurrence label and a
/// row in `gene_table`. A gene column is kept when none of the kept patients
/// is missing it. Input order is preserved.
pub fn screen_cohort(records: Vec<PatientRecord>, gene_table: &GeneExpressionTable) -> Result<CohortDataset> {
    screen_with_provenance(records, gene_table, Provenance::real(), None)
}

pub fn screen_with_provenance(
    records: Vec<PatientRecord>,
    gene_table: &GeneExpressionTable,
    provenance: Provenance,
    deep_feature_names: Option<Vec<String>>,
) -> Result<CohortDataset> {
    let row_index: HashMap<&str, usize> = gene_table
        .patient_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let kept: Vec<(PatientRecord, usize)> = records
        .into_iter()
        .filter_map(|rec| {
            let has_mask = rec.mask.as_ref().is_some_and(|m| !m.is_empty());
            let row = row_index.get(rec.id.as_str()).copied();
            match (has_mask, rec.recurrence, row) {
                (true, Some(_), Some(row)) => Some((rec, row)),
                _ => None,
            }
        })
        .collect();
    if kept.is_empty() {
        return Err(GgrError::EmptyCohort);
    }

    let complete: Vec<usize> = (0..gene_table.gene_names.len())
        .filter(|&g| kept.iter().all(|(_, row)| gene_table.values[[*row, g]].is_some()))
        .collect();

    // Informative indices refer to the input columns; remap to the kept ones.
    let mut provenance = provenance;
    provenance.informative_genes = provenance
        .informative_genes
        .iter()
        .filter_map(|g| complete.iter().position(|c| c == g))
        .collect();

    let gene_names = complete.iter().map(|&g| gene_table.gene_names[g].clone()).collect();
    let records = kept
        .into_iter()
        .map(|(mut rec, row)| {
            rec.genes = Some(
                complete
                    .iter()
                    .map(|&g| gene_table.values[[row, g]].expect("complete column"))
                    .collect(),
            );
            rec
        })
        .collect();

    Ok(CohortDataset {
        records,
        gene_names,
        provenance,
        deep_feature_names,
    })
}

const PATIENTS_FILE: &str = "patients.csv";
const GENES_FILE: &str = "genes.csv";
const DEEP_FILE: &str = "deep_features.csv";
const PROVENANCE_FILE: &str = "provenance.toml";

fn volume_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join("volumes").join(format!("{id}.ggrvol"))
}

fn mask_path(dir: &Path, id: &str) -> std::path::PathBuf {
    dir.join("masks").join(format!("{id}.ggrmask"))
}

/// Writes a cohort directory:
///
/// ```text
/// patients.csv          id,recurrence   (recurrence 0/1, empty if unknown)
/// genes.csv             gene table
/// deep_features.csv     optional deep features
/// provenance.toml
/// volumes/<id>.ggrvol
/// masks/<id>.ggrmask    absent when the patient has no segmentation
/// ```
pub fn save_cohort_dir(dir: impl AsRef<Path>, cohort: &CohortDataset) -> Result<()> {
    let dir = dir.as_ref();
    for sub in ["volumes", "masks"] {
        fs::create_dir_all(dir.join(sub)).map_err(|e| GgrError::io(dir.join(sub), e))?;
    }
    let mut w = csv::Writer::from_path(dir.join(PATIENTS_FILE))?;
    w.write_record(["id", "recurrence"])?;
    for rec in &cohort.records {
        let label = match rec.recurrence {
            Some(true) => "1",
            Some(false) => "0",
            None => "",
        };
        w.write_record([rec.id.as_str(), label])?;
        save_volume(volume_path(dir, &rec.id), &rec.volume)?;
        if let Some(mask) = &rec.mask {
            save_mask(mask_path(dir, &rec.id), mask)?;
        }
    }
    w.flush().map_err(|e| GgrError::io(dir.join(PATIENTS_FILE), e))?;
    save_gene_table(dir.join(GENES_FILE), &cohort.gene_table())?;
    if let Some(deep) = cohort.deep_matrix() {
        deep.write_csv(dir.join(DEEP_FILE))?;
    }
    let prov = toml::to_string(&cohort.provenance).map_err(|e| GgrError::Config(e.to_string()))?;
    fs::write(dir.join(PROVENANCE_FILE), prov).map_err(|e| GgrError::io(dir.join(PROVENANCE_FILE), e))?;
    Ok(())
}

/// Reads a cohort directory and screens it.
pub fn load_cohort_dir(dir: impl AsRef<Path>) -> Result<CohortDataset> {
    load_cohort_dir_with(dir, None)
}

/// As [`load_cohort_dir`], screening against `genes` instead of the
/// directory's own gene table when given.
pub fn load_cohort_dir_with(dir: impl AsRef<Path>, genes: Option<&Path>) -> Result<CohortDataset> {
    let dir = dir.as_ref();
    let mut rdr = csv::Reader::from_path(dir.join(PATIENTS_FILE))?;
    let deep = if dir.join(DEEP_FILE).exists() {
        Some(FeatureTable::read_csv(dir.join(DEEP_FILE))?)
    } else {
        None
    };
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let id = row[0].trim().to_string();
        let recurrence = match row.get(1).map(str::trim) {
            Some("1") => Some(true),
            Some("0") => Some(false),
            Some("") | None => None,
            Some(other) => {
                return Err(GgrError::format("patients csv", format!("bad recurrence `{other}`")))
            }
        };
        let volume = load_volume(volume_path(dir, &id))?;
        let mpath = mask_path(dir, &id);
        let mask = if mpath.exists() {
            let m = load_mask(&mpath)?;
            if m.dims() != volume.dims() {
                return Err(GgrError::Shape(format!("mask dims differ from volume for `{id}`")));
            }
            Some(m)
        } else {
            None
        };
        let deep_features = deep
            .as_ref()
            .and_then(|d| d.row_of(&id).map(|r| d.values.row(r).to_vec()));
        records.push(PatientRecord {
            id,
            volume,
            mask,
            genes: None,
            recurrence,
            deep_features,
        });
    }
    let table = load_gene_table(genes.map_or_else(|| dir.join(GENES_FILE), Path::to_path_buf))?;
    let provenance = match fs::read_to_string(dir.join(PROVENANCE_FILE)) {
        Ok(text) => toml::from_str(&text).map_err(|e| GgrError::Config(e.to_string()))?,
        Err(_) => Provenance::real(),
    };
    let deep_names = deep.map(|d| d.names);
    let mut cohort = screen_with_provenance(records, &table, provenance, deep_names)?;
    if cohort.records.iter().any(|r| r.deep_features.is_none()) {
        cohort.deep_feature_names = None;
        for r in &mut cohort.records {
            r.deep_features = None;
        }
    }
    Ok(cohort)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn record(id: &str, with_mask: bool, label: Option<bool>) -> PatientRecord {
        let volume = CtVolume::new(Array3::from_elem((1, 2, 2), -500), [1.0; 3]).unwrap();
        let mask = with_mask.then(|| TumorMask::new(Array3::from_elem((1, 2, 2), 1)).unwrap());
        PatientRecord {
            id: id.into(),
            volume,
            mask,
            genes: None,
            recurrence: label,
            deep_features: None,
        }
    }

    fn table(csv: &str) -> GeneExpressionTable {
        GeneExpressionTable::from_reader(csv.as_bytes()).unwrap()
    }

    #[test]
    fn drops_patient_without_mask() {
        let recs = vec![record("a", true, Some(true)), record("b", false, Some(false)), record("c", true, Some(false))];
        let t = table("id,G1\na,1\nb,2\nc,3\n");
        let ds = screen_cohort(recs, &t).unwrap();
        assert_eq!(ds.ids(), vec!["a", "c"]);
    }

    #[test]
    fn drops_gene_with_missing_cell() {
        let recs = vec![record("a", true, Some(true)), record("b", true, Some(false))];
        let t = table("id,G1,G2,G3,G4\na,1,2,NA,4\nb,1,2,3,4\n");
        let ds = screen_cohort(recs, &t).unwrap();
        assert_eq!(ds.gene_names, vec!["G1", "G2", "G4"]);
        assert_eq!(ds.records[0].genes.as_deref(), Some(&[1.0, 2.0, 4.0][..]));
    }

    #[test]
    fn missing_cell_of_dropped_patient_is_ignored() {
        let recs = vec![record("a", true, None), record("b", true, Some(false))];
        let t = table("id,G1,G2\na,NA,1\nb,1,2\n");
        let ds = screen_cohort(recs, &t).unwrap();
        assert_eq!(ds.gene_names, vec!["G1", "G2"]);
    }

    #[test]
    fn drops_unlabelled_and_unknown() {
        let recs = vec![record("a", true, None), record("z", true, Some(true)), record("b", true, Some(true))];
        let t = table("id,G1\na,1\nb,2\n");
        assert_eq!(screen_cohort(recs, &t).unwrap().ids(), vec!["b"]);
    }

    #[test]
    fn empty_after_screening() {
        let t = table("id,G1\na,1\n");
        assert!(matches!(
            screen_cohort(vec![record("a", false, Some(true))], &t),
            Err(GgrError::EmptyCohort)
        ));
    }

    #[test]
    fn screening_is_idempotent() {
        let recs = vec![record("a", true, Some(true)), record("b", false, Some(false)), record("c", true, Some(false))];
        let t = table("id,G1,G2\na,1,NA\nb,2,3\nc,3,1\n");
        let once = screen_cohort(recs, &t).unwrap();
        let twice = screen_cohort(once.records.clone(), &once.gene_table()).unwrap();
        assert_eq!(once, twice);
    }
}
