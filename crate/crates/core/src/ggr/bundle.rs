//! Pipeline bundle, little-endian throughout:
//!
//! ```text
//! b"GGRPIPE"                7-byte magic
//! u32 version               = 1
//! u8  mode                  index into Mode::ALL
//! u32 width x3              full handcrafted, deep and gene widths
//! index list x3             handcrafted, deep, gene selections
//! string list               selected gene names
//! scaler                    feature scaler
//! u8  has_estimators        0 or 1; if 1:
//!     scaler                target scaler
//!     f64 list              per-gene training MSE (raw units)
//!     u32 count, count x blob
//! scaler                    classifier gene scaler
//! blob                      classifier
//! ```
//!
//! An index list is `u32 len` then `len` u32 values; a string list is
//! `u32 len` then `len` x (`u32 bytes`, UTF-8); an f64 list is `u32 len` then
//! `len` f64; a scaler is an f64 list of means then an f64 list of SDs; a
//! blob is `u64 bytes` followed by a network in the `GGRNET` format.

use std::path::Path;

use super::{GeneEstimators, GgrPipeline, InputWidths, Mode, Selections, Standardizer};
use crate::error::{GgrError, Result};
use crate::net::{decode_network, encode_network, DenseNetwork};

const MAGIC: &[u8; 7] = b"GGRPIPE";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn indices(&mut self, v: &[usize]) {
        self.u32(v.len());
        v.iter().for_each(|&i| self.u32(i));
    }

    fn floats(&mut self, v: &[f64]) {
        self.u32(v.len());
        v.iter().for_each(|x| self.0.extend_from_slice(&x.to_le_bytes()));
    }

    fn strings(&mut self, v: &[String]) {
        self.u32(v.len());
        for s in v {
            self.u32(s.len());
            self.0.extend_from_slice(s.as_bytes());
        }
    }

    fn scaler(&mut self, s: &Standardizer) {
        self.floats(&s.mean);
        self.floats(&s.sd);
    }

    fn network(&mut self, net: &DenseNetwork) {
        let bytes = encode_network(net);
        self.0.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
        self.0.extend_from_slice(&bytes);
    }
}

pub fn encode_pipeline(p: &GgrPipeline) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.u32(VERSION as usize);
    w.0.push(p.mode.code());
    for v in [p.widths.handcrafted, p.widths.deep, p.widths.genes] {
        w.u32(v);
    }
    w.indices(&p.selections.handcrafted);
    w.indices(&p.selections.deep);
    w.indices(&p.selections.genes);
    w.strings(&p.gene_names);
    w.scaler(&p.feature_scaler);
    match &p.estimators {
        Some(e) => {
            w.0.push(1);
            w.scaler(&e.target_scaler);
            w.floats(&e.train_mse_raw);
            w.u32(e.networks.len());
            e.networks.iter().for_each(|n| w.network(n));
        }
        None => w.0.push(0),
    }
    w.scaler(&p.gene_scaler);
    w.network(&p.classifier);
    w.0
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| GgrError::format("pipeline", "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    /// Length prefix, bounded by the bytes left at `unit` bytes per item.
    fn len(&mut self, unit: usize) -> Result<usize> {
        let n = self.u32()?;
        if n.saturating_mul(unit) > self.bytes.len() - self.pos {
            return Err(GgrError::format("pipeline", "truncated"));
        }
        Ok(n)
    }

    fn indices(&mut self) -> Result<Vec<usize>> {
        let n = self.len(4)?;
        (0..n).map(|_| self.u32()).collect()
    }

    fn floats(&mut self) -> Result<Vec<f64>> {
        let n = self.len(8)?;
        (0..n).map(|_| Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))).collect()
    }

    fn strings(&mut self) -> Result<Vec<String>> {
        let n = self.len(4)?;
        (0..n)
            .map(|_| {
                let len = self.u32()?;
                String::from_utf8(self.take(len)?.to_vec()).map_err(|e| GgrError::format("pipeline", e.to_string()))
            })
            .collect()
    }

    fn scaler(&mut self) -> Result<Standardizer> {
        let mean = self.floats()?;
        let sd = self.floats()?;
        if mean.len() != sd.len() {
            return Err(GgrError::format("pipeline", "scaler mean/sd lengths differ"));
        }
        Ok(Standardizer { mean, sd })
    }

    fn network(&mut self) -> Result<DenseNetwork> {
        let len = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        let len = usize::try_from(len).map_err(|_| GgrError::format("pipeline", "network too large"))?;
        decode_network(self.take(len)?)
    }
}

pub fn decode_pipeline(bytes: &[u8]) -> Result<GgrPipeline> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(7)? != MAGIC {
        return Err(GgrError::format("pipeline", "bad magic"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(GgrError::format("pipeline", format!("unsupported version {version}")));
    }
    let code = r.u8()?;
    let mode = Mode::from_code(code).ok_or_else(|| GgrError::format("pipeline", format!("mode code {code}")))?;
    let widths = InputWidths { handcrafted: r.u32()?, deep: r.u32()?, genes: r.u32()? };
    let selections = Selections { handcrafted: r.indices()?, deep: r.indices()?, genes: r.indices()? };
    let gene_names = r.strings()?;
    let feature_scaler = r.scaler()?;
    let estimators = match r.u8()? {
        0 => None,
        1 => {
            let target_scaler = r.scaler()?;
            let train_mse_raw = r.floats()?;
            let n = r.len(8)?;
            let networks = (0..n).map(|_| r.network()).collect::<Result<Vec<_>>>()?;
            Some(GeneEstimators { networks, target_scaler, train_mse_raw })
        }
        t => return Err(GgrError::format("pipeline", format!("estimator tag {t}"))),
    };
    let gene_scaler = r.scaler()?;
    let classifier = r.network()?;
    if r.pos != bytes.len() {
        return Err(GgrError::format("pipeline", format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let p = GgrPipeline { mode, widths, selections, gene_names, feature_scaler, estimators, gene_scaler, classifier };
    validate(&p)?;
    Ok(p)
}

fn validate(p: &GgrPipeline) -> Result<()> {
    let bad = |d: &str| Err(GgrError::format("pipeline", d.to_string()));
    let s = &p.selections;
    if s.handcrafted.iter().any(|&i| i >= p.widths.handcrafted)
        || s.deep.iter().any(|&i| i >= p.widths.deep)
        || s.genes.iter().any(|&i| i >= p.widths.genes)
    {
        return bad("selection index out of range");
    }
    if p.gene_names.len() != s.genes.len() {
        return bad("gene names do not match the gene selection");
    }
    if p.feature_scaler.width() != s.handcrafted.len() + s.deep.len() {
        return bad("feature scaler width");
    }
    match (&p.estimators, p.mode.is_ggr()) {
        (Some(e), true) => {
            if e.networks.len() != s.genes.len() || e.target_scaler.width() != s.genes.len() {
                return bad("regressor count differs from the selected gene count");
            }
        }
        (None, false) => {}
        _ => return bad("estimators present for the wrong mode"),
    }
    Ok(())
}

pub fn save_pipeline(p: &GgrPipeline, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_pipeline(p)).map_err(|e| GgrError::io(path, e))
}

pub fn load_pipeline(path: impl AsRef<Path>) -> Result<GgrPipeline> {
    let path = path.as_ref();
    decode_pipeline(&std::fs::read(path).map_err(|e| GgrError::io(path, e))?)
}
