//! Labeled descriptor corpora: extraction, binary corpus files and CSV export.
//!
//! Binary layout (all integers little-endian):
//!
//! ```text
//! 8 bytes   magic "ELPCORP\0"
//! u32       format version (1)
//! u32       header length H
//! H bytes   UTF-8 JSON header {"params", "grid", "names", "provenance"}
//! u64       item count N
//! u64       dimension D
//! N times:  u32 label, u32 path length L, L bytes UTF-8 path, D x f64
//! ```

use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::descriptor::{length_of, Descriptor, DescriptorParams};
use crate::elp::elp_descriptor;
use crate::error::{Error, Result};
use crate::imaging::{GrayImage, SubImageGrid};
use crate::lbp::lbp_descriptor;

pub const CORPUS_MAGIC: &[u8; 8] = b"ELPCORP\0";
pub const CORPUS_VERSION: u32 = 1;

/// Extracts the configured descriptor from one image.
pub fn describe(img: &GrayImage, params: &DescriptorParams, grid: SubImageGrid) -> Result<Descriptor> {
    match params {
        DescriptorParams::Elp(p) => elp_descriptor(img, grid, p),
        DescriptorParams::Lbp(p) => lbp_descriptor(img, grid, p),
    }
}

/// Describes every image in parallel; output order follows input order.
pub fn extract_all(images: &[GrayImage], params: &DescriptorParams, grid: SubImageGrid) -> Result<Vec<Vec<f64>>> {
    images
        .par_iter()
        .map(|img| describe(img, params, grid).map(|d| d.values))
        .collect()
}

/// Descriptors of uniform configuration with identity labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    params: DescriptorParams,
    grid: SubImageGrid,
    vectors: Vec<Vec<f64>>,
    labels: Vec<usize>,
    names: Vec<String>,
    paths: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    params: DescriptorParams,
    grid: SubImageGrid,
    names: Vec<String>,
    #[serde(default)]
    provenance: serde_json::Value,
}

impl LabeledCorpus {
    pub fn new(
        params: DescriptorParams,
        grid: SubImageGrid,
        vectors: Vec<Vec<f64>>,
        labels: Vec<usize>,
        names: Vec<String>,
        paths: Vec<String>,
    ) -> Result<Self> {
        if vectors.len() != labels.len() || vectors.len() != paths.len() {
            return Err(Error::Argument(format!(
                "{} vectors, {} labels and {} paths do not line up",
                vectors.len(),
                labels.len(),
                paths.len()
            )));
        }
        let dim = length_of(&params, grid);
        if let Some(i) = vectors.iter().position(|v| v.len() != dim) {
            return Err(Error::Argument(format!(
                "descriptor {i} has length {}, expected {dim}",
                vectors[i].len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= names.len()) {
            return Err(Error::Argument(format!("label {l} has no identity name")));
        }
        Ok(LabeledCorpus {
            params,
            grid,
            vectors,
            labels,
            names,
            paths,
        })
    }

    /// Builds a corpus from descriptors sharing one configuration.
    pub fn from_descriptors(descriptors: Vec<Descriptor>, labels: Vec<usize>, names: Vec<String>) -> Result<Self> {
        let first = descriptors
            .first()
            .ok_or_else(|| Error::Argument("no descriptors supplied".into()))?;
        let (params, grid) = (first.params.clone(), first.grid);
        if descriptors.iter().any(|d| d.params != params || d.grid != grid) {
            return Err(Error::Argument("descriptors differ in method, parameters or grid".into()));
        }
        let paths = (0..descriptors.len()).map(|i| format!("#{i}")).collect();
        let vectors = descriptors.into_iter().map(|d| d.values).collect();
        LabeledCorpus::new(params, grid, vectors, labels, names, paths)
    }

    /// Same labels and metadata with replaced vectors (e.g. standardized ones).
    pub fn with_vectors(&self, vectors: Vec<Vec<f64>>) -> Result<Self> {
        if vectors.len() != self.vectors.len() || vectors.iter().any(|v| v.len() != self.dim()) {
            return Err(Error::Argument("replacement vectors do not match corpus shape".into()));
        }
        Ok(LabeledCorpus {
            vectors,
            ..self.clone()
        })
    }

    /// Sub-corpus of the given item indices, in that order.
    pub fn select(&self, indices: &[usize]) -> LabeledCorpus {
        LabeledCorpus {
            params: self.params.clone(),
            grid: self.grid,
            vectors: indices.iter().map(|&i| self.vectors[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            names: self.names.clone(),
            paths: indices.iter().map(|&i| self.paths[i].clone()).collect(),
        }
    }

    pub fn params(&self) -> &DescriptorParams {
        &self.params
    }

    pub fn grid(&self) -> SubImageGrid {
        self.grid
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn paths(&self) -> &[String] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        length_of(&self.params, self.grid)
    }

    /// Number of distinct labels present.
    pub fn n_classes_present(&self) -> usize {
        let mut seen = vec![false; self.names.len()];
        self.labels.iter().for_each(|&l| seen[l] = true);
        seen.iter().filter(|&&s| s).count()
    }

    pub fn write_binary(&self, mut w: impl Write, provenance: &serde_json::Value) -> Result<()> {
        let header = serde_json::to_vec(&Header {
            params: self.params.clone(),
            grid: self.grid,
            names: self.names.clone(),
            provenance: provenance.clone(),
        })
        .map_err(|e| Error::Format(e.to_string()))?;
        let mut buf = Vec::with_capacity(32 + header.len() + self.len() * (8 * self.dim() + 40));
        buf.extend_from_slice(CORPUS_MAGIC);
        buf.extend_from_slice(&CORPUS_VERSION.to_le_bytes());
        buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
        buf.extend_from_slice(&header);
        buf.extend_from_slice(&(self.len() as u64).to_le_bytes());
        buf.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for ((v, &label), path) in self.vectors.iter().zip(&self.labels).zip(&self.paths) {
            buf.extend_from_slice(&(label as u32).to_le_bytes());
            buf.extend_from_slice(&(path.len() as u32).to_le_bytes());
            buf.extend_from_slice(path.as_bytes());
            for x in v {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&buf).map_err(|e| Error::io("<corpus stream>", e))
    }

    /// Reads a binary corpus, returning it with its provenance record.
    pub fn read_binary(mut r: impl Read) -> Result<(LabeledCorpus, serde_json::Value)> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes).map_err(|e| Error::io("<corpus stream>", e))?;
        let mut cur = Cursor::new(&bytes);
        if cur.take(8)? != CORPUS_MAGIC {
            return Err(Error::Format("not a descriptor corpus (bad magic)".into()));
        }
        let version = cur.u32()?;
        if version != CORPUS_VERSION {
            return Err(Error::Format(format!("unsupported corpus version {version}")));
        }
        let header_len = cur.u32()? as usize;
        let header: Header =
            serde_json::from_slice(cur.take(header_len)?).map_err(|e| Error::Format(format!("corpus header: {e}")))?;
        let n = cur.u64()? as usize;
        let dim = cur.u64()? as usize;
        let mut vectors = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        let mut paths = Vec::with_capacity(n);
        for _ in 0..n {
            labels.push(cur.u32()? as usize);
            let len = cur.u32()? as usize;
            let path = std::str::from_utf8(cur.take(len)?).map_err(|e| Error::Format(e.to_string()))?;
            paths.push(path.to_string());
            vectors.push(cur.f64s(dim)?);
        }
        if !cur.is_done() {
            return Err(Error::Format("trailing bytes after corpus items".into()));
        }
        let corpus = LabeledCorpus::new(header.params, header.grid, vectors, labels, header.names, paths)?;
        Ok((corpus, header.provenance))
    }

    pub fn save(&self, path: impl AsRef<Path>, provenance: &serde_json::Value) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_binary(std::io::BufWriter::new(file), provenance)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(LabeledCorpus, serde_json::Value)> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        LabeledCorpus::read_binary(std::io::BufReader::new(file))
    }

    /// CSV with `# ` provenance comment lines, a `path,label,v0..` header and
    /// one row per item; `label` is the identity name.
    pub fn write_csv(&self, mut w: impl Write, provenance: &serde_json::Value) -> Result<()> {
        let mut out = String::new();
        out.push_str("# provenance: ");
        out.push_str(&provenance.to_string());
        out.push('\n');
        out.push_str("path,label");
        for d in 0..self.dim() {
            out.push_str(&format!(",v{d}"));
        }
        out.push('\n');
        for ((v, &label), path) in self.vectors.iter().zip(&self.labels).zip(&self.paths) {
            out.push_str(&csv_field(path));
            out.push(',');
            out.push_str(&csv_field(&self.names[label]));
            for x in v {
                out.push(',');
                out.push_str(&x.to_string());
            }
            out.push('\n');
        }
        w.write_all(out.as_bytes()).map_err(|e| Error::io("<csv stream>", e))
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Cursor { bytes, pos: 0 }
    }

    pub(crate) fn is_done(&self) -> bool {
        self.pos == self.bytes.len()
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }
}
