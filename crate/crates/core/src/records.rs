//! Line-delimited record formats shared by every pipeline stage.
//!
//! Each output file may start with a header line `{"_header": {...}}` that
//! echoes the run configuration; readers skip it.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::delex::{canonical_pattern, Binding, GeneralizedChain};
use crate::error::{Error, Result};
use crate::index::Fact;
use crate::retrieval::ChainCandidate;
use crate::text::Analyzer;

pub const HEADER_KEY: &str = "_header";

pub fn chain_id(question_id: &str, rank: usize) -> String {
    format!("{question_id}#{rank}")
}

/// One retrieved chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub question_id: String,
    pub chain_id: String,
    pub f1_id: String,
    pub f1_text: String,
    pub f2_id: String,
    pub f2_text: String,
    pub hypothesis: String,
    pub score_f1: f64,
    pub score_f2: f64,
    pub combined_score: f64,
}

impl ChainRecord {
    pub fn from_candidate(question_id: &str, rank: usize, chain: &ChainCandidate) -> Self {
        Self {
            question_id: question_id.to_string(),
            chain_id: chain_id(question_id, rank),
            f1_id: chain.f1.id.clone(),
            f1_text: chain.f1.text.clone(),
            f2_id: chain.f2.id.clone(),
            f2_text: chain.f2.text.clone(),
            hypothesis: chain.hypothesis.clone(),
            score_f1: chain.score_f1,
            score_f2: chain.score_f2,
            combined_score: chain.combined_score,
        }
    }

    pub fn to_candidate(&self, analyzer: &Analyzer) -> ChainCandidate {
        let mut f1 = Fact::new(&self.f1_text, analyzer);
        f1.id = self.f1_id.clone();
        let mut f2 = Fact::new(&self.f2_text, analyzer);
        f2.id = self.f2_id.clone();
        ChainCandidate {
            f1,
            f2,
            hypothesis: self.hypothesis.clone(),
            score_f1: self.score_f1,
            score_f2: self.score_f2,
            combined_score: self.combined_score,
        }
    }
}

/// A generalized chain as written by the `grc` stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GrcRecord {
    pub chain_id: String,
    pub template_f1: String,
    pub template_f2: String,
    pub template_h: String,
    pub bindings: Vec<Binding>,
    pub pattern: String,
}

impl GrcRecord {
    pub fn new(chain_id: &str, grc: &GeneralizedChain) -> Self {
        Self {
            chain_id: chain_id.to_string(),
            template_f1: grc.template_f1.to_string(),
            template_f2: grc.template_f2.to_string(),
            template_h: grc.template_h.to_string(),
            bindings: grc.named_bindings(),
            pattern: canonical_pattern(grc),
        }
    }
}

/// Parses every record of a line-delimited file. Blank lines and header
/// lines are skipped; a bad line fails with its 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_jsonl_from(file, path)
}

pub fn read_jsonl_from<T: DeserializeOwned, R: Read>(reader: R, path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for_each_jsonl_line(reader, path, |line_no, value| {
        let record = serde_json::from_value(value)
            .map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        out.push(record);
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn for_each_jsonl_line<R: Read>(
    reader: R,
    path: &Path,
    mut f: impl FnMut(usize, serde_json::Value) -> Result<()>,
) -> Result<()> {
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(trimmed)
            .map_err(|e| Error::malformed(path, line_no, e.to_string()))?;
        if value.get(HEADER_KEY).is_some() {
            continue;
        }
        f(line_no, value)?;
    }
    Ok(())
}

/// Buffered line-delimited writer.
pub struct JsonlWriter<W: Write> {
    out: BufWriter<W>,
}

impl JsonlWriter<File> {
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(file))
    }
}

impl<W: Write> JsonlWriter<W> {
    pub fn new(inner: W) -> Self {
        Self {
            out: BufWriter::new(inner),
        }
    }

    pub fn header<H: Serialize>(&mut self, header: &H) -> Result<()> {
        let value = serde_json::json!({ HEADER_KEY: header });
        self.write(&value)
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)
            .map_err(|e| Error::InvalidArgument(format!("serialize: {e}")))?;
        self.out
            .write_all(b"\n")
            .map_err(|e| Error::io(Path::new("<output>"), e))
    }

    pub fn finish(mut self) -> Result<W> {
        self.out
            .flush()
            .map_err(|e| Error::io(Path::new("<output>"), e))?;
        self.out
            .into_inner()
            .map_err(|e| Error::io(Path::new("<output>"), e.into_error()))
    }
}
