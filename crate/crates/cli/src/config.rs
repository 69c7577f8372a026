use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chainlab::records::JsonlWriter;
use chainlab::retrieval::RetrievalParams;
use chainlab::scoring::{Representation, ScorerSpec};
use serde::Serialize;

use crate::UsageError;

/// Everything needed to repeat a run; written as the header of each output.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub inputs: BTreeMap<&'static str, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub retrieval: Option<RetrievalParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scorer: Option<ScorerSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub representation: Option<Representation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stopwords: Option<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub options: BTreeMap<&'static str, serde_json::Value>,
    pub seed: u64,
}

impl RunConfig {
    pub fn new(subcommand: &'static str, seed: u64) -> Self {
        Self {
            tool: "chainlab",
            version: env!("CARGO_PKG_VERSION"),
            subcommand,
            inputs: BTreeMap::new(),
            output: None,
            retrieval: None,
            scorer: None,
            representation: None,
            stopwords: None,
            options: BTreeMap::new(),
            seed,
        }
    }

    /// Records an input path after checking that it exists.
    pub fn input(&mut self, name: &'static str, path: &Path) -> Result<()> {
        if !path.exists() {
            return Err(UsageError(format!("{name}: {} does not exist", path.display())).into());
        }
        self.inputs.insert(name, path.display().to_string());
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(UsageError(format!(
                    "output directory {} does not exist",
                    parent.display()
                ))
                .into());
            }
        }
        self.output = Some(path.display().to_string());
        Ok(())
    }

    pub fn option(&mut self, name: &'static str, value: impl Serialize) {
        self.options.insert(
            name,
            serde_json::to_value(value).expect("option values serialize"),
        );
    }

    /// Writes `records` to `path` behind a header line.
    pub fn write_records<T: Serialize>(&self, path: &Path, records: &[T]) -> Result<()> {
        let mut w = JsonlWriter::create(path)?;
        w.header(self)?;
        for r in records {
            w.write(r)?;
        }
        w.finish()
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    /// Writes a JSON report with the header embedded, to `path` or stdout.
    pub fn write_report<T: Serialize>(&self, path: Option<&PathBuf>, report: &T) -> Result<()> {
        let mut value = serde_json::to_value(report)?;
        if let serde_json::Value::Object(map) = &mut value {
            map.insert(
                chainlab::records::HEADER_KEY.to_string(),
                serde_json::to_value(self)?,
            );
        }
        let text = serde_json::to_string_pretty(&value)?;
        match path {
            Some(p) => {
                let mut f = File::create(p).with_context(|| format!("creating {}", p.display()))?;
                writeln!(f, "{text}")?;
            }
            None => println!("{text}"),
        }
        Ok(())
    }
}
