//! File formats: class, matrix and distribution JSON, dataset and transcript
//! CSV, answers JSON.

use std::fs::{self, File};
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use ldpgamma_core::ldp::{Answers, TranscriptMessage};
use ldpgamma_core::model::{ConceptClass, Dataset, IndexedMatrix, LabeledDistribution};
use ldpgamma_core::zoo;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Pretty JSON with a trailing newline, to `path` or standard output.
pub fn write_json<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => io::stdout().write_all(text.as_bytes()).context("writing to standard output"),
    }
}

/// A zoo spec, or a path to a class JSON file when one exists.
pub fn load_class(spec: &str) -> Result<ConceptClass> {
    let path = Path::new(spec);
    if path.is_file() {
        return read_json(path);
    }
    zoo::parse(spec).with_context(|| format!("building class {spec:?}"))
}

pub fn load_matrix(path: &Path) -> Result<IndexedMatrix> {
    read_json(path)
}

pub fn load_distribution(path: &Path) -> Result<LabeledDistribution> {
    read_json(path)
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRow {
    point: String,
    label: i8,
}

/// Reads a `point,label` CSV over the given domain.
pub fn read_dataset(path: &Path, domain: &[String]) -> Result<Dataset> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let mut records = Vec::new();
    for row in reader.deserialize::<DatasetRow>() {
        let row = row.with_context(|| format!("reading {}", path.display()))?;
        records.push((row.point, row.label));
    }
    Ok(Dataset::from_named(domain.to_vec(), &records)?)
}

pub fn write_dataset(path: &Path, data: &Dataset) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for &(x, y) in data.records() {
        writer.serialize(DatasetRow { point: data.domain()[x].clone(), label: y })?;
    }
    writer.flush()?;
    Ok(())
}

/// One `record_index,message_symbol` row per message.
pub fn write_transcript(path: &Path, transcript: &[TranscriptMessage]) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut writer = csv::Writer::from_writer(file);
    writer.write_record(["record_index", "message_symbol"])?;
    for (i, msg) in transcript.iter().enumerate() {
        writer.write_record([i.to_string(), msg.to_string()])?;
    }
    writer.flush()?;
    Ok(())
}

/// `{query_label: value}` in query order.
pub fn write_answers(path: &Path, answers: &Answers) -> Result<()> {
    let map: serde_json::Map<String, serde_json::Value> =
        answers.labels.iter().cloned().zip(answers.values.iter().map(|v| serde_json::json!(v))).collect();
    write_json(Some(path), &map)
}
