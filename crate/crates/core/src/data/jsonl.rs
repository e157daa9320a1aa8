use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::{tokenize, LabeledExample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoadReport {
    pub examples: Vec<LabeledExample>,
    /// 1-based line numbers that were skipped.
    pub malformed_lines: Vec<usize>,
}

impl LoadReport {
    pub fn malformed(&self) -> usize {
        self.malformed_lines.len()
    }
}

#[derive(Deserialize)]
struct Row {
    text: String,
    label: i64,
}

fn parse_line(line: &str) -> std::result::Result<LabeledExample, String> {
    let row: Row = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if row.label < 0 {
        return Err(format!("label must be non-negative, got {}", row.label));
    }
    if tokenize(&row.text).is_empty() {
        return Err("text is empty after normalization".into());
    }
    Ok(LabeledExample {
        text: row.text,
        label: row.label as usize,
    })
}

/// Load a JSONL dataset in file order. Blank lines are ignored. With
/// `strict`, the first malformed line is an error; otherwise malformed lines
/// are skipped and counted.
pub fn load_jsonl(path: impl AsRef<Path>, strict: bool) -> Result<LoadReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    let mut malformed_lines = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_line(&line) {
            Ok(ex) => examples.push(ex),
            Err(message) if strict => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message,
                })
            }
            Err(_) => malformed_lines.push(idx + 1),
        }
    }
    Ok(LoadReport {
        examples,
        malformed_lines,
    })
}

pub fn write_jsonl(path: impl AsRef<Path>, examples: &[LabeledExample]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for ex in examples {
        let line = serde_json::to_string(ex).expect("labeled example serializes");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
