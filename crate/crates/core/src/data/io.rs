//! JSON-lines dataset files and CSV interaction edge lists.
//!
//! Dataset layout: line 1 is the vocabulary header
//! `{"num_diag":..,"num_proc":..,"num_med":..}`; every following line is one
//! patient `{"patient_id":..,"split":"train"|"val"|"test","visits":[{"diag":[..],"proc":[..],"med":[..]}]}`.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{DataError, Dataset, DdiMatrix, EntityKind, EntityVocab, PatientRecord, Split, Visit};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VisitLine {
    diag: Vec<usize>,
    proc: Vec<usize>,
    med: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatientLine {
    patient_id: String,
    split: Split,
    visits: Vec<VisitLine>,
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| DataError::io(path, e))?;
    let mut lines = BufReader::new(file).lines();

    let header = match lines.next() {
        Some(line) => line.map_err(|e| DataError::io(path, e))?,
        None => {
            return Err(DataError::Parse {
                line: 1,
                message: "missing vocabulary header".into(),
            })
        }
    };
    let vocab: EntityVocab = serde_json::from_str(&header).map_err(|e| DataError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let vocab = EntityVocab::new(vocab.num_diag, vocab.num_proc, vocab.num_med).map_err(|e| {
        DataError::Parse {
            line: 1,
            message: e.to_string(),
        }
    })?;

    let mut patients = Vec::new();
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line.map_err(|e| DataError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PatientLine = serde_json::from_str(&line).map_err(|e| DataError::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if record.visits.is_empty() {
            return Err(DataError::Parse {
                line: line_no,
                message: format!("patient {} has an empty visit list", record.patient_id),
            });
        }
        let mut visits = Vec::with_capacity(record.visits.len());
        for v in record.visits {
            let visit = Visit::new(v.diag, v.proc, v.med).map_err(|e| DataError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if let Some((kind, id)) = visit.check_bounds(&vocab) {
                return Err(DataError::OutOfBounds {
                    line: line_no,
                    kind,
                    id,
                    size: vocab.size(kind),
                });
            }
            visits.push(visit);
        }
        patients.push(PatientRecord::new(record.patient_id, record.split, visits)?);
    }
    Ok(Dataset { vocab, patients })
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| DataError::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io_err = |e: std::io::Error| DataError::io(path, e);

    let header = serde_json::to_string(&dataset.vocab).expect("vocab serializes");
    writeln!(out, "{header}").map_err(io_err)?;
    for p in &dataset.patients {
        let line = PatientLine {
            patient_id: p.patient_id.clone(),
            split: p.split,
            visits: p
                .visits()
                .iter()
                .map(|v| VisitLine {
                    diag: v.ids(EntityKind::Diagnosis).to_vec(),
                    proc: v.ids(EntityKind::Procedure).to_vec(),
                    med: v.ids(EntityKind::Medication).to_vec(),
                })
                .collect(),
        };
        let text = serde_json::to_string(&line).expect("patient serializes");
        writeln!(out, "{text}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Reads `i,j` edge lines (`0 <= i < j < num_med`). Blank lines and lines
/// starting with `#` are ignored.
pub fn load_ddi(path: impl AsRef<Path>, num_med: usize) -> Result<DdiMatrix, DataError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| DataError::io(path, e))?;
    let mut edges = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parse_err = |message: String| DataError::Parse {
            line: line_no,
            message,
        };
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(format!("expected `i,j`, got `{line}`")))?;
        let i: usize = a
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad id `{a}`: {e}")))?;
        let j: usize = b
            .trim()
            .parse()
            .map_err(|e| parse_err(format!("bad id `{b}`: {e}")))?;
        if i >= j {
            return Err(parse_err(format!("edge must satisfy i < j, got {i},{j}")));
        }
        if j >= num_med {
            return Err(DataError::OutOfBounds {
                line: line_no,
                kind: EntityKind::Medication,
                id: j,
                size: num_med,
            });
        }
        edges.push((i, j));
    }
    DdiMatrix::from_edges(num_med, &edges)
}

pub fn save_ddi(ddi: &DdiMatrix, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let mut text = String::new();
    for (i, j) in ddi.edges() {
        text.push_str(&format!("{i},{j}\n"));
    }
    fs::write(path, text).map_err(|e| DataError::io(path, e))
}
