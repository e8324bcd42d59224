//! Run records: raw per-task measurements, aggregate tables and the
//! checkpoint journal that makes sweeps resumable.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use hypermatch_core::fmt::{f17, SCHEMA_LINE};

use crate::config::ExperimentConfig;
use crate::error::{HResult, HarnessError};

/// JSON has no NaN or infinities; those are stored as the strings "nan",
/// "inf" and "-inf".
mod floats {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum F {
        Num(f64),
        Text(String),
    }

    pub(super) fn wrap(x: f64) -> F {
        if x.is_finite() {
            F::Num(x)
        } else {
            F::Text(hypermatch_core::fmt::f17(x))
        }
    }

    pub(super) fn unwrap<E: serde::de::Error>(f: F) -> Result<f64, E> {
        match f {
            F::Num(x) => Ok(x),
            F::Text(s) => match s.as_str() {
                "nan" | "inf" | "-inf" => Ok(hypermatch_core::fmt::parse_f64(&s).unwrap()),
                _ => Err(E::custom(format!("not a number: {s}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| wrap(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Vec::<F>::deserialize(d)?.into_iter().map(unwrap).collect()
    }
}

mod float_rows {
    use super::floats::{unwrap, wrap, F};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|r| r.iter().map(|&x| wrap(x)).collect::<Vec<_>>()).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        Vec::<Vec<F>>::deserialize(d)?.into_iter().map(|r| r.into_iter().map(unwrap).collect()).collect()
    }
}

/// Measurements of one (n, replica) task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskResult {
    pub index: usize,
    pub n_index: usize,
    pub replica: usize,
    #[serde(with = "floats")]
    pub values: Vec<f64>,
}

/// A named table of numeric columns, written as one CSV file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    #[serde(with = "float_rows")]
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{SCHEMA_LINE}\n{}\n", self.columns.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&x| f17(x)).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub tasks: Vec<TaskResult>,
    pub tables: Vec<Table>,
    pub wall_clock_seconds: f64,
}

impl RunRecord {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serialises")
    }

    pub fn from_json(text: &str) -> HResult<Self> {
        let r: RunRecord = serde_json::from_str(text).map_err(|e| HarnessError::Record(e.to_string()))?;
        for t in &r.tables {
            if t.rows.iter().any(|row| row.len() != t.columns.len()) {
                return Err(HarnessError::Record(format!("table {} has ragged rows", t.name)));
            }
        }
        if r.config_hash != r.config.hash() {
            return Err(HarnessError::Record("config hash does not match the config".into()));
        }
        Ok(r)
    }

    pub fn load(path: &Path) -> HResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Append-only journal of completed tasks, one JSON object per line. Lines
/// from another configuration or a torn final write are ignored.
pub struct Checkpoint {
    file: File,
    hash: String,
}

#[derive(Serialize, Deserialize)]
struct Line {
    hash: String,
    #[serde(flatten)]
    task: TaskResult,
}

impl Checkpoint {
    pub fn open(path: &Path, hash: &str) -> HResult<(Self, Vec<TaskResult>)> {
        let mut done = Vec::new();
        if path.exists() {
            let f = File::open(path).map_err(|e| HarnessError::io(path, e))?;
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| HarnessError::io(path, e))?;
                if let Ok(l) = serde_json::from_str::<Line>(&line) {
                    if l.hash == hash {
                        done.push(l.task);
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(|e| HarnessError::io(path, e))?;
        Ok((Self { file, hash: hash.to_string() }, done))
    }

    pub fn append(&mut self, task: &TaskResult) -> std::io::Result<()> {
        let line = serde_json::to_string(&Line { hash: self.hash.clone(), task: task.clone() }).expect("task serialises");
        writeln!(self.file, "{line}")?;
        self.file.flush()
    }
}
