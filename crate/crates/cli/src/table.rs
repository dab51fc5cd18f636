use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::config::{num, ExperimentConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "nan".into(),
            Cell::Num(x) => num(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n)
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        Cell::Num(x.unwrap_or(f64::NAN))
    }
}

/// Rectangular table with `#`-prefixed metadata lines.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: Vec<(String, String)>,
}

impl ResultTable {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        ResultTable {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            metadata: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: impl Into<String>, value: impl ToString) {
        self.metadata.push((key.into(), value.to_string()));
    }

    /// Builds a table from equally long numeric columns.
    pub fn from_columns(names: &[String], columns: &[&[f64]]) -> Self {
        let mut t = ResultTable::new(names.iter().cloned());
        let len = columns.first().map_or(0, |c| c.len());
        for k in 0..len {
            t.push(columns.iter().map(|c| Cell::Num(c[k])).collect());
        }
        t
    }

    pub fn render(&self, cfg: &ExperimentConfig) -> String {
        let mut out = Vec::new();
        writeln!(out, "# heterosync {VERSION}").unwrap();
        writeln!(out, "# config_hash: {}", config_hash(cfg)).unwrap();
        writeln!(out, "# seed: {}", cfg.seed).unwrap();
        writeln!(out, "# experiment: {}", cfg.experiment.name()).unwrap();
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}: {v}").unwrap();
        }
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.columns).unwrap();
            for row in &self.rows {
                w.write_record(row.iter().map(Cell::render)).unwrap();
            }
            w.flush().unwrap();
        }
        String::from_utf8(out).expect("table output is utf-8")
    }

    pub fn write(&self, cfg: &ExperimentConfig, path: &Path) -> std::io::Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, self.render(cfg))
    }
}

/// First 16 hex digits of the SHA-256 of the canonical config text.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let digest = Sha256::digest(cfg.echo().as_bytes());
    hex::encode(&digest[..8])
}
