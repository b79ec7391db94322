//! CSV tables with `# key=value` header lines, and the per-sweep manifest.

use crate::error::{HarnessError, Result};
use mpemba_core::qudit_sim::ProductKind;
use mpemba_core::trace::{AsymmetryTrace, Estimator, Observable, TraceMeta};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));
pub const MANIFEST: &str = "manifest.csv";
pub const TRACE_COLUMNS: [&str; 3] = ["t", "value", "error"];

/// Shortest round-trip representation, so equal values give equal bytes.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table { name: name.into(), meta: Vec::new(), columns: columns.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.to_string(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn from_trace(engine: &str, trace: &AsymmetryTrace) -> Self {
        let m = &trace.meta;
        let name = format!("{engine}_{}_{}_theta{}_na{}.csv", m.observable.as_str(), m.estimator.as_str(), m.theta, m.n_a);
        let mut t = Table::new(name, &TRACE_COLUMNS)
            .meta("observable", m.observable.as_str())
            .meta("estimator", m.estimator.as_str())
            .meta("theta", m.theta)
            .meta("n_a", m.n_a)
            .meta("n_sites", m.n_sites)
            .meta("q", m.q)
            .meta("state", m.state.as_str())
            .meta("renyi", m.renyi);
        for k in 0..trace.len() {
            t.push(vec![trace.times[k].to_string(), num(trace.values[k]), num(trace.errors[k])]);
        }
        t
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    fn body(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let err = |e: csv::Error| HarnessError::Csv { path: PathBuf::from(&self.name), source: e };
        w.write_record(&self.columns).map_err(err)?;
        for r in &self.rows {
            w.write_record(r).map_err(err)?;
        }
        w.into_inner().map_err(|e| HarnessError::io(&self.name, e.into_error()))
    }

    fn render(&self, engine: &str, config: &[(String, String)]) -> Result<Vec<u8>> {
        let mut s = format!("# code_version={CODE_VERSION}\n# engine={engine}\n");
        for (k, v) in &self.meta {
            s.push_str(&format!("# {k}={v}\n"));
        }
        for (k, v) in config {
            s.push_str(&format!("# config.{k}={v}\n"));
        }
        let mut out = s.into_bytes();
        out.extend(self.body()?);
        Ok(out)
    }
}

/// Writes every table and the manifest into `dir`. On any failure the files
/// written so far are removed.
pub fn write_tables(dir: &Path, engine: &str, config: &[(String, String)], tables: &[Table]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = (|| {
        let mut manifest = Table::new(MANIFEST, &["file", "observable", "estimator", "theta", "n_a", "rows"]).meta("outputs", tables.len());
        for t in tables {
            let path = dir.join(&t.name);
            let bytes = t.render(engine, config)?;
            fs::write(&path, bytes).map_err(|e| HarnessError::io(&path, e))?;
            written.push(path);
            let field = |k: &str| t.get(k).unwrap_or("").to_string();
            manifest.push(vec![t.name.clone(), field("observable"), field("estimator"), field("theta"), field("n_a"), t.rows.len().to_string()]);
        }
        let path = dir.join(MANIFEST);
        fs::write(&path, manifest.render(engine, config)?).map_err(|e| HarnessError::io(&path, e))?;
        written.push(path);
        Ok(())
    })();
    match result {
        Ok(()) => Ok(written),
        Err(e) => {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            Err(e)
        }
    }
}

/// Header map and CSV records of a file written by [`write_tables`].
pub fn read_table(path: &Path) -> Result<(BTreeMap<String, String>, Vec<String>, Vec<Vec<String>>)> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    let mut header = BTreeMap::new();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line[1..].trim().split_once('=') {
            header.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let err = |e: csv::Error| HarnessError::Csv { path: path.to_path_buf(), source: e };
    let columns: Vec<String> = r.headers().map_err(err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(err)?.iter().map(str::to_string).collect());
    }
    Ok((header, columns, rows))
}

/// Byte content after the header comment lines.
pub fn body_bytes(path: &Path) -> Result<Vec<u8>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    Ok(text.lines().filter(|l| !l.starts_with('#')).flat_map(|l| l.bytes().chain(std::iter::once(b'\n'))).collect())
}

pub fn read_trace(path: &Path) -> Result<AsymmetryTrace> {
    let (h, columns, rows) = read_table(path)?;
    let bad = |reason: String| HarnessError::Parse { path: path.to_path_buf(), reason };
    if columns != TRACE_COLUMNS {
        return Err(bad(format!("expected columns t,value,error, got {}", columns.join(","))));
    }
    let key = |k: &str| h.get(k).cloned().ok_or_else(|| bad(format!("missing header `{k}`")));
    let parse_f = |k: &str| -> Result<f64> { key(k)?.parse().map_err(|_| bad(format!("bad header `{k}`"))) };
    let parse_u = |k: &str| -> Result<usize> { key(k)?.parse().map_err(|_| bad(format!("bad header `{k}`"))) };
    let meta = TraceMeta {
        theta: parse_f("theta")?,
        n_sites: parse_u("n_sites")?,
        n_a: parse_u("n_a")?,
        q: parse_u("q")?,
        state: ProductKind::parse(&key("state")?).ok_or_else(|| bad("bad header `state`".into()))?,
        estimator: Estimator::parse(&key("estimator")?).ok_or_else(|| bad("bad header `estimator`".into()))?,
        observable: Observable::parse(&key("observable")?).ok_or_else(|| bad("bad header `observable`".into()))?,
        renyi: parse_f("renyi")?,
    };
    let mut tr = AsymmetryTrace::new(meta);
    for (k, r) in rows.iter().enumerate() {
        let cell = |i: usize| r.get(i).ok_or_else(|| bad(format!("row {} is short", k + 1)));
        let t = cell(0)?.parse().map_err(|_| bad(format!("row {}: bad t", k + 1)))?;
        let v = cell(1)?.parse().map_err(|_| bad(format!("row {}: bad value", k + 1)))?;
        let e = cell(2)?.parse().map_err(|_| bad(format!("row {}: bad error", k + 1)))?;
        tr.push(t, v, e);
    }
    Ok(tr)
}
