//! Screen formatting, CSV assembly and the output directory.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

/// Six significant digits, `%g` style.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        trim_zeros(format!("{:.*}", (5 - exp) as usize, x))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn sig6_list(xs: &[f64]) -> String {
    format!("[{}]", xs.iter().map(|v| sig6(*v)).collect::<Vec<_>>().join(", "))
}

/// Left-aligned columns separated by two spaces.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let padded: Vec<String> =
            cells.iter().zip(&widths).map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count()))).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(headers.to_vec(), &mut out);
    line(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().iter().map(String::as_str).collect(), &mut out);
    for row in rows {
        line(row.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

pub fn key_values(pairs: &[(&str, String)]) -> String {
    let w = pairs.iter().map(|(k, _)| k.chars().count()).max().unwrap_or(0);
    pairs.iter().map(|(k, v)| format!("{k}{}  {v}\n", " ".repeat(w - k.chars().count()))).collect()
}

/// Lossless textual form of a float (shortest round-trip representation).
pub fn full(x: f64) -> String {
    x.to_string()
}

/// CSV document whose first line names a versioned schema.
#[derive(Debug, Clone)]
pub struct Csv {
    text: String,
    columns: usize,
}

impl Csv {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        Csv { text: format!("# schema: {schema}\n{}\n", columns.join(",")), columns: columns.len() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns, "CSV row width");
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn numbers(&mut self, values: &[f64]) {
        self.row(values.iter().map(|v| full(*v)).collect());
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Everything a run wrote, recorded next to its outputs.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub flags: serde_json::Value,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// No subcommand draws random numbers, so this stays empty.
    pub seed: Option<u64>,
    pub version: String,
    pub files: Vec<String>,
}

/// Output directory; every file of a run goes through [`OutDir::write`].
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: BTreeSet<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf(), written: BTreeSet::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.insert(name.to_string());
        Ok(path)
    }

    pub fn record(&mut self, path: &Path) {
        if let Ok(rel) = path.strip_prefix(&self.root) {
            self.written.insert(rel.display().to_string());
        }
    }

    pub fn finish(mut self, subcommand: &str, flags: serde_json::Value, config: Option<PathBuf>) -> Result<PathBuf> {
        let manifest = RunManifest {
            subcommand: subcommand.to_string(),
            flags,
            config,
            out_dir: self.root.clone(),
            seed: None,
            version: env!("CARGO_PKG_VERSION").to_string(),
            files: self.written.iter().cloned().collect(),
        };
        let json = serde_json::to_string_pretty(&manifest)?;
        self.write("manifest.json", json.as_bytes())
    }
}
