//! Gnuplot script emission for the CSV files written by the subcommands.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// `re,im,multiplicity`
    Spectrum,
    /// `n,delta_lo,delta_hi,unstable`
    Partition,
    /// `variant,t,e_pred`
    ErrorNorm,
    /// `t,x1..xn,e_pred,e1..eN`
    Trace,
}

impl PlotKind {
    pub fn schema(self) -> &'static str {
        match self {
            PlotKind::Spectrum => "spectrum.v1",
            PlotKind::Partition => "partition.v1",
            PlotKind::ErrorNorm => "error_norm.v1",
            PlotKind::Trace => "trace.v1",
        }
    }

    fn required_columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Spectrum => &["re", "im", "multiplicity"],
            PlotKind::Partition => &["n", "delta_lo", "delta_hi", "unstable"],
            PlotKind::ErrorNorm => &["variant", "t", "e_pred"],
            PlotKind::Trace => &["t", "e_pred"],
        }
    }
}

struct DataFile {
    name: String,
    columns: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_data(kind: PlotKind, path: &Path) -> Result<DataFile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("data file {} not readable", path.display()))?;
    let mut lines = text.lines();
    let expected = format!("# schema: {}", kind.schema());
    match lines.next() {
        Some(first) if first == expected => {}
        other => bail!("{}: expected `{expected}`, found {:?}", path.display(), other.unwrap_or("")),
    }
    let columns: Vec<String> = lines.next().unwrap_or("").split(',').map(str::to_string).collect();
    for c in kind.required_columns() {
        if !columns.iter().any(|x| x == c) {
            bail!("{}: missing column `{c}`", path.display());
        }
    }
    let rows = lines.filter(|l| !l.starts_with('#')).map(|l| l.split(',').map(str::to_string).collect()).collect();
    let name = path.file_name().and_then(|s| s.to_str()).context("data path has no file name")?.to_string();
    Ok(DataFile { name, columns, rows })
}

fn col(data: &DataFile, name: &str) -> usize {
    data.columns.iter().position(|c| c == name).expect("checked by read_data") + 1
}

fn preamble(out: &mut String, data: &DataFile, title: &str) {
    let stem = data.name.trim_end_matches(".csv");
    let _ = writeln!(out, "# generated by midpred; run from the directory holding {}", data.name);
    let _ = writeln!(out, "set terminal pngcairo size 900,600 enhanced");
    let _ = writeln!(out, "set output '{stem}.png'");
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set title '{title}'");
    let _ = writeln!(out, "set grid");
}

/// Script text for `data_path`; referenced by file name so the pair can be moved together.
pub fn plot_script(kind: PlotKind, data_path: &Path) -> Result<String> {
    let data = read_data(kind, data_path)?;
    let mut s = String::new();
    let f = &data.name;
    match kind {
        PlotKind::Spectrum => {
            preamble(&mut s, &data, "roots of the characteristic quasipolynomial");
            let (re, im, m) = (col(&data, "re"), col(&data, "im"), col(&data, "multiplicity"));
            let _ = writeln!(s, "set xlabel 'Re s'\nset ylabel 'Im s'\nset xzeroaxis\nset yzeroaxis");
            let _ = writeln!(
                s,
                "plot '{f}' using {re}:{im} with points pt 7 ps 0.8 title 'roots', \\\n     '{f}' using {re}:{im}:(${m} > 1 ? sprintf('%d', ${m}) : '') with labels offset 1.2,0.8 notitle"
            );
        }
        PlotKind::Partition => {
            preamble(&mut s, &data, "stability partition of the delay axis");
            let (n, lo, hi, u) = (col(&data, "n"), col(&data, "delta_lo"), col(&data, "delta_hi"), col(&data, "unstable"));
            let _ = writeln!(s, "set xlabel 'delta'\nset ylabel 'n'\nset style fill solid 0.6 noborder");
            let _ = writeln!(
                s,
                "plot '{f}' using (${lo}+${hi})/2:{n}:{lo}:{hi}:(${n}-0.4):(${n}+0.4):(${u} == 0 ? 0x2ca02c : 0xd62728) with boxxyerror lc rgb variable notitle"
            );
        }
        PlotKind::ErrorNorm => {
            preamble(&mut s, &data, "prediction error norm");
            let (v, t, e) = (col(&data, "variant"), col(&data, "t"), col(&data, "e_pred"));
            let mut variants: Vec<&str> = Vec::new();
            for row in &data.rows {
                if let Some(name) = row.get(v - 1) {
                    if !variants.contains(&name.as_str()) {
                        variants.push(name);
                    }
                }
            }
            let _ = writeln!(s, "set xlabel 't'\nset ylabel '|e_{{pred}}|'\nset logscale y\nset format y '10^{{%L}}'");
            let plots: Vec<String> = variants
                .iter()
                .map(|name| {
                    format!("'{f}' using {t}:(strcol({v}) eq '{name}' ? ${e} : NaN) with lines lw 2 title '{}'", name.replace('_', "\\_"))
                })
                .collect();
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
        PlotKind::Trace => {
            preamble(&mut s, &data, "prediction and sub-predictor errors");
            let t = col(&data, "t");
            let mut names = vec!["e_pred".to_string()];
            names.extend(data.columns.iter().filter(|c| c.starts_with('e') && c[1..].parse::<usize>().is_ok()).cloned());
            let _ = writeln!(s, "set xlabel 't'\nset ylabel 'norm'\nset logscale y\nset format y '10^{{%L}}'");
            let plots: Vec<String> = names
                .iter()
                .map(|name| format!("'{f}' using {t}:{} with lines lw 2 title '{}'", col(&data, name), name.replace('_', "\\_")))
                .collect();
            let _ = writeln!(s, "plot {}", plots.join(", \\\n     "));
        }
    }
    Ok(s)
}

/// Writes the script next to `data_path` with a `.gp` extension.
pub fn emit_plot_script(kind: PlotKind, data_path: &Path) -> Result<PathBuf> {
    let script = plot_script(kind, data_path)?;
    let out = data_path.with_extension("gp");
    std::fs::write(&out, script).with_context(|| format!("cannot write {}", out.display()))?;
    Ok(out)
}
