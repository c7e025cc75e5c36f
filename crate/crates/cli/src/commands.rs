//! Subcommand implementations. Each one prints a summary with six significant
//! digits, writes full-precision files into the output directory and finishes
//! with a run manifest.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use midpred::gain_margin::{
    check_certificate, design_chain, max_gain_margin, upper_bound_gamma, verify_certificate_exact,
};
use midpred::margins::{stability_partition, StabilityPartition};
use midpred::mid::{gain_star, multiplicity_at, q_poly, scale_gain, sturm_root_certificate, GainVector};
use midpred::model::{CanonicalSystem, SystemDefinition};
use midpred::qp::{default_region, roots_in_region, Quasipolynomial, Rect, SpectrumResult};
use midpred::sim::{integrate, example_config, SimConfig, SimulationTrace, Variant};
use midpred::tradeoff::{ahmed_conditions, ahmed_necessary, lei_conditions, lei_necessary, ours_conditions, TradeoffVerdict};
use rayon::prelude::*;
use serde::Serialize;

use crate::output::{full, key_values, sig6, sig6_list, table, Csv, OutDir};
use crate::plot::{emit_plot_script, PlotKind};
use crate::{
    Cli, Command, CompareArgs, DesignArgs, Figure, GainMarginArgs, MarginsArgs, ReproArgs, SimulateArgs, SpectrumArgs,
    SynthArgs, UsageError,
};

/// Threshold on `‖e_pred‖` used for the reported settling time.
pub const SETTLING_TOL: f64 = 1e-3;

pub fn dispatch(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Synth(a) => synth(a, &cli.out),
        Command::Margins(a) => margins(a, &cli.out),
        Command::Gainmargin(a) => gainmargin(a, &cli.out),
        Command::Design(a) => design(a, &cli.out),
        Command::Spectrum(a) => spectrum(a, &cli.out),
        Command::Simulate(a) => simulate(a, &cli.out),
        Command::Compare(a) => compare(a, &cli.out),
        Command::Repro(a) => repro(a, &cli.out),
    }
}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn flags<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

fn finish(out: OutDir, name: &str, args: &impl Serialize, config: Option<PathBuf>) -> Result<()> {
    let manifest = out.finish(name, flags(args), config)?;
    println!("\nwrote {}", manifest.display());
    Ok(())
}

#[derive(Serialize)]
struct SynthRecord {
    n: usize,
    delta: f64,
    sigma_star: f64,
    sigma_scaled: f64,
    l_star: Vec<f64>,
    l_scaled: Vec<f64>,
    multiplicity: usize,
    q_negative_roots: usize,
    q_squarefree: bool,
}

fn synth(a: &SynthArgs, out: &Path) -> Result<()> {
    let g = gain_star(a.n)?;
    let sigma = g.sigma_star.context("synthesized gain carries no assigned root")?;
    let scaled = scale_gain(&g, a.delta)?;
    let multiplicity = multiplicity_at(&scaled, a.delta, sigma / a.delta);
    let (neg, squarefree) = sturm_root_certificate(&q_poly(a.n)?)?;

    print!(
        "{}",
        key_values(&[
            ("n", a.n.to_string()),
            ("delta", sig6(a.delta)),
            ("sigma*", sig6(sigma)),
            ("sigma*/delta", sig6(sigma / a.delta)),
        ])
    );
    println!();
    let rows: Vec<Vec<String>> =
        (0..a.n).map(|k| vec![(k + 1).to_string(), sig6(g.l[k]), sig6(scaled.l[k])]).collect();
    print!("{}", table(&["k", "l*_k", "l_k (scaled)"], &rows));
    println!();
    print!(
        "{}",
        key_values(&[
            ("root multiplicity", format!("{multiplicity} (target {})", a.n + 1)),
            ("q: distinct negative roots", format!("{neg} of {}", a.n)),
            ("q: squarefree", squarefree.to_string()),
        ])
    );

    let mut dir = OutDir::create(out)?;
    if a.kv {
        let rec = SynthRecord {
            n: a.n,
            delta: a.delta,
            sigma_star: sigma,
            sigma_scaled: sigma / a.delta,
            l_star: g.l.clone(),
            l_scaled: scaled.l.clone(),
            multiplicity,
            q_negative_roots: neg,
            q_squarefree: squarefree,
        };
        dir.write("synth.toml", toml::to_string(&rec)?.as_bytes())?;
    }
    finish(dir, "synth", a, None)
}

pub fn partition_csv(parts: &[StabilityPartition]) -> Csv {
    let mut csv = Csv::new(PlotKind::Partition.schema(), &["n", "delta_lo", "delta_hi", "unstable"]);
    for p in parts {
        for iv in &p.intervals {
            csv.row(vec![p.gain.n().to_string(), full(iv.lo), full(iv.hi), iv.unstable.to_string()]);
        }
    }
    csv
}

fn partitions(orders: &[usize], delta_max: Option<f64>) -> Result<Vec<StabilityPartition>> {
    orders.par_iter().map(|&n| stability_partition(n, delta_max).map_err(anyhow::Error::from)).collect()
}

fn margins(a: &MarginsArgs, out: &Path) -> Result<()> {
    let n_min = a.n_min.unwrap_or(a.n);
    if n_min == 0 || n_min > a.n {
        return Err(usage(format!("--n-min must be in 1..={}", a.n)));
    }
    let orders: Vec<usize> = (n_min..=a.n).collect();
    let parts = partitions(&orders, a.delta_max)?;
    let p = parts.last().expect("at least one order");

    println!("n = {}, delta_max = {}", a.n, sig6(p.delta_max));
    let rows: Vec<Vec<String>> = p
        .crossings
        .frequencies
        .iter()
        .map(|c| vec![sig6(c.omega), sig6(c.arg_g), format!("{:+}", c.direction)])
        .collect();
    println!();
    print!("{}", table(&["omega_c", "arg G(j omega_c)", "direction"], &rows));
    let rows: Vec<Vec<String>> = p
        .intervals
        .iter()
        .map(|iv| {
            vec![sig6(iv.lo), sig6(iv.hi), iv.unstable.to_string(), if iv.is_stable() { "stable" } else { "unstable" }.into()]
        })
        .collect();
    println!();
    print!("{}", table(&["delta_lo", "delta_hi", "unstable roots", "status"], &rows));

    let mut dir = OutDir::create(out)?;
    let data = dir.write("partition.csv", &partition_csv(&parts).into_bytes())?;
    dir.record(&emit_plot_script(PlotKind::Partition, &data)?);
    finish(dir, "margins", a, None)
}

fn gainmargin(a: &GainMarginArgs, out: &Path) -> Result<()> {
    let b = max_gain_margin(a.n, a.tol)?;
    let g = gain_star(a.n)?;
    let mut pairs = vec![
        ("n", a.n.to_string()),
        ("gamma_m lower (certified)", sig6(b.lower)),
        ("gamma_m upper (l_n*)", sig6(b.upper)),
        ("eps", sig6(b.eps)),
        ("feasibility solves", b.solves.to_string()),
    ];
    let mut summary = serde_json::json!({
        "n": a.n, "lower": b.lower, "upper": b.upper, "eps": b.eps, "solves": b.solves,
    });
    let mut dir = OutDir::create(out)?;
    match &b.certificate {
        Some(c) => {
            let chk = check_certificate(&g, 1.0, b.lower, b.eps, c)?;
            let exact = verify_certificate_exact(&g, 1.0, b.lower, b.eps, c)?;
            pairs.extend([
                ("lambda_max(W)", sig6(chk.lambda_max_w)),
                ("lambda_min(P), (R), (S)", sig6_list(&[chk.lambda_min_p, chk.lambda_min_r, chk.lambda_min_s])),
                ("floating-point check", if chk.passes() { "pass" } else { "fail" }.into()),
                ("exact rational check", if exact { "pass" } else { "fail" }.into()),
            ]);
            summary["float_check"] = chk.passes().into();
            summary["exact_check"] = exact.into();
            let mut csv = Csv::new("certificate.v1", &["matrix", "row", "col", "value"]);
            for (name, m) in c.named() {
                for i in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        csv.row(vec![name.into(), i.to_string(), j.to_string(), full(m[(i, j)])]);
                    }
                }
            }
            dir.write("certificate.csv", &csv.into_bytes())?;
        }
        None => pairs.push(("certificate", "none found".into())),
    }
    print!("{}", key_values(&pairs));
    dir.write("gainmargin.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    finish(dir, "gainmargin", a, None)
}

fn certified_margin(n: usize, tol: f64) -> Result<f64> {
    let b = max_gain_margin(n, tol)?;
    if b.lower <= 0.0 {
        bail!("no gain-margin certificate found for n = {n}");
    }
    Ok(b.lower)
}

fn design(a: &DesignArgs, out: &Path) -> Result<()> {
    let (gamma_m, source) = match a.gamma_m {
        Some(g) => (g, "given"),
        None => (certified_margin(a.n, a.tol)?, "certified"),
    };
    let d = design_chain(a.n, a.gamma_phi, a.h, gamma_m)?;
    print!(
        "{}",
        key_values(&[
            ("n", d.n.to_string()),
            ("h", sig6(d.h)),
            ("gamma_phi", sig6(d.gamma_phi)),
            ("gamma_m", format!("{} ({source})", sig6(d.gamma_m))),
            ("lambda*", sig6(d.lambda_star)),
            ("lambda* h", sig6(d.lambda_star * d.h)),
            ("N", d.n_sub.to_string()),
            ("lambda", sig6(d.lambda)),
            ("sub-delay h/N", sig6(d.h / d.n_sub as f64)),
            ("sigma* lambda", sig6(d.sigma_star_per_t)),
        ])
    );
    let mut dir = OutDir::create(out)?;
    let mut record = serde_json::to_value(&d)?;
    record["gamma_m_source"] = source.into();
    dir.write("design.json", serde_json::to_string_pretty(&record)?.as_bytes())?;
    finish(dir, "design", a, None)
}

/// Spectrum of the gain synthesized for delay `delta`, in physical time units.
pub fn compute_spectrum(n: usize, delta: f64, rect: Option<&[f64]>, density: f64) -> Result<(f64, SpectrumResult)> {
    if !(delta > 0.0) {
        bail!("delta must be positive, got {delta}");
    }
    let g = gain_star(n)?;
    let sigma = g.sigma_star.context("synthesized gain carries no assigned root")? / delta;
    let qp = Quasipolynomial::from_gain(&scale_gain(&g, delta)?, delta)?;
    let rect = match rect {
        Some(r) => Rect::new(r[0], r[1], r[2], r[3])?,
        None => {
            // Certification region of the normalized problem, mapped to physical time.
            let r = default_region(sigma * delta, 1.0);
            Rect::new(r.re_min / delta, r.re_max / delta, r.im_min / delta, r.im_max / delta)?
        }
    };
    Ok((sigma, roots_in_region(&qp, &rect, density)?))
}

pub fn spectrum_csv(res: &SpectrumResult) -> Csv {
    let mut csv = Csv::new(PlotKind::Spectrum.schema(), &["re", "im", "multiplicity"]);
    for r in &res.roots {
        csv.row(vec![full(r.location.re), full(r.location.im), r.multiplicity.to_string()]);
    }
    csv
}

fn spectrum(a: &SpectrumArgs, out: &Path) -> Result<()> {
    if a.rect.as_ref().is_some_and(|r| r.len() != 4) {
        return Err(usage("--rect takes re_min,re_max,im_min,im_max"));
    }
    let (sigma, res) = compute_spectrum(a.n, a.delta, a.rect.as_deref(), a.density)?;
    let reg = &res.region;
    println!(
        "region [{}, {}] x [{}, {}], roots counted: {}",
        sig6(reg.re_min),
        sig6(reg.re_max),
        sig6(reg.im_min),
        sig6(reg.im_max),
        res.count_by_argument_principle
    );
    println!("designed root sigma*/delta = {}", sig6(sigma));
    if let Some(d) = res.dominant {
        println!("dominant root {} {:+}i", sig6(d.re), sig6(d.im));
    }
    let rows: Vec<Vec<String>> = res
        .roots
        .iter()
        .map(|r| vec![sig6(r.location.re), sig6(r.location.im), r.multiplicity.to_string()])
        .collect();
    println!();
    print!("{}", table(&["re", "im", "multiplicity"], &rows));

    let mut dir = OutDir::create(out)?;
    let data = dir.write("spectrum.csv", &spectrum_csv(&res).into_bytes())?;
    dir.record(&emit_plot_script(PlotKind::Spectrum, &data)?);
    finish(dir, "spectrum", a, None)
}

/// `(N, λ, L)` of a variant for an order-`n` system.
fn tuning(variant: Variant, n: usize, h: f64) -> Result<(usize, f64, GainVector)> {
    let (n_sub, lambda, gain) = variant.tuning(h)?;
    match variant {
        Variant::Ahmed if n != 2 => bail!("the ahmed tuning is defined for n = 2 only, config has n = {n}"),
        Variant::Ahmed => Ok((n_sub, lambda, gain)),
        _ => Ok((n_sub, lambda, gain_star(n)?)),
    }
}

pub fn trace_csv(tr: &SimulationTrace) -> Csv {
    let n = tr.x.first().map_or(0, Vec::len);
    let mut cols: Vec<String> = vec!["t".into()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.push("e_pred".into());
    cols.extend((1..=tr.n_sub).map(|j| format!("e{j}")));
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut csv = Csv::new(PlotKind::Trace.schema(), &cols);
    for k in 0..tr.times.len() {
        let mut row = vec![tr.times[k]];
        row.extend(&tr.x[k]);
        row.push(tr.e_pred[k]);
        row.extend(tr.e_chain.iter().map(|e| e[k]));
        csv.numbers(&row);
    }
    csv
}

fn trace_summary(label: &str, tr: &SimulationTrace) -> Vec<String> {
    let last = tr.e_pred.iter().rev().copied().find(|e| e.is_finite()).unwrap_or(f64::NAN);
    vec![
        label.to_string(),
        tr.n_sub.to_string(),
        sig6(tr.lambda),
        tr.diverged.to_string(),
        tr.settling_time(SETTLING_TOL).map_or("-".into(), sig6),
        sig6(tr.peak_error()),
        sig6(last),
    ]
}

const TRACE_HEADERS: [&str; 7] = ["run", "N", "lambda", "diverged", "settles (1e-3)", "peak |e_pred|", "final |e_pred|"];

fn simulate(a: &SimulateArgs, out: &Path) -> Result<()> {
    let (mut system, x0) = match &a.config {
        Some(p) => {
            let def = SystemDefinition::from_path(p)?;
            (def.system, def.x0)
        }
        None => (CanonicalSystem::example(0.25), None),
    };
    if let Some(h) = a.h {
        system.h = h;
    }
    let (n, h) = (system.n, system.h);
    let variant = Variant::from(a.variant);
    let (n_sub, lambda, gain) = tuning(variant, n, h)?;
    let mut cfg = SimConfig::new(system, gain, lambda, n_sub, a.t_end, x0.unwrap_or_else(|| vec![1.0; n]));
    cfg.dt = a.dt;
    let tr = integrate(&cfg)?;

    println!("h = {}, dt = {}, samples = {}", sig6(h), sig6(tr.dt), tr.times.len());
    print!("{}", table(&TRACE_HEADERS, &[trace_summary(variant.name(), &tr)]));

    let mut dir = OutDir::create(out)?;
    let data = dir.write("trace.csv", &trace_csv(&tr).into_bytes())?;
    dir.record(&emit_plot_script(PlotKind::Trace, &data)?);
    finish(dir, "simulate", a, a.config.clone())
}

fn verdict_cell(v: &TradeoffVerdict) -> String {
    v.residuals.iter().map(|r| format!("{}={}", r.name, sig6(r.value))).collect::<Vec<_>>().join(" ")
}

fn compare(a: &CompareArgs, out: &Path) -> Result<()> {
    let n = match (a.n, &a.l) {
        (Some(n), Some(l)) if n != l.len() => return Err(usage(format!("--n {n} disagrees with {} gains in --L", l.len()))),
        (_, Some(l)) => l.len(),
        (Some(n), None) => n,
        (None, None) => return Err(usage("one of --n or --L is required")),
    };
    let gain = match &a.l {
        Some(l) => GainVector::new(l.clone())?,
        None => gain_star(n)?,
    };
    let gamma_m = match a.gamma_m {
        Some(g) => g,
        // λ* = 1 whenever γΦ = 0, so any positive margin gives the same design.
        None if a.gamma_phi == 0.0 => upper_bound_gamma(n)?,
        None => certified_margin(n, 1e-3)?,
    };
    let d = design_chain(n, a.gamma_phi, a.h, gamma_m)?;
    let screen = |r: midpred::Result<bool>| r.ok();

    let entries = [
        (ahmed_conditions(&gain, a.lambda, a.h, a.gamma_phi)?, a.lambda, screen(ahmed_necessary(n, a.h, a.lambda))),
        (lei_conditions(&gain, a.lambda, a.h)?, a.lambda, screen(lei_necessary(n, a.h, a.lambda))),
        (ours_conditions(a.gamma_phi, a.h, d.lambda, d.n_sub, Some(gamma_m))?, d.lambda, None),
    ];

    println!("n = {n}, h = {}, gamma_phi = {}, L = {}", sig6(a.h), sig6(a.gamma_phi), sig6_list(&gain.l));
    println!("chain design: N = {}, lambda = {}, gamma_m = {}", d.n_sub, sig6(d.lambda), sig6(gamma_m));
    let rows: Vec<Vec<String>> = entries
        .iter()
        .map(|(v, lambda, nec)| {
            vec![
                v.method.name().to_string(),
                sig6(*lambda),
                v.satisfied.to_string(),
                nec.map_or("-".into(), |b| b.to_string()),
                verdict_cell(v),
            ]
        })
        .collect();
    println!();
    print!("{}", table(&["method", "lambda", "satisfied", "necessary", "residuals"], &rows));

    let mut csv = Csv::new("verdicts.v1", &["method", "lambda", "kind", "name", "value", "holds"]);
    for (v, lambda, nec) in &entries {
        let m = v.method.name().to_string();
        csv.row(vec![m.clone(), full(*lambda), "verdict".into(), "satisfied".into(), String::new(), v.satisfied.to_string()]);
        if let Some(b) = nec {
            csv.row(vec![m.clone(), full(*lambda), "screen".into(), "necessary".into(), String::new(), b.to_string()]);
        }
        for r in &v.residuals {
            csv.row(vec![m.clone(), full(*lambda), "residual".into(), r.name.to_string(), full(r.value), r.holds().to_string()]);
        }
        for (k, x) in &v.derived {
            csv.row(vec![m.clone(), full(*lambda), "derived".into(), k.clone(), full(*x), String::new()]);
        }
    }
    let mut dir = OutDir::create(out)?;
    dir.write("compare.csv", &csv.into_bytes())?;
    finish(dir, "compare", a, None)
}

/// Files produced by one figure recipe, written afterwards by a single writer.
struct FigureOutput {
    files: Vec<(String, Csv, PlotKind)>,
    report: String,
}

fn figure_d_vs_n(a: &ReproArgs) -> Result<FigureOutput> {
    if a.n_max == 0 {
        return Err(usage("--n-max must be at least 1"));
    }
    let orders: Vec<usize> = (1..=a.n_max).collect();
    let parts = partitions(&orders, a.delta_max)?;
    let rows: Vec<Vec<String>> = parts
        .iter()
        .map(|p| {
            let first_stable = p.intervals.first().is_some_and(|iv| iv.is_stable());
            vec![
                p.gain.n().to_string(),
                p.crossings.frequencies.len().to_string(),
                p.first_point().map_or("-".into(), sig6),
                first_stable.to_string(),
                p.stable_intervals().count().to_string(),
            ]
        })
        .collect();
    let report = table(&["n", "crossing freqs", "delta_1", "stable on (0, delta_1)", "stable intervals"], &rows);
    Ok(FigureOutput { files: vec![("d_vs_n.csv".into(), partition_csv(&parts), PlotKind::Partition)], report })
}

fn figure_spectrum(a: &ReproArgs) -> Result<FigureOutput> {
    let (sigma, res) = compute_spectrum(2, a.delta, None, 32.0)?;
    let dom = res.dominant.context("no roots found")?;
    let report = format!(
        "spectrum n=2, delta={}: {} roots, dominant {} (multiplicity {}), designed sigma*/delta = {}\n",
        sig6(a.delta),
        res.count_by_argument_principle,
        sig6(dom.re),
        res.roots.iter().find(|r| r.location == dom).map_or(0, |r| r.multiplicity),
        sig6(sigma)
    );
    Ok(FigureOutput { files: vec![(format!("spectrum_delta{}.csv", a.delta), spectrum_csv(&res), PlotKind::Spectrum)], report })
}

fn figure_error_norm(a: &ReproArgs) -> Result<FigureOutput> {
    let jobs: Vec<(f64, Variant)> = a.h.iter().flat_map(|&h| Variant::ALL.map(|v| (h, v))).collect();
    let traces: Vec<SimulationTrace> = jobs
        .par_iter()
        .map(|&(h, v)| Ok(integrate(&example_config(v, h)?)?))
        .collect::<Result<_>>()?;
    let mut files = Vec::new();
    let mut rows = Vec::new();
    for &h in &a.h {
        let mut csv = Csv::new(PlotKind::ErrorNorm.schema(), &["variant", "t", "e_pred"]);
        for ((jh, v), tr) in jobs.iter().zip(&traces).filter(|((jh, _), _)| *jh == h) {
            rows.push(trace_summary(&format!("{v} h={}", sig6(*jh)), tr));
            for (t, e) in tr.times.iter().zip(&tr.e_pred) {
                csv.row(vec![v.name().into(), full(*t), full(*e)]);
            }
        }
        files.push((format!("error_norm_h{h}.csv"), csv, PlotKind::ErrorNorm));
    }
    Ok(FigureOutput { files, report: table(&TRACE_HEADERS, &rows) })
}

fn repro(a: &ReproArgs, out: &Path) -> Result<()> {
    let figures = match a.figure {
        Figure::All => vec![Figure::DVsN, Figure::Spectrum, Figure::ErrorNorm],
        f => vec![f],
    };
    let outputs: Vec<FigureOutput> = figures
        .par_iter()
        .map(|f| match f {
            Figure::DVsN => figure_d_vs_n(a),
            Figure::Spectrum => figure_spectrum(a),
            Figure::ErrorNorm => figure_error_norm(a),
            Figure::All => unreachable!("expanded above"),
        })
        .collect::<Result<_>>()?;

    let mut dir = OutDir::create(out)?;
    for fig in outputs {
        print!("{}", fig.report);
        println!();
        for (name, csv, kind) in fig.files {
            let data = dir.write(&name, &csv.into_bytes())?;
            dir.record(&emit_plot_script(kind, &data)?);
        }
    }
    finish(dir, "repro", a, None)
}
