use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::backscatter::SweepRow;
use crate::error::{Error, Result};
use crate::functionals::FunctionalReport;
use crate::scenarios::ScenarioReport;

pub const SCHEMA_VERSION: u32 = 1;
pub const SERIES_CSV: &str = "series.csv";
pub const NAMED_CSV: &str = "named_series.csv";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const PLOT_DIR: &str = "plots";

/// 17 significant digits: parsing the text gives back the same f64.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn flux_names(reports: &[FunctionalReport]) -> Vec<String> {
    let mut names: Vec<String> = Vec::new();
    for r in reports {
        for (n, _) in &r.fluxes {
            if !names.contains(n) {
                names.push(n.clone());
            }
        }
    }
    names
}

pub fn series_header(reports: &[FunctionalReport]) -> Vec<String> {
    let mut h: Vec<String> =
        ["t", "energy_w1", "energy_w0", "norm_conf_plus", "norm_1_s_surrogate"].map(String::from).to_vec();
    h.extend(flux_names(reports).into_iter().map(|n| format!("flux_{n}")));
    h.extend(["identity_residual", "sup_envelope"].map(String::from));
    h
}

/// One header row, then one row per report; absent values are empty cells.
pub fn series_csv(reports: &[FunctionalReport]) -> String {
    let names = flux_names(reports);
    let mut out = series_header(reports).join(",");
    out.push('\n');
    for r in reports {
        let mut row = vec![
            fmt_f64(r.t),
            fmt_f64(r.energy_w1),
            fmt_f64(r.energy_w0),
            fmt_f64(r.norm_conf_plus),
            fmt_f64(r.norm_1_s_surrogate),
        ];
        for n in &names {
            row.push(r.fluxes.iter().find(|f| &f.0 == n).map(|f| fmt_f64(f.1)).unwrap_or_default());
        }
        row.push(r.identity_residual.map(fmt_f64).unwrap_or_default());
        row.push(fmt_f64(r.sup_envelope));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Rows of a series file as optional numbers, keyed by the header.
pub fn read_series_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<Option<f64>>>)> {
    let mut lines = text.lines();
    let header: Vec<String> =
        lines.next().ok_or_else(|| Error::domain("empty series file"))?.split(',').map(String::from).collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let row: Vec<Option<f64>> = line
            .split(',')
            .map(|c| if c.is_empty() { Ok(None) } else { c.parse::<f64>().map(Some) })
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Syntax { line: i + 2, msg: e.to_string() })?;
        if row.len() != header.len() {
            return Err(Error::Syntax {
                line: i + 2,
                msg: format!("{} cells for {} columns", row.len(), header.len()),
            });
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn write_series_csv(path: &Path, reports: &[FunctionalReport]) -> Result<()> {
    fs::write(path, series_csv(reports))?;
    Ok(())
}

fn named_csv(rep: &ScenarioReport) -> String {
    let mut out = String::from("name,t,value\n");
    for s in &rep.series {
        for (t, v) in &s.points {
            let _ = writeln!(out, "{},{},{}", s.name, fmt_f64(*t), fmt_f64(*v));
        }
    }
    out
}

fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("k,t,r,direction,value,asymptotic,envelope\n");
    for x in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            x.k,
            fmt_f64(x.t),
            fmt_f64(x.r),
            x.direction,
            fmt_f64(x.value),
            fmt_f64(x.asymptotic),
            fmt_f64(x.envelope)
        );
    }
    out
}

#[derive(Serialize)]
pub struct Environment {
    pub version: &'static str,
    pub os: &'static str,
    pub arch: &'static str,
    pub threads: usize,
    pub seed: u64,
}

impl Environment {
    pub fn current(seed: u64) -> Self {
        Environment {
            version: env!("CARGO_PKG_VERSION"),
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads: rayon::current_num_threads(),
            seed,
        }
    }
}

pub enum Outcome<'a> {
    Finished(&'a ScenarioReport),
    Failed { stage: String, message: String },
}

/// Status word of a run: pass, fail or error.
pub fn status(outcome: &Outcome) -> &'static str {
    match outcome {
        Outcome::Finished(r) if r.passed() => "pass",
        Outcome::Finished(_) => "fail",
        Outcome::Failed { .. } => "error",
    }
}

pub fn summary_json(
    scenario: &str,
    config: Option<&str>,
    hash: Option<&str>,
    outcome: &Outcome,
    env: &Environment,
) -> serde_json::Value {
    let mut v = json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": scenario,
        "status": status(outcome),
        "config": config,
        "config_hash": hash,
        "environment": env,
    });
    match outcome {
        Outcome::Finished(r) => {
            let exps: Vec<serde_json::Value> = r
                .exponents
                .iter()
                .map(|e| {
                    json!({
                        "name": e.name,
                        "fitted": e.fitted.map(|f| f.exponent),
                        "target": e.target,
                        "tol": e.tol,
                        "pass": e.pass,
                        "fit": e.fitted,
                        "note": e.note,
                    })
                })
                .collect();
            v["exponents"] = json!(exps);
            v["checks"] = json!(r.checks);
            v["provenance"] = json!(r.provenance);
        }
        Outcome::Failed { stage, message } => {
            v["error"] = json!({ "stage": stage, "message": message });
        }
    }
    v
}

/// gnuplot script for log-log decay plots of the named series, with target-slope guides.
/// Run from the bundle directory: `gnuplot plots/decay.gp`.
pub fn decay_plot_script(rep: &ScenarioReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "set datafile separator ','");
    let _ = writeln!(out, "set logscale xy");
    let _ = writeln!(out, "set key outside");
    let _ = writeln!(out, "set xlabel 't'");
    let _ = writeln!(out, "set terminal pngcairo size 900,600");
    for (i, s) in rep.series.iter().enumerate() {
        if !s.points.iter().any(|p| p.0 > 0.0 && p.1 > 0.0) {
            continue;
        }
        let _ = writeln!(out, "\nset output '{PLOT_DIR}/{}.png'", s.name);
        let _ = writeln!(out, "set title '{}'", s.name);
        let mut parts = vec![format!(
            "'{NAMED_CSV}' using 2:(strcol(1) eq '{}' ? $3 : NaN) with linespoints title '{}'",
            s.name, s.name
        )];
        let guide =
            rep.exponents.iter().filter(|e| s.name.starts_with(&e.name)).find_map(|e| e.fitted.map(|f| (e.target, f)));
        if let Some((target, f)) = guide {
            let tm = (f.t_lo * f.t_hi).sqrt();
            let c = f.amplitude * tm.powf(f.exponent - target);
            let _ = writeln!(out, "g{i}(x) = {} * x**({})", fmt_f64(c), fmt_f64(target));
            parts.push(format!("g{i}(x) with lines dashtype 2 title 'target slope {target:.3}'"));
        }
        let _ = writeln!(out, "plot {}", parts.join(", \\\n     "));
    }
    if !rep.reports.is_empty() {
        let _ = writeln!(out, "\nset output '{PLOT_DIR}/energy.png'");
        let _ = writeln!(out, "set title 'energies'");
        let _ = writeln!(out, "plot '{SERIES_CSV}' using 1:2 skip 1 with lines title 'energy_w1', \\");
        let _ = writeln!(out, "     '{SERIES_CSV}' using 1:3 skip 1 with lines title 'energy_w0'");
    }
    out
}

/// Writes summary.json, series.csv, named_series.csv, sweep.csv (when present) and plots/.
pub fn write_bundle(dir: &Path, summary: &serde_json::Value, report: Option<&ScenarioReport>) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    if let Some(rep) = report {
        let p = dir.join(SERIES_CSV);
        write_series_csv(&p, &rep.reports)?;
        written.push(p);
        let p = dir.join(NAMED_CSV);
        fs::write(&p, named_csv(rep))?;
        written.push(p);
        if !rep.sweep.is_empty() {
            let p = dir.join(SWEEP_CSV);
            fs::write(&p, sweep_csv(&rep.sweep))?;
            written.push(p);
        }
        fs::create_dir_all(dir.join(PLOT_DIR))?;
        let p = dir.join(PLOT_DIR).join("decay.gp");
        fs::write(&p, decay_plot_script(rep))?;
        written.push(p);
    }
    let p = dir.join(SUMMARY_JSON);
    fs::write(&p, serde_json::to_string_pretty(summary)? + "\n")?;
    written.push(p);
    Ok(written)
}
