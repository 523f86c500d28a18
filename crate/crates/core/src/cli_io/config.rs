//! Line-oriented `key = value` documents with `[section]` headers.
//!
//! ```text
//! [run]
//! scenario = homogeneous
//! [data.F0]
//! l2m0 = gaussian amplitude=1 width=1 center=0
//! [params]
//! gamma = 0.8
//! ```

use std::collections::BTreeMap;
use std::fmt::Write;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::profile::ProfileDescriptor;
use crate::scenarios::{ModeSpec, RunSpec};

const SECTIONS: [&str; 6] = ["run", "data.F0", "data.G0", "grid", "params", "acceptance"];

type Setter = fn(&mut RunSpec, &str) -> std::result::Result<(), String>;
type Getter = fn(&RunSpec) -> String;

struct Key {
    section: &'static str,
    name: &'static str,
    set: Setter,
    get: Getter,
    help: &'static str,
}

fn num(v: &str) -> std::result::Result<f64, String> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(format!("not a finite number: `{v}`")),
    }
}

fn uint(v: &str) -> std::result::Result<usize, String> {
    v.parse::<usize>().map_err(|_| format!("not a non-negative integer: `{v}`"))
}

fn list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|x| num(x.trim())).collect()
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

macro_rules! float_key {
    ($section:expr, $name:expr, $($field:ident).+, $help:expr) => {
        Key {
            section: $section,
            name: $name,
            set: |s, v| {
                s.$($field).+ = num(v)?;
                Ok(())
            },
            get: |s| format!("{:?}", s.$($field).+),
            help: $help,
        }
    };
}

fn keys() -> Vec<Key> {
    vec![
        Key {
            section: "run",
            name: "scenario",
            set: |s, v| {
                s.scenario = v.to_string();
                Ok(())
            },
            get: |s| s.scenario.clone(),
            help: "scenario name; must match the subcommand when given",
        },
        Key {
            section: "run",
            name: "seed",
            set: |s, v| {
                s.seed = v.parse().map_err(|_| format!("not a u64: `{v}`"))?;
                Ok(())
            },
            get: |s| s.seed.to_string(),
            help: "seed for randomized sampling",
        },
        Key {
            section: "run",
            name: "convention",
            set: |s, v| {
                s.convention = v.to_string();
                Ok(())
            },
            get: |s| s.convention.clone(),
            help: "backscatter kernel convention (retarded, printed)",
        },
        float_key!("grid", "h", h, "radial step, in (0, 0.5]"),
        float_key!("grid", "T", t_final, "final time where trivial data is imposed"),
        float_key!("grid", "t0", t0, "earliest time, ≥ 1"),
        Key {
            section: "grid",
            name: "T_list",
            set: |s, v| {
                s.t_list = list(v)?;
                Ok(())
            },
            get: |s| fmt_list(&s.t_list),
            help: "increasing final times of the T study",
        },
        Key {
            section: "grid",
            name: "L_max",
            set: |s, v| {
                s.band = uint(v)?;
                Ok(())
            },
            get: |s| s.band.to_string(),
            help: "angular band limit of the data",
        },
        Key {
            section: "grid",
            name: "samples",
            set: |s, v| {
                s.samples = uint(v)?;
                Ok(())
            },
            get: |s| s.samples.to_string(),
            help: "geometric record times between T and t0",
        },
        float_key!("params", "gamma", gamma, "radiation-field decay, 1/2 < gamma < 1"),
        float_key!("params", "s", s, "conformal weight, 1 ≤ s < gamma + 1/2"),
        float_key!("params", "M", mass, "mass of the exterior term"),
        float_key!("params", "mu", mu, "energy weight exponent, 0 < mu < 1/2"),
        float_key!("params", "a", a, "backscatter decay exponent, ≥ 0"),
        float_key!("params", "delta", delta, "null-model decay floor, 0 < delta < 1/2 - mu"),
        float_key!("acceptance", "exponent_tol", acceptance.exponent_tol, "fitted-exponent tolerance"),
        float_key!("acceptance", "order_target", acceptance.order_target, "expected convergence order"),
        float_key!("acceptance", "order_tol", acceptance.order_tol, "tolerance on the convergence order"),
        float_key!("acceptance", "min_order", acceptance.min_order, "lowest accepted order"),
        float_key!(
            "acceptance",
            "identity_constant",
            acceptance.identity_constant,
            "Morawetz residual constant C in C h²"
        ),
        float_key!("acceptance", "bulk_tol", acceptance.bulk_tol, "bulk-sign slack tolerance"),
        float_key!("acceptance", "cauchy_ratio", acceptance.cauchy_ratio, "least shrink factor per doubling of T"),
        float_key!("acceptance", "envelope_ratio", acceptance.envelope_ratio, "max/min bound of envelopes"),
        float_key!("acceptance", "crosscheck_tol", acceptance.crosscheck_tol, "relative □ cross-check tolerance"),
        float_key!("acceptance", "oracle_tol", acceptance.oracle_tol, "brute-force oracle tolerance"),
        float_key!("acceptance", "residual_tol", acceptance.residual_tol, "backscatter source residual tolerance"),
        float_key!("acceptance", "budget", acceptance.budget, "constant for Hardy, Sobolev and envelope ratios"),
        float_key!("acceptance", "drift", acceptance.drift, "max/min drift of ratios"),
        float_key!("acceptance", "scaling_tol", acceptance.scaling_tol, "amplitude-scaling tolerance"),
        float_key!(
            "acceptance",
            "nonincrease_tol",
            acceptance.nonincrease_tol,
            "growth allowed by the boundedness fallback"
        ),
    ]
}

/// `l2m-1` → (2, -1).
fn parse_mode_key(k: &str) -> Option<(usize, i64)> {
    let rest = k.strip_prefix('l')?;
    let (l, m) = rest.split_once('m')?;
    Some((l.parse().ok()?, m.parse().ok()?))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunSpec> {
    let spec = parse_unchecked(text)?;
    spec.validate()?;
    Ok(spec)
}

/// Parses without the range checks of `RunSpec::validate`.
pub fn parse_unchecked(text: &str) -> Result<RunSpec> {
    let table = keys();
    let mut spec = RunSpec::default();
    let mut section: Option<&'static str> = None;
    let mut section_lines: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut seen: BTreeMap<(&'static str, String), usize> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let syntax = |msg: String| Error::Syntax { line, msg };
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(inner) = body.strip_prefix('[') {
            let name =
                inner.strip_suffix(']').ok_or_else(|| syntax(format!("unterminated section header `{body}`")))?.trim();
            let known = SECTIONS
                .iter()
                .find(|s| **s == name)
                .ok_or_else(|| syntax(format!("unknown section [{name}] (known: {})", SECTIONS.join(", "))))?;
            if let Some(prev) = section_lines.insert(known, line) {
                return Err(syntax(format!("section [{name}] repeats the header on line {prev}")));
            }
            section = Some(known);
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| syntax(format!("expected `key = value`, found `{body}`")))?;
        let (k, v) = (k.trim(), v.trim());
        if k.is_empty() {
            return Err(syntax("missing key before `=`".into()));
        }
        if v.is_empty() {
            return Err(syntax(format!("missing value for `{k}`")));
        }
        let sec = section.ok_or_else(|| syntax(format!("key `{k}` appears before any [section] header")))?;
        if let Some(prev) = seen.insert((sec, k.to_string()), line) {
            return Err(syntax(format!(
                "duplicate key `{k}` in [{sec}]: first set on line {prev}, again on line {line}"
            )));
        }
        if sec.starts_with("data.") {
            let (l, m) = parse_mode_key(k)
                .ok_or_else(|| syntax(format!("mode keys look like `l2m0` or `l3m-1`, found `{k}`")))?;
            let profile = ProfileDescriptor::parse(v).map_err(|e| syntax(format!("{k}: {e}")))?;
            let target = if sec == "data.F0" { &mut spec.f0 } else { &mut spec.g0 };
            target.push(ModeSpec { l, m, profile });
            continue;
        }
        let key = table.iter().find(|x| x.section == sec && x.name == k).ok_or_else(|| {
            let known: Vec<&str> = table.iter().filter(|x| x.section == sec).map(|x| x.name).collect();
            syntax(format!("unknown key `{k}` in [{sec}] (known: {})", known.join(", ")))
        })?;
        (key.set)(&mut spec, v).map_err(|e| syntax(format!("{k}: {e}")))?;
    }
    Ok(spec)
}

/// Canonical text of a spec: every section and key in fixed order, defaults filled in.
pub fn echo_config(spec: &RunSpec) -> String {
    let table = keys();
    let mut out = String::new();
    for sec in SECTIONS {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "[{sec}]");
        if let Some(which) = sec.strip_prefix("data.") {
            let modes = if which == "F0" { &spec.f0 } else { &spec.g0 };
            let mut sorted: Vec<&ModeSpec> = modes.iter().collect();
            sorted.sort_by_key(|m| (m.l, m.m));
            for m in sorted {
                let _ = writeln!(out, "l{}m{} = {}", m.l, m.m, m.profile);
            }
            continue;
        }
        for k in table.iter().filter(|k| k.section == sec) {
            let _ = writeln!(out, "{} = {}", k.name, (k.get)(spec));
        }
    }
    out
}

/// Hex SHA-256 of the canonical text.
pub fn config_hash(spec: &RunSpec) -> String {
    hex::encode(Sha256::digest(echo_config(spec).as_bytes()))
}

/// Key reference with defaults, for --help.
pub fn key_reference() -> String {
    let d = RunSpec::default();
    let mut out = String::from("Configuration keys (defaults in parentheses):\n");
    let mut last = "";
    for k in keys() {
        if k.section != last {
            let _ = writeln!(out, "  [{}]", k.section);
            if k.section == "run" {
                let _ = writeln!(out, "    (data sections [data.F0], [data.G0] take `l<l>m<m> = <profile>` lines,");
                let _ = writeln!(
                    out,
                    "     profiles: gaussian, poly-tail, compact-bump, sampled with key=value parameters)"
                );
            }
            last = k.section;
        }
        let _ = writeln!(out, "    {:<18} {} ({})", k.name, k.help, (k.get)(&d));
    }
    out
}
