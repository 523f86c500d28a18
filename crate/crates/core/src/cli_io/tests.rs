use proptest::prelude::*;

use super::output::{decay_plot_script, fmt_f64, status, NAMED_CSV, PLOT_DIR, SERIES_CSV};
use super::*;
use crate::functionals::FunctionalReport;
use crate::profile::ProfileDescriptor;
use crate::scenarios::{Check, ExponentCheck, ModeSpec, ScenarioReport};

const MINIMAL: &str = "\
[run]
scenario = homogeneous
[data.F0]
l2m0 = gaussian amplitude=1 width=1 center=0
[params]
gamma = 0.8
[grid]
T = 80
";

// [TRIVIAL] minimal document fills the documented defaults
#[test]
fn minimal_config_defaults() {
    let spec = parse_config(MINIMAL).unwrap();
    let d = RunSpec::default();
    assert_eq!(spec.scenario, "homogeneous");
    assert_eq!(spec.f0, vec![ModeSpec { l: 2, m: 0, profile: ProfileDescriptor::gaussian(1.0, 1.0, 0.0) }]);
    assert_eq!((spec.s, spec.h, spec.t0, spec.band), (d.s, d.h, d.t0, d.band));
    assert_eq!(spec.acceptance, d.acceptance);
    assert!(spec.g0.is_empty());
}

// [PAPER] s ≥ gamma + 1/2 is rejected with the admissible range
#[test]
fn s_range_error() {
    let text = format!("{MINIMAL}[params]\n");
    assert!(matches!(parse_config(&text), Err(Error::Syntax { .. })));
    let text = MINIMAL.replace("gamma = 0.8", "gamma = 0.8\ns = 1.4");
    let e = parse_config(&text).unwrap_err();
    assert!(e.is_config());
    let msg = e.to_string();
    assert!(msg.contains("1 ≤ s < gamma + 1/2"), "{msg}");
    assert!(msg.starts_with("s:"), "{msg}");
}

// [TRIVIAL] duplicate keys cite both lines
#[test]
fn duplicate_key_lines() {
    let text = "[params]\ngamma = 0.8\n# note\nmu = 0.1\ngamma = 0.7\n";
    let msg = parse_config(text).unwrap_err().to_string();
    assert!(msg.contains("line 2") && msg.contains("line 5"), "{msg}");
    let text = "[data.F0]\nl1m0 = gaussian\nl1m0 = gaussian amplitude=2\n";
    let msg = parse_config(text).unwrap_err().to_string();
    assert!(msg.contains("line 2") && msg.contains("line 3"), "{msg}");
}

// [TRIVIAL] syntax errors carry the line number
#[test]
fn syntax_errors() {
    let cases = [
        ("[grid]\nh 0.1\n", 2),
        ("[grid]\nh = 0.1\nspeed = 2\n", 3),
        ("\n\n[nowhere]\n", 3),
        ("h = 0.1\n", 1),
        ("[params]\ngamma = fast\n", 2),
        ("[data.G0]\nl2 = gaussian\n", 2),
        ("[data.G0]\nl2m1 = gaussian width\n", 2),
        ("[grid]\n[grid]\n", 2),
        ("[grid\n", 1),
        ("[grid]\nh =\n", 2),
    ];
    for (text, line) in cases {
        match parse_unchecked(text) {
            Err(Error::Syntax { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
            other => panic!("{text:?} gave {other:?}"),
        }
    }
}

// [TRIVIAL] comments and blank lines are ignored
#[test]
fn comments() {
    let text = "# header\n[params]   # trailing\n  gamma = 0.9 # why not\n\n";
    assert_eq!(parse_config(text).unwrap().gamma, 0.9);
}

// [DERIVED] echo of a parsed document is a fixed point
#[test]
fn echo_fixed_point() {
    let spec = parse_config(MINIMAL).unwrap();
    let e = echo_config(&spec);
    let again = parse_config(&e).unwrap();
    assert_eq!(again, spec);
    assert_eq!(echo_config(&again), e);
    assert_eq!(config_hash(&again), config_hash(&spec));
    assert_eq!(config_hash(&spec).len(), 64);
    let mut other = spec.clone();
    other.h = 0.025;
    assert_ne!(config_hash(&other), config_hash(&spec));
}

fn arb_profile() -> impl Strategy<Value = ProfileDescriptor> {
    prop_oneof![
        (-5.0..5.0f64, 0.1..3.0f64, -4.0..4.0f64).prop_map(|(a, w, c)| ProfileDescriptor::gaussian(a, w, c)),
        (-5.0..5.0f64, 0.85..3.0f64).prop_map(|(a, p)| ProfileDescriptor::poly_tail(a, p)),
        (-5.0..5.0f64, 0.1..3.0f64, -4.0..4.0f64).prop_map(|(a, w, c)| ProfileDescriptor::compact_bump(a, w, c)),
    ]
}

proptest! {
    // [DERIVED] canonical form is idempotent for arbitrary specs
    #[test]
    fn echo_idempotent(
        gamma in 0.51..0.99f64,
        frac in 0.0..1.0f64,
        h in 0.01..0.5f64,
        t0 in 1.0..5.0f64,
        seed in any::<u64>(),
        modes in prop::collection::vec((0usize..3, arb_profile()), 0..3),
    ) {
        let mut spec = RunSpec { gamma, h, t0, seed, ..RunSpec::default() };
        spec.s = 1.0 + frac * (gamma - 0.5);
        for (i, (l, p)) in modes.into_iter().enumerate() {
            spec.f0.push(ModeSpec { l, m: -(l as i64) + i as i64 % (2 * l as i64 + 1), profile: p });
        }
        spec.f0.sort_by_key(|m| (m.l, m.m));
        spec.f0.dedup_by_key(|m| (m.l, m.m));
        let e = echo_config(&spec);
        let back = parse_config(&e).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(echo_config(&back), e);
    }

    // [DERIVED] series CSV round-trips every finite value bit-exactly
    #[test]
    fn csv_round_trip(vals in prop::collection::vec(prop::array::uniform8(any::<f64>().prop_filter("finite", |x| x.is_finite())), 1..5)) {
        let reports: Vec<FunctionalReport> = vals
            .iter()
            .map(|v| FunctionalReport {
                t: v[0],
                energy_w1: v[1],
                energy_w0: v[2],
                norm_conf_plus: v[3],
                norm_1_s_surrogate: v[4],
                fluxes: vec![("outgoing".into(), v[5])],
                identity_residual: Some(v[6]),
                sup_envelope: v[7],
                ..Default::default()
            })
            .collect();
        let (header, rows) = read_series_csv(&series_csv(&reports)).unwrap();
        prop_assert_eq!(header.len(), 8);
        for (row, v) in rows.iter().zip(&vals) {
            for (cell, want) in row.iter().zip(v) {
                prop_assert_eq!(cell.unwrap().to_bits(), want.to_bits());
            }
        }
    }
}

// [TRIVIAL] no reports gives the header alone; one report gives two lines
#[test]
fn csv_line_counts() {
    let empty = series_csv(&[]);
    assert_eq!(empty, "t,energy_w1,energy_w0,norm_conf_plus,norm_1_s_surrogate,identity_residual,sup_envelope\n");
    let one = series_csv(&[FunctionalReport { t: 2.0, ..Default::default() }]);
    assert_eq!(one.lines().count(), 2);
    let (_, rows) = read_series_csv(&one).unwrap();
    assert_eq!(rows[0][5], None);
    assert_eq!(fmt_f64(0.1).len(), "1.0000000000000001e-1".len());
}

fn sample_report() -> ScenarioReport {
    let mut rep = ScenarioReport::new("homogeneous");
    rep.series.push(crate::scenarios::Series {
        name: "energy_sqrt".into(),
        points: vec![(2.0, 1.0), (4.0, 0.4), (8.0, 0.17)],
    });
    rep.series.push(crate::scenarios::Series { name: "zero".into(), points: vec![(2.0, 0.0)] });
    let pts: Vec<(f64, f64)> = (1..=8).map(|i| (i as f64, (i as f64).powf(-1.3))).collect();
    rep.exponents.push(ExponentCheck::from_fit("energy", &pts, (1.0, 8.0), -1.3, 0.15));
    rep.checks.push(Check::at_most("x", 1.0, 2.0, ""));
    rep.reports.push(FunctionalReport { t: 2.0, ..Default::default() });
    rep
}

// [TRIVIAL] passing exponents serialize as {fitted, target, tol, pass}
#[test]
fn summary_exponent_entries() {
    let rep = sample_report();
    let env = Environment::current(7);
    let v = summary_json("homogeneous", Some("[run]\n"), Some("ab"), &Outcome::Finished(&rep), &env);
    assert_eq!(v["status"], "pass");
    let e = &v["exponents"][0];
    assert!((e["fitted"].as_f64().unwrap() + 1.3).abs() < 1e-12);
    assert_eq!(e["target"], -1.3);
    assert_eq!(e["tol"], 0.15);
    assert_eq!(e["pass"], true);
    assert_eq!(v["environment"]["seed"], 7);
    assert!(v.get("error").is_none());
}

// [TRIVIAL] failed runs carry status error and the stage tag
#[test]
fn summary_error_block() {
    let env = Environment::current(0);
    let out = Outcome::Failed { stage: "crosscheck".into(), message: "boom".into() };
    assert_eq!(status(&out), "error");
    let v = summary_json("weaknull", None, None, &out, &env);
    assert_eq!(v["status"], "error");
    assert_eq!(v["error"]["stage"], "crosscheck");
    assert!(v.get("exponents").is_none());
}

// [TRIVIAL] the plot script reads and writes only bundle paths
#[test]
fn plot_script_paths() {
    let rep = sample_report();
    let script = decay_plot_script(&rep);
    let quoted: Vec<&str> = script.split('\'').skip(1).step_by(2).collect();
    for q in quoted.iter().filter(|q| q.ends_with(".csv") || q.ends_with(".png")) {
        assert!(
            *q == NAMED_CSV || *q == SERIES_CSV || (q.starts_with(&format!("{PLOT_DIR}/")) && q.ends_with(".png")),
            "{q}"
        );
    }
    assert!(script.contains("energy_sqrt.png"));
    assert!(!script.contains("zero.png"));
    assert!(script.contains("x**(-1.3"));
}

// [TRIVIAL] subcommand and scenario key must agree
#[test]
fn scenario_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.cfg");
    std::fs::write(&p, "[run]\nscenario = audit\n").unwrap();
    let cli = Cli::try_parse_from(["radscatter", "homogeneous", "--config", p.to_str().unwrap()]).unwrap();
    assert!(load_spec(&cli).unwrap_err().to_string().contains("subcommand"));
    let cli = Cli::try_parse_from(["radscatter", "audit", "--config", p.to_str().unwrap(), "--seed", "9"]).unwrap();
    let spec = load_spec(&cli).unwrap();
    assert_eq!((spec.scenario.as_str(), spec.seed), ("audit", 9));
}
