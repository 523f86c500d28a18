//! Acceptance run over the reference configurations in `configs/`.
//!
//! Prints one line per criterion. Exits non-zero when a criterion outside
//! `KNOWN_UNATTAINED` fails.

use std::path::Path;
use std::time::{Duration, Instant};

use radscatter::cli_io::parse_config;
use radscatter::scenarios::{ScenarioRegistry, ScenarioReport};

/// Criteria that fail at desk scale with the reference data; see README.
const KNOWN_UNATTAINED: [u32; 2] = [5, 7];

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    lines: Vec<String>,
}

impl Verdict {
    fn new(id: u32, title: &'static str) -> Self {
        Verdict { id, title, pass: true, lines: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: String) {
        self.pass &= ok;
        self.lines.push(format!("{} {what}", if ok { "ok  " } else { "FAIL" }));
    }

    fn at_most(&mut self, rep: &ScenarioReport, check: &str, limit: f64) {
        match rep.check(check) {
            Some(c) => self.require(c.value <= limit, format!("{check} = {:.4e} ≤ {limit:e}", c.value)),
            None => self.require(false, format!("{check} missing")),
        }
    }

    fn at_least(&mut self, rep: &ScenarioReport, check: &str, limit: f64) {
        match rep.check(check) {
            Some(c) => self.require(c.value >= limit, format!("{check} = {:.4} ≥ {limit}", c.value)),
            None => self.require(false, format!("{check} missing")),
        }
    }

    fn exponent(&mut self, rep: &ScenarioReport, name: &str, target: f64, tol: f64) {
        let Some(e) = rep.exponent(name) else {
            return self.require(false, format!("{name} missing"));
        };
        let fitted = e.fitted.as_ref().map(|f| f.exponent);
        let ok = fitted.is_some_and(|f| (f - target).abs() <= tol);
        let shown = fitted.map(|f| format!("{f:.4}")).unwrap_or_else(|| "n/a".into());
        self.require(ok, format!("{name} fitted {shown}, target {target} ± {tol}"));
    }
}

fn load(name: &str) -> ScenarioReport {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(format!("{name}.cfg"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let spec = parse_config(&text).unwrap_or_else(|e| panic!("{name}.cfg: {e}"));
    assert_eq!(spec.scenario, name);
    ScenarioRegistry::standard().run(&spec).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn timed(name: &str) -> (ScenarioReport, Duration) {
    let start = Instant::now();
    let rep = load(name);
    (rep, start.elapsed())
}

fn solver_gate(rep: &ScenarioReport, took: Duration) -> Verdict {
    let mut v = Verdict::new(1, "solver oracle gate");
    let hs: Vec<f64> = rep.series("dalembert_error").unwrap_or(&[]).iter().map(|p| p.0).collect();
    v.require(hs == [0.025, 0.05, 0.1], format!("refinement ladder {hs:?}"));
    v.at_most(rep, "dalembert_order", 0.1);
    v.require(took < Duration::from_secs(60), format!("single-threaded runtime {:.1} s < 60 s", took.as_secs_f64()));
    v
}

fn residuals(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(2, "exact-solution residual orders");
    v.at_least(rep, "psi_e_order", 1.9);
    v.at_least(rep, "travelling_wave_order", 1.9);
    v
}

fn morawetz(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(3, "Morawetz identity residuals");
    for s in ["1", "1.2"] {
        for kind in ["free", "sourced"] {
            for h in [0.1, 0.05, 0.025] {
                v.at_most(rep, &format!("morawetz_s{s}_{kind}_h{h}"), 5.0 * h * h);
            }
        }
    }
    v
}

fn bulk_sign(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(4, "bulk sign");
    for a in ["2", "2.5", "3", "4"] {
        v.at_most(rep, &format!("bulk_sign_a{a}"), 1e-12);
    }
    v
}

fn homogeneous(rep: &ScenarioReport, took: Duration) -> Verdict {
    let mut v = Verdict::new(5, "homogeneous scattering exponents");
    v.exponent(rep, "source_norm", -1.1, 0.15);
    v.exponent(rep, "energy", -1.3, 0.15);
    match rep.exponent("conformal_norm") {
        Some(e) if e.note.is_some() => v.require(
            e.pass,
            format!("conformal_norm boundedness fallback within 20%: {}", e.note.as_deref().unwrap_or("")),
        ),
        _ => v.exponent(rep, "conformal_norm", -0.1, 0.15),
    }
    v.lines.push(format!("info runtime {:.1} s", took.as_secs_f64()));
    v
}

fn cauchy(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(6, "T → ∞ Cauchy property");
    let d: Vec<(f64, f64)> = rep.series("difference_at_t0").unwrap_or(&[]).to_vec();
    v.require(d.len() == 2, format!("difference norms at t0 {d:?}"));
    v.require(d.windows(2).all(|w| w[1].1 < w[0].1), "monotone decrease".into());
    v.at_least(rep, "cauchy_ratio_80_160", 1.5);
    v
}

fn weak_null(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(7, "weak-null envelope and □ cross-check");
    v.at_most(rep, "w_envelope_bounded", 5.0);
    v.at_most(rep, "crosscheck", 1e-2);
    v
}

fn backscatter(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(8, "backscatter kernels");
    for i in 0..5 {
        v.at_most(rep, &format!("oracle_{i}"), 1e-4);
    }
    v.at_most(rep, "envelope_constant", 10.0);
    for k in 2..=4 {
        v.at_most(rep, &format!("phi{k}_growth"), 2.0);
    }
    v.at_most(rep, "remainder_growth", 2.0);
    v
}

fn null_radial(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(9, "radial null model");
    v.at_most(rep, "reached_t0", 0.0);
    let fitted = rep.exponent("energy").and_then(|e| e.fitted.as_ref()).map(|f| f.exponent);
    v.require(fitted.is_some_and(|f| f <= -0.3), format!("energy fitted {fitted:?} ≤ -0.3"));
    v.at_most(rep, "amplitude_scaling", 0.2);
    v
}

fn hardy_ks(rep: &ScenarioReport) -> Verdict {
    let mut v = Verdict::new(10, "Hardy and weighted Klainerman–Sobolev ratios");
    let mut n = 0;
    for c in rep.checks.iter().filter(|c| c.name.starts_with("hardy_") || c.name.starts_with("ks_")) {
        n += 1;
        let limit = if c.name.ends_with("_budget") { 10.0 } else { 2.0 };
        v.at_most(rep, &c.name, limit);
    }
    v.require(n == 24, format!("{n} ratio checks"));
    v
}

fn main() {
    let start = Instant::now();
    let gate = rayon::ThreadPoolBuilder::new().num_threads(1).build().expect("pool");
    let (validate, took) = gate.install(|| timed("validate"));
    let names = ["convergence", "audit", "homogeneous", "tlimit", "weaknull", "backscatter", "nullradial"];
    let reps: Vec<(ScenarioReport, Duration)> = std::thread::scope(|sc| {
        let handles: Vec<_> = names.iter().map(|n| sc.spawn(move || timed(n))).collect();
        handles.into_iter().map(|h| h.join().expect("scenario thread")).collect()
    });
    let get = |n: &str| &reps[names.iter().position(|x| *x == n).unwrap()];
    let verdicts = [
        solver_gate(&validate, took),
        residuals(&get("convergence").0),
        morawetz(&get("audit").0),
        bulk_sign(&get("audit").0),
        homogeneous(&get("homogeneous").0, get("homogeneous").1),
        cauchy(&get("tlimit").0),
        weak_null(&get("weaknull").0),
        backscatter(&get("backscatter").0),
        null_radial(&get("nullradial").0),
        hardy_ks(&get("audit").0),
    ];
    for v in &verdicts {
        println!("criterion {:>2} {}: {}", v.id, if v.pass { "PASS" } else { "FAIL" }, v.title);
        for l in &v.lines {
            println!("    {l}");
        }
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.pass).map(|v| v.id).collect();
    let unexpected: Vec<u32> = failed.iter().copied().filter(|id| !KNOWN_UNATTAINED.contains(id)).collect();
    let recovered: Vec<u32> = KNOWN_UNATTAINED.iter().copied().filter(|id| !failed.contains(id)).collect();
    println!(
        "acceptance: {} of {} pass; failed {failed:?}; known unattained {KNOWN_UNATTAINED:?}; {:.0} s",
        verdicts.len() - failed.len(),
        verdicts.len(),
        start.elapsed().as_secs_f64()
    );
    if !recovered.is_empty() {
        println!("acceptance: criteria {recovered:?} now pass; update KNOWN_UNATTAINED");
    }
    if !unexpected.is_empty() {
        println!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
