use super::validate::LADDER;
use super::{Check, RunSpec, Scenario, ScenarioReport};
use crate::angular::mode_index;
use crate::engine::{convergence_order, solve_backward, FieldState, FnSource, Observer, RadialGrid, SolveOptions};
use crate::error::Result;
use crate::functionals::{
    bulk_sign_check, hardy_checks, ks_pointwise_check, FunctionalReport, MorawetzAudit, MorawetzBalance,
};

const BULK_EXPONENTS: [f64; 4] = [2.0, 2.5, 3.0, 4.0];

fn g(x: f64) -> f64 {
    (-(x - 15.0) * (x - 15.0)).exp()
}

fn dg(x: f64) -> f64 {
    -2.0 * (x - 15.0) * g(x)
}

/// Regression run for the conformal Morawetz balance on [2, 10] with an ℓ = 0
/// and an ℓ = 2 component, optionally driven by a source near the cone.
pub fn morawetz_run(h: f64, s: f64, sourced: bool) -> Result<(MorawetzBalance, FieldState)> {
    let (t2, t1) = (10.0, 2.0);
    let grid = RadialGrid::new(h, (40.0 / h).round() as usize)?;
    let (m0, m2) = (mode_index(0, 0), mode_index(2, -1));
    let data = FieldState::from_fn(t2, grid, 2, &[m0, m2], |m, r| {
        if m == m0 {
            (g(t2 + r) - g(t2 - r), dg(t2 + r) - dg(t2 - r))
        } else {
            let b = (-(r - 8.0) * (r - 8.0) / 2.0).exp();
            (r * r * r * b / 100.0, 0.0)
        }
    });
    let src = FnSource {
        f: move |t: f64, r: f64, out: &mut [f64]| {
            if sourced {
                let b = (-(r - t - 3.0) * (r - t - 3.0) - (t - 6.0) * (t - 6.0) / 4.0).exp();
                out[m0] = 0.2 * b;
                out[m2] = 0.1 * r * b;
            }
        },
    };
    let mut audit = MorawetzAudit::new(0, s, 12.0);
    let opts = SolveOptions::new(0.5 * h, t1, vec![t1], vec![vec![m0, m2]]);
    let mut obs: [&mut dyn Observer; 1] = [&mut audit];
    let tr = solve_backward(vec![data], &src, &opts, &mut obs)?;
    Ok((audit.balance(), tr.records[0][0].clone()))
}

/// (weighted Hardy, conformal Hardy, Klainerman–Sobolev) ratios of one state.
fn ratios(st: &FieldState, s: f64, budget: f64) -> Result<[f64; 3]> {
    let hr = hardy_checks(st, s, budget)?;
    Ok([hr.weighted, hr.conformal, ks_pointwise_check(st, s)?])
}

pub struct AuditScenario;

impl Scenario for AuditScenario {
    fn name(&self) -> &'static str {
        "audit"
    }

    fn summary(&self) -> &'static str {
        "Morawetz identity, bulk sign, Hardy and Klainerman–Sobolev batteries"
    }

    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        let acc = &spec.acceptance;
        let mut rep = ScenarioReport::new(self.name());
        rep.provenance.h = LADDER[LADDER.len() - 1];
        rep.provenance.band = 2;
        let mut svals = vec![1.0, spec.s];
        svals.dedup();
        let names = ["hardy_weighted", "hardy_conformal", "ks"];
        for &s in &svals {
            for sourced in [false, true] {
                let tag = format!("s{s}_{}", if sourced { "sourced" } else { "free" });
                let mut errs = Vec::new();
                let mut per_h: Vec<[f64; 3]> = Vec::new();
                for &h in &LADDER {
                    let (bal, end) = morawetz_run(h, s, sourced)?;
                    errs.push(bal.residual.abs());
                    rep.checks.push(Check::at_most(
                        &format!("morawetz_{tag}_h{h}"),
                        bal.residual.abs(),
                        acc.identity_constant * h * h,
                        format!(
                            "relative identity residual against {} h²; flux {:e}, bulk {:e}, source {:e}",
                            acc.identity_constant, bal.flux, bal.bulk, bal.source
                        ),
                    ));
                    per_h.push(ratios(&end, s, acc.budget)?);
                    if h == LADDER[LADDER.len() - 1] {
                        rep.provenance.j_max = end.grid.j_max;
                        rep.reports.push(FunctionalReport::compute(&end, s, spec.mu)?);
                    }
                }
                rep.checks.push(Check::info(
                    &format!("morawetz_{tag}_order"),
                    convergence_order(&errs).order,
                    format!("observed order of the identity residuals {errs:?}"),
                ));
                for (k, name) in names.iter().enumerate() {
                    let vals: Vec<f64> = per_h.iter().map(|r| r[k]).collect();
                    let max = vals.iter().fold(0.0f64, |a, &x| a.max(x));
                    let min = vals.iter().fold(f64::INFINITY, |a, &x| a.min(x));
                    rep.checks.push(Check::at_most(
                        &format!("{name}_{tag}_budget"),
                        max,
                        acc.budget,
                        format!("ratios {vals:?}"),
                    ));
                    rep.checks.push(Check::at_most(
                        &format!("{name}_{tag}_drift"),
                        if min > 0.0 { max / min } else { f64::INFINITY },
                        acc.drift,
                        "max/min of the ratio over the refinement ladder",
                    ));
                }
            }
        }
        let pts: Vec<f64> = (0..200).map(|i| 100.0 * i as f64 / 199.0).collect();
        for a in BULK_EXPONENTS {
            let b = bulk_sign_check(a, &pts, &pts)?;
            rep.checks.push(Check::at_most(
                &format!("bulk_sign_a{a}"),
                b.max_slack,
                acc.bulk_tol,
                format!("largest slack on a 200 × 200 sample of [0, 100]², attained at (t, r) = {:?}", b.at),
            ));
        }
        Ok(rep)
    }
}
