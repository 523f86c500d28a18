use super::{Check, RunSpec, Scenario, ScenarioReport};
use crate::cutoff::Cutoff;
use crate::engine::{
    convergence_order, discrete_box, richardson_order, solve_backward, FieldState, NoSource, RadialGrid, SolveOptions,
};
use crate::error::Result;
use crate::functionals::{energy_weighted, FunctionalReport, WeightSpec};

/// Step ladder shared by the solver gates.
pub const LADDER: [f64; 3] = [0.1, 0.05, 0.025];
/// Ladder for residuals of the exterior cutoff profile, whose transition needs h ≤ 0.05 to be resolved.
pub const RESIDUAL_LADDER: [f64; 3] = [0.05, 0.025, 0.0125];

const T_FINAL: f64 = 12.0;
const T_START: f64 = 2.0;
const CENTER: f64 = 6.0;

fn g(x: f64) -> f64 {
    (-x * x).exp()
}

fn dg(x: f64) -> f64 {
    -2.0 * x * g(x)
}

/// u = g(t - r - c) - g(t + r - c) and ∂_t u: the ℓ = 0 d'Alembert solution regular at r = 0.
pub fn dalembert(t: f64, r: f64) -> (f64, f64) {
    let (a, b) = (t - r - CENTER, t + r - CENTER);
    (g(a) - g(b), dg(a) - dg(b))
}

pub struct DalembertRun {
    pub h: f64,
    pub max_error: f64,
    pub energy_drift: f64,
    pub roundtrip_error: f64,
    /// u(t₀, r = 4.5), on every ladder grid.
    pub probe: f64,
    pub end: FieldState,
}

/// Backward solve of the d'Alembert data from T to t₀, then the time-reversed
/// state solved back over the same span.
pub fn dalembert_run(h: f64) -> Result<DalembertRun> {
    let grid = RadialGrid::for_run(h, T_FINAL, T_START)?;
    let data = FieldState::from_fn(T_FINAL, grid, 0, &[0], |_, r| dalembert(T_FINAL, r));
    let opts = SolveOptions::new(0.5 * h, T_START, vec![T_START], vec![vec![0]]);
    let tr = solve_backward(vec![data.clone()], &NoSource, &opts, &mut [])?;
    let end = tr.records[0][0].clone();
    let max_error = (1..grid.j_max).map(|j| (end.u[0][j] - dalembert(T_START, grid.r(j)).0).abs()).fold(0.0, f64::max);
    let w1 = WeightSpec::constant(1.0)?;
    let e_t = energy_weighted(&data, &w1);
    let e_0 = energy_weighted(&end, &w1);

    let mut rev = end.clone();
    rev.t = T_FINAL;
    rev.v.iter_mut().flatten().for_each(|x| *x = -*x);
    let back = solve_backward(vec![rev], &NoSource, &opts, &mut [])?;
    let b = &back.records[0][0];
    let roundtrip_error = (0..grid.len())
        .map(|j| (b.u[0][j] - data.u[0][j]).abs().max((b.v[0][j] + data.v[0][j]).abs()))
        .fold(0.0, f64::max);
    Ok(DalembertRun {
        h,
        max_error,
        energy_drift: (e_t - e_0).abs() / e_t,
        roundtrip_error,
        probe: end.u[0][(4.5 / h).round() as usize],
        end,
    })
}

pub struct ValidateScenario;

impl Scenario for ValidateScenario {
    fn name(&self) -> &'static str {
        "validate"
    }

    fn summary(&self) -> &'static str {
        "solver gate: d'Alembert oracle, zero data, time-reversal round trip, energy conservation"
    }

    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        let acc = &spec.acceptance;
        let mut rep = ScenarioReport::new(self.name());
        rep.provenance.h = LADDER[LADDER.len() - 1];
        rep.provenance.band = 0;
        let runs: Vec<DalembertRun> = LADDER.iter().map(|&h| dalembert_run(h)).collect::<Result<_>>()?;
        rep.provenance.j_max = runs.last().map(|r| r.end.grid.j_max).unwrap_or(0);

        let errs: Vec<f64> = runs.iter().map(|r| r.max_error).collect();
        let order = convergence_order(&errs);
        rep.checks.push(Check::at_most(
            "dalembert_order",
            (order.order - acc.order_target).abs(),
            acc.order_tol,
            format!(
                "|observed order - {}| over h = {LADDER:?}; errors {errs:?}, order {:.4}",
                acc.order_target, order.order
            ),
        ));
        rep.checks.push(Check::at_least(
            "dalembert_monotone",
            order.monotone as u8 as f64,
            1.0,
            "errors shrink under refinement",
        ));

        let rt: Vec<f64> = runs.iter().map(|r| r.roundtrip_error).collect();
        let rt_order = convergence_order(&rt);
        rep.checks.push(Check::at_least(
            "roundtrip_order",
            rt_order.order,
            acc.min_order,
            format!("time-reversal round-trip errors {rt:?}"),
        ));
        for r in &runs {
            rep.checks.push(Check::at_most(
                &format!("energy_drift_h{}", r.h),
                r.energy_drift,
                10.0 * r.h * r.h,
                "relative change of ∫|∂φ|² between T and t0, against 10 h²",
            ));
        }

        let grid = RadialGrid::for_run(LADDER[0], T_FINAL, T_START)?;
        let zero = FieldState::zeros(T_FINAL, grid, 2);
        let active: Vec<usize> = (0..zero.u.len()).collect();
        let opts = SolveOptions::new(0.5 * LADDER[0], T_START, vec![T_START], vec![active]);
        let z = solve_backward(vec![zero], &NoSource, &opts, &mut [])?;
        rep.checks.push(Check::at_most("zero_data", z.records[0][0].max_abs(), 0.0, "zero data stays zero"));

        for r in &runs {
            rep.reports.push(FunctionalReport::compute(&r.end, spec.s, spec.mu)?);
        }
        rep.push_series("dalembert_error", LADDER.iter().copied().zip(errs).collect());
        rep.push_series("roundtrip_error", LADDER.iter().copied().zip(rt).collect());
        Ok(rep)
    }
}

/// Max |r·□φ| on r ≥ r_min for slices u(t - dt), u(t), u(t + dt) of an ℓ = 0 function.
fn box_residual(u: impl Fn(f64, f64) -> f64, t: f64, h: f64, r_min: f64, r_max: f64) -> Result<f64> {
    let n = (r_max / h).round() as usize + 1;
    let dt = 0.5 * h;
    let sl = |t: f64| (0..n).map(|j| u(t, j as f64 * h)).collect::<Vec<_>>();
    let res = discrete_box(&sl(t - dt), &sl(t), &sl(t + dt), dt, h, 0)?;
    let j0 = (r_min / h).ceil() as usize;
    Ok(res[j0.max(1)..n - 1].iter().fold(0.0, |a, x| a.max(x.abs())))
}

pub struct ConvergenceScenario;

impl Scenario for ConvergenceScenario {
    fn name(&self) -> &'static str {
        "convergence"
    }

    fn summary(&self) -> &'static str {
        "discrete □ of exact solutions (ψ_e, travelling waves) and Richardson orders"
    }

    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        let acc = &spec.acceptance;
        let mut rep = ScenarioReport::new(self.name());
        rep.provenance.h = RESIDUAL_LADDER[RESIDUAL_LADDER.len() - 1];
        let chi_e = Cutoff::chi_e();
        // u = r ψ_e = M χ_e(r - t) with M = 1
        let psi_e = |t: f64, r: f64| chi_e.value(r - t);
        let wave = |t: f64, r: f64| g(t - r - 3.0);
        let t = 5.0;
        for (name, detail, f) in [
            ("psi_e", "ψ_e with M = 1 on r ≥ 1/2", &psi_e as &dyn Fn(f64, f64) -> f64),
            ("travelling_wave", "g(t - r)/r on r ≥ 1/2", &wave),
        ] {
            let errs: Vec<f64> =
                RESIDUAL_LADDER.iter().map(|&h| box_residual(f, t, h, 0.5, 20.0)).collect::<Result<_>>()?;
            let o = convergence_order(&errs);
            rep.checks.push(Check::at_least(
                &format!("{name}_order"),
                o.order,
                acc.min_order,
                format!("{detail}: max |r □φ| = {errs:?}"),
            ));
            rep.push_series(&format!("{name}_residual"), RESIDUAL_LADDER.iter().copied().zip(errs).collect());
        }
        let probes: Vec<f64> = LADDER.iter().map(|&h| dalembert_run(h).map(|r| r.probe)).collect::<Result<_>>()?;
        let ro = richardson_order(probes[0], probes[1], probes[2]);
        rep.checks.push(Check::at_least(
            "richardson_order",
            ro.order,
            acc.min_order,
            format!("oracle-free order of r φ(t0, 4.5) from {probes:?}"),
        ));
        Ok(rep)
    }
}
