use std::f64::consts::PI;

use super::homogeneous::correction_window;
use super::{Check, ExponentCheck, RunSpec, Scenario, ScenarioReport};
use crate::engine::{solve_backward, FieldState, RadialGrid, SolveOptions, Source, Trajectory};
use crate::error::{Error, Result};
use crate::functionals::{energy_weighted, fit_decay, FunctionalReport, WeightSpec};
use crate::profile::Profile;

/// The ℓ = 0 linear solution φ₀₀ = c (F(r - t) - F(-r - t)) / r and its derivatives.
#[derive(Clone)]
pub struct RadialWave {
    pub profile: Profile,
    pub scale: f64,
}

impl RadialWave {
    /// (φ, ∂_t φ, ∂_r φ) of the ℓ = 0 coefficient.
    pub fn eval(&self, t: f64, r: f64) -> (f64, f64, f64) {
        let (a, ap) = self.profile.value_d1(r - t);
        let (b, bp) = self.profile.value_d1(-r - t);
        let c = self.scale;
        let phi = c * (a - b) / r;
        (phi, c * (bp - ap) / r, c * (ap + bp) / r - phi / r)
    }
}

/// □v = Q₀(∂(v + u₀), ∂(v + u₀)) with Q₀(∂u, ∂u) = -(∂_t u)² + (∂_r u)², on the ℓ = 0 mode.
pub struct NullSource {
    pub wave: RadialWave,
}

impl Source for NullSource {
    fn eval(&self, t: f64, state: &[FieldState], out: &mut [Vec<Vec<f64>>]) -> Result<()> {
        let st = &state[0];
        let ur = st.u_r(0);
        let y = (4.0 * PI).sqrt();
        for j in 1..st.grid.j_max {
            let r = st.grid.r(j);
            let (_, w_t, w_r) = self.wave.eval(t, r);
            let v_t = st.v[0][j] / r + w_t;
            let v_r = (ur[j] - st.u[0][j] / r) / r + w_r;
            out[0][0][j] = (v_r * v_r - v_t * v_t) / y;
        }
        Ok(())
    }
}

fn wave_from(spec: &RunSpec, scale: f64) -> Result<Option<RadialWave>> {
    let f0 = spec.field(&spec.f0)?;
    if let Some((i, _)) = f0.active().find(|(i, _)| *i != 0) {
        return Err(Error::range("F0", format!("the radial null model takes ℓ = 0 data only, got mode index {i}")));
    }
    Ok(f0.mode(0, 0).map(|p| RadialWave { profile: p.clone(), scale }))
}

fn solve(spec: &RunSpec, grid: RadialGrid, scale: f64) -> Result<Trajectory> {
    let data = FieldState::zeros(spec.t_final, grid, 0);
    let opts = SolveOptions::new(0.5 * spec.h, spec.t0, spec.record_times(), vec![vec![0]]);
    match wave_from(spec, scale)? {
        Some(wave) => solve_backward(vec![data], &NullSource { wave }, &opts, &mut []),
        None => solve_backward(vec![data], &crate::engine::NoSource, &opts, &mut []),
    }
}

pub struct NullRadialScenario;

impl Scenario for NullRadialScenario {
    fn name(&self) -> &'static str {
        "nullradial"
    }

    fn summary(&self) -> &'static str {
        "radial null-form model □v = Q₀(∂(v + u₀)) solved backward from trivial data"
    }

    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        let acc = &spec.acceptance;
        let grid = RadialGrid::for_run(spec.h, spec.t_final, spec.t0)?;
        let mut rep = ScenarioReport::new(self.name());
        rep.provenance.h = spec.h;
        rep.provenance.j_max = grid.j_max;
        rep.provenance.band = 0;
        let full = solve(spec, grid, 1.0)?;
        let half = solve(spec, grid, 0.5)?;
        let w1 = WeightSpec::constant(1.0)?;
        let norms = |tr: &Trajectory| -> Vec<(f64, f64)> {
            tr.records.iter().map(|r| (r[0].t, energy_weighted(&r[0], &w1).sqrt())).collect()
        };
        let dv = norms(&full);
        let dv_half = norms(&half);
        for r in full.records.iter().rev() {
            rep.reports.push(FunctionalReport::compute(&r[0], spec.s, spec.mu)?);
        }
        let reached = full.times.last().copied().unwrap_or(spec.t_final);
        rep.checks.push(Check::at_most(
            "reached_t0",
            reached - spec.t0,
            0.0,
            format!("backward solve completed down to t0 = {} without blowup", spec.t0),
        ));
        let at_t0 = |s: &[(f64, f64)]| s.iter().find(|p| p.0 == spec.t0).map(|p| p.1).unwrap_or(0.0);
        let (a, b) = (at_t0(&dv), at_t0(&dv_half));
        if a == 0.0 && b == 0.0 {
            rep.checks.push(Check::at_most(
                "zero_data",
                full.records.iter().fold(0.0f64, |m, r| m.max(r[0].max_abs())),
                0.0,
                "u0 = 0 gives v = 0",
            ));
        } else {
            let win = correction_window(spec.t0, spec.t_final);
            let target = -(0.5 - spec.mu);
            let mut e = ExponentCheck::from_fit("energy", &dv, win, target, acc.exponent_tol);
            if let Ok(f) = fit_decay(&dv, win.0, win.1) {
                e.pass = f.exponent <= -spec.delta;
                e.note = Some(format!("pass requires fitted exponent ≤ -delta = {}", -spec.delta));
            }
            rep.exponents.push(e);
            let ratio = if b > 0.0 { a / b } else { f64::INFINITY };
            rep.checks.push(Check::at_most(
                "amplitude_scaling",
                (ratio / 4.0 - 1.0).abs(),
                acc.scaling_tol,
                format!("‖∂v(t0)‖ ratio under halving the data amplitude: {ratio:.6} against 4"),
            ));
        }
        rep.push_series("energy_sqrt", dv);
        rep.push_series("energy_sqrt_half", dv_half);
        Ok(rep)
    }
}
