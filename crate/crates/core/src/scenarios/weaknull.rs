use rayon::prelude::*;

use super::homogeneous::{correction_window, slow_exponent};
use super::{spread, Check, RunSpec, Scenario, ScenarioReport};
use crate::angular::{eigenvalue, mode_count, mode_lm, GauntTable};
use crate::backscatter::{phi_k_modes, ConventionRegistry, FieldProduct, KernelConvention, KernelQuadratureSpec};
use crate::cutoff::Cutoff;
use crate::engine::{solve_backward, FieldState, RadialGrid, SolveOptions, Source, Trajectory};
use crate::error::{Error, Result};
use crate::functionals::{energy_weighted, norm_z_weighted, sup_envelope, FunctionalReport, WeightSpec};
use crate::profile::jb;
use crate::radiation::{derive_f1, derive_f1_slope, leading_slope, Approximant, Approximation, RadiationField};

/// Time of the interior □φ = (∂_t ψ)² cross-check.
pub const CROSSCHECK_T: f64 = 20.0;
/// Offsets r - t of the cross-check points.
pub const CROSSCHECK_OFFSETS: [f64; 5] = [-2.0, -1.0, -0.5, 0.0, 0.5];
/// Window of the envelope boundedness check.
pub const ENVELOPE_WINDOW: (f64, f64) = (4.0, 40.0);

/// All pieces of the system □ψ = 0, □φ = (∂_t ψ)² that do not depend on the run.
pub struct WeakNullSetup {
    pub psi: Approximation,
    pub phi01: Approximation,
    /// Leading slopes: ∂_q F₀ plus the ψ_e slope, and ∂_q F₁.
    pub d0: RadiationField,
    pub d1: RadiationField,
    pub table: GauntTable,
    pub band: usize,
    pub chi: Cutoff,
}

impl WeakNullSetup {
    pub fn new(spec: &RunSpec) -> Result<Self> {
        let f0 = spec.field(&spec.f0).map_err(|e| e.in_stage("psi"))?;
        let g0 = spec.field(&spec.g0).map_err(|e| e.in_stage("phi01"))?;
        let f1 = derive_f1(&f0).map_err(|e| e.in_stage("psi"))?;
        let g1 = derive_f1(&g0).map_err(|e| e.in_stage("phi01"))?;
        let psi = Approximation::new(&f0, &f1, spec.mass);
        let phi01 = Approximation::new(&g0, &g1, 0.0);
        let table = GauntTable::new(&psi.active_modes(), 2 * spec.band);
        Ok(WeakNullSetup {
            d0: leading_slope(&f0, spec.mass),
            d1: derive_f1_slope(&f0),
            psi,
            phi01,
            table,
            band: spec.band,
            chi: Cutoff::chi(),
        })
    }

    pub fn v_modes(&self) -> Vec<usize> {
        self.psi.active_modes()
    }

    pub fn w_modes(&self) -> Vec<usize> {
        let mut m = self.table.outputs();
        m.extend(self.phi01.active_modes());
        m.sort_unstable();
        m.dedup();
        m
    }

    /// ∂_t ψ on the input modes, given ∂_t v there.
    fn dt_psi(&self, t: f64, r: f64, dt_v: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut full = vec![0.0; mode_count(self.band)];
        self.psi.accumulate_dt_psi01_exact(t, r, 1.0, &mut full);
        self.psi.accumulate(Approximant::DtPsiE, t, r, 1.0, &mut full);
        self.table.inputs.iter().map(|&m| full[m] + dt_v(m)).collect()
    }

    /// χ (D₀/r + D₁/r²) on the input modes: the part of ∂_t ψ handed to the backscatter kernels.
    fn leading(&self, t: f64, r: f64) -> Vec<f64> {
        let q = r - t;
        let c = self.chi.value(jb(q) / r);
        if c == 0.0 {
            return vec![0.0; self.table.inputs.len()];
        }
        let a = self.d0.derivative_modes(q, 0);
        let b = self.d1.derivative_modes(q, 0);
        self.table.inputs.iter().map(|&m| c * (a.coeffs[m] / r + b.coeffs[m] / (r * r))).collect()
    }

    /// Mode coefficients of (∂_t ψ)² on band 2L.
    pub fn dt_psi_sq(&self, t: f64, r: f64, dt_v: impl Fn(usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; mode_count(2 * self.band)];
        self.table.square_into(&self.dt_psi(t, r, dt_v), 1.0, &mut out);
        out
    }

    /// The three backscatter sources n_k of ϕ = Φ²[D₀²] + Φ³[2 D₀ D₁] + Φ⁴[D₁²].
    pub fn strata(&self, decay: f64) -> Result<[FieldProduct; 3]> {
        Ok([
            FieldProduct::new(self.d0.clone(), self.d0.clone(), 1.0, decay)?,
            FieldProduct::new(self.d0.clone(), self.d1.clone(), 2.0, decay)?,
            FieldProduct::new(self.d1.clone(), self.d1.clone(), 1.0, decay)?,
        ])
    }
}

/// Sources of the coupled correction system: □v = -□ψ₀₁ and
/// □w = (∂_t ψ)² - χ²(D₀/r + D₁/r²)² - □φ₀₁.
pub struct WeakNullSource<'a> {
    pub setup: &'a WeakNullSetup,
}

impl Source for WeakNullSource<'_> {
    fn eval(&self, t: f64, state: &[FieldState], out: &mut [Vec<Vec<f64>>]) -> Result<()> {
        let s = self.setup;
        let v = &state[0];
        let grid = v.grid;
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (1..grid.j_max)
            .into_par_iter()
            .map(|j| {
                let r = grid.r(j);
                let mut sv = vec![0.0; mode_count(s.band)];
                s.psi.accumulate_box_psi01(t, r, -1.0, &mut sv);
                let mut sw = s.dt_psi_sq(t, r, |m| v.v[m][j] / r);
                s.table.square_into(&s.leading(t, r), -1.0, &mut sw);
                s.phi01.accumulate_box_psi01(t, r, -1.0, &mut sw);
                (sv, sw)
            })
            .collect();
        for (jj, (sv, sw)) in rows.into_iter().enumerate() {
            for (m, x) in sv.into_iter().enumerate() {
                out[0][m][jj + 1] = x;
            }
            for (m, x) in sw.into_iter().enumerate() {
                out[1][m][jj + 1] = x;
            }
        }
        Ok(())
    }
}

pub struct WeakNullRun {
    pub setup: WeakNullSetup,
    pub trajectory: Trajectory,
}

impl WeakNullRun {
    pub fn solve(spec: &RunSpec, grid: RadialGrid, record_times: Vec<f64>) -> Result<Self> {
        let setup = WeakNullSetup::new(spec)?;
        let data = vec![
            FieldState::zeros(spec.t_final, grid, spec.band),
            FieldState::zeros(spec.t_final, grid, 2 * spec.band),
        ];
        let opts = SolveOptions::new(0.5 * spec.h, spec.t0, record_times, vec![setup.v_modes(), setup.w_modes()]);
        let trajectory =
            solve_backward(data, &WeakNullSource { setup: &setup }, &opts, &mut []).map_err(|e| e.in_stage("solve"))?;
        Ok(WeakNullRun { setup, trajectory })
    }
}

/// One point of the interior cross-check.
#[derive(Clone, Debug)]
pub struct CrossPoint {
    pub r: f64,
    /// max over modes of |□φ - (∂_t ψ)²|
    pub residual: f64,
    /// max over modes of |(∂_t ψ)²|
    pub scale: f64,
}

/// Discrete □ of φ = w + φ₀₁ + ϕ against (∂_t ψ)² at (tc, tc + offset), from the
/// records at tc - h, tc, tc + h.
pub fn crosscheck(run: &WeakNullRun, tc: f64, conv: &dyn KernelConvention, decay: f64) -> Result<Vec<CrossPoint>> {
    let s = &run.setup;
    let rec = |t: f64| {
        run.trajectory.at(t).ok_or_else(|| Error::domain(format!("cross-check slice at t = {t} was not recorded")))
    };
    let cur = rec(tc)?;
    let h = cur[0].grid.h;
    let (prev, next) = (rec(tc - h)?, rec(tc + h)?);
    let strata = s.strata(decay)?;
    let qspec = KernelQuadratureSpec::default();
    let nw = mode_count(2 * s.band);
    let phi = |w: &FieldState, t: f64, j: usize| -> Result<Vec<f64>> {
        let r = j as f64 * h;
        let mut out: Vec<f64> = (0..nw).map(|m| w.u[m][j] / r).collect();
        s.phi01.accumulate(Approximant::Psi01, t, r, 1.0, &mut out);
        for (k, n) in (2u32..).zip(&strata) {
            for (o, x) in out.iter_mut().zip(phi_k_modes(n, k, t, r, conv, &qspec)?.coeffs) {
                *o += x;
            }
        }
        Ok(out)
    };
    CROSSCHECK_OFFSETS
        .iter()
        .map(|&off| {
            let j = ((tc + off) / h).round() as usize;
            let r = j as f64 * h;
            let c = phi(&cur[1], tc, j)?;
            let (tp, tm) = (phi(&next[1], tc + h, j)?, phi(&prev[1], tc - h, j)?);
            let (rp, rm) = (phi(&cur[1], tc, j + 1)?, phi(&cur[1], tc, j - 1)?);
            let rhs = s.dt_psi_sq(tc, r, |m| cur[0].v[m][j] / r);
            let mut residual: f64 = 0.0;
            for m in 0..nw {
                let lam = eigenvalue(mode_lm(m).0);
                let bx = -(tp[m] - 2.0 * c[m] + tm[m]) / (h * h)
                    + (rp[m] - 2.0 * c[m] + rm[m]) / (h * h)
                    + (rp[m] - rm[m]) / (h * r)
                    - lam * c[m] / (r * r);
                residual = residual.max((bx - rhs[m]).abs());
            }
            Ok(CrossPoint { r, residual, scale: rhs.iter().fold(0.0f64, |a, x| a.max(x.abs())) })
        })
        .collect()
}

pub struct WeakNullScenario;

impl Scenario for WeakNullScenario {
    fn name(&self) -> &'static str {
        "weaknull"
    }

    fn summary(&self) -> &'static str {
        "□ψ = 0, □φ = (∂_t ψ)²: φ = φ₀₁ + ϕ + w with backscatter ϕ and envelope, decay and □ cross-checks"
    }

    fn run(&self, spec: &RunSpec) -> Result<ScenarioReport> {
        let acc = &spec.acceptance;
        let conv = ConventionRegistry::standard().build(&spec.convention)?;
        let grid = RadialGrid::for_run(spec.h, spec.t_final, spec.t0)?;
        let tc = CROSSCHECK_T.min(0.5 * (spec.t0 + spec.t_final));
        let mut times = spec.record_times();
        times.extend([tc + spec.h, tc, tc - spec.h]);
        times.sort_by(|a, b| b.total_cmp(a));
        times.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let run = WeakNullRun::solve(spec, grid, times)?;
        let mut rep = ScenarioReport::new(self.name());
        rep.provenance.h = spec.h;
        rep.provenance.j_max = grid.j_max;
        rep.provenance.band = 2 * spec.band;

        let w1 = WeightSpec::constant(1.0)?;
        let mut norm = Vec::new();
        let mut env = Vec::new();
        let mut energy = Vec::new();
        for rec in run.trajectory.records.iter().rev() {
            let w = &rec[1];
            rep.reports.push(FunctionalReport::compute(w, spec.s, spec.mu)?);
            norm.push((w.t, norm_z_weighted(w, spec.s).total()));
            env.push((w.t, sup_envelope(w, spec.s)));
            energy.push((w.t, energy_weighted(w, &w1).sqrt()));
        }

        let zero = run.setup.w_modes().is_empty();
        if zero {
            let m = run.trajectory.records.iter().flatten().fold(0.0f64, |a, st| a.max(st.max_abs()));
            rep.checks.push(Check::at_most("zero_data", m, 0.0, "F0 = G0 = 0 and M = 0 give v = w = 0"));
        } else {
            let win = correction_window(spec.t0, spec.t_final);
            rep.exponents.push(slow_exponent("w_norm", &norm, win, -(0.5 + spec.gamma - spec.s), acc));
            let (lo, hi) = ENVELOPE_WINDOW;
            rep.checks.push(Check::at_most(
                "w_envelope_bounded",
                spread(&env, lo, hi),
                acc.envelope_ratio,
                format!("max/min of sup ⟨t+r⟩⟨t-r⟩^(s-1/2)|w| over t ∈ [{lo}, {hi}]"),
            ));
            let peak = env.iter().filter(|p| p.0 >= lo && p.0 <= hi).fold(0.0f64, |a, p| a.max(p.1));
            rep.checks.push(Check::info(
                "w_envelope_peak",
                peak,
                format!("sup of the w envelope over t ∈ [{lo}, {hi}]"),
            ));
            let pts = crosscheck(&run, tc, conv.as_ref(), spec.a).map_err(|e| e.in_stage("crosscheck"))?;
            let scale = pts.iter().fold(0.0f64, |a, p| a.max(p.scale));
            let worst = pts.iter().fold(0.0f64, |a, p| a.max(p.residual));
            let rel = if scale > 0.0 { worst / scale } else { worst };
            let at: Vec<String> = pts.iter().map(|p| format!("{:.2}: {:.2e}", p.r, p.residual)).collect();
            rep.checks.push(Check::at_most(
                "crosscheck",
                rel,
                acc.crosscheck_tol,
                format!(
                    "max |□φ - (∂_t ψ)²| over max |(∂_t ψ)²| = {scale:e} at t = {tc}, h = {}, {} kernels; per r {{{}}}",
                    spec.h,
                    conv.name(),
                    at.join(", ")
                ),
            ));
        }
        rep.push_series("w_norm", norm);
        rep.push_series("w_envelope", env);
        rep.push_series("w_energy_sqrt", energy);
        Ok(rep)
    }
}
