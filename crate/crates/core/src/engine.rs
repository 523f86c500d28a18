//! Method-of-lines evolution of u = r·φ per spherical-harmonic mode.
//!
//! Each mode obeys u_tt = u_rr - ℓ(ℓ+1) u / r² - r S, where S is the
//! right-hand side of □φ = S with □ = -∂_t² + Δ. Space is second-order centered,
//! time is classical RK4, u(0) = u(R_max) = 0.

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::{eigenvalue, mode_count, mode_lm};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadialGrid {
    pub h: f64,
    pub j_max: usize,
}

impl RadialGrid {
    pub fn new(h: f64, j_max: usize) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) || j_max < 4 {
            return Err(Error::range("grid", format!("need h > 0 and J ≥ 4, got h = {h}, J = {j_max}")));
        }
        Ok(RadialGrid { h, j_max })
    }

    /// Smallest grid with R_max ≥ 2T + (T - t0) + 10h.
    pub fn for_run(h: f64, t_final: f64, t0: f64) -> Result<Self> {
        let r = 2.0 * t_final + (t_final - t0) + 10.0 * h;
        Self::new(h, (r / h).ceil() as usize + 1)
    }

    pub fn r(&self, j: usize) -> f64 {
        j as f64 * self.h
    }

    pub fn r_max(&self) -> f64 {
        self.j_max as f64 * self.h
    }

    pub fn len(&self) -> usize {
        self.j_max + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One time slice of one field: per mode, u = r·φ_ℓm and v = ∂_t u on the grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub t: f64,
    pub grid: RadialGrid,
    pub band: usize,
    pub u: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl FieldState {
    pub fn zeros(t: f64, grid: RadialGrid, band: usize) -> Self {
        let n = mode_count(band);
        FieldState { t, grid, band, u: vec![vec![0.0; grid.len()]; n], v: vec![vec![0.0; grid.len()]; n] }
    }

    /// Fills mode arrays from `f(mode, r) -> (u, ∂_t u)` at interior points.
    pub fn from_fn(
        t: f64,
        grid: RadialGrid,
        band: usize,
        modes: &[usize],
        f: impl Fn(usize, f64) -> (f64, f64),
    ) -> Self {
        let mut s = Self::zeros(t, grid, band);
        for &m in modes {
            for j in 1..grid.j_max {
                let (u, v) = f(m, grid.r(j));
                s.u[m][j] = u;
                s.v[m][j] = v;
            }
        }
        s
    }

    pub fn max_abs(&self) -> f64 {
        self.u.iter().chain(&self.v).flat_map(|a| a.iter()).fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.u.iter().chain(&self.v).all(|a| a.iter().all(|&x| x == 0.0))
    }

    /// Modes with any nonzero entry.
    pub fn nonzero_modes(&self) -> Vec<usize> {
        (0..self.u.len()).filter(|&m| self.u[m].iter().chain(&self.v[m]).any(|&x| x != 0.0)).collect()
    }

    pub fn axpy(&mut self, a: f64, o: &FieldState) {
        for (x, y) in self.u.iter_mut().zip(&o.u).chain(self.v.iter_mut().zip(&o.v)) {
            for (p, q) in x.iter_mut().zip(y) {
                *p += a * q;
            }
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        let mut s = self.clone();
        for x in s.u.iter_mut().chain(s.v.iter_mut()) {
            x.iter_mut().for_each(|p| *p *= a);
        }
        s
    }

    /// Physical value φ_00(t, 0) of the monopole from u ≈ c r + O(r³).
    pub fn origin_value(&self) -> f64 {
        let h = self.grid.h;
        (8.0 * self.u[0][1] - self.u[0][2]) / (6.0 * h) / (4.0 * std::f64::consts::PI).sqrt()
    }

    /// ∂_r u by centered differences; the origin uses the parity extension of degree ℓ.
    pub fn u_r(&self, mode: usize) -> Vec<f64> {
        let u = &self.u[mode];
        let h = self.grid.h;
        let n = u.len();
        let mut d = vec![0.0; n];
        for j in 1..n - 1 {
            d[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
        }
        let l = mode_lm(mode).0;
        // ghost u(-h) = (-1)^(ℓ+1) u(h)
        d[0] = if l % 2 == 0 { u[1] / h } else { 0.0 };
        d[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
        d
    }
}

/// Right-hand side of □φ = S for every evolved field.
pub trait Source: Sync {
    /// Writes S into `out[field][mode][j]` (buffers arrive zeroed) at time t for the stage state.
    fn eval(&self, t: f64, state: &[FieldState], out: &mut [Vec<Vec<f64>>]) -> Result<()>;
}

pub struct NoSource;

impl Source for NoSource {
    fn eval(&self, _t: f64, _state: &[FieldState], _out: &mut [Vec<Vec<f64>>]) -> Result<()> {
        Ok(())
    }
}

/// Analytic source given pointwise per mode, independent of the state.
pub struct FnSource<F: Fn(f64, f64, &mut [f64]) + Sync> {
    pub f: F,
}

impl<F: Fn(f64, f64, &mut [f64]) + Sync> Source for FnSource<F> {
    fn eval(&self, t: f64, state: &[FieldState], out: &mut [Vec<Vec<f64>>]) -> Result<()> {
        let grid = state[0].grid;
        let n = mode_count(state[0].band);
        let rows: Vec<Vec<f64>> = (1..grid.j_max)
            .into_par_iter()
            .map(|j| {
                let mut row = vec![0.0; n];
                (self.f)(t, grid.r(j), &mut row);
                row
            })
            .collect();
        for (jj, row) in rows.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    out[0][m][jj + 1] = *v;
                }
            }
        }
        Ok(())
    }
}

/// Hook invoked at the initial time and after every completed step.
pub trait Observer {
    fn observe(&mut self, state: &[FieldState], source: &dyn Source) -> Result<()>;
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Requested step size (positive); steps are shortened to land on record times.
    pub dt: f64,
    pub t0: f64,
    /// Output times, strictly decreasing, within [t0, T].
    pub record_times: Vec<f64>,
    /// Per field: modes to evolve (others are left untouched).
    pub active: Vec<Vec<usize>>,
    /// Cells next to R_max that must stay quiet.
    pub margin_cells: usize,
    /// Relative amplitude that counts as a containment breach.
    pub breach_tol: f64,
}

impl SolveOptions {
    pub fn new(dt: f64, t0: f64, record_times: Vec<f64>, active: Vec<Vec<usize>>) -> Self {
        SolveOptions { dt, t0, record_times, active, margin_cells: 10, breach_tol: 1e-8 }
    }
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// records[k][field] is the state at times[k].
    pub records: Vec<Vec<FieldState>>,
    pub steps: usize,
}

impl Trajectory {
    pub fn at(&self, t: f64) -> Option<&[FieldState]> {
        self.times.iter().position(|&x| (x - t).abs() < 1e-9).map(|k| self.records[k].as_slice())
    }
}

/// Largest stable RK4 step for the active modes: 0.5 h, tightened when the
/// centrifugal term ℓ(ℓ+1)/h² at the first interior node dominates.
pub fn stable_dt(h: f64, max_l: usize) -> f64 {
    let lam = eigenvalue(max_l);
    (0.5 * h).min(2.6 * h / (4.0 + lam).sqrt())
}

fn rhs(state: &[FieldState], s: &[Vec<Vec<f64>>], active: &[Vec<usize>], k: &mut [FieldState]) {
    for (f, st) in state.iter().enumerate() {
        let h = st.grid.h;
        let inv_h2 = 1.0 / (h * h);
        let kf = &mut k[f];
        let n = st.grid.len();
        let mask: Vec<bool> = {
            let mut m = vec![false; st.u.len()];
            active[f].iter().for_each(|&i| m[i] = true);
            m
        };
        kf.u.par_iter_mut().zip(kf.v.par_iter_mut()).enumerate().filter(|(i, _)| mask[*i]).for_each(|(i, (du, dv))| {
            let u = &st.u[i];
            let v = &st.v[i];
            let src = &s[f][i];
            let lam = eigenvalue(mode_lm(i).0);
            du[0] = 0.0;
            dv[0] = 0.0;
            du[n - 1] = 0.0;
            dv[n - 1] = 0.0;
            for j in 1..n - 1 {
                let r = j as f64 * h;
                du[j] = v[j];
                dv[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) * inv_h2 - lam * u[j] / (r * r) - r * src[j];
            }
        });
    }
}

fn zero_buffers(s: &mut [Vec<Vec<f64>>], active: &[Vec<usize>]) {
    for (f, modes) in active.iter().enumerate() {
        for &m in modes {
            s[f][m].iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

fn stage(y: &[FieldState], a: f64, k: &[FieldState], active: &[Vec<usize>], out: &mut [FieldState], t: f64) {
    for (f, modes) in active.iter().enumerate() {
        out[f].t = t;
        for &m in modes {
            for (o, (yy, kk)) in out[f].u[m].iter_mut().zip(y[f].u[m].iter().zip(&k[f].u[m])) {
                *o = yy + a * kk;
            }
            for (o, (yy, kk)) in out[f].v[m].iter_mut().zip(y[f].v[m].iter().zip(&k[f].v[m])) {
                *o = yy + a * kk;
            }
        }
    }
}

/// Marches the fields from their common time T down to `opts.t0`.
pub fn solve_backward(
    data: Vec<FieldState>,
    source: &dyn Source,
    opts: &SolveOptions,
    observers: &mut [&mut dyn Observer],
) -> Result<Trajectory> {
    assert!(!data.is_empty());
    assert_eq!(data.len(), opts.active.len(), "one active-mode list per field");
    let t_final = data[0].t;
    let grid = data[0].grid;
    let h = grid.h;
    if !(opts.dt > 0.0) || opts.dt > 0.5 * h * (1.0 + 1e-12) {
        return Err(Error::Cfl { dt: opts.dt, limit: 0.5 * h });
    }
    if !(opts.t0 < t_final) {
        return Err(Error::range("t0", format!("need t0 < T, got t0 = {}, T = {t_final}", opts.t0)));
    }
    let max_l = opts.active.iter().flatten().map(|&m| mode_lm(m).0).max().unwrap_or(0);
    let dt = opts.dt.min(stable_dt(h, max_l));
    let mut targets: Vec<f64> = opts.record_times.iter().copied().filter(|&t| t > opts.t0 && t < t_final).collect();
    if opts.record_times.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::range("record_times", "must be strictly decreasing"));
    }
    targets.push(opts.t0);

    let mut y = data;
    let mut k1 = y.clone();
    let mut k2 = y.clone();
    let mut k3 = y.clone();
    let mut k4 = y.clone();
    let mut ys = y.clone();
    let mut sbuf: Vec<Vec<Vec<f64>>> = y.iter().map(|f| vec![vec![0.0; grid.len()]; f.u.len()]).collect();

    let mut traj = Trajectory { times: Vec::new(), records: Vec::new(), steps: 0 };
    let wants = |t: f64| opts.record_times.iter().any(|&x| (x - t).abs() < 1e-12 * (1.0 + t.abs()));
    if wants(t_final) {
        traj.times.push(t_final);
        traj.records.push(y.clone());
    }
    for o in observers.iter_mut() {
        o.observe(&y, source)?;
    }
    let mut t = t_final;
    let mut last_bounded = t;
    let margin_from = grid.j_max.saturating_sub(opts.margin_cells);
    for &target in &targets {
        let n = (((t - target) / dt) - 1e-9).ceil().max(1.0) as usize;
        let step = -(t - target) / n as f64;
        for i in 0..n {
            let t_next = if i + 1 == n { target } else { t + step };
            zero_buffers(&mut sbuf, &opts.active);
            source.eval(t, &y, &mut sbuf)?;
            rhs(&y, &sbuf, &opts.active, &mut k1);

            stage(&y, 0.5 * step, &k1, &opts.active, &mut ys, t + 0.5 * step);
            zero_buffers(&mut sbuf, &opts.active);
            source.eval(t + 0.5 * step, &ys, &mut sbuf)?;
            rhs(&ys, &sbuf, &opts.active, &mut k2);

            stage(&y, 0.5 * step, &k2, &opts.active, &mut ys, t + 0.5 * step);
            zero_buffers(&mut sbuf, &opts.active);
            source.eval(t + 0.5 * step, &ys, &mut sbuf)?;
            rhs(&ys, &sbuf, &opts.active, &mut k3);

            stage(&y, step, &k3, &opts.active, &mut ys, t_next);
            zero_buffers(&mut sbuf, &opts.active);
            source.eval(t_next, &ys, &mut sbuf)?;
            rhs(&ys, &sbuf, &opts.active, &mut k4);

            let w = step / 6.0;
            for (f, modes) in opts.active.iter().enumerate() {
                y[f].t = t_next;
                for &m in modes {
                    for j in 0..grid.len() {
                        y[f].u[m][j] += w * (k1[f].u[m][j] + 2.0 * k2[f].u[m][j] + 2.0 * k3[f].u[m][j] + k4[f].u[m][j]);
                        y[f].v[m][j] += w * (k1[f].v[m][j] + 2.0 * k2[f].v[m][j] + 2.0 * k3[f].v[m][j] + k4[f].v[m][j]);
                    }
                }
            }
            t = t_next;
            traj.steps += 1;

            let mut peak: f64 = 0.0;
            let mut edge: f64 = 0.0;
            for (f, modes) in opts.active.iter().enumerate() {
                for &m in modes {
                    for (j, x) in y[f].u[m].iter().enumerate() {
                        if !x.is_finite() {
                            return Err(Error::Blowup { t, last_bounded });
                        }
                        peak = peak.max(x.abs());
                        if j >= margin_from {
                            edge = edge.max(x.abs());
                        }
                    }
                }
            }
            if edge > opts.breach_tol * peak.max(1e-300) && edge > 1e-300 {
                return Err(Error::Containment { t, amplitude: edge, radius: grid.r(margin_from) });
            }
            last_bounded = t;
            for o in observers.iter_mut() {
                o.observe(&y, source)?;
            }
        }
        if wants(target) {
            traj.times.push(target);
            traj.records.push(y.clone());
        }
    }
    Ok(traj)
}

/// r·(discrete □) of one mode from three equally spaced slices: the interior
/// residual of -∂_t² + ∂_r² - ℓ(ℓ+1)/r² applied to u.
pub fn discrete_box(prev: &[f64], cur: &[f64], next: &[f64], dt: f64, h: f64, l: usize) -> Result<Vec<f64>> {
    if prev.len() != cur.len() || next.len() != cur.len() || cur.len() < 3 {
        return Err(Error::domain("discrete_box: slices must have equal length ≥ 3"));
    }
    let lam = eigenvalue(l);
    let n = cur.len();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let r = j as f64 * h;
        let utt = (next[j] - 2.0 * cur[j] + prev[j]) / (dt * dt);
        let urr = (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) / (h * h);
        out[j] = -utt + urr - lam * cur[j] / (r * r);
    }
    Ok(out)
}

/// Same as `discrete_box` with ∂_t² u supplied analytically.
pub fn discrete_box_with_utt(cur: &[f64], utt: &[f64], h: f64, l: usize) -> Vec<f64> {
    let lam = eigenvalue(l);
    let n = cur.len();
    let mut out = vec![0.0; n];
    for j in 1..n - 1 {
        let r = j as f64 * h;
        out[j] = -utt[j] + (cur[j + 1] - 2.0 * cur[j] + cur[j - 1]) / (h * h) - lam * cur[j] / (r * r);
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceOrder {
    pub order: f64,
    pub pairwise: Vec<f64>,
    pub monotone: bool,
    pub warning: Option<String>,
}

/// Observed order from errors at h, h/2, h/4, ...
pub fn convergence_order(errors: &[f64]) -> ConvergenceOrder {
    assert!(errors.len() >= 2);
    let pairwise: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let monotone = errors.windows(2).all(|w| w[1] < w[0]);
    let warning = (!monotone).then(|| format!("errors are not monotonically decreasing: {errors:?}"));
    ConvergenceOrder { order: *pairwise.last().unwrap(), pairwise, monotone, warning }
}

/// Oracle-free order from values at h, h/2, h/4 (Richardson triple).
pub fn richardson_order(v_h: f64, v_h2: f64, v_h4: f64) -> ConvergenceOrder {
    convergence_order(&[(v_h - v_h2).abs(), (v_h2 - v_h4).abs()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::angular::mode_index;

    fn g(x: f64) -> f64 {
        (-x * x).exp()
    }

    // [TRIVIAL] zero data and zero source stay zero
    #[test]
    fn zero_stays_zero() {
        let grid = RadialGrid::for_run(0.1, 10.0, 2.0).unwrap();
        let data = FieldState::zeros(10.0, grid, 2);
        let opts = SolveOptions::new(0.05, 2.0, vec![10.0, 6.0, 2.0], vec![vec![0, 4, 6]]);
        let tr = solve_backward(vec![data], &NoSource, &opts, &mut []).unwrap();
        assert_eq!(tr.times, vec![10.0, 6.0, 2.0]);
        assert!(tr.records.iter().all(|r| r[0].is_zero()));
    }

    // [TRIVIAL] CFL and ordering violations are rejected
    #[test]
    fn rejects_bad_steps() {
        let grid = RadialGrid::for_run(0.1, 10.0, 2.0).unwrap();
        let data = FieldState::zeros(10.0, grid, 0);
        let opts = SolveOptions::new(0.06, 2.0, vec![], vec![vec![0]]);
        assert!(matches!(solve_backward(vec![data.clone()], &NoSource, &opts, &mut []), Err(Error::Cfl { .. })));
        let opts = SolveOptions::new(0.05, 2.0, vec![4.0, 6.0], vec![vec![0]]);
        assert!(solve_backward(vec![data], &NoSource, &opts, &mut []).is_err());
    }

    fn dalembert_error(h: f64) -> f64 {
        let (tf, t0) = (12.0, 2.0);
        let grid = RadialGrid::for_run(h, tf, t0).unwrap();
        let exact = |t: f64, r: f64| {
            (
                g(t - r - 6.0) - g(t + r - 6.0),
                -2.0 * (t - r - 6.0) * g(t - r - 6.0) + 2.0 * (t + r - 6.0) * g(t + r - 6.0),
            )
        };
        let data = FieldState::from_fn(tf, grid, 0, &[0], |_, r| exact(tf, r));
        let opts = SolveOptions::new(0.5 * h, t0, vec![t0], vec![vec![0]]);
        let tr = solve_backward(vec![data], &NoSource, &opts, &mut []).unwrap();
        let s = &tr.records[0][0];
        (1..grid.j_max).map(|j| (s.u[0][j] - exact(t0, grid.r(j)).0).abs()).fold(0.0, f64::max)
    }

    // [DERIVED] d'Alembert oracle, second order
    #[test]
    fn dalembert_second_order() {
        let e: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&h| dalembert_error(h)).collect();
        let c = convergence_order(&e);
        assert!((c.order - 2.0).abs() < 0.1, "{e:?} {c:?}");
    }

    // [DERIVED] containment breach detected when the grid is too small
    #[test]
    fn containment_breach() {
        let grid = RadialGrid::new(0.1, 200).unwrap();
        let data = FieldState::from_fn(10.0, grid, 0, &[0], |_, r| (g(r - 10.0), 0.0));
        let opts = SolveOptions::new(0.05, 1.0, vec![], vec![vec![0]]);
        assert!(matches!(solve_backward(vec![data], &NoSource, &opts, &mut []), Err(Error::Containment { .. })));
    }

    // [TRIVIAL] orders of exact sequences
    #[test]
    fn orders() {
        assert!((convergence_order(&[1.0, 0.25, 0.0625]).order - 2.0).abs() < 1e-12);
        assert!((convergence_order(&[1.0, 0.5, 0.25]).order - 1.0).abs() < 1e-12);
        assert!(!convergence_order(&[1.0, 2.0, 0.5]).monotone);
        // v(h) = 1 + h²: differences shrink by 4
        let r = richardson_order(1.0 + 0.01, 1.0 + 0.0025, 1.0 + 0.000625);
        assert!((r.order - 2.0).abs() < 1e-9);
    }

    // [DERIVED] discrete □ of g(t-r) (ℓ=0) converges at order 2
    #[test]
    fn discrete_box_travelling_wave() {
        let mut errs = Vec::new();
        for h in [0.1, 0.05, 0.025] {
            let n = (20.0 / h) as usize + 1;
            let sl = |t: f64| (0..n).map(|j| g(t - j as f64 * h - 3.0)).collect::<Vec<_>>();
            let res = discrete_box(&sl(5.0 - 0.5 * h), &sl(5.0), &sl(5.0 + 0.5 * h), 0.5 * h, h, 0).unwrap();
            errs.push(res.iter().fold(0.0f64, |a, x| a.max(x.abs())));
        }
        let c = convergence_order(&errs);
        assert!(c.order >= 1.9, "{errs:?}");
    }

    // [DERIVED] linearity: solution for a+b data equals sum of solutions
    #[test]
    fn linearity() {
        let grid = RadialGrid::for_run(0.1, 8.0, 2.0).unwrap();
        let idx = mode_index(1, 0);
        let a = FieldState::from_fn(8.0, grid, 1, &[idx], |_, r| (r * r * g(r - 4.0), 0.0));
        let b = FieldState::from_fn(8.0, grid, 1, &[idx], |_, r| (0.0, r * g(r - 3.0)));
        let mut ab = a.clone();
        ab.axpy(1.0, &b);
        let opts = SolveOptions::new(0.05, 2.0, vec![2.0], vec![vec![idx]]);
        let ra = solve_backward(vec![a], &NoSource, &opts, &mut []).unwrap();
        let rb = solve_backward(vec![b], &NoSource, &opts, &mut []).unwrap();
        let rab = solve_backward(vec![ab], &NoSource, &opts, &mut []).unwrap();
        for j in 0..grid.len() {
            let s = ra.records[0][0].u[idx][j] + rb.records[0][0].u[idx][j];
            assert!((rab.records[0][0].u[idx][j] - s).abs() < 1e-12);
        }
    }

    // [DERIVED] origin extraction of φ(0) from u = c r + d r³
    #[test]
    fn origin_value() {
        let grid = RadialGrid::new(0.05, 100).unwrap();
        let c = 0.7 * (4.0 * std::f64::consts::PI).sqrt();
        let s = FieldState::from_fn(0.0, grid, 0, &[0], |_, r| (c * r - 0.3 * r.powi(3), 0.0));
        assert!((s.origin_value() - 0.7).abs() < 1e-12);
    }
}
