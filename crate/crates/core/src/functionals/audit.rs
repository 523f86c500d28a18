//! Observers accumulating cone fluxes and the conformal Morawetz balance during a
//! backward solve, plus the pointwise sign and Hardy checks.

use serde::Serialize;

use rayon::prelude::*;

use super::{bracket, interp_at, mode_data, radial_integral, ConformalF, ModeData, Pt};
use crate::angular::eigenvalue;
use crate::engine::{FieldState, Observer, Source};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};

fn eval_source(source: &dyn Source, state: &[FieldState], field: usize) -> Result<Vec<Vec<f64>>> {
    let mut buf: Vec<Vec<Vec<f64>>> = state.iter().map(|f| vec![vec![0.0; f.grid.len()]; f.u.len()]).collect();
    source.eval(state[0].t, state, &mut buf)?;
    Ok(buf.swap_remove(field))
}

/// L L u = 2u_rr + 2∂_r v - ℓ(ℓ+1)u/r² - r S at an interior node.
fn ll_u(md: &ModeData, src: &[f64], h: f64, j: usize) -> f64 {
    let r = j as f64 * h;
    let urr = (md.u[j + 1] - 2.0 * md.u[j] + md.u[j - 1]) / (h * h);
    let vr = (md.v[j + 1] - md.v[j - 1]) / (2.0 * h);
    2.0 * urr + 2.0 * vr - md.lam * md.u[j] / (r * r) - r * src[j]
}

/// Integrand carried along the cones t - r = t₂ - R.
#[derive(Clone, Copy, Debug, Serialize)]
#[serde(tag = "kind")]
pub enum ConeKind {
    /// ⟨t+r⟩^{2s}|L(rφ)|² + ⟨t-r⟩^{2s}|∇̸(rφ)|².
    Conformal { s: f64 },
    /// |∂̄φ|² (1+q₋)^{1+2γ} dS.
    Tangential { gamma: f64 },
    /// (t+r)² Σ (1+ℓ(ℓ+1))² |L L(rφ)_ℓm|².
    Origin,
}

impl ConeKind {
    fn needs_source(&self) -> bool {
        matches!(self, ConeKind::Origin)
    }

    fn integrand(&self, state: &FieldState, data: &[(usize, ModeData)], src: Option<&[Vec<f64>]>, r: f64) -> f64 {
        let h = state.grid.h;
        let n = state.grid.len();
        let t = state.t;
        match *self {
            ConeKind::Conformal { s } => {
                let f = ConformalF { s };
                let (fp, fm) = (f.f(t + r), f.f(t - r));
                data.iter()
                    .map(|(_, md)| {
                        interp_at(
                            |j| {
                                let a = md.v[j] + md.ur[j];
                                fp * a * a + fm * md.lam * md.uor[j] * md.uor[j]
                            },
                            n,
                            h,
                            r,
                        )
                    })
                    .sum()
            }
            ConeKind::Tangential { gamma } => {
                let qm = (t - r).max(0.0);
                let w = (1.0 + qm).powf(1.0 + 2.0 * gamma);
                w * data
                    .iter()
                    .map(|(_, md)| {
                        interp_at(
                            |j| {
                                let a = md.v[j] + md.ur[j] - md.uor[j];
                                a * a + md.lam * md.uor[j] * md.uor[j]
                            },
                            n,
                            h,
                            r,
                        )
                    })
                    .sum::<f64>()
            }
            ConeKind::Origin => {
                let src = src.expect("origin cone integrand needs the source");
                let node = |md: &ModeData, m: usize, j: usize| -> f64 {
                    let jj = j.clamp(1, n - 2);
                    let val = |k: usize| ll_u(md, &src[m], h, k);
                    if j == 0 {
                        2.0 * val(1) - val(2)
                    } else {
                        val(jj)
                    }
                };
                let w = (t + r) * (t + r);
                w * data
                    .iter()
                    .map(|(m, md)| {
                        let ang = (1.0 + md.lam) * (1.0 + md.lam);
                        ang * interp_at(
                            |j| {
                                let g = node(md, *m, j);
                                g * g
                            },
                            n,
                            h,
                            r,
                        )
                    })
                    .sum::<f64>()
            }
        }
    }
}

/// Accumulates ∫ (integrand on the cone r = R - (t₂ - t)) dt for each label R,
/// with t₂ the time of the first observed state.
pub struct ConeFlux {
    pub field: usize,
    pub kind: ConeKind,
    pub labels: Vec<f64>,
    t2: Option<f64>,
    acc: Vec<f64>,
    prev: Vec<Option<(f64, f64)>>,
}

impl ConeFlux {
    pub fn new(field: usize, kind: ConeKind, labels: Vec<f64>) -> Self {
        let n = labels.len();
        ConeFlux { field, kind, labels, t2: None, acc: vec![0.0; n], prev: vec![None; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.acc
    }

    pub fn start_time(&self) -> Option<f64> {
        self.t2
    }
}

impl Observer for ConeFlux {
    fn observe(&mut self, state: &[FieldState], source: &dyn Source) -> Result<()> {
        let st = &state[self.field];
        let t = st.t;
        let t2 = *self.t2.get_or_insert(t);
        let src = if self.kind.needs_source() { Some(eval_source(source, state, self.field)?) } else { None };
        let data = mode_data(st);
        for (i, &big_r) in self.labels.iter().enumerate() {
            let mut r = big_r - (t2 - t);
            if r < 0.0 && r > -1e-9 * (1.0 + big_r) {
                r = 0.0;
            }
            if r < 0.0 {
                continue;
            }
            if r > st.grid.r_max() {
                return Err(Error::domain(format!(
                    "cone R = {big_r} exits the grid (r = {r} > {}) at t = {t}",
                    st.grid.r_max()
                )));
            }
            let g = if data.is_empty() { 0.0 } else { self.kind.integrand(st, &data, src.as_deref(), r) };
            if let Some((tp, gp)) = self.prev[i] {
                self.acc[i] += 0.5 * (g + gp) * (tp - t);
            }
            self.prev[i] = Some((t, g));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct MorawetzBalance {
    pub t1: f64,
    pub t2: f64,
    pub energy_t1: f64,
    pub energy_t2: f64,
    pub flux: f64,
    pub bulk: f64,
    pub source: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Tracks E_{R-(t₂-t)}(t) + 2F_R^s(t, t₂) against E_R(t₂) + 2∫∫(r⁻¹X(rφ)□φ - r∂_rΩ|∇̸φ|²).
pub struct MorawetzAudit {
    pub field: usize,
    pub s: f64,
    pub radius: f64,
    t2: Option<f64>,
    e2: f64,
    e_now: f64,
    t_now: f64,
    flux: f64,
    bulk: f64,
    src: f64,
    prev: Option<(f64, f64, f64, f64)>,
}

impl MorawetzAudit {
    pub fn new(field: usize, s: f64, radius: f64) -> Self {
        MorawetzAudit {
            field,
            s,
            radius,
            t2: None,
            e2: 0.0,
            e_now: 0.0,
            t_now: 0.0,
            flux: 0.0,
            bulk: 0.0,
            src: 0.0,
            prev: None,
        }
    }

    pub fn balance(&self) -> MorawetzBalance {
        let lhs = self.e_now + 2.0 * self.flux;
        let rhs = self.e2 + 2.0 * (self.bulk + self.src);
        let scale = lhs.abs().max(rhs.abs());
        MorawetzBalance {
            t1: self.t_now,
            t2: self.t2.unwrap_or(self.t_now),
            energy_t1: self.e_now,
            energy_t2: self.e2,
            flux: self.flux,
            bulk: self.bulk,
            source: self.src,
            lhs,
            rhs,
            residual: if scale > 0.0 { (lhs - rhs) / scale } else { 0.0 },
        }
    }
}

impl Observer for MorawetzAudit {
    fn observe(&mut self, state: &[FieldState], source: &dyn Source) -> Result<()> {
        let st = &state[self.field];
        let t = st.t;
        let t2 = *self.t2.get_or_insert(t);
        let rc = self.radius - (t2 - t);
        if rc < -1e-9 * (1.0 + self.radius) {
            return Ok(());
        }
        let rc = rc.max(0.0);
        if self.radius > st.grid.r_max() {
            return Err(Error::domain(format!(
                "audit radius {} exceeds the grid radius {}",
                self.radius,
                st.grid.r_max()
            )));
        }
        let s = self.s;
        let f = ConformalF { s };
        let e = super::conformal_energy_er(st, s, rc);
        let flux_g = ConeKind::Conformal { s }.integrand(st, &mode_data(st), None, rc);
        let bulk_g = radial_integral(st, rc, |p| {
            if p.r == 0.0 {
                return 0.0;
            }
            let slack = (f.f(p.t + p.r) - f.f(p.t - p.r)) / p.r - f.d1(p.t + p.r) - f.d1(p.t - p.r);
            slack * p.lam * p.uor * p.uor
        });
        let srcv = eval_source(source, state, self.field)?;
        let h = st.grid.h;
        let n = ((rc / h).ceil() as usize + 2).min(st.grid.len());
        let src_g: f64 = mode_data(st)
            .iter()
            .map(|(m, md)| {
                let vals: Vec<f64> = (0..n)
                    .map(|j| {
                        let r = j as f64 * h;
                        let x = f.f(t + r) * (md.v[j] + md.ur[j]) + f.f(t - r) * (md.v[j] - md.ur[j]);
                        r * x * srcv[*m][j]
                    })
                    .collect();
                super::trapezoid_to(&vals, h, rc)
            })
            .sum();
        match self.prev {
            None => self.e2 = e,
            Some((tp, fp, bp, sp)) => {
                let dt = tp - t;
                self.flux += 0.5 * (fp + flux_g) * dt;
                self.bulk += 0.5 * (bp + bulk_g) * dt;
                self.src += 0.5 * (sp + src_g) * dt;
            }
        }
        self.prev = Some((t, flux_g, bulk_g, src_g));
        self.e_now = e;
        self.t_now = t;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct OriginSample {
    pub t: f64,
    /// t^{1+γ} |φ(t, 0)|.
    pub scaled: f64,
    /// (1+t)^{1/2+γ} C_S (cone integral)^{1/2}.
    pub bound: f64,
    pub ratio: f64,
}

/// Σ_ℓ (2ℓ+1) / (4π (1+ℓ(ℓ+1))²): sup over the sphere against the (1+ℓ(ℓ+1))-weighted norm.
pub fn origin_sobolev_constant(band: usize) -> f64 {
    (0..=band)
        .map(|l| (2 * l + 1) as f64 / (4.0 * std::f64::consts::PI * (1.0 + eigenvalue(l)).powi(2)))
        .sum::<f64>()
        .sqrt()
}

/// Origin values at the listed times against the flux through the outgoing cone
/// leaving the origin at that time.
pub struct OriginDecay {
    pub field: usize,
    pub gamma: f64,
    pub times: Vec<f64>,
    cones: Option<ConeFlux>,
    cs: f64,
    values: Vec<Option<f64>>,
}

impl OriginDecay {
    pub fn new(field: usize, gamma: f64, times: Vec<f64>) -> Self {
        let n = times.len();
        OriginDecay { field, gamma, times, cones: None, cs: 0.0, values: vec![None; n] }
    }

    pub fn samples(&self) -> Result<Vec<OriginSample>> {
        let cones = self.cones.as_ref().ok_or_else(|| Error::domain("origin decay: no cone accumulators"))?;
        let mut out = Vec::new();
        for (i, &t) in self.times.iter().enumerate() {
            let Some(v) = self.values[i] else { continue };
            let scaled = t.powf(1.0 + self.gamma) * v.abs();
            let bound = (1.0 + t).powf(0.5 + self.gamma) * self.cs * cones.values()[i].sqrt();
            let ratio = if scaled == 0.0 { 0.0 } else { scaled / bound };
            out.push(OriginSample { t, scaled, bound, ratio });
        }
        Ok(out)
    }
}

impl Observer for OriginDecay {
    fn observe(&mut self, state: &[FieldState], source: &dyn Source) -> Result<()> {
        let st = &state[self.field];
        let t = st.t;
        if self.cones.is_none() {
            let labels = self.times.iter().map(|&t1| t - t1).collect();
            self.cones = Some(ConeFlux::new(self.field, ConeKind::Origin, labels));
            self.cs = origin_sobolev_constant(st.band);
        }
        self.cones.as_mut().expect("cones initialised above").observe(state, source)?;
        for (i, &t1) in self.times.iter().enumerate() {
            if (t - t1).abs() <= 1e-9 * (1.0 + t1) {
                self.values[i] = Some(st.origin_value());
            }
        }
        Ok(())
    }
}

/// f(v) = (1+v²)^{a/2}/a: third derivative.
fn f3(a: f64, v: f64) -> f64 {
    let b = 1.0 + v * v;
    (a - 2.0) * v * b.powf(0.5 * a - 3.0) * ((a - 1.0) * v * v + 3.0)
}

/// (f(t+r) - f(t-r))/r - f'(t+r) - f'(t-r) for f(v) = (1+v²)^{a/2}/a, evaluated from
/// its representation ∫ ((v-t)² - r²)/(2r) f'''(v) dv with the range v < 0 folded onto v > 0.
pub fn bulk_slack(a: f64, t: f64, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    let scale = r * r * (f3(a, t).abs() + f3(a, t + r).abs() + 1.0);
    let opts = QuadOptions::tol(1e-14 * scale, 1e-13);
    // x = v - t keeps (v-t)² - r² free of cancellation for small r
    let kern = |x: f64| (x * x - r * r) / (2.0 * r) * f3(a, t + x);
    if t >= r {
        return Ok(integrate(&kern, -r, r, opts)?.value);
    }
    let outer = integrate(&kern, r - 2.0 * t, r, opts)?.value;
    let folded = integrate(&|v: f64| -2.0 * t * v / r * f3(a, v), 0.0, r - t, opts)?.value;
    Ok(outer + folded)
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BulkSign {
    pub a: f64,
    pub max_slack: f64,
    pub at: (f64, f64),
    /// a ≥ 2, the range where the sign is guaranteed.
    pub conforming: bool,
}

/// Largest slack over the product grid of `ts` × `rs`.
pub fn bulk_sign_check(a: f64, ts: &[f64], rs: &[f64]) -> Result<BulkSign> {
    let pts: Vec<(f64, f64)> = ts.iter().flat_map(|&t| rs.iter().map(move |&r| (t, r))).collect();
    let vals: Vec<f64> = pts.par_iter().map(|&(t, r)| bulk_slack(a, t, r)).collect::<Result<_>>()?;
    let (k, max) =
        vals.iter().enumerate().fold((0, f64::NEG_INFINITY), |(k, m), (i, &x)| if x > m { (i, x) } else { (k, m) });
    Ok(BulkSign { a, max_slack: max, at: pts[k], conforming: a >= 2.0 })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct HardyReport {
    /// ∫ f''(t-r) φ² dx over the flux-weighted right-hand side.
    pub weighted: f64,
    /// ∫ ⟨t-r⟩^{2s} φ² dx/r² over ∫ ⟨t-r⟩^{2s-2} φ² dx + ∫ ⟨t-r⟩^{2s} (∂_r(rφ))² dx/r².
    pub conformal: f64,
    pub budget: f64,
    pub within_budget: bool,
}

fn ratio(lhs: f64, rhs: f64, which: &str) -> Result<f64> {
    if lhs == 0.0 {
        Ok(0.0)
    } else if rhs > 0.0 {
        Ok(lhs / rhs)
    } else {
        Err(Error::domain(format!("{which} Hardy inequality violated: left side {lhs:e} with vanishing right side")))
    }
}

/// Both weighted Hardy ratios on Σ_t^R with f = ⟨v⟩^{2s} and R the grid radius.
pub fn hardy_checks(state: &FieldState, s: f64, budget: f64) -> Result<HardyReport> {
    let f = ConformalF { s };
    let big_r = state.grid.r_max();
    let t = state.t;
    let lhs1 = radial_integral(state, big_r, |p| f.d2(p.t - p.r) * p.u * p.u);
    let mut rhs1 = radial_integral(state, big_r, |p| {
        let a = p.ut + p.ur;
        let b = p.ut - p.ur;
        f.f(p.t + p.r) * a * a + f.f(p.t - p.r) * b * b
    });
    let edge: f64 = state.u.iter().map(|u| u[u.len() - 1] * u[u.len() - 1]).sum();
    rhs1 += f.d1(t - big_r).abs() * edge;
    let w = |p: &Pt, k: f64| bracket(p.t - p.r).powf(k);
    let lhs2 = radial_integral(state, big_r, |p| w(p, 2.0 * s) * p.uor * p.uor);
    let rhs2 = radial_integral(state, big_r, |p| w(p, 2.0 * s - 2.0) * p.u * p.u + w(p, 2.0 * s) * p.ur * p.ur);
    let weighted = ratio(lhs1, rhs1, "weighted")?;
    let conformal = ratio(lhs2, rhs2, "conformal")?;
    Ok(HardyReport { weighted, conformal, budget, within_budget: weighted <= budget && conformal <= budget })
}
