//! Retarded solutions Φᵏ[n] of □Φ = n(r−t, ω) r^(−k) χ(⟨r−t⟩/r)² for k = 2, 3, 4.
//!
//! The σ-integral is reduced by Funk–Hecke: for each harmonic degree l the
//! kernel only sees μ = ⟨ω,σ⟩, so every mode needs one μ-integral per q.

mod oracle;
mod source;

pub use oracle::{brute_force_phi, BruteForce};
pub use source::{FieldProduct, ModeSource, SourceProfile, SquaredDerivative};

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::{eigenvalue, eval_direction, mode_lm, AngularGrid, ModeVector};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::profile::jb;
use crate::quadrature::{gk15_vec, integrate_line, integrate_vec, QuadOptions, Tail};

/// Normalization of the solution formula: Φ = c_k ∫∫ n K_k χ^p dσ dq / 4π.
pub trait KernelConvention: Send + Sync {
    fn name(&self) -> &'static str;
    fn prefactor(&self, k: u32) -> f64;
    fn chi_power(&self) -> i32;
}

/// The kernels exactly as displayed alongside the defining equation.
pub struct Printed;

impl KernelConvention for Printed {
    fn name(&self) -> &'static str {
        "printed"
    }
    fn prefactor(&self, _k: u32) -> f64 {
        1.0
    }
    fn chi_power(&self) -> i32 {
        1
    }
}

/// The retarded potential of □Φ = G with □ = −∂ₜ² + Δ.
pub struct Retarded;

impl KernelConvention for Retarded {
    fn name(&self) -> &'static str {
        "retarded"
    }
    fn prefactor(&self, k: u32) -> f64 {
        -(2f64.powi(k as i32 - 2))
    }
    fn chi_power(&self) -> i32 {
        2
    }
}

pub type ConventionBuilder = fn() -> Arc<dyn KernelConvention>;

pub struct ConventionRegistry {
    builders: BTreeMap<&'static str, ConventionBuilder>,
}

impl ConventionRegistry {
    pub fn standard() -> Self {
        let mut r = ConventionRegistry { builders: BTreeMap::new() };
        r.register("printed", || Arc::new(Printed));
        r.register("retarded", || Arc::new(Retarded));
        r
    }

    pub fn register(&mut self, name: &'static str, b: ConventionBuilder) {
        self.builders.insert(name, b);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, name: &str) -> Result<Arc<dyn KernelConvention>> {
        self.builders.get(name).map(|b| b()).ok_or_else(|| Error::Unknown {
            what: "kernel convention",
            name: name.to_string(),
            known: self.names().join(", "),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelQuadratureSpec {
    /// Initial panels of the μ-integral.
    pub n_mu: usize,
    /// Azimuthal directions used when taking suprema over angles.
    pub n_az: usize,
    pub q_tol: f64,
    /// Depth of the q = (r−t) + e^x map below the first panel.
    pub lower_exp: f64,
}

impl Default for KernelQuadratureSpec {
    fn default() -> Self {
        KernelQuadratureSpec { n_mu: 8, n_az: 16, q_tol: 1e-10, lower_exp: 36.0 }
    }
}

impl KernelQuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_mu < 8 || self.n_az < 8 {
            return Err(Error::range(
                "kernel nodes",
                format!("n_mu and n_az must be ≥ 8, got {} and {}", self.n_mu, self.n_az),
            ));
        }
        if !(self.q_tol > 0.0 && self.q_tol < 1.0) {
            return Err(Error::range("q_tol", format!("must lie in (0, 1), got {}", self.q_tol)));
        }
        if !(self.lower_exp > 0.0 && self.lower_exp.is_finite()) {
            return Err(Error::range("lower_exp", format!("must be positive, got {}", self.lower_exp)));
        }
        Ok(())
    }

    /// Directions for suprema over the sphere.
    pub fn directions(&self, band: usize) -> Vec<(f64, f64)> {
        let g = AngularGrid::new((self.n_az / 2).max(band + 1), self.n_az.max(2 * band + 1), band)
            .expect("grid sizes checked");
        let mut out = Vec::with_capacity(g.len());
        for i in 0..g.n_theta {
            for &p in &g.phi {
                out.push((g.theta(i), p));
            }
        }
        out
    }
}

fn check_k(k: u32) -> Result<()> {
    if !(2..=4).contains(&k) {
        return Err(Error::range("k", format!("must be 2, 3 or 4, got {k}")));
    }
    Ok(())
}

/// Interval of q where χ(⟨q⟩/ρ) can be nonzero: 8⟨q⟩ < t + r + q.
fn chi_window(t: f64, r: f64) -> Option<(f64, f64)> {
    let c = t + r;
    let disc = c * c - 63.0;
    if disc <= 0.0 {
        return None;
    }
    let s = 8.0 * disc.sqrt();
    Some(((c - s) / 63.0, (c + s) / 63.0))
}

fn legendre_all(lmax: usize, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if lmax >= 1 {
        out[1] = x;
    }
    for l in 1..lmax {
        out[l + 1] = ((2 * l + 1) as f64 * x * out[l] - l as f64 * out[l - 1]) / (l + 1) as f64;
    }
}

/// ∫_{-1}^{1} K_k χ(⟨q⟩/ρ)^p P_l(μ) dμ for l = 0..=lmax, in the variable x = ln D.
fn mu_integrals(k: u32, t: f64, r: f64, q: f64, p: i32, lmax: usize, spec: &KernelQuadratureSpec) -> Result<Vec<f64>> {
    let a = t - r + q;
    let b = t + r + q;
    let prod = a * b;
    let qb = jb(q);
    let d_max = a + 2.0 * r;
    let d_cut = prod / (8.0 * qb);
    let hi = d_max.min(d_cut);
    if !(a > 0.0) || hi <= a {
        return Ok(vec![0.0; lmax + 1]);
    }
    let chi = Cutoff::chi();
    let (x0, x1) = (a.ln(), hi.ln());
    let mut cuts: Vec<f64> = (0..=spec.n_mu).map(|i| x0 + (x1 - x0) * i as f64 / spec.n_mu as f64).collect();
    let x_one = (prod / (16.0 * qb)).ln();
    if x_one > x0 && x_one < x1 {
        cuts.push(x_one);
        cuts.sort_by(f64::total_cmp);
    }
    let segs: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let kernel = |d: f64| match k {
        2 => 1.0 / d,
        3 => 1.0 / prod,
        _ => d / (prod * prod),
    };
    let f = |x: f64| {
        let d = x.exp();
        let mu = (1.0 - (d - a) / r).clamp(-1.0, 1.0);
        let w = kernel(d) * chi.value(2.0 * qb * d / prod).powi(p) * d / r;
        let mut out = vec![0.0; lmax + 1];
        legendre_all(lmax, mu, &mut out);
        out.iter_mut().for_each(|v| *v *= w);
        out
    };
    // The kernel weight is largest at the outer end for every k.
    let floor = 1e-3 * spec.q_tol * kernel(hi) * hi / r * (x1 - x0);
    integrate_vec(
        &f,
        &segs,
        QuadOptions { max_panels: 4000, ..QuadOptions::tol(floor, (spec.q_tol * 1e-2).max(1e-14)) },
    )
}

/// Harmonic coefficients of Φᵏ[n] at (t, r).
pub fn phi_k_modes(
    n: &dyn SourceProfile,
    k: u32,
    t: f64,
    r: f64,
    conv: &dyn KernelConvention,
    spec: &KernelQuadratureSpec,
) -> Result<ModeVector> {
    check_k(k)?;
    spec.validate()?;
    if !(r > 0.0 && r.is_finite() && t.is_finite()) {
        return Err(Error::domain(format!("Φ^{k} needs finite t and r > 0, got t = {t}, r = {r}")));
    }
    let band = n.band();
    if n.is_zero() {
        return Ok(ModeVector::zeros(band));
    }
    let Some((w_lo, w_hi)) = chi_window(t, r) else { return Ok(ModeVector::zeros(band)) };
    let q_floor = r - t;
    let mut lo = w_lo.max(q_floor);
    let mut hi = w_hi;
    if let Tail::None = n.tail() {
        let (c0, c1) = n.core();
        lo = lo.max(c0);
        hi = hi.min(c1);
    }
    if hi <= lo {
        return Ok(ModeVector::zeros(band));
    }
    let c = 0.5 * conv.prefactor(k);
    let p = conv.chi_power();
    let err = std::cell::Cell::new(None);
    let integrand = |q: f64| -> Vec<f64> {
        let nq = n.modes(q, 0);
        if nq.max_abs() == 0.0 {
            return vec![0.0; nq.coeffs.len()];
        }
        let inner = match mu_integrals(k, t, r, q, p, band, spec) {
            Ok(v) => v,
            Err(e) => {
                err.set(Some(e));
                return vec![f64::NAN; nq.coeffs.len()];
            }
        };
        nq.coeffs.iter().enumerate().map(|(i, v)| c * v * inner[mode_lm(i).0]).collect()
    };
    let mut cuts = vec![lo, hi];
    cuts.extend(n.breakpoints().into_iter().filter(|&x| x > lo && x < hi));
    let (c0, c1) = n.core();
    cuts.extend([c0, c1].into_iter().filter(|&x| x > lo && x < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    // Coarse magnitude so that negligible far tails do not drive the refinement.
    let mut scale: f64 = 0.0;
    for w in cuts.windows(2) {
        let (v, _) = gk15_vec(&integrand, w[0], w[1]);
        scale = scale.max(v.iter().fold(0.0f64, |m, x| m.max(x.abs())));
    }
    if let Some(e) = err.take() {
        return Err(e);
    }
    let opts = QuadOptions { max_panels: 4000, ..QuadOptions::tol(1e-3 * spec.q_tol * scale, spec.q_tol) };
    let mut total = vec![0.0; ModeVector::zeros(band).coeffs.len()];
    if lo == q_floor {
        let delta = (0.25 * (cuts[1] - lo)).min(1.0);
        let y1 = delta.ln();
        let y0 = y1 - spec.lower_exp;
        let g = |y: f64| {
            let e = y.exp();
            let mut v = integrand(lo + e);
            v.iter_mut().for_each(|x| *x *= e);
            v
        };
        let segs: Vec<(f64, f64)> =
            (0..8).map(|i| (y0 + (y1 - y0) * i as f64 / 8.0, y0 + (y1 - y0) * (i + 1) as f64 / 8.0)).collect();
        let part = integrate_vec(&g, &segs, opts);
        if let Some(e) = err.take() {
            return Err(e);
        }
        total = part?;
        cuts[0] = lo + delta;
    }
    let segs: Vec<(f64, f64)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();
    let part = integrate_vec(&integrand, &segs, opts);
    if let Some(e) = err.take() {
        return Err(e);
    }
    for (t, v) in total.iter_mut().zip(part?) {
        *t += v;
    }
    Ok(ModeVector { band, coeffs: total })
}

/// Φᵏ[n](t, rω) for ω = (θ, φ).
#[allow(clippy::too_many_arguments)]
pub fn phi_k(
    n: &dyn SourceProfile,
    k: u32,
    t: f64,
    r: f64,
    dir: (f64, f64),
    conv: &dyn KernelConvention,
    spec: &KernelQuadratureSpec,
) -> Result<f64> {
    Ok(eval_direction(&phi_k_modes(n, k, t, r, conv, spec)?, dir.0, dir.1))
}

/// Coefficients at many points; ordered like `points`.
pub fn phi_k_batch(
    n: &dyn SourceProfile,
    k: u32,
    points: &[(f64, f64)],
    conv: &dyn KernelConvention,
    spec: &KernelQuadratureSpec,
) -> Result<Vec<ModeVector>> {
    points.par_iter().map(|&(t, r)| phi_k_modes(n, k, t, r, conv, spec)).collect()
}

/// Coefficients of ∫_{q0}^∞ n(q, ·) dq.
pub fn tail_integral_modes(n: &dyn SourceProfile, q0: f64) -> Result<ModeVector> {
    let band = n.band();
    let mut out = ModeVector::zeros(band);
    if n.is_zero() {
        return Ok(out);
    }
    let (_, c1) = n.core();
    let tail = n.tail();
    let hi = match tail {
        Tail::Power(_) => c1.max(q0 + 1.0),
        _ => c1,
    };
    if hi <= q0 {
        return Ok(out);
    }
    let bps = n.breakpoints();
    for i in 0..out.coeffs.len() {
        let (l, m) = mode_lm(i);
        let f = |q: f64| n.modes(q, 0).coeffs[i];
        let upper_tail = match tail {
            Tail::Power(e) => Tail::Power(e),
            _ => Tail::None,
        };
        let res = integrate_line(&f, q0, hi, &bps, upper_tail, QuadOptions::tol(1e-15, 1e-12))
            .map_err(|e| Error::Divergent { l, m, detail: e.to_string() })?;
        out.coeffs[i] = res.value;
    }
    Ok(out)
}

/// The leading near-cone term (1/2r) ln(⟨t+r⟩/⟨t−r⟩) ∫_{r−t}^∞ n dq, with the convention's k = 2 sign.
pub fn phi2_asymptotic_modes(n: &dyn SourceProfile, t: f64, r: f64, conv: &dyn KernelConvention) -> Result<ModeVector> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("Φ²₀ needs r > 0, got {r}")));
    }
    if r < 0.5 * t {
        return Err(Error::range("r", format!("the near-cone term needs r ≥ t/2, got r = {r}, t = {t}")));
    }
    let ints = tail_integral_modes(n, r - t)?;
    let c = conv.prefactor(2) * (jb(t + r) / jb(t - r)).ln() / (2.0 * r);
    Ok(ints.scale(c))
}

pub fn phi2_asymptotic(
    n: &dyn SourceProfile,
    t: f64,
    r: f64,
    dir: (f64, f64),
    conv: &dyn KernelConvention,
) -> Result<f64> {
    Ok(eval_direction(&phi2_asymptotic_modes(n, t, r, conv)?, dir.0, dir.1))
}

/// Σ_{k+j≤N} ∫ sup_ω |(⟨q⟩∂_q)^k ∂_ω^j n| ⟨q₊⟩^a dq, angular derivatives as (1+λ)^(j/2).
pub fn n_norm(n: &dyn SourceProfile, big_n: usize, a: f64) -> Result<f64> {
    if !(a >= 0.0 && a.is_finite()) {
        return Err(Error::range("a", format!("must be finite and ≥ 0, got {a}")));
    }
    if n.is_zero() {
        return Ok(0.0);
    }
    let band = n.band();
    let grid = AngularGrid::new(2 * band + 2, 4 * band + 4, band)?;
    let (lo, hi) = n.core();
    let tail = match n.tail() {
        Tail::Power(e) => Tail::Power(e - a),
        t => t,
    };
    let mut bps = n.breakpoints();
    bps.push(0.0);
    let mut total = 0.0;
    for k in 0..=big_n {
        for j in 0..=big_n - k {
            let f = |q: f64| {
                let mut mv = n.modes(q, k);
                for (i, c) in mv.coeffs.iter_mut().enumerate() {
                    *c *= (1.0 + eigenvalue(mode_lm(i).0)).powf(0.5 * j as f64);
                }
                let vals = grid.synthesize(&mv).expect("grid band");
                vals.iter().fold(0.0f64, |m, v| m.max(v.abs())) * jb(q.max(0.0)).powf(a)
            };
            let res = integrate_line(&f, lo, hi, &bps, tail, QuadOptions::tol(1e-14, 1e-11))
                .map_err(|e| Error::domain(format!("‖n‖ diverges for a = {a}: {e}")))?;
            total += res.value;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, Serialize)]
pub struct ResidualReport {
    pub k: u32,
    pub h: f64,
    pub max_relative: f64,
    /// Quadrature noise propagated through the stencil, relative to the same scale.
    pub noise_relative: f64,
    pub inconclusive: bool,
    pub per_point: Vec<f64>,
}

/// Second-order finite-difference □ of Φᵏ per mode against n r^(−k) χ(⟨r−t⟩/r)².
pub fn source_residual_check(
    n: &dyn SourceProfile,
    k: u32,
    points: &[(f64, f64)],
    h: f64,
    conv: &dyn KernelConvention,
    spec: &KernelQuadratureSpec,
) -> Result<ResidualReport> {
    check_k(k)?;
    if !(h > 0.0) {
        return Err(Error::range("h", format!("must be > 0, got {h}")));
    }
    if let Some(&(t, r)) = points.iter().find(|&&(_, r)| r <= 2.0 * h) {
        return Err(Error::domain(format!("sample point ({t}, {r}) too close to r = 0 for h = {h}")));
    }
    let chi = Cutoff::chi();
    let rows: Vec<(f64, f64, f64)> = points
        .par_iter()
        .map(|&(t, r)| -> Result<(f64, f64, f64)> {
            let ev = |tt: f64, rr: f64| phi_k_modes(n, k, tt, rr, conv, spec);
            let c = ev(t, r)?;
            let (rp, rm) = (ev(t, r + h)?, ev(t, r - h)?);
            let (tp, tm) = (ev(t + h, r)?, ev(t - h, r)?);
            let src = n.modes(r - t, 0).scale(r.powi(-(k as i32)) * chi.value(jb(r - t) / r).powi(2));
            let mut res: f64 = 0.0;
            let mut phi_max: f64 = 0.0;
            for i in 0..c.coeffs.len() {
                let lam = eigenvalue(mode_lm(i).0);
                let d_rr = (rp.coeffs[i] - 2.0 * c.coeffs[i] + rm.coeffs[i]) / (h * h);
                let d_r = (rp.coeffs[i] - rm.coeffs[i]) / (2.0 * h);
                let d_tt = (tp.coeffs[i] - 2.0 * c.coeffs[i] + tm.coeffs[i]) / (h * h);
                let bx = -d_tt + d_rr + 2.0 * d_r / r - lam * c.coeffs[i] / (r * r);
                res = res.max((bx - src.coeffs[i]).abs());
                phi_max = phi_max.max(c.coeffs[i].abs());
            }
            Ok((res, src.max_abs(), phi_max * (8.0 / (h * h) + 1.0 / (r * h))))
        })
        .collect::<Result<_>>()?;
    let scale = rows.iter().fold(0.0f64, |m, x| m.max(x.1));
    let noise = rows.iter().fold(0.0f64, |m, x| m.max(x.2)) * spec.q_tol;
    let rel = |x: f64| {
        if scale > 0.0 {
            x / scale
        } else if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    };
    let per_point: Vec<f64> = rows.iter().map(|x| rel(x.0)).collect();
    let max_relative = per_point.iter().fold(0.0f64, |m, &x| m.max(x));
    let noise_relative = rel(noise);
    Ok(ResidualReport {
        k,
        h,
        max_relative,
        noise_relative,
        inconclusive: scale > 0.0 && noise_relative >= max_relative,
        per_point,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub t: f64,
    pub r: f64,
    pub direction: usize,
    pub k: u32,
    pub value: f64,
    /// Φ²₀ for k = 2, NaN otherwise.
    pub asymptotic: f64,
    pub envelope: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnvelopeSummary {
    pub name: String,
    pub max: f64,
    pub first_quarter: f64,
    pub last_quarter: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Sweep {
    pub rows: Vec<SweepRow>,
    pub norm: f64,
    pub envelopes: Vec<EnvelopeSummary>,
    /// Sup over angles of |Φ² − Φ²₀| ⟨t+r⟩ ⟨q₊⟩^a / ‖n‖, one per radius.
    pub remainder: Vec<(f64, f64)>,
}

impl Sweep {
    /// Largest envelope across k; the single constant bounding all of them.
    pub fn constant(&self) -> f64 {
        self.envelopes.iter().fold(0.0f64, |m, e| m.max(e.max))
    }
}

fn quarters(series: &[(f64, f64)]) -> (f64, f64) {
    let n = series.len();
    let q = n.div_ceil(4).max(1);
    let mx = |s: &[(f64, f64)]| s.iter().fold(0.0f64, |m, x| m.max(x.1));
    (mx(&series[..q.min(n)]), mx(&series[n.saturating_sub(q)..]))
}

/// Envelopes along t = r + offset, taking the supremum over the angles.
pub fn envelope_sweep(
    n: &dyn SourceProfile,
    radii: &[f64],
    offset: f64,
    conv: &dyn KernelConvention,
    spec: &KernelQuadratureSpec,
) -> Result<Sweep> {
    let a = n.decay_a();
    let norm = n_norm(n, 0, a)?;
    let dirs = spec.directions(n.band());
    let per_r: Vec<Vec<SweepRow>> = radii
        .par_iter()
        .map(|&r| -> Result<Vec<SweepRow>> {
            let t = r + offset;
            let wq = jb((r - t).max(0.0)).powf(a);
            let asym = phi2_asymptotic_modes(n, t, r, conv)?;
            let mut rows = Vec::new();
            for k in 2..=4u32 {
                let modes = phi_k_modes(n, k, t, r, conv, spec)?;
                for (d, &(th, ph)) in dirs.iter().enumerate() {
                    let value = eval_direction(&modes, th, ph);
                    let weight = if k == 2 {
                        2.0 * r / (jb(t + r) / jb(t - r)).ln()
                    } else {
                        jb(t + r) * jb(t - r).powi(k as i32 - 2)
                    };
                    let asymptotic = if k == 2 { eval_direction(&asym, th, ph) } else { f64::NAN };
                    let envelope = if norm > 0.0 { value.abs() * weight * wq / norm } else { 0.0 };
                    rows.push(SweepRow { t, r, direction: d, k, value, asymptotic, envelope });
                }
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SweepRow> = per_r.into_iter().flatten().collect();
    let mut envelopes = Vec::new();
    for k in 2..=4u32 {
        let series: Vec<(f64, f64)> = radii
            .iter()
            .map(|&r| (r, rows.iter().filter(|x| x.k == k && x.r == r).fold(0.0f64, |m, x| m.max(x.envelope))))
            .collect();
        let (first_quarter, last_quarter) = quarters(&series);
        let max = series.iter().fold(0.0f64, |m, x| m.max(x.1));
        envelopes.push(EnvelopeSummary { name: format!("phi{k}"), max, first_quarter, last_quarter });
    }
    let remainder: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let t = r + offset;
            let w = jb(t + r) * jb((r - t).max(0.0)).powf(a);
            let m =
                rows.iter().filter(|x| x.k == 2 && x.r == r).fold(0.0f64, |m, x| m.max((x.value - x.asymptotic).abs()));
            (r, if norm > 0.0 { m * w / norm } else { 0.0 })
        })
        .collect();
    let (fq, lq) = quarters(&remainder);
    envelopes.push(EnvelopeSummary {
        name: "remainder".into(),
        max: remainder.iter().fold(0.0f64, |m, x| m.max(x.1)),
        first_quarter: fq,
        last_quarter: lq,
    });
    Ok(Sweep { rows, norm, envelopes, remainder })
}
