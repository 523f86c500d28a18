//! Weighted energies, conformal norms and the pointwise diagnostics built on them.
//!
//! Everything is assembled per mode from u = r·φ_ℓm, so that dx/r² = dr dω and
//! the angular integrals reduce to sums over (ℓ, m).

mod audit;
mod fit;

pub use audit::{
    bulk_sign_check, bulk_slack, hardy_checks, origin_sobolev_constant, BulkSign, ConeFlux, ConeKind, HardyReport,
    MorawetzAudit, MorawetzBalance, OriginDecay, OriginSample,
};
pub use fit::{fit_decay, late_window, FitResult};

use rayon::prelude::*;
use serde::Serialize;

use crate::angular::{eigenvalue, mode_lm, AngularGrid, ModeVector};
use crate::engine::FieldState;
use crate::error::{Error, Result};

pub fn bracket(x: f64) -> f64 {
    (1.0 + x * x).sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum WeightSpec {
    W0 { mu: f64 },
    WGamma { gamma: f64, mu: f64 },
    Conformal { s: f64 },
    Constant { c: f64 },
}

type WeightBuilder = fn(&[(String, f64)]) -> Result<WeightSpec>;

fn param(p: &[(String, f64)], key: &str, default: Option<f64>) -> Result<f64> {
    p.iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| *v)
        .or(default)
        .ok_or_else(|| Error::range(key, "missing weight parameter"))
}

/// Named weight constructors, looked up when parsing `kind key=value ...`.
pub const WEIGHT_KINDS: &[(&str, WeightBuilder)] = &[
    ("w0", |p| WeightSpec::w0(param(p, "mu", None)?)),
    ("w_gamma", |p| WeightSpec::w_gamma(param(p, "gamma", None)?, param(p, "mu", Some(0.0))?)),
    ("conformal", |p| WeightSpec::conformal(param(p, "s", None)?)),
    ("constant", |p| WeightSpec::constant(param(p, "c", Some(1.0))?)),
];

impl WeightSpec {
    pub fn w0(mu: f64) -> Result<Self> {
        if !(mu >= 0.0) {
            return Err(Error::range("mu", format!("must be ≥ 0, got {mu}")));
        }
        Ok(WeightSpec::W0 { mu })
    }

    pub fn w_gamma(gamma: f64, mu: f64) -> Result<Self> {
        if !(gamma >= -0.5) {
            return Err(Error::range("gamma", format!("weight needs gamma ≥ -1/2, got {gamma}")));
        }
        if !(mu >= 0.0) {
            return Err(Error::range("mu", format!("must be ≥ 0, got {mu}")));
        }
        Ok(WeightSpec::WGamma { gamma, mu })
    }

    pub fn conformal(s: f64) -> Result<Self> {
        if !(s >= 1.0) {
            return Err(Error::range("s", format!("must satisfy s ≥ 1, got {s}")));
        }
        Ok(WeightSpec::Conformal { s })
    }

    pub fn constant(c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::range("c", format!("must be positive, got {c}")));
        }
        Ok(WeightSpec::Constant { c })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut it = text.split_whitespace();
        let kind = it.next().unwrap_or("");
        let mut p = Vec::new();
        for tok in it {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| Error::range("weight", format!("expected key=value, got `{tok}`")))?;
            let v: f64 = v.parse().map_err(|_| Error::range(k, format!("not a number: `{v}`")))?;
            p.push((k.to_string(), v));
        }
        match WEIGHT_KINDS.iter().find(|(n, _)| *n == kind) {
            Some((_, build)) => build(&p),
            None => Err(Error::Unknown {
                what: "weight",
                name: kind.to_string(),
                known: WEIGHT_KINDS.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            }),
        }
    }

    /// Weight value at q = r - t (for the conformal kind, at the argument v).
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            WeightSpec::W0 { mu } => {
                if x > 0.0 {
                    1.0 + (1.0 + x).powf(-2.0 * mu)
                } else {
                    3.0 - (1.0 - x).powf(-2.0 * mu)
                }
            }
            WeightSpec::WGamma { gamma, mu } => {
                if x > 0.0 {
                    1.0 + (1.0 + x).powf(-2.0 * mu)
                } else {
                    1.0 + (1.0 - x).powf(1.0 + 2.0 * gamma)
                }
            }
            WeightSpec::Conformal { s } => (1.0 + x * x).powf(s),
            WeightSpec::Constant { c } => c,
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match *self {
            WeightSpec::W0 { mu } => -2.0 * mu * (1.0 + x.abs()).powf(-1.0 - 2.0 * mu),
            WeightSpec::WGamma { gamma, mu } => {
                if x > 0.0 {
                    -2.0 * mu * (1.0 + x).powf(-1.0 - 2.0 * mu)
                } else {
                    -(1.0 + 2.0 * gamma) * (1.0 - x).powf(2.0 * gamma)
                }
            }
            WeightSpec::Conformal { s } => 2.0 * s * x * (1.0 + x * x).powf(s - 1.0),
            WeightSpec::Constant { .. } => 0.0,
        }
    }
}

/// f(v) = ⟨v⟩^{2s} and its first two derivatives.
#[derive(Clone, Copy, Debug)]
pub struct ConformalF {
    pub s: f64,
}

impl ConformalF {
    pub fn f(&self, v: f64) -> f64 {
        (1.0 + v * v).powf(self.s)
    }

    pub fn d1(&self, v: f64) -> f64 {
        2.0 * self.s * v * (1.0 + v * v).powf(self.s - 1.0)
    }

    pub fn d2(&self, v: f64) -> f64 {
        let b = 1.0 + v * v;
        2.0 * self.s * b.powf(self.s - 1.0) + 4.0 * self.s * (self.s - 1.0) * v * v * b.powf(self.s - 2.0)
    }
}

/// Values available to a radial integrand at one node of one mode.
#[derive(Clone, Copy, Debug)]
pub struct Pt {
    pub t: f64,
    pub r: f64,
    pub lam: f64,
    pub u: f64,
    pub ut: f64,
    pub ur: f64,
    /// u / r, with its limit at the origin.
    pub uor: f64,
}

pub(crate) struct ModeData<'a> {
    pub lam: f64,
    pub u: &'a [f64],
    pub v: &'a [f64],
    pub ur: Vec<f64>,
    pub uor: Vec<f64>,
}

impl ModeData<'_> {
    pub fn pt(&self, t: f64, h: f64, j: usize) -> Pt {
        Pt { t, r: j as f64 * h, lam: self.lam, u: self.u[j], ut: self.v[j], ur: self.ur[j], uor: self.uor[j] }
    }
}

pub(crate) fn mode_data(state: &FieldState) -> Vec<(usize, ModeData<'_>)> {
    let h = state.grid.h;
    state
        .nonzero_modes()
        .into_iter()
        .map(|m| {
            let l = mode_lm(m).0;
            let ur = state.u_r(m);
            let u = &state.u[m];
            let uor = (0..u.len())
                .map(|j| {
                    if j > 0 {
                        u[j] / (j as f64 * h)
                    } else if l == 0 {
                        ur[0]
                    } else {
                        0.0
                    }
                })
                .collect();
            (m, ModeData { lam: eigenvalue(l), u, v: &state.v[m], ur, uor })
        })
        .collect()
}

/// Trapezoidal ∫_0^{r_cut} of nodal values, with a linearly interpolated partial last cell.
pub fn trapezoid_to(g: &[f64], h: f64, r_cut: f64) -> f64 {
    let n = g.len();
    if n < 2 || r_cut <= 0.0 {
        return 0.0;
    }
    let x = (r_cut / h).min((n - 1) as f64);
    let jc = x.floor() as usize;
    let mut s = 0.0;
    for j in 0..jc.min(n - 1) {
        s += 0.5 * (g[j] + g[j + 1]);
    }
    s *= h;
    if jc < n - 1 {
        let th = x - jc as f64;
        let gt = g[jc] + th * (g[jc + 1] - g[jc]);
        s += 0.5 * h * th * (g[jc] + gt);
    }
    s
}

/// Linear interpolation of nodal values at radius r.
pub fn interp_at(g: impl Fn(usize) -> f64, n: usize, h: f64, r: f64) -> f64 {
    let x = (r / h).clamp(0.0, (n - 1) as f64);
    let j = (x.floor() as usize).min(n - 2);
    let th = x - j as f64;
    (1.0 - th) * g(j) + th * g(j + 1)
}

/// Σ_ℓm ∫_0^{r_cut} g dr over the nonzero modes, reduced in mode order.
pub fn radial_integral(state: &FieldState, r_cut: f64, g: impl Fn(&Pt) -> f64 + Sync) -> f64 {
    let h = state.grid.h;
    let n = ((r_cut / h).ceil() as usize + 2).min(state.grid.len());
    let data = mode_data(state);
    let parts: Vec<f64> = data
        .par_iter()
        .map(|(_, md)| {
            let vals: Vec<f64> = (0..n).map(|j| g(&md.pt(state.t, h, j))).collect();
            trapezoid_to(&vals, h, r_cut)
        })
        .collect();
    parts.iter().sum()
}

/// ∫|∂φ|² w(r - t) dx.
pub fn energy_weighted(state: &FieldState, w: &WeightSpec) -> f64 {
    radial_integral(state, state.grid.r_max(), |p| {
        let rad = p.ur - p.uor;
        (p.ut * p.ut + rad * rad + p.lam * p.uor * p.uor) * w.eval(p.r - p.t)
    })
}

/// The conformal energy E_R^s on the ball of radius R.
pub fn conformal_energy_er(state: &FieldState, s: f64, r_cut: f64) -> f64 {
    let f = ConformalF { s };
    radial_integral(state, r_cut, |p| {
        let fp = f.f(p.t + p.r);
        let fm = f.f(p.t - p.r);
        let a = p.ut + p.ur;
        let b = p.ut - p.ur;
        fp * a * a + (fp + fm) * p.lam * p.uor * p.uor + fm * b * b
    })
}

/// ‖φ(t)‖_{1,+,s-1}.
pub fn conformal_norm_plus(state: &FieldState, s: f64) -> f64 {
    radial_integral(state, state.grid.r_max(), |p| {
        let wp = bracket(p.t + p.r).powf(2.0 * s);
        let q = bracket(p.t - p.r);
        let wm = q.powf(2.0 * s);
        let a = p.ut + p.ur;
        let b = p.ut - p.ur;
        wp * (a * a + p.lam * p.uor * p.uor) + wm * (b * b + p.uor * p.uor + p.u * p.u / (q * q))
    })
    .sqrt()
}

/// Per-term pieces of the ‖φ‖_{1,s-1} surrogate.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct NormZ {
    pub identity: f64,
    pub dt: f64,
    pub grad: f64,
    pub scaling: f64,
    pub rotations: f64,
    pub boosts: f64,
}

impl NormZ {
    pub fn total(&self) -> f64 {
        self.identity + self.dt + self.grad + self.scaling + self.rotations + self.boosts
    }
}

fn norm_z_terms(state: &FieldState, s: f64, angular_order: i32) -> NormZ {
    let terms = |g: &(dyn Fn(&Pt) -> f64 + Sync)| {
        radial_integral(state, state.grid.r_max(), |p| {
            bracket(p.t - p.r).powf(2.0 * s - 2.0) * (1.0 + p.lam).powi(angular_order) * g(p)
        })
        .sqrt()
    };
    NormZ {
        identity: terms(&|p| p.u * p.u),
        dt: terms(&|p| p.ut * p.ut),
        grad: terms(&|p| {
            let a = p.ur - p.uor;
            a * a + p.lam * p.uor * p.uor
        }),
        scaling: terms(&|p| {
            let a = p.t * p.ut + p.r * p.ur - p.u;
            a * a
        }),
        rotations: terms(&|p| p.lam * p.u * p.u),
        boosts: terms(&|p| {
            let a = (p.t + p.r) * (p.ut + p.ur - p.uor);
            a * a
        }) + terms(&|p| {
            let b = (p.t - p.r) * (p.ut - p.ur + p.uor);
            b * b
        }) + terms(&|p| p.t * p.t * p.lam * p.uor * p.uor),
    }
}

/// Surrogate for Σ_{|I|≤1} ‖⟨t-r⟩^{s-1} Z^I φ‖: translations, scaling and
/// rotations exactly per mode, boosts by the majorant
/// (t+r)|Lφ| + |t-r||L̄φ| + t|∇̸φ|.
pub fn norm_z_weighted(state: &FieldState, s: f64) -> NormZ {
    norm_z_terms(state, s, 0)
}

/// Second-order surrogate: the first-order one with one extra rotation per term.
pub fn norm_z_order2(state: &FieldState, s: f64) -> f64 {
    norm_z_terms(state, s, 1).total() + norm_z_terms(state, s, 0).total()
}

/// Angular oversampling of the sup: nodes per degree of the highest active mode.
const SUP_OVERSAMPLE: usize = 4;

/// sup over the grid and the angular nodes of ⟨t+r⟩⟨t-r⟩^{s-1/2}|φ|.

pub fn sup_envelope(state: &FieldState, s: f64) -> f64 {
    let data = mode_data(state);
    if data.is_empty() {
        return 0.0;
    }
    let h = state.grid.h;
    let t = state.t;
    let lc = data.iter().map(|(m, _)| mode_lm(*m).0).max().unwrap_or(0);
    let ag = AngularGrid::new(SUP_OVERSAMPLE * (lc + 1), SUP_OVERSAMPLE * (2 * lc + 1), lc)
        .expect("oversampled grid is valid");
    (0..state.grid.len())
        .into_par_iter()
        .map(|j| {
            let r = j as f64 * h;
            let mut mv = ModeVector::zeros(lc);
            for (m, md) in &data {
                mv.coeffs[*m] = md.uor[j];
            }
            let sup = ag.synthesize(&mv).map(|v| v.iter().fold(0.0f64, |a, x| a.max(x.abs()))).unwrap_or(0.0);
            bracket(t + r) * bracket(t - r).powf(s - 0.5) * sup
        })
        .collect::<Vec<f64>>()
        .into_iter()
        .fold(0.0, f64::max)
}

/// Weighted Klainerman–Sobolev constant: sup envelope over the second-order surrogate.
pub fn ks_pointwise_check(state: &FieldState, s: f64) -> Result<f64> {
    let num = sup_envelope(state, s);
    let den = norm_z_order2(state, s);
    if num == 0.0 {
        return Ok(0.0);
    }
    if !(den > 0.0) {
        return Err(Error::domain(format!("Klainerman–Sobolev check: numerator {num:e} over a vanishing norm")));
    }
    Ok(num / den)
}

/// One row of diagnostics for a single field at one time.
#[derive(Clone, Debug, Default, Serialize)]
pub struct FunctionalReport {
    pub t: f64,
    pub energy_w1: f64,
    pub energy_w0: f64,
    pub conformal_energy: f64,
    pub norm_conf_plus: f64,
    pub norm_1_s_surrogate: f64,
    pub fluxes: Vec<(String, f64)>,
    pub identity_residual: Option<f64>,
    pub sup_envelope: f64,
}

impl FunctionalReport {
    pub fn compute(state: &FieldState, s: f64, mu: f64) -> Result<Self> {
        Ok(FunctionalReport {
            t: state.t,
            energy_w1: energy_weighted(state, &WeightSpec::constant(1.0)?),
            energy_w0: energy_weighted(state, &WeightSpec::w0(mu)?),
            conformal_energy: conformal_energy_er(state, s, state.grid.r_max()),
            norm_conf_plus: conformal_norm_plus(state, s),
            norm_1_s_surrogate: norm_z_weighted(state, s).total(),
            fluxes: Vec::new(),
            identity_residual: None,
            sup_envelope: sup_envelope(state, s),
        })
    }
}
