//! Radiation fields, the derived second-order profile F₁, weighted data norms,
//! and the explicit wave-zone approximants built from them.

use std::f64::consts::PI;

use crate::angular::{eigenvalue, mode_count, mode_index, mode_lm, AngularGrid, ModeVector};
use crate::cutoff::Cutoff;
use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::profile::{jb, make_profile, Antiderivative, Derivative, Profile, ProfileDescriptor, ProfileShape};
use crate::quadrature::{integrate_line, QuadOptions, Tail};

#[derive(Clone, Debug)]
pub struct RadiationField {
    pub band: usize,
    pub gamma: f64,
    modes: Vec<Option<Profile>>,
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return Err(Error::range("gamma", format!("must satisfy 1/2 < gamma < 1, got {gamma}")));
    }
    Ok(())
}

impl RadiationField {
    pub fn zero(band: usize, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(RadiationField { band, gamma, modes: vec![None; mode_count(band)] })
    }

    /// Inserts a mode, enforcing the tail condition for this field's gamma.
    pub fn set_mode(&mut self, l: usize, m: i64, p: Profile) -> Result<()> {
        if l > self.band || m.unsigned_abs() as usize > l {
            return Err(Error::range("mode", format!("({l},{m}) outside band limit {}", self.band)));
        }
        if let Tail::Power(e) = p.decay() {
            if e <= self.gamma {
                return Err(Error::range(
                    "profile.exponent",
                    format!("mode ({l},{m}): tail exponent {e} must exceed gamma = {}", self.gamma),
                ));
            }
        }
        self.modes[mode_index(l, m)] = Some(p);
        Ok(())
    }

    /// Inserts a mode without the tail condition (derived fields, exploratory use).
    pub fn set_mode_unchecked(&mut self, l: usize, m: i64, p: Profile) {
        self.modes[mode_index(l, m)] = Some(p);
    }

    pub fn from_descriptors(band: usize, gamma: f64, modes: &[(usize, i64, ProfileDescriptor)]) -> Result<Self> {
        let mut f = Self::zero(band, gamma)?;
        for (l, m, d) in modes {
            f.set_mode(*l, *m, make_profile(d, gamma)?)?;
        }
        Ok(f)
    }

    pub fn mode(&self, l: usize, m: i64) -> Option<&Profile> {
        if l > self.band {
            return None;
        }
        self.modes[mode_index(l, m)].as_ref()
    }

    /// (flat index, profile) for every populated mode.
    pub fn active(&self) -> impl Iterator<Item = (usize, &Profile)> {
        self.modes.iter().enumerate().filter_map(|(i, p)| p.as_ref().map(|p| (i, p)))
    }

    pub fn is_zero(&self) -> bool {
        self.active().next().is_none()
    }

    /// Largest ℓ carrying a profile.
    pub fn max_active_l(&self) -> usize {
        self.active().map(|(i, _)| mode_lm(i).0).max().unwrap_or(0)
    }

    /// True when every populated mode has m = 0.
    pub fn is_axisymmetric(&self) -> bool {
        self.active().all(|(i, _)| mode_lm(i).1 == 0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let modes = self.modes.iter().map(|p| p.as_ref().map(|p| p.scaled(c))).collect();
        RadiationField { band: self.band, gamma: self.gamma, modes }
    }

    /// a·F + b·G mode by mode.
    pub fn combine(a: f64, f: &RadiationField, b: f64, g: &RadiationField) -> Self {
        let band = f.band.max(g.band);
        let mut modes = vec![None; mode_count(band)];
        for (idx, slot) in modes.iter_mut().enumerate() {
            let (l, m) = mode_lm(idx);
            *slot = match (f.mode(l, m), g.mode(l, m)) {
                (Some(p), Some(q)) => Some(Profile::combine(vec![(a, p.clone()), (b, q.clone())])),
                (Some(p), None) => Some(p.scaled(a)),
                (None, Some(q)) => Some(q.scaled(b)),
                (None, None) => None,
            };
        }
        RadiationField { band, gamma: f.gamma, modes }
    }

    /// Mode coefficients of the k-th q-derivative at q.
    pub fn derivative_modes(&self, q: f64, k: usize) -> ModeVector {
        let mut mv = ModeVector::zeros(self.band);
        for (i, p) in self.active() {
            mv.coeffs[i] = p.derivative(q, k);
        }
        mv
    }

    /// ∂_q F mode by mode.
    pub fn slope(&self) -> Self {
        let modes =
            self.modes.iter().map(|p| p.as_ref().map(|p| Profile::new(Derivative { base: p.clone() }))).collect();
        RadiationField { band: self.band, gamma: self.gamma, modes }
    }

    /// Hull of the mode cores.
    pub fn core(&self) -> (f64, f64) {
        self.active().map(|(_, p)| p.core()).fold((0.0f64, 0.0f64), |(a, b), (c, d)| (a.min(c), b.max(d)))
    }
}

pub const DEFAULT_F1_SPACING: f64 = 0.025;

/// F₁ with 2F₁' = Δ_ω F₀ and F₁(0) = 0, tabulated over a default q range.
pub fn derive_f1(f0: &RadiationField) -> Result<RadiationField> {
    let (lo, hi) = f0.core();
    derive_f1_on(f0, lo - 40.0, hi + 40.0, DEFAULT_F1_SPACING)
}

/// F₁ tabulated on [q_lo, q_hi] with spacing `dq` (evaluation outside stays exact).
pub fn derive_f1_on(f0: &RadiationField, q_lo: f64, q_hi: f64, dq: f64) -> Result<RadiationField> {
    let mut f1 = RadiationField { band: f0.band, gamma: f0.gamma, modes: vec![None; mode_count(f0.band)] };
    for (idx, p) in f0.active() {
        let (l, m) = mode_lm(idx);
        if l == 0 {
            continue;
        }
        let (clo, chi) = p.core();
        let a = Antiderivative::new(p.clone(), -0.5 * eigenvalue(l), q_lo.min(clo), q_hi.max(chi), dq).map_err(
            |e| match e {
                Error::Quadrature(d) => Error::Divergent { l, m, detail: d },
                other => other,
            },
        )?;
        f1.modes[idx] = Some(Profile::new(a));
    }
    Ok(f1)
}

/// F₁' = Δ_ω F₀ / 2, exact (no tabulation).
pub fn derive_f1_slope(f0: &RadiationField) -> RadiationField {
    let mut out = RadiationField { band: f0.band, gamma: f0.gamma, modes: vec![None; mode_count(f0.band)] };
    for (idx, p) in f0.active() {
        let l = mode_lm(idx).0;
        if l > 0 {
            out.modes[idx] = Some(p.scaled(-0.5 * eigenvalue(l)));
        }
    }
    out
}

/// M √(4π) χ_e'(q), the ℓ = 0 slope of r ψ_e.
#[derive(Debug)]
pub struct MassSlope {
    pub amplitude: f64,
    pub cutoff: Cutoff,
}

impl ProfileShape for MassSlope {
    fn kind(&self) -> &'static str {
        "mass-slope"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        self.cutoff.jet(q, order + 1).differentiate().scale(self.amplitude)
    }
    fn decay(&self) -> Tail {
        Tail::None
    }
    fn core(&self) -> (f64, f64) {
        (self.cutoff.lower, self.cutoff.upper)
    }
}

/// ∂_q F₀ with the ψ_e slope added to ℓ = 0.
pub fn leading_slope(f0: &RadiationField, mass: f64) -> RadiationField {
    let mut d = f0.slope();
    if mass != 0.0 {
        let ms = Profile::new(MassSlope { amplitude: mass * (4.0 * PI).sqrt(), cutoff: Cutoff::chi_e() });
        d.modes[0] = Some(match d.modes[0].take() {
            Some(p) => Profile::combine(vec![(1.0, p), (1.0, ms)]),
            None => ms,
        });
    }
    d
}

fn tail_exponent(p: &Profile, weight_exponent: f64) -> Tail {
    match p.decay() {
        Tail::Power(e) => Tail::Power(2.0 * e - 2.0 * weight_exponent),
        t => t,
    }
}

/// ∫ |(⟨q⟩∂_q)^k F|² ⟨q⟩^{2w} dq for one profile.
pub fn weighted_l2_sq(p: &Profile, k: usize, w: f64) -> Result<f64> {
    let (lo, hi) = p.core();
    let f = |q: f64| {
        let d = p.weighted_derivative(q, k);
        d * d * jb(q).powf(2.0 * w)
    };
    let mut bps = p.breakpoints();
    bps.push(0.0);
    let r = integrate_line(&f, lo.min(-1.0), hi.max(1.0), &bps, tail_exponent(p, w), QuadOptions::tol(1e-300, 1e-12))?;
    Ok(r.value)
}

/// Σ_{k+j≤N} Σ_ℓm (1+ℓ(ℓ+1))^j ∫ |(⟨q⟩∂_q)^k F_ℓm|² ⟨q⟩^{2w} dq.
pub fn norm_data_l2(f: &RadiationField, n: usize, w: f64) -> Result<f64> {
    let mut total = 0.0;
    for (idx, p) in f.active() {
        let (l, m) = mode_lm(idx);
        if n > p.max_derivative_order() {
            return Err(Error::range(
                "N",
                format!("mode ({l},{m}) supports {} derivatives, N = {n}", p.max_derivative_order()),
            ));
        }
        if let Tail::Power(a) = tail_exponent(p, w) {
            if a <= 1.0 {
                return Err(Error::Divergent {
                    l,
                    m,
                    detail: format!("integrand decays like |q|^-{a}, not integrable"),
                });
            }
        }
        let lam = 1.0 + eigenvalue(l);
        for k in 0..=n {
            let ik = weighted_l2_sq(p, k, w).map_err(|e| Error::Divergent { l, m, detail: e.to_string() })?;
            let ang: f64 = (0..=n - k).map(|j| lam.powi(j as i32)).sum();
            total += ang * ik;
        }
    }
    Ok(total)
}

/// Dense q sample used by sup-norms: uniform over the core, geometric beyond.
pub fn sup_sample(f: &RadiationField) -> Vec<f64> {
    let (lo, hi) = f.core();
    let (lo, hi) = (lo.min(-5.0), hi.max(5.0));
    let n = ((hi - lo) / 0.005).ceil() as usize;
    let mut qs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let mut x = 1.0;
    while x < 1e6 {
        x *= 1.02;
        qs.push(hi + x);
        qs.push(lo - x);
    }
    qs
}

/// Σ_{k+j≤N'} sup_{q,ω} ⟨q⟩^γ |Σ_ℓm (1+ℓ(ℓ+1))^{j/2} (⟨q⟩∂_q)^k F_ℓm(q) Y_ℓm(ω)|.
pub fn norm_data_sup(f: &RadiationField, nprime: usize, gamma: f64) -> Result<f64> {
    if f.is_zero() {
        return Ok(0.0);
    }
    let band = f.band;
    let grid = AngularGrid::new(2 * band + 2, 4 * band + 4, band)?;
    let qs = sup_sample(f);
    let mut total = 0.0;
    for k in 0..=nprime {
        let columns: Vec<(usize, Vec<f64>)> = f
            .active()
            .map(|(i, p)| (i, qs.iter().map(|&q| p.weighted_derivative(q, k) * jb(q).powf(gamma)).collect()))
            .collect();
        for j in 0..=nprime - k {
            let mut sup: f64 = 0.0;
            for (qi, _) in qs.iter().enumerate() {
                let mut mv = ModeVector::zeros(band);
                for (i, col) in &columns {
                    let l = mode_lm(*i).0;
                    mv.coeffs[*i] = col[qi] * (1.0 + eigenvalue(l)).powf(0.5 * j as f64);
                }
                let vals = grid.synthesize(&mv)?;
                sup = vals.iter().fold(sup, |a, v| a.max(v.abs()));
            }
            total += sup;
        }
    }
    Ok(total)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Approximant {
    Psi0,
    Psi01,
    PsiE,
    DtPsi0,
    DtPsi1,
    DtPsiE,
}

impl Approximant {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "psi0" => Self::Psi0,
            "psi01" => Self::Psi01,
            "psi_e" => Self::PsiE,
            "dt_psi0" => Self::DtPsi0,
            "dt_psi1" => Self::DtPsi1,
            "dt_psi_e" => Self::DtPsiE,
            _ => return None,
        })
    }
}

struct ModeTerm {
    idx: usize,
    lambda: f64,
    f0: Option<Profile>,
    f1: Option<Profile>,
}

/// The wave-zone approximants ψ₀, ψ₀₁, ψ_e for given F₀, F₁, M.
pub struct Approximation {
    pub band: usize,
    pub mass: f64,
    pub chi: Cutoff,
    pub chi_e: Cutoff,
    terms: Vec<ModeTerm>,
}

/// Values of a per-point evaluation: (u-independent) mode coefficients.
pub type ModeValues = Vec<f64>;

impl Approximation {
    pub fn new(f0: &RadiationField, f1: &RadiationField, mass: f64) -> Self {
        let band = f0.band.max(f1.band);
        let mut terms = Vec::new();
        for idx in 0..mode_count(band) {
            let (l, m) = mode_lm(idx);
            let p0 = f0.mode(l, m).cloned();
            let p1 = f1.mode(l, m).cloned();
            if p0.is_some() || p1.is_some() {
                terms.push(ModeTerm { idx, lambda: eigenvalue(l), f0: p0, f1: p1 });
            }
        }
        Approximation { band, mass, chi: Cutoff::chi(), chi_e: Cutoff::chi_e(), terms }
    }

    /// Flat indices of modes that can be nonzero.
    pub fn active_modes(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.terms.iter().map(|t| t.idx).collect();
        if self.mass != 0.0 && !v.contains(&0) {
            v.insert(0, 0);
        }
        v
    }

    fn f01(t: &ModeTerm, q: f64) -> (f64, f64, f64, f64) {
        let (a, ap) = t.f0.as_ref().map(|p| p.value_d1(q)).unwrap_or((0.0, 0.0));
        let (b, bp) = t.f1.as_ref().map(|p| p.value_d1(q)).unwrap_or((0.0, 0.0));
        (a, ap, b, bp)
    }

    /// Cutoff argument ⟨t-r⟩/r and (χ, χ', χ'').
    fn chi_at(&self, t: f64, r: f64) -> (f64, f64, f64, f64) {
        let x = jb(r - t) / r;
        if x >= self.chi.upper {
            return (x, 0.0, 0.0, 0.0);
        }
        let (c, c1, c2) = self.chi.value_d1_d2(x);
        (x, c, c1, c2)
    }

    fn mass_value(&self, t: f64, r: f64) -> f64 {
        self.mass * self.chi_e.value(r - t) / r * (4.0 * PI).sqrt()
    }

    fn mass_dt(&self, t: f64, r: f64) -> f64 {
        -self.mass * self.chi_e.jet(r - t, 1).derivative(1) / r * (4.0 * PI).sqrt()
    }

    /// Adds the requested approximant's mode coefficients at (t, r) into `out`.
    pub fn accumulate(&self, which: Approximant, t: f64, r: f64, scale: f64, out: &mut [f64]) {
        let q = r - t;
        match which {
            Approximant::PsiE => {
                out[0] += scale * self.mass_value(t, r);
                return;
            }
            Approximant::DtPsiE => {
                out[0] += scale * self.mass_dt(t, r);
                return;
            }
            _ => {}
        }
        let (_, c, _, _) = self.chi_at(t, r);
        if c == 0.0 {
            return;
        }
        for term in &self.terms {
            let (a, ap, b, bp) = Self::f01(term, q);
            let v = match which {
                Approximant::Psi0 => a / r * c,
                Approximant::Psi01 => (a / r + b / (r * r)) * c,
                Approximant::DtPsi0 => -ap / r * c,
                Approximant::DtPsi1 => -bp / (r * r) * c,
                _ => unreachable!(),
            };
            out[term.idx] += scale * v;
        }
    }

    /// Exact ∂_t ψ₀₁ (including the cutoff derivative) into `out`.
    pub fn accumulate_dt_psi01_exact(&self, t: f64, r: f64, scale: f64, out: &mut [f64]) {
        let q = r - t;
        let (_, c, c1, _) = self.chi_at(t, r);
        if c == 0.0 && c1 == 0.0 {
            return;
        }
        let xt = -q / (jb(q) * r);
        for term in &self.terms {
            let (a, ap, b, bp) = Self::f01(term, q);
            out[term.idx] += scale * (-(ap / r + bp / (r * r)) * c + (a / r + b / (r * r)) * c1 * xt);
        }
    }

    /// Exact ∂_r ψ₀₁ into `out`.
    pub fn accumulate_dr_psi01_exact(&self, t: f64, r: f64, scale: f64, out: &mut [f64]) {
        let q = r - t;
        let (x, c, c1, _) = self.chi_at(t, r);
        if c == 0.0 && c1 == 0.0 {
            return;
        }
        let xr = q / (jb(q) * r) - x / r;
        for term in &self.terms {
            let (a, ap, b, bp) = Self::f01(term, q);
            let g = a / r + b / (r * r);
            let gr = ap / r - a / (r * r) + bp / (r * r) - 2.0 * b / (r * r * r);
            out[term.idx] += scale * (gr * c + g * c1 * xr);
        }
    }

    /// ∂_r ψ_e (ℓ = 0 coefficient).
    pub fn dr_psi_e(&self, t: f64, r: f64) -> f64 {
        if self.mass == 0.0 {
            return 0.0;
        }
        let j = self.chi_e.jet(r - t, 1);
        self.mass * (j.derivative(1) / r - j.value() / (r * r)) * (4.0 * PI).sqrt()
    }

    /// □ψ₀₁ per mode at (t, r), from the exact (q, r) expansion.
    pub fn accumulate_box_psi01(&self, t: f64, r: f64, scale: f64, out: &mut [f64]) {
        let q = r - t;
        let (x, c, c1, c2) = self.chi_at(t, r);
        if c == 0.0 && c1 == 0.0 {
            return;
        }
        let xq = q / (jb(q) * r);
        let cq = c1 * xq;
        let cr = -c1 * x / r;
        let cqr = -xq * (c2 * x + c1) / r;
        let crr = (c2 * x * x + 2.0 * c1 * x) / (r * r);
        let r2 = r * r;
        let r3 = r2 * r;
        for term in &self.terms {
            let (f0, f0p, f1, f1p) = Self::f01(term, q);
            let lam = term.lambda;
            let a = f0 + f1 / r;
            let aq = f0p + f1p / r;
            let ar = -f1 / r2;
            // Pure-profile part: zero where χ is flat up to the λF₁/r³ remainder.
            let flat = c * (-(2.0 * f1p + lam * f0) / r2 + (2.0 - lam) * f1 / r3);
            let mixed = 2.0 * (ar * cq + aq * cr + a * cqr) + 2.0 * ar * cr + a * crr;
            out[term.idx] += scale * (flat + mixed) / r;
        }
    }
}

pub fn check_wave_zone_radius(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("approximants are defined for r > 0, got r = {r}")));
    }
    Ok(())
}

pub fn eval_approximant(
    f0: &RadiationField,
    f1: &RadiationField,
    mass: f64,
    which: Approximant,
    t: f64,
    r: f64,
) -> Result<ModeVector> {
    check_wave_zone_radius(r)?;
    let ap = Approximation::new(f0, f1, mass);
    let mut mv = ModeVector::zeros(ap.band);
    ap.accumulate(which, t, r, 1.0, &mut mv.coeffs);
    Ok(mv)
}

pub fn residual_box_psi01(f0: &RadiationField, f1: &RadiationField, t: f64, r: f64) -> Result<ModeVector> {
    check_wave_zone_radius(r)?;
    let ap = Approximation::new(f0, f1, 0.0);
    let mut mv = ModeVector::zeros(ap.band);
    ap.accumulate_box_psi01(t, r, 1.0, &mut mv.coeffs);
    Ok(mv)
}

/// max over samples of |□ψ₀₁|·⟨t+r⟩⁴ / Σ_{k+j≤2}(⟨q⟩|D^k F₀| + |D^k F₁|)(1+λ)^{j/2}, per mode.
pub fn residual_envelope_constant(f0: &RadiationField, f1: &RadiationField, points: &[(f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &(t, r) in points {
        let res = residual_box_psi01(f0, f1, t, r)?;
        let q = r - t;
        for (idx, v) in res.coeffs.iter().enumerate() {
            if *v == 0.0 {
                continue;
            }
            let (l, m) = mode_lm(idx);
            let lam = 1.0 + eigenvalue(l);
            let mut bound = 0.0;
            for k in 0..=2 {
                let d0 = f0.mode(l, m).map(|p| p.weighted_derivative(q, k).abs()).unwrap_or(0.0);
                let d1 = f1.mode(l, m).map(|p| p.weighted_derivative(q, k).abs()).unwrap_or(0.0);
                let ang: f64 = (0..=2 - k).map(|j| lam.powf(0.5 * j as f64)).sum();
                bound += ang * (jb(q) * d0 + d1);
            }
            if bound > 0.0 {
                worst = worst.max(v.abs() * jb(t + r).powi(4) / bound);
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profile::ProfileDescriptor as D;

    fn field(modes: &[(usize, i64, D)]) -> RadiationField {
        RadiationField::from_descriptors(4, 0.8, modes).unwrap()
    }

    // [TRIVIAL] Δ_ω annihilates ℓ=0
    #[test]
    fn f1_of_monopole_is_zero() {
        let f0 = field(&[(0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        assert!(derive_f1(&f0).unwrap().is_zero());
    }

    // [DERIVED] F₁ for (1,0) e^{-q²} is -∫₀^q e^{-s²} ds, by adaptive quadrature
    #[test]
    fn f1_dipole_gaussian() {
        let f0 = field(&[(1, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let f1 = derive_f1(&f0).unwrap();
        let p = f1.mode(1, 0).unwrap();
        let g = |s: f64| (-s * s).exp();
        for &q in &[-4.0, -0.6, 0.3, 1.9, 30.0] {
            let want = -crate::quadrature::integrate(&g, 0.0, q, QuadOptions::tol(1e-15, 1e-14)).unwrap().value;
            assert!((p.value(q) - want).abs() < 1e-10, "{q}: {} vs {want}", p.value(q));
        }
    }

    // [PAPER] F₁(0) = 0 for every mode
    #[test]
    fn f1_vanishes_at_origin() {
        let f0 = field(&[
            (1, -1, D::gaussian(0.3, 2.0, 1.0)),
            (2, 1, D::poly_tail(1.0, 1.5)),
            (3, 0, D::compact_bump(1.0, 2.0, -0.5)),
        ]);
        let f1 = derive_f1(&f0).unwrap();
        for (_, p) in f1.active() {
            assert_eq!(p.value(0.0), 0.0);
        }
    }

    // [TRIVIAL] linearity of the F₁ map
    #[test]
    fn f1_linearity() {
        let f = field(&[(2, 0, D::gaussian(1.0, 1.0, 0.5))]);
        let g = field(&[(2, 0, D::poly_tail(0.7, 1.4)), (1, 1, D::gaussian(1.0, 0.5, 0.0))]);
        let h = RadiationField::combine(2.0, &f, -3.0, &g);
        let (ff, gg, hh) = (derive_f1(&f).unwrap(), derive_f1(&g).unwrap(), derive_f1(&h).unwrap());
        for &q in &[-3.0, -0.2, 0.9, 4.0] {
            for (l, m) in [(2, 0), (1, 1)] {
                let a = ff.mode(l, m).map(|p| p.value(q)).unwrap_or(0.0);
                let b = gg.mode(l, m).map(|p| p.value(q)).unwrap_or(0.0);
                let c = hh.mode(l, m).unwrap().value(q);
                assert!((c - (2.0 * a - 3.0 * b)).abs() < 1e-12 * (1.0 + c.abs()));
            }
        }
    }

    // [TRIVIAL] zero field
    #[test]
    fn norms_of_zero() {
        let z = RadiationField::zero(3, 0.8).unwrap();
        assert_eq!(norm_data_l2(&z, 3, 0.3).unwrap(), 0.0);
        assert_eq!(norm_data_sup(&z, 2, 0.8).unwrap(), 0.0);
    }

    // [DERIVED] composite Simpson oracle for a single gaussian, N = 0
    #[test]
    fn l2_norm_simpson_oracle() {
        let f = field(&[(0, 0, D::gaussian(1.3, 1.5, 0.4))]);
        let w = 0.8 - 0.5;
        let got = norm_data_l2(&f, 0, w).unwrap();
        let g = |q: f64| {
            let v = 1.3 * (-((q - 0.4) / 1.5).powi(2)).exp();
            v * v * (1.0 + q * q).powf(w)
        };
        let (a, b, n) = (-20.0, 20.0, 200_000);
        let h = (b - a) / n as f64;
        let mut s = g(a) + g(b);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(a + i as f64 * h);
        }
        let want = s * h / 3.0;
        assert!((got - want).abs() < 1e-8 * want, "{got} vs {want}");
    }

    // [TRIVIAL] homogeneity of degree 2
    #[test]
    fn l2_norm_homogeneity() {
        let f = field(&[(2, 0, D::gaussian(1.0, 1.0, 0.0)), (1, -1, D::poly_tail(0.5, 1.6))]);
        let a = norm_data_l2(&f, 2, 0.3).unwrap();
        let b = norm_data_l2(&f.scaled(3.0), 2, 0.3).unwrap();
        assert!((b - 9.0 * a).abs() < 1e-10 * b);
    }

    // [TRIVIAL] divergent weighted tail names the mode
    #[test]
    fn l2_norm_divergence() {
        let mut f = RadiationField::zero(2, 0.8).unwrap();
        f.set_mode_unchecked(2, 1, make_profile(&D::poly_tail(1.0, 0.9), 0.5).unwrap());
        match norm_data_l2(&f, 0, 0.5) {
            Err(Error::Divergent { l: 2, m: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    // [DERIVED] ⟨q⟩^{-γ} profile (amplitude √(4π) to cancel Y00) has sup-norm 1
    #[test]
    fn sup_norm_cancelling_weight() {
        let gamma = 0.8;
        let mut f = RadiationField::zero(0, gamma).unwrap();
        let p = Profile::new(crate::profile::PolyTail {
            amplitude: (4.0 * PI).sqrt(),
            width: 1.0,
            center: 0.0,
            exponent: gamma,
        });
        f.set_mode_unchecked(0, 0, p);
        let s = norm_data_sup(&f, 0, gamma).unwrap();
        assert!((s - 1.0).abs() < 1e-3, "{s}");
    }

    // [TRIVIAL] sup norm is monotone in N'
    #[test]
    fn sup_norm_monotone() {
        let f = field(&[(2, 1, D::gaussian(1.0, 1.0, 0.0))]);
        let a = norm_data_sup(&f, 0, 0.8).unwrap();
        let b = norm_data_sup(&f, 2, 0.8).unwrap();
        assert!(b >= a);
    }

    // [PAPER] inequality ‖F₁‖_{N-2,γ-3/2} ≤ C ‖F₀‖_{N,γ-1/2} with a stable C
    #[test]
    fn f1_bounded_by_f0() {
        let gamma = 0.8;
        let fams = [
            vec![(1, 0, D::gaussian(1.0, 1.0, 0.0))],
            vec![(2, 0, D::gaussian(1.0, 3.0, 2.0))],
            vec![(2, -2, D::poly_tail(1.0, 1.5))],
            vec![(3, 1, D::compact_bump(1.0, 4.0, 1.0))],
            vec![(1, 1, D::gaussian(1.0, 0.5, -3.0)), (2, 0, D::poly_tail(0.3, 2.0))],
        ];
        let mut cs = Vec::new();
        for modes in fams {
            let f0 = RadiationField::from_descriptors(3, gamma, &modes).unwrap();
            let f1 = derive_f1(&f0).unwrap();
            let n1 = norm_data_l2(&f1, 0, gamma - 1.5).unwrap();
            let n0 = norm_data_l2(&f0, 2, gamma - 0.5).unwrap();
            cs.push((n1 / n0).sqrt());
        }
        let cmax = cs.iter().cloned().fold(0.0, f64::max);
        assert!(cmax < 10.0, "{cs:?}");
    }

    // [TRIVIAL] cutoff support: nothing inside ⟨t-r⟩/r ≥ 1/4
    #[test]
    fn approximants_vanish_off_wave_zone() {
        let f0 = field(&[(2, 0, D::gaussian(1.0, 1.0, 0.0)), (0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let f1 = derive_f1(&f0).unwrap();
        let v = eval_approximant(&f0, &f1, 0.0, Approximant::Psi01, 10.0, 1.0).unwrap();
        assert!(v.coeffs.iter().all(|&c| c == 0.0));
        for &(t, r) in &[(50.0, 20.0), (30.0, 100.0), (40.0, 31.0)] {
            if jb(t - r) / r >= 0.25 {
                let v = eval_approximant(&f0, &f1, 0.0, Approximant::Psi01, t, r).unwrap();
                assert!(v.coeffs.iter().all(|&c| c == 0.0));
            }
        }
        assert!(eval_approximant(&f0, &f1, 0.0, Approximant::Psi0, 1.0, 0.0).is_err());
    }

    // [TRIVIAL] χ ≡ 1 on the light cone at t = r = 100
    #[test]
    fn psi0_on_cone() {
        let f0 = field(&[(0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let f1 = derive_f1(&f0).unwrap();
        let v = eval_approximant(&f0, &f1, 0.0, Approximant::Psi0, 100.0, 100.0).unwrap();
        assert_eq!(v.get(0, 0), 1.0 / 100.0);
    }

    // [PAPER] ψ_e at t=0, r=5, M=2 is 2/5 in physical value
    #[test]
    fn mass_term_value() {
        let z = RadiationField::zero(0, 0.8).unwrap();
        let v = eval_approximant(&z, &z, 2.0, Approximant::PsiE, 0.0, 5.0).unwrap();
        assert!((v.get(0, 0) / (4.0 * PI).sqrt() - 0.4).abs() < 1e-15);
    }

    // [TRIVIAL] residual vanishes for ℓ=0 where χ' = 0
    #[test]
    fn residual_flat_monopole() {
        let f0 = field(&[(0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let f1 = derive_f1(&f0).unwrap();
        let v = residual_box_psi01(&f0, &f1, 50.0, 50.5).unwrap();
        assert_eq!(v.get(0, 0), 0.0);
    }

    // [DERIVED] analytic □ψ₀₁ vs a centered difference stencil of the sampled approximant
    #[test]
    fn residual_matches_difference_stencil() {
        let f0 = field(&[(2, 0, D::gaussian(1.0, 1.0, 0.0)), (1, 1, D::poly_tail(1.0, 1.5))]);
        let f1 = derive_f1(&f0).unwrap();
        let ap = Approximation::new(&f0, &f1, 0.0);
        let u = |t: f64, r: f64| {
            let mut o = vec![0.0; mode_count(4)];
            ap.accumulate(Approximant::Psi01, t, r, r, &mut o);
            o
        };
        for &(t, r) in &[(20.0, 17.5), (20.0, 19.0), (30.0, 27.0), (30.0, 33.0)] {
            let exact = residual_box_psi01(&f0, &f1, t, r).unwrap();
            let mut errs = Vec::new();
            for h in [0.02, 0.01] {
                let c = u(t, r);
                let (tp, tm, rp, rm) = (u(t + h, r), u(t - h, r), u(t, r + h), u(t, r - h));
                let mut e: f64 = 0.0;
                for idx in [mode_index(2, 0), mode_index(1, 1)] {
                    let lam = eigenvalue(mode_lm(idx).0);
                    let bx = (-(tp[idx] - 2.0 * c[idx] + tm[idx]) + (rp[idx] - 2.0 * c[idx] + rm[idx])) / (h * h)
                        - lam * c[idx] / (r * r);
                    e = e.max((bx / r - exact.coeffs[idx]).abs());
                }
                errs.push(e);
            }
            assert!(errs[1] < 1e-6 || errs[0] / errs[1] > 3.0, "({t},{r}): {errs:?}");
            assert!(errs[1] < 1e-4, "({t},{r}): {errs:?}");
        }
    }

    // [PAPER] |□ψ₀₁| ⟨t+r⟩⁴ bounded by the weighted data at a uniform constant
    #[test]
    fn residual_envelope_sweep() {
        let f0 = field(&[(2, 0, D::gaussian(1.0, 1.0, 0.0)), (1, 0, D::poly_tail(1.0, 1.3))]);
        let f1 = derive_f1(&f0).unwrap();
        let mut pts = Vec::new();
        for &t in &[10.0, 20.0, 40.0, 80.0, 160.0] {
            for i in 0..200 {
                pts.push((t, t * (0.5 + 1.0 * i as f64 / 200.0)));
            }
        }
        let c_all = residual_envelope_constant(&f0, &f1, &pts).unwrap();
        let late: Vec<_> = pts.iter().copied().filter(|p| p.0 >= 80.0).collect();
        let c_late = residual_envelope_constant(&f0, &f1, &late).unwrap();
        assert!(c_all.is_finite() && c_all > 0.0);
        assert!(c_late <= c_all * 1.0000001);
    }

    // [PAPER] ∂_q F₁ = Δ_ω F₀ / 2 mode by mode
    #[test]
    fn f1_slope_matches_tabulated_f1() {
        let f0 = field(&[(2, 1, D::gaussian(1.0, 1.0, 0.3)), (0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let f1 = derive_f1(&f0).unwrap();
        let s = derive_f1_slope(&f0);
        assert!(s.mode(0, 0).is_none());
        for &q in &[-2.0, 0.0, 0.7, 3.0] {
            let a = f1.mode(2, 1).unwrap().derivative(q, 1);
            let b = s.mode(2, 1).unwrap().value(q);
            assert!((a - b).abs() < 1e-9, "{q}: {a} vs {b}");
        }
    }

    // [DERIVED] the mass slope is the q-derivative of r ψ_e on ℓ = 0
    #[test]
    fn leading_slope_adds_mass() {
        let f0 = field(&[(0, 0, D::gaussian(1.0, 1.0, 0.0))]);
        let d = leading_slope(&f0, 0.5);
        let chi_e = Cutoff::chi_e();
        let y = (4.0 * PI).sqrt();
        for &q in &[0.5, 1.3, 1.7, 2.5] {
            let eps = 1e-5;
            let fd = 0.5 * y * (chi_e.value(q + eps) - chi_e.value(q - eps)) / (2.0 * eps);
            let want = f0.mode(0, 0).unwrap().derivative(q, 1) + fd;
            assert!((d.mode(0, 0).unwrap().value(q) - want).abs() < 1e-8);
        }
        let plain = leading_slope(&f0, 0.0);
        assert_eq!(plain.mode(0, 0).unwrap().value(1.5), f0.mode(0, 0).unwrap().derivative(1.5, 1));
    }
}
