//! Profiles of the retarded coordinate q = r - t.
//!
//! Each closed-form kind is a `ProfileShape` registered by name in a
//! `ProfileRegistry`; run configurations select kinds by that name.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{bracket, weighted_derivative, Jet, JET_CAP};
use crate::quadrature::{gk15, integrate, QuadOptions, Tail};

pub trait ProfileShape: Send + Sync + fmt::Debug {
    fn kind(&self) -> &'static str;
    /// Taylor jet of the profile at q, truncated at `order`.
    fn jet(&self, q: f64, order: usize) -> Jet;
    fn max_derivative_order(&self) -> usize {
        JET_CAP - 1
    }
    /// Decay of |F| outside `core`.
    fn decay(&self) -> Tail;
    /// Interval carrying the bulk of the profile (exact support for compact kinds).
    fn core(&self) -> (f64, f64);
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    fn descriptor(&self) -> Option<ProfileDescriptor> {
        None
    }
}

#[derive(Clone, Debug)]
pub struct Profile(Arc<dyn ProfileShape>);

impl Profile {
    pub fn new(shape: impl ProfileShape + 'static) -> Self {
        Profile(Arc::new(shape))
    }

    pub fn shape(&self) -> &dyn ProfileShape {
        self.0.as_ref()
    }

    pub fn kind(&self) -> &'static str {
        self.0.kind()
    }

    pub fn jet(&self, q: f64, order: usize) -> Jet {
        self.0.jet(q, order)
    }

    pub fn value(&self, q: f64) -> f64 {
        self.0.jet(q, 0).value()
    }

    pub fn derivative(&self, q: f64, k: usize) -> f64 {
        self.0.jet(q, k).derivative(k)
    }

    /// (F, F') at q.
    pub fn value_d1(&self, q: f64) -> (f64, f64) {
        let j = self.0.jet(q, 1);
        (j.value(), j.derivative(1))
    }

    /// (⟨q⟩ ∂_q)^k F at q.
    pub fn weighted_derivative(&self, q: f64, k: usize) -> f64 {
        let j = self.0.jet(q, k);
        weighted_derivative(&j, q, k).value()
    }

    pub fn max_derivative_order(&self) -> usize {
        self.0.max_derivative_order()
    }

    pub fn decay(&self) -> Tail {
        self.0.decay()
    }

    pub fn core(&self) -> (f64, f64) {
        self.0.core()
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        self.0.breakpoints()
    }

    pub fn descriptor(&self) -> Option<ProfileDescriptor> {
        self.0.descriptor()
    }

    pub fn scaled(&self, c: f64) -> Profile {
        Profile::new(Combination { terms: vec![(c, self.clone())] })
    }

    pub fn combine(terms: Vec<(f64, Profile)>) -> Profile {
        Profile::new(Combination { terms })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleTable {
    pub q: Vec<f64>,
    pub values: Vec<f64>,
}

/// Textual description of a profile, as found in a run configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileDescriptor {
    pub kind: String,
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub table: Option<SampleTable>,
}

impl ProfileDescriptor {
    pub fn gaussian(amplitude: f64, width: f64, center: f64) -> Self {
        ProfileDescriptor { kind: "gaussian".into(), amplitude, width, center, exponent: None, table: None }
    }

    pub fn poly_tail(amplitude: f64, exponent: f64) -> Self {
        ProfileDescriptor {
            kind: "poly-tail".into(),
            amplitude,
            width: 1.0,
            center: 0.0,
            exponent: Some(exponent),
            table: None,
        }
    }

    pub fn compact_bump(amplitude: f64, width: f64, center: f64) -> Self {
        ProfileDescriptor { kind: "compact-bump".into(), amplitude, width, center, exponent: None, table: None }
    }

    pub fn sampled(q: Vec<f64>, values: Vec<f64>) -> Self {
        ProfileDescriptor {
            kind: "sampled".into(),
            amplitude: 1.0,
            width: 1.0,
            center: 0.0,
            exponent: None,
            table: Some(SampleTable { q, values }),
        }
    }

    /// Parses `kind key=value ...`, e.g. `gaussian amplitude=1 width=2 center=0`.
    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut tokens = text.split_whitespace();
        let kind = tokens.next().ok_or("empty profile descriptor")?.to_string();
        let mut d = ProfileDescriptor { kind, amplitude: 1.0, width: 1.0, center: 0.0, exponent: None, table: None };
        let mut q = None;
        let mut values = None;
        let mut seen = Vec::new();
        for tok in tokens {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("expected key=value, found `{tok}`"))?;
            if seen.contains(&k) {
                return Err(format!("profile parameter `{k}` given twice"));
            }
            seen.push(k);
            let num = |v: &str| v.parse::<f64>().map_err(|_| format!("`{k}`: not a number: `{v}`"));
            let list = |v: &str| -> std::result::Result<Vec<f64>, String> {
                v.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| format!("`{k}`: bad entry `{x}`"))).collect()
            };
            match k {
                "amplitude" | "A" => d.amplitude = num(v)?,
                "width" | "w" => d.width = num(v)?,
                "center" | "c" => d.center = num(v)?,
                "exponent" | "p" => d.exponent = Some(num(v)?),
                "q" => q = Some(list(v)?),
                "values" => values = Some(list(v)?),
                _ => return Err(format!("unknown profile parameter `{k}`")),
            }
        }
        match (q, values) {
            (Some(q), Some(values)) => d.table = Some(SampleTable { q, values }),
            (None, None) => {}
            _ => return Err("sampled tables need both `q` and `values`".into()),
        }
        Ok(d)
    }
}

impl fmt::Display for ProfileDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        if let Some(t) = &self.table {
            let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
            return write!(f, " q={} values={}", join(&t.q), join(&t.values));
        }
        write!(f, " amplitude={:?} width={:?} center={:?}", self.amplitude, self.width, self.center)?;
        if let Some(p) = self.exponent {
            write!(f, " exponent={p:?}")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Gaussian {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl ProfileShape for Gaussian {
    fn kind(&self) -> &'static str {
        "gaussian"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        let x = Jet::variable(q, order).offset(-self.center).scale(1.0 / self.width);
        (-(x * x)).exp().scale(self.amplitude)
    }
    fn decay(&self) -> Tail {
        Tail::Rapid
    }
    fn core(&self) -> (f64, f64) {
        (self.center - 9.0 * self.width, self.center + 9.0 * self.width)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.center]
    }
    fn descriptor(&self) -> Option<ProfileDescriptor> {
        Some(ProfileDescriptor::gaussian(self.amplitude, self.width, self.center))
    }
}

/// A (1 + x²)^(-p/2), x = (q - center)/width.
#[derive(Clone, Debug)]
pub struct PolyTail {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
    pub exponent: f64,
}

impl ProfileShape for PolyTail {
    fn kind(&self) -> &'static str {
        "poly-tail"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        let x = Jet::variable(q, order).offset(-self.center).scale(1.0 / self.width);
        (x * x).offset(1.0).powf(-0.5 * self.exponent).scale(self.amplitude)
    }
    fn decay(&self) -> Tail {
        Tail::Power(self.exponent)
    }
    fn core(&self) -> (f64, f64) {
        (self.center - 20.0 * self.width, self.center + 20.0 * self.width)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.center]
    }
    fn descriptor(&self) -> Option<ProfileDescriptor> {
        Some(ProfileDescriptor {
            kind: "poly-tail".into(),
            amplitude: self.amplitude,
            width: self.width,
            center: self.center,
            exponent: Some(self.exponent),
            table: None,
        })
    }
}

/// A exp(1 - 1/(1 - x²)) on |x| < 1, peak value A at the center.
#[derive(Clone, Debug)]
pub struct CompactBump {
    pub amplitude: f64,
    pub width: f64,
    pub center: f64,
}

impl ProfileShape for CompactBump {
    fn kind(&self) -> &'static str {
        "compact-bump"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        let x = Jet::variable(q, order).offset(-self.center).scale(1.0 / self.width);
        let d = (-(x * x)).offset(1.0);
        if d.value() <= 0.0 {
            return Jet::zero(order);
        }
        let e = (-d.recip()).offset(1.0).exp();
        if e.value() == 0.0 {
            return Jet::zero(order);
        }
        e.scale(self.amplitude)
    }
    fn decay(&self) -> Tail {
        Tail::None
    }
    fn core(&self) -> (f64, f64) {
        (self.center - self.width, self.center + self.width)
    }
    fn breakpoints(&self) -> Vec<f64> {
        vec![self.center]
    }
    fn descriptor(&self) -> Option<ProfileDescriptor> {
        Some(ProfileDescriptor::compact_bump(self.amplitude, self.width, self.center))
    }
}

/// Natural cubic spline through a table; zero outside the table range.
#[derive(Clone, Debug)]
pub struct Sampled {
    q: Vec<f64>,
    f: Vec<f64>,
    m: Vec<f64>,
}

impl Sampled {
    pub fn new(q: Vec<f64>, f: Vec<f64>) -> Result<Self> {
        let n = q.len();
        if n < 2 || f.len() != n {
            return Err(Error::range("sampled", "table needs ≥ 2 points and equal-length q/values"));
        }
        if q.windows(2).any(|w| w[1] <= w[0]) || q.iter().chain(&f).any(|v| !v.is_finite()) {
            return Err(Error::range("sampled", "q must be strictly increasing and all entries finite"));
        }
        // Second derivatives of the natural spline, tridiagonal solve.
        let mut m = vec![0.0; n];
        if n > 2 {
            let mut c = vec![0.0; n];
            let mut d = vec![0.0; n];
            for i in 1..n - 1 {
                let h0 = q[i] - q[i - 1];
                let h1 = q[i + 1] - q[i];
                let a = h0 / 6.0;
                let b = (h0 + h1) / 3.0;
                let cc = h1 / 6.0;
                let rhs = (f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0;
                let denom = b - a * c[i - 1];
                c[i] = cc / denom;
                d[i] = (rhs - a * d[i - 1]) / denom;
            }
            for i in (1..n - 1).rev() {
                m[i] = d[i] - c[i] * m[i + 1];
            }
        }
        Ok(Sampled { q, f, m })
    }
}

impl ProfileShape for Sampled {
    fn kind(&self) -> &'static str {
        "sampled"
    }
    fn jet(&self, x: f64, order: usize) -> Jet {
        let n = self.q.len();
        if x < self.q[0] || x > self.q[n - 1] {
            return Jet::zero(order);
        }
        let i = match self.q.partition_point(|&v| v <= x) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        let h = self.q[i + 1] - self.q[i];
        let a = (self.q[i + 1] - x) / h;
        let b = (x - self.q[i]) / h;
        let (m0, m1) = (self.m[i], self.m[i + 1]);
        let v = a * self.f[i] + b * self.f[i + 1] + ((a * a * a - a) * m0 + (b * b * b - b) * m1) * h * h / 6.0;
        let d1 =
            (self.f[i + 1] - self.f[i]) / h - (3.0 * a * a - 1.0) * h * m0 / 6.0 + (3.0 * b * b - 1.0) * h * m1 / 6.0;
        let d2 = a * m0 + b * m1;
        let d3 = (m1 - m0) / h;
        let mut derivs = vec![v, d1, d2, d3];
        derivs.resize(order + 1, 0.0);
        Jet::from_derivatives(&derivs[..=order])
    }
    fn max_derivative_order(&self) -> usize {
        2
    }
    fn decay(&self) -> Tail {
        Tail::None
    }
    fn core(&self) -> (f64, f64) {
        (self.q[0], self.q[self.q.len() - 1])
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.q.clone()
    }
    fn descriptor(&self) -> Option<ProfileDescriptor> {
        Some(ProfileDescriptor::sampled(self.q.clone(), self.f.clone()))
    }
}

#[derive(Clone, Debug)]
pub struct Combination {
    pub terms: Vec<(f64, Profile)>,
}

impl ProfileShape for Combination {
    fn kind(&self) -> &'static str {
        "combination"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        self.terms.iter().fold(Jet::zero(order), |acc, (c, p)| acc + p.jet(q, order).scale(*c))
    }
    fn max_derivative_order(&self) -> usize {
        self.terms.iter().map(|(_, p)| p.max_derivative_order()).min().unwrap_or(JET_CAP - 1)
    }
    fn decay(&self) -> Tail {
        slowest(self.terms.iter().map(|(_, p)| p.decay()))
    }
    fn core(&self) -> (f64, f64) {
        hull(self.terms.iter().map(|(_, p)| p.core()))
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.terms.iter().flat_map(|(_, p)| p.breakpoints()).collect()
    }
}

pub fn slowest(tails: impl Iterator<Item = Tail>) -> Tail {
    tails.fold(Tail::None, |acc, t| match (acc, t) {
        (Tail::Power(a), Tail::Power(b)) => Tail::Power(a.min(b)),
        (Tail::Power(a), _) | (_, Tail::Power(a)) => Tail::Power(a),
        (Tail::Rapid, _) | (_, Tail::Rapid) => Tail::Rapid,
        _ => Tail::None,
    })
}

fn hull(it: impl Iterator<Item = (f64, f64)>) -> (f64, f64) {
    it.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (c, d)| (a.min(c), b.max(d)))
}

/// `scale · ∫_0^q base`, tabulated on a uniform grid containing 0 and
/// interpolated by quintic Hermite using the exact base values and slopes.
#[derive(Debug)]
pub struct Antiderivative {
    base: Profile,
    scale: f64,
    dq: f64,
    i_lo: i64,
    table: Vec<f64>,
}

impl Antiderivative {
    pub fn new(base: Profile, scale: f64, q_lo: f64, q_hi: f64, dq: f64) -> Result<Self> {
        let i_lo = (q_lo.min(0.0) / dq).floor() as i64;
        let i_hi = (q_hi.max(0.0) / dq).ceil() as i64;
        let n = (i_hi - i_lo + 1) as usize;
        let zero = (-i_lo) as usize;
        let mut table = vec![0.0; n];
        let f = |q: f64| base.value(q);
        let panel = |a: f64, b: f64| -> Result<f64> {
            let (v, e) = gk15(&f, a, b);
            if e <= 1e-15 * (1.0 + v.abs()) {
                Ok(v)
            } else {
                Ok(integrate(&f, a, b, QuadOptions::tol(1e-16, 1e-14))?.value)
            }
        };
        for i in zero + 1..n {
            let a = (i_lo + i as i64 - 1) as f64 * dq;
            table[i] = table[i - 1] + panel(a, a + dq)?;
        }
        for i in (0..zero).rev() {
            let a = (i_lo + i as i64) as f64 * dq;
            table[i] = table[i + 1] - panel(a, a + dq)?;
        }
        if table.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature("antiderivative table is not finite".into()));
        }
        Ok(Antiderivative { base, scale, dq, i_lo, table })
    }

    fn node(&self, i: usize) -> f64 {
        (self.i_lo + i as i64) as f64 * self.dq
    }

    fn integral(&self, q: f64) -> f64 {
        let n = self.table.len();
        let (q0, q1) = (self.node(0), self.node(n - 1));
        if q <= q0 || q >= q1 {
            let (edge, val) = if q <= q0 { (q0, self.table[0]) } else { (q1, self.table[n - 1]) };
            if matches!(self.base.decay(), Tail::Power(_)) && q != edge {
                let f = |x: f64| self.base.value(x);
                let (a, b, sign) = if q > edge { (edge, q, 1.0) } else { (q, edge, -1.0) };
                let r = integrate(&f, a, b, QuadOptions::tol(1e-15, 1e-13)).map(|r| r.value).unwrap_or(f64::NAN);
                return val + sign * r;
            }
            return val;
        }
        let t = (q - q0) / self.dq;
        let i = (t.floor() as usize).min(n - 2);
        let s = t - i as f64;
        let (xa, xb) = (self.node(i), self.node(i + 1));
        let ja = self.base.jet(xa, 1);
        let jb = self.base.jet(xb, 1);
        let h = self.dq;
        let (p0, p1) = (self.table[i], self.table[i + 1]);
        let (m0, m1) = (ja.value() * h, jb.value() * h);
        let (a0, a1) = (ja.derivative(1) * h * h, jb.derivative(1) * h * h);
        let s2 = s * s;
        let s3 = s2 * s;
        let s4 = s3 * s;
        let s5 = s4 * s;
        let h00 = 1.0 - 10.0 * s3 + 15.0 * s4 - 6.0 * s5;
        let h10 = s - 6.0 * s3 + 8.0 * s4 - 3.0 * s5;
        let h20 = 0.5 * (s2 - 3.0 * s3 + 3.0 * s4 - s5);
        let h01 = 10.0 * s3 - 15.0 * s4 + 6.0 * s5;
        let h11 = -4.0 * s3 + 7.0 * s4 - 3.0 * s5;
        let h21 = 0.5 * (s3 - 2.0 * s4 + s5);
        h00 * p0 + h10 * m0 + h20 * a0 + h01 * p1 + h11 * m1 + h21 * a1
    }
}

impl ProfileShape for Antiderivative {
    fn kind(&self) -> &'static str {
        "antiderivative"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        let mut derivs = vec![self.integral(q)];
        if order >= 1 {
            let b = self.base.jet(q, order - 1);
            derivs.extend((0..order).map(|k| b.derivative(k)));
        }
        Jet::from_derivatives(&derivs).scale(self.scale)
    }
    fn max_derivative_order(&self) -> usize {
        (self.base.max_derivative_order() + 1).min(JET_CAP - 1)
    }
    fn decay(&self) -> Tail {
        match self.base.decay() {
            Tail::Power(p) => Tail::Power(p - 1.0),
            _ => Tail::Power(0.0),
        }
    }
    fn core(&self) -> (f64, f64) {
        self.base.core()
    }
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = self.base.breakpoints();
        b.push(0.0);
        b
    }
}

/// ∂_q of a base profile.
#[derive(Debug)]
pub struct Derivative {
    pub base: Profile,
}

impl ProfileShape for Derivative {
    fn kind(&self) -> &'static str {
        "derivative"
    }
    fn jet(&self, q: f64, order: usize) -> Jet {
        self.base.jet(q, order + 1).differentiate()
    }
    fn max_derivative_order(&self) -> usize {
        self.base.max_derivative_order().saturating_sub(1)
    }
    fn decay(&self) -> Tail {
        match self.base.decay() {
            Tail::Power(p) => Tail::Power(p + 1.0),
            t => t,
        }
    }
    fn core(&self) -> (f64, f64) {
        self.base.core()
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.base.breakpoints()
    }
}

pub type ProfileBuilder = fn(&ProfileDescriptor) -> Result<Profile>;

pub struct ProfileRegistry {
    builders: BTreeMap<&'static str, ProfileBuilder>,
}

fn check_shape(d: &ProfileDescriptor) -> Result<()> {
    if !(d.amplitude.is_finite() && d.center.is_finite()) {
        return Err(Error::range("profile", "amplitude and center must be finite"));
    }
    if !(d.width.is_finite() && d.width > 0.0) {
        return Err(Error::range("profile.width", format!("must be finite and > 0, got {}", d.width)));
    }
    Ok(())
}

fn build_gaussian(d: &ProfileDescriptor) -> Result<Profile> {
    check_shape(d)?;
    Ok(Profile::new(Gaussian { amplitude: d.amplitude, width: d.width, center: d.center }))
}

fn build_poly_tail(d: &ProfileDescriptor) -> Result<Profile> {
    check_shape(d)?;
    let p = d.exponent.ok_or_else(|| Error::range("profile.exponent", "poly-tail needs `exponent`"))?;
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::range("profile.exponent", format!("must be finite and > 0, got {p}")));
    }
    Ok(Profile::new(PolyTail { amplitude: d.amplitude, width: d.width, center: d.center, exponent: p }))
}

fn build_compact_bump(d: &ProfileDescriptor) -> Result<Profile> {
    check_shape(d)?;
    Ok(Profile::new(CompactBump { amplitude: d.amplitude, width: d.width, center: d.center }))
}

fn build_sampled(d: &ProfileDescriptor) -> Result<Profile> {
    let t = d.table.as_ref().ok_or_else(|| Error::range("profile", "sampled profile needs `q` and `values`"))?;
    Ok(Profile::new(Sampled::new(t.q.clone(), t.values.clone())?))
}

impl ProfileRegistry {
    pub fn empty() -> Self {
        ProfileRegistry { builders: BTreeMap::new() }
    }

    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register("gaussian", build_gaussian);
        r.register("poly-tail", build_poly_tail);
        r.register("compact-bump", build_compact_bump);
        r.register("sampled", build_sampled);
        r
    }

    pub fn register(&mut self, name: &'static str, builder: ProfileBuilder) {
        self.builders.insert(name, builder);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.builders.keys().copied().collect()
    }

    pub fn build(&self, d: &ProfileDescriptor) -> Result<Profile> {
        let b = self.builders.get(d.kind.as_str()).ok_or_else(|| Error::Unknown {
            what: "profile kind",
            name: d.kind.clone(),
            known: self.names().join(", "),
        })?;
        b(d)
    }
}

/// Builds a profile for a field with decay parameter `gamma`, rejecting tails
/// too slow for the weighted data norm.
pub fn make_profile(d: &ProfileDescriptor, gamma: f64) -> Result<Profile> {
    let p = ProfileRegistry::standard().build(d)?;
    if let Tail::Power(e) = p.decay() {
        if e <= gamma {
            return Err(Error::range(
                "profile.exponent",
                format!("poly-tail exponent {e} must exceed gamma = {gamma} (the data norm would diverge)"),
            ));
        }
    }
    Ok(p)
}

/// ⟨q⟩ as a plain function.
pub fn jb(q: f64) -> f64 {
    (1.0 + q * q).sqrt()
}

/// ⟨q⟩ as a jet about q.
pub fn jb_jet(q: f64, order: usize) -> Jet {
    bracket(&Jet::variable(q, order))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g() -> Profile {
        make_profile(&ProfileDescriptor::gaussian(1.0, 1.0, 0.0), 0.8).unwrap()
    }

    // [TRIVIAL] peak of unit gaussian
    #[test]
    fn gaussian_peak() {
        assert_eq!(g().value(0.0), 1.0);
    }

    // [TRIVIAL] even symmetry
    #[test]
    fn gaussian_slope_at_peak() {
        assert_eq!(g().derivative(0.0, 1), 0.0);
    }

    // [DERIVED] direct formula oracle
    #[test]
    fn poly_tail_value() {
        let p = make_profile(&ProfileDescriptor::poly_tail(1.0, 1.2), 0.8).unwrap();
        assert!((p.value(2.0) - 5f64.powf(-0.6)).abs() < 1e-14);
    }

    // [TRIVIAL] rejection of slow tails and unknown kinds
    #[test]
    fn rejections() {
        assert!(make_profile(&ProfileDescriptor::poly_tail(1.0, 0.7), 0.8).is_err());
        assert!(make_profile(&ProfileDescriptor::poly_tail(1.0, 0.8), 0.8).is_err());
        let mut d = ProfileDescriptor::gaussian(1.0, 1.0, 0.0);
        d.kind = "lorentzian".into();
        assert!(matches!(make_profile(&d, 0.8), Err(Error::Unknown { .. })));
    }

    // [DERIVED] compact bump derivative vs finite differences, zero outside
    #[test]
    fn compact_bump_shape() {
        let p = make_profile(&ProfileDescriptor::compact_bump(2.0, 1.5, 0.5), 0.8).unwrap();
        assert_eq!(p.value(0.5), 2.0);
        assert_eq!(p.value(2.0), 0.0);
        assert_eq!(p.value(-1.0), 0.0);
        let h = 1e-6;
        let q = 1.1;
        let fd = (p.value(q + h) - p.value(q - h)) / (2.0 * h);
        assert!((p.derivative(q, 1) - fd).abs() < 1e-7);
    }

    // [DERIVED] natural spline reproduces linear data exactly and is zero outside
    #[test]
    fn sampled_spline() {
        let q: Vec<f64> = (0..11).map(|i| i as f64 * 0.5).collect();
        let v: Vec<f64> = q.iter().map(|x| 2.0 * x + 1.0).collect();
        let p = make_profile(&ProfileDescriptor::sampled(q, v), 0.8).unwrap();
        assert!((p.value(1.3) - 3.6).abs() < 1e-14);
        assert!((p.derivative(2.2, 1) - 2.0).abs() < 1e-13);
        assert_eq!(p.value(-0.1), 0.0);
        assert_eq!(p.value(5.1), 0.0);
    }

    // [DERIVED] antiderivative of e^{-q²} against adaptive quadrature of the defining integral
    #[test]
    fn antiderivative_erf() {
        let a = Antiderivative::new(g(), 1.0, -12.0, 12.0, 0.05).unwrap();
        let p = Profile::new(a);
        let f = |x: f64| (-x * x).exp();
        for &q in &[-3.3, -1.0, 0.0, 0.37, 1.234, 2.5, 8.0, 20.0] {
            let want =
                if q == 0.0 { 0.0 } else { integrate(&f, 0.0, q, QuadOptions::tol(1e-15, 1e-14)).unwrap().value };
            assert!((p.value(q) - want).abs() < 1e-10, "q={q}: {} vs {want}", p.value(q));
        }
        assert_eq!(p.value(0.0), 0.0);
        assert!((p.derivative(0.7, 1) - (-0.49f64).exp()).abs() < 1e-15);
    }

    // [TRIVIAL] descriptor text round trip
    #[test]
    fn descriptor_round_trip() {
        let d = ProfileDescriptor::parse("poly-tail amplitude=0.5 exponent=1.3 center=2").unwrap();
        let again = ProfileDescriptor::parse(&d.to_string()).unwrap();
        assert_eq!(d, again);
        assert!(ProfileDescriptor::parse("gaussian amplitude=1 amplitude=2").is_err());
        let s = ProfileDescriptor::parse("sampled q=0,1,2 values=0,1,0").unwrap();
        assert_eq!(ProfileDescriptor::parse(&s.to_string()).unwrap(), s);
    }

    // [DERIVED] weighted derivative (⟨q⟩∂q) of a gaussian
    #[test]
    fn weighted_derivative_gaussian() {
        let q = 0.8;
        let want = jb(q) * (-2.0 * q * (-q * q).exp());
        assert!((g().weighted_derivative(q, 1) - want).abs() < 1e-15);
    }

    // [DERIVED] derivative profile against the base jet, tails one power faster
    #[test]
    fn derivative_profile() {
        let base = make_profile(&ProfileDescriptor::poly_tail(1.0, 1.2), 0.8).unwrap();
        let d = Profile::new(Derivative { base: base.clone() });
        for &q in &[-3.0, 0.4, 7.0] {
            assert!((d.value(q) - base.derivative(q, 1)).abs() < 1e-14);
            assert!((d.derivative(q, 1) - base.derivative(q, 2)).abs() < 1e-13);
        }
        assert!(matches!(d.decay(), Tail::Power(p) if (p - 2.2).abs() < 1e-15));
    }
}
