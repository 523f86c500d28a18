use crate::angular::{AngularGrid, ModeVector};
use crate::error::{Error, Result};
use crate::jet::{weighted_derivative, Jet, JET_CAP};
use crate::profile::slowest;
use crate::quadrature::Tail;
use crate::radiation::RadiationField;

/// A backscatter source n(q, ω) given by its harmonic coefficients.
pub trait SourceProfile: Send + Sync {
    fn kind(&self) -> &'static str;
    fn band(&self) -> usize;
    /// Coefficients of (⟨q⟩∂_q)^k n at q.
    fn modes(&self, q: f64, k: usize) -> ModeVector;
    fn core(&self) -> (f64, f64);
    fn tail(&self) -> Tail;
    fn breakpoints(&self) -> Vec<f64> {
        Vec::new()
    }
    /// Weight exponent a in ⟨q₊⟩^a.
    fn decay_a(&self) -> f64;
    fn is_zero(&self) -> bool;
}

fn check_a(a: f64) -> Result<()> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::range("a", format!("must be finite and ≥ 0, got {a}")));
    }
    Ok(())
}

/// n given mode by mode through radiation-field profiles.
#[derive(Clone, Debug)]
pub struct ModeSource {
    pub field: RadiationField,
    pub a: f64,
}

impl ModeSource {
    pub fn new(field: RadiationField, a: f64) -> Result<Self> {
        check_a(a)?;
        Ok(ModeSource { field, a })
    }
}

impl SourceProfile for ModeSource {
    fn kind(&self) -> &'static str {
        "modes"
    }
    fn band(&self) -> usize {
        self.field.band
    }
    fn modes(&self, q: f64, k: usize) -> ModeVector {
        let mut mv = ModeVector::zeros(self.field.band);
        for (i, p) in self.field.active() {
            mv.coeffs[i] = p.weighted_derivative(q, k);
        }
        mv
    }
    fn core(&self) -> (f64, f64) {
        self.field.core()
    }
    fn tail(&self) -> Tail {
        slowest(self.field.active().map(|(_, p)| p.decay()))
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.field.active().flat_map(|(_, p)| p.breakpoints()).collect()
    }
    fn decay_a(&self) -> f64 {
        self.a
    }
    fn is_zero(&self) -> bool {
        self.field.is_zero()
    }
}

/// n = (∂_q F₀)², squared pointwise on an exact grid for twice the band.
#[derive(Clone, Debug)]
pub struct SquaredDerivative {
    pub f0: RadiationField,
    pub a: f64,
    grid: AngularGrid,
}

impl SquaredDerivative {
    pub fn new(f0: RadiationField, a: f64) -> Result<Self> {
        check_a(a)?;
        let grid = AngularGrid::for_band(2 * f0.band);
        Ok(SquaredDerivative { f0, a, grid })
    }
}

impl SourceProfile for SquaredDerivative {
    fn kind(&self) -> &'static str {
        "squared-derivative"
    }
    fn band(&self) -> usize {
        2 * self.f0.band
    }
    fn modes(&self, q: f64, k: usize) -> ModeVector {
        let band = 2 * self.f0.band;
        if self.f0.is_zero() {
            return ModeVector::zeros(band);
        }
        assert!(k + 2 <= JET_CAP, "weighted derivative order {k} too large");
        // Node values of ∂^(i+1) F₀ for i = 0..=k.
        let cols: Vec<Vec<f64>> = (0..=k)
            .map(|i| {
                let mv = self.f0.derivative_modes(q, i + 1).with_band(band);
                self.grid.synthesize(&mv).expect("grid band")
            })
            .collect();
        let mut derivs = vec![0.0; k + 1];
        let values: Vec<f64> = (0..self.grid.len())
            .map(|node| {
                for (d, col) in derivs.iter_mut().zip(&cols) {
                    *d = col[node];
                }
                let j = Jet::from_derivatives(&derivs);
                weighted_derivative(&(j * j), q, k).value()
            })
            .collect();
        self.grid.analyze_band(&values, band)
    }
    fn core(&self) -> (f64, f64) {
        self.f0.core()
    }
    fn tail(&self) -> Tail {
        match slowest(self.f0.active().map(|(_, p)| p.decay())) {
            Tail::Power(e) => Tail::Power(2.0 * e + 2.0),
            t => t,
        }
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.f0.active().flat_map(|(_, p)| p.breakpoints()).collect()
    }
    fn decay_a(&self) -> f64 {
        self.a
    }
    fn is_zero(&self) -> bool {
        self.f0.is_zero()
    }
}

/// n = c · A · B with A, B multiplied pointwise on an exact grid for the summed band.
#[derive(Clone, Debug)]
pub struct FieldProduct {
    pub a: RadiationField,
    pub b: RadiationField,
    pub scale: f64,
    pub decay: f64,
    grid: AngularGrid,
}

impl FieldProduct {
    pub fn new(a: RadiationField, b: RadiationField, scale: f64, decay: f64) -> Result<Self> {
        check_a(decay)?;
        let grid = AngularGrid::for_band(a.band + b.band);
        Ok(FieldProduct { a, b, scale, decay, grid })
    }

    fn node_jets(&self, f: &RadiationField, q: f64, k: usize) -> Vec<Jet> {
        let band = self.band();
        let cols: Vec<Vec<f64>> = (0..=k)
            .map(|i| self.grid.synthesize(&f.derivative_modes(q, i).with_band(band)).expect("grid band"))
            .collect();
        let mut d = vec![0.0; k + 1];
        (0..self.grid.len())
            .map(|node| {
                for (x, col) in d.iter_mut().zip(&cols) {
                    *x = col[node];
                }
                Jet::from_derivatives(&d)
            })
            .collect()
    }

    fn tails(&self) -> (Tail, Tail) {
        let t = |f: &RadiationField| slowest(f.active().map(|(_, p)| p.decay()));
        (t(&self.a), t(&self.b))
    }
}

impl SourceProfile for FieldProduct {
    fn kind(&self) -> &'static str {
        "field-product"
    }
    fn band(&self) -> usize {
        self.a.band + self.b.band
    }
    fn modes(&self, q: f64, k: usize) -> ModeVector {
        let band = self.band();
        if self.is_zero() {
            return ModeVector::zeros(band);
        }
        assert!(k < JET_CAP, "weighted derivative order {k} too large");
        let ja = self.node_jets(&self.a, q, k);
        let jb = self.node_jets(&self.b, q, k);
        let values: Vec<f64> =
            ja.iter().zip(&jb).map(|(x, y)| self.scale * weighted_derivative(&(*x * *y), q, k).value()).collect();
        self.grid.analyze_band(&values, band)
    }
    fn core(&self) -> (f64, f64) {
        let (ca, cb) = (self.a.core(), self.b.core());
        match self.tails() {
            (Tail::None, Tail::None) => (ca.0.max(cb.0), ca.1.min(cb.1).max(ca.0.max(cb.0))),
            (Tail::None, _) => ca,
            (_, Tail::None) => cb,
            _ => (ca.0.min(cb.0), ca.1.max(cb.1)),
        }
    }
    fn tail(&self) -> Tail {
        match self.tails() {
            (Tail::None, _) | (_, Tail::None) => Tail::None,
            (Tail::Rapid, _) | (_, Tail::Rapid) => Tail::Rapid,
            (Tail::Power(x), Tail::Power(y)) => Tail::Power(x + y),
        }
    }
    fn breakpoints(&self) -> Vec<f64> {
        self.a.active().chain(self.b.active()).flat_map(|(_, p)| p.breakpoints()).collect()
    }
    fn decay_a(&self) -> f64 {
        self.decay
    }
    fn is_zero(&self) -> bool {
        self.a.is_zero() || self.b.is_zero() || self.scale == 0.0
    }
}
