use crate::error::{Error, Result};
use crate::jet::Jet;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Orientation {
    Decreasing,
    Increasing,
}

/// Smooth monotone transition between 0 and 1 over [lower, upper].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    pub lower: f64,
    pub upper: f64,
    pub orientation: Orientation,
}

fn bump_jet(x: Jet) -> Jet {
    // exp(-1/x), flat zero for x <= 0 and wherever it underflows.
    if x.value() <= 0.0 {
        return Jet::zero(x.order());
    }
    let e = (-x.recip()).exp();
    if e.value() == 0.0 || !e.value().is_finite() {
        return Jet::zero(x.order());
    }
    e
}

/// σ(x) = B(x) / (B(x) + B(1-x)) as a jet in the underlying variable.
pub fn smooth_step(x: Jet) -> Jet {
    let x0 = x.value();
    if x0 <= 0.0 {
        return Jet::zero(x.order());
    }
    if x0 >= 1.0 {
        return Jet::constant(1.0, x.order());
    }
    let b1 = bump_jet(x);
    let b2 = bump_jet((-x).offset(1.0));
    b1 * (b1 + b2).recip()
}

impl Cutoff {
    pub fn new(lower: f64, upper: f64, orientation: Orientation) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::range("cutoff", format!("need lower < upper, got [{lower}, {upper}]")));
        }
        Ok(Cutoff { lower, upper, orientation })
    }

    /// χ: 1 for s ≤ 1/8, 0 for s ≥ 1/4.
    pub fn chi() -> Self {
        Cutoff { lower: 0.125, upper: 0.25, orientation: Orientation::Decreasing }
    }

    /// χ_e: 0 for s ≤ 1, 1 for s ≥ 2.
    pub fn chi_e() -> Self {
        Cutoff { lower: 1.0, upper: 2.0, orientation: Orientation::Increasing }
    }

    pub fn jet(&self, s: f64, order: usize) -> Jet {
        let width = self.upper - self.lower;
        let x = match self.orientation {
            Orientation::Decreasing => Jet::variable(s, order).scale(-1.0 / width).offset(self.upper / width),
            Orientation::Increasing => Jet::variable(s, order).scale(1.0 / width).offset(-self.lower / width),
        };
        if order == 0 {
            return Jet::constant(self.value(s), 0);
        }
        smooth_step(x)
    }

    pub fn value(&self, s: f64) -> f64 {
        let width = self.upper - self.lower;
        let x = match self.orientation {
            Orientation::Decreasing => (self.upper - s) / width,
            Orientation::Increasing => (s - self.lower) / width,
        };
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let b1 = (-1.0 / x).exp();
        let b2 = (-1.0 / (1.0 - x)).exp();
        b1 / (b1 + b2)
    }

    /// (χ, χ', χ'') at s.
    pub fn value_d1_d2(&self, s: f64) -> (f64, f64, f64) {
        let j = self.jet(s, 2);
        (self.value(s), j.derivative(1), j.derivative(2))
    }
}
