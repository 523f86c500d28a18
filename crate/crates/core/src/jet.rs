//! Truncated Taylor arithmetic.
//!
//! A `Jet` stores the normalized Taylor coefficients `c_k = f^(k)(x0)/k!` of a
//! function at a point, up to a fixed order. Closed-form profiles and cutoffs
//! are written once in terms of jets and get exact derivatives for free.

use std::ops::{Add, Mul, Neg, Sub};

pub const JET_CAP: usize = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet {
    c: [f64; JET_CAP],
    len: usize,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Jet {
    pub fn constant(value: f64, order: usize) -> Self {
        assert!(order < JET_CAP, "jet order {order} exceeds capacity");
        let mut c = [0.0; JET_CAP];
        c[0] = value;
        Jet { c, len: order + 1 }
    }

    /// The identity function expanded about `x0`.
    pub fn variable(x0: f64, order: usize) -> Self {
        let mut j = Jet::constant(x0, order);
        if order >= 1 {
            j.c[1] = 1.0;
        }
        j
    }

    pub fn zero(order: usize) -> Self {
        Jet::constant(0.0, order)
    }

    pub fn from_derivatives(derivs: &[f64]) -> Self {
        assert!(!derivs.is_empty() && derivs.len() <= JET_CAP);
        let mut c = [0.0; JET_CAP];
        for (k, d) in derivs.iter().enumerate() {
            c[k] = d / factorial(k);
        }
        Jet { c, len: derivs.len() }
    }

    pub fn order(&self) -> usize {
        self.len - 1
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, k: usize) -> f64 {
        if k < self.len {
            self.c[k]
        } else {
            0.0
        }
    }

    /// k-th derivative at the expansion point.
    pub fn derivative(&self, k: usize) -> f64 {
        self.coeff(k) * factorial(k)
    }

    pub fn is_zero(&self) -> bool {
        self.c[..self.len].iter().all(|&v| v == 0.0)
    }

    pub fn truncate(&self, order: usize) -> Self {
        let len = (order + 1).min(self.len);
        let mut c = [0.0; JET_CAP];
        c[..len].copy_from_slice(&self.c[..len]);
        Jet { c, len }
    }

    /// Jet of the derivative, one order lower.
    pub fn differentiate(&self) -> Self {
        if self.len == 1 {
            return Jet::zero(0);
        }
        let mut c = [0.0; JET_CAP];
        for k in 0..self.len - 1 {
            c[k] = (k + 1) as f64 * self.c[k + 1];
        }
        Jet { c, len: self.len - 1 }
    }

    pub fn scale(&self, a: f64) -> Self {
        let mut out = *self;
        for v in out.c[..out.len].iter_mut() {
            *v *= a;
        }
        out
    }

    pub fn offset(&self, a: f64) -> Self {
        let mut out = *self;
        out.c[0] += a;
        out
    }

    pub fn recip(&self) -> Self {
        let g0 = self.c[0];
        let mut r = [0.0; JET_CAP];
        r[0] = 1.0 / g0;
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += self.c[j] * r[k - j];
            }
            r[k] = -acc / g0;
        }
        Jet { c: r, len: self.len }
    }

    pub fn exp(&self) -> Self {
        let mut e = [0.0; JET_CAP];
        e[0] = self.c[0].exp();
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.c[j] * e[k - j];
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e, len: self.len }
    }

    pub fn ln(&self) -> Self {
        let g0 = self.c[0];
        let mut l = [0.0; JET_CAP];
        l[0] = g0.ln();
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..k {
                acc += j as f64 * l[j] * self.c[k - j];
            }
            l[k] = (self.c[k] - acc / k as f64) / g0;
        }
        Jet { c: l, len: self.len }
    }

    /// `self^alpha` for a positive leading coefficient.
    pub fn powf(&self, alpha: f64) -> Self {
        let g0 = self.c[0];
        let mut p = [0.0; JET_CAP];
        p[0] = g0.powf(alpha);
        for k in 1..self.len {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((alpha + 1.0) * j as f64 - k as f64) * self.c[j] * p[k - j];
            }
            p[k] = acc / (k as f64 * g0);
        }
        Jet { c: p, len: self.len }
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    fn common_len(&self, other: &Jet) -> usize {
        self.len.min(other.len)
    }
}

/// Japanese bracket ⟨x⟩ = sqrt(1 + x²) as a jet.
pub fn bracket(x: &Jet) -> Jet {
    (*x * *x).offset(1.0).sqrt()
}

/// Applies the weighted derivative (⟨q⟩ d/dq) `k` times; the result has order `order - k`.
pub fn weighted_derivative(f: &Jet, q: f64, k: usize) -> Jet {
    assert!(k <= f.order(), "weighted derivative {k} needs a jet of order ≥ {k}");
    let mut g = *f;
    for _ in 0..k {
        let d = g.differentiate();
        let w = bracket(&Jet::variable(q, d.order()));
        g = w * d;
    }
    g
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let len = self.common_len(&o);
        let mut c = [0.0; JET_CAP];
        for k in 0..len {
            c[k] = self.c[k] + o.c[k];
        }
        Jet { c, len }
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        let len = self.common_len(&o);
        let mut c = [0.0; JET_CAP];
        for k in 0..len {
            c[k] = self.c[k] - o.c[k];
        }
        Jet { c, len }
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let len = self.common_len(&o);
        let mut c = [0.0; JET_CAP];
        for k in 0..len {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.c[j] * o.c[k - j];
            }
            c[k] = acc;
        }
        Jet { c, len }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(a)
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, a: f64) -> Jet {
        self.offset(a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    // [DERIVED] derivatives of exp(-x^2) from the Hermite closed forms
    #[test]
    fn gaussian_derivatives_match_hermite_forms() {
        let x0 = 0.7;
        let x = Jet::variable(x0, 4);
        let g = (-(x * x)).exp();
        let e = (-x0 * x0).exp();
        assert!(close(g.derivative(0), e, 1e-15));
        assert!(close(g.derivative(1), -2.0 * x0 * e, 1e-15));
        assert!(close(g.derivative(2), (4.0 * x0 * x0 - 2.0) * e, 1e-14));
        assert!(close(g.derivative(3), (-8.0 * x0.powi(3) + 12.0 * x0) * e, 1e-14));
        assert!(close(g.derivative(4), (16.0 * x0.powi(4) - 48.0 * x0 * x0 + 12.0) * e, 1e-13));
    }

    // [DERIVED] power rule against closed form
    #[test]
    fn powf_matches_power_rule() {
        let x0 = 2.0;
        let x = Jet::variable(x0, 3);
        let f = (x * x).offset(1.0).powf(-0.6);
        let u = 1.0 + x0 * x0;
        assert!(close(f.value(), u.powf(-0.6), 1e-15));
        assert!(close(f.derivative(1), -0.6 * u.powf(-1.6) * 2.0 * x0, 1e-14));
        let d2 = -1.2 * u.powf(-1.6) + 0.96 * u.powf(-2.6) * 4.0 * x0 * x0;
        assert!(close(f.derivative(2), d2, 1e-13));
    }

    // [DERIVED] reciprocal and log are inverse operations to their series
    #[test]
    fn recip_and_ln_consistency() {
        let x = Jet::variable(1.3, 6);
        let g = (x * x).offset(0.5);
        let one = g * g.recip();
        assert!(close(one.value(), 1.0, 1e-15));
        for k in 1..=6 {
            assert!(one.coeff(k).abs() < 1e-13);
        }
        let back = g.ln().exp();
        for k in 0..=6 {
            assert!(close(back.coeff(k), g.coeff(k), 1e-12));
        }
    }

    // [TRIVIAL] differentiation lowers order
    #[test]
    fn differentiate_polynomial() {
        let x = Jet::variable(3.0, 3);
        let p = x * x * x;
        let d = p.differentiate();
        assert_eq!(d.order(), 2);
        assert!(close(d.value(), 27.0, 1e-15));
        assert!(close(d.derivative(1), 18.0, 1e-15));
    }

    // [DERIVED] (<q> d/dq) q = <q>, (<q> d/dq)^2 q = q
    #[test]
    fn weighted_derivative_of_identity() {
        let q = 1.7;
        let x = Jet::variable(q, 3);
        let d1 = weighted_derivative(&x, q, 1);
        assert!(close(d1.value(), (1.0 + q * q).sqrt(), 1e-15));
        let d2 = weighted_derivative(&x, q, 2);
        assert!(close(d2.value(), q, 1e-14));
    }
}
