//! Real spherical harmonics on a Gauss–Legendre × uniform-azimuth grid.
//!
//! Y_l0 = N P_l(cos θ); Y_lm = √2 N P_l^m cos(mφ) for m > 0 and
//! √2 N P_l^|m| sin(|m|φ) for m < 0, unit L²(S²) norm, no Condon–Shortley phase.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;

pub fn mode_index(l: usize, m: i64) -> usize {
    debug_assert!(m.unsigned_abs() as usize <= l);
    ((l * l + l) as i64 + m) as usize
}

pub fn mode_count(band: usize) -> usize {
    (band + 1) * (band + 1)
}

/// (l, m) of a flat mode index.
pub fn mode_lm(idx: usize) -> (usize, i64) {
    let l = (idx as f64).sqrt().floor() as usize;
    let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
    (l, idx as i64 - (l * l + l) as i64)
}

pub fn eigenvalue(l: usize) -> f64 {
    (l * (l + 1)) as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub band: usize,
    pub coeffs: Vec<f64>,
}

impl ModeVector {
    pub fn zeros(band: usize) -> Self {
        ModeVector { band, coeffs: vec![0.0; mode_count(band)] }
    }

    pub fn single(band: usize, l: usize, m: i64, c: f64) -> Self {
        let mut v = Self::zeros(band);
        v.coeffs[mode_index(l, m)] = c;
        v
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        if l > self.band {
            0.0
        } else {
            self.coeffs[mode_index(l, m)]
        }
    }

    pub fn set(&mut self, l: usize, m: i64, c: f64) {
        self.coeffs[mode_index(l, m)] = c;
    }

    /// Copy truncated or zero-padded to another band limit.
    pub fn with_band(&self, band: usize) -> Self {
        let mut v = Self::zeros(band);
        let n = mode_count(band.min(self.band));
        v.coeffs[..n].copy_from_slice(&self.coeffs[..n]);
        v
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |a, c| a.max(c.abs()))
    }

    pub fn scale(&self, a: f64) -> Self {
        ModeVector { band: self.band, coeffs: self.coeffs.iter().map(|c| a * c).collect() }
    }

    pub fn add(&self, o: &ModeVector) -> Self {
        let band = self.band.max(o.band);
        let a = self.with_band(band);
        let b = o.with_band(band);
        ModeVector { band, coeffs: a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x + y).collect() }
    }
}

pub fn laplace_beltrami(mv: &ModeVector) -> ModeVector {
    let mut out = mv.clone();
    for (idx, c) in out.coeffs.iter_mut().enumerate() {
        *c *= -eigenvalue(mode_lm(idx).0);
    }
    out
}

fn tri(l: usize, m: usize) -> usize {
    l * (l + 1) / 2 + m
}

/// Fully normalized associated Legendre values P̃_lm(x) for 0 ≤ m ≤ l ≤ band,
/// with ∫ P̃_lm² dx = 1/(2π) (the m = 0 harmonic is P̃_l0 itself).
pub fn normalized_legendre(band: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri(band, band) + 1];
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for m in 0..=band {
        if m > 0 {
            pmm *= s * ((2 * m + 1) as f64 / (2 * m) as f64).sqrt();
        }
        p[tri(m, m)] = pmm;
        if m < band {
            p[tri(m + 1, m)] = x * ((2 * m + 3) as f64).sqrt() * pmm;
        }
        for l in m + 2..=band {
            let (lf, mf) = (l as f64, m as f64);
            let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
            let b = (((lf - 1.0) * (lf - 1.0) - mf * mf) / (4.0 * (lf - 1.0) * (lf - 1.0) - 1.0)).sqrt();
            p[tri(l, m)] = a * (x * p[tri(l - 1, m)] - b * p[tri(l - 2, m)]);
        }
    }
    p
}

/// Real harmonic Y_lm at (θ, φ).
pub fn real_sh(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
    let p = normalized_legendre(l, theta.cos());
    let am = m.unsigned_abs() as usize;
    let v = p[tri(l, am)];
    match m {
        0 => v,
        m if m > 0 => std::f64::consts::SQRT_2 * v * (am as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * v * (am as f64 * phi).sin(),
    }
}

/// Σ c_lm Y_lm at one direction.
pub fn eval_direction(mv: &ModeVector, theta: f64, phi: f64) -> f64 {
    let p = normalized_legendre(mv.band, theta.cos());
    let mut acc = 0.0;
    for l in 0..=mv.band {
        for m in -(l as i64)..=(l as i64) {
            let c = mv.coeffs[mode_index(l, m)];
            if c == 0.0 {
                continue;
            }
            let am = m.unsigned_abs() as usize;
            let y = match m {
                0 => p[tri(l, 0)],
                m if m > 0 => std::f64::consts::SQRT_2 * p[tri(l, am)] * (am as f64 * phi).cos(),
                _ => std::f64::consts::SQRT_2 * p[tri(l, am)] * (am as f64 * phi).sin(),
            };
            acc += c * y;
        }
    }
    acc
}

#[derive(Clone, Debug)]
pub struct AngularGrid {
    pub n_theta: usize,
    pub n_phi: usize,
    pub band: usize,
    /// cos θ_i, ascending.
    pub x: Vec<f64>,
    pub w_theta: Vec<f64>,
    pub phi: Vec<f64>,
    leg: Vec<Vec<f64>>,
    cos_m: Vec<Vec<f64>>,
    sin_m: Vec<Vec<f64>>,
}

impl AngularGrid {
    pub fn new(n_theta: usize, n_phi: usize, band: usize) -> Result<Self> {
        if n_theta < band + 1 || n_phi < 2 * band + 1 {
            return Err(Error::range(
                "angular grid",
                format!("need n_theta ≥ L+1 and n_phi ≥ 2L+1 for L = {band}, got {n_theta} × {n_phi}"),
            ));
        }
        let (x, w_theta) = gauss_legendre(n_theta);
        let phi: Vec<f64> = (0..n_phi).map(|j| 2.0 * PI * j as f64 / n_phi as f64).collect();
        let leg = x.iter().map(|&xi| normalized_legendre(band, xi)).collect();
        let cos_m = (0..=band).map(|m| phi.iter().map(|p| (m as f64 * p).cos()).collect()).collect();
        let sin_m = (0..=band).map(|m| phi.iter().map(|p| (m as f64 * p).sin()).collect()).collect();
        Ok(AngularGrid { n_theta, n_phi, band, x, w_theta, phi, leg, cos_m, sin_m })
    }

    /// Smallest exact grid for a band limit.
    pub fn for_band(band: usize) -> Self {
        Self::new(band + 1, 2 * band + 1, band).expect("minimal grid is valid")
    }

    pub fn len(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn theta(&self, i: usize) -> f64 {
        self.x[i].acos()
    }

    /// Quadrature weight of node (i, j); the weights sum to 4π.
    pub fn weight(&self, i: usize) -> f64 {
        self.w_theta[i] * 2.0 * PI / self.n_phi as f64
    }

    pub fn synthesize(&self, mv: &ModeVector) -> Result<Vec<f64>> {
        if mv.band > self.band {
            return Err(Error::BandLimit { got: mv.band, limit: self.band });
        }
        let mut out = vec![0.0; self.len()];
        let lmax = mv.band;
        let active: Vec<i64> = (-(lmax as i64)..=(lmax as i64))
            .filter(|&m| (m.unsigned_abs() as usize..=lmax).any(|l| mv.coeffs[mode_index(l, m)] != 0.0))
            .collect();
        let sq2 = std::f64::consts::SQRT_2;
        for i in 0..self.n_theta {
            let p = &self.leg[i];
            let row = &mut out[i * self.n_phi..(i + 1) * self.n_phi];
            for &m in &active {
                let am = m.unsigned_abs() as usize;
                let mut s = 0.0;
                for l in am..=lmax {
                    s += mv.coeffs[mode_index(l, m)] * p[tri(l, am)];
                }
                if m == 0 {
                    row.iter_mut().for_each(|v| *v += s);
                } else {
                    let trig = if m > 0 { &self.cos_m[am] } else { &self.sin_m[am] };
                    for (v, t) in row.iter_mut().zip(trig) {
                        *v += sq2 * s * t;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Projection onto the harmonics of band ≤ `band` (at most the grid band).
    pub fn analyze_band(&self, values: &[f64], band: usize) -> ModeVector {
        assert_eq!(values.len(), self.len());
        let band = band.min(self.band);
        let mut mv = ModeVector::zeros(band);
        let sq2 = std::f64::consts::SQRT_2;
        let dphi = 2.0 * PI / self.n_phi as f64;
        for i in 0..self.n_theta {
            let row = &values[i * self.n_phi..(i + 1) * self.n_phi];
            let p = &self.leg[i];
            let wt = self.w_theta[i] * dphi;
            for am in 0..=band {
                let (gc, gs) = if am == 0 {
                    (row.iter().sum::<f64>(), 0.0)
                } else {
                    let c: f64 = row.iter().zip(&self.cos_m[am]).map(|(v, t)| v * t).sum();
                    let s: f64 = row.iter().zip(&self.sin_m[am]).map(|(v, t)| v * t).sum();
                    (sq2 * c, sq2 * s)
                };
                if gc == 0.0 && gs == 0.0 {
                    continue;
                }
                for l in am..=band {
                    let pw = wt * p[tri(l, am)];
                    mv.coeffs[mode_index(l, am as i64)] += pw * gc;
                    if am > 0 {
                        mv.coeffs[mode_index(l, -(am as i64))] += pw * gs;
                    }
                }
            }
        }
        mv
    }

    pub fn analyze(&self, values: &[f64]) -> ModeVector {
        self.analyze_band(values, self.band)
    }

    /// ∫ f² dσ by the grid quadrature.
    pub fn integrate_sq(&self, values: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n_theta {
            let row = &values[i * self.n_phi..(i + 1) * self.n_phi];
            acc += self.weight(i) * row.iter().map(|v| v * v).sum::<f64>();
        }
        acc
    }
}

/// Dealiased grid for quadratic expressions in band-`band` fields.
#[derive(Clone, Debug)]
pub struct ProductPlan {
    pub band: usize,
    pub grid: AngularGrid,
}

impl ProductPlan {
    pub fn new(band: usize) -> Self {
        let lp = (3 * band).div_ceil(2);
        ProductPlan { band, grid: AngularGrid::for_band(lp) }
    }

    pub fn synthesize(&self, mv: &ModeVector) -> Vec<f64> {
        self.grid.synthesize(&mv.with_band(self.band.max(mv.band).min(self.grid.band))).expect("band checked")
    }

    pub fn analyze(&self, values: &[f64]) -> ModeVector {
        self.grid.analyze_band(values, self.band)
    }

    pub fn product(&self, a: &ModeVector, b: &ModeVector) -> ModeVector {
        let fa = self.synthesize(a);
        let fb = self.synthesize(b);
        let prod: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x * y).collect();
        self.analyze(&prod)
    }
}

pub fn pointwise_product(a: &ModeVector, b: &ModeVector) -> ModeVector {
    ProductPlan::new(a.band.max(b.band)).product(a, b)
}

/// Squares of fields restricted to a fixed input mode set, from Gaunt integrals
/// ∫ Y_a Y_b Y_c computed once on an exact grid.
#[derive(Clone, Debug)]
pub struct GauntTable {
    pub inputs: Vec<usize>,
    pub out_band: usize,
    /// (input position a, input position b ≥ a, output mode c, weight)
    entries: Vec<(usize, usize, usize, f64)>,
}

impl GauntTable {
    pub fn new(inputs: &[usize], out_band: usize) -> Self {
        assert!(inputs.iter().all(|&i| 2 * mode_lm(i).0 <= out_band), "input modes exceed half the output band");
        let grid = AngularGrid::for_band(out_band);
        let basis: Vec<Vec<f64>> = inputs
            .iter()
            .map(|&i| {
                let (l, m) = mode_lm(i);
                grid.synthesize(&ModeVector::single(out_band, l, m, 1.0)).expect("band checked")
            })
            .collect();
        let mut entries = Vec::new();
        for a in 0..inputs.len() {
            for b in a..inputs.len() {
                let prod: Vec<f64> = basis[a].iter().zip(&basis[b]).map(|(x, y)| x * y).collect();
                let mv = grid.analyze_band(&prod, out_band);
                let w = if a == b { 1.0 } else { 2.0 };
                for (c, &g) in mv.coeffs.iter().enumerate() {
                    if g.abs() > 1e-13 {
                        entries.push((a, b, c, w * g));
                    }
                }
            }
        }
        GauntTable { inputs: inputs.to_vec(), out_band, entries }
    }

    /// Output modes that can be nonzero.
    pub fn outputs(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.entries.iter().map(|e| e.2).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// out[c] += scale · coefficient of (Σ x_a Y_a)², with x listed in input order.
    pub fn square_into(&self, x: &[f64], scale: f64, out: &mut [f64]) {
        for &(a, b, c, g) in &self.entries {
            out[c] += scale * g * x[a] * x[b];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_mv(band: usize, seed: u64) -> ModeVector {
        let mut s = seed;
        let mut mv = ModeVector::zeros(band);
        for c in mv.coeffs.iter_mut() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *c = ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5;
        }
        mv
    }

    // [TRIVIAL] index maps are inverse
    #[test]
    fn index_round_trip() {
        for l in 0..10 {
            for m in -(l as i64)..=(l as i64) {
                assert_eq!(mode_lm(mode_index(l, m)), (l, m));
            }
        }
    }

    // [TRIVIAL] weights sum to 4π
    #[test]
    fn weights_sum() {
        let g = AngularGrid::new(7, 13, 6).unwrap();
        let s: f64 = (0..g.n_theta).map(|i| g.weight(i) * g.n_phi as f64).sum();
        assert!((s - 4.0 * PI).abs() < 1e-13);
        assert!(AngularGrid::new(6, 13, 6).is_err());
        assert!(AngularGrid::new(7, 12, 6).is_err());
    }

    // [TRIVIAL] ℓ=0 coefficient c → constant c/√(4π)
    #[test]
    fn constant_synthesis() {
        let g = AngularGrid::for_band(3);
        let v = g.synthesize(&ModeVector::single(3, 0, 0, 2.5)).unwrap();
        let want = 2.5 / (4.0 * PI).sqrt();
        assert!(v.iter().all(|x| (x - want).abs() < 1e-15));
    }

    // [DERIVED] Y10 = sqrt(3/4π) cos θ
    #[test]
    fn y10_closed_form() {
        let g = AngularGrid::for_band(2);
        let v = g.synthesize(&ModeVector::single(2, 1, 0, 1.0)).unwrap();
        for i in 0..g.n_theta {
            for j in 0..g.n_phi {
                let want = (3.0 / (4.0 * PI)).sqrt() * g.x[i];
                assert!((v[i * g.n_phi + j] - want).abs() < 1e-15);
            }
        }
    }

    // [TRIVIAL] round trip, zero field, and Parseval
    #[test]
    fn round_trip_and_parseval() {
        for band in [0usize, 1, 4, 9] {
            let g = AngularGrid::for_band(band);
            let mv = sample_mv(band, band as u64 + 3);
            let vals = g.synthesize(&mv).unwrap();
            let back = g.analyze(&vals);
            for (a, b) in mv.coeffs.iter().zip(&back.coeffs) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((g.integrate_sq(&vals) - mv.norm_sq()).abs() < 1e-12 * (1.0 + mv.norm_sq()));
        }
        let g = AngularGrid::for_band(4);
        assert!(g.analyze(&vec![0.0; g.len()]).coeffs.iter().all(|&c| c == 0.0));
    }

    // [TRIVIAL] constant 1 → √(4π) in ℓ=0 only
    #[test]
    fn constant_analysis() {
        let g = AngularGrid::for_band(5);
        let mv = g.analyze(&vec![1.0; g.len()]);
        assert!((mv.get(0, 0) - (4.0 * PI).sqrt()).abs() < 1e-13);
        assert!(mv.coeffs[1..].iter().all(|c| c.abs() < 1e-13));
    }

    // [DERIVED] cos²θ = 1/3 + (2/3) P2: coefficients √(4π)/3 and (2/3)√(4π/5)
    #[test]
    fn cos_squared_legendre() {
        let g = AngularGrid::for_band(4);
        let vals: Vec<f64> = (0..g.len()).map(|k| g.x[k / g.n_phi].powi(2)).collect();
        let mv = g.analyze(&vals);
        assert!((mv.get(0, 0) - (4.0 * PI).sqrt() / 3.0).abs() < 1e-14);
        assert!((mv.get(2, 0) - 2.0 / 3.0 * (4.0 * PI / 5.0).sqrt()).abs() < 1e-14);
        for (idx, c) in mv.coeffs.iter().enumerate() {
            if idx != 0 && idx != mode_index(2, 0) {
                assert!(c.abs() < 1e-14);
            }
        }
    }

    // [TRIVIAL] Laplace–Beltrami eigenvalues
    #[test]
    fn laplacian() {
        let mv = ModeVector::single(3, 2, 1, 1.0);
        assert_eq!(laplace_beltrami(&mv).get(2, 1), -6.0);
        assert_eq!(laplace_beltrami(&ModeVector::single(3, 0, 0, 1.0)).get(0, 0), 0.0);
        let g = AngularGrid::for_band(3);
        let a = sample_mv(3, 11);
        let lhs = laplace_beltrami(&g.analyze(&g.synthesize(&a).unwrap()));
        let rhs = g.analyze(&g.synthesize(&laplace_beltrami(&a)).unwrap());
        for (x, y) in lhs.coeffs.iter().zip(&rhs.coeffs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    // [DERIVED] Y00² = 1/(4π); zero and commutativity
    #[test]
    fn products_basic() {
        let a = ModeVector::single(2, 0, 0, 3.0);
        let b = ModeVector::single(2, 0, 0, -2.0);
        let p = pointwise_product(&a, &b);
        assert!((p.get(0, 0) + 6.0 / (4.0 * PI).sqrt()).abs() < 1e-14);
        let x = sample_mv(4, 5);
        let y = sample_mv(4, 6);
        assert!(pointwise_product(&x, &ModeVector::zeros(4)).coeffs.iter().all(|&c| c == 0.0));
        let xy = pointwise_product(&x, &y);
        let yx = pointwise_product(&y, &x);
        for (u, v) in xy.coeffs.iter().zip(&yx.coeffs) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    // Independent associated Legendre via explicit Rodrigues-type sum.
    fn plm_direct(l: usize, m: usize, x: f64) -> f64 {
        let fact = |n: usize| (1..=n).fold(1.0f64, |a, k| a * k as f64);
        let mut sum = 0.0;
        for k in 0..=(l - m) / 2 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let num = fact(2 * l - 2 * k);
            let den = fact(k) * fact(l - k) * fact(l - m - 2 * k);
            sum += sign * num / den * x.powi((l - m - 2 * k) as i32);
        }
        sum / 2f64.powi(l as i32) * (1.0 - x * x).powf(m as f64 / 2.0)
    }

    fn y_direct(l: usize, m: i64, th: f64, ph: f64) -> f64 {
        let fact = |n: usize| (1..=n).fold(1.0f64, |a, k| a * k as f64);
        let am = m.unsigned_abs() as usize;
        let n = ((2 * l + 1) as f64 / (4.0 * PI) * fact(l - am) / fact(l + am)).sqrt();
        let p = plm_direct(l, am, th.cos());
        match m {
            0 => n * p,
            m if m > 0 => std::f64::consts::SQRT_2 * n * p * (am as f64 * ph).cos(),
            _ => std::f64::consts::SQRT_2 * n * p * (am as f64 * ph).sin(),
        }
    }

    // [DERIVED] truncated products match Gaunt coefficients from a dense independent quadrature
    #[test]
    fn gaunt_oracle() {
        let band = 4;
        let (xs, ws) = gauss_legendre(24);
        let nph = 48;
        let gaunt = |a: (usize, i64), b: (usize, i64), c: (usize, i64)| {
            let mut acc = 0.0;
            for (x, w) in xs.iter().zip(&ws) {
                let th = x.acos();
                for j in 0..nph {
                    let ph = 2.0 * PI * j as f64 / nph as f64;
                    acc += w * 2.0 * PI / nph as f64
                        * y_direct(a.0, a.1, th, ph)
                        * y_direct(b.0, b.1, th, ph)
                        * y_direct(c.0, c.1, th, ph);
                }
            }
            acc
        };
        for (a, b) in [((1, 0), (1, 0)), ((1, 1), (2, -1)), ((2, 2), (2, -2)), ((1, -1), (3, 2)), ((2, 0), (2, 1))] {
            let p =
                pointwise_product(&ModeVector::single(band, a.0, a.1, 1.0), &ModeVector::single(band, b.0, b.1, 1.0));
            for l in 0..=band {
                for m in -(l as i64)..=(l as i64) {
                    let want = gaunt(a, b, (l, m));
                    assert!((p.get(l, m) - want).abs() < 1e-13, "{a:?}{b:?}->({l},{m}): {} vs {want}", p.get(l, m));
                }
            }
        }
        // also the fast harmonic evaluation
        for &(l, m) in &[(3usize, -2i64), (4, 3), (2, 0)] {
            assert!((real_sh(l, m, 0.7, 1.9) - y_direct(l, m, 0.7, 1.9)).abs() < 1e-14);
        }
    }

    // [DERIVED] sparse squares agree with the square of the synthesized field at random directions
    #[test]
    fn gaunt_table_square() {
        let inputs = [mode_index(0, 0), mode_index(1, -1), mode_index(2, 0), mode_index(2, 2)];
        let table = GauntTable::new(&inputs, 4);
        let x = [0.3, -1.1, 0.7, 0.25];
        let mut out = vec![0.0; mode_count(4)];
        table.square_into(&x, 1.0, &mut out);
        let sq = ModeVector { band: 4, coeffs: out };
        let mut f = ModeVector::zeros(2);
        for (&i, &c) in inputs.iter().zip(&x) {
            f.coeffs[i] = c;
        }
        for &(th, ph) in &[(0.3, 0.1), (1.2, 2.5), (2.9, 4.4)] {
            let v = eval_direction(&f, th, ph);
            assert!((eval_direction(&sq, th, ph) - v * v).abs() < 1e-13);
        }
        assert!(table.outputs().iter().all(|&c| mode_lm(c).0 <= 4));
    }
}
