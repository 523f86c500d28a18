use std::f64::consts::PI;

use super::KernelConvention;
use crate::cutoff::Cutoff;
use crate::profile::jb;
use crate::quadrature::gauss_legendre;

/// Dense tensor-product quadrature of the solution formula in (q, cos θ, φ),
/// with the polar axis fixed in space rather than along ω.
#[derive(Clone, Copy, Debug)]
pub struct BruteForce {
    pub q_panels: usize,
    pub theta_panels: usize,
    pub n_az: usize,
    pub nodes: usize,
}

impl Default for BruteForce {
    fn default() -> Self {
        BruteForce { q_panels: 12, theta_panels: 32, n_az: 32, nodes: 8 }
    }
}

impl BruteForce {
    pub fn refined(&self) -> Self {
        BruteForce {
            q_panels: 2 * self.q_panels,
            theta_panels: 2 * self.theta_panels,
            n_az: 2 * self.n_az,
            nodes: self.nodes,
        }
    }
}

fn composite(lo: f64, hi: f64, panels: usize, nodes: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(nodes);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * nodes);
    for p in 0..panels {
        let c = lo + (p as f64 + 0.5) * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((c + 0.5 * h * xi, 0.5 * h * wi));
        }
    }
    out
}

/// Evaluates Φᵏ at (t, r ω) for n(q, σ) supported in q ∈ `support`.
/// Returns the refined value and its difference from the coarse one.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_phi(
    n: &(dyn Fn(f64, [f64; 3]) -> f64 + Sync),
    support: (f64, f64),
    k: u32,
    t: f64,
    r: f64,
    omega: [f64; 3],
    conv: &dyn KernelConvention,
    grid: BruteForce,
) -> (f64, f64) {
    let coarse = brute_force_once(n, support, k, t, r, omega, conv, grid);
    let fine = brute_force_once(n, support, k, t, r, omega, conv, grid.refined());
    (fine, (fine - coarse).abs())
}

#[allow(clippy::too_many_arguments)]
fn brute_force_once(
    n: &(dyn Fn(f64, [f64; 3]) -> f64 + Sync),
    support: (f64, f64),
    k: u32,
    t: f64,
    r: f64,
    omega: [f64; 3],
    conv: &dyn KernelConvention,
    grid: BruteForce,
) -> f64 {
    use rayon::prelude::*;
    let lo = support.0.max(r - t);
    if support.1 <= lo {
        return 0.0;
    }
    let chi = Cutoff::chi();
    let p = conv.chi_power();
    let qs = composite(lo, support.1, grid.q_panels, grid.nodes);
    let zs = composite(-1.0, 1.0, grid.theta_panels, grid.nodes);
    let dphi = 2.0 * PI / grid.n_az as f64;
    let partial: Vec<f64> = qs
        .par_iter()
        .map(|&(q, wq)| {
            let mut acc = 0.0;
            for &(z, wz) in &zs {
                let s = (1.0 - z * z).max(0.0).sqrt();
                for j in 0..grid.n_az {
                    let ph = j as f64 * dphi;
                    let sigma = [s * ph.cos(), s * ph.sin(), z];
                    let mu = omega[0] * sigma[0] + omega[1] * sigma[1] + omega[2] * sigma[2];
                    let d = t - r + q + r * (1.0 - mu);
                    let rho = 0.5 * (t + r + q) * (t - r + q) / d;
                    let kern = match k {
                        2 => 1.0 / d,
                        3 => 1.0 / ((t + r + q) * (t - r + q)),
                        _ => d / ((t + r + q) * (t - r + q)).powi(2),
                    };
                    acc += wz * dphi * n(q, sigma) * kern * chi.value(jb(q) / rho).powi(p);
                }
            }
            wq * acc
        })
        .collect();
    conv.prefactor(k) * partial.iter().sum::<f64>() / (4.0 * PI)
}
