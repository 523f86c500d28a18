//! One-dimensional quadrature: Gauss–Legendre rules, globally adaptive
//! Gauss–Kronrod (7/15) and power-law tails handled through a logarithmic map.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_and_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_and_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Legendre polynomial P_n(z).
pub fn legendre(n: usize, z: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    legendre_and_derivative(n, z).0
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Single G7/K15 panel: (Kronrod value, |K - G|).
pub fn gk15<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let dx = h * XGK[i];
        let s = f(c - dx) + f(c + dx);
        k += WGK[i] * s;
        if i % 2 == 1 {
            g += WG[i / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_panels: 4000 }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        QuadOptions { abs_tol, rel_tol, ..Default::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, o: &Self) -> bool {
        self.error == o.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Panel {
    fn cmp(&self, o: &Self) -> Ordering {
        self.error.total_cmp(&o.error).then_with(|| o.a.total_cmp(&self.a))
    }
}

/// Globally adaptive G7/K15 over a union of finite segments.
pub fn integrate_segments<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    segments: &[(f64, f64)],
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut err = 0.0;
    for &(a, b) in segments {
        if b == a {
            continue;
        }
        let (v, e) = gk15(f, a, b);
        if !v.is_finite() {
            return Err(Error::Quadrature(format!("non-finite integrand on [{a}, {b}]")));
        }
        total += v;
        err += e;
        heap.push(Panel { a, b, value: v, error: e });
    }
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if err <= target {
            break;
        }
        if heap.len() >= opts.max_panels {
            // Recompute from the panels to drop accumulated cancellation in the running sums.
            let (v, e) = resum(&heap);
            if e <= opts.abs_tol.max(opts.rel_tol * v.abs()) {
                return Ok(QuadResult { value: v, error: e, panels: heap.len() });
            }
            return Err(Error::Quadrature(format!(
                "{} panels exhausted, estimate {v:.6e} with error {e:.3e}",
                heap.len()
            )));
        }
        let p = heap.pop().expect("nonempty");
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            let (v, e) = resum(&heap);
            return Err(Error::Quadrature(format!(
                "panel [{}, {}] cannot be split further, estimate {:.6e} error {:.3e}",
                p.a,
                p.b,
                v + p.value,
                e + p.error
            )));
        }
        let (v1, e1) = gk15(f, p.a, m);
        let (v2, e2) = gk15(f, m, p.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::Quadrature(format!("non-finite integrand on [{}, {}]", p.a, p.b)));
        }
        total += v1 + v2 - p.value;
        err += e1 + e2 - p.error;
        heap.push(Panel { a: p.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: p.b, value: v2, error: e2 });
    }
    let (value, error) = resum(&heap);
    Ok(QuadResult { value, error, panels: heap.len() })
}

fn resum(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    let mut panels: Vec<&Panel> = heap.iter().collect();
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    panels.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

pub fn integrate<F: Fn(f64) -> f64 + ?Sized>(f: &F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if b < a {
        let r = integrate_segments(f, &[(b, a)], opts)?;
        return Ok(QuadResult { value: -r.value, ..r });
    }
    integrate_segments(f, &[(a, b)], opts)
}

/// Decay class of an integrand beyond its core interval.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tail {
    /// Identically zero outside the core.
    None,
    /// Faster than any power; negligible beyond the core.
    Rapid,
    /// |g(q)| ≲ C |q|^(-alpha).
    Power(f64),
}

/// Integral of `f` over the whole line. The core [lo, hi] is integrated directly;
/// power-law tails are integrated under q = edge ± s (e^x - 1) up to a cutoff chosen
/// so the analytic bound on the neglected remainder is below `rel_tol` of the total.
pub fn integrate_line<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    lo: f64,
    hi: f64,
    breakpoints: &[f64],
    tail: Tail,
    opts: QuadOptions,
) -> Result<QuadResult> {
    let mut pts: Vec<f64> = vec![lo];
    pts.extend(breakpoints.iter().copied().filter(|&p| p > lo && p < hi));
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let segs: Vec<(f64, f64)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
    let core = integrate_segments(f, &segs, opts)?;
    let alpha = match tail {
        Tail::None | Tail::Rapid => return Ok(core),
        Tail::Power(alpha) => alpha,
    };
    if alpha <= 1.0 {
        return Err(Error::Quadrature(format!("tail exponent {alpha} ≤ 1: integral diverges")));
    }
    let mut value = core.value;
    let mut error = core.error;
    let mut panels = core.panels;
    for (edge, dir) in [(hi, 1.0), (lo, -1.0)] {
        let s = 1.0f64.max(edge.abs());
        // Envelope constant C from the integrand at the edge, |g| ≤ C |q|^-alpha.
        let c = f(edge).abs() * edge.abs().max(1.0).powf(alpha);
        let target = 0.1 * opts.rel_tol * value.abs().max(opts.abs_tol / opts.rel_tol.max(1e-300));
        // C Q^(1-alpha)/(alpha-1) < target
        let q_star =
            if c == 0.0 { 2.0 * s } else { (c / ((alpha - 1.0) * target.max(1e-300))).powf(1.0 / (alpha - 1.0)) };
        if !q_star.is_finite() || q_star > 1e150 {
            return Err(Error::Quadrature(format!("tail exponent {alpha} too close to 1 for the requested tolerance")));
        }
        let x_max = ((q_star.max(edge.abs() + s) - edge.abs()) / s + 1.0).ln().max(1.0);
        let g = |x: f64| {
            let ex = x.exp();
            f(edge + dir * s * (ex - 1.0)) * s * ex
        };
        let n = (x_max.ceil() as usize).max(1);
        let segs: Vec<(f64, f64)> =
            (0..n).map(|i| (x_max * i as f64 / n as f64, x_max * (i + 1) as f64 / n as f64)).collect();
        let t = integrate_segments(&g, &segs, QuadOptions { abs_tol: 0.1 * target.max(opts.abs_tol), ..opts })?;
        value += t.value;
        error += t.error;
        panels += t.panels;
    }
    Ok(QuadResult { value, error, panels })
}

/// GK15 on one panel for a vector-valued integrand: (values, max-norm of |K - G|).
pub fn gk15_vec<F: Fn(f64) -> Vec<f64> + ?Sized>(f: &F, a: f64, b: f64) -> (Vec<f64>, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k: Vec<f64> = fc.iter().map(|x| WGK[7] * x).collect();
    let mut g: Vec<f64> = fc.iter().map(|x| WG[3] * x).collect();
    for i in 0..7 {
        let dx = h * XGK[i];
        let (lo, hi) = (f(c - dx), f(c + dx));
        for (j, (x, y)) in lo.iter().zip(&hi).enumerate() {
            k[j] += WGK[i] * (x + y);
            if i % 2 == 1 {
                g[j] += WG[i / 2] * (x + y);
            }
        }
    }
    let err = k.iter().zip(&g).fold(0.0f64, |m, (x, y)| m.max(((x - y) * h).abs()));
    (k.into_iter().map(|x| x * h).collect(), err)
}

/// Adaptive bisection for vector-valued integrands; the error is measured in the max norm.
pub fn integrate_vec<F: Fn(f64) -> Vec<f64> + ?Sized>(
    f: &F,
    segments: &[(f64, f64)],
    opts: QuadOptions,
) -> Result<Vec<f64>> {
    struct VPanel {
        a: f64,
        b: f64,
        value: Vec<f64>,
        error: f64,
    }
    let mut panels: Vec<VPanel> = Vec::new();
    for &(a, b) in segments {
        if b > a {
            let (value, error) = gk15_vec(f, a, b);
            panels.push(VPanel { a, b, value, error });
        }
    }
    let Some(n) = panels.first().map(|p| p.value.len()) else { return Ok(Vec::new()) };
    loop {
        let mut total = vec![0.0; n];
        let mut err = 0.0;
        let mut worst = 0;
        for (i, p) in panels.iter().enumerate() {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            err += p.error;
            if p.error > panels[worst].error {
                worst = i;
            }
        }
        if total.iter().any(|x| !x.is_finite()) {
            return Err(Error::Quadrature("non-finite vector integrand".into()));
        }
        let scale = total.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if err <= opts.abs_tol.max(opts.rel_tol * scale) {
            return Ok(total);
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature(format!(
                "{} panels exhausted, error {err:.3e} against scale {scale:.3e}",
                panels.len()
            )));
        }
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        if m <= p.a || m >= p.b {
            return Err(Error::Quadrature(format!("panel [{}, {}] cannot be split further", p.a, p.b)));
        }
        let (v1, e1) = gk15_vec(f, p.a, m);
        let (v2, e2) = gk15_vec(f, m, p.b);
        panels.push(VPanel { a: p.a, b: m, value: v1, error: e1 });
        panels.push(VPanel { a: m, b: p.b, value: v2, error: e2 });
        panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // [DERIVED] Gauss–Legendre integrates polynomials of degree 2n-1 exactly
    #[test]
    fn gauss_legendre_exactness() {
        for n in [1usize, 2, 5, 16, 33, 64] {
            let (x, w) = gauss_legendre(n);
            let sw: f64 = w.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13, "n={n} sum={sw}");
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} {q} vs {exact}");
            }
        }
    }

    // [DERIVED] adaptive quadrature of a gaussian against sqrt(pi)
    #[test]
    fn adaptive_gaussian() {
        let r = integrate(&|x: f64| (-x * x).exp(), -10.0, 10.0, QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    // [DERIVED] endpoint singularity sqrt(x): integral 2/3
    #[test]
    fn adaptive_sqrt_singularity() {
        let r = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-12);
    }

    // [DERIVED] power tail: ∫ (1+q²)^(-0.9) dq = sqrt(pi) Γ(0.4)/Γ(0.9)
    #[test]
    fn power_tail_closed_form() {
        use statrs::function::gamma::gamma;
        let f = |q: f64| (1.0 + q * q).powf(-0.9);
        let r = integrate_line(&f, -5.0, 5.0, &[], Tail::Power(1.8), QuadOptions::default()).unwrap();
        let exact = std::f64::consts::PI.sqrt() * gamma(0.4) / gamma(0.9);
        assert!((r.value - exact).abs() < 1e-10 * exact, "{} vs {exact}", r.value);
    }

    // [TRIVIAL] divergent tails are rejected
    #[test]
    fn divergent_tail_rejected() {
        let f = |q: f64| (1.0 + q * q).powf(-0.4);
        assert!(integrate_line(&f, -1.0, 1.0, &[], Tail::Power(0.8), QuadOptions::default()).is_err());
    }

    // [TRIVIAL] P_2(z) = (3z²-1)/2
    #[test]
    fn legendre_p2() {
        assert!((legendre(2, 0.3) - (3.0 * 0.09 - 1.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn vector_integration_matches_scalar() {
        // [DERIVED] componentwise against the scalar routine
        let f = |x: f64| vec![x.cos(), (-x * x).exp(), 1.0 / (1.0 + 100.0 * x * x)];
        let v = integrate_vec(&f, &[(-1.0, 0.3), (0.3, 2.0)], QuadOptions::tol(1e-14, 1e-13)).unwrap();
        for (k, got) in v.iter().enumerate() {
            let g = |x: f64| f(x)[k];
            let want = integrate(&g, -1.0, 2.0, QuadOptions::default()).unwrap().value;
            assert!((got - want).abs() < 1e-12, "{k}: {got} vs {want}");
        }
    }
}
