//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use bulkq_core::headway::{y_pgf, HeadwayModel};
use bulkq_core::sampling;
use rand_core::RngCore;
use bulkq_core::special::{norm_cdf, norm_pdf};
use bulkq_core::Complex64;

/// Gauss–Legendre nodes and weights on [-1, 1] (Newton on P_n).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                let (mut p0, mut p1) = (1.0, z);
                for k in 2..=n {
                    let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                let dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
                x[i] = z;
                w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
                break;
            }
        }
    }
    (x, w)
}

/// ∫_a^b f by `panels` composite Gauss–Legendre panels of `order` nodes.
pub fn integrate<T>(f: impl Fn(f64) -> T, a: f64, b: f64, panels: usize, order: usize) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
{
    let (x, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut acc = T::default();
    for p in 0..panels {
        let lo = a + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            let t = lo + 0.5 * h * (xi + 1.0);
            acc = acc + f(t) * (0.5 * h * wi);
        }
    }
    acc
}

#[derive(Default, Clone, Copy)]
pub struct C64(pub Complex64);

impl std::ops::Add for C64 {
    type Output = C64;
    fn add(self, o: C64) -> C64 {
        C64(self.0 + o.0)
    }
}

impl std::ops::Mul<f64> for C64 {
    type Output = C64;
    fn mul(self, o: f64) -> C64 {
        C64(self.0 * o)
    }
}

/// E[exp(λĤ(z-1))] by quadrature over the truncated normal.
pub fn y_pgf_quadrature(z: Complex64, lambda: f64, m: &HeadwayModel, nodes: usize) -> Complex64 {
    let hi = m.mu + 12.0 * m.sigma;
    let body = integrate(
        |h| C64((lambda * h * (z - 1.0)).exp() * (norm_pdf((h - m.mu) / m.sigma) / m.sigma)),
        0.0,
        hi,
        1,
        nodes,
    );
    body.0 + norm_cdf(-m.mu / m.sigma)
}

pub fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - libm::lgamma(k as f64 + 1.0)).exp()
}

/// P(Y = k), k < len, for Poisson arrivals over a zero-inflated truncated
/// normal headway.
pub fn y_pmf(lambda: f64, m: &HeadwayModel, len: usize) -> Vec<f64> {
    if m.sigma == 0.0 {
        return (0..len).map(|k| poisson_pmf(k, lambda * m.mu)).collect();
    }
    let hi = m.mu + 12.0 * m.sigma;
    let mut out: Vec<f64> = (0..len)
        .map(|k| {
            integrate(
                |h| poisson_pmf(k, lambda * h) * norm_pdf((h - m.mu) / m.sigma) / m.sigma,
                0.0,
                hi,
                40,
                20,
            )
        })
        .collect();
    out[0] += norm_cdf(-m.mu / m.sigma);
    out
}

/// Stationary law of Q' = max(Q - S, 0) + Y on 0..len by power iteration.
pub fn embedded_chain(s: &[f64], y: &[f64], len: usize) -> Vec<f64> {
    let mut q = vec![0.0; len];
    q[0] = 1.0;
    for _ in 0..200_000 {
        let mut r = vec![0.0; len];
        for (u, &su) in s.iter().enumerate() {
            if su == 0.0 {
                continue;
            }
            let head: f64 = q[..=u.min(len - 1)].iter().sum();
            r[0] += su * head;
            for k in u + 1..len {
                r[k - u] += su * q[k];
            }
        }
        let mut next = vec![0.0; len];
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 {
                continue;
            }
            for (j, &yj) in y.iter().enumerate().take(len - i) {
                next[i + j] += ri * yj;
            }
        }
        let total: f64 = next.iter().sum();
        next.iter_mut().for_each(|x| *x /= total);
        let diff = next.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        q = next;
        if diff < 1e-15 {
            break;
        }
    }
    q
}

pub fn mean_var(p: &[f64]) -> (f64, f64) {
    let m: f64 = p.iter().enumerate().map(|(k, x)| k as f64 * x).sum();
    let v: f64 = p.iter().enumerate().map(|(k, x)| (k as f64 - m).powi(2) * x).sum();
    (m, v)
}

/// Zeros of an entire function inside |z| = radius, by tracking the
/// argument of f along the circle.
pub fn argument_principle(f: impl Fn(Complex64) -> Complex64, radius: f64, samples: usize) -> i64 {
    let mut total = 0.0;
    let mut prev = f(Complex64::new(radius, 0.0));
    for k in 1..=samples {
        let z = Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / samples as f64);
        let cur = f(z);
        total += (cur / prev).arg();
        prev = cur;
    }
    (total / std::f64::consts::TAU).round() as i64
}

/// Sample mean, variance and standard error of the mean.
pub fn summary(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v, (v / n).sqrt())
}

/// Sample central moment of order k with a delta-method standard error.
pub fn central_moment(xs: &[f64], k: i32) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let terms: Vec<f64> = xs.iter().map(|x| (x - m).powi(k)).collect();
    let (mk, vk, _) = summary(&terms);
    (mk, (vk / n).sqrt())
}

/// Factorial moments of Y from Cauchy differences of the PGF around z = 1.
pub fn cauchy_factorial_moments(lam: f64, h: &HeadwayModel) -> [f64; 3] {
    // k-th derivative at 1 from samples on a circle around 1. The radius
    // shrinks with the spread of λĤ so the aliased high-order terms vanish.
    let r = 0.5f64.min(1.0 / (1.0 + lam * h.sigma + 0.25 * lam * h.mu));
    let m = 64usize;
    let mut d = [0.0; 3];
    for j in 0..m {
        let w = Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 / m as f64);
        let v = y_pgf(Complex64::new(1.0, 0.0) + r * w, lam, h).unwrap();
        for (k, dk) in d.iter_mut().enumerate() {
            *dk += (v * w.powi(-(k as i32 + 1))).re;
        }
    }
    let mut fact = 1.0;
    for (k, dk) in d.iter_mut().enumerate() {
        fact *= (k + 1) as f64;
        *dk *= fact / (m as f64 * r.powi(k as i32 + 1));
    }
    d
}

/// Box–Muller draw.
pub fn std_normal<R: RngCore>(rng: &mut R) -> f64 {
    (-2.0 * sampling::uniform(rng).max(1e-300).ln()).sqrt() * (std::f64::consts::TAU * sampling::uniform(rng)).cos()
}
