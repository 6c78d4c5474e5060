//! Station-by-station analysis: load recursions, queue front, queue and
//! waiting-time moments.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::headway::{self, y_moments, ArrivalMoments, HeadwayModel, Moments3};
use crate::model::{ensure_valid, Scenario};
use crate::poly::eval_ascending;
use crate::roots::{find_all_roots, Characteristic, RootConfig, RootSet};

/// Entries this negative are rounding noise and get clamped to zero.
pub const CLAMP_TOL: f64 = 1e-12;
/// Allowed deviation of a distribution's total mass from one.
pub const MASS_TOL: f64 = 1e-9;
/// s_C at or below this shrinks the effective capacity.
pub const TRIM_EPS: f64 = 1e-12;

fn clamp_probs(mut p: Vec<f64>) -> Result<Vec<f64>> {
    for (index, x) in p.iter_mut().enumerate() {
        if !x.is_finite() || *x < -CLAMP_TOL {
            return Err(Error::NegativeProbability { index, value: *x });
        }
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    Ok(p)
}

/// Probability vector over 0..=C.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiscreteDist {
    probs: Vec<f64>,
}

impl DiscreteDist {
    /// Clamps tiny negatives, then renormalizes. Fails if the mass is off by
    /// more than [`MASS_TOL`].
    pub fn new(probs: Vec<f64>) -> Result<DiscreteDist> {
        if probs.is_empty() {
            return Err(Error::Domain("distribution needs at least one entry"));
        }
        let mut probs = clamp_probs(probs)?;
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain("distribution does not sum to one"));
        }
        probs.iter_mut().for_each(|x| *x /= total);
        Ok(DiscreteDist { probs })
    }

    pub fn point_mass(k: usize, capacity: usize) -> DiscreteDist {
        let mut probs = vec![0.0; capacity + 1];
        probs[k] = 1.0;
        DiscreteDist { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn capacity(&self) -> usize {
        self.probs.len() - 1
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn moments(&self) -> Moments3 {
        dist_moments(self)
    }

    pub fn reversed(&self) -> DiscreteDist {
        let mut probs = self.probs.clone();
        probs.reverse();
        DiscreteDist { probs }
    }
}

pub fn dist_moments(d: &DiscreteDist) -> Moments3 {
    let mean = d.mean();
    let (mut var, mut c3) = (0.0, 0.0);
    for (k, &p) in d.probs.iter().enumerate() {
        let x = k as f64 - mean;
        var += p * x * x;
        c3 += p * x * x * x;
    }
    Moments3 { mean, var, central3: c3 }
}

/// Dense square matrix, row major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> SquareMatrix {
        SquareMatrix { n, data: vec![0.0; n * n] }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Row vector times matrix.
    pub fn left_mul(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(i)) {
                *o += vi * a;
            }
        }
        out
    }
}

/// a_ij = P(j of i passengers stay) = Binomial(i, α) at i - j.
pub fn alighting_matrix(alpha: f64, capacity: usize) -> SquareMatrix {
    let n = capacity + 1;
    let mut a = SquareMatrix::zeros(n);
    for i in 0..n {
        // Binomial pmf by recurrence over the number who stay.
        let mut pmf = vec![0.0; i + 1];
        if alpha <= 0.0 {
            pmf[i] = 1.0;
        } else if alpha >= 1.0 {
            pmf[0] = 1.0;
        } else {
            // j stay with probability C(i, j) (1-α)^j α^(i-j).
            let stay = 1.0 - alpha;
            let mut c = 1.0f64;
            for (j, slot) in pmf.iter_mut().enumerate() {
                *slot = c * libm::pow(stay, j as f64) * libm::pow(alpha, (i - j) as f64);
                c = c * (i - j) as f64 / (j + 1) as f64;
            }
        }
        for (j, p) in pmf.into_iter().enumerate() {
            a.set(i, j, p);
        }
    }
    a
}

/// g = v·A (on-board after alighting) and s_k = g_{C-k} (free space).
pub fn step_alighting(v_prev: &DiscreteDist, alpha: f64) -> Result<(DiscreteDist, DiscreteDist)> {
    let a = alighting_matrix(alpha, v_prev.capacity());
    let g = DiscreteDist::new(a.left_mul(v_prev.probs()))?;
    let s = g.reversed();
    Ok((g, s))
}

/// Steady-state P(Q = k) at vehicle arrival for k < C.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueueFront {
    q: Vec<f64>,
}

impl QueueFront {
    pub fn new(q: Vec<f64>) -> Result<QueueFront> {
        let q = clamp_probs(q)?;
        let total: f64 = q.iter().sum();
        if total > 1.0 + MASS_TOL {
            return Err(Error::Domain("queue front mass exceeds one"));
        }
        Ok(QueueFront { q })
    }

    /// Queue always empty when a vehicle arrives.
    pub fn empty_queue(capacity: usize) -> QueueFront {
        let mut q = vec![0.0; capacity];
        if capacity > 0 {
            q[0] = 1.0;
        }
        QueueFront { q }
    }

    /// Unstable station: the queue never drops below capacity.
    pub fn zeros(capacity: usize) -> QueueFront {
        QueueFront { q: vec![0.0; capacity] }
    }

    pub fn probs(&self) -> &[f64] {
        &self.q
    }

    pub fn mass(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// b_ij = q_{j-i} for i ≤ j < C, b_iC = P(Q ≥ C - i), b_CC = 1.
pub fn boarding_matrix(front: &QueueFront, capacity: usize) -> SquareMatrix {
    let n = capacity + 1;
    let q = front.probs();
    let mut b = SquareMatrix::zeros(n);
    for i in 0..capacity {
        let mut below = 0.0;
        for j in i..capacity {
            let p = q.get(j - i).copied().unwrap_or(0.0);
            b.set(i, j, p);
            below += p;
        }
        b.set(i, capacity, (1.0 - below).max(0.0));
    }
    b.set(capacity, capacity, 1.0);
    b
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Utilization {
    pub rho: f64,
    pub stable: bool,
}

/// ρ = Ȳ / S̄; stable iff ρ < 1. A vehicle that always arrives full has ρ = ∞.
pub fn utilization(s: &DiscreteDist, y: &ArrivalMoments) -> Utilization {
    let sbar = s.mean();
    if y.mean == 0.0 {
        return Utilization { rho: 0.0, stable: true };
    }
    if sbar <= 0.0 {
        return Utilization { rho: f64::INFINITY, stable: false };
    }
    let rho = y.mean / sbar;
    Utilization { rho, stable: rho < 1.0 }
}

/// Largest k with s_k > eps; the mass above it is folded into s_k.
pub fn trim_capacity(s: &DiscreteDist, eps: f64) -> Result<DiscreteDist> {
    let p = s.probs();
    let top = p.iter().rposition(|&x| x > eps).ok_or(Error::EmptyCapacity)?;
    if top == 0 {
        return Err(Error::EmptyCapacity);
    }
    let mut probs = p[..=top].to_vec();
    probs[top] += p[top + 1..].iter().sum::<f64>();
    Ok(DiscreteDist { probs })
}

/// Y(z), J(z) and Den(z) for one station, on a (trimmed) space distribution.
#[derive(Debug, Clone)]
pub struct StationKernel {
    s: Vec<f64>,
    g: Vec<f64>,
    lambda: f64,
    model: HeadwayModel,
}

impl StationKernel {
    pub fn new(s: &DiscreteDist, lambda: f64, model: HeadwayModel) -> StationKernel {
        let s = s.probs().to_vec();
        let mut g = s.clone();
        g.reverse();
        StationKernel { s, g, lambda, model }
    }

    pub fn y(&self, z: Complex64) -> Complex64 {
        headway::y_pgf_unchecked(z, self.lambda, &self.model)
    }

    /// Σ s_u z^{C-u}.
    pub fn p(&self, z: Complex64) -> Complex64 {
        eval_ascending(&self.g, z)
    }

    pub fn s_dist(&self) -> &[f64] {
        &self.s
    }
}

impl Characteristic for StationKernel {
    fn capacity(&self) -> usize {
        self.s.len() - 1
    }

    fn j(&self, z: Complex64) -> Option<Complex64> {
        if z.norm() == 0.0 {
            return None;
        }
        Some(self.y(z) * eval_ascending(&self.s, z.inv()))
    }

    fn den(&self, z: Complex64) -> Option<Complex64> {
        let y = self.y(z);
        if y.norm() == 0.0 || !y.re.is_finite() || !y.im.is_finite() {
            return None;
        }
        Some(z.powu(self.capacity() as u32) / y - self.p(z))
    }
}

/// Den(z) = z^C / Y(z) - Σ s_u z^{C-u} for an arbitrary PGF.
pub fn den_eval(z: Complex64, s: &DiscreteDist, y_pgf: impl Fn(Complex64) -> Complex64) -> Result<Complex64> {
    let y = y_pgf(z);
    if y.norm() == 0.0 || !(y.re.is_finite() && y.im.is_finite()) {
        return Err(Error::Domain("Y(z) vanishes at the evaluation point"));
    }
    let mut g = s.probs().to_vec();
    g.reverse();
    Ok(z.powu(s.capacity() as u32) / y - eval_ascending(&g, z))
}

fn real_part_checked(v: Complex64) -> f64 {
    // Conjugate pairs cancel; what is left is rounding.
    debug_assert!(v.im.abs() <= 1e-6 * v.re.abs().max(1.0), "imaginary residue {v}");
    v.re
}

/// Coefficients of Π (1 - z/z_i) in ascending powers.
pub fn eta_coefficients(roots: &[Complex64]) -> Vec<Complex64> {
    let mut eta = vec![Complex64::new(1.0, 0.0)];
    for &zi in roots {
        let inv = -zi.inv();
        let mut next = vec![Complex64::new(0.0, 0.0); eta.len() + 1];
        for (k, &e) in eta.iter().enumerate() {
            next[k] += e;
            next[k + 1] += e * inv;
        }
        eta = next;
    }
    eta
}

/// Queue front by coefficient matching: q_0 from the root product, then the
/// triangular Toeplitz system in s. `s` must already be trimmed so that
/// s_C > [`TRIM_EPS`]. Returns C entries for the trimmed C.
pub fn queue_front(s: &DiscreteDist, roots: &RootSet, y: &ArrivalMoments) -> Result<QueueFront> {
    let c = s.capacity();
    let p = s.probs();
    if p[c] <= TRIM_EPS {
        return Err(Error::EmptyCapacity);
    }
    let d = s.mean() - y.mean;
    if !(d > 0.0) {
        return Err(Error::Unstable { station: 0, rho: y.mean / s.mean() });
    }
    if roots.len() != c {
        return Err(Error::RootSearch { found: roots.len(), expected: c });
    }
    let mut prod = Complex64::new(1.0, 0.0);
    for zi in roots.nontrivial() {
        prod *= zi / (zi - 1.0);
    }
    let q0 = d / p[c] * real_part_checked(prod);
    let eta = eta_coefficients(roots.roots());
    let mut q = vec![0.0; c];
    for j in 0..c {
        let mut acc = p[c] * q0 * real_part_checked(eta[j]);
        for i in 0..j {
            acc -= q[i] * p[c - j + i];
        }
        q[j] = acc / p[c];
    }
    QueueFront::new(q)
}

/// Σ_u s_u Σ_{i<u} q_i (u - i); equals S̄ - Ȳ for a correct queue front.
pub fn normalization_sum(s: &DiscreteDist, q: &QueueFront) -> f64 {
    let qv = q.probs();
    s.probs()
        .iter()
        .enumerate()
        .map(|(u, &su)| {
            su * (0..u.min(qv.len())).map(|i| qv[i] * (u - i) as f64).sum::<f64>()
        })
        .sum()
}

/// Queue PGF Q(z) = (S̄-Ȳ)(z-1) Π_{i≥1} (z-z_i)/(1-z_i) / Den(z).
pub fn queue_pgf(kernel: &StationKernel, roots: &RootSet, y_mean: f64, z: Complex64) -> Option<Complex64> {
    let sbar: f64 = kernel.s.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    if (z - 1.0).norm() < 1e-300 {
        return Some(Complex64::new(1.0, 0.0));
    }
    let mut num = (sbar - y_mean) * (z - 1.0);
    for zi in roots.nontrivial() {
        num *= (z - zi) / (1.0 - zi);
    }
    Some(num / kernel.den(z)?)
}

/// Queue front by inverting Q(z) on the unit circle with an `m`-point DFT.
/// Gives `len` probabilities; `len` may exceed the trimmed capacity.
pub fn queue_front_spectral(
    kernel: &StationKernel,
    roots: &RootSet,
    y_mean: f64,
    len: usize,
    m: usize,
) -> Result<QueueFront> {
    let mut values = Vec::with_capacity(m);
    values.push(Complex64::new(1.0, 0.0));
    for k in 1..m {
        let z = Complex64::from_polar(1.0, TAU * k as f64 / m as f64);
        let v = queue_pgf(kernel, roots, y_mean, z)
            .filter(|v| v.re.is_finite() && v.im.is_finite())
            .ok_or(Error::Domain("queue PGF could not be evaluated on the unit circle"))?;
        values.push(v);
    }
    let twiddle: Vec<Complex64> = (0..m)
        .map(|k| Complex64::from_polar(1.0, -TAU * k as f64 / m as f64))
        .collect();
    let mut q = Vec::with_capacity(len);
    for j in 0..len {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = 0usize;
        for v in &values {
            acc += v * twiddle[idx];
            idx = (idx + j) % m;
        }
        q.push(acc.re / m as f64);
    }
    QueueFront::new(q)
}

/// DFT size for [`queue_front_spectral`]: enough points that the aliased
/// tail P(Q ≥ m) is negligible.
pub fn spectral_points(capacity: usize, eq: f64, varq: f64) -> usize {
    let spread = eq + 8.0 * libm::sqrt(varq.max(0.0));
    let want = (16 * capacity).max(1024) as f64;
    let want = want.max(64.0 * spread).min((1usize << 20) as f64);
    (want as usize).next_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueueMoments {
    pub mean: f64,
    pub var: f64,
}

/// E[Q] and Var[Q] from central moments of S and Y plus the root sums.
/// `capacity` is the (trimmed) C the roots belong to.
pub fn queue_moments(
    s_mom: &Moments3,
    y: &ArrivalMoments,
    roots: &RootSet,
    capacity: usize,
) -> Result<QueueMoments> {
    let d = s_mom.mean - y.mean;
    if !(d > 0.0) {
        return Err(Error::Unstable { station: 0, rho: y.mean / s_mom.mean });
    }
    let c = capacity as f64;
    let (s2, s3, y2, y3) = (s_mom.var, s_mom.central3, y.central2, y.central3);
    let (sum1, sum2) = root_sums(roots);
    let mean = (s2 + y2 + d * (1.0 + 2.0 * (s_mom.mean - c)) - d * d) / (2.0 * d) + sum1;
    let var = (-4.0 * (s3 - y3) * d + 3.0 * (s2 + y2) * (s2 + y2)
        - (6.0 * (s2 - y2) - 1.0) * d * d
        - d * d * d * d)
        / (12.0 * d * d)
        - sum2;
    Ok(QueueMoments { mean, var })
}

/// Σ 1/(1-z_i) and Σ z_i/(1-z_i)² over the non-unit roots, real parts.
fn root_sums(roots: &RootSet) -> (f64, f64) {
    let mut a = Complex64::new(0.0, 0.0);
    let mut b = Complex64::new(0.0, 0.0);
    for z in roots.nontrivial() {
        let w = (1.0 - z).inv();
        a += w;
        b += z * w * w;
    }
    (real_part_checked(a), real_part_checked(b))
}

/// Same quantities via raw factorial moments of the Taylor expansion of
/// Den at z = 1. Independent of the central-moment bookkeeping.
pub fn queue_moments_raw(s: &DiscreteDist, y: &ArrivalMoments, roots: &RootSet) -> Result<QueueMoments> {
    let c = s.capacity() as f64;
    let [y1, y2, y3] = y.factorial();
    let d1 = s.mean() - y1;
    if !(d1 > 0.0) {
        return Err(Error::Unstable { station: 0, rho: y1 / s.mean() });
    }
    // Factorial moments of G = C - S.
    let (mut p2, mut p3) = (0.0, 0.0);
    for (k, &p) in s.probs().iter().enumerate() {
        let gk = c - k as f64;
        p2 += p * gk * (gk - 1.0);
        p3 += p * gk * (gk - 1.0) * (gk - 2.0);
    }
    let f2 = c * (c - 1.0) - 2.0 * c * y1 + 2.0 * y1 * y1 - y2;
    let f3 = c * (c - 1.0) * (c - 2.0) - 3.0 * c * (c - 1.0) * y1 + 3.0 * c * (2.0 * y1 * y1 - y2)
        - 6.0 * y1 * y1 * y1
        + 6.0 * y1 * y2
        - y3;
    let d2 = f2 - p2;
    let d3 = f3 - p3;
    let (sum1, sum2) = root_sums(roots);
    Ok(QueueMoments {
        mean: -d2 / (2.0 * d1) + sum1,
        var: d2 * d2 / (4.0 * d1 * d1) - d3 / (3.0 * d1) - d2 / (2.0 * d1) - sum2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WaitMoments {
    pub mean: f64,
    pub var: f64,
}

/// Waiting-time moments from queue moments at vehicle arrival; `None` when
/// nobody arrives (λ = 0).
pub fn wait_moments(eq: f64, varq: f64, y: &ArrivalMoments, lambda: f64) -> Option<WaitMoments> {
    if !(lambda > 0.0) || !(y.mean > 0.0) {
        return None;
    }
    let (y1, y2, y3) = (y.mean, y.central2, y.central3);
    let qt = eq - y1 + 0.5 * (y2 / y1 + y1 - 1.0);
    let qtt = varq - y2
        + (4.0 * y1 * y3 + 6.0 * y1 * y1 * y2 - y1 * y1 + y1 * y1 * y1 * y1 - 3.0 * y2 * y2)
            / (12.0 * y1 * y1);
    Some(WaitMoments { mean: qt / lambda, var: (qtt - qt) / (lambda * lambda) })
}

/// A reported moment: a number, unbounded (unstable station), or not
/// applicable (no arrivals).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Metric {
    Value(f64),
    Unbounded,
    NotApplicable,
}

impl Metric {
    pub fn value(self) -> Option<f64> {
        match self {
            Metric::Value(v) => Some(v),
            _ => None,
        }
    }
}

#[cfg(feature = "serde")]
mod metric_serde {
    use super::Metric;
    use core::fmt;
    use serde::de::{self, Visitor};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    impl Serialize for Metric {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            match self {
                Metric::Value(v) => s.serialize_f64(*v),
                Metric::Unbounded => s.serialize_str("inf"),
                Metric::NotApplicable => s.serialize_none(),
            }
        }
    }

    struct MetricVisitor;

    impl<'de> Visitor<'de> for MetricVisitor {
        type Value = Metric;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a number, \"inf\" or null")
        }
        fn visit_f64<E: de::Error>(self, v: f64) -> Result<Metric, E> {
            Ok(Metric::Value(v))
        }
        fn visit_i64<E: de::Error>(self, v: i64) -> Result<Metric, E> {
            Ok(Metric::Value(v as f64))
        }
        fn visit_u64<E: de::Error>(self, v: u64) -> Result<Metric, E> {
            Ok(Metric::Value(v as f64))
        }
        fn visit_str<E: de::Error>(self, v: &str) -> Result<Metric, E> {
            match v {
                "inf" => Ok(Metric::Unbounded),
                _ => Err(E::invalid_value(de::Unexpected::Str(v), &self)),
            }
        }
        fn visit_none<E: de::Error>(self) -> Result<Metric, E> {
            Ok(Metric::NotApplicable)
        }
        fn visit_unit<E: de::Error>(self) -> Result<Metric, E> {
            Ok(Metric::NotApplicable)
        }
        fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<Metric, D::Error> {
            d.deserialize_any(MetricVisitor)
        }
    }

    impl<'de> Deserialize<'de> for Metric {
        fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Metric, D::Error> {
            d.deserialize_any(MetricVisitor)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationMetrics {
    /// 1-based.
    pub station: usize,
    /// Effective arrival rate (demand factor applied).
    pub lambda: f64,
    pub rho: f64,
    pub stable: bool,
    /// Capacity after trimming negligible s_C.
    pub effective_capacity: usize,
    pub headway: HeadwayModel,
    pub arrivals: ArrivalMoments,
    pub space: Moments3,
    pub roots: Vec<Complex64>,
    pub queue_front: QueueFront,
    pub eq: Metric,
    pub varq: Metric,
    pub ew: Metric,
    pub varw: Metric,
}

impl StationMetrics {
    pub fn sd_queue(&self) -> Metric {
        sqrt_metric(self.varq)
    }

    pub fn sd_wait(&self) -> Metric {
        sqrt_metric(self.varw)
    }
}

fn sqrt_metric(m: Metric) -> Metric {
    match m {
        Metric::Value(v) => Metric::Value(libm::sqrt(v.max(0.0))),
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RouteReport {
    pub label: String,
    pub per_station: Vec<StationMetrics>,
}

impl RouteReport {
    pub fn headways(&self) -> Vec<HeadwayModel> {
        self.per_station.iter().map(|m| m.headway).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnalysisOptions {
    pub roots: RootConfig,
}

pub fn analyze_route(sc: &Scenario) -> Result<RouteReport> {
    analyze_route_with(sc, &AnalysisOptions::default())
}

pub fn analyze_route_with(sc: &Scenario, opts: &AnalysisOptions) -> Result<RouteReport> {
    ensure_valid(sc)?;
    let cap = sc.route.capacity;
    let mut v = DiscreteDist::point_mass(0, cap);
    let mut out = Vec::with_capacity(sc.station_count());
    for n in 1..=sc.station_count() {
        let (metrics, next) = analyze_station(sc, n, &v, opts).map_err(|e| e.at(n))?;
        out.push(metrics);
        v = next;
    }
    Ok(RouteReport { label: sc.label.clone(), per_station: out })
}

/// Load distribution on departure from every station, the v vectors of the
/// recursion. Mostly for diagnostics and tests.
pub fn departure_loads(sc: &Scenario, report: &RouteReport) -> Result<Vec<DiscreteDist>> {
    let cap = sc.route.capacity;
    let mut v = DiscreteDist::point_mass(0, cap);
    let mut out = Vec::new();
    for (i, m) in report.per_station.iter().enumerate() {
        let (g, _) = step_alighting(&v, sc.route.stations[i].alpha)?;
        v = DiscreteDist::new(boarding_matrix(&m.queue_front, cap).left_mul(g.probs()))?;
        out.push(v.clone());
    }
    Ok(out)
}

/// Everything `analyze_route` needs for one station, given the load on
/// arrival. Also returns the load on departure.
pub fn analyze_station(
    sc: &Scenario,
    n: usize,
    v_prev: &DiscreteDist,
    opts: &AnalysisOptions,
) -> Result<(StationMetrics, DiscreteDist)> {
    let cap = sc.route.capacity;
    let lambda = sc.lambda(n)?;
    let alpha = sc.route.stations[n - 1].alpha;
    let (g, s) = step_alighting(v_prev, alpha)?;
    let space = s.moments();
    let model = headway::truncated_headway(sc, n)?;
    let arrivals = y_moments(lambda, &model);
    let util = utilization(&s, &arrivals);

    let mut m = StationMetrics {
        station: n,
        lambda,
        rho: util.rho,
        stable: util.stable,
        effective_capacity: cap,
        headway: model,
        arrivals,
        space,
        roots: Vec::new(),
        queue_front: QueueFront::empty_queue(cap),
        eq: Metric::Value(0.0),
        varq: Metric::Value(0.0),
        ew: Metric::NotApplicable,
        varw: Metric::NotApplicable,
    };

    if lambda == 0.0 {
        // Nobody boards; the load only changes by alighting.
        return Ok((m, g));
    }
    if !util.stable {
        m.queue_front = QueueFront::zeros(cap);
        m.eq = Metric::Unbounded;
        m.varq = Metric::Unbounded;
        m.ew = Metric::Unbounded;
        m.varw = Metric::Unbounded;
        return Ok((m, DiscreteDist::point_mass(cap, cap)));
    }

    let trimmed = trim_capacity(&s, TRIM_EPS)?;
    let kernel = StationKernel::new(&trimmed, lambda, model);
    let roots = find_all_roots(&kernel, util.rho, &opts.roots)?;
    let qm = queue_moments(&trimmed.moments(), &arrivals, &roots, trimmed.capacity())?;
    let points = spectral_points(cap, qm.mean, qm.var);
    let front = queue_front_spectral(&kernel, &roots, arrivals.mean, cap, points)?;
    let wm = wait_moments(qm.mean, qm.var, &arrivals, lambda);

    let b = boarding_matrix(&front, cap);
    let v_next = DiscreteDist::new(b.left_mul(g.probs()))?;

    m.effective_capacity = trimmed.capacity();
    m.roots = roots.into_vec();
    m.queue_front = front;
    m.eq = Metric::Value(qm.mean);
    m.varq = Metric::Value(qm.var);
    if let Some(w) = wm {
        m.ew = Metric::Value(w.mean);
        m.varw = Metric::Value(w.var);
    }
    Ok((m, v_next))
}

/// Kernel and root set for station `n` computed on demand, including
/// stations the route analysis short-circuits (λ = 0).
pub fn station_roots(sc: &Scenario, n: usize, opts: &AnalysisOptions) -> Result<(StationKernel, RootSet, f64)> {
    ensure_valid(sc)?;
    let cap = sc.route.capacity;
    let mut v = DiscreteDist::point_mass(0, cap);
    for k in 1..n {
        v = analyze_station(sc, k, &v, opts).map_err(|e| e.at(k))?.1;
    }
    let run = || -> Result<(StationKernel, RootSet, f64)> {
        let lambda = sc.lambda(n)?;
        let (_, s) = step_alighting(&v, sc.route.stations[n - 1].alpha)?;
        let model = headway::truncated_headway(sc, n)?;
        let y = y_moments(lambda, &model);
        let util = utilization(&s, &y);
        if !util.stable {
            return Err(Error::Unstable { station: n, rho: util.rho });
        }
        let trimmed = trim_capacity(&s, TRIM_EPS)?;
        let kernel = StationKernel::new(&trimmed, lambda, model);
        let roots = find_all_roots(&kernel, util.rho, &opts.roots)?;
        Ok((kernel, roots, util.rho))
    };
    run().map_err(|e| e.at(n))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alighting_edges() {
        let a = alighting_matrix(0.0, 4);
        for i in 0..5 {
            for j in 0..5 {
                assert_eq!(a.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
        let a = alighting_matrix(1.0, 4);
        for i in 0..5 {
            assert_eq!(a.get(i, 0), 1.0);
        }
        let a = alighting_matrix(0.5, 2);
        assert_eq!(a.row(2), &[0.25, 0.5, 0.25]);
        let a = alighting_matrix(0.3, 30);
        for i in 0..31 {
            let s: f64 = a.row(i).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn alighting_step() {
        let (g, s) = step_alighting(&DiscreteDist::point_mass(0, 5), 0.3).unwrap();
        assert_eq!(g, DiscreteDist::point_mass(0, 5));
        assert_eq!(s, DiscreteDist::point_mass(5, 5));
        let (_, s) = step_alighting(&DiscreteDist::new(vec![0.1, 0.4, 0.5]).unwrap(), 1.0).unwrap();
        assert_eq!(s, DiscreteDist::point_mass(2, 2));
        let (_, s) = step_alighting(&DiscreteDist::point_mass(2, 2), 0.5).unwrap();
        assert_eq!(s.probs(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn boarding_rows() {
        let b = boarding_matrix(&QueueFront::new(vec![0.3, 0.5]).unwrap(), 2);
        let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-15);
        assert!(close(b.row(0), &[0.3, 0.5, 0.2]));
        assert!(close(b.row(1), &[0.0, 0.3, 0.7]));
        assert!(close(b.row(2), &[0.0, 0.0, 1.0]));
        let b = boarding_matrix(&QueueFront::empty_queue(3), 3);
        for i in 0..4 {
            assert_eq!(b.get(i, i), 1.0);
        }
        let b = boarding_matrix(&QueueFront::zeros(3), 3);
        for i in 0..4 {
            assert_eq!(b.get(i, 3), 1.0);
        }
    }

    #[test]
    fn moments_by_hand() {
        let m = DiscreteDist::point_mass(7, 7).moments();
        assert_eq!((m.mean, m.var, m.central3), (7.0, 0.0, 0.0));
        let m = DiscreteDist::new(vec![1.0 / 3.0; 3]).unwrap().moments();
        assert!((m.mean - 1.0).abs() < 1e-15 && (m.var - 2.0 / 3.0).abs() < 1e-15);
        assert!(m.central3.abs() < 1e-15);
        let m = DiscreteDist::new(vec![0.5, 0.0, 0.5]).unwrap().moments();
        assert_eq!((m.mean, m.var, m.central3), (1.0, 1.0, 0.0));
    }

    #[test]
    fn clamping_rules() {
        let d = DiscreteDist::new(vec![-1e-13, 1.0]).unwrap();
        assert_eq!(d.probs()[0], 0.0);
        assert!(matches!(
            DiscreteDist::new(vec![-1e-6, 1.0]),
            Err(Error::NegativeProbability { index: 0, .. })
        ));
        assert!(DiscreteDist::new(vec![0.5, 0.4]).is_err());
    }

    #[test]
    fn utilization_cases() {
        let y = ArrivalMoments { mean: 0.0, central2: 0.0, central3: 0.0 };
        let u = utilization(&DiscreteDist::point_mass(3, 3), &y);
        assert_eq!((u.rho, u.stable), (0.0, true));
        let y = ArrivalMoments { mean: 2.0, central2: 2.0, central3: 2.0 };
        let u = utilization(&DiscreteDist::point_mass(0, 3), &y);
        assert!(!u.stable && u.rho.is_infinite());
        let u = utilization(&DiscreteDist::point_mass(2, 3), &y);
        assert!(!u.stable && u.rho == 1.0);
    }

    #[test]
    fn trim() {
        let s = DiscreteDist::new(vec![0.2, 0.8 - 1e-13, 1e-13]).unwrap();
        let t = trim_capacity(&s, TRIM_EPS).unwrap();
        assert_eq!(t.capacity(), 1);
        assert!((t.probs()[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn den_at_one_and_fixed_capacity() {
        let s = DiscreteDist::point_mass(4, 4);
        let h = HeadwayModel::new(6.0, 2.0);
        let pgf = |z| headway::y_pgf_unchecked(z, 0.5, &h);
        assert!(den_eval(Complex64::new(1.0, 0.0), &s, pgf).unwrap().norm() < 1e-12);
        let z = Complex64::new(0.3, 0.4);
        let d = den_eval(z, &s, pgf).unwrap();
        assert!((d - (z.powu(4) / pgf(z) - 1.0)).norm() < 1e-14);
    }

    #[test]
    fn eta_is_real_for_conjugate_roots() {
        let r = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.2, 0.5),
            Complex64::new(0.2, -0.5),
            Complex64::new(-0.7, 0.0),
        ];
        let eta = eta_coefficients(&r);
        assert_eq!(eta.len(), 5);
        assert!(eta.iter().all(|e| e.im.abs() < 1e-15));
        // Constant term 1, z⁴ coefficient 1/Π z_i.
        let prod: Complex64 = r.iter().product();
        assert!((eta[4] - prod.inv()).norm() < 1e-14);
    }

    #[test]
    fn no_arrivals_anywhere() {
        let mut sc = Scenario::reference();
        sc.route.stations.iter_mut().for_each(|s| s.lambda = 0.0);
        let rep = analyze_route(&sc).unwrap();
        for m in &rep.per_station {
            assert_eq!(m.rho, 0.0);
            assert_eq!(m.eq, Metric::Value(0.0));
            assert_eq!(m.ew, Metric::NotApplicable);
        }
    }
}
