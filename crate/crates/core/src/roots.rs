//! Zeros of Den(z) in the closed unit disk.
//!
//! A root is a point with J(z) = Y(z)·S(1/z) = 1. The search works on
//! log J in polar coordinates, first sweeping the upper half plane from the
//! unit root (clockwise search), then filling gaps between known roots
//! (interpolation search).

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::sampling::uniform;

/// Anything whose roots we hunt: J(z) and the denominator it stands in for.
pub trait Characteristic {
    /// Number of roots expected in the closed unit disk.
    fn capacity(&self) -> usize;
    /// J(z); `None` where it cannot be evaluated.
    fn j(&self, z: Complex64) -> Option<Complex64>;
    /// Den(z); used only to certify roots.
    fn den(&self, z: Complex64) -> Option<Complex64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarPoint {
    pub r: f64,
    pub phi: f64,
}

impl PolarPoint {
    pub fn new(r: f64, phi: f64) -> PolarPoint {
        PolarPoint { r, phi: wrap_angle(phi) }
    }

    pub fn from_complex(z: Complex64) -> PolarPoint {
        PolarPoint::new(z.norm(), z.arg())
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::from_polar(self.r, self.phi)
    }
}

fn wrap_angle(phi: f64) -> f64 {
    let w = phi - TAU * libm::floor(phi / TAU);
    if (0.0..TAU).contains(&w) { w } else { 0.0 }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootConfig {
    pub r_min: f64,
    /// Convergence threshold on |log J|.
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub dedup_tol: f64,
    /// Probability of jittering an interpolated initial point.
    pub perturb_prob: f64,
    pub max_depth: usize,
    /// Certification bound on |Den| and |J - 1|.
    pub residual_tol: f64,
    /// Roots may sit this far outside the unit circle.
    pub radius_tol: f64,
    pub seed: u64,
}

impl Default for RootConfig {
    fn default() -> Self {
        RootConfig {
            r_min: 0.05,
            tol: 1e-10,
            max_iter: 200,
            fd_step: 1e-7,
            dedup_tol: 1e-6,
            perturb_prob: 0.3,
            max_depth: 50,
            residual_tol: 1e-8,
            radius_tol: 1e-8,
            seed: 0x5eed_0f_2007,
        }
    }
}

/// Roots ordered by angle in [0, 2π); the unit root comes first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RootSet {
    roots: Vec<Complex64>,
}

impl RootSet {
    pub fn unit() -> RootSet {
        RootSet { roots: alloc::vec![Complex64::new(1.0, 0.0)] }
    }

    pub fn from_roots(mut roots: Vec<Complex64>) -> RootSet {
        sort_by_angle(&mut roots);
        RootSet { roots }
    }

    pub fn roots(&self) -> &[Complex64] {
        &self.roots
    }

    /// Every root except z = 1.
    pub fn nontrivial(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.roots.iter().copied().filter(|z| (z - 1.0).norm() > 1e-9)
    }

    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.roots
    }

    fn contains(&self, z: Complex64, tol: f64) -> bool {
        self.roots.iter().any(|w| (w - z).norm() < tol)
    }

    /// Adds `z` and its conjugate if new. Returns whether anything was added.
    fn insert_pair(&mut self, z: Complex64, tol: f64) -> bool {
        let mut added = false;
        for w in [z, z.conj()] {
            if !self.contains(w, tol) {
                self.roots.push(w);
                added = true;
            }
        }
        if added {
            sort_by_angle(&mut self.roots);
        }
        added
    }
}

fn angle(z: Complex64) -> f64 {
    wrap_angle(z.arg())
}

fn sort_by_angle(v: &mut [Complex64]) {
    v.sort_by(|a, b| {
        angle(*a)
            .partial_cmp(&angle(*b))
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(b.norm().partial_cmp(&a.norm()).unwrap_or(core::cmp::Ordering::Equal))
    });
}

fn log_j<F: Characteristic + ?Sized>(f: &F, p: PolarPoint) -> Option<Complex64> {
    let j = f.j(p.to_complex())?;
    if !(j.re.is_finite() && j.im.is_finite()) || j.norm() == 0.0 {
        return None;
    }
    Some(j.ln())
}

// d log J along r and φ. Differencing log of the ratio keeps the estimate
// away from the branch cut of the principal log.
fn jacobian<F: Characteristic + ?Sized>(f: &F, p: PolarPoint, h: f64) -> Option<[[f64; 2]; 2]> {
    let ratio = |a: PolarPoint, b: PolarPoint| -> Option<Complex64> {
        let ja = f.j(a.to_complex())?;
        let jb = f.j(b.to_complex())?;
        let q = ja / jb;
        if !(q.re.is_finite() && q.im.is_finite()) || q.norm() == 0.0 {
            return None;
        }
        Some(q.ln() / (2.0 * h))
    };
    let dr = ratio(
        PolarPoint { r: p.r + h, phi: p.phi },
        PolarPoint { r: p.r - h, phi: p.phi },
    )?;
    let dp = ratio(
        PolarPoint { r: p.r, phi: p.phi + h },
        PolarPoint { r: p.r, phi: p.phi - h },
    )?;
    Some([[dr.re, dp.re], [dr.im, dp.im]])
}

fn solve2(a: [[f64; 2]; 2], b: [f64; 2]) -> Option<[f64; 2]> {
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    Some([
        (b[0] * a[1][1] - a[0][1] * b[1]) / det,
        (a[0][0] * b[1] - a[1][0] * b[0]) / det,
    ])
}

fn norm2(v: Complex64) -> f64 {
    libm::hypot(v.re, v.im)
}

/// Damped Newton on (Re log J, Im log J) = 0 from `initial`, with a
/// Levenberg step when plain Newton cannot reduce the residual.
pub fn solve_from_initial<F: Characteristic + ?Sized>(
    initial: PolarPoint,
    f: &F,
    cfg: &RootConfig,
) -> Option<PolarPoint> {
    let project = |r: f64, phi: f64| PolarPoint::new(r.max(cfg.r_min), phi);
    let mut p = project(initial.r, initial.phi);
    let mut fx = log_j(f, p)?;
    let max_dphi = (PI / f.capacity().max(1) as f64).max(0.05);

    for _ in 0..=cfg.max_iter {
        let res = norm2(fx);
        if res < cfg.tol {
            let p = polish(f, p, fx, cfg);
            let j = f.j(p.to_complex())?;
            return ((j - 1.0).norm() < cfg.residual_tol).then_some(p);
        }
        let jac = jacobian(f, p, cfg.fd_step)?;
        let rhs = [-fx.re, -fx.im];

        let mut accepted = None;
        if let Some(mut d) = solve2(jac, rhs) {
            let scale = (d[0].abs() / 0.25).max(d[1].abs() / max_dphi).max(1.0);
            d = [d[0] / scale, d[1] / scale];
            let mut t = 1.0;
            for _ in 0..12 {
                let q = project(p.r + t * d[0], p.phi + t * d[1]);
                if let Some(fq) = log_j(f, q) {
                    if norm2(fq) < res * (1.0 - 1e-4 * t) {
                        accepted = Some((q, fq));
                        break;
                    }
                }
                t *= 0.5;
            }
        }

        if accepted.is_none() {
            // Levenberg: (JᵀJ + μI) d = -JᵀF with growing μ.
            let jtj = [
                [
                    jac[0][0] * jac[0][0] + jac[1][0] * jac[1][0],
                    jac[0][0] * jac[0][1] + jac[1][0] * jac[1][1],
                ],
                [
                    jac[0][1] * jac[0][0] + jac[1][1] * jac[1][0],
                    jac[0][1] * jac[0][1] + jac[1][1] * jac[1][1],
                ],
            ];
            let g = [
                jac[0][0] * rhs[0] + jac[1][0] * rhs[1],
                jac[0][1] * rhs[0] + jac[1][1] * rhs[1],
            ];
            let mut mu = 1e-3 * (jtj[0][0] + jtj[1][1]).max(1e-12);
            for _ in 0..10 {
                let a = [[jtj[0][0] + mu, jtj[0][1]], [jtj[1][0], jtj[1][1] + mu]];
                if let Some(d) = solve2(a, g) {
                    let q = project(p.r + d[0], p.phi + d[1]);
                    if let Some(fq) = log_j(f, q) {
                        if norm2(fq) < res {
                            accepted = Some((q, fq));
                            break;
                        }
                    }
                }
                mu *= 10.0;
            }
        }

        let (q, fq) = accepted?;
        p = q;
        fx = fq;
    }
    None
}

// A few undamped Newton steps past the tolerance, kept only while they help.
fn polish<F: Characteristic + ?Sized>(f: &F, mut p: PolarPoint, mut fx: Complex64, cfg: &RootConfig) -> PolarPoint {
    for _ in 0..3 {
        let Some(jac) = jacobian(f, p, cfg.fd_step) else { break };
        let Some(d) = solve2(jac, [-fx.re, -fx.im]) else { break };
        let q = PolarPoint::new(p.r + d[0], p.phi + d[1]);
        match log_j(f, q) {
            Some(fq) if norm2(fq) < norm2(fx) => {
                p = q;
                fx = fq;
            }
            _ => break,
        }
    }
    p
}

// Snap, certify and in-disk check.
fn certify<F: Characteristic + ?Sized>(p: PolarPoint, f: &F, cfg: &RootConfig) -> Option<Complex64> {
    let mut z = p.to_complex();
    if z.im.abs() < 1e-12 * z.norm().max(1.0) {
        z.im = 0.0;
    }
    if z.norm() > 1.0 + cfg.radius_tol {
        return None;
    }
    let d = f.den(z)?;
    (d.norm() < cfg.residual_tol).then_some(z)
}

/// Sweep the upper half plane from z = 1, extrapolating each next initial
/// point from the two most recent roots.
pub fn clockwise_search<F: Characteristic + ?Sized>(
    capacity: usize,
    rho: f64,
    f: &F,
    cfg: &RootConfig,
) -> RootSet {
    let mut set = RootSet::unit();
    if capacity <= 1 {
        return set;
    }
    let c = capacity as f64;
    let mut prev = PolarPoint { r: 1.0, phi: 0.0 };
    let mut init = PolarPoint { r: 1.0 - 0.5 * rho, phi: 3.0 * PI / c };
    let mut step = PolarPoint { r: 0.0, phi: 2.0 * PI / c };

    for _ in 0..capacity {
        if set.len() >= capacity {
            break;
        }
        if init.phi > PI + 1e-12 {
            // Last look on the negative real axis before giving up the sweep.
            if let Some(z) = solve_from_initial(PolarPoint::new(init.r, PI), f, cfg)
                .and_then(|p| certify(p, f, cfg))
            {
                set.insert_pair(z, cfg.dedup_tol);
            }
            break;
        }
        let found = solve_from_initial(init, f, cfg)
            .and_then(|p| certify(p, f, cfg))
            .map(|z| (z, PolarPoint::from_complex(z)));

        match found {
            Some((z, p)) if p.phi > 1e-9 && p.phi <= PI + 1e-9 && set.insert_pair(z, cfg.dedup_tol) => {
                // Newton may overshoot a neighbour when the initial point sits
                // near a branch of the wrapped residual; look in the gap once.
                let mut base = prev;
                if p.phi - prev.phi > 1.5 * TAU / c {
                    let mid = PolarPoint::new(0.5 * (p.r + prev.r), 0.5 * (p.phi + prev.phi));
                    if let Some(zm) = solve_from_initial(mid, f, cfg).and_then(|q| certify(q, f, cfg)) {
                        let pm = PolarPoint::from_complex(zm);
                        if set.insert_pair(zm, cfg.dedup_tol) && pm.phi > prev.phi && pm.phi < p.phi {
                            base = pm;
                        }
                    }
                }
                if p.phi >= PI - 1e-9 {
                    break;
                }
                step = PolarPoint { r: p.r - base.r, phi: p.phi - base.phi };
                prev = p;
                init = PolarPoint { r: (p.r + step.r).max(cfg.r_min), phi: p.phi + step.phi };
            }
            _ => {
                // Keep walking with the last spacing.
                init = PolarPoint {
                    r: (init.r + step.r).max(cfg.r_min),
                    phi: init.phi + step.phi.max(PI / (2.0 * c)),
                };
            }
        }
    }
    set
}

/// Fill gaps between angularly adjacent known roots with interpolated
/// initial points, refining the grid whenever a pass finds nothing new.
pub fn interpolation_search<F: Characteristic + ?Sized>(
    partial: RootSet,
    capacity: usize,
    f: &F,
    cfg: &RootConfig,
    rng: &mut dyn RngCore,
) -> Result<RootSet> {
    let mut set = partial;
    let mut level = 2usize;
    let mut depth = 0usize;
    let mut stall = 0usize;
    while set.len() < capacity {
        depth += 1;
        if depth > cfg.max_depth {
            return Err(Error::RootSearch { found: set.len(), expected: capacity });
        }
        let known: Vec<PolarPoint> = set.roots().iter().map(|&z| PolarPoint::from_complex(z)).collect();
        let m = known.len();
        let mut added = false;
        for i in 0..m {
            let a = known[i];
            let mut b = known[(i + 1) % m];
            if i + 1 == m {
                b.phi += TAU;
            }
            let dr = (b.r - a.r) / level as f64;
            let dphi = (b.phi - a.phi) / level as f64;
            for k in 1..level {
                let t = k as f64;
                let mut r = a.r + t * dr;
                let mut phi = a.phi + t * dphi;
                if uniform(rng) < cfg.perturb_prob {
                    let spread_r = dr.abs().max(dphi.abs() * r);
                    r += (uniform(rng) - 0.5) * spread_r;
                    phi += (uniform(rng) - 0.5) * dphi;
                }
                // After unproductive passes also look inside and outside the
                // chord: a root can hide radially between two neighbours.
                for j in 0..=2 * stall.min(3) {
                    let off = if j % 2 == 1 { -(j.div_ceil(2) as f64) } else { (j / 2) as f64 };
                    let rj = if off < 0.0 { r * (1.0 + 0.1 * off) } else { r + 0.1 * off * (1.0 - r) };
                    let init = PolarPoint::new(rj.max(cfg.r_min), phi);
                    if let Some(z) = solve_from_initial(init, f, cfg).and_then(|p| certify(p, f, cfg)) {
                        if set.insert_pair(z, cfg.dedup_tol) {
                            added = true;
                        }
                    }
                }
            }
        }
        if set.len() > capacity {
            return Err(Error::RootSearch { found: set.len(), expected: capacity });
        }
        if !added && stall >= 2 {
            added = deflation_pass(&mut set, f, cfg);
        }
        if added {
            stall = 0;
        } else {
            level += 1;
            stall += 1;
        }
    }
    Ok(set)
}

/// Newton on Den(z)/Π(z - zᵢ) over the known roots. Roots whose log J
/// basin is too small for the interpolated starts are still simple zeros of
/// the deflated function, with a wide basin.
fn deflated_newton<F: Characteristic + ?Sized>(f: &F, known: &[Complex64], z0: Complex64, cfg: &RootConfig) -> Option<Complex64> {
    let g = |z: Complex64| -> Option<Complex64> {
        let mut d = f.den(z)?;
        for &w in known {
            d /= z - w;
        }
        (d.re.is_finite() && d.im.is_finite()).then_some(d)
    };
    let mut z = z0;
    for _ in 0..cfg.max_iter {
        let gz = g(z)?;
        let h = cfg.fd_step * z.norm().max(1.0);
        let dg = (g(z + h)? - g(z - h)?) / (2.0 * h);
        if dg.norm() == 0.0 {
            return None;
        }
        let mut step = gz / dg;
        if step.norm() > 0.1 {
            step *= 0.1 / step.norm();
        }
        z -= step;
        if z.norm() > 1.2 {
            return None;
        }
        if step.norm() < 1e-13 * z.norm().max(1e-3) {
            break;
        }
    }
    // Finish on log J so the root matches the ones found directly.
    let p = solve_from_initial(PolarPoint::from_complex(z), f, cfg)?;
    let w = certify(p, f, cfg)?;
    ((w - z).norm() < 1e-6).then_some(w)
}

fn deflation_pass<F: Characteristic + ?Sized>(set: &mut RootSet, f: &F, cfg: &RootConfig) -> bool {
    let known: Vec<PolarPoint> = set.roots().iter().map(|&z| PolarPoint::from_complex(z)).collect();
    let mut added = false;
    for i in 0..known.len() {
        let a = known[i];
        let b = known.get(i + 1).copied().unwrap_or(PolarPoint { r: 1.0, phi: TAU });
        if a.phi > PI + 1e-9 {
            break;
        }
        let phi = 0.5 * (a.phi + b.phi);
        for k in 2..10 {
            let roots: Vec<Complex64> = set.roots().to_vec();
            let z0 = Complex64::from_polar(0.1 * k as f64, phi);
            if let Some(z) = deflated_newton(f, &roots, z0, cfg) {
                if set.insert_pair(z, cfg.dedup_tol) {
                    added = true;
                    break;
                }
            }
        }
    }
    added
}

/// Clockwise search followed by interpolation search; the result is checked
/// against every root-set invariant.
pub fn find_all_roots<F: Characteristic + ?Sized>(f: &F, rho: f64, cfg: &RootConfig) -> Result<RootSet> {
    let capacity = f.capacity();
    let partial = clockwise_search(capacity, rho, f, cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let set = interpolation_search(partial, capacity, f, cfg, &mut rng)?;
    check_root_set(&set, f, cfg)?;
    Ok(set)
}

/// Count, separation, conjugate closure, residual and radius.
pub fn check_root_set<F: Characteristic + ?Sized>(set: &RootSet, f: &F, cfg: &RootConfig) -> Result<()> {
    let capacity = f.capacity();
    let bad = Err(Error::RootSearch { found: set.len(), expected: capacity });
    if set.len() != capacity {
        return bad;
    }
    let roots = set.roots();
    for (i, &z) in roots.iter().enumerate() {
        if z.norm() > 1.0 + cfg.radius_tol {
            return bad;
        }
        match f.den(z) {
            Some(d) if d.norm() < cfg.residual_tol => {}
            _ => return bad,
        }
        if !roots.iter().any(|w| (w - z.conj()).norm() < 1e-8) {
            return bad;
        }
        if roots[i + 1..].iter().any(|w| (w - z).norm() < cfg.dedup_tol) {
            return bad;
        }
    }
    Ok(())
}
