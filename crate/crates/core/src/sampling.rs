//! Variate generators over any `RngCore`. Deterministic for a seeded source.

use rand_core::RngCore;

/// Uniform on [0, 1) with 53 random bits.
pub fn uniform<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform on (0, 1], safe to take the log of.
fn uniform_open0<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    1.0 - uniform(rng)
}

pub fn exponential<R: RngCore + ?Sized>(rng: &mut R, rate: f64) -> f64 {
    -libm::log(uniform_open0(rng)) / rate
}

/// Poisson variate: inversion below mean 30, PTRS rejection above.
pub fn poisson<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    if mean < 30.0 {
        poisson_inversion(rng, mean)
    } else {
        poisson_ptrs(rng, mean)
    }
}

fn poisson_inversion<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let u = uniform(rng);
    let mut p = libm::exp(-mean);
    let mut cdf = p;
    let mut k = 0u64;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        // Only reachable when rounding leaves cdf stuck just below u.
        if p == 0.0 && k as f64 > mean {
            break;
        }
    }
    k
}

// Hörmann (1993), transformed rejection with squeeze.
fn poisson_ptrs<R: RngCore + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    let slam = libm::sqrt(mean);
    let loglam = libm::log(mean);
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let vr = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = uniform(rng) - 0.5;
        let v = uniform(rng);
        let us = 0.5 - u.abs();
        let k = libm::floor((2.0 * a / us + b) * u + mean + 0.43);
        if us >= 0.07 && v <= vr {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = libm::log(v) + libm::log(inv_alpha) - libm::log(a / (us * us) + b);
        let rhs = -mean + k * loglam - libm::lgamma(k + 1.0);
        if lhs <= rhs {
            return k as u64;
        }
    }
}

/// Binomial(n, p) by inversion, with a Bernoulli-sum fallback if qⁿ underflows.
pub fn binomial<R: RngCore + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    if p >= 1.0 {
        return n;
    }
    if p > 0.5 {
        return n - binomial(rng, n, 1.0 - p);
    }
    let q = 1.0 - p;
    let mut r = libm::pow(q, n as f64);
    if r == 0.0 {
        return (0..n).filter(|_| uniform(rng) < p).count() as u64;
    }
    let s = p / q;
    let a = (n + 1) as f64 * s;
    let mut u = uniform(rng);
    let mut x = 0u64;
    while u > r && x < n {
        u -= r;
        x += 1;
        r *= a / x as f64 - s;
    }
    x
}

/// Sum of Poisson(`mean_count`) many Exp(`rate`) draws.
pub fn compound_poisson_exp<R: RngCore + ?Sized>(rng: &mut R, mean_count: f64, rate: f64) -> f64 {
    let k = poisson(rng, mean_count);
    (0..k).map(|_| exponential(rng, rate)).sum()
}
