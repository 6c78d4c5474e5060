//! Incident delays, headway law and arrivals per headway.

use core::f64::consts::SQRT_2;

use num_complex::Complex64;
use rand_core::RngCore;

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::sampling;
use crate::special::{faddeeva, norm_cdf, norm_pdf};

pub use crate::model::incident_duration_mean;

/// Zero-inflated truncated normal: N(mu, sigma²) with the negative part
/// collapsed onto 0.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HeadwayModel {
    pub mu: f64,
    pub sigma: f64,
    pub zero_mass: f64,
}

/// Mean, variance and third central moment.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Moments3 {
    pub mean: f64,
    pub var: f64,
    pub central3: f64,
}

/// Moments of Y, the number of arrivals during one headway.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ArrivalMoments {
    pub mean: f64,
    pub central2: f64,
    pub central3: f64,
}

impl ArrivalMoments {
    /// E[Y], E[Y(Y-1)], E[Y(Y-1)(Y-2)].
    pub fn factorial(&self) -> [f64; 3] {
        let m = self.mean;
        let raw2 = self.central2 + m * m;
        let raw3 = self.central3 + 3.0 * m * self.central2 + m * m * m;
        [m, raw2 - m, raw3 - 3.0 * raw2 + 2.0 * m]
    }
}

/// E[e^{tH}] for the untruncated headway at station `n`. Needs |t| < θ.
pub fn headway_mgf(t: f64, sc: &Scenario, n: usize) -> Result<f64> {
    let theta = sc.incidents.theta;
    if !(t.abs() < theta) {
        return Err(Error::Domain("headway MGF needs |t| < theta"));
    }
    let t_n = sc.travel_time_to(n)?;
    let gamma = sc.incidents.gamma;
    let h_adj = sc.adjusted_headway();
    Ok(libm::exp(t * h_adj) * libm::exp(gamma * t_n * 2.0 * t * t / (theta * theta - t * t)))
}

/// MGF of the compound Poisson-exponential delay accumulated over `t_travel`.
pub fn incident_mgf(t: f64, gamma: f64, theta: f64, t_travel: f64) -> Result<f64> {
    if !(t < theta) {
        return Err(Error::Domain("incident MGF needs t < theta"));
    }
    Ok(libm::exp(gamma * t_travel * t / (theta - t)))
}

/// Mean and variance of the untruncated headway at station `n`.
pub fn headway_base_moments(sc: &Scenario, n: usize) -> Result<(f64, f64)> {
    let t_n = sc.travel_time_to(n)?;
    let theta = sc.incidents.theta;
    Ok((
        sc.adjusted_headway(),
        4.0 * t_n * sc.incidents.gamma / (theta * theta),
    ))
}

pub fn truncated_headway(sc: &Scenario, n: usize) -> Result<HeadwayModel> {
    let (mu, var) = headway_base_moments(sc, n)?;
    Ok(HeadwayModel::new(mu, libm::sqrt(var)))
}

impl HeadwayModel {
    pub fn new(mu: f64, sigma: f64) -> HeadwayModel {
        let zero_mass = if sigma > 0.0 { norm_cdf(-mu / sigma) } else { 0.0 };
        HeadwayModel { mu, sigma, zero_mass }
    }

    pub fn is_degenerate(&self) -> bool {
        self.sigma == 0.0
    }

    /// E[Ĥ], E[Ĥ²], E[Ĥ³] for Ĥ = max(0, H).
    pub fn raw_moments(&self) -> [f64; 3] {
        let (mu, s) = (self.mu, self.sigma);
        if s == 0.0 {
            let m = mu.max(0.0);
            return [m, m * m, m * m * m];
        }
        let m = mu / s;
        let cdf = norm_cdf(m);
        let pdf = norm_pdf(m);
        [
            mu * cdf + s * pdf,
            (mu * mu + s * s) * cdf + mu * s * pdf,
            (mu * mu * mu + 3.0 * mu * s * s) * cdf + (mu * mu * s + 2.0 * s * s * s) * pdf,
        ]
    }

    pub fn moments(&self) -> Moments3 {
        truncated_headway_moments(self)
    }
}

pub fn truncated_headway_moments(model: &HeadwayModel) -> Moments3 {
    if model.sigma == 0.0 {
        return Moments3 { mean: model.mu, var: 0.0, central3: 0.0 };
    }
    let [e1, e2, e3] = model.raw_moments();
    Moments3 {
        mean: e1,
        var: (e2 - e1 * e1).max(0.0),
        central3: e3 - 3.0 * e1 * e2 + 2.0 * e1 * e1 * e1,
    }
}

/// PGF of arrivals per headway, E[z^Y] = E[exp(λĤ(z-1))].
///
/// Evaluated through the Faddeeva function so that no huge exponential is
/// ever multiplied by a vanishing erfc. With m = μ/σ and b = σλ(z-1) the
/// defining expression is Φ(-m) + e^{mb + b²/2}·Φ(m + b) (up to the σ
/// scaling absorbed into m, b), and e^{mb+b²/2} erfc(-(m+b)/√2)/2 equals
/// e^{-m²/2} w(i(m+b)/√2)/2.
pub fn y_pgf(z: Complex64, lambda: f64, model: &HeadwayModel) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain("y_pgf needs a finite argument"));
    }
    Ok(y_pgf_unchecked(z, lambda, model))
}

pub(crate) fn y_pgf_unchecked(z: Complex64, lambda: f64, model: &HeadwayModel) -> Complex64 {
    let zm1 = z - 1.0;
    if model.sigma == 0.0 || lambda == 0.0 {
        if lambda == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        return (lambda * model.mu * zm1).exp();
    }
    let m = model.mu / model.sigma;
    let b = model.sigma * lambda * zm1;
    let a = b + m;
    let half_gauss = 0.5 * libm::exp(-0.5 * m * m);
    // ζ = -i a / √2 lies in the upper half plane exactly when Re a <= 0.
    if a.re <= 0.0 {
        let zeta = Complex64::new(a.im, -a.re) / SQRT_2;
        model.zero_mass + half_gauss * faddeeva(zeta)
    } else {
        let zeta = Complex64::new(-a.im, a.re) / SQRT_2;
        model.zero_mass + (m * b + 0.5 * b * b).exp() - half_gauss * faddeeva(zeta)
    }
}

/// Moments of Y through mixed-Poisson cumulant additivity.
pub fn y_moments(lambda: f64, model: &HeadwayModel) -> ArrivalMoments {
    let h = truncated_headway_moments(model);
    let l2 = lambda * lambda;
    let mean = lambda * h.mean;
    let var_l = l2 * h.var;
    let c3_l = l2 * lambda * h.central3;
    ArrivalMoments {
        mean,
        central2: mean + var_l,
        central3: mean + 3.0 * var_l + c3_l,
    }
}

/// Total incident delay over travel time `t`: Poisson(γt) many Exp(θ) terms.
pub fn sample_incident_duration<R: RngCore + ?Sized>(
    rng: &mut R,
    gamma: f64,
    theta: f64,
    t: f64,
) -> f64 {
    sampling::compound_poisson_exp(rng, gamma * t, theta)
}

/// One draw of H = H̄ᴬᵈʲ + I - I' at station `n` (no truncation).
pub fn sample_headway<R: RngCore + ?Sized>(rng: &mut R, sc: &Scenario, n: usize) -> Result<f64> {
    let t_n = sc.travel_time_to(n)?;
    let (g, th) = (sc.incidents.gamma, sc.incidents.theta);
    let a = sample_incident_duration(rng, g, th, t_n);
    let b = sample_incident_duration(rng, g, th, t_n);
    Ok(sc.adjusted_headway() + a - b)
}
