//! Normal distribution and the Faddeeva function w(z) = e^{-z²} erfc(-iz).

use core::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

use num_complex::Complex64;

const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * x * x)
}

/// Standard normal CDF, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// Weideman (1994) rational expansion with N = 40 terms, L = sqrt(N / sqrt 2).
// Coefficients are highest degree first.
const WEIDEMAN_L: f64 = 5.318_295_896_944_988_6;
const WEIDEMAN: [f64; 40] = [
    -1.89969494739492709e-15,
    1.12807356236440206e-15,
    1.13576871989992415e-14,
    -5.40931028288214225e-15,
    -7.07408626028685501e-14,
    1.37256205867155002e-14,
    4.53296667826067269e-13,
    1.20314582193879887e-13,
    -2.90768834218286691e-12,
    -2.72760231582004522e-12,
    1.77144952140111921e-11,
    3.47272670930455001e-11,
    -9.05512445092829225e-11,
    -3.56323398659765332e-10,
    2.10860063470665174e-10,
    3.01778054000907068e-09,
    3.24974651804369725e-09,
    -1.83156167830404618e-08,
    -6.35177348504429047e-08,
    1.41986423999356739e-08,
    5.91213695189949436e-07,
    1.48356611322007808e-06,
    -1.06601389849471431e-06,
    -1.80074471447509562e-05,
    -5.59130926424831809e-05,
    -3.93936314548956899e-05,
    4.39807015986966809e-04,
    2.70540563307379144e-03,
    1.00481862427834242e-02,
    2.92029164712418673e-02,
    7.18236177907433659e-02,
    1.55042638024794954e-01,
    2.99894379961500646e-01,
    5.26652898827708604e-01,
    8.47217457659381834e-01,
    1.25638156757651331e+00,
    1.72538308481797786e+00,
    2.20151379487831189e+00,
    2.61605415276186015e+00,
    2.89962450938970528e+00,
];

fn faddeeva_upper(z: Complex64) -> Complex64 {
    let iz = Complex64::new(-z.im, z.re);
    let lmiz = WEIDEMAN_L - iz;
    let zz = (WEIDEMAN_L + iz) / lmiz;
    let mut p = Complex64::new(0.0, 0.0);
    for &c in WEIDEMAN.iter() {
        p = p * zz + c;
    }
    let inv = lmiz.inv();
    2.0 * p * inv * inv + FRAC_1_SQRT_PI * inv
}

/// Faddeeva function. Relative error around 1e-13 in the upper half plane;
/// the lower half plane goes through w(z) = 2e^{-z²} - w(-z).
pub fn faddeeva(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        faddeeva_upper(z)
    } else {
        2.0 * (-z * z).exp() - faddeeva_upper(-z)
    }
}

/// Complementary error function at a complex argument.
pub fn erfc(z: Complex64) -> Complex64 {
    if z.re >= 0.0 {
        // erfc(z) = e^{-z²} w(iz), and iz is in the upper half plane.
        (-z * z).exp() * faddeeva_upper(Complex64::new(-z.im, z.re))
    } else {
        2.0 - erfc(-z)
    }
}

/// Normal CDF continued to complex arguments, Φ(w) = erfc(-w/√2)/2.
pub fn norm_cdf_complex(w: Complex64) -> Complex64 {
    0.5 * erfc(-w / SQRT_2)
}
