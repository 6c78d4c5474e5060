use num_complex::Complex64;

/// Σ c[k] x^k by Horner, real coefficients at a complex point.
pub(crate) fn eval_ascending(c: &[f64], x: Complex64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for &ck in c.iter().rev() {
        acc = acc * x + ck;
    }
    acc
}
