//! Central finite-difference gradients.
//!
//! Used by the test suites to check analytic gradients; only evaluates the
//! forward function, so it is independent of the tape's backward rules.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_grad(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut point = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = point[i];
        point[i] = orig + h;
        let plus = f(&point);
        point[i] = orig - h;
        let minus = f(&point);
        point[i] = orig;
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}
