//! Central finite-difference oracle for gradient verification.
//!
//! Independent of every analytic backward pass in this crate: it only needs a
//! scalar function of a flat parameter vector. Tests freeze whatever else the
//! objective depends on (old policy, partitions, detached factors) inside the
//! closure they hand in.

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + h;
        let up = f(&probe);
        probe[i] = orig - h;
        let down = f(&probe);
        probe[i] = orig;
        grad.push((up - down) / (2.0 * h));
    }
    grad
}

/// Largest relative disagreement between two gradients.
///
/// Uses `|a - n| / max(|a|, |n|, floor)` per component, so exact zeros on both
/// sides compare equal and tiny components are judged on an absolute scale.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Default absolute floor for relative comparisons; below this scale the
/// central-difference estimate itself is dominated by roundoff.
pub const REL_FLOOR: f64 = 1e-7;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_gradient_of_quadratic() {
        // f(x) = sum i * x_i^2, df/dx_i = 2 i x_i
        let f = |x: &[f64]| x.iter().enumerate().map(|(i, v)| i as f64 * v * v).sum();
        let x = [0.3, -1.2, 0.7];
        let numeric = central_diff_grad(f, &x, 1e-5);
        let analytic: Vec<f64> = x.iter().enumerate().map(|(i, v)| 2.0 * i as f64 * v).collect();
        assert!(max_rel_error(&analytic, &numeric, REL_FLOOR) < 1e-8);
    }

    #[test]
    fn rel_error_tolerates_shared_zeros() {
        assert_eq!(max_rel_error(&[0.0, 1.0], &[0.0, 1.0], REL_FLOOR), 0.0);
    }
}
