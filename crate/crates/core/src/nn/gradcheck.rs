/// Central-difference gradient of `f` at `params`, one coordinate at a time.
pub fn finite_diff_grad<F>(mut f: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let original = probe[i];
            probe[i] = original + h;
            let plus = f(&probe);
            probe[i] = original - h;
            let minus = f(&probe);
            probe[i] = original;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// Magnitudes below this are compared absolutely rather than relatively,
/// so that exact zeros and round-off sized gradients do not blow up the ratio.
const RELATIVE_FLOOR: f64 = 1e-4;

/// `|a - b| / max(|a|, |b|, 1e-4)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len(), "gradient length mismatch");
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_three() {
        let g = finite_diff_grad(|p| p[0] * p[0], &[3.0], 1e-5);
        assert!((g[0] - 6.0).abs() < 1e-6);
    }

    #[test]
    fn constant_has_zero_gradient() {
        let g = finite_diff_grad(|_| 4.2, &[1.0, -2.0, 0.5], 1e-5);
        assert_eq!(g, vec![0.0; 3]);
    }

    #[test]
    fn multivariate_polynomial() {
        // f = x²y + sin(z)
        let f = |p: &[f64]| p[0] * p[0] * p[1] + p[2].sin();
        let p = [1.5, -2.0, 0.3];
        let g = finite_diff_grad(f, &p, 1e-5);
        let exact = [2.0 * 1.5 * -2.0, 1.5 * 1.5, 0.3f64.cos()];
        assert!(max_relative_error(&g, &exact) < 1e-8);
    }

    #[test]
    fn relative_error_floor() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
        assert!(relative_error(1e-12, 2e-12) < 1e-7);
        assert!((relative_error(1.0, 1.1) - 0.1 / 1.1).abs() < 1e-15);
    }
}
