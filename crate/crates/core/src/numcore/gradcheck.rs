/// Step used for central differences.
pub const DEFAULT_EPS: f64 = 1e-5;

/// Relative errors are measured against `max(|analytic|, |numeric|, REL_FLOOR)`
/// so that near-zero gradients are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    /// Coordinate with the largest error.
    pub worst_index: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` against central finite differences of `loss` at
/// `point`, coordinate by coordinate.
///
/// Intended for tiny problems: `loss` is evaluated `2 * point.len()` times.
pub fn grad_check(
    point: &[f64],
    analytic: &[f64],
    eps: f64,
    tolerance: f64,
    mut loss: impl FnMut(&[f64]) -> f64,
) -> GradCheckReport {
    assert_eq!(
        point.len(),
        analytic.len(),
        "grad_check: gradient length mismatch"
    );
    let mut probe = point.to_vec();
    let mut max_rel_error: f64 = 0.0;
    let mut worst_index = 0;
    for i in 0..point.len() {
        probe[i] = point[i] + eps;
        let plus = loss(&probe);
        probe[i] = point[i] - eps;
        let minus = loss(&probe);
        probe[i] = point[i];
        let numeric = (plus - minus) / (2.0 * eps);
        let err = relative_error(analytic[i], numeric);
        if err > max_rel_error || err.is_nan() {
            max_rel_error = err;
            worst_index = i;
        }
    }
    GradCheckReport {
        checked: point.len(),
        max_rel_error,
        worst_index,
        tolerance,
        passed: max_rel_error <= tolerance,
    }
}
