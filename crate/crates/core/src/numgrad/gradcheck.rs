//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};

pub const FD_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared in absolute terms: the
/// relative error denominator is `max(|analytic|, |numeric|, REL_FLOOR)`.
pub const REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compares `analytic` with central differences of `loss` around `params`
/// coordinate by coordinate.
pub fn gradient_check<F>(params: &[f64], analytic: &[f64], loss: F, tolerance: f64) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    gradient_check_with_step(params, analytic, loss, tolerance, FD_STEP)
}

/// [`gradient_check`] with an explicit step. Rounding in the difference grows
/// like `ulp(loss) / step`, so losses summed over many tokens want a larger
/// step than [`FD_STEP`].
pub fn gradient_check_with_step<F>(
    params: &[f64],
    analytic: &[f64],
    mut loss: F,
    tolerance: f64,
    step: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidConfig(format!("finite-difference step {step}")));
    }
    if params.len() != analytic.len() {
        return Err(Error::Dimension(format!("{} params, {} gradient entries", params.len(), analytic.len())));
    }
    let base = loss(params);
    if !base.is_finite() {
        return Err(Error::NonFinite(format!("loss {base} at the check point")));
    }
    let mut point = params.to_vec();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst_index: 0,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: params.len(),
        tolerance,
        passed: true,
    };
    for k in 0..params.len() {
        point[k] = params[k] + step;
        let up = loss(&point);
        point[k] = params[k] - step;
        let down = loss(&point);
        point[k] = params[k];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::NonFinite(format!("loss around coordinate {k}")));
        }
        let numeric = (up - down) / (2.0 * step);
        let err = relative_error(analytic[k], numeric);
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_index = k;
            report.analytic_at_worst = analytic[k];
            report.numeric_at_worst = numeric;
        }
    }
    report.passed = report.max_rel_error <= tolerance;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn half_norm(p: &[f64]) -> f64 {
        0.5 * p.iter().map(|v| v * v).sum::<f64>()
    }

    #[test]
    fn quadratic_is_exact_up_to_rounding() {
        let p = [0.3, -1.7, 2.5, 0.01];
        let report = gradient_check(&p, &p, half_norm, 1e-8).unwrap();
        assert!(report.passed);
        assert!(report.max_rel_error < 1e-8, "{report:?}");
    }

    #[test]
    fn corrupted_gradient_fails() {
        let p = [0.3, -1.7, 2.5];
        let mut bad = p;
        bad[1] *= 2.0;
        let report = gradient_check(&p, &bad, half_norm, 1e-5).unwrap();
        assert!(!report.passed);
        assert_eq!(report.worst_index, 1);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        assert!(gradient_check(&[1.0], &[0.0], |_| f64::NAN, 1e-5).is_err());
        assert!(gradient_check(&[1.0], &[0.0, 1.0], half_norm, 1e-5).is_err());
    }
}
