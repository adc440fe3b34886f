//! Central finite-difference gradient checking.

use crate::{Error, Result};

/// Denominator floor used by [`relative_error`]; gradients smaller than this
/// are compared in absolute terms.
pub const GRAD_CHECK_FLOOR: f64 = 1e-4;

/// Result of one loss evaluation during a gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    /// Signs of every piecewise-linear pre-activation, if the model has any.
    /// When a perturbation flips a sign the entry straddles a kink and is
    /// skipped.
    pub kink_pattern: Option<Vec<bool>>,
}

impl Evaluation {
    pub fn smooth(loss: f64) -> Self {
        Self {
            loss,
            kink_pattern: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst_index: Option<usize>,
    pub checked: usize,
    pub skipped_kinks: usize,
}

/// `|a − n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR)
}

/// Compares `analytic` against central differences of `eval` around `params`.
///
/// `eval` must be a pure function of the parameter vector it receives.
pub fn grad_check<F>(params: &[f64], analytic: &[f64], h: f64, mut eval: F) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Evaluation,
{
    if !(1e-8..=1e-4).contains(&h) {
        return Err(Error::Argument(format!("finite-difference step {h} outside [1e-8, 1e-4]")));
    }
    if params.len() != analytic.len() {
        return Err(Error::Dimension(format!(
            "{} parameters but {} gradient entries",
            params.len(),
            analytic.len()
        )));
    }

    let centre = eval(params).kink_pattern;
    let mut probe = params.to_vec();
    let mut report = GradCheckReport {
        max_relative_error: 0.0,
        worst_index: None,
        checked: 0,
        skipped_kinks: 0,
    };
    for i in 0..params.len() {
        probe[i] = params[i] + h;
        let plus = eval(&probe);
        probe[i] = params[i] - h;
        let minus = eval(&probe);
        probe[i] = params[i];

        if plus.kink_pattern != centre || minus.kink_pattern != centre {
            report.skipped_kinks += 1;
            continue;
        }
        let numeric = (plus.loss - minus.loss) / (2.0 * h);
        let err = relative_error(analytic[i], numeric);
        report.checked += 1;
        if err > report.max_relative_error || report.worst_index.is_none() {
            report.max_relative_error = err;
            report.worst_index = Some(i);
        }
    }
    Ok(report)
}
