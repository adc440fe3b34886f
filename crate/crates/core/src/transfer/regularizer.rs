use crate::{Error, Result};

/// `λ · Σ (θ − θ_base)²` and its gradient `2λ (θ − θ_base)`.
pub fn l2_to_base(theta: &[f64], theta_base: &[f64], lambda: f64) -> Result<(f64, Vec<f64>)> {
    if theta.len() != theta_base.len() {
        return Err(Error::Dimension(format!(
            "regularizer over {} vs {} parameters",
            theta.len(),
            theta_base.len()
        )));
    }
    if lambda == 0.0 {
        return Ok((0.0, vec![0.0; theta.len()]));
    }
    let mut penalty = 0.0;
    let grad = theta
        .iter()
        .zip(theta_base)
        .map(|(t, b)| {
            let d = t - b;
            penalty += d * d;
            2.0 * lambda * d
        })
        .collect();
    Ok((lambda * penalty, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_parameters_cost_nothing() {
        let (p, g) = l2_to_base(&[1.0, -2.0], &[1.0, -2.0], 3.0).unwrap();
        assert_eq!(p, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn zero_lambda_contributes_nothing() {
        let (p, g) = l2_to_base(&[5.0], &[1.0], 0.0).unwrap();
        assert_eq!((p, g), (0.0, vec![0.0]));
    }

    #[test]
    fn scalar_by_hand() {
        let (p, g) = l2_to_base(&[3.0], &[1.0], 0.5).unwrap();
        assert_eq!(p, 2.0);
        assert_eq!(g, vec![2.0]);
    }

    #[test]
    fn shape_mismatch() {
        assert!(matches!(l2_to_base(&[1.0], &[1.0, 2.0], 1.0), Err(Error::Dimension(_))));
    }
}
