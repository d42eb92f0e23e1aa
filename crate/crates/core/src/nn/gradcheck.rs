use alloc::vec::Vec;

use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Coordinate where the worst error occurred.
    pub worst_index: usize,
}

/// Compare an analytic gradient against central differences.
///
/// `f` returns the value and analytic gradient at a point. The relative
/// error per coordinate is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn numeric_grad_check<F>(mut f: F, point: &[f64], step: f64) -> Result<GradCheck, NnError>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>), NnError>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(NnError::BadStep);
    }
    let (value, analytic) = f(point)?;
    if !value.is_finite() {
        return Err(NnError::NonFinite { index: 0 });
    }
    if analytic.len() != point.len() {
        return Err(NnError::DataLength {
            expected: point.len(),
            found: analytic.len(),
        });
    }
    let mut probe = point.to_vec();
    let mut worst = GradCheck {
        max_relative_error: 0.0,
        worst_index: 0,
    };
    for i in 0..point.len() {
        probe[i] = point[i] + step;
        let (plus, _) = f(&probe)?;
        probe[i] = point[i] - step;
        let (minus, _) = f(&probe)?;
        probe[i] = point[i];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(NnError::NonFinite { index: i });
        }
        let numeric = (plus - minus) / (2.0 * step);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
        if rel > worst.max_relative_error {
            worst = GradCheck {
                max_relative_error: rel,
                worst_index: i,
            };
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn quadratic(w: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
        Ok((
            w.iter().map(|v| v * v).sum(),
            w.iter().map(|v| 2.0 * v).collect(),
        ))
    }

    #[test]
    fn exact_on_quadratic() {
        let c = numeric_grad_check(quadratic, &[0.3, -1.7, 2.5, 10.0], 1e-4).unwrap();
        assert!(c.max_relative_error < 1e-7);
    }

    #[test]
    fn doubled_gradient_is_caught() {
        let wrong = |w: &[f64]| {
            let (v, g) = quadratic(w)?;
            Ok((v, g.into_iter().map(|x| 2.0 * x).collect()))
        };
        let c = numeric_grad_check(wrong, &[0.3, -1.7, 2.5], 1e-4).unwrap();
        assert!((c.max_relative_error - 0.5).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_step_and_nan() {
        assert_eq!(
            numeric_grad_check(quadratic, &[1.0], 0.0),
            Err(NnError::BadStep)
        );
        let nan = |_: &[f64]| Ok((f64::NAN, vec![0.0]));
        assert!(numeric_grad_check(nan, &[1.0], 1e-4).is_err());
    }
}
