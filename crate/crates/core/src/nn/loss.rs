use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::scalar::{clamped_ln, Scalar};

/// Label rows must sum to one within this tolerance.
const LABEL_SUM_TOLERANCE: f64 = 1e-6;

/// Mean cross-entropy `-(1/N) sum_j sum_c y_jc ln p_jc` with the logarithm
/// clamped at `ln(1e-12)`. Labels may be one-hot or soft rows.
pub fn cross_entropy<T: Scalar>(probabilities: &Matrix<T>, labels: &Matrix<T>) -> Result<T> {
    if probabilities.rows() != labels.rows() || probabilities.cols() != labels.cols() {
        return Err(Error::input(format!(
            "probabilities {}x{} vs labels {}x{}",
            probabilities.rows(),
            probabilities.cols(),
            labels.rows(),
            labels.cols()
        )));
    }
    if probabilities.rows() == 0 {
        return Err(Error::input("cross-entropy of an empty batch"));
    }
    check_label_rows(labels)?;
    let mut total = T::zero();
    for (p, y) in probabilities.iter_rows().zip(labels.iter_rows()) {
        for (&pc, &yc) in p.iter().zip(y) {
            if yc != T::zero() {
                total -= yc * clamped_ln(pc);
            }
        }
    }
    Ok(total / T::from_usize_lossy(probabilities.rows()))
}

pub(crate) fn check_label_rows<T: Scalar>(labels: &Matrix<T>) -> Result<()> {
    for (r, row) in labels.iter_rows().enumerate() {
        let sum: T = row.iter().copied().sum();
        if (sum - T::one()).abs() > T::lit(LABEL_SUM_TOLERANCE) || row.iter().any(|&v| v < T::zero()) {
            return Err(Error::input(format!("label row {r} is not a probability vector")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_one_hot_prediction_has_zero_loss() {
        let y = Matrix::<f64>::one_hot(&[0, 2, 1], 3).unwrap();
        assert_eq!(cross_entropy(&y, &y).unwrap(), 0.0);
    }

    #[test]
    fn uniform_ten_class_loss_is_ln_ten() {
        let p = Matrix::<f64>::from_fn(4, 10, |_, _| 0.1);
        let y = Matrix::one_hot(&[0, 3, 9, 5], 10).unwrap();
        let loss = cross_entropy(&p, &y).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn soft_labels_match_direct_summation() {
        let p = Matrix::from_rows(&[vec![0.7, 0.2, 0.1], vec![0.1, 0.1, 0.8], vec![0.25, 0.5, 0.25]]).unwrap();
        let y = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![0.2, 0.3, 0.5], vec![0.5, 0.5, 0.0]]).unwrap();
        let oracle = -((0.7f64).ln()
            + (0.2 * 0.1f64.ln() + 0.3 * 0.1f64.ln() + 0.5 * 0.8f64.ln())
            + (0.5 * 0.25f64.ln() + 0.5 * 0.5f64.ln()))
            / 3.0;
        assert!((cross_entropy(&p, &y).unwrap() - oracle).abs() < 1e-12);
    }

    #[test]
    fn confident_mistake_is_clamped_and_row_mismatch_rejected() {
        let p = Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap();
        let y = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        let loss = cross_entropy(&p, &y).unwrap();
        assert!((loss + 1e-12f64.ln()).abs() < 1e-9);
        assert!(cross_entropy(&p, &Matrix::<f64>::one_hot(&[0, 1], 2).unwrap()).is_err());
    }
}
