use ndarray::{Array2, ArrayView2};

use super::NetError;

/// Mean squared error and its gradient `2(pred - target)/n`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NetError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(NetError::Shape(format!(
            "mse over {} predictions and {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

/// Matrix form of [`mse_loss`], averaging over every element.
pub fn mse_loss_batch(pred: ArrayView2<f64>, target: ArrayView2<f64>) -> Result<(f64, Array2<f64>), NetError> {
    if pred.raw_dim() != target.raw_dim() || pred.is_empty() {
        return Err(NetError::Shape(format!("mse over {:?} and {:?}", pred.shape(), target.shape())));
    }
    let n = pred.len() as f64;
    let diff = &pred - &target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(mse_loss(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), (0.0, vec![0.0, 0.0]));
        assert_eq!(mse_loss(&[1.0], &[0.0]).unwrap(), (1.0, vec![2.0]));
        assert!(mse_loss(&[1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let pred = [0.3, -1.2, 2.5, 0.0];
        let target = [1.0, -1.0, 0.5, 0.25];
        let (_, grad) = mse_loss(&pred, &target).unwrap();
        let h = 1e-6;
        for i in 0..pred.len() {
            let mut plus = pred;
            let mut minus = pred;
            plus[i] += h;
            minus[i] -= h;
            let fd = (mse_loss(&plus, &target).unwrap().0 - mse_loss(&minus, &target).unwrap().0) / (2.0 * h);
            assert!((fd - grad[i]).abs() < 1e-6);
        }
    }
}
