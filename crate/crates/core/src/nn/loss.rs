use super::NnError;

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>), NnError> {
    if pred.len() != target.len() {
        return Err(NnError::Shape(vec![pred.len()], vec![target.len()]));
    }
    if pred.is_empty() {
        return Err(NnError::InsufficientData("empty prediction".into()));
    }
    let n = pred.len() as f64;
    let loss = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_values() {
        let (l, g) = mse_loss(&[1.0, 2.0], &[0.0, 0.0]).unwrap();
        assert!((l - 2.5).abs() < 1e-15);
        assert_eq!(g, vec![1.0, 2.0]);
        let (l, g) = mse_loss(&[3.0], &[3.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0]);
        assert!(mse_loss(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let p = [0.3, -1.2, 2.5];
        let t = [0.1, 0.4, 2.0];
        let (_, g) = mse_loss(&p, &t).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut a = p;
            let mut b = p;
            a[i] += h;
            b[i] -= h;
            let fd = (mse_loss(&a, &t).unwrap().0 - mse_loss(&b, &t).unwrap().0) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }
}
