/// Index of the earliest evaluation point from which every later value
/// (up to `horizon` of them, or all when `None`) stays within
/// `±band · |value|` of that point. A point needs at least one successor,
/// and a full horizon of them when one is given.
pub fn check_convergence(values: &[f64], band: f64, horizon: Option<usize>) -> Option<usize> {
    let n = values.len();
    (0..n).find(|&i| {
        let end = match horizon {
            Some(h) if i + h < n => i + h + 1,
            Some(_) => return false,
            None => n,
        };
        if end <= i + 1 {
            return false;
        }
        let v = values[i];
        let tol = band * v.abs();
        values[i + 1..end].iter().all(|x| (x - v).abs() <= tol + 1e-12)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_converges_at_start() {
        assert_eq!(check_convergence(&[3.0; 6], 0.1, None), Some(0));
    }

    #[test]
    fn band_rule() {
        assert_eq!(check_convergence(&[1.0, 2.0, 2.05, 1.95, 2.0], 0.1, None), Some(1));
    }

    #[test]
    fn doubling_never_converges() {
        let v: Vec<f64> = (0..12).map(|i| 2f64.powi(i)).collect();
        assert_eq!(check_convergence(&v, 0.1, None), None);
    }

    #[test]
    fn horizon_limits_lookahead() {
        let v = [1.0, 1.05, 0.95, 5.0, 5.1];
        assert_eq!(check_convergence(&v, 0.1, Some(2)), Some(0));
        assert_eq!(check_convergence(&v, 0.1, None), Some(3));
        assert_eq!(check_convergence(&[1.0], 0.1, None), None);
    }

    #[test]
    fn negative_values_use_magnitude() {
        assert_eq!(check_convergence(&[-5.0, -2.0, -2.1, -1.9], 0.1, None), Some(1));
    }
}
