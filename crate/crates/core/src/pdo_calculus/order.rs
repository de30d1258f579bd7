//! Empirical order of an operator from the decay of its column norms.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::torus_fourier::japanese;

use super::matrix::OperatorMatrix;

/// Minimum number of columns a fit window must contain.
pub const MIN_WINDOW_POINTS: usize = 8;

/// Least-squares fit of `log ||A e_xi||` against `log <xi>`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    /// Fitted order; `-inf` when every column in the window vanishes.
    pub slope: f64,
    pub intercept: f64,
    /// `(xi, log ||A e_xi||)` for the columns used in the fit.
    pub points: Vec<(i64, f64)>,
    pub window: (i64, i64),
}

impl OrderFit {
    /// `xi, log_col_norm` rows followed by a `# slope` line.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("xi,log_col_norm\n");
        for (xi, v) in &self.points {
            let _ = writeln!(s, "{xi},{v:.17e}");
        }
        let _ = writeln!(s, "# slope,{:.17e}", self.slope);
        s
    }
}

/// Order fit over the default window `4 <= |xi| <= N/8`.
pub fn estimate_order(a: &OperatorMatrix) -> Result<OrderFit> {
    estimate_order_window(a, 4, (a.grid_size() / 8) as i64, 0.0)
}

/// Order fit over `lo <= |xi| <= hi` (both signs). Columns with norm at or
/// below `floor` are left out; if fewer than two remain the slope is `-inf`.
pub fn estimate_order_window(
    a: &OperatorMatrix,
    lo: i64,
    hi: i64,
    floor: f64,
) -> Result<OrderFit> {
    let n = a.grid_size() as i64;
    let hi = hi.min(n / 2 - 1);
    let mut cols = Vec::new();
    for xi in lo..=hi {
        cols.push(-xi);
        cols.push(xi);
    }
    cols.sort_unstable();
    if cols.len() < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientWindow {
            points: cols.len(),
            needed: MIN_WINDOW_POINTS,
        });
    }
    let points: Vec<(i64, f64)> = cols
        .into_iter()
        .filter_map(|xi| {
            let v = a.column_norm(xi);
            (v > floor).then(|| (xi, v.ln()))
        })
        .collect();
    if points.len() < 2 {
        return Ok(OrderFit {
            slope: f64::NEG_INFINITY,
            intercept: f64::NEG_INFINITY,
            points,
            window: (lo, hi),
        });
    }
    let m = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|&(xi, _)| japanese(xi as f64).ln()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&points).map(|(x, p)| (x - mx) * (p.1 - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    Ok(OrderFit {
        slope,
        intercept: my - slope * mx,
        points,
        window: (lo, hi),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64 as C64;

    #[test]
    fn power_law_columns() {
        let a = OperatorMatrix::diagonal(128, 0.0, |k| C64::new(japanese(k as f64).powf(1.5), 0.0));
        let fit = estimate_order(&a).unwrap();
        assert!((fit.slope - 1.5).abs() < 1e-12);
        assert_eq!(fit.points.len(), 26);
    }

    #[test]
    fn zero_operator_has_sentinel_order() {
        let a = OperatorMatrix::zeros(128, 0.0);
        assert_eq!(estimate_order(&a).unwrap().slope, f64::NEG_INFINITY);
    }

    #[test]
    fn small_grid_is_rejected() {
        let a = OperatorMatrix::identity(32, 0.0);
        assert!(matches!(
            estimate_order(&a),
            Err(Error::InsufficientWindow { .. })
        ));
    }
}
