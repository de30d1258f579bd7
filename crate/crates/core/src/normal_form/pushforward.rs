//! Push-forward of a vector field `X(t)` through a family of invertible
//! maps: `Phi(t)^{-1} (X(t) Phi(t) - d_t Phi(t))`.

use crate::error::{Error, Result};
use crate::pdo_calculus::OperatorMatrix;

/// Push-forward values with a flag per sample marking one-sided differences.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub values: Vec<OperatorMatrix>,
    pub one_sided: Vec<bool>,
}

/// `d_t Phi` at sample `j` of a uniform family: central in the interior,
/// second-order one-sided at the ends (first-order with only two samples).
fn time_derivative(phis: &[OperatorMatrix], j: usize, h: f64) -> Result<(OperatorMatrix, bool)> {
    let len = phis.len();
    if len == 1 {
        return Ok((OperatorMatrix::zeros(phis[0].grid_size(), phis[0].time()), false));
    }
    let c = |v: f64| num_complex::Complex64::new(v / h, 0.0);
    if j > 0 && j + 1 < len {
        return Ok((phis[j + 1].sub(&phis[j - 1])?.scale(c(0.5)), false));
    }
    if len == 2 {
        return Ok((phis[1].sub(&phis[0])?.scale(c(1.0)), true));
    }
    let (a, b, s) = if j == 0 { (1, 2, 1.0) } else { (len - 2, len - 3, -1.0) };
    // (-3 f_j + 4 f_{j+-1} - f_{j+-2}) / (+-2h)
    let d = phis[a]
        .scale(c(2.0 * s))
        .sub(&phis[j].scale(c(1.5 * s)))?
        .sub(&phis[b].scale(c(0.5 * s)))?;
    Ok((d, true))
}

/// Push-forward of the family `xs` through `phis`, both sampled at the same
/// uniform times with spacing `h_t`. A single sample is treated as
/// time-independent.
pub fn pushforward(xs: &[OperatorMatrix], phis: &[OperatorMatrix], h_t: f64) -> Result<Pushforward> {
    if xs.len() != phis.len() || xs.is_empty() {
        return Err(Error::Dimension(format!(
            "{} fields against {} maps",
            xs.len(),
            phis.len()
        )));
    }
    if phis.len() > 1 && !(h_t > 0.0) {
        return Err(Error::Contract(format!("h_t = {h_t} must be positive")));
    }
    let mut values = Vec::with_capacity(xs.len());
    let mut one_sided = Vec::with_capacity(xs.len());
    for (j, (x, phi)) in xs.iter().zip(phis).enumerate() {
        let (d, flag) = time_derivative(phis, j, h_t)?;
        let inv = phi.inverse()?;
        values.push(inv.matmul(&x.matmul(phi)?.sub(&d)?)?.with_time(x.time()));
        one_sided.push(flag);
    }
    Ok(Pushforward { values, one_sided })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pdo_calculus::exp_i_hermitian;
    use num_complex::Complex64 as C64;

    fn field(n: usize, t: f64) -> OperatorMatrix {
        OperatorMatrix::from_modes(n, t, |a, b| {
            let v = 1.0 / (1.0 + (a - b).abs() as f64) + if a == b { a as f64 } else { 0.0 };
            C64::new(v, 0.1 * (a - b) as f64 * t.cos())
        })
    }

    #[test]
    fn identity_map_leaves_field_unchanged() {
        let xs: Vec<_> = (0..4).map(|j| field(8, 0.1 * j as f64)).collect();
        let ids: Vec<_> = (0..4).map(|j| OperatorMatrix::identity(8, 0.1 * j as f64)).collect();
        let p = pushforward(&xs, &ids, 0.1).unwrap();
        for (a, b) in p.values.iter().zip(&xs) {
            assert_eq!(a.sub(b).unwrap().max_abs(), 0.0);
        }
        assert_eq!(p.one_sided, vec![true, false, false, true]);
    }

    #[test]
    fn hamiltonian_fields_stay_hamiltonian() {
        let n = 16;
        let h = 1e-4;
        let ts: Vec<f64> = (0..5).map(|j| 0.3 + h * j as f64).collect();
        let xs: Vec<_> = ts
            .iter()
            .map(|&t| field(n, t).hermitian_part().scale(C64::new(0.0, 1.0)))
            .collect();
        let phis: Vec<_> = ts
            .iter()
            .map(|&t| {
                let g = OperatorMatrix::from_modes(n, t, |a, b| {
                    C64::new((t + 0.1 * (a + b) as f64).cos() / (1.0 + ((a - b) * (a - b)) as f64), 0.0)
                })
                .hermitian_part();
                exp_i_hermitian(&g, 1.0).unwrap()
            })
            .collect();
        let p = pushforward(&xs, &phis, h).unwrap();
        for v in &p.values[1..4] {
            let herm = v.scale(C64::new(0.0, -1.0));
            let r = herm.hermiticity_residual();
            assert!(r < 1e-8 * herm.max_abs().max(1.0), "{r}");
        }
    }

    #[test]
    fn constant_map_zero_field() {
        let phi = exp_i_hermitian(&field(8, 0.0).hermitian_part(), 0.5).unwrap();
        let p = pushforward(&[OperatorMatrix::zeros(8, 0.0)], &[phi], 0.0).unwrap();
        assert!(p.values[0].max_abs() < 1e-15);
    }
}
