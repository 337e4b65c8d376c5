//! Diagonal expansive dilation matrices.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

const EXPANSIVE_MARGIN: f64 = 1e-12;

/// Diagonal matrix `M = diag(λ_1, ..., λ_d)` with every `|λ_i| > 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilationMatrix {
    diag: Vec<f64>,
}

/// Diagonal of `M^j` for an arbitrary integer `j`; not necessarily expansive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalPower {
    pub diag: Vec<f64>,
}

impl DilationMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(invalid("dilation matrix needs at least one diagonal entry"));
        }
        if let Some(bad) = diag
            .iter()
            .find(|l| !l.is_finite() || l.abs() <= 1.0 + EXPANSIVE_MARGIN)
        {
            return Err(invalid(format!(
                "dilation entry {bad} is not expansive (|λ| must exceed 1)"
            )));
        }
        Ok(Self { diag })
    }

    pub fn isotropic(dim: usize, lambda: f64) -> Result<Self> {
        Self::new(vec![lambda; dim])
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn power(&self, j: i32) -> DiagonalPower {
        DiagonalPower {
            diag: self.diag.iter().map(|l| l.powi(j)).collect(),
        }
    }

    /// `‖M^{-j}‖ = max_i |λ_i|^{-j}` for `j ≥ 0`.
    pub fn op_norm_inverse_power(&self, j: u32) -> f64 {
        self.diag
            .iter()
            .map(|l| l.abs().powi(-(j as i32)))
            .fold(0.0, f64::max)
    }

    /// `‖M^j‖ = max_i |λ_i|^j`.
    pub fn op_norm_power(&self, j: u32) -> f64 {
        self.diag
            .iter()
            .map(|l| l.abs().powi(j as i32))
            .fold(0.0, f64::max)
    }

    /// `m = |det M|`.
    pub fn det_abs(&self) -> f64 {
        self.diag.iter().map(|l| l.abs()).product()
    }

    /// Smallest diagonal entry in modulus; the eigenvalue floor `ϑ`.
    pub fn min_abs(&self) -> f64 {
        self.diag.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min)
    }
}

impl DiagonalPower {
    pub fn identity(dim: usize) -> Self {
        Self {
            diag: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.diag).map(|(a, l)| a * l).collect()
    }

    pub fn op_norm(&self) -> f64 {
        self.diag.iter().map(|l| l.abs()).fold(0.0, f64::max)
    }

    pub fn det_abs(&self) -> f64 {
        self.diag.iter().map(|l| l.abs()).product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn powers() {
        let m = DilationMatrix::new(vec![2.0, 2.0]).unwrap();
        assert_eq!(m.power(3).diag, vec![8.0, 8.0]);
        let m = DilationMatrix::new(vec![2.0, 3.0]).unwrap();
        let inv = m.power(-1).diag;
        assert_eq!(inv[0], 0.5);
        assert!((inv[1] - 1.0 / 3.0).abs() < 1e-16);
        assert_eq!(m.power(0), DiagonalPower::identity(2));
    }

    #[test]
    fn inverse_power_norms() {
        let m = DilationMatrix::new(vec![2.0, 3.0]).unwrap();
        assert_eq!(m.op_norm_inverse_power(2), 0.25);
        assert_eq!(DilationMatrix::new(vec![2.0]).unwrap().op_norm_inverse_power(0), 1.0);
        assert_eq!(DilationMatrix::new(vec![-2.0, 4.0]).unwrap().op_norm_inverse_power(1), 0.5);
    }

    #[test]
    fn determinants() {
        assert_eq!(DilationMatrix::new(vec![2.0, 2.0]).unwrap().det_abs(), 4.0);
        assert_eq!(DilationMatrix::new(vec![2.0, 3.0]).unwrap().det_abs(), 6.0);
        assert_eq!(DilationMatrix::new(vec![-2.0]).unwrap().det_abs(), 2.0);
    }

    #[test]
    fn rejects_non_expansive() {
        assert!(DilationMatrix::new(vec![]).is_err());
        assert!(DilationMatrix::new(vec![2.0, 1.0]).is_err());
        assert!(DilationMatrix::new(vec![1.0 + 1e-13]).is_err());
        assert!(DilationMatrix::new(vec![-0.5]).is_err());
        assert!(DilationMatrix::new(vec![f64::NAN]).is_err());
    }

    fn matrix() -> impl Strategy<Value = DilationMatrix> {
        prop::collection::vec((1.01f64..5.0, any::<bool>()), 1..4).prop_map(|v| {
            DilationMatrix::new(v.into_iter().map(|(l, s)| if s { -l } else { l }).collect())
                .unwrap()
        })
    }

    proptest! {
        #[test]
        fn norm_product_at_least_one(m in matrix(), j in 0u32..6) {
            let prod = m.op_norm_inverse_power(j) * m.op_norm_power(j);
            prop_assert!(prod >= 1.0 - 1e-12);
            let all_equal = m.diag().iter().all(|l| (l.abs() - m.diag()[0].abs()).abs() < 1e-15);
            if all_equal {
                prop_assert!((prod - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn inverse_norm_matches_floor(m in matrix(), j in 0u32..6) {
            let lhs = m.op_norm_inverse_power(j);
            let rhs = m.min_abs().powi(-(j as i32));
            prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs);
        }

        #[test]
        fn det_of_power(m in matrix(), j in 0i32..5) {
            let lhs = m.power(j).det_abs();
            let rhs = m.det_abs().powi(j);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs);
        }
    }
}
