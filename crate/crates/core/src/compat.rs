//! Numerical checks of strict and weak compatibility between `φ` and `φ̃`, and of the
//! Strang–Fix conditions.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::kernels::{BandLimitedKernel, DualFunctional};
use crate::quad::binomial;

/// An approximation order that may be unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    Finite(u32),
    Infinite,
}

impl Order {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Order::Infinite)
    }
}

impl std::fmt::Display for Order {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Order::Finite(n) => write!(f, "{n}"),
            Order::Infinite => write!(f, "inf"),
        }
    }
}

impl Serialize for Order {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Order::Finite(n) => s.serialize_u32(*n),
            Order::Infinite => s.serialize_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StrictCheck {
    pub pass: bool,
    pub defect: f64,
    pub points: usize,
}

/// `max |conj(φ̂) φ̃̂ − 1|` over a tensor grid of `[-δ, δ]^d` intersected with `|ξ| ≤ δ`.
pub fn check_strict(
    phi: &BandLimitedKernel,
    dual: &DualFunctional,
    delta: f64,
    grid_pts: usize,
    tol: f64,
) -> Result<StrictCheck> {
    if !(delta > 0.0) {
        return Err(invalid(format!("δ must be positive, got {delta}")));
    }
    if grid_pts < 3 {
        return Err(invalid("strict check needs at least 3 grid points per axis"));
    }
    let d = phi.dim();
    let step = 2.0 * delta / (grid_pts - 1) as f64;
    let mut defect: f64 = 0.0;
    let mut points = 0;
    let mut xi = vec![0.0; d];
    for flat in 0..grid_pts.pow(d as u32) {
        let mut rem = flat;
        for v in xi.iter_mut() {
            *v = -delta + step * (rem % grid_pts) as f64;
            rem /= grid_pts;
        }
        if xi.iter().map(|v| v * v).sum::<f64>() > delta * delta * (1.0 + 1e-12) {
            continue;
        }
        points += 1;
        let v = phi.spectrum(&xi).conj() * dual.spectrum(&xi) - 1.0;
        defect = defect.max(v.norm());
    }
    Ok(StrictCheck {
        pass: defect <= tol,
        defect,
        points,
    })
}

/// All multi-indices `β ∈ N^d` with `[β] = order`.
pub fn multi_indices(dim: usize, order: u32) -> Vec<Vec<u32>> {
    if dim == 1 {
        return vec![vec![order]];
    }
    let mut out = Vec::new();
    for first in (0..=order).rev() {
        for mut rest in multi_indices(dim - 1, order - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

fn beta_label(beta: &[u32]) -> String {
    let parts: Vec<String> = beta.iter().map(|b| b.to_string()).collect();
    format!("({})", parts.join(","))
}

/// Nested central difference `∏_i δ_{h}^{β_i}` of `f` at `at`, divided by `h^{[β]}`.
fn central_difference(f: &dyn Fn(&[f64]) -> Complex64, at: &[f64], beta: &[u32], h: f64) -> Complex64 {
    let d = at.len();
    let sizes: Vec<usize> = beta.iter().map(|&b| b as usize + 1).collect();
    let total: usize = sizes.iter().product();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut x = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        let mut w = 1.0;
        for i in 0..d {
            let k = rem % sizes[i];
            rem /= sizes[i];
            let m = beta[i];
            w *= if k.is_multiple_of(2) { 1.0 } else { -1.0 } * binomial(m, k as u32);
            x[i] = at[i] + (0.5 * m as f64 - k as f64) * h;
        }
        acc += f(&x) * w;
    }
    acc / h.powi(beta.iter().sum::<u32>() as i32)
}

/// `D^β f(at)` from central differences at `h, h/2, h/4`, with the `h²` and `h⁴` terms
/// eliminated.
pub fn richardson_derivative(f: &dyn Fn(&[f64]) -> Complex64, at: &[f64], beta: &[u32], h: f64) -> Complex64 {
    let d0 = central_difference(f, at, beta, h);
    let d1 = central_difference(f, at, beta, 0.5 * h);
    let d2 = central_difference(f, at, beta, 0.25 * h);
    let r0 = (4.0 * d1 - d0) / 3.0;
    let r1 = (4.0 * d2 - d1) / 3.0;
    (16.0 * r1 - r0) / 15.0
}

/// Weak order detection with the finite-difference table it was decided from.
#[derive(Debug, Clone, Serialize)]
pub struct WeakOrder {
    pub order: u32,
    /// `β` → `[re, im]` of `D^β(1 − φ̂ conj(φ̃̂))(0)`.
    pub derivative_table: BTreeMap<String, [f64; 2]>,
    /// Radius around the origin where both spectra were taken to be smooth.
    pub smooth_radius: f64,
}

/// Largest `n ≤ n_max` with `|D^β(1 − φ̂ conj(φ̃̂))(0)| ≤ tol` for all `[β] < n`.
pub fn detect_weak_order(
    phi: &BandLimitedKernel,
    dual: &DualFunctional,
    n_max: u32,
    h0: f64,
    tol: f64,
) -> Result<WeakOrder> {
    if n_max < 1 {
        return Err(invalid("n_max must be at least 1"));
    }
    if !(h0 > 0.0) {
        return Err(invalid("finite-difference step must be positive"));
    }
    let d = phi.dim();
    let eps = phi.profile().smooth_radius().min(dual.smooth_radius());
    let u = |xi: &[f64]| Complex64::new(1.0, 0.0) - phi.spectrum(xi) * dual.spectrum(xi).conj();
    let mut table = BTreeMap::new();
    let origin = vec![0.0; d];
    for m in 0..n_max {
        let mut failed = false;
        for beta in multi_indices(d, m) {
            let reach = beta
                .iter()
                .map(|&b| (0.5 * b as f64 * h0).powi(2))
                .sum::<f64>()
                .sqrt();
            if reach >= eps {
                return Err(Error::InvalidParameter(format!(
                    "difference stencil for β={} reaches |ξ|={reach:.3}, outside the smooth region |ξ|<{eps}",
                    beta_label(&beta)
                )));
            }
            let v = richardson_derivative(&u, &origin, &beta, h0);
            table.insert(beta_label(&beta), [v.re, v.im]);
            if v.norm() > tol {
                failed = true;
            }
        }
        if failed {
            return Ok(WeakOrder {
                order: m,
                derivative_table: table,
                smooth_radius: eps,
            });
        }
    }
    Ok(WeakOrder {
        order: n_max,
        derivative_table: table,
        smooth_radius: eps,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct StrangFix {
    pub order: Order,
    /// First lattice point where `θ` does not vanish nearby, if any.
    pub witness: Option<Vec<i64>>,
}

/// Strang–Fix order of `φ` from the lattice points `0 < |l|_∞ ≤ lattice_radius`.
/// Returns `Infinite` when `θ` vanishes on a neighbourhood of every such point, otherwise the
/// smallest derivative order (capped at `n`) that is nonzero at some `l`.
pub fn check_strang_fix(phi: &BandLimitedKernel, lattice_radius: u32, n: u32, tol: f64) -> Result<StrangFix> {
    if lattice_radius < 1 {
        return Err(invalid("lattice radius must be at least 1"));
    }
    let d = phi.dim();
    let r = lattice_radius as i64;
    let side = (2 * r + 1) as usize;
    const NEIGHBOURHOOD: f64 = 0.05;
    const PTS: usize = 9;
    let theta = |xi: &[f64]| phi.spectrum(xi);
    let mut best: Option<(u32, Vec<i64>)> = None;
    let mut x = vec![0.0; d];
    for flat in 0..side.pow(d as u32) {
        let mut rem = flat;
        let l: Vec<i64> = (0..d)
            .map(|_| {
                let v = (rem % side) as i64 - r;
                rem /= side;
                v
            })
            .collect();
        if l.iter().all(|&v| v == 0) {
            continue;
        }
        let mut vanishes = true;
        for g in 0..PTS.pow(d as u32) {
            let mut rem = g;
            for (xi, &li) in x.iter_mut().zip(&l) {
                let k = rem % PTS;
                rem /= PTS;
                *xi = li as f64 + NEIGHBOURHOOD * (2.0 * k as f64 / (PTS - 1) as f64 - 1.0);
            }
            if theta(&x).norm() > tol {
                vanishes = false;
                break;
            }
        }
        if vanishes {
            continue;
        }
        let at: Vec<f64> = l.iter().map(|&v| v as f64).collect();
        let mut order = n;
        'orders: for m in 0..n {
            for beta in multi_indices(d, m) {
                if richardson_derivative(&theta, &at, &beta, 0.02).norm() > tol {
                    order = m;
                    break 'orders;
                }
            }
        }
        if best.as_ref().is_none_or(|(o, _)| order < *o) {
            best = Some((order, l));
        }
    }
    Ok(match best {
        None => StrangFix {
            order: Order::Infinite,
            witness: None,
        },
        Some((o, l)) => StrangFix {
            order: Order::Finite(o),
            witness: Some(l),
        },
    })
}

/// Combined compatibility audit of a pair.
#[derive(Debug, Clone, Serialize)]
pub struct CompatReport {
    pub kernel: String,
    pub dual: String,
    pub delta: f64,
    pub strict_pass: bool,
    pub strict_defect: f64,
    pub weak_order_detected: Order,
    pub derivative_table: BTreeMap<String, [f64; 2]>,
    pub strang_fix_order: Order,
    pub smooth_radius: f64,
}

#[derive(Debug, Clone)]
pub struct CompatOptions {
    pub grid_pts: usize,
    pub strict_tol: f64,
    pub n_max: u32,
    pub h0: f64,
    pub weak_tol: f64,
    pub lattice_radius: u32,
}

impl Default for CompatOptions {
    fn default() -> Self {
        Self {
            grid_pts: 33,
            strict_tol: 1e-12,
            n_max: 6,
            h0: 0.04,
            weak_tol: 1e-6,
            lattice_radius: 2,
        }
    }
}

pub fn audit(
    phi: &BandLimitedKernel,
    dual: &DualFunctional,
    delta: f64,
    opts: &CompatOptions,
) -> Result<CompatReport> {
    let strict = check_strict(phi, dual, delta, opts.grid_pts, opts.strict_tol)?;
    let weak = detect_weak_order(phi, dual, opts.n_max, opts.h0, opts.weak_tol)?;
    let sf = check_strang_fix(phi, opts.lattice_radius, opts.n_max, opts.weak_tol)?;
    Ok(CompatReport {
        kernel: phi.id().to_string(),
        dual: dual.id(),
        delta,
        strict_pass: strict.pass,
        strict_defect: strict.defect,
        weak_order_detected: if strict.pass {
            Order::Infinite
        } else {
            Order::Finite(weak.order)
        },
        derivative_table: weak.derivative_table,
        strang_fix_order: sf.order,
        smooth_radius: weak.smooth_radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(d: usize) -> BandLimitedKernel {
        BandLimitedKernel::flat_top(d, 0.25, 0.45).unwrap()
    }

    #[test]
    fn multi_index_counts() {
        assert_eq!(multi_indices(1, 3), vec![vec![3]]);
        assert_eq!(multi_indices(2, 2).len(), 3);
        assert_eq!(multi_indices(3, 2).len(), 6);
    }

    #[test]
    fn strict_examples() {
        for d in [1, 2] {
            let r = check_strict(&flat(d), &DualFunctional::Dirac, 0.25, 33, 1e-12).unwrap();
            assert!(r.pass);
            assert_eq!(r.defect, 0.0);
            let s = BandLimitedKernel::sinc_tensor(d).unwrap();
            assert!(check_strict(&s, &DualFunctional::Dirac, 0.25, 33, 1e-12).unwrap().pass);
            let b = check_strict(&flat(d), &DualFunctional::BoxAverage, 0.25, 33, 1e-6).unwrap();
            assert!(!b.pass);
            assert!(b.defect > 0.0);
        }
        // d = 1: |e^{-πiξ} sinc ξ - 1| grows with |ξ|, so the worst grid point is ξ = ±δ
        let b = check_strict(&flat(1), &DualFunctional::BoxAverage, 0.25, 33, 1e-6).unwrap();
        let z = Complex64::from_polar(1.0, -std::f64::consts::PI * 0.25)
            * ((std::f64::consts::PI * 0.25).sin() / (std::f64::consts::PI * 0.25));
        assert!((b.defect - (z - 1.0).norm()).abs() < 1e-14);
        assert!(check_strict(&flat(1), &DualFunctional::Dirac, 0.0, 33, 1e-12).is_err());
        assert!(check_strict(&flat(1), &DualFunctional::Dirac, 0.2, 2, 1e-12).is_err());
    }

    #[test]
    fn richardson_recovers_polynomial_derivatives() {
        let f = |x: &[f64]| Complex64::new(x[0].powi(3) * x[1] + 2.0 * x[1].powi(2), 0.0);
        let v = richardson_derivative(&f, &[0.3, -0.2], &[2, 1], 0.1);
        assert!((v.re - 6.0 * 0.3).abs() < 1e-9);
        let v = richardson_derivative(&f, &[0.3, -0.2], &[0, 2], 0.1);
        assert!((v.re - 4.0).abs() < 1e-9);
    }

    #[test]
    fn weak_order_of_constructed_kernels() {
        for d in [1, 2] {
            for n in 1..=3 {
                let k = BandLimitedKernel::weak(d, n, 0.25, 0.45).unwrap();
                let w = detect_weak_order(&k, &DualFunctional::Dirac, 6, 0.04, 1e-6).unwrap();
                assert_eq!(w.order, n, "d={d} n={n}: {:?}", w.derivative_table);
            }
            let w = detect_weak_order(&flat(d), &DualFunctional::Dirac, 6, 0.04, 1e-6).unwrap();
            assert_eq!(w.order, 6);
            let w = detect_weak_order(&flat(d), &DualFunctional::BoxAverage, 6, 0.04, 1e-6).unwrap();
            assert_eq!(w.order, 1);
            // D_i(1 - conj(e^{-πiξ} sinc ξ)) at 0 = -πi per axis
            let g = w.derivative_table[&beta_label(&{
                let mut b = vec![0; d];
                b[0] = 1;
                b
            })];
            assert!(g[0].abs() < 1e-9 && (g[1] + std::f64::consts::PI).abs() < 1e-6, "{g:?}");
        }
    }

    #[test]
    fn stencil_outside_smooth_region_is_rejected() {
        let m = BandLimitedKernel::meyer(1).unwrap();
        assert!(detect_weak_order(&m, &DualFunctional::Dirac, 6, 0.2, 1e-6).is_err());
        assert_eq!(
            detect_weak_order(&m, &DualFunctional::Dirac, 4, 0.04, 1e-6).unwrap().order,
            4
        );
    }

    #[test]
    fn weak_order_monotone_in_tol() {
        let k = BandLimitedKernel::weak_with_coeff(1, 2, 0.25, 0.45, 1e-4).unwrap();
        let mut last = 0;
        for tol in [1e-8, 1e-6, 1e-4, 1e-3] {
            let n = detect_weak_order(&k, &DualFunctional::Dirac, 6, 0.04, tol).unwrap().order;
            assert!(n >= last);
            last = n;
        }
        assert_eq!(last, 6);
    }

    #[test]
    fn strang_fix() {
        for d in [1, 2] {
            assert_eq!(check_strang_fix(&flat(d), 2, 4, 1e-12).unwrap().order, Order::Infinite);
            let m = BandLimitedKernel::meyer(d).unwrap();
            assert_eq!(check_strang_fix(&m, 2, 4, 1e-12).unwrap().order, Order::Infinite);
        }
        let wide = BandLimitedKernel::flat_top_unchecked(1, 0.5, 1.2).unwrap();
        let r = check_strang_fix(&wide, 2, 4, 1e-12).unwrap();
        assert_eq!(r.order, Order::Finite(0));
        assert_eq!(r.witness.unwrap()[0].abs(), 1);
    }

    #[test]
    fn report_marks_strict_pairs_infinite() {
        let r = audit(&flat(1), &DualFunctional::Dirac, 0.25, &CompatOptions::default()).unwrap();
        assert!(r.strict_pass);
        assert_eq!(r.weak_order_detected, Order::Infinite);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"weak_order_detected\":\"inf\""));
        let b = audit(&flat(1), &DualFunctional::BoxAverage, 0.25, &CompatOptions::default()).unwrap();
        assert_eq!(b.weak_order_detected, Order::Finite(1));
    }
}
