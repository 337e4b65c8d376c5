//! Weights of class `W^α`, their dominants `w*`, and Muckenhoupt rectangle checks.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::dilation::DilationMatrix;
use crate::error::{invalid, Error, Result};
use crate::interp::Table1d;
use crate::kernels::BandLimitedKernel;
use crate::quad;

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum WeightKind {
    Unit,
    Polynomial { alpha: f64 },
    BandLimitedConv { base: Box<WeightKind>, mollifier: String },
    Custom { name: String },
}

/// A weight `w ≥ 1` together with a dominant `w*` such that `w(x+y) ≤ w*(x) w(y)`.
#[derive(Clone)]
pub struct Weight {
    dim: usize,
    kind: WeightKind,
    alpha: f64,
    c_w: f64,
    eval: PointFn,
    dominant: PointFn,
    spectral_radius: Option<f64>,
    truncation_residual: f64,
}

impl fmt::Debug for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Weight")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("alpha", &self.alpha)
            .field("c_w", &self.c_w)
            .field("spectral_radius", &self.spectral_radius)
            .finish()
    }
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

impl Weight {
    pub fn unit(dim: usize) -> Self {
        Self {
            dim,
            kind: WeightKind::Unit,
            alpha: 0.0,
            c_w: 1.0,
            eval: Arc::new(|_| 1.0),
            dominant: Arc::new(|_| 1.0),
            spectral_radius: Some(0.0),
            truncation_residual: 0.0,
        }
    }

    /// `w_α(x) = (1 + |x|²)^{α/2}` with `w* = 2^{α/2} w_α`.
    pub fn polynomial(dim: usize, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid(format!("polynomial weight needs α > 0, got {alpha}")));
        }
        let c_w = 2f64.powf(alpha / 2.0);
        let half = alpha / 2.0;
        Ok(Self {
            dim,
            kind: WeightKind::Polynomial { alpha },
            alpha,
            c_w,
            eval: Arc::new(move |x| (1.0 + norm_sq(x)).powf(half)),
            dominant: Arc::new(move |x| c_w * (1.0 + norm_sq(x)).powf(half)),
            spectral_radius: None,
            truncation_residual: 0.0,
        })
    }

    /// A weight given by arbitrary maps; membership is not assumed and should be audited.
    pub fn custom(
        name: &str,
        dim: usize,
        alpha: f64,
        c_w: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        dominant: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            kind: WeightKind::Custom { name: name.into() },
            alpha,
            c_w,
            eval: Arc::new(eval),
            dominant: Arc::new(dominant),
            spectral_radius: None,
            truncation_residual: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn dominant(&self, x: &[f64]) -> f64 {
        (self.dominant)(x)
    }

    /// Euclidean radius of a ball containing `supp ŵ`, when it is compact.
    pub fn spectral_radius(&self) -> Option<f64> {
        self.spectral_radius
    }

    pub fn is_band_limited(&self) -> bool {
        self.spectral_radius.is_some()
    }

    /// Relative truncation residual of the convolution defining the weight.
    pub fn truncation_residual(&self) -> f64 {
        self.truncation_residual
    }

    /// Short description used in reports.
    pub fn label(&self) -> String {
        match &self.kind {
            WeightKind::Unit => "unit".into(),
            WeightKind::Polynomial { alpha } => format!("polynomial:{alpha}"),
            WeightKind::BandLimitedConv { mollifier, .. } => {
                format!("bandlimited:{}:{mollifier}", self.alpha)
            }
            WeightKind::Custom { name } => name.clone(),
        }
    }
}

/// Options for [`make_bandlimited_weight`].
#[derive(Debug, Clone)]
pub struct ConvolutionOptions {
    /// Truncate where the mollifier envelope drops below this fraction of its peak.
    pub envelope_cutoff: f64,
    /// Maximum accepted relative truncation residual.
    pub tol: f64,
    /// Gauss–Legendre nodes per panel.
    pub points_per_panel: usize,
    /// Halfwidth and step of the interpolation table (one-dimensional weights only).
    pub table: Option<(f64, f64)>,
}

impl Default for ConvolutionOptions {
    fn default() -> Self {
        Self {
            envelope_cutoff: 1e-12,
            tol: 1e-3,
            points_per_panel: 8,
            table: Some((512.0, 1.0 / 16.0)),
        }
    }
}

/// `w = v * V` for a nonnegative mollifier `V` with compact spectrum, so that `ŵ` is
/// compactly supported and `w* = v*`.
pub fn make_bandlimited_weight(
    base: &Weight,
    mollifier: &BandLimitedKernel,
    opts: &ConvolutionOptions,
) -> Result<Weight> {
    let dim = base.dim;
    if mollifier.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: mollifier.dim(),
        });
    }
    let env = mollifier.axis_envelope();
    let peak = mollifier.axis_peak();
    let band = mollifier.support_halfwidth();
    let mut radius = 1.0;
    while env.eval(radius) > opts.envelope_cutoff * peak && radius < 1e7 {
        radius *= 1.25;
    }
    let panel = (0.5 / band).min(4.0);
    let panels = ((2.0 * radius) / panel).ceil() as usize;
    let axis_rule: Vec<(f64, f64)> =
        quad::composite_gauss_legendre(opts.points_per_panel, panels, -radius, radius)
            .into_iter()
            .map(|(y, w)| (y, w * mollifier.axis_eval(y).re))
            .collect();
    if let Some(&(y, _)) = axis_rule
        .iter()
        .find(|&&(y, _)| mollifier.axis_eval(y).re < -1e-14 * peak)
    {
        return Err(invalid(format!(
            "mollifier `{}` is negative at {y}",
            mollifier.id()
        )));
    }
    let axis_mass: f64 = axis_rule.iter().map(|&(_, w)| w).sum();

    // tail of ∫ V v* beyond the truncation box, relative to the retained mass
    let tail_rule = quad::graded_gauss_legendre(16, 30, 0.0, 1.0);
    let axis_tail: f64 = 2.0
        * tail_rule
            .iter()
            .map(|&(t, w)| {
                let r = radius / t.max(1e-300);
                let mut y = vec![0.0; dim];
                y[0] = r;
                w * env.eval(r) * base.dominant(&y) * radius / (t * t).max(1e-300)
            })
            .sum::<f64>();
    let residual = dim as f64 * axis_tail / axis_mass.powi(dim as i32);
    if residual > opts.tol {
        return Err(Error::Quadrature {
            what: format!("convolution with `{}` truncated at radius {radius:.1}", mollifier.id()),
            residual,
        });
    }

    let rule = Arc::new(axis_rule);
    let base_eval = base.eval.clone();
    let direct = {
        let rule = rule.clone();
        move |x: &[f64]| -> f64 {
            let n = rule.len();
            let mut acc = 0.0;
            let mut y = vec![0.0; x.len()];
            for flat in 0..n.pow(x.len() as u32) {
                let mut rem = flat;
                let mut w = 1.0;
                for (axis, yi) in y.iter_mut().enumerate() {
                    let (node, weight) = rule[rem % n];
                    rem /= n;
                    *yi = x[axis] - node;
                    w *= weight;
                }
                acc += w * base_eval(&y);
            }
            acc
        }
    };
    let eval: PointFn = match (dim, opts.table) {
        (1, Some((half, step))) => {
            let n = (2.0 * half / step).round() as usize;
            let values = (0..n)
                .map(|i| num_complex::Complex64::new(direct(&[-half + step * i as f64]), 0.0))
                .collect();
            let table = Table1d::new(half, values);
            Arc::new(move |x: &[f64]| match table.eval(x[0]) {
                Some(v) => v.re,
                None => direct(x),
            })
        }
        _ => Arc::new(direct),
    };
    Ok(Weight {
        dim,
        kind: WeightKind::BandLimitedConv {
            base: Box::new(base.kind.clone()),
            mollifier: mollifier.id().to_string(),
        },
        alpha: base.alpha,
        c_w: base.c_w,
        eval,
        dominant: base.dominant.clone(),
        spectral_radius: Some(band * (dim as f64).sqrt()),
        truncation_residual: residual,
    })
}

/// Norms `‖V‖_{L_{1,1/v*}}` and `‖V‖_{L_{1,v*}}` bracketing `w / v`.
#[derive(Debug, Clone, Serialize)]
pub struct TwoSidedReport {
    pub lower_factor: f64,
    pub upper_factor: f64,
    /// Largest relative violation of `v ‖V‖_{1,1/v*} ≤ w ≤ v ‖V‖_{1,v*}` on the grid.
    pub max_violation: f64,
}

pub fn check_two_sided(
    w: &Weight,
    base: &Weight,
    mollifier: &BandLimitedKernel,
    grid: &[Vec<f64>],
) -> Result<TwoSidedReport> {
    if base.dim != 1 {
        return Err(invalid("two-sided check is implemented for one-dimensional weights"));
    }
    let band = mollifier.support_halfwidth();
    let mut radius = 1.0;
    while mollifier.axis_envelope().eval(radius) > 1e-12 * mollifier.axis_peak() && radius < 1e7 {
        radius *= 1.25;
    }
    let panels = ((2.0 * radius) / (0.5 / band).min(4.0)).ceil() as usize;
    let mut lower = 0.0;
    let mut upper = 0.0;
    for (y, wt) in quad::composite_gauss_legendre(8, panels, -radius, radius) {
        let v = mollifier.axis_eval(y).re * wt;
        let s = base.dominant(&[y]);
        lower += v / s;
        upper += v * s;
    }
    let mut max_violation: f64 = 0.0;
    for x in grid {
        let wx = w.eval(x);
        let vx = base.eval(x);
        max_violation = max_violation
            .max((vx * lower - wx) / wx)
            .max((wx - vx * upper) / wx);
    }
    Ok(TwoSidedReport {
        lower_factor: lower,
        upper_factor: upper,
        max_violation: max_violation.max(0.0),
    })
}

/// Sampled defects of the `W^α` conditions.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub evenness_defect: f64,
    pub submult_defect: f64,
    pub dominant_defect: f64,
    pub ap_constant: Option<f64>,
    pub passes: bool,
}

/// Evenness, `w(x+y) ≤ w*(x) w(y)` (and its reciprocal form), and
/// `w*(x) ≤ c_w (1+|x|²)^{α/2}` over all sampled points and pairs.
pub fn check_w_alpha_membership(w: &Weight, grid: &[Vec<f64>], tol: f64) -> MembershipReport {
    let mut even: f64 = 0.0;
    let mut sub: f64 = 0.0;
    let mut dom: f64 = 0.0;
    let mut sum = vec![0.0; w.dim];
    for x in grid {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let wx = w.eval(x);
        even = even.max((wx - w.eval(&neg)).abs());
        let bound = w.c_w * (1.0 + norm_sq(x)).powf(w.alpha / 2.0);
        dom = dom.max(w.dominant(x) - bound);
        let wsx = w.dominant(x);
        for y in grid {
            for ((s, a), b) in sum.iter_mut().zip(x).zip(y) {
                *s = a + b;
            }
            let wy = w.eval(y);
            let wsum = w.eval(&sum);
            sub = sub.max(wsum - wsx * wy);
            // 1/w(y+x) ≤ w*(x)/w(y)
            sub = sub.max(1.0 / wsum - wsx / wy);
        }
    }
    MembershipReport {
        evenness_defect: even,
        submult_defect: sub.max(0.0),
        dominant_defect: dom.max(0.0),
        ap_constant: None,
        passes: even <= tol && sub <= tol && dom <= tol,
    }
}

/// Smallest `C'` with `w*(M^{-j} x) ≤ C' w*(x)` over the grid and `1 ≤ j ≤ j_max`.
pub fn check_dilation_stability(w: &Weight, m: &DilationMatrix, j_max: u32, grid: &[Vec<f64>]) -> f64 {
    let mut c: f64 = 1.0;
    for j in 1..=j_max {
        let inv = m.power(-(j as i32));
        for x in grid {
            c = c.max(w.dominant(&inv.apply(x)) / w.dominant(x));
        }
    }
    c
}

/// Axis-aligned rectangle `∏ [lo_i, hi_i]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rect {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Rect {
    pub fn centered(center: &[f64], sides: &[f64]) -> Self {
        Self {
            lo: center.iter().zip(sides).map(|(c, s)| c - 0.5 * s).collect(),
            hi: center.iter().zip(sides).map(|(c, s)| c + 0.5 * s).collect(),
        }
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }
}

/// Dyadic side lengths `2^k`, `k ∈ ks`, chosen independently per axis, with centres on
/// `spacing · {-radius..radius}^d`.
pub fn dyadic_rectangles(dim: usize, ks: std::ops::RangeInclusive<i32>, spacing: f64, radius: i32) -> Vec<Rect> {
    let ks: Vec<i32> = ks.collect();
    let side = (2 * radius + 1) as usize;
    let mut out = Vec::new();
    for c in 0..side.pow(dim as u32) {
        let mut rem = c;
        let center: Vec<f64> = (0..dim)
            .map(|_| {
                let v = (rem % side) as i32 - radius;
                rem /= side;
                spacing * v as f64
            })
            .collect();
        for s in 0..ks.len().pow(dim as u32) {
            let mut rem = s;
            let sides: Vec<f64> = (0..dim)
                .map(|_| {
                    let k = ks[rem % ks.len()];
                    rem /= ks.len();
                    2f64.powi(k)
                })
                .collect();
            out.push(Rect::centered(&center, &sides));
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct ApOptions {
    pub quad_pts: usize,
    /// Split intervals at 0 and grade panels towards it (for weights singular at the origin).
    pub grade_levels: Option<usize>,
    /// Exclude `|x_i| < inner_cutoff` from the integrals.
    pub inner_cutoff: f64,
    /// Accepted relative change when doubling `quad_pts`.
    pub doubling_tol: f64,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self {
            quad_pts: 64,
            grade_levels: None,
            inner_cutoff: 0.0,
            doubling_tol: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApEstimate {
    pub constant: f64,
    pub worst: Rect,
    pub per_rect: Vec<f64>,
}

fn axis_rule(a: f64, b: f64, opts: &ApOptions, pts: usize) -> Vec<(f64, f64)> {
    let eps = opts.inner_cutoff;
    let mut pieces = Vec::new();
    if eps > 0.0 && a < eps && b > -eps {
        if a < -eps {
            pieces.push((a, -eps));
        }
        if b > eps {
            pieces.push((eps, b));
        }
    } else {
        pieces.push((a, b));
    }
    let mut out = Vec::new();
    for (lo, hi) in pieces {
        let near = eps.max(0.0);
        match opts.grade_levels {
            Some(levels) if lo < 0.0 && hi > 0.0 => {
                out.extend(
                    quad::graded_gauss_legendre(pts, levels, 0.0, -lo)
                        .into_iter()
                        .map(|(x, w)| (-x, w)),
                );
                out.extend(quad::graded_gauss_legendre(pts, levels, 0.0, hi));
            }
            Some(levels) if lo >= 0.0 && lo <= near => {
                out.extend(quad::graded_gauss_legendre(pts, levels, lo, hi));
            }
            Some(levels) if hi <= 0.0 && hi >= -near => {
                out.extend(
                    quad::graded_gauss_legendre(pts, levels, -hi, -lo)
                        .into_iter()
                        .map(|(x, w)| (-x, w)),
                );
            }
            _ => out.extend(quad::gauss_legendre(pts, lo, hi)),
        }
    }
    out
}

fn rect_constant(w_pow: &dyn Fn(&[f64]) -> f64, p: f64, rect: &Rect, opts: &ApOptions, pts: usize) -> f64 {
    let dim = rect.lo.len();
    let rules: Vec<Vec<(f64, f64)>> = (0..dim)
        .map(|i| axis_rule(rect.lo[i], rect.hi[i], opts, pts))
        .collect();
    let vol = rect.volume();
    let expo = -1.0 / (p - 1.0);
    let mut a = 0.0;
    let mut b = 0.0;
    let mut x = vec![0.0; dim];
    let total: usize = rules.iter().map(|r| r.len()).product();
    for flat in 0..total {
        let mut rem = flat;
        let mut wt = 1.0;
        for (i, rule) in rules.iter().enumerate() {
            let (node, w) = rule[rem % rule.len()];
            rem /= rule.len();
            x[i] = node;
            wt *= w;
        }
        let v = w_pow(&x);
        a += wt * v;
        b += wt * v.powf(expo);
    }
    (a / vol) * (b / vol).powf(p - 1.0)
}

/// Sampled `A_p` constant over a rectangle family, with a doubling check on the quadrature.
pub fn ap_rectangle_constant(
    w_pow: &dyn Fn(&[f64]) -> f64,
    p: f64,
    rects: &[Rect],
    opts: &ApOptions,
) -> Result<ApEstimate> {
    if !(p > 1.0) {
        return Err(invalid(format!("A_p needs p > 1, got {p}")));
    }
    if rects.is_empty() {
        return Err(invalid("empty rectangle family"));
    }
    let mut per_rect = Vec::with_capacity(rects.len());
    let mut best = (f64::NEG_INFINITY, 0usize);
    for (i, rect) in rects.iter().enumerate() {
        if !(rect.volume() > 0.0) {
            return Err(invalid(format!("rectangle {rect:?} has no volume")));
        }
        let coarse = rect_constant(w_pow, p, rect, opts, opts.quad_pts);
        if !coarse.is_finite() {
            return Err(Error::NonFinite {
                what: "A_p average".into(),
                location: format!("rectangle lo={:?} hi={:?}", rect.lo, rect.hi),
            });
        }
        let fine = rect_constant(w_pow, p, rect, opts, 2 * opts.quad_pts);
        let change = (fine - coarse).abs() / fine.abs().max(1e-300);
        if !fine.is_finite() || change >= opts.doubling_tol {
            return Err(Error::Quadrature {
                what: format!("A_p average on rectangle lo={:?} hi={:?}", rect.lo, rect.hi),
                residual: change,
            });
        }
        per_rect.push(fine);
        if fine > best.0 {
            best = (fine, i);
        }
    }
    Ok(ApEstimate {
        constant: best.0,
        worst: rects[best.1].clone(),
        per_rect,
    })
}

/// One-dimensional `A_p` constants of the sections `t ↦ w_pow(x)` with `x_axis = t` and the
/// remaining coordinates frozen at each of `frozen`.
pub fn ap_per_variable(
    w_pow: &dyn Fn(&[f64]) -> f64,
    p: f64,
    axis: usize,
    frozen: &[Vec<f64>],
    intervals: &[Rect],
    opts: &ApOptions,
) -> Result<Vec<f64>> {
    frozen
        .iter()
        .map(|fixed| {
            let section = |t: &[f64]| {
                let mut x = fixed.clone();
                x[axis] = t[0];
                w_pow(&x)
            };
            ap_rectangle_constant(&section, p, intervals, opts).map(|e| e.constant)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: i32, step: f64) -> Vec<Vec<f64>> {
        (-n..=n).map(|i| vec![step * i as f64]).collect()
    }

    #[test]
    fn polynomial_values() {
        let w1 = Weight::polynomial(1, 1.0).unwrap();
        assert_eq!(w1.eval(&[0.0]), 1.0);
        let w2 = Weight::polynomial(2, 2.0).unwrap();
        assert!((w2.eval(&[3.0, 4.0]) - 26.0).abs() < 1e-12);
        assert!(Weight::polynomial(1, 0.0).is_err());
        assert!(Weight::polynomial(1, -1.0).is_err());
    }

    #[test]
    fn polynomial_weight_is_exact_member() {
        let w = Weight::polynomial(1, 0.7).unwrap();
        let r = check_w_alpha_membership(&w, &grid1(40, 0.37), 1e-12);
        assert!(r.passes, "{r:?}");
        assert_eq!(r.evenness_defect, 0.0);
        assert_eq!(r.dominant_defect, 0.0);
        let u = Weight::unit(2);
        let g: Vec<Vec<f64>> = (-3..=3).flat_map(|i| (-3..=3).map(move |j| vec![i as f64, j as f64])).collect();
        let r = check_w_alpha_membership(&u, &g, 0.0);
        assert!(r.passes);
        assert_eq!(r.submult_defect + r.evenness_defect + r.dominant_defect, 0.0);
    }

    #[test]
    fn exponential_weight_fails_polynomial_dominant() {
        let alpha: f64 = 1.0;
        let cw = 2f64.powf(alpha / 2.0);
        let w = Weight::custom(
            "exp",
            1,
            alpha,
            cw,
            |x| x[0].abs().exp(),
            |x| x[0].abs().exp(),
        );
        let r = check_w_alpha_membership(&w, &grid1(20, 1.0), 1e-9);
        assert!(!r.passes);
        assert!(r.dominant_defect > 1.0);
    }

    #[test]
    fn dilation_stability() {
        let m = DilationMatrix::new(vec![2.0, 3.0]).unwrap();
        let g: Vec<Vec<f64>> = (-5..=5).flat_map(|i| (-5..=5).map(move |j| vec![i as f64, 0.5 * j as f64])).collect();
        let w = Weight::polynomial(2, 0.5).unwrap();
        assert_eq!(check_dilation_stability(&w, &m, 4, &g), 1.0);
        assert_eq!(check_dilation_stability(&Weight::unit(2), &m, 4, &g), 1.0);
    }

    #[test]
    fn unit_mass_mollifier_gives_unit_weight() {
        let v = BandLimitedKernel::squared_flat_top(1, 0.12).unwrap();
        let w = make_bandlimited_weight(&Weight::unit(1), &v, &ConvolutionOptions::default()).unwrap();
        for x in [0.0, 3.3, -40.0, 700.0] {
            assert!((w.eval(&[x]) - 1.0).abs() < 1e-6, "{x}: {}", w.eval(&[x]));
        }
    }

    #[test]
    fn fejer_weight_within_two_sided_bound() {
        let base = Weight::polynomial(1, 0.25).unwrap();
        let fejer = BandLimitedKernel::fejer(1, 0.125).unwrap();
        let opts = ConvolutionOptions {
            table: None,
            envelope_cutoff: 1e-7,
            tol: 1e-2,
            ..Default::default()
        };
        let w = make_bandlimited_weight(&base, &fejer, &opts).unwrap();
        let grid = grid1(8, 1.0);
        let r = check_two_sided(&w, &base, &fejer, &grid).unwrap();
        assert!(r.max_violation <= 1e-3, "{r:?}");
        assert!(r.lower_factor < 1.0 && r.upper_factor > 1.0);
        let ratio = w.eval(&[10.0]) / w.eval(&[0.0]);
        let vr = base.eval(&[10.0]) / base.eval(&[0.0]);
        let factor = r.upper_factor / r.lower_factor;
        assert!(ratio <= vr * factor && ratio >= vr / factor);
        assert!(w.is_band_limited());
    }

    #[test]
    fn bandlimited_weight_is_member_and_stable() {
        let base = Weight::polynomial(1, 0.25).unwrap();
        let v = BandLimitedKernel::squared_flat_top(1, 0.12).unwrap();
        let w = make_bandlimited_weight(&base, &v, &ConvolutionOptions::default()).unwrap();
        let r = check_w_alpha_membership(&w, &grid1(30, 1.7), 1e-6);
        assert!(r.passes, "{r:?}");
        let m = DilationMatrix::new(vec![2.0]).unwrap();
        let c = check_dilation_stability(&w, &m, 5, &grid1(30, 1.7));
        assert!(c.is_finite() && c >= 1.0);
        assert!(w.eval(&[0.0]) >= 1.0);
    }

    #[test]
    fn rejects_negative_mollifier() {
        let k = BandLimitedKernel::flat_top(1, 0.05, 0.1).unwrap();
        let r = make_bandlimited_weight(&Weight::unit(1), &k, &ConvolutionOptions::default());
        assert!(r.is_err());
    }

    #[test]
    fn ap_constant_of_unit_is_one() {
        let rects = dyadic_rectangles(2, -2..=2, 4.0, 1);
        let e = ap_rectangle_constant(&|_| 1.0, 3.0, &rects, &ApOptions::default()).unwrap();
        assert!((e.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ap_constant_of_half_power_is_stable() {
        let rects: Vec<Rect> = (0..=6).map(|k| Rect::centered(&[0.0], &[2f64.powi(k + 1)])).collect();
        let opts = ApOptions {
            grade_levels: Some(40),
            ..Default::default()
        };
        let e = ap_rectangle_constant(&|x: &[f64]| x[0].abs().sqrt(), 2.0, &rects, &opts).unwrap();
        // averages (2/3) L^{1/2} and 2 L^{-1/2}
        for c in &e.per_rect {
            assert!((c - 4.0 / 3.0).abs() < 1e-6, "{c}");
        }
    }

    #[test]
    fn ap_constant_of_three_halves_power_blows_up() {
        let rects: Vec<Rect> = (0..=6).map(|k| Rect::centered(&[0.0], &[2f64.powi(k + 1)])).collect();
        let w = |x: &[f64]| x[0].abs().powf(1.5);
        let mut last = 0.0;
        for eps in [1e-2, 1e-4, 1e-6] {
            let opts = ApOptions {
                grade_levels: Some(40),
                inner_cutoff: eps,
                ..Default::default()
            };
            let e = ap_rectangle_constant(&w, 2.0, &rects, &opts).unwrap();
            assert!(e.per_rect.windows(2).all(|p| p[1] > p[0]));
            assert!(e.constant > 5.0 * last);
            last = e.constant;
        }
    }

    #[test]
    fn ap_family_monotone() {
        let w = |x: &[f64]| (1.0 + x[0] * x[0] + x[1] * x[1]).powf(-0.25);
        let small = dyadic_rectangles(2, -1..=1, 4.0, 1);
        let big = dyadic_rectangles(2, -2..=3, 4.0, 1);
        let o = ApOptions::default();
        let a = ap_rectangle_constant(&w, 2.0, &small, &o).unwrap().constant;
        let b = ap_rectangle_constant(&w, 2.0, &big, &o).unwrap().constant;
        assert!(b >= a);
    }
}
