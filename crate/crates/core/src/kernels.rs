//! Band-limited generators `φ(x) = ∫_Π θ(ξ) e^{2πi(x,ξ)} dξ` built from tensor-product
//! spectra, and the dual functionals `φ̃` paired with them.
//!
//! Every generator here is separable: `θ(ξ) = ∏ θ₁(ξ_i)` and `φ(x) = ∏ φ₁(x_i)`, so the
//! space-domain tables are one-dimensional and shared across axes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fourier;
use crate::interp::Table1d;
use crate::quad;

pub const DEFAULT_TABLE_HALFWIDTH: f64 = 256.0;
pub const DEFAULT_TABLE_POINTS: usize = 1 << 16;
const ENVELOPE_POWER: i32 = 8;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `e^{-1/u}` for `u > 0`, else 0.
fn bump_g(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

/// C^∞ step from 0 (at `u ≤ 0`) to 1 (at `u ≥ 1`) with `σ(u) + σ(1-u) = 1`.
pub fn smooth_step(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    let a = bump_g(u);
    let b = bump_g(1.0 - u);
    a / (a + b)
}

/// Radial cutoff equal to 1 on `[0, flat]` and 0 on `[cutoff, ∞)`.
pub fn flat_top_profile(t: f64, flat: f64, cutoff: f64) -> f64 {
    let t = t.abs();
    if t <= flat {
        1.0
    } else if t >= cutoff {
        0.0
    } else {
        smooth_step((cutoff - t) / (cutoff - flat))
    }
}

fn meyer_nu(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t.powi(4) * (35.0 - 84.0 * t + 70.0 * t * t - 20.0 * t.powi(3))
}

pub fn sinc(t: f64) -> f64 {
    if t.abs() < 1e-12 {
        1.0 - (PI * t).powi(2) / 6.0
    } else {
        (PI * t).sin() / (PI * t)
    }
}

/// Smoothness of `θ` on its support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Smoothness {
    Finite(u32),
    Infinite,
}

/// One-dimensional spectral profile `θ₁`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Profile {
    /// Indicator of `[-1/2, 1/2]`.
    Sinc,
    /// Meyer scaling function; `smooth` swaps the polynomial transition for a C^∞ one.
    Meyer { smooth: bool },
    FlatTop { flat: f64, cutoff: f64 },
    /// `(1 - c ξ^n)` times a flat-top cutoff.
    WeakOrder {
        order: u32,
        coeff: f64,
        flat: f64,
        cutoff: f64,
    },
    /// Triangle spectrum on `[-b, b]`; `φ₁(x) = b sinc²(bx)`.
    Fejer { half_width: f64 },
    /// `b |ψ(bx)|² / ‖ψ‖²` with `ψ` the flat-top kernel (1/4, 1/2); spectrum on `[-b, b]`.
    SquaredFlatTop { half_width: f64 },
}

const SQUARED_BASE: (f64, f64) = (0.25, 0.5);

impl Profile {
    pub fn spectrum(&self, xi: f64) -> Complex64 {
        let t = xi.abs();
        match *self {
            Profile::Sinc => c(if t <= 0.5 { 1.0 } else { 0.0 }),
            Profile::Meyer { smooth } => {
                let v = if t <= 1.0 / 3.0 {
                    1.0
                } else if t >= 2.0 / 3.0 {
                    0.0
                } else {
                    let s = 3.0 * t - 1.0;
                    let nu = if smooth { smooth_step(s) } else { meyer_nu(s) };
                    (0.5 * PI * nu).cos()
                };
                c(v)
            }
            Profile::FlatTop { flat, cutoff } => c(flat_top_profile(t, flat, cutoff)),
            Profile::WeakOrder {
                order,
                coeff,
                flat,
                cutoff,
            } => c((1.0 - coeff * xi.powi(order as i32)) * flat_top_profile(t, flat, cutoff)),
            Profile::Fejer { half_width } => c((1.0 - t / half_width).max(0.0)),
            Profile::SquaredFlatTop { half_width } => {
                let eta = t / half_width;
                c(squared_autocorrelation(eta) / squared_autocorrelation(0.0))
            }
        }
    }

    /// Half-width `s` of the support `Π = [-s, s]^d`.
    pub fn support(&self) -> f64 {
        match *self {
            Profile::Sinc => 0.5,
            Profile::Meyer { .. } => 2.0 / 3.0,
            Profile::FlatTop { cutoff, .. } | Profile::WeakOrder { cutoff, .. } => cutoff,
            Profile::Fejer { half_width } | Profile::SquaredFlatTop { half_width } => half_width,
        }
    }

    /// `δ` with `θ ≡ 1` on `[-δ, δ]`; zero when there is none.
    pub fn flat_radius(&self) -> f64 {
        match *self {
            Profile::Sinc => 0.5,
            Profile::Meyer { .. } => 1.0 / 3.0,
            Profile::FlatTop { flat, .. } => flat,
            _ => 0.0,
        }
    }

    /// Order of vanishing of `1 - θ` at the origin; `None` means all orders.
    pub fn weak_order(&self) -> Option<u32> {
        match *self {
            Profile::Sinc | Profile::Meyer { .. } | Profile::FlatTop { .. } => None,
            Profile::WeakOrder { order, .. } => Some(order),
            Profile::Fejer { .. } => Some(1),
            Profile::SquaredFlatTop { .. } => Some(2),
        }
    }

    /// Radius of the ball around the origin on which `θ` is C^∞.
    pub fn smooth_radius(&self) -> f64 {
        match *self {
            Profile::Sinc => 0.5,
            Profile::Meyer { smooth: false } => 1.0 / 3.0,
            Profile::Fejer { .. } => 0.0,
            _ => f64::INFINITY,
        }
    }

    pub fn smoothness(&self) -> Smoothness {
        match *self {
            Profile::Sinc | Profile::Fejer { .. } => Smoothness::Finite(0),
            Profile::Meyer { smooth: false } => Smoothness::Finite(3),
            _ => Smoothness::Infinite,
        }
    }

    /// Breakpoints of `θ₁` on `[0, support]`, for piecewise quadrature.
    pub fn breakpoints(&self) -> Vec<f64> {
        let s = self.support();
        let mut pts = vec![0.0];
        let f = self.flat_radius();
        if f > 0.0 && f < s {
            pts.push(f);
        }
        if let Profile::WeakOrder { flat, .. } = *self {
            pts.push(flat);
        }
        pts.push(s);
        pts
    }

    fn is_slow(&self) -> bool {
        matches!(self, Profile::Sinc | Profile::Fejer { .. })
    }
}

/// Autocorrelation `∫ θ(ζ) θ(ζ - η) dζ` of the base flat-top profile used by
/// [`Profile::SquaredFlatTop`], with `η` measured in units where the base support is
/// `[-1/2, 1/2]`.
fn squared_autocorrelation(eta: f64) -> f64 {
    let (flat, cutoff) = SQUARED_BASE;
    let eta = eta.abs();
    if eta >= 2.0 * cutoff {
        return 0.0;
    }
    let lo = eta - cutoff;
    let hi = cutoff;
    quad::composite_gauss_legendre(16, 16, lo, hi)
        .iter()
        .map(|&(z, w)| w * flat_top_profile(z, flat, cutoff) * flat_top_profile(z - eta, flat, cutoff))
        .sum()
}

/// How `φ₁` is evaluated in space.
#[derive(Debug, Clone)]
enum Evaluator {
    ClosedForm,
    Table(Arc<Table1d>),
    Squared {
        base: Arc<Table1d>,
        scale: f64,
        norm_sq: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EvalMode {
    ClosedForm,
    FftTable { halfwidth: f64, points: usize },
}

/// Monotone majorant of `|φ₁|` along one axis.
#[derive(Debug, Clone, Serialize)]
pub struct DecayEnvelope {
    /// `table[r]` bounds `|φ₁(x)|` for `|x| ≥ r`, `r = 0, 1, ..`.
    table: Vec<f64>,
    /// Beyond the table: `coeff (1 + r)^{-power}`.
    coeff: f64,
    power: i32,
}

impl DecayEnvelope {
    pub fn eval(&self, r: f64) -> f64 {
        let r = r.abs();
        let i = r.floor() as usize;
        let tail = self.coeff * (1.0 + r).powi(-self.power);
        match self.table.get(i) {
            Some(&v) => v,
            None => tail,
        }
    }

    /// Bound for `∑ |φ₁(t + m)|` over integers `m` with `|t + m| ≥ r`, any shift `t`.
    pub fn lattice_tail(&self, r: usize) -> f64 {
        let mut sum = 0.0;
        let mut i = r;
        while i < self.table.len() {
            sum += self.table[i];
            i += 1;
        }
        let start = (i.max(r)) as f64;
        let p = self.power as f64;
        sum += self.coeff * ((1.0 + start).powf(-p) + (1.0 + start).powf(1.0 - p) / (p - 1.0));
        2.0 * sum
    }

    pub fn power(&self) -> i32 {
        self.power
    }
}

/// A band-limited generator `φ ∈ B` with tensor spectrum.
#[derive(Debug, Clone)]
pub struct BandLimitedKernel {
    id: String,
    dim: usize,
    profile: Profile,
    evaluator: Evaluator,
    envelope: DecayEnvelope,
    peak: f64,
    truncation_error: f64,
}

impl fmt::Display for BandLimitedKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (d={})", self.id, self.dim)
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(invalid("dimension must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_flat_cutoff(flat: f64, cutoff: f64, operator_use: bool) -> Result<()> {
    if !(flat > 0.0 && flat < cutoff) {
        return Err(invalid(format!("need 0 < δ < Δ, got δ={flat}, Δ={cutoff}")));
    }
    if operator_use && cutoff >= 1.0 {
        return Err(invalid(format!("need Δ < 1 so that supp θ ⊂ (-1,1)^d, got Δ={cutoff}")));
    }
    Ok(())
}

impl BandLimitedKernel {
    /// Tensor product of sinc functions: `θ = 1_{[-1/2,1/2]^d}`.
    pub fn sinc_tensor(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::closed_form("sinc".into(), dim, Profile::Sinc))
    }

    /// Tensor Meyer scaling function with the polynomial transition.
    pub fn meyer(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::tabulated("meyer".into(), dim, Profile::Meyer { smooth: false }))
    }

    /// Meyer scaling function with a C^∞ transition in place of the polynomial one.
    pub fn meyer_smooth(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self::tabulated("meyer_smooth".into(), dim, Profile::Meyer { smooth: true }))
    }

    pub fn flat_top(dim: usize, flat: f64, cutoff: f64) -> Result<Self> {
        check_dim(dim)?;
        check_flat_cutoff(flat, cutoff, true)?;
        Ok(Self::tabulated(
            format!("flat_top:{flat}:{cutoff}"),
            dim,
            Profile::FlatTop { flat, cutoff },
        ))
    }

    /// Flat-top spectrum without the `Δ < 1` restriction. Such kernels violate the
    /// support condition and are refused by the operator paths.
    pub fn flat_top_unchecked(dim: usize, flat: f64, cutoff: f64) -> Result<Self> {
        check_dim(dim)?;
        check_flat_cutoff(flat, cutoff, false)?;
        Ok(Self::tabulated(
            format!("flat_top:{flat}:{cutoff}"),
            dim,
            Profile::FlatTop { flat, cutoff },
        ))
    }

    /// Kernel whose `1 - θ` vanishes at the origin to order exactly `order`, scaled so the
    /// defect `c δ^n` at the flat radius is 1/4.
    pub fn weak(dim: usize, order: u32, flat: f64, cutoff: f64) -> Result<Self> {
        if !(flat > 0.0) {
            return Err(invalid("flat radius must be positive"));
        }
        Self::weak_with_coeff(dim, order, flat, cutoff, 0.25 * flat.powi(-(order as i32)))
    }

    pub fn weak_with_coeff(
        dim: usize,
        order: u32,
        flat: f64,
        cutoff: f64,
        coeff: f64,
    ) -> Result<Self> {
        check_dim(dim)?;
        if order == 0 {
            return Err(invalid("weak order must be at least 1"));
        }
        if coeff == 0.0 || !coeff.is_finite() {
            return Err(invalid("weak-order coefficient must be finite and nonzero"));
        }
        check_flat_cutoff(flat, cutoff, true)?;
        let id = if coeff == 0.25 * flat.powi(-(order as i32)) {
            format!("weak:{order}:{flat}:{cutoff}")
        } else {
            format!("weak:{order}:{flat}:{cutoff}:{coeff}")
        };
        Ok(Self::tabulated(
            id,
            dim,
            Profile::WeakOrder {
                order,
                coeff,
                flat,
                cutoff,
            },
        ))
    }

    /// Nonnegative Fejér kernel `b sinc²(bx)` per axis, unit mass.
    pub fn fejer(dim: usize, half_width: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(half_width > 0.0) {
            return Err(invalid("Fejér half-width must be positive"));
        }
        Ok(Self::closed_form(format!("fejer:{half_width}"), dim, Profile::Fejer { half_width }))
    }

    /// Nonnegative, fast-decaying mollifier with unit mass and spectrum in `[-b, b]^d`.
    pub fn squared_flat_top(dim: usize, half_width: f64) -> Result<Self> {
        check_dim(dim)?;
        if !(half_width > 0.0) {
            return Err(invalid("mollifier half-width must be positive"));
        }
        let (flat, cutoff) = SQUARED_BASE;
        let base = Self::tabulated("base".into(), 1, Profile::FlatTop { flat, cutoff });
        let base_table = match &base.evaluator {
            Evaluator::Table(t) => t.clone(),
            _ => unreachable!("flat-top kernels are tabulated"),
        };
        let base_half = base_table.halfwidth();
        let norm_sq = squared_autocorrelation(0.0);
        let scale = half_width / (2.0 * cutoff);
        let profile = Profile::SquaredFlatTop { half_width };
        let evaluator = Evaluator::Squared {
            base: base_table,
            scale,
            norm_sq,
        };
        let peak = scale * base.peak * base.peak / norm_sq;
        let envelope = DecayEnvelope {
            table: (0..)
                .map(|r| {
                    let x = r as f64 * scale;
                    scale * base.envelope.eval(x).powi(2) / norm_sq
                })
                .take((base_half / scale) as usize + 1)
                .collect(),
            // (1 + s r) ≥ s (1 + r) for s ≤ 1
            coeff: scale * base.envelope.coeff.powi(2) / norm_sq
                * scale.min(1.0).powi(-2 * ENVELOPE_POWER),
            power: 2 * ENVELOPE_POWER,
        };
        Ok(Self {
            id: format!("sqflat:{half_width}"),
            dim,
            profile,
            evaluator,
            envelope,
            peak,
            truncation_error: base.truncation_error,
        })
    }

    /// Parse a registry id: `sinc`, `meyer`, `meyer_smooth`, `flat_top:δ:Δ`,
    /// `weak:n:δ:Δ[:c]`, `fejer:b`, `sqflat:b`.
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        let parts: Vec<&str> = id.trim().split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("kernel id `{id}` is missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("kernel id `{id}`: {e}")))
        };
        match parts[0] {
            "sinc" => Self::sinc_tensor(dim),
            "meyer" => Self::meyer(dim),
            "meyer_smooth" => Self::meyer_smooth(dim),
            "flat_top" => Self::flat_top(dim, num(1)?, num(2)?),
            "weak" => {
                let n = num(1)?;
                if n.fract() != 0.0 || n < 1.0 {
                    return Err(Error::Parse(format!("kernel id `{id}`: order must be a positive integer")));
                }
                if parts.len() > 4 {
                    Self::weak_with_coeff(dim, n as u32, num(2)?, num(3)?, num(4)?)
                } else {
                    Self::weak(dim, n as u32, num(2)?, num(3)?)
                }
            }
            "fejer" => Self::fejer(dim, num(1)?),
            "sqflat" => Self::squared_flat_top(dim, num(1)?),
            other => Err(Error::Parse(format!("unknown kernel `{other}`"))),
        }
    }

    fn closed_form(id: String, dim: usize, profile: Profile) -> Self {
        let envelope = match profile {
            Profile::Sinc => DecayEnvelope {
                table: (0..4096)
                    .map(|r| if r == 0 { 1.0 } else { 1.0 / (PI * r as f64) })
                    .collect(),
                coeff: 2.0 / PI,
                power: 1,
            },
            Profile::Fejer { half_width: b } => DecayEnvelope {
                table: (0..4096)
                    .map(|r| {
                        if r == 0 {
                            b
                        } else {
                            (b / (PI * b * r as f64).powi(2)).min(b)
                        }
                    })
                    .collect(),
                coeff: 4.0 / (PI * PI * b),
                power: 2,
            },
            _ => unreachable!("closed forms exist for sinc and Fejér only"),
        };
        let peak = match profile {
            Profile::Fejer { half_width } => half_width,
            _ => 1.0,
        };
        Self {
            id,
            dim,
            profile,
            evaluator: Evaluator::ClosedForm,
            envelope,
            peak,
            truncation_error: 0.0,
        }
    }

    fn tabulated(id: String, dim: usize, profile: Profile) -> Self {
        Self::tabulated_with(id, dim, profile, DEFAULT_TABLE_HALFWIDTH, DEFAULT_TABLE_POINTS)
    }

    /// Build the FFT table on `[-L, L)` with `points` nodes and calibrate the envelope.
    pub fn tabulated_with(id: String, dim: usize, profile: Profile, halfwidth: f64, points: usize) -> Self {
        let samples = fourier::synthesize_1d(|xi| profile.spectrum(xi), halfwidth, points);
        let table = Table1d::new(halfwidth, samples);
        let envelope = calibrate_envelope(&table);
        let peak = table.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        let truncation_error = envelope.eval(halfwidth);
        Self {
            id,
            dim,
            profile,
            evaluator: Evaluator::Table(Arc::new(table)),
            envelope,
            peak,
            truncation_error,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn eval_mode(&self) -> EvalMode {
        match &self.evaluator {
            Evaluator::ClosedForm => EvalMode::ClosedForm,
            Evaluator::Table(t) | Evaluator::Squared { base: t, .. } => EvalMode::FftTable {
                halfwidth: t.halfwidth(),
                points: t.samples().len(),
            },
        }
    }

    pub fn flat_radius(&self) -> f64 {
        self.profile.flat_radius()
    }

    pub fn weak_order(&self) -> Option<u32> {
        self.profile.weak_order()
    }

    pub fn smoothness_class(&self) -> Smoothness {
        self.profile.smoothness()
    }

    /// `Π = [-s, s]^d`; returns `s`.
    pub fn support_halfwidth(&self) -> f64 {
        self.profile.support()
    }

    pub fn is_slow(&self) -> bool {
        self.profile.is_slow()
    }

    /// `supp θ ⊂ (-1, 1)^d`.
    pub fn operator_ready(&self) -> bool {
        self.profile.support() < 1.0
    }

    /// Error committed by returning zero off the table.
    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    pub fn axis_envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    /// `sup |φ₁|`.
    pub fn axis_peak(&self) -> f64 {
        self.peak
    }

    /// Bound on `|φ(x)|` in terms of `|x|_∞`.
    pub fn envelope(&self, r: f64) -> f64 {
        self.envelope.eval(r) * self.peak.powi(self.dim as i32 - 1)
    }

    /// `θ₁(t)`.
    pub fn axis_spectrum(&self, t: f64) -> Complex64 {
        self.profile.spectrum(t)
    }

    /// `θ(ξ) = ∏ θ₁(ξ_i)`.
    pub fn spectrum(&self, xi: &[f64]) -> Complex64 {
        xi.iter().map(|&t| self.profile.spectrum(t)).product()
    }

    /// `φ₁(t)`; zero off the table.
    pub fn axis_eval(&self, t: f64) -> Complex64 {
        match &self.evaluator {
            Evaluator::ClosedForm => match self.profile {
                Profile::Sinc => c(sinc(t)),
                Profile::Fejer { half_width } => c(half_width * sinc(half_width * t).powi(2)),
                _ => unreachable!(),
            },
            Evaluator::Table(table) => table.eval(t).unwrap_or_default(),
            Evaluator::Squared {
                base,
                scale,
                norm_sq,
            } => {
                let v = base.eval(scale * t).unwrap_or_default();
                c(scale * v.norm_sqr() / norm_sq)
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "kernel argument".into(),
                location: format!("{bad}"),
            });
        }
        Ok(x.iter().map(|&t| self.axis_eval(t)).product())
    }

    /// Smallest integer radius `R` with per-axis lattice tail below `tol`.
    pub fn effective_radius(&self, tol: f64) -> usize {
        let scale = self.peak.powi(self.dim as i32 - 1).max(1e-300);
        let cap = match &self.evaluator {
            Evaluator::Table(t) => t.halfwidth() as usize,
            Evaluator::Squared { base, scale, .. } => (base.halfwidth() / scale) as usize,
            Evaluator::ClosedForm => 1 << 20,
        };
        let mut r = 1usize;
        while r < cap && self.dim as f64 * self.envelope.lattice_tail(r) * scale > tol {
            r = (r + 1).max(r + r / 16);
        }
        r.min(cap)
    }
}

fn calibrate_envelope(table: &Table1d) -> DecayEnvelope {
    let samples = table.samples();
    let l = table.halfwidth();
    // |φ(x)| folded onto |x| and binned by integer radius
    let rmax = l.floor() as usize;
    let mut by_radius = vec![0.0f64; rmax + 1];
    for (i, v) in samples.iter().enumerate() {
        let k = (table.node(i).abs().floor() as usize).min(rmax);
        by_radius[k] = by_radius[k].max(v.norm());
    }
    let mut above = by_radius.clone();
    for r in (0..rmax).rev() {
        above[r] = above[r].max(above[r + 1]);
    }
    // bound for |x| ≥ r also covers the bin just below r, then doubled
    let env = (0..=rmax)
        .map(|r| 2.0 * above[r.saturating_sub(1)])
        .collect();
    let coeff = samples
        .iter()
        .enumerate()
        .filter(|(i, _)| table.node(*i).abs() >= 0.5 * l)
        .map(|(i, v)| v.norm() * (1.0 + table.node(i).abs()).powi(ENVELOPE_POWER))
        .fold(0.0, f64::max)
        * 2.0;
    DecayEnvelope {
        table: env,
        coeff,
        power: ENVELOPE_POWER,
    }
}

/// The analysing functional `φ̃`.
#[derive(Debug, Clone)]
pub enum DualFunctional {
    /// Point evaluation; coefficients are samples.
    Dirac,
    /// Indicator of `[0,1]^d`; coefficients are local averages.
    BoxAverage,
    /// An ordinary function dual.
    FunctionDual(BandLimitedKernel),
}

impl DualFunctional {
    /// Parse `dirac`, `box`, or `fn:<kernel-id>`.
    pub fn from_id(id: &str, dim: usize) -> Result<Self> {
        let id = id.trim();
        match id {
            "dirac" => Ok(Self::Dirac),
            "box" => Ok(Self::BoxAverage),
            _ => match id.strip_prefix("fn:") {
                Some(k) => {
                    let kernel = BandLimitedKernel::from_id(k, dim)?;
                    Self::function(kernel)
                }
                None => Err(Error::Parse(format!("unknown dual `{id}`"))),
            },
        }
    }

    /// Function dual; refuses kernels whose translates are not absolutely summable.
    pub fn function(kernel: BandLimitedKernel) -> Result<Self> {
        if kernel.is_slow() {
            return Err(Error::SlowKernel(kernel.id().to_string()));
        }
        Ok(Self::FunctionDual(kernel))
    }

    pub fn id(&self) -> String {
        match self {
            Self::Dirac => "dirac".into(),
            Self::BoxAverage => "box".into(),
            Self::FunctionDual(k) => format!("fn:{}", k.id()),
        }
    }

    /// Per-axis factor of `φ̃̂`.
    pub fn axis_spectrum(&self, t: f64) -> Complex64 {
        match self {
            Self::Dirac => c(1.0),
            Self::BoxAverage => Complex64::from_polar(1.0, -PI * t) * sinc(t),
            Self::FunctionDual(k) => k.axis_spectrum(t),
        }
    }

    pub fn spectrum(&self, xi: &[f64]) -> Complex64 {
        xi.iter().map(|&t| self.axis_spectrum(t)).product()
    }

    /// Radius of the ball around the origin on which `φ̃̂` is C^∞.
    pub fn smooth_radius(&self) -> f64 {
        match self {
            Self::Dirac | Self::BoxAverage => f64::INFINITY,
            Self::FunctionDual(k) => k.profile().smooth_radius(),
        }
    }
}

/// Weighted periodization norm `‖∑_k |g(·+k)| w*(·+k)‖_{L_p([0,1]^d)}` of an arbitrary
/// function, truncated to `|k|_∞ ≤ trunc_radius`. Returns the value and the residual
/// estimated from the shell `trunc_radius < |k|_∞ ≤ 2 trunc_radius` with `envelope`.
pub fn periodization_norm_fn(
    dim: usize,
    g: impl Fn(&[f64]) -> f64,
    envelope: impl Fn(f64) -> f64,
    p: f64,
    w_star: impl Fn(&[f64]) -> f64,
    trunc_radius: usize,
) -> Result<(f64, f64)> {
    if !(p >= 1.0) {
        return Err(invalid("periodization norm needs p ≥ 1"));
    }
    let q = 16usize;
    let nodes = quad::gauss_legendre(q, 0.0, 1.0);
    let r = trunc_radius as i64;
    let mut total = 0.0;
    let mut residual: f64 = 0.0;
    let count = q.pow(dim as u32);
    let mut x = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for flat in 0..count {
        let mut rem = flat;
        let mut weight = 1.0;
        for xi in x.iter_mut() {
            let (node, w) = nodes[rem % q];
            rem /= q;
            *xi = node;
            weight *= w;
        }
        let mut sum = 0.0;
        let mut shell = 0.0;
        for_each_lattice(dim, 2 * r, |k| {
            let linf = k.iter().map(|v| v.abs()).max().unwrap_or(0);
            for ((yi, xi), ki) in y.iter_mut().zip(&x).zip(k) {
                *yi = xi + *ki as f64;
            }
            if linf <= r {
                sum += g(&y).abs() * w_star(&y);
            } else {
                let ry = y.iter().map(|v| v.abs()).fold(0.0, f64::max);
                shell += envelope(ry) * w_star(&y);
            }
        });
        total += weight * sum.powf(p);
        residual = residual.max(shell);
    }
    if !total.is_finite() {
        return Err(Error::Periodization("non-finite periodization".into()));
    }
    Ok((total.powf(1.0 / p), residual))
}

fn for_each_lattice(dim: usize, radius: i64, mut f: impl FnMut(&[i64])) {
    let side = (2 * radius + 1) as usize;
    let mut k = vec![0i64; dim];
    for flat in 0..side.pow(dim as u32) {
        let mut rem = flat;
        for ki in k.iter_mut() {
            *ki = (rem % side) as i64 - radius;
            rem /= side;
        }
        f(&k);
    }
}

/// Weighted periodization norm of a kernel; slow-decay kernels are rejected.
pub fn periodization_norm(
    kernel: &BandLimitedKernel,
    p: f64,
    w_star: impl Fn(&[f64]) -> f64,
    trunc_radius: usize,
) -> Result<(f64, f64)> {
    if kernel.is_slow() {
        return Err(Error::Periodization(kernel.id().to_string()));
    }
    periodization_norm_fn(
        kernel.dim(),
        |x| kernel.eval(x).map(|v| v.norm()).unwrap_or(f64::INFINITY),
        |r| kernel.envelope(r),
        p,
        w_star,
        trunc_radius,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct Gauss–Legendre quadrature of `∫ θ₁(ξ) e^{2πixξ} dξ`, independent of the table.
    fn quadrature_axis_value(profile: &Profile, x: f64) -> Complex64 {
        let bp = profile.breakpoints();
        let mut acc = Complex64::new(0.0, 0.0);
        for w in bp.windows(2) {
            for sign in [-1.0, 1.0] {
                let (a, b) = if sign > 0.0 { (w[0], w[1]) } else { (-w[1], -w[0]) };
                for (xi, wt) in quad::composite_gauss_legendre(20, 40, a, b) {
                    acc += profile.spectrum(xi) * Complex64::from_polar(wt, 2.0 * PI * x * xi);
                }
            }
        }
        acc
    }

    #[test]
    fn sinc_values() {
        let k = BandLimitedKernel::sinc_tensor(1).unwrap();
        assert_eq!(k.eval(&[0.0]).unwrap().re, 1.0);
        assert!((k.eval(&[0.5]).unwrap().re - 2.0 / PI).abs() < 1e-15);
        let k2 = BandLimitedKernel::sinc_tensor(2).unwrap();
        for kk in [[1.0, 0.0], [0.0, -3.0], [2.0, 5.0]] {
            assert!(k2.eval(&kk).unwrap().norm() < 1e-15);
        }
        let mass: f64 = quad::gauss_legendre(8, -0.5, 0.5)
            .iter()
            .map(|&(x, w)| w * k.axis_spectrum(x).re)
            .sum();
        assert!((mass - 1.0).abs() < 1e-14);
        assert!(k.is_slow());
    }

    #[test]
    fn meyer_spectrum_values() {
        let k = BandLimitedKernel::meyer(1).unwrap();
        assert_eq!(k.spectrum(&[0.0]).re, 1.0);
        assert_eq!(k.spectrum(&[0.7]).re, 0.0);
        assert_eq!(k.flat_radius(), 1.0 / 3.0);
    }

    #[test]
    fn meyer_translates_are_orthonormal() {
        for smooth in [false, true] {
            let p = Profile::Meyer { smooth };
            for i in 0..200 {
                let xi = -0.5 + i as f64 / 199.0;
                let s: f64 = (-3..=3).map(|k| p.spectrum(xi + k as f64).norm_sqr()).sum();
                assert!((s - 1.0).abs() < 1e-10, "ξ={xi}: {s}");
            }
        }
    }

    #[test]
    fn meyer_table_matches_direct_quadrature() {
        let k = BandLimitedKernel::meyer(1).unwrap();
        let direct = quadrature_axis_value(k.profile(), 0.0);
        assert!((k.axis_eval(0.0) - direct).norm() < 1e-8);
        for x in [0.37, 2.5, 7.1] {
            let direct = quadrature_axis_value(k.profile(), x);
            assert!((k.axis_eval(x) - direct).norm() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn flat_top_construction() {
        let k = BandLimitedKernel::flat_top(2, 0.25, 0.45).unwrap();
        for xi in [[0.0, 0.0], [0.25, -0.25], [0.1, 0.2]] {
            assert_eq!(k.spectrum(&xi).re, 1.0);
        }
        for xi in [[0.45, 0.0], [0.0, -0.6], [0.9, 0.9]] {
            assert_eq!(k.spectrum(&xi).re, 0.0);
        }
        let at0 = k.eval(&[0.0, 0.0]).unwrap();
        assert!(at0.re > 0.0);
        assert!(BandLimitedKernel::flat_top(1, 0.45, 0.25).is_err());
        assert!(BandLimitedKernel::flat_top(1, 0.25, 1.0).is_err());
        assert!(BandLimitedKernel::flat_top_unchecked(1, 0.5, 1.2).is_ok());
    }

    #[test]
    fn weak_order_kernel_derivatives() {
        let p = Profile::WeakOrder {
            order: 1,
            coeff: 1.0,
            flat: 0.25,
            cutoff: 0.45,
        };
        let h = 1e-4;
        let d1 = (p.spectrum(h) - p.spectrum(-h)).re / (2.0 * h);
        assert!((d1 + 1.0).abs() < 1e-8);
        let p2 = Profile::WeakOrder {
            order: 2,
            coeff: 1.0,
            flat: 0.25,
            cutoff: 0.45,
        };
        let d1 = (p2.spectrum(h) - p2.spectrum(-h)).re / (2.0 * h);
        let d2 = (p2.spectrum(h) - 2.0 * p2.spectrum(0.0) + p2.spectrum(-h)).re / (h * h);
        assert!(d1.abs() < 1e-10);
        assert!((d2 + 2.0).abs() < 1e-5);
    }

    #[test]
    fn envelope_bounds_table() {
        for k in [
            BandLimitedKernel::flat_top(1, 0.25, 0.45).unwrap(),
            BandLimitedKernel::meyer(1).unwrap(),
            BandLimitedKernel::weak(1, 2, 0.25, 0.45).unwrap(),
            BandLimitedKernel::squared_flat_top(1, 0.12).unwrap(),
        ] {
            for i in 0..20000 {
                let x = -200.0 + 0.02 * i as f64;
                let v = k.axis_eval(x).norm();
                assert!(v <= k.axis_envelope().eval(x.abs()) + 1e-15, "{} at {x}", k.id());
            }
        }
    }

    #[test]
    fn table_round_trip_reproduces_spectrum() {
        let (l, n) = (64.0, 4096);
        let p = Profile::FlatTop {
            flat: 0.25,
            cutoff: 0.45,
        };
        let table = fourier::synthesize_1d(|xi| p.spectrum(xi), l, n);
        let arr = ndarray::ArrayD::from_shape_vec(ndarray::IxDyn(&[n]), table).unwrap();
        let spec = fourier::forward(&arr, l);
        let dl = fourier::dual_halfwidth(l, n);
        let err = spec
            .iter()
            .enumerate()
            .map(|(m, v)| (v - p.spectrum(-dl + m as f64 / (2.0 * l))).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn strang_fix_lattice_zeros() {
        for k in [
            BandLimitedKernel::flat_top(2, 0.25, 0.45).unwrap(),
            BandLimitedKernel::meyer(2).unwrap(),
        ] {
            for l in [[1.0, 0.0], [0.0, -1.0], [1.0, 1.0], [-2.0, 3.0]] {
                assert_eq!(k.spectrum(&l).norm(), 0.0);
            }
        }
    }

    #[test]
    fn box_dual_spectrum() {
        let d = DualFunctional::BoxAverage;
        assert!((d.spectrum(&[0.0, 0.0]) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        for xi in [[0.3, -0.2], [1.5, 0.7]] {
            let expect = sinc(xi[0]).abs() * sinc(xi[1]).abs();
            assert!((d.spectrum(&xi).norm() - expect).abs() < 1e-14);
        }
        assert_eq!(DualFunctional::Dirac.spectrum(&[0.4]).re, 1.0);
    }

    #[test]
    fn registry_ids() {
        let k = BandLimitedKernel::from_id("flat_top:0.25:0.45", 1).unwrap();
        assert_eq!(k.flat_radius(), 0.25);
        let k = BandLimitedKernel::from_id("weak:3:0.2:0.4", 2).unwrap();
        assert_eq!(k.weak_order(), Some(3));
        assert!(BandLimitedKernel::from_id("nope", 1).is_err());
        assert!(BandLimitedKernel::from_id("weak:0:0.2:0.4", 1).is_err());
        assert!(matches!(DualFunctional::from_id("fn:meyer", 1), Ok(DualFunctional::FunctionDual(_))));
        assert!(matches!(DualFunctional::from_id("fn:sinc", 1), Err(Error::SlowKernel(_))));
        assert_eq!(DualFunctional::from_id("box", 1).unwrap().id(), "box");
    }

    #[test]
    fn mollifier_is_nonnegative_with_unit_mass() {
        let v = BandLimitedKernel::squared_flat_top(1, 0.12).unwrap();
        assert!((v.axis_spectrum(0.0).re - 1.0).abs() < 1e-12);
        assert_eq!(v.axis_spectrum(0.12).re, 0.0);
        let mass: f64 = quad::composite_gauss_legendre(8, 4000, -1000.0, 1000.0)
            .iter()
            .map(|&(x, w)| {
                let val = v.axis_eval(x).re;
                assert!(val >= 0.0);
                w * val
            })
            .sum();
        assert!((mass - 1.0).abs() < 1e-6, "{mass}");
    }

    #[test]
    fn periodization_of_indicator_is_one() {
        for p in [1.5, 2.0, 4.0] {
            let (v, _) = periodization_norm_fn(
                2,
                |x| if x.iter().all(|&t| (0.0..1.0).contains(&t)) { 1.0 } else { 0.0 },
                |_| 0.0,
                p,
                |_| 1.0,
                2,
            )
            .unwrap();
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn periodization_rejects_sinc() {
        let k = BandLimitedKernel::sinc_tensor(1).unwrap();
        assert!(matches!(periodization_norm(&k, 2.0, |_| 1.0, 8), Err(Error::Periodization(_))));
    }

    #[test]
    fn periodization_converges_for_meyer() {
        let alpha: f64 = 0.25;
        let w_star = |x: &[f64]| 2f64.powf(alpha / 2.0) * (1.0 + x[0] * x[0]).powf(alpha / 2.0);
        let k = BandLimitedKernel::meyer(1).unwrap();
        let (n8, res8) = periodization_norm(&k, 2.0, w_star, 8).unwrap();
        let (n16, _) = periodization_norm(&k, 2.0, w_star, 16).unwrap();
        assert!(n8.is_finite() && n16 >= n8);
        assert!(n16 - n8 <= res8, "{} vs {}", n16 - n8, res8);
        let ks = BandLimitedKernel::meyer_smooth(1).unwrap();
        let (a, _) = periodization_norm(&ks, 2.0, w_star, 64).unwrap();
        let (b, _) = periodization_norm(&ks, 2.0, w_star, 128).unwrap();
        assert!((b - a).abs() < 1e-6, "{}", b - a);
    }
}
