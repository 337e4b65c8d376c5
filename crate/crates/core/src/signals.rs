//! Test signals with known spectra, and uniform-grid samples of them.

use std::f64::consts::PI;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::fourier;
use crate::interp::UniformTable;
use crate::quad;
use crate::weights::Weight;

pub type PointEval = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;
pub type AxisEval = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// One rank-one term `coeff · ∏ factors[i](x_i)` of a separable signal.
#[derive(Clone)]
pub struct SeparableTerm {
    pub coeff: Complex64,
    pub factors: Vec<AxisEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SignalKind {
    Gaussian { scale: f64 },
    BandLimited { radius: f64, seed: u64 },
    MaternLike { a: f64 },
    TrigPolynomial { terms: usize },
    WeightedProduct { base: Box<SignalKind>, weight: String },
    Combination { parts: usize },
    Custom { name: String },
}

/// A pointwise-evaluable signal on `R^d`.
#[derive(Clone)]
pub struct Signal {
    dim: usize,
    kind: SignalKind,
    eval: PointEval,
    separable: Option<Vec<SeparableTerm>>,
    spectral_decay_a: Option<f64>,
    weight: Option<Weight>,
    base_spectrum: Option<PointEval>,
    band_radius: Option<f64>,
    real: bool,
}

impl fmt::Debug for Signal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Signal")
            .field("dim", &self.dim)
            .field("kind", &self.kind)
            .field("spectral_decay_a", &self.spectral_decay_a)
            .field("band_radius", &self.band_radius)
            .finish()
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl Signal {
    fn plain(dim: usize, kind: SignalKind, eval: PointEval) -> Self {
        Self {
            dim,
            kind,
            eval,
            separable: None,
            spectral_decay_a: None,
            weight: None,
            base_spectrum: None,
            band_radius: None,
            real: false,
        }
    }

    /// Arbitrary evaluator; nothing is known about its spectrum.
    pub fn custom(name: &str, dim: usize, f: impl Fn(&[f64]) -> Complex64 + Send + Sync + 'static) -> Self {
        Self::plain(dim, SignalKind::Custom { name: name.into() }, Arc::new(f))
    }

    pub fn constant(dim: usize, value: f64) -> Self {
        let mut s = Self::custom(&format!("const:{value}"), dim, move |_| c(value));
        let one: AxisEval = Arc::new(|_| c(1.0));
        s.separable = Some(vec![SeparableTerm {
            coeff: c(value),
            factors: vec![one; dim],
        }]);
        s.real = true;
        s
    }

    pub fn zero(dim: usize) -> Self {
        let mut s = Self::constant(dim, 0.0);
        s.base_spectrum = Some(Arc::new(|_| c(0.0)));
        s.band_radius = Some(0.0);
        s
    }

    /// `e^{-π|x/s|²}` with spectrum `s^d e^{-π s²|ξ|²}`.
    pub fn gaussian(dim: usize, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(invalid(format!("gaussian scale must be positive, got {scale}")));
        }
        let factor: AxisEval = Arc::new(move |t| c((-PI * (t / scale).powi(2)).exp()));
        let f2 = factor.clone();
        let mut s = Self::plain(
            dim,
            SignalKind::Gaussian { scale },
            Arc::new(move |x| x.iter().map(|&t| f2(t)).product()),
        );
        s.separable = Some(vec![SeparableTerm {
            coeff: c(1.0),
            factors: vec![factor; dim],
        }]);
        s.base_spectrum = Some(Arc::new(move |xi: &[f64]| {
            xi.iter()
                .map(|&t| c(scale * (-PI * (scale * t).powi(2)).exp()))
                .product()
        }));
        s.real = true;
        Ok(s)
    }

    /// Seeded real signal with spectrum `P(ξ) ∏ b(ξ_i)`, `b` a C^∞ bump on
    /// `[-ρ/√d, ρ/√d]` and `P` a random Hermitian polynomial of degree ≤ 2 per axis,
    /// so `supp f̂ ⊂ {|ξ| ≤ ρ}`.
    pub fn bandlimited(dim: usize, radius: f64, seed: u64) -> Result<Self> {
        if !(radius > 0.0) || dim == 0 {
            return Err(invalid(format!("band-limited signal needs ρ > 0 and d ≥ 1, got ρ={radius}")));
        }
        let half = radius / (dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bump = move |t: f64| -> f64 {
            let u = t / half;
            if u.abs() >= 1.0 {
                0.0
            } else {
                (1.0 - 1.0 / (1.0 - u * u)).exp()
            }
        };
        let base_rule = Arc::new(quad::gauss_legendre(16, 0.0, 1.0));
        let moments: Vec<AxisEval> = (0..3)
            .map(|m| {
                let rule = base_rule.clone();
                Arc::new(move |x: f64| {
                    // b is even, so ∫ t^m b(t) e^{2πixt} dt is 2∫₀^r t^m b(t) cos(2πxt) dt
                    // for even m and 2i∫₀^r t^m b(t) sin(2πxt) dt for odd m
                    let panels = 16 + (0.8 * half * x.abs()).ceil() as usize;
                    let width = half / panels as f64;
                    let mut acc = 0.0;
                    for p in 0..panels {
                        let lo = width * p as f64;
                        for &(u, w) in rule.iter() {
                            let t = lo + width * u;
                            let phase = 2.0 * PI * x * t;
                            let osc = if m % 2 == 0 { phase.cos() } else { phase.sin() };
                            acc += w * t.powi(m) * bump(t) * osc;
                        }
                    }
                    let v = 2.0 * width * acc;
                    if m % 2 == 0 {
                        c(v)
                    } else {
                        Complex64::new(0.0, v)
                    }
                }) as AxisEval
            })
            .collect();
        let count = 3usize.pow(dim as u32);
        let mut terms = Vec::with_capacity(count);
        let mut poly = Vec::with_capacity(count);
        for flat in 0..count {
            let mut rem = flat;
            let powers: Vec<usize> = (0..dim)
                .map(|_| {
                    let a = rem % 3;
                    rem /= 3;
                    a
                })
                .collect();
            let r: f64 = if flat == 0 { 1.0 } else { rng.random_range(-1.0..1.0) };
            let degree: usize = powers.iter().sum();
            // i^{|a|} makes the spectrum Hermitian, so the signal is real
            let coeff = r * Complex64::i().powu(degree as u32) / half.powi(degree as i32);
            terms.push(SeparableTerm {
                coeff,
                factors: powers.iter().map(|&a| moments[a].clone()).collect(),
            });
            poly.push((coeff, powers));
        }
        let eval_terms = terms.clone();
        let mut s = Self::plain(
            dim,
            SignalKind::BandLimited { radius, seed },
            Arc::new(move |x| {
                eval_terms
                    .iter()
                    .map(|t| t.coeff * t.factors.iter().zip(x).map(|(f, &xi)| f(xi)).product::<Complex64>())
                    .sum()
            }),
        );
        s.base_spectrum = Some(Arc::new(move |xi: &[f64]| {
            let b: f64 = xi.iter().map(|&t| bump(t)).product();
            if b == 0.0 {
                return c(0.0);
            }
            poly.iter()
                .map(|(coeff, powers)| {
                    coeff * powers.iter().zip(xi).map(|(&a, &t)| t.powi(a as i32)).product::<f64>()
                })
                .sum::<Complex64>()
                * b
        }));
        s.separable = Some(terms);
        s.band_radius = Some(radius);
        s.real = true;
        Ok(s)
    }

    /// The radial function `g` with `ĝ(ξ) = (1+|ξ|²)^{-(d+a)/2}`.
    pub fn matern_base(dim: usize, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(invalid(format!("decay exponent a must be positive, got {a}")));
        }
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let s_exp = 0.5 * (dim as f64 + a);
        let mut s = Self::plain(
            dim,
            SignalKind::MaternLike { a },
            Arc::new(move |x: &[f64]| {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                c(bessel_potential(dim, s_exp, r))
            }),
        );
        s.base_spectrum = Some(Arc::new(move |xi: &[f64]| {
            c((1.0 + xi.iter().map(|v| v * v).sum::<f64>()).powf(-s_exp))
        }));
        s.spectral_decay_a = Some(a);
        s.real = true;
        Ok(s)
    }

    /// `f = w · g` with `g` from [`Signal::matern_base`]: `F(f/w)` decays exactly like `|ξ|^{-d-a}`
    /// while `f` itself grows like `w`.
    pub fn matern_like(dim: usize, a: f64, w: &Weight) -> Result<Self> {
        let base = Self::matern_base(dim, a)?;
        let mut s = Self::weighted(&base, w)?;
        s.kind = SignalKind::MaternLike { a };
        Ok(s)
    }

    /// `∑ c_ν e^{2πi(ν,x)}`.
    pub fn trig_polynomial(dim: usize, terms: Vec<(Vec<f64>, Complex64)>) -> Result<Self> {
        if terms.iter().any(|(nu, _)| nu.len() != dim) {
            return Err(invalid("frequency vector has wrong dimension"));
        }
        let n = terms.len();
        let sep = terms
            .iter()
            .map(|(nu, coeff)| SeparableTerm {
                coeff: *coeff,
                factors: nu
                    .iter()
                    .map(|&v| Arc::new(move |t: f64| Complex64::from_polar(1.0, 2.0 * PI * v * t)) as AxisEval)
                    .collect(),
            })
            .collect();
        let mut s = Self::plain(
            dim,
            SignalKind::TrigPolynomial { terms: n },
            Arc::new(move |x| {
                terms
                    .iter()
                    .map(|(nu, coeff)| {
                        let phase: f64 = nu.iter().zip(x).map(|(a, b)| a * b).sum();
                        coeff * Complex64::from_polar(1.0, 2.0 * PI * phase)
                    })
                    .sum()
            }),
        );
        s.separable = Some(sep);
        Ok(s)
    }

    /// `w · base`; the spectral metadata of `base` becomes that of `f/w`.
    pub fn weighted(base: &Signal, w: &Weight) -> Result<Self> {
        if base.dim != w.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                got: w.dim(),
            });
        }
        let inner = base.eval.clone();
        let weight = w.clone();
        let mut s = Self::plain(
            base.dim,
            SignalKind::WeightedProduct {
                base: Box::new(base.kind.clone()),
                weight: w.label(),
            },
            Arc::new(move |x| inner(x) * weight.eval(x)),
        );
        s.spectral_decay_a = base.spectral_decay_a;
        s.base_spectrum = base.base_spectrum.clone();
        s.band_radius = base.band_radius;
        s.weight = Some(w.clone());
        s.real = base.real;
        Ok(s)
    }

    /// `∑ a_i f_i`.
    pub fn combination(parts: &[(Complex64, &Signal)]) -> Result<Self> {
        let dim = parts.first().map(|p| p.1.dim).ok_or_else(|| invalid("empty combination"))?;
        if let Some(p) = parts.iter().find(|p| p.1.dim != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.1.dim,
            });
        }
        let evals: Vec<(Complex64, PointEval)> = parts.iter().map(|(a, f)| (*a, f.eval.clone())).collect();
        let separable = parts
            .iter()
            .map(|(a, f)| {
                f.separable.as_ref().map(|terms| {
                    terms
                        .iter()
                        .map(|t| SeparableTerm {
                            coeff: t.coeff * a,
                            factors: t.factors.clone(),
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        let mut s = Self::plain(
            dim,
            SignalKind::Combination { parts: parts.len() },
            Arc::new(move |x| evals.iter().map(|(a, f)| a * f(x)).sum()),
        );
        s.separable = separable;
        s.real = parts.iter().all(|(a, f)| f.real && a.im == 0.0);
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &SignalKind {
        &self.kind
    }

    pub fn spectral_decay_a(&self) -> Option<f64> {
        self.spectral_decay_a
    }

    pub fn associated_weight(&self) -> Option<&Weight> {
        self.weight.as_ref()
    }

    /// Closed-form `F(f/w)` (or `f̂` when no weight is attached), if known.
    pub fn base_spectrum(&self, xi: &[f64]) -> Option<Complex64> {
        self.base_spectrum.as_ref().map(|s| s(xi))
    }

    pub fn has_base_spectrum(&self) -> bool {
        self.base_spectrum.is_some()
    }

    /// Radius of a ball containing `supp F(f/w)`, if compact.
    pub fn band_radius(&self) -> Option<f64> {
        self.band_radius
    }

    /// Rank-one decomposition, when the signal has one.
    pub fn separable_terms(&self) -> Option<&[SeparableTerm]> {
        self.separable.as_deref()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        (self.eval)(x)
    }

    /// Values on the tensor grid `axes[0] × … × axes[d-1]`.
    pub fn sample_tensor(&self, axes: &[Vec<f64>]) -> Result<ArrayD<Complex64>> {
        if axes.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: axes.len(),
            });
        }
        let shape: Vec<usize> = axes.iter().map(|a| a.len()).collect();
        let mut out = ArrayD::from_elem(IxDyn(&shape), Complex64::new(0.0, 0.0));
        match &self.separable {
            Some(terms) => {
                for term in terms {
                    let factors: Vec<Vec<Complex64>> = term
                        .factors
                        .iter()
                        .zip(axes)
                        .map(|(f, axis)| axis.iter().map(|&t| f(t)).collect())
                        .collect();
                    for (ix, v) in out.indexed_iter_mut() {
                        let mut prod = term.coeff;
                        for (axis, f) in factors.iter().enumerate() {
                            prod *= f[ix[axis]];
                        }
                        *v += prod;
                    }
                }
            }
            None => {
                let mut x = vec![0.0; self.dim];
                for (ix, v) in out.indexed_iter_mut() {
                    for (axis, xi) in x.iter_mut().enumerate() {
                        *xi = axes[axis][ix[axis]];
                    }
                    *v = (self.eval)(&x);
                }
            }
        }
        if let Some((ix, _)) = out.indexed_iter().find(|(_, v)| !v.is_finite()) {
            let loc: Vec<f64> = (0..self.dim).map(|a| axes[a][ix[a]]).collect();
            return Err(Error::NonFinite {
                what: "signal value".into(),
                location: format!("{loc:?}"),
            });
        }
        Ok(out)
    }

    /// Samples on the grid `x = -L + 2L i / N`.
    pub fn sample_to_grid(&self, halfwidth: f64, points: usize) -> Result<GridSignal> {
        check_grid(halfwidth, points)?;
        let h = 2.0 * halfwidth / points as f64;
        let axis: Vec<f64> = (0..points).map(|i| -halfwidth + h * i as f64).collect();
        let samples = self.sample_tensor(&vec![axis; self.dim])?;
        GridSignal::new(halfwidth, samples)
    }
}

/// `g(r) = π^{d/2}/Γ(s) ∫ t^{s-1-d/2} e^{-t} e^{-π²r²/t} dt`, the inverse transform of
/// `(1+|ξ|²)^{-s}`, by the trapezoid rule in `u = ln t`.
fn bessel_potential(dim: usize, s: f64, r: f64) -> f64 {
    let half_d = 0.5 * dim as f64;
    let norm = PI.powf(half_d) / libm::tgamma(s);
    let c0 = s - half_d;
    if r == 0.0 {
        return norm * libm::tgamma(c0);
    }
    let b = PI * PI * r * r;
    let exponent = |u: f64| c0 * u - u.exp() - b * (-u).exp();
    let peak = ((c0 + (c0 * c0 + 4.0 * b).sqrt()) / 2.0).ln();
    let top = exponent(peak);
    const STEP: f64 = 0.2;
    let mut acc = (top).exp();
    for dir in [-1.0, 1.0] {
        let mut k = 1.0;
        loop {
            let e = exponent(peak + dir * STEP * k);
            acc += e.exp();
            if e < top - 45.0 {
                break;
            }
            k += 1.0;
        }
    }
    norm * STEP * acc
}

fn check_grid(halfwidth: f64, points: usize) -> Result<()> {
    if !(halfwidth > 0.0) || !halfwidth.is_finite() {
        return Err(invalid(format!("grid halfwidth must be positive, got {halfwidth}")));
    }
    if points < 2 || !points.is_power_of_two() {
        return Err(invalid(format!("points per axis must be a power of two, got {points}")));
    }
    Ok(())
}

/// Samples on the centred cube grid `x = -L + 2L i/N` along every axis.
#[derive(Debug, Clone)]
pub struct GridSignal {
    table: UniformTable,
}

impl GridSignal {
    pub fn new(halfwidth: f64, samples: ArrayD<Complex64>) -> Result<Self> {
        let n = samples.shape().first().copied().unwrap_or(0);
        check_grid(halfwidth, n)?;
        if samples.shape().iter().any(|&m| m != n) {
            return Err(invalid(format!("grid must be a cube, got shape {:?}", samples.shape())));
        }
        if let Some((ix, _)) = samples.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "grid sample".into(),
                location: format!("{ix:?}"),
            });
        }
        Ok(Self {
            table: UniformTable::new(halfwidth, samples),
        })
    }

    pub fn zeros(dim: usize, halfwidth: f64, points: usize) -> Result<Self> {
        let shape = vec![points; dim];
        Self::new(halfwidth, ArrayD::from_elem(IxDyn(&shape), Complex64::new(0.0, 0.0)))
    }

    pub fn dim(&self) -> usize {
        self.table.dim()
    }

    pub fn halfwidth(&self) -> f64 {
        self.table.halfwidth()
    }

    pub fn points(&self) -> usize {
        self.table.points()
    }

    pub fn step(&self) -> f64 {
        self.table.step()
    }

    pub fn samples(&self) -> &ArrayD<Complex64> {
        self.table.values()
    }

    pub fn node(&self, i: usize) -> f64 {
        self.table.node(i)
    }

    pub fn axis_nodes(&self) -> Vec<f64> {
        (0..self.points()).map(|i| self.node(i)).collect()
    }

    /// Local cubic interpolation; `None` off `[-L, L-h]^d`.
    pub fn interpolate(&self, x: &[f64]) -> Option<Complex64> {
        self.table.eval(x)
    }

    /// Same grid, new samples.
    pub fn with_samples(&self, samples: ArrayD<Complex64>) -> Result<Self> {
        Self::new(self.halfwidth(), samples)
    }

    /// `f̂(ξ_m)` on the frequency grid of halfwidth `N/(4L)`.
    pub fn spectrum(&self) -> GridSignal {
        let spec = fourier::forward(self.samples(), self.halfwidth());
        Self {
            table: UniformTable::new(fourier::dual_halfwidth(self.halfwidth(), self.points()), spec),
        }
    }

    /// Inverse of [`GridSignal::spectrum`], applied to a frequency-domain grid.
    pub fn inverse_spectrum(&self) -> GridSignal {
        let space_half = self.points() as f64 / (4.0 * self.halfwidth());
        Self {
            table: UniformTable::new(space_half, fourier::inverse(self.samples(), space_half)),
        }
    }

    /// Little-endian `{dim: u32, N: u64, L: f64}` followed by interleaved `re, im` pairs.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path)?);
        self.write_binary_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    pub fn write_binary_to(&self, out: &mut impl Write) -> Result<()> {
        out.write_all(&(self.dim() as u32).to_le_bytes())?;
        out.write_all(&(self.points() as u64).to_le_bytes())?;
        out.write_all(&self.halfwidth().to_le_bytes())?;
        for v in self.samples().iter() {
            out.write_all(&v.re.to_le_bytes())?;
            out.write_all(&v.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut input = BufReader::new(File::open(path)?);
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        input.read_exact(&mut b4)?;
        let dim = u32::from_le_bytes(b4) as usize;
        input.read_exact(&mut b8)?;
        let n = u64::from_le_bytes(b8) as usize;
        input.read_exact(&mut b8)?;
        let halfwidth = f64::from_le_bytes(b8);
        if dim == 0 || dim > 8 {
            return Err(Error::Parse(format!("unsupported grid dimension {dim}")));
        }
        check_grid(halfwidth, n)?;
        let total = n
            .checked_pow(dim as u32)
            .ok_or_else(|| Error::Parse("grid too large".into()))?;
        let mut data = Vec::with_capacity(total);
        for _ in 0..total {
            input.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            input.read_exact(&mut b8)?;
            data.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        if input.read(&mut b4)? != 0 {
            return Err(Error::Parse("trailing bytes after grid samples".into()));
        }
        let samples = ArrayD::from_shape_vec(IxDyn(&vec![n; dim]), data)
            .map_err(|e| Error::Parse(e.to_string()))?;
        Self::new(halfwidth, samples)
    }

    /// CSV `x,re,im` along `axis`, other indices fixed at `fixed` (ignored entry at `axis`).
    pub fn write_csv_slice(&self, path: &Path, axis: usize, fixed: &[usize]) -> Result<()> {
        if axis >= self.dim() || fixed.len() != self.dim() {
            return Err(invalid("slice axis or fixed index has wrong dimension"));
        }
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "x,re,im")?;
        let mut idx = fixed.to_vec();
        for i in 0..self.points() {
            idx[axis] = i;
            let v = self.samples()[IxDyn(&idx)];
            writeln!(out, "{:.17e},{:.17e},{:.17e}", self.node(i), v.re, v.im)?;
        }
        out.flush()?;
        Ok(())
    }
}
