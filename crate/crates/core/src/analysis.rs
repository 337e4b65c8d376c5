//! Weighted norms, moduli of smoothness, best-approximation surrogates, spectral tail
//! bounds, error curves and rate fits.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use ndarray::IxDyn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::dilation::{DiagonalPower, DilationMatrix};
use crate::error::{invalid, Error, Result};
use crate::kernels::{flat_top_profile, BandLimitedKernel, DualFunctional};
use crate::qproj::{apply_operator, ErrorBudget, OperatorOptions};
use crate::quad::{self, binomial};
use crate::signals::{GridSignal, Signal};
use crate::weights::Weight;

/// Where a norm is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Region {
    Full,
    /// The central `[−L/2, L/2]^d` part of the grid.
    Interior,
}

/// How the weight enters the norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeightMode {
    TimesW,
    OverW,
    Unweighted,
}

fn in_region(x: f64, halfwidth: f64, region: Region) -> bool {
    match region {
        Region::Full => true,
        Region::Interior => x.abs() <= 0.5 * halfwidth,
    }
}

fn weight_factor(w: &Weight, x: &[f64], mode: WeightMode) -> f64 {
    match mode {
        WeightMode::TimesW => w.eval(x),
        WeightMode::OverW => 1.0 / w.eval(x),
        WeightMode::Unweighted => 1.0,
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(invalid(format!("p must lie in [1, ∞), got {p}")));
    }
    Ok(())
}

/// `(h^d ∑ |g w^{±1}|^p)^{1/p}` over the grid nodes in `region`.
pub fn weighted_norm(g: &GridSignal, p: f64, mode: WeightMode, w: &Weight, region: Region) -> Result<f64> {
    check_p(p)?;
    let l = g.halfwidth();
    let nodes = g.axis_nodes();
    let mut x = vec![0.0; g.dim()];
    let mut acc = 0.0;
    for (ix, v) in g.samples().indexed_iter() {
        for (a, xi) in x.iter_mut().enumerate() {
            *xi = nodes[ix[a]];
        }
        if x.iter().all(|&t| in_region(t, l, region)) {
            acc += (v.norm() * weight_factor(w, &x, mode)).powf(p);
        }
    }
    Ok((acc * g.step().powi(g.dim() as i32)).powf(1.0 / p))
}

/// Grid nodes on which pointwise norms are evaluated.
#[derive(Debug, Clone)]
pub struct NormDomain {
    pub dim: usize,
    pub halfwidth: f64,
    pub points: usize,
    pub region: Region,
}

impl NormDomain {
    pub fn new(dim: usize, halfwidth: f64, points: usize, region: Region) -> Result<Self> {
        if !(halfwidth > 0.0) || points < 2 || !points.is_power_of_two() {
            return Err(invalid(format!("bad norm grid L={halfwidth}, N={points}")));
        }
        Ok(Self {
            dim,
            halfwidth,
            points,
            region,
        })
    }

    pub fn step(&self) -> f64 {
        2.0 * self.halfwidth / self.points as f64
    }

    /// Region nodes in row-major order.
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        let h = self.step();
        let axis: Vec<f64> = (0..self.points)
            .map(|i| -self.halfwidth + h * i as f64)
            .filter(|&t| in_region(t, self.halfwidth, self.region))
            .collect();
        let n = axis.len();
        (0..n.pow(self.dim as u32))
            .map(|flat| {
                let mut rem = flat;
                let mut x = vec![0.0; self.dim];
                for xi in x.iter_mut().rev() {
                    *xi = axis[rem % n];
                    rem /= n;
                }
                x
            })
            .collect()
    }

    /// Largest `|x_i|` over the region.
    pub fn reach(&self) -> f64 {
        match self.region {
            Region::Full => self.halfwidth,
            Region::Interior => 0.5 * self.halfwidth,
        }
    }
}

/// What a modulus of smoothness is computed for.
#[derive(Clone, Copy)]
pub enum Source<'a> {
    Signal(&'a Signal),
    /// Evaluated by local cubic interpolation.
    Grid(&'a GridSignal),
}

impl Source<'_> {
    fn dim(&self) -> usize {
        match self {
            Source::Signal(s) => s.dim(),
            Source::Grid(g) => g.dim(),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<Complex64> {
        match self {
            Source::Signal(s) => Ok(s.eval(x)),
            Source::Grid(g) => g.interpolate(x).ok_or_else(|| {
                Error::GridMargin(format!("difference stencil leaves the grid at {x:?}"))
            }),
        }
    }
}

/// Precomputed nodes, weight factors and values of `f` on a norm domain.
struct Evaluator<'a> {
    src: Source<'a>,
    nodes: Vec<Vec<f64>>,
    factors: Vec<f64>,
    base: Vec<Complex64>,
    cell: f64,
    p: f64,
}

impl<'a> Evaluator<'a> {
    fn new(src: Source<'a>, p: f64, w: &Weight, domain: &NormDomain) -> Result<Self> {
        check_p(p)?;
        if src.dim() != domain.dim || w.dim() != domain.dim {
            return Err(Error::DimensionMismatch {
                expected: domain.dim,
                got: src.dim(),
            });
        }
        let nodes = domain.nodes();
        let factors = nodes.iter().map(|x| 1.0 / w.eval(x)).collect();
        let base = nodes.iter().map(|x| src.eval(x)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            src,
            nodes,
            factors,
            base,
            cell: domain.step().powi(domain.dim as i32),
            p,
        })
    }

    /// `‖Δ_δ^n f‖_{p,1/w}` over the domain.
    fn difference_norm(&self, n: u32, delta: &[f64]) -> Result<f64> {
        let coeffs: Vec<f64> = (0..=n)
            .map(|nu| binomial(n, nu) * if (n - nu).is_multiple_of(2) { 1.0 } else { -1.0 })
            .collect();
        let mut acc = 0.0;
        let mut y = vec![0.0; delta.len()];
        for ((x, &fac), &f0) in self.nodes.iter().zip(&self.factors).zip(&self.base) {
            let mut v = f0 * coeffs[0];
            for (nu, &c) in coeffs.iter().enumerate().skip(1) {
                for ((yi, xi), di) in y.iter_mut().zip(x).zip(delta) {
                    *yi = xi + nu as f64 * di;
                }
                v += self.src.eval(&y)? * c;
            }
            acc += (v.norm() * fac).powf(self.p);
        }
        Ok((acc * self.cell).powf(1.0 / self.p))
    }
}

#[derive(Debug, Clone)]
pub struct ModulusOptions {
    /// Random directions in addition to the axes.
    pub dirs: usize,
    pub seed: u64,
    pub domain: NormDomain,
}

impl ModulusOptions {
    /// 16 random directions in one dimension, 64 otherwise.
    pub fn standard(domain: NormDomain, seed: u64) -> Self {
        Self {
            dirs: if domain.dim == 1 { 16 } else { 64 },
            seed,
            domain,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ModulusValue {
    pub value: f64,
    /// Step attaining the sampled supremum.
    pub delta: Vec<f64>,
    pub candidates: usize,
}

fn random_unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        if r > 1e-3 && r <= 1.0 {
            return v.iter().map(|t| t / r).collect();
        }
    }
}

/// Unit-ball samples `u`: axes at `{1, 1/2, 1/4}` and seeded random directions at `1 − 1e−6`.
fn ball_candidates(d: usize, dirs: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(3 * d + dirs);
    for axis in 0..d {
        for s in [1.0, 0.5, 0.25] {
            let mut u = vec![0.0; d];
            u[axis] = s;
            out.push(u);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..dirs {
        out.push(random_unit(&mut rng, d).into_iter().map(|t| t * (1.0 - 1e-6)).collect());
    }
    out
}

fn check_margin(src: &Source, n: u32, steps: &[Vec<f64>], domain: &NormDomain) -> Result<()> {
    if let Source::Grid(g) = src {
        let longest = steps
            .iter()
            .flat_map(|s| s.iter().map(|t| t.abs()))
            .fold(0.0, f64::max)
            * n as f64;
        if domain.reach() + longest > g.halfwidth() - g.step() {
            return Err(Error::GridMargin(format!(
                "steps of length {longest:.3} from the norm region (reach {}) leave the grid of halfwidth {}",
                domain.reach(),
                g.halfwidth()
            )));
        }
    }
    Ok(())
}

fn sup_over(src: Source, n: u32, steps: Vec<Vec<f64>>, p: f64, w: &Weight, domain: &NormDomain) -> Result<ModulusValue> {
    check_margin(&src, n, &steps, domain)?;
    let ev = Evaluator::new(src, p, w, domain)?;
    let mut best = ModulusValue {
        value: 0.0,
        delta: vec![0.0; domain.dim],
        candidates: steps.len(),
    };
    for delta in steps {
        let v = ev.difference_norm(n, &delta)?;
        if v > best.value {
            best.value = v;
            best.delta = delta;
        }
    }
    Ok(best)
}

/// Sampled `ω_n(f, h)_{p,1/w} = sup_{|δ|<h} ‖Δ_δ^n f‖_{p,1/w}`; `n = 0` gives `‖f‖_{p,1/w}`.
pub fn modulus(src: Source, n: u32, h: f64, p: f64, w: &Weight, opts: &ModulusOptions) -> Result<ModulusValue> {
    if !(h > 0.0) {
        return Err(invalid(format!("modulus step must be positive, got {h}")));
    }
    let d = src.dim();
    if opts.dirs < 2 * d {
        return Err(invalid(format!("need at least {} random directions", 2 * d)));
    }
    let steps = ball_candidates(d, opts.dirs, opts.seed)
        .into_iter()
        .map(|u| u.into_iter().map(|t| t * h).collect())
        .collect();
    sup_over(src, n, steps, p, w, &opts.domain)
}

/// Sampled `Ω_n(f, M^{-j})_{p,1/w} = sup_{|M^j δ|<1} ‖Δ_δ^n f‖_{p,1/w}`, with `m_power = M^j`.
pub fn anisotropic_modulus(
    src: Source,
    n: u32,
    m_power: &DiagonalPower,
    p: f64,
    w: &Weight,
    opts: &ModulusOptions,
) -> Result<ModulusValue> {
    let d = src.dim();
    if m_power.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m_power.dim(),
        });
    }
    if opts.dirs < 2 * d {
        return Err(invalid(format!("need at least {} random directions", 2 * d)));
    }
    let steps = ball_candidates(d, opts.dirs, opts.seed)
        .into_iter()
        .map(|u| u.iter().zip(&m_power.diag).map(|(t, l)| t / l).collect())
        .collect();
    sup_over(src, n, steps, p, w, &opts.domain)
}

/// Both `Ω_n(f, M^{-j})` and `ω_n(f, ‖M^{-j}‖)`; the latter is maximised over its own
/// candidates and those of the former, so `Ω ≤ ω` holds exactly.
pub fn modulus_pair(
    src: Source,
    n: u32,
    m: &DilationMatrix,
    j: u32,
    p: f64,
    w: &Weight,
    opts: &ModulusOptions,
) -> Result<(ModulusValue, ModulusValue)> {
    let aniso = anisotropic_modulus(src, n, &m.power(j as i32), p, w, opts)?;
    let mut iso = modulus(src, n, m.op_norm_inverse_power(j), p, w, opts)?;
    if aniso.value > iso.value {
        iso.value = aniso.value;
        iso.delta = aniso.delta.clone();
    }
    iso.candidates += aniso.candidates;
    assert!(aniso.value <= iso.value);
    Ok((aniso, iso))
}

/// Partial modulus along one axis: `sup_{|t|<h} ‖Δ_{t e_axis}^n f‖_{p,1/w}`, sampled at
/// `t ∈ ±h{1, 3/4, 1/2, 1/4}`.
pub fn axis_modulus(src: Source, n: u32, axis: usize, h: f64, p: f64, w: &Weight, domain: &NormDomain) -> Result<ModulusValue> {
    let d = src.dim();
    if axis >= d {
        return Err(invalid(format!("axis {axis} out of range for dimension {d}")));
    }
    let steps = [1.0, 0.75, 0.5, 0.25, -1.0, -0.5]
        .iter()
        .map(|s| {
            let mut v = vec![0.0; d];
            v[axis] = s * h;
            v
        })
        .collect();
    sup_over(src, n, steps, p, w, domain)
}

/// `‖f − V_σ f‖_{p,1/w}` on the interior, `V_σ` the smooth Fourier cutoff equal to 1 on
/// `|ξ| ≤ σ/2` and 0 on `|ξ| ≥ σ`; an upper surrogate for `E_{B_σ}(f)_{p,1/w}`.
pub fn best_approx_band(f: &Signal, sigma: f64, p: f64, w: &Weight, halfwidth: f64, points: usize) -> Result<f64> {
    let grid = f.sample_to_grid(halfwidth, points)?;
    best_approx_band_grid(&grid, sigma, p, w)
}

pub fn best_approx_band_grid(grid: &GridSignal, sigma: f64, p: f64, w: &Weight) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(invalid(format!("σ must be positive, got {sigma}")));
    }
    let nyquist = crate::fourier::dual_halfwidth(grid.halfwidth(), grid.points());
    if sigma > nyquist {
        return Err(invalid(format!(
            "σ = {sigma} exceeds the grid's spectral halfwidth {nyquist}"
        )));
    }
    let mut spec = grid.spectrum();
    let nodes = spec.axis_nodes();
    let mut filtered = spec.samples().clone();
    for (ix, v) in filtered.indexed_iter_mut() {
        let r = (0..grid.dim()).map(|a| nodes[ix[a]].powi(2)).sum::<f64>().sqrt();
        *v *= flat_top_profile(r / sigma, 0.5, 1.0);
    }
    spec = spec.with_samples(filtered)?;
    let approx = spec.inverse_spectrum();
    let diff = grid.samples() - approx.samples();
    weighted_norm(&grid.with_samples(diff)?, p, WeightMode::OverW, w, Region::Interior)
}

/// Cardinal B-spline `N_n` on `[0, n]`: the density of a sum of `n` uniform variables.
fn cardinal_bspline(n: u32, s: f64) -> f64 {
    if s <= 0.0 || s >= n as f64 {
        return 0.0;
    }
    let fact: f64 = (1..n).map(|k| k as f64).product();
    (0..=n)
        .map(|i| {
            let t = s - i as f64;
            if t > 0.0 {
                binomial(n, i) * if i % 2 == 0 { 1.0 } else { -1.0 } * t.powi(n as i32 - 1)
            } else {
                0.0
            }
        })
        .sum::<f64>()
        / fact
}

/// `g(x) = ∑_{k=1}^n (−1)^{k+1} C(n,k) ∫_{[0,1]^{nd}} f(x + k(u_1+…+u_n)) du`.
///
/// The n-fold integral is taken through the density of `u_1+…+u_n` (a tensor cardinal
/// B-spline), with 8 Gauss–Legendre points on each unit piece.
pub fn steklov_smooth(f: &Signal, n: u32) -> Result<Signal> {
    let d = f.dim();
    if n < 1 {
        return Err(invalid("Steklov order must be at least 1"));
    }
    if n as usize * d > 8 {
        return Err(invalid(format!("n·d = {} exceeds the quadrature budget", n as usize * d)));
    }
    let rule: Vec<(f64, f64)> = (0..n)
        .flat_map(|piece| quad::gauss_legendre(8, piece as f64, piece as f64 + 1.0))
        .map(|(s, w)| (s, w * cardinal_bspline(n, s)))
        .collect();
    let rule = Arc::new(rule);
    let inner = f.clone();
    Ok(Signal::custom(&format!("steklov:{n}"), d, move |x: &[f64]| {
        let m = rule.len();
        let mut acc = Complex64::new(0.0, 0.0);
        let mut y = vec![0.0; d];
        for k in 1..=n {
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            let ck = sign * binomial(n, k);
            let mut part = Complex64::new(0.0, 0.0);
            for flat in 0..m.pow(d as u32) {
                let mut rem = flat;
                let mut wt = 1.0;
                for (yi, xi) in y.iter_mut().zip(x) {
                    let (s, w) = rule[rem % m];
                    rem /= m;
                    *yi = xi + k as f64 * s;
                    wt *= w;
                }
                part += inner.eval(&y) * wt;
            }
            acc += part * ck;
        }
        acc
    }))
}

/// `∑_{[β]=n} ‖D^β g‖_{p,1/w}` on the interior, derivatives by nested central differences
/// with the grid step.
pub fn sobolev_seminorm(g: &GridSignal, n: u32, p: f64, w: &Weight) -> Result<f64> {
    check_p(p)?;
    let d = g.dim();
    let h = g.step();
    let npts = g.points() as i64;
    let nodes = g.axis_nodes();
    let samples = g.samples();
    let mut total = 0.0;
    for beta in crate::compat::multi_indices(d, n) {
        let mut acc = 0.0;
        let mut x = vec![0.0; d];
        let mut idx = vec![0usize; d];
        for (ix, _) in samples.indexed_iter() {
            for (a, xi) in x.iter_mut().enumerate() {
                *xi = nodes[ix[a]];
            }
            if !x.iter().all(|&t| in_region(t, g.halfwidth(), Region::Interior)) {
                continue;
            }
            // central differences with half-integer offsets rounded onto the grid:
            // use the forward-centred stencil i + (β/2 − k) for even β and i + (⌈β/2⌉ − k) for odd β
            let mut v = Complex64::new(0.0, 0.0);
            let sizes: Vec<usize> = beta.iter().map(|&b| b as usize + 1).collect();
            let count: usize = sizes.iter().product();
            for flat in 0..count {
                let mut rem = flat;
                let mut wgt = 1.0;
                let mut inside = true;
                for a in 0..d {
                    let k = (rem % sizes[a]) as i64;
                    rem /= sizes[a];
                    let b = beta[a] as i64;
                    let off = (b + 1) / 2 - k;
                    let i = ix[a] as i64 + off;
                    if !(0..npts).contains(&i) {
                        inside = false;
                    }
                    idx[a] = i.clamp(0, npts - 1) as usize;
                    wgt *= binomial(b as u32, k as u32) * if k % 2 == 0 { 1.0 } else { -1.0 };
                }
                if !inside {
                    return Err(Error::GridMargin("difference stencil leaves the grid".into()));
                }
                v += samples[IxDyn(&idx)] * wgt;
            }
            v /= h.powi(n as i32);
            acc += (v.norm() / w.eval(&x)).powf(p);
        }
        total += (acc * h.powi(d as i32)).powf(1.0 / p);
    }
    Ok(total)
}

/// Spectrum `F(w^{-1} f)` used by [`tail_bound`].
pub enum SpectrumSource<'a> {
    /// Closed form attached to the signal.
    Signal(&'a Signal),
    /// Samples of `w^{-1} f` on a grid; transformed by FFT.
    Grid(&'a GridSignal),
}

/// `‖M^{-j}‖^{qγ} ∫_{|M^{-j}ξ| ≥ δ/2} |ξ|^{qγ} |F(w^{-1}f)(ξ)|^q dξ` (no constant).
#[allow(clippy::too_many_arguments)]
pub fn tail_bound(
    spec: SpectrumSource,
    m: &DilationMatrix,
    j: u32,
    gamma: f64,
    q: f64,
    p: f64,
    delta: f64,
) -> Result<f64> {
    let d = m.dim();
    if !(gamma > d as f64 / p) {
        return Err(invalid(format!("need γ > d/p = {}, got γ = {gamma}", d as f64 / p)));
    }
    if !(q >= 1.0) || !(delta > 0.0) {
        return Err(invalid("need q ≥ 1 and δ > 0"));
    }
    let mj = m.power(j as i32);
    let prefactor = m.op_norm_inverse_power(j).powf(q * gamma);
    let integral = match spec {
        SpectrumSource::Signal(f) => {
            if !f.has_base_spectrum() {
                return Err(invalid("signal has no closed-form spectrum; sample it and use the grid form"));
            }
            if let Some(r) = f.band_radius() {
                if r < 0.5 * delta * m.min_abs().powi(j as i32) {
                    return Ok(0.0);
                }
            }
            closed_form_tail(f, &mj, gamma, q, delta)?
        }
        SpectrumSource::Grid(g) => grid_tail(g, &mj, gamma, q, delta)?,
    };
    Ok(prefactor * integral)
}

/// Exterior of the ellipsoid via `ξ = M^j η`, `|η| = ρ ≥ δ/2`, `ρ = ρ₀/t`.
fn closed_form_tail(f: &Signal, mj: &DiagonalPower, gamma: f64, q: f64, delta: f64) -> Result<f64> {
    let d = mj.dim();
    let rho0 = 0.5 * delta;
    let jac = mj.det_abs();
    let integrand = |eta: &[f64]| -> f64 {
        let xi = mj.apply(eta);
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        r.powf(q * gamma) * f.base_spectrum(&xi).unwrap_or_default().norm().powf(q)
    };
    let directions: Vec<(Vec<f64>, f64)> = match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => {
            let k = 128;
            (0..k)
                .map(|i| {
                    let th = 2.0 * PI * (i as f64 + 0.5) / k as f64;
                    (vec![th.cos(), th.sin()], 2.0 * PI / k as f64)
                })
                .collect()
        }
        _ => return Err(invalid("closed-form tail quadrature supports d ≤ 2")),
    };
    let radial = |levels: usize| -> f64 {
        let rule = quad::graded_gauss_legendre(16, levels, 0.0, 1.0);
        let mut acc = 0.0;
        for (dir, dw) in &directions {
            for &(t, w) in &rule {
                let rho = rho0 / t;
                let eta: Vec<f64> = dir.iter().map(|u| u * rho).collect();
                // dη = ρ^{d-1} dρ dθ, dρ = ρ₀/t² dt
                acc += dw * w * integrand(&eta) * rho.powi(d as i32 - 1) * rho0 / (t * t);
            }
        }
        acc * jac
    };
    let coarse = radial(40);
    let fine = radial(60);
    let change = (fine - coarse).abs() / fine.abs().max(1e-300);
    if !fine.is_finite() || change > 1e-6 {
        return Err(Error::UnresolvedSpectrum {
            what: "spectral tail integral does not converge".into(),
            edge_mass: change,
        });
    }
    Ok(fine)
}

fn grid_tail(g: &GridSignal, mj: &DiagonalPower, gamma: f64, q: f64, delta: f64) -> Result<f64> {
    let spec = g.spectrum();
    let nodes = spec.axis_nodes();
    let edge = 0.9 * spec.halfwidth();
    let h = spec.step();
    let mut total = 0.0;
    let mut at_edge = 0.0;
    let mut xi = vec![0.0; g.dim()];
    for (ix, v) in spec.samples().indexed_iter() {
        for (a, x) in xi.iter_mut().enumerate() {
            *x = nodes[ix[a]];
        }
        let eta: f64 = xi.iter().zip(&mj.diag).map(|(x, l)| (x / l).powi(2)).sum::<f64>().sqrt();
        // cells cut by the ellipsoid count with the fraction of their width outside it
        let grad = xi
            .iter()
            .zip(&mj.diag)
            .map(|(x, l)| (x / (l * l)).powi(2))
            .sum::<f64>()
            .sqrt()
            / eta.max(1e-300);
        let cover = ((eta - 0.5 * delta) / (h * grad).max(1e-300) + 0.5).clamp(0.0, 1.0);
        if cover == 0.0 {
            continue;
        }
        let r = xi.iter().map(|v| v * v).sum::<f64>().sqrt();
        let val = cover * r.powf(q * gamma) * v.norm().powf(q);
        total += val;
        if xi.iter().any(|x| x.abs() >= edge) {
            at_edge += val;
        }
    }
    if total > 0.0 && at_edge > 1e-3 * total {
        return Err(Error::UnresolvedSpectrum {
            what: "spectral tail has not decayed at the grid edge".into(),
            edge_mass: at_edge / total,
        });
    }
    Ok(total * spec.step().powi(g.dim() as i32))
}

/// One point of an error curve.
#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub j: u32,
    pub error: f64,
    pub budget: ErrorBudget,
}

/// `‖f − Q_j f‖_{p,1/w}` on the interior of the grid for every `j`.
#[allow(clippy::too_many_arguments)]
pub fn error_curve(
    f: &Signal,
    phi: &BandLimitedKernel,
    dual: &DualFunctional,
    m: &DilationMatrix,
    js: &[u32],
    p: f64,
    w: &Weight,
    halfwidth: f64,
    points: usize,
    opts: &OperatorOptions,
) -> Result<Vec<CurvePoint>> {
    let truth = f.sample_to_grid(halfwidth, points)?;
    js.iter()
        .map(|&j| {
            let q = apply_operator(f, phi, dual, m, j, halfwidth, points, opts)?;
            let diff = truth.samples() - q.grid.samples();
            let error = weighted_norm(&truth.with_samples(diff)?, p, WeightMode::OverW, w, Region::Interior)?;
            Ok(CurvePoint {
                j,
                error,
                budget: q.budget,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Least squares of `log e_j` (minus `½ log j` with the log factor) against `−j log|λ|`.
pub fn fit_rate(errors: &[f64], js: &[u32], lambda: f64, with_log_factor: bool) -> Result<RateFit> {
    if errors.len() != js.len() || errors.len() < 3 {
        return Err(invalid("rate fit needs at least 3 matching (j, error) pairs"));
    }
    if let Some(e) = errors.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        return Err(invalid(format!("rate fit needs positive finite errors, got {e}")));
    }
    if with_log_factor && js.contains(&0) {
        return Err(invalid("log-factor fit needs j ≥ 1"));
    }
    let ll = lambda.abs().ln();
    let xs: Vec<f64> = js.iter().map(|&j| -(j as f64) * ll).collect();
    let ys: Vec<f64> = errors
        .iter()
        .zip(js)
        .map(|(&e, &j)| e.ln() - if with_log_factor { 0.5 * (j as f64).ln() } else { 0.0 })
        .collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("rate fit needs distinct j"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum();
    let r2 = if syy <= 1e-300 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(RateFit { slope, intercept, r2 })
}

/// Nonnegative constants `c₁, c₂` with `e_j ≈ c₁ s₁_j + c₂ s₂_j`.
#[derive(Debug, Clone, Serialize)]
pub struct MixedFit {
    pub c1: f64,
    pub c2: f64,
    /// `e_j / (c₁ s₁_j + c₂ s₂_j)`: the factor each constant needs at `j` for equality.
    pub ratios: Vec<f64>,
    /// max/min of `ratios`.
    pub spread: f64,
}

/// Least squares of the relative misfit `∑ (1 − (c₁ s₁_j + c₂ s₂_j)/e_j)²` over `c ≥ 0`.
pub fn fit_bound_constants(lhs: &[f64], s1: &[f64], s2: &[f64]) -> Result<MixedFit> {
    let n = lhs.len();
    if n < 2 || s1.len() != n || s2.len() != n {
        return Err(invalid("constant fit needs at least 2 matching rows"));
    }
    if lhs.iter().chain(s1).chain(s2).any(|v| !(*v >= 0.0) || !v.is_finite()) || lhs.contains(&0.0) {
        return Err(invalid("constant fit needs positive errors and nonnegative terms"));
    }
    let a: Vec<[f64; 2]> = (0..n).map(|j| [s1[j] / lhs[j], s2[j] / lhs[j]]).collect();
    let (mut g11, mut g12, mut g22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in &a {
        g11 += r[0] * r[0];
        g12 += r[0] * r[1];
        g22 += r[1] * r[1];
        b1 += r[0];
        b2 += r[1];
    }
    let misfit = |c: [f64; 2]| -> f64 { a.iter().map(|r| (1.0 - r[0] * c[0] - r[1] * c[1]).powi(2)).sum() };
    let det = g11 * g22 - g12 * g12;
    let mut candidates = Vec::new();
    if det > 1e-14 * g11 * g22 {
        let c = [(b1 * g22 - b2 * g12) / det, (b2 * g11 - b1 * g12) / det];
        if c[0] >= 0.0 && c[1] >= 0.0 {
            candidates.push(c);
        }
    }
    if g11 > 0.0 {
        candidates.push([b1 / g11, 0.0]);
    }
    if g22 > 0.0 {
        candidates.push([0.0, b2 / g22]);
    }
    let c = candidates
        .into_iter()
        .min_by(|x, y| misfit(*x).total_cmp(&misfit(*y)))
        .ok_or_else(|| invalid("both bound terms vanish"))?;
    let ratios: Vec<f64> = (0..n).map(|j| lhs[j] / (c[0] * s1[j] + c[1] * s2[j])).collect();
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(MixedFit {
        c1: c[0],
        c2: c[1],
        spread: hi / lo,
        ratios,
    })
}

/// Predicted regime of the sampling error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum TheoryCase {
    /// `n > d/p + a`: exponent `d/p + a`.
    Saturated { exponent: f64 },
    /// `n = d/p + a`: exponent `n` with a `j^{1/2}` factor.
    Critical { n: u32 },
    /// `n < d/p + a`: exponent `n`.
    Smooth { n: u32 },
}

impl TheoryCase {
    /// `order = None` means all orders (strict compatibility).
    pub fn classify(order: Option<u32>, d: usize, p: f64, a: f64) -> Self {
        let s = d as f64 / p + a;
        match order {
            None => TheoryCase::Saturated { exponent: s },
            Some(n) if (n as f64 - s).abs() < 1e-12 => TheoryCase::Critical { n },
            Some(n) if (n as f64) > s => TheoryCase::Saturated { exponent: s },
            Some(n) => TheoryCase::Smooth { n },
        }
    }

    pub fn slope(&self) -> f64 {
        match *self {
            TheoryCase::Saturated { exponent } => exponent,
            TheoryCase::Critical { n } | TheoryCase::Smooth { n } => n as f64,
        }
    }

    pub fn log_factor(&self) -> bool {
        matches!(self, TheoryCase::Critical { .. })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub j_values: Vec<u32>,
    pub errors: Vec<f64>,
    pub bounds: Option<Vec<f64>>,
    pub lambda: f64,
    pub fitted_slope: f64,
    pub r2: f64,
    pub theory_slope: f64,
    pub theory_case: TheoryCase,
    /// max/min of `error_j / bound_j`.
    pub ratio_stability: Option<f64>,
    /// Set when `r² < 0.98`.
    pub poor_fit: bool,
}

impl RateReport {
    pub fn new(js: Vec<u32>, errors: Vec<f64>, bounds: Option<Vec<f64>>, lambda: f64, case: TheoryCase) -> Result<Self> {
        if js.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("j values must be strictly increasing"));
        }
        let fit = fit_rate(&errors, &js, lambda, case.log_factor())?;
        let ratio_stability = bounds.as_ref().map(|b| {
            let ratios: Vec<f64> = errors.iter().zip(b).map(|(e, b)| e / b).collect();
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            hi / lo
        });
        Ok(Self {
            j_values: js,
            errors,
            bounds,
            lambda,
            fitted_slope: fit.slope,
            r2: fit.r2,
            theory_slope: case.slope(),
            theory_case: case,
            ratio_stability,
            poor_fit: fit.r2 < 0.98,
        })
    }

    /// `j,error,bound` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("j,error,bound\n");
        for (i, (j, e)) in self.j_values.iter().zip(&self.errors).enumerate() {
            let b = self
                .bounds
                .as_ref()
                .map(|b| format!("{:.17e}", b[i]))
                .unwrap_or_default();
            out.push_str(&format!("{j},{e:.17e},{b}\n"));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(self.to_csv().as_bytes())?;
        f.flush()?;
        Ok(())
    }

    /// Gnuplot script plotting the CSV on a log scale.
    pub fn plot_script(&self, csv_name: &str, title: &str) -> String {
        let mut s = format!(
            "set datafile separator ','\nset logscale y\nset xlabel 'j'\nset ylabel 'error'\nset title '{title} (slope {:.3})'\n",
            self.fitted_slope
        );
        if self.bounds.is_some() {
            s.push_str(&format!(
                "plot '{csv_name}' every ::1 using 1:2 with linespoints title 'error', '' every ::1 using 1:3 with linespoints title 'bound'\n"
            ));
        } else {
            s.push_str(&format!(
                "plot '{csv_name}' every ::1 using 1:2 with linespoints title 'error'\n"
            ));
        }
        s
    }
}
