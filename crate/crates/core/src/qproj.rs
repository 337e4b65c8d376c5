//! Quasi-projection operators `Q_j f = ∑_k m^j ⟨f, φ̃(M^j·−k)⟩ φ(M^j·−k)`.
//!
//! Sign convention: translates are `φ(M^j x − k)` throughout, so sampling coefficients are
//! `f(M^{-j} k)`. The `φ(M^j x + k)` convention differs only by the reflection `k → −k`.
//!
//! Every generator and dual here is a tensor product and `M` is diagonal, so both analysis
//! and synthesis factor into one sparse matrix per axis applied along that axis.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, Axis, IxDyn};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dilation::DilationMatrix;
use crate::error::{invalid, Error, Result};
use crate::kernels::{BandLimitedKernel, DualFunctional};
use crate::quad;
use crate::signals::{GridSignal, Signal};

/// Sparse matrix stored by rows: `out[r] = ∑ w · in[c]` over `rows[r]`.
#[derive(Debug, Clone)]
struct AxisMap {
    /// Sample positions along the axis feeding the map.
    nodes: Vec<f64>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl AxisMap {
    fn apply_vec(&self, input: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(c, w)| w * input[c]).sum())
            .collect()
    }
}

/// Apply `maps[i]` along every axis `i` of `data`.
fn apply_axes(data: ArrayD<Complex64>, maps: &[&AxisMap]) -> ArrayD<Complex64> {
    let mut cur = data;
    for (axis, map) in maps.iter().enumerate() {
        let mut shape = cur.shape().to_vec();
        shape[axis] = map.rows.len();
        let mut out = ArrayD::from_elem(IxDyn(&shape), Complex64::new(0.0, 0.0));
        let mut buf = Vec::with_capacity(cur.shape()[axis]);
        for (src, mut dst) in cur.lanes(Axis(axis)).into_iter().zip(out.lanes_mut(Axis(axis))) {
            buf.clear();
            buf.extend(src.iter().copied());
            for (d, v) in dst.iter_mut().zip(map.apply_vec(&buf)) {
                *d = v;
            }
        }
        cur = out;
    }
    cur
}

fn outer(factors: &[Vec<Complex64>], coeff: Complex64, out: &mut ArrayD<Complex64>) {
    for (ix, v) in out.indexed_iter_mut() {
        let mut p = coeff;
        for (axis, f) in factors.iter().enumerate() {
            p *= f[ix[axis]];
        }
        *v += p;
    }
}

/// `(A_1 ⊗ … ⊗ A_d) f|_{nodes}`, using the rank-one structure of `f` when available.
fn analyse(f: &Signal, maps: &[AxisMap]) -> Result<ArrayD<Complex64>> {
    let shape: Vec<usize> = maps.iter().map(|m| m.rows.len()).collect();
    match f.separable_terms() {
        Some(terms) => {
            let mut out = ArrayD::from_elem(IxDyn(&shape), Complex64::new(0.0, 0.0));
            for term in terms {
                let factors: Vec<Vec<Complex64>> = term
                    .factors
                    .iter()
                    .zip(maps)
                    .map(|(g, map)| {
                        let vals: Vec<Complex64> = map.nodes.iter().map(|&t| g(t)).collect();
                        map.apply_vec(&vals)
                    })
                    .collect();
                outer(&factors, term.coeff, &mut out);
            }
            if let Some((ix, _)) = out.indexed_iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::NonFinite {
                    what: "coefficient".into(),
                    location: format!("{ix:?}"),
                });
            }
            Ok(out)
        }
        None => {
            let axes: Vec<Vec<f64>> = maps.iter().map(|m| m.nodes.clone()).collect();
            let samples = f.sample_tensor(&axes)?;
            let refs: Vec<&AxisMap> = maps.iter().collect();
            Ok(apply_axes(samples, &refs))
        }
    }
}

#[derive(Debug, Clone)]
pub struct OperatorOptions {
    /// Tolerance for kernel truncation radii and the under-truncation flag.
    pub tol: f64,
    /// Permit kernels whose translates are not absolutely summable.
    pub allow_slow: bool,
    /// Trapezoid step (in dilated units) for function duals.
    pub dual_step: f64,
    /// Gauss–Legendre points per axis and cell for box averages; checked against twice as many.
    pub box_points: usize,
    /// Compare against a refined quadrature and report the difference.
    pub check_quadrature: bool,
    /// Cap on the synthesis radius for slow kernels.
    pub slow_radius: usize,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            allow_slow: false,
            dual_step: 0.5,
            box_points: 8,
            check_quadrature: true,
            slow_radius: 4096,
        }
    }
}

/// Coefficients `m^j ⟨f, φ̃(M^j·−k)⟩` on `k ∈ ∏[−K_i, K_i]`.
#[derive(Debug, Clone)]
pub struct CoefficientLattice {
    pub j: u32,
    pub dilation: Vec<f64>,
    pub radii: Vec<usize>,
    pub coeffs: ArrayD<Complex64>,
    pub dual_id: String,
    /// Envelope bound on the contribution of all excluded coefficients to the synthesis.
    pub truncation_residual: f64,
    /// Difference between the coarse and the refined quadrature, whose values are kept
    /// (0 for samples, NaN when unchecked).
    pub quadrature_residual: f64,
    pub under_truncated: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeHeader {
    pub j: u32,
    pub dilation: Vec<f64>,
    pub radii: Vec<usize>,
    pub dual_id: String,
    pub truncation_residual: f64,
    pub quadrature_residual: f64,
    pub under_truncated: bool,
    /// File holding the little-endian interleaved `re, im` block in row-major order.
    pub data_file: String,
}

impl CoefficientLattice {
    pub fn dim(&self) -> usize {
        self.radii.len()
    }

    pub fn get(&self, k: &[i64]) -> Option<Complex64> {
        let idx: Option<Vec<usize>> = k
            .iter()
            .zip(&self.radii)
            .map(|(&ki, &r)| {
                let i = ki + r as i64;
                (0..=2 * r as i64).contains(&i).then_some(i as usize)
            })
            .collect();
        idx.map(|i| self.coeffs[IxDyn(&i)])
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Writes `<stem>.json` and `<stem>.bin`.
    pub fn export(&self, dir: &Path, stem: &str) -> Result<()> {
        let data_file = format!("{stem}.bin");
        let header = LatticeHeader {
            j: self.j,
            dilation: self.dilation.clone(),
            radii: self.radii.clone(),
            dual_id: self.dual_id.clone(),
            truncation_residual: self.truncation_residual,
            quadrature_residual: self.quadrature_residual,
            under_truncated: self.under_truncated,
            data_file: data_file.clone(),
        };
        let mut bin = BufWriter::new(File::create(dir.join(&data_file))?);
        for v in self.coeffs.iter() {
            bin.write_all(&v.re.to_le_bytes())?;
            bin.write_all(&v.im.to_le_bytes())?;
        }
        bin.flush()?;
        let json = File::create(dir.join(format!("{stem}.json")))?;
        serde_json::to_writer_pretty(json, &header)?;
        Ok(())
    }

    pub fn import(dir: &Path, stem: &str) -> Result<Self> {
        let header: LatticeHeader =
            serde_json::from_reader(BufReader::new(File::open(dir.join(format!("{stem}.json")))?))?;
        let shape: Vec<usize> = header.radii.iter().map(|r| 2 * r + 1).collect();
        let total: usize = shape.iter().product();
        let mut bin = BufReader::new(File::open(dir.join(&header.data_file))?);
        let mut data = Vec::with_capacity(total);
        let mut b = [0u8; 8];
        for _ in 0..total {
            bin.read_exact(&mut b)?;
            let re = f64::from_le_bytes(b);
            bin.read_exact(&mut b)?;
            data.push(Complex64::new(re, f64::from_le_bytes(b)));
        }
        let coeffs = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self {
            j: header.j,
            dilation: header.dilation,
            radii: header.radii,
            coeffs,
            dual_id: header.dual_id,
            truncation_residual: header.truncation_residual,
            quadrature_residual: header.quadrature_residual,
            under_truncated: header.under_truncated,
        })
    }
}

fn synthesis_radius(phi: &BandLimitedKernel, opts: &OperatorOptions) -> Result<usize> {
    if phi.is_slow() {
        if !opts.allow_slow {
            return Err(Error::SlowKernel(phi.id().to_string()));
        }
        return Ok(phi.effective_radius(opts.tol).min(opts.slow_radius));
    }
    Ok(phi.effective_radius(opts.tol))
}

/// `K_i = ceil(|λ_i|^j L + R)` with `R` the synthesis radius of `φ`: every lattice point
/// within reach of the grid `[−L, L]^d`.
pub fn truncation_radii(
    phi: &BandLimitedKernel,
    m: &DilationMatrix,
    j: u32,
    halfwidth: f64,
    opts: &OperatorOptions,
) -> Result<Vec<usize>> {
    let r = synthesis_radius(phi, opts)?;
    Ok(m.power(j as i32)
        .diag
        .iter()
        .map(|l| (l.abs() * halfwidth + r as f64).ceil() as usize)
        .collect())
}

fn dirac_map(scale: f64, radius: usize) -> AxisMap {
    let r = radius as i64;
    AxisMap {
        nodes: (-r..=r).map(|k| k as f64 / scale).collect(),
        rows: (0..=2 * radius).map(|i| vec![(i, Complex64::new(1.0, 0.0))]).collect(),
    }
}

fn box_map(scale: f64, radius: usize, points: usize) -> AxisMap {
    let rule = quad::gauss_legendre(points, 0.0, 1.0);
    let r = radius as i64;
    let mut nodes = Vec::with_capacity((2 * radius + 1) * points);
    let mut rows = Vec::with_capacity(2 * radius + 1);
    for k in -r..=r {
        // cell M^{-j}([k, k+1]) along this axis, averaged
        let row = rule
            .iter()
            .map(|&(u, w)| {
                nodes.push((k as f64 + u) / scale);
                (nodes.len() - 1, Complex64::new(w, 0.0))
            })
            .collect();
        rows.push(row);
    }
    AxisMap { nodes, rows }
}

fn dual_map(dual: &BandLimitedKernel, scale: f64, radius: usize, step: f64, reach: usize) -> AxisMap {
    // c_k = ∫ f(λ^{-j}(u + k)) conj(φ̃₁(u)) du ≈ h ∑_n f(λ^{-j} h n) conj(φ̃₁(h n − k))
    let per_unit = (1.0 / step).round() as i64;
    let lo = -((radius + reach) as i64) * per_unit;
    let hi = -lo;
    let nodes: Vec<f64> = (lo..=hi).map(|n| step * n as f64 / scale).collect();
    let span = reach as i64 * per_unit;
    let r = radius as i64;
    let rows = (-r..=r)
        .map(|k| {
            let centre = k * per_unit;
            ((centre - span).max(lo)..=(centre + span).min(hi))
                .map(|n| {
                    let u = step * n as f64 - k as f64;
                    ((n - lo) as usize, dual.axis_eval(u).conj() * step)
                })
                .collect()
        })
        .collect();
    AxisMap { nodes, rows }
}

fn coefficient_maps(
    dual: &DualFunctional,
    scales: &[f64],
    radii: &[usize],
    opts: &OperatorOptions,
    refined: bool,
) -> Result<Vec<AxisMap>> {
    scales
        .iter()
        .zip(radii)
        .map(|(&s, &r)| {
            Ok(match dual {
                DualFunctional::Dirac => dirac_map(s, r),
                DualFunctional::BoxAverage => box_map(s, r, if refined { 2 * opts.box_points } else { opts.box_points }),
                DualFunctional::FunctionDual(k) => {
                    if k.is_slow() {
                        return Err(Error::SlowKernel(k.id().to_string()));
                    }
                    let step = if refined { 0.5 * opts.dual_step } else { opts.dual_step };
                    dual_map(k, s, r, step, k.effective_radius(opts.tol))
                }
            })
        })
        .collect()
}

/// Coefficients on a prescribed lattice `∏[−K_i, K_i]`, without a truncation estimate.
pub fn coefficients_on(
    f: &Signal,
    dual: &DualFunctional,
    m: &DilationMatrix,
    j: u32,
    radii: &[usize],
    opts: &OperatorOptions,
) -> Result<CoefficientLattice> {
    if f.dim() != m.dim() || radii.len() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: f.dim(),
        });
    }
    if let DualFunctional::FunctionDual(k) = dual {
        if k.dim() != m.dim() {
            return Err(Error::DimensionMismatch {
                expected: m.dim(),
                got: k.dim(),
            });
        }
    }
    if !(opts.dual_step > 0.0) || (1.0 / opts.dual_step).fract() != 0.0 {
        return Err(invalid("dual quadrature step must be 1/n"));
    }
    let scales = m.power(j as i32).diag;
    let coeffs = analyse(f, &coefficient_maps(dual, &scales, radii, opts, false)?)?;
    let checkable = f.separable_terms().is_some() || f.dim() == 1;
    let mut coeffs = coeffs;
    let quadrature_residual = match dual {
        DualFunctional::Dirac => 0.0,
        _ if opts.check_quadrature && checkable => {
            let fine = analyse(f, &coefficient_maps(dual, &scales, radii, opts, true)?)?;
            let diff = fine
                .iter()
                .zip(coeffs.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            let scale = fine.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1e-300);
            if let DualFunctional::BoxAverage = dual {
                if diff > 1e-6 * scale.max(1.0) {
                    return Err(Error::Quadrature {
                        what: format!("box averages at level {j} ({} vs {} points)", opts.box_points, 2 * opts.box_points),
                        residual: diff,
                    });
                }
            }
            coeffs = fine;
            diff
        }
        _ => f64::NAN,
    };
    Ok(CoefficientLattice {
        j,
        dilation: m.diag().to_vec(),
        radii: radii.to_vec(),
        coeffs,
        dual_id: dual.id(),
        truncation_residual: 0.0,
        quadrature_residual,
        under_truncated: false,
    })
}

/// Lattice bound `d · peak^{d-1} · ∑_{|m|>R} env(m)` for a unit coefficient field.
fn unit_tail(phi: &BandLimitedKernel, r: usize) -> f64 {
    let d = phi.dim();
    d as f64 * phi.axis_envelope().lattice_tail(r + 1) * phi.axis_peak().powi(d as i32 - 1)
}

/// Coefficients on the lattice reaching the grid `[−L, L]^d` through `φ`, with an envelope
/// estimate of what the excluded coefficients would contribute.
pub fn coefficients(
    f: &Signal,
    dual: &DualFunctional,
    phi: &BandLimitedKernel,
    m: &DilationMatrix,
    j: u32,
    halfwidth: f64,
    opts: &OperatorOptions,
) -> Result<CoefficientLattice> {
    let radii = truncation_radii(phi, m, j, halfwidth, opts)?;
    let mut lattice = coefficients_on(f, dual, m, j, &radii, opts)?;
    let r = synthesis_radius(phi, opts)?;
    // excluded coefficients are bounded by twice the largest one on the outer shell
    let shell = lattice
        .coeffs
        .indexed_iter()
        .filter(|(ix, _)| (0..radii.len()).any(|a| ix[a] == 0 || ix[a] == 2 * radii[a]))
        .map(|(_, v)| v.norm())
        .fold(0.0, f64::max);
    lattice.truncation_residual = 2.0 * shell * unit_tail(phi, r);
    lattice.under_truncated = lattice.truncation_residual > opts.tol;
    Ok(lattice)
}

/// Result of the synthesis step.
#[derive(Debug, Clone)]
pub struct Synthesis {
    pub grid: GridSignal,
    /// Uniform bound on the dropped terms `|M^j x − k| > R` at any grid point.
    pub truncation_residual: f64,
    pub radius: usize,
}

/// `∑_k c_k φ(M^j x − k)` on the grid `x = −L + 2L i/N`.
pub fn synthesize(
    c: &CoefficientLattice,
    phi: &BandLimitedKernel,
    m: &DilationMatrix,
    halfwidth: f64,
    points: usize,
    opts: &OperatorOptions,
) -> Result<Synthesis> {
    if phi.dim() != c.dim() || m.dim() != c.dim() {
        return Err(Error::DimensionMismatch {
            expected: c.dim(),
            got: phi.dim(),
        });
    }
    let r = synthesis_radius(phi, opts)?;
    let scales = m.power(c.j as i32).diag;
    let template = GridSignal::zeros(c.dim(), halfwidth, points)?;
    let xs = template.axis_nodes();
    let maps: Vec<AxisMap> = scales
        .iter()
        .zip(&c.radii)
        .map(|(&s, &kr)| {
            let kr = kr as i64;
            let rows = xs
                .iter()
                .map(|&x| {
                    let centre = s * x;
                    let lo = ((centre - r as f64).ceil() as i64).max(-kr);
                    let hi = ((centre + r as f64).floor() as i64).min(kr);
                    (lo..=hi)
                        .map(|k| ((k + kr) as usize, phi.axis_eval(centre - k as f64)))
                        .collect()
                })
                .collect();
            AxisMap { nodes: Vec::new(), rows }
        })
        .collect();
    let refs: Vec<&AxisMap> = maps.iter().collect();
    let values = apply_axes(c.coeffs.clone(), &refs);
    Ok(Synthesis {
        grid: GridSignal::new(halfwidth, values)?,
        truncation_residual: c.max_abs() * unit_tail(phi, r),
        radius: r,
    })
}

/// Error budget recorded with every operator application.
#[derive(Debug, Clone, Serialize)]
pub struct ErrorBudget {
    pub coefficient_truncation: f64,
    pub synthesis_truncation: f64,
    pub quadrature: f64,
    pub kernel_table: f64,
    pub under_truncated: bool,
}

impl ErrorBudget {
    /// Sum of the finite contributions.
    pub fn total(&self) -> f64 {
        [self.coefficient_truncation, self.synthesis_truncation, self.quadrature, self.kernel_table]
            .iter()
            .filter(|v| v.is_finite())
            .sum()
    }
}

#[derive(Debug, Clone)]
pub struct Applied {
    pub grid: GridSignal,
    pub lattice: CoefficientLattice,
    pub budget: ErrorBudget,
}

/// `Q_j(f; φ̃, φ)` sampled on the grid `[−L, L)^d` with `N` points per axis.
#[allow(clippy::too_many_arguments)]
pub fn apply_operator(
    f: &Signal,
    phi: &BandLimitedKernel,
    dual: &DualFunctional,
    m: &DilationMatrix,
    j: u32,
    halfwidth: f64,
    points: usize,
    opts: &OperatorOptions,
) -> Result<Applied> {
    let lattice = coefficients(f, dual, phi, m, j, halfwidth, opts)?;
    let syn = synthesize(&lattice, phi, m, halfwidth, points, opts)?;
    let budget = ErrorBudget {
        coefficient_truncation: lattice.truncation_residual,
        synthesis_truncation: syn.truncation_residual,
        quadrature: lattice.quadrature_residual,
        kernel_table: phi.truncation_error() * lattice.max_abs(),
        under_truncated: lattice.under_truncated,
    };
    Ok(Applied {
        grid: syn.grid,
        lattice,
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(d: usize) -> BandLimitedKernel {
        BandLimitedKernel::flat_top(d, 0.25, 0.45).unwrap()
    }

    #[test]
    fn constant_coefficients() {
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let one = Signal::constant(1, 1.0);
        let o = OperatorOptions::default();
        for dual in [DualFunctional::Dirac, DualFunctional::BoxAverage] {
            for j in 0..3 {
                let c = coefficients_on(&one, &dual, &m, j, &[20], &o).unwrap();
                assert!(c.coeffs.iter().all(|v| (v - 1.0).norm() < 1e-14));
            }
        }
    }

    #[test]
    fn gaussian_box_coefficient() {
        // ∫₀¹ e^{-πt²} dt by a 200-panel composite Simpson rule
        let n = 400;
        let h = 1.0 / n as f64;
        let g = |t: f64| (-std::f64::consts::PI * t * t).exp();
        let simpson: f64 = (0..=n)
            .map(|i| {
                let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * g(i as f64 * h)
            })
            .sum::<f64>()
            * h
            / 3.0;
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let f = Signal::gaussian(1, 1.0).unwrap();
        let c = coefficients_on(&f, &DualFunctional::BoxAverage, &m, 0, &[3], &OperatorOptions::default()).unwrap();
        let c0 = c.get(&[0]).unwrap();
        assert!((c0.re - simpson).abs() < 1e-10, "{} vs {simpson}", c0.re);
        let closed = 0.5 * libm::erf(std::f64::consts::PI.sqrt());
        assert!((c0.re - closed).abs() < 1e-12);
    }

    #[test]
    fn single_coefficient_reproduces_kernel() {
        let phi = flat(1);
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let mut coeffs = ArrayD::from_elem(IxDyn(&[41]), Complex64::new(0.0, 0.0));
        coeffs[[20]] = Complex64::new(1.0, 0.0);
        let lat = CoefficientLattice {
            j: 0,
            dilation: vec![2.0],
            radii: vec![20],
            coeffs,
            dual_id: "dirac".into(),
            truncation_residual: 0.0,
            quadrature_residual: 0.0,
            under_truncated: false,
        };
        let s = synthesize(&lat, &phi, &m, 8.0, 64, &OperatorOptions::default()).unwrap();
        for i in 0..64 {
            let x = s.grid.node(i);
            assert!((s.grid.samples()[[i]] - phi.axis_eval(x)).norm() < 1e-15);
        }
        let mut zero = lat.clone();
        zero.coeffs.fill(Complex64::new(0.0, 0.0));
        let z = synthesize(&zero, &phi, &m, 8.0, 64, &OperatorOptions::default()).unwrap();
        assert!(z.grid.samples().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn partition_of_unity() {
        // dense-lattice oracle: ∑_{|k| ≤ 2000} φ(x − k) at random points
        let phi = flat(1);
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let one = Signal::constant(1, 1.0);
        let q = apply_operator(&one, &phi, &DualFunctional::Dirac, &m, 0, 16.0, 256, &OperatorOptions::default()).unwrap();
        for i in (64..192).step_by(13) {
            let x = q.grid.node(i);
            let dense: Complex64 = (-2000..=2000).map(|k| phi.axis_eval(x - k as f64)).sum();
            assert!((q.grid.samples()[[i]] - 1.0).norm() < 1e-6);
            assert!((dense - 1.0).norm() < 1e-6);
        }
    }

    #[test]
    fn exact_reconstruction_one_dim() {
        let phi = flat(1);
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let f = Signal::bandlimited(1, 0.2, 1).unwrap();
        let dual = DualFunctional::function(BandLimitedKernel::flat_top(1, 0.3, 0.45).unwrap()).unwrap();
        for d in [DualFunctional::Dirac, dual] {
            for j in 0..2 {
                let q = apply_operator(&f, &phi, &d, &m, j, 16.0, 512, &OperatorOptions::default()).unwrap();
                let truth = f.sample_to_grid(16.0, 512).unwrap();
                let err = (128..384)
                    .map(|i| (q.grid.samples()[[i]] - truth.samples()[[i]]).norm())
                    .fold(0.0, f64::max);
                assert!(err < 1e-6, "{} j={j}: {err}", d.id());
            }
        }
    }

    #[test]
    fn zero_signal_and_linearity() {
        let phi = flat(2);
        let m = DilationMatrix::new(vec![2.0, 3.0]).unwrap();
        let o = OperatorOptions::default();
        let z = apply_operator(&Signal::zero(2), &phi, &DualFunctional::Dirac, &m, 1, 4.0, 32, &o).unwrap();
        assert!(z.grid.samples().iter().all(|v| v.norm() == 0.0));
        let f = Signal::gaussian(2, 2.0).unwrap();
        let g = Signal::bandlimited(2, 0.3, 4).unwrap();
        let a = Complex64::new(2.0, 0.0);
        let b = Complex64::new(-0.5, 0.0);
        let h = Signal::combination(&[(a, &f), (b, &g)]).unwrap();
        let qf = apply_operator(&f, &phi, &DualFunctional::BoxAverage, &m, 1, 4.0, 32, &o).unwrap();
        let qg = apply_operator(&g, &phi, &DualFunctional::BoxAverage, &m, 1, 4.0, 32, &o).unwrap();
        let qh = apply_operator(&h, &phi, &DualFunctional::BoxAverage, &m, 1, 4.0, 32, &o).unwrap();
        let scale = qh.grid.samples().iter().map(|v| v.norm()).fold(0.0, f64::max);
        for ((x, y), z) in qf.grid.samples().iter().zip(qg.grid.samples()).zip(qh.grid.samples()) {
            assert!((a * x + b * y - z).norm() <= 1e-13 * scale);
        }
    }

    #[test]
    fn slow_kernel_needs_acknowledgement() {
        let sinc = BandLimitedKernel::sinc_tensor(1).unwrap();
        let m = DilationMatrix::isotropic(1, 2.0).unwrap();
        let f = Signal::gaussian(1, 1.0).unwrap();
        let o = OperatorOptions::default();
        assert!(matches!(
            apply_operator(&f, &sinc, &DualFunctional::Dirac, &m, 0, 4.0, 32, &o),
            Err(Error::SlowKernel(_))
        ));
        let o = OperatorOptions {
            allow_slow: true,
            slow_radius: 64,
            ..o
        };
        let q = apply_operator(&f, &sinc, &DualFunctional::Dirac, &m, 0, 4.0, 32, &o).unwrap();
        assert!(q.budget.under_truncated || q.budget.synthesis_truncation > 0.0);
    }

    #[test]
    fn lattice_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = DilationMatrix::new(vec![2.0, -3.0]).unwrap();
        let f = Signal::gaussian(2, 1.0).unwrap();
        let c = coefficients(&f, &DualFunctional::BoxAverage, &flat(2), &m, 1, 2.0, &OperatorOptions::default()).unwrap();
        c.export(dir.path(), "lat").unwrap();
        let back = CoefficientLattice::import(dir.path(), "lat").unwrap();
        assert_eq!(back.coeffs, c.coeffs);
        assert_eq!(back.radii, c.radii);
        assert_eq!(back.dual_id, "box");
    }

    #[test]
    fn negative_dilation_cells() {
        // cells of M^{-1}([0,1] + k) with λ = -2 are [-(k+1)/2, -k/2]
        let m = DilationMatrix::new(vec![-2.0]).unwrap();
        let f = Signal::custom("x", 1, |x| Complex64::new(x[0], 0.0));
        let c = coefficients_on(&f, &DualFunctional::BoxAverage, &m, 1, &[4], &OperatorOptions::default()).unwrap();
        for k in -4..=4i64 {
            let want = -(k as f64 + 0.5) / 2.0;
            assert!((c.get(&[k]).unwrap().re - want).abs() < 1e-14);
        }
    }
}
