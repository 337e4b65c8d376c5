//! Discrete Fourier transforms with the continuous convention
//! `f̂(ξ) = ∫ f(x) e^{-2πi(x,ξ)} dx` on centred uniform grids.
//!
//! A grid with halfwidth `L` and `N` points per axis carries `x_i = -L + 2L i/N`;
//! its spectrum lives on `ξ_m = (m - N/2)/(2L)`, i.e. on a centred grid with
//! halfwidth `N/(4L)`.

use ndarray::{ArrayD, Axis};
use num_complex::Complex64;
use rustfft::FftPlanner;

fn sign(i: usize) -> f64 {
    if i.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

fn transform_axes(data: &mut ArrayD<Complex64>, halfwidth: f64, forward: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let ndim = data.ndim();
    for axis in 0..ndim {
        let n = data.shape()[axis];
        let fft = if forward {
            planner.plan_fft_forward(n)
        } else {
            planner.plan_fft_inverse(n)
        };
        let half = n / 2;
        let scale = if forward {
            2.0 * halfwidth / n as f64
        } else {
            1.0 / (2.0 * halfwidth)
        };
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for mut lane in data.lanes_mut(Axis(axis)) {
            for (i, v) in lane.iter().enumerate() {
                // forward: pre-twiddle by (-1)^i; inverse: by (-1)^{m - N/2}
                buf[i] = *v * if forward { sign(i) } else { sign(i + half) };
            }
            fft.process(&mut buf);
            for (i, v) in lane.iter_mut().enumerate() {
                *v = buf[i] * scale * if forward { sign(i + half) } else { sign(i) };
            }
        }
    }
}

/// Samples of `f̂` on the frequency grid from samples of `f` on the space grid.
pub fn forward(samples: &ArrayD<Complex64>, halfwidth: f64) -> ArrayD<Complex64> {
    let mut out = samples.clone();
    transform_axes(&mut out, halfwidth, true);
    out
}

/// Inverse of [`forward`]; `halfwidth` is the halfwidth of the *space* grid.
pub fn inverse(spectrum: &ArrayD<Complex64>, halfwidth: f64) -> ArrayD<Complex64> {
    let mut out = spectrum.clone();
    transform_axes(&mut out, halfwidth, false);
    out
}

/// Frequency grid halfwidth `N/(4L)` matching a space grid.
pub fn dual_halfwidth(halfwidth: f64, points: usize) -> f64 {
    points as f64 / (4.0 * halfwidth)
}

/// Space samples `φ(x_i) = ∫ θ(ξ) e^{2πi x_i ξ} dξ` of a one-dimensional spectrum,
/// computed from `θ` sampled on the matching frequency grid.
pub fn synthesize_1d(theta: impl Fn(f64) -> Complex64, halfwidth: f64, points: usize) -> Vec<Complex64> {
    let step = 1.0 / (2.0 * halfwidth);
    let spec: Vec<Complex64> = (0..points)
        .map(|m| theta((m as f64 - (points / 2) as f64) * step))
        .collect();
    let arr = ArrayD::from_shape_vec(ndarray::IxDyn(&[points]), spec).expect("shape");
    inverse(&arr, halfwidth).into_raw_vec_and_offset().0
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn gaussian_is_self_dual() {
        let (l, n) = (16.0, 4096);
        let h = 2.0 * l / n as f64;
        let f = ArrayD::from_shape_fn(IxDyn(&[n]), |ix| {
            let x = -l + h * ix[0] as f64;
            Complex64::new((-std::f64::consts::PI * x * x).exp(), 0.0)
        });
        let spec = forward(&f, l);
        let dl = dual_halfwidth(l, n);
        let dh = 2.0 * dl / n as f64;
        let err = spec
            .iter()
            .enumerate()
            .map(|(m, v)| {
                let xi = -dl + dh * m as f64;
                (v - Complex64::new((-std::f64::consts::PI * xi * xi).exp(), 0.0)).norm()
            })
            .fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn synthesis_of_box_spectrum_is_sinc() {
        let vals = synthesize_1d(
            |xi| Complex64::new(if xi.abs() < 0.5 { 1.0 } else { 0.0 }, 0.0),
            64.0,
            1 << 14,
        );
        let i0 = (1 << 13) as usize;
        assert!((vals[i0].re - 1.0).abs() < 1e-2);
    }
}
