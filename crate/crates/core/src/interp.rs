//! Uniform tables with local cubic (four-point Lagrange) interpolation per axis.

use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64;

/// Values on the tensor grid `x = -L + 2L i / N`, `i = 0..N` along every axis.
#[derive(Debug, Clone)]
pub struct UniformTable {
    halfwidth: f64,
    points: usize,
    step: f64,
    values: ArrayD<Complex64>,
}

fn lagrange_weights(t: f64) -> [f64; 4] {
    [
        -t * (t - 1.0) * (t - 2.0) / 6.0,
        (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0,
        -(t + 1.0) * t * (t - 2.0) / 2.0,
        (t + 1.0) * t * (t - 1.0) / 6.0,
    ]
}

impl UniformTable {
    pub fn new(halfwidth: f64, values: ArrayD<Complex64>) -> Self {
        let points = values.shape()[0];
        debug_assert!(values.shape().iter().all(|&n| n == points));
        Self {
            halfwidth,
            points,
            step: 2.0 * halfwidth / points as f64,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.values.ndim()
    }

    pub fn halfwidth(&self) -> f64 {
        self.halfwidth
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn values(&self) -> &ArrayD<Complex64> {
        &self.values
    }

    /// Position of the node grid `x_i` along one axis.
    pub fn node(&self, i: usize) -> f64 {
        -self.halfwidth + self.step * i as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .all(|&xi| xi >= -self.halfwidth && xi <= self.halfwidth - self.step)
    }

    /// Interpolated value, or `None` when `x` lies off the table.
    pub fn eval(&self, x: &[f64]) -> Option<Complex64> {
        if !self.contains(x) {
            return None;
        }
        let d = self.dim();
        let n = self.points as isize;
        let mut base = [0isize; 8];
        let mut weights = [[0.0; 4]; 8];
        for axis in 0..d {
            let s = (x[axis] + self.halfwidth) / self.step;
            let i = (s.floor() as isize).min(n - 2);
            base[axis] = i - 1;
            weights[axis] = lagrange_weights(s - i as f64);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut idx = vec![0usize; d];
        for flat in 0..4usize.pow(d as u32) {
            let mut rem = flat;
            let mut w = 1.0;
            for axis in 0..d {
                let o = rem % 4;
                rem /= 4;
                idx[axis] = (base[axis] + o as isize).clamp(0, n - 1) as usize;
                w *= weights[axis][o];
            }
            acc += self.values[IxDyn(&idx)] * w;
        }
        Some(acc)
    }
}

/// One-dimensional convenience wrapper.
#[derive(Debug, Clone)]
pub struct Table1d(UniformTable);

impl Table1d {
    pub fn new(halfwidth: f64, values: Vec<Complex64>) -> Self {
        let n = values.len();
        Self(UniformTable::new(
            halfwidth,
            ArrayD::from_shape_vec(IxDyn(&[n]), values).expect("1-d shape"),
        ))
    }

    pub fn inner(&self) -> &UniformTable {
        &self.0
    }

    pub fn eval(&self, x: f64) -> Option<Complex64> {
        self.0.eval(&[x])
    }

    pub fn halfwidth(&self) -> f64 {
        self.0.halfwidth
    }

    pub fn step(&self) -> f64 {
        self.0.step
    }

    pub fn node(&self, i: usize) -> f64 {
        self.0.node(i)
    }

    pub fn samples(&self) -> &[Complex64] {
        self.0.values.as_slice().expect("contiguous table")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubics_exactly() {
        let l = 4.0;
        let n = 64;
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.1 * x * x * x;
        let vals = (0..n)
            .map(|i| Complex64::new(f(-l + 2.0 * l * i as f64 / n as f64), 0.0))
            .collect();
        let t = Table1d::new(l, vals);
        for &x in &[-3.3, -0.01, 0.0, 1.234, 3.5] {
            assert!((t.eval(x).unwrap().re - f(x)).abs() < 1e-11);
        }
        assert!(t.eval(4.0).is_none());
    }

    #[test]
    fn two_dimensional_table() {
        let l = 2.0;
        let n = 32;
        let h = 2.0 * l / n as f64;
        let f = |x: f64, y: f64| x * y * y + 3.0 * x - y;
        let vals = ArrayD::from_shape_fn(IxDyn(&[n, n]), |ix| {
            Complex64::new(f(-l + h * ix[0] as f64, -l + h * ix[1] as f64), 0.0)
        });
        let t = UniformTable::new(l, vals);
        let v = t.eval(&[0.37, -1.21]).unwrap();
        assert!((v.re - f(0.37, -1.21)).abs() < 1e-11);
    }
}
