//! Uniform spatial grid on [-L, L] with trapezoid quadrature.

use crate::error::{Error, Result};
use crate::numeric::{CSum, Sum};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    half_width: f64,
    n_points: usize,
}

impl Grid {
    pub fn new(half_width: f64, n_points: usize) -> Result<Self> {
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::Argument(format!("grid half-width must be positive, got {half_width}")));
        }
        if n_points < 3 {
            return Err(Error::Argument(format!("grid needs at least 3 points, got {n_points}")));
        }
        Ok(Self { half_width, n_points })
    }

    /// Grid on [-L, L] whose spacing is as close to `h` as an integer point count allows.
    pub fn with_spacing(half_width: f64, h: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Argument(format!("grid spacing must be positive, got {h}")));
        }
        let n = (2.0 * half_width / h).round() as usize + 1;
        Self::new(half_width, n)
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    /// x_i, computed so that x_{n-1-i} = -x_i holds bit for bit.
    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        let m = (self.n_points - 1) as f64;
        self.half_width * (2.0 * i as f64 - m) / m
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.n_points).map(|i| f(self.point(i))).collect()
    }

    pub fn sample_complex(&self, f: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
        (0..self.n_points).map(|i| f(self.point(i))).collect()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        let h = self.spacing();
        if i == 0 || i + 1 == self.n_points {
            0.5 * h
        } else {
            h
        }
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.n_points);
        let mut s = Sum::new();
        for (i, &v) in f.iter().enumerate() {
            s.add(self.weight(i) * v);
        }
        s.value()
    }

    pub fn integrate_complex(&self, f: &[Complex64]) -> Complex64 {
        debug_assert_eq!(f.len(), self.n_points);
        let mut s = CSum::new();
        for (i, &v) in f.iter().enumerate() {
            s.add(v * self.weight(i));
        }
        s.value()
    }

    pub fn norm2(&self, f: &[f64]) -> f64 {
        let sq: Vec<f64> = f.iter().map(|v| v * v).collect();
        self.integrate(&sq).sqrt()
    }

    pub fn norm2_complex(&self, f: &[Complex64]) -> f64 {
        let sq: Vec<f64> = f.iter().map(|v| v.norm_sqr()).collect();
        self.integrate(&sq).sqrt()
    }

    pub fn norm_p(&self, f: &[f64], p: f64) -> f64 {
        let pw: Vec<f64> = f.iter().map(|v| v.abs().powf(p)).collect();
        self.integrate(&pw).powf(1.0 / p)
    }

    pub fn norm1(&self, f: &[f64]) -> f64 {
        let a: Vec<f64> = f.iter().map(|v| v.abs()).collect();
        self.integrate(&a)
    }

    /// ∫ f g over the grid (real inner product).
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        let p: Vec<f64> = f.iter().zip(g).map(|(a, b)| a * b).collect();
        self.integrate(&p)
    }

    /// Index of the grid point nearest to x (clamped to the grid).
    pub fn nearest(&self, x: f64) -> usize {
        let t = (x + self.half_width) / self.spacing();
        (t.round().max(0.0) as usize).min(self.n_points - 1)
    }

    /// Central second difference at interior points; the two end entries are zero.
    pub fn second_difference(&self, f: &[f64]) -> Vec<f64> {
        let h2 = self.spacing() * self.spacing();
        let mut out = vec![0.0; f.len()];
        for i in 1..f.len() - 1 {
            out[i] = (f[i + 1] - 2.0 * f[i] + f[i - 1]) / h2;
        }
        out
    }
}

impl Default for Grid {
    fn default() -> Self {
        Self { half_width: 20.0, n_points: 4096 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_points() {
        let g = Grid::new(20.0, 4096).unwrap();
        for i in 0..g.len() {
            assert_eq!(g.point(i), -g.point(g.len() - 1 - i));
        }
        assert_eq!(g.point(0), -20.0);
        assert_eq!(g.point(4095), 20.0);
        assert!((g.spacing() - 40.0 / 4095.0).abs() < 1e-16);
    }

    #[test]
    fn gaussian_integral() {
        let g = Grid::default();
        let f = g.sample(|x| (-x * x).exp());
        assert!((g.integrate(&f) - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn spacing_constructor() {
        let g = Grid::with_spacing(8.0, 1e-3).unwrap();
        assert_eq!(g.len(), 16001);
        assert!((g.spacing() - 1e-3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(Grid::new(0.0, 10).is_err());
        assert!(Grid::new(1.0, 2).is_err());
    }
}
