//! Small numerical helpers: compensated summation and least-squares line fits.

use num_complex::Complex64;
use serde::Serialize;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CSum {
    re: Sum,
    im: Sum,
}

impl CSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    #[inline]
    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn sum(xs: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = Sum::new();
    for x in xs {
        s.add(x);
    }
    s.value()
}

pub fn csum(zs: impl IntoIterator<Item = Complex64>) -> Complex64 {
    let mut s = CSum::new();
    for z in zs {
        s.add(z);
    }
    s.value()
}

/// Ordinary least-squares line y = intercept + slope·x.
#[derive(Clone, Copy, Debug, Serialize, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Root-mean-square residual.
    pub rms: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = sum(x.iter().copied()) / nf;
    let my = sum(y.iter().copied()) / nf;
    let sxx = sum(x.iter().map(|&a| (a - mx) * (a - mx)));
    let sxy = sum(x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)));
    let syy = sum(y.iter().map(|&b| (b - my) * (b - my)));
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res = sum(x.iter().zip(y).map(|(&a, &b)| {
        let r = b - intercept - slope * a;
        r * r
    }));
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Some(LineFit { slope, intercept, r2, rms: (ss_res / nf).sqrt() })
}

pub fn max_abs(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1.0, 1e100, 1.0, -1e100];
        assert_eq!(sum(xs), 2.0);
    }

    #[test]
    fn exact_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 0.25 * v).collect();
        let f = fit_line(&x, &y).unwrap();
        assert!((f.slope + 0.25).abs() < 1e-15);
        assert!((f.intercept - 0.5).abs() < 1e-15);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_fit() {
        assert!(fit_line(&[1.0, 1.0], &[0.0, 2.0]).is_none());
        assert!(fit_line(&[1.0], &[0.0]).is_none());
    }
}
