//! Eigenfunction polynomials p_ν(s, z), distorted plane waves and PDE residuals.
//!
//! p_0 = 1 and p_n = (1 − s²)∂_s p_{n−1} + (z − n s) p_{n−1}; with s = tanh x and z = ik,
//! e_ν(x,k) = sign(k)^ν Π_{j=1}^ν (j + i|k|)^{−1} p_ν(tanh x, ik) e^{ikx}.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::CSum;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub const DEFAULT_MAX_NU: u32 = 12;

/// Integer polynomial Σ c[a][b] s^a z^b.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BivarPoly {
    pub nu: u32,
    pub coeffs: Vec<Vec<i128>>,
}

impl BivarPoly {
    pub fn one() -> Self {
        Self { nu: 0, coeffs: vec![vec![1]] }
    }

    pub fn coeff(&self, s_deg: usize, z_deg: usize) -> i128 {
        self.coeffs.get(s_deg).and_then(|r| r.get(z_deg)).copied().unwrap_or(0)
    }

    fn next(&self) -> Option<Self> {
        let n = self.nu as usize + 1;
        let ni = n as i128;
        let mut c = vec![vec![0i128; n + 1]; n + 1];
        let add = |c: &mut Vec<Vec<i128>>, a: usize, b: usize, v: i128| -> Option<()> {
            c[a][b] = c[a][b].checked_add(v)?;
            Some(())
        };
        for (a, row) in self.coeffs.iter().enumerate() {
            for (b, &v) in row.iter().enumerate() {
                if v == 0 {
                    continue;
                }
                let ai = a as i128;
                if a >= 1 {
                    // (1 − s²)·a·s^{a−1}
                    let d = v.checked_mul(ai)?;
                    add(&mut c, a - 1, b, d)?;
                    add(&mut c, a + 1, b, d.checked_neg()?)?;
                }
                add(&mut c, a, b + 1, v)?;
                add(&mut c, a + 1, b, v.checked_mul(ni)?.checked_neg()?)?;
            }
        }
        Some(Self { nu: n as u32, coeffs: c })
    }

    /// Evaluate at real s and complex z.
    pub fn eval(&self, s: f64, z: Complex64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for row in self.coeffs.iter().rev() {
            let mut r = Complex64::new(0.0, 0.0);
            for &c in row.iter().rev() {
                r = r * z + c as f64;
            }
            acc = acc * s + r;
        }
        acc
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("plain integers serialize")
    }
}

/// p_0, …, p_ν with the default cap on ν.
pub fn poly_recursion(nu: u32) -> Result<Vec<BivarPoly>> {
    poly_recursion_capped(nu, DEFAULT_MAX_NU)
}

pub fn poly_recursion_capped(nu: u32, max_nu: u32) -> Result<Vec<BivarPoly>> {
    if nu > max_nu {
        return Err(Error::Range { what: "nu", value: nu as i64, max: max_nu as i64 });
    }
    let mut out = vec![BivarPoly::one()];
    for _ in 0..nu {
        let next = out
            .last()
            .expect("seeded")
            .next()
            .ok_or(Error::Range { what: "nu (coefficient overflow)", value: nu as i64, max: out.len() as i64 - 1 })?;
        out.push(next);
    }
    Ok(out)
}

pub fn potential(nu: u32, x: f64) -> f64 {
    let c = 1.0 / x.cosh();
    -((nu * (nu + 1)) as f64) * c * c
}

/// Floating-point view of p_ν used for wave evaluation.
#[derive(Clone, Debug)]
pub struct WaveFamily {
    nu: u32,
    poly: BivarPoly,
    c: Vec<Vec<f64>>,
}

impl WaveFamily {
    pub fn new(nu: u32) -> Result<Self> {
        let poly = poly_recursion(nu)?.pop().expect("nonempty");
        let c = poly.coeffs.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
        Ok(Self { nu, poly, c })
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn poly(&self) -> &BivarPoly {
        &self.poly
    }

    /// A_a(k) = Σ_b c_ab (ik)^b, so that P(x,k) = Σ_a tanh(x)^a A_a(k).
    pub fn s_coeffs(&self, k: f64) -> Vec<Complex64> {
        let z = Complex64::new(0.0, k);
        self.c
            .iter()
            .map(|row| row.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * z + v))
            .collect()
    }

    #[inline]
    pub fn horner(a: &[Complex64], s: f64) -> Complex64 {
        a.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &v| acc * s + v)
    }

    /// P(x,k) = p_ν(tanh x, ik).
    pub fn p(&self, x: f64, k: f64) -> Complex64 {
        Self::horner(&self.s_coeffs(k), x.tanh())
    }

    /// sign(k)^ν Π_{j=1}^ν (j + i|k|)^{−1}; k must be nonzero.
    pub fn norm_factor(&self, k: f64) -> Complex64 {
        let mut d = Complex64::new(1.0, 0.0);
        for j in 1..=self.nu {
            d *= Complex64::new(j as f64, k.abs());
        }
        let sgn = if k < 0.0 && self.nu % 2 == 1 { -1.0 } else { 1.0 };
        Complex64::new(sgn, 0.0) / d
    }

    /// Π_{j=1}^ν (j² + k²)^{−1}.
    pub fn product_weight(&self, k: f64) -> f64 {
        (1..=self.nu).map(|j| 1.0 / ((j * j) as f64 + k * k)).product()
    }

    pub fn wave(&self, x: f64, k: f64) -> Result<Complex64> {
        if k == 0.0 {
            return Err(Error::ZeroFrequency);
        }
        Ok(self.norm_factor(k) * self.p(x, k) * Complex64::cis(k * x))
    }

    pub fn product(&self, x: f64, y: f64, k: f64) -> Complex64 {
        let a = self.s_coeffs(k);
        let b = self.s_coeffs(-k);
        Self::horner(&a, x.tanh()) * Self::horner(&b, y.tanh()) * Complex64::cis(k * (x - y)) * self.product_weight(k)
    }

    /// Σ_{a,b} |c_ab| |k|^b · Π (j² + k²)^{−1/2}: a bound on |e_ν(x,k)| valid for all x.
    pub fn crude_bound(&self, k: f64) -> f64 {
        let p: f64 = self
            .c
            .iter()
            .flat_map(|r| r.iter().enumerate().map(|(b, v)| v.abs() * k.abs().powi(b as i32)))
            .sum();
        p * self.product_weight(k).sqrt()
    }
}

pub fn eval_distorted_wave(nu: u32, x: f64, k: f64) -> Result<Complex64> {
    WaveFamily::new(nu)?.wave(x, k)
}

pub fn eval_wave_product(nu: u32, x: f64, y: f64, k: f64) -> Result<Complex64> {
    Ok(WaveFamily::new(nu)?.product(x, y, k))
}

/// A sampled wave value together with its coordinates.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DistortedWaveValue {
    pub value: Complex64,
    pub x: f64,
    pub k: f64,
    pub nu: u32,
}

impl DistortedWaveValue {
    pub fn eval(family: &WaveFamily, x: f64, k: f64) -> Result<Self> {
        Ok(Self { value: family.wave(x, k)?, x, k, nu: family.nu() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum FiniteDifference {
    #[default]
    Central,
    FivePoint,
}

pub fn helmholtz_residual(nu: u32, k: f64, grid: &Grid) -> Result<f64> {
    helmholtz_residual_with(nu, k, grid, FiniteDifference::Central)
}

/// max over interior points of |(−D² + V − k²)e| / (1 + k²).
pub fn helmholtz_residual_with(nu: u32, k: f64, grid: &Grid, fd: FiniteDifference) -> Result<f64> {
    if k == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let h = grid.spacing();
    if h * k.abs() > 0.1 {
        return Err(Error::Resolution(format!("h·|k| = {:.3e} > 0.1", h * k.abs())));
    }
    let fam = WaveFamily::new(nu)?;
    let e: Vec<Complex64> = (0..grid.len()).map(|i| fam.wave(grid.point(i), k)).collect::<Result<_>>()?;
    let h2 = h * h;
    let (lo, hi) = match fd {
        FiniteDifference::Central => (1, grid.len() - 1),
        FiniteDifference::FivePoint => (2, grid.len() - 2),
    };
    let mut worst: f64 = 0.0;
    for i in lo..hi {
        let d2 = match fd {
            FiniteDifference::Central => (e[i + 1] - e[i] * 2.0 + e[i - 1]) / h2,
            FiniteDifference::FivePoint => {
                (-e[i + 2] + e[i + 1] * 16.0 - e[i] * 30.0 + e[i - 1] * 16.0 - e[i - 2]) / (12.0 * h2)
            }
        };
        let r = -d2 + e[i] * (potential(nu, grid.point(i)) - k * k);
        worst = worst.max(r.norm());
    }
    Ok(worst / (1.0 + k * k))
}

/// Weights correcting plain sums to the alternative extended Simpson rule at each end.
const END_CORRECTION: [f64; 3] = [-5.0 / 8.0, 1.0 / 6.0, -1.0 / 24.0];

/// ∫ over points lo..=hi of samples f, given inclusive prefix sums of f.
fn span_integral(f: &[Complex64], prefix: &[Complex64], lo: usize, hi: usize, h: f64) -> Complex64 {
    if hi <= lo {
        return Complex64::new(0.0, 0.0);
    }
    let base = prefix[hi] - if lo > 0 { prefix[lo - 1] } else { Complex64::new(0.0, 0.0) };
    let n = hi - lo + 1;
    if n >= 6 {
        let mut s = base;
        for (j, c) in END_CORRECTION.iter().enumerate() {
            s += (f[lo + j] + f[hi - j]) * *c;
        }
        s * h
    } else {
        (base - (f[lo] + f[hi]) * 0.5) * h
    }
}

fn prefix_sums(f: &[Complex64]) -> Vec<Complex64> {
    let mut acc = CSum::new();
    f.iter()
        .map(|&v| {
            acc.add(v);
            acc.value()
        })
        .collect()
}

/// max over the grid of |e − e^{ikx} − (1/2i|k|)∫ e^{i|k||x−y|} V(y) e(y) dy|.
///
/// The outgoing free resolvent uses |k|; for k > 0 this is the usual form.
pub fn lippmann_schwinger_residual(nu: u32, k: f64, grid: &Grid) -> Result<f64> {
    if k == 0.0 {
        return Err(Error::ZeroFrequency);
    }
    let l = grid.half_width();
    if -potential(nu, l) >= 1e-12 {
        return Err(Error::Argument(format!("|V(L)| = {:.2e} is not below 1e-12; enlarge L", -potential(nu, l))));
    }
    let h = grid.spacing();
    if h * k.abs() > 0.1 {
        return Err(Error::Resolution(format!("h·|k| = {:.3e} > 0.1", h * k.abs())));
    }
    let kap = k.abs();
    let fam = WaveFamily::new(nu)?;
    let n = grid.len();
    let x = grid.points();
    let e: Vec<Complex64> = x.iter().map(|&xi| fam.wave(xi, k)).collect::<Result<_>>()?;
    let ve: Vec<Complex64> = x.iter().zip(&e).map(|(&xi, &ei)| ei * potential(nu, xi)).collect();
    let left: Vec<Complex64> = x.iter().zip(&ve).map(|(&xi, &v)| v * Complex64::cis(-kap * xi)).collect();
    let right: Vec<Complex64> = x.iter().zip(&ve).map(|(&xi, &v)| v * Complex64::cis(kap * xi)).collect();
    let pl = prefix_sums(&left);
    let pr = prefix_sums(&right);
    let pref = Complex64::new(0.0, -0.5 / kap);
    let mut worst: f64 = 0.0;
    for i in 0..n {
        let li = span_integral(&left, &pl, 0, i, h);
        let ri = span_integral(&right, &pr, i, n - 1, h);
        let integral = Complex64::cis(kap * x[i]) * li + Complex64::cis(-kap * x[i]) * ri;
        let r = e[i] - Complex64::cis(k * x[i]) - pref * integral;
        worst = worst.max(r.norm());
    }
    Ok(worst)
}
