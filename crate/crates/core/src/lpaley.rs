//! Dyadic partitions of unity on the spectrum, the square function and the Q/R pair.
//!
//! With a seed Θ (≡ 1 on [−1,1], 0 outside [−2,2]) the profiles are
//! φ(x) = Θ(x) − Θ(2x), Φ = Θ and ψ(x) = Θ(x/4) − Θ(4x); band j uses φ_j(λ) = φ(2^{−j}λ).
//! Sums over consecutive bands telescope, so Σ_{j=a}^{b} φ_j = Θ(2^{−b}·) − Θ(2^{1−a}·).

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::Sum;
use crate::transform::{ac_part, KQuadrature, Transform};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::sync::Arc;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

fn smooth_step(t: f64) -> f64 {
    let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = f(t);
        a / (a + f(1.0 - t))
    }
}

/// The default C^∞ seed: S(2 − |x|) with S(t) = e^{−1/t}/(e^{−1/t} + e^{−1/(1−t)}).
pub fn default_seed(x: f64) -> f64 {
    smooth_step(2.0 - x.abs())
}

#[derive(Clone)]
pub enum Seed {
    Smooth,
    Custom(Profile),
}

#[derive(Clone)]
pub struct ProfileParams {
    pub seed: Seed,
    pub j_min: i32,
    pub j_max: i32,
}

impl Default for ProfileParams {
    fn default() -> Self {
        Self { seed: Seed::Smooth, j_min: -8, j_max: 12 }
    }
}

#[derive(Clone)]
pub struct DyadicPartition {
    theta: Profile,
    pub j_min: i32,
    pub j_max: i32,
}

impl std::fmt::Debug for DyadicPartition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DyadicPartition").field("j_min", &self.j_min).field("j_max", &self.j_max).finish()
    }
}

pub fn make_partition(params: &ProfileParams) -> Result<DyadicPartition> {
    if params.j_min >= params.j_max {
        return Err(Error::Argument(format!("empty band range [{}, {}]", params.j_min, params.j_max)));
    }
    let theta: Profile = match &params.seed {
        Seed::Smooth => Arc::new(default_seed),
        Seed::Custom(f) => {
            validate_seed(f.as_ref())?;
            f.clone()
        }
    };
    Ok(DyadicPartition { theta, j_min: params.j_min, j_max: params.j_max })
}

fn validate_seed(f: &dyn Fn(f64) -> f64) -> Result<()> {
    const N: usize = 2000;
    for i in 0..=N {
        let t = i as f64 / N as f64;
        for x in [t, -t] {
            if f(x) != 1.0 {
                return Err(Error::InvalidProfile(format!("seed is {} at x = {x}, expected 1 on [-1,1]", f(x))));
            }
            for y in [2.0 + t, -2.0 - t] {
                if f(y) != 0.0 {
                    return Err(Error::InvalidProfile(format!("seed is {} at x = {y}, expected 0 off [-2,2]", f(y))));
                }
            }
        }
    }
    let mut prev = f(1.0);
    for i in 1..=N {
        let x = 1.0 + i as f64 / N as f64;
        let v = f(x);
        if !v.is_finite() || v > prev || (f(-x) - v).abs() > 1e-14 {
            return Err(Error::InvalidProfile(format!("seed not monotone (or not even) on [1,2] near x = {x}")));
        }
        prev = v;
    }
    Ok(())
}

impl DyadicPartition {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        make_partition(&ProfileParams { seed: Seed::Smooth, j_min, j_max })
    }

    pub fn with_range(&self, j_min: i32, j_max: i32) -> Result<Self> {
        if j_min >= j_max {
            return Err(Error::Argument(format!("empty band range [{j_min}, {j_max}]")));
        }
        Ok(Self { theta: self.theta.clone(), j_min, j_max })
    }

    pub fn bands(&self) -> impl Iterator<Item = i32> {
        self.j_min..=self.j_max
    }

    pub fn theta(&self, x: f64) -> f64 {
        (self.theta)(x)
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.theta(x) - self.theta(2.0 * x)
    }

    /// Low-energy profile Φ = Θ.
    pub fn big_phi(&self, x: f64) -> f64 {
        self.theta(x)
    }

    pub fn psi(&self, x: f64) -> f64 {
        self.theta(x / 4.0) - self.theta(4.0 * x)
    }

    pub fn phi_j(&self, j: i32, lambda: f64) -> f64 {
        self.phi(lambda * 2f64.powi(-j))
    }

    pub fn big_phi_j(&self, j: i32, lambda: f64) -> f64 {
        self.big_phi(lambda * 2f64.powi(-j))
    }

    pub fn psi_j(&self, j: i32, lambda: f64) -> f64 {
        self.psi(lambda * 2f64.powi(-j))
    }

    /// Σ_{j∈range} φ_j(λ), summed term by term.
    pub fn band_sum(&self, lambda: f64) -> f64 {
        let mut s = Sum::new();
        for j in self.bands() {
            s.add(self.phi_j(j, lambda));
        }
        s.value()
    }

    pub fn square_sum(&self, lambda: f64) -> f64 {
        let mut s = Sum::new();
        for j in self.bands() {
            let v = self.phi_j(j, lambda);
            s.add(v * v);
        }
        s.value()
    }

    /// [min, max] of Σ_j φ_j(λ)² over the covered annulus 2^{j_min} ≤ λ ≤ 2^{j_max}.
    pub fn square_sum_bracket(&self) -> (f64, f64) {
        let lo = self.j_min as f64;
        let hi = self.j_max as f64;
        let n = 4096 * (self.j_max - self.j_min) as usize;
        let mut mn = f64::INFINITY;
        let mut mx = f64::NEG_INFINITY;
        for i in 0..=n {
            let v = self.square_sum(2f64.powf(lo + (hi - lo) * i as f64 / n as f64));
            mn = mn.min(v);
            mx = mx.max(v);
        }
        (mn, mx)
    }

    /// λ-support of φ_j: [2^{j−1}, 2^{j+1}].
    pub fn band_support(j: i32) -> (f64, f64) {
        (2f64.powi(j - 1), 2f64.powi(j + 1))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SquareFunctionResult {
    pub values: Vec<f64>,
    pub per_band_norms: Vec<f64>,
    pub j_range: (i32, i32),
    /// ‖(1 − Σ_j φ_j)(H) f_ac‖₂ / ‖f‖₂ measured on the k-quadrature.
    pub spectral_tail: f64,
    /// ‖f − f_ac‖₂, the bound-state part removed before banding.
    pub bound_part_norm: f64,
}

impl SquareFunctionResult {
    pub fn valid(&self) -> bool {
        self.spectral_tail < 1e-8
    }
}

/// Bands φ_j(H)f_ac as complex grid functions, together with the a.c. coefficients.
pub struct BandDecomposition {
    pub f_ac: Vec<f64>,
    pub bands: Vec<Vec<Complex64>>,
    pub spectral_tail: f64,
}

pub fn band_decompose(nu: u32, f: &[f64], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<BandDecomposition> {
    let f_ac = ac_part(nu, f, grid);
    let t = Transform::new(nu, quad, grid)?;
    let c = t.forward_real(&f_ac);
    let bands = partition
        .bands()
        .map(|j| {
            let cj: Vec<Complex64> = quad.nodes.iter().zip(&c.values).map(|(&k, &v)| v * partition.phi_j(j, k * k)).collect();
            t.adjoint(&cj)
        })
        .collect();
    let norm = grid.norm2(f);
    let miss: f64 = quad
        .nodes
        .iter()
        .zip(&quad.weights)
        .zip(&c.values)
        .map(|((&k, &w), v)| {
            let r = 1.0 - partition.band_sum(k * k);
            w * r * r * v.norm_sqr()
        })
        .sum::<f64>()
        / (2.0 * PI);
    let spectral_tail = if norm > 0.0 { miss.sqrt() / norm } else { 0.0 };
    Ok(BandDecomposition { f_ac, bands, spectral_tail })
}

/// Re Σ_{lo≤j≤hi} φ_j(H)g: a test function whose distorted spectrum sits inside the bands lo..=hi.
pub fn band_limited(nu: u32, g: &[f64], lo: i32, hi: i32, partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<Vec<f64>> {
    if lo > hi || lo < partition.j_min || hi > partition.j_max {
        return Err(Error::Argument(format!("bands {lo}..={hi} outside the partition range {}..={}", partition.j_min, partition.j_max)));
    }
    let d = band_decompose(nu, g, partition, grid, quad)?;
    let mut f = vec![Sum::new(); grid.len()];
    for (j, b) in partition.bands().zip(&d.bands) {
        if (lo..=hi).contains(&j) {
            for (a, v) in f.iter_mut().zip(b) {
                a.add(v.re);
            }
        }
    }
    Ok(f.iter().map(Sum::value).collect())
}

pub fn square_function(nu: u32, f: &[f64], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<SquareFunctionResult> {
    let d = band_decompose(nu, f, partition, grid, quad)?;
    let n = grid.len();
    let mut acc = vec![Sum::new(); n];
    let mut per_band_norms = Vec::with_capacity(d.bands.len());
    for b in &d.bands {
        per_band_norms.push(grid.norm2_complex(b));
        for (a, v) in acc.iter_mut().zip(b) {
            a.add(v.norm_sqr());
        }
    }
    let bound: Vec<f64> = f.iter().zip(&d.f_ac).map(|(a, b)| a - b).collect();
    Ok(SquareFunctionResult {
        values: acc.iter().map(|a| a.value().max(0.0).sqrt()).collect(),
        per_band_norms,
        j_range: (partition.j_min, partition.j_max),
        spectral_tail: d.spectral_tail,
        bound_part_norm: grid.norm2(&bound),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LpReport {
    pub nu: u32,
    pub p: f64,
    pub function_id: String,
    pub ratio: f64,
    pub per_band_norms: Vec<f64>,
    pub j_range: (i32, i32),
    pub spectral_tail: f64,
}

pub fn lp_report(
    nu: u32,
    f: &[f64],
    function_id: &str,
    p: f64,
    partition: &DyadicPartition,
    grid: &Grid,
    quad: &KQuadrature,
) -> Result<LpReport> {
    if !(1.25..=4.0).contains(&p) {
        return Err(Error::Argument(format!("p = {p} outside the supported range [1.25, 4]")));
    }
    let f_ac = ac_part(nu, f, grid);
    let denom = grid.norm_p(&f_ac, p);
    if denom < 1e-12 {
        return Err(Error::Degenerate(format!("‖f‖_{p} = {denom:.2e} after removing bound states")));
    }
    let sf = square_function(nu, &f_ac, partition, grid, quad)?;
    Ok(LpReport {
        nu,
        p,
        function_id: function_id.to_string(),
        ratio: grid.norm_p(&sf.values, p) / denom,
        per_band_norms: sf.per_band_norms,
        j_range: sf.j_range,
        spectral_tail: sf.spectral_tail,
    })
}

/// ‖Sf‖_p / ‖f‖_p for several p, sharing one square function.
pub fn lp_ratios(nu: u32, f: &[f64], ps: &[f64], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<Vec<f64>> {
    if let Some(p) = ps.iter().find(|p| !(1.25..=4.0).contains(*p)) {
        return Err(Error::Argument(format!("p = {p} outside the supported range [1.25, 4]")));
    }
    let f_ac = ac_part(nu, f, grid);
    let sf = square_function(nu, &f_ac, partition, grid, quad)?;
    ps.iter()
        .map(|&p| {
            let denom = grid.norm_p(&f_ac, p);
            if denom < 1e-12 {
                return Err(Error::Degenerate(format!("‖f‖_{p} = {denom:.2e} after removing bound states")));
            }
            Ok(grid.norm_p(&sf.values, p) / denom)
        })
        .collect()
}

/// ‖Sf‖_p / ‖f‖_p for the a.c. part of f.
pub fn lp_ratio(nu: u32, f: &[f64], p: f64, partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<f64> {
    Ok(lp_report(nu, f, "f", p, partition, grid, quad)?.ratio)
}

/// Q: f ↦ {φ_j(H) f_ac}.
pub fn q_operator(nu: u32, f: &[f64], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<Vec<Vec<Complex64>>> {
    Ok(band_decompose(nu, f, partition, grid, quad)?.bands)
}

/// R: {f_j} ↦ Σ_j ψ_j(H) f_j, each f_j taken through the grid transform.
pub fn r_operator(nu: u32, parts: &[Vec<Complex64>], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<Vec<Complex64>> {
    let expected = (partition.j_max - partition.j_min + 1) as usize;
    if parts.len() != expected {
        return Err(Error::Argument(format!("R expects {expected} band functions, got {}", parts.len())));
    }
    let t = Transform::new(nu, quad, grid)?;
    let mut acc = vec![Complex64::new(0.0, 0.0); grid.len()];
    for (j, fj) in partition.bands().zip(parts) {
        let c = t.forward(fj);
        let cj: Vec<Complex64> = quad.nodes.iter().zip(&c.values).map(|(&k, &v)| v * partition.psi_j(j, k * k)).collect();
        for (a, v) in acc.iter_mut().zip(t.adjoint(&cj)) {
            *a += v;
        }
    }
    Ok(acc)
}

/// ‖Σ_j ψ_j(H)φ_j(H) f − f_ac‖₂ / ‖f_ac‖₂, composing ψ_j(H)φ_j(H) = (ψ_jφ_j)(H) in the
/// functional calculus.
pub fn q_r_roundtrip(nu: u32, f: &[f64], partition: &DyadicPartition, grid: &Grid, quad: &KQuadrature) -> Result<f64> {
    let f_ac = ac_part(nu, f, grid);
    let norm = grid.norm2(&f_ac);
    if norm <= 1e-12 * grid.norm2(f).max(f64::MIN_POSITIVE) || norm == 0.0 {
        return Ok(0.0);
    }
    let t = Transform::new(nu, quad, grid)?;
    let c = t.forward_real(&f_ac);
    let composed: Vec<Complex64> = quad
        .nodes
        .iter()
        .zip(&c.values)
        .map(|(&k, &v)| {
            let lam = k * k;
            let mut s = Sum::new();
            for j in partition.bands() {
                s.add(partition.psi_j(j, lam) * partition.phi_j(j, lam));
            }
            v * s.value()
        })
        .collect();
    let out = t.adjoint(&composed);
    let r: Vec<Complex64> = out.iter().zip(&f_ac).map(|(a, &b)| a - b).collect();
    Ok(grid.norm2_complex(&r) / norm)
}
