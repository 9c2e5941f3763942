//! Distorted Fourier transform of the a.c. part of H and its adjoint.
//!
//! (Ff)(k) = ∫ conj(e_ν(x,k)) f(x) dx and (F*c)(x) = (1/2π) ∫ e_ν(x,k) c(k) dk, both by
//! quadrature: trapezoid in x, composite Gauss–Legendre in k. Zero is always a panel
//! breakpoint, so no node sits at k = 0.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::CSum;
use crate::parallel::map_indexed;
use crate::polyrec::WaveFamily;
use crate::quadrature::composite;
use crate::spectrum::{bound_states, BoundState};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

pub const PANEL_ORDER: usize = 8;

#[derive(Clone, Debug, Serialize)]
pub struct KQuadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub k_max: f64,
}

impl KQuadrature {
    fn from_positive_breaks(pos: &[f64], k_max: f64, order: usize) -> Self {
        let (xp, wp) = composite(pos, order);
        let mut nodes: Vec<f64> = xp.iter().rev().map(|x| -x).collect();
        let mut weights: Vec<f64> = wp.iter().rev().copied().collect();
        nodes.extend(xp);
        weights.extend(wp);
        Self { nodes, weights, k_max }
    }

    /// Equal panels on [−k_max, k_max]; `n_nodes` must be a multiple of 2·order.
    pub fn uniform(k_max: f64, n_nodes: usize, order: usize) -> Result<Self> {
        if !(k_max > 0.0) || order == 0 || n_nodes == 0 || n_nodes % (2 * order) != 0 {
            return Err(Error::Argument(format!(
                "need k_max > 0 and a node count divisible by {}, got k_max={k_max}, n={n_nodes}",
                2 * order
            )));
        }
        let per_side = n_nodes / (2 * order);
        let pos: Vec<f64> = (0..=per_side).map(|i| k_max * i as f64 / per_side as f64).collect();
        Ok(Self::from_positive_breaks(&pos, k_max, order))
    }

    /// Panels on [−k_max, k_max] no wider than `max_panel`, with ±`breaks` as extra breakpoints.
    pub fn with_breaks(k_max: f64, breaks: &[f64], max_panel: f64, order: usize) -> Result<Self> {
        Self::covering(0.0, k_max, breaks, max_panel, order)
    }

    /// Panels on ±[k_lo, k_hi] (k_lo ≥ 0) no wider than `max_panel`.
    pub fn covering(k_lo: f64, k_hi: f64, breaks: &[f64], max_panel: f64, order: usize) -> Result<Self> {
        if !(k_hi > k_lo && k_lo >= 0.0 && max_panel > 0.0) {
            return Err(Error::Argument(format!("bad k window [{k_lo}, {k_hi}] or panel width {max_panel}")));
        }
        let mut b: Vec<f64> = vec![k_lo, k_hi];
        b.extend(breaks.iter().map(|v| v.abs()).filter(|&v| v > k_lo && v < k_hi));
        b.sort_by(f64::total_cmp);
        b.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * k_hi);
        let mut pos = vec![b[0]];
        for w in b.windows(2) {
            let m = ((w[1] - w[0]) / max_panel).ceil().max(1.0) as usize;
            for i in 1..=m {
                pos.push(if i == m { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / m as f64 });
            }
        }
        Ok(Self::from_positive_breaks(&pos, k_hi, order))
    }

    /// Default transform rule: panel width ≤ π/L over [−k_max, k_max] with dyadic breakpoints
    /// ±2^{j/2} for j_min − 1 ≤ j ≤ j_max + 1.
    pub fn dyadic(k_max: f64, j_min: i32, j_max: i32, grid: &Grid) -> Result<Self> {
        let breaks: Vec<f64> = ((j_min - 1)..=(j_max + 1)).map(|j| 2f64.powf(j as f64 / 2.0)).collect();
        Self::with_breaks(k_max, &breaks, PI / grid.half_width(), PANEL_ORDER)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn weight_sum(&self) -> f64 {
        crate::numeric::sum(self.weights.iter().copied())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralCoefficients {
    pub nu: u32,
    pub nodes: Vec<f64>,
    pub values: Vec<Complex64>,
    /// Largest |f| at the two grid ends; a crude truncation indicator.
    pub boundary_magnitude: f64,
}

impl SpectralCoefficients {
    pub fn map(&self, g: impl Fn(f64, Complex64) -> Complex64) -> Self {
        Self {
            nu: self.nu,
            nodes: self.nodes.clone(),
            values: self.nodes.iter().zip(&self.values).map(|(&k, &v)| g(k, v)).collect(),
            boundary_magnitude: self.boundary_magnitude,
        }
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "re", "im"])?;
        for (k, v) in self.nodes.iter().zip(&self.values) {
            w.write_record([format!("{k:e}"), format!("{:e}", v.re), format!("{:e}", v.im)])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Precomputed transform pair for one (ν, quadrature, grid).
pub struct Transform<'a> {
    nu: u32,
    quad: &'a KQuadrature,
    grid: &'a Grid,
    x: Vec<f64>,
    s: Vec<f64>,
    /// N(k)·A_a(k) per node.
    coef: Vec<Vec<Complex64>>,
}

const RESYNC: usize = 32;

impl<'a> Transform<'a> {
    pub fn new(nu: u32, quad: &'a KQuadrature, grid: &'a Grid) -> Result<Self> {
        let fam = WaveFamily::new(nu)?;
        let x = grid.points();
        let s = x.iter().map(|v| v.tanh()).collect();
        let coef = quad
            .nodes
            .iter()
            .map(|&k| {
                let nf = fam.norm_factor(k);
                fam.s_coeffs(k).into_iter().map(|a| a * nf).collect()
            })
            .collect();
        Ok(Self { nu, quad, grid, x, s, coef })
    }

    pub fn nu(&self) -> u32 {
        self.nu
    }

    pub fn quad(&self) -> &KQuadrature {
        self.quad
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    pub fn forward(&self, f: &[Complex64]) -> SpectralCoefficients {
        assert_eq!(f.len(), self.grid.len());
        let n = f.len();
        let h = self.grid.spacing();
        let boundary = f[0].norm().max(f[n - 1].norm());
        if boundary > 1e-10 {
            log::warn!("forward transform input is {boundary:.2e} at the grid ends; truncation tail is of that order");
        }
        let wf: Vec<Complex64> = (0..n).map(|i| f[i] * self.grid.weight(i)).collect();
        let values = map_indexed(self.quad.len(), |q| {
            let k = self.quad.nodes[q];
            let a: Vec<Complex64> = self.coef[q].iter().map(|c| c.conj()).collect();
            let step = Complex64::cis(-k * h);
            let mut acc = CSum::new();
            let mut rot = Complex64::new(1.0, 0.0);
            for i in 0..n {
                rot = if i % RESYNC == 0 { Complex64::cis(-k * self.x[i]) } else { rot * step };
                acc.add(WaveFamily::horner(&a, self.s[i]) * rot * wf[i]);
            }
            acc.value()
        });
        SpectralCoefficients { nu: self.nu, nodes: self.quad.nodes.clone(), values, boundary_magnitude: boundary }
    }

    pub fn forward_real(&self, f: &[f64]) -> SpectralCoefficients {
        let c: Vec<Complex64> = f.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c)
    }

    /// (1/2π) Σ_k w_k e_ν(x,k) c(k); nodes with c(k) = 0 are skipped.
    pub fn adjoint(&self, c: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(c.len(), self.quad.len());
        let active: Vec<usize> = (0..c.len()).filter(|&q| c[q] != Complex64::new(0.0, 0.0)).collect();
        let wc: Vec<Complex64> = active.iter().map(|&q| c[q] * (self.quad.weights[q] / (2.0 * PI))).collect();
        let n = self.grid.len();
        let h = self.grid.spacing();
        let blocks = n.div_ceil(RESYNC);
        let parts = map_indexed(blocks, |b| {
            let lo = b * RESYNC;
            let hi = (lo + RESYNC).min(n);
            let mut acc = vec![CSum::new(); hi - lo];
            for (t, &q) in active.iter().enumerate() {
                let k = self.quad.nodes[q];
                let a: Vec<Complex64> = self.coef[q].iter().map(|v| v * wc[t]).collect();
                let step = Complex64::cis(k * h);
                let mut rot = Complex64::cis(k * self.x[lo]);
                for i in lo..hi {
                    acc[i - lo].add(WaveFamily::horner(&a, self.s[i]) * rot);
                    rot *= step;
                }
            }
            acc.into_iter().map(|v| v.value()).collect::<Vec<_>>()
        });
        parts.into_iter().flatten().collect()
    }
}

pub fn forward(nu: u32, f: &[f64], quad: &KQuadrature, grid: &Grid) -> Result<SpectralCoefficients> {
    Ok(Transform::new(nu, quad, grid)?.forward_real(f))
}

pub fn adjoint_apply(nu: u32, coeffs: &SpectralCoefficients, quad: &KQuadrature, grid: &Grid) -> Result<Vec<Complex64>> {
    if coeffs.values.len() != quad.len() {
        return Err(Error::Argument(format!(
            "coefficients have {} entries but the quadrature has {} nodes",
            coeffs.values.len(),
            quad.len()
        )));
    }
    Ok(Transform::new(nu, quad, grid)?.adjoint(&coeffs.values))
}

/// Σ_m ⟨f, ψ_m⟩ ψ_m.
pub fn bound_projection(f: &[f64], states: &[BoundState], grid: &Grid) -> Vec<f64> {
    let mut out = vec![0.0; f.len()];
    for s in states {
        let c = grid.inner(f, &s.samples);
        for (o, v) in out.iter_mut().zip(&s.samples) {
            *o += c * v;
        }
    }
    out
}

/// f − Σ_m ⟨f, ψ_m⟩ ψ_m.
pub fn ac_part(nu: u32, f: &[f64], grid: &Grid) -> Vec<f64> {
    let p = bound_projection(f, &bound_states(nu, grid), grid);
    f.iter().zip(&p).map(|(a, b)| a - b).collect()
}

/// ‖F*Ff + Σ⟨f,ψ_m⟩ψ_m − f‖₂ / ‖f‖₂.
pub fn completeness_defect(nu: u32, f: &[f64], grid: &Grid, quad: &KQuadrature) -> Result<f64> {
    let norm = grid.norm2(f);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let t = Transform::new(nu, quad, grid)?;
    let back = t.adjoint(&t.forward_real(f).values);
    let p = bound_projection(f, &bound_states(nu, grid), grid);
    let r: Vec<Complex64> = (0..f.len()).map(|i| back[i] + p[i] - f[i]).collect();
    Ok(grid.norm2_complex(&r) / norm)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gaussian(g: &Grid, c: f64) -> Vec<f64> {
        g.sample(|x| (-(x - c) * (x - c) / 2.0).exp())
    }

    #[test]
    fn quadrature_shapes() {
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        assert_eq!(q.len(), 4096);
        assert!((q.weight_sum() - 80.0).abs() < 1e-12);
        assert!(q.nodes.windows(2).all(|w| w[1] > w[0]));
        assert!(q.nodes.iter().all(|&k| k != 0.0));
        for i in 0..q.len() {
            assert_eq!(q.nodes[i], -q.nodes[q.len() - 1 - i]);
        }
        assert!(KQuadrature::uniform(40.0, 100, 8).is_err());
        let g = Grid::default();
        let d = KQuadrature::dyadic(40.0, -8, 12, &g).unwrap();
        assert!((d.weight_sum() - 80.0).abs() < 1e-11);
    }

    #[test]
    fn free_gaussian_transform() {
        let g = Grid::default();
        let q = KQuadrature::uniform(12.0, 1024, 8).unwrap();
        let c = forward(0, &gaussian(&g, 0.0), &q, &g).unwrap();
        for (k, v) in c.nodes.iter().zip(&c.values) {
            let want = (2.0 * PI).sqrt() * (-k * k / 2.0).exp();
            assert!((v - want).norm() < 1e-8, "k={k}");
        }
    }

    #[test]
    fn bound_state_has_no_continuum_component() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        let psi = &bound_states(1, &g)[0];
        let c = forward(1, &psi.samples, &q, &g).unwrap();
        assert!(c.values.iter().all(|v| v.norm() <= 1e-8));
    }

    #[test]
    fn linearity_and_conjugate_symmetry() {
        let g = Grid::new(15.0, 1024).unwrap();
        let q = KQuadrature::uniform(10.0, 256, 8).unwrap();
        let f = gaussian(&g, 0.5);
        let h: Vec<f64> = g.sample(|x| x * (-x * x).exp());
        let t = Transform::new(2, &q, &g).unwrap();
        let cf = t.forward_real(&f);
        let ch = t.forward_real(&h);
        let mix: Vec<f64> = f.iter().zip(&h).map(|(a, b)| 2.0 * a + 3.0 * b).collect();
        let cm = t.forward_real(&mix);
        let n = q.len();
        for i in 0..n {
            assert!((cm.values[i] - cf.values[i] * 2.0 - ch.values[i] * 3.0).norm() < 1e-12);
        }
        let free = Transform::new(0, &q, &g).unwrap().forward_real(&f);
        for i in 0..n {
            assert!((free.values[n - 1 - i] - free.values[i].conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn free_round_trip() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        let f = gaussian(&g, 0.3);
        assert!(completeness_defect(0, &f, &g, &q).unwrap() <= 1e-8);
    }

    #[test]
    fn completeness_projector_identity() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        let psi2 = bound_states(2, &g)[1].samples.clone();
        assert!(completeness_defect(2, &psi2, &g, &q).unwrap() <= 1e-6);
    }

    #[test]
    fn band_limited_synthesis() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        let t = Transform::new(1, &q, &g).unwrap();
        let c: Vec<Complex64> = q.nodes.iter().map(|&k| Complex64::new((-4.0 * (k - 3.0) * (k - 3.0)).exp(), 0.0)).collect();
        let back = t.forward(&t.adjoint(&c)).values;
        let err = back.iter().zip(&c).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err <= 1e-6, "{err}");
    }

    #[test]
    fn completeness_for_gaussians() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        for nu in 1..=3 {
            let d = completeness_defect(nu, &gaussian(&g, 0.4), &g, &q).unwrap();
            eprintln!("nu={nu} defect={d:.3e}");
            assert!(d <= 1e-6, "nu={nu} defect={d}");
        }
    }

    #[test]
    fn parseval_and_reflection() {
        let g = Grid::default();
        let q = KQuadrature::uniform(40.0, 4096, 8).unwrap();
        let f = ac_part(2, &gaussian(&g, 0.7), &g);
        let c = forward(2, &f, &q, &g).unwrap();
        let e: f64 = crate::numeric::sum(c.values.iter().zip(&q.weights).map(|(v, w)| w * v.norm_sqr())) / (2.0 * PI);
        let n2 = g.inner(&f, &f);
        assert!(((e - n2) / n2).abs() <= 1e-6);
        let raw = gaussian(&g, 0.7);
        let rev: Vec<f64> = raw.iter().rev().copied().collect();
        let a = completeness_defect(2, &raw, &g, &q).unwrap();
        let b = completeness_defect(2, &rev, &g, &q).unwrap();
        assert!((a - b).abs() <= 1e-10);
    }

    #[test]
    fn csv_columns() {
        let c = SpectralCoefficients {
            nu: 1,
            nodes: vec![-1.0, 1.0],
            values: vec![Complex64::new(1.0, 2.0), Complex64::new(3.0, -4.0)],
            boundary_magnitude: 0.0,
        };
        let mut buf = Vec::new();
        c.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s.lines().next().unwrap(), "k,re,im");
        assert_eq!(s.lines().count(), 3);
    }
}
