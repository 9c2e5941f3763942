//! Dyadic Calderón–Zygmund decomposition, Hardy–Littlewood maximal function and
//! the Fefferman–Stein ratio on a grid.
//!
//! Grid point x_i owns the cell [x_i − h/2, x_i + h/2). For an even point count
//! the cell edges are the multiples of h, so the dyadic lattice
//! [q·2^l·h, (q+1)·2^l·h) is anchored at 0 and every dyadic interval is an
//! exact union of cells. All measures and averages in this module use the cell
//! (midpoint) rule, which makes halving an interval halve its measure exactly.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::numeric::{sum, Sum};
use serde::Serialize;

/// Half-open dyadic interval [q·2^level·h, (q+1)·2^level·h) in units of the grid spacing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct DyadicInterval {
    pub level: u32,
    pub q: i64,
}

impl DyadicInterval {
    pub fn cells(&self) -> usize {
        1usize << self.level
    }

    /// First cell in cell coordinates c = i − n/2.
    fn first_cell(&self) -> i64 {
        self.q << self.level
    }

    /// First grid index covered.
    pub fn first_index(&self, grid: &Grid) -> usize {
        (self.first_cell() + (grid.len() / 2) as i64) as usize
    }

    pub fn left(&self, grid: &Grid) -> f64 {
        self.first_cell() as f64 * grid.spacing()
    }

    pub fn length(&self, grid: &Grid) -> f64 {
        self.cells() as f64 * grid.spacing()
    }

    pub fn parent(&self) -> Self {
        Self { level: self.level + 1, q: self.q.div_euclid(2) }
    }

    fn children(&self) -> [Self; 2] {
        let l = self.level - 1;
        [Self { level: l, q: 2 * self.q }, Self { level: l, q: 2 * self.q + 1 }]
    }

    /// Band index j with 2^{−j} ≈ ℓ(I)².
    pub fn band_index(&self, grid: &Grid) -> i32 {
        (-2.0 * self.length(grid).log2()).round() as i32
    }
}

/// b_k restricted to its cube; zero elsewhere.
#[derive(Clone, Debug)]
pub struct BadPart {
    pub cube: DyadicInterval,
    pub first: usize,
    pub values: Vec<f64>,
    pub average: f64,
    pub abs_average: f64,
}

#[derive(Clone, Debug)]
pub struct CzDecomposition {
    pub good: Vec<f64>,
    pub bad_parts: Vec<BadPart>,
    pub cz_threshold: f64,
    pub l1_norm: f64,
    h: f64,
}

#[derive(Serialize)]
struct CubeExport {
    left: f64,
    length: f64,
}

#[derive(Serialize)]
struct DecompositionExport {
    threshold: f64,
    cubes: Vec<CubeExport>,
    l1_norm: f64,
    cube_total_length: f64,
}

impl CzDecomposition {
    pub fn cube_total_length(&self) -> f64 {
        self.bad_parts.iter().map(|b| b.values.len() as f64 * self.h).sum()
    }

    /// Cell-rule integral of b_k.
    pub fn bad_integral(&self, k: usize) -> f64 {
        let mut s = Sum::new();
        for &v in &self.bad_parts[k].values {
            s.add(v);
        }
        s.value() * self.h
    }

    /// g + Σ b_k on the grid.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut out = self.good.clone();
        for b in &self.bad_parts {
            for (o, v) in out[b.first..b.first + b.values.len()].iter_mut().zip(&b.values) {
                *o += v;
            }
        }
        out
    }

    /// Largest |f − (g + Σb_k)| in units of the rounding of the subtraction that
    /// produced b_k, i.e. relative to ε·max(|f|, |g|). At most 1 when the split
    /// is exact up to that single rounding.
    pub fn reconstruction_ulps(&self, f: &[f64]) -> f64 {
        let r = self.reconstruct();
        let mut worst: f64 = 0.0;
        for i in 0..f.len() {
            let d = (f[i] - r[i]).abs();
            if d == 0.0 {
                continue;
            }
            let scale = f[i].abs().max(self.good[i].abs()) * f64::EPSILON;
            worst = worst.max(if scale > 0.0 { d / scale } else { f64::INFINITY });
        }
        worst
    }

    pub fn cube_mask(&self, n: usize) -> Vec<bool> {
        let mut mask = vec![false; n];
        for b in &self.bad_parts {
            mask[b.first..b.first + b.values.len()].iter_mut().for_each(|m| *m = true);
        }
        mask
    }

    pub fn to_json(&self, grid: &Grid) -> Result<String> {
        let cubes = self
            .bad_parts
            .iter()
            .map(|b| CubeExport { left: b.cube.left(grid), length: b.cube.length(grid) })
            .collect();
        let export = DecompositionExport {
            threshold: self.cz_threshold,
            cubes,
            l1_norm: self.l1_norm,
            cube_total_length: self.cube_total_length(),
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

/// Sum of |f| over a dyadic interval, always formed as left + right so that a
/// parent's sum is never below a child's.
fn block_abs_sum(abs: &[f64], iv: DyadicInterval, grid: &Grid) -> f64 {
    if iv.level == 0 {
        return abs[iv.first_index(grid)];
    }
    let [a, b] = iv.children();
    block_abs_sum(abs, a, grid) + block_abs_sum(abs, b, grid)
}

/// Maximal aligned dyadic intervals tiling [−n/2, n/2) in cell coordinates.
fn root_intervals(n: usize) -> Vec<DyadicInterval> {
    let half = (n / 2) as i64;
    let mut roots = Vec::new();
    let mut e = 0i64;
    while e > -half {
        let mut l = 0u32;
        while e.rem_euclid(1 << (l + 1)) == 0 && e - (1 << (l + 1)) >= -half {
            l += 1;
        }
        e -= 1 << l;
        roots.push(DyadicInterval { level: l, q: e >> l });
    }
    roots.reverse();
    let mut s = 0i64;
    while s < half {
        let mut l = 0u32;
        while s % (1 << (l + 1)) == 0 && s + (1 << (l + 1)) <= half {
            l += 1;
        }
        roots.push(DyadicInterval { level: l, q: s >> l });
        s += 1 << l;
    }
    roots
}

/// Stopping-time decomposition at `cz_threshold`. Cubes are the maximal dyadic
/// intervals whose average of |f| exceeds the threshold; g is f off the cubes
/// and the (signed) cube average on them.
pub fn cz_decompose(f: &[f64], cz_threshold: f64, grid: &Grid) -> Result<CzDecomposition> {
    if !(cz_threshold.is_finite() && cz_threshold > 0.0) {
        return Err(Error::Argument(format!("threshold must be positive, got {cz_threshold}")));
    }
    let n = grid.len();
    if f.len() != n {
        return Err(Error::Argument(format!("function has {} samples, grid has {n}", f.len())));
    }
    if n % 2 != 0 {
        return Err(Error::Argument("dyadic cells need an even number of grid points".into()));
    }
    let h = grid.spacing();
    let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let l1_norm = sum(abs.iter().copied()) * h;

    let mut selected = Vec::new();
    let mut stack: Vec<DyadicInterval> = Vec::new();
    for root in root_intervals(n) {
        let avg = block_abs_sum(&abs, root, grid) / root.cells() as f64;
        if avg > cz_threshold {
            return Err(Error::Argument(format!(
                "threshold {cz_threshold} is below the average {avg} over the root interval at {}",
                root.left(grid)
            )));
        }
        stack.push(root);
        while let Some(iv) = stack.pop() {
            if iv.level == 0 {
                continue;
            }
            // Right child pushed first so cubes come out ordered by left endpoint.
            for child in iv.children().into_iter().rev() {
                let avg = block_abs_sum(&abs, child, grid) / child.cells() as f64;
                if avg > cz_threshold {
                    selected.push((child, avg));
                } else {
                    stack.push(child);
                }
            }
        }
    }
    selected.sort_by_key(|(iv, _)| iv.first_cell());

    let mut good = f.to_vec();
    let bad_parts = selected
        .into_iter()
        .map(|(cube, abs_average)| {
            let first = cube.first_index(grid);
            let slice = &f[first..first + cube.cells()];
            let average = sum(slice.iter().copied()) / cube.cells() as f64;
            let values: Vec<f64> = slice.iter().map(|v| v - average).collect();
            good[first..first + cube.cells()].iter_mut().for_each(|g| *g = average);
            BadPart { cube, first, values, average, abs_average }
        })
        .collect();
    Ok(CzDecomposition { good, bad_parts, cz_threshold, l1_norm, h })
}

#[derive(Clone, Debug)]
pub struct MaximalResult {
    pub values: Vec<f64>,
}

/// Centered maximal function over the radii 0, h, 2h, 4h, … ≥ 2L. An interval of
/// radius m·h holds 2m + 1 cells; cells beyond the grid count as zero.
pub fn maximal_function(f: &[f64], grid: &Grid) -> MaximalResult {
    let n = f.len();
    let mut prefix = Vec::with_capacity(n + 1);
    let mut s = Sum::new();
    prefix.push(0.0);
    for v in f {
        s.add(v.abs());
        prefix.push(s.value());
    }
    let mut values: Vec<f64> = f.iter().map(|v| v.abs()).collect();
    let mut m = 1usize;
    loop {
        let width = (2 * m + 1) as f64;
        for (i, out) in values.iter_mut().enumerate() {
            let lo = i.saturating_sub(m);
            let hi = (i + m + 1).min(n);
            let avg = (prefix[hi] - prefix[lo]) / width;
            if avg > *out {
                *out = avg;
            }
        }
        if m as f64 * grid.spacing() >= 2.0 * grid.half_width() {
            break;
        }
        m *= 2;
    }
    MaximalResult { values }
}

/// (ρ_t ∗ |F|)(x_i) for the piecewise-constant extension F of f over cells, with
/// ρ(x) = (ε/2)(1 + |x|)^{−1−ε} of unit mass. Each cell contributes the exact
/// integral of ρ_t over it.
pub fn rho_t_convolution(f: &[f64], t: f64, epsilon: f64, grid: &Grid) -> Vec<f64> {
    let h = grid.spacing();
    let n = f.len();
    // Mass of ρ_t on [0, u].
    let cum = |u: f64| 0.5 * (1.0 - (1.0 + u / t).powf(-epsilon));
    let cell_mass: Vec<f64> = (0..n)
        .map(|d| {
            if d == 0 {
                2.0 * cum(0.5 * h)
            } else {
                cum((d as f64 + 0.5) * h) - cum((d as f64 - 0.5) * h)
            }
        })
        .collect();
    (0..n)
        .map(|i| {
            let mut s = Sum::new();
            for (l, v) in f.iter().enumerate() {
                if *v != 0.0 {
                    s.add(v.abs() * cell_mass[i.abs_diff(l)]);
                }
            }
            s.value()
        })
        .collect()
}

/// max over t of max_i (ρ_t ∗ |f| − Mf)(x_i); nonpositive when Mf dominates.
pub fn maximal_domination_excess(f: &[f64], ts: &[f64], epsilon: f64, grid: &Grid) -> f64 {
    let m = maximal_function(f, grid);
    ts.iter()
        .map(|&t| {
            let c = rho_t_convolution(f, t, epsilon, grid);
            c.iter().zip(&m.values).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// ‖(Σ_j (Mf_j)²)^{1/2}‖_p / ‖(Σ_j |f_j|²)^{1/2}‖_p.
pub fn fefferman_stein_check(family: &[Vec<f64>], p: f64, grid: &Grid) -> Result<f64> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(Error::Argument(format!("p must lie in (1, ∞), got {p}")));
    }
    if family.is_empty() {
        return Err(Error::Argument("function family is empty".into()));
    }
    let n = grid.len();
    let mut num = vec![0.0; n];
    let mut den = vec![0.0; n];
    for f in family {
        let mf = maximal_function(f, grid);
        for i in 0..n {
            num[i] += mf.values[i] * mf.values[i];
            den[i] += f[i] * f[i];
        }
    }
    let num: Vec<f64> = num.into_iter().map(f64::sqrt).collect();
    let den: Vec<f64> = den.into_iter().map(f64::sqrt).collect();
    let d = grid.norm_p(&den, p);
    if d == 0.0 {
        return Err(Error::Degenerate("square function of the family vanishes".into()));
    }
    Ok(grid.norm_p(&num, p) / d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn check_invariants(f: &[f64], thr: f64, grid: &Grid) -> CzDecomposition {
        let cz = cz_decompose(f, thr, grid).unwrap();
        assert!(cz.reconstruction_ulps(f) <= 1.0);
        let mask = cz.cube_mask(f.len());
        for (i, &g) in cz.good.iter().enumerate() {
            assert!(g.abs() <= 2.0 * thr);
            if !mask[i] {
                assert!(f[i].abs() <= thr);
            }
        }
        for (k, b) in cz.bad_parts.iter().enumerate() {
            assert!(cz.bad_integral(k).abs() <= 1e-12, "{}", cz.bad_integral(k));
            assert!(b.abs_average > thr && b.abs_average <= 2.0 * thr);
            let parent = b.cube.parent();
            let first = parent.first_index(grid) as i64;
            if first >= 0 && first as usize + parent.cells() <= f.len() {
                let abs: Vec<f64> = f.iter().map(|v| v.abs()).collect();
                assert!(block_abs_sum(&abs, parent, grid) / parent.cells() as f64 <= thr);
            }
        }
        for w in cz.bad_parts.windows(2) {
            assert!(w[0].first + w[0].values.len() <= w[1].first);
        }
        assert!(cz.cube_total_length() <= cz.l1_norm / thr * (1.0 + 1e-12));
        cz
    }

    #[test]
    fn roots_tile_the_grid() {
        for n in [4usize, 6, 10, 64, 100] {
            let roots = root_intervals(n);
            let cells: usize = roots.iter().map(|r| r.cells()).sum();
            assert_eq!(cells, n);
            let g = Grid::new(1.0, n).unwrap();
            assert_eq!(roots[0].first_index(&g), 0);
            for w in roots.windows(2) {
                assert_eq!(w[0].first_index(&g) + w[0].cells(), w[1].first_index(&g));
            }
        }
        assert_eq!(root_intervals(64).len(), 2);
    }

    #[test]
    fn cell_edges_sit_on_multiples_of_h() {
        let g = Grid::new(20.0, 4096).unwrap();
        let iv = DyadicInterval { level: 3, q: -2 };
        let x0 = g.point(iv.first_index(&g));
        assert!((x0 - 0.5 * g.spacing() - iv.left(&g)).abs() < 1e-12);
        assert!((iv.left(&g) + 16.0 * g.spacing()).abs() < 1e-12);
    }

    #[test]
    fn high_threshold_selects_nothing() {
        let g = Grid::new(4.0, 256).unwrap();
        let f = g.sample(|x| (-x * x).exp() * x.cos());
        let cz = cz_decompose(&f, 1.0, &g).unwrap();
        assert!(cz.bad_parts.is_empty());
        assert_eq!(cz.good, f);
    }

    #[test]
    fn indicator_at_half() {
        let g = Grid::new(4.0, 512).unwrap();
        let f = g.sample(|x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        let cz = check_invariants(&f, 0.5, &g);
        assert!(!cz.bad_parts.is_empty());
        assert!(cz.cube_total_length() <= 2.0 + 1e-12);
        let mask = cz.cube_mask(f.len());
        for (i, &v) in f.iter().enumerate() {
            if v != 0.0 {
                assert!(mask[i]);
            }
        }
    }

    #[test]
    fn random_inputs_satisfy_invariants() {
        let g = Grid::new(8.0, 1024).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f: Vec<f64> = (0..g.len())
                .map(|i| {
                    let x = g.point(i);
                    rng.gen_range(-3.0..3.0) * (-(x * x) / 4.0).exp()
                })
                .collect();
            let thr = rng.gen_range(0.4..2.0);
            check_invariants(&f, thr, &g);
        }
    }

    #[test]
    fn threshold_below_root_average_is_rejected() {
        let g = Grid::new(1.0, 64).unwrap();
        let f = vec![5.0; 64];
        assert!(matches!(cz_decompose(&f, 1.0, &g), Err(Error::Argument(_))));
        assert!(matches!(cz_decompose(&f, 0.0, &g), Err(Error::Argument(_))));
        assert!(matches!(cz_decompose(&f, -1.0, &g), Err(Error::Argument(_))));
    }

    #[test]
    fn json_export_has_schema_fields() {
        let g = Grid::new(4.0, 512).unwrap();
        let f = g.sample(|x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 });
        let cz = cz_decompose(&f, 0.5, &g).unwrap();
        let v: serde_json::Value = serde_json::from_str(&cz.to_json(&g).unwrap()).unwrap();
        for key in ["threshold", "cubes", "l1_norm", "cube_total_length"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["cubes"][0].get("left").is_some() && v["cubes"][0].get("length").is_some());
    }

    #[test]
    fn maximal_dominates_and_decays_like_one_over_x() {
        let g = Grid::new(20.0, 4096).unwrap();
        let h = g.spacing();
        let mut f = vec![0.0; g.len()];
        let i0 = g.nearest(0.0);
        f[i0] = 1.0 / h;
        let mf = maximal_function(&f, &g);
        assert!(mf.values.iter().zip(&f).all(|(m, v)| *m >= v.abs()));
        for x in [0.5, 1.0, 3.0, 7.0, 15.0] {
            let i = g.nearest(g.point(i0) + x);
            let d = (g.point(i) - g.point(i0)).abs();
            let ratio = mf.values[i] / (1.0 / (2.0 * d));
            assert!((0.5..=2.0).contains(&ratio), "x={x} ratio={ratio}");
        }
    }

    #[test]
    fn maximal_is_sublinear() {
        let g = Grid::new(5.0, 512).unwrap();
        let a = g.sample(|x| (-(x - 1.0).powi(2)).exp());
        let b = g.sample(|x| (2.0 * x).sin() / (1.0 + x * x));
        let s: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
        let (ma, mb, ms) = (maximal_function(&a, &g), maximal_function(&b, &g), maximal_function(&s, &g));
        for i in 0..g.len() {
            assert!(ms.values[i] <= ma.values[i] + mb.values[i] + 1e-14);
        }
    }

    #[test]
    fn rho_convolution_is_dominated() {
        let g = Grid::new(20.0, 1024).unwrap();
        let ts: Vec<f64> = (0..=10).map(|l| 2f64.powi(-l)).collect();
        let spike = {
            let mut f = vec![0.0; g.len()];
            f[g.nearest(0.0)] = 1.0 / g.spacing();
            f
        };
        let gauss = g.sample(|x| (-(x * x) * 4.0).exp() + 0.3 * (-(x - 5.0).powi(2)).exp());
        for f in [spike, gauss] {
            assert!(maximal_domination_excess(&f, &ts, 0.5, &g) <= 1e-8);
        }
    }

    #[test]
    fn rho_cell_masses_sum_to_interior_mass() {
        let g = Grid::new(20.0, 1024).unwrap();
        let f = vec![1.0; g.len()];
        let c = rho_t_convolution(&f, 0.01, 0.5, &g);
        let mid = g.len() / 2;
        assert!(c[mid] < 1.0 && c[mid] > 0.9);
    }

    #[test]
    fn fefferman_stein_bounds() {
        let g = Grid::new(10.0, 1024).unwrap();
        let one = vec![g.sample(|x| (-(x * x)).exp())];
        let r = fefferman_stein_check(&one, 2.0, &g).unwrap();
        assert!(r >= 1.0 && r <= 4.0, "{r}");
        let zero = vec![vec![0.0; g.len()]];
        assert!(matches!(fefferman_stein_check(&zero, 2.0, &g), Err(Error::Degenerate(_))));
        assert!(matches!(fefferman_stein_check(&[], 2.0, &g), Err(Error::Argument(_))));
        assert!(matches!(fefferman_stein_check(&one, 1.0, &g), Err(Error::Argument(_))));
    }

    #[test]
    fn fefferman_stein_shift_stability() {
        let g = Grid::new(20.0, 2048).unwrap();
        for p in [2.0, 3.0] {
            let ratios: Vec<f64> = [-4.0, 0.0, 3.0]
                .iter()
                .map(|&s| {
                    let fam: Vec<Vec<f64>> =
                        (0..8).map(|k| g.sample(|x| (-(x - s - k as f64).powi(2)).exp())).collect();
                    fefferman_stein_check(&fam, p, &g).unwrap()
                })
                .collect();
            let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
            assert!(hi.is_finite() && hi / lo <= 2.0, "{ratios:?}");
        }
    }
}
