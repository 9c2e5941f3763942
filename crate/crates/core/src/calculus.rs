//! Functional calculus m(H) restricted to spectral windows: kernels, application and C(m).
//!
//! A window w is one of the partition profiles evaluated at λ = k². The kernel of (m·w)(H)E_ac is
//! K(x,y) = (1/2π) ∫ m(k²) w(k²) e(x,k) conj(e(y,k)) dk
//!        = Σ_{a,b} tanh^a x · tanh^b y · G_ab(x − y),
//! where G_ab(r) = (1/2π) ∫ m w W(k) A_a(k) A_b(−k) e^{ikr} dk. The profiles G_ab are tabulated on the
//! lattice r = d·h, which gives every grid pair.

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lpaley::{DyadicPartition, Profile};
use crate::numeric::CSum;
use crate::parallel::map_indexed;
use crate::polyrec::WaveFamily;
use crate::quadrature::composite;
use crate::spectrum::bound_states;
use crate::transform::{KQuadrature, Transform, PANEL_ORDER};
use num_complex::Complex64;
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

pub type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

/// Largest grid for which a dense kernel matrix is assembled.
pub const MAX_DENSE_POINTS: usize = 4096;

#[derive(Clone)]
pub struct MultiplierSpec {
    pub id: String,
    pub m: ComplexFn,
    /// Cutoff χ for the scale-invariant part of C(m); must vanish near 0.
    pub chi: Profile,
    /// Smoothness order of the C^α norm (0, 1 or 2).
    pub alpha: u32,
    pub real_valued: bool,
}

impl std::fmt::Debug for MultiplierSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplierSpec").field("id", &self.id).field("alpha", &self.alpha).finish()
    }
}

fn default_chi() -> Profile {
    Arc::new(|x: f64| crate::lpaley::default_seed(x) - crate::lpaley::default_seed(2.0 * x))
}

impl MultiplierSpec {
    pub fn new(id: &str, m: impl Fn(f64) -> Complex64 + Send + Sync + 'static, real_valued: bool) -> Self {
        Self { id: id.to_string(), m: Arc::new(m), chi: default_chi(), alpha: 1, real_valued }
    }

    pub fn real(id: &str, m: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(id, move |l| Complex64::new(m(l), 0.0), true)
    }

    pub fn one() -> Self {
        Self::real("one", |_| 1.0)
    }

    /// λ/(1+λ): a Mihlin symbol on [0, ∞), singular at the bound state λ = −1.
    pub fn mihlin() -> Self {
        Self::real("mihlin", |l| l / (1.0 + l))
    }

    /// m(λ) = λ, i.e. m(H) = H.
    pub fn energy() -> Self {
        Self::real("energy", |l| l)
    }

    pub fn heat(t: f64) -> Self {
        Self::real(&format!("heat:{t}"), move |l| (-t * l).exp())
    }

    /// |λ|^{iβ}; undefined at λ = 0 unless β = 0.
    pub fn imaginary_power(beta: f64) -> Self {
        Self::new(
            &format!("ipow:{beta}"),
            move |l| {
                if beta == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else if l == 0.0 {
                    Complex64::new(f64::NAN, f64::NAN)
                } else {
                    Complex64::cis(beta * l.abs().ln())
                }
            },
            beta == 0.0,
        )
    }

    /// m · (Θ(2^{−j_max}λ) − Θ(2^{1−j_min}λ)), the window Σ_{j_min}^{j_max} φ_j.
    pub fn truncated(&self, partition: &DyadicPartition, j_min: i32, j_max: i32) -> Self {
        let m = self.m.clone();
        let p = partition.clone();
        let mut out = self.clone();
        out.id = format!("{}[{j_min},{j_max}]", self.id);
        out.m = Arc::new(move |l| {
            let w = p.theta(l * 2f64.powi(-j_max)) - p.theta(l * 2f64.powi(1 - j_min));
            if w == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                m(l) * w
            }
        });
        out
    }

    /// Parses "one", "mihlin", "energy", "heat:<t>" and "ipow:<beta>".
    pub fn from_id(id: &str) -> Result<Self> {
        let num = |s: &str| s.parse::<f64>().map_err(|_| Error::Argument(format!("bad multiplier parameter in {id:?}")));
        match id.split_once(':') {
            None => match id {
                "one" => Ok(Self::one()),
                "mihlin" => Ok(Self::mihlin()),
                "energy" => Ok(Self::energy()),
                _ => Err(Error::Argument(format!("unknown multiplier {id:?}"))),
            },
            Some(("heat", t)) => Ok(Self::heat(num(t)?)),
            Some(("ipow", b)) => Ok(Self::imaginary_power(num(b)?)),
            _ => Err(Error::Argument(format!("unknown multiplier {id:?}"))),
        }
    }

    pub fn eval(&self, lambda: f64) -> Complex64 {
        (self.m)(lambda)
    }
}

/// Spectral window, as a function of λ = k².
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Band {
    /// φ_j.
    Dyadic(i32),
    /// Φ_j, the low-energy cutoff Θ(2^{−j}λ).
    LowPass(i32),
    /// Σ_{j=a}^{b} φ_j.
    Range(i32, i32),
    /// Indicator of [2^{j−1}, 2^{j+1}].
    Sharp(i32),
}

impl Band {
    pub fn index(&self) -> i32 {
        match *self {
            Band::Dyadic(j) | Band::LowPass(j) | Band::Sharp(j) => j,
            Band::Range(_, b) => b,
        }
    }

    pub fn weight(&self, p: &DyadicPartition, lambda: f64) -> f64 {
        match *self {
            Band::Dyadic(j) => p.phi_j(j, lambda),
            Band::LowPass(j) => p.big_phi_j(j, lambda),
            Band::Range(a, b) => p.theta(lambda * 2f64.powi(-b)) - p.theta(lambda * 2f64.powi(1 - a)),
            Band::Sharp(j) => {
                if lambda >= 2f64.powi(j - 1) && lambda <= 2f64.powi(j + 1) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Support in |k|.
    pub fn k_support(&self) -> (f64, f64) {
        let r = |j: i32| 2f64.powf(j as f64 / 2.0);
        match *self {
            Band::Dyadic(j) | Band::Sharp(j) => (r(j - 1), r(j + 1)),
            Band::LowPass(j) => (0.0, r(j + 1)),
            Band::Range(a, b) => (r(a - 1), r(b + 1)),
        }
    }

    /// max(64, ⌈16·2^{j/2}·L/π⌉) nodes over the window, enough to follow e^{ik(x−y)} for |x−y| ≤ 2L.
    pub fn required_nodes(&self, grid: &Grid) -> usize {
        let j = self.index() as f64;
        ((16.0 * 2f64.powf(j / 2.0) * grid.half_width() / PI).ceil() as usize).max(64)
    }

    fn breaks(&self) -> Vec<f64> {
        let (lo, hi) = self.k_support();
        let mut b = vec![lo, hi];
        // interior breakpoints where the partition profiles switch pieces
        let mut j = -80;
        while j <= 80 {
            let v = 2f64.powf(j as f64 / 2.0);
            if v > lo && v < hi {
                b.push(v);
            }
            j += 1;
        }
        b
    }
}

/// Panels per window side; the e^{−1/t} transitions need several panels each.
const MIN_PANELS: usize = 32;

/// Composite GL-8 on ±window with panels no wider than π/(2L), at least `MIN_PANELS` per side
/// and at least the required node count.
pub fn window_quadrature(band: Band, grid: &Grid) -> Result<KQuadrature> {
    window_quadrature_with(band, grid, None)
}

/// As `window_quadrature`, asking for at least `nodes` nodes; fewer than the rule requires is an error.
pub fn window_quadrature_with(band: Band, grid: &Grid, nodes: Option<usize>) -> Result<KQuadrature> {
    let (lo, hi) = band.k_support();
    let need = band.required_nodes(grid);
    if let Some(n) = nodes {
        if n < need {
            return Err(Error::Resolution(format!("window {band:?} needs at least {need} k-nodes at L = {}, got {n}", grid.half_width())));
        }
    }
    let panels = nodes.unwrap_or(need).div_ceil(2 * PANEL_ORDER);
    let max_panel = (PI / (2.0 * grid.half_width())).min((hi - lo) / panels.max(MIN_PANELS) as f64);
    KQuadrature::covering(lo, hi, &band.breaks(), max_panel, PANEL_ORDER)
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelMatrix {
    pub nu: u32,
    pub j: i32,
    pub band: Band,
    pub multiplier_id: String,
    pub n: usize,
    /// Row-major: entries[i·n + l] = K(x_i, y_l).
    pub entries: Vec<Complex64>,
}

impl KernelMatrix {
    pub fn get(&self, i: usize, l: usize) -> Complex64 {
        self.entries[i * self.n + l]
    }

    pub fn column(&self, l: usize) -> Vec<Complex64> {
        (0..self.n).map(|i| self.get(i, l)).collect()
    }

    /// max |K(x,y) − conj(K(y,x))|.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..self.n {
            for l in i..self.n {
                d = d.max((self.get(i, l) - self.get(l, i).conj()).norm());
            }
        }
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_distance(&self, other: &KernelMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    /// (Kf)(x_i) = Σ_l K(x_i, y_l) f(y_l) w_l.
    pub fn apply(&self, f: &[f64], grid: &Grid) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| {
                let mut s = CSum::new();
                for l in 0..self.n {
                    s.add(self.get(i, l) * (f[l] * grid.weight(l)));
                }
                s.value()
            })
            .collect()
    }

    pub fn write_csv(&self, grid: &Grid, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y", "re", "im"])?;
        for i in 0..self.n {
            for l in 0..self.n {
                let v = self.get(i, l);
                w.write_record([
                    format!("{:e}", grid.point(i)),
                    format!("{:e}", grid.point(l)),
                    format!("{:e}", v.re),
                    format!("{:e}", v.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Kernel of (m·w)(H)E_ac for one window, on one grid.
pub struct KernelEngine<'a> {
    nu: u32,
    grid: &'a Grid,
    band: Band,
    multiplier_id: String,
    real_valued: bool,
    quad: KQuadrature,
    /// m(k²)·w(k²) per node.
    mw: Vec<Complex64>,
}

impl<'a> KernelEngine<'a> {
    /// Uses `quad` if given (it must put enough nodes in the window), else the window rule.
    pub fn new(
        nu: u32,
        spec: &MultiplierSpec,
        partition: &DyadicPartition,
        band: Band,
        grid: &'a Grid,
        quad: Option<&KQuadrature>,
    ) -> Result<Self> {
        let (lo, hi) = band.k_support();
        let quad = match quad {
            None => window_quadrature(band, grid)?,
            Some(q) => {
                let inside: Vec<usize> = (0..q.len()).filter(|&i| q.nodes[i].abs() >= lo && q.nodes[i].abs() <= hi).collect();
                let need = band.required_nodes(grid);
                if inside.len() < need || q.k_max < hi {
                    return Err(Error::Resolution(format!(
                        "window {band:?} (|k| in [{lo:.4}, {hi:.4}]) needs at least {need} nodes up to |k| = {hi:.4}, quadrature has {} nodes reaching {:.4}",
                        inside.len(),
                        q.k_max
                    )));
                }
                KQuadrature {
                    nodes: inside.iter().map(|&i| q.nodes[i]).collect(),
                    weights: inside.iter().map(|&i| q.weights[i]).collect(),
                    k_max: q.k_max,
                }
            }
        };
        let mut mw = Vec::with_capacity(quad.len());
        for &k in &quad.nodes {
            let w = band.weight(partition, k * k);
            let v = if w == 0.0 { Complex64::new(0.0, 0.0) } else { spec.eval(k * k) * w };
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Domain(format!("multiplier {} is not finite at λ = {}", spec.id, k * k)));
            }
            mw.push(v);
        }
        Ok(Self { nu, grid, band, multiplier_id: spec.id.clone(), real_valued: spec.real_valued, quad, mw })
    }

    /// Window rule with an optional node count (the `--nk` setting).
    pub fn with_nodes(
        nu: u32,
        spec: &MultiplierSpec,
        partition: &DyadicPartition,
        band: Band,
        grid: &'a Grid,
        nodes: Option<usize>,
    ) -> Result<Self> {
        let q = window_quadrature_with(band, grid, nodes)?;
        Self::new(nu, spec, partition, band, grid, Some(&q))
    }

    pub fn quadrature(&self) -> &KQuadrature {
        &self.quad
    }

    pub fn grid(&self) -> &Grid {
        self.grid
    }

    /// x ↦ K(x_i, y) on the grid, for any y.
    pub fn column(&self, y: f64) -> Result<Vec<Complex64>> {
        let fam = WaveFamily::new(self.nu)?;
        let mut c = Vec::with_capacity(self.mw.len());
        for (&k, &v) in self.quad.nodes.iter().zip(&self.mw) {
            c.push(v * fam.wave(y, k)?.conj());
        }
        Ok(Transform::new(self.nu, &self.quad, self.grid)?.adjoint(&c))
    }

    /// Direct k-sum for a single entry.
    pub fn entry(&self, x: f64, y: f64) -> Result<Complex64> {
        let fam = WaveFamily::new(self.nu)?;
        let mut s = CSum::new();
        for ((&k, &w), &v) in self.quad.nodes.iter().zip(&self.quad.weights).zip(&self.mw) {
            if v != Complex64::new(0.0, 0.0) {
                s.add(fam.product(x, y, k) * v * w);
            }
        }
        Ok(s.value() / (2.0 * PI))
    }

    /// G_ab on r = d·h for |d| < n.
    pub fn profiles(&self) -> Result<KernelProfiles> {
        let fam = WaveFamily::new(self.nu)?;
        let na = self.nu as usize + 1;
        let n = self.grid.len();
        let h = self.grid.spacing();
        let active: Vec<usize> = (0..self.quad.len()).filter(|&q| self.mw[q] != Complex64::new(0.0, 0.0)).collect();
        let coef: Vec<Vec<Complex64>> = active
            .iter()
            .map(|&q| {
                let k = self.quad.nodes[q];
                let scale = self.mw[q] * (self.quad.weights[q] * fam.product_weight(k) / (2.0 * PI));
                let a = fam.s_coeffs(k);
                let b = fam.s_coeffs(-k);
                let mut out = Vec::with_capacity(na * na);
                for ai in &a {
                    for bi in &b {
                        out.push(ai * bi * scale);
                    }
                }
                out
            })
            .collect();
        let len = 2 * n - 1;
        const BLOCK: usize = 32;
        let blocks = len.div_ceil(BLOCK);
        let parts = map_indexed(blocks, |bk| {
            let lo = bk * BLOCK;
            let hi = (lo + BLOCK).min(len);
            let mut acc = vec![CSum::new(); (hi - lo) * na * na];
            for (t, &q) in active.iter().enumerate() {
                let k = self.quad.nodes[q];
                let step = Complex64::cis(k * h);
                let mut rot = Complex64::cis(k * (lo as f64 - (n - 1) as f64) * h);
                for d in lo..hi {
                    let base = (d - lo) * na * na;
                    for (ab, c) in coef[t].iter().enumerate() {
                        acc[base + ab].add(c * rot);
                    }
                    rot *= step;
                }
            }
            acc.into_iter().map(|v| v.value()).collect::<Vec<_>>()
        });
        let flat: Vec<Complex64> = parts.into_iter().flatten().collect();
        // flat is [d][ab]; store as [ab][d]
        let mut g = vec![vec![Complex64::new(0.0, 0.0); len]; na * na];
        for d in 0..len {
            for ab in 0..na * na {
                g[ab][d] = flat[d * na * na + ab];
            }
        }
        Ok(KernelProfiles { nu: self.nu, n, tanh: self.grid.points().iter().map(|x| x.tanh()).collect(), g })
    }

    pub fn matrix(&self) -> Result<KernelMatrix> {
        let n = self.grid.len();
        if n > MAX_DENSE_POINTS {
            return Err(Error::Argument(format!("dense kernel capped at {MAX_DENSE_POINTS} points per side, grid has {n}")));
        }
        let p = self.profiles()?;
        let rows = map_indexed(n, |i| (0..n).map(|l| p.entry(i, l)).collect::<Vec<_>>());
        Ok(KernelMatrix {
            nu: self.nu,
            j: self.band.index(),
            band: self.band,
            multiplier_id: self.multiplier_id.clone(),
            n,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn real_valued(&self) -> bool {
        self.real_valued
    }
}

/// Lattice profiles G_ab(d·h) for a kernel on an n-point grid.
pub struct KernelProfiles {
    nu: u32,
    n: usize,
    tanh: Vec<f64>,
    /// g[a·(ν+1) + b][d + n − 1].
    g: Vec<Vec<Complex64>>,
}

impl KernelProfiles {
    /// K(x_i, y_l).
    pub fn entry(&self, i: usize, l: usize) -> Complex64 {
        let na = self.nu as usize + 1;
        let d = i + self.n - 1 - l;
        let (sx, sy) = (self.tanh[i], self.tanh[l]);
        let mut out = Complex64::new(0.0, 0.0);
        for a in (0..na).rev() {
            let mut inner = Complex64::new(0.0, 0.0);
            for b in (0..na).rev() {
                inner = inner * sy + self.g[a * na + b][d];
            }
            out = out * sx + inner;
        }
        out
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// G_ab(d·h).
    pub fn profile(&self, a: usize, b: usize, d: isize) -> Complex64 {
        let na = self.nu as usize + 1;
        self.g[a * na + b][(d + self.n as isize - 1) as usize]
    }
}

pub fn multiplier_kernel(
    nu: u32,
    spec: &MultiplierSpec,
    partition: &DyadicPartition,
    band: Band,
    grid: &Grid,
    quad: Option<&KQuadrature>,
) -> Result<KernelMatrix> {
    KernelEngine::new(nu, spec, partition, band, grid, quad)?.matrix()
}

/// (1/π) ∫_0^∞ m(k²) w(k²) cos(kr) dk at each r, by composite GL-12 with panels ≤ π/(2 max|r|).
pub fn free_profile(spec: &MultiplierSpec, partition: &DyadicPartition, band: Band, r: &[f64]) -> Vec<Complex64> {
    let (lo, hi) = band.k_support();
    let rmax = r.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let panel = (PI / (2.0 * rmax)).min((hi - lo) / 16.0);
    let mut b = band.breaks();
    b.sort_by(f64::total_cmp);
    let mut pos = vec![b[0]];
    for w in b.windows(2) {
        let m = ((w[1] - w[0]) / panel).ceil().max(1.0) as usize;
        for i in 1..=m {
            pos.push(if i == m { w[1] } else { w[0] + (w[1] - w[0]) * i as f64 / m as f64 });
        }
    }
    let (kn, kw) = composite(&pos, 12);
    let vals: Vec<Complex64> = kn
        .iter()
        .zip(&kw)
        .map(|(&k, &w)| {
            let wt = band.weight(partition, k * k);
            if wt == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                spec.eval(k * k) * (wt * w / PI)
            }
        })
        .collect();
    map_indexed(r.len(), |i| {
        let mut s = CSum::new();
        for (&k, v) in kn.iter().zip(&vals) {
            s.add(v * (k * r[i]).cos());
        }
        s.value()
    })
}

/// The ν = 0 kernel built from its translation-invariant profile.
pub fn free_kernel_oracle(spec: &MultiplierSpec, partition: &DyadicPartition, band: Band, grid: &Grid) -> Result<KernelMatrix> {
    let n = grid.len();
    if n > MAX_DENSE_POINTS {
        return Err(Error::Argument(format!("dense kernel capped at {MAX_DENSE_POINTS} points per side, grid has {n}")));
    }
    let h = grid.spacing();
    let r: Vec<f64> = (0..n).map(|d| d as f64 * h).collect();
    let g = free_profile(spec, partition, band, &r);
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        for l in 0..n {
            entries.push(g[i.abs_diff(l)]);
        }
    }
    Ok(KernelMatrix { nu: 0, j: band.index(), band, multiplier_id: spec.id.clone(), n, entries })
}

/// m(H)f: Σ_m m(−m²)⟨f,ψ_m⟩ψ_m (when requested) plus F*[m(k²)·w(k²)·Ff].
pub fn apply_multiplier(
    nu: u32,
    spec: &MultiplierSpec,
    f: &[f64],
    include_bound_states: bool,
    window: Option<(&DyadicPartition, Band)>,
    grid: &Grid,
    quad: &KQuadrature,
) -> Result<Vec<Complex64>> {
    if f.len() != grid.len() {
        return Err(Error::Argument(format!("function has {} samples, grid has {}", f.len(), grid.len())));
    }
    let t = Transform::new(nu, quad, grid)?;
    let c = t.forward_real(f);
    let mut coef = Vec::with_capacity(quad.len());
    for (&k, &v) in quad.nodes.iter().zip(&c.values) {
        let w = window.map_or(1.0, |(p, b)| b.weight(p, k * k));
        let m = if w == 0.0 { Complex64::new(0.0, 0.0) } else { spec.eval(k * k) * w };
        if !m.re.is_finite() || !m.im.is_finite() {
            return Err(Error::Domain(format!("multiplier {} is not finite at λ = {}", spec.id, k * k)));
        }
        coef.push(v * m);
    }
    let mut out = t.adjoint(&coef);
    if include_bound_states {
        for s in bound_states(nu, grid) {
            let w = window.map_or(1.0, |(p, b)| b.weight(p, s.energy));
            let m = spec.eval(s.energy) * w;
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::Domain(format!("multiplier {} is not finite at the eigenvalue {}", spec.id, s.energy)));
            }
            let a = grid.inner(f, &s.samples);
            for (o, v) in out.iter_mut().zip(&s.samples) {
                *o += m * (a * v);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplierNorm {
    /// ‖m‖_∞ + max_λ ‖χ(·)m(λ·)‖_{C^α}.
    pub value: f64,
    pub sup_m: f64,
    /// (λ, ‖χ(·)m(λ·)‖_{C^α}) for each sampled λ.
    pub per_lambda: Vec<(f64, f64)>,
}

/// C(m) by dense sampling: λ = 2^e for e in `exponents`, ξ on [1/4, 4] with `samples` points.
/// ‖m‖_∞ is the sup over the sampled λξ > 0; derivatives in ξ are central differences.
pub fn multiplier_norm(spec: &MultiplierSpec, exponents: std::ops::RangeInclusive<i32>, samples: usize) -> Result<MultiplierNorm> {
    if samples < 16 || spec.alpha > 2 {
        return Err(Error::Argument(format!("need ≥ 16 samples and alpha ≤ 2, got {samples} and {}", spec.alpha)));
    }
    let (a, b) = (0.25, 4.0);
    let dx = (b - a) / (samples - 1) as f64;
    let xi: Vec<f64> = (0..samples).map(|i| a + dx * i as f64).collect();
    let chi: Vec<f64> = xi.iter().map(|&x| (spec.chi)(x)).collect();
    let mut sup_m = 0.0f64;
    let mut per_lambda = Vec::new();
    for e in exponents {
        let lam = 2f64.powi(e);
        let mut vals = Vec::with_capacity(samples);
        for (&x, &c) in xi.iter().zip(&chi) {
            let m = spec.eval(lam * x);
            if !m.re.is_finite() || !m.im.is_finite() {
                return Err(Error::Domain(format!("multiplier {} is not finite at λ = {}", spec.id, lam * x)));
            }
            sup_m = sup_m.max(m.norm());
            vals.push(m * c);
        }
        let mut norm = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut d = vals;
        for _ in 0..spec.alpha {
            let next: Vec<Complex64> = (0..samples)
                .map(|i| {
                    if i == 0 {
                        (d[1] - d[0]) / dx
                    } else if i == samples - 1 {
                        (d[i] - d[i - 1]) / dx
                    } else {
                        (d[i + 1] - d[i - 1]) / (2.0 * dx)
                    }
                })
                .collect();
            norm += next.iter().map(|v| v.norm()).fold(0.0, f64::max);
            d = next;
        }
        per_lambda.push((lam, norm));
    }
    let top = per_lambda.iter().map(|p| p.1).fold(0.0, f64::max);
    Ok(MultiplierNorm { value: sup_m + top, sup_m, per_lambda })
}

/// C(m) with the default sampling: λ over 2^{−20} … 2^{20}, 2^{12} points per λ.
pub fn multiplier_norm_default(spec: &MultiplierSpec) -> Result<MultiplierNorm> {
    multiplier_norm(spec, -20..=20, 4096)
}
