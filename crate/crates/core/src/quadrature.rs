//! One-dimensional quadrature rules: Gauss–Legendre panels and adaptive Gauss–Kronrod.

use crate::numeric::Sum;

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                let (_, d) = legendre_with_derivative(n, z);
                dp = d;
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Composite Gauss–Legendre rule over consecutive breakpoints.
pub fn composite(breaks: &[f64], order: usize) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity((breaks.len().saturating_sub(1)) * order);
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in breaks.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let c = 0.5 * (a + b);
        let r = 0.5 * (b - a);
        for (t, w) in gx.iter().zip(&gw) {
            nodes.push(c + r * t);
            weights.push(r * w);
        }
    }
    (nodes, weights)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = r * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss–Kronrod (7/15) with global bisection of the worst interval.
/// Returns (value, error estimate).
pub fn adaptive(f: impl Fn(f64) -> f64, breaks: &[f64], abs_tol: f64, rel_tol: f64, max_intervals: usize) -> (f64, f64) {
    let mut work: Vec<(f64, f64, f64, f64)> = Vec::new();
    for p in breaks.windows(2) {
        if p[1] > p[0] {
            let (v, e) = gk15(&f, p[0], p[1]);
            work.push((p[0], p[1], v, e));
        }
    }
    loop {
        let total = work.iter().map(|w| w.2).sum::<f64>();
        let err = work.iter().map(|w| w.3).sum::<f64>();
        if err <= abs_tol.max(rel_tol * total.abs()) || work.len() >= max_intervals {
            let mut s = Sum::new();
            let mut e = Sum::new();
            work.sort_by(|x, y| x.0.total_cmp(&y.0));
            for w in &work {
                s.add(w.2);
                e.add(w.3);
            }
            return (s.value(), e.value());
        }
        let (idx, _) = work
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty work list");
        let (a, b, _, _) = work.swap_remove(idx);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        work.push((a, m, v1, e1));
        work.push((m, b, v2, e2));
    }
}
