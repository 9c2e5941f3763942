//! Point spectrum {−1, −4, …, −ν²}, bound states and the Wronskian.
//!
//! ψ_m is proportional to P_ν^m(tanh x) = const · sech^m x · Q(tanh x), with Q obtained from
//! the associated Legendre recurrence in the degree.

use crate::error::Result;
use crate::grid::Grid;
use crate::polyrec::potential;
use num_complex::Complex64;
use serde::Serialize;
use std::io::Write;

#[derive(Clone, Debug, Serialize)]
pub struct BoundState {
    pub nu: u32,
    pub m: u32,
    pub energy: f64,
    pub samples: Vec<f64>,
    /// ψ_m(x) = norm_constant · sech^m(x) · Q(tanh x).
    pub norm_constant: f64,
}

/// Q with P_ν^m(s) = (−1)^m (2m−1)!! (1−s²)^{m/2} Q(s).
fn legendre_tail(nu: u32, m: u32, s: f64) -> f64 {
    let mut q0 = 1.0;
    if nu == m {
        return q0;
    }
    let mut q1 = (2 * m + 1) as f64 * s;
    for l in (m + 1)..nu {
        let lf = l as f64;
        let mf = m as f64;
        let q2 = ((2.0 * lf + 1.0) * s * q1 - (lf + mf) * q0) / (lf - mf + 1.0);
        q0 = q1;
        q1 = q2;
    }
    q1
}

fn profile(nu: u32, m: u32, x: f64) -> f64 {
    (1.0 / x.cosh()).powi(m as i32) * legendre_tail(nu, m, x.tanh())
}

/// ∫ (sech^m x · Q(tanh x))² dx in closed form: (ν+m)!/(m (ν−m)!) / ((2m−1)!!)².
pub fn analytic_profile_norm_sq(nu: u32, m: u32) -> f64 {
    let mut ratio = 1.0;
    for i in (nu - m + 1)..=(nu + m) {
        ratio *= i as f64;
    }
    let mut dfact = 1.0;
    let mut i = 2 * m as i64 - 1;
    while i > 1 {
        dfact *= i as f64;
        i -= 2;
    }
    ratio / m as f64 / (dfact * dfact)
}

impl BoundState {
    pub fn value_at(&self, x: f64) -> f64 {
        self.norm_constant * profile(self.nu, self.m, x)
    }

    /// Parity (−1)^{ν+m}.
    pub fn parity(&self) -> i32 {
        if (self.nu + self.m) % 2 == 0 {
            1
        } else {
            -1
        }
    }
}

pub fn bound_states(nu: u32, grid: &Grid) -> Vec<BoundState> {
    (1..=nu)
        .map(|m| {
            let raw = grid.sample(|x| profile(nu, m, x));
            let norm = grid.norm2(&raw);
            // The first nonvanishing derivative at 0 is positive.
            let lead = if (nu + m) % 2 == 0 {
                legendre_tail(nu, m, 0.0)
            } else {
                legendre_tail(nu, m, 1e-6)
            };
            let c = lead.signum() / norm;
            BoundState {
                nu,
                m,
                energy: -((m * m) as f64),
                samples: raw.iter().map(|v| v * c).collect(),
                norm_constant: c,
            }
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralData {
    pub nu: u32,
    pub point_spectrum: Vec<f64>,
    /// Lower end of σ_c = [0, ∞).
    pub continuous_from: f64,
}

impl SpectralData {
    pub fn new(nu: u32) -> Self {
        Self { nu, point_spectrum: (1..=nu).map(|m| -((m * m) as f64)).collect(), continuous_from: 0.0 }
    }
}

/// W(k) = −2(−1)^ν ik Π_{ι=1}^ν (ι + ik)/(ι − ik).
pub fn wronskian_eval(nu: u32, k: f64) -> Complex64 {
    let mut w = Complex64::new(0.0, -2.0 * k);
    if nu % 2 == 1 {
        w = -w;
    }
    for i in 1..=nu {
        w *= Complex64::new(i as f64, k) / Complex64::new(i as f64, -k);
    }
    w
}

/// ‖(−D² + V + m²)ψ_m‖₂ over the interior of the grid.
pub fn eigen_residual(state: &BoundState, nu: u32, grid: &Grid) -> f64 {
    let d2 = grid.second_difference(&state.samples);
    let m2 = (state.m * state.m) as f64;
    let n = grid.len();
    let mut r: Vec<f64> = (0..n)
        .map(|i| -d2[i] + (potential(nu, grid.point(i)) + m2) * state.samples[i])
        .collect();
    r[0] = 0.0;
    r[n - 1] = 0.0;
    grid.norm2(&r)
}

/// CSV with a leading comment line recording ν, L and the point count.
pub fn write_bound_states_csv(states: &[BoundState], nu: u32, grid: &Grid, mut out: impl Write) -> Result<()> {
    writeln!(out, "# nu={},L={},n_points={}", nu, grid.half_width(), grid.len())?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["x".to_string()];
    header.extend(states.iter().map(|s| format!("psi_{}", s.m)));
    w.write_record(&header)?;
    for i in 0..grid.len() {
        let mut row = vec![format!("{:e}", grid.point(i))];
        row.extend(states.iter().map(|s| format!("{:e}", s.samples[i])));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
