//! Periodic Cauchy data and mixed derivatives of `u` on the line `y = 0`.
//!
//! The `y`-jet is generated from `u_yy = -u_xx - 2 sinh(2u)`. The recursion is
//! carried out in local bivariate Taylor arithmetic at each grid point, so only
//! `u` and `u_y` themselves are ever differentiated spectrally; the nonlinear
//! terms never pass through a high-order Fourier multiplier.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Samples of `(u, u_y)` at `x_k = k p / N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyData {
    pub u: Vec<f64>,
    pub uy: Vec<f64>,
    pub period: f64,
}

/// One Fourier mode `a cos(2π m x/p) + b sin(2π m x/p)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    pub m: usize,
    pub cos: f64,
    pub sin: f64,
}

impl CauchyData {
    pub fn new(u: Vec<f64>, uy: Vec<f64>, period: f64) -> Result<Self> {
        let n = u.len();
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::MalformedInput(format!("grid size {n} is not a power of two ≥ 4")));
        }
        if uy.len() != n {
            return Err(Error::MalformedInput("u and u_y grids differ in length".into()));
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::MalformedInput(format!("period {period} is not positive")));
        }
        if u.iter().chain(&uy).any(|v| !v.is_finite()) {
            return Err(Error::MalformedInput("non-finite sample".into()));
        }
        Ok(Self { u, uy, period })
    }

    /// `u ≡ 0, u_y ≡ 0`.
    pub fn vacuum(n: usize, period: f64) -> Result<Self> {
        Self::new(vec![0.0; n], vec![0.0; n], period)
    }

    /// Constant-plus-Fourier-modes generator.
    pub fn from_modes(
        n: usize,
        period: f64,
        u0: f64,
        u_modes: &[Mode],
        uy0: f64,
        uy_modes: &[Mode],
    ) -> Result<Self> {
        let eval = |c: f64, modes: &[Mode], x: f64| {
            modes.iter().fold(c, |s, md| {
                let t = 2.0 * PI * md.m as f64 * x / period;
                s + md.cos * t.cos() + md.sin * t.sin()
            })
        };
        let xs: Vec<f64> = (0..n).map(|k| k as f64 * period / n as f64).collect();
        Self::new(
            xs.iter().map(|&x| eval(u0, u_modes, x)).collect(),
            xs.iter().map(|&x| eval(uy0, uy_modes, x)).collect(),
            period,
        )
    }

    /// Parses CSV with a header and columns `x, u, uy`; the period is
    /// `N` times the grid spacing.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut u = Vec::new();
        let mut uy = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (ln == 0 && line.chars().any(|c| c.is_ascii_alphabetic())) {
                continue;
            }
            let f: Vec<f64> = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::MalformedInput(format!("line {}: {e}", ln + 1)))?;
            if f.len() != 3 {
                return Err(Error::MalformedInput(format!("line {}: expected 3 columns", ln + 1)));
            }
            xs.push(f[0]);
            u.push(f[1]);
            uy.push(f[2]);
        }
        if xs.len() < 2 {
            return Err(Error::MalformedInput("too few rows".into()));
        }
        let h = xs[1] - xs[0];
        Self::new(u, uy, h * xs.len() as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,u,uy\n");
        for k in 0..self.n() {
            s.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", self.x(k), self.u[k], self.uy[k]));
        }
        s
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn x(&self, k: usize) -> f64 {
        k as f64 * self.period / self.n() as f64
    }

    /// `self + s * (du, duy)` on the same grid.
    pub fn perturbed(&self, du: &[f64], duy: &[f64], s: f64) -> Self {
        Self {
            u: self.u.iter().zip(du).map(|(a, b)| a + s * b).collect(),
            uy: self.uy.iter().zip(duy).map(|(a, b)| a + s * b).collect(),
            period: self.period,
        }
    }

    /// Periodic trapezoid quadrature `∫_0^p f dx`.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().sum::<f64>() * self.period / self.n() as f64
    }

    /// Complex trapezoid quadrature.
    pub fn integrate_c(&self, f: &[C64]) -> C64 {
        f.iter().fold(C64::new(0.0, 0.0), |s, v| s + v) * (self.period / self.n() as f64)
    }

    /// Trigonometric interpolant of `(u, u_y)`.
    pub fn interpolant(&self) -> TrigInterp {
        TrigInterp::new(&[&self.u, &self.uy], self.period)
    }
}

fn planner_pair(n: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    let mut p = FftPlanner::new();
    (p.plan_fft_forward(n), p.plan_fft_inverse(n))
}

/// Signed integer wavenumber of FFT bin `j`.
fn wavenumber(j: usize, n: usize) -> i64 {
    if j <= n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// `k`-th x-derivative of a periodic complex grid by Fourier multiplier
/// `(2π i m / p)^k`; the Nyquist mode is zeroed for odd `k` and modes below
/// the transform's roundoff floor are dropped.
pub fn spectral_dx_c(f: &[C64], period: f64, k: u32) -> Vec<C64> {
    let n = f.len();
    if k == 0 {
        return f.to_vec();
    }
    let (fwd, inv) = planner_pair(n);
    let mut buf = f.to_vec();
    fwd.process(&mut buf);
    // Modes below the roundoff floor of the transform are noise that the
    // multiplier would amplify by |m|^k.
    let floor = n as f64 * f64::EPSILON * buf.iter().fold(0.0f64, |a, c| a.max(c.norm()));
    for (j, c) in buf.iter_mut().enumerate() {
        if c.norm() < floor {
            *c = C64::new(0.0, 0.0);
            continue;
        }
        let m = wavenumber(j, n);
        if k % 2 == 1 && n % 2 == 0 && j == n / 2 {
            *c = C64::new(0.0, 0.0);
            continue;
        }
        let w = C64::new(0.0, 2.0 * PI * m as f64 / period);
        *c *= w.powu(k) / n as f64;
    }
    inv.process(&mut buf);
    buf
}

/// Real-grid version of [`spectral_dx_c`].
pub fn spectral_dx(f: &[f64], period: f64, k: u32) -> Vec<f64> {
    let c: Vec<C64> = f.iter().map(|&v| C64::new(v, 0.0)).collect();
    spectral_dx_c(&c, period, k).iter().map(|z| z.re).collect()
}

/// Evaluates band-limited periodic grids at arbitrary `x`.
#[derive(Clone, Debug)]
pub struct TrigInterp {
    period: f64,
    /// Per field: mean, then `(cos, sin)` amplitudes for `m = 1..`.
    fields: Vec<(f64, Vec<(f64, f64)>)>,
}

impl TrigInterp {
    pub fn new(grids: &[&[f64]], period: f64) -> Self {
        let fields = grids
            .iter()
            .map(|g| {
                let n = g.len();
                let (fwd, _) = planner_pair(n);
                let mut buf: Vec<C64> = g.iter().map(|&v| C64::new(v, 0.0)).collect();
                fwd.process(&mut buf);
                let nf = n as f64;
                let mean = buf[0].re / nf;
                let mut amps: Vec<(f64, f64)> = (1..=n / 2)
                    .map(|m| {
                        let c = buf[m] / nf;
                        let w = if m == n / 2 { 1.0 } else { 2.0 };
                        (w * c.re, -w * c.im)
                    })
                    .collect();
                let big = amps.iter().fold(mean.abs(), |a, &(c, s)| a.max(c.abs()).max(s.abs()));
                while amps
                    .last()
                    .is_some_and(|&(c, s)| c.abs().max(s.abs()) <= 1e-17 * big.max(1e-300))
                {
                    amps.pop();
                }
                (mean, amps)
            })
            .collect();
        Self { period, fields }
    }

    /// Values of all fields at `x`.
    pub fn eval(&self, x: f64, out: &mut [f64]) {
        let th = 2.0 * PI * x / self.period;
        let (s1, c1) = th.sin_cos();
        for (o, (mean, amps)) in out.iter_mut().zip(&self.fields) {
            let (mut c, mut s) = (c1, s1);
            let mut acc = *mean;
            for (m, &(a, b)) in amps.iter().enumerate() {
                if m > 0 && m % 32 == 0 {
                    let t = (m + 1) as f64 * th;
                    c = t.cos();
                    s = t.sin();
                }
                acc += a * c + b * s;
                let cn = c * c1 - s * s1;
                s = s * c1 + c * s1;
                c = cn;
            }
            *o = acc;
        }
    }
}

/// Default jet order.
pub const DEFAULT_JET_ORDER: usize = 12;

/// Default ceiling on the jet order accepted by [`extend_jet`].
pub const DEFAULT_MAX_JET_ORDER: usize = 12;

/// Hard ceiling for [`extend_jet_with`].
pub const HARD_MAX_JET_ORDER: usize = 32;

/// All mixed derivatives `∂_x^a ∂_y^b u(x_k, 0)` with `a + b ≤ M`.
#[derive(Clone, Debug)]
pub struct YJet {
    order: usize,
    period: f64,
    n: usize,
    /// `mixed[a][b][k]`.
    mixed: Vec<Vec<Vec<f64>>>,
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// Truncated product of two univariate series (degree ≤ `deg`).
fn series_mul_acc(acc: &mut [f64], a: &[f64], b: &[f64], scale: f64) {
    let deg = acc.len();
    for (i, &ai) in a.iter().enumerate().take(deg) {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(deg - i) {
            acc[i + j] += scale * ai * bj;
        }
    }
}

/// Normalized Taylor coefficients of `exp(c · f)` for a univariate series.
fn series_exp(f: &[f64], c: f64, deg: usize) -> Vec<f64> {
    let mut e = vec![0.0; deg];
    if deg == 0 {
        return e;
    }
    e[0] = (c * f[0]).exp();
    for a in 0..deg - 1 {
        let mut s = 0.0;
        for j in 0..=a {
            if j + 1 < f.len() {
                s += (j + 1) as f64 * f[j + 1] * e[a - j];
            }
        }
        e[a + 1] = c * s / (a + 1) as f64;
    }
    e
}

impl YJet {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `∂_y^m u(·, 0)`.
    pub fn layer(&self, m: usize) -> &[f64] {
        &self.mixed[0][m]
    }

    /// `∂_x^a ∂_y^b u(·, 0)`.
    pub fn mixed(&self, a: usize, b: usize) -> Result<&[f64]> {
        if a + b > self.order {
            return Err(Error::Precondition(format!(
                "derivative order {} exceeds jet order {}",
                a + b,
                self.order
            )));
        }
        Ok(&self.mixed[a][b])
    }

    /// `∂_z^j ∂_z̄^k u(·, 0)` with `∂_z = (∂_x - i∂_y)/2`.
    pub fn z_derivative_grid(&self, j: usize, k: usize) -> Result<Vec<C64>> {
        if j + k > self.order {
            return Err(Error::Precondition(format!(
                "z-derivative order {} exceeds jet order {}",
                j + k,
                self.order
            )));
        }
        let binom = |n: usize, r: usize| -> f64 {
            (0..r).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
        };
        let mut out = vec![C64::new(0.0, 0.0); self.n];
        let scale = 0.5f64.powi((j + k) as i32);
        for r in 0..=j {
            for s in 0..=k {
                let ipow = C64::new(0.0, -1.0).powu(r as u32) * C64::new(0.0, 1.0).powu(s as u32);
                let coef = ipow * (binom(j, r) * binom(k, s) * scale);
                let grid = &self.mixed[j + k - r - s][r + s];
                for (o, &g) in out.iter_mut().zip(grid) {
                    *o += coef * g;
                }
            }
        }
        Ok(out)
    }
}

/// Builds the jet of order `m ≤ DEFAULT_MAX_JET_ORDER` from Cauchy data.
pub fn extend_jet(cd: &CauchyData, m: usize) -> Result<YJet> {
    extend_jet_with(cd, m, DEFAULT_MAX_JET_ORDER)
}

/// Builds the jet of order `m ≤ max_order` from Cauchy data.
pub fn extend_jet_with(cd: &CauchyData, m: usize, max_order: usize) -> Result<YJet> {
    if m > max_order.min(HARD_MAX_JET_ORDER) {
        return Err(Error::Precondition(format!(
            "jet order {m} above the configured maximum {max_order}"
        )));
    }
    let n = cd.n();
    let p = cd.period;
    let fact = factorials(m + 2);
    // x-derivatives of u (orders 0..=m) and u_y (orders 0..m).
    let du: Vec<Vec<f64>> = (0..=m).map(|a| spectral_dx(&cd.u, p, a as u32)).collect();
    let duy: Vec<Vec<f64>> = (0..=m).map(|a| spectral_dx(&cd.uy, p, a as u32)).collect();
    let mut mixed = vec![vec![vec![0.0; n]; m + 1]; m + 1];
    let deg = m + 1;
    for k in 0..n {
        // t[b][a] = ∂_x^a ∂_y^b u / (a! b!)
        let mut t = vec![vec![0.0; deg]; deg + 2];
        for a in 0..=m {
            t[0][a] = du[a][k] / fact[a];
        }
        if m >= 1 {
            for a in 0..m {
                t[1][a] = duy[a][k] / fact[a];
            }
        }
        let mut ep: Vec<Vec<f64>> = Vec::with_capacity(deg);
        let mut em: Vec<Vec<f64>> = Vec::with_capacity(deg);
        for b in 0..=m {
            let width = m + 1 - b;
            // exp(±2u) y-coefficient b as a series in x of degree < width
            let (eb_p, eb_m) = if b == 0 {
                (series_exp(&t[0], 2.0, width), series_exp(&t[0], -2.0, width))
            } else {
                let mut sp = vec![0.0; width];
                let mut sm = vec![0.0; width];
                for j in 1..=b {
                    series_mul_acc(&mut sp, &t[j], &ep[b - j], 2.0 * j as f64 / b as f64);
                    series_mul_acc(&mut sm, &t[j], &em[b - j], -2.0 * j as f64 / b as f64);
                }
                (sp, sm)
            };
            ep.push(eb_p);
            em.push(eb_m);
            if b + 2 <= m {
                for a in 0..=(m - b - 2) {
                    let sig = ep[b][a] - em[b][a];
                    let v = -(t[b][a + 2] * ((a + 2) * (a + 1)) as f64 + sig)
                        / ((b + 2) * (b + 1)) as f64;
                    if !v.is_finite() || (v * fact[a] * fact[b + 2]).abs() > 1e12 {
                        return Err(Error::Divergence(format!(
                            "jet coefficient ({a},{}) overflow at grid point {k}",
                            b + 2
                        )));
                    }
                    t[b + 2][a] = v;
                }
            }
        }
        for a in 0..=m {
            for b in 0..=(m - a) {
                mixed[a][b][k] = t[b][a] * fact[a] * fact[b];
            }
        }
    }
    Ok(YJet {
        order: m,
        period: p,
        n,
        mixed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize, p: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|k| f(k as f64 * p / n as f64)).collect()
    }

    #[test]
    fn dx_of_sine_and_constant() {
        let p = 3.0;
        let w = 2.0 * PI / p;
        let f = grid(64, p, |x| (w * x).sin());
        let d = spectral_dx(&f, p, 1);
        let want = grid(64, p, |x| w * (w * x).cos());
        assert!(d.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-10));
        let c = vec![2.5; 32];
        for k in 1..4 {
            assert!(spectral_dx(&c, p, k).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn dx2_matches_finite_difference() {
        let p = 2.0 * PI;
        let w = 2.0 * PI / p;
        let f = |x: f64| (w * x).cos().exp();
        let g = grid(128, p, f);
        let d = spectral_dx(&g, p, 2);
        let h = p / 4096.0;
        // the central difference itself carries h²/12·f'''' ≈ 8e-7 relative error
        let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (k, dk) in d.iter().enumerate() {
            let x = k as f64 * p / 128.0;
            let fd = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
            assert!((dk - fd).abs() < 1e-6 * scale, "{dk} vs {fd}");
        }
    }

    #[test]
    fn vacuum_and_constant_jets() {
        let cd = CauchyData::vacuum(16, 1.0).unwrap();
        let j = extend_jet(&cd, 6).unwrap();
        assert!((0..=6).all(|m| j.layer(m).iter().all(|v| *v == 0.0)));
        let c = 0.3;
        let cd = CauchyData::new(vec![c; 16], vec![0.0; 16], 1.0).unwrap();
        let j = extend_jet(&cd, 4).unwrap();
        let want = -2.0 * (2.0 * c).sinh();
        assert!(j.layer(2).iter().all(|v| (v - want).abs() < 1e-14));
    }

    #[test]
    fn first_step_matches_direct_evaluation() {
        let p = 2.0 * PI;
        let modes = [Mode { m: 1, cos: 0.3, sin: 0.0 }];
        let cd = CauchyData::from_modes(64, p, 0.0, &modes, 0.0, &[]).unwrap();
        let j = extend_jet(&cd, 4).unwrap();
        for k in 0..64 {
            let x = cd.x(k);
            let u = 0.3 * x.cos();
            let uxx = -0.3 * x.cos();
            assert!((j.layer(2)[k] - (-uxx - 2.0 * (2.0 * u).sinh())).abs() < 1e-12);
        }
    }

    #[test]
    fn z_derivatives_basic() {
        let p = 2.0 * PI;
        let cd = CauchyData::from_modes(
            64,
            p,
            0.1,
            &[Mode { m: 1, cos: 0.2, sin: -0.1 }, Mode { m: 2, cos: 0.05, sin: 0.1 }],
            0.05,
            &[Mode { m: 1, cos: -0.1, sin: 0.2 }],
        )
        .unwrap();
        let j = extend_jet(&cd, 6).unwrap();
        let z00 = j.z_derivative_grid(0, 0).unwrap();
        assert!(z00.iter().zip(&cd.u).all(|(a, b)| (a.re - b).abs() < 1e-14 && a.im == 0.0));
        let ux = spectral_dx(&cd.u, p, 1);
        let z10 = j.z_derivative_grid(1, 0).unwrap();
        for k in 0..64 {
            assert!((z10[k] - C64::new(0.5 * ux[k], -0.5 * cd.uy[k])).norm() < 1e-13);
        }
        let z11 = j.z_derivative_grid(1, 1).unwrap();
        for k in 0..64 {
            let u = cd.u[k];
            let want = -0.25 * ((2.0 * u).exp() - (-2.0 * u).exp());
            assert!((z11[k].re - want).abs() < 1e-10 && z11[k].im.abs() < 1e-12);
        }
        let a = j.z_derivative_grid(3, 1).unwrap();
        let b = j.z_derivative_grid(1, 3).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| (x - y.conj()).norm() < 1e-10));
        assert!(j.z_derivative_grid(4, 3).is_err());
    }

    #[test]
    fn interpolant_reproduces_samples() {
        let p = 1.7;
        let cd = CauchyData::from_modes(
            32,
            p,
            0.2,
            &[Mode { m: 3, cos: 0.1, sin: 0.2 }],
            -0.1,
            &[Mode { m: 1, cos: 0.3, sin: 0.0 }],
        )
        .unwrap();
        let it = cd.interpolant();
        let mut o = [0.0; 2];
        for k in 0..32 {
            it.eval(cd.x(k), &mut o);
            assert!((o[0] - cd.u[k]).abs() < 1e-13 && (o[1] - cd.uy[k]).abs() < 1e-13);
        }
        it.eval(0.123, &mut o);
        let t = 2.0 * PI * 3.0 * 0.123 / p;
        assert!((o[0] - (0.2 + 0.1 * t.cos() + 0.2 * t.sin())).abs() < 1e-13);
    }

    #[test]
    fn csv_roundtrip() {
        let cd = CauchyData::from_modes(8, 2.0, 0.1, &[Mode { m: 1, cos: 0.2, sin: 0.0 }], 0.0, &[])
            .unwrap();
        let back = CauchyData::from_csv(&cd.to_csv()).unwrap();
        assert!((back.period - 2.0).abs() < 1e-12);
        assert!(back.u.iter().zip(&cd.u).all(|(a, b)| (a - b).abs() < 1e-15));
        assert!(CauchyData::from_csv("x,u,uy\n0,1\n").is_err());
    }
}
