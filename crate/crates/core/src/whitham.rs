//! Isoperiodic (Whitham) deformations of spectral data.
//!
//! A direction `c` with `c_i = conj(c_{g+1-i})` and `c(0) = 0` determines
//! `(ȧ, ḃ)` through `-2ḃa + bȧ = -2λac' + ac + λa'c`. The unknowns are
//! parametrized so that the reality symmetries of `a` and `b` and the
//! normalization `|a(0)| = 1` (via `ȧ(0) = i s a(0)`, `s` real) hold exactly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{poly_roots, CPoly};
use crate::ode::{integrate, OdeOpts};
use crate::spectral::{a_cycle_integral, h_value, lattice_defect, SpectralPair, DEFAULT_PANELS};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Root-collision distance treated as the boundary of the moduli space.
pub const COLLISION_DISTANCE: f64 = 1e-4;

/// A Whitham direction `c` of degree `≤ g + 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WhithamDirection {
    pub c: CPoly,
}

impl WhithamDirection {
    /// Validates `c_i = conj(c_{g+1-i})`, `c(0) = 0` and the degree bound.
    pub fn new(c: CPoly, g: usize) -> Result<Self> {
        let n = g + 1;
        if c.degree().map_or(false, |d| d > n) {
            return Err(Error::MalformedInput(format!("direction has degree above {n}")));
        }
        let scale = c.max_abs().max(1.0);
        if c.coeff(0).norm() > 1e-14 * scale {
            return Err(Error::MalformedInput("c(0) must vanish to preserve the period".into()));
        }
        for i in 0..=n {
            if (c.coeff(i) - c.coeff(n - i).conj()).norm() > 1e-12 * scale {
                return Err(Error::MalformedInput(format!("coefficient {i} violates c_i = conj(c_(g+1-i))")));
            }
        }
        Ok(Self { c })
    }

    /// The real span of admissible directions: `g` basis polynomials.
    pub fn basis(g: usize) -> Vec<CPoly> {
        let n = g + 1;
        let mut out = Vec::new();
        for i in 1..=n / 2 {
            if 2 * i == n {
                out.push(CPoly::monomial(C64::new(1.0, 0.0), i));
            } else {
                let mut v = vec![C64::new(0.0, 0.0); n + 1];
                v[i] = C64::new(1.0, 0.0);
                v[n - i] = C64::new(1.0, 0.0);
                out.push(CPoly::new(v.clone()));
                v[i] = I;
                v[n - i] = -I;
                out.push(CPoly::new(v));
            }
        }
        out
    }
}

/// Real parametrization of tangent vectors `(ȧ, ḃ)` at `(a, b)`.
struct TangentParams {
    g: usize,
    a0: C64,
}

impl TangentParams {
    fn dim(&self) -> usize {
        3 * self.g + 2
    }

    /// Maps a real parameter vector to `(ȧ, ḃ)`.
    fn build(&self, x: &[f64]) -> (CPoly, CPoly) {
        let g = self.g;
        let mut da = vec![C64::new(0.0, 0.0); 2 * g + 1];
        da[0] = I * x[0] * self.a0;
        let mut k = 1;
        for i in 1..g {
            da[i] = C64::new(x[k], x[k + 1]);
            k += 2;
        }
        if g > 0 {
            da[g] = C64::new(x[k], 0.0);
            k += 1;
        }
        for i in 0..g {
            da[2 * g - i] = da[i].conj();
        }
        let n = g + 1;
        let mut db = vec![C64::new(0.0, 0.0); n + 1];
        for i in 0..=n {
            if 2 * i < n {
                db[i] = C64::new(x[k], x[k + 1]);
                k += 2;
            } else if 2 * i == n {
                db[i] = C64::new(0.0, x[k]);
                k += 1;
            }
        }
        for i in 0..=n {
            if 2 * i > n {
                db[i] = -db[n - i].conj();
            }
        }
        debug_assert_eq!(k, self.dim());
        (CPoly::new(da), CPoly::new(db))
    }
}

fn real_coeffs(p: &CPoly, len: usize) -> Vec<f64> {
    p.padded(len).iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Output of [`whitham_tangent`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhithamTangent {
    pub da: CPoly,
    pub db: CPoly,
    /// Largest coefficient of the plugged-back identity.
    pub residual: f64,
    /// Ratio of extreme singular values of the linear system.
    pub condition: f64,
}

/// Solves the Whitham equation for `(ȧ, ḃ)`.
pub fn whitham_tangent(sp: &SpectralPair, dir: &WhithamDirection) -> Result<WhithamTangent> {
    let g = sp.g;
    let (a, b, c) = (&sp.a, &sp.b, &dir.c);
    let lam = CPoly::monomial(C64::new(1.0, 0.0), 1);
    let rhs_poly = &(&(&(&lam * a) * &c.derivative()).scale(C64::new(-2.0, 0.0)) + &(a * c))
        + &(&(&lam * &a.derivative()) * c);
    let len = 3 * g + 2;
    let tp = TangentParams { g, a0: a.coeff(0) };
    let dim = tp.dim();
    let mut m = DMatrix::<f64>::zeros(2 * len, dim);
    for j in 0..dim {
        let mut e = vec![0.0; dim];
        e[j] = 1.0;
        let (da, db) = tp.build(&e);
        let col = &(&db * a).scale(C64::new(-2.0, 0.0)) + &(b * &da);
        for (r, v) in real_coeffs(&col, len).into_iter().enumerate() {
            m[(r, j)] = v;
        }
    }
    let r = DVector::from_vec(real_coeffs(&rhs_poly, len));
    let svd = m.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smin <= 1e-10 * smax {
        return Err(Error::Degenerate(format!(
            "Whitham system is rank deficient (σ_min/σ_max = {:.2e})",
            smin / smax
        )));
    }
    let x = svd.solve(&r, 1e-14).map_err(|e| Error::Numerical(e.to_string()))?;
    let (da, db) = tp.build(x.as_slice());
    let lhs = &(&db * a).scale(C64::new(-2.0, 0.0)) + &(b * &da);
    let residual = (&lhs - &rhs_poly).max_abs();
    Ok(WhithamTangent { da, db, residual, condition: smax / smin })
}

/// Period derivative `ṗ = 4i ḃ(0)/√a(0) - 2i b(0) ȧ(0)/a(0)^{3/2}`, from
/// `p = 4i b(0)/√a(0)`.
pub fn period_rate(sp: &SpectralPair, t: &WhithamTangent) -> f64 {
    let s = crate::spectral::psqrt(sp.a.coeff(0));
    let a0 = sp.a.coeff(0);
    let v = 4.0 * I * (t.db.coeff(0) / s - sp.b.coeff(0) * t.da.coeff(0) / (2.0 * a0 * s));
    v.re
}

fn min_distance(roots: &[C64]) -> f64 {
    let mut dmin = f64::INFINITY;
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            dmin = dmin.min((roots[i] - roots[j]).norm());
        }
    }
    dmin
}

/// Invariant monitors at one point of a flow.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Monitors {
    pub t: f64,
    /// `b(0)/√a(0)` as `[re, im]`.
    pub period_invariant: [f64; 2],
    /// Distances of `h(α_i)` to `πiZ`.
    pub h_lattice: Vec<f64>,
    /// `|∮_{a_i} d ln μ|` around each cut.
    pub a_cycles: Vec<f64>,
    /// Smallest pairwise distance between roots of `a`.
    pub min_root_distance: f64,
}

/// Computes the monitors of a spectral pair.
pub fn monitors(sp: &SpectralPair, t: f64) -> Result<Monitors> {
    let pi = sp.period_invariant();
    let roots: Vec<C64> = poly_roots(&sp.a)?.into_iter().map(|r| r.value).collect();
    let dmin = min_distance(&roots);
    let inner = sp.inner_roots()?;
    let mut hl = Vec::new();
    let mut ac = Vec::new();
    for &al in &inner {
        hl.push(lattice_defect(h_value(sp, al, DEFAULT_PANELS)?));
        ac.push(a_cycle_integral(sp, al, DEFAULT_PANELS)?.norm());
    }
    Ok(Monitors { t, period_invariant: [pi.re, pi.im], h_lattice: hl, a_cycles: ac, min_root_distance: dmin })
}

/// A sampled Whitham trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WhithamTrajectory {
    pub pairs: Vec<SpectralPair>,
    pub monitors: Vec<Monitors>,
    /// Set when integration stopped at the boundary of the moduli space.
    pub halted: Option<String>,
}

impl WhithamTrajectory {
    /// Largest drift of `b(0)/√a(0)` from its initial value.
    pub fn period_drift(&self) -> f64 {
        let p0 = C64::new(self.monitors[0].period_invariant[0], self.monitors[0].period_invariant[1]);
        self.monitors
            .iter()
            .map(|m| (C64::new(m.period_invariant[0], m.period_invariant[1]) - p0).norm())
            .fold(0.0, f64::max)
    }

    /// Largest `h` lattice residual over the trajectory.
    pub fn max_h_lattice(&self) -> f64 {
        self.monitors.iter().flat_map(|m| m.h_lattice.iter().copied()).fold(0.0, f64::max)
    }

    /// Largest drift of the a-cycle integrals from their initial values.
    pub fn a_cycle_drift(&self) -> f64 {
        let first = &self.monitors[0].a_cycles;
        self.monitors
            .iter()
            .flat_map(|m| m.a_cycles.iter().zip(first).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }

    /// CSV: `t`, coefficients of `a` and `b`, roots, monitors.
    pub fn to_csv(&self) -> String {
        let sp0 = &self.pairs[0];
        let (na, nb) = (2 * sp0.g + 1, sp0.g + 2);
        let mut s = String::from("t");
        for k in 0..na {
            s.push_str(&format!(",a{k}_re,a{k}_im"));
        }
        for k in 0..nb {
            s.push_str(&format!(",b{k}_re,b{k}_im"));
        }
        for k in 0..2 * sp0.g {
            s.push_str(&format!(",root{k}_re,root{k}_im"));
        }
        s.push_str(",period_re,period_im,h_lattice_max,a_cycle_max,min_root_distance\n");
        for (sp, m) in self.pairs.iter().zip(&self.monitors) {
            s.push_str(&format!("{}", m.t));
            for c in sp.a.padded(na).iter().chain(sp.b.padded(nb).iter()) {
                s.push_str(&format!(",{},{}", c.re, c.im));
            }
            let mut roots: Vec<C64> = poly_roots(&sp.a).map(|r| r.into_iter().map(|r| r.value).collect()).unwrap_or_default();
            roots.sort_by(|x, y| x.re.partial_cmp(&y.re).unwrap().then(x.im.partial_cmp(&y.im).unwrap()));
            roots.resize(2 * sp.g, C64::new(f64::NAN, f64::NAN));
            for r in roots {
                s.push_str(&format!(",{},{}", r.re, r.im));
            }
            let hm = m.h_lattice.iter().copied().fold(0.0, f64::max);
            let am = m.a_cycles.iter().copied().fold(0.0, f64::max);
            s.push_str(&format!(
                ",{},{},{},{},{}\n",
                m.period_invariant[0], m.period_invariant[1], hm, am, m.min_root_distance
            ));
        }
        s
    }
}

fn pack(sp: &SpectralPair) -> Vec<f64> {
    let mut v = real_coeffs(&sp.a, 2 * sp.g + 1);
    v.extend(real_coeffs(&sp.b, sp.g + 2));
    v
}

fn unpack(v: &[f64], g: usize, period: f64) -> SpectralPair {
    let na = 2 * g + 1;
    let cp = |s: &[f64]| CPoly::new(s.chunks(2).map(|c| C64::new(c[0], c[1])).collect());
    SpectralPair { a: cp(&v[..2 * na]), b: cp(&v[2 * na..]), g, period }
}

/// Integrates `(ȧ, ḃ) = X_c(a, b)` and samples the pair and its monitors at
/// `steps + 1` equally spaced times in `[0, t_end]` (negative `t_end` runs
/// backwards). Stops early at a root collision.
pub fn whitham_flow(sp: &SpectralPair, dir: &WhithamDirection, t_end: f64, steps: usize, tol: f64) -> Result<WhithamTrajectory> {
    let steps = steps.max(1);
    let mut pairs = vec![sp.clone()];
    let mut mons = vec![monitors(sp, 0.0)?];
    let mut state = pack(sp);
    let (g, p) = (sp.g, sp.period);
    let opts = OdeOpts::with_tol(tol);
    let mut halted = None;
    for k in 1..=steps {
        if t_end == 0.0 {
            pairs.push(sp.clone());
            mons.push(monitors(sp, 0.0)?);
            continue;
        }
        let (t0, t1) = ((k - 1) as f64 * t_end / steps as f64, k as f64 * t_end / steps as f64);
        let failure = std::cell::RefCell::new(None);
        let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
            let cur = unpack(y, g, p);
            let close = poly_roots(&cur.a).map(|r| min_distance(&r.iter().map(|r| r.value).collect::<Vec<_>>()));
            if close.map_or(true, |d| d < COLLISION_DISTANCE) {
                *failure.borrow_mut() = Some(Error::Degenerate("roots of a collide".into()));
                d.iter_mut().for_each(|x| *x = f64::NAN);
                return;
            }
            match whitham_tangent(&cur, dir) {
                Ok(t) => {
                    let mut v = real_coeffs(&t.da, 2 * g + 1);
                    v.extend(real_coeffs(&t.db, g + 2));
                    d.copy_from_slice(&v);
                }
                Err(e) => {
                    *failure.borrow_mut() = Some(e);
                    d.iter_mut().for_each(|x| *x = f64::NAN);
                }
            }
        };
        let out = integrate(rhs, t0, &state, &[t1], opts);
        if let Some(e) = failure.into_inner() {
            if matches!(e, Error::Degenerate(_)) {
                halted = Some(e.to_string());
                break;
            }
            return Err(e);
        }
        state = out?.remove(0);
        let cur = unpack(&state, g, p);
        if cur.inner_roots()?.len() != g {
            halted = Some(format!("roots of a reached the unit circle before t = {t1}"));
            break;
        }
        let m = monitors(&cur, t1)?;
        let collided = m.min_root_distance < COLLISION_DISTANCE;
        pairs.push(cur);
        mons.push(m);
        if collided {
            halted = Some(format!("roots of a collide at t = {t1}"));
            break;
        }
    }
    Ok(WhithamTrajectory { pairs, monitors: mons, halted })
}

/// [`whitham_flow`] that turns an early stop into a boundary error.
pub fn whitham_flow_strict(sp: &SpectralPair, dir: &WhithamDirection, t_end: f64, steps: usize, tol: f64) -> Result<WhithamTrajectory> {
    let tr = whitham_flow(sp, dir, t_end, steps, tol)?;
    match &tr.halted {
        Some(msg) => Err(Error::BoundaryOfModuli(msg.clone())),
        None => Ok(tr),
    }
}
