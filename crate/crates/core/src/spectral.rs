//! Spectral-curve data `(a, b)` on `ν² = λ a(λ)` and integrals on the curve.
//!
//! Sheets are tracked by continuation: along a path each `ν` is the square
//! root of `λ a(λ)` closest to its predecessor. Near `λ = 0` the reference
//! sheet is `ν ≈ √a(0) √λ` with principal roots, and on that sheet
//! `d ln μ = b dλ / (ν λ)` gives `b(0) = -(ip/4) √a(0)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::algebra::{
    a_from_loop, pg_membership_tol, poly_reality_check, poly_roots, poly_roots_with, resultant, CPoly, LaurentLoop,
    PolyKind, RealityOpts, M2,
};
use crate::laxflow::killing_monodromy;
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Principal square root with the cut approached from above, so that
/// `psqrt(-1) = i` regardless of the sign of a zero or round-off imaginary part.
pub fn psqrt(z: C64) -> C64 {
    if z.re < 0.0 && z.im.abs() <= 1e-14 * z.re.abs() {
        return I * (-z.re).sqrt();
    }
    z.sqrt()
}

/// Spectral-curve data of genus `g` and period `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralPair {
    pub a: CPoly,
    pub b: CPoly,
    pub g: usize,
    pub period: f64,
}

/// Outcome of the moduli-space checks on a [`SpectralPair`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Membership {
    pub reality_a: bool,
    pub reality_b: bool,
    /// `|b(0) - b_expected(0)|` relative to `p`.
    pub b0_defect: f64,
    pub distinct_roots: bool,
    pub resultant: [f64; 2],
    pub member: bool,
}

/// Settings for [`SpectralPair::membership_with`].
#[derive(Clone, Copy, Debug)]
pub struct MembershipOpts {
    /// Relative tolerance of the reality and period checks.
    pub tol: f64,
    /// Roots closer than this (relative) count as multiple.
    pub root_tol: f64,
    /// Unit-circle samples for the sign condition on `a`.
    pub circle_samples: usize,
}

impl Default for MembershipOpts {
    fn default() -> Self {
        Self { tol: 1e-10, root_tol: 1e-7, circle_samples: 64 }
    }
}

impl SpectralPair {
    /// `b(0)` forced by the period on the reference sheet.
    pub fn expected_b0(a0: C64, period: f64) -> C64 {
        -I * (period / 4.0) * psqrt(a0)
    }

    /// The invariant `b(0)/√a(0)`, equal to `-ip/4`.
    pub fn period_invariant(&self) -> C64 {
        self.b.coeff(0) / psqrt(self.a.coeff(0))
    }

    /// Period recovered from the invariant.
    pub fn period_from_b(&self) -> f64 {
        (4.0 * I * self.period_invariant()).re
    }

    /// Checks reality, the period normalization, simple roots and coprimality.
    pub fn membership(&self, tol: f64) -> Result<Membership> {
        self.membership_with(MembershipOpts { tol, ..MembershipOpts::default() })
    }

    /// [`SpectralPair::membership`] with explicit root and circle settings.
    pub fn membership_with(&self, o: MembershipOpts) -> Result<Membership> {
        let tol = o.tol;
        let ro = RealityOpts { rel_tol: tol, circle_samples: o.circle_samples };
        let reality_a = poly_reality_check(&self.a, PolyKind::A, self.g, ro)?;
        let reality_b = poly_reality_check(&self.b, PolyKind::B, self.g, ro)?;
        let b0_defect =
            (self.b.coeff(0) - Self::expected_b0(self.a.coeff(0), self.period)).norm() / self.period;
        let distinct_roots = poly_roots_with(&self.a, o.root_tol)?.iter().all(|r| !r.multiple);
        let res = resultant(&self.a, &self.b)?;
        let member = reality_a
            && reality_b
            && b0_defect < tol.max(1e-12) * 1e3
            && distinct_roots
            && res.norm() > 1e-10;
        Ok(Membership { reality_a, reality_b, b0_defect, distinct_roots, resultant: [res.re, res.im], member })
    }

    /// Roots of `a` inside the unit disk.
    pub fn inner_roots(&self) -> Result<Vec<C64>> {
        let mut r: Vec<C64> =
            poly_roots(&self.a)?.into_iter().map(|r| r.value).filter(|v| v.norm() < 1.0).collect();
        r.sort_by(|x, y| x.arg().partial_cmp(&y.arg()).unwrap());
        Ok(r)
    }

    /// All roots of `a`.
    pub fn branch_points(&self) -> Result<Vec<C64>> {
        Ok(poly_roots(&self.a)?.into_iter().map(|r| r.value).collect())
    }
}

/// Projects `b` onto `λ^{g+1} conj(b(1/λ̄)) = -b(λ)`.
pub fn project_b_reality(b: &CPoly, g: usize) -> CPoly {
    let n = g + 1;
    CPoly::new((0..=n).map(|k| (b.coeff(k) - b.coeff(n - k).conj()) * 0.5).collect())
}

// ---------------------------------------------------------------------------
// Quadrature and paths
// ---------------------------------------------------------------------------

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    (idx.iter().map(|&i| x[i]).collect(), idx.iter().map(|&i| w[i]).collect())
}

/// Gauss-Legendre order per panel.
pub const GL_ORDER: usize = 16;

/// Nodes and weights of `panels` Gauss-Legendre panels on `[lo, hi]`, sorted.
fn panel_rule(lo: f64, hi: f64, panels: usize) -> Vec<(f64, f64)> {
    let (x, w) = gauss_legendre(GL_ORDER);
    let h = (hi - lo) / panels as f64;
    let mut out = Vec::with_capacity(panels * GL_ORDER);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            out.push((a + 0.5 * h * (xi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// What a [`CurvePath`] represents.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathKind {
    Segment,
    Cycle,
    ResidueCircle,
}

/// Quadrature nodes on the curve: `(λ, ν)` with `dλ`-weights.
#[derive(Clone, Debug)]
pub struct CurvePath {
    pub kind: PathKind,
    pub nodes: Vec<(C64, C64)>,
    pub weights: Vec<C64>,
}

/// Continues `ν = ±sqrt(λ a(λ))` along ordered nodes.
fn continue_sheet(a: &CPoly, lams: &[C64], start: C64) -> Result<Vec<C64>> {
    let mut prev = start;
    let mut out = Vec::with_capacity(lams.len());
    for &l in lams {
        let r = (l * a.eval(l)).sqrt();
        let (d1, d2) = ((r - prev).norm(), (r + prev).norm());
        let nu = if d1 <= d2 { r } else { -r };
        let (rh, ph) = (r / r.norm(), prev / prev.norm());
        let (e1, e2) = ((rh - ph).norm(), (rh + ph).norm());
        // a phase jump above 60 degrees between nodes means the sheet is lost
        if r.norm() > 1e-12 && prev.norm() > 1e-12 && e1.min(e2) > 0.577 * e1.max(e2) {
            return Err(Error::Path(format!(
                "sheet continuation ambiguous near λ = {l}; refine the path"
            )));
        }
        out.push(nu);
        prev = nu;
    }
    Ok(out)
}

fn check_clearance(pts: &[C64], branch: &[C64], skip: &[C64], min: f64) -> Result<()> {
    for &bp in branch {
        if skip.iter().any(|s| (s - bp).norm() < 1e-9) {
            continue;
        }
        let d = pts.iter().map(|p| (p - bp).norm()).fold(f64::INFINITY, f64::min);
        if d < min {
            return Err(Error::Path(format!(
                "path passes within {d:.2e} of branch point {bp}; detour around it with a small semicircle"
            )));
        }
    }
    Ok(())
}

impl CurvePath {
    /// Straight segment with the substitution `λ = α + (β-α)(1 - cos θ)/2`,
    /// which absorbs square-root singularities at the endpoints. `start` is
    /// the sheet reference near `from`.
    pub fn segment(a: &CPoly, from: C64, to: C64, start: C64, panels: usize) -> Result<Self> {
        let rule = panel_rule(0.0, PI, panels);
        let d = to - from;
        let lams: Vec<C64> = rule.iter().map(|(t, _)| from + d * ((1.0 - t.cos()) / 2.0)).collect();
        let weights = rule.iter().map(|(t, w)| d * (t.sin() / 2.0) * *w).collect();
        let nus = continue_sheet(a, &lams, start)?;
        Ok(Self { kind: PathKind::Segment, nodes: lams.into_iter().zip(nus).collect(), weights })
    }

    /// Counter-clockwise circle traversed `turns` times, starting at angle 0.
    pub fn circle(a: &CPoly, center: C64, radius: f64, turns: usize, start: C64, panels: usize) -> Result<Self> {
        let rule = panel_rule(0.0, 2.0 * PI * turns as f64, panels * turns);
        let lams: Vec<C64> = rule.iter().map(|(t, _)| center + C64::from_polar(radius, *t)).collect();
        let weights = rule.iter().map(|(t, w)| I * C64::from_polar(radius, *t) * *w).collect();
        let nus = continue_sheet(a, &lams, start)?;
        Ok(Self { kind: PathKind::ResidueCircle, nodes: lams.into_iter().zip(nus).collect(), weights })
    }

    /// Counter-clockwise ellipse with foci `f1, f2`, semi-minor axis `minor`.
    pub fn ellipse(a: &CPoly, f1: C64, f2: C64, minor: f64, start: C64, panels: usize) -> Result<Self> {
        let c = (f1 + f2) / 2.0;
        let half = (f2 - f1) / 2.0;
        let e = half.norm();
        let rot = half / e;
        let major = (e * e + minor * minor).sqrt();
        let rule = panel_rule(0.0, 2.0 * PI, panels);
        let lams: Vec<C64> =
            rule.iter().map(|(t, _)| c + rot * C64::new(major * t.cos(), minor * t.sin())).collect();
        let weights = rule
            .iter()
            .map(|(t, w)| rot * C64::new(-major * t.sin(), minor * t.cos()) * *w)
            .collect();
        let nus = continue_sheet(a, &lams, start)?;
        Ok(Self { kind: PathKind::Cycle, nodes: lams.into_iter().zip(nus).collect(), weights })
    }

    /// The same nodes on the other sheet.
    pub fn other_sheet(&self) -> Self {
        Self {
            kind: self.kind,
            nodes: self.nodes.iter().map(|(l, n)| (*l, -n)).collect(),
            weights: self.weights.clone(),
        }
    }

    /// `∫ f(λ, ν) dλ`.
    pub fn integrate(&self, f: impl Fn(C64, C64) -> C64) -> C64 {
        self.nodes.iter().zip(&self.weights).map(|((l, n), w)| f(*l, *n) * w).sum()
    }
}

/// Differential forms supported by [`contour_integral`].
#[derive(Clone, Debug)]
pub enum Form {
    /// `b/ν · dλ/λ`.
    DlnMu(CPoly),
    /// `λ^{i-1} dλ/ν`.
    Holomorphic(i32),
    /// `ν λ^{-j}` times another form.
    Times(i32, Box<Form>),
    /// `λ^k dλ`.
    Power(i32),
}

impl Form {
    fn eval(&self, l: C64, n: C64) -> C64 {
        match self {
            Form::DlnMu(b) => b.eval(l) / (n * l),
            Form::Holomorphic(i) => l.powi(i - 1) / n,
            Form::Times(j, f) => n * l.powi(-j) * f.eval(l, n),
            Form::Power(k) => l.powi(*k),
        }
    }
}

/// `∫_path form`.
pub fn contour_integral(path: &CurvePath, form: &Form) -> C64 {
    path.integrate(|l, n| form.eval(l, n))
}

/// Serre pairing `Res_0 (νλ^{-j} ω_i) + Res_∞ (-νλ^{-j} ω_i)` with
/// `ω_i = λ^{i-1}dλ/ν`, by contour integration on circles of radii `r0`
/// (around `0`) and `r1` (around `∞`).
pub fn serre_pairing(a: &CPoly, i: i32, j: i32, r0: f64, r1: f64, panels: usize) -> Result<C64> {
    let form = Form::Times(j, Box::new(Form::Holomorphic(i)));
    let s0 = (C64::new(r0, 0.0) * a.eval(C64::new(r0, 0.0))).sqrt();
    let s1 = (C64::new(r1, 0.0) * a.eval(C64::new(r1, 0.0))).sqrt();
    let small = contour_integral(&CurvePath::circle(a, C64::new(0.0, 0.0), r0, 1, s0, panels)?, &form);
    // Res_∞ of -h ω is +(1/2πi)∮_{|λ|=r1, ccw} h ω.
    let large = contour_integral(&CurvePath::circle(a, C64::new(0.0, 0.0), r1, 1, s1, panels)?, &form);
    Ok((small + large) / (2.0 * PI * I))
}

// ---------------------------------------------------------------------------
// Closing conditions
// ---------------------------------------------------------------------------

/// Default panels per path.
pub const DEFAULT_PANELS: usize = 8;

/// `∫_{α}^{1/ᾱ} b/ν dλ/λ` along the straight segment, on the sheet that
/// starts from the principal root near `α`.
pub fn segment_integral(sp: &SpectralPair, alpha: C64, panels: usize) -> Result<C64> {
    let beta = 1.0 / alpha.conj();
    let bps = sp.branch_points()?;
    let path = CurvePath::segment(&sp.a, alpha, beta, probe_nu(&sp.a, alpha, beta), panels)?;
    let pts: Vec<C64> = path.nodes.iter().map(|n| n.0).collect();
    check_clearance(&pts, &bps, &[alpha, beta], 1e-6)?;
    check_clearance(&pts, &[C64::new(0.0, 0.0)], &[], 1e-6)?;
    Ok(contour_integral(&path, &Form::DlnMu(sp.b.clone())))
}

/// Principal `ν` a little way from `from` towards `to`.
fn probe_nu(a: &CPoly, from: C64, to: C64) -> C64 {
    let l = from + (to - from) * 1e-6;
    (l * a.eval(l)).sqrt()
}

/// Integral of `d ln μ` around an ellipse enclosing the cut `[α, 1/ᾱ]`.
pub fn a_cycle_integral(sp: &SpectralPair, alpha: C64, panels: usize) -> Result<C64> {
    let beta = 1.0 / alpha.conj();
    let bps = sp.branch_points()?;
    let len = (beta - alpha).norm();
    let others: Vec<C64> = bps
        .iter()
        .copied()
        .filter(|b| (b - alpha).norm() > 1e-9 && (b - beta).norm() > 1e-9)
        .chain(std::iter::once(C64::new(0.0, 0.0)))
        .collect();
    let gap = others
        .iter()
        .map(|b| {
            let t = (((b - alpha) / (beta - alpha)).re).clamp(0.0, 1.0);
            (b - (alpha + (beta - alpha) * t)).norm()
        })
        .fold(f64::INFINITY, f64::min);
    let minor = (0.25 * gap).min(0.25 * len);
    let c = (alpha + beta) / 2.0;
    let rot = (beta - alpha) / len;
    let l0 = c + rot * ((len / 2.0).powi(2) + minor * minor).sqrt();
    let path = CurvePath::ellipse(&sp.a, alpha, beta, minor, (l0 * sp.a.eval(l0)).sqrt(), panels * 4)?;
    let pts: Vec<C64> = path.nodes.iter().map(|n| n.0).collect();
    check_clearance(&pts, &others, &[], 1e-6)?;
    Ok(contour_integral(&path, &Form::DlnMu(sp.b.clone())))
}

/// `h(α) = ln μ(α)` on the reference sheet, from
/// `h(α) = -2 c α^{-1/2} + ∫_0^α (b/(νλ) - c λ^{-3/2}) dλ`, `c = b(0)/√a(0)`,
/// along the ray `λ = tα`.
pub fn h_value(sp: &SpectralPair, alpha: C64, panels: usize) -> Result<C64> {
    let s0 = psqrt(sp.a.coeff(0));
    let c = sp.b.coeff(0) / s0;
    let sa = alpha.sqrt();
    let rule = panel_rule(0.0, PI, panels);
    let bps = sp.branch_points()?;
    let pts: Vec<C64> = rule.iter().map(|(t, _)| alpha * ((1.0 - t.cos()) / 2.0)).collect();
    check_clearance(&pts, &bps, &[alpha], 1e-6)?;
    let mut prev = s0;
    let mut acc = C64::new(0.0, 0.0);
    for (t, w) in &rule {
        let tt = (1.0 - t.cos()) / 2.0;
        let l = alpha * tt;
        let sl = sa * tt.sqrt();
        let r = sp.a.eval(l).sqrt();
        let s = if (r - prev).norm() <= (r + prev).norm() { r } else { -r };
        prev = s;
        let nu = sl * s;
        let f = sp.b.eval(l) / (nu * l) - c / (sl * sl * sl);
        acc += f * alpha * (t.sin() / 2.0) * *w;
    }
    Ok(-2.0 * c / sa + acc)
}

/// Result of [`closing_conditions`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClosingReport {
    pub roots: Vec<[f64; 2]>,
    pub segment_integrals: Vec<[f64; 2]>,
    pub h_values: Vec<[f64; 2]>,
    /// Distance of each `h(α_i)` to the lattice `πiZ`.
    pub h_lattice_defects: Vec<f64>,
    pub pass: bool,
}

/// Distance from `h` to `πiZ`.
pub fn lattice_defect(h: C64) -> f64 {
    let k = (h.im / PI).round();
    (h - I * PI * k).norm()
}

/// Evaluates both closing conditions at every root of `a` in the unit disk.
pub fn closing_conditions(sp: &SpectralPair, tol: f64) -> Result<ClosingReport> {
    closing_conditions_with(sp, tol, DEFAULT_PANELS)
}

/// [`closing_conditions`] with an explicit panel count.
pub fn closing_conditions_with(sp: &SpectralPair, tol: f64, panels: usize) -> Result<ClosingReport> {
    let roots = sp.inner_roots()?;
    let mut rep = ClosingReport {
        roots: roots.iter().map(|r| [r.re, r.im]).collect(),
        segment_integrals: Vec::new(),
        h_values: Vec::new(),
        h_lattice_defects: Vec::new(),
        pass: true,
    };
    for &al in &roots {
        let s = segment_integral(sp, al, panels)?;
        let h = h_value(sp, al, panels)?;
        let d = lattice_defect(h);
        rep.pass &= s.norm() < tol && d < tol * (1.0 + h.norm());
        rep.segment_integrals.push([s.re, s.im]);
        rep.h_values.push([h.re, h.im]);
        rep.h_lattice_defects.push(d);
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// Curve recovery and eigenvectors
// ---------------------------------------------------------------------------

/// Eigenvector `(1, v₂)` of `ξ_λ` for the eigenvalue `ν/λ`.
#[derive(Clone, Copy, Debug)]
pub struct Eigenvector {
    pub v: [C64; 2],
    /// `|v₂| > 1e6`: a point of the divisor is nearby.
    pub near_pole: bool,
    pub residual: f64,
}

/// Solves `(ξ_λ - ν/λ) v = 0` with first component 1.
pub fn eigenvector_at(xi: &LaurentLoop, lam: C64, nu: C64) -> Result<Eigenvector> {
    let m = xi.eval(lam);
    let e = nu / lam;
    let scale = crate::algebra::mnorm(&m).max(1e-300);
    let chk = (e * e + m.determinant()).norm();
    if chk > 1e-8 * scale * scale.max(1.0) {
        return Err(Error::Precondition(format!(
            "ν/λ is not an eigenvalue of ξ_λ (defect {chk:.2e})"
        )));
    }
    let v2 = (e - m[(0, 0)]) / m[(0, 1)];
    let v = [C64::new(1.0, 0.0), v2];
    let r0 = (m[(0, 0)] - e) + m[(0, 1)] * v2;
    let r1 = m[(1, 0)] + (m[(1, 1)] - e) * v2;
    let norm = (1.0 + v2.norm_sqr()).sqrt();
    let residual = (r0.norm_sqr() + r1.norm_sqr()).sqrt() / norm;
    Ok(Eigenvector { v, near_pole: !v2.is_finite() || v2.norm() > 1e6, residual })
}

/// Diagnostics from [`curve_from_xi`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveFit {
    pub pair: SpectralPair,
    /// Relative least-squares residual before projection.
    pub fit_residual: f64,
    /// Size of the reality projection relative to `b`.
    pub projection_change: f64,
    /// `|ζ(p) - ζ(0)|` relative to `|ξ|`.
    pub periodicity: f64,
}

/// Options for [`curve_from_xi`].
#[derive(Clone, Copy, Debug)]
pub struct CurveOpts {
    pub tol: f64,
    /// Radius of the sampling circle.
    pub radius: f64,
    pub max_residual: f64,
}

impl Default for CurveOpts {
    fn default() -> Self {
        Self { tol: 1e-12, radius: 0.5, max_residual: 1e-5 }
    }
}

fn right_left_eigvecs(m: &M2, e: C64) -> ([C64; 2], [C64; 2]) {
    // right: (m - e) v = 0; left: w (m - e) = 0, from the larger row/column
    let a = m - M2::identity() * e;
    let v = if a[(0, 1)].norm() + a[(0, 0)].norm() >= a[(1, 0)].norm() + a[(1, 1)].norm() {
        [-a[(0, 1)], a[(0, 0)]]
    } else {
        [-a[(1, 1)], a[(1, 0)]]
    };
    let w = if a[(1, 0)].norm() + a[(0, 0)].norm() >= a[(0, 1)].norm() + a[(1, 1)].norm() {
        [-a[(1, 0)], a[(0, 0)]]
    } else {
        [-a[(1, 1)], a[(0, 1)]]
    };
    (v, w)
}

fn bil(w: &[C64; 2], m: &M2, v: &[C64; 2]) -> C64 {
    w[0] * (m[(0, 0)] * v[0] + m[(0, 1)] * v[1]) + w[1] * (m[(1, 0)] * v[0] + m[(1, 1)] * v[1])
}

/// Recovers `(a, b)` from a periodic Killing field: `a = -λ det ξ` exactly and
/// `b(λ_j) = λ_j ν_j ∂_λ ln μ(λ_j)` on `4(g+2)` points of a circle, with
/// `∂_λ ln μ` from the variational equation `G' = GU + F∂_λU` and `ν` paired
/// to `μ` through the common eigenvector of `ξ_λ` and `M_λ`.
pub fn curve_from_xi(xi: &LaurentLoop, g: usize, period: f64, o: CurveOpts) -> Result<CurveFit> {
    if !pg_membership_tol(xi, g, 1e-10) {
        return Err(Error::Precondition(format!("ξ is not in P_{g}")));
    }
    let a = a_from_loop(xi)?;
    let n = 4 * (g + 2);
    let lams: Vec<C64> = (0..n)
        .map(|j| C64::from_polar(o.radius, 2.0 * PI * (j as f64 + 0.5) / n as f64))
        .collect();
    let (ms, dms, end) = killing_monodromy(xi, g, period, &lams, true, o.tol)?;
    let periodicity = (&end - &xi.window(-1, g as i32)).max_abs() / xi.max_abs();
    let mut samples = Vec::with_capacity(n);
    for (k, &l) in lams.iter().enumerate() {
        let nu = (l * a.eval(l)).sqrt();
        let (v, w) = right_left_eigvecs(&xi.eval(l), nu / l);
        let wv = w[0] * v[0] + w[1] * v[1];
        let mu = bil(&w, &ms[k], &v) / wv;
        let dlnmu = bil(&w, &dms[k], &v) / (wv * mu);
        samples.push(l * nu * dlnmu);
    }
    let deg = g + 1;
    let mut vm = DMatrix::<C64>::zeros(n, deg + 1);
    for (r, &l) in lams.iter().enumerate() {
        for c in 0..=deg {
            vm[(r, c)] = l.powi(c as i32);
        }
    }
    let rhs = DVector::from_vec(samples.clone());
    let sol = vm
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| Error::CurveRecovery(e.to_string()))?;
    let fitted = &vm * &sol;
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.norm())).max(1e-300);
    let fit_residual =
        fitted.iter().zip(&samples).map(|(f, s)| (f - s).norm()).fold(0.0, f64::max) / scale;
    if fit_residual > o.max_residual {
        return Err(Error::CurveRecovery(format!(
            "b fit residual {fit_residual:.3e} exceeds {:.1e}",
            o.max_residual
        )));
    }
    let raw = CPoly::new(sol.iter().copied().collect());
    let b = project_b_reality(&raw, g);
    let projection_change = (&b - &raw).max_abs() / raw.max_abs().max(1e-300);
    Ok(CurveFit { pair: SpectralPair { a, b, g, period }, fit_residual, projection_change, periodicity })
}

/// Counts eigenvector pole flags on a polar grid avoiding the unit circle.
pub fn pole_flag_count(xi: &LaurentLoop, a: &CPoly, radii: &[f64], angles: usize) -> Result<usize> {
    let mut count = 0;
    for &r in radii {
        for k in 0..angles {
            let l = C64::from_polar(r, 2.0 * PI * (k as f64 + 0.25) / angles as f64);
            let nu = (l * a.eval(l)).sqrt();
            if eigenvector_at(xi, l, nu)?.near_pole || eigenvector_at(xi, l, -nu)?.near_pole {
                count += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{eps_minus, eps_plus};
    use crate::data::g1_seed;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn gl_rule_integrates_polynomials() {
        let (x, w) = gauss_legendre(16);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(30)).sum();
        assert!((s - 2.0 / 31.0).abs() < 1e-14);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn genus_zero_determinant() {
        let xi = LaurentLoop::new(-1, vec![eps_plus() * I, eps_minus() * I]);
        let a = a_from_loop(&xi).unwrap();
        assert_eq!(a, CPoly::constant(c(-1.0, 0.0)));
    }

    #[test]
    fn cauchy_on_circles() {
        let a = CPoly::constant(c(-1.0, 0.0));
        for (i, j) in [(1, 1), (2, 1), (1, 2)] {
            let p = CurvePath::circle(&a, c(0.0, 0.0), 0.7, 1, c(0.0, 1.0), 4).unwrap();
            let v = contour_integral(&p, &Form::Power(i - j - 1));
            let want = if i == j { 2.0 * PI * I } else { c(0.0, 0.0) };
            assert!((v - want).norm() < 1e-12);
        }
    }

    fn g1_pair(u0: f64, uy0: f64, p: f64) -> SpectralPair {
        let xi = g1_seed(u0, uy0);
        curve_from_xi(&xi, 1, p, CurveOpts::default()).unwrap().pair
    }

    #[test]
    fn genus_one_curve_recovery() {
        let (u0, uy0, p) = (0.2, 0.3, 1.7);
        let xi = g1_seed(u0, uy0);
        let fit = curve_from_xi(&xi, 1, p, CurveOpts::default()).unwrap();
        let sp = &fit.pair;
        assert!(fit.fit_residual < 1e-8 && fit.periodicity < 1e-12);
        let aa = uy0 * uy0 + 2.0 * (2.0 * u0).cosh();
        let want_a = CPoly::from_real(&[-1.0, -aa, -1.0]);
        assert!((&sp.a - &want_a).max_abs() < 1e-14);
        let want_b = CPoly::from_real(&[p / 4.0, 0.0, -p / 4.0]);
        assert!((&sp.b - &want_b).max_abs() < 1e-7, "{}", sp.b);
        assert!((sp.b.coeff(0) - SpectralPair::expected_b0(sp.a.coeff(0), p)).norm() < 1e-6);
        assert!((sp.a.coeff(0).norm() - 1.0).abs() < 1e-14);
        let m = sp.membership(1e-7).unwrap();
        assert!(m.member, "{m:?}");
        assert!((sp.period_from_b() - p).abs() < 1e-7);
    }

    #[test]
    fn closing_conditions_genus_one() {
        let sp = g1_pair(0.1, 0.4, 2.0);
        let rep = closing_conditions(&sp, 1e-5).unwrap();
        assert!(rep.pass, "{rep:?}");
        assert_eq!(rep.roots.len(), 1);
        let mut bad = sp.clone();
        bad.b = &bad.b + &CPoly::monomial(c(0.01, 0.0), 1);
        assert!(!closing_conditions(&bad, 1e-5).unwrap().pass);
        let al = sp.inner_roots().unwrap()[0];
        let path = CurvePath::segment(&bad.a, al, 1.0 / al.conj(), probe_nu(&bad.a, al, 1.0 / al.conj()), 8)
            .unwrap();
        let f = Form::DlnMu(bad.b.clone());
        let s1 = contour_integral(&path, &f);
        let s2 = contour_integral(&path.other_sheet(), &f);
        assert!((s1 + s2).norm() < 1e-9 && s1.norm() > 1e-4);
        let cyc = a_cycle_integral(&bad, al, 8).unwrap();
        assert!((cyc.norm() - 2.0 * s1.norm()).abs() < 1e-8 * (1.0 + s1.norm()), "{cyc} vs {s1}");
    }

    #[test]
    fn h_matches_monodromy_log() {
        // on genus 1, ln μ = (p/2) ν/λ, which vanishes at the roots
        let sp = g1_pair(0.1, 0.4, 2.0);
        let al = sp.inner_roots().unwrap()[0];
        let h = h_value(&sp, al, 8).unwrap();
        assert!(h.norm() < 1e-8, "{h}");
    }

    #[test]
    fn serre_pairing_is_twice_identity() {
        let sp = g1_pair(0.0, 0.3, 1.0);
        let v = serre_pairing(&sp.a, 1, 1, 0.05, 20.0, 8).unwrap();
        assert!((v - 2.0).norm() < 1e-10, "{v}");
        let a2 = CPoly::from_roots(&[c(0.3, 0.1), c(-0.2, 0.4), 1.0 / c(0.3, 0.1).conj(), 1.0 / c(-0.2, 0.4).conj()]);
        for i in 1..=2 {
            for j in 1..=2 {
                let v = serre_pairing(&a2, i, j, 0.05, 30.0, 8).unwrap();
                let want = if i == j { 2.0 } else { 0.0 };
                assert!((v - want).norm() < 1e-10, "({i},{j}) {v}");
            }
        }
    }

    #[test]
    fn eigenvectors_and_planted_common_root() {
        let xi = g1_seed(0.2, -0.1);
        let a = a_from_loop(&xi).unwrap();
        for k in 0..6 {
            let l = C64::from_polar(0.3 + 0.3 * k as f64, 0.9 * k as f64);
            let nu = (l * a.eval(l)).sqrt();
            let e = eigenvector_at(&xi, l, nu).unwrap();
            assert!(e.residual < 1e-8 * crate::algebra::mnorm(&xi.eval(l)));
            let f = eigenvector_at(&xi, l, -nu).unwrap();
            assert!((e.v[1] - f.v[1]).norm() > 1e-6);
        }
        assert!(eigenvector_at(&xi, c(0.5, 0.0), c(3.0, 0.0)).is_err());
        assert!(pole_flag_count(&xi, &a, &[0.3, 0.6, 1.5], 24).unwrap() <= 2);
        let sp = g1_pair(0.2, -0.1, 1.0);
        let r = sp.inner_roots().unwrap()[0];
        let planted = SpectralPair { b: &CPoly::from_roots(&[r, 1.0 / r.conj()]) * &CPoly::constant(c(0.0, 1.0)), ..sp };
        let m = planted.membership(1e-7).unwrap();
        assert!(m.resultant[0].hypot(m.resultant[1]) < 1e-10 && !m.member);
    }

    #[test]
    fn panel_refinement_is_stable() {
        let sp = g1_pair(0.3, 0.2, 1.3);
        let mut bad = sp.clone();
        bad.b = &bad.b + &CPoly::monomial(c(0.03, 0.0), 1);
        let al = sp.inner_roots().unwrap()[0];
        let s8 = segment_integral(&bad, al, 8).unwrap();
        let s16 = segment_integral(&bad, al, 16).unwrap();
        assert!((s8 - s16).norm() < 1e-9);
        let h8 = h_value(&bad, al, 8).unwrap();
        let h16 = h_value(&bad, al, 16).unwrap();
        assert!((h8 - h16).norm() < 1e-9);
    }
}
