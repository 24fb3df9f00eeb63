//! The connection `U_λ`, monodromy, and transport of polynomial Killing fields.
//!
//! Frames solve `F' = F U_λ` with `F(0) = 1`; the monodromy is `M_λ = F_λ(p)`.
//! A polynomial Killing field `ζ ∈ P_g` carries its own potential `U(ζ)`,
//! so `ζ' = [ζ, U(ζ)]` is a closed ODE. The assignment is frozen as
//!
//! ```text
//! U(ζ) = ½ (( (α₀-ᾱ₀)/2,        λ⁻¹β₋₁ - γ̄₀ ),
//!           ( γ₀ - λβ̄₋₁,       -(α₀-ᾱ₀)/2  ))
//! V(ζ) = ½ (( i(α₀+ᾱ₀)/2,       i(λ⁻¹β₋₁ + γ̄₀) ),
//!           ( i(γ₀ + λβ̄₋₁),    -i(α₀+ᾱ₀)/2    ))
//! ```
//!
//! with `β₋₁ = ζ̂₋₁[0,1]`, `α₀ = ζ̂₀[0,0]`, `γ₀ = ζ̂₀[1,0]`. Matching against
//! `U_λ` gives `e^u = -iβ₋₁`, `u_x = Re α₀`, `u_y = -Im α₀`, provided the
//! normalization `a(0) = β₋₁γ₀ = -1`.

use std::f64::consts::PI;

use crate::algebra::{a_from_loop, CPoly, LaurentLoop, M2};
use crate::diffpoly::{diagonalization_recursion, Evaluator};
use crate::jets::{extend_jet_with, CauchyData};
use crate::ode::{integrate_with, OdeOpts, OdeStats};
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// `U_λ` at a point.
pub fn u_matrix(u: f64, uy: f64, lam: C64) -> M2 {
    let (ep, em) = (u.exp(), (-u).exp());
    M2::new(
        C64::new(0.0, -uy),
        I * (ep / lam + em),
        I * (lam * ep + em),
        C64::new(0.0, uy),
    ) * C64::new(0.5, 0.0)
}

/// `∂_λ U_λ` at a point.
pub fn du_matrix_dlambda(u: f64, lam: C64) -> M2 {
    let ep = u.exp();
    M2::new(C64::new(0.0, 0.0), -I * ep / (lam * lam), I * ep, C64::new(0.0, 0.0)) * C64::new(0.5, 0.0)
}

/// `V_λ = α_λ(∂_y)` at a point.
pub fn v_matrix(u: f64, ux: f64, lam: C64) -> M2 {
    let (ep, em) = (u.exp(), (-u).exp());
    M2::new(
        C64::new(0.0, ux),
        -ep / lam + em,
        lam * ep - em,
        C64::new(0.0, -ux),
    ) * C64::new(0.5, 0.0)
}

/// `x ↦ U_λ(x)` with trigonometric interpolation of the grid data.
#[derive(Clone, Debug)]
pub struct UField {
    interp: crate::jets::TrigInterp,
    lam: C64,
}

impl UField {
    pub fn lambda(&self) -> C64 {
        self.lam
    }

    pub fn at(&self, x: f64) -> M2 {
        let mut v = [0.0; 2];
        self.interp.eval(x, &mut v);
        u_matrix(v[0], v[1], self.lam)
    }
}

/// The connection of `cd` at spectral parameter `lam`.
pub fn build_u(cd: &CauchyData, lam: C64) -> Result<UField> {
    if lam.norm() == 0.0 {
        return Err(Error::Precondition("U_λ is singular at λ = 0".into()));
    }
    Ok(UField { interp: cd.interpolant(), lam })
}

fn put_m2(m: &M2, out: &mut [f64]) {
    for r in 0..2 {
        for c in 0..2 {
            out[4 * r + 2 * c] = m[(r, c)].re;
            out[4 * r + 2 * c + 1] = m[(r, c)].im;
        }
    }
}

fn get_m2(v: &[f64]) -> M2 {
    M2::new(
        C64::new(v[0], v[1]),
        C64::new(v[2], v[3]),
        C64::new(v[4], v[5]),
        C64::new(v[6], v[7]),
    )
}

/// State of a transported system at one node.
#[derive(Clone, Debug)]
pub struct TransportState {
    pub aux: Vec<f64>,
    pub frames: Vec<M2>,
    pub derivs: Vec<M2>,
}

/// Integrates an auxiliary ODE together with frames `F' = F U` (and,
/// optionally, `G' = G U + F ∂_λU`) for each `λ` in `lams`.
#[allow(clippy::too_many_arguments)]
pub fn transport<A, P>(
    aux0: &[f64],
    aux_rhs: A,
    pot: P,
    lams: &[C64],
    derivative: bool,
    start: Option<&[M2]>,
    x0: f64,
    nodes: &[f64],
    opts: OdeOpts,
) -> Result<(Vec<TransportState>, OdeStats)>
where
    A: Fn(f64, &[f64], &mut [f64]),
    P: Fn(f64, &[f64], C64) -> (M2, M2),
{
    let na = aux0.len();
    let per = if derivative { 16 } else { 8 };
    let nl = lams.len();
    let mut y0 = aux0.to_vec();
    for k in 0..nl {
        let f = start.map_or(M2::identity(), |s| s[k]);
        let mut buf = [0.0; 8];
        put_m2(&f, &mut buf);
        y0.extend_from_slice(&buf);
        if derivative {
            y0.extend_from_slice(&[0.0; 8]);
        }
    }
    let rhs = |x: f64, y: &[f64], d: &mut [f64]| {
        aux_rhs(x, &y[..na], &mut d[..na]);
        for (k, &lam) in lams.iter().enumerate() {
            let off = na + per * k;
            let f = get_m2(&y[off..off + 8]);
            let (u, du) = pot(x, &y[..na], lam);
            put_m2(&(f * u), &mut d[off..off + 8]);
            if derivative {
                let g = get_m2(&y[off + 8..off + 16]);
                put_m2(&(g * u + f * du), &mut d[off + 8..off + 16]);
            }
        }
    };
    let post = |y: &mut [f64]| {
        for k in 0..nl {
            let off = na + per * k;
            let f = get_m2(&y[off..off + 8]);
            let det = f.determinant();
            if (det - 1.0).norm() > 1e-12 {
                let s = det.sqrt();
                put_m2(&(f / s), &mut y[off..off + 8]);
                if derivative {
                    let g = get_m2(&y[off + 8..off + 16]);
                    put_m2(&(g / s), &mut y[off + 8..off + 16]);
                }
            }
        }
    };
    let (out, stats) = integrate_with(rhs, post, x0, &y0, nodes, opts)?;
    let states = out
        .into_iter()
        .map(|y| {
            let mut frames = Vec::with_capacity(nl);
            let mut derivs = Vec::new();
            for k in 0..nl {
                let off = na + per * k;
                frames.push(get_m2(&y[off..off + 8]));
                if derivative {
                    derivs.push(get_m2(&y[off + 8..off + 16]));
                }
            }
            TransportState { aux: y[..na].to_vec(), frames, derivs }
        })
        .collect();
    Ok((states, stats))
}

/// Monodromy at one spectral parameter.
#[derive(Clone, Debug)]
pub struct Monodromy {
    pub lambda: C64,
    pub m: M2,
    /// `∂_λ M`, when requested.
    pub dm: Option<M2>,
    pub mu: C64,
    pub lnmu: C64,
}

/// `(ip/2)(λ^{-1/2} + λ^{1/2})`, the vacuum value and leading asymptote.
pub fn vacuum_lnmu(period: f64, lam: C64) -> C64 {
    let s = lam.sqrt();
    I * (period / 2.0) * (1.0 / s + s)
}

/// Eigenvalues `(μ, 1/μ)` of a unimodular matrix, larger modulus first.
pub fn unimodular_eigenvalues(m: &M2) -> (C64, C64) {
    let h = m.trace() / 2.0;
    let d = (h * h - 1.0).sqrt();
    let (a, b) = (h + d, h - d);
    let big = if a.norm() >= b.norm() { a } else { b };
    (big, 1.0 / big)
}

impl Monodromy {
    fn from_matrix(lambda: C64, m: M2, dm: Option<M2>, reference: C64) -> Self {
        let mut me = Self { lambda, m, dm, mu: C64::new(1.0, 0.0), lnmu: C64::new(0.0, 0.0) };
        me.relabel(reference);
        me
    }

    /// Picks the eigenvalue and `2πik` branch of `ln μ` closest to `reference`.
    pub fn relabel(&mut self, reference: C64) {
        let (a, b) = unimodular_eigenvalues(&self.m);
        let mut best = (f64::INFINITY, a, C64::new(0.0, 0.0));
        for mu in [a, b] {
            let l = mu.ln();
            let k = ((reference.im - l.im) / (2.0 * PI)).round();
            let l = l + I * (2.0 * PI * k);
            let d = (l - reference).norm();
            if d < best.0 {
                best = (d, mu, l);
            }
        }
        self.mu = best.1;
        self.lnmu = best.2;
    }

    /// `d ln μ / dλ = ∂_λ tr M / (μ - μ⁻¹)` on the chosen branch.
    pub fn dlnmu(&self) -> Option<C64> {
        self.dm.map(|d| d.trace() / (self.mu - 1.0 / self.mu))
    }
}

/// Options for [`monodromy_with`].
#[derive(Clone, Copy, Debug)]
pub struct MonodromyOpts {
    pub tol: f64,
    /// Branch reference for `ln μ`; the vacuum asymptote when absent.
    pub reference: Option<C64>,
    pub derivative: bool,
    /// Base point of the period `[s, s + p]`.
    pub base: f64,
}

impl Default for MonodromyOpts {
    fn default() -> Self {
        Self { tol: 1e-10, reference: None, derivative: false, base: 0.0 }
    }
}

fn ode_opts(tol: f64) -> OdeOpts {
    OdeOpts { rtol: tol, atol: tol * 1e-2, ..OdeOpts::default() }
}

/// Monodromy of the Cauchy-data connection at `lam` with default options.
pub fn monodromy(cd: &CauchyData, lam: C64, tol: f64) -> Result<Monodromy> {
    monodromy_with(cd, lam, MonodromyOpts { tol, ..MonodromyOpts::default() })
}

/// Monodromy of the Cauchy-data connection.
pub fn monodromy_with(cd: &CauchyData, lam: C64, o: MonodromyOpts) -> Result<Monodromy> {
    let field = build_u(cd, lam)?;
    let interp = &field.interp;
    let pot = |x: f64, _: &[f64], l: C64| {
        let mut v = [0.0; 2];
        interp.eval(x, &mut v);
        (u_matrix(v[0], v[1], l), du_matrix_dlambda(v[0], l))
    };
    let (st, _) = transport(
        &[],
        |_, _, _| {},
        pot,
        &[lam],
        o.derivative,
        None,
        o.base,
        &[o.base + cd.period],
        ode_opts(o.tol),
    )?;
    let s = &st[0];
    let reference = o.reference.unwrap_or_else(|| vacuum_lnmu(cd.period, lam));
    Ok(Monodromy::from_matrix(lam, s.frames[0], s.derivs.first().copied(), reference))
}

/// `ln μ` along a path of spectral parameters, each branch chosen closest to
/// the previous value (the first to the vacuum asymptote).
pub fn lnmu_sweep(cd: &CauchyData, lams: &[C64], tol: f64) -> Result<Vec<Monodromy>> {
    let mut out: Vec<Monodromy> = Vec::with_capacity(lams.len());
    for &l in lams {
        let reference = match out.last() {
            Some(prev) => {
                prev.lnmu - vacuum_lnmu(cd.period, prev.lambda) + vacuum_lnmu(cd.period, l)
            }
            None => vacuum_lnmu(cd.period, l),
        };
        let o = MonodromyOpts { tol, reference: Some(reference), ..MonodromyOpts::default() };
        out.push(monodromy_with(cd, l, o)?);
    }
    Ok(out)
}

/// Coefficients `c_m = ∫_0^p b_m[0,0] dx` of `ln μ = Σ c_m (√λ)^m`, for
/// `m = -1..=max_m` (index `m + 1`).
pub fn lnmu_expansion(cd: &CauchyData, max_m: usize) -> Result<Vec<C64>> {
    let diag = diagonalization_recursion(max_m.max(1))?;
    let jet = extend_jet_with(cd, max_m.max(2), max_m.max(crate::jets::DEFAULT_MAX_JET_ORDER))?;
    let mut ev = Evaluator::new(&jet);
    let mut out = Vec::with_capacity(max_m + 2);
    for m in -1..=(max_m as i32) {
        let dens = ev.eval(diag.b(m).get(0, 0))?;
        out.push(cd.integrate_c(&dens));
    }
    Ok(out)
}

/// Evaluates `Σ c_m (√λ)^m` with coefficients as returned by
/// [`lnmu_expansion`], truncated after `(√λ)^upto`.
pub fn lnmu_series(coeffs: &[C64], lam: C64, upto: i32) -> C64 {
    let s = lam.sqrt();
    coeffs
        .iter()
        .enumerate()
        .take((upto + 2).max(0) as usize)
        .map(|(i, c)| c * s.powi(i as i32 - 1))
        .sum()
}

// ---------------------------------------------------------------------------
// Polynomial Killing fields
// ---------------------------------------------------------------------------

fn zeta_parts(z: &LaurentLoop) -> (C64, C64, C64) {
    let zm1 = z.coeff(-1);
    let z0 = z.coeff(0);
    (zm1[(0, 1)], z0[(0, 0)], z0[(1, 0)])
}

/// `U(ζ)` as a loop with powers `-1..=1`.
pub fn u_of_zeta(z: &LaurentLoop) -> LaurentLoop {
    let (b, a, g) = zeta_parts(z);
    let h = (a - a.conj()) / 2.0;
    let zero = C64::new(0.0, 0.0);
    LaurentLoop::new(
        -1,
        vec![
            M2::new(zero, b, zero, zero) * C64::new(0.5, 0.0),
            M2::new(h, -g.conj(), g, -h) * C64::new(0.5, 0.0),
            M2::new(zero, zero, -b.conj(), zero) * C64::new(0.5, 0.0),
        ],
    )
}

/// `V(ζ)` as a loop with powers `-1..=1`.
pub fn v_of_zeta(z: &LaurentLoop) -> LaurentLoop {
    let (b, a, g) = zeta_parts(z);
    let h = I * (a + a.conj()) / 2.0;
    let zero = C64::new(0.0, 0.0);
    LaurentLoop::new(
        -1,
        vec![
            M2::new(zero, I * b, zero, zero) * C64::new(0.5, 0.0),
            M2::new(h, I * g.conj(), I * g, -h) * C64::new(0.5, 0.0),
            M2::new(zero, zero, I * b.conj(), zero) * C64::new(0.5, 0.0),
        ],
    )
}

/// Values of `u, u_x, u_y` read off a Killing field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldValues {
    pub u: f64,
    pub ux: f64,
    pub uy: f64,
}

/// Relative tolerance on `Re β₋₁` before reality is declared lost.
pub const REALITY_TOL: f64 = 1e-8;

/// Reads `(u, u_x, u_y)` from `ζ`, checking `β₋₁ ∈ iR⁺`.
pub fn extract_fields(z: &LaurentLoop) -> Result<FieldValues> {
    let (b, a, _) = zeta_parts(z);
    if b.im <= 0.0 || b.re.abs() > REALITY_TOL * b.im {
        return Err(Error::RealityLoss(format!("β₋₁ = {b} left iR⁺")));
    }
    Ok(FieldValues { u: b.im.ln(), ux: a.re, uy: -a.im })
}

/// A Killing field sampled along `x` or `y`.
#[derive(Clone, Debug)]
pub struct KillingTrajectory {
    pub genus: usize,
    pub nodes: Vec<f64>,
    pub zeta: Vec<LaurentLoop>,
    pub fields: Vec<FieldValues>,
    pub a: Vec<CPoly>,
}

impl KillingTrajectory {
    /// Largest coefficient drift of `a(λ)` relative to its value at the
    /// first node, scaled by the largest initial coefficient.
    pub fn max_a_drift(&self) -> f64 {
        let a0 = &self.a[0];
        let scale = a0.max_abs().max(1e-300);
        self.a.iter().map(|a| (a - a0).max_abs() / scale).fold(0.0, f64::max)
    }

    /// Cauchy data on the sampled nodes, which must be `k p / N`, `k < N`.
    pub fn cauchy_data(&self, period: f64) -> Result<CauchyData> {
        let n = self.nodes.len();
        for (k, &x) in self.nodes.iter().enumerate() {
            if (x - k as f64 * period / n as f64).abs() > 1e-12 * period {
                return Err(Error::Precondition("nodes are not a uniform periodic grid".into()));
            }
        }
        CauchyData::new(
            self.fields.iter().map(|f| f.u).collect(),
            self.fields.iter().map(|f| f.uy).collect(),
            period,
        )
    }

    /// CSV with the node coordinate then flattened `[re, im]` coefficients.
    pub fn to_csv(&self) -> String {
        let g = self.genus as i32;
        let mut s = String::from("t");
        for n in -1..=g {
            for e in ["00", "01", "10", "11"] {
                s.push_str(&format!(",re{e}_{n},im{e}_{n}"));
            }
        }
        s.push_str(",u,ux,uy\n");
        for ((t, z), f) in self.nodes.iter().zip(&self.zeta).zip(&self.fields) {
            s.push_str(&format!("{t:.17e}"));
            for v in z.to_real_vec(-1, g) {
                s.push_str(&format!(",{v:.17e}"));
            }
            s.push_str(&format!(",{:.17e},{:.17e},{:.17e}\n", f.u, f.ux, f.uy));
        }
        s
    }
}

fn check_seed(xi: &LaurentLoop, g: usize) -> Result<()> {
    if !crate::algebra::pg_membership_tol(xi, g, 1e-10) {
        return Err(Error::Precondition(format!("ξ is not in P_{g}")));
    }
    Ok(())
}

fn flow(
    xi: &LaurentLoop,
    g: usize,
    nodes: &[f64],
    tol: f64,
    pot: fn(&LaurentLoop) -> LaurentLoop,
) -> Result<KillingTrajectory> {
    check_seed(xi, g)?;
    let gi = g as i32;
    let y0 = xi.to_real_vec(-1, gi);
    let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
        let z = LaurentLoop::from_real_vec(-1, y);
        let c = z.comm(&pot(&z)).window(-1, gi);
        d.copy_from_slice(&c.to_real_vec(-1, gi));
    };
    let out = crate::ode::integrate(rhs, 0.0, &y0, nodes, ode_opts(tol))?;
    let mut traj = KillingTrajectory {
        genus: g,
        nodes: nodes.to_vec(),
        zeta: Vec::with_capacity(nodes.len()),
        fields: Vec::with_capacity(nodes.len()),
        a: Vec::with_capacity(nodes.len()),
    };
    for y in out {
        let z = LaurentLoop::from_real_vec(-1, &y);
        traj.fields.push(extract_fields(&z)?);
        traj.a.push(a_from_loop(&z)?);
        traj.zeta.push(z);
    }
    Ok(traj)
}

/// Integrates `ζ' = [ζ, U(ζ)]` from `x = 0` through `nodes`.
pub fn killing_flow(xi: &LaurentLoop, g: usize, nodes: &[f64], tol: f64) -> Result<KillingTrajectory> {
    flow(xi, g, nodes, tol, u_of_zeta)
}

/// Integrates `∂_y ζ = [ζ, V(ζ)]` from `y = 0` through `nodes`.
pub fn y_flow(xi: &LaurentLoop, g: usize, nodes: &[f64], tol: f64) -> Result<KillingTrajectory> {
    flow(xi, g, nodes, tol, v_of_zeta)
}

/// Monodromy of the Killing-field potential `U(ζ(x))` over `[0, period]`.
pub fn killing_monodromy(
    xi: &LaurentLoop,
    g: usize,
    period: f64,
    lams: &[C64],
    derivative: bool,
    tol: f64,
) -> Result<(Vec<M2>, Vec<M2>, LaurentLoop)> {
    check_seed(xi, g)?;
    let gi = g as i32;
    let y0 = xi.to_real_vec(-1, gi);
    let rhs = |_: f64, y: &[f64], d: &mut [f64]| {
        let z = LaurentLoop::from_real_vec(-1, y);
        let c = z.comm(&u_of_zeta(&z)).window(-1, gi);
        d.copy_from_slice(&c.to_real_vec(-1, gi));
    };
    let pot = |_: f64, y: &[f64], l: C64| {
        let z = LaurentLoop::from_real_vec(-1, y);
        let u = u_of_zeta(&z);
        (u.eval(l), u.coeff(-1) * (-1.0 / (l * l)) + u.coeff(1))
    };
    let (st, _) = transport(&y0, rhs, pot, lams, derivative, None, 0.0, &[period], ode_opts(tol))?;
    let s = &st[0];
    Ok((s.frames.clone(), s.derivs.clone(), LaurentLoop::from_real_vec(-1, &s.aux)))
}

// ---------------------------------------------------------------------------
// Surface export
// ---------------------------------------------------------------------------

/// Vertices of the Sym-Bobenko immersion on an `(x, y)` grid.
#[derive(Clone, Debug)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    /// `f = F_{λ₁} F_{λ₀}^{-1}`, row-major over `(x, y)` with `y` fastest.
    pub su2: Vec<M2>,
    pub vertices: Vec<[f64; 3]>,
}

impl Mesh {
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {:.12} {:.12} {:.12}\n", v[0], v[1], v[2]));
        }
        for i in 0..self.nx.saturating_sub(1) {
            for j in 0..self.ny.saturating_sub(1) {
                let k = |a: usize, b: usize| a * self.ny + b + 1;
                s.push_str(&format!("f {} {} {} {}\n", k(i, j), k(i + 1, j), k(i + 1, j + 1), k(i, j + 1)));
            }
        }
        s
    }
}

/// Stereographic projection of `((a, b), (-b̄, ā))` from `-1 ∈ S³`.
pub fn stereographic(f: &M2) -> [f64; 3] {
    let a = f[(0, 0)];
    let b = f[(0, 1)];
    let d = 1.0 + a.re;
    [a.im / d, b.re / d, b.im / d]
}

/// Frames at `λ₀ = e^{it₀}`, `λ₁ = e^{it₁}` over the grid
/// `x_i = i·hx`, `y_j = j·hy`, combined into `f = F_{λ₁}F_{λ₀}^{-1}`.
#[allow(clippy::too_many_arguments)]
pub fn sym_bobenko_export(
    xi: &LaurentLoop,
    g: usize,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
    t0: f64,
    t1: f64,
    tol: f64,
) -> Result<Mesh> {
    check_seed(xi, g)?;
    let l0 = C64::from_polar(1.0, t0);
    let l1 = C64::from_polar(1.0, t1);
    if (l0 - l1).norm() < 1e-12 {
        return Err(Error::Precondition("λ₀ and λ₁ coincide".into()));
    }
    if nx == 0 || ny == 0 {
        return Err(Error::Precondition("empty grid".into()));
    }
    let gi = g as i32;
    let lams = [l0, l1];
    let mk_rhs = |pot: fn(&LaurentLoop) -> LaurentLoop| {
        move |_: f64, y: &[f64], d: &mut [f64]| {
            let z = LaurentLoop::from_real_vec(-1, y);
            let c = z.comm(&pot(&z)).window(-1, gi);
            d.copy_from_slice(&c.to_real_vec(-1, gi));
        }
    };
    let mk_pot = |pot: fn(&LaurentLoop) -> LaurentLoop| {
        move |_: f64, y: &[f64], l: C64| (pot(&LaurentLoop::from_real_vec(-1, y)).eval(l), M2::zeros())
    };
    let xs: Vec<f64> = (0..nx).map(|i| i as f64 * hx).collect();
    let ys: Vec<f64> = (0..ny).map(|j| j as f64 * hy).collect();
    let y0 = xi.to_real_vec(-1, gi);
    let (row, _) = transport(&y0, mk_rhs(u_of_zeta), mk_pot(u_of_zeta), &lams, false, None, 0.0, &xs, ode_opts(tol))?;
    let mut su2 = Vec::with_capacity(nx * ny);
    for s in &row {
        let (col, _) = transport(
            &s.aux,
            mk_rhs(v_of_zeta),
            mk_pot(v_of_zeta),
            &lams,
            false,
            Some(&s.frames),
            0.0,
            &ys,
            ode_opts(tol),
        )?;
        for c in col {
            let f0 = c.frames[0];
            let f1 = c.frames[1];
            let inv = f0.try_inverse().ok_or_else(|| Error::Numerical("singular frame".into()))?;
            su2.push(f1 * inv);
        }
    }
    let vertices = su2.iter().map(stereographic).collect();
    Ok(Mesh { nx, ny, su2, vertices })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{mnorm, pg_membership_tol};
    use crate::data::{g1_seed, g2_seed};
    use crate::jets::Mode;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn u_examples() {
        let l = c(0.3, 0.4);
        let u = u_matrix(0.0, 0.0, l);
        let want = M2::new(c(0.0, 0.0), I * (1.0 / l + 1.0), I * (l + 1.0), c(0.0, 0.0)) * C64::new(0.5, 0.0);
        assert!(mnorm(&(u - want)) < 1e-15);
        let cd = CauchyData::from_modes(32, 2.0, 0.1, &[Mode { m: 1, cos: 0.2, sin: 0.1 }], 0.3, &[])
            .unwrap();
        let f = build_u(&cd, C64::from_polar(1.0, 0.7)).unwrap();
        for k in 0..10 {
            let m = f.at(k as f64 * 0.17);
            assert!(m.trace().norm() < 1e-15);
            assert!(mnorm(&(m + m.adjoint())) < 1e-14);
        }
        assert!(build_u(&cd, c(0.0, 0.0)).is_err());
    }

    #[test]
    fn vacuum_monodromy_closed_form() {
        let p = 2.0 * PI;
        let cd = CauchyData::vacuum(16, p).unwrap();
        let l = c(0.09, 0.0);
        let m = monodromy(&cd, l, 1e-12).unwrap();
        let want = I * (p / 2.0) * (10.0 / 3.0 + 0.3);
        assert!((m.lnmu - want).norm() < 1e-8, "{} vs {want}", m.lnmu);
        assert!((m.m.determinant() - 1.0).norm() < 1e-9);
    }

    #[test]
    fn monodromy_invariants() {
        let p = 2.0 * PI;
        let cd = CauchyData::from_modes(
            64,
            p,
            0.05,
            &[Mode { m: 1, cos: 0.2, sin: -0.1 }],
            0.1,
            &[Mode { m: 2, cos: 0.1, sin: 0.05 }],
        )
        .unwrap();
        for k in 0..5 {
            let l = C64::from_polar(0.3 + 0.2 * k as f64, 0.4 * k as f64 - 0.8);
            let a = monodromy(&cd, l, 1e-11).unwrap();
            assert!((a.m.determinant() - 1.0).norm() < 1e-9);
            let o = MonodromyOpts { tol: 1e-11, base: 1.3, ..MonodromyOpts::default() };
            let b = monodromy_with(&cd, l, o).unwrap();
            assert!((a.m.trace() - b.m.trace()).norm() < 1e-8 * (1.0 + a.m.trace().norm()));
        }
        let u = monodromy(&cd, C64::from_polar(1.0, 1.1), 1e-11).unwrap();
        assert!(mnorm(&(u.m * u.m.adjoint() - M2::identity())) < 1e-8);
    }

    #[test]
    fn dlnmu_matches_difference() {
        let p = 2.0;
        let cd = CauchyData::from_modes(32, p, 0.0, &[Mode { m: 1, cos: 0.2, sin: 0.0 }], 0.0, &[])
            .unwrap();
        let l = c(0.5, 0.2);
        let o = MonodromyOpts { tol: 1e-12, derivative: true, ..MonodromyOpts::default() };
        let m = monodromy_with(&cd, l, o).unwrap();
        let h = 1e-4;
        let r = Some(m.lnmu);
        let mp = monodromy_with(&cd, l + h, MonodromyOpts { tol: 1e-12, reference: r, ..o }).unwrap();
        let mm = monodromy_with(&cd, l - h, MonodromyOpts { tol: 1e-12, reference: r, ..o }).unwrap();
        let fd = (mp.lnmu - mm.lnmu) / (2.0 * h);
        assert!((fd - m.dlnmu().unwrap()).norm() < 1e-6 * (1.0 + fd.norm()));
    }

    #[test]
    fn expansion_anchors() {
        let p = 2.0 * PI;
        let cd = CauchyData::vacuum(32, p).unwrap();
        let c0 = lnmu_expansion(&cd, 5).unwrap();
        assert!((c0[0] - I * p / 2.0).norm() < 1e-14);
        assert!(c0[1].norm() < 1e-14);
        assert!((c0[2] - I * p / 2.0).norm() < 1e-14);
        assert!(c0[3..].iter().all(|v| v.norm() < 1e-14));
        let cd = CauchyData::from_modes(
            64,
            p,
            0.1,
            &[Mode { m: 1, cos: 0.2, sin: 0.0 }],
            0.0,
            &[Mode { m: 2, cos: 0.1, sin: 0.1 }],
        )
        .unwrap();
        let cs = lnmu_expansion(&cd, 4).unwrap();
        assert!((cs[0] - I * p / 2.0).norm() < 1e-13);
        assert!(cs[1].norm() < 1e-13);
        let l = c(0.01, 0.0);
        let m = monodromy_with(
            &cd,
            l,
            MonodromyOpts { tol: 1e-12, reference: Some(lnmu_series(&cs, l, 4)), ..Default::default() },
        )
        .unwrap();
        assert!((m.lnmu - lnmu_series(&cs, l, 4)).norm() < 1e-5);
    }

    #[test]
    fn genus_one_is_stationary_and_matches_u() {
        let xi = g1_seed(0.2, 0.3);
        let nodes: Vec<f64> = (1..=4).map(|k| k as f64).collect();
        let t = killing_flow(&xi, 1, &nodes, 1e-12).unwrap();
        assert!(t.max_a_drift() < 1e-12);
        assert!((t.fields[0].u - 0.2).abs() < 1e-14 && (t.fields[0].uy - 0.3).abs() < 1e-14);
        let u = u_of_zeta(&xi);
        assert!(mnorm(&(u.eval(c(0.4, 0.1)) - u_matrix(0.2, 0.3, c(0.4, 0.1)))) < 1e-14);
        let v = v_of_zeta(&xi);
        assert!(mnorm(&(v.eval(c(0.4, 0.1)) - v_matrix(0.2, 0.0, c(0.4, 0.1)))) < 1e-14);
    }

    #[test]
    fn genus_two_x_flow() {
        let xi = g2_seed(0.1, 0.2, -0.1, c(0.3, -0.2));
        assert!(pg_membership_tol(&xi, 2, 1e-14));
        let n = 64;
        let span = 2.0;
        let nodes: Vec<f64> = (0..n).map(|k| k as f64 * span / n as f64).collect();
        let t = killing_flow(&xi, 2, &nodes, 1e-12).unwrap();
        assert!(t.max_a_drift() < 1e-9, "{}", t.max_a_drift());
        assert!(t.zeta.iter().all(|z| pg_membership_tol(z, 2, 1e-9)));
        // u_x from the Killing field agrees with a finite difference of u
        let h = span / n as f64;
        for k in 2..n - 2 {
            let f = |j: usize| t.fields[j].u;
            let d = (f(k - 2) - 8.0 * f(k - 1) + 8.0 * f(k + 1) - f(k + 2)) / (12.0 * h);
            assert!((d - t.fields[k].ux).abs() < 1e-5, "{d} vs {}", t.fields[k].ux);
        }
    }

    #[test]
    fn y_flow_patch_solves_pde() {
        let xi = g2_seed(0.1, 0.2, -0.1, c(0.3, -0.2));
        let h = 0.05;
        let nx = 9;
        let ny = 9;
        let xs: Vec<f64> = (0..nx).map(|k| k as f64 * h).collect();
        let ys: Vec<f64> = (0..ny).map(|k| k as f64 * h).collect();
        let row = killing_flow(&xi, 2, &xs, 1e-13).unwrap();
        let mut u = vec![vec![0.0; ny]; nx];
        for (i, z) in row.zeta.iter().enumerate() {
            let col = y_flow(z, 2, &ys, 1e-13).unwrap();
            assert!(col.max_a_drift() < 1e-9);
            for j in 0..ny {
                u[i][j] = col.fields[j].u;
            }
        }
        let d2 = |f: [f64; 5]| (-f[0] + 16.0 * f[1] - 30.0 * f[2] + 16.0 * f[3] - f[4]) / (12.0 * h * h);
        for i in 2..nx - 2 {
            for j in 2..ny - 2 {
                let uxx = d2([u[i - 2][j], u[i - 1][j], u[i][j], u[i + 1][j], u[i + 2][j]]);
                let uyy = d2([u[i][j - 2], u[i][j - 1], u[i][j], u[i][j + 1], u[i][j + 2]]);
                let r = uxx + uyy + 2.0 * (2.0 * u[i][j]).sinh();
                assert!(r.abs() < 1e-6, "residual {r} at ({i},{j})");
            }
        }
        let id = y_flow(&xi, 2, &[0.0], 1e-12).unwrap();
        assert_eq!(id.zeta[0], xi.window(-1, 2));
    }

    #[test]
    fn mesh_is_unitary_and_based() {
        let xi = g1_seed(0.0, 0.4);
        let m = sym_bobenko_export(&xi, 1, 4, 3, 0.2, 0.2, 0.3, -0.5, 1e-11).unwrap();
        assert!(mnorm(&(m.su2[0] - M2::identity())) < 1e-12);
        for f in &m.su2 {
            assert!((f.determinant() - 1.0).norm() < 1e-8);
            assert!(mnorm(&(f * f.adjoint() - M2::identity())) < 1e-8);
        }
        assert!(m.to_obj().lines().filter(|l| l.starts_with("f ")).count() == 6);
        assert!(sym_bobenko_export(&xi, 1, 2, 2, 0.1, 0.1, 0.3, 0.3, 1e-10).is_err());
    }
}
