//! Complex polynomials, sl(2) Laurent loops and the loop-algebra structure.
//!
//! A [`CPoly`] stores ascending coefficients with trailing zeros stripped.
//! A [`LaurentLoop`] stores a contiguous run of 2x2 complex coefficients
//! starting at power `lo`. Both serialize as `[re, im]` pairs keyed by power.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, Matrix2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// 2x2 complex matrix.
pub type M2 = Matrix2<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Upper nilpotent generator `ε₊ = ((0,1),(0,0))`.
pub fn eps_plus() -> M2 {
    M2::new(ZERO, ONE, ZERO, ZERO)
}

/// Lower nilpotent generator `ε₋ = ((0,0),(1,0))`.
pub fn eps_minus() -> M2 {
    M2::new(ZERO, ZERO, ONE, ZERO)
}

/// `diag(1, -1)`.
pub fn hdiag() -> M2 {
    M2::new(ONE, ZERO, ZERO, -ONE)
}

pub fn m2(a: C64, b: C64, c: C64, d: C64) -> M2 {
    M2::new(a, b, c, d)
}

/// Commutator `[a, b] = ab - ba`.
pub fn comm(a: &M2, b: &M2) -> M2 {
    a * b - b * a
}

/// Largest entry modulus.
pub fn mnorm(a: &M2) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

// ---------------------------------------------------------------------------
// CPoly
// ---------------------------------------------------------------------------

/// Complex polynomial with ascending coefficients; trailing zeros stripped.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct CPoly {
    coeffs: Vec<C64>,
}

impl CPoly {
    pub fn new(mut coeffs: Vec<C64>) -> Self {
        while coeffs.last().is_some_and(|c| *c == ZERO) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn constant(c: C64) -> Self {
        Self::new(vec![c])
    }

    /// The monomial `c λ^k`.
    pub fn monomial(c: C64, k: usize) -> Self {
        let mut v = vec![ZERO; k + 1];
        v[k] = c;
        Self::new(v)
    }

    pub fn from_real(c: &[f64]) -> Self {
        Self::new(c.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Monic polynomial with the given roots.
    pub fn from_roots(roots: &[C64]) -> Self {
        let mut p = Self::constant(ONE);
        for &r in roots {
            p = &p * &Self::new(vec![-r, ONE]);
        }
        p
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `λ^k` (zero beyond the degree).
    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * x + c)
    }

    pub fn derivative(&self) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.coeffs.iter().map(|&c| c * s).collect())
    }

    /// Multiply by `λ^k`.
    pub fn shift(&self, k: usize) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        let mut v = vec![ZERO; k];
        v.extend_from_slice(&self.coeffs);
        Self::new(v)
    }

    /// Coefficient vector padded (or truncated) to `len` entries.
    pub fn padded(&self, len: usize) -> Vec<C64> {
        (0..len).map(|k| self.coeff(k)).collect()
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// The mirror `λ^n conj(q(1/conj λ))` for a formal degree bound `n`.
    pub fn mirror(&self, n: usize) -> Self {
        Self::new((0..=n).map(|k| self.coeff(n - k).conj()).collect())
    }
}

impl std::ops::Add for &CPoly {
    type Output = CPoly;
    fn add(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) + o.coeff(k)).collect())
    }
}

impl std::ops::Sub for &CPoly {
    type Output = CPoly;
    fn sub(self, o: &CPoly) -> CPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        CPoly::new((0..n).map(|k| self.coeff(k) - o.coeff(k)).collect())
    }
}

impl std::ops::Mul for &CPoly {
    type Output = CPoly;
    fn mul(self, o: &CPoly) -> CPoly {
        if self.is_zero() || o.is_zero() {
            return CPoly::zero();
        }
        let mut v = vec![ZERO; self.coeffs.len() + o.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in o.coeffs.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        CPoly::new(v)
    }
}

impl fmt::Display for CPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let terms: Vec<String> = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != ZERO)
            .map(|(k, c)| match k {
                0 => format!("({:.6e}{:+.6e}i)", c.re, c.im),
                _ => format!("({:.6e}{:+.6e}i)λ^{k}", c.re, c.im),
            })
            .collect();
        write!(f, "{}", terms.join(" + "))
    }
}

#[derive(Serialize, Deserialize)]
struct PolyRepr {
    coeffs: BTreeMap<usize, [f64; 2]>,
}

impl Serialize for CPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PolyRepr {
            coeffs: self
                .coeffs
                .iter()
                .enumerate()
                .map(|(k, c)| (k, [c.re, c.im]))
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PolyRepr::deserialize(d)?;
        let n = r.coeffs.keys().next_back().map_or(0, |k| k + 1);
        let mut v = vec![ZERO; n];
        for (k, [re, im]) in r.coeffs {
            v[k] = C64::new(re, im);
        }
        Ok(CPoly::new(v))
    }
}

// ---------------------------------------------------------------------------
// Reality conditions
// ---------------------------------------------------------------------------

/// Which symmetry a spectral polynomial is expected to satisfy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PolyKind {
    /// `λ^{2g} conj(a(1/λ̄)) = a(λ)`, `|a(0)| = 1`, `λ^{-g} a ≤ 0` on the circle.
    A,
    /// `λ^{g+1} conj(b(1/λ̄)) = -b(λ)`.
    B,
    /// `λ^{g+1} conj(c(1/λ̄)) = c(λ)`.
    C,
}

/// Tolerances for [`poly_reality_check`].
#[derive(Clone, Copy, Debug)]
pub struct RealityOpts {
    pub rel_tol: f64,
    pub circle_samples: usize,
}

impl Default for RealityOpts {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            circle_samples: 64,
        }
    }
}

/// Checks the coefficient symmetry of `q` for the given kind and genus.
///
/// For `A` also checks `|a(0)| = 1` and the sign of `λ^{-g} a(λ)` on
/// `opts.circle_samples` points of the unit circle.
pub fn poly_reality_check(q: &CPoly, kind: PolyKind, g: usize, opts: RealityOpts) -> Result<bool> {
    let deg = q
        .degree()
        .ok_or_else(|| Error::MalformedInput("reality check of the zero polynomial".into()))?;
    let n = match kind {
        PolyKind::A => 2 * g,
        PolyKind::B | PolyKind::C => g + 1,
    };
    if deg > n {
        return Err(Error::MalformedInput(format!(
            "degree {deg} exceeds {n} for genus {g}"
        )));
    }
    let scale = q.max_abs();
    let tol = opts.rel_tol * scale;
    let sign = if kind == PolyKind::B { -1.0 } else { 1.0 };
    for k in 0..=n {
        if (q.coeff(n - k).conj() * sign - q.coeff(k)).norm() > tol {
            return Ok(false);
        }
    }
    if kind == PolyKind::A {
        if (q.coeff(0).norm() - 1.0).abs() > opts.rel_tol.max(1e-12) * 10.0 {
            return Ok(false);
        }
        for j in 0..opts.circle_samples {
            let th = 2.0 * std::f64::consts::PI * j as f64 / opts.circle_samples as f64;
            let lam = C64::from_polar(1.0, th);
            let v = q.eval(lam) * lam.powi(-(g as i32));
            if v.im.abs() > tol * 10.0 || v.re > tol * 10.0 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Roots
// ---------------------------------------------------------------------------

/// A polynomial root with a multiplicity flag.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub value: C64,
    /// Another root lies closer than the closeness threshold.
    pub multiple: bool,
}

/// Roots from the eigenvalues of the companion matrix, polished by Newton.
///
/// Two roots closer than `close_tol * (1 + |root|)` are both flagged.
pub fn poly_roots_with(q: &CPoly, close_tol: f64) -> Result<Vec<Root>> {
    let deg = q
        .degree()
        .ok_or_else(|| Error::MalformedInput("roots of the zero polynomial".into()))?;
    if deg == 0 {
        return Err(Error::MalformedInput("roots of a constant polynomial".into()));
    }
    let lead = q.coeff(deg);
    let mut comp = DMatrix::<C64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = ONE;
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -q.coeff(i) / lead;
    }
    let eig = comp
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Numerical("companion Schur form failed".into()))?;
    let dq = q.derivative();
    let mut vals: Vec<C64> = eig.iter().copied().collect();
    for r in vals.iter_mut() {
        for _ in 0..8 {
            let f = q.eval(*r);
            let d = dq.eval(*r);
            if d.norm() == 0.0 {
                break;
            }
            let cand = *r - f / d;
            if q.eval(cand).norm() < f.norm() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    let roots = vals
        .iter()
        .enumerate()
        .map(|(i, &v)| Root {
            value: v,
            multiple: vals
                .iter()
                .enumerate()
                .any(|(j, &w)| j != i && (v - w).norm() < close_tol * (1.0 + v.norm())),
        })
        .collect();
    Ok(roots)
}

/// [`poly_roots_with`] at the default threshold `1e-7`.
pub fn poly_roots(q: &CPoly) -> Result<Vec<Root>> {
    poly_roots_with(q, 1e-7)
}

/// Resultant `lc(a)^{deg b} Π b(α_i)` over the roots of `a`.
pub fn resultant(a: &CPoly, b: &CPoly) -> Result<C64> {
    let da = a
        .degree()
        .ok_or_else(|| Error::MalformedInput("resultant with zero polynomial".into()))?;
    let db = b
        .degree()
        .ok_or_else(|| Error::MalformedInput("resultant with zero polynomial".into()))?;
    if da == 0 {
        return Ok(a.coeff(0).powi(db as i32));
    }
    let roots = poly_roots(a)?;
    Ok(roots
        .iter()
        .fold(a.coeff(da).powi(db as i32), |acc, r| acc * b.eval(r.value)))
}

// ---------------------------------------------------------------------------
// LaurentLoop
// ---------------------------------------------------------------------------

/// Finite Laurent series in `λ` with 2x2 complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentLoop {
    lo: i32,
    coeffs: Vec<M2>,
}

impl Default for LaurentLoop {
    fn default() -> Self {
        Self::zero()
    }
}

impl LaurentLoop {
    /// Coefficients for powers `lo, lo+1, ...`.
    pub fn new(lo: i32, coeffs: Vec<M2>) -> Self {
        Self { lo, coeffs }
    }

    pub fn zero() -> Self {
        Self {
            lo: 0,
            coeffs: Vec::new(),
        }
    }

    /// Single term `m λ^n`.
    pub fn monomial(m: M2, n: i32) -> Self {
        Self::new(n, vec![m])
    }

    /// Zero loop spanning powers `lo..=hi`.
    pub fn zeros(lo: i32, hi: i32) -> Self {
        Self::new(lo, vec![M2::zeros(); (hi - lo + 1).max(0) as usize])
    }

    pub fn lo(&self) -> i32 {
        self.lo
    }

    /// Highest stored power (`lo - 1` when empty).
    pub fn hi(&self) -> i32 {
        self.lo + self.coeffs.len() as i32 - 1
    }

    pub fn coeffs(&self) -> &[M2] {
        &self.coeffs
    }

    /// Coefficient of `λ^n`.
    pub fn coeff(&self, n: i32) -> M2 {
        let k = n - self.lo;
        if k < 0 || k as usize >= self.coeffs.len() {
            M2::zeros()
        } else {
            self.coeffs[k as usize]
        }
    }

    /// Mutable coefficient of `λ^n`, extending the range when necessary.
    pub fn coeff_mut(&mut self, n: i32) -> &mut M2 {
        if self.coeffs.is_empty() {
            self.lo = n;
            self.coeffs.push(M2::zeros());
        }
        while n < self.lo {
            self.coeffs.insert(0, M2::zeros());
            self.lo -= 1;
        }
        while n > self.hi() {
            self.coeffs.push(M2::zeros());
        }
        let k = (n - self.lo) as usize;
        &mut self.coeffs[k]
    }

    /// Iterator over `(power, coefficient)`.
    pub fn iter(&self) -> impl Iterator<Item = (i32, &M2)> {
        self.coeffs
            .iter()
            .enumerate()
            .map(move |(k, m)| (self.lo + k as i32, m))
    }

    /// Restriction to powers `lo..=hi` (zero padded).
    pub fn window(&self, lo: i32, hi: i32) -> Self {
        Self::new(lo, (lo..=hi).map(|n| self.coeff(n)).collect())
    }

    /// Drops exactly-zero coefficients at both ends.
    pub fn trimmed(&self) -> Self {
        let nz: Vec<usize> = (0..self.coeffs.len())
            .filter(|&k| self.coeffs[k] != M2::zeros())
            .collect();
        match (nz.first(), nz.last()) {
            (Some(&a), Some(&b)) => Self::new(self.lo + a as i32, self.coeffs[a..=b].to_vec()),
            _ => Self::zero(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self::new(self.lo, self.coeffs.iter().map(|m| m * s).collect())
    }

    /// Multiply by `λ^k`.
    pub fn shift(&self, k: i32) -> Self {
        Self::new(self.lo + k, self.coeffs.clone())
    }

    pub fn eval(&self, lam: C64) -> M2 {
        let mut acc = M2::zeros();
        let mut pw = lam.powi(self.lo);
        for m in &self.coeffs {
            acc += m * pw;
            pw *= lam;
        }
        acc
    }

    /// Commutator loop `[self, o]`.
    pub fn comm(&self, o: &Self) -> Self {
        &(self * o) - &(o * self)
    }

    /// Largest coefficient entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(mnorm(c)))
    }

    /// Sum of all coefficient traces' moduli (sl(2) diagnostic).
    pub fn max_trace(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.trace().norm()))
    }

    /// Scalar Laurent series of the determinant as `(lo, coefficients)`.
    pub fn det_series(&self) -> (i32, Vec<C64>) {
        if self.coeffs.is_empty() {
            return (0, Vec::new());
        }
        let n = self.coeffs.len();
        let mut out = vec![ZERO; 2 * n - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in self.coeffs.iter().enumerate() {
                out[i + j] += a[(0, 0)] * b[(1, 1)] - a[(0, 1)] * b[(1, 0)];
            }
        }
        (2 * self.lo, out)
    }

    /// The mirror `λ^{g-1} conj(ξ(1/λ̄))^T`; coefficient `n` is `ξ_{g-1-n}^†`.
    pub fn star(&self, g: usize) -> Self {
        if self.coeffs.is_empty() {
            return Self::zero();
        }
        let g1 = g as i32 - 1;
        let lo = g1 - self.hi();
        let hi = g1 - self.lo;
        Self::new(lo, (lo..=hi).map(|n| self.coeff(g1 - n).adjoint()).collect())
    }

    /// Flat real vector `[re, im]` per entry, row-major, powers `lo..=hi`.
    pub fn to_real_vec(&self, lo: i32, hi: i32) -> Vec<f64> {
        let mut v = Vec::with_capacity(8 * (hi - lo + 1).max(0) as usize);
        for n in lo..=hi {
            let m = self.coeff(n);
            for r in 0..2 {
                for c in 0..2 {
                    v.push(m[(r, c)].re);
                    v.push(m[(r, c)].im);
                }
            }
        }
        v
    }

    /// Inverse of [`to_real_vec`](Self::to_real_vec).
    pub fn from_real_vec(lo: i32, v: &[f64]) -> Self {
        let coeffs = v
            .chunks_exact(8)
            .map(|c| {
                M2::new(
                    C64::new(c[0], c[1]),
                    C64::new(c[2], c[3]),
                    C64::new(c[4], c[5]),
                    C64::new(c[6], c[7]),
                )
            })
            .collect();
        Self::new(lo, coeffs)
    }
}

impl std::ops::Add for &LaurentLoop {
    type Output = LaurentLoop;
    fn add(self, o: &LaurentLoop) -> LaurentLoop {
        if self.coeffs.is_empty() {
            return o.clone();
        }
        if o.coeffs.is_empty() {
            return self.clone();
        }
        let lo = self.lo.min(o.lo);
        let hi = self.hi().max(o.hi());
        LaurentLoop::new(lo, (lo..=hi).map(|n| self.coeff(n) + o.coeff(n)).collect())
    }
}

impl std::ops::Sub for &LaurentLoop {
    type Output = LaurentLoop;
    fn sub(self, o: &LaurentLoop) -> LaurentLoop {
        self + &o.scale(-ONE)
    }
}

impl std::ops::Mul for &LaurentLoop {
    type Output = LaurentLoop;
    fn mul(self, o: &LaurentLoop) -> LaurentLoop {
        if self.coeffs.is_empty() || o.coeffs.is_empty() {
            return LaurentLoop::zero();
        }
        let mut out = vec![M2::zeros(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        LaurentLoop::new(self.lo + o.lo, out)
    }
}

type MatRepr = [[[f64; 2]; 2]; 2];

#[derive(Serialize, Deserialize)]
struct LoopRepr {
    terms: BTreeMap<i32, MatRepr>,
}

fn mat_repr(m: &M2) -> MatRepr {
    let e = |r: usize, c: usize| [m[(r, c)].re, m[(r, c)].im];
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

impl Serialize for LaurentLoop {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LoopRepr {
            terms: self.iter().map(|(n, m)| (n, mat_repr(m))).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for LaurentLoop {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = LoopRepr::deserialize(d)?;
        let mut l = LaurentLoop::zero();
        for (n, m) in r.terms {
            let c = |e: [f64; 2]| C64::new(e[0], e[1]);
            *l.coeff_mut(n) = M2::new(c(m[0][0]), c(m[0][1]), c(m[1][0]), c(m[1][1]));
        }
        Ok(l)
    }
}

// ---------------------------------------------------------------------------
// P_g and the loop-algebra split
// ---------------------------------------------------------------------------

/// Membership in `P_g`: `ξ̂₋₁ ∈ iR⁺ε₊`, `ξ̂_n = -ξ̂_{g-1-n}^†`,
/// `trace(ξ̂₋₁ ξ̂₀) ≠ 0`, powers within `[-1, g]`.
///
/// `tol` is relative to the largest coefficient; `0.0` demands exactness.
pub fn pg_membership_tol(xi: &LaurentLoop, g: usize, tol: f64) -> bool {
    let g = g as i32;
    let scale = xi.max_abs();
    let t = tol * scale;
    for (n, m) in xi.iter() {
        if (n < -1 || n > g) && mnorm(m) > t {
            return false;
        }
    }
    let x1 = xi.coeff(-1);
    let b = x1[(0, 1)];
    if x1[(0, 0)].norm() > t || x1[(1, 0)].norm() > t || x1[(1, 1)].norm() > t {
        return false;
    }
    if b.re.abs() > t || b.im <= t {
        return false;
    }
    for n in -1..=g {
        let d = xi.coeff(n) + xi.coeff(g - 1 - n).adjoint();
        if mnorm(&d) > t {
            return false;
        }
    }
    for n in -1..=g {
        if xi.coeff(n).trace().norm() > t {
            return false;
        }
    }
    (x1 * xi.coeff(0)).trace().norm() > t
}

/// [`pg_membership_tol`] at relative tolerance `1e-12`.
pub fn pg_membership(xi: &LaurentLoop, g: usize) -> bool {
    pg_membership_tol(xi, g, 1e-12)
}

/// The reality involution `ξ ↦ -λ^{g-1} conj(ξ(1/λ̄))^T`.
pub fn reality_involution(xi: &LaurentLoop, g: usize) -> LaurentLoop {
    xi.star(g).scale(-ONE)
}

/// Split of a loop into a unitary part and a positive part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitPair {
    pub unitary_part: LaurentLoop,
    pub positive_part: LaurentLoop,
}

/// Lie-algebra Iwasawa split `A = unitary + positive`.
///
/// Negative powers go wholly to the unitary part together with their mirror
/// `-A_n^†` at power `-n`; the positive part absorbs the remainder. At power 0
/// `A_0 = X + Y` with `X` anti-hermitian trace-free and `Y` upper triangular
/// with real diagonal.
pub fn iwasawa_split(a: &LaurentLoop) -> Result<SplitPair> {
    let scale = a.max_abs();
    for (n, m) in a.iter() {
        if m.trace().norm() > 1e-12 * scale.max(1.0) {
            return Err(Error::MalformedInput(format!(
                "coefficient at power {n} is not trace-free"
            )));
        }
    }
    if a.coeffs().is_empty() {
        return Ok(SplitPair {
            unitary_part: LaurentLoop::zero(),
            positive_part: LaurentLoop::zero(),
        });
    }
    let m = a.lo().abs().max(a.hi().abs());
    let mut uni = LaurentLoop::zeros(-m, m);
    let mut pos = LaurentLoop::zeros(0, m);
    for n in 1..=m {
        let neg = a.coeff(-n);
        *uni.coeff_mut(-n) = neg;
        *uni.coeff_mut(n) = -neg.adjoint();
        *pos.coeff_mut(n) = a.coeff(n) + neg.adjoint();
    }
    let a0 = a.coeff(0);
    let p = a0[(0, 0)];
    let q = a0[(0, 1)];
    let r = a0[(1, 0)];
    let x = M2::new(
        C64::new(0.0, p.im),
        -r.conj(),
        r,
        C64::new(0.0, -p.im),
    );
    let y = M2::new(C64::new(p.re, 0.0), q + r.conj(), ZERO, C64::new(-p.re, 0.0));
    *uni.coeff_mut(0) = x;
    *pos.coeff_mut(0) = y;
    Ok(SplitPair {
        unitary_part: uni,
        positive_part: pos,
    })
}

/// Exact membership in the unitary class: `A_n = -A_{-n}^†` for all `n`.
pub fn is_unitary_loop(a: &LaurentLoop) -> bool {
    if a.coeffs().is_empty() {
        return true;
    }
    let m = a.lo().abs().max(a.hi().abs());
    (-m..=m).all(|n| a.coeff(n) == -a.coeff(-n).adjoint())
}

/// Exact membership in the positive class: powers `≥ 0`, power-0 coefficient
/// upper triangular with real diagonal.
pub fn is_positive_loop(a: &LaurentLoop) -> bool {
    if a.iter().any(|(n, m)| n < 0 && *m != M2::zeros()) {
        return false;
    }
    let a0 = a.coeff(0);
    a0[(1, 0)] == ZERO && a0[(0, 0)].im == 0.0 && a0[(1, 1)].im == 0.0
}

/// `Im` of the power-0 coefficient of `trace(A B)`.
pub fn lambda_inner(a: &LaurentLoop, b: &LaurentLoop) -> f64 {
    a.iter()
        .map(|(n, m)| (m * b.coeff(-n)).trace())
        .fold(ZERO, |s, t| s + t)
        .im
}

/// Non-degeneracy witness `i λ^{-j} ξ_j^†` for the coefficient at power `j`.
pub fn witness(xi: &LaurentLoop, j: i32) -> LaurentLoop {
    LaurentLoop::monomial(xi.coeff(j).adjoint() * I, -j)
}

/// The polynomial `a(λ) = -λ det ξ_λ` of a loop with powers `≥ -1`.
pub fn a_from_loop(xi: &LaurentLoop) -> Result<CPoly> {
    let (lo, d) = xi.det_series();
    if d.is_empty() {
        return Ok(CPoly::zero());
    }
    let shift = lo + 1;
    if shift < 0 && d.iter().take((-shift) as usize).any(|c| c.norm() > 0.0) {
        return Err(Error::MalformedInput(
            "determinant has a pole of order above one".into(),
        ));
    }
    let mut v = vec![ZERO; (shift.max(0)) as usize];
    v.extend(d.iter().skip((-shift).max(0) as usize).map(|c| -c));
    Ok(CPoly::new(v))
}
