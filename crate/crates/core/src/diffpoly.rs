//! Differential polynomials in the jet of `u`.
//!
//! A monomial is a product of `u`, `u_{z^j} = ∂_z^j u`, `u_{z̄^k} = ∂_z̄^k u`
//! and one exponential `e^{2mu}`. Mixed derivatives never appear: they are
//! eliminated with `u_{zz̄} = -¼(e^{2u} - e^{-2u})`, so every polynomial is in
//! normal form. Coefficients are complex doubles; the recursions only ever
//! produce Gaussian rationals, which [`DiffPoly::rationality_audit`] checks.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::jets::YJet;
use crate::{Error, Result, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Exponents of one normal-form monomial.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Mono {
    /// `m` in the factor `e^{2mu}`.
    pub e: i32,
    /// Power of the undifferentiated `u`.
    pub u: u32,
    /// `z[j-1]` is the power of `∂_z^j u`.
    pub z: Vec<u32>,
    /// `w[k-1]` is the power of `∂_z̄^k u`.
    pub w: Vec<u32>,
}

fn trim(v: &mut Vec<u32>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

fn bump(v: &mut Vec<u32>, j: usize, by: i64) {
    if v.len() < j {
        v.resize(j, 0);
    }
    v[j - 1] = (v[j - 1] as i64 + by) as u32;
    trim(v);
}

impl Mono {
    fn mul(&self, o: &Mono) -> Mono {
        let add = |a: &[u32], b: &[u32]| {
            let mut r = vec![0; a.len().max(b.len())];
            for (i, v) in a.iter().enumerate() {
                r[i] += v;
            }
            for (i, v) in b.iter().enumerate() {
                r[i] += v;
            }
            r
        };
        Mono {
            e: self.e + o.e,
            u: self.u + o.u,
            z: add(&self.z, &o.z),
            w: add(&self.w, &o.w),
        }
    }

    /// Scaling weight: `∂_z^j u` weighs `j`, `∂_z̄^k u` weighs `-k`.
    pub fn weight(&self) -> i64 {
        let zw: i64 = self.z.iter().enumerate().map(|(i, &p)| (i as i64 + 1) * p as i64).sum();
        let ww: i64 = self.w.iter().enumerate().map(|(i, &p)| (i as i64 + 1) * p as i64).sum();
        zw - ww
    }

    /// Highest derivative order present.
    pub fn max_order(&self) -> usize {
        self.z.len().max(self.w.len())
    }

    fn is_one(&self) -> bool {
        self.e == 0 && self.u == 0 && self.z.is_empty() && self.w.is_empty()
    }
}

/// A differential polynomial in normal form.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DiffPoly {
    terms: BTreeMap<Mono, C64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Dir {
    Z,
    Zbar,
}

impl DiffPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: C64) -> Self {
        Self::term(Mono::default(), c)
    }

    pub fn term(m: Mono, c: C64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// `u`.
    pub fn u() -> Self {
        Self::term(Mono { u: 1, ..Mono::default() }, C64::new(1.0, 0.0))
    }

    /// `∂_z^j u` for `j ≥ 1`.
    pub fn uz(j: usize) -> Self {
        assert!(j >= 1);
        let mut m = Mono::default();
        bump(&mut m.z, j, 1);
        Self::term(m, C64::new(1.0, 0.0))
    }

    /// `∂_z̄^k u` for `k ≥ 1`.
    pub fn uzbar(k: usize) -> Self {
        assert!(k >= 1);
        let mut m = Mono::default();
        bump(&mut m.w, k, 1);
        Self::term(m, C64::new(1.0, 0.0))
    }

    /// `∂_z^j ∂_z̄^k u` reduced to normal form.
    pub fn var(j: usize, k: usize) -> Self {
        match (j, k) {
            (0, 0) => Self::u(),
            (_, 0) => Self::uz(j),
            (0, _) => Self::uzbar(k),
            _ => (0..j).fold(Self::uzbar(k), |p, _| p.dz()),
        }
    }

    /// `e^{2mu}`.
    pub fn exp2u(m: i32) -> Self {
        Self::term(Mono { e: m, ..Mono::default() }, C64::new(1.0, 0.0))
    }

    /// `cosh(2u)`.
    pub fn cosh2u() -> Self {
        (&Self::exp2u(1) + &Self::exp2u(-1)).scale(C64::new(0.5, 0.0))
    }

    /// `sinh(2u)`.
    pub fn sinh2u() -> Self {
        (&Self::exp2u(1) - &Self::exp2u(-1)).scale(C64::new(0.5, 0.0))
    }

    /// `u_{zz̄} = -¼(e^{2u} - e^{-2u})`.
    pub fn pde_rhs() -> Self {
        Self::sinh2u().scale(C64::new(-0.5, 0.0))
    }

    pub fn add_term(&mut self, m: Mono, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let e = self.terms.entry(m.clone()).or_insert(C64::new(0.0, 0.0));
        *e += c;
        if *e == C64::new(0.0, 0.0) {
            self.terms.remove(&m);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &C64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Mono) -> C64 {
        self.terms.get(m).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut p = Self::zero();
        for (m, c) in &self.terms {
            p.add_term(m.clone(), c * s);
        }
        p
    }

    /// Drops terms whose coefficient is below `tol` in modulus.
    pub fn pruned(&self, tol: f64) -> Self {
        Self {
            terms: self.terms.iter().filter(|(_, c)| c.norm() > tol).map(|(m, c)| (m.clone(), *c)).collect(),
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.norm()))
    }

    /// Highest derivative order appearing in any monomial.
    pub fn max_order(&self) -> usize {
        self.terms.keys().map(Mono::max_order).max().unwrap_or(0)
    }

    /// Set of monomial weights present.
    pub fn weights(&self) -> Vec<i64> {
        let mut w: Vec<i64> = self.terms.keys().map(Mono::weight).collect();
        w.sort_unstable();
        w.dedup();
        w
    }

    /// `|self - other|_∞ ≤ tol` coefficient-wise.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        (self - other).max_coeff() <= tol
    }

    fn deriv(&self, dir: Dir) -> Self {
        let first = match dir {
            Dir::Z => Self::uz(1),
            Dir::Zbar => Self::uzbar(1),
        };
        let mut out = Self::zero();
        for (m, &c) in &self.terms {
            if m.e != 0 {
                let d = Self::term(m.clone(), c * (2.0 * m.e as f64));
                out = &out + &(&d * &first);
            }
            if m.u > 0 {
                let mut r = m.clone();
                r.u -= 1;
                let d = Self::term(r, c * m.u as f64);
                out = &out + &(&d * &first);
            }
            for (own, other, own_dir) in [(&m.z, Dir::Z, true), (&m.w, Dir::Zbar, false)] {
                for (idx, &ex) in own.iter().enumerate() {
                    if ex == 0 {
                        continue;
                    }
                    let j = idx + 1;
                    let mut r = m.clone();
                    if own_dir {
                        bump(&mut r.z, j, -1);
                    } else {
                        bump(&mut r.w, j, -1);
                    }
                    let fd = if (other == Dir::Z) == (dir == Dir::Z) {
                        // same direction: raise the order
                        if own_dir {
                            Self::uz(j + 1)
                        } else {
                            Self::uzbar(j + 1)
                        }
                    } else {
                        // mixed: ∂_z̄ ∂_z^j u = ∂_z^{j-1} u_{zz̄}
                        let mut q = Self::pde_rhs();
                        for _ in 1..j {
                            q = q.deriv(other);
                        }
                        q
                    };
                    let rest = Self::term(r, c * ex as f64);
                    out = &out + &(&rest * &fd);
                }
            }
        }
        out
    }

    /// Formal `∂_z`.
    pub fn dz(&self) -> Self {
        self.deriv(Dir::Z)
    }

    /// Formal `∂_z̄`.
    pub fn dzbar(&self) -> Self {
        self.deriv(Dir::Zbar)
    }

    /// `∂_x = ∂_z + ∂_z̄`.
    pub fn dx(&self) -> Self {
        &self.dz() + &self.dzbar()
    }

    /// `∂_y = i(∂_z - ∂_z̄)`.
    pub fn dy(&self) -> Self {
        (&self.dz() - &self.dzbar()).scale(I)
    }

    /// Complex conjugate: swaps `z` and `z̄` and conjugates coefficients.
    pub fn conj(&self) -> Self {
        let mut p = Self::zero();
        for (m, c) in &self.terms {
            let mm = Mono { e: m.e, u: m.u, z: m.w.clone(), w: m.z.clone() };
            p.add_term(mm, c.conj());
        }
        p
    }

    /// Coefficients that are not ratios of small integers (denominator
    /// ≤ 1024) to within `1e-9`.
    pub fn rationality_audit(&self) -> Vec<(Mono, C64)> {
        self.terms
            .iter()
            .filter(|(_, c)| as_rational(c.re).is_none() || as_rational(c.im).is_none())
            .map(|(m, c)| (m.clone(), *c))
            .collect()
    }

    /// Replaces each coefficient part by its nearby small rational, if any.
    pub fn snapped(&self) -> Self {
        let snap = |x: f64| as_rational(x).map_or(x, |(p, q)| p as f64 / q as f64);
        let mut p = Self::zero();
        for (m, c) in &self.terms {
            p.add_term(m.clone(), C64::new(snap(c.re), snap(c.im)));
        }
        p
    }
}

/// Best small-denominator rational within `1e-9` of `x`.
pub fn as_rational(x: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    for q in 1..=1024i64 {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() <= 1e-9 * x.abs().max(1.0) {
            return Some((p as i64, q));
        }
    }
    None
}

impl std::ops::Add for &DiffPoly {
    type Output = DiffPoly;
    fn add(self, o: &DiffPoly) -> DiffPoly {
        let mut p = self.clone();
        for (m, c) in &o.terms {
            p.add_term(m.clone(), *c);
        }
        p
    }
}

impl std::ops::Sub for &DiffPoly {
    type Output = DiffPoly;
    fn sub(self, o: &DiffPoly) -> DiffPoly {
        let mut p = self.clone();
        for (m, c) in &o.terms {
            p.add_term(m.clone(), -c);
        }
        p
    }
}

impl std::ops::Mul for &DiffPoly {
    type Output = DiffPoly;
    fn mul(self, o: &DiffPoly) -> DiffPoly {
        let mut p = DiffPoly::zero();
        for (a, ca) in &self.terms {
            for (b, cb) in &o.terms {
                p.add_term(a.mul(b), ca * cb);
            }
        }
        p
    }
}

fn fmt_rational(x: f64) -> String {
    match as_rational(x) {
        Some((p, 1)) => format!("{p}"),
        Some((p, q)) => format!("{p}/{q}"),
        None => format!("{x}"),
    }
}

fn fmt_coeff(c: C64) -> String {
    let re0 = c.re.abs() < 1e-15;
    let im0 = c.im.abs() < 1e-15;
    match (re0, im0) {
        (_, true) => fmt_rational(c.re),
        (true, false) => match fmt_rational(c.im).as_str() {
            "1" => "i".into(),
            "-1" => "-i".into(),
            s => {
                if let Some((n, d)) = s.split_once('/') {
                    let n = match n {
                        "1" => "",
                        "-1" => "-",
                        n => n,
                    };
                    format!("{n}i/{d}")
                } else {
                    format!("{s}i")
                }
            }
        },
        _ => format!("({} + {}i)", fmt_rational(c.re), fmt_rational(c.im)),
    }
}

fn fmt_mono(m: &Mono) -> String {
    let mut f = Vec::new();
    let pow = |s: String, p: u32| if p == 1 { s } else { format!("{s}^{p}") };
    if m.u > 0 {
        f.push(pow("u".into(), m.u));
    }
    for (i, &p) in m.z.iter().enumerate() {
        if p > 0 {
            f.push(pow(format!("u_{}", "z".repeat(i + 1)), p));
        }
    }
    for (i, &p) in m.w.iter().enumerate() {
        if p > 0 {
            f.push(pow(format!("u_{}", "z̄".repeat(i + 1)), p));
        }
    }
    match m.e {
        0 => {}
        1 => f.push("e^{2u}".into()),
        -1 => f.push("e^{-2u}".into()),
        e => f.push(format!("e^{{{}u}}", 2 * e)),
    }
    f.join(" ")
}

impl fmt::Display for DiffPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut keys: Vec<&Mono> = self.terms.keys().collect();
        keys.sort_by(|a, b| {
            b.max_order().cmp(&a.max_order()).then_with(|| {
                let da: u32 = a.z.iter().chain(&a.w).sum::<u32>() + a.u;
                let db: u32 = b.z.iter().chain(&b.w).sum::<u32>() + b.u;
                da.cmp(&db)
            })
        });
        for (i, m) in keys.iter().enumerate() {
            let c = self.terms[*m];
            let mut cs = fmt_coeff(c);
            let neg = cs.starts_with('-');
            if neg {
                cs.remove(0);
            }
            let body = fmt_mono(m);
            let text = if m.is_one() {
                cs
            } else if cs == "1" {
                body
            } else {
                format!("{cs} {body}")
            };
            match (i, neg) {
                (0, false) => write!(f, "{text}")?,
                (0, true) => write!(f, "-{text}")?,
                (_, false) => write!(f, " + {text}")?,
                (_, true) => write!(f, " - {text}")?,
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    mono: Mono,
    c: [f64; 2],
}

impl Serialize for DiffPoly {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<TermRepr> = self
            .terms
            .iter()
            .map(|(m, c)| TermRepr { mono: m.clone(), c: [c.re, c.im] })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiffPoly {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<TermRepr>::deserialize(d)?;
        let mut p = DiffPoly::zero();
        for t in v {
            let mut m = t.mono;
            trim(&mut m.z);
            trim(&mut m.w);
            p.add_term(m, C64::new(t.c[0], t.c[1]));
        }
        Ok(p)
    }
}

/// Grids needed to evaluate polynomials on one jet.
pub struct Evaluator<'a> {
    jet: &'a YJet,
    u: Vec<f64>,
    z: Vec<Vec<C64>>,
    w: Vec<Vec<C64>>,
}

impl<'a> Evaluator<'a> {
    pub fn new(jet: &'a YJet) -> Self {
        Self { jet, u: jet.layer(0).to_vec(), z: Vec::new(), w: Vec::new() }
    }

    fn ensure(&mut self, order: usize) -> Result<()> {
        if order > self.jet.order() {
            return Err(Error::Precondition(format!(
                "polynomial needs derivatives of order {order}, jet has {}",
                self.jet.order()
            )));
        }
        while self.z.len() < order {
            let j = self.z.len() + 1;
            let g = self.jet.z_derivative_grid(j, 0)?;
            self.w.push(g.iter().map(|c| c.conj()).collect());
            self.z.push(g);
        }
        Ok(())
    }

    pub fn eval(&mut self, p: &DiffPoly) -> Result<Vec<C64>> {
        self.ensure(p.max_order())?;
        let n = self.u.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for (m, &c) in p.terms() {
            for (k, o) in out.iter_mut().enumerate() {
                let mut v = c;
                if m.e != 0 {
                    v *= (2.0 * m.e as f64 * self.u[k]).exp();
                }
                if m.u > 0 {
                    v *= self.u[k].powi(m.u as i32);
                }
                for (i, &ex) in m.z.iter().enumerate() {
                    if ex > 0 {
                        v *= self.z[i][k].powu(ex);
                    }
                }
                for (i, &ex) in m.w.iter().enumerate() {
                    if ex > 0 {
                        v *= self.w[i][k].powu(ex);
                    }
                }
                *o += v;
            }
        }
        Ok(out)
    }
}

/// Evaluates `p` pointwise on the grid of `jet`.
pub fn evaluate(p: &DiffPoly, jet: &YJet) -> Result<Vec<C64>> {
    Evaluator::new(jet).eval(p)
}

/// 2×2 matrix over [`DiffPoly`], row-major.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DMat(pub [DiffPoly; 4]);

impl DMat {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity() -> Self {
        let one = DiffPoly::constant(C64::new(1.0, 0.0));
        Self([one.clone(), DiffPoly::zero(), DiffPoly::zero(), one])
    }

    pub fn new(a: DiffPoly, b: DiffPoly, c: DiffPoly, d: DiffPoly) -> Self {
        Self([a, b, c, d])
    }

    pub fn get(&self, r: usize, c: usize) -> &DiffPoly {
        &self.0[2 * r + c]
    }

    pub fn diag(&self) -> Self {
        Self([self.0[0].clone(), DiffPoly::zero(), DiffPoly::zero(), self.0[3].clone()])
    }

    pub fn off(&self) -> Self {
        Self([DiffPoly::zero(), self.0[1].clone(), self.0[2].clone(), DiffPoly::zero()])
    }

    pub fn map(&self, f: impl Fn(&DiffPoly) -> DiffPoly) -> Self {
        Self([f(&self.0[0]), f(&self.0[1]), f(&self.0[2]), f(&self.0[3])])
    }

    pub fn scale(&self, s: C64) -> Self {
        self.map(|p| p.scale(s))
    }

    pub fn dx(&self) -> Self {
        self.map(DiffPoly::dx)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(DiffPoly::is_zero)
    }

    pub fn max_order(&self) -> usize {
        self.0.iter().map(DiffPoly::max_order).max().unwrap_or(0)
    }

    pub fn max_coeff(&self) -> f64 {
        self.0.iter().map(DiffPoly::max_coeff).fold(0.0, f64::max)
    }
}

impl std::ops::Add for &DMat {
    type Output = DMat;
    fn add(self, o: &DMat) -> DMat {
        DMat(std::array::from_fn(|i| &self.0[i] + &o.0[i]))
    }
}

impl std::ops::Sub for &DMat {
    type Output = DMat;
    fn sub(self, o: &DMat) -> DMat {
        DMat(std::array::from_fn(|i| &self.0[i] - &o.0[i]))
    }
}

impl std::ops::Mul for &DMat {
    type Output = DMat;
    fn mul(self, o: &DMat) -> DMat {
        DMat(std::array::from_fn(|k| {
            let (r, c) = (k / 2, k % 2);
            &(self.get(r, 0) * o.get(0, c)) + &(self.get(r, 1) * o.get(1, c))
        }))
    }
}

/// Output of [`diagonalization_recursion`].
#[derive(Clone, Debug)]
pub struct Diagonalization {
    /// `a[i]` for `i = 0..=M+1`, with `a[0] = 1`.
    a: Vec<DMat>,
    /// `b[m + 1]` for `m = -1..=M`.
    b: Vec<DMat>,
}

impl Diagonalization {
    pub fn max_half_power(&self) -> usize {
        self.b.len() - 2
    }

    /// Off-diagonal gauge coefficient `a_i`, `0 ≤ i ≤ M+1`.
    pub fn a(&self, i: usize) -> &DMat {
        &self.a[i]
    }

    /// Diagonal coefficient `b_m`, `-1 ≤ m ≤ M`.
    pub fn b(&self, m: i32) -> &DMat {
        &self.b[(m + 1) as usize]
    }
}

/// `β_{-1} = (i/2) diag(1, -1)`.
pub fn beta_m1() -> DMat {
    let h = C64::new(0.0, 0.5);
    DMat::new(DiffPoly::constant(h), DiffPoly::zero(), DiffPoly::zero(), DiffPoly::constant(-h))
}

/// `β_0 = ((0, -u_z), (-u_z, 0))`.
pub fn beta_0() -> DMat {
    let m = DiffPoly::uz(1).scale(C64::new(-1.0, 0.0));
    DMat::new(DiffPoly::zero(), m.clone(), m, DiffPoly::zero())
}

/// `β_1 = (i/2)((cosh 2u, -sinh 2u), (sinh 2u, -cosh 2u))`.
pub fn beta_1() -> DMat {
    let h = C64::new(0.0, 0.5);
    let c = DiffPoly::cosh2u().scale(h);
    let s = DiffPoly::sinh2u().scale(h);
    DMat::new(c.clone(), s.scale(C64::new(-1.0, 0.0)), s, c.scale(C64::new(-1.0, 0.0)))
}

/// Formal diagonalization of `∂_x + β_{-1}λ^{-1/2} + β_0 + β_1λ^{1/2}` by an
/// off-diagonal gauge `1 + Σ a_i λ^{i/2}`: at each order `m ≥ 0`
///
/// `S = β_0 a_m + β_1 a_{m-1} + ∂_x a_m - Σ_{i=1}^{m} a_i b_{m-i}`,
/// `b_m = diag(S)`, `[β_{-1}, a_{m+1}] = -off(S)`.
pub fn diagonalization_recursion(max_m: usize) -> Result<Diagonalization> {
    if max_m < 1 {
        return Err(Error::Precondition("diagonalization needs M ≥ 1".into()));
    }
    let (bm1, b0, b1) = (beta_m1(), beta_0(), beta_1());
    let mut a = vec![DMat::identity()];
    let mut b = vec![bm1];
    for m in 0..=max_m {
        let mut s = &(&b0 * &a[m]) + &a[m].dx();
        if m >= 1 {
            s = &s + &(&b1 * &a[m - 1]);
        }
        for i in 1..=m {
            s = &s - &(&a[i] * &b[m - i + 1]);
        }
        b.push(s.diag());
        // inverse of X ↦ [β_{-1}, X] on off-diagonal matrices
        let t12 = s.get(0, 1).scale(C64::new(-1.0, 0.0));
        let t21 = s.get(1, 0).scale(C64::new(-1.0, 0.0));
        a.push(DMat::new(DiffPoly::zero(), t12.scale(-I), t21.scale(I), DiffPoly::zero()));
    }
    Ok(Diagonalization { a, b })
}

/// One level of the Pinkall-Sterling iteration.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PSLevel {
    pub n: usize,
    pub omega: DiffPoly,
    pub tau: DiffPoly,
    pub sigma: DiffPoly,
}

impl PSLevel {
    /// `(-1)^n ω_n`, the same sequence under `λ ↦ -λ`.
    pub fn omega_alternating(&self) -> DiffPoly {
        if self.n % 2 == 0 {
            self.omega.clone()
        } else {
            self.omega.scale(C64::new(-1.0, 0.0))
        }
    }
}

/// Default cap on the iteration depth.
pub const PS_MAX_LEVEL: usize = 5;

/// Products of `∂_z^j u` with `Σ j = w`.
fn z_monomials(w: usize) -> Vec<Mono> {
    fn rec(rem: usize, max_part: usize, cur: &mut Vec<u32>, out: &mut Vec<Mono>) {
        if rem == 0 {
            let mut z = cur.clone();
            trim(&mut z);
            out.push(Mono { z, ..Mono::default() });
            return;
        }
        for part in (1..=rem.min(max_part)).rev() {
            if cur.len() < part {
                cur.resize(part, 0);
            }
            cur[part - 1] += 1;
            rec(rem - part, part, cur, out);
            cur[part - 1] -= 1;
        }
    }
    let mut out = Vec::new();
    rec(w, w, &mut Vec::new(), &mut out);
    out
}

/// Solves `τ_z̄ = rz̄`, `τ_z = rz` over the span of `basis` (no constant).
fn integrate_pair(basis: &[Mono], rz: &DiffPoly, rzbar: &DiffPoly) -> Result<DiffPoly> {
    let cols: Vec<(DiffPoly, DiffPoly)> = basis
        .iter()
        .map(|m| {
            let p = DiffPoly::term(m.clone(), C64::new(1.0, 0.0));
            (p.dz(), p.dzbar())
        })
        .collect();
    let mut rows: Vec<(bool, Mono)> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    let mut note = |flag: bool, p: &DiffPoly, rows: &mut Vec<(bool, Mono)>| {
        for (m, _) in p.terms() {
            if seen.insert((flag, m.clone())) {
                rows.push((flag, m.clone()));
            }
        }
    };
    for (dz, dzb) in &cols {
        note(true, dz, &mut rows);
        note(false, dzb, &mut rows);
    }
    note(true, rz, &mut rows);
    note(false, rzbar, &mut rows);
    let (nr, nc) = (rows.len(), basis.len());
    let mut a = DMatrix::<C64>::zeros(nr, nc);
    let mut rhs = DVector::<C64>::zeros(nr);
    for (r, (flag, m)) in rows.iter().enumerate() {
        for (c, (dz, dzb)) in cols.iter().enumerate() {
            a[(r, c)] = if *flag { dz.coeff(m) } else { dzb.coeff(m) };
        }
        rhs[r] = if *flag { rz.coeff(m) } else { rzbar.coeff(m) };
    }
    let svd = a.clone().svd(true, true);
    let x = svd
        .solve(&rhs, 1e-12)
        .map_err(|e| Error::IterationFailure(format!("least-squares solve failed: {e}")))?;
    let resid = (&a * &x - &rhs).iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let scale = rhs.iter().fold(1.0f64, |m, v| m.max(v.norm()));
    if resid > 1e-9 * scale {
        return Err(Error::IterationFailure(format!(
            "integration system inconsistent (residual {resid:.3e})"
        )));
    }
    let mut tau = DiffPoly::zero();
    for (m, c) in basis.iter().zip(x.iter()) {
        tau.add_term(m.clone(), *c);
    }
    Ok(tau.pruned(1e-13).snapped())
}

/// Pinkall-Sterling iteration with every integration constant set to zero:
/// given `ω_n`, solve `τ_{n,z̄} = i e^{-2u} ω_n`, `τ_{n,z} = 2i u_z ω_{n,z} - i ω_{n,zz}`,
/// then `ω_{n+1} = -i τ_{n,z} - 2i u_z τ_n` and `σ_{n+1} = e^{2u} τ_n + 2i ω_{n+1,z̄}`.
pub fn pinkall_sterling(n_max: usize) -> Result<Vec<PSLevel>> {
    if n_max > PS_MAX_LEVEL {
        return Err(Error::Precondition(format!(
            "iteration depth {n_max} above the cap {PS_MAX_LEVEL}"
        )));
    }
    let uz = DiffPoly::uz(1);
    let mut omega = uz.clone();
    let mut sigma = DiffPoly::exp2u(-1).scale(C64::new(0.0, 0.5));
    let mut out = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let oz = omega.dz();
        let rz = &(&uz * &oz).scale(C64::new(0.0, 2.0)) - &oz.dz().scale(I);
        let rzbar = (&DiffPoly::exp2u(-1) * &omega).scale(I);
        let tau = integrate_pair(&z_monomials(2 * n + 2), &rz, &rzbar)?;
        let next_omega = (&tau.dz() + &(&uz * &tau).scale(C64::new(2.0, 0.0))).scale(-I);
        let next_sigma = &(&DiffPoly::exp2u(1) * &tau) + &next_omega.dzbar().scale(C64::new(0.0, 2.0));
        out.push(PSLevel { n, omega, tau, sigma });
        omega = next_omega;
        sigma = next_sigma;
    }
    Ok(out)
}

/// `4 ω_{zz̄} + 4 cosh(2u) ω`, which vanishes for Jacobi fields.
pub fn jacobi_operator(omega: &DiffPoly) -> DiffPoly {
    &omega.dzbar().dz().scale(C64::new(4.0, 0.0)) + &(&DiffPoly::cosh2u() * omega).scale(C64::new(4.0, 0.0))
}
