//! Sparse polynomials in the coordinates (z1, z2, z3) and trigonometric
//! boundary functions built from them.

use num_complex::Complex64;
use std::collections::BTreeMap;
use std::fmt;

use crate::error::{CoreError, Result};
use crate::index::MultiIndex;
use crate::measure::MeasureContext;

/// Coefficients below this are rounding debris and get dropped on
/// canonicalization.
pub const COEFF_PRUNE: f64 = 1e-15;

/// Which domain a holomorphic polynomial lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ambient {
    /// The tetrablock, image domain of the degree-2 proper map.
    Tetrablock,
    /// The 3-dimensional type-II Cartan domain.
    CartanII,
}

impl Ambient {
    fn name(self) -> &'static str {
        match self {
            Ambient::Tetrablock => "tetrablock",
            Ambient::CartanII => "Cartan domain",
        }
    }
}

/// Finitely supported coefficient table over monomials.
#[derive(Clone, Debug, PartialEq)]
pub struct HoloPolynomial {
    ambient: Ambient,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl HoloPolynomial {
    pub fn zero(ambient: Ambient) -> Self {
        Self {
            ambient,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: Complex64, ambient: Ambient) -> Self {
        let mut p = Self::zero(ambient);
        p.add_term(MultiIndex::new(0, 0, 0), c);
        p
    }

    pub fn monomial(idx: MultiIndex, coeff: Complex64, ambient: Ambient) -> Self {
        let mut p = Self::zero(ambient);
        p.add_term(idx, coeff);
        p
    }

    /// z1*z2 - z3^2 on the Cartan domain: the third component of the proper map.
    pub fn phi3() -> Self {
        let mut p = Self::zero(Ambient::CartanII);
        p.add_term(MultiIndex::new(1, 1, 0), Complex64::new(1.0, 0.0));
        p.add_term(MultiIndex::new(0, 0, 2), Complex64::new(-1.0, 0.0));
        p
    }

    pub fn ambient(&self) -> Ambient {
        self.ambient
    }

    pub fn expect_ambient(&self, expected: Ambient) -> Result<()> {
        if self.ambient != expected {
            return Err(CoreError::AmbientMismatch {
                expected: expected.name(),
                got: self.ambient.name(),
            });
        }
        Ok(())
    }

    pub fn add_term(&mut self, idx: MultiIndex, coeff: Complex64) {
        let entry = self.terms.entry(idx).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() <= COEFF_PRUNE {
            self.terms.remove(&idx);
        }
    }

    pub fn coeff(&self, idx: &MultiIndex) -> Complex64 {
        self.terms
            .get(idx)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    /// Total degree; zero polynomial reports 0.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self::zero(self.ambient);
        for (idx, v) in &self.terms {
            out.add_term(*idx, v * c);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.ambient, other.ambient, "cannot add across domains");
        let mut out = self.clone();
        for (idx, v) in &other.terms {
            out.add_term(*idx, *v);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(
            self.ambient, other.ambient,
            "cannot multiply across domains"
        );
        let mut out = Self::zero(self.ambient);
        for (i, a) in &self.terms {
            for (j, b) in &other.terms {
                out.add_term(i.add(j), a * b);
            }
        }
        out
    }

    pub fn mul_phi3(&self) -> Self {
        self.mul(&Self::phi3())
    }

    /// True when every monomial carries an odd z3 exponent, i.e. f = -f∘σ.
    pub fn is_sigma_odd(&self) -> bool {
        self.terms.keys().all(|idx| idx.a3 % 2 == 1)
    }

    /// f ∘ σ where σ flips the sign of z3.
    pub fn apply_sigma(&self) -> Self {
        let mut out = Self::zero(self.ambient);
        for (idx, v) in &self.terms {
            let sign = if idx.a3 % 2 == 0 { 1.0 } else { -1.0 };
            out.add_term(*idx, v * sign);
        }
        out
    }

    /// Composition with the proper map: a tetrablock polynomial becomes a
    /// Cartan-domain polynomial via z1 -> z1, z2 -> z2, z3 -> z1 z2 - z3^2.
    pub fn compose_phi(&self) -> Result<Self> {
        self.expect_ambient(Ambient::Tetrablock)?;
        let phi3 = Self::phi3();
        let mut out = Self::zero(Ambient::CartanII);
        for (idx, c) in &self.terms {
            let mut term = Self::constant(*c, Ambient::CartanII);
            if idx.a1 > 0 || idx.a2 > 0 {
                term = term.mul(&Self::monomial(
                    MultiIndex::new(idx.a1, idx.a2, 0),
                    Complex64::new(1.0, 0.0),
                    Ambient::CartanII,
                ));
            }
            for _ in 0..idx.a3 {
                term = term.mul(&phi3);
            }
            out = out.add(&term);
        }
        Ok(out)
    }

    pub fn eval(&self, z: &[Complex64; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (idx, c) in &self.terms {
            acc += c * z[0].powu(idx.a1) * z[1].powu(idx.a2) * z[2].powu(idx.a3);
        }
        acc
    }
}

impl fmt::Display for HoloPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (idx, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)*z^{}", c.re, c.im, idx)?;
        }
        Ok(())
    }
}

/// Finite sum of terms `c * z^gamma * conj(z)^delta` on the Shilov boundary
/// of the Cartan domain.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryFn {
    terms: BTreeMap<(MultiIndex, MultiIndex), Complex64>,
}

impl BoundaryFn {
    pub fn zero() -> Self {
        Self {
            terms: BTreeMap::new(),
        }
    }

    pub fn one() -> Self {
        let mut f = Self::zero();
        f.add_term(
            MultiIndex::default(),
            MultiIndex::default(),
            Complex64::new(1.0, 0.0),
        );
        f
    }

    pub fn add_term(&mut self, gamma: MultiIndex, delta: MultiIndex, coeff: Complex64) {
        let entry = self
            .terms
            .entry((gamma, delta))
            .or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() <= COEFF_PRUNE {
            self.terms.remove(&(gamma, delta));
        }
    }

    /// `hol * conj(anti)` expanded termwise.
    pub fn from_holo_pair(hol: &HoloPolynomial, anti: &HoloPolynomial) -> Self {
        let mut out = Self::zero();
        for (g, a) in hol.terms() {
            for (d, b) in anti.terms() {
                out.add_term(*g, *d, a * b.conj());
            }
        }
        out
    }

    pub fn from_holo(hol: &HoloPolynomial) -> Self {
        let mut out = Self::zero();
        for (g, a) in hol.terms() {
            out.add_term(*g, MultiIndex::default(), *a);
        }
        out
    }

    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for ((g, d), c) in &self.terms {
            out.add_term(*d, *g, c.conj());
        }
        out
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(MultiIndex, MultiIndex), &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// (max holomorphic degree, max antiholomorphic degree) over the terms.
    pub fn degrees(&self) -> (u32, u32) {
        let mut h = 0;
        let mut a = 0;
        for (g, d) in self.terms.keys() {
            h = h.max(g.degree());
            a = a.max(d.degree());
        }
        (h, a)
    }

    /// Value under σ: each term picks up (-1)^(gamma3 + delta3).
    pub fn is_sigma_even(&self) -> bool {
        self.terms.keys().all(|(g, d)| (g.a3 + d.a3) % 2 == 0)
    }

    pub fn eval(&self, z: &[Complex64; 3]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for ((g, d), c) in &self.terms {
            let hol = z[0].powu(g.a1) * z[1].powu(g.a2) * z[2].powu(g.a3);
            let anti = (z[0].powu(d.a1) * z[1].powu(d.a2) * z[2].powu(d.a3)).conj();
            acc += c * hol * anti;
        }
        acc
    }
}

/// L2 inner product of two holomorphic Cartan-domain polynomials on the
/// boundary, computed through the moment table.
pub fn inner_product(
    ctx: &MeasureContext,
    f: &HoloPolynomial,
    g: &HoloPolynomial,
) -> Result<Complex64> {
    f.expect_ambient(Ambient::CartanII)?;
    g.expect_ambient(Ambient::CartanII)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (mu, a) in f.terms() {
        for (nu, b) in g.terms() {
            acc += a * b.conj() * ctx.moment(mu, nu)?;
        }
    }
    Ok(acc)
}

/// <u*f, g> for a boundary multiplier u and holomorphic f, g.
pub fn inner_product_weighted(
    ctx: &MeasureContext,
    u: &BoundaryFn,
    f: &HoloPolynomial,
    g: &HoloPolynomial,
) -> Result<Complex64> {
    f.expect_ambient(Ambient::CartanII)?;
    g.expect_ambient(Ambient::CartanII)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for ((gamma, delta), cu) in u.terms() {
        for (mu, a) in f.terms() {
            for (nu, b) in g.terms() {
                let alpha = mu.add(gamma);
                let beta = nu.add(delta);
                acc += cu * a * b.conj() * ctx.moment(&alpha, &beta)?;
            }
        }
    }
    Ok(acc)
}

pub fn norm(ctx: &MeasureContext, f: &HoloPolynomial) -> Result<f64> {
    Ok(inner_product(ctx, f, f)?.re.max(0.0).sqrt())
}

/// Pullback `(f ∘ φ) * J_φ` of a tetrablock polynomial: the transfer of f
/// to the odd Hardy subspace, before the normalizing constant.
pub fn pullback_weighted(f: &HoloPolynomial) -> Result<HoloPolynomial> {
    let jac = HoloPolynomial::monomial(
        MultiIndex::new(0, 0, 1),
        Complex64::new(-2.0, 0.0),
        Ambient::CartanII,
    );
    Ok(f.compose_phi()?.mul(&jac))
}
