//! Graded odd subspaces of the Hardy space on the Cartan domain.
//!
//! `Hom^-(n)` is spanned by the degree-n monomials with odd z3 exponent.
//! The ladder basis orthonormalizes each graded piece so that multiplying a
//! degree-n basis vector by `phi3 = z1 z2 - z3^2` lands exactly on a
//! degree-(n+2) basis vector: the first `d_{n-2}` vectors of degree n are
//! literal polynomial products of the previous block, and the rest come from
//! modified Gram-Schmidt over the monomial spanning set in canonical order
//! with one re-orthogonalization pass.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::index::MultiIndex;
use crate::measure::MeasureContext;
use crate::poly::{pullback_weighted, Ambient, HoloPolynomial};
use crate::report::{write_json_file, MeasureInfo};

/// Degree-n monomials with odd z3 exponent, ordered by a3 descending then
/// a1 descending.
pub fn enumerate_hom_minus(n: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut a3 = if n % 2 == 1 { n } else { n.saturating_sub(1) };
    loop {
        if a3 % 2 == 1 {
            let rest = n - a3;
            for a1 in (0..=rest).rev() {
                out.push(MultiIndex::new(a1, rest - a1, a3));
            }
        }
        if a3 < 2 {
            break;
        }
        a3 -= 2;
    }
    out
}

/// Dimension of Hom^-(n): (n+1)^2/4 for odd n, n(n+2)/4 for even n.
pub fn dim_hom_minus(n: u32) -> usize {
    if n % 2 == 1 {
        ((n + 1) * (n + 1) / 4) as usize
    } else {
        (n * (n + 2) / 4) as usize
    }
}

/// True when every monomial of f has odd z3 exponent, i.e. f = -f∘σ.
pub fn parity_check(f: &HoloPolynomial) -> bool {
    f.is_sigma_odd()
}

/// Gram matrix of the canonical monomials of Hom^-(n) under the boundary
/// measure; entry (i, j) is the moment of (mu_i, mu_j).
pub fn gram_matrix(n: u32, ctx: &MeasureContext) -> Result<DMatrix<Complex64>> {
    let monomials = enumerate_hom_minus(n);
    let d = monomials.len();
    let mut g = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for i in 0..d {
        for j in 0..d {
            g[(i, j)] = ctx.moment(&monomials[i], &monomials[j])?;
        }
    }
    if d > 0 {
        let min_eig = hermitian_min_eigenvalue(&g);
        if min_eig < 1e-12 {
            return Err(CoreError::RankDeficientGram {
                degree: n,
                min_eigenvalue: min_eig,
            });
        }
    }
    Ok(g)
}

pub(crate) fn hermitian_min_eigenvalue(g: &DMatrix<Complex64>) -> f64 {
    let eig = g.clone().symmetric_eigen();
    eig.eigenvalues.iter().fold(f64::INFINITY, |m, &v| m.min(v))
}

/// One graded level of the basis.
#[derive(Clone, Debug)]
pub struct DegreeBlock {
    pub n: u32,
    pub monomials: Vec<MultiIndex>,
    /// Orthonormal coefficient vectors over `monomials`.
    pub vectors: Vec<DVector<Complex64>>,
    /// How many leading vectors are exact phi3 multiples of the block two
    /// degrees down.
    pub ladder_from_prev: usize,
}

/// Ladder orthonormal basis of the graded odd subspaces up to a degree.
#[derive(Clone, Debug)]
pub struct GradedBasis {
    max_degree: u32,
    blocks: Vec<DegreeBlock>,
    measure: MeasureInfo,
    /// Inverse of the vectors-as-columns matrix per degree, for exact basis
    /// expansion of homogeneous polynomials.
    expanders: Vec<DMatrix<Complex64>>,
    tag: String,
}

impl GradedBasis {
    pub fn max_degree(&self) -> u32 {
        self.max_degree
    }

    pub fn measure_info(&self) -> MeasureInfo {
        self.measure
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn block(&self, n: u32) -> &DegreeBlock {
        assert!(n >= 1 && n <= self.max_degree, "degree {n} out of range");
        &self.blocks[(n - 1) as usize]
    }

    pub fn dim_at(&self, n: u32) -> usize {
        self.block(n).vectors.len()
    }

    /// Total dimension of degrees 1..=n.
    pub fn total_dim(&self, n: u32) -> usize {
        (1..=n).map(|m| self.dim_at(m)).sum()
    }

    /// Offset of the degree-n block inside the stacked coordinate space of
    /// degrees 1..=max.
    pub fn offset(&self, n: u32) -> usize {
        (1..n).map(|m| self.dim_at(m)).sum()
    }

    /// Basis vector as a polynomial.
    pub fn vector_poly(&self, n: u32, i: usize) -> HoloPolynomial {
        let block = self.block(n);
        let mut p = HoloPolynomial::zero(Ambient::CartanII);
        for (pos, idx) in block.monomials.iter().enumerate() {
            let c = block.vectors[i][pos];
            if c.norm() > 0.0 {
                p.add_term(*idx, c);
            }
        }
        p
    }

    /// Exact coordinates of a homogeneous sigma-odd polynomial in the
    /// degree-n basis block (a linear solve in coefficient space, no
    /// quadrature involved).
    pub fn expand(&self, p: &HoloPolynomial) -> Result<(u32, DVector<Complex64>)> {
        p.expect_ambient(Ambient::CartanII)?;
        if !p.is_sigma_odd() {
            return Err(CoreError::ParityViolation);
        }
        let n = p.degree();
        if p.is_zero() || n == 0 {
            return Err(CoreError::BasisMismatch(
                "cannot expand the zero polynomial".into(),
            ));
        }
        if n > self.max_degree {
            return Err(CoreError::WindowTooSmall {
                required: n,
                available: self.max_degree,
            });
        }
        let block = self.block(n);
        let mut coeffs = DVector::from_element(block.monomials.len(), Complex64::new(0.0, 0.0));
        for (idx, c) in p.terms() {
            if idx.degree() != n {
                return Err(CoreError::BasisMismatch(format!(
                    "polynomial is not homogeneous: found degree {} among degree {}",
                    idx.degree(),
                    n
                )));
            }
            let pos = block
                .monomials
                .iter()
                .position(|m| m == idx)
                .ok_or_else(|| {
                    CoreError::BasisMismatch(format!("monomial {idx} outside Hom^-({n})"))
                })?;
            coeffs[pos] = *c;
        }
        Ok((n, &self.expanders[(n - 1) as usize] * coeffs))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_json_file(path, &BasisFile::from_basis(self))
    }

    /// Loads and fully validates a basis file against the given context:
    /// enumeration order, ladder links as exact coefficient identities, and
    /// per-degree orthonormality within 1e-9.
    pub fn load(path: &Path, ctx: &MeasureContext) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: BasisFile = serde_json::from_str(&text)
            .map_err(|e| CoreError::BasisFormat(format!("parse: {e}")))?;
        let basis = file.into_basis()?;
        if ctx.max_degree() < 2 * basis.max_degree {
            return Err(CoreError::DegreeExceedsSpec {
                required: 2 * basis.max_degree,
                max_degree: ctx.max_degree(),
            });
        }
        basis.validate(ctx)?;
        Ok(basis)
    }

    fn validate(&self, ctx: &MeasureContext) -> Result<()> {
        for n in 1..=self.max_degree {
            let block = self.block(n);
            if block.monomials != enumerate_hom_minus(n) || block.vectors.len() != dim_hom_minus(n)
            {
                return Err(CoreError::BasisFormat(format!(
                    "degree {n}: enumeration or dimension mismatch"
                )));
            }
            let expect_ladder = if n >= 3 { dim_hom_minus(n - 2) } else { 0 };
            if block.ladder_from_prev != expect_ladder {
                return Err(CoreError::BasisFormat(format!(
                    "degree {n}: ladder count {} expected {expect_ladder}",
                    block.ladder_from_prev
                )));
            }
            if n >= 3 {
                for i in 0..expect_ladder {
                    let lifted = self.vector_poly(n - 2, i).mul_phi3();
                    if lifted != self.vector_poly(n, i) {
                        return Err(CoreError::BasisFormat(format!(
                            "degree {n}: vector {i} is not the exact phi3 multiple"
                        )));
                    }
                }
            }
            let dev = max_gram_deviation_at(self, n, ctx)?;
            if dev > 1e-9 {
                return Err(CoreError::BasisFormat(format!(
                    "degree {n}: Gram deviation {dev:.3e} exceeds 1e-9"
                )));
            }
        }
        Ok(())
    }
}

/// Max-norm distance of the degree-n Gram of the basis vectors from the
/// identity, evaluated through the moment table.
pub fn max_gram_deviation_at(basis: &GradedBasis, n: u32, ctx: &MeasureContext) -> Result<f64> {
    let block = basis.block(n);
    let g = gram_matrix(n, ctx)?;
    let gt = g.transpose();
    let mut dev: f64 = 0.0;
    for i in 0..block.vectors.len() {
        let gi = &gt * &block.vectors[i];
        for j in 0..block.vectors.len() {
            let inner = block.vectors[j].dotc(&gi);
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((inner - target).norm());
        }
    }
    Ok(dev)
}

/// Builds the ladder basis for degrees 1..=n_max.
pub fn build_ladder_basis(n_max: u32, ctx: &MeasureContext) -> Result<GradedBasis> {
    if 2 * n_max > ctx.max_degree() {
        return Err(CoreError::DegreeExceedsSpec {
            required: 2 * n_max,
            max_degree: ctx.max_degree(),
        });
    }
    let mut blocks: Vec<DegreeBlock> = Vec::new();
    for n in 1..=n_max {
        let monomials = enumerate_hom_minus(n);
        let d = monomials.len();
        let g = gram_matrix(n, ctx)?;
        let gt = g.transpose();
        let inner = |u: &DVector<Complex64>, v: &DVector<Complex64>| v.dotc(&(&gt * u));

        let mut vectors: Vec<DVector<Complex64>> = Vec::with_capacity(d);
        let mut ladder_from_prev = 0;
        if n >= 3 {
            let prev = &blocks[(n - 3) as usize];
            for i in 0..prev.vectors.len() {
                let lifted = block_poly(prev, i).mul_phi3();
                vectors.push(poly_to_coords(&lifted, &monomials)?);
            }
            ladder_from_prev = prev.vectors.len();
        }

        for j in 0..d {
            let mut cand = DVector::from_element(d, Complex64::new(0.0, 0.0));
            cand[j] = Complex64::new(1.0, 0.0);
            let orig_norm = inner(&cand, &cand).re.max(0.0).sqrt();
            // Modified Gram-Schmidt plus one re-orthogonalization pass.
            for _ in 0..2 {
                for v in &vectors {
                    let proj = inner(&cand, v);
                    cand -= v * proj;
                }
            }
            let norm = inner(&cand, &cand).re.max(0.0).sqrt();
            let rel = norm / orig_norm;
            if rel > 1e-6 {
                vectors.push(cand / Complex64::new(norm, 0.0));
            } else if rel >= 1e-10 {
                return Err(CoreError::GramSchmidtBreakdown {
                    degree: n,
                    rel_norm: rel,
                });
            }
            // rel < 1e-10: the monomial lies in the span already (exactly
            // d_{n-2} monomials must, by dimension count).
            if vectors.len() == d {
                break;
            }
        }
        if vectors.len() != d {
            return Err(CoreError::GramSchmidtBreakdown {
                degree: n,
                rel_norm: 0.0,
            });
        }
        blocks.push(DegreeBlock {
            n,
            monomials,
            vectors,
            ladder_from_prev,
        });
    }

    let measure = MeasureInfo::new(ctx.spec(), ctx.normalization_c());
    finalize_basis(n_max, blocks, measure)
}

fn finalize_basis(
    max_degree: u32,
    blocks: Vec<DegreeBlock>,
    measure: MeasureInfo,
) -> Result<GradedBasis> {
    let mut expanders = Vec::with_capacity(blocks.len());
    for block in &blocks {
        let d = block.vectors.len();
        let mut e = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (col, v) in block.vectors.iter().enumerate() {
            e.set_column(col, v);
        }
        let inv = e.try_inverse().ok_or_else(|| {
            CoreError::BasisFormat(format!("degree {}: basis matrix not invertible", block.n))
        })?;
        expanders.push(inv);
    }
    let tag = format!(
        "tetralab-basis:N={};D={};ang={};rad={}",
        max_degree, measure.max_degree, measure.n_angular, measure.n_radial
    );
    Ok(GradedBasis {
        max_degree,
        blocks,
        measure,
        expanders,
        tag,
    })
}

fn block_poly(block: &DegreeBlock, i: usize) -> HoloPolynomial {
    let mut p = HoloPolynomial::zero(Ambient::CartanII);
    for (pos, idx) in block.monomials.iter().enumerate() {
        let c = block.vectors[i][pos];
        if c.norm() > 0.0 {
            p.add_term(*idx, c);
        }
    }
    p
}

fn poly_to_coords(p: &HoloPolynomial, monomials: &[MultiIndex]) -> Result<DVector<Complex64>> {
    let mut v = DVector::from_element(monomials.len(), Complex64::new(0.0, 0.0));
    for (idx, c) in p.terms() {
        let pos = monomials.iter().position(|m| m == idx).ok_or_else(|| {
            CoreError::BasisMismatch(format!("monomial {idx} outside enumeration"))
        })?;
        v[pos] = *c;
    }
    Ok(v)
}

/// The unitary transfer from the tetrablock Hardy space into the odd
/// subspace: f -> (f∘φ) J_φ / sqrt(C).
pub fn psi_forward(f: &HoloPolynomial, ctx: &MeasureContext) -> Result<HoloPolynomial> {
    f.expect_ambient(Ambient::Tetrablock)?;
    let scale = Complex64::new(1.0 / ctx.normalization_c().sqrt(), 0.0);
    let out = pullback_weighted(f)?.scale(scale);
    debug_assert!(out.is_sigma_odd());
    Ok(out)
}

/// Inverse transfer: factor g = z3 * h(z1, z2, z3^2), rewrite z3^2 as
/// z1 z2 - x3 and rescale, recovering the unique f with psi_forward(f) = g.
pub fn psi_inverse(g: &HoloPolynomial, ctx: &MeasureContext) -> Result<HoloPolynomial> {
    g.expect_ambient(Ambient::CartanII)?;
    if !g.is_sigma_odd() {
        return Err(CoreError::ParityViolation);
    }
    let c = ctx.normalization_c();
    let scale = Complex64::new(-c.sqrt() / 2.0, 0.0);
    // x1 x2 - x3 on the tetrablock: the image of z3^2 under the inverse.
    let mut z3sq = HoloPolynomial::zero(Ambient::Tetrablock);
    z3sq.add_term(MultiIndex::new(1, 1, 0), Complex64::new(1.0, 0.0));
    z3sq.add_term(MultiIndex::new(0, 0, 1), Complex64::new(-1.0, 0.0));

    let mut out = HoloPolynomial::zero(Ambient::Tetrablock);
    for (idx, coeff) in g.terms() {
        debug_assert!(idx.a3 % 2 == 1);
        let m = (idx.a3 - 1) / 2;
        let mut term = HoloPolynomial::monomial(
            MultiIndex::new(idx.a1, idx.a2, 0),
            coeff * scale,
            Ambient::Tetrablock,
        );
        for _ in 0..m {
            term = term.mul(&z3sq);
        }
        out = out.add(&term);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{inner_product, inner_product_weighted, norm, BoundaryFn};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn shared_ctx() -> &'static MeasureContext {
        static CTX: OnceLock<MeasureContext> = OnceLock::new();
        CTX.get_or_init(|| MeasureContext::with_max_degree(18).unwrap())
    }

    fn shared_basis() -> &'static GradedBasis {
        static BASIS: OnceLock<GradedBasis> = OnceLock::new();
        BASIS.get_or_init(|| build_ladder_basis(8, shared_ctx()).unwrap())
    }

    fn mi(a1: u32, a2: u32, a3: u32) -> MultiIndex {
        MultiIndex::new(a1, a2, a3)
    }

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_poly(rng: &mut ChaCha8Rng, max_degree: u32, ambient: Ambient) -> HoloPolynomial {
        let mut p = HoloPolynomial::zero(ambient);
        for _ in 0..6 {
            let a1 = rng.random_range(0..=max_degree);
            let a2 = rng.random_range(0..=(max_degree - a1));
            let a3 = rng.random_range(0..=(max_degree - a1 - a2));
            p.add_term(
                mi(a1, a2, a3),
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
            );
        }
        p
    }

    #[test]
    fn enumeration_examples_and_order() {
        assert_eq!(enumerate_hom_minus(1), vec![mi(0, 0, 1)]);
        assert_eq!(enumerate_hom_minus(2), vec![mi(1, 0, 1), mi(0, 1, 1)]);
        assert!(enumerate_hom_minus(0).is_empty());
        assert_eq!(
            enumerate_hom_minus(3),
            vec![mi(0, 0, 3), mi(2, 0, 1), mi(1, 1, 1), mi(0, 2, 1)]
        );
    }

    #[test]
    fn dimension_formula_matches_enumeration() {
        assert_eq!(dim_hom_minus(1), 1);
        assert_eq!(dim_hom_minus(3), 4);
        assert_eq!(dim_hom_minus(4), 6);
        for n in 0..=12 {
            assert_eq!(dim_hom_minus(n), enumerate_hom_minus(n).len(), "n={n}");
        }
    }

    #[test]
    fn gram_examples() {
        let ctx = shared_ctx();
        let g1 = gram_matrix(1, ctx).unwrap();
        assert_eq!(g1.nrows(), 1);
        assert!((g1[(0, 0)].re - 1.0 / 3.0).abs() <= 1e-12);

        let g2 = gram_matrix(2, ctx).unwrap();
        assert_eq!(g2[(0, 1)], Complex64::new(0.0, 0.0));
        assert_eq!(g2[(1, 0)], Complex64::new(0.0, 0.0));
        // 2/15, pinned by the Monte-Carlo oracle alongside the 1/3 moment.
        assert!((g2[(0, 0)].re - 2.0 / 15.0).abs() <= 1e-12);

        for n in 1..=6 {
            let g = gram_matrix(n, ctx).unwrap();
            assert_eq!(g.adjoint(), g);
            assert!(hermitian_min_eigenvalue(&g) > 0.0);
        }

        let small = MeasureContext::with_max_degree(4).unwrap();
        assert!(matches!(
            gram_matrix(3, &small).unwrap_err(),
            CoreError::DegreeExceedsSpec { required: 6, .. }
        ));
    }

    #[test]
    fn hermitian_eigen_sanity() {
        let i = Complex64::new(0.0, 1.0);
        let g = DMatrix::from_row_slice(2, 2, &[c(2.0), i, -i, c(2.0)]);
        assert!((hermitian_min_eigenvalue(&g) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ladder_basis_is_orthonormal_with_exact_links() {
        let ctx = shared_ctx();
        let basis = shared_basis();
        for n in 1..=8 {
            assert_eq!(basis.dim_at(n), dim_hom_minus(n));
            let dev = max_gram_deviation_at(basis, n, ctx).unwrap();
            assert!(dev <= 1e-9, "degree {n}: deviation {dev:.3e}");
            if n >= 3 {
                let block = basis.block(n);
                assert_eq!(block.ladder_from_prev, dim_hom_minus(n - 2));
                for i in 0..block.ladder_from_prev {
                    let lifted = basis.vector_poly(n - 2, i).mul_phi3();
                    assert_eq!(lifted, basis.vector_poly(n, i), "n={n} i={i}");
                }
            }
        }
    }

    #[test]
    fn degree_one_vector_is_scaled_z3() {
        // e_1^1 = z3 / sqrt(1/3), coefficient sqrt(3).
        let basis = shared_basis();
        let p = basis.vector_poly(1, 0);
        assert_eq!(p.num_terms(), 1);
        assert!((p.coeff(&mi(0, 0, 1)).re - 3f64.sqrt()).abs() <= 1e-12);

        // First degree-3 vector is exactly phi3 * e_1^1.
        let p3 = basis.vector_poly(3, 0);
        assert_eq!(p3.coeff(&mi(1, 1, 1)), p.coeff(&mi(0, 0, 1)));
        assert_eq!(p3.coeff(&mi(0, 0, 3)), -p.coeff(&mi(0, 0, 1)));
    }

    #[test]
    fn cross_degree_monomials_are_orthogonal() {
        let ctx = shared_ctx();
        for n in 1..=6u32 {
            for l in 1..=6u32 {
                if n == l {
                    continue;
                }
                for a in enumerate_hom_minus(n) {
                    for b in enumerate_hom_minus(l) {
                        assert!(ctx.moment(&a, &b).unwrap().norm() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn multiplication_by_phi3_is_an_isometry() {
        let ctx = shared_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..8 {
            let u = random_poly(&mut rng, 6, Ambient::CartanII);
            let v = random_poly(&mut rng, 6, Ambient::CartanII);
            let lhs = inner_product(ctx, &u.mul_phi3(), &v.mul_phi3()).unwrap();
            let rhs = inner_product(ctx, &u, &v).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn boundary_coordinate_identity_holds_in_the_inner_product() {
        // w11 = conj(w22) det W pointwise, so <phi1 u, v> = <phi3 u, phi2 v>.
        let ctx = shared_ctx();
        let phi1 = HoloPolynomial::monomial(mi(1, 0, 0), c(1.0), Ambient::CartanII);
        let phi2 = HoloPolynomial::monomial(mi(0, 1, 0), c(1.0), Ambient::CartanII);
        let mut rng = ChaCha8Rng::seed_from_u64(73);
        for _ in 0..8 {
            let u = random_poly(&mut rng, 6, Ambient::CartanII);
            let v = random_poly(&mut rng, 6, Ambient::CartanII);
            let lhs = inner_product(ctx, &u.mul(&phi1), &v).unwrap();
            let rhs = inner_product(ctx, &u.mul_phi3(), &v.mul(&phi2)).unwrap();
            assert!((lhs - rhs).norm() <= 1e-10, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn psi_forward_examples() {
        let ctx = shared_ctx();
        let one = HoloPolynomial::constant(c(1.0), Ambient::Tetrablock);
        let img = psi_forward(&one, ctx).unwrap();
        assert_eq!(img.num_terms(), 1);
        let expected = -2.0 / ctx.normalization_c().sqrt();
        assert!((img.coeff(&mi(0, 0, 1)).re - expected).abs() <= 1e-12);
        assert!((norm(ctx, &img).unwrap() - 1.0).abs() <= 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(79);
        for _ in 0..5 {
            let f = random_poly(&mut rng, 3, Ambient::Tetrablock);
            let g = psi_forward(&f, ctx).unwrap();
            assert!(parity_check(&g));
            assert_eq!(g.apply_sigma(), g.scale(c(-1.0)));
        }
    }

    #[test]
    fn psi_is_an_isometry_onto_the_odd_subspace() {
        let ctx = shared_ctx();
        let mut rng = ChaCha8Rng::seed_from_u64(83);
        for _ in 0..10 {
            let f = random_poly(&mut rng, 4, Ambient::Tetrablock);
            let g = psi_forward(&f, ctx).unwrap();
            let n_cartan = norm(ctx, &g).unwrap();
            // E-side norm through the pushforward moments.
            let mut sq = Complex64::new(0.0, 0.0);
            for (mu, a) in f.terms() {
                for (nu, b) in f.terms() {
                    sq += a * b.conj() * ctx.moment_e(mu, nu).unwrap();
                }
            }
            let n_tetra = sq.re.max(0.0).sqrt();
            assert!(
                (n_cartan - n_tetra).abs() <= 1e-10,
                "{n_cartan} vs {n_tetra}"
            );
        }
    }

    #[test]
    fn psi_inverse_examples_and_round_trip() {
        let ctx = shared_ctx();
        let sqrt_c = ctx.normalization_c().sqrt();

        let z3 = HoloPolynomial::monomial(mi(0, 0, 1), c(1.0), Ambient::CartanII);
        let f = psi_inverse(&z3, ctx).unwrap();
        assert_eq!(f.num_terms(), 1);
        assert!((f.coeff(&mi(0, 0, 0)).re + sqrt_c / 2.0).abs() <= 1e-12);

        // g = z3 * phi3 recovers the (scaled) third tetrablock coordinate.
        let g = z3.mul_phi3();
        let f = psi_inverse(&g, ctx).unwrap();
        assert_eq!(f.num_terms(), 1);
        assert!((f.coeff(&mi(0, 0, 1)).re + sqrt_c / 2.0).abs() <= 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(89);
        for _ in 0..8 {
            let f = random_poly(&mut rng, 3, Ambient::Tetrablock);
            let round = psi_inverse(&psi_forward(&f, ctx).unwrap(), ctx).unwrap();
            let diff = round.sub(&f);
            let worst = diff.terms().map(|(_, v)| v.norm()).fold(0.0f64, f64::max);
            assert!(worst <= 1e-12, "round trip residual {worst:.3e}");

            let round2 = psi_forward(
                &psi_inverse(&psi_forward(&f, ctx).unwrap(), ctx).unwrap(),
                ctx,
            )
            .unwrap();
            assert!(parity_check(&round2));
        }

        let even = HoloPolynomial::monomial(mi(1, 0, 0), c(1.0), Ambient::CartanII);
        assert!(matches!(
            psi_inverse(&even, ctx).unwrap_err(),
            CoreError::ParityViolation
        ));
    }

    #[test]
    fn parity_check_examples() {
        let z3 = HoloPolynomial::monomial(mi(0, 0, 1), c(1.0), Ambient::CartanII);
        assert!(parity_check(&z3));
        let z1 = HoloPolynomial::monomial(mi(1, 0, 0), c(1.0), Ambient::CartanII);
        assert!(!parity_check(&z1));
        let mut p = HoloPolynomial::zero(Ambient::CartanII);
        p.add_term(mi(1, 0, 1), c(1.0));
        p.add_term(mi(0, 0, 3), c(1.0));
        assert!(parity_check(&p));
    }

    #[test]
    fn basis_expansion_is_exact_for_products() {
        let ctx = shared_ctx();
        let basis = shared_basis();
        // phi2 * e_1^1 lies in Hom^-(2); its expansion must reproduce the
        // polynomial exactly.
        let phi2 = HoloPolynomial::monomial(mi(0, 1, 0), c(1.0), Ambient::CartanII);
        let p = basis.vector_poly(1, 0).mul(&phi2);
        let (n, coords) = basis.expand(&p).unwrap();
        assert_eq!(n, 2);
        let mut rebuilt = HoloPolynomial::zero(Ambient::CartanII);
        for (i, x) in coords.iter().enumerate() {
            rebuilt = rebuilt.add(&basis.vector_poly(2, i).scale(*x));
        }
        let worst = rebuilt
            .sub(&p)
            .terms()
            .map(|(_, v)| v.norm())
            .fold(0.0f64, f64::max);
        assert!(worst <= 1e-13);

        // Expansion coordinates agree with quadrature inner products.
        let u = BoundaryFn::one();
        for (i, x) in coords.iter().enumerate() {
            let ip = inner_product_weighted(ctx, &u, &p, &basis.vector_poly(2, i)).unwrap();
            assert!((ip - x).norm() <= 1e-10);
        }
    }

    #[test]
    fn basis_json_round_trip_is_byte_identical() {
        let ctx = shared_ctx();
        let basis = shared_basis();
        let dir = std::env::temp_dir().join("tetralab-basis-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("basis1.json");
        let p2 = dir.join("basis2.json");
        basis.save(&p1).unwrap();
        let loaded = GradedBasis::load(&p1, ctx).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(loaded.tag(), basis.tag());

        let corrupt = dir.join("corrupt.json");
        std::fs::write(&corrupt, "{\"max_degree\": 3}").unwrap();
        assert!(matches!(
            GradedBasis::load(&corrupt, ctx).unwrap_err(),
            CoreError::BasisFormat(_)
        ));
    }
}

#[derive(Serialize, Deserialize)]
struct BasisFile {
    max_degree: u32,
    measure: MeasureInfo,
    degrees: Vec<BasisDegree>,
}

#[derive(Serialize, Deserialize)]
struct BasisDegree {
    n: u32,
    monomials: Vec<[u32; 3]>,
    vectors: Vec<Vec<[f64; 2]>>,
    ladder_from_prev: usize,
}

impl BasisFile {
    fn from_basis(basis: &GradedBasis) -> Self {
        let degrees = basis
            .blocks
            .iter()
            .map(|b| BasisDegree {
                n: b.n,
                monomials: b.monomials.iter().map(|m| [m.a1, m.a2, m.a3]).collect(),
                vectors: b
                    .vectors
                    .iter()
                    .map(|v| v.iter().map(|c| [c.re, c.im]).collect())
                    .collect(),
                ladder_from_prev: b.ladder_from_prev,
            })
            .collect();
        Self {
            max_degree: basis.max_degree,
            measure: basis.measure,
            degrees,
        }
    }

    fn into_basis(self) -> Result<GradedBasis> {
        if self.degrees.len() != self.max_degree as usize {
            return Err(CoreError::BasisFormat(format!(
                "expected {} degree blocks, found {}",
                self.max_degree,
                self.degrees.len()
            )));
        }
        let mut blocks = Vec::with_capacity(self.degrees.len());
        for (i, d) in self.degrees.iter().enumerate() {
            if d.n != i as u32 + 1 {
                return Err(CoreError::BasisFormat(format!(
                    "degree blocks out of order at position {i}"
                )));
            }
            let monomials: Vec<MultiIndex> = d
                .monomials
                .iter()
                .map(|m| MultiIndex::new(m[0], m[1], m[2]))
                .collect();
            let vectors: Vec<DVector<Complex64>> = d
                .vectors
                .iter()
                .map(|v| {
                    if v.len() != monomials.len() {
                        return Err(CoreError::BasisFormat(format!(
                            "degree {}: vector length {} != {}",
                            d.n,
                            v.len(),
                            monomials.len()
                        )));
                    }
                    Ok(DVector::from_iterator(
                        v.len(),
                        v.iter().map(|p| Complex64::new(p[0], p[1])),
                    ))
                })
                .collect::<Result<_>>()?;
            blocks.push(DegreeBlock {
                n: d.n,
                monomials,
                vectors,
                ladder_from_prev: d.ladder_from_prev,
            });
        }
        finalize_basis(self.max_degree, blocks, self.measure)
    }
}
