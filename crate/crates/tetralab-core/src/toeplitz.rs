//! Finite windows of Toeplitz operators on the tetrablock Hardy space,
//! realized in the ladder basis of the odd subspace.
//!
//! Window entries are quadratic forms `<u e_j, e_i>` of explicitly
//! multiplied polynomials, never truncated matrix products, so the
//! coordinate-tuple relations and the Brown-Halmos relations hold at
//! quadrature accuracy with no truncation artifacts. Checks that do apply a
//! window to a vector (the Brown-Halmos residuals) first expand the
//! multiplied basis vectors exactly in coefficient space and keep every
//! intermediate degree inside the window.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use crate::error::{CoreError, Result};
use crate::hardy::GradedBasis;
use crate::index::MultiIndex;
use crate::measure::MeasureContext;
use crate::poly::{inner_product, inner_product_weighted, Ambient, BoundaryFn, HoloPolynomial};
use crate::report::ProfilePoint;

const C_ONE: Complex64 = Complex64::new(1.0, 0.0);
const C_ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Trigonometric-polynomial symbol on the Shilov boundary of the tetrablock
/// in canonical coordinates: a sum of terms `c * z2^a * conj(z2)^b * z3^k`
/// with signed k. The coordinate z1 never appears; on the boundary it equals
/// `conj(z2) z3` and is rewritten away.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SymbolExpr {
    terms: BTreeMap<(u32, u32, i32), Complex64>,
}

impl SymbolExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn term(a: u32, b: u32, k: i32, coeff: Complex64) -> Self {
        let mut s = Self::zero();
        s.add_term(a, b, k, coeff);
        s
    }

    pub fn one() -> Self {
        Self::term(0, 0, 0, C_ONE)
    }

    pub fn add_term(&mut self, a: u32, b: u32, k: i32, coeff: Complex64) {
        let entry = self.terms.entry((a, b, k)).or_insert(C_ZERO);
        *entry += coeff;
        if entry.norm() <= crate::poly::COEFF_PRUNE {
            self.terms.remove(&(a, b, k));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32, i32), &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Complex conjugate symbol: (a, b, k) -> (b, a, -k).
    pub fn conj(&self) -> Self {
        let mut out = Self::zero();
        for (&(a, b, k), c) in &self.terms {
            out.add_term(b, a, -k, c.conj());
        }
        out
    }

    pub fn coeff(&self, a: u32, b: u32, k: i32) -> Complex64 {
        self.terms.get(&(a, b, k)).copied().unwrap_or(C_ZERO)
    }
}

impl fmt::Display for SymbolExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (&(a, b, k), c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}{:+}i)", c.re, c.im)?;
            if a > 0 {
                write!(f, "*z2^{a}")?;
            }
            if b > 0 {
                write!(f, "*~z2^{b}")?;
            }
            if k != 0 {
                write!(f, "*z3^{k}")?;
            }
        }
        Ok(())
    }
}

/// Pullback of a boundary symbol through the proper map: z2 -> z2,
/// conj(z2) -> conj(z2), z3^k -> phi3^k (conjugated for negative k). The
/// result is a sigma-invariant boundary function on the Cartan domain.
pub fn symbol_pullback(s: &SymbolExpr) -> BoundaryFn {
    let phi3 = HoloPolynomial::phi3();
    let mut out = BoundaryFn::zero();
    for (&(a, b, k), c) in s.terms() {
        let mut hol = HoloPolynomial::monomial(MultiIndex::new(0, a, 0), *c, Ambient::CartanII);
        let mut anti = HoloPolynomial::monomial(MultiIndex::new(0, b, 0), C_ONE, Ambient::CartanII);
        for _ in 0..k.max(0) {
            hol = hol.mul(&phi3);
        }
        for _ in 0..(-k).max(0) {
            anti = anti.mul(&phi3);
        }
        let part = BoundaryFn::from_holo_pair(&hol, &anti);
        for ((g, d), v) in part.terms() {
            out.add_term(*g, *d, *v);
        }
    }
    debug_assert!(out.is_sigma_even());
    out
}

/// A finite matrix block of an operator in the ladder basis, carrying its
/// row/column degree ranges (always starting at degree 1).
#[derive(Clone, Debug)]
pub struct OperatorWindow {
    matrix: DMatrix<Complex64>,
    row_max_degree: u32,
    col_max_degree: u32,
    row_offsets: Vec<usize>,
    col_offsets: Vec<usize>,
    basis_tag: String,
}

impl OperatorWindow {
    fn offsets(basis: &GradedBasis, max_degree: u32) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(max_degree as usize + 1);
        let mut acc = 0usize;
        offsets.push(0); // degree 0 is empty
        for n in 1..=max_degree {
            offsets.push(acc);
            acc += basis.dim_at(n);
        }
        offsets
    }

    pub fn zeros(basis: &GradedBasis, row_max_degree: u32, col_max_degree: u32) -> Self {
        let rows = basis.total_dim(row_max_degree);
        let cols = basis.total_dim(col_max_degree);
        Self {
            matrix: DMatrix::from_element(rows, cols, C_ZERO),
            row_max_degree,
            col_max_degree,
            row_offsets: Self::offsets(basis, row_max_degree),
            col_offsets: Self::offsets(basis, col_max_degree),
            basis_tag: basis.tag().to_string(),
        }
    }

    pub fn identity(basis: &GradedBasis, max_degree: u32) -> Self {
        let mut w = Self::zeros(basis, max_degree, max_degree);
        for i in 0..w.matrix.nrows() {
            w.matrix[(i, i)] = C_ONE;
        }
        w
    }

    pub fn from_matrix(
        matrix: DMatrix<Complex64>,
        basis: &GradedBasis,
        row_max_degree: u32,
        col_max_degree: u32,
    ) -> Result<Self> {
        let mut w = Self::zeros(basis, row_max_degree, col_max_degree);
        if matrix.nrows() != w.matrix.nrows() || matrix.ncols() != w.matrix.ncols() {
            return Err(CoreError::WindowFormat(format!(
                "matrix is {}x{}, expected {}x{} for degrees {}x{}",
                matrix.nrows(),
                matrix.ncols(),
                w.matrix.nrows(),
                w.matrix.ncols(),
                row_max_degree,
                col_max_degree
            )));
        }
        w.matrix = matrix;
        Ok(w)
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn row_max_degree(&self) -> u32 {
        self.row_max_degree
    }

    pub fn col_max_degree(&self) -> u32 {
        self.col_max_degree
    }

    pub fn basis_tag(&self) -> &str {
        &self.basis_tag
    }

    /// Flat row index of basis vector i at degree n.
    pub fn row_index(&self, n: u32, i: usize) -> usize {
        self.row_offsets[n as usize] + i
    }

    pub fn col_index(&self, n: u32, j: usize) -> usize {
        self.col_offsets[n as usize] + j
    }

    pub fn entry(&self, row_degree: u32, i: usize, col_degree: u32, j: usize) -> Complex64 {
        self.matrix[(self.row_index(row_degree, i), self.col_index(col_degree, j))]
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Conjugate transpose, swapping the degree ranges.
    pub fn adjoint(&self) -> Self {
        Self {
            matrix: self.matrix.adjoint(),
            row_max_degree: self.col_max_degree,
            col_max_degree: self.row_max_degree,
            row_offsets: self.col_offsets.clone(),
            col_offsets: self.row_offsets.clone(),
            basis_tag: self.basis_tag.clone(),
        }
    }

    fn expect_covers(&self, degree: u32) -> Result<()> {
        let available = self.row_max_degree.min(self.col_max_degree);
        if available < degree {
            return Err(CoreError::WindowTooSmall {
                required: degree,
                available,
            });
        }
        Ok(())
    }

    fn expect_basis(&self, basis: &GradedBasis) -> Result<()> {
        if self.basis_tag != basis.tag() {
            return Err(CoreError::BasisMismatch(format!(
                "window built for {:?}, basis is {:?}",
                self.basis_tag,
                basis.tag()
            )));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::report::write_json_file(path, &WindowFile::from_window(self))
    }

    /// Loads a window and attaches it to the given basis; dimensions must be
    /// consistent with the basis block sizes.
    pub fn load(path: &Path, basis: &GradedBasis) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let file: WindowFile = serde_json::from_str(&text)
            .map_err(|e| CoreError::WindowFormat(format!("parse: {e}")))?;
        file.into_window(basis)
    }
}

#[derive(Serialize, Deserialize)]
struct WindowFile {
    schema: String,
    row_max_degree: u32,
    col_max_degree: u32,
    entries: Vec<[f64; 2]>,
}

const WINDOW_SCHEMA: &str = "tetralab/window-v1";

impl WindowFile {
    fn from_window(w: &OperatorWindow) -> Self {
        // Row-major entry order.
        let mut entries = Vec::with_capacity(w.matrix.nrows() * w.matrix.ncols());
        for i in 0..w.matrix.nrows() {
            for j in 0..w.matrix.ncols() {
                let c = w.matrix[(i, j)];
                entries.push([c.re, c.im]);
            }
        }
        Self {
            schema: WINDOW_SCHEMA.to_string(),
            row_max_degree: w.row_max_degree,
            col_max_degree: w.col_max_degree,
            entries,
        }
    }

    fn into_window(self, basis: &GradedBasis) -> Result<OperatorWindow> {
        if self.schema != WINDOW_SCHEMA {
            return Err(CoreError::WindowFormat(format!(
                "unknown schema {:?}",
                self.schema
            )));
        }
        if self.row_max_degree > basis.max_degree() || self.col_max_degree > basis.max_degree() {
            return Err(CoreError::WindowFormat(format!(
                "window degrees {}x{} exceed basis max degree {}",
                self.row_max_degree,
                self.col_max_degree,
                basis.max_degree()
            )));
        }
        let rows = basis.total_dim(self.row_max_degree);
        let cols = basis.total_dim(self.col_max_degree);
        if self.entries.len() != rows * cols {
            return Err(CoreError::WindowFormat(format!(
                "expected {} entries, found {}",
                rows * cols,
                self.entries.len()
            )));
        }
        let matrix = DMatrix::from_fn(rows, cols, |i, j| {
            let p = self.entries[i * cols + j];
            Complex64::new(p[0], p[1])
        });
        OperatorWindow::from_matrix(matrix, basis, self.row_max_degree, self.col_max_degree)
    }
}

/// Largest combined moment degree an assembly will request.
fn required_degree(u: &BoundaryFn, row_max: u32, col_max: u32) -> u32 {
    let mut required = 0u32;
    for ((gamma, delta), _) in u.terms() {
        let gd = gamma.degree() as i64;
        let dd = delta.degree() as i64;
        let raise = gd - dd;
        for q in 1..=col_max as i64 {
            let p = q + raise;
            if p < 1 || p > row_max as i64 {
                continue;
            }
            required = required.max(((q + gd) + (p + dd)) as u32);
        }
    }
    required
}

/// Assembles the window of multiplication-then-projection by the boundary
/// function `u`: entries `<u e_j, e_i>` over the degree ranges.
fn assemble_window(
    u: &BoundaryFn,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    row_max_degree: u32,
    col_max_degree: u32,
) -> Result<OperatorWindow> {
    let top = row_max_degree.max(col_max_degree);
    if basis.max_degree() < top {
        return Err(CoreError::WindowTooSmall {
            required: top,
            available: basis.max_degree(),
        });
    }
    let required = required_degree(u, row_max_degree, col_max_degree);
    if required > ctx.max_degree() {
        return Err(CoreError::DegreeExceedsSpec {
            required,
            max_degree: ctx.max_degree(),
        });
    }

    let mut window = OperatorWindow::zeros(basis, row_max_degree, col_max_degree);
    let col_polys: Vec<(u32, usize, HoloPolynomial)> = (1..=col_max_degree)
        .flat_map(|q| (0..basis.dim_at(q)).map(move |j| (q, j)))
        .map(|(q, j)| (q, j, basis.vector_poly(q, j)))
        .collect();

    let columns: Vec<Result<DVector<Complex64>>> = col_polys
        .par_iter()
        .map(|(q, _j, ej)| {
            let mut col = DVector::from_element(window.matrix.nrows(), C_ZERO);
            for ((gamma, delta), cu) in u.terms() {
                let raise = gamma.degree() as i64 - delta.degree() as i64;
                let p = *q as i64 + raise;
                if p < 1 || p > row_max_degree as i64 {
                    continue;
                }
                let p = p as u32;
                for i in 0..basis.dim_at(p) {
                    let ei = basis.vector_poly(p, i);
                    let mut acc = C_ZERO;
                    for (mu, a) in ej.terms() {
                        for (nu, b) in ei.terms() {
                            acc += a * b.conj() * ctx.moment(&mu.add(gamma), &nu.add(delta))?;
                        }
                    }
                    col[window.row_index(p, i)] += cu * acc;
                }
            }
            Ok(col)
        })
        .collect();

    for ((q, j, _), col) in col_polys.iter().zip(columns) {
        window.matrix.set_column(window.col_index(*q, *j), &col?);
    }
    Ok(window)
}

/// Square window of the Toeplitz operator with the given symbol over degrees
/// 1..=n.
pub fn toeplitz_window(
    s: &SymbolExpr,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
) -> Result<OperatorWindow> {
    assemble_window(&symbol_pullback(s), basis, ctx, n, n)
}

/// Window of multiplication by a holomorphic polynomial factor.
pub fn multiplication_window(
    factor: &HoloPolynomial,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    row_max_degree: u32,
    col_max_degree: u32,
) -> Result<OperatorWindow> {
    assemble_window(
        &BoundaryFn::from_holo(factor),
        basis,
        ctx,
        row_max_degree,
        col_max_degree,
    )
}

fn phi_polys() -> [HoloPolynomial; 3] {
    [
        HoloPolynomial::monomial(MultiIndex::new(1, 0, 0), C_ONE, Ambient::CartanII),
        HoloPolynomial::monomial(MultiIndex::new(0, 1, 0), C_ONE, Ambient::CartanII),
        HoloPolynomial::phi3(),
    ]
}

/// Windows of multiplication by the three components of the proper map,
/// with rows extended two degrees past the columns so every raised image
/// stays inside. Identical to the coordinate-multiplication windows on the
/// tetrablock side under the unitary transfer.
pub fn coordinate_windows(
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
) -> Result<[OperatorWindow; 3]> {
    let [p1, p2, p3] = phi_polys();
    Ok([
        multiplication_window(&p1, basis, ctx, n + 2, n)?,
        multiplication_window(&p2, basis, ctx, n + 2, n)?,
        multiplication_window(&p3, basis, ctx, n + 2, n)?,
    ])
}

/// Max-entry residuals of a triple of operator relations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelationResiduals {
    pub r1: f64,
    pub r2: f64,
    pub r3: f64,
}

impl RelationResiduals {
    pub fn max(&self) -> f64 {
        self.r1.max(self.r2).max(self.r3)
    }

    pub fn pass(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Entrywise residuals of the coordinate-tuple relations over degrees <= n:
/// multiplication by phi1 equals adjoint-phi2 times phi3, its 1<->2 twin,
/// and the isometry of multiplication by phi3. Every quadratic form is an
/// exact polynomial inner product.
pub fn check_tuple_relations(
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
    _tol: f64,
) -> Result<RelationResiduals> {
    if basis.max_degree() < n {
        return Err(CoreError::WindowTooSmall {
            required: n,
            available: basis.max_degree(),
        });
    }
    // The phi3-isometry residual pairs two degree-(n+2) polynomials.
    let required = 2 * n + 4;
    if required > ctx.max_degree() {
        return Err(CoreError::DegreeExceedsSpec {
            required,
            max_degree: ctx.max_degree(),
        });
    }
    let [p1, p2, p3] = phi_polys();
    let elements: Vec<(u32, usize)> = (1..=n)
        .flat_map(|q| (0..basis.dim_at(q)).map(move |j| (q, j)))
        .collect();
    let lifted: Vec<[HoloPolynomial; 4]> = elements
        .iter()
        .map(|&(q, j)| {
            let e = basis.vector_poly(q, j);
            [e.mul(&p1), e.mul(&p2), e.mul(&p3), e]
        })
        .collect();

    let maxima: Vec<Result<[f64; 3]>> = (0..elements.len())
        .into_par_iter()
        .map(|jj| {
            let [f1, f2, f3, _] = &lifted[jj];
            let mut m = [0.0f64; 3];
            for (ii, [g1, g2, g3, e_i]) in lifted.iter().enumerate() {
                let lhs1 = inner_product(ctx, f1, e_i)?;
                let rhs1 = inner_product(ctx, f3, g2)?;
                m[0] = m[0].max((lhs1 - rhs1).norm());

                let lhs2 = inner_product(ctx, f2, e_i)?;
                let rhs2 = inner_product(ctx, f3, g1)?;
                m[1] = m[1].max((lhs2 - rhs2).norm());

                let lhs3 = inner_product(ctx, f3, g3)?;
                let target = if ii == jj { C_ONE } else { C_ZERO };
                m[2] = m[2].max((lhs3 - target).norm());
            }
            Ok(m)
        })
        .collect();

    let mut r = [0.0f64; 3];
    for m in maxima {
        let m = m?;
        for (ri, mi) in r.iter_mut().zip(m) {
            *ri = ri.max(mi);
        }
    }
    Ok(RelationResiduals {
        r1: r[0],
        r2: r[1],
        r3: r[2],
    })
}

/// Entrywise Brown-Halmos residuals of a window A over test vectors of
/// degree <= n. A must cover degrees n+2 in rows and columns so the raised
/// expansions stay inside its ranges.
pub fn brown_halmos_residual(
    a: &OperatorWindow,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
) -> Result<RelationResiduals> {
    a.expect_basis(basis)?;
    a.expect_covers(n + 2)?;
    if basis.max_degree() < n + 2 {
        return Err(CoreError::WindowTooSmall {
            required: n + 2,
            available: basis.max_degree(),
        });
    }
    let _ = ctx;
    let [p1, p2, p3] = phi_polys();
    let elements: Vec<(u32, usize)> = (1..=n)
        .flat_map(|q| (0..basis.dim_at(q)).map(move |j| (q, j)))
        .collect();

    // Exact basis expansions of phi_l * e, embedded in the window's column
    // and row coordinate spaces.
    let embed = |poly: &HoloPolynomial,
                 max_degree: u32,
                 offsets_of: &OperatorWindow,
                 rows: bool|
     -> Result<DVector<Complex64>> {
        let (deg, coords) = basis.expand(poly)?;
        debug_assert!(deg <= max_degree);
        let len = basis.total_dim(max_degree);
        let mut v = DVector::from_element(len, C_ZERO);
        let base = if rows {
            offsets_of.row_index(deg, 0)
        } else {
            offsets_of.col_index(deg, 0)
        };
        for (i, c) in coords.iter().enumerate() {
            v[base + i] = *c;
        }
        Ok(v)
    };

    struct Lift {
        x1: DVector<Complex64>,
        x2: DVector<Complex64>,
        x3: DVector<Complex64>,
        y1: DVector<Complex64>,
        y2: DVector<Complex64>,
        y3: DVector<Complex64>,
    }

    let lifts: Vec<Lift> = elements
        .iter()
        .map(|&(q, j)| -> Result<Lift> {
            let e = basis.vector_poly(q, j);
            let f1 = e.mul(&p1);
            let f2 = e.mul(&p2);
            let f3 = e.mul(&p3);
            Ok(Lift {
                x1: embed(&f1, a.col_max_degree(), a, false)?,
                x2: embed(&f2, a.col_max_degree(), a, false)?,
                x3: embed(&f3, a.col_max_degree(), a, false)?,
                y1: embed(&f1, a.row_max_degree(), a, true)?,
                y2: embed(&f2, a.row_max_degree(), a, true)?,
                y3: embed(&f3, a.row_max_degree(), a, true)?,
            })
        })
        .collect::<Result<_>>()?;

    let maxima: Vec<[f64; 3]> = (0..elements.len())
        .into_par_iter()
        .map(|jj| {
            let (q, j) = elements[jj];
            let ax1 = &a.matrix * &lifts[jj].x1;
            let ax2 = &a.matrix * &lifts[jj].x2;
            let ax3 = &a.matrix * &lifts[jj].x3;
            let mut m = [0.0f64; 3];
            for (ii, &(p, i)) in elements.iter().enumerate() {
                let row = a.row_index(p, i);
                let r1 = (ax1[row] - lifts[ii].y2.dotc(&ax3)).norm();
                let r2 = (ax2[row] - lifts[ii].y1.dotc(&ax3)).norm();
                let r3 = (lifts[ii].y3.dotc(&ax3) - a.matrix[(row, a.col_index(q, j))]).norm();
                m[0] = m[0].max(r1);
                m[1] = m[1].max(r2);
                m[2] = m[2].max(r3);
            }
            m
        })
        .collect();

    let mut r = [0.0f64; 3];
    for m in maxima {
        for (ri, mi) in r.iter_mut().zip(m) {
            *ri = ri.max(mi);
        }
    }
    Ok(RelationResiduals {
        r1: r[0],
        r2: r[1],
        r3: r[2],
    })
}

/// Max deviation `|<u e_i^q, e_j^m> - <u e_i^{q+2r}, e_j^{m+2r}>|` over all
/// ladder-transported index pairs with both shifted degrees <= n.
pub fn ladder_shift_check(
    s: &SymbolExpr,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
    r: u32,
) -> Result<f64> {
    if basis.max_degree() < n {
        return Err(CoreError::WindowTooSmall {
            required: n,
            available: basis.max_degree(),
        });
    }
    let u = symbol_pullback(s);
    let (hd, ad) = u.degrees();
    let required = (n + hd) + (n + ad);
    if required > ctx.max_degree() {
        return Err(CoreError::DegreeExceedsSpec {
            required,
            max_degree: ctx.max_degree(),
        });
    }
    let shift = 2 * r;
    let mut pairs = Vec::new();
    for q in 1..=n.saturating_sub(shift) {
        for m in 1..=n.saturating_sub(shift) {
            for i in 0..basis.dim_at(q) {
                for j in 0..basis.dim_at(m) {
                    pairs.push((q, m, i, j));
                }
            }
        }
    }
    let devs: Vec<Result<f64>> = pairs
        .par_iter()
        .map(|&(q, m, i, j)| {
            let base = inner_product_weighted(
                ctx,
                &u,
                &basis.vector_poly(q, i),
                &basis.vector_poly(m, j),
            )?;
            let shifted = inner_product_weighted(
                ctx,
                &u,
                &basis.vector_poly(q + shift, i),
                &basis.vector_poly(m + shift, j),
            )?;
            Ok((base - shifted).norm())
        })
        .collect();
    let mut max = 0.0f64;
    for d in devs {
        max = max.max(d?);
    }
    Ok(max)
}

/// Seed degrees of the decay probe; covers every degree raise the canonical
/// dictionary with a+b <= 2, |k| <= 1 can produce.
pub const PROBE_SEED_MAX_DEGREE: u32 = 5;

/// Decay profile of the window entries along the ladder: for each shift r,
/// the largest `|<u e_i^{q+2r}, e_j^{m+2r}>|` over the fixed seed set of
/// degrees `q, m <= 5`. Toeplitz entries are ladder-constant, so a nonzero
/// symbol yields a profile bounded below; a compact operator would have to
/// decay.
pub fn compactness_probe(
    s: &SymbolExpr,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
) -> Result<Vec<ProfilePoint>> {
    let seed_max = PROBE_SEED_MAX_DEGREE.min(n);
    let r_max = (n - seed_max) / 2;
    let u = symbol_pullback(s);
    let (hd, ad) = u.degrees();
    let top = seed_max + 2 * r_max;
    let required = (top + hd) + (top + ad);
    if required > ctx.max_degree() {
        return Err(CoreError::DegreeExceedsSpec {
            required,
            max_degree: ctx.max_degree(),
        });
    }
    if basis.max_degree() < top {
        return Err(CoreError::WindowTooSmall {
            required: top,
            available: basis.max_degree(),
        });
    }
    let mut seeds = Vec::new();
    for q in 1..=seed_max {
        for m in 1..=seed_max {
            for i in 0..basis.dim_at(q) {
                for j in 0..basis.dim_at(m) {
                    seeds.push((q, m, i, j));
                }
            }
        }
    }
    let mut profile = Vec::with_capacity(r_max as usize + 1);
    for r in 0..=r_max {
        let shift = 2 * r;
        let entries: Vec<Result<f64>> = seeds
            .par_iter()
            .map(|&(q, m, i, j)| {
                Ok(inner_product_weighted(
                    ctx,
                    &u,
                    &basis.vector_poly(q + shift, i),
                    &basis.vector_poly(m + shift, j),
                )?
                .norm())
            })
            .collect();
        let mut max = 0.0f64;
        for e in entries {
            max = max.max(e?);
        }
        profile.push(ProfilePoint {
            r,
            max_abs_entry: max,
        });
    }
    Ok(profile)
}

/// Canonical recovery dictionary: terms with a+b <= dict_degree and
/// |k| <= dict_degree whose windows are nonzero on degrees 1..=window_max
/// (the degree raise a - b + 2k must fit inside the window).
pub fn canonical_dictionary(dict_degree: u32, window_max: u32) -> Vec<(u32, u32, i32)> {
    let dd = dict_degree as i32;
    let mut out = Vec::new();
    for a in 0..=dict_degree {
        for b in 0..=(dict_degree - a) {
            for k in -dd..=dd {
                let raise = a as i32 - b as i32 + 2 * k;
                if raise.unsigned_abs() < window_max {
                    out.push((a, b, k));
                }
            }
        }
    }
    out.sort();
    out
}

/// Least-squares fit of a window against the Toeplitz dictionary: returns
/// the recovered symbol and the relative Frobenius residual. A residual at
/// recovery tolerance certifies the window as Toeplitz with that symbol.
pub fn symbol_recovery(
    a: &OperatorWindow,
    basis: &GradedBasis,
    ctx: &MeasureContext,
    n: u32,
    dict_degree: u32,
) -> Result<(SymbolExpr, f64)> {
    a.expect_basis(basis)?;
    let m = n + 2;
    a.expect_covers(m)?;
    let dict = canonical_dictionary(dict_degree, m);
    let windows: Vec<OperatorWindow> = dict
        .iter()
        .map(|&(ta, tb, tk)| toeplitz_window(&SymbolExpr::term(ta, tb, tk, C_ONE), basis, ctx, m))
        .collect::<Result<_>>()?;

    // Restrict A to the fitted degree range if it is larger.
    let rows = basis.total_dim(m);
    let cols = basis.total_dim(m);
    let a_block = a.matrix.view((0, 0), (rows, cols));

    let t = dict.len();
    let mut gram = DMatrix::from_element(t, t, C_ZERO);
    let mut rhs = DVector::from_element(t, C_ZERO);
    for (p, wp) in windows.iter().enumerate() {
        for (q, wq) in windows.iter().enumerate() {
            let mut acc = C_ZERO;
            for (x, y) in wp.matrix.iter().zip(wq.matrix.iter()) {
                acc += x.conj() * y;
            }
            gram[(p, q)] = acc;
        }
        let mut acc = C_ZERO;
        for (x, y) in wp.matrix.iter().zip(a_block.iter()) {
            acc += x.conj() * y;
        }
        rhs[p] = acc;
    }

    let svd = gram.clone().svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, &v| m.max(v));
    let smin = svd
        .singular_values
        .iter()
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let ratio = if smax > 0.0 { smin / smax } else { 0.0 };
    if ratio < 1e-12 {
        return Err(CoreError::SingularDictionary { ratio });
    }
    let coeffs = svd
        .solve(&rhs, 1e-14)
        .map_err(|_| CoreError::SingularDictionary { ratio })?;

    let mut symbol = SymbolExpr::zero();
    for (&(ta, tb, tk), c) in dict.iter().zip(coeffs.iter()) {
        symbol.add_term(ta, tb, tk, *c);
    }

    let mut residual_sq = 0.0f64;
    let mut a_sq = 0.0f64;
    for (idx, av) in a_block.iter().enumerate() {
        let row = idx % rows;
        let col = idx / rows;
        let mut fit = C_ZERO;
        for (w, c) in windows.iter().zip(coeffs.iter()) {
            fit += c * w.matrix[(row, col)];
        }
        residual_sq += (av - fit).norm_sqr();
        a_sq += av.norm_sqr();
    }
    let rel = if a_sq > 0.0 {
        (residual_sq / a_sq).sqrt()
    } else {
        residual_sq.sqrt()
    };
    Ok((symbol, rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardy::build_ladder_basis;
    use crate::measure::{mc_estimate, MeasureContext};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::OnceLock;

    fn shared_ctx() -> &'static MeasureContext {
        static CTX: OnceLock<MeasureContext> = OnceLock::new();
        CTX.get_or_init(|| MeasureContext::with_max_degree(22).unwrap())
    }

    fn shared_basis() -> &'static GradedBasis {
        static BASIS: OnceLock<GradedBasis> = OnceLock::new();
        BASIS.get_or_init(|| build_ladder_basis(8, shared_ctx()).unwrap())
    }

    fn mi(a1: u32, a2: u32, a3: u32) -> MultiIndex {
        MultiIndex::new(a1, a2, a3)
    }

    fn random_poly(rng: &mut ChaCha8Rng, max_degree: u32) -> HoloPolynomial {
        let mut p = HoloPolynomial::zero(Ambient::CartanII);
        for _ in 0..5 {
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
    fn pullback_examples() {
        let z3 = SymbolExpr::term(0, 0, 1, C_ONE);
        let pulled = symbol_pullback(&z3);
        assert_eq!(pulled, BoundaryFn::from_holo(&HoloPolynomial::phi3()));

        assert_eq!(symbol_pullback(&SymbolExpr::one()), BoundaryFn::one());

        // conj(phi2) * phi3 equals phi1 pointwise on the boundary: the
        // difference pairs to zero against anything.
        let ctx = shared_ctx();
        let z1_as_symbol = SymbolExpr::term(0, 1, 1, C_ONE);
        let mut diff = symbol_pullback(&z1_as_symbol);
        let phi1 = HoloPolynomial::monomial(mi(1, 0, 0), C_ONE, Ambient::CartanII);
        for ((g, d), v) in BoundaryFn::from_holo(&phi1).terms() {
            diff.add_term(*g, *d, -v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for _ in 0..5 {
            let u = random_poly(&mut rng, 4);
            let v = random_poly(&mut rng, 4);
            let ip = inner_product_weighted(ctx, &diff, &u, &v).unwrap();
            assert!(ip.norm() <= 1e-10, "{ip}");
        }
    }

    #[test]
    fn constant_symbol_gives_identity_window() {
        let w = toeplitz_window(&SymbolExpr::one(), shared_basis(), shared_ctx(), 4).unwrap();
        let id = OperatorWindow::identity(shared_basis(), 4);
        let dev = (w.matrix() - id.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12, "{dev:.3e}");
    }

    #[test]
    fn z3_symbol_is_the_ladder_shift() {
        let basis = shared_basis();
        let w = toeplitz_window(&SymbolExpr::term(0, 0, 1, C_ONE), basis, shared_ctx(), 6).unwrap();
        for q in 1..=6u32 {
            for j in 0..basis.dim_at(q) {
                for p in 1..=6u32 {
                    for i in 0..basis.dim_at(p) {
                        let e = w.entry(p, i, q, j);
                        let expect = if p == q + 2 && i == j { 1.0 } else { 0.0 };
                        assert!(
                            (e - Complex64::new(expect, 0.0)).norm() <= 1e-10,
                            "entry ({p},{i})({q},{j}) = {e}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn conjugate_symbol_gives_adjoint_window() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let mut s = SymbolExpr::term(0, 1, 1, Complex64::new(1.0, 0.25));
        s.add_term(2, 0, 0, Complex64::new(0.5, -0.125));
        let w = toeplitz_window(&s, basis, ctx, 6).unwrap();
        let w_conj = toeplitz_window(&s.conj(), basis, ctx, 6).unwrap();
        let dev = (w_conj.matrix() - w.adjoint().matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12, "{dev:.3e}");

        // z3-bar window is the transpose-conjugate of the z3 window.
        let up = toeplitz_window(&SymbolExpr::term(0, 0, 1, C_ONE), basis, ctx, 6).unwrap();
        let down = toeplitz_window(&SymbolExpr::term(0, 0, -1, C_ONE), basis, ctx, 6).unwrap();
        let dev = (down.matrix() - up.adjoint().matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12, "{dev:.3e}");
    }

    #[test]
    fn window_assembly_rejects_degrees_beyond_the_grid() {
        // The deepest ladder-shift entry <phi3 e^4, e^6> pairs combined
        // degree 12 against a degree-8 grid.
        let basis = shared_basis();
        let small = MeasureContext::with_max_degree(8).unwrap();
        let err =
            toeplitz_window(&SymbolExpr::term(0, 0, 1, C_ONE), basis, &small, 6).unwrap_err();
        match err {
            CoreError::DegreeExceedsSpec {
                required,
                max_degree,
            } => {
                assert_eq!(required, 12);
                assert_eq!(max_degree, 8);
            }
            other => panic!("wrong error {other}"),
        }

        // A symbol whose raise pushes every entry outside the window has a
        // legitimately zero window and needs no moments at all.
        let w = toeplitz_window(&SymbolExpr::term(0, 0, 2, C_ONE), basis, &small, 4).unwrap();
        assert_eq!(w.max_abs_entry(), 0.0);
    }

    #[test]
    fn z2_window_matches_monte_carlo_inner_products() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let w = toeplitz_window(&SymbolExpr::term(1, 0, 0, C_ONE), basis, ctx, 3).unwrap();
        for i in 0..basis.dim_at(2) {
            let e1 = basis.vector_poly(1, 0);
            let e2 = basis.vector_poly(2, i);
            let est = mc_estimate(400_000, 55 + i as u64, |p| {
                let z = p.to_point();
                z[1] * e1.eval(&z) * e2.eval(&z).conj()
            });
            assert!(
                est.agrees_with(w.entry(2, i, 1, 0), 4.0, 1e-12),
                "entry i={i}: {:?} vs {}",
                est,
                w.entry(2, i, 1, 0)
            );
        }
    }

    #[test]
    fn coordinate_window_phi3_has_orthonormal_columns() {
        let [_, _, w3] = coordinate_windows(shared_basis(), shared_ctx(), 5).unwrap();
        let gram = w3.matrix().adjoint() * w3.matrix();
        for i in 0..gram.nrows() {
            for j in 0..gram.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::new(target, 0.0)).norm() <= 1e-10);
            }
        }
    }

    #[test]
    fn coordinate_windows_commute_on_the_safe_subwindow() {
        let basis = shared_basis();
        let n = 6u32;
        let ws = coordinate_windows(basis, shared_ctx(), n).unwrap();
        let inner_rows = basis.total_dim(n);
        let safe_cols = basis.total_dim(n - 4);
        for a in 0..3 {
            for b in (a + 1)..3 {
                let wa = ws[a].matrix().view((0, 0), (inner_rows, inner_rows));
                let wb = ws[b].matrix().view((0, 0), (inner_rows, inner_rows));
                let ab = wa * wb;
                let ba = wb * wa;
                let mut dev: f64 = 0.0;
                for col in 0..safe_cols {
                    for row in 0..inner_rows {
                        dev = dev.max((ab[(row, col)] - ba[(row, col)]).norm());
                    }
                }
                assert!(dev <= 1e-10, "[{a},{b}] dev {dev:.3e}");
            }
        }
    }

    #[test]
    fn degree_one_phi3_window_is_the_unit_ladder_entry() {
        let [_, _, w3] = coordinate_windows(shared_basis(), shared_ctx(), 1).unwrap();
        // Rows cover degrees 1..=3; the single degree-3 image of e_1^1 is e_1^3.
        assert!((w3.entry(3, 0, 1, 0) - C_ONE).norm() <= 1e-12);
        let total: f64 = w3.matrix().iter().map(|c| c.norm_sqr()).sum();
        assert!((total - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn tuple_relations_hold_at_quadrature_accuracy() {
        let res = check_tuple_relations(shared_basis(), shared_ctx(), 6, 1e-9).unwrap();
        assert!(res.pass(1e-9), "{res:?}");

        let res1 = check_tuple_relations(shared_basis(), shared_ctx(), 1, 1e-12).unwrap();
        assert!(res1.r3 <= 1e-12, "{res1:?}");
    }

    #[test]
    fn brown_halmos_necessity_for_a_dictionary_symbol() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let a = toeplitz_window(&SymbolExpr::term(0, 1, 1, C_ONE), basis, ctx, 8).unwrap();
        let res = brown_halmos_residual(&a, basis, ctx, 6).unwrap();
        assert!(res.max() <= 1e-8, "{res:?}");

        let id = OperatorWindow::identity(basis, 6);
        let res = brown_halmos_residual(&id, basis, ctx, 4).unwrap();
        assert!(res.max() <= 1e-12, "{res:?}");
    }

    #[test]
    fn rank_one_projector_fails_brown_halmos() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        // Projector onto e_1^1.
        let mut proj = OperatorWindow::zeros(basis, 6, 6);
        let idx = proj.row_index(1, 0);
        proj.matrix[(idx, idx)] = C_ONE;

        // Small-matrix oracle for the defect: <A z3 e_1^1, z3 e_1^1> uses
        // A e_1^3 = 0 while <A e_1^1, e_1^1> = 1, so r3 >= 1.
        let rho = 1.0;
        let res = brown_halmos_residual(&proj, basis, ctx, 4).unwrap();
        assert!(res.r3 >= rho - 1e-9, "{res:?}");
        assert!(res.r3 >= 10.0 * 1e-8);

        // Window covering only degree 4 cannot host a degree-4 check.
        let small = OperatorWindow::identity(basis, 4);
        assert!(matches!(
            brown_halmos_residual(&small, basis, ctx, 4).unwrap_err(),
            CoreError::WindowTooSmall {
                required: 6,
                available: 4
            }
        ));
    }

    #[test]
    fn brown_halmos_necessity_sweep() {
        // Every dictionary symbol with a+b <= 2, |k| <= 2 satisfies the
        // relations at window scale.
        let basis = shared_basis();
        let ctx = shared_ctx();
        for a in 0..=2u32 {
            for b in 0..=(2 - a) {
                for k in -2..=2i32 {
                    let s = SymbolExpr::term(a, b, k, C_ONE);
                    let w = toeplitz_window(&s, basis, ctx, 8).unwrap();
                    let res = brown_halmos_residual(&w, basis, ctx, 6).unwrap();
                    assert!(res.max() <= 1e-8, "symbol ({a},{b},{k}): {res:?}");
                }
            }
        }
    }

    #[test]
    fn ladder_shift_checks() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        for r in 0..=3 {
            let dev = ladder_shift_check(&SymbolExpr::one(), basis, ctx, 8, r).unwrap();
            assert!(dev <= 1e-12, "r={r} dev {dev:.3e}");
        }
        let s = SymbolExpr::term(1, 1, 0, C_ONE);
        assert_eq!(ladder_shift_check(&s, basis, ctx, 8, 0).unwrap(), 0.0);
        for r in 1..=3 {
            let dev = ladder_shift_check(&s, basis, ctx, 8, r).unwrap();
            assert!(dev <= 1e-9, "r={r} dev {dev:.3e}");
        }
    }

    #[test]
    fn compactness_probe_profiles() {
        let basis = shared_basis();
        let ctx = shared_ctx();

        let zero = compactness_probe(&SymbolExpr::zero(), basis, ctx, 8).unwrap();
        assert!(zero.iter().all(|p| p.max_abs_entry == 0.0));

        let z3 = compactness_probe(&SymbolExpr::term(0, 0, 1, C_ONE), basis, ctx, 8).unwrap();
        assert!(z3.len() >= 2);
        for p in &z3 {
            assert!((p.max_abs_entry - 1.0).abs() <= 1e-9, "{p:?}");
        }

        // Lower bound sqrt(2/5) comes from the quadrature oracle: the
        // (degree 1 -> 2) entry of the z1 coordinate window.
        let probe = compactness_probe(&SymbolExpr::term(0, 1, 1, C_ONE), basis, ctx, 8).unwrap();
        let rho_prime = (2.0f64 / 5.0).sqrt();
        let r0 = probe[0].max_abs_entry;
        assert!(r0 >= rho_prime - 1e-6, "r0 {r0}");
        for p in &probe {
            assert!((p.max_abs_entry - r0).abs() <= 1e-9, "{p:?}");
            assert!(p.max_abs_entry >= rho_prime - 1e-6);
        }
    }

    #[test]
    fn recovery_round_trip() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let mut s = SymbolExpr::term(0, 1, 1, Complex64::new(0.5, 0.0));
        s.add_term(2, 0, 0, C_ONE);
        let a = toeplitz_window(&s, basis, ctx, 8).unwrap();
        let (recovered, residual) = symbol_recovery(&a, basis, ctx, 6, 3).unwrap();
        assert!(residual <= 1e-6, "residual {residual:.3e}");
        assert!((recovered.coeff(0, 1, 1) - Complex64::new(0.5, 0.0)).norm() <= 1e-6);
        assert!((recovered.coeff(2, 0, 0) - C_ONE).norm() <= 1e-6);
        for (&(ta, tb, tk), c) in recovered.terms() {
            if (ta, tb, tk) != (0, 1, 1) && (ta, tb, tk) != (2, 0, 0) {
                assert!(c.norm() <= 1e-6, "spurious term ({ta},{tb},{tk}) = {c}");
            }
        }
    }

    #[test]
    fn recovery_of_zero_and_of_the_first_coordinate() {
        let basis = shared_basis();
        let ctx = shared_ctx();

        let zero = OperatorWindow::zeros(basis, 8, 8);
        let (symbol, residual) = symbol_recovery(&zero, basis, ctx, 6, 2).unwrap();
        assert!(symbol.is_zero());
        assert_eq!(residual, 0.0);

        // Multiplication by the first tetrablock coordinate recovers the
        // boundary identity z1 = conj(z2) z3.
        let phi1 = HoloPolynomial::monomial(mi(1, 0, 0), C_ONE, Ambient::CartanII);
        let w1 = multiplication_window(&phi1, basis, ctx, 8, 8).unwrap();
        let (symbol, residual) = symbol_recovery(&w1, basis, ctx, 6, 2).unwrap();
        assert!(residual <= 1e-9, "residual {residual:.3e}");
        assert!((symbol.coeff(0, 1, 1) - C_ONE).norm() <= 1e-6);

        // The two windows agree entrywise.
        let wz = toeplitz_window(&SymbolExpr::term(0, 1, 1, C_ONE), basis, ctx, 8).unwrap();
        let dev = (w1.matrix() - wz.matrix())
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-9, "window deviation {dev:.3e}");
    }

    #[test]
    fn recovery_rejects_random_hermitian_windows() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let dim = basis.total_dim(8);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for _ in 0..5 {
            let mut m = DMatrix::from_fn(dim, dim, |_, _| {
                Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            });
            m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
            let w = OperatorWindow::from_matrix(m, basis, 8, 8).unwrap();
            let (_, residual) = symbol_recovery(&w, basis, ctx, 6, 2).unwrap();
            assert!(residual > 1e-2, "residual {residual:.3e}");
            let res = brown_halmos_residual(&w, basis, ctx, 6).unwrap();
            assert!(res.max() >= 10.0 * 1e-8, "{res:?}");
        }
    }

    #[test]
    fn dictionary_is_well_conditioned_and_window_supported() {
        let dict = canonical_dictionary(3, 8);
        // Terms whose degree raise exceeds the window are excluded.
        assert!(!dict.contains(&(3, 0, 3)));
        assert!(dict.contains(&(0, 1, 1)));
        assert!(dict.contains(&(0, 0, 3)));
        for &(a, b, k) in &dict {
            assert!((a as i32 - b as i32 + 2 * k).unsigned_abs() <= 7);
        }
    }

    #[test]
    fn window_json_round_trip() {
        let basis = shared_basis();
        let ctx = shared_ctx();
        let w = toeplitz_window(&SymbolExpr::term(0, 0, 1, C_ONE), basis, ctx, 4).unwrap();
        let dir = std::env::temp_dir().join("tetralab-window-test");
        std::fs::create_dir_all(&dir).unwrap();
        let p1 = dir.join("w1.json");
        let p2 = dir.join("w2.json");
        w.save(&p1).unwrap();
        let loaded = OperatorWindow::load(&p1, basis).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());

        std::fs::write(&p1, "{}").unwrap();
        assert!(matches!(
            OperatorWindow::load(&p1, basis).unwrap_err(),
            CoreError::WindowFormat(_)
        ));
    }
}
