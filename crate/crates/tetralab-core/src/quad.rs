//! Deterministic quadrature for the invariant boundary measure.
//!
//! Haar measure on 2x2 unitaries is parametrized by a global phase `alpha`
//! plus Euler angles `(psi, chi, theta)` of the special-unitary factor
//! `[[a, b], [-conj(b), conj(a)]]` with `a = e^{i psi} cos(theta)`,
//! `b = e^{i chi} sin(theta)`. Under `W = U U^T` the boundary coordinates
//! become (writing `p = psi + chi`, `s = chi - psi`, `t = cos^2(theta)`)
//!
//! ```text
//! w11 = e^{2i alpha} e^{ip} A(s,t)      A = e^{-is} t + e^{is} (1-t)
//! w22 = e^{2i alpha} e^{-ip} conj(A)
//! w12 = e^{2i alpha} D(s,t)             D = 2i sin(s) sqrt(t(1-t))
//! ```
//!
//! and Haar measure is the product of uniform angles with `t` uniform on
//! `[0,1]`. The global phase integrates analytically and kills every pair
//! with unequal total degrees. The grid is equispaced in the two remaining
//! periodic angles and Gauss-Legendre in `t`; node counts are chosen so
//! every monomial pair within `max_degree` is integrated exactly.
//!
//! A monomial pair's integrand depends on `(psi, chi)` only through `p` and
//! `s`, with pure frequency in `p`. On the equispaced product grid the
//! double angular sum therefore factors into an exact analytic `p` average
//! (zero unless the `p` frequency vanishes) times a single equispaced sum
//! over `s`; `eval_reference_3d` keeps the unfactored triple sum and the
//! unit tests pin the two paths against each other.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::index::MultiIndex;

/// Node counts for the deterministic grid, exact through `max_degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Largest combined monomial degree |alpha| + |beta| integrated exactly.
    pub max_degree: u32,
    /// Equispaced node count per periodic angle; must be >= 2*max_degree + 1.
    pub n_angular: usize,
    /// Gauss-Legendre node count in the bounded direction; must be >= max_degree + 2.
    pub n_radial: usize,
}

impl QuadratureSpec {
    /// Minimal node counts that integrate degree-`d` pairs exactly.
    pub fn for_degree(d: u32) -> Self {
        Self {
            max_degree: d,
            n_angular: 2 * d as usize + 1,
            n_radial: d as usize + 2,
        }
    }

    /// Same declared degree with all node counts scaled by `factor`.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            max_degree: self.max_degree,
            n_angular: self.n_angular * factor,
            n_radial: self.n_radial * factor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let min_ang = 2 * self.max_degree as usize + 1;
        let min_rad = self.max_degree as usize + 2;
        if self.n_angular < min_ang || self.n_radial < min_rad {
            return Err(CoreError::BasisMismatch(format!(
                "node counts ({}, {}) below the exactness minimum ({}, {}) for degree {}",
                self.n_angular, self.n_radial, min_ang, min_rad, self.max_degree
            )));
        }
        Ok(())
    }
}

/// Gauss-Legendre nodes and weights on [0, 1], ascending in the node.
pub(crate) fn gauss_legendre_01(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1);
    let mut rule = Vec::with_capacity(n);
    for k in 0..n {
        // Tricomi initial guess, then Newton on P_n over [-1, 1].
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            let step = p / d;
            x -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        rule.push(((1.0 - x) / 2.0, w / 2.0));
    }
    rule.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    rule
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * x * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Precomputed factored grid: per-node powers of `A` and `D` with weights.
pub(crate) struct Grid {
    #[cfg_attr(not(test), allow(dead_code))]
    spec: QuadratureSpec,
    /// weight per (s, t) node, summing to 1.
    weights: Vec<f64>,
    /// pow_a[node * stride + e] = A(node)^e for e <= max_degree.
    pow_a: Vec<Complex64>,
    pow_d: Vec<Complex64>,
    stride: usize,
}

impl Grid {
    pub(crate) fn build(spec: QuadratureSpec) -> Result<Self> {
        spec.validate()?;
        let stride = spec.max_degree as usize + 1;
        let gl = gauss_legendre_01(spec.n_radial);
        let n_ang = spec.n_angular;
        let n_nodes = n_ang * gl.len();
        let mut weights = Vec::with_capacity(n_nodes);
        let mut pow_a = Vec::with_capacity(n_nodes * stride);
        let mut pow_d = Vec::with_capacity(n_nodes * stride);
        for &(t, wt) in &gl {
            let root = (t * (1.0 - t)).sqrt();
            for b in 0..n_ang {
                let s = 2.0 * std::f64::consts::PI * b as f64 / n_ang as f64;
                let eis = Complex64::new(s.cos(), s.sin());
                let a = eis.conj() * t + eis * (1.0 - t);
                let d = Complex64::new(0.0, 2.0 * s.sin() * root);
                weights.push(wt / n_ang as f64);
                let mut ap = Complex64::new(1.0, 0.0);
                let mut dp = Complex64::new(1.0, 0.0);
                for _ in 0..stride {
                    pow_a.push(ap);
                    pow_d.push(dp);
                    ap *= a;
                    dp *= d;
                }
            }
        }
        Ok(Self {
            spec,
            weights,
            pow_a,
            pow_d,
            stride,
        })
    }

    /// True when the invariance weights of the pair differ, forcing a zero
    /// integral (the global phase and the `p` angle average to zero).
    pub(crate) fn selection_zero(alpha: &MultiIndex, beta: &MultiIndex) -> bool {
        alpha.weight() != beta.weight()
    }

    /// Quadrature value for a pair that passes the selection rule.
    ///
    /// The integrand reduces to `(-1)^{b3} A^{a1+b2} conj(A)^{a2+b1} D^{a3+b3}`
    /// on the `(s, t)` section; exponents stay within `max_degree`.
    pub(crate) fn eval(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Complex64 {
        debug_assert!(!Self::selection_zero(alpha, beta));
        let ea = (alpha.a1 + beta.a2) as usize;
        let eabar = (alpha.a2 + beta.a1) as usize;
        let ed = (alpha.a3 + beta.a3) as usize;
        debug_assert!(ea < self.stride && eabar < self.stride && ed < self.stride);
        let sign = if beta.a3 % 2 == 0 { 1.0 } else { -1.0 };
        let mut acc = Complex64::new(0.0, 0.0);
        for (node, &w) in self.weights.iter().enumerate() {
            let base = node * self.stride;
            let v = self.pow_a[base + ea] * self.pow_a[base + eabar].conj() * self.pow_d[base + ed];
            acc += v * w;
        }
        acc * sign
    }

    /// Unfactored triple sum over (psi, chi, theta); reference path for tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub(crate) fn eval_reference_3d(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Complex64 {
        if alpha.degree() != beta.degree() {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.spec.n_angular;
        let gl = gauss_legendre_01(self.spec.n_radial);
        let mut acc = Complex64::new(0.0, 0.0);
        for &(t, wt) in &gl {
            let root = (t * (1.0 - t)).sqrt();
            let mut acc_t = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let psi = 2.0 * std::f64::consts::PI * j as f64 / n as f64;
                for l in 0..n {
                    let chi = 2.0 * std::f64::consts::PI * l as f64 / n as f64;
                    let e2psi = Complex64::new((2.0 * psi).cos(), (2.0 * psi).sin());
                    let e2chi = Complex64::new((2.0 * chi).cos(), (2.0 * chi).sin());
                    let w11 = e2psi * t + e2chi * (1.0 - t);
                    let w22 = e2psi.conj() * t + e2chi.conj() * (1.0 - t);
                    let w12 = Complex64::new(0.0, 2.0 * (chi - psi).sin() * root);
                    let term = w11.powu(alpha.a1)
                        * w22.powu(alpha.a2)
                        * w12.powu(alpha.a3)
                        * (w11.powu(beta.a1) * w22.powu(beta.a2) * w12.powu(beta.a3)).conj();
                    acc_t += term;
                }
            }
            acc += acc_t * (wt / (n * n) as f64);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_monomials_exactly() {
        for n in [2usize, 5, 12] {
            let rule = gauss_legendre_01(n);
            let wsum: f64 = rule.iter().map(|&(_, w)| w).sum();
            assert!((wsum - 1.0).abs() < 1e-14);
            for k in 0..(2 * n - 1) {
                let quad: f64 = rule.iter().map(|&(x, w)| w * x.powi(k as i32)).sum();
                let exact = 1.0 / (k as f64 + 1.0);
                assert!(
                    (quad - exact).abs() < 1e-13,
                    "n={n} k={k} quad={quad} exact={exact}"
                );
            }
        }
    }

    #[test]
    fn gauss_legendre_five_point_nodes_match_reference() {
        // Classical 5-point nodes on [-1,1], mapped to [0,1].
        let rule = gauss_legendre_01(5);
        let reference = [-0.906179845938664, -0.538469310105683, 0.0];
        for (i, r) in reference.iter().enumerate() {
            assert!((rule[i].0 - (1.0 + r) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn factored_grid_matches_reference_triple_sum() {
        let grid = Grid::build(QuadratureSpec::for_degree(8)).unwrap();
        let pairs = [
            (MultiIndex::new(0, 0, 1), MultiIndex::new(0, 0, 1)),
            (MultiIndex::new(1, 0, 0), MultiIndex::new(1, 0, 0)),
            (MultiIndex::new(1, 1, 0), MultiIndex::new(0, 0, 2)),
            (MultiIndex::new(2, 0, 1), MultiIndex::new(2, 0, 1)),
            (MultiIndex::new(1, 0, 1), MultiIndex::new(1, 0, 1)),
            (MultiIndex::new(2, 1, 1), MultiIndex::new(1, 0, 3)),
            (MultiIndex::new(0, 0, 4), MultiIndex::new(2, 2, 0)),
            (MultiIndex::new(1, 2, 1), MultiIndex::new(2, 1, 1)),
        ];
        for (a, b) in pairs {
            let reference = grid.eval_reference_3d(&a, &b);
            let fast = if Grid::selection_zero(&a, &b) {
                Complex64::new(0.0, 0.0)
            } else {
                grid.eval(&a, &b)
            };
            assert!(
                (reference - fast).norm() < 1e-12,
                "pair {a} {b}: reference {reference} vs factored {fast}"
            );
        }
    }

    #[test]
    fn selection_violating_pairs_are_reference_zeros() {
        let grid = Grid::build(QuadratureSpec::for_degree(6)).unwrap();
        let pairs = [
            (MultiIndex::new(1, 0, 1), MultiIndex::new(0, 1, 1)),
            (MultiIndex::new(0, 0, 1), MultiIndex::new(0, 0, 0)),
            (MultiIndex::new(2, 0, 0), MultiIndex::new(0, 2, 0)),
        ];
        for (a, b) in pairs {
            assert!(Grid::selection_zero(&a, &b));
            assert!(grid.eval_reference_3d(&a, &b).norm() < 1e-12);
        }
    }
}
