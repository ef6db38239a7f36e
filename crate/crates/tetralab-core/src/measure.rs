//! The Shilov boundary of the type-II Cartan domain and its invariant
//! probability measure.
//!
//! The boundary consists of the symmetric 2x2 unitaries. The invariant
//! measure is realized two ways that cross-check each other: Monte-Carlo
//! sampling of `W = U U^T` for Haar-distributed `U` (linear automorphisms
//! act as `W -> V W V^T`, and the pushforward is invariant under them), and
//! the deterministic angular-radial grid. The pushforward measure on the
//! Shilov boundary of the tetrablock weights the proper map by the squared
//! Jacobian modulus and a normalization constant `C` chosen so the constant
//! function has unit norm.

use dashmap::DashMap;
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{CoreError, Result};
use crate::index::{canonical_key, MultiIndex};
use crate::poly::{pullback_weighted, HoloPolynomial};
use crate::quad::{Grid, QuadratureSpec};
use crate::report::fmt_sig17;

/// A point of the Shilov boundary: entries of a symmetric unitary W, with
/// coordinates z1 = w11, z2 = w22, z3 = w12.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPointR {
    pub w11: Complex64,
    pub w22: Complex64,
    pub w12: Complex64,
}

impl BoundaryPointR {
    pub fn to_point(&self) -> [Complex64; 3] {
        [self.w11, self.w22, self.w12]
    }

    /// Max-norm of W*W - I.
    pub fn unitarity_defect(&self) -> f64 {
        let w = [[self.w11, self.w12], [self.w12, self.w22]];
        let mut defect: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut e = Complex64::new(0.0, 0.0);
                for row in &w {
                    e += row[i].conj() * row[j];
                }
                if i == j {
                    e -= 1.0;
                }
                defect = defect.max(e.norm());
            }
        }
        defect
    }

    pub fn det(&self) -> Complex64 {
        self.w11 * self.w22 - self.w12 * self.w12
    }

    pub fn is_valid(&self, tol: f64) -> bool {
        self.unitarity_defect() <= tol && (self.det().norm() - 1.0).abs() <= tol
    }

    /// z^alpha * conj(z)^beta at this point.
    pub fn eval_pair(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Complex64 {
        let z = self.to_point();
        let hol = z[0].powu(alpha.a1) * z[1].powu(alpha.a2) * z[2].powu(alpha.a3);
        let anti = z[0].powu(beta.a1) * z[1].powu(beta.a2) * z[2].powu(beta.a3);
        hol * anti.conj()
    }
}

/// Haar-distributed 2x2 unitary: orthonormalize a complex Gaussian matrix,
/// keeping the triangular factor's diagonal positive real.
pub fn haar_unitary_sample<R: Rng + ?Sized>(rng: &mut R) -> [[Complex64; 2]; 2] {
    loop {
        let mut g = [[Complex64::new(0.0, 0.0); 2]; 2];
        for row in &mut g {
            for entry in row.iter_mut() {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                *entry = Complex64::new(re, im);
            }
        }
        let v1 = [g[0][0], g[1][0]];
        let n1 = (v1[0].norm_sqr() + v1[1].norm_sqr()).sqrt();
        if n1 < 1e-12 {
            continue;
        }
        let q1 = [v1[0] / n1, v1[1] / n1];
        let v2 = [g[0][1], g[1][1]];
        let h = q1[0].conj() * v2[0] + q1[1].conj() * v2[1];
        let w = [v2[0] - h * q1[0], v2[1] - h * q1[1]];
        let n2 = (w[0].norm_sqr() + w[1].norm_sqr()).sqrt();
        if n2 < 1e-12 {
            continue;
        }
        let q2 = [w[0] / n2, w[1] / n2];
        return [[q1[0], q2[0]], [q1[1], q2[1]]];
    }
}

fn boundary_point_from_unitary(u: &[[Complex64; 2]; 2]) -> BoundaryPointR {
    // W = U U^T
    BoundaryPointR {
        w11: u[0][0] * u[0][0] + u[0][1] * u[0][1],
        w22: u[1][0] * u[1][0] + u[1][1] * u[1][1],
        w12: u[0][0] * u[1][0] + u[0][1] * u[1][1],
    }
}

/// Deterministic sample of boundary points distributed by the invariant
/// measure.
pub fn sample_boundary_r(count: usize, seed: u64) -> Vec<BoundaryPointR> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| boundary_point_from_unitary(&haar_unitary_sample(&mut rng)))
        .collect()
}

/// The proper map (z1, z2, z3) -> (z1, z2, z1 z2 - z3^2).
pub fn map_phi(z: &[Complex64; 3]) -> [Complex64; 3] {
    [z[0], z[1], z[0] * z[1] - z[2] * z[2]]
}

/// Jacobian determinant of the proper map; the Jacobian matrix is
/// lower-triangular with diagonal (1, 1, -2 z3).
pub fn jacobian_phi(z: &[Complex64; 3]) -> Complex64 {
    -2.0 * z[2]
}

/// The involution (z1, z2, z3) -> (z1, z2, -z3).
pub fn involution_sigma(z: &[Complex64; 3]) -> [Complex64; 3] {
    [z[0], z[1], -z[2]]
}

/// Membership test for the Shilov boundary of the tetrablock:
/// z1 = conj(z2) z3, |z3| = 1, |z2| <= 1, each up to `tol`.
pub fn shilov_e_membership(z: &[Complex64; 3], tol: f64) -> bool {
    (z[0] - z[1].conj() * z[2]).norm() <= tol
        && (z[2].norm() - 1.0).abs() <= tol
        && z[1].norm() <= 1.0 + tol
}

/// Mean with per-component standard errors of a Monte-Carlo estimate.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub mean: Complex64,
    pub se_re: f64,
    pub se_im: f64,
    pub count: u64,
}

impl McEstimate {
    /// Componentwise |value - mean| <= n_se * se + floor.
    pub fn agrees_with(&self, value: Complex64, n_se: f64, floor: f64) -> bool {
        (value.re - self.mean.re).abs() <= n_se * self.se_re + floor
            && (value.im - self.mean.im).abs() <= n_se * self.se_im + floor
    }
}

const MC_CHUNK: u64 = 1 << 14;

/// Chunked, thread-count-independent Monte-Carlo mean of `f` over boundary
/// samples. Chunk `i` draws from stream `i` of the seeded generator and the
/// reduction runs in chunk order, so the result is bit-reproducible.
pub fn mc_estimate<F>(samples: u64, seed: u64, f: F) -> McEstimate
where
    F: Fn(&BoundaryPointR) -> Complex64 + Sync,
{
    let estimates = mc_estimate_batch(samples, seed, 1, |p, out| out[0] = f(p));
    estimates.into_iter().next().unwrap()
}

/// Batched variant: `fill(point, out)` writes `width` values per sample and
/// all of them share the sample stream.
pub fn mc_estimate_batch<F>(samples: u64, seed: u64, width: usize, fill: F) -> Vec<McEstimate>
where
    F: Fn(&BoundaryPointR, &mut [Complex64]) + Sync,
{
    assert!(samples > 0 && width > 0);
    let n_chunks = samples.div_ceil(MC_CHUNK);
    #[derive(Clone)]
    struct Acc {
        sum: Vec<Complex64>,
        sq_re: Vec<f64>,
        sq_im: Vec<f64>,
    }
    let chunk_accs: Vec<Acc> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk + 1);
            let lo = chunk * MC_CHUNK;
            let hi = (lo + MC_CHUNK).min(samples);
            let mut acc = Acc {
                sum: vec![Complex64::new(0.0, 0.0); width],
                sq_re: vec![0.0; width],
                sq_im: vec![0.0; width],
            };
            let mut row = vec![Complex64::new(0.0, 0.0); width];
            for _ in lo..hi {
                let p = boundary_point_from_unitary(&haar_unitary_sample(&mut rng));
                fill(&p, &mut row);
                for (k, v) in row.iter().enumerate() {
                    acc.sum[k] += v;
                    acc.sq_re[k] += v.re * v.re;
                    acc.sq_im[k] += v.im * v.im;
                }
            }
            acc
        })
        .collect();

    let mut sum = vec![Complex64::new(0.0, 0.0); width];
    let mut sq_re = vec![0.0; width];
    let mut sq_im = vec![0.0; width];
    for acc in &chunk_accs {
        for k in 0..width {
            sum[k] += acc.sum[k];
            sq_re[k] += acc.sq_re[k];
            sq_im[k] += acc.sq_im[k];
        }
    }
    let n = samples as f64;
    (0..width)
        .map(|k| {
            let mean = sum[k] / n;
            let var_re = (sq_re[k] / n - mean.re * mean.re).max(0.0);
            let var_im = (sq_im[k] / n - mean.im * mean.im).max(0.0);
            McEstimate {
                mean,
                se_re: (var_re / n).sqrt(),
                se_im: (var_im / n).sqrt(),
                count: samples,
            }
        })
        .collect()
}

/// Monte-Carlo estimate of a boundary moment.
pub fn mc_boundary_moment(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    samples: u64,
    seed: u64,
) -> McEstimate {
    mc_estimate(samples, seed, |p| p.eval_pair(alpha, beta))
}

/// Monte-Carlo estimates for many moments over one shared sample stream.
pub fn mc_boundary_moments_batch(
    pairs: &[(MultiIndex, MultiIndex)],
    samples: u64,
    seed: u64,
) -> Vec<McEstimate> {
    let mut emax = [0u32; 3];
    for (a, b) in pairs {
        emax[0] = emax[0].max(a.a1).max(b.a1);
        emax[1] = emax[1].max(a.a2).max(b.a2);
        emax[2] = emax[2].max(a.a3).max(b.a3);
    }
    let strides = [
        emax[0] as usize + 1,
        emax[1] as usize + 1,
        emax[2] as usize + 1,
    ];
    mc_estimate_batch(samples, seed, pairs.len(), |p, out| {
        let z = p.to_point();
        let mut pows: [Vec<Complex64>; 3] = [
            Vec::with_capacity(strides[0]),
            Vec::with_capacity(strides[1]),
            Vec::with_capacity(strides[2]),
        ];
        for ((c, pow), len) in z.iter().zip(pows.iter_mut()).zip(strides) {
            let mut v = Complex64::new(1.0, 0.0);
            for _ in 0..len {
                pow.push(v);
                v *= c;
            }
        }
        for (k, (a, b)) in pairs.iter().enumerate() {
            let hol = pows[0][a.a1 as usize] * pows[1][a.a2 as usize] * pows[2][a.a3 as usize];
            let anti = pows[0][b.a1 as usize] * pows[1][b.a2 as usize] * pows[2][b.a3 as usize];
            out[k] = hol * anti.conj();
        }
    })
}

/// Monte-Carlo estimate of a pushforward moment on the tetrablock boundary:
/// the sample mean of `phi^alpha conj(phi)^beta |J_phi|^2 / C`.
pub fn mc_pushforward_moment_e(
    alpha: &MultiIndex,
    beta: &MultiIndex,
    samples: u64,
    seed: u64,
    c: f64,
) -> McEstimate {
    mc_estimate(samples, seed, |p| {
        let z = p.to_point();
        let fz = map_phi(&z);
        let jac = jacobian_phi(&z);
        let hol = fz[0].powu(alpha.a1) * fz[1].powu(alpha.a2) * fz[2].powu(alpha.a3);
        let anti = fz[0].powu(beta.a1) * fz[1].powu(beta.a2) * fz[2].powu(beta.a3);
        hol * anti.conj() * jac.norm_sqr() / c
    })
}

/// Quadrature spec, normalization constant and the shared moment cache.
pub struct MeasureContext {
    spec: QuadratureSpec,
    grid: Grid,
    c: f64,
    cache: DashMap<(MultiIndex, MultiIndex), Complex64>,
    evals: AtomicU64,
}

impl std::fmt::Debug for MeasureContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MeasureContext")
            .field("spec", &self.spec)
            .field("c", &self.c)
            .field("cached", &self.cache.len())
            .finish()
    }
}

impl MeasureContext {
    pub fn new(spec: QuadratureSpec) -> Result<Self> {
        if spec.max_degree < 2 {
            return Err(CoreError::DegreeExceedsSpec {
                required: 2,
                max_degree: spec.max_degree,
            });
        }
        let grid = Grid::build(spec)?;
        let mut ctx = Self {
            spec,
            grid,
            c: 0.0,
            cache: DashMap::new(),
            evals: AtomicU64::new(0),
        };
        // C = integral of |J_phi|^2 = 4 * moment((0,0,1),(0,0,1)).
        let z3 = MultiIndex::new(0, 0, 1);
        ctx.c = 4.0 * ctx.moment(&z3, &z3)?.re;
        Ok(ctx)
    }

    pub fn with_max_degree(d: u32) -> Result<Self> {
        Self::new(QuadratureSpec::for_degree(d))
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn max_degree(&self) -> u32 {
        self.spec.max_degree
    }

    /// The pushforward normalization constant.
    pub fn normalization_c(&self) -> f64 {
        self.c
    }

    /// Number of grid evaluations so far; cache hits do not count.
    pub fn quadrature_evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Moment of the monomial pair against the invariant measure.
    pub fn moment(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Result<Complex64> {
        let required = alpha.degree() + beta.degree();
        if required > self.spec.max_degree {
            return Err(CoreError::DegreeExceedsSpec {
                required,
                max_degree: self.spec.max_degree,
            });
        }
        if required == 0 {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if Grid::selection_zero(alpha, beta) {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let (key, conjugate) = canonical_key(*alpha, *beta);
        let value = if let Some(v) = self.cache.get(&key) {
            *v
        } else {
            let v = self.grid.eval(&key.0, &key.1);
            self.evals.fetch_add(1, Ordering::Relaxed);
            // Racing writers computed the identical value.
            *self.cache.entry(key).or_insert(v)
        };
        Ok(if conjugate { value.conj() } else { value })
    }

    /// Moment of an E-monomial pair against the pushforward measure.
    pub fn moment_e(&self, alpha: &MultiIndex, beta: &MultiIndex) -> Result<Complex64> {
        let pull_deg = |m: &MultiIndex| m.a1 + m.a2 + 2 * m.a3 + 1;
        let required = pull_deg(alpha) + pull_deg(beta);
        if required > self.spec.max_degree {
            return Err(CoreError::DegreeExceedsSpec {
                required,
                max_degree: self.spec.max_degree,
            });
        }
        let lift = |m: &MultiIndex| -> Result<HoloPolynomial> {
            pullback_weighted(&HoloPolynomial::monomial(
                *m,
                Complex64::new(1.0, 0.0),
                crate::poly::Ambient::Tetrablock,
            ))
        };
        let pf = lift(alpha)?;
        let pg = lift(beta)?;
        Ok(crate::poly::inner_product(self, &pf, &pg)? / self.c)
    }

    /// All canonical monomial pairs within `max_combined` that pass the
    /// selection rule, in sorted order.
    pub fn selection_pairs(max_combined: u32) -> Vec<(MultiIndex, MultiIndex)> {
        let monomials = monomials_up_to(max_combined);
        let mut pairs = Vec::new();
        for a in &monomials {
            for b in &monomials {
                if a.degree() + b.degree() > max_combined {
                    continue;
                }
                if Grid::selection_zero(a, b) {
                    continue;
                }
                if a.degree() == 0 && b.degree() == 0 {
                    continue;
                }
                let (key, _) = canonical_key(*a, *b);
                if key == (*a, *b) {
                    pairs.push((*a, *b));
                }
            }
        }
        pairs.sort();
        pairs.dedup();
        pairs
    }

    /// Evaluates every canonical selection-passing pair within the spec's
    /// degree, returning how many entries the cache now holds.
    pub fn prefill(&self) -> Result<usize> {
        let pairs = Self::selection_pairs(self.spec.max_degree);
        let results: Vec<Result<Complex64>> =
            pairs.par_iter().map(|(a, b)| self.moment(a, b)).collect();
        for r in results {
            r?;
        }
        Ok(self.cache.len())
    }

    /// Writes the cache as CSV: a comment line with the grid parameters, a
    /// header, then canonical rows sorted by key, floats with 17 significant
    /// digits.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let mut rows: Vec<((MultiIndex, MultiIndex), Complex64)> =
            self.cache.iter().map(|e| (*e.key(), *e.value())).collect();
        rows.sort_by_key(|((a, b), _)| (a.a1, a.a2, a.a3, b.a1, b.a2, b.a3));
        let mut out = String::new();
        out.push_str(&format!(
            "# tetralab moment cache max_degree={} n_angular={} n_radial={}\n",
            self.spec.max_degree, self.spec.n_angular, self.spec.n_radial
        ));
        out.push_str("a1,a2,a3,b1,b2,b3,re,im\n");
        for ((a, b), v) in rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                a.a1,
                a.a2,
                a.a3,
                b.a1,
                b.a2,
                b.a3,
                fmt_sig17(v.re),
                fmt_sig17(v.im)
            ));
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    /// Rebuilds a context from a cache file; the grid parameters come from
    /// the header and every row is validated.
    pub fn load_cache(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or(CoreError::CacheFormat {
            line: 1,
            msg: "empty file".into(),
        })?;
        let spec = parse_cache_header(header).ok_or(CoreError::CacheFormat {
            line: 1,
            msg: format!("malformed header comment: {header:?}"),
        })?;
        let (_, columns) = lines.next().ok_or(CoreError::CacheFormat {
            line: 2,
            msg: "missing column header".into(),
        })?;
        if columns != "a1,a2,a3,b1,b2,b3,re,im" {
            return Err(CoreError::CacheFormat {
                line: 2,
                msg: format!("unexpected column header: {columns:?}"),
            });
        }
        let ctx = Self::new(spec)?;
        for (idx, line) in lines {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 8 {
                return Err(CoreError::CacheFormat {
                    line: lineno,
                    msg: format!("expected 8 fields, got {}", fields.len()),
                });
            }
            let mut ints = [0u32; 6];
            for (k, v) in ints.iter_mut().enumerate() {
                *v = fields[k].parse().map_err(|e| CoreError::CacheFormat {
                    line: lineno,
                    msg: format!("bad exponent {:?}: {e}", fields[k]),
                })?;
            }
            let parse_float = |s: &str| -> std::result::Result<f64, CoreError> {
                s.parse().map_err(|e| CoreError::CacheFormat {
                    line: lineno,
                    msg: format!("bad float {s:?}: {e}"),
                })
            };
            let re = parse_float(fields[6])?;
            let im = parse_float(fields[7])?;
            let a = MultiIndex::new(ints[0], ints[1], ints[2]);
            let b = MultiIndex::new(ints[3], ints[4], ints[5]);
            if a.degree() + b.degree() > spec.max_degree {
                return Err(CoreError::CacheFormat {
                    line: lineno,
                    msg: format!("pair {a} {b} exceeds max_degree {}", spec.max_degree),
                });
            }
            let (key, conj) = canonical_key(a, b);
            if key != (a, b) || conj {
                return Err(CoreError::CacheFormat {
                    line: lineno,
                    msg: format!("row {a} {b} is not in canonical key form"),
                });
            }
            ctx.cache.insert(key, Complex64::new(re, im));
        }
        Ok(ctx)
    }

    /// Loads a cache file into this context; the header must match the spec.
    pub fn absorb_cache(&self, path: &Path) -> Result<()> {
        let other = Self::load_cache(path)?;
        if other.spec.max_degree != self.spec.max_degree {
            return Err(CoreError::MaxDegreeMismatch {
                expected: self.spec.max_degree,
                found: other.spec.max_degree,
            });
        }
        for e in other.cache.iter() {
            self.cache.insert(*e.key(), *e.value());
        }
        Ok(())
    }

    pub fn cache_len(&self) -> usize {
        self.cache.len()
    }
}

fn parse_cache_header(line: &str) -> Option<QuadratureSpec> {
    let rest = line.strip_prefix("# tetralab moment cache ")?;
    let mut max_degree = None;
    let mut n_angular = None;
    let mut n_radial = None;
    for part in rest.split_whitespace() {
        let (k, v) = part.split_once('=')?;
        match k {
            "max_degree" => max_degree = v.parse().ok(),
            "n_angular" => n_angular = v.parse().ok(),
            "n_radial" => n_radial = v.parse().ok(),
            _ => return None,
        }
    }
    Some(QuadratureSpec {
        max_degree: max_degree?,
        n_angular: n_angular?,
        n_radial: n_radial?,
    })
}

/// All multi-indices of total degree at most `d`, sorted.
pub fn monomials_up_to(d: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    for a1 in 0..=d {
        for a2 in 0..=(d - a1) {
            for a3 in 0..=(d - a1 - a2) {
                out.push(MultiIndex::new(a1, a2, a3));
            }
        }
    }
    out.sort();
    out
}
