//! Numerical laboratory for the Hardy space of the tetrablock, realized on
//! the Shilov boundary of the 3-dimensional type-II Cartan domain.
//!
//! The crate provides four layers:
//!
//! * [`measure`] — the invariant boundary measure, by circular-orthogonal
//!   ensemble sampling and by an exact deterministic quadrature, plus the
//!   pushforward measure on the tetrablock boundary;
//! * [`hardy`] — graded odd subspaces, their Gram matrices, the ladder
//!   orthonormal basis, and the unitary transfer between the two Hardy
//!   spaces at the polynomial level;
//! * [`toeplitz`] — finite windows of Toeplitz and coordinate multiplication
//!   operators, the tuple/Brown-Halmos relation checks, ladder-shift and
//!   decay probes, and least-squares symbol recovery;
//! * [`report`] — deterministic JSON/CSV artifact emission.
//!
//! ```
//! use tetralab_core::{build_ladder_basis, check_tuple_relations, MeasureContext};
//!
//! let ctx = MeasureContext::with_max_degree(14)?;
//! let basis = build_ladder_basis(5, &ctx)?;
//! let residuals = check_tuple_relations(&basis, &ctx, 5, 1e-9)?;
//! assert!(residuals.pass(1e-9));
//! # Ok::<(), tetralab_core::CoreError>(())
//! ```

pub mod error;
pub mod hardy;
pub mod index;
pub mod measure;
pub mod poly;
mod quad;
pub mod report;
pub mod toeplitz;

pub use error::{CoreError, Result};
pub use hardy::{
    build_ladder_basis, dim_hom_minus, enumerate_hom_minus, gram_matrix, parity_check, psi_forward,
    psi_inverse, GradedBasis,
};
pub use index::MultiIndex;
pub use measure::{
    haar_unitary_sample, involution_sigma, jacobian_phi, map_phi, mc_boundary_moment,
    mc_boundary_moments_batch, mc_estimate, mc_pushforward_moment_e, monomials_up_to,
    sample_boundary_r, shilov_e_membership, BoundaryPointR, McEstimate, MeasureContext,
};
pub use poly::{Ambient, BoundaryFn, HoloPolynomial};
pub use quad::QuadratureSpec;
pub use report::{MeasureInfo, ProfilePoint, RecoveredTerm, Report};
pub use toeplitz::{
    brown_halmos_residual, canonical_dictionary, check_tuple_relations, compactness_probe,
    coordinate_windows, ladder_shift_check, multiplication_window, symbol_pullback,
    symbol_recovery, toeplitz_window, OperatorWindow, RelationResiduals, SymbolExpr,
};
