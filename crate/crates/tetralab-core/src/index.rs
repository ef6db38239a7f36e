use serde::{Deserialize, Serialize};
use std::fmt;

/// Exponent triple for a monomial z1^a1 z2^a2 z3^a3.
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
pub struct MultiIndex {
    pub a1: u32,
    pub a2: u32,
    pub a3: u32,
}

impl MultiIndex {
    pub const fn new(a1: u32, a2: u32, a3: u32) -> Self {
        Self { a1, a2, a3 }
    }

    pub const fn degree(&self) -> u32 {
        self.a1 + self.a2 + self.a3
    }

    /// Invariance weight (2*a1 + a3, 2*a2 + a3) of the monomial under the
    /// diagonal torus action W -> diag(u,v) W diag(u,v).
    pub const fn weight(&self) -> (u32, u32) {
        (2 * self.a1 + self.a3, 2 * self.a2 + self.a3)
    }

    /// Exchanges the roles of z1 and z2.
    pub const fn swap12(&self) -> Self {
        Self {
            a1: self.a2,
            a2: self.a1,
            a3: self.a3,
        }
    }

    pub const fn add(&self, other: &Self) -> Self {
        Self {
            a1: self.a1 + other.a1,
            a2: self.a2 + other.a2,
            a3: self.a3 + other.a3,
        }
    }

    fn as_tuple(&self) -> (u32, u32, u32) {
        (self.a1, self.a2, self.a3)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.a1, self.a2, self.a3)
    }
}

/// Canonical cache key for the moment of the pair (alpha, beta).
///
/// The integral is unchanged by swapping z1 and z2 in both indices and turns
/// into its conjugate when alpha and beta are exchanged. Of the four
/// equivalent keys we store the lexicographically smallest, remembering
/// whether the stored value must be conjugated to recover the requested one.
pub(crate) fn canonical_key(
    alpha: MultiIndex,
    beta: MultiIndex,
) -> ((MultiIndex, MultiIndex), bool) {
    let variants = [
        ((alpha, beta), false),
        ((beta, alpha), true),
        ((alpha.swap12(), beta.swap12()), false),
        ((beta.swap12(), alpha.swap12()), true),
    ];
    *variants
        .iter()
        .min_by_key(|((a, b), _)| (a.as_tuple(), b.as_tuple()))
        .unwrap()
}
