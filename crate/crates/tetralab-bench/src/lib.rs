//! Shared fixtures for the criterion benchmarks.

use tetralab_core::{build_ladder_basis, GradedBasis, MeasureContext};

pub fn bench_context(max_degree: u32) -> MeasureContext {
    MeasureContext::with_max_degree(max_degree).expect("benchmark context")
}

pub fn bench_basis(n: u32, ctx: &MeasureContext) -> GradedBasis {
    build_ladder_basis(n, ctx).expect("benchmark basis")
}
