//! Benchmark fixtures shared by the criterion benches.

use gwflow_core::lattice::{linear_field, HeightField};

/// A slope `(0.25, -0.5)` field on the torus `(m, m)`; `m` must be even.
pub fn tilted_torus(m: i64) -> HeightField {
    linear_field([0.25, -0.5], 1, (m, m))
        .expect("m must be even")
        .field
}
