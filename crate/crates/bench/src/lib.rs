//! Criterion benchmarks of the interpolation operators and norms; see `benches/operators.rs`.
