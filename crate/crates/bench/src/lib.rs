//! Benchmarks for the tangent-eq solvers live in `benches/`.
