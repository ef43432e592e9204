//! Criterion benchmarks for `kerr-core`; see `benches/`.
