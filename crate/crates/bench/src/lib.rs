//! Criterion benchmarks for the navigation pipeline live in `benches/`.
