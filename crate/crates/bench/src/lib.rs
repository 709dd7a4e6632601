//! Criterion benchmarks for the homogenization toolkit; see `benches/`.
