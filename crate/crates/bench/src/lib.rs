//! Criterion benchmarks for the perturbode workspace live under `benches/`.
