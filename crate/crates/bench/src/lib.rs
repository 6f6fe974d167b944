//! Criterion benchmarks for the step kernels; see `benches/`.
