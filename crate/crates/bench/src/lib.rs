//! Criterion benchmarks for `fblab-core`; see `benches/`.
