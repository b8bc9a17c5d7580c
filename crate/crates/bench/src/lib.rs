//! Criterion benchmarks for the detectors live in `benches/`.
