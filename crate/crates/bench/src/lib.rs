//! Benchmark harness crate; the benchmarks live in `benches/`.
