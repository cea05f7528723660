//! Criterion benchmarks for `sdde-core`; see `benches/core.rs`.
