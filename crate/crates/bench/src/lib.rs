//! Criterion benchmarks for `mimo-clt`; see `benches/`.
