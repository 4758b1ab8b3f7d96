//! Criterion benchmarks for the episode engine, convex conjugates and
//! bound constants live under `benches/`.
