//! Benchmark-only crate; see `benches/assembly_solve.rs`.
