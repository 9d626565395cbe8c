//! Benchmarks only; see `benches/pipeline.rs` (`cargo bench -p ggr-bench`).
