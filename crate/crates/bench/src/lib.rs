//! Criterion benchmarks for the `wrapgp` sampler. Run with `cargo bench -p wrapgp-bench`.
