//! Acceptance checks for `oam-memory`, run with `cargo test -p oam-memory-validation`.
//!
//! The checks live in `tests/acceptance.rs`; each prints one `PASS` or `FAIL`
//! line with the measured value, and the target exits non-zero if any fails.
