//! Holds the acceptance harness in `tests/acceptance.rs`. It lives in its
//! own package so `cargo test --workspace` runs it after the library suites.
