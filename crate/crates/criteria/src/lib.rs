//! Holds only the `acceptance` test target, which checks every acceptance
//! criterion of cliffbench and prints one PASS/FAIL line per criterion.
//!
//! It is a separate package so that `cargo test --workspace` runs it after
//! the test suites of `cliffbench` and `cliffbench-core`.
