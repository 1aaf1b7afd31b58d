//! Acceptance criteria 1–10. Each test prints one PASS/FAIL line; run with
//! `cargo test -p hbkmr --test acceptance -- --nocapture` to see them.

mod common;

mod c01_equivalence;
mod c02_marginalization;
mod c03_conditioning;
mod c04_recovery;
mod c05_waic;
mod c06_ci_width;
mod c07_diagnostics;
mod c08_predictive;
mod c09_sampler;
mod c10_prior_sensitivity;
