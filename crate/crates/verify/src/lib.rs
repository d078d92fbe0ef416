//! Acceptance suite for `rsls`; see `tests/acceptance.rs`.
