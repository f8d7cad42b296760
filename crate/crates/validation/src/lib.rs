//! Acceptance suite for `adapt-core`, kept in its own package so that it runs
//! after every unit and integration target. The criteria live in
//! `tests/acceptance.rs`.
