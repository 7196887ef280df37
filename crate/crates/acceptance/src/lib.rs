//! Acceptance checks for the workspace. Run them with
//! `cargo test -p pragsynth-acceptance --test acceptance`; each criterion
//! prints a single PASS or FAIL line.
