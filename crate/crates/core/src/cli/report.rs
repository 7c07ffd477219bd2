//! Versioned JSON reports.

use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::check::{Check, Status};

pub const SCHEMA: u32 = 1;

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const INPUT_ERROR: i32 = 2;
    pub const NUMERICAL_FAILURE: i32 = 3;
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Seconds since the Unix epoch; the only field that varies between runs.
    pub timestamp: u64,
    /// SHA-256 of the input file, or of the canonical parameters.
    pub input_digest: String,
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
    pub verdict: Option<String>,
    pub artifacts: Vec<String>,
    pub details: Value,
}

impl Report {
    pub fn new(command: &str, input: &[u8], seed: Option<u64>) -> Self {
        Report {
            schema: SCHEMA,
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            timestamp: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            input_digest: digest(input),
            seed,
            checks: Vec::new(),
            verdict: None,
            artifacts: Vec::new(),
            details: Value::Null,
        }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn extend(&mut self, checks: impl IntoIterator<Item = Check>) {
        self.checks.extend(checks);
    }

    pub fn failed(&self) -> usize {
        self.checks.iter().filter(|c| c.status == Status::Fail).count()
    }

    pub fn exit_code(&self) -> i32 {
        exit_code(&self.checks)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    pub fn write(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{}", self.to_json())
    }
}

/// 0 when no check failed, 1 otherwise. Skipped checks do not fail a run.
pub fn exit_code(checks: &[Check]) -> i32 {
    if checks.iter().any(|c| c.status == Status::Fail) {
        exit::CHECK_FAILED
    } else {
        exit::PASS
    }
}

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_is_sha256() {
        assert_eq!(
            digest(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn skips_do_not_fail() {
        let mut r = Report::new("x", b"", None);
        r.push(Check::skip("a", "nothing to do"));
        assert_eq!(r.exit_code(), 0);
        r.push(Check::threshold("b", 1.0, 1, 0.5));
        assert_eq!(r.exit_code(), 1);
        assert_eq!(r.failed(), 1);
    }
}
