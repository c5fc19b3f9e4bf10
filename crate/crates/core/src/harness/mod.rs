//! Seeded acceptance suites, their reports, and the JSON inputs shared with the CLI.

mod io;
mod suites;

use std::fmt;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use io::{FunctionJson, ValueJson};
pub use suites::{
    suite_classification, suite_equivariance, suite_positivity, suite_valuation_axioms, positivity_verdict, positivity_verdicts, PositivityVerdict,
    POSITIVITY_FRAMES, POSITIVITY_MATRICES, POSITIVITY_PANEL, POSITIVITY_TUPLES,
};

/// Seed used when neither the caller nor `MAVALTK_SEED` provides one.
pub const DEFAULT_SEED: u64 = 20_240_601;

/// `MAVALTK_SEED` if set and parseable, else [`DEFAULT_SEED`].
pub fn default_seed() -> u64 {
    std::env::var("MAVALTK_SEED").ok().and_then(|s| s.trim().parse().ok()).unwrap_or(DEFAULT_SEED)
}

/// SplitMix64 finalizer; decorrelates `(seed, stream)` pairs.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent generator for case `stream` of a run seeded with `seed`.
pub fn case_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, stream))
}

/// One checked statement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub description: String,
    pub expected: String,
    pub actual: String,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of a suite run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub cases: Vec<CaseResult>,
    /// Free-form diagnostics such as observed convergence orders.
    pub notes: Vec<String>,
    pub runtime_ms: f64,
}

impl SuiteReport {
    pub fn new(suite: &str, seed: u64, config: serde_json::Value) -> Self {
        SuiteReport { suite: suite.into(), seed, config, cases: Vec::new(), notes: Vec::new(), runtime_ms: 0.0 }
    }

    pub fn passed(&self) -> bool {
        self.cases.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseResult> {
        self.cases.iter().filter(|c| !c.pass)
    }

    pub fn push(&mut self, description: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>, tolerance: f64, pass: bool) {
        self.cases.push(CaseResult {
            description: description.into(),
            expected: expected.into(),
            actual: actual.into(),
            tolerance,
            pass,
        });
    }

    /// `|actual - expected| <= tol * max(1, |expected|)`.
    pub fn check_close(&mut self, description: impl Into<String>, expected: f64, actual: f64, tol: f64) {
        let pass = (actual - expected).abs() <= tol * expected.abs().max(1.0);
        self.push(description, format!("{expected:.12e}"), format!("{actual:.12e}"), tol, pass);
    }

    /// `value <= tol`, for error magnitudes.
    pub fn check_small(&mut self, description: impl Into<String>, value: f64, tol: f64) {
        self.push(description, format!("<= {tol:e}"), format!("{value:.3e}"), tol, value <= tol);
    }

    pub fn check_eq<T: PartialEq + fmt::Debug>(&mut self, description: impl Into<String>, expected: T, actual: T) {
        let pass = expected == actual;
        self.push(description, format!("{expected:?}"), format!("{actual:?}"), 0.0, pass);
    }

    /// Record an error as a failed case instead of aborting the suite.
    pub fn record_error(&mut self, description: impl Into<String>, err: &crate::Error) {
        self.push(description, "no error", format!("error: {err}"), 0.0, false);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub(crate) fn finish(mut self, start: Instant) -> Self {
        self.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let failed = self.failures().count();
        writeln!(
            f,
            "suite {} (seed {}): {} cases, {} failed, {:.0} ms",
            self.suite,
            self.seed,
            self.cases.len(),
            failed,
            self.runtime_ms
        )?;
        for c in self.failures() {
            writeln!(f, "  FAIL {}: expected {}, got {} (tol {:e})", c.description, c.expected, c.actual, c.tolerance)?;
        }
        for n in &self.notes {
            writeln!(f, "  note: {n}")?;
        }
        Ok(())
    }
}

/// Least-squares slope of `log err` against `log h`.
pub fn convergence_order(steps: &[f64], errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> =
        steps.iter().zip(errors).filter(|(_, e)| **e > 0.0).map(|(h, e)| (h.ln(), e.ln())).collect();
    let m = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    num / den
}
