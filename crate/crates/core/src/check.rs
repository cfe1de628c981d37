//! Identity-check verdicts shared by the library and the runner.

use serde::{Deserialize, Serialize};

use crate::error::Node;
use crate::kernel::Process;
use crate::scalar::Scalar;

/// Result of comparing two sides of an identity node by node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub worst: Option<Node>,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, max_error: f64, tolerance: f64, worst: Option<Node>) -> Self {
        let pass = max_error <= tolerance;
        Check {
            name: name.into(),
            max_error,
            tolerance,
            worst,
            pass,
        }
    }

    pub fn flag(name: impl Into<String>, pass: bool) -> Self {
        Check {
            name: name.into(),
            max_error: if pass { 0.0 } else { 1.0 },
            tolerance: 0.0,
            worst: None,
            pass,
        }
    }

    /// Compares two processes. Exact backends pass only on equality.
    pub fn processes<S: Scalar>(name: impl Into<String>, lhs: &Process<S>, rhs: &Process<S>, tol: f64) -> Self {
        let mut worst = None;
        let mut gap = 0.0f64;
        let mut exact_miss = false;
        for n in 0..=lhs.horizon() {
            for w in 0..lhs.n_outcomes() {
                let d = (lhs.get(n, w).clone() - rhs.get(n, w).clone()).abs();
                let miss = S::EXACT && !d.is_zero();
                let df = d.to_f64();
                if df > gap || (miss && !exact_miss) || df.is_nan() {
                    gap = if df.is_nan() { f64::INFINITY } else { gap.max(df) };
                    worst = Some(Node { time: n, outcome: w });
                }
                exact_miss |= miss;
            }
        }
        let tol = if S::EXACT { 0.0 } else { tol };
        let mut c = Check::new(name, gap, tol, worst);
        c.pass = !exact_miss && gap <= tol;
        c
    }

    pub fn verdict(&self) -> &'static str {
        if self.pass {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {} max_error={:e} tol={:e}",
            self.verdict(),
            self.name,
            self.max_error,
            self.tolerance
        )?;
        if let (Some(node), false) = (self.worst, self.pass) {
            write!(f, " at {}", node)?;
        }
        Ok(())
    }
}
