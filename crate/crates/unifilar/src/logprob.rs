//! Probabilities in base-2 log domain.
//!
//! Every probability in this crate is carried as its binary logarithm, with
//! `-inf` as the distinguished zero element. Products become sums and
//! mixtures go through log-sum-exp, which keeps strings of a few thousand
//! symbols well away from underflow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A probability stored as `log2(p)`, with `-inf` representing `p = 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LogProb(f64);

impl LogProb {
    /// Probability zero.
    pub const ZERO: LogProb = LogProb(f64::NEG_INFINITY);
    /// Probability one.
    pub const ONE: LogProb = LogProb(0.0);

    /// Wraps a base-2 log value. Values above zero by more than 1e-9 are
    /// rejected; tiny positive excursions from round-off are clamped to 0.
    pub fn from_log2(value: f64) -> Result<LogProb> {
        if value.is_nan() {
            return Err(Error::InvalidInput("log-probability is NaN".into()));
        }
        if value > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "log2 probability {value} exceeds 0"
            )));
        }
        Ok(LogProb(value.min(0.0)))
    }

    /// Wraps a linear-domain probability in `[0, 1]`.
    pub fn from_prob(p: f64) -> Result<LogProb> {
        if !(0.0..=1.0 + 1e-12).contains(&p) {
            return Err(Error::InvalidInput(format!("probability {p} outside [0,1]")));
        }
        if p <= 0.0 {
            Ok(LogProb::ZERO)
        } else {
            Ok(LogProb(p.log2().min(0.0)))
        }
    }

    /// The raw base-2 log value.
    pub fn log2(self) -> f64 {
        self.0
    }

    /// Back to linear domain.
    pub fn prob(self) -> f64 {
        self.0.exp2()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Product of probabilities (sum of logs).
    pub fn and(self, other: LogProb) -> LogProb {
        if self.is_zero() || other.is_zero() {
            LogProb::ZERO
        } else {
            LogProb(self.0 + other.0)
        }
    }
}

impl std::fmt::Display for LogProb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `log2(2^a + 2^b)`, stable for widely separated magnitudes.
pub fn log2_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    if a >= b {
        a + (b - a).exp2().ln_1p() / std::f64::consts::LN_2
    } else {
        b + (a - b).exp2().ln_1p() / std::f64::consts::LN_2
    }
}

/// Log-sum-exp over a slice in the order given (deterministic).
pub fn log2_sum(values: &[f64]) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for &v in values {
        acc = log2_add(acc, v);
    }
    acc
}
