//! The Ryabko mixture over unifilar orders and its diagnostics.
//!
//! The mixture `P(x) = sum_k w_k NML(x|k)` with `w_k = 1/k - 1/(k+1)` is a
//! universal distribution for the unifilar family. Since `ML(x|k) = 1` for
//! `k >= n`, every order from `n` up contributes the uniform value
//! `|X|^{-n}`, so the infinite series truncates exactly: orders `1..n-1`
//! are computed term by term and the rest collapse into the closed-form
//! tail `(1/n) |X|^{-n}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::ml_profile;
use crate::logprob::{log2_sum, LogProb};
use crate::model::SymbolString;
use crate::nml::{complexity, ComplexityTable, NmlValue};

/// Ryabko prior weight `w_k = 1/k - 1/(k+1) = 1/(k(k+1))`.
pub fn weight(k: u32) -> f64 {
    let kf = k as f64;
    1.0 / (kf * (kf + 1.0))
}

/// One order's share of the mixture.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderContribution {
    pub k: u32,
    pub weight: f64,
    /// Exact `log2 ML(x|k)`.
    pub log_ml: f64,
    pub nml: NmlValue,
}

/// The mixture value with its per-order decomposition; the decomposition is
/// kept because the order estimator needs exactly the same ML values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureValue {
    pub lo: LogProb,
    pub hi: LogProb,
    /// True when every contributing normalizer cell is exact.
    pub exact: bool,
    /// Orders `1..=n-1`.
    pub contributions: Vec<OrderContribution>,
    /// `log2` of the closed-form tail `(1/n) |X|^{-n}` covering all
    /// orders `k >= n`.
    pub tail_log2: f64,
}

impl MixtureValue {
    pub fn point(&self) -> Option<LogProb> {
        if self.exact {
            Some(self.lo)
        } else {
            None
        }
    }
}

/// `log2` of the Ryabko mixture, with brackets propagated from the
/// normalizer cells.
pub fn log_ryabko(x: &SymbolString, table: &ComplexityTable, band: u32) -> Result<MixtureValue> {
    let n = x.len();
    if n == 0 {
        return Ok(MixtureValue {
            lo: LogProb::ONE,
            hi: LogProb::ONE,
            exact: true,
            contributions: Vec::new(),
            tail_log2: 0.0,
        });
    }
    let alphabet = x.alphabet();
    let profile = if n >= 2 {
        ml_profile(x, n as u32 - 1)
    } else {
        Vec::new()
    };
    let mut contributions = Vec::with_capacity(profile.len());
    let mut lo_terms = Vec::with_capacity(profile.len() + 1);
    let mut hi_terms = Vec::with_capacity(profile.len() + 1);
    let mut exact = true;
    for (i, &log_ml) in profile.iter().enumerate() {
        let k = i as u32 + 1;
        let cell = complexity(table, alphabet, n, k, band);
        let nml = NmlValue {
            lo: LogProb::from_log2((log_ml - cell.hi).min(0.0))?,
            hi: LogProb::from_log2((log_ml - cell.lo).min(0.0))?,
            exact: cell.is_exact(),
        };
        exact &= nml.exact;
        let w = weight(k);
        lo_terms.push(w.log2() + nml.lo.log2());
        hi_terms.push(w.log2() + nml.hi.log2());
        contributions.push(OrderContribution {
            k,
            weight: w,
            log_ml,
            nml,
        });
    }
    // sum_{k >= n} w_k = 1/n telescopes; each such order contributes the
    // uniform probability |X|^{-n}.
    let tail_log2 = -(n as f64).log2() - n as f64 * alphabet.log2_size();
    lo_terms.push(tail_log2);
    hi_terms.push(tail_log2);
    Ok(MixtureValue {
        lo: LogProb::from_log2(log2_sum(&lo_terms).min(0.0))?,
        hi: LogProb::from_log2(log2_sum(&hi_terms).min(0.0))?,
        exact,
        contributions,
        tail_log2,
    })
}

/// NML value of `x` at order `k` from a fully exact mixture decomposition.
fn exact_nml_at(mix: &MixtureValue, n: usize, log_uniform: f64, k: u32) -> f64 {
    if k as usize >= n {
        log_uniform
    } else {
        mix.contributions[k as usize - 1].nml.lo.log2()
    }
}

/// The smallest order maximizing `NML(x|k)`.
///
/// Needs exact normalizer cells for every order below `n`; bracketed cells
/// make the comparison ambiguous and are reported as an error rather than
/// guessed around.
pub fn nml_argmax(x: &SymbolString, table: &ComplexityTable, band: u32) -> Result<u32> {
    let n = x.len();
    if n <= 1 {
        return Ok(1);
    }
    let mix = log_ryabko(x, table, band)?;
    if !mix.exact {
        return Err(Error::Indeterminate(format!(
            "NML argmax over n = {n} needs exact normalizer cells for every k < n"
        )));
    }
    let log_uniform = -(n as f64) * x.alphabet().log2_size();
    let mut best_k = 1u32;
    let mut best = exact_nml_at(&mix, n, log_uniform, 1);
    for k in 2..=n as u32 {
        let v = exact_nml_at(&mix, n, log_uniform, k);
        if v > best {
            best = v;
            best_k = k;
        }
    }
    Ok(best_k)
}

/// Slack record for the two-sided mixture bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    /// The maximizing order `G(x)`.
    pub maximizer: u32,
    /// `(-log P(x)) - (-log P(x|G(x)))`, nonnegative when the bound holds.
    pub left_slack: f64,
    /// Per order `k <= n`: `(-log P(x|k) - log w_k) - (-log P(x))`.
    pub right_slacks: Vec<(u32, f64)>,
}

/// Verifies `-log P(x|G(x)) <= -log P(x) <= -log P(x|k) - log w_k` for all
/// `k <= n` and returns the slacks. A violation beyond 1e-9 is a bug signal
/// and becomes an invariant-failure error.
pub fn sandwich_check(
    x: &SymbolString,
    table: &ComplexityTable,
    band: u32,
) -> Result<SandwichReport> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "sandwich check needs a nonempty string".into(),
        ));
    }
    let mix = log_ryabko(x, table, band)?;
    if !mix.exact {
        return Err(Error::Indeterminate(
            "sandwich check needs exact normalizer cells".into(),
        ));
    }
    let maximizer = nml_argmax(x, table, band)?;
    let log_mix = mix.lo.log2();
    let log_uniform = -(n as f64) * x.alphabet().log2_size();
    let left_slack = exact_nml_at(&mix, n, log_uniform, maximizer) - log_mix;
    let mut right_slacks = Vec::with_capacity(n);
    for k in 1..=n as u32 {
        let slack = log_mix - exact_nml_at(&mix, n, log_uniform, k) - weight(k).log2();
        right_slacks.push((k, slack));
    }
    let worst = right_slacks
        .iter()
        .map(|&(_, s)| s)
        .fold(left_slack, f64::min);
    if worst < -1e-9 {
        return Err(Error::InvariantViolation(format!(
            "sandwich bound violated by {worst} bits on a length-{n} string"
        )));
    }
    Ok(SandwichReport {
        maximizer,
        left_slack,
        right_slacks,
    })
}
