//! The unifilar order estimator.
//!
//! The estimate is the smallest order whose exact maximum likelihood reaches
//! the `w_n`-penalized universal probability of the observed string:
//! `min { k : ML(x|k) >= w_n P(x) }` with `w_n = 1/n - 1/(n+1)`. Since
//! `ML(x|k) = 1` for `k >= n` and `w_n P(x) < 1`, the estimate never exceeds
//! `n`. Exact mode uses the Ryabko mixture for `P(x)` and inherits bracket
//! semantics from the normalizer cells: when cells are bracketed the result
//! is an order interval rather than an unsound point value. Surrogate mode
//! swaps the mixture for the LZ78 codelength, which scales to long strings
//! at the price of the mutual-information bound the exact form enjoys.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::ml_value_seeded;
use crate::mixture::{log_ryabko, weight};
use crate::model::SymbolString;
use crate::nml::ComplexityTable;

/// Which universal probability backed the estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    Exact,
    Surrogate,
}

/// An order estimate; `lo == hi` when determinate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderEstimate {
    pub lo: u32,
    pub hi: u32,
    pub mode: EstimateMode,
}

impl OrderEstimate {
    pub fn determinate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn point(&self) -> Option<u32> {
        if self.determinate() {
            Some(self.lo)
        } else {
            None
        }
    }
}

/// An LZ78 incremental parse. All phrases are distinct dictionary entries
/// except possibly the last, which repeats an earlier phrase when the input
/// ends mid-phrase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lz78Parse {
    /// Phrase `j` (1-based) is `phrases[j-1] = (prev, symbol)`: the index of
    /// an earlier phrase (0 = empty) extended by one symbol.
    pub phrases: Vec<(u32, u8)>,
    /// False when the final phrase repeats an earlier one.
    pub complete: bool,
    alphabet_size: u32,
}

impl Lz78Parse {
    pub fn phrase_count(&self) -> usize {
        self.phrases.len()
    }

    /// Code length in bits: phrase `j` spends `ceil(log2 j)` bits on the
    /// back-pointer and `ceil(log2 |X|)` on the symbol.
    pub fn codelength_bits(&self) -> u64 {
        let sym_bits = ceil_log2(self.alphabet_size as u64);
        (1..=self.phrases.len() as u64)
            .map(|j| ceil_log2(j) + sym_bits)
            .sum()
    }

    /// Reconstructs the parsed string.
    pub fn reconstruct(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for &(prev, sym) in &self.phrases {
            let mut phrase = Vec::new();
            let mut at = prev;
            while at != 0 {
                let (p, s) = self.phrases[at as usize - 1];
                phrase.push(s);
                at = p;
            }
            phrase.reverse();
            out.extend_from_slice(&phrase);
            out.push(sym);
        }
        if !self.complete {
            // The repeated tail phrase was pushed in full; nothing to trim.
        }
        out
    }
}

fn ceil_log2(m: u64) -> u64 {
    if m <= 1 {
        0
    } else {
        64 - (m - 1).leading_zeros() as u64
    }
}

/// Incremental LZ78 parse of `x`.
pub fn lz78_parse(x: &SymbolString) -> Lz78Parse {
    let mut trie: HashMap<(u32, u8), u32> = HashMap::new();
    let mut phrases: Vec<(u32, u8)> = Vec::new();
    let mut current = 0u32;
    for &sym in x.as_slice() {
        match trie.get(&(current, sym)) {
            Some(&next) => current = next,
            None => {
                phrases.push((current, sym));
                trie.insert((current, sym), phrases.len() as u32);
                current = 0;
            }
        }
    }
    let mut complete = true;
    if current != 0 {
        // Input ended inside a known phrase; emit that phrase again.
        phrases.push(phrases[current as usize - 1]);
        complete = false;
    }
    Lz78Parse {
        phrases,
        complete,
        alphabet_size: x.alphabet().size(),
    }
}

/// LZ78 code length of `x` in bits.
pub fn lz78_codelength(x: &SymbolString) -> f64 {
    lz78_parse(x).codelength_bits() as f64
}

/// Penalty weight `w_n` used by the estimator.
pub fn penalty_weight(n: usize) -> f64 {
    weight(n as u32)
}

/// Exact-mode order estimate: smallest `k` with
/// `log2 ML(x|k) >= log2 w_n + log2 P(x)`, evaluated at both ends of the
/// mixture bracket. Reuses the per-order ML values the mixture already
/// computed.
pub fn order_estimate_exact(
    x: &SymbolString,
    table: &ComplexityTable,
    band: u32,
) -> Result<OrderEstimate> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "order estimation needs a nonempty string".into(),
        ));
    }
    let mix = log_ryabko(x, table, band)?;
    let log_wn = penalty_weight(n).log2();
    let thr_lo = log_wn + mix.lo.log2();
    let thr_hi = log_wn + mix.hi.log2();
    let ml_at = |k: u32| -> f64 {
        if k as usize >= n {
            0.0
        } else {
            mix.contributions[k as usize - 1].log_ml
        }
    };
    let first_k = |thr: f64| -> u32 {
        (1..=n as u32)
            .find(|&k| ml_at(k) >= thr)
            .expect("ML saturates at 1 >= w_n P(x)")
    };
    Ok(OrderEstimate {
        lo: first_k(thr_lo),
        hi: first_k(thr_hi),
        mode: EstimateMode::Exact,
    })
}

/// Surrogate-mode order estimate: smallest `k` with
/// `log2 ML(x|k) >= log2 w_n - LZ78(x)`. Always determinate, and only
/// orders up to the answer are ever searched.
pub fn order_estimate_surrogate(x: &SymbolString) -> Result<OrderEstimate> {
    let n = x.len();
    if n == 0 {
        return Err(Error::InvalidInput(
            "order estimation needs a nonempty string".into(),
        ));
    }
    let thr = penalty_weight(n).log2() - lz78_codelength(x);
    let mut prev = f64::NEG_INFINITY;
    for k in 1..=n as u32 {
        let v = ml_value_seeded(
            x.as_slice(),
            x.alphabet().size(),
            k,
            if k > 1 { Some(prev) } else { None },
        );
        if v >= thr {
            return Ok(OrderEstimate {
                lo: k,
                hi: k,
                mode: EstimateMode::Surrogate,
            });
        }
        prev = v;
    }
    unreachable!("ML(x|n) = 1 always meets a threshold below 1")
}
