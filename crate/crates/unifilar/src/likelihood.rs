//! Exact maximum likelihood over the order-`k` unifilar family.
//!
//! For a fixed start state and transition table, the likelihood of a string
//! is maximized by plugging in the empirical emission frequencies per state,
//! so the search space is the discrete set of `(start, tau)` pairs. Rather
//! than materializing all `k^{k|X|} * k` tables, the search walks the string
//! and branches only when it meets a `(state, symbol)` pair whose transition
//! is still unassigned. Fresh states are introduced in first-visit order
//! with the start state fixed to 1, which quotients away the `k!` relabeling
//! symmetry, and subtrees are pruned against the best value found so far
//! using an admissible bound.
//!
//! The bound is the plug-in value of the counts committed so far: extending
//! a string can only multiply the likelihood by factors at most 1, and the
//! committed cells' final contribution `prod (N_ab/N_a)^{n_ab}` is itself
//! maximized by the current empirical ratios.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::LogProb;
use crate::model::SymbolString;

/// Safety margin for branch-and-bound pruning. Incremental bounds and
/// canonical leaf values agree to ~1e-12, so pruning only below
/// `best - MARGIN` can never discard a float-maximal leaf.
const PRUNE_MARGIN: f64 = 1e-9;

/// Table of `x * log2(x)` for integer `x`, with the `0 log 0 = 0` convention.
#[derive(Debug)]
pub(crate) struct XLog2Table(Vec<f64>);

impl XLog2Table {
    pub(crate) fn up_to(n: usize) -> XLog2Table {
        let mut v = Vec::with_capacity(n + 2);
        v.push(0.0);
        for i in 1..=n + 1 {
            let x = i as f64;
            v.push(x * x.log2());
        }
        XLog2Table(v)
    }

    #[inline]
    pub(crate) fn get(&self, x: u32) -> f64 {
        self.0[x as usize]
    }
}

/// Emission counts `n_ab` for a walk: rows are states `1..=k`, columns are
/// symbols.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountMatrix {
    k: u32,
    alphabet_size: u32,
    counts: Vec<u32>,
}

impl CountMatrix {
    pub fn new(k: u32, alphabet_size: u32) -> CountMatrix {
        CountMatrix {
            k,
            alphabet_size,
            counts: vec![0; k as usize * alphabet_size as usize],
        }
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn count(&self, state: u32, symbol: u8) -> u32 {
        self.counts[(state as usize - 1) * self.alphabet_size as usize + symbol as usize]
    }

    pub fn increment(&mut self, state: u32, symbol: u8) {
        self.counts[(state as usize - 1) * self.alphabet_size as usize + symbol as usize] += 1;
    }

    pub fn row_sum(&self, state: u32) -> u32 {
        let a = self.alphabet_size as usize;
        self.counts[(state as usize - 1) * a..state as usize * a]
            .iter()
            .sum()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// Plug-in log-likelihood `sum n_ab log2(n_ab / n_a)` of these counts.
    pub fn plugin_value(&self) -> f64 {
        let table = XLog2Table::up_to(self.total() as usize);
        canonical_value(&self.counts, self.alphabet_size as usize, self.k, &table)
    }
}

/// Fixed-order plug-in value: cells in (state, symbol) order minus row sums
/// in state order. Every code path that compares plug-in values goes through
/// this function so that equal counts give bitwise-equal floats.
fn canonical_value(counts: &[u32], a: usize, k_rows: u32, table: &XLog2Table) -> f64 {
    let mut v = 0.0;
    for state in 0..k_rows as usize {
        let row = &counts[state * a..(state + 1) * a];
        let mut row_sum = 0u32;
        for &c in row {
            v += table.get(c);
            row_sum += c;
        }
        v -= table.get(row_sum);
    }
    v
}

/// A start state plus a (possibly partial) transition table: exactly the
/// discrete parameters the maximum-likelihood search ranges over.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AutomatonSpec {
    /// Start state in `1..=k`.
    pub y1: u32,
    /// Assigned transitions, keyed by `(state, symbol)`.
    pub tau_partial: BTreeMap<(u32, u8), u32>,
}

impl AutomatonSpec {
    pub fn new(y1: u32) -> AutomatonSpec {
        AutomatonSpec {
            y1,
            tau_partial: BTreeMap::new(),
        }
    }
}

/// Result of the exact maximum-likelihood search.
#[derive(Clone, Debug, PartialEq)]
pub struct MlResult {
    /// The maximum likelihood value.
    pub log_ml: LogProb,
    /// Canonical maximizer: start state 1, fresh states numbered by first
    /// appearance, ties broken by the lexicographically smallest assignment
    /// sequence.
    pub argmax: AutomatonSpec,
    /// Emission counts of the maximizing walk.
    pub counts: CountMatrix,
}

/// Plug-in log-likelihood of `x` under an explicit automaton: drives the
/// walk from `automaton.y1`, accumulates per-state emission counts, and
/// evaluates the empirical-emission likelihood.
pub fn plugin_log_ml(x: &SymbolString, automaton: &AutomatonSpec, k: u32) -> Result<LogProb> {
    if k == 0 {
        return Err(Error::InvalidInput("order k must be positive".into()));
    }
    if automaton.y1 == 0 || automaton.y1 > k {
        return Err(Error::InvalidInput(format!(
            "start state {} outside 1..={k}",
            automaton.y1
        )));
    }
    for (&(state, sym), &next) in &automaton.tau_partial {
        if state == 0 || state > k || next == 0 || next > k {
            return Err(Error::InvalidInput(format!(
                "transition ({state},{sym})->{next} outside 1..={k}"
            )));
        }
        if !x.alphabet().contains(sym) {
            return Err(Error::InvalidInput(format!(
                "transition symbol {sym} outside alphabet"
            )));
        }
    }
    let a = x.alphabet().size();
    let mut counts = CountMatrix::new(k, a);
    let mut state = automaton.y1;
    let xs = x.as_slice();
    for (i, &sym) in xs.iter().enumerate() {
        counts.increment(state, sym);
        if i + 1 < xs.len() {
            state = *automaton.tau_partial.get(&(state, sym)).ok_or_else(|| {
                Error::InvalidInput(format!(
                    "transition for (state {state}, symbol {sym}) missing at position {i}"
                ))
            })?;
        }
    }
    let table = XLog2Table::up_to(xs.len());
    let v = canonical_value(&counts.counts, a as usize, k, &table);
    LogProb::from_log2(v)
}

/// Admissible upper bound for any completion of a partial walk: the plug-in
/// value of the committed counts (remaining symbols contribute at most 0
/// each, and the committed cells cannot do better than their own empirical
/// ratios).
pub fn optimistic_bound(partial_counts: &CountMatrix, _remaining: usize) -> LogProb {
    LogProb::from_log2(partial_counts.plugin_value().min(0.0)).expect("plug-in value is <= 0")
}

struct Search<'a> {
    xs: &'a [u8],
    a: usize,
    k: u32,
    table: &'a XLog2Table,
    counts: Vec<u32>,
    rows: Vec<u32>,
    tau: Vec<u32>,
    used: u32,
    value: f64,
    undo: Vec<usize>,
    best: f64,
    found: bool,
    done: bool,
    track: bool,
    best_tau: Vec<u32>,
    best_counts: Vec<u32>,
}

impl<'a> Search<'a> {
    fn new(xs: &'a [u8], a: usize, k: u32, table: &'a XLog2Table, track: bool) -> Search<'a> {
        let cells = k as usize * a;
        Search {
            xs,
            a,
            k,
            table,
            counts: vec![0; cells],
            rows: vec![0; k as usize],
            tau: vec![0; cells],
            used: 1,
            value: 0.0,
            undo: Vec::with_capacity(xs.len()),
            best: f64::NEG_INFINITY,
            found: false,
            done: false,
            track,
            best_tau: vec![0; if track { cells } else { 0 }],
            best_counts: vec![0; if track { cells } else { 0 }],
        }
    }

    #[inline]
    fn bump(&mut self, cell: usize, state_idx: usize) {
        let c = self.counts[cell];
        let r = self.rows[state_idx];
        self.value += (self.table.get(c + 1) - self.table.get(c))
            - (self.table.get(r + 1) - self.table.get(r));
        self.counts[cell] = c + 1;
        self.rows[state_idx] = r + 1;
        self.undo.push(cell);
    }

    fn leaf(&mut self) {
        let v = canonical_value(&self.counts, self.a, self.used, self.table);
        if v > self.best {
            self.best = v;
            self.found = true;
            if self.track {
                self.best_tau.copy_from_slice(&self.tau);
                self.best_counts.copy_from_slice(&self.counts);
            }
            if v == 0.0 {
                // Nothing can beat probability one, and later ties are
                // lexicographically larger.
                self.done = true;
            }
        }
    }

    fn walk(&mut self, mut pos: usize, mut state: u32) {
        let mark = self.undo.len();
        let start_value = self.value;
        loop {
            if pos == self.xs.len() {
                self.leaf();
                break;
            }
            let sym = self.xs[pos] as usize;
            let state_idx = state as usize - 1;
            let cell = state_idx * self.a + sym;
            self.bump(cell, state_idx);
            pos += 1;
            if self.value <= self.best - PRUNE_MARGIN {
                break;
            }
            if pos == self.xs.len() {
                self.leaf();
                break;
            }
            let next = self.tau[cell];
            if next != 0 {
                state = next;
                continue;
            }
            // Branch event: existing states in order, then one fresh state.
            let max_choice = (self.used + 1).min(self.k);
            for choice in 1..=max_choice {
                let fresh = choice == self.used + 1;
                self.tau[cell] = choice;
                if fresh {
                    self.used += 1;
                }
                self.walk(pos, choice);
                if fresh {
                    self.used -= 1;
                }
                if self.done {
                    break;
                }
            }
            self.tau[cell] = 0;
            break;
        }
        while self.undo.len() > mark {
            let cell = self.undo.pop().expect("non-empty undo log");
            self.counts[cell] -= 1;
            self.rows[cell / self.a] -= 1;
        }
        self.value = start_value;
    }
}

/// Exact maximum likelihood with the canonical maximizer.
///
/// The result does not depend on search order; the argmax tie-break is the
/// lexicographically smallest canonical assignment sequence.
pub fn exact_log_ml(x: &SymbolString, k: u32) -> Result<MlResult> {
    if k == 0 {
        return Err(Error::InvalidInput("order k must be positive".into()));
    }
    let n = x.len();
    // More states than symbols can never help; capping keeps the walk small
    // and leaves the value unchanged.
    let k_eff = k.min(n.max(1) as u32);
    let a = x.alphabet().size() as usize;
    let table = XLog2Table::up_to(n);
    let mut search = Search::new(x.as_slice(), a, k_eff, &table, true);
    search.walk(0, 1);
    debug_assert!(search.found);
    let mut tau_partial = BTreeMap::new();
    for (cell, &next) in search.best_tau.iter().enumerate() {
        if next != 0 {
            let state = (cell / a) as u32 + 1;
            let sym = (cell % a) as u8;
            tau_partial.insert((state, sym), next);
        }
    }
    let counts = CountMatrix {
        k: k_eff,
        alphabet_size: a as u32,
        counts: search.best_counts,
    };
    Ok(MlResult {
        log_ml: LogProb::from_log2(search.best)?,
        argmax: AutomatonSpec {
            y1: 1,
            tau_partial,
        },
        counts,
    })
}

/// Value-only exact maximum likelihood, optionally seeded with a known
/// achievable value (e.g. the order-`k-1` maximum, valid by monotonicity).
pub(crate) fn ml_value_seeded(xs: &[u8], alphabet_size: u32, k: u32, seed: Option<f64>) -> f64 {
    let n = xs.len();
    if k as usize >= n.max(1) {
        // A chain automaton with one state per position reaches likelihood 1.
        return 0.0;
    }
    let table = XLog2Table::up_to(n);
    let mut search = Search::new(xs, alphabet_size as usize, k, &table, false);
    if let Some(s) = seed {
        search.best = s;
    }
    search.walk(0, 1);
    search.best
}

/// Exact log-maximum-likelihood values for every order `1..=k_max`.
///
/// Seeds each search with the previous order's value and stops searching
/// once the likelihood saturates at 1 (it stays 1 for all larger orders).
pub fn ml_profile(x: &SymbolString, k_max: u32) -> Vec<f64> {
    let xs = x.as_slice();
    let a = x.alphabet().size();
    let mut out = Vec::with_capacity(k_max as usize);
    let mut prev = f64::NEG_INFINITY;
    let mut saturated = false;
    for k in 1..=k_max {
        if saturated {
            out.push(0.0);
            continue;
        }
        let v = ml_value_seeded(xs, a, k, if k > 1 { Some(prev) } else { None });
        if v == 0.0 {
            saturated = true;
        }
        out.push(v);
        prev = v;
    }
    out
}
