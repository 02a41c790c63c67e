//! Statistical complexity and normalized maximum likelihood.
//!
//! The statistical complexity of the order-`k` unifilar family at length `n`
//! is `C(n|k) = log2 sum_{x in X^n} ML(x|k)`, the Shtarkov normalizer of the
//! maximum likelihood. It is computed exactly by a depth-first traversal of
//! the prefix tree of `X^n` that carries the set of live canonical partial
//! automata (the partial search state is shared across all strings with a
//! common prefix), or bounded by guaranteed brackets outside the configured
//! exact envelope.
//!
//! One traversal with order cap `k_max` yields every cell `C(n|1..=k_max)`
//! at once: the maximum over live automata using at most `k` states is a
//! running prefix-maximum over the per-state-count maxima at each leaf.
//!
//! Brackets are sound by three monotonicity facts, each checked in tests:
//! `C(n|k)` is nondecreasing in `k` (more states only widen the max),
//! nondecreasing in `n` (extending the optimal automaton's empirical
//! emissions preserves total mass), and subadditive in `n`
//! (`ML(uv) <= ML(u) ML(v)`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{ml_value_seeded, XLog2Table};
use crate::logprob::{log2_sum, LogProb};
use crate::model::{Alphabet, SymbolString};

/// Hard structural caps for the sweep's fixed-size node layout.
const MAX_SWEEP_CELLS: usize = 32;
const MAX_SWEEP_ROWS: usize = 16;
const MAX_SWEEP_LEN: usize = 200;

/// Size limit for exact enumeration of `X^n`.
///
/// `max_leaves` caps the string count (the default allows binary strings up
/// to length 14); `max_work` caps the product of leaves and the worst-case
/// live-automata count, which is what actually bounds the traversal at
/// higher order caps. Experiments may raise both explicitly for cells they
/// are willing to pay for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactEnvelope {
    pub max_leaves: u64,
    #[serde(default = "default_max_work")]
    pub max_work: u64,
}

fn default_max_work() -> u64 {
    4_000_000_000
}

impl Default for ExactEnvelope {
    fn default() -> Self {
        ExactEnvelope {
            max_leaves: 1 << 14,
            max_work: default_max_work(),
        }
    }
}

impl ExactEnvelope {
    pub fn with_max_leaves(max_leaves: u64) -> ExactEnvelope {
        ExactEnvelope {
            max_leaves,
            max_work: default_max_work(),
        }
    }

    /// Number of leaves `|X|^n`, if it fits in the envelope.
    pub fn leaves(&self, alphabet: Alphabet, n: usize) -> Option<u64> {
        let mut total: u128 = 1;
        for _ in 0..n {
            total = total.checked_mul(alphabet.size() as u128)?;
            if total > self.max_leaves as u128 {
                return None;
            }
        }
        Some(total as u64)
    }

    pub fn allows(&self, alphabet: Alphabet, n: usize) -> bool {
        self.leaves(alphabet, n).is_some()
    }

    /// Worst-case traversal size for a sweep at order cap `k_max`: leaves
    /// times the number of canonical partial automata (restricted-growth
    /// assignments over at most `min(n-1, k_max |X|)` branch events).
    pub fn sweep_work(&self, alphabet: Alphabet, n: usize, k_max: u32) -> Option<u64> {
        let leaves = self.leaves(alphabet, n)? as u128;
        let k = (k_max as usize).min(n.max(1));
        let events = (n.saturating_sub(1)).min(k * alphabet.size() as usize);
        let live = capped_partial_automata(events, k);
        let work = leaves.checked_mul(live)?;
        if work <= self.max_work as u128 {
            Some(work as u64)
        } else {
            None
        }
    }
}

/// Restricted-growth sequences of length `events` over at most `k` labels:
/// `sum_{j<=k} S(events, j)` with Stirling numbers of the second kind,
/// saturating well above any feasible budget.
fn capped_partial_automata(events: usize, k: usize) -> u128 {
    const CAP: u128 = u64::MAX as u128;
    let mut row = vec![0u128; k + 2];
    row[0] = 1; // S(0, 0)
    for _ in 0..events {
        let mut next = vec![0u128; k + 2];
        for j in 0..=k {
            if row[j] == 0 && (j == 0 || row[j - 1] == 0) {
                continue;
            }
            let grow = (j as u128).saturating_mul(row[j]);
            let fresh = if j > 0 { row[j - 1] } else { 0 };
            next[j] = grow.saturating_add(fresh).min(CAP);
        }
        // S(t, 0) = 0 for t >= 1.
        next[0] = 0;
        row = next;
    }
    row.iter().take(k + 1).fold(0u128, |a, &v| a.saturating_add(v)).max(1)
}

/// Whether a stored complexity value is exact or a guaranteed bracket.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellMode {
    Exact,
    Bracket,
}

/// A complexity value in bits: `lo == hi` when exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellValue {
    pub lo: f64,
    pub hi: f64,
    pub mode: CellMode,
}

impl CellValue {
    pub fn exact(bits: f64) -> CellValue {
        CellValue {
            lo: bits,
            hi: bits,
            mode: CellMode::Exact,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.mode == CellMode::Exact
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Persisted cache of statistical complexities keyed by
/// `(alphabet size, n, k)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ComplexityTable {
    entries: BTreeMap<(u32, u64, u32), CellValue>,
}

impl ComplexityTable {
    pub fn new() -> ComplexityTable {
        ComplexityTable::default()
    }

    pub fn get(&self, alphabet: Alphabet, n: usize, k: u32) -> Option<&CellValue> {
        self.entries.get(&(alphabet.size(), n as u64, k))
    }

    pub fn insert(&mut self, alphabet: Alphabet, n: usize, k: u32, value: CellValue) {
        self.entries.insert((alphabet.size(), n as u64, k), value);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in key order: `(alphabet_size, n, k, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u64, u32, &CellValue)> {
        self.entries
            .iter()
            .map(|(&(a, n, k), v)| (a, n, k, v))
    }

    /// Largest exact value among cells with `n' <= n` and `k' <= k`
    /// (a lower bound for `C(n|k)` by monotonicity in both arguments).
    fn monotone_lower(&self, alphabet: Alphabet, n: usize, k: u32) -> Option<f64> {
        self.entries
            .range((alphabet.size(), 0, 0)..=(alphabet.size(), n as u64, u32::MAX))
            .filter(|(&(_, _, kk), v)| kk <= k && v.is_exact())
            .map(|(_, v)| v.lo)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.max(v))))
    }

    /// Best subadditive cover `ceil(n/n0) * C(n0|k')` over exact cells with
    /// `k' >= k` (an upper bound for `C(n|k)`).
    fn subadditive_upper(&self, alphabet: Alphabet, n: usize, k: u32) -> Option<f64> {
        self.entries
            .range((alphabet.size(), 1, 0)..=(alphabet.size(), n as u64, u32::MAX))
            .filter(|(&(_, _, kk), v)| kk >= k && v.is_exact())
            .map(|(&(_, nn, _), v)| (n as u64).div_ceil(nn) as f64 * v.hi)
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }
}

/// The crude uniform bound `min(n log2 |X|, (k|X|+1) log2(k(n+1)))`: the
/// family has at most `k^{k|X|+1}` distinct `(start, tau)` pairs and fewer
/// than `(n+1)^{k|X|}` empirical emission matrices each.
pub fn complexity_upper_bound(n: usize, k: u32, alphabet: Alphabet) -> f64 {
    let trivial = n as f64 * alphabet.log2_size();
    if n == 0 || k == 0 {
        return 0.0;
    }
    let params = (k as f64 * alphabet.size() as f64 + 1.0)
        * ((k as f64) * (n as f64 + 1.0)).log2();
    trivial.min(params)
}

/// Exact `C(n|1)` for the binary alphabet at any length, by summing
/// `binom(n, a) (a/n)^a ((n-a)/n)^(n-a)` over the ones-count `a`.
pub fn complexity_k1_binary(n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let nf = n as f64;
    let mut terms = Vec::with_capacity(n + 1);
    let mut log2_binom = 0.0;
    for a in 0..=n {
        let af = a as f64;
        let bf = nf - af;
        let mut t = log2_binom;
        if a > 0 {
            t += af * (af / nf).log2();
        }
        if a < n {
            t += bf * (bf / nf).log2();
        }
        terms.push(t);
        // binom(n, a+1) = binom(n, a) * (n-a)/(a+1)
        log2_binom += bf.log2() - (af + 1.0).log2();
    }
    log2_sum(&terms)
}

// ---------------------------------------------------------------------------
// Shared-prefix exact sweep
// ---------------------------------------------------------------------------

/// A live canonical partial automaton carried through the prefix tree.
#[derive(Clone, Copy)]
struct SweepNode {
    tau: [u8; MAX_SWEEP_CELLS],
    counts: [u8; MAX_SWEEP_CELLS],
    rows: [u8; MAX_SWEEP_ROWS],
    state: u8,
    used: u8,
    value: f64,
}

impl SweepNode {
    fn root() -> SweepNode {
        SweepNode {
            tau: [0; MAX_SWEEP_CELLS],
            counts: [0; MAX_SWEEP_CELLS],
            rows: [0; MAX_SWEEP_ROWS],
            state: 0,
            used: 1,
            value: 0.0,
        }
    }
}

struct SweepCtx {
    a: usize,
    n: usize,
    k_max: usize,
    table: XLog2Table,
    parallel_depth: usize,
}

/// Per-order linear-domain sums `sum_x 2^{ML(x|k)}` for `k = 1..=k_max`.
type SweepSums = Vec<f64>;

fn sweep_rec(ctx: &SweepCtx, depth: usize, nodes: &[SweepNode]) -> SweepSums {
    if depth == ctx.n {
        // Max ML per admissible state budget, then prefix-max over budgets.
        let mut per_used = [f64::NEG_INFINITY; MAX_SWEEP_ROWS + 1];
        for node in nodes {
            let u = node.used as usize;
            if node.value > per_used[u] {
                per_used[u] = node.value;
            }
        }
        let mut sums = vec![0.0; ctx.k_max];
        let mut best = f64::NEG_INFINITY;
        for k in 1..=ctx.k_max {
            if per_used[k] > best {
                best = per_used[k];
            }
            sums[k - 1] = best.exp2();
        }
        return sums;
    }
    let extend = |sym: usize| -> Vec<SweepNode> {
        let last = depth + 1 == ctx.n;
        let mut children = Vec::with_capacity(nodes.len() + nodes.len() / 2);
        for node in nodes {
            let mut child = *node;
            let cell = child.state as usize * ctx.a + sym;
            let c = child.counts[cell] as u32;
            let r = child.rows[child.state as usize] as u32;
            child.value += (ctx.table_get(c + 1) - ctx.table_get(c))
                - (ctx.table_get(r + 1) - ctx.table_get(r));
            child.counts[cell] += 1;
            child.rows[child.state as usize] += 1;
            if last {
                children.push(child);
                continue;
            }
            let next = child.tau[cell];
            if next != 0 {
                child.state = next - 1;
                children.push(child);
                continue;
            }
            let max_choice = (child.used as usize + 1).min(ctx.k_max);
            for choice in 1..=max_choice {
                let mut branch = child;
                branch.tau[cell] = choice as u8;
                if choice == child.used as usize + 1 {
                    branch.used += 1;
                }
                branch.state = choice as u8 - 1;
                children.push(branch);
            }
        }
        children
    };

    if ctx.a == 2 && depth < ctx.parallel_depth {
        let (left, right) = rayon::join(
            || {
                let c = extend(0);
                sweep_rec(ctx, depth + 1, &c)
            },
            || {
                let c = extend(1);
                sweep_rec(ctx, depth + 1, &c)
            },
        );
        return combine(left, right);
    }
    let mut acc: Option<SweepSums> = None;
    for sym in 0..ctx.a {
        let c = extend(sym);
        let sums = sweep_rec(ctx, depth + 1, &c);
        acc = Some(match acc {
            None => sums,
            Some(prev) => combine(prev, sums),
        });
    }
    acc.expect("alphabet size >= 2")
}

fn combine(mut left: SweepSums, right: SweepSums) -> SweepSums {
    for (l, r) in left.iter_mut().zip(right) {
        *l += r;
    }
    left
}

impl SweepCtx {
    #[inline]
    fn table_get(&self, x: u32) -> f64 {
        self.table.get(x)
    }
}

/// Exact complexities `C(n|k)` in bits for all `k = 1..=k_max`, by one
/// shared-prefix traversal. Deterministic for any worker count: subtree sums
/// combine in symbol order.
pub fn complexity_sweep(
    alphabet: Alphabet,
    n: usize,
    k_max: u32,
    envelope: &ExactEnvelope,
) -> Result<Vec<f64>> {
    let a = alphabet.size() as usize;
    if k_max == 0 {
        return Err(Error::InvalidInput("k_max must be positive".into()));
    }
    let k_cap = (k_max as usize).min(n.max(1));
    if envelope.leaves(alphabet, n).is_none() {
        return Err(Error::EnvelopeExceeded(format!(
            "|X|^n = {a}^{n} exceeds {} leaves",
            envelope.max_leaves
        )));
    }
    if envelope.sweep_work(alphabet, n, k_cap as u32).is_none() {
        return Err(Error::EnvelopeExceeded(format!(
            "sweep work estimate for (n={n}, k={k_cap}, |X|={a}) exceeds {}",
            envelope.max_work
        )));
    }
    if k_cap * a > MAX_SWEEP_CELLS || k_cap > MAX_SWEEP_ROWS || n > MAX_SWEEP_LEN {
        return Err(Error::EnvelopeExceeded(format!(
            "sweep shape (n={n}, k={k_cap}, |X|={a}) exceeds structural caps"
        )));
    }
    if n == 0 {
        return Ok(vec![0.0; k_max as usize]);
    }
    let ctx = SweepCtx {
        a,
        n,
        k_max: k_cap,
        table: XLog2Table::up_to(n),
        parallel_depth: if n >= 12 { 6 } else { 0 },
    };
    let sums = sweep_rec(&ctx, 0, &[SweepNode::root()]);
    let mut out: Vec<f64> = sums.into_iter().map(f64::log2).collect();
    // Orders beyond the cap cannot do better than saturation at this length.
    out.resize(k_max as usize, n as f64 * alphabet.log2_size());
    Ok(out)
}

/// Test-support alias for the sweep (kept out of normal call paths).
#[doc(hidden)]
pub fn sweep_probe(alphabet: Alphabet, n: usize, k_max: u32, envelope: &ExactEnvelope) -> Vec<f64> {
    complexity_sweep(alphabet, n, k_max, envelope).expect("probe inside envelope")
}

/// Exact statistical complexity of one cell.
///
/// `k >= n` has the closed form `n log2 |X|`; otherwise the cell must lie in
/// the exact envelope, and the caller is pointed at bracket mode when not.
pub fn statistical_complexity_exact(
    alphabet: Alphabet,
    n: usize,
    k: u32,
    envelope: &ExactEnvelope,
) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidInput("order k must be positive".into()));
    }
    if k as usize >= n {
        return Ok(n as f64 * alphabet.log2_size());
    }
    let values = complexity_sweep(alphabet, n, k, envelope)?;
    Ok(values[k as usize - 1])
}

/// Computes and caches exact cells `C(n|k)` for `k` up to the largest order
/// cap within both `band` and the envelope's work budget (plus the analytic
/// binary `k = 1` cell when even that is out of reach). This is the
/// pre-warm step experiments run before their trial loops.
pub fn ensure_cells(
    table: &mut ComplexityTable,
    alphabet: Alphabet,
    n: usize,
    band: u32,
    envelope: &ExactEnvelope,
) -> Result<()> {
    let k_top = band.min(n.saturating_sub(1) as u32);
    if k_top == 0 {
        return Ok(());
    }
    // Largest feasible order cap under the work budget.
    let k_feasible = (1..=k_top)
        .take_while(|&k| envelope.sweep_work(alphabet, n, k).is_some())
        .last();
    let Some(k_run) = k_feasible else {
        // Nothing fits the envelope: pin the analytic k = 1 cell at least.
        if alphabet == Alphabet::BINARY
            && table.get(alphabet, n, 1).map(|c| !c.is_exact()).unwrap_or(true)
        {
            table.insert(alphabet, n, 1, CellValue::exact(complexity_k1_binary(n)));
        }
        return Ok(());
    };
    let missing = (1..=k_run).any(|k| {
        table
            .get(alphabet, n, k)
            .map(|c| !c.is_exact())
            .unwrap_or(true)
    });
    if !missing {
        return Ok(());
    }
    let values = complexity_sweep(alphabet, n, k_run, envelope)?;
    for (i, bits) in values.iter().enumerate() {
        table.insert(alphabet, n, i as u32 + 1, CellValue::exact(*bits));
    }
    Ok(())
}

/// Complexity with bracket semantics.
///
/// Returns the exact value when one is available (closed form `k >= n`, a
/// cached exact cell, or the analytic binary `k = 1` formula); otherwise a
/// guaranteed bracket assembled from monotonicity in `k` and `n`, the
/// uniform parameter-counting bound, and subadditive covers by cached exact
/// cells. Purely a table read: the computation policy lives in
/// [`ensure_cells`].
pub fn complexity(
    table: &ComplexityTable,
    alphabet: Alphabet,
    n: usize,
    k: u32,
    _band: u32,
) -> CellValue {
    if k as usize >= n {
        return CellValue::exact(n as f64 * alphabet.log2_size());
    }
    if let Some(cell) = table.get(alphabet, n, k) {
        if cell.is_exact() {
            return *cell;
        }
    }
    if k == 1 && alphabet == Alphabet::BINARY {
        return CellValue::exact(complexity_k1_binary(n));
    }
    let mut lo = table.monotone_lower(alphabet, n, k).unwrap_or(0.0);
    if alphabet == Alphabet::BINARY {
        lo = lo.max(complexity_k1_binary(n));
    }
    let mut hi = complexity_upper_bound(n, k, alphabet);
    if let Some(sub) = table.subadditive_upper(alphabet, n, k) {
        hi = hi.min(sub);
    }
    let lo = lo.min(hi);
    CellValue {
        lo,
        hi,
        mode: CellMode::Bracket,
    }
}

/// A normalized-maximum-likelihood value; `lo == hi` when the normalizer
/// cell is exact.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NmlValue {
    pub lo: LogProb,
    pub hi: LogProb,
    pub exact: bool,
}

impl NmlValue {
    pub fn point(&self) -> Option<LogProb> {
        if self.exact {
            Some(self.lo)
        } else {
            None
        }
    }
}

/// `log2 NML(x|k) = log2 ML(x|k) - C(n|k)`, with brackets propagated from
/// the complexity cell.
pub fn log_nml(x: &SymbolString, k: u32, table: &ComplexityTable, band: u32) -> Result<NmlValue> {
    if k == 0 {
        return Err(Error::InvalidInput("order k must be positive".into()));
    }
    let ml = ml_value_seeded(x.as_slice(), x.alphabet().size(), k, None);
    let cell = complexity(table, x.alphabet(), x.len(), k, band);
    Ok(NmlValue {
        lo: LogProb::from_log2((ml - cell.hi).min(0.0))?,
        hi: LogProb::from_log2((ml - cell.lo).min(0.0))?,
        exact: cell.is_exact(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn warm(n_max: usize, band: u32) -> ComplexityTable {
        let mut t = ComplexityTable::new();
        let env = ExactEnvelope::default();
        for n in 1..=n_max {
            ensure_cells(&mut t, Alphabet::BINARY, n, band, &env).unwrap();
        }
        t
    }

    fn bin(text: &str) -> SymbolString {
        SymbolString::parse(text, Alphabet::BINARY).unwrap()
    }

    #[test]
    fn single_symbol_complexity_is_log_alphabet() {
        let env = ExactEnvelope::default();
        for k in 1..=4 {
            let c = statistical_complexity_exact(Alphabet::BINARY, 1, k, &env).unwrap();
            assert_eq!(c, 1.0);
        }
        let c3 = statistical_complexity_exact(Alphabet::TERNARY, 1, 2, &env).unwrap();
        assert!((c3 - 3.0f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn saturated_orders_have_full_complexity() {
        let env = ExactEnvelope::default();
        for n in [2usize, 5, 9] {
            for k in [n as u32, n as u32 + 4] {
                let c = statistical_complexity_exact(Alphabet::BINARY, n, k, &env).unwrap();
                assert_eq!(c, n as f64);
            }
        }
    }

    #[test]
    fn binary_n2_k1_is_log_two_point_five() {
        // Strings 00 and 11 have ML 1; 01 and 10 have ML 1/4.
        let env = ExactEnvelope::default();
        let c = statistical_complexity_exact(Alphabet::BINARY, 2, 1, &env).unwrap();
        assert!((c - 2.5f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn analytic_k1_matches_sweep() {
        let env = ExactEnvelope::default();
        for n in 1..=12usize {
            let swept = statistical_complexity_exact(Alphabet::BINARY, n, 1, &env).unwrap();
            let analytic = complexity_k1_binary(n);
            assert!((swept - analytic).abs() < 1e-9, "n={n}: {swept} vs {analytic}");
        }
    }

    #[test]
    fn envelope_refusal_points_to_brackets() {
        let env = ExactEnvelope::default();
        let err = statistical_complexity_exact(Alphabet::BINARY, 30, 2, &env).unwrap_err();
        assert_eq!(err.category(), "envelope");
        assert!(err.to_string().contains("bracket"));
    }

    #[test]
    fn upper_bound_instances_and_dominance() {
        // k=1, n=2, binary: min(2, 3 log2 3) = 2.
        assert_eq!(complexity_upper_bound(2, 1, Alphabet::BINARY), 2.0);
        // n=1: dominated by log2 |X|.
        assert_eq!(complexity_upper_bound(1, 1, Alphabet::BINARY), 1.0);
        let env = ExactEnvelope::default();
        for n in 1..=9usize {
            for k in 1..=4u32 {
                let exact = statistical_complexity_exact(Alphabet::BINARY, n, k, &env).unwrap();
                let bound = complexity_upper_bound(n, k, Alphabet::BINARY);
                assert!(exact <= bound + 1e-9, "n={n} k={k}: {exact} > {bound}");
            }
        }
    }

    #[test]
    fn complexity_monotone_in_k() {
        let env = ExactEnvelope::default();
        for n in 2..=10usize {
            let values = complexity_sweep(Alphabet::BINARY, n, n as u32, &env).unwrap();
            for w in values.windows(2) {
                assert!(w[0] <= w[1] + 1e-12);
            }
            assert!(values[n - 1] <= n as f64 + 1e-12);
        }
    }

    #[test]
    fn sweep_is_reproducible_bit_for_bit() {
        let env = ExactEnvelope::default();
        let a = complexity_sweep(Alphabet::BINARY, 10, 6, &env).unwrap();
        let b = complexity_sweep(Alphabet::BINARY, 10, 6, &env).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nml_point_values_for_n2() {
        let t = warm(4, 4);
        let v01 = log_nml(&bin("01"), 1, &t, 4).unwrap();
        assert!(v01.exact);
        assert!((v01.lo.log2() - 0.1f64.log2()).abs() < 1e-12);
        let v00 = log_nml(&bin("00"), 1, &t, 4).unwrap();
        assert!((v00.lo.log2() - 0.4f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn nml_uniform_at_saturated_orders() {
        let t = ComplexityTable::new();
        for text in ["01", "0011", "110"] {
            let x = bin(text);
            let v = log_nml(&x, x.len() as u32 + 1, &t, 1).unwrap();
            assert!(v.exact);
            assert_eq!(v.lo.log2(), -(x.len() as f64));
        }
    }

    #[test]
    fn nml_sums_to_one_on_exact_cells() {
        let t = warm(6, 6);
        for n in 1..=6usize {
            for k in 1..=3u32 {
                let mut total = 0.0;
                for bits in 0..(1u32 << n) {
                    let symbols: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                    let x = SymbolString::new(symbols, Alphabet::BINARY).unwrap();
                    let v = log_nml(&x, k, &t, 6).unwrap();
                    assert!(v.exact);
                    total += v.lo.prob();
                }
                assert!((total - 1.0).abs() < 1e-9, "n={n} k={k}: {total}");
            }
        }
    }

    #[test]
    fn brackets_contain_exact_values() {
        let env = ExactEnvelope::default();
        // Warm only a low band, bracket the rest, then compare against a
        // fully exact sweep.
        for n in 4..=10usize {
            let mut t = ComplexityTable::new();
            ensure_cells(&mut t, Alphabet::BINARY, n, 2, &env).unwrap();
            // Also give the subadditive cover something to work with.
            ensure_cells(&mut t, Alphabet::BINARY, n / 2, (n / 2) as u32, &env).unwrap();
            let exact = complexity_sweep(Alphabet::BINARY, n, n as u32 - 1, &env).unwrap();
            for k in 3..n as u32 {
                let cell = complexity(&t, Alphabet::BINARY, n, k, 2);
                let truth = exact[k as usize - 1];
                assert!(cell.mode == CellMode::Bracket);
                assert!(
                    cell.lo <= truth + 1e-9 && truth <= cell.hi + 1e-9,
                    "n={n} k={k}: {truth} outside [{}, {}]",
                    cell.lo,
                    cell.hi
                );
            }
        }
    }

    #[test]
    fn bracket_uses_monotone_and_subadditive_information() {
        let env = ExactEnvelope::default();
        let mut t = ComplexityTable::new();
        ensure_cells(&mut t, Alphabet::BINARY, 8, 7, &env).unwrap();
        let cell = complexity(&t, Alphabet::BINARY, 16, 3, 7);
        assert_eq!(cell.mode, CellMode::Bracket);
        // Lower bound at least the cached C(8|3); upper at most 2 C(8|3).
        let c83 = t.get(Alphabet::BINARY, 8, 3).unwrap().lo;
        assert!(cell.lo >= c83 - 1e-12);
        assert!(cell.hi <= 2.0 * c83 + 1e-12);
        assert!(cell.hi <= 16.0);
    }

    #[test]
    fn ensure_cells_out_of_envelope_pins_analytic_k1() {
        let env = ExactEnvelope::default();
        let mut t = ComplexityTable::new();
        ensure_cells(&mut t, Alphabet::BINARY, 40, 3, &env).unwrap();
        let c = t.get(Alphabet::BINARY, 40, 1).unwrap();
        assert!(c.is_exact());
        assert!((c.lo - complexity_k1_binary(40)).abs() < 1e-12);
        assert!(t.get(Alphabet::BINARY, 40, 2).is_none());
    }
}
