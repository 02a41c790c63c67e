//! Unifilar hidden Markov models over a finite alphabet.
//!
//! A model is a tuple `(k, pi, tau, epsilon)`: `k` hidden states, an initial
//! state distribution `pi`, a deterministic transition table
//! `tau: state x symbol -> state`, and an emission matrix `epsilon`. The next
//! hidden state is a function of the previous state and the emitted symbol,
//! so the state path is fully determined by the start state and the string.
//! That collapses marginalization over hidden paths to a sum over start
//! states, which is what makes the exact computations in the rest of the
//! crate feasible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::logprob::{log2_sum, LogProb};

/// Probability-vector slack for model validation.
const PROB_TOL: f64 = 1e-12;

/// A finite emission alphabet; symbols are `0..size-1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet(u32);

impl Alphabet {
    pub fn new(size: u32) -> Result<Alphabet> {
        if size < 2 {
            return Err(Error::InvalidInput(format!(
                "alphabet size must be at least 2, got {size}"
            )));
        }
        Ok(Alphabet(size))
    }

    /// The binary alphabet `{0, 1}`.
    pub const BINARY: Alphabet = Alphabet(2);
    /// The ternary alphabet `{0, 1, 2}` used by Oracle processes.
    pub const TERNARY: Alphabet = Alphabet(3);

    pub fn size(self) -> u32 {
        self.0
    }

    pub fn log2_size(self) -> f64 {
        (self.0 as f64).log2()
    }

    pub fn contains(self, symbol: u8) -> bool {
        (symbol as u32) < self.0
    }
}

/// A finite string of alphabet symbols, tagged with the alphabet it ranges
/// over (the normalizers downstream depend on the alphabet size, not just on
/// the symbols that happen to occur).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SymbolString {
    symbols: Vec<u8>,
    alphabet: Alphabet,
}

impl SymbolString {
    /// Builds a string after checking every symbol against `alphabet`.
    pub fn new(symbols: Vec<u8>, alphabet: Alphabet) -> Result<SymbolString> {
        if let Some(&bad) = symbols.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::InvalidInput(format!(
                "symbol {bad} outside alphabet of size {}",
                alphabet.size()
            )));
        }
        Ok(SymbolString { symbols, alphabet })
    }

    /// Builds a string without validation; callers must guarantee range.
    pub(crate) fn from_raw(symbols: Vec<u8>, alphabet: Alphabet) -> SymbolString {
        SymbolString { symbols, alphabet }
    }

    /// Parses a text form like `"0110"` over the given alphabet.
    pub fn parse(text: &str, alphabet: Alphabet) -> Result<SymbolString> {
        let mut symbols = Vec::with_capacity(text.len());
        for ch in text.chars() {
            let d = ch
                .to_digit(10)
                .ok_or_else(|| Error::InvalidInput(format!("bad symbol character {ch:?}")))?;
            symbols.push(d as u8);
        }
        SymbolString::new(symbols, alphabet)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.symbols
    }

    /// The substring `[from, to)` as a new string over the same alphabet.
    pub fn slice(&self, from: usize, to: usize) -> Result<SymbolString> {
        if from > to || to > self.symbols.len() {
            return Err(Error::InvalidInput(format!(
                "slice [{from}, {to}) outside string of length {}",
                self.symbols.len()
            )));
        }
        Ok(SymbolString {
            symbols: self.symbols[from..to].to_vec(),
            alphabet: self.alphabet,
        })
    }

    /// Concatenation with another string over the same alphabet.
    pub fn concat(&self, other: &SymbolString) -> Result<SymbolString> {
        if self.alphabet != other.alphabet {
            return Err(Error::InvalidInput("alphabet mismatch in concat".into()));
        }
        let mut symbols = self.symbols.clone();
        symbols.extend_from_slice(&other.symbols);
        Ok(SymbolString {
            symbols,
            alphabet: self.alphabet,
        })
    }
}

/// A hidden-state path; states are 1-based like in the model definition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StatePath(pub Vec<u32>);

impl StatePath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }
}

/// A unifilar hidden Markov model `(k, pi, tau, epsilon)`.
///
/// `tau` and `epsilon` are stored row-major by state; `tau` entries are
/// 1-based state indices.
#[derive(Clone, Debug, PartialEq)]
pub struct UnifilarModel {
    alphabet: Alphabet,
    k: u32,
    pi: Vec<f64>,
    tau: Vec<u32>,
    epsilon: Vec<f64>,
}

impl UnifilarModel {
    pub fn new(
        alphabet: Alphabet,
        k: u32,
        pi: Vec<f64>,
        tau: Vec<u32>,
        epsilon: Vec<f64>,
    ) -> Result<UnifilarModel> {
        let a = alphabet.size() as usize;
        let ku = k as usize;
        if k == 0 {
            return Err(Error::InvalidModel("state count k must be positive".into()));
        }
        if pi.len() != ku {
            return Err(Error::InvalidModel(format!(
                "pi has length {}, expected k = {k}",
                pi.len()
            )));
        }
        if tau.len() != ku * a || epsilon.len() != ku * a {
            return Err(Error::InvalidModel(format!(
                "tau/epsilon must be k x |alphabet| = {k} x {a} tables"
            )));
        }
        if pi.iter().any(|&p| !(0.0..=1.0 + PROB_TOL).contains(&p)) {
            return Err(Error::InvalidModel("pi entries must lie in [0,1]".into()));
        }
        let pi_sum: f64 = pi.iter().sum();
        if (pi_sum - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidModel(format!(
                "pi sums to {pi_sum}, expected 1 within {PROB_TOL}"
            )));
        }
        for (y, row) in epsilon.chunks(a).enumerate() {
            if row.iter().any(|&p| !(0.0..=1.0 + PROB_TOL).contains(&p)) {
                return Err(Error::InvalidModel(format!(
                    "emission row {} has entries outside [0,1]",
                    y + 1
                )));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > PROB_TOL {
                return Err(Error::InvalidModel(format!(
                    "emission row {} sums to {s}, expected 1 within {PROB_TOL}",
                    y + 1
                )));
            }
        }
        if tau.iter().any(|&t| t == 0 || t > k) {
            return Err(Error::InvalidModel(format!(
                "tau entries must be states in 1..={k}"
            )));
        }
        Ok(UnifilarModel {
            alphabet,
            k,
            pi,
            tau,
            epsilon,
        })
    }

    /// Single-state IID model with the given emission distribution.
    pub fn iid(alphabet: Alphabet, emission: Vec<f64>) -> Result<UnifilarModel> {
        let a = alphabet.size() as usize;
        if emission.len() != a {
            return Err(Error::InvalidModel("emission length mismatch".into()));
        }
        UnifilarModel::new(alphabet, 1, vec![1.0], vec![1; a], emission)
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn state_count(&self) -> u32 {
        self.k
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn tau_table(&self) -> &[u32] {
        &self.tau
    }

    pub fn epsilon_table(&self) -> &[f64] {
        &self.epsilon
    }

    /// Next state after emitting `symbol` from `state` (both 1-based state).
    pub fn tau(&self, state: u32, symbol: u8) -> u32 {
        self.tau[(state as usize - 1) * self.alphabet.size() as usize + symbol as usize]
    }

    /// Emission probability of `symbol` in `state`.
    pub fn epsilon(&self, state: u32, symbol: u8) -> f64 {
        self.epsilon[(state as usize - 1) * self.alphabet.size() as usize + symbol as usize]
    }

    fn check_string(&self, x: &SymbolString) -> Result<()> {
        if x.alphabet() != self.alphabet {
            return Err(Error::InvalidInput(format!(
                "string alphabet size {} does not match model alphabet size {}",
                x.alphabet().size(),
                self.alphabet.size()
            )));
        }
        Ok(())
    }

    fn check_state(&self, y: u32) -> Result<()> {
        if y == 0 || y > self.k {
            return Err(Error::InvalidInput(format!(
                "state {y} outside 1..={}",
                self.k
            )));
        }
        Ok(())
    }

    /// Joint probability of a string and a state path:
    /// `pi(y1) eps(x1|y1) prod_i 1[y_i = tau(y_{i-1}, x_{i-1})] eps(x_i|y_i)`.
    ///
    /// A path that violates `tau` at any step has probability zero.
    pub fn joint_log_prob(&self, x: &SymbolString, y: &StatePath) -> Result<LogProb> {
        self.check_string(x)?;
        if x.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "string length {} != path length {}",
                x.len(),
                y.len()
            )));
        }
        if x.is_empty() {
            return Err(Error::InvalidInput(
                "joint probability needs length >= 1".into(),
            ));
        }
        for &s in y.as_slice() {
            self.check_state(s)?;
        }
        let xs = x.as_slice();
        let ys = y.as_slice();
        let mut log = self.pi[ys[0] as usize - 1].log2() + self.epsilon(ys[0], xs[0]).log2();
        for i in 1..xs.len() {
            if ys[i] != self.tau(ys[i - 1], xs[i - 1]) {
                return Ok(LogProb::ZERO);
            }
            log += self.epsilon(ys[i], xs[i]).log2();
        }
        LogProb::from_log2(log).or(Ok(LogProb::ZERO))
    }

    /// Conditional probability of `x` given the start state `y1`.
    ///
    /// Unifilarity collapses the sum over hidden paths to the single path
    /// driven by `tau`, so this is just the product of emissions along it.
    pub fn conditional_log_prob(&self, x: &SymbolString, y1: u32) -> Result<LogProb> {
        self.check_string(x)?;
        self.check_state(y1)?;
        let mut state = y1;
        let mut log = 0.0;
        for &sym in x.as_slice() {
            log += self.epsilon(state, sym).log2();
            state = self.tau(state, sym);
        }
        if log == f64::NEG_INFINITY || log.is_nan() {
            // NaN arises from -inf + finite ordering; both mean a zero factor.
            return Ok(LogProb::ZERO);
        }
        LogProb::from_log2(log)
    }

    /// The state reached after consuming `x` from `y1`.
    pub fn follow(&self, x: &SymbolString, y1: u32) -> Result<u32> {
        self.check_string(x)?;
        self.check_state(y1)?;
        let mut state = y1;
        for &sym in x.as_slice() {
            state = self.tau(state, sym);
        }
        Ok(state)
    }

    /// Marginal probability of `x`: log-sum-exp over start states weighted
    /// by `pi`.
    pub fn marginal_log_prob(&self, x: &SymbolString) -> Result<LogProb> {
        self.check_string(x)?;
        if x.is_empty() {
            return Ok(LogProb::ONE);
        }
        let mut terms = Vec::with_capacity(self.k as usize);
        for y1 in 1..=self.k {
            let w = self.pi[y1 as usize - 1];
            if w <= 0.0 {
                continue;
            }
            let cond = self.conditional_log_prob(x, y1)?;
            if !cond.is_zero() {
                terms.push(w.log2() + cond.log2());
            }
        }
        if terms.is_empty() {
            return Ok(LogProb::ZERO);
        }
        LogProb::from_log2(log2_sum(&terms))
    }

    /// Row-major transition matrix of the induced state chain
    /// `P(y' | y) = sum_x eps(x|y) 1[y' = tau(y, x)]`, as a sparse edge list
    /// per state.
    pub fn induced_chain(&self) -> Vec<Vec<(u32, f64)>> {
        let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); self.k as usize];
        for y in 1..=self.k {
            let row = &mut rows[y as usize - 1];
            for sym in 0..self.alphabet.size() as u8 {
                let p = self.epsilon(y, sym);
                if p <= 0.0 {
                    continue;
                }
                let to = self.tau(y, sym);
                match row.iter_mut().find(|(t, _)| *t == to) {
                    Some((_, q)) => *q += p,
                    None => row.push((to, p)),
                }
            }
            row.sort_by_key(|&(t, _)| t);
        }
        rows
    }

    /// Stationary distribution of the induced state chain.
    ///
    /// The chain must have a unique recurrent class; transient states get
    /// mass zero. Errors out, naming the failing structure, when several
    /// closed classes coexist.
    pub fn stationary_pi(&self, tol: f64) -> Result<Vec<f64>> {
        if !(tol > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        let chain = self.induced_chain();
        let classes = bottom_classes(&chain);
        if classes.len() != 1 {
            let mut desc: Vec<String> = classes
                .iter()
                .map(|c| {
                    let mut sample: Vec<u32> = c.iter().take(4).map(|&s| s as u32 + 1).collect();
                    sample.sort_unstable();
                    format!("class of {} state(s) containing {:?}", c.len(), sample)
                })
                .collect();
            desc.sort();
            return Err(Error::NonUniqueStationary(format!(
                "{} closed communicating classes: {}",
                classes.len(),
                desc.join("; ")
            )));
        }
        let class = &classes[0];
        let mut pi = vec![0.0; self.k as usize];
        if class.len() == 1 {
            pi[class[0]] = 1.0;
            return Ok(pi);
        }
        let dist = stationary_on_class(&chain, class, tol)?;
        for (&s, &p) in class.iter().zip(dist.iter()) {
            pi[s] = p;
        }
        Ok(pi)
    }

    /// Returns a copy of this model whose initial distribution is the
    /// stationary one, so sampled finite-dimensional laws are stationary.
    pub fn stationarized(&self, tol: f64) -> Result<UnifilarModel> {
        let pi = self.stationary_pi(tol)?;
        UnifilarModel::new(
            self.alphabet,
            self.k,
            pi,
            self.tau.clone(),
            self.epsilon.clone(),
        )
    }

    /// Samples a length-`n` realization together with its state path.
    /// Deterministic given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> (SymbolString, StatePath) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut symbols = Vec::with_capacity(n);
        let mut states = Vec::with_capacity(n);
        if n == 0 {
            return (SymbolString::from_raw(symbols, self.alphabet), StatePath(states));
        }
        let mut state = sample_index(&mut rng, &self.pi) as u32 + 1;
        for _ in 0..n {
            states.push(state);
            let a = self.alphabet.size() as usize;
            let row = &self.epsilon[(state as usize - 1) * a..(state as usize) * a];
            let sym = sample_index(&mut rng, row) as u8;
            symbols.push(sym);
            state = self.tau(state, sym);
        }
        (SymbolString::from_raw(symbols, self.alphabet), StatePath(states))
    }
}

/// Draws an index from a weight vector via inverse CDF on one uniform draw.
fn sample_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let u: f64 = rng.gen::<f64>();
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // Round-off can leave acc slightly below 1; land on the last positive weight.
    weights
        .iter()
        .rposition(|&w| w > 0.0)
        .expect("weight vector has positive mass")
}

/// Closed communicating classes (bottom SCCs) of a sparse chain given as
/// per-state positive-probability edge lists. Kosaraju on the support graph.
fn bottom_classes(chain: &[Vec<(u32, f64)>]) -> Vec<Vec<usize>> {
    let n = chain.len();
    // First pass: DFS finish order.
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // Iterative DFS with an explicit edge cursor.
        let mut stack = vec![(start, 0usize)];
        seen[start] = true;
        while let Some(&mut (v, ref mut cursor)) = stack.last_mut() {
            if *cursor < chain[v].len() {
                let to = chain[v][*cursor].0 as usize - 1;
                *cursor += 1;
                if !seen[to] {
                    seen[to] = true;
                    stack.push((to, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    // Reverse graph.
    let mut rev: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (v, row) in chain.iter().enumerate() {
        for &(to, _) in row {
            rev[to as usize - 1].push(v);
        }
    }
    // Second pass over reversed finish order gives SCCs.
    let mut comp = vec![usize::MAX; n];
    let mut ncomp = 0;
    for &start in order.iter().rev() {
        if comp[start] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        comp[start] = ncomp;
        while let Some(v) = stack.pop() {
            for &to in &rev[v] {
                if comp[to] == usize::MAX {
                    comp[to] = ncomp;
                    stack.push(to);
                }
            }
        }
        ncomp += 1;
    }
    // A class is closed iff no edge leaves it.
    let mut closed = vec![true; ncomp];
    for (v, row) in chain.iter().enumerate() {
        for &(to, _) in row {
            if comp[to as usize - 1] != comp[v] {
                closed[comp[v]] = false;
            }
        }
    }
    let mut classes: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for v in 0..n {
        classes[comp[v]].push(v);
    }
    classes
        .into_iter()
        .enumerate()
        .filter(|(c, _)| closed[*c])
        .map(|(_, members)| members)
        .collect()
}

/// Stationary distribution restricted to one closed class.
///
/// Small classes get a direct linear solve; large ones a damped power
/// iteration (the damping leaves the fixed point unchanged and removes
/// periodicity obstructions).
fn stationary_on_class(chain: &[Vec<(u32, f64)>], class: &[usize], tol: f64) -> Result<Vec<f64>> {
    let m = class.len();
    let index: std::collections::HashMap<usize, usize> =
        class.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    // Local sparse rows.
    let rows: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&s| {
            chain[s]
                .iter()
                .map(|&(to, p)| (index[&(to as usize - 1)], p))
                .collect()
        })
        .collect();
    if m <= 256 {
        return dense_stationary(&rows, m, tol);
    }
    // pi <- 0.5 pi + 0.5 pi T until the L1 residual of the undamped map is small.
    let mut pi = vec![1.0 / m as f64; m];
    let mut next = vec![0.0; m];
    for _ in 0..200_000 {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, row) in rows.iter().enumerate() {
            let mass = pi[i];
            for &(j, p) in row {
                next[j] += mass * p;
            }
        }
        let resid: f64 = next.iter().zip(pi.iter()).map(|(a, b)| (a - b).abs()).sum();
        for (p, n) in pi.iter_mut().zip(next.iter()) {
            *p = 0.5 * *p + 0.5 * n;
        }
        if resid <= tol {
            let total: f64 = pi.iter().sum();
            pi.iter_mut().for_each(|v| *v /= total);
            return Ok(pi);
        }
    }
    Err(Error::Convergence(format!(
        "stationary iteration on {m} states did not reach tolerance {tol}"
    )))
}

/// Gaussian elimination on `(T^t - I) pi = 0` with one row replaced by the
/// normalization constraint.
fn dense_stationary(rows: &[Vec<(usize, f64)>], m: usize, tol: f64) -> Result<Vec<f64>> {
    let mut a = vec![0.0; m * m];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            a[j * m + i] += p; // transpose
        }
    }
    for d in 0..m {
        a[d * m + d] -= 1.0;
    }
    let mut b = vec![0.0; m];
    // Replace the last equation by sum(pi) = 1.
    for j in 0..m {
        a[(m - 1) * m + j] = 1.0;
    }
    b[m - 1] = 1.0;

    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&r1, &r2| {
                a[r1 * m + col]
                    .abs()
                    .partial_cmp(&a[r2 * m + col].abs())
                    .unwrap()
            })
            .unwrap();
        if a[pivot * m + col].abs() < 1e-14 {
            return Err(Error::Convergence(
                "singular balance system for stationary distribution".into(),
            ));
        }
        if pivot != col {
            for j in 0..m {
                a.swap(col * m + j, pivot * m + j);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * m + col];
        for r in col + 1..m {
            let f = a[r * m + col] / diag;
            if f == 0.0 {
                continue;
            }
            for j in col..m {
                a[r * m + j] -= f * a[col * m + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut pi = vec![0.0; m];
    for col in (0..m).rev() {
        let mut v = b[col];
        for j in col + 1..m {
            v -= a[col * m + j] * pi[j];
        }
        pi[col] = v / a[col * m + col];
    }
    // Clean tiny negatives from elimination round-off and renormalize.
    for v in pi.iter_mut() {
        if *v < 0.0 && *v > -1e-12 {
            *v = 0.0;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|v| *v /= total);
    // Verify the fixed point.
    let mut resid = 0.0;
    let mut out = vec![0.0; m];
    for (i, row) in rows.iter().enumerate() {
        for &(j, p) in row {
            out[j] += pi[i] * p;
        }
    }
    for i in 0..m {
        resid += (out[i] - pi[i]).abs();
    }
    if resid > tol.max(1e-10) {
        return Err(Error::Convergence(format!(
            "stationary solve residual {resid} above tolerance"
        )));
    }
    Ok(pi)
}
