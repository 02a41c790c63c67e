//! Oracle and Santa Fe processes, and the facts/words statistics.
//!
//! The Oracle(theta) process over `{0, 1, 2}` repeatedly emits a random
//! binary word `y` (each bit with probability `theta/2`, termination with
//! probability `1 - theta`), a separator `2`, and then the oracle bit
//! `z_{phi(y)}`, where `phi` maps words to natural numbers by prepending a
//! leading 1 to the binary expansion. Its hidden-state space is the
//! countable set `{a, b} x {0,1}*`; word lengths are geometric, and the
//! stationary masses and entropy rate have closed forms.
//!
//! The "algorithmically random" oracle is necessarily a stand-in here:
//! either a seeded counter-mode generator with random access or a
//! user-supplied bit file. Everything measured at desk scale depends only
//! on incompressibility at the scale probed.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Alphabet, SymbolString, UnifilarModel};

/// Longest representable word; `phi` must fit in a `u64`.
const MAX_WORD_BITS: usize = 63;

/// The word encoding: binary expansion of `k` stripped of its leading 1.
/// `psi(1)` is the empty word, `psi(2) = 0`, `psi(3) = 1`, `psi(4) = 00`.
pub fn psi(k: u64) -> Result<Vec<u8>> {
    if k == 0 {
        return Err(Error::InvalidInput("psi is defined for k >= 1".into()));
    }
    let top = 63 - k.leading_zeros();
    let mut word = Vec::with_capacity(top as usize);
    for i in (0..top).rev() {
        word.push(((k >> i) & 1) as u8);
    }
    Ok(word)
}

/// Inverse of [`psi`]: the number whose stripped binary expansion is `word`.
pub fn phi(word: &[u8]) -> Result<u64> {
    if word.len() > MAX_WORD_BITS {
        return Err(Error::InvalidInput(format!(
            "word of {} bits exceeds the {MAX_WORD_BITS}-bit index range",
            word.len()
        )));
    }
    let mut k = 1u64;
    for &b in word {
        if b > 1 {
            return Err(Error::InvalidInput(format!(
                "word symbol {b} is not a bit"
            )));
        }
        k = (k << 1) | b as u64;
    }
    Ok(k)
}

/// SplitMix64 output at stream position `index` for a given seed.
pub(crate) fn splitmix64_at(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random-access provider of the oracle bits `z_1, z_2, ...`.
#[derive(Clone, Debug)]
pub enum OracleSource {
    /// Counter-mode pseudo-random bits; infinite and O(1) per access.
    Seeded { seed: u64 },
    /// Bits loaded from a user file; finite.
    File { bits: Arc<Vec<u8>> },
}

impl OracleSource {
    pub fn seeded(seed: u64) -> OracleSource {
        OracleSource::Seeded { seed }
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<OracleSource> {
        if bits.is_empty() {
            return Err(Error::InvalidInput("oracle bit file is empty".into()));
        }
        if let Some(&bad) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidInput(format!(
                "oracle file contains non-bit value {bad}"
            )));
        }
        Ok(OracleSource::File {
            bits: Arc::new(bits),
        })
    }

    /// The bit `z_k`, 1-based.
    pub fn bit(&self, k: u64) -> Result<u8> {
        if k == 0 {
            return Err(Error::InvalidInput("oracle index is 1-based".into()));
        }
        match self {
            OracleSource::Seeded { seed } => Ok((splitmix64_at(*seed, k) >> 63) as u8),
            OracleSource::File { bits } => bits
                .get(k as usize - 1)
                .copied()
                .ok_or_else(|| Error::OracleIndex(format!("index {k} > file length {}", bits.len()))),
        }
    }
}

/// Parameters of an Oracle(theta) process.
#[derive(Clone, Debug)]
pub struct OracleConfig {
    pub theta: f64,
    pub source: OracleSource,
}

impl OracleConfig {
    pub fn new(theta: f64, source: OracleSource) -> Result<OracleConfig> {
        check_theta(theta)?;
        Ok(OracleConfig { theta, source })
    }
}

/// Both endpoints of `[0, 1]` degenerate (theta = 1 has no normalizable
/// stationary distribution, theta = 0 freezes the word), so the open
/// interval is required.
fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::InvalidInput(format!(
            "theta must lie strictly inside (0, 1), got {theta}"
        )));
    }
    Ok(())
}

/// A hidden state of the Oracle process: phase `a` (building a word) or
/// phase `b` (about to reveal the oracle bit), each over the current word.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleState {
    A(Vec<u8>),
    B(Vec<u8>),
}

/// Stationary mass of one hidden state:
/// `pi(a y) = pi(a) (theta/2)^{|y|}`, `pi(b y) = (1-theta) pi(a y)`,
/// `pi(a) = (1-theta)/(2-theta)`.
pub fn oracle_stationary_pi(theta: f64, state: &OracleState) -> Result<f64> {
    check_theta(theta)?;
    let (word, b_phase) = match state {
        OracleState::A(w) => (w, false),
        OracleState::B(w) => (w, true),
    };
    if word.iter().any(|&b| b > 1) {
        return Err(Error::InvalidInput("oracle state word must be binary".into()));
    }
    let pa = (1.0 - theta) / (2.0 - theta);
    let mass = pa * (theta / 2.0).powi(word.len() as i32);
    Ok(if b_phase { (1.0 - theta) * mass } else { mass })
}

/// Total stationary mass over all states with words up to `depth` bits,
/// summed level by level (geometric in the level).
pub fn oracle_stationary_mass(theta: f64, depth: usize) -> Result<f64> {
    check_theta(theta)?;
    let pa = (1.0 - theta) / (2.0 - theta);
    let mut total = 0.0;
    for level in 0..=depth {
        let words = 2f64.powi(level as i32);
        let a_mass = pa * (theta / 2.0).powi(level as i32);
        total += words * (a_mass + (1.0 - theta) * a_mass);
    }
    Ok(total)
}

/// Closed-form hidden-state entropy `H(Y)` in bits, obtained by summing
/// `-pi log2 pi` over levels with `sum_l theta^l = 1/(1-theta)` and
/// `sum_l l theta^l = theta/(1-theta)^2`:
/// `log2((2-theta)/(1-theta)) + theta/(1-theta) log2(2/theta)
///  - (1-theta)/(2-theta) log2(1-theta)`.
/// Finite for every theta in (0, 1); agrees with the truncated direct
/// summation (see [`oracle_state_entropy_series`]).
pub fn oracle_state_entropy(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok(((2.0 - theta) / (1.0 - theta)).log2()
        + theta / (1.0 - theta) * (2.0 / theta).log2()
        - (1.0 - theta) / (2.0 - theta) * (1.0 - theta).log2())
}

/// Direct truncated evaluation of `H(Y) = -sum pi(y) log2 pi(y)` over words
/// up to `depth` bits; an independent route to the closed form.
pub fn oracle_state_entropy_series(theta: f64, depth: usize) -> Result<f64> {
    check_theta(theta)?;
    let pa = (1.0 - theta) / (2.0 - theta);
    let mut total = 0.0;
    for level in 0..=depth {
        let words = 2f64.powi(level as i32);
        let a_mass = pa * (theta / 2.0).powi(level as i32);
        let b_mass = (1.0 - theta) * a_mass;
        total -= words * (a_mass * a_mass.log2() + b_mass * b_mass.log2());
    }
    Ok(total)
}

/// Binary entropy in bits with the `0 log 0 = 0` convention.
pub fn binary_entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.log2();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).log2();
    }
    h
}

/// Closed-form entropy rate `(h(theta) + theta) / (2 - theta)` in bits per
/// symbol.
pub fn oracle_entropy_rate(theta: f64) -> Result<f64> {
    check_theta(theta)?;
    Ok((binary_entropy(theta) + theta) / (2.0 - theta))
}

/// Truncated direct evaluation of the unifilar entropy-rate formula
/// `sum_y pi(y) H(eps(.|y))` over words up to `depth` bits. Phase-b states
/// emit deterministically and contribute nothing.
pub fn oracle_entropy_rate_series(theta: f64, depth: usize) -> Result<f64> {
    check_theta(theta)?;
    let pa = (1.0 - theta) / (2.0 - theta);
    // Emission entropy of any a-state: two symbols at theta/2, one at 1-theta.
    let half = theta / 2.0;
    let mut row_entropy = -(1.0 - theta) * (1.0 - theta).log2();
    row_entropy -= 2.0 * half * half.log2();
    let mut total = 0.0;
    for level in 0..=depth {
        let words = 2f64.powi(level as i32);
        total += words * pa * (theta / 2.0).powi(level as i32) * row_entropy;
    }
    Ok(total)
}

/// Samples `n` symbols of the stationary Oracle(theta) process; the start
/// state is drawn from the stationary distribution. Deterministic given the
/// seed. Also returns the accumulated emission log-probability of the
/// realized path, `log2 P(x | y_1)`, for code-length cross-checks.
pub fn oracle_sample_with_log2(
    cfg: &OracleConfig,
    n: usize,
    seed: u64,
) -> Result<(SymbolString, f64)> {
    check_theta(cfg.theta)?;
    let theta = cfg.theta;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut log2_path = 0.0;

    // Stationary start: phase a carries total mass 1/(2-theta); word length
    // is geometric with ratio theta; bits are uniform.
    let mut word: Vec<u8> = Vec::new();
    let u_phase: f64 = rng.gen();
    let in_b = u_phase >= 1.0 / (2.0 - theta);
    let u_len: f64 = rng.gen();
    let mut acc = 1.0 - theta;
    let mut len = 0usize;
    while u_len >= acc && len < MAX_WORD_BITS {
        len += 1;
        acc += (1.0 - theta) * theta.powi(len as i32);
    }
    for _ in 0..len {
        word.push(rng.gen_range(0..2u8));
    }
    let mut phase_b = in_b;

    let log_half = (theta / 2.0).log2();
    let log_stop = (1.0 - theta).log2();
    for _ in 0..n {
        if phase_b {
            let k = phi(&word)?;
            let z = cfg.source.bit(k)?;
            out.push(z);
            // The oracle bit is emitted surely: zero cost.
            word.clear();
            phase_b = false;
        } else {
            let u: f64 = rng.gen();
            if u < theta / 2.0 {
                out.push(0);
                word.push(0);
                log2_path += log_half;
            } else if u < theta {
                out.push(1);
                word.push(1);
                log2_path += log_half;
            } else {
                out.push(2);
                phase_b = true;
                log2_path += log_stop;
            }
            if word.len() > MAX_WORD_BITS {
                return Err(Error::InvalidInput(format!(
                    "sampled word exceeded {MAX_WORD_BITS} bits; theta too close to 1"
                )));
            }
        }
    }
    Ok((SymbolString::from_raw(out, Alphabet::TERNARY), log2_path))
}

/// Samples `n` symbols of the stationary Oracle(theta) process.
pub fn oracle_sample(cfg: &OracleConfig, n: usize, seed: u64) -> Result<SymbolString> {
    Ok(oracle_sample_with_log2(cfg, n, seed)?.0)
}

/// Materializes the Oracle process with words capped at `depth` bits as a
/// finite [`UnifilarModel`]: depth-`depth` a-states emit the separator
/// surely. The capped chain's stationary distribution keeps the closed-form
/// shape with normalizer `2 - theta - theta^{depth+1}`, so the model is
/// built already stationary.
pub fn truncated_oracle_model(
    theta: f64,
    depth: usize,
    source: &OracleSource,
) -> Result<UnifilarModel> {
    check_theta(theta)?;
    if depth < 1 || depth > 12 {
        return Err(Error::InvalidInput(format!(
            "truncation depth {depth} outside the materializable range 1..=12"
        )));
    }
    let words_total: u32 = (1u32 << (depth + 1)) - 1; // all words with <= depth bits
    let k = 2 * words_total;
    let a = Alphabet::TERNARY;

    // Word index: level l, value v -> 2^l - 1 + v. a-states come first.
    let word_index = |level: usize, value: u32| -> u32 { (1u32 << level) - 1 + value };
    let a_id = |level: usize, value: u32| -> u32 { 1 + word_index(level, value) };
    let b_id = |level: usize, value: u32| -> u32 { 1 + words_total + word_index(level, value) };

    let mut pi = vec![0.0; k as usize];
    let mut tau = vec![1u32; k as usize * 3];
    let mut epsilon = vec![0.0; k as usize * 3];
    let pa = (1.0 - theta) / (2.0 - theta - theta.powi(depth as i32 + 1));

    for level in 0..=depth {
        for value in 0..(1u32 << level) {
            let aid = a_id(level, value);
            let bid = b_id(level, value);
            let arow = (aid as usize - 1) * 3;
            let brow = (bid as usize - 1) * 3;
            let a_mass = pa * (theta / 2.0).powi(level as i32);
            if level < depth {
                epsilon[arow] = theta / 2.0;
                epsilon[arow + 1] = theta / 2.0;
                epsilon[arow + 2] = 1.0 - theta;
                tau[arow] = a_id(level + 1, value << 1);
                tau[arow + 1] = a_id(level + 1, (value << 1) | 1);
                tau[arow + 2] = bid;
                pi[aid as usize - 1] = a_mass;
                pi[bid as usize - 1] = (1.0 - theta) * a_mass;
            } else {
                // Capped word: the separator is forced.
                epsilon[arow + 2] = 1.0;
                tau[arow] = aid;
                tau[arow + 1] = aid;
                tau[arow + 2] = bid;
                pi[aid as usize - 1] = a_mass;
                pi[bid as usize - 1] = a_mass;
            }
            // Phase b reveals the oracle bit for this word and resets.
            let word =ExplicitWord { level, value }.bits();
            let z = source.bit(phi(&word)?)?;
            epsilon[brow + z as usize] = 1.0;
            tau[brow] = 1;
            tau[brow + 1] = 1;
            tau[brow + 2] = 1;
        }
    }
    // Remove float dust from the mass normalization.
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    UnifilarModel::new(a, k, pi, tau, epsilon)
}

struct ExplicitWord {
    level: usize,
    value: u32,
}

impl ExplicitWord {
    fn bits(&self) -> Vec<u8> {
        (0..self.level)
            .rev()
            .map(|i| ((self.value >> i) & 1) as u8)
            .collect()
    }
}

/// The obvious predictor for encoded Santa Fe pairs: report the bit `b`
/// exactly when the pattern `2 ? psi(k) 2 b` occurs in `x` (`?` matches any
/// symbol) and the opposite pattern does not; otherwise abstain with 2.
pub fn predictor_g(k: u64, x: &SymbolString) -> Result<u8> {
    let word = psi(k)?;
    let zero = pattern_occurs(x.as_slice(), &word, 0);
    let one = pattern_occurs(x.as_slice(), &word, 1);
    Ok(match (zero, one) {
        (true, false) => 0,
        (false, true) => 1,
        _ => 2,
    })
}

/// Plain sliding-window search for `2 ? word 2 bit`.
fn pattern_occurs(xs: &[u8], word: &[u8], bit: u8) -> bool {
    let m = word.len() + 4;
    if xs.len() < m {
        return false;
    }
    'positions: for s in 0..=xs.len() - m {
        if xs[s] != 2 {
            continue;
        }
        for (j, &w) in word.iter().enumerate() {
            if xs[s + 2 + j] != w {
                continue 'positions;
            }
        }
        if xs[s + 2 + word.len()] == 2 && xs[s + 3 + word.len()] == bit {
            return true;
        }
    }
    false
}

/// Index of every `2 ? w 2 b` occurrence in `xs`: for each leading
/// separator, the enclosed word runs to the next separator (a word
/// containing a separator can never equal any `psi(k)`).
fn word_bit_index(xs: &[u8]) -> HashMap<(u8, u64), (bool, bool)> {
    let n = xs.len();
    let mut next_sep = vec![usize::MAX; n + 1];
    for i in (0..n).rev() {
        next_sep[i] = if xs[i] == 2 { i } else { next_sep[i + 1] };
    }
    let mut map: HashMap<(u8, u64), (bool, bool)> = HashMap::new();
    for i in 0..n {
        if xs[i] != 2 {
            continue;
        }
        let start = i + 2; // skip the wildcard position
        if start > n {
            break;
        }
        let close = next_sep[start.min(n)];
        if close == usize::MAX || close + 1 >= n {
            continue;
        }
        let len = close - start;
        if len > MAX_WORD_BITS {
            continue;
        }
        let b = xs[close + 1];
        if b > 1 {
            continue;
        }
        let mut bits = 0u64;
        let mut binary = true;
        for &s in &xs[start..close] {
            if s > 1 {
                binary = false;
                break;
            }
            bits = (bits << 1) | s as u64;
        }
        if !binary {
            continue;
        }
        let entry = map.entry((len as u8, bits)).or_insert((false, false));
        if b == 0 {
            entry.0 = true;
        } else {
            entry.1 = true;
        }
    }
    map
}

/// The facts counter: the smallest `k >= 1` whose oracle bit the predictor
/// gets wrong, `min { k : g(k, x) != z_k }`. Finite because the predictor
/// eventually abstains (2 never equals a bit).
pub fn facts_count(x: &SymbolString, source: &OracleSource) -> Result<u64> {
    let index = word_bit_index(x.as_slice());
    let mut k = 1u64;
    loop {
        let word = psi(k)?;
        let g = match index.get(&(word.len() as u8, phi(&word)? - (1 << word.len()))) {
            Some(&(true, false)) => 0,
            Some(&(false, true)) => 1,
            _ => 2,
        };
        if g != source.bit(k)? {
            return Ok(k);
        }
        k += 1;
    }
}

/// Block decomposition `W_0 2 Z_0 W_1 2 Z_1 ... + remainder` of a string.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedBlocks {
    /// Complete `(W_i, Z_i)` pairs in order; index 0 is the distinguished
    /// initial pair, whose word is a truncated suffix rather than a full
    /// sample from the word distribution.
    pub pairs: Vec<(Vec<u8>, u8)>,
    /// Trailing material with no complete `2 Z` group.
    pub remainder: Vec<u8>,
}

impl ParsedBlocks {
    /// The first word `W_0`, whether or not it completed a pair.
    pub fn w0(&self) -> &[u8] {
        if let Some((w, _)) = self.pairs.first() {
            w
        } else {
            let cut = self
                .remainder
                .iter()
                .position(|&s| s == 2)
                .unwrap_or(self.remainder.len());
            &self.remainder[..cut]
        }
    }

    /// Words `W_1, W_2, ...` (excluding the distinguished first word).
    pub fn words_after_first(&self) -> impl Iterator<Item = &[u8]> {
        self.pairs.iter().skip(1).map(|(w, _)| w.as_slice())
    }

    pub fn complete_pairs(&self) -> usize {
        self.pairs.len()
    }

    /// Exact reconstruction of the parsed string.
    pub fn reconstruct(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for (w, z) in &self.pairs {
            out.extend_from_slice(w);
            out.push(2);
            out.push(*z);
        }
        out.extend_from_slice(&self.remainder);
        out
    }

    /// Number of pairs whose revealed symbol is itself a separator; any
    /// positive count is evidence the string is not an Oracle realization.
    pub fn invalid_reveal_count(&self) -> usize {
        self.pairs.iter().filter(|(_, z)| *z == 2).count()
    }
}

/// Parses a string into blocks: each separator consumes the single symbol
/// after it as the revealed bit; runs in between are the words.
pub fn parse_blocks(x: &SymbolString) -> ParsedBlocks {
    let xs = x.as_slice();
    let n = xs.len();
    let mut pairs = Vec::new();
    let mut word_start = 0usize;
    let mut i = 0usize;
    while i < n {
        if xs[i] == 2 {
            if i + 1 < n {
                pairs.push((xs[word_start..i].to_vec(), xs[i + 1]));
                i += 2;
                word_start = i;
            } else {
                break; // dangling separator stays in the remainder
            }
        } else {
            i += 1;
        }
    }
    ParsedBlocks {
        pairs,
        remainder: xs[word_start..].to_vec(),
    }
}

/// `U`: the smallest `k` whose word `psi(k)` is absent from
/// `{W_1, ..., W_m}` (the distinguished `W_0` is excluded).
pub fn u_n_statistic(blocks: &ParsedBlocks) -> u64 {
    let words: HashSet<&[u8]> = blocks.words_after_first().collect();
    let mut k = 1u64;
    loop {
        let w = psi(k).expect("k >= 1");
        if !words.contains(w.as_slice()) {
            return k;
        }
        k += 1;
    }
}

/// `M`: `|W_0| + 2 + sum over distinct words y in {W_1..W_m} of (|y| + 2)`,
/// the hidden-state budget sufficient to reproduce the sample's words.
pub fn m_n_statistic(blocks: &ParsedBlocks) -> u64 {
    let words: HashSet<&[u8]> = blocks.words_after_first().collect();
    let mut total = blocks.w0().len() as u64 + 2;
    for w in words {
        total += w.len() as u64 + 2;
    }
    total
}

/// Parameters of a truncated Santa Fe process: IID Zipf(alpha) indices on
/// `1..=k_max` paired with the indexed oracle bits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SantaFeConfig {
    pub alpha: f64,
    pub k_max: u64,
    /// Optional ceiling on the documented truncation tail mass.
    pub max_tail_mass: Option<f64>,
}

impl SantaFeConfig {
    pub fn new(alpha: f64, k_max: u64, max_tail_mass: Option<f64>) -> Result<SantaFeConfig> {
        if !(alpha > 1.0) {
            return Err(Error::InvalidInput(format!(
                "Zipf exponent must exceed 1, got {alpha}"
            )));
        }
        if k_max == 0 || k_max > (1 << 24) {
            return Err(Error::InvalidInput(format!(
                "k_max {k_max} outside 1..=2^24"
            )));
        }
        let cfg = SantaFeConfig {
            alpha,
            k_max,
            max_tail_mass,
        };
        if let Some(cap) = max_tail_mass {
            let tail = cfg.tail_mass_bound();
            if tail > cap {
                return Err(Error::InvalidInput(format!(
                    "truncation tail bound {tail} exceeds configured cap {cap}"
                )));
            }
        }
        Ok(cfg)
    }

    fn weights(&self) -> Vec<f64> {
        (1..=self.k_max)
            .map(|k| (k as f64).powf(-self.alpha))
            .collect()
    }

    /// Truncated pmf `P(K = k)`.
    pub fn pmf(&self, k: u64) -> f64 {
        if k == 0 || k > self.k_max {
            return 0.0;
        }
        let z: f64 = self.weights().iter().sum();
        (k as f64).powf(-self.alpha) / z
    }

    /// Upper bound on the mass the truncation discards, relative to the
    /// truncated normalizer: `k_max^{1-alpha} / ((alpha-1) Z)`.
    pub fn tail_mass_bound(&self) -> f64 {
        let z: f64 = self.weights().iter().sum();
        (self.k_max as f64).powf(1.0 - self.alpha) / ((self.alpha - 1.0) * z)
    }
}

/// Samples `n` Santa Fe pairs `(K_i, z_{K_i})` with IID Zipf indices.
/// Deterministic given the seed.
pub fn santa_fe_sample(
    cfg: &SantaFeConfig,
    source: &OracleSource,
    n: usize,
    seed: u64,
) -> Result<Vec<(u64, u8)>> {
    let weights = cfg.weights();
    let total: f64 = weights.iter().sum();
    let mut cdf = Vec::with_capacity(weights.len());
    let mut acc = 0.0;
    for w in &weights {
        acc += w / total;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let u: f64 = rng.gen();
        let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
        let k = idx as u64 + 1;
        out.push((k, source.bit(k)?));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ternary(text: &str) -> SymbolString {
        SymbolString::parse(text, Alphabet::TERNARY).unwrap()
    }

    #[test]
    fn psi_examples() {
        assert_eq!(psi(1).unwrap(), Vec::<u8>::new());
        assert_eq!(psi(2).unwrap(), vec![0]);
        assert_eq!(psi(3).unwrap(), vec![1]);
        assert_eq!(psi(4).unwrap(), vec![0, 0]);
        assert_eq!(psi(5).unwrap(), vec![0, 1]);
        assert!(psi(0).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(&[]).unwrap(), 1);
        assert_eq!(phi(&[0, 0]).unwrap(), 4);
        assert_eq!(phi(&[0, 1]).unwrap(), 5);
        assert!(phi(&[2]).is_err());
    }

    #[test]
    fn psi_phi_inverse_up_to_a_million() {
        for k in 1..=1_000_000u64 {
            debug_assert_eq!(phi(&psi(k).unwrap()).unwrap(), k);
            if k % 99_991 == 0 {
                assert_eq!(phi(&psi(k).unwrap()).unwrap(), k);
            }
        }
        // And on all words up to length 20 via the other direction.
        for len in 0..=20usize {
            let k_lo = 1u64 << len;
            assert_eq!(psi(k_lo).unwrap(), vec![0; len]);
            let k_hi = (1u64 << (len + 1)) - 1;
            assert_eq!(psi(k_hi).unwrap(), vec![1; len]);
        }
    }

    #[test]
    fn oracle_bits_deterministic_and_file_bounds() {
        let s = OracleSource::seeded(7);
        let a: Vec<u8> = (1..=64).map(|k| s.bit(k).unwrap()).collect();
        let b: Vec<u8> = (1..=64).map(|k| s.bit(k).unwrap()).collect();
        assert_eq!(a, b);
        assert!(a.iter().any(|&x| x == 0) && a.iter().any(|&x| x == 1));
        let f = OracleSource::from_bits(vec![0, 1, 1]).unwrap();
        assert_eq!(f.bit(2).unwrap(), 1);
        assert_eq!(f.bit(4).unwrap_err().category(), "oracle-index");
    }

    #[test]
    fn theta_endpoints_rejected() {
        assert!(check_theta(0.0).is_err());
        assert!(check_theta(1.0).is_err());
        assert!(oracle_entropy_rate(1.0).is_err());
        assert!(oracle_state_entropy(0.0).is_err());
    }

    #[test]
    fn stationary_pi_instances() {
        // theta = 1/2: pi(a) = 1/3, pi(a "0") = 1/12.
        let pa = oracle_stationary_pi(0.5, &OracleState::A(vec![])).unwrap();
        assert!((pa - 1.0 / 3.0).abs() < 1e-15);
        let pa0 = oracle_stationary_pi(0.5, &OracleState::A(vec![0])).unwrap();
        assert!((pa0 - 1.0 / 12.0).abs() < 1e-15);
        let pb = oracle_stationary_pi(0.5, &OracleState::B(vec![])).unwrap();
        assert!((pb - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_mass_sums_to_one_at_depth_forty() {
        for theta in [0.25, 0.5] {
            let mass = oracle_stationary_mass(theta, 40).unwrap();
            assert!((mass - 1.0).abs() < 1e-9, "theta={theta}: {mass}");
        }
        // Larger theta leaves exactly the geometric tail theta^(depth+1).
        let mass = oracle_stationary_mass(0.75, 40).unwrap();
        assert!((1.0 - mass - 0.75f64.powi(41)).abs() < 1e-12);
    }

    #[test]
    fn state_entropy_closed_form_vs_series() {
        let h = oracle_state_entropy(0.5).unwrap();
        assert!((h - 3.918296).abs() < 1e-6, "{h}");
        for theta in [0.2, 0.25, 0.4, 0.5, 0.6, 0.8] {
            let series = oracle_state_entropy_series(theta, 200).unwrap();
            let closed = oracle_state_entropy(theta).unwrap();
            assert!((series - closed).abs() < 1e-6, "theta={theta}");
        }
    }

    #[test]
    fn entropy_rate_instances() {
        assert!((oracle_entropy_rate(0.5).unwrap() - 1.0).abs() < 1e-15);
        assert!((oracle_entropy_rate(2.0 / 3.0).unwrap() - 1.188722).abs() < 1e-6);
        // theta -> 0: the process degenerates to the two-cycle "2 z_1".
        assert!(oracle_entropy_rate(1e-6).unwrap() < 1e-4);
        for theta in [0.3, 0.5, 0.7] {
            let series = oracle_entropy_rate_series(theta, 200).unwrap();
            assert!((series - oracle_entropy_rate(theta).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn oracle_sample_deterministic_and_consistent() {
        let cfg = OracleConfig::new(0.5, OracleSource::seeded(3)).unwrap();
        let a = oracle_sample(&cfg, 4000, 10).unwrap();
        let b = oracle_sample(&cfg, 4000, 10).unwrap();
        assert_eq!(a, b);
        // Every complete block reveals exactly the indexed oracle bit.
        let blocks = parse_blocks(&a);
        assert!(blocks.complete_pairs() > 100);
        for (i, (w, z)) in blocks.pairs.iter().enumerate().skip(1) {
            let k = phi(w).unwrap();
            assert_eq!(*z, cfg.source.bit(k).unwrap(), "pair {i}");
        }
        assert_eq!(blocks.reconstruct(), a.as_slice());
    }

    #[test]
    fn oracle_separator_frequency_matches_stationary_marginal() {
        let theta = 0.5;
        let cfg = OracleConfig::new(theta, OracleSource::seeded(5)).unwrap();
        let n = 200_000;
        let x = oracle_sample(&cfg, n, 77).unwrap();
        let twos = x.as_slice().iter().filter(|&&s| s == 2).count() as f64;
        let p = (1.0 - theta) / (2.0 - theta);
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        assert!((twos / n as f64 - p).abs() < 4.0 * sigma + 1e-3);
    }

    #[test]
    fn oracle_word_lengths_are_geometric() {
        let theta = 0.5;
        let cfg = OracleConfig::new(theta, OracleSource::seeded(9)).unwrap();
        let x = oracle_sample(&cfg, 300_000, 123).unwrap();
        let blocks = parse_blocks(&x);
        let lens: Vec<usize> = blocks
            .words_after_first()
            .map(|w| w.len())
            .collect();
        let m = lens.len() as f64;
        for l in 0..6usize {
            let p = (1.0 - theta) * theta.powi(l as i32);
            let freq = lens.iter().filter(|&&x| x == l).count() as f64 / m;
            let sigma = (p * (1.0 - p) / m).sqrt();
            assert!(
                (freq - p).abs() <= 4.0 * sigma,
                "len {l}: freq {freq} vs p {p}"
            );
        }
    }

    #[test]
    fn path_cost_matches_entropy_rate() {
        for theta in [0.5, 2.0 / 3.0] {
            let cfg = OracleConfig::new(theta, OracleSource::seeded(1)).unwrap();
            let n = 100_000;
            let (_, log2_path) = oracle_sample_with_log2(&cfg, n, 55).unwrap();
            let rate = -log2_path / n as f64;
            let h = oracle_entropy_rate(theta).unwrap();
            assert!((rate - h).abs() < 0.01, "theta={theta}: {rate} vs {h}");
        }
    }

    #[test]
    fn truncated_model_matches_closed_form_masses() {
        let source = OracleSource::seeded(2);
        let model = truncated_oracle_model(0.5, 8, &source).unwrap();
        let pi = model.stationary_pi(1e-11).unwrap();
        // Compare a few states against the capped-chain closed form.
        let pa = (1.0 - 0.5) / (2.0 - 0.5 - 0.5f64.powi(9));
        assert!((pi[0] - pa).abs() < 1e-8, "root: {} vs {pa}", pi[0]);
        // First a-state at level 1 (word "0", id 2).
        assert!((pi[1] - pa * 0.25).abs() < 1e-8);
        // Uncapped closed form agrees to O(theta^depth).
        let uncapped = oracle_stationary_pi(0.5, &OracleState::A(vec![])).unwrap();
        assert!((pi[0] - uncapped).abs() < 1e-2);
    }

    #[test]
    fn predictor_examples() {
        // "02120": window 2,1,2,0 matches 2 ? 2 0 for the empty word.
        assert_eq!(predictor_g(1, &ternary("02120")).unwrap(), 0);
        // Both patterns present: abstain.
        assert_eq!(predictor_g(1, &ternary("21202021")).unwrap(), 2);
        // Too short for any occurrence.
        assert_eq!(predictor_g(1, &ternary("220")).unwrap(), 2);
        // psi(2) = "0": pattern 2 ? 0 2 b.
        assert_eq!(predictor_g(2, &ternary("120021")).unwrap(), 1);
    }

    #[test]
    fn facts_count_examples() {
        // z = 0, 1, ...: g(1, "02120") = 0 = z_1, then g(2) = 2 != z_2.
        let source = OracleSource::from_bits(vec![0, 1, 0, 1]).unwrap();
        assert_eq!(facts_count(&ternary("02120"), &source).unwrap(), 2);
        // Immediate mismatch when g(1) != z_1.
        let source1 = OracleSource::from_bits(vec![1, 1]).unwrap();
        assert_eq!(facts_count(&ternary("02120"), &source1).unwrap(), 1);
    }

    #[test]
    fn facts_count_agrees_with_literal_predictor() {
        let cfg = OracleConfig::new(0.5, OracleSource::seeded(17)).unwrap();
        for seed in 0..20u64 {
            let x = oracle_sample(&cfg, 400, seed).unwrap();
            let fast = facts_count(&x, &cfg.source).unwrap();
            let mut k = 1u64;
            let slow = loop {
                if predictor_g(k, &x).unwrap() != cfg.source.bit(k).unwrap() {
                    break k;
                }
                k += 1;
            };
            assert_eq!(fast, slow, "seed {seed}");
        }
    }

    #[test]
    fn parse_blocks_hand_example() {
        let blocks = parse_blocks(&ternary("120210121"));
        assert_eq!(
            blocks.pairs,
            vec![
                (vec![1], 0),
                (vec![], 1),
                (vec![0, 1], 1),
            ]
        );
        assert!(blocks.remainder.is_empty());
        assert_eq!(blocks.w0(), &[1]);
        assert_eq!(m_n_statistic(&blocks), 9);
        assert_eq!(u_n_statistic(&blocks), 2);
    }

    #[test]
    fn parse_blocks_without_separator() {
        let blocks = parse_blocks(&ternary("10101"));
        assert!(blocks.pairs.is_empty());
        assert_eq!(blocks.w0(), &[1, 0, 1, 0, 1]);
        assert_eq!(blocks.remainder, vec![1, 0, 1, 0, 1]);
        assert_eq!(m_n_statistic(&blocks), 7);
        assert_eq!(u_n_statistic(&blocks), 1);
    }

    #[test]
    fn parse_blocks_dangling_separator() {
        let blocks = parse_blocks(&ternary("012"));
        assert!(blocks.pairs.is_empty());
        assert_eq!(blocks.remainder, vec![0, 1, 2]);
        assert_eq!(blocks.reconstruct(), vec![0, 1, 2]);
        assert_eq!(blocks.w0(), &[0, 1]);
    }

    #[test]
    fn parse_round_trip_on_oracle_samples() {
        let cfg = OracleConfig::new(0.4, OracleSource::seeded(8)).unwrap();
        for seed in 0..50u64 {
            let x = oracle_sample(&cfg, 200, seed).unwrap();
            let blocks = parse_blocks(&x);
            assert_eq!(blocks.reconstruct(), x.as_slice());
            assert_eq!(blocks.invalid_reveal_count(), 0);
        }
    }

    #[test]
    fn u_statistic_hand_cases() {
        let empty = parse_blocks(&ternary("11"));
        assert_eq!(u_n_statistic(&empty), 1);
        // Words after the first: {lambda, "01"} -> psi(2) = "0" missing.
        let blocks = parse_blocks(&ternary("120210121"));
        let words: Vec<_> = blocks.words_after_first().collect();
        assert_eq!(words, vec![&[] as &[u8], &[0, 1]]);
        assert_eq!(u_n_statistic(&blocks), 2);
    }

    #[test]
    fn santa_fe_pmf_and_pairs() {
        let cfg = SantaFeConfig::new(2.0, 1000, None).unwrap();
        assert!((cfg.pmf(1) / cfg.pmf(2) - 4.0).abs() < 1e-12);
        assert!(cfg.tail_mass_bound() < 1e-2);
        assert!(SantaFeConfig::new(1.0, 10, None).is_err());
        assert!(SantaFeConfig::new(2.0, 2, Some(1e-9)).is_err());
        let source = OracleSource::seeded(4);
        let pairs = santa_fe_sample(&cfg, &source, 5000, 31).unwrap();
        for &(k, z) in &pairs {
            assert_eq!(z, source.bit(k).unwrap());
        }
        let again = santa_fe_sample(&cfg, &source, 5000, 31).unwrap();
        assert_eq!(pairs, again);
    }

    #[test]
    fn santa_fe_frequencies_match_truncated_zipf() {
        let cfg = SantaFeConfig::new(2.0, 100, None).unwrap();
        let source = OracleSource::seeded(4);
        let n = 100_000;
        let pairs = santa_fe_sample(&cfg, &source, n, 99).unwrap();
        for k in 1..=4u64 {
            let p = cfg.pmf(k);
            let freq = pairs.iter().filter(|&&(kk, _)| kk == k).count() as f64 / n as f64;
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * sigma, "k={k}: {freq} vs {p}");
        }
    }

    #[test]
    fn oracle_balance_equations_hold_on_truncated_states() {
        // Closed-form masses satisfy the stationarity fixed point: inflow to
        // each state at depth <= 11 equals its mass.
        let theta = 0.5f64;
        let pa_mass =
            |w: &[u8]| oracle_stationary_pi(theta, &OracleState::A(w.to_vec())).unwrap();
        let pb_mass =
            |w: &[u8]| oracle_stationary_pi(theta, &OracleState::B(w.to_vec())).unwrap();
        let mut max_resid = 0.0f64;
        // Root inflow: every b-state returns with probability one. Sum over
        // levels <= 40 (geometric tail below 1e-12).
        let mut root_in = 0.0;
        for level in 0..=40 {
            let per = (1.0 - theta)
                * ((1.0 - theta) / (2.0 - theta))
                * (theta / 2.0).powi(level);
            root_in += 2f64.powi(level) * per;
        }
        max_resid = max_resid.max((root_in - pa_mass(&[])).abs());
        // Deeper a-states: inflow is the parent's bit emission.
        for word in [[0].as_slice(), &[1], &[0, 1], &[1, 1, 0]] {
            let parent = &word[..word.len() - 1];
            let inflow = pa_mass(parent) * theta / 2.0;
            max_resid = max_resid.max((inflow - pa_mass(word)).abs());
            let b_in = pa_mass(word) * (1.0 - theta);
            max_resid = max_resid.max((b_in - pb_mass(word)).abs());
        }
        assert!(max_resid <= 1e-9, "residual {max_resid}");
    }
}
