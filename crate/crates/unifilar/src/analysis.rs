//! Entropy and information-scaling analyses.
//!
//! Block entropies are computed exactly by pushing the start-state
//! distribution through the prefix tree; the entropy rate of a unifilar
//! model is the stationary average of per-state emission entropies. The
//! excess-entropy partial sums `H(n) - n h` are reported as partial sums
//! only, never extrapolated. Power-law growth is summarized by an empirical
//! Hilberg exponent: a least-squares slope of `log2 max(1, s(n))` against
//! `log2 n` over a window, standing in for the lim-sup definition that
//! finite data cannot certify.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mixture::log_ryabko;
use crate::model::{SymbolString, UnifilarModel};
use crate::nml::ComplexityTable;

/// A series of `(n, value, stderr)` points for scaling analyses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingSeries {
    /// What the values measure, e.g. `"mean_u_statistic"`.
    pub quantity: String,
    /// The process or scenario the series came from.
    pub process: String,
    pub points: Vec<SeriesPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub n: u64,
    pub value: f64,
    pub stderr: f64,
}

impl ScalingSeries {
    pub fn new(quantity: &str, process: &str) -> ScalingSeries {
        ScalingSeries {
            quantity: quantity.to_string(),
            process: process.to_string(),
            points: Vec::new(),
        }
    }

    /// Appends a point; `n` must increase strictly.
    pub fn push(&mut self, n: u64, value: f64, stderr: f64) -> Result<()> {
        if let Some(last) = self.points.last() {
            if n <= last.n {
                return Err(Error::InvalidInput(format!(
                    "series points must have strictly increasing n ({n} after {})",
                    last.n
                )));
            }
        }
        if stderr < 0.0 {
            return Err(Error::InvalidInput("stderr must be nonnegative".into()));
        }
        self.points.push(SeriesPoint { n, value, stderr });
        Ok(())
    }

    pub fn value_at(&self, n: u64) -> Option<f64> {
        self.points.iter().find(|p| p.n == n).map(|p| p.value)
    }
}

/// A fitted power-law exponent over a window of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    pub exponent: f64,
    pub intercept: f64,
    pub window: (u64, u64),
    /// Root-mean-square regression residual in log2 space.
    pub residual: f64,
    pub points_used: usize,
}

/// Entropy rate of a stationary unifilar model:
/// `sum_y pi*(y) H(eps(.|y))` with `pi*` the stationary distribution.
pub fn entropy_rate_unifilar(model: &UnifilarModel) -> Result<f64> {
    let pi = model.stationary_pi(1e-12)?;
    let a = model.alphabet().size() as u8;
    let mut rate = 0.0;
    for (idx, &mass) in pi.iter().enumerate() {
        if mass <= 0.0 {
            continue;
        }
        let state = idx as u32 + 1;
        let mut h = 0.0;
        for sym in 0..a {
            let p = model.epsilon(state, sym);
            if p > 0.0 {
                h -= p * p.log2();
            }
        }
        rate += mass * h;
    }
    Ok(rate)
}

/// Envelope for exact block-entropy enumeration.
const BLOCK_ENTROPY_MAX_LEAVES: u128 = 1 << 20;

/// Exact block entropy `H(X_1^n) = -sum_x P(x) log2 P(x)` by prefix-tree
/// recursion on the start-state mass vector. Subtrees combine in symbol
/// order, so the result is independent of the worker count.
pub fn exact_block_entropy(model: &UnifilarModel, n: usize) -> Result<f64> {
    let a = model.alphabet().size();
    let mut leaves: u128 = 1;
    for _ in 0..n {
        leaves = leaves.saturating_mul(a as u128);
        if leaves > BLOCK_ENTROPY_MAX_LEAVES {
            return Err(Error::EnvelopeExceeded(format!(
                "block entropy enumeration of {a}^{n} strings exceeds {BLOCK_ENTROPY_MAX_LEAVES} leaves"
            )));
        }
    }
    if n == 0 {
        return Ok(0.0);
    }
    // Weight vector over states: mass of the current prefix ending in each
    // state.
    let start: Vec<f64> = model.pi().to_vec();
    Ok(block_entropy_rec(model, n, &start))
}

fn block_entropy_rec(model: &UnifilarModel, remaining: usize, mass: &[f64]) -> f64 {
    if remaining == 0 {
        let p: f64 = mass.iter().sum();
        return if p > 0.0 { -p * p.log2() } else { 0.0 };
    }
    let a = model.alphabet().size() as u8;
    let k = model.state_count() as usize;
    let parallel = remaining >= 14 && a == 2;
    let child = |sym: u8| -> Vec<f64> {
        let mut next = vec![0.0; k];
        for (idx, &m) in mass.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            let state = idx as u32 + 1;
            let p = model.epsilon(state, sym);
            if p > 0.0 {
                next[model.tau(state, sym) as usize - 1] += m * p;
            }
        }
        next
    };
    if parallel {
        let (left, right) = rayon::join(
            || block_entropy_rec(model, remaining - 1, &child(0)),
            || block_entropy_rec(model, remaining - 1, &child(1)),
        );
        return left + right;
    }
    let mut total = 0.0;
    for sym in 0..a {
        total += block_entropy_rec(model, remaining - 1, &child(sym));
    }
    total
}

/// Excess-entropy partial sum `H(X_1^n) - n h`: nondecreasing in `n` and,
/// for finite-order stationary models, bounded by `log2 k`.
pub fn excess_entropy_partial(model: &UnifilarModel, n: usize) -> Result<f64> {
    let h = entropy_rate_unifilar(model)?;
    Ok(exact_block_entropy(model, n)? - n as f64 * h)
}

/// Result of the redundancy transform: the derived series plus the `n`
/// values skipped because `2n` was missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JSeries {
    pub series: ScalingSeries,
    pub skipped: Vec<u64>,
}

/// Pointwise redundancy `J(n) = 2 S(n) - S(2n)`; a point is emitted only
/// when the series carries both `n` and `2n`.
pub fn j_function(series: &ScalingSeries) -> JSeries {
    let mut out = ScalingSeries::new(&format!("j_of_{}", series.quantity), &series.process);
    let mut skipped = Vec::new();
    for p in &series.points {
        match series.points.iter().find(|q| q.n == 2 * p.n) {
            Some(q) => {
                let stderr = (4.0 * p.stderr * p.stderr + q.stderr * q.stderr).sqrt();
                out.push(p.n, 2.0 * p.value - q.value, stderr)
                    .expect("source n strictly increasing");
            }
            None => skipped.push(p.n),
        }
    }
    JSeries {
        series: out,
        skipped,
    }
}

/// A pointwise mutual-information proxy value; an interval when the mixture
/// cells are bracketed.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MiValue {
    pub lo: f64,
    pub hi: f64,
    pub exact: bool,
}

impl MiValue {
    pub fn point(&self) -> Option<f64> {
        if self.exact {
            Some(self.lo)
        } else {
            None
        }
    }
}

/// Mixture-based mutual information between the halves of an even-length
/// string: `-log2 P(x_1^n) - log2 P(x_{n+1}^{2n}) + log2 P(x_1^{2n})` under
/// the Ryabko mixture. Pointwise values may be negative.
pub fn mixture_mi(x: &SymbolString, table: &ComplexityTable, band: u32) -> Result<MiValue> {
    let len = x.len();
    if len == 0 || len % 2 != 0 {
        return Err(Error::InvalidInput(format!(
            "mixture MI needs an even positive length, got {len}"
        )));
    }
    let half = len / 2;
    let left = log_ryabko(&x.slice(0, half)?, table, band)?;
    let right = log_ryabko(&x.slice(half, len)?, table, band)?;
    let whole = log_ryabko(x, table, band)?;
    Ok(MiValue {
        lo: whole.lo.log2() - left.hi.log2() - right.hi.log2(),
        hi: whole.hi.log2() - left.lo.log2() - right.lo.log2(),
        exact: left.exact && right.exact && whole.exact,
    })
}

/// Empirical Hilberg exponent: least-squares slope of `log2 max(1, value)`
/// against `log2 n` over the points with `n` inside `window`. Nonpositive
/// values are clipped by the `max(1, .)` exactly as the definition
/// prescribes.
pub fn hilberg_exponent(series: &ScalingSeries, window: (u64, u64)) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .filter(|p| p.n >= window.0 && p.n <= window.1)
        .map(|p| ((p.n as f64).log2(), p.value.max(1.0).log2()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "exponent fit needs at least 3 points in window, found {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return Err(Error::InvalidInput(
            "degenerate window: all points share one n".into(),
        ));
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let residual = (pts
        .iter()
        .map(|p| {
            let r = p.1 - (slope * p.0 + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit {
        exponent: slope,
        intercept,
        window,
        residual,
        points_used: pts.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Alphabet;
    use crate::nml::{ensure_cells, ExactEnvelope};
    use crate::processes::{binary_entropy, oracle_entropy_rate, truncated_oracle_model, OracleSource};

    fn golden_mean() -> UnifilarModel {
        UnifilarModel::new(
            Alphabet::BINARY,
            2,
            vec![2.0 / 3.0, 1.0 / 3.0],
            vec![1, 2, 1, 1],
            vec![0.5, 0.5, 1.0, 0.0],
        )
        .unwrap()
    }

    fn alternator() -> UnifilarModel {
        UnifilarModel::new(
            Alphabet::BINARY,
            2,
            vec![0.5, 0.5],
            vec![2, 2, 1, 1],
            vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn entropy_rate_iid_is_binary_entropy() {
        for p in [0.1, 0.3, 0.5] {
            let m = UnifilarModel::iid(Alphabet::BINARY, vec![1.0 - p, p]).unwrap();
            assert!((entropy_rate_unifilar(&m).unwrap() - binary_entropy(p)).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_rate_golden_mean_is_two_thirds() {
        let h = entropy_rate_unifilar(&golden_mean()).unwrap();
        assert!((h - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_rate_truncated_oracle_near_closed_form() {
        let source = OracleSource::seeded(21);
        let model = truncated_oracle_model(0.5, 10, &source).unwrap();
        let h = entropy_rate_unifilar(&model).unwrap();
        // The cap at depth 10 perturbs the rate by O(theta^10).
        assert!((h - oracle_entropy_rate(0.5).unwrap()).abs() < 5e-3, "{h}");
    }

    #[test]
    fn block_entropy_uniform_is_n() {
        let m = UnifilarModel::iid(Alphabet::BINARY, vec![0.5, 0.5]).unwrap();
        for n in [0usize, 1, 5, 10] {
            assert!((exact_block_entropy(&m, n).unwrap() - n as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn block_entropy_golden_mean_first_symbol() {
        let h1 = exact_block_entropy(&golden_mean(), 1).unwrap();
        assert!((h1 - binary_entropy(1.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn block_entropy_increments_decrease_to_rate() {
        let m = golden_mean();
        let rate = entropy_rate_unifilar(&m).unwrap();
        let hs: Vec<f64> = (0..=16)
            .map(|n| exact_block_entropy(&m, n).unwrap())
            .collect();
        let mut prev_inc = f64::INFINITY;
        for w in hs.windows(2) {
            let inc = w[1] - w[0];
            assert!(inc <= prev_inc + 1e-9, "conditional entropy must decrease");
            assert!(inc >= rate - 1e-9);
            prev_inc = inc;
        }
        assert!((prev_inc - rate).abs() < 0.01);
    }

    #[test]
    fn block_entropy_envelope() {
        let m = golden_mean();
        assert_eq!(
            exact_block_entropy(&m, 32).unwrap_err().category(),
            "envelope"
        );
    }

    #[test]
    fn excess_entropy_iid_is_zero() {
        let m = UnifilarModel::iid(Alphabet::BINARY, vec![0.2, 0.8]).unwrap();
        for n in [1usize, 4, 9] {
            assert!(excess_entropy_partial(&m, n).unwrap().abs() < 1e-9);
        }
    }

    #[test]
    fn excess_entropy_golden_mean_below_state_bound() {
        let m = golden_mean();
        let mut prev = 0.0;
        for n in 1..=14usize {
            let e = excess_entropy_partial(&m, n).unwrap();
            assert!(e >= prev - 1e-9, "partial sums nondecreasing");
            assert!(e <= 1.0 + 1e-9, "bounded by log2 k = 1");
            prev = e;
        }
    }

    #[test]
    fn excess_entropy_phase_model_is_one_bit() {
        // The deterministic alternator's only uncertainty is its phase.
        let m = alternator();
        for n in 1..=10usize {
            let e = excess_entropy_partial(&m, n).unwrap();
            assert!((e - 1.0).abs() < 1e-9, "n={n}: {e}");
        }
    }

    #[test]
    fn j_function_linear_and_sqrt() {
        let mut lin = ScalingSeries::new("s", "test");
        let mut sqrt = ScalingSeries::new("s", "test");
        for n in [1u64, 2, 4, 8, 16, 32] {
            lin.push(n, 3.0 * n as f64, 0.0).unwrap();
            sqrt.push(n, (n as f64).sqrt(), 0.0).unwrap();
        }
        let j_lin = j_function(&lin);
        for p in &j_lin.series.points {
            assert!(p.value.abs() < 1e-9);
        }
        assert_eq!(j_lin.skipped, vec![32]);
        let j_sqrt = j_function(&sqrt);
        for p in &j_sqrt.series.points {
            let expect = (2.0 - 2.0f64.sqrt()) * (p.n as f64).sqrt();
            assert!((p.value - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn j_of_uniform_block_entropies_vanishes() {
        let m = UnifilarModel::iid(Alphabet::BINARY, vec![0.5, 0.5]).unwrap();
        let mut s = ScalingSeries::new("block_entropy", "iid_uniform");
        for n in [1u64, 2, 4, 8] {
            s.push(n, exact_block_entropy(&m, n as usize).unwrap(), 0.0)
                .unwrap();
        }
        let j = j_function(&s);
        for p in &j.series.points {
            assert!(p.value.abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_mi_golden_values() {
        let mut table = ComplexityTable::new();
        let env = ExactEnvelope::default();
        for n in 1..=2usize {
            ensure_cells(&mut table, Alphabet::BINARY, n, 2, &env).unwrap();
        }
        let mi00 = mixture_mi(
            &SymbolString::parse("00", Alphabet::BINARY).unwrap(),
            &table,
            2,
        )
        .unwrap();
        assert!(mi00.exact);
        assert!((mi00.lo - (2.0 + 0.325f64.log2())).abs() < 1e-12);
        let mi01 = mixture_mi(
            &SymbolString::parse("01", Alphabet::BINARY).unwrap(),
            &table,
            2,
        )
        .unwrap();
        // Pointwise mixture MI can be negative.
        assert!((mi01.lo - (2.0 + 0.175f64.log2())).abs() < 1e-12);
        assert!(mi01.lo < 0.0);
    }

    #[test]
    fn mixture_mi_expectation_matches_enumeration() {
        let mut table = ComplexityTable::new();
        let env = ExactEnvelope::default();
        for n in 1..=4usize {
            ensure_cells(&mut table, Alphabet::BINARY, n, 4, &env).unwrap();
        }
        let m = UnifilarModel::iid(Alphabet::BINARY, vec![0.5, 0.5]).unwrap();
        for half in [1usize, 2] {
            let n = 2 * half;
            let mut expectation = 0.0;
            let mut oracle = 0.0;
            for bits in 0..(1u32 << n) {
                let symbols: Vec<u8> = (0..n).map(|i| ((bits >> i) & 1) as u8).collect();
                let x = SymbolString::new(symbols, Alphabet::BINARY).unwrap();
                let p = m.marginal_log_prob(&x).unwrap().prob();
                let mi = mixture_mi(&x, &table, 4).unwrap().point().unwrap();
                expectation += p * mi;
                // Oracle route: assemble the same quantity from three
                // independent mixture evaluations.
                let l = log_ryabko(&x.slice(0, half).unwrap(), &table, 4).unwrap();
                let r = log_ryabko(&x.slice(half, n).unwrap(), &table, 4).unwrap();
                let w = log_ryabko(&x, &table, 4).unwrap();
                oracle += p * (w.lo.log2() - l.lo.log2() - r.lo.log2());
            }
            assert_eq!(expectation, oracle, "half={half}");
        }
    }

    #[test]
    fn mixture_mi_needs_even_length() {
        let table = ComplexityTable::new();
        let x = SymbolString::parse("010", Alphabet::BINARY).unwrap();
        assert!(mixture_mi(&x, &table, 1).is_err());
    }

    #[test]
    fn hilberg_fit_recovers_exact_power() {
        let mut s = ScalingSeries::new("s", "test");
        for e in 0..=10u32 {
            let n = 1u64 << e;
            s.push(n, (n as f64).powf(0.5), 0.0).unwrap();
        }
        let fit = hilberg_exponent(&s, (1, 1 << 10)).unwrap();
        assert!((fit.exponent - 0.5).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
    }

    #[test]
    fn hilberg_fit_of_constant_is_zero() {
        for c in [0.3f64, 1.0, 7.5] {
            let mut s = ScalingSeries::new("s", "test");
            for e in 0..=6u32 {
                s.push(1 << e, c, 0.0).unwrap();
            }
            let fit = hilberg_exponent(&s, (1, 64)).unwrap();
            assert!(fit.exponent.abs() < 1e-9, "c={c}");
        }
    }

    #[test]
    fn hilberg_fit_window_and_errors() {
        let mut s = ScalingSeries::new("s", "test");
        for e in 0..=8u32 {
            s.push(1 << e, (1u64 << e) as f64, 0.0).unwrap();
        }
        let fit = hilberg_exponent(&s, (4, 64)).unwrap();
        assert_eq!(fit.points_used, 5);
        assert!((fit.exponent - 1.0).abs() < 1e-9);
        assert!(hilberg_exponent(&s, (300, 400)).is_err());
    }

    #[test]
    fn affine_plus_power_recovered_through_j() {
        // S(n) = c n + n^0.6: J(n) = (2 - 2^0.6) n^0.6, so the fitted
        // exponent of J recovers 0.6.
        let mut s = ScalingSeries::new("s", "test");
        for e in 0..=14u32 {
            let n = 1u64 << e;
            s.push(n, 0.37 * n as f64 + (n as f64).powf(0.6), 0.0).unwrap();
        }
        let j = j_function(&s);
        let fit = hilberg_exponent(&j.series, (1, 1 << 13)).unwrap();
        assert!((fit.exponent - 0.6).abs() < 0.05, "{}", fit.exponent);
    }
}
