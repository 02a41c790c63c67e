//! Exact machinery for unifilar hidden Markov sources: maximum likelihood
//! by canonical lazy search, Shtarkov normalizers with guaranteed brackets,
//! the Ryabko mixture, a penalized order estimator with an LZ78 surrogate,
//! Oracle and Santa Fe process samplers, and information-scaling analyses
//! with seeded Monte Carlo drivers.
//!
//! All probabilities live in the base-2 log domain ([`LogProb`]). Anything
//! that enumerates `X^n` is guarded by an explicit exact envelope and falls
//! back to sound brackets beyond it, so downstream decisions either come
//! with a point value or an honest interval, never a guess.

pub mod analysis;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod files;
pub mod likelihood;
pub mod logprob;
pub mod mixture;
pub mod model;
pub mod nml;
pub mod processes;

pub use analysis::{
    entropy_rate_unifilar, exact_block_entropy, excess_entropy_partial, hilberg_exponent,
    j_function, mixture_mi, ExponentFit, MiValue, ScalingSeries, SeriesPoint,
};
pub use error::{Error, Result};
pub use estimator::{
    lz78_codelength, lz78_parse, order_estimate_exact, order_estimate_surrogate, EstimateMode,
    Lz78Parse, OrderEstimate,
};
pub use experiments::{
    pre_warm, run_consistency, run_mi_scaling, run_oracle_scaling, run_universality,
    ExperimentConfig, OracleScalingReport, ProcessSpec, TrialReport, TrialRow,
};
pub use likelihood::{
    exact_log_ml, ml_profile, optimistic_bound, plugin_log_ml, AutomatonSpec, CountMatrix,
    MlResult,
};
pub use logprob::LogProb;
pub use mixture::{
    log_ryabko, nml_argmax, sandwich_check, weight, MixtureValue, OrderContribution,
    SandwichReport,
};
pub use model::{Alphabet, StatePath, SymbolString, UnifilarModel};
pub use nml::{
    complexity, complexity_upper_bound, ensure_cells, log_nml, statistical_complexity_exact,
    CellMode, CellValue, ComplexityTable, ExactEnvelope, NmlValue,
};
pub use processes::{
    binary_entropy, facts_count, m_n_statistic, oracle_entropy_rate, oracle_entropy_rate_series,
    oracle_sample, oracle_sample_with_log2, oracle_state_entropy, oracle_state_entropy_series,
    oracle_stationary_mass, oracle_stationary_pi, parse_blocks, phi, predictor_g, psi,
    santa_fe_sample, truncated_oracle_model, u_n_statistic, OracleConfig, OracleSource,
    OracleState, ParsedBlocks, SantaFeConfig,
};
