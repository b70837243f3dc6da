//! Rateless erasure transmission with a feedback-tuned degree schedule.
//!
//! A message of `k'` symbols is expanded by a rate-`1-2γ` systematic
//! sparse-graph precode into a codeword of `k` symbols. The codeword is
//! then streamed as XOR-combined encoding symbols whose degree follows the
//! schedule that maximizes the chance each arriving symbol decodes rather
//! than being discarded. The receiver never buffers undecodable symbols:
//! each one is processed immediately and either reveals exactly one new
//! codeword symbol or is dropped. Transmission stops once a `1-γ` fraction
//! of the codeword is known; the precode recovers the rest.
//!
//! The crate also ships a deterministic single-session channel simulator
//! (erasure + feedback loss/latency), a seeded Monte-Carlo trial harness,
//! and per-session operation counters, so the symbol-count, feedback-count
//! and XOR-count behavior of the scheme can be measured reproducibly.

pub mod codec;
pub mod metrics;
pub mod policy;
pub mod precode;
pub mod scalar;
pub mod sim;
pub mod symbol;

pub use codec::{
    derive_indices, mix_seed, EncodingSymbol, FeedbackMessage, ProcessOutcome, Receiver, Sender,
    SymbolOutcome,
};
pub use metrics::{summarize, summarize_values, FieldSummary, MetricsSummary, TranscriptMetrics};
pub use policy::{
    brute_force_optimal_degree, composed_symbols_bound, expected_symbols_bound, feedback_budget,
    optimal_degree, revealing_probability, DegreePolicy, Gamma,
};
pub use precode::{
    precode_decode, precode_encode, PrecodeDecodeReport, PrecodeSpec, DEFAULT_PARITY_DEGREE,
};
pub use scalar::Scalar;
pub use sim::{
    compose, precode_failure_trial, random_message, run_session, run_trials, ChannelConfig,
    ErasurePattern, Event, SessionTranscript, TrialsReport,
};
pub use symbol::{xor, xor_accumulate, Symbol};

/// Exact rational scalar for the oracle-grade probability checks.
pub type Exact = num_rational::BigRational;
