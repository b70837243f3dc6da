//! Deterministic discrete-event simulation of one sender/receiver pair over
//! a symbol erasure channel with a lossy, delayed feedback channel.
//!
//! Time advances in forward-symbol slots: each tick the sender emits one
//! encoding symbol, the channel delivers or erases it, the receiver processes
//! a delivery immediately, and feedback sent at tick `t` reaches the sender
//! at the end of tick `t + feedback_latency` (so with zero latency the very
//! next emission reflects it). Everything is a pure function of the
//! configuration seed, so transcripts are byte-identical across runs.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::collections::VecDeque;
use std::io::Write;
use thiserror::Error;

use crate::codec::{mix_seed, CodecError, FeedbackMessage, Receiver, Sender, SymbolOutcome};
use crate::metrics::{summarize, MetricsError, MetricsSummary, TranscriptMetrics};
use crate::policy::{DegreePolicy, Gamma, PolicyError};
use crate::precode::{precode_decode, precode_encode, PrecodeError, PrecodeSpec};
use crate::symbol::Symbol;

/// Version tag written at the top of every exported transcript.
pub const TRANSCRIPT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Precode(#[from] PrecodeError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("policy (k={policy_k}, gamma={policy_gamma}) does not match precode (k={precode_k}, gamma={precode_gamma})")]
    MismatchedParameters {
        policy_k: u64,
        policy_gamma: Gamma,
        precode_k: u64,
        precode_gamma: Gamma,
    },
    #[error("message has {actual} symbols, precode expects k'={expected}")]
    MessageLength { expected: u64, actual: usize },
    #[error("{name} must lie in [0, 1), got {value}")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("protocol-miss erasure patterns require a degree policy")]
    PatternNeedsPolicy,
}

/// Channel parameters. The protocol itself never sees these; they exist only
/// inside the simulator.
#[derive(Debug, Clone, Serialize)]
pub struct ChannelConfig {
    pub forward_erasure_prob: f64,
    pub feedback_loss_prob: f64,
    /// Delivery delay for feedback, in forward-symbol slots.
    pub feedback_latency: u64,
    pub rng_seed: u64,
    /// Hard stop for pathological configurations; `None` picks a generous
    /// bound from the session size and channel rates.
    pub max_ticks: Option<u64>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            forward_erasure_prob: 0.0,
            feedback_loss_prob: 0.0,
            feedback_latency: 0,
            rng_seed: 0,
            max_ticks: None,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        for (name, value) in [
            ("forward_erasure_prob", self.forward_erasure_prob),
            ("feedback_loss_prob", self.feedback_loss_prob),
        ] {
            if !(0.0..1.0).contains(&value) {
                return Err(SimError::InvalidProbability { name, value });
            }
        }
        Ok(())
    }

    fn tick_cap(&self, k: u64) -> u64 {
        if let Some(cap) = self.max_ticks {
            return cap;
        }
        let survive = (1.0 - self.forward_erasure_prob) * (1.0 - self.feedback_loss_prob);
        let base = (100 * k + 10_000) as f64 / survive.max(1e-3);
        base as u64 + 100 * (self.feedback_latency + 1)
    }
}

/// One line of the session event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SymbolSent {
        tick: u64,
        degree: u64,
    },
    SymbolErased {
        tick: u64,
    },
    SymbolProcessed {
        tick: u64,
        degree: u64,
        known_before: u64,
    },
    SymbolDecoded {
        tick: u64,
        position: u64,
        degree: u64,
        known_after: u64,
    },
    SymbolDiscarded {
        tick: u64,
    },
    FeedbackSent {
        tick: u64,
        kind: FeedbackMessage,
    },
    FeedbackLost {
        tick: u64,
        kind: FeedbackMessage,
    },
    FeedbackDelivered {
        tick: u64,
        kind: FeedbackMessage,
    },
    /// An increment that would push the sender beyond its schedule maximum
    /// (possible only for retransmitted duplicates) is dropped, not applied.
    FeedbackDiscarded {
        tick: u64,
        kind: FeedbackMessage,
    },
    Terminated {
        tick: u64,
    },
}

impl Event {
    pub fn tick(&self) -> u64 {
        match *self {
            Event::SymbolSent { tick, .. }
            | Event::SymbolErased { tick }
            | Event::SymbolProcessed { tick, .. }
            | Event::SymbolDecoded { tick, .. }
            | Event::SymbolDiscarded { tick }
            | Event::FeedbackSent { tick, .. }
            | Event::FeedbackLost { tick, .. }
            | Event::FeedbackDelivered { tick, .. }
            | Event::FeedbackDiscarded { tick, .. }
            | Event::Terminated { tick } => tick,
        }
    }
}

/// Full record of one session: every event, the final counters and the
/// recovered message (when precode decoding succeeded).
#[derive(Debug, Clone)]
pub struct SessionTranscript {
    pub events: Vec<Event>,
    pub metrics: TranscriptMetrics,
    pub recovered: Option<Vec<Symbol>>,
}

impl SessionTranscript {
    /// Line-delimited export: a header object, one JSON object per event,
    /// then the flat metrics map.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "{}",
            serde_json::json!({
                "format": "transcript",
                "version": TRANSCRIPT_FORMAT_VERSION,
            })
        )?;
        for event in &self.events {
            writeln!(
                w,
                "{}",
                serde_json::to_string(event).expect("event serializes")
            )?;
        }
        writeln!(
            w,
            "{}",
            serde_json::json!({ "metrics": self.metrics.to_flat_map() })
        )?;
        Ok(())
    }
}

/// Build the matching `(PrecodeSpec, DegreePolicy)` pair for a message of
/// `k_prime` symbols: the policy runs on the precode's block length.
pub fn compose(
    k_prime: u64,
    gamma: Gamma,
    parity_degree: u64,
    construction_seed: u64,
) -> Result<(PrecodeSpec, DegreePolicy), SimError> {
    let spec = PrecodeSpec::new(k_prime, gamma, parity_degree, construction_seed)?;
    let policy = DegreePolicy::new(spec.k(), gamma)?;
    Ok((spec, policy))
}

/// Run one end-to-end session: precode-encode, stream encoding symbols
/// through the erasure channel with feedback flowing back under the
/// configured loss and latency, then precode-decode whatever the receiver
/// recovered. Fully deterministic in `config.rng_seed`.
pub fn run_session(
    policy: &DegreePolicy,
    spec: &PrecodeSpec,
    message: &[Symbol],
    config: &ChannelConfig,
) -> Result<SessionTranscript, SimError> {
    config.validate()?;
    if policy.k() != spec.k() || policy.gamma() != spec.gamma() {
        return Err(SimError::MismatchedParameters {
            policy_k: policy.k(),
            policy_gamma: policy.gamma(),
            precode_k: spec.k(),
            precode_gamma: spec.gamma(),
        });
    }
    if message.len() as u64 != spec.k_prime() {
        return Err(SimError::MessageLength {
            expected: spec.k_prime(),
            actual: message.len(),
        });
    }

    let codeword = precode_encode(spec, message)?;
    let mut sender = Sender::new(policy.clone(), codeword)?;
    let mut receiver = Receiver::new(policy.clone());

    let stream = |n: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(n);
        rng
    };
    let mut erasure_rng = stream(0);
    let mut loss_rng = stream(1);
    let mut seed_rng = stream(2);

    let mut events: Vec<Event> = Vec::new();
    let mut metrics = TranscriptMetrics {
        encoder_memory_symbols: policy.k(),
        ..TranscriptMetrics::default()
    };
    let mut in_flight: VecDeque<(u64, FeedbackMessage)> = VecDeque::new();
    let cap = config.tick_cap(policy.k());
    let mut tick: u64 = 0;

    let send_feedback = |msg: FeedbackMessage,
                         tick: u64,
                         events: &mut Vec<Event>,
                         metrics: &mut TranscriptMetrics,
                         in_flight: &mut VecDeque<(u64, FeedbackMessage)>,
                         loss_rng: &mut ChaCha8Rng| {
        metrics.feedback_sent += 1;
        events.push(Event::FeedbackSent { tick, kind: msg });
        if loss_rng.gen::<f64>() < config.feedback_loss_prob {
            events.push(Event::FeedbackLost { tick, kind: msg });
        } else {
            in_flight.push_back((tick + config.feedback_latency, msg));
        }
    };

    while !sender.terminated() && tick < cap {
        let sym = sender.next_symbol(&mut seed_rng)?;
        let degree = sym.degree;
        metrics.symbols_sent += 1;
        events.push(Event::SymbolSent { tick, degree });

        if erasure_rng.gen::<f64>() < config.forward_erasure_prob {
            events.push(Event::SymbolErased { tick });
        } else {
            metrics.symbols_delivered += 1;
            if receiver.is_complete() {
                // Stale stream past the target: never processed, but may
                // prompt a termination resend.
                if let Some(fb) = receiver.post_completion_arrival() {
                    metrics.feedback_retransmitted += 1;
                    send_feedback(
                        fb,
                        tick,
                        &mut events,
                        &mut metrics,
                        &mut in_flight,
                        &mut loss_rng,
                    );
                }
            } else {
                let known_before = receiver.known_count();
                let retransmits_before = receiver.retransmissions();
                let out = receiver.process(sym)?;
                metrics.symbols_processed += 1;
                events.push(Event::SymbolProcessed {
                    tick,
                    degree,
                    known_before,
                });
                match out.outcome {
                    SymbolOutcome::Decoded { position } => {
                        metrics.symbols_decoded += 1;
                        events.push(Event::SymbolDecoded {
                            tick,
                            position,
                            degree,
                            known_after: receiver.known_count(),
                        });
                    }
                    SymbolOutcome::Discarded => {
                        metrics.symbols_discarded += 1;
                        events.push(Event::SymbolDiscarded { tick });
                    }
                }
                metrics.feedback_retransmitted += receiver.retransmissions() - retransmits_before;
                for fb in out.feedback {
                    send_feedback(
                        fb,
                        tick,
                        &mut events,
                        &mut metrics,
                        &mut in_flight,
                        &mut loss_rng,
                    );
                }
            }
        }

        while in_flight.front().is_some_and(|&(due, _)| due <= tick) {
            let (_, msg) = in_flight.pop_front().unwrap();
            match sender.on_feedback(msg) {
                Ok(()) => {
                    metrics.feedback_delivered += 1;
                    events.push(Event::FeedbackDelivered { tick, kind: msg });
                }
                Err(CodecError::DegreeAboveMax { .. }) => {
                    events.push(Event::FeedbackDiscarded { tick, kind: msg });
                }
                Err(e) => return Err(e.into()),
            }
        }
        tick += 1;
    }

    metrics.completed = sender.terminated();
    if metrics.completed {
        events.push(Event::Terminated { tick });
    }
    metrics.ticks = tick;
    metrics.payload_xors_sender = sender.payload_xors();
    metrics.payload_xors_receiver = receiver.payload_xors();
    metrics.bitmap_lookups = receiver.bitmap_lookups();

    let report = precode_decode(spec, receiver.received())?;
    metrics.precode_decode_xors = report.xor_count;
    metrics.elimination_fallback_used = report.fallback_used;
    metrics.decode_success = report.message.is_some();

    debug_assert_eq!(
        metrics.symbols_processed,
        metrics.symbols_decoded + metrics.symbols_discarded
    );
    debug_assert!(metrics.symbols_delivered <= metrics.symbols_sent);

    Ok(SessionTranscript {
        events,
        metrics,
        recovered: report.message,
    })
}

/// Aggregate of independent seeded trials.
#[derive(Debug, Clone)]
pub struct TrialsReport {
    /// Per-trial counters, ordered by trial index.
    pub metrics: Vec<TranscriptMetrics>,
    pub summary: MetricsSummary,
}

/// Draw a fresh random message of `k_prime` symbols of `symbol_size` bytes.
pub fn random_message(k_prime: u64, symbol_size: usize, seed: u64) -> Vec<Symbol> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    (0..k_prime)
        .map(|_| {
            let mut bytes = vec![0u8; symbol_size];
            rng.fill_bytes(&mut bytes);
            Symbol::from_bytes(bytes)
        })
        .collect()
}

/// Run `n_trials` independent sessions with per-trial seeds derived from
/// `config.rng_seed` and a fresh random message each, in parallel.
/// Deterministic regardless of scheduling: trial `i` always gets seed
/// `mix_seed(config.rng_seed, i)`.
pub fn run_trials(
    policy: &DegreePolicy,
    spec: &PrecodeSpec,
    symbol_size: usize,
    config: &ChannelConfig,
    n_trials: u64,
) -> Result<TrialsReport, SimError> {
    config.validate()?;
    let metrics: Vec<TranscriptMetrics> = (0..n_trials)
        .into_par_iter()
        .map(|trial| {
            let trial_seed = mix_seed(config.rng_seed, trial);
            let message = random_message(spec.k_prime(), symbol_size, trial_seed);
            let trial_config = ChannelConfig {
                rng_seed: trial_seed,
                ..config.clone()
            };
            run_session(policy, spec, &message, &trial_config).map(|t| t.metrics)
        })
        .collect::<Result<_, _>>()?;
    let summary = summarize(&metrics)?;
    Ok(TrialsReport { metrics, summary })
}

/// Erasure pattern source for precode failure measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErasurePattern {
    /// A uniformly random set of `⌊γk⌋` erased codeword positions.
    Uniform,
    /// The positions the truncated protocol actually left unknown in a
    /// full simulated session.
    Protocol,
}

/// Outcome of one precode failure-rate trial.
#[derive(Debug, Clone)]
pub struct PrecodeTrialOutcome {
    pub success: bool,
    pub fallback_used: bool,
    pub xor_count: u64,
    pub erasure_weight: u64,
}

/// Measure one decode attempt of the precode under the chosen erasure
/// pattern. `Protocol` mode runs a lossless zero-latency session and lets
/// the inner protocol pick which `⌊γk⌋` positions stay unknown; it is the
/// only mode that needs a `policy`.
pub fn precode_failure_trial(
    spec: &PrecodeSpec,
    policy: Option<&DegreePolicy>,
    pattern: ErasurePattern,
    seed: u64,
) -> Result<PrecodeTrialOutcome, SimError> {
    let weight = spec.gamma().miss_count(spec.k());
    match pattern {
        ErasurePattern::Uniform => {
            let message = random_message(spec.k_prime(), 1, seed);
            let codeword = precode_encode(spec, &message)?;
            let mut received: Vec<Option<Symbol>> = codeword.into_iter().map(Some).collect();
            if weight > 0 {
                let erased = crate::codec::derive_indices(mix_seed(seed, 1), weight, spec.k())?;
                for &p in &erased {
                    received[p as usize] = None;
                }
            }
            let report = precode_decode(spec, &received)?;
            let success = match report.message {
                Some(recovered) => recovered == message,
                None => false,
            };
            Ok(PrecodeTrialOutcome {
                success,
                fallback_used: report.fallback_used,
                xor_count: report.xor_count,
                erasure_weight: weight,
            })
        }
        ErasurePattern::Protocol => {
            let policy = policy.ok_or(SimError::PatternNeedsPolicy)?;
            let message = random_message(spec.k_prime(), 1, seed);
            let config = ChannelConfig {
                rng_seed: seed,
                ..ChannelConfig::default()
            };
            let transcript = run_session(policy, spec, &message, &config)?;
            let success = transcript.recovered.as_deref() == Some(&message[..]);
            Ok(PrecodeTrialOutcome {
                success,
                fallback_used: transcript.metrics.elimination_fallback_used,
                xor_count: transcript.metrics.precode_decode_xors,
                erasure_weight: weight,
            })
        }
    }
}
