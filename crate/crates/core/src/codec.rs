//! Sender and receiver state machines of the truncated decode-or-discard
//! protocol.
//!
//! The sender streams XOR combinations of codeword symbols at the degree the
//! schedule currently prescribes. The receiver processes each delivered
//! symbol immediately: if exactly one of its constituents is unknown it
//! decodes that position, otherwise the symbol is dropped on the spot. A
//! single-bit acknowledgement bumps the sender's degree at each schedule
//! transition and a termination byte stops the stream once the recovery
//! target is reached.
//!
//! Encoding symbols carry a 64-bit seed instead of an explicit index list;
//! both ends derive the index set with the same seeded partial Fisher-Yates
//! draw, so the wire cost per symbol is constant.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use thiserror::Error;

use crate::policy::DegreePolicy;
use crate::symbol::{xor_accumulate, Symbol, SymbolError};

/// Processed symbols a receiver waits for while the observed degree stays
/// stale before re-sending a pending feedback message (about three expected
/// decodes' worth of arrivals).
pub const RETRANSMIT_AFTER_PROCESSED: u64 = 9;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CodecError {
    #[error("encoding degree {d} outside [1, {k}]")]
    DegreeOutOfRange { d: u64, k: u64 },
    #[error("sender already received a termination message")]
    Terminated,
    #[error("receiver already reached its recovery target")]
    ReceiverComplete,
    #[error("degree increment beyond schedule maximum {max}")]
    DegreeAboveMax { max: u64 },
    #[error("codeword has {actual} symbols, schedule expects k={expected}")]
    CodewordLength { expected: u64, actual: usize },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("wire frame has {actual} bytes, expected {expected}")]
    WireLength { expected: usize, actual: usize },
    #[error("degree {0} does not fit the 16-bit wire field")]
    DegreeTooWide(u64),
    #[error("unknown feedback byte 0x{0:02x}")]
    UnknownFeedbackByte(u8),
}

/// One channel packet: an XOR of `degree` codeword symbols plus the seed
/// that identifies which ones.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingSymbol {
    pub payload: Symbol,
    pub degree: u64,
    pub index_seed: u64,
}

impl EncodingSymbol {
    /// Wire layout: degree as big-endian `u16`, seed as big-endian `u64`,
    /// then the raw payload octets.
    pub const HEADER_LEN: usize = 2 + 8;

    pub fn to_bytes(&self) -> Result<Vec<u8>, CodecError> {
        let degree =
            u16::try_from(self.degree).map_err(|_| CodecError::DegreeTooWide(self.degree))?;
        let mut out = Vec::with_capacity(Self::HEADER_LEN + self.payload.len());
        out.extend_from_slice(&degree.to_be_bytes());
        out.extend_from_slice(&self.index_seed.to_be_bytes());
        out.extend_from_slice(self.payload.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8], symbol_size: usize) -> Result<Self, CodecError> {
        let expected = Self::HEADER_LEN + symbol_size;
        if buf.len() != expected {
            return Err(CodecError::WireLength {
                expected,
                actual: buf.len(),
            });
        }
        let degree = u16::from_be_bytes([buf[0], buf[1]]) as u64;
        let index_seed = u64::from_be_bytes(buf[2..10].try_into().expect("8 bytes"));
        Ok(EncodingSymbol {
            payload: Symbol::from_bytes(&buf[10..]),
            degree,
            index_seed,
        })
    }
}

/// Single-octet feedback message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FeedbackMessage {
    /// Raise the encoding degree by one.
    IncrementDegree,
    /// Recovery target reached; stop transmitting.
    Terminate,
}

impl FeedbackMessage {
    pub fn to_byte(self) -> u8 {
        match self {
            FeedbackMessage::IncrementDegree => 0x01,
            FeedbackMessage::Terminate => 0x02,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self, CodecError> {
        match b {
            0x01 => Ok(FeedbackMessage::IncrementDegree),
            0x02 => Ok(FeedbackMessage::Terminate),
            other => Err(CodecError::UnknownFeedbackByte(other)),
        }
    }
}

/// Deterministic seed mixer (SplitMix64): derives independent child seeds
/// from a base seed and an index.
pub fn mix_seed(base: u64, index: u64) -> u64 {
    let mut z = base
        .wrapping_add(index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive the index set of an encoding symbol: `degree` distinct positions
/// in `[0, k)`, uniform over all such sets for a uniform seed.
///
/// Implemented as a seeded partial Fisher-Yates shuffle (first `degree`
/// draws) over a sparse swap overlay, so the cost is `O(degree)` regardless
/// of `k`. Sender and receiver call this with identical arguments and obtain
/// identical sets.
pub fn derive_indices(index_seed: u64, degree: u64, k: u64) -> Result<Vec<u64>, CodecError> {
    if degree == 0 || degree > k {
        return Err(CodecError::DegreeOutOfRange { d: degree, k });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(index_seed);
    let mut swapped: HashMap<u64, u64> = HashMap::with_capacity(degree as usize * 2);
    let mut out = Vec::with_capacity(degree as usize);
    for i in 0..degree {
        let j = rng.gen_range(i..k);
        let pick = *swapped.get(&j).unwrap_or(&j);
        let displaced = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, displaced);
        out.push(pick);
    }
    Ok(out)
}

/// Sender side: owns the precoded codeword and the current encoding degree.
#[derive(Debug, Clone)]
pub struct Sender {
    policy: DegreePolicy,
    codeword: Vec<Symbol>,
    current_degree: u64,
    terminated: bool,
    payload_xors: u64,
}

impl Sender {
    pub fn new(policy: DegreePolicy, codeword: Vec<Symbol>) -> Result<Self, CodecError> {
        if codeword.len() as u64 != policy.k() {
            return Err(CodecError::CodewordLength {
                expected: policy.k(),
                actual: codeword.len(),
            });
        }
        Ok(Sender {
            policy,
            codeword,
            current_degree: 1,
            terminated: false,
            payload_xors: 0,
        })
    }

    /// Draw a fresh seed, derive the index set at the current degree and XOR
    /// the corresponding codeword symbols into one encoding symbol.
    /// Costs exactly `degree - 1` counted payload XORs.
    pub fn next_symbol(&mut self, rng: &mut impl RngCore) -> Result<EncodingSymbol, CodecError> {
        if self.terminated {
            return Err(CodecError::Terminated);
        }
        let index_seed = rng.next_u64();
        let degree = self.current_degree;
        let indices = derive_indices(index_seed, degree, self.policy.k())?;
        let mut payload = self.codeword[indices[0] as usize].clone();
        for &i in &indices[1..] {
            xor_accumulate(
                &mut payload,
                &self.codeword[i as usize],
                &mut self.payload_xors,
            )?;
        }
        Ok(EncodingSymbol {
            payload,
            degree,
            index_seed,
        })
    }

    pub fn on_feedback(&mut self, msg: FeedbackMessage) -> Result<(), CodecError> {
        match msg {
            FeedbackMessage::IncrementDegree => {
                if self.current_degree >= self.policy.max_degree() {
                    return Err(CodecError::DegreeAboveMax {
                        max: self.policy.max_degree(),
                    });
                }
                self.current_degree += 1;
                Ok(())
            }
            FeedbackMessage::Terminate => {
                self.terminated = true;
                Ok(())
            }
        }
    }

    pub fn current_degree(&self) -> u64 {
        self.current_degree
    }

    pub fn terminated(&self) -> bool {
        self.terminated
    }

    pub fn payload_xors(&self) -> u64 {
        self.payload_xors
    }

    pub fn codeword(&self) -> &[Symbol] {
        &self.codeword
    }
}

/// What processing one encoding symbol did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolOutcome {
    Decoded { position: u64 },
    Discarded,
}

/// Outcome plus any feedback the receiver wants sent (at most an increment
/// acknowledgement followed by the termination message).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcessOutcome {
    pub outcome: SymbolOutcome,
    pub feedback: Vec<FeedbackMessage>,
}

/// Receiver side: known-position bitmap, known-symbol store and the decode
/// counter. Memory stays at `k` bits + `k` symbol slots + one processing
/// buffer; nothing undecodable is ever retained.
#[derive(Debug, Clone)]
pub struct Receiver {
    policy: DegreePolicy,
    known: Vec<bool>,
    store: Vec<Option<Symbol>>,
    known_count: u64,
    desired_degree: u64,
    /// Processed symbols in a row whose degree lagged `desired_degree`.
    stale_processed: u64,
    post_completion_arrivals: u64,
    payload_xors: u64,
    bitmap_lookups: u64,
    decoded: u64,
    discarded: u64,
    processed: u64,
    retransmissions: u64,
}

impl Receiver {
    pub fn new(policy: DegreePolicy) -> Self {
        let k = policy.k() as usize;
        Receiver {
            policy,
            known: vec![false; k],
            store: vec![None; k],
            known_count: 0,
            desired_degree: 1,
            stale_processed: 0,
            post_completion_arrivals: 0,
            payload_xors: 0,
            bitmap_lookups: 0,
            decoded: 0,
            discarded: 0,
            processed: 0,
            retransmissions: 0,
        }
    }

    /// Process one delivered encoding symbol. Decodes it if exactly one of
    /// its constituents is unknown (costing `degree - 1` payload XORs),
    /// discards it otherwise (membership tests only, zero payload XORs).
    pub fn process(&mut self, sym: EncodingSymbol) -> Result<ProcessOutcome, CodecError> {
        if self.is_complete() {
            return Err(CodecError::ReceiverComplete);
        }
        let k = self.policy.k();
        let degree = sym.degree;
        if degree == 0 || degree > k {
            return Err(CodecError::DegreeOutOfRange { d: degree, k });
        }
        let mut feedback = Vec::new();
        if degree >= self.desired_degree {
            self.stale_processed = 0;
        } else {
            // The sender is still on an older degree: either the ack is in
            // flight or it was lost. After enough stale arrivals, resend.
            self.stale_processed += 1;
            if self.stale_processed >= RETRANSMIT_AFTER_PROCESSED {
                feedback.push(FeedbackMessage::IncrementDegree);
                self.retransmissions += 1;
                self.stale_processed = 0;
            }
        }

        let indices = derive_indices(sym.index_seed, degree, k)?;
        self.bitmap_lookups += degree;
        let mut unknown_count = 0u64;
        let mut unknown_pos = 0u64;
        for &i in &indices {
            if !self.known[i as usize] {
                unknown_count += 1;
                unknown_pos = i;
            }
        }

        let outcome = if unknown_count == 1 {
            let mut payload = sym.payload;
            for &i in &indices {
                if i != unknown_pos {
                    let stored = self.store[i as usize]
                        .as_ref()
                        .expect("bitmap and store agree");
                    xor_accumulate(&mut payload, stored, &mut self.payload_xors)?;
                }
            }
            self.known[unknown_pos as usize] = true;
            self.store[unknown_pos as usize] = Some(payload);
            self.known_count += 1;
            self.decoded += 1;
            let new_desired = self.policy.degree_at(self.known_count);
            if new_desired != self.desired_degree {
                debug_assert_eq!(new_desired, self.desired_degree + 1);
                self.desired_degree = new_desired;
                self.stale_processed = 0;
                feedback.push(FeedbackMessage::IncrementDegree);
            }
            if self.known_count == self.policy.target() {
                feedback.push(FeedbackMessage::Terminate);
            }
            SymbolOutcome::Decoded {
                position: unknown_pos,
            }
        } else {
            self.discarded += 1;
            SymbolOutcome::Discarded
        };
        self.processed += 1;
        Ok(ProcessOutcome { outcome, feedback })
    }

    /// Bookkeeping for symbols that arrive after the target was reached
    /// (possible under feedback latency or loss). Re-emits the termination
    /// message periodically until the stream stops.
    pub fn post_completion_arrival(&mut self) -> Option<FeedbackMessage> {
        debug_assert!(self.is_complete());
        self.post_completion_arrivals += 1;
        if self
            .post_completion_arrivals
            .is_multiple_of(RETRANSMIT_AFTER_PROCESSED)
        {
            self.retransmissions += 1;
            Some(FeedbackMessage::Terminate)
        } else {
            None
        }
    }

    pub fn is_complete(&self) -> bool {
        self.known_count >= self.policy.target()
    }

    pub fn known_count(&self) -> u64 {
        self.known_count
    }

    pub fn desired_degree(&self) -> u64 {
        self.desired_degree
    }

    /// The receiver's view of the codeword: decoded slots are `Some`.
    pub fn received(&self) -> &[Option<Symbol>] {
        &self.store
    }

    pub fn into_received(self) -> Vec<Option<Symbol>> {
        self.store
    }

    pub fn payload_xors(&self) -> u64 {
        self.payload_xors
    }

    pub fn bitmap_lookups(&self) -> u64 {
        self.bitmap_lookups
    }

    pub fn decoded(&self) -> u64 {
        self.decoded
    }

    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn retransmissions(&self) -> u64 {
        self.retransmissions
    }
}
