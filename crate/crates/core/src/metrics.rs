//! Per-session cost counters and cross-trial summaries.
//!
//! The three cost measures of interest are processed symbols, feedback
//! messages and symbol-XOR operations; bitmap lookups are tracked separately
//! so "work proportional to the degree" can be read either as XORs alone or
//! as XORs plus membership tests.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::scalar::{from_count, ratio, Scalar};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("cannot summarize an empty list")]
    Empty,
}

/// Counters for one protocol session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptMetrics {
    pub symbols_sent: u64,
    pub symbols_delivered: u64,
    pub symbols_processed: u64,
    pub symbols_decoded: u64,
    pub symbols_discarded: u64,
    pub feedback_sent: u64,
    pub feedback_delivered: u64,
    pub feedback_retransmitted: u64,
    pub payload_xors_receiver: u64,
    pub payload_xors_sender: u64,
    pub precode_decode_xors: u64,
    pub bitmap_lookups: u64,
    pub elimination_fallback_used: bool,
    /// Codeword symbols held by the sender; the overhead ratio is `k / k'`.
    pub encoder_memory_symbols: u64,
    pub decode_success: bool,
    /// Sender observed the termination message before the tick cap.
    pub completed: bool,
    pub ticks: u64,
}

impl TranscriptMetrics {
    /// Flat key -> number view used by the transcript export (booleans as
    /// 0/1). Keys are in a fixed, documented order.
    pub fn to_flat_map(&self) -> BTreeMap<&'static str, f64> {
        let mut m = BTreeMap::new();
        m.insert("symbols_sent", self.symbols_sent as f64);
        m.insert("symbols_delivered", self.symbols_delivered as f64);
        m.insert("symbols_processed", self.symbols_processed as f64);
        m.insert("symbols_decoded", self.symbols_decoded as f64);
        m.insert("symbols_discarded", self.symbols_discarded as f64);
        m.insert("feedback_sent", self.feedback_sent as f64);
        m.insert("feedback_delivered", self.feedback_delivered as f64);
        m.insert("feedback_retransmitted", self.feedback_retransmitted as f64);
        m.insert("payload_xors_receiver", self.payload_xors_receiver as f64);
        m.insert("payload_xors_sender", self.payload_xors_sender as f64);
        m.insert("precode_decode_xors", self.precode_decode_xors as f64);
        m.insert("bitmap_lookups", self.bitmap_lookups as f64);
        m.insert(
            "elimination_fallback_used",
            self.elimination_fallback_used as u8 as f64,
        );
        m.insert("encoder_memory_symbols", self.encoder_memory_symbols as f64);
        m.insert("decode_success", self.decode_success as u8 as f64);
        m.insert("completed", self.completed as u8 as f64);
        m.insert("ticks", self.ticks as f64);
        m
    }
}

/// Mean, sample variance and range of one counter across trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSummary<T> {
    pub n: u64,
    pub mean: T,
    pub variance: T,
    pub min: u64,
    pub max: u64,
}

impl FieldSummary<f64> {
    /// Standard error of the mean.
    pub fn standard_error(&self) -> f64 {
        (self.variance / self.n as f64).sqrt()
    }
}

/// Summarize raw counter values in any scalar type; the mean and sample
/// variance of integer counts are exact when `T` is [`crate::Exact`].
pub fn summarize_values<T: Scalar>(values: &[u64]) -> Result<FieldSummary<T>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = values.len() as u64;
    let mut sum = T::zero();
    for &v in values {
        sum = sum + from_count::<T>(v);
    }
    let mean = sum / from_count::<T>(n);
    let variance = if n == 1 {
        T::zero()
    } else {
        let mut acc = T::zero();
        for &v in values {
            let d = from_count::<T>(v) - mean.clone();
            acc = acc + d.clone() * d;
        }
        acc / from_count::<T>(n - 1)
    };
    Ok(FieldSummary {
        n,
        mean,
        variance,
        min: *values.iter().min().unwrap(),
        max: *values.iter().max().unwrap(),
    })
}

/// Per-field statistics over a list of session metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSummary {
    pub n: u64,
    pub symbols_sent: FieldSummary<f64>,
    pub symbols_delivered: FieldSummary<f64>,
    pub symbols_processed: FieldSummary<f64>,
    pub symbols_decoded: FieldSummary<f64>,
    pub symbols_discarded: FieldSummary<f64>,
    pub feedback_sent: FieldSummary<f64>,
    pub feedback_delivered: FieldSummary<f64>,
    pub feedback_retransmitted: FieldSummary<f64>,
    pub payload_xors_receiver: FieldSummary<f64>,
    pub payload_xors_sender: FieldSummary<f64>,
    pub precode_decode_xors: FieldSummary<f64>,
    pub bitmap_lookups: FieldSummary<f64>,
    pub ticks: FieldSummary<f64>,
    pub elimination_fallback_fraction: f64,
    pub decode_success_fraction: f64,
    pub completed_fraction: f64,
}

/// Statistical summary of every counter, plus fractions for the booleans.
pub fn summarize(metrics: &[TranscriptMetrics]) -> Result<MetricsSummary, MetricsError> {
    if metrics.is_empty() {
        return Err(MetricsError::Empty);
    }
    let n = metrics.len() as u64;
    let field = |f: fn(&TranscriptMetrics) -> u64| -> Result<FieldSummary<f64>, MetricsError> {
        let values: Vec<u64> = metrics.iter().map(f).collect();
        summarize_values(&values)
    };
    let fraction = |f: fn(&TranscriptMetrics) -> bool| -> f64 {
        metrics.iter().filter(|m| f(m)).count() as f64 / n as f64
    };
    Ok(MetricsSummary {
        n,
        symbols_sent: field(|m| m.symbols_sent)?,
        symbols_delivered: field(|m| m.symbols_delivered)?,
        symbols_processed: field(|m| m.symbols_processed)?,
        symbols_decoded: field(|m| m.symbols_decoded)?,
        symbols_discarded: field(|m| m.symbols_discarded)?,
        feedback_sent: field(|m| m.feedback_sent)?,
        feedback_delivered: field(|m| m.feedback_delivered)?,
        feedback_retransmitted: field(|m| m.feedback_retransmitted)?,
        payload_xors_receiver: field(|m| m.payload_xors_receiver)?,
        payload_xors_sender: field(|m| m.payload_xors_sender)?,
        precode_decode_xors: field(|m| m.precode_decode_xors)?,
        bitmap_lookups: field(|m| m.bitmap_lookups)?,
        ticks: field(|m| m.ticks)?,
        elimination_fallback_fraction: fraction(|m| m.elimination_fallback_used),
        decode_success_fraction: fraction(|m| m.decode_success),
        completed_fraction: fraction(|m| m.completed),
    })
}

/// Exact mean of one counter as a rational, for checks that tolerate no
/// float rounding.
pub fn exact_mean(values: &[u64]) -> Result<crate::Exact, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::Empty);
    }
    let mut sum = crate::Exact::from_integer(0.into());
    for &v in values {
        sum += ratio::<crate::Exact>(v, 1);
    }
    Ok(sum / ratio::<crate::Exact>(values.len() as u64, 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Exact;
    use num_bigint::BigInt;

    #[test]
    fn singleton_summary_is_the_element_with_zero_variance() {
        let s = summarize_values::<f64>(&[42]).unwrap();
        assert_eq!(s.mean, 42.0);
        assert_eq!(s.variance, 0.0);
        assert_eq!((s.min, s.max), (42, 42));
    }

    #[test]
    fn equal_elements_have_zero_variance() {
        let s = summarize_values::<f64>(&[7, 7]).unwrap();
        assert_eq!(s.mean, 7.0);
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn known_list_matches_hand_computation() {
        // mean of 1,2,3,4 is 5/2; sample variance is 5/3.
        let s = summarize_values::<Exact>(&[1, 2, 3, 4]).unwrap();
        assert_eq!(s.mean, Exact::new(BigInt::from(5), BigInt::from(2)));
        assert_eq!(s.variance, Exact::new(BigInt::from(5), BigInt::from(3)));
        let f = summarize_values::<f64>(&[1, 2, 3, 4]).unwrap();
        assert!((f.mean - 2.5).abs() < 1e-15);
        assert!((f.variance - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!((f.min, f.max), (1, 4));
    }

    #[test]
    fn empty_list_is_rejected() {
        assert_eq!(summarize_values::<f64>(&[]), Err(MetricsError::Empty));
        assert_eq!(summarize(&[]).unwrap_err(), MetricsError::Empty);
        assert_eq!(exact_mean(&[]).unwrap_err(), MetricsError::Empty);
    }

    #[test]
    fn exact_mean_has_no_rounding() {
        let m = exact_mean(&[1, 2]).unwrap();
        assert_eq!(m, Exact::new(BigInt::from(3), BigInt::from(2)));
    }

    #[test]
    fn summary_over_metrics_list() {
        let a = TranscriptMetrics {
            symbols_processed: 10,
            decode_success: true,
            ..TranscriptMetrics::default()
        };
        let b = TranscriptMetrics {
            symbols_processed: 14,
            ..TranscriptMetrics::default()
        };
        let s = summarize(&[a, b]).unwrap();
        assert_eq!(s.n, 2);
        assert_eq!(s.symbols_processed.mean, 12.0);
        assert_eq!(s.symbols_processed.variance, 8.0);
        assert_eq!(s.decode_success_fraction, 0.5);
    }

    #[test]
    fn flat_map_contains_every_counter() {
        let m = TranscriptMetrics::default();
        let flat = m.to_flat_map();
        assert_eq!(flat.len(), 17);
        assert!(flat.contains_key("symbols_processed"));
        assert!(flat.contains_key("decode_success"));
    }

    #[test]
    fn standard_error_of_constant_sample_is_zero() {
        let s = summarize_values::<f64>(&[3, 3, 3]).unwrap();
        assert_eq!(s.standard_error(), 0.0);
    }
}
