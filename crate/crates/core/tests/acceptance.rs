//! Acceptance gate for the composed code: every claim the library makes
//! about symbol counts, feedback counts, operation counts and decode
//! correctness, each as one test printing a PASS/FAIL line (run with
//! `--nocapture` to see them).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rtec::policy::at_least_one_over_e;
use rtec::{
    brute_force_optimal_degree, compose, composed_symbols_bound, expected_symbols_bound,
    optimal_degree, revealing_probability, run_session, run_trials, ChannelConfig, DegreePolicy,
    ErasurePattern, Event, Exact, Gamma, DEFAULT_PARITY_DEGREE,
};

const POLICY_SCAN_MAX_K: u64 = 300;

fn check(name: &str, ok: bool, detail: &str) {
    println!("{} {name} — {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn gamma_tenth() -> Gamma {
    Gamma::new(1, 10).unwrap()
}

/// The reference configuration of the symbol-count criteria: a 900-symbol
/// message at gamma = 1/10 (block length 1125), clean forward channel,
/// lossless zero-latency feedback.
fn reference_trials(n: u64, erasure: f64, seed: u64) -> (DegreePolicy, rtec::TrialsReport) {
    let (spec, policy) = compose(900, gamma_tenth(), DEFAULT_PARITY_DEGREE, 0xace).unwrap();
    assert_eq!(spec.k(), 1125);
    let config = ChannelConfig {
        forward_erasure_prob: erasure,
        rng_seed: seed,
        ..ChannelConfig::default()
    };
    let report = run_trials(&policy, &spec, 1, &config, n).unwrap();
    (policy, report)
}

#[test]
fn criterion_01_degree_oracle_equivalence() {
    let mut pairs = 0u64;
    for k in 1..=POLICY_SCAN_MAX_K {
        for r in 0..k {
            let closed = optimal_degree(k, r).unwrap();
            let scanned = brute_force_optimal_degree(k, r).unwrap();
            assert_eq!(
                closed, scanned,
                "closed form and exhaustive scan disagree at k={k} r={r}"
            );
            pairs += 1;
        }
    }
    let expected_pairs: u64 = (1..=POLICY_SCAN_MAX_K).sum();
    assert_eq!(pairs, expected_pairs);
    check(
        "criterion 01 (degree-policy oracle equivalence)",
        true,
        &format!("closed form equals exact argmax scan on all {pairs} (k, r) pairs, k <= {POLICY_SCAN_MAX_K}"),
    );
}

#[test]
fn criterion_02_decode_probability_floor() {
    let mut pairs = 0u64;
    let mut min_p: Option<Exact> = None;
    for k in 1..=POLICY_SCAN_MAX_K {
        for r in 0..k {
            let d = optimal_degree(k, r).unwrap();
            let p: Exact = revealing_probability(k, r, d).unwrap();
            assert!(
                at_least_one_over_e(&p),
                "revealing probability below 1/e at k={k} r={r} d={d}"
            );
            min_p = Some(match min_p {
                Some(m) if m <= p => m,
                _ => p,
            });
            pairs += 1;
        }
    }
    check(
        "criterion 02 (decode-probability floor)",
        true,
        &format!(
            "exact p(d(r), r) >= 1/e on all {pairs} pairs; minimum {:.6}",
            rational_to_f64(&min_p.unwrap())
        ),
    );
}

#[test]
fn criterion_03_truncated_symbol_count() {
    let (policy, report) = reference_trials(200, 0.0, 0x31);
    let bound = expected_symbols_bound(policy.k(), policy.gamma().as_f64()).unwrap();
    let mean = report.summary.symbols_processed.mean;
    let se = report.summary.symbols_processed.standard_error();
    check(
        "criterion 03 (truncated symbol count)",
        mean <= bound,
        &format!(
            "mean processed {mean:.2} (se {se:.2}) <= bound {bound:.2} over {} trials, k=1125",
            report.summary.n
        ),
    );
}

#[test]
fn criterion_04_feedback_count() {
    let (policy, report) = reference_trials(200, 0.0, 0x41);
    let budget = policy.feedback_budget();
    let cap = policy.gamma().degree_cap() + 1;
    assert_eq!(
        budget,
        rtec::feedback_budget(policy.k(), policy.gamma()).unwrap()
    );
    let all_exact = report
        .metrics
        .iter()
        .all(|m| m.feedback_sent == budget && m.feedback_retransmitted == 0);
    check(
        "criterion 04 (feedback count)",
        all_exact && budget <= cap && cap == 21,
        &format!(
            "every session sent exactly {budget} feedback messages; budget <= floor(2/gamma)+1 = {cap}"
        ),
    );
}

#[test]
fn criterion_05_composed_symbol_count() {
    let (_, report) = reference_trials(200, 0.0, 0x51);
    let bound = composed_symbols_bound(900, gamma_tenth().as_f64());
    let mean = report.summary.symbols_processed.mean;
    let se = report.summary.symbols_processed.standard_error();
    check(
        "criterion 05 (end-to-end symbol count)",
        mean <= bound,
        &format!(
            "mean processed {mean:.2} (se {se:.2}) <= (1+gamma)*2k' + slack = {bound:.2}, k'=900"
        ),
    );
}

#[test]
fn criterion_06_linear_decoding_scaling() {
    let gamma = gamma_tenth();
    let mut ratios = Vec::new();
    for k_prime in [500u64, 1000, 2000, 4000] {
        let (spec, policy) = compose(k_prime, gamma, DEFAULT_PARITY_DEGREE, 0x61).unwrap();
        let config = ChannelConfig {
            rng_seed: 0x600 + k_prime,
            ..ChannelConfig::default()
        };
        let report = run_trials(&policy, &spec, 1, &config, 100).unwrap();
        let xors_per_message_symbol = (report.summary.payload_xors_receiver.mean
            + report.summary.precode_decode_xors.mean)
            / k_prime as f64;
        ratios.push((k_prime, xors_per_message_symbol));
    }
    let first = ratios[0].1;
    let last = ratios[3].1;
    let detail = ratios
        .iter()
        .map(|(k, r)| format!("k'={k}: {r:.3}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        "criterion 06 (linear decoding scaling)",
        last <= 1.15 * first,
        &format!(
            "decode XORs per message symbol stay flat ({detail}); 4000 vs 500 ratio {:.4}",
            last / first
        ),
    );
}

#[test]
fn criterion_07_erasure_rate_obliviousness() {
    let runs: Vec<_> = [(0.0, 0x71u64), (0.25, 0x72), (0.5, 0x73)]
        .iter()
        .map(|&(erasure, seed)| {
            let (_, report) = reference_trials(200, erasure, seed);
            (
                erasure,
                report.summary.symbols_processed.mean,
                report.summary.symbols_processed.standard_error(),
            )
        })
        .collect();
    let mut ok = true;
    let mut details = Vec::new();
    for i in 0..runs.len() {
        for j in i + 1..runs.len() {
            let (ea, ma, sa) = runs[i];
            let (eb, mb, sb) = runs[j];
            let diff = (ma - mb).abs();
            let limit = 3.0 * (sa * sa + sb * sb).sqrt();
            ok &= diff <= limit;
            details.push(format!("|{ea} vs {eb}| = {diff:.1} <= {limit:.1}"));
        }
    }
    check(
        "criterion 07 (erasure-rate obliviousness)",
        ok,
        &format!(
            "mean processed at erasure 0/0.25/0.5: {:.1}/{:.1}/{:.1}; {}",
            runs[0].1,
            runs[1].1,
            runs[2].1,
            details.join(", ")
        ),
    );
}

#[test]
fn criterion_08_correctness_roundtrip() {
    let gammas = [
        Gamma::new(1, 10).unwrap(),
        Gamma::new(3, 20).unwrap(),
        Gamma::new(1, 5).unwrap(),
        Gamma::new(1, 4).unwrap(),
        Gamma::new(3, 10).unwrap(),
        Gamma::new(2, 5).unwrap(),
    ];
    let sessions: Vec<u64> = (0..1000).collect();
    let successes: u64 = sessions
        .par_iter()
        .map(|&i| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x8000 + i);
            let gamma = gammas[rng.gen_range(0..gammas.len())];
            let k_min = gamma.min_block_length();
            let k_prime_min = (k_min * (gamma.denom() - 2 * gamma.numer())).div_ceil(gamma.denom());
            let k_prime = k_prime_min + rng.gen_range(0..150);
            let (spec, policy) = compose(k_prime, gamma, DEFAULT_PARITY_DEGREE, rng.gen()).unwrap();
            let symbol_size = [1usize, 2, 4][rng.gen_range(0..3)];
            let message = rtec::random_message(k_prime, symbol_size, rng.gen());
            let config = ChannelConfig {
                forward_erasure_prob: rng.gen_range(0.0..0.6),
                feedback_loss_prob: rng.gen_range(0.0..0.4),
                feedback_latency: rng.gen_range(0..20),
                rng_seed: rng.gen(),
                max_ticks: None,
            };
            let t = run_session(&policy, &spec, &message, &config).unwrap();
            assert!(
                t.metrics.completed,
                "session {i} hit the tick cap (gamma={gamma}, k'={k_prime})"
            );
            if t.metrics.decode_success {
                assert_eq!(
                    t.recovered.as_deref(),
                    Some(&message[..]),
                    "session {i} recovered a wrong message"
                );
                1
            } else {
                assert!(t.recovered.is_none());
                0
            }
        })
        .sum();
    check(
        "criterion 08 (correctness round trip)",
        true,
        &format!(
            "1000 randomized sessions: {successes} decoded, all of them exactly; no session produced a wrong message"
        ),
    );
}

#[test]
fn criterion_09_precode_failure_trend() {
    let gamma = gamma_tenth();
    let trials = 500u64;
    let mut rates = Vec::new();
    for (k_target, k_prime) in [(1000u64, 800u64), (2000, 1600), (5000, 4000), (10000, 8000)] {
        let (spec, policy) = compose(k_prime, gamma, DEFAULT_PARITY_DEGREE, 0x91).unwrap();
        assert_eq!(spec.k(), k_target);
        let failures: u64 = (0..trials)
            .into_par_iter()
            .map(|t| {
                let out = rtec::precode_failure_trial(
                    &spec,
                    Some(&policy),
                    ErasurePattern::Uniform,
                    rtec::mix_seed(0x900 + k_target, t),
                )
                .unwrap();
                (!out.success) as u64
            })
            .sum();
        rates.push((k_target, failures as f64 / trials as f64));
    }
    let nonincreasing = rates.windows(2).all(|w| w[1].1 <= w[0].1);
    let detail = rates
        .iter()
        .map(|(k, rate)| format!("k={k}: {rate:.4}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        "criterion 09 (precode failure trend)",
        nonincreasing,
        &format!("uniform weight-floor(gamma*k) erasures, {trials} trials each: {detail}"),
    );
}

#[test]
fn criterion_10_degree_sync_invariant() {
    let (spec, policy) = compose(900, gamma_tenth(), DEFAULT_PARITY_DEGREE, 0xa1).unwrap();
    let mut decode_events = 0u64;
    for session in 0..100u64 {
        let message = rtec::random_message(900, 1, 0xa100 + session);
        let config = ChannelConfig {
            forward_erasure_prob: 0.25,
            rng_seed: 0xa200 + session,
            ..ChannelConfig::default()
        };
        let t = run_session(&policy, &spec, &message, &config).unwrap();
        for event in &t.events {
            match *event {
                // With zero-latency feedback every processed symbol, and in
                // particular every decode, must carry the schedule degree for
                // the receiver's current count.
                Event::SymbolProcessed {
                    degree,
                    known_before,
                    ..
                } => {
                    assert_eq!(
                        degree,
                        optimal_degree(policy.k(), known_before).unwrap(),
                        "session {session}: processed symbol off schedule"
                    );
                }
                Event::SymbolDecoded {
                    degree,
                    known_after,
                    ..
                } => {
                    decode_events += 1;
                    assert_eq!(
                        degree,
                        optimal_degree(policy.k(), known_after - 1).unwrap(),
                        "session {session}: decode event off schedule"
                    );
                }
                _ => {}
            }
        }
    }
    check(
        "criterion 10 (degree-sync invariant)",
        true,
        &format!(
            "sender degree equals optimal_degree(k, r) at all {decode_events} decode events across 100 sessions"
        ),
    );
}

fn rational_to_f64(x: &Exact) -> f64 {
    use num_traits::ToPrimitive;
    x.to_f64().unwrap_or(f64::NAN)
}
