//! Experiment CLI for the composed rateless erasure code.
//!
//! Subcommands: `run` (seeded Monte-Carlo sessions at one configuration),
//! `sweep` (one aggregate row per value of a numeric parameter),
//! `verify-policy` (exhaustive degree-schedule checks against the exact
//! oracle) and `precode-failure` (precode failure-rate measurement).
//!
//! Exit codes: 0 on success / all assertions passing, 1 on validation
//! errors, 2 when `verify-policy` finds a counterexample.

mod output;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use std::path::PathBuf;

use output::{Format, ResultsTable};
use rtec::policy::at_least_one_over_e;
use rtec::{
    brute_force_optimal_degree, composed_symbols_bound, expected_symbols_bound, mix_seed,
    optimal_degree, revealing_probability, run_session, run_trials, ChannelConfig, DegreePolicy,
    ErasurePattern, Exact, Gamma, PrecodeSpec, TrialsReport,
};

#[derive(Parser)]
#[command(
    name = "rtec",
    version,
    about = "Experiment runner for feedback-tuned rateless erasure coding over a simulated erasure channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded Monte-Carlo sessions at one configuration and report
    /// aggregate metrics next to the analytic bounds.
    Run(RunArgs),
    /// Sweep one numeric parameter; one aggregate row per value.
    Sweep(SweepArgs),
    /// Exhaustively check the closed-form degree schedule against the exact
    /// argmax oracle and the 1/e revealing-probability floor.
    VerifyPolicy(VerifyPolicyArgs),
    /// Measure precode decode-failure rates under uniform and/or
    /// protocol-generated erasure patterns.
    PrecodeFailure(PrecodeFailureArgs),
}

#[derive(Args, Clone)]
struct CodeArgs {
    /// Message length in symbols.
    #[arg(long = "k-prime", default_value_t = 900)]
    k_prime: u64,
    /// Truncation fraction, a decimal or fraction in (0, 1/2), e.g. 0.1 or 1/10.
    #[arg(long, default_value = "0.1")]
    gamma: String,
    /// Symbol payload size in bytes.
    #[arg(long = "symbol-size", default_value_t = 1)]
    symbol_size: usize,
    /// Column weight of the precode parity graph.
    #[arg(long = "parity-degree", default_value_t = rtec::DEFAULT_PARITY_DEGREE)]
    parity_degree: u64,
}

#[derive(Args, Clone)]
struct ChannelArgs {
    /// Forward-channel symbol erasure probability, in [0, 1).
    #[arg(long = "erasure-rate", default_value_t = 0.0)]
    erasure_rate: f64,
    /// Feedback delivery delay in forward-symbol slots.
    #[arg(long = "feedback-latency", default_value_t = 0)]
    feedback_latency: u64,
    /// Feedback-channel loss probability, in [0, 1).
    #[arg(long = "feedback-loss", default_value_t = 0.0)]
    feedback_loss: f64,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Number of independent trials.
    #[arg(long, default_value_t = 100)]
    trials: u64,
    /// Base seed; every per-trial seed derives from it.
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Results format.
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Results path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Also write trial 0's full event log (line-delimited JSON) here.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    channel: ChannelArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Parameter to sweep: k-prime, gamma, symbol-size, parity-degree,
    /// erasure-rate, feedback-latency or feedback-loss.
    #[arg(long)]
    axis: String,
    /// Comma-separated values for the swept parameter.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
}

#[derive(Args)]
struct VerifyPolicyArgs {
    /// Check every (k, r) with k up to this bound.
    #[arg(long = "k-max", default_value_t = 300)]
    k_max: u64,
}

#[derive(Args)]
struct PrecodeFailureArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[command(flatten)]
    output: OutputArgs,
    /// Measure these message lengths instead of --k-prime (comma-separated).
    #[arg(long = "k-prime-values", value_delimiter = ',')]
    k_prime_values: Option<Vec<u64>>,
    /// Erasure pattern source: uniform, protocol or both.
    #[arg(long, default_value = "both")]
    patterns: String,
}

fn main() {
    std::process::exit(run());
}

fn run() -> i32 {
    use clap::error::ErrorKind;
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let _ = e.print();
            return 1;
        }
    };
    let result = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::VerifyPolicy(args) => cmd_verify_policy(args),
        Command::PrecodeFailure(args) => cmd_precode_failure(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

/// Fully resolved single-run parameters.
#[derive(Clone)]
struct Params {
    k_prime: u64,
    gamma: Gamma,
    symbol_size: usize,
    parity_degree: u64,
    erasure_rate: f64,
    feedback_latency: u64,
    feedback_loss: f64,
    trials: u64,
    seed: u64,
}

impl Params {
    fn resolve(code: &CodeArgs, channel: &ChannelArgs, output: &OutputArgs) -> Result<Self> {
        let gamma: Gamma = code
            .gamma
            .parse()
            .with_context(|| format!("invalid --gamma {:?}", code.gamma))?;
        if output.trials == 0 {
            bail!("--trials must be at least 1");
        }
        if code.symbol_size == 0 {
            bail!("--symbol-size must be at least 1");
        }
        let p = Params {
            k_prime: code.k_prime,
            gamma,
            symbol_size: code.symbol_size,
            parity_degree: code.parity_degree,
            erasure_rate: channel.erasure_rate,
            feedback_latency: channel.feedback_latency,
            feedback_loss: channel.feedback_loss,
            trials: output.trials,
            seed: output.seed,
        };
        p.channel_config().validate()?;
        Ok(p)
    }

    fn compose(&self) -> Result<(PrecodeSpec, DegreePolicy)> {
        rtec::compose(self.k_prime, self.gamma, self.parity_degree, self.seed)
            .context("invalid code parameters")
    }

    fn channel_config(&self) -> ChannelConfig {
        ChannelConfig {
            forward_erasure_prob: self.erasure_rate,
            feedback_loss_prob: self.feedback_loss,
            feedback_latency: self.feedback_latency,
            rng_seed: self.seed,
            max_ticks: None,
        }
    }

    fn config_json(&self, command: &str) -> Value {
        json!({
            "command": command,
            "k_prime": self.k_prime,
            "gamma": self.gamma.to_string(),
            "gamma_f64": self.gamma.as_f64(),
            "symbol_size": self.symbol_size,
            "parity_degree": self.parity_degree,
            "erasure_rate": self.erasure_rate,
            "feedback_latency": self.feedback_latency,
            "feedback_loss": self.feedback_loss,
            "trials": self.trials,
            "seed": self.seed,
        })
    }
}

const RUN_COLUMNS: &[&str] = &[
    "k_prime",
    "k",
    "gamma",
    "symbol_size",
    "parity_degree",
    "erasure_rate",
    "feedback_latency",
    "feedback_loss",
    "trials",
    "seed",
    "mean_processed",
    "se_processed",
    "bound_processed",
    "mean_feedback",
    "bound_feedback",
    "bound_composed",
    "mean_sent",
    "mean_delivered",
    "mean_decoded",
    "mean_discarded",
    "mean_feedback_retransmitted",
    "mean_payload_xors_receiver",
    "mean_payload_xors_sender",
    "mean_precode_decode_xors",
    "mean_bitmap_lookups",
    "fallback_fraction",
    "success_fraction",
    "completed_fraction",
    "mean_ticks",
];

fn aggregate_row(p: &Params, policy: &DegreePolicy, report: &TrialsReport) -> Vec<Value> {
    let s = &report.summary;
    let bound_processed =
        expected_symbols_bound(policy.k(), p.gamma.as_f64()).expect("validated gamma");
    vec![
        json!(p.k_prime),
        json!(policy.k()),
        json!(p.gamma.as_f64()),
        json!(p.symbol_size),
        json!(p.parity_degree),
        json!(p.erasure_rate),
        json!(p.feedback_latency),
        json!(p.feedback_loss),
        json!(p.trials),
        json!(p.seed),
        json!(s.symbols_processed.mean),
        json!(s.symbols_processed.standard_error()),
        json!(bound_processed),
        json!(s.feedback_sent.mean),
        json!(policy.feedback_budget()),
        json!(composed_symbols_bound(p.k_prime, p.gamma.as_f64())),
        json!(s.symbols_sent.mean),
        json!(s.symbols_delivered.mean),
        json!(s.symbols_decoded.mean),
        json!(s.symbols_discarded.mean),
        json!(s.feedback_retransmitted.mean),
        json!(s.payload_xors_receiver.mean),
        json!(s.payload_xors_sender.mean),
        json!(s.precode_decode_xors.mean),
        json!(s.bitmap_lookups.mean),
        json!(s.elimination_fallback_fraction),
        json!(s.decode_success_fraction),
        json!(s.completed_fraction),
        json!(s.ticks.mean),
    ]
}

fn run_one(p: &Params) -> Result<(DegreePolicy, TrialsReport)> {
    let (spec, policy) = p.compose()?;
    let report = run_trials(&policy, &spec, p.symbol_size, &p.channel_config(), p.trials)?;
    Ok((policy, report))
}

fn cmd_run(args: RunArgs) -> Result<i32> {
    let p = Params::resolve(&args.code, &args.channel, &args.output)?;
    let (policy, report) = run_one(&p)?;
    if let Some(path) = &args.transcript {
        write_trial_transcript(&p, path)?;
    }
    let table = ResultsTable {
        config: p.config_json("run"),
        columns: RUN_COLUMNS,
        rows: vec![aggregate_row(&p, &policy, &report)],
    };
    table.write(args.output.format, args.output.out.as_deref())?;
    Ok(0)
}

/// Re-run trial 0 of the aggregate and export its full event log.
fn write_trial_transcript(p: &Params, path: &PathBuf) -> Result<()> {
    let (spec, policy) = p.compose()?;
    let trial_seed = mix_seed(p.seed, 0);
    let message = rtec::random_message(p.k_prime, p.symbol_size, trial_seed);
    let config = ChannelConfig {
        rng_seed: trial_seed,
        ..p.channel_config()
    };
    let transcript = run_session(&policy, &spec, &message, &config)?;
    let file = output::open_out(path)?;
    transcript
        .write_jsonl(file)
        .with_context(|| format!("writing transcript to {}", path.display()))?;
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<i32> {
    let base = Params::resolve(&args.code, &args.channel, &args.output)?;
    let mut rows = Vec::new();
    for raw in &args.values {
        let mut p = base.clone();
        apply_axis(&mut p, &args.axis, raw)?;
        p.channel_config().validate()?;
        let (policy, report) = run_one(&p)?;
        rows.push(aggregate_row(&p, &policy, &report));
    }
    let mut config = base.config_json("sweep");
    config["axis"] = json!(args.axis);
    config["values"] = json!(args.values);
    let table = ResultsTable {
        config,
        columns: RUN_COLUMNS,
        rows,
    };
    table.write(args.output.format, args.output.out.as_deref())?;
    Ok(0)
}

fn apply_axis(p: &mut Params, axis: &str, raw: &str) -> Result<()> {
    let parse = |what: &str| format!("invalid {what} value {raw:?}");
    match axis {
        "k-prime" => p.k_prime = raw.parse().with_context(|| parse("k-prime"))?,
        "gamma" => p.gamma = raw.parse().with_context(|| parse("gamma"))?,
        "symbol-size" => p.symbol_size = raw.parse().with_context(|| parse("symbol-size"))?,
        "parity-degree" => p.parity_degree = raw.parse().with_context(|| parse("parity-degree"))?,
        "erasure-rate" => p.erasure_rate = raw.parse().with_context(|| parse("erasure-rate"))?,
        "feedback-latency" => {
            p.feedback_latency = raw.parse().with_context(|| parse("feedback-latency"))?
        }
        "feedback-loss" => p.feedback_loss = raw.parse().with_context(|| parse("feedback-loss"))?,
        other => bail!(
            "unknown sweep axis {other:?}; expected one of k-prime, gamma, symbol-size, \
             parity-degree, erasure-rate, feedback-latency, feedback-loss"
        ),
    }
    Ok(())
}

fn cmd_verify_policy(args: VerifyPolicyArgs) -> Result<i32> {
    if args.k_max < 2 {
        bail!("--k-max must be at least 2");
    }
    let mut pairs = 0u64;
    for k in 1..=args.k_max {
        for r in 0..k {
            let closed = optimal_degree(k, r)?;
            let scanned = brute_force_optimal_degree(k, r)?;
            if closed != scanned {
                println!(
                    "counterexample: k={k} r={r}: closed form gives {closed}, exact scan gives {scanned}"
                );
                return Ok(2);
            }
            let p: Exact = revealing_probability(k, r, closed)?;
            if !at_least_one_over_e(&p) {
                println!("counterexample: k={k} r={r} d={closed}: revealing probability below 1/e");
                return Ok(2);
            }
            pairs += 1;
        }
    }
    println!(
        "verified {pairs} (k, r) pairs for k <= {}: closed-form degree matches the exact \
         argmax scan and p(d(r), r) >= 1/e throughout",
        args.k_max
    );
    Ok(0)
}

const PRECODE_COLUMNS: &[&str] = &[
    "pattern",
    "k_prime",
    "k",
    "gamma",
    "symbol_size",
    "parity_degree",
    "trials",
    "seed",
    "erasure_weight",
    "failures",
    "failure_rate",
    "fallback_fraction",
    "mean_decode_xors",
];

fn cmd_precode_failure(args: PrecodeFailureArgs) -> Result<i32> {
    let channel = ChannelArgs {
        erasure_rate: 0.0,
        feedback_latency: 0,
        feedback_loss: 0.0,
    };
    let base = Params::resolve(&args.code, &channel, &args.output)?;
    let patterns: Vec<ErasurePattern> = match args.patterns.as_str() {
        "uniform" => vec![ErasurePattern::Uniform],
        "protocol" => vec![ErasurePattern::Protocol],
        "both" => vec![ErasurePattern::Uniform, ErasurePattern::Protocol],
        other => bail!("unknown --patterns {other:?}; expected uniform, protocol or both"),
    };
    let k_primes = args
        .k_prime_values
        .clone()
        .unwrap_or_else(|| vec![base.k_prime]);

    let mut rows = Vec::new();
    for &k_prime in &k_primes {
        let spec = PrecodeSpec::new(k_prime, base.gamma, base.parity_degree, base.seed)
            .context("invalid precode parameters")?;
        for &pattern in &patterns {
            let policy = match pattern {
                ErasurePattern::Protocol => {
                    Some(DegreePolicy::new(spec.k(), base.gamma).with_context(|| {
                        format!(
                            "protocol-pattern rows need a valid degree schedule for k={}",
                            spec.k()
                        )
                    })?)
                }
                ErasurePattern::Uniform => None,
            };
            let outcomes: Vec<_> = (0..base.trials)
                .into_par_iter()
                .map(|t| {
                    rtec::precode_failure_trial(
                        &spec,
                        policy.as_ref(),
                        pattern,
                        mix_seed(base.seed ^ k_prime, t),
                    )
                })
                .collect::<Result<_, _>>()?;
            let failures = outcomes.iter().filter(|o| !o.success).count() as u64;
            let fallbacks = outcomes.iter().filter(|o| o.fallback_used).count() as u64;
            let mean_xors =
                outcomes.iter().map(|o| o.xor_count).sum::<u64>() as f64 / base.trials as f64;
            rows.push(vec![
                json!(pattern_name(pattern)),
                json!(k_prime),
                json!(spec.k()),
                json!(base.gamma.as_f64()),
                json!(base.symbol_size),
                json!(base.parity_degree),
                json!(base.trials),
                json!(base.seed),
                json!(outcomes[0].erasure_weight),
                json!(failures),
                json!(failures as f64 / base.trials as f64),
                json!(fallbacks as f64 / base.trials as f64),
                json!(mean_xors),
            ]);
        }
    }
    let mut config = base.config_json("precode-failure");
    config["k_prime_values"] = json!(k_primes);
    config["patterns"] = json!(args.patterns);
    let table = ResultsTable {
        config,
        columns: PRECODE_COLUMNS,
        rows,
    };
    table.write(args.output.format, args.output.out.as_deref())?;
    Ok(0)
}

fn pattern_name(p: ErasurePattern) -> &'static str {
    match p {
        ErasurePattern::Uniform => "uniform",
        ErasurePattern::Protocol => "protocol",
    }
}
