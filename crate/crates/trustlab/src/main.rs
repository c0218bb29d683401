use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trustlab::cli::{self, Command as RunCommand, RunConfig};
use trustlab::models::Variant;

#[derive(Parser)]
#[command(name = "trustlab", version, about = "Synthetic judge-advisor experiments, advice analytics and trust-network simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct CommonArgs {
    /// Run seed; falls back to $TRUSTLAB_SEED, then 0
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory
    #[arg(long)]
    out: Option<PathBuf>,
    /// Configuration file (or a previously emitted manifest.toml)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Validate only: print violations and exit without running
    #[arg(long)]
    check: bool,
}

#[derive(Args, Clone, Default)]
struct ExperimentArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Show trial-level feedback to the judge
    #[arg(long, overrides_with = "no_feedback")]
    feedback: bool,
    #[arg(long = "no-feedback")]
    no_feedback: bool,
    /// Model variants to run (comma-separated: acc,cons,conf)
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    /// Number of independent sessions
    #[arg(long)]
    sessions: Option<u32>,
    #[arg(long)]
    blocks: Option<u32>,
    #[arg(long = "trials-per-block")]
    trials_per_block: Option<u32>,
    #[arg(long = "scale-steps")]
    scale_steps: Option<u32>,
    #[arg(long = "practice-trials")]
    practice_trials: Option<u32>,
}

#[derive(Args, Clone, Default)]
struct AbmArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Signal strength S
    #[arg(long)]
    signal: Option<f64>,
    /// Perceptual noise sigma (both populations)
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long = "noise-pop2")]
    noise_pop2: Option<f64>,
    #[arg(long = "p-feedback")]
    p_feedback: Option<f64>,
    #[arg(long = "n-agents")]
    n_agents: Option<usize>,
    #[arg(long)]
    iterations: Option<u64>,
    /// Partner selection: random | trust_proportional
    #[arg(long = "partner-selection")]
    partner_selection: Option<String>,
    /// Discount advice toward the uncertainty point by trust
    #[arg(long, overrides_with = "no_discounting")]
    discounting: bool,
    #[arg(long = "no-discounting")]
    no_discounting: bool,
    /// Enable the prior-bias delta rule from this iteration (500 if no value)
    #[arg(long = "bias-update", num_args = 0..=1, default_missing_value = "500")]
    bias_update: Option<u64>,
}

#[derive(Args, Clone, Default)]
struct SweepArgs {
    #[command(flatten)]
    abm: AbmArgs,
    /// Sweep axis: signal strengths (comma-separated)
    #[arg(long, value_delimiter = ',')]
    signals: Vec<f64>,
    /// Sweep axis: noise sigmas
    #[arg(long, value_delimiter = ',')]
    noises: Vec<f64>,
    /// Sweep axis: feedback probabilities
    #[arg(long = "p-feedbacks", value_delimiter = ',')]
    p_feedbacks: Vec<f64>,
    #[arg(long)]
    replications: Option<u32>,
    /// Emit one per-iteration time-series CSV per cell
    #[arg(long = "emit-timeseries")]
    emit_timeseries: bool,
}

#[derive(Subcommand, Clone)]
enum Command {
    /// Deck advisors varying accuracy and confidence calibration
    Exp1(ExperimentArgs),
    /// Policy advisors dissociating accuracy from agreement rate
    Exp2(ExperimentArgs),
    /// Bin-manipulated advisors conditioning agreement on confidence
    Exp3(ExperimentArgs),
    /// Advice-value tables: information gain, expected gain, AUROC, AUC
    Analytics {
        #[command(flatten)]
        common: CommonArgs,
        /// Restrict to one experiment (1, 2 or 3)
        #[arg(long)]
        experiment: Option<u8>,
        /// Judge prior probability-correct for the tables
        #[arg(long)]
        prior: Option<f64>,
    },
    /// One agent-based world run
    Abm(AbmArgs),
    /// Parameter sweep over (signal, noise, feedback probability)
    Sweep(SweepArgs),
}

fn env_seed() -> Option<u64> {
    std::env::var("TRUSTLAB_SEED").ok()?.parse().ok()
}

fn parse_variants(names: &[String]) -> Result<Vec<Variant>, String> {
    names
        .iter()
        .map(|n| match n.as_str() {
            "acc" => Ok(Variant::Accuracy),
            "cons" => Ok(Variant::Consensus),
            "conf" => Ok(Variant::Confidence),
            other => Err(format!("unknown variant '{other}' (expected acc, cons, conf)")),
        })
        .collect()
}

fn base_config(common: &CommonArgs) -> Result<RunConfig, String> {
    let mut config = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            cli::load_config(&text).map_err(|e| format!("config parse error: {e}"))?
        }
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed.or_else(env_seed) {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.clone();
    }
    Ok(config)
}

fn apply_experiment(config: &mut RunConfig, args: &ExperimentArgs, cmd: RunCommand) -> Result<(), String> {
    config.command = cmd;
    if args.feedback {
        config.feedback = true;
    }
    if args.no_feedback {
        config.feedback = false;
    }
    if !args.variants.is_empty() {
        config.variants = parse_variants(&args.variants)?;
    }
    if let Some(s) = args.sessions {
        config.sessions = s;
    }
    if args.blocks.is_some() {
        config.blocks = args.blocks;
    }
    if args.trials_per_block.is_some() {
        config.trials_per_block = args.trials_per_block;
    }
    if args.scale_steps.is_some() {
        config.scale_steps = args.scale_steps;
    }
    if args.practice_trials.is_some() {
        config.practice_trials = args.practice_trials;
    }
    Ok(())
}

fn apply_abm(config: &mut RunConfig, args: &AbmArgs) -> Result<(), String> {
    if let Some(s) = args.signal {
        config.abm.signal_strength = s;
    }
    if let Some(n) = args.noise {
        config.abm.pop1_sigma = n;
        config.abm.pop2_sigma = n;
    }
    if let Some(n) = args.noise_pop2 {
        config.abm.pop2_sigma = n;
    }
    if let Some(p) = args.p_feedback {
        config.abm.p_feedback = p;
    }
    if let Some(n) = args.n_agents {
        config.abm.n_agents = n;
    }
    if let Some(i) = args.iterations {
        config.abm.iterations = i;
    }
    if let Some(mode) = &args.partner_selection {
        config.abm.partner_selection = match mode.as_str() {
            "random" => trustlab::abm::PartnerSelection::Random,
            "trust_proportional" => trustlab::abm::PartnerSelection::TrustProportional,
            other => return Err(format!("unknown partner selection '{other}'")),
        };
    }
    if args.discounting {
        config.abm.discounting = true;
    }
    if args.no_discounting {
        config.abm.discounting = false;
    }
    if let Some(start) = args.bias_update {
        config.abm.bias_update_start = Some(start);
    }
    Ok(())
}

fn build(cli: &Cli) -> Result<(RunConfig, bool), String> {
    let (common, check) = match &cli.command {
        Command::Exp1(a) | Command::Exp2(a) | Command::Exp3(a) => (&a.common, a.common.check),
        Command::Analytics { common, .. } => (common, common.check),
        Command::Abm(a) => (&a.common, a.common.check),
        Command::Sweep(a) => (&a.abm.common, a.abm.common.check),
    };
    let mut config = base_config(common)?;
    match &cli.command {
        Command::Exp1(a) => apply_experiment(&mut config, a, RunCommand::Exp1)?,
        Command::Exp2(a) => apply_experiment(&mut config, a, RunCommand::Exp2)?,
        Command::Exp3(a) => apply_experiment(&mut config, a, RunCommand::Exp3)?,
        Command::Analytics { experiment, prior, .. } => {
            config.command = RunCommand::Analytics;
            if experiment.is_some() {
                config.analytics_experiment = *experiment;
            }
            if let Some(p) = prior {
                config.analytics_prior = *p;
            }
        }
        Command::Abm(a) => {
            config.command = RunCommand::Abm;
            apply_abm(&mut config, a)?;
        }
        Command::Sweep(a) => {
            config.command = RunCommand::Sweep;
            apply_abm(&mut config, &a.abm)?;
            if !a.signals.is_empty() {
                config.sweep.signal_values = a.signals.clone();
            }
            if !a.noises.is_empty() {
                config.sweep.sigma_values = a.noises.clone();
            }
            if !a.p_feedbacks.is_empty() {
                config.sweep.p_feedback_values = a.p_feedbacks.clone();
            }
            if let Some(r) = a.replications {
                config.sweep.replications = r;
            }
            if a.emit_timeseries {
                config.emit_timeseries = true;
            }
        }
    }
    Ok((config, check))
}

fn main() -> ExitCode {
    let parsed = Cli::parse();
    let (config, check) = match build(&parsed) {
        Ok(x) => x,
        Err(message) => {
            eprintln!("error: {message}");
            return ExitCode::from(2);
        }
    };
    if check {
        let violations = cli::validate(&config);
        if violations.is_empty() {
            println!("configuration ok");
            return ExitCode::SUCCESS;
        }
        for v in &violations {
            println!("{v}");
        }
        return ExitCode::from(3);
    }
    match cli::run(&config) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
