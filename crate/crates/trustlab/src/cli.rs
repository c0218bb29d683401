//! Run configuration, validation and the command pipelines behind the
//! `trustlab` binary. Every run writes its outputs plus a manifest that
//! reproduces it exactly when fed back through `--config`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::abm::{run_sweep, run_world, SweepGrid, WorldConfig};
use crate::advisors::{
    exp1_profile, exp2_profile, exp3_profile, Exp1Deck, Exp2Policy, Exp3Policy,
    EXP1_PROFILE_NAMES, EXP2_PROFILE_NAMES, EXP3_PROFILE_NAMES,
};
use crate::core::Probability;
use crate::infogain::{
    analyze_table, auc_expected_info_gain_exp3, deck_type2_auroc, AdvicePosteriorTable,
    AdvisorAnalytics, DEFAULT_PRIOR,
};
use crate::judge::{JudgeParams, StaircaseState};
use crate::models::Variant;
use crate::output;
use crate::session::{simulate_session, Experiment, Roster, SessionSpec};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration violations:\n{0}")]
    Invariant(String),
    #[error("simulation failed: {0}")]
    Simulation(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    /// Process exit code: 3 for invariant violations, 4 for IO failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invariant(_) => 3,
            CliError::Simulation(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Exp1,
    Exp2,
    Exp3,
    Analytics,
    Abm,
    Sweep,
}

/// Sweep axes as configured (grid cells are their cartesian product).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepConfig {
    pub signal_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub p_feedback_values: Vec<f64>,
    pub replications: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            signal_values: vec![1.0],
            sigma_values: vec![0.1],
            p_feedback_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            replications: 20,
        }
    }
}

/// One advisor in the configured roster: a named design profile, or an
/// explicit probability table for the active experiment type.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AdvisorSpec {
    Named(String),
    DeckTable {
        name: String,
        incorrect_confident: u32,
        incorrect_unconfident: u32,
        correct_unconfident: u32,
        correct_confident: u32,
    },
    PolicyTable {
        name: String,
        p_agree_given_correct: f64,
        p_agree_given_incorrect: f64,
    },
    BinTable {
        name: String,
        p_agree_by_bin: [f64; 3],
        p_agree_given_incorrect: f64,
    },
}

fn resolve_roster(experiment: Experiment, specs: &[AdvisorSpec]) -> Result<Roster, String> {
    let prob = |v: f64, what: &str| -> Result<Probability, String> {
        Probability::new(v).map_err(|_| format!("{what} {v} outside [0, 1]"))
    };
    match experiment {
        Experiment::Exp1 => {
            let mut roster = Vec::new();
            for spec in specs {
                match spec {
                    AdvisorSpec::Named(n) => {
                        roster.push((n.clone(), exp1_profile(n).map_err(|e| e.to_string())?))
                    }
                    AdvisorSpec::DeckTable {
                        name,
                        incorrect_confident,
                        incorrect_unconfident,
                        correct_unconfident,
                        correct_confident,
                    } => roster.push((
                        name.clone(),
                        Exp1Deck::new(
                            *incorrect_confident,
                            *incorrect_unconfident,
                            *correct_unconfident,
                            *correct_confident,
                        )
                        .map_err(|e| format!("advisor '{name}': {e}"))?,
                    )),
                    _ => return Err("exp1 advisors take deck tables (event counts)".into()),
                }
            }
            Ok(Roster::Exp1(roster))
        }
        Experiment::Exp2 => {
            let mut roster = Vec::new();
            for spec in specs {
                match spec {
                    AdvisorSpec::Named(n) => {
                        roster.push((n.clone(), exp2_profile(n).map_err(|e| e.to_string())?))
                    }
                    AdvisorSpec::PolicyTable {
                        name,
                        p_agree_given_correct,
                        p_agree_given_incorrect,
                    } => roster.push((
                        name.clone(),
                        Exp2Policy {
                            p_agree_given_correct: prob(
                                *p_agree_given_correct,
                                "p_agree_given_correct",
                            )?,
                            p_agree_given_incorrect: prob(
                                *p_agree_given_incorrect,
                                "p_agree_given_incorrect",
                            )?,
                        },
                    )),
                    _ => return Err("exp2 advisors take conditional agreement tables".into()),
                }
            }
            Ok(Roster::Exp2(roster))
        }
        Experiment::Exp3 => {
            let mut roster = Vec::new();
            for spec in specs {
                match spec {
                    AdvisorSpec::Named(n) => {
                        roster.push((n.clone(), exp3_profile(n).map_err(|e| e.to_string())?))
                    }
                    AdvisorSpec::BinTable {
                        name,
                        p_agree_by_bin,
                        p_agree_given_incorrect,
                    } => {
                        let mut bins = [Probability::HALF; 3];
                        for (slot, v) in bins.iter_mut().zip(p_agree_by_bin) {
                            *slot = prob(*v, "p_agree_by_bin")?;
                        }
                        roster.push((
                            name.clone(),
                            Exp3Policy {
                                p_agree_by_bin: bins,
                                p_agree_given_incorrect: prob(
                                    *p_agree_given_incorrect,
                                    "p_agree_given_incorrect",
                                )?,
                            },
                        ))
                    }
                    _ => return Err("exp3 advisors take bin-conditional agreement tables".into()),
                }
            }
            Ok(Roster::Exp3(roster))
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// Experiment pipelines: number of independent sessions.
    pub sessions: u32,
    pub feedback: bool,
    pub variants: Vec<Variant>,
    /// Advisor roster override: named profiles and/or explicit tables.
    pub advisors: Option<Vec<AdvisorSpec>>,
    /// Session-shape overrides; defaults reproduce the designed shapes.
    pub blocks: Option<u32>,
    pub trials_per_block: Option<u32>,
    pub scale_steps: Option<u32>,
    pub practice_trials: Option<u32>,
    pub judge: JudgeParams,
    pub staircase: StaircaseState,
    /// Analytics: restrict to one experiment (1..=3); None runs all three.
    pub analytics_experiment: Option<u8>,
    pub analytics_prior: f64,
    pub abm: WorldConfig,
    pub sweep: SweepConfig,
    pub emit_timeseries: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::Exp1,
            seed: 0,
            out_dir: PathBuf::from("out"),
            sessions: 1,
            feedback: false,
            variants: vec![Variant::Accuracy, Variant::Consensus, Variant::Confidence],
            advisors: None,
            blocks: None,
            trials_per_block: None,
            scale_steps: None,
            practice_trials: None,
            judge: JudgeParams::default(),
            staircase: StaircaseState::default(),
            analytics_experiment: None,
            analytics_prior: DEFAULT_PRIOR,
            abm: WorldConfig::default(),
            sweep: SweepConfig::default(),
            emit_timeseries: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn experiment_of(cmd: Command) -> Option<Experiment> {
    match cmd {
        Command::Exp1 => Some(Experiment::Exp1),
        Command::Exp2 => Some(Experiment::Exp2),
        Command::Exp3 => Some(Experiment::Exp3),
        _ => None,
    }
}

impl RunConfig {
    /// Resolve the session spec implied by this config (experiment commands).
    pub fn session_spec(&self) -> Option<SessionSpec> {
        let experiment = experiment_of(self.command)?;
        let mut spec = SessionSpec::for_experiment(experiment);
        spec.feedback = self.feedback;
        spec.judge = self.judge;
        spec.staircase = self.staircase;
        spec.variants = self.variants.clone();
        if let Some(specs) = &self.advisors {
            if let Ok(roster) = resolve_roster(experiment, specs) {
                spec.roster = roster;
            }
        }
        if let Some(b) = self.blocks {
            spec.blocks = b;
        }
        if let Some(n) = self.scale_steps {
            spec.scale_steps = n;
        }
        if let Some(p) = self.practice_trials {
            spec.practice_trials = p;
        }
        if let Some(tpb) = self.trials_per_block {
            let advisors = spec.roster.len() as u32;
            if tpb > spec.null_trials && (tpb - spec.null_trials).is_multiple_of(advisors) {
                spec.encounters_per_advisor = (tpb - spec.null_trials) / advisors;
            }
        }
        Some(spec)
    }
}

/// Every invariant violation with its field path; an empty list means the
/// config is runnable.
pub fn validate(config: &RunConfig) -> Vec<Violation> {
    let mut v = Vec::new();
    let push = |v: &mut Vec<Violation>, field: &str, message: String| {
        v.push(Violation {
            field: field.to_string(),
            message,
        })
    };

    if let Some(experiment) = experiment_of(config.command) {
        if config.sessions == 0 {
            push(&mut v, "sessions", "must be at least 1".into());
        }
        if config.variants.is_empty() {
            push(&mut v, "variants", "at least one model variant".into());
        }
        if let Err(e) = config.judge.validate() {
            push(&mut v, "judge", e.to_string());
        }
        if config.staircase.step_size == 0 {
            push(&mut v, "staircase.step_size", "must be positive".into());
        }
        if config.staircase.d_min == 0 {
            push(&mut v, "staircase.d_min", "must be positive".into());
        }
        if config.staircase.d < config.staircase.d_min {
            push(&mut v, "staircase.d", "below d_min".into());
        }
        let scale = config.scale_steps.unwrap_or(match experiment {
            Experiment::Exp3 => 50,
            _ => 5,
        });
        if experiment == Experiment::Exp3 && scale != 50 {
            push(
                &mut v,
                "scale_steps",
                format!("exp3 requires the 50-step scale, got {scale}"),
            );
        }
        if scale < 2 {
            push(&mut v, "scale_steps", "needs at least 2 steps".into());
        }
        let n_advisors = match &config.advisors {
            Some(specs) => match resolve_roster(experiment, specs) {
                Ok(roster) if roster.is_empty() => {
                    push(&mut v, "advisors", "roster must be non-empty".into());
                    0
                }
                Ok(roster) => roster.len() as u32,
                Err(message) => {
                    push(&mut v, "advisors", message);
                    0
                }
            },
            None => experiment.advisor_names().len() as u32,
        };
        if let Some(tpb) = config.trials_per_block {
            let spec = SessionSpec::for_experiment(experiment);
            if n_advisors > 0
                && (tpb <= spec.null_trials
                    || !(tpb - spec.null_trials).is_multiple_of(n_advisors))
            {
                push(
                    &mut v,
                    "trials_per_block",
                    format!(
                        "{tpb} minus {} null trials must be a positive multiple of {n_advisors}",
                        spec.null_trials
                    ),
                );
            }
        }
        if let Some(b) = config.blocks {
            if b == 0 {
                push(&mut v, "blocks", "must be at least 1".into());
            }
        }
    }

    if config.command == Command::Analytics {
        if let Some(e) = config.analytics_experiment {
            if !(1..=3).contains(&e) {
                push(&mut v, "analytics_experiment", format!("{e} not in 1..=3"));
            }
        }
        if !(0.0..=1.0).contains(&config.analytics_prior) || config.analytics_prior == 0.5 {
            push(
                &mut v,
                "analytics_prior",
                format!("{} must lie in [0,1] and off the chance point", config.analytics_prior),
            );
        }
    }

    if matches!(config.command, Command::Abm | Command::Sweep) {
        for msg in config.abm.validate() {
            let field = msg.split_whitespace().next().unwrap_or("abm").to_string();
            v.push(Violation {
                field: format!("abm.{field}"),
                message: msg,
            });
        }
    }
    if config.command == Command::Sweep {
        if config.sweep.replications == 0 {
            push(&mut v, "sweep.replications", "must be at least 1".into());
        }
        for (name, axis) in [
            ("sweep.signal_values", &config.sweep.signal_values),
            ("sweep.sigma_values", &config.sweep.sigma_values),
            ("sweep.p_feedback_values", &config.sweep.p_feedback_values),
        ] {
            if axis.is_empty() {
                push(&mut v, name, "axis must be non-empty".into());
            }
        }
        if config
            .sweep
            .p_feedback_values
            .iter()
            .any(|p| !(0.0..=1.0).contains(p))
        {
            push(&mut v, "sweep.p_feedback_values", "values outside [0, 1]".into());
        }
    }

    v
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    artifact: String,
    version: String,
    config: RunConfig,
}

fn write(path: &std::path::Path, content: &str) -> Result<(), CliError> {
    output::write_text(path, content).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn analytics_rows(config: &RunConfig) -> Vec<(u8, AdvisorAnalytics)> {
    let prior = Probability::clamped(config.analytics_prior);
    let selected = |e: u8| config.analytics_experiment.is_none_or(|sel| sel == e);
    let mut rows = Vec::new();
    if selected(1) {
        for name in EXP1_PROFILE_NAMES {
            let deck = match name {
                "acc_cal" => Exp1Deck::acc_cal(),
                "acc_uncal" => Exp1Deck::acc_uncal(),
                "inacc_cal" => Exp1Deck::inacc_cal(),
                _ => Exp1Deck::inacc_uncal(),
            };
            let table = AdvicePosteriorTable::from_exp1_deck(&deck, prior);
            let mut a = analyze_table(name, &table);
            a.type2_auroc = Some(deck_type2_auroc(&deck));
            rows.push((1, a));
        }
    }
    if selected(2) {
        for name in EXP2_PROFILE_NAMES {
            let policy = match name {
                "hiacc_hiagr" => Exp2Policy::hiacc_hiagr(),
                "hiacc_loagr" => Exp2Policy::hiacc_loagr(),
                "loacc_hiagr" => Exp2Policy::loacc_hiagr(),
                _ => Exp2Policy::loacc_loagr(),
            };
            let table = AdvicePosteriorTable::from_exp2_policy(&policy, prior);
            rows.push((2, analyze_table(name, &table)));
        }
    }
    if selected(3) {
        for name in EXP3_PROFILE_NAMES {
            let policy = match name {
                "bias_sharing" => Exp3Policy::bias_sharing(),
                "unbiased" => Exp3Policy::unbiased(),
                _ => Exp3Policy::anti_bias(),
            };
            // overall (bin-marginal) conditionals: the advisors are matched
            let p_agree_correct = policy
                .p_agree_by_bin
                .iter()
                .map(|p| p.value())
                .sum::<f64>()
                / 3.0;
            let table = AdvicePosteriorTable::from_exp2_policy(
                &Exp2Policy {
                    p_agree_given_correct: Probability::clamped(p_agree_correct),
                    p_agree_given_incorrect: policy.p_agree_given_incorrect,
                },
                prior,
            );
            let mut a = analyze_table(name, &table);
            a.auc_ig_e = Some(auc_expected_info_gain_exp3(&policy, 25.0, 10.0, 50));
            rows.push((3, a));
        }
    }
    rows
}

/// Execute the configured pipeline, writing the output CSVs and a manifest
/// into the output directory. Deterministic for a fixed config.
pub fn run(config: &RunConfig) -> Result<(), CliError> {
    let violations = validate(config);
    if !violations.is_empty() {
        let text = violations
            .iter()
            .map(|v| format!("  {v}"))
            .collect::<Vec<_>>()
            .join("\n");
        return Err(CliError::Invariant(text));
    }
    std::fs::create_dir_all(&config.out_dir).map_err(|source| CliError::Io {
        path: config.out_dir.display().to_string(),
        source,
    })?;
    let path = |name: &str| config.out_dir.join(name);

    match config.command {
        Command::Exp1 | Command::Exp2 | Command::Exp3 => {
            let spec = config.session_spec().expect("experiment command");
            let mut results = Vec::with_capacity(config.sessions as usize);
            for s in 0..config.sessions {
                let r = simulate_session(&spec, config.seed, s as usize)
                    .map_err(|e| CliError::Simulation(e.to_string()))?;
                eprintln!(
                    "session {s}: {} blocks done, judge accuracy {:.3}",
                    spec.blocks, r.judge_accuracy
                );
                results.push(r);
            }
            write(&path("trials.csv"), &output::trials_csv(&results))?;
            write(
                &path("summary.csv"),
                &output::summary_csv(&results, spec.driving_variant()),
            )?;
            write(&path("estimators.csv"), &output::estimators_csv(&results))?;
        }
        Command::Analytics => {
            let rows = analytics_rows(config);
            write(&path("analytics.csv"), &output::analytics_csv(&rows))?;
            write(
                &path("analytics_events.csv"),
                &output::analytics_events_csv(&rows),
            )?;
        }
        Command::Abm => {
            let log = run_world(&config.abm, config.seed)
                .map_err(|e| CliError::Simulation(e.to_string()))?;
            write(&path("abm_timeseries.csv"), &output::abm_timeseries_csv(&log))?;
            write(&path("abm_agents.csv"), &output::abm_agents_csv(&log))?;
            write(&path("abm_trust.csv"), &output::abm_trust_csv(&log))?;
        }
        Command::Sweep => {
            let grid = SweepGrid {
                base: config.abm.clone(),
                signal_values: config.sweep.signal_values.clone(),
                sigma_values: config.sweep.sigma_values.clone(),
                p_feedback_values: config.sweep.p_feedback_values.clone(),
                replications: config.sweep.replications,
            };
            let result = run_sweep(&grid, config.seed)
                .map_err(|e| CliError::Simulation(e.to_string()))?;
            for cell in &result.cells {
                eprintln!(
                    "cell {} (S={}, sigma={}, p_fb={}): mean clustering {:.3}",
                    cell.cell, cell.signal, cell.sigma, cell.p_feedback, cell.mean_clustering
                );
            }
            write(&path("sweep.csv"), &output::sweep_csv(&result))?;
            write(&path("sweep_cells.csv"), &output::sweep_cells_csv(&result))?;
            if config.emit_timeseries {
                // one replication's full trajectory per cell
                for row in result.rows.iter().filter(|r| r.replication == 0) {
                    let mut cell_config = grid.base.clone();
                    cell_config.signal_strength = row.signal;
                    cell_config.pop1_sigma = row.sigma;
                    cell_config.pop2_sigma = row.sigma;
                    cell_config.p_feedback = row.p_feedback;
                    let log = run_world(&cell_config, row.seed_used)
                        .map_err(|e| CliError::Simulation(e.to_string()))?;
                    write(
                        &path(&format!("timeseries_cell{}.csv", row.cell)),
                        &output::abm_timeseries_csv(&log),
                    )?;
                }
            }
        }
    }

    let manifest = Manifest {
        artifact: "trustlab".to_string(),
        version: ARTIFACT_VERSION.to_string(),
        config: config.clone(),
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| CliError::Simulation(format!("manifest serialization: {e}")))?;
    write(&path("manifest.toml"), &text)?;
    Ok(())
}

/// Load a RunConfig from a manifest or config file (both carry the same
/// `[config]` table).
pub fn load_config(text: &str) -> Result<RunConfig, toml::de::Error> {
    #[derive(Deserialize)]
    struct MaybeManifest {
        config: Option<RunConfig>,
    }
    if let Ok(m) = toml::from_str::<MaybeManifest>(text) {
        if let Some(c) = m.config {
            return Ok(c);
        }
    }
    toml::from_str::<RunConfig>(text)
}
