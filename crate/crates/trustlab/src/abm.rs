//! Agent-based network model of bidirectional trust formation, clustering
//! and bias polarization, with a deterministic parameter-sweep harness.
//!
//! A fully connected directed network: the edge i→j carries the trust θ_ij
//! that i has in j's judgments, initialized to 0.50. Each iteration all
//! agents judge one shared signal, consult one partner, revise their belief,
//! update the consulted edge from objective feedback (with probability
//! p_feedback) or from an agreement heuristic, and optionally drift their
//! prior bias toward their final belief.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{bayes_combine, Probability, RngStream, Side};
use crate::judge::logistic;

#[derive(Debug, Error, PartialEq)]
pub enum AbmError {
    #[error("both bias groups must be non-empty")]
    EmptyGroup,
    #[error("invalid world config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Group {
    Pop1,
    Pop2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartnerSelection {
    Random,
    TrustProportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeedbackEstimate {
    Agreement,
    AgreementInConfidence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasIndicator {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub n_agents: usize,
    pub signal_strength: f64,
    pub p_feedback: f64,
    pub learning_rate: f64,
    pub iterations: u64,
    /// Iteration from which the prior-bias delta rule applies; None disables.
    pub bias_update_start: Option<u64>,
    pub partner_selection: PartnerSelection,
    pub discounting: bool,
    pub feedback_estimate: FeedbackEstimate,
    pub bias_indicator: BiasIndicator,
    pub pop1_bias_range: (f64, f64),
    pub pop2_bias_range: (f64, f64),
    pub pop1_sigma: f64,
    pub pop2_sigma: f64,
    pub sigmoid_slope: f64,
    /// Trust-matrix snapshot cadence; 0 keeps only the final matrix.
    pub snapshot_interval: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            n_agents: 20,
            signal_strength: 1.0,
            p_feedback: 0.0,
            learning_rate: 0.1,
            iterations: 1000,
            bias_update_start: None,
            partner_selection: PartnerSelection::Random,
            discounting: false,
            feedback_estimate: FeedbackEstimate::AgreementInConfidence,
            bias_indicator: BiasIndicator::Discrete,
            pop1_bias_range: (0.0, 0.5),
            pop2_bias_range: (0.5, 1.0),
            pop1_sigma: 0.1,
            pop2_sigma: 0.1,
            sigmoid_slope: 1.0,
            snapshot_interval: 0,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_agents < 2 {
            v.push("n_agents must be at least 2".into());
        }
        if !(0.0..=1.0).contains(&self.p_feedback) {
            v.push(format!("p_feedback {} outside [0, 1]", self.p_feedback));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            v.push(format!("learning_rate {} outside (0, 1]", self.learning_rate));
        }
        if self.signal_strength < 0.0 {
            v.push(format!("signal_strength {} negative", self.signal_strength));
        }
        if self.pop1_sigma < 0.0 || self.pop2_sigma < 0.0 {
            v.push("noise sigma must be non-negative".into());
        }
        for (label, (lo, hi)) in [
            ("pop1_bias_range", self.pop1_bias_range),
            ("pop2_bias_range", self.pop2_bias_range),
        ] {
            if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
                v.push(format!("{label} ({lo}, {hi}) is not a sub-interval of [0, 1]"));
            }
        }
        if let Some(start) = self.bias_update_start {
            if self.iterations < start {
                v.push(format!(
                    "iterations {} < bias_update_start {start}",
                    self.iterations
                ));
            }
        }
        v
    }
}

/// One agent: perceptual noise, prior bias, bias-group label and its
/// outgoing trust edges (index self is unused and stays 0.5).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgentState {
    pub id: usize,
    pub noise_sigma: f64,
    pub prior_pa: Probability,
    pub group: Group,
    pub trust_out: Vec<f64>,
}

/// Uniform sample on [−S/2, +S/2].
pub fn draw_signal(signal_strength: f64, rng: &mut RngStream) -> f64 {
    if signal_strength == 0.0 {
        return 0.0;
    }
    rng.gen_range(-signal_strength / 2.0..=signal_strength / 2.0)
}

/// Perceptual inference: evidence E_p = L(k·(s + ε)) folded into the prior
/// by odds combination; confidence is the distance from the uncertainty
/// point. Returns (posterior p'(A), confidence).
pub fn perceive_abm(
    prior_pa: Probability,
    noise_sigma: f64,
    sigmoid_slope: f64,
    signal: f64,
    rng: &mut RngStream,
) -> (Probability, Probability) {
    let noise: f64 = if noise_sigma == 0.0 {
        0.0
    } else {
        let z: f64 = rng.sample(StandardNormal);
        noise_sigma * z
    };
    let evidence = Probability::clamped(logistic(sigmoid_slope * (signal + noise)));
    let posterior = bayes_combine(prior_pa, evidence);
    let confidence = Probability::clamped(0.5 + (posterior.value() - 0.5).abs());
    (posterior, confidence)
}

/// Choose a partner uniformly or proportionally to outgoing trust. Returns
/// the partner and whether an all-zero trust vector forced a uniform
/// fallback.
pub fn select_partner(
    agent: usize,
    trust_out: &[f64],
    mode: PartnerSelection,
    rng: &mut RngStream,
) -> (usize, bool) {
    let n = trust_out.len();
    debug_assert!(n >= 2);
    match mode {
        PartnerSelection::Random => {
            let j = rng.gen_range(0..n - 1);
            (if j < agent { j } else { j + 1 }, false)
        }
        PartnerSelection::TrustProportional => {
            let total: f64 = trust_out
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != agent)
                .map(|(_, t)| t)
                .sum();
            if total <= 0.0 {
                let j = rng.gen_range(0..n - 1);
                return (if j < agent { j } else { j + 1 }, true);
            }
            let mut target = rng.gen::<f64>() * total;
            for (j, t) in trust_out.iter().enumerate() {
                if j == agent {
                    continue;
                }
                target -= t;
                if target <= 0.0 {
                    return (j, false);
                }
            }
            // floating-point leftover lands on the last other agent
            let last = if agent == n - 1 { n - 2 } else { n - 1 };
            (last, false)
        }
    }
}

/// Revise a belief with social evidence: E_s is the advisor's judgment,
/// optionally discounted linearly toward the uncertainty point by trust.
pub fn social_update(
    agent_p_prime: Probability,
    advisor_p_prime: Probability,
    theta: f64,
    discounting: bool,
) -> Probability {
    let es = if discounting {
        Probability::clamped(0.5 + theta * (advisor_p_prime.value() - 0.5))
    } else {
        advisor_p_prime
    };
    bayes_combine(agent_p_prime, es)
}

/// Estimated partner accuracy when objective feedback is unavailable.
pub fn estimated_feedback(agrees: bool, confidence: Probability, mode: FeedbackEstimate) -> f64 {
    match mode {
        FeedbackEstimate::Agreement => {
            if agrees {
                1.0
            } else {
                0.0
            }
        }
        FeedbackEstimate::AgreementInConfidence => {
            if agrees {
                confidence.value()
            } else {
                1.0 - confidence.value()
            }
        }
    }
}

/// Delta rule on a trust edge: θ' = θ + α(F − θ).
pub fn trust_update(theta: f64, feedback: f64, alpha: f64) -> f64 {
    theta + alpha * (feedback - theta)
}

/// Delta rule on the prior bias, driven by the truth when feedback is
/// available and by the (discrete or continuous) final belief otherwise.
pub fn bias_update(
    prior_pa: Probability,
    final_belief: Probability,
    feedback_available: bool,
    truth_is_a: bool,
    indicator: BiasIndicator,
    alpha: f64,
) -> Probability {
    let i = if feedback_available {
        if truth_is_a {
            1.0
        } else {
            0.0
        }
    } else {
        match indicator {
            BiasIndicator::Discrete => {
                if final_belief.value() >= 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            BiasIndicator::Continuous => final_belief.value(),
        }
    };
    Probability::clamped(prior_pa.value() + alpha * (i - prior_pa.value()))
}

/// In-group trust preference: mean over agents of θ̄_in / (θ̄_in + θ̄_out),
/// where group membership is the initial bias group. 0.5 means no
/// preference.
pub fn clustering(agents: &[AgentState]) -> Result<f64, AbmError> {
    let n1 = agents.iter().filter(|a| a.group == Group::Pop1).count();
    if n1 == 0 || n1 == agents.len() {
        return Err(AbmError::EmptyGroup);
    }
    let mut total = 0.0;
    for a in agents {
        let (mut sum_in, mut n_in, mut sum_out, mut n_out) = (0.0, 0u32, 0.0, 0u32);
        for b in agents {
            if b.id == a.id {
                continue;
            }
            if b.group == a.group {
                sum_in += a.trust_out[b.id];
                n_in += 1;
            } else {
                sum_out += a.trust_out[b.id];
                n_out += 1;
            }
        }
        let t_in = if n_in > 0 { sum_in / n_in as f64 } else { 0.0 };
        let t_out = if n_out > 0 { sum_out / n_out as f64 } else { 0.0 };
        total += if t_in + t_out == 0.0 {
            0.5
        } else {
            t_in / (t_in + t_out)
        };
    }
    Ok(total / agents.len() as f64)
}

/// Iteration-indexed world log.
#[derive(Debug, Clone)]
pub struct WorldLog {
    pub clustering: Vec<f64>,
    /// Mean prior p(A) per population per iteration.
    pub mean_bias: Vec<(f64, f64)>,
    pub initial_biases: Vec<f64>,
    pub agents: Vec<AgentState>,
    pub trust_snapshots: Vec<(u64, Vec<Vec<f64>>)>,
    /// Fraction of correct pre-advice / post-advice decisions per agent.
    pub pre_accuracy: Vec<f64>,
    pub post_accuracy: Vec<f64>,
    pub zero_trust_fallbacks: u64,
}

impl WorldLog {
    pub fn final_clustering(&self) -> f64 {
        *self.clustering.last().unwrap_or(&0.5)
    }

    pub fn mean_trust_toward(&self, group: Group) -> f64 {
        let mut sum = 0.0;
        let mut n = 0u32;
        for a in &self.agents {
            for b in &self.agents {
                if a.id != b.id && b.group == group {
                    sum += a.trust_out[b.id];
                    n += 1;
                }
            }
        }
        sum / n as f64
    }

    pub fn mean_abs_bias(&self, group: Group) -> f64 {
        let sel: Vec<f64> = self
            .agents
            .iter()
            .filter(|a| a.group == group)
            .map(|a| a.prior_pa.value())
            .collect();
        (sel.iter().sum::<f64>() / sel.len() as f64 - 0.5).abs()
    }

    pub fn initial_abs_bias(&self, group: Group) -> f64 {
        let sel: Vec<f64> = self
            .agents
            .iter()
            .filter(|a| a.group == group)
            .map(|a| self.initial_biases[a.id])
            .collect();
        (sel.iter().sum::<f64>() / sel.len() as f64 - 0.5).abs()
    }

    pub fn mean_trust(&self) -> f64 {
        let n = self.agents.len();
        let sum: f64 = self
            .agents
            .iter()
            .flat_map(|a| {
                a.trust_out
                    .iter()
                    .enumerate()
                    .filter(move |(j, _)| *j != a.id)
                    .map(|(_, t)| *t)
            })
            .sum();
        sum / (n * (n - 1)) as f64
    }
}

// RNG stream roles under the run seed
const STREAM_INIT: u64 = 0;
const STREAM_WORLD: u64 = 1;
const STREAM_AGENT: u64 = 2;

/// Run one world deterministically. Per iteration: one shared signal, all
/// agents perceive, each selects a partner and folds in its judgment, each
/// updates the consulted trust edge (objective feedback with probability
/// p_feedback, the agreement heuristic otherwise), and from
/// bias_update_start onward drifts its prior. All agents read the previous
/// iteration's trust; updates are synchronous.
pub fn run_world(config: &WorldConfig, seed: u64) -> Result<WorldLog, AbmError> {
    let violations = config.validate();
    if !violations.is_empty() {
        return Err(AbmError::BadConfig(violations.join("; ")));
    }
    let n = config.n_agents;
    let half = n / 2;

    let mut init_rng = RngStream::for_path(seed, &[STREAM_INIT]);
    let mut agents: Vec<AgentState> = (0..n)
        .map(|id| {
            let group = if id < half { Group::Pop1 } else { Group::Pop2 };
            let (lo, hi) = match group {
                Group::Pop1 => config.pop1_bias_range,
                Group::Pop2 => config.pop2_bias_range,
            };
            let bias = if lo == hi {
                lo
            } else {
                init_rng.gen_range(lo..hi)
            };
            AgentState {
                id,
                noise_sigma: match group {
                    Group::Pop1 => config.pop1_sigma,
                    Group::Pop2 => config.pop2_sigma,
                },
                prior_pa: Probability::clamped(bias),
                group,
                trust_out: vec![0.5; n],
            }
        })
        .collect();
    let initial_biases: Vec<f64> = agents.iter().map(|a| a.prior_pa.value()).collect();

    let mut world_rng = RngStream::for_path(seed, &[STREAM_WORLD]);
    let mut agent_rngs: Vec<RngStream> = (0..n)
        .map(|id| RngStream::for_path(seed, &[STREAM_AGENT, id as u64]))
        .collect();

    let mut log = WorldLog {
        clustering: Vec::with_capacity(config.iterations as usize),
        mean_bias: Vec::with_capacity(config.iterations as usize),
        initial_biases,
        agents: Vec::new(),
        trust_snapshots: Vec::new(),
        pre_accuracy: vec![0.0; n],
        post_accuracy: vec![0.0; n],
        zero_trust_fallbacks: 0,
    };

    let mut p_prime = vec![Probability::HALF; n];
    let mut confidence = vec![Probability::HALF; n];
    let mut choice = vec![Side::A; n];
    let mut correct = vec![false; n];

    for iter in 0..config.iterations {
        let s = draw_signal(config.signal_strength, &mut world_rng);
        let truth = if s > 0.0 { Side::A } else { Side::B };

        for (i, agent) in agents.iter().enumerate() {
            let (post, conf) = perceive_abm(
                agent.prior_pa,
                agent.noise_sigma,
                config.sigmoid_slope,
                s,
                &mut agent_rngs[i],
            );
            p_prime[i] = post;
            confidence[i] = conf;
            choice[i] = if post.value() >= 0.5 { Side::A } else { Side::B };
            correct[i] = choice[i] == truth;
            log.pre_accuracy[i] += correct[i] as u8 as f64;
        }

        // partner selection and social revision read last-iteration trust
        let mut partners = vec![0usize; n];
        let mut p_hat = vec![Probability::HALF; n];
        for i in 0..n {
            let (j, fell_back) = select_partner(
                i,
                &agents[i].trust_out,
                config.partner_selection,
                &mut agent_rngs[i],
            );
            log.zero_trust_fallbacks += fell_back as u64;
            partners[i] = j;
            p_hat[i] = social_update(
                p_prime[i],
                p_prime[j],
                agents[i].trust_out[j],
                config.discounting,
            );
            let post_choice = if p_hat[i].value() >= 0.5 { Side::A } else { Side::B };
            log.post_accuracy[i] += (post_choice == truth) as u8 as f64;
        }

        for i in 0..n {
            let j = partners[i];
            let feedback_available = agent_rngs[i].gen::<f64>() < config.p_feedback;
            let f = if feedback_available {
                correct[j] as u8 as f64
            } else {
                estimated_feedback(
                    choice[i] == choice[j],
                    confidence[i],
                    config.feedback_estimate,
                )
            };
            let theta = agents[i].trust_out[j];
            agents[i].trust_out[j] = trust_update(theta, f, config.learning_rate);

            if let Some(start) = config.bias_update_start {
                if iter >= start {
                    agents[i].prior_pa = bias_update(
                        agents[i].prior_pa,
                        p_hat[i],
                        feedback_available,
                        truth == Side::A,
                        config.bias_indicator,
                        config.learning_rate,
                    );
                }
            }
        }

        log.clustering.push(clustering(&agents)?);
        let mean_of = |g: Group| {
            let sel: Vec<f64> = agents
                .iter()
                .filter(|a| a.group == g)
                .map(|a| a.prior_pa.value())
                .collect();
            sel.iter().sum::<f64>() / sel.len() as f64
        };
        log.mean_bias.push((mean_of(Group::Pop1), mean_of(Group::Pop2)));

        if config.snapshot_interval > 0 && (iter + 1) % config.snapshot_interval == 0 {
            log.trust_snapshots
                .push((iter + 1, agents.iter().map(|a| a.trust_out.clone()).collect()));
        }
    }

    for acc in log.pre_accuracy.iter_mut().chain(log.post_accuracy.iter_mut()) {
        *acc /= config.iterations as f64;
    }
    log.trust_snapshots.push((
        config.iterations,
        agents.iter().map(|a| a.trust_out.clone()).collect(),
    ));
    log.agents = agents;
    Ok(log)
}

/// Axes of a parameter sweep; the cartesian product of the axes forms the
/// cells, each replicated `replications` times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepGrid {
    pub base: WorldConfig,
    pub signal_values: Vec<f64>,
    pub sigma_values: Vec<f64>,
    pub p_feedback_values: Vec<f64>,
    pub replications: u32,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            base: WorldConfig::default(),
            signal_values: vec![1.0],
            sigma_values: vec![0.1],
            p_feedback_values: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            replications: 20,
        }
    }
}

/// One replication's summary; `seed_used` replays the cell exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct RepSummary {
    pub cell: usize,
    pub signal: f64,
    pub sigma: f64,
    pub p_feedback: f64,
    pub replication: u32,
    pub seed_used: u64,
    pub final_clustering: f64,
    pub abs_bias_pop1: f64,
    pub abs_bias_pop2: f64,
    pub pre_accuracy: f64,
    pub post_accuracy: f64,
    pub mean_trust: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub cell: usize,
    pub signal: f64,
    pub sigma: f64,
    pub p_feedback: f64,
    pub replications: u32,
    pub mean_clustering: f64,
    pub mean_abs_bias_pop1: f64,
    pub mean_abs_bias_pop2: f64,
    pub mean_accuracy_delta: f64,
    pub mean_trust: f64,
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub rows: Vec<RepSummary>,
    pub cells: Vec<CellSummary>,
}

const STREAM_SWEEP: u64 = 9;

fn sweep_tasks(grid: &SweepGrid) -> Vec<(usize, f64, f64, f64, u32)> {
    let mut tasks = Vec::new();
    let mut cell = 0;
    for &s in &grid.signal_values {
        for &sigma in &grid.sigma_values {
            for &p_fb in &grid.p_feedback_values {
                for rep in 0..grid.replications {
                    tasks.push((cell, s, sigma, p_fb, rep));
                }
                cell += 1;
            }
        }
    }
    tasks
}

fn run_cell(
    grid: &SweepGrid,
    master_seed: u64,
    task: (usize, f64, f64, f64, u32),
) -> Result<RepSummary, AbmError> {
    let (cell, signal, sigma, p_feedback, rep) = task;
    let mut config = grid.base.clone();
    config.signal_strength = signal;
    config.pop1_sigma = sigma;
    config.pop2_sigma = sigma;
    config.p_feedback = p_feedback;
    // per-cell streams derive from (master seed, cell, rep): parallel
    // scheduling can never change results
    let seed_used = RngStream::stream_id(&[STREAM_SWEEP, master_seed, cell as u64, rep as u64]);
    let log = run_world(&config, seed_used)?;
    let n = config.n_agents as f64;
    Ok(RepSummary {
        cell,
        signal,
        sigma,
        p_feedback,
        replication: rep,
        seed_used,
        final_clustering: log.final_clustering(),
        abs_bias_pop1: log.mean_abs_bias(Group::Pop1),
        abs_bias_pop2: log.mean_abs_bias(Group::Pop2),
        pre_accuracy: log.pre_accuracy.iter().sum::<f64>() / n,
        post_accuracy: log.post_accuracy.iter().sum::<f64>() / n,
        mean_trust: log.mean_trust(),
    })
}

fn summarize(grid: &SweepGrid, mut rows: Vec<RepSummary>) -> SweepResult {
    rows.sort_by_key(|r| (r.cell, r.replication));
    let mut cells: Vec<CellSummary> = Vec::new();
    for row in &rows {
        match cells.last_mut() {
            Some(c) if c.cell == row.cell => {
                c.replications += 1;
                c.mean_clustering += row.final_clustering;
                c.mean_abs_bias_pop1 += row.abs_bias_pop1;
                c.mean_abs_bias_pop2 += row.abs_bias_pop2;
                c.mean_accuracy_delta += row.post_accuracy - row.pre_accuracy;
                c.mean_trust += row.mean_trust;
            }
            _ => cells.push(CellSummary {
                cell: row.cell,
                signal: row.signal,
                sigma: row.sigma,
                p_feedback: row.p_feedback,
                replications: 1,
                mean_clustering: row.final_clustering,
                mean_abs_bias_pop1: row.abs_bias_pop1,
                mean_abs_bias_pop2: row.abs_bias_pop2,
                mean_accuracy_delta: row.post_accuracy - row.pre_accuracy,
                mean_trust: row.mean_trust,
            }),
        }
    }
    for c in &mut cells {
        let n = c.replications as f64;
        c.mean_clustering /= n;
        c.mean_abs_bias_pop1 /= n;
        c.mean_abs_bias_pop2 /= n;
        c.mean_accuracy_delta /= n;
        c.mean_trust /= n;
    }
    let _ = grid;
    SweepResult { rows, cells }
}

/// Run every cell sequentially. Always available; also the fallback body of
/// `run_sweep` without the `parallel` feature.
pub fn run_sweep_sequential(grid: &SweepGrid, master_seed: u64) -> Result<SweepResult, AbmError> {
    let rows = sweep_tasks(grid)
        .into_iter()
        .map(|t| run_cell(grid, master_seed, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(grid, rows))
}

/// Run the sweep, data-parallel across cells and replications when the
/// `parallel` feature is enabled. Results are identical across thread
/// counts.
#[cfg(feature = "parallel")]
pub fn run_sweep(grid: &SweepGrid, master_seed: u64) -> Result<SweepResult, AbmError> {
    use rayon::prelude::*;
    let rows = sweep_tasks(grid)
        .into_par_iter()
        .map(|t| run_cell(grid, master_seed, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(grid, rows))
}

#[cfg(not(feature = "parallel"))]
pub fn run_sweep(grid: &SweepGrid, master_seed: u64) -> Result<SweepResult, AbmError> {
    run_sweep_sequential(grid, master_seed)
}
