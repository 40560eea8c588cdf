//! Agent-based simulation of the staking mechanism.
//!
//! Each round, every active actor (in id order) draws a batch according to its
//! strategy, stakes, is graded by the oracle and settled by the ledger. Actors whose
//! balance no longer covers their stake are benched for the rest of the run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{normalize_host, DatasetPartition, LabeledUrl, WhoisClient};
use crate::ledger::{Amount, LedgerError, LedgerParams, LedgerState};
use crate::model::TrainConfig;
use crate::oracle::{Oracle, OracleError, Verdict};
use crate::ContributorId;

pub const TRACE_FILES: [&str; 5] = [
    "balances.csv",
    "accuracy.csv",
    "contract.csv",
    "events.log",
    "config.echo",
];

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid actor {actor}: {reason}")]
    InvalidActor { actor: String, reason: String },
    #[error("rounds must be at least 1")]
    InvalidRounds,
    #[error("pool exhausted for actor {actor} in round {round}")]
    PoolExhausted { actor: ContributorId, round: usize },
    #[error("ledger: {0}")]
    Ledger(#[from] LedgerError),
    #[error("oracle: {0}")]
    Oracle(#[from] OracleError),
    #[error("conservation violated after round {round}")]
    ConservationViolated { round: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Correctly labeled, never-before-drawn good-pool points.
    Good,
    /// Label-flipped points from the bad pool.
    Bad,
    /// One good point, resubmitted every round.
    RepeatSubmitter,
    /// Resubmits the group's shared domains under its own urls.
    Colluder,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub id: ContributorId,
    pub strategy: Strategy,
    pub initial_balance: Amount,
    pub stake_per_round: Amount,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_batch_size() -> usize {
    10
}

impl ActorSpec {
    pub fn new(
        id: &str,
        strategy: Strategy,
        initial_balance: Amount,
        stake_per_round: Amount,
        batch_size: usize,
    ) -> Self {
        Self {
            id: ContributorId::from(id),
            strategy,
            initial_balance,
            stake_per_round,
            batch_size,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |reason: &str| SimError::InvalidActor {
            actor: self.id.to_string(),
            reason: reason.to_string(),
        };
        if self.id.as_str().trim().is_empty() {
            return Err(invalid("empty id"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be at least 1"));
        }
        if self.stake_per_round == 0 {
            return Err(invalid("stake_per_round must be positive"));
        }
        if self.stake_per_round > self.initial_balance {
            return Err(invalid("stake_per_round exceeds initial_balance"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub rounds: usize,
    pub ledger: LedgerParams,
    pub train: TrainConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubmissionRecord {
    pub round: usize,
    pub actor: ContributorId,
    pub verdict: Verdict,
    pub final_weight: f64,
    pub duplicate_divisor: u32,
    pub reward_paid: Amount,
    pub stake: Amount,
    pub balances: BTreeMap<ContributorId, Amount>,
    pub contract_balance: Amount,
    pub accuracy: f64,
}

/// State at the end of a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundSnapshot {
    pub round: usize,
    pub balances: BTreeMap<ContributorId, Amount>,
    pub contract_balance: Amount,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub per_round: Vec<SubmissionRecord>,
    pub snapshots: Vec<RoundSnapshot>,
    pub initial_balances: BTreeMap<ContributorId, Amount>,
    pub initial_accuracy: f64,
    pub event_log: String,
    pub config_echo: String,
    pub seed: u64,
}

impl SimulationTrace {
    pub fn records_for<'a>(&'a self, actor: &'a ContributorId) -> impl Iterator<Item = &'a SubmissionRecord> + 'a {
        self.per_round.iter().filter(move |r| &r.actor == actor)
    }

    pub fn final_balance(&self, actor: &ContributorId) -> Option<Amount> {
        match self.snapshots.last() {
            Some(s) => s.balances.get(actor).copied(),
            None => self.initial_balances.get(actor).copied(),
        }
    }

    /// Balance of `actor` after each round, starting with round 1.
    pub fn balance_series(&self, actor: &ContributorId) -> Vec<Amount> {
        self.snapshots
            .iter()
            .filter_map(|s| s.balances.get(actor).copied())
            .collect()
    }

    pub fn accuracy_series(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.accuracy).collect()
    }
}

/// Stable 64-bit FNV-1a, used to name per-actor RNG streams.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// RNG stream for one actor; independent of which other actors exist.
pub fn actor_rng(seed: u64, actor: &ContributorId) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(actor.as_str().as_bytes()));
    rng
}

#[derive(Debug, Clone)]
struct Pool {
    remaining: Vec<usize>,
}

impl Pool {
    fn new(len: usize) -> Self {
        Self {
            remaining: (0..len).collect(),
        }
    }

    fn take(&mut self, n: usize, rng: &mut ChaCha8Rng) -> Option<Vec<usize>> {
        if self.remaining.len() < n {
            return None;
        }
        Some(
            (0..n)
                .map(|_| {
                    let i = rng.gen_range(0..self.remaining.len());
                    self.remaining.swap_remove(i)
                })
                .collect(),
        )
    }
}

/// Draw bookkeeping shared by all actors of one run.
#[derive(Debug, Clone)]
pub struct DrawState {
    good: Pool,
    bad: Pool,
    repeat_points: BTreeMap<ContributorId, LabeledUrl>,
    collusion_batch: Option<Vec<LabeledUrl>>,
}

impl DrawState {
    pub fn new(partition: &DatasetPartition) -> Self {
        Self {
            good: Pool::new(partition.good_pool.len()),
            bad: Pool::new(partition.bad_pool.len()),
            repeat_points: BTreeMap::new(),
            collusion_batch: None,
        }
    }

    pub fn good_remaining(&self) -> usize {
        self.good.remaining.len()
    }
}

fn url_safe(id: &ContributorId) -> String {
    id.as_str()
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Picks the batch `actor` submits in `round`.
pub fn strategy_draw(
    actor: &ActorSpec,
    round: usize,
    partition: &DatasetPartition,
    state: &mut DrawState,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<LabeledUrl>, SimError> {
    let exhausted = || SimError::PoolExhausted {
        actor: actor.id.clone(),
        round,
    };
    let tag = |mut p: LabeledUrl| {
        p.contributor_hint = Some(actor.id.to_string());
        p
    };
    match actor.strategy {
        Strategy::Good => {
            let idx = state.good.take(actor.batch_size, rng).ok_or_else(exhausted)?;
            Ok(idx.into_iter().map(|i| tag(partition.good_pool[i].clone())).collect())
        }
        Strategy::Bad => {
            let idx = state.bad.take(actor.batch_size, rng).ok_or_else(exhausted)?;
            Ok(idx.into_iter().map(|i| tag(partition.bad_pool[i].clone())).collect())
        }
        Strategy::RepeatSubmitter => {
            if let Some(point) = state.repeat_points.get(&actor.id) {
                return Ok(vec![point.clone()]);
            }
            let idx = state.good.take(1, rng).ok_or_else(exhausted)?;
            let point = tag(partition.good_pool[idx[0]].clone());
            state.repeat_points.insert(actor.id.clone(), point.clone());
            Ok(vec![point])
        }
        Strategy::Colluder => {
            if state.collusion_batch.is_none() {
                let idx = state.good.take(actor.batch_size, rng).ok_or_else(exhausted)?;
                state.collusion_batch = Some(idx.into_iter().map(|i| partition.good_pool[i].clone()).collect());
            }
            let shared = state.collusion_batch.as_ref().expect("drawn above");
            shared
                .iter()
                .map(|p| {
                    let host = normalize_host(&p.url).map_err(OracleError::from)?;
                    let url = format!("http://{host}/c/{}/r{round}", url_safe(&actor.id));
                    Ok(tag(LabeledUrl::new(url, p.label)))
                })
                .collect()
        }
    }
}

/// Runs `config.rounds` rounds with `actors` against a fresh ledger.
pub fn run_simulation(
    partition: &DatasetPartition,
    actors: &[ActorSpec],
    config: &SimConfig,
    whois: Arc<dyn WhoisClient>,
) -> Result<SimulationTrace, SimError> {
    if config.rounds == 0 {
        return Err(SimError::InvalidRounds);
    }
    let mut ids = BTreeSet::new();
    for actor in actors {
        actor.validate()?;
        if !ids.insert(actor.id.clone()) {
            return Err(SimError::InvalidActor {
                actor: actor.id.to_string(),
                reason: "duplicate id".into(),
            });
        }
    }
    let mut roster: Vec<&ActorSpec> = actors.iter().collect();
    roster.sort_by(|a, b| a.id.cmp(&b.id));

    let mut oracle = Oracle::new(&partition.base_set, whois, config.train)?;
    let mut ledger = LedgerState::genesis(&config.ledger)?;
    for actor in &roster {
        ledger.fund_account(&actor.id, actor.initial_balance)?;
    }
    ledger.annotate(
        "model",
        vec![("round", "0".into()), ("record", oracle.model().to_record())],
    );

    let mut rngs: BTreeMap<ContributorId, ChaCha8Rng> = roster
        .iter()
        .map(|a| (a.id.clone(), actor_rng(config.seed, &a.id)))
        .collect();
    let mut draws = DrawState::new(partition);
    let mut benched: BTreeSet<ContributorId> = BTreeSet::new();
    let initial_balances: BTreeMap<_, _> = roster.iter().map(|a| (a.id.clone(), a.initial_balance)).collect();
    let initial_accuracy = oracle.accuracy();

    let mut per_round = Vec::new();
    let mut snapshots = Vec::with_capacity(config.rounds);

    for round in 1..=config.rounds {
        for actor in &roster {
            if benched.contains(&actor.id) {
                continue;
            }
            if ledger.balance(&actor.id) < actor.stake_per_round {
                benched.insert(actor.id.clone());
                ledger.annotate(
                    "benched",
                    vec![
                        ("round", round.to_string()),
                        ("contributor", actor.id.to_string()),
                        ("balance", ledger.balance(&actor.id).to_string()),
                        ("stake_per_round", actor.stake_per_round.to_string()),
                    ],
                );
                continue;
            }
            let rng = rngs.get_mut(&actor.id).expect("one rng per actor");
            let batch = strategy_draw(actor, round, partition, &mut draws, rng)?;

            ledger.place_stake(&actor.id, actor.stake_per_round)?;
            let evaluation = oracle.grade(&batch, ledger.history())?;
            let report = evaluation.report;
            let settlement =
                ledger.settle_report(&actor.id, &report, evaluation.duplicates.max_domain_count, &batch)?;
            let mut fields = vec![("round", round.to_string()), ("contributor", actor.id.to_string())];
            fields.push(("report", report.to_record()));
            ledger.annotate("oracle_report", fields);
            if report.verdict.is_accepted() {
                oracle.merge(evaluation);
                ledger.annotate(
                    "model",
                    vec![("round", round.to_string()), ("record", oracle.model().to_record())],
                );
            }
            if !ledger.is_conserved() {
                return Err(SimError::ConservationViolated { round });
            }
            per_round.push(SubmissionRecord {
                round,
                actor: actor.id.clone(),
                verdict: report.verdict,
                final_weight: report.final_weight,
                duplicate_divisor: report.duplicate_divisor,
                reward_paid: settlement.reward_paid,
                stake: settlement.stake,
                balances: roster.iter().map(|a| (a.id.clone(), ledger.balance(&a.id))).collect(),
                contract_balance: ledger.contract_balance(),
                accuracy: oracle.accuracy(),
            });
        }
        snapshots.push(RoundSnapshot {
            round,
            balances: roster.iter().map(|a| (a.id.clone(), ledger.balance(&a.id))).collect(),
            contract_balance: ledger.contract_balance(),
            accuracy: oracle.accuracy(),
        });
    }

    Ok(SimulationTrace {
        per_round,
        snapshots,
        initial_balances,
        initial_accuracy,
        event_log: ledger.event_log(),
        config_echo: default_echo(actors, config),
        seed: config.seed,
    })
}

fn default_echo(actors: &[ActorSpec], config: &SimConfig) -> String {
    #[derive(Serialize)]
    struct Echo<'a> {
        seed: u64,
        rounds: usize,
        ledger: &'a LedgerParams,
        train: &'a TrainConfig,
        actors: &'a [ActorSpec],
    }
    toml::to_string(&Echo {
        seed: config.seed,
        rounds: config.rounds,
        ledger: &config.ledger,
        train: &config.train,
        actors,
    })
    .unwrap_or_default()
}

/// File contents in [`TRACE_FILES`] order.
pub fn render_trace(trace: &SimulationTrace) -> [(&'static str, String); 5] {
    let mut balances = String::from("round,actor,balance\n");
    let mut accuracy = String::from("round,accuracy\n");
    let mut contract = String::from("round,contract_balance\n");
    for snap in &trace.snapshots {
        for (actor, balance) in &snap.balances {
            balances.push_str(&format!("{},{},{}\n", snap.round, actor, balance));
        }
        accuracy.push_str(&format!("{},{}\n", snap.round, snap.accuracy));
        contract.push_str(&format!("{},{}\n", snap.round, snap.contract_balance));
    }
    [
        (TRACE_FILES[0], balances),
        (TRACE_FILES[1], accuracy),
        (TRACE_FILES[2], contract),
        (TRACE_FILES[3], trace.event_log.clone()),
        (TRACE_FILES[4], trace.config_echo.clone()),
    ]
}

pub fn emit_trace(trace: &SimulationTrace, out_dir: &Path) -> Result<Vec<PathBuf>, SimError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| SimError::Io { path, source }
    };
    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    let mut written = Vec::new();
    for (name, contents) in render_trace(trace) {
        let path = out_dir.join(name);
        fs::write(&path, contents).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
