//! Contract ledger: balances, escrowed stakes, settlement and slashing.
//!
//! Currency is integer units. Every operation validates before it mutates, so an error
//! leaves the state untouched, and `contract + Σ balances + Σ stakes == total_minted`
//! holds after every call.

use std::collections::BTreeMap;
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::LabeledUrl;
use crate::oracle::{SubmissionHistory, Verdict, WeightReport};
use crate::ContributorId;

pub type Amount = u64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{contributor} has {available} but needs {needed}")]
    InsufficientBalance {
        contributor: ContributorId,
        needed: Amount,
        available: Amount,
    },
    #[error("{0} already has an open stake")]
    StakeAlreadyOpen(ContributorId),
    #[error("stake {amount} exceeds the cap of {limit}")]
    CapExceeded { amount: Amount, limit: Amount },
    #[error("{0} has no open stake")]
    NoOpenStake(ContributorId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LedgerParams {
    pub creator_deposit: Amount,
    pub stake_cap_fraction: f64,
    pub inference_fee: Amount,
}

impl Default for LedgerParams {
    fn default() -> Self {
        Self {
            creator_deposit: 10_000,
            stake_cap_fraction: 0.1,
            inference_fee: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpenStake {
    pub amount: Amount,
    /// Cap in force when the stake was placed.
    pub cap_at_placement: Amount,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settlement {
    pub contributor: ContributorId,
    pub stake: Amount,
    pub final_weight: f64,
    pub duplicate_divisor: u32,
    pub reward_paid: Amount,
    pub stake_returned: bool,
    /// Surplus was cut to what the contract could cover.
    pub clamped: bool,
}

/// One audit line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LedgerEvent {
    pub seq: u64,
    pub op: String,
    pub fields: Vec<(String, String)>,
}

impl fmt::Display for LedgerEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "seq={} op={}", self.seq, self.op)?;
        for (k, v) in &self.fields {
            write!(f, " {k}={v}")?;
        }
        Ok(())
    }
}

fn signed(delta: i128) -> String {
    if delta >= 0 {
        format!("+{delta}")
    } else {
        delta.to_string()
    }
}

/// Reward surplus beyond the returned stake: `round_half_up(weight / divisor * stake)`.
pub fn reward_surplus(final_weight: f64, duplicate_divisor: u32, stake: Amount) -> Amount {
    let exact = final_weight / f64::from(duplicate_divisor.max(1)) * stake as f64;
    if exact.is_finite() && exact > 0.0 {
        (exact + 0.5).floor() as Amount
    } else {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedgerState {
    contract_balance: Amount,
    balances: BTreeMap<ContributorId, Amount>,
    active_stakes: BTreeMap<ContributorId, OpenStake>,
    history: SubmissionHistory,
    stake_cap_fraction: f64,
    inference_fee: Amount,
    total_minted: Amount,
    events: Vec<LedgerEvent>,
}

impl LedgerState {
    pub fn genesis(params: &LedgerParams) -> Result<Self, LedgerError> {
        if params.creator_deposit == 0 {
            return Err(LedgerError::InvalidParameter("creator_deposit must be positive".into()));
        }
        if !(params.stake_cap_fraction > 0.0 && params.stake_cap_fraction <= 1.0) {
            return Err(LedgerError::InvalidParameter(format!(
                "stake_cap_fraction must be in (0, 1], got {}",
                params.stake_cap_fraction
            )));
        }
        let mut state = Self {
            contract_balance: params.creator_deposit,
            balances: BTreeMap::new(),
            active_stakes: BTreeMap::new(),
            history: SubmissionHistory::new(),
            stake_cap_fraction: params.stake_cap_fraction,
            inference_fee: params.inference_fee,
            total_minted: params.creator_deposit,
            events: Vec::new(),
        };
        state.push_event(
            "genesis",
            vec![
                ("creator_deposit", params.creator_deposit.to_string()),
                ("stake_cap_fraction", params.stake_cap_fraction.to_string()),
                ("inference_fee", params.inference_fee.to_string()),
                ("d_contract", signed(i128::from(params.creator_deposit))),
            ],
        );
        Ok(state)
    }

    pub fn contract_balance(&self) -> Amount {
        self.contract_balance
    }

    pub fn balance(&self, contributor: &ContributorId) -> Amount {
        self.balances.get(contributor).copied().unwrap_or(0)
    }

    pub fn balances(&self) -> &BTreeMap<ContributorId, Amount> {
        &self.balances
    }

    pub fn active_stake(&self, contributor: &ContributorId) -> Option<OpenStake> {
        self.active_stakes.get(contributor).copied()
    }

    pub fn active_stakes(&self) -> &BTreeMap<ContributorId, OpenStake> {
        &self.active_stakes
    }

    pub fn history(&self) -> &SubmissionHistory {
        &self.history
    }

    pub fn total_minted(&self) -> Amount {
        self.total_minted
    }

    pub fn inference_fee(&self) -> Amount {
        self.inference_fee
    }

    pub fn stake_cap_fraction(&self) -> f64 {
        self.stake_cap_fraction
    }

    /// Largest stake accepted right now.
    pub fn stake_cap(&self) -> Amount {
        (self.stake_cap_fraction * self.contract_balance as f64).floor() as Amount
    }

    pub fn events(&self) -> &[LedgerEvent] {
        &self.events
    }

    /// The event log, one line per event.
    pub fn event_log(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&e.to_string());
            out.push('\n');
        }
        out
    }

    /// `contract + Σ balances + Σ stakes - total_minted`; zero when books balance.
    pub fn conservation_gap(&self) -> i128 {
        let held = u128::from(self.contract_balance)
            + self.balances.values().map(|v| u128::from(*v)).sum::<u128>()
            + self.active_stakes.values().map(|s| u128::from(s.amount)).sum::<u128>();
        held as i128 - i128::from(self.total_minted)
    }

    pub fn is_conserved(&self) -> bool {
        self.conservation_gap() == 0
    }

    /// Appends a non-monetary audit line (oracle reports, scheduling notes).
    pub fn annotate(&mut self, op: &str, fields: Vec<(&str, String)>) {
        self.push_event(op, fields);
    }

    fn push_event(&mut self, op: &str, fields: Vec<(&str, String)>) {
        let seq = self.events.len() as u64 + 1;
        self.events.push(LedgerEvent {
            seq,
            op: op.to_string(),
            fields: fields.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        });
    }

    /// Mints `amount` into a contributor account.
    pub fn fund_account(&mut self, contributor: &ContributorId, amount: Amount) -> Result<(), LedgerError> {
        if amount == 0 {
            return Err(LedgerError::InvalidParameter("funding amount must be positive".into()));
        }
        let balance = self.balance(contributor);
        let (Some(new_balance), Some(new_minted)) =
            (balance.checked_add(amount), self.total_minted.checked_add(amount))
        else {
            return Err(LedgerError::InvalidParameter("funding overflows currency range".into()));
        };
        self.balances.insert(contributor.clone(), new_balance);
        self.total_minted = new_minted;
        self.push_event(
            "fund",
            vec![
                ("contributor", contributor.to_string()),
                ("amount", amount.to_string()),
                ("d_balance", signed(i128::from(amount))),
            ],
        );
        Ok(())
    }

    pub fn place_stake(&mut self, contributor: &ContributorId, amount: Amount) -> Result<(), LedgerError> {
        if amount == 0 {
            return Err(LedgerError::InvalidParameter("stake must be positive".into()));
        }
        if self.active_stakes.contains_key(contributor) {
            return Err(LedgerError::StakeAlreadyOpen(contributor.clone()));
        }
        let available = self.balance(contributor);
        if available < amount {
            return Err(LedgerError::InsufficientBalance {
                contributor: contributor.clone(),
                needed: amount,
                available,
            });
        }
        let limit = self.stake_cap();
        if amount > limit {
            return Err(LedgerError::CapExceeded { amount, limit });
        }
        self.balances.insert(contributor.clone(), available - amount);
        self.active_stakes.insert(
            contributor.clone(),
            OpenStake {
                amount,
                cap_at_placement: limit,
            },
        );
        self.push_event(
            "stake",
            vec![
                ("contributor", contributor.to_string()),
                ("amount", amount.to_string()),
                ("cap", limit.to_string()),
                ("d_balance", signed(-i128::from(amount))),
                ("d_stake", signed(i128::from(amount))),
            ],
        );
        Ok(())
    }

    /// Settles an oracle report against the contributor's open stake.
    pub fn settle_report(
        &mut self,
        contributor: &ContributorId,
        report: &WeightReport,
        max_domain_count: u32,
        submission: &[LabeledUrl],
    ) -> Result<Settlement, LedgerError> {
        self.settle(
            contributor,
            report.verdict,
            report.final_weight,
            max_domain_count,
            submission,
        )
    }

    /// Pays `stake + round(weight / divisor * stake)` on acceptance; otherwise the stake
    /// moves to the contract. History records the batch either way.
    pub fn settle(
        &mut self,
        contributor: &ContributorId,
        verdict: Verdict,
        final_weight: f64,
        max_domain_count: u32,
        submission: &[LabeledUrl],
    ) -> Result<Settlement, LedgerError> {
        let stake = self
            .active_stakes
            .get(contributor)
            .ok_or_else(|| LedgerError::NoOpenStake(contributor.clone()))?
            .amount;
        if !final_weight.is_finite() {
            return Err(LedgerError::InvalidParameter(format!(
                "final_weight {final_weight} is not finite"
            )));
        }
        if verdict.is_accepted() && final_weight <= 0.0 {
            return Err(LedgerError::InvalidParameter(
                "accepted verdict requires a positive weight".into(),
            ));
        }
        let duplicate_divisor = max_domain_count.max(1);
        let balance = self.balance(contributor);

        let (reward_paid, stake_returned, clamped, d_contract) = if verdict.is_accepted() {
            let owed = reward_surplus(final_weight, duplicate_divisor, stake);
            let surplus = owed.min(self.contract_balance);
            (stake + surplus, true, surplus < owed, -i128::from(surplus))
        } else {
            (0, false, false, i128::from(stake))
        };
        if balance.checked_add(reward_paid).is_none() {
            return Err(LedgerError::InvalidParameter("reward overflows currency range".into()));
        }

        self.active_stakes.remove(contributor);
        self.balances.insert(contributor.clone(), balance + reward_paid);
        self.contract_balance = (i128::from(self.contract_balance) + d_contract) as Amount;
        self.history.record(contributor, submission, verdict.is_accepted());

        if clamped {
            warn!("contract cannot cover the full reward for {contributor}; surplus clamped");
            self.push_event(
                "insolvency_warning",
                vec![
                    ("contributor", contributor.to_string()),
                    (
                        "owed",
                        reward_surplus(final_weight, duplicate_divisor, stake).to_string(),
                    ),
                    ("paid", (reward_paid - stake).to_string()),
                ],
            );
        }
        self.push_event(
            "settle",
            vec![
                ("contributor", contributor.to_string()),
                ("verdict", verdict.to_string()),
                ("stake", stake.to_string()),
                ("final_weight", final_weight.to_string()),
                ("duplicate_divisor", duplicate_divisor.to_string()),
                ("reward_paid", reward_paid.to_string()),
                ("urls", submission.len().to_string()),
                ("d_stake", signed(-i128::from(stake))),
                ("d_balance", signed(i128::from(reward_paid))),
                ("d_contract", signed(d_contract)),
            ],
        );
        Ok(Settlement {
            contributor: contributor.clone(),
            stake,
            final_weight,
            duplicate_divisor,
            reward_paid,
            stake_returned,
            clamped,
        })
    }

    /// Moves the inference fee from `user` to the contract. One fee buys one prediction.
    pub fn pay_inference_fee(&mut self, user: &ContributorId) -> Result<(), LedgerError> {
        let fee = self.inference_fee;
        let available = self.balance(user);
        if available < fee {
            return Err(LedgerError::InsufficientBalance {
                contributor: user.clone(),
                needed: fee,
                available,
            });
        }
        if fee > 0 {
            self.balances.insert(user.clone(), available - fee);
            self.contract_balance += fee;
        }
        self.push_event(
            "inference_fee",
            vec![
                ("user", user.to_string()),
                ("fee", fee.to_string()),
                ("d_balance", signed(-i128::from(fee))),
                ("d_contract", signed(i128::from(fee))),
            ],
        );
        Ok(())
    }
}

/// Records a batch in `history`; `accepted_urls` only grows for accepted settlements.
pub fn record_submission(
    history: &mut SubmissionHistory,
    contributor: &ContributorId,
    data: &[LabeledUrl],
    accepted: bool,
) {
    history.record(contributor, data, accepted);
}
