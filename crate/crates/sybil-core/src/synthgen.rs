//! Deterministic synthetic snapshots with labeled Sybil bots.
//!
//! Radial bots fund every account straight from a treasury; sequential bots
//! hand the stake down a chain of accounts; complex bots compose the two.
//! Every farming account replays its bot's activity template against the
//! DApp, with random noise activities spliced in and amounts jittered.
//! Ordinary users draw templates from a shared pool (the "same tutorial"
//! confound) but are funded from fresh one-off sources, so no transfer
//! pattern connects them.
//!
//! The same seed always produces byte-identical output.

use crate::address::{AccountValue, Address};
use crate::ingest::{DappEvent, Transaction};
use crate::pipeline::Snapshot;
use crate::report::{BotLabel, GroundTruth, PatternType};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// DApp functions the synthetic accounts can trigger; route tags follow the
/// bridge convention (origin → destination).
const ACTIVITY_VOCAB: &[&str] = &[
    "send",
    "convert",
    "add_liquidity",
    "remove_liquidity",
    "stake",
    "unstake",
    "claim",
    "swap",
    "bridge_in",
    "bridge_out",
    "P→O",
    "O→P",
    "E→O",
    "O→E",
    "P→E",
    "E→P",
    "G→E",
    "E→G",
];

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("chains list is empty")]
    NoChains,
    #[error("noise_probability {0} outside [0,1]")]
    BadNoiseProbability(f64),
    #[error("amount_jitter {0} outside [0,1]")]
    BadAmountJitter(f64),
    #[error("template length range {0}..={1} is empty or zero")]
    BadTemplateRange(usize, usize),
    #[error("template_pool_size must be ≥ 1 when ordinary users are generated")]
    EmptyTemplatePool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub chains: Vec<String>,
    #[serde(default)]
    pub n_radial_bots: usize,
    #[serde(default)]
    pub n_sequential_bots: usize,
    #[serde(default)]
    pub n_complex_bots: usize,
    #[serde(default = "default_accounts_per_bot")]
    pub radial_accounts_per_bot: usize,
    #[serde(default = "default_accounts_per_bot")]
    pub sequential_accounts_per_bot: usize,
    #[serde(default = "default_accounts_per_bot")]
    pub complex_accounts_per_bot: usize,
    #[serde(default)]
    pub n_ordinary_users: usize,
    #[serde(default = "default_template_len_min")]
    pub template_len_min: usize,
    #[serde(default = "default_template_len_max")]
    pub template_len_max: usize,
    #[serde(default = "default_noise_probability")]
    pub noise_probability: f64,
    #[serde(default = "default_amount_jitter")]
    pub amount_jitter: f64,
    #[serde(default = "default_template_pool_size")]
    pub template_pool_size: usize,
}

fn default_accounts_per_bot() -> usize {
    8
}
fn default_template_len_min() -> usize {
    10
}
fn default_template_len_max() -> usize {
    14
}
fn default_noise_probability() -> f64 {
    0.1
}
fn default_amount_jitter() -> f64 {
    0.02
}
fn default_template_pool_size() -> usize {
    40
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.chains.is_empty() {
            return Err(ScenarioError::NoChains);
        }
        if !(0.0..=1.0).contains(&self.noise_probability) {
            return Err(ScenarioError::BadNoiseProbability(self.noise_probability));
        }
        if !(0.0..=1.0).contains(&self.amount_jitter) {
            return Err(ScenarioError::BadAmountJitter(self.amount_jitter));
        }
        if self.template_len_min == 0 || self.template_len_min > self.template_len_max {
            return Err(ScenarioError::BadTemplateRange(
                self.template_len_min,
                self.template_len_max,
            ));
        }
        if self.n_ordinary_users > 0 && self.template_pool_size == 0 {
            return Err(ScenarioError::EmptyTemplatePool);
        }
        Ok(())
    }
}

/// One template step: activity type plus its base amount in micro-precision.
type Template = Vec<(&'static str, f64)>;

struct Generator {
    rng: ChaCha8Rng,
    cfg: ScenarioConfig,
    txs: Vec<Transaction>,
    events: Vec<DappEvent>,
    issued: BTreeSet<AccountValue>,
    tx_counter: u64,
    event_counter: u64,
    clock: u64,
}

impl Generator {
    fn new(cfg: ScenarioConfig) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            cfg,
            txs: Vec::new(),
            events: Vec::new(),
            issued: BTreeSet::new(),
            tx_counter: 0,
            event_counter: 0,
            clock: 1_650_000_000,
        }
    }

    fn next_account(&mut self) -> AccountValue {
        loop {
            let mut bytes = [0u8; 20];
            self.rng.fill_bytes(&mut bytes);
            let value = AccountValue::parse(&hex::encode(bytes)).expect("hex is valid");
            if self.issued.insert(value.clone()) {
                return value;
            }
        }
    }

    fn tick(&mut self) -> u64 {
        self.clock += self.rng.random_range(30..600);
        self.clock
    }

    fn chain_for(&self, entity_index: usize) -> String {
        self.cfg.chains[entity_index % self.cfg.chains.len()].clone()
    }

    fn jittered(&mut self, base: f64) -> String {
        let jitter = self.cfg.amount_jitter;
        let factor = 1.0 + jitter * (self.rng.random::<f64>() * 2.0 - 1.0);
        format!("{:.6}", (base * factor).max(0.000001))
    }

    fn push_transfer(&mut self, chain: &str, from: &AccountValue, to: &AccountValue, base: f64) {
        let amount = self.jittered(base);
        let ts = self.tick();
        self.tx_counter += 1;
        self.txs.push(Transaction {
            tx_hash: format!("0xf{:039x}", self.tx_counter),
            chain: chain.to_string(),
            timestamp: ts,
            from: Address {
                chain: chain.to_string(),
                value: from.clone(),
            },
            to: Address {
                chain: chain.to_string(),
                value: to.clone(),
            },
            token: "ETH".into(),
            amount: amount.parse().expect("generated amount parses"),
            from_is_contract: false,
            to_is_contract: false,
        });
    }

    fn push_event(&mut self, chain: &str, account: &AccountValue, ty: &str, base: f64) {
        let amount = self.jittered(base);
        let ts = self.tick();
        self.event_counter += 1;
        let (route_from, route_to) = match ty.split_once('→') {
            Some((a, b)) => (Some(a.to_string()), Some(b.to_string())),
            None => (None, None),
        };
        self.events.push(DappEvent {
            chain: chain.to_string(),
            tx_hash: format!("0xe{:039x}", self.event_counter),
            timestamp: ts,
            account: account.clone(),
            activity_type: ty.to_string(),
            amount: Some(amount.parse().expect("generated amount parses")),
            route_from,
            route_to,
        });
    }

    fn random_template(&mut self) -> Template {
        let len = self
            .rng
            .random_range(self.cfg.template_len_min..=self.cfg.template_len_max);
        let mut vocab: Vec<&'static str> = ACTIVITY_VOCAB.to_vec();
        let mut template = Vec::with_capacity(len);
        for _ in 0..len {
            let ty = if vocab.is_empty() {
                ACTIVITY_VOCAB[self.rng.random_range(0..ACTIVITY_VOCAB.len())]
            } else {
                vocab.swap_remove(self.rng.random_range(0..vocab.len()))
            };
            let base = 0.5 + self.rng.random::<f64>() * 2.0;
            template.push((ty, base));
        }
        template
    }

    /// Replay a template for one account, splicing in noise activities
    /// (random DApp functions) at the configured probability.
    fn emit_activities(&mut self, chain: &str, account: &AccountValue, template: &Template) {
        for &(ty, base) in template {
            if self.rng.random_bool(self.cfg.noise_probability) {
                let noise_ty = ACTIVITY_VOCAB[self.rng.random_range(0..ACTIVITY_VOCAB.len())];
                let noise_base = 0.5 + self.rng.random::<f64>() * 2.0;
                self.push_event(chain, account, noise_ty, noise_base);
            }
            self.push_event(chain, account, ty, base);
        }
    }

    fn radial_bot(&mut self, index: usize) -> BotLabel {
        let chain = self.chain_for(index);
        let treasury = self.next_account();
        let accounts: Vec<AccountValue> = (0..self.cfg.radial_accounts_per_bot)
            .map(|_| self.next_account())
            .collect();
        let template = self.random_template();
        for acc in &accounts {
            self.push_transfer(&chain, &treasury, acc, 10.0);
        }
        for acc in &accounts {
            self.emit_activities(&chain, acc, &template);
        }
        if self.rng.random_bool(0.5) {
            for acc in &accounts {
                self.push_transfer(&chain, acc, &treasury, 2.0);
            }
        }
        BotLabel {
            bot_id: format!("radial-{index}"),
            pattern_type: PatternType::Radial,
            treasury,
            accounts: accounts.into_iter().collect(),
        }
    }

    fn sequential_bot(&mut self, index: usize) -> BotLabel {
        let chain = self.chain_for(index);
        let treasury = self.next_account();
        let accounts: Vec<AccountValue> = (0..self.cfg.sequential_accounts_per_bot)
            .map(|_| self.next_account())
            .collect();
        let template = self.random_template();
        let mut prev = treasury.clone();
        for (i, acc) in accounts.iter().enumerate() {
            self.push_transfer(&chain, &prev, acc, 10.0 - 0.2 * i as f64);
            self.emit_activities(&chain, acc, &template);
            prev = acc.clone();
        }
        if self.rng.random_bool(0.5) {
            self.push_transfer(&chain, &prev, &treasury, 1.0);
        }
        BotLabel {
            bot_id: format!("sequential-{index}"),
            pattern_type: PatternType::Sequential,
            treasury,
            accounts: accounts.into_iter().collect(),
        }
    }

    fn complex_bot(&mut self, index: usize) -> BotLabel {
        let chain = self.chain_for(index);
        let treasury = self.next_account();
        let n = self.cfg.complex_accounts_per_bot;
        let template = self.random_template();
        let radial_first = index.is_multiple_of(2);
        let mut farmers: Vec<AccountValue> = Vec::with_capacity(n);

        if radial_first {
            // treasury → intermediaries → farming leaves
            let n_mid = 2 + (n > 6) as usize;
            let mids: Vec<AccountValue> = (0..n_mid).map(|_| self.next_account()).collect();
            for mid in &mids {
                self.push_transfer(&chain, &treasury, mid, 30.0);
            }
            for i in 0..n {
                let leaf = self.next_account();
                self.push_transfer(&chain, &mids[i % n_mid], &leaf, 8.0);
                farmers.push(leaf);
            }
        } else {
            // treasury → farming chain, each chain account radiating to
            // farming leaves
            let chain_len = n.min(3);
            let heads: Vec<AccountValue> = (0..chain_len).map(|_| self.next_account()).collect();
            let mut prev = treasury.clone();
            for head in &heads {
                self.push_transfer(&chain, &prev, head, 40.0);
                prev = head.clone();
            }
            farmers.extend(heads.iter().cloned());
            for i in 0..n.saturating_sub(chain_len) {
                let leaf = self.next_account();
                self.push_transfer(&chain, &heads[i % chain_len], &leaf, 6.0);
                farmers.push(leaf);
            }
        }

        for acc in &farmers {
            self.emit_activities(&chain, acc, &template);
        }
        if self.rng.random_bool(0.5) {
            for acc in farmers.clone() {
                self.push_transfer(&chain, &acc, &treasury, 0.5);
            }
        }
        BotLabel {
            bot_id: format!("complex-{index}"),
            pattern_type: PatternType::Complex,
            treasury,
            accounts: farmers.into_iter().collect(),
        }
    }

    fn ordinary_user(&mut self, index: usize, pool: &[Template]) {
        let chain = self.chain_for(index);
        let funder = self.next_account();
        let user = self.next_account();
        let funding = 5.0 + self.rng.random::<f64>() * 20.0;
        self.push_transfer(&chain, &funder, &user, funding);
        let template_idx = self.rng.random_range(0..pool.len());
        let template = pool[template_idx].clone();
        self.emit_activities(&chain, &user, &template);
        // occasional outgoing transfers to fresh counterparties
        if self.rng.random_bool(0.5) {
            let n_out = self.rng.random_range(1..=2);
            for _ in 0..n_out {
                let counterparty = self.next_account();
                let spend = self.rng.random::<f64>() * 3.0;
                self.push_transfer(&chain, &user, &counterparty, spend);
            }
        }
    }
}

/// Generate a labeled synthetic snapshot. Deterministic in the seed.
pub fn generate(cfg: &ScenarioConfig) -> Result<(Snapshot, GroundTruth), ScenarioError> {
    cfg.validate()?;
    let mut gen = Generator::new(cfg.clone());
    let mut bots = Vec::new();
    for i in 0..gen.cfg.n_radial_bots {
        bots.push(gen.radial_bot(i));
    }
    for i in 0..gen.cfg.n_sequential_bots {
        bots.push(gen.sequential_bot(i));
    }
    for i in 0..gen.cfg.n_complex_bots {
        bots.push(gen.complex_bot(i));
    }
    let pool: Vec<Template> = (0..gen.cfg.template_pool_size.max(1))
        .map(|_| gen.random_template())
        .collect();
    for i in 0..gen.cfg.n_ordinary_users {
        gen.ordinary_user(i, &pool);
    }

    let snapshot = Snapshot::assemble(gen.txs, gen.events);
    let truth = GroundTruth {
        snapshot_id: snapshot.content_id(),
        bots,
    };
    debug_assert!(truth.labels_are_disjoint());
    Ok((snapshot, truth))
}
