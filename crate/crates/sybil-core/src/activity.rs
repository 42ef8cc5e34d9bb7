//! DApp activity sequences and their pair-set similarity.
//!
//! A sequence is represented by the set of temporally ordered pairs of its
//! activities; two sequences are compared by the Jaccard coefficient of
//! their pair sets. The pair representation tolerates noise activities
//! spliced into a sequence while still rewarding agreement on the relative
//! order of the real activities.

use crate::address::AccountValue;
use crate::amount::Amount;
use crate::ingest::DappEvent;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Relative-gap guard against division by zero amounts.
pub const AMOUNT_EPS: f64 = 1e-12;

/// How two activities are considered the same for pairing purposes.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum MatchMode {
    /// Activity types only. Sufficient in practice; the default.
    #[default]
    TypeOnly,
    /// Types plus amounts within relative tolerance `delta`.
    TypeAndAmount { delta: f64 },
}

/// One DApp interaction of one account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activity {
    pub timestamp: u64,
    /// Source transaction, used to break timestamp ties deterministically.
    pub tx_hash: String,
    pub activity_type: String,
    pub amount: Option<Amount>,
    pub route_from: Option<String>,
    pub route_to: Option<String>,
}

impl Activity {
    fn from_event(ev: &DappEvent) -> Self {
        Activity {
            timestamp: ev.timestamp,
            tx_hash: ev.tx_hash.clone(),
            activity_type: ev.activity_type.clone(),
            amount: ev.amount,
            route_from: ev.route_from.clone(),
            route_to: ev.route_to.clone(),
        }
    }
}

/// Time-ordered activities of one account.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActivitySequence {
    pub account: AccountValue,
    pub items: Vec<Activity>,
}

impl ActivitySequence {
    pub fn new(account: AccountValue, mut items: Vec<Activity>) -> Self {
        items.sort_by(|a, b| {
            (a.timestamp, &a.tx_hash).cmp(&(b.timestamp, &b.tx_hash))
        });
        ActivitySequence { account, items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Amount component of an [`ActivityKey`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AmountKey {
    /// Amounts are not part of the match (TypeOnly mode).
    Ignored,
    /// Activity carries no amount; matches only other missing amounts.
    Missing,
    /// Exact fixed-point units (TypeAndAmount with delta = 0).
    Exact(u128),
    /// Log-scale bucket of width ln(1+delta); amounts within the relative
    /// tolerance usually share a bucket. Zero amounts get their own bucket.
    Bucket(i64),
}

/// Match-relevant projection of an activity under a [`MatchMode`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActivityKey {
    pub activity_type: String,
    pub amount: AmountKey,
}

impl ActivityKey {
    pub fn project(act: &Activity, mode: MatchMode) -> Self {
        let amount = match mode {
            MatchMode::TypeOnly => AmountKey::Ignored,
            MatchMode::TypeAndAmount { delta } => match act.amount {
                None => AmountKey::Missing,
                Some(a) if delta <= 0.0 => AmountKey::Exact(a.raw()),
                Some(a) if a.is_zero() => AmountKey::Bucket(i64::MIN),
                Some(a) => {
                    let bucket = (a.to_f64().ln() / (1.0 + delta).ln()).round();
                    AmountKey::Bucket(bucket as i64)
                }
            },
        };
        ActivityKey {
            activity_type: act.activity_type.clone(),
            amount,
        }
    }
}

/// The set of temporally ordered activity pairs of one sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    pub pairs: BTreeSet<(ActivityKey, ActivityKey)>,
    item_count: usize,
    solo_key: Option<ActivityKey>,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Pairwise activity match per the similarity definition: equal types, and
/// under TypeAndAmount also amounts within relative gap `delta` (missing
/// amounts match only missing amounts).
pub fn activity_match(x: &Activity, y: &Activity, mode: MatchMode) -> bool {
    if x.activity_type != y.activity_type {
        return false;
    }
    match mode {
        MatchMode::TypeOnly => true,
        MatchMode::TypeAndAmount { delta } => match (x.amount, y.amount) {
            (None, None) => true,
            (Some(a), Some(b)) => Amount::relative_gap(a, b, AMOUNT_EPS) <= delta,
            _ => false,
        },
    }
}

/// All ordered pairs (itemᵢ, itemⱼ) with i < j, projected to keys and
/// deduplicated.
pub fn pair_set(seq: &ActivitySequence, mode: MatchMode) -> PairSet {
    let keys: Vec<ActivityKey> = seq
        .items
        .iter()
        .map(|a| ActivityKey::project(a, mode))
        .collect();
    let mut pairs = BTreeSet::new();
    for i in 0..keys.len() {
        for j in (i + 1)..keys.len() {
            pairs.insert((keys[i].clone(), keys[j].clone()));
        }
    }
    PairSet {
        pairs,
        item_count: keys.len(),
        solo_key: if keys.len() == 1 { Some(keys[0].clone()) } else { None },
    }
}

/// Jaccard similarity of two precomputed pair sets, with the degenerate
/// cases fixed: two empty sequences (or two singletons with matching keys)
/// score 1; a pairless sequence against anything else scores 0.
pub fn pair_set_similarity(a: &PairSet, b: &PairSet) -> f64 {
    if a.pairs.is_empty() && b.pairs.is_empty() {
        if a.item_count == 0 && b.item_count == 0 {
            return 1.0;
        }
        return match (&a.solo_key, &b.solo_key) {
            (Some(x), Some(y)) if x == y => 1.0,
            _ => 0.0,
        };
    }
    if a.pairs.is_empty() || b.pairs.is_empty() {
        return 0.0;
    }
    let inter = a.pairs.intersection(&b.pairs).count();
    let union = a.pairs.len() + b.pairs.len() - inter;
    inter as f64 / union as f64
}

/// Sequence similarity: Jaccard coefficient of the two pair sets.
pub fn seq_sim(s1: &ActivitySequence, s2: &ActivitySequence, mode: MatchMode) -> f64 {
    pair_set_similarity(&pair_set(s1, mode), &pair_set(s2, mode))
}

/// Group decoded events into one ordered sequence per account. Events with
/// an empty activity type are skipped and reported.
pub fn build_activity_sequences(
    events: &[DappEvent],
) -> (BTreeMap<AccountValue, ActivitySequence>, Vec<String>) {
    let mut by_account: BTreeMap<AccountValue, Vec<Activity>> = BTreeMap::new();
    let mut diags = Vec::new();
    for ev in events {
        if ev.activity_type.is_empty() {
            diags.push(format!(
                "event {} for {}: empty activity_type, skipped",
                ev.tx_hash, ev.account
            ));
            continue;
        }
        by_account
            .entry(ev.account.clone())
            .or_default()
            .push(Activity::from_event(ev));
    }
    let sequences = by_account
        .into_iter()
        .map(|(account, items)| {
            let seq = ActivitySequence::new(account.clone(), items);
            (account, seq)
        })
        .collect();
    (sequences, diags)
}
