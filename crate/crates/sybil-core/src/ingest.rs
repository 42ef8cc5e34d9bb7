//! Snapshot ingestion: newline-delimited JSON transaction and activity-event
//! records, plus address filter lists.
//!
//! Forensic runs operate on large published dumps, so malformed records are
//! skipped with a line-numbered diagnostic instead of aborting the run. Only
//! an unreadable stream is fatal.

use crate::address::{AccountValue, Address};
use crate::amount::Amount;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error reading snapshot stream: {0}")]
    Io(#[from] std::io::Error),
}

/// One skipped input record: 1-based line number plus the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParseDiagnostic {
    pub line: usize,
    pub reason: String,
}

/// One token-transfer record from a chain snapshot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub tx_hash: String,
    pub chain: String,
    pub timestamp: u64,
    pub from: Address,
    pub to: Address,
    pub token: String,
    pub amount: Amount,
    pub from_is_contract: bool,
    pub to_is_contract: bool,
}

/// Wire form of a transaction record (one NDJSON line).
#[derive(Debug, Serialize, Deserialize)]
struct TransactionRecord {
    chain: String,
    tx_hash: String,
    block_time: u64,
    from: String,
    to: String,
    token: String,
    amount: String,
    from_is_contract: bool,
    to_is_contract: bool,
}

/// One pre-decoded DApp interaction record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DappEvent {
    pub chain: String,
    pub tx_hash: String,
    pub timestamp: u64,
    pub account: AccountValue,
    pub activity_type: String,
    pub amount: Option<Amount>,
    pub route_from: Option<String>,
    pub route_to: Option<String>,
}

/// Wire form of an activity-event record (one NDJSON line).
#[derive(Debug, Serialize, Deserialize)]
struct DappEventRecord {
    chain: String,
    tx_hash: String,
    block_time: u64,
    account: String,
    activity_type: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    amount: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    route_from: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    route_to: Option<String>,
}

/// Address filter lists applied before graph construction. Membership is
/// tested on the normalized account value, chain-agnostic.
#[derive(Debug, Clone, Default)]
pub struct FilterConfig {
    pub contract_addresses: BTreeSet<AccountValue>,
    pub exchange_addresses: BTreeSet<AccountValue>,
    pub whitelist: BTreeSet<AccountValue>,
}

impl FilterConfig {
    fn removes(&self, value: &AccountValue) -> bool {
        self.contract_addresses.contains(value)
            || self.exchange_addresses.contains(value)
            || self.whitelist.contains(value)
    }
}

/// Parse a stream of newline-delimited transaction records for one chain.
///
/// Records whose `chain` field disagrees with `chain`, violate an invariant
/// (negative amount, empty or duplicate tx_hash, malformed address) or fail
/// to deserialize yield a diagnostic and are skipped. Output preserves input
/// order.
pub fn parse_transactions(
    stream: impl Read,
    chain: &str,
) -> Result<(Vec<Transaction>, Vec<ParseDiagnostic>), IngestError> {
    let reader = BufReader::new(stream);
    let mut txs = Vec::new();
    let mut diags = Vec::new();
    let mut seen_hashes: HashSet<String> = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_transaction_line(&line, chain, &mut seen_hashes) {
            Ok(tx) => txs.push(tx),
            Err(reason) => diags.push(ParseDiagnostic { line: lineno, reason }),
        }
    }
    Ok((txs, diags))
}

fn parse_transaction_line(
    line: &str,
    chain: &str,
    seen_hashes: &mut HashSet<String>,
) -> Result<Transaction, String> {
    let rec: TransactionRecord =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if rec.chain != chain {
        return Err(format!("chain mismatch: record says {:?}", rec.chain));
    }
    if rec.tx_hash.is_empty() {
        return Err("empty tx_hash".to_string());
    }
    if !seen_hashes.insert(rec.tx_hash.clone()) {
        return Err(format!("duplicate tx_hash {:?}", rec.tx_hash));
    }
    let amount: Amount = rec
        .amount
        .parse()
        .map_err(|e| format!("{e} (amount {:?})", rec.amount))?;
    let from = Address::new(&rec.chain, &rec.from).map_err(|e| format!("from address: {e}"))?;
    let to = Address::new(&rec.chain, &rec.to).map_err(|e| format!("to address: {e}"))?;
    Ok(Transaction {
        tx_hash: rec.tx_hash,
        chain: rec.chain,
        timestamp: rec.block_time,
        from,
        to,
        token: rec.token,
        amount,
        from_is_contract: rec.from_is_contract,
        to_is_contract: rec.to_is_contract,
    })
}

/// Serialize a transaction back to its canonical NDJSON line.
pub fn serialize_transaction(tx: &Transaction) -> String {
    let rec = TransactionRecord {
        chain: tx.chain.clone(),
        tx_hash: tx.tx_hash.clone(),
        block_time: tx.timestamp,
        from: tx.from.value.to_string(),
        to: tx.to.value.to_string(),
        token: tx.token.clone(),
        amount: tx.amount.to_string(),
        from_is_contract: tx.from_is_contract,
        to_is_contract: tx.to_is_contract,
    };
    serde_json::to_string(&rec).expect("transaction record serializes")
}

/// Parse a stream of newline-delimited activity-event records.
pub fn parse_dapp_events(
    stream: impl Read,
) -> Result<(Vec<DappEvent>, Vec<ParseDiagnostic>), IngestError> {
    let reader = BufReader::new(stream);
    let mut events = Vec::new();
    let mut diags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        match parse_event_line(&line) {
            Ok(ev) => events.push(ev),
            Err(reason) => diags.push(ParseDiagnostic { line: lineno, reason }),
        }
    }
    Ok((events, diags))
}

fn parse_event_line(line: &str) -> Result<DappEvent, String> {
    let rec: DappEventRecord =
        serde_json::from_str(line).map_err(|e| format!("malformed record: {e}"))?;
    if rec.activity_type.is_empty() {
        return Err("empty activity_type".to_string());
    }
    let account =
        AccountValue::parse(&rec.account).map_err(|e| format!("account address: {e}"))?;
    let amount = match rec.amount {
        Some(s) => Some(s.parse::<Amount>().map_err(|e| format!("{e} (amount {s:?})"))?),
        None => None,
    };
    Ok(DappEvent {
        chain: rec.chain,
        tx_hash: rec.tx_hash,
        timestamp: rec.block_time,
        account,
        activity_type: rec.activity_type,
        amount,
        route_from: rec.route_from,
        route_to: rec.route_to,
    })
}

/// Serialize an activity event back to its canonical NDJSON line.
pub fn serialize_dapp_event(ev: &DappEvent) -> String {
    let rec = DappEventRecord {
        chain: ev.chain.clone(),
        tx_hash: ev.tx_hash.clone(),
        block_time: ev.timestamp,
        account: ev.account.to_string(),
        activity_type: ev.activity_type.clone(),
        amount: ev.amount.map(|a| a.to_string()),
        route_from: ev.route_from.clone(),
        route_to: ev.route_to.clone(),
    };
    serde_json::to_string(&rec).expect("event record serializes")
}

/// Parse a filter-list file: one address per line, `#` comments and blank
/// lines allowed.
pub fn parse_address_list(
    stream: impl Read,
) -> Result<(BTreeSet<AccountValue>, Vec<ParseDiagnostic>), IngestError> {
    let reader = BufReader::new(stream);
    let mut set = BTreeSet::new();
    let mut diags = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let entry = line.split('#').next().unwrap_or("").trim();
        if entry.is_empty() {
            continue;
        }
        match AccountValue::parse(entry) {
            Ok(v) => {
                set.insert(v);
            }
            Err(e) => diags.push(ParseDiagnostic {
                line: idx + 1,
                reason: e.to_string(),
            }),
        }
    }
    Ok((set, diags))
}

/// Drop every transaction touching a contract (per-record flag or configured
/// list), an exchange address, or a whitelisted address. Order is preserved;
/// the result is a subsequence of the input.
pub fn apply_filters(txs: &[Transaction], cfg: &FilterConfig) -> Vec<Transaction> {
    txs.iter()
        .filter(|tx| {
            !(tx.from_is_contract
                || tx.to_is_contract
                || cfg.removes(&tx.from.value)
                || cfg.removes(&tx.to.value))
        })
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn addr(chain: &str, hex8: &str) -> Address {
        Address::new(chain, &format!("{hex8:0<40}")).unwrap()
    }

    fn tx(from: &str, to: &str) -> Transaction {
        Transaction {
            tx_hash: format!("0xhash{from}{to}"),
            chain: "testchain".into(),
            timestamp: 100,
            from: addr("testchain", from),
            to: addr("testchain", to),
            token: "ETH".into(),
            amount: "1.0".parse().unwrap(),
            from_is_contract: false,
            to_is_contract: false,
        }
    }

    fn line(from: &str, to: &str, amount: &str) -> String {
        format!(
            r#"{{"chain":"testchain","tx_hash":"0xt{from}{to}","block_time":100,"from":"0x{from:0<40}","to":"0x{to:0<40}","token":"ETH","amount":"{amount}","from_is_contract":false,"to_is_contract":false}}"#
        )
    }

    #[test]
    fn well_formed_record_maps_identically() {
        let input = line("aa", "bb", "1.0");
        let (txs, diags) = parse_transactions(input.as_bytes(), "testchain").unwrap();
        assert!(diags.is_empty());
        assert_eq!(txs.len(), 1);
        assert_eq!(txs[0].from, addr("testchain", "aa"));
        assert_eq!(txs[0].to, addr("testchain", "bb"));
        assert_eq!(txs[0].amount, "1.0".parse().unwrap());
    }

    #[test]
    fn negative_amount_yields_diagnostic() {
        let input = line("aa", "bb", "-3");
        let (txs, diags) = parse_transactions(input.as_bytes(), "testchain").unwrap();
        assert!(txs.is_empty());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].line, 1);
        assert!(diags[0].reason.contains("negative amount"), "{}", diags[0].reason);
    }

    #[test]
    fn empty_stream_is_empty_output() {
        let (txs, diags) = parse_transactions(&b""[..], "testchain").unwrap();
        assert!(txs.is_empty());
        assert!(diags.is_empty());
    }

    #[test]
    fn duplicate_tx_hash_is_skipped_with_diagnostic() {
        let input = format!("{}\n{}", line("aa", "bb", "1"), line("aa", "bb", "2"));
        let (txs, diags) = parse_transactions(input.as_bytes(), "testchain").unwrap();
        assert_eq!(txs.len(), 1);
        assert_eq!(diags.len(), 1);
        assert!(diags[0].reason.contains("duplicate"));
    }

    #[test]
    fn malformed_line_does_not_abort() {
        let input = format!("not json\n{}", line("aa", "bb", "1"));
        let (txs, diags) = parse_transactions(input.as_bytes(), "testchain").unwrap();
        assert_eq!(txs.len(), 1);
        assert_eq!(diags[0].line, 1);
    }

    #[test]
    fn filters_remove_contracts_exchanges_whitelist() {
        let mut cfg = FilterConfig::default();
        cfg.contract_addresses.insert(addr("testchain", "cc").value);
        cfg.whitelist.insert(addr("testchain", "bb").value);
        let keep = tx("aa", "dd");
        let txs = vec![tx("aa", "cc"), tx("aa", "bb"), keep.clone()];
        let out = apply_filters(&txs, &cfg);
        assert_eq!(out, vec![keep]);
    }

    #[test]
    fn contract_flags_remove_without_lists() {
        let mut t = tx("aa", "bb");
        t.to_is_contract = true;
        assert!(apply_filters(&[t], &FilterConfig::default()).is_empty());
    }

    #[test]
    fn address_list_accepts_comments() {
        let input = "# header\n0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa\n\n0xbb  # inline\n";
        let (set, diags) = parse_address_list(input.as_bytes()).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(diags.len(), 1); // "0xbb" too short
    }

    #[test]
    fn event_with_empty_activity_type_is_skipped() {
        let input = r#"{"chain":"c","tx_hash":"0xe1","block_time":5,"account":"0xaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaaa","activity_type":""}"#;
        let (events, diags) = parse_dapp_events(input.as_bytes()).unwrap();
        assert!(events.is_empty());
        assert!(diags[0].reason.contains("activity_type"));
    }

    proptest! {
        #[test]
        fn apply_filters_is_idempotent_and_subsequence(
            n in 0usize..30,
            flagged in proptest::collection::vec(proptest::bool::ANY, 30),
        ) {
            let txs: Vec<Transaction> = (0..n)
                .map(|i| {
                    let mut t = tx(&format!("{i:02x}"), &format!("{:02x}", i + 1));
                    t.tx_hash = format!("0xh{i}");
                    t.from_is_contract = flagged[i];
                    t
                })
                .collect();
            let cfg = FilterConfig::default();
            let once = apply_filters(&txs, &cfg);
            let twice = apply_filters(&once, &cfg);
            prop_assert_eq!(&once, &twice);
            // subsequence check
            let mut it = txs.iter();
            for kept in &once {
                prop_assert!(it.any(|orig| orig == kept));
            }
        }

        #[test]
        fn parse_serialize_round_trip(
            from in "[0-9a-f]{40}",
            to in "[0-9a-f]{40}",
            ts in 0u64..2_000_000_000,
            int in 0u64..1_000_000,
            frac in 0u64..1_000_000,
        ) {
            let t = Transaction {
                tx_hash: "0xabc123".into(),
                chain: "testchain".into(),
                timestamp: ts,
                from: Address::new("testchain", &from).unwrap(),
                to: Address::new("testchain", &to).unwrap(),
                token: "HOP".into(),
                amount: format!("{int}.{frac:06}").parse().unwrap(),
                from_is_contract: false,
                to_is_contract: false,
            };
            let line = serialize_transaction(&t);
            let (parsed, diags) = parse_transactions(line.as_bytes(), "testchain").unwrap();
            prop_assert!(diags.is_empty());
            prop_assert_eq!(&parsed[..], &[t][..]);
            // serialize again: byte-identical
            prop_assert_eq!(serialize_transaction(&parsed[0]), line);
        }
    }
}
