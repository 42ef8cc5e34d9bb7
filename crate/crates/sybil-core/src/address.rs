//! Normalized account addresses.
//!
//! An on-chain address is an opaque identifier; equality has to be stable
//! across checksum casings and `0x` prefixes, so every address is stored in
//! one canonical form: the lowercase alphanumeric body without prefix.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Minimum length of an address body (prefix stripped).
pub const MIN_ADDRESS_LEN: usize = 26;
/// Maximum length of an address body (prefix stripped).
pub const MAX_ADDRESS_LEN: usize = 40;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AddressError {
    #[error("address body must be {MIN_ADDRESS_LEN}-{MAX_ADDRESS_LEN} chars, got {0}")]
    BadLength(usize),
    #[error("address contains non-alphanumeric character {0:?}")]
    BadChar(char),
    #[error("chain identifier is empty")]
    EmptyChain,
}

/// Canonical account value: lowercase alphanumeric body, no `0x` prefix.
///
/// This is the actor identity used for activity sequences, clustering and
/// reports; the same value seen on several chains is the same actor.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AccountValue(String);

impl AccountValue {
    /// Normalize a raw address string: strip an optional `0x`/`0X` prefix,
    /// lowercase, and validate length and character set.
    pub fn parse(raw: &str) -> Result<Self, AddressError> {
        let body = raw
            .strip_prefix("0x")
            .or_else(|| raw.strip_prefix("0X"))
            .unwrap_or(raw);
        if body.len() < MIN_ADDRESS_LEN || body.len() > MAX_ADDRESS_LEN {
            return Err(AddressError::BadLength(body.len()));
        }
        if let Some(c) = body.chars().find(|c| !c.is_ascii_alphanumeric()) {
            return Err(AddressError::BadChar(c));
        }
        Ok(AccountValue(body.to_ascii_lowercase()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Display label used in DOT exports and reports: `0x` plus the first
    /// eight characters of the body.
    pub fn short_label(&self) -> String {
        format!("0x{}", &self.0[..self.0.len().min(8)])
    }
}

impl fmt::Display for AccountValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "0x{}", self.0)
    }
}

/// A per-chain vertex identity: one account value as seen on one chain.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address {
    pub chain: String,
    pub value: AccountValue,
}

impl Address {
    pub fn new(chain: &str, raw_value: &str) -> Result<Self, AddressError> {
        if chain.is_empty() {
            return Err(AddressError::EmptyChain);
        }
        Ok(Address {
            chain: chain.to_string(),
            value: AccountValue::parse(raw_value)?,
        })
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.chain, self.value)
    }
}
