//! The receiver as a validation oracle.
//!
//! Wraps a [`Scheme`] behind an observation interface with configurable
//! leakiness. A `Leaky` oracle discloses the exact receiver verdict
//! (accept / invalid format / MAC failure) and bills only the work of the
//! steps the receiver reached, so rejection classes differ in both symbol
//! and cost. A `Strict` oracle collapses every rejection into one `REJECT`
//! symbol, always performs decryption, validation and MAC verification,
//! and derives cost purely from input lengths, so same-shaped rejections
//! are indistinguishable.
//!
//! Cost is abstract work: one unit per block-cipher invocation and one per
//! block validated. Nothing here measures wall-clock time.
//!
//! Accepted queries never expose the recovered plaintext; an attacker sees
//! acceptance, not content.

use sha2::{Digest, Sha256};

use crate::scheme::{Scheme, SchemeConfig, UnprotectOutcome, WireMessage};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    Leaky,
    Strict,
}

/// Response tokens visible to the querying attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ResponseSymbol {
    Accept,
    Invalid,
    MacFailure,
    Reject,
}

impl ResponseSymbol {
    pub fn is_accept(self) -> bool {
        self == ResponseSymbol::Accept
    }

    fn wire_byte(self) -> u8 {
        match self {
            ResponseSymbol::Accept => 0,
            ResponseSymbol::Invalid => 1,
            ResponseSymbol::MacFailure => 2,
            ResponseSymbol::Reject => 3,
        }
    }
}

impl std::fmt::Display for ResponseSymbol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ResponseSymbol::Accept => "ACCEPT",
            ResponseSymbol::Invalid => "INVALID",
            ResponseSymbol::MacFailure => "MAC_FAILURE",
            ResponseSymbol::Reject => "REJECT",
        })
    }
}

/// Everything one query gives the attacker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Observation {
    pub symbol: ResponseSymbol,
    pub cost: u64,
    pub query_index: u64,
}

/// A keyed receiver an attacker may query but not open.
pub struct Oracle {
    mode: OracleMode,
    scheme: Scheme,
    queries: u64,
    accepts: u64,
    rejections: u64,
    transcript: Sha256,
}

impl Oracle {
    pub fn new(mode: OracleMode, scheme: Scheme) -> Self {
        Oracle {
            mode,
            scheme,
            queries: 0,
            accepts: 0,
            rejections: 0,
            transcript: Sha256::new(),
        }
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    /// The scheme shape is public knowledge; the keys are not.
    pub fn config(&self) -> &SchemeConfig {
        self.scheme.config()
    }

    pub fn query(&mut self, w: &WireMessage) -> Observation {
        let (outcome, cost) = self
            .scheme
            .unprotect_traced(w, self.mode == OracleMode::Strict);
        let symbol = match (self.mode, &outcome) {
            (_, UnprotectOutcome::Accept(_)) => ResponseSymbol::Accept,
            (OracleMode::Leaky, UnprotectOutcome::Invalid) => ResponseSymbol::Invalid,
            (OracleMode::Leaky, UnprotectOutcome::MacFailure) => ResponseSymbol::MacFailure,
            (OracleMode::Strict, _) => ResponseSymbol::Reject,
        };
        self.queries += 1;
        if symbol.is_accept() {
            self.accepts += 1;
        } else {
            self.rejections += 1;
        }
        self.transcript.update([symbol.wire_byte()]);
        self.transcript.update(cost.to_be_bytes());
        Observation {
            symbol,
            cost,
            query_index: self.queries,
        }
    }

    pub fn queries_used(&self) -> u64 {
        self.queries
    }

    pub fn accepts(&self) -> u64 {
        self.accepts
    }

    pub fn rejections(&self) -> u64 {
        self.rejections
    }

    /// Digest over the (symbol, cost) sequence of every query so far.
    pub fn transcript_digest(&self) -> String {
        let digest = self.transcript.clone().finalize();
        hex::encode(digest)
    }
}
