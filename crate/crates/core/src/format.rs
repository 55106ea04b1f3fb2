//! Formatting rules and their validators.
//!
//! A formatting rule maps a plaintext to an intermediary text before
//! encipherment; validation runs the other way and reports `Invalid` when
//! the text is not in the rule's image (or, for total rules, never).
//!
//! Five rules are implemented:
//!
//! - `Pad1`: zero bits to the next block boundary. Carries no redundancy
//!   and is NOT injective ("1" and "10" format identically); validation
//!   always succeeds and returns the full padded body.
//! - `Pad2`: a single 1-bit then zero bits to the boundary (one-and-zeros
//!   padding). Injective; always appends at least one bit.
//! - `Pad3`: a leading block carrying the plaintext bit-length, then the
//!   data zero-padded to the boundary. Injective; the validator checks the
//!   declared length against the block count and the zero tail.
//! - `EncK`: bitwise pair encoding 0 -> 00, 1 -> 01 or 10 at random. The
//!   pair 11 is not a valid encoding, so validation can fail.
//! - `EncI`: bitwise pair encoding 0 -> 00, 01 or 10 at random, 1 -> 11.
//!   Every even-length body decodes, so validation is total.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::bits::{BitString, BLOCK_BITS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormatRule {
    Pad1,
    Pad2,
    Pad3,
    EncK,
    EncI,
}

impl FormatRule {
    pub const ALL: [FormatRule; 5] = [
        FormatRule::Pad1,
        FormatRule::Pad2,
        FormatRule::Pad3,
        FormatRule::EncK,
        FormatRule::EncI,
    ];

    pub fn token(self) -> &'static str {
        match self {
            FormatRule::Pad1 => "pad1",
            FormatRule::Pad2 => "pad2",
            FormatRule::Pad3 => "pad3",
            FormatRule::EncK => "enck",
            FormatRule::EncI => "enci",
        }
    }

    /// Pair encodings double the plaintext; paddings round up to blocks.
    pub fn is_pair_encoding(self) -> bool {
        matches!(self, FormatRule::EncK | FormatRule::EncI)
    }
}

impl fmt::Display for FormatRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for FormatRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pad1" => Ok(FormatRule::Pad1),
            "pad2" => Ok(FormatRule::Pad2),
            "pad3" => Ok(FormatRule::Pad3),
            "enck" => Ok(FormatRule::EncK),
            "enci" => Ok(FormatRule::EncI),
            other => Err(format!("unknown formatting rule `{other}`")),
        }
    }
}

/// A formatted intermediary text together with the rule that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormattedText {
    pub rule: FormatRule,
    pub body: BitString,
}

/// Outcome of format validation. `Invalid` is a value, not an error: the
/// whole point of the lab is what receivers do with it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Validation {
    Valid(BitString),
    Invalid,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validation::Valid(_))
    }
}

/// Applies `rule` to `p`. The randomness source drives the randomized pair
/// encodings and is an explicit parameter so formatting is reproducible.
pub fn format<R: Rng + ?Sized>(rule: FormatRule, p: &BitString, rng: &mut R) -> FormattedText {
    let body = match rule {
        FormatRule::Pad1 => {
            if p.is_empty() {
                BitString::zeros(BLOCK_BITS)
            } else {
                let fill = (BLOCK_BITS - p.len() % BLOCK_BITS) % BLOCK_BITS;
                p.concat(&BitString::zeros(fill))
            }
        }
        FormatRule::Pad2 => {
            let mut body = p.clone();
            body.push_bit(true);
            let fill = (BLOCK_BITS - body.len() % BLOCK_BITS) % BLOCK_BITS;
            body.concat(&BitString::zeros(fill))
        }
        FormatRule::Pad3 => {
            let len_block = BitString::from_u128_be(p.len() as u128);
            let fill = (BLOCK_BITS - p.len() % BLOCK_BITS) % BLOCK_BITS;
            len_block.concat(p).concat(&BitString::zeros(fill))
        }
        FormatRule::EncK => {
            let mut body = BitString::empty();
            for bit in p.iter_bits() {
                if bit {
                    let first = rng.gen_bool(0.5);
                    body.push_bit(first);
                    body.push_bit(!first);
                } else {
                    body.push_bit(false);
                    body.push_bit(false);
                }
            }
            body
        }
        FormatRule::EncI => {
            let mut body = BitString::empty();
            for bit in p.iter_bits() {
                if bit {
                    body.push_bit(true);
                    body.push_bit(true);
                } else {
                    // one of 00, 01, 10 uniformly
                    let pair = rng.gen_range(0u8..3);
                    body.push_bit(pair == 2);
                    body.push_bit(pair == 1);
                }
            }
            body
        }
    };
    FormattedText { rule, body }
}

/// Checks that `t.body` is well-formatted under its rule and recovers the
/// plaintext. Total over arbitrary bodies, including attacker-made ones.
pub fn validate(t: &FormattedText) -> Validation {
    validate_body(t.rule, &t.body)
}

pub fn validate_body(rule: FormatRule, body: &BitString) -> Validation {
    match rule {
        // no redundancy: always valid, the padded body is returned as-is
        FormatRule::Pad1 => Validation::Valid(body.clone()),
        FormatRule::Pad2 => {
            if body.is_empty() || body.len() % BLOCK_BITS != 0 {
                return Validation::Invalid;
            }
            match (0..body.len()).rev().find(|&i| body.bit(i)) {
                Some(one) => Validation::Valid(body.slice(0, one)),
                None => Validation::Invalid,
            }
        }
        FormatRule::Pad3 => {
            if body.len() < BLOCK_BITS || body.len() % BLOCK_BITS != 0 {
                return Validation::Invalid;
            }
            let declared = crate::bits::Block::from_bit_string(&body.slice(0, BLOCK_BITS))
                .expect("slice is one block")
                .as_u128_be();
            let data_bits = body.len() - BLOCK_BITS;
            let expected_blocks =
                declared / BLOCK_BITS as u128 + u128::from(declared % BLOCK_BITS as u128 != 0);
            if expected_blocks != (data_bits / BLOCK_BITS) as u128 {
                return Validation::Invalid;
            }
            let declared = declared as usize;
            for i in BLOCK_BITS + declared..body.len() {
                if body.bit(i) {
                    return Validation::Invalid;
                }
            }
            Validation::Valid(body.slice(BLOCK_BITS, BLOCK_BITS + declared))
        }
        FormatRule::EncK => {
            if body.len() % 2 != 0 {
                return Validation::Invalid;
            }
            let mut p = BitString::empty();
            for i in (0..body.len()).step_by(2) {
                match (body.bit(i), body.bit(i + 1)) {
                    (false, false) => p.push_bit(false),
                    (true, true) => return Validation::Invalid,
                    _ => p.push_bit(true),
                }
            }
            Validation::Valid(p)
        }
        FormatRule::EncI => {
            if body.len() % 2 != 0 {
                return Validation::Invalid;
            }
            let mut p = BitString::empty();
            for i in (0..body.len()).step_by(2) {
                p.push_bit(body.bit(i) && body.bit(i + 1));
            }
            Validation::Valid(p)
        }
    }
}
