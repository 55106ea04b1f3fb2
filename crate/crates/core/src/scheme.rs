//! The configurable protect/unprotect pipeline covering the four
//! composition orders of formatting (F), authentication (A) and
//! encipherment (E):
//!
//! - `EncryptOnly`: E(F(p)) with no MAC at all;
//! - `Afe`: MAC over the raw plaintext, appended, then formatted and
//!   enciphered: E(F(p || mac(p)));
//! - `Fae`: format first, MAC over the formatted text, both enciphered:
//!   E(T || mac(T));
//! - `Fea`: format, encipher, MAC over the ciphertext (and IV when there
//!   is one), tag carried in clear: E(T) || mac(iv || E(T)).
//!
//! `unprotect` inverts the configured order and reports one of three
//! outcomes: `Accept`, `Invalid` (format rejection) or `MacFailure`.
//! Whether those two rejections are distinguishable to an attacker, and at
//! what cost, is decided by the oracle layer, not here; this module only
//! guarantees that structurally impossible inputs map onto `MacFailure`
//! (or `Invalid` for the unauthenticated order) instead of surfacing as
//! distinct errors.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::{BitString, Block, BLOCK_BITS};
use crate::cipher::otp_crypt;
use crate::cipher::{
    cbc_decrypt, cbc_encrypt, cbc_mac, ctr_crypt, CipherError, CipherKey, KeyedCipher, Pad,
};
use crate::format::{format, validate_body, FormatRule, Validation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Cipher(#[from] CipherError),
    #[error("one-time pad supply exhausted")]
    PadExhausted,
    #[error("no message in flight; protect one first")]
    NoActiveMessage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeOrder {
    EncryptOnly,
    Afe,
    Fae,
    Fea,
}

impl SchemeOrder {
    pub const ALL: [SchemeOrder; 4] = [
        SchemeOrder::EncryptOnly,
        SchemeOrder::Afe,
        SchemeOrder::Fae,
        SchemeOrder::Fea,
    ];

    pub fn token(self) -> &'static str {
        match self {
            SchemeOrder::EncryptOnly => "encrypt-only",
            SchemeOrder::Afe => "afe",
            SchemeOrder::Fae => "fae",
            SchemeOrder::Fea => "fea",
        }
    }

    pub fn authenticated(self) -> bool {
        self != SchemeOrder::EncryptOnly
    }
}

impl fmt::Display for SchemeOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for SchemeOrder {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "encrypt-only" => Ok(SchemeOrder::EncryptOnly),
            "afe" => Ok(SchemeOrder::Afe),
            "fae" => Ok(SchemeOrder::Fae),
            "fea" => Ok(SchemeOrder::Fea),
            other => Err(format!("unknown composition order `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CipherChoice {
    Otp,
    Cbc,
    Ctr,
}

impl CipherChoice {
    pub fn token(self) -> &'static str {
        match self {
            CipherChoice::Otp => "otp",
            CipherChoice::Cbc => "cbc",
            CipherChoice::Ctr => "ctr",
        }
    }

    /// XOR-keystream ciphers let single ciphertext bits steer single
    /// plaintext bits; CBC only offers the garbled predecessor-block trick.
    pub fn is_keystream(self) -> bool {
        matches!(self, CipherChoice::Otp | CipherChoice::Ctr)
    }
}

impl fmt::Display for CipherChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for CipherChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "otp" => Ok(CipherChoice::Otp),
            "cbc" => Ok(CipherChoice::Cbc),
            "ctr" => Ok(CipherChoice::Ctr),
            other => Err(format!("unknown cipher choice `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub order: SchemeOrder,
    pub rule: FormatRule,
    pub cipher: CipherChoice,
    pub tag_bits: usize,
}

impl SchemeConfig {
    pub fn new(
        order: SchemeOrder,
        rule: FormatRule,
        cipher: CipherChoice,
        tag_bits: usize,
    ) -> Self {
        SchemeConfig {
            order,
            rule,
            cipher,
            tag_bits,
        }
    }

    pub fn check(&self) -> Result<(), SchemeError> {
        if self.order.authenticated() && !(32..=BLOCK_BITS).contains(&self.tag_bits) {
            return Err(SchemeError::InvalidConfig(format!(
                "tag_bits {} not in 32..=128",
                self.tag_bits
            )));
        }
        Ok(())
    }
}

/// What actually travels: an optional IV (CBC only) and the body. For
/// `Fea` the body is ciphertext followed by the cleartext-domain tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WireMessage {
    pub iv: Option<Block>,
    pub body: BitString,
}

/// Receiver verdict. `EncryptOnly` never yields `MacFailure`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UnprotectOutcome {
    Accept(BitString),
    Invalid,
    MacFailure,
}

impl UnprotectOutcome {
    pub fn is_accept(&self) -> bool {
        matches!(self, UnprotectOutcome::Accept(_))
    }
}

/// One side of a protected channel: configuration, keys and the one-time
/// pad ledger. Pads are generated fresh per message and indexed by message
/// number, never reused across messages; `unprotect` always operates on
/// the most recently protected message, which is exactly the setting the
/// attacks need (many manipulated redeliveries of one captured wire).
pub struct Scheme {
    cfg: SchemeConfig,
    mac_key: CipherKey,
    mac_cipher: KeyedCipher,
    enc_cipher: Option<KeyedCipher>,
    pads: HashMap<u64, Pad>,
    pad_budget: Option<u64>,
    next_index: u64,
    current: Option<u64>,
}

impl Scheme {
    pub fn new(
        cfg: SchemeConfig,
        mac_key: CipherKey,
        enc_key: Option<CipherKey>,
    ) -> Result<Self, SchemeError> {
        cfg.check()?;
        if cfg.cipher != CipherChoice::Otp && enc_key.is_none() {
            return Err(SchemeError::InvalidConfig(
                "cipher choice requires an encryption key".into(),
            ));
        }
        let mac_cipher = mac_key.cipher();
        let enc_cipher = enc_key.as_ref().map(CipherKey::cipher);
        Ok(Scheme {
            cfg,
            mac_key,
            mac_cipher,
            enc_cipher,
            pads: HashMap::new(),
            pad_budget: None,
            next_index: 0,
            current: None,
        })
    }

    /// Derives MAC and encryption keys deterministically from a seed.
    pub fn from_seed(cfg: SchemeConfig, seed: u64) -> Result<Self, SchemeError> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut mk = [0u8; 16];
        rng.fill(&mut mk);
        let mut ek = [0u8; 16];
        rng.fill(&mut ek);
        let enc_key = (cfg.cipher != CipherChoice::Otp)
            .then(|| CipherKey::aes128(&ek).expect("16-byte key"));
        Scheme::new(cfg, CipherKey::aes128(&mk).expect("16-byte key"), enc_key)
    }

    /// Caps how many messages the pad supply covers (OTP only).
    pub fn with_pad_budget(mut self, messages: u64) -> Self {
        self.pad_budget = Some(messages);
        self
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    pub fn mac_key(&self) -> &CipherKey {
        &self.mac_key
    }

    /// The scheme's MAC: one-and-zeros padding to the block boundary, then
    /// CBC-MAC truncated to `tag_bits`. Public so tests and demonstrations
    /// can forge tags with the receiver's own key.
    pub fn mac_tag(&self, data: &BitString) -> BitString {
        let mut padded = data.clone();
        padded.push_bit(true);
        let fill = (BLOCK_BITS - padded.len() % BLOCK_BITS) % BLOCK_BITS;
        let padded = padded.concat(&BitString::zeros(fill));
        cbc_mac(
            &self.mac_cipher,
            &padded.to_bytes().expect("block-aligned"),
            self.cfg.tag_bits,
        )
        .expect("aligned input and checked tag width")
    }

    /// Applies the configured composition order to `p` and advances the
    /// message counter.
    pub fn protect<R: Rng + ?Sized>(
        &mut self,
        p: &BitString,
        rng: &mut R,
    ) -> Result<WireMessage, SchemeError> {
        let idx = self.next_index;
        let wire = match self.cfg.order {
            SchemeOrder::EncryptOnly => {
                let t = format(self.cfg.rule, p, rng);
                self.encrypt_at(idx, &t.body, rng)?
            }
            SchemeOrder::Afe => {
                let tagged = p.concat(&self.mac_tag(p));
                let t = format(self.cfg.rule, &tagged, rng);
                self.encrypt_at(idx, &t.body, rng)?
            }
            SchemeOrder::Fae => {
                let t = format(self.cfg.rule, p, rng);
                let x = t.body.concat(&self.mac_tag(&t.body));
                self.encrypt_at(idx, &x, rng)?
            }
            SchemeOrder::Fea => {
                let t = format(self.cfg.rule, p, rng);
                let mut wire = self.encrypt_at(idx, &t.body, rng)?;
                let tag = self.mac_tag(&Self::tag_domain(&wire.iv, &wire.body));
                wire.body = wire.body.concat(&tag);
                wire
            }
        };
        self.current = Some(idx);
        self.next_index += 1;
        Ok(wire)
    }

    /// Enciphers `x` as-is under the current message context, skipping
    /// formatting and authentication. This deliberately reuses the pad or
    /// counter of the message in flight: it exists so tests and oracle
    /// demonstrations can craft wires (for example an ill-formatted text
    /// carrying a correct tag) with the receiver's own key material.
    pub fn seal_raw<R: Rng + ?Sized>(
        &self,
        x: &BitString,
        rng: &mut R,
    ) -> Result<WireMessage, SchemeError> {
        let idx = match self.current {
            Some(idx) => idx,
            None if self.cfg.cipher == CipherChoice::Cbc => 0,
            None => return Err(SchemeError::NoActiveMessage),
        };
        self.encrypt_with_existing_context(idx, x, rng)
    }

    fn encrypt_at<R: Rng + ?Sized>(
        &mut self,
        idx: u64,
        x: &BitString,
        rng: &mut R,
    ) -> Result<WireMessage, SchemeError> {
        if self.cfg.cipher == CipherChoice::Otp {
            if let Some(budget) = self.pad_budget {
                if idx >= budget {
                    return Err(SchemeError::PadExhausted);
                }
            }
            self.pads.insert(idx, Pad::random(rng, x.len()));
        }
        self.encrypt_with_existing_context(idx, x, rng)
    }

    fn encrypt_with_existing_context<R: Rng + ?Sized>(
        &self,
        idx: u64,
        x: &BitString,
        rng: &mut R,
    ) -> Result<WireMessage, SchemeError> {
        match self.cfg.cipher {
            CipherChoice::Otp => {
                let pad = self.pads.get(&idx).ok_or(SchemeError::NoActiveMessage)?;
                Ok(WireMessage {
                    iv: None,
                    body: otp_crypt(pad, x)?,
                })
            }
            CipherChoice::Ctr => {
                let cipher = self.enc_cipher.as_ref().expect("checked in new");
                Ok(WireMessage {
                    iv: None,
                    body: ctr_crypt(cipher, &Self::message_counter(idx), x)?,
                })
            }
            CipherChoice::Cbc => {
                let cipher = self.enc_cipher.as_ref().expect("checked in new");
                let iv = Block::random(rng);
                let bytes = x.to_bytes().ok_or(CipherError::PartialBlock {
                    got: x.len().div_ceil(8),
                    block: 16,
                })?;
                let ct = cbc_encrypt(cipher, iv.as_bytes(), &bytes)?;
                Ok(WireMessage {
                    iv: Some(iv),
                    body: BitString::from_bytes(&ct),
                })
            }
        }
    }

    /// Counter start for message `idx`: the index sits in bytes 4..12, the
    /// 32-bit counter tail starts at zero, so counters of distinct messages
    /// never collide.
    fn message_counter(idx: u64) -> Block {
        let mut bytes = [0u8; 16];
        bytes[4..12].copy_from_slice(&idx.to_be_bytes());
        Block::new(bytes)
    }

    fn tag_domain(iv: &Option<Block>, ct: &BitString) -> BitString {
        match iv {
            Some(iv) => iv.to_bit_string().concat(ct),
            None => ct.clone(),
        }
    }

    /// Inverts the configured order. Arbitrary attacker-supplied wires are
    /// allowed; structurally impossible inputs (missing pad, partial CBC
    /// block, body shorter than the tag) are indistinguishable from a tag
    /// mismatch: `MacFailure` for authenticated orders, `Invalid` for
    /// `EncryptOnly`.
    pub fn unprotect(&self, w: &WireMessage) -> UnprotectOutcome {
        self.unprotect_traced(w, false).0
    }

    /// Like [`unprotect`], also reporting abstract work: one unit per
    /// block-cipher invocation and per block validated, computed from input
    /// lengths so identical shapes always cost the same. With
    /// `full_work = false` only the steps the receiver actually reaches are
    /// billed (the short-circuit a leaky receiver exhibits); with
    /// `full_work = true` decryption, validation and MAC verification are
    /// all billed on every call.
    ///
    /// [`unprotect`]: Scheme::unprotect
    pub fn unprotect_traced(&self, w: &WireMessage, full_work: bool) -> (UnprotectOutcome, u64) {
        let body_bits = w.body.len();
        let tag_bits = self.cfg.tag_bits;
        match self.cfg.order {
            SchemeOrder::EncryptOnly => {
                let dec = self.decrypt_cost(body_bits);
                let full = dec + validate_cost(body_bits);
                match self.decrypt_body(w, body_bits) {
                    None => (UnprotectOutcome::Invalid, if full_work { full } else { dec }),
                    Some(t) => {
                        let outcome = match validate_body(self.cfg.rule, &t) {
                            Validation::Valid(p) => UnprotectOutcome::Accept(p),
                            Validation::Invalid => UnprotectOutcome::Invalid,
                        };
                        (outcome, full)
                    }
                }
            }
            SchemeOrder::Afe => {
                let dec = self.decrypt_cost(body_bits);
                let val = validate_cost(body_bits);
                let plain_bits = if self.cfg.rule.is_pair_encoding() {
                    (body_bits / 2).saturating_sub(tag_bits)
                } else {
                    body_bits.saturating_sub(tag_bits)
                };
                let mac = mac_cost(plain_bits);
                let full = dec + val + mac;
                let billed = |reached: u64| if full_work { full } else { reached };

                let t = match self.decrypt_body(w, body_bits) {
                    Some(t) => t,
                    None => return (UnprotectOutcome::MacFailure, billed(dec)),
                };
                let x = match validate_body(self.cfg.rule, &t) {
                    Validation::Valid(x) => x,
                    // format rejection escapes before any MAC check: this is
                    // the leak the pair-flip attacks drive
                    Validation::Invalid => return (UnprotectOutcome::Invalid, billed(dec + val)),
                };
                if x.len() < tag_bits {
                    return (UnprotectOutcome::MacFailure, billed(full));
                }
                let p = x.slice(0, x.len() - tag_bits);
                let m = x.slice(x.len() - tag_bits, x.len());
                if self.mac_tag(&p) == m {
                    (UnprotectOutcome::Accept(p), billed(full))
                } else {
                    (UnprotectOutcome::MacFailure, billed(full))
                }
            }
            SchemeOrder::Fae => {
                let dec = self.decrypt_cost(body_bits);
                let t_bits = body_bits.saturating_sub(tag_bits);
                let mac = mac_cost(t_bits);
                let val = validate_cost(t_bits);
                let full = dec + mac + val;
                let billed = |reached: u64| if full_work { full } else { reached };

                let x = match self.decrypt_body(w, body_bits) {
                    Some(x) => x,
                    None => return (UnprotectOutcome::MacFailure, billed(dec)),
                };
                if x.len() < tag_bits {
                    return (UnprotectOutcome::MacFailure, billed(dec + mac));
                }
                let t = x.slice(0, x.len() - tag_bits);
                let m = x.slice(x.len() - tag_bits, x.len());
                if self.mac_tag(&t) != m {
                    return (UnprotectOutcome::MacFailure, billed(dec + mac));
                }
                // the validation result is released only because the tag
                // matched
                let outcome = match validate_body(self.cfg.rule, &t) {
                    Validation::Valid(p) => UnprotectOutcome::Accept(p),
                    Validation::Invalid => UnprotectOutcome::Invalid,
                };
                (outcome, billed(full))
            }
            SchemeOrder::Fea => {
                let ct_bits = body_bits.saturating_sub(tag_bits);
                let mac = mac_cost(ct_bits + self.expected_iv_bits());
                let dec = self.decrypt_cost(ct_bits);
                let val = validate_cost(ct_bits);
                let full = mac + dec + val;
                let billed = |reached: u64| if full_work { full } else { reached };

                if body_bits < tag_bits || self.iv_shape_wrong(w) {
                    return (UnprotectOutcome::MacFailure, billed(mac));
                }
                let ct = w.body.slice(0, ct_bits);
                let m = w.body.slice(ct_bits, body_bits);
                if self.mac_tag(&Self::tag_domain(&w.iv, &ct)) != m {
                    return (UnprotectOutcome::MacFailure, billed(mac));
                }
                let inner = WireMessage { iv: w.iv, body: ct };
                let t = match self.decrypt_body(&inner, ct_bits) {
                    Some(t) => t,
                    // tag matched but the structure is undecryptable: a
                    // sender-side malfunction, reported as a format problem
                    None => return (UnprotectOutcome::Invalid, billed(mac + dec)),
                };
                let outcome = match validate_body(self.cfg.rule, &t) {
                    Validation::Valid(p) => UnprotectOutcome::Accept(p),
                    Validation::Invalid => UnprotectOutcome::Invalid,
                };
                (outcome, billed(full))
            }
        }
    }

    fn expected_iv_bits(&self) -> usize {
        if self.cfg.cipher == CipherChoice::Cbc {
            BLOCK_BITS
        } else {
            0
        }
    }

    fn iv_shape_wrong(&self, w: &WireMessage) -> bool {
        match self.cfg.cipher {
            CipherChoice::Cbc => w.iv.is_none(),
            _ => w.iv.is_some(),
        }
    }

    /// None means the wire cannot be deciphered at all (wrong IV shape,
    /// partial CBC block, no or too-short pad).
    fn decrypt_body(&self, w: &WireMessage, body_bits: usize) -> Option<BitString> {
        if self.iv_shape_wrong(w) {
            return None;
        }
        let body = w.body.slice(0, body_bits);
        match self.cfg.cipher {
            CipherChoice::Otp => {
                let pad = self.pads.get(&self.current?)?;
                otp_crypt(pad, &body).ok()
            }
            CipherChoice::Ctr => {
                let cipher = self.enc_cipher.as_ref()?;
                let idx = self.current.unwrap_or(0);
                ctr_crypt(cipher, &Self::message_counter(idx), &body).ok()
            }
            CipherChoice::Cbc => {
                let cipher = self.enc_cipher.as_ref()?;
                let bytes = body.to_bytes()?;
                if bytes.len() % 16 != 0 {
                    return None;
                }
                let pt = cbc_decrypt(cipher, w.iv.as_ref()?.as_bytes(), &bytes).ok()?;
                Some(BitString::from_bytes(&pt))
            }
        }
    }

    fn decrypt_cost(&self, body_bits: usize) -> u64 {
        match self.cfg.cipher {
            CipherChoice::Otp => 0,
            CipherChoice::Ctr => body_bits.div_ceil(BLOCK_BITS) as u64,
            CipherChoice::Cbc => (body_bits / BLOCK_BITS) as u64,
        }
    }
}

fn validate_cost(bits: usize) -> u64 {
    bits.div_ceil(BLOCK_BITS) as u64
}

// MAC input gets one-and-zeros padding, so it always occupies at least one
// block.
fn mac_cost(input_bits: usize) -> u64 {
    ((input_bits + 1).div_ceil(BLOCK_BITS)) as u64
}
