//! Authenticated-encryption composition lab.
//!
//! A library and command-line harness for studying how the order of
//! formatting, authentication and encipherment decides whether a receiver
//! leaks plaintext through its accept/reject behavior. It provides:
//!
//! - bit-exact strings and the cipher primitives (AES-128, CBC, CTR,
//!   one-time pad, CBC-MAC) the pipelines are built from;
//! - five formatting rules (three block paddings and two randomized
//!   bit-pair encodings) with their validators;
//! - a configurable protect/unprotect pipeline covering the four
//!   composition orders, wrapped by a validation oracle with a leaky and
//!   a strict response mode;
//! - mechanized attacks (keystream bit-flipping, two-bit pair flips, the
//!   adaptive pair probe, a CBC padding oracle, replay) that demonstrate
//!   which compositions leak and which are secure;
//! - CCM authenticated encryption, bit-exact against published example
//!   vectors, and a CCMP-style session layer with sequence-number nonces,
//!   replay detection and error-handling policy.

pub mod attack;
pub mod bits;
pub mod ccm;
pub mod cipher;
pub mod format;
pub mod oracle;
pub mod scheme;
pub mod session;
pub mod vectors;

pub use bits::{BitString, Block, BLOCK_BITS, BLOCK_BYTES};
pub use cipher::{CipherId, CipherKey};
pub use format::FormatRule;
pub use scheme::{CipherChoice, Scheme, SchemeConfig, SchemeOrder, UnprotectOutcome, WireMessage};
