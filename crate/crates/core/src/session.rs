//! A protected channel over CCM with sequence-number nonces, replay
//! detection and an error-handling policy: log every rejected frame,
//! tolerate a small number of consecutive failures before cancelling the
//! session, rekey with externally sourced randomness, and aggregate the
//! error log for auditing.
//!
//! Peers only ever see a single opaque rejection; the reasons live in the
//! local log. Frame sequence numbers are strictly increasing and double as
//! nonces, so no nonce repeats for the lifetime of a key.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ccm::{ccm_decrypt, ccm_encrypt, CcmParams};
use crate::cipher::CipherKey;

/// Sequence numbers travel in a six-byte header field.
pub const PN_LIMIT: u64 = 1 << 48;

/// Consecutive-failure budget before the session cancels itself.
pub const DEFAULT_RETRY_LIMIT: u32 = 3;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SessionError {
    #[error("session is cancelled; rekey to continue")]
    Cancelled,
    #[error("sequence numbers exhausted; rekey required")]
    SequenceExhausted,
    #[error("rekey needs at least {expected} bytes of fresh randomness, got {got}")]
    InsufficientRandomness { expected: usize, got: usize },
    #[error("frame too short to parse")]
    Truncated,
    #[error("{0}")]
    Crypto(String),
}

/// The opaque rejection a peer receives. Deliberately carries nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reject;

impl fmt::Display for Reject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("REJECT")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    InvalidFrame,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Send,
    Receive,
}

/// One rejected frame, as recorded locally. Timestamps are a logical event
/// counter, not wall-clock, so runs are reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorEvent {
    pub timestamp: u64,
    pub pn: u64,
    pub kind: ErrorKind,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Cancelled,
}

/// A protected frame: cleartext sequence number, authenticated header
/// bytes, CCM ciphertext.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub pn: u64,
    pub adata: Vec<u8>,
    pub ciphertext: Vec<u8>,
}

impl Frame {
    /// Serialization: 6-byte big-endian pn, 2-byte big-endian header
    /// length, header, ciphertext.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.adata.len() + self.ciphertext.len());
        out.extend_from_slice(&self.pn.to_be_bytes()[2..]);
        out.extend_from_slice(&(self.adata.len() as u16).to_be_bytes());
        out.extend_from_slice(&self.adata);
        out.extend_from_slice(&self.ciphertext);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Frame, SessionError> {
        if bytes.len() < 8 {
            return Err(SessionError::Truncated);
        }
        let mut pn_bytes = [0u8; 8];
        pn_bytes[2..].copy_from_slice(&bytes[..6]);
        let pn = u64::from_be_bytes(pn_bytes);
        let alen = u16::from_be_bytes([bytes[6], bytes[7]]) as usize;
        if bytes.len() < 8 + alen {
            return Err(SessionError::Truncated);
        }
        Ok(Frame {
            pn,
            adata: bytes[8..8 + alen].to_vec(),
            ciphertext: bytes[8 + alen..].to_vec(),
        })
    }
}

/// One endpoint of the protected channel. Sending and receiving share the
/// key; an instance is single-writer.
pub struct SessionState {
    key: CipherKey,
    params: CcmParams,
    send_pn: u64,
    last_accepted_pn: u64,
    consecutive_failures: u32,
    retry_limit: u32,
    status: SessionStatus,
    error_log: Vec<ErrorEvent>,
    event_clock: u64,
    replay_check: bool,
}

impl SessionState {
    pub fn new(key: CipherKey, params: CcmParams) -> Self {
        SessionState {
            key,
            params,
            send_pn: 1,
            last_accepted_pn: 0,
            consecutive_failures: 0,
            retry_limit: DEFAULT_RETRY_LIMIT,
            status: SessionStatus::Active,
            error_log: Vec::new(),
            event_clock: 0,
            replay_check: true,
        }
    }

    pub fn with_retry_limit(mut self, limit: u32) -> Self {
        self.retry_limit = limit;
        self
    }

    /// Intentionally broken receiver for attack demonstrations: skips the
    /// sequence-number check, so replayed frames decrypt and are accepted.
    pub fn without_replay_check(mut self) -> Self {
        self.replay_check = false;
        self
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn error_log(&self) -> &[ErrorEvent] {
        &self.error_log
    }

    pub fn last_accepted_pn(&self) -> u64 {
        self.last_accepted_pn
    }

    pub fn next_send_pn(&self) -> u64 {
        self.send_pn
    }

    /// The nonce for a sequence number: big-endian pn right-aligned in the
    /// nonce field, zero-filled. Monotone pn means unique nonces.
    fn nonce_for(&self, pn: u64) -> Vec<u8> {
        let n = self.params.nonce_len();
        let mut nonce = vec![0u8; n];
        nonce[n - 6..].copy_from_slice(&pn.to_be_bytes()[2..]);
        nonce
    }

    pub fn send(&mut self, header: &[u8], payload: &[u8]) -> Result<Frame, SessionError> {
        if self.status == SessionStatus::Cancelled {
            return Err(SessionError::Cancelled);
        }
        if self.send_pn >= PN_LIMIT {
            return Err(SessionError::SequenceExhausted);
        }
        let pn = self.send_pn;
        let nonce = self.nonce_for(pn);
        let ciphertext = ccm_encrypt(&self.key, &self.params, &nonce, header, payload)
            .map_err(|e| SessionError::Crypto(e.to_string()))?;
        self.send_pn += 1;
        Ok(Frame {
            pn,
            adata: header.to_vec(),
            ciphertext,
        })
    }

    /// Delivers a frame. On rejection the peer-visible result is the opaque
    /// [`Reject`]; the cause is recorded only in the local error log. Four
    /// consecutive invalid frames (one more than the retry limit) cancel
    /// the session.
    pub fn receive(&mut self, frame: &Frame) -> Result<Vec<u8>, Reject> {
        if self.status == SessionStatus::Cancelled {
            return Err(Reject);
        }
        if self.replay_check && frame.pn <= self.last_accepted_pn {
            self.log(frame.pn, ErrorKind::Replay);
            return Err(Reject);
        }
        let nonce = self.nonce_for(frame.pn);
        match ccm_decrypt(
            &self.key,
            &self.params,
            &nonce,
            &frame.adata,
            &frame.ciphertext,
        ) {
            Ok(payload) => {
                self.last_accepted_pn = frame.pn;
                self.consecutive_failures = 0;
                Ok(payload)
            }
            Err(_) => {
                self.log(frame.pn, ErrorKind::InvalidFrame);
                self.consecutive_failures += 1;
                if self.consecutive_failures > self.retry_limit {
                    self.status = SessionStatus::Cancelled;
                }
                Err(Reject)
            }
        }
    }

    /// Installs a fresh key from externally sourced randomness, resets the
    /// counters and failure budget and reactivates the session. The error
    /// log is preserved across rekeys.
    pub fn rekey(&mut self, fresh_randomness: &[u8]) -> Result<(), SessionError> {
        if fresh_randomness.len() < 16 {
            return Err(SessionError::InsufficientRandomness {
                expected: 16,
                got: fresh_randomness.len(),
            });
        }
        self.key = CipherKey::aes128(&fresh_randomness[..16])
            .map_err(|e| SessionError::Crypto(e.to_string()))?;
        self.send_pn = 1;
        self.last_accepted_pn = 0;
        self.consecutive_failures = 0;
        self.status = SessionStatus::Active;
        Ok(())
    }

    pub fn audit(&self) -> AuditSummary {
        audit(&self.error_log)
    }

    fn log(&mut self, pn: u64, kind: ErrorKind) {
        self.event_clock += 1;
        self.error_log.push(ErrorEvent {
            timestamp: self.event_clock,
            pn,
            kind,
            direction: Direction::Receive,
        });
    }
}

/// Aggregated view of an error log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub total: u64,
    pub invalid_frames: u64,
    pub replays: u64,
    pub first_timestamp: Option<u64>,
    pub last_timestamp: Option<u64>,
    pub per_pn: BTreeMap<u64, u64>,
}

pub fn audit(events: &[ErrorEvent]) -> AuditSummary {
    let mut per_pn = BTreeMap::new();
    let mut invalid_frames = 0;
    let mut replays = 0;
    for e in events {
        *per_pn.entry(e.pn).or_insert(0) += 1;
        match e.kind {
            ErrorKind::InvalidFrame => invalid_frames += 1,
            ErrorKind::Replay => replays += 1,
        }
    }
    AuditSummary {
        total: events.len() as u64,
        invalid_frames,
        replays,
        first_timestamp: events.first().map(|e| e.timestamp),
        last_timestamp: events.last().map(|e| e.timestamp),
        per_pn,
    }
}

impl fmt::Display for AuditSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "audit: {} events ({} invalid frames, {} replays)",
            self.total, self.invalid_frames, self.replays
        )?;
        match (self.first_timestamp, self.last_timestamp) {
            (Some(a), Some(b)) => writeln!(f, "  first/last logical time: {a}/{b}")?,
            _ => writeln!(f, "  log is empty")?,
        }
        for (pn, count) in &self.per_pn {
            writeln!(f, "  pn {pn}: {count} event(s)")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, RngCore, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn pair(seed: u64) -> (SessionState, SessionState) {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut kb = [0u8; 16];
        rng.fill_bytes(&mut kb);
        let key = CipherKey::aes128(&kb).unwrap();
        let params = CcmParams::new(13, 8).unwrap();
        (
            SessionState::new(key.clone(), params),
            SessionState::new(key, params),
        )
    }

    #[test]
    fn consecutive_sends_use_consecutive_sequence_numbers() {
        let (mut tx, _) = pair(1);
        let f1 = tx.send(b"h", b"one").unwrap();
        let f2 = tx.send(b"h", b"two").unwrap();
        assert_eq!(f2.pn, f1.pn + 1);
    }

    #[test]
    fn in_order_frames_are_accepted() {
        let (mut tx, mut rx) = pair(2);
        for i in 0..20u32 {
            let payload = i.to_be_bytes();
            let f = tx.send(b"hdr", &payload).unwrap();
            assert_eq!(rx.receive(&f).unwrap(), payload);
        }
        assert!(rx.error_log().is_empty());
    }

    #[test]
    fn replayed_frame_is_rejected_and_logged() {
        let (mut tx, mut rx) = pair(3);
        let f = tx.send(b"h", b"payload").unwrap();
        assert!(rx.receive(&f).is_ok());
        assert_eq!(rx.receive(&f), Err(Reject));
        assert_eq!(rx.error_log().len(), 1);
        assert_eq!(rx.error_log()[0].kind, ErrorKind::Replay);
        assert_eq!(rx.error_log()[0].pn, f.pn);
        // stale pn below the accepted watermark is also a replay
        let (mut tx2, _) = pair(3);
        let stale = tx2.send(b"h", b"payload").unwrap();
        assert_eq!(stale.pn, f.pn);
        assert_eq!(rx.receive(&stale), Err(Reject));
        assert_eq!(rx.error_log().len(), 2);
    }

    #[test]
    fn four_consecutive_corrupted_frames_cancel_the_session() {
        let (mut tx, mut rx) = pair(4);
        for i in 0..4 {
            let mut f = tx.send(b"h", b"data").unwrap();
            f.ciphertext[0] ^= 1;
            assert_eq!(rx.receive(&f), Err(Reject));
            if i < 3 {
                assert_eq!(rx.status(), SessionStatus::Active, "after failure {i}");
            }
        }
        assert_eq!(rx.status(), SessionStatus::Cancelled);
        assert_eq!(rx.error_log().len(), 4);
        assert!(rx
            .error_log()
            .iter()
            .all(|e| e.kind == ErrorKind::InvalidFrame));
        // dead session neither sends nor receives
        assert_eq!(rx.send(b"h", b"x").unwrap_err(), SessionError::Cancelled);
        let f = tx.send(b"h", b"fine").unwrap();
        assert_eq!(rx.receive(&f), Err(Reject));
    }

    #[test]
    fn a_success_resets_the_failure_budget() {
        let (mut tx, mut rx) = pair(5);
        for _ in 0..3 {
            let mut f = tx.send(b"h", b"data").unwrap();
            f.ciphertext[0] ^= 1;
            let _ = rx.receive(&f);
        }
        let good = tx.send(b"h", b"good").unwrap();
        assert!(rx.receive(&good).is_ok());
        for _ in 0..3 {
            let mut f = tx.send(b"h", b"data").unwrap();
            f.ciphertext[0] ^= 1;
            let _ = rx.receive(&f);
        }
        assert_eq!(rx.status(), SessionStatus::Active);
    }

    #[test]
    fn rekey_resets_counters_rejects_old_frames_and_keeps_the_log() {
        let (mut tx, mut rx) = pair(6);
        let old_frame = tx.send(b"h", b"before rekey").unwrap();
        assert!(rx.receive(&old_frame).is_ok());
        let mut f = tx.send(b"h", b"x").unwrap();
        f.ciphertext[0] ^= 1;
        let _ = rx.receive(&f);
        let log_len = rx.error_log().len();

        let entropy = [0x42u8; 16];
        tx.rekey(&entropy).unwrap();
        rx.rekey(&entropy).unwrap();
        assert_eq!(tx.next_send_pn(), 1);
        assert_eq!(rx.last_accepted_pn(), 0);
        assert_eq!(rx.error_log().len(), log_len);

        // pre-rekey traffic no longer verifies
        assert_eq!(rx.receive(&old_frame), Err(Reject));
        // fresh traffic under the new key flows
        let f = tx.send(b"h", b"after").unwrap();
        assert_eq!(rx.receive(&f).unwrap(), b"after");
    }

    #[test]
    fn rekey_requires_enough_randomness_and_fresh_keys_differ() {
        let (mut tx, _) = pair(7);
        assert_eq!(
            tx.rekey(&[0u8; 15]).unwrap_err(),
            SessionError::InsufficientRandomness {
                expected: 16,
                got: 15
            }
        );
        let mut rng = ChaCha20Rng::seed_from_u64(0xe417089);
        let mut seen = std::collections::HashSet::new();
        seen.insert(tx.key.key_bytes().to_vec());
        for _ in 0..100 {
            let mut entropy = [0u8; 16];
            rng.fill_bytes(&mut entropy);
            tx.rekey(&entropy).unwrap();
            assert!(seen.insert(tx.key.key_bytes().to_vec()), "key repeated");
        }
    }

    #[test]
    fn rekey_reactivates_a_cancelled_session() {
        let (mut tx, mut rx) = pair(8);
        for _ in 0..4 {
            let mut f = tx.send(b"h", b"data").unwrap();
            f.ciphertext[0] ^= 1;
            let _ = rx.receive(&f);
        }
        assert_eq!(rx.status(), SessionStatus::Cancelled);
        rx.rekey(&[9u8; 16]).unwrap();
        tx.rekey(&[9u8; 16]).unwrap();
        assert_eq!(rx.status(), SessionStatus::Active);
        let f = tx.send(b"h", b"hello").unwrap();
        assert_eq!(rx.receive(&f).unwrap(), b"hello");
    }

    #[test]
    fn nonces_never_repeat_across_a_session() {
        let (mut tx, _) = pair(9);
        let mut nonces = std::collections::HashSet::new();
        for i in 0..200u32 {
            let f = tx.send(b"h", &i.to_be_bytes()).unwrap();
            assert!(nonces.insert(tx.nonce_for(f.pn)), "nonce repeated");
        }
    }

    #[test]
    fn frame_serialization_roundtrip_and_truncation() {
        let f = Frame {
            pn: 0x0102030405,
            adata: b"example header".to_vec(),
            ciphertext: vec![9; 33],
        };
        let bytes = f.to_bytes();
        assert_eq!(Frame::from_bytes(&bytes).unwrap(), f);
        assert_eq!(
            Frame::from_bytes(&bytes[..7]).unwrap_err(),
            SessionError::Truncated
        );
        assert_eq!(
            Frame::from_bytes(&bytes[..10]).unwrap_err(),
            SessionError::Truncated
        );
    }

    #[test]
    fn audit_counts() {
        assert_eq!(audit(&[]).total, 0);
        let events = vec![
            ErrorEvent { timestamp: 1, pn: 5, kind: ErrorKind::Replay, direction: Direction::Receive },
            ErrorEvent { timestamp: 2, pn: 5, kind: ErrorKind::Replay, direction: Direction::Receive },
            ErrorEvent { timestamp: 3, pn: 7, kind: ErrorKind::Replay, direction: Direction::Receive },
            ErrorEvent { timestamp: 4, pn: 9, kind: ErrorKind::InvalidFrame, direction: Direction::Receive },
        ];
        let summary = audit(&events);
        assert_eq!(summary.replays, 3);
        assert_eq!(summary.invalid_frames, 1);
        assert_eq!(summary.first_timestamp, Some(1));
        assert_eq!(summary.last_timestamp, Some(4));
        assert_eq!(summary.per_pn[&5], 2);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_audit_total_equals_log_length(seed in any::<u64>(), n in 0usize..40) {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let events: Vec<ErrorEvent> = (0..n)
                .map(|i| ErrorEvent {
                    timestamp: i as u64 + 1,
                    pn: rng.gen_range(0..8),
                    kind: if rng.gen_bool(0.5) { ErrorKind::Replay } else { ErrorKind::InvalidFrame },
                    direction: Direction::Receive,
                })
                .collect();
            let summary = audit(&events);
            prop_assert_eq!(summary.total as usize, events.len());
            prop_assert_eq!(summary.replays + summary.invalid_frames, summary.total);
            prop_assert_eq!(summary.per_pn.values().sum::<u64>(), summary.total);
        }

        #[test]
        fn prop_replay_totality(seed in any::<u64>()) {
            // whatever the delivery order, a pn at or below the accepted
            // watermark is never accepted
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let (mut tx, mut rx) = pair(seed);
            let frames: Vec<Frame> = (0..10u32)
                .map(|i| tx.send(b"h", &i.to_be_bytes()).unwrap())
                .collect();
            let mut accepted = Vec::new();
            for _ in 0..30 {
                let f = &frames[rng.gen_range(0..frames.len())];
                let was_fresh = f.pn > rx.last_accepted_pn();
                match rx.receive(f) {
                    Ok(_) => {
                        prop_assert!(was_fresh);
                        accepted.push(f.pn);
                    }
                    Err(Reject) => prop_assert!(!was_fresh),
                }
            }
            let mut sorted = accepted.clone();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), accepted.len(), "duplicate acceptance");
        }
    }
}
