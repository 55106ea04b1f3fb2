//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see
//! the lines as they go by.

use std::time::Instant;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ccmlab_core::attack::{
    padding_oracle_recover, recover_bits_enci, run_matrix, scenario, AttackStatus,
    PADDING_ORACLE_BLOCK_BUDGET,
};
use ccmlab_core::bits::BitString;
use ccmlab_core::ccm::{ccm_decrypt, ccm_encrypt, CcmParams};
use ccmlab_core::cipher::CipherKey;
use ccmlab_core::oracle::{Oracle, OracleMode, ResponseSymbol};
use ccmlab_core::scheme::{Scheme, SchemeConfig, UnprotectOutcome, WireMessage};
use ccmlab_core::session::{ErrorKind, SessionState, SessionStatus};
use ccmlab_core::vectors::{parse_vector_file, run_vectors};
use ccmlab_core::{CipherChoice, FormatRule, SchemeOrder};

struct Criterion {
    name: &'static str,
    started: Instant,
}

impl Criterion {
    fn start(name: &'static str) -> Self {
        Criterion {
            name,
            started: Instant::now(),
        }
    }

    fn finish(self, budget_secs: u64) {
        let elapsed = self.started.elapsed();
        assert!(
            elapsed.as_secs() < budget_secs,
            "criterion `{}` overran its {budget_secs}s budget: {elapsed:?}",
            self.name
        );
        println!("[PASS] {} ({elapsed:.2?})", self.name);
    }
}

#[test]
fn criterion_1_matrix_reproduces_the_composition_table() {
    let c = Criterion::start("matrix reproduction: AFE insecure, FAE/FEA secure, EncryptOnly split");
    let report = run_matrix(0xacc1, 10, 10_000);
    for row in &report.rows {
        let label = format!("{}/{}", row.order, row.rule);
        match (row.order, row.rule) {
            (SchemeOrder::Afe, _) | (SchemeOrder::EncryptOnly, FormatRule::EncK) => {
                assert_eq!(
                    row.exact_recoveries, row.trials,
                    "{label}: expected 100% bit recovery"
                );
                assert_eq!(row.verdict, "insecure", "{label}");
            }
            (SchemeOrder::Fae, _) | (SchemeOrder::Fea, _) => {
                assert_eq!(row.exact_recoveries, 0, "{label}");
                assert_eq!(row.forgery_trials, 10_000, "{label}");
                assert_eq!(
                    row.forged_accepts, 0,
                    "{label}: manipulated wires must never be accepted"
                );
                assert_eq!(row.verdict, "secure", "{label}");
            }
            (SchemeOrder::EncryptOnly, _) => {
                assert_eq!(row.exact_recoveries, 0, "{label}");
                assert_eq!(row.verdict, "secure", "{label}");
            }
        }
        assert_eq!(row.verdict, row.expected_verdict, "{label}");
    }
    assert!(report.matches_expectations());
    c.finish(60);
}

#[test]
fn criterion_2_ccm_bit_exactness_roundtrips_and_tamper_rejection() {
    let c = Criterion::start("CCM: pinned vectors byte-exact, 1000 roundtrips, 10^4 tampers INVALID");

    // pinned published vectors, byte for byte
    let text = include_str!("data/ccm_vectors.txt");
    let vectors = parse_vector_file(text).expect("fixture parses");
    assert!(vectors.len() >= 6);
    let outcomes = run_vectors(&vectors);
    for o in &outcomes {
        assert!(o.pass, "vector {}: {}", o.index, o.detail);
    }

    // 1000 random parameterized roundtrips
    let mut rng = ChaCha20Rng::seed_from_u64(0xacc2);
    for _ in 0..1000 {
        let mut kb = [0u8; 16];
        rng.fill_bytes(&mut kb);
        let key = CipherKey::aes128(&kb).unwrap();
        let n = rng.gen_range(7..=13);
        let t = [4usize, 6, 8, 10, 12, 14, 16][rng.gen_range(0..7)];
        let params = CcmParams::new(n, t).unwrap();
        let mut nonce = vec![0u8; n];
        rng.fill_bytes(&mut nonce);
        let mut adata = vec![0u8; rng.gen_range(0..32)];
        rng.fill_bytes(&mut adata);
        let mut payload = vec![0u8; rng.gen_range(0..64)];
        rng.fill_bytes(&mut payload);
        let ct = ccm_encrypt(&key, &params, &nonce, &adata, &payload).unwrap();
        assert_eq!(
            ccm_decrypt(&key, &params, &nonce, &adata, &ct).unwrap(),
            payload
        );
    }

    // 10^4 single-bit tamper trials at t >= 8: all INVALID
    for _ in 0..10_000 {
        let mut kb = [0u8; 16];
        rng.fill_bytes(&mut kb);
        let key = CipherKey::aes128(&kb).unwrap();
        let n = rng.gen_range(7..=13);
        let t = [8usize, 10, 12, 14, 16][rng.gen_range(0..5)];
        let params = CcmParams::new(n, t).unwrap();
        let mut nonce = vec![0u8; n];
        rng.fill_bytes(&mut nonce);
        let mut payload = vec![0u8; rng.gen_range(0..24)];
        rng.fill_bytes(&mut payload);
        let mut ct = ccm_encrypt(&key, &params, &nonce, b"hdr", &payload).unwrap();
        let bit = rng.gen_range(0..ct.len() * 8);
        ct[bit / 8] ^= 0x80 >> (bit % 8);
        assert!(
            ccm_decrypt(&key, &params, &nonce, b"hdr", &ct).is_err(),
            "tampered ciphertext was accepted"
        );
    }
    c.finish(60);
}

#[test]
fn criterion_3_padding_oracle_recovery_and_oz_immunity() {
    let c = Criterion::start("padding oracle: 3-block recovery <= 12288 queries, OZ padding immune");

    let bits = 320; // three data blocks
    let cfg = SchemeConfig::new(
        SchemeOrder::EncryptOnly,
        FormatRule::Pad3,
        CipherChoice::Cbc,
        64,
    );
    let mut sc = scenario(OracleMode::Leaky, cfg, 0xacc3, bits).unwrap();
    let result = padding_oracle_recover(&mut sc.oracle, &sc.wire, bits);
    assert_eq!(result.status, AttackStatus::Success);
    assert_eq!(result.recovered.unwrap(), sc.plaintext, "exact recovery");
    assert!(
        result.queries_used <= 12_288,
        "used {} queries",
        result.queries_used
    );
    assert!(result.queries_used <= 3 * PADDING_ORACLE_BLOCK_BUDGET);

    // the identical procedure against the one-and-zeros padding learns
    // nothing: its validator never isolates a byte
    let cfg_oz = SchemeConfig::new(
        SchemeOrder::EncryptOnly,
        FormatRule::Pad2,
        CipherChoice::Cbc,
        64,
    );
    let mut sc_oz = scenario(OracleMode::Leaky, cfg_oz, 0xacc3, bits).unwrap();
    let claimed = (sc_oz.wire.body.len() / 128 - 1) * 128 - 8;
    let oz = padding_oracle_recover(&mut sc_oz.oracle, &sc_oz.wire, claimed);
    assert_eq!(oz.status, AttackStatus::Inconclusive);
    assert_eq!(oz.recovered, None);
    c.finish(30);
}

#[test]
fn criterion_4_strict_oracle_rejections_are_bit_identical() {
    let c = Criterion::start("strict oracle: MAC failure and forged ill-format observations equal");

    let mut rng = ChaCha20Rng::seed_from_u64(0xacc4);
    let cfg = SchemeConfig::new(SchemeOrder::Fae, FormatRule::EncK, CipherChoice::Ctr, 64);
    let mut scheme = Scheme::from_seed(cfg, 0xacc4).unwrap();
    let p = BitString::random(&mut rng, 64);
    let wire = scheme.protect(&p, &mut rng).unwrap();

    // input 1: ordinary MAC failure from a single flipped bit
    let mac_failure_wire = WireMessage {
        iv: None,
        body: wire.body.flip_bits(&[11]).unwrap(),
    };
    // input 2: ill-formatted text carrying a correct tag, forged with the
    // oracle's own key; same body length as the honest wire
    let mut bad_text = BitString::zeros(128);
    bad_text.set_bit(0, true);
    bad_text.set_bit(1, true);
    let forged = scheme
        .seal_raw(&bad_text.concat(&scheme.mac_tag(&bad_text)), &mut rng)
        .unwrap();
    assert_eq!(forged.body.len(), wire.body.len());
    assert_eq!(scheme.unprotect(&forged), UnprotectOutcome::Invalid);
    assert_eq!(
        scheme.unprotect(&mac_failure_wire),
        UnprotectOutcome::MacFailure
    );

    let mut oracle = Oracle::new(OracleMode::Strict, scheme);
    let a = oracle.query(&mac_failure_wire);
    let b = oracle.query(&forged);
    assert_eq!(a.symbol, ResponseSymbol::Reject);
    assert_eq!(b.symbol, ResponseSymbol::Reject);
    assert_eq!(
        (a.symbol, a.cost),
        (b.symbol, b.cost),
        "observations must be bit-identical"
    );
    c.finish(30);
}

#[test]
fn criterion_5_session_policy() {
    let c = Criterion::start("session: replay logged, retry limit cancels, rekey resets");

    let key = CipherKey::aes128(&[0xa5; 16]).unwrap();
    let params = CcmParams::new(13, 8).unwrap();

    // replayed frame: rejected and logged
    let mut tx = SessionState::new(key.clone(), params);
    let mut rx = SessionState::new(key.clone(), params);
    let frame = tx.send(b"hdr", b"payload").unwrap();
    assert!(rx.receive(&frame).is_ok());
    assert!(rx.receive(&frame).is_err());
    assert_eq!(rx.error_log().len(), 1);
    assert_eq!(rx.error_log()[0].kind, ErrorKind::Replay);

    // four consecutive corrupted frames cancel the session (retry limit 3)
    let mut tx = SessionState::new(key.clone(), params);
    let mut rx = SessionState::new(key.clone(), params);
    for i in 0..4 {
        let mut f = tx.send(b"hdr", b"data").unwrap();
        f.ciphertext[0] ^= 1;
        assert!(rx.receive(&f).is_err());
        let expect = if i < 3 {
            SessionStatus::Active
        } else {
            SessionStatus::Cancelled
        };
        assert_eq!(rx.status(), expect, "after corrupted frame {i}");
    }

    // rekey: counters reset, pre-rekey frames rejected
    let mut tx = SessionState::new(key.clone(), params);
    let mut rx = SessionState::new(key, params);
    let old = tx.send(b"hdr", b"old traffic").unwrap();
    assert!(rx.receive(&old).is_ok());
    tx.rekey(&[0x77; 16]).unwrap();
    rx.rekey(&[0x77; 16]).unwrap();
    assert_eq!(tx.next_send_pn(), 1);
    assert_eq!(rx.last_accepted_pn(), 0);
    assert!(rx.receive(&old).is_err(), "pre-rekey frame must be rejected");
    let fresh = tx.send(b"hdr", b"new traffic").unwrap();
    assert_eq!(fresh.pn, 1);
    assert_eq!(rx.receive(&fresh).unwrap(), b"new traffic");
    c.finish(30);
}

#[test]
fn criterion_6_adaptive_attack_query_bound() {
    let c = Criterion::start("adaptive pair probe: mean queries per bit within [1.55, 1.80]");

    // enumerated expectation over the pair distribution of a uniform bit:
    // pairs 00, 01, 10 at 1/6 each, 11 at 1/2; 00 and 10 resolve in one
    // query, 01 and 11 take two
    let expected = (1.0f64 + 2.0 + 1.0) / 6.0 + (2.0 * 3.0) / 6.0;
    assert!((expected - 5.0 / 3.0).abs() < 1e-12);

    let cfg = SchemeConfig::new(SchemeOrder::Afe, FormatRule::EncI, CipherChoice::Otp, 64);
    let mut total_queries = 0u64;
    let mut total_bits = 0u64;
    for trial in 0..10 {
        let bits = 100;
        let mut sc = scenario(OracleMode::Leaky, cfg, 0xacc6 + trial, bits).unwrap();
        let indices: Vec<usize> = (0..bits).collect();
        let result = recover_bits_enci(&mut sc.oracle, &sc.wire, &indices);
        assert_eq!(result.status, AttackStatus::Success);
        assert_eq!(result.recovered.unwrap(), sc.plaintext);
        total_queries += result.queries_used;
        total_bits += bits as u64;
    }
    assert_eq!(total_bits, 1000);
    let mean = total_queries as f64 / total_bits as f64;
    assert!(
        (1.55..=1.80).contains(&mean),
        "mean {mean} outside [1.55, 1.80] (enumerated expectation {expected})"
    );
    c.finish(30);
}
