//! Batch command-line surface for the lab: CCM encrypt/decrypt, the
//! vector-file runner, the attack runner, the order-of-operations matrix,
//! a session demonstration and the error-log audit viewer.
//!
//! Exit codes: 0 success, 1 cryptographic rejection or an attack outcome
//! that contradicts the expectation table, 2 usage errors. All randomness
//! flows from `--seed` (default 42), so identical invocations produce
//! byte-identical output.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use ccmlab_core::attack::{run_matrix, run_named_attack};
use ccmlab_core::ccm::{ccm_decrypt, ccm_encrypt, CcmParams};
use ccmlab_core::cipher::CipherKey;
use ccmlab_core::session::{audit, ErrorEvent, SessionState, SessionStatus};
use ccmlab_core::vectors::{parse_vector_file, run_vectors};
use ccmlab_core::{CipherChoice, FormatRule, SchemeConfig, SchemeOrder};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "ccmlab", version, about = "authenticated-encryption composition lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// CCM generation-encryption; prints ciphertext||tag as hex
    CcmEncrypt(CcmArgs),
    /// CCM decryption-verification; prints the payload as hex, or the
    /// token INVALID with exit code 1
    CcmDecrypt(CcmDecryptArgs),
    /// Runs a line-oriented CCM vector file, one pass/fail line per vector
    Vectors {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Runs one named attack in a self-contained harness, reporting JSON
    Attack {
        #[arg(long, value_parser = ["enck", "enci", "padding-oracle", "replay", "semantic-flip"])]
        name: String,
        /// Composition order (defaults to the attack's natural victim)
        #[arg(long)]
        order: Option<SchemeOrder>,
        /// Formatting rule (defaults per attack)
        #[arg(long)]
        rule: Option<FormatRule>,
        /// Cipher choice (defaults per attack)
        #[arg(long)]
        cipher: Option<CipherChoice>,
        #[arg(long, default_value_t = 64)]
        tag_bits: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Runs the pair-flip attacks against every composition order and
    /// prints the resulting security table
    Matrix {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Recovery trials per table row
        #[arg(long, default_value_t = 10)]
        trials: usize,
        /// Random manipulations per authenticated secure row
        #[arg(long, default_value_t = 10_000)]
        forgery_trials: usize,
        #[arg(long)]
        json: bool,
    },
    /// Drives a protected session: honest frames, tampered frames,
    /// replays, then the audit summary
    SessionDemo {
        #[arg(long, default_value_t = 8)]
        frames: usize,
        /// How many frames get a flipped ciphertext bit
        #[arg(long, default_value_t = 0)]
        tamper: usize,
        /// How many accepted frames are replayed afterwards
        #[arg(long, default_value_t = 0)]
        replay: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Write the receiver's error log as JSON for `audit`
        #[arg(long)]
        log_out: Option<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Aggregates an exported error log
    Audit {
        #[arg(long)]
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct CcmArgs {
    #[arg(long)]
    key: String,
    #[arg(long)]
    nonce: String,
    #[arg(long, default_value = "")]
    adata: String,
    #[arg(long, default_value = "")]
    payload: String,
    /// Tag length in bytes (4, 6, 8, 10, 12, 14 or 16)
    #[arg(long)]
    tlen: usize,
}

#[derive(Args)]
struct CcmDecryptArgs {
    #[arg(long)]
    key: String,
    #[arg(long)]
    nonce: String,
    #[arg(long, default_value = "")]
    adata: String,
    #[arg(long)]
    ciphertext: String,
    #[arg(long)]
    tlen: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn parse_hex(what: &str, s: &str) -> Result<Vec<u8>, String> {
    hex::decode(s).map_err(|_| format!("--{what} is not valid hex"))
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::CcmEncrypt(args) => {
            let key =
                CipherKey::aes128(&parse_hex("key", &args.key)?).map_err(|e| e.to_string())?;
            let nonce = parse_hex("nonce", &args.nonce)?;
            let adata = parse_hex("adata", &args.adata)?;
            let payload = parse_hex("payload", &args.payload)?;
            let params = CcmParams::new(nonce.len(), args.tlen).map_err(|e| e.to_string())?;
            let ct =
                ccm_encrypt(&key, &params, &nonce, &adata, &payload).map_err(|e| e.to_string())?;
            println!("{}", hex::encode(ct));
            Ok(ExitCode::SUCCESS)
        }
        Command::CcmDecrypt(args) => {
            let key =
                CipherKey::aes128(&parse_hex("key", &args.key)?).map_err(|e| e.to_string())?;
            let nonce = parse_hex("nonce", &args.nonce)?;
            let adata = parse_hex("adata", &args.adata)?;
            let ciphertext = parse_hex("ciphertext", &args.ciphertext)?;
            let params = CcmParams::new(nonce.len(), args.tlen).map_err(|e| e.to_string())?;
            match ccm_decrypt(&key, &params, &nonce, &adata, &ciphertext) {
                Ok(payload) => {
                    println!("{}", hex::encode(payload));
                    Ok(ExitCode::SUCCESS)
                }
                Err(invalid) => {
                    println!("{invalid}");
                    Ok(ExitCode::from(1))
                }
            }
        }
        Command::Vectors { file, json } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
            let vectors = parse_vector_file(&text).map_err(|e| e.to_string())?;
            let outcomes = run_vectors(&vectors);
            let all_pass = outcomes.iter().all(|o| o.pass);
            if json {
                let rows: Vec<serde_json::Value> = outcomes
                    .iter()
                    .map(|o| {
                        serde_json::json!({
                            "index": o.index,
                            "pass": o.pass,
                            "detail": o.detail,
                        })
                    })
                    .collect();
                println!("{}", serde_json::to_string_pretty(&rows).unwrap());
            } else {
                for o in &outcomes {
                    println!(
                        "vector {:>2}: {} ({})",
                        o.index,
                        if o.pass { "PASS" } else { "FAIL" },
                        o.detail
                    );
                }
                println!(
                    "{}/{} vectors passed",
                    outcomes.iter().filter(|o| o.pass).count(),
                    outcomes.len()
                );
            }
            Ok(if all_pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Attack {
            name,
            order,
            rule,
            cipher,
            tag_bits,
            seed,
        } => {
            let (default_order, default_rule, default_cipher) = match name.as_str() {
                "enck" => (SchemeOrder::Afe, FormatRule::EncK, CipherChoice::Otp),
                "enci" => (SchemeOrder::Afe, FormatRule::EncI, CipherChoice::Otp),
                "padding-oracle" => (
                    SchemeOrder::EncryptOnly,
                    FormatRule::Pad3,
                    CipherChoice::Cbc,
                ),
                "semantic-flip" => (
                    SchemeOrder::EncryptOnly,
                    FormatRule::Pad2,
                    CipherChoice::Otp,
                ),
                _ => (SchemeOrder::Fae, FormatRule::Pad2, CipherChoice::Ctr),
            };
            let cfg = SchemeConfig::new(
                order.unwrap_or(default_order),
                rule.unwrap_or(default_rule),
                cipher.unwrap_or(default_cipher),
                tag_bits,
            );
            let report = run_named_attack(&name, cfg, seed).map_err(|e| e.to_string())?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(if report.matches_expectation {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Matrix {
            seed,
            trials,
            forgery_trials,
            json,
        } => {
            let report = run_matrix(seed, trials, forgery_trials);
            if json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                print!("{}", report.render_text());
            }
            Ok(if report.matches_expectations() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::SessionDemo {
            frames,
            tamper,
            replay,
            seed,
            log_out,
            json,
        } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let mut key_bytes = [0u8; 16];
            rng.fill(&mut key_bytes);
            let key = CipherKey::aes128(&key_bytes).map_err(|e| e.to_string())?;
            let params = CcmParams::new(13, 8).map_err(|e| e.to_string())?;
            let mut sender = SessionState::new(key.clone(), params);
            let mut receiver = SessionState::new(key, params);

            // choose which frames get corrupted, spread by the seed
            let mut tamper_targets: Vec<usize> = (0..frames).collect();
            for i in (1..tamper_targets.len()).rev() {
                tamper_targets.swap(i, rng.gen_range(0..=i));
            }
            tamper_targets.truncate(tamper.min(frames));
            tamper_targets.sort_unstable();

            let mut events: Vec<serde_json::Value> = Vec::new();
            let mut lines: Vec<String> = Vec::new();
            let mut accepted_frames = Vec::new();
            for i in 0..frames {
                let payload = format!("frame payload {i}");
                let mut frame = sender
                    .send(b"demo-header", payload.as_bytes())
                    .map_err(|e| e.to_string())?;
                let tampered = tamper_targets.contains(&i);
                if tampered {
                    let pos = rng.gen_range(0..frame.ciphertext.len() * 8);
                    frame.ciphertext[pos / 8] ^= 0x80 >> (pos % 8);
                }
                let outcome = receiver.receive(&frame);
                let verdict = match &outcome {
                    Ok(_) => "ACCEPT",
                    Err(_) => "REJECT",
                };
                if outcome.is_ok() {
                    accepted_frames.push(frame.clone());
                }
                lines.push(format!(
                    "frame pn={} {}{}",
                    frame.pn,
                    verdict,
                    if tampered { " (tampered)" } else { "" }
                ));
                events.push(serde_json::json!({
                    "pn": frame.pn,
                    "tampered": tampered,
                    "replayed": false,
                    "verdict": verdict,
                }));
            }
            for _ in 0..replay {
                if accepted_frames.is_empty() {
                    break;
                }
                let frame = &accepted_frames[rng.gen_range(0..accepted_frames.len())];
                let outcome = receiver.receive(frame);
                let verdict = if outcome.is_ok() { "ACCEPT" } else { "REJECT" };
                lines.push(format!("frame pn={} {} (replayed)", frame.pn, verdict));
                events.push(serde_json::json!({
                    "pn": frame.pn,
                    "tampered": false,
                    "replayed": true,
                    "verdict": verdict,
                }));
            }

            let summary = receiver.audit();
            let status = match receiver.status() {
                SessionStatus::Active => "active",
                SessionStatus::Cancelled => "cancelled",
            };
            if let Some(path) = log_out {
                let log = serde_json::to_string_pretty(receiver.error_log()).unwrap();
                std::fs::write(&path, log)
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
            }
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&serde_json::json!({
                        "events": events,
                        "session_status": status,
                        "audit": summary,
                    }))
                    .unwrap()
                );
            } else {
                for line in &lines {
                    println!("{line}");
                }
                println!("session status: {status}");
                print!("{summary}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { file, json } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| format!("cannot read {}: {e}", file.display()))?;
            let events: Vec<ErrorEvent> =
                serde_json::from_str(&text).map_err(|e| format!("bad log file: {e}"))?;
            let summary = audit(&events);
            if json {
                println!("{}", serde_json::to_string_pretty(&summary).unwrap());
            } else {
                print!("{summary}");
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
