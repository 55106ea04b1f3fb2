//! Line-oriented CCM test-vector files and a runner for them.
//!
//! The format is the usual `Name=hexvalue` style: records carry `Key=`,
//! `Nonce=`, `Adata=`, `Payload=` and `CT=` lines and are separated by
//! blank lines; `#` starts a comment. Tag length is implied by
//! `len(CT) - len(Payload)` and the nonce length by `len(Nonce)`.

use thiserror::Error;

use crate::ccm::{ccm_decrypt, ccm_encrypt, CcmParams};
use crate::cipher::CipherKey;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum VectorError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("vector {index}: {msg}")]
    Shape { index: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CcmVector {
    pub key: Vec<u8>,
    pub nonce: Vec<u8>,
    pub adata: Vec<u8>,
    pub payload: Vec<u8>,
    pub ct: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct VectorOutcome {
    pub index: usize,
    pub pass: bool,
    pub detail: String,
}

pub fn parse_vector_file(text: &str) -> Result<Vec<CcmVector>, VectorError> {
    let mut vectors = Vec::new();
    let mut fields: [Option<Vec<u8>>; 5] = Default::default();
    let mut record_open = false;

    let mut flush = |fields: &mut [Option<Vec<u8>>; 5],
                     record_open: &mut bool,
                     line: usize|
     -> Result<(), VectorError> {
        if !*record_open {
            return Ok(());
        }
        let names = ["Key", "Nonce", "Adata", "Payload", "CT"];
        let mut taken = std::mem::take(fields).into_iter();
        let mut get = |name: &str| {
            taken.next().flatten().ok_or(VectorError::Parse {
                line,
                msg: format!("record is missing `{name}=`"),
            })
        };
        vectors.push(CcmVector {
            key: get(names[0])?,
            nonce: get(names[1])?,
            adata: get(names[2])?,
            payload: get(names[3])?,
            ct: get(names[4])?,
        });
        *record_open = false;
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            if line.is_empty() {
                flush(&mut fields, &mut record_open, line_no)?;
            }
            continue;
        }
        let (name, value) = line.split_once('=').ok_or(VectorError::Parse {
            line: line_no,
            msg: "expected `Name=hex`".into(),
        })?;
        let slot = match name.trim() {
            "Key" => 0,
            "Nonce" => 1,
            "Adata" => 2,
            "Payload" => 3,
            "CT" => 4,
            other => {
                return Err(VectorError::Parse {
                    line: line_no,
                    msg: format!("unknown field `{other}`"),
                })
            }
        };
        let bytes = hex::decode(value.trim()).map_err(|_| VectorError::Parse {
            line: line_no,
            msg: format!("bad hex in `{name}`"),
        })?;
        if fields[slot].is_some() {
            return Err(VectorError::Parse {
                line: line_no,
                msg: format!("duplicate field `{name}` in record"),
            });
        }
        fields[slot] = Some(bytes);
        record_open = true;
    }
    flush(&mut fields, &mut record_open, text.lines().count())?;
    Ok(vectors)
}

/// Derives the CCM parameters a vector implies, or explains why it cannot.
pub fn vector_params(index: usize, v: &CcmVector) -> Result<CcmParams, VectorError> {
    if v.ct.len() < v.payload.len() {
        return Err(VectorError::Shape {
            index,
            msg: "CT shorter than Payload".into(),
        });
    }
    CcmParams::new(v.nonce.len(), v.ct.len() - v.payload.len()).map_err(|e| VectorError::Shape {
        index,
        msg: e.to_string(),
    })
}

/// Runs one vector in both directions: generation-encryption must
/// reproduce `CT` byte-for-byte and decryption-verification must accept it
/// and return the payload.
pub fn run_vector(index: usize, v: &CcmVector) -> VectorOutcome {
    let fail = |detail: String| VectorOutcome {
        index,
        pass: false,
        detail,
    };
    let params = match vector_params(index, v) {
        Ok(p) => p,
        Err(e) => return fail(e.to_string()),
    };
    let key = match CipherKey::aes128(&v.key) {
        Ok(k) => k,
        Err(e) => return fail(e.to_string()),
    };
    match ccm_encrypt(&key, &params, &v.nonce, &v.adata, &v.payload) {
        Ok(ct) if ct != v.ct => {
            return fail(format!(
                "encrypt mismatch: got {}, want {}",
                hex::encode(&ct),
                hex::encode(&v.ct)
            ))
        }
        Err(e) => return fail(e.to_string()),
        Ok(_) => {}
    }
    match ccm_decrypt(&key, &params, &v.nonce, &v.adata, &v.ct) {
        Ok(p) if p != v.payload => fail("decrypt returned wrong payload".into()),
        Err(_) => fail("decrypt rejected a valid vector".into()),
        Ok(_) => VectorOutcome {
            index,
            pass: true,
            detail: format!(
                "n={} t={} alen={} plen={}",
                params.nonce_len(),
                params.tag_len(),
                v.adata.len(),
                v.payload.len()
            ),
        },
    }
}

pub fn run_vectors(vectors: &[CcmVector]) -> Vec<VectorOutcome> {
    vectors
        .iter()
        .enumerate()
        .map(|(i, v)| run_vector(i, v))
        .collect()
}
