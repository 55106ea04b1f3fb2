//! CCM authenticated encryption: CTR-mode encipherment combined with
//! CBC-MAC authentication under a single key.
//!
//! Generation-encryption formats the nonce, associated data and payload
//! into blocks, takes a CBC-MAC over them with a zero IV, enciphers the
//! payload with the keystream starting at the *second* counter value, and
//! masks the tag with the first keystream block S_0 = E(Ctr_0).
//! Decryption-verification recomputes everything and answers either the
//! payload or the single symbol [`CcmInvalid`], for tag mismatches and
//! structural defects alike, so a watching attacker learns nothing about
//! the cause. Both the full CTR decryption and the full MAC recomputation
//! run on every call, even when a structural check has already failed.
//!
//! Block layout, flags bytes and length encodings are bit-exact against
//! the published example vectors for AES-128 (see `tests/data`); only the
//! two-byte associated-data length encoding is supported, capping
//! associated data below 2^16 - 2^8 bytes.

use thiserror::Error;

use crate::bits::{BitString, Block, BLOCK_BYTES};
use crate::cipher::{cbc_mac, ctr_crypt, BlockCipher, CipherId, CipherKey, KeyedCipher};

/// Exclusive upper bound on associated-data length in bytes.
pub const ADATA_LIMIT: usize = 0xff00;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CcmError {
    #[error("nonce length {0} outside 7..=13 bytes")]
    NonceLength(usize),
    #[error("tag length {0} not one of 4, 6, 8, 10, 12, 14, 16 bytes")]
    TagLength(usize),
    #[error("associated data of {0} bytes exceeds the two-byte length encoding")]
    AdataTooLong(usize),
    #[error("payload of {0} bytes does not fit the length field")]
    PayloadTooLong(usize),
}

/// The single rejection symbol of decryption-verification. Tag mismatch,
/// truncated input, wrong associated data: all of them are this value and
/// nothing else.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CcmInvalid;

impl std::fmt::Display for CcmInvalid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("INVALID")
    }
}

/// Nonce and tag lengths; the payload length field occupies the remaining
/// q = 15 - nonce_len bytes of a counter block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CcmParams {
    nonce_len: usize,
    tag_len: usize,
}

impl CcmParams {
    pub fn new(nonce_len: usize, tag_len: usize) -> Result<Self, CcmError> {
        if !(7..=13).contains(&nonce_len) {
            return Err(CcmError::NonceLength(nonce_len));
        }
        if !matches!(tag_len, 4 | 6 | 8 | 10 | 12 | 14 | 16) {
            return Err(CcmError::TagLength(tag_len));
        }
        Ok(CcmParams { nonce_len, tag_len })
    }

    pub fn nonce_len(&self) -> usize {
        self.nonce_len
    }

    pub fn tag_len(&self) -> usize {
        self.tag_len
    }

    pub fn q(&self) -> usize {
        15 - self.nonce_len
    }

    fn payload_fits(&self, len: usize) -> bool {
        // the length field bound, and enough headroom that counter
        // increments never leave the q-byte field
        (len as u128) < (1u128 << (8 * self.q())) && len.div_ceil(BLOCK_BYTES) < u32::MAX as usize
    }
}

fn flags_b0(adata_present: bool, tag_len: usize, q: usize) -> u8 {
    (u8::from(adata_present) << 6) | (((tag_len as u8 - 2) / 2) << 3) | (q as u8 - 1)
}

fn b0_block(params: &CcmParams, nonce: &[u8], adata_present: bool, payload_len: usize) -> Block {
    let q = params.q();
    let mut b = [0u8; BLOCK_BYTES];
    b[0] = flags_b0(adata_present, params.tag_len, q);
    b[1..1 + params.nonce_len].copy_from_slice(nonce);
    let len_bytes = (payload_len as u128).to_be_bytes();
    b[1 + params.nonce_len..].copy_from_slice(&len_bytes[16 - q..]);
    Block::new(b)
}

/// Counter block i: flags carry only q-1, then the nonce, then i big-endian
/// in the q-byte tail. Always distinct from B_0, whose flags byte encodes a
/// nonzero tag field.
pub(crate) fn counter_block(params: &CcmParams, nonce: &[u8], i: u64) -> Block {
    let q = params.q();
    let mut b = [0u8; BLOCK_BYTES];
    b[0] = q as u8 - 1;
    b[1..1 + params.nonce_len].copy_from_slice(nonce);
    let idx = (i as u128).to_be_bytes();
    b[1 + params.nonce_len..].copy_from_slice(&idx[16 - q..]);
    Block::new(b)
}

fn check_inputs(
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    payload_len: usize,
) -> Result<(), CcmError> {
    if nonce.len() != params.nonce_len {
        return Err(CcmError::NonceLength(nonce.len()));
    }
    if adata.len() >= ADATA_LIMIT {
        return Err(CcmError::AdataTooLong(adata.len()));
    }
    if !params.payload_fits(payload_len) {
        return Err(CcmError::PayloadTooLong(payload_len));
    }
    Ok(())
}

/// The MAC input: B_0, then the length-prefixed associated data zero-padded
/// to the block boundary (omitted entirely when empty), then the payload
/// zero-padded to the boundary. Distinct (adata, payload) inputs always
/// produce distinct block sequences, which is what makes the tag binding.
pub fn ccm_format(
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    payload: &[u8],
) -> Result<Vec<Block>, CcmError> {
    check_inputs(params, nonce, adata, payload.len())?;
    Ok(format_blocks(params, nonce, adata, payload))
}

fn format_blocks(params: &CcmParams, nonce: &[u8], adata: &[u8], payload: &[u8]) -> Vec<Block> {
    let mut bytes = Vec::with_capacity(BLOCK_BYTES * (2 + adata.len() / 16 + payload.len() / 16));
    bytes.extend_from_slice(b0_block(params, nonce, !adata.is_empty(), payload.len()).as_bytes());
    if !adata.is_empty() {
        bytes.extend_from_slice(&(adata.len() as u16).to_be_bytes());
        bytes.extend_from_slice(adata);
        pad_to_block(&mut bytes);
    }
    if !payload.is_empty() {
        bytes.extend_from_slice(payload);
        pad_to_block(&mut bytes);
    }
    BitString::from_bytes(&bytes)
        .split_blocks()
        .expect("padded to block boundary")
}

fn pad_to_block(bytes: &mut Vec<u8>) {
    let rem = bytes.len() % BLOCK_BYTES;
    if rem != 0 {
        bytes.resize(bytes.len() + BLOCK_BYTES - rem, 0);
    }
}

fn keystream_block(cipher: &KeyedCipher, ctr: &Block) -> [u8; BLOCK_BYTES] {
    let mut s = *ctr.as_bytes();
    cipher.encrypt_block(&mut s);
    s
}

fn compute_masked_tag(
    cipher: &KeyedCipher,
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    payload: &[u8],
    mask_counter_index: u64,
) -> Vec<u8> {
    let blocks = format_blocks(params, nonce, adata, payload);
    let tag = cbc_mac(
        cipher,
        BitString::join_blocks(&blocks).to_bytes().expect("aligned").as_slice(),
        params.tag_len * 8,
    )
    .expect("aligned input, tag within block width")
    .to_bytes()
    .expect("tag is whole bytes");
    let s0 = keystream_block(cipher, &counter_block(params, nonce, mask_counter_index));
    tag.iter().zip(&s0).map(|(t, s)| t ^ s).collect()
}

fn ctr_payload(
    cipher: &KeyedCipher,
    params: &CcmParams,
    nonce: &[u8],
    data: &[u8],
) -> Vec<u8> {
    ctr_crypt(
        cipher,
        &counter_block(params, nonce, 1),
        &BitString::from_bytes(data),
    )
    .expect("block cipher is 16 bytes wide")
    .to_bytes()
    .expect("byte input stays byte aligned")
}

/// Generation-encryption. Output is the enciphered payload followed by the
/// masked tag. The nonce must be fresh for every message under this key;
/// the session layer enforces that, here it is a caller contract.
pub fn ccm_encrypt(
    key: &CipherKey,
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    payload: &[u8],
) -> Result<Vec<u8>, CcmError> {
    assert_eq!(key.id(), CipherId::Aes128, "CCM runs over the standard cipher");
    check_inputs(params, nonce, adata, payload.len())?;
    let cipher = key.cipher();
    let mut out = ctr_payload(&cipher, params, nonce, payload);
    out.extend(compute_masked_tag(&cipher, params, nonce, adata, payload, 0));
    Ok(out)
}

#[cfg(test)]
fn ccm_encrypt_with_broken_mask(
    key: &CipherKey,
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    payload: &[u8],
) -> Vec<u8> {
    // intentionally masks the tag with E(Ctr_1) instead of E(Ctr_0)
    let cipher = key.cipher();
    let mut out = ctr_payload(&cipher, params, nonce, payload);
    out.extend(compute_masked_tag(&cipher, params, nonce, adata, payload, 1));
    out
}

/// Decryption-verification. Any mismatch or structural defect answers the
/// identical [`CcmInvalid`] value; causes are never distinguished. The
/// payload decryption and tag recomputation run unconditionally so the
/// work done does not depend on where a check failed.
pub fn ccm_decrypt(
    key: &CipherKey,
    params: &CcmParams,
    nonce: &[u8],
    adata: &[u8],
    ciphertext: &[u8],
) -> Result<Vec<u8>, CcmInvalid> {
    assert_eq!(key.id(), CipherId::Aes128, "CCM runs over the standard cipher");
    let cipher = key.cipher();
    let t = params.tag_len;

    let mut structural_ok = ciphertext.len() >= t
        && nonce.len() == params.nonce_len
        && adata.len() < ADATA_LIMIT;
    let payload_len = ciphertext.len().saturating_sub(t);
    structural_ok &= params.payload_fits(payload_len);

    // normalized stand-ins keep the recomputation well-defined even for
    // malformed inputs; the structural flag already forces rejection
    let mut nonce_buf = vec![0u8; params.nonce_len];
    let ncopy = nonce.len().min(params.nonce_len);
    nonce_buf[..ncopy].copy_from_slice(&nonce[..ncopy]);
    let adata_capped = &adata[..adata.len().min(ADATA_LIMIT - 1)];

    let payload = ctr_payload(&cipher, params, &nonce_buf, &ciphertext[..payload_len]);
    let expected = compute_masked_tag(&cipher, params, &nonce_buf, adata_capped, &payload, 0);

    let mut received = vec![0u8; t];
    let tail_start = payload_len;
    let tail = &ciphertext[tail_start..];
    received[..tail.len().min(t)].copy_from_slice(&tail[..tail.len().min(t)]);

    let mut diff = u8::from(!structural_ok);
    for (e, r) in expected.iter().zip(&received) {
        diff |= e ^ r;
    }
    if diff != 0 {
        return Err(CcmInvalid);
    }
    Ok(payload)
}
