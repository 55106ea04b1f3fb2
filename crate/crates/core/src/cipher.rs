//! Block ciphers and the modes built on them: CBC, CTR keystreams,
//! one-time-pad encipherment and CBC-MAC.
//!
//! The standard cipher is AES-128. A reduced 16-bit toy cipher sits behind
//! the same trait so properties can be tested exhaustively at small width;
//! it never participates in CCM vector tests.

use aes::cipher::{generic_array::GenericArray, BlockDecrypt, BlockEncrypt, KeyInit};
use aes::Aes128;
use thiserror::Error;

use crate::bits::{BitString, Block, BLOCK_BITS, BLOCK_BYTES};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CipherError {
    #[error("invalid key length: expected {expected} bytes, got {got}")]
    InvalidKeyLength { expected: usize, got: usize },
    #[error("input of {got} bytes is not a whole number of {block} byte blocks")]
    PartialBlock { got: usize, block: usize },
    #[error("iv length {got} does not match block length {block}")]
    IvLength { got: usize, block: usize },
    #[error("pad of {pad} bits is too short for {data} bits of data")]
    PadTooShort { pad: usize, data: usize },
    #[error("tag width {tag_bits} not in 1..={max} bits")]
    TagWidth { tag_bits: usize, max: usize },
    #[error("counter mode requires a {BLOCK_BYTES}-byte block cipher")]
    CounterBlockWidth,
}

/// A keyed permutation over fixed-width blocks.
pub trait BlockCipher {
    fn block_bytes(&self) -> usize;
    /// Encrypts `block` in place. Panics if `block.len() != block_bytes()`.
    fn encrypt_block(&self, block: &mut [u8]);
    /// Decrypts `block` in place. Panics if `block.len() != block_bytes()`.
    fn decrypt_block(&self, block: &mut [u8]);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum CipherId {
    /// AES with a 128-bit key, the standard cipher.
    Aes128,
    /// 16-bit-block substitution-permutation fixture for exhaustive tests.
    Toy16,
}

impl CipherId {
    pub fn key_bytes(self) -> usize {
        match self {
            CipherId::Aes128 => 16,
            CipherId::Toy16 => 2,
        }
    }

    pub fn block_bytes(self) -> usize {
        match self {
            CipherId::Aes128 => BLOCK_BYTES,
            CipherId::Toy16 => 2,
        }
    }
}

/// Key material bound to a cipher choice.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherKey {
    id: CipherId,
    bytes: Vec<u8>,
}

impl CipherKey {
    pub fn new(id: CipherId, bytes: &[u8]) -> Result<Self, CipherError> {
        if bytes.len() != id.key_bytes() {
            return Err(CipherError::InvalidKeyLength {
                expected: id.key_bytes(),
                got: bytes.len(),
            });
        }
        Ok(CipherKey {
            id,
            bytes: bytes.to_vec(),
        })
    }

    pub fn aes128(bytes: &[u8]) -> Result<Self, CipherError> {
        Self::new(CipherId::Aes128, bytes)
    }

    pub fn id(&self) -> CipherId {
        self.id
    }

    pub fn key_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Expands the key into a usable cipher instance.
    pub fn cipher(&self) -> KeyedCipher {
        match self.id {
            CipherId::Aes128 => {
                KeyedCipher::Aes(Aes128::new(GenericArray::from_slice(&self.bytes)))
            }
            CipherId::Toy16 => KeyedCipher::Toy(ToyCipher::new(u16::from_be_bytes([
                self.bytes[0],
                self.bytes[1],
            ]))),
        }
    }
}

pub enum KeyedCipher {
    Aes(Aes128),
    Toy(ToyCipher),
}

impl BlockCipher for KeyedCipher {
    fn block_bytes(&self) -> usize {
        match self {
            KeyedCipher::Aes(_) => BLOCK_BYTES,
            KeyedCipher::Toy(_) => 2,
        }
    }

    fn encrypt_block(&self, block: &mut [u8]) {
        match self {
            KeyedCipher::Aes(c) => c.encrypt_block(GenericArray::from_mut_slice(block)),
            KeyedCipher::Toy(c) => c.encrypt_block(block),
        }
    }

    fn decrypt_block(&self, block: &mut [u8]) {
        match self {
            KeyedCipher::Aes(c) => c.decrypt_block(GenericArray::from_mut_slice(block)),
            KeyedCipher::Toy(c) => c.decrypt_block(block),
        }
    }
}

/// Encrypts a whole number of blocks in CBC mode: C_i = E(P_i xor C_{i-1}),
/// with the IV as C_0. The IV travels with the message, not inside it.
pub fn cbc_encrypt(
    cipher: &KeyedCipher,
    iv: &[u8],
    plaintext: &[u8],
) -> Result<Vec<u8>, CipherError> {
    let nb = cipher.block_bytes();
    check_cbc_input(nb, iv, plaintext)?;
    let mut out = Vec::with_capacity(plaintext.len());
    let mut chain = iv.to_vec();
    for block in plaintext.chunks_exact(nb) {
        for (c, p) in chain.iter_mut().zip(block) {
            *c ^= p;
        }
        cipher.encrypt_block(&mut chain);
        out.extend_from_slice(&chain);
    }
    Ok(out)
}

/// Inverse of [`cbc_encrypt`]: P_i = D(C_i) xor C_{i-1}.
pub fn cbc_decrypt(
    cipher: &KeyedCipher,
    iv: &[u8],
    ciphertext: &[u8],
) -> Result<Vec<u8>, CipherError> {
    let nb = cipher.block_bytes();
    check_cbc_input(nb, iv, ciphertext)?;
    let mut out = Vec::with_capacity(ciphertext.len());
    let mut prev = iv.to_vec();
    let mut buf = vec![0u8; nb];
    for block in ciphertext.chunks_exact(nb) {
        buf.copy_from_slice(block);
        cipher.decrypt_block(&mut buf);
        for (b, p) in buf.iter_mut().zip(&prev) {
            *b ^= p;
        }
        out.extend_from_slice(&buf);
        prev.copy_from_slice(block);
    }
    Ok(out)
}

fn check_cbc_input(nb: usize, iv: &[u8], data: &[u8]) -> Result<(), CipherError> {
    if iv.len() != nb {
        return Err(CipherError::IvLength {
            got: iv.len(),
            block: nb,
        });
    }
    if data.len() % nb != 0 {
        return Err(CipherError::PartialBlock {
            got: data.len(),
            block: nb,
        });
    }
    Ok(())
}

/// Adds one to a counter block, carrying only within the rightmost 32 bits
/// (big-endian). The same convention serves both generic counter mode and
/// CCM's counter blocks.
pub fn next_counter(block: &Block) -> Block {
    counter_add(block, 1)
}

/// Counter block `i` steps after `block`, wrapping within the 32-bit tail.
pub fn counter_add(block: &Block, i: u64) -> Block {
    let mut bytes = *block.as_bytes();
    let tail = u32::from_be_bytes([bytes[12], bytes[13], bytes[14], bytes[15]]);
    let tail = tail.wrapping_add(i as u32);
    bytes[12..16].copy_from_slice(&tail.to_be_bytes());
    Block::new(bytes)
}

/// Keystream blocks E(ctr0), E(ctr0+1), ..., E(ctr0+n-1).
///
/// Counter values must be distinct over the key's lifetime; keeping the
/// starting points of concurrent messages disjoint is the caller's job.
pub fn ctr_keystream(
    cipher: &KeyedCipher,
    ctr0: &Block,
    n: usize,
) -> Result<Vec<Block>, CipherError> {
    if cipher.block_bytes() != BLOCK_BYTES {
        return Err(CipherError::CounterBlockWidth);
    }
    let mut out = Vec::with_capacity(n);
    let mut ctr = *ctr0;
    for _ in 0..n {
        let mut buf = *ctr.as_bytes();
        cipher.encrypt_block(&mut buf);
        out.push(Block::new(buf));
        ctr = next_counter(&ctr);
    }
    Ok(out)
}

/// XORs `s` with the leftmost `s.len()` keystream bits starting at `ctr0`.
/// Applying it twice with the same counter restores the input.
pub fn ctr_crypt(
    cipher: &KeyedCipher,
    ctr0: &Block,
    s: &BitString,
) -> Result<BitString, CipherError> {
    let nblocks = s.len().div_ceil(BLOCK_BITS);
    let ks = ctr_keystream(cipher, ctr0, nblocks)?;
    let ks_bits = BitString::join_blocks(&ks).slice(0, s.len());
    Ok(s.xor(&ks_bits).expect("keystream length matches input"))
}

/// A one-time pad: random bits consumed by exactly one encipherment.
/// Single use is enforced by the scheme layer's ledger, not here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pad {
    bits: BitString,
}

impl Pad {
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        Pad {
            bits: BitString::random(rng, len),
        }
    }

    pub fn from_bits(bits: BitString) -> Self {
        Pad { bits }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &BitString {
        &self.bits
    }
}

/// XORs `s` with the leftmost bits of the pad; self-inverse under the same pad.
pub fn otp_crypt(pad: &Pad, s: &BitString) -> Result<BitString, CipherError> {
    if pad.len() < s.len() {
        return Err(CipherError::PadTooShort {
            pad: pad.len(),
            data: s.len(),
        });
    }
    Ok(s.xor(&pad.bits.slice(0, s.len()))
        .expect("pad prefix length matches input"))
}

/// CBC-MAC with a zero IV over a whole number of blocks; the tag is the
/// leftmost `tag_bits` of the final chaining value. Callers are responsible
/// for padding the input to the block boundary with an injective rule.
pub fn cbc_mac(
    cipher: &KeyedCipher,
    data: &[u8],
    tag_bits: usize,
) -> Result<BitString, CipherError> {
    let nb = cipher.block_bytes();
    let max = nb * 8;
    if tag_bits == 0 || tag_bits > max {
        return Err(CipherError::TagWidth { tag_bits, max });
    }
    if data.len() % nb != 0 {
        return Err(CipherError::PartialBlock {
            got: data.len(),
            block: nb,
        });
    }
    let mut state = vec![0u8; nb];
    for block in data.chunks_exact(nb) {
        for (s, b) in state.iter_mut().zip(block) {
            *s ^= b;
        }
        cipher.encrypt_block(&mut state);
    }
    Ok(BitString::from_bytes(&state).slice(0, tag_bits))
}

/// Fixed 16-bit-block keyed substitution-permutation network.
///
/// Four rounds of key mixing, a 4-bit s-box layer and a bit transpose,
/// with a final whitening key. Small enough that every property can be
/// checked over the full block space.
pub struct ToyCipher {
    round_keys: [u16; 5],
}

const TOY_SBOX: [u8; 16] = [
    0xc, 0x5, 0x6, 0xb, 0x9, 0x0, 0xa, 0xd, 0x3, 0xe, 0xf, 0x8, 0x4, 0x7, 0x1, 0x2,
];
const TOY_SBOX_INV: [u8; 16] = [
    0x5, 0xe, 0xf, 0x8, 0xc, 0x1, 0x2, 0xd, 0xb, 0x4, 0x6, 0x3, 0x0, 0x7, 0x9, 0xa,
];

impl ToyCipher {
    pub fn new(key: u16) -> Self {
        let mut round_keys = [0u16; 5];
        for (r, rk) in round_keys.iter_mut().enumerate() {
            *rk = key.rotate_left(3 * r as u32) ^ 0x9e37u16.wrapping_mul(r as u16 + 1);
        }
        ToyCipher { round_keys }
    }

    fn sub(state: u16, table: &[u8; 16]) -> u16 {
        let mut out = 0u16;
        for i in 0..4 {
            let nib = (state >> (12 - 4 * i)) & 0xf;
            out = (out << 4) | u16::from(table[nib as usize]);
        }
        out
    }

    // Transpose of the 4x4 bit matrix; its own inverse.
    fn permute(state: u16) -> u16 {
        let mut out = 0u16;
        for i in 0..16 {
            if state & (1 << (15 - i)) != 0 {
                let j = (i % 4) * 4 + i / 4;
                out |= 1 << (15 - j);
            }
        }
        out
    }

    pub fn encrypt_block(&self, block: &mut [u8]) {
        assert_eq!(block.len(), 2);
        let mut state = u16::from_be_bytes([block[0], block[1]]);
        state ^= self.round_keys[0];
        for r in 1..=3 {
            state = Self::sub(state, &TOY_SBOX);
            state = Self::permute(state);
            state ^= self.round_keys[r];
        }
        state = Self::sub(state, &TOY_SBOX);
        state ^= self.round_keys[4];
        block.copy_from_slice(&state.to_be_bytes());
    }

    pub fn decrypt_block(&self, block: &mut [u8]) {
        assert_eq!(block.len(), 2);
        let mut state = u16::from_be_bytes([block[0], block[1]]);
        state ^= self.round_keys[4];
        state = Self::sub(state, &TOY_SBOX_INV);
        for r in (1..=3).rev() {
            state ^= self.round_keys[r];
            state = Self::permute(state);
            state = Self::sub(state, &TOY_SBOX_INV);
        }
        state ^= self.round_keys[0];
        block.copy_from_slice(&state.to_be_bytes());
    }
}
