//! Bit-exact sequences and fixed 128-bit blocks.
//!
//! Everything the rest of the crate manipulates (plaintexts, formatted
//! texts, ciphertexts, keystreams, tags) is a [`BitString`]. Bit 0 is the
//! most significant bit of the first byte, matching the big-endian
//! presentation used by network formats and published test vectors; hex
//! serialization follows the same convention. Strings need not be
//! byte-aligned. Unused low bits of the final byte are kept zero so that
//! equality and hashing stay well-defined.

use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Width of a [`Block`] in bytes.
pub const BLOCK_BYTES: usize = 16;
/// Width of a [`Block`] in bits.
pub const BLOCK_BITS: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitError {
    #[error("length mismatch: {0} vs {1} bits")]
    LengthMismatch(usize, usize),
    #[error("bit index {index} out of range for {len}-bit string")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("length {0} is not a multiple of {BLOCK_BITS} bits")]
    NotBlockAligned(usize),
    #[error("invalid hex string")]
    InvalidHex,
    #[error("declared bit length {bits} does not fit {hex_bits} hex-encoded bits")]
    LengthExceedsHex { bits: usize, hex_bits: usize },
    #[error("expected {BLOCK_BITS} bits, got {0}")]
    NotABlock(usize),
}

/// An immutable-by-convention sequence of bits of arbitrary length.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn empty() -> Self {
        Self::default()
    }

    /// All-zero string of `len` bits.
    pub fn zeros(len: usize) -> Self {
        BitString {
            bytes: vec![0u8; len.div_ceil(8)],
            len,
        }
    }

    /// Takes ownership of whole bytes; the result is byte-aligned.
    pub fn from_bytes(bytes: &[u8]) -> Self {
        BitString {
            bytes: bytes.to_vec(),
            len: bytes.len() * 8,
        }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut s = BitString::empty();
        for b in bits {
            s.push_bit(b);
        }
        s
    }

    /// Uniformly random string of `len` bits.
    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R, len: usize) -> Self {
        let mut bytes = vec![0u8; len.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let mut s = BitString { bytes, len };
        s.clear_tail();
        s
    }

    /// Parses lowercase or uppercase hex into a byte-aligned string.
    pub fn from_hex(hex_str: &str) -> Result<Self, BitError> {
        let bytes = hex::decode(hex_str).map_err(|_| BitError::InvalidHex)?;
        Ok(Self::from_bytes(&bytes))
    }

    /// Parses hex carrying `bits` significant bits (the serialized form of
    /// non-byte-aligned strings: hex padded with zero bits at the tail).
    pub fn from_hex_with_len(hex_str: &str, bits: usize) -> Result<Self, BitError> {
        let bytes = hex::decode(hex_str).map_err(|_| BitError::InvalidHex)?;
        if bits > bytes.len() * 8 {
            return Err(BitError::LengthExceedsHex {
                bits,
                hex_bits: bytes.len() * 8,
            });
        }
        if bytes.len() > bits.div_ceil(8) {
            return Err(BitError::LengthExceedsHex {
                bits,
                hex_bits: bytes.len() * 8,
            });
        }
        let mut s = BitString { bytes, len: bits };
        s.clear_tail();
        Ok(s)
    }

    /// Lowercase hex of the backing bytes; for non-byte-aligned strings the
    /// tail is zero-padded to the byte boundary.
    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Whole bytes backing the string, tail zero-padded.
    pub fn as_raw_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// The bytes of a byte-aligned string, or `None` when the length is not
    /// a multiple of 8.
    pub fn to_bytes(&self) -> Option<Vec<u8>> {
        (self.len % 8 == 0).then(|| self.bytes.clone())
    }

    /// Panics when `index >= len`, like slice indexing.
    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range ({})", self.len);
        self.bytes[index / 8] >> (7 - index % 8) & 1 == 1
    }

    pub fn set_bit(&mut self, index: usize, value: bool) {
        assert!(index < self.len, "bit index {index} out of range ({})", self.len);
        let mask = 1u8 << (7 - index % 8);
        if value {
            self.bytes[index / 8] |= mask;
        } else {
            self.bytes[index / 8] &= !mask;
        }
    }

    pub fn push_bit(&mut self, value: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        self.len += 1;
        self.set_bit(self.len - 1, value);
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.bit(i))
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &BitString) -> BitString {
        if self.len % 8 == 0 {
            let mut bytes = self.bytes.clone();
            bytes.extend_from_slice(&other.bytes);
            return BitString {
                bytes,
                len: self.len + other.len,
            };
        }
        let mut s = self.clone();
        for b in other.iter_bits() {
            s.push_bit(b);
        }
        s
    }

    /// Bits `start..end` as a new string. Panics on a bad range.
    pub fn slice(&self, start: usize, end: usize) -> BitString {
        assert!(start <= end && end <= self.len, "slice {start}..{end} out of range ({})", self.len);
        if start % 8 == 0 {
            let mut s = BitString {
                bytes: self.bytes[start / 8..(end.div_ceil(8)).min(self.bytes.len())].to_vec(),
                len: end - start,
            };
            s.clear_tail();
            return s;
        }
        BitString::from_bits((start..end).map(|i| self.bit(i)))
    }

    /// Bitwise XOR of two equal-length strings.
    pub fn xor(&self, other: &BitString) -> Result<BitString, BitError> {
        if self.len != other.len {
            return Err(BitError::LengthMismatch(self.len, other.len));
        }
        let bytes = self
            .bytes
            .iter()
            .zip(&other.bytes)
            .map(|(a, b)| a ^ b)
            .collect();
        Ok(BitString {
            bytes,
            len: self.len,
        })
    }

    /// Returns a copy differing from `self` exactly at `positions`.
    pub fn flip_bits(&self, positions: &[usize]) -> Result<BitString, BitError> {
        let mut s = self.clone();
        for &i in positions {
            if i >= self.len {
                return Err(BitError::IndexOutOfRange {
                    index: i,
                    len: self.len,
                });
            }
            let v = s.bit(i);
            s.set_bit(i, !v);
        }
        Ok(s)
    }

    /// Indicator string: `len` bits, ones exactly at `positions`.
    pub fn indicator(len: usize, positions: &[usize]) -> Result<BitString, BitError> {
        BitString::zeros(len).flip_bits(positions)
    }

    /// Splits a block-aligned string into 128-bit blocks.
    pub fn split_blocks(&self) -> Result<Vec<Block>, BitError> {
        if self.len % BLOCK_BITS != 0 {
            return Err(BitError::NotBlockAligned(self.len));
        }
        Ok(self
            .bytes
            .chunks_exact(BLOCK_BYTES)
            .map(|c| {
                let mut b = [0u8; BLOCK_BYTES];
                b.copy_from_slice(c);
                Block(b)
            })
            .collect())
    }

    /// Concatenates blocks back into a string; inverse of [`split_blocks`].
    ///
    /// [`split_blocks`]: BitString::split_blocks
    pub fn join_blocks(blocks: &[Block]) -> BitString {
        let mut bytes = Vec::with_capacity(blocks.len() * BLOCK_BYTES);
        for b in blocks {
            bytes.extend_from_slice(&b.0);
        }
        BitString {
            bytes,
            len: blocks.len() * BLOCK_BITS,
        }
    }

    /// 128-bit big-endian encoding of `value`.
    pub fn from_u128_be(value: u128) -> BitString {
        BitString::from_bytes(&value.to_be_bytes())
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= !(0xffu8 >> rem);
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({} bits, {})", self.len, self.to_hex())
    }
}

impl Serialize for BitString {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("BitString", 2)?;
        use serde::ser::SerializeStruct;
        st.serialize_field("hex", &self.to_hex())?;
        st.serialize_field("bits", &self.len)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            hex: String,
            bits: usize,
        }
        let r = Repr::deserialize(deserializer)?;
        BitString::from_hex_with_len(&r.hex, r.bits).map_err(D::Error::custom)
    }
}

/// A fixed 128-bit block, the width of the underlying cipher.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Block(pub(crate) [u8; BLOCK_BYTES]);

impl Block {
    pub fn new(bytes: [u8; BLOCK_BYTES]) -> Self {
        Block(bytes)
    }

    pub fn zero() -> Self {
        Block([0u8; BLOCK_BYTES])
    }

    pub fn random<R: rand::Rng + ?Sized>(rng: &mut R) -> Self {
        let mut b = [0u8; BLOCK_BYTES];
        rng.fill_bytes(&mut b);
        Block(b)
    }

    pub fn as_bytes(&self) -> &[u8; BLOCK_BYTES] {
        &self.0
    }

    pub fn xor(&self, other: &Block) -> Block {
        let mut out = [0u8; BLOCK_BYTES];
        for i in 0..BLOCK_BYTES {
            out[i] = self.0[i] ^ other.0[i];
        }
        Block(out)
    }

    pub fn from_bit_string(s: &BitString) -> Result<Block, BitError> {
        if s.len() != BLOCK_BITS {
            return Err(BitError::NotABlock(s.len()));
        }
        let mut b = [0u8; BLOCK_BYTES];
        b.copy_from_slice(s.as_raw_bytes());
        Ok(Block(b))
    }

    pub fn to_bit_string(&self) -> BitString {
        BitString::from_bytes(&self.0)
    }

    pub fn from_hex(hex_str: &str) -> Result<Block, BitError> {
        let s = BitString::from_hex(hex_str)?;
        Block::from_bit_string(&s)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Value of the block as a big-endian 128-bit integer.
    pub fn as_u128_be(&self) -> u128 {
        u128::from_be_bytes(self.0)
    }
}

impl fmt::Debug for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Block({})", self.to_hex())
    }
}

impl Serialize for Block {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Block {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Block::from_hex(&s).map_err(D::Error::custom)
    }
}
