use std::fmt;

use super::CodecError;

/// An MSB-first bit string. Trailing bits of the last byte are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn with_capacity(bits: usize) -> Self {
        BitString {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    /// Wraps `bytes`, keeping only the first `len` bits. Bits past `len` are cleared.
    pub fn from_bytes(mut bytes: Vec<u8>, len: usize) -> Result<Self, CodecError> {
        if len > bytes.len() * 8 || bytes.len() != len.div_ceil(8) {
            return Err(CodecError::WrongLength {
                what: "bit string",
                expected: bytes.len() * 8,
                actual: len,
            });
        }
        let rem = len % 8;
        if rem != 0 {
            let last = bytes.len() - 1;
            bytes[last] &= 0xffu8 << (8 - rem);
        }
        Ok(BitString { bytes, len })
    }

    pub fn from_hex(hex_str: &str, len: usize) -> Result<Self, CodecError> {
        let bytes = hex::decode(hex_str.trim()).map_err(|e| CodecError::Hex(e.to_string()))?;
        Self::from_bytes(bytes, len)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Backing bytes, zero padded to a whole byte.
    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn bit(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index {index} out of range");
        self.bytes[index / 8] & (0x80 >> (index % 8)) != 0
    }

    pub fn flip(&mut self, index: usize) {
        assert!(index < self.len, "bit index {index} out of range");
        self.bytes[index / 8] ^= 0x80 >> (index % 8);
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn push_bits(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 64);
        for i in (0..width).rev() {
            let bit = (value >> i) & 1 == 1;
            self.push_bit(bit);
        }
    }

    pub fn push_bytes(&mut self, data: &[u8]) {
        let shift = self.len % 8;
        if shift == 0 {
            self.bytes.extend_from_slice(data);
        } else {
            self.bytes.reserve(data.len());
            for &b in data {
                let last = self.bytes.len() - 1;
                self.bytes[last] |= b >> shift;
                self.bytes.push(b << (8 - shift));
            }
        }
        self.len += data.len() * 8;
    }

    fn push_bit(&mut self, bit: bool) {
        if self.len.is_multiple_of(8) {
            self.bytes.push(0);
        }
        if bit {
            let last = self.bytes.len() - 1;
            self.bytes[last] |= 0x80 >> (self.len % 8);
        }
        self.len += 1;
    }

    pub fn reader(&self) -> BitReader<'_> {
        BitReader { bits: self, pos: 0 }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({} bits, {})", self.len, self.to_hex())
    }
}

pub struct BitReader<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl BitReader<'_> {
    pub fn remaining(&self) -> usize {
        self.bits.len - self.pos
    }

    pub fn read_bits(&mut self, width: u32) -> u64 {
        assert!(width as usize <= self.remaining(), "read past end of bit string");
        let mut v = 0u64;
        for _ in 0..width {
            v = (v << 1) | u64::from(self.bits.bit(self.pos));
            self.pos += 1;
        }
        v
    }

    pub fn read_bytes<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        if self.pos.is_multiple_of(8) {
            let start = self.pos / 8;
            assert!(N * 8 <= self.remaining(), "read past end of bit string");
            out.copy_from_slice(&self.bits.bytes[start..start + N]);
            self.pos += N * 8;
        } else {
            assert!(N * 8 <= self.remaining(), "read past end of bit string");
            let (start, shift) = (self.pos / 8, self.pos % 8);
            let bytes = &self.bits.bytes;
            for (i, b) in out.iter_mut().enumerate() {
                *b = (bytes[start + i] << shift) | (bytes[start + i + 1] >> (8 - shift));
            }
            self.pos += N * 8;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_packing() {
        let mut b = BitString::default();
        b.push_bits(0b1010, 4);
        b.push_bits(0xff, 8);
        assert_eq!(b.len(), 12);
        assert_eq!(b.as_bytes(), &[0b1010_1111, 0b1111_0000]);
        let mut r = b.reader();
        assert_eq!(r.read_bits(4), 0b1010);
        assert_eq!(r.read_bits(8), 0xff);
        assert_eq!(r.remaining(), 0);
    }

    #[test]
    fn unaligned_bytes_round_trip() {
        let mut b = BitString::default();
        b.push_bits(1, 3);
        b.push_bytes(&[0xde, 0xad, 0xbe, 0xef]);
        let mut r = b.reader();
        assert_eq!(r.read_bits(3), 1);
        assert_eq!(r.read_bytes::<4>(), [0xde, 0xad, 0xbe, 0xef]);
    }

    #[test]
    fn from_bytes_clears_padding() {
        let b = BitString::from_bytes(vec![0xff, 0xff], 12).unwrap();
        assert_eq!(b.as_bytes(), &[0xff, 0xf0]);
        assert!(BitString::from_bytes(vec![0xff], 12).is_err());
    }
}
