//! Packed bit vectors over GF(2).

use std::fmt;

/// Bit sequence packed into 64-bit words, bit `i` stored at word `i / 64`,
/// position `i % 64`. Bits past `len` in the last word are always zero.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitVec {
    words: Vec<u64>,
    len: usize,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { words: vec![0; len.div_ceil(64)], len }
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut v = BitVec::zeros(0);
        for b in bits {
            v.push(b);
        }
        v
    }

    /// Parses a string of `0`/`1` characters; whitespace is ignored.
    pub fn from_str01(s: &str) -> Option<Self> {
        let mut v = BitVec::zeros(0);
        for ch in s.chars().filter(|c| !c.is_whitespace()) {
            match ch {
                '0' => v.push(false),
                '1' => v.push(true),
                _ => return None,
            }
        }
        Some(v)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn push(&mut self, value: bool) {
        if self.len % 64 == 0 {
            self.words.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, value);
    }

    pub fn extend_from(&mut self, other: &BitVec) {
        for i in 0..other.len {
            self.push(other.get(i));
        }
    }

    /// Copy of bits `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> BitVec {
        assert!(start <= end && end <= self.len);
        BitVec::from_bits((start..end).map(|i| self.get(i)))
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVec) -> bool {
        assert_eq!(self.len, other.len);
        let ones: u32 = self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum();
        ones & 1 == 1
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        assert_eq!(self.len, other.len);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn xor(&self, other: &BitVec) -> BitVec {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Number of positions where `self` and `other` differ.
    pub fn hamming(&self, other: &BitVec) -> usize {
        assert_eq!(self.len, other.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// MSB-first packing into bytes (bit 0 of the sequence is the top bit of
    /// byte 0); the final byte is zero-padded.
    pub fn to_bytes_msb(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.len.div_ceil(8)];
        for i in 0..self.len {
            if self.get(i) {
                out[i / 8] |= 0x80 >> (i % 8);
            }
        }
        out
    }

    pub fn from_bytes_msb(bytes: &[u8], len: usize) -> Option<BitVec> {
        if len > bytes.len() * 8 {
            return None;
        }
        Some(BitVec::from_bits(
            (0..len).map(|i| bytes[i / 8] & (0x80 >> (i % 8)) != 0),
        ))
    }
}

impl fmt::Debug for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVec({self})")
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Dense GF(2) matrix stored as packed rows.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BitMatrix {
    rows: Vec<BitVec>,
    cols: usize,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { rows: vec![BitVec::zeros(cols); rows], cols }
    }

    pub fn from_rows(rows: Vec<BitVec>) -> Self {
        let cols = rows.first().map_or(0, BitVec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        BitMatrix { rows, cols }
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    pub fn set(&mut self, r: usize, c: usize, v: bool) {
        self.rows[r].set(c, v)
    }

    pub fn row(&self, r: usize) -> &BitVec {
        &self.rows[r]
    }

    pub fn rows(&self) -> &[BitVec] {
        &self.rows
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [BitVec] {
        &mut self.rows
    }

    /// Matrix-vector product over GF(2).
    pub fn mul_vec(&self, v: &BitVec) -> BitVec {
        assert_eq!(v.len(), self.cols);
        BitVec::from_bits(self.rows.iter().map(|r| r.dot(v)))
    }

    /// Columns `start..end` as a new matrix.
    pub fn columns(&self, start: usize, end: usize) -> BitMatrix {
        BitMatrix::from_rows(self.rows.iter().map(|r| r.slice(start, end)).collect())
    }

    /// Rank over GF(2) (row reduction on a copy).
    pub fn rank(&self) -> usize {
        let mut rows = self.rows.clone();
        let mut rank = 0;
        for c in 0..self.cols {
            let Some(p) = (rank..rows.len()).find(|&r| rows[r].get(c)) else {
                continue;
            };
            rows.swap(rank, p);
            let pivot = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row.get(c) {
                    row.xor_assign(&pivot);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Vertical concatenation.
    pub fn stack(&self, other: &BitMatrix) -> BitMatrix {
        assert_eq!(self.cols, other.cols);
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        BitMatrix { rows, cols: self.cols }
    }

    pub fn to_u8_rows(&self) -> Vec<Vec<u8>> {
        self.rows.iter().map(|r| r.iter().map(u8::from).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_get_and_display() {
        let v = BitVec::from_str01("1100100").unwrap();
        assert_eq!(v.len(), 7);
        assert_eq!(v.to_string(), "1100100");
        assert_eq!(v.count_ones(), 3);
        assert!(BitVec::from_str01("10x").is_none());
    }

    #[test]
    fn dot_and_xor_across_word_boundary() {
        let a = BitVec::from_bits((0..130).map(|i| i % 3 == 0));
        let b = BitVec::from_bits((0..130).map(|i| i % 2 == 0));
        let expect = (0..130).filter(|i| i % 6 == 0).count() % 2 == 1;
        assert_eq!(a.dot(&b), expect);
        let x = a.xor(&b);
        for i in 0..130 {
            assert_eq!(x.get(i), (i % 3 == 0) ^ (i % 2 == 0));
        }
        assert_eq!(a.hamming(&b), x.count_ones());
    }

    #[test]
    fn msb_first_bytes() {
        let v = BitVec::from_str01("1010000011").unwrap();
        assert_eq!(v.to_bytes_msb(), vec![0b1010_0000, 0b1100_0000]);
        assert_eq!(BitVec::from_bytes_msb(&v.to_bytes_msb(), 10).unwrap(), v);
    }

    #[test]
    fn rank_of_identity_and_duplicate_rows() {
        let rows = vec![
            BitVec::from_str01("100").unwrap(),
            BitVec::from_str01("010").unwrap(),
            BitVec::from_str01("110").unwrap(),
        ];
        assert_eq!(BitMatrix::from_rows(rows).rank(), 2);
    }
}
