//! Toeplitz mask coding over GF(2).
//!
//! A seed `s` of `k + n − 1` bits defines a `k × n` Toeplitz matrix. Row
//! reduction (row operations only, pivots restricted to the rightmost `k`
//! columns) brings it to the systematic form `[A | I_k]`. A `k`-bit message
//! `m` is hidden in an `n`-bit frame with fresh redundancy `R`:
//!
//! ```text
//! M = [ R ‖ m ⊕ A·R ]        m = [A | I]·M
//! ```
//!
//! Because both ends derive `[A | I]` from `s` alone, the receiver needs only
//! the seed record to decode.

use crate::gf2::{BitMatrix, BitVec};
use crate::rng::{Purpose, RngSeed, SimRng};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("invalid codec dimensions k={k}, n={n} (need 0 < k < n)")]
    InvalidDimensions { k: usize, n: usize },
    #[error("seed has {got} bits, expected k + n - 1 = {expected}")]
    SeedLength { expected: usize, got: usize },
    #[error("rightmost {k}x{k} block of the Toeplitz matrix is singular; resample the seed")]
    SeedDegenerate { k: usize },
    #[error("{what}: expected {expected} bits, got {got}")]
    LengthMismatch { what: &'static str, expected: usize, got: usize },
    #[error("malformed seed record: {0}")]
    BadRecord(String),
}

/// Seed bits plus the code dimensions they parameterise.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToeplitzSeed {
    bits: BitVec,
    k: usize,
    n: usize,
}

impl ToeplitzSeed {
    pub fn new(bits: BitVec, k: usize, n: usize) -> Result<Self, CodecError> {
        if k == 0 || k >= n {
            return Err(CodecError::InvalidDimensions { k, n });
        }
        if bits.len() != k + n - 1 {
            return Err(CodecError::SeedLength { expected: k + n - 1, got: bits.len() });
        }
        Ok(ToeplitzSeed { bits, k, n })
    }

    pub fn random<R: Rng + ?Sized>(k: usize, n: usize, rng: &mut R) -> Result<Self, CodecError> {
        if k == 0 || k >= n {
            return Err(CodecError::InvalidDimensions { k, n });
        }
        let bits = BitVec::from_bits((0..k + n - 1).map(|_| rng.random::<bool>()));
        Self::new(bits, k, n)
    }

    pub fn bits(&self) -> &BitVec {
        &self.bits
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

/// Row-reduced Toeplitz hash, immutable after construction.
#[derive(Clone, Debug)]
pub struct MaskCodec {
    seed: ToeplitzSeed,
    toeplitz: BitMatrix,
    systematic: BitMatrix,
    a_sub: BitMatrix,
}

/// Masked frame `[R ‖ m ⊕ A·R]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskFrame {
    pub redundancy: BitVec,
    pub payload: BitVec,
}

impl MaskFrame {
    /// The full `n`-bit masked sequence.
    pub fn masked(&self) -> BitVec {
        let mut m = self.redundancy.clone();
        m.extend_from(&self.payload);
        m
    }
}

/// Toeplitz matrix of a seed.
///
/// Row 0 is `s[0..n]`; each later row is the previous one shifted right with
/// the vacated left cell taken from the tail of the seed, walking backwards:
/// `T[i][j] = s[j − i]` for `j ≥ i`, and `s[n + k − 1 − (i − j)]` otherwise.
pub fn toeplitz_matrix(seed: &ToeplitzSeed) -> BitMatrix {
    let (k, n) = (seed.k, seed.n);
    let s = &seed.bits;
    let mut t = BitMatrix::zeros(k, n);
    for i in 0..k {
        for j in 0..n {
            let bit = if j >= i { s.get(j - i) } else { s.get(n + k - 1 - (i - j)) };
            t.set(i, j, bit);
        }
    }
    t
}

/// Gauss-Jordan elimination pivoting on columns `n−k .. n` in order, using row
/// swaps and row additions only.
fn systematic_form(toeplitz: &BitMatrix) -> Result<BitMatrix, CodecError> {
    let k = toeplitz.n_rows();
    let n = toeplitz.n_cols();
    let mut m = toeplitz.clone();
    let rows = m.rows_mut();
    for i in 0..k {
        let col = n - k + i;
        let pivot = (i..k).find(|&r| rows[r].get(col)).ok_or(CodecError::SeedDegenerate { k })?;
        rows.swap(i, pivot);
        let pivot_row = rows[i].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != i && row.get(col) {
                row.xor_assign(&pivot_row);
            }
        }
    }
    Ok(m)
}

impl MaskCodec {
    pub fn build(seed: ToeplitzSeed) -> Result<Self, CodecError> {
        let toeplitz = toeplitz_matrix(&seed);
        let systematic = systematic_form(&toeplitz)?;
        let a_sub = systematic.columns(0, seed.n - seed.k);
        Ok(MaskCodec { seed, toeplitz, systematic, a_sub })
    }

    pub fn k(&self) -> usize {
        self.seed.k
    }

    pub fn n(&self) -> usize {
        self.seed.n
    }

    pub fn seed(&self) -> &ToeplitzSeed {
        &self.seed
    }

    pub fn toeplitz(&self) -> &BitMatrix {
        &self.toeplitz
    }

    pub fn systematic(&self) -> &BitMatrix {
        &self.systematic
    }

    pub fn a_sub(&self) -> &BitMatrix {
        &self.a_sub
    }

    pub fn encode(&self, message: &BitVec, redundancy: &BitVec) -> Result<MaskFrame, CodecError> {
        check_len("message", self.k(), message)?;
        check_len("redundancy", self.n() - self.k(), redundancy)?;
        // GF(2): m − A·R = m ⊕ A·R.
        let payload = message.xor(&self.a_sub.mul_vec(redundancy));
        Ok(MaskFrame { redundancy: redundancy.clone(), payload })
    }

    /// Encode with redundancy drawn from `rng`.
    pub fn encode_random<R: Rng + ?Sized>(
        &self,
        message: &BitVec,
        rng: &mut R,
    ) -> Result<MaskFrame, CodecError> {
        let r = BitVec::from_bits((0..self.n() - self.k()).map(|_| rng.random::<bool>()));
        self.encode(message, &r)
    }

    pub fn decode(&self, masked: &BitVec) -> Result<BitVec, CodecError> {
        check_len("masked sequence", self.n(), masked)?;
        Ok(self.systematic.mul_vec(masked))
    }
}

fn check_len(what: &'static str, expected: usize, v: &BitVec) -> Result<(), CodecError> {
    if v.len() == expected {
        Ok(())
    } else {
        Err(CodecError::LengthMismatch { what, expected, got: v.len() })
    }
}

/// Draws seeds until one yields an invertible pivot block. Returns the codec
/// and the number of draws used.
pub fn build_random_codec<R: Rng + ?Sized>(
    k: usize,
    n: usize,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(MaskCodec, usize), CodecError> {
    let mut last = CodecError::SeedDegenerate { k };
    for attempt in 1..=max_attempts {
        match MaskCodec::build(ToeplitzSeed::random(k, n, rng)?) {
            Ok(c) => return Ok((c, attempt)),
            Err(e @ CodecError::SeedDegenerate { .. }) => last = e,
            Err(e) => return Err(e),
        }
    }
    Err(last)
}

/// Source of the XOR whitening keystream used to balance masked sequences.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Whitener {
    Seeded(RngSeed),
    /// All-zero keystream; balancing becomes the identity.
    Zero,
}

impl Whitener {
    /// Keystream generator positioned at bit 0.
    pub fn keystream(&self) -> Keystream {
        match *self {
            Whitener::Seeded(seed) => Keystream::Seeded {
                rng: Box::new(seed.stream(Purpose::Whitener, 0)),
                word: 0,
                left: 0,
            },
            Whitener::Zero => Keystream::Zero,
        }
    }
}

/// Stateful whitening keystream; consecutive calls continue the stream.
pub enum Keystream {
    Seeded { rng: Box<SimRng>, word: u64, left: u32 },
    Zero,
}

impl Keystream {
    pub fn next_bit(&mut self) -> bool {
        match self {
            Keystream::Zero => false,
            Keystream::Seeded { rng, word, left } => {
                if *left == 0 {
                    *word = rng.random();
                    *left = 64;
                }
                let b = *word & 1 == 1;
                *word >>= 1;
                *left -= 1;
                b
            }
        }
    }

    /// XORs the next `bits.len()` keystream bits into `bits`.
    pub fn apply(&mut self, bits: &BitVec) -> BitVec {
        BitVec::from_bits(bits.iter().map(|b| b ^ self.next_bit()))
    }
}

/// Balances a masked sequence by XOR with the whitener keystream.
pub fn balance(masked: &BitVec, whitener: Whitener) -> BitVec {
    whitener.keystream().apply(masked)
}

/// Inverse of [`balance`].
pub fn unbalance(balanced: &BitVec, whitener: Whitener) -> BitVec {
    whitener.keystream().apply(balanced)
}

/// Seed announcement exchanged over the authenticated classical channel.
/// `seed_bits_hex` holds the seed bits packed MSB-first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecSeedRecord {
    pub k: usize,
    pub n: usize,
    pub seed_bits_hex: String,
    pub whitener_seed: u64,
}

impl CodecSeedRecord {
    pub fn new(seed: &ToeplitzSeed, whitener_seed: u64) -> Self {
        let hex: String = seed.bits.to_bytes_msb().iter().map(|b| format!("{b:02x}")).collect();
        CodecSeedRecord { k: seed.k, n: seed.n, seed_bits_hex: hex, whitener_seed }
    }

    pub fn seed(&self) -> Result<ToeplitzSeed, CodecError> {
        let h = &self.seed_bits_hex;
        if h.len() % 2 != 0 || !h.chars().all(|c| c.is_ascii_hexdigit()) {
            return Err(CodecError::BadRecord(format!("seed_bits_hex is not hex: {h:?}")));
        }
        let bytes: Vec<u8> = (0..h.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&h[i..i + 2], 16).expect("validated hex"))
            .collect();
        let len = (self.k + self.n).checked_sub(1).ok_or(CodecError::InvalidDimensions {
            k: self.k,
            n: self.n,
        })?;
        if bytes.len() != len.div_ceil(8) {
            return Err(CodecError::BadRecord(format!(
                "seed_bits_hex has {} bytes, expected {}",
                bytes.len(),
                len.div_ceil(8)
            )));
        }
        let bits = BitVec::from_bytes_msb(&bytes, len)
            .ok_or_else(|| CodecError::BadRecord("seed too short".into()))?;
        ToeplitzSeed::new(bits, self.k, self.n)
    }

    pub fn whitener(&self) -> Whitener {
        Whitener::Seeded(RngSeed(self.whitener_seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn bv(s: &str) -> BitVec {
        BitVec::from_str01(s).unwrap()
    }

    fn worked_example() -> MaskCodec {
        MaskCodec::build(ToeplitzSeed::new(bv("1100100"), 3, 5).unwrap()).unwrap()
    }

    #[test]
    fn worked_example_matrices() {
        let c = worked_example();
        assert_eq!(
            c.toeplitz().to_u8_rows(),
            vec![vec![1, 1, 0, 0, 1], vec![0, 1, 1, 0, 0], vec![0, 0, 1, 1, 0]]
        );
        assert_eq!(
            c.systematic().to_u8_rows(),
            vec![vec![0, 1, 1, 0, 0], vec![0, 1, 0, 1, 0], vec![1, 1, 0, 0, 1]]
        );
        assert_eq!(c.a_sub().to_u8_rows(), vec![vec![0, 1], vec![0, 1], vec![1, 1]]);
    }

    #[test]
    fn worked_example_encode_decode() {
        let c = worked_example();
        let frame = c.encode(&bv("001"), &bv("10")).unwrap();
        assert_eq!(frame.masked(), bv("10000"));
        assert_eq!(c.decode(&bv("10000")).unwrap(), bv("001"));
    }

    #[test]
    fn zero_message_zero_redundancy() {
        let c = worked_example();
        assert_eq!(c.encode(&bv("000"), &bv("00")).unwrap().masked(), bv("00000"));
        assert_eq!(c.decode(&bv("00000")).unwrap(), bv("000"));
    }

    #[test]
    fn singular_pivot_block() {
        let r = MaskCodec::build(ToeplitzSeed::new(bv("10"), 1, 2).unwrap());
        assert_eq!(r.unwrap_err(), CodecError::SeedDegenerate { k: 1 });
    }

    #[test]
    fn malformed_inputs() {
        assert!(matches!(ToeplitzSeed::new(bv("101"), 2, 2), Err(CodecError::InvalidDimensions { .. })));
        assert!(matches!(ToeplitzSeed::new(bv("101"), 2, 3), Err(CodecError::SeedLength { .. })));
        let c = worked_example();
        assert!(matches!(c.encode(&bv("01"), &bv("10")), Err(CodecError::LengthMismatch { .. })));
        assert!(matches!(c.encode(&bv("001"), &bv("1")), Err(CodecError::LengthMismatch { .. })));
        assert!(matches!(c.decode(&bv("1000")), Err(CodecError::LengthMismatch { .. })));
    }

    #[test]
    fn structural_invariants_on_random_seeds() {
        let mut rng = RngSeed(11).stream(Purpose::Test, 0);
        let mut built = 0;
        while built < 50 {
            let (k, n) = (rng.random_range(1..20), rng.random_range(21..40));
            let Ok(c) = MaskCodec::build(ToeplitzSeed::random(k, n, &mut rng).unwrap()) else {
                continue;
            };
            built += 1;
            let t = c.toeplitz();
            for i in 1..k {
                for j in 1..n {
                    assert_eq!(t.get(i, j), t.get(i - 1, j - 1));
                }
            }
            let s = c.systematic();
            for i in 0..k {
                for j in 0..k {
                    assert_eq!(s.get(i, n - k + j), i == j);
                }
            }
            // Same row space: each has full rank k and stacking adds nothing.
            assert_eq!(t.rank(), k);
            assert_eq!(s.rank(), k);
            assert_eq!(t.stack(s).rank(), k);
        }
    }

    #[test]
    fn whitening_round_trip_and_zero_hook() {
        let mut rng = RngSeed(12).stream(Purpose::Test, 0);
        let x = BitVec::from_bits((0..1310).map(|_| rng.random::<bool>()));
        let w = Whitener::Seeded(RngSeed(77));
        assert_ne!(balance(&x, w), x);
        assert_eq!(unbalance(&balance(&x, w), w), x);
        assert_eq!(balance(&x, Whitener::Zero), x);
    }

    #[test]
    fn whitening_balances_constant_input() {
        let ones = BitVec::from_bits(std::iter::repeat_n(true, 10_000));
        let out = balance(&ones, Whitener::Seeded(RngSeed(5)));
        let frac = out.count_ones() as f64 / 10_000.0;
        assert!((0.485..=0.515).contains(&frac), "{frac}");
    }

    #[test]
    fn seed_record_round_trip() {
        let seed = ToeplitzSeed::new(bv("1100100"), 3, 5).unwrap();
        let rec = CodecSeedRecord::new(&seed, 9);
        assert_eq!(rec.seed_bits_hex, "c8");
        assert_eq!(rec.seed().unwrap(), seed);
        let bad = CodecSeedRecord { seed_bits_hex: "zz".into(), ..rec.clone() };
        assert!(bad.seed().is_err());
        let short = CodecSeedRecord { n: 40, ..rec };
        assert!(short.seed().is_err());
    }

    proptest::proptest! {
        #[test]
        fn encode_is_affine(seed in 0u64..1000, k in 1usize..12, extra in 1usize..12) {
            let n = k + extra;
            let mut rng = RngSeed(seed).stream(Purpose::Test, 1);
            let Ok(c) = MaskCodec::build(ToeplitzSeed::random(k, n, &mut rng).unwrap()) else {
                return Ok(());
            };
            let rand_bits = |len: usize, rng: &mut SimRng| BitVec::from_bits((0..len).map(|_| rng.random::<bool>()));
            let (m1, m2) = (rand_bits(k, &mut rng), rand_bits(k, &mut rng));
            let (r1, r2) = (rand_bits(n - k, &mut rng), rand_bits(n - k, &mut rng));
            let lhs = c.encode(&m1.xor(&m2), &r1.xor(&r2)).unwrap().masked();
            let rhs = c.encode(&m1, &r1).unwrap().masked().xor(&c.encode(&m2, &r2).unwrap().masked());
            proptest::prop_assert_eq!(lhs, rhs);
            let frame = c.encode(&m1, &r1).unwrap();
            proptest::prop_assert_eq!(c.decode(&frame.masked()).unwrap(), m1);
        }
    }
}
