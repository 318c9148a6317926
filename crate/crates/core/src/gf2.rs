//! Bit-packed linear algebra over GF(2).
//!
//! Vectors and matrix rows are stored as `u64` words, LSB-first: bit `i`
//! lives at `words[i / 64] >> (i % 64)`. Bits at positions `>= len` are
//! always zero, so word-level equality and popcounts are exact.

use std::fmt;

use rand::Rng;
use thiserror::Error;

const WORD_BITS: usize = 64;

#[inline]
fn word_count(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
fn tail_mask(bits: usize) -> u64 {
    match bits % WORD_BITS {
        0 => u64::MAX,
        r => (1u64 << r) - 1,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Gf2Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("Bernoulli probability must lie strictly between 0 and 1, got {0}")]
    InvalidProbability(f64),
    #[error("invalid bit string: {0}")]
    Parse(String),
}

/// A vector over GF(2).
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; word_count(len)],
        }
    }

    /// The `j`-th standard basis vector of length `len`.
    pub fn unit(len: usize, j: usize) -> Self {
        let mut v = Self::zeros(len);
        v.set(j, true);
        v
    }

    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Self {
        let mut words = Vec::new();
        let mut len = 0;
        for bit in bits {
            if len % WORD_BITS == 0 {
                words.push(0);
            }
            if bit {
                words[len / WORD_BITS] |= 1 << (len % WORD_BITS);
            }
            len += 1;
        }
        Self { len, words }
    }

    /// Builds a vector from raw words, clearing anything beyond `len`.
    pub fn from_words(len: usize, mut words: Vec<u64>) -> Self {
        words.resize(word_count(len), 0);
        if let Some(last) = words.last_mut() {
            *last &= tail_mask(len);
        }
        Self { len, words }
    }

    /// Parses a string of `0`/`1` characters; the first character is bit 0.
    pub fn parse(s: &str) -> Result<Self, Gf2Error> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Gf2Error::Parse(format!("unexpected character {other:?}"))),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Self::from_bits)
    }

    /// Reads `len` bits from `bytes`, LSB-first within each byte.
    pub fn from_bytes_lsb(len: usize, bytes: &[u8]) -> Self {
        let mut words = vec![0u64; word_count(len)];
        for (i, &b) in bytes.iter().take(len.div_ceil(8)).enumerate() {
            words[i / 8] |= u64::from(b) << (8 * (i % 8));
        }
        Self::from_words(len, words)
    }

    /// Writes the vector as `ceil(len / 8)` bytes, LSB-first within each byte.
    pub fn to_bytes_lsb(&self) -> Vec<u8> {
        (0..self.len.div_ceil(8))
            .map(|i| (self.words[i / 8] >> (8 * (i % 8))) as u8)
            .collect()
    }

    pub fn random_uniform<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let words = (0..word_count(len)).map(|_| rng.next_u64()).collect();
        Self::from_words(len, words)
    }

    pub fn random_bernoulli<R: Rng + ?Sized>(len: usize, density: Density, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            if density.sample(rng) {
                v.words[i / WORD_BITS] |= 1 << (i % WORD_BITS);
            }
        }
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        let mask = 1u64 << (i % WORD_BITS);
        if value {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    #[inline]
    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for length {}", self.len);
        self.words[i / WORD_BITS] ^= 1 << (i % WORD_BITS);
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "xor of vectors with different lengths");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Inner product over GF(2).
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "inner product of vectors with different lengths");
        parity_and(&self.words, &other.words)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bitwise complement within `len`.
    pub fn complement(&self) -> Self {
        Self::from_words(self.len, self.words.iter().map(|w| !w).collect())
    }

    /// Indices of the set bits in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(wi * WORD_BITS + tz)
            })
        })
    }

    pub fn lowest_one(&self) -> Option<usize> {
        self.words
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(wi, w)| wi * WORD_BITS + w.trailing_zeros() as usize)
    }

    /// Concatenates `parts` in order.
    pub fn concat(parts: &[BitVector]) -> Self {
        Self::from_bits(parts.iter().flat_map(|p| (0..p.len).map(move |i| p.get(i))))
    }

    /// Copies bits `start..start + len`; positions beyond `self.len` read as zero.
    pub fn slice_padded(&self, start: usize, len: usize) -> Self {
        Self::from_bits((start..start + len).map(|i| i < self.len && self.get(i)))
    }
}

impl fmt::Display for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({self})")
    }
}

#[inline]
fn parity_and(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).fold(0u32, |acc, (x, y)| acc ^ (x & y).count_ones()) & 1 == 1
}

/// Per-bit Bernoulli parameter stored as a 32-bit fixed-point threshold.
///
/// A bit is one when a fresh `u32` draw is below the threshold, which keeps
/// sampling free of floating point and therefore reproducible everywhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Density {
    threshold: u64,
}

impl Density {
    const SCALE: u64 = 1 << 32;

    pub fn half() -> Self {
        Self { threshold: Self::SCALE / 2 }
    }

    pub fn from_probability(p: f64) -> Result<Self, Gf2Error> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Gf2Error::InvalidProbability(p));
        }
        let threshold = (p * Self::SCALE as f64).round() as u64;
        Ok(Self {
            threshold: threshold.clamp(1, Self::SCALE - 1),
        })
    }

    /// `num / den`, rounded down to the 32-bit grid.
    pub fn from_ratio(num: u32, den: u32) -> Result<Self, Gf2Error> {
        if den == 0 || num == 0 || num >= den {
            return Err(Gf2Error::InvalidProbability(if den == 0 {
                f64::NAN
            } else {
                f64::from(num) / f64::from(den)
            }));
        }
        let threshold = (u64::from(num) << 32) / u64::from(den);
        Ok(Self { threshold: threshold.max(1) })
    }

    pub fn probability(&self) -> f64 {
        self.threshold as f64 / Self::SCALE as f64
    }

    pub fn is_half(&self) -> bool {
        self.threshold == Self::SCALE / 2
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        u64::from(rng.next_u32()) < self.threshold
    }
}

/// Entry distribution for [`random_matrix`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ensemble {
    Uniform,
    Bernoulli(Density),
}

impl Ensemble {
    pub fn bernoulli(p: f64) -> Result<Self, Gf2Error> {
        Density::from_probability(p).map(Ensemble::Bernoulli)
    }
}

/// Dense GF(2) matrix with rows stored contiguously.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = word_count(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    /// Stacks `rows`, which must all have length `cols`.
    pub fn from_rows(cols: usize, rows: &[BitVector]) -> Result<Self, Gf2Error> {
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Gf2Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            m.row_words_mut(i).copy_from_slice(row.words());
        }
        Ok(m)
    }

    /// Parses one `0`/`1` string per row.
    pub fn parse(rows: &[&str]) -> Result<Self, Gf2Error> {
        let rows: Vec<BitVector> = rows.iter().map(|r| BitVector::parse(r)).collect::<Result<_, _>>()?;
        let cols = rows.first().map_or(0, BitVector::len);
        Self::from_rows(cols, &rows)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.data[i * self.stride..(i + 1) * self.stride]
    }

    #[inline]
    pub fn row_words_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i * self.stride..(i + 1) * self.stride]
    }

    pub fn row(&self, i: usize) -> BitVector {
        BitVector::from_words(self.cols, self.row_words(i).to_vec())
    }

    pub fn row_vectors(&self) -> Vec<BitVector> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(j < self.cols);
        (self.row_words(i)[j / WORD_BITS] >> (j % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(j < self.cols);
        let w = &mut self.row_words_mut(i)[j / WORD_BITS];
        let mask = 1u64 << (j % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    pub fn column(&self, j: usize) -> BitVector {
        BitVector::from_bits((0..self.rows).map(|i| self.get(i, j)))
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in BitVector::from_words(self.cols, self.row_words(i).to_vec()).iter_ones() {
                t.set(j, i, true);
            }
        }
        t
    }

    /// The rows listed in `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut m = Self::zeros(indices.len(), self.cols);
        for (dst, &src) in indices.iter().enumerate() {
            m.row_words_mut(dst).copy_from_slice(self.row_words(src));
        }
        m
    }

    /// `A * x`: bit `i` of the result is the inner product of row `i` with `x`.
    pub fn mul_vec(&self, x: &BitVector) -> Result<BitVector, Gf2Error> {
        if x.len() != self.cols {
            return Err(Gf2Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok(BitVector::from_bits(
            (0..self.rows).map(|i| parity_and(self.row_words(i), x.words())),
        ))
    }

    pub fn rank(&self) -> usize {
        rank(self)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let s = self.stride;
        let (head, tail) = self.data.split_at_mut(hi * s);
        head[lo * s..(lo + 1) * s].swap_with_slice(&mut tail[..s]);
    }

    /// `row[dst] ^= row[src]`, starting at word `from`.
    fn xor_row_into(&mut self, src: usize, dst: usize, from: usize) {
        debug_assert_ne!(src, dst);
        let s = self.stride;
        let (src_row, dst_row) = if src < dst {
            let (head, tail) = self.data.split_at_mut(dst * s);
            (&head[src * s..(src + 1) * s], &mut tail[..s])
        } else {
            let (head, tail) = self.data.split_at_mut(src * s);
            (&tail[..s], &mut head[dst * s..(dst + 1) * s])
        };
        for (d, v) in dst_row[from..].iter_mut().zip(&src_row[from..]) {
            *d ^= v;
        }
    }
}

impl fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMatrix {}x{}", self.rows, self.cols)?;
        for i in 0..self.rows {
            writeln!(f, "  {}", self.row(i))?;
        }
        Ok(())
    }
}

/// Dimension of the row space. Works on a copy; `m` is untouched.
pub fn rank(m: &BitMatrix) -> usize {
    let mut work = m.clone();
    let mut rank = 0;
    for col in 0..work.cols {
        if rank == work.rows {
            break;
        }
        let wi = col / WORD_BITS;
        let bit = 1u64 << (col % WORD_BITS);
        let Some(pivot) = (rank..work.rows).find(|&r| work.row_words(r)[wi] & bit != 0) else {
            continue;
        };
        work.swap_rows(rank, pivot);
        for r in rank + 1..work.rows {
            if work.row_words(r)[wi] & bit != 0 {
                work.xor_row_into(rank, r, wi);
            }
        }
        rank += 1;
    }
    rank
}

/// `coefficients * x = rhs`, one equation per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LinearSystem {
    coefficients: BitMatrix,
    rhs: BitVector,
}

impl LinearSystem {
    pub fn new(coefficients: BitMatrix, rhs: BitVector) -> Result<Self, Gf2Error> {
        if coefficients.rows() != rhs.len() {
            return Err(Gf2Error::DimensionMismatch {
                expected: coefficients.rows(),
                found: rhs.len(),
            });
        }
        Ok(Self { coefficients, rhs })
    }

    pub fn coefficients(&self) -> &BitMatrix {
        &self.coefficients
    }

    pub fn rhs(&self) -> &BitVector {
        &self.rhs
    }

    pub fn equations(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn unknowns(&self) -> usize {
        self.coefficients.cols()
    }

    /// The subsystem made of the rows in `indices`.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            coefficients: self.coefficients.select_rows(indices),
            rhs: BitVector::from_bits(indices.iter().map(|&i| self.rhs.get(i))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Solution {
    Unique(BitVector),
    NoSolution,
    Underdetermined,
}

impl Solution {
    pub fn unique(self) -> Option<BitVector> {
        match self {
            Solution::Unique(x) => Some(x),
            _ => None,
        }
    }
}

/// Reduced row echelon form of a coefficient matrix with any number of
/// right-hand sides carried along.
///
/// The right-hand sides are the columns of an `rows x rhs_count` matrix, so
/// one elimination serves every message block that shares the coefficients.
#[derive(Debug, Clone)]
pub struct RowReduction {
    coefficients: BitMatrix,
    rhs: BitMatrix,
    pivots: Vec<usize>,
}

impl RowReduction {
    pub fn new(mut coefficients: BitMatrix, mut rhs: BitMatrix) -> Result<Self, Gf2Error> {
        if coefficients.rows() != rhs.rows() {
            return Err(Gf2Error::DimensionMismatch {
                expected: coefficients.rows(),
                found: rhs.rows(),
            });
        }
        let mut pivots = Vec::new();
        let rows = coefficients.rows();
        for col in 0..coefficients.cols() {
            let r = pivots.len();
            if r == rows {
                break;
            }
            let wi = col / WORD_BITS;
            let bit = 1u64 << (col % WORD_BITS);
            let Some(p) = (r..rows).find(|&i| coefficients.row_words(i)[wi] & bit != 0) else {
                continue;
            };
            coefficients.swap_rows(r, p);
            rhs.swap_rows(r, p);
            for i in 0..rows {
                if i != r && coefficients.row_words(i)[wi] & bit != 0 {
                    coefficients.xor_row_into(r, i, wi);
                    rhs.xor_row_into(r, i, 0);
                }
            }
            pivots.push(col);
        }
        Ok(Self {
            coefficients,
            rhs,
            pivots,
        })
    }

    pub fn from_system(sys: &LinearSystem) -> Self {
        let mut rhs = BitMatrix::zeros(sys.equations(), 1);
        for i in sys.rhs.iter_ones() {
            rhs.set(i, 0, true);
        }
        Self::new(sys.coefficients.clone(), rhs).expect("system dimensions are checked at construction")
    }

    pub fn rank(&self) -> usize {
        self.pivots.len()
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Rows below the rank are zero in the coefficients; the system for
    /// right-hand side `col` is consistent iff they are zero there too.
    pub fn is_consistent(&self, col: usize) -> bool {
        (self.rank()..self.rhs.rows()).all(|i| !self.rhs.get(i, col))
    }

    pub fn solution(&self, col: usize) -> Solution {
        if !self.is_consistent(col) {
            return Solution::NoSolution;
        }
        if self.rank() < self.coefficients.cols() {
            return Solution::Underdetermined;
        }
        let mut x = BitVector::zeros(self.coefficients.cols());
        for (i, &p) in self.pivots.iter().enumerate() {
            if self.rhs.get(i, col) {
                x.set(p, true);
            }
        }
        Solution::Unique(x)
    }
}

/// Solves `sys`, distinguishing inconsistent from underdetermined systems.
/// An inconsistent system reports `NoSolution` regardless of its rank.
pub fn solve_unique(sys: &LinearSystem) -> Solution {
    RowReduction::from_system(sys).solution(0)
}

/// Number of equations of `sys` that `x` satisfies.
pub fn count_satisfied(sys: &LinearSystem, x: &BitVector) -> Result<usize, Gf2Error> {
    if x.len() != sys.unknowns() {
        return Err(Gf2Error::DimensionMismatch {
            expected: sys.unknowns(),
            found: x.len(),
        });
    }
    Ok((0..sys.equations())
        .filter(|&i| parity_and(sys.coefficients.row_words(i), x.words()) == sys.rhs.get(i))
        .count())
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, ensemble: Ensemble, rng: &mut R) -> BitMatrix {
    let mut m = BitMatrix::zeros(rows, cols);
    let mask = tail_mask(cols);
    for i in 0..rows {
        let row = m.row_words_mut(i);
        match ensemble {
            Ensemble::Uniform => {
                for w in row.iter_mut() {
                    *w = rng.next_u64();
                }
                if let Some(last) = row.last_mut() {
                    *last &= mask;
                }
            }
            Ensemble::Bernoulli(density) => {
                for j in 0..cols {
                    if density.sample(rng) {
                        row[j / WORD_BITS] |= 1 << (j % WORD_BITS);
                    }
                }
            }
        }
    }
    m
}

/// Limiting probability that a random `(k + d) x k` system misses full rank:
/// `1 - prod_{j > d} (1 - 2^-j)`.
///
/// The product is truncated after 64 factors past `d`; the omitted tail
/// changes the result by less than `2^-(d + 64)`.
pub fn rank_failure_limit(d: u32) -> f64 {
    let log_prod: f64 = (d + 1..=d + 64).map(|j| (-(2f64).powi(-(j as i32))).ln_1p()).sum();
    -log_prod.exp_m1()
}

/// Incrementally maintained basis, each vector keyed by its lowest set bit.
#[derive(Debug, Clone)]
pub struct XorBasis {
    dim: usize,
    // sorted by pivot
    basis: Vec<(usize, BitVector)>,
}

impl XorBasis {
    pub fn new(dim: usize) -> Self {
        Self { dim, basis: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn is_full(&self) -> bool {
        self.basis.len() == self.dim
    }

    fn reduce(&self, v: &mut BitVector) {
        for (pivot, b) in &self.basis {
            if v.get(*pivot) {
                v.xor_assign(b);
            }
        }
    }

    pub fn is_independent(&self, v: &BitVector) -> bool {
        let mut r = v.clone();
        self.reduce(&mut r);
        !r.is_zero()
    }

    /// Adds `v` if it is independent of the current span. Returns whether it was added.
    pub fn insert(&mut self, v: &BitVector) -> bool {
        assert_eq!(v.len(), self.dim);
        let mut r = v.clone();
        self.reduce(&mut r);
        match r.lowest_one() {
            None => false,
            Some(pivot) => {
                let at = self.basis.partition_point(|(p, _)| *p < pivot);
                self.basis.insert(at, (pivot, r));
                true
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn brute_force_rank(rows: &[BitVector], cols: usize) -> usize {
        // size of the row space is 2^rank
        let mut span = std::collections::HashSet::new();
        for mask in 0u32..(1 << rows.len()) {
            let mut acc = BitVector::zeros(cols);
            for (i, r) in rows.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    acc.xor_assign(r);
                }
            }
            span.insert(acc);
        }
        span.len().trailing_zeros() as usize
    }

    #[test]
    fn bitvector_padding_is_canonical() {
        let v = BitVector::from_words(5, vec![u64::MAX]);
        assert_eq!(v.words(), &[0b11111]);
        assert_eq!(v.complement().count_ones(), 0);
        let z = BitVector::zeros(70).complement();
        assert_eq!(z.count_ones(), 70);
        assert_eq!(z.words()[1], 0b111111);
    }

    #[test]
    fn parse_and_display_round_trip() {
        let v = BitVector::parse("1001").unwrap();
        assert!(v.get(0) && !v.get(1) && !v.get(2) && v.get(3));
        assert_eq!(v.to_string(), "1001");
        assert!(BitVector::parse("10x").is_err());
    }

    #[test]
    fn bytes_are_lsb_first() {
        let v = BitVector::parse("1000000001").unwrap();
        assert_eq!(v.to_bytes_lsb(), vec![0b0000_0001, 0b0000_0010]);
        assert_eq!(BitVector::from_bytes_lsb(10, &v.to_bytes_lsb()), v);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(rank(&BitMatrix::identity(3)), 3);
        assert_eq!(rank(&BitMatrix::zeros(4, 7)), 0);
        let m = BitMatrix::parse(&["110", "011", "101"]).unwrap();
        assert_eq!(brute_force_rank(&m.row_vectors(), 3), 2);
        assert_eq!(rank(&m), 2);
        // rank leaves its argument alone
        assert_eq!(m, BitMatrix::parse(&["110", "011", "101"]).unwrap());
    }

    #[test]
    fn solve_examples() {
        let sys = LinearSystem::new(BitMatrix::identity(3), BitVector::parse("101").unwrap()).unwrap();
        assert_eq!(solve_unique(&sys), Solution::Unique(BitVector::parse("101").unwrap()));

        let sys = LinearSystem::new(BitMatrix::parse(&["10", "10"]).unwrap(), BitVector::parse("10").unwrap()).unwrap();
        assert_eq!(solve_unique(&sys), Solution::NoSolution);

        let a = BitMatrix::parse(&["11", "01"]).unwrap();
        let b = BitVector::parse("11").unwrap();
        // brute force over the four candidates
        let sols: Vec<_> = ["00", "10", "01", "11"]
            .iter()
            .map(|s| BitVector::parse(s).unwrap())
            .filter(|x| a.mul_vec(x).unwrap() == b)
            .collect();
        assert_eq!(sols, vec![BitVector::parse("01").unwrap()]);
        let sys = LinearSystem::new(a, b).unwrap();
        assert_eq!(solve_unique(&sys), Solution::Unique(sols[0].clone()));

        let sys = LinearSystem::new(BitMatrix::parse(&["11", "11"]).unwrap(), BitVector::parse("11").unwrap()).unwrap();
        assert_eq!(solve_unique(&sys), Solution::Underdetermined);
    }

    #[test]
    fn linear_system_rejects_mismatched_rhs() {
        assert!(LinearSystem::new(BitMatrix::identity(3), BitVector::zeros(2)).is_err());
    }

    #[test]
    fn count_satisfied_examples() {
        let mut rng = rng_from_seed(7);
        let a = random_matrix(10, 6, Ensemble::Uniform, &mut rng);
        let x = BitVector::random_uniform(6, &mut rng);
        let sys = LinearSystem::new(a.clone(), a.mul_vec(&x).unwrap()).unwrap();
        assert_eq!(count_satisfied(&sys, &x).unwrap(), 10);

        let zero = LinearSystem::new(BitMatrix::zeros(5, 4), BitVector::zeros(5)).unwrap();
        assert_eq!(count_satisfied(&zero, &BitVector::parse("1011").unwrap()).unwrap(), 5);

        assert!(matches!(
            count_satisfied(&zero, &BitVector::zeros(3)),
            Err(Gf2Error::DimensionMismatch { expected: 4, found: 3 })
        ));
    }

    #[test]
    fn count_satisfied_matches_per_row_oracle() {
        let mut rng = rng_from_seed(11);
        for _ in 0..50 {
            let a = random_matrix(5, 3, Ensemble::Uniform, &mut rng);
            let b = BitVector::random_uniform(5, &mut rng);
            let sys = LinearSystem::new(a.clone(), b.clone()).unwrap();
            let sub = sys.select(&[0, 1, 2]);
            let Solution::Unique(x) = solve_unique(&sub) else { continue };
            let oracle = (0..5)
                .filter(|&i| {
                    let mut acc = false;
                    for j in 0..3 {
                        acc ^= a.get(i, j) & x.get(j);
                    }
                    acc == b.get(i)
                })
                .count();
            assert_eq!(count_satisfied(&sys, &x).unwrap(), oracle);
            assert_eq!(count_satisfied(&sub, &x).unwrap(), 3);
        }
    }

    #[test]
    fn bernoulli_rejects_out_of_range() {
        for p in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
            assert!(Ensemble::bernoulli(p).is_err(), "{p}");
        }
        assert!(Density::from_ratio(0, 5).is_err());
        assert!(Density::from_ratio(5, 5).is_err());
        assert!(Density::from_ratio(1, 0).is_err());
        assert!(Density::from_ratio(1, 2).unwrap().is_half());
    }

    #[test]
    fn bernoulli_half_sample_mean() {
        let mut rng = rng_from_seed(3);
        let m = random_matrix(100, 1000, Ensemble::bernoulli(0.5).unwrap(), &mut rng);
        let ones: usize = (0..100).map(|i| m.row(i).count_ones()).sum();
        let frac = ones as f64 / 1e5;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn random_matrix_is_deterministic() {
        let a = random_matrix(9, 70, Ensemble::Uniform, &mut rng_from_seed(5));
        let b = random_matrix(9, 70, Ensemble::Uniform, &mut rng_from_seed(5));
        assert_eq!(a, b);
        let one = random_matrix(1, 1, Ensemble::Uniform, &mut rng_from_seed(5));
        assert!(one.row_words(0)[0] <= 1);
        for i in 0..9 {
            assert_eq!(a.row_words(i)[1] >> 6, 0, "padding must stay zero");
        }
    }

    #[test]
    fn rank_failure_limit_values() {
        // partial product to j = 64, computed independently
        let mut prod = 1.0f64;
        for j in 1..=64 {
            prod *= 1.0 - 0.5f64.powi(j);
        }
        let d0 = rank_failure_limit(0);
        assert!((d0 - (1.0 - prod)).abs() < 1e-12);
        assert!((d0 - 0.711212).abs() < 1e-6);
        assert!(rank_failure_limit(40) < 2f64.powi(-40) + 1e-12);
        for d in 1..40 {
            assert!(rank_failure_limit(d) < 2f64.powi(-(d as i32)), "d = {d}");
        }
        // past ~2^-40 the gap to 2^-d drops below one ulp
        for d in 40..60 {
            assert!(rank_failure_limit(d) <= 2f64.powi(-(d as i32)) * (1.0 + 1e-12), "d = {d}");
        }
    }

    #[test]
    fn xor_basis_tracks_rank() {
        let mut rng = rng_from_seed(9);
        for _ in 0..20 {
            let m = random_matrix(12, 10, Ensemble::Uniform, &mut rng);
            let mut basis = XorBasis::new(10);
            for row in m.row_vectors() {
                let indep = basis.is_independent(&row);
                assert_eq!(basis.insert(&row), indep);
            }
            assert_eq!(basis.rank(), rank(&m));
        }
    }

    fn small_matrix() -> impl Strategy<Value = BitMatrix> {
        (1usize..=8, 1usize..=8).prop_flat_map(|(r, c)| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), c), r).prop_map(move |rows| {
                let rows: Vec<BitVector> = rows.into_iter().map(BitVector::from_bits).collect();
                BitMatrix::from_rows(c, &rows).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn rank_equals_transpose_rank_and_brute_force(m in small_matrix()) {
            let r = rank(&m);
            prop_assert_eq!(r, rank(&m.transpose()));
            prop_assert_eq!(r, brute_force_rank(&m.row_vectors(), m.cols()));
            prop_assert!(r <= m.rows().min(m.cols()));
        }

        #[test]
        fn row_operations_preserve_rank(m in small_matrix(), a in 0usize..8, b in 0usize..8) {
            let (a, b) = (a % m.rows(), b % m.rows());
            let mut n = m.clone();
            if a != b {
                n.xor_row_into(a, b, 0);
            }
            n.swap_rows(a, b);
            prop_assert_eq!(rank(&n), rank(&m));
        }

        #[test]
        fn self_xor_is_zero(bits in proptest::collection::vec(any::<bool>(), 0..200)) {
            let v = BitVector::from_bits(bits);
            let mut w = v.clone();
            w.xor_assign(&v);
            prop_assert!(w.is_zero());
            prop_assert_eq!(w.len(), v.len());
        }

        #[test]
        fn unique_solution_satisfies_every_equation(seed in any::<u64>(), n in 1usize..20) {
            let mut rng = rng_from_seed(seed);
            let a = random_matrix(n + 3, n, Ensemble::Uniform, &mut rng);
            let x = BitVector::random_uniform(n, &mut rng);
            let sys = LinearSystem::new(a.clone(), a.mul_vec(&x).unwrap()).unwrap();
            match solve_unique(&sys) {
                Solution::Unique(s) => {
                    prop_assert_eq!(&s, &x);
                    prop_assert_eq!(count_satisfied(&sys, &s).unwrap(), n + 3);
                }
                Solution::Underdetermined => prop_assert!(rank(&a) < n),
                Solution::NoSolution => prop_assert!(false, "consistent system reported inconsistent"),
            }
        }
    }
}
