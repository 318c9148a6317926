//! Message framing and packet generation for the corruption-resilient code.
//!
//! A message of `n` bits is cut into `m` blocks of `k` bits. A packet carries
//! a random coding vector `r` (in one of three header forms) and, for every
//! block `b_i`, the inner product `<r, b_i>`. Decoding block `i` is then
//! solving the linear system whose rows are the packets' coding vectors and
//! whose right-hand side is payload bit `i`.
//!
//! # Wire format
//!
//! ```text
//! offset  size  field
//! 0       2     magic 0xFC 0x0D
//! 2       1     version 0x01
//! 3       1     header kind: 0 dense, 1 index list, 2 seed
//! 4       4     k (u32 LE)
//! 8       4     m (u32 LE)
//! 12      ..    header body
//!                 dense:  ceil(k/8) bytes, LSB-first
//!                 index:  u16 LE count, then count * u32 LE indices, ascending
//!                 seed:   u64 LE seed, u32 LE density numerator, u32 LE denominator
//! ..      ..    payload, ceil(m/8) bytes, LSB-first
//! ```

use rand::Rng;
use thiserror::Error;

use crate::gf2::{BitVector, Density, Gf2Error};
use crate::rng::{rng_from_seed, CodeRng};

pub const MAGIC: [u8; 2] = [0xFC, 0x0D];
pub const VERSION: u8 = 0x01;
const FIXED_HEADER_LEN: usize = 12;

/// Default `delta` for the log-sparse distribution.
pub const DEFAULT_DELTA: f64 = 1.0;
/// Default `c` in the log-distribution density window.
pub const DEFAULT_WINDOW_C: f64 = 4.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CodingError {
    #[error("invalid parameter: {0}")]
    Usage(String),
    #[error("malformed packet at byte {offset}: {reason}")]
    Malformed { offset: usize, reason: String },
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

fn malformed(offset: usize, reason: impl Into<String>) -> CodingError {
    CodingError::Malformed {
        offset,
        reason: reason.into(),
    }
}

/// How a message was cut into blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MessageLayout {
    pub message_bits: usize,
    pub blocks: usize,
    pub block_bits: usize,
    /// Zero bits appended to the final block.
    pub padding: usize,
}

/// Splits `bits` into `m` blocks of `k = ceil(n / m)` bits, zero-padding the last.
pub fn split_message(bits: &BitVector, m: usize) -> Result<(MessageLayout, Vec<BitVector>), CodingError> {
    let n = bits.len();
    if n == 0 {
        return Err(CodingError::Usage("message is empty".into()));
    }
    if m == 0 || m > n {
        return Err(CodingError::Usage(format!("block count {m} must be between 1 and the message length {n}")));
    }
    let k = n.div_ceil(m);
    let blocks = (0..m).map(|i| bits.slice_padded(i * k, k)).collect();
    let layout = MessageLayout {
        message_bits: n,
        blocks: m,
        block_bits: k,
        padding: m * k - n,
    };
    Ok((layout, blocks))
}

/// Inverse of [`split_message`]: concatenates the blocks and drops the padding.
pub fn join_blocks(layout: &MessageLayout, blocks: &[BitVector]) -> Result<BitVector, CodingError> {
    if blocks.len() != layout.blocks || blocks.iter().any(|b| b.len() != layout.block_bits) {
        return Err(CodingError::Usage("blocks do not match the layout".into()));
    }
    Ok(BitVector::concat(blocks).slice_padded(0, layout.message_bits))
}

/// Distribution of coding vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodingDistribution {
    Uniform,
    /// Each coordinate is one with probability `(1 + delta) log2(k) / k`,
    /// capped at one half.
    LogSparse { delta: f64, window_c: f64 },
}

impl CodingDistribution {
    pub fn log_sparse(delta: f64) -> Self {
        CodingDistribution::LogSparse {
            delta,
            window_c: DEFAULT_WINDOW_C,
        }
    }

    /// Nominal per-coordinate density for dimension `k`.
    pub fn nominal_density(&self, k: usize) -> f64 {
        match *self {
            CodingDistribution::Uniform => 0.5,
            CodingDistribution::LogSparse { delta, .. } => {
                let k = k.max(2) as f64;
                ((1.0 + delta) * k.log2() / k).min(0.5)
            }
        }
    }

    /// The density as the `(numerator, denominator)` pair carried by seed headers.
    pub fn density_ratio(&self, k: usize) -> (u32, u32) {
        match self {
            CodingDistribution::Uniform => (1, 2),
            CodingDistribution::LogSparse { .. } => {
                let den = u32::MAX;
                let num = (self.nominal_density(k) * f64::from(den)).round() as u32;
                (num.clamp(1, den - 1), den)
            }
        }
    }

    pub fn density(&self, k: usize) -> Density {
        let (num, den) = self.density_ratio(k);
        Density::from_ratio(num, den).expect("ratio is kept inside (0, 1)")
    }

    /// Checks `(log2 k + c)/k <= p <= 1 - (log2 k + c)/k` for log-sparse vectors.
    pub fn check_window(&self, k: usize) -> Result<(), CodingError> {
        let CodingDistribution::LogSparse { delta, window_c } = *self else {
            return Ok(());
        };
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(CodingError::Usage(format!("delta must be positive, got {delta}")));
        }
        let p = self.density(k).probability();
        let lo = ((k as f64).log2() + window_c) / k as f64;
        if p < lo || p > 1.0 - lo {
            return Err(CodingError::Usage(format!(
                "log-sparse density {p:.4} at k={k} is outside [{lo:.4}, {:.4}]; raise delta or use the uniform distribution",
                1.0 - lo
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeaderForm {
    Dense,
    IndexList,
    Seed,
}

/// Coding-vector header as carried on the wire.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Header {
    Dense(BitVector),
    /// Strictly ascending positions of the ones of `r`.
    IndexList(Vec<u32>),
    /// Receiver re-runs [`sample_coding_vector`] with this seed and density.
    Seed { seed: u64, num: u32, den: u32 },
}

impl Header {
    pub fn kind_byte(&self) -> u8 {
        match self {
            Header::Dense(_) => 0,
            Header::IndexList(_) => 1,
            Header::Seed { .. } => 2,
        }
    }
}

/// Draws a nonzero coding vector; all-zero draws are discarded and redrawn
/// from the same stream.
pub fn sample_coding_vector<R: Rng + ?Sized>(k: usize, density: Density, rng: &mut R) -> BitVector {
    loop {
        let v = if density.is_half() {
            BitVector::random_uniform(k, rng)
        } else {
            BitVector::random_bernoulli(k, density, rng)
        };
        if !v.is_zero() {
            return v;
        }
    }
}

/// Expands a header to the `k`-bit coding vector it denotes.
pub fn expand_header(header: &Header, k: usize) -> Result<BitVector, CodingError> {
    match header {
        Header::Dense(v) => {
            if v.len() != k {
                return Err(malformed(0, format!("dense header has {} bits, expected {k}", v.len())));
            }
            Ok(v.clone())
        }
        Header::IndexList(indices) => {
            let mut v = BitVector::zeros(k);
            let mut prev: Option<u32> = None;
            for &i in indices {
                if i as usize >= k {
                    return Err(malformed(0, format!("index {i} out of range for k={k}")));
                }
                match prev {
                    Some(p) if p == i => return Err(malformed(0, format!("duplicate index {i}"))),
                    Some(p) if p > i => return Err(malformed(0, format!("index {i} follows {p}; list must ascend"))),
                    _ => {}
                }
                v.set(i as usize, true);
                prev = Some(i);
            }
            Ok(v)
        }
        Header::Seed { seed, num, den } => {
            let density = Density::from_ratio(*num, *den).map_err(|_| malformed(0, format!("invalid seed density {num}/{den}")))?;
            Ok(sample_coding_vector(k, density, &mut rng_from_seed(*seed)))
        }
    }
}

/// One encoded packet: a header plus one payload bit per block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    k: usize,
    header: Header,
    coding_vector: BitVector,
    payload: BitVector,
}

impl Packet {
    /// Validates the header against `k` and builds the packet.
    pub fn new(k: usize, header: Header, payload: BitVector) -> Result<Self, CodingError> {
        if k == 0 || k > u32::MAX as usize {
            return Err(CodingError::Usage(format!("k={k} out of range")));
        }
        if payload.is_empty() || payload.len() > u32::MAX as usize {
            return Err(CodingError::Usage("payload must carry at least one block".into()));
        }
        if let Header::IndexList(ix) = &header {
            if ix.len() > u16::MAX as usize {
                return Err(CodingError::Usage(format!("{} indices do not fit a 16-bit count", ix.len())));
            }
        }
        let coding_vector = expand_header(&header, k)?;
        Ok(Self {
            k,
            header,
            coding_vector,
            payload,
        })
    }

    /// Packet for coding vector `r` over `blocks`, with a dense or index-list header.
    pub fn from_vector(r: BitVector, blocks: &[BitVector], form: HeaderForm) -> Result<Self, CodingError> {
        let header = match form {
            HeaderForm::Dense => Header::Dense(r.clone()),
            HeaderForm::IndexList => Header::IndexList(r.iter_ones().map(|i| i as u32).collect()),
            HeaderForm::Seed => return Err(CodingError::Usage("a seed header needs the generating seed".into())),
        };
        let payload = BitVector::from_bits(blocks.iter().map(|b| r.dot(b)));
        Self::new(r.len(), header, payload)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.payload.len()
    }

    pub fn header(&self) -> &Header {
        &self.header
    }

    pub fn coding_vector(&self) -> &BitVector {
        &self.coding_vector
    }

    pub fn payload(&self) -> &BitVector {
        &self.payload
    }

    pub fn payload_mut(&mut self) -> &mut BitVector {
        &mut self.payload
    }

    /// Replaces the coding vector, keeping the header form where possible.
    /// Seed headers become index lists, since an edited vector has no seed.
    pub fn set_coding_vector(&mut self, r: BitVector) {
        assert_eq!(r.len(), self.k);
        self.header = match self.header {
            Header::Dense(_) => Header::Dense(r.clone()),
            _ => Header::IndexList(r.iter_ones().map(|i| i as u32).collect()),
        };
        self.coding_vector = r;
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        serialize_packet(self)
    }
}

/// Draws one packet over `blocks`. A fresh 64-bit seed is taken from `rng`
/// and the coding vector is sampled from that seed, so the three header
/// forms yield identical vectors for identical generator states.
pub fn generate_packet<R: Rng + ?Sized>(
    blocks: &[BitVector],
    dist: &CodingDistribution,
    form: HeaderForm,
    rng: &mut R,
) -> Result<Packet, CodingError> {
    let k = blocks.first().map(BitVector::len).ok_or_else(|| CodingError::Usage("no blocks".into()))?;
    if blocks.iter().any(|b| b.len() != k) || k == 0 {
        return Err(CodingError::Usage("blocks must be nonempty and share one length".into()));
    }
    let seed = rng.next_u64();
    let (num, den) = dist.density_ratio(k);
    let r = sample_coding_vector(k, dist.density(k), &mut rng_from_seed(seed));
    match form {
        HeaderForm::Seed => {
            let payload = BitVector::from_bits(blocks.iter().map(|b| r.dot(b)));
            Packet::new(k, Header::Seed { seed, num, den }, payload)
        }
        _ => Packet::from_vector(r, blocks, form),
    }
}

/// A packet source over one message.
#[derive(Debug, Clone)]
pub struct Encoder {
    layout: MessageLayout,
    blocks: Vec<BitVector>,
    dist: CodingDistribution,
    form: HeaderForm,
    rng: CodeRng,
}

impl Encoder {
    pub fn new(message: &BitVector, m: usize, dist: CodingDistribution, form: HeaderForm, seed: u64) -> Result<Self, CodingError> {
        let (layout, blocks) = split_message(message, m)?;
        Self::from_blocks(layout, blocks, dist, form, seed)
    }

    pub fn from_blocks(
        layout: MessageLayout,
        blocks: Vec<BitVector>,
        dist: CodingDistribution,
        form: HeaderForm,
        seed: u64,
    ) -> Result<Self, CodingError> {
        dist.check_window(layout.block_bits)?;
        Ok(Self {
            layout,
            blocks,
            dist,
            form,
            rng: rng_from_seed(seed),
        })
    }

    pub fn layout(&self) -> &MessageLayout {
        &self.layout
    }

    pub fn blocks(&self) -> &[BitVector] {
        &self.blocks
    }

    pub fn next_packet(&mut self) -> Packet {
        generate_packet(&self.blocks, &self.dist, self.form, &mut self.rng).expect("encoder blocks are validated at construction")
    }

    pub fn take(&mut self, count: usize) -> Vec<Packet> {
        (0..count).map(|_| self.next_packet()).collect()
    }
}

pub fn serialize_packet(p: &Packet) -> Vec<u8> {
    let mut out = Vec::with_capacity(FIXED_HEADER_LEN + p.k.div_ceil(8) + p.m().div_ceil(8));
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(p.header.kind_byte());
    out.extend_from_slice(&(p.k as u32).to_le_bytes());
    out.extend_from_slice(&(p.m() as u32).to_le_bytes());
    match &p.header {
        Header::Dense(v) => out.extend_from_slice(&v.to_bytes_lsb()),
        Header::IndexList(ix) => {
            out.extend_from_slice(&(ix.len() as u16).to_le_bytes());
            for i in ix {
                out.extend_from_slice(&i.to_le_bytes());
            }
        }
        Header::Seed { seed, num, den } => {
            out.extend_from_slice(&seed.to_le_bytes());
            out.extend_from_slice(&num.to_le_bytes());
            out.extend_from_slice(&den.to_le_bytes());
        }
    }
    out.extend_from_slice(&p.payload.to_bytes_lsb());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    base: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], CodingError> {
        if self.bytes.len() - self.pos < n {
            return Err(malformed(self.base + self.pos, format!("truncated {what}: need {n} bytes, have {}", self.bytes.len() - self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self, what: &str) -> Result<u16, CodingError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, CodingError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, CodingError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn bits(&mut self, len: usize, what: &str) -> Result<BitVector, CodingError> {
        let start = self.base + self.pos;
        let raw = self.take(len.div_ceil(8), what)?;
        let v = BitVector::from_bytes_lsb(len, raw);
        if v.to_bytes_lsb() != raw {
            return Err(malformed(start, format!("{what} has nonzero padding bits")));
        }
        Ok(v)
    }
}

/// Decodes one frame from the front of `bytes`; returns the packet and the
/// number of bytes consumed. `base` offsets error positions.
pub fn decode_frame(bytes: &[u8], base: usize) -> Result<(Packet, usize), CodingError> {
    let mut r = Reader { bytes, pos: 0, base };
    if bytes.is_empty() {
        return Err(malformed(base, "empty input"));
    }
    if r.take(2, "magic")? != MAGIC {
        return Err(malformed(base, "bad magic"));
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(malformed(base + 2, format!("unsupported version {version:#04x}")));
    }
    let kind = r.take(1, "header kind")?[0];
    let k = r.u32("k")? as usize;
    let m = r.u32("m")? as usize;
    if k == 0 {
        return Err(malformed(base + 4, "k must be positive"));
    }
    if m == 0 {
        return Err(malformed(base + 8, "m must be positive"));
    }
    let body_start = base + r.pos;
    let header = match kind {
        0 => Header::Dense(r.bits(k, "dense header")?),
        1 => {
            let count = r.u16("index count")? as usize;
            let mut ix = Vec::with_capacity(count);
            for _ in 0..count {
                ix.push(r.u32("index")?);
            }
            Header::IndexList(ix)
        }
        2 => {
            let seed = r.u64("seed")?;
            let num = r.u32("density numerator")?;
            let den = r.u32("density denominator")?;
            Header::Seed { seed, num, den }
        }
        other => return Err(malformed(base + 3, format!("unknown header kind {other}"))),
    };
    let payload = r.bits(m, "payload")?;
    let packet = Packet::new(k, header, payload).map_err(|e| match e {
        CodingError::Malformed { reason, .. } => malformed(body_start, reason),
        other => other,
    })?;
    Ok((packet, r.pos))
}

/// Decodes exactly one frame; trailing bytes are an error.
pub fn deserialize_packet(bytes: &[u8]) -> Result<Packet, CodingError> {
    let (p, used) = decode_frame(bytes, 0)?;
    if used != bytes.len() {
        return Err(malformed(used, format!("{} trailing bytes", bytes.len() - used)));
    }
    Ok(p)
}

/// Decodes a concatenation of frames.
pub fn read_packets(bytes: &[u8]) -> Result<Vec<Packet>, CodingError> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (p, used) = decode_frame(&bytes[pos..], pos)?;
        out.push(p);
        pos += used;
    }
    Ok(out)
}

pub fn write_packets(packets: &[Packet]) -> Vec<u8> {
    packets.iter().flat_map(serialize_packet).collect()
}
