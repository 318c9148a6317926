//! Reference LT encoder and belief-propagation (peeling) decoder.
//!
//! This is the baseline the attacks target; it has no protection against
//! corrupted packets.

use std::collections::VecDeque;

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::gf2::BitVector;

/// Default Robust Soliton constant.
pub const DEFAULT_RS_C: f64 = 0.1;
/// Default Robust Soliton failure probability.
pub const DEFAULT_RS_DELTA: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LtError {
    #[error("invalid degree distribution: {0}")]
    InvalidDistribution(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DegreeKind {
    IdealSoliton,
    RobustSoliton { c: f64, delta: f64 },
    Custom,
}

/// Probability table over degrees `1..=k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    kind: DegreeKind,
    k: usize,
    // pmf[d] for d in 0..=k; pmf[0] is always 0
    pmf: Vec<f64>,
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    /// `P[1] = 1/k`, `P[i] = 1/(i(i-1))` for `2 <= i <= k`.
    pub fn ideal_soliton(k: usize) -> Result<Self, LtError> {
        if k < 1 {
            return Err(LtError::InvalidDistribution("k must be positive".into()));
        }
        Self::build(DegreeKind::IdealSoliton, k, ideal_pmf(k))
    }

    /// `mu = (rho + tau) / beta` with `R = c ln(k/delta) sqrt(k)`,
    /// `tau(i) = R/(ik)` for `i < k/R`, `tau(k/R) = R ln(R/delta)/k`.
    pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Result<Self, LtError> {
        if k < 2 {
            return Err(LtError::InvalidDistribution("Robust Soliton needs k >= 2".into()));
        }
        if !(c > 0.0 && delta > 0.0 && delta < 1.0) {
            return Err(LtError::InvalidDistribution(format!("need c > 0 and 0 < delta < 1, got c={c}, delta={delta}")));
        }
        let kf = k as f64;
        let r = c * (kf / delta).ln() * kf.sqrt();
        let spike = ((kf / r).floor() as usize).clamp(1, k);
        let mut pmf = ideal_pmf(k);
        for (i, p) in pmf.iter_mut().enumerate().take(spike).skip(1) {
            *p += r / (i as f64 * kf);
        }
        pmf[spike] += (r * (r / delta).ln() / kf).max(0.0);
        let beta: f64 = pmf.iter().sum();
        pmf.iter_mut().for_each(|p| *p /= beta);
        Self::build(DegreeKind::RobustSoliton { c, delta }, k, pmf)
    }

    pub fn robust_soliton_default(k: usize) -> Result<Self, LtError> {
        Self::robust_soliton(k, DEFAULT_RS_C, DEFAULT_RS_DELTA)
    }

    /// Arbitrary nonnegative weights for degrees `1..=weights.len()`.
    pub fn from_weights(weights: &[f64]) -> Result<Self, LtError> {
        if weights.is_empty() || weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(LtError::InvalidDistribution("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(LtError::InvalidDistribution("weights sum to zero".into()));
        }
        let pmf = std::iter::once(0.0).chain(weights.iter().map(|w| w / total)).collect();
        Self::build(DegreeKind::Custom, weights.len(), pmf)
    }

    fn build(kind: DegreeKind, k: usize, pmf: Vec<f64>) -> Result<Self, LtError> {
        let mut acc = 0.0;
        let cdf = pmf
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { kind, k, pmf, cdf })
    }

    pub fn kind(&self) -> DegreeKind {
        self.kind
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `P[degree = d]`.
    pub fn probability(&self, d: usize) -> f64 {
        self.pmf.get(d).copied().unwrap_or(0.0)
    }

    /// Exact probability of an odd degree.
    pub fn odd_probability(&self) -> f64 {
        self.pmf.iter().skip(1).step_by(2).sum()
    }

    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(d, p)| d as f64 * p).sum()
    }
}

fn ideal_pmf(k: usize) -> Vec<f64> {
    let mut pmf = vec![0.0; k + 1];
    pmf[1] = 1.0 / k as f64;
    for (i, p) in pmf.iter_mut().enumerate().skip(2) {
        *p = 1.0 / (i as f64 * (i as f64 - 1.0));
    }
    pmf
}

/// Inverse-CDF draw of a degree in `1..=k`.
pub fn sample_degree<R: Rng + ?Sized>(dist: &DegreeDistribution, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let total = *dist.cdf.last().unwrap();
    let d = dist.cdf.partition_point(|&c| c <= u * total);
    d.clamp(1, dist.k)
}

/// Empirical fraction of odd degrees over `trials` draws.
pub fn odd_degree_fraction<R: Rng + ?Sized>(dist: &DegreeDistribution, trials: usize, rng: &mut R) -> f64 {
    assert!(trials >= 1);
    let odd = (0..trials).filter(|_| sample_degree(dist, rng) % 2 == 1).count();
    odd as f64 / trials as f64
}

/// An LT output packet: the xor of the symbols in `neighbors`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LtPacket {
    neighbors: Vec<usize>,
    value: BitVector,
}

impl LtPacket {
    /// `neighbors` is sorted and deduplicated.
    pub fn new(mut neighbors: Vec<usize>, value: BitVector) -> Self {
        neighbors.sort_unstable();
        neighbors.dedup();
        Self { neighbors, value }
    }

    /// Packet over `neighbors` with its value computed from `symbols`.
    pub fn from_symbols(neighbors: Vec<usize>, symbols: &[BitVector]) -> Self {
        let mut value = BitVector::zeros(symbols[0].len());
        for &s in &neighbors {
            value.xor_assign(&symbols[s]);
        }
        Self::new(neighbors, value)
    }

    pub fn neighbors(&self) -> &[usize] {
        &self.neighbors
    }

    pub fn degree(&self) -> usize {
        self.neighbors.len()
    }

    pub fn value(&self) -> &BitVector {
        &self.value
    }

    pub fn value_mut(&mut self) -> &mut BitVector {
        &mut self.value
    }

    pub fn contains(&self, symbol: usize) -> bool {
        self.neighbors.binary_search(&symbol).is_ok()
    }

    /// Drops `symbol` from the neighbor list; the value is left as is.
    pub fn remove_neighbor(&mut self, symbol: usize) -> bool {
        match self.neighbors.binary_search(&symbol) {
            Ok(i) => {
                self.neighbors.remove(i);
                true
            }
            Err(_) => false,
        }
    }
}

/// Encodes one packet: draws a degree, then that many distinct symbols uniformly.
pub fn lt_encode<R: Rng + ?Sized>(symbols: &[BitVector], dist: &DegreeDistribution, rng: &mut R) -> LtPacket {
    let degree = sample_degree(dist, rng).min(symbols.len());
    lt_encode_with_degree(symbols, degree, rng)
}

pub fn lt_encode_with_degree<R: Rng + ?Sized>(symbols: &[BitVector], degree: usize, rng: &mut R) -> LtPacket {
    assert!(!symbols.is_empty(), "need at least one symbol");
    assert!((1..=symbols.len()).contains(&degree));
    let neighbors = sample(rng, symbols.len(), degree).into_vec();
    LtPacket::from_symbols(neighbors, symbols)
}

/// A packet that, once peeled down to nothing, still had a nonzero value.
/// Only corrupted input can produce one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inconsistency {
    pub packet: usize,
    /// The symbol whose resolution emptied the packet.
    pub symbol: usize,
}

/// Bipartite packet/symbol graph driven by the peeling loop.
///
/// Each packet keeps the xor of its unresolved neighbor indices, so when its
/// degree reaches one that xor *is* the remaining neighbor.
#[derive(Debug, Clone)]
pub struct PeelingGraph {
    neighbors: Vec<Vec<usize>>,
    values: Vec<BitVector>,
    remaining: Vec<usize>,
    neighbor_xor: Vec<usize>,
    symbol_packets: Vec<Vec<usize>>,
    decoded: Vec<Option<BitVector>>,
    queue: VecDeque<usize>,
    inconsistencies: Vec<Inconsistency>,
    steps: usize,
}

impl PeelingGraph {
    pub fn new(k: usize, packets: &[LtPacket]) -> Self {
        let mut symbol_packets = vec![Vec::new(); k];
        let mut queue = VecDeque::new();
        for (a, p) in packets.iter().enumerate() {
            for &s in &p.neighbors {
                assert!(s < k, "neighbor {s} out of range for {k} symbols");
                symbol_packets[s].push(a);
            }
            if p.degree() == 1 {
                queue.push_back(a);
            }
        }
        Self {
            neighbors: packets.iter().map(|p| p.neighbors.clone()).collect(),
            values: packets.iter().map(|p| p.value.clone()).collect(),
            remaining: packets.iter().map(LtPacket::degree).collect(),
            neighbor_xor: packets.iter().map(|p| p.neighbors.iter().fold(0, |x, s| x ^ s)).collect(),
            symbol_packets,
            decoded: vec![None; k],
            queue,
            inconsistencies: Vec::new(),
            steps: 0,
        }
    }

    /// Resolves one symbol from the oldest degree-one packet. Returns the
    /// symbol, or `None` once no degree-one packet is left.
    pub fn step(&mut self) -> Option<usize> {
        while let Some(a) = self.queue.pop_front() {
            if self.remaining[a] != 1 {
                continue;
            }
            let s = self.neighbor_xor[a];
            debug_assert!(self.decoded[s].is_none());
            let value = self.values[a].clone();
            for i in 0..self.symbol_packets[s].len() {
                let b = self.symbol_packets[s][i];
                self.values[b].xor_assign(&value);
                self.remaining[b] -= 1;
                self.neighbor_xor[b] ^= s;
                match self.remaining[b] {
                    1 => self.queue.push_back(b),
                    0 if b != a && !self.values[b].is_zero() => {
                        self.inconsistencies.push(Inconsistency { packet: b, symbol: s });
                    }
                    _ => {}
                }
            }
            self.decoded[s] = Some(value);
            self.steps += 1;
            return Some(s);
        }
        None
    }

    pub fn run(&mut self) {
        while self.step().is_some() {}
    }

    pub fn decoded(&self) -> &[Option<BitVector>] {
        &self.decoded
    }

    /// Packets with at least one unresolved neighbor, reduced by everything
    /// resolved so far.
    pub fn residual(&self) -> Vec<LtPacket> {
        (0..self.neighbors.len())
            .filter(|&a| self.remaining[a] > 0)
            .map(|a| {
                let live = self.neighbors[a].iter().copied().filter(|&s| self.decoded[s].is_none()).collect();
                LtPacket::new(live, self.values[a].clone())
            })
            .collect()
    }

    pub fn inconsistencies(&self) -> &[Inconsistency] {
        &self.inconsistencies
    }

    pub fn steps(&self) -> usize {
        self.steps
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BpResult {
    Decoded(Vec<BitVector>),
    Stalled {
        decoded: Vec<Option<BitVector>>,
        unresolved: Vec<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub result: BpResult,
    /// Packets still carrying unresolved symbols (empty after a full decode).
    pub residual: Vec<LtPacket>,
    pub inconsistencies: Vec<Inconsistency>,
    pub steps: usize,
}

impl BpOutcome {
    pub fn is_decoded(&self) -> bool {
        matches!(self.result, BpResult::Decoded(_))
    }

    pub fn symbols(&self) -> Vec<Option<BitVector>> {
        match &self.result {
            BpResult::Decoded(s) => s.iter().cloned().map(Some).collect(),
            BpResult::Stalled { decoded, .. } => decoded.clone(),
        }
    }
}

/// Peels `packets` over `k` symbols until no degree-one packet remains.
pub fn bp_decode(k: usize, packets: &[LtPacket]) -> BpOutcome {
    let mut graph = PeelingGraph::new(k, packets);
    graph.run();
    let residual = graph.residual();
    let unresolved: Vec<usize> = (0..k).filter(|&s| graph.decoded[s].is_none()).collect();
    let result = if unresolved.is_empty() {
        BpResult::Decoded(graph.decoded.iter().map(|s| s.clone().unwrap()).collect())
    } else {
        BpResult::Stalled {
            decoded: graph.decoded.clone(),
            unresolved,
        }
    };
    BpOutcome {
        result,
        residual,
        inconsistencies: graph.inconsistencies,
        steps: graph.steps,
    }
}
