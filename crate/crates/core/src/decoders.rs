//! Decoders that tolerate a bounded number of corrupted packets.
//!
//! All three algorithms work on a [`CodedSystem`]: the coefficient matrix
//! (one coding vector per row) is shared by every message block, and only
//! the right-hand side differs. Work on the coefficients (subset
//! eliminations, set construction, candidate products) is done once and
//! reused across blocks.
//!
//! Acceptance is by counting satisfied equations. A candidate is accepted
//! for a block when it satisfies at least `collected - f` of the collected
//! equations (and never fewer than the plan's nominal threshold), where `f`
//! is the corruption budget the plan assumes. The true block always meets
//! this when the adversary respected its budget; a wrong candidate needs
//! all but `f` equations to agree by accident.

use rand::seq::index::sample;
use rand::Rng;
use thiserror::Error;

use crate::coding::Packet;
use crate::gf2::{BitMatrix, BitVector, LinearSystem, RowReduction, Solution, XorBasis};
use crate::adversary::CBound;
use crate::lt::{bp_decode, BpOutcome, LtPacket};

/// Largest `k` the exhaustive decoder will enumerate by default.
pub const DEFAULT_EXHAUSTIVE_CEILING: usize = 24;
/// Grid step of the selective planner.
pub const DEFAULT_PLAN_STEP: f64 = 0.5;
/// Iteration cap of the randomized decoder, as a multiple of the expected count.
pub const DEFAULT_CAP_FACTOR: f64 = 64.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("planning error: {0}")]
    Plan(String),
    #[error("k = {k} exceeds the exhaustive ceiling {ceiling}; use the randomized decoder")]
    AboveCeiling { k: usize, ceiling: usize },
    #[error("no packets to decode")]
    NoPackets,
    #[error("packets disagree on dimensions: expected k = {k}, m = {m}")]
    MixedDimensions { k: usize, m: usize },
    #[error("block {block} out of range (m = {m})")]
    BlockOutOfRange { block: usize, m: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanModel {
    /// At most `f` corrupted packets in total.
    Uniform { f: usize },
    /// A selective adversary corrupting `b * k` packets, answered with `(a + b) * k` packets.
    Selective { b: f64, a: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodePlan {
    pub k: usize,
    pub model: PlanModel,
    pub epsilon: usize,
    pub required_packets: usize,
    /// Nominal number of satisfied equations a block must reach.
    pub threshold: usize,
}

impl DecodePlan {
    /// Number of corrupted packets the plan is built to withstand.
    pub fn corruption_budget(&self) -> usize {
        match self.model {
            PlanModel::Uniform { f } => f,
            PlanModel::Selective { b, .. } => (b * self.k as f64 + 1e-9).floor() as usize,
        }
    }

    /// Corruption ratio at the planned packet count.
    pub fn implied_c(&self) -> f64 {
        self.corruption_budget() as f64 / self.required_packets as f64
    }

    /// Acceptance threshold when `collected` packets are available.
    pub fn acceptance_threshold(&self, collected: usize) -> usize {
        self.threshold.max(collected.saturating_sub(self.corruption_budget()))
    }
}

/// Packets needed against `f` corruptions: `k + 2f + epsilon`.
pub fn plan_uniform(k: usize, f: usize, epsilon: usize) -> Result<DecodePlan, DecodeError> {
    if k == 0 {
        return Err(DecodeError::Plan("k must be positive".into()));
    }
    if f >= k {
        return Err(DecodeError::Plan(format!("f = {f} must be smaller than k = {k}")));
    }
    if epsilon == 0 {
        return Err(DecodeError::Plan("epsilon must be at least 1".into()));
    }
    Ok(DecodePlan {
        k,
        model: PlanModel::Uniform { f },
        epsilon,
        required_packets: k + 2 * f + epsilon,
        threshold: k + f + epsilon,
    })
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// `a - b - 1 - a * h(b / a)`; the failure probability of the selective plan
/// is at most `2^(-k * exponent)`.
pub fn selective_exponent(a: f64, b: f64) -> f64 {
    a - b - 1.0 - a * binary_entropy(b / a)
}

pub fn plan_selective(k: usize, b: f64) -> Result<DecodePlan, DecodeError> {
    plan_selective_with_step(k, b, DEFAULT_PLAN_STEP)
}

/// Smallest `a` on the grid `step, 2 step, ...` with `a > b` and a positive exponent.
pub fn plan_selective_with_step(k: usize, b: f64, step: f64) -> Result<DecodePlan, DecodeError> {
    if k == 0 {
        return Err(DecodeError::Plan("k must be positive".into()));
    }
    if !(b > 0.0 && b.is_finite()) {
        return Err(DecodeError::Plan(format!("b = {b} must be positive")));
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(DecodeError::Plan(format!("grid step {step} must be positive")));
    }
    let mut i = 1u64;
    let a = loop {
        let a = step * i as f64;
        if a > b && selective_exponent(a, b) > 0.0 {
            break a;
        }
        i += 1;
    };
    let kf = k as f64;
    Ok(DecodePlan {
        k,
        model: PlanModel::Selective { b, a },
        epsilon: 0,
        required_packets: ((a + b) * kf - 1e-9).ceil() as usize,
        threshold: (a * kf - 1e-9).ceil() as usize,
    })
}

/// `c <= 1/(2k) - 1/(2n)`, the regime in which the majority decoder can be
/// expected to find enough clean sets.
pub fn majority_applicable(c: CBound, k: usize, n: usize) -> bool {
    if n <= k || k == 0 {
        return false;
    }
    // num/den <= (n - k) / (2kn)
    (c.num() as u128) * 2 * (k as u128) * (n as u128) <= ((n - k) as u128) * (c.den() as u128)
}

/// Smallest integer `g > f (k + epsilon) / log2(base)`. The avoidance bound
/// `exp(-f (k + epsilon) / g)` then exceeds `base^(-1 / ln 2)`, which is
/// `1/e` for base 2.
pub fn g_for_base(k: usize, f: usize, epsilon: usize, base: f64) -> usize {
    let x = (f * (k + epsilon)) as f64 / base.log2();
    x.floor() as usize + 1
}

/// Lower bound `exp(-f (k + epsilon) / g)` on the chance that a random
/// `(k + epsilon)`-subset contains no corrupted packet.
pub fn p_clean_lower_bound(k: usize, f: usize, epsilon: usize, g: usize) -> f64 {
    if f == 0 {
        return 1.0;
    }
    (-((f * (k + epsilon)) as f64) / g as f64).exp()
}

/// Exact chance that a uniform `s`-subset of `n` packets avoids all `f` corrupted ones.
pub fn p_clean_exact(n: usize, f: usize, s: usize) -> f64 {
    if s + f > n {
        return 0.0;
    }
    (0..s).map(|i| (n - f - i) as f64 / (n - i) as f64).product()
}

/// `1 - 2^-epsilon`.
pub fn p_full_rank(epsilon: usize) -> f64 {
    1.0 - 0.5f64.powi(epsilon as i32)
}

/// `1 / (p_k p_epsilon)` using the lower bound for `p_k`.
pub fn expected_iterations(k: usize, f: usize, epsilon: usize, g: usize) -> f64 {
    1.0 / (p_clean_lower_bound(k, f, epsilon, g) * p_full_rank(epsilon))
}

/// Coefficients and payloads of a batch of coded packets.
#[derive(Debug, Clone)]
pub struct CodedSystem {
    coefficients: BitMatrix,
    /// `m x n`: row `l` is the right-hand side of block `l`.
    rhs: BitMatrix,
}

impl CodedSystem {
    pub fn from_packets(packets: &[Packet]) -> Result<Self, DecodeError> {
        let first = packets.first().ok_or(DecodeError::NoPackets)?;
        let (k, m) = (first.k(), first.m());
        if packets.iter().any(|p| p.k() != k || p.m() != m) {
            return Err(DecodeError::MixedDimensions { k, m });
        }
        let mut coefficients = BitMatrix::zeros(packets.len(), k);
        let mut rhs = BitMatrix::zeros(m, packets.len());
        for (i, p) in packets.iter().enumerate() {
            coefficients.row_words_mut(i).copy_from_slice(p.coding_vector().words());
            for l in p.payload().iter_ones() {
                rhs.set(l, i, true);
            }
        }
        Ok(Self { coefficients, rhs })
    }

    pub fn k(&self) -> usize {
        self.coefficients.cols()
    }

    pub fn m(&self) -> usize {
        self.rhs.rows()
    }

    pub fn len(&self) -> usize {
        self.coefficients.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coefficients(&self) -> &BitMatrix {
        &self.coefficients
    }

    pub fn rhs(&self, block: usize) -> BitVector {
        self.rhs.row(block)
    }

    /// The equations of one block.
    pub fn block(&self, block: usize) -> LinearSystem {
        LinearSystem::new(self.coefficients.clone(), self.rhs(block)).expect("shapes agree by construction")
    }

    /// Satisfied equation count of candidate `x` for `block`, given `ax = A x`.
    fn satisfied_with_product(&self, block: usize, ax: &BitVector) -> usize {
        let unsat: u32 = ax
            .words()
            .iter()
            .zip(self.rhs.row_words(block))
            .map(|(a, b)| (a ^ b).count_ones())
            .sum();
        self.len() - unsat as usize
    }

    pub fn satisfied(&self, block: usize, x: &BitVector) -> usize {
        let ax = self.coefficients.mul_vec(x).expect("candidate has k bits");
        self.satisfied_with_product(block, &ax)
    }

    /// Reduction of the rows in `rows` with every block's right-hand side.
    fn reduce_rows(&self, rows: &[usize]) -> RowReduction {
        let coeffs = self.coefficients.select_rows(rows);
        let mut rhs = BitMatrix::zeros(rows.len(), self.m());
        for (i, &r) in rows.iter().enumerate() {
            for l in 0..self.m() {
                if self.rhs.get(l, r) {
                    rhs.set(i, l, true);
                }
            }
        }
        RowReduction::new(coeffs, rhs).expect("shapes agree by construction")
    }

    fn check_block(&self, block: usize) -> Result<(), DecodeError> {
        if block >= self.m() {
            return Err(DecodeError::BlockOutOfRange { block, m: self.m() });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeFailure {
    InsufficientPackets { have: usize, need: usize },
    /// Fewer than `needed` disjoint full-rank sets could be formed.
    InsufficientIndependence { sets_formed: usize, needed: usize },
    /// The plurality value did not reach the `f + 1` multiplicity.
    NoMajority { block: usize, hint: BitVector, multiplicity: usize },
    /// Two distinct candidates reached the threshold.
    Ambiguous { block: usize },
    NoCandidate { block: usize },
    IterationBudget { iterations: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeResult {
    Recovered(Vec<BitVector>),
    Failed(DecodeFailure),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DecodeStats {
    /// Subsets tried (randomized) or 1 for single-pass decoders.
    pub iterations: u64,
    /// Satisfied equations of each recovered block.
    pub satisfied: Vec<usize>,
    pub sets_formed: usize,
    /// Candidate evaluations or eliminations performed.
    pub steps: u64,
    pub threshold: usize,
    /// Plurality multiplicity per block (majority decoder only).
    pub multiplicity: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub result: DecodeResult,
    pub stats: DecodeStats,
}

impl DecodeOutcome {
    pub fn blocks(&self) -> Option<&[BitVector]> {
        match &self.result {
            DecodeResult::Recovered(b) => Some(b),
            DecodeResult::Failed(_) => None,
        }
    }

    pub fn failure(&self) -> Option<&DecodeFailure> {
        match &self.result {
            DecodeResult::Recovered(_) => None,
            DecodeResult::Failed(f) => Some(f),
        }
    }

    pub fn is_recovered(&self) -> bool {
        matches!(self.result, DecodeResult::Recovered(_))
    }

    fn failed(failure: DecodeFailure, stats: DecodeStats) -> Self {
        Self {
            result: DecodeResult::Failed(failure),
            stats,
        }
    }
}

/// Splits `system` greedily into disjoint sets of `k` independent packets.
/// Packets dependent on the set being built are skipped.
pub fn disjoint_full_rank_sets(system: &CodedSystem, max_sets: usize) -> Vec<Vec<usize>> {
    let k = system.k();
    let mut sets = Vec::new();
    let mut current = Vec::new();
    let mut basis = XorBasis::new(k);
    for i in 0..system.len() {
        if sets.len() == max_sets {
            break;
        }
        if basis.insert(&system.coefficients.row(i)) {
            current.push(i);
            if basis.is_full() {
                sets.push(std::mem::take(&mut current));
                basis = XorBasis::new(k);
            }
        }
    }
    sets
}

/// Solves `2f + 1` disjoint full-rank sets and returns the plurality value
/// of each block, accepted only with multiplicity at least `f + 1`.
pub fn majority_decode_blocks(system: &CodedSystem, blocks: &[usize], f: usize) -> Result<DecodeOutcome, DecodeError> {
    for &l in blocks {
        system.check_block(l)?;
    }
    let needed = 2 * f + 1;
    let sets = disjoint_full_rank_sets(system, needed);
    let mut stats = DecodeStats {
        iterations: 1,
        sets_formed: sets.len(),
        steps: sets.len() as u64,
        threshold: f + 1,
        ..Default::default()
    };
    if sets.len() < needed {
        return Ok(DecodeOutcome::failed(
            DecodeFailure::InsufficientIndependence {
                sets_formed: sets.len(),
                needed,
            },
            stats,
        ));
    }
    let reductions: Vec<RowReduction> = sets.iter().map(|s| system.reduce_rows(s)).collect();
    let mut recovered = Vec::with_capacity(blocks.len());
    for &l in blocks {
        let mut tally: Vec<(BitVector, usize)> = Vec::new();
        for red in &reductions {
            let Solution::Unique(x) = red.solution(l) else {
                unreachable!("a set of k independent rows has a unique solution");
            };
            match tally.iter_mut().find(|(v, _)| *v == x) {
                Some((_, c)) => *c += 1,
                None => tally.push((x, 1)),
            }
        }
        // earliest value wins ties
        let (value, count) = tally.iter().fold(&tally[0], |best, t| if t.1 > best.1 { t } else { best }).clone();
        stats.multiplicity.push(count);
        if count < f + 1 {
            return Ok(DecodeOutcome::failed(
                DecodeFailure::NoMajority {
                    block: l,
                    hint: value,
                    multiplicity: count,
                },
                stats,
            ));
        }
        stats.satisfied.push(system.satisfied(l, &value));
        recovered.push(value);
    }
    Ok(DecodeOutcome {
        result: DecodeResult::Recovered(recovered),
        stats,
    })
}

pub fn majority_decode(system: &CodedSystem, block: usize, f: usize) -> Result<DecodeOutcome, DecodeError> {
    majority_decode_blocks(system, &[block], f)
}

/// Gray-code walk over all `2^k` candidates. Returns at most two candidates
/// whose residual weight is `<= max_unsat`, and the number evaluated.
fn gray_scan(columns: &BitMatrix, rhs: &[u64], max_unsat: u32) -> (Vec<u64>, u64) {
    macro_rules! fixed {
        ($w:literal) => {
            gray_scan_fixed::<$w>(columns, rhs, max_unsat)
        };
    }
    match rhs.len() {
        1 => fixed!(1),
        2 => fixed!(2),
        3 => fixed!(3),
        4 => fixed!(4),
        5 => fixed!(5),
        6 => fixed!(6),
        7 => fixed!(7),
        8 => fixed!(8),
        _ => gray_scan_dyn(columns, rhs, max_unsat),
    }
}

fn gray_scan_fixed<const W: usize>(columns: &BitMatrix, rhs: &[u64], max_unsat: u32) -> (Vec<u64>, u64) {
    let k = columns.rows();
    let cols: Vec<[u64; W]> = (0..k).map(|j| columns.row_words(j).try_into().unwrap()).collect();
    let mut res: [u64; W] = rhs.try_into().unwrap();
    let weight = |r: &[u64; W]| r.iter().map(|w| w.count_ones()).sum::<u32>();
    let mut found = Vec::new();
    if weight(&res) <= max_unsat {
        found.push(0);
    }
    let total = 1u64 << k;
    for i in 1..total {
        let col = &cols[i.trailing_zeros() as usize];
        for w in 0..W {
            res[w] ^= col[w];
        }
        if weight(&res) <= max_unsat {
            found.push(i ^ (i >> 1));
            if found.len() == 2 {
                return (found, i + 1);
            }
        }
    }
    (found, total)
}

fn gray_scan_dyn(columns: &BitMatrix, rhs: &[u64], max_unsat: u32) -> (Vec<u64>, u64) {
    let k = columns.rows();
    let mut res = rhs.to_vec();
    let weight = |r: &[u64]| r.iter().map(|w| w.count_ones()).sum::<u32>();
    let mut found = Vec::new();
    if weight(&res) <= max_unsat {
        found.push(0);
    }
    let total = 1u64 << k;
    for i in 1..total {
        let col = columns.row_words(i.trailing_zeros() as usize);
        for (r, c) in res.iter_mut().zip(col) {
            *r ^= c;
        }
        if weight(&res) <= max_unsat {
            found.push(i ^ (i >> 1));
            if found.len() == 2 {
                return (found, i + 1);
            }
        }
    }
    (found, total)
}

/// Exhaustive search with an explicit ceiling on `k`.
pub fn exhaustive_decode_blocks_with_ceiling(
    system: &CodedSystem,
    blocks: &[usize],
    threshold: usize,
    ceiling: usize,
) -> Result<DecodeOutcome, DecodeError> {
    let k = system.k();
    if k > ceiling || k > 62 {
        return Err(DecodeError::AboveCeiling { k, ceiling });
    }
    for &l in blocks {
        system.check_block(l)?;
    }
    let mut stats = DecodeStats {
        iterations: 1,
        threshold,
        ..Default::default()
    };
    if threshold > system.len() {
        return Ok(DecodeOutcome::failed(DecodeFailure::NoCandidate { block: blocks.first().copied().unwrap_or(0) }, stats));
    }
    let max_unsat = (system.len() - threshold) as u32;
    let columns = system.coefficients.transpose();
    let mut recovered = Vec::with_capacity(blocks.len());
    for &l in blocks {
        let (found, evaluated) = gray_scan(&columns, system.rhs.row_words(l), max_unsat);
        stats.steps += evaluated;
        match found.as_slice() {
            [] => return Ok(DecodeOutcome::failed(DecodeFailure::NoCandidate { block: l }, stats)),
            [x] => {
                let x = BitVector::from_words(k, vec![*x]);
                stats.satisfied.push(system.satisfied(l, &x));
                recovered.push(x);
            }
            _ => return Ok(DecodeOutcome::failed(DecodeFailure::Ambiguous { block: l }, stats)),
        }
    }
    Ok(DecodeOutcome {
        result: DecodeResult::Recovered(recovered),
        stats,
    })
}

pub fn exhaustive_decode_blocks(system: &CodedSystem, blocks: &[usize], threshold: usize) -> Result<DecodeOutcome, DecodeError> {
    exhaustive_decode_blocks_with_ceiling(system, blocks, threshold, DEFAULT_EXHAUSTIVE_CEILING)
}

/// Enumerates all `2^k` values of one block and returns the unique one
/// satisfying at least `threshold` equations.
pub fn exhaustive_decode(system: &CodedSystem, block: usize, threshold: usize) -> Result<DecodeOutcome, DecodeError> {
    exhaustive_decode_blocks(system, &[block], threshold)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizedParams {
    pub k: usize,
    pub f: usize,
    pub epsilon: usize,
    pub g: usize,
    /// Iteration cap; `None` means `64` times the expected count.
    pub cap: Option<u64>,
}

impl RandomizedParams {
    /// Parameters with `g` from the `log2(2)` rule.
    pub fn with_base_two(k: usize, f: usize, epsilon: usize) -> Self {
        Self {
            k,
            f,
            epsilon,
            g: g_for_base(k, f, epsilon, 2.0),
            cap: None,
        }
    }

    pub fn required_packets(&self) -> usize {
        self.g + self.k + self.f + self.epsilon
    }

    pub fn expected_iterations(&self) -> f64 {
        expected_iterations(self.k, self.f, self.epsilon, self.g)
    }

    pub fn iteration_cap(&self) -> u64 {
        self.cap
            .unwrap_or_else(|| (DEFAULT_CAP_FACTOR * self.expected_iterations()).ceil().min(u64::MAX as f64) as u64)
            .max(1)
    }
}

/// Repeatedly solves random `(k + epsilon)`-subsets until each block has a
/// solution satisfying at least `collected - f` of all collected equations.
pub fn randomized_decode_blocks<R: Rng + ?Sized>(
    system: &CodedSystem,
    blocks: &[usize],
    params: &RandomizedParams,
    rng: &mut R,
) -> Result<DecodeOutcome, DecodeError> {
    if params.k != system.k() {
        return Err(DecodeError::InvalidParameter(format!("k = {} but packets have k = {}", params.k, system.k())));
    }
    if params.epsilon == 0 {
        return Err(DecodeError::InvalidParameter("epsilon must be at least 1".into()));
    }
    for &l in blocks {
        system.check_block(l)?;
    }
    let n = system.len();
    let need = params.required_packets();
    let threshold = (params.k + params.f + params.epsilon).max(n.saturating_sub(params.f));
    let mut stats = DecodeStats {
        threshold,
        ..Default::default()
    };
    if n < need {
        return Ok(DecodeOutcome::failed(DecodeFailure::InsufficientPackets { have: n, need }, stats));
    }
    let subset = params.k + params.epsilon;
    let cap = params.iteration_cap();
    let mut pending: Vec<usize> = blocks.to_vec();
    let mut found: Vec<Option<(BitVector, usize)>> = vec![None; blocks.len()];
    while !pending.is_empty() {
        if stats.iterations == cap {
            return Ok(DecodeOutcome::failed(DecodeFailure::IterationBudget { iterations: stats.iterations }, stats));
        }
        stats.iterations += 1;
        let mut rows = sample(rng, n, subset).into_vec();
        rows.sort_unstable();
        let red = system.reduce_rows(&rows);
        stats.steps += 1;
        if red.rank() < params.k {
            continue;
        }
        pending.retain(|&l| {
            let Solution::Unique(x) = red.solution(l) else {
                return true;
            };
            let sat = system.satisfied(l, &x);
            if sat < threshold {
                return true;
            }
            let slot = blocks.iter().position(|&b| b == l).unwrap();
            found[slot] = Some((x, sat));
            false
        });
    }
    let (recovered, satisfied): (Vec<_>, Vec<_>) = found.into_iter().map(|s| s.unwrap()).unzip();
    stats.satisfied = satisfied;
    Ok(DecodeOutcome {
        result: DecodeResult::Recovered(recovered),
        stats,
    })
}

pub fn randomized_decode<R: Rng + ?Sized>(
    system: &CodedSystem,
    block: usize,
    params: &RandomizedParams,
    rng: &mut R,
) -> Result<DecodeOutcome, DecodeError> {
    randomized_decode_blocks(system, &[block], params, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Algorithm {
    Majority,
    Exhaustive,
    /// Randomized subsets with the given `g`.
    Randomized { g: usize },
}

/// Decodes every block of `packets` with one shared coefficient pass.
pub fn decode_all_blocks<R: Rng + ?Sized>(
    packets: &[Packet],
    plan: &DecodePlan,
    algorithm: Algorithm,
    rng: &mut R,
) -> Result<DecodeOutcome, DecodeError> {
    let system = CodedSystem::from_packets(packets)?;
    if system.k() != plan.k {
        return Err(DecodeError::InvalidParameter(format!("plan is for k = {} but packets have k = {}", plan.k, system.k())));
    }
    let blocks: Vec<usize> = (0..system.m()).collect();
    let f = plan.corruption_budget();
    match algorithm {
        Algorithm::Majority => majority_decode_blocks(&system, &blocks, f),
        Algorithm::Exhaustive => {
            if system.len() < plan.required_packets {
                return Ok(DecodeOutcome::failed(
                    DecodeFailure::InsufficientPackets {
                        have: system.len(),
                        need: plan.required_packets,
                    },
                    DecodeStats::default(),
                ));
            }
            exhaustive_decode_blocks(&system, &blocks, plan.acceptance_threshold(system.len()))
        }
        Algorithm::Randomized { g } => {
            let params = RandomizedParams {
                k: plan.k,
                f,
                epsilon: plan.epsilon.max(1),
                g,
                cap: None,
            };
            randomized_decode_blocks(&system, &blocks, &params, rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdaptiveOutcome {
    pub outcome: DecodeOutcome,
    /// Corruption count assumed by the round that ended the search.
    pub assumed_f: usize,
    pub packets_used: usize,
}

/// Decoding when `f` is unknown: starts from `f = 0` and doubles the assumed
/// count, fetching more packets each round, until a block set is accepted or
/// `f` reaches `k`.
///
/// This is a practical fallback only. Nothing bounds its error probability:
/// an adversary that corrupts more than the final assumed `f` can still steer
/// acceptance.
pub fn adaptive_decode<F, R>(k: usize, epsilon: usize, mut fetch: F, rng: &mut R) -> Result<AdaptiveOutcome, DecodeError>
where
    F: FnMut(usize) -> Vec<Packet>,
    R: Rng + ?Sized,
{
    let mut packets: Vec<Packet> = Vec::new();
    let mut f = 0;
    loop {
        let plan = plan_uniform(k, f, epsilon)?;
        let need = if k <= DEFAULT_EXHAUSTIVE_CEILING {
            plan.required_packets
        } else {
            RandomizedParams::with_base_two(k, f, epsilon).required_packets()
        };
        if packets.len() < need {
            let more = fetch(need - packets.len());
            if more.is_empty() {
                return Err(DecodeError::InvalidParameter("packet source exhausted".into()));
            }
            packets.extend(more);
            continue;
        }
        let algorithm = if k <= DEFAULT_EXHAUSTIVE_CEILING {
            Algorithm::Exhaustive
        } else {
            Algorithm::Randomized { g: g_for_base(k, f, epsilon, 2.0) }
        };
        let outcome = decode_all_blocks(&packets, &plan, algorithm, rng)?;
        let next = if f == 0 { 1 } else { 2 * f };
        if outcome.is_recovered() || next >= k {
            return Ok(AdaptiveOutcome {
                outcome,
                assumed_f: f,
                packets_used: packets.len(),
            });
        }
        f = next;
    }
}

/// Views coded packets as LT packets over `k` bit-column symbols: symbol `j`
/// holds bit `j` of every block, and a packet's payload is the XOR of the
/// symbols in the support of its coding vector.
pub fn coded_as_lt(packets: &[Packet]) -> Vec<LtPacket> {
    packets
        .iter()
        .map(|p| LtPacket::new(p.coding_vector().iter_ones().collect(), p.payload().clone()))
        .collect()
}

/// Inverse of the bit-column view: `m` blocks of `k` bits from `k` symbols of `m` bits.
pub fn columns_to_blocks(symbols: &[BitVector], m: usize) -> Vec<BitVector> {
    (0..m).map(|l| BitVector::from_bits(symbols.iter().map(|s| s.get(l)))).collect()
}

/// Belief propagation over coded packets, for comparison with the
/// corruption-resilient decoders.
pub fn bp_decode_coded(packets: &[Packet]) -> Result<(BpOutcome, Option<Vec<BitVector>>), DecodeError> {
    let first = packets.first().ok_or(DecodeError::NoPackets)?;
    let (k, m) = (first.k(), first.m());
    if packets.iter().any(|p| p.k() != k || p.m() != m) {
        return Err(DecodeError::MixedDimensions { k, m });
    }
    let outcome = bp_decode(k, &coded_as_lt(packets));
    let blocks = match &outcome.result {
        crate::lt::BpResult::Decoded(symbols) => Some(columns_to_blocks(symbols, m)),
        _ => None,
    };
    Ok((outcome, blocks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversary::{transmit, AdversarySpec, AttackStrategy, FlipMask, Knowledge, Selection, VictimPolicy};
    use crate::coding::{CodingDistribution, Encoder, HeaderForm};
    use crate::gf2::rank;
    use crate::rng::{rng_from_seed, CodeRng};
    use proptest::prelude::*;

    fn encoder(k: usize, m: usize, seed: u64) -> (Vec<BitVector>, Encoder) {
        let mut rng = rng_from_seed(seed ^ 0xABCD);
        let blocks: Vec<BitVector> = (0..m).map(|_| BitVector::random_uniform(k, &mut rng)).collect();
        let enc = Encoder::new(&BitVector::concat(&blocks), m, CodingDistribution::Uniform, HeaderForm::Dense, seed).unwrap();
        assert_eq!(enc.blocks(), &blocks[..]);
        (blocks, enc)
    }

    fn flip_at(packets: &mut [Packet], positions: &[usize]) {
        let mut rng = rng_from_seed(0);
        for &i in positions {
            crate::adversary::Corruptible::flip_payload(&mut packets[i], FlipMask::Complement, &mut rng);
        }
    }

    #[test]
    fn uniform_plan_examples() {
        let p = plan_uniform(12, 0, 4).unwrap();
        assert_eq!((p.required_packets, p.threshold), (16, 16));
        let p = plan_uniform(12, 3, 4).unwrap();
        assert_eq!((p.required_packets, p.threshold), (22, 19));
        assert!(plan_uniform(12, 12, 4).is_err());
        assert!(plan_uniform(12, 3, 0).is_err());
        assert_eq!(p.acceptance_threshold(22), 19);
        assert_eq!(p.acceptance_threshold(30), 27);
    }

    #[test]
    fn selective_plan_and_exponent() {
        // independent evaluation of a - b - 1 - a h(b/a) with natural logs
        let oracle = |a: f64, b: f64| {
            let p = b / a;
            let h = -(p * p.ln() + (1.0 - p) * (1.0 - p).ln()) / std::f64::consts::LN_2;
            a - b - 1.0 - a * h
        };
        assert!((selective_exponent(7.0, 1.0) - oracle(7.0, 1.0)).abs() < 1e-12);
        assert!((selective_exponent(7.0, 1.0) - 0.858).abs() < 1e-3);
        let plan = plan_selective(24, 1.0).unwrap();
        assert_eq!(plan.model, PlanModel::Selective { b: 1.0, a: 6.0 });
        assert!(selective_exponent(6.0, 1.0) > 0.0);
        assert!(selective_exponent(5.5, 1.0) <= 0.0);
        assert_eq!((plan.required_packets, plan.threshold, plan.corruption_budget()), (168, 144, 24));
        assert!(plan_selective(10, 0.0).is_err());
    }

    #[test]
    fn exponent_monotone_on_grid() {
        for b in [0.25, 0.5, 1.0, 2.0, 3.5] {
            let grid: Vec<f64> = (1..200).map(|i| 0.5 * i as f64).filter(|&a| a > b).collect();
            // the derivative is 1 + log2(1 - b/a): increasing only once a >= 2b,
            // and on (b, 2b] the exponent stays below -1 so the planner never stops there
            assert!(grid.iter().filter(|&&a| a <= 2.0 * b).all(|&a| selective_exponent(a, b) < -1.0 + 1e-12));
            let upper: Vec<f64> = grid.iter().copied().filter(|&a| a >= 2.0 * b).collect();
            for w in upper.windows(2) {
                assert!(selective_exponent(w[1], b) > selective_exponent(w[0], b), "b = {b}, a = {}", w[1]);
            }
            let plan = plan_selective(16, b).unwrap();
            let PlanModel::Selective { a, .. } = plan.model else { unreachable!() };
            assert!(a > b && selective_exponent(a, b) > 0.0);
            assert!(grid.iter().take_while(|&&x| x < a).all(|&x| selective_exponent(x, b) <= 0.0));
        }
    }

    #[test]
    fn majority_applicability() {
        // 1/(2k) - 1/(2n) at k = 16, n = 80 is 1/40
        assert!(majority_applicable(CBound::new(1, 40).unwrap(), 16, 80));
        assert!(!majority_applicable(CBound::new(1, 39).unwrap(), 16, 80));
        assert!(!majority_applicable(CBound::new(1, 1000).unwrap(), 16, 16));
    }

    #[test]
    fn randomized_parameter_rules() {
        assert_eq!(g_for_base(64, 4, 8, 2.0), 289);
        assert_eq!(g_for_base(64, 0, 8, 2.0), 1);
        let pk = p_clean_lower_bound(64, 4, 8, 289);
        // with log2 in the rule the bound guarantees 1/e rather than 1/2
        assert!(pk > (-1.0f64).exp());
        // the exact avoidance probability is at least the bound
        assert!(p_clean_exact(289 + 64 + 4 + 8, 4, 72) >= pk);
        assert!((p_full_rank(8) - 255.0 / 256.0).abs() < 1e-15);
        assert!((expected_iterations(64, 4, 8, 289) - 1.0 / (pk * p_full_rank(8))).abs() < 1e-12);
    }

    #[test]
    fn majority_f0_is_plain_solve() {
        let (blocks, mut enc) = encoder(10, 1, 1);
        let packets = enc.take(30);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let out = majority_decode(&sys, 0, 0).unwrap();
        assert_eq!(out.blocks().unwrap(), &blocks[..]);
        assert_eq!(out.stats.sets_formed, 1);
    }

    #[test]
    fn majority_with_two_poisoned_sets() {
        for seed in 0..20 {
            let (blocks, mut enc) = encoder(16, 2, seed);
            let mut packets = enc.take(120);
            let sys = CodedSystem::from_packets(&packets).unwrap();
            let sets = disjoint_full_rank_sets(&sys, 5);
            assert_eq!(sets.len(), 5);
            flip_at(&mut packets, &[sets[1][3], sets[4][0], sets[4][9]]);
            let sys = CodedSystem::from_packets(&packets).unwrap();
            let out = majority_decode_blocks(&sys, &[0, 1], 2).unwrap();
            assert_eq!(out.blocks().unwrap(), &blocks[..]);
            assert!(out.stats.multiplicity.iter().all(|&c| c >= 3));
        }
    }

    #[test]
    fn majority_reports_missing_majority() {
        let (blocks, mut enc) = encoder(16, 1, 3);
        let mut packets = enc.take(120);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let sets = disjoint_full_rank_sets(&sys, 5);
        flip_at(&mut packets, &[sets[0][0], sets[2][1], sets[3][2]]);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let out = majority_decode(&sys, 0, 2).unwrap();
        match out.failure() {
            Some(DecodeFailure::NoMajority { hint, multiplicity, .. }) => {
                assert_eq!(*multiplicity, 2);
                assert_eq!(hint, &blocks[0]);
            }
            other => panic!("{other:?}"),
        }
        let out = majority_decode(&CodedSystem::from_packets(&packets[..40]).unwrap(), 0, 2).unwrap();
        assert!(matches!(out.failure(), Some(DecodeFailure::InsufficientIndependence { needed: 5, .. })));
    }

    #[test]
    fn exhaustive_clean_solve() {
        let (blocks, mut enc) = encoder(10, 1, 4);
        let packets = enc.take(14);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        assert_eq!(rank(sys.coefficients()), 10);
        let out = exhaustive_decode(&sys, 0, 14).unwrap();
        assert_eq!(out.blocks().unwrap(), &blocks[..]);
        assert_eq!(out.stats.steps, 1 << 10);
    }

    #[test]
    fn exhaustive_matches_brute_force_count() {
        // naive oracle: count, for every candidate, how many equations hold
        let (_, mut enc) = encoder(8, 1, 5);
        let mut packets = enc.take(20);
        flip_at(&mut packets, &[2, 7, 11]);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        for threshold in [14, 16, 17, 18, 20] {
            let passing: Vec<u64> = (0..256u64)
                .filter(|&c| {
                    let x = BitVector::from_words(8, vec![c]);
                    let ok = (0..20).filter(|&i| packets[i].coding_vector().dot(&x) == packets[i].payload().get(0)).count();
                    ok >= threshold
                })
                .collect();
            let out = exhaustive_decode(&sys, 0, threshold).unwrap();
            match passing.len() {
                0 => assert_eq!(out.failure(), Some(&DecodeFailure::NoCandidate { block: 0 })),
                1 => assert_eq!(out.blocks().unwrap()[0].words()[0], passing[0]),
                _ => assert_eq!(out.failure(), Some(&DecodeFailure::Ambiguous { block: 0 })),
            }
        }
    }

    #[test]
    fn exhaustive_small_instance_is_sound() {
        let plan = plan_uniform(12, 3, 4).unwrap();
        let bound = CBound::new(3, 22).unwrap();
        for seed in 0..50 {
            let (blocks, mut enc) = encoder(12, 1, seed);
            let spec = AdversarySpec::new(Selection::Uniform, Knowledge::Offline, bound, AttackStrategy::flip());
            let delivered = transmit(enc.take(22), &spec, &mut rng_from_seed(seed));
            let packets: Vec<Packet> = delivered.into_iter().map(|d| d.packet).collect();
            let sys = CodedSystem::from_packets(&packets).unwrap();
            assert!(sys.satisfied(0, &blocks[0]) >= 19);
            let out = exhaustive_decode(&sys, 0, plan.threshold).unwrap();
            match out.blocks() {
                Some(b) => assert_eq!(b[0], blocks[0]),
                None => assert_eq!(out.failure(), Some(&DecodeFailure::Ambiguous { block: 0 })),
            }
        }
    }

    #[test]
    fn exhaustive_ceiling() {
        let (_, mut enc) = encoder(25, 1, 6);
        let sys = CodedSystem::from_packets(&enc.take(30)).unwrap();
        assert!(matches!(exhaustive_decode(&sys, 0, 30), Err(DecodeError::AboveCeiling { k: 25, .. })));
    }

    #[test]
    fn wide_systems_use_the_dynamic_scan() {
        let (blocks, mut enc) = encoder(6, 1, 7);
        let mut packets = enc.take(600);
        flip_at(&mut packets, &[0, 100, 599]);
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let out = exhaustive_decode(&sys, 0, 597).unwrap();
        assert_eq!(out.blocks().unwrap(), &blocks[..]);
    }

    #[test]
    fn randomized_f0_accepts_first_full_rank_subset() {
        let (blocks, mut enc) = encoder(16, 1, 8);
        let params = RandomizedParams::with_base_two(16, 0, 6);
        let packets = enc.take(params.required_packets());
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let out = randomized_decode(&sys, 0, &params, &mut rng_from_seed(1)).unwrap();
        assert_eq!(out.blocks().unwrap(), &blocks[..]);
        assert!(out.stats.iterations >= 1);
    }

    #[test]
    fn randomized_reports_iteration_budget() {
        // every packet corrupted: no subset can pass the acceptance test
        let (_, mut enc) = encoder(8, 1, 9);
        let mut packets = enc.take(40);
        flip_at(&mut packets, &(0..40).collect::<Vec<_>>());
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let params = RandomizedParams { k: 8, f: 2, epsilon: 4, g: 4, cap: Some(50) };
        let out = randomized_decode(&sys, 0, &params, &mut rng_from_seed(2)).unwrap();
        assert_eq!(out.failure(), Some(&DecodeFailure::IterationBudget { iterations: 50 }));
        let params = RandomizedParams { k: 8, f: 2, epsilon: 4, g: 40, cap: None };
        let out = randomized_decode(&sys, 0, &params, &mut rng_from_seed(2)).unwrap();
        assert!(matches!(out.failure(), Some(DecodeFailure::InsufficientPackets { have: 40, need: 54 })));
    }

    #[test]
    fn exhaustive_and_randomized_agree() {
        for k in [8, 10] {
            for seed in 0..30 {
                let (blocks, mut enc) = encoder(k, 1, seed);
                let params = RandomizedParams::with_base_two(k, 2, 4);
                let n = params.required_packets();
                let mut packets = enc.take(n);
                let mut rng = rng_from_seed(seed);
                let victims = sample(&mut rng, n, 2).into_vec();
                flip_at(&mut packets, &victims);
                let sys = CodedSystem::from_packets(&packets).unwrap();
                let ex = exhaustive_decode(&sys, 0, n - 2).unwrap();
                let rd = randomized_decode(&sys, 0, &params, &mut rng).unwrap();
                if let (Some(a), Some(b)) = (ex.blocks(), rd.blocks()) {
                    assert_eq!(a, b);
                    assert_eq!(a, &blocks[..]);
                }
                assert!(ex.is_recovered());
            }
        }
    }

    #[test]
    fn all_blocks_clean() {
        let (blocks, mut enc) = encoder(12, 8, 10);
        let packets = enc.take(26);
        let plan = plan_uniform(12, 2, 10).unwrap();
        let mut rng = rng_from_seed(3);
        for algorithm in [Algorithm::Exhaustive, Algorithm::Randomized { g: 30 }, Algorithm::Majority] {
            let packets = if algorithm == Algorithm::Majority { enc.take(100) } else { packets.clone() };
            let need = match algorithm {
                Algorithm::Randomized { g } => g + 12 + 2 + 10,
                _ => 0,
            };
            let packets = if packets.len() < need { [packets, enc.take(need)].concat() } else { packets };
            let out = decode_all_blocks(&packets, &plan, algorithm, &mut rng).unwrap();
            assert_eq!(out.blocks().unwrap(), &blocks[..], "{algorithm:?}");
        }
    }

    #[test]
    fn single_block_is_the_m1_case() {
        let (_, mut enc) = encoder(10, 1, 11);
        let mut packets = enc.take(20);
        flip_at(&mut packets, &[4]);
        let plan = plan_uniform(10, 1, 8).unwrap();
        let sys = CodedSystem::from_packets(&packets).unwrap();
        let a = decode_all_blocks(&packets, &plan, Algorithm::Exhaustive, &mut rng_from_seed(0)).unwrap();
        let b = exhaustive_decode(&sys, 0, 19).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn corrupted_multi_block_matches_per_block() {
        let (blocks, mut enc) = encoder(10, 6, 12);
        let packets = enc.take(40);
        let spec = AdversarySpec::new(
            Selection::Selective,
            Knowledge::Offline,
            CBound::new(1, 10).unwrap(),
            AttackStrategy::PayloadFlip { mask: FlipMask::RandomSubset, policy: VictimPolicy::Heaviest },
        );
        let delivered = transmit(packets, &spec, &mut rng_from_seed(5));
        let packets: Vec<Packet> = delivered.into_iter().map(|d| d.packet).collect();
        let plan = plan_uniform(10, 4, 22).unwrap();
        let all = decode_all_blocks(&packets, &plan, Algorithm::Exhaustive, &mut rng_from_seed(0)).unwrap();
        let sys = CodedSystem::from_packets(&packets).unwrap();
        for l in 0..6 {
            let one = exhaustive_decode(&sys, l, 36).unwrap();
            assert_eq!(one.blocks().unwrap()[0], all.blocks().unwrap()[l]);
            assert_eq!(one.blocks().unwrap()[0], blocks[l]);
        }
    }

    #[test]
    fn adaptive_escalates_until_accepted() {
        let (blocks, mut enc) = encoder(10, 1, 13);
        let mut served = 0;
        let mut rng = rng_from_seed(4);
        let out = adaptive_decode(
            10,
            12,
            |count| {
                let mut batch = enc.take(count);
                for (i, p) in batch.iter_mut().enumerate() {
                    if [0, 7].contains(&(served + i)) {
                        crate::adversary::Corruptible::flip_payload(p, FlipMask::Complement, &mut rng_from_seed(0));
                    }
                }
                served += count;
                batch
            },
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.outcome.blocks().unwrap(), &blocks[..]);
        assert_eq!(out.assumed_f, 2);
    }

    #[test]
    fn bp_over_coded_packets() {
        let (blocks, mut enc) = encoder(8, 3, 14);
        let mut packets = enc.take(200);
        // prepend unit packets so peeling always starts
        let mut units: Vec<Packet> = (0..8)
            .map(|j| {
                let r = BitVector::unit(8, j);
                Packet::from_vector(r, &blocks, HeaderForm::Dense).unwrap()
            })
            .collect();
        units.append(&mut packets);
        let (_, decoded) = bp_decode_coded(&units).unwrap();
        assert_eq!(decoded.unwrap(), blocks);
        let _: CodeRng = rng_from_seed(0);
    }

    proptest! {
        #[test]
        fn implied_c_below_one_third(k in 1usize..200, f in 0usize..200, eps in 1usize..50) {
            prop_assume!(f < k);
            let plan = plan_uniform(k, f, eps).unwrap();
            prop_assert!(plan.implied_c() < 1.0 / 3.0);
            prop_assert_eq!(plan.required_packets, k + 2 * f + eps);
        }

        #[test]
        fn accepted_blocks_meet_threshold(seed in any::<u64>(), f in 0usize..3) {
            let (blocks, mut enc) = encoder(8, 2, seed);
            let plan = plan_uniform(8, f, 8).unwrap();
            let mut packets = enc.take(plan.required_packets);
            let victims = sample(&mut rng_from_seed(seed), packets.len(), f).into_vec();
            flip_at(&mut packets, &victims);
            let out = decode_all_blocks(&packets, &plan, Algorithm::Exhaustive, &mut rng_from_seed(seed)).unwrap();
            if let Some(b) = out.blocks() {
                prop_assert_eq!(b, &blocks[..]);
                prop_assert!(out.stats.satisfied.iter().all(|&s| s >= plan.threshold));
            }
        }
    }
}
