//! The c-bounded Byzantine channel.
//!
//! An adversary sits between encoder and receiver and may alter the content
//! of delivered packets. It never drops, injects or reorders them. How many
//! packets it may touch is governed by a [`CBound`]; which ones it picks
//! depends on whether it is uniform or selective, and online or offline.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::coding::Packet;
use crate::gf2::{BitVector, XorBasis};
use crate::lt::LtPacket;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AdversaryError {
    #[error("invalid corruption bound {0:?}: expected a rational in (0, 1/3] such as 1/3 or 0.2")]
    InvalidBound(String),
    #[error("invalid adversary spec {0:?}: expected uniform|selective:online|offline")]
    InvalidSpec(String),
    #[error("feasibility is only defined for the odd-packets and vanishing-symbol strategies")]
    UnsupportedStrategy,
}

/// Corruption ratio `c = num / den` with `0 < c <= 1/3`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CBound {
    num: u64,
    den: u64,
}

impl CBound {
    pub fn new(num: u64, den: u64) -> Result<Self, AdversaryError> {
        if den == 0 || num == 0 || num.checked_mul(3).is_none_or(|n3| n3 > den) {
            return Err(AdversaryError::InvalidBound(format!("{num}/{den}")));
        }
        Ok(Self { num, den })
    }

    pub fn one_third() -> Self {
        Self { num: 1, den: 3 }
    }

    pub fn num(&self) -> u64 {
        self.num
    }

    pub fn den(&self) -> u64 {
        self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `floor(c * i)`.
    pub fn budget(&self, i: usize) -> usize {
        ((self.num as u128 * i as u128) / self.den as u128) as usize
    }
}

impl FromStr for CBound {
    type Err = AdversaryError;

    /// Accepts `p/q` or a decimal such as `0.2`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || AdversaryError::InvalidBound(s.to_string());
        let s = s.trim();
        if let Some((n, d)) = s.split_once('/') {
            let n = n.trim().parse().map_err(|_| bad())?;
            let d = d.trim().parse().map_err(|_| bad())?;
            return Self::new(n, d).map_err(|_| bad());
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int.checked_mul(den).and_then(|x| x.checked_add(frac)).ok_or_else(bad)?;
        Self::new(num, den).map_err(|_| bad())
    }
}

impl fmt::Display for CBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Knowledge {
    /// Decides per packet, seeing only packets already delivered.
    Online,
    /// Sees the whole delivered stream before choosing.
    Offline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Uniform,
    Selective,
}

/// Which packet sets the bound applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundReading {
    /// Every prefix of the arrival order of length `i >= 4` holds at most
    /// `floor(c * i)` corrupted packets.
    #[default]
    Prefix,
    /// Only the complete delivered stream is constrained.
    FinalSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FlipMask {
    /// Complement every payload bit.
    #[default]
    Complement,
    /// Flip a uniformly random nonempty subset of payload bits.
    RandomSubset,
}

/// Victim ranking used by selective payload-flip adversaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VictimPolicy {
    Earliest,
    Latest,
    Heaviest,
    Lightest,
    /// Packets touching one randomly chosen coordinate.
    CoordinateFocus,
    /// Packets with `<r, d> = 1` for a random nonzero `d`; flipping exactly
    /// those makes `x + d` agree with every corrupted equation.
    HyperplaneAligned,
    /// Packets that extend the span of the ones before them.
    BasisFirst,
    Random,
}

impl VictimPolicy {
    pub const ALL: [VictimPolicy; 8] = [
        VictimPolicy::Earliest,
        VictimPolicy::Latest,
        VictimPolicy::Heaviest,
        VictimPolicy::Lightest,
        VictimPolicy::CoordinateFocus,
        VictimPolicy::HyperplaneAligned,
        VictimPolicy::BasisFirst,
        VictimPolicy::Random,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            VictimPolicy::Earliest => "earliest",
            VictimPolicy::Latest => "latest",
            VictimPolicy::Heaviest => "heaviest",
            VictimPolicy::Lightest => "lightest",
            VictimPolicy::CoordinateFocus => "coordinate",
            VictimPolicy::HyperplaneAligned => "hyperplane",
            VictimPolicy::BasisFirst => "basis",
            VictimPolicy::Random => "random",
        }
    }
}

impl FromStr for VictimPolicy {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| AdversaryError::InvalidSpec(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStrategy {
    PayloadFlip { mask: FlipMask, policy: VictimPolicy },
    VanishingSymbol { target: usize },
    OddPackets,
}

impl AttackStrategy {
    pub fn flip() -> Self {
        AttackStrategy::PayloadFlip {
            mask: FlipMask::Complement,
            policy: VictimPolicy::Earliest,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AdversarySpec {
    pub knowledge: Knowledge,
    pub selection: Selection,
    pub bound: CBound,
    pub reading: BoundReading,
    pub strategy: AttackStrategy,
}

impl AdversarySpec {
    pub fn new(selection: Selection, knowledge: Knowledge, bound: CBound, strategy: AttackStrategy) -> Self {
        Self {
            knowledge,
            selection,
            bound,
            reading: BoundReading::Prefix,
            strategy,
        }
    }

    pub fn with_reading(mut self, reading: BoundReading) -> Self {
        self.reading = reading;
        self
    }
}

/// Parses `uniform:online`, `selective:offline` and so on.
pub fn parse_adversary_kind(s: &str) -> Result<(Selection, Knowledge), AdversaryError> {
    let bad = || AdversaryError::InvalidSpec(s.to_string());
    let (sel, know) = s.split_once(':').ok_or_else(bad)?;
    let sel = match sel {
        "uniform" => Selection::Uniform,
        "selective" => Selection::Selective,
        _ => return Err(bad()),
    };
    let know = match know {
        "online" => Knowledge::Online,
        "offline" => Knowledge::Offline,
        _ => return Err(bad()),
    };
    Ok((sel, know))
}

/// What an adversary can see of and do to a packet.
pub trait Corruptible: Clone {
    /// Number of symbols (coordinates) the packet ranges over.
    fn width(&self) -> usize;
    /// Symbols the header says were combined into the packet, ascending.
    fn support(&self) -> Vec<usize>;
    fn degree(&self) -> usize {
        self.support().len()
    }
    /// Removes `symbol` from the header. Returns whether anything changed.
    fn remove_symbol(&mut self, symbol: usize) -> bool;
    /// Flips payload bits per `mask`. Returns whether anything changed.
    fn flip_payload<R: Rng + ?Sized>(&mut self, mask: FlipMask, rng: &mut R) -> bool;
}

fn flip_bits<R: Rng + ?Sized>(v: &mut BitVector, mask: FlipMask, rng: &mut R) -> bool {
    if v.is_empty() {
        return false;
    }
    match mask {
        FlipMask::Complement => *v = v.complement(),
        FlipMask::RandomSubset => {
            let mut m = BitVector::zeros(v.len());
            while m.is_zero() {
                m = BitVector::random_uniform(v.len(), rng);
            }
            v.xor_assign(&m);
        }
    }
    true
}

impl Corruptible for LtPacket {
    fn width(&self) -> usize {
        self.neighbors().last().map_or(0, |s| s + 1)
    }

    fn support(&self) -> Vec<usize> {
        self.neighbors().to_vec()
    }

    fn degree(&self) -> usize {
        LtPacket::degree(self)
    }

    fn remove_symbol(&mut self, symbol: usize) -> bool {
        self.remove_neighbor(symbol)
    }

    fn flip_payload<R: Rng + ?Sized>(&mut self, mask: FlipMask, rng: &mut R) -> bool {
        flip_bits(self.value_mut(), mask, rng)
    }
}

impl Corruptible for Packet {
    fn width(&self) -> usize {
        self.k()
    }

    fn support(&self) -> Vec<usize> {
        self.coding_vector().iter_ones().collect()
    }

    fn degree(&self) -> usize {
        self.coding_vector().count_ones()
    }

    fn remove_symbol(&mut self, symbol: usize) -> bool {
        if symbol >= self.k() || !self.coding_vector().get(symbol) {
            return false;
        }
        let mut r = self.coding_vector().clone();
        r.set(symbol, false);
        self.set_coding_vector(r);
        true
    }

    fn flip_payload<R: Rng + ?Sized>(&mut self, mask: FlipMask, rng: &mut R) -> bool {
        flip_bits(self.payload_mut(), mask, rng)
    }
}

/// A delivered packet with the harness-side truth about it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivered<P> {
    pub packet: P,
    pub corrupted: bool,
}

pub fn corrupted_count<P>(stream: &[Delivered<P>]) -> usize {
    stream.iter().filter(|d| d.corrupted).count()
}

/// Largest corrupted count over all prefixes, relative to `bound`: returns
/// true iff every prefix of length `i >= 4` respects `floor(c * i)`.
pub fn respects_prefix_bound(flags: &[bool], bound: CBound) -> bool {
    let mut count = 0;
    flags.iter().enumerate().all(|(i, &f)| {
        count += usize::from(f);
        i + 1 < 4 || count <= bound.budget(i + 1)
    })
}

struct Gate {
    bound: CBound,
    reading: BoundReading,
    n: usize,
    used: usize,
}

impl Gate {
    fn allows(&self, pos: usize) -> bool {
        let cap = match self.reading {
            BoundReading::Prefix => self.bound.budget((pos + 1).max(4)),
            BoundReading::FinalSet => self.bound.budget(self.n),
        };
        self.used < cap
    }
}

/// Applies the strategy's edit to one packet.
fn apply_edit<P: Corruptible, R: Rng + ?Sized>(p: &mut P, strategy: &AttackStrategy, rng: &mut R) -> bool {
    match *strategy {
        AttackStrategy::PayloadFlip { mask, .. } => p.flip_payload(mask, rng),
        AttackStrategy::OddPackets => p.flip_payload(FlipMask::Complement, rng),
        AttackStrategy::VanishingSymbol { target } => p.remove_symbol(target),
    }
}

/// Policy state resolved against a concrete stream.
enum Chooser {
    Odd,
    Contains(usize),
    Flip(VictimPolicy, Option<BitVector>, Option<usize>),
}

impl Chooser {
    fn new<P: Corruptible, R: Rng + ?Sized>(stream: &[P], strategy: &AttackStrategy, rng: &mut R) -> Self {
        match *strategy {
            AttackStrategy::OddPackets => Chooser::Odd,
            AttackStrategy::VanishingSymbol { target } => Chooser::Contains(target),
            AttackStrategy::PayloadFlip { policy, .. } => {
                let width = stream.iter().map(P::width).max().unwrap_or(0);
                let (dir, coord) = match policy {
                    VictimPolicy::HyperplaneAligned if width > 0 => {
                        let mut d = BitVector::zeros(width);
                        while d.is_zero() {
                            d = BitVector::random_uniform(width, rng);
                        }
                        (Some(d), None)
                    }
                    VictimPolicy::CoordinateFocus if width > 0 => (None, Some(rng.gen_range(0..width))),
                    _ => (None, None),
                };
                Chooser::Flip(policy, dir, coord)
            }
        }
    }

    fn predicate<P: Corruptible>(&self, p: &P) -> bool {
        match self {
            Chooser::Odd => p.degree() % 2 == 1,
            Chooser::Contains(t) => p.support().binary_search(t).is_ok(),
            Chooser::Flip(VictimPolicy::HyperplaneAligned, Some(d), _) => {
                p.support().iter().filter(|&&s| s < d.len() && d.get(s)).count() % 2 == 1
            }
            Chooser::Flip(VictimPolicy::CoordinateFocus, _, Some(j)) => p.support().binary_search(j).is_ok(),
            Chooser::Flip(..) => true,
        }
    }

    /// Offline preference order over the whole stream.
    fn ranking<P: Corruptible, R: Rng + ?Sized>(&self, stream: &[P], rng: &mut R) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..stream.len()).filter(|&i| self.predicate(&stream[i])).collect();
        if let Chooser::Flip(policy, ..) = self {
            match policy {
                VictimPolicy::Latest => idx.reverse(),
                VictimPolicy::Heaviest => idx.sort_by_key(|&i| std::cmp::Reverse(stream[i].degree())),
                VictimPolicy::Lightest => idx.sort_by_key(|&i| stream[i].degree()),
                VictimPolicy::Random => idx.shuffle(rng),
                VictimPolicy::BasisFirst => {
                    let width = stream.iter().map(P::width).max().unwrap_or(0);
                    let mut basis = XorBasis::new(width);
                    let (mut first, mut rest) = (Vec::new(), Vec::new());
                    for i in idx {
                        if basis.insert(&support_vector(&stream[i], width)) {
                            first.push(i);
                        } else {
                            rest.push(i);
                        }
                    }
                    first.extend(rest);
                    idx = first;
                }
                _ => {}
            }
        }
        idx
    }
}

fn support_vector<P: Corruptible>(p: &P, width: usize) -> BitVector {
    let mut v = BitVector::zeros(width);
    for s in p.support() {
        v.set(s, true);
    }
    v
}

/// Online state for selective adversaries that only see the past.
struct OnlineView {
    basis: XorBasis,
    degree_sum: usize,
    seen: usize,
}

impl OnlineView {
    fn wants<P: Corruptible, R: Rng + ?Sized>(&mut self, chooser: &Chooser, p: &P, c: f64, rng: &mut R) -> bool {
        let mean = if self.seen == 0 {
            p.degree() as f64
        } else {
            self.degree_sum as f64 / self.seen as f64
        };
        let want = chooser.predicate(p)
            && match chooser {
                Chooser::Flip(VictimPolicy::Heaviest, ..) => p.degree() as f64 >= mean,
                Chooser::Flip(VictimPolicy::Lightest, ..) => p.degree() as f64 <= mean,
                Chooser::Flip(VictimPolicy::Random, ..) => rng.gen_bool(c),
                Chooser::Flip(VictimPolicy::BasisFirst, ..) => {
                    self.basis.insert(&support_vector(p, self.basis.dim()))
                }
                _ => true,
            };
        self.degree_sum += p.degree();
        self.seen += 1;
        want
    }
}

/// Sends `stream` through the adversary. Packet count and order never change;
/// the flags are ground truth for scoring and must not reach a decoder.
pub fn transmit<P: Corruptible, R: Rng + ?Sized>(stream: Vec<P>, spec: &AdversarySpec, rng: &mut R) -> Vec<Delivered<P>> {
    let n = stream.len();
    let mut gate = Gate {
        bound: spec.bound,
        reading: spec.reading,
        n,
        used: 0,
    };
    let mut out: Vec<Delivered<P>> = stream.into_iter().map(|packet| Delivered { packet, corrupted: false }).collect();

    let corrupt = |out: &mut Vec<Delivered<P>>, gate: &mut Gate, pos: usize, rng: &mut R| {
        if !out[pos].corrupted && gate.allows(pos) && apply_edit(&mut out[pos].packet, &spec.strategy, rng) {
            out[pos].corrupted = true;
            gate.used += 1;
        }
    };

    match (spec.selection, spec.knowledge) {
        (Selection::Uniform, Knowledge::Offline) => {
            let mut victims = sample(rng, n, spec.bound.budget(n)).into_vec();
            victims.sort_unstable();
            for pos in victims {
                corrupt(&mut out, &mut gate, pos, rng);
            }
        }
        (Selection::Uniform, Knowledge::Online) => {
            let c = spec.bound.as_f64();
            for pos in 0..n {
                if rng.gen_bool(c) {
                    corrupt(&mut out, &mut gate, pos, rng);
                }
            }
        }
        (Selection::Selective, Knowledge::Offline) => {
            let packets: Vec<P> = out.iter().map(|d| d.packet.clone()).collect();
            let chooser = Chooser::new(&packets, &spec.strategy, rng);
            let ranking = chooser.ranking(&packets, rng);
            let chosen = select_within_bound(&ranking, n, spec.bound, spec.reading);
            for pos in chosen {
                corrupt(&mut out, &mut gate, pos, rng);
            }
        }
        (Selection::Selective, Knowledge::Online) => {
            // Only the symbol count is taken from the stream; it is public.
            let packets: Vec<P> = out.iter().map(|d| d.packet.clone()).collect();
            let width = packets.iter().map(P::width).max().unwrap_or(0);
            let chooser = Chooser::new(&packets, &spec.strategy, rng);
            let mut view = OnlineView {
                basis: XorBasis::new(width),
                degree_sum: 0,
                seen: 0,
            };
            let c = spec.bound.as_f64();
            for pos in 0..n {
                let snapshot = out[pos].packet.clone();
                if view.wants(&chooser, &snapshot, c, rng) {
                    corrupt(&mut out, &mut gate, pos, rng);
                }
            }
        }
    }
    out
}

/// Greedily takes positions in `ranking` order while the bound allows,
/// returning them in stream order.
fn select_within_bound(ranking: &[usize], n: usize, bound: CBound, reading: BoundReading) -> Vec<usize> {
    let total = bound.budget(n);
    let mut chosen = vec![false; n];
    let mut picked = 0;
    for &pos in ranking {
        if picked == total {
            break;
        }
        let ok = match reading {
            BoundReading::FinalSet => true,
            BoundReading::Prefix => {
                chosen[pos] = true;
                let mut flags_ok = true;
                let mut count = 0;
                for (i, &f) in chosen.iter().enumerate() {
                    count += usize::from(f);
                    if count > bound.budget((i + 1).max(4)) {
                        flags_ok = false;
                        break;
                    }
                }
                chosen[pos] = false;
                flags_ok
            }
        };
        if ok {
            chosen[pos] = true;
            picked += 1;
        }
    }
    (0..n).filter(|&i| chosen[i]).collect()
}

/// Removes `target` from every header that lists it. Packets left with no
/// symbols are dropped. Payloads are untouched.
pub fn vanishing_symbol_attack<P: Corruptible>(packets: Vec<P>, target: usize) -> (Vec<P>, usize) {
    let mut edits = 0;
    let kept = packets
        .into_iter()
        .filter_map(|mut p| {
            if p.remove_symbol(target) {
                edits += 1;
            }
            (p.degree() > 0).then_some(p)
        })
        .collect();
    (kept, edits)
}

/// Complements the payload of every odd-degree packet.
pub fn odd_packets_attack<P: Corruptible>(mut packets: Vec<P>) -> Vec<P> {
    // Complement needs no randomness; a zero-seeded generator satisfies the signature.
    let mut rng = crate::rng::rng_from_seed(0);
    for p in packets.iter_mut().filter(|p| p.degree() % 2 == 1) {
        p.flip_payload(FlipMask::Complement, &mut rng);
    }
    packets
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Feasibility {
    pub feasible: bool,
    /// Packets the strategy must corrupt on this stream.
    pub required: usize,
    /// `floor(c * n)`.
    pub budget: usize,
}

/// Whether the strategy's full victim set fits the budget of the realized stream.
pub fn attack_feasible<P: Corruptible>(stream: &[P], spec: &AdversarySpec) -> Result<Feasibility, AdversaryError> {
    let required = match spec.strategy {
        AttackStrategy::OddPackets => stream.iter().filter(|p| p.degree() % 2 == 1).count(),
        AttackStrategy::VanishingSymbol { target } => stream.iter().filter(|p| p.support().binary_search(&target).is_ok()).count(),
        AttackStrategy::PayloadFlip { .. } => return Err(AdversaryError::UnsupportedStrategy),
    };
    let budget = spec.bound.budget(stream.len());
    Ok(Feasibility {
        feasible: required <= budget,
        required,
        budget,
    })
}
