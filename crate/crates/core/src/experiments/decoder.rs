use rand::RngCore;
use serde_json::{json, Map, Value};

use super::stats::{mean, percentile};
use super::{rate_json, run_cell, Cell, DecoderKind, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentReport, ModelKind, TrialRecord};
use crate::adversary::{transmit, AdversarySpec, AttackStrategy, CBound, Delivered, VictimPolicy};
use crate::coding::{Encoder, Packet};
use crate::decoders::{
    bp_decode_coded, exhaustive_decode_blocks, g_for_base, majority_decode_blocks, plan_selective, plan_uniform, randomized_decode_blocks,
    selective_exponent, CodedSystem, DecodeFailure, DecodePlan, PlanModel, RandomizedParams, DEFAULT_EXHAUSTIVE_CEILING,
};
use crate::gf2::{rank, BitMatrix, BitVector};
use crate::rng::{rng_from_seed, split_seed, CodeRng};

/// Parameters shared by all trials of a cell.
pub(super) struct Setup {
    pub plan: DecodePlan,
    pub budget: usize,
    pub epsilon: usize,
    pub g: usize,
    pub n: usize,
    pub bound: Option<CBound>,
    pub decoders: Vec<DecoderKind>,
}

pub(super) fn plan_for(config: &ExperimentConfig, cell: &Cell) -> Result<DecodePlan, ExperimentError> {
    let plan = match config.model {
        ModelKind::Uniform => plan_uniform(cell.k, cell.f, cell.epsilon.max(1)),
        ModelKind::Selective => plan_selective(cell.k, config.b),
    };
    plan.map_err(|e| ExperimentError::Config(e.to_string()))
}

/// Packets a decoder needs under `plan` with `budget` corruptions.
pub(super) fn packets_needed(kind: DecoderKind, plan: &DecodePlan, budget: usize, epsilon: usize, g: usize) -> usize {
    match kind {
        DecoderKind::Exhaustive | DecoderKind::Bp => plan.required_packets,
        DecoderKind::Randomized => g + plan.k + budget + epsilon,
        DecoderKind::Majority => (2 * budget + 1) * (plan.k + epsilon),
    }
}

pub(super) fn resolve_bound(config: &ExperimentConfig, budget: usize, n: usize) -> Result<Option<CBound>, ExperimentError> {
    if config.c == "auto" {
        if budget == 0 {
            return Ok(None);
        }
        return CBound::new(budget as u64, n as u64)
            .map(Some)
            .map_err(|_| ExperimentError::Config(format!("{budget} corruptions out of {n} packets exceeds 1/3")));
    }
    Ok(Some(config.c.parse().map_err(|e: crate::adversary::AdversaryError| ExperimentError::Config(e.to_string()))?))
}

fn setup(config: &ExperimentConfig, cell: &Cell) -> Result<Setup, ExperimentError> {
    let plan = plan_for(config, cell)?;
    let budget = plan.corruption_budget();
    let epsilon = plan.epsilon.max(1);
    let g = g_for_base(cell.k, budget, epsilon, config.g_base);
    let mut decoders = vec![config.decoder];
    decoders.extend(config.compare.iter().copied().filter(|d| *d != config.decoder));
    if decoders.contains(&DecoderKind::Exhaustive) && cell.k > DEFAULT_EXHAUSTIVE_CEILING {
        return Err(ExperimentError::Config(format!(
            "k = {} is above the exhaustive ceiling {DEFAULT_EXHAUSTIVE_CEILING}",
            cell.k
        )));
    }
    let n = config
        .packets
        .unwrap_or_else(|| decoders.iter().map(|&d| packets_needed(d, &plan, budget, epsilon, g)).max().unwrap());
    let bound = resolve_bound(config, budget, n)?;
    Ok(Setup {
        plan,
        budget,
        epsilon,
        g,
        n,
        bound,
        decoders,
    })
}

/// Result of one decoder on one delivered stream.
#[derive(Debug, Clone)]
pub(super) struct Attempt {
    pub decoder: DecoderKind,
    pub blocks: Option<Vec<BitVector>>,
    pub status: &'static str,
    pub iterations: u64,
    pub satisfied: usize,
}

pub(super) fn failure_name(f: &DecodeFailure) -> &'static str {
    match f {
        DecodeFailure::InsufficientPackets { .. } => "insufficient-packets",
        DecodeFailure::InsufficientIndependence { .. } => "insufficient-independence",
        DecodeFailure::NoMajority { .. } => "no-majority",
        DecodeFailure::Ambiguous { .. } => "ambiguous",
        DecodeFailure::NoCandidate { .. } => "no-candidate",
        DecodeFailure::IterationBudget { .. } => "iteration-budget",
    }
}

pub(super) fn attempt(
    kind: DecoderKind,
    packets: &[Packet],
    truth: &[BitVector],
    setup: &Setup,
    threshold: usize,
    rng: &mut CodeRng,
) -> Attempt {
    let system = CodedSystem::from_packets(packets).expect("encoder output is uniform");
    let blocks: Vec<usize> = (0..system.m()).collect();
    let outcome = match kind {
        DecoderKind::Exhaustive => exhaustive_decode_blocks(&system, &blocks, threshold),
        DecoderKind::Majority => majority_decode_blocks(&system, &blocks, setup.budget),
        DecoderKind::Randomized => {
            let params = RandomizedParams {
                k: system.k(),
                f: setup.budget,
                epsilon: setup.epsilon,
                g: setup.g,
                cap: None,
            };
            randomized_decode_blocks(&system, &blocks, &params, rng)
        }
        DecoderKind::Bp => {
            let (bp, decoded) = bp_decode_coded(packets).expect("encoder output is uniform");
            let status = match &decoded {
                Some(d) if d == truth => "recovered",
                Some(_) => "wrong",
                None => "stalled",
            };
            return Attempt {
                decoder: kind,
                blocks: decoded,
                status,
                iterations: bp.steps as u64,
                satisfied: 0,
            };
        }
    }
    .expect("parameters are validated in setup");
    let status = match outcome.blocks() {
        Some(b) if b == truth => "recovered",
        Some(_) => "wrong",
        None => failure_name(outcome.failure().unwrap()),
    };
    Attempt {
        decoder: kind,
        blocks: outcome.blocks().map(|b| b.to_vec()),
        status,
        iterations: outcome.stats.iterations,
        satisfied: outcome.stats.satisfied.iter().copied().min().unwrap_or(0),
    }
}

/// Rank of the uncorrupted packets' coding vectors.
pub(super) fn clean_rank(delivered: &[Delivered<Packet>], k: usize) -> usize {
    let rows: Vec<BitVector> = delivered.iter().filter(|d| !d.corrupted).map(|d| d.packet.coding_vector().clone()).collect();
    rank(&BitMatrix::from_rows(k, &rows).expect("coding vectors have k bits"))
}

pub(super) fn random_blocks(k: usize, m: usize, rng: &mut CodeRng) -> Vec<BitVector> {
    (0..m).map(|_| BitVector::random_uniform(k, rng)).collect()
}

pub(super) fn encoder_for(config: &ExperimentConfig, blocks: &[BitVector], seed: u64) -> Result<Encoder, ExperimentError> {
    Encoder::new(&BitVector::concat(blocks), blocks.len(), config.coding_distribution(), config.header.into(), seed)
        .map_err(|e| ExperimentError::Config(e.to_string()))
}

struct PolicyRun {
    policy: VictimPolicy,
    corrupted: usize,
    clean_rank: usize,
    attempts: Vec<Attempt>,
}

fn run_trial(config: &ExperimentConfig, setup: &Setup, k: usize, rng: &mut CodeRng) -> Vec<PolicyRun> {
    let truth = random_blocks(k, config.m, rng);
    let mut enc = encoder_for(config, &truth, rng.next_u64()).expect("checked in setup");
    let packets = enc.take(setup.n);
    let adv_seed = rng.next_u64();
    let dec_seed = rng.next_u64();
    let (selection, knowledge) = config.adversary_kind();
    let threshold = setup.plan.acceptance_threshold(setup.n);
    config
        .policies()
        .into_iter()
        .enumerate()
        .map(|(pi, policy)| {
            let delivered = match setup.bound {
                Some(bound) => {
                    let strategy = AttackStrategy::PayloadFlip {
                        mask: config.mask.into(),
                        policy,
                    };
                    let spec = AdversarySpec::new(selection, knowledge, bound, strategy).with_reading(config.bound.into());
                    transmit(packets.clone(), &spec, &mut rng_from_seed(split_seed(adv_seed, pi as u64)))
                }
                None => packets.iter().cloned().map(|packet| Delivered { packet, corrupted: false }).collect(),
            };
            let corrupted = delivered.iter().filter(|d| d.corrupted).count();
            let cr = clean_rank(&delivered, k);
            let received: Vec<Packet> = delivered.into_iter().map(|d| d.packet).collect();
            let attempts = setup
                .decoders
                .iter()
                .enumerate()
                .map(|(di, &d)| {
                    let mut drng = rng_from_seed(split_seed(dec_seed, (pi * 16 + di) as u64));
                    attempt(d, &received, &truth, setup, threshold, &mut drng)
                })
                .collect();
            PolicyRun {
                policy,
                corrupted,
                clean_rank: cr,
                attempts,
            }
        })
        .collect()
}

pub(super) fn decoder_report(config: &ExperimentConfig, kind: ExperimentKind) -> Result<ExperimentReport, ExperimentError> {
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (ci, cell) in config.cells().into_iter().enumerate() {
        let setup = setup(config, &cell)?;
        // surface encoder configuration errors before spawning trials
        encoder_for(config, &vec![BitVector::zeros(cell.k); config.m], 0)?;
        let trials = run_cell(config, ci, |rng| run_trial(config, &setup, cell.k, rng));
        cells.push(summarize(config, &cell, &setup, &trials));
        for t in trials {
            for run in &t.value {
                for a in &run.attempts {
                    records.push(TrialRecord {
                        cell: ci,
                        trial: t.trial,
                        seed: t.seed,
                        values: vec![
                            cell.k.to_string(),
                            cell.epsilon.to_string(),
                            setup.budget.to_string(),
                            setup.n.to_string(),
                            run.policy.name().to_string(),
                            run.corrupted.to_string(),
                            run.clean_rank.to_string(),
                            a.decoder.name().to_string(),
                            a.status.to_string(),
                            a.iterations.to_string(),
                            a.satisfied.to_string(),
                        ],
                        elapsed_us: t.elapsed_us,
                    });
                }
            }
        }
    }
    Ok(ExperimentReport {
        kind,
        config: config.clone(),
        columns: vec![
            "k",
            "epsilon",
            "f",
            "packets",
            "policy",
            "corrupted",
            "clean_rank",
            "decoder",
            "status",
            "iterations",
            "satisfied",
        ],
        records,
        cells,
    })
}

fn summarize(config: &ExperimentConfig, cell: &Cell, setup: &Setup, trials: &[super::Timed<Vec<PolicyRun>>]) -> Value {
    let mut decoders = Map::new();
    for (di, &d) in setup.decoders.iter().enumerate() {
        let attempts: Vec<(&PolicyRun, &Attempt)> = trials.iter().flat_map(|t| t.value.iter().map(move |r| (r, &r.attempts[di]))).collect();
        let total = attempts.len();
        let recovered = attempts.iter().filter(|(_, a)| a.status == "recovered").count();
        let wrong = attempts.iter().filter(|(_, a)| a.status == "wrong").count();
        let mut failures = Map::new();
        for (_, a) in &attempts {
            if a.status != "recovered" && a.status != "wrong" {
                let e = failures.entry(a.status).or_insert(json!(0));
                *e = json!(e.as_u64().unwrap() + 1);
            }
        }
        let failed_shortfall = attempts
            .iter()
            .filter(|(r, a)| a.status != "recovered" && r.clean_rank < cell.k)
            .count();
        let iterations: Vec<f64> = attempts.iter().filter(|(_, a)| a.blocks.is_some()).map(|(_, a)| a.iterations as f64).collect();
        let all_policies = trials
            .iter()
            .filter(|t| t.value.iter().all(|r| r.attempts[di].status == "recovered"))
            .count();
        let mut per_policy = Map::new();
        for policy in config.policies() {
            let rows: Vec<_> = attempts.iter().filter(|(r, _)| r.policy == policy).collect();
            let ok = rows.iter().filter(|(_, a)| a.status == "recovered").count();
            per_policy.insert(policy.name().into(), rate_json(ok, rows.len()));
        }
        let mut entry = json!({
            "recovered": rate_json(recovered, total),
            "wrong": wrong,
            "failures": failures,
            "failures_with_clean_rank_shortfall": failed_shortfall,
            "all_policies_recovered": rate_json(all_policies, trials.len()),
            "per_policy": per_policy,
            "iterations_mean": mean(&iterations),
            "iterations_p50": percentile(&iterations, 0.5),
            "iterations_p90": percentile(&iterations, 0.9),
        });
        if d == DecoderKind::Randomized {
            let pk = crate::decoders::p_clean_lower_bound(cell.k, setup.budget, setup.epsilon, setup.g);
            let pe = crate::decoders::p_full_rank(setup.epsilon);
            entry["g"] = json!(setup.g);
            entry["p_k_lower_bound"] = json!(pk);
            entry["p_k_exact"] = json!(crate::decoders::p_clean_exact(setup.n, setup.budget, cell.k + setup.epsilon));
            entry["p_epsilon"] = json!(pe);
            entry["predicted_iterations"] = json!(1.0 / (pk * pe));
        }
        decoders.insert(d.name().into(), entry);
    }
    // agreement of each compared decoder with the primary one
    let mut agreement = Map::new();
    for di in 1..setup.decoders.len() {
        let mut mutual = 0;
        let mut agree = 0;
        let mut agree_truth = 0;
        for t in trials {
            for r in &t.value {
                if let (Some(a), Some(b)) = (&r.attempts[0].blocks, &r.attempts[di].blocks) {
                    mutual += 1;
                    agree += usize::from(a == b);
                    agree_truth += usize::from(r.attempts[0].status == "recovered" && r.attempts[di].status == "recovered");
                }
            }
        }
        agreement.insert(
            setup.decoders[di].name().into(),
            json!({ "mutual_successes": mutual, "agree": agree, "agree_with_truth": agree_truth }),
        );
    }
    let corrupted: Vec<f64> = trials.iter().flat_map(|t| t.value.iter().map(|r| r.corrupted as f64)).collect();
    let mut out = json!({
        "k": cell.k,
        "epsilon": setup.epsilon,
        "f": setup.budget,
        "packets": setup.n,
        "threshold": setup.plan.acceptance_threshold(setup.n),
        "c": setup.bound.map(|b| b.to_string()),
        "trials": trials.len(),
        "corrupted_mean": mean(&corrupted),
        "decoders": decoders,
        "agreement": agreement,
    });
    if let PlanModel::Selective { a, b } = setup.plan.model {
        let e = selective_exponent(a, b);
        out["a"] = json!(a);
        out["b"] = json!(b);
        out["exponent"] = json!(e);
        out["failure_bound"] = json!((-(cell.k as f64) * e).exp2());
    }
    out
}

/// Success rate, iterations and agreement of the decoders on corrupted streams.
pub fn run_decoder_benchmark(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    decoder_report(config, ExperimentKind::Decoder)
}
