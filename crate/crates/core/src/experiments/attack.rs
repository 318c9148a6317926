use serde_json::json;

use super::decoder::decoder_report;
use super::stats::mean;
use super::{fmt_f64, rate_json, run_cell, AttackKind, DegreeKindConfig, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentReport, TrialRecord};
use crate::adversary::{odd_packets_attack, vanishing_symbol_attack, CBound};
use crate::gf2::BitVector;
use crate::lt::{bp_decode, lt_encode, DegreeDistribution, LtPacket};
use crate::rng::CodeRng;

struct LtTrial {
    feasible: bool,
    required: usize,
    budget: usize,
    decoded: usize,
    /// Decoded symbols equal to the complement of the truth.
    complemented: usize,
    /// Decoded symbols equal to the truth.
    intact: usize,
    unrecovered: usize,
    target_recovered: bool,
    target_fraction: f64,
}

fn degree_distribution(config: &ExperimentConfig, k: usize) -> Result<DegreeDistribution, ExperimentError> {
    match config.degree {
        DegreeKindConfig::Robust => DegreeDistribution::robust_soliton(k, config.lt_c, config.lt_delta),
        DegreeKindConfig::Ideal => DegreeDistribution::ideal_soliton(k),
    }
    .map_err(|e| ExperimentError::Config(e.to_string()))
}

fn lt_trial(config: &ExperimentConfig, dist: &DegreeDistribution, k: usize, n: usize, bound: CBound, rng: &mut CodeRng) -> LtTrial {
    let width = config.m.max(8);
    let symbols: Vec<BitVector> = (0..k).map(|_| BitVector::random_uniform(width, rng)).collect();
    let stream: Vec<LtPacket> = (0..n).map(|_| lt_encode(&symbols, dist, rng)).collect();
    let budget = bound.budget(n);
    let target = config.target.min(k - 1);
    let target_fraction = stream.iter().filter(|p| p.contains(target)).count() as f64 / n as f64;
    let (required, attacked) = match config.attack {
        AttackKind::Odd => {
            let odd = stream.iter().filter(|p| p.degree() % 2 == 1).count();
            (odd, odd_packets_attack(stream))
        }
        _ => {
            let (kept, edits) = vanishing_symbol_attack(stream, target);
            (edits, kept)
        }
    };
    let out = bp_decode(k, &attacked);
    let decoded_symbols = out.symbols();
    let mut t = LtTrial {
        feasible: required <= budget,
        required,
        budget,
        decoded: 0,
        complemented: 0,
        intact: 0,
        unrecovered: 0,
        target_recovered: decoded_symbols[target].is_some(),
        target_fraction,
    };
    for (s, truth) in decoded_symbols.iter().zip(&symbols) {
        match s {
            None => t.unrecovered += 1,
            Some(v) => {
                t.decoded += 1;
                t.complemented += usize::from(*v == truth.complement());
                t.intact += usize::from(v == truth);
            }
        }
    }
    t
}

/// Runs the chosen attack. Flip attacks are scored with the corruption-resilient
/// decoders; odd-packet and vanishing-symbol attacks target LT streams and BP.
pub fn run_attack_campaign(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if config.attack == AttackKind::Flip {
        return decoder_report(config, ExperimentKind::Attack);
    }
    let bound = if config.c == "auto" {
        CBound::one_third()
    } else {
        config.c.parse().map_err(|e: crate::adversary::AdversaryError| ExperimentError::Config(e.to_string()))?
    };
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (ci, cell) in config.cells().into_iter().enumerate() {
        let k = cell.k;
        let n = config.packets.unwrap_or(2 * k);
        let dist = degree_distribution(config, k)?;
        let trials = run_cell(config, ci, |rng| lt_trial(config, &dist, k, n, bound, rng));
        let count = |f: &dyn Fn(&LtTrial) -> bool| trials.iter().filter(|t| f(&t.value)).count();
        let total_decoded: usize = trials.iter().map(|t| t.value.decoded).sum();
        let total_complemented: usize = trials.iter().map(|t| t.value.complemented).sum();
        let other_recovery: Vec<f64> = trials
            .iter()
            .map(|t| {
                let others = (k - 1) as f64;
                let got = t.value.decoded - usize::from(t.value.target_recovered);
                if others == 0.0 {
                    0.0
                } else {
                    got as f64 / others
                }
            })
            .collect();
        let target_fraction: Vec<f64> = trials.iter().map(|t| t.value.target_fraction).collect();
        cells.push(json!({
            "k": k,
            "packets": n,
            "attack": match config.attack { AttackKind::Odd => "odd", _ => "vanish" },
            "c": bound.to_string(),
            "odd_probability": dist.odd_probability(),
            "feasible": rate_json(count(&|t| t.feasible), trials.len()),
            "decoded_symbols": total_decoded,
            "complemented_symbols": total_complemented,
            "all_decoded_complemented": rate_json(count(&|t| t.complemented == t.decoded), trials.len()),
            "fully_decoded": rate_json(count(&|t| t.unrecovered == 0), trials.len()),
            "target_unrecovered": rate_json(count(&|t| !t.target_recovered), trials.len()),
            "other_symbols_recovered_mean": mean(&other_recovery),
            "target_packet_fraction_mean": mean(&target_fraction),
            "target_packet_fraction_estimate": (k as f64 / config.lt_delta).ln() / k as f64,
        }));
        records.extend(trials.into_iter().map(|t| {
            let v = &t.value;
            TrialRecord {
                cell: ci,
                trial: t.trial,
                seed: t.seed,
                values: vec![
                    k.to_string(),
                    n.to_string(),
                    v.feasible.to_string(),
                    v.required.to_string(),
                    v.budget.to_string(),
                    v.decoded.to_string(),
                    v.complemented.to_string(),
                    v.intact.to_string(),
                    v.unrecovered.to_string(),
                    v.target_recovered.to_string(),
                    fmt_f64(v.target_fraction),
                ],
                elapsed_us: t.elapsed_us,
            }
        }));
    }
    Ok(ExperimentReport {
        kind: ExperimentKind::Attack,
        config: config.clone(),
        columns: vec![
            "k",
            "packets",
            "feasible",
            "required",
            "budget",
            "decoded",
            "complemented",
            "intact",
            "unrecovered",
            "target_recovered",
            "target_fraction",
        ],
        records,
        cells,
    })
}
