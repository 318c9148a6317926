//! Several mirrors encode the same value independently; some are Byzantine.
//!
//! Source `i` runs its own encoder seeded from the trial. The receiver takes
//! packets round-robin (source 0, 1, ..., S-1, 0, ...) and stops at the
//! smallest count `N` with `N >= k + 2 f(N) + epsilon`, where `f(N)` is the
//! number of Byzantine packets among the first `N`. The last `byzantine`
//! sources are the Byzantine ones and flip every payload they send.

use rand::RngCore;
use serde_json::json;

use super::decoder::{attempt, encoder_for, random_blocks, Setup};
use super::{rate_json, run_cell, DecoderKind, ExperimentConfig, ExperimentError, ExperimentKind, ExperimentReport, TrialRecord};
use crate::adversary::{Corruptible, CBound};
use crate::coding::Packet;
use crate::decoders::{g_for_base, DecodePlan, PlanModel, DEFAULT_EXHAUSTIVE_CEILING};
use crate::rng::{rng_from_seed, split_seed, CodeRng};

/// Upper limit on the receiver's packet count.
const MAX_PACKETS: usize = 1 << 16;

fn is_byzantine(config: &ExperimentConfig, position: usize) -> bool {
    position % config.sources >= config.sources - config.byzantine
}

fn byzantine_prefix(config: &ExperimentConfig, n: usize) -> usize {
    (0..n).filter(|&i| is_byzantine(config, i)).count()
}

/// Packet count and corruption count the receiver plans for, or `None` when
/// the Byzantine share is too large for any count up to the limit.
fn receive_count(config: &ExperimentConfig, k: usize, epsilon: usize) -> Option<(usize, usize)> {
    let extra = |f: usize| {
        if config.decoder == DecoderKind::Randomized {
            g_for_base(k, f, epsilon, config.g_base) + f
        } else {
            2 * f
        }
    };
    let mut f = byzantine_prefix(config, k + epsilon);
    for n in k + epsilon..=MAX_PACKETS {
        if n >= k + extra(f) + epsilon {
            return Some((n, f));
        }
        f += usize::from(is_byzantine(config, n));
    }
    None
}

struct SharedTrial {
    packets: usize,
    byzantine_packets: usize,
    status: &'static str,
}

fn shared_trial(config: &ExperimentConfig, k: usize, epsilon: usize, plan: Option<(usize, usize)>, rng: &mut CodeRng) -> SharedTrial {
    let truth = random_blocks(k, config.m, rng);
    let Some((n, f)) = plan else {
        return SharedTrial {
            packets: 0,
            byzantine_packets: 0,
            status: "infeasible",
        };
    };
    let base = rng.next_u64();
    let mut sources: Vec<_> = (0..config.sources)
        .map(|s| encoder_for(config, &truth, split_seed(base, s as u64)).expect("checked before trials"))
        .collect();
    let mut flip_rng = rng_from_seed(rng.next_u64());
    let packets: Vec<Packet> = (0..n)
        .map(|i| {
            let mut p = sources[i % config.sources].next_packet();
            if is_byzantine(config, i) {
                p.flip_payload(config.mask.into(), &mut flip_rng);
            }
            p
        })
        .collect();
    let setup = Setup {
        plan: DecodePlan {
            k,
            model: PlanModel::Uniform { f },
            epsilon,
            required_packets: n,
            threshold: n - f,
        },
        budget: f,
        epsilon,
        g: g_for_base(k, f, epsilon, config.g_base),
        n,
        bound: None,
        decoders: vec![config.decoder],
    };
    let mut drng = rng_from_seed(rng.next_u64());
    let a = attempt(config.decoder, &packets, &truth, &setup, n - f, &mut drng);
    SharedTrial {
        packets: n,
        byzantine_packets: f,
        status: a.status,
    }
}

/// Recovery rate of a value served by several independent encoders, some Byzantine.
pub fn run_shared_value_scenario(config: &ExperimentConfig) -> Result<ExperimentReport, ExperimentError> {
    if config.decoder == DecoderKind::Majority || config.decoder == DecoderKind::Bp {
        return Err(ExperimentError::Config("shared-value runs the exhaustive or randomized decoder".into()));
    }
    let mut records = Vec::new();
    let mut cells = Vec::new();
    for (ci, cell) in config.cells().into_iter().enumerate() {
        let (k, epsilon) = (cell.k, cell.epsilon.max(1));
        if config.decoder == DecoderKind::Exhaustive && k > DEFAULT_EXHAUSTIVE_CEILING {
            return Err(ExperimentError::Config(format!("k = {k} is above the exhaustive ceiling")));
        }
        encoder_for(config, &random_blocks(k, config.m, &mut rng_from_seed(0)), 0)?;
        let plan = receive_count(config, k, epsilon);
        let trials = run_cell(config, ci, |rng| shared_trial(config, k, epsilon, plan, rng));
        let count = |s: &str| trials.iter().filter(|t| t.value.status == s).count();
        let (n, f) = plan.unwrap_or((0, 0));
        cells.push(json!({
            "k": k,
            "epsilon": epsilon,
            "sources": config.sources,
            "byzantine": config.byzantine,
            "byzantine_fraction_sources": config.byzantine as f64 / config.sources as f64,
            "packets": n,
            "byzantine_packets": f,
            "byzantine_fraction_delivered": if n == 0 { 0.0 } else { f as f64 / n as f64 },
            "within_one_third": n > 0 && CBound::new(f.max(1) as u64, n as u64).is_ok(),
            "f_below_k": n > 0 && f < k,
            "recovered": rate_json(count("recovered"), trials.len()),
            "wrong": count("wrong"),
            "infeasible": count("infeasible"),
        }));
        records.extend(trials.into_iter().map(|t| TrialRecord {
            cell: ci,
            trial: t.trial,
            seed: t.seed,
            values: vec![
                k.to_string(),
                config.sources.to_string(),
                config.byzantine.to_string(),
                t.value.packets.to_string(),
                t.value.byzantine_packets.to_string(),
                t.value.status.to_string(),
            ],
            elapsed_us: t.elapsed_us,
        }));
    }
    Ok(ExperimentReport {
        kind: ExperimentKind::SharedValue,
        config: config.clone(),
        columns: vec!["k", "sources", "byzantine", "packets", "byzantine_packets", "status"],
        records,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(extra: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml_str(&format!("k = [8]\nepsilon = [6]\ntrials = 40\nseed = 3\n{extra}")).unwrap()
    }

    #[test]
    fn single_honest_source_is_plain_decoding() {
        let rep = run_shared_value_scenario(&cfg("sources = 1\n")).unwrap();
        let cell = &rep.cells[0];
        assert_eq!(cell["packets"], 14);
        assert_eq!(cell["byzantine_packets"], 0);
        // failures can only come from a rank-deficient batch
        assert!(cell["recovered"]["rate"].as_f64().unwrap() > 0.9);
        assert_eq!(cell["wrong"], 0);
    }

    #[test]
    fn byzantine_mirrors_never_produce_a_wrong_value() {
        for (s, b) in [(10, 1), (10, 2), (5, 2), (3, 1)] {
            let rep = run_shared_value_scenario(&cfg(&format!("sources = {s}\nbyzantine = {b}\n"))).unwrap();
            assert_eq!(rep.cells[0]["wrong"], 0, "{s}/{b}");
        }
    }

    #[test]
    fn majority_share_is_infeasible() {
        let rep = run_shared_value_scenario(&cfg("sources = 2\nbyzantine = 1\n")).unwrap();
        assert_eq!(rep.cells[0]["infeasible"], 40);
    }

    #[test]
    fn receive_count_examples() {
        let c = cfg("sources = 10\nbyzantine = 3\n");
        // the smallest N with N >= 8 + 2 f(N) + 6
        let (n, f) = receive_count(&c, 8, 6).unwrap();
        assert_eq!(f, byzantine_prefix(&c, n));
        assert!(n >= 14 + 2 * f);
        assert!((14..n).all(|m| m < 14 + 2 * byzantine_prefix(&c, m)));
    }
}
