//! End-to-end acceptance checks. Each criterion prints one PASS or FAIL line;
//! the process exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use serde_json::Value;

use crfountain::adversary::{CBound, Corruptible, FlipMask};
use crfountain::coding::{CodingDistribution, Encoder, HeaderForm, Packet};
use crfountain::decoders::{disjoint_full_rank_sets, majority_applicable, majority_decode_blocks, CodedSystem};
use crfountain::experiments::{run_experiment, ExperimentConfig, ExperimentKind, ExperimentReport};
use crfountain::gf2::{rank_failure_limit, BitVector};
use crfountain::lt::{odd_degree_fraction, DegreeDistribution};
use crfountain::rng::rng_from_seed;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn run(kind: ExperimentKind, toml: &str) -> ExperimentReport {
    let cfg = ExperimentConfig::from_toml_str(toml).expect("acceptance config parses");
    run_experiment(kind, &cfg).expect("experiment runs")
}

fn f(v: &Value) -> f64 {
    v.as_f64().expect("number")
}

fn u(v: &Value) -> u64 {
    v.as_u64().expect("integer")
}

fn rank_bound(k: usize, extra: &str) -> Verdict {
    let rep = run(
        ExperimentKind::Rank,
        &format!("k = [{k}]\nepsilon = [2, 4, 8]\ntrials = 100000\nseed = 1\n{extra}"),
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for cell in &rep.cells {
        pass &= cell["within_bound"].as_bool().unwrap();
        parts.push(format!(
            "eps={} rate={:.5} bound={:.5}",
            cell["epsilon"],
            f(&cell["failure_rate"]),
            f(&cell["bound"])
        ));
    }
    verdict(pass, parts.join("; "))
}

fn c1() -> Verdict {
    rank_bound(32, "")
}

fn c2() -> Verdict {
    let p = (64f64.log2() + 4.0) / 64.0;
    rank_bound(64, &format!("dist = \"bernoulli\"\ndensity = {p}\n"))
}

fn c3() -> Verdict {
    let rep = run(ExperimentKind::Rank, "k = [64]\nepsilon = [0]\ntrials = 100000\nseed = 3\n");
    let rate = f(&rep.cells[0]["failure_rate"]);
    let limit = rank_failure_limit(0);
    verdict((rate - limit).abs() <= 0.01, format!("rate={rate:.5} limit={limit:.5}"))
}

fn c4() -> Verdict {
    let k = 1000;
    let dist = DegreeDistribution::ideal_soliton(k).unwrap();
    let frac = odd_degree_fraction(&dist, 1_000_000, &mut rng_from_seed(4));
    let target = 1.0 / k as f64 + 1.0 - std::f64::consts::LN_2;
    verdict((frac - target).abs() <= 0.005, format!("fraction={frac:.5} target={target:.5}"))
}

fn c5() -> Verdict {
    let rep = run(
        ExperimentKind::Attack,
        "k = [10, 50, 200]\nattack = \"odd\"\ntrials = 100\nseed = 5\n",
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for cell in &rep.cells {
        let all = u(&cell["all_decoded_complemented"]["count"]);
        let decoded = u(&cell["decoded_symbols"]);
        pass &= all == 100 && decoded > 0 && decoded == u(&cell["complemented_symbols"]);
        parts.push(format!("k={} complemented-trials={all}/100 symbols={decoded}", cell["k"]));
    }
    verdict(pass, parts.join("; "))
}

fn c6() -> Verdict {
    let rep = run(
        ExperimentKind::Attack,
        "k = [1000]\npackets = 2000\nattack = \"odd\"\nc = \"1/3\"\ntrials = 1000\nseed = 6\n",
    );
    let rate = f(&rep.cells[0]["feasible"]["rate"]);
    verdict(
        rate >= 0.45,
        format!("feasible={rate:.3} odd-probability={:.4}", f(&rep.cells[0]["odd_probability"])),
    )
}

fn c7() -> Verdict {
    let rep = run(
        ExperimentKind::Attack,
        "k = [100]\nattack = \"vanish\"\ntarget = 0\ntrials = 100\nseed = 7\n",
    );
    let cell = &rep.cells[0];
    let unrecovered = u(&cell["target_unrecovered"]["count"]);
    verdict(
        unrecovered == 100,
        format!(
            "target unrecovered {unrecovered}/100; packets with target {:.4} vs estimate {:.4}; other symbols recovered {:.3}",
            f(&cell["target_packet_fraction_mean"]),
            f(&cell["target_packet_fraction_estimate"]),
            f(&cell["other_symbols_recovered_mean"])
        ),
    )
}

fn c8() -> Verdict {
    let rep = run(
        ExperimentKind::Decoder,
        "k = [12]\nf = [3]\nepsilon = [4]\nadversary = \"uniform:offline\"\ndecoder = \"exhaustive\"\ntrials = 1000\nseed = 8\n",
    );
    let cell = &rep.cells[0];
    let d = &cell["decoders"]["exhaustive"];
    let rate = f(&d["recovered"]["rate"]);
    let wrong = u(&d["wrong"]);
    let failed = 1000 - u(&d["recovered"]["count"]);
    let shortfall = u(&d["failures_with_clean_rank_shortfall"]);
    verdict(
        rate >= 0.99 && wrong == 0 && shortfall == failed,
        format!(
            "packets={} recovered={rate:.3} wrong={wrong} failures={failed} (rank shortfall {shortfall}) breakdown={}",
            cell["packets"], d["failures"]
        ),
    )
}

fn c9() -> Verdict {
    let rep = run(
        ExperimentKind::Decoder,
        "k = [24]\nmodel = \"selective\"\nb = 1.0\nadversary = \"selective:offline\"\nbound = \"final\"\npolicy = \"worst\"\ndecoder = \"exhaustive\"\ntrials = 200\nseed = 9\n",
    );
    let cell = &rep.cells[0];
    let d = &cell["decoders"]["exhaustive"];
    let all = u(&d["all_policies_recovered"]["count"]);
    verdict(
        all == 200 && u(&d["wrong"]) == 0,
        format!(
            "a={} packets={} threshold={} true block in {all}/200 trials against all 8 policies; exponent={:.4} bound 2^(-k*exponent)={:.3e}",
            cell["a"],
            cell["packets"],
            cell["threshold"],
            f(&cell["exponent"]),
            f(&cell["failure_bound"])
        ),
    )
}

fn c10() -> Verdict {
    let rep = run(
        ExperimentKind::Decoder,
        "k = [64]\nf = [4]\nepsilon = [8]\ng_base = 2.0\nadversary = \"uniform:offline\"\ndecoder = \"randomized\"\ntrials = 500\nseed = 10\n",
    );
    let cell = &rep.cells[0];
    let d = &cell["decoders"]["randomized"];
    let mean = f(&d["iterations_mean"]);
    let pred = f(&d["predicted_iterations"]);
    let ok = u(&d["recovered"]["count"]);
    verdict(
        mean >= pred / 2.0 && mean <= pred * 2.0 && ok == 500,
        format!(
            "g={} packets={} mean iterations={mean:.3} predicted={pred:.3} recovered={ok}/500",
            d["g"], cell["packets"]
        ),
    )
}

fn c11() -> Verdict {
    let (k, f, fixtures) = (16, 2, 100);
    let mut ok = 0;
    let mut min_mult = usize::MAX;
    for seed in 0..fixtures {
        let mut rng = rng_from_seed(1100 + seed);
        let blocks: Vec<BitVector> = (0..2).map(|_| BitVector::random_uniform(k, &mut rng)).collect();
        let mut enc = Encoder::new(&BitVector::concat(&blocks), 2, CodingDistribution::Uniform, HeaderForm::Dense, seed).unwrap();
        let mut packets: Vec<Packet> = enc.take(150);
        let sets = disjoint_full_rank_sets(&CodedSystem::from_packets(&packets).unwrap(), 2 * f + 1);
        // poison exactly two of the five sets
        let poisoned = [(seed as usize) % 5, (seed as usize + 2) % 5];
        for &s in &poisoned {
            let victim = sets[s][seed as usize % k];
            packets[victim].flip_payload(FlipMask::RandomSubset, &mut rng);
        }
        let out = majority_decode_blocks(&CodedSystem::from_packets(&packets).unwrap(), &[0, 1], f).unwrap();
        let mult = out.stats.multiplicity.iter().copied().min().unwrap_or(0);
        min_mult = min_mult.min(mult);
        ok += usize::from(out.blocks() == Some(&blocks[..]) && mult > f);
    }
    // applicability: c <= 1/(2k) - 1/(2n); at k = 16, n = 80 the limit is exactly 1/40
    let accepts = majority_applicable(CBound::new(1, 40).unwrap(), 16, 80);
    let rejects = [(1, 39, 80), (1, 32, 80), (1, 32, 1000), (1, 10, 200)]
        .iter()
        .all(|&(num, den, n)| !majority_applicable(CBound::new(num, den).unwrap(), 16, n));
    verdict(
        ok == fixtures as usize && accepts && rejects,
        format!("recovered {ok}/{fixtures} fixtures, min multiplicity {min_mult}; applicability accepts limit={accepts} rejects above={rejects}"),
    )
}

fn c12() -> Verdict {
    let rep = run(
        ExperimentKind::Decoder,
        "k = [12]\nf = [2]\nepsilon = [4]\nadversary = \"uniform:offline\"\ndecoder = \"exhaustive\"\ncompare = [\"randomized\"]\ntrials = 200\nseed = 12\n",
    );
    let cell = &rep.cells[0];
    let a = &cell["agreement"]["randomized"];
    let mutual = u(&a["mutual_successes"]);
    let agree = u(&a["agree"]);
    let truth = u(&a["agree_with_truth"]);
    verdict(
        mutual > 0 && agree == mutual && truth == mutual,
        format!("packets={} mutual successes={mutual} agree={agree} agree with truth={truth}", cell["packets"]),
    )
}

fn c13() -> Verdict {
    let configs = [
        (ExperimentKind::Rank, "k = [16]\nepsilon = [0, 2]\ntrials = 300\nseed = 13\n"),
        (ExperimentKind::Attack, "k = [40]\nattack = \"odd\"\ntrials = 50\nseed = 13\n"),
        (ExperimentKind::Attack, "k = [8]\nf = [1]\nattack = \"flip\"\nmask = \"random\"\nadversary = \"selective:online\"\npolicy = \"worst\"\ntrials = 20\nseed = 13\n"),
        (ExperimentKind::Decoder, "k = [10]\nf = [2]\nepsilon = [4]\ndecoder = \"randomized\"\ncompare = [\"exhaustive\", \"majority\", \"bp\"]\ntrials = 40\nseed = 13\n"),
        (ExperimentKind::SharedValue, "k = [8]\nepsilon = [6]\nsources = 5\nbyzantine = 1\ntrials = 40\nseed = 13\n"),
    ];
    let mut same = 0;
    for (kind, toml) in configs {
        let a = run(kind, toml).outcome_csv();
        let b = run(kind, toml).outcome_csv();
        same += usize::from(a == b && !a.is_empty());
    }
    verdict(same == configs.len(), format!("{same}/{} experiments byte-identical", configs.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 13] = [
        ("rank bound, uniform k=32", c1),
        ("rank bound, sparse k=64", c2),
        ("square rank limit", c3),
        ("odd-degree fraction", c4),
        ("odd-packets complement", c5),
        ("odd-packets feasibility", c6),
        ("vanishing symbol", c7),
        ("uniform adversary end-to-end", c8),
        ("selective adversary end-to-end", c9),
        ("randomized iterations", c10),
        ("majority fixtures", c11),
        ("cross-decoder agreement", c12),
        ("determinism", c13),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let label = format!("criterion {:>2}: {name}", i + 1);
        if !filter.is_empty() && !filter.iter().any(|f| label.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        failed += usize::from(!v.pass);
        println!(
            "{} {label} [{:.1}s] {}",
            if v.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
