use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crfountain::adversary::{parse_adversary_kind, transmit, AdversarySpec, AttackStrategy, BoundReading, CBound, FlipMask, VictimPolicy};
use crfountain::coding::{join_blocks, read_packets, write_packets, CodingDistribution, CodingError, Encoder, HeaderForm, MessageLayout, Packet, DEFAULT_DELTA, DEFAULT_WINDOW_C};
use crfountain::decoders::{
    bp_decode_coded, decode_all_blocks, DecodeFailure, g_for_base, plan_selective, plan_uniform, Algorithm, DecodeError, DecodeResult, DEFAULT_EXHAUSTIVE_CEILING,
};
use crfountain::experiments::{run_experiment, ExperimentConfig, ExperimentError, ExperimentKind};
use crfountain::gf2::BitVector;
use crfountain::rng::rng_from_seed;

const EXIT_DECODE_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_MALFORMED: u8 = 3;

#[derive(Parser)]
#[command(name = "crfountain", version, about = "Corruption-resilient rateless coding toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum DistArg {
    Uniform,
    Log,
}

#[derive(Clone, Copy, ValueEnum)]
enum HeaderArg {
    Dense,
    Indices,
    Seed,
}

#[derive(Clone, Copy, ValueEnum)]
enum AlgoArg {
    Bp,
    Majority,
    Exhaustive,
    Randomized,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Flip,
    Vanish,
    Odd,
}

#[derive(Clone, Copy, ValueEnum)]
enum MaskArg {
    Complement,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundArg {
    Prefix,
    Final,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExperimentArg {
    Rank,
    Attack,
    Decoder,
    SharedValue,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a file into a packet stream.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        blocks: usize,
        #[arg(long, value_enum, default_value = "uniform")]
        dist: DistArg,
        #[arg(long, default_value_t = DEFAULT_DELTA)]
        delta: f64,
        #[arg(long, value_enum, default_value = "dense")]
        header: HeaderArg,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recover the message from a packet stream.
    Decode {
        #[arg(long)]
        packets: PathBuf,
        #[arg(long, value_enum)]
        algo: AlgoArg,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        f: usize,
        #[arg(long, default_value_t = 4)]
        epsilon: usize,
        /// Plan against a selective adversary of strength b instead of a fixed f.
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pass a packet stream through a c-bounded adversary.
    Attack {
        #[arg(long)]
        packets: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        #[arg(long, default_value = "1/3")]
        c: String,
        #[arg(long, default_value = "uniform:offline")]
        adversary: String,
        #[arg(long, default_value_t = 0)]
        target: usize,
        #[arg(long, value_enum, default_value = "complement")]
        mask: MaskArg,
        #[arg(long, default_value = "random")]
        policy: String,
        #[arg(long, value_enum, default_value = "prefix")]
        bound: BoundArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment and write CSV and JSON results.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Failure with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn malformed(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_MALFORMED,
            message: message.into(),
        }
    }

    fn decode(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DECODE_FAILURE,
            message: message.into(),
        }
    }
}

impl From<CodingError> for Failure {
    fn from(e: CodingError) -> Self {
        match e {
            CodingError::Malformed { .. } => Failure::malformed(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<DecodeError> for Failure {
    fn from(e: DecodeError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::usage(e.to_string())
    }
}

/// Ground truth written next to an attacked stream.
#[derive(Serialize, Deserialize)]
struct Truth {
    corrupted: Vec<usize>,
    packets: usize,
}

fn describe(reason: &DecodeFailure) -> String {
    match reason {
        DecodeFailure::InsufficientPackets { have, need } => format!("need {need} packets, have {have}"),
        DecodeFailure::InsufficientIndependence { sets_formed, needed } => {
            format!("only {sets_formed} disjoint full-rank sets, need {needed}")
        }
        DecodeFailure::NoMajority { block, multiplicity, .. } => {
            format!("block {block}: best candidate reached multiplicity {multiplicity}")
        }
        DecodeFailure::Ambiguous { block } => format!("block {block}: two candidates fit the threshold"),
        DecodeFailure::NoCandidate { block } => format!("block {block}: no candidate fits the threshold"),
        DecodeFailure::IterationBudget { iterations } => format!("gave up after {iterations} iterations"),
    }
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn read_input(path: &Path) -> Result<Vec<u8>, Failure> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_output(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_packets(path: &Path) -> Result<Vec<Packet>, Failure> {
    let packets = read_packets(&read_input(path)?)?;
    if packets.is_empty() {
        return Err(Failure::malformed(format!("{}: no packets", path.display())));
    }
    Ok(packets)
}

#[allow(clippy::too_many_arguments)]
fn encode(
    input: &Path,
    blocks: usize,
    dist: DistArg,
    delta: f64,
    header: HeaderArg,
    count: usize,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let bytes = read_input(input)?;
    let message = BitVector::from_bytes_lsb(bytes.len() * 8, &bytes);
    let dist = match dist {
        DistArg::Uniform => CodingDistribution::Uniform,
        DistArg::Log => CodingDistribution::LogSparse {
            delta,
            window_c: DEFAULT_WINDOW_C,
        },
    };
    let form = match header {
        HeaderArg::Dense => HeaderForm::Dense,
        HeaderArg::Indices => HeaderForm::IndexList,
        HeaderArg::Seed => HeaderForm::Seed,
    };
    let mut enc = Encoder::new(&message, blocks, dist, form, seed)?;
    let packets = enc.take(count);
    write_output(out, &write_packets(&packets))?;
    let layout = serde_json::to_string_pretty(enc.layout()).expect("layout serializes");
    write_output(&sidecar(out, "layout"), layout.as_bytes())?;
    eprintln!("wrote {count} packets (k = {}, m = {blocks}) to {}", enc.layout().block_bits, out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn decode(packets_path: &Path, algo: AlgoArg, k: usize, f: usize, epsilon: usize, b: Option<f64>, seed: u64, out: &Path) -> Result<(), Failure> {
    let packets = load_packets(packets_path)?;
    if packets.iter().any(|p| p.k() != k) {
        return Err(Failure::usage(format!("--k {k} does not match the packets (k = {})", packets[0].k())));
    }
    let layout_path = sidecar(packets_path, "layout");
    let layout: Option<MessageLayout> = match std::fs::read(&layout_path) {
        Ok(text) => Some(serde_json::from_slice(&text).map_err(|e| Failure::malformed(format!("{}: {e}", layout_path.display())))?),
        Err(_) => None,
    };
    let blocks = match algo {
        AlgoArg::Bp => {
            let (_, blocks) = bp_decode_coded(&packets)?;
            blocks.ok_or_else(|| Failure::decode("belief propagation stalled"))?
        }
        _ => {
            let plan = match b {
                Some(b) => plan_selective(k, b)?,
                None => plan_uniform(k, f, epsilon)?,
            };
            let algorithm = match algo {
                AlgoArg::Majority => Algorithm::Majority,
                AlgoArg::Exhaustive => {
                    if k > DEFAULT_EXHAUSTIVE_CEILING {
                        return Err(Failure::usage(format!(
                            "k = {k} exceeds the exhaustive ceiling {DEFAULT_EXHAUSTIVE_CEILING}; use --algo randomized"
                        )));
                    }
                    Algorithm::Exhaustive
                }
                _ => Algorithm::Randomized {
                    g: g_for_base(k, plan.corruption_budget(), plan.epsilon.max(1), 2.0),
                },
            };
            let outcome = decode_all_blocks(&packets, &plan, algorithm, &mut rng_from_seed(seed))?;
            match outcome.result {
                DecodeResult::Recovered(blocks) => blocks,
                DecodeResult::Failed(reason) => return Err(Failure::decode(describe(&reason))),
            }
        }
    };
    let bits = match layout {
        Some(layout) => join_blocks(&layout, &blocks)?,
        None => BitVector::concat(&blocks),
    };
    write_output(out, &bits.to_bytes_lsb())?;
    eprintln!("recovered {} blocks into {}", blocks.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn attack(
    packets_path: &Path,
    strategy: StrategyArg,
    c: &str,
    adversary: &str,
    target: usize,
    mask: MaskArg,
    policy: &str,
    bound: BoundArg,
    seed: u64,
    out: &Path,
) -> Result<(), Failure> {
    let c: CBound = c.parse().map_err(|e: crfountain::adversary::AdversaryError| Failure::usage(e.to_string()))?;
    let (selection, knowledge) = parse_adversary_kind(adversary).map_err(|e| Failure::usage(e.to_string()))?;
    let policy: VictimPolicy = policy.parse().map_err(|_| Failure::usage(format!("unknown policy {policy:?}")))?;
    let packets = load_packets(packets_path)?;
    if matches!(strategy, StrategyArg::Vanish) && target >= packets[0].k() {
        return Err(Failure::usage(format!("--target {target} is out of range for k = {}", packets[0].k())));
    }
    let strategy = match strategy {
        StrategyArg::Flip => AttackStrategy::PayloadFlip {
            mask: match mask {
                MaskArg::Complement => FlipMask::Complement,
                MaskArg::Random => FlipMask::RandomSubset,
            },
            policy,
        },
        StrategyArg::Vanish => AttackStrategy::VanishingSymbol { target },
        StrategyArg::Odd => AttackStrategy::OddPackets,
    };
    let reading = match bound {
        BoundArg::Prefix => BoundReading::Prefix,
        BoundArg::Final => BoundReading::FinalSet,
    };
    let spec = AdversarySpec::new(selection, knowledge, c, strategy).with_reading(reading);
    let delivered = transmit(packets, &spec, &mut rng_from_seed(seed));
    let truth = Truth {
        corrupted: delivered.iter().enumerate().filter(|(_, d)| d.corrupted).map(|(i, _)| i).collect(),
        packets: delivered.len(),
    };
    let packets: Vec<Packet> = delivered.into_iter().map(|d| d.packet).collect();
    write_output(out, &write_packets(&packets))?;
    write_output(&sidecar(out, "truth"), serde_json::to_string_pretty(&truth).expect("truth serializes").as_bytes())?;
    eprintln!("corrupted {} of {} packets", truth.corrupted.len(), truth.packets);
    Ok(())
}

fn experiment(kind: ExperimentArg, config: &Path, trials: Option<usize>, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::from_path(config)?;
    if let Some(t) = trials {
        cfg.trials = t;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let kind = match kind {
        ExperimentArg::Rank => ExperimentKind::Rank,
        ExperimentArg::Attack => ExperimentKind::Attack,
        ExperimentArg::Decoder => ExperimentKind::Decoder,
        ExperimentArg::SharedValue => ExperimentKind::SharedValue,
    };
    let report = run_experiment(kind, &cfg)?;
    report.write_to_dir(out)?;
    eprintln!("wrote {} records to {}", report.records.len(), out.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Encode {
            input,
            blocks,
            dist,
            delta,
            header,
            count,
            seed,
            out,
        } => encode(&input, blocks, dist, delta, header, count, seed, &out),
        Command::Decode {
            packets,
            algo,
            k,
            f,
            epsilon,
            b,
            seed,
            out,
        } => decode(&packets, algo, k, f, epsilon, b, seed, &out),
        Command::Attack {
            packets,
            strategy,
            c,
            adversary,
            target,
            mask,
            policy,
            bound,
            seed,
            out,
        } => attack(&packets, strategy, &c, &adversary, target, mask, &policy, bound, seed, &out),
        Command::Experiment {
            kind,
            config,
            trials,
            seed,
            out,
        } => experiment(kind, &config, trials, seed, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
