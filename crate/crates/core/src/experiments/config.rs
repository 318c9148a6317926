use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::adversary::{parse_adversary_kind, BoundReading, CBound, FlipMask, Knowledge, Selection, VictimPolicy};
use crate::coding::{CodingDistribution, HeaderForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Rank,
    Attack,
    Decoder,
    SharedValue,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Rank => "rank",
            ExperimentKind::Attack => "attack",
            ExperimentKind::Decoder => "decoder",
            ExperimentKind::SharedValue => "shared-value",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rank" => Ok(Self::Rank),
            "attack" => Ok(Self::Attack),
            "decoder" => Ok(Self::Decoder),
            "shared-value" => Ok(Self::SharedValue),
            _ => Err(ExperimentError::Config(format!("unknown experiment {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistKind {
    Uniform,
    /// Log-sparse coding vectors, `(1 + delta) log2(k) / k`.
    Log,
    /// Fixed Bernoulli density given by `density`.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderKind {
    Dense,
    Indices,
    Seed,
}

impl From<HeaderKind> for HeaderForm {
    fn from(h: HeaderKind) -> Self {
        match h {
            HeaderKind::Dense => HeaderForm::Dense,
            HeaderKind::Indices => HeaderForm::IndexList,
            HeaderKind::Seed => HeaderForm::Seed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Flip,
    Vanish,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskKind {
    Complement,
    Random,
}

impl From<MaskKind> for FlipMask {
    fn from(m: MaskKind) -> Self {
        match m {
            MaskKind::Complement => FlipMask::Complement,
            MaskKind::Random => FlipMask::RandomSubset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundKind {
    Prefix,
    Final,
}

impl From<BoundKind> for BoundReading {
    fn from(b: BoundKind) -> Self {
        match b {
            BoundKind::Prefix => BoundReading::Prefix,
            BoundKind::Final => BoundReading::FinalSet,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderKind {
    Exhaustive,
    Randomized,
    Majority,
    Bp,
}

impl DecoderKind {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderKind::Exhaustive => "exhaustive",
            DecoderKind::Randomized => "randomized",
            DecoderKind::Majority => "majority",
            DecoderKind::Bp => "bp",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Uniform,
    Selective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegreeKindConfig {
    Robust,
    Ideal,
}

/// One experiment description. Grid axes (`k`, `epsilon`, `f`) take lists;
/// every combination is a cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub k: Vec<usize>,
    pub epsilon: Vec<usize>,
    pub f: Vec<usize>,
    /// Message blocks.
    pub m: usize,
    /// Selective adversary strength, in units of `k`.
    pub b: f64,
    /// Corruption ratio such as `"1/3"` or `"0.2"`; `"auto"` sets it to the
    /// plan's budget over the packet count.
    pub c: String,
    pub dist: DistKind,
    pub density: Option<f64>,
    pub delta: f64,
    pub window_c: f64,
    pub header: HeaderKind,
    pub model: ModelKind,
    pub adversary: String,
    pub bound: BoundKind,
    pub attack: AttackKind,
    pub mask: MaskKind,
    /// A victim policy name, or `"worst"` to run all of them.
    pub policy: String,
    pub target: usize,
    pub decoder: DecoderKind,
    pub compare: Vec<DecoderKind>,
    /// Base `b` of the `g > f (k + epsilon) / log2(b)` rule.
    pub g_base: f64,
    pub degree: DegreeKindConfig,
    pub lt_c: f64,
    pub lt_delta: f64,
    /// Packet count override.
    pub packets: Option<usize>,
    pub sources: usize,
    pub byzantine: usize,
    pub trials: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            k: vec![16],
            epsilon: vec![4],
            f: vec![0],
            m: 1,
            b: 1.0,
            c: "auto".into(),
            dist: DistKind::Uniform,
            density: None,
            delta: crate::coding::DEFAULT_DELTA,
            window_c: crate::coding::DEFAULT_WINDOW_C,
            header: HeaderKind::Dense,
            model: ModelKind::Uniform,
            adversary: "uniform:offline".into(),
            bound: BoundKind::Prefix,
            attack: AttackKind::Flip,
            mask: MaskKind::Complement,
            policy: "random".into(),
            target: 0,
            decoder: DecoderKind::Exhaustive,
            compare: Vec::new(),
            g_base: 2.0,
            degree: DegreeKindConfig::Robust,
            lt_c: crate::lt::DEFAULT_RS_C,
            lt_delta: crate::lt::DEFAULT_RS_DELTA,
            packets: None,
            sources: 1,
            byzantine: 0,
            trials: 100,
            seed: 0,
        }
    }
}

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub k: usize,
    pub epsilon: usize,
    pub f: usize,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(s).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if self.k.is_empty() || self.epsilon.is_empty() || self.f.is_empty() {
            return bad("grid axes k, epsilon and f must be nonempty".into());
        }
        if self.k.contains(&0) {
            return bad("k must be positive".into());
        }
        if self.m == 0 {
            return bad("m must be positive".into());
        }
        if self.trials == 0 {
            return bad("trials must be positive".into());
        }
        if self.c != "auto" {
            self.c.parse::<CBound>().map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        parse_adversary_kind(&self.adversary).map_err(|e| ExperimentError::Config(e.to_string()))?;
        if self.policy != "worst" {
            self.policy.parse::<VictimPolicy>().map_err(|_| ExperimentError::Config(format!("unknown policy {:?}", self.policy)))?;
        }
        if let Some(p) = self.density {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("density {p} must lie in (0, 1)"));
            }
        }
        if self.dist == DistKind::Bernoulli && self.density.is_none() {
            return bad("dist = \"bernoulli\" needs a density".into());
        }
        if self.sources == 0 || self.byzantine > self.sources {
            return bad("need sources >= 1 and byzantine <= sources".into());
        }
        if !(self.g_base > 1.0) {
            return bad("g_base must exceed 1".into());
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &k in &self.k {
            for &epsilon in &self.epsilon {
                for &f in &self.f {
                    out.push(Cell { k, epsilon, f });
                }
            }
        }
        out
    }

    pub fn adversary_kind(&self) -> (Selection, Knowledge) {
        parse_adversary_kind(&self.adversary).expect("validated")
    }

    pub fn policies(&self) -> Vec<VictimPolicy> {
        if self.policy == "worst" {
            VictimPolicy::ALL.to_vec()
        } else {
            vec![self.policy.parse().expect("validated")]
        }
    }

    pub fn coding_distribution(&self) -> CodingDistribution {
        match self.dist {
            DistKind::Log => CodingDistribution::LogSparse {
                delta: self.delta,
                window_c: self.window_c,
            },
            _ => CodingDistribution::Uniform,
        }
    }
}
