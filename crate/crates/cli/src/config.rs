//! TOML run configuration.
//!
//! ```toml
//! q = 2147483647
//! N = 20          # optional, defaults to M + B
//! K = 7
//! S = 2
//! X = 2
//! A = 1
//! B = 1
//! a = 4           # each source holds an a x b matrix
//! b = 2
//! h = "strassen"  # matmul | elementwise(d) | strassen
//! seed = 1
//! trials = 10
//!
//! [adversary]
//! stragglers = [3]        # fixed workers, or straggler_count = 1 for random
//! byzantine = [11]        # or byzantine_count = 1
//! mode = "noise"          # noise | lie
//! ```

use std::path::Path;

use lcc::codec::{recovery_threshold_for, ProtocolParams, ResponsePolicy, Topology};
use lcc::field::PrimeField;
use lcc::funcs::{builtin_matmul, elementwise_standard, strassen_2x2, PolyFunction};
use lcc::poly::EvalPoints;
use lcc::sim::{AdversaryPlan, ByzantineMode, PlanSource, SweepCell};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{}{key}: {msg}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid {
        line: Option<usize>,
        key: String,
        msg: String,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Raw {
    q: Option<u64>,
    #[serde(rename = "N")]
    n: Option<usize>,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "S")]
    s: Option<usize>,
    #[serde(rename = "X")]
    x: Option<usize>,
    #[serde(rename = "A")]
    a_byz: Option<usize>,
    #[serde(rename = "B")]
    b_str: Option<usize>,
    a: usize,
    b: usize,
    h: String,
    seed: Option<u64>,
    trials: Option<usize>,
    policy: Option<String>,
    adversary: Option<RawAdversary>,
    sweep: Option<RawSweep>,
    audit: Option<RawAudit>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    stragglers: Option<Vec<usize>>,
    byzantine: Option<Vec<usize>>,
    straggler_count: Option<usize>,
    byzantine_count: Option<usize>,
    mode: Option<String>,
    lie_seed: Option<u64>,
    delays: Option<Vec<(usize, u64)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    #[serde(rename = "K")]
    k: Vec<usize>,
    #[serde(rename = "X")]
    x: Vec<usize>,
    deg: Vec<usize>,
    #[serde(rename = "A")]
    a_byz: Vec<usize>,
    #[serde(rename = "B")]
    b_str: Vec<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAudit {
    pairs: Option<usize>,
    significance: Option<f64>,
    colluders: Option<usize>,
}

/// The function workers evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HSpec {
    /// `W U` on square blocks.
    MatMul,
    /// `sum_{s+t=d} W^s U^t + W + 1`, entrywise.
    Elementwise(usize),
    /// `W U` through Strassen's seven products.
    Strassen,
}

impl HSpec {
    pub fn parse(text: &str) -> Option<Self> {
        let t = text.trim();
        match t {
            "matmul" => Some(Self::MatMul),
            "strassen" => Some(Self::Strassen),
            _ => {
                let d = t.strip_prefix("elementwise(")?.strip_suffix(')')?;
                d.trim().parse().ok().filter(|&d| d >= 1).map(Self::Elementwise)
            }
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Self::MatMul | Self::Strassen => 2,
            Self::Elementwise(d) => d,
        }
    }
}

/// Where adversarial workers come from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Fixed(Vec<usize>),
    Random(usize),
}

impl Placement {
    fn len(&self) -> usize {
        match self {
            Self::Fixed(v) => v.len(),
            Self::Random(n) => *n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySpec {
    pub stragglers: Placement,
    pub byzantine: Placement,
    pub mode: ByzantineMode,
    pub delays: Vec<(usize, u64)>,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        Self {
            stragglers: Placement::Fixed(Vec::new()),
            byzantine: Placement::Fixed(Vec::new()),
            mode: ByzantineMode::UniformNoise,
            delays: Vec::new(),
        }
    }
}

/// Parameter grid for `sweep`. `N = M + B` in every cell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepSpec {
    pub blocks: Vec<usize>,
    pub privacy: Vec<usize>,
    pub degrees: Vec<usize>,
    pub byzantine: Vec<usize>,
    pub stragglers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSpec {
    /// Random secret pairs on top of the extremes.
    pub pairs: usize,
    pub significance: f64,
    /// Probe size; defaults to `X`.
    pub colluders: Option<usize>,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            pairs: 10,
            significance: 0.01,
            colluders: None,
        }
    }
}

/// A validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub field: PrimeField,
    pub topo: Topology,
    pub a: usize,
    pub b: usize,
    pub h: HSpec,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub trials: usize,
    pub policy: ResponsePolicy,
    pub sweep: Option<SweepSpec>,
    pub audit: AuditSpec,
}

/// Line of the first `key = ...` assignment, 1-based.
fn key_line(text: &str, key: &str) -> Option<usize> {
    text.lines()
        .position(|l| {
            let l = l.trim_start();
            l.strip_prefix(key)
                .is_some_and(|rest| rest.trim_start().starts_with('='))
                || l.trim_end() == format!("[{key}]")
        })
        .map(|i| i + 1)
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: Raw = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map_or(1, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
            ConfigError::Parse {
                line,
                msg: e.message().to_string(),
            }
        })?;
        let invalid = |key: &str, msg: String| ConfigError::Invalid {
            line: key_line(text, key),
            key: key.to_string(),
            msg,
        };
        let field =
            PrimeField::new(raw.q.unwrap_or(lcc::field::MERSENNE_31)).map_err(|e| invalid("q", e.to_string()))?;
        let h = HSpec::parse(&raw.h).ok_or_else(|| {
            invalid(
                "h",
                format!("unknown function `{}`; use matmul, elementwise(d) or strassen", raw.h),
            )
        })?;
        let (s, x, a_byz, b_str) = (
            raw.s.unwrap_or(1),
            raw.x.unwrap_or(0),
            raw.a_byz.unwrap_or(0),
            raw.b_str.unwrap_or(0),
        );
        if raw.k == 0 {
            return Err(invalid("K", "must be at least 1".into()));
        }
        let m = recovery_threshold_for(raw.k, x, h.degree(), a_byz);
        let topo = Topology {
            workers: raw.n.unwrap_or(m + b_str),
            blocks: raw.k,
            sources: s,
            privacy: x,
            byzantine: a_byz,
            stragglers: b_str,
        };
        let adversary = match raw.adversary {
            None => AdversarySpec::default(),
            Some(adv) => {
                let placement = |fixed: Option<Vec<usize>>, count: Option<usize>, key: &str| match (fixed, count) {
                    (Some(_), Some(_)) => Err(invalid(key, "give either a worker list or a count, not both".into())),
                    (Some(v), None) => Ok(Placement::Fixed(v)),
                    (None, Some(c)) => Ok(Placement::Random(c)),
                    (None, None) => Ok(Placement::Fixed(Vec::new())),
                };
                let mode = match adv.mode.as_deref() {
                    None | Some("noise") => ByzantineMode::UniformNoise,
                    Some("lie") => ByzantineMode::ConsistentLie {
                        seed: adv.lie_seed.unwrap_or(0),
                    },
                    Some(other) => return Err(invalid("mode", format!("unknown mode `{other}`; use noise or lie"))),
                };
                AdversarySpec {
                    stragglers: placement(adv.stragglers, adv.straggler_count, "stragglers")?,
                    byzantine: placement(adv.byzantine, adv.byzantine_count, "byzantine")?,
                    mode,
                    delays: adv.delays.unwrap_or_default(),
                }
            }
        };
        let policy = match raw.policy.as_deref() {
            None | Some("first") => ResponsePolicy::FirstThreshold,
            Some("all") => ResponsePolicy::UseAll,
            Some(other) => return Err(invalid("policy", format!("unknown policy `{other}`; use first or all"))),
        };
        let sweep = raw.sweep.map(|s| SweepSpec {
            blocks: s.k,
            privacy: s.x,
            degrees: s.deg,
            byzantine: s.a_byz,
            stragglers: s.b_str,
        });
        let audit = raw.audit.map_or_else(AuditSpec::default, |a| AuditSpec {
            pairs: a.pairs.unwrap_or(10),
            significance: a.significance.unwrap_or(0.01),
            colluders: a.colluders,
        });
        let cfg = Self {
            field,
            topo,
            a: raw.a,
            b: raw.b,
            h,
            adversary,
            seed: raw.seed.unwrap_or(0),
            trials: raw.trials.unwrap_or(1),
            policy,
            sweep,
            audit,
        };
        cfg.validate().map_err(|(key, msg)| invalid(key, msg))?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), (&'static str, String)> {
        if self.sweep.is_none() {
            self.cell("config").map_err(|e| (self.blame(&e), e))?;
        }
        let n = self.topo.workers;
        let check = |p: &Placement, key: &'static str| match p {
            Placement::Fixed(v) => match v.iter().find(|&&w| w >= n) {
                Some(w) => Err((key, format!("worker {w} does not exist (N={n}, workers are 0-based)"))),
                None => Ok(()),
            },
            Placement::Random(_) => Ok(()),
        };
        check(&self.adversary.stragglers, "stragglers")?;
        check(&self.adversary.byzantine, "byzantine")?;
        if let (Placement::Fixed(s), Placement::Fixed(b)) = (&self.adversary.stragglers, &self.adversary.byzantine) {
            if let Some(w) = s.iter().find(|w| b.contains(w)) {
                return Err(("byzantine", format!("worker {w} is also a straggler")));
            }
        }
        if self.adversary.stragglers.len() + self.adversary.byzantine.len() > n {
            return Err(("adversary", format!("more adversarial workers than N={n}")));
        }
        Ok(())
    }

    // Points a parameter error at the most likely key.
    fn blame(&self, msg: &str) -> &'static str {
        for (needle, key) in [
            ("N-B", "N"),
            ("must divide b", "K"),
            ("S=", "S"),
            ("q=", "q"),
            ("square", "h"),
            ("strassen", "h"),
        ] {
            if msg.contains(needle) {
                return key;
            }
        }
        "K"
    }

    /// Every adversary placement is within the `A`, `B` budgets.
    pub fn adversary_within_budget(&self) -> bool {
        self.adversary.stragglers.len() <= self.topo.stragglers && self.adversary.byzantine.len() <= self.topo.byzantine
    }

    /// The single cell this configuration describes.
    pub fn cell(&self, label: &str) -> Result<SweepCell, String> {
        let plans = self.plan_source();
        let mut cell = match self.h {
            HSpec::Strassen => {
                if self.topo.blocks != 7 {
                    return Err(format!("strassen needs K=7, got K={}", self.topo.blocks));
                }
                if self.a != self.b * self.topo.sources || !self.a.is_multiple_of(2) {
                    return Err(format!(
                        "strassen needs a square W with even side: a={} must equal b*S={} and be even",
                        self.a,
                        self.b * self.topo.sources
                    ));
                }
                SweepCell::bilinear(label, self.field, self.topo, strassen_2x2(), self.a, plans)
                    .map_err(|e| e.to_string())?
            }
            _ => {
                let params = self.params()?;
                SweepCell::standard(label, params.clone(), self.function(params.w_block())?, plans)
            }
        };
        cell.policy = self.policy;
        Ok(cell)
    }

    /// Standard-partition parameters: blocks of `a x bS/K`.
    pub fn params(&self) -> Result<ProtocolParams, String> {
        ProtocolParams::from_base_dims(self.field, self.topo, self.a, self.b, self.h.degree())
            .map_err(|e| e.to_string())
    }

    /// Sharing-only parameters for privacy audits, which need no decoding.
    /// Strassen configs audit the shares of the bilinear job.
    pub fn audit_params(&self) -> Result<ProtocolParams, String> {
        if self.h == HSpec::Strassen {
            return Ok(self.cell("audit")?.params);
        }
        if !self.topo.blocks.is_multiple_of(self.topo.sources) || !(self.b * self.topo.sources).is_multiple_of(self.topo.blocks) {
            return Err(format!(
                "S={} must divide K={} and K must divide b*S={}",
                self.topo.sources,
                self.topo.blocks,
                self.b * self.topo.sources
            ));
        }
        let block = (self.a, self.b * self.topo.sources / self.topo.blocks);
        let points = EvalPoints::default_layout(self.field, self.topo.workers, self.topo.blocks, self.topo.privacy)
            .map_err(|e| e.to_string())?;
        ProtocolParams::for_encoding(self.topo.sources, points, block, block).map_err(|e| e.to_string())
    }

    pub fn function(&self, block: (usize, usize)) -> Result<PolyFunction, String> {
        match self.h {
            HSpec::MatMul if block.0 != block.1 => Err(format!(
                "matmul needs square blocks, got {}x{} (choose a = b*S/K)",
                block.0, block.1
            )),
            HSpec::MatMul | HSpec::Strassen => builtin_matmul(block, block).map_err(|e| e.to_string()),
            HSpec::Elementwise(d) => elementwise_standard(d, block).map_err(|e| e.to_string()),
        }
    }

    pub fn plan_source(&self) -> PlanSource {
        let adv = &self.adversary;
        match (&adv.stragglers, &adv.byzantine) {
            (Placement::Fixed(s), Placement::Fixed(b)) => {
                let plan = AdversaryPlan::new(s.iter().copied(), b.iter().copied(), adv.mode)
                    .expect("validated disjoint")
                    .with_delays(adv.delays.iter().copied());
                PlanSource::Fixed(vec![plan])
            }
            _ => PlanSource::Random {
                stragglers: adv.stragglers.len(),
                byzantine: adv.byzantine.len(),
                mode: adv.mode,
            },
        }
    }
}
