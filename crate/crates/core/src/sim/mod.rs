//! Deterministic protocol simulator.
//!
//! Sources, the user and `N` workers run in-process. Every message is a
//! function call recorded in a [`Transcript`], so a run is reproducible from
//! `(params, data, plan, seed)` down to the payload digests. Stragglers never
//! answer; byzantine workers answer with noise or with a consistent lie.

mod sweep;
mod transcript;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{
    aggregate_shares, encode_source, encode_user, reconstruct, worker_compute, CodecError, Frame, MaskSet,
    MatrixPolynomial, Origin, ProtocolParams, ResponsePolicy, Share, SourceData, Topology, UserData, WorkerResponse,
};
use crate::field::{actor_rng, FieldMatrix, PrimeField, SeededRng};
use crate::funcs::{bilinear_to_lcc_job, recombine, BilinearConstruction, FuncError, PolyFunction, SplitPolicy};

pub use sweep::{sweep, CellSummary, PlanSource, RunRow, SweepCell, SweepTable, Workload};
pub use transcript::{meter_costs, CostReport, Event, Outcome, Party, Phase, Transcript};

/// RNG stream of the user's masks; source `i` uses `SOURCE_STREAM + i`.
const USER_STREAM: u64 = 0;
const SOURCE_STREAM: u64 = 1;
const ADVERSARY_STREAM: u64 = 1 << 32;
const DATA_STREAM: u64 = 1 << 33;
const PLAN_STREAM: u64 = 1 << 34;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    #[error("invalid adversary plan: {0}")]
    Plan(String),
    #[error("message {seq} from {from} to {to} violates the communication pattern")]
    Topology { seq: usize, from: String, to: String },
    #[error("malformed transcript: {0}")]
    Malformed(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Func(#[from] FuncError),
}

/// What a byzantine worker sends instead of its honest result.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ByzantineMode {
    /// Fresh uniform matrix per worker.
    #[default]
    UniformNoise,
    /// All byzantine workers evaluate the same alternative codeword of full
    /// decode degree, drawn from `seed`.
    ConsistentLie { seed: u64 },
}

impl fmt::Display for ByzantineMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ByzantineMode::UniformNoise => f.write_str("noise"),
            ByzantineMode::ConsistentLie { seed } => write!(f, "lie({seed})"),
        }
    }
}

/// Which workers misbehave and when the rest answer.
///
/// Budgets are not enforced here so that over-budget plans can be run on
/// purpose; see [`AdversaryPlan::within_budget`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct AdversaryPlan {
    stragglers: BTreeSet<usize>,
    byzantine: BTreeSet<usize>,
    mode: ByzantineMode,
    delays: BTreeMap<usize, u64>,
}

impl AdversaryPlan {
    pub fn honest() -> Self {
        Self::default()
    }

    pub fn new(
        stragglers: impl IntoIterator<Item = usize>,
        byzantine: impl IntoIterator<Item = usize>,
        mode: ByzantineMode,
    ) -> Result<Self, SimError> {
        let stragglers: BTreeSet<usize> = stragglers.into_iter().collect();
        let byzantine: BTreeSet<usize> = byzantine.into_iter().collect();
        if let Some(w) = stragglers.intersection(&byzantine).next() {
            return Err(SimError::Plan(format!("worker {w} is both straggler and byzantine")));
        }
        Ok(Self {
            stragglers,
            byzantine,
            mode,
            delays: BTreeMap::new(),
        })
    }

    /// Extra ticks before worker `k` answers. Only affects arrival order.
    pub fn with_delays(mut self, delays: impl IntoIterator<Item = (usize, u64)>) -> Self {
        self.delays.extend(delays);
        self
    }

    /// `stragglers` and `byzantine` distinct workers drawn uniformly from `[N]`,
    /// plus random delays so arrival order varies.
    pub fn random<R: RngCore + ?Sized>(
        workers: usize,
        stragglers: usize,
        byzantine: usize,
        mode: ByzantineMode,
        rng: &mut R,
    ) -> Result<Self, SimError> {
        if stragglers + byzantine > workers {
            return Err(SimError::Plan(format!(
                "cannot place {stragglers} stragglers and {byzantine} byzantine among {workers} workers"
            )));
        }
        let mut order: Vec<usize> = (0..workers).collect();
        for i in (1..workers).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            order.swap(i, j);
        }
        let delays: Vec<(usize, u64)> = (0..workers).map(|k| (k, rng.next_u64() % 4)).collect();
        Ok(Self::new(
            order[..stragglers].iter().copied(),
            order[stragglers..stragglers + byzantine].iter().copied(),
            mode,
        )?
        .with_delays(delays))
    }

    /// Every placement of `stragglers` and `byzantine` disjoint workers.
    pub fn all_placements(workers: usize, stragglers: usize, byzantine: usize, mode: ByzantineMode) -> Vec<Self> {
        let mut plans = Vec::new();
        for s in crate::audit::subsets(workers, stragglers) {
            let rest: Vec<usize> = (0..workers).filter(|k| !s.contains(k)).collect();
            for b in crate::audit::subsets(rest.len(), byzantine) {
                let byz = b.iter().map(|&i| rest[i]);
                plans.push(Self::new(s.iter().copied(), byz, mode).expect("disjoint by construction"));
            }
        }
        plans
    }

    pub fn stragglers(&self) -> &BTreeSet<usize> {
        &self.stragglers
    }

    pub fn byzantine(&self) -> &BTreeSet<usize> {
        &self.byzantine
    }

    pub fn mode(&self) -> ByzantineMode {
        self.mode
    }

    pub fn delay(&self, worker: usize) -> u64 {
        self.delays.get(&worker).copied().unwrap_or(0)
    }

    /// At most `B` stragglers and `A` byzantine workers.
    pub fn within_budget(&self, params: &ProtocolParams) -> bool {
        self.stragglers.len() <= params.stragglers() && self.byzantine.len() <= params.byzantine()
    }

    fn check_indices(&self, workers: usize) -> Result<(), SimError> {
        let all = self.stragglers.iter().chain(&self.byzantine).chain(self.delays.keys());
        if let Some(w) = all.copied().find(|&w| w >= workers) {
            return Err(SimError::Plan(format!("worker {w} does not exist (N={workers})")));
        }
        Ok(())
    }
}

impl fmt::Display for AdversaryPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "stragglers={:?} byzantine={:?} mode={}",
            self.stragglers, self.byzantine, self.mode
        )
    }
}

/// Everything a run produced. A decoding failure is an outcome, not an
/// error, so it arrives together with its transcript.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub results: Result<Vec<FieldMatrix>, CodecError>,
    pub costs: CostReport,
    pub transcript: Transcript,
}

/// Sharing, computing and reconstruction for one instance.
///
/// Masks come from per-party streams of `seed`; byzantine payloads from a
/// separate adversary stream. Worker evaluations run in parallel but are
/// recorded in worker order.
pub fn run_protocol(
    params: &ProtocolParams,
    sources: &[SourceData],
    user: &UserData,
    h: &PolyFunction,
    plan: &AdversaryPlan,
    seed: u64,
    policy: ResponsePolicy,
) -> Result<RunReport, SimError> {
    let field = params.field();
    let n = params.workers();
    plan.check_indices(n)?;
    if sources.len() != params.sources() {
        return Err(CodecError::CountMismatch {
            what: "sources",
            expected: params.sources(),
            got: sources.len(),
        }
        .into());
    }
    if h.w_shape() != params.w_block() || h.u_shape() != params.u_block() {
        return Err(CodecError::ShapeMismatch {
            expected: params.w_block(),
            got: h.w_shape(),
        }
        .into());
    }
    let alphas = params.points().alphas();
    let mut events = Vec::new();

    // Sharing
    let mut source_shares: Vec<Vec<Share>> = Vec::with_capacity(sources.len());
    for (i, src) in sources.iter().enumerate() {
        if src.source_id() != i {
            return Err(SimError::Plan(format!(
                "source at position {i} claims id {}",
                src.source_id()
            )));
        }
        let mut rng = actor_rng(seed, SOURCE_STREAM + i as u64);
        let masks = MaskSet::sample(Origin::Source(i), field, params.privacy(), params.w_block(), &mut rng);
        let shares = encode_source(src, &masks, params)?;
        for s in &shares {
            record(
                &mut events,
                Phase::Sharing,
                Party::Source(i),
                Party::Worker(s.worker),
                0,
                Frame::from_share(s, alphas[s.worker]),
            );
        }
        source_shares.push(shares);
    }
    let mut rng = actor_rng(seed, USER_STREAM);
    let masks = MaskSet::sample(Origin::User, field, params.privacy(), params.u_block(), &mut rng);
    let user_shares = encode_user(user, &masks, params)?;
    for s in &user_shares {
        record(
            &mut events,
            Phase::Sharing,
            Party::User,
            Party::Worker(s.worker),
            0,
            Frame::from_share(s, alphas[s.worker]),
        );
    }

    // Computing
    let honest: Vec<Option<FieldMatrix>> = (0..n)
        .into_par_iter()
        .map(|k| {
            if plan.stragglers.contains(&k) {
                return Ok(None);
            }
            let refs: Vec<&Share> = source_shares.iter().map(|s| &s[k]).collect();
            let w = aggregate_shares(&refs, params)?;
            worker_compute(&w, &user_shares[k].payload, h).map(Some)
        })
        .collect::<Result<_, CodecError>>()?;
    let lie = match plan.mode {
        ByzantineMode::ConsistentLie { seed: lie_seed } => {
            let mut rng = actor_rng(lie_seed, ADVERSARY_STREAM);
            let (r, c) = h.out_shape();
            let coeffs: Vec<FieldMatrix> = (0..=params.decode_degree())
                .map(|_| FieldMatrix::random(field, r, c, &mut rng))
                .collect();
            Some(MatrixPolynomial::from_coefficients(&coeffs))
        }
        ByzantineMode::UniformNoise => None,
    };
    let mut adv_rng = actor_rng(seed, ADVERSARY_STREAM);
    let mut arrivals: Vec<(u64, WorkerResponse)> = Vec::with_capacity(n);
    for (k, y) in honest.into_iter().enumerate() {
        let Some(mut y) = y else { continue };
        if plan.byzantine.contains(&k) {
            y = match &lie {
                Some(p) => p.eval_raw(alphas[k]),
                None => FieldMatrix::random(field, y.rows(), y.cols(), &mut adv_rng),
            };
        }
        arrivals.push((
            1 + plan.delay(k),
            WorkerResponse::responded(k, field.reduce(alphas[k]), y),
        ));
    }
    arrivals.sort_by_key(|(tick, r)| (*tick, r.worker));
    let response_base = events.len();
    for (tick, r) in &arrivals {
        let frame = Frame::from_response(r).expect("only answered responses arrive");
        record(
            &mut events,
            Phase::Computing,
            Party::Worker(r.worker),
            Party::User,
            *tick,
            frame,
        );
    }

    // Reconstruction
    let responses: Vec<WorkerResponse> = arrivals.iter().map(|(_, r)| r.clone()).collect();
    let decoded = reconstruct(&responses, params, h, policy);
    let used: Vec<usize> = match (&decoded, policy) {
        (Ok(rec), _) => rec.used_workers.clone(),
        (Err(_), ResponsePolicy::UseAll) => responses.iter().map(|r| r.worker).collect(),
        (Err(_), ResponsePolicy::FirstThreshold) => responses
            .iter()
            .take(crate::codec::recovery_threshold(params))
            .map(|r| r.worker)
            .collect(),
    };
    let mut completion_tick = 0;
    for (offset, (tick, r)) in arrivals.iter().enumerate() {
        if used.contains(&r.worker) {
            events[response_base + offset].used = true;
            completion_tick = completion_tick.max(*tick);
        }
    }
    let outcome = match &decoded {
        Ok(rec) => Outcome::Decoded {
            used_workers: rec.used_workers.clone(),
        },
        Err(e) => Outcome::Failed { error: e.to_string() },
    };
    let transcript = Transcript {
        seed,
        modulus: field.modulus(),
        topology: *params.topology(),
        plan: plan.clone(),
        events,
        outcome,
        completion_tick,
    };
    let costs = meter_costs(&transcript)?;
    Ok(RunReport {
        results: decoded.map(|r| r.results),
        costs,
        transcript,
    })
}

fn record(events: &mut Vec<Event>, phase: Phase, from: Party, to: Party, tick: u64, frame: Frame) {
    events.push(Event {
        seq: events.len(),
        phase,
        from,
        to,
        tick,
        elements: frame.residues.len(),
        digest: transcript::digest(&frame),
        used: false,
        frame,
    });
}

/// Plaintext `h(W^(j), U^(j))`, where `W^(j)` is the sum of every source's
/// piece at slot `j`.
pub fn plaintext_oracle(
    field: PrimeField,
    sources: &[SourceData],
    user: &UserData,
    h: &PolyFunction,
) -> Result<Vec<FieldMatrix>, SimError> {
    user.blocks()
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let mut w = FieldMatrix::zeros(field, h.w_shape().0, h.w_shape().1);
            for src in sources {
                if let Some(piece) = src.pieces().get(j).and_then(Option::as_ref) {
                    w = w.mat_add(piece).map_err(FuncError::from)?;
                }
            }
            Ok(h.eval(&w, u)?)
        })
        .collect()
}

/// Uniform data for a standard-partition instance.
pub fn random_instance<R: RngCore + ?Sized>(
    params: &ProtocolParams,
    rng: &mut R,
) -> Result<(Vec<SourceData>, UserData), SimError> {
    let field = params.field();
    let (wr, wc) = params.w_block();
    let (ur, uc) = params.u_block();
    let sources = (0..params.sources())
        .map(|i| {
            let blocks = (0..params.blocks_per_source())
                .map(|_| FieldMatrix::random(field, wr, wc, rng))
                .collect();
            SourceData::partitioned(i, blocks, params)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let user = UserData::new(
        (0..params.blocks())
            .map(|_| FieldMatrix::random(field, ur, uc, rng))
            .collect(),
    )?;
    Ok((sources, user))
}

/// Data stream used by the sweep and the CLI for a run seed.
pub fn data_rng(seed: u64) -> SeededRng {
    actor_rng(seed, DATA_STREAM)
}

/// Placement stream used by the sweep for a run seed.
pub fn plan_rng(seed: u64) -> SeededRng {
    actor_rng(seed, PLAN_STREAM)
}

/// Costs predicted by the closed forms: `N |w_block|` per source,
/// `N |u_block|` for the user and `M |out_block|` downloaded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnalyticCosts {
    pub source_upload: usize,
    pub user_upload: usize,
    pub user_download: usize,
    pub threshold: usize,
}

pub fn analytic_costs(params: &ProtocolParams, h: &PolyFunction) -> AnalyticCosts {
    let size = |(r, c): (usize, usize)| r * c;
    let m = crate::codec::recovery_threshold(params);
    AnalyticCosts {
        source_upload: params.workers() * size(params.w_block()),
        user_upload: params.workers() * size(params.u_block()),
        user_download: m * size(h.out_shape()),
        threshold: m,
    }
}

/// A bilinear multiplication run: the decoded `R` products recombined into `W U`.
#[derive(Debug, Clone)]
pub struct BilinearRun {
    pub params: ProtocolParams,
    pub product: Result<FieldMatrix, SimError>,
    pub report: RunReport,
}

/// Runs `W U` through a bilinear construction, `W = [W_1 .. W_S]` split by
/// columns among the sources. `topo.blocks` must equal the construction's rank.
pub fn run_bilinear(
    field: PrimeField,
    topo: Topology,
    constr: &BilinearConstruction,
    source_parts: &[FieldMatrix],
    u: &FieldMatrix,
    plan: &AdversaryPlan,
    seed: u64,
    policy: ResponsePolicy,
) -> Result<BilinearRun, SimError> {
    if topo.blocks != constr.rank() || topo.sources != source_parts.len() {
        return Err(CodecError::InvalidParams(format!(
            "bilinear rank {} with {} slabs needs K={} and S={}, got K={} S={}",
            constr.rank(),
            source_parts.len(),
            constr.rank(),
            source_parts.len(),
            topo.blocks,
            topo.sources
        ))
        .into());
    }
    let job = bilinear_to_lcc_job(constr, source_parts, u, SplitPolicy::SplitAcrossSources)?;
    let params = ProtocolParams::new(field, topo, job.w_block, job.u_block, job.deg_h())?;
    let report = run_protocol(&params, &job.sources, &job.user, &job.h, plan, seed, policy)?;
    let product = match &report.results {
        Ok(products) => recombine(constr, products).map_err(SimError::from),
        Err(e) => Err(e.clone().into()),
    };
    Ok(BilinearRun {
        params,
        product,
        report,
    })
}
