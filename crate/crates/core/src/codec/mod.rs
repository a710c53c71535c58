//! Lagrange encoding of source and user data, worker-side evaluation, and
//! Reed-Solomon reconstruction of `h(W^(j), U^(j))`.
//!
//! With `K` data blocks and privacy level `X` every party interpolates a
//! matrix polynomial through `K + X` nodes: its data at `beta_1..beta_K` and
//! uniform masks at `beta_{K+1}..beta_{K+X}`. Worker `k` receives the
//! evaluations at `alpha_k`, sums the source shares and returns
//! `Y_k = h(f(alpha_k), g(alpha_k))`, a symbol of a Reed-Solomon codeword of
//! degree `(K + X - 1) deg_h`.

mod rs;
mod wire;

use std::fmt;

use rand_chacha::rand_core::RngCore;
use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldMatrix, PrimeField};
use crate::funcs::{FuncError, PolyFunction};
use crate::poly::{lagrange_row, EvalPoints, PolyError};

pub use rs::{gao_decode, rs_decode, DecodeOutcome, MatrixPolynomial, ResponsePolicy};
pub use wire::{decode_frames, Frame, WireError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("invalid protocol parameters: {0}")]
    InvalidParams(String),
    #[error("need {needed} responses, only {available} available")]
    InsufficientResponses { needed: usize, available: usize },
    #[error("no polynomial of degree <= {degree_bound} within {max_errors} errors (entry {entry:?})")]
    DecodingFailure {
        degree_bound: usize,
        max_errors: usize,
        entry: (usize, usize),
    },
    #[error("block shape {got:?} does not match expected {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("duplicate evaluation point {0} among responses")]
    DuplicatePoint(u64),
    #[error("share from {origin} addressed to worker {got}, expected worker {expected}")]
    WrongWorker {
        origin: Origin,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Poly(#[from] PolyError),
    #[error(transparent)]
    Func(#[from] FuncError),
}

/// Party counts and fault budgets of one protocol instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Topology {
    /// `N`
    pub workers: usize,
    /// `K`
    pub blocks: usize,
    /// `S`
    pub sources: usize,
    /// `X`, colluding workers tolerated
    pub privacy: usize,
    /// `A`, byzantine workers tolerated
    pub byzantine: usize,
    /// `B`, stragglers tolerated
    pub stragglers: usize,
}

/// `M = (K + X - 1) deg_h + 2A + 1`.
pub fn recovery_threshold_for(blocks: usize, privacy: usize, deg_h: usize, byzantine: usize) -> usize {
    (blocks + privacy - 1) * deg_h + 2 * byzantine + 1
}

/// Validated protocol parameters plus the evaluation points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolParams {
    field: PrimeField,
    topo: Topology,
    w_block: (usize, usize),
    u_block: (usize, usize),
    deg_h: usize,
    points: EvalPoints,
}

impl ProtocolParams {
    /// Parameters with explicit block shapes and the default point layout.
    pub fn new(
        field: PrimeField,
        topo: Topology,
        w_block: (usize, usize),
        u_block: (usize, usize),
        deg_h: usize,
    ) -> Result<Self, CodecError> {
        Self::check_topology(field, &topo, deg_h)?;
        if w_block.0 == 0 || w_block.1 == 0 || u_block.0 == 0 || u_block.1 == 0 {
            return Err(CodecError::InvalidParams("block dimensions must be positive".into()));
        }
        let points = EvalPoints::default_layout(field, topo.workers, topo.blocks, topo.privacy)?;
        Ok(Self {
            field,
            topo,
            w_block,
            u_block,
            deg_h,
            points,
        })
    }

    /// Parameters from base dimensions: each source holds an `a x b` matrix,
    /// so `W = [W_1 .. W_S]` is `a x bS` and every block is `a x (bS/K)`.
    pub fn from_base_dims(
        field: PrimeField,
        topo: Topology,
        a: usize,
        b: usize,
        deg_h: usize,
    ) -> Result<Self, CodecError> {
        if topo.sources == 0 || !topo.blocks.is_multiple_of(topo.sources) {
            return Err(CodecError::InvalidParams(format!(
                "S={} must divide K={}",
                topo.sources, topo.blocks
            )));
        }
        if !(b * topo.sources).is_multiple_of(topo.blocks) {
            return Err(CodecError::InvalidParams(format!(
                "K={} must divide b*S={}",
                topo.blocks,
                b * topo.sources
            )));
        }
        let block = (a, b * topo.sources / topo.blocks);
        Self::new(field, topo, block, block, deg_h)
    }

    /// Parameters for sharing only, with explicit points. The recovery
    /// threshold is not checked, so tiny fields that cannot host a decodable
    /// instance can still be audited; `deg_h = 1`, `A = B = 0`.
    pub fn for_encoding(
        sources: usize,
        points: EvalPoints,
        w_block: (usize, usize),
        u_block: (usize, usize),
    ) -> Result<Self, CodecError> {
        let data = points.data_betas().len();
        let topo = Topology {
            workers: points.alphas().len(),
            blocks: data,
            sources,
            privacy: points.mask_betas().len(),
            byzantine: 0,
            stragglers: 0,
        };
        if topo.workers == 0 || data == 0 || sources == 0 {
            return Err(CodecError::InvalidParams("N, K and S must all be at least 1".into()));
        }
        if w_block.0 == 0 || w_block.1 == 0 || u_block.0 == 0 || u_block.1 == 0 {
            return Err(CodecError::InvalidParams("block dimensions must be positive".into()));
        }
        Ok(Self {
            field: points.field(),
            topo,
            w_block,
            u_block,
            deg_h: 1,
            points,
        })
    }

    /// Replaces the default point layout.
    pub fn with_points(mut self, points: EvalPoints) -> Result<Self, CodecError> {
        if points.field() != self.field {
            return Err(CodecError::InvalidParams("points live in another field".into()));
        }
        if points.betas().len() != self.topo.blocks + self.topo.privacy
            || points.data_betas().len() != self.topo.blocks
            || points.alphas().len() != self.topo.workers
        {
            return Err(CodecError::InvalidParams(format!(
                "need {} betas ({} data) and {} alphas",
                self.topo.blocks + self.topo.privacy,
                self.topo.blocks,
                self.topo.workers
            )));
        }
        self.points = points;
        Ok(self)
    }

    fn check_topology(field: PrimeField, t: &Topology, deg_h: usize) -> Result<(), CodecError> {
        let invalid = |msg: String| Err(CodecError::InvalidParams(msg));
        if t.workers == 0 || t.blocks == 0 || t.sources == 0 || deg_h == 0 {
            return invalid("N, K, S and deg_h must all be at least 1".into());
        }
        let m = recovery_threshold_for(t.blocks, t.privacy, deg_h, t.byzantine);
        if m + t.stragglers > t.workers {
            return invalid(format!(
                "recovery threshold M={m} exceeds N-B={}",
                t.workers as i64 - t.stragglers as i64
            ));
        }
        if (field.modulus() as u128) <= (t.workers + t.blocks + t.privacy) as u128 {
            return invalid(format!(
                "q={} must exceed N+K+X={}",
                field.modulus(),
                t.workers + t.blocks + t.privacy
            ));
        }
        Ok(())
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn workers(&self) -> usize {
        self.topo.workers
    }

    pub fn blocks(&self) -> usize {
        self.topo.blocks
    }

    pub fn sources(&self) -> usize {
        self.topo.sources
    }

    pub fn privacy(&self) -> usize {
        self.topo.privacy
    }

    pub fn byzantine(&self) -> usize {
        self.topo.byzantine
    }

    pub fn stragglers(&self) -> usize {
        self.topo.stragglers
    }

    pub fn deg_h(&self) -> usize {
        self.deg_h
    }

    pub fn w_block(&self) -> (usize, usize) {
        self.w_block
    }

    pub fn u_block(&self) -> (usize, usize) {
        self.u_block
    }

    pub fn points(&self) -> &EvalPoints {
        &self.points
    }

    /// Blocks owned by each source under the standard partition, `K / S`.
    /// Only meaningful when `S` divides `K`; bilinear jobs lay data out
    /// additively instead.
    pub fn blocks_per_source(&self) -> usize {
        self.topo.blocks / self.topo.sources
    }

    /// Degree of `h(f(z), g(z))`, `(K + X - 1) deg_h`.
    pub fn decode_degree(&self) -> usize {
        (self.topo.blocks + self.topo.privacy - 1) * self.deg_h
    }

    /// `[l_1(alpha_k), ..., l_{K+X}(alpha_k)]` for every worker `k`.
    pub fn encoding_rows(&self) -> Vec<Vec<u64>> {
        let betas = self.points.betas();
        self.points
            .alphas()
            .iter()
            .map(|&a| lagrange_row(self.field, betas, a).expect("betas validated distinct"))
            .collect()
    }
}

/// `M` for validated parameters.
pub fn recovery_threshold(params: &ProtocolParams) -> usize {
    recovery_threshold_for(params.blocks(), params.privacy(), params.deg_h(), params.byzantine())
}

/// Who produced a share.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Origin {
    Source(usize),
    User,
}

impl fmt::Display for Origin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Origin::Source(i) => write!(f, "source:{i}"),
            Origin::User => write!(f, "user"),
        }
    }
}

/// One source's data, laid out against the `K` data nodes.
///
/// `pieces[t]` is what this source places at `beta_{t+1}`; `None` means the
/// source contributes nothing there. Under the standard partition source `i`
/// fills exactly its own `K/S` consecutive slots. Bilinear jobs instead let
/// every source contribute an additive piece to any slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceData {
    source_id: usize,
    pieces: Vec<Option<FieldMatrix>>,
}

impl SourceData {
    /// Standard partition: `blocks` are `W^((i-1)K/S + 1) .. W^(iK/S)`.
    pub fn partitioned(
        source_id: usize,
        blocks: Vec<FieldMatrix>,
        params: &ProtocolParams,
    ) -> Result<Self, CodecError> {
        if !params.blocks().is_multiple_of(params.sources()) {
            return Err(CodecError::InvalidParams(format!(
                "standard partition needs S={} to divide K={}",
                params.sources(),
                params.blocks()
            )));
        }
        let per = params.blocks_per_source();
        if source_id >= params.sources() {
            return Err(CodecError::InvalidParams(format!(
                "source {source_id} out of range for S={}",
                params.sources()
            )));
        }
        if blocks.len() != per {
            return Err(CodecError::CountMismatch {
                what: "source blocks",
                expected: per,
                got: blocks.len(),
            });
        }
        let mut pieces = vec![None; params.blocks()];
        for (j, block) in blocks.into_iter().enumerate() {
            pieces[source_id * per + j] = Some(block);
        }
        Self::additive(source_id, pieces)
    }

    /// Splits the source's `a x b` matrix `W_i` column-wise into its `K/S`
    /// blocks.
    pub fn from_matrix(source_id: usize, w: &FieldMatrix, params: &ProtocolParams) -> Result<Self, CodecError> {
        let per = params.blocks_per_source();
        let grid = w.split_blocks(1, per)?;
        Self::partitioned(source_id, grid.into_iter().next().unwrap_or_default(), params)
    }

    /// Arbitrary per-slot contributions; all present pieces must share a shape.
    pub fn additive(source_id: usize, pieces: Vec<Option<FieldMatrix>>) -> Result<Self, CodecError> {
        let mut shapes = pieces.iter().flatten().map(|p| p.shape());
        if let Some(first) = shapes.next() {
            if let Some(bad) = shapes.find(|&s| s != first) {
                return Err(CodecError::ShapeMismatch {
                    expected: first,
                    got: bad,
                });
            }
        }
        Ok(Self { source_id, pieces })
    }

    pub fn source_id(&self) -> usize {
        self.source_id
    }

    pub fn pieces(&self) -> &[Option<FieldMatrix>] {
        &self.pieces
    }

    /// The blocks this source actually holds, in slot order.
    pub fn blocks(&self) -> Vec<&FieldMatrix> {
        self.pieces.iter().flatten().collect()
    }
}

/// The user's `K` blocks `U^(1) .. U^(K)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserData {
    blocks: Vec<FieldMatrix>,
}

impl UserData {
    pub fn new(blocks: Vec<FieldMatrix>) -> Result<Self, CodecError> {
        let first = blocks.first().ok_or(CodecError::CountMismatch {
            what: "user blocks",
            expected: 1,
            got: 0,
        })?;
        if let Some(bad) = blocks.iter().find(|b| b.shape() != first.shape()) {
            return Err(CodecError::ShapeMismatch {
                expected: first.shape(),
                got: bad.shape(),
            });
        }
        Ok(Self { blocks })
    }

    /// Splits `U` column-wise into `K` blocks.
    pub fn from_matrix(u: &FieldMatrix, params: &ProtocolParams) -> Result<Self, CodecError> {
        let grid = u.split_blocks(1, params.blocks())?;
        Self::new(grid.into_iter().next().unwrap_or_default())
    }

    pub fn blocks(&self) -> &[FieldMatrix] {
        &self.blocks
    }
}

/// The `X` uniform masks a party appends at the mask nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSet {
    owner: Origin,
    masks: Vec<FieldMatrix>,
}

impl MaskSet {
    /// `count` i.i.d. uniform masks of `shape`, drawn from `rng` in order.
    pub fn sample<R: RngCore + ?Sized>(
        owner: Origin,
        field: PrimeField,
        count: usize,
        shape: (usize, usize),
        rng: &mut R,
    ) -> Self {
        Self {
            owner,
            masks: (0..count)
                .map(|_| FieldMatrix::random(field, shape.0, shape.1, rng))
                .collect(),
        }
    }

    /// Explicit masks, used by exhaustive enumeration.
    pub fn from_masks(owner: Origin, masks: Vec<FieldMatrix>) -> Self {
        Self { owner, masks }
    }

    pub fn owner(&self) -> Origin {
        self.owner
    }

    pub fn masks(&self) -> &[FieldMatrix] {
        &self.masks
    }

    /// Entrywise sum of several parties' masks, `P_j = sum_i P^(i)_j`.
    pub fn aggregate<'a>(sets: impl IntoIterator<Item = &'a MaskSet>) -> Result<Vec<FieldMatrix>, CodecError> {
        let mut acc: Option<Vec<FieldMatrix>> = None;
        for set in sets {
            acc = Some(match acc {
                None => set.masks.clone(),
                Some(sum) => {
                    if sum.len() != set.masks.len() {
                        return Err(CodecError::CountMismatch {
                            what: "masks",
                            expected: sum.len(),
                            got: set.masks.len(),
                        });
                    }
                    sum.iter()
                        .zip(&set.masks)
                        .map(|(a, b)| a.mat_add(b))
                        .collect::<Result<_, _>>()?
                }
            });
        }
        Ok(acc.unwrap_or_default())
    }
}

/// An encoded block sent to one worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Share {
    pub origin: Origin,
    pub worker: usize,
    pub payload: FieldMatrix,
}

/// What the user hears back from worker `k`. A byzantine worker's answer is
/// indistinguishable from an honest one at this level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerResponse {
    pub worker: usize,
    pub alpha: FieldElement,
    pub status: ResponseStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResponseStatus {
    Responded(FieldMatrix),
    Straggled,
}

impl WorkerResponse {
    pub fn responded(worker: usize, alpha: FieldElement, y: FieldMatrix) -> Self {
        Self {
            worker,
            alpha,
            status: ResponseStatus::Responded(y),
        }
    }

    pub fn straggled(worker: usize, alpha: FieldElement) -> Self {
        Self {
            worker,
            alpha,
            status: ResponseStatus::Straggled,
        }
    }

    pub fn payload(&self) -> Option<&FieldMatrix> {
        match &self.status {
            ResponseStatus::Responded(y) => Some(y),
            ResponseStatus::Straggled => None,
        }
    }
}

fn encode(
    params: &ProtocolParams,
    origin: Origin,
    data: &[Option<&FieldMatrix>],
    masks: &MaskSet,
    shape: (usize, usize),
) -> Result<Vec<Share>, CodecError> {
    let (k, x) = (params.blocks(), params.privacy());
    if data.len() != k {
        return Err(CodecError::CountMismatch {
            what: "data slots",
            expected: k,
            got: data.len(),
        });
    }
    if masks.masks.len() != x {
        return Err(CodecError::CountMismatch {
            what: "masks",
            expected: x,
            got: masks.masks.len(),
        });
    }
    for block in data.iter().flatten().copied().chain(&masks.masks) {
        if block.shape() != shape {
            return Err(CodecError::ShapeMismatch {
                expected: shape,
                got: block.shape(),
            });
        }
        if block.field() != params.field() {
            return Err(FieldError::FieldMismatch {
                left: params.field().modulus(),
                right: block.field().modulus(),
            }
            .into());
        }
    }
    let nodes: Vec<Option<&FieldMatrix>> = data.iter().copied().chain(masks.masks.iter().map(Some)).collect();
    params
        .encoding_rows()
        .into_iter()
        .enumerate()
        .map(|(worker, row)| {
            let mut payload = FieldMatrix::zeros(params.field(), shape.0, shape.1);
            for (coeff, node) in row.into_iter().zip(&nodes) {
                if let Some(block) = node {
                    payload.add_scaled(coeff, block)?;
                }
            }
            Ok(Share {
                origin,
                worker,
                payload,
            })
        })
        .collect()
}

/// Shares `g(alpha_1) .. g(alpha_N)` of the user encoder
/// `g(z) = sum_{j<=K} U^(j) l_j(z) + sum_{j>K} Q_j l_j(z)`.
pub fn encode_user(u: &UserData, masks: &MaskSet, params: &ProtocolParams) -> Result<Vec<Share>, CodecError> {
    let data: Vec<Option<&FieldMatrix>> = u.blocks.iter().map(Some).collect();
    encode(params, Origin::User, &data, masks, params.u_block())
}

/// Shares `f^(i)(alpha_1) .. f^(i)(alpha_N)` of source `i`'s encoder, which
/// carries its own pieces at their data nodes, zero at the other data nodes,
/// and its masks at the mask nodes.
pub fn encode_source(w: &SourceData, masks: &MaskSet, params: &ProtocolParams) -> Result<Vec<Share>, CodecError> {
    if w.source_id >= params.sources() {
        return Err(CodecError::InvalidParams(format!(
            "source {} out of range for S={}",
            w.source_id,
            params.sources()
        )));
    }
    let data: Vec<Option<&FieldMatrix>> = w.pieces.iter().map(Option::as_ref).collect();
    encode(params, Origin::Source(w.source_id), &data, masks, params.w_block())
}

/// Worker-side sum of the `S` source shares, `f(alpha_k)`.
pub fn aggregate_shares(shares: &[&Share], params: &ProtocolParams) -> Result<FieldMatrix, CodecError> {
    if shares.len() != params.sources() {
        return Err(CodecError::CountMismatch {
            what: "source shares",
            expected: params.sources(),
            got: shares.len(),
        });
    }
    let worker = shares[0].worker;
    let mut acc = FieldMatrix::zeros(params.field(), params.w_block().0, params.w_block().1);
    for share in shares {
        if share.worker != worker {
            return Err(CodecError::WrongWorker {
                origin: share.origin,
                expected: worker,
                got: share.worker,
            });
        }
        if share.origin == Origin::User {
            return Err(CodecError::InvalidParams("user share passed as a source share".into()));
        }
        acc = acc.mat_add(&share.payload)?;
    }
    Ok(acc)
}

/// `Y_k = h(f(alpha_k), g(alpha_k))`.
pub fn worker_compute(
    w_share: &FieldMatrix,
    u_share: &FieldMatrix,
    h: &PolyFunction,
) -> Result<FieldMatrix, CodecError> {
    Ok(h.eval(w_share, u_share)?)
}

/// Result of a successful reconstruction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reconstruction {
    /// `h(W^(j), U^(j))` for `j = 1..K`.
    pub results: Vec<FieldMatrix>,
    /// Workers whose responses fed the decoder, in the order used.
    pub used_workers: Vec<usize>,
}

/// Decodes `h(f(z), g(z))` and evaluates it at `beta_1 .. beta_K`.
///
/// `responses` must already be in arrival order; the first-`M` policy takes
/// the earliest `M` answers.
pub fn reconstruct(
    responses: &[WorkerResponse],
    params: &ProtocolParams,
    h: &PolyFunction,
    policy: ResponsePolicy,
) -> Result<Reconstruction, CodecError> {
    let outcome = rs_decode(responses, params.decode_degree(), params.byzantine(), policy)?;
    if outcome.poly.shape() != h.out_shape() {
        return Err(CodecError::ShapeMismatch {
            expected: h.out_shape(),
            got: outcome.poly.shape(),
        });
    }
    let results = params
        .points()
        .data_betas()
        .iter()
        .map(|&b| outcome.poly.eval_raw(b))
        .collect();
    Ok(Reconstruction {
        results,
        used_workers: outcome.used_workers,
    })
}
