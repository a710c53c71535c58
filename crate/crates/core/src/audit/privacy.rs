//! Distribution of what a coalition of workers observes.

use std::collections::BTreeMap;
use std::fmt;

use rand_chacha::rand_core::RngCore;
use rayon::prelude::*;

use crate::codec::{encode_source, encode_user, MaskSet, Origin, ProtocolParams, Share, SourceData, UserData};
use crate::field::{actor_rng, FieldMatrix};

use super::{bucket_count, bucket_of, chi_square_sf, AuditError};

/// Largest randomness space enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: u64 = 10_000_000;

/// One assignment of every party's private data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Secrets {
    pub sources: Vec<SourceData>,
    pub user: UserData,
}

impl Secrets {
    /// Every entry set to `value`.
    pub fn filled(params: &ProtocolParams, value: u64) -> Result<Self, AuditError> {
        let f = params.field();
        let (wr, wc) = params.w_block();
        let (ur, uc) = params.u_block();
        let sources = (0..params.sources())
            .map(|i| source_data(i, params, || FieldMatrix::filled(f, wr, wc, value)))
            .collect::<Result<_, _>>()?;
        let user = UserData::new(vec![FieldMatrix::filled(f, ur, uc, value); params.blocks()])?;
        Ok(Self { sources, user })
    }

    /// Uniform data.
    pub fn random<R: RngCore + ?Sized>(params: &ProtocolParams, rng: &mut R) -> Result<Self, AuditError> {
        let f = params.field();
        let (wr, wc) = params.w_block();
        let (ur, uc) = params.u_block();
        let sources = (0..params.sources())
            .map(|i| source_data(i, params, || FieldMatrix::random(f, wr, wc, rng)))
            .collect::<Result<_, _>>()?;
        let user = UserData::new(
            (0..params.blocks())
                .map(|_| FieldMatrix::random(f, ur, uc, rng))
                .collect(),
        )?;
        Ok(Self { sources, user })
    }
}

/// Standard partition when `S | K`, otherwise an additive piece of every
/// block per source, as bilinear jobs share their data.
fn source_data(
    source: usize,
    params: &ProtocolParams,
    mut block: impl FnMut() -> FieldMatrix,
) -> Result<SourceData, AuditError> {
    if params.blocks().is_multiple_of(params.sources()) {
        let blocks = (0..params.blocks_per_source()).map(|_| block()).collect();
        Ok(SourceData::partitioned(source, blocks, params)?)
    } else {
        Ok(SourceData::additive(
            source,
            (0..params.blocks()).map(|_| Some(block())).collect(),
        )?)
    }
}

/// All-zero data against all-`(q-1)` data.
pub fn extreme_secrets(params: &ProtocolParams) -> Result<(Secrets, Secrets), AuditError> {
    Ok((
        Secrets::filled(params, 0)?,
        Secrets::filled(params, params.field().modulus() - 1)?,
    ))
}

/// A set of colluding workers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollusionProbe {
    workers: Vec<usize>,
}

impl CollusionProbe {
    /// Exactly `X` distinct workers.
    pub fn new(workers: Vec<usize>, params: &ProtocolParams) -> Result<Self, AuditError> {
        if workers.len() != params.privacy() {
            return Err(AuditError::Probe(format!(
                "{} colluders given, privacy level is {}",
                workers.len(),
                params.privacy()
            )));
        }
        Self::beyond_threshold(workers, params)
    }

    /// Any number of distinct workers, for checking that more than `X`
    /// colluders do learn something.
    pub fn beyond_threshold(mut workers: Vec<usize>, params: &ProtocolParams) -> Result<Self, AuditError> {
        workers.sort_unstable();
        workers.dedup();
        if let Some(&w) = workers.iter().find(|&&w| w >= params.workers()) {
            return Err(AuditError::Probe(format!(
                "worker {w} does not exist (N={})",
                params.workers()
            )));
        }
        Ok(Self { workers })
    }

    /// Every `X`-subset of workers.
    pub fn all(params: &ProtocolParams) -> Vec<Self> {
        Self::all_of_size(params, params.privacy())
    }

    pub fn all_of_size(params: &ProtocolParams, size: usize) -> Vec<Self> {
        super::subsets(params.workers(), size)
            .into_iter()
            .map(|workers| Self { workers })
            .collect()
    }

    pub fn workers(&self) -> &[usize] {
        &self.workers
    }
}

/// How masks are drawn. `Zeroed` deliberately breaks the encoder so the
/// audits can be shown to catch it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaskMode {
    #[default]
    Uniform,
    Zeroed,
}

/// Exact counts of observed share tuples.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DistributionTable {
    counts: BTreeMap<Vec<u64>, u64>,
    total: u64,
}

impl DistributionTable {
    fn record(&mut self, tuple: Vec<u64>) {
        *self.counts.entry(tuple).or_insert(0) += 1;
        self.total += 1;
    }

    fn merge(mut self, other: Self) -> Self {
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
        self.total += other.total;
        self
    }

    /// Number of mask assignments enumerated.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct tuples observed.
    pub fn support(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, tuple: &[u64]) -> u64 {
        self.counts.get(tuple).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<u64>, u64)> {
        self.counts.iter().map(|(k, &v)| (k, v))
    }

    /// Projection onto the coordinates `range`.
    pub fn marginal(&self, range: std::ops::Range<usize>) -> Self {
        let mut out = Self::default();
        for (k, &v) in &self.counts {
            *out.counts.entry(k[range.clone()].to_vec()).or_insert(0) += v;
        }
        out.total = self.total;
        out
    }

    /// Every one of `support` tuples occurs equally often.
    pub fn is_uniform(&self, support: u128) -> bool {
        self.counts.len() as u128 == support
            && (self.total as u128).is_multiple_of(support)
            && self.counts.values().all(|&c| c as u128 == self.total as u128 / support)
    }

    /// Half the L1 distance between the two normalized tables.
    pub fn total_variation(&self, other: &Self) -> f64 {
        let p = |t: &Self, k: &Vec<u64>| t.count(k) as f64 / t.total.max(1) as f64;
        let keys: std::collections::BTreeSet<&Vec<u64>> = self.counts.keys().chain(other.counts.keys()).collect();
        keys.into_iter().map(|k| (p(self, k) - p(other, k)).abs()).sum::<f64>() / 2.0
    }

    /// Some tuple whose probability differs between the two tables.
    pub fn first_difference(&self, other: &Self) -> Option<Vec<u64>> {
        self.counts
            .keys()
            .chain(other.counts.keys())
            .find(|k| self.count(k) as u128 * other.total as u128 != other.count(k) as u128 * self.total as u128)
            .cloned()
    }
}

/// Number of mask entries the parties draw in total: `X` masks per source
/// plus `X` for the user.
fn mask_entries(params: &ProtocolParams) -> usize {
    let size = |(r, c): (usize, usize)| r * c;
    params.privacy() * (params.sources() * size(params.w_block()) + size(params.u_block()))
}

fn masks_from_digits(params: &ProtocolParams, digits: &[u64]) -> (Vec<MaskSet>, MaskSet) {
    let f = params.field();
    let mut it = digits.iter().copied();
    let mut take = |(r, c): (usize, usize)| {
        let data: Vec<u64> = (&mut it).take(r * c).collect();
        FieldMatrix::new(f, r, c, data).expect("digits are reduced and sized")
    };
    let sources = (0..params.sources())
        .map(|i| {
            let masks = (0..params.privacy()).map(|_| take(params.w_block())).collect();
            MaskSet::from_masks(Origin::Source(i), masks)
        })
        .collect();
    let user_masks = (0..params.privacy()).map(|_| take(params.u_block())).collect();
    (sources, MaskSet::from_masks(Origin::User, user_masks))
}

/// The probe's view: for each colluder in order, every source's share and
/// then the user's share, flattened.
fn observe(
    params: &ProtocolParams,
    secrets: &Secrets,
    source_masks: &[MaskSet],
    user_masks: &MaskSet,
    probe: &CollusionProbe,
) -> Result<Vec<u64>, AuditError> {
    let source_shares: Vec<Vec<Share>> = secrets
        .sources
        .iter()
        .zip(source_masks)
        .map(|(s, m)| encode_source(s, m, params))
        .collect::<Result<_, _>>()?;
    let user_shares = encode_user(&secrets.user, user_masks, params)?;
    let mut tuple = Vec::new();
    for &k in probe.workers() {
        for shares in &source_shares {
            tuple.extend_from_slice(shares[k].payload.as_slice());
        }
        tuple.extend_from_slice(user_shares[k].payload.as_slice());
    }
    Ok(tuple)
}

/// Tabulates the probe's view over every mask assignment.
pub fn distribution_table(
    params: &ProtocolParams,
    secrets: &Secrets,
    probe: &CollusionProbe,
) -> Result<DistributionTable, AuditError> {
    let q = params.field().modulus();
    let entries = mask_entries(params);
    let total = (q as u128)
        .checked_pow(entries as u32)
        .filter(|&t| t <= EXHAUSTIVE_LIMIT as u128)
        .ok_or_else(|| AuditError::Infeasible {
            required: format!("q^(SX|w| + X|u|) = {q}^{entries} mask assignments"),
            limit: EXHAUSTIVE_LIMIT,
        })? as u64;
    (0..total)
        .into_par_iter()
        .try_fold(DistributionTable::default, |mut table, idx| {
            let mut rest = idx;
            let digits: Vec<u64> = (0..entries)
                .map(|_| {
                    let d = rest % q;
                    rest /= q;
                    d
                })
                .collect();
            let (sm, um) = masks_from_digits(params, &digits);
            table.record(observe(params, secrets, &sm, &um, probe)?);
            Ok(table)
        })
        .try_reduce(DistributionTable::default, |a, b| Ok(a.merge(b)))
}

/// Exact comparison of one probe's view under two secrets.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub probe: Vec<usize>,
    pub assignments: u64,
    pub support: (usize, usize),
    pub total_variation: f64,
    /// A tuple whose probability depends on the secret, if any.
    pub distinguishing: Option<Vec<u64>>,
    /// Each colluder's share from each source is exactly uniform.
    pub source_marginals_uniform: bool,
}

impl ProbeReport {
    pub fn identical(&self) -> bool {
        self.distinguishing.is_none()
    }
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "probe {:?}: {} assignments, support {}/{}, tv={:.6}, marginals {} -> {}",
            self.probe,
            self.assignments,
            self.support.0,
            self.support.1,
            self.total_variation,
            if self.source_marginals_uniform {
                "uniform"
            } else {
                "NOT uniform"
            },
            match &self.distinguishing {
                None => "identical".to_string(),
                Some(t) => format!("LEAK at {t:?}"),
            }
        )
    }
}

/// Enumerates all `q^(SX|w| + X|u|)` mask assignments under both secrets and
/// compares the exact joint distributions of the probe's shares.
pub fn exhaustive_privacy_audit(
    params: &ProtocolParams,
    secrets_0: &Secrets,
    secrets_1: &Secrets,
    probe: &CollusionProbe,
) -> Result<ProbeReport, AuditError> {
    let t0 = distribution_table(params, secrets_0, probe)?;
    let t1 = distribution_table(params, secrets_1, probe)?;
    let w = params.w_block().0 * params.w_block().1;
    let u = params.u_block().0 * params.u_block().1;
    let stride = params.sources() * w + u;
    let q = params.field().modulus() as u128;
    let uniform_support = q.checked_pow(w as u32).unwrap_or(u128::MAX);
    let source_marginals_uniform = params.privacy() > 0
        && [&t0, &t1].iter().all(|t| {
            (0..probe.workers().len()).all(|c| {
                (0..params.sources()).all(|i| {
                    let start = c * stride + i * w;
                    t.marginal(start..start + w).is_uniform(uniform_support)
                })
            })
        });
    Ok(ProbeReport {
        probe: probe.workers().to_vec(),
        assignments: t0.total(),
        support: (t0.support(), t1.support()),
        total_variation: t0.total_variation(&t1),
        distinguishing: t0.first_difference(&t1),
        source_marginals_uniform,
    })
}

/// One projected coordinate's two-sample chi-square test.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateTest {
    pub worker: usize,
    pub party: Origin,
    pub entry: usize,
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatisticalReport {
    pub trials: usize,
    pub significance: f64,
    pub tests: Vec<CoordinateTest>,
}

impl StatisticalReport {
    /// Bonferroni-corrected per-test level.
    pub fn per_test_level(&self) -> f64 {
        self.significance / self.tests.len().max(1) as f64
    }

    pub fn min_p_value(&self) -> Option<f64> {
        self.tests.iter().map(|t| t.p_value).min_by(f64::total_cmp)
    }

    /// Some coordinate's distribution depends on the secret.
    pub fn rejected(&self) -> bool {
        self.min_p_value().is_some_and(|p| p < self.per_test_level())
    }
}

impl fmt::Display for StatisticalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "statistical audit: {} trials, {} coordinates, level {} (per test {:.2e})",
            self.trials,
            self.tests.len(),
            self.significance,
            self.per_test_level()
        )?;
        for t in &self.tests {
            writeln!(
                f,
                "  worker {} {} entry {}: chi2={:.3} dof={} p={:.4}",
                t.worker, t.party, t.entry, t.statistic, t.dof, t.p_value
            )?;
        }
        write!(
            f,
            "verdict: {}",
            if self.rejected() {
                "REJECT (dependence detected)"
            } else {
                "no rejection"
            }
        )
    }
}

/// At most this many entries per share are tested.
const ENTRIES_PER_SHARE: usize = 4;
const CHUNK: usize = 1024;

/// Samples the probe's view `trials` times under each secret, buckets each
/// projected coordinate into at most 16 residue ranges and runs a two-sample
/// chi-square test per coordinate.
pub fn statistical_privacy_audit(
    params: &ProtocolParams,
    secrets_0: &Secrets,
    secrets_1: &Secrets,
    probe: &CollusionProbe,
    trials: usize,
    significance: f64,
    seed: u64,
    mode: MaskMode,
) -> Result<StatisticalReport, AuditError> {
    let q = params.field().modulus();
    let buckets = bucket_count(q);
    let w = params.w_block().0 * params.w_block().1;
    let u = params.u_block().0 * params.u_block().1;
    let stride = params.sources() * w + u;
    // (offset in the observed tuple, worker, party, entry)
    let mut coords = Vec::new();
    for (c, &k) in probe.workers().iter().enumerate() {
        for i in 0..params.sources() {
            for e in 0..w.min(ENTRIES_PER_SHARE) {
                coords.push((c * stride + i * w + e, k, Origin::Source(i), e));
            }
        }
        for e in 0..u.min(ENTRIES_PER_SHARE) {
            coords.push((c * stride + params.sources() * w + e, k, Origin::User, e));
        }
    }
    if trials == 0 {
        return Ok(StatisticalReport {
            trials,
            significance,
            tests: Vec::new(),
        });
    }
    let histogram = |secrets: &Secrets, which: u64| -> Result<Vec<Vec<u64>>, AuditError> {
        let chunks = trials.div_ceil(CHUNK);
        (0..chunks)
            .into_par_iter()
            .map(|chunk| {
                let mut rng = actor_rng(seed, 2 * chunk as u64 + which);
                let mut hist = vec![vec![0u64; buckets]; coords.len()];
                let n = CHUNK.min(trials - chunk * CHUNK);
                for _ in 0..n {
                    let sm: Vec<MaskSet> = (0..params.sources())
                        .map(|i| draw_masks(params, Origin::Source(i), params.w_block(), mode, &mut rng))
                        .collect();
                    let um = draw_masks(params, Origin::User, params.u_block(), mode, &mut rng);
                    let tuple = observe(params, secrets, &sm, &um, probe)?;
                    for (h, &(off, ..)) in hist.iter_mut().zip(&coords) {
                        h[bucket_of(tuple[off], q, buckets)] += 1;
                    }
                }
                Ok(hist)
            })
            .try_reduce(
                || vec![vec![0u64; buckets]; coords.len()],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        for (p, r) in x.iter_mut().zip(y) {
                            *p += r;
                        }
                    }
                    Ok(a)
                },
            )
    };
    let h0 = histogram(secrets_0, 0)?;
    let h1 = histogram(secrets_1, 1)?;
    let tests = coords
        .iter()
        .zip(h0.iter().zip(&h1))
        .map(|(&(_, worker, party, entry), (a, b))| {
            let (statistic, dof) = two_sample_chi_square(a, b);
            CoordinateTest {
                worker,
                party,
                entry,
                statistic,
                dof,
                p_value: chi_square_sf(statistic, dof),
            }
        })
        .collect();
    Ok(StatisticalReport {
        trials,
        significance,
        tests,
    })
}

fn draw_masks<R: RngCore + ?Sized>(
    params: &ProtocolParams,
    owner: Origin,
    shape: (usize, usize),
    mode: MaskMode,
    rng: &mut R,
) -> MaskSet {
    match mode {
        MaskMode::Uniform => MaskSet::sample(owner, params.field(), params.privacy(), shape, rng),
        MaskMode::Zeroed => MaskSet::from_masks(
            owner,
            vec![FieldMatrix::zeros(params.field(), shape.0, shape.1); params.privacy()],
        ),
    }
}

/// Homogeneity statistic over the buckets either sample touches.
fn two_sample_chi_square(a: &[u64], b: &[u64]) -> (f64, usize) {
    let (na, nb) = (a.iter().sum::<u64>() as f64, b.iter().sum::<u64>() as f64);
    let mut stat = 0.0;
    let mut used = 0;
    for (&x, &y) in a.iter().zip(b) {
        let col = (x + y) as f64;
        if col == 0.0 {
            continue;
        }
        used += 1;
        let (ea, eb) = (na * col / (na + nb), nb * col / (na + nb));
        stat += (x as f64 - ea).powi(2) / ea + (y as f64 - eb).powi(2) / eb;
    }
    (stat, used.max(1) - 1)
}
