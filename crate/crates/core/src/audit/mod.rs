//! Privacy checks.
//!
//! Zero mutual information between the data and what `X` colluding workers
//! see is tested as exact equality of share distributions: every mask
//! assignment is enumerated on tiny fields and the observed share tuples are
//! tabulated per secret. At production field sizes a bucketed chi-square test
//! gives evidence, never proof. The two supporting facts, invertibility of the
//! mask Cauchy matrices and uniformity of sums of uniforms, are checked
//! directly.

mod privacy;

use std::fmt;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

use crate::codec::{CodecError, ProtocolParams};
use crate::field::{sample_uniform, seeded_rng, PrimeField};
use crate::poly::{cauchy_matrix_raw, determinant, PolyError};

pub use privacy::{
    exhaustive_privacy_audit, extreme_secrets, statistical_privacy_audit, CollusionProbe, CoordinateTest,
    DistributionTable, MaskMode, ProbeReport, Secrets, StatisticalReport, EXHAUSTIVE_LIMIT,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("exhaustive enumeration needs {required}, limit is {limit}")]
    Infeasible { required: String, limit: u64 },
    #[error("invalid probe: {0}")]
    Probe(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Poly(#[from] PolyError),
}

/// Limit on `C(N, X)` for the Cauchy check.
pub const CAUCHY_SUBSET_LIMIT: u64 = 1_000_000;

/// All `k`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (0..k).rev().find(|&i| cur[i] < n - k + i) else {
            return out;
        };
        cur[i] += 1;
        for j in i + 1..k {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

/// `C(n, k)`, saturating.
pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul(n - i) / (i + 1))
}

/// Outcome of the Cauchy invertibility check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CauchyReport {
    pub subsets_checked: usize,
    /// Worker subsets whose mask matrix is singular.
    pub singular: Vec<Vec<usize>>,
}

impl CauchyReport {
    pub fn passed(&self) -> bool {
        self.singular.is_empty()
    }
}

impl fmt::Display for CauchyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "cauchy: {} subsets checked, {} singular",
            self.subsets_checked,
            self.singular.len()
        )?;
        if let Some(first) = self.singular.first() {
            write!(f, " (first {first:?})")?;
        }
        Ok(())
    }
}

/// For every `X`-subset of workers, the matrix `[l_{K+j}(alpha_i)]` that maps
/// the masks onto the colluders' shares must be invertible.
pub fn check_cauchy_all_subsets(params: &ProtocolParams) -> Result<CauchyReport, AuditError> {
    let pts = params.points();
    check_cauchy_points(params.field(), pts.betas(), pts.data_betas().len(), pts.alphas())
}

/// Same check on raw points, without the disjointness validation, so broken
/// layouts can be examined.
pub fn check_cauchy_points(
    field: PrimeField,
    betas: &[u64],
    data_points: usize,
    alphas: &[u64],
) -> Result<CauchyReport, AuditError> {
    let x = betas.len() - data_points;
    let count = binomial(alphas.len() as u64, x as u64);
    if count > CAUCHY_SUBSET_LIMIT {
        return Err(AuditError::Infeasible {
            required: format!("C({}, {x}) = {count} subsets", alphas.len()),
            limit: CAUCHY_SUBSET_LIMIT,
        });
    }
    let mut singular = Vec::new();
    let mut checked = 0;
    if x == 0 {
        return Ok(CauchyReport {
            subsets_checked: 0,
            singular,
        });
    }
    for subset in subsets(alphas.len(), x) {
        checked += 1;
        let a: Vec<u64> = subset.iter().map(|&i| alphas[i]).collect();
        let full = cauchy_matrix_raw(field, &a, betas)?;
        let masks = full.submatrix(0, data_points, x, x);
        if determinant(&masks)?.is_zero() {
            singular.push(subset);
        }
    }
    Ok(CauchyReport {
        subsets_checked: checked,
        singular,
    })
}

/// Distribution of `phi_1 + .. + phi_X` for i.i.d. uniform `phi_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SumReport {
    pub modulus: u64,
    pub terms: usize,
    /// Count (exhaustive) or draws (sampled) per value or bucket.
    pub counts: Vec<u64>,
    /// Exhaustive mode: the count every value must have, `q^(X-1)`.
    pub expected: Option<u64>,
    /// Sampled mode: chi-square p-value against the exact bucket masses.
    pub p_value: Option<f64>,
    pub passed: bool,
}

impl fmt::Display for SumReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sum of {} uniforms mod {}: ", self.terms, self.modulus)?;
        match (self.expected, self.p_value) {
            (Some(e), _) => write!(f, "each value expected {e} times, observed {:?}", self.counts)?,
            (_, Some(p)) => write!(f, "chi-square p={p:.4}")?,
            _ => write!(f, "no samples")?,
        }
        write!(f, " -> {}", if self.passed { "uniform" } else { "NOT uniform" })
    }
}

/// Enumerates all `q^X` mask tuples and counts each sum.
pub fn check_sum_uniform_exhaustive(field: PrimeField, terms: usize) -> Result<SumReport, AuditError> {
    let q = field.modulus();
    let total = (q as u128)
        .checked_pow(terms as u32)
        .filter(|&t| t <= EXHAUSTIVE_LIMIT as u128);
    let Some(total) = total else {
        return Err(AuditError::Infeasible {
            required: format!("{q}^{terms} tuples"),
            limit: EXHAUSTIVE_LIMIT,
        });
    };
    let mut counts = vec![0u64; q as usize];
    for idx in 0..total as u64 {
        let mut rest = idx;
        let mut sum = 0;
        for _ in 0..terms {
            sum = field.add(sum, rest % q);
            rest /= q;
        }
        counts[sum as usize] += 1;
    }
    let expected = if terms == 0 {
        None
    } else {
        Some(q.pow(terms as u32 - 1))
    };
    let passed = match expected {
        Some(e) => counts.iter().all(|&c| c == e),
        None => counts.first() == Some(&1),
    };
    Ok(SumReport {
        modulus: q,
        terms,
        counts,
        expected,
        p_value: None,
        passed,
    })
}

/// Samples `trials` sums and runs a chi-square goodness-of-fit test over at
/// most 16 equal residue ranges.
pub fn check_sum_uniform_sampled(
    field: PrimeField,
    terms: usize,
    trials: usize,
    seed: u64,
    significance: f64,
) -> SumReport {
    let q = field.modulus();
    let buckets = bucket_count(q);
    let mut counts = vec![0u64; buckets];
    let mut rng = seeded_rng(seed);
    for _ in 0..trials {
        let sum = (0..terms).fold(0, |acc, _| field.add(acc, sample_uniform(field, &mut rng).value()));
        counts[bucket_of(sum, q, buckets)] += 1;
    }
    let masses = bucket_masses(q, buckets);
    let p_value = (trials > 0 && terms > 0).then(|| chi_square_gof(&counts, &masses));
    SumReport {
        modulus: q,
        terms,
        counts,
        expected: None,
        p_value,
        passed: p_value.is_none_or(|p| p >= significance),
    }
}

pub(crate) fn bucket_count(q: u64) -> usize {
    q.min(16) as usize
}

/// Residue `v` falls into range `floor(v * buckets / q)`.
pub(crate) fn bucket_of(v: u64, q: u64, buckets: usize) -> usize {
    ((v as u128 * buckets as u128) / q as u128) as usize
}

fn bucket_masses(q: u64, buckets: usize) -> Vec<f64> {
    // bucket b holds residues v with b*q <= v*buckets < (b+1)*q
    let start = |b: usize| ((b as u128 * q as u128).div_ceil(buckets as u128)) as u64;
    (0..buckets)
        .map(|b| (start(b + 1).min(q) - start(b)) as f64 / q as f64)
        .collect()
}

fn chi_square_gof(counts: &[u64], masses: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    let stat: f64 = counts
        .iter()
        .zip(masses)
        .map(|(&c, &m)| {
            let e = m * n as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    chi_square_sf(stat, counts.len() - 1)
}

pub(crate) fn chi_square_sf(stat: f64, dof: usize) -> f64 {
    if dof == 0 {
        return if stat > 0.0 { 0.0 } else { 1.0 };
    }
    ChiSquared::new(dof as f64).map_or(0.0, |d| d.sf(stat))
}

#[cfg(test)]
mod tests;
