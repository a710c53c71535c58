//! Reed-Solomon error-and-erasure decoding, Gao's algorithm.
//!
//! Erasures (stragglers) are simply absent from the point set. For `n`
//! received points and degree bound `D`, Gao decoding corrects up to
//! `floor((n - D - 1) / 2)` errors: interpolate the received word, run the
//! extended Euclidean algorithm on `(prod (z - x_i), interpolant)` until the
//! remainder degree drops below `(n + D + 1) / 2`, then divide remainder by
//! the Bezout coefficient.
//!
//! Matrix responses are decoded entrywise. Byzantine workers corrupt whole
//! matrices, so the error positions found on a pilot entry are reused for the
//! remaining entries: each entry is re-interpolated without those points and
//! accepted if the result has degree `<= D`. An entry that fails this check
//! falls back to its own Gao decoding.
//!
//! Quadratic time per entry. Subquadratic fast interpolation is not
//! implemented; at the point counts used here it would not pay off.

use std::collections::HashSet;

use crate::field::{FieldMatrix, PrimeField};
use crate::poly::{Interpolator, Polynomial};

use super::{CodecError, WorkerResponse};

/// Which received responses the decoder consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResponsePolicy {
    /// The first `D + 2A + 1` responses in arrival order.
    #[default]
    FirstThreshold,
    /// Every response received; extra points buy extra error margin.
    UseAll,
}

/// A polynomial with matrix coefficients, stored as one scalar polynomial per
/// entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatrixPolynomial {
    field: PrimeField,
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial>,
}

impl MatrixPolynomial {
    pub fn from_entries(field: PrimeField, rows: usize, cols: usize, entries: Vec<Polynomial>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        Self {
            field,
            rows,
            cols,
            entries,
        }
    }

    /// `sum_i coeffs[i] z^i`.
    pub fn from_coefficients(coeffs: &[FieldMatrix]) -> Self {
        let (rows, cols) = coeffs[0].shape();
        let field = coeffs[0].field();
        let entries = (0..rows * cols)
            .map(|e| Polynomial::from_coeffs(field, coeffs.iter().map(|c| c.as_slice()[e]).collect()))
            .collect();
        Self::from_entries(field, rows, cols, entries)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn entry(&self, r: usize, c: usize) -> &Polynomial {
        &self.entries[r * self.cols + c]
    }

    /// Highest entry degree, `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.entries.iter().filter_map(Polynomial::degree).max()
    }

    pub fn eval_raw(&self, z: u64) -> FieldMatrix {
        let data = self.entries.iter().map(|p| p.eval_raw(z)).collect();
        FieldMatrix::new(self.field, self.rows, self.cols, data).expect("entries are reduced")
    }
}

/// Gao decoding of one scalar codeword. Returns `None` when no polynomial of
/// degree `<= degree_bound` lies within `floor((n - D - 1) / 2)` errors.
pub fn gao_decode(field: PrimeField, xs: &[u64], ys: &[u64], degree_bound: usize) -> Option<Polynomial> {
    let interp = Interpolator::new(field, xs).ok()?;
    gao_with(&interp, ys, degree_bound)
}

fn gao_with(interp: &Interpolator, ys: &[u64], degree_bound: usize) -> Option<Polynomial> {
    let n = interp.nodes().len();
    if n < degree_bound + 1 {
        return None;
    }
    let field = interp.node_polynomial().field();
    let g1 = interp.interpolate(ys).ok()?;
    let stop = |r: &Polynomial| r.degree().is_none_or(|d| 2 * d < n + degree_bound + 1);

    let (mut r_prev, mut r_cur) = (interp.node_polynomial().clone(), g1);
    let (mut v_prev, mut v_cur) = (Polynomial::zero(field), Polynomial::from_coeffs(field, vec![1]));
    while !stop(&r_cur) {
        let (q, r) = r_prev.div_rem(&r_cur).ok()?;
        let v_next = v_prev.sub(&q.mul(&v_cur));
        r_prev = std::mem::replace(&mut r_cur, r);
        v_prev = std::mem::replace(&mut v_cur, v_next);
    }
    let (f, rem) = r_cur.div_rem(&v_cur).ok()?;
    if !rem.is_zero() || f.degree().is_some_and(|d| d > degree_bound) {
        return None;
    }
    let max_errors = (n - degree_bound - 1) / 2;
    let errors = interp
        .nodes()
        .iter()
        .zip(ys)
        .filter(|&(&x, &y)| f.eval_raw(x) != y)
        .count();
    (errors <= max_errors).then_some(f)
}

/// Decoder output: the matrix polynomial and the workers whose answers fed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub poly: MatrixPolynomial,
    pub used_workers: Vec<usize>,
}

/// Recovers the unique matrix polynomial of degree `<= degree_bound`
/// consistent with all but `max_errors` of the used responses.
///
/// Needs at least `degree_bound + 2 max_errors + 1` answered responses;
/// stragglers are skipped. Responses are taken in the order given.
pub fn rs_decode(
    responses: &[WorkerResponse],
    degree_bound: usize,
    max_errors: usize,
    policy: ResponsePolicy,
) -> Result<DecodeOutcome, CodecError> {
    let answered: Vec<(usize, u64, &FieldMatrix)> = responses
        .iter()
        .filter_map(|r| r.payload().map(|y| (r.worker, r.alpha.value(), y)))
        .collect();
    let mut seen = HashSet::new();
    for &(_, alpha, _) in &answered {
        if !seen.insert(alpha) {
            return Err(CodecError::DuplicatePoint(alpha));
        }
    }
    let needed = degree_bound + 2 * max_errors + 1;
    if answered.len() < needed {
        return Err(CodecError::InsufficientResponses {
            needed,
            available: answered.len(),
        });
    }
    let used = match policy {
        ResponsePolicy::FirstThreshold => &answered[..needed],
        ResponsePolicy::UseAll => &answered[..],
    };
    let shape = used[0].2.shape();
    let field = used[0].2.field();
    if let Some(&(_, _, bad)) = used.iter().find(|(_, _, y)| y.shape() != shape) {
        return Err(CodecError::ShapeMismatch {
            expected: shape,
            got: bad.shape(),
        });
    }
    if used.iter().any(|(_, _, y)| y.field() != field) || responses[0].alpha.field() != field {
        return Err(CodecError::InvalidParams("responses from different fields".into()));
    }

    let xs: Vec<u64> = used.iter().map(|&(_, a, _)| a).collect();
    let interp = Interpolator::new(field, &xs)?;
    let entry_values = |e: usize| -> Vec<u64> { used.iter().map(|(_, _, y)| y.as_slice()[e]).collect() };
    let failure = |e: usize| CodecError::DecodingFailure {
        degree_bound,
        max_errors,
        entry: (e / shape.1, e % shape.1),
    };

    let n_entries = shape.0 * shape.1;
    let mut entries = Vec::with_capacity(n_entries);
    let pilot_ys = entry_values(0);
    let pilot = gao_with(&interp, &pilot_ys, degree_bound);

    // Interpolator over the points the pilot found clean.
    let clean = pilot.as_ref().map(|f| {
        let keep: Vec<usize> = (0..xs.len()).filter(|&i| f.eval_raw(xs[i]) == pilot_ys[i]).collect();
        let clean_xs: Vec<u64> = keep.iter().map(|&i| xs[i]).collect();
        (
            keep,
            Interpolator::new(field, &clean_xs).expect("subset of distinct nodes"),
        )
    });

    match pilot {
        Some(f) => entries.push(f),
        None => return Err(failure(0)),
    }
    for e in 1..n_entries {
        let ys = entry_values(e);
        let shared = clean.as_ref().and_then(|(keep, ci)| {
            let sub: Vec<u64> = keep.iter().map(|&i| ys[i]).collect();
            ci.interpolate(&sub)
                .ok()
                .filter(|p| p.degree().is_none_or(|d| d <= degree_bound))
        });
        let poly = match shared {
            Some(p) => p,
            None => gao_with(&interp, &ys, degree_bound).ok_or_else(|| failure(e))?,
        };
        entries.push(poly);
    }

    Ok(DecodeOutcome {
        poly: MatrixPolynomial::from_entries(field, shape.0, shape.1, entries),
        used_workers: used.iter().map(|&(w, _, _)| w).collect(),
    })
}
