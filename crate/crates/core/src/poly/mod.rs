//! Lagrange basis machinery over a prime field.
//!
//! Covers basis evaluation, interpolation, generalized Cauchy matrices
//! `[l_j(alpha_i)]` and Gauss-Jordan inversion. Interpolation is the quadratic
//! Newton scheme; sizes here stay at a few hundred points at most.

mod polynomial;

use std::collections::HashSet;

use thiserror::Error;

use crate::field::{FieldElement, FieldError, FieldMatrix, PrimeField};

pub use polynomial::Polynomial;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("duplicate interpolation node {0}")]
    DuplicateNode(u64),
    #[error("evaluation point {0} is used both as a worker point and as a data/mask point")]
    PointsOverlap(u64),
    #[error("basis index {index} out of range for {len} nodes")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("field F_{modulus} has too few elements for {needed} distinct points")]
    FieldTooSmall { modulus: u64, needed: usize },
    #[error("expected {expected} points, got {got}")]
    WrongPointCount { expected: usize, got: usize },
    #[error("matrix is not square: {0}x{1}")]
    NotSquare(usize, usize),
    #[error("matrix is singular")]
    Singular,
    #[error("operands belong to different fields")]
    FieldMismatch,
    #[error("polynomial division by zero")]
    DivisionByZero,
    #[error("interpolation needs at least one point")]
    NoPoints,
    #[error(transparent)]
    Field(#[from] FieldError),
}

fn ensure_distinct(points: &[u64]) -> Result<(), PolyError> {
    let mut seen = HashSet::with_capacity(points.len());
    for &p in points {
        if !seen.insert(p) {
            return Err(PolyError::DuplicateNode(p));
        }
    }
    Ok(())
}

fn raw(points: &[FieldElement], field: PrimeField) -> Result<Vec<u64>, PolyError> {
    points
        .iter()
        .map(|p| {
            if p.field() == field {
                Ok(p.value())
            } else {
                Err(PolyError::FieldMismatch)
            }
        })
        .collect()
}

/// Interpolation nodes `beta_1..beta_{K+X}` and worker points `alpha_1..alpha_N`.
///
/// The first `K` betas carry data blocks, the remaining `X` carry masks. Worker
/// points are disjoint from every beta, including the mask points: the
/// Cauchy-matrix privacy argument needs `alpha_k` away from the mask nodes too.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalPoints {
    field: PrimeField,
    data_points: usize,
    betas: Vec<u64>,
    alphas: Vec<u64>,
}

impl EvalPoints {
    pub fn new(
        field: PrimeField,
        data_points: usize,
        betas: Vec<FieldElement>,
        alphas: Vec<FieldElement>,
    ) -> Result<Self, PolyError> {
        let betas = raw(&betas, field)?;
        let alphas = raw(&alphas, field)?;
        if data_points > betas.len() {
            return Err(PolyError::WrongPointCount {
                expected: data_points,
                got: betas.len(),
            });
        }
        ensure_distinct(&betas)?;
        ensure_distinct(&alphas)?;
        let beta_set: HashSet<u64> = betas.iter().copied().collect();
        if let Some(&a) = alphas.iter().find(|a| beta_set.contains(a)) {
            return Err(PolyError::PointsOverlap(a));
        }
        Ok(Self {
            field,
            data_points,
            betas,
            alphas,
        })
    }

    /// `beta_j = j` for `j in 1..=K+X`, `alpha_k = K+X+k` for `k in 1..=N`.
    pub fn default_layout(
        field: PrimeField,
        workers: usize,
        data_points: usize,
        masks: usize,
    ) -> Result<Self, PolyError> {
        let needed = workers + data_points + masks;
        if (field.modulus() as u128) <= needed as u128 {
            return Err(PolyError::FieldTooSmall {
                modulus: field.modulus(),
                needed,
            });
        }
        let nb = data_points + masks;
        Ok(Self {
            field,
            data_points,
            betas: (1..=nb as u64).collect(),
            alphas: (nb as u64 + 1..=(nb + workers) as u64).collect(),
        })
    }

    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn betas(&self) -> &[u64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[u64] {
        &self.alphas
    }

    /// `beta_1..beta_K`.
    pub fn data_betas(&self) -> &[u64] {
        &self.betas[..self.data_points]
    }

    /// `beta_{K+1}..beta_{K+X}`.
    pub fn mask_betas(&self) -> &[u64] {
        &self.betas[self.data_points..]
    }

    pub fn alpha(&self, worker: usize) -> FieldElement {
        self.field.reduce(self.alphas[worker])
    }

    pub fn beta(&self, j: usize) -> FieldElement {
        self.field.reduce(self.betas[j])
    }
}

/// `l_j(z)` for the Lagrange basis on `betas` (0-based `j`).
pub fn lagrange_basis_at(betas: &[FieldElement], j: usize, z: FieldElement) -> Result<FieldElement, PolyError> {
    let field = z.field();
    let nodes = raw(betas, field)?;
    if j >= nodes.len() {
        return Err(PolyError::IndexOutOfRange {
            index: j,
            len: nodes.len(),
        });
    }
    ensure_distinct(&nodes)?;
    Ok(field.reduce(basis_value(field, &nodes, j, z.value())))
}

fn basis_value(field: PrimeField, nodes: &[u64], j: usize, z: u64) -> u64 {
    let bj = nodes[j];
    let (mut num, mut den) = (1u64, 1u64);
    for (l, &bl) in nodes.iter().enumerate() {
        if l == j {
            continue;
        }
        num = field.mul(num, field.sub(z, bl));
        den = field.mul(den, field.sub(bj, bl));
    }
    // nodes are distinct, so den != 0
    field.mul(num, field.inv(den).expect("distinct nodes"))
}

/// All basis values `[l_1(z), ..., l_n(z)]` on distinct raw `nodes`.
pub fn lagrange_row(field: PrimeField, nodes: &[u64], z: u64) -> Result<Vec<u64>, PolyError> {
    ensure_distinct(nodes)?;
    Ok((0..nodes.len()).map(|j| basis_value(field, nodes, j, z)).collect())
}

/// Unique polynomial of degree `< points.len()` through the given pairs.
pub fn interpolate(points: &[(FieldElement, FieldElement)]) -> Result<Polynomial, PolyError> {
    let Some(&(x0, _)) = points.first() else {
        return Err(PolyError::NoPoints);
    };
    let field = x0.field();
    let xs: Vec<u64> = raw(&points.iter().map(|p| p.0).collect::<Vec<_>>(), field)?;
    let ys: Vec<u64> = raw(&points.iter().map(|p| p.1).collect::<Vec<_>>(), field)?;
    interpolate_raw(field, &xs, &ys)
}

/// [`interpolate`] on raw residues.
pub fn interpolate_raw(field: PrimeField, xs: &[u64], ys: &[u64]) -> Result<Polynomial, PolyError> {
    Interpolator::new(field, xs)?.interpolate(ys)
}

/// Interpolation on a fixed node set, reusable across many value vectors.
///
/// Precomputes the node polynomial `L(z) = prod (z - x_i)` and the weights
/// `w_i = 1 / prod_{j != i} (x_i - x_j)`, so each interpolation is `O(n^2)`
/// multiplications with no inversions.
#[derive(Debug, Clone)]
pub struct Interpolator {
    field: PrimeField,
    xs: Vec<u64>,
    weights: Vec<u64>,
    node_poly: Polynomial,
}

impl Interpolator {
    pub fn new(field: PrimeField, xs: &[u64]) -> Result<Self, PolyError> {
        if xs.is_empty() {
            return Err(PolyError::NoPoints);
        }
        let xs: Vec<u64> = xs.iter().map(|&x| x % field.modulus()).collect();
        ensure_distinct(&xs)?;
        let weights = xs
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let den = xs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .fold(1u64, |acc, (_, &xj)| field.mul(acc, field.sub(xi, xj)));
                field.inv(den)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            field,
            node_poly: Polynomial::from_roots(field, &xs),
            xs,
            weights,
        })
    }

    pub fn nodes(&self) -> &[u64] {
        &self.xs
    }

    /// `prod (z - x_i)` over the nodes.
    pub fn node_polynomial(&self) -> &Polynomial {
        &self.node_poly
    }

    pub fn interpolate(&self, ys: &[u64]) -> Result<Polynomial, PolyError> {
        let n = self.xs.len();
        if ys.len() != n {
            return Err(PolyError::WrongPointCount {
                expected: n,
                got: ys.len(),
            });
        }
        let f = self.field;
        let l = self.node_poly.coeffs();
        let mut acc = vec![0u64; n];
        let mut quot = vec![0u64; n];
        for ((&xi, &wi), &yi) in self.xs.iter().zip(&self.weights).zip(ys) {
            let c = f.mul(wi, yi % f.modulus());
            if c == 0 {
                continue;
            }
            // L(z) / (z - x_i) by synthetic division; L is monic of degree n.
            let mut carry = l[n];
            for k in (0..n).rev() {
                quot[k] = carry;
                carry = f.add(l[k], f.mul(carry, xi));
            }
            for (a, &qk) in acc.iter_mut().zip(&quot) {
                *a = f.add(*a, f.mul(c, qk));
            }
        }
        Ok(Polynomial::from_coeffs(f, acc))
    }
}

/// Generalized Cauchy matrix `[l_j(alpha_i)]`, basis built on `betas`.
pub fn cauchy_matrix(alphas: &[FieldElement], betas: &[FieldElement]) -> Result<FieldMatrix, PolyError> {
    let field = alphas.first().ok_or(PolyError::NoPoints)?.field();
    if alphas.len() != betas.len() {
        return Err(PolyError::WrongPointCount {
            expected: alphas.len(),
            got: betas.len(),
        });
    }
    let a = raw(alphas, field)?;
    let b = raw(betas, field)?;
    let mut all = a.clone();
    all.extend_from_slice(&b);
    ensure_distinct(&all)?;
    cauchy_matrix_raw(field, &a, &b)
}

pub(crate) fn cauchy_matrix_raw(field: PrimeField, alphas: &[u64], betas: &[u64]) -> Result<FieldMatrix, PolyError> {
    let n = alphas.len();
    let mut data = Vec::with_capacity(n * betas.len());
    for &a in alphas {
        data.extend(lagrange_row(field, betas, a)?);
    }
    Ok(FieldMatrix::new(field, n, betas.len(), data)?)
}

/// Gauss-Jordan inverse; singular input is reported, never panics.
pub fn invert_matrix(m: &FieldMatrix) -> Result<FieldMatrix, PolyError> {
    let (n, cols) = m.shape();
    if n != cols {
        return Err(PolyError::NotSquare(n, cols));
    }
    let f = m.field();
    let mut a: Vec<Vec<u64>> = (0..n).map(|r| (0..n).map(|c| m.get_raw(r, c)).collect()).collect();
    let mut inv: Vec<Vec<u64>> = (0..n).map(|r| (0..n).map(|c| u64::from(r == c)).collect()).collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| a[r][col] != 0).ok_or(PolyError::Singular)?;
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p_inv = f.inv(a[col][col])?;
        for c in 0..n {
            a[col][c] = f.mul(a[col][c], p_inv);
            inv[col][c] = f.mul(inv[col][c], p_inv);
        }
        for r in 0..n {
            if r == col || a[r][col] == 0 {
                continue;
            }
            let factor = a[r][col];
            for c in 0..n {
                a[r][c] = f.sub(a[r][c], f.mul(factor, a[col][c]));
                inv[r][c] = f.sub(inv[r][c], f.mul(factor, inv[col][c]));
            }
        }
    }
    Ok(FieldMatrix::new(f, n, n, inv.into_iter().flatten().collect())?)
}

/// Determinant by Gaussian elimination.
pub fn determinant(m: &FieldMatrix) -> Result<FieldElement, PolyError> {
    let (n, cols) = m.shape();
    if n != cols {
        return Err(PolyError::NotSquare(n, cols));
    }
    let f = m.field();
    let mut a: Vec<Vec<u64>> = (0..n).map(|r| (0..n).map(|c| m.get_raw(r, c)).collect()).collect();
    let mut det = 1u64;
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| a[r][col] != 0) else {
            return Ok(f.zero());
        };
        if pivot != col {
            a.swap(col, pivot);
            det = f.neg(det);
        }
        det = f.mul(det, a[col][col]);
        let p_inv = f.inv(a[col][col])?;
        for r in col + 1..n {
            let factor = f.mul(a[r][col], p_inv);
            if factor == 0 {
                continue;
            }
            for c in col..n {
                a[r][c] = f.sub(a[r][c], f.mul(factor, a[col][c]));
            }
        }
    }
    Ok(f.reduce(det))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{sample_uniform, seeded_rng};
    use proptest::prelude::*;

    fn els(field: PrimeField, vs: &[u64]) -> Vec<FieldElement> {
        vs.iter().map(|&v| field.reduce(v)).collect()
    }

    // Permutation-expansion determinant, independent of elimination.
    fn leibniz_det(m: &FieldMatrix) -> u64 {
        let f = m.field();
        let n = m.rows();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0u64;
        fn permutations(k: usize, perm: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, bool)>, odd: bool) {
            if k == perm.len() {
                out.push((perm.clone(), odd));
                return;
            }
            for i in k..perm.len() {
                perm.swap(k, i);
                permutations(k + 1, perm, out, if i != k { !odd } else { odd });
                perm.swap(k, i);
            }
        }
        let mut all = Vec::new();
        permutations(0, &mut perm, &mut all, false);
        for (p, odd) in all {
            let term = (0..n).fold(1u64, |acc, r| f.mul(acc, m.get_raw(r, p[r])));
            total = if odd { f.sub(total, term) } else { f.add(total, term) };
        }
        total
    }

    #[test]
    fn basis_is_kronecker_on_nodes() {
        let f = PrimeField::new(13).unwrap();
        let betas = els(f, &[2, 5, 7, 11]);
        for j in 0..4 {
            for m in 0..4 {
                let v = lagrange_basis_at(&betas, j, betas[m]).unwrap();
                assert_eq!(v.value(), u64::from(j == m));
            }
        }
    }

    #[test]
    fn basis_hand_value() {
        let f = PrimeField::new(7).unwrap();
        let betas = els(f, &[1, 2, 3]);
        let v = lagrange_basis_at(&betas, 0, f.reduce(4)).unwrap();
        assert_eq!(v.value(), 1);
    }

    #[test]
    fn basis_errors() {
        let f = PrimeField::new(7).unwrap();
        let dup = els(f, &[1, 2, 1]);
        assert_eq!(
            lagrange_basis_at(&dup, 0, f.reduce(4)),
            Err(PolyError::DuplicateNode(1))
        );
        let betas = els(f, &[1, 2]);
        assert!(matches!(
            lagrange_basis_at(&betas, 2, f.reduce(4)),
            Err(PolyError::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn interpolate_recovers_generator() {
        let f = PrimeField::new(257).unwrap();
        let mut rng = seeded_rng(11);
        for deg in 0..10usize {
            let coeffs: Vec<u64> = (0..=deg).map(|_| sample_uniform(f, &mut rng).value()).collect();
            let p = Polynomial::from_coeffs(f, coeffs);
            let pts: Vec<_> = (0..=deg as u64)
                .map(|x| (f.reduce(x + 3), p.eval(f.reduce(x + 3)).unwrap()))
                .collect();
            let r = interpolate(&pts).unwrap();
            assert_eq!(r, p);
            let held_out = f.reduce(200);
            assert_eq!(r.eval(held_out).unwrap(), p.eval(held_out).unwrap());
        }
    }

    #[test]
    fn interpolate_single_and_duplicate() {
        let f = PrimeField::new(7).unwrap();
        let p = interpolate(&[(f.reduce(3), f.reduce(5))]).unwrap();
        assert_eq!(p.coeffs(), &[5]);
        assert_eq!(
            interpolate(&[(f.reduce(3), f.reduce(5)), (f.reduce(3), f.reduce(1))]),
            Err(PolyError::DuplicateNode(3))
        );
        assert_eq!(interpolate(&[]), Err(PolyError::NoPoints));
    }

    #[test]
    fn cauchy_small_cases() {
        let f = PrimeField::new(7).unwrap();
        let m = cauchy_matrix(&els(f, &[4]), &els(f, &[1])).unwrap();
        assert_eq!(m.get_raw(0, 0), 1);
        let m = cauchy_matrix(&els(f, &[4, 5]), &els(f, &[1, 2])).unwrap();
        assert_ne!(leibniz_det(&m), 0);
        assert!(invert_matrix(&m).is_ok());
        assert!(matches!(
            cauchy_matrix(&els(f, &[1, 5]), &els(f, &[1, 2])),
            Err(PolyError::DuplicateNode(1))
        ));
    }

    #[test]
    fn cauchy_exhaustive_small_fields() {
        // every X-subset of alphas against every X-subset of betas, q <= 17
        for q in [7u64, 11, 13, 17] {
            let f = PrimeField::new(q).unwrap();
            for x in 1..=3usize {
                let n = (q as usize - x).min(8);
                let betas: Vec<u64> = (0..x as u64).collect();
                let alphas: Vec<u64> = (x as u64..(x + n) as u64).collect();
                for subset in crate::audit::subsets(n, x) {
                    let a: Vec<u64> = subset.iter().map(|&i| alphas[i]).collect();
                    let m = cauchy_matrix_raw(f, &a, &betas).unwrap();
                    assert_ne!(leibniz_det(&m), 0, "q={q} x={x} {a:?}");
                }
            }
        }
    }

    #[test]
    fn inversion() {
        let f = PrimeField::new(7).unwrap();
        let id = FieldMatrix::identity(f, 3);
        assert_eq!(invert_matrix(&id).unwrap(), id);
        let m = FieldMatrix::from_i64_rows(f, &[&[1, 2], &[3, 4]]).unwrap();
        assert_eq!(determinant(&m).unwrap().value(), 5);
        // adjugate / det: [[4,-2],[-3,1]] * 5^{-1}, 5^{-1} = 3 mod 7
        let expected = FieldMatrix::from_i64_rows(f, &[&[12, -6], &[-9, 3]]).unwrap();
        assert_eq!(invert_matrix(&m).unwrap(), expected);
        assert_eq!(invert_matrix(&FieldMatrix::zeros(f, 2, 2)), Err(PolyError::Singular));
        assert_eq!(
            invert_matrix(&FieldMatrix::zeros(f, 2, 3)),
            Err(PolyError::NotSquare(2, 3))
        );
    }

    #[test]
    fn default_layout_and_overlap() {
        let f = PrimeField::new(17).unwrap();
        let pts = EvalPoints::default_layout(f, 6, 2, 2).unwrap();
        assert_eq!(pts.betas(), &[1, 2, 3, 4]);
        assert_eq!(pts.alphas(), &[5, 6, 7, 8, 9, 10]);
        assert_eq!(pts.mask_betas(), &[3, 4]);
        // alpha colliding with a mask point is rejected, not just data points
        let err = EvalPoints::new(f, 2, els(f, &[1, 2, 3, 4]), els(f, &[4, 5])).unwrap_err();
        assert_eq!(err, PolyError::PointsOverlap(4));
        assert!(matches!(
            EvalPoints::default_layout(PrimeField::new(7).unwrap(), 4, 2, 1),
            Err(PolyError::FieldTooSmall { .. })
        ));
    }

    proptest! {
        #[test]
        fn partition_of_unity(z in 0u64..257, n in 1usize..8) {
            let f = PrimeField::new(257).unwrap();
            let nodes: Vec<u64> = (0..n as u64).map(|i| 3 * i + 1).collect();
            let row = lagrange_row(f, &nodes, z).unwrap();
            prop_assert_eq!(row.iter().fold(0, |acc, &v| f.add(acc, v)), 1);
        }

        #[test]
        fn interpolate_evaluate_identity(
            seed in any::<u64>(),
            deg in 0usize..=12,
            extra in 0usize..4,
            big in any::<bool>(),
        ) {
            let f = if big { PrimeField::mersenne31() } else { PrimeField::new(13).unwrap() };
            let npts = (deg + 1 + extra).min(f.modulus() as usize);
            let deg = deg.min(npts - 1);
            let mut rng = seeded_rng(seed);
            let p = Polynomial::from_coeffs(
                f,
                (0..=deg).map(|_| sample_uniform(f, &mut rng).value()).collect(),
            );
            let xs: Vec<u64> = (0..npts as u64).collect();
            let ys: Vec<u64> = xs.iter().map(|&x| p.eval_raw(x)).collect();
            prop_assert_eq!(interpolate_raw(f, &xs, &ys).unwrap(), p);
        }

        #[test]
        fn inverse_times_matrix_is_identity(seed in any::<u64>(), n in 1usize..6) {
            let f = PrimeField::new(257).unwrap();
            let m = FieldMatrix::random(f, n, n, &mut seeded_rng(seed));
            match invert_matrix(&m) {
                Ok(inv) => prop_assert_eq!(m.mat_mul(&inv).unwrap(), FieldMatrix::identity(f, n)),
                Err(PolyError::Singular) => prop_assert_eq!(leibniz_det(&m), 0),
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
