use std::fmt;

use rand_chacha::rand_core::RngCore;

use super::rng::sample_residue;
use super::{FieldElement, FieldError, PrimeField};

/// Dense row-major matrix over a prime field.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct FieldMatrix {
    field: PrimeField,
    rows: usize,
    cols: usize,
    data: Vec<u64>,
}

impl FieldMatrix {
    /// Matrix from reduced residues in row-major order.
    pub fn new(field: PrimeField, rows: usize, cols: usize, data: Vec<u64>) -> Result<Self, FieldError> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(FieldError::BadDimensions {
                rows,
                cols,
                len: data.len(),
            });
        }
        if let Some(&value) = data.iter().find(|&&v| v >= field.modulus()) {
            return Err(FieldError::OutOfRange {
                value,
                modulus: field.modulus(),
            });
        }
        Ok(Self {
            field,
            rows,
            cols,
            data,
        })
    }

    /// Matrix from signed integer rows, each entry reduced mod q.
    pub fn from_i64_rows(field: PrimeField, rows: &[&[i64]]) -> Result<Self, FieldError> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(FieldError::BadDimensions {
                rows: rows.len(),
                cols,
                len: rows.iter().map(|r| r.len()).sum(),
            });
        }
        let data = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| field.reduce_i64(v)))
            .collect();
        Self::new(field, rows.len(), cols, data)
    }

    pub fn zeros(field: PrimeField, rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "empty matrix");
        Self {
            field,
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn filled(field: PrimeField, rows: usize, cols: usize, value: u64) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        m.data.fill(value % field.modulus());
        m
    }

    pub fn identity(field: PrimeField, n: usize) -> Self {
        let mut m = Self::zeros(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn scalar(value: FieldElement) -> Self {
        Self {
            field: value.field(),
            rows: 1,
            cols: 1,
            data: vec![value.value()],
        }
    }

    pub fn from_fn(field: PrimeField, rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> u64) -> Self {
        let mut m = Self::zeros(field, rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c) % field.modulus();
            }
        }
        m
    }

    /// Matrix with i.i.d. uniform entries.
    pub fn random<R: RngCore + ?Sized>(field: PrimeField, rows: usize, cols: usize, rng: &mut R) -> Self {
        let data = (0..rows * cols).map(|_| sample_residue(field.modulus(), rng)).collect();
        Self {
            field,
            rows,
            cols,
            data,
        }
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Residues in row-major order.
    #[inline]
    pub fn as_slice(&self) -> &[u64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<u64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> FieldElement {
        self.field.reduce(self.data[r * self.cols + c])
    }

    #[inline]
    pub fn get_raw(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, value: FieldElement) {
        assert_eq!(value.field(), self.field, "field mismatch");
        self.data[r * self.cols + c] = value.value();
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0)
    }

    fn check_same(&self, other: &Self, op: &'static str) -> Result<(), FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch {
                left: self.field.modulus(),
                right: other.field.modulus(),
            });
        }
        if self.shape() != other.shape() {
            return Err(FieldError::ShapeMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        Ok(())
    }

    fn zip_with(&self, other: &Self, op: &'static str, f: impl Fn(u64, u64) -> u64) -> Result<Self, FieldError> {
        self.check_same(other, op)?;
        Ok(Self {
            field: self.field,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(&x, &y)| f(x, y)).collect(),
        })
    }

    pub fn mat_add(&self, other: &Self) -> Result<Self, FieldError> {
        let f = self.field;
        self.zip_with(other, "add", |x, y| f.add(x, y))
    }

    pub fn mat_sub(&self, other: &Self) -> Result<Self, FieldError> {
        let f = self.field;
        self.zip_with(other, "sub", |x, y| f.sub(x, y))
    }

    /// Entrywise (Hadamard) product.
    pub fn hadamard(&self, other: &Self) -> Result<Self, FieldError> {
        let f = self.field;
        self.zip_with(other, "hadamard", |x, y| f.mul(x, y))
    }

    pub fn mat_scale(&self, s: FieldElement) -> Self {
        assert_eq!(s.field(), self.field, "field mismatch");
        let f = self.field;
        Self {
            field: f,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f.mul(x, s.value())).collect(),
        }
    }

    pub fn mat_neg(&self) -> Self {
        let f = self.field;
        Self {
            field: f,
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f.neg(x)).collect(),
        }
    }

    pub fn mat_mul(&self, other: &Self) -> Result<Self, FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch {
                left: self.field.modulus(),
                right: other.field.modulus(),
            });
        }
        if self.cols != other.rows {
            return Err(FieldError::ShapeMismatch {
                op: "mul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let f = self.field;
        let mut out = Self::zeros(f, self.rows, other.cols);
        for i in 0..self.rows {
            for l in 0..self.cols {
                let a = self.data[i * self.cols + l];
                if a == 0 {
                    continue;
                }
                let row = &other.data[l * other.cols..(l + 1) * other.cols];
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(row) {
                    *d = f.add(*d, f.mul(a, b));
                }
            }
        }
        Ok(out)
    }

    /// `self += coeff * other`, the inner step of every linear encoder.
    pub fn add_scaled(&mut self, coeff: u64, other: &Self) -> Result<(), FieldError> {
        self.check_same(other, "add_scaled")?;
        let f = self.field;
        for (d, &x) in self.data.iter_mut().zip(&other.data) {
            *d = f.add(*d, f.mul(coeff, x));
        }
        Ok(())
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.field, self.cols, self.rows, |r, c| self.data[c * self.cols + r])
    }

    /// Copy of the `rows x cols` window starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> Self {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        Self::from_fn(self.field, rows, cols, |r, c| self.get_raw(r0 + r, c0 + c))
    }

    /// Grid of equally sized blocks, `grid[i][j]` is block row `i`, column `j`.
    pub fn split_blocks(&self, block_rows: usize, block_cols: usize) -> Result<Vec<Vec<Self>>, FieldError> {
        if block_rows == 0 || block_cols == 0 || !self.rows.is_multiple_of(block_rows) || !self.cols.is_multiple_of(block_cols) {
            return Err(FieldError::ShapeMismatch {
                op: "split_blocks",
                left: self.shape(),
                right: (block_rows, block_cols),
            });
        }
        let br = self.rows / block_rows;
        let bc = self.cols / block_cols;
        Ok((0..block_rows)
            .map(|i| {
                (0..block_cols)
                    .map(|j| self.submatrix(i * br, j * bc, br, bc))
                    .collect()
            })
            .collect())
    }

    /// Inverse of [`split_blocks`](Self::split_blocks).
    pub fn from_blocks(grid: &[Vec<Self>]) -> Result<Self, FieldError> {
        let first = grid.first().and_then(|r| r.first()).ok_or(FieldError::BadDimensions {
            rows: 0,
            cols: 0,
            len: 0,
        })?;
        let (br, bc) = first.shape();
        let width = grid[0].len();
        for block in grid.iter().flatten() {
            first.check_same(block, "from_blocks")?;
        }
        if grid.iter().any(|row| row.len() != width) {
            return Err(FieldError::ShapeMismatch {
                op: "from_blocks",
                left: (grid.len(), width),
                right: (grid.len(), 0),
            });
        }
        Ok(Self::from_fn(first.field, grid.len() * br, width * bc, |r, c| {
            grid[r / br][c / bc].get_raw(r % br, c % bc)
        }))
    }

    /// Horizontal concatenation `[self other ...]`.
    pub fn hcat(parts: &[Self]) -> Result<Self, FieldError> {
        let grid = vec![parts.to_vec()];
        if parts.iter().any(|p| p.rows != parts[0].rows) {
            return Err(FieldError::ShapeMismatch {
                op: "hcat",
                left: parts[0].shape(),
                right: parts.iter().find(|p| p.rows != parts[0].rows).unwrap().shape(),
            });
        }
        if parts.iter().all(|p| p.shape() == parts[0].shape()) {
            return Self::from_blocks(&grid);
        }
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut data = Vec::with_capacity(parts[0].rows * cols);
        for r in 0..parts[0].rows {
            for p in parts {
                data.extend_from_slice(&p.data[r * p.cols..(r + 1) * p.cols]);
            }
        }
        Self::new(parts[0].field, parts[0].rows, cols, data)
    }
}

impl fmt::Display for FieldMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let width = self.data.iter().map(|v| v.to_string().len()).max().unwrap_or(1);
        for r in 0..self.rows {
            write!(f, "[")?;
            for c in 0..self.cols {
                if c > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>width$}", self.get_raw(r, c))?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::seeded_rng;

    fn f7() -> PrimeField {
        PrimeField::new(7).unwrap()
    }

    #[test]
    fn identity_multiplication() {
        let f = PrimeField::new(257).unwrap();
        let a = FieldMatrix::random(f, 3, 4, &mut seeded_rng(1));
        assert_eq!(FieldMatrix::identity(f, 3).mat_mul(&a).unwrap(), a);
        assert_eq!(a.mat_mul(&FieldMatrix::identity(f, 4)).unwrap(), a);
    }

    #[test]
    fn product_mod_7() {
        let f = f7();
        let a = FieldMatrix::from_i64_rows(f, &[&[1, 2], &[3, 4]]).unwrap();
        let b = FieldMatrix::from_i64_rows(f, &[&[5, 6], &[0, 1]]).unwrap();
        let expected = FieldMatrix::from_i64_rows(f, &[&[5, 1], &[1, 1]]).unwrap();
        assert_eq!(a.mat_mul(&b).unwrap(), expected);
    }

    #[test]
    fn product_matches_integer_oracle() {
        let f = PrimeField::mersenne31();
        let mut rng = seeded_rng(77);
        let a = FieldMatrix::random(f, 5, 3, &mut rng);
        let b = FieldMatrix::random(f, 3, 4, &mut rng);
        let c = a.mat_mul(&b).unwrap();
        for i in 0..5 {
            for j in 0..4 {
                let exact: u128 = (0..3).map(|l| a.get_raw(i, l) as u128 * b.get_raw(l, j) as u128).sum();
                assert_eq!(c.get_raw(i, j) as u128, exact % f.modulus() as u128);
            }
        }
        assert!(c.as_slice().iter().all(|&v| v < f.modulus()));
    }

    #[test]
    fn shape_errors() {
        let f = f7();
        let a = FieldMatrix::zeros(f, 2, 3);
        let b = FieldMatrix::zeros(f, 2, 3);
        assert!(matches!(a.mat_mul(&b), Err(FieldError::ShapeMismatch { .. })));
        assert!(a.mat_add(&FieldMatrix::zeros(f, 3, 2)).is_err());
        assert!(FieldMatrix::new(f, 2, 2, vec![0; 3]).is_err());
        assert!(FieldMatrix::new(f, 1, 1, vec![7]).is_err());
        let other = FieldMatrix::zeros(PrimeField::new(11).unwrap(), 2, 3);
        assert!(matches!(a.mat_add(&other), Err(FieldError::FieldMismatch { .. })));
    }

    #[test]
    fn add_sub_scale() {
        let f = f7();
        let a = FieldMatrix::from_i64_rows(f, &[&[1, 6], &[3, 4]]).unwrap();
        let b = FieldMatrix::from_i64_rows(f, &[&[6, 6], &[5, 0]]).unwrap();
        assert_eq!(
            a.mat_add(&b).unwrap(),
            FieldMatrix::from_i64_rows(f, &[&[0, 5], &[1, 4]]).unwrap()
        );
        assert_eq!(a.mat_sub(&b).unwrap().mat_add(&b).unwrap(), a);
        assert_eq!(
            a.mat_scale(f.element(3).unwrap()),
            FieldMatrix::from_i64_rows(f, &[&[3, 4], &[2, 5]]).unwrap()
        );
        assert!(a.mat_add(&a.mat_neg()).unwrap().is_zero());
    }

    #[test]
    fn blocks_round_trip() {
        let f = PrimeField::new(13).unwrap();
        let m = FieldMatrix::random(f, 4, 6, &mut seeded_rng(3));
        let grid = m.split_blocks(2, 3).unwrap();
        assert_eq!(grid[1][2].shape(), (2, 2));
        assert_eq!(grid[1][2].get_raw(0, 1), m.get_raw(2, 5));
        assert_eq!(FieldMatrix::from_blocks(&grid).unwrap(), m);
        let left = m.submatrix(0, 0, 4, 2);
        let right = m.submatrix(0, 2, 4, 4);
        assert_eq!(FieldMatrix::hcat(&[left, right]).unwrap(), m);
        assert!(m.split_blocks(3, 1).is_err());
    }
}
