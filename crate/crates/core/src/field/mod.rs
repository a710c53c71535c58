//! Exact arithmetic in a prime field `F_q`.
//!
//! [`PrimeField`] is a small `Copy` descriptor holding the modulus; every
//! element and matrix carries it so that mixing fields is caught at the point
//! of use. Raw-residue helpers (`PrimeField::add`, `PrimeField::mul`, ...) are
//! exposed for the hot loops in the encoders and decoders, where carrying the
//! field per entry would be wasted space.

mod matrix;
mod rng;

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use thiserror::Error;

pub use matrix::FieldMatrix;
pub use rng::{actor_rng, sample_uniform, seeded_rng, SeededRng};

/// The Mersenne prime `2^31 - 1`, the default protocol modulus.
pub const MERSENNE_31: u64 = (1 << 31) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not a prime >= 3")]
    NotPrime(u64),
    #[error("operands belong to different fields (q={left} vs q={right})")]
    FieldMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("residue {value} is out of range for q={modulus}")]
    OutOfRange { value: u64, modulus: u64 },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid matrix dimensions {rows}x{cols} for {len} entries")]
    BadDimensions { rows: usize, cols: usize, len: usize },
}

/// A prime field `F_q` with `3 <= q < 2^64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PrimeField {
    modulus: u64,
}

impl PrimeField {
    /// Builds the field, rejecting composite or too-small moduli.
    pub fn new(modulus: u64) -> Result<Self, FieldError> {
        if modulus < 3 || !is_prime(modulus) {
            return Err(FieldError::NotPrime(modulus));
        }
        Ok(Self { modulus })
    }

    /// `F_{2^31 - 1}`.
    pub fn mersenne31() -> Self {
        Self { modulus: MERSENNE_31 }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement { value: 0, field: *self }
    }

    pub fn one(&self) -> FieldElement {
        FieldElement { value: 1, field: *self }
    }

    /// Element from an already-reduced residue.
    pub fn element(&self, value: u64) -> Result<FieldElement, FieldError> {
        if value >= self.modulus {
            return Err(FieldError::OutOfRange {
                value,
                modulus: self.modulus,
            });
        }
        Ok(FieldElement { value, field: *self })
    }

    /// Element from any unsigned integer, reduced mod q.
    pub fn reduce(&self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            field: *self,
        }
    }

    /// Element from a signed integer, reduced into `[0, q)`.
    pub fn from_i64(&self, value: i64) -> FieldElement {
        FieldElement {
            value: self.reduce_i64(value),
            field: *self,
        }
    }

    #[inline]
    pub fn reduce_i64(&self, value: i64) -> u64 {
        (value as i128).rem_euclid(self.modulus as i128) as u64
    }

    #[inline]
    pub fn add(&self, x: u64, y: u64) -> u64 {
        let (s, overflow) = x.overflowing_add(y);
        if overflow || s >= self.modulus {
            s.wrapping_sub(self.modulus)
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, x: u64, y: u64) -> u64 {
        if x >= y {
            x - y
        } else {
            self.modulus - (y - x)
        }
    }

    #[inline]
    pub fn neg(&self, x: u64) -> u64 {
        if x == 0 {
            0
        } else {
            self.modulus - x
        }
    }

    #[inline]
    pub fn mul(&self, x: u64, y: u64) -> u64 {
        ((x as u128 * y as u128) % self.modulus as u128) as u64
    }

    pub fn pow(&self, mut base: u64, mut exp: u64) -> u64 {
        let mut acc = 1u64;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            exp >>= 1;
        }
        acc
    }

    /// Inverse of a raw residue via Fermat's little theorem.
    pub fn inv(&self, x: u64) -> Result<u64, FieldError> {
        if x.is_multiple_of(self.modulus) {
            return Err(FieldError::ZeroInverse);
        }
        Ok(self.pow(x, self.modulus - 2))
    }

    /// `log2(q)`, the entropy in bits of one uniform element.
    pub fn bits_per_element(&self) -> f64 {
        (self.modulus as f64).log2()
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.modulus)
    }
}

/// A residue in `[0, q)` tagged with its field.
///
/// The arithmetic operators panic when the operands come from different
/// fields; the `checked_*` methods report the mismatch as an error instead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FieldElement {
    value: u64,
    field: PrimeField,
}

impl FieldElement {
    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    #[inline]
    pub fn field(&self) -> PrimeField {
        self.field
    }

    pub fn is_zero(&self) -> bool {
        self.value == 0
    }

    fn same_field(&self, other: &Self) -> Result<PrimeField, FieldError> {
        if self.field != other.field {
            return Err(FieldError::FieldMismatch {
                left: self.field.modulus,
                right: other.field.modulus,
            });
        }
        Ok(self.field)
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self {
            value: f.add(self.value, rhs.value),
            field: f,
        })
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self {
            value: f.sub(self.value, rhs.value),
            field: f,
        })
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, FieldError> {
        let f = self.same_field(&rhs)?;
        Ok(Self {
            value: f.mul(self.value, rhs.value),
            field: f,
        })
    }

    pub fn inv(self) -> Result<Self, FieldError> {
        Ok(Self {
            value: self.field.inv(self.value)?,
            field: self.field,
        })
    }

    pub fn pow(self, exp: u64) -> Self {
        Self {
            value: self.field.pow(self.value, exp),
            field: self.field,
        }
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident, $assign_trait:ident, $assign:ident) => {
        impl $trait for FieldElement {
            type Output = FieldElement;

            fn $method(self, rhs: FieldElement) -> FieldElement {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }

        impl $assign_trait for FieldElement {
            fn $assign(&mut self, rhs: FieldElement) {
                *self = $trait::$method(*self, rhs);
            }
        }
    };
}

binop!(Add, add, checked_add, AddAssign, add_assign);
binop!(Sub, sub, checked_sub, SubAssign, sub_assign);
binop!(Mul, mul, checked_mul, MulAssign, mul_assign);

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        FieldElement {
            value: self.field.neg(self.value),
            field: self.field,
        }
    }
}

/// Deterministic Miller-Rabin, exact for every `n < 2^64`.
pub fn is_prime(n: u64) -> bool {
    const WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    if n < 2 {
        return false;
    }
    for &p in &WITNESSES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let mulmod = |a: u64, b: u64| ((a as u128 * b as u128) % n as u128) as u64;
    let powmod = |mut b: u64, mut e: u64| {
        let mut acc = 1u64;
        while e > 0 {
            if e & 1 == 1 {
                acc = mulmod(acc, b);
            }
            b = mulmod(b, b);
            e >>= 1;
        }
        acc
    };
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &WITNESSES {
        let mut x = powmod(a, d);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mulmod(x, x);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
