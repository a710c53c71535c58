//! Polynomial functions `h(W, U)` that workers evaluate.
//!
//! A [`PolyFunction`] is an expression DAG over a closed set of operations
//! (add, subtract, scalar multiply, matrix multiply, entrywise multiply,
//! constants). Restricting `h` to this set lets the total degree be computed
//! structurally, and the recovery threshold depends on that degree.

mod bilinear;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::field::{FieldError, FieldMatrix};

pub use bilinear::{
    bilinear_to_lcc_job, parse_bilinear, recombine, strassen_2x2, BilinearConstruction, LccJob, SplitPolicy,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FuncError {
    #[error("declared degree {declared} does not match structural degree {computed}")]
    DegreeMismatch { declared: usize, computed: usize },
    #[error("polynomial function must have degree >= 1")]
    ZeroDegree,
    #[error("input shape {got:?} does not match declared {expected:?} for `{which}`")]
    InputShape {
        which: &'static str,
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("incompatible operand shapes {left:?} and {right:?} in {op}")]
    OperandShapes {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },
    #[error("invalid bilinear construction: {0}")]
    Bilinear(String),
    #[error("linear form {form} spans several sources")]
    NonLocalForm { form: usize },
    #[error("malformed bilinear file at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// Node of a polynomial expression in the two matrix inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    W,
    U,
    /// Constant matrix of the given shape with every entry equal to `value`.
    Const {
        value: i64,
        shape: (usize, usize),
    },
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Scale(i64, Arc<Expr>),
    MatMul(Arc<Expr>, Arc<Expr>),
    Hadamard(Arc<Expr>, Arc<Expr>),
}

impl Expr {
    pub fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Arc::new(self), Arc::new(rhs))
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::Sub(Arc::new(self), Arc::new(rhs))
    }

    pub fn scale(self, c: i64) -> Expr {
        Expr::Scale(c, Arc::new(self))
    }

    pub fn matmul(self, rhs: Expr) -> Expr {
        Expr::MatMul(Arc::new(self), Arc::new(rhs))
    }

    pub fn hadamard(self, rhs: Expr) -> Expr {
        Expr::Hadamard(Arc::new(self), Arc::new(rhs))
    }

    /// Structural total degree in the entries of `W` and `U`.
    pub fn degree(&self) -> usize {
        match self {
            Expr::W | Expr::U => 1,
            Expr::Const { .. } => 0,
            Expr::Scale(_, e) => e.degree(),
            Expr::Add(l, r) | Expr::Sub(l, r) => l.degree().max(r.degree()),
            Expr::MatMul(l, r) | Expr::Hadamard(l, r) => l.degree() + r.degree(),
        }
    }

    pub fn shape(&self, w: (usize, usize), u: (usize, usize)) -> Result<(usize, usize), FuncError> {
        match self {
            Expr::W => Ok(w),
            Expr::U => Ok(u),
            Expr::Const { shape, .. } => Ok(*shape),
            Expr::Scale(_, e) => e.shape(w, u),
            Expr::Add(l, r) | Expr::Sub(l, r) | Expr::Hadamard(l, r) => {
                let (ls, rs) = (l.shape(w, u)?, r.shape(w, u)?);
                if ls != rs {
                    return Err(FuncError::OperandShapes {
                        op: "entrywise",
                        left: ls,
                        right: rs,
                    });
                }
                Ok(ls)
            }
            Expr::MatMul(l, r) => {
                let (ls, rs) = (l.shape(w, u)?, r.shape(w, u)?);
                if ls.1 != rs.0 {
                    return Err(FuncError::OperandShapes {
                        op: "matmul",
                        left: ls,
                        right: rs,
                    });
                }
                Ok((ls.0, rs.1))
            }
        }
    }

    fn eval(&self, w: &FieldMatrix, u: &FieldMatrix) -> Result<FieldMatrix, FuncError> {
        let field = w.field();
        Ok(match self {
            Expr::W => w.clone(),
            Expr::U => u.clone(),
            Expr::Const { value, shape } => FieldMatrix::filled(field, shape.0, shape.1, field.reduce_i64(*value)),
            Expr::Scale(c, e) => e.eval(w, u)?.mat_scale(field.from_i64(*c)),
            Expr::Add(l, r) => l.eval(w, u)?.mat_add(&r.eval(w, u)?)?,
            Expr::Sub(l, r) => l.eval(w, u)?.mat_sub(&r.eval(w, u)?)?,
            Expr::MatMul(l, r) => l.eval(w, u)?.mat_mul(&r.eval(w, u)?)?,
            Expr::Hadamard(l, r) => l.eval(w, u)?.hadamard(&r.eval(w, u)?)?,
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::W => write!(f, "W"),
            Expr::U => write!(f, "U"),
            Expr::Const { value, .. } => write!(f, "{value}"),
            Expr::Scale(c, e) => write!(f, "{c}*({e})"),
            Expr::Add(l, r) => write!(f, "({l} + {r})"),
            Expr::Sub(l, r) => write!(f, "({l} - {r})"),
            Expr::MatMul(l, r) => write!(f, "{l}{r}"),
            Expr::Hadamard(l, r) => write!(f, "{l}.{r}"),
        }
    }
}

/// A validated polynomial map `h(W, U)` with fixed input and output shapes.
///
/// Field-agnostic: integer constants are reduced into whatever field the
/// inputs live in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyFunction {
    name: String,
    deg_h: usize,
    w_shape: (usize, usize),
    u_shape: (usize, usize),
    out_shape: (usize, usize),
    expr: Expr,
}

impl PolyFunction {
    pub fn new(
        name: impl Into<String>,
        expr: Expr,
        w_shape: (usize, usize),
        u_shape: (usize, usize),
        deg_h: usize,
    ) -> Result<Self, FuncError> {
        let computed = expr.degree();
        if computed == 0 {
            return Err(FuncError::ZeroDegree);
        }
        if computed != deg_h {
            return Err(FuncError::DegreeMismatch {
                declared: deg_h,
                computed,
            });
        }
        let out_shape = expr.shape(w_shape, u_shape)?;
        Ok(Self {
            name: name.into(),
            deg_h,
            w_shape,
            u_shape,
            out_shape,
            expr,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn degree(&self) -> usize {
        self.deg_h
    }

    pub fn w_shape(&self) -> (usize, usize) {
        self.w_shape
    }

    pub fn u_shape(&self) -> (usize, usize) {
        self.u_shape
    }

    pub fn out_shape(&self) -> (usize, usize) {
        self.out_shape
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn eval(&self, w: &FieldMatrix, u: &FieldMatrix) -> Result<FieldMatrix, FuncError> {
        if w.shape() != self.w_shape {
            return Err(FuncError::InputShape {
                which: "w",
                expected: self.w_shape,
                got: w.shape(),
            });
        }
        if u.shape() != self.u_shape {
            return Err(FuncError::InputShape {
                which: "u",
                expected: self.u_shape,
                got: u.shape(),
            });
        }
        if w.field() != u.field() {
            return Err(FieldError::FieldMismatch {
                left: w.field().modulus(),
                right: u.field().modulus(),
            }
            .into());
        }
        self.expr.eval(w, u)
    }
}

impl fmt::Display for PolyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {} (deg {})", self.name, self.expr, self.deg_h)
    }
}

/// `h(W, U) = W U`, degree 2.
pub fn builtin_matmul(w_shape: (usize, usize), u_shape: (usize, usize)) -> Result<PolyFunction, FuncError> {
    PolyFunction::new("matmul", Expr::W.matmul(Expr::U), w_shape, u_shape, 2)
}

/// `h(W, U) = W`, degree 1.
pub fn builtin_first_projection(shape: (usize, usize)) -> Result<PolyFunction, FuncError> {
    PolyFunction::new("first", Expr::W, shape, shape, 1)
}

fn entrywise_power(base: Expr, exp: usize) -> Option<Expr> {
    (0..exp).fold(None, |acc, _| {
        Some(match acc {
            None => base.clone(),
            Some(e) => e.hadamard(base.clone()),
        })
    })
}

/// Entrywise polynomial `sum c_st * W^s * U^t` over terms `(s, t, c)`.
///
/// Terms with equal exponents are merged; the highest surviving `s + t` must
/// equal `degree`.
pub fn builtin_elementwise(
    terms: &[(usize, usize, i64)],
    degree: usize,
    shape: (usize, usize),
) -> Result<PolyFunction, FuncError> {
    if degree == 0 {
        return Err(FuncError::ZeroDegree);
    }
    let mut merged: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for &(s, t, c) in terms {
        *merged.entry((s, t)).or_insert(0) += c;
    }
    let mut expr: Option<Expr> = None;
    for ((s, t), c) in merged.into_iter().filter(|&(_, c)| c != 0) {
        let monomial = match (entrywise_power(Expr::W, s), entrywise_power(Expr::U, t)) {
            (Some(a), Some(b)) => a.hadamard(b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => Expr::Const { value: 1, shape },
        };
        let term = if c == 1 { monomial } else { monomial.scale(c) };
        expr = Some(match expr {
            None => term,
            Some(e) => e.add(term),
        });
    }
    let expr = expr.unwrap_or(Expr::Const { value: 0, shape });
    PolyFunction::new(format!("elementwise{degree}"), expr, shape, shape, degree)
}

/// The elementwise exerciser used by sweeps: `sum_{s+t=d} W^s U^t + W + 1`.
pub fn elementwise_standard(degree: usize, shape: (usize, usize)) -> Result<PolyFunction, FuncError> {
    let mut terms: Vec<(usize, usize, i64)> = (0..=degree).map(|s| (s, degree - s, 1)).collect();
    terms.push((1, 0, 1));
    terms.push((0, 0, 1));
    builtin_elementwise(&terms, degree, shape)
}
