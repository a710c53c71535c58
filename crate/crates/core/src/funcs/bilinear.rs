//! Bilinear constructions for block matrix multiplication.
//!
//! A rank-`R` construction for `(m, p, n)` rewrites `C = A B` on an `m x p`
//! by `p x n` block grid as `R` products `Abar_r * Bbar_r` of linear forms,
//! recombined through the `c` tensor. Each product is one LCC data block, so
//! the job has `K = R` and `deg_h = 2`.

use std::fmt::Write as _;

use crate::codec::{SourceData, UserData};
use crate::field::{FieldMatrix, PrimeField};

use super::{builtin_matmul, FuncError, PolyFunction};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BilinearConstruction {
    rank: usize,
    dims: (usize, usize, usize),
    a: Vec<i64>,
    b: Vec<i64>,
    c: Vec<i64>,
}

impl BilinearConstruction {
    /// Builds the construction and checks it is a valid decomposition of the
    /// `(m, p, n)` multiplication tensor over `field`.
    ///
    /// Tensors are flattened row-major: `a[r][k][l]`, `b[r][l][j]`, `c[r][k][j]`.
    pub fn new(
        rank: usize,
        dims: (usize, usize, usize),
        a: Vec<i64>,
        b: Vec<i64>,
        c: Vec<i64>,
        field: PrimeField,
    ) -> Result<Self, FuncError> {
        let (m, p, n) = dims;
        if rank == 0 || m == 0 || p == 0 || n == 0 {
            return Err(FuncError::Bilinear("rank and dimensions must be positive".into()));
        }
        for (name, t, len) in [("a", &a, m * p), ("b", &b, p * n), ("c", &c, m * n)] {
            if t.len() != rank * len {
                return Err(FuncError::Bilinear(format!(
                    "tensor {name} has {} entries, expected {}",
                    t.len(),
                    rank * len
                )));
            }
        }
        let constr = Self { rank, dims, a, b, c };
        constr.check_tensor(field)?;
        Ok(constr)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn a(&self, r: usize, k: usize, l: usize) -> i64 {
        let (m, p, _) = self.dims;
        debug_assert!(k < m);
        self.a[r * m * p + k * p + l]
    }

    pub fn b(&self, r: usize, l: usize, j: usize) -> i64 {
        let (_, p, n) = self.dims;
        debug_assert!(l < p);
        self.b[r * p * n + l * n + j]
    }

    pub fn c(&self, r: usize, k: usize, j: usize) -> i64 {
        let (m, _, n) = self.dims;
        debug_assert!(k < m);
        self.c[r * m * n + k * n + j]
    }

    // Brent equations: sum_r a[r,k,l] b[r,l2,j] c[r,k2,j2] must equal
    // [k == k2][l == l2][j == j2] for every index tuple.
    fn check_tensor(&self, field: PrimeField) -> Result<(), FuncError> {
        let (m, p, n) = self.dims;
        for k in 0..m {
            for l in 0..p {
                for l2 in 0..p {
                    for j in 0..n {
                        for k2 in 0..m {
                            for j2 in 0..n {
                                let mut acc = 0u64;
                                for r in 0..self.rank {
                                    let t = field.mul(
                                        field
                                            .mul(field.reduce_i64(self.a(r, k, l)), field.reduce_i64(self.b(r, l2, j))),
                                        field.reduce_i64(self.c(r, k2, j2)),
                                    );
                                    acc = field.add(acc, t);
                                }
                                let want = u64::from(k == k2 && l == l2 && j == j2);
                                if acc != want {
                                    return Err(FuncError::Bilinear(format!(
                                        "identity fails for C[{k2}][{j2}] at A[{k}][{l}] B[{l2}][{j}]"
                                    )));
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// `Abar_r = sum a[r,k,l] A[k][l]` over an `m x p` block grid.
    pub fn left_form(&self, r: usize, blocks: &[Vec<FieldMatrix>]) -> Result<FieldMatrix, FuncError> {
        let (m, p, _) = self.dims;
        linear_form(blocks, m, p, |k, l| self.a(r, k, l))
    }

    /// `Bbar_r = sum b[r,l,j] B[l][j]` over a `p x n` block grid.
    pub fn right_form(&self, r: usize, blocks: &[Vec<FieldMatrix>]) -> Result<FieldMatrix, FuncError> {
        let (_, p, n) = self.dims;
        linear_form(blocks, p, n, |l, j| self.b(r, l, j))
    }

    /// Plain-text form: header `R m p n`, then per rank the `a`, `b`, `c`
    /// slices as whitespace-separated integer rows.
    pub fn to_text(&self) -> String {
        let (m, p, n) = self.dims;
        let mut out = format!("{} {} {} {}\n", self.rank, m, p, n);
        let mut write_slice = |rows: usize, cols: usize, get: &dyn Fn(usize, usize) -> i64| {
            for i in 0..rows {
                let row: Vec<String> = (0..cols).map(|j| get(i, j).to_string()).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        for r in 0..self.rank {
            write_slice(m, p, &|k, l| self.a(r, k, l));
            write_slice(p, n, &|l, j| self.b(r, l, j));
            write_slice(m, n, &|k, j| self.c(r, k, j));
        }
        out
    }
}

fn linear_form(
    blocks: &[Vec<FieldMatrix>],
    rows: usize,
    cols: usize,
    coeff: impl Fn(usize, usize) -> i64,
) -> Result<FieldMatrix, FuncError> {
    if blocks.len() != rows || blocks.iter().any(|r| r.len() != cols) {
        return Err(FuncError::Bilinear(format!("expected a {rows}x{cols} block grid")));
    }
    let first = &blocks[0][0];
    let field = first.field();
    let mut acc = FieldMatrix::zeros(field, first.rows(), first.cols());
    for (i, row) in blocks.iter().enumerate() {
        for (j, block) in row.iter().enumerate() {
            let c = field.reduce_i64(coeff(i, j));
            if c != 0 {
                acc.add_scaled(c, block)?;
            }
        }
    }
    Ok(acc)
}

/// Strassen's rank-7 construction for 2x2 block matrices.
///
/// ```text
/// Wbar: W11+W22, W21+W22, W11, W22, W11+W12, W21-W11, W12-W22
/// Ubar: U11+U22, U11, U12-U22, U21-U11, U22, U11+U12, U21+U22
/// C = [M1+M4-M5+M7, M3+M5; M2+M4, M1-M2+M3+M6]
/// ```
pub fn strassen_2x2() -> BilinearConstruction {
    #[rustfmt::skip]
    let a = vec![
        1, 0, 0, 1,
        0, 0, 1, 1,
        1, 0, 0, 0,
        0, 0, 0, 1,
        1, 1, 0, 0,
        -1, 0, 1, 0,
        0, 1, 0, -1,
    ];
    #[rustfmt::skip]
    let b = vec![
        1, 0, 0, 1,
        1, 0, 0, 0,
        0, 1, 0, -1,
        -1, 0, 1, 0,
        0, 0, 0, 1,
        1, 1, 0, 0,
        0, 0, 1, 1,
    ];
    // c[r] lists the coefficient of M_r in C11, C12, C21, C22.
    #[rustfmt::skip]
    let c = vec![
        1, 0, 0, 1,
        0, 0, 1, -1,
        0, 1, 0, 1,
        1, 0, 1, 0,
        -1, 1, 0, 0,
        0, 0, 0, 1,
        1, 0, 0, 0,
    ];
    BilinearConstruction::new(7, (2, 2, 2), a, b, c, PrimeField::new(3).expect("3 is prime"))
        .expect("Strassen's construction is valid over every prime field")
}

/// How source-side linear forms are distributed when a form touches blocks
/// held by several sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplitPolicy {
    /// Each source encodes its own additive piece of every form.
    #[default]
    SplitAcrossSources,
    /// Reject constructions whose forms are not local to one source.
    RequireLocal,
}

/// Everything the protocol needs to run a bilinear multiplication job.
#[derive(Debug, Clone)]
pub struct LccJob {
    pub sources: Vec<SourceData>,
    pub user: UserData,
    pub h: PolyFunction,
    pub w_block: (usize, usize),
    pub u_block: (usize, usize),
}

impl LccJob {
    /// Number of LCC data blocks, one per bilinear product.
    pub fn blocks(&self) -> usize {
        self.user.blocks().len()
    }

    pub fn deg_h(&self) -> usize {
        self.h.degree()
    }
}

/// Turns `C = W U` into `R` LCC data blocks.
///
/// `source_parts[i]` is source `i`'s column slab `W_i` of `W = [W_1 ... W_S]`;
/// the `p` block columns are divided evenly among the `S` sources. Source `i`
/// only ever reads its own slab.
pub fn bilinear_to_lcc_job(
    constr: &BilinearConstruction,
    source_parts: &[FieldMatrix],
    u: &FieldMatrix,
    policy: SplitPolicy,
) -> Result<LccJob, FuncError> {
    let (m, p, n) = constr.dims();
    let s = source_parts.len();
    if s == 0 || p % s != 0 {
        return Err(FuncError::Bilinear(format!(
            "{p} block columns cannot be split evenly among {s} sources"
        )));
    }
    let cols_per_source = p / s;
    let slab_shape = source_parts[0].shape();
    if source_parts.iter().any(|w| w.shape() != slab_shape)
        || !slab_shape.0.is_multiple_of(m)
        || !slab_shape.1.is_multiple_of(cols_per_source)
    {
        return Err(FuncError::Bilinear("source slabs have inconsistent shapes".into()));
    }
    let w_block = (slab_shape.0 / m, slab_shape.1 / cols_per_source);
    if u.rows() != p * w_block.1 || !u.cols().is_multiple_of(n) {
        return Err(FuncError::OperandShapes {
            op: "bilinear job",
            left: (m * w_block.0, p * w_block.1),
            right: u.shape(),
        });
    }
    let u_block = (w_block.1, u.cols() / n);

    let rank = constr.rank();
    if policy == SplitPolicy::RequireLocal {
        for r in 0..rank {
            let owners = (0..s)
                .filter(|&i| (0..m).any(|k| (0..cols_per_source).any(|l| constr.a(r, k, i * cols_per_source + l) != 0)))
                .count();
            if owners > 1 {
                return Err(FuncError::NonLocalForm { form: r });
            }
        }
    }

    let field = u.field();
    let mut sources = Vec::with_capacity(s);
    for (i, slab) in source_parts.iter().enumerate() {
        let local = slab.split_blocks(m, cols_per_source)?;
        let pieces = (0..rank)
            .map(|r| {
                let support =
                    (0..m).any(|k| (0..cols_per_source).any(|l| constr.a(r, k, i * cols_per_source + l) != 0));
                if !support {
                    return Ok(None);
                }
                let piece = linear_form(&local, m, cols_per_source, |k, l| {
                    constr.a(r, k, i * cols_per_source + l)
                })?;
                Ok(Some(piece))
            })
            .collect::<Result<Vec<_>, FuncError>>()?;
        sources.push(SourceData::additive(i, pieces).map_err(|e| FuncError::Bilinear(e.to_string()))?);
    }

    let u_grid = u.split_blocks(p, n)?;
    let user_blocks = (0..rank)
        .map(|r| constr.right_form(r, &u_grid))
        .collect::<Result<Vec<_>, _>>()?;
    let user = UserData::new(user_blocks).map_err(|e| FuncError::Bilinear(e.to_string()))?;
    debug_assert_eq!(user.blocks()[0].field(), field);

    Ok(LccJob {
        sources,
        user,
        h: builtin_matmul(w_block, u_block)?,
        w_block,
        u_block,
    })
}

/// Assembles `C` from the `R` block products through the `c` tensor.
pub fn recombine(constr: &BilinearConstruction, products: &[FieldMatrix]) -> Result<FieldMatrix, FuncError> {
    if products.len() != constr.rank() {
        return Err(FuncError::Bilinear(format!(
            "expected {} products, got {}",
            constr.rank(),
            products.len()
        )));
    }
    let shape = products[0].shape();
    if let Some(bad) = products.iter().find(|p| p.shape() != shape) {
        return Err(FuncError::OperandShapes {
            op: "recombine",
            left: shape,
            right: bad.shape(),
        });
    }
    let (m, _, n) = constr.dims();
    let field = products[0].field();
    let mut grid = Vec::with_capacity(m);
    for k in 0..m {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let mut acc = FieldMatrix::zeros(field, shape.0, shape.1);
            for (r, prod) in products.iter().enumerate() {
                let c = field.reduce_i64(constr.c(r, k, j));
                if c != 0 {
                    acc.add_scaled(c, prod)?;
                }
            }
            row.push(acc);
        }
        grid.push(row);
    }
    Ok(FieldMatrix::from_blocks(&grid)?)
}

/// Parses the plain-text tensor format written by
/// [`BilinearConstruction::to_text`]. Blank lines and `#` comments are skipped.
pub fn parse_bilinear(text: &str, field: PrimeField) -> Result<BilinearConstruction, FuncError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let parse_row = |line: usize, s: &str| -> Result<Vec<i64>, FuncError> {
        s.split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|e| FuncError::Parse {
                    line,
                    msg: format!("`{tok}`: {e}"),
                })
            })
            .collect()
    };
    let (hline, header) = lines.next().ok_or(FuncError::Parse {
        line: 0,
        msg: "missing header `R m p n`".into(),
    })?;
    let header = parse_row(hline, header)?;
    let [rank, m, p, n]: [i64; 4] = header.try_into().map_err(|_| FuncError::Parse {
        line: hline,
        msg: "header must have four integers `R m p n`".into(),
    })?;
    if [rank, m, p, n].iter().any(|&v| v <= 0) {
        return Err(FuncError::Parse {
            line: hline,
            msg: "header values must be positive".into(),
        });
    }
    let (rank, m, p, n) = (rank as usize, m as usize, p as usize, n as usize);
    let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
    let mut last_line = hline;
    for _ in 0..rank {
        for (dst, rows, cols) in [(&mut a, m, p), (&mut b, p, n), (&mut c, m, n)] {
            for _ in 0..rows {
                let (line, s) = lines.next().ok_or(FuncError::Parse {
                    line: last_line + 1,
                    msg: "unexpected end of file".into(),
                })?;
                last_line = line;
                let row = parse_row(line, s)?;
                if row.len() != cols {
                    return Err(FuncError::Parse {
                        line,
                        msg: format!("expected {cols} entries, found {}", row.len()),
                    });
                }
                dst.extend(row);
            }
        }
    }
    if let Some((line, _)) = lines.next() {
        return Err(FuncError::Parse {
            line,
            msg: "trailing data after the last tensor slice".into(),
        });
    }
    BilinearConstruction::new(rank, (m, p, n), a, b, c, field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::seeded_rng;

    fn els(f: PrimeField, rows: &[&[i64]]) -> FieldMatrix {
        FieldMatrix::from_i64_rows(f, rows).unwrap()
    }

    fn direct_strassen_products(w: &[Vec<FieldMatrix>], u: &[Vec<FieldMatrix>]) -> Vec<FieldMatrix> {
        let add = |x: &FieldMatrix, y: &FieldMatrix| x.mat_add(y).unwrap();
        let sub = |x: &FieldMatrix, y: &FieldMatrix| x.mat_sub(y).unwrap();
        let (w11, w12, w21, w22) = (&w[0][0], &w[0][1], &w[1][0], &w[1][1]);
        let (u11, u12, u21, u22) = (&u[0][0], &u[0][1], &u[1][0], &u[1][1]);
        let forms = [
            (add(w11, w22), add(u11, u22)),
            (add(w21, w22), u11.clone()),
            (w11.clone(), sub(u12, u22)),
            (w22.clone(), sub(u21, u11)),
            (add(w11, w12), u22.clone()),
            (sub(w21, w11), add(u11, u12)),
            (sub(w12, w22), add(u21, u22)),
        ];
        forms.iter().map(|(a, b)| a.mat_mul(b).unwrap()).collect()
    }

    #[test]
    fn strassen_identity_random() {
        let f = PrimeField::new(257).unwrap();
        let s = strassen_2x2();
        let mut rng = seeded_rng(8);
        for _ in 0..100 {
            let w = FieldMatrix::random(f, 4, 4, &mut rng);
            let u = FieldMatrix::random(f, 4, 4, &mut rng);
            let (wg, ug) = (w.split_blocks(2, 2).unwrap(), u.split_blocks(2, 2).unwrap());
            let products: Vec<_> = (0..7)
                .map(|r| {
                    s.left_form(r, &wg)
                        .unwrap()
                        .mat_mul(&s.right_form(r, &ug).unwrap())
                        .unwrap()
                })
                .collect();
            assert_eq!(products, direct_strassen_products(&wg, &ug));
            assert_eq!(recombine(&s, &products).unwrap(), w.mat_mul(&u).unwrap());
        }
    }

    #[test]
    fn strassen_valid_over_small_fields() {
        let s = strassen_2x2();
        for q in [3u64, 5, 7, 2_147_483_647] {
            let f = PrimeField::new(q).unwrap();
            let rebuilt = BilinearConstruction::new(7, (2, 2, 2), s.a.clone(), s.b.clone(), s.c.clone(), f);
            assert!(rebuilt.is_ok(), "q={q}");
        }
    }

    #[test]
    fn first_form_hand_expansion() {
        let f = PrimeField::new(101).unwrap();
        let w = els(f, &[&[1, 2], &[3, 4]]).split_blocks(2, 2).unwrap();
        // W11 + W22 = 1 + 4
        assert_eq!(strassen_2x2().left_form(0, &w).unwrap().get_raw(0, 0), 5);
    }

    #[test]
    fn identity_inputs_recombine_to_identity() {
        let f = PrimeField::new(13).unwrap();
        let s = strassen_2x2();
        let id = FieldMatrix::identity(f, 4).split_blocks(2, 2).unwrap();
        let products: Vec<_> = (0..7)
            .map(|r| {
                s.left_form(r, &id)
                    .unwrap()
                    .mat_mul(&s.right_form(r, &id).unwrap())
                    .unwrap()
            })
            .collect();
        assert_eq!(recombine(&s, &products).unwrap(), FieldMatrix::identity(f, 4));
        let zeros = vec![FieldMatrix::zeros(f, 2, 2); 7];
        assert!(recombine(&s, &zeros).unwrap().is_zero());
        assert!(recombine(&s, &zeros[..6]).is_err());
    }

    #[test]
    fn exhaustive_scalar_q3() {
        let f = PrimeField::new(3).unwrap();
        let s = strassen_2x2();
        for wv in 0..81u64 {
            for uv in 0..81u64 {
                let digits = |mut v: u64| -> Vec<u64> {
                    (0..4)
                        .map(|_| {
                            let d = v % 3;
                            v /= 3;
                            d
                        })
                        .collect()
                };
                let w = FieldMatrix::new(f, 2, 2, digits(wv)).unwrap();
                let u = FieldMatrix::new(f, 2, 2, digits(uv)).unwrap();
                let (wg, ug) = (w.split_blocks(2, 2).unwrap(), u.split_blocks(2, 2).unwrap());
                let products: Vec<_> = (0..7)
                    .map(|r| {
                        s.left_form(r, &wg)
                            .unwrap()
                            .mat_mul(&s.right_form(r, &ug).unwrap())
                            .unwrap()
                    })
                    .collect();
                assert_eq!(recombine(&s, &products).unwrap(), w.mat_mul(&u).unwrap());
            }
        }
    }

    #[test]
    fn two_source_split_structure() {
        let f = PrimeField::mersenne31();
        let mut rng = seeded_rng(2);
        let w = FieldMatrix::random(f, 4, 4, &mut rng);
        let u = FieldMatrix::random(f, 4, 4, &mut rng);
        let parts = [w.submatrix(0, 0, 4, 2), w.submatrix(0, 2, 4, 2)];
        let job = bilinear_to_lcc_job(&strassen_2x2(), &parts, &u, SplitPolicy::default()).unwrap();
        assert_eq!(job.blocks(), 7);
        assert_eq!(job.deg_h(), 2);
        // source 1 holds W11, W21: forms 1,2,3,5,6; source 2 holds W12, W22: forms 1,2,4,5,7
        let support = |i: usize| -> Vec<usize> {
            job.sources[i]
                .pieces()
                .iter()
                .enumerate()
                .filter_map(|(r, p)| p.as_ref().map(|_| r + 1))
                .collect()
        };
        assert_eq!(support(0), vec![1, 2, 3, 5, 6]);
        assert_eq!(support(1), vec![1, 2, 4, 5, 7]);
        // source-1 piece of form 6 is W21 - W11
        let g = w.split_blocks(2, 2).unwrap();
        assert_eq!(
            job.sources[0].pieces()[5].as_ref().unwrap(),
            &g[1][0].mat_sub(&g[0][0]).unwrap()
        );
        assert!(matches!(
            bilinear_to_lcc_job(&strassen_2x2(), &parts, &u, SplitPolicy::RequireLocal),
            Err(FuncError::NonLocalForm { form: 0 })
        ));
    }

    #[test]
    fn single_source_carries_every_form() {
        let f = PrimeField::new(257).unwrap();
        let mut rng = seeded_rng(4);
        let w = FieldMatrix::random(f, 2, 2, &mut rng);
        let u = FieldMatrix::random(f, 2, 2, &mut rng);
        let job = bilinear_to_lcc_job(&strassen_2x2(), &[w], &u, SplitPolicy::RequireLocal).unwrap();
        assert!(job.sources[0].pieces().iter().all(|p| p.is_some()));
        assert_eq!(job.w_block, (1, 1));
    }

    #[test]
    fn text_round_trip_and_errors() {
        let s = strassen_2x2();
        let f = PrimeField::new(257).unwrap();
        assert_eq!(parse_bilinear(&s.to_text(), f).unwrap(), s);
        assert!(matches!(
            parse_bilinear("7 2 2", f),
            Err(FuncError::Parse { line: 1, .. })
        ));
        let mut broken = s.to_text();
        broken = broken.replacen("1 0\n", "1 1\n", 1);
        assert!(matches!(parse_bilinear(&broken, f), Err(FuncError::Bilinear(_))));
        let truncated: String = s.to_text().lines().take(10).collect::<Vec<_>>().join("\n");
        assert!(matches!(parse_bilinear(&truncated, f), Err(FuncError::Parse { .. })));
    }
}
