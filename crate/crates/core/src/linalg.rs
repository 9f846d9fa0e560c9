//! Sparse and dense complex linear algebra helpers on top of `faer`.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::traits::ComplexField;
use faer::{c64, Mat, Par, Side};

use crate::error::{Error, Result};

pub fn cz(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn zero() -> c64 {
    c64::new(0.0, 0.0)
}

/// Compressed sparse column matrix with sorted row indices and no duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<c64>,
}

impl SparseMatrix {
    /// Builds from triplets; duplicates are summed in input order so the
    /// result is deterministic for a deterministic input sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, mut trip: Vec<(usize, usize, c64)>) -> Self {
        trip.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; ncols + 1];
        let mut row_idx = Vec::with_capacity(trip.len());
        let mut values: Vec<c64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self::from_triplets(nrows, ncols, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, cz(1.0))).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, c64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |k| (self.row_idx[k], c, self.values[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> c64 {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => zero(),
        }
    }

    pub fn matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![zero(); self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }

    /// `Aᴴ x`.
    pub fn adjoint_matvec(&self, x: &[c64]) -> Vec<c64> {
        assert_eq!(x.len(), self.nrows);
        (0..self.ncols)
            .map(|c| {
                let mut s = zero();
                for k in self.col_ptr[c]..self.col_ptr[c + 1] {
                    s += self.values[k].conj() * x[self.row_idx[k]];
                }
                s
            })
            .collect()
    }

    pub fn adjoint(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v.conj())).collect())
    }

    pub fn scale(&self, s: c64) -> SparseMatrix {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= s);
        out
    }

    /// `Σ αᵢ Aᵢ`, all of equal shape.
    pub fn lin_comb(terms: &[(c64, &SparseMatrix)]) -> SparseMatrix {
        let (nr, nc) = (terms[0].1.nrows, terms[0].1.ncols);
        let mut trip = Vec::new();
        for (a, m) in terms {
            assert_eq!((m.nrows, m.ncols), (nr, nc), "shape mismatch in linear combination");
            trip.extend(m.triplets().map(|(r, c, v)| (r, c, v * *a)));
        }
        SparseMatrix::from_triplets(nr, nc, trip)
    }

    pub fn frobenius(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `‖A − Aᴴ‖_F / ‖A‖_F`, zero for the zero matrix.
    pub fn hermitian_residual(&self) -> f64 {
        let norm = self.frobenius();
        if norm == 0.0 {
            return 0.0;
        }
        let diff = SparseMatrix::lin_comb(&[(cz(1.0), self), (cz(-1.0), &self.adjoint())]);
        diff.frobenius() / norm
    }

    /// `‖A − B‖_F`.
    pub fn distance(&self, other: &SparseMatrix) -> f64 {
        SparseMatrix::lin_comb(&[(cz(1.0), self), (cz(-1.0), other)]).frobenius()
    }

    pub fn to_dense(&self) -> Mat<c64> {
        let mut m = Mat::<c64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v;
        }
        m
    }

    /// Dense real part; callers use it for matrices that are real by
    /// construction.
    pub fn to_dense_real(&self) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.triplets() {
            m[(r, c)] += v.re;
        }
        m
    }

    pub fn from_dense(m: &Mat<c64>, drop_tol: f64) -> SparseMatrix {
        let mut trip = Vec::new();
        for c in 0..m.ncols() {
            for r in 0..m.nrows() {
                let v = m[(r, c)];
                if v.norm() > drop_tol {
                    trip.push((r, c, v));
                }
            }
        }
        SparseMatrix::from_triplets(m.nrows(), m.ncols(), trip)
    }

    pub fn to_faer(&self) -> SparseColMat<usize, c64> {
        let trip: Vec<Triplet<usize, usize, c64>> = self.triplets().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip).expect("valid sparse pattern")
    }

    /// `xᴴ A x`.
    pub fn quad_form(&self, x: &[c64]) -> c64 {
        let ax = self.matvec(x);
        dot(x, &ax)
    }

    /// Block matrix `[[a, b], [c, d]]`.
    pub fn block2(a: &SparseMatrix, b: &SparseMatrix, c: &SparseMatrix, d: &SparseMatrix) -> SparseMatrix {
        assert_eq!(a.nrows, b.nrows);
        assert_eq!(c.nrows, d.nrows);
        assert_eq!(a.ncols, c.ncols);
        assert_eq!(b.ncols, d.ncols);
        let (n1, m1) = (a.nrows, a.ncols);
        let mut trip: Vec<(usize, usize, c64)> = a.triplets().collect();
        trip.extend(b.triplets().map(|(r, c, v)| (r, c + m1, v)));
        trip.extend(c.triplets().map(|(r, cc, v)| (r + n1, cc, v)));
        trip.extend(d.triplets().map(|(r, cc, v)| (r + n1, cc + m1, v)));
        SparseMatrix::from_triplets(n1 + c.nrows, m1 + b.ncols, trip)
    }

    /// Matrix Market coordinate format, complex general.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "%%MatrixMarket matrix coordinate complex general");
        let _ = writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz());
        for (r, c, v) in self.triplets() {
            let _ = writeln!(s, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im);
        }
        s
    }

    pub fn from_matrix_market(text: &str) -> Result<SparseMatrix> {
        let bad = |msg: &str| Error::Io(format!("matrix market: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty input"))?;
        let h: Vec<String> = header.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
        if h.len() != 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" || h[2] != "coordinate" {
            return Err(bad("unsupported header"));
        }
        let complex = match h[3].as_str() {
            "complex" => true,
            "real" => false,
            _ => return Err(bad("unsupported field type")),
        };
        if h[4] != "general" {
            return Err(bad("only general symmetry is supported"));
        }
        let mut body = lines.filter(|l| !l.starts_with('%') && !l.trim().is_empty());
        let size: Vec<usize> = body
            .next()
            .ok_or_else(|| bad("missing size line"))?
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad("bad size line")))
            .collect::<Result<_>>()?;
        if size.len() != 3 {
            return Err(bad("bad size line"));
        }
        let (nr, nc, nnz) = (size[0], size[1], size[2]);
        let mut trip = Vec::with_capacity(nnz);
        for line in body {
            let t: Vec<&str> = line.split_whitespace().collect();
            let need = if complex { 4 } else { 3 };
            if t.len() != need {
                return Err(bad("bad entry line"));
            }
            let r: usize = t[0].parse().map_err(|_| bad("bad row index"))?;
            let c: usize = t[1].parse().map_err(|_| bad("bad column index"))?;
            if r == 0 || c == 0 || r > nr || c > nc {
                return Err(bad("index out of range"));
            }
            let re: f64 = t[2].parse().map_err(|_| bad("bad value"))?;
            let im: f64 = if complex { t[3].parse().map_err(|_| bad("bad value"))? } else { 0.0 };
            trip.push((r - 1, c - 1, c64::new(re, im)));
        }
        if trip.len() != nnz {
            return Err(bad("entry count does not match header"));
        }
        Ok(SparseMatrix::from_triplets(nr, nc, trip))
    }
}

pub fn dot(x: &[c64], y: &[c64]) -> c64 {
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[c64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

pub fn axpy(a: c64, x: &[c64], y: &mut [c64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(x: &[c64], y: &[c64]) -> Vec<c64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

pub fn to_complex(x: &[f64]) -> Vec<c64> {
    x.iter().map(|&v| cz(v)).collect()
}

pub fn col_to_vec(m: &Mat<c64>, j: usize) -> Vec<c64> {
    (0..m.nrows()).map(|i| m[(i, j)]).collect()
}

pub fn vec_to_col(v: &[c64]) -> Mat<c64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Sparse LU factorisation with a residual-checked solve.
pub struct SparseLu {
    matrix: SparseMatrix,
    lu: faer::sparse::linalg::solvers::Lu<usize, c64>,
}

impl SparseLu {
    pub fn new(a: &SparseMatrix) -> Result<SparseLu> {
        if a.nrows != a.ncols {
            return Err(Error::DimensionMismatch(format!("LU of a {}x{} matrix", a.nrows, a.ncols)));
        }
        let lu = a
            .to_faer()
            .sp_lu()
            .map_err(|e| Error::SingularMatrix(format!("sparse LU failed: {e:?}")))?;
        Ok(SparseLu { matrix: a.clone(), lu })
    }

    /// Solves without checking the residual.
    pub fn solve_raw(&self, b: &[c64]) -> Vec<c64> {
        let rhs = vec_to_col(b);
        let x = self.lu.solve(&rhs);
        col_to_vec(&x, 0)
    }

    /// Solves and returns `(x, ‖Ax − b‖/‖b‖)`; a nonfinite solution or a
    /// relative residual above `max_residual` is reported as singular.
    pub fn solve(&self, b: &[c64], max_residual: f64) -> Result<(Vec<c64>, f64)> {
        let x = self.solve_raw(b);
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok((vec![zero(); b.len()], 0.0));
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularMatrix("factorisation produced nonfinite values".into()));
        }
        let r = norm2(&sub(&self.matrix.matvec(&x), b)) / bn;
        if r > max_residual {
            return Err(Error::SingularMatrix(format!("relative residual {r:e} after direct solve")));
        }
        Ok((x, r))
    }

    /// `A⁻ᴴ b`.
    pub fn solve_adjoint_raw(&self, b: &[c64]) -> Vec<c64> {
        let rhs = vec_to_col(b);
        let x = self.lu.solve_adjoint(&rhs);
        col_to_vec(&x, 0)
    }
}

/// Solves `A x = b` with a dense partially pivoted LU.
pub fn dense_solve(a: &Mat<c64>, b: &[c64]) -> Vec<c64> {
    let lu = a.partial_piv_lu();
    col_to_vec(&lu.solve(vec_to_col(b)), 0)
}

/// Dense Cholesky factor `L` of a Hermitian positive definite matrix.
pub fn cholesky_lower<T: ComplexField>(a: &Mat<T>) -> Result<Mat<T>> {
    let llt = a
        .llt(Side::Lower)
        .map_err(|_| Error::PreconditionViolated("Gram matrix is not positive definite".into()))?;
    Ok(llt.L().to_owned())
}

/// Solves `L X = B` in place for lower triangular `L`.
pub fn lower_solve<T: ComplexField>(l: &Mat<T>, b: &mut Mat<T>) {
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l.as_ref(), b.as_mut(), Par::Seq);
}

/// Solves `Lᴴ X = B` in place for lower triangular `L`.
pub fn lower_adjoint_solve<T: ComplexField>(l: &Mat<T>, b: &mut Mat<T>) {
    faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.adjoint(), b.as_mut(), Par::Seq);
}

/// Singular values in descending order.
pub fn singular_values(a: &Mat<c64>) -> Result<Vec<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Vec::new());
    }
    let s = a
        .singular_values()
        .map_err(|e| Error::SolverBreakdown(format!("SVD did not converge: {e:?}")))?;
    let mut s: Vec<f64> = s.into_iter().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

pub struct Svd<T> {
    pub u: Mat<T>,
    pub s: Vec<f64>,
    pub v: Mat<T>,
}

/// Full complex SVD `A = U diag(s) Vᴴ` with descending `s`.
pub fn svd(a: &Mat<c64>) -> Result<Svd<c64>> {
    let dec = a
        .svd()
        .map_err(|e| Error::SolverBreakdown(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = dec.S().column_vector().iter().map(|z| z.re).collect();
    Ok(Svd {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

/// Full real SVD `A = U diag(s) Vᵀ` with descending `s`; `U` and `V` are
/// square.
pub fn real_svd(a: &Mat<f64>) -> Result<Svd<f64>> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(Svd {
            u: Mat::identity(a.nrows(), a.nrows()),
            s: Vec::new(),
            v: Mat::identity(a.ncols(), a.ncols()),
        });
    }
    let dec = a
        .svd()
        .map_err(|e| Error::SolverBreakdown(format!("SVD did not converge: {e:?}")))?;
    let s: Vec<f64> = dec.S().column_vector().iter().copied().collect();
    Ok(Svd {
        u: dec.U().to_owned(),
        s,
        v: dec.V().to_owned(),
    })
}

/// Eigenvalues (ascending) and eigenvectors of a Hermitian matrix.
pub fn hermitian_eigen(a: &Mat<c64>) -> Result<(Vec<f64>, Mat<c64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SolverBreakdown(format!("eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = e.S().column_vector().iter().map(|z| z.re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Eigenvalues (ascending) and eigenvectors of a real symmetric matrix.
pub fn symmetric_eigen(a: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::SolverBreakdown(format!("eigensolver failed: {e:?}")))?;
    let vals: Vec<f64> = e.S().column_vector().iter().copied().collect();
    Ok((vals, e.U().to_owned()))
}

pub fn frob<T: ComplexField>(a: &Mat<T>) -> f64
where
    T::Real: Into<f64>,
{
    a.norm_l2().into()
}
