//! Small complex blocks and the sparse matrix used for the global system.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
/// Complex displacement vector (x, y).
pub type CVec2 = [C64; 2];
/// Complex 2×2 block, row-major.
pub type CMat2 = [[C64; 2]; 2];

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn mat2_vec(m: &CMat2, v: &CVec2) -> CVec2 {
    [
        m[0][0] * v[0] + m[0][1] * v[1],
        m[1][0] * v[0] + m[1][1] * v[1],
    ]
}

pub fn mat2_adjoint(m: &CMat2) -> CMat2 {
    [
        [m[0][0].conj(), m[1][0].conj()],
        [m[0][1].conj(), m[1][1].conj()],
    ]
}

pub fn vec2_norm(v: &CVec2) -> f64 {
    (v[0].norm_sqr() + v[1].norm_sqr()).sqrt()
}

/// Eigenvalues of a Hermitian 2×2 block in ascending order. Only the upper
/// triangle and the real part of the diagonal are read.
pub fn hermitian2_eigenvalues(m: &CMat2) -> [f64; 2] {
    let a = m[0][0].re;
    let d = m[1][1].re;
    let off = m[0][1].norm();
    let mean = 0.5 * (a + d);
    let radius = (0.25 * (a - d) * (a - d) + off * off).sqrt();
    // the product of eigenvalues is the determinant; use it for the small one
    // to avoid cancellation when the two are far apart
    let det = a * d - off * off;
    let big = if mean >= 0.0 { mean + radius } else { mean - radius };
    let small = if big != 0.0 { det / big } else { mean - radius };
    if big >= small {
        [small, big]
    } else {
        [big, small]
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, triplets: &[(usize, usize, C64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(r, c, _) in triplets {
            assert!(r < nrows && c < ncols, "triplet ({r}, {c}) out of bounds");
            counts[r + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; triplets.len()];
        let mut vals = vec![ZERO; triplets.len()];
        for &(r, c, v) in triplets {
            let k = next[r];
            cols[k] = c;
            vals[k] = v;
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        let mut scratch: Vec<(usize, C64)> = Vec::new();
        for r in 0..nrows {
            scratch.clear();
            scratch.extend((counts[r]..counts[r + 1]).map(|k| (cols[k], vals[k])));
            // stable sort keeps the summation order of duplicates deterministic
            scratch.sort_by_key(|&(c, _)| c);
            let mut iter = scratch.iter().peekable();
            while let Some(&(c, v)) = iter.next() {
                let mut acc = v;
                while let Some(&&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    acc += v2;
                    iter.next();
                }
                col_idx.push(c);
                values.push(acc);
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let t: Vec<_> = (0..n).map(|i| (i, i, C64::new(1.0, 0.0))).collect();
        Self::from_triplets(n, n, &t)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        let range = self.row_ptr[row]..self.row_ptr[row + 1];
        match self.col_idx[range.clone()].binary_search(&col) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    /// Iterates stored entries as (row, col, value).
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.nrows).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|r| {
                (self.row_ptr[r]..self.row_ptr[r + 1])
                    .map(|k| self.values[k] * x[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    /// xᴴ A y.
    pub fn form(&self, x: &[C64], y: &[C64]) -> C64 {
        let ay = self.mul_vec(y);
        x.iter().zip(&ay).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A_ij − conj(A_ji)| over stored entries of either side.
    pub fn hermitian_defect(&self) -> f64 {
        self.iter()
            .map(|(r, c, v)| (v - self.get(c, r).conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Returns self + scale · other.
    pub fn add_scaled(&self, other: &SparseMatrix, scale: C64) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut t: Vec<_> = self.iter().collect();
        t.extend(other.iter().map(|(r, c, v)| (r, c, scale * v)));
        Self::from_triplets(self.nrows, self.ncols, &t)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, C64>> {
        let t: Vec<_> = self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &t)
            .map_err(|e| Error::Solver(format!("matrix conversion failed: {e:?}")))
    }
}

pub fn norm2(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Outcome of a direct solve.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub solution: Vec<C64>,
    /// ‖Ax − b‖ / ‖b‖ (absolute residual when b = 0).
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

/// Sparse LU with partial pivoting followed by iterative refinement until
/// the relative residual reaches `tolerance` (at most three correction steps).
pub fn solve_sparse(matrix: &SparseMatrix, rhs: &[C64], tolerance: f64) -> Result<SolveReport> {
    let n = matrix.nrows();
    if matrix.ncols() != n || rhs.len() != n {
        return Err(Error::Solver(format!(
            "dimension mismatch: {}x{} matrix, rhs of length {}",
            matrix.nrows(),
            matrix.ncols(),
            rhs.len()
        )));
    }
    if n == 0 {
        return Ok(SolveReport {
            solution: Vec::new(),
            relative_residual: 0.0,
            refinement_steps: 0,
        });
    }
    let lu = matrix
        .to_faer()?
        .sp_lu()
        .map_err(|e| Error::Solver(format!("factorization failed: {e:?}")))?;

    let apply = |b: &[C64]| -> Vec<C64> {
        let mut m = Mat::<C64>::zeros(n, 1);
        for (i, v) in b.iter().enumerate() {
            m[(i, 0)] = *v;
        }
        lu.solve_in_place(m.as_mut());
        (0..n).map(|i| m[(i, 0)]).collect()
    };

    let b_norm = norm2(rhs);
    let scale = if b_norm > 0.0 { b_norm } else { 1.0 };
    let mut x = apply(rhs);
    let residual_of = |x: &[C64]| -> Vec<C64> {
        matrix
            .mul_vec(x)
            .iter()
            .zip(rhs)
            .map(|(ax, b)| b - ax)
            .collect()
    };
    let mut r = residual_of(&x);
    let mut rel = norm2(&r) / scale;
    let mut steps = 0;
    while rel > tolerance && rel.is_finite() && steps < 3 {
        let dx = apply(&r);
        for (xi, d) in x.iter_mut().zip(dx) {
            *xi += d;
        }
        r = residual_of(&x);
        rel = norm2(&r) / scale;
        steps += 1;
    }
    if !rel.is_finite() || x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(Error::Solver(
            "non-finite solution: matrix is numerically singular".into(),
        ));
    }
    if rel > tolerance {
        return Err(Error::Solver(format!(
            "relative residual {rel:e} above {tolerance:e} after {steps} refinement steps; matrix is ill-conditioned"
        )));
    }
    Ok(SolveReport {
        solution: x,
        relative_residual: rel,
        refinement_steps: steps,
    })
}
