//! Compressed-sparse-row matrices with split real/imaginary storage.
//!
//! The open-system integrator in [`crate::cqed`] spends essentially all of
//! its time multiplying a handful of fixed sparse operators (Hamiltonian,
//! collapse operators — a few nonzeros per row) into dense density-matrix
//! panels. Storing the operator values as separate real and imaginary
//! planes, and the dense operand as separate real and imaginary row-major
//! planes, turns every multiply into contiguous real `axpy` passes over
//! matrix rows, which the compiler auto-vectorizes. Operators that are
//! purely real (every collapse operator in this crate) skip the imaginary
//! passes entirely.
//!
//! The module also provides a Taylor-series `exp(A)·v` action with scaling,
//! used where a matrix exponential is needed at dimensions where forming it
//! densely would dominate the runtime.

use crate::linalg::CArr;
use crate::scalar::{re, C, Real};

/// Sparse matrix in CSR layout with split real/imaginary value arrays.
#[derive(Debug, Clone)]
pub struct CsrMatrix<R> {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    val_re: Vec<R>,
    val_im: Vec<R>,
    has_im: bool,
}

impl<R: Real> CsrMatrix<R> {
    /// Builds a CSR matrix from a dense array, keeping entries with
    /// `|re| + |im| > drop_tol`.
    pub fn from_dense(a: &CArr<R>, drop_tol: R) -> Self {
        let (n_rows, n_cols) = a.dim();
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::new();
        let mut val_re = Vec::new();
        let mut val_im = Vec::new();
        let mut has_im = false;
        row_ptr.push(0);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let v = a[(i, j)];
                if v.re.abs() + v.im.abs() > drop_tol {
                    col_idx.push(j);
                    val_re.push(v.re);
                    val_im.push(v.im);
                    if v.im != R::zero() {
                        has_im = true;
                    }
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            val_re,
            val_im,
            has_im,
        }
    }

    /// Builds from coordinate triplets (must not contain duplicates).
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &mut Vec<(usize, usize, C<R>)>,
    ) -> Self {
        triplets.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut val_re = Vec::with_capacity(triplets.len());
        let mut val_im = Vec::with_capacity(triplets.len());
        let mut has_im = false;
        for &(i, j, v) in triplets.iter() {
            row_ptr[i + 1] += 1;
            col_idx.push(j);
            val_re.push(v.re);
            val_im.push(v.im);
            if v.im != R::zero() {
                has_im = true;
            }
        }
        for i in 0..n_rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            val_re,
            val_im,
            has_im,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Kronecker product of two sparse matrices.
    pub fn kron(a: &Self, b: &Self) -> Self {
        let mut triplets = Vec::with_capacity(a.nnz() * b.nnz());
        for ia in 0..a.n_rows {
            for ka in a.row_ptr[ia]..a.row_ptr[ia + 1] {
                let ja = a.col_idx[ka];
                let va = C::new(a.val_re[ka], a.val_im[ka]);
                for ib in 0..b.n_rows {
                    for kb in b.row_ptr[ib]..b.row_ptr[ib + 1] {
                        let jb = b.col_idx[kb];
                        let vb = C::new(b.val_re[kb], b.val_im[kb]);
                        triplets.push((ia * b.n_rows + ib, ja * b.n_cols + jb, va * vb));
                    }
                }
            }
        }
        Self::from_triplets(a.n_rows * b.n_rows, a.n_cols * b.n_cols, &mut triplets)
    }

    /// `alpha·self + beta·other` (matching shapes).
    pub fn add_scaled(&self, alpha: C<R>, other: &Self, beta: C<R>) -> Self {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        let mut triplets: Vec<(usize, usize, C<R>)> = Vec::new();
        for i in 0..self.n_rows {
            let mut row: std::collections::BTreeMap<usize, C<R>> = std::collections::BTreeMap::new();
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                *row.entry(self.col_idx[k]).or_insert_with(|| C::new(R::zero(), R::zero())) +=
                    alpha * C::new(self.val_re[k], self.val_im[k]);
            }
            for k in other.row_ptr[i]..other.row_ptr[i + 1] {
                *row.entry(other.col_idx[k]).or_insert_with(|| C::new(R::zero(), R::zero())) +=
                    beta * C::new(other.val_re[k], other.val_im[k]);
            }
            for (j, v) in row {
                if v.re != R::zero() || v.im != R::zero() {
                    triplets.push((i, j, v));
                }
            }
        }
        Self::from_triplets(self.n_rows, self.n_cols, &mut triplets)
    }

    /// Returns `alpha·self`.
    pub fn scaled(&self, alpha: C<R>) -> Self {
        let mut out = self.clone();
        for k in 0..out.nnz() {
            let v = alpha * C::new(out.val_re[k], out.val_im[k]);
            out.val_re[k] = v.re;
            out.val_im[k] = v.im;
            if v.im != R::zero() {
                out.has_im = true;
            }
        }
        out
    }

    /// Maximum absolute column sum (the induced 1-norm), used to pick the
    /// scaling depth of the exponential action.
    pub fn one_norm(&self) -> R {
        let mut col_sums = vec![R::zero(); self.n_cols];
        for k in 0..self.nnz() {
            let m = C::new(self.val_re[k], self.val_im[k]).norm();
            col_sums[self.col_idx[k]] += m;
        }
        col_sums.into_iter().fold(R::zero(), |a, b| a.max(b))
    }

    /// Dense reconstruction (tests and small matrices only).
    pub fn to_dense(&self) -> CArr<R> {
        let mut out = CArr::<R>::zeros((self.n_rows, self.n_cols));
        for i in 0..self.n_rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                out[(i, self.col_idx[k])] = C::new(self.val_re[k], self.val_im[k]);
            }
        }
        out
    }

    /// Complex sparse·vector product: `y = A·x`.
    pub fn mul_vec(&self, x: &[C<R>], y: &mut [C<R>]) {
        assert_eq!(x.len(), self.n_cols);
        assert_eq!(y.len(), self.n_rows);
        for i in 0..self.n_rows {
            let mut acc = C::new(R::zero(), R::zero());
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += C::new(self.val_re[k], self.val_im[k]) * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
    }

    /// Plane product `Y = A·X` where `X` and `Y` are dense row-major
    /// `n_cols×k` / `n_rows×k` panels split into real and imaginary parts.
    /// `Y` is overwritten.
    pub fn mul_planes(
        &self,
        k: usize,
        x_re: &[R],
        x_im: &[R],
        y_re: &mut [R],
        y_im: &mut [R],
    ) {
        assert_eq!(x_re.len(), self.n_cols * k);
        assert_eq!(y_re.len(), self.n_rows * k);
        y_re.fill(R::zero());
        y_im.fill(R::zero());
        for i in 0..self.n_rows {
            let (yr, yi) = (&mut y_re[i * k..(i + 1) * k], &mut y_im[i * k..(i + 1) * k]);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[p];
                let ar = self.val_re[p];
                let xr = &x_re[j * k..(j + 1) * k];
                let xi = &x_im[j * k..(j + 1) * k];
                if self.has_im {
                    let ai = self.val_im[p];
                    for c in 0..k {
                        yr[c] += ar * xr[c] - ai * xi[c];
                        yi[c] += ar * xi[c] + ai * xr[c];
                    }
                } else {
                    for c in 0..k {
                        yr[c] += ar * xr[c];
                        yi[c] += ar * xi[c];
                    }
                }
            }
        }
    }

    /// Accumulating plane product `Y += scale·(X·Aᴴ)` with `X` dense
    /// row-major `k×n_cols` and `Y` `k×n_rows`. Iterating the conjugated
    /// transpose through the CSR rows keeps every dense access on a
    /// contiguous row, so no explicit transposition is needed.
    pub fn acc_dense_times_dagger(
        &self,
        k: usize,
        scale: R,
        x_re: &[R],
        x_im: &[R],
        y_re: &mut [R],
        y_im: &mut [R],
    ) {
        assert_eq!(x_re.len(), k * self.n_cols);
        assert_eq!(y_re.len(), k * self.n_rows);
        for r in 0..k {
            let xr = &x_re[r * self.n_cols..(r + 1) * self.n_cols];
            let xi = &x_im[r * self.n_cols..(r + 1) * self.n_cols];
            let yr = &mut y_re[r * self.n_rows..(r + 1) * self.n_rows];
            let yi = &mut y_im[r * self.n_rows..(r + 1) * self.n_rows];
            for i in 0..self.n_rows {
                let mut acc_r = R::zero();
                let mut acc_i = R::zero();
                for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                    let j = self.col_idx[p];
                    let ar = self.val_re[p];
                    if self.has_im {
                        // (X·Aᴴ)_{ri} = Σ_j X_{rj}·conj(A_{ij})
                        let ai = self.val_im[p];
                        acc_r += xr[j] * ar + xi[j] * ai;
                        acc_i += xi[j] * ar - xr[j] * ai;
                    } else {
                        acc_r += xr[j] * ar;
                        acc_i += xi[j] * ar;
                    }
                }
                yr[i] += scale * acc_r;
                yi[i] += scale * acc_i;
            }
        }
    }
}

/// Computes `exp(A)·v` in place by uniform sub-stepping with a truncated
/// Taylor series: `v ← (exp(A/m))^m v`, each factor summed until terms stop
/// contributing. Intended for (anti-)Hermitian-like `A` where intermediate
/// growth is bounded; the step count is chosen from the 1-norm so each
/// sub-step series converges at machine precision.
pub fn expm_action<R: Real>(a: &CsrMatrix<R>, v: &mut Vec<C<R>>) {
    assert_eq!(a.n_rows(), a.n_cols());
    let norm = a.one_norm();
    let m = (norm / R::of(2.0)).to_f64().unwrap_or(1.0).ceil().max(1.0) as usize;
    let inv_m = R::one() / R::of(m as f64);
    let n = v.len();
    let mut term = vec![C::new(R::zero(), R::zero()); n];
    let mut next = vec![C::new(R::zero(), R::zero()); n];
    for _ in 0..m {
        term.copy_from_slice(v);
        let mut kfac = 1usize;
        loop {
            a.mul_vec(&term, &mut next);
            let scale = re::<R>(inv_m / R::of(kfac as f64));
            for c in next.iter_mut() {
                *c *= scale;
            }
            std::mem::swap(&mut term, &mut next);
            let mut tnorm = R::zero();
            let mut vnorm = R::zero();
            for i in 0..n {
                v[i] += term[i];
                tnorm += term[i].norm_sqr();
                vnorm += v[i].norm_sqr();
            }
            kfac += 1;
            if tnorm <= vnorm * R::of(1e-34) || kfac > 128 {
                break;
            }
        }
    }
}
