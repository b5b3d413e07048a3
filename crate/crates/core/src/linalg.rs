//! Dense complex linear algebra over a generic [`Real`] scalar.
//!
//! The crate deliberately keeps its numerical core self-contained: matrices
//! are `ndarray` arrays of `Complex<R>`, and the handful of dense kernels
//! needed by the physics layers — Kronecker products, a scaling-and-squaring
//! matrix exponential, an LU solver, and Jacobi eigensolvers for Hermitian /
//! real-symmetric matrices — are implemented here rather than bound to a
//! BLAS/LAPACK backend, so that every routine works for both `f32` and `f64`
//! and the build stays pure Rust.
//!
//! Scale guidance: these kernels are used on "desk scale" problems
//! (dimensions up to a few thousand for monomial/streaming work, a few
//! hundred for genuinely dense factorizations), where cubic algorithms with
//! good constants are entirely adequate.

use crate::scalar::{re, Real, C};
use ndarray::{Array1, Array2};

/// Dense complex matrix over scalar `R`.
pub type CArr<R> = Array2<C<R>>;

/// `n × n` complex identity.
pub fn identity<R: Real>(n: usize) -> CArr<R> {
    Array2::from_diag_elem(n, C::new(R::one(), R::zero()))
}

/// Conjugate transpose.
pub fn dagger<R: Real>(a: &CArr<R>) -> CArr<R> {
    a.t().mapv(|z| z.conj())
}

/// Kronecker (tensor) product `a ⊗ b`.
pub fn kron<R: Real>(a: &CArr<R>, b: &CArr<R>) -> CArr<R> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij.norm_sqr() == R::zero() {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all<R: Real>(factors: &[&CArr<R>]) -> CArr<R> {
    assert!(!factors.is_empty(), "empty Kronecker product");
    let mut acc = factors[0].clone();
    for f in &factors[1..] {
        acc = kron(&acc, f);
    }
    acc
}

/// Matrix trace.
pub fn trace<R: Real>(a: &CArr<R>) -> C<R> {
    a.diag().iter().copied().sum()
}

/// Largest entrywise modulus of `a − b`.
pub fn max_abs_diff<R: Real>(a: &CArr<R>, b: &CArr<R>) -> R {
    assert_eq!(a.dim(), b.dim(), "shape mismatch");
    let mut m = R::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        m = m.max((*x - *y).norm());
    }
    m
}

/// Largest entrywise modulus.
pub fn max_abs<R: Real>(a: &CArr<R>) -> R {
    a.iter().fold(R::zero(), |m, z| m.max(z.norm()))
}

/// Induced 1-norm (maximum absolute column sum).
pub fn one_norm<R: Real>(a: &CArr<R>) -> R {
    let mut best = R::zero();
    for col in a.columns() {
        let s = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Frobenius norm.
pub fn fro_norm<R: Real>(a: &CArr<R>) -> R {
    a.iter().map(|z| z.norm_sqr()).sum::<R>().sqrt()
}

/// Whether `u† u = I` holds entrywise within `tol`.
pub fn is_unitary<R: Real>(u: &CArr<R>, tol: R) -> bool {
    let n = u.nrows();
    if n != u.ncols() {
        return false;
    }
    max_abs_diff(&dagger(u).dot(u), &identity(n)) <= tol
}

/// Solves `A X = B` for dense complex `A` (n×n) and `B` (n×m) by LU
/// factorization with partial pivoting. Panics on a numerically singular
/// pivot, which cannot occur for the well-conditioned systems used here
/// (Padé denominators are close to the identity by construction).
pub fn solve<R: Real>(a: &CArr<R>, b: &CArr<R>) -> CArr<R> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "solve: A must be square");
    assert_eq!(b.nrows(), n, "solve: dimension mismatch");
    let mut lu = a.clone();
    let mut x = b.clone();
    let m = x.ncols();
    for k in 0..n {
        // Partial pivot on the largest remaining modulus in column k.
        let mut piv = k;
        let mut best = lu[(k, k)].norm();
        for r in (k + 1)..n {
            let v = lu[(r, k)].norm();
            if v > best {
                best = v;
                piv = r;
            }
        }
        assert!(best > R::zero(), "solve: singular matrix");
        if piv != k {
            for c in 0..n {
                let t = lu[(k, c)];
                lu[(k, c)] = lu[(piv, c)];
                lu[(piv, c)] = t;
            }
            for c in 0..m {
                let t = x[(k, c)];
                x[(k, c)] = x[(piv, c)];
                x[(piv, c)] = t;
            }
        }
        let inv = re(R::one()) / lu[(k, k)];
        for r in (k + 1)..n {
            let f = lu[(r, k)] * inv;
            if f.norm_sqr() == R::zero() {
                continue;
            }
            for c in (k + 1)..n {
                let t = lu[(k, c)];
                lu[(r, c)] = lu[(r, c)] - f * t;
            }
            for c in 0..m {
                let t = x[(k, c)];
                x[(r, c)] = x[(r, c)] - f * t;
            }
        }
    }
    // Back substitution.
    for c in 0..m {
        for k in (0..n).rev() {
            let mut s = x[(k, c)];
            for j in (k + 1)..n {
                s = s - lu[(k, j)] * x[(j, c)];
            }
            x[(k, c)] = s / lu[(k, k)];
        }
    }
    x
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant (Higham's method). Accurate to close to machine precision
/// for any square input; intended for the moderate dimensions used by the
/// gate constructions and model-reduction checks.
pub fn expm<R: Real>(a: &CArr<R>) -> CArr<R> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "expm: square input required");
    const THETA13: f64 = 5.371920351148152;
    let norm = one_norm(a).to_f64().unwrap_or(f64::INFINITY);
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as u32
    } else {
        0
    };
    let scale = R::of((0.5f64).powi(s as i32));
    let a = a.mapv(|z| z * scale);

    const B: [f64; 14] = [
        64764752532480000.0,
        32382376266240000.0,
        7771770303897600.0,
        1187353796428800.0,
        129060195264000.0,
        10559470521600.0,
        670442572800.0,
        33522128640.0,
        1323241920.0,
        40840800.0,
        960960.0,
        16380.0,
        182.0,
        1.0,
    ];
    let b = |k: usize| re(R::of(B[k]));

    let id = identity::<R>(n);
    let a2 = a.dot(&a);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);

    let u_inner = &a6.mapv(|z| z * b(13)) + &a4.mapv(|z| z * b(11)) + &a2.mapv(|z| z * b(9));
    let u_poly = a6.dot(&u_inner)
        + &a6.mapv(|z| z * b(7))
        + &a4.mapv(|z| z * b(5))
        + &a2.mapv(|z| z * b(3))
        + &id.mapv(|z| z * b(1));
    let u = a.dot(&u_poly);

    let v_inner = &a6.mapv(|z| z * b(12)) + &a4.mapv(|z| z * b(10)) + &a2.mapv(|z| z * b(8));
    let v = a6.dot(&v_inner)
        + &a6.mapv(|z| z * b(6))
        + &a4.mapv(|z| z * b(4))
        + &a2.mapv(|z| z * b(2))
        + &id.mapv(|z| z * b(0));

    let mut f = solve(&(&v - &u), &(&v + &u));
    for _ in 0..s {
        f = f.dot(&f);
    }
    f
}

/// Eigendecomposition of a Hermitian matrix by the cyclic complex Jacobi
/// method. Returns eigenvalues in ascending order and the matching unitary
/// of column eigenvectors, so `a · v.col(k) = w[k] · v.col(k)`.
///
/// Convergence is quadratic once off-diagonal mass is small; the sweep cap
/// is generous and asserted, since non-convergence would indicate a
/// non-Hermitian input.
pub fn eigh<R: Real>(a: &CArr<R>) -> (Array1<R>, CArr<R>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "eigh: square input required");
    let mut m = a.clone();
    let mut v = identity::<R>(n);
    let scale = fro_norm(&m).max(R::one());
    let tol = R::epsilon() * scale;

    for _sweep in 0..60 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[(p, q)];
                let gn = g.norm();
                if gn <= tol * R::of(1e-3) {
                    continue;
                }
                // Phase factor reducing the 2×2 block to real symmetric,
                // then a classical Jacobi rotation on that block. The
                // combined unitary has entries J[p,p]=J[q,q]=c,
                // J[p,q]=s·u, J[q,p]=−s·conj(u) with u = g/|g|.
                let u = g / re(gn);
                let alpha = m[(p, p)].re;
                let beta = m[(q, q)].re;
                let theta = (beta - alpha) / (R::of(2.0) * gn);
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;

                // Column update: M ← M·J, V ← V·J.
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = mp * re(c) - mq * u.conj() * re(s);
                    m[(r, q)] = mp * u * re(s) + mq * re(c);
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = vp * re(c) - vq * u.conj() * re(s);
                    v[(r, q)] = vp * u * re(s) + vq * re(c);
                }
                // Row update: M ← J†·M.
                for col in 0..n {
                    let mp = m[(p, col)];
                    let mq = m[(q, col)];
                    m[(p, col)] = mp * re(c) - mq * u * re(s);
                    m[(q, col)] = mp * u.conj() * re(s) + mq * re(c);
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let evals: Vec<R> = (0..n).map(|k| m[(k, k)].re).collect();
    idx.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).expect("NaN eigenvalue"));
    let w = Array1::from_iter(idx.iter().map(|&k| evals[k]));
    let mut vs = Array2::zeros((n, n));
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vs[(r, new_col)] = v[(r, old_col)];
        }
    }
    (w, vs)
}

/// Eigendecomposition of a real symmetric matrix by cyclic Jacobi.
/// Returns ascending eigenvalues and the orthogonal matrix of column
/// eigenvectors. Used on hot paths (piecewise-constant control propagation)
/// where staying in real arithmetic halves the work.
pub fn eigh_real<R: Real>(a: &Array2<R>) -> (Array1<R>, Array2<R>) {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "eigh_real: square input required");
    let mut m = a.clone();
    let mut v = Array2::from_diag_elem(n, R::one());
    let scale = m.iter().map(|x| *x * *x).sum::<R>().sqrt().max(R::one());
    let tol = R::epsilon() * scale;

    for _sweep in 0..60 {
        let mut off = R::zero();
        for p in 0..n {
            for q in (p + 1)..n {
                off = off + m[(p, q)] * m[(p, q)];
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let g = m[(p, q)];
                if g.abs() <= tol * R::of(1e-3) {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (R::of(2.0) * g);
                let t = {
                    let sign = if theta >= R::zero() { R::one() } else { -R::one() };
                    sign / (theta.abs() + (theta * theta + R::one()).sqrt())
                };
                let c = R::one() / (t * t + R::one()).sqrt();
                let s = t * c;
                for r in 0..n {
                    let mp = m[(r, p)];
                    let mq = m[(r, q)];
                    m[(r, p)] = c * mp - s * mq;
                    m[(r, q)] = s * mp + c * mq;
                    let vp = v[(r, p)];
                    let vq = v[(r, q)];
                    v[(r, p)] = c * vp - s * vq;
                    v[(r, q)] = s * vp + c * vq;
                }
                for col in 0..n {
                    let mp = m[(p, col)];
                    let mq = m[(q, col)];
                    m[(p, col)] = c * mp - s * mq;
                    m[(q, col)] = s * mp + c * mq;
                }
            }
        }
    }

    let mut idx: Vec<usize> = (0..n).collect();
    let evals: Vec<R> = (0..n).map(|k| m[(k, k)]).collect();
    idx.sort_by(|&i, &j| evals[i].partial_cmp(&evals[j]).expect("NaN eigenvalue"));
    let w = Array1::from_iter(idx.iter().map(|&k| evals[k]));
    let mut vs = Array2::zeros((n, n));
    for (new_col, &old_col) in idx.iter().enumerate() {
        for r in 0..n {
            vs[(r, new_col)] = v[(r, old_col)];
        }
    }
    (w, vs)
}

/// Trace distance `½·‖ρ − σ‖₁` between two Hermitian matrices (sum of
/// absolute eigenvalues of the difference, halved).
pub fn trace_distance<R: Real>(rho: &CArr<R>, sigma: &CArr<R>) -> R {
    let (w, _) = eigh(&(rho - sigma));
    w.iter().map(|x| x.abs()).sum::<R>() * R::of(0.5)
}
