//! Generalized Pauli operators and gates for d-level systems.
//!
//! The single-site generators on a d-dimensional space are the cyclic shift
//! `X|j⟩ = |j⊕1⟩` and the clock operator `Z = diag(ζ^j)` with
//! `ζ = exp(2πi/d)` the principal d-th root of unity. They obey
//! `X^d = Z^d = I` and the commutation relation
//!
//! ```text
//! Z^k X^j = ζ^{jk} X^j Z^k        (equivalently X^j Z^k = ζ^{−jk} Z^k X^j)
//! ```
//!
//! The Fourier gate `F|a⟩ = d^{−1/2} Σ_k ζ^{ka}|k⟩` generalizes the
//! Hadamard: `F X F⁻¹ = Z`, `F Z F⁻¹ = X⁻¹`, `F²|a⟩ = |−a mod d⟩`, `F⁴ = I`.
//!
//! Two-qudit gates (control c, target t):
//!
//! - CPHASE `S|n_c, n_t⟩ = ζ^{n_c n_t}|n_c, n_t⟩` (diagonal, symmetric);
//! - SUM `D|n_c, n_t⟩ = |n_c, n_t ⊕ n_c⟩` (the qudit CNOT analogue), related
//!   to CPHASE by `D_{(c,t)} = F_{(t)}⁻¹ · S_{(c,t)} · F_{(t)}`;
//! - SWAP, constructed as the six-gate product
//!   `D₍₁₂₎ F₁² D₍₂₁₎ F₁² D₍₁₂₎ F₂²` — the identity this module exists to
//!   certify. All three embed into an arbitrary n-site chain space.
//!
//! CPHASE, SUM, SWAP and `F²` are *monomial* operators (at most one nonzero
//! entry per column), so products of them are composed exactly in O(dim)
//! before being materialized as dense matrices.

use crate::linalg::CArr;
use crate::scalar::{Real, C};
use ndarray::Array2;
use thiserror::Error;

/// Errors from gate construction.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum AlgebraError {
    #[error("qudit dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
    #[error("site {site} out of range 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("control and target sites must differ")]
    ControlEqualsTarget,
}

/// A validated qudit dimension `d ≥ 2` with its principal root of unity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuditDim {
    d: usize,
}

impl QuditDim {
    pub fn new(d: usize) -> Result<Self, AlgebraError> {
        if d < 2 {
            return Err(AlgebraError::DimensionTooSmall(d));
        }
        Ok(Self { d })
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    /// `ζ^k` for the principal root `ζ = exp(2πi/d)`, with the exponent
    /// reduced mod d before evaluation so long products do not lose
    /// accuracy to angle growth.
    pub fn zeta_pow<R: Real>(&self, k: i64) -> C<R> {
        let d = self.d as i64;
        let k = k.rem_euclid(d);
        let angle = 2.0 * std::f64::consts::PI * (k as f64) / (d as f64);
        C::new(R::of(angle.cos()), R::of(angle.sin()))
    }

    /// Euclidean reduction of an exponent into `0..d`.
    #[inline]
    pub fn reduce(&self, e: i64) -> i64 {
        e.rem_euclid(self.d as i64)
    }
}

/// Which single-site generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliKind {
    X,
    Z,
}

/// Which two-qudit gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoQuditKind {
    Cphase,
    Sum,
    Swap,
}

/// Monomial operator on a `dim`-dimensional space: `M|j⟩ = phase[j]·|perm[j]⟩`.
/// Exact composition of the permutation-with-phases gates.
#[derive(Clone)]
pub struct Monomial<R: Real> {
    pub perm: Vec<usize>,
    pub phase: Vec<C<R>>,
}

impl<R: Real> Monomial<R> {
    pub fn identity(dim: usize) -> Self {
        Self {
            perm: (0..dim).collect(),
            phase: vec![C::new(R::one(), R::zero()); dim],
        }
    }

    /// Composition `other ∘ self` (apply `self` first).
    pub fn then(&self, other: &Monomial<R>) -> Self {
        let dim = self.perm.len();
        let mut perm = vec![0usize; dim];
        let mut phase = vec![C::new(R::zero(), R::zero()); dim];
        for j in 0..dim {
            let mid = self.perm[j];
            perm[j] = other.perm[mid];
            phase[j] = self.phase[j] * other.phase[mid];
        }
        Self { perm, phase }
    }

    pub fn to_dense(&self) -> CArr<R> {
        let dim = self.perm.len();
        let mut out = Array2::zeros((dim, dim));
        for j in 0..dim {
            out[(self.perm[j], j)] = self.phase[j];
        }
        out
    }

    /// Action on a dense vector, `out[perm[j]] = phase[j]·v[j]`.
    pub fn apply_vec(&self, v: &[C<R>], out: &mut [C<R>]) {
        for z in out.iter_mut() {
            *z = C::new(R::zero(), R::zero());
        }
        for (j, &p) in self.perm.iter().enumerate() {
            out[p] = self.phase[j] * v[j];
        }
    }
}

/// Mixed-radix digit of `index` at `site` (1-based, site 1 most significant)
/// in the `d`-ary decomposition over `n_sites` digits.
#[inline]
pub fn digit_at(index: usize, site: usize, d: usize, n_sites: usize) -> usize {
    (index / d.pow((n_sites - site) as u32)) % d
}

/// Replaces the digit at `site` in `index`, returning the new index.
#[inline]
pub fn with_digit(index: usize, site: usize, new_digit: usize, d: usize, n_sites: usize) -> usize {
    let old = digit_at(index, site, d, n_sites) as i64;
    let weight = d.pow((n_sites - site) as u32) as i64;
    (index as i64 + (new_digit as i64 - old) * weight) as usize
}

/// `X^power` or `Z^power` on a single d-dimensional space.
///
/// `X` is the full cyclic shift `Σ_j |j⊕1⟩⟨j|`; `Z = Σ_j ζ^j |j⟩⟨j|`.
/// Any integer power is accepted and reduced mod d, so `X^d = Z^d = I`.
pub fn generalized_pauli<R: Real>(dim: QuditDim, kind: PauliKind, power: i64) -> CArr<R> {
    let d = dim.d();
    let p = dim.reduce(power) as usize;
    let mut out = Array2::zeros((d, d));
    match kind {
        PauliKind::X => {
            for j in 0..d {
                out[((j + p) % d, j)] = C::new(R::one(), R::zero());
            }
        }
        PauliKind::Z => {
            for j in 0..d {
                out[(j, j)] = dim.zeta_pow((j as i64) * (p as i64));
            }
        }
    }
    out
}

/// `F^power` with `F|a⟩ = d^{−1/2} Σ_k ζ^{ka}|k⟩`; the power is reduced
/// mod 4 (`F⁴ = I`). `F²` is returned as the exact parity permutation
/// `|a⟩ → |−a mod d⟩` and `F³ = F̄` (entrywise conjugate of `F`), keeping
/// every entry a product of at most one root of unity and `d^{−1/2}`.
pub fn fourier_gate<R: Real>(dim: QuditDim, power: i64) -> CArr<R> {
    let d = dim.d();
    let p = power.rem_euclid(4);
    let inv_sqrt_d = R::of(1.0 / (d as f64).sqrt());
    let mut out = Array2::zeros((d, d));
    match p {
        0 => {
            for j in 0..d {
                out[(j, j)] = C::new(R::one(), R::zero());
            }
        }
        1 | 3 => {
            let sign = if p == 1 { 1 } else { -1 };
            for a in 0..d {
                for k in 0..d {
                    out[(k, a)] =
                        dim.zeta_pow::<R>(sign * (k as i64) * (a as i64)) * C::new(inv_sqrt_d, R::zero());
                }
            }
        }
        2 => {
            for a in 0..d {
                out[((d - a) % d, a)] = C::new(R::one(), R::zero());
            }
        }
        _ => unreachable!(),
    }
    out
}

/// Single-site operator embedded into the `n_sites`-fold tensor space
/// (site 1 is the leftmost/most-significant tensor factor).
pub fn embed_single<R: Real>(op: &CArr<R>, site: usize, d: usize, n_sites: usize) -> CArr<R> {
    assert!(site >= 1 && site <= n_sites, "site out of range");
    let left = d.pow((site - 1) as u32);
    let right = d.pow((n_sites - site) as u32);
    let dim = d.pow(n_sites as u32);
    let mut out = Array2::zeros((dim, dim));
    for l in 0..left {
        for r in 0..right {
            for i in 0..d {
                for j in 0..d {
                    let v = op[(i, j)];
                    if v.norm_sqr() == R::zero() {
                        continue;
                    }
                    let row = (l * d + i) * right + r;
                    let col = (l * d + j) * right + r;
                    out[(row, col)] = v;
                }
            }
        }
    }
    out
}

fn check_sites(control: usize, target: usize, n_sites: usize) -> Result<(), AlgebraError> {
    for site in [control, target] {
        if site < 1 || site > n_sites {
            return Err(AlgebraError::SiteOutOfRange { site, n_sites });
        }
    }
    if control == target {
        return Err(AlgebraError::ControlEqualsTarget);
    }
    Ok(())
}

/// CPHASE as a monomial (diagonal) operator on the n-site space.
fn cphase_monomial<R: Real>(dim: QuditDim, c: usize, t: usize, n_sites: usize) -> Monomial<R> {
    let d = dim.d();
    let total = d.pow(n_sites as u32);
    let mut m = Monomial::identity(total);
    for idx in 0..total {
        let nc = digit_at(idx, c, d, n_sites) as i64;
        let nt = digit_at(idx, t, d, n_sites) as i64;
        m.phase[idx] = dim.zeta_pow(nc * nt);
    }
    m
}

/// SUM as a monomial (permutation) operator on the n-site space.
fn sum_monomial<R: Real>(dim: QuditDim, c: usize, t: usize, n_sites: usize) -> Monomial<R> {
    let d = dim.d();
    let total = d.pow(n_sites as u32);
    let mut m = Monomial::identity(total);
    for idx in 0..total {
        let nc = digit_at(idx, c, d, n_sites);
        let nt = digit_at(idx, t, d, n_sites);
        m.perm[idx] = with_digit(idx, t, (nt + nc) % d, d, n_sites);
    }
    m
}

/// `F²` on a single site as a monomial (parity permutation) operator.
fn parity_monomial<R: Real>(dim: QuditDim, site: usize, n_sites: usize) -> Monomial<R> {
    let d = dim.d();
    let total = d.pow(n_sites as u32);
    let mut m = Monomial::identity(total);
    for idx in 0..total {
        let n = digit_at(idx, site, d, n_sites);
        m.perm[idx] = with_digit(idx, site, (d - n) % d, d, n_sites);
    }
    m
}

/// The two-qudit SWAP as the exact six-gate monomial composition
/// `D_{(c,t)} F_c² D_{(t,c)} F_c² D_{(c,t)} F_t²` (left factor applied last).
fn swap_monomial<R: Real>(dim: QuditDim, c: usize, t: usize, n_sites: usize) -> Monomial<R> {
    // Operator product A₁A₂…A₆ acts right-to-left; compose with `then`
    // starting from the rightmost factor.
    let f_t2 = parity_monomial::<R>(dim, t, n_sites);
    let d_ct = sum_monomial::<R>(dim, c, t, n_sites);
    let f_c2 = parity_monomial::<R>(dim, c, n_sites);
    let d_tc = sum_monomial::<R>(dim, t, c, n_sites);
    f_t2.then(&d_ct).then(&f_c2).then(&d_tc).then(&f_c2).then(&d_ct)
}

/// Dense two-qudit gate embedded in the `n_sites`-fold tensor space.
///
/// `Cphase` and `Sum` act with `control`/`target` as defined above; `Swap`
/// is built from the six-gate CPHASE/Fourier decomposition (its defining
/// construction) rather than written down as a permutation, so tests can
/// certify the identity against an independent permutation oracle.
pub fn two_qudit_gate<R: Real>(
    dim: QuditDim,
    kind: TwoQuditKind,
    control: usize,
    target: usize,
    n_sites: usize,
) -> Result<CArr<R>, AlgebraError> {
    check_sites(control, target, n_sites)?;
    let m = match kind {
        TwoQuditKind::Cphase => cphase_monomial::<R>(dim, control, target, n_sites),
        TwoQuditKind::Sum => sum_monomial::<R>(dim, control, target, n_sites),
        TwoQuditKind::Swap => swap_monomial::<R>(dim, control, target, n_sites),
    };
    Ok(m.to_dense())
}
