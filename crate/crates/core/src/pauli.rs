//! Symbolic Pauli words on a chain, with exact phase bookkeeping.
//!
//! A *Pauli word* is a phase times a product of single-site factors in
//! normal order (X left of Z on each site):
//!
//! ```text
//! W = phase · Π_a X_a^{x_a} Z_a^{z_a}
//! ```
//!
//! Multiplication never touches matrices: factors on distinct sites commute,
//! and on one site the reorder rule `Z^k X^j = ζ^{jk} X^j Z^k` restores
//! normal order while accumulating the phase exactly.
//!
//! The arithmetic of exponents and phases is abstracted by
//! [`ExponentAlgebra`] so the same word type serves two regimes:
//!
//! - [`QuditAlgebra`]: exponents are integers mod d, phases are integer
//!   powers of the principal root `ζ_d = exp(2πi/d)` — everything exact;
//! - [`CvAlgebra`]: exponents are real shift/boost amounts `(q, p)` for the
//!   Weyl operators `X(q)|s⟩ = |s+q⟩`, `Z(p)|s⟩ = e^{isp}|s⟩` on a mode,
//!   and the phase is a real angle in radians. The reorder rule is the
//!   Weyl relation `Z(p)X(q) = e^{iqp} X(q)Z(p)` — the same orientation as
//!   the qudit rule with `ζ → e^{i}`.
//!
//! Qudit words can be realized as dense (monomial) matrices on the full
//! chain space for oracle comparisons; CV words stay symbolic and are
//! consumed by the Gaussian phase-space module.

use crate::linalg::CArr;
use crate::qudit::{digit_at, with_digit, Monomial, QuditDim};
use crate::scalar::{Real, C};
use std::collections::BTreeMap;
use std::fmt::Debug;

/// Exponent-and-phase arithmetic for one family of Pauli words.
pub trait ExponentAlgebra: Clone + Debug + PartialEq {
    /// Exponent scalar (integer mod d, or real displacement).
    type Exp: Copy + Debug + PartialEq;
    /// Phase accumulator (power of ζ_d, or angle in radians).
    type Phase: Copy + Debug + PartialEq;

    fn zero_exp(&self) -> Self::Exp;
    fn add_exp(&self, a: Self::Exp, b: Self::Exp) -> Self::Exp;
    fn neg_exp(&self, a: Self::Exp) -> Self::Exp;
    fn exp_is_zero(&self, a: Self::Exp) -> bool;

    fn zero_phase(&self) -> Self::Phase;
    fn add_phase(&self, a: Self::Phase, b: Self::Phase) -> Self::Phase;
    fn neg_phase(&self, a: Self::Phase) -> Self::Phase;
    /// Phase acquired when `Z^k` moves right past `X^j` (reorder to normal
    /// order): the exponent product `j·k` in the algebra's phase units.
    fn reorder_phase(&self, j: Self::Exp, k: Self::Exp) -> Self::Phase;
    /// Scalar multiple of the reorder unit: `ζ^{c·j·k}`-type phases that
    /// appear in conjugation rules.
    fn scaled_phase(&self, c: i64, j: Self::Exp, k: Self::Exp) -> Self::Phase;
    fn phase_value<R: Real>(&self, p: Self::Phase) -> C<R>;
}

/// Integers mod d with phases as powers of `ζ_d`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuditAlgebra {
    dim: QuditDim,
}

impl QuditAlgebra {
    pub fn new(dim: QuditDim) -> Self {
        Self { dim }
    }

    pub fn dim(&self) -> QuditDim {
        self.dim
    }
}

impl ExponentAlgebra for QuditAlgebra {
    type Exp = i64;
    type Phase = i64;

    fn zero_exp(&self) -> i64 {
        0
    }
    fn add_exp(&self, a: i64, b: i64) -> i64 {
        self.dim.reduce(a + b)
    }
    fn neg_exp(&self, a: i64) -> i64 {
        self.dim.reduce(-a)
    }
    fn exp_is_zero(&self, a: i64) -> bool {
        self.dim.reduce(a) == 0
    }

    fn zero_phase(&self) -> i64 {
        0
    }
    fn add_phase(&self, a: i64, b: i64) -> i64 {
        self.dim.reduce(a + b)
    }
    fn neg_phase(&self, a: i64) -> i64 {
        self.dim.reduce(-a)
    }
    fn reorder_phase(&self, j: i64, k: i64) -> i64 {
        self.dim.reduce(self.dim.reduce(j) * self.dim.reduce(k))
    }
    fn scaled_phase(&self, c: i64, j: i64, k: i64) -> i64 {
        self.dim
            .reduce(self.dim.reduce(c) * self.dim.reduce(j) * self.dim.reduce(k))
    }
    fn phase_value<R: Real>(&self, p: i64) -> C<R> {
        self.dim.zeta_pow(p)
    }
}

/// Real Weyl displacements with phases as angles in radians.
#[derive(Clone, Debug, PartialEq)]
pub struct CvAlgebra;

impl ExponentAlgebra for CvAlgebra {
    type Exp = f64;
    type Phase = f64;

    fn zero_exp(&self) -> f64 {
        0.0
    }
    fn add_exp(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn neg_exp(&self, a: f64) -> f64 {
        -a
    }
    fn exp_is_zero(&self, a: f64) -> bool {
        a == 0.0
    }

    fn zero_phase(&self) -> f64 {
        0.0
    }
    fn add_phase(&self, a: f64, b: f64) -> f64 {
        a + b
    }
    fn neg_phase(&self, a: f64) -> f64 {
        -a
    }
    fn reorder_phase(&self, j: f64, k: f64) -> f64 {
        j * k
    }
    fn scaled_phase(&self, c: i64, j: f64, k: f64) -> f64 {
        (c as f64) * j * k
    }
    fn phase_value<R: Real>(&self, p: f64) -> C<R> {
        R::cis(R::of(p))
    }
}

/// One site's factor `X^{x} Z^{z}` in a normal-ordered word.
#[derive(Debug)]
pub struct SiteFactor<A: ExponentAlgebra> {
    pub x: A::Exp,
    pub z: A::Exp,
}

// Manual Clone/Copy/PartialEq: the derives would demand `A: Copy` etc.,
// but only the exponent scalars need to be copyable.
impl<A: ExponentAlgebra> Clone for SiteFactor<A> {
    fn clone(&self) -> Self {
        Self { x: self.x, z: self.z }
    }
}
impl<A: ExponentAlgebra> Copy for SiteFactor<A> {}
impl<A: ExponentAlgebra> PartialEq for SiteFactor<A> {
    fn eq(&self, other: &Self) -> bool {
        self.x == other.x && self.z == other.z
    }
}

/// A normal-ordered Pauli word `phase · Π_a X_a^{x_a} Z_a^{z_a}`.
///
/// Sites are 1-based; sites absent from the map carry the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliWord<A: ExponentAlgebra> {
    alg: A,
    factors: BTreeMap<usize, SiteFactor<A>>,
    phase: A::Phase,
}

impl<A: ExponentAlgebra> PauliWord<A> {
    pub fn identity(alg: A) -> Self {
        let phase = alg.zero_phase();
        Self {
            alg,
            factors: BTreeMap::new(),
            phase,
        }
    }

    /// `X_site^{exp}` (kind = X) or `Z_site^{exp}`.
    pub fn generator(alg: A, site: usize, x: A::Exp, z: A::Exp) -> Self {
        let mut w = Self::identity(alg);
        w.set_factor(site, x, z);
        w
    }

    pub fn algebra(&self) -> &A {
        &self.alg
    }

    pub fn phase(&self) -> A::Phase {
        self.phase
    }

    pub fn add_phase(&mut self, p: A::Phase) {
        self.phase = self.alg.add_phase(self.phase, p);
    }

    pub fn factor(&self, site: usize) -> SiteFactor<A> {
        self.factors.get(&site).copied().unwrap_or(SiteFactor {
            x: self.alg.zero_exp(),
            z: self.alg.zero_exp(),
        })
    }

    /// Sites carrying a non-identity factor, in ascending order.
    pub fn support(&self) -> impl Iterator<Item = (usize, SiteFactor<A>)> + '_ {
        self.factors.iter().map(|(&s, &f)| (s, f))
    }

    pub fn set_factor(&mut self, site: usize, x: A::Exp, z: A::Exp) {
        if self.alg.exp_is_zero(x) && self.alg.exp_is_zero(z) {
            self.factors.remove(&site);
        } else {
            self.factors.insert(site, SiteFactor { x, z });
        }
    }

    pub fn is_identity_up_to_phase(&self) -> bool {
        self.factors.is_empty()
    }

    /// Normal-ordered product `self · other`.
    ///
    /// Per site, `X^{x₁}Z^{z₁} · X^{x₂}Z^{z₂} = ζ^{x₂ z₁} X^{x₁+x₂} Z^{z₁+z₂}`;
    /// different sites commute with no phase.
    pub fn mul(&self, other: &Self) -> Self {
        let alg = self.alg.clone();
        let mut out = Self::identity(alg);
        out.phase = out.alg.add_phase(self.phase, other.phase);
        let sites: std::collections::BTreeSet<usize> = self
            .factors
            .keys()
            .chain(other.factors.keys())
            .copied()
            .collect();
        for site in sites {
            let a = self.factor(site);
            let b = other.factor(site);
            let reorder = out.alg.reorder_phase(b.x, a.z);
            out.phase = out.alg.add_phase(out.phase, reorder);
            out.set_factor(site, out.alg.add_exp(a.x, b.x), out.alg.add_exp(a.z, b.z));
        }
        out
    }

    /// `self⁻¹`: per site, `(X^x Z^z)⁻¹ = ζ^{xz} X^{−x} Z^{−z}`, and the
    /// overall phase negates.
    pub fn inverse(&self) -> Self {
        let mut out = Self::identity(self.alg.clone());
        out.phase = self.alg.neg_phase(self.phase);
        for (&site, &f) in &self.factors {
            let reorder = out.alg.reorder_phase(f.x, f.z);
            out.phase = out.alg.add_phase(out.phase, reorder);
            out.set_factor(site, out.alg.neg_exp(f.x), out.alg.neg_exp(f.z));
        }
        out
    }
}

/// Qudit words on an `n_sites` chain realize as monomial operators:
/// the Z part contributes a diagonal phase `ζ^{Σ_a z_a n_a}` evaluated on
/// the *input* basis state, then the X part shifts each digit.
impl PauliWord<QuditAlgebra> {
    pub fn to_monomial<R: Real>(&self, n_sites: usize) -> Monomial<R> {
        let dim = self.alg.dim();
        let d = dim.d();
        let total = d.pow(n_sites as u32);
        let mut m = Monomial::identity(total);
        let global: C<R> = self.alg.phase_value(self.phase);
        for idx in 0..total {
            let mut phase_power = 0i64;
            let mut target = idx;
            for (&site, &f) in &self.factors {
                assert!(site >= 1 && site <= n_sites, "word site out of range");
                let n = digit_at(idx, site, d, n_sites) as i64;
                phase_power += dim.reduce(f.z) * n;
                let shifted = dim.reduce(n + f.x) as usize;
                target = with_digit(target, site, shifted, d, n_sites);
            }
            m.perm[idx] = target;
            m.phase[idx] = global * dim.zeta_pow::<R>(phase_power);
        }
        m
    }

    pub fn to_dense<R: Real>(&self, n_sites: usize) -> CArr<R> {
        self.to_monomial::<R>(n_sites).to_dense()
    }
}
