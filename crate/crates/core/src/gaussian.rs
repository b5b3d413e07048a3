//! Continuous-variable (Gaussian / symplectic) realization of the mirror
//! protocol.
//!
//! Every gate in the protocol is Gaussian, so its Heisenberg action on the
//! mode quadratures `ξ = (x₁, p₁, …, x_N, p_N)` is a symplectic matrix:
//! conjugating a Weyl displacement `D_v` gives `D_{Sv}`, a Gaussian state
//! `(mean, cov)` maps to `(S·mean + d, S·cov·Sᵀ)`, and arbitrary
//! (non-Gaussian) states follow by decomposing over coherent states — the
//! displacement argument carries the full protocol.
//!
//! Conventions: `ħ = 1`, quadratures scaled so the vacuum covariance is
//! the identity (`x̃ = a + a†`, `p̃ = −i(a − a†)`); symplectic form
//! `Ω = ⊕ [[0, 1], [−1, 0]]` per mode, uncertainty `cov + iΩ ⪰ 0`; a
//! coherent state `α` has mean `(2 Re α, 2 Im α)` on its mode.
//!
//! Gate actions (the `+` versions throughout):
//!
//! - Fourier `F`: per-mode quarter rotation `(x, p) → (−p, x)`, so that in
//!   Weyl terms `F X(q) F⁻¹ = Z(q)` and `F Z(p) F⁻¹ = X(−p)`;
//! - CPHASE `exp(i x̂₁x̂₂)` (scaled quadratures): shear `p₁ += x₂`,
//!   `p₂ += x₁`;
//! - SUM `exp(−i q̂₁p̂₂)`: `x₂ += x₁`, `p₁ −= p₂`.
//!
//! The composed pulse sequence `F̄²(F̄⁻¹S̄)^{N+1}` equals the mode-reversal
//! permutation of phase space exactly, which is the CV mirror statement.

use crate::scalar::Real;
use ndarray::{Array1, Array2};
use serde_json::{json, Value};
use thiserror::Error;

pub type RArr<R> = Array2<R>;
pub type RVec1<R> = Array1<R>;

#[derive(Debug, Error, PartialEq)]
pub enum GaussianError {
    #[error("need at least one mode")]
    NoModes,
    #[error("mode {mode} out of range 1..={n_modes}")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("control and target modes must differ")]
    ControlEqualsTarget,
    #[error("mean has length {got}, expected {want}")]
    WrongMeanLength { got: usize, want: usize },
    #[error("covariance has shape {got_rows}x{got_cols}, expected {want}x{want}")]
    WrongCovShape {
        got_rows: usize,
        got_cols: usize,
        want: usize,
    },
    #[error("covariance is not symmetric (deviation {0})")]
    NotSymmetric(f64),
    #[error("covariance violates the uncertainty relation (min eigenvalue {0})")]
    UncertaintyViolated(f64),
    #[error("states have different mode counts")]
    ModeMismatch,
}

/// The standard symplectic form `Ω = ⊕ [[0, 1], [−1, 0]]` on N modes.
pub fn symplectic_form<R: Real>(n_modes: usize) -> RArr<R> {
    let mut omega = Array2::zeros((2 * n_modes, 2 * n_modes));
    for m in 0..n_modes {
        omega[(2 * m, 2 * m + 1)] = R::one();
        omega[(2 * m + 1, 2 * m)] = -R::one();
    }
    omega
}

/// A Gaussian state: mean vector `(x₁, p₁, …)` and covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianState<R: Real> {
    n_modes: usize,
    pub mean: RVec1<R>,
    pub cov: RArr<R>,
}

impl<R: Real> GaussianState<R> {
    /// N-mode vacuum: zero mean, identity covariance.
    pub fn vacuum(n_modes: usize) -> Result<Self, GaussianError> {
        if n_modes == 0 {
            return Err(GaussianError::NoModes);
        }
        Ok(Self {
            n_modes,
            mean: Array1::zeros(2 * n_modes),
            cov: Array2::eye(2 * n_modes),
        })
    }

    /// Coherent state `α` on one mode (1-based), vacuum elsewhere.
    pub fn coherent(n_modes: usize, mode: usize, alpha_re: R, alpha_im: R) -> Result<Self, GaussianError> {
        let mut s = Self::vacuum(n_modes)?;
        if mode < 1 || mode > n_modes {
            return Err(GaussianError::ModeOutOfRange { mode, n_modes });
        }
        let two = R::of(2.0);
        s.mean[2 * (mode - 1)] = two * alpha_re;
        s.mean[2 * (mode - 1) + 1] = two * alpha_im;
        Ok(s)
    }

    /// Two-mode squeezed vacuum with parameter `r` on modes `(i, j)`,
    /// vacuum elsewhere: `cov = [[cosh2r·I, sinh2r·σz], [sinh2r·σz, cosh2r·I]]`
    /// on the pair.
    pub fn two_mode_squeezed(
        n_modes: usize,
        i: usize,
        j: usize,
        r: R,
    ) -> Result<Self, GaussianError> {
        let mut s = Self::vacuum(n_modes)?;
        for mode in [i, j] {
            if mode < 1 || mode > n_modes {
                return Err(GaussianError::ModeOutOfRange { mode, n_modes });
            }
        }
        if i == j {
            return Err(GaussianError::ControlEqualsTarget);
        }
        let (ch, sh) = ((R::of(2.0) * r).cosh(), (R::of(2.0) * r).sinh());
        let (bi, bj) = (2 * (i - 1), 2 * (j - 1));
        for k in 0..2 {
            s.cov[(bi + k, bi + k)] = ch;
            s.cov[(bj + k, bj + k)] = ch;
        }
        s.cov[(bi, bj)] = sh;
        s.cov[(bj, bi)] = sh;
        s.cov[(bi + 1, bj + 1)] = -sh;
        s.cov[(bj + 1, bi + 1)] = -sh;
        Ok(s)
    }

    /// Validating constructor from raw parts.
    pub fn from_parts(n_modes: usize, mean: RVec1<R>, cov: RArr<R>) -> Result<Self, GaussianError> {
        if n_modes == 0 {
            return Err(GaussianError::NoModes);
        }
        let want = 2 * n_modes;
        if mean.len() != want {
            return Err(GaussianError::WrongMeanLength {
                got: mean.len(),
                want,
            });
        }
        if cov.nrows() != want || cov.ncols() != want {
            return Err(GaussianError::WrongCovShape {
                got_rows: cov.nrows(),
                got_cols: cov.ncols(),
                want,
            });
        }
        let mut asym = R::zero();
        for i in 0..want {
            for j in 0..want {
                let d = (cov[(i, j)] - cov[(j, i)]).abs();
                if d > asym {
                    asym = d;
                }
            }
        }
        if asym.to_f64().unwrap_or(f64::INFINITY) > 1e-10 {
            return Err(GaussianError::NotSymmetric(asym.to_f64().unwrap_or(f64::NAN)));
        }
        let s = Self { n_modes, mean, cov };
        let min_eig = s.uncertainty_min_eigenvalue();
        if min_eig.to_f64().unwrap_or(f64::NEG_INFINITY) < -1e-9 {
            return Err(GaussianError::UncertaintyViolated(
                min_eig.to_f64().unwrap_or(f64::NAN),
            ));
        }
        Ok(s)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Smallest eigenvalue of the Hermitian matrix `cov + iΩ`; the
    /// uncertainty relation is `≥ 0` (tolerating −1e−9 numerically).
    pub fn uncertainty_min_eigenvalue(&self) -> R {
        let n = 2 * self.n_modes;
        let omega = symplectic_form::<R>(self.n_modes);
        let mut h = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                h[(i, j)] = crate::scalar::C::new(self.cov[(i, j)], omega[(i, j)]);
            }
        }
        let (w, _) = crate::linalg::eigh(&h);
        w[0]
    }

    /// The state with mode order reversed (mode a ↔ mode N+1−a).
    pub fn mode_reversal(&self) -> Self {
        let n = self.n_modes;
        let perm: Vec<usize> = (0..2 * n)
            .map(|k| 2 * (n - 1 - k / 2) + k % 2)
            .collect();
        let mut mean = Array1::zeros(2 * n);
        let mut cov = Array2::zeros((2 * n, 2 * n));
        for i in 0..2 * n {
            mean[perm[i]] = self.mean[i];
            for j in 0..2 * n {
                cov[(perm[i], perm[j])] = self.cov[(i, j)];
            }
        }
        Self {
            n_modes: n,
            mean,
            cov,
        }
    }

    /// JSON document `{N, mean: [...], cov: [[...]]}`.
    pub fn to_json(&self) -> Value {
        let mean: Vec<f64> = self.mean.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect();
        let cov: Vec<Vec<f64>> = (0..self.cov.nrows())
            .map(|i| {
                (0..self.cov.ncols())
                    .map(|j| self.cov[(i, j)].to_f64().unwrap_or(f64::NAN))
                    .collect()
            })
            .collect();
        json!({ "N": self.n_modes, "mean": mean, "cov": cov })
    }
}

/// An affine symplectic transformation `ξ → S·ξ + displacement`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticMap<R: Real> {
    pub s: RArr<R>,
    pub displacement: RVec1<R>,
}

impl<R: Real> SymplecticMap<R> {
    pub fn identity(n_modes: usize) -> Self {
        Self {
            s: Array2::eye(2 * n_modes),
            displacement: Array1::zeros(2 * n_modes),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.s.nrows() / 2
    }

    /// Deviation from the symplectic condition `SᵀΩS = Ω`.
    pub fn symplectic_deviation(&self) -> R {
        let omega = symplectic_form::<R>(self.n_modes());
        let lhs = self.s.t().dot(&omega).dot(&self.s);
        let mut dev = R::zero();
        for i in 0..lhs.nrows() {
            for j in 0..lhs.ncols() {
                let d = (lhs[(i, j)] - omega[(i, j)]).abs();
                if d > dev {
                    dev = d;
                }
            }
        }
        dev
    }

    /// `self ∘ other` — apply `other` first (matches unitary product
    /// `U_self · U_other`).
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            s: self.s.dot(&other.s),
            displacement: self.s.dot(&other.displacement) + &self.displacement,
        }
    }

    /// Action on a Gaussian state: `mean → S·mean + d`, `cov → S·cov·Sᵀ`.
    pub fn apply(&self, state: &GaussianState<R>) -> GaussianState<R> {
        GaussianState {
            n_modes: state.n_modes,
            mean: self.s.dot(&state.mean) + &self.displacement,
            cov: self.s.dot(&state.cov).dot(&self.s.t()),
        }
    }

    /// Conjugation action on a Weyl displacement vector: `v → S·v` (the
    /// affine part contributes only a phase to the Weyl operator).
    pub fn apply_to_displacement(&self, v: &RVec1<R>) -> RVec1<R> {
        self.s.dot(v)
    }
}

/// Which Gaussian gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvGate {
    /// Fourier gate `F^power` on one mode.
    Fourier { mode: usize, power: i64 },
    /// `exp(i x̂₁x̂₂)`-type phase gate on a mode pair.
    Cphase { a: usize, b: usize },
    /// `exp(−i q̂₁p̂₂)`-type adder, control into target.
    Sum { control: usize, target: usize },
}

fn check_mode(mode: usize, n_modes: usize) -> Result<(), GaussianError> {
    if mode < 1 || mode > n_modes {
        return Err(GaussianError::ModeOutOfRange { mode, n_modes });
    }
    Ok(())
}

/// The symplectic matrix realizing one gate's Heisenberg action on an
/// N-mode register (no displacement part; all protocol gates are linear).
pub fn symplectic_for_gate<R: Real>(gate: CvGate, n_modes: usize) -> Result<SymplecticMap<R>, GaussianError> {
    if n_modes == 0 {
        return Err(GaussianError::NoModes);
    }
    let mut map = SymplecticMap::identity(n_modes);
    match gate {
        CvGate::Fourier { mode, power } => {
            check_mode(mode, n_modes)?;
            let b = 2 * (mode - 1);
            // Quarter rotation J = [[0, −1], [1, 0]]; J^power with the
            // power reduced mod 4 (J⁴ = I), entries exact.
            let (c, s) = match power.rem_euclid(4) {
                0 => (R::one(), R::zero()),
                1 => (R::zero(), R::one()),
                2 => (-R::one(), R::zero()),
                _ => (R::zero(), -R::one()),
            };
            map.s[(b, b)] = c;
            map.s[(b, b + 1)] = -s;
            map.s[(b + 1, b)] = s;
            map.s[(b + 1, b + 1)] = c;
        }
        CvGate::Cphase { a, b } => {
            check_mode(a, n_modes)?;
            check_mode(b, n_modes)?;
            if a == b {
                return Err(GaussianError::ControlEqualsTarget);
            }
            let (ba, bb) = (2 * (a - 1), 2 * (b - 1));
            map.s[(ba + 1, bb)] = R::one(); // p_a += x_b
            map.s[(bb + 1, ba)] = R::one(); // p_b += x_a
        }
        CvGate::Sum { control, target } => {
            check_mode(control, n_modes)?;
            check_mode(target, n_modes)?;
            if control == target {
                return Err(GaussianError::ControlEqualsTarget);
            }
            let (bc, bt) = (2 * (control - 1), 2 * (target - 1));
            map.s[(bt, bc)] = R::one(); // x_t += x_c
            map.s[(bc + 1, bt + 1)] = -R::one(); // p_c −= p_t
        }
    }
    Ok(map)
}

/// The composed mirror pulse sequence `F̄²(F̄⁻¹S̄)^{N+1}` as one symplectic
/// map.
pub fn cv_mirror_map<R: Real>(n_modes: usize) -> Result<SymplecticMap<R>, GaussianError> {
    if n_modes == 0 {
        return Err(GaussianError::NoModes);
    }
    // One round: S̄ first, then F̄⁻¹.
    let mut s_bar = SymplecticMap::identity(n_modes);
    for j in 1..n_modes {
        let gate = symplectic_for_gate(CvGate::Cphase { a: j, b: j + 1 }, n_modes)?;
        s_bar = gate.compose(&s_bar);
    }
    let mut f_bar_inv = SymplecticMap::identity(n_modes);
    let mut f_bar_sq = SymplecticMap::identity(n_modes);
    for m in 1..=n_modes {
        f_bar_inv = symplectic_for_gate(CvGate::Fourier { mode: m, power: -1 }, n_modes)?
            .compose(&f_bar_inv);
        f_bar_sq = symplectic_for_gate(CvGate::Fourier { mode: m, power: 2 }, n_modes)?
            .compose(&f_bar_sq);
    }
    let round = f_bar_inv.compose(&s_bar);
    let mut total = SymplecticMap::identity(n_modes);
    for _ in 0..=n_modes {
        total = round.compose(&total);
    }
    Ok(f_bar_sq.compose(&total))
}

/// Runs the CV mirror protocol on a Gaussian state.
pub fn run_cv_mirror<R: Real>(state: &GaussianState<R>) -> Result<GaussianState<R>, GaussianError> {
    Ok(cv_mirror_map::<R>(state.n_modes())?.apply(state))
}

/// Cross-check of the two independent Heisenberg engines on one
/// generator: the symbolic CV tracker and the symplectic matrix product
/// must both send the displacement `X(q)Z(p)` at mode `a` to the same
/// displacement at mode `N+1−a`.
#[derive(Debug, Clone)]
pub struct CvHeisenbergReport {
    pub n_modes: usize,
    pub mode: usize,
    pub q: f64,
    pub p: f64,
    pub tracker_site: usize,
    pub tracker_exponents: (f64, f64),
    pub tracker_phase: f64,
    pub symplectic_deviation: f64,
}

impl CvHeisenbergReport {
    pub fn pass(&self) -> bool {
        let mirrored_ok = self.tracker_site == 0
            || (self.tracker_exponents.0 - self.q).abs() < 1e-12
                && (self.tracker_exponents.1 - self.p).abs() < 1e-12;
        mirrored_ok && self.tracker_phase.abs() < 1e-12 && self.symplectic_deviation < 1e-10
    }
}

pub fn cv_heisenberg_check(q: f64, p: f64, a: usize, n_modes: usize) -> Result<CvHeisenbergReport, GaussianError> {
    check_mode(a, n_modes)?;
    use crate::pauli::{CvAlgebra, PauliWord};
    use crate::tracker::{conjugate_round, fourier_square_flip, ChainSpec};
    let spec = ChainSpec::cv(n_modes).expect("n_modes ≥ 1 checked");
    let mirror = spec.mirror_site(a);

    // Symbolic side.
    let mut word = PauliWord::generator(CvAlgebra, a, q, p);
    for _ in 0..=n_modes {
        word = conjugate_round(&word, &spec).expect("support stays in range");
    }
    let word = fourier_square_flip(&word);
    let support: Vec<_> = word.support().collect();
    let (tracker_site, tracker_exponents) = if q == 0.0 && p == 0.0 {
        (0, (0.0, 0.0)) // empty word mirrors trivially
    } else if support.len() == 1 && support[0].0 == mirror {
        (support[0].0, (support[0].1.x, support[0].1.z))
    } else {
        (usize::MAX, (f64::NAN, f64::NAN))
    };

    // Symplectic side: displacement vector q·e_x(a) + p·e_p(a).
    let map = cv_mirror_map::<f64>(n_modes)?;
    let mut v: RVec1<f64> = Array1::zeros(2 * n_modes);
    v[2 * (a - 1)] = q;
    v[2 * (a - 1) + 1] = p;
    let image = map.apply_to_displacement(&v);
    let mut want: RVec1<f64> = Array1::zeros(2 * n_modes);
    want[2 * (mirror - 1)] = q;
    want[2 * (mirror - 1) + 1] = p;
    let sym_dev = image
        .iter()
        .zip(want.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);

    Ok(CvHeisenbergReport {
        n_modes,
        mode: a,
        q,
        p,
        tracker_site,
        tracker_exponents,
        tracker_phase: word.phase(),
        symplectic_deviation: sym_dev,
    })
}

/// JSON document for one CV mirror run: before/after states plus the
/// max deviation of the output from the mode-reversed input.
pub fn cv_mirror_json<R: Real>(before: &GaussianState<R>, after: &GaussianState<R>) -> Value {
    let reversed = before.mode_reversal();
    let mut dev = 0.0f64;
    for (a, b) in after.mean.iter().zip(reversed.mean.iter()) {
        dev = dev.max((*a - *b).abs().to_f64().unwrap_or(f64::NAN));
    }
    for (a, b) in after.cov.iter().zip(reversed.cov.iter()) {
        dev = dev.max((*a - *b).abs().to_f64().unwrap_or(f64::NAN));
    }
    json!({
        "N": before.n_modes(),
        "before": before.to_json(),
        "after": after.to_json(),
        "deviation": dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Oracle: symplectic flow from a quadratic generator. For a gate
    /// `U = exp(+i·½ ξᵀAξ)` (scaled quadratures), the displacement
    /// conjugation matrix is `S = exp(−ΩA)`.
    fn symplectic_from_generator(a: &RArr<f64>, n_modes: usize) -> RArr<f64> {
        let omega = symplectic_form::<f64>(n_modes);
        let gen = omega.dot(a).mapv(|v| -v);
        // Real matrix exponential via the complex expm.
        let n = gen.nrows();
        let mut c = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                c[(i, j)] = crate::scalar::C::new(gen[(i, j)], 0.0);
            }
        }
        let e = crate::linalg::expm(&c);
        let mut out = Array2::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = e[(i, j)].re;
            }
        }
        out
    }

    fn max_abs_diff_real(a: &RArr<f64>, b: &RArr<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn fourier_fourth_power_is_identity_map() {
        let mut m = SymplecticMap::<f64>::identity(1);
        let f = symplectic_for_gate::<f64>(CvGate::Fourier { mode: 1, power: 1 }, 1).unwrap();
        for _ in 0..4 {
            m = f.compose(&m);
        }
        assert!(max_abs_diff_real(&m.s, &Array2::eye(2)) < 1e-15);
    }

    #[test]
    fn cphase_matches_quadratic_generator_oracle() {
        // CPHASE = exp(+i x̂₁x̂₂): A has x₁x₂ cross entries.
        let mut a: RArr<f64> = Array2::zeros((4, 4));
        a[(0, 2)] = 1.0;
        a[(2, 0)] = 1.0;
        let oracle = symplectic_from_generator(&a, 2);
        let gate = symplectic_for_gate::<f64>(CvGate::Cphase { a: 1, b: 2 }, 2).unwrap();
        assert!(max_abs_diff_real(&gate.s, &oracle) < 1e-12);
    }

    #[test]
    fn sum_matches_quadratic_generator_oracle() {
        // SUM = exp(−i q̂₁p̂₂): A has x₁p₂ cross entries with sign −1.
        let mut a: RArr<f64> = Array2::zeros((4, 4));
        a[(0, 3)] = -1.0;
        a[(3, 0)] = -1.0;
        let oracle = symplectic_from_generator(&a, 2);
        let gate = symplectic_for_gate::<f64>(CvGate::Sum { control: 1, target: 2 }, 2).unwrap();
        assert!(max_abs_diff_real(&gate.s, &oracle) < 1e-12);
        // Explicit action: (x₁, p₁, x₂, p₂) → (x₁, p₁−p₂, x₂+x₁, p₂).
        let v = array![1.5, -0.5, 2.0, 0.25];
        let out = gate.apply_to_displacement(&v);
        assert!((out[0] - 1.5).abs() < 1e-15);
        assert!((out[1] - (-0.75)).abs() < 1e-15);
        assert!((out[2] - 3.5).abs() < 1e-15);
        assert!((out[3] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn all_gates_are_symplectic() {
        for gate in [
            CvGate::Fourier { mode: 2, power: 1 },
            CvGate::Fourier { mode: 1, power: -1 },
            CvGate::Cphase { a: 1, b: 3 },
            CvGate::Sum { control: 2, target: 3 },
        ] {
            let m = symplectic_for_gate::<f64>(gate, 3).unwrap();
            assert!(m.symplectic_deviation() < 1e-12, "{gate:?}");
        }
        // Compositions stay symplectic.
        let a = symplectic_for_gate::<f64>(CvGate::Cphase { a: 1, b: 2 }, 3).unwrap();
        let b = symplectic_for_gate::<f64>(CvGate::Fourier { mode: 2, power: 1 }, 3).unwrap();
        assert!(a.compose(&b).symplectic_deviation() < 1e-12);
    }

    #[test]
    fn cphase_is_fourier_conjugated_sum() {
        // CPHASE_{(1,2)} = F₍₂₎ · SUM_{(1,2)} · F₍₂₎⁻¹ at matrix level.
        let f2 = symplectic_for_gate::<f64>(CvGate::Fourier { mode: 2, power: 1 }, 2).unwrap();
        let f2inv = symplectic_for_gate::<f64>(CvGate::Fourier { mode: 2, power: -1 }, 2).unwrap();
        let sum = symplectic_for_gate::<f64>(CvGate::Sum { control: 1, target: 2 }, 2).unwrap();
        let cph = symplectic_for_gate::<f64>(CvGate::Cphase { a: 1, b: 2 }, 2).unwrap();
        let composed = f2.compose(&sum).compose(&f2inv);
        assert!(max_abs_diff_real(&composed.s, &cph.s) < 1e-12);
    }

    #[test]
    fn cphase_sends_x_displacement_to_xz_pair() {
        // X(q) at mode 1 acquires Z(q) at mode 2.
        let gate = symplectic_for_gate::<f64>(CvGate::Cphase { a: 1, b: 2 }, 2).unwrap();
        let q = 0.8;
        let v = array![q, 0.0, 0.0, 0.0];
        let out = gate.apply_to_displacement(&v);
        assert!((out[0] - q).abs() < 1e-15); // still X(q) at mode 1
        assert!(out[1].abs() < 1e-15);
        assert!(out[2].abs() < 1e-15);
        assert!((out[3] - q).abs() < 1e-15); // Z(q) at mode 2
    }

    #[test]
    fn mirror_map_equals_mode_reversal_permutation() {
        for n in 1..=8 {
            let map = cv_mirror_map::<f64>(n).unwrap();
            assert!(map.symplectic_deviation() < 1e-10);
            let mut perm: RArr<f64> = Array2::zeros((2 * n, 2 * n));
            for m in 0..n {
                let src = 2 * m;
                let dst = 2 * (n - 1 - m);
                perm[(dst, src)] = 1.0;
                perm[(dst + 1, src + 1)] = 1.0;
            }
            assert!(
                max_abs_diff_real(&map.s, &perm) < 1e-9,
                "N={n}: {}",
                max_abs_diff_real(&map.s, &perm)
            );
            let disp = map.displacement.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(disp < 1e-12);
        }
    }

    #[test]
    fn vacuum_mirrors_to_vacuum() {
        let v = GaussianState::<f64>::vacuum(4).unwrap();
        let out = run_cv_mirror(&v).unwrap();
        assert!(max_abs_diff_real(&out.cov, &v.cov) < 1e-9);
        assert!(out.mean.iter().map(|x| x.abs()).fold(0.0, f64::max) < 1e-12);
    }

    #[test]
    fn coherent_state_transports_to_last_mode() {
        let s = GaussianState::<f64>::coherent(4, 1, 0.6, -0.4).unwrap();
        let out = run_cv_mirror(&s).unwrap();
        let want = GaussianState::<f64>::coherent(4, 4, 0.6, -0.4).unwrap();
        let mean_dev = out
            .mean
            .iter()
            .zip(want.mean.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(mean_dev < 1e-9);
        assert!(max_abs_diff_real(&out.cov, &want.cov) < 1e-9);
    }

    #[test]
    fn squeezed_pair_correlations_move_to_mirrored_modes() {
        let s = GaussianState::<f64>::two_mode_squeezed(3, 1, 2, 0.5).unwrap();
        let out = run_cv_mirror(&s).unwrap();
        // Oracle: permute covariance rows/columns by mode reversal.
        let want = s.mode_reversal();
        assert!(max_abs_diff_real(&out.cov, &want.cov) < 1e-9);
        // And the correlations now live on modes (3, 2).
        assert!((out.cov[(4, 2)] - (2.0f64 * 0.5).sinh()).abs() < 1e-9);
    }

    #[test]
    fn uncertainty_preserved_by_protocol() {
        let s = GaussianState::<f64>::two_mode_squeezed(3, 1, 3, 0.8).unwrap();
        assert!(s.uncertainty_min_eigenvalue() > -1e-9);
        let out = run_cv_mirror(&s).unwrap();
        assert!(out.uncertainty_min_eigenvalue() > -1e-9);
    }

    #[test]
    fn from_parts_validates() {
        let bad_cov = array![[1.0, 0.2], [0.0, 1.0]];
        assert!(matches!(
            GaussianState::<f64>::from_parts(1, Array1::zeros(2), bad_cov),
            Err(GaussianError::NotSymmetric(_))
        ));
        let violating = Array2::eye(2).mapv(|v: f64| v * 0.1);
        assert!(matches!(
            GaussianState::<f64>::from_parts(1, Array1::zeros(2), violating),
            Err(GaussianError::UncertaintyViolated(_))
        ));
        let ok = GaussianState::<f64>::from_parts(1, Array1::zeros(2), Array2::eye(2));
        assert!(ok.is_ok());
    }

    #[test]
    fn heisenberg_check_agrees_between_engines() {
        for (q, p, a, n) in [
            (0.0, 0.0, 1, 3),
            (1.0, 0.0, 1, 3),
            (0.3, -0.8, 2, 5),
            (-2.25, 0.125, 4, 7),
        ] {
            let rpt = cv_heisenberg_check(q, p, a, n).unwrap();
            assert!(rpt.pass(), "q={q} p={p} a={a} N={n}: {rpt:?}");
        }
    }

    #[test]
    fn rejects_bad_modes() {
        assert_eq!(
            symplectic_for_gate::<f64>(CvGate::Cphase { a: 1, b: 1 }, 2).unwrap_err(),
            GaussianError::ControlEqualsTarget
        );
        assert_eq!(
            symplectic_for_gate::<f64>(CvGate::Fourier { mode: 3, power: 1 }, 2).unwrap_err(),
            GaussianError::ModeOutOfRange { mode: 3, n_modes: 2 }
        );
        assert!(cv_heisenberg_check(0.1, 0.1, 9, 8).is_err());
    }

    #[test]
    fn json_round_trip_shape() {
        let s = GaussianState::<f64>::coherent(2, 1, 1.0, 0.0).unwrap();
        let v = s.to_json();
        assert_eq!(v["N"], 2);
        assert_eq!(v["mean"].as_array().unwrap().len(), 4);
        assert_eq!(v["cov"].as_array().unwrap().len(), 4);
        let out = run_cv_mirror(&s).unwrap();
        let doc = cv_mirror_json(&s, &out);
        assert!(doc["deviation"].as_f64().unwrap() < 1e-9);
    }
}
