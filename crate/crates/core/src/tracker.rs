//! Symbolic Heisenberg-picture tracking of Pauli words through the
//! global-pulse mirror protocol.
//!
//! One protocol round applies the same two global pulses to every site of
//! an open N-site chain: `U = F̄⁻¹S̄`, where `S̄ = Π_{j=1}^{N−1} S_{(j,j+1)}`
//! is the product of CPHASE gates on all neighbor pairs and `F̄` is the
//! Fourier gate on every site. Conjugation `w → U w U⁻¹` acts locally:
//!
//! ```text
//! X^l at site a  →  X^l_{a−1} · Z^{−l}_a · X^l_{a+1}
//! Z^l at site a  →  X^l_a
//! ```
//!
//! with absent-neighbor factors simply omitted at the chain ends (`S̄`
//! contains no gate past the boundary). Multi-factor words conjugate
//! factorwise; all reorder phases are composed exactly by the word algebra.
//!
//! After `N+1` rounds a single-site generator arrives at the mirrored site
//! with a flipped exponent, `X^l_a → X^{−l}_{N+1−a}` (same for Z), and a
//! final global `F̄^{±2}` — whose conjugation rule flips every exponent
//! sign — restores it: the full pulse sequence reverses the chain exactly,
//! with no residual phase.
//!
//! The same code path serves qudit and continuous-variable exponents; the
//! cyclic relations `X^d = Z^d = I` are never used, only the mod-d
//! reduction inside the qudit exponent arithmetic.

use crate::pauli::{ExponentAlgebra, PauliWord};
use serde_json::{json, Value};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrackerError {
    #[error("word touches site {site}, outside chain 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("chain must have at least one site")]
    EmptyChain,
    #[error("qudit dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
}

/// Which exponent regime a chain runs in (carried for validation and
/// serialization; the algebra itself lives on the words).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChainMode {
    Qudit { d: usize },
    Cv,
}

/// An open chain of `n_sites` sites, indexed `1..=n_sites`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainSpec {
    pub n_sites: usize,
    pub mode: ChainMode,
}

impl ChainSpec {
    pub fn qudit(n_sites: usize, d: usize) -> Result<Self, TrackerError> {
        if n_sites < 1 {
            return Err(TrackerError::EmptyChain);
        }
        if d < 2 {
            return Err(TrackerError::DimensionTooSmall(d));
        }
        Ok(Self {
            n_sites,
            mode: ChainMode::Qudit { d },
        })
    }

    pub fn cv(n_sites: usize) -> Result<Self, TrackerError> {
        if n_sites < 1 {
            return Err(TrackerError::EmptyChain);
        }
        Ok(Self {
            n_sites,
            mode: ChainMode::Cv,
        })
    }

    /// Mirrored site index `N+1−a`.
    #[inline]
    pub fn mirror_site(&self, a: usize) -> usize {
        self.n_sites + 1 - a
    }
}

fn check_support<A: ExponentAlgebra>(
    w: &PauliWord<A>,
    spec: &ChainSpec,
) -> Result<(), TrackerError> {
    for (site, _) in w.support() {
        if site < 1 || site > spec.n_sites {
            return Err(TrackerError::SiteOutOfRange {
                site,
                n_sites: spec.n_sites,
            });
        }
    }
    Ok(())
}

/// Image of the generator `X^x_a Z^z_a` under one round `w → U w U⁻¹`.
///
/// `U X^x_a U⁻¹ = X^x_{a−1} Z^{−x}_a X^x_{a+1}` and `U Z^z_a U⁻¹ = X^z_a`;
/// the site-a factor product `Z^{−x}·X^z` is normal-ordered by the word
/// multiplication, which supplies the reorder phase.
fn conjugate_factor<A: ExponentAlgebra>(
    alg: &A,
    spec: &ChainSpec,
    site: usize,
    x: A::Exp,
    z: A::Exp,
) -> PauliWord<A> {
    let mut x_image = PauliWord::identity(alg.clone());
    if !alg.exp_is_zero(x) {
        if site > 1 {
            x_image.set_factor(site - 1, x, alg.zero_exp());
        }
        x_image.set_factor(site, alg.zero_exp(), alg.neg_exp(x));
        if site < spec.n_sites {
            x_image.set_factor(site + 1, x, alg.zero_exp());
        }
    }
    let z_image = PauliWord::generator(alg.clone(), site, z, alg.zero_exp());
    x_image.mul(&z_image)
}

/// One round of conjugation: returns `w′` with `U·w = w′·U` for
/// `U = F̄⁻¹S̄` on the chain described by `spec`.
pub fn conjugate_round<A: ExponentAlgebra>(
    w: &PauliWord<A>,
    spec: &ChainSpec,
) -> Result<PauliWord<A>, TrackerError> {
    check_support(w, spec)?;
    let alg = w.algebra().clone();
    let mut out = PauliWord::identity(alg.clone());
    out.add_phase(w.phase());
    for (site, f) in w.support() {
        let image = conjugate_factor(&alg, spec, site, f.x, f.z);
        out = out.mul(&image);
    }
    Ok(out)
}

/// Conjugation by the global `F̄^{±2}` pulse: every exponent flips sign
/// (`F² X^l F̄⁻² = X^{−l}`, `F² Z^l F̄⁻² = Z^{−l}`), no phase.
pub fn fourier_square_flip<A: ExponentAlgebra>(w: &PauliWord<A>) -> PauliWord<A> {
    let alg = w.algebra().clone();
    let mut out = PauliWord::identity(alg.clone());
    out.add_phase(w.phase());
    for (site, f) in w.support() {
        out.set_factor(site, alg.neg_exp(f.x), alg.neg_exp(f.z));
    }
    out
}

/// The word trajectory under repeated rounds: `steps[k]` is the image of
/// the initial word after `k` conjugations, `k = 0..=rounds`.
#[derive(Debug, Clone)]
pub struct Trajectory<A: ExponentAlgebra> {
    pub spec: ChainSpec,
    pub steps: Vec<PauliWord<A>>,
}

pub fn mirror_trajectory<A: ExponentAlgebra>(
    w: &PauliWord<A>,
    spec: &ChainSpec,
    rounds: usize,
) -> Result<Trajectory<A>, TrackerError> {
    check_support(w, spec)?;
    let mut steps = Vec::with_capacity(rounds + 1);
    steps.push(w.clone());
    for _ in 0..rounds {
        let next = conjugate_round(steps.last().unwrap(), spec)?;
        steps.push(next);
    }
    Ok(Trajectory { spec: *spec, steps })
}

/// Outcome of checking the mirror relations on every single-site generator.
#[derive(Debug, Clone)]
pub struct MirrorRelationReport {
    pub spec: ChainSpec,
    pub sign: i32,
    pub checked: usize,
    pub violations: Vec<String>,
}

impl MirrorRelationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Expected mirror image of a single-site generator under
/// `F̄^{sign}(F̄⁻¹S̄)^{N+1}`: the same exponents at site `N+1−a` with no
/// phase. Used by `verify_mirror_relation` in both exponent regimes.
fn check_generator_mirror<A: ExponentAlgebra>(
    alg: &A,
    spec: &ChainSpec,
    site: usize,
    x: A::Exp,
    z: A::Exp,
    phase_ok: impl Fn(A::Phase) -> bool,
    label: &str,
    violations: &mut Vec<String>,
) -> Result<(), TrackerError> {
    let w = PauliWord::generator(alg.clone(), site, x, z);
    let mut cur = w;
    for _ in 0..=spec.n_sites {
        cur = conjugate_round(&cur, spec)?;
    }
    let fin = fourier_square_flip(&cur);
    let expect = PauliWord::generator(alg.clone(), spec.mirror_site(site), x, z);
    let same_factors = fin.support().count() == expect.support().count()
        && fin
            .support()
            .zip(expect.support())
            .all(|((s1, f1), (s2, f2))| s1 == s2 && f1 == f2);
    if !same_factors || !phase_ok(fin.phase()) {
        violations.push(format!(
            "site {site} {label}: got {:?} (phase {:?})",
            fin.support().collect::<Vec<_>>(),
            fin.phase()
        ));
    }
    Ok(())
}

/// Checks `F̄^{sign}(F̄⁻¹S̄)^{N+1}`: `X^l_a → X^l_{N+1−a}` and
/// `Z^l_a → Z^l_{N+1−a}` for every site and every generator exponent
/// (`l = 1..d−1` in qudit mode, a fixed sample of real `q`/`p` in CV mode).
///
/// `sign` must be `+2` or `−2`; since `F̄⁴ = I`, both give the same
/// conjugation and the parameter records which pulse the experiment ends
/// with.
pub fn verify_mirror_relation(spec: &ChainSpec, sign: i32) -> Result<MirrorRelationReport, TrackerError> {
    assert!(sign == 2 || sign == -2, "final pulse must be F̄^{{±2}}");
    let mut violations = Vec::new();
    let mut checked = 0usize;
    match spec.mode {
        ChainMode::Qudit { d } => {
            let dim = crate::qudit::QuditDim::new(d).map_err(|_| TrackerError::DimensionTooSmall(d))?;
            let alg = crate::pauli::QuditAlgebra::new(dim);
            for a in 1..=spec.n_sites {
                for l in 1..d as i64 {
                    check_generator_mirror(&alg, spec, a, l, 0, |p| p == 0, &format!("X^{l}"), &mut violations)?;
                    check_generator_mirror(&alg, spec, a, 0, l, |p| p == 0, &format!("Z^{l}"), &mut violations)?;
                    checked += 2;
                }
            }
        }
        ChainMode::Cv => {
            let alg = crate::pauli::CvAlgebra;
            // Fixed sample of real displacement/boost amounts.
            let samples = [0.7, -1.3, 1.0, 0.5, -0.35, 2.2];
            for a in 1..=spec.n_sites {
                for &v in &samples {
                    check_generator_mirror(
                        &alg, spec, a, v, 0.0,
                        |p| p.abs() < 1e-12,
                        &format!("X({v})"),
                        &mut violations,
                    )?;
                    check_generator_mirror(
                        &alg, spec, a, 0.0, v,
                        |p| p.abs() < 1e-12,
                        &format!("Z({v})"),
                        &mut violations,
                    )?;
                    checked += 2;
                }
            }
        }
    }
    Ok(MirrorRelationReport {
        spec: *spec,
        sign,
        checked,
        violations,
    })
}

/// Serializes a qudit trajectory to the document
/// `{mode, d, N, rounds, steps: [{k, factors: [{site, x_exp, z_exp}], phase}]}`
/// with exact integer exponents and phases (powers of ζ_d).
pub fn qudit_trajectory_json(t: &Trajectory<crate::pauli::QuditAlgebra>) -> Value {
    let d = match t.spec.mode {
        ChainMode::Qudit { d } => d,
        ChainMode::Cv => unreachable!("qudit trajectory with CV spec"),
    };
    let steps: Vec<Value> = t
        .steps
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let factors: Vec<Value> = w
                .support()
                .map(|(site, f)| json!({ "site": site, "x_exp": f.x, "z_exp": f.z }))
                .collect();
            json!({ "k": k, "factors": factors, "phase": w.phase() })
        })
        .collect();
    json!({
        "mode": "qudit",
        "d": d,
        "N": t.spec.n_sites,
        "rounds": t.steps.len() - 1,
        "steps": steps,
    })
}

/// CV counterpart: exponents and the phase are real numbers.
pub fn cv_trajectory_json(t: &Trajectory<crate::pauli::CvAlgebra>) -> Value {
    let steps: Vec<Value> = t
        .steps
        .iter()
        .enumerate()
        .map(|(k, w)| {
            let factors: Vec<Value> = w
                .support()
                .map(|(site, f)| json!({ "site": site, "x_exp": f.x, "z_exp": f.z }))
                .collect();
            json!({ "k": k, "factors": factors, "phase": w.phase() })
        })
        .collect();
    json!({
        "mode": "cv",
        "N": t.spec.n_sites,
        "rounds": t.steps.len() - 1,
        "steps": steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{dagger, max_abs_diff, CArr};
    use crate::pauli::{CvAlgebra, PauliWord, QuditAlgebra};
    use crate::qudit::{embed_single, fourier_gate, two_qudit_gate, QuditDim, TwoQuditKind};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn qalg(d: usize) -> QuditAlgebra {
        QuditAlgebra::new(QuditDim::new(d).unwrap())
    }

    /// Dense one-round unitary U = F̄⁻¹ S̄ on the full dᴺ space.
    fn dense_round_unitary(d: usize, n: usize) -> CArr<f64> {
        let dim = QuditDim::new(d).unwrap();
        let total = d.pow(n as u32);
        let mut s_bar = crate::linalg::identity::<f64>(total);
        for j in 1..n {
            let s = two_qudit_gate::<f64>(dim, TwoQuditKind::Cphase, j, j + 1, n).unwrap();
            s_bar = s.dot(&s_bar);
        }
        let mut f_bar_inv = crate::linalg::identity::<f64>(total);
        for site in 1..=n {
            let f = embed_single(&fourier_gate::<f64>(dim, -1), site, d, n);
            f_bar_inv = f.dot(&f_bar_inv);
        }
        f_bar_inv.dot(&s_bar)
    }

    #[test]
    fn z_generator_maps_to_x() {
        let spec = ChainSpec::qudit(4, 3).unwrap();
        let alg = qalg(3);
        let w = PauliWord::generator(alg, 2, 0, 2);
        let out = conjugate_round(&w, &spec).unwrap();
        assert_eq!(out.phase(), 0);
        let sup: Vec<_> = out.support().collect();
        assert_eq!(sup.len(), 1);
        assert_eq!(sup[0].0, 2);
        assert_eq!(sup[0].1.x, 2);
        assert_eq!(sup[0].1.z, 0);
    }

    #[test]
    fn empty_word_is_fixed() {
        let spec = ChainSpec::qudit(3, 5).unwrap();
        let w = PauliWord::identity(qalg(5));
        let out = conjugate_round(&w, &spec).unwrap();
        assert!(out.is_identity_up_to_phase());
        assert_eq!(out.phase(), 0);
    }

    #[test]
    fn x_generator_spreads_to_neighbors() {
        let spec = ChainSpec::qudit(4, 3).unwrap();
        let w = PauliWord::generator(qalg(3), 2, 1, 0);
        let out = conjugate_round(&w, &spec).unwrap();
        let sup: Vec<_> = out.support().collect();
        assert_eq!(sup.len(), 3);
        assert_eq!((sup[0].0, sup[0].1.x, sup[0].1.z), (1, 1, 0));
        assert_eq!((sup[1].0, sup[1].1.x, sup[1].1.z), (2, 0, 2)); // Z^{−1} = Z² at d=3
        assert_eq!((sup[2].0, sup[2].1.x, sup[2].1.z), (3, 1, 0));
    }

    #[test]
    fn boundary_drops_absent_neighbor() {
        let spec = ChainSpec::qudit(4, 3).unwrap();
        let left = conjugate_round(&PauliWord::generator(qalg(3), 1, 1, 0), &spec).unwrap();
        assert_eq!(left.support().count(), 2);
        assert!(left.support().all(|(s, _)| s <= 2));
        let right = conjugate_round(&PauliWord::generator(qalg(3), 4, 1, 0), &spec).unwrap();
        assert_eq!(right.support().count(), 2);
        assert!(right.support().all(|(s, _)| s >= 3));
    }

    #[test]
    fn rejects_out_of_range_site() {
        let spec = ChainSpec::qudit(3, 3).unwrap();
        let w = PauliWord::generator(qalg(3), 4, 1, 0);
        assert_eq!(
            conjugate_round(&w, &spec).unwrap_err(),
            TrackerError::SiteOutOfRange { site: 4, n_sites: 3 }
        );
    }

    #[test]
    fn round_matches_dense_conjugation_oracle() {
        // U·W = W′·U as dense matrices for random words, several (d, N).
        let mut rng = StdRng::seed_from_u64(23);
        for (d, n) in [(2usize, 4usize), (3, 4), (5, 3)] {
            let spec = ChainSpec::qudit(n, d).unwrap();
            let alg = qalg(d);
            let u = dense_round_unitary(d, n);
            for _ in 0..12 {
                let mut w = PauliWord::identity(alg.clone());
                for site in 1..=n {
                    w.set_factor(site, rng.gen_range(0..d as i64), rng.gen_range(0..d as i64));
                }
                w.add_phase(rng.gen_range(0..d as i64));
                let w2 = conjugate_round(&w, &spec).unwrap();
                let lhs = u.dot(&w.to_dense::<f64>(n));
                let rhs = w2.to_dense::<f64>(n).dot(&u);
                assert!(max_abs_diff(&lhs, &rhs) < 1e-12, "d={d} N={n}");
            }
        }
    }

    #[test]
    fn x_at_site_2_matches_dense_oracle_explicitly() {
        // Direct conjugation (F̄⁻¹S̄) X₂ (F̄⁻¹S̄)⁻¹ on the 3⁴-dim space.
        let (d, n) = (3usize, 4usize);
        let spec = ChainSpec::qudit(n, d).unwrap();
        let u = dense_round_unitary(d, n);
        let w = PauliWord::generator(qalg(d), 2, 1, 0);
        let conj = u.dot(&w.to_dense::<f64>(n)).dot(&dagger(&u));
        let w2 = conjugate_round(&w, &spec).unwrap();
        assert!(max_abs_diff(&conj, &w2.to_dense::<f64>(n)) < 1e-12);
    }

    #[test]
    fn trajectory_steps_match_dense_oracle_every_round() {
        let (d, n) = (3usize, 3usize);
        let spec = ChainSpec::qudit(n, d).unwrap();
        let u = dense_round_unitary(d, n);
        let w = PauliWord::generator(qalg(d), 1, 1, 0);
        let t = mirror_trajectory(&w, &spec, n + 1).unwrap();
        assert_eq!(t.steps.len(), n + 2);
        let mut dense = w.to_dense::<f64>(n);
        for step in &t.steps[1..] {
            dense = u.dot(&dense).dot(&dagger(&u));
            assert!(max_abs_diff(&dense, &step.to_dense::<f64>(n)) < 1e-12);
        }
    }

    #[test]
    fn n_plus_one_rounds_lands_mirrored_with_flipped_exponent() {
        for (d, n) in [(2usize, 3usize), (3, 4), (5, 2)] {
            let spec = ChainSpec::qudit(n, d).unwrap();
            let alg = qalg(d);
            for a in 1..=n {
                for l in 1..d as i64 {
                    let t = mirror_trajectory(&PauliWord::generator(alg.clone(), a, l, 0), &spec, n + 1)
                        .unwrap();
                    let fin = t.steps.last().unwrap();
                    let sup: Vec<_> = fin.support().collect();
                    assert_eq!(fin.phase(), 0);
                    assert_eq!(sup.len(), 1);
                    assert_eq!(sup[0].0, n + 1 - a);
                    assert_eq!(sup[0].1.x, spec_dim_reduce(d, -l));
                    assert_eq!(sup[0].1.z, 0);
                }
            }
        }
    }

    fn spec_dim_reduce(d: usize, e: i64) -> i64 {
        e.rem_euclid(d as i64)
    }

    #[test]
    fn verify_mirror_relation_passes_qudit() {
        for (d, n) in [(2usize, 1usize), (2, 5), (3, 4), (5, 3), (7, 2)] {
            let spec = ChainSpec::qudit(n, d).unwrap();
            for sign in [2, -2] {
                let rpt = verify_mirror_relation(&spec, sign).unwrap();
                assert!(rpt.pass(), "d={d} N={n}: {:?}", rpt.violations);
                assert_eq!(rpt.checked, 2 * n * (d - 1));
            }
        }
    }

    #[test]
    fn verify_mirror_relation_passes_cv() {
        for n in 1..=8 {
            let spec = ChainSpec::cv(n).unwrap();
            let rpt = verify_mirror_relation(&spec, 2).unwrap();
            assert!(rpt.pass(), "N={n}: {:?}", rpt.violations);
        }
    }

    #[test]
    fn cv_and_qudit_share_the_rule_path() {
        // The same initial pattern evolves with identical support shape in
        // both regimes (exponent arithmetic aside) — one round of X at an
        // interior site.
        let qspec = ChainSpec::qudit(5, 3).unwrap();
        let cspec = ChainSpec::cv(5).unwrap();
        let qw = conjugate_round(&PauliWord::generator(qalg(3), 3, 1, 0), &qspec).unwrap();
        let cw = conjugate_round(&PauliWord::generator(CvAlgebra, 3, 1.0, 0.0), &cspec).unwrap();
        let qs: Vec<usize> = qw.support().map(|(s, _)| s).collect();
        let cs: Vec<usize> = cw.support().map(|(s, _)| s).collect();
        assert_eq!(qs, cs);
    }

    #[test]
    fn trajectory_serializes_with_exact_phases() {
        let spec = ChainSpec::qudit(3, 3).unwrap();
        let t = mirror_trajectory(&PauliWord::generator(qalg(3), 1, 1, 0), &spec, 4).unwrap();
        let v = qudit_trajectory_json(&t);
        assert_eq!(v["mode"], "qudit");
        assert_eq!(v["d"], 3);
        assert_eq!(v["N"], 3);
        assert_eq!(v["rounds"], 4);
        assert_eq!(v["steps"].as_array().unwrap().len(), 5);
        assert_eq!(v["steps"][0]["factors"][0]["site"], 1);
        // Phases serialize as integers (powers of ζ_d), not floats.
        assert!(v["steps"][4]["phase"].is_i64());
    }
}
