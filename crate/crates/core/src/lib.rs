//! # mirrorchain-core
//!
//! Simulation and verification library for a *global-pulse perfect-mirror*
//! transport protocol on chains of d-level (qudit) and continuous-variable
//! (CV) systems, together with its superconducting-circuit realization.
//!
//! The protocol alternates two translation-invariant pulses on an N-site
//! chain — a Fourier gate applied to every site (`F̄`) and a controlled-phase
//! gate applied to every nearest-neighbor pair (`S̄`) — and after N+1 rounds
//! plus a final global `F̂^{±2}` the chain state is exactly spatially
//! mirrored about its midpoint, for *any* input state. This crate provides:
//!
//! - [`qudit`] — generalized Pauli operators, the Fourier gate, and the
//!   two-qudit CPHASE/SUM/SWAP gates, as dense matrices;
//! - [`pauli`] — symbolic Pauli words with exact exponent/phase bookkeeping,
//!   generic over qudit (integers mod d) and CV (real) exponents;
//! - [`tracker`] — the Heisenberg-picture engine conjugating Pauli words
//!   through protocol rounds, proving the mirror relations symbolically;
//! - [`chain`] — a dense state-vector simulator executing the protocol and
//!   certifying perfect mirror fidelity;
//! - [`gaussian`] — the CV realization via symplectic (Gaussian) maps;
//! - [`cqed`] — open-system models of the two-resonator/charge-qubit block:
//!   full and adiabatically-reduced Lindblad dynamics, their comparison, and
//!   the decoupling canonical transform;
//! - [`grape`] — piecewise-constant optimal-control synthesis of the
//!   squared-quadrature phase gate with exact gradients;
//! - [`verify`] — the deterministic cross-module invariant suite backing the
//!   command-line `verify-all`.
//!
//! ## Scalar genericity
//!
//! All numerics are generic over the [`scalar::Real`] scalar (`f32` or
//! `f64`) via `num-traits`; exact integer arithmetic is used where the
//! mathematics is exact (Pauli exponents and phases). The aliases below fix
//! the default `f64` precision used by the shipped tools and tolerances.

pub mod chain;
pub mod cqed;
pub mod gaussian;
pub mod grape;
pub mod jsonfmt;
pub mod linalg;
pub mod pauli;
pub mod qudit;
pub mod scalar;
pub mod sparse;
pub mod tracker;
pub mod verify;

pub use scalar::Real;

/// Default real scalar for shipped binaries and tolerances.
pub type S = f64;
/// Default complex scalar.
pub type Cplx = num_complex::Complex<S>;
/// Dense complex matrix at default precision.
pub type CMat = ndarray::Array2<Cplx>;
/// Dense complex vector at default precision.
pub type CVec = ndarray::Array1<Cplx>;
/// Dense real matrix at default precision.
pub type RMat = ndarray::Array2<S>;
/// Dense real vector at default precision.
pub type RVec = ndarray::Array1<S>;
