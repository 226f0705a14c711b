//! Gauge fields of the adiabatic approximation, electronic friction kernels
//! and friction-dressed nuclear propagators, evaluated on small exactly
//! solvable electron-nuclear models.
//!
//! Everything is expressed in Hartree atomic units with ħ = 1: energies in
//! Hartree, lengths in bohr, masses in electron masses, times in ħ/Hartree.
//!
//! The crate is organized around five computational layers:
//!
//! * [`models`] — parametric electronic Hamiltonians H_el(x) with analytic
//!   gradients ∂_k H_el and a finite-difference oracle.
//! * [`geometry`] — smoothly gauged eigenframes on nuclear grids, the Berry
//!   connection A_j = i⟨u|∂_j u⟩, the quantum geometric tensor
//!   q_ij = ⟨∂_i u|Q|∂_j u⟩ (metric g = Re q, curvature B = −2 Im q), the
//!   scalar potential φ and discrete Wilson-loop phases.
//! * [`kernels`] — the memory kernel Γ_kj(τ), the frequency-dependent kernel
//!   γ̄_kj(ω), the Markov friction tensor in two equivalent forms, its T→0
//!   density-operator form, and the independent-electron (single-particle)
//!   kernel, all by exact spectral sums.
//! * [`exact`] — split-operator propagation of the full wavefunction on a
//!   1-D nuclear grid, its factorization into ψ(x)·u(x), the force
//!   decomposition and its sum rules, and local-in-time error estimates.
//! * [`friction`] — nonlinear propagation of the nuclear wavefunction alone
//!   with the friction vector potential δA_k = Re(γ_kj X^j)/ħ or its scalar
//!   (phase-potential) limit.
//!
//! [`series`], [`manifest`] and [`run`] provide the deterministic text
//! formats, configuration schema and command dispatch used by the CLI.

pub mod error;
pub mod exact;
pub mod friction;
pub mod geometry;
pub mod grid;
pub mod kernels;
pub mod linalg;
pub mod manifest;
pub mod models;
pub mod run;
pub mod series;

pub use error::CoreError;

/// Complex double, the scalar type of every wavefunction and kernel here.
pub type C64 = num_complex::Complex64;
