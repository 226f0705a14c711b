//! Electronic friction kernels by exact spectral sums.
//!
//! Every kernel is evaluated from one eigendecomposition of H_el(x) through
//! the derivative couplings c_km = ⟨u_m|∂_k H|u_0⟩/(E_0−E_m) (m ≠ 0), which
//! are gauge-stable and need no grid. With Ω_m = E_m − E_0 and ħ = 1:
//!
//! * memory kernel        Γ_kj(τ)  = Σ_m c̄_km c_jm Ω_m e^{−iΩ_m τ}
//! * frequency-dependent  γ̄_kj(ω) = −2i Σ_m c̄_km c_jm Ω_m/(Ω_m−ω−iε)
//! * Markov friction      γ_kj    = 2π Σ_m c̄_km c_jm Ω_m δ_η(Ω_m−ω)
//! * equivalent form      γ′_kj   = −2π Re Σ_m ⟨u_0|∂_kH|u_m⟩ c_jm δ_η(Ω_m−ω)
//! * density-op. (T→0)    γ^DMS   = −2 Re ∫₀^∞ e^{iωτ−ετ}⟨u_0|∂_kH e^{−iH′τ}|∂_j u_0⟩ dτ
//! * independent electrons γ^sp   = π Σ_ab ⟨a|∂_k h|b⟩⟨b|∂_j h|a⟩ δ_η(ε_a−ε_F) δ_η(ε_b−ε_F)
//!
//! The broadened δ comes in two realizations. `Gaussian` inserts a literal
//! normalized Gaussian of width η (positive weights; the physics default).
//! `Lorentzian` uses the converging-factor resolvent form
//! γ_kj = −2i(ω+iη) Σ_m c̄_km c_jm/(Ω_m−ω−iη), which is what the e^{−ετ}
//! regularization of the time integral actually produces; with η = ε it
//! makes the decomposition γ̄ = −2i q + γ and the γ^DMS = Re γ̄ equivalence
//! exact at finite broadening instead of up to O(η).
//!
//! The m = 0 term is excluded from every sum (exact Q_0 projector action);
//! the double limit ω → 0⁺, η → 0 is taken along a co-scaled path by
//! default (`BroadeningScheme::co_scaled`).

use crate::error::{CoreError, Warning};
use crate::linalg::{self, EigenSystem};
use crate::models::ParametricHamiltonian;
use crate::C64;
use nalgebra::DMatrix;

/// How the broadened δ (and its Kramers–Kronig partner) is realized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BroadeningKind {
    Gaussian,
    Lorentzian,
}

/// Width, probe frequency and converging factor for kernel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BroadeningScheme {
    pub kind: BroadeningKind,
    /// δ width η (energy).
    pub eta: f64,
    /// Excitation frequency ħω ≥ 0 probing the shell E_0 + ħω.
    pub omega: f64,
    /// Converging factor ε for the time integrals.
    pub epsilon: f64,
}

impl BroadeningScheme {
    /// Co-scaled double-limit path: ω = ε = η.
    pub fn co_scaled(kind: BroadeningKind, eta: f64) -> Self {
        Self {
            kind,
            eta,
            omega: eta,
            epsilon: eta,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if !(self.eta > 0.0) {
            return Err(CoreError::Broadening(format!(
                "eta must be > 0, got {}",
                self.eta
            )));
        }
        if self.omega < 0.0 || self.epsilon < 0.0 {
            return Err(CoreError::Broadening(
                "omega and epsilon must be >= 0".into(),
            ));
        }
        Ok(())
    }
}

fn gaussian_delta(x: f64, eta: f64) -> f64 {
    (-(x * x) / (2.0 * eta * eta)).exp() / (eta * (2.0 * std::f64::consts::PI).sqrt())
}

/// Spectral data shared by every kernel at one nuclear configuration.
///
/// For a many-level model the excitations are the levels m ≠ 0; for a
/// single-particle model with a filled Fermi sea they are the particle-hole
/// pairs a → b (occupied → empty), with the same algebra.
#[derive(Debug, Clone)]
pub struct KernelWorkspace {
    pub dim_nuc: usize,
    /// Excitation energies Ω_m = E_m − E_0 > 0.
    pub excitations: Vec<f64>,
    /// `c[k][m]` = ⟨u_m|∂_k H|u_0⟩ / (E_0 − E_m).
    pub couplings: Vec<Vec<C64>>,
    /// `d[k][m]` = ⟨u_0|∂_k H|u_m⟩, the matrix-element route to the second Markov form.
    pub grad_row: Vec<Vec<C64>>,
}

impl KernelWorkspace {
    /// Build from the electronic ground state of H_el(x).
    pub fn from_ground_state(
        h: &ParametricHamiltonian,
        x: &[f64],
        gap_tol: f64,
    ) -> Result<Self, CoreError> {
        let sys = linalg::eigh(&h.eval(x));
        if sys.gap(0) <= gap_tol {
            return Err(CoreError::Degeneracy {
                point: x.to_vec(),
                gap: sys.gap(0),
                tolerance: gap_tol,
            });
        }
        Self::from_eigensystem(h, x, &sys)
    }

    /// Build from a precomputed eigensystem (level 0 is the reference state).
    pub fn from_eigensystem(
        h: &ParametricHamiltonian,
        x: &[f64],
        sys: &EigenSystem,
    ) -> Result<Self, CoreError> {
        let dim_el = h.dim_el();
        let dim_nuc = h.dim_nuc();
        let e0 = sys.energies[0];
        let u0 = sys.vector(0);
        let excitations: Vec<f64> = (1..dim_el).map(|m| sys.energies[m] - e0).collect();
        let mut couplings = Vec::with_capacity(dim_nuc);
        let mut grad_row = Vec::with_capacity(dim_nuc);
        for k in 0..dim_nuc {
            let w = sys.vectors.adjoint() * (h.grad(x, k)? * &u0);
            let mut c = Vec::with_capacity(dim_el - 1);
            let mut d = Vec::with_capacity(dim_el - 1);
            for m in 1..dim_el {
                c.push(w[m] / C64::new(e0 - sys.energies[m], 0.0));
                d.push(w[m].conj());
            }
            couplings.push(c);
            grad_row.push(d);
        }
        Ok(Self {
            dim_nuc,
            excitations,
            couplings,
            grad_row,
        })
    }

    /// Build the particle-hole workspace for the Fermi sea of a
    /// single-particle (independent-band) model.
    pub fn fermi_sea(h: &ParametricHamiltonian, x: &[f64]) -> Result<Self, CoreError> {
        let info = h
            .single_particle()
            .ok_or_else(|| CoreError::NotSingleParticle {
                label: h.label().to_string(),
            })?;
        let sys = linalg::eigh(&h.eval(x));
        let dim = h.dim_el();
        let n_occ = info.n_electrons;
        let homo = sys.energies[n_occ - 1];
        let lumo = sys.energies[n_occ];
        if lumo - homo <= 1e-12 {
            return Err(CoreError::Degeneracy {
                point: x.to_vec(),
                gap: lumo - homo,
                tolerance: 1e-12,
            });
        }
        let dim_nuc = h.dim_nuc();
        let mut excitations = Vec::with_capacity(n_occ * (dim - n_occ));
        let mut couplings = vec![Vec::with_capacity(n_occ * (dim - n_occ)); dim_nuc];
        let mut grad_row = vec![Vec::with_capacity(n_occ * (dim - n_occ)); dim_nuc];
        // rotated single-particle gradients D^k_{ab} = ⟨φ_a|∂_k h|φ_b⟩
        let rotated: Vec<DMatrix<C64>> = (0..dim_nuc)
            .map(|k| {
                h.grad(x, k)
                    .map(|g| sys.vectors.adjoint() * (&g * &sys.vectors))
            })
            .collect::<Result<_, _>>()?;
        for a in 0..n_occ {
            for b in n_occ..dim {
                let de = sys.energies[b] - sys.energies[a];
                excitations.push(de);
                for k in 0..dim_nuc {
                    // many-body coupling ⟨Ψ_a^b|∂_kH|Φ_0⟩/(E_0−E_ab) = D^k_{ba}/(ε_a−ε_b)
                    couplings[k].push(rotated[k][(b, a)] / C64::new(-de, 0.0));
                    grad_row[k].push(rotated[k][(a, b)]);
                }
            }
        }
        Ok(Self {
            dim_nuc,
            excitations,
            couplings,
            grad_row,
        })
    }

    /// q_kj = Σ_m c̄_km c_jm (gauge-invariant; equals the sum-over-states
    /// quantum geometric tensor of the reference state).
    pub fn qgt(&self) -> DMatrix<C64> {
        DMatrix::from_fn(self.dim_nuc, self.dim_nuc, |k, j| {
            self.excitations
                .iter()
                .enumerate()
                .map(|(m, _)| self.couplings[k][m].conj() * self.couplings[j][m])
                .sum()
        })
    }

    /// Mean spacing of the lowest excitation energies (the spectrum "near
    /// E_0" that the broadened δ has to resolve).
    pub fn low_end_spacing(&self) -> f64 {
        let mut om = self.excitations.clone();
        om.sort_by(|a, b| a.partial_cmp(b).unwrap());
        om.truncate(10);
        if om.len() < 2 {
            return om.first().copied().unwrap_or(f64::INFINITY);
        }
        (om[om.len() - 1] - om[0]) / (om.len() - 1) as f64
    }
}

/// Γ_kj(τ) on the requested τ grid.
pub fn memory_kernel(ws: &KernelWorkspace, tau: &[f64]) -> Vec<DMatrix<C64>> {
    tau.iter()
        .map(|&t| {
            DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
                let mut s = C64::new(0.0, 0.0);
                for (m, &om) in ws.excitations.iter().enumerate() {
                    let phase = C64::from_polar(1.0, -om * t);
                    s += ws.couplings[k][m].conj() * ws.couplings[j][m] * om * phase;
                }
                s
            })
        })
        .collect()
}

/// Frequency-dependent kernel γ̄_kj(ω), evaluated in closed form per
/// spectral term with the converging factor ε.
pub fn bare_kernel(ws: &KernelWorkspace, scheme: &BroadeningScheme) -> DMatrix<C64> {
    let (om0, eps) = (scheme.omega, scheme.epsilon);
    DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
        let mut s = C64::new(0.0, 0.0);
        for (m, &om) in ws.excitations.iter().enumerate() {
            let denom = C64::new(om - om0, -eps);
            s += ws.couplings[k][m].conj() * ws.couplings[j][m] * C64::new(om, 0.0) / denom;
        }
        s * C64::new(0.0, -2.0)
    })
}

/// Markov friction tensor (the ⟨∂_k u_0|Q_0 H′ δ(E_0⁺−H)|∂_j u_0⟩ form).
pub fn markov_friction(ws: &KernelWorkspace, scheme: &BroadeningScheme) -> DMatrix<C64> {
    match scheme.kind {
        BroadeningKind::Gaussian => DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
            let mut s = C64::new(0.0, 0.0);
            for (m, &om) in ws.excitations.iter().enumerate() {
                let w =
                    2.0 * std::f64::consts::PI * om * gaussian_delta(om - scheme.omega, scheme.eta);
                s += ws.couplings[k][m].conj() * ws.couplings[j][m] * w;
            }
            s
        }),
        BroadeningKind::Lorentzian => {
            let shift = C64::new(scheme.omega, scheme.eta);
            DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
                let mut s = C64::new(0.0, 0.0);
                for (m, &om) in ws.excitations.iter().enumerate() {
                    let denom = C64::new(om - scheme.omega, -scheme.eta);
                    s += ws.couplings[k][m].conj() * ws.couplings[j][m] / denom;
                }
                s * C64::new(0.0, -2.0) * shift
            })
        }
    }
}

/// The −2πħ Re⟨u_0|(∂_k H)δ(E_0⁺−H)|∂_j u_0⟩ form of the Markov friction,
/// built from the ∂_k H matrix elements instead of the projected couplings.
pub fn markov_friction_alt(ws: &KernelWorkspace, scheme: &BroadeningScheme) -> DMatrix<f64> {
    match scheme.kind {
        BroadeningKind::Gaussian => DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
            let mut s = 0.0;
            for (m, &om) in ws.excitations.iter().enumerate() {
                let w = 2.0 * std::f64::consts::PI * gaussian_delta(om - scheme.omega, scheme.eta);
                s -= (ws.grad_row[k][m] * ws.couplings[j][m]).re * w;
            }
            s
        }),
        BroadeningKind::Lorentzian => {
            let shift = C64::new(scheme.omega, scheme.eta);
            DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
                let mut s = C64::new(0.0, 0.0);
                for (m, &om) in ws.excitations.iter().enumerate() {
                    let denom = C64::new(om, 0.0) * C64::new(om - scheme.omega, -scheme.eta);
                    s += ws.grad_row[k][m] * ws.couplings[j][m] / denom;
                }
                (s * C64::new(0.0, 2.0) * shift).re
            })
        }
    }
}

/// T→0 limit of the density-operator friction: the real part of
/// −2∫₀^∞ e^{iωτ−ετ} ⟨u_0|(∂_k H) e^{−iH′τ}|∂_j u_0⟩ dτ, per spectral term.
pub fn dms_friction(ws: &KernelWorkspace, scheme: &BroadeningScheme) -> DMatrix<f64> {
    let (om0, eps) = (scheme.omega, scheme.epsilon);
    DMatrix::from_fn(ws.dim_nuc, ws.dim_nuc, |k, j| {
        let mut s = C64::new(0.0, 0.0);
        for (m, &om) in ws.excitations.iter().enumerate() {
            let denom = C64::new(om - om0, -eps);
            s += ws.grad_row[k][m] * ws.couplings[j][m] / denom;
        }
        (s * C64::new(0.0, 2.0)).re
    })
}

/// Independent-electron friction: π Σ_ab ⟨a|∂_k h|b⟩⟨b|∂_j h|a⟩
/// δ_η(ε_a−ε_F) δ_η(ε_b−ε_F), with ε_F midgap for the declared filling.
/// Only levels within 8η of ε_F contribute beyond machine precision and are
/// the only ones entering the rotated gradients.
pub fn hgt_friction(
    h: &ParametricHamiltonian,
    x: &[f64],
    scheme: &BroadeningScheme,
) -> Result<DMatrix<f64>, CoreError> {
    let info = h
        .single_particle()
        .ok_or_else(|| CoreError::NotSingleParticle {
            label: h.label().to_string(),
        })?;
    scheme.validate()?;
    let sys = linalg::eigh(&h.eval(x));
    let e_f = 0.5 * (sys.energies[info.n_electrons - 1] + sys.energies[info.n_electrons]);

    let window: Vec<usize> = (0..h.dim_el())
        .filter(|&a| (sys.energies[a] - e_f).abs() <= 8.0 * scheme.eta)
        .collect();
    if window.is_empty() {
        return Ok(DMatrix::zeros(h.dim_nuc(), h.dim_nuc()));
    }
    let basis = DMatrix::from_columns(
        &window
            .iter()
            .map(|&a| sys.vectors.column(a).into_owned())
            .collect::<Vec<_>>(),
    );
    let weights: Vec<f64> = window
        .iter()
        .map(|&a| match scheme.kind {
            BroadeningKind::Gaussian => gaussian_delta(sys.energies[a] - e_f, scheme.eta),
            BroadeningKind::Lorentzian => {
                let d = sys.energies[a] - e_f;
                scheme.eta / (std::f64::consts::PI * (d * d + scheme.eta * scheme.eta))
            }
        })
        .collect();

    let rotated: Vec<DMatrix<C64>> = (0..h.dim_nuc())
        .map(|k| h.grad(x, k).map(|g| basis.adjoint() * (&g * &basis)))
        .collect::<Result<_, _>>()?;

    Ok(DMatrix::from_fn(h.dim_nuc(), h.dim_nuc(), |k, j| {
        let mut s = C64::new(0.0, 0.0);
        for (ia, &wa) in weights.iter().enumerate() {
            for (ib, &wb) in weights.iter().enumerate() {
                s += rotated[k][(ia, ib)] * rotated[j][(ib, ia)] * (wa * wb);
            }
        }
        std::f64::consts::PI * s.re
    }))
}

/// All kernels of one configuration, with symmetry diagnostics and
/// broadening warnings.
#[derive(Debug, Clone)]
pub struct FrictionTensorSet {
    pub x: Vec<f64>,
    pub tau: Vec<f64>,
    pub memory: Vec<DMatrix<C64>>,
    pub bare: DMatrix<C64>,
    pub markov: DMatrix<C64>,
    pub markov_alt: DMatrix<f64>,
    pub dms: DMatrix<f64>,
    pub hgt: Option<DMatrix<f64>>,
    pub scheme: BroadeningScheme,
    pub warnings: Vec<Warning>,
}

impl FrictionTensorSet {
    /// ‖Re γ − (Re γ)ᵀ‖_max and ‖Im γ + (Im γ)ᵀ‖_max relative to ‖γ‖_max.
    pub fn symmetry_violation(&self) -> (f64, f64) {
        let g = &self.markov;
        let scale = linalg::max_abs(g).max(1e-300);
        let mut re = 0.0f64;
        let mut im = 0.0f64;
        for k in 0..g.nrows() {
            for j in 0..g.ncols() {
                re = re.max((g[(k, j)].re - g[(j, k)].re).abs());
                im = im.max((g[(k, j)].im + g[(j, k)].im).abs());
            }
        }
        (re / scale, im / scale)
    }

    /// Smallest eigenvalue of the symmetrized Re γ (dissipativity check).
    pub fn min_dissipation_eigenvalue(&self) -> f64 {
        let g = &self.markov;
        let d = g.nrows();
        let sym = DMatrix::from_fn(d, d, |k, j| 0.5 * (g[(k, j)].re + g[(j, k)].re));
        linalg::min_symmetric_eigenvalue(&sym)
    }
}

/// Evaluate every kernel of the spec at one configuration. For
/// single-particle models the workspace is the Fermi-sea particle-hole one
/// and the independent-electron tensor is filled in.
pub fn friction_tensors(
    h: &ParametricHamiltonian,
    x: &[f64],
    scheme: &BroadeningScheme,
    tau: &[f64],
) -> Result<FrictionTensorSet, CoreError> {
    scheme.validate()?;
    let (ws, hgt) = if h.single_particle().is_some() {
        (
            KernelWorkspace::fermi_sea(h, x)?,
            Some(hgt_friction(h, x, scheme)?),
        )
    } else {
        (KernelWorkspace::from_ground_state(h, x, 1e-8)?, None)
    };
    let mut warnings = Vec::new();
    let spacing = ws.low_end_spacing();
    if spacing.is_finite() && scheme.eta < 3.0 * spacing {
        warnings.push(Warning::Gap {
            eta: scheme.eta,
            spacing,
        });
    }
    Ok(FrictionTensorSet {
        x: x.to_vec(),
        tau: tau.to_vec(),
        memory: memory_kernel(&ws, tau),
        bare: bare_kernel(&ws, scheme),
        markov: markov_friction(&ws, scheme),
        markov_alt: markov_friction_alt(&ws, scheme),
        dms: dms_friction(&ws, scheme),
        hgt,
        scheme: *scheme,
        warnings,
    })
}
