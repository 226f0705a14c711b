//! Parametric electronic Hamiltonians H_el(x) with analytic gradients.
//!
//! All builders return dense Hermitian matrices in Hartree atomic units.
//! The models are deliberately small and exactly solvable; they exist to
//! exercise the geometry, kernel and dynamics layers, not to describe any
//! particular molecule.

use crate::error::CoreError;
use crate::linalg;
use crate::C64;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

type EvalFn = dyn Fn(&[f64]) -> DMatrix<C64> + Send + Sync;
type GradFn = dyn Fn(&[f64], usize) -> DMatrix<C64> + Send + Sync;

/// Filling information carried by single-particle (independent-electron)
/// models; many-body kernels assemble Fermi-sea quantities from it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SingleParticle {
    /// Number of occupied orbitals in the Fermi sea.
    pub n_electrons: usize,
}

/// A Hermitian matrix-valued function of the nuclear coordinates together
/// with its analytic gradient ∂_k H_el.
pub struct ParametricHamiltonian {
    dim_el: usize,
    dim_nuc: usize,
    label: String,
    single_particle: Option<SingleParticle>,
    eval_fn: Arc<EvalFn>,
    grad_fn: Arc<GradFn>,
}

impl std::fmt::Debug for ParametricHamiltonian {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ParametricHamiltonian")
            .field("label", &self.label)
            .field("dim_el", &self.dim_el)
            .field("dim_nuc", &self.dim_nuc)
            .finish()
    }
}

impl Clone for ParametricHamiltonian {
    fn clone(&self) -> Self {
        Self {
            dim_el: self.dim_el,
            dim_nuc: self.dim_nuc,
            label: self.label.clone(),
            single_particle: self.single_particle,
            eval_fn: Arc::clone(&self.eval_fn),
            grad_fn: Arc::clone(&self.grad_fn),
        }
    }
}

impl ParametricHamiltonian {
    /// Wrap closures for H_el(x) and ∂_k H_el(x).
    pub fn new<E, G>(
        label: impl Into<String>,
        dim_el: usize,
        dim_nuc: usize,
        eval: E,
        grad: G,
    ) -> Self
    where
        E: Fn(&[f64]) -> DMatrix<C64> + Send + Sync + 'static,
        G: Fn(&[f64], usize) -> DMatrix<C64> + Send + Sync + 'static,
    {
        assert!(dim_el >= 1 && dim_nuc >= 1);
        Self {
            dim_el,
            dim_nuc,
            label: label.into(),
            single_particle: None,
            eval_fn: Arc::new(eval),
            grad_fn: Arc::new(grad),
        }
    }

    /// Mark the model as a single-particle Hamiltonian with a filled Fermi
    /// sea of `n_electrons` orbitals (enables the independent-electron
    /// kernels).
    pub fn with_single_particle(mut self, info: SingleParticle) -> Self {
        self.single_particle = Some(info);
        self
    }

    pub fn dim_el(&self) -> usize {
        self.dim_el
    }

    pub fn dim_nuc(&self) -> usize {
        self.dim_nuc
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn single_particle(&self) -> Option<SingleParticle> {
        self.single_particle
    }

    /// H_el at `x`.
    pub fn eval(&self, x: &[f64]) -> DMatrix<C64> {
        assert_eq!(x.len(), self.dim_nuc, "coordinate dimension mismatch");
        (self.eval_fn)(x)
    }

    /// Analytic ∂_k H_el at `x`.
    pub fn grad(&self, x: &[f64], k: usize) -> Result<DMatrix<C64>, CoreError> {
        assert_eq!(x.len(), self.dim_nuc, "coordinate dimension mismatch");
        if k >= self.dim_nuc {
            return Err(CoreError::CoordinateIndex {
                index: k,
                dim_nuc: self.dim_nuc,
            });
        }
        Ok((self.grad_fn)(x, k))
    }
}

/// Central-difference oracle for `ParametricHamiltonian::grad`, Hermitized
/// by (M + M†)/2. Second-order accurate in `step`.
pub fn fd_gradient(
    h: &ParametricHamiltonian,
    x: &[f64],
    k: usize,
    step: f64,
) -> Result<DMatrix<C64>, CoreError> {
    if k >= h.dim_nuc() {
        return Err(CoreError::CoordinateIndex {
            index: k,
            dim_nuc: h.dim_nuc(),
        });
    }
    if step <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "step",
            reason: format!("must be > 0, got {step}"),
        });
    }
    let mut xp = x.to_vec();
    let mut xm = x.to_vec();
    xp[k] += step;
    xm[k] -= step;
    let diff = (h.eval(&xp) - h.eval(&xm)) / C64::new(2.0 * step, 0.0);
    Ok(linalg::hermitize(&diff))
}

fn pauli() -> [DMatrix<C64>; 3] {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    [
        DMatrix::from_row_slice(2, 2, &[o, l, l, o]),
        DMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        DMatrix::from_row_slice(2, 2, &[l, o, o, -l]),
    ]
}

/// Two-level monopole H(x) = (b0/2)(x·σ) on x ∈ ℝ³: a degeneracy point at
/// the origin with nonzero Berry curvature everywhere else.
pub fn spin_monopole(b0: f64) -> Result<ParametricHamiltonian, CoreError> {
    if b0 <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "b0",
            reason: format!("must be > 0, got {b0}"),
        });
    }
    let sigma = pauli();
    let sigma_g = sigma.clone();
    Ok(ParametricHamiltonian::new(
        "spin_monopole",
        2,
        3,
        move |x| {
            let mut m = DMatrix::<C64>::zeros(2, 2);
            for (k, s) in sigma.iter().enumerate() {
                m += s * C64::new(0.5 * b0 * x[k], 0.0);
            }
            m
        },
        move |_x, k| &sigma_g[k] * C64::new(0.5 * b0, 0.0),
    ))
}

/// Real two-level conical intersection H(x, y) = a·x·σ_z + c·y·σ_x: exact
/// degeneracy at the origin, flat (zero) curvature away from it, π Berry
/// phase around it.
pub fn conical(a: f64, c: f64) -> Result<ParametricHamiltonian, CoreError> {
    if a == 0.0 || c == 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "a, c",
            reason: "both slopes must be nonzero".into(),
        });
    }
    let [sx, _, sz] = pauli();
    let (sx_g, sz_g) = (sx.clone(), sz.clone());
    Ok(ParametricHamiltonian::new(
        "conical",
        2,
        2,
        move |x| &sz * C64::new(a * x[0], 0.0) + &sx * C64::new(c * x[1], 0.0),
        move |_x, k| {
            if k == 0 {
                &sz_g * C64::new(a, 0.0)
            } else {
                &sx_g * C64::new(c, 0.0)
            }
        },
    ))
}

/// Two shifted harmonic diabats E₁ = ½k_f(x+x0)², E₂ = ½k_f(x−x0)² + Δ with
/// constant coupling c; the standard 1-D testbed for exact dynamics.
pub fn avoided_crossing(
    k_f: f64,
    x0: f64,
    delta: f64,
    c: f64,
) -> Result<ParametricHamiltonian, CoreError> {
    if k_f <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "k_f",
            reason: format!("must be > 0, got {k_f}"),
        });
    }
    if c < 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "c",
            reason: format!("must be >= 0, got {c}"),
        });
    }
    Ok(ParametricHamiltonian::new(
        "avoided_crossing",
        2,
        1,
        move |x| {
            let e1 = 0.5 * k_f * (x[0] + x0).powi(2);
            let e2 = 0.5 * k_f * (x[0] - x0).powi(2) + delta;
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(e1, 0.0),
                    C64::new(c, 0.0),
                    C64::new(c, 0.0),
                    C64::new(e2, 0.0),
                ],
            )
        },
        move |x, _k| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(k_f * (x[0] + x0), 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(0.0, 0.0),
                    C64::new(k_f * (x[0] - x0), 0.0),
                ],
            )
        },
    ))
}

/// Scalar function of the nuclear coordinates with an analytic gradient,
/// used for the impurity level and coupling of the independent-band model.
#[derive(Clone)]
pub struct CoordinateFunction {
    value: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    gradient: Arc<dyn Fn(&[f64], usize) -> f64 + Send + Sync>,
}

impl CoordinateFunction {
    pub fn new<V, G>(value: V, gradient: G) -> Self
    where
        V: Fn(&[f64]) -> f64 + Send + Sync + 'static,
        G: Fn(&[f64], usize) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(value),
            gradient: Arc::new(gradient),
        }
    }

    pub fn constant(v: f64) -> Self {
        Self::new(move |_| v, |_, _| 0.0)
    }

    /// intercept + Σ_k `slopes[k]`·x_k
    pub fn linear(intercept: f64, slopes: Vec<f64>) -> Self {
        let s = slopes.clone();
        Self::new(
            move |x| intercept + slopes.iter().zip(x).map(|(s, x)| s * x).sum::<f64>(),
            move |_, k| s.get(k).copied().unwrap_or(0.0),
        )
    }

    /// amplitude · exp(−|x−center|²/(2 width²))
    pub fn gaussian(amplitude: f64, center: Vec<f64>, width: f64) -> Self {
        let c2 = center.clone();
        let val = move |x: &[f64]| {
            let r2: f64 = x.iter().zip(&center).map(|(x, c)| (x - c).powi(2)).sum();
            amplitude * (-r2 / (2.0 * width * width)).exp()
        };
        let val_g = val.clone();
        Self::new(val, move |x, k| {
            -val_g(x) * (x[k] - c2[k]) / (width * width)
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &[f64], k: usize) -> f64 {
        (self.gradient)(x, k)
    }
}

/// Single-particle impurity-plus-band Hamiltonian: one level eps_d(x)
/// coupled with strength d(x) to `n_band` levels uniformly spaced in
/// [−W/2, W/2]. Level spacing W/(n_band−1), density of states ≈ (n_band−1)/W.
///
/// `n_electrons` fills the Fermi sea used by the many-body kernels; it
/// defaults to half filling when `None`.
pub fn independent_band(
    n_band: usize,
    w: f64,
    eps_d: CoordinateFunction,
    coupling: CoordinateFunction,
    dim_nuc: usize,
    n_electrons: Option<usize>,
) -> Result<ParametricHamiltonian, CoreError> {
    if n_band < 16 {
        return Err(CoreError::InvalidParameter {
            name: "n_band",
            reason: format!("need at least 16 band levels, got {n_band}"),
        });
    }
    if w <= 0.0 {
        return Err(CoreError::InvalidParameter {
            name: "w",
            reason: format!("band width must be > 0, got {w}"),
        });
    }
    let dim = n_band + 1;
    let n_el = n_electrons.unwrap_or(dim / 2);
    if n_el == 0 || n_el >= dim {
        return Err(CoreError::InvalidParameter {
            name: "n_electrons",
            reason: format!("must be in 1..{dim}, got {n_el}"),
        });
    }
    let spacing = w / (n_band as f64 - 1.0);
    let band: Vec<f64> = (0..n_band).map(|i| -0.5 * w + i as f64 * spacing).collect();
    let band_g = band.clone();
    let (eps_g, cpl_g) = (eps_d.clone(), coupling.clone());
    Ok(ParametricHamiltonian::new(
        "independent_band",
        dim,
        dim_nuc,
        move |x| {
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            m[(0, 0)] = C64::new(eps_d.eval(x), 0.0);
            let d = C64::new(coupling.eval(x), 0.0);
            for (i, &e) in band.iter().enumerate() {
                m[(i + 1, i + 1)] = C64::new(e, 0.0);
                m[(0, i + 1)] = d;
                m[(i + 1, 0)] = d;
            }
            m
        },
        move |x, k| {
            let mut m = DMatrix::<C64>::zeros(dim, dim);
            m[(0, 0)] = C64::new(eps_g.grad(x, k), 0.0);
            let dd = C64::new(cpl_g.grad(x, k), 0.0);
            for i in 0..band_g.len() {
                m[(0, i + 1)] = dd;
                m[(i + 1, 0)] = dd;
            }
            m
        },
    )
    .with_single_particle(SingleParticle { n_electrons: n_el }))
}

/// Serializable description of a scalar coordinate function.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoordinateFunctionSpec {
    Constant {
        value: f64,
    },
    Linear {
        intercept: f64,
        slopes: Vec<f64>,
    },
    Gaussian {
        amplitude: f64,
        center: Vec<f64>,
        width: f64,
    },
}

impl CoordinateFunctionSpec {
    pub fn build(&self) -> CoordinateFunction {
        match self {
            Self::Constant { value } => CoordinateFunction::constant(*value),
            Self::Linear { intercept, slopes } => {
                CoordinateFunction::linear(*intercept, slopes.clone())
            }
            Self::Gaussian {
                amplitude,
                center,
                width,
            } => CoordinateFunction::gaussian(*amplitude, center.clone(), *width),
        }
    }
}

/// Serializable model description; deserialized from run manifests.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    SpinMonopole {
        b0: f64,
    },
    Conical {
        a: f64,
        c: f64,
    },
    AvoidedCrossing {
        k_f: f64,
        x0: f64,
        delta: f64,
        c: f64,
    },
    IndependentBand {
        n_band: usize,
        w: f64,
        eps_d: CoordinateFunctionSpec,
        coupling: CoordinateFunctionSpec,
        #[serde(default = "default_dim_nuc")]
        dim_nuc: usize,
        #[serde(default)]
        n_electrons: Option<usize>,
    },
}

fn default_dim_nuc() -> usize {
    1
}

impl ModelSpec {
    pub fn build(&self) -> Result<ParametricHamiltonian, CoreError> {
        match self {
            Self::SpinMonopole { b0 } => spin_monopole(*b0),
            Self::Conical { a, c } => conical(*a, *c),
            Self::AvoidedCrossing { k_f, x0, delta, c } => avoided_crossing(*k_f, *x0, *delta, *c),
            Self::IndependentBand {
                n_band,
                w,
                eps_d,
                coupling,
                dim_nuc,
                n_electrons,
            } => independent_band(
                *n_band,
                *w,
                eps_d.build(),
                coupling.build(),
                *dim_nuc,
                *n_electrons,
            ),
        }
    }
}
