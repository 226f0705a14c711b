//! Exact electron-nuclear dynamics on a 1-D nuclear grid.
//!
//! The full wavefunction Ψ_m(x) lives on a uniform grid × a small electronic
//! dimension and is propagated by Strang splitting: half-step kinetic
//! (spectral), full-step potential (per-point matrix exponential of the
//! time-independent H_el(x)), half-step kinetic. Analysis operations
//! factorize Ψ into ψ(x)·u(x), decompose the force acting on the nuclear
//! coordinate and verify the sum rules that survive averaging.

pub mod factorize;
pub mod fft;
pub mod fields;
pub mod forces;
pub mod lite;
pub mod propagate;
pub mod store;

pub use factorize::{factorize, velocity_field, FactorizedState, VelocityField};
pub use fields::DerivedFields;
pub use forces::{
    averaged_force_check, ehrenfest_check, eom_form_check, force_breakdown, AveragedForceReport,
    EhrenfestReport, EomFormReport, ForceBreakdown,
};
pub use lite::{lite_error, spawn_probability_check, LiteReport, SpawnReport};
pub use propagate::{ExactPropagator, Trajectory};

use crate::error::CoreError;
use crate::geometry::EigenFrame;
use crate::grid::NuclearGrid;
use crate::C64;
use fft::Fft1D;

/// Full electron-nuclear wavefunction Ψ_m(x) on a 1-D grid.
#[derive(Debug, Clone)]
pub struct FullWavefunction {
    pub grid: NuclearGrid,
    pub mass: f64,
    pub time: f64,
    /// `components[m][i]` = Ψ_m(x_i).
    pub components: Vec<Vec<C64>>,
}

impl FullWavefunction {
    pub fn new(grid: NuclearGrid, mass: f64, components: Vec<Vec<C64>>) -> Result<Self, CoreError> {
        if grid.dim() != 1 {
            return Err(CoreError::Propagation(
                "exact dynamics is 1-D in the nuclear coordinate".into(),
            ));
        }
        let n = grid.len();
        if components.is_empty() || components.iter().any(|c| c.len() != n) {
            return Err(CoreError::Propagation(
                "component arrays must all match the grid length".into(),
            ));
        }
        Ok(Self {
            grid,
            mass,
            time: 0.0,
            components,
        })
    }

    /// Normalized Gaussian packet exp(−(x−center)²/(4 width²) + i p₀ x).
    /// `width` is the position standard deviation.
    pub fn gaussian_packet(grid: &NuclearGrid, center: f64, width: f64, momentum: f64) -> Vec<C64> {
        let dx = grid.axis(0).step;
        let mut psi: Vec<C64> = grid
            .points()
            .map(|x| {
                let d = x[0] - center;
                C64::from_polar((-d * d / (4.0 * width * width)).exp(), momentum * x[0])
            })
            .collect();
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx;
        let s = 1.0 / norm.sqrt();
        psi.iter_mut().for_each(|z| *z *= s);
        psi
    }

    /// Adiabatic construction ψ(x)·u_n(x) from a gauged frame.
    pub fn adiabatic(frame: &EigenFrame, mass: f64, psi: &[C64]) -> Result<Self, CoreError> {
        let n = frame.grid.len();
        assert_eq!(psi.len(), n);
        let dim_el = frame.vectors[0].len();
        let mut components = vec![vec![C64::new(0.0, 0.0); n]; dim_el];
        for i in 0..n {
            for m in 0..dim_el {
                components[m][i] = psi[i] * frame.vectors[i][m];
            }
        }
        Self::new(frame.grid.clone(), mass, components)
    }

    /// Packet placed on a single electronic basis component (diabatic start).
    pub fn on_component(
        grid: &NuclearGrid,
        mass: f64,
        dim_el: usize,
        component: usize,
        psi: &[C64],
    ) -> Result<Self, CoreError> {
        assert!(component < dim_el);
        let mut components = vec![vec![C64::new(0.0, 0.0); grid.len()]; dim_el];
        components[component] = psi.to_vec();
        Self::new(grid.clone(), mass, components)
    }

    pub fn dim_el(&self) -> usize {
        self.components.len()
    }

    pub fn dx(&self) -> f64 {
        self.grid.axis(0).step
    }

    /// Σ_m ∫ |Ψ_m|² dx.
    pub fn norm_sq(&self) -> f64 {
        self.components
            .iter()
            .map(|c| c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            * self.dx()
    }

    /// Nuclear density Σ_m |Ψ_m(x_i)|².
    pub fn density(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut rho = vec![0.0; n];
        for c in &self.components {
            for (r, z) in rho.iter_mut().zip(c) {
                *r += z.norm_sqr();
            }
        }
        rho
    }

    /// ⟨x⟩.
    pub fn mean_position(&self) -> f64 {
        let rho = self.density();
        let dx = self.dx();
        let mut num = 0.0;
        for (i, x) in self.grid.points().enumerate() {
            num += x[0] * rho[i];
        }
        num * dx / self.norm_sq()
    }

    /// ⟨p̂⟩ by Parseval in k-space.
    pub fn mean_momentum(&self, fft: &mut Fft1D) -> f64 {
        let n = self.grid.len();
        let ks = Fft1D::wavenumbers(n, self.dx());
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &self.components {
            let mut buf = c.clone();
            fft.forward(&mut buf);
            for (z, &k) in buf.iter().zip(&ks) {
                num += k * z.norm_sqr();
                den += z.norm_sqr();
            }
        }
        num / den
    }

    /// ⟨T̂⟩ = ⟨p̂²⟩/2M by Parseval.
    pub fn kinetic_energy(&self, fft: &mut Fft1D) -> f64 {
        let n = self.grid.len();
        let ks = Fft1D::wavenumbers(n, self.dx());
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &self.components {
            let mut buf = c.clone();
            fft.forward(&mut buf);
            for (z, &k) in buf.iter().zip(&ks) {
                num += 0.5 * k * k / self.mass * z.norm_sqr();
                den += z.norm_sqr();
            }
        }
        num / den * self.norm_sq()
    }

    /// Population on level `n` of a static frame: ∫ |⟨u_n(x)|Ψ(x)⟩|² dx.
    pub fn population_on(&self, frame: &EigenFrame) -> f64 {
        let nx = self.grid.len();
        let mut pop = 0.0;
        for i in 0..nx {
            let mut ov = C64::new(0.0, 0.0);
            for m in 0..self.dim_el() {
                ov += frame.vectors[i][m].conj() * self.components[m][i];
            }
            pop += ov.norm_sqr();
        }
        pop * self.dx()
    }

    /// Density within `cells` grid cells of either edge, as a fraction of
    /// the norm.
    pub fn edge_density(&self, cells: usize) -> f64 {
        let rho = self.density();
        let n = rho.len();
        let cells = cells.min(n / 2);
        let edge: f64 = rho[..cells].iter().chain(rho[n - cells..].iter()).sum();
        edge * self.dx() / self.norm_sq()
    }
}
