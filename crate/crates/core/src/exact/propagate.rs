//! Strang split-operator propagation of the full wavefunction.

use super::fft::Fft1D;
use super::FullWavefunction;
use crate::error::CoreError;
use crate::grid::NuclearGrid;
use crate::linalg;
use crate::models::ParametricHamiltonian;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Per-run observable rows (t, norm², energy, ⟨x⟩, ⟨p⟩).
#[derive(Debug, Clone, Default)]
pub struct ObservableSeries {
    pub time: Vec<f64>,
    pub norm_sq: Vec<f64>,
    pub energy: Vec<f64>,
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

/// Stored propagation output: snapshots every `snapshot_stride` steps plus
/// per-step observables.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub snapshots: Vec<FullWavefunction>,
    pub series: ObservableSeries,
    pub dt: f64,
}

/// Split-operator propagator with the per-point electronic exponentials
/// precomputed (H_el is time-independent).
pub struct ExactPropagator {
    grid: NuclearGrid,
    dt: f64,
    dim_el: usize,
    kinetic_half: Vec<C64>,
    potential_step: Vec<DMatrix<C64>>,
    h_local: Vec<DMatrix<C64>>,
    fft: Fft1D,
    /// Boundary-density fraction that aborts the run.
    pub edge_threshold: f64,
}

impl std::fmt::Debug for ExactPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactPropagator")
            .field("n", &self.grid.len())
            .field("dt", &self.dt)
            .finish()
    }
}

impl ExactPropagator {
    pub fn new(
        h: &ParametricHamiltonian,
        grid: &NuclearGrid,
        mass: f64,
        dt: f64,
    ) -> Result<Self, CoreError> {
        if grid.dim() != 1 {
            return Err(CoreError::Propagation(
                "propagation grid must be 1-D".into(),
            ));
        }
        if h.dim_nuc() != 1 {
            return Err(CoreError::Propagation(
                "exact propagation needs a 1-coordinate model".into(),
            ));
        }
        if !(dt > 0.0) {
            return Err(CoreError::Propagation(format!("dt must be > 0, got {dt}")));
        }
        let n = grid.len();
        let dx = grid.axis(0).step;
        let kinetic_half = Fft1D::wavenumbers(n, dx)
            .iter()
            .map(|&k| C64::from_polar(1.0, -0.5 * k * k / mass * 0.5 * dt))
            .collect();

        let pairs: Vec<(DMatrix<C64>, DMatrix<C64>)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let hm = h.eval(&grid.point(i));
                let sys = linalg::eigh(&hm);
                let d = hm.nrows();
                // U e^{-iE dt} U†
                let mut expd = DMatrix::<C64>::zeros(d, d);
                for k in 0..d {
                    expd[(k, k)] = C64::from_polar(1.0, -sys.energies[k] * dt);
                }
                let u = &sys.vectors;
                (u * expd * u.adjoint(), hm)
            })
            .collect();
        let (potential_step, h_local) = pairs.into_iter().unzip();

        Ok(Self {
            grid: grid.clone(),
            dt,
            dim_el: h.dim_el(),
            kinetic_half,
            potential_step,
            h_local,
            fft: Fft1D::new(n),
            edge_threshold: 1e-10,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// ⟨Ψ|H|Ψ⟩ (not normalized by ⟨Ψ|Ψ⟩).
    pub fn total_energy(&mut self, psi: &FullWavefunction) -> f64 {
        let kinetic = psi.kinetic_energy(&mut self.fft);
        let mut pot = 0.0;
        for i in 0..self.grid.len() {
            let v = DVector::from_fn(self.dim_el, |m, _| psi.components[m][i]);
            pot += (v.adjoint() * &self.h_local[i] * &v)[(0, 0)].re;
        }
        kinetic + pot * psi.dx()
    }

    /// One Strang step K(dt/2) V(dt) K(dt/2).
    pub fn step(&mut self, psi: &mut FullWavefunction) -> Result<(), CoreError> {
        debug_assert_eq!(psi.dim_el(), self.dim_el);
        self.kinetic_half(psi);
        self.potential_full(psi);
        self.kinetic_half(psi);
        psi.time += self.dt;

        let edge = psi.edge_density(2);
        if edge > self.edge_threshold {
            return Err(CoreError::EdgeLeak {
                density: edge,
                threshold: self.edge_threshold,
                time: psi.time,
            });
        }
        Ok(())
    }

    fn kinetic_half(&mut self, psi: &mut FullWavefunction) {
        for c in psi.components.iter_mut() {
            self.fft.forward(c);
            for (z, f) in c.iter_mut().zip(&self.kinetic_half) {
                *z *= f;
            }
            self.fft.inverse(c);
        }
    }

    fn potential_full(&self, psi: &mut FullWavefunction) {
        let d = self.dim_el;
        let n = self.grid.len();
        let mut v = vec![C64::new(0.0, 0.0); d];
        for i in 0..n {
            for (m, val) in v.iter_mut().enumerate() {
                *val = psi.components[m][i];
            }
            let u = &self.potential_step[i];
            for m in 0..d {
                let mut acc = C64::new(0.0, 0.0);
                for (mp, val) in v.iter().enumerate() {
                    acc += u[(m, mp)] * val;
                }
                psi.components[m][i] = acc;
            }
        }
    }

    /// Propagate `n_steps`, storing the initial state, every
    /// `snapshot_stride`-th step and the final state as snapshots.
    pub fn propagate(
        &mut self,
        psi0: FullWavefunction,
        n_steps: usize,
        snapshot_stride: usize,
    ) -> Result<Trajectory, CoreError> {
        let stride = snapshot_stride.max(1);
        let mut psi = psi0;
        let mut snapshots = Vec::new();
        let mut series = ObservableSeries::default();

        let mut record = |this: &mut Self,
                          p: &FullWavefunction,
                          snaps: &mut Vec<FullWavefunction>,
                          keep: bool| {
            if keep {
                snaps.push(p.clone());
            }
            series.time.push(p.time);
            series.norm_sq.push(p.norm_sq());
            series.energy.push(this.total_energy(p));
            series.position.push(p.mean_position());
            series.momentum.push(p.mean_momentum(&mut this.fft));
        };

        record(self, &psi, &mut snapshots, true);
        for step in 1..=n_steps {
            self.step(&mut psi)?;
            record(
                self,
                &psi,
                &mut snapshots,
                step % stride == 0 || step == n_steps,
            );
        }
        Ok(Trajectory {
            snapshots,
            series,
            dt: self.dt,
        })
    }
}
