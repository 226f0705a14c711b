//! Thin wrapper around rustfft for 1-D spectral derivatives and kinetic
//! propagation on uniform grids.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft1D {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<C64>,
}

impl std::fmt::Debug for Fft1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft1D").field("n", &self.n).finish()
    }
}

impl Clone for Fft1D {
    fn clone(&self) -> Self {
        Self::new(self.n)
    }
}

impl Fft1D {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![C64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn forward(&mut self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.n);
        self.forward.process_with_scratch(data, &mut self.scratch);
    }

    /// Inverse transform including the 1/n normalization.
    pub fn inverse(&mut self, data: &mut [C64]) {
        debug_assert_eq!(data.len(), self.n);
        self.inverse.process_with_scratch(data, &mut self.scratch);
        let norm = 1.0 / self.n as f64;
        for z in data.iter_mut() {
            *z *= norm;
        }
    }

    /// FFT-ordered wavenumbers for grid spacing `dx`.
    pub fn wavenumbers(n: usize, dx: f64) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / (n as f64 * dx);
        (0..n)
            .map(|i| {
                let j = if i <= (n - 1) / 2 {
                    i as isize
                } else {
                    i as isize - n as isize
                };
                j as f64 * dk
            })
            .collect()
    }

    /// Spectral derivative of order `order` (1 or 2).
    pub fn derivative(&mut self, data: &[C64], dx: f64, order: u32) -> Vec<C64> {
        let mut buf = data.to_vec();
        self.forward(&mut buf);
        let ks = Self::wavenumbers(self.n, dx);
        for (z, &k) in buf.iter_mut().zip(&ks) {
            let ik = C64::new(0.0, k);
            *z *= ik.powu(order);
        }
        self.inverse(&mut buf);
        buf
    }
}
