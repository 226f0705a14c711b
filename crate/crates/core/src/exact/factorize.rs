//! Exact factorization Ψ(x) = ψ(x)·u(x) with a parallel-transported
//! electronic gauge along the nuclear coordinate.

use super::fft::Fft1D;
use super::FullWavefunction;
use crate::error::CoreError;
use crate::grid::NuclearGrid;
use crate::C64;
use nalgebra::DVector;

/// Default support floor: points with Σ_m|Ψ_m|² below this fraction of the
/// density maximum are masked, not extrapolated.
pub const DEFAULT_SUPPORT_FLOOR: f64 = 1e-10;

/// ψ(x) and the unit electronic vector u(x) on the support of the density.
#[derive(Debug, Clone)]
pub struct FactorizedState {
    pub grid: NuclearGrid,
    pub mass: f64,
    pub time: f64,
    pub psi: Vec<C64>,
    /// Unit vectors on support; zero off support.
    pub u: Vec<DVector<C64>>,
    pub support: Vec<bool>,
    /// Fraction of |Ψ|² carried by masked points.
    pub masked_density: f64,
    /// Density floor used for the mask (relative to the density maximum).
    pub floor: f64,
}

impl FactorizedState {
    /// Index of the density maximum.
    pub fn density_peak(&self) -> usize {
        self.psi
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }

    /// Velocity field of this state's nuclear amplitude. `connection` is
    /// the Berry connection of the electronic gauge (None for A ≡ 0).
    pub fn velocity(&self, connection: Option<&[f64]>, floor: f64) -> VelocityField {
        velocity_field(
            &self.psi,
            connection,
            self.mass,
            self.grid.axis(0).step,
            floor,
        )
    }

    /// Rebuild Ψ_m(x) = ψ(x)·u_m(x); zero off support.
    pub fn reconstruct(&self) -> FullWavefunction {
        let n = self.grid.len();
        let dim_el = self
            .u
            .iter()
            .find(|v| v.len() > 0)
            .map(|v| v.len())
            .unwrap();
        let mut components = vec![vec![C64::new(0.0, 0.0); n]; dim_el];
        for i in 0..n {
            if !self.support[i] {
                continue;
            }
            for m in 0..dim_el {
                components[m][i] = self.psi[i] * self.u[i][m];
            }
        }
        FullWavefunction {
            grid: self.grid.clone(),
            mass: self.mass,
            time: self.time,
            components,
        }
    }
}

/// Factorize a full wavefunction. |ψ| is the pointwise norm of Ψ; the phase
/// of ψ is fixed by parallel-transporting u along x from the density
/// maximum (Im⟨u_i|u_{i+1}⟩ = 0, Re ≥ 0 between gauged neighbors).
pub fn factorize(psi_full: &FullWavefunction, floor: f64) -> Result<FactorizedState, CoreError> {
    let n = psi_full.grid.len();
    let dim_el = psi_full.dim_el();
    let rho = psi_full.density();
    let rho_max = rho.iter().cloned().fold(0.0, f64::max);
    if rho_max <= 0.0 {
        return Err(CoreError::EmptySupport { floor });
    }
    let support: Vec<bool> = rho.iter().map(|&r| r >= floor * rho_max).collect();
    let norm_sq = psi_full.norm_sq();
    let masked: f64 = rho
        .iter()
        .zip(&support)
        .filter(|(_, &s)| !s)
        .map(|(r, _)| r)
        .sum::<f64>()
        * psi_full.dx()
        / norm_sq;

    let peak = rho
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();

    let raw = |i: usize| -> DVector<C64> {
        let v = DVector::from_fn(dim_el, |m, _| psi_full.components[m][i]);
        let nrm = v.norm();
        v / C64::new(nrm, 0.0)
    };

    let mut u: Vec<DVector<C64>> = vec![DVector::zeros(0); n];
    let mut psi = vec![C64::new(0.0, 0.0); n];

    // anchor at the peak: largest-|component| real positive
    let mut anchor = raw(peak);
    let mut best = 0;
    for (m, z) in anchor.iter().enumerate() {
        if z.norm() > anchor[best].norm() + 1e-15 {
            best = m;
        }
    }
    let z = anchor[best];
    anchor *= z.conj() / z.norm();
    u[peak] = anchor;

    // transport outward; ψ = ⟨u|Ψ⟩ carries the residual phase
    let assign_psi = |u_i: &DVector<C64>, i: usize| -> C64 {
        let mut ov = C64::new(0.0, 0.0);
        for m in 0..dim_el {
            ov += u_i[m].conj() * psi_full.components[m][i];
        }
        ov
    };
    psi[peak] = assign_psi(&u[peak], peak);

    for dir in [1isize, -1] {
        let mut prev = peak;
        let mut i = peak as isize + dir;
        while i >= 0 && (i as usize) < n {
            let idx = i as usize;
            if !support[idx] {
                break; // off-support points are masked, not extrapolated
            }
            let mut v = raw(idx);
            let ov = u[prev].dotc(&v);
            if ov.norm() > 1e-14 {
                v *= ov.conj() / ov.norm();
            }
            psi[idx] = assign_psi(&v, idx);
            u[idx] = v;
            prev = idx;
            i += dir;
        }
    }

    // points separated from the peak by a masked region stay masked
    let support = (0..n)
        .map(|i| support[i] && u[i].len() == dim_el)
        .collect::<Vec<_>>();

    Ok(FactorizedState {
        grid: psi_full.grid.clone(),
        mass: psi_full.mass,
        time: psi_full.time,
        psi,
        u,
        support,
        masked_density: masked,
        floor,
    })
}

/// Complex nuclear velocity field V(x) = (v̂ψ)/ψ with v̂ = (p̂ − ħA)/M.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub v: Vec<C64>,
    pub mask: Vec<bool>,
}

/// Velocity field of a nuclear amplitude on the full grid; masked where
/// |ψ|² < floor · max|ψ|². `connection` is the Berry connection A(x) of the
/// electronic gauge ψ belongs to (pass zeros for a bare amplitude).
pub fn velocity_field(
    psi: &[C64],
    connection: Option<&[f64]>,
    mass: f64,
    dx: f64,
    floor: f64,
) -> VelocityField {
    let n = psi.len();
    let mut fft = Fft1D::new(n);
    let dpsi = fft.derivative(psi, dx, 1);
    let max_rho = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let mut v = vec![C64::new(0.0, 0.0); n];
    let mut mask = vec![false; n];
    for i in 0..n {
        let rho = psi[i].norm_sqr();
        if rho >= floor * max_rho && rho > 0.0 {
            let a = connection.map(|a| a[i]).unwrap_or(0.0);
            // (p̂ − A)ψ / (Mψ), p̂ = −i∂
            let pp = C64::new(0.0, -1.0) * dpsi[i] - psi[i] * a;
            v[i] = pp / (psi[i] * mass);
            mask[i] = true;
        }
    }
    VelocityField { v, mask }
}
