//! Pointwise derived fields of a full wavefunction in the density gauge.
//!
//! Every analysis quantity here is gauge invariant or gauge tensorial, so
//! the gauge of the factorization is free. The density gauge ψ = √ρ (real,
//! ≥ 0) makes all spatial derivatives computable from spectral derivatives
//! of the smooth full wavefunction plus pointwise algebra:
//!
//!   ∂u  = (∂Ψ − (∂√ρ)u)/√ρ,   ∂²u = (∂²Ψ − (∂²√ρ)u − 2(∂√ρ)∂u)/√ρ,
//!   A   = Re i⟨u|∂u⟩,          ∂A  = Re i(⟨∂u|∂u⟩ + ⟨u|∂²u⟩),
//!
//! avoiding finite differences of masked arrays entirely. Off-support
//! points (ρ below the floor) are masked, not extrapolated.

use super::fft::Fft1D;
use super::FullWavefunction;
use crate::error::CoreError;
use crate::grid::NuclearGrid;
use crate::models::ParametricHamiltonian;
use crate::C64;
use nalgebra::DVector;

#[derive(Debug, Clone)]
pub struct DerivedFields {
    pub grid: NuclearGrid,
    pub mass: f64,
    pub time: f64,
    pub support: Vec<bool>,
    /// Fraction of the density carried by masked points.
    pub masked_density: f64,
    pub rho: Vec<f64>,
    /// ψ = √ρ in this gauge.
    pub sqrt_rho: Vec<f64>,
    pub u: Vec<DVector<C64>>,
    pub du: Vec<DVector<C64>>,
    pub d2u: Vec<DVector<C64>>,
    /// Berry connection A(x) of the density gauge.
    pub a: Vec<f64>,
    pub da: Vec<f64>,
    /// Complex velocity field V = (v̂ψ)/ψ, v̂ = (p̂ − A)/M.
    pub v: Vec<C64>,
    /// Q-projected derivatives and the symmetrized second covariant object.
    pub qdu: Vec<DVector<C64>>,
    pub qd2u: Vec<DVector<C64>>,
    pub d11u: Vec<DVector<C64>>,
    /// Metric g₁₁ = ⟨∂u|Q|∂u⟩ (real in 1-D).
    pub g: Vec<f64>,
    /// ∂_x g₁₁, from pointwise algebra (no finite differences).
    pub dg: Vec<f64>,
    pub e_el: Vec<f64>,
    pub h_u: Vec<DVector<C64>>,
    pub h_prime_u: Vec<DVector<C64>>,
    /// ΔE_el(x) = ‖(H−E_el)u‖.
    pub delta_e: Vec<f64>,
    /// (∂_x H) u.
    pub dh_u: Vec<DVector<C64>>,
    /// ⟨u|(∂_x H)|u⟩.
    pub dh_diag: Vec<f64>,
}

impl DerivedFields {
    pub fn from_wavefunction(
        psi_full: &FullWavefunction,
        h: &ParametricHamiltonian,
        floor: f64,
    ) -> Result<Self, CoreError> {
        let grid = psi_full.grid.clone();
        let n = grid.len();
        let dx = grid.axis(0).step;
        let dim_el = psi_full.dim_el();
        let mass = psi_full.mass;
        let mut fft = Fft1D::new(n);

        let dpsi: Vec<Vec<C64>> = psi_full
            .components
            .iter()
            .map(|c| fft.derivative(c, dx, 1))
            .collect();
        let d2psi: Vec<Vec<C64>> = psi_full
            .components
            .iter()
            .map(|c| fft.derivative(c, dx, 2))
            .collect();

        let rho = psi_full.density();
        let rho_max = rho.iter().cloned().fold(0.0, f64::max);
        if rho_max <= 0.0 {
            return Err(CoreError::EmptySupport { floor });
        }
        let support: Vec<bool> = rho.iter().map(|&r| r >= floor * rho_max).collect();
        let masked_density = rho
            .iter()
            .zip(&support)
            .filter(|(_, &s)| !s)
            .map(|(r, _)| r)
            .sum::<f64>()
            * dx
            / psi_full.norm_sq();

        let zerov = || DVector::<C64>::zeros(dim_el);
        let mut fields = Self {
            grid,
            mass,
            time: psi_full.time,
            support: support.clone(),
            masked_density,
            rho: rho.clone(),
            sqrt_rho: vec![0.0; n],
            u: vec![zerov(); n],
            du: vec![zerov(); n],
            d2u: vec![zerov(); n],
            a: vec![0.0; n],
            da: vec![0.0; n],
            v: vec![C64::new(0.0, 0.0); n],
            qdu: vec![zerov(); n],
            qd2u: vec![zerov(); n],
            d11u: vec![zerov(); n],
            g: vec![0.0; n],
            dg: vec![0.0; n],
            e_el: vec![0.0; n],
            h_u: vec![zerov(); n],
            h_prime_u: vec![zerov(); n],
            delta_e: vec![0.0; n],
            dh_u: vec![zerov(); n],
            dh_diag: vec![0.0; n],
        };

        for i in 0..n {
            if !support[i] {
                continue;
            }
            let x = fields.grid.point(i);
            let s = rho[i].sqrt();
            // ∂ρ = 2 Re Σ Ψ̄ ∂Ψ, ∂²ρ = 2 Σ (|∂Ψ|² + Re Ψ̄ ∂²Ψ)
            let mut drho = 0.0;
            let mut d2rho = 0.0;
            for m in 0..dim_el {
                let p = psi_full.components[m][i];
                drho += 2.0 * (p.conj() * dpsi[m][i]).re;
                d2rho += 2.0 * (dpsi[m][i].norm_sqr() + (p.conj() * d2psi[m][i]).re);
            }
            let ds = drho / (2.0 * s);
            let d2s = (d2rho - 2.0 * ds * ds) / (2.0 * s);

            let u = DVector::from_fn(dim_el, |m, _| psi_full.components[m][i] / s);
            let du = DVector::from_fn(dim_el, |m, _| (dpsi[m][i] - ds * u[m]) / s);
            let d2u = DVector::from_fn(dim_el, |m, _| {
                (d2psi[m][i] - d2s * u[m] - 2.0 * ds * du[m]) / s
            });

            let u_du = u.dotc(&du);
            let a = (C64::i() * u_du).re;
            let da = (C64::i() * (du.dotc(&du) + u.dotc(&d2u))).re;
            // ψ = √ρ real: V = (−i∂ψ − Aψ)/(Mψ)
            let v = (C64::new(0.0, -ds) - C64::new(a * s, 0.0)) / C64::new(mass * s, 0.0);

            let qdu = &du - &u * u_du;
            let u_d2u = u.dotc(&d2u);
            let qd2u = &d2u - &u * u_d2u;
            let d11u = &qdu * C64::new(0.0, 2.0 * a) + &qd2u;
            let g = qdu.dotc(&qdu).re;
            // ∂g = 2Re⟨∂²u|∂u⟩ − 2Re[⟨∂u|u⟩(⟨∂u|∂u⟩+⟨u|∂²u⟩)]
            let dg = 2.0 * (d2u.dotc(&du).re) - 2.0 * (u_du.conj() * (du.dotc(&du) + u_d2u)).re;

            let hm = h.eval(&x);
            let h_u = &hm * &u;
            let e_el = u.dotc(&h_u).re;
            let h_prime_u = &h_u - &u * C64::new(e_el, 0.0);
            let delta_e = h_prime_u.norm();
            let gm = h.grad(&x, 0)?;
            let dh_u = &gm * &u;
            let dh_diag = u.dotc(&dh_u).re;

            fields.sqrt_rho[i] = s;
            fields.u[i] = u;
            fields.du[i] = du;
            fields.d2u[i] = d2u;
            fields.a[i] = a;
            fields.da[i] = da;
            fields.v[i] = v;
            fields.qdu[i] = qdu;
            fields.qd2u[i] = qd2u;
            fields.d11u[i] = d11u;
            fields.g[i] = g;
            fields.dg[i] = dg;
            fields.e_el[i] = e_el;
            fields.h_u[i] = h_u;
            fields.h_prime_u[i] = h_prime_u;
            fields.delta_e[i] = delta_e;
            fields.dh_u[i] = dh_u;
            fields.dh_diag[i] = dh_diag;
        }
        Ok(fields)
    }

    /// ∫ f ρ dx / ∫ ρ dx restricted to the support.
    pub fn density_average(&self, f: &[f64]) -> f64 {
        let dx = self.grid.axis(0).step;
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..self.rho.len() {
            if self.support[i] {
                num += f[i] * self.rho[i];
                den += self.rho[i];
            }
        }
        num * dx / (den * dx)
    }
}
