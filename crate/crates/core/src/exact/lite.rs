//! Local-in-time error of the adiabatic approximation and the short-time
//! non-adiabatic transition probability it predicts.

use super::fft::Fft1D;
use super::propagate::ExactPropagator;
use super::FullWavefunction;
use crate::error::CoreError;
use crate::geometry::{qgt_fd, EigenFrame};
use crate::models::ParametricHamiltonian;
use crate::C64;
use nalgebra::DVector;

/// Both estimates of ε² for an adiabatic state ψ(x)·u_n(x).
#[derive(Debug, Clone, Copy)]
pub struct LiteReport {
    /// Leading-order form ⟨ψ|Σ v̂ q v̂|ψ⟩.
    pub qgt_form: f64,
    /// Exact kinetic-fluctuation form ħ⁻²⟨ψ|[⟨T̂²⟩_n − ⟨T̂⟩_n²]|ψ⟩.
    pub exact_form: f64,
}

/// Evaluate ε² for the nuclear amplitude `psi` riding on frame level n.
pub fn lite_error(psi: &[C64], frame: &EigenFrame, mass: f64) -> Result<LiteReport, CoreError> {
    if frame.grid.dim() != 1 {
        return Err(CoreError::Propagation(
            "local-in-time error is evaluated on 1-D frames".into(),
        ));
    }
    let n = frame.grid.len();
    assert_eq!(psi.len(), n);
    let dx = frame.grid.axis(0).step;
    let dim_el = frame.vectors[0].len();
    let mut fft = Fft1D::new(n);

    // leading-order form: ∫ (v̂ψ)* q₁₁ (v̂ψ) dx with v̂ = (p̂ − A)/M
    let field = qgt_fd(frame, &crate::geometry::isotropic_inverse_mass(mass, 1));
    let dpsi = fft.derivative(psi, dx, 1);
    let mut qgt_form = 0.0;
    for i in 0..n {
        let vpsi = (C64::new(0.0, -1.0) * dpsi[i] - psi[i] * field.connection[i][0]) / mass;
        qgt_form += vpsi.norm_sqr() * field.qgt[i][(0, 0)].re;
    }
    qgt_form *= dx;

    // exact form: ∫ ‖Q T̂(ψ u_n)‖² dx with T̂ = −(1/2M)∂²
    let mut w: Vec<Vec<C64>> = vec![vec![C64::new(0.0, 0.0); n]; dim_el];
    for i in 0..n {
        for m in 0..dim_el {
            w[m][i] = psi[i] * frame.vectors[i][m];
        }
    }
    let t_w: Vec<Vec<C64>> = w
        .iter()
        .map(|c| {
            fft.derivative(c, dx, 2)
                .into_iter()
                .map(|z| z * C64::new(-0.5 / mass, 0.0))
                .collect()
        })
        .collect();
    let mut exact_form = 0.0;
    for i in 0..n {
        let tw = DVector::from_fn(dim_el, |m, _| t_w[m][i]);
        let on_frame = frame.vectors[i].dotc(&tw);
        exact_form += tw.norm_squared() - on_frame.norm_sqr();
    }
    exact_form *= dx;

    Ok(LiteReport {
        qgt_form,
        exact_form,
    })
}

/// Short-time transition probability from exact propagation against the
/// ε²·δt² law.
#[derive(Debug, Clone)]
pub struct SpawnReport {
    pub epsilon_sq: f64,
    pub delta_t: Vec<f64>,
    pub probability: Vec<f64>,
    /// Least-squares coefficient of P = C·δt² through the origin.
    pub quadratic_coefficient: f64,
}

impl SpawnReport {
    pub fn coefficient_ratio(&self) -> f64 {
        self.quadratic_coefficient / self.epsilon_sq
    }
}

/// Propagate the adiabatic construction ψ·u_n exactly and fit the early
/// population loss from level n against ε²·δt².
pub fn spawn_probability_check(
    h: &ParametricHamiltonian,
    frame: &EigenFrame,
    psi: &[C64],
    mass: f64,
    dt: f64,
    sample_steps: &[usize],
) -> Result<SpawnReport, CoreError> {
    let lite = lite_error(psi, frame, mass)?;
    let mut state = FullWavefunction::adiabatic(frame, mass, psi)?;
    let mut prop = ExactPropagator::new(h, &frame.grid, mass, dt)?;

    let max_step = *sample_steps.iter().max().unwrap_or(&0);
    let mut delta_t = Vec::new();
    let mut probability = Vec::new();
    for step in 1..=max_step {
        prop.step(&mut state)?;
        if sample_steps.contains(&step) {
            delta_t.push(step as f64 * dt);
            probability.push((1.0 - state.population_on(frame)).max(0.0));
        }
    }

    let num: f64 = delta_t
        .iter()
        .zip(&probability)
        .map(|(t, p)| t * t * p)
        .sum();
    let den: f64 = delta_t.iter().map(|t| t.powi(4)).sum();
    Ok(SpawnReport {
        epsilon_sq: lite.exact_form,
        delta_t,
        probability,
        quadratic_coefficient: num / den.max(1e-300),
    })
}
