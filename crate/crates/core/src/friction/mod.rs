//! Nonlinear propagation of the nuclear wavefunction alone under the
//! friction-dressed effective Hamiltonian.
//!
//! The dressing is the time-dependent vector-potential correction
//! δA(x,t) = Re(γ·X_t(x))/ħ built from the accumulated complex position
//! field X_t = ∫ V dt′, or its scalar (phase-potential) limit
//! δφ = ħγ M⁻¹ Im ln ψ. Both corrections are real fields, so every substep
//! is unitary and the norm is conserved without renormalization; energy
//! monotonically decreases for Re γ > 0.
//!
//! A 1-D vector potential is a gradient, so the frozen-field kinetic step
//! is applied exactly through the gauge wrap
//! e^{−iH dt} = e^{iΛ} e^{−i(p²/2M + V) dt} e^{−iΛ} with Λ′ = A⁰ + δA.
//! The nonlinearity is refreshed at half-step by one predictor–corrector
//! pass (predict with the current field, correct with the midpoint
//! average). X is initialized to zero when a run starts; the first few
//! steps therefore carry a gauge transient that cancels from mechanical
//! observables.

use crate::error::{CoreError, Warning};
use crate::exact::fft::Fft1D;
use crate::geometry::{isotropic_inverse_mass, qgt_fd, EigenFrame};
use crate::grid::NuclearGrid;
use crate::C64;
use std::collections::VecDeque;

/// Scalar friction coefficient: uniform or a per-grid-point field.
#[derive(Debug, Clone)]
pub enum GammaSource {
    Constant(C64),
    Field(Vec<C64>),
}

impl GammaSource {
    pub fn at(&self, i: usize) -> C64 {
        match self {
            GammaSource::Constant(g) => *g,
            GammaSource::Field(f) => f[i],
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let bad = |g: &C64| g.re < 0.0;
        let invalid = match self {
            GammaSource::Constant(g) => bad(g),
            GammaSource::Field(f) => f.iter().any(bad),
        };
        if invalid {
            return Err(CoreError::InvalidParameter {
                name: "gamma",
                reason: "Re γ must be >= 0 in scalar mode".into(),
            });
        }
        Ok(())
    }
}

/// Which dressing enters the propagator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrictionMode {
    /// Markov vector potential δA = Re(γ X_t)/ħ.
    MarkovDeltaA,
    /// Scalar phase potential δφ = ħγM⁻¹ Im ln ψ (Re γ only).
    Kostin,
    /// Memory-kernel vector potential
    /// δA = −2 Im(q₁₁ X) + (2/ħ) Re ∫ Γ(τ) X(t−τ) dτ.
    NonMarkov,
}

/// Run parameters for the friction propagator.
#[derive(Debug, Clone)]
pub struct FrictionRunConfig {
    pub mode: FrictionMode,
    pub dt: f64,
    pub n_steps: usize,
    /// Support floor relative to the density maximum (for V and phases).
    pub floor: f64,
    /// Record observables every this many steps (1 = every step).
    pub audit_stride: usize,
    /// Keep |ψ|² snapshots every this many steps (0 = none).
    pub snapshot_stride: usize,
}

impl Default for FrictionRunConfig {
    fn default() -> Self {
        Self {
            mode: FrictionMode::Kostin,
            dt: 0.01,
            n_steps: 1000,
            floor: 1e-10,
            audit_stride: 1,
            snapshot_stride: 0,
        }
    }
}

/// Nuclear wavefunction plus the static surfaces and gauge fields it moves
/// on, and the accumulated position field X(x,t).
#[derive(Debug, Clone)]
pub struct NuclearState {
    pub grid: NuclearGrid,
    pub mass: f64,
    pub time: f64,
    pub psi: Vec<C64>,
    /// X(x,t) = ∫ V dt′ per grid point (complex).
    pub x_field: Vec<C64>,
    /// Ground-surface energy E₀(x).
    pub e0: Vec<f64>,
    /// Static Berry connection A⁰(x).
    pub a0: Vec<f64>,
    /// Static scalar potential φ⁰(x).
    pub phi0: Vec<f64>,
    /// Metric g₁₁(x) (only used by the non-Markov dressing).
    pub metric: Vec<f64>,
    pub gamma: GammaSource,
}

impl NuclearState {
    pub fn new(
        grid: NuclearGrid,
        mass: f64,
        psi: Vec<C64>,
        e0: Vec<f64>,
        gamma: GammaSource,
    ) -> Result<Self, CoreError> {
        if grid.dim() != 1 {
            return Err(CoreError::Propagation("friction propagation is 1-D".into()));
        }
        let n = grid.len();
        if psi.len() != n || e0.len() != n {
            return Err(CoreError::Propagation(
                "field lengths must match grid".into(),
            ));
        }
        gamma.validate()?;
        Ok(Self {
            grid,
            mass,
            time: 0.0,
            psi,
            x_field: vec![C64::new(0.0, 0.0); n],
            e0,
            a0: vec![0.0; n],
            phi0: vec![0.0; n],
            metric: vec![0.0; n],
            gamma,
        })
    }

    /// Build the state from a gauged adiabatic frame: E₀, A⁰, φ⁰ and g come
    /// from the frame's geometric field.
    pub fn from_frame(
        frame: &EigenFrame,
        mass: f64,
        psi: Vec<C64>,
        gamma: GammaSource,
    ) -> Result<Self, CoreError> {
        let field = qgt_fd(frame, &isotropic_inverse_mass(mass, 1));
        let e0 = (0..frame.grid.len()).map(|i| frame.energy(i)).collect();
        let mut state = Self::new(frame.grid.clone(), mass, psi, e0, gamma)?;
        state.a0 = field.connection.iter().map(|a| a[0]).collect();
        state.phi0 = field.phi.clone();
        state.metric = (0..frame.grid.len())
            .map(|i| field.qgt[i][(0, 0)].re)
            .collect();
        Ok(state)
    }

    pub fn dx(&self) -> f64 {
        self.grid.axis(0).step
    }

    pub fn norm_sq(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx()
    }

    pub fn density_peak(&self) -> usize {
        self.psi
            .iter()
            .enumerate()
            .max_by(|(_, a), (_, b)| a.norm_sqr().partial_cmp(&b.norm_sqr()).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }

    pub fn support(&self, floor: f64) -> Vec<bool> {
        let max = self.psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
        self.psi
            .iter()
            .map(|z| z.norm_sqr() >= floor * max)
            .collect()
    }
}

/// Trapezoidal accumulation X += dt·(V_prev + V_now)/2 on the supported
/// points; masked points keep their last value.
pub fn accumulate_x(x_field: &mut [C64], v_prev: &[C64], v_now: &[C64], dt: f64, mask: &[bool]) {
    for i in 0..x_field.len() {
        if mask[i] {
            x_field[i] += (v_prev[i] + v_now[i]) * (0.5 * dt);
        }
    }
}

/// Markov vector-potential correction δA(x) = Re(γ X)/ħ.
pub fn delta_a(state: &NuclearState) -> Vec<f64> {
    (0..state.psi.len())
        .map(|i| (state.gamma.at(i) * state.x_field[i]).re)
        .collect()
}

/// Kostin phase potential δφ = ħ(Re γ)M⁻¹·S(x) with S the phase of ψ
/// unwrapped along x from the density maximum and zeroed there. Masked
/// regions freeze the potential at its last supported value.
pub fn kostin_potential(state: &NuclearState, floor: f64) -> (Vec<f64>, Vec<Warning>) {
    let n = state.psi.len();
    let support = state.support(floor);
    let peak = state.density_peak();
    let mut warnings = Vec::new();
    let mut s = vec![0.0; n];
    let s_peak = state.psi[peak].arg();
    for dir in [1isize, -1] {
        let mut prev_s = 0.0;
        let mut crossed_node = false;
        let mut i = peak as isize + dir;
        while i >= 0 && (i as usize) < n {
            let idx = i as usize;
            if !support[idx] {
                if !crossed_node && (idx > 0 && idx < n - 1) {
                    crossed_node = true;
                    warnings.push(Warning::PhaseUnwrap {
                        point: state.grid.point(idx)[0],
                    });
                }
                s[idx] = prev_s; // frozen continuation
            } else {
                let raw = state.psi[idx].arg() - s_peak;
                let jump = ((prev_s - raw) / (2.0 * std::f64::consts::PI)).round();
                let val = raw + 2.0 * std::f64::consts::PI * jump;
                s[idx] = val;
                prev_s = val;
            }
            i += dir;
        }
    }
    let scale = match &state.gamma {
        GammaSource::Constant(g) => g.re,
        GammaSource::Field(_) => {
            // Kostin form assumes uniform γ; use the value at the peak.
            state.gamma.at(peak).re
        }
    } / state.mass;
    (s.iter().map(|v| v * scale).collect(), warnings)
}

/// Memory kernel samples Γ(τ_j) = Γ(j·tau_step), j = 0..
#[derive(Debug, Clone)]
pub struct MemoryKernel {
    pub tau_step: f64,
    pub samples: Vec<C64>,
}

impl MemoryKernel {
    /// Fraction of the peak magnitude remaining at the last stored τ.
    pub fn tail_fraction(&self) -> f64 {
        let peak = self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        match self.samples.last() {
            Some(z) if peak > 0.0 => z.norm() / peak,
            _ => 0.0,
        }
    }
}

/// Memory friction force F(x) = −2 Re ∫₀^∞ Γ(τ) V(x, t−τ) dτ by trapezoid
/// over the stored velocity history (`v_history[j]` is V at t − j·tau_step).
pub fn non_markov_force(
    kernel: &MemoryKernel,
    v_history: &VecDeque<Vec<C64>>,
) -> (Vec<f64>, Vec<Warning>) {
    let mut warnings = Vec::new();
    let depth = kernel.samples.len().min(v_history.len());
    if kernel.tail_fraction() > 0.01 && v_history.len() >= kernel.samples.len() {
        warnings.push(Warning::HistoryTooShort {
            tail_fraction: kernel.tail_fraction(),
        });
    }
    if depth == 0 {
        return (Vec::new(), warnings);
    }
    if v_history.len() < kernel.samples.len() {
        warnings.push(Warning::HistoryTooShort {
            tail_fraction: 1.0 - depth as f64 / kernel.samples.len() as f64,
        });
    }
    let n = v_history[0].len();
    let mut force = vec![0.0; n];
    for i in 0..n {
        let mut acc = C64::new(0.0, 0.0);
        for j in 0..depth {
            let w = if j == 0 || j == depth - 1 { 0.5 } else { 1.0 };
            acc += kernel.samples[j] * v_history[j][i] * w;
        }
        force[i] = -2.0 * (acc * kernel.tau_step).re;
    }
    (force, warnings)
}

/// Observable rows of a friction run (mechanical momentum ⟨p̂ − ħA_tot⟩).
#[derive(Debug, Clone, Default)]
pub struct FrictionSeries {
    pub time: Vec<f64>,
    pub norm_sq: Vec<f64>,
    pub energy: Vec<f64>,
    pub position: Vec<f64>,
    pub momentum: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct FrictionTrajectory {
    pub series: FrictionSeries,
    /// (t, |ψ|²) snapshots when requested.
    pub densities: Vec<(f64, Vec<f64>)>,
    pub warnings: Vec<Warning>,
}

/// Max energy increase per audited step (0 for a perfectly monotone run).
pub fn max_energy_increase(series: &FrictionSeries) -> f64 {
    series
        .energy
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max)
}

pub struct FrictionPropagator {
    fft: Fft1D,
    kinetic_half: Vec<C64>,
    wavenumbers: Vec<f64>,
}

impl FrictionPropagator {
    pub fn new(n: usize, dx: f64, mass: f64, dt: f64) -> Self {
        let wavenumbers = Fft1D::wavenumbers(n, dx);
        let kinetic_half = wavenumbers
            .iter()
            .map(|&k| C64::from_polar(1.0, -0.5 * k * k / mass * 0.5 * dt))
            .collect();
        Self {
            fft: Fft1D::new(n),
            kinetic_half,
            wavenumbers,
        }
    }

    /// Complex velocity field V = [(p̂ − A_tot)ψ]/(Mψ) on the support.
    fn velocity(&mut self, psi: &[C64], a_tot: &[f64], mass: f64, mask: &[bool]) -> Vec<C64> {
        let n = psi.len();
        let mut dpsi = psi.to_vec();
        self.fft.forward(&mut dpsi);
        for (z, &k) in dpsi.iter_mut().zip(&self.wavenumbers) {
            *z *= C64::new(0.0, k);
        }
        self.fft.inverse(&mut dpsi);
        let mut v = vec![C64::new(0.0, 0.0); n];
        for i in 0..n {
            if mask[i] && psi[i].norm_sqr() > 0.0 {
                let p_psi = C64::new(0.0, -1.0) * dpsi[i] - psi[i] * a_tot[i];
                v[i] = p_psi / (psi[i] * mass);
            }
        }
        v
    }

    /// One Strang step with the scalar potential `pot` and the full vector
    /// potential `a_tot` frozen; the vector potential is applied exactly by
    /// the gauge wrap (1-D: every A is a gradient).
    fn frozen_step(&mut self, psi: &mut [C64], pot: &[f64], a_tot: &[f64], dx: f64, dt: f64) {
        let n = psi.len();
        // Λ(x) = ∫ A dx by cumulative trapezoid
        let mut lambda = vec![0.0; n];
        for i in 1..n {
            lambda[i] = lambda[i - 1] + 0.5 * dx * (a_tot[i - 1] + a_tot[i]);
        }
        for i in 0..n {
            psi[i] *= C64::from_polar(1.0, -lambda[i]);
        }
        self.fft.forward(psi);
        for (z, f) in psi.iter_mut().zip(&self.kinetic_half) {
            *z *= f;
        }
        self.fft.inverse(psi);
        for i in 0..n {
            psi[i] *= C64::from_polar(1.0, -pot[i] * dt);
        }
        self.fft.forward(psi);
        for (z, f) in psi.iter_mut().zip(&self.kinetic_half) {
            *z *= f;
        }
        self.fft.inverse(psi);
        for i in 0..n {
            psi[i] *= C64::from_polar(1.0, lambda[i]);
        }
    }

    /// E = ⟨ψ|π̂²/2M + E₀ + φ⁰|ψ⟩ with π̂ = p̂ − A_tot.
    fn mechanical_energy(&mut self, state: &NuclearState, a_tot: &[f64]) -> f64 {
        let n = state.psi.len();
        let dx = state.dx();
        let mut dpsi = state.psi.clone();
        self.fft.forward(&mut dpsi);
        for (z, &k) in dpsi.iter_mut().zip(&self.wavenumbers) {
            *z *= C64::new(0.0, k);
        }
        self.fft.inverse(&mut dpsi);
        let mut e = 0.0;
        for i in 0..n {
            let pi_psi = C64::new(0.0, -1.0) * dpsi[i] - state.psi[i] * a_tot[i];
            e += pi_psi.norm_sqr() / (2.0 * state.mass);
            e += (state.e0[i] + state.phi0[i]) * state.psi[i].norm_sqr();
        }
        e * dx
    }

    fn mechanical_momentum(&mut self, state: &NuclearState, a_tot: &[f64]) -> f64 {
        let n = state.psi.len();
        let mut dpsi = state.psi.clone();
        self.fft.forward(&mut dpsi);
        for (z, &k) in dpsi.iter_mut().zip(&self.wavenumbers) {
            *z *= C64::new(0.0, k);
        }
        self.fft.inverse(&mut dpsi);
        let mut p = 0.0;
        for i in 0..n {
            let pi_psi = C64::new(0.0, -1.0) * dpsi[i] - state.psi[i] * a_tot[i];
            p += (state.psi[i].conj() * pi_psi).re;
        }
        p * state.dx() / state.norm_sq()
    }
}

/// Dressing fields of one predictor/corrector evaluation.
fn dressing(
    state: &NuclearState,
    mode: FrictionMode,
    kernel: Option<&MemoryKernel>,
    x_history: &VecDeque<Vec<C64>>,
    floor: f64,
    warnings: &mut Vec<Warning>,
) -> (Vec<f64>, Vec<f64>) {
    let n = state.psi.len();
    match mode {
        FrictionMode::MarkovDeltaA => (delta_a(state), vec![0.0; n]),
        FrictionMode::Kostin => {
            let (dphi, w) = kostin_potential(state, floor);
            warnings.extend(w);
            (vec![0.0; n], dphi)
        }
        FrictionMode::NonMarkov => {
            let kernel = kernel.expect("non-Markov mode requires a memory kernel");
            let mut da = vec![0.0; n];
            // −2 Im(q₁₁ X): q₁₁ = g is real in 1-D
            for i in 0..n {
                da[i] = -2.0 * state.metric[i] * state.x_field[i].im;
            }
            let depth = kernel.samples.len().min(x_history.len());
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..depth {
                    let w = if j == 0 || j == depth - 1 { 0.5 } else { 1.0 };
                    acc += kernel.samples[j] * x_history[j][i] * w;
                }
                da[i] += 2.0 * (acc * kernel.tau_step).re;
            }
            (da, vec![0.0; n])
        }
    }
}

/// Propagate the friction-dressed nuclear wavefunction.
pub fn propagate_friction(
    mut state: NuclearState,
    config: &FrictionRunConfig,
    kernel: Option<&MemoryKernel>,
) -> Result<(NuclearState, FrictionTrajectory), CoreError> {
    if !(config.dt > 0.0) {
        return Err(CoreError::Propagation("dt must be > 0".into()));
    }
    if config.mode == FrictionMode::NonMarkov {
        let k = kernel.ok_or_else(|| {
            CoreError::Propagation("non-Markov mode requires memory-kernel samples".into())
        })?;
        if (k.tau_step - config.dt).abs() > 1e-12 {
            return Err(CoreError::Propagation(
                "memory-kernel tau grid must match the propagation dt".into(),
            ));
        }
    }
    let n = state.psi.len();
    let dx = state.dx();
    let dt = config.dt;
    let mut prop = FrictionPropagator::new(n, dx, state.mass, dt);
    let mut warnings: Vec<Warning> = Vec::new();
    let mut series = FrictionSeries::default();
    let mut densities = Vec::new();

    // X history for the memory dressing (newest first), X(t−j·dt)
    let mut x_history: VecDeque<Vec<C64>> = VecDeque::new();
    if config.mode == FrictionMode::NonMarkov {
        x_history.push_front(state.x_field.clone());
    }

    let mask0 = state.support(config.floor);
    let (da0, _) = dressing(
        &state,
        config.mode,
        kernel,
        &x_history,
        config.floor,
        &mut warnings,
    );
    let a_tot0: Vec<f64> = state.a0.iter().zip(&da0).map(|(a, d)| a + d).collect();
    let mut v_prev = prop.velocity(&state.psi, &a_tot0, state.mass, &mask0);

    let record = |prop: &mut FrictionPropagator,
                  st: &NuclearState,
                  a_tot: &[f64],
                  series: &mut FrictionSeries,
                  densities: &mut Vec<(f64, Vec<f64>)>,
                  step: usize| {
        if step % config.audit_stride.max(1) == 0 {
            series.time.push(st.time);
            series.norm_sq.push(st.norm_sq());
            series.energy.push(prop.mechanical_energy(st, a_tot));
            series.position.push({
                let rho_sum: f64 = st.psi.iter().map(|z| z.norm_sqr()).sum();
                st.psi
                    .iter()
                    .enumerate()
                    .map(|(i, z)| st.grid.point(i)[0] * z.norm_sqr())
                    .sum::<f64>()
                    / rho_sum
            });
            series.momentum.push(prop.mechanical_momentum(st, a_tot));
        }
        if config.snapshot_stride > 0 && step % config.snapshot_stride == 0 {
            densities.push((st.time, st.psi.iter().map(|z| z.norm_sqr()).collect()));
        }
    };

    record(&mut prop, &state, &a_tot0, &mut series, &mut densities, 0);

    for step in 1..=config.n_steps {
        let mask = state.support(config.floor);
        let masked: f64 = {
            let rho_tot: f64 = state.psi.iter().map(|z| z.norm_sqr()).sum();
            state
                .psi
                .iter()
                .zip(&mask)
                .filter(|(_, &m)| !m)
                .map(|(z, _)| z.norm_sqr())
                .sum::<f64>()
                / rho_tot
        };
        if masked > 1e-6 {
            warnings.push(Warning::Node {
                masked_density: masked,
            });
        }

        // predictor: freeze the dressing at t
        let (da_t, dphi_t) = dressing(
            &state,
            config.mode,
            kernel,
            &x_history,
            config.floor,
            &mut warnings,
        );
        let a_t: Vec<f64> = state.a0.iter().zip(&da_t).map(|(a, d)| a + d).collect();
        let pot_t: Vec<f64> = (0..n)
            .map(|i| state.e0[i] + state.phi0[i] + dphi_t[i])
            .collect();

        let psi_in = state.psi.clone();
        let x_in = state.x_field.clone();
        prop.frozen_step(&mut state.psi, &pot_t, &a_t, dx, dt);

        // advance X with the predicted velocity, re-evaluate the dressing
        let v_star = prop.velocity(&state.psi, &a_t, state.mass, &mask);
        accumulate_x(&mut state.x_field, &v_prev, &v_star, dt, &mask);
        let (da_s, dphi_s) = dressing(
            &state,
            config.mode,
            kernel,
            &x_history,
            config.floor,
            &mut warnings,
        );

        // corrector: midpoint average of the dressing, re-run from ψ(t)
        let a_mid: Vec<f64> = (0..n)
            .map(|i| state.a0[i] + 0.5 * (da_t[i] + da_s[i]))
            .collect();
        let pot_mid: Vec<f64> = (0..n)
            .map(|i| state.e0[i] + state.phi0[i] + 0.5 * (dphi_t[i] + dphi_s[i]))
            .collect();
        state.psi = psi_in;
        state.x_field = x_in;
        prop.frozen_step(&mut state.psi, &pot_mid, &a_mid, dx, dt);
        state.time += dt;

        let v_now = prop.velocity(&state.psi, &a_mid, state.mass, &mask);
        accumulate_x(&mut state.x_field, &v_prev, &v_now, dt, &mask);
        v_prev = v_now;
        if config.mode == FrictionMode::NonMarkov {
            x_history.push_front(state.x_field.clone());
            let cap = kernel.map(|k| k.samples.len()).unwrap_or(1).max(1);
            while x_history.len() > cap {
                x_history.pop_back();
            }
        }

        let (da_rec, _) = dressing(
            &state,
            config.mode,
            kernel,
            &x_history,
            config.floor,
            &mut warnings,
        );
        let a_rec: Vec<f64> = state.a0.iter().zip(&da_rec).map(|(a, d)| a + d).collect();
        record(&mut prop, &state, &a_rec, &mut series, &mut densities, step);
    }

    // deduplicate repeated warnings and cap the list; long runs can emit
    // one per step near a persistent node
    warnings.dedup();
    if warnings.len() > 64 {
        let dropped = warnings.len() - 64;
        warnings.truncate(64);
        warnings.push(Warning::Truncated { dropped });
    }
    Ok((
        state,
        FrictionTrajectory {
            series,
            densities,
            warnings,
        },
    ))
}
