//! Force decomposition of the exact dynamics and its sum rules.
//!
//! Per support point (1-D, ħ = 1, ξ = 1/M):
//!
//!   F_BO   = −∂_x⟨u|H_el|u⟩
//!   F_el,c = 2 g₁₁ Im V − (2/M) Re⟨∂u|D₁₁u⟩
//!   F_mag,c ≡ 0   (B_kj antisymmetric ⇒ zero with one coordinate)
//!   F_NBO  = 2 Re⟨∂u|Q(H_el−E_el)|u⟩, bounded by 2·ΔE_el·√g₁₁
//!   F_ED   = −2 Im⟨∂u|Q|∂_t u⟩
//!
//! F_ED is evaluated from the electronic equation of motion
//! (Q∂_t u = −i(Q H_el u + `K[ψ]u`)) and, when adjacent snapshots are
//! available, also by centered time differences; the gap between the two
//! routes is reported, not asserted.

use super::fields::DerivedFields;
use super::FullWavefunction;
use crate::error::{CoreError, Warning};
use crate::models::ParametricHamiltonian;
use crate::C64;

#[derive(Debug, Clone)]
pub struct ForceBreakdown {
    pub support: Vec<bool>,
    pub f_bo: Vec<f64>,
    pub f_el_c: Vec<f64>,
    pub f_mag_c: Vec<f64>,
    pub f_nbo: Vec<f64>,
    /// Electron-dynamics force from the equation-of-motion route.
    pub f_ed: Vec<f64>,
    /// Same force from centered differences of the factorized snapshots.
    pub f_ed_fd: Option<Vec<f64>>,
    /// ΔE_el(x) and g₁₁(x) entering the NBO bound.
    pub delta_e: Vec<f64>,
    pub g: Vec<f64>,
    pub masked_density: f64,
    /// Density-weighted averages over the support.
    pub avg_f_bo_abs: f64,
    pub avg_f_el_c: f64,
    pub avg_f_mag_c: f64,
    pub avg_f_nbo: f64,
    pub avg_f_ed: f64,
}

impl ForceBreakdown {
    /// Worst violation of |F_NBO| ≤ 2 ΔE_el √g₁₁ over the support
    /// (≤ 0 when the bound holds everywhere).
    pub fn nbo_bound_violation(&self) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.support.len() {
            if self.support[i] {
                let bound = 2.0 * self.delta_e[i] * self.g[i].max(0.0).sqrt();
                worst = worst.max(self.f_nbo[i].abs() - bound);
            }
        }
        worst
    }
}

/// Decompose the force along the nuclear coordinate. `neighbors` supplies
/// (Ψ(t−Δ), Ψ(t+Δ)) for the finite-difference route to F_ED.
pub fn force_breakdown(
    psi: &FullWavefunction,
    h: &ParametricHamiltonian,
    floor: f64,
    neighbors: Option<(&FullWavefunction, &FullWavefunction)>,
) -> Result<ForceBreakdown, CoreError> {
    let f = DerivedFields::from_wavefunction(psi, h, floor)?;
    let n = f.grid.len();
    let mass = f.mass;

    let mut out = ForceBreakdown {
        support: f.support.clone(),
        f_bo: vec![0.0; n],
        f_el_c: vec![0.0; n],
        f_mag_c: vec![0.0; n],
        f_nbo: vec![0.0; n],
        f_ed: vec![0.0; n],
        f_ed_fd: None,
        delta_e: f.delta_e.clone(),
        g: f.g.clone(),
        masked_density: f.masked_density,
        avg_f_bo_abs: 0.0,
        avg_f_el_c: 0.0,
        avg_f_mag_c: 0.0,
        avg_f_nbo: 0.0,
        avg_f_ed: 0.0,
    };

    for i in 0..n {
        if !f.support[i] {
            continue;
        }
        // ∂E_el = 2Re⟨∂u|Hu⟩ + ⟨u|(∂H)u⟩
        out.f_bo[i] = -(2.0 * f.du[i].dotc(&f.h_u[i]).re + f.dh_diag[i]);
        out.f_el_c[i] = 2.0 * f.g[i] * f.v[i].im - (2.0 / mass) * f.qdu[i].dotc(&f.d11u[i]).re;
        out.f_nbo[i] = 2.0 * f.qdu[i].dotc(&f.h_prime_u[i]).re;
        // Q∂_t u = −i[QHu + K[ψ]u],  K[ψ]u = −iV Q∂u − (1/2M) D₁₁u
        let k_u =
            &f.qdu[i] * (C64::new(0.0, -1.0) * f.v[i]) - &f.d11u[i] * C64::new(0.5 / mass, 0.0);
        let q_dtu = (&f.h_prime_u[i] + &k_u) * C64::new(0.0, -1.0);
        out.f_ed[i] = -2.0 * f.qdu[i].dotc(&q_dtu).im;
    }

    if let Some((prev, next)) = neighbors {
        let fp = DerivedFields::from_wavefunction(prev, h, floor)?;
        let fnx = DerivedFields::from_wavefunction(next, h, floor)?;
        let dt = 0.5 * (next.time - prev.time);
        let mut fd = vec![0.0; n];
        for i in 0..n {
            if !(f.support[i] && fp.support[i] && fnx.support[i]) {
                continue;
            }
            let dtu = (&fnx.u[i] - &fp.u[i]) / C64::new(2.0 * dt, 0.0);
            let q_dtu = &dtu - &f.u[i] * f.u[i].dotc(&dtu);
            fd[i] = -2.0 * f.qdu[i].dotc(&q_dtu).im;
        }
        out.f_ed_fd = Some(fd);
    }

    out.avg_f_bo_abs = f.density_average(&out.f_bo.iter().map(|v| v.abs()).collect::<Vec<_>>());
    out.avg_f_el_c = f.density_average(&out.f_el_c);
    out.avg_f_mag_c = f.density_average(&out.f_mag_c);
    out.avg_f_nbo = f.density_average(&out.f_nbo);
    out.avg_f_ed = f.density_average(&out.f_ed);
    Ok(out)
}

/// Vanishing-average theorem report: ⟨F_el,c⟩ and ⟨F_mag,c⟩ measured against
/// ⟨|F_BO|⟩.
#[derive(Debug, Clone)]
pub struct AveragedForceReport {
    pub avg_f_el_c: f64,
    pub avg_f_mag_c: f64,
    pub avg_f_bo_abs: f64,
    pub masked_density: f64,
    pub warnings: Vec<Warning>,
}

impl AveragedForceReport {
    pub fn rel_el(&self) -> f64 {
        self.avg_f_el_c.abs() / self.avg_f_bo_abs.max(1e-300)
    }

    pub fn rel_mag(&self) -> f64 {
        self.avg_f_mag_c.abs() / self.avg_f_bo_abs.max(1e-300)
    }
}

pub fn averaged_force_check(breakdown: &ForceBreakdown) -> AveragedForceReport {
    let mut warnings = Vec::new();
    if breakdown.masked_density > 1e-6 {
        warnings.push(Warning::MaskedDensity {
            masked_density: breakdown.masked_density,
        });
    }
    AveragedForceReport {
        avg_f_el_c: breakdown.avg_f_el_c,
        avg_f_mag_c: breakdown.avg_f_mag_c,
        avg_f_bo_abs: breakdown.avg_f_bo_abs,
        masked_density: breakdown.masked_density,
        warnings,
    }
}

/// Ehrenfest-theorem report on a stored trajectory.
#[derive(Debug, Clone)]
pub struct EhrenfestReport {
    /// Interior snapshot times.
    pub time: Vec<f64>,
    /// d⟨p̂⟩/dt by centered differences.
    pub dpdt: Vec<f64>,
    /// ⟨Ψ|−∂_x H_el|Ψ⟩.
    pub microscopic_force: Vec<f64>,
    /// ⟨F_BO + F_el + F_mag + F_ED⟩ in factorized variables.
    pub factorized_force: Vec<f64>,
    pub max_residual: f64,
    pub max_residual_factorized: f64,
}

/// Compare d⟨p̂⟩/dt against the dressed microscopic force and against the
/// factorized-variable force sum, at every interior snapshot. The time
/// derivative is taken from the per-step observable series (spacing dt),
/// so its truncation error stays far below the force scale even when
/// snapshots are stored sparsely.
pub fn ehrenfest_check(
    traj: &super::propagate::Trajectory,
    h: &ParametricHamiltonian,
    floor: f64,
) -> Result<EhrenfestReport, CoreError> {
    let snapshots = &traj.snapshots;
    assert!(snapshots.len() >= 3, "need at least 3 stored times");
    let n = snapshots[0].grid.len();
    let dx = snapshots[0].dx();
    let series = &traj.series;

    let grad: Vec<nalgebra::DMatrix<C64>> = (0..n)
        .map(|i| h.grad(&snapshots[0].grid.point(i), 0))
        .collect::<Result<_, _>>()?;

    let micro: Vec<f64> = snapshots
        .iter()
        .map(|s| {
            let mut acc = 0.0;
            for i in 0..n {
                let v = nalgebra::DVector::from_fn(s.dim_el(), |m, _| s.components[m][i]);
                acc -= (v.adjoint() * &grad[i] * &v)[(0, 0)].re;
            }
            acc * dx
        })
        .collect();

    let t0 = series.time[0];
    let series_index = |t: f64| -> Option<usize> {
        let i = ((t - t0) / traj.dt).round() as usize;
        (i > 0 && i + 1 < series.time.len()).then_some(i)
    };

    let mut time = Vec::new();
    let mut dpdt = Vec::new();
    let mut f_micro = Vec::new();
    let mut f_fact = Vec::new();
    let mut max_res = 0.0f64;
    let mut max_res_fact = 0.0f64;

    for w in 1..snapshots.len() - 1 {
        let Some(si) = series_index(snapshots[w].time) else {
            continue;
        };
        let d = (series.momentum[si + 1] * series.norm_sq[si + 1]
            - series.momentum[si - 1] * series.norm_sq[si - 1])
            / (series.time[si + 1] - series.time[si - 1]);
        time.push(snapshots[w].time);
        dpdt.push(d);
        f_micro.push(micro[w]);
        max_res = max_res.max((d - micro[w]).abs());

        // factorized route: ⟨F_BO⟩ + ⟨F_el⟩ + ⟨F_ED(FD)⟩ (F_mag ≡ 0 in 1-D)
        let t_prev = snapshots[w - 1].time;
        let t_next = snapshots[w + 1].time;
        let f = DerivedFields::from_wavefunction(&snapshots[w], h, floor)?;
        let fp = DerivedFields::from_wavefunction(&snapshots[w - 1], h, floor)?;
        let fnx = DerivedFields::from_wavefunction(&snapshots[w + 1], h, floor)?;
        let dt = 0.5 * (t_next - t_prev);
        let mut total = vec![0.0; n];
        for i in 0..n {
            if !(f.support[i] && fp.support[i] && fnx.support[i]) {
                continue;
            }
            let f_bo = -(2.0 * f.du[i].dotc(&f.h_u[i]).re + f.dh_diag[i]);
            let f_el = -f.dg[i] / (2.0 * f.mass);
            let dtu = (&fnx.u[i] - &fp.u[i]) / C64::new(2.0 * dt, 0.0);
            let q_dtu = &dtu - &f.u[i] * f.u[i].dotc(&dtu);
            let f_ed = -2.0 * f.qdu[i].dotc(&q_dtu).im;
            total[i] = f_bo + f_el + f_ed;
        }
        let avg = f.density_average(&total);
        f_fact.push(avg);
        max_res_fact = max_res_fact.max((d - avg).abs());
    }

    Ok(EhrenfestReport {
        time,
        dpdt,
        microscopic_force: f_micro,
        factorized_force: f_fact,
        max_residual: max_res,
        max_residual_factorized: max_res_fact,
    })
}

/// Pointwise residual of the alternative form of the electronic equation of
/// motion: F|u⟩ = `K[ψ]`|u⟩ + (ħ²/2)Σ ξ^{ij} q_ij |u⟩.
#[derive(Debug, Clone)]
pub struct EomFormReport {
    pub max_residual: f64,
    pub scale: f64,
    pub points_checked: usize,
}

impl EomFormReport {
    pub fn max_rel_residual(&self) -> f64 {
        self.max_residual / self.scale.max(1e-300)
    }
}

pub fn eom_form_check(
    psi: &FullWavefunction,
    h: &ParametricHamiltonian,
    floor: f64,
) -> Result<EomFormReport, CoreError> {
    let f = DerivedFields::from_wavefunction(psi, h, floor)?;
    let mass = f.mass;
    let mut max_residual = 0.0f64;
    let mut scale = 0.0f64;
    let mut points = 0;
    for i in 0..f.grid.len() {
        if !f.support[i] {
            continue;
        }
        points += 1;
        let a = f.a[i];
        // w₁ = (p̂ + A)u = −i∂u + Au
        let w1 = &f.du[i] * C64::new(0.0, -1.0) + &f.u[i] * C64::new(a, 0.0);
        // ∂w₁ = −i∂²u + (∂A)u + A∂u
        let dw1 = &f.d2u[i] * C64::new(0.0, -1.0)
            + &f.u[i] * C64::new(f.da[i], 0.0)
            + &f.du[i] * C64::new(a, 0.0);
        // (p̂ − A)w₁ = −i∂w₁ − Aw₁
        let zw1 = dw1 * C64::new(0.0, -1.0) - &w1 * C64::new(a, 0.0);
        // (p̂ψ)/ψ = −i ∂s/s for the real amplitude ψ = √ρ; the log
        // derivative sits in Im V since V = (−i ∂s/s − A)/M with A real
        let ppsi_over_psi = C64::new(0.0, -1.0) * C64::new(-f.v[i].im * mass, 0.0);
        let lhs = (zw1 * C64::new(0.5, 0.0) + w1 * ppsi_over_psi) / C64::new(mass, 0.0);
        // K[ψ]u + q₁₁/(2M) u
        let rhs = &f.qdu[i] * (C64::new(0.0, -1.0) * f.v[i])
            - &f.d11u[i] * C64::new(0.5 / mass, 0.0)
            + &f.u[i] * C64::new(0.5 * f.g[i] / mass, 0.0);
        let r = (&lhs - &rhs).norm();
        max_residual = max_residual.max(r);
        scale = scale.max(lhs.norm());
    }
    Ok(EomFormReport {
        max_residual,
        scale,
        points_checked: points,
    })
}
