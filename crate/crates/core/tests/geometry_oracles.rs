//! Geometry-layer oracles: closed-form two-level tensors, Wilson loops
//! against the monopole flux formula, gauge covariance and the Christoffel
//! identity.

use efriction_core::error::CoreError;
use efriction_core::geometry::{
    apply_gauge, berry_phase_loop, christoffel_check, diagonalize_grid, isotropic_inverse_mass,
    qgt_fd, qgt_sos, scalar_potential,
};
use efriction_core::grid::{AxisSpec, NuclearGrid};
use efriction_core::linalg;
use efriction_core::models::{avoided_crossing, conical, spin_monopole, ParametricHamiltonian};
use efriction_core::C64;
use nalgebra::DMatrix;
use std::f64::consts::PI;

const GAP_TOL: f64 = 1e-12;

#[test]
fn monopole_grid_energies_are_plus_minus_half_b0_r() {
    let b0 = 1.3;
    let h = spin_monopole(b0).unwrap();
    // sphere-avoiding grid: strictly positive z keeps |x| > 0 everywhere
    let grid = NuclearGrid::new(vec![
        AxisSpec { start: -0.8, step: 0.4, n: 5 },
        AxisSpec { start: -0.8, step: 0.4, n: 5 },
        AxisSpec { start: 0.5, step: 0.3, n: 3 },
    ])
    .unwrap();
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    for p in 0..grid.len() {
        let r = grid.point(p).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((frame.energies[p][0] + 0.5 * b0 * r).abs() < 1e-13);
        assert!((frame.energies[p][1] - 0.5 * b0 * r).abs() < 1e-13);
        assert!((frame.gaps[p] - b0 * r).abs() < 1e-12);
    }
}

fn patch_grid(center: &[f64], spacing: f64, n: usize) -> NuclearGrid {
    NuclearGrid::new(
        center
            .iter()
            .map(|&c| AxisSpec {
                start: c - spacing * (n as f64 - 1.0) / 2.0,
                step: spacing,
                n,
            })
            .collect(),
    )
    .unwrap()
}

/// Closed-form quantum geometric tensor of the two-level monopole in
/// Cartesian coordinates, lower (−) and upper (+) bands:
/// g_ij = (δ_ij − x_i x_j/r²)/(4r²), B_ij = ± ε_ijk x_k/(2r³).
fn monopole_qgt_closed_form(x: &[f64], level: usize) -> DMatrix<C64> {
    let r2: f64 = x.iter().map(|v| v * v).sum();
    let r = r2.sqrt();
    let sign = if level == 0 { 1.0 } else { -1.0 };
    DMatrix::from_fn(3, 3, |i, j| {
        let g = ((if i == j { 1.0 } else { 0.0 }) - x[i] * x[j] / r2) / (4.0 * r2);
        // B_ij = −2 Im q_ij ⇒ Im q_ij = −B_ij/2 with B_ij = sign·ε_ijk x_k/(2r³)
        let b = if i == j {
            0.0
        } else {
            let eps: f64 = match (i, j) {
                (0, 1) | (1, 2) | (2, 0) => 1.0,
                _ => -1.0,
            };
            let k = 3 - i - j; // the remaining axis
            sign * eps * x[k] / (2.0 * r * r2)
        };
        C64::new(g, -0.5 * b)
    })
}

#[test]
fn monopole_qgt_matches_closed_form_both_levels() {
    let h = spin_monopole(1.3).unwrap();
    let x = [0.4, -0.3, 0.7];
    for level in [0, 1] {
        let q = qgt_sos(&h, &x, level, GAP_TOL).unwrap();
        let oracle = monopole_qgt_closed_form(&x, level);
        let dev = linalg::max_abs_diff(&q, &oracle) / linalg::max_abs(&oracle);
        assert!(dev < 1e-12, "level {level}: rel dev {dev:.3e}");
    }
}

#[test]
fn monopole_angular_components_at_equator() {
    // pull the Cartesian tensor back to spherical angles at θ = π/2:
    // g_θθ = 1/4 for both levels; B_θφ = +sinθ/2 (lower), −sinθ/2 (upper).
    let h = spin_monopole(1.0).unwrap();
    let (theta, phi): (f64, f64) = (PI / 2.0, 0.3);
    let x = [
        theta.sin() * phi.cos(),
        theta.sin() * phi.sin(),
        theta.cos(),
    ];
    let v_theta = [
        theta.cos() * phi.cos(),
        theta.cos() * phi.sin(),
        -theta.sin(),
    ];
    let v_phi = [-theta.sin() * phi.sin(), theta.sin() * phi.cos(), 0.0];
    for (level, b_expected) in [(0usize, 0.5 * theta.sin()), (1usize, -0.5 * theta.sin())] {
        let q = qgt_sos(&h, &x, level, GAP_TOL).unwrap();
        let mut q_tt = C64::new(0.0, 0.0);
        let mut q_tp = C64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                q_tt += q[(i, j)] * v_theta[i] * v_theta[j];
                q_tp += q[(i, j)] * v_theta[i] * v_phi[j];
            }
        }
        assert!((q_tt.re - 0.25).abs() < 1e-12, "g_θθ = {}", q_tt.re);
        let b_tp = -2.0 * q_tp.im;
        assert!(
            (b_tp - b_expected).abs() < 1e-12,
            "level {level}: B_θφ = {b_tp}, expected {b_expected}"
        );
    }
}

#[test]
fn qgt_fd_agrees_with_sum_over_states_on_all_two_level_builders() {
    let cases: Vec<(ParametricHamiltonian, Vec<f64>)> = vec![
        (spin_monopole(1.0).unwrap(), vec![0.4, -0.3, 0.7]),
        (conical(0.9, 1.2).unwrap(), vec![0.8, 0.5]),
        (
            avoided_crossing(0.02, 1.0, 0.004, 0.006).unwrap(),
            vec![0.3],
        ),
    ];
    for (h, x0) in cases {
        let grid = patch_grid(&x0, 1e-3, 5);
        let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
        let field = qgt_fd(&frame, &isotropic_inverse_mass(2000.0, x0.len()));
        let center = grid.flat_index(&vec![2; x0.len()]);
        let q_sos = qgt_sos(&h, &x0, 0, GAP_TOL).unwrap();
        let dev =
            linalg::max_abs_diff(&field.qgt[center], &q_sos) / linalg::max_abs(&q_sos).max(1e-300);
        assert!(dev < 1e-5, "{}: rel dev {dev:.3e}", h.label());
    }
}

#[test]
fn conical_curvature_is_flat_and_scalar_models_have_zero_qgt() {
    let h = conical(0.9, 1.2).unwrap();
    let q = qgt_sos(&h, &[1.0, 1.0], 0, GAP_TOL).unwrap();
    assert!(q[(0, 1)].im.abs() < 1e-8, "B_xy = {}", -2.0 * q[(0, 1)].im);

    // dim_el = 1: Q_n annihilates everything
    let scalar = ParametricHamiltonian::new(
        "scalar",
        1,
        1,
        |x| DMatrix::from_element(1, 1, C64::new(x[0] * x[0], 0.0)),
        |x, _| DMatrix::from_element(1, 1, C64::new(2.0 * x[0], 0.0)),
    );
    let q = qgt_sos(&scalar, &[0.7], 0, GAP_TOL).unwrap();
    assert_eq!(q[(0, 0)], C64::new(0.0, 0.0));

    // x-independent H ⇒ ∂H = 0 ⇒ q ≡ 0
    let frozen = ParametricHamiltonian::new(
        "frozen",
        2,
        1,
        |_| {
            DMatrix::from_row_slice(
                2,
                2,
                &[
                    C64::new(0.3, 0.0),
                    C64::new(0.1, 0.0),
                    C64::new(0.1, 0.0),
                    C64::new(-0.2, 0.0),
                ],
            )
        },
        |_, _| DMatrix::zeros(2, 2),
    );
    let q = qgt_sos(&frozen, &[0.0], 0, GAP_TOL).unwrap();
    assert_eq!(q[(0, 0)], C64::new(0.0, 0.0));
}

#[test]
fn grid_diagonalization_flags_degeneracies_and_is_gauge_idempotent() {
    let h = conical(1.0, 1.0).unwrap();
    // grid containing the origin: exact degeneracy
    let grid = NuclearGrid::new(vec![
        AxisSpec {
            start: -1.0,
            step: 0.5,
            n: 5,
        },
        AxisSpec {
            start: -1.0,
            step: 0.5,
            n: 5,
        },
    ])
    .unwrap();
    match diagonalize_grid(&h, &grid, 0, 1e-8) {
        Err(CoreError::Degeneracy { point, .. }) => {
            assert!(point.iter().all(|v| v.abs() < 1e-12), "at {point:?}");
        }
        other => panic!("expected degeneracy error, got {other:?}"),
    }

    // shifted grid: fine, and re-gauging is the identity
    let grid = patch_grid(&[2.0, 1.5], 0.1, 7);
    let mut frame = diagonalize_grid(&h, &grid, 0, 1e-8).unwrap();
    let before = frame.vectors.clone();
    let phases = frame.transport_gauge().unwrap();
    for (p, (u, u0)) in frame.vectors.iter().zip(&before).enumerate() {
        assert!((u - u0).norm() < 1e-12, "vector changed at point {p}");
    }
    assert!(phases
        .iter()
        .all(|z| (z - C64::new(1.0, 0.0)).norm() < 1e-12));

    // parallel-transport condition between tree neighbors
    for flat in 1..grid.len() {
        let idx = grid.multi_index(flat);
        let parent = if idx[1] > 0 {
            grid.neighbor(flat, 1, -1).unwrap()
        } else {
            grid.neighbor(flat, 0, -1).unwrap()
        };
        let ov = frame.vectors[parent].dotc(&frame.vectors[flat]);
        assert!(ov.im.abs() < 1e-12 && ov.re > 0.0);
    }
}

#[test]
fn wilson_loop_conical_sign_change_and_outside_null() {
    let h = conical(1.0, 1.0).unwrap();
    let circle = |center: [f64; 2], r: f64, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / n as f64;
                vec![center[0] + r * t.cos(), center[1] + r * t.sin()]
            })
            .collect()
    };
    let enclosing = berry_phase_loop(&h, &circle([0.0, 0.0], 1.0, 256), 0, GAP_TOL).unwrap();
    assert!(
        (enclosing.abs() - PI).abs() < 1e-6,
        "phase around the intersection = {enclosing}"
    );
    let outside = berry_phase_loop(&h, &circle([3.0, 0.0], 0.5, 256), 0, GAP_TOL).unwrap();
    assert!(outside.abs() < 1e-6, "flat-connection loop = {outside}");
}

#[test]
fn wilson_loop_monopole_latitudes_match_solid_angle_oracle() {
    let h = spin_monopole(1.0).unwrap();
    let latitude = |theta: f64, n: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let phi = 2.0 * PI * i as f64 / n as f64;
                vec![
                    theta.sin() * phi.cos(),
                    theta.sin() * phi.sin(),
                    theta.cos(),
                ]
            })
            .collect()
    };
    for theta in [0.6f64, 1.1, PI / 2.0] {
        let oracle = -PI * (1.0 - theta.cos()); // field-aligned level, −Ω/2
        let upper = berry_phase_loop(&h, &latitude(theta, 512), 1, GAP_TOL).unwrap();
        assert!(
            (upper - oracle).abs() < 1e-4,
            "θ={theta}: upper {upper} vs {oracle}"
        );
        let lower = berry_phase_loop(&h, &latitude(theta, 512), 0, GAP_TOL).unwrap();
        assert!((lower + oracle).abs() < 1e-4, "θ={theta}: lower {lower}");
    }

    // Cauchy refinement: doubling the points shrinks the change
    let mut prev = berry_phase_loop(&h, &latitude(1.1, 64), 1, GAP_TOL).unwrap();
    let mut last_change = f64::INFINITY;
    for n in [128usize, 256, 512] {
        let cur = berry_phase_loop(&h, &latitude(1.1, n), 1, GAP_TOL).unwrap();
        let change = (cur - prev).abs();
        assert!(change < last_change, "refinement not Cauchy at n={n}");
        last_change = change;
        prev = cur;
    }
}

#[test]
fn gauge_covariance_of_fields_and_loops() {
    let h = spin_monopole(1.0).unwrap();
    // gauge errors in the FD tensor scale as h²·(gauge curvature), so the
    // 1e−8 invariance budget needs a gentle phase and a fine patch
    let grid = patch_grid(&[0.5, -0.2, 0.8], 1e-3, 7);
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    let xi = isotropic_inverse_mass(2000.0, 3);
    let field = qgt_fd(&frame, &xi);

    // smooth gauge φ(x) = 0.01 sin(x0) + 0.006 x1 x2 − 0.004 cos(x2)
    let phi_fn = |x: &[f64]| 0.01 * x[0].sin() + 0.006 * x[1] * x[2] - 0.004 * x[2].cos();
    let phases: Vec<f64> = (0..grid.len()).map(|p| phi_fn(&grid.point(p))).collect();
    let mut gauged = frame.clone();
    apply_gauge(&mut gauged, &phases);
    let gauged_field = qgt_fd(&gauged, &xi);

    let center = grid.flat_index(&[3, 3, 3]);
    // A shifts by ∂φ (finite-difference check at the interior point)
    for axis in 0..3 {
        let hstep = grid.axis(axis).step;
        let up = grid.neighbor(center, axis, 1).unwrap();
        let dn = grid.neighbor(center, axis, -1).unwrap();
        let dphi = (phi_fn(&grid.point(up)) - phi_fn(&grid.point(dn))) / (2.0 * hstep);
        let shift = gauged_field.connection[center][axis] - field.connection[center][axis];
        assert!(
            (shift - dphi).abs() < 1e-4,
            "axis {axis}: ΔA = {shift}, ∂φ = {dphi}"
        );
    }
    // q (hence g, B) unchanged
    let dev = linalg::max_abs_diff(&gauged_field.qgt[center], &field.qgt[center])
        / linalg::max_abs(&field.qgt[center]);
    assert!(dev < 1e-8, "qgt gauge deviation {dev:.3e}");

    // Wilson loops are built from fresh eigenvectors and stay invariant
    let latitude: Vec<Vec<f64>> = (0..256)
        .map(|i| {
            let phi = 2.0 * PI * i as f64 / 256.0;
            vec![0.9 * phi.cos(), 0.9 * phi.sin(), 0.4]
        })
        .collect();
    let p1 = berry_phase_loop(&h, &latitude, 0, GAP_TOL).unwrap();
    let p2 = berry_phase_loop(&h, &latitude, 0, GAP_TOL).unwrap();
    assert!((p1 - p2).abs() < 1e-12);
}

#[test]
fn christoffel_identity_on_smooth_regions() {
    // left side from second derivatives of the frame, right side from first
    // differences of the metric: ½(∂_j g_ik + ∂_i g_kj − ∂_k g_ij)
    let h = spin_monopole(1.0).unwrap();
    let grid = NuclearGrid::new(vec![
        AxisSpec {
            start: 0.30,
            step: 0.004,
            n: 9,
        },
        AxisSpec {
            start: -0.24,
            step: 0.004,
            n: 9,
        },
        AxisSpec {
            start: 0.62,
            step: 0.004,
            n: 9,
        },
    ])
    .unwrap();
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    let field = qgt_fd(&frame, &isotropic_inverse_mass(2000.0, 3));
    let report = christoffel_check(&frame, &field);
    assert!(report.points_checked > 0);
    assert!(
        report.max_rel_err() < 1e-4,
        "monopole: rel err {:.3e} over {} points",
        report.max_rel_err(),
        report.points_checked
    );

    let h = avoided_crossing(0.02, 1.0, 0.004, 0.006).unwrap();
    let grid = NuclearGrid::line(-0.3, 0.001, 601).unwrap();
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    let field = qgt_fd(&frame, &isotropic_inverse_mass(2000.0, 1));
    let report = christoffel_check(&frame, &field);
    assert!(
        report.max_rel_err() < 1e-4,
        "avoided crossing: rel err {:.3e}",
        report.max_rel_err()
    );
}

#[test]
fn plaquette_phases_measure_curvature_flux() {
    use efriction_core::geometry::plaquette_phases;
    // curved frame: each elementary cell carries phase ≈ B_ab·h_a·h_b
    let h = spin_monopole(1.0).unwrap();
    let grid = NuclearGrid::new(vec![
        AxisSpec {
            start: 0.2,
            step: 0.05,
            n: 7,
        },
        AxisSpec {
            start: -0.4,
            step: 0.05,
            n: 7,
        },
        AxisSpec {
            start: 0.6,
            step: 0.05,
            n: 3,
        },
    ])
    .unwrap();
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    let field = qgt_fd(&frame, &isotropic_inverse_mass(2000.0, 3));
    let phases = plaquette_phases(&frame, 0, 1);
    let cell = 0.05 * 0.05;
    let mut checked = 0;
    for p in 0..grid.len() {
        let (Some(pa), Some(pb)) = (grid.neighbor(p, 0, 1), grid.neighbor(p, 1, 1)) else {
            continue;
        };
        let pab = grid.neighbor(pa, 1, 1).unwrap();
        let b_avg = [p, pa, pb, pab]
            .iter()
            .map(|&q| field.curvature(q)[(0, 1)])
            .sum::<f64>()
            / 4.0;
        let flux = b_avg * cell;
        assert!(
            (phases[p] - flux).abs() < 0.01 * flux.abs().max(1e-6),
            "plaquette {p}: phase {} vs flux {flux}",
            phases[p]
        );
        checked += 1;
    }
    assert!(checked > 50);

    // flat real frame: every plaquette is exactly trivial
    let hc = conical(1.0, 1.0).unwrap();
    let grid = patch_grid(&[2.0, 1.5], 0.05, 7);
    let frame = diagonalize_grid(&hc, &grid, 0, GAP_TOL).unwrap();
    assert!(plaquette_phases(&frame, 0, 1)
        .iter()
        .all(|p| p.abs() < 1e-12));
}

#[test]
fn scalar_potential_formula_and_peak_location() {
    // g ≡ 0 ⇒ φ ≡ 0; single coordinate ⇒ φ = g/(2M)
    let zero = DMatrix::<f64>::zeros(1, 1);
    assert_eq!(
        scalar_potential(&zero, &isotropic_inverse_mass(2000.0, 1)),
        0.0
    );
    let g = DMatrix::from_element(1, 1, 0.35);
    let phi = scalar_potential(&g, &isotropic_inverse_mass(2000.0, 1));
    assert!((phi - 0.35 / 4000.0).abs() < 1e-18);

    // avoided crossing with M = 2000: φ(x) = g₁₁/(2M) peaks at the diabatic
    // crossing; symbolic 2×2 oracle g₁₁ = (2 k_f x0 c)²/4? — see below:
    // q₁₁ = |⟨u₁|∂H|u₀⟩|²/gap² with ⟨u₁|∂H|u₀⟩ = (∂(e₁−e₂))·c/gap
    let (k_f, x0, delta, c) = (0.02, 1.0, 0.0, 0.006);
    let h = avoided_crossing(k_f, x0, delta, c).unwrap();
    let mass = 2000.0;
    let grid = NuclearGrid::line(-0.3, 0.002, 301).unwrap();
    let frame = diagonalize_grid(&h, &grid, 0, GAP_TOL).unwrap();
    let field = qgt_fd(&frame, &isotropic_inverse_mass(mass, 1));
    let peak = field
        .phi
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.partial_cmp(b).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let x_peak = grid.point(peak)[0];
    assert!(
        x_peak.abs() < 0.01,
        "φ peak at {x_peak}, expected the crossing"
    );
    // frozen symbolic value at the crossing: gap = 2c, slope difference 2 k_f x0
    let g_symbolic = (2.0 * k_f * x0 * c).powi(2) / (2.0 * c).powi(4);
    let phi_symbolic = g_symbolic / (2.0 * mass);
    let rel = (field.phi[peak] - phi_symbolic).abs() / phi_symbolic;
    assert!(
        rel < 1e-4,
        "φ(0) = {}, symbolic {phi_symbolic}, rel {rel:.2e}",
        field.phi[peak]
    );
}
