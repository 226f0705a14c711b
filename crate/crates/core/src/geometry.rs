//! Smoothly gauged eigenframes on nuclear grids and the geometric fields of
//! the adiabatic approximation.
//!
//! The frame is gauged by parallel transport along a deterministic spanning
//! tree of the grid (row-major sweeps, last axis fastest); the residual
//! plaquette phases measure curvature flux, not gauge error. Derivatives are
//! second-order central differences, with one-sided stencils flagged at the
//! boundary; `qgt_sos` provides the gauge-independent sum-over-states oracle
//! for the same tensor.

use crate::error::CoreError;
use crate::grid::NuclearGrid;
use crate::linalg::{self, EigenSystem};
use crate::models::ParametricHamiltonian;
use crate::C64;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

/// Default degeneracy tolerance for grid diagonalization (Hartree).
pub const DEFAULT_GAP_TOL: f64 = 1e-8;

/// Eigenvalues and the gauged level-`n` eigenvector on every grid point.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    pub grid: NuclearGrid,
    pub level: usize,
    /// All eigenvalues at each point, ascending.
    pub energies: Vec<Vec<f64>>,
    /// Gauged unit vector u_n at each point.
    pub vectors: Vec<DVector<C64>>,
    /// min_{m≠n} |E_m − E_n| at each point.
    pub gaps: Vec<f64>,
    /// Phase factor applied to each point by the transport pass.
    pub gauge_log: Vec<C64>,
}

impl EigenFrame {
    /// E_n at a grid point.
    pub fn energy(&self, point: usize) -> f64 {
        self.energies[point][self.level]
    }

    /// Fix the overall phase of `v` so its largest-modulus component is real
    /// positive (ties broken by the lowest index).
    fn anchor_phase(v: &mut DVector<C64>) {
        let mut best = 0;
        let mut best_norm = 0.0;
        for (i, z) in v.iter().enumerate() {
            if z.norm() > best_norm + 1e-15 {
                best_norm = z.norm();
                best = i;
            }
        }
        let z = v[best];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            *v *= phase;
        }
    }

    /// Parent of a grid point in the transport tree: the last axis with a
    /// nonzero index, decremented. The origin is the root.
    fn parent(grid: &NuclearGrid, flat: usize) -> Option<usize> {
        let idx = grid.multi_index(flat);
        for a in (0..grid.dim()).rev() {
            if idx[a] > 0 {
                return grid.neighbor(flat, a, -1);
            }
        }
        None
    }

    /// Run the parallel-transport pass in place, returning the applied phase
    /// factors. Idempotent: on an already gauged frame all phases are ~1.
    pub fn transport_gauge(&mut self) -> Result<Vec<C64>, CoreError> {
        let n = self.grid.len();
        let mut applied = vec![C64::new(1.0, 0.0); n];
        for flat in 0..n {
            match Self::parent(&self.grid, flat) {
                None => {
                    let before = self.vectors[flat].clone();
                    Self::anchor_phase(&mut self.vectors[flat]);
                    // recover the applied phase for the log
                    let ov = before.dotc(&self.vectors[flat]);
                    if ov.norm() > 0.0 {
                        applied[flat] = ov / ov.norm();
                    }
                }
                Some(parent) => {
                    let overlap = self.vectors[parent].dotc(&self.vectors[flat]);
                    if overlap.norm() < 1e-12 {
                        return Err(CoreError::TransportBreakdown {
                            point: self.grid.point(flat),
                            overlap: overlap.norm(),
                        });
                    }
                    let phase = overlap.conj() / overlap.norm();
                    self.vectors[flat] *= phase;
                    applied[flat] = phase;
                }
            }
        }
        self.gauge_log = applied.clone();
        Ok(applied)
    }
}

/// Diagonalize H_el on every grid point and gauge level `level` by parallel
/// transport. Fails with `Degeneracy` if the gap closes anywhere on the grid.
pub fn diagonalize_grid(
    h: &ParametricHamiltonian,
    grid: &NuclearGrid,
    level: usize,
    gap_tol: f64,
) -> Result<EigenFrame, CoreError> {
    assert!(level < h.dim_el(), "level out of range");
    assert_eq!(grid.dim(), h.dim_nuc(), "grid/model dimension mismatch");
    let systems: Vec<EigenSystem> = (0..grid.len())
        .into_par_iter()
        .map(|flat| linalg::eigh(&h.eval(&grid.point(flat))))
        .collect();

    let mut energies = Vec::with_capacity(grid.len());
    let mut vectors = Vec::with_capacity(grid.len());
    let mut gaps = Vec::with_capacity(grid.len());
    for (flat, sys) in systems.into_iter().enumerate() {
        let gap = sys.gap(level);
        if gap <= gap_tol {
            return Err(CoreError::Degeneracy {
                point: grid.point(flat),
                gap,
                tolerance: gap_tol,
            });
        }
        gaps.push(gap);
        vectors.push(sys.vector(level));
        energies.push(sys.energies);
    }

    let mut frame = EigenFrame {
        grid: grid.clone(),
        level,
        energies,
        vectors,
        gaps,
        gauge_log: Vec::new(),
    };
    frame.transport_gauge()?;
    Ok(frame)
}

/// Berry connection, quantum geometric tensor and derived fields on a grid.
#[derive(Debug, Clone)]
pub struct GeometricField {
    pub grid: NuclearGrid,
    pub level: usize,
    /// A_j = i⟨u|∂_j u⟩ (real part; the imaginary residue is diagnostic).
    pub connection: Vec<Vec<f64>>,
    /// q_ij = ⟨∂_i u|Q|∂_j u⟩ per point.
    pub qgt: Vec<DMatrix<C64>>,
    /// φ = (ħ²/2) Σ ξ^{ij} g_ij per point.
    pub phi: Vec<f64>,
    /// Inverse-mass tensor used for φ.
    pub xi: DMatrix<f64>,
    /// True where any one-sided stencil was used.
    pub boundary: Vec<bool>,
    /// max_j |Im i⟨u|∂_j u⟩|, which must vanish for normalized states.
    pub im_residue: Vec<f64>,
}

impl GeometricField {
    /// Metric g_ij = Re q_ij (symmetrized).
    pub fn metric(&self, point: usize) -> DMatrix<f64> {
        let q = &self.qgt[point];
        let d = q.nrows();
        DMatrix::from_fn(d, d, |i, j| 0.5 * (q[(i, j)].re + q[(j, i)].re))
    }

    /// Curvature B_ij = −2 Im q_ij (antisymmetrized).
    pub fn curvature(&self, point: usize) -> DMatrix<f64> {
        let q = &self.qgt[point];
        let d = q.nrows();
        DMatrix::from_fn(d, d, |i, j| -(q[(i, j)].im - q[(j, i)].im))
    }
}

/// Isotropic inverse-mass tensor ξ = 1/M · I.
pub fn isotropic_inverse_mass(mass: f64, dim: usize) -> DMatrix<f64> {
    DMatrix::from_diagonal_element(dim, dim, 1.0 / mass)
}

/// φ = (ħ²/2) Σ_ij ξ^{ij} g_ij at one point (ħ = 1).
pub fn scalar_potential(metric: &DMatrix<f64>, xi: &DMatrix<f64>) -> f64 {
    0.5 * xi.zip_fold(metric, 0.0, |acc, x, g| acc + x * g)
}

/// First derivative of the frame vector along `axis` at `flat`: central in
/// the interior, second-order one-sided at the boundary. Returns the
/// derivative and whether a one-sided stencil was used.
fn frame_derivative(frame: &EigenFrame, flat: usize, axis: usize) -> (DVector<C64>, bool) {
    let h = frame.grid.axis(axis).step;
    let up = frame.grid.neighbor(flat, axis, 1);
    let dn = frame.grid.neighbor(flat, axis, -1);
    match (dn, up) {
        (Some(m), Some(p)) => (
            (&frame.vectors[p] - &frame.vectors[m]) / C64::new(2.0 * h, 0.0),
            false,
        ),
        (None, Some(p)) => {
            let pp = frame.grid.neighbor(p, axis, 1).expect("n >= 3");
            let d = (-&frame.vectors[flat] * C64::new(3.0, 0.0)
                + &frame.vectors[p] * C64::new(4.0, 0.0)
                - &frame.vectors[pp])
                / C64::new(2.0 * h, 0.0);
            (d, true)
        }
        (Some(m), None) => {
            let mm = frame.grid.neighbor(m, axis, -1).expect("n >= 3");
            let d = (&frame.vectors[flat] * C64::new(3.0, 0.0)
                - &frame.vectors[m] * C64::new(4.0, 0.0)
                + &frame.vectors[mm])
                / C64::new(2.0 * h, 0.0);
            (d, true)
        }
        (None, None) => unreachable!("grids have >= 3 points per axis"),
    }
}

/// Quantum geometric tensor by projected central differences of the gauged
/// frame, with the Berry connection and scalar potential filled in.
pub fn qgt_fd(frame: &EigenFrame, xi: &DMatrix<f64>) -> GeometricField {
    let dim = frame.grid.dim();
    assert_eq!(xi.nrows(), dim);
    let n = frame.grid.len();

    struct PointFields {
        a: Vec<f64>,
        q: DMatrix<C64>,
        boundary: bool,
        residue: f64,
    }

    let per_point: Vec<PointFields> = (0..n)
        .into_par_iter()
        .map(|flat| {
            let u = &frame.vectors[flat];
            let mut a = vec![0.0; dim];
            let mut residue = 0.0f64;
            let mut boundary = false;
            let mut projected = Vec::with_capacity(dim);
            for axis in 0..dim {
                let (du, one_sided) = frame_derivative(frame, flat, axis);
                boundary |= one_sided;
                let ov = u.dotc(&du); // ⟨u|∂u⟩
                let ia = C64::new(0.0, 1.0) * ov;
                a[axis] = ia.re;
                residue = residue.max(ia.im.abs());
                projected.push(&du - u * ov);
            }
            let q = DMatrix::from_fn(dim, dim, |i, j| projected[i].dotc(&projected[j]));
            PointFields {
                a,
                q,
                boundary,
                residue,
            }
        })
        .collect();

    let mut connection = Vec::with_capacity(n);
    let mut qgt = Vec::with_capacity(n);
    let mut phi = Vec::with_capacity(n);
    let mut boundary = Vec::with_capacity(n);
    let mut im_residue = Vec::with_capacity(n);
    for pf in per_point {
        let d = pf.q.nrows();
        let g = DMatrix::from_fn(d, d, |i, j| 0.5 * (pf.q[(i, j)].re + pf.q[(j, i)].re));
        phi.push(scalar_potential(&g, xi));
        connection.push(pf.a);
        qgt.push(pf.q);
        boundary.push(pf.boundary);
        im_residue.push(pf.residue);
    }

    GeometricField {
        grid: frame.grid.clone(),
        level: frame.level,
        connection,
        qgt,
        phi,
        xi: xi.clone(),
        boundary,
        im_residue,
    }
}

/// Gauge-independent sum-over-states form of the quantum geometric tensor at
/// a single configuration:
/// q_ij = Σ_{m≠n} ⟨u_n|∂_iH|u_m⟩⟨u_m|∂_jH|u_n⟩ / (E_n−E_m)².
pub fn qgt_sos(
    h: &ParametricHamiltonian,
    x: &[f64],
    level: usize,
    gap_tol: f64,
) -> Result<DMatrix<C64>, CoreError> {
    let sys = linalg::eigh(&h.eval(x));
    if sys.gap(level) <= gap_tol {
        return Err(CoreError::Degeneracy {
            point: x.to_vec(),
            gap: sys.gap(level),
            tolerance: gap_tol,
        });
    }
    let dim_nuc = h.dim_nuc();
    let u_n = sys.vector(level);
    // w_i[m] = ⟨u_m|∂_iH|u_n⟩
    let mut w = Vec::with_capacity(dim_nuc);
    for k in 0..dim_nuc {
        let g = h.grad(x, k)?;
        w.push(sys.vectors.adjoint() * (&g * &u_n));
    }
    let e_n = sys.energies[level];
    let q = DMatrix::from_fn(dim_nuc, dim_nuc, |i, j| {
        let mut s = C64::new(0.0, 0.0);
        for m in 0..h.dim_el() {
            if m == level {
                continue;
            }
            let denom = (e_n - sys.energies[m]).powi(2);
            s += w[i][m].conj() * w[j][m] / denom;
        }
        s
    });
    Ok(q)
}

/// Discrete Wilson-loop (Berry) phase −arg Π_i ⟨u(x_i)|u(x_{i+1})⟩ for a
/// closed loop of configurations (the closing segment back to `points[0]` is
/// implicit). Gauge invariant; returned in (−π, π].
pub fn berry_phase_loop(
    h: &ParametricHamiltonian,
    points: &[Vec<f64>],
    level: usize,
    gap_tol: f64,
) -> Result<f64, CoreError> {
    assert!(points.len() >= 3, "need at least 3 loop points");
    let vectors: Vec<DVector<C64>> = points
        .par_iter()
        .map(|x| {
            let sys = linalg::eigh(&h.eval(x));
            if sys.gap(level) <= gap_tol {
                Err(CoreError::Degeneracy {
                    point: x.clone(),
                    gap: sys.gap(level),
                    tolerance: gap_tol,
                })
            } else {
                Ok(sys.vector(level))
            }
        })
        .collect::<Result<_, _>>()?;

    let mut w = C64::new(1.0, 0.0);
    for i in 0..vectors.len() {
        let next = (i + 1) % vectors.len();
        w *= vectors[i].dotc(&vectors[next]);
    }
    if w.norm() < 1e-12 {
        return Err(CoreError::TransportBreakdown {
            point: points[0].clone(),
            overlap: w.norm(),
        });
    }
    let mut phase = -w.arg();
    if phase <= -std::f64::consts::PI {
        phase += 2.0 * std::f64::consts::PI;
    }
    Ok(phase)
}

/// Multiply every frame vector by e^{−iφ(x)}; used to verify gauge
/// covariance of the derived fields.
pub fn apply_gauge(frame: &mut EigenFrame, phases: &[f64]) {
    assert_eq!(phases.len(), frame.vectors.len());
    for (v, &p) in frame.vectors.iter_mut().zip(phases) {
        *v *= C64::from_polar(1.0, -p);
    }
}

/// Residual plaquette phases of the gauged frame in the (axis_a, axis_b)
/// plane: −arg of the Wilson product around the elementary cell whose lower
/// corner is each grid point (zero where the cell leaves the grid). These
/// are gauge invariant and measure curvature flux, ≈ B_ab·h_a·h_b, not
/// gauge error.
pub fn plaquette_phases(frame: &EigenFrame, axis_a: usize, axis_b: usize) -> Vec<f64> {
    let grid = &frame.grid;
    assert!(axis_a != axis_b && axis_a < grid.dim() && axis_b < grid.dim());
    (0..grid.len())
        .map(|p00| {
            let (Some(p10), Some(p01)) =
                (grid.neighbor(p00, axis_a, 1), grid.neighbor(p00, axis_b, 1))
            else {
                return 0.0;
            };
            let p11 = grid.neighbor(p10, axis_b, 1).expect("rectangular grid");
            let u = &frame.vectors;
            let w = u[p00].dotc(&u[p10])
                * u[p10].dotc(&u[p11])
                * u[p11].dotc(&u[p01])
                * u[p01].dotc(&u[p00]);
            if w.norm() < 1e-300 {
                0.0
            } else {
                -w.arg()
            }
        })
        .collect()
}

/// Pointwise report of the metric-compatibility identity
/// Re⟨∂_k u|D_ij u⟩ = ½(∂_j g_ik + ∂_i g_kj − ∂_k g_ij),
/// with the left side built from second derivatives of the frame and the
/// right side from first differences of the metric.
#[derive(Debug, Clone)]
pub struct ChristoffelReport {
    pub max_abs_err: f64,
    pub scale: f64,
    pub points_checked: usize,
}

impl ChristoffelReport {
    pub fn max_rel_err(&self) -> f64 {
        self.max_abs_err / self.scale.max(1e-300)
    }
}

fn second_derivative(frame: &EigenFrame, flat: usize, ax_i: usize, ax_j: usize) -> DVector<C64> {
    let hi = frame.grid.axis(ax_i).step;
    if ax_i == ax_j {
        let p = frame.grid.neighbor(flat, ax_i, 1).unwrap();
        let m = frame.grid.neighbor(flat, ax_i, -1).unwrap();
        (&frame.vectors[p] - &frame.vectors[flat] * C64::new(2.0, 0.0) + &frame.vectors[m])
            / C64::new(hi * hi, 0.0)
    } else {
        let hj = frame.grid.axis(ax_j).step;
        let pp = frame
            .grid
            .neighbor(frame.grid.neighbor(flat, ax_i, 1).unwrap(), ax_j, 1)
            .unwrap();
        let pm = frame
            .grid
            .neighbor(frame.grid.neighbor(flat, ax_i, 1).unwrap(), ax_j, -1)
            .unwrap();
        let mp = frame
            .grid
            .neighbor(frame.grid.neighbor(flat, ax_i, -1).unwrap(), ax_j, 1)
            .unwrap();
        let mm = frame
            .grid
            .neighbor(frame.grid.neighbor(flat, ax_i, -1).unwrap(), ax_j, -1)
            .unwrap();
        (&frame.vectors[pp] - &frame.vectors[pm] - &frame.vectors[mp] + &frame.vectors[mm])
            / C64::new(4.0 * hi * hj, 0.0)
    }
}

/// Check the Christoffel identity on every deep-interior grid point.
pub fn christoffel_check(frame: &EigenFrame, field: &GeometricField) -> ChristoffelReport {
    let dim = frame.grid.dim();
    let mut max_abs_err = 0.0f64;
    let mut scale = 0.0f64;
    let mut points_checked = 0;

    let deep = |flat: usize| -> bool {
        let idx = frame.grid.multi_index(flat);
        idx.iter()
            .zip(frame.grid.axes())
            .all(|(&i, ax)| i >= 2 && i + 2 < ax.n)
    };

    for flat in 0..frame.grid.len() {
        if !deep(flat) {
            continue;
        }
        points_checked += 1;
        let u = &frame.vectors[flat];
        let project = |v: &DVector<C64>| v - u * u.dotc(v);
        let du: Vec<DVector<C64>> = (0..dim)
            .map(|a| frame_derivative(frame, flat, a).0)
            .collect();
        let a_con = &field.connection[flat];
        // ∂g by central differences of the metric field
        let dg = |k: usize, i: usize, j: usize| -> f64 {
            let p = frame.grid.neighbor(flat, k, 1).unwrap();
            let m = frame.grid.neighbor(flat, k, -1).unwrap();
            (field.metric(p)[(i, j)] - field.metric(m)[(i, j)]) / (2.0 * frame.grid.axis(k).step)
        };
        for k in 0..dim {
            for i in 0..dim {
                for j in 0..dim {
                    let d2 = second_derivative(frame, flat, i, j);
                    let dij = project(&du[j]) * C64::new(0.0, a_con[i])
                        + project(&du[i]) * C64::new(0.0, a_con[j])
                        + project(&d2);
                    let lhs = du[k].dotc(&dij).re;
                    let rhs = 0.5 * (dg(j, i, k) + dg(i, k, j) - dg(k, i, j));
                    max_abs_err = max_abs_err.max((lhs - rhs).abs());
                    scale = scale.max(rhs.abs());
                }
            }
        }
    }
    ChristoffelReport {
        max_abs_err,
        scale,
        points_checked,
    }
}
