//! The homogenized scattering problem: a Lippmann-Schwinger equation with
//! the constant potential `omega^2 C` on the box, its voxel discretization,
//! far fields, and the comparison against the cluster far fields.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::fields::FarFieldPattern;
use crate::geometry::{BoxRegion, Cluster};
use crate::kernels::{kelvin_matrix, kupradze_matrix};
use crate::material::{Frequency, IncidentPlaneWave, Material};
use crate::spectra::{resonance_frequency, self_cell_integral};
use crate::{Error, Result};

/// Voxelization of the box region.
#[derive(Debug, Clone)]
pub struct EffectiveGrid {
    pub resolution: usize,
    pub region: BoxRegion,
    pub centers: Vec<Vector3<f64>>,
    pub cell_volume: f64,
}

pub fn effective_grid(region: &BoxRegion, resolution: usize) -> EffectiveGrid {
    let n = resolution;
    let mut centers = Vec::with_capacity(n * n * n);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                centers.push(Vector3::new(
                    region.lo[0] + region.side(0) * (i as f64 + 0.5) / n as f64,
                    region.lo[1] + region.side(1) * (j as f64 + 0.5) / n as f64,
                    region.lo[2] + region.side(2) * (k as f64 + 0.5) / n as f64,
                ));
            }
        }
    }
    let cell_volume = region.volume() / (n * n * n) as f64;
    EffectiveGrid { resolution, region: *region, centers, cell_volume }
}

/// Configuration of the homogenized solve.
#[derive(Debug, Clone)]
pub struct EffectiveConfig {
    pub resolution: usize,
    /// The constant matrix potential on the box (zero outside).
    pub coefficient: Matrix3<Complex64>,
    pub region: BoxRegion,
    /// Cell-count cap for the dense factorization path.
    pub dense_limit: usize,
    pub fp_damping: f64,
    pub fp_max_iter: usize,
    pub fp_tol: f64,
}

impl EffectiveConfig {
    pub fn new(resolution: usize, coefficient: Matrix3<Complex64>, region: BoxRegion) -> Result<Self> {
        if resolution < 4 {
            return Err(Error::Scenario(format!(
                "effective grid resolution {resolution} must be at least 4"
            )));
        }
        Ok(Self {
            resolution,
            coefficient,
            region,
            dense_limit: 1000,
            fp_damping: 0.5,
            fp_max_iter: 500,
            fp_tol: 1e-8,
        })
    }
}

/// Voxel Galerkin matrix of the fundamental kernel on the grid:
/// `block(i, j) = Gamma(c_i, c_j) V` off the diagonal; the diagonal carries
/// the static self-cell integral plus, for the frequency kernel, the smooth
/// remainder `(Gamma^omega - Gamma^0)(x, x) = i omega (2/cs^3 + 1/cp^3) /
/// (12 pi rho0) I` times the cell volume.
pub fn assemble_green_matrix(
    grid: &EffectiveGrid,
    mat: &Material,
    freq: &Frequency,
    static_only: bool,
) -> DMatrix<Complex64> {
    let n = grid.centers.len();
    let v = grid.cell_volume;
    let dim = 3 * n;
    let static_diag = self_cell_integral(mat, v);
    let dynamic_diag = if static_only {
        Complex64::new(0.0, 0.0)
    } else {
        Complex64::new(
            0.0,
            freq.omega * (2.0 / mat.cs().powi(3) + 1.0 / mat.cp().powi(3))
                / (12.0 * PI * mat.rho0)
                * v,
        )
    };
    let bands: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let ci = grid.centers[i];
            let mut band = vec![Complex64::new(0.0, 0.0); 3 * dim];
            for j in 0..n {
                if j == i {
                    for r in 0..3 {
                        band[r + (3 * i + r) * 3] =
                            Complex64::from(static_diag[(r, r)]) + dynamic_diag;
                    }
                    continue;
                }
                let block: Matrix3<Complex64> = if static_only {
                    kelvin_matrix(mat, &ci, &grid.centers[j])
                        .expect("distinct centers")
                        .map(Complex64::from)
                } else {
                    kupradze_matrix(mat, freq, &ci, &grid.centers[j]).expect("distinct centers")
                };
                for r in 0..3 {
                    for c in 0..3 {
                        band[r + (3 * j + c) * 3] = block[(r, c)] * Complex64::from(v);
                    }
                }
            }
            band
        })
        .collect();
    DMatrix::from_fn(dim, dim, |r, c| bands[r / 3][(r % 3) + c * 3])
}

/// Discretized Lippmann-Schwinger system `(I - omega^2 G C) Y = U^i`.
#[derive(Debug)]
pub struct EffectiveSystem {
    pub grid: EffectiveGrid,
    pub green: DMatrix<Complex64>,
    pub incident: DVector<Complex64>,
    pub coefficient: Matrix3<Complex64>,
    pub omega_sq: f64,
    pub dense: bool,
    pub fp_damping: f64,
    pub fp_max_iter: usize,
    pub fp_tol: f64,
}

pub fn assemble_ls_system(
    cfg: &EffectiveConfig,
    mat: &Material,
    freq: &Frequency,
    wave: &IncidentPlaneWave,
) -> Result<EffectiveSystem> {
    let grid = effective_grid(&cfg.region, cfg.resolution);
    let ncells = grid.centers.len();
    let dense = ncells <= cfg.dense_limit;
    let green = assemble_green_matrix(&grid, mat, freq, false);
    let mut incident = DVector::from_element(3 * ncells, Complex64::new(0.0, 0.0));
    for (i, c) in grid.centers.iter().enumerate() {
        let u = wave.evaluate(freq, c);
        for r in 0..3 {
            incident[3 * i + r] = u[r];
        }
    }
    Ok(EffectiveSystem {
        grid,
        green,
        incident,
        coefficient: cfg.coefficient,
        omega_sq: freq.omega_sq(),
        dense,
        fp_damping: cfg.fp_damping,
        fp_max_iter: cfg.fp_max_iter,
        fp_tol: cfg.fp_tol,
    })
}

/// Applies `omega^2 G C` to a stacked vector.
fn apply_potential(system: &EffectiveSystem, y: &DVector<Complex64>) -> DVector<Complex64> {
    let n = system.grid.centers.len();
    let mut cy = DVector::from_element(3 * n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for r in 0..3 {
            let mut acc = Complex64::new(0.0, 0.0);
            for c in 0..3 {
                acc += system.coefficient[(r, c)] * y[3 * i + c];
            }
            cy[3 * i + r] = acc;
        }
    }
    (&system.green * cy) * Complex64::from(system.omega_sq)
}

/// Solution values per cell.
#[derive(Debug, Clone)]
pub struct EffectiveSolution {
    pub values: Vec<Vector3<Complex64>>,
    pub residual: f64,
    /// Iteration count of the fixed-point path; `None` for the dense solve.
    pub iterations: Option<usize>,
}

/// Dense factorization when the grid fits the dense cap, damped fixed-point
/// iteration `Y <- (1-d) Y + d (U^i + omega^2 G C Y)` otherwise.
pub fn solve_effective(system: &EffectiveSystem) -> Result<EffectiveSolution> {
    let n = system.grid.centers.len();
    let dim = 3 * n;
    if system.dense {
        let mut a = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        // A = I - omega^2 G C, built column-block-wise
        for j in 0..n {
            for c in 0..3 {
                for r in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..3 {
                        acc += system.green[(r, 3 * j + k)] * system.coefficient[(k, c)];
                    }
                    a[(r, 3 * j + c)] = -Complex64::from(system.omega_sq) * acc;
                }
            }
        }
        for i in 0..dim {
            a[(i, i)] += Complex64::new(1.0, 0.0);
        }
        let lu = a.clone().lu();
        let y = lu
            .solve(&system.incident)
            .ok_or_else(|| Error::SolveFailure("singular effective system".into()))?;
        let residual = (&a * &y - &system.incident).norm() / system.incident.norm().max(1e-300);
        let values = (0..n)
            .map(|i| Vector3::new(y[3 * i], y[3 * i + 1], y[3 * i + 2]))
            .collect();
        return Ok(EffectiveSolution { values, residual, iterations: None });
    }
    // fixed-point path
    let mut y = system.incident.clone();
    let damping = Complex64::from(system.fp_damping);
    let one_minus = Complex64::from(1.0 - system.fp_damping);
    let scale = system.incident.norm().max(1e-300);
    let mut residual = f64::INFINITY;
    for it in 0..system.fp_max_iter {
        let gy = apply_potential(system, &y);
        let target = &system.incident + &gy;
        residual = (&target - &y).norm() / scale;
        if residual <= system.fp_tol {
            let values = (0..n)
                .map(|i| Vector3::new(y[3 * i], y[3 * i + 1], y[3 * i + 2]))
                .collect();
            return Ok(EffectiveSolution { values, residual, iterations: Some(it) });
        }
        y = &y * one_minus + target * damping;
    }
    Err(Error::IterationFailure(system.fp_max_iter, residual))
}

/// p and s far fields of the effective solution:
/// `Y_inf_p = xhat xhat^T omega^2 sum_cells e^{-i kp xhat.y} C Y(y) V /
/// (4 pi (lambda + 2 mu))` and the s-analogue.
pub fn effective_farfield(
    sol: &EffectiveSolution,
    system: &EffectiveSystem,
    mat: &Material,
    freq: &Frequency,
    xhat: &Vector3<f64>,
) -> (Vector3<Complex64>, Vector3<Complex64>) {
    let v = system.grid.cell_volume;
    let mut sum_p = Vector3::from_element(Complex64::new(0.0, 0.0));
    let mut sum_s = Vector3::from_element(Complex64::new(0.0, 0.0));
    for (y, val) in system.grid.centers.iter().zip(&sol.values) {
        let cy = system.coefficient * val;
        let phase_p = Complex64::new(0.0, -freq.kappa_p * xhat.dot(y)).exp();
        let phase_s = Complex64::new(0.0, -freq.kappa_s * xhat.dot(y)).exp();
        sum_p += cy * phase_p;
        sum_s += cy * phase_s;
    }
    let w2v = Complex64::from(freq.omega_sq() * v);
    let along: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * sum_p[i]).sum();
    let y_p = Vector3::from_fn(|i, _| {
        Complex64::from(xhat[i]) * along * w2v / Complex64::from(4.0 * PI * (mat.lambda + 2.0 * mat.mu))
    });
    let along_s: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * sum_s[i]).sum();
    let y_s = Vector3::from_fn(|i, _| {
        (sum_s[i] - Complex64::from(xhat[i]) * along_s) * w2v / Complex64::from(4.0 * PI * mat.mu)
    });
    (y_p, y_s)
}

/// Far-field pattern of the effective solution over a direction set.
pub fn effective_pattern(
    sol: &EffectiveSolution,
    system: &EffectiveSystem,
    mat: &Material,
    freq: &Frequency,
    directions: &[Vector3<f64>],
) -> FarFieldPattern {
    let mut p = Vec::with_capacity(directions.len());
    let mut s = Vec::with_capacity(directions.len());
    for xhat in directions {
        let (yp, ys) = effective_farfield(sol, system, mat, freq, xhat);
        p.push(yp);
        s.push(ys);
    }
    FarFieldPattern { directions: directions.to_vec(), p, s }
}

/// How the homogenized potential is derived from the cluster data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientMode {
    /// The a-independent limit `density_prefactor * c * sum m (x) m / (-sign b)`.
    Limit,
    /// The finite-a product `(M/|Omega|) alpha_1 C^(1)`.
    FiniteA,
}

/// Homogenized potential matrix matching `cluster`; the density numerator
/// `c`, detuning `b`, `sign` and count exponent `s` must be the ones the
/// cluster was built with.
pub fn effective_coefficient(
    cluster: &Cluster,
    region: &BoxRegion,
    c_density: f64,
    b: f64,
    sign: crate::spectra::DetuningSign,
    s: f64,
    mode: CoefficientMode,
) -> Matrix3<Complex64> {
    let m = cluster.len() as f64;
    let density = m / region.volume();
    let first = &cluster.inclusions[0];
    match mode {
        CoefficientMode::FiniteA => first.coefficient.matrix * Complex64::from(density * first.alpha),
        CoefficientMode::Limit => {
            // reference moment outer-product sum, recovered exactly from the
            // stored coefficient: sum m_D (x) m_D = C * den, scaled by a^-3
            let a = cluster.a;
            let den = first.coefficient.denominator;
            let moment_sum = first.coefficient.matrix * Complex64::from(den / a.powi(3));
            // den -> -sign b a^h: the a-independent limit of the denominator
            let den_limit = -sign.factor() * b;
            // density * a^s recovers the count prefactor M0 of M = M0 a^-s
            let density_prefactor = density * a.powf(s);
            moment_sum * Complex64::from(density_prefactor * c_density / den_limit)
        }
    }
}

/// Per-direction difference between cluster and effective far fields.
#[derive(Debug, Clone)]
pub struct DifferenceRow {
    pub direction: Vector3<f64>,
    /// `(U_inf_p - Y_inf_p) . 4 pi (lambda + 2 mu) xhat`.
    pub p_component: Complex64,
    /// `(U_inf_s - Y_inf_s) . 4 pi mu t_k` on two tangent directions.
    pub s_components: [Complex64; 2],
}

#[derive(Debug, Clone)]
pub struct DifferenceTable {
    pub rows: Vec<DifferenceRow>,
    pub max_p: f64,
    pub max_s: f64,
    pub mean_p: f64,
    pub mean_s: f64,
}

impl DifferenceTable {
    pub fn max_combined(&self) -> f64 {
        self.max_p.max(self.max_s)
    }
}

/// Deterministic tangent pair completing `xhat` to an orthonormal frame.
pub fn tangent_basis(xhat: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if xhat[0].abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = seed.cross(xhat).normalize();
    let t2 = xhat.cross(&t1);
    (t1, t2)
}

/// Scaled far-field differences on a shared direction set.
pub fn compare_cluster_vs_effective(
    cluster_far: &FarFieldPattern,
    eff_far: &FarFieldPattern,
    mat: &Material,
) -> Result<DifferenceTable> {
    if cluster_far.directions.len() != eff_far.directions.len() {
        return Err(Error::DirectionMismatch(
            cluster_far.directions.len(),
            eff_far.directions.len(),
        ));
    }
    let mut rows = Vec::with_capacity(cluster_far.directions.len());
    let (mut max_p, mut max_s, mut sum_p, mut sum_s) = (0.0f64, 0.0f64, 0.0, 0.0);
    for (k, xhat) in cluster_far.directions.iter().enumerate() {
        if (xhat - eff_far.directions[k]).norm() > 1e-12 {
            return Err(Error::DirectionMismatch(k, k));
        }
        let dp = Vector3::from_fn(|i, _| cluster_far.p[k][i] - eff_far.p[k][i]);
        let ds = Vector3::from_fn(|i, _| cluster_far.s[k][i] - eff_far.s[k][i]);
        let p_component: Complex64 = (0..3)
            .map(|i| dp[i] * Complex64::from(xhat[i]))
            .sum::<Complex64>()
            * Complex64::from(4.0 * PI * (mat.lambda + 2.0 * mat.mu));
        let (t1, t2) = tangent_basis(xhat);
        let s1: Complex64 = (0..3).map(|i| ds[i] * Complex64::from(t1[i])).sum::<Complex64>()
            * Complex64::from(4.0 * PI * mat.mu);
        let s2: Complex64 = (0..3).map(|i| ds[i] * Complex64::from(t2[i])).sum::<Complex64>()
            * Complex64::from(4.0 * PI * mat.mu);
        max_p = max_p.max(p_component.norm());
        let s_norm = (s1.norm_sqr() + s2.norm_sqr()).sqrt();
        max_s = max_s.max(s_norm);
        sum_p += p_component.norm();
        sum_s += s_norm;
        rows.push(DifferenceRow { direction: *xhat, p_component, s_components: [s1, s2] });
    }
    let count = rows.len().max(1) as f64;
    Ok(DifferenceTable { rows, max_p, max_s, mean_p: sum_p / count, mean_s: sum_s / count })
}

/// Sign of the homogenized density shift and the frequency at which it flips.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct SignDiagnostic {
    /// `sign(1 - alpha_1 omega^2 lambda_n0)`: +1 enhances the background
    /// density, -1 reduces it.
    pub sign: i8,
    /// Threshold frequency `sqrt(1/(alpha_1 lambda_n0))`.
    pub threshold: f64,
    pub denominator: f64,
}

pub fn homogenized_density_sign(
    alpha1: f64,
    lambda_n0: f64,
    freq: &Frequency,
) -> Result<SignDiagnostic> {
    let denominator = 1.0 - alpha1 * freq.omega_sq() * lambda_n0;
    let threshold = resonance_frequency(alpha1, lambda_n0)?;
    Ok(SignDiagnostic {
        sign: if denominator > 0.0 {
            1
        } else if denominator < 0.0 {
            -1
        } else {
            0
        },
        threshold,
        denominator,
    })
}
