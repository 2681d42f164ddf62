//! Spectral analysis of the static Navier volume operator on a reference
//! shape: dense Galerkin assembly, eigendecomposition, the exact scale laws,
//! resonance selection and the scattering-coefficient matrix.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::kernels::kelvin_matrix;
use crate::material::{Frequency, Material};
use crate::shapes::ReferenceShape;
use crate::{Error, Result};

/// Diagonal (self-cell) block of the voxel Galerkin matrix: the weakly
/// singular Kelvin integral over one cell, regularized by the equal-volume
/// ball `(gamma1/2 + gamma2/6) R^2 I` with `R = (3V/(4 pi))^(1/3)`.
pub fn self_cell_integral(mat: &Material, cell_volume: f64) -> Matrix3<f64> {
    let radius = (3.0 * cell_volume / (4.0 * PI)).cbrt();
    let coeff = (mat.gamma1() / 2.0 + mat.gamma2() / 6.0) * radius * radius;
    Matrix3::identity() * coeff
}

/// Piecewise-constant Galerkin matrix of the static Navier volume operator:
/// `block(i, j) = Gamma^0(c_i, c_j) * V` off the diagonal and the self-cell
/// integral on it. Symmetric by construction.
pub fn assemble_navier_operator(shape: &ReferenceShape, mat: &Material) -> DMatrix<f64> {
    let n = shape.ncells();
    let v = shape.cell_volume();
    let diag = self_cell_integral(mat, v);
    let dim = 3 * n;
    let mut data = vec![0.0; dim * dim];
    // parallel over row blocks; each band of 3 rows is written by one task
    data.par_chunks_mut(3 * dim).enumerate().for_each(|(i, rows)| {
        let ci = shape.centers[i];
        for j in 0..n {
            let block = if i == j {
                diag
            } else {
                kelvin_matrix(mat, &ci, &shape.centers[j]).expect("distinct cell centers") * v
            };
            for r in 0..3 {
                for c in 0..3 {
                    // column-major within the row band: entry (3i + r, 3j + c)
                    rows[r + (3 * j + c) * 3] = block[(r, c)];
                }
            }
        }
    });
    // data holds a row-band layout: rows[r + col*3] for band i covers matrix
    // row 3i + r. Reassemble into a DMatrix (column major).
    DMatrix::from_fn(dim, dim, |r, c| data[(r / 3) * 3 * dim + (r % 3) + c * 3])
}

/// Eigen-system of the discretized operator on a reference shape.
///
/// Eigenvectors are stored as per-cell function values, orthonormal under the
/// cell-volume-weighted inner product; `moments[n] = V * sum_cells e_n`.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Geometric scale applied on top of the reference shape (1 = reference).
    pub scale: f64,
    /// Eigenvalues, sorted descending.
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenfunction values per cell (3 per cell).
    pub eigenvectors: DMatrix<f64>,
    /// Integral of each eigenfunction over the shape.
    pub moments: Vec<Vector3<f64>>,
    pub cell_volume: f64,
    pub ncells: usize,
}

impl SpectralDecomposition {
    /// Number of strictly negative eigenvalues (diagnostic; such eigenvalues
    /// carry no real resonance).
    pub fn negative_count(&self) -> usize {
        self.eigenvalues.iter().filter(|&&l| l < 0.0).count()
    }

    /// Volume-weighted inner product of two stored eigenfunctions.
    pub fn inner(&self, m: usize, n: usize) -> f64 {
        self.cell_volume * self.eigenvectors.column(m).dot(&self.eigenvectors.column(n))
    }
}

/// Full symmetric eigendecomposition of the assembled operator.
///
/// Rejects non-symmetric input; eigenvalues are returned in descending order.
pub fn eigendecompose(
    matrix: &DMatrix<f64>,
    cell_volume: f64,
) -> Result<SpectralDecomposition> {
    let dim = matrix.nrows();
    if dim != matrix.ncols() || dim == 0 {
        return Err(Error::EmptySpectrum);
    }
    let scale = matrix.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut asym = 0.0f64;
    for i in 0..dim {
        for j in (i + 1)..dim {
            asym = asym.max((matrix[(i, j)] - matrix[(j, i)]).abs());
        }
    }
    if asym > 1e-12 * scale.max(1e-300) {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = matrix.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .expect("finite eigenvalues")
    });
    let inv_sqrt_v = 1.0 / cell_volume.sqrt();
    let mut vectors = DMatrix::zeros(dim, dim);
    let mut values = Vec::with_capacity(dim);
    for (col, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        let mut column = eig.eigenvectors.column(src).into_owned();
        // fix an overall sign so the decomposition is deterministic
        let lead = column.iter().cloned().fold(0.0f64, |acc, x| {
            if acc != 0.0 {
                acc
            } else if x.abs() > 1e-12 {
                x
            } else {
                0.0
            }
        });
        if lead < 0.0 {
            column.neg_mut();
        }
        vectors.set_column(col, &(column * inv_sqrt_v));
    }
    let ncells = dim / 3;
    let moments = (0..dim)
        .map(|col| {
            let mut m = Vector3::zeros();
            for cell in 0..ncells {
                for c in 0..3 {
                    m[c] += vectors[(3 * cell + c, col)];
                }
            }
            m * cell_volume
        })
        .collect();
    Ok(SpectralDecomposition {
        scale: 1.0,
        eigenvalues: values,
        eigenvectors: vectors,
        moments,
        cell_volume,
        ncells,
    })
}

/// Convenience: assemble and decompose a shape in one call.
pub fn shape_spectrum(shape: &ReferenceShape, mat: &Material) -> Result<SpectralDecomposition> {
    let op = assemble_navier_operator(shape, mat);
    eigendecompose(&op, shape.cell_volume())
}

/// Exact scale laws for `D = a B`: eigenvalues scale by `a^2`, moments by
/// `a^(3/2)`, eigenfunction values by `a^(-3/2)` and cell volume by `a^3`.
pub fn scale_spectrum(spec: &SpectralDecomposition, a: f64) -> SpectralDecomposition {
    assert!(a > 0.0, "scale must be positive");
    let a2 = a * a;
    let a32 = a.powf(1.5);
    SpectralDecomposition {
        scale: spec.scale * a,
        eigenvalues: spec.eigenvalues.iter().map(|l| l * a2).collect(),
        eigenvectors: spec.eigenvectors.clone() / a32,
        moments: spec.moments.iter().map(|m| m * a32).collect(),
        cell_volume: spec.cell_volume * a * a2,
        ncells: spec.ncells,
    }
}

/// A selected eigenvalue cluster: the resonance candidate.
#[derive(Debug, Clone)]
pub struct ResonanceSelection {
    /// Index of the cluster in the distinct-eigenvalue list (0 = largest).
    pub cluster_index: usize,
    /// Indices of the member eigenvalues in the sorted spectrum.
    pub members: Vec<usize>,
    /// Representative eigenvalue (first member).
    pub lambda: f64,
    pub rel_tol: f64,
}

impl ResonanceSelection {
    pub fn multiplicity(&self) -> usize {
        self.members.len()
    }
}

/// Splits the sorted spectrum into distinct clusters at relative tolerance
/// `rel_tol` and returns the `n0`-th cluster from the top.
///
/// A cluster is the maximal contiguous run whose members stay within
/// `rel_tol * |representative|` of the first member; `rel_tol = 0` makes
/// every eigenvalue its own cluster.
pub fn group_eigenvalue(
    spec: &SpectralDecomposition,
    n0: usize,
    rel_tol: f64,
) -> Result<ResonanceSelection> {
    if spec.eigenvalues.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let mut clusters: Vec<(usize, usize)> = Vec::new(); // (start, end exclusive)
    let mut start = 0;
    for i in 1..=spec.eigenvalues.len() {
        let split = i == spec.eigenvalues.len() || {
            let rep = spec.eigenvalues[start];
            (spec.eigenvalues[i] - rep).abs() > rel_tol * rep.abs()
        };
        if split {
            clusters.push((start, i));
            start = i;
        }
    }
    let count = clusters.len();
    let (lo, hi) = *clusters
        .get(n0)
        .ok_or(Error::EigenIndexOutOfRange(n0, count))?;
    Ok(ResonanceSelection {
        cluster_index: n0,
        members: (lo..hi).collect(),
        lambda: spec.eigenvalues[lo],
        rel_tol,
    })
}

/// Navier resonance `omega = sqrt(1/(rho lambda))` of an inclusion with mass
/// density `rho_j` at the (scaled) eigenvalue `lambda_n0`.
pub fn resonance_frequency(rho_j: f64, lambda_n0: f64) -> Result<f64> {
    if lambda_n0 <= 0.0 {
        return Err(Error::NoRealResonance(lambda_n0));
    }
    if rho_j <= 0.0 {
        return Err(Error::InvalidMaterial(format!("rho_j = {rho_j} must be positive")));
    }
    Ok((1.0 / (rho_j * lambda_n0)).sqrt())
}

/// Sign of the detuning from resonance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum DetuningSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl DetuningSign {
    pub fn factor(self) -> f64 {
        match self {
            DetuningSign::Plus => 1.0,
            DetuningSign::Minus => -1.0,
        }
    }
}

/// Incident frequency at prescribed distance from resonance:
/// `omega^2 = (1 +- b a^h) / (rho_j lambda_n0)`.
pub fn pick_frequency(
    mat: &Material,
    b: f64,
    h: f64,
    sign: DetuningSign,
    a: f64,
    rho_j: f64,
    lambda_n0: f64,
) -> Result<Frequency> {
    if lambda_n0 <= 0.0 {
        return Err(Error::NoRealResonance(lambda_n0));
    }
    let detune = 1.0 + sign.factor() * b * a.powf(h);
    if detune <= 0.0 {
        return Err(Error::NegativeRadicand(detune));
    }
    let omega_sq = detune / (rho_j * lambda_n0);
    Frequency::new(omega_sq.sqrt(), mat)
}

/// Scattering-coefficient matrix of one inclusion.
#[derive(Debug, Clone)]
pub struct ScatteringCoefficient {
    pub matrix: Matrix3<Complex64>,
    /// The resonant denominator `1 - alpha_j omega^2 lambda_n0`, kept for
    /// diagnostics (its sign is the sign of the effective density shift).
    pub denominator: f64,
}

impl ScatteringCoefficient {
    pub fn norm(&self) -> f64 {
        self.matrix.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Applies the (real-symmetric) coefficient to a complex vector.
    pub fn apply(&self, v: &Vector3<Complex64>) -> Vector3<Complex64> {
        self.matrix * v
    }
}

/// `C^(j) = (1 - alpha_j omega^2 lambda_n0)^{-1} sum_l m_l (x) m_l` over the
/// multiplicity group of the selected (scaled) eigenvalue.
pub fn scattering_coefficient(
    spec: &SpectralDecomposition,
    selection: &ResonanceSelection,
    alpha_j: f64,
    freq: &Frequency,
) -> Result<ScatteringCoefficient> {
    let denominator = 1.0 - alpha_j * freq.omega_sq() * selection.lambda;
    if denominator == 0.0 {
        return Err(Error::SingularCoefficient);
    }
    let mut sum = Matrix3::<f64>::zeros();
    for &idx in &selection.members {
        let m = spec.moments[idx];
        for r in 0..3 {
            for c in 0..3 {
                sum[(r, c)] += m[r] * m[c];
            }
        }
    }
    let matrix = Matrix3::from_fn(|r, c| Complex64::from(sum[(r, c)] / denominator));
    Ok(ScatteringCoefficient { matrix, denominator })
}

/// Spectral gap `sigma = min_{n not in the selected cluster}
/// |1 - alpha omega^2 lambda_n|^2`.
pub fn sigma_gap(
    spec: &SpectralDecomposition,
    alpha: f64,
    freq: &Frequency,
    selection: &ResonanceSelection,
) -> Result<f64> {
    let mut best: Option<f64> = None;
    for (n, &lambda) in spec.eigenvalues.iter().enumerate() {
        if selection.members.contains(&n) {
            continue;
        }
        let v = (1.0 - alpha * freq.omega_sq() * lambda).powi(2);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    }
    best.ok_or(Error::UndefinedGap)
}
