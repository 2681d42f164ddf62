//! Scattered fields, p/s far fields and N-level Born fields synthesized from
//! the interaction coefficients.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::foldy::BornSeries;
use crate::geometry::Cluster;
use crate::kernels::{farfield_kernel_p, farfield_kernel_s, kupradze_matrix};
use crate::material::Material;
use crate::{Error, Result};

/// Exclusion radius around each center: circumscribed ball plus a 2a margin.
fn exclusion_radius(cluster: &Cluster) -> f64 {
    cluster.a * cluster.shape_radius + 2.0 * cluster.a
}

fn check_outside(cluster: &Cluster, x: &Vector3<f64>) -> Result<()> {
    let r = exclusion_radius(cluster);
    for (j, inc) in cluster.inclusions.iter().enumerate() {
        if (x - inc.center).norm() <= r {
            return Err(Error::PointInsideInclusion(j));
        }
    }
    Ok(())
}

/// Scattered field `sum_j alpha_j omega^2 Gamma^omega(x, z_j) Q_j`.
pub fn scattered_field(
    cluster: &Cluster,
    coeffs: &[Vector3<Complex64>],
    mat: &Material,
    x: &Vector3<f64>,
) -> Result<Vector3<Complex64>> {
    check_outside(cluster, x)?;
    let freq = cluster.frequency;
    let w2 = freq.omega_sq();
    let mut field = Vector3::from_element(Complex64::new(0.0, 0.0));
    for (inc, q) in cluster.inclusions.iter().zip(coeffs) {
        let gamma = kupradze_matrix(mat, &freq, x, &inc.center)?;
        field += gamma * q * Complex64::from(inc.alpha * w2);
    }
    Ok(field)
}

/// Scattered field of the order-`n` Born truncation.
pub fn n_level_field(
    cluster: &Cluster,
    born: &BornSeries,
    n: usize,
    mat: &Material,
    x: &Vector3<f64>,
) -> Result<Vector3<Complex64>> {
    scattered_field(cluster, &born.coefficients(n), mat, x)
}

/// p and s parts of the far field in one direction.
pub fn farfield(
    cluster: &Cluster,
    coeffs: &[Vector3<Complex64>],
    mat: &Material,
    xhat: &Vector3<f64>,
) -> (Vector3<Complex64>, Vector3<Complex64>) {
    let freq = cluster.frequency;
    let w2 = freq.omega_sq();
    let mut p_sum = Vector3::from_element(Complex64::new(0.0, 0.0));
    let mut s_sum = Vector3::from_element(Complex64::new(0.0, 0.0));
    for (inc, q) in cluster.inclusions.iter().zip(coeffs) {
        let w2a = Complex64::from(inc.alpha * w2);
        let phase_p = Complex64::new(0.0, -freq.kappa_p * xhat.dot(&inc.center)).exp();
        let phase_s = Complex64::new(0.0, -freq.kappa_s * xhat.dot(&inc.center)).exp();
        p_sum += q * (w2a * phase_p);
        s_sum += q * (w2a * phase_s);
    }
    let along: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * p_sum[i]).sum();
    let u_p = Vector3::from_fn(|i, _| {
        Complex64::from(xhat[i]) * along / Complex64::from(4.0 * PI * (mat.lambda + 2.0 * mat.mu))
    });
    let along_s: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * s_sum[i]).sum();
    let u_s = Vector3::from_fn(|i, _| {
        (s_sum[i] - Complex64::from(xhat[i]) * along_s) / Complex64::from(4.0 * PI * mat.mu)
    });
    (u_p, u_s)
}

/// Far-field pattern over a set of directions.
#[derive(Debug, Clone)]
pub struct FarFieldPattern {
    pub directions: Vec<Vector3<f64>>,
    pub p: Vec<Vector3<Complex64>>,
    pub s: Vec<Vector3<Complex64>>,
}

impl FarFieldPattern {
    pub fn compute(
        cluster: &Cluster,
        coeffs: &[Vector3<Complex64>],
        mat: &Material,
        directions: &[Vector3<f64>],
    ) -> Self {
        let mut p = Vec::with_capacity(directions.len());
        let mut s = Vec::with_capacity(directions.len());
        for xhat in directions {
            let (up, us) = farfield(cluster, coeffs, mat, xhat);
            p.push(up);
            s.push(us);
        }
        Self { directions: directions.to_vec(), p, s }
    }

    /// Largest violation of the projector identities: the p part must be
    /// parallel to the direction, the s part orthogonal to it.
    pub fn projector_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for ((xhat, up), us) in self.directions.iter().zip(&self.p).zip(&self.s) {
            let dot_s: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * us[i]).sum();
            let s_norm = us.map(|c| c.norm_sqr()).sum().sqrt();
            if s_norm > 0.0 {
                worst = worst.max(dot_s.norm() / s_norm);
            }
            let along: Complex64 = (0..3).map(|i| Complex64::from(xhat[i]) * up[i]).sum();
            let perp = Vector3::from_fn(|i, _| up[i] - along * xhat[i]);
            let p_norm = up.map(|c| c.norm_sqr()).sum().sqrt();
            if p_norm > 0.0 {
                worst = worst.max(perp.map(|c| c.norm_sqr()).sum().sqrt() / p_norm);
            }
        }
        worst
    }
}

/// Deterministic quasi-uniform unit directions (spherical Fibonacci grid).
pub fn fibonacci_directions(count: usize) -> Vec<Vector3<f64>> {
    let golden = (1.0 + 5f64.sqrt()) / 2.0;
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = 2.0 * PI * (i as f64 / golden).fract();
            Vector3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// Pairing of the far field against a probe direction pair:
/// `U_inf . ((lambda+2mu) beta1 xhat + mu beta2 xhat_perp)` with
/// caller-supplied weights beta1, beta2.
pub fn farfield_pairing(
    mat: &Material,
    up: &Vector3<Complex64>,
    us: &Vector3<Complex64>,
    xhat: &Vector3<f64>,
    xhat_perp: &Vector3<f64>,
    beta1: Complex64,
    beta2: Complex64,
) -> Complex64 {
    let u = up + us;
    let p: Complex64 = (0..3).map(|i| u[i] * Complex64::from(xhat[i])).sum();
    let s: Complex64 = (0..3).map(|i| u[i] * Complex64::from(xhat_perp[i])).sum();
    p * beta1 * Complex64::from(mat.lambda + 2.0 * mat.mu) + s * beta2 * Complex64::from(mat.mu)
}

/// Matrix-style far-field synthesis through the explicit kernels; used as a
/// cross-check of the projected sums in [`farfield`].
pub fn farfield_via_kernels(
    cluster: &Cluster,
    coeffs: &[Vector3<Complex64>],
    mat: &Material,
    xhat: &Vector3<f64>,
) -> (Vector3<Complex64>, Vector3<Complex64>) {
    let freq = cluster.frequency;
    let w2 = freq.omega_sq();
    let mut u_p = Vector3::from_element(Complex64::new(0.0, 0.0));
    let mut u_s = Vector3::from_element(Complex64::new(0.0, 0.0));
    for (inc, q) in cluster.inclusions.iter().zip(coeffs) {
        let gp: Matrix3<Complex64> = farfield_kernel_p(mat, &freq, xhat, &inc.center);
        let gs: Matrix3<Complex64> = farfield_kernel_s(mat, &freq, xhat, &inc.center);
        u_p += gp * q * Complex64::from(inc.alpha * w2);
        u_s += gs * q * Complex64::from(inc.alpha * w2);
    }
    (u_p, u_s)
}
