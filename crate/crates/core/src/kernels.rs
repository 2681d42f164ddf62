//! Fundamental matrices of the Navier operator and related kernels.
//!
//! The production path evaluates the frequency-domain (Kupradze) matrix in
//! closed form; the series representation is kept as an independent oracle,
//! valid inside its convergence disc. The static (Kelvin) matrix covers the
//! zero-frequency limit, where the closed form has a removable 1/omega^2.

use nalgebra::{Matrix3, Vector3};
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::material::{Frequency, IncidentPlaneWave, Material};
use crate::{Error, Result};

const SINGULAR_TOL: f64 = 1e-14;

/// Static fundamental (Kelvin) matrix
/// `gamma1/(4 pi) I/r + gamma2/(4 pi) (x-y)(x-y)^T / r^3`.
pub fn kelvin_matrix(mat: &Material, x: &Vector3<f64>, y: &Vector3<f64>) -> Result<Matrix3<f64>> {
    let u = x - y;
    let r = u.norm();
    if r < SINGULAR_TOL {
        return Err(Error::CoincidentPoints);
    }
    let g1 = mat.gamma1() / (4.0 * PI * r);
    let g2 = mat.gamma2() / (4.0 * PI * r * r * r);
    let mut out = Matrix3::identity() * g1;
    for k in 0..3 {
        for l in 0..3 {
            out[(k, l)] += g2 * u[k] * u[l];
        }
    }
    Ok(out)
}

/// Scalar Helmholtz kernel `e^{i k r}/(4 pi r)` and its first three radial
/// derivatives, used by the closed-form Kupradze matrix and its gradient.
fn helmholtz_radial(kappa: f64, r: f64) -> [Complex64; 4] {
    let e = Complex64::new(0.0, kappa * r).exp() / (4.0 * PI);
    let ik = Complex64::new(0.0, kappa);
    let g0 = e / r;
    let g1 = e * (ik * r - 1.0) / (r * r);
    let g2 = e * (Complex64::new(2.0 - kappa * kappa * r * r, -2.0 * kappa * r)) / (r * r * r);
    let k2 = kappa * kappa;
    let k3 = k2 * kappa;
    // e (-i k^3 r^3 + 3 k^2 r^2 + 6 i k r - 6) / r^4
    let g3 = e * Complex64::new(3.0 * k2 * r * r - 6.0, -k3 * r * r * r + 6.0 * kappa * r)
        / (r * r * r * r);
    [g0, g1, g2, g3]
}

/// Frequency-domain fundamental (Kupradze) matrix in closed form.
///
/// Decomposed radially as `A(r) I + B(r) uu^T/r^2` with
/// `A = gs/mu + (gs' - gp')/(omega^2 rho0 r)` and
/// `B = ((gs'' - gp'') - (gs' - gp')/r)/(omega^2 rho0)`,
/// where `g` is the scalar Helmholtz kernel at the s/p wave numbers.
pub fn kupradze_matrix(
    mat: &Material,
    freq: &Frequency,
    x: &Vector3<f64>,
    y: &Vector3<f64>,
) -> Result<Matrix3<Complex64>> {
    let u = x - y;
    let r = u.norm();
    if r < SINGULAR_TOL {
        return Err(Error::CoincidentPoints);
    }
    let gs = helmholtz_radial(freq.kappa_s, r);
    let gp = helmholtz_radial(freq.kappa_p, r);
    let w2r = freq.omega_sq() * mat.rho0;
    let a = gs[0] / mat.mu + (gs[1] - gp[1]) / (w2r * r);
    let b = ((gs[2] - gp[2]) - (gs[1] - gp[1]) / r) / w2r;
    let uhat = u / r;
    let mut out = Matrix3::from_element(Complex64::new(0.0, 0.0));
    for k in 0..3 {
        for l in 0..3 {
            out[(k, l)] = b * uhat[k] * uhat[l];
            if k == l {
                out[(k, l)] += a;
            }
        }
    }
    Ok(out)
}

/// Series representation of the Kupradze matrix, truncated at `nmax`.
///
/// Converges for `max(ks, kp) r / 2 < 1`; the n = 0 term is exactly the
/// Kelvin matrix. Retained as an oracle against the closed form.
pub fn kupradze_series(
    mat: &Material,
    freq: &Frequency,
    x: &Vector3<f64>,
    y: &Vector3<f64>,
    nmax: usize,
) -> Result<Matrix3<Complex64>> {
    let u = x - y;
    let r = u.norm();
    if r < SINGULAR_TOL {
        return Err(Error::CoincidentPoints);
    }
    let cs2 = mat.cs() * mat.cs();
    let cp2 = mat.cp() * mat.cp();
    // Running (i ks r)^n / n! and (i kp r)^n / n!.
    let mut zs = Complex64::new(1.0, 0.0);
    let mut zp = Complex64::new(1.0, 0.0);
    let mut diag_sum = Complex64::new(0.0, 0.0);
    let mut dyad_sum = Complex64::new(0.0, 0.0);
    for n in 0..=nmax {
        let nf = n as f64;
        let denom = nf + 2.0;
        // i^n kappa^n omega^0 r^{n-1} terms, with the 1/c^2 split out
        diag_sum += (zs * ((nf + 1.0) / cs2) + zp / cp2) / denom / r;
        dyad_sum += (zs / cs2 - zp / cp2) * (nf - 1.0) / denom / (r * r * r);
        zs *= Complex64::new(0.0, freq.kappa_s * r) / (nf + 1.0);
        zp *= Complex64::new(0.0, freq.kappa_p * r) / (nf + 1.0);
    }
    let pref = 1.0 / (4.0 * PI * mat.rho0);
    let mut out = Matrix3::from_element(Complex64::new(0.0, 0.0));
    for k in 0..3 {
        for l in 0..3 {
            out[(k, l)] = -pref * dyad_sum * u[k] * u[l];
            if k == l {
                out[(k, l)] += pref * diag_sum;
            }
        }
    }
    Ok(out)
}

/// Gradient of the Kupradze matrix with respect to the source point:
/// `grad[l][(i, j)] = d/d y_l Gamma^omega_ij(x, y)`.
pub fn grad_kupradze(
    mat: &Material,
    freq: &Frequency,
    x: &Vector3<f64>,
    y: &Vector3<f64>,
) -> Result<[Matrix3<Complex64>; 3]> {
    let u = x - y;
    let r = u.norm();
    if r < SINGULAR_TOL {
        return Err(Error::CoincidentPoints);
    }
    let gs = helmholtz_radial(freq.kappa_s, r);
    let gp = helmholtz_radial(freq.kappa_p, r);
    let w2r = freq.omega_sq() * mat.rho0;
    let d1 = gs[1] - gp[1];
    let d2 = gs[2] - gp[2];
    let d3 = gs[3] - gp[3];
    let b = (d2 - d1 / r) / w2r;
    let a_prime = gs[1] / mat.mu + (d2 / r - d1 / (r * r)) / w2r;
    let b_prime = (d3 - d2 / r + d1 / (r * r)) / w2r;
    let uhat = u / r;
    let mut grad = [Matrix3::from_element(Complex64::new(0.0, 0.0)); 3];
    for l in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                // d/d u_l of A delta_ij + B u_i u_j / r^2, then flip sign for d/d y_l
                let mut v = a_prime * uhat[l] * if i == j { 1.0 } else { 0.0 }
                    + b_prime * uhat[l] * uhat[i] * uhat[j]
                    - 2.0 * b * uhat[i] * uhat[j] * uhat[l] / r;
                if l == i {
                    v += b * uhat[j] / r;
                }
                if l == j {
                    v += b * uhat[i] / r;
                }
                grad[l][(i, j)] = -v;
            }
        }
    }
    Ok(grad)
}

/// Longitudinal far-field kernel `xhat xhat^T e^{-i kp xhat.y} / (4 pi (lambda + 2 mu))`.
pub fn farfield_kernel_p(
    mat: &Material,
    freq: &Frequency,
    xhat: &Vector3<f64>,
    y: &Vector3<f64>,
) -> Matrix3<Complex64> {
    let phase = Complex64::new(0.0, -freq.kappa_p * xhat.dot(y)).exp();
    let pref = phase / (4.0 * PI * (mat.lambda + 2.0 * mat.mu));
    Matrix3::from_fn(|i, j| pref * xhat[i] * xhat[j])
}

/// Transversal far-field kernel `(I - xhat xhat^T) e^{-i ks xhat.y} / (4 pi mu)`.
pub fn farfield_kernel_s(
    mat: &Material,
    freq: &Frequency,
    xhat: &Vector3<f64>,
    y: &Vector3<f64>,
) -> Matrix3<Complex64> {
    let phase = Complex64::new(0.0, -freq.kappa_s * xhat.dot(y)).exp();
    let pref = phase / (4.0 * PI * mat.mu);
    Matrix3::from_fn(|i, j| pref * ((if i == j { 1.0 } else { 0.0 }) - xhat[i] * xhat[j]))
}

/// Incident plane-wave field; see [`IncidentPlaneWave::evaluate`].
pub fn incident_field(
    wave: &IncidentPlaneWave,
    freq: &Frequency,
    x: &Vector3<f64>,
) -> Vector3<Complex64> {
    wave.evaluate(freq, x)
}

/// Second-order centered finite-difference residual of the time-harmonic
/// Navier operator `mu Lap u + (lambda + mu) grad div u + omega^2 rho0 u`
/// applied to `field` at `x`. Vanishes as O(step^2) on exact solutions.
pub fn navier_residual<F>(
    field: F,
    mat: &Material,
    freq: &Frequency,
    x: &Vector3<f64>,
    step: f64,
) -> Vector3<Complex64>
where
    F: Fn(&Vector3<f64>) -> Vector3<Complex64>,
{
    let h = step;
    let h2 = h * h;
    let center = field(x);
    let shift = |d: usize, s: f64| {
        let mut p = *x;
        p[d] += s * h;
        p
    };
    let mut lap = Vector3::from_element(Complex64::new(0.0, 0.0));
    for d in 0..3 {
        let fp = field(&shift(d, 1.0));
        let fm = field(&shift(d, -1.0));
        lap += (fp + fm - center * Complex64::from(2.0)) / Complex64::from(h2);
    }
    let mut graddiv = Vector3::from_element(Complex64::new(0.0, 0.0));
    for i in 0..3 {
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 0..3 {
            if i == j {
                let fp = field(&shift(i, 1.0));
                let fm = field(&shift(i, -1.0));
                acc += (fp[j] + fm[j] - 2.0 * center[j]) / h2;
            } else {
                let mut pp = *x;
                pp[i] += h;
                pp[j] += h;
                let mut pm = *x;
                pm[i] += h;
                pm[j] -= h;
                let mut mp = *x;
                mp[i] -= h;
                mp[j] += h;
                let mut mm = *x;
                mm[i] -= h;
                mm[j] -= h;
                acc += (field(&pp)[j] - field(&pm)[j] - field(&mp)[j] + field(&mm)[j]) / (4.0 * h2);
            }
        }
        graddiv[i] = acc;
    }
    let w2r = freq.omega_sq() * mat.rho0;
    lap * Complex64::from(mat.mu)
        + graddiv * Complex64::from(mat.lambda + mat.mu)
        + center * Complex64::from(w2r)
}

/// The closed-form bound constants of the kernel estimates, together with
/// the geometric inputs they were evaluated at.
#[derive(Debug, Clone, Copy)]
pub struct BoundConstants {
    /// Entrywise bound on `Gamma^omega - Gamma^0` for x, y in one inclusion.
    pub h1: f64,
    /// Bound on `grad_y Gamma^omega` for y in an inclusion and x beyond the
    /// standoff distance.
    pub h2: f64,
    /// Coefficient of the 1/d singularity of `|Gamma^omega|` between inclusions.
    pub h3: f64,
    /// Constant part of the same bound.
    pub h4: f64,
    /// Coefficient of the 1/d^2 singularity of `|grad Gamma^omega|`.
    pub h5: f64,
    /// Constant part of the gradient bound.
    pub h6: f64,
    pub diam_d: f64,
    pub diam_omega: f64,
    pub separation: f64,
}

/// Evaluates H1..H6 for the given geometry.
///
/// Requires `kappa * diam / 2 < 1` for both wave numbers on both the
/// inclusion diameter and the domain diameter, and a positive standoff
/// separation; violations are reported by name.
pub fn bound_constants(
    mat: &Material,
    freq: &Frequency,
    diam_d: f64,
    diam_omega: f64,
    separation: f64,
) -> Result<BoundConstants> {
    let checks = [
        ("kappa_s * diam_D / 2 < 1", 0.5 * freq.kappa_s * diam_d),
        ("kappa_p * diam_D / 2 < 1", 0.5 * freq.kappa_p * diam_d),
        ("kappa_s * diam_Omega / 2 < 1", 0.5 * freq.kappa_s * diam_omega),
        ("kappa_p * diam_Omega / 2 < 1", 0.5 * freq.kappa_p * diam_omega),
    ];
    for (name, value) in checks {
        if value >= 1.0 {
            return Err(Error::ConvergenceCondition(format!("{name} (got {value:.6})")));
        }
    }
    if !(separation > 0.0) {
        return Err(Error::ConvergenceCondition(format!(
            "separation > 0 (got {separation})"
        )));
    }
    let ks = freq.kappa_s;
    let kp = freq.kappa_p;
    let cs2 = mat.cs() * mat.cs();
    let cp2 = mat.cp() * mat.cp();
    let rho = mat.rho0;
    let pref = 1.0 / (4.0 * PI * rho);

    let geom_bound = |diam: f64| {
        pref * (2.0 * ks / cs2 / (1.0 - 0.5 * ks * diam) + kp / cs2 / (1.0 - 0.5 * kp * diam))
    };
    let h1 = geom_bound(diam_d);
    let h4 = geom_bound(diam_d);
    let h3 = pref * (1.0 / cs2 + 1.0 / cp2);
    let h5 = 3.0 * pref * (1.0 / cs2 + 1.0 / cp2);
    let d = separation;
    let w2 = freq.omega_sq();
    let h2 = 3f64.sqrt()
        * ((ks + 1.0 / d) / d / (4.0 * PI * mat.mu)
            + 1.0 / (4.0 * PI * w2 * rho)
                * ((ks.powi(3) + kp.powi(3)) / (d * d)
                    + (ks * ks + kp * kp) / d * (3.0 + 6.0 / d)
                    + 24.0 * (ks + kp) / (d * d * d)
                    + 48.0 / (d * d * d * d)));
    let h6 = 1.0 / (4.0 * PI * rho * w2)
        * (0.25 * (3.0 * ks.powi(4) + 2.0 * kp.powi(4))
            + 2.0 * ks.powi(4) * (0.5 * ks * diam_omega) / (1.0 - 0.5 * ks * diam_omega)
            + kp.powi(4) * (0.5 * kp * diam_omega) / (1.0 - 0.5 * kp * diam_omega));
    Ok(BoundConstants { h1, h2, h3, h4, h5, h6, diam_d, diam_omega, separation })
}

/// Max entrywise magnitude of a complex 3x3 matrix.
pub fn max_entry(m: &Matrix3<Complex64>) -> f64 {
    m.iter().map(|c| c.norm()).fold(0.0, f64::max)
}
