//! Background material, frequency bookkeeping and incident plane waves.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Homogeneous isotropic elastic background.
///
/// Wave speeds derive from the Lamé constants and the mass density:
/// `cs = sqrt(mu/rho0)`, `cp = sqrt((lambda + 2 mu)/rho0)`, so `cp > cs`
/// whenever the strong-ellipticity conditions hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub lambda: f64,
    pub mu: f64,
    pub rho0: f64,
}

impl Material {
    pub fn new(lambda: f64, mu: f64, rho0: f64) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::InvalidMaterial(format!("mu = {mu} must be positive")));
        }
        if !(3.0 * lambda + 2.0 * mu > 0.0) {
            return Err(Error::InvalidMaterial(format!(
                "3*lambda + 2*mu = {} must be positive",
                3.0 * lambda + 2.0 * mu
            )));
        }
        if !(rho0 > 0.0) {
            return Err(Error::InvalidMaterial(format!("rho0 = {rho0} must be positive")));
        }
        Ok(Self { lambda, mu, rho0 })
    }

    /// Shear (transversal) wave speed.
    pub fn cs(&self) -> f64 {
        (self.mu / self.rho0).sqrt()
    }

    /// Pressure (longitudinal) wave speed.
    pub fn cp(&self) -> f64 {
        ((self.lambda + 2.0 * self.mu) / self.rho0).sqrt()
    }

    /// First Kelvin coefficient `(1/mu + 1/(2 mu + lambda)) / 2`.
    pub fn gamma1(&self) -> f64 {
        0.5 * (1.0 / self.mu + 1.0 / (2.0 * self.mu + self.lambda))
    }

    /// Second Kelvin coefficient `(1/mu - 1/(2 mu + lambda)) / 2`.
    pub fn gamma2(&self) -> f64 {
        0.5 * (1.0 / self.mu - 1.0 / (2.0 * self.mu + self.lambda))
    }
}

/// A positive circular frequency with its derived wave numbers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frequency {
    pub omega: f64,
    pub kappa_s: f64,
    pub kappa_p: f64,
}

impl Frequency {
    pub fn new(omega: f64, mat: &Material) -> Result<Self> {
        if !(omega > 0.0) {
            return Err(Error::InvalidFrequency(format!("omega = {omega} must be positive")));
        }
        Ok(Self {
            omega,
            kappa_s: omega / mat.cs(),
            kappa_p: omega / mat.cp(),
        })
    }

    pub fn omega_sq(&self) -> f64 {
        self.omega * self.omega
    }
}

/// Plane incident wave `b1 theta e^{i kp theta.x} + b2 theta_perp e^{i ks theta.x}`.
#[derive(Debug, Clone)]
pub struct IncidentPlaneWave {
    pub theta: Vector3<f64>,
    pub theta_perp: Vector3<f64>,
    pub b1: Complex64,
    pub b2: Complex64,
}

const UNIT_TOL: f64 = 1e-12;

impl IncidentPlaneWave {
    pub fn new(
        theta: Vector3<f64>,
        theta_perp: Vector3<f64>,
        b1: Complex64,
        b2: Complex64,
    ) -> Result<Self> {
        if (theta.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPlaneWave(format!(
                "|theta| = {} is not 1",
                theta.norm()
            )));
        }
        if (theta_perp.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidPlaneWave(format!(
                "|theta_perp| = {} is not 1",
                theta_perp.norm()
            )));
        }
        if theta.dot(&theta_perp).abs() > UNIT_TOL {
            return Err(Error::InvalidPlaneWave(format!(
                "theta.theta_perp = {:e} is not 0",
                theta.dot(&theta_perp)
            )));
        }
        Ok(Self { theta, theta_perp, b1, b2 })
    }

    /// Pure p-wave along `theta` with unit amplitude.
    pub fn pressure(theta: Vector3<f64>, theta_perp: Vector3<f64>) -> Result<Self> {
        Self::new(theta, theta_perp, Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0))
    }

    /// Longitudinal part `b1 theta e^{i kp theta.x}`.
    pub fn p_part(&self, freq: &Frequency, x: &Vector3<f64>) -> Vector3<Complex64> {
        let phase = Complex64::new(0.0, freq.kappa_p * self.theta.dot(x)).exp();
        self.theta.map(|c| self.b1 * phase * c)
    }

    /// Transversal part `b2 theta_perp e^{i ks theta.x}`.
    pub fn s_part(&self, freq: &Frequency, x: &Vector3<f64>) -> Vector3<Complex64> {
        let phase = Complex64::new(0.0, freq.kappa_s * self.theta.dot(x)).exp();
        self.theta_perp.map(|c| self.b2 * phase * c)
    }

    /// Total incident field at `x`.
    pub fn evaluate(&self, freq: &Frequency, x: &Vector3<f64>) -> Vector3<Complex64> {
        self.p_part(freq, x) + self.s_part(freq, x)
    }
}
