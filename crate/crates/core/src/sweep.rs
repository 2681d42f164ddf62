//! Convergence sweeps over the inclusion scale `a` with least-squares
//! log-log slope fits against the predicted exponents.

use nalgebra::Vector3;
use serde::Serialize;

use crate::effective::{
    assemble_ls_system, compare_cluster_vs_effective, effective_coefficient, effective_pattern,
    solve_effective, CoefficientMode, EffectiveConfig,
};
use crate::fields::FarFieldPattern;
use crate::foldy::{assemble_system, born_truncation, norm_inf, operator_norm_inf, solve};
use crate::geometry::{build_cluster, ClusterConfig};
use crate::material::{IncidentPlaneWave, Material};
use crate::shapes::ReferenceShape;
use crate::spectra::SpectralDecomposition;
use crate::{Error, Result};

/// What a sweep measures at each scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepMode {
    /// Full Foldy solve; the metric is the coefficient amplitude |Q|_inf.
    Full,
    /// Born truncation at the given order; the metric is the relative
    /// truncation error |Q - Qbar^N|_inf / |Q|_inf.
    Born(usize),
    /// Far-field difference against the homogenized solve on a grid of the
    /// given resolution.
    FarfieldDiff { grid_resolution: usize },
}

impl SweepMode {
    pub fn metric_name(&self) -> String {
        match self {
            SweepMode::Full => "q_norm_inf".into(),
            SweepMode::Born(n) => format!("born_rel_err_n{n}"),
            SweepMode::FarfieldDiff { .. } => "farfield_diff_max".into(),
        }
    }
}

/// One sweep sample.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub a: f64,
    pub m: usize,
    pub norm_b: f64,
    pub metric: f64,
}

/// A fitted slope against its prediction.
#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub name: String,
    pub predicted: f64,
    pub fitted: f64,
}

impl SlopeFit {
    pub fn relative_error(&self) -> f64 {
        (self.fitted - self.predicted).abs() / self.predicted.abs().max(1e-300)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub metric_name: String,
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SlopeFit>,
}

/// Ordinary least-squares slope of `ln y` against `ln x`; NaN when any
/// sample is non-positive.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    if xs.iter().any(|&x| x <= 0.0) || ys.iter().any(|&y| y <= 0.0) {
        return f64::NAN;
    }
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

/// Runs the sweep: instantiates the cluster at every `a`, validates the
/// regime, measures the mode metric, and fits log-log slopes for the metric
/// and for |B|_inf.
pub fn convergence_sweep(
    mat: &Material,
    reference: &SpectralDecomposition,
    shape: &ReferenceShape,
    base: &ClusterConfig,
    a_values: &[f64],
    mode: SweepMode,
    wave: &IncidentPlaneWave,
    directions: &[Vector3<f64>],
) -> Result<SweepResult> {
    if a_values.len() < 3 {
        return Err(Error::SweepTooShort(3, a_values.len()));
    }
    let mut rows = Vec::with_capacity(a_values.len());
    for &a in a_values {
        let cfg = base.with_a(a);
        let cluster = build_cluster(&cfg, mat, reference, shape)?;
        let system = assemble_system(&cluster, mat, wave)?;
        let norm_b = operator_norm_inf(&system);
        let metric = match mode {
            SweepMode::Full => {
                let sol = solve(&system)?;
                norm_inf(&sol.q)
            }
            SweepMode::Born(order) => {
                let sol = solve(&system)?;
                let series = born_truncation(&system, order);
                norm_inf(&(series.q_bar(order) - &sol.q)) / norm_inf(&sol.q)
            }
            SweepMode::FarfieldDiff { grid_resolution } => {
                let sol = solve(&system)?;
                let cluster_far =
                    FarFieldPattern::compute(&cluster, &sol.coefficients(), mat, directions);
                // the homogenized problem lives on the support actually
                // filled by the placement
                let support = match cfg.placement {
                    crate::geometry::Placement::ScaledCount { .. } => {
                        crate::geometry::scaled_count_support(&cfg.region)
                    }
                    crate::geometry::Placement::Periodic { .. } => cfg.region,
                };
                let coeff = effective_coefficient(
                    &cluster,
                    &support,
                    cfg.c,
                    cfg.b,
                    cfg.sign,
                    cfg.s,
                    CoefficientMode::Limit,
                );
                let eff_cfg = EffectiveConfig::new(grid_resolution, coeff, support)?;
                let eff_system = assemble_ls_system(&eff_cfg, mat, &cluster.frequency, wave)?;
                let eff_sol = solve_effective(&eff_system)?;
                let eff_far =
                    effective_pattern(&eff_sol, &eff_system, mat, &cluster.frequency, directions);
                compare_cluster_vs_effective(&cluster_far, &eff_far, mat)?.max_combined()
            }
        };
        rows.push(SweepRow { a, m: cluster.len(), norm_b, metric });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.a).collect();
    let mut fits = Vec::new();
    let metric_pred = match mode {
        SweepMode::Full => 3.0 - base.h,
        SweepMode::Born(order) => (order as f64 + 1.0) * (1.0 - base.h - base.s),
        SweepMode::FarfieldDiff { .. } => base.h.min(base.s / 3.0),
    };
    let metric_vals: Vec<f64> = rows.iter().map(|r| r.metric).collect();
    fits.push(SlopeFit {
        name: mode.metric_name(),
        predicted: metric_pred,
        fitted: fit_loglog(&xs, &metric_vals),
    });
    let norm_vals: Vec<f64> = rows.iter().map(|r| r.norm_b).collect();
    if norm_vals.iter().all(|&v| v > 0.0) {
        fits.push(SlopeFit {
            name: "norm_b_inf".into(),
            predicted: 1.0 - base.h - base.s,
            fitted: fit_loglog(&xs, &norm_vals),
        });
    }
    Ok(SweepResult { metric_name: mode.metric_name(), rows, fits })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_fit_recovers_power_law() {
        let xs = [0.1, 0.07, 0.05, 0.035];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.7 * x.powf(1.25)).collect();
        let slope = fit_loglog(&xs, &ys);
        assert!((slope - 1.25).abs() < 1e-12);
    }

    #[test]
    fn loglog_fit_rejects_nonpositive() {
        assert!(fit_loglog(&[0.1, 0.2, 0.3], &[1.0, 0.0, 2.0]).is_nan());
    }

    #[test]
    fn sweep_needs_three_points() {
        let mat = Material::new(1.0, 1.0, 1.0).unwrap();
        let shape = crate::shapes::build_shape("ball", 4).unwrap();
        let reference = crate::spectra::shape_spectrum(&shape, &mat).unwrap();
        let cfg = ClusterConfig::new(0.1, Some(0.3), None, 0.6).unwrap();
        let wave = IncidentPlaneWave::pressure(Vector3::z(), Vector3::x()).unwrap();
        let out = convergence_sweep(
            &mat,
            &reference,
            &shape,
            &cfg,
            &[0.1, 0.07],
            SweepMode::Full,
            &wave,
            &[],
        );
        assert!(matches!(out, Err(Error::SweepTooShort(3, 2))));
    }
}
