//! Scenario ingestion and the command pipeline: spectrum, simulate, sweep
//! and homogenize, with deterministic CSV/report emission.

use nalgebra::Vector3;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::effective::{
    assemble_ls_system, compare_cluster_vs_effective, effective_coefficient, effective_pattern,
    homogenized_density_sign, solve_effective, CoefficientMode, EffectiveConfig,
};
use crate::fields::{fibonacci_directions, scattered_field, FarFieldPattern};
use crate::foldy::{assemble_system, invertibility_check, make_solver, operator_norm_inf};
use crate::geometry::{
    build_cluster, scaled_count_support, validate_born_regime, validate_regime, BoxRegion,
    ClusterConfig, Placement,
};
use crate::material::{IncidentPlaneWave, Material};
use crate::shapes::{build_shape, ReferenceShape};
use crate::spectra::{
    group_eigenvalue, resonance_frequency, shape_spectrum, DetuningSign, SpectralDecomposition,
};
use crate::sweep::{convergence_sweep, SweepMode, SweepResult};
use crate::{Error, Result};

/// Complex amplitude serialized as `[re, im]`.
fn to_complex(pair: [f64; 2]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSection {
    pub lambda: f64,
    pub mu: f64,
    pub rho0: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeSection {
    /// Registered shape name ("ball", "cube") or "mask".
    pub kind: String,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    /// Voxel-mask file, for `kind = "mask"`.
    pub mask_file: Option<PathBuf>,
    /// Geometric shrink factor applied to the reference shape.
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_resolution() -> usize {
    12
}

fn default_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSection {
    pub a: Option<f64>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub h: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_sign")]
    pub sign: String,
    #[serde(default)]
    pub n0: usize,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_group_tol")]
    pub group_tol: f64,
}

fn default_b() -> f64 {
    1.0
}

fn default_sign() -> String {
    "+".into()
}

fn default_c() -> f64 {
    1.0
}

fn default_group_tol() -> f64 {
    1e-4
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlacementSection {
    /// "periodic" or "scaled_count".
    pub mode: String,
    #[serde(default = "default_m0")]
    pub m0: f64,
    #[serde(default = "default_skip")]
    pub skip_boundary: bool,
}

fn default_m0() -> f64 {
    1.0
}

fn default_skip() -> bool {
    true
}

impl Default for PlacementSection {
    fn default() -> Self {
        Self { mode: "periodic".into(), m0: 1.0, skip_boundary: true }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IncidentSection {
    pub theta: [f64; 3],
    pub theta_perp: [f64; 3],
    pub b1: [f64; 2],
    pub b2: [f64; 2],
}

impl Default for IncidentSection {
    fn default() -> Self {
        Self {
            theta: [0.0, 0.0, 1.0],
            theta_perp: [1.0, 0.0, 0.0],
            b1: [1.0, 0.0],
            b2: [0.0, 0.0],
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationSection {
    /// Number of quasi-uniform far-field directions.
    #[serde(default = "default_directions")]
    pub directions: usize,
    /// Near-field observation points.
    #[serde(default)]
    pub points: Vec<[f64; 3]>,
}

fn default_directions() -> usize {
    32
}

impl Default for ObservationSection {
    fn default() -> Self {
        Self { directions: default_directions(), points: Vec::new() }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Coupling solver: "full" or "born".
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub born_order: usize,
    #[serde(default = "default_dense_limit")]
    pub dense_limit: usize,
    /// Dump the interaction matrix and incident vector as text.
    #[serde(default)]
    pub dump_system: bool,
}

fn default_mode() -> String {
    "full".into()
}

fn default_dense_limit() -> usize {
    1000
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            mode: default_mode(),
            born_order: 0,
            dense_limit: default_dense_limit(),
            dump_system: false,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub a_values: Vec<f64>,
    /// "full", "born" or "farfield_diff".
    #[serde(default = "default_mode")]
    pub mode: String,
    #[serde(default)]
    pub born_order: usize,
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
}

fn default_grid() -> usize {
    8
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveSection {
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
    #[serde(default = "default_coefficient_mode")]
    pub coefficient_mode: String,
}

fn default_coefficient_mode() -> String {
    "limit".into()
}

impl Default for EffectiveSection {
    fn default() -> Self {
        Self {
            grid_resolution: default_grid(),
            coefficient_mode: default_coefficient_mode(),
        }
    }
}

/// A parsed scenario file.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub material: MaterialSection,
    pub shape: ShapeSection,
    pub regime: RegimeSection,
    #[serde(default)]
    pub placement: PlacementSection,
    #[serde(default)]
    pub incident: IncidentSection,
    #[serde(default)]
    pub observation: ObservationSection,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    #[serde(default)]
    pub effective: EffectiveSection,
}

impl Scenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Scenario(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(e.to_string()))
    }

    fn sign(&self) -> Result<DetuningSign> {
        match self.regime.sign.as_str() {
            "+" | "plus" => Ok(DetuningSign::Plus),
            "-" | "minus" => Ok(DetuningSign::Minus),
            other => Err(Error::Scenario(format!("sign '{other}' is not '+' or '-'"))),
        }
    }

    fn placement(&self) -> Result<Placement> {
        match self.placement.mode.as_str() {
            "periodic" => Ok(Placement::Periodic { skip_boundary: self.placement.skip_boundary }),
            "scaled_count" => Ok(Placement::ScaledCount { m0: self.placement.m0 }),
            other => Err(Error::Scenario(format!("unknown placement mode '{other}'"))),
        }
    }

    fn coefficient_mode(&self) -> Result<CoefficientMode> {
        match self.effective.coefficient_mode.as_str() {
            "limit" => Ok(CoefficientMode::Limit),
            "finite_a" => Ok(CoefficientMode::FiniteA),
            other => Err(Error::Scenario(format!("unknown coefficient mode '{other}'"))),
        }
    }

    fn cluster_config(&self, a: f64) -> Result<ClusterConfig> {
        let mut cfg = ClusterConfig::new(a, self.regime.s, self.regime.t, self.regime.h)?;
        cfg.b = self.regime.b;
        cfg.sign = self.sign()?;
        cfg.n0 = self.regime.n0;
        cfg.c = self.regime.c;
        cfg.group_tol = self.regime.group_tol;
        cfg.placement = self.placement()?;
        cfg.region = BoxRegion::unit_centered();
        Ok(cfg)
    }

    fn scale_a(&self) -> Result<f64> {
        self.regime
            .a
            .ok_or_else(|| Error::Scenario("regime.a is required for this command".into()))
    }
}

/// Everything derived from the scenario once: material, shape, spectrum and
/// the incident wave.
pub struct Pipeline {
    pub scenario: Scenario,
    pub material: Material,
    pub shape: ReferenceShape,
    pub reference: SpectralDecomposition,
    pub wave: IncidentPlaneWave,
}

impl Pipeline {
    pub fn prepare(scenario: Scenario) -> Result<Self> {
        let material = Material::new(
            scenario.material.lambda,
            scenario.material.mu,
            scenario.material.rho0,
        )?;
        let base_shape = match scenario.shape.kind.as_str() {
            "mask" => {
                let path = scenario.shape.mask_file.as_ref().ok_or_else(|| {
                    Error::Scenario("shape.mask_file is required for kind = \"mask\"".into())
                })?;
                ReferenceShape::from_mask_file(path)?
            }
            name => build_shape(name, scenario.shape.resolution)?,
        };
        let shape = if scenario.shape.scale == 1.0 {
            base_shape
        } else {
            base_shape.scaled(scenario.shape.scale)
        };
        let reference = shape_spectrum(&shape, &material)?;
        let wave = IncidentPlaneWave::new(
            Vector3::from(scenario.incident.theta),
            Vector3::from(scenario.incident.theta_perp),
            to_complex(scenario.incident.b1),
            to_complex(scenario.incident.b2),
        )?;
        Ok(Self { scenario, material, shape, reference, wave })
    }

    pub fn directions(&self) -> Vec<Vector3<f64>> {
        fibonacci_directions(self.scenario.observation.directions)
    }
}

/// Summary written next to the data files.
#[derive(Debug, Clone, Serialize, Default)]
pub struct RunReport {
    pub command: String,
    pub regime: BTreeMap<String, f64>,
    pub regime_checks: Vec<String>,
    pub resonance: BTreeMap<String, f64>,
    pub cluster_size: Option<usize>,
    pub norm_b_inf: Option<f64>,
    pub condition_estimate: Option<f64>,
    pub born_safe: Option<bool>,
    pub sign_diagnostic: Option<crate::effective::SignDiagnostic>,
    pub timings_ms: BTreeMap<String, u128>,
    pub outputs: Vec<String>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.17e}")
}

fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

fn record_output(report: &mut RunReport, path: &Path) {
    report.outputs.push(path.display().to_string());
}

fn regime_map(cfg: &ClusterConfig) -> BTreeMap<String, f64> {
    let mut m = BTreeMap::new();
    m.insert("a".into(), cfg.a);
    m.insert("s".into(), cfg.s);
    m.insert("t".into(), cfg.t);
    m.insert("h".into(), cfg.h);
    m.insert("b".into(), cfg.b);
    m.insert("c".into(), cfg.c);
    m.insert("n0".into(), cfg.n0 as f64);
    m.insert("sign".into(), cfg.sign.factor());
    m
}

/// Runs the spectral analysis and writes the spectrum export.
pub fn run_spectrum(pipeline: &Pipeline, outdir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(outdir)?;
    let mut report = RunReport { command: "spectrum".into(), ..Default::default() };
    let t0 = Instant::now();
    let spec = &pipeline.reference;
    report.timings_ms.insert("spectrum".into(), t0.elapsed().as_millis());

    let mut text = String::from("# index eigenvalue moment_x moment_y moment_z\n");
    for (i, lambda) in spec.eigenvalues.iter().enumerate() {
        let m = spec.moments[i];
        text.push_str(&format!(
            "{} {} {} {} {}\n",
            i,
            fmt_f(*lambda),
            fmt_f(m[0]),
            fmt_f(m[1]),
            fmt_f(m[2])
        ));
    }
    let path = outdir.join("spectrum.txt");
    write_text(&path, &text)?;
    record_output(&mut report, &path);

    // resonance data for the configured regime, when a is given
    if let Ok(a) = pipeline.scenario.scale_a() {
        let cfg = pipeline.scenario.cluster_config(a)?;
        let scaled = crate::spectra::scale_spectrum(spec, a);
        let selection = group_eigenvalue(&scaled, cfg.n0, cfg.group_tol)?;
        let rho = cfg.rho();
        report.regime = regime_map(&cfg);
        report.resonance.insert("lambda_ref".into(), spec.eigenvalues[selection.members[0]]);
        report.resonance.insert("lambda_scaled".into(), selection.lambda);
        report
            .resonance
            .insert("multiplicity".into(), selection.multiplicity() as f64);
        if selection.lambda > 0.0 {
            report
                .resonance
                .insert("omega_resonance".into(), resonance_frequency(rho, selection.lambda)?);
        }
    }
    report.resonance.insert(
        "negative_eigenvalues".into(),
        spec.negative_count() as f64,
    );
    let report_path = outdir.join("report.json");
    write_text(&report_path, &serde_json::to_string_pretty(&report).unwrap())?;
    Ok(report)
}

fn farfield_csv(pattern: &FarFieldPattern) -> String {
    let mut out = String::from(
        "xhat_x,xhat_y,xhat_z,up_x_re,up_x_im,up_y_re,up_y_im,up_z_re,up_z_im,us_x_re,us_x_im,us_y_re,us_y_im,us_z_re,us_z_im\n",
    );
    for (k, d) in pattern.directions.iter().enumerate() {
        let mut cols = vec![fmt_f(d[0]), fmt_f(d[1]), fmt_f(d[2])];
        for i in 0..3 {
            cols.push(fmt_f(pattern.p[k][i].re));
            cols.push(fmt_f(pattern.p[k][i].im));
        }
        for i in 0..3 {
            cols.push(fmt_f(pattern.s[k][i].re));
            cols.push(fmt_f(pattern.s[k][i].im));
        }
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Solves one cluster scenario and writes far-field and scattered-field
/// files.
pub fn run_simulate(pipeline: &Pipeline, outdir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(outdir)?;
    let scenario = &pipeline.scenario;
    let a = scenario.scale_a()?;
    let cfg = scenario.cluster_config(a)?;
    let mut report = RunReport { command: "simulate".into(), ..Default::default() };
    report.regime = regime_map(&cfg);

    let t0 = Instant::now();
    let cluster = build_cluster(&cfg, &pipeline.material, &pipeline.reference, &pipeline.shape)?;
    report.timings_ms.insert("cluster".into(), t0.elapsed().as_millis());
    let mut regime_report = validate_regime(&cfg, Some((&cluster.frequency, cluster.diam_union())));
    if scenario.run.mode == "born" {
        validate_born_regime(&cfg, scenario.run.born_order, &mut regime_report);
    }
    report.regime_checks = regime_report.lines();
    report.resonance.insert("lambda_scaled".into(), cluster.lambda_scaled);
    report.resonance.insert("omega".into(), cluster.frequency.omega);
    report.resonance.insert("omega_resonance".into(), cluster.resonance_omega);
    report.resonance.insert("sigma".into(), cluster.sigma);
    report
        .resonance
        .insert("coefficient_denominator".into(), cluster.inclusions[0].coefficient.denominator);
    report.cluster_size = Some(cluster.len());

    let t1 = Instant::now();
    let system = assemble_system(&cluster, &pipeline.material, &pipeline.wave)?;
    report.timings_ms.insert("assembly".into(), t1.elapsed().as_millis());
    let inv = invertibility_check(&system)?;
    report.norm_b_inf = Some(inv.norm_inf);
    report.born_safe = Some(inv.born_safe);
    report.condition_estimate = Some(inv.condition_estimate);

    if scenario.run.dump_system {
        let mut dump = String::new();
        let dim = 3 * system.m;
        for r in 0..dim {
            let row: Vec<String> = (0..dim)
                .map(|c| {
                    let z = system.matrix[(r, c)];
                    format!("{}+{}", fmt_f(z.re), fmt_f(z.im))
                })
                .collect();
            dump.push_str(&row.join(" "));
            dump.push('\n');
        }
        let path = outdir.join("system_matrix.txt");
        write_text(&path, &dump)?;
        record_output(&mut report, &path);
        let inc: Vec<String> = (0..dim)
            .map(|r| format!("{}+{}", fmt_f(system.incident[r].re), fmt_f(system.incident[r].im)))
            .collect();
        let path = outdir.join("incident_vector.txt");
        write_text(&path, &(inc.join("\n") + "\n"))?;
        record_output(&mut report, &path);
    }

    let t2 = Instant::now();
    let solver = make_solver(&scenario.run.mode, scenario.run.born_order)?;
    let solution = solver.run(&system)?;
    report.timings_ms.insert("solve".into(), t2.elapsed().as_millis());
    let coeffs = solution.coefficients();

    let pattern =
        FarFieldPattern::compute(&cluster, &coeffs, &pipeline.material, &pipeline.directions());
    let path = outdir.join("farfield.csv");
    write_text(&path, &farfield_csv(&pattern))?;
    record_output(&mut report, &path);

    if !scenario.observation.points.is_empty() {
        let mut csv = String::from("x,y,z,u_x_re,u_x_im,u_y_re,u_y_im,u_z_re,u_z_im\n");
        for p in &scenario.observation.points {
            let x = Vector3::from(*p);
            let u = scattered_field(&cluster, &coeffs, &pipeline.material, &x)?;
            let mut cols = vec![fmt_f(x[0]), fmt_f(x[1]), fmt_f(x[2])];
            for i in 0..3 {
                cols.push(fmt_f(u[i].re));
                cols.push(fmt_f(u[i].im));
            }
            csv.push_str(&cols.join(","));
            csv.push('\n');
        }
        let path = outdir.join("scattered.csv");
        write_text(&path, &csv)?;
        record_output(&mut report, &path);
    }

    let report_path = outdir.join("report.json");
    write_text(&report_path, &serde_json::to_string_pretty(&report).unwrap())?;
    Ok(report)
}

fn sweep_csv(cfg_h: f64, cfg_s: f64, result: &SweepResult) -> String {
    let mut out = String::from("a,h,s,M,normB,metric,slope_pred,slope_fit\n");
    let fit = &result.fits[0];
    for row in &result.rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f(row.a),
            fmt_f(cfg_h),
            fmt_f(cfg_s),
            row.m,
            fmt_f(row.norm_b),
            fmt_f(row.metric),
            fmt_f(fit.predicted),
            fmt_f(fit.fitted)
        ));
    }
    out
}

/// Runs the configured a-sweep and writes the slope table.
pub fn run_sweep(pipeline: &Pipeline, outdir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(outdir)?;
    let scenario = &pipeline.scenario;
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Scenario("a [sweep] section is required".into()))?;
    let a0 = sweep.a_values.first().copied().unwrap_or(0.1);
    let cfg = scenario.cluster_config(a0)?;
    let mode = match sweep.mode.as_str() {
        "full" => SweepMode::Full,
        "born" => SweepMode::Born(sweep.born_order),
        "farfield_diff" => SweepMode::FarfieldDiff { grid_resolution: sweep.grid_resolution },
        other => return Err(Error::Scenario(format!("unknown sweep mode '{other}'"))),
    };
    let mut report = RunReport { command: "sweep".into(), ..Default::default() };
    report.regime = regime_map(&cfg);
    let t0 = Instant::now();
    let result = convergence_sweep(
        &pipeline.material,
        &pipeline.reference,
        &pipeline.shape,
        &cfg,
        &sweep.a_values,
        mode,
        &pipeline.wave,
        &pipeline.directions(),
    )?;
    report.timings_ms.insert("sweep".into(), t0.elapsed().as_millis());
    for fit in &result.fits {
        report.resonance.insert(format!("slope_pred_{}", fit.name), fit.predicted);
        report.resonance.insert(format!("slope_fit_{}", fit.name), fit.fitted);
    }
    let path = outdir.join("sweep.csv");
    write_text(&path, &sweep_csv(cfg.h, cfg.s, &result))?;
    record_output(&mut report, &path);
    let report_path = outdir.join("report.json");
    write_text(&report_path, &serde_json::to_string_pretty(&report).unwrap())?;
    Ok(report)
}

fn comparison_csv(table: &crate::effective::DifferenceTable) -> String {
    let mut out = String::from(
        "xhat_x,xhat_y,xhat_z,dp_re,dp_im,ds1_re,ds1_im,ds2_re,ds2_im,abs_p,abs_s\n",
    );
    for row in &table.rows {
        let abs_s =
            (row.s_components[0].norm_sqr() + row.s_components[1].norm_sqr()).sqrt();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}\n",
            fmt_f(row.direction[0]),
            fmt_f(row.direction[1]),
            fmt_f(row.direction[2]),
            fmt_f(row.p_component.re),
            fmt_f(row.p_component.im),
            fmt_f(row.s_components[0].re),
            fmt_f(row.s_components[0].im),
            fmt_f(row.s_components[1].re),
            fmt_f(row.s_components[1].im),
            fmt_f(row.p_component.norm()),
            fmt_f(abs_s)
        ));
    }
    out
}

/// Compares cluster and homogenized far fields at one scale (plus the sign
/// diagnostic); with a sweep section it also runs the far-field-difference
/// sweep.
pub fn run_homogenize(pipeline: &Pipeline, outdir: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(outdir)?;
    let scenario = &pipeline.scenario;
    let a = scenario.scale_a()?;
    let cfg = scenario.cluster_config(a)?;
    let mut report = RunReport { command: "homogenize".into(), ..Default::default() };
    report.regime = regime_map(&cfg);

    let t0 = Instant::now();
    let cluster = build_cluster(&cfg, &pipeline.material, &pipeline.reference, &pipeline.shape)?;
    let system = assemble_system(&cluster, &pipeline.material, &pipeline.wave)?;
    let solution = make_solver("full", 0)?.run(&system)?;
    report.norm_b_inf = Some(operator_norm_inf(&system));
    report.cluster_size = Some(cluster.len());
    let dirs = pipeline.directions();
    let cluster_far =
        FarFieldPattern::compute(&cluster, &solution.coefficients(), &pipeline.material, &dirs);
    report.timings_ms.insert("cluster".into(), t0.elapsed().as_millis());

    let support = match cfg.placement {
        Placement::ScaledCount { .. } => scaled_count_support(&cfg.region),
        Placement::Periodic { .. } => cfg.region,
    };
    let coeff = effective_coefficient(
        &cluster,
        &support,
        cfg.c,
        cfg.b,
        cfg.sign,
        cfg.s,
        scenario.coefficient_mode()?,
    );
    let t1 = Instant::now();
    let mut eff_cfg =
        EffectiveConfig::new(scenario.effective.grid_resolution, coeff, support)?;
    eff_cfg.dense_limit = scenario.run.dense_limit;
    let eff_system =
        assemble_ls_system(&eff_cfg, &pipeline.material, &cluster.frequency, &pipeline.wave)?;
    let eff_solution = solve_effective(&eff_system)?;
    let eff_far = effective_pattern(
        &eff_solution,
        &eff_system,
        &pipeline.material,
        &cluster.frequency,
        &dirs,
    );
    report.timings_ms.insert("effective".into(), t1.elapsed().as_millis());

    let table = compare_cluster_vs_effective(&cluster_far, &eff_far, &pipeline.material)?;
    let path = outdir.join("comparison.csv");
    write_text(&path, &comparison_csv(&table))?;
    record_output(&mut report, &path);
    report.resonance.insert("diff_max_p".into(), table.max_p);
    report.resonance.insert("diff_max_s".into(), table.max_s);
    report.resonance.insert("diff_mean_p".into(), table.mean_p);
    report.resonance.insert("diff_mean_s".into(), table.mean_s);

    let inc = &cluster.inclusions[0];
    report.sign_diagnostic = Some(homogenized_density_sign(
        inc.alpha,
        cluster.lambda_scaled,
        &cluster.frequency,
    )?);

    if scenario.sweep.is_some() {
        let mut sub = pipeline.scenario.clone();
        if let Some(sw) = sub.sweep.as_mut() {
            sw.mode = "farfield_diff".into();
            sw.grid_resolution = scenario.effective.grid_resolution;
        }
        let sub_pipeline = Pipeline {
            scenario: sub,
            material: pipeline.material,
            shape: pipeline.shape.clone(),
            reference: pipeline.reference.clone(),
            wave: pipeline.wave.clone(),
        };
        let sweep_report = run_sweep(&sub_pipeline, outdir)?;
        for (k, v) in sweep_report.resonance {
            report.resonance.insert(k, v);
        }
        for o in sweep_report.outputs {
            report.outputs.push(o);
        }
    }

    let report_path = outdir.join("report.json");
    write_text(&report_path, &serde_json::to_string_pretty(&report).unwrap())?;
    Ok(report)
}

/// Exit-code classification: 2 for validation failures, 3 for numerical
/// failures.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidMaterial(_)
        | Error::InvalidFrequency(_)
        | Error::InvalidPlaneWave(_)
        | Error::InvalidShape(_)
        | Error::UnknownShape(_)
        | Error::RegimeViolation(_)
        | Error::Geometry(_)
        | Error::SingleInclusion
        | Error::EigenIndexOutOfRange(_, _)
        | Error::NegativeRadicand(_)
        | Error::ConvergenceCondition(_)
        | Error::DenseLimit(_, _)
        | Error::PointInsideInclusion(_)
        | Error::DirectionMismatch(_, _)
        | Error::SweepTooShort(_, _)
        | Error::UnknownSolver(_)
        | Error::Scenario(_)
        | Error::Io(_) => 2,
        Error::CoincidentPoints
        | Error::NotSymmetric(_)
        | Error::EmptySpectrum
        | Error::UndefinedGap
        | Error::NoRealResonance(_)
        | Error::SingularCoefficient
        | Error::NearResonantSystem(_)
        | Error::SolveFailure(_)
        | Error::IterationFailure(_, _) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINI_SCENARIO: &str = r#"
[material]
lambda = 1.0
mu = 1.0
rho0 = 1.0

[shape]
kind = "ball"
resolution = 4
scale = 0.2

[regime]
a = 0.05
s = 0.3
h = 0.6
b = 0.08
sign = "+"
c = 220.0

[placement]
mode = "scaled_count"
m0 = 2.0

[incident]
theta = [0.0, 0.0, 1.0]
theta_perp = [1.0, 0.0, 0.0]
b1 = [1.0, 0.0]
b2 = [0.5, 0.0]

[observation]
directions = 8
points = [[2.0, 0.0, 0.0]]
"#;

    #[test]
    fn parse_and_prepare_mini_scenario() {
        let scenario = Scenario::from_toml(MINI_SCENARIO).unwrap();
        assert_eq!(scenario.shape.kind, "ball");
        assert_eq!(scenario.observation.directions, 8);
        let pipeline = Pipeline::prepare(scenario).unwrap();
        assert!(pipeline.reference.eigenvalues[0] > 0.0);
    }

    #[test]
    fn unknown_key_rejected() {
        let bad = MINI_SCENARIO.replace("[material]", "[material]\nbogus = 1.0");
        assert!(matches!(Scenario::from_toml(&bad), Err(Error::Scenario(_))));
    }

    #[test]
    fn bad_sign_rejected() {
        let bad = MINI_SCENARIO.replace("sign = \"+\"", "sign = \"?\"");
        let scenario = Scenario::from_toml(&bad).unwrap();
        assert!(matches!(scenario.cluster_config(0.05), Err(Error::Scenario(_))));
    }

    #[test]
    fn simulate_writes_deterministic_outputs() {
        let scenario = Scenario::from_toml(MINI_SCENARIO).unwrap();
        let pipeline = Pipeline::prepare(scenario).unwrap();
        let dir1 = tempdir("sim1");
        let dir2 = tempdir("sim2");
        run_simulate(&pipeline, &dir1).unwrap();
        run_simulate(&pipeline, &dir2).unwrap();
        for name in ["farfield.csv", "scattered.csv"] {
            let a = std::fs::read(dir1.join(name)).unwrap();
            let b = std::fs::read(dir2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between runs");
            assert!(!a.is_empty());
        }
    }

    #[test]
    fn spectrum_output_has_all_rows() {
        let scenario = Scenario::from_toml(MINI_SCENARIO).unwrap();
        let pipeline = Pipeline::prepare(scenario).unwrap();
        let dir = tempdir("spec");
        run_spectrum(&pipeline, &dir).unwrap();
        let text = std::fs::read_to_string(dir.join("spectrum.txt")).unwrap();
        let rows = text.lines().filter(|l| !l.starts_with('#')).count();
        assert_eq!(rows, pipeline.reference.eigenvalues.len());
    }

    fn tempdir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!(
            "elastodyn-test-{tag}-{}",
            std::process::id()
        ));
        let _ = std::fs::remove_dir_all(&dir);
        std::fs::create_dir_all(&dir).unwrap();
        dir
    }

    #[test]
    fn exit_codes_classified() {
        assert_eq!(exit_code(&Error::Scenario("x".into())), 2);
        assert_eq!(exit_code(&Error::UnknownShape("x".into())), 2);
        assert_eq!(exit_code(&Error::NearResonantSystem(1e13)), 3);
        assert_eq!(exit_code(&Error::IterationFailure(5, 1.0)), 3);
    }
}
