//! The Foldy-Lax point-interaction system: dense assembly, factorization
//! solve with a condition estimate, Born truncations and the invertibility
//! diagnostics.

use nalgebra::{DMatrix, DVector, Vector3};
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rayon::prelude::*;
use std::collections::BTreeMap;

use crate::geometry::Cluster;
use crate::kernels::kupradze_matrix;
use crate::material::{IncidentPlaneWave, Material};
use crate::{Error, Result};

/// Condition estimates above this trip the near-resonance error.
pub const CONDITION_THRESHOLD: f64 = 1e12;

/// The interaction matrix `B` (zero diagonal blocks) and the incident vector
/// `U^I`; row `3(j-1)+l` addresses component `l` of inclusion `j`.
#[derive(Debug, Clone)]
pub struct FoldySystem {
    /// Number of inclusions M; the matrix is 3M x 3M.
    pub m: usize,
    pub matrix: DMatrix<Complex64>,
    pub incident: DVector<Complex64>,
}

/// `block(j, k) = omega^2 alpha_k C^(j) Gamma^omega(z_j, z_k)` off the
/// diagonal, `U^I_j = C^(j) U^i(z_j)`.
pub fn assemble_system(
    cluster: &Cluster,
    mat: &Material,
    wave: &IncidentPlaneWave,
) -> Result<FoldySystem> {
    let m = cluster.len();
    let freq = cluster.frequency;
    let w2 = freq.omega_sq();
    let dim = 3 * m;
    for j in 0..m {
        for k in (j + 1)..m {
            if (cluster.inclusions[j].center - cluster.inclusions[k].center).norm() < 1e-14 {
                return Err(Error::CoincidentPoints);
            }
        }
    }
    // row bands are independent: parallelize over j
    let bands: Vec<Vec<Complex64>> = (0..m)
        .into_par_iter()
        .map(|j| {
            let inc_j = &cluster.inclusions[j];
            let mut band = vec![Complex64::new(0.0, 0.0); 3 * dim];
            for k in 0..m {
                if k == j {
                    continue;
                }
                let inc_k = &cluster.inclusions[k];
                let gamma = kupradze_matrix(mat, &freq, &inc_j.center, &inc_k.center)
                    .expect("distinct centers");
                let block = inc_j.coefficient.matrix * gamma * Complex64::from(w2 * inc_k.alpha);
                for r in 0..3 {
                    for c in 0..3 {
                        band[r + (3 * k + c) * 3] = block[(r, c)];
                    }
                }
            }
            band
        })
        .collect();
    let matrix = DMatrix::from_fn(dim, dim, |r, c| bands[r / 3][(r % 3) + c * 3]);
    let mut incident = DVector::from_element(dim, Complex64::new(0.0, 0.0));
    for (j, inc) in cluster.inclusions.iter().enumerate() {
        let ui = wave.evaluate(&freq, &inc.center);
        let v = inc.coefficient.apply(&ui);
        for l in 0..3 {
            incident[3 * j + l] = v[l];
        }
    }
    Ok(FoldySystem { m, matrix, incident })
}

/// Splits a stacked 3M vector into per-inclusion 3-vectors.
pub fn per_inclusion(v: &DVector<Complex64>) -> Vec<Vector3<Complex64>> {
    (0..v.len() / 3)
        .map(|j| Vector3::new(v[3 * j], v[3 * j + 1], v[3 * j + 2]))
        .collect()
}

/// Solution of `(I - B) Q = U^I`.
#[derive(Debug, Clone)]
pub struct FoldySolution {
    pub q: DVector<Complex64>,
    /// Residual `|(I - B) Q - U^I|_2`.
    pub residual: f64,
    /// 1-norm condition estimate of `I - B`.
    pub condition_estimate: f64,
}

impl FoldySolution {
    pub fn q_j(&self, j: usize) -> Vector3<Complex64> {
        Vector3::new(self.q[3 * j], self.q[3 * j + 1], self.q[3 * j + 2])
    }

    pub fn coefficients(&self) -> Vec<Vector3<Complex64>> {
        per_inclusion(&self.q)
    }
}

fn system_matrix(system: &FoldySystem) -> DMatrix<Complex64> {
    let dim = 3 * system.m;
    let mut a = -system.matrix.clone();
    for i in 0..dim {
        a[(i, i)] += Complex64::new(1.0, 0.0);
    }
    a
}

/// Dense LU solve of the interaction system; fails loudly when the condition
/// estimate exceeds [`CONDITION_THRESHOLD`] (the coefficients blow up by
/// design at resonance).
pub fn solve(system: &FoldySystem) -> Result<FoldySolution> {
    let a = system_matrix(system);
    let cond = condition_estimate_1norm(&a)?;
    if cond > CONDITION_THRESHOLD {
        return Err(Error::NearResonantSystem(cond));
    }
    let lu = a.clone().lu();
    let q = lu
        .solve(&system.incident)
        .ok_or_else(|| Error::SolveFailure("singular Foldy system".into()))?;
    let residual = (&a * &q - &system.incident).norm();
    Ok(FoldySolution { q, residual, condition_estimate: cond })
}

/// Partial sums `Qbar^0 .. Qbar^N` of the Neumann series `sum B^n U^I`,
/// together with the terms `B^n U^I` (so `Qbar^n = Qbar^{n-1} + term[n]`
/// holds bit-exactly).
#[derive(Debug, Clone)]
pub struct BornSeries {
    pub order: usize,
    pub partials: Vec<DVector<Complex64>>,
    pub terms: Vec<DVector<Complex64>>,
}

impl BornSeries {
    /// The order-n partial sum.
    pub fn q_bar(&self, n: usize) -> &DVector<Complex64> {
        &self.partials[n]
    }

    /// The term `B^n U^I`.
    pub fn term(&self, n: usize) -> &DVector<Complex64> {
        &self.terms[n]
    }

    pub fn coefficients(&self, n: usize) -> Vec<Vector3<Complex64>> {
        per_inclusion(&self.partials[n])
    }

    pub fn final_coefficients(&self) -> Vec<Vector3<Complex64>> {
        self.coefficients(self.order)
    }
}

/// Accumulates the Born partial sums by repeated application of `B`; the
/// powers `B^n` are never formed.
pub fn born_truncation(system: &FoldySystem, order: usize) -> BornSeries {
    let mut partials = Vec::with_capacity(order + 1);
    let mut terms = Vec::with_capacity(order + 1);
    let mut term = system.incident.clone();
    let mut sum = term.clone();
    partials.push(sum.clone());
    terms.push(term.clone());
    for _ in 1..=order {
        term = &system.matrix * &term;
        sum += &term;
        partials.push(sum.clone());
        terms.push(term.clone());
    }
    BornSeries { order, partials, terms }
}

/// Max-magnitude (infinity) norm of a stacked complex vector.
pub fn norm_inf(v: &DVector<Complex64>) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// Row-sum (infinity) norm of `B`.
pub fn operator_norm_inf(system: &FoldySystem) -> f64 {
    let dim = 3 * system.m;
    (0..dim)
        .map(|r| (0..dim).map(|c| system.matrix[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Invertibility diagnostics of `I - B`.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct InvertibilityReport {
    /// Whether the Neumann series is guaranteed to converge.
    pub born_safe: bool,
    pub norm_inf: f64,
    pub condition_estimate: f64,
}

pub fn invertibility_check(system: &FoldySystem) -> Result<InvertibilityReport> {
    let norm_inf = operator_norm_inf(system);
    let condition_estimate = condition_estimate_1norm(&system_matrix(system))?;
    Ok(InvertibilityReport { born_safe: norm_inf < 1.0, norm_inf, condition_estimate })
}

/// Hager-style 1-norm condition estimate `|A|_1 |A^{-1}|_1` from one LU
/// factorization, using forward/adjoint triangular sweeps.
pub fn condition_estimate_1norm(a: &DMatrix<Complex64>) -> Result<f64> {
    let n = a.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let norm_a = (0..n)
        .map(|c| (0..n).map(|r| a[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let lu = a.clone().lu();
    let l = lu.l();
    let u = lu.u();
    // singular factor: bail out with an infinite estimate
    if (0..n).any(|i| u[(i, i)].norm() < 1e-300) {
        return Ok(f64::INFINITY);
    }
    let p = lu.p().clone();

    // A = P^T L U with nalgebra's row-pivot convention
    let solve_a = |b: &DVector<Complex64>| -> DVector<Complex64> {
        let mut pb = b.clone();
        p.permute_rows(&mut pb);
        let mut y = pb;
        for i in 0..n {
            for k in 0..i {
                let yk = y[k];
                y[i] -= l[(i, k)] * yk;
            }
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let yk = y[k];
                y[i] -= u[(i, k)] * yk;
            }
            y[i] /= u[(i, i)];
        }
        y
    };
    // A^H z = c: U^H w = c, L^H y = w, z = P^T y
    let solve_ah = |b: &DVector<Complex64>| -> DVector<Complex64> {
        let mut w = b.clone();
        for i in 0..n {
            for k in 0..i {
                let wk = w[k];
                w[i] -= u[(k, i)].conj() * wk;
            }
            w[i] /= u[(i, i)].conj();
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                let wk = w[k];
                w[i] -= l[(k, i)].conj() * wk;
            }
        }
        p.inv_permute_rows(&mut w);
        w
    };

    let mut x = DVector::from_element(n, Complex64::new(1.0 / n as f64, 0.0));
    let mut est = 0.0f64;
    for _ in 0..5 {
        let y = solve_a(&x);
        let y1: f64 = y.iter().map(|c| c.norm()).sum();
        est = est.max(y1);
        let xi = DVector::from_fn(n, |i, _| {
            let v = y[i];
            if v.norm() > 0.0 {
                v / v.norm()
            } else {
                Complex64::new(1.0, 0.0)
            }
        });
        let z = solve_ah(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .map(|(i, c)| (i, c.norm()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let zx: f64 = z.iter().zip(x.iter()).map(|(zi, xi)| (zi.conj() * xi).re).sum();
        if zmax <= zx.abs() + 1e-300 {
            break;
        }
        x = DVector::from_fn(n, |i, _| {
            Complex64::new(if i == jmax { 1.0 } else { 0.0 }, 0.0)
        });
    }
    if !est.is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(norm_a * est)
}

/// A solver strategy for the coupling system, selected by name at run time.
pub trait CouplingSolver: Sync + Send {
    fn name(&self) -> &'static str;
    fn run(&self, system: &FoldySystem) -> Result<FoldySolution>;
}

/// Direct dense factorization of `I - B`.
pub struct DenseLuSolver;

impl CouplingSolver for DenseLuSolver {
    fn name(&self) -> &'static str {
        "full"
    }

    fn run(&self, system: &FoldySystem) -> Result<FoldySolution> {
        solve(system)
    }
}

/// Born (Neumann) truncation at a fixed interaction order.
pub struct BornSolver {
    pub order: usize,
}

impl CouplingSolver for BornSolver {
    fn name(&self) -> &'static str {
        "born"
    }

    fn run(&self, system: &FoldySystem) -> Result<FoldySolution> {
        let series = born_truncation(system, self.order);
        let q = series.partials[self.order].clone();
        let a = system_matrix(system);
        let residual = (&a * &q - &system.incident).norm();
        Ok(FoldySolution { q, residual, condition_estimate: f64::NAN })
    }
}

type SolverFactory = fn(usize) -> Box<dyn CouplingSolver>;

static SOLVER_REGISTRY: Lazy<BTreeMap<&'static str, SolverFactory>> = Lazy::new(|| {
    let mut map: BTreeMap<&'static str, SolverFactory> = BTreeMap::new();
    map.insert("full", |_| Box::new(DenseLuSolver));
    map.insert("born", |order| Box::new(BornSolver { order }));
    map
});

/// Instantiates a registered solver; `born_order` is ignored by "full".
pub fn make_solver(name: &str, born_order: usize) -> Result<Box<dyn CouplingSolver>> {
    SOLVER_REGISTRY
        .get(name)
        .map(|f| f(born_order))
        .ok_or_else(|| Error::UnknownSolver(name.to_string()))
}

pub fn solver_names() -> Vec<&'static str> {
    SOLVER_REGISTRY.keys().copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoxRegion, ClusterConfig, Placement};

    use crate::shapes::build_shape;
    use crate::spectra::{shape_spectrum, SpectralDecomposition};
    use nalgebra::Matrix3;

    fn mat111() -> Material {
        Material::new(1.0, 1.0, 1.0).unwrap()
    }

    fn reference() -> (SpectralDecomposition, crate::shapes::ReferenceShape) {
        let shape = build_shape("ball", 4).unwrap();
        let spec = shape_spectrum(&shape, &mat111()).unwrap();
        (spec, shape)
    }

    fn default_wave() -> IncidentPlaneWave {
        IncidentPlaneWave::new(
            nalgebra::Vector3::z(),
            nalgebra::Vector3::x(),
            Complex64::new(1.0, 0.0),
            Complex64::new(0.5, 0.2),
        )
        .unwrap()
    }

    fn line_cluster(m: usize, pitch: f64) -> Cluster {
        // weakly coupled line of inclusions for oracle tests
        let mat = mat111();
        let (reference, shape) = reference();
        let mut cfg = ClusterConfig::new(1e-3, Some(0.3), None, 0.6).unwrap();
        cfg.c = 3.0;
        cfg.b = 20.0;
        cfg.placement = Placement::ScaledCount { m0: 1.0 };
        cfg.region = BoxRegion::unit_centered();
        let base = crate::geometry::build_cluster(&cfg, &mat, &reference, &shape).unwrap();
        let template = base.inclusions[0].clone();
        let mut inclusions = Vec::new();
        for j in 0..m {
            let mut inc = template.clone();
            inc.center = nalgebra::Vector3::new(pitch * j as f64, 0.0, 0.0);
            inclusions.push(inc);
        }
        Cluster { inclusions, ..base }
    }

    #[test]
    fn single_inclusion_system_is_trivial() {
        let cluster = line_cluster(1, 1.0);
        let wave = default_wave();
        let system = assemble_system(&cluster, &mat111(), &wave).unwrap();
        assert_eq!(system.m, 1);
        assert!(system.matrix.iter().all(|c| c.norm() == 0.0));
        // U^I = C U^i(z1)
        let ui = wave.evaluate(&cluster.frequency, &cluster.inclusions[0].center);
        let expect = cluster.inclusions[0].coefficient.apply(&ui);
        for l in 0..3 {
            assert!((system.incident[l] - expect[l]).norm() < 1e-15);
        }
        // Q = U^I
        let sol = solve(&system).unwrap();
        assert!((&sol.q - &system.incident).norm() < 1e-14);
        assert!(operator_norm_inf(&system) == 0.0);
        let inv = invertibility_check(&system).unwrap();
        assert!(inv.born_safe);
        assert!((inv.condition_estimate - 1.0).abs() < 1e-9);
    }

    #[test]
    fn diagonal_blocks_zero_and_reciprocity() {
        let cluster = line_cluster(2, 0.8);
        let mat = mat111();
        let system = assemble_system(&cluster, &mat, &default_wave()).unwrap();
        for j in 0..2 {
            for r in 0..3 {
                for c in 0..3 {
                    assert_eq!(system.matrix[(3 * j + r, 3 * j + c)].norm(), 0.0);
                }
            }
        }
        // block(2,1) = w^2 alpha C Gamma(z2, z1) = w^2 alpha C Gamma(z1, z2)^T
        let freq = cluster.frequency;
        let g12 = kupradze_matrix(
            &mat,
            &freq,
            &cluster.inclusions[0].center,
            &cluster.inclusions[1].center,
        )
        .unwrap();
        let w2a = Complex64::from(freq.omega_sq() * cluster.inclusions[0].alpha);
        let expect = cluster.inclusions[1].coefficient.matrix * g12.transpose() * w2a;
        for r in 0..3 {
            for c in 0..3 {
                let got = system.matrix[(3 + r, c)];
                assert!((got - expect[(r, c)]).norm() < 1e-13 * expect[(r, c)].norm().max(1e-30));
            }
        }
    }

    #[test]
    fn three_on_a_line_matches_independent_assembly() {
        let cluster = line_cluster(3, 0.6);
        let mat = mat111();
        let wave = default_wave();
        let system = assemble_system(&cluster, &mat, &wave).unwrap();
        // independent entrywise construction
        let freq = cluster.frequency;
        let w2 = freq.omega_sq();
        for j in 0..3 {
            for k in 0..3 {
                if j == k {
                    continue;
                }
                let gamma = kupradze_matrix(
                    &mat,
                    &freq,
                    &cluster.inclusions[j].center,
                    &cluster.inclusions[k].center,
                )
                .unwrap();
                let cj = &cluster.inclusions[j].coefficient.matrix;
                for l in 0..3 {
                    for q in 0..3 {
                        let mut entry = Complex64::new(0.0, 0.0);
                        for i in 0..3 {
                            entry += cj[(l, i)] * gamma[(i, q)];
                        }
                        entry *= Complex64::from(w2 * cluster.inclusions[k].alpha);
                        let got = system.matrix[(3 * j + l, 3 * k + q)];
                        assert!((got - entry).norm() <= 1e-14 * entry.norm().max(1e-30));
                    }
                }
            }
        }
    }

    #[test]
    fn two_inclusion_solve_matches_direct_6x6() {
        let cluster = line_cluster(2, 0.7);
        let mat = mat111();
        let wave = default_wave();
        let system = assemble_system(&cluster, &mat, &wave).unwrap();
        let sol = solve(&system).unwrap();
        // independent 6x6 inverse via explicit block elimination
        let mut a = [[Complex64::new(0.0, 0.0); 6]; 6];
        for r in 0..6 {
            a[r][r] = Complex64::new(1.0, 0.0);
            for c in 0..6 {
                a[r][c] -= system.matrix[(r, c)];
            }
        }
        let mut b = [Complex64::new(0.0, 0.0); 6];
        for r in 0..6 {
            b[r] = system.incident[r];
        }
        // Gaussian elimination without pivoting (well-conditioned fixture)
        for col in 0..6 {
            for row in (col + 1)..6 {
                let f = a[row][col] / a[col][col];
                for c2 in col..6 {
                    let v = a[col][c2];
                    a[row][c2] -= f * v;
                }
                let bv = b[col];
                b[row] -= f * bv;
            }
        }
        let mut x = [Complex64::new(0.0, 0.0); 6];
        for row in (0..6).rev() {
            let mut acc = b[row];
            for c2 in (row + 1)..6 {
                acc -= a[row][c2] * x[c2];
            }
            x[row] = acc / a[row][row];
        }
        for i in 0..6 {
            assert!(
                (sol.q[i] - x[i]).norm() <= 1e-12 * x[i].norm().max(1e-30),
                "entry {i}: {} vs {}",
                sol.q[i],
                x[i]
            );
        }
    }

    #[test]
    fn born_partial_sums_structure() {
        let cluster = line_cluster(4, 0.5);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        let series = born_truncation(&system, 3);
        // Qbar^0 = U^I
        assert!((series.q_bar(0) - &system.incident).norm() == 0.0);
        // Qbar^1 = Qbar^0 + B U^I with the term reproduced bit-exactly
        let bu = &system.matrix * &system.incident;
        assert!((series.term(1) - &bu).norm() == 0.0);
        assert!((series.q_bar(1) - (series.q_bar(0) + &bu)).norm() == 0.0);
        // geometric decay of successive terms under |B| < 1 (infinity norms)
        let norm_b = operator_norm_inf(&system);
        assert!(norm_b < 1.0, "fixture must be born-safe, |B| = {norm_b}");
        let d2 = norm_inf(series.term(2));
        let d3 = norm_inf(series.term(3));
        assert!(d3 <= norm_b * d2 * (1.0 + 1e-12));
    }

    #[test]
    fn born_converges_to_solve_with_tail_bound() {
        let cluster = line_cluster(8, 0.45);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        let norm_b = operator_norm_inf(&system);
        assert!(norm_b < 1.0, "|B| = {norm_b}");
        let sol = solve(&system).unwrap();
        let ui_norm = norm_inf(&system.incident);
        let series = born_truncation(&system, 8);
        for n in [0usize, 1, 2, 4, 8] {
            let err = norm_inf(&(series.q_bar(n) - &sol.q));
            let bound = norm_b.powi(n as i32 + 1) * ui_norm / (1.0 - norm_b);
            assert!(err <= bound * (1.0 + 1e-10), "N = {n}: {err} > {bound}");
        }
    }

    #[test]
    fn born_matches_neumann_limit() {
        let cluster = line_cluster(3, 0.6);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        let norm_b = operator_norm_inf(&system);
        assert!(norm_b < 1.0);
        let sol = solve(&system).unwrap();
        let series = born_truncation(&system, 200);
        let tail = norm_b.powi(201) / (1.0 - norm_b) * norm_inf(&system.incident);
        assert!(norm_inf(&(series.q_bar(200) - &sol.q)) <= tail + 1e-13 * norm_inf(&sol.q));
    }

    #[test]
    fn norm_scales_linearly_with_matrix() {
        let cluster = line_cluster(2, 0.9);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        // hand row sum of the single off-diagonal block pair
        let mut hand = 0.0f64;
        for r in 0..6 {
            let mut s = 0.0;
            for c in 0..6 {
                s += system.matrix[(r, c)].norm();
            }
            hand = hand.max(s);
        }
        assert_eq!(operator_norm_inf(&system), hand);
        let mut scaled = system.clone();
        scaled.matrix *= Complex64::from(10.0);
        assert!((operator_norm_inf(&scaled) - 10.0 * hand).abs() < 1e-12 * hand);
        // scaling B by 10 makes the fixture born-unsafe
        let inv = invertibility_check(&scaled).unwrap();
        assert!(!inv.born_safe || hand < 0.1);
    }

    #[test]
    fn condition_estimate_on_known_matrix() {
        // diagonal matrix: condition = max/min
        let n = 8;
        let a = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(1.0 + i as f64, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        });
        let est = condition_estimate_1norm(&a).unwrap();
        assert!((est - 8.0).abs() < 1e-9, "est {est}");
        // scaling invariance
        let est2 = condition_estimate_1norm(&(a * Complex64::new(0.0, 3.0))).unwrap();
        assert!((est2 - 8.0).abs() < 1e-9);
    }

    #[test]
    fn near_resonant_system_fails_loudly() {
        let cluster = line_cluster(2, 0.7);
        let mut system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        // make I - B nearly singular in one direction: condition ~ 1e13
        for r in 0..6 {
            for c in 0..6 {
                system.matrix[(r, c)] = Complex64::new(0.0, 0.0);
            }
        }
        system.matrix[(0, 0)] = Complex64::new(1.0 - 1e-13, 0.0);
        assert!(matches!(solve(&system), Err(Error::NearResonantSystem(_))));
    }

    #[test]
    fn solver_registry_dispatch() {
        assert_eq!(solver_names(), vec!["born", "full"]);
        let cluster = line_cluster(3, 0.6);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        let full = make_solver("full", 0).unwrap().run(&system).unwrap();
        let born = make_solver("born", 40).unwrap().run(&system).unwrap();
        assert!((full.q - born.q).norm() < 1e-10 * system.incident.norm());
        assert!(make_solver("magic", 0).is_err());
    }

    #[test]
    fn solution_residual_small() {
        let cluster = line_cluster(5, 0.5);
        let system = assemble_system(&cluster, &mat111(), &default_wave()).unwrap();
        let sol = solve(&system).unwrap();
        let norm_b = operator_norm_inf(&system);
        let bound = 1e-10 * (system.incident.norm() + norm_b * sol.q.norm());
        assert!(sol.residual <= bound.max(1e-300), "residual {}", sol.residual);
    }

    #[test]
    fn coincident_centers_rejected() {
        let mut cluster = line_cluster(2, 0.7);
        cluster.inclusions[1].center = cluster.inclusions[0].center;
        assert!(matches!(
            assemble_system(&cluster, &mat111(), &default_wave()),
            Err(Error::CoincidentPoints)
        ));
    }

    #[test]
    fn linearity_in_incident_amplitudes() {
        let cluster = line_cluster(3, 0.6);
        let wave1 = default_wave();
        let wave2 = IncidentPlaneWave::new(
            nalgebra::Vector3::z(),
            nalgebra::Vector3::x(),
            wave1.b1 * Complex64::from(2.0),
            wave1.b2 * Complex64::from(2.0),
        )
        .unwrap();
        let s1 = assemble_system(&cluster, &mat111(), &wave1).unwrap();
        let s2 = assemble_system(&cluster, &mat111(), &wave2).unwrap();
        let q1 = solve(&s1).unwrap();
        let q2 = solve(&s2).unwrap();
        assert!((&q2.q - &q1.q * Complex64::from(2.0)).norm() < 1e-11 * q1.q.norm());
    }

    #[test]
    fn frozen_scattering_coefficient_is_isotropic_for_ball() {
        // spherical inclusions give an isotropic coefficient, so B blocks are
        // scalar multiples of the kernel blocks
        let cluster = line_cluster(1, 1.0);
        let c = &cluster.inclusions[0].coefficient.matrix;
        let offdiag: f64 = (0..3)
            .flat_map(|r| (0..3).map(move |c2| (r, c2)))
            .filter(|(r, c2)| r != c2)
            .map(|(r, c2)| c[(r, c2)].norm())
            .sum();
        let diag_spread = (c[(0, 0)] - c[(1, 1)]).norm() + (c[(1, 1)] - c[(2, 2)]).norm();
        assert!(offdiag < 1e-10 * c[(0, 0)].norm());
        assert!(diag_spread < 1e-6 * c[(0, 0)].norm());
        let _: Matrix3<Complex64> = *c;
    }
}
