use elastodyn_core::fields::fibonacci_directions;
use elastodyn_core::geometry::{ClusterConfig, Placement};
use elastodyn_core::material::{IncidentPlaneWave, Material};
use elastodyn_core::shapes::build_shape;
use elastodyn_core::spectra::{scale_spectrum, shape_spectrum};
use elastodyn_core::sweep::{convergence_sweep, SweepMode};
use nalgebra::Vector3;
use num_complex::Complex64;
use std::time::Instant;

fn main() {
    let mat = Material::new(1.0, 1.0, 1.0).unwrap();
    let ball = build_shape("ball", 6).unwrap();
    let spec_unit = shape_spectrum(&ball, &mat).unwrap();
    let wave = IncidentPlaneWave::new(
        Vector3::z(), Vector3::x(),
        Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0),
    ).unwrap();

    // criterion 9 with the periodic cube partition: a = n^{-1/t}, t = s/3 = 1/12
    let r0 = 0.2;
    let shape = ball.scaled(r0);
    let reference = scale_spectrum(&spec_unit, r0);
    let lam = reference.eigenvalues[0];
    let mut eff = ClusterConfig::new(1e-4, Some(0.25), None, 0.75).unwrap();
    eff.c = (1.0f64 / 0.36) / lam;
    eff.b = 0.0397 * 13.7 * eff.c / 3.0;
    eff.placement = Placement::Periodic { skip_boundary: false };
    println!("effective fixture c={:.2} b={:.2}", eff.c, eff.b);
    let dirs = fibonacci_directions(32);
    let a_values: Vec<f64> = [5.0f64, 7.0, 10.0].iter().map(|n| n.powi(-12)).collect();
    for grid in [8usize] {
        let t3 = Instant::now();
        match convergence_sweep(&mat, &reference, &shape, &eff, &a_values, SweepMode::FarfieldDiff { grid_resolution: grid }, &wave, &dirs) {
            Ok(res) => {
                println!("Farfield-diff lattice sweep grid {grid} ({:?}):", t3.elapsed());
                for r in &res.rows {
                    println!("  a={:<10.3e} M={:<5} |B|={:<10.4e} diff={:.5e}", r.a, r.m, r.norm_b, r.metric);
                }
                for f in &res.fits {
                    println!("  fit {}: predicted {:.4} fitted {:.4}", f.name, f.predicted, f.fitted);
                }
            }
            Err(e) => println!("grid {grid} failed: {e}"),
        }
    }
}
