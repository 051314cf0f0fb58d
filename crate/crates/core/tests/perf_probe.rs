//! Manual performance probes (run with `cargo test --test perf_probe -- --ignored --nocapture`).
//! Not part of the default suite; used to size solver budgets on one core.

use finecap_core::capacity::{minimize_capacity, SolverOptions};
use finecap_core::grid::rasterize_ball;
use finecap_core::{ExponentField, Grid, WeightField};

fn annulus(n: usize, p0: f64) {
    let g = Grid::new(2, &[(-2.0, 2.0), (-2.0, 2.0)], &[n, n]).unwrap();
    let p = ExponentField::constant(g, p0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let k = rasterize_ball(&[0.0, 0.0], 1.0, &g).unwrap();
    let omega = rasterize_ball(&[0.0, 0.0], 2.0 - 1e-9, &g).unwrap();
    let t0 = std::time::Instant::now();
    let r = minimize_capacity(&k, &omega, &p, &w, &SolverOptions::default()).unwrap();
    let expect = 2.0 * std::f64::consts::PI / 2f64.ln();
    println!(
        "n={n} p={p0}: value={:.6} (ref {:.6}, rel err {:+.4}%) iters={} converged={} residual={:.3e} wall={:.2?}",
        r.value,
        expect,
        100.0 * (r.value - expect) / expect,
        r.iterations,
        r.converged,
        r.interior_residual,
        t0.elapsed()
    );
}

#[test]
#[ignore]
fn probe_annulus_257() {
    annulus(257, 2.0);
}

#[test]
#[ignore]
fn probe_annulus_513() {
    annulus(513, 2.0);
}
