//! End-to-end acceptance battery.
//!
//! Each test exercises one published guarantee at its stated tolerance and
//! prints a single `ACCEPTANCE <name>: PASS/FAIL — details` line.  The line
//! is written straight to stdout (not through `print!`) so it shows up even
//! without `--nocapture`.  The tests are numbered so the harness runs and
//! reports them in a stable order.

use std::f64::consts::{LN_2, PI};
use std::fs;
use std::io::Write;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use finecap_core::capacity::{
    dirichlet_energy, energy_gradient, minimize_capacity, ple_residual, SolverOptions,
};
use finecap_core::fine::{finely_open_diagnostic, Verdict};
use finecap_core::grid::{rasterize_ball, rasterize_halfspace, rasterize_rect, Sense};
use finecap_core::properties::{
    check_annulus_comparability, check_ball_measure_comparability, check_capacity_axioms,
    check_capacity_limits, check_wiener_equivalence,
};
use finecap_core::spaces::{luxemburg_norm, modular};
use finecap_core::wiener::{wiener_integral, wiener_sum, Thinness};
use finecap_core::{CapacityCache, ExponentField, Grid, GridSet, ScalarField, WeightField};

fn announce(name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    // Write to the real stdout: the test harness captures the `print!`
    // macros of passing tests, and these one-liners are the battery's
    // human-readable record.
    let mut out = std::io::stdout();
    writeln!(out, "ACCEPTANCE {name}: {verdict} — {detail}").ok();
    out.flush().ok();
    assert!(pass, "{name}: {detail}");
}

fn square(lo: f64, hi: f64, n: usize) -> Grid {
    Grid::new(2, &[(lo, hi), (lo, hi)], &[n, n]).expect("valid grid")
}

/// Capacity of the condenser (ball r=1, ball r=2) for constant exponent p in
/// the plane: the radial reduction has constant flux, so the value is
/// 2π S^{1−p} with S = ∫₁² s^{−1/(p−1)} ds, resolved here by a midpoint sum
/// three orders of magnitude finer than the tolerance it certifies.
fn radial_annulus_value(p0: f64) -> f64 {
    let a = 1.0 / (p0 - 1.0);
    let m = 1 << 20;
    let h = 1.0 / f64::from(m);
    let s: f64 = (0..m).map(|i| (1.0 + (f64::from(i) + 0.5) * h).powf(-a) * h).sum();
    2.0 * PI * s.powf(1.0 - p0)
}

#[test]
fn c01_interval_condenser_matches_the_closed_form() {
    let g = Grid::new(1, &[(-2.0, 2.0)], &[1025]).expect("valid grid");
    let w = WeightField::constant(g, 1.0).unwrap();
    let k = rasterize_rect(&[-1.0], &[1.0], &g).unwrap();
    let om = rasterize_ball(&[0.0], 2.0, &g).unwrap();
    let opts = SolverOptions::default();
    let mut ok = true;
    let mut detail = String::new();
    for p0 in [1.5, 2.0, 3.0] {
        let p = ExponentField::constant(g, p0).unwrap();
        let t0 = Instant::now();
        let res = minimize_capacity(&k, &om, &p, &w, &opts).unwrap();
        let dt = t0.elapsed();
        let rel = (res.value - 2.0).abs() / 2.0;
        ok &= res.converged && rel <= 0.01 && dt < Duration::from_secs(5);
        detail.push_str(&format!("p={p0}: cap={:.8} (rel {rel:.2e}, {dt:.2?}); ", res.value));
    }
    announce("c01 interval condenser vs closed form 2.0 (1%)", ok, &detail);
}

#[test]
fn c02_planar_annulus_matches_the_radial_oracle() {
    // p = 2 at 513²: the value is 2π/ln 2
    let g = square(-2.0, 2.0, 513);
    let p2 = ExponentField::constant(g, 2.0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let k = rasterize_ball(&[0.0, 0.0], 1.0, &g).unwrap();
    let om = rasterize_ball(&[0.0, 0.0], 2.0, &g).unwrap();
    let opts = SolverOptions::default();
    let t0 = Instant::now();
    let res = minimize_capacity(&k, &om, &p2, &w, &opts).unwrap();
    let dt = t0.elapsed();
    let exact = 2.0 * PI / LN_2;
    let rel2 = (res.value - exact).abs() / exact;
    let mut ok = res.converged && rel2 <= 0.05 && dt < Duration::from_secs(300);
    let mut detail = format!(
        "513² p=2: cap={:.6} vs 2π/ln2={exact:.6} (rel {rel2:.2e}, {dt:.2?}); ",
        res.value
    );

    // general constant p at 257² against the radial reduction
    let g257 = square(-2.0, 2.0, 257);
    let w257 = WeightField::constant(g257, 1.0).unwrap();
    let k257 = rasterize_ball(&[0.0, 0.0], 1.0, &g257).unwrap();
    let om257 = rasterize_ball(&[0.0, 0.0], 2.0, &g257).unwrap();
    for p0 in [1.5, 3.0] {
        let p = ExponentField::constant(g257, p0).unwrap();
        let oracle = radial_annulus_value(p0);
        let res = minimize_capacity(&k257, &om257, &p, &w257, &opts).unwrap();
        let rel = (res.value - oracle).abs() / oracle;
        ok &= res.converged && rel <= 0.05;
        detail.push_str(&format!("257² p={p0}: cap={:.6} vs {oracle:.6} (rel {rel:.2e}); ", res.value));
    }
    announce("c02 planar annulus vs radial oracle (5%)", ok, &detail);
}

#[test]
fn c03_capacity_axioms_hold_on_25_seeded_trials() {
    let g = square(-2.0, 2.0, 257);
    let opts = SolverOptions::default();

    let p_flat = ExponentField::constant(g, 2.0).unwrap();
    let w_flat = WeightField::constant(g, 1.0).unwrap();
    let cache_flat = CapacityCache::new();
    let flat = check_capacity_axioms(2026, 13, &p_flat, &w_flat, &opts, &cache_flat).unwrap();

    let p_var = ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap();
    let w_var = WeightField::from_expr(g, "1 + rho^2").unwrap();
    let cache_var = CapacityCache::new();
    let var = check_capacity_axioms(2027, 12, &p_var, &w_var, &opts, &cache_var).unwrap();

    let ok = flat.pass
        && var.pass
        && flat.failures + var.failures == 0
        && flat.trials + var.trials == 25;
    let mut detail = format!(
        "constant p=2, ϑ=1: {} trials, {} failures (worst slack {:.2e}); \
         p=2+0.5·sin(x1), ϑ=1+ρ²: {} trials, {} failures (worst slack {:.2e})",
        flat.trials, flat.failures, flat.worst_slack, var.trials, var.failures, var.worst_slack
    );
    for wtn in flat.witnesses.iter().chain(&var.witnesses) {
        detail.push_str(&format!("; witness: {wtn}"));
    }
    announce("c03 capacity axioms on 25 seeded trials", ok, &detail);
}

#[test]
fn c04_nested_disk_family_descends_to_its_limit() {
    let g = square(-2.0, 2.0, 513);
    let p = ExponentField::constant(g, 2.0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let opts = SolverOptions::default();
    let cache = CapacityCache::new();
    let om = rasterize_ball(&[0.0, 0.0], 1.9, &g).unwrap();
    let radii = [1.2, 1.1, 1.05, 1.02, 1.004];
    let family: Vec<GridSet> =
        radii.iter().map(|&r| rasterize_ball(&[0.0, 0.0], r, &g).unwrap()).collect();
    let limit = rasterize_ball(&[0.0, 0.0], 1.0, &g).unwrap();

    let rep =
        check_capacity_limits(&family, &om, &p, &w, &opts, &cache, Some(&limit)).unwrap();
    let mut ok = rep.pass;
    let mut detail = format!("monotone + limit gap ≤ 2%: {}; ", if rep.pass { "yes" } else { "NO" });
    for (i, &r) in radii.iter().enumerate() {
        // replayed from the cache: the family solve already computed it
        let cap = cache.minimize(&family[i], &om, &p, &w, &opts).unwrap().value;
        let oracle = 2.0 * PI / (1.9 / r).ln();
        let rel = (cap - oracle).abs() / oracle;
        ok &= rel <= 0.05;
        detail.push_str(&format!("r={r}: cap={cap:.5} vs 2π/ln(1.9/r)={oracle:.5} (rel {rel:.1e}); "));
    }
    for wtn in &rep.witnesses {
        detail.push_str(&format!("witness: {wtn}; "));
    }
    announce("c04 nested disks converge to the limit capacity (2%)", ok, &detail);
}

#[test]
fn c05_growing_reference_ball_only_cheapens_the_condenser() {
    let g = square(-2.0, 2.0, 257);
    let p = ExponentField::constant(g, 2.0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let opts = SolverOptions::default();
    let cache = CapacityCache::new();
    let e = rasterize_ball(&[0.0, 0.0], 0.5, &g).unwrap();
    let rep = check_annulus_comparability(
        &e, &[0.0, 0.0], 0.5, &[0.5, 0.75, 1.0], &p, &w, &opts, &cache,
    )
    .unwrap();
    let consts = rep.constants.expect("hypothesis holds, so the sweep ran");
    // largest ratio is reached at s = 2r, where the two condensers are
    // (B(½), B(1)) and (B(½), B(2)): the log-annulus values give exactly 2
    let ok = rep.pass && rep.skipped.is_empty() && (consts.c2 - 2.0).abs() <= 0.2;
    let detail = format!(
        "cap(E,B(2s)) ≤ cap(E,B(2r)) across s: {}; C=max ratio={:.4} vs ln4/ln2=2 (±10%); {:?}",
        if rep.pass { "yes" } else { "NO" },
        consts.c2,
        rep.notes
    );
    announce("c05 reference-ball growth bound with log-ratio constant", ok, &detail);
}

#[test]
fn c06_ball_capacity_tracks_the_weighted_measure() {
    let radii = [0.9, 1.0, 1.1];
    let opts = SolverOptions::default();

    let g1 = square(-2.5, 2.5, 513);
    let p1 = ExponentField::constant(g1, 2.0).unwrap();
    let w1 = WeightField::constant(g1, 1.0).unwrap();
    let cache1 = CapacityCache::new();
    let flat =
        check_ball_measure_comparability(&[0.0, 0.0], &radii, &p1, &w1, &opts, &cache1).unwrap();
    let kf = flat.constants.expect("no radius was skipped");
    let spread_flat = kf.c2 / kf.c1;
    let cd_flat = kf.cd.expect("doubling ratio is measured");
    let mut ok = flat.pass && spread_flat <= 1.5 && cd_flat <= 4.5;

    let g2 = square(-2.5, 2.5, 257);
    let p2 = ExponentField::constant(g2, 2.0).unwrap();
    let w2 = WeightField::from_expr(g2, "1 + rho^2").unwrap();
    let cache2 = CapacityCache::new();
    let wtd =
        check_ball_measure_comparability(&[0.0, 0.0], &radii, &p2, &w2, &opts, &cache2).unwrap();
    let kw = wtd.constants.expect("no radius was skipped");
    let spread_wtd = kw.c2 / kw.c1;
    ok &= wtd.pass && spread_wtd <= 1.5;

    let detail = format!(
        "ϑ=1 at 513²: C2/C1={spread_flat:.4} (≤1.5), c_d={cd_flat:.4} (≤4.5); \
         ϑ=1+ρ² at 257²: C2/C1={spread_wtd:.4} (≤1.5), c_d={:.4} (reported)",
        kw.cd.unwrap_or(f64::NAN)
    );
    announce("c06 capacity/measure comparability over the radius band", ok, &detail);
}

#[test]
fn c07_wiener_sum_and_integral_classify_alike() {
    let g = square(-2.0, 2.0, 257);
    let p = ExponentField::constant(g, 2.0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let opts = SolverOptions::default();
    let cache = CapacityCache::new();

    let empty = GridSet::empty(g);
    let half = rasterize_halfspace(1, Sense::Lt, 0.0, &g).unwrap();
    let hole = rasterize_ball(&[0.0, 0.0], 0.8, &g).unwrap().complement();
    let cases = vec![
        (empty, vec![0.5, 0.5]),     // empty set, generic point
        (half, vec![0.0, 0.0]),      // half-plane probed at its edge
        (hole, vec![0.0, 0.0]),      // ball complement probed at the center
    ];
    let rep = check_wiener_equivalence(&cases, &p, &w, 5, &opts, &cache).unwrap();
    let mut ok = rep.pass && rep.trials == 3 && rep.skipped.is_empty();
    let mut detail = format!("three-case battery: failures={}; {:?}; ", rep.failures, rep.notes);

    // the full grid contains every probe point, so compare its two variants
    // directly rather than through the x ∉ E harness
    let full = GridSet::full(g);
    let s = wiener_sum(&full, &[0.5, 0.5], &p, &w, 5, &opts, &cache).unwrap();
    let q = wiener_integral(&full, &[0.5, 0.5], &p, &w, 2, &opts, &cache).unwrap();
    let qv = q.quadrature_value.expect("integral variant sets the value");
    let ratio = s.total / qv;
    ok &= s.classification == q.classification && (0.2..=5.0).contains(&ratio);
    detail.push_str(&format!(
        "full grid: sum {:?} total={:.4}, integral {:?} value={qv:.4}, ratio={ratio:.4}",
        s.classification, s.total, q.classification
    ));
    announce("c07 thinness sum vs integral agreement", ok, &detail);
}

#[test]
fn c08_random_disk_unions_are_finely_open_at_interior_samples() {
    let g = square(-4.0, 4.0, 257);
    let p = ExponentField::constant(g, 2.0).unwrap();
    let w = WeightField::constant(g, 1.0).unwrap();
    let opts = SolverOptions::default();
    let cache = CapacityCache::new();
    // depth ≥ 9 cells keeps the ball of the deepest probed level (radius ¼,
    // eight cells) strictly inside the set at every sample
    let min_depth = 9u32;
    let mut ok = true;
    let mut detail = String::new();
    for seed in 1..=10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = rng.gen_range(1..=3usize);
        let mut u = GridSet::empty(g);
        for _ in 0..count {
            let cx = rng.gen_range(-2.0..2.0);
            let cy = rng.gen_range(-2.0..2.0);
            let r = rng.gen_range(0.7..1.5);
            u = u.union(&rasterize_ball(&[cx, cy], r, &g).unwrap()).unwrap();
        }
        let depth = u.complement().chebyshev_distance();
        let candidates: Vec<usize> = (0..g.node_count())
            .filter(|&id| {
                let c = g.coords(id);
                depth[id] >= min_depth && c[0].abs() <= 2.8 && c[1].abs() <= 2.8
            })
            .collect();
        assert!(candidates.len() >= 5, "seed {seed}: every disk has a deep interior");
        let samples: Vec<Vec<f64>> = (0..5)
            .map(|k| {
                let c = g.coords(candidates[k * (candidates.len() - 1) / 4]);
                vec![c[0], c[1]]
            })
            .collect();
        let diag = finely_open_diagnostic(&u, &samples, &p, &w, 4, &opts, &cache).unwrap();
        let clean = diag.overall == Verdict::Pass
            && diag.samples.iter().all(|s| s.verdict == Thinness::Thin);
        ok &= clean;
        if !clean {
            detail.push_str(&format!(
                "seed {seed}: overall {:?}, verdicts {:?}; ",
                diag.overall,
                diag.samples.iter().map(|s| s.verdict).collect::<Vec<_>>()
            ));
        }
    }
    if ok {
        detail = "10 seeded unions × 5 interior samples: complement THIN everywhere, \
                  overall PASS each time"
            .into();
    }
    announce("c08 fine-openness diagnostic at interior samples", ok, &detail);
}

#[test]
fn c09_interior_residual_halves_per_grid_doubling() {
    let mut ok = true;
    let mut detail = String::new();
    let mut prev: Option<f64> = None;
    let mut tol = 5e-4;
    for n in [129usize, 257, 513] {
        let g = square(-2.0, 2.0, n);
        let p = ExponentField::constant(g, 2.0).unwrap();
        let w = WeightField::constant(g, 1.0).unwrap();
        let k = rasterize_ball(&[0.0, 0.0], 1.0, &g).unwrap();
        let om = rasterize_ball(&[0.0, 0.0], 2.0, &g).unwrap();
        let opts =
            SolverOptions { residual_tol: Some(tol), max_iters: 60_000, ..Default::default() };
        let res = minimize_capacity(&k, &om, &p, &w, &opts).unwrap();
        let region = om.difference(&k.dilate(1)).unwrap();
        let r = ple_residual(&res.minimizer, &p, &w, &region).unwrap();
        ok &= res.converged;
        if let Some(pr) = prev {
            ok &= r <= pr / 2.0;
        }
        detail.push_str(&format!(
            "n={n}: residual={r:.3e} (driven below {tol:.3e}, converged={}, {} iters); ",
            res.converged, res.iterations
        ));
        prev = Some(r);
        tol = 0.45 * r;
    }
    announce("c09 supersolution residual halves per refinement", ok, &detail);
}

#[test]
fn c10_energy_gradient_matches_finite_differences() {
    let mut worst = 0.0f64;
    let mut cases = 0u32;
    for dim in [1usize, 2] {
        let g = match dim {
            1 => Grid::new(1, &[(0.0, 1.0)], &[65]).unwrap(),
            _ => Grid::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[33, 33]).unwrap(),
        };
        let om = GridSet::full(g).erode(1);
        let mut rng = ChaCha8Rng::seed_from_u64(7 + dim as u64);
        for trial in 0..10 {
            let p = match trial % 4 {
                0 => ExponentField::constant(g, 2.0).unwrap(),
                1 => ExponentField::constant(g, 3.0).unwrap(),
                2 => ExponentField::constant(g, 1.5).unwrap(),
                _ => ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap(),
            };
            let w = if trial % 2 == 0 {
                WeightField::constant(g, 1.0).unwrap()
            } else {
                WeightField::from_expr(g, "1 + rho^2").unwrap()
            };
            let vals: Vec<f64> = (0..g.node_count())
                .map(|id| if om.contains(id) { rng.gen_range(-1.0..1.0) } else { 0.0 })
                .collect();
            let f = ScalarField::new(g, vals.clone()).unwrap();
            let grad = energy_gradient(&f, &p, &w, &om).unwrap();

            let eps = 1e-6;
            let mut err = 0.0f64;
            let mut gmax = 0.0f64;
            for id in 0..g.node_count() {
                if !om.contains(id) {
                    continue;
                }
                let mut up = vals.clone();
                let mut dn = vals.clone();
                up[id] += eps;
                dn[id] -= eps;
                let e_up =
                    dirichlet_energy(&ScalarField::new(g, up).unwrap(), &p, &w, &om).unwrap();
                let e_dn =
                    dirichlet_energy(&ScalarField::new(g, dn).unwrap(), &p, &w, &om).unwrap();
                let fd = (e_up - e_dn) / (2.0 * eps);
                err = err.max((grad.get(id) - fd).abs());
                gmax = gmax.max(grad.get(id).abs());
            }
            worst = worst.max(err / gmax);
            cases += 1;
        }
    }
    let ok = cases == 20 && worst <= 1e-5;
    announce(
        "c10 energy gradient vs central differences (1e-5)",
        ok,
        &format!("{cases} seeded fields across 1D n=65 and 2D 33²: worst rel error {worst:.3e}"),
    );
}

#[test]
fn c11_luxemburg_norm_identities() {
    let g = square(-1.0, 1.0, 33);
    let w = WeightField::from_expr(g, "1 + rho^2").unwrap();
    let p_var = ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_const = 0.0f64;
    let mut worst_hom = 0.0f64;
    let mut worst_unit = 0.0f64;
    for trial in 0..20u32 {
        let vals: Vec<f64> = (0..g.node_count()).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let f = ScalarField::new(g, vals.clone()).unwrap();

        // constant exponent: the norm is the p₀-th root of the modular
        let p0 = [1.5, 2.0, 3.0, 4.0][trial as usize % 4];
        let pc = ExponentField::constant(g, p0).unwrap();
        let norm_c = luxemburg_norm(&f, &pc, &w).unwrap();
        let rho_root = modular(&f, &pc, &w).unwrap().powf(1.0 / p0);
        worst_const = worst_const.max((norm_c - rho_root).abs() / rho_root);

        // positive homogeneity under a variable exponent
        let c = if trial % 2 == 0 { 3.7 } else { 0.013 };
        let scaled: Vec<f64> = vals.iter().map(|v| c * v).collect();
        let fc = ScalarField::new(g, scaled).unwrap();
        let norm_v = luxemburg_norm(&f, &p_var, &w).unwrap();
        let norm_cv = luxemburg_norm(&fc, &p_var, &w).unwrap();
        worst_hom = worst_hom.max((norm_cv - c * norm_v).abs() / (c * norm_v));

        // the unit-ball identity: the modular of f/‖f‖ is exactly 1
        let unit: Vec<f64> = vals.iter().map(|v| v / norm_v).collect();
        let fu = ScalarField::new(g, unit).unwrap();
        let m_unit = modular(&fu, &p_var, &w).unwrap();
        worst_unit = worst_unit.max((m_unit - 1.0).abs());
    }
    let ok = worst_const <= 1e-6 && worst_hom <= 1e-9 && worst_unit <= 1e-6;
    announce(
        "c11 Luxemburg norm identities",
        ok,
        &format!(
            "20 seeded fields: constant-p root identity err {worst_const:.2e} (≤1e-6), \
             homogeneity err {worst_hom:.2e} (≤1e-9), unit modular err {worst_unit:.2e} (≤1e-6)"
        ),
    );
}

#[test]
fn c12_check_battery_is_deterministic_and_quick() {
    let bin = env!("CARGO_BIN_EXE_finecap");
    let dir = tempfile::tempdir().unwrap();
    let out1 = dir.path().join("first");
    let out2 = dir.path().join("second");

    let t0 = Instant::now();
    let run1 = Command::new(bin)
        .args(["check", "--seed", "42", "--profile", "quick", "--out"])
        .arg(&out1)
        .output()
        .unwrap();
    let dt = t0.elapsed();
    let run2 = Command::new(bin)
        .args(["check", "--seed", "42", "--profile", "quick", "--out"])
        .arg(&out2)
        .output()
        .unwrap();

    let bytes1 = fs::read(out1.join("check.json")).unwrap();
    let bytes2 = fs::read(out2.join("check.json")).unwrap();
    let ok = run1.status.success()
        && run2.status.success()
        && bytes1 == bytes2
        && dt <= Duration::from_secs(300);
    announce(
        "c12 check battery determinism (quick profile ≤ 5 min)",
        ok,
        &format!(
            "exit codes {:?}/{:?}, report {} bytes, byte-identical: {}, first run {dt:.2?}",
            run1.status.code(),
            run2.status.code(),
            bytes1.len(),
            bytes1 == bytes2
        ),
    );
}

#[test]
fn c13_spine_scenario_reports_the_cusp_tip() {
    let bin = env!("CARGO_BIN_EXE_finecap");
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("spine");
    let run = Command::new(bin)
        .args(["spine", "--dim", "2", "--n", "257", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    let mut ok = run.status.success();

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("tip_probe.json")).unwrap()).unwrap();
    let point: Vec<f64> = report["point"]
        .as_array()
        .expect("point array")
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    ok &= point == vec![0.0, 0.0];
    let sums: Vec<f64> = report["partial_sums"]
        .as_array()
        .expect("partial sums array")
        .iter()
        .map(|v| v.as_f64().expect("finite JSON number"))
        .collect();
    ok &= !sums.is_empty();
    ok &= sums.iter().all(|s| s.is_finite() && *s >= 0.0);
    ok &= sums.windows(2).all(|pair| pair[1] >= pair[0]);
    let classification = report["classification"].as_str().unwrap_or("<missing>").to_string();
    ok &= ["THIN", "THICK", "INCONCLUSIVE"].contains(&classification.as_str());

    let svg = fs::metadata(out.join("minimizer.svg")).unwrap();
    ok &= svg.len() > 0;
    announce(
        "c13 spine scenario probes the cusp tip",
        ok,
        &format!(
            "exit {:?}; {} nondecreasing finite partial sums, total {}, classification {classification} \
             (recorded, not asserted); heatmap {} bytes",
            run.status.code(),
            sums.len(),
            report["total"],
            svg.len()
        ),
    );
}
