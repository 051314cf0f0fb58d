//! Seeded, randomized verification harness for the capacity axioms and the
//! comparability estimates.
//!
//! Every check is a deterministic function of its seed and inputs; witnesses
//! carry the shape parameters needed to re-instantiate a failing trial in
//! isolation.  Assertions use the shared tolerance `relative 1e-3 + absolute
//! 1e-9` unless an operation states otherwise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::capacity::{CapacityCache, CapacityResult, SolverOptions};
use crate::grid::{rasterize_ball, rasterize_rect, Grid, GridSet};
use crate::scalar::Scalar;
use crate::spaces::{ExponentField, WeightField};
use crate::wiener::{wiener_integral, wiener_sum};
use crate::{Error, Result};

const REL_TOL: f64 = 1e-3;
const ABS_TOL: f64 = 1e-9;

/// Extremal constants measured by a comparability check.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ComparabilityConstants {
    /// Smallest observed ratio.
    pub c1: f64,
    /// Largest observed ratio.
    pub c2: f64,
    /// Largest observed doubling ratio μ(B(x,2r)) / μ(B(x,r)), when measured.
    pub cd: Option<f64>,
}

/// Outcome of one randomized or enumerated property check.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub name: String,
    pub trials: u32,
    /// Number of trials with at least one assertion beyond tolerance.
    pub failures: u32,
    /// Largest observed (lhs − rhs) / max(|rhs|, ε) over all ≤-assertions;
    /// negative values mean every assertion held with margin.
    pub worst_slack: f64,
    /// One entry per violated assertion, with enough parameters to rebuild
    /// the failing trial.
    pub witnesses: Vec<String>,
    /// Inputs excluded by a stated hypothesis, with the reason.
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
    pub constants: Option<ComparabilityConstants>,
    pub pass: bool,
}

impl PropertyReport {
    fn new(name: &str) -> Self {
        PropertyReport {
            name: name.to_string(),
            trials: 0,
            failures: 0,
            worst_slack: f64::NEG_INFINITY,
            witnesses: Vec::new(),
            skipped: Vec::new(),
            notes: Vec::new(),
            constants: None,
            pass: true,
        }
    }

    /// Records the assertion `lhs ≤ rhs` at the shared tolerance; returns
    /// whether it held and updates the slack high-water mark.
    fn check_le(&mut self, lhs: f64, rhs: f64, witness: impl FnOnce() -> String) -> bool {
        let slack = (lhs - rhs) / rhs.abs().max(ABS_TOL);
        if slack > self.worst_slack {
            self.worst_slack = slack;
        }
        let ok = lhs <= rhs + REL_TOL * rhs.abs() + ABS_TOL;
        if !ok {
            self.witnesses.push(witness());
        }
        ok
    }

    /// Extracts a capacity value for use in a comparison.  A solve that
    /// stopped without certifying convergence gets a witness entry and a
    /// `false` flag: an uncertified value must never pass a check silently.
    fn take_certified<T: Scalar>(
        &mut self,
        res: CapacityResult<T>,
        what: impl FnOnce() -> String,
    ) -> (f64, bool) {
        let v = res.value.as_f64();
        if res.converged {
            (v, true)
        } else {
            self.witnesses.push(format!(
                "{}: solver stopped without certifying convergence after {} iterations \
                 (interior residual {:.3e})",
                what(),
                res.iterations,
                res.interior_residual
            ));
            (v, false)
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.pass && self.failures == 0;
        // Checks that report through `constants` never record a slack; keep
        // the field finite so the JSON report stays numeric.
        if !self.worst_slack.is_finite() {
            self.worst_slack = 0.0;
        }
        self
    }
}

// ── randomized shapes ────────────────────────────────────────────────────

/// A disk or axis-aligned box with a printable construction recipe.
struct Shape<T: Scalar> {
    set: GridSet<T>,
    desc: String,
}

fn random_primitive<T: Scalar>(
    rng: &mut ChaCha8Rng,
    grid: &Grid<T>,
    center: &[f64],
    reach: f64,
) -> Shape<T> {
    let dim = grid.dim();
    let mut c = [0.0f64; 3];
    for (a, ca) in c.iter_mut().enumerate().take(dim) {
        *ca = center[a] + reach * rng.gen_range(-0.22..0.22);
    }
    if rng.gen_bool(0.5) {
        let r = reach * rng.gen_range(0.10..0.35);
        let ct: Vec<T> = c[..dim].iter().map(|&v| T::of(v)).collect();
        Shape {
            set: rasterize_ball(&ct, T::of(r), grid).expect("generated disk must rasterize"),
            desc: format!("disk(c={:?}, r={r:.6})", &c[..dim]),
        }
    } else {
        let mut lo = [T::zero(); 3];
        let mut hi = [T::zero(); 3];
        let mut hw = [0.0f64; 3];
        for a in 0..dim {
            hw[a] = reach * rng.gen_range(0.08..0.30);
            lo[a] = T::of(c[a] - hw[a]);
            hi[a] = T::of(c[a] + hw[a]);
        }
        Shape {
            set: rasterize_rect(&lo[..dim], &hi[..dim], grid)
                .expect("generated box must rasterize"),
            desc: format!("box(c={:?}, hw={:?})", &c[..dim], &hw[..dim]),
        }
    }
}

/// Union of 1..=3 primitives clipped to stay compactly inside Ω.
fn random_compact<T: Scalar>(
    rng: &mut ChaCha8Rng,
    grid: &Grid<T>,
    center: &[f64],
    reach: f64,
    inside: &GridSet<T>,
) -> Shape<T> {
    let count = rng.gen_range(1..=3usize);
    let mut acc: Option<Shape<T>> = None;
    for _ in 0..count {
        let prim = random_primitive(rng, grid, center, reach);
        acc = Some(match acc {
            None => prim,
            Some(s) => Shape {
                set: s.set.union(&prim.set).expect("same grid"),
                desc: format!("{} ∪ {}", s.desc, prim.desc),
            },
        });
    }
    let s = acc.expect("at least one primitive");
    Shape {
        set: s.set.intersection(inside).expect("same grid"),
        desc: format!("({}) ∩ erode(Ω,2)", s.desc),
    }
}

/// Random fat domain Ω plus the sandbox for compact subsets.
fn random_domain<T: Scalar>(rng: &mut ChaCha8Rng, grid: &Grid<T>) -> (Shape<T>, [f64; 3], f64) {
    let dim = grid.dim();
    let mut mid = [0.0f64; 3];
    let mut span_min = f64::INFINITY;
    for a in 0..dim {
        let (lo, hi) = grid.extent(a);
        mid[a] = 0.5 * (lo.as_f64() + hi.as_f64());
        span_min = span_min.min(hi.as_f64() - lo.as_f64());
    }
    let mut c = [0.0f64; 3];
    for (a, ca) in c.iter_mut().enumerate().take(dim) {
        *ca = mid[a] + span_min * rng.gen_range(-0.05..0.05);
    }
    let radius = span_min * rng.gen_range(0.28..0.38);
    let shape = if rng.gen_bool(0.5) {
        let ct: Vec<T> = c[..dim].iter().map(|&v| T::of(v)).collect();
        Shape {
            set: rasterize_ball(&ct, T::of(radius), grid).expect("domain disk must rasterize"),
            desc: format!("Ω=disk(c={:?}, R={radius:.6})", &c[..dim]),
        }
    } else {
        let mut lo = [T::zero(); 3];
        let mut hi = [T::zero(); 3];
        for a in 0..dim {
            lo[a] = T::of(c[a] - radius);
            hi[a] = T::of(c[a] + radius);
        }
        Shape {
            set: rasterize_rect(&lo[..dim], &hi[..dim], grid)
                .expect("domain box must rasterize"),
            desc: format!("Ω=box(c={:?}, hw={radius:.6})", &c[..dim]),
        }
    };
    (shape, c, radius)
}

// ── axiom harness ────────────────────────────────────────────────────────

/// Randomized check of the capacity axioms: P1 (empty set has capacity 0),
/// P2 (monotone in both arguments), P4 (strong subadditivity), P7 (finite
/// subadditivity).  Shapes are unions of ≤ 3 disks/boxes inside a random
/// domain, reproducible from the seed.
pub fn check_capacity_axioms<T: Scalar>(
    seed: u64,
    trials: u32,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<PropertyReport> {
    if trials < 1 {
        return Err(Error::Precondition("trials ≥ 1".into()));
    }
    let grid = p.grid();
    if w.grid() != grid {
        return Err(Error::GridMismatch);
    }
    let mut report = PropertyReport::new("capacity_axioms");
    report.notes.push(format!("seed={seed}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for t in 0..trials {
        report.trials += 1;
        let (omega, c, radius) = random_domain(&mut rng, grid);
        let sandbox = omega.set.erode(2);
        let k1 = random_compact(&mut rng, grid, &c, radius, &sandbox);
        let k2 = random_compact(&mut rng, grid, &c, radius, &sandbox);
        let k3 = random_compact(&mut rng, grid, &c, radius, &sandbox);
        let ctx = format!("trial {t} (seed {seed}): {}; K1={}; K2={}; K3={}",
            omega.desc, k1.desc, k2.desc, k3.desc);

        let solve = |k: &GridSet<T>| cache.minimize(k, &omega.set, p, w, opts);

        let mut trial_ok = true;

        // P1: the empty set costs nothing
        let (c_empty, cv) = report.take_certified(solve(&GridSet::empty(*grid))?, || {
            format!("{ctx}: cap(∅)")
        });
        trial_ok &= cv;
        if c_empty != 0.0 {
            trial_ok = false;
            report.witnesses.push(format!("{ctx}: P1: cap(∅) = {c_empty:.3e} ≠ 0"));
        }

        let union12 = k1.set.union(&k2.set)?;
        let inter12 = k1.set.intersection(&k2.set)?;
        let (c1, cv1) = report.take_certified(solve(&k1.set)?, || format!("{ctx}: cap(K1)"));
        let (c2, cv2) = report.take_certified(solve(&k2.set)?, || format!("{ctx}: cap(K2)"));
        let (c_union, cv3) =
            report.take_certified(solve(&union12)?, || format!("{ctx}: cap(K1∪K2)"));
        let (c_inter, cv4) =
            report.take_certified(solve(&inter12)?, || format!("{ctx}: cap(K1∩K2)"));
        trial_ok &= cv1 && cv2 && cv3 && cv4;

        // P2 in the compact argument: K1 ⊆ K1 ∪ K2
        trial_ok &= report.check_le(c1, c_union, || {
            format!("{ctx}: P2(K): cap(K1) = {c1:.9e} > cap(K1∪K2) = {c_union:.9e}")
        });

        // P2 in the domain argument: Ω ⊆ Ω′ widens the admissible class
        let omega_big = omega.set.dilate(4);
        let (c1_big, cv5) = report
            .take_certified(cache.minimize(&k1.set, &omega_big, p, w, opts)?, || {
                format!("{ctx}: cap(K1, dilate(Ω,4))")
            });
        trial_ok &= cv5;
        trial_ok &= report.check_le(c1_big, c1, || {
            format!("{ctx}: P2(Ω): cap(K1, dilate(Ω,4)) = {c1_big:.9e} > cap(K1, Ω) = {c1:.9e}")
        });

        // P4: strong subadditivity of the compact pair
        trial_ok &= report.check_le(c_union + c_inter, c1 + c2, || {
            format!(
                "{ctx}: P4: cap(∪)+cap(∩) = {:.9e} > cap(K1)+cap(K2) = {:.9e}",
                c_union + c_inter,
                c1 + c2
            )
        });

        // P7: finite subadditivity over the three-set family
        let union123 = union12.union(&k3.set)?;
        let (c3, cv6) = report.take_certified(solve(&k3.set)?, || format!("{ctx}: cap(K3)"));
        let (c_all, cv7) =
            report.take_certified(solve(&union123)?, || format!("{ctx}: cap(K1∪K2∪K3)"));
        trial_ok &= cv6 && cv7;
        trial_ok &= report.check_le(c_all, c1 + c2 + c3, || {
            format!(
                "{ctx}: P7: cap(K1∪K2∪K3) = {c_all:.9e} > Σ cap(Ki) = {:.9e}",
                c1 + c2 + c3
            )
        });

        if !trial_ok {
            report.failures += 1;
        }
    }
    Ok(report.finish())
}

// ── nested-family limits ─────────────────────────────────────────────────

/// Checks capacity along a strictly nested family: the values must be
/// monotone (within tolerance) and the last one within 2% of the capacity of
/// the limit set.  The limit defaults to the family's intersection
/// (decreasing) or union (increasing); pass an explicit `limit` to compare
/// against an independently built set instead.
pub fn check_capacity_limits<T: Scalar>(
    family: &[GridSet<T>],
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
    limit: Option<&GridSet<T>>,
) -> Result<PropertyReport> {
    if family.len() < 3 {
        return Err(Error::Precondition("family needs at least 3 sets".into()));
    }
    let decreasing = (0..family.len() - 1).map(|i| -> Result<bool> {
        Ok(family[i + 1].is_subset(&family[i])? && family[i + 1].count() < family[i].count())
    });
    let increasing = (0..family.len() - 1).map(|i| -> Result<bool> {
        Ok(family[i].is_subset(&family[i + 1])? && family[i].count() < family[i + 1].count())
    });
    let is_decreasing = decreasing.collect::<Result<Vec<_>>>()?.into_iter().all(|b| b);
    let is_increasing = increasing.collect::<Result<Vec<_>>>()?.into_iter().all(|b| b);
    if !is_decreasing && !is_increasing {
        return Err(Error::Precondition("family not strictly nested".into()));
    }

    let mut report = PropertyReport::new("capacity_limits");
    report.trials = 1;
    let mut ok = true;
    let mut values = Vec::with_capacity(family.len());
    for (i, k) in family.iter().enumerate() {
        let (v, cv) = report
            .take_certified(cache.minimize(k, omega, p, w, opts)?, || format!("family member {i}"));
        ok &= cv;
        values.push(v);
    }
    report
        .notes
        .push(format!("direction={}", if is_decreasing { "decreasing" } else { "increasing" }));
    report.notes.push(format!("values={values:?}"));
    for i in 0..values.len() - 1 {
        let (lo, hi) =
            if is_decreasing { (values[i + 1], values[i]) } else { (values[i], values[i + 1]) };
        ok &= report.check_le(lo, hi, || {
            format!("monotone trend broken between members {i} and {}: {lo:.9e} > {hi:.9e}", i + 1)
        });
    }

    let computed_limit = if is_decreasing {
        family[1..].iter().try_fold(family[0].clone(), |acc, s| acc.intersection(s))?
    } else {
        family[1..].iter().try_fold(family[0].clone(), |acc, s| acc.union(s))?
    };
    let limit_set = limit.unwrap_or(&computed_limit);
    let (cap_limit, cvl) =
        report.take_certified(cache.minimize(limit_set, omega, p, w, opts)?, || {
            "limit set".to_string()
        });
    ok &= cvl;
    let cap_last = *values.last().expect("family nonempty");
    let gap = (cap_last - cap_limit).abs();
    report.notes.push(format!("cap(last)={cap_last:.9e}, cap(limit)={cap_limit:.9e}"));
    let rel = gap / cap_limit.abs().max(ABS_TOL);
    if rel > 0.02 {
        ok = false;
        report.witnesses.push(format!(
            "limit gap {rel:.4} exceeds 2%: cap(last)={cap_last:.9e} vs cap(limit)={cap_limit:.9e}"
        ));
    }
    if !ok {
        report.failures = 1;
    }
    Ok(report.finish())
}

// ── ball/measure comparability ───────────────────────────────────────────

/// Compares the reference condenser capacity cap(B(x,r), B(x,2r)) with the
/// weighted measure of B(x,r) over a list of radii.  Radii whose capacity is
/// below 1 fail the stated hypothesis and are skipped with a note.  Records
/// C1 = min ratio, C2 = max ratio, and the doubling estimate
/// c_d = max μ(B(x,2r))/μ(B(x,r)); passes when C2/C1 ≤ 10.
pub fn check_ball_measure_comparability<T: Scalar>(
    x: &[T],
    radii: &[f64],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<PropertyReport> {
    let grid = p.grid();
    if w.grid() != grid {
        return Err(Error::GridMismatch);
    }
    grid.node_at(x)?;
    let mut report = PropertyReport::new("ball_measure_comparability");
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    let mut cd = 0.0f64;
    let mut certified = true;
    for &r in radii {
        report.trials += 1;
        let ball = rasterize_ball(x, T::of(r), grid)?;
        let outer = rasterize_ball(x, T::of(2.0 * r), grid)?;
        let (cap, cv) = report
            .take_certified(cache.minimize(&ball, &outer, p, w, opts)?, || format!("r={r}"));
        certified &= cv;
        if cap < 1.0 {
            report.skipped.push(format!(
                "r={r}: cap(B,2B) = {cap:.6e} < 1 fails the comparability hypothesis"
            ));
            continue;
        }
        let mu = w.measure(&ball)?.as_f64();
        let mu2 = w.measure(&outer)?.as_f64();
        let ratio = cap / mu;
        report.notes.push(format!("r={r}: cap={cap:.9e}, μ={mu:.9e}, ratio={ratio:.9e}"));
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
        cd = cd.max(mu2 / mu);
    }
    if report.trials as usize == report.skipped.len() {
        return Err(Error::Hypothesis(
            "cap(B(x,r), B(x,2r)) ≥ 1 never satisfied across the given radii".into(),
        ));
    }
    report.constants = Some(ComparabilityConstants { c1, c2, cd: Some(cd) });
    if c2 / c1 > 10.0 {
        report.failures += 1;
        report.witnesses.push(format!(
            "ratio spread C2/C1 = {:.4} exceeds 10 (C1={c1:.6e}, C2={c2:.6e}); \
             the comparability constants degrade across this radius range",
            c2 / c1
        ));
    }
    if !certified {
        report.failures += 1;
    }
    Ok(report.finish())
}

// ── annulus comparability ────────────────────────────────────────────────

/// For a set E inside B(x,r), checks that enlarging the reference ball from
/// B(x,2r) to B(x,2s), s ∈ [r,2r], only decreases the capacity, and reports
/// the extremal ratio C = max_s cap(E,B(x,2r)) / cap(E,B(x,2s)).  Requires
/// the hypothesis cap(E, B(x,4r)) ≥ 1; otherwise the check is skipped with a
/// note.
pub fn check_annulus_comparability<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    r: f64,
    s_list: &[f64],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<PropertyReport> {
    let grid = p.grid();
    if e.grid() != grid || w.grid() != grid {
        return Err(Error::GridMismatch);
    }
    grid.node_at(x)?;
    let ball_r = rasterize_ball(x, T::of(r), grid)?;
    if !e.is_subset(&ball_r)? {
        return Err(Error::Precondition("E must lie inside B(x, r)".into()));
    }
    for &s in s_list {
        if !(r <= s && s <= 2.0 * r) {
            return Err(Error::Precondition(format!("s = {s} outside [r, 2r] = [{r}, {}]", 2.0 * r)));
        }
    }

    let mut report = PropertyReport::new("annulus_comparability");
    let mut ok = true;
    let hyp_ball = rasterize_ball(x, T::of(4.0 * r), grid)?;
    let (hyp, cvh) = report
        .take_certified(cache.minimize(e, &hyp_ball, p, w, opts)?, || "cap(E, B(x,4r))".into());
    ok &= cvh;
    if hyp < 1.0 {
        report.skipped.push(format!(
            "hypothesis cap(E, B(x,4r)) = {hyp:.6e} < 1: check skipped"
        ));
        if !ok {
            report.failures = 1;
        }
        return Ok(report.finish());
    }

    let outer_r = rasterize_ball(x, T::of(2.0 * r), grid)?;
    let (base, cvb) = report
        .take_certified(cache.minimize(e, &outer_r, p, w, opts)?, || "cap(E, B(x,2r))".into());
    ok &= cvb;
    let mut worst = 1.0f64;
    let mut best = f64::INFINITY;
    for &s in s_list {
        report.trials += 1;
        let outer_s = rasterize_ball(x, T::of(2.0 * s), grid)?;
        let (v, cvs) = report
            .take_certified(cache.minimize(e, &outer_s, p, w, opts)?, || {
                format!("cap(E, B(x,2s)), s={s}")
            });
        ok &= cvs;
        ok &= report.check_le(v, base, || {
            format!("s={s}: cap(E, B(x,2s)) = {v:.9e} > cap(E, B(x,2r)) = {base:.9e}")
        });
        report.notes.push(format!("s={s}: cap={v:.9e}, base/cap={:.6}", base / v));
        worst = worst.max(base / v);
        best = best.min(base / v);
    }
    report.constants = Some(ComparabilityConstants { c1: best, c2: worst, cd: None });
    if !ok {
        report.failures = 1;
    }
    Ok(report.finish())
}

// ── Wiener sum/integral equivalence ──────────────────────────────────────

/// Computes the dyadic sum and the radial quadrature per case and checks
/// that the two classifications agree; the ratio sum/integral (over cases
/// where both are positive) must stay within [0.2, 5].  Cases with x ∈ E
/// violate the hypothesis and are skipped with a note.
pub fn check_wiener_equivalence<T: Scalar>(
    cases: &[(GridSet<T>, Vec<T>)],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<PropertyReport> {
    let grid = p.grid();
    let mut report = PropertyReport::new("wiener_equivalence");
    let mut rmin = f64::INFINITY;
    let mut rmax = 0.0f64;
    let mut ok = true;
    for (idx, (e, x)) in cases.iter().enumerate() {
        if e.grid() != grid {
            return Err(Error::GridMismatch);
        }
        let node = grid.node_at(x)?;
        if e.contains(node) {
            report.skipped.push(format!("case {idx}: x lies in E, hypothesis x ∉ E fails"));
            continue;
        }
        report.trials += 1;
        let sum = wiener_sum(e, x, p, w, i_max, opts, cache)?;
        let quad = wiener_integral(e, x, p, w, 2, opts, cache)?;
        if sum.classification != quad.classification {
            ok = false;
            report.witnesses.push(format!(
                "case {idx}: classifications disagree: sum → {:?}, integral → {:?}",
                sum.classification, quad.classification
            ));
        }
        let qv = quad.quadrature_value.expect("integral variant always sets the value");
        if sum.total > 0.0 && qv > 0.0 {
            let ratio = sum.total / qv;
            rmin = rmin.min(ratio);
            rmax = rmax.max(ratio);
            report.notes.push(format!(
                "case {idx}: sum={:.9e}, integral={qv:.9e}, ratio={ratio:.6}",
                sum.total
            ));
            if !(0.2..=5.0).contains(&ratio) {
                ok = false;
                report.witnesses.push(format!(
                    "case {idx}: sum/integral ratio {ratio:.6} outside [0.2, 5]"
                ));
            }
        } else {
            report.notes.push(format!(
                "case {idx}: sum={:.9e}, integral={qv:.9e} (ratio not formed)",
                sum.total
            ));
        }
    }
    if rmin.is_finite() {
        report.constants = Some(ComparabilityConstants { c1: rmin, c2: rmax, cd: None });
    }
    if !ok {
        report.failures = 1;
    }
    Ok(report.finish())
}
