//! Fine-topology diagnostics built on tail-decay of condenser terms:
//! finely-open tests, approximate fine interior and closure, and fine
//! continuity at a point.
//!
//! Everything here is a grid-scale diagnostic, not an exact topological
//! operator: verdicts are three-valued, and INCONCLUSIVE never counts as a
//! pass or a fail.

use serde::Serialize;

use crate::capacity::{CapacityCache, SolverOptions};
use crate::grid::{Grid, GridSet, ScalarField};
use crate::scalar::Scalar;
use crate::spaces::{ExponentField, WeightField};
use crate::wiener::{
    classify_tail, level_at_radius, max_feasible_levels, tail_window, wiener_sum,
    ClassifyThresholds, Thinness, WienerReport,
};
use crate::{Error, Result};

/// Aggregate verdict of a multi-sample diagnostic.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "PASS")]
    Pass,
    #[serde(rename = "FAIL")]
    Fail,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

/// One probed sample of a finely-open diagnostic.
#[derive(Clone, Debug, Serialize)]
pub struct FineSample {
    pub point: Vec<f64>,
    /// Thinness of the complement at this point.
    pub verdict: Thinness,
    /// Full report; absent when the condenser geometry did not fit the grid
    /// at this point (then the verdict is INCONCLUSIVE with a note).
    pub report: Option<WienerReport>,
    pub note: Option<String>,
}

/// Summary of the probed set carried in serialized diagnostics.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SetSummary {
    pub nodes: usize,
    pub dim: usize,
}

/// Result of [`finely_open_diagnostic`]: per-sample verdicts plus the
/// three-valued aggregate.
#[derive(Clone, Debug, Serialize)]
pub struct FineDiagnostic {
    pub set: SetSummary,
    pub samples: Vec<FineSample>,
    /// PASS iff every sample is THIN, FAIL iff some sample is THICK,
    /// INCONCLUSIVE otherwise.
    pub overall: Verdict,
}

/// Counters of a whole-set scan ([`fine_interior`] / [`fine_closure`]).
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct FineScanStats {
    /// Nodes examined (members of A, respectively non-members of F).
    pub candidates: usize,
    pub thin: usize,
    pub thick: usize,
    pub inconclusive: usize,
    /// Probes abandoned because the condenser geometry did not fit the grid
    /// (counted as inconclusive in the set arithmetic as well).
    pub unfittable: usize,
    /// Subset of `thin` decided without solving: the deepest ball missed the
    /// probed set entirely, which forces a zero tail.
    pub shortcut_thin: usize,
}

/// A scan's output set plus the nodes that could not be decided.
#[derive(Clone, Debug)]
pub struct FineSetOutcome<T: Scalar> {
    pub set: GridSet<T>,
    /// Probed nodes whose verdict was INCONCLUSIVE (including unfittable
    /// geometry); excluded from `set` membership decisions.
    pub inconclusive: GridSet<T>,
    pub stats: FineScanStats,
}

fn aggregate(samples: &[FineSample]) -> Verdict {
    if samples.iter().any(|s| s.verdict == Thinness::Thick) {
        Verdict::Fail
    } else if samples.iter().all(|s| s.verdict == Thinness::Thin) {
        Verdict::Pass
    } else {
        Verdict::Inconclusive
    }
}

/// True for errors that mean "this probe does not fit the grid here", which
/// scans soften to INCONCLUSIVE rather than aborting the whole operation.
fn is_geometry_error(e: &Error) -> bool {
    matches!(e, Error::TouchesBoundary | Error::Precondition(_) | Error::BallBelowResolution)
}

/// Tests whether a set is finely open along the given sample points: the
/// complement must be thin at each of them.
///
/// Samples are probed in lexicographic coordinate order so the report is
/// independent of input order.  A sample where the condenser geometry does
/// not fit the grid is reported INCONCLUSIVE with a note instead of failing
/// the whole diagnostic.
pub fn finely_open_diagnostic<T: Scalar>(
    u: &GridSet<T>,
    samples: &[Vec<T>],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<FineDiagnostic> {
    let grid = u.grid();
    let mut ordered: Vec<usize> = Vec::with_capacity(samples.len());
    for x in samples {
        let id = grid.node_at(x)?;
        if !u.contains(id) {
            return Err(Error::Precondition(format!(
                "sample {:?} is not in the probed set",
                &x[..grid.dim()].iter().map(|c| c.as_f64()).collect::<Vec<_>>()
            )));
        }
        ordered.push(id);
    }
    ordered.sort_unstable();
    ordered.dedup();

    let complement = u.complement();
    let mut out = Vec::with_capacity(ordered.len());
    for id in ordered {
        let coords = grid.coords(id);
        let x = &coords[..grid.dim()];
        let point: Vec<f64> = x.iter().map(|c| c.as_f64()).collect();
        match wiener_sum(&complement, x, p, w, i_max, opts, cache) {
            Ok(rep) => out.push(FineSample {
                point,
                verdict: rep.classification,
                report: Some(rep),
                note: None,
            }),
            Err(e) if is_geometry_error(&e) => out.push(FineSample {
                point,
                verdict: Thinness::Inconclusive,
                report: None,
                note: Some(format!("probe does not fit the grid: {e}")),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(FineDiagnostic {
        set: SetSummary { nodes: u.count(), dim: grid.dim() },
        overall: aggregate(&out),
        samples: out,
    })
}

/// Classifies the thinness of `e` at one node from the tail levels only.
///
/// The verdict equals `classify_thinness(wiener_sum(e, x, iMax, …))` exactly:
/// the classifier reads only the last `max(⌈n/2⌉, 3)` of the `n = iMax + 1`
/// terms, so the earlier (largest, most expensive) levels are never solved.
fn tail_thinness<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
    exponent: f64,
    th: &ClassifyThresholds,
) -> Result<Thinness> {
    let n = i_max as usize + 1;
    if n < 4 {
        return Ok(Thinness::Inconclusive);
    }
    let mut tail = Vec::with_capacity(tail_window(n));
    for i in (n - tail_window(n))..n {
        let r = f64::exp2(-(i as f64));
        let (_, _, term, _) = level_at_radius(e, x, r, exponent, p, w, opts, cache)?;
        tail.push(term);
    }
    Ok(classify_tail(&tail, th))
}

/// Shared scan behind [`fine_interior`] and [`fine_closure`]: classifies the
/// thinness of `probed` at every candidate node, with a distance shortcut.
fn scan_thinness<T: Scalar>(
    candidates: &GridSet<T>,
    probed: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<(Vec<Thinness>, GridSet<T>, FineScanStats)> {
    let grid = *candidates.grid();
    if probed.grid() != &grid || p.grid() != &grid || w.grid() != &grid {
        return Err(Error::GridMismatch);
    }
    if max_feasible_levels(&grid).is_none_or(|k| i_max > k) {
        return Err(Error::Precondition(format!(
            "level budget {} too deep for this grid; max feasible is {}",
            i_max,
            max_feasible_levels(&grid).map_or_else(|| "none".to_string(), |k| k.to_string()),
        )));
    }
    let th = ClassifyThresholds::default();
    let n_levels = i_max as usize + 1;
    let r_min = f64::exp2(-f64::from(i_max));
    let h_min = grid.h_min_max().0.as_f64();
    // distance (in cells) from each node to the probed set: if the deepest
    // ball cannot reach it, the tail ends in 0 and the verdict is THIN
    // without any solve — valid only when there are enough levels to
    // classify at all
    let dist = probed.chebyshev_distance();
    let shortcut_ok = n_levels >= 4;

    let mut stats = FineScanStats::default();
    let mut verdicts = vec![Thinness::Inconclusive; grid.node_count()];
    let mut inconclusive_mask = vec![false; grid.node_count()];
    for id in 0..grid.node_count() {
        if !candidates.contains(id) {
            continue;
        }
        stats.candidates += 1;
        if shortcut_ok && (dist[id] as f64) * h_min >= r_min {
            verdicts[id] = Thinness::Thin;
            stats.thin += 1;
            stats.shortcut_thin += 1;
            continue;
        }
        let coords = grid.coords(id);
        let x = &coords[..grid.dim()];
        let p_x = p.field().get(id).as_f64();
        let v = match tail_thinness(probed, x, p, w, i_max, opts, cache, 1.0 / (p_x - 1.0), &th)
        {
            Ok(v) => v,
            Err(e) if is_geometry_error(&e) => {
                stats.unfittable += 1;
                Thinness::Inconclusive
            }
            Err(e) => return Err(e),
        };
        verdicts[id] = v;
        match v {
            Thinness::Thin => stats.thin += 1,
            Thinness::Thick => stats.thick += 1,
            Thinness::Inconclusive => {
                stats.inconclusive += 1;
                inconclusive_mask[id] = true;
            }
        }
    }
    stats.inconclusive += stats.unfittable;
    Ok((verdicts, GridSet::new(grid, inconclusive_mask)?, stats))
}

/// Grid approximation of the fine interior: the nodes of `a` at which the
/// complement of `a` is thin.  INCONCLUSIVE nodes are excluded from the
/// result and reported in the outcome.
pub fn fine_interior<T: Scalar>(
    a: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<FineSetOutcome<T>> {
    let complement = a.complement();
    let (verdicts, inconclusive, stats) =
        scan_thinness(a, &complement, p, w, i_max, opts, cache)?;
    let mask: Vec<bool> = verdicts
        .iter()
        .enumerate()
        .map(|(id, v)| a.contains(id) && *v == Thinness::Thin)
        .collect();
    Ok(FineSetOutcome { set: GridSet::new(*a.grid(), mask)?, inconclusive, stats })
}

/// Grid approximation of the fine closure: `f` plus the outside nodes at
/// which `f` is thick.  INCONCLUSIVE nodes are not added and are reported in
/// the outcome.
pub fn fine_closure<T: Scalar>(
    f: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<FineSetOutcome<T>> {
    let outside = f.complement();
    let (verdicts, inconclusive, stats) = scan_thinness(&outside, f, p, w, i_max, opts, cache)?;
    let mask: Vec<bool> = verdicts
        .iter()
        .enumerate()
        .map(|(id, v)| f.contains(id) || *v == Thinness::Thick)
        .collect();
    Ok(FineSetOutcome { set: GridSet::new(*f.grid(), mask)?, inconclusive, stats })
}

/// Probes fine continuity of `field` at `x0`: classifies the thinness of the
/// deviation set `{x : |field(x) − field(x0)| ≥ eps}` at `x0`.  The returned
/// report's `classification` is the verdict.
pub fn fine_continuity_diagnostic<T: Scalar>(
    field: &ScalarField<T>,
    x0: &[T],
    eps: T,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<WienerReport> {
    if !(eps > T::zero()) {
        return Err(Error::Precondition("eps must be positive".into()));
    }
    let grid = field.grid();
    let id0 = grid.node_at(x0)?;
    let f0 = field.get(id0);
    let mask: Vec<bool> = field.values().iter().map(|&v| (v - f0).abs() >= eps).collect();
    let deviation = GridSet::new(*grid, mask)?;
    wiener_sum(&deviation, x0, p, w, i_max, opts, cache)
}

/// Builds the exponential-cusp demonstration scenario: the set
/// `{(x, t) : t > 0, |x| < exp(-1/t)}` around its tip at the origin, probed
/// with a thinness report at the tip and a rendered capacity minimizer.
///
/// `resolution` must be odd (so the tip is a node) and at least 17.  The
/// probe depth is the grid's feasible maximum, capped at 6 levels.
pub fn spine_scenario(dim: usize, resolution: usize) -> Result<crate::scenario::Scenario> {
    if !(2..=3).contains(&dim) {
        return Err(Error::Precondition(format!("spine dimension must be 2 or 3, got {dim}")));
    }
    if resolution < 17 || resolution % 2 == 0 {
        return Err(Error::Precondition(format!(
            "spine resolution must be odd and at least 17, got {resolution}"
        )));
    }
    let extent = vec![(-1.0f64, 1.0f64); dim];
    let counts = vec![resolution; dim];
    let grid = Grid::<f64>::new(dim, &extent, &counts)?;
    let feasible = crate::wiener::max_feasible_levels(&grid).ok_or_else(|| {
        Error::Precondition("spine resolution too coarse for any probe level".into())
    })?;
    let levels = feasible.min(6);

    let (cusp, up_axis, zeros) = match dim {
        2 => ("abs(x1) < exp(-1/x2)", 2, "0 0"),
        _ => ("(x1^2 + x2^2)^0.5 < exp(-1/x3)", 3, "0 0 0"),
    };
    let extent_text = vec!["-1 1"; dim].join(" ");
    let text = format!(
        "# Exponential cusp probed at its tip.\n\
         [domain]\n\
         dim = {dim}\n\
         extent = {extent_text}\n\
         n = {n_text}\n\
         [exponent]\n\
         expr = 2\n\
         [weight]\n\
         expr = 1\n\
         [set CUSP]\n\
         kind = expr\n\
         where = {cusp}\n\
         [set TOP]\n\
         kind = halfspace\n\
         axis = {up_axis}\n\
         sense = gt\n\
         value = 0\n\
         [set SPINE]\n\
         kind = algebra\n\
         expr = CUSP & TOP\n\
         [set CORE]\n\
         kind = ball\n\
         center = {zeros}\n\
         radius = 0.7\n\
         [set HOLD]\n\
         kind = ball\n\
         center = {zeros}\n\
         radius = 0.9\n\
         [set SPIKE]\n\
         kind = algebra\n\
         expr = SPINE & CORE\n\
         [task tip_probe]\n\
         kind = wiener\n\
         variant = sum\n\
         set = SPINE\n\
         point = {zeros}\n\
         levels = {levels}\n\
         [task minimizer]\n\
         kind = capacity\n\
         compact = SPIKE\n\
         domain = HOLD\n\
         heatmap = {heatmap}\n",
        n_text = counts.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
        heatmap = dim == 2,
    );
    crate::scenario::parse_scenario(&text)
}
