//! Dyadic condenser sums, radial quadrature, and decay classification.
//!
//! For a node `x` and a set `E`, each level compares the capacity of `E`
//! clipped to the ball `B(x, r)` against the capacity of the full ball, both
//! relative to the doubled ball `B(x, 2r)`.  The ratios, raised to
//! `1/(p(x) − 1)`, form a nonnegative term sequence; its decay or persistence
//! as `r` shrinks is the grid-scale probe for whether `E` is negligibly thin
//! at `x` or solidly thick.  The dyadic variant sums terms at `r = 2⁻ⁱ`; the
//! quadrature variant integrates the same ratio against `dr/r` over
//! `[4h, 1]` with a log-spaced midpoint rule.

use serde::Serialize;

use crate::capacity::{CapacityCache, SolverOptions};
use crate::grid::{rasterize_ball, Grid, GridSet};
use crate::scalar::Scalar;
use crate::spaces::{ExponentField, WeightField};
use crate::{Error, Result};

/// Note embedded in every report: how a level with zero reference capacity is
/// scored.  Applied per level, never to the whole sum.
pub const ZERO_REFERENCE_CONVENTION: &str =
    "a level whose reference ball capacity is 0 contributes term = 1";

/// Verdict of the tail-decay classification of a term sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Thinness {
    #[serde(rename = "THIN")]
    Thin,
    #[serde(rename = "THICK")]
    Thick,
    #[serde(rename = "INCONCLUSIVE")]
    Inconclusive,
}

/// One level of a Wiener report: a radius, the two capacities, and the term.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct WienerLevel {
    /// Dyadic level `i` (sum variant) or quadrature node index.
    pub index: u32,
    /// Inner ball radius; the reference condenser is `B(x,r)` in `B(x,2r)`.
    pub radius: f64,
    /// cap(E ∩ B(x,r), B(x,2r)).
    pub numerator: f64,
    /// cap(B(x,r), B(x,2r)).
    pub denominator: f64,
    /// (numerator/denominator)^{1/(p(x)−1)}, clamped to [0,1]; 1 if the
    /// denominator is zero.
    pub term: f64,
    /// True when the zero-reference convention fired at this level.
    pub zero_denominator: bool,
}

/// Outcome of a Wiener sum or integral at one point.
#[derive(Clone, Debug, Serialize)]
pub struct WienerReport {
    /// `"sum"` (dyadic series) or `"integral"` (log-midpoint quadrature).
    pub kind: &'static str,
    /// Coordinates of the probed node.
    pub point: Vec<f64>,
    /// p(x) at the probed node; every term uses exponent 1/(p(x)−1).
    pub exponent_at_point: f64,
    /// Levels in strictly decreasing radius order.
    pub levels: Vec<WienerLevel>,
    /// Running totals: of the terms (sum variant) or of the weighted
    /// quadrature contributions (integral variant).  Nondecreasing.
    pub partial_sums: Vec<f64>,
    /// Final total; equals the last partial sum (0 when there are no levels).
    pub total: f64,
    /// Quadrature value of the integral variant; `None` for the sum variant.
    pub quadrature_value: Option<f64>,
    /// Radius below which the grid cannot resolve the condensers; nothing is
    /// claimed about scales finer than this.
    pub truncation_radius: f64,
    /// Tail-decay verdict at the default thresholds.
    pub classification: Thinness,
    /// Set when the report is too short to classify.
    pub warning: Option<String>,
    /// Statement of the zero-denominator scoring rule used per level.
    pub convention: &'static str,
}

/// Thresholds for [`classify_terms`]; defaults separate a geometric decay
/// from a bounded-below tail decisively.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ClassifyThresholds {
    /// Fitted geometric ratio of the tail must be ≤ this for THIN.
    pub decay_ratio: f64,
    /// Last term must be ≤ this for THIN.
    pub tail_term: f64,
    /// Every tail term must be ≥ this for THICK.
    pub thick_floor: f64,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        ClassifyThresholds { decay_ratio: 0.9, tail_term: 0.1, thick_floor: 0.2 }
    }
}

/// Scores one level from its two capacities: the ratio is clamped to [0,1]
/// and raised to `exponent`; a zero denominator scores 1 by convention (the
/// flag reports that the convention fired).
pub fn level_term(numerator: f64, denominator: f64, exponent: f64) -> (f64, bool) {
    if denominator <= 0.0 {
        return (1.0, true);
    }
    if numerator <= 0.0 {
        return (0.0, false);
    }
    let ratio = (numerator / denominator).min(1.0);
    (ratio.powf(exponent), false)
}

/// Classifies a term sequence by the decay of its tail (the last
/// `max(⌈n/2⌉, 3)` terms).
///
/// THIN: the least-squares geometric fit of the tail has ratio ≤
/// `decay_ratio` and the last term is ≤ `tail_term`.  A tail ending in 0 is
/// maximally decaying (fit ratio taken as 0); a zero strictly inside the
/// tail makes the fit undefined (ratio taken as ∞, never THIN).
/// THICK: every tail term is ≥ `thick_floor`.
/// Anything else — and any sequence shorter than 4 — is INCONCLUSIVE; the
/// boolean is true when the sequence was too short to judge.
///
/// The tail window never shrinks below 3 terms: two points always fit a
/// geometric decay exactly, so a 2-term tail could not reject oscillation.
pub fn classify_terms(terms: &[f64], th: &ClassifyThresholds) -> (Thinness, bool) {
    let n = terms.len();
    if n < 4 {
        return (Thinness::Inconclusive, true);
    }
    (classify_tail(&terms[n - tail_window(n)..], th), false)
}

/// Number of trailing terms the classifier looks at for a sequence of `n`.
pub(crate) fn tail_window(n: usize) -> usize {
    n.div_ceil(2).max(3)
}

/// Classifies a slice that is already exactly the tail window.
pub(crate) fn classify_tail(tail: &[f64], th: &ClassifyThresholds) -> Thinness {
    let last = *tail.last().expect("tail window is never empty");

    let ratio = if last <= 0.0 {
        0.0
    } else if tail.iter().any(|&t| t <= 0.0) {
        f64::INFINITY
    } else {
        let m = tail.len() as f64;
        let xbar = (m - 1.0) / 2.0;
        let ybar = tail.iter().map(|t| t.ln()).sum::<f64>() / m;
        let mut num = 0.0;
        let mut den = 0.0;
        for (j, t) in tail.iter().enumerate() {
            let dx = j as f64 - xbar;
            num += dx * (t.ln() - ybar);
            den += dx * dx;
        }
        (num / den).exp()
    };

    if ratio <= th.decay_ratio && last <= th.tail_term {
        Thinness::Thin
    } else if tail.iter().all(|&t| t >= th.thick_floor) {
        Thinness::Thick
    } else {
        Thinness::Inconclusive
    }
}

/// Re-classifies a report's term sequence at the default thresholds.
pub fn classify_thinness(report: &WienerReport) -> Thinness {
    classify_with(report, &ClassifyThresholds::default())
}

/// Re-classifies a report's term sequence at custom thresholds.  Pure in the
/// terms; ignores radii and weights.
pub fn classify_with(report: &WienerReport, th: &ClassifyThresholds) -> Thinness {
    let terms: Vec<f64> = report.levels.iter().map(|l| l.term).collect();
    classify_terms(&terms, th).0
}

/// Largest dyadic level budget the grid can resolve: the deepest level's
/// outer ball `B(x, 2^{1−iMax})` must span at least four cells of the
/// coarsest axis.  `None` when even level 0 is unresolvable.
pub fn max_feasible_levels<T: Scalar>(grid: &Grid<T>) -> Option<u32> {
    let four_h = 4.0 * grid.h_min_max().1.as_f64();
    if 2.0 < four_h {
        return None;
    }
    let mut k = 0u32;
    // 2^{-k} is the outer radius 2^{1-(k+1)} of level k+1.
    while f64::exp2(-f64::from(k)) >= four_h {
        k += 1;
    }
    Some(k)
}

fn check_inputs<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<(usize, f64)> {
    if e.grid() != p.grid() || e.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    let node = e.grid().node_at(x)?;
    let p_x = p.field().get(node).as_f64();
    Ok((node, p_x))
}

/// Solves the two condensers at inner radius `r` and scores the level.
pub(crate) fn level_at_radius<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    r: f64,
    exponent: f64,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<(f64, f64, f64, bool)> {
    let grid = e.grid();
    let ball = rasterize_ball(x, T::of(r), grid)?;
    let outer = rasterize_ball(x, T::of(2.0 * r), grid)?;
    let den = cache.minimize(&ball, &outer, p, w, opts)?.value.as_f64();
    let clipped = e.intersection(&ball)?;
    let num = if clipped.is_empty() {
        0.0
    } else {
        cache.minimize(&clipped, &outer, p, w, opts)?.value.as_f64()
    };
    let (term, zero_den) = level_term(num, den, exponent);
    Ok((num, den, term, zero_den))
}

fn assemble<T: Scalar>(
    kind: &'static str,
    grid: &Grid<T>,
    node: usize,
    p_x: f64,
    levels: Vec<WienerLevel>,
    partial_sums: Vec<f64>,
    quadrature_value: Option<f64>,
    truncation_radius: f64,
) -> WienerReport {
    let terms: Vec<f64> = levels.iter().map(|l| l.term).collect();
    let (classification, short) = classify_terms(&terms, &ClassifyThresholds::default());
    let warning = short.then(|| {
        format!("only {} levels; at least 4 are needed to classify", levels.len())
    });
    let point = grid.coords(node)[..grid.dim()].iter().map(|c| c.as_f64()).collect();
    let total = partial_sums.last().copied().unwrap_or(0.0);
    WienerReport {
        kind,
        point,
        exponent_at_point: p_x,
        levels,
        partial_sums,
        total,
        quadrature_value,
        truncation_radius,
        classification,
        warning,
        convention: ZERO_REFERENCE_CONVENTION,
    }
}

/// Dyadic Wiener sum of `E` at the node `x`: levels `i = 0..=iMax` probe the
/// condensers `(E ∩ B(x, 2⁻ⁱ), B(x, 2^{1−i}))` and the terms accumulate into
/// partial sums.  A level whose clipped set is empty scores 0 without
/// solving.
///
/// Requires the deepest outer ball to span at least four cells:
/// `2^{1−iMax} ≥ 4h`.
pub fn wiener_sum<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    i_max: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<WienerReport> {
    let (node, p_x) = check_inputs(e, x, p, w)?;
    let exponent = 1.0 / (p_x - 1.0);
    let four_h = 4.0 * e.grid().h_min_max().1.as_f64();
    if f64::exp2(1.0 - f64::from(i_max)) < four_h {
        return Err(Error::Precondition(format!(
            "level budget too deep for the grid: outer radius 2^(1-{}) = {:.3e} is below \
             four cells 4h = {:.3e}; max feasible iMax here is {}",
            i_max,
            f64::exp2(1.0 - f64::from(i_max)),
            four_h,
            max_feasible_levels(e.grid())
                .map_or_else(|| "none".to_string(), |k| k.to_string()),
        )));
    }

    let mut levels = Vec::with_capacity(i_max as usize + 1);
    let mut partial_sums = Vec::with_capacity(i_max as usize + 1);
    let mut running = 0.0;
    for i in 0..=i_max {
        let r = f64::exp2(-f64::from(i));
        let (num, den, term, zero_den) = level_at_radius(e, x, r, exponent, p, w, opts, cache)?;
        running += term;
        levels.push(WienerLevel {
            index: i,
            radius: r,
            numerator: num,
            denominator: den,
            term,
            zero_denominator: zero_den,
        });
        partial_sums.push(running);
    }
    Ok(assemble(
        "sum",
        e.grid(),
        node,
        p_x,
        levels,
        partial_sums,
        None,
        f64::exp2(-f64::from(i_max)),
    ))
}

/// Quadrature Wiener integral of `E` at the node `x`: the condenser ratio
/// term, as a function of `r`, integrated against `dr/r` over `[4h, 1]` by a
/// log-spaced midpoint rule with `nodes_per_octave` nodes per factor of 2.
///
/// The report's levels hold the quadrature nodes in decreasing radius order;
/// partial sums accumulate the weighted contributions, so the last one is
/// the quadrature value.
pub fn wiener_integral<T: Scalar>(
    e: &GridSet<T>,
    x: &[T],
    p: &ExponentField<T>,
    w: &WeightField<T>,
    nodes_per_octave: u32,
    opts: &SolverOptions,
    cache: &CapacityCache<T>,
) -> Result<WienerReport> {
    if nodes_per_octave < 1 {
        return Err(Error::Precondition("nodes_per_octave must be ≥ 1".into()));
    }
    let (node, p_x) = check_inputs(e, x, p, w)?;
    let exponent = 1.0 / (p_x - 1.0);
    let four_h = 4.0 * e.grid().h_min_max().1.as_f64();
    if four_h >= 1.0 {
        return Err(Error::Precondition(format!(
            "resolution guard: 4h = {four_h:.3e} ≥ 1, the radius range [4h, 1] is empty"
        )));
    }

    let span = -four_h.ln();
    let octaves = span / std::f64::consts::LN_2;
    let m = (octaves * f64::from(nodes_per_octave)).ceil() as usize;
    let delta = span / m as f64;

    let mut levels = Vec::with_capacity(m);
    let mut partial_sums = Vec::with_capacity(m);
    let mut running = 0.0;
    for k in 0..m {
        let r = (-(k as f64 + 0.5) * delta).exp();
        let (num, den, term, zero_den) = level_at_radius(e, x, r, exponent, p, w, opts, cache)?;
        running += term * delta;
        levels.push(WienerLevel {
            index: k as u32,
            radius: r,
            numerator: num,
            denominator: den,
            term,
            zero_denominator: zero_den,
        });
        partial_sums.push(running);
    }
    Ok(assemble("integral", e.grid(), node, p_x, levels, partial_sums, Some(running), four_h))
}
