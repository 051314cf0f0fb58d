//! Weighted variable-exponent modulars, Luxemburg/Sobolev norms, and the
//! admissibility and Poincaré diagnostics.
//!
//! All nodal quadratures in this module use tensor trapezoid weights
//! `w(v) = Π_a h_a · (1/2 at axis endpoints, else 1)`, so that e.g. the mass
//! of the constant 1 over `[0,1]` is exactly 1. Gradients are forward
//! differences; axes without an in-grid forward neighbor contribute zero.

use serde::Serialize;

use crate::fieldexpr::{self, Expr};
use crate::grid::{Grid, GridSet, ScalarField};
use crate::scalar::Scalar;
use crate::{Error, Result};

/// `b^p` for `b ≥ 0` with fast paths for the common exponents.
pub(crate) fn powp<T: Scalar>(b: T, p: T) -> T {
    if p == T::of(2.0) {
        b * b
    } else if p == T::of(3.0) {
        b * b * b
    } else if p == T::of(1.5) {
        b * b.sqrt()
    } else if p == T::of(4.0) {
        let b2 = b * b;
        b2 * b2
    } else {
        b.powf(p)
    }
}

/// Trapezoid quadrature weight of one node (product over active axes).
pub fn node_weight<T: Scalar>(grid: &Grid<T>, id: usize) -> T {
    let idx = grid.unindex(id);
    let mut w = T::one();
    let half = T::of(0.5);
    for a in 0..grid.dim() {
        let mut wa = grid.h(a);
        if idx[a] == 0 || idx[a] + 1 == grid.n(a) {
            wa = wa * half;
        }
        w = w * wa;
    }
    w
}

/// Forward-difference gradient magnitude as a nodal field.
pub fn forward_gradient_magnitude<T: Scalar>(f: &ScalarField<T>) -> ScalarField<T> {
    let grid = *f.grid();
    let mut out = Vec::with_capacity(grid.node_count());
    for id in 0..grid.node_count() {
        let idx = grid.unindex(id);
        let mut s = T::zero();
        for a in 0..grid.dim() {
            if idx[a] + 1 < grid.n(a) {
                let mut nb = idx;
                nb[a] += 1;
                let d = (f.get(grid.index(nb)) - f.get(id)) / grid.h(a);
                s = s + d * d;
            }
        }
        out.push(s.sqrt());
    }
    ScalarField::new(grid, out).expect("gradient of a finite field is finite")
}

/// Variable exponent p(·) with its actual nodal bounds.
#[derive(Clone, Debug)]
pub struct ExponentField<T: Scalar> {
    field: ScalarField<T>,
    p_minus: T,
    p_plus: T,
}

impl<T: Scalar> ExponentField<T> {
    /// Wraps a nodal exponent field; the bounds are computed, not asserted,
    /// so that `admissibility_check` can report on out-of-range exponents.
    pub fn new(field: ScalarField<T>) -> Self {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &v in field.values() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        ExponentField { field, p_minus: lo, p_plus: hi }
    }

    pub fn constant(grid: Grid<T>, p0: T) -> Result<Self> {
        Ok(Self::new(ScalarField::constant(grid, p0)?))
    }

    pub fn from_expr(grid: Grid<T>, text: &str) -> Result<Self> {
        let e: Expr = fieldexpr::parse_expr(text)?;
        Ok(Self::new(fieldexpr::eval_field(&e, &grid)?))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    /// Smallest nodal exponent.
    pub fn p_minus(&self) -> T {
        self.p_minus
    }

    /// Largest nodal exponent.
    pub fn p_plus(&self) -> T {
        self.p_plus
    }

    /// True when the exponent is the same at every node.
    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }
}

/// Weight ϑ(·) defining the measure μ_ϑ.
#[derive(Clone, Debug)]
pub struct WeightField<T: Scalar> {
    field: ScalarField<T>,
}

impl<T: Scalar> WeightField<T> {
    /// Wraps a nodal weight field; positivity is checked by
    /// `admissibility_check`, not here, so defective weights can be reported.
    pub fn new(field: ScalarField<T>) -> Self {
        WeightField { field }
    }

    pub fn constant(grid: Grid<T>, w0: T) -> Result<Self> {
        Ok(Self::new(ScalarField::constant(grid, w0)?))
    }

    pub fn from_expr(grid: Grid<T>, text: &str) -> Result<Self> {
        let e: Expr = fieldexpr::parse_expr(text)?;
        Ok(Self::new(fieldexpr::eval_field(&e, &grid)?))
    }

    pub fn field(&self) -> &ScalarField<T> {
        &self.field
    }

    pub fn grid(&self) -> &Grid<T> {
        self.field.grid()
    }

    /// μ_ϑ(S): weighted trapezoid mass of the set.
    pub fn measure(&self, s: &GridSet<T>) -> Result<T> {
        if s.grid() != self.grid() {
            return Err(Error::GridMismatch);
        }
        let grid = self.grid();
        let mut m = T::zero();
        for id in 0..grid.node_count() {
            if s.contains(id) {
                m = m + self.field.get(id) * node_weight(grid, id);
            }
        }
        Ok(m)
    }
}

fn check_same_grid<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<()> {
    if f.grid() != p.grid() || f.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn modular_scaled<T: Scalar>(
    f: &ScalarField<T>,
    inv_lambda: T,
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> T {
    let grid = f.grid();
    let mut s = T::zero();
    for id in 0..grid.node_count() {
        let v = (f.get(id) * inv_lambda).abs();
        if v != T::zero() {
            s = s + powp(v, p.field.get(id)) * w.field.get(id) * node_weight(grid, id);
        }
    }
    s
}

/// Weighted modular Σ |f(x)|^{p(x)} ϑ(x) w(x).
pub fn modular<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<T> {
    check_same_grid(f, p, w)?;
    Ok(modular_scaled(f, T::one(), p, w))
}

/// Luxemburg norm inf{λ > 0 : modular(f/λ) ≤ 1} by bracketing + bisection.
pub fn luxemburg_norm<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<T> {
    check_same_grid(f, p, w)?;
    let m = f.max_abs();
    if m == T::zero() {
        return Ok(T::zero());
    }
    let total_mass = {
        let grid = f.grid();
        let mut s = T::zero();
        for id in 0..grid.node_count() {
            s = s + w.field.get(id) * node_weight(grid, id);
        }
        s
    };
    let mut lo = T::of(1e-12);
    let mut hi = m * (total_mass + T::one());
    // guarantee modular(f/hi) ≤ 1 by geometric expansion
    let mut guard = 0;
    while modular_scaled(f, T::one() / hi, p, w) > T::one() {
        hi = hi * T::of(2.0);
        guard += 1;
        if guard > 4096 {
            return Err(Error::NonFinite("Luxemburg bracketing did not close".into()));
        }
    }
    if modular_scaled(f, T::one() / lo, p, w) <= T::one() {
        return Ok(lo); // the norm is below the bracket floor; report the floor
    }
    // invariant: modular(f/lo) > 1 ≥ modular(f/hi)
    for _ in 0..200 {
        if (hi - lo) <= T::of(1e-12) * hi {
            break;
        }
        let mid = (lo + hi) * T::of(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if modular_scaled(f, T::one() / mid, p, w) > T::one() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// First-order Sobolev norm: ‖f‖ + ‖ |∇f| ‖ (forward differences).
pub fn sobolev_norm<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<T> {
    check_same_grid(f, p, w)?;
    let g = forward_gradient_magnitude(f);
    Ok(luxemburg_norm(f, p, w)? + luxemburg_norm(&g, p, w)?)
}

/// Standing-assumption diagnostics for a (p, ϑ) pair.
#[derive(Clone, Debug, Serialize)]
pub struct AdmissibilityReport {
    /// Smallest nodal exponent.
    pub p_minus: f64,
    /// Largest nodal exponent.
    pub p_plus: f64,
    /// Smallest nodal weight value.
    pub theta_min: f64,
    /// Σ ϑ^{-1/(p-1)} w over the grid; `None` when undefined (p ≤ 1 somewhere)
    /// or non-finite.
    pub weight_integrability_sum: Option<f64>,
    /// True iff no failure was recorded.
    pub pass: bool,
    pub failures: Vec<String>,
}

/// Checks 1 < p⁻ ≤ p⁺ < ∞, ϑ > 0, and summability of ϑ^{-1/(p-1)}.
pub fn admissibility_check<T: Scalar>(
    p: &ExponentField<T>,
    w: &WeightField<T>,
) -> Result<AdmissibilityReport> {
    if p.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = p.grid();
    let mut failures = Vec::new();

    let mut theta_min = T::infinity();
    let mut theta_argmin = 0usize;
    for id in 0..grid.node_count() {
        let v = w.field.get(id);
        if v < theta_min {
            theta_min = v;
            theta_argmin = id;
        }
    }
    if p.p_minus() <= T::one() {
        failures.push(format!(
            "p⁻ ≤ 1: smallest nodal exponent is {}",
            p.p_minus().as_f64()
        ));
    }
    if theta_min <= T::zero() {
        failures.push(format!(
            "ϑ not positive at node {theta_argmin}: value {}",
            theta_min.as_f64()
        ));
    }

    let weight_integrability_sum = if p.p_minus() > T::one() {
        let mut s = T::zero();
        for id in 0..grid.node_count() {
            let th = w.field.get(id);
            let expo = -T::one() / (p.field.get(id) - T::one());
            let term = if th > T::zero() {
                (expo * th.ln()).exp()
            } else {
                T::infinity()
            };
            s = s + term * node_weight(grid, id);
        }
        if s.is_finite() {
            Some(s.as_f64())
        } else {
            failures.push("ϑ^{-1/(p-1)} is not summable over the grid".into());
            None
        }
    } else {
        None
    };

    Ok(AdmissibilityReport {
        p_minus: p.p_minus().as_f64(),
        p_plus: p.p_plus().as_f64(),
        theta_min: theta_min.as_f64(),
        weight_integrability_sum,
        pass: failures.is_empty(),
        failures,
    })
}

/// Outcome of the weighted 1-Poincaré ratio test.
#[derive(Clone, Debug, Serialize)]
pub struct PoincareReport {
    /// Σ_Ω |f| ϑ w divided by diam(Ω) · Σ_Ω |∇f| ϑ w.
    pub ratio: f64,
    /// ratio ≤ c.
    pub holds: bool,
    /// Set when the comparison is degenerate (zero gradient mass).
    pub note: Option<String>,
}

/// Evaluates the inequality Σ_Ω |f| ϑ ≤ c · diam(Ω) · Σ_Ω |∇f| ϑ.
pub fn poincare_check<T: Scalar>(
    f: &ScalarField<T>,
    w: &WeightField<T>,
    omega: &GridSet<T>,
    c: f64,
) -> Result<PoincareReport> {
    if f.grid() != w.grid() || f.grid() != omega.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = f.grid();
    for id in 0..grid.node_count() {
        if !omega.contains(id) && f.get(id) != T::zero() {
            return Err(Error::Precondition(format!(
                "function is nonzero outside the region at node {id}"
            )));
        }
    }
    let g = forward_gradient_magnitude(f);
    let mut num = T::zero();
    let mut grad_mass = T::zero();
    for id in 0..grid.node_count() {
        if omega.contains(id) {
            let ww = w.field.get(id) * node_weight(grid, id);
            num = num + f.get(id).abs() * ww;
            grad_mass = grad_mass + g.get(id) * ww;
        }
    }
    let den = omega.diameter() * grad_mass;
    if den == T::zero() {
        if num == T::zero() {
            return Ok(PoincareReport { ratio: 0.0, holds: true, note: None });
        }
        return Ok(PoincareReport {
            ratio: f64::INFINITY,
            holds: false,
            note: Some("inequality vacuous/violated: zero gradient mass with nonzero left side".into()),
        });
    }
    let ratio = (num / den).as_f64();
    Ok(PoincareReport { ratio, holds: ratio <= c, note: None })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_interval(n: usize) -> Grid<f64> {
        Grid::new(1, &[(0.0, 1.0)], &[n]).unwrap()
    }

    fn p_const(g: Grid<f64>, p0: f64) -> ExponentField<f64> {
        ExponentField::constant(g, p0).unwrap()
    }

    fn w_const(g: Grid<f64>, w0: f64) -> WeightField<f64> {
        WeightField::constant(g, w0).unwrap()
    }

    #[test]
    fn modular_reference_values() {
        let g = unit_interval(257);
        let p = p_const(g, 2.0);
        let w = w_const(g, 1.0);
        assert_eq!(modular(&ScalarField::zeros(g), &p, &w).unwrap(), 0.0);
        let one = ScalarField::constant(g, 1.0).unwrap();
        assert!((modular(&one, &p, &w).unwrap() - 1.0).abs() <= 1e-12);
        let two = ScalarField::constant(g, 2.0).unwrap();
        let p3 = p_const(g, 3.0);
        assert!((modular(&two, &p3, &w).unwrap() - 8.0).abs() <= 1e-12);
    }

    #[test]
    fn modular_rejects_grid_mismatch() {
        let g = unit_interval(17);
        let g2 = unit_interval(33);
        let err = modular(&ScalarField::zeros(g), &p_const(g2, 2.0), &w_const(g2, 1.0));
        assert!(matches!(err, Err(Error::GridMismatch)));
    }

    #[test]
    fn luxemburg_matches_constant_exponent_identity() {
        let g = unit_interval(65);
        let w = w_const(g, 1.0);
        let f = ScalarField::from_fn(g, |x| x[0]).unwrap();
        for p0 in [1.5, 2.0, 3.0] {
            let p = p_const(g, p0);
            let m = modular(&f, &p, &w).unwrap();
            let expected = m.powf(1.0 / p0);
            let got = luxemburg_norm(&f, &p, &w).unwrap();
            assert!(
                (got - expected).abs() <= 1e-6 * (1.0 + expected),
                "p = {p0}: {got} vs {expected}"
            );
        }
    }

    #[test]
    fn luxemburg_is_homogeneous() {
        let g = Grid::<f64>::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[33, 33]).unwrap();
        let p = ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap();
        let w = WeightField::from_expr(g, "1 + rho^2").unwrap();
        let f = ScalarField::from_fn(g, |x| x[0] - x[1] * x[1]).unwrap();
        let base = luxemburg_norm(&f, &p, &w).unwrap();
        let scaled_field = ScalarField::from_fn(g, |x| 3.5 * (x[0] - x[1] * x[1])).unwrap();
        let scaled = luxemburg_norm(&scaled_field, &p, &w).unwrap();
        assert!((scaled - 3.5 * base).abs() <= 1e-9 * (1.0 + 3.5 * base));
        assert_eq!(luxemburg_norm(&ScalarField::zeros(g), &p, &w).unwrap(), 0.0);
    }

    #[test]
    fn luxemburg_unit_ball_property() {
        let g = Grid::<f64>::new(2, &[(-1.0, 1.0), (-1.0, 1.0)], &[33, 33]).unwrap();
        let p = ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap();
        let w = WeightField::from_expr(g, "1 + rho^2").unwrap();
        for f in [
            ScalarField::from_fn(g, |x| x[0]).unwrap(),
            ScalarField::from_fn(g, |x| (x[0] * 3.0).sin() + 0.2).unwrap(),
            ScalarField::constant(g, 41.0).unwrap(),
        ] {
            let lam = luxemburg_norm(&f, &p, &w).unwrap();
            assert!(lam > 0.0);
            let fs = ScalarField::new(g, f.values().iter().map(|v| v / lam).collect()).unwrap();
            let m = modular(&fs, &p, &w).unwrap();
            assert!((m - 1.0).abs() <= 1e-6, "modular at the norm: {m}");
        }
    }

    #[test]
    fn modular_and_norm_are_monotone() {
        let g = Grid::<f64>::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[17, 17]).unwrap();
        let p = ExponentField::from_expr(g, "2 + 0.5*sin(x1)").unwrap();
        let w = WeightField::from_expr(g, "1 + rho^2").unwrap();
        let big = ScalarField::from_fn(g, |x| (x[0] + 0.3).sin() + 1.1).unwrap();
        let small = ScalarField::new(g, big.values().iter().map(|v| 0.5 * v).collect()).unwrap();
        assert!(modular(&small, &p, &w).unwrap() <= modular(&big, &p, &w).unwrap());
        let ns = luxemburg_norm(&small, &p, &w).unwrap();
        let nb = luxemburg_norm(&big, &p, &w).unwrap();
        assert!(ns <= nb + 1e-9);
    }

    #[test]
    fn sobolev_norm_reference_values() {
        let g = unit_interval(257);
        let h: f64 = 1.0 / 256.0;
        let p = p_const(g, 2.0);
        let w = w_const(g, 1.0);
        let c = ScalarField::constant(g, 0.7).unwrap();
        assert_eq!(
            sobolev_norm(&c, &p, &w).unwrap(),
            luxemburg_norm(&c, &p, &w).unwrap()
        );
        let f = ScalarField::from_fn(g, |x| x[0]).unwrap();
        let got = sobolev_norm(&f, &p, &w).unwrap();
        let expected = (1.0 / 3.0 + h * h / 6.0).sqrt() + (1.0 - h / 2.0).sqrt();
        assert!((got - expected).abs() <= 1e-9, "{got} vs {expected}");
        let continuum = 1.0 / 3.0f64.sqrt() + 1.0;
        assert!((got - continuum).abs() <= 0.02 * continuum);
    }

    #[test]
    fn admissibility_passes_for_clean_data() {
        let g = Grid::<f64>::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[17, 17]).unwrap();
        let rep = admissibility_check(&p_const(g, 2.0), &w_const(g, 1.0)).unwrap();
        assert!(rep.pass, "{:?}", rep.failures);
        assert_eq!(rep.p_minus, 2.0);
        assert_eq!(rep.p_plus, 2.0);
        assert_eq!(rep.theta_min, 1.0);
        let s = rep.weight_integrability_sum.unwrap();
        assert!((s - 1.0).abs() <= 1e-12, "ϑ ≡ 1 sums to unit mass, got {s}");
    }

    #[test]
    fn admissibility_flags_exponent_at_one() {
        let g = unit_interval(17);
        // p dips to exactly 1.0 at the left endpoint
        let p = ExponentField::from_expr(g, "1 + x1").unwrap();
        let rep = admissibility_check(&p, &w_const(g, 1.0)).unwrap();
        assert!(!rep.pass);
        assert!(rep.failures.iter().any(|m| m.contains("≤ 1")), "{:?}", rep.failures);
        assert!(rep.weight_integrability_sum.is_none());
    }

    #[test]
    fn admissibility_flags_vanishing_weight() {
        let g = Grid::<f64>::new(2, &[(-1.0, 1.0), (-1.0, 1.0)], &[17, 17]).unwrap();
        let w = WeightField::from_expr(g, "rho^2").unwrap(); // zero at the origin node
        let rep = admissibility_check(&p_const(g, 2.0), &w).unwrap();
        assert!(!rep.pass);
        assert!(
            rep.failures.iter().any(|m| m.contains("not positive at node")),
            "{:?}",
            rep.failures
        );
    }

    #[test]
    fn measure_additivity_and_monotonicity() {
        let g = Grid::<f64>::new(2, &[(0.0, 1.0), (0.0, 1.0)], &[17, 17]).unwrap();
        let w = w_const(g, 1.0); // dyadic terms: trapezoid weights are powers of two
        let a = crate::grid::rasterize_rect(&[0.0, 0.0], &[0.5, 1.0], &g).unwrap();
        let b = crate::grid::rasterize_rect(&[0.25, 0.0], &[1.0, 0.75], &g).unwrap();
        let lhs = w.measure(&a.union(&b).unwrap()).unwrap() + w.measure(&a.intersection(&b).unwrap()).unwrap();
        let rhs = w.measure(&a).unwrap() + w.measure(&b).unwrap();
        assert_eq!(lhs, rhs, "dyadic additivity must be bit-exact");
        assert!(w.measure(&a.intersection(&b).unwrap()).unwrap() <= w.measure(&a).unwrap());

        // general weights: additivity to floating accumulation error
        let w2 = WeightField::from_expr(g, "1 + rho^2").unwrap();
        let lhs2 = w2.measure(&a.union(&b).unwrap()).unwrap()
            + w2.measure(&a.intersection(&b).unwrap()).unwrap();
        let rhs2 = w2.measure(&a).unwrap() + w2.measure(&b).unwrap();
        assert!((lhs2 - rhs2).abs() <= 1e-12 * (1.0 + rhs2.abs()));
    }

    #[test]
    fn poincare_tent_reference_ratio() {
        let g = unit_interval(257);
        let w = w_const(g, 1.0);
        let omega = GridSet::full(g);
        // tent with peak 1 at 0.5, supported on [1/4, 3/4]
        let tent = ScalarField::from_fn(g, |x| (1.0 - 4.0 * (x[0] - 0.5).abs()).max(0.0)).unwrap();
        let rep = poincare_check(&tent, &w, &omega, 0.2).unwrap();
        assert!((rep.ratio - 0.125).abs() < 1e-13, "ratio {}", rep.ratio);
        assert!(rep.holds);
        let tight = poincare_check(&tent, &w, &omega, 0.1).unwrap();
        assert!(!tight.holds);
    }

    #[test]
    fn poincare_degenerate_cases() {
        let g = unit_interval(33);
        let w = w_const(g, 1.0);
        let omega = GridSet::full(g);
        let zero = poincare_check(&ScalarField::zeros(g), &w, &omega, 1.0).unwrap();
        assert_eq!(zero.ratio, 0.0);
        assert!(zero.holds);
        // constant nonzero: zero gradient mass
        let c = ScalarField::constant(g, 1.0).unwrap();
        let rep = poincare_check(&c, &w, &omega, 1.0).unwrap();
        assert!(!rep.holds);
        assert!(rep.ratio.is_infinite());
        assert!(rep.note.is_some());
        // support violation
        let half = crate::grid::rasterize_rect(&[0.0], &[0.5], &g).unwrap();
        assert!(matches!(
            poincare_check(&c, &w, &half, 1.0),
            Err(Error::Precondition(_))
        ));
    }
}
