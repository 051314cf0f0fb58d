//! Weighted variable-exponent Dirichlet energy, its constrained minimization
//! (relative capacity of a compact set inside an open set), and PDE-side
//! diagnostics: equation residual, supersolution pairing, comparison
//! principle.
//!
//! Discretization: the energy is a sum over *cells*. A cell is a node whose
//! forward neighbor exists along every active axis; the gradient on a cell is
//! the vector of forward differences, and the exponent and weight are taken
//! at the cell's base node:
//!
//! ```text
//! E(f) = Σ_cells |∇f(cell)|^{p(base)} ϑ(base) h¹·h²·h³
//! ```

use std::collections::HashMap;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::grid::{Grid, GridSet, ScalarField, Window, MAX_DIM};
use crate::scalar::Scalar;
use crate::spaces::{admissibility_check, ExponentField, WeightField};
use crate::{Error, Result};

/// Step-size policy for the projected descent solver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StepRule {
    /// Constant step (the conservative initial estimate), projection only.
    Fixed,
    /// Barzilai–Borwein initial step with nonmonotone backtracking.
    BacktrackingWithSpectralInitial,
}

/// Options for the constrained energy minimization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    /// Hard iteration bound (≥ 1).
    pub max_iters: usize,
    /// Energy-stagnation threshold: converged after 10 consecutive
    /// iterations whose relative energy change is below this (> 0).
    pub rel_energy_tol: f64,
    pub step_rule: StepRule,
    /// Nodal box constraint; capacity solves use the canonical [0, 1].
    pub projection_box: (f64, f64),
    /// Optional: keep iterating past stagnation until the interior
    /// (complementarity-inactive) residual falls below this value.
    pub residual_tol: Option<f64>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 20_000,
            rel_energy_tol: 1e-8,
            step_rule: StepRule::BacktrackingWithSpectralInitial,
            projection_box: (0.0, 1.0),
            residual_tol: None,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Precondition("max_iters must be at least 1".into()));
        }
        if !(self.rel_energy_tol > 0.0) {
            return Err(Error::Precondition("rel_energy_tol must be positive".into()));
        }
        if !(self.projection_box.0 <= self.projection_box.1) {
            return Err(Error::Precondition("projection box is reversed".into()));
        }
        Ok(())
    }

    fn content_hash(&self, h: &mut impl Hasher) {
        self.max_iters.hash(h);
        self.rel_energy_tol.to_bits().hash(h);
        self.step_rule.hash(h);
        self.projection_box.0.to_bits().hash(h);
        self.projection_box.1.to_bits().hash(h);
        match self.residual_tol {
            None => 0u8.hash(h),
            Some(t) => {
                1u8.hash(h);
                t.to_bits().hash(h);
            }
        }
    }
}

/// Outcome of a capacity minimization.
#[derive(Clone, Debug)]
pub struct CapacityResult<T: Scalar> {
    /// The capacity: the energy of the minimizer (recomputed at return;
    /// values below 10⁻¹⁴ are reported as exactly 0).
    pub value: T,
    /// The optimal field: 1 on K, 0 outside Ω, in [0,1] everywhere.
    pub minimizer: ScalarField<T>,
    pub iterations: usize,
    pub converged: bool,
    /// Relative energy change at the last iteration.
    pub final_rel_change: f64,
    /// Scaled gradient residual over the complementarity-inactive interior.
    pub interior_residual: f64,
}

// ── energy kernels ───────────────────────────────────────────────────────

/// Static description of one solve's geometry, shared by the kernels.
struct Kernel<'a, T: Scalar> {
    grid: &'a Grid<T>,
    p: &'a [T],
    th: &'a [T],
    inv_h: [T; MAX_DIM],
    vol: T,
    /// number of cells per axis (n−1 on active axes, 1 on inactive)
    cells: [usize; MAX_DIM],
    stride: [usize; MAX_DIM],
}

impl<'a, T: Scalar> Kernel<'a, T> {
    fn new(grid: &'a Grid<T>, p: &'a [T], th: &'a [T]) -> Self {
        let mut inv_h = [T::one(); MAX_DIM];
        let mut cells = [1usize; MAX_DIM];
        let mut stride = [0usize; MAX_DIM];
        let mut s = 1usize;
        for a in 0..grid.dim() {
            inv_h[a] = T::one() / grid.h(a);
            cells[a] = grid.n(a) - 1;
            stride[a] = s;
            s *= grid.n(a);
        }
        Kernel { grid, p, th, inv_h, vol: grid.cell_volume(), cells, stride }
    }

    #[inline]
    fn squared_gradient(&self, f: &[T], id: usize) -> T {
        let dim = self.grid.dim();
        let mut g2 = T::zero();
        for a in 0..dim {
            let d = (f[id + self.stride[a]] - f[id]) * self.inv_h[a];
            g2 = g2 + d * d;
        }
        g2
    }

    /// Iterates over all cell base ids.
    fn for_each_cell(&self, mut body: impl FnMut(usize)) {
        let n1 = self.grid.n(0);
        let c = self.cells;
        for i3 in 0..c[2] {
            for i2 in 0..c[1] {
                let row = (i3 * self.grid.n(1).max(1) + i2) * n1;
                for i1 in 0..c[0] {
                    body(row + i1);
                }
            }
        }
    }

    /// Σ_cells (g²)^{p/2} ϑ vol
    fn energy(&self, f: &[T]) -> T {
        let mut e = T::zero();
        self.for_each_cell(|id| {
            let g2 = self.squared_gradient(f, id);
            if g2 > T::zero() {
                e = e + pow_half(g2, self.p[id]) * self.th[id] * self.vol;
            }
        });
        e
    }

    /// Exact gradient of `energy` with respect to nodal values.
    fn gradient(&self, f: &[T], out: &mut [T]) {
        self.gradient_impl(f, out, None);
    }

    /// Gradient plus an optional diagonal curvature estimate (Jacobi
    /// metric): metric[v] ≈ Σ_cells∋v p (g²)^{(p−2)/2} ϑ vol / h², the
    /// dominant diagonal of the energy Hessian.  Costs no extra powf — the
    /// cell coefficient is shared with the gradient.
    fn gradient_impl(&self, f: &[T], out: &mut [T], mut metric: Option<&mut [T]>) {
        for v in out.iter_mut() {
            *v = T::zero();
        }
        if let Some(m) = metric.as_deref_mut() {
            for v in m.iter_mut() {
                *v = T::zero();
            }
        }
        let dim = self.grid.dim();
        self.for_each_cell(|id| {
            let g2 = self.squared_gradient(f, id);
            if g2 > T::zero() {
                // ∂(g²)^{p/2}/∂d_a = p (g²)^{(p−2)/2} d_a
                let coef = self.p[id] * pow_half_minus_one(g2, self.p[id]) * self.th[id] * self.vol;
                for a in 0..dim {
                    let d = (f[id + self.stride[a]] - f[id]) * self.inv_h[a];
                    let c = coef * d * self.inv_h[a];
                    out[id] = out[id] - c;
                    out[id + self.stride[a]] = out[id + self.stride[a]] + c;
                }
                if let Some(m) = metric.as_deref_mut() {
                    let mut h2_sum = T::zero();
                    for a in 0..dim {
                        let w = coef * self.inv_h[a] * self.inv_h[a];
                        h2_sum = h2_sum + w;
                        m[id + self.stride[a]] = m[id + self.stride[a]] + w;
                    }
                    m[id] = m[id] + h2_sum;
                }
            }
        });
    }

    /// Σ_cells ϑ |∇f|^{p−2} ∇f·∇g vol (the weak-form pairing, no p factor).
    fn pairing(&self, f: &[T], g: &[T]) -> (T, T) {
        let dim = self.grid.dim();
        let mut total = T::zero();
        let mut abs_mass = T::zero();
        self.for_each_cell(|id| {
            let g2 = self.squared_gradient(f, id);
            if g2 > T::zero() {
                let coef = pow_half_minus_one(g2, self.p[id]) * self.th[id] * self.vol;
                let mut dot = T::zero();
                for a in 0..dim {
                    let df = (f[id + self.stride[a]] - f[id]) * self.inv_h[a];
                    let dg = (g[id + self.stride[a]] - g[id]) * self.inv_h[a];
                    dot = dot + df * dg;
                }
                let c = coef * dot;
                total = total + c;
                abs_mass = abs_mass + c.abs();
            }
        });
        (total, abs_mass)
    }
}

/// (g²)^{p/2} for g² > 0, with fast paths for common exponents.
#[inline]
fn pow_half<T: Scalar>(g2: T, p: T) -> T {
    if p == T::of(2.0) {
        g2
    } else if p == T::of(3.0) {
        g2 * g2.sqrt()
    } else if p == T::of(4.0) {
        g2 * g2
    } else if p == T::of(1.5) {
        // (g²)^{3/4}
        (g2 * g2 * g2).sqrt().sqrt()
    } else {
        g2.powf(p * T::of(0.5))
    }
}

/// (g²)^{(p−2)/2} for g² > 0.
#[inline]
fn pow_half_minus_one<T: Scalar>(g2: T, p: T) -> T {
    if p == T::of(2.0) {
        T::one()
    } else if p == T::of(3.0) {
        g2.sqrt()
    } else if p == T::of(4.0) {
        g2
    } else if p == T::of(1.5) {
        // (g²)^{−1/4}
        T::one() / g2.sqrt().sqrt()
    } else {
        g2.powf((p - T::of(2.0)) * T::of(0.5))
    }
}

fn check_support<T: Scalar>(f: &ScalarField<T>, omega: &GridSet<T>) -> Result<()> {
    for id in 0..f.grid().node_count() {
        if !omega.contains(id) && f.get(id) != T::zero() {
            return Err(Error::Precondition(format!(
                "function is nonzero outside the open set at node {id}"
            )));
        }
    }
    Ok(())
}

fn check_grids<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    s: &GridSet<T>,
) -> Result<()> {
    if f.grid() != p.grid() || f.grid() != w.grid() || f.grid() != s.grid() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Cell-based Dirichlet energy Σ |∇f|^{p} ϑ hᵈ of a field vanishing outside Ω.
pub fn dirichlet_energy<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    omega: &GridSet<T>,
) -> Result<T> {
    check_grids(f, p, w, omega)?;
    check_support(f, omega)?;
    let k = Kernel::new(f.grid(), p.field().values(), w.field().values());
    Ok(k.energy(f.values()))
}

/// Exact nodal gradient of the discrete energy; zero outside Ω (those nodes
/// are pinned by the support constraint).
pub fn energy_gradient<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    omega: &GridSet<T>,
) -> Result<ScalarField<T>> {
    check_grids(f, p, w, omega)?;
    check_support(f, omega)?;
    let k = Kernel::new(f.grid(), p.field().values(), w.field().values());
    let mut g = vec![T::zero(); f.grid().node_count()];
    k.gradient(f.values(), &mut g);
    for id in 0..f.grid().node_count() {
        if !omega.contains(id) {
            g[id] = T::zero();
        }
    }
    ScalarField::new(*f.grid(), g)
}

/// Max over `region` of |∂E/∂f_v| / hᵈ: the scaled residual of the discrete
/// weighted p(·)-Laplace equation. Uses the unconstrained energy; pick the
/// region to exclude constrained nodes.
pub fn ple_residual<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    region: &GridSet<T>,
) -> Result<f64> {
    if f.grid() != p.grid() || f.grid() != w.grid() || f.grid() != region.grid() {
        return Err(Error::GridMismatch);
    }
    let k = Kernel::new(f.grid(), p.field().values(), w.field().values());
    let mut g = vec![T::zero(); f.grid().node_count()];
    k.gradient(f.values(), &mut g);
    let inv_vol = T::one() / f.grid().cell_volume();
    let mut worst = T::zero();
    for id in 0..f.grid().node_count() {
        if region.contains(id) {
            worst = worst.max(g[id].abs() * inv_vol);
        }
    }
    Ok(worst.as_f64())
}

// ── constrained minimization ─────────────────────────────────────────────

/// Node roles inside one solve.
#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Free,
    FixedOne,
    FixedZero,
}

struct Subproblem<T: Scalar> {
    grid: Grid<T>,
    roles: Vec<Role>,
    init: Vec<T>,
}

/// Chebyshev-distance condenser ansatz: d(Ω^c) / (d(Ω^c) + d(K)).
fn condenser_init<T: Scalar>(k_set: &GridSet<T>, omega: &GridSet<T>, roles: &[Role]) -> Vec<T> {
    let dk = k_set.chebyshev_distance();
    let dc = omega.complement().chebyshev_distance();
    let mut init = Vec::with_capacity(roles.len());
    for id in 0..roles.len() {
        let v = match roles[id] {
            Role::FixedOne => T::one(),
            Role::FixedZero => T::zero(),
            Role::Free => {
                if dc[id] == u32::MAX {
                    T::one() // no outer boundary reachable: constants are free
                } else if dk[id] == u32::MAX {
                    T::zero()
                } else {
                    let a = T::of_usize(dc[id] as usize);
                    let b = T::of_usize(dk[id] as usize);
                    a / (a + b)
                }
            }
        };
        init.push(v);
    }
    init
}

struct SolveStats {
    iterations: usize,
    converged: bool,
    final_rel_change: f64,
    interior_residual: f64,
}

/// Projected descent on the cell energy with the given fixed roles.
fn solve_subproblem<T: Scalar>(
    sub: &Subproblem<T>,
    p: &[T],
    th: &[T],
    opts: &SolverOptions,
    residual_mask: &[bool],
) -> (Vec<T>, SolveStats) {
    let kern = Kernel::new(&sub.grid, p, th);
    let n = sub.grid.node_count();
    let (lo, hi) = (T::of(opts.projection_box.0), T::of(opts.projection_box.1));
    let tol = T::of(opts.rel_energy_tol);

    let project = |x: &mut [T]| {
        for (id, v) in x.iter_mut().enumerate() {
            match sub.roles[id] {
                Role::FixedOne => *v = T::one(),
                Role::FixedZero => *v = T::zero(),
                Role::Free => {
                    if *v < lo {
                        *v = lo;
                    } else if *v > hi {
                        *v = hi;
                    }
                }
            }
        }
    };
    let mask_fixed = |g: &mut [T]| {
        for (id, v) in g.iter_mut().enumerate() {
            if sub.roles[id] != Role::Free {
                *v = T::zero();
            }
        }
    };

    let interior_residual = |x: &[T], g: &mut [T]| -> f64 {
        kern.gradient(x, g);
        let inv_vol = T::one() / sub.grid.cell_volume();
        let mut worst = T::zero();
        for id in 0..n {
            if residual_mask[id]
                && sub.roles[id] == Role::Free
                && x[id] > lo
                && x[id] < hi
            {
                worst = worst.max(g[id].abs() * inv_vol);
            }
        }
        worst.as_f64()
    };

    let mut x = sub.init.clone();
    project(&mut x);
    // Diagonal metric: nodes sitting in stiff cells (large curvature from
    // |∇u|^{p−2} ϑ) take proportionally shorter steps, nodes in soft cells
    // longer ones.  A node with no active incident cell has zero gradient,
    // so its metric entry is arbitrary; use 1 to keep the division benign.
    let scaled = opts.step_rule == StepRule::BacktrackingWithSpectralInitial;
    let build_diag = |raw: &[T], diag: &mut [T]| {
        for id in 0..raw.len() {
            diag[id] = if raw[id] > T::zero() { raw[id] } else { T::one() };
        }
    };
    let mut grad = vec![T::zero(); n];
    let mut metric_raw = vec![T::zero(); n];
    let mut diag = vec![T::one(); n];
    if scaled {
        kern.gradient_impl(&x, &mut grad, Some(&mut metric_raw));
        build_diag(&metric_raw, &mut diag);
    } else {
        kern.gradient(&x, &mut grad);
    }
    mask_fixed(&mut grad);
    let mut energy = kern.energy(&x);

    let mut ginf = T::zero();
    for id in 0..n {
        ginf = ginf.max((grad[id] / diag[id]).abs());
    }
    let mut alpha = T::one() / (T::of(1e-10) + ginf);
    if opts.step_rule == StepRule::Fixed {
        // conservative inverse-curvature bound, stable for any admissible
        // field within the projection box
        let dim = sub.grid.dim();
        let mut s = T::zero();
        for a in 0..dim {
            let ih = T::one() / sub.grid.h(a);
            s = s + ih * ih;
        }
        let mut p_max = T::zero();
        let mut th_max = T::zero();
        for id in 0..n {
            p_max = p_max.max(p[id]);
            th_max = th_max.max(th[id]);
        }
        let box_span = (hi - lo).max(T::one());
        let grad_bound = s.sqrt() * box_span;
        let curvature = if p_max > T::of(2.0) {
            grad_bound.powf(p_max - T::of(2.0)).max(T::one())
        } else {
            T::one()
        };
        let l_bound = T::of_usize(1 << dim) * p_max * curvature * th_max
            * sub.grid.cell_volume() * s;
        alpha = T::one() / l_bound;
    }

    // nonmonotone reference window
    const MEMORY: usize = 10;
    let mut recent = [f64::NEG_INFINITY; MEMORY];
    recent[0] = energy.as_f64();
    let gamma = T::of(1e-4);
    let (alpha_min, alpha_max) = (T::of(1e-12), T::of(1e12));

    let mut stagnant = 0usize;
    let mut iterations = 0usize;
    let mut final_rel_change = f64::NAN;
    let mut converged = false;
    let mut trial = vec![T::zero(); n];
    let mut new_grad = vec![T::zero(); n];

    while iterations < opts.max_iters {
        iterations += 1;
        // projected-arc direction
        let mut dir_dot_g = T::zero();
        let mut dir_norm = T::zero();
        for id in 0..n {
            let t = {
                let mut v = x[id] - alpha * grad[id] / diag[id];
                match sub.roles[id] {
                    Role::FixedOne => v = T::one(),
                    Role::FixedZero => v = T::zero(),
                    Role::Free => {
                        if v < lo {
                            v = lo;
                        } else if v > hi {
                            v = hi;
                        }
                    }
                }
                v
            };
            let d = t - x[id];
            trial[id] = d; // store the direction
            dir_dot_g = dir_dot_g + d * grad[id];
            dir_norm = dir_norm.max(d.abs());
        }
        if dir_norm == T::zero() {
            // stationary: projection of the gradient step is the iterate
            converged = true;
            final_rel_change = 0.0;
            break;
        }

        let reference = recent.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut lambda = T::one();
        let mut new_energy;
        let mut steps = 0;
        loop {
            // trial point x + λ d (reuse new_grad as the trial field)
            for id in 0..n {
                new_grad[id] = x[id] + lambda * trial[id];
            }
            new_energy = kern.energy(&new_grad);
            if opts.step_rule == StepRule::Fixed {
                break;
            }
            if new_energy.as_f64() <= reference + (gamma * lambda * dir_dot_g).as_f64() {
                break;
            }
            lambda = lambda * T::of(0.5);
            steps += 1;
            if steps > 40 {
                break;
            }
        }

        // accept
        let mut s_dot_ds = T::zero();
        let mut s_dot_y = T::zero();
        std::mem::swap(&mut x, &mut new_grad); // x is now the accepted point
        let old_energy = energy;
        energy = new_energy;
        if scaled {
            kern.gradient_impl(&x, &mut new_grad, Some(&mut metric_raw));
        } else {
            kern.gradient(&x, &mut new_grad);
        }
        mask_fixed(&mut new_grad);
        for id in 0..n {
            let s = lambda * trial[id];
            let y = new_grad[id] - grad[id];
            s_dot_ds = s_dot_ds + s * s * diag[id];
            s_dot_y = s_dot_y + s * y;
        }
        std::mem::swap(&mut grad, &mut new_grad);

        // spectral step for the next iteration, measured in the metric that
        // produced the step; refresh the metric afterwards
        if scaled {
            alpha = if s_dot_y > T::zero() {
                (s_dot_ds / s_dot_y).max(alpha_min).min(alpha_max)
            } else {
                // curvature information unusable (flat or concave sample):
                // lengthen cautiously instead of jumping to the cap
                (alpha * T::of(10.0)).min(alpha_max)
            };
            build_diag(&metric_raw, &mut diag);
        }

        recent[iterations % MEMORY] = energy.as_f64();
        let rel = (old_energy - energy).abs().as_f64() / energy.as_f64().abs().max(1e-300);
        final_rel_change = rel;
        if rel < tol.as_f64() {
            stagnant += 1;
        } else {
            stagnant = 0;
        }
        if stagnant >= 10 {
            match opts.residual_tol {
                None => {
                    converged = true;
                    break;
                }
                Some(rt) => {
                    let r = interior_residual(&x, &mut new_grad);
                    if r <= rt {
                        converged = true;
                        break;
                    }
                    // keep going; re-arm the stagnation counter
                    stagnant = 0;
                }
            }
        }
    }

    let mut g = vec![T::zero(); n];
    let res = interior_residual(&x, &mut g);
    if let (true, Some(rt)) = (converged, opts.residual_tol) {
        converged = res <= rt;
    }
    let stats = SolveStats {
        iterations,
        converged,
        final_rel_change,
        interior_residual: res,
    };
    (x, stats)
}

/// The value below which a capacity is reported as exactly zero.
pub const ZERO_CAPACITY_THRESHOLD: f64 = 1e-14;

fn solve_window<T: Scalar>(omega: &GridSet<T>) -> Option<Window> {
    let bb = omega.bounding_window()?;
    Some(bb.padded(1, omega.grid()).at_least_3(omega.grid()))
}

fn minimize_on_window<T: Scalar>(
    k_set: &GridSet<T>,
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
) -> Result<CapacityResult<T>> {
    let grid = *omega.grid();
    let win = solve_window(omega)
        .ok_or_else(|| Error::Precondition("open set is empty but K is not".into()))?;
    let sub_grid = grid.crop(&win)?;
    let sub_k = k_set.restrict(&win)?;
    let sub_omega = omega.restrict(&win)?;
    let sub_p = p.field().restrict(&win)?;
    let sub_w = w.field().restrict(&win)?;

    let roles: Vec<Role> = (0..sub_grid.node_count())
        .map(|id| {
            if sub_k.contains(id) {
                Role::FixedOne
            } else if sub_omega.contains(id) {
                Role::Free
            } else {
                Role::FixedZero
            }
        })
        .collect();
    let init = condenser_init(&sub_k, &sub_omega, &roles);
    let sub = Subproblem { grid: sub_grid, roles, init };

    // complementarity region: Ω minus the one-ring around K
    let near_k = sub_k.dilate(1);
    let residual_mask: Vec<bool> = (0..sub_grid.node_count())
        .map(|id| sub_omega.contains(id) && !near_k.contains(id))
        .collect();

    let (sub_x, stats) = solve_subproblem(
        &sub,
        sub_p.values(),
        sub_w.values(),
        opts,
        &residual_mask,
    );

    let sub_field = ScalarField::new(sub_grid, sub_x)?;
    let minimizer = ScalarField::embed(&sub_field, &win, grid)?;
    // the reported value is the energy recomputed through the public entry
    let mut value = dirichlet_energy(&minimizer, p, w, omega)?;
    if value.as_f64() < ZERO_CAPACITY_THRESHOLD {
        value = T::zero();
    }
    Ok(CapacityResult {
        value,
        minimizer,
        iterations: stats.iterations,
        converged: stats.converged,
        final_rel_change: stats.final_rel_change,
        interior_residual: stats.interior_residual,
    })
}

/// Relative capacity of the compact node set K inside the open set Ω:
/// minimizes the Dirichlet energy over {f = 1 on K, f = 0 outside Ω,
/// 0 ≤ f ≤ 1}.
pub fn minimize_capacity<T: Scalar>(
    k_set: &GridSet<T>,
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
) -> Result<CapacityResult<T>> {
    opts.validate()?;
    if k_set.grid() != omega.grid() || k_set.grid() != p.grid() || k_set.grid() != w.grid() {
        return Err(Error::GridMismatch);
    }
    if !k_set.is_subset(&omega.erode(1))? {
        return Err(Error::TouchesBoundary);
    }
    let adm = admissibility_check(p, w)?;
    if !adm.pass {
        return Err(Error::Inadmissible(adm.failures.join("; ")));
    }
    if k_set.is_empty() {
        return Ok(CapacityResult {
            value: T::zero(),
            minimizer: ScalarField::zeros(*k_set.grid()),
            iterations: 0,
            converged: true,
            final_rel_change: 0.0,
            interior_residual: 0.0,
        });
    }
    minimize_on_window(k_set, omega, p, w, opts)
}

// ── memoization cache ────────────────────────────────────────────────────

struct CachedSolve<T: Scalar> {
    value: T,
    sub_values: Vec<T>,
    iterations: usize,
    converged: bool,
    final_rel_change: f64,
    interior_residual: f64,
}

/// Content-addressed memoization of capacity solves. Keys hash the *cropped*
/// subproblem (shape, spacings, masks, restricted p/ϑ values, options), so
/// translated copies of the same condenser deduplicate when the fields are
/// translation invariant. Concurrent reads; inserts serialize on the lock.
pub struct CapacityCache<T: Scalar> {
    map: RwLock<HashMap<u128, Arc<CachedSolve<T>>>>,
}

impl<T: Scalar> Default for CapacityCache<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> CapacityCache<T> {
    pub fn new() -> Self {
        CapacityCache { map: RwLock::new(HashMap::new()) }
    }

    pub fn len(&self) -> usize {
        self.map.read().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// As `minimize_capacity`, consulting and filling the cache.
    pub fn minimize(
        &self,
        k_set: &GridSet<T>,
        omega: &GridSet<T>,
        p: &ExponentField<T>,
        w: &WeightField<T>,
        opts: &SolverOptions,
    ) -> Result<CapacityResult<T>> {
        opts.validate()?;
        if k_set.grid() != omega.grid() || k_set.grid() != p.grid() || k_set.grid() != w.grid() {
            return Err(Error::GridMismatch);
        }
        if !k_set.is_subset(&omega.erode(1))? {
            return Err(Error::TouchesBoundary);
        }
        let adm = admissibility_check(p, w)?;
        if !adm.pass {
            return Err(Error::Inadmissible(adm.failures.join("; ")));
        }
        if k_set.is_empty() {
            return Ok(CapacityResult {
                value: T::zero(),
                minimizer: ScalarField::zeros(*k_set.grid()),
                iterations: 0,
                converged: true,
                final_rel_change: 0.0,
                interior_residual: 0.0,
            });
        }
        let grid = *omega.grid();
        let win = solve_window(omega)
            .ok_or_else(|| Error::Precondition("open set is empty but K is not".into()))?;
        let key = subproblem_key(&win, k_set, omega, p, w, opts)?;

        if let Some(hit) = self.map.read().unwrap().get(&key).cloned() {
            let sub_grid = grid.crop(&win)?;
            let sub_field = ScalarField::new(sub_grid, hit.sub_values.clone())?;
            let minimizer = ScalarField::embed(&sub_field, &win, grid)?;
            return Ok(CapacityResult {
                value: hit.value,
                minimizer,
                iterations: hit.iterations,
                converged: hit.converged,
                final_rel_change: hit.final_rel_change,
                interior_residual: hit.interior_residual,
            });
        }

        let result = minimize_on_window(k_set, omega, p, w, opts)?;
        let entry = Arc::new(CachedSolve {
            value: result.value,
            sub_values: result.minimizer.restrict(&win)?.values().to_vec(),
            iterations: result.iterations,
            converged: result.converged,
            final_rel_change: result.final_rel_change,
            interior_residual: result.interior_residual,
        });
        self.map.write().unwrap().entry(key).or_insert(entry);
        Ok(result)
    }
}

fn subproblem_key<T: Scalar>(
    win: &Window,
    k_set: &GridSet<T>,
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
) -> Result<u128> {
    use std::collections::hash_map::DefaultHasher;
    let grid = omega.grid();
    let sub_k = k_set.restrict(win)?;
    let sub_omega = omega.restrict(win)?;
    let sub_p = p.field().restrict(win)?;
    let sub_w = w.field().restrict(win)?;

    let mut lo = DefaultHasher::new();
    let mut hi = DefaultHasher::new();
    0x5eedu64.hash(&mut hi); // differentiate the two lanes

    for h in [&mut lo, &mut hi] {
        grid.dim().hash(h);
        for a in 0..grid.dim() {
            win.n[a].hash(h);
            grid.h(a).as_f64().to_bits().hash(h);
        }
        sub_k.mask().hash(h);
        sub_omega.mask().hash(h);
        for v in sub_p.values() {
            v.as_f64().to_bits().hash(h);
        }
        for v in sub_w.values() {
            v.as_f64().to_bits().hash(h);
        }
        opts.content_hash(h);
    }
    Ok(((hi.finish() as u128) << 64) | lo.finish() as u128)
}

// ── open / general set capacity ──────────────────────────────────────────

/// Inner approximation of the capacity of an open (node) set.
#[derive(Clone, Debug, Serialize)]
pub struct OpenCapacityReport {
    /// Best (largest) inner value: the capacity of the least-eroded compact.
    pub lower: f64,
    /// Values for erosion depth k = kMax, …, 1 (nondecreasing).
    pub values: Vec<f64>,
}

/// Approximates cap(U, Ω) for open U from inside, by eroding U into compacts.
pub fn capacity_open<T: Scalar>(
    u: &GridSet<T>,
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    k_max: usize,
    cache: Option<&CapacityCache<T>>,
) -> Result<OpenCapacityReport> {
    if k_max < 1 {
        return Err(Error::Precondition("erosion depth must be at least 1".into()));
    }
    if !u.is_subset(omega)? {
        return Err(Error::Precondition("open set is not contained in the domain".into()));
    }
    let mut values = Vec::with_capacity(k_max);
    for k in (1..=k_max).rev() {
        let compact = u.erode(k);
        let r = match cache {
            Some(c) => c.minimize(&compact, omega, p, w, opts)?,
            None => minimize_capacity(&compact, omega, p, w, opts)?,
        };
        values.push(r.value.as_f64());
    }
    let lower = values.iter().cloned().fold(0.0, f64::max);
    Ok(OpenCapacityReport { lower, values })
}

/// Two-sided bracket for the capacity of an arbitrary node set.
#[derive(Clone, Debug, Serialize)]
pub struct CapacityBracket {
    pub inner: f64,
    pub outer: f64,
}

/// Brackets cap(E, Ω): from inside via erosions of E, from outside via the
/// least dilation of E (kept inside Ω).
pub fn capacity_general<T: Scalar>(
    e: &GridSet<T>,
    omega: &GridSet<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    opts: &SolverOptions,
    k_max: usize,
    cache: Option<&CapacityCache<T>>,
) -> Result<CapacityBracket> {
    if !e.is_subset(omega)? {
        return Err(Error::Precondition("set is not contained in the domain".into()));
    }
    let inner = capacity_open(e, omega, p, w, opts, k_max, cache)?.lower;
    let shell = omega.erode(1);
    let mut outer = f64::INFINITY;
    for k in 1..=k_max {
        let u = e.dilate(k).intersection(&shell)?;
        let v = capacity_open(&u, omega, p, w, opts, k_max, cache)?.lower;
        outer = outer.min(v);
    }
    Ok(CapacityBracket { inner, outer })
}

// ── PDE-side diagnostics ─────────────────────────────────────────────────

/// Result of the randomized weak-supersolution test.
#[derive(Clone, Debug, Serialize)]
pub struct SupersolutionReport {
    pub pass: bool,
    /// Most negative pairing over the trials.
    pub worst: f64,
}

/// Pairs ∫ ϑ|∇f|^{p−2}∇f·∇g against seeded random nonnegative test fields g
/// vanishing outside Ω; a supersolution keeps every pairing ≥ −tolerance.
pub fn supersolution_check<T: Scalar>(
    f: &ScalarField<T>,
    p: &ExponentField<T>,
    w: &WeightField<T>,
    omega: &GridSet<T>,
    trials: usize,
    seed: u64,
) -> Result<SupersolutionReport> {
    check_grids(f, p, w, omega)?;
    if trials < 1 {
        return Err(Error::Precondition("at least one trial is required".into()));
    }
    let kern = Kernel::new(f.grid(), p.field().values(), w.field().values());
    let n = f.grid().node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pass = true;
    let mut worst = f64::INFINITY;
    let mut g = vec![T::zero(); n];
    for _ in 0..trials {
        for (id, gv) in g.iter_mut().enumerate() {
            *gv = if omega.contains(id) {
                T::of(rng.gen_range(0.0..1.0))
            } else {
                T::zero()
            };
        }
        let (val, mass) = kern.pairing(f.values(), &g);
        let v = val.as_f64();
        worst = worst.min(v);
        if v < -1e-8 * (1.0 + mass.as_f64()) {
            pass = false;
        }
    }
    Ok(SupersolutionReport { pass, worst })
}

/// Result of the pointwise comparison test.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub pass: bool,
    /// Most negative value of f − g over D (0 when f ≥ g throughout).
    pub violation: f64,
}

/// Given f ≥ g on the one-node boundary ring of D, checks f ≥ g across D.
pub fn comparison_principle_check<T: Scalar>(
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    d: &GridSet<T>,
) -> Result<ComparisonReport> {
    if f.grid() != g.grid() || f.grid() != d.grid() {
        return Err(Error::GridMismatch);
    }
    let ring = d.boundary_ring();
    for id in 0..d.grid().node_count() {
        if ring.contains(id) && f.get(id) < g.get(id) {
            return Err(Error::Hypothesis(format!(
                "comparison hypothesis violated on the boundary ring at node {id}"
            )));
        }
    }
    let mut min_gap = T::infinity();
    for id in 0..d.grid().node_count() {
        if d.contains(id) {
            min_gap = min_gap.min(f.get(id) - g.get(id));
        }
    }
    let min_gap = if min_gap.is_finite() { min_gap.as_f64() } else { 0.0 };
    Ok(ComparisonReport { pass: min_gap >= -1e-6, violation: min_gap.min(0.0) })
}
