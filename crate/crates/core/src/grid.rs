//! Uniform Cartesian grids in 1–3 dimensions, nodal scalar fields, boolean
//! node masks, rasterization of elementary shapes, set algebra, and Chebyshev
//! morphology.
//!
//! Everything here is vertex-centered: sets are node masks and fields carry
//! one value per node, because the obstacle constraints downstream apply at
//! the nodes where the minimizer lives.

use crate::scalar::Scalar;
use crate::{Error, Result};

/// Maximum supported dimension. Axes above `dim` are kept at neutral values
/// (one node, unit spacing) so index math never branches on dimension.
pub const MAX_DIM: usize = 3;

/// Uniform nodal grid on a box `[a_1,b_1] x ... x [a_d,b_d]`.
///
/// Indexing is row-major with axis 1 fastest: `id = (i3*n2 + i2)*n1 + i1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid<T> {
    dim: usize,
    n: [usize; MAX_DIM],
    lo: [T; MAX_DIM],
    hi: [T; MAX_DIM],
    h: [T; MAX_DIM],
}

impl<T: Scalar> Grid<T> {
    /// Builds a grid from per-axis extents and node counts.
    ///
    /// Each axis needs at least 3 nodes and a nonempty interval.
    pub fn new(dim: usize, extent: &[(T, T)], n: &[usize]) -> Result<Self> {
        if !(1..=MAX_DIM).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1..=3, got {dim}")));
        }
        if extent.len() != dim || n.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} extents and node counts, got {} and {}",
                extent.len(),
                n.len()
            )));
        }
        let mut g = Grid {
            dim,
            n: [1; MAX_DIM],
            lo: [T::zero(); MAX_DIM],
            hi: [T::zero(); MAX_DIM],
            h: [T::one(); MAX_DIM],
        };
        for k in 0..dim {
            let (a, b) = extent[k];
            if !(a.is_finite() && b.is_finite() && b > a) {
                return Err(Error::InvalidGrid(format!(
                    "axis {}: extent must be a finite nonempty interval",
                    k + 1
                )));
            }
            if n[k] < 3 {
                return Err(Error::InvalidGrid(format!(
                    "axis {}: need at least 3 nodes, got {}",
                    k + 1,
                    n[k]
                )));
            }
            g.n[k] = n[k];
            g.lo[k] = a;
            g.hi[k] = b;
            g.h[k] = (b - a) / T::of_usize(n[k] - 1);
        }
        Ok(g)
    }

    /// Grid dimension (1, 2 or 3).
    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Node count along `axis` (0-based; 1 beyond `dim`).
    #[inline]
    pub fn n(&self, axis: usize) -> usize {
        self.n[axis]
    }

    /// Spacing along `axis`.
    #[inline]
    pub fn h(&self, axis: usize) -> T {
        self.h[axis]
    }

    /// Extent `[a, b]` of `axis`.
    #[inline]
    pub fn extent(&self, axis: usize) -> (T, T) {
        (self.lo[axis], self.hi[axis])
    }

    /// Smallest and largest spacing over active axes.
    pub fn h_min_max(&self) -> (T, T) {
        let mut lo = self.h[0];
        let mut hi = self.h[0];
        for k in 1..self.dim {
            lo = lo.min(self.h[k]);
            hi = hi.max(self.h[k]);
        }
        (lo, hi)
    }

    /// Cell volume `h_1 * ... * h_d`.
    pub fn cell_volume(&self) -> T {
        let mut v = T::one();
        for k in 0..self.dim {
            v = v * self.h[k];
        }
        v
    }

    /// Total node count.
    #[inline]
    pub fn node_count(&self) -> usize {
        self.n[0] * self.n[1] * self.n[2]
    }

    /// Linear index of a multi-index (row-major, axis 1 fastest).
    #[inline]
    pub fn index(&self, idx: [usize; MAX_DIM]) -> usize {
        debug_assert!(idx[0] < self.n[0] && idx[1] < self.n[1] && idx[2] < self.n[2]);
        (idx[2] * self.n[1] + idx[1]) * self.n[0] + idx[0]
    }

    /// Multi-index of a linear index.
    #[inline]
    pub fn unindex(&self, id: usize) -> [usize; MAX_DIM] {
        let i1 = id % self.n[0];
        let rest = id / self.n[0];
        [i1, rest % self.n[1], rest / self.n[1]]
    }

    /// Coordinate of node `i` on `axis`; the endpoints are reproduced exactly.
    #[inline]
    pub fn coord(&self, axis: usize, i: usize) -> T {
        if axis >= self.dim {
            return T::zero();
        }
        if i + 1 == self.n[axis] {
            self.hi[axis]
        } else {
            self.lo[axis] + self.h[axis] * T::of_usize(i)
        }
    }

    /// Coordinates of a node by linear index (zero-padded beyond `dim`).
    #[inline]
    pub fn coords(&self, id: usize) -> [T; MAX_DIM] {
        let idx = self.unindex(id);
        [self.coord(0, idx[0]), self.coord(1, idx[1]), self.coord(2, idx[2])]
    }

    /// Resolves a point to the grid node it coincides with (within 1e-6 h).
    pub fn node_at(&self, point: &[T]) -> Result<usize> {
        if point.len() < self.dim {
            return Err(Error::InvalidGrid(format!(
                "point has {} coordinates, grid has dimension {}",
                point.len(),
                self.dim
            )));
        }
        let mut idx = [0usize; MAX_DIM];
        for k in 0..self.dim {
            let rel = (point[k] - self.lo[k]) / self.h[k];
            let i = rel.round();
            if i < T::zero() || i > T::of_usize(self.n[k] - 1) || (rel - i).abs() > T::of(1e-6) {
                return Err(Error::NotANode(format!(
                    "coordinate {} on axis {} is not a grid node",
                    point[k].as_f64(),
                    k + 1
                )));
            }
            idx[k] = i.to_usize().unwrap();
        }
        Ok(self.index(idx))
    }

    /// True if `point` lies inside the closed extent box.
    pub fn contains_point(&self, point: &[T]) -> bool {
        (0..self.dim).all(|k| point[k] >= self.lo[k] && point[k] <= self.hi[k])
    }

    /// Extracts the subgrid covering the index window `[lo, lo+n)`.
    ///
    /// Corner coordinates are taken from the parent so extent endpoints match
    /// parent node coordinates exactly.
    pub fn crop(&self, win: &Window) -> Result<Grid<T>> {
        let mut extent = Vec::with_capacity(self.dim);
        let mut ns = Vec::with_capacity(self.dim);
        for k in 0..self.dim {
            let lo = win.lo[k];
            let n = win.n[k];
            if n < 3 || lo + n > self.n[k] {
                return Err(Error::InvalidGrid(format!(
                    "crop window [{}, {}) invalid on axis {} with {} nodes",
                    lo,
                    lo + n,
                    k + 1,
                    self.n[k]
                )));
            }
            extent.push((self.coord(k, lo), self.coord(k, lo + n - 1)));
            ns.push(n);
        }
        Grid::new(self.dim, &extent, &ns)
    }
}

/// Index window (`lo`, size `n`) describing a subgrid of a parent grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub lo: [usize; MAX_DIM],
    pub n: [usize; MAX_DIM],
}

impl Window {
    /// Whole-grid window.
    pub fn full<T: Scalar>(grid: &Grid<T>) -> Self {
        Window { lo: [0; MAX_DIM], n: [grid.n(0), grid.n(1), grid.n(2)] }
    }

    /// Grows the window by `pad` nodes per side, clipped to the grid.
    pub fn padded<T: Scalar>(&self, pad: usize, grid: &Grid<T>) -> Self {
        let mut out = *self;
        for k in 0..grid.dim() {
            let lo = self.lo[k].saturating_sub(pad);
            let hi = (self.lo[k] + self.n[k] + pad).min(grid.n(k));
            out.lo[k] = lo;
            out.n[k] = hi - lo;
        }
        out
    }

    /// Ensures each active axis spans at least 3 nodes, expanding inside the grid.
    pub fn at_least_3<T: Scalar>(&self, grid: &Grid<T>) -> Self {
        let mut out = *self;
        for k in 0..grid.dim() {
            while out.n[k] < 3 {
                if out.lo[k] > 0 {
                    out.lo[k] -= 1;
                    out.n[k] += 1;
                } else if out.lo[k] + out.n[k] < grid.n(k) {
                    out.n[k] += 1;
                } else {
                    break;
                }
            }
        }
        out
    }
}

/// One real value per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Scalar> ScalarField<T> {
    /// Wraps a value vector; every entry must be finite.
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("non-finite field value at node {i}")));
        }
        Ok(ScalarField { grid, values })
    }

    /// All-zero field.
    pub fn zeros(grid: Grid<T>) -> Self {
        let n = grid.node_count();
        ScalarField { grid, values: vec![T::zero(); n] }
    }

    /// Constant field.
    pub fn constant(grid: Grid<T>, c: T) -> Result<Self> {
        let n = grid.node_count();
        ScalarField::new(grid, vec![c; n])
    }

    /// Field from a function of node coordinates.
    pub fn from_fn(grid: Grid<T>, f: impl Fn([T; MAX_DIM]) -> T) -> Result<Self> {
        let values: Vec<T> = (0..grid.node_count()).map(|id| f(grid.coords(id))).collect();
        ScalarField::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn get(&self, id: usize) -> T {
        self.values[id]
    }

    /// Largest absolute nodal value.
    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Restriction to a subgrid window (values copied by index).
    pub fn restrict(&self, win: &Window) -> Result<ScalarField<T>> {
        let sub = self.grid.crop(win)?;
        let mut values = Vec::with_capacity(sub.node_count());
        for id in 0..sub.node_count() {
            let s = sub.unindex(id);
            let parent = self
                .grid
                .index([s[0] + win.lo[0], s[1] + win.lo[1], s[2] + win.lo[2]]);
            values.push(self.values[parent]);
        }
        ScalarField::new(sub, values)
    }

    /// Embeds a subgrid field back into a full-size zero field.
    pub fn embed(sub: &ScalarField<T>, win: &Window, grid: Grid<T>) -> Result<ScalarField<T>> {
        let mut full = ScalarField::zeros(grid);
        for id in 0..sub.grid.node_count() {
            let s = sub.grid.unindex(id);
            let parent = full
                .grid
                .index([s[0] + win.lo[0], s[1] + win.lo[1], s[2] + win.lo[2]]);
            full.values[parent] = sub.values[id];
        }
        Ok(full)
    }
}

/// One boolean per grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSet<T> {
    grid: Grid<T>,
    mask: Vec<bool>,
}

impl<T: Scalar> GridSet<T> {
    /// Wraps a mask vector of the right length.
    pub fn new(grid: Grid<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries for {} nodes",
                mask.len(),
                grid.node_count()
            )));
        }
        Ok(GridSet { grid, mask })
    }

    pub fn empty(grid: Grid<T>) -> Self {
        let n = grid.node_count();
        GridSet { grid, mask: vec![false; n] }
    }

    pub fn full(grid: Grid<T>) -> Self {
        let n = grid.node_count();
        GridSet { grid, mask: vec![true; n] }
    }

    /// Set from a predicate on node coordinates.
    pub fn from_predicate(grid: Grid<T>, pred: impl Fn([T; MAX_DIM]) -> bool) -> Self {
        let mask: Vec<bool> = (0..grid.node_count()).map(|id| pred(grid.coords(id))).collect();
        GridSet { grid, mask }
    }

    /// Wraps an explicit node mask (one flag per node id).
    pub fn from_mask(grid: Grid<T>, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != grid.node_count() {
            return Err(Error::InvalidGrid(format!(
                "mask has {} entries for {} nodes",
                mask.len(),
                grid.node_count()
            )));
        }
        Ok(GridSet { grid, mask })
    }

    #[inline]
    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    #[inline]
    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn contains(&self, id: usize) -> bool {
        self.mask[id]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|b| *b)
    }

    fn check_same_grid(&self, other: &GridSet<T>) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    pub fn union(&self, other: &GridSet<T>) -> Result<GridSet<T>> {
        self.check_same_grid(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a || *b).collect();
        Ok(GridSet { grid: self.grid, mask })
    }

    pub fn intersection(&self, other: &GridSet<T>) -> Result<GridSet<T>> {
        self.check_same_grid(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect();
        Ok(GridSet { grid: self.grid, mask })
    }

    pub fn difference(&self, other: &GridSet<T>) -> Result<GridSet<T>> {
        self.check_same_grid(other)?;
        let mask = self.mask.iter().zip(&other.mask).map(|(a, b)| *a && !*b).collect();
        Ok(GridSet { grid: self.grid, mask })
    }

    pub fn complement(&self) -> GridSet<T> {
        GridSet { grid: self.grid, mask: self.mask.iter().map(|b| !*b).collect() }
    }

    /// True if every node of `self` belongs to `other`.
    pub fn is_subset(&self, other: &GridSet<T>) -> Result<bool> {
        self.check_same_grid(other)?;
        Ok(self.mask.iter().zip(&other.mask).all(|(a, b)| !*a || *b))
    }

    /// Erosion by `k` nodes in the Chebyshev metric; nodes outside the grid
    /// count as complement, so the grid frame erodes away.
    pub fn erode(&self, k: usize) -> GridSet<T> {
        let mut cur = self.clone();
        for _ in 0..k {
            cur = cur.morph_step(false);
        }
        cur
    }

    /// Dilation by `k` nodes in the Chebyshev metric (clipped to the grid).
    pub fn dilate(&self, k: usize) -> GridSet<T> {
        let mut cur = self.clone();
        for _ in 0..k {
            cur = cur.morph_step(true);
        }
        cur
    }

    fn morph_step(&self, dilate: bool) -> GridSet<T> {
        let g = &self.grid;
        let (n1, n2, n3) = (g.n(0), g.n(1), g.n(2));
        let dim = g.dim();
        let mut mask = vec![false; self.mask.len()];
        let r2 = if dim >= 2 { 1i64 } else { 0 };
        let r3 = if dim >= 3 { 1i64 } else { 0 };
        for i3 in 0..n3 as i64 {
            for i2 in 0..n2 as i64 {
                for i1 in 0..n1 as i64 {
                    let mut acc = !dilate;
                    'probe: for d3 in -r3..=r3 {
                        for d2 in -r2..=r2 {
                            for d1 in -1i64..=1 {
                                let (j1, j2, j3) = (i1 + d1, i2 + d2, i3 + d3);
                                let inside = j1 >= 0
                                    && j1 < n1 as i64
                                    && j2 >= 0
                                    && j2 < n2 as i64
                                    && j3 >= 0
                                    && j3 < n3 as i64;
                                // outside the grid counts as complement
                                let v = inside
                                    && self.mask
                                        [(j3 as usize * n2 + j2 as usize) * n1 + j1 as usize];
                                if dilate && v {
                                    acc = true;
                                    break 'probe;
                                }
                                if !dilate && !v {
                                    acc = false;
                                    break 'probe;
                                }
                            }
                        }
                    }
                    mask[(i3 as usize * n2 + i2 as usize) * n1 + i1 as usize] = acc;
                }
            }
        }
        GridSet { grid: self.grid, mask }
    }

    /// Nodes of `self` with a Chebyshev-1 neighbor outside `self` (one-node
    /// boundary ring; grid-edge nodes of `self` are included).
    pub fn boundary_ring(&self) -> GridSet<T> {
        self.difference(&self.erode(1)).expect("same grid")
    }

    /// Chebyshev distance (in node steps) from every node to the nearest node
    /// of `self`; `u32::MAX` where `self` is empty/unreachable.
    pub fn chebyshev_distance(&self) -> Vec<u32> {
        let g = &self.grid;
        let n = [g.n(0) as i64, g.n(1) as i64, g.n(2) as i64];
        let inf = u32::MAX - 2;
        let mut d: Vec<u32> = self.mask.iter().map(|b| if *b { 0 } else { inf }).collect();
        let idx = |p: [i64; 3]| ((p[2] * n[1] + p[1]) * n[0] + p[0]) as usize;
        // lexicographically earlier offsets within the unit cube: the causal
        // neighbor set of the forward chamfer pass (exact for chessboard)
        let mut causal: Vec<[i64; 3]> = Vec::new();
        for o3 in -1i64..=1 {
            for o2 in -1i64..=1 {
                for o1 in -1i64..=1 {
                    if (o3, o2, o1) < (0, 0, 0) {
                        causal.push([o1, o2, o3]);
                    }
                }
            }
        }
        let in_range = |p: [i64; 3]| (0..3).all(|k| p[k] >= 0 && p[k] < n[k]);
        let mut sweep = |offsets: &[[i64; 3]], reverse: bool| {
            let order: Vec<i64> = if reverse {
                (0..n[0] * n[1] * n[2]).rev().collect()
            } else {
                (0..n[0] * n[1] * n[2]).collect()
            };
            for flat in order {
                let p = [flat % n[0], (flat / n[0]) % n[1], flat / (n[0] * n[1])];
                let here = idx(p);
                let mut best = d[here];
                for o in offsets {
                    let q = [p[0] + o[0], p[1] + o[1], p[2] + o[2]];
                    if in_range(q) {
                        let v = d[idx(q)].saturating_add(1);
                        if v < best {
                            best = v;
                        }
                    }
                }
                d[here] = best;
            }
        };
        let anti: Vec<[i64; 3]> = causal.iter().map(|o| [-o[0], -o[1], -o[2]]).collect();
        sweep(&causal, false);
        sweep(&anti, true);
        d.iter_mut().for_each(|v| {
            if *v >= inf {
                *v = u32::MAX;
            }
        });
        d
    }

    /// Index bounding box of the true nodes, or `None` if empty.
    pub fn bounding_window(&self) -> Option<Window> {
        let g = &self.grid;
        let mut lo = [usize::MAX; MAX_DIM];
        let mut hi = [0usize; MAX_DIM];
        let mut any = false;
        for id in 0..self.mask.len() {
            if self.mask[id] {
                any = true;
                let idx = g.unindex(id);
                for k in 0..MAX_DIM {
                    lo[k] = lo[k].min(idx[k]);
                    hi[k] = hi[k].max(idx[k]);
                }
            }
        }
        if !any {
            return None;
        }
        let mut n = [1usize; MAX_DIM];
        for k in 0..MAX_DIM {
            n[k] = hi[k] - lo[k] + 1;
        }
        Some(Window { lo, n })
    }

    /// Restriction to a subgrid window.
    pub fn restrict(&self, win: &Window) -> Result<GridSet<T>> {
        let sub = self.grid.crop(win)?;
        let mut mask = Vec::with_capacity(sub.node_count());
        for id in 0..sub.node_count() {
            let s = sub.unindex(id);
            let parent = self
                .grid
                .index([s[0] + win.lo[0], s[1] + win.lo[1], s[2] + win.lo[2]]);
            mask.push(self.mask[parent]);
        }
        GridSet::new(sub, mask)
    }

    /// Largest Euclidean distance between two nodes of the set (0 if fewer
    /// than two nodes). Extreme points lie on the boundary ring, so only ring
    /// nodes are paired.
    pub fn diameter(&self) -> T {
        let ring = self.boundary_ring();
        let g = &self.grid;
        let pts: Vec<[T; MAX_DIM]> = (0..ring.mask.len())
            .filter(|id| ring.mask[*id])
            .map(|id| g.coords(id))
            .collect();
        let mut best = T::zero();
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                let mut s = T::zero();
                for k in 0..g.dim() {
                    let dk = pts[i][k] - pts[j][k];
                    s = s + dk * dk;
                }
                best = best.max(s);
            }
        }
        best.sqrt()
    }
}

/// Comparison sense for half-space rasterization.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Sense {
    fn holds<T: Scalar>(self, lhs: T, rhs: T) -> bool {
        match self {
            Sense::Lt => lhs < rhs,
            Sense::Le => lhs <= rhs,
            Sense::Gt => lhs > rhs,
            Sense::Ge => lhs >= rhs,
        }
    }
}

/// Open Euclidean ball `{ y : |y - center| < radius }` as a node mask.
pub fn rasterize_ball<T: Scalar>(center: &[T], radius: T, grid: &Grid<T>) -> Result<GridSet<T>> {
    if !(radius > T::zero()) {
        return Err(Error::InvalidGrid("ball radius must be positive".into()));
    }
    if center.len() < grid.dim() || !grid.contains_point(center) {
        return Err(Error::InvalidGrid("ball center outside grid extent".into()));
    }
    let (_, hmax) = grid.h_min_max();
    if radius < hmax / T::of(2.0) {
        return Err(Error::BallBelowResolution);
    }
    let r2 = radius * radius;
    let dim = grid.dim();
    Ok(GridSet::from_predicate(*grid, |xs| {
        let mut s = T::zero();
        for k in 0..dim {
            let d = xs[k] - center[k];
            s = s + d * d;
        }
        s < r2
    }))
}

/// Closed axis-aligned box `{ y : lo_k <= y_k <= hi_k }` as a node mask.
pub fn rasterize_rect<T: Scalar>(lo: &[T], hi: &[T], grid: &Grid<T>) -> Result<GridSet<T>> {
    let dim = grid.dim();
    if lo.len() < dim || hi.len() < dim {
        return Err(Error::InvalidGrid("rect needs one bound per axis".into()));
    }
    for k in 0..dim {
        if !(lo[k] <= hi[k]) {
            return Err(Error::InvalidGrid(format!("rect bounds reversed on axis {}", k + 1)));
        }
    }
    let lo_v: Vec<T> = lo[..dim].to_vec();
    let hi_v: Vec<T> = hi[..dim].to_vec();
    Ok(GridSet::from_predicate(*grid, move |xs| {
        (0..dim).all(|k| xs[k] >= lo_v[k] && xs[k] <= hi_v[k])
    }))
}

/// Half-space `{ y : y_axis <sense> value }` as a node mask (`axis` 1-based).
pub fn rasterize_halfspace<T: Scalar>(
    axis: usize,
    sense: Sense,
    value: T,
    grid: &Grid<T>,
) -> Result<GridSet<T>> {
    if axis == 0 || axis > grid.dim() {
        return Err(Error::InvalidGrid(format!(
            "half-space axis {axis} out of range for dimension {}",
            grid.dim()
        )));
    }
    Ok(GridSet::from_predicate(*grid, move |xs| sense.holds(xs[axis - 1], value)))
}
