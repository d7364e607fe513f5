//! Uniform grids, finite-difference discretization of multi-index
//! differential expressions, formal adjoints and operator algebra.
//!
//! Grid functions are flat `Vec<C64>` in axis-major order: the last axis
//! varies fastest and the fiber index is innermost.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::{CMat, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Uniform 1-D grid. For `Dirichlet` only the interior nodes are stored;
/// the two boundary nodes sit one spacing outside the first and last point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    start: f64,
    h: f64,
    n: usize,
    boundary: Boundary,
}

pub const MIN_POINTS: usize = 5;

impl Grid1D {
    /// `n` interior unknowns on `[a, b]` with homogeneous boundary values.
    pub fn dirichlet(a: f64, b: f64, n: usize) -> Result<Self> {
        check_interval(a, b, n)?;
        let h = (b - a) / (n + 1) as f64;
        Ok(Self { start: a + h, h, n, boundary: Boundary::Dirichlet })
    }

    /// `n` nodes on the circle `[a, b)` of period `b - a`.
    pub fn periodic(a: f64, b: f64, n: usize) -> Result<Self> {
        check_interval(a, b, n)?;
        Ok(Self { start: a, h: (b - a) / n as f64, n, boundary: Boundary::Periodic })
    }

    /// Builds a grid from explicit coordinates, rejecting nonuniform spacing.
    pub fn from_points(points: &[f64], boundary: Boundary) -> Result<Self> {
        let n = points.len();
        if n < MIN_POINTS {
            return Err(Error::InvalidGrid(format!("{n} points, need at least {MIN_POINTS}")));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidGrid("non-finite coordinate".into()));
        }
        let h = (points[n - 1] - points[0]) / (n - 1) as f64;
        if h <= 0.0 {
            return Err(Error::InvalidGrid("points must be ascending".into()));
        }
        let scale = points[0].abs().max(points[n - 1].abs());
        let tol = 1e-12 * h + 8.0 * f64::EPSILON * scale;
        for (i, w) in points.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > tol {
                return Err(Error::InvalidGrid(format!("nonuniform spacing at index {i}")));
            }
        }
        Ok(Self { start: points[0], h, n, boundary })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn point(&self, i: usize) -> f64 {
        self.start + self.h * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Left end of the physical domain (boundary node or period start).
    pub fn lower(&self) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => self.start - self.h,
            Boundary::Periodic => self.start,
        }
    }

    /// Right end of the physical domain.
    pub fn upper(&self) -> f64 {
        match self.boundary {
            Boundary::Dirichlet => self.point(self.n - 1) + self.h,
            Boundary::Periodic => self.start + self.h * self.n as f64,
        }
    }

    pub fn length(&self) -> f64 {
        self.upper() - self.lower()
    }

    /// Index reached from `i` by `offset` steps; `None` when it leaves a
    /// Dirichlet domain.
    pub fn shift(&self, i: usize, offset: isize) -> Option<usize> {
        let j = i as isize + offset;
        let n = self.n as isize;
        match self.boundary {
            Boundary::Periodic => Some(j.rem_euclid(n) as usize),
            Boundary::Dirichlet => (0..n).contains(&j).then_some(j as usize),
        }
    }

    /// Index of the node at coordinate `x`, if `x` is a node.
    pub fn index_of(&self, x: f64) -> Option<usize> {
        let t = (x - self.start) / self.h;
        let k = t.round();
        if (t - k).abs() > 1e-8 || k < 0.0 || k >= self.n as f64 {
            return None;
        }
        Some(k as usize)
    }
}

fn check_interval(a: f64, b: f64, n: usize) -> Result<()> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::InvalidGrid(format!("bad interval [{a}, {b}]")));
    }
    if n < MIN_POINTS {
        return Err(Error::InvalidGrid(format!("{n} points, need at least {MIN_POINTS}")));
    }
    Ok(())
}

/// Tensor product of 1-D grids carrying `C^N`-valued functions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProductGrid {
    axes: Vec<Grid1D>,
    fiber: usize,
}

impl ProductGrid {
    pub fn new(axes: Vec<Grid1D>, fiber: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidGrid("product grid needs at least one axis".into()));
        }
        if fiber == 0 {
            return Err(Error::InvalidGrid("fiber dimension must be positive".into()));
        }
        Ok(Self { axes, fiber })
    }

    pub fn line(axis: Grid1D) -> Self {
        Self { axes: vec![axis], fiber: 1 }
    }

    pub fn axes(&self) -> &[Grid1D] {
        &self.axes
    }

    pub fn axis(&self, k: usize) -> &Grid1D {
        &self.axes[k]
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn with_fiber(&self, fiber: usize) -> Result<Self> {
        Self::new(self.axes.clone(), fiber)
    }

    pub fn nodes(&self) -> usize {
        self.axes.iter().map(Grid1D::len).product()
    }

    pub fn unknowns(&self) -> usize {
        self.nodes() * self.fiber
    }

    /// Node stride of axis `k` (last axis fastest).
    pub fn stride(&self, k: usize) -> usize {
        self.axes[k + 1..].iter().map(Grid1D::len).product()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi.iter().zip(&self.axes).fold(0, |acc, (&i, g)| acc * g.len() + i)
    }

    pub fn node_multi(&self, mut node: usize) -> Vec<usize> {
        let mut out = vec![0; self.dim()];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            out[k] = node % n;
            node /= n;
        }
        out
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.node_multi(node).iter().zip(&self.axes).map(|(&i, g)| g.point(i)).collect()
    }

    /// Node reached by moving `offset` steps along `axis`.
    pub fn shift(&self, node: usize, axis: usize, offset: isize) -> Option<usize> {
        let n = self.axes[axis].len();
        let s = self.stride(axis);
        let i = (node / s) % n;
        let j = self.axes[axis].shift(i, offset)?;
        Some(node + j * s - i * s)
    }

    /// Product of spacings, the volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Grid1D::spacing).product()
    }

    pub fn same_shape(&self, other: &ProductGrid) -> bool {
        self == other
    }
}

/// Finite-difference weights (unit spacing) for the `deriv`-th derivative at
/// `z` from samples at `nodes`.
pub fn fornberg(deriv: usize, z: f64, nodes: &[f64]) -> Vec<f64> {
    let n = nodes.len();
    let m = deriv;
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Half-width of the centered stencil for derivative `deriv` at accuracy `scheme`.
pub fn stencil_radius(deriv: usize, scheme: usize) -> usize {
    if deriv == 0 {
        return 0;
    }
    (deriv + 1) / 2 - 1 + scheme / 2
}

/// Centered weights for offsets `-r..=r`, unit spacing. Odd derivatives are
/// exactly antisymmetric and even ones annihilate constants exactly.
pub fn centered_weights(deriv: usize, scheme: usize) -> Result<Vec<f64>> {
    check_scheme(scheme)?;
    if deriv == 0 {
        return Ok(vec![1.0]);
    }
    let r = stencil_radius(deriv, scheme) as isize;
    let nodes: Vec<f64> = (-r..=r).map(|k| k as f64).collect();
    let mut w = fornberg(deriv, 0.0, &nodes);
    let len = w.len();
    let r = r as usize;
    for k in 1..=r {
        let (a, b) = (w[r + k], w[r - k]);
        if deriv % 2 == 1 {
            let v = 0.5 * (a - b);
            w[r + k] = v;
            w[r - k] = -v;
        } else {
            let v = 0.5 * (a + b);
            w[r + k] = v;
            w[r - k] = v;
        }
    }
    if deriv % 2 == 1 {
        w[r] = 0.0;
    } else {
        let side: f64 = (1..=r).map(|k| w[r + k]).sum();
        w[r] = -2.0 * side;
    }
    debug_assert_eq!(w.len(), len);
    Ok(w)
}

pub fn check_scheme(scheme: usize) -> Result<()> {
    if scheme == 2 || scheme == 4 {
        Ok(())
    } else {
        Err(Error::UnsupportedScheme(scheme))
    }
}

/// How a stencil treats nodes past the end of a Dirichlet axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Edge {
    /// Values outside the domain are zero (unknown elimination).
    ZeroExtend,
    /// The stencil window slides inward so only in-domain samples are used.
    Biased,
}

/// Applies `d^deriv/dx_axis^deriv` to a grid function with `comps` values per node.
pub fn derivative(
    grid: &ProductGrid,
    axis: usize,
    deriv: usize,
    scheme: usize,
    edge: Edge,
    comps: usize,
    f: &[C64],
) -> Result<Vec<C64>> {
    if deriv == 0 {
        return Ok(f.to_vec());
    }
    let g = grid.axis(axis);
    let r = stencil_radius(deriv, scheme);
    if g.len() < 2 * r + 1 {
        return Err(Error::GridTooSmall { axis, n: g.len(), needed: 2 * r + 1 });
    }
    let w = centered_weights(deriv, scheme)?;
    let scale = g.spacing().powi(deriv as i32);
    let n = g.len();
    let stride = grid.stride(axis) * comps;
    let mut out = vec![C64::new(0.0, 0.0); f.len()];
    let biased_cache: Vec<Vec<f64>> = if edge == Edge::Biased && g.boundary() == Boundary::Dirichlet {
        (0..r)
            .map(|i| {
                let nodes: Vec<f64> = (0..=2 * r).map(|k| k as f64 - i as f64).collect();
                fornberg(deriv, 0.0, &nodes)
            })
            .collect()
    } else {
        Vec::new()
    };
    for (idx, o) in out.iter_mut().enumerate() {
        let i = (idx / stride) % n;
        let base = idx - i * stride;
        let mut acc = C64::new(0.0, 0.0);
        let biased_left = !biased_cache.is_empty() && i < r;
        let biased_right = !biased_cache.is_empty() && i + r >= n;
        if biased_left || biased_right {
            // mirror the left-edge weights for the right edge
            let (win_start, weights, flip) = if biased_left {
                (0usize, &biased_cache[i], false)
            } else {
                (n - 1 - 2 * r, &biased_cache[n - 1 - i], true)
            };
            let sign = if flip && deriv % 2 == 1 { -1.0 } else { 1.0 };
            for k in 0..=2 * r {
                let wk = if flip { weights[2 * r - k] } else { weights[k] };
                acc += f[base + (win_start + k) * stride] * (sign * wk);
            }
        } else {
            for (k, &wk) in w.iter().enumerate() {
                if wk == 0.0 {
                    continue;
                }
                if let Some(j) = g.shift(i, k as isize - r as isize) {
                    acc += f[base + j * stride] * wk;
                }
            }
        }
        *o = acc / scale;
    }
    Ok(out)
}

/// Multi-index `alpha` with one entry per axis.
pub type MultiIndex = Vec<usize>;

/// `N x N` complex matrix field sampled at every node, row-major per node.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffField {
    fiber: usize,
    data: Vec<C64>,
}

impl CoeffField {
    pub fn from_fn(grid: &ProductGrid, f: impl Fn(&[f64]) -> CMat) -> Result<Self> {
        let n = grid.fiber();
        let mut data = Vec::with_capacity(grid.nodes() * n * n);
        for node in 0..grid.nodes() {
            let m = f(&grid.coords(node));
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient is {}x{}, fiber is {n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            for i in 0..n {
                for j in 0..n {
                    data.push(m[(i, j)]);
                }
            }
        }
        Self::from_samples(grid, data)
    }

    /// Scalar coefficient times the fiber identity.
    pub fn scalar_fn(grid: &ProductGrid, f: impl Fn(&[f64]) -> C64) -> Result<Self> {
        let n = grid.fiber();
        Self::from_fn(grid, |x| CMat::identity(n, n) * f(x))
    }

    pub fn constant(grid: &ProductGrid, m: CMat) -> Result<Self> {
        Self::from_fn(grid, |_| m.clone())
    }

    pub fn from_samples(grid: &ProductGrid, data: Vec<C64>) -> Result<Self> {
        let n = grid.fiber();
        if data.len() != grid.nodes() * n * n {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficient samples for {} nodes with fiber {n}",
                data.len(),
                grid.nodes()
            )));
        }
        if data.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidOperator("non-finite coefficient sample".into()));
        }
        Ok(Self { fiber: n, data })
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn samples(&self) -> &[C64] {
        &self.data
    }

    pub fn at(&self, node: usize) -> CMat {
        let n = self.fiber;
        CMat::from_row_slice(n, n, &self.data[node * n * n..(node + 1) * n * n])
    }

    pub fn entry(&self, node: usize, i: usize, j: usize) -> C64 {
        let n = self.fiber;
        self.data[node * n * n + i * n + j]
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let n = self.fiber;
        let mut data = self.data.clone();
        for blk in data.chunks_mut(n * n) {
            let orig = blk.to_vec();
            for i in 0..n {
                for j in 0..n {
                    blk[i * n + j] = orig[j * n + i].conj();
                }
            }
        }
        Self { fiber: n, data }
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|z| *z == C64::new(0.0, 0.0))
    }

    fn scaled_add(&mut self, other: &Self, s: f64) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b * s;
        }
    }

    /// Partial derivative `d^beta` of every entry (biased stencils at Dirichlet edges).
    pub fn differentiate(&self, grid: &ProductGrid, beta: &[usize], scheme: usize) -> Result<Self> {
        let comps = self.fiber * self.fiber;
        let mut data = self.data.clone();
        for (axis, &b) in beta.iter().enumerate() {
            if b > 0 {
                data = derivative(grid, axis, b, scheme, Edge::Biased, comps, &data)?;
            }
        }
        Ok(Self { fiber: self.fiber, data })
    }
}

/// Linear differential expression `sum_alpha a_alpha(x) d^alpha` on a product grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffOp {
    grid: ProductGrid,
    terms: BTreeMap<MultiIndex, CoeffField>,
}

impl DiffOp {
    pub fn new(grid: ProductGrid) -> Self {
        Self { grid, terms: BTreeMap::new() }
    }

    /// Adds (accumulates) the term `a d^alpha`.
    pub fn with_term(mut self, alpha: MultiIndex, coeff: CoeffField) -> Result<Self> {
        self.add_term(alpha, coeff)?;
        Ok(self)
    }

    pub fn add_term(&mut self, alpha: MultiIndex, coeff: CoeffField) -> Result<()> {
        if alpha.len() != self.grid.dim() {
            return Err(Error::DimensionMismatch(format!(
                "multi-index of length {} on a {}-axis grid",
                alpha.len(),
                self.grid.dim()
            )));
        }
        if coeff.fiber() != self.grid.fiber() || coeff.samples().len() != self.grid.nodes() * coeff.fiber().pow(2) {
            return Err(Error::DimensionMismatch("coefficient field does not match grid".into()));
        }
        match self.terms.get_mut(&alpha) {
            Some(existing) => existing.scaled_add(&coeff, 1.0),
            None => {
                self.terms.insert(alpha, coeff);
            }
        }
        Ok(())
    }

    /// `-d^2/dx^2 + q(x)` on a line grid.
    pub fn schrodinger(grid: &Grid1D, q: impl Fn(f64) -> C64) -> Result<Self> {
        let pg = ProductGrid::line(grid.clone());
        let one = CoeffField::scalar_fn(&pg, |_| C64::new(-1.0, 0.0))?;
        let pot = CoeffField::scalar_fn(&pg, |x| q(x[0]))?;
        DiffOp::new(pg).with_term(vec![2], one)?.with_term(vec![0], pot)
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn terms(&self) -> &BTreeMap<MultiIndex, CoeffField> {
        &self.terms
    }

    pub fn coeff(&self, alpha: &[usize]) -> Option<&CoeffField> {
        self.terms.get(alpha)
    }

    /// Total order `n(L)`.
    pub fn order(&self) -> usize {
        self.terms.keys().map(|a| a.iter().sum()).max().unwrap_or(0)
    }

    /// Highest derivative order along each axis.
    pub fn axis_orders(&self) -> Vec<usize> {
        (0..self.grid.dim())
            .map(|k| self.terms.keys().map(|a| a[k]).max().unwrap_or(0))
            .collect()
    }
}

/// Dense operator on flattened grid functions with band metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    mat: CMat,
    lower_bw: usize,
    upper_bw: usize,
    boundary: Vec<Boundary>,
}

impl OperatorMatrix {
    pub fn new(mat: CMat, boundary: Vec<Boundary>) -> Self {
        let (lower_bw, upper_bw) = bandwidths(&mat);
        Self { mat, lower_bw, upper_bw, boundary }
    }

    pub fn from_dense(mat: CMat) -> Self {
        Self::new(mat, Vec::new())
    }

    pub fn identity(n: usize) -> Self {
        Self::from_dense(CMat::identity(n, n))
    }

    pub fn matrix(&self) -> &CMat {
        &self.mat
    }

    pub fn into_matrix(self) -> CMat {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn lower_bandwidth(&self) -> usize {
        self.lower_bw
    }

    pub fn upper_bandwidth(&self) -> usize {
        self.upper_bw
    }

    pub fn bandwidth(&self) -> usize {
        self.lower_bw.max(self.upper_bw)
    }

    pub fn boundary(&self) -> &[Boundary] {
        &self.boundary
    }

    pub fn apply(&self, f: &[C64]) -> Result<Vec<C64>> {
        if f.len() != self.dim() {
            return Err(Error::DimensionMismatch(format!("vector of length {} for operator of size {}", f.len(), self.dim())));
        }
        let v = crate::CVec::from_column_slice(f);
        Ok((&self.mat * v).as_slice().to_vec())
    }

    pub fn adjoint(&self) -> Self {
        Self::new(self.mat.adjoint(), self.boundary.clone())
    }

    pub fn norm(&self) -> f64 {
        self.mat.norm()
    }

    pub fn to_banded(&self) -> BandedMatrix {
        let n = self.dim();
        let (kl, ku) = (self.lower_bw, self.upper_bw);
        let mut diags = Vec::with_capacity(kl + ku + 1);
        for d in -(kl as isize)..=(ku as isize) {
            let len = n - d.unsigned_abs();
            let diag = (0..len)
                .map(|t| {
                    let (i, j) = if d >= 0 { (t, t + d as usize) } else { (t + (-d) as usize, t) };
                    self.mat[(i, j)]
                })
                .collect();
            diags.push(diag);
        }
        BandedMatrix { n, kl, ku, diags, boundary: self.boundary.clone() }
    }
}

/// Diagonal storage `[d_-kl, ..., d_0, ..., d_ku]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedMatrix {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    pub diags: Vec<Vec<C64>>,
    pub boundary: Vec<Boundary>,
}

impl BandedMatrix {
    pub fn to_dense(&self) -> OperatorMatrix {
        let mut m = CMat::zeros(self.n, self.n);
        for (k, diag) in self.diags.iter().enumerate() {
            let d = k as isize - self.kl as isize;
            for (t, &v) in diag.iter().enumerate() {
                let (i, j) = if d >= 0 { (t, t + d as usize) } else { (t + (-d) as usize, t) };
                m[(i, j)] = v;
            }
        }
        OperatorMatrix::new(m, self.boundary.clone())
    }
}

fn bandwidths(m: &CMat) -> (usize, usize) {
    let (mut lo, mut up) = (0, 0);
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)] != C64::new(0.0, 0.0) {
                if i > j {
                    lo = lo.max(i - j);
                } else {
                    up = up.max(j - i);
                }
            }
        }
    }
    (lo, up)
}

/// Flattened bandwidth bound: on each axis the stencil reaches at most
/// `n(L) + scheme - 1` nodes, except that a periodic stencil wraps to the far
/// end of its axis.
pub fn bandwidth_bound(op: &DiffOp, scheme: usize) -> usize {
    let grid = op.grid();
    let n = grid.fiber();
    let reach = op.order() + scheme - 1;
    (0..grid.dim())
        .map(|k| {
            let axis = grid.axis(k);
            let r = match axis.boundary() {
                Boundary::Periodic => axis.len() - 1,
                Boundary::Dirichlet => reach.min(axis.len() - 1),
            };
            grid.stride(k) * n * r
        })
        .max()
        .unwrap_or(0)
        + n
        - 1
}

/// Assembles the finite-difference matrix of `op`.
pub fn discretize(op: &DiffOp, scheme: usize) -> Result<OperatorMatrix> {
    check_scheme(scheme)?;
    let grid = op.grid();
    let orders = op.axis_orders();
    for (k, g) in grid.axes().iter().enumerate() {
        let needed = if orders[k] > 0 { scheme + op.order() } else { 0 };
        let needed = needed.max(2 * stencil_radius(orders[k], scheme) + 1);
        if g.len() < needed {
            return Err(Error::GridTooSmall { axis: k, n: g.len(), needed });
        }
    }
    let nf = grid.fiber();
    let dim = grid.unknowns();
    let mut mat = CMat::zeros(dim, dim);
    for (alpha, coeff) in op.terms() {
        if coeff.is_zero() {
            continue;
        }
        let stencils: Vec<(Vec<f64>, isize, f64)> = alpha
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let w = centered_weights(a, scheme)?;
                let r = stencil_radius(a, scheme) as isize;
                Ok((w, r, grid.axis(k).spacing().powi(a as i32)))
            })
            .collect::<Result<_>>()?;
        let scale: f64 = stencils.iter().map(|s| s.2).product();
        for node in 0..grid.nodes() {
            let a = coeff.at(node);
            // tensor product of per-axis stencils
            let mut entries: Vec<(usize, f64)> = vec![(node, 1.0 / scale)];
            for (k, (w, r, _)) in stencils.iter().enumerate() {
                let mut next = Vec::with_capacity(entries.len() * w.len());
                for &(col, wt) in &entries {
                    for (t, &wk) in w.iter().enumerate() {
                        if wk == 0.0 {
                            continue;
                        }
                        if let Some(c) = grid.shift(col, k, t as isize - r) {
                            next.push((c, wt * wk));
                        }
                    }
                }
                entries = next;
            }
            for (col, wt) in entries {
                for i in 0..nf {
                    for j in 0..nf {
                        mat[(node * nf + i, col * nf + j)] += a[(i, j)] * wt;
                    }
                }
            }
        }
    }
    let boundary = grid.axes().iter().map(Grid1D::boundary).collect();
    Ok(OperatorMatrix::new(mat, boundary))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Coefficient form of `L* = sum (-1)^|alpha| d^alpha (conj(a_alpha)^T .)` by
/// Leibniz expansion; coefficient derivatives use the `scheme` stencils.
pub fn formal_adjoint(op: &DiffOp, scheme: usize) -> Result<DiffOp> {
    check_scheme(scheme)?;
    let grid = op.grid().clone();
    let mut out = DiffOp::new(grid.clone());
    for (alpha, coeff) in op.terms() {
        let adj = coeff.adjoint();
        let sign = if alpha.iter().sum::<usize>() % 2 == 0 { 1.0 } else { -1.0 };
        for beta in sub_indices(alpha) {
            let gamma: Vec<usize> = alpha.iter().zip(&beta).map(|(a, b)| a - b).collect();
            let c: f64 = alpha.iter().zip(&beta).map(|(&a, &b)| binomial(a, b)).product();
            let mut d = adj.differentiate(&grid, &gamma, scheme)?;
            for z in d.data.iter_mut() {
                *z *= sign * c;
            }
            out.add_term(beta, d)?;
        }
    }
    Ok(out)
}

/// All `beta <= alpha` componentwise.
pub fn sub_indices(alpha: &[usize]) -> Vec<MultiIndex> {
    let mut out = vec![Vec::new()];
    for &a in alpha {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..=a).map(move |b| {
                    let mut p = prefix.clone();
                    p.push(b);
                    p
                })
            })
            .collect();
    }
    out
}

pub fn compose(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    same_dim(a, b)?;
    Ok(OperatorMatrix::new(a.matrix() * b.matrix(), merged_boundary(a, b)))
}

pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    same_dim(a, b)?;
    let m = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    Ok(OperatorMatrix::new(m, merged_boundary(a, b)))
}

fn same_dim(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim() != b.dim() || a.matrix().ncols() != b.matrix().ncols() {
        return Err(Error::DimensionMismatch(format!("{} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

fn merged_boundary(a: &OperatorMatrix, b: &OperatorMatrix) -> Vec<Boundary> {
    if a.boundary().is_empty() {
        b.boundary().to_vec()
    } else {
        a.boundary().to_vec()
    }
}

/// Samples a scalar function on every node (fiber 1).
pub fn sample(grid: &ProductGrid, f: impl Fn(&[f64]) -> C64) -> Vec<C64> {
    (0..grid.nodes()).map(|node| f(&grid.coords(node))).collect()
}

/// Multiplication operator `diag(a(x))` as a matrix.
pub fn diag_matrix(values: &[C64]) -> CMat {
    CMat::from_diagonal(&crate::CVec::from_column_slice(values))
}

/// Kronecker product, used for fiber-extended operators.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn centered_weights_match_textbook() {
        assert_eq!(centered_weights(1, 2).unwrap(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(centered_weights(2, 2).unwrap(), vec![1.0, -2.0, 1.0]);
        let w = centered_weights(2, 4).unwrap();
        let expect = [-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        let w = centered_weights(1, 4).unwrap();
        let expect = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_nonuniform_points() {
        let pts = [0.0, 1.0, 2.0, 3.5, 4.0];
        assert!(Grid1D::from_points(&pts, Boundary::Dirichlet).is_err());
        let pts = [0.0, 0.5, 1.0, 1.5, 2.0];
        let g = Grid1D::from_points(&pts, Boundary::Dirichlet).unwrap();
        assert_eq!(g.lower(), -0.5);
        assert!(Grid1D::dirichlet(0.0, 1.0, 4).is_err());
    }

    #[test]
    fn flattening_is_axis_major() {
        let g = ProductGrid::new(
            vec![Grid1D::periodic(0.0, 1.0, 5).unwrap(), Grid1D::periodic(0.0, 1.0, 6).unwrap()],
            2,
        )
        .unwrap();
        assert_eq!(g.node_index(&[1, 2]), 8);
        assert_eq!(g.node_multi(8), vec![1, 2]);
        assert_eq!(g.stride(0), 6);
        assert_eq!(g.shift(8, 1, -3), Some(6 + 5));
        assert_eq!(g.unknowns(), 60);
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let g = Grid1D::periodic(0.0, 1.0, 16).unwrap();
        let pg = ProductGrid::line(g);
        let d = DiffOp::new(pg.clone()).with_term(vec![1], CoeffField::scalar_fn(&pg, |_| c(1.0)).unwrap()).unwrap();
        let m = discretize(&d, 2).unwrap();
        let out = m.apply(&vec![c(1.0); 16]).unwrap();
        assert!(out.iter().all(|z| *z == c(0.0)));
        // the wider stencil cancels only up to rounding in the row sum
        let m = discretize(&d, 4).unwrap();
        let out = m.apply(&vec![c(1.0); 16]).unwrap();
        assert!(out.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn periodic_laplacian_eigenvalue() {
        let n = 32;
        let p = 2.0;
        let g = Grid1D::periodic(0.0, p, n).unwrap();
        let op = DiffOp::schrodinger(&g, |_| c(0.0)).unwrap();
        let m = discretize(&op, 2).unwrap();
        let h = g.spacing();
        for k in 0..4 {
            let f: Vec<C64> =
                g.points().iter().map(|&x| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x / p)).collect();
            let lam = (2.0 - 2.0 * (2.0 * std::f64::consts::PI * k as f64 * h / p).cos()) / (h * h);
            let out = m.apply(&f).unwrap();
            for (a, b) in out.iter().zip(&f) {
                assert!((a - b * lam).norm() < 1e-10 * lam.max(1.0));
            }
        }
    }

    #[test]
    fn multiplication_is_diagonal() {
        let g = Grid1D::dirichlet(0.0, 1.0, 9).unwrap();
        let pg = ProductGrid::line(g.clone());
        let op = DiffOp::new(pg.clone()).with_term(vec![0], CoeffField::scalar_fn(&pg, |x| c(x[0].sin())).unwrap()).unwrap();
        let m = discretize(&op, 4).unwrap();
        assert_eq!(m.bandwidth(), 0);
        for (i, x) in g.points().iter().enumerate() {
            assert_eq!(m.matrix()[(i, i)], c(x.sin()));
        }
    }

    #[test]
    fn banded_roundtrip_is_lossless() {
        let g = Grid1D::dirichlet(0.0, 1.0, 12).unwrap();
        let op = DiffOp::schrodinger(&g, |x| c(x * x)).unwrap();
        let m = discretize(&op, 4).unwrap();
        assert_eq!(m.lower_bandwidth(), 2);
        assert_eq!(m.to_banded().to_dense(), m);
        assert!(m.bandwidth() <= bandwidth_bound(&op, 4));
    }

    #[test]
    fn adjoint_of_first_derivative() {
        let g = Grid1D::periodic(0.0, 1.0, 12).unwrap();
        let pg = ProductGrid::line(g);
        let d = DiffOp::new(pg.clone()).with_term(vec![1], CoeffField::scalar_fn(&pg, |_| c(1.0)).unwrap()).unwrap();
        let a = formal_adjoint(&d, 2).unwrap();
        assert_eq!(a.coeff(&[1]).unwrap().samples()[3], c(-1.0));
        assert!(a.coeff(&[0]).unwrap().samples().iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn commutator_with_position_is_averaging() {
        let g = Grid1D::dirichlet(0.0, 1.0, 10).unwrap();
        let pg = ProductGrid::line(g.clone());
        let d = DiffOp::new(pg.clone()).with_term(vec![1], CoeffField::scalar_fn(&pg, |_| c(1.0)).unwrap()).unwrap();
        let x = DiffOp::new(pg.clone()).with_term(vec![0], CoeffField::scalar_fn(&pg, |x| c(x[0])).unwrap()).unwrap();
        let dm = discretize(&d, 2).unwrap();
        let xm = discretize(&x, 2).unwrap();
        let cm = commutator(&dm, &xm).unwrap();
        for i in 1..9 {
            assert!((cm.matrix()[(i, i - 1)] - c(0.5)).norm() < 1e-12);
            assert!((cm.matrix()[(i, i + 1)] - c(0.5)).norm() < 1e-12);
            assert_eq!(cm.matrix()[(i, i)], c(0.0));
        }
        assert_eq!(commutator(&dm, &dm).unwrap().norm(), 0.0);
    }
}
