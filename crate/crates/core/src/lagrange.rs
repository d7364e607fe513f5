//! Bilinear concomitants of the generalized Lagrange identity
//! `<L* phi, psi> - <phi, L psi> = sum_i D_i Z_i[phi, psi]`, differential
//! forms on product grids, the discrete exterior derivative, Stokes
//! integration over grid-aligned chains, and primitives of exact forms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::grid::{self, discretize, formal_adjoint, Boundary, DiffOp, Edge, MultiIndex, ProductGrid};
use crate::linalg;
use crate::{CMat, CVec, C64};

/// One summand `sign <d^u_deriv (a_alpha^H phi), d^psi_deriv psi>` of `Z_axis`.
#[derive(Clone, Debug, PartialEq)]
pub struct ZTerm {
    pub axis: usize,
    pub sign: f64,
    pub alpha: MultiIndex,
    pub u_deriv: MultiIndex,
    pub psi_deriv: MultiIndex,
}

/// Concomitant of a differential expression, split among the axes by
/// telescoping each `d^alpha` in axis order (first axis first).
#[derive(Clone, Debug)]
pub struct Concomitant {
    op: DiffOp,
    scheme: usize,
    terms: Vec<ZTerm>,
}

/// Builds the concomitant terms of `op`.
///
/// Writing `d^alpha = d_{k_1} ... d_{k_s}` with `k_1 <= ... <= k_s` and
/// `u = a_alpha^H phi`,
/// `Z_i = - sum_{j : k_{j+1} = i} (-1)^j <d_{k_1..k_j} u, d_{k_{j+2}..k_s} psi>`.
pub fn bilinear_concomitant(op: &DiffOp, scheme: usize) -> Result<Concomitant> {
    grid::check_scheme(scheme)?;
    let m = op.grid().dim();
    let mut terms = Vec::new();
    for alpha in op.terms().keys() {
        let seq: Vec<usize> = alpha.iter().enumerate().flat_map(|(k, &a)| std::iter::repeat_n(k, a)).collect();
        for j in 0..seq.len() {
            let mut u_deriv = vec![0; m];
            for &k in &seq[..j] {
                u_deriv[k] += 1;
            }
            let mut psi_deriv = vec![0; m];
            for &k in &seq[j + 1..] {
                psi_deriv[k] += 1;
            }
            terms.push(ZTerm {
                axis: seq[j],
                sign: if j % 2 == 0 { -1.0 } else { 1.0 },
                alpha: alpha.clone(),
                u_deriv,
                psi_deriv,
            });
        }
    }
    Ok(Concomitant { op: op.clone(), scheme, terms })
}

impl Concomitant {
    pub fn terms(&self) -> &[ZTerm] {
        &self.terms
    }

    pub fn op(&self) -> &DiffOp {
        &self.op
    }

    pub fn scheme(&self) -> usize {
        self.scheme
    }

    fn check(&self, f: &[C64]) -> Result<()> {
        if f.len() != self.op.grid().unknowns() {
            return Err(Error::DimensionMismatch(format!(
                "grid function of length {} on a grid with {} unknowns",
                f.len(),
                self.op.grid().unknowns()
            )));
        }
        Ok(())
    }

    /// Values of `Z_1, ..., Z_m` at every node.
    pub fn components(&self, phi: &[C64], psi: &[C64]) -> Result<Vec<Vec<C64>>> {
        self.check(phi)?;
        self.check(psi)?;
        let grid = self.op.grid();
        let (nodes, nf) = (grid.nodes(), grid.fiber());
        let mut z = vec![vec![C64::new(0.0, 0.0); nodes]; grid.dim()];
        let mut u_cache: BTreeMap<MultiIndex, Vec<C64>> = BTreeMap::new();
        for t in &self.terms {
            if !u_cache.contains_key(&t.alpha) {
                let a = self.op.coeff(&t.alpha).expect("term of op");
                let mut u = vec![C64::new(0.0, 0.0); nodes * nf];
                for node in 0..nodes {
                    for i in 0..nf {
                        let mut s = C64::new(0.0, 0.0);
                        for j in 0..nf {
                            // (a^H phi)_i = sum_j conj(a_ji) phi_j
                            s += a.entry(node, j, i).conj() * phi[node * nf + j];
                        }
                        u[node * nf + i] = s;
                    }
                }
                u_cache.insert(t.alpha.clone(), u);
            }
            let du = partial(grid, &t.u_deriv, self.scheme, nf, &u_cache[&t.alpha])?;
            let dpsi = partial(grid, &t.psi_deriv, self.scheme, nf, psi)?;
            let zi = &mut z[t.axis];
            for node in 0..nodes {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..nf {
                    s += du[node * nf + i].conj() * dpsi[node * nf + i];
                }
                zi[node] += s * t.sign;
            }
        }
        Ok(z)
    }

    /// Centered-stencil divergence `sum_i D_i Z_i`.
    pub fn divergence(&self, z: &[Vec<C64>]) -> Result<Vec<C64>> {
        let grid = self.op.grid();
        let mut out = vec![C64::new(0.0, 0.0); grid.nodes()];
        for (i, zi) in z.iter().enumerate() {
            let d = grid::derivative(grid, i, 1, self.scheme, Edge::ZeroExtend, 1, zi)?;
            for (o, v) in out.iter_mut().zip(d) {
                *o += v;
            }
        }
        Ok(out)
    }

    /// Pointwise `<L* phi, psi> - <phi, L psi> - sum_i D_i Z_i`.
    pub fn identity_residual(&self, phi: &[C64], psi: &[C64]) -> Result<Vec<C64>> {
        let grid = self.op.grid();
        let l = discretize(&self.op, self.scheme)?;
        let ls = discretize(&formal_adjoint(&self.op, self.scheme)?, self.scheme)?;
        let lpsi = l.apply(psi)?;
        let lsphi = ls.apply(phi)?;
        let div = self.divergence(&self.components(phi, psi)?)?;
        let nf = grid.fiber();
        Ok((0..grid.nodes())
            .map(|node| {
                let mut s = C64::new(0.0, 0.0);
                for i in 0..nf {
                    let k = node * nf + i;
                    s += lsphi[k].conj() * psi[k] - phi[k].conj() * lpsi[k];
                }
                s - div[node]
            })
            .collect())
    }
}

fn partial(grid: &ProductGrid, beta: &[usize], scheme: usize, comps: usize, f: &[C64]) -> Result<Vec<C64>> {
    let mut out = f.to_vec();
    for (axis, &b) in beta.iter().enumerate() {
        if b > 0 {
            out = grid::derivative(grid, axis, b, scheme, Edge::ZeroExtend, comps, &out)?;
        }
    }
    Ok(out)
}

/// Nodes at least `width` steps away from every Dirichlet edge.
pub fn interior_mask(grid: &ProductGrid, width: usize) -> Vec<bool> {
    (0..grid.nodes())
        .map(|node| {
            grid.node_multi(node).iter().zip(grid.axes()).all(|(&i, g)| {
                g.boundary() == Boundary::Periodic || (i >= width && i + width < g.len())
            })
        })
        .collect()
}

/// Strictly increasing subsets of `0..m` of size `k`, lexicographic.
pub fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Degree-`k` form: one grid function (fiber `N`) per axis subset of size `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormField {
    grid: ProductGrid,
    degree: usize,
    comps: Vec<Vec<C64>>,
}

impl FormField {
    pub fn zeros(grid: &ProductGrid, degree: usize) -> Result<Self> {
        if degree > grid.dim() {
            return Err(Error::DegreeMismatch(format!("degree {degree} on {} axes", grid.dim())));
        }
        let count = subsets(grid.dim(), degree).len();
        Ok(Self { grid: grid.clone(), degree, comps: vec![vec![C64::new(0.0, 0.0); grid.unknowns()]; count] })
    }

    pub fn from_components(grid: &ProductGrid, degree: usize, comps: Vec<Vec<C64>>) -> Result<Self> {
        let z = Self::zeros(grid, degree)?;
        if comps.len() != z.comps.len() || comps.iter().any(|c| c.len() != grid.unknowns()) {
            return Err(Error::DimensionMismatch(format!(
                "degree-{degree} form needs {} components of length {}",
                z.comps.len(),
                grid.unknowns()
            )));
        }
        Ok(Self { grid: grid.clone(), degree, comps })
    }

    /// Packs a flat vector laid out component after component.
    pub fn from_vector(grid: &ProductGrid, degree: usize, v: &[C64]) -> Result<Self> {
        let n = grid.unknowns();
        let comps: Vec<Vec<C64>> = v.chunks(n).map(<[C64]>::to_vec).collect();
        Self::from_components(grid, degree, comps)
    }

    pub fn to_vector(&self) -> CVec {
        CVec::from_iterator(self.comps.len() * self.grid.unknowns(), self.comps.iter().flatten().cloned())
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn subsets(&self) -> Vec<Vec<usize>> {
        subsets(self.grid.dim(), self.degree)
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub fn component(&self, subset: &[usize]) -> Option<&[C64]> {
        let idx = self.subsets().iter().position(|s| s == subset)?;
        Some(&self.comps[idx])
    }

    pub fn component_mut(&mut self, subset: &[usize]) -> Option<&mut Vec<C64>> {
        let idx = self.subsets().iter().position(|s| s == subset)?;
        Some(&mut self.comps[idx])
    }

    pub fn norm(&self) -> f64 {
        self.comps.iter().flatten().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().flatten().for_each(|z| *z *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (a, b) in out.comps.iter_mut().flatten().zip(other.comps.iter().flatten()) {
            *a += b;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.degree != other.degree || self.grid != other.grid {
            return Err(Error::DegreeMismatch(format!("degree {} vs {}", self.degree, other.degree)));
        }
        Ok(())
    }
}

/// `Z^(m-1)`: the component omitting axis `i` (0-based) is `(-1)^i Z_i`.
pub fn assemble_z_form(c: &Concomitant, phi: &[C64], psi: &[C64]) -> Result<FormField> {
    let z = c.components(phi, psi)?;
    let grid = c.op().grid().with_fiber(1)?;
    let m = grid.dim();
    let mut form = FormField::zeros(&grid, m - 1)?;
    for (i, zi) in z.into_iter().enumerate() {
        let subset: Vec<usize> = (0..m).filter(|&k| k != i).collect();
        let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
        *form.component_mut(&subset).expect("subset of the right size") = zi.into_iter().map(|v| v * sign).collect();
    }
    Ok(form)
}

/// Forward difference `(f(x + h e_axis) - f(x)) / h` as a matrix on unknowns;
/// nodes past a Dirichlet edge contribute zero.
pub fn forward_difference(grid: &ProductGrid, axis: usize) -> CMat {
    let n = grid.unknowns();
    let nf = grid.fiber();
    let h = grid.axis(axis).spacing();
    let mut m = CMat::zeros(n, n);
    for node in 0..grid.nodes() {
        for f in 0..nf {
            m[(node * nf + f, node * nf + f)] -= C64::new(1.0 / h, 0.0);
            if let Some(nb) = grid.shift(node, axis, 1) {
                m[(node * nf + f, nb * nf + f)] += C64::new(1.0 / h, 0.0);
            }
        }
    }
    m
}

/// Matrix of `beta -> sum_j dx_j ^ ops[j] beta` from degree `k` to `k + 1`,
/// with components ordered as in [`subsets`].
pub fn wedge_operator(grid: &ProductGrid, k: usize, ops: &[CMat]) -> Result<CMat> {
    let m = grid.dim();
    if k >= m {
        return Err(Error::DegreeMismatch(format!("degree {k} is top degree or above on {m} axes")));
    }
    if ops.len() != m {
        return Err(Error::DimensionMismatch(format!("{} axis operators for {m} axes", ops.len())));
    }
    let n = grid.unknowns();
    let src = subsets(m, k);
    let dst = subsets(m, k + 1);
    let mut out = CMat::zeros(dst.len() * n, src.len() * n);
    for (r, j_set) in dst.iter().enumerate() {
        for (pos, &j) in j_set.iter().enumerate() {
            let rest: Vec<usize> = j_set.iter().cloned().filter(|&x| x != j).collect();
            let c = src.iter().position(|s| *s == rest).expect("face subset");
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            let mut block = out.view_mut((r * n, c * n), (n, n));
            block += &ops[j] * C64::new(sign, 0.0);
        }
    }
    Ok(out)
}

/// Matrix of the ordinary discrete exterior derivative on degree-`k` forms.
pub fn exterior_derivative_matrix(grid: &ProductGrid, k: usize) -> Result<CMat> {
    let ops: Vec<CMat> = (0..grid.dim()).map(|a| forward_difference(grid, a)).collect();
    wedge_operator(grid, k, &ops)
}

/// Ordinary discrete exterior derivative (forward differences).
pub fn exterior_derivative(form: &FormField) -> Result<FormField> {
    let d = exterior_derivative_matrix(form.grid(), form.degree())?;
    FormField::from_vector(form.grid(), form.degree() + 1, (d * form.to_vector()).as_slice())
}

/// Oriented grid cell: the unit box at `node` spanned by `axes`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Cell {
    pub node: usize,
    pub axes: Vec<usize>,
}

/// Grid-aligned integration domains.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceRegion {
    /// 1-D: the oriented pair `x - x0`, multiplied by `sign`.
    Points { x0: f64, x: f64, sign: f64 },
    /// Integer combination of `dim`-cells.
    Chain { dim: usize, cells: BTreeMap<Cell, i64> },
}

impl SurfaceRegion {
    pub fn points(x0: f64, x: f64) -> Self {
        SurfaceRegion::Points { x0, x, sign: 1.0 }
    }

    pub fn chain(dim: usize, cells: impl IntoIterator<Item = (Cell, i64)>) -> Self {
        let mut map = BTreeMap::new();
        for (c, k) in cells {
            *map.entry(c).or_insert(0) += k;
        }
        map.retain(|_, k| *k != 0);
        SurfaceRegion::Chain { dim, cells: map }
    }

    /// The 2-cells (or general `axes.len()`-cells) of a box of `extent` cells
    /// starting at multi-index `lo`.
    pub fn block(grid: &ProductGrid, lo: &[usize], axes: &[usize], extent: &[usize]) -> Self {
        let mut cells = Vec::new();
        let mut idx = vec![0usize; axes.len()];
        loop {
            let mut multi = lo.to_vec();
            for (t, &a) in axes.iter().enumerate() {
                multi[a] = (lo[a] + idx[t]) % grid.axis(a).len();
            }
            cells.push((Cell { node: grid.node_index(&multi), axes: axes.to_vec() }, 1));
            let mut t = 0;
            while t < axes.len() {
                idx[t] += 1;
                if idx[t] < extent[t] {
                    break;
                }
                idx[t] = 0;
                t += 1;
            }
            if t == axes.len() {
                break;
            }
        }
        Self::chain(axes.len(), cells)
    }

    /// Closed loop once around periodic `axis`, starting at `start`.
    pub fn loop_around(grid: &ProductGrid, axis: usize, start: &[usize]) -> Self {
        let n = grid.axis(axis).len();
        let cells = (0..n).map(|t| {
            let mut multi = start.to_vec();
            multi[axis] = (start[axis] + t) % n;
            (Cell { node: grid.node_index(&multi), axes: vec![axis] }, 1)
        });
        Self::chain(1, cells)
    }

    pub fn dim(&self) -> usize {
        match self {
            SurfaceRegion::Points { .. } => 0,
            SurfaceRegion::Chain { dim, .. } => *dim,
        }
    }

    /// Boundary chain; `None` for a 1-D point pair.
    pub fn boundary(&self, grid: &ProductGrid) -> Result<Option<SurfaceRegion>> {
        let SurfaceRegion::Chain { dim, cells } = self else {
            return Ok(None);
        };
        if *dim == 0 {
            return Ok(Some(SurfaceRegion::chain(0, [])));
        }
        let mut out = Vec::new();
        for (cell, &k) in cells {
            for (r, &a) in cell.axes.iter().enumerate() {
                let face: Vec<usize> = cell.axes.iter().cloned().filter(|&x| x != a).collect();
                let sign = if r % 2 == 0 { 1 } else { -1 };
                let far = grid.shift(cell.node, a, 1).ok_or_else(|| {
                    Error::InvalidGrid(format!("cell at node {} leaves the grid along axis {a}", cell.node))
                })?;
                out.push((Cell { node: far, axes: face.clone() }, sign * k));
                out.push((Cell { node: cell.node, axes: face }, -sign * k));
            }
        }
        Ok(Some(SurfaceRegion::chain(dim - 1, out)))
    }

    pub fn is_empty(&self) -> bool {
        matches!(self, SurfaceRegion::Chain { cells, .. } if cells.is_empty())
    }
}

/// `int_S Z`: point difference in 1-D, cell sums (value times cell volume)
/// for chains. Scalar forms only.
pub fn surface_integral(z: &FormField, s: &SurfaceRegion) -> Result<C64> {
    let grid = z.grid();
    if grid.fiber() != 1 {
        return Err(Error::DimensionMismatch("surface integrals take scalar forms".into()));
    }
    match s {
        SurfaceRegion::Points { x0, x, sign } => {
            if grid.dim() != 1 || z.degree() != 0 {
                return Err(Error::DegreeMismatch(format!(
                    "point pair needs a degree-0 form on a line, got degree {} on {} axes",
                    z.degree(),
                    grid.dim()
                )));
            }
            let g = grid.axis(0);
            let vals = &z.components()[0];
            let at = |p: f64| -> Result<C64> {
                if let Some(i) = g.index_of(p) {
                    return Ok(vals[i]);
                }
                let on_edge = (p - g.lower()).abs() < 1e-9 * g.spacing() || (p - g.upper()).abs() < 1e-9 * g.spacing();
                if g.boundary() == Boundary::Dirichlet && on_edge {
                    Ok(C64::new(0.0, 0.0))
                } else {
                    Err(Error::InvalidGrid(format!("{p} is not a grid point")))
                }
            };
            Ok((at(*x)? - at(*x0)?) * *sign)
        }
        SurfaceRegion::Chain { dim, cells } => {
            if *dim != z.degree() {
                return Err(Error::DegreeMismatch(format!("{dim}-chain against a degree-{} form", z.degree())));
            }
            let mut total = C64::new(0.0, 0.0);
            for (cell, &k) in cells {
                let comp = z
                    .component(&cell.axes)
                    .ok_or_else(|| Error::DegreeMismatch(format!("no component {:?}", cell.axes)))?;
                let vol: f64 = cell.axes.iter().map(|&a| grid.axis(a).spacing()).product();
                total += comp[cell.node] * (k as f64 * vol);
            }
            Ok(total)
        }
    }
}

/// Minimum-norm `omega` with `d omega = z`.
pub fn primitive(z: &FormField) -> Result<FormField> {
    let grid = z.grid();
    if grid.dim() < 2 {
        return Err(Error::Unsupported("primitives need at least two axes".into()));
    }
    if z.degree() == 0 {
        return Err(Error::DegreeMismatch("a 0-form has no primitive".into()));
    }
    let zn = z.norm();
    if zn == 0.0 {
        return FormField::zeros(grid, z.degree() - 1);
    }
    let hmin = grid.axes().iter().map(|g| g.spacing()).fold(f64::INFINITY, f64::min);
    if z.degree() < grid.dim() {
        let dz = exterior_derivative(z)?;
        let r = dz.norm() * hmin / 2.0;
        if r > 1e-10 * zn {
            return Err(Error::NotClosed { residual: r / zn });
        }
    }
    let d = exterior_derivative_matrix(grid, z.degree() - 1)?;
    let b = z.to_vector();
    let x = linalg::lstsq_min_norm(&d, &b, 1e-12);
    let res = (&d * &x - &b).norm() / zn;
    if res > 1e-10 {
        return Err(Error::NoSolution { residual: res });
    }
    FormField::from_vector(grid, z.degree() - 1, x.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CoeffField, Grid1D};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn line(n: usize) -> ProductGrid {
        ProductGrid::line(Grid1D::periodic(0.0, 2.0 * std::f64::consts::PI, n).unwrap())
    }

    #[test]
    fn first_derivative_concomitant() {
        let g = line(32);
        let op = DiffOp::new(g.clone()).with_term(vec![1], CoeffField::scalar_fn(&g, |_| c(1.0)).unwrap()).unwrap();
        let cc = bilinear_concomitant(&op, 2).unwrap();
        let phi = grid::sample(&g, |x| C64::new(x[0].sin(), x[0].cos()));
        let psi = grid::sample(&g, |x| c(x[0].cos() + 2.0));
        let z = cc.components(&phi, &psi).unwrap();
        for k in 0..32 {
            assert!((z[0][k] + phi[k].conj() * psi[k]).norm() < 1e-14);
        }
    }

    #[test]
    fn schrodinger_concomitant_is_the_wronskian() {
        // <L* phi, psi> - <phi, L psi> = (conj(phi) psi' - conj(phi)' psi)'
        let g = ProductGrid::line(Grid1D::periodic(0.0, std::f64::consts::TAU, 400).unwrap());
        let op = DiffOp::schrodinger(g.axis(0), |x| c(x.cos())).unwrap();
        let cc = bilinear_concomitant(&op, 2).unwrap();
        let phi = grid::sample(&g, |x| C64::new(x[0].sin(), x[0].cos()));
        let psi = grid::sample(&g, |x| c((2.0 * x[0]).cos()));
        let z = cc.components(&phi, &psi).unwrap();
        for (k, x) in g.axis(0).points().into_iter().enumerate() {
            let (p, dp) = (C64::new(x.sin(), x.cos()), C64::new(x.cos(), -x.sin()));
            let (q, dq) = (c((2.0 * x).cos()), c(-2.0 * (2.0 * x).sin()));
            let w = p.conj() * dq - dp.conj() * q;
            assert!((z[0][k] - w).norm() < 1e-3, "node {k}: {} vs {w}", z[0][k]);
        }
    }

    #[test]
    fn multiplication_has_no_concomitant() {
        let g = line(16);
        let op = DiffOp::new(g.clone()).with_term(vec![0], CoeffField::scalar_fn(&g, |x| c(x[0].cos())).unwrap()).unwrap();
        let cc = bilinear_concomitant(&op, 2).unwrap();
        assert!(cc.terms().is_empty());
        let f = grid::sample(&g, |x| c(x[0]));
        assert!(cc.components(&f, &f).unwrap()[0].iter().all(|z| *z == c(0.0)));
    }

    #[test]
    fn subsets_are_lexicographic() {
        assert_eq!(subsets(3, 2), vec![vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(subsets(2, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn boundary_of_boundary_is_empty() {
        let g = ProductGrid::new(vec![Grid1D::periodic(0.0, 1.0, 6).unwrap(); 3], 1).unwrap();
        let s = SurfaceRegion::block(&g, &[1, 0, 2], &[0, 1, 2], &[2, 3, 1]);
        let b = s.boundary(&g).unwrap().unwrap();
        let bb = b.boundary(&g).unwrap().unwrap();
        assert!(bb.is_empty());
        assert!(!b.is_empty());
    }
}
