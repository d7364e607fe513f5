//! Generalized de Rham complexes `d_L = sum_j dt_j ^ L_j` over product grids,
//! Hodge star, Laplace-Hodge operators, harmonic spaces, Hodge decomposition
//! and Skrypnik period maps.
//!
//! Forms are collocated on grid nodes. The default `L_j = D_j - A_j` uses the
//! forward difference `D_j`, so `d_L^2 = 0` holds as soon as the `L_j`
//! commute; the adjoint `d_L'` is the conjugate transpose, the scalar product
//! carrying the same cell-volume weight in every degree.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{discretize, kron, CoeffField, DiffOp, OperatorMatrix, ProductGrid};
use crate::lagrange::{self, subsets, FormField, SurfaceRegion};
use crate::linalg;
use crate::{CMat, CVec, C64};

/// Pairwise commutators above this (relative) are rejected.
pub const COMMUTE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiffMode {
    Forward,
    Centered,
}

#[derive(Clone, Debug)]
pub struct GenComplex {
    grid: ProductGrid,
    ops: Vec<CMat>,
    connection: Option<Vec<CMat>>,
    d: Vec<CMat>,
}

fn difference(grid: &ProductGrid, axis: usize, mode: DiffMode) -> Result<CMat> {
    match mode {
        DiffMode::Forward => Ok(lagrange::forward_difference(grid, axis)),
        DiffMode::Centered => {
            let mut alpha = vec![0; grid.dim()];
            alpha[axis] = 1;
            let n = grid.fiber();
            let op = DiffOp::new(grid.clone()).with_term(alpha, CoeffField::constant(grid, CMat::identity(n, n))?)?;
            Ok(discretize(&op, 2)?.into_matrix())
        }
    }
}

impl GenComplex {
    /// Ordinary complex, `L_j = D_j` on every fiber component.
    pub fn standard(grid: &ProductGrid) -> Result<Self> {
        let zero = vec![CMat::zeros(grid.fiber(), grid.fiber()); grid.dim()];
        Self::with_connection(grid, zero, DiffMode::Forward)
    }

    /// `L_j = D_j - A_j` with constant fiber matrices `A_j`.
    pub fn with_connection(grid: &ProductGrid, a: Vec<CMat>, mode: DiffMode) -> Result<Self> {
        let nf = grid.fiber();
        if a.len() != grid.dim() || a.iter().any(|m| m.shape() != (nf, nf)) {
            return Err(Error::DimensionMismatch(format!("need {} connection matrices of size {nf}", grid.dim())));
        }
        let eye = CMat::identity(grid.nodes(), grid.nodes());
        let ops = (0..grid.dim())
            .map(|j| Ok(difference(grid, j, mode)? - kron(&eye, &a[j])))
            .collect::<Result<Vec<_>>>()?;
        let mut c = Self::from_operators(grid, ops)?;
        c.connection = Some(a);
        Ok(c)
    }

    /// Arbitrary commuting operators on the unknowns of `grid`.
    pub fn from_operators(grid: &ProductGrid, ops: Vec<CMat>) -> Result<Self> {
        let n = grid.unknowns();
        if ops.len() != grid.dim() || ops.iter().any(|m| m.shape() != (n, n)) {
            return Err(Error::DimensionMismatch(format!("need {} operators of size {n}", grid.dim())));
        }
        let worst = commutator_defect(&ops);
        if worst > COMMUTE_TOL {
            return Err(Error::NonCommuting(worst));
        }
        let d = (0..grid.dim()).map(|k| lagrange::wedge_operator(grid, k, &ops)).collect::<Result<_>>()?;
        Ok(Self { grid: grid.clone(), ops, connection: None, d })
    }

    pub fn grid(&self) -> &ProductGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn operators(&self) -> &[CMat] {
        &self.ops
    }

    pub fn connection(&self) -> Option<&[CMat]> {
        self.connection.as_deref()
    }

    /// Matrix of `d_L` from degree `k` to `k + 1`.
    pub fn d_matrix(&self, k: usize) -> Result<&CMat> {
        self.d
            .get(k)
            .ok_or_else(|| Error::DegreeMismatch(format!("d_L is not defined on degree {k} of {}", self.dim())))
    }

    /// Cell volume, the weight of the scalar product.
    pub fn weight(&self) -> f64 {
        self.grid.cell_volume()
    }

    fn check(&self, beta: &FormField) -> Result<()> {
        if beta.grid() != &self.grid {
            return Err(Error::DimensionMismatch("form lives on a different grid".into()));
        }
        Ok(())
    }
}

/// Largest `||[L_j, L_k]||_F / (||L_j||_F ||L_k||_F)`.
pub fn commutator_defect(ops: &[CMat]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..ops.len() {
        for j in i + 1..ops.len() {
            let scale = linalg::frob(&ops[i]) * linalg::frob(&ops[j]);
            if scale > 0.0 {
                let c = &ops[i] * &ops[j] - &ops[j] * &ops[i];
                worst = worst.max(linalg::frob(&c) / scale);
            }
        }
    }
    worst
}

pub fn d_l(c: &GenComplex, beta: &FormField) -> Result<FormField> {
    c.check(beta)?;
    let d = c.d_matrix(beta.degree())?;
    FormField::from_vector(&c.grid, beta.degree() + 1, (d * beta.to_vector()).as_slice())
}

/// Adjoint `d_L'` from degree `k` to `k - 1`.
pub fn d_l_adjoint(c: &GenComplex, beta: &FormField) -> Result<FormField> {
    c.check(beta)?;
    if beta.degree() == 0 {
        return Err(Error::DegreeMismatch("d_L' is not defined on 0-forms".into()));
    }
    let d = c.d_matrix(beta.degree() - 1)?;
    FormField::from_vector(&c.grid, beta.degree() - 1, (d.adjoint() * beta.to_vector()).as_slice())
}

fn permutation_sign(p: &[usize]) -> f64 {
    let mut s = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                s = -s;
            }
        }
    }
    s
}

/// `*dt_I = sgn(I, J) dt_J` with `J` the complement of `I`.
pub fn hodge_star(c: &GenComplex, beta: &FormField) -> Result<FormField> {
    c.check(beta)?;
    let r = c.dim();
    let k = beta.degree();
    let mut out = FormField::zeros(&c.grid, r - k)?;
    for (idx, i_set) in subsets(r, k).iter().enumerate() {
        let j_set: Vec<usize> = (0..r).filter(|x| !i_set.contains(x)).collect();
        let perm: Vec<usize> = i_set.iter().chain(&j_set).cloned().collect();
        let s = permutation_sign(&perm);
        let dst = out.component_mut(&j_set).expect("complement subset");
        for (o, v) in dst.iter_mut().zip(&beta.components()[idx]) {
            *o = v * s;
        }
    }
    Ok(out)
}

/// `(beta, gamma) = vol * sum_nodes sum_I <beta_I, gamma_I>`.
pub fn scalar_product(c: &GenComplex, beta: &FormField, gamma: &FormField) -> Result<C64> {
    c.check(beta)?;
    c.check(gamma)?;
    if beta.degree() != gamma.degree() {
        return Err(Error::DegreeMismatch(format!("degrees {} and {}", beta.degree(), gamma.degree())));
    }
    let s: C64 = beta.to_vector().iter().zip(gamma.to_vector().iter()).map(|(a, b)| a.conj() * b).sum();
    Ok(s * c.weight())
}

/// `Delta_L = d_L' d_L + d_L d_L'` on degree `k`.
pub fn laplace_hodge(c: &GenComplex, k: usize) -> Result<OperatorMatrix> {
    let r = c.dim();
    if k > r {
        return Err(Error::DegreeMismatch(format!("degree {k} on {r} axes")));
    }
    let size = subsets(r, k).len() * c.grid.unknowns();
    let mut m = CMat::zeros(size, size);
    if k < r {
        let d = c.d_matrix(k)?;
        m += d.adjoint() * d;
    }
    if k > 0 {
        let d = c.d_matrix(k - 1)?;
        m += d * d.adjoint();
    }
    Ok(OperatorMatrix::from_dense(m))
}

/// Null space of `Delta_L` by eigenvalue thresholding.
#[derive(Clone, Debug)]
pub struct HarmonicReport {
    pub degree: usize,
    pub dim: usize,
    /// Smallest retained eigenvalue over the largest rejected one
    /// (infinite when nothing or everything is rejected).
    pub gap: f64,
    pub ambiguous: bool,
    pub threshold: f64,
    pub basis: Vec<FormField>,
}

#[derive(Serialize)]
struct HarmonicSummary {
    degree: usize,
    dim: usize,
    gap: f64,
    ambiguous: bool,
}

impl HarmonicReport {
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::to_value(HarmonicSummary { degree: self.degree, dim: self.dim, gap: self.gap, ambiguous: self.ambiguous })
            .expect("plain struct")
    }

    /// Orthonormal (unweighted) basis as columns.
    pub fn basis_matrix(&self) -> CMat {
        if self.basis.is_empty() {
            return CMat::zeros(0, 0);
        }
        let cols: Vec<CVec> = self.basis.iter().map(FormField::to_vector).collect();
        CMat::from_columns(&cols)
    }
}

pub const GAP_MIN: f64 = 1e4;

pub fn harmonic_space(c: &GenComplex, k: usize, rel_tol: f64) -> Result<HarmonicReport> {
    let lap = laplace_hodge(c, k)?;
    let (vals, vecs) = linalg::hermitian_eigen(lap.matrix());
    let smax = vals.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let threshold = rel_tol * smax;
    let dim = vals.iter().filter(|v| v.abs() <= threshold).count();
    let gap = if dim == 0 || dim == vals.len() {
        f64::INFINITY
    } else {
        vals[dim] / vals[dim - 1].abs().max(f64::MIN_POSITIVE)
    };
    let basis = (0..dim)
        .map(|j| FormField::from_vector(&c.grid, k, vecs.column(j).as_slice()))
        .collect::<Result<_>>()?;
    Ok(HarmonicReport { degree: k, dim, gap, ambiguous: gap < GAP_MIN, threshold, basis })
}

#[derive(Clone, Debug)]
pub struct HodgeParts {
    pub harmonic: FormField,
    pub exact: FormField,
    pub coexact: FormField,
    /// Largest `|(a, b)| / (||a|| ||b||)` over the three pairs.
    pub orthogonality: f64,
    /// `||beta - harmonic - exact - coexact|| / ||beta||`.
    pub reconstruction: f64,
}

/// `beta = h + d_L alpha + d_L' gamma`.
pub fn hodge_decompose(c: &GenComplex, beta: &FormField) -> Result<HodgeParts> {
    c.check(beta)?;
    let k = beta.degree();
    let r = c.dim();
    let b = beta.to_vector();
    let harm = harmonic_space(c, k, 1e-8)?;
    let hb = harm.basis_matrix();
    let h = if harm.dim == 0 { CVec::zeros(b.len()) } else { &hb * (hb.adjoint() * &b) };
    let rest = &b - &h;
    let e = if k > 0 {
        let d = c.d_matrix(k - 1)?;
        d * linalg::lstsq_min_norm(d, &rest, 1e-10)
    } else {
        CVec::zeros(b.len())
    };
    let co = if k < r {
        let da = c.d_matrix(k)?.adjoint();
        &da * linalg::lstsq_min_norm(&da, &rest, 1e-10)
    } else {
        CVec::zeros(b.len())
    };
    let cos = |x: &CVec, y: &CVec| {
        let (nx, ny) = (x.norm(), y.norm());
        if nx == 0.0 || ny == 0.0 {
            0.0
        } else {
            x.dotc(y).norm() / (nx * ny)
        }
    };
    let orthogonality = cos(&h, &e).max(cos(&h, &co)).max(cos(&e, &co));
    let bn = b.norm();
    let resid = (&b - &h - &e - &co).norm();
    let reconstruction = if bn == 0.0 { resid } else { resid / bn };
    let pack = |v: &CVec| FormField::from_vector(&c.grid, k, v.as_slice());
    Ok(HodgeParts { harmonic: pack(&h)?, exact: pack(&e)?, coexact: pack(&co)?, orthogonality, reconstruction })
}

/// Null space of `d_L'` on 0-forms of the dual complex: all `phi` with
/// `L_j^H phi = 0` for every `j`. Columns are orthonormal.
pub fn dual_kernel(c: &GenComplex, rel_tol: f64) -> CMat {
    let n = c.grid.unknowns();
    let r = c.dim();
    let mut stacked = CMat::zeros(r * n, n);
    for (j, l) in c.ops.iter().enumerate() {
        stacked.view_mut((j * n, 0), (n, n)).copy_from(&l.adjoint());
    }
    linalg::null_space(&stacked, rel_tol).0
}

/// `||L_j^H phi||` summed over axes, relative to `||phi||`.
pub fn dual_residual(c: &GenComplex, phi: &[C64]) -> f64 {
    let v = CVec::from_column_slice(phi);
    let r: f64 = c.ops.iter().map(|l| (l.adjoint() * &v).norm_squared()).sum::<f64>().sqrt();
    let nv = v.norm();
    if nv == 0.0 {
        r
    } else {
        r / nv
    }
}

/// Scalar `k`-form `Z_I(x) = <phi(x + e_I), psi_I(x)>`, where `e_I` steps once
/// along every axis of `I`; values past a Dirichlet edge are zero.
pub fn skrypnik_form(c: &GenComplex, phi: &[C64], psi: &FormField) -> Result<FormField> {
    c.check(psi)?;
    let g = &c.grid;
    let nf = g.fiber();
    if phi.len() != g.unknowns() {
        return Err(Error::DimensionMismatch("phi must be a 0-form on the complex grid".into()));
    }
    let scalar = g.with_fiber(1)?;
    let k = psi.degree();
    let mut comps = Vec::new();
    for (idx, set) in subsets(c.dim(), k).iter().enumerate() {
        let src = &psi.components()[idx];
        let mut out = vec![C64::new(0.0, 0.0); g.nodes()];
        for (node, o) in out.iter_mut().enumerate() {
            let mut t = Some(node);
            for &a in set {
                t = t.and_then(|x| g.shift(x, a, 1));
            }
            if let Some(t) = t {
                *o = (0..nf).map(|f| phi[t * nf + f].conj() * src[node * nf + f]).sum();
            }
        }
        comps.push(out);
    }
    FormField::from_components(&scalar, k, comps)
}

/// Period matrix `B[a][b] = int_{cycles[b]} Z[phi, psis[a]]`.
pub fn skrypnik_map(c: &GenComplex, phi: &[C64], psis: &[FormField], cycles: &[SurfaceRegion]) -> Result<CMat> {
    let dres = dual_residual(c, phi);
    if dres > 1e-10 {
        return Err(Error::InvalidOperator(format!("phi is not in the dual kernel (residual {dres:e})")));
    }
    let mut out = CMat::zeros(psis.len(), cycles.len());
    for (a, psi) in psis.iter().enumerate() {
        if psi.degree() < c.dim() {
            let dpsi = d_l(c, psi)?;
            let pn = psi.norm().max(f64::MIN_POSITIVE);
            let hmin = c.grid.axes().iter().map(|g| g.spacing()).fold(f64::INFINITY, f64::min);
            let r = dpsi.norm() * hmin / pn;
            if r > 1e-10 {
                return Err(Error::NotClosed { residual: r });
            }
        }
        let z = skrypnik_form(c, phi, psi)?;
        for (b, cyc) in cycles.iter().enumerate() {
            out[(a, b)] = lagrange::surface_integral(&z, cyc)?;
        }
    }
    Ok(out)
}

/// Section `(1 + h_1 A_1)^{i_1} ... (1 + h_r A_r)^{i_r} v0` annihilated by the
/// forward-difference `d_L` (away from Dirichlet far edges).
pub fn flat_section(c: &GenComplex, v0: &[C64]) -> Result<Vec<C64>> {
    let a = c
        .connection()
        .ok_or_else(|| Error::Unsupported("flat sections need a constant connection".into()))?;
    let g = &c.grid;
    let nf = g.fiber();
    if v0.len() != nf {
        return Err(Error::DimensionMismatch(format!("initial vector of length {} for fiber {nf}", v0.len())));
    }
    let steps: Vec<CMat> = a
        .iter()
        .enumerate()
        .map(|(j, m)| CMat::identity(nf, nf) + m * C64::new(g.axis(j).spacing(), 0.0))
        .collect();
    let v = CVec::from_column_slice(v0);
    let mut out = Vec::with_capacity(g.unknowns());
    for node in 0..g.nodes() {
        let mut w = v.clone();
        for (j, &i) in g.node_multi(node).iter().enumerate() {
            for _ in 0..i {
                w = &steps[j] * w;
            }
        }
        out.extend(w.iter().cloned());
    }
    Ok(out)
}

/// Joint kernel dimension of the connection matrices, `N_flat`.
pub fn joint_kernel_dim(a: &[CMat], rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let n = a[0].nrows();
    let mut stacked = CMat::zeros(a.len() * n, n);
    for (j, m) in a.iter().enumerate() {
        stacked.view_mut((j * n, 0), (n, n)).copy_from(m);
    }
    if linalg::frob(&stacked) == 0.0 {
        return n;
    }
    linalg::null_space(&stacked, rel_tol).0.ncols()
}

/// Brute-force harmonic dimension: null space of `[d_k; d_{k-1}^H]` by SVD.
pub fn harmonic_dim_oracle(c: &GenComplex, k: usize, rel_tol: f64) -> Result<usize> {
    let r = c.dim();
    let size = subsets(r, k).len() * c.grid.unknowns();
    let mut blocks: Vec<CMat> = Vec::new();
    if k < r {
        blocks.push(c.d_matrix(k)?.clone());
    }
    if k > 0 {
        blocks.push(c.d_matrix(k - 1)?.adjoint());
    }
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut m = CMat::zeros(rows, size);
    let mut at = 0;
    for b in blocks {
        m.view_mut((at, 0), (b.nrows(), size)).copy_from(&b);
        at += b.nrows();
    }
    Ok(linalg::null_space(&m, rel_tol).0.ncols())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid1D;

    fn torus(n: usize, fiber: usize) -> ProductGrid {
        let g = Grid1D::periodic(0.0, 1.0, n).unwrap();
        ProductGrid::new(vec![g.clone(), g], fiber).unwrap()
    }

    #[test]
    fn star_signs_in_two_dimensions() {
        let g = torus(5, 1);
        let c = GenComplex::standard(&g).unwrap();
        let mut b = FormField::zeros(&g, 1).unwrap();
        b.component_mut(&[0]).unwrap().iter_mut().for_each(|z| *z = C64::new(1.0, 0.0));
        let s = hodge_star(&c, &b).unwrap();
        assert!(s.component(&[1]).unwrap().iter().all(|z| *z == C64::new(1.0, 0.0)));
        assert!(s.component(&[0]).unwrap().iter().all(|z| *z == C64::new(0.0, 0.0)));
        let ss = hodge_star(&c, &s).unwrap();
        assert_eq!(ss, b.scale(C64::new(-1.0, 0.0)));
    }

    #[test]
    fn cycle_laplacian_kernel_is_constants() {
        let g = ProductGrid::line(Grid1D::periodic(0.0, 1.0, 10).unwrap());
        let c = GenComplex::standard(&g).unwrap();
        let rep = harmonic_space(&c, 0, 1e-8).unwrap();
        assert_eq!(rep.dim, 1);
        assert!(!rep.ambiguous);
    }

    #[test]
    fn torus_betti_numbers() {
        let c = GenComplex::standard(&torus(6, 1)).unwrap();
        let dims: Vec<usize> = (0..=2).map(|k| harmonic_space(&c, k, 1e-8).unwrap().dim).collect();
        assert_eq!(dims, vec![1, 2, 1]);
    }

    #[test]
    fn non_commuting_family_rejected() {
        let g = torus(5, 2);
        let a0 = CMat::from_fn(2, 2, |i, j| C64::new((i + j) as f64, 0.0));
        let a1 = CMat::from_fn(2, 2, |i, j| C64::new(if i == 0 && j == 1 { 1.0 } else { 0.0 }, 0.0));
        assert!(matches!(GenComplex::with_connection(&g, vec![a0, a1], DiffMode::Forward), Err(Error::NonCommuting(_))));
    }
}
