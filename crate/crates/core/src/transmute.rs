//! Delsarte transmutation operators of Volterra type on a line.
//!
//! For families `psi_mu`, `phi_lambda` on the grid the kernel
//! `Omega_x(lambda, mu) = Omega_{x0} + sum_{y in (x0, x]} h phi_lambda(y)^H psi_mu(y)`
//! drives everything: the transformed functions `psi~ = psi Omega^{-1} Omega_{x0}`,
//! the triangular operators `Omega_+` (lower) and `Omega_-` (upper), their
//! closed-form inverses, and conjugated operators `L~ = Omega L Omega^{-1}`.
//!
//! Kernels are assembled in double-double arithmetic. Transformed operators
//! have entries many orders of magnitude above those of `L`, so residuals
//! and spectra are also evaluated against the double-double shadow.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Boundary, Grid1D, OperatorMatrix};
use crate::linalg::dd::{self, Cdd, CddMat};
use crate::linalg;
use crate::spectral::{EigenFamily, KernelDomain, SpectralKernel};
use crate::{CMat, C64};

/// Largest condition number accepted for any inversion.
pub const COND_LIMIT: f64 = 1e10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Forward,
    Adjoint,
}

/// Source families on a 1-D grid with `fiber` components per node.
///
/// `psi` and `phi` are `(n * fiber) x r`; column `k` is the function for
/// parameter `lambdas[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TransmutationData {
    grid: Grid1D,
    fiber: usize,
    lambdas: Vec<C64>,
    psi: CMat,
    phi: CMat,
    omega0: CMat,
    omega0_adj: CMat,
    weights: Vec<f64>,
}

impl TransmutationData {
    pub fn new(grid: Grid1D, fiber: usize, lambdas: Vec<C64>, psi: CMat, phi: CMat) -> Result<Self> {
        let r = lambdas.len();
        let rows = grid.len() * fiber;
        if psi.shape() != (rows, r) || phi.shape() != (rows, r) {
            return Err(Error::DimensionMismatch(format!(
                "families must be {rows}x{r}, got psi {:?} and phi {:?}",
                psi.shape(),
                phi.shape()
            )));
        }
        if psi.iter().chain(phi.iter()).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidOperator("non-finite family values".into()));
        }
        Ok(Self {
            grid,
            fiber,
            lambdas,
            psi,
            phi,
            omega0: CMat::identity(r, r),
            omega0_adj: CMat::identity(r, r),
            weights: vec![1.0; r],
        })
    }

    /// Data from an eigenfamily: `psi` = right vectors, `phi` = left vectors.
    pub fn from_family(grid: Grid1D, fiber: usize, fam: &EigenFamily) -> Result<Self> {
        let mut d = Self::new(grid, fiber, fam.lambdas().to_vec(), fam.right().clone(), fam.left().clone())?;
        d.weights = fam.weights().to_vec();
        Ok(d)
    }

    pub fn empty(grid: Grid1D, fiber: usize) -> Self {
        let rows = grid.len() * fiber;
        Self::new(grid, fiber, Vec::new(), CMat::zeros(rows, 0), CMat::zeros(rows, 0)).expect("empty data")
    }

    /// Replaces the base values `Omega_{x0}` and `Omega^*_{x0}`.
    pub fn with_base(mut self, omega0: CMat, omega0_adj: CMat) -> Result<Self> {
        let r = self.len();
        if omega0.shape() != (r, r) || omega0_adj.shape() != (r, r) {
            return Err(Error::DimensionMismatch(format!("base values must be {r}x{r}")));
        }
        check_cond(&omega0, "Omega_x0")?;
        check_cond(&omega0_adj, "adjoint Omega_x0")?;
        self.omega0 = omega0;
        self.omega0_adj = omega0_adj;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn dim(&self) -> usize {
        self.grid.len() * self.fiber
    }

    pub fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    pub fn psi(&self) -> &CMat {
        &self.psi
    }

    pub fn phi(&self) -> &CMat {
        &self.phi
    }

    pub fn omega0(&self) -> &CMat {
        &self.omega0
    }

    pub fn omega0_adj(&self) -> &CMat {
        &self.omega0_adj
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Roles of `psi` and `phi` exchanged, base values adjoint-side.
    fn adjoint_side(&self) -> Self {
        Self {
            psi: self.phi.clone(),
            phi: self.psi.clone(),
            omega0: self.omega0_adj.clone(),
            omega0_adj: self.omega0.clone(),
            ..self.clone()
        }
    }

    fn side(&self, side: Side) -> Self {
        match side {
            Side::Forward => self.clone(),
            Side::Adjoint => self.adjoint_side(),
        }
    }

    fn block(m: &CMat, node: usize, fiber: usize) -> CddMat {
        CddMat::from_cmat(&m.rows(node * fiber, fiber).into_owned())
    }

    /// Prefix values `P_0 = Omega_{x0}`, `P_{i+1} = P_i + h phi_i^H psi_i`, in
    /// double-double; `P_i` is the kernel at the node before `i`.
    fn prefix(&self) -> Vec<CddMat> {
        let (n, nf, h) = (self.grid.len(), self.fiber, self.grid.spacing());
        let mut out = Vec::with_capacity(n + 1);
        let mut acc = CddMat::from_cmat(&self.omega0);
        out.push(acc.clone());
        for i in 0..n {
            let p = Self::block(&self.psi, i, nf);
            let f = Self::block(&self.phi, i, nf);
            let g = adjoint_dd(&f).mul(&p);
            for (a, b) in acc.data.iter_mut().zip(&g.data) {
                *a += b.scale(h);
            }
            out.push(acc.clone());
        }
        out
    }

    fn locate(&self, x: f64) -> Result<usize> {
        // position in prefix(): 0 is the lower edge, i + 1 is node i
        if self.grid.boundary() == Boundary::Dirichlet && (x - self.grid.lower()).abs() <= 1e-9 * self.grid.spacing() {
            return Ok(0);
        }
        if self.grid.boundary() == Boundary::Periodic && (x - self.grid.lower()).abs() <= 1e-9 * self.grid.spacing() {
            return Ok(1);
        }
        self.grid
            .index_of(x)
            .map(|i| i + 1)
            .ok_or_else(|| Error::InvalidGrid(format!("{x} is not a grid point")))
    }
}

fn adjoint_dd(m: &CddMat) -> CddMat {
    let mut t = m.transpose();
    t.data.iter_mut().for_each(|z| *z = z.conj());
    t
}

fn cond(m: &CMat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = linalg::singular_values(m);
    let smin = *s.last().unwrap();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

fn check_cond(m: &CMat, step: &str) -> Result<f64> {
    let c = cond(m);
    if !(c <= COND_LIMIT) {
        return Err(Error::IllConditioned { step: step.into(), cond: c });
    }
    Ok(c)
}

fn invert_small(m: &CddMat, x: f64) -> Result<CddMat> {
    let c = cond(&m.to_cmat());
    if !(c <= COND_LIMIT) {
        return Err(Error::SingularOmega { x });
    }
    dd::solve_small(m, &CddMat::identity(m.rows)).ok_or(Error::SingularOmega { x })
}

/// `Omega_x` relative to base point `x0` (both grid points, or the lower edge
/// of a Dirichlet grid). Returns `Omega_{x0}` itself when `x == x0`.
pub fn build_kernel_omega(data: &TransmutationData, x: f64, x0: f64) -> Result<SpectralKernel> {
    let (i, i0) = (data.locate(x)?, data.locate(x0)?);
    if i == i0 {
        return SpectralKernel::new(KernelDomain::SpectrumBySpectrum, data.omega0.clone(), format!("Omega at x0 = {x0}"));
    }
    let p = data.prefix();
    let base = &p[0];
    let diff = p[i].sub(&p[i0]);
    let mut out = base.clone();
    for (a, b) in out.data.iter_mut().zip(&diff.data) {
        *a += *b;
    }
    SpectralKernel::new(KernelDomain::SpectrumBySpectrum, out.to_cmat(), format!("Omega at x = {x} from x0 = {x0}"))
}

/// `psi~(lambda_k)` at every node, plus side: `psi_i P_i^{-1} Omega_{x0}`.
pub fn delsarte_apply(data: &TransmutationData, k: usize) -> Result<Vec<C64>> {
    let t = transformed_family(data, Sign::Plus, Side::Forward)?;
    if k >= data.len() {
        return Err(Error::DimensionMismatch(format!("parameter index {k} of {}", data.len())));
    }
    Ok(t.column(k).iter().cloned().collect())
}

/// Transformed family for either sign and side:
/// plus `psi_i P_i^{-1} W_0`, minus `psi_i P_{i+1}^{-1} W_1`, with `W_0` the
/// base value and `W_1 = W_0 + G` the kernel at the far end.
pub fn transformed_family(data: &TransmutationData, sign: Sign, side: Side) -> Result<CMat> {
    let d = data.side(side);
    let (n, nf, r) = (d.grid.len(), d.fiber, d.len());
    let p = d.prefix();
    let w = match sign {
        Sign::Plus => p[0].clone(),
        Sign::Minus => p[n].clone(),
    };
    let mut out = CMat::zeros(n * nf, r);
    for i in 0..n {
        let pk = match sign {
            Sign::Plus => &p[i],
            Sign::Minus => &p[i + 1],
        };
        let inv = invert_small(pk, d.grid.point(i))?;
        let row = TransmutationData::block(&d.psi, i, nf).mul(&inv).mul(&w).to_cmat();
        out.rows_mut(i * nf, nf).copy_from(&row);
    }
    Ok(out)
}

/// One-soliton data on a free Dirichlet grid: the exact discrete solution
/// `psi = c (e^{kappa x} - e^{kappa (2a - x)})` of `-D^2 psi = lambda psi`
/// vanishing at the left exterior node `a`, with
/// `lambda = -(2 cosh(kappa h) - 2) / h^2` and `c^2 = (e^{2 kappa h} - 1) / h`
/// so that the dressed potential is centred at the origin.
pub fn soliton_data(grid: &Grid1D, kappa: f64) -> Result<TransmutationData> {
    if grid.boundary() != Boundary::Dirichlet {
        return Err(Error::InvalidGrid("soliton data needs a Dirichlet grid".into()));
    }
    if !(kappa > 0.0) {
        return Err(Error::InvalidSeed(format!("kappa must be positive, got {kappa}")));
    }
    let (h, a) = (grid.spacing(), grid.lower());
    let c = ((2.0 * kappa * h).exp_m1() / h).sqrt();
    let psi = CMat::from_fn(grid.len(), 1, |i, _| {
        let x = grid.point(i);
        C64::new(c * ((kappa * x).exp() - (kappa * (2.0 * a - x)).exp()), 0.0)
    });
    let lambda = -(2.0 * (kappa * h).cosh() - 2.0) / (h * h);
    TransmutationData::new(grid.clone(), 1, vec![C64::new(lambda, 0.0)], psi.clone(), psi)
}

/// Triangular transmutation operator `1 + K` with its inverse.
#[derive(Clone, Debug)]
pub struct DelsarteOp {
    pub sign: Sign,
    pub side: Side,
    pub x0: f64,
    kernel: SpectralKernel,
    full: OperatorMatrix,
    full_dd: CddMat,
    inverse_dd: CddMat,
    fiber: usize,
    cond: f64,
}

impl DelsarteOp {
    /// Volterra kernel `K`.
    pub fn kernel(&self) -> &SpectralKernel {
        &self.kernel
    }

    /// `1 + K`.
    pub fn matrix(&self) -> &OperatorMatrix {
        &self.full
    }

    pub fn matrix_dd(&self) -> &CddMat {
        &self.full_dd
    }

    pub fn inverse_dd(&self) -> &CddMat {
        &self.inverse_dd
    }

    pub fn inverse_matrix(&self) -> CMat {
        self.inverse_dd.to_cmat()
    }

    pub fn dim(&self) -> usize {
        self.full_dd.rows
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn condition_number(&self) -> f64 {
        self.cond
    }

    pub fn is_lower(&self) -> bool {
        self.sign == Sign::Plus
    }

    /// `||Omega^{-1} Omega - 1||_F`, evaluated in double-double.
    pub fn inverse_residual(&self) -> f64 {
        let prod = self.inverse_dd.mul(&self.full_dd);
        prod.sub(&CddMat::identity(self.dim())).frobenius()
    }

    /// Whether every kernel block on the wrong side of (or on) the block
    /// diagonal is exactly zero.
    pub fn has_exact_support(&self) -> bool {
        let k = &self.kernel.values;
        let nf = self.fiber;
        (0..k.nrows()).all(|i| {
            (0..k.ncols()).all(|j| {
                let (bi, bj) = (i / nf, j / nf);
                let inside = match self.sign {
                    Sign::Plus => bj < bi,
                    Sign::Minus => bj > bi,
                };
                inside || k[(i, j)] == C64::new(0.0, 0.0)
            })
        })
    }

    /// Largest eigenvalue modulus of `K` relative to `||K||_F` (0 for `K = 0`).
    pub fn volterra_radius(&self) -> Result<f64> {
        volterra_radius(&self.kernel.values, self.fiber)
    }
}

/// Spectral radius of a kernel matrix relative to its Frobenius norm. Exactly
/// block-triangular kernels have the spectrum of their diagonal blocks.
pub fn volterra_radius(k: &CMat, fiber: usize) -> Result<f64> {
    let norm = linalg::frob(k);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let nb = k.nrows() / fiber;
    let zero = C64::new(0.0, 0.0);
    let lower = (0..k.nrows()).all(|i| ((i / fiber + 1) * fiber..k.ncols()).all(|j| k[(i, j)] == zero));
    let upper = (0..k.nrows()).all(|i| (0..(i / fiber) * fiber).all(|j| k[(i, j)] == zero));
    let eigs: Vec<C64> = if lower || upper {
        let mut v = Vec::new();
        for b in 0..nb {
            let blk = k.view((b * fiber, b * fiber), (fiber, fiber)).into_owned();
            v.extend(linalg::eigenvalues(&blk)?);
        }
        v
    } else {
        linalg::eigenvalues(k)?
    };
    Ok(eigs.iter().map(|z| z.norm()).fold(0.0, f64::max) / norm)
}

/// Kernels `K` of `Omega` and `M` of `Omega^{-1}` (both `dim x dim`, DD).
///
/// Plus:  `K_ij = -h psi_i P_i^{-1} phi_j^H`, `M_ij = h psi_i P_{j+1}^{-1} phi_j^H` (j < i).
/// Minus: `K_ij = h psi_i P_{i+1}^{-1} phi_j^H`, `M_ij = -h psi_i P_j^{-1} phi_j^H` (j > i).
fn kernels(d: &TransmutationData, sign: Sign) -> Result<(CddMat, CddMat)> {
    let (n, nf, h) = (d.grid.len(), d.fiber, d.grid.spacing());
    let dim = n * nf;
    let mut k = CddMat::zeros(dim, dim);
    let mut m = CddMat::zeros(dim, dim);
    if d.is_empty() {
        return Ok((k, m));
    }
    let p = d.prefix();
    let mut inv = Vec::with_capacity(n + 1);
    for (i, pi) in p.iter().enumerate() {
        let x = if i == 0 { d.grid.lower() } else { d.grid.point(i - 1) };
        inv.push(invert_small(pi, x)?);
    }
    let psi: Vec<CddMat> = (0..n).map(|i| TransmutationData::block(&d.psi, i, nf)).collect();
    let phi_h: Vec<CddMat> = (0..n).map(|i| adjoint_dd(&TransmutationData::block(&d.phi, i, nf))).collect();
    // row factors for K, column factors for M
    let (rk, cm): (Vec<CddMat>, Vec<CddMat>) = match sign {
        Sign::Plus => (
            (0..n).map(|i| psi[i].mul(&inv[i])).collect(),
            (0..n).map(|j| inv[j + 1].mul(&phi_h[j])).collect(),
        ),
        Sign::Minus => (
            (0..n).map(|i| psi[i].mul(&inv[i + 1])).collect(),
            (0..n).map(|j| inv[j].mul(&phi_h[j])).collect(),
        ),
    };
    let (sk, sm) = match sign {
        Sign::Plus => (-h, h),
        Sign::Minus => (h, -h),
    };
    for i in 0..n {
        let cols: Box<dyn Iterator<Item = usize>> = match sign {
            Sign::Plus => Box::new(0..i),
            Sign::Minus => Box::new(i + 1..n),
        };
        for j in cols {
            let kb = rk[i].mul(&phi_h[j]);
            let mb = psi[i].mul(&cm[j]);
            for a in 0..nf {
                for b in 0..nf {
                    k.set(i * nf + a, j * nf + b, kb.get(a, b).scale(sk));
                    m.set(i * nf + a, j * nf + b, mb.get(a, b).scale(sm));
                }
            }
        }
    }
    Ok((k, m))
}

fn plus_identity(k: &CddMat) -> CddMat {
    let mut out = k.clone();
    for i in 0..k.rows {
        let v = out.get(i, i) + Cdd::ONE;
        out.set(i, i, v);
    }
    out
}

fn make_op(data: &TransmutationData, sign: Sign, side: Side, k: CddMat, m: CddMat) -> Result<DelsarteOp> {
    let full_dd = plus_identity(&k);
    let inverse_dd = plus_identity(&m);
    let full = OperatorMatrix::from_dense(full_dd.to_cmat());
    let c = if data.is_empty() { 1.0 } else { check_cond(full.matrix(), "Omega")? };
    let x0 = match sign {
        Sign::Plus => data.grid.lower(),
        Sign::Minus => data.grid.upper(),
    };
    Ok(DelsarteOp {
        sign,
        side,
        x0,
        kernel: SpectralKernel::new(KernelDomain::GridByGrid, k.to_cmat(), format!("{sign:?} {side:?} Volterra kernel"))?,
        full,
        full_dd,
        inverse_dd,
        fiber: data.fiber,
        cond: c,
    })
}

/// `Omega_+` (lower triangular) or `Omega_-` (upper triangular).
pub fn delsarte_operator(data: &TransmutationData, sign: Sign, side: Side) -> Result<DelsarteOp> {
    let d = data.side(side);
    let (k, m) = kernels(&d, sign)?;
    make_op(&d, sign, side, k, m)
}

/// `Omega_{+/-}^{-1}`, itself identity plus a Volterra kernel of the same
/// triangular type.
pub fn delsarte_inverse(data: &TransmutationData, sign: Sign, side: Side) -> Result<DelsarteOp> {
    let d = data.side(side);
    let (k, m) = kernels(&d, sign)?;
    make_op(&d, sign, side, m, k)
}

/// `Omega L Omega^{-1}` in double-double.
pub fn transform_operator_dd(l: &OperatorMatrix, om: &DelsarteOp) -> Result<CddMat> {
    if l.dim() != om.dim() {
        return Err(Error::DimensionMismatch(format!("operator {} vs transmutation {}", l.dim(), om.dim())));
    }
    let ldd = CddMat::from_cmat(l.matrix());
    Ok(om.full_dd.mul(&ldd).mul(&om.inverse_dd))
}

/// `L~ = Omega L Omega^{-1}`, rounded to double.
pub fn transform_operator(l: &OperatorMatrix, om: &DelsarteOp) -> Result<OperatorMatrix> {
    Ok(OperatorMatrix::from_dense(transform_operator_dd(l, om)?.to_cmat()))
}

/// `||L~ Omega - Omega L||_F / ||Omega L||_F` for the given (double) `L~`,
/// with products accumulated in double-double.
pub fn intertwining_residual(ltil: &OperatorMatrix, om: &DelsarteOp, l: &OperatorMatrix) -> Result<f64> {
    if ltil.dim() != om.dim() || l.dim() != om.dim() {
        return Err(Error::DimensionMismatch("intertwining operands differ in size".into()));
    }
    let lt = CddMat::from_cmat(ltil.matrix());
    let ld = CddMat::from_cmat(l.matrix());
    let right = om.full_dd.mul(&ld);
    let left = lt.mul(&om.full_dd);
    let denom = right.frobenius();
    Ok(if denom == 0.0 { left.sub(&right).frobenius() } else { left.sub(&right).frobenius() / denom })
}

/// Off-band Frobenius mass ratio over rows at least `edge` away from either
/// end: `||off-band||_F / ||L~||_F`, both restricted to those rows.
pub fn locality_check(ltil: &OperatorMatrix, bandwidth: usize, edge: usize) -> f64 {
    let m = ltil.matrix();
    let n = m.nrows();
    let (mut off, mut all) = (0.0, 0.0);
    for i in edge..n.saturating_sub(edge) {
        for j in 0..n {
            let v = m[(i, j)].norm_sqr();
            all += v;
            if i.abs_diff(j) > bandwidth {
                off += v;
            }
        }
    }
    if all == 0.0 {
        0.0
    } else {
        (off / all).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndependenceReport {
    /// `||L~_+ - L~_-||_F / ||L~_+||_F`.
    pub relative_difference: f64,
    /// Same, restricted to rows at least `edge` from either end.
    pub interior_difference: f64,
    /// `||[Omega_+^{-1} Omega_-, L]||_F / (||Omega_+^{-1} Omega_-||_F ||L||_F)`.
    pub commutator: f64,
}

/// Compares the plus and minus transmutations of `l` built from the same data.
pub fn independence_check(data: &TransmutationData, l: &OperatorMatrix, edge: usize) -> Result<IndependenceReport> {
    let plus = delsarte_operator(data, Sign::Plus, Side::Forward)?;
    let minus = delsarte_operator(data, Sign::Minus, Side::Forward)?;
    let lp = transform_operator(l, &plus)?;
    let lm = transform_operator(l, &minus)?;
    let diff = lp.matrix() - lm.matrix();
    let denom = linalg::frob(lp.matrix());
    let n = diff.nrows();
    let rows = edge..n.saturating_sub(edge);
    let interior = |m: &CMat| m.rows(rows.start, rows.len()).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let ratio = |a: f64, b: f64| if b == 0.0 { a } else { a / b };
    let s = plus.inverse_matrix() * minus.matrix().matrix();
    let lm_ = l.matrix();
    let comm = &s * lm_ - lm_ * &s;
    Ok(IndependenceReport {
        relative_difference: ratio(linalg::frob(&diff), denom),
        interior_difference: ratio(interior(&diff), interior(lp.matrix())),
        commutator: ratio(linalg::frob(&comm), linalg::frob(&s) * linalg::frob(lm_)),
    })
}

/// `||(Omega L Omega^{-1})^H - Omega^* L^H Omega^{*,-1}||_F / ||L||_F`.
pub fn adjoint_compat_check(data: &TransmutationData, l: &OperatorMatrix, sign: Sign) -> Result<f64> {
    let fwd = delsarte_operator(data, sign, Side::Forward)?;
    let adj = delsarte_operator(data, sign, Side::Adjoint)?;
    let a = transform_operator(l, &fwd)?.matrix().adjoint();
    let b = transform_operator(&l.adjoint(), &adj)?;
    let norm = l.norm();
    let r = linalg::frob(&(a - b.matrix()));
    Ok(if norm == 0.0 { r } else { r / norm })
}

/// Conjugates every member of a commuting family and reports the largest
/// pairwise `||[L~_i, L~_j]||_F / (||L_i||_F ||L_j||_F)`.
pub fn transform_family(ls: &[OperatorMatrix], om: &DelsarteOp) -> Result<(Vec<OperatorMatrix>, f64)> {
    let dds: Vec<CddMat> = ls.iter().map(|l| transform_operator_dd(l, om)).collect::<Result<_>>()?;
    let mut worst: f64 = 0.0;
    for i in 0..dds.len() {
        for j in i + 1..dds.len() {
            let c = dds[i].mul(&dds[j]).sub(&dds[j].mul(&dds[i]));
            let scale = ls[i].norm() * ls[j].norm();
            worst = worst.max(if scale == 0.0 { c.frobenius() } else { c.frobenius() / scale });
        }
    }
    Ok((dds.iter().map(|d| OperatorMatrix::from_dense(d.to_cmat())).collect(), worst))
}

/// Largest eigenvalue mismatch between `l` and a conjugate held in
/// double-double, relative to the spectral radius of `l`.
///
/// Eigenvalues of the rounded conjugate seed a Newton refinement on the
/// double-double matrix when it is Hessenberg (upper, or lower via transpose).
pub fn spectrum_mismatch(l: &OperatorMatrix, ltil: &CddMat) -> Result<f64> {
    let mut ev = if linalg::is_hermitian(l.matrix(), 0.0) {
        linalg::hermitian_eigen(l.matrix()).0.into_iter().map(|x| C64::new(x, 0.0)).collect()
    } else {
        linalg::eigenvalues(l.matrix())?
    };
    let mut et = linalg::eigenvalues(&ltil.to_cmat())?;
    let hess = if linalg::is_upper_hessenberg(ltil) {
        Some(ltil.clone())
    } else {
        let t = ltil.transpose();
        linalg::is_upper_hessenberg(&t).then_some(t)
    };
    if let Some(hm) = hess {
        let sub_ok = (1..hm.rows).all(|i| hm.get(i, i - 1) != Cdd::ZERO);
        if sub_ok {
            for z in et.iter_mut() {
                *z = linalg::hyman_newton(&hm, *z, 8);
            }
        }
    }
    linalg::sort_complex(&mut ev);
    linalg::sort_complex(&mut et);
    if ev.len() != et.len() {
        return Err(Error::DimensionMismatch("spectra of different sizes".into()));
    }
    let scale = ev.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let worst = ev.iter().zip(&et).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(if scale == 0.0 { worst } else { worst / scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, DiffOp};

    fn free(n: usize) -> (Grid1D, OperatorMatrix) {
        let g = Grid1D::dirichlet(-5.0, 5.0, n).unwrap();
        let l = discretize(&DiffOp::schrodinger(&g, |_| C64::new(0.0, 0.0)).unwrap(), 2).unwrap();
        (g, l)
    }

    fn seed_data(g: &Grid1D) -> TransmutationData {
        let psi = CMat::from_fn(g.len(), 1, |i, _| C64::new(g.point(i).exp() * 0.1, 0.0));
        TransmutationData::new(g.clone(), 1, vec![C64::new(-1.0, 0.0)], psi.clone(), psi).unwrap()
    }

    #[test]
    fn empty_data_gives_identity() {
        let (g, l) = free(20);
        let d = TransmutationData::empty(g, 1);
        let om = delsarte_operator(&d, Sign::Plus, Side::Forward).unwrap();
        assert_eq!(om.matrix().matrix(), &CMat::identity(20, 20));
        assert_eq!(transform_operator(&l, &om).unwrap().matrix(), l.matrix());
    }

    #[test]
    fn homotopy_normalization_is_exact() {
        let (g, _) = free(30);
        let d = seed_data(&g);
        let x = g.point(7);
        assert_eq!(build_kernel_omega(&d, x, x).unwrap().values, *d.omega0());
    }

    #[test]
    fn plus_maps_family_to_transformed_family() {
        let (g, _) = free(40);
        let d = seed_data(&g);
        let om = delsarte_operator(&d, Sign::Plus, Side::Forward).unwrap();
        let t = transformed_family(&d, Sign::Plus, Side::Forward).unwrap();
        let img = om.matrix().matrix() * d.psi();
        assert!(linalg::frob(&(img - &t)) < 1e-12 * linalg::frob(&t));
    }

    #[test]
    fn inverses_and_support() {
        let (g, _) = free(40);
        let d = seed_data(&g);
        for sign in [Sign::Plus, Sign::Minus] {
            let om = delsarte_operator(&d, sign, Side::Forward).unwrap();
            assert!(om.has_exact_support());
            assert!(om.inverse_residual() < 1e-8, "{sign:?}");
            let inv = delsarte_inverse(&d, sign, Side::Forward).unwrap();
            assert!(inv.has_exact_support());
            assert_eq!(om.volterra_radius().unwrap(), 0.0);
        }
    }
}
