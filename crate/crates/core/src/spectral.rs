//! Biorthogonal eigenfamilies, projection measures `E(Delta)`, elementary
//! congruent kernels and kernels synthesized from spectral weights.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::OperatorMatrix;
use crate::linalg::{self, EigenDecomp};
use crate::{CMat, CVec, C64};

/// Right/left eigenvector pairs with `phi_mu^H psi_lambda = delta`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenFamily {
    lambdas: Vec<C64>,
    right: CMat,
    left: CMat,
    weights: Vec<f64>,
    degeneracy: Option<Vec<usize>>,
}

pub const BIORTHO_TOL: f64 = 1e-10;

impl EigenFamily {
    /// Validated constructor; sorts the pairs by `(Re, Im)` of the parameter.
    pub fn new(lambdas: Vec<C64>, right: CMat, left: CMat, weights: Vec<f64>) -> Result<Self> {
        let p = lambdas.len();
        if right.ncols() != p || left.ncols() != p || weights.len() != p || right.nrows() != left.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{p} parameters, right {}x{}, left {}x{}, {} weights",
                right.nrows(),
                right.ncols(),
                left.nrows(),
                left.ncols(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidOperator("weights must be finite and nonnegative".into()));
        }
        let fam = Self { lambdas, right, left, weights, degeneracy: None }.sorted();
        let err = fam.biorthonormality_error();
        if err > BIORTHO_TOL {
            return Err(Error::DefectivePencil(format!("biorthonormality error {err:e}")));
        }
        Ok(fam)
    }

    fn sorted(self) -> Self {
        let p = self.lambdas.len();
        let mut order: Vec<usize> = (0..p).collect();
        let phase = |k: usize| {
            self.left.column(k).iter().find(|z| z.norm() > 1e-12).map(|z| z.arg()).unwrap_or(0.0)
        };
        order.sort_by(|&a, &b| {
            let (x, y) = (self.lambdas[a], self.lambdas[b]);
            x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)).then(phase(a).total_cmp(&phase(b)))
        });
        let pick = |m: &CMat| CMat::from_fn(m.nrows(), p, |i, j| m[(i, order[j])]);
        Self {
            lambdas: order.iter().map(|&k| self.lambdas[k]).collect(),
            right: pick(&self.right),
            left: pick(&self.left),
            weights: order.iter().map(|&k| self.weights[k]).collect(),
            degeneracy: self.degeneracy.map(|d| order.iter().map(|&k| d[k]).collect()),
        }
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.right.nrows()
    }

    pub fn lambdas(&self) -> &[C64] {
        &self.lambdas
    }

    pub fn right(&self) -> &CMat {
        &self.right
    }

    pub fn left(&self) -> &CMat {
        &self.left
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn degeneracy_index(&self) -> Option<&[usize]> {
        self.degeneracy.as_deref()
    }

    pub fn psi(&self, k: usize) -> CVec {
        self.right.column(k).into_owned()
    }

    pub fn phi(&self, k: usize) -> CVec {
        self.left.column(k).into_owned()
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() || weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidOperator("weights must match the family and be nonnegative".into()));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn index_of(&self, lambda: C64) -> Option<usize> {
        let tol = 1e-12 * lambda.norm().max(1.0);
        self.lambdas.iter().position(|l| (l - lambda).norm() <= tol)
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        let pick = |m: &CMat| CMat::from_fn(m.nrows(), idx.len(), |i, j| m[(i, idx[j])]);
        Self {
            lambdas: idx.iter().map(|&k| self.lambdas[k]).collect(),
            right: pick(&self.right),
            left: pick(&self.left),
            weights: idx.iter().map(|&k| self.weights[k]).collect(),
            degeneracy: self.degeneracy.as_ref().map(|d| idx.iter().map(|&k| d[k]).collect()),
        }
    }

    /// Family of the adjoint operator: conjugate parameters, roles swapped.
    pub fn swapped(&self) -> Self {
        Self {
            lambdas: self.lambdas.iter().map(|l| l.conj()).collect(),
            right: self.left.clone(),
            left: self.right.clone(),
            weights: self.weights.clone(),
            degeneracy: self.degeneracy.clone(),
        }
        .sorted()
    }

    /// `max |phi^H psi - I|` entrywise.
    pub fn biorthonormality_error(&self) -> f64 {
        let g = self.left.adjoint() * &self.right;
        let p = self.len();
        let mut e: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                e = e.max((g[(i, j)] - C64::new(target, 0.0)).norm());
            }
        }
        e
    }

    /// Largest relative right and left residuals against `a`.
    pub fn residuals(&self, a: &OperatorMatrix) -> (f64, f64) {
        let am = a.matrix();
        let anorm = am.norm().max(f64::MIN_POSITIVE);
        let mut r: f64 = 0.0;
        let mut l: f64 = 0.0;
        for k in 0..self.len() {
            let lam = self.lambdas[k];
            let psi = self.right.column(k);
            let phi = self.left.column(k);
            r = r.max((am * psi - psi * lam).norm() / (anorm * psi.norm()));
            l = l.max((phi.adjoint() * am - phi.adjoint() * lam).norm() / (anorm * phi.norm()));
        }
        (r, l)
    }
}

/// Axis-aligned rectangle in the complex plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl Band {
    pub fn real(lo: f64, hi: f64) -> Self {
        Band { re_min: lo, re_max: hi, im_min: f64::NEG_INFINITY, im_max: f64::INFINITY }
    }

    pub fn contains(&self, z: C64) -> bool {
        (self.re_min..=self.re_max).contains(&z.re) && (self.im_min..=self.im_max).contains(&z.im)
    }
}

/// Eigenpairs of `a`: the `count` eigenvalues of smallest modulus, restricted
/// to `band` when given. Pairs are returned biorthonormalized and sorted.
pub fn eigensolve(a: &OperatorMatrix, count: usize, band: Option<Band>) -> Result<EigenFamily> {
    let m = a.matrix();
    let n = m.nrows();
    let (values, right, left, hermitian) = if linalg::is_hermitian(m, 1e-14) {
        let (vals, vecs) = linalg::hermitian_eigen(m);
        let v: Vec<C64> = vals.iter().map(|&x| C64::new(x, 0.0)).collect();
        (v, vecs.clone(), vecs, true)
    } else {
        let EigenDecomp { values, right, left } = linalg::eigen_general(m)?;
        (values, right, left, false)
    };
    let mut idx: Vec<usize> = (0..n).filter(|&k| band.is_none_or(|b| b.contains(values[k]))).collect();
    if idx.is_empty() {
        return Err(Error::EmptyBand);
    }
    idx.sort_by(|&x, &y| values[x].norm().total_cmp(&values[y].norm()).then(x.cmp(&y)));
    idx.truncate(count.min(idx.len()).max(1));
    let pick = |mm: &CMat| CMat::from_fn(n, idx.len(), |i, j| mm[(i, idx[j])]);
    let (r, l) = (pick(&right), pick(&left));
    if !hermitian {
        let smin = linalg::singular_values(&r).last().cloned().unwrap_or(0.0);
        if smin < 1e-8 {
            return Err(Error::DefectivePencil(format!("eigenvector matrix has singular value {smin:e}")));
        }
    }
    let lambdas: Vec<C64> = idx.iter().map(|&k| values[k]).collect();
    let mut fam = EigenFamily::new(lambdas, r, l, vec![1.0; idx.len()])?;
    fam.degeneracy = degeneracy_labels(&fam.lambdas, m.norm());
    Ok(fam)
}

fn degeneracy_labels(lambdas: &[C64], scale: f64) -> Option<Vec<usize>> {
    let tol = 1e-10 * scale.max(1.0);
    let labels: Vec<usize> = (0..lambdas.len())
        .map(|k| (0..k).filter(|&j| (lambdas[j] - lambdas[k]).norm() <= tol).count())
        .collect();
    labels.iter().any(|&l| l > 0).then_some(labels)
}

/// Largest distance between the spectrum of `a^H` and the conjugated spectrum of `a`.
pub fn adjoint_spectrum_gap(a: &OperatorMatrix) -> Result<f64> {
    let n = a.dim();
    let f = eigensolve(a, n, None)?;
    let g = eigensolve(&a.adjoint(), n, None)?;
    let mut x: Vec<C64> = f.lambdas().iter().map(|l| l.conj()).collect();
    let mut y = g.lambdas().to_vec();
    linalg::sort_complex(&mut x);
    linalg::sort_complex(&mut y);
    Ok(x.iter().zip(&y).map(|(p, q)| (p - q).norm()).fold(0.0, f64::max))
}

/// Borel-set stand-in for subsets of the complex plane.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Empty,
    All,
    Rect(Band),
    Disk { center: C64, radius: f64 },
    Points { points: Vec<C64>, tol: f64 },
    Intersection(Box<Region>, Box<Region>),
    Union(Box<Region>, Box<Region>),
}

impl Region {
    pub fn contains(&self, z: C64) -> bool {
        match self {
            Region::Empty => false,
            Region::All => true,
            Region::Rect(b) => b.contains(z),
            Region::Disk { center, radius } => (z - center).norm() <= *radius,
            Region::Points { points, tol } => points.iter().any(|p| (p - z).norm() <= *tol),
            Region::Intersection(a, b) => a.contains(z) && b.contains(z),
            Region::Union(a, b) => a.contains(z) || b.contains(z),
        }
    }

    pub fn intersect(&self, other: &Region) -> Region {
        Region::Intersection(Box::new(self.clone()), Box::new(other.clone()))
    }
}

/// `E(Delta) = sum_{lambda in Delta} psi_lambda phi_lambda^H rho(lambda)`.
pub fn projection_measure(fam: &EigenFamily, delta: &Region) -> OperatorMatrix {
    let n = fam.dim();
    let mut e = CMat::zeros(n, n);
    for k in 0..fam.len() {
        if delta.contains(fam.lambdas[k]) {
            let w = fam.weights[k];
            if w != 0.0 {
                e += fam.right.column(k) * fam.left.column(k).adjoint() * C64::new(w, 0.0);
            }
        }
    }
    OperatorMatrix::from_dense(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelDomain {
    SpectrumBySpectrum,
    GridByGrid,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralKernel {
    pub domain: KernelDomain,
    pub values: CMat,
    pub note: String,
}

impl SpectralKernel {
    pub fn new(domain: KernelDomain, values: CMat, note: impl Into<String>) -> Result<Self> {
        if values.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidOperator("kernel has non-finite entries".into()));
        }
        Ok(Self { domain, values, note: note.into() })
    }

    pub fn identity(n: usize) -> Self {
        Self { domain: KernelDomain::GridByGrid, values: CMat::identity(n, n), note: "identity".into() }
    }

    pub fn as_operator(&self) -> OperatorMatrix {
        OperatorMatrix::from_dense(self.values.clone())
    }
}

/// `Z_lambda = psi_lambda phi_lambda^H` for the pair at index `k`.
pub fn elementary_kernel_at(fam: &EigenFamily, k: usize) -> SpectralKernel {
    let z = fam.right.column(k) * fam.left.column(k).adjoint();
    SpectralKernel { domain: KernelDomain::GridByGrid, values: z, note: format!("elementary kernel at {}", fam.lambdas[k]) }
}

pub fn elementary_kernel(fam: &EigenFamily, lambda: C64) -> Result<SpectralKernel> {
    let k = fam.index_of(lambda).ok_or(Error::NotInFamily(lambda))?;
    Ok(elementary_kernel_at(fam, k))
}

/// Both congruence residuals `|A Z - lambda Z|` and `|Z A - lambda Z|`,
/// relative to `|A| |Z|`.
pub fn elementary_residuals(a: &OperatorMatrix, fam: &EigenFamily, k: usize) -> (f64, f64) {
    let z = elementary_kernel_at(fam, k).values;
    let lam = fam.lambdas[k];
    let am = a.matrix();
    let scale = am.norm() * z.norm();
    ((am * &z - &z * lam).norm() / scale, (&z * am - &z * lam).norm() / scale)
}

/// `K = sum_lambda w(lambda) Z_lambda rho(lambda)`, summed in family order.
pub fn kernel_from_measure(fam: &EigenFamily, weight_fn: impl Fn(C64) -> C64) -> SpectralKernel {
    let n = fam.dim();
    let coeffs: Vec<C64> = (0..fam.len()).map(|k| weight_fn(fam.lambdas[k]) * fam.weights[k]).collect();
    // K = Psi diag(c) Phi^H, accumulated column by column
    let mut k_mat = CMat::zeros(n, n);
    for (k, &c) in coeffs.iter().enumerate() {
        if c != C64::new(0.0, 0.0) {
            k_mat += fam.right.column(k) * c * fam.left.column(k).adjoint();
        }
    }
    SpectralKernel { domain: KernelDomain::GridByGrid, values: k_mat, note: "kernel from spectral measure".into() }
}

/// `|Ltil K - K L|_F / (|K|_F max(|L|_F, |Ltil|_F))`.
pub fn congruence_residual(k: &SpectralKernel, ltil: &OperatorMatrix, l: &OperatorMatrix) -> Result<f64> {
    let km = &k.values;
    if km.nrows() != ltil.dim() || km.ncols() != l.dim() {
        return Err(Error::DimensionMismatch(format!(
            "kernel {}x{} between operators of size {} and {}",
            km.nrows(),
            km.ncols(),
            ltil.dim(),
            l.dim()
        )));
    }
    let kn = km.norm();
    if kn == 0.0 {
        return Ok(0.0);
    }
    let r = ltil.matrix() * km - km * l.matrix();
    let scale = kn * l.norm().max(ltil.norm()).max(f64::MIN_POSITIVE);
    Ok(r.norm() / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{discretize, DiffOp, Grid1D};

    fn laplacian(n: usize) -> (OperatorMatrix, f64) {
        let g = Grid1D::dirichlet(0.0, 1.0, n).unwrap();
        let op = DiffOp::schrodinger(&g, |_| C64::new(0.0, 0.0)).unwrap();
        (discretize(&op, 2).unwrap(), g.spacing())
    }

    #[test]
    fn dirichlet_laplacian_closed_form() {
        let n = 40;
        let (a, h) = laplacian(n);
        let fam = eigensolve(&a, n, None).unwrap();
        for (k, l) in fam.lambdas().iter().enumerate() {
            let exact = (2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos()) / (h * h);
            assert!((l.re - exact).abs() < 1e-9 * exact);
        }
        assert!((fam.right() - fam.left()).norm() < 1e-10);
    }

    #[test]
    fn empty_band_is_an_error() {
        let (a, _) = laplacian(10);
        assert!(matches!(eigensolve(&a, 3, Some(Band::real(-5.0, -1.0))), Err(Error::EmptyBand)));
    }

    #[test]
    fn projection_of_everything_is_identity() {
        let (a, _) = laplacian(12);
        let fam = eigensolve(&a, 12, None).unwrap();
        let e = projection_measure(&fam, &Region::All);
        assert!((e.matrix() - CMat::identity(12, 12)).norm() < 1e-10);
        assert_eq!(projection_measure(&fam, &Region::Empty).norm(), 0.0);
    }

    #[test]
    fn elementary_kernel_of_ground_state() {
        let (a, _) = laplacian(12);
        let fam = eigensolve(&a, 12, None).unwrap();
        let z = elementary_kernel(&fam, fam.lambdas()[0]).unwrap();
        assert!((z.values.trace() - C64::new(1.0, 0.0)).norm() < 1e-12);
        assert!((&z.values - z.values.adjoint()).norm() < 1e-14);
        assert!(elementary_kernel(&fam, C64::new(-3.0, 0.0)).is_err());
    }

    #[test]
    fn congruence_negative_control() {
        let (a, _) = laplacian(10);
        let k = SpectralKernel::identity(10);
        assert_eq!(congruence_residual(&k, &a, &a).unwrap(), 0.0);
        let r = CMat::from_fn(10, 10, |i, j| C64::new(((i * 13 + j * 7) % 11) as f64 / 11.0, 0.0));
        let k = SpectralKernel::new(KernelDomain::GridByGrid, r, "random").unwrap();
        assert!(congruence_residual(&k, &a, &a).unwrap() > 1e-2);
    }
}
