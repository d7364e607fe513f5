//! One-dimensional Schrödinger operators `-d^2/dx^2 + q`, Darboux and Crum
//! dressing by nodeless seeds, and spectrum comparison.
//!
//! A seed `tau` is stored at each node as `(s, v, d)` with `tau = e^s v` and
//! `tau' = e^s d`, so seeds growing like `e^{kappa |x|}` never overflow.
//! A stage with log-derivative `w = tau'/tau` at energy `E` maps the potential
//! to `q - 2 w' = -q + 2E + 2 w^2` and every later seed `tau_j` to
//! `tau_j' - w tau_j`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{self, discretize, Boundary, CoeffField, DiffOp, Edge, Grid1D, OperatorMatrix, ProductGrid};
use crate::C64;

/// `-d^2/dx^2 + q` on a line grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SchrodingerOp {
    grid: Grid1D,
    q: Vec<C64>,
    scheme: usize,
}

impl SchrodingerOp {
    pub fn new(grid: Grid1D, q: Vec<C64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!("{} potential samples on {} nodes", q.len(), grid.len())));
        }
        if q.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidOperator("non-finite potential".into()));
        }
        Ok(Self { grid, q, scheme: 2 })
    }

    pub fn from_fn(grid: Grid1D, q: impl Fn(f64) -> C64) -> Result<Self> {
        let q = grid.points().into_iter().map(q).collect();
        Self::new(grid, q)
    }

    pub fn free(grid: Grid1D) -> Self {
        let n = grid.len();
        Self { grid, q: vec![C64::new(0.0, 0.0); n], scheme: 2 }
    }

    pub fn with_scheme(mut self, scheme: usize) -> Result<Self> {
        grid::check_scheme(scheme)?;
        self.scheme = scheme;
        Ok(self)
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn potential(&self) -> &[C64] {
        &self.q
    }

    pub fn scheme(&self) -> usize {
        self.scheme
    }

    pub fn boundary(&self) -> Boundary {
        self.grid.boundary()
    }

    pub fn is_real(&self) -> bool {
        self.q.iter().all(|z| z.im == 0.0)
    }

    pub fn diff_op(&self) -> Result<DiffOp> {
        let pg = ProductGrid::line(self.grid.clone());
        let one = CoeffField::scalar_fn(&pg, |_| C64::new(-1.0, 0.0))?;
        let pot = CoeffField::from_samples(&pg, self.q.clone())?;
        DiffOp::new(pg).with_term(vec![2], one)?.with_term(vec![0], pot)
    }

    pub fn operator(&self) -> Result<OperatorMatrix> {
        discretize(&self.diff_op()?, self.scheme)
    }

    /// Eigenvalues sorted by real part (symmetric solver for real potentials).
    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        let op = self.operator()?;
        if self.is_real() && self.scheme == 2 && self.boundary() == Boundary::Dirichlet {
            let m = op.matrix();
            let d: Vec<f64> = (0..op.dim()).map(|i| m[(i, i)].re).collect();
            let e: Vec<f64> = (1..op.dim()).map(|i| m[(i, i - 1)].re).collect();
            Ok(crate::linalg::tridiagonal_eigenvalues(&d, &e).into_iter().map(|x| C64::new(x, 0.0)).collect())
        } else if self.is_real() {
            let m = DMatrix::from_fn(op.dim(), op.dim(), |i, j| op.matrix()[(i, j)].re);
            let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
            v.sort_by(f64::total_cmp);
            Ok(v.into_iter().map(|x| C64::new(x, 0.0)).collect())
        } else {
            crate::linalg::eigenvalues(op.matrix())
        }
    }
}

/// Closed-form solutions of `-tau'' = E tau` used as seeds on a free background.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AnalyticSeed {
    /// `cosh(kappa (x - center))`, `E = -kappa^2`.
    Cosh { kappa: f64, center: f64 },
    /// `sinh(kappa (x - center))`, `E = -kappa^2`; has a node unless moved by
    /// an earlier stage.
    Sinh { kappa: f64, center: f64 },
    /// `exp(kappa x)`, `E = -kappa^2`.
    Exp { kappa: f64 },
    /// `tau = 1`, `E = 0`.
    Constant,
}

impl AnalyticSeed {
    pub fn energy(&self) -> f64 {
        match *self {
            AnalyticSeed::Cosh { kappa, .. } | AnalyticSeed::Sinh { kappa, .. } | AnalyticSeed::Exp { kappa } => {
                -kappa * kappa
            }
            AnalyticSeed::Constant => 0.0,
        }
    }

    fn values(&self, grid: &Grid1D) -> SeedValues {
        let n = grid.len();
        let mut sv = SeedValues { s: vec![0.0; n], v: vec![1.0; n], d: vec![0.0; n] };
        for i in 0..n {
            let x = grid.point(i);
            match *self {
                AnalyticSeed::Cosh { kappa, center } | AnalyticSeed::Sinh { kappa, center } => {
                    let t = kappa * (x - center);
                    let e = (-2.0 * t.abs()).exp();
                    let sg = if t < 0.0 { -1.0 } else { 1.0 };
                    sv.s[i] = t.abs();
                    let (c, s) = ((1.0 + e) / 2.0, sg * (1.0 - e) / 2.0);
                    if matches!(self, AnalyticSeed::Cosh { .. }) {
                        sv.v[i] = c;
                        sv.d[i] = kappa * s;
                    } else {
                        sv.v[i] = s;
                        sv.d[i] = kappa * c;
                    }
                }
                AnalyticSeed::Exp { kappa } => {
                    sv.s[i] = kappa * x;
                    sv.d[i] = kappa;
                }
                AnalyticSeed::Constant => {}
            }
        }
        sv
    }
}

/// Seed for one dressing stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum DressingSeed {
    /// Exact solution on a zero background; later stages carry it through the
    /// earlier ones exactly.
    Analytic { seed: AnalyticSeed },
    /// Positive solution of the discrete equation at `energy` on the current
    /// operator, found by shooting in from both ends.
    Sampled { energy: f64 },
}

impl DressingSeed {
    pub fn cosh(kappa: f64) -> Self {
        DressingSeed::Analytic { seed: AnalyticSeed::Cosh { kappa, center: 0.0 } }
    }

    pub fn sinh(kappa: f64) -> Self {
        DressingSeed::Analytic { seed: AnalyticSeed::Sinh { kappa, center: 0.0 } }
    }

    pub fn energy(&self) -> f64 {
        match self {
            DressingSeed::Analytic { seed } => seed.energy(),
            DressingSeed::Sampled { energy } => *energy,
        }
    }

    /// Seeds for the reflectionless potential with the given `kappa`s:
    /// ascending `kappa`, alternating cosh and sinh so each stage is nodeless.
    pub fn soliton_sequence(kappas: &[f64]) -> Vec<DressingSeed> {
        let mut k = kappas.to_vec();
        k.sort_by(f64::total_cmp);
        k.iter()
            .enumerate()
            .map(|(j, &kappa)| if j % 2 == 0 { Self::cosh(kappa) } else { Self::sinh(kappa) })
            .collect()
    }
}

/// `tau = e^s v`, `tau' = e^s d` at each node.
#[derive(Clone, Debug, PartialEq)]
pub struct SeedValues {
    pub s: Vec<f64>,
    pub v: Vec<f64>,
    pub d: Vec<f64>,
}

impl SeedValues {
    pub fn ln_tau(&self) -> Vec<f64> {
        self.s.iter().zip(&self.v).map(|(s, v)| s + v.abs().ln()).collect()
    }

    fn first_node(&self, grid: &Grid1D) -> Option<f64> {
        let sign0 = self.v.first()?.signum();
        self.v.iter().position(|&v| v == 0.0 || v.signum() != sign0).map(|i| grid.point(i))
    }
}

/// Two-sided shooting: `tau = u_L + u_R`, each solving the interior rows with
/// zero value just outside one end, accumulated through ratios in log form.
pub fn sampled_seed(op: &SchrodingerOp, energy: f64) -> Result<SeedValues> {
    if !op.is_real() {
        return Err(Error::InvalidSeed("sampled seeds need a real potential".into()));
    }
    let g = op.grid();
    let (n, h) = (g.len(), g.spacing());
    let diag: Vec<f64> = op.potential().iter().map(|q| 2.0 + h * h * (q.re - energy)).collect();
    let shoot = |order: &mut dyn Iterator<Item = usize>| -> Result<Vec<f64>> {
        let mut ln = vec![0.0; n];
        let mut prev_ratio = f64::INFINITY;
        let mut acc = 0.0;
        let mut last: Option<usize> = None;
        for i in order {
            if let Some(p) = last {
                // tau_i = r tau_{i-1} with r = diag_{i-1} - 1 / r_prev
                let r = diag[p] - 1.0 / prev_ratio;
                if r <= 0.0 {
                    return Err(Error::SeedNode { stage: None, x: g.point(i) });
                }
                acc += r.ln();
                prev_ratio = r;
            }
            ln[i] = acc;
            last = Some(i);
        }
        Ok(ln)
    };
    let left = shoot(&mut (0..n))?;
    let right = shoot(&mut (0..n).rev())?;
    let (ml, mr) = (left[n - 1], right[0]);
    let mut sv = SeedValues { s: vec![0.0; n], v: vec![1.0; n], d: vec![0.0; n] };
    for i in 0..n {
        let (a, b) = (left[i] - ml, right[i] - mr);
        let m = a.max(b);
        sv.s[i] = m;
        sv.v[i] = (a - m).exp() + (b - m).exp();
    }
    Ok(sv)
}

/// `||(L - E) tau||_2 / (||L||_F ||tau||_2)` over interior rows; a positive
/// solution below the spectrum cannot satisfy both boundary rows.
pub fn seed_residual(op: &SchrodingerOp, energy: f64, seed: &SeedValues) -> Result<f64> {
    let l = op.operator()?;
    let smax = seed.s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tau: Vec<C64> = seed.s.iter().zip(&seed.v).map(|(s, v)| C64::new((s - smax).exp() * v, 0.0)).collect();
    let lt = l.apply(&tau)?;
    let n = tau.len();
    let r: f64 = (1..n - 1).map(|i| (lt[i] - tau[i] * energy).norm_sqr()).sum::<f64>().sqrt();
    let tn: f64 = tau.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    Ok(r / (l.norm() * tn))
}

/// Seeds whose residual exceeds this (relative to `||L||`) are rejected.
pub const SEED_RESIDUAL_TOL: f64 = 1e-8;

fn stage(op: &SchrodingerOp, energy: f64, sv: &SeedValues, exact: bool, index: usize) -> Result<(SchrodingerOp, Vec<f64>)> {
    if let Some(x) = sv.first_node(op.grid()) {
        return Err(Error::SeedNode { stage: Some(index), x });
    }
    let q_new: Vec<C64>;
    let w: Vec<f64> = sv.d.iter().zip(&sv.v).map(|(d, v)| d / v).collect();
    if exact {
        q_new = op.q.iter().zip(&w).map(|(q, w)| -q + 2.0 * energy + 2.0 * w * w).collect();
    } else {
        let pg = ProductGrid::line(op.grid.clone());
        let ln: Vec<C64> = sv.ln_tau().into_iter().map(|x| C64::new(x, 0.0)).collect();
        let d2 = grid::derivative(&pg, 0, 2, op.scheme, Edge::Biased, 1, &ln)?;
        q_new = op.q.iter().zip(d2).map(|(q, d)| q - d * 2.0).collect();
    }
    Ok((SchrodingerOp { grid: op.grid.clone(), q: q_new, scheme: op.scheme }, w))
}

/// Single Darboux dressing `q -> q - 2 (ln tau)''`.
pub fn darboux_once(op: &SchrodingerOp, seed: &DressingSeed) -> Result<SchrodingerOp> {
    crum_iterate(op, std::slice::from_ref(seed))
}

/// Successive dressings. Analytic seeds require a zero starting potential
/// and are carried through earlier stages by `tau_j -> tau_j' - w tau_j`;
/// sampled seeds are recomputed on the current operator.
pub fn crum_iterate(op: &SchrodingerOp, seeds: &[DressingSeed]) -> Result<SchrodingerOp> {
    let analytic_count = seeds.iter().filter(|s| matches!(s, DressingSeed::Analytic { .. })).count();
    if analytic_count > 0 && op.q.iter().any(|z| *z != C64::new(0.0, 0.0)) {
        return Err(Error::InvalidSeed("analytic seeds assume a zero starting potential".into()));
    }
    let mut pending: Vec<Option<SeedValues>> = seeds
        .iter()
        .map(|s| match s {
            DressingSeed::Analytic { seed } => Some(seed.values(&op.grid)),
            DressingSeed::Sampled { .. } => None,
        })
        .collect();
    let mut cur = op.clone();
    for (k, seed) in seeds.iter().enumerate() {
        let energy = seed.energy();
        let (next, w) = match pending[k].take() {
            Some(sv) => stage(&cur, energy, &sv, true, k)?,
            None => {
                if pending[k + 1..].iter().any(Option::is_some) {
                    return Err(Error::Unsupported("analytic seeds cannot follow a sampled stage".into()));
                }
                let sv = sampled_seed(&cur, energy).map_err(|e| match e {
                    Error::SeedNode { x, .. } => Error::SeedNode { stage: Some(k), x },
                    other => other,
                })?;
                let r = seed_residual(&cur, energy, &sv)?;
                if r > SEED_RESIDUAL_TOL {
                    return Err(Error::InvalidSeed(format!("stage {k} seed residual {r:e}")));
                }
                stage(&cur, energy, &sv, false, k)?
            }
        };
        for (j, p) in pending.iter_mut().enumerate().skip(k + 1) {
            if let Some(sv) = p {
                let ej = seeds[j].energy();
                for i in 0..sv.v.len() {
                    let nv = sv.d[i] - w[i] * sv.v[i];
                    let nd = (energy - ej) * sv.v[i] - w[i] * nv;
                    sv.v[i] = nv;
                    sv.d[i] = nd;
                }
            }
        }
        cur = next;
    }
    Ok(cur)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub before: Vec<f64>,
    pub after: Vec<f64>,
    /// Negative eigenvalues of `after` beyond those of `before`.
    pub new_negative: Vec<f64>,
    /// Relative differences of the positive eigenvalues, matched in order.
    pub band_drift: Vec<f64>,
    pub max_band_drift: f64,
}

/// Lowest `n_low` eigenvalues (real parts) of both operators, the newly
/// appeared negative eigenvalues and the drift of the positive band.
pub fn spectrum_compare(before: &SchrodingerOp, after: &SchrodingerOp, n_low: usize) -> Result<SpectrumReport> {
    if before.grid() != after.grid() {
        return Err(Error::InvalidGrid("spectrum comparison needs a common grid".into()));
    }
    let eb: Vec<f64> = before.eigenvalues()?.iter().map(|z| z.re).collect();
    let ea: Vec<f64> = after.eigenvalues()?.iter().map(|z| z.re).collect();
    let neg_b = eb.iter().filter(|&&x| x < 0.0).count();
    let neg_a: Vec<f64> = ea.iter().cloned().filter(|&x| x < 0.0).collect();
    let new_negative = neg_a.iter().skip(neg_b).cloned().collect::<Vec<_>>();
    let pos_b: Vec<f64> = eb.iter().cloned().filter(|&x| x >= 0.0).collect();
    let pos_a: Vec<f64> = ea.iter().cloned().filter(|&x| x >= 0.0).collect();
    let band_drift: Vec<f64> = pos_b.iter().zip(&pos_a).take(n_low).map(|(b, a)| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)).collect();
    let max_band_drift = band_drift.iter().cloned().fold(0.0, f64::max);
    Ok(SpectrumReport {
        before: eb.into_iter().take(n_low).collect(),
        after: ea.into_iter().take(n_low).collect(),
        new_negative,
        band_drift,
        max_band_drift,
    })
}

/// Potential read off a transformed operator row by row: the row sum of the
/// symmetrized tridiagonal part, `L_ii - sqrt(L_{i-1,i} L_{i,i-1}) - sqrt(L_{i,i+1} L_{i+1,i})`.
/// `None` at the two end rows.
pub fn extract_potential(ltil: &OperatorMatrix) -> Vec<Option<C64>> {
    let m = ltil.matrix();
    let n = m.nrows();
    let off = |k: usize| (m[(k, k + 1)] * m[(k + 1, k)]).sqrt();
    (0..n)
        .map(|i| if i == 0 || i + 1 == n { None } else { Some(m[(i, i)] - off(i - 1) - off(i)) })
        .collect()
}

/// Largest entrywise difference between rows `edge..n-edge` of two matrices.
pub fn interior_row_mismatch(a: &OperatorMatrix, b: &OperatorMatrix, edge: usize) -> f64 {
    let (ma, mb) = (a.matrix(), b.matrix());
    let n = ma.nrows();
    let mut worst: f64 = 0.0;
    for i in edge..n.saturating_sub(edge) {
        for j in 0..ma.ncols() {
            worst = worst.max((ma[(i, j)] - mb[(i, j)]).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Grid1D {
        Grid1D::dirichlet(-20.0, 20.0, n).unwrap()
    }

    #[test]
    fn one_soliton_potential() {
        let g = Grid1D::dirichlet(-5.0, 5.0, 101).unwrap();
        let out = darboux_once(&SchrodingerOp::free(g.clone()), &DressingSeed::cosh(1.0)).unwrap();
        for (i, q) in out.potential().iter().enumerate() {
            let x = g.point(i);
            assert!((q.re + 2.0 / x.cosh().powi(2)).abs() < 1e-13);
        }
        assert!((out.potential()[50].re + 2.0).abs() < 1e-15);
    }

    #[test]
    fn constant_seed_is_identity() {
        let g = grid(50);
        let free = SchrodingerOp::free(g);
        let out = darboux_once(&free, &DressingSeed::Analytic { seed: AnalyticSeed::Constant }).unwrap();
        assert_eq!(out.potential(), free.potential());
    }

    #[test]
    fn node_is_rejected() {
        let g = grid(51);
        let err = darboux_once(&SchrodingerOp::free(g), &DressingSeed::sinh(1.0)).unwrap_err();
        assert!(matches!(err, Error::SeedNode { stage: Some(0), .. }));
    }

    #[test]
    fn two_soliton_matches_closed_form() {
        let g = Grid1D::dirichlet(-8.0, 8.0, 161).unwrap();
        let out = crum_iterate(&SchrodingerOp::free(g.clone()), &DressingSeed::soliton_sequence(&[2.0, 1.0])).unwrap();
        for (i, q) in out.potential().iter().enumerate() {
            let x = g.point(i);
            let exact = -6.0 / x.cosh().powi(2);
            assert!((q.re - exact).abs() < 1e-11, "{x}: {} vs {exact}", q.re);
        }
    }

    #[test]
    fn sampled_seed_dresses_close_to_analytic() {
        let g = Grid1D::dirichlet(-10.0, 10.0, 400).unwrap();
        let free = SchrodingerOp::free(g.clone());
        let out = darboux_once(&free, &DressingSeed::Sampled { energy: -1.0 }).unwrap();
        let mid = g.len() / 2;
        let x = g.point(mid);
        assert!((out.potential()[mid].re + 2.0 / x.cosh().powi(2)).abs() < 1e-2);
    }
}
