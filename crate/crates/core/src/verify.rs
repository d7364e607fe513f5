//! Acceptance suite: each criterion evaluates a list of residual rows, every
//! row carrying its own threshold and verdict.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::darboux::{self, DressingSeed, SchrodingerOp};
use crate::derham::{self, DiffMode, GenComplex};
use crate::error::{Error, Result};
use crate::factorize::{self, ProjectorChain};
use crate::grid::{discretize, DiffOp, Grid1D, OperatorMatrix, ProductGrid};
use crate::lagrange::{self, Cell, FormField, SurfaceRegion};
use crate::linalg::{self, dd::CddMat};
use crate::spectral::{self, Band, Region};
use crate::transmute::{self, DelsarteOp, Side, Sign, TransmutationData};
use crate::{CMat, CVec, C64};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparator {
    /// Passes when `value <= threshold`.
    Max,
    /// Passes when `value >= threshold`.
    Min,
    /// Passes when `value == threshold`.
    Equal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualRow {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub comparator: Comparator,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl ResidualRow {
    pub fn new(name: &str, value: f64, threshold: f64, comparator: Comparator) -> Self {
        let pass = match comparator {
            Comparator::Max => value <= threshold,
            Comparator::Min => value >= threshold,
            Comparator::Equal => value == threshold,
        };
        Self { name: name.into(), value, threshold, comparator, pass, detail: String::new() }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

/// Thresholds by row name, falling back to the built-in defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Tolerances(pub BTreeMap<String, f64>);

impl Tolerances {
    pub fn get(&self, name: &str, default: f64) -> f64 {
        self.0.get(name).copied().unwrap_or(default)
    }

    pub fn max(&self, name: &str, value: f64, default: f64) -> ResidualRow {
        ResidualRow::new(name, value, self.get(name, default), Comparator::Max)
    }

    pub fn min(&self, name: &str, value: f64, default: f64) -> ResidualRow {
        ResidualRow::new(name, value, self.get(name, default), Comparator::Min)
    }

    pub fn equal(&self, name: &str, value: f64, default: f64) -> ResidualRow {
        ResidualRow::new(name, value, self.get(name, default), Comparator::Equal)
    }
}

/// Plot data attached to a criterion; not part of any report.
#[derive(Clone, Debug, Default)]
pub struct PlotSeries {
    pub title: String,
    pub series: Vec<(String, Vec<f64>, Vec<f64>)>,
}

#[derive(Clone, Debug)]
pub struct Criterion {
    pub id: usize,
    pub title: &'static str,
    pub rows: Vec<ResidualRow>,
    pub plot: Option<PlotSeries>,
}

impl Criterion {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn sech2(x: f64) -> f64 {
    1.0 / x.cosh().powi(2)
}

/// Least-squares slope of `ln r` against `ln h`.
pub fn fitted_order(h: &[f64], r: &[f64]) -> f64 {
    let lx: Vec<f64> = h.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = r.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Max-norm residual of the discrete Lagrange identity for `-d^2 + cos x`
/// on a periodic grid of `n` points over `[0, 2 pi)`.
pub fn lagrange_residual(n: usize) -> Result<f64> {
    let g = Grid1D::periodic(0.0, 2.0 * PI, n)?;
    let op = DiffOp::schrodinger(&g, |x| c(x.cos()))?;
    let conc = lagrange::bilinear_concomitant(&op, 2)?;
    let phi: Vec<C64> = g.points().iter().map(|&x| C64::new(x.sin().exp(), (2.0 * x).cos())).collect();
    let psi: Vec<C64> = g.points().iter().map(|&x| C64::new(x.cos(), 0.5 * x.cos().exp())).collect();
    let r = conc.identity_residual(&phi, &psi)?;
    let mask = lagrange::interior_mask(op.grid(), 2);
    Ok(r.iter().zip(mask).filter(|(_, m)| *m).map(|(z, _)| z.norm()).fold(0.0, f64::max))
}

pub fn criterion_1(tol: &Tolerances) -> Result<Criterion> {
    let ns = [100usize, 200, 400];
    let res = ns.iter().map(|&n| lagrange_residual(n)).collect::<Result<Vec<_>>>()?;
    let hs: Vec<f64> = ns.iter().map(|&n| 2.0 * PI / n as f64).collect();
    let order = fitted_order(&hs, &res);
    let detail = ns.iter().zip(&res).map(|(n, r)| format!("n={n}: {r:.3e}")).collect::<Vec<_>>().join(", ");
    Ok(Criterion {
        id: 1,
        title: "Lagrange identity convergence",
        rows: vec![tol.min("c1.lagrange_order", order, 1.8).with_detail(detail)],
        plot: None,
    })
}

/// The n = 400 one-soliton transmutation on `[-20, 20]` shared by several criteria.
pub struct SolitonPipeline {
    pub grid: Grid1D,
    pub kappa: f64,
    pub base: OperatorMatrix,
    pub data: TransmutationData,
    pub omega: DelsarteOp,
    pub ltil_dd: CddMat,
    pub ltil: OperatorMatrix,
}

impl SolitonPipeline {
    pub fn new(grid: Grid1D, kappa: f64) -> Result<Self> {
        let base = discretize(&DiffOp::schrodinger(&grid, |_| c(0.0))?, 2)?;
        let data = transmute::soliton_data(&grid, kappa)?;
        let omega = transmute::delsarte_operator(&data, Sign::Plus, Side::Forward)?;
        let ltil_dd = transmute::transform_operator_dd(&base, &omega)?;
        let ltil = OperatorMatrix::from_dense(ltil_dd.to_cmat());
        Ok(Self { grid, kappa, base, data, omega, ltil_dd, ltil })
    }

    pub fn target_potential(&self, x: f64) -> f64 {
        -2.0 * self.kappa * self.kappa * sech2(self.kappa * x)
    }

    /// Potential read off `Ltil` at rows `edge..n-edge`, as `(x, q)`.
    pub fn extracted(&self, edge: usize) -> (Vec<f64>, Vec<f64>) {
        let q = darboux::extract_potential(&self.ltil);
        let n = self.grid.len();
        (edge..n - edge).filter_map(|i| q[i].map(|v| (self.grid.point(i), v.re))).unzip()
    }

    /// Largest `|q_extracted(x_i) - target(x_i + shift)|` over rows `edge..n-edge`.
    pub fn potential_error(&self, edge: usize, shift: f64) -> f64 {
        let (x, q) = self.extracted(edge);
        x.iter().zip(&q).map(|(x, q)| (q - self.target_potential(x + shift)).abs()).fold(0.0, f64::max)
    }

    /// Entrywise interior-row mismatch against the discretized target operator.
    pub fn entrywise_error(&self, edge: usize) -> Result<f64> {
        let k = self.kappa;
        let target = discretize(&DiffOp::schrodinger(&self.grid, |x| c(-2.0 * k * k * sech2(k * x)))?, 2)?;
        Ok(darboux::interior_row_mismatch(&self.ltil, &target, edge))
    }
}

pub const SOLITON_EDGE: usize = 3;

pub fn criterion_2(p: &SolitonPipeline, tol: &Tolerances) -> Result<Criterion> {
    let edge = SOLITON_EDGE;
    let pot = p.potential_error(edge, 0.0);
    let staggered = p.potential_error(edge, p.grid.spacing() / 2.0);
    let entry = p.entrywise_error(edge)?;
    let loc = transmute::locality_check(&p.ltil, 1, edge);
    let inter = transmute::intertwining_residual(&p.ltil, &p.omega, &p.base)?;
    let (x, q) = p.extracted(edge);
    let exact: Vec<f64> = x.iter().map(|&x| p.target_potential(x)).collect();
    Ok(Criterion {
        id: 2,
        title: "End-to-end Darboux oracle",
        rows: vec![
            tol.max("c2a.potential", pot, 1e-6).with_detail(format!(
                "extracted potential vs -2 sech^2(x) at nodes; against the half-step shifted target {staggered:.3e}"
            )),
            tol.max("c2a.rows_entrywise", entry, 1e-6)
                .with_detail("interior rows of Ltil vs the discretized -d^2 - 2 sech^2(x), entrywise"),
            tol.max("c2b.locality", loc, 1e-6),
            tol.max("c2c.intertwining", inter, 1e-9),
        ],
        plot: Some(PlotSeries {
            title: "transformed potential".into(),
            series: vec![("extracted".into(), x.clone(), q), ("-2 sech^2".into(), x, exact)],
        }),
    })
}

pub fn criterion_3(p: &SolitonPipeline, tol: &Tolerances) -> Result<Criterion> {
    let mut rows = vec![tol.max("c3a.spectrum", transmute::spectrum_mismatch(&p.base, &p.ltil_dd)?, 1e-10)];
    let expected = -p.kappa * p.kappa;
    let mut drifts = Vec::new();
    for (half, n) in [(20.0, 800usize), (40.0, 1600)] {
        let g = Grid1D::dirichlet(-half, half, n)?;
        let free = SchrodingerOp::free(g);
        for (label, seed) in [("sampled", DressingSeed::Sampled { energy: expected }), ("analytic", DressingSeed::cosh(p.kappa))] {
            let out = darboux::darboux_once(&free, &seed)?;
            let rep = darboux::spectrum_compare(&free, &out, 20)?;
            if n == 800 {
                let err = rep.new_negative.first().map_or(f64::INFINITY, |l| (l - expected).abs());
                rows.push(tol.equal(&format!("c3b.new_negative_{label}"), rep.new_negative.len() as f64, 1.0));
                rows.push(tol.max(&format!("c3b.bound_state_{label}"), err, 5e-3).with_detail(format!("{:?}", rep.new_negative)));
            }
            if label == "sampled" {
                drifts.push(rep.max_band_drift);
            }
        }
    }
    rows.push(
        tol.max("c3c.band_drift_ratio", drifts[1] / drifts[0], 1.0)
            .with_detail(format!("max relative drift of the 20 lowest band levels: L=40 {:.3e}, L=80 {:.3e}", drifts[0], drifts[1])),
    );
    Ok(Criterion { id: 3, title: "Spectrum claims", rows, plot: None })
}

/// Random `Phi` samples for criteria 4 and 5.
pub fn factorization_samples(seed: u64, count: usize, n: usize) -> Vec<CMat> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| factorize::random_unit_minor(n, 0.3, &mut rng)).collect()
}

/// `Phi = L U - 1` whose leading minor `k` (1-based) is the first singular one.
pub fn singular_minor_sample(n: usize, k: usize, rng: &mut impl Rng) -> CMat {
    let mut l = CMat::identity(n, n);
    let mut u = CMat::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = c(rng.random_range(-0.3..=0.3));
            u[(j, i)] = c(rng.random_range(-0.3..=0.3));
        }
    }
    u[(k - 1, k - 1)] = c(0.0);
    l * u - CMat::identity(n, n)
}

pub fn criterion_4(samples: &[CMat], seed: u64, tol: &Tolerances) -> Result<Criterion> {
    let (mut recon, mut brk, mut bad_structure, mut ddev) = (0.0f64, 0.0f64, 0usize, 0.0f64);
    for phi in samples {
        let chain = ProjectorChain::natural(phi.nrows());
        let pair = factorize::gk_factorize(phi, &chain)?;
        recon = recon.max(pair.reconstruction_residual());
        brk = brk.max(pair.break_relation());
        ddev = ddev.max(pair.d_deviation());
        if !pair.structure_exact() {
            bad_structure += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5349_4e47);
    let n = samples.first().map_or(50, CMat::nrows);
    let mut wrong = Vec::new();
    for k in [1, 7, n] {
        let phi = singular_minor_sample(n, k, &mut rng);
        let chain = ProjectorChain::natural(n);
        let ok = |r: std::result::Result<_, Error>| matches!(r, Err(Error::SingularMinor { k: j }) if j == k);
        if !ok(factorize::gk_factorize(&phi, &chain).map(|_| ())) || !ok(factorize::glm_solve(&phi, &chain).map(|_| ())) {
            wrong.push(k);
        }
    }
    Ok(Criterion {
        id: 4,
        title: "Gokhberg-Krein factorization",
        rows: vec![
            tol.max("c4.reconstruction", recon, 1e-10).with_detail(format!("{} samples, max |D - 1| {ddev:.3e}", samples.len())),
            tol.equal("c4.structure_violations", bad_structure as f64, 0.0),
            tol.max("c4.break_relation", brk, 0.0),
            tol.equal("c4.singular_minor_misreported", wrong.len() as f64, 0.0)
                .with_detail(format!("probed k = 1, 7, {n}; misreported {wrong:?}")),
        ],
        plot: None,
    })
}

/// The 2x2 example `Phi = [[0, 1], [1, 1]]` with `K+ = [[0, 0], [-1, 0]]`,
/// `K- = [[0, 1], [0, 0]]`, reproduced without rounding by both routes.
pub fn worked_example_exact() -> Result<bool> {
    let m = |a: [[f64; 2]; 2]| CMat::from_fn(2, 2, |i, j| c(a[i][j]));
    let phi = m([[0.0, 1.0], [1.0, 1.0]]);
    let (kp, km) = (m([[0.0, 0.0], [-1.0, 0.0]]), m([[0.0, 1.0], [0.0, 0.0]]));
    let chain = ProjectorChain::natural(2);
    let pair = factorize::gk_factorize(&phi, &chain)?;
    let (gp, gm) = factorize::glm_solve(&phi, &chain)?;
    Ok(pair.k_plus == kp && pair.k_minus == km && gp == kp && gm == km && pair.reconstruction_residual() == 0.0)
}

pub fn criterion_5(samples: &[CMat], tol: &Tolerances) -> Result<Criterion> {
    let (mut res, mut agree) = (0.0f64, 0.0f64);
    for phi in samples {
        let chain = ProjectorChain::natural(phi.nrows());
        let (kp, km) = factorize::glm_solve(phi, &chain)?;
        res = res.max(factorize::glm_residual(phi, &kp, &km));
        let pair = factorize::gk_factorize(phi, &chain)?;
        agree = agree.max(max_abs(&(&kp - &pair.k_plus)));
    }
    Ok(Criterion {
        id: 5,
        title: "Gelfand-Levitan-Marchenko equation",
        rows: vec![
            tol.max("c5.glm_residual", res, 1e-10),
            tol.max("c5.glm_vs_gk", agree, 1e-9).with_detail("max entrywise |K+_glm - K+_gk|"),
            tol.equal("c5.worked_example_exact", worked_example_exact()? as u8 as f64, 1.0),
        ],
        plot: None,
    })
}

pub fn criterion_6(tol: &Tolerances) -> Result<Criterion> {
    let n = 200;
    let g = Grid1D::dirichlet(0.0, 1.0, n)?;
    let l = discretize(&DiffOp::schrodinger(&g, |_| c(0.0))?, 2)?;
    let fam = spectral::eigensolve(&l, n, None)?;
    let lmax = fam.lambdas().last().map_or(1.0, |z| z.re);
    let band = |a: f64, b: f64| Region::Rect(Band::real(a * lmax, b * lmax));
    let pairs = [
        (band(0.0, 0.4), band(0.2, 0.7)),
        (band(0.0, 0.5), band(0.5, 1.0)),
        (Region::All, band(0.1, 0.3)),
        (Region::Disk { center: c(0.5 * lmax), radius: 0.2 * lmax }, band(0.35, 0.9)),
        (Region::Points { points: fam.lambdas()[..5].to_vec(), tol: 1e-9 * lmax }, band(0.0, 1e-3)),
    ];
    let mut mult: f64 = 0.0;
    for (a, b) in &pairs {
        let ea = spectral::projection_measure(&fam, a);
        let eb = spectral::projection_measure(&fam, b);
        let eab = spectral::projection_measure(&fam, &a.intersect(b));
        mult = mult.max(linalg::frob(&(ea.matrix() * eb.matrix() - eab.matrix())));
        mult = mult.max(linalg::frob(&(ea.matrix() * ea.matrix() - ea.matrix())));
    }
    let mut elem: f64 = 0.0;
    let mut cong: f64 = 0.0;
    for k in 0..fam.len() {
        let (r, s) = spectral::elementary_residuals(&l, &fam, k);
        elem = elem.max(r).max(s);
        cong = cong.max(spectral::congruence_residual(&spectral::elementary_kernel_at(&fam, k), &l, &l)?);
    }
    let resolvent = spectral::kernel_from_measure(&fam, |z| (z + 1.0).inv());
    let gauss = spectral::kernel_from_measure(&fam, |z| (-(z / lmax).powi(2)).exp());
    let comm = spectral::congruence_residual(&resolvent, &l, &l)?.max(spectral::congruence_residual(&gauss, &l, &l)?);
    let t = 1e-3;
    let heat = spectral::kernel_from_measure(&fam, |z| (-z * t).exp());
    let reference = linalg::expm(&(l.matrix() * c(-t)));
    let heat_err = linalg::frob(&(&heat.values - &reference)) / linalg::frob(&reference);
    Ok(Criterion {
        id: 6,
        title: "Congruence and spectral layer",
        rows: vec![
            tol.max("c6.measure_multiplicativity", mult, 1e-10),
            tol.max("c6.elementary_eigen_relations", elem, 1e-10),
            tol.max("c6.elementary_congruence", cong, 1e-10),
            tol.max("c6.measure_commutation", comm, 1e-10),
            tol.max("c6.heat_kernel", heat_err, 1e-9).with_detail(format!("t = {t}")),
        ],
        plot: None,
    })
}

/// Periodic product grid with the given point counts and side lengths.
pub fn torus(ns: &[usize], lengths: &[f64], fiber: usize) -> Result<ProductGrid> {
    let axes = ns.iter().zip(lengths).map(|(&n, &t)| Grid1D::periodic(0.0, t, n)).collect::<Result<Vec<_>>>()?;
    ProductGrid::new(axes, fiber)
}

/// Commuting connection `A_j = S diag(a_j) S^{-1}`.
pub fn diagonalizable_connection(s: &CMat, diags: &[Vec<C64>]) -> Result<Vec<CMat>> {
    let sinv = s.clone().try_inverse().ok_or_else(|| Error::InvalidOperator("similarity is singular".into()))?;
    Ok(diags.iter().map(|d| s * CMat::from_diagonal(&CVec::from_vec(d.clone())) * &sinv).collect())
}

/// Largest `||d_{k+1} d_k|| / (||d_{k+1}|| ||d_k||)`.
pub fn d_squared(cx: &GenComplex) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for k in 0..cx.dim().saturating_sub(1) {
        let (a, b) = (cx.d_matrix(k)?, cx.d_matrix(k + 1)?);
        let scale = linalg::frob(a) * linalg::frob(b);
        if scale > 0.0 {
            worst = worst.max(linalg::frob(&(b * a)) / scale);
        }
    }
    Ok(worst)
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn random_form(grid: &ProductGrid, k: usize, rng: &mut ChaCha8Rng) -> Result<FormField> {
    let len = lagrange::subsets(grid.dim(), k).len() * grid.unknowns();
    let v: Vec<C64> = (0..len).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    FormField::from_vector(grid, k, &v)
}

/// Loop around axis 0 pushed across a block of 2-cells: homologous to the
/// straight loop at the same start.
pub fn deformed_loop(grid: &ProductGrid, start: &[usize], lo: &[usize], extent: &[usize]) -> Result<SurfaceRegion> {
    let straight = SurfaceRegion::loop_around(grid, 0, start);
    let bump = SurfaceRegion::block(grid, lo, &[0, 1], extent).boundary(grid)?.expect("2-chain has a boundary");
    let (SurfaceRegion::Chain { cells: a, .. }, SurfaceRegion::Chain { cells: b, .. }) = (straight, bump) else {
        unreachable!("both are chains")
    };
    Ok(SurfaceRegion::chain(1, a.into_iter().chain(b).collect::<Vec<(Cell, i64)>>()))
}

/// Largest spread of the periods of each `psi` over a set of homologous loops.
pub fn homologous_spread(cx: &GenComplex, phi: &[C64], psis: &[FormField]) -> Result<f64> {
    let g = cx.grid();
    let cycles = vec![
        SurfaceRegion::loop_around(g, 0, &[0, 0]),
        SurfaceRegion::loop_around(g, 0, &[0, 5]),
        deformed_loop(g, &[0, 0], &[3, 0], &[4, 3])?,
    ];
    let b = derham::skrypnik_map(cx, phi, psis, &cycles)?;
    let mut worst: f64 = 0.0;
    for a in 0..psis.len() {
        let scale = (0..cycles.len()).map(|j| b[(a, j)].norm()).fold(1.0, f64::max);
        for j in 1..cycles.len() {
            worst = worst.max((b[(a, j)] - b[(a, 0)]).norm() / scale);
        }
    }
    Ok(worst)
}

/// Configurations of the dimension theorem check: grid, fiber, connection
/// and the predicted joint-kernel dimension.
pub fn dimension_cases() -> Result<Vec<(ProductGrid, Vec<CMat>, usize)>> {
    let s2 = CMat::from_fn(2, 2, |i, j| c([[1.0, 0.5], [0.2, 1.0]][i][j]));
    let s3 = CMat::from_fn(3, 3, |i, j| if i == j { c(1.0) } else { C64::new(0.1 * (i + 2 * j) as f64, 0.05) });
    let z = c(0.0);
    Ok(vec![
        (
            torus(&[16, 16], &[1.0, 1.0], 2)?,
            diagonalizable_connection(&s2, &[vec![z, c(0.7)], vec![z, C64::new(-0.4, 0.3)]])?,
            1,
        ),
        (
            torus(&[8, 10], &[1.0, 1.5], 3)?,
            diagonalizable_connection(&s3, &[vec![z, z, c(0.5)], vec![z, z, C64::new(0.2, -0.6)]])?,
            2,
        ),
        (torus(&[6, 7], &[1.0, 1.0], 2)?, vec![CMat::zeros(2, 2), CMat::zeros(2, 2)], 2),
    ])
}

pub fn criterion_7(seed: u64, tol: &Tolerances) -> Result<Criterion> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4844_5248);
    let (t1, t2) = (1.0, 2.0);
    let g = torus(&[12, 12], &[t1, t2], 1)?;
    let std_cx = GenComplex::standard(&g)?;

    let conn_grid = torus(&[12, 12], &[t1, t2], 2)?;
    let s2 = CMat::from_fn(2, 2, |i, j| c([[1.0, 0.5], [0.2, 1.0]][i][j]));
    let a = diagonalizable_connection(&s2, &[vec![c(0.0), c(0.7)], vec![c(0.0), C64::new(-0.4, 0.3)]])?;
    let conn_fwd = GenComplex::with_connection(&conn_grid, a.clone(), DiffMode::Forward)?;
    let conn_ctr = GenComplex::with_connection(&conn_grid, a, DiffMode::Centered)?;
    let cube = GenComplex::standard(&torus(&[5, 5, 5], &[1.0, 1.0, 1.0], 1)?)?;
    let mut dsq: f64 = 0.0;
    for cx in [&std_cx, &conn_fwd, &conn_ctr, &cube] {
        dsq = dsq.max(d_squared(cx)?);
    }
    let mut rows = vec![tol.max("c7.d_squared", dsq, 1e-12)];

    let mut min_gap = f64::INFINITY;
    for (k, betti) in [1usize, 2, 1].into_iter().enumerate() {
        let rep = derham::harmonic_space(&std_cx, k, 1e-8)?;
        min_gap = min_gap.min(rep.gap);
        rows.push(tol.equal(&format!("c7.harmonic_dim_{k}"), rep.dim as f64, betti as f64));
    }
    rows.push(tol.min("c7.harmonic_gap", min_gap, derham::GAP_MIN));

    let (mut orth, mut recon) = (0.0f64, 0.0f64);
    for k in 0..=2 {
        for _ in 0..50 {
            let parts = derham::hodge_decompose(&std_cx, &random_form(&g, k, &mut rng)?)?;
            orth = orth.max(parts.orthogonality);
            recon = recon.max(parts.reconstruction);
        }
    }
    rows.push(tol.max("c7.hodge_orthogonality", orth, 1e-10).with_detail("50 random forms per degree"));
    rows.push(tol.max("c7.hodge_reconstruction", recon, 1e-10));

    let ones = vec![c(1.0); g.unknowns()];
    let dt = |axis: usize| -> Result<FormField> {
        let mut f = FormField::zeros(&g, 1)?;
        f.component_mut(&[axis]).expect("1-form component").iter_mut().for_each(|z| *z = c(1.0));
        Ok(f)
    };
    let loops = [SurfaceRegion::loop_around(&g, 0, &[0, 0]), SurfaceRegion::loop_around(&g, 1, &[0, 0])];
    let periods = derham::skrypnik_map(&std_cx, &ones, &[dt(0)?, dt(1)?], &loops)?;
    let diag = CMat::from_fn(2, 2, |i, j| if i == j { c([t1, t2][i]) } else { c(0.0) });
    rows.push(tol.max("c7.period_matrix", max_abs(&(periods - diag)), 1e-10).with_detail(format!("T = ({t1}, {t2})")));

    let f = random_form(&g, 0, &mut rng)?;
    let closed = dt(0)?.add(&dt(1)?.scale(c(0.5)))?.add(&derham::d_l(&std_cx, &f)?)?;
    let mut spread = homologous_spread(&std_cx, &ones, &[closed])?;
    let dual = derham::dual_kernel(&conn_fwd, 1e-8);
    let harm = derham::harmonic_space(&conn_fwd, 1, 1e-8)?;
    if dual.ncols() > 0 && harm.dim > 0 {
        let phi: Vec<C64> = dual.column(0).iter().cloned().collect();
        let f = random_form(&conn_grid, 0, &mut rng)?;
        let shifted = harm.basis[0].add(&derham::d_l(&conn_fwd, &f)?.scale(c(0.1)))?;
        let mut psis = harm.basis.clone();
        psis.push(shifted);
        spread = spread.max(homologous_spread(&conn_fwd, &phi, &psis)?);
    }
    rows.push(tol.max("c7.homologous_invariance", spread, 1e-10).with_detail("straight, translated and deformed loops"));

    let mut mismatches = Vec::new();
    for (grid, a, nflat) in dimension_cases()? {
        let joint = derham::joint_kernel_dim(&a, 1e-10);
        let cx = GenComplex::with_connection(&grid, a, DiffMode::Forward)?;
        for k in 0..=2 {
            let predicted = joint * binomial(2, k);
            let oracle = derham::harmonic_dim_oracle(&cx, k, 1e-8)?;
            let found = derham::harmonic_space(&cx, k, 1e-8)?.dim;
            if joint != nflat || oracle != predicted || found != predicted {
                mismatches.push(format!("{:?} fiber {} k={k}: N_flat {joint}, oracle {oracle}, found {found}", grid.axes().iter().map(|x| x.len()).collect::<Vec<_>>(), grid.fiber()));
            }
        }
    }
    rows.push(tol.equal("c7.dimension_theorem", mismatches.len() as f64, 0.0).with_detail(if mismatches.is_empty() {
        "grids 16x16/2, 8x10/3, 6x7/2".to_string()
    } else {
        mismatches.join("; ")
    }));
    Ok(Criterion { id: 7, title: "de Rham-Hodge-Skrypnik layer", rows, plot: None })
}

/// Volterra radii of every operator the pipeline can build from `data`.
pub fn all_radii(data: &TransmutationData) -> Result<Vec<(String, f64)>> {
    let mut out = Vec::new();
    for sign in [Sign::Plus, Sign::Minus] {
        for side in [Side::Forward, Side::Adjoint] {
            let op = transmute::delsarte_operator(data, sign, side)?;
            out.push((format!("{sign:?}/{side:?}"), op.volterra_radius()?));
            let inv = transmute::delsarte_inverse(data, sign, side)?;
            out.push((format!("{sign:?}/{side:?}/inverse"), inv.volterra_radius()?));
        }
    }
    Ok(out)
}

/// Complex fiber-2 family on a short grid, used as a second Volterra sample.
pub fn random_family(seed: u64) -> Result<TransmutationData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x564f_4c54);
    let g = Grid1D::dirichlet(0.0, 1.0, 60)?;
    let (n, m) = (g.len() * 2, 3);
    let mut draw = || C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
    let psi = CMat::from_fn(n, m, |_, _| draw());
    let phi = CMat::from_fn(n, m, |_, _| draw());
    let lambdas = (0..m).map(|k| C64::new(-(k as f64) - 1.0, 0.5 * k as f64)).collect();
    TransmutationData::new(g, 2, lambdas, psi, phi)
}

pub fn criterion_8(p: &SolitonPipeline, seed: u64, tol: &Tolerances) -> Result<Criterion> {
    let mut radii = all_radii(&p.data)?;
    radii.extend(all_radii(&random_family(seed)?)?.into_iter().map(|(k, v)| (format!("random {k}"), v)));
    let (worst_name, worst) = radii.iter().cloned().fold((String::new(), 0.0f64), |a, b| if b.1 > a.1 { b } else { a });
    Ok(Criterion {
        id: 8,
        title: "Volterra property",
        rows: vec![tol.max("c8.volterra_radius", worst, 1e-10).with_detail(format!(
            "{} operators; largest at {}",
            radii.len(),
            if worst_name.is_empty() { "none".into() } else { worst_name }
        ))],
        plot: None,
    })
}

/// Criteria 4 and 5 rerun from the same seed; the row counts differing rows.
pub fn criterion_9(first: &[&Criterion], seed: u64, tol: &Tolerances) -> Result<Criterion> {
    let samples = factorization_samples(seed, 200, 50);
    let again = [criterion_4(&samples, seed, tol)?, criterion_5(&samples, tol)?];
    let a: Vec<&ResidualRow> = first.iter().flat_map(|c| &c.rows).collect();
    let b: Vec<&ResidualRow> = again.iter().flat_map(|c| &c.rows).collect();
    let diff = a.len().abs_diff(b.len()) + a.iter().zip(&b).filter(|(x, y)| x != y).count();
    Ok(Criterion {
        id: 9,
        title: "Determinism",
        rows: vec![tol.equal("c9.seeded_rerun_differences", diff as f64, 0.0)
            .with_detail("report hashes across runs are compared by the caller")],
        plot: None,
    })
}

/// Criteria 1-9 in order.
pub fn run_all(seed: u64, tol: &Tolerances) -> Result<Vec<Criterion>> {
    run_selected(&[1, 2, 3, 4, 5, 6, 7, 8, 9], seed, tol, &mut |_, _| {})
}

/// The listed criteria in ascending order; `on_done` receives each result
/// with its wall-clock seconds.
pub fn run_selected(ids: &[usize], seed: u64, tol: &Tolerances, on_done: &mut dyn FnMut(&Criterion, f64)) -> Result<Vec<Criterion>> {
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    if let Some(bad) = ids.iter().find(|&&i| !(1..=9).contains(&i)) {
        return Err(Error::Config(format!("unknown criterion {bad}")));
    }
    let mut pipe: Option<SolitonPipeline> = None;
    let mut samples: Option<Vec<CMat>> = None;
    let mut seeded: Vec<Criterion> = Vec::new();
    let mut out = Vec::new();
    for id in ids {
        let t = std::time::Instant::now();
        if matches!(id, 2 | 3 | 8) && pipe.is_none() {
            pipe = Some(SolitonPipeline::new(Grid1D::dirichlet(-20.0, 20.0, 400)?, 1.0)?);
        }
        if matches!(id, 4 | 5 | 9) && samples.is_none() {
            samples = Some(factorization_samples(seed, 200, 50));
        }
        let crit = match id {
            1 => criterion_1(tol)?,
            2 => criterion_2(pipe.as_ref().expect("built above"), tol)?,
            3 => criterion_3(pipe.as_ref().expect("built above"), tol)?,
            4 => criterion_4(samples.as_deref().expect("drawn above"), seed, tol)?,
            5 => criterion_5(samples.as_deref().expect("drawn above"), tol)?,
            6 => criterion_6(tol)?,
            7 => criterion_7(seed, tol)?,
            8 => criterion_8(pipe.as_ref().expect("built above"), seed, tol)?,
            _ => {
                let s = samples.as_deref().expect("drawn above");
                if seeded.len() != 2 {
                    seeded = vec![criterion_4(s, seed, tol)?, criterion_5(s, tol)?];
                }
                criterion_9(&seeded.iter().collect::<Vec<_>>(), seed, tol)?
            }
        };
        if matches!(id, 4 | 5) {
            seeded.push(crit.clone());
        }
        on_done(&crit, t.elapsed().as_secs_f64());
        out.push(crit);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comparators() {
        assert!(ResidualRow::new("a", 1.0, 1.0, Comparator::Max).pass);
        assert!(!ResidualRow::new("a", f64::NAN, 1.0, Comparator::Max).pass);
        assert!(ResidualRow::new("a", 2.0, 1.8, Comparator::Min).pass);
        assert!(!ResidualRow::new("a", 1e-16, 0.0, Comparator::Max).pass);
    }

    #[test]
    fn order_of_exact_power_law() {
        let h = [0.1, 0.05, 0.025];
        let r: Vec<f64> = h.iter().map(|x: &f64| 3.0 * x.powi(2)).collect();
        assert!((fitted_order(&h, &r) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn binomials() {
        assert_eq!((0..=3).map(|k| binomial(3, k)).collect::<Vec<_>>(), vec![1, 3, 3, 1]);
    }
}
