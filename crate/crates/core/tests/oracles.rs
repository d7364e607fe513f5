//! Checks against independent oracles: closed forms, convergence orders and
//! dense reference solvers.

use delsarte::darboux::{self, DressingSeed, SchrodingerOp};
use delsarte::grid::{discretize, formal_adjoint, sample, CoeffField, DiffOp, Grid1D, ProductGrid};
use delsarte::lagrange::bilinear_concomitant;
use delsarte::spectral;
use delsarte::transmute;
use delsarte::verify::fitted_order;
use delsarte::{linalg, C64};
use std::f64::consts::{PI, TAU};

fn periodic_op(n: usize) -> (ProductGrid, DiffOp) {
    let g = ProductGrid::line(Grid1D::periodic(0.0, TAU, n).unwrap());
    let p = CoeffField::scalar_fn(&g, |t| C64::new(-(1.5 + t[0].sin()), 0.0)).unwrap();
    let b = CoeffField::scalar_fn(&g, |t| C64::new(0.0, t[0].cos())).unwrap();
    let q = CoeffField::scalar_fn(&g, |t| C64::new(t[0].cos(), 0.0)).unwrap();
    let op = DiffOp::new(g.clone()).with_term(vec![2], p).unwrap().with_term(vec![1], b).unwrap().with_term(vec![0], q).unwrap();
    (g, op)
}

#[test]
fn adjoint_consistency_orders() {
    // The Frobenius measure of discretize(L*) - discretize(L)^H is capped at
    // order 2 for every scheme: single entries near the diagonal differ by
    // O(1) multiples of p'' and only cancel against smooth functions. Applied
    // to a smooth function the difference has the full scheme order.
    for scheme in [2, 4] {
        let (mut hs, mut frob, mut applied) = (Vec::new(), Vec::new(), Vec::new());
        for n in [40, 80, 160] {
            let (g, op) = periodic_op(n);
            let l = discretize(&op, scheme).unwrap();
            let la = discretize(&formal_adjoint(&op, scheme).unwrap(), scheme).unwrap();
            let diff = la.matrix() - l.matrix().adjoint();
            let f = nalgebra::DVector::from_vec(sample(&g, |t| C64::new((t[0].cos()).exp(), t[0].sin())));
            hs.push(g.axis(0).spacing());
            frob.push(linalg::frob(&diff) / l.norm());
            applied.push((&diff * &f).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
        let (of, oa) = (fitted_order(&hs, &frob), fitted_order(&hs, &applied));
        assert!(of >= 1.8, "scheme {scheme}: Frobenius order {of}, {frob:?}");
        assert!(oa >= scheme as f64 - 0.2, "scheme {scheme}: applied order {oa}, {applied:?}");
    }
}

#[test]
fn discretization_converges_with_scheme_order() {
    // -(1.5 + sin t) f'' + i cos t f' + cos t f for f = exp(sin t)
    let exact = |t: f64| {
        let f = t.sin().exp();
        let f1 = t.cos() * f;
        let f2 = (t.cos().powi(2) - t.sin()) * f;
        C64::new(-(1.5 + t.sin()) * f2 + t.cos() * f, t.cos() * f1)
    };
    for scheme in [2, 4] {
        let (mut hs, mut rs) = (Vec::new(), Vec::new());
        for n in [32, 64, 128] {
            let (g, op) = periodic_op(n);
            let f = sample(&g, |t| C64::new(t[0].sin().exp(), 0.0));
            let lf = discretize(&op, scheme).unwrap().apply(&f).unwrap();
            let err = g.axis(0).points().iter().zip(&lf).map(|(t, v)| (exact(*t) - v).norm()).fold(0.0, f64::max);
            hs.push(g.axis(0).spacing());
            rs.push(err);
        }
        let order = fitted_order(&hs, &rs);
        assert!(order >= scheme as f64 - 0.2, "scheme {scheme}: order {order}");
    }
}

#[test]
fn lagrange_identity_converges_for_fourth_order_scheme() {
    let (mut hs, mut rs) = (Vec::new(), Vec::new());
    for n in [50, 100, 200] {
        let g = ProductGrid::line(Grid1D::periodic(0.0, TAU, n).unwrap());
        let op = DiffOp::schrodinger(g.axis(0), |x| C64::new(x.cos(), 0.0)).unwrap();
        let c = bilinear_concomitant(&op, 4).unwrap();
        let phi = sample(&g, |t| C64::new(t[0].sin().exp(), t[0].cos()));
        let psi = sample(&g, |t| C64::new((2.0 * t[0]).cos(), (t[0].cos()).exp()));
        let res = c.identity_residual(&phi, &psi).unwrap();
        hs.push(g.axis(0).spacing());
        rs.push(res.iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    assert!(fitted_order(&hs, &rs) >= 3.8, "{rs:?}");
}

#[test]
fn reflectionless_potentials_decay_at_the_edge() {
    // half-width 20 >= 10 / min kappa
    let grid = Grid1D::dirichlet(-20.0, 20.0, 801).unwrap();
    let base = SchrodingerOp::free(grid.clone());
    for kappas in [vec![1.0], vec![1.0, 2.0], vec![1.0, 1.5, 2.5]] {
        let q = darboux::crum_iterate(&base, &DressingSeed::soliton_sequence(&kappas)).unwrap();
        let edge = q.potential()[0].norm().max(q.potential()[grid.len() - 1].norm());
        assert!(edge <= 1e-8, "kappas {kappas:?}: |q(edge)| = {edge:e}");
    }
}

#[test]
fn adjoint_family_kernels_are_conjugate_transposes() {
    let g = Grid1D::dirichlet(0.0, 1.0, 40).unwrap();
    let op = DiffOp::schrodinger(&g, |x| C64::new(4.0 * x, 2.0 - x)).unwrap();
    let a = discretize(&op, 2).unwrap();
    let fam = spectral::eigensolve(&a, 8, None).unwrap();
    let adj = spectral::eigensolve(&a.adjoint(), 40, None).unwrap();
    for k in 0..fam.len() {
        let z = spectral::elementary_kernel_at(&fam, k).values;
        let j = adj.index_of(fam.lambdas()[k].conj()).expect("conjugate eigenvalue present");
        let za = spectral::elementary_kernel_at(&adj, j).values;
        let err = (za - z.adjoint()).iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(err <= 1e-10, "lambda {}: {err:e}", fam.lambdas()[k]);
    }
}

#[test]
fn tridiagonal_solver_matches_dense_reference() {
    let n = 60;
    let d: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
    let e: Vec<f64> = (0..n - 1).map(|i| 1.0 + (i as f64 * 1.3).cos()).collect();
    let fast = linalg::tridiagonal_eigenvalues(&d, &e);
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            d[i]
        } else if i.abs_diff(j) == 1 {
            e[i.min(j)]
        } else {
            0.0
        }
    });
    let mut dense: Vec<f64> = m.symmetric_eigenvalues().iter().cloned().collect();
    dense.sort_by(f64::total_cmp);
    for (a, b) in fast.iter().zip(&dense) {
        assert!((a - b).abs() <= 1e-12 * 10.0, "{a} vs {b}");
    }
}

#[test]
fn discrete_soliton_seed_solves_the_difference_equation() {
    let grid = Grid1D::dirichlet(-5.0, 5.0, 99).unwrap();
    let kappa = 1.3;
    let data = transmute::soliton_data(&grid, kappa).unwrap();
    let l = SchrodingerOp::free(grid.clone()).operator().unwrap();
    let psi: Vec<C64> = data.psi().column(0).iter().cloned().collect();
    let lpsi = l.apply(&psi).unwrap();
    let lam = data.lambdas()[0];
    let h = grid.spacing();
    assert!((lam.re + (2.0 * (kappa * h).cosh() - 2.0) / (h * h)).abs() < 1e-12);
    // exact on every row except the last, where the seed does not vanish
    let scale = psi.iter().map(|z| z.norm()).fold(0.0, f64::max) * lam.norm();
    for i in 0..grid.len() - 1 {
        assert!((lpsi[i] - lam * psi[i]).norm() <= 1e-12 * scale, "row {i}");
    }
}

#[test]
fn dirichlet_laplacian_matches_sine_spectrum() {
    let n = 50;
    let g = Grid1D::dirichlet(0.0, PI, n).unwrap();
    let ev = SchrodingerOp::free(g.clone()).eigenvalues().unwrap();
    let h = g.spacing();
    for (k, z) in ev.iter().enumerate() {
        let exact = 4.0 / (h * h) * ((k + 1) as f64 * h / 2.0).sin().powi(2);
        assert!((z.re - exact).abs() <= 1e-10 * exact, "k = {k}");
    }
}
