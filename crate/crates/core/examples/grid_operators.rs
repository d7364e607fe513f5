//! Discretizes a Schrodinger operator and a first-order operator with a
//! variable matrix coefficient, then compares matrix and formal adjoints.

use delsarte::grid::{commutator, discretize, formal_adjoint, sample, CoeffField, DiffOp, Grid1D, ProductGrid};
use delsarte::{CMat, Result, C64};

fn main() -> Result<()> {
    let grid = Grid1D::dirichlet(-10.0, 10.0, 199)?;
    let l = DiffOp::schrodinger(&grid, |x| C64::new(-2.0 / x.cosh().powi(2), 0.0))?;
    for scheme in [2, 4] {
        let m = discretize(&l, scheme)?;
        let asym = (m.matrix() - m.matrix().adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!("scheme {scheme}: dim {} bandwidth {} max|L - L^H| {asym:.2e}", m.dim(), m.bandwidth());
    }

    // a(t) d/dt with a 2x2 coefficient: the matrix adjoint and the
    // discretized formal adjoint agree to second order
    let mut prev = None;
    for n in [64, 128, 256] {
        let pg = ProductGrid::new(vec![Grid1D::periodic(0.0, 1.0, n)?], 2)?;
        let tau = std::f64::consts::TAU;
        let a = CoeffField::from_fn(&pg, |t| {
            let s = (tau * t[0]).sin();
            CMat::from_row_slice(2, 2, &[C64::new(1.0, 0.0), C64::new(s, 0.0), C64::new(0.0, s), C64::new(2.0, 0.0)])
        })?;
        let op = DiffOp::new(pg.clone()).with_term(vec![1], a)?;
        let (m, ma) = (discretize(&op, 2)?, discretize(&formal_adjoint(&op, 2)?, 2)?);
        let f: Vec<C64> = sample(&pg, |t| C64::new((tau * t[0]).cos(), (tau * t[0]).sin()))
            .into_iter()
            .flat_map(|z| [z, z * 0.5])
            .collect();
        let u = m.adjoint().apply(&f)?;
        let v = ma.apply(&f)?;
        let err = u.iter().zip(&v).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let order = prev.map(|p: f64| (p / err).log2());
        println!("n = {n}: max|L^H f - L* f| = {err:.3e}{}", order.map_or(String::new(), |o| format!(" (order {o:.2})")));
        prev = Some(err);
        if n == 256 {
            println!("||[L, L*]||_F / ||L||_F^2 = {:.3e}", commutator(&m, &ma)?.norm() / m.norm().powi(2));
        }
    }
    Ok(())
}
