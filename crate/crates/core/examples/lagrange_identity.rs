//! Bilinear concomitant of a variable-coefficient operator and the pointwise
//! Lagrange identity on the grid.

use delsarte::grid::{sample, CoeffField, DiffOp, Grid1D, ProductGrid};
use delsarte::lagrange::bilinear_concomitant;
use delsarte::{Result, C64};

fn main() -> Result<()> {
    let tau = std::f64::consts::TAU;
    for scheme in [2, 4] {
        let mut prev = None;
        for n in [100, 200, 400] {
            let pg = ProductGrid::line(Grid1D::periodic(0.0, 1.0, n)?);
            let p = CoeffField::scalar_fn(&pg, |t| C64::new(-(1.0 + 0.3 * (tau * t[0]).cos()), 0.0))?;
            let b = CoeffField::scalar_fn(&pg, |t| C64::new(0.0, (tau * t[0]).sin()))?;
            let q = CoeffField::scalar_fn(&pg, |t| C64::new(t[0], 0.0))?;
            let op = DiffOp::new(pg.clone()).with_term(vec![2], p)?.with_term(vec![1], b)?.with_term(vec![0], q)?;
            let phi = sample(&pg, |t| C64::new((tau * t[0]).sin(), (2.0 * tau * t[0]).cos()));
            let psi = sample(&pg, |t| C64::new((3.0 * tau * t[0]).cos(), 0.5));
            let c = bilinear_concomitant(&op, scheme)?;
            let res = c.identity_residual(&phi, &psi)?;
            let worst = res.iter().map(|r| r.norm()).fold(0.0, f64::max);
            let order = prev.map(|p: f64| (p / worst).log2());
            println!(
                "scheme {scheme}, n = {n}: {} terms, max identity residual {worst:.3e}{}",
                c.terms().len(),
                order.map_or(String::new(), |o| format!(" (order {o:.2})"))
            );
            prev = Some(worst);
        }
    }
    Ok(())
}
