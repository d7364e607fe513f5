//! Delsarte transmutation of the free operator by the discrete one-soliton
//! seed: the transformed operator is local and carries -2 sech^2.

use delsarte::darboux::{extract_potential, SchrodingerOp};
use delsarte::grid::{Grid1D, OperatorMatrix};
use delsarte::transmute::{self, Side, Sign};
use delsarte::Result;

fn main() -> Result<()> {
    let grid = Grid1D::dirichlet(-20.0, 20.0, 400)?;
    let l = SchrodingerOp::free(grid.clone()).operator()?;
    let data = transmute::soliton_data(&grid, 1.0)?;
    let om = transmute::delsarte_operator(&data, Sign::Plus, Side::Forward)?;
    let ltil_dd = transmute::transform_operator_dd(&l, &om)?;
    let ltil = OperatorMatrix::from_dense(ltil_dd.to_cmat());

    println!("condition number of Omega_+: {:.3e}", om.condition_number());
    println!("Volterra radius: {:.1e}", om.volterra_radius()?);
    println!("intertwining residual: {:.2e}", transmute::intertwining_residual(&ltil, &om, &l)?);
    println!("off-band ratio (bandwidth 1): {:.2e}", transmute::locality_check(&ltil, 1, 3));

    let q = extract_potential(&ltil);
    for x in [-4.0, -1.0, 0.0, 1.0, 4.0] {
        let i = grid.index_of(x).or_else(|| (0..grid.len()).min_by(|&a, &b| (grid.point(a) - x).abs().total_cmp(&(grid.point(b) - x).abs()))).unwrap();
        let xi = grid.point(i);
        if let Some(v) = q[i] {
            println!("  q~({xi:+.3}) = {:+.6}   -2 sech^2 = {:+.6}", v.re, -2.0 / xi.cosh().powi(2));
        }
    }
    Ok(())
}
