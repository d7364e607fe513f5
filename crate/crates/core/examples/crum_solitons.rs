//! Two Crum dressings of the free operator, with analytic and sampled seeds,
//! and the resulting bound states.

use delsarte::darboux::{self, DressingSeed, SchrodingerOp};
use delsarte::grid::Grid1D;
use delsarte::Result;

fn main() -> Result<()> {
    let grid = Grid1D::dirichlet(-20.0, 20.0, 801)?;
    let base = SchrodingerOp::free(grid.clone());
    let analytic = DressingSeed::soliton_sequence(&[1.0, 2.0]);
    let sampled = [DressingSeed::Sampled { energy: -1.0 }, DressingSeed::Sampled { energy: -4.0 }];
    for (name, seeds) in [("analytic", &analytic[..]), ("sampled", &sampled[..])] {
        let dressed = darboux::crum_iterate(&base, seeds)?;
        let rep = darboux::spectrum_compare(&base, &dressed, 10)?;
        let i0 = grid.len() / 2;
        println!("{name}: q~({:.2}) = {:.6}, new bound states {:?}", grid.point(i0), dressed.potential()[i0].re, rep.new_negative);
    }
    println!("closed form: q(0) = -6, bound states -4 and -1");
    Ok(())
}
