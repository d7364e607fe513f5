//! Period matrix of the Skrypnik map on a torus: constant 1-forms against
//! the two fundamental loops.

use delsarte::derham::{self, GenComplex};
use delsarte::grid::{Grid1D, ProductGrid};
use delsarte::lagrange::{FormField, SurfaceRegion};
use delsarte::{Result, C64};

fn main() -> Result<()> {
    let (t1, t2) = (1.0, 2.5);
    let g = ProductGrid::new(vec![Grid1D::periodic(0.0, t1, 12)?, Grid1D::periodic(0.0, t2, 15)?], 1)?;
    let cx = GenComplex::standard(&g)?;
    let ones = vec![C64::new(1.0, 0.0); g.unknowns()];
    let dt = |axis: usize| -> Result<FormField> {
        let mut f = FormField::zeros(&g, 1)?;
        f.component_mut(&[axis]).expect("1-form component").iter_mut().for_each(|z| *z = C64::new(1.0, 0.0));
        Ok(f)
    };
    let loops: Vec<SurfaceRegion> = (0..2).map(|a| SurfaceRegion::loop_around(&g, a, &[0, 0])).collect();
    let periods = derham::skrypnik_map(&cx, &ones, &[dt(0)?, dt(1)?], &loops)?;
    println!("period matrix (expected diag({t1}, {t2})):");
    for i in 0..2 {
        println!("  [{:+.12} {:+.12}]", periods[(i, 0)].re, periods[(i, 1)].re);
    }

    // a loop translated by a few nodes gives the same periods
    let shifted: Vec<SurfaceRegion> = (0..2).map(|a| SurfaceRegion::loop_around(&g, a, &[3, 5])).collect();
    let p2 = derham::skrypnik_map(&cx, &ones, &[dt(0)?, dt(1)?], &shifted)?;
    println!("translated loops: max difference {:.2e}", (&periods - p2).iter().map(|z| z.norm()).fold(0.0, f64::max));
    Ok(())
}
