//! Biorthogonal eigenfamily of a non-self-adjoint operator, its projection
//! measure and elementary kernels.

use delsarte::grid::{discretize, DiffOp, Grid1D};
use delsarte::spectral::{self, Band, Region};
use delsarte::{Result, C64};

fn main() -> Result<()> {
    let grid = Grid1D::dirichlet(0.0, 1.0, 80)?;
    // complex potential makes L non-self-adjoint
    let op = DiffOp::schrodinger(&grid, |x| C64::new(5.0 * x, 3.0 * (1.0 - x)))?;
    let l = discretize(&op, 2)?;
    let fam = spectral::eigensolve(&l, 12, None)?;
    let (r, rs) = fam.residuals(&l);
    println!("12 eigenpairs, residuals {r:.2e} / {rs:.2e}, biorthonormality {:.2e}", fam.biorthonormality_error());
    for k in 0..4 {
        println!("  lambda_{k} = {:.6} {:+.6}i", fam.lambdas()[k].re, fam.lambdas()[k].im);
    }

    let low = Region::Rect(Band::real(f64::NEG_INFINITY, 500.0));
    let e = spectral::projection_measure(&fam, &low);
    let e2 = e.matrix() * e.matrix();
    let idem = (&e2 - e.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
    println!("E(Re lambda < 500): max|E^2 - E| = {idem:.2e}");

    for k in 0..3 {
        let (a, b) = spectral::elementary_residuals(&l, &fam, k);
        println!("elementary kernel {k}: (L - lambda) Z = {a:.2e}, Z (L - lambda) = {b:.2e}");
    }
    Ok(())
}
