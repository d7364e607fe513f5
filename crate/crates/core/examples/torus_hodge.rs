//! Generalized de Rham complex on a periodic 2-D grid: harmonic dimensions,
//! with and without a flat connection, and a Hodge decomposition.

use delsarte::derham::{self, DiffMode, GenComplex};
use delsarte::grid::{Grid1D, ProductGrid};
use delsarte::lagrange::FormField;
use delsarte::{CMat, Result, C64};

fn main() -> Result<()> {
    let g = ProductGrid::new(vec![Grid1D::periodic(0.0, 1.0, 10)?, Grid1D::periodic(0.0, 2.0, 10)?], 1)?;
    let cx = GenComplex::standard(&g)?;
    for k in 0..=2 {
        let rep = derham::harmonic_space(&cx, k, 1e-8)?;
        println!("standard d: dim H^{k} = {} (gap {:.1e})", rep.dim, rep.gap);
    }

    // a connection with nontrivial holonomy kills all harmonic forms
    let a = vec![CMat::from_element(1, 1, C64::new(0.3, 0.0)), CMat::zeros(1, 1)];
    let twisted = GenComplex::with_connection(&g, a.clone(), DiffMode::Forward)?;
    println!("joint kernel dimension of the connection: {}", derham::joint_kernel_dim(&a, 1e-10));
    for k in 0..=2 {
        println!("twisted d: dim H^{k} = {}", derham::harmonic_space(&twisted, k, 1e-8)?.dim);
    }

    let v: Vec<C64> = (0..2 * g.unknowns()).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
    let beta = FormField::from_vector(&g, 1, &v)?;
    let parts = derham::hodge_decompose(&cx, &beta)?;
    println!("Hodge split of a 1-form: orthogonality {:.2e}, reconstruction {:.2e}", parts.orthogonality, parts.reconstruction);
    Ok(())
}
