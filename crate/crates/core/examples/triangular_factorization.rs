//! Triangular splitting of 1 + Phi along a projector chain, and the failure
//! mode for a singular leading minor.

use delsarte::factorize::{self, ProjectorChain};
use delsarte::{CMat, Error, Result, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let phi = factorize::random_unit_minor(30, 0.3, &mut rng);
    for chain in [ProjectorChain::natural(30), ProjectorChain::new((0..30).rev().collect())?] {
        let pair = factorize::gk_factorize(&phi, &chain)?;
        println!(
            "chain {:?}..: reconstruction {:.2e}, D deviation {:.2e}, structure exact {}, break relation {:.1e}",
            &chain.order()[..3],
            pair.reconstruction_residual(),
            pair.d_deviation(),
            pair.structure_exact(),
            pair.break_relation()
        );
    }

    // the leading 2x2 minor of 1 + Phi vanishes
    let mut bad = CMat::zeros(4, 4);
    bad[(0, 1)] = C64::new(1.0, 0.0);
    bad[(1, 0)] = C64::new(1.0, 0.0);
    match factorize::gk_factorize(&bad, &ProjectorChain::natural(4)) {
        Err(Error::SingularMinor { k }) => println!("singular leading minor reported at k = {k}"),
        other => println!("unexpected: {other:?}"),
    }
    Ok(())
}
