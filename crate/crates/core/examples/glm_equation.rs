//! Discrete Gelfand-Levitan-Marchenko equation solved row by row and compared
//! with the triangular factors.

use delsarte::factorize::{self, ProjectorChain};
use delsarte::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let chain = ProjectorChain::natural(40);
    for scale in [0.05, 0.3, 1.0] {
        let phi = factorize::random_unit_minor(40, scale, &mut rng);
        let (kp, km) = factorize::glm_solve(&phi, &chain)?;
        let pair = factorize::gk_factorize(&phi, &chain)?;
        let agree = (&kp - &pair.k_plus).iter().map(|z| z.norm()).fold(0.0, f64::max);
        println!(
            "scale {scale}: GLM residual {:.2e}, |K+ (GLM) - K+ (factorization)| {agree:.2e}",
            factorize::glm_residual(&phi, &kp, &km)
        );
    }
    Ok(())
}
