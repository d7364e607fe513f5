//! Randomized invariants.

use delsarte::derham::{self, DiffMode, GenComplex};
use delsarte::factorize::{self, ProjectorChain};
use delsarte::grid::{discretize, CoeffField, DiffOp, Grid1D, ProductGrid};
use delsarte::lagrange::{self, bilinear_concomitant, FormField, SurfaceRegion};
use delsarte::spectral::{self, Band, Region};
use delsarte::transmute::{self, Side, Sign, TransmutationData};
use delsarte::verify;
use delsarte::{CMat, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cz(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn banded_storage_round_trips(seed in any::<u64>(), n in 5usize..30, scheme in prop::sample::select(vec![2usize, 4]), periodic in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let axis = if periodic { Grid1D::periodic(0.0, 1.0, n) } else { Grid1D::dirichlet(0.0, 1.0, n) }.unwrap();
        let g = ProductGrid::new(vec![axis], 2).unwrap();
        let coeff = |rng: &mut ChaCha8Rng| CoeffField::from_samples(&g, (0..4 * n).map(|_| cz(rng)).collect()).unwrap();
        let op = DiffOp::new(g.clone())
            .with_term(vec![2], coeff(&mut rng)).unwrap()
            .with_term(vec![1], coeff(&mut rng)).unwrap()
            .with_term(vec![0], coeff(&mut rng)).unwrap();
        let m = discretize(&op, scheme).unwrap();
        prop_assert!(m.bandwidth() <= delsarte::grid::bandwidth_bound(&op, scheme));
        let round = m.to_banded().to_dense();
        prop_assert_eq!(round.matrix(), m.matrix());
    }

    #[test]
    fn concomitant_is_semilinear(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = ProductGrid::line(Grid1D::periodic(0.0, 1.0, 24).unwrap());
        let q = CoeffField::from_samples(&g, (0..24).map(|_| cz(&mut rng)).collect()).unwrap();
        let b = CoeffField::from_samples(&g, (0..24).map(|_| cz(&mut rng)).collect()).unwrap();
        let op = DiffOp::new(g.clone())
            .with_term(vec![2], CoeffField::scalar_fn(&g, |_| C64::new(-1.0, 0.0)).unwrap()).unwrap()
            .with_term(vec![1], b).unwrap()
            .with_term(vec![0], q).unwrap();
        let c = bilinear_concomitant(&op, 2).unwrap();
        let phi: Vec<C64> = (0..24).map(|_| cz(&mut rng)).collect();
        let psi: Vec<C64> = (0..24).map(|_| cz(&mut rng)).collect();
        let (a, s) = (cz(&mut rng), cz(&mut rng));
        let z = c.components(&phi, &psi).unwrap();
        let phi_a: Vec<C64> = phi.iter().map(|v| a * v).collect();
        let psi_s: Vec<C64> = psi.iter().map(|v| s * v).collect();
        let zs = c.components(&phi_a, &psi_s).unwrap();
        for (zi, zsi) in z.iter().zip(&zs) {
            for (u, v) in zi.iter().zip(zsi) {
                prop_assert!((a.conj() * s * u - v).norm() <= 1e-12 * (1.0 + u.norm()));
            }
        }
    }

    #[test]
    fn discrete_stokes_on_blocks(seed in any::<u64>(), lo0 in 0usize..7, lo1 in 0usize..6, e0 in 1usize..7, e1 in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = verify::torus(&[7, 6], &[1.0, 1.3], 1).unwrap();
        let v: Vec<C64> = (0..2 * g.unknowns()).map(|_| cz(&mut rng)).collect();
        let w = FormField::from_vector(&g, 1, &v).unwrap();
        let dw = lagrange::exterior_derivative(&w).unwrap();
        let block = SurfaceRegion::block(&g, &[lo0, lo1], &[0, 1], &[e0, e1]);
        let bnd = block.boundary(&g).unwrap().unwrap();
        let lhs = lagrange::surface_integral(&dw, &block).unwrap();
        let rhs = lagrange::surface_integral(&w, &bnd).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + lhs.norm()));
        prop_assert!(bnd.boundary(&g).unwrap().unwrap().is_empty());
    }

    #[test]
    fn form_components_are_binomial(m in 1usize..4, k in 0usize..4) {
        prop_assume!(k <= m);
        let axes = (0..m).map(|_| Grid1D::periodic(0.0, 1.0, 5).unwrap()).collect();
        let g = ProductGrid::new(axes, 1).unwrap();
        let f = FormField::zeros(&g, k).unwrap();
        prop_assert_eq!(f.components().len(), verify::binomial(m, k));
    }

    #[test]
    fn factorization_structure_and_nesting(seed in any::<u64>(), n in 2usize..24, perm in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = factorize::random_unit_minor(n, 0.4, &mut rng);
        let chain = if perm { ProjectorChain::new((0..n).rev().collect()).unwrap() } else { ProjectorChain::natural(n) };
        let pair = factorize::gk_factorize(&phi, &chain).unwrap();
        prop_assert!(pair.structure_exact());
        prop_assert_eq!(pair.break_relation(), 0.0);
        prop_assert!(pair.reconstruction_residual() <= 1e-10);
        if !perm && n > 2 {
            let m = n / 2;
            let sub = phi.view((0, 0), (m, m)).into_owned();
            let p = factorize::gk_factorize(&sub, &ProjectorChain::natural(m)).unwrap();
            prop_assert!(max_abs(&(&p.k_plus - pair.k_plus.view((0, 0), (m, m)))) <= 1e-13);
            prop_assert!(max_abs(&(&p.k_minus - pair.k_minus.view((0, 0), (m, m)))) <= 1e-13);
        }
    }

    #[test]
    fn unit_lower_group_is_closed(seed in any::<u64>(), n in 2usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let zero = C64::new(0.0, 0.0);
        let mut strict = || CMat::from_fn(n, n, |i, j| if j < i { cz(&mut rng) } else { zero });
        let (a, b) = (CMat::identity(n, n) + strict(), CMat::identity(n, n) + strict());
        let prod = &a * &b;
        let inv = a.solve_lower_triangular(&CMat::identity(n, n)).unwrap();
        for m in [&prod, &inv] {
            for i in 0..n {
                prop_assert_eq!(m[(i, i)], C64::new(1.0, 0.0));
                for j in i + 1..n {
                    prop_assert_eq!(m[(i, j)], zero);
                }
            }
        }
    }

    #[test]
    fn delsarte_kernels_are_volterra(seed in any::<u64>(), fiber in 1usize..3, r in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid1D::dirichlet(0.0, 1.0, 12).unwrap();
        let dim = g.len() * fiber;
        let psi = CMat::from_fn(dim, r, |_, _| cz(&mut rng));
        let phi = CMat::from_fn(dim, r, |_, _| cz(&mut rng));
        let lambdas = (0..r).map(|k| C64::new(-1.0 - k as f64, 0.0)).collect();
        let data = TransmutationData::new(g, fiber, lambdas, psi, phi).unwrap();
        for sign in [Sign::Plus, Sign::Minus] {
            for side in [Side::Forward, Side::Adjoint] {
                let (Ok(om), Ok(inv)) = (transmute::delsarte_operator(&data, sign, side), transmute::delsarte_inverse(&data, sign, side)) else {
                    // random data may make an intermediate Omega_x singular
                    continue;
                };
                prop_assert!(om.has_exact_support());
                prop_assert!(inv.has_exact_support());
                prop_assert!(om.volterra_radius().unwrap() <= 1e-10);
                prop_assert!(inv.volterra_radius().unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn homotopy_normalization_is_bit_exact(seed in any::<u64>(), i in 0usize..10) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Grid1D::dirichlet(0.0, 1.0, 10).unwrap();
        let data = TransmutationData::new(
            g.clone(), 1, vec![C64::new(-2.0, 0.0)],
            CMat::from_fn(10, 1, |_, _| cz(&mut rng)), CMat::from_fn(10, 1, |_, _| cz(&mut rng)),
        ).unwrap();
        let x = g.point(i);
        let k = transmute::build_kernel_omega(&data, x, x).unwrap();
        prop_assert_eq!(&k.values, data.omega0());
    }

    #[test]
    fn projection_measure_is_multiplicative(seed in any::<u64>(), cuts in prop::collection::vec(0.0f64..400.0, 1..4)) {
        let _ = seed;
        let g = Grid1D::dirichlet(0.0, 1.0, 30).unwrap();
        let l = discretize(&DiffOp::schrodinger(&g, |x| C64::new(10.0 * x, 0.0)).unwrap(), 2).unwrap();
        let fam = spectral::eigensolve(&l, 30, None).unwrap();
        let mut edges = cuts.clone();
        edges.push(f64::NEG_INFINITY);
        edges.push(f64::INFINITY);
        edges.sort_by(f64::total_cmp);
        let parts: Vec<Region> = edges.windows(2).map(|w| Region::Rect(Band::real(w[0], w[1]))).collect();
        for a in &parts {
            for b in &parts {
                let ea = spectral::projection_measure(&fam, a);
                let eb = spectral::projection_measure(&fam, b);
                let eab = spectral::projection_measure(&fam, &a.intersect(b));
                prop_assert!(max_abs(&(ea.matrix() * eb.matrix() - eab.matrix())) <= 1e-10);
            }
        }
    }

    #[test]
    fn commuting_connections_give_exact_complexes(seed in any::<u64>(), n0 in 5usize..8, n1 in 5usize..8, centered in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = verify::torus(&[n0, n1], &[1.0, 1.0], 2).unwrap();
        let s = CMat::from_fn(2, 2, |i, j| if i == j { C64::new(1.0, 0.0) } else { cz(&mut rng) * 0.5 });
        let diags = vec![vec![cz(&mut rng), cz(&mut rng)], vec![cz(&mut rng), cz(&mut rng)]];
        let a = verify::diagonalizable_connection(&s, &diags).unwrap();
        let mode = if centered { DiffMode::Centered } else { DiffMode::Forward };
        let cx = GenComplex::with_connection(&g, a, mode).unwrap();
        prop_assert!(verify::d_squared(&cx).unwrap() <= 1e-12);
        prop_assert!(derham::commutator_defect(cx.operators()) <= 1e-12);
    }
}
