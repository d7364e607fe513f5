//! Projector chains, triangular shears, Gokhberg-Krein factorization of
//! `1 + Phi` and the Gelfand-Levitan-Marchenko equation in finite dimension.
//!
//! All triangular notions are taken in chain order: `P_k` projects onto the
//! first `k` indices of the ordering. "Lower" means below the diagonal after
//! reordering.

use nalgebra::LU;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::OperatorMatrix;
use crate::linalg;
use crate::{CMat, C64};

/// Prefix projectors `P_0 = 0 <= P_1 <= ... <= P_n = 1` along an ordering.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectorChain {
    order: Vec<usize>,
}

impl ProjectorChain {
    pub fn natural(n: usize) -> Self {
        Self { order: (0..n).collect() }
    }

    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &i in &order {
            if i >= order.len() || seen[i] {
                return Err(Error::InvalidOperator(format!("chain ordering {order:?} is not a permutation")));
            }
            seen[i] = true;
        }
        Ok(Self { order })
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `P_k` in the original index space.
    pub fn projector(&self, k: usize) -> CMat {
        let n = self.len();
        let mut p = CMat::zeros(n, n);
        for &i in &self.order[..k] {
            p[(i, i)] = C64::new(1.0, 0.0);
        }
        p
    }

    /// `m` with rows and columns rearranged into chain order.
    pub fn to_chain(&self, m: &CMat) -> CMat {
        CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(self.order[i], self.order[j])])
    }

    /// Inverse of [`ProjectorChain::to_chain`].
    pub fn from_chain(&self, m: &CMat) -> CMat {
        let mut out = CMat::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(self.order[i], self.order[j])] = m[(i, j)];
            }
        }
        out
    }

    fn check(&self, m: &CMat) -> Result<()> {
        if m.nrows() != self.len() || m.ncols() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "{}x{} matrix on a chain of length {}",
                m.nrows(),
                m.ncols(),
                self.len()
            )));
        }
        Ok(())
    }
}

/// `(P+(Phi), P-(Phi))`: strictly upper part and lower part with diagonal.
pub fn triangular_shear(phi: &CMat, chain: &ProjectorChain) -> Result<(CMat, CMat)> {
    chain.check(phi)?;
    let c = chain.to_chain(phi);
    let n = c.nrows();
    let upper = CMat::from_fn(n, n, |i, j| if j > i { c[(i, j)] } else { C64::new(0.0, 0.0) });
    let lower = CMat::from_fn(n, n, |i, j| if j <= i { c[(i, j)] } else { C64::new(0.0, 0.0) });
    Ok((chain.from_chain(&upper), chain.from_chain(&lower)))
}

/// `1 + Phi = (1 + K+)^{-1} D (1 + K-)`, all factors in original index order.
#[derive(Clone, Debug, PartialEq)]
pub struct TriangularPair {
    /// Strictly lower in chain order.
    pub k_plus: CMat,
    /// Strictly upper in chain order.
    pub k_minus: CMat,
    pub d: Vec<C64>,
    pub phi: CMat,
    pub chain: ProjectorChain,
}

impl TriangularPair {
    /// `||D - 1||_inf`; zero means the paper's factorization without a
    /// diagonal factor.
    pub fn d_deviation(&self) -> f64 {
        self.d.iter().map(|z| (z - C64::new(1.0, 0.0)).norm()).fold(0.0, f64::max)
    }

    pub fn is_paper_exact(&self) -> bool {
        self.d_deviation() <= 1e-10
    }

    /// `||(1 + K+)^{-1} D (1 + K-) - (1 + Phi)||_F / (1 + ||Phi||_F)`.
    pub fn reconstruction_residual(&self) -> f64 {
        let n = self.phi.nrows();
        let lp = self.chain.to_chain(&(CMat::identity(n, n) + &self.k_plus));
        let up = self.chain.to_chain(&(CMat::identity(n, n) + &self.k_minus));
        let du = CMat::from_fn(n, n, |i, j| self.d[self.chain.order[i]] * up[(i, j)]);
        let x = lp.solve_lower_triangular_unchecked(&du);
        let target = self.chain.to_chain(&(CMat::identity(n, n) + &self.phi));
        linalg::frob(&(x - target)) / (1.0 + linalg::frob(&self.phi))
    }

    /// Whether both Volterra factors vanish exactly on the excluded triangle
    /// (diagonal included), i.e. every width-1 break annihilates them.
    pub fn structure_exact(&self) -> bool {
        let lp = self.chain.to_chain(&self.k_plus);
        let um = self.chain.to_chain(&self.k_minus);
        let n = lp.nrows();
        let zero = C64::new(0.0, 0.0);
        (0..n).all(|i| (i..n).all(|j| lp[(i, j)] == zero) && (0..=i).all(|j| um[(i, j)] == zero))
    }

    /// Largest `|(P_k - P_{k-1}) K (P_k - P_{k-1})|` over both factors.
    pub fn break_relation(&self) -> f64 {
        self.chain
            .order
            .iter()
            .map(|&i| self.k_plus[(i, i)].norm().max(self.k_minus[(i, i)].norm()))
            .fold(0.0, f64::max)
    }
}

fn singular_tol(c: &CMat) -> f64 {
    1e-14 * (1.0 + linalg::frob(c))
}

/// Unit-triangular LDU of `1 + Phi` in chain order (Doolittle, no pivoting).
pub fn gk_factorize(phi: &CMat, chain: &ProjectorChain) -> Result<TriangularPair> {
    chain.check(phi)?;
    let n = phi.nrows();
    let c = chain.to_chain(&(CMat::identity(n, n) + phi));
    let tol = singular_tol(phi);
    let mut a = c.clone();
    let mut l = CMat::identity(n, n);
    for k in 0..n {
        let piv = a[(k, k)];
        if piv.norm() <= tol {
            return Err(Error::SingularMinor { k: k + 1 });
        }
        for i in k + 1..n {
            let f = a[(i, k)] / piv;
            l[(i, k)] = f;
            a[(i, k)] = C64::new(0.0, 0.0);
            for j in k + 1..n {
                let v = a[(k, j)];
                a[(i, j)] -= f * v;
            }
        }
    }
    let d: Vec<C64> = (0..n).map(|k| a[(k, k)]).collect();
    let mut km = CMat::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            km[(i, j)] = a[(i, j)] / d[i];
        }
    }
    // K+ = L^{-1} - 1, strictly lower by construction
    let linv = l.solve_lower_triangular_unchecked(&CMat::identity(n, n));
    let kp = CMat::from_fn(n, n, |i, j| if j < i { linv[(i, j)] } else { C64::new(0.0, 0.0) });
    let mut d_orig = vec![C64::new(0.0, 0.0); n];
    for (k, &i) in chain.order.iter().enumerate() {
        d_orig[i] = d[k];
    }
    Ok(TriangularPair {
        k_plus: chain.from_chain(&kp),
        k_minus: chain.from_chain(&km),
        d: d_orig,
        phi: phi.clone(),
        chain: chain.clone(),
    })
}

/// Where the chain-sum integrand samples `P`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    /// `P_{k-1}`: reproduces the LDU factor exactly.
    Left,
    /// `P_k`: the sum as displayed for continuous chains.
    Right,
}

/// Chain sum `K+ = -sum_k (P_k - P_{k-1}) Phi P (1 + P Phi P)^{-1}`.
pub fn gk_integral_factors(phi: &CMat, chain: &ProjectorChain, endpoint: Endpoint) -> Result<CMat> {
    chain.check(phi)?;
    let n = phi.nrows();
    let c = chain.to_chain(phi);
    let tol = singular_tol(phi);
    let mut out = CMat::zeros(n, n);
    for k in 1..=n {
        let m = match endpoint {
            Endpoint::Left => k - 1,
            Endpoint::Right => k,
        };
        if m == 0 {
            continue;
        }
        // row k-1 of Phi P_m (1 + P_m Phi P_m)^{-1}, restricted to the first m columns
        let block = CMat::identity(m, m) + c.view((0, 0), (m, m));
        let lu = LU::new(block.transpose());
        if lu.determinant().norm() <= tol {
            return Err(Error::SingularMinor { k: m });
        }
        let rhs = c.view((k - 1, 0), (1, m)).transpose();
        let row = lu.solve(&rhs).ok_or(Error::SingularMinor { k: m })?;
        for j in 0..m {
            out[(k - 1, j)] = -row[j];
        }
    }
    Ok(chain.from_chain(&out))
}

/// Column chain sum `-sum_k (1 + P Phi P)^{-1} P Phi (P_k - P_{k-1})` with
/// `P = P_{k-1}`, equal to `(1 + K-)^{-1} - 1` of the LDU.
pub fn gk_integral_upper(phi: &CMat, chain: &ProjectorChain) -> Result<CMat> {
    let t = phi.transpose();
    Ok(gk_integral_factors(&t, chain, Endpoint::Left)?.transpose())
}

/// Solves `K+ + Phi + K+ Phi = K-` with `K+` strictly lower and `K-` upper
/// (diagonal included), row by row.
pub fn glm_solve(phi: &CMat, chain: &ProjectorChain) -> Result<(CMat, CMat)> {
    chain.check(phi)?;
    let n = phi.nrows();
    let c = chain.to_chain(phi);
    let tol = singular_tol(phi);
    let mut kp = CMat::zeros(n, n);
    for i in 1..n {
        // x (1 + Phi_{<i,<i}) = -Phi_{i,<i}
        let block = CMat::identity(i, i) + c.view((0, 0), (i, i));
        let lu = LU::new(block.transpose());
        if lu.determinant().norm() <= tol {
            return Err(Error::SingularMinor { k: i });
        }
        let rhs = -c.view((i, 0), (1, i)).transpose();
        let x = lu.solve(&rhs).ok_or(Error::SingularMinor { k: i })?;
        for j in 0..i {
            kp[(i, j)] = x[j];
        }
    }
    if n > 0 && LU::new(CMat::identity(n, n) + &c).determinant().norm() <= tol {
        return Err(Error::SingularMinor { k: n });
    }
    let full = &kp + &c + &kp * &c;
    let km = CMat::from_fn(n, n, |i, j| if j >= i { full[(i, j)] } else { C64::new(0.0, 0.0) });
    Ok((chain.from_chain(&kp), chain.from_chain(&km)))
}

/// `||K+ + Phi + K+ Phi - K-||_F / (1 + ||Phi||_F)`.
pub fn glm_residual(phi: &CMat, kp: &CMat, km: &CMat) -> f64 {
    linalg::frob(&(kp + phi + kp * phi - km)) / (1.0 + linalg::frob(phi))
}

/// `||[Phi, L]||_F / (||Phi||_F ||L||_F)`.
pub fn commutation_check(phi: &CMat, l: &OperatorMatrix) -> Result<f64> {
    let lm = l.matrix();
    if lm.shape() != phi.shape() {
        return Err(Error::DimensionMismatch("Phi and L differ in size".into()));
    }
    let scale = linalg::frob(phi) * linalg::frob(lm);
    let c = linalg::frob(&(phi * lm - lm * phi));
    Ok(if scale == 0.0 { c } else { c / scale })
}

/// `||(1+K+) L (1+K+)^{-1} - D (1+K-) L (1+K-)^{-1} D^{-1}||_F`, relative to
/// the first term; small whenever `[Phi, L] = 0`.
pub fn factor_conjugation_residual(pair: &TriangularPair, l: &OperatorMatrix) -> Result<f64> {
    let n = pair.phi.nrows();
    let lm = l.matrix();
    let one = CMat::identity(n, n);
    let a = &one + &pair.k_plus;
    let b = &one + &pair.k_minus;
    let inv = |m: &CMat| m.clone().try_inverse().ok_or_else(|| Error::IllConditioned { step: "factor".into(), cond: f64::INFINITY });
    let left = &a * lm * inv(&a)?;
    let dm = CMat::from_diagonal(&nalgebra::DVector::from_vec(pair.d.clone()));
    let dinv = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n, pair.d.iter().map(|z| z.inv())));
    let right = &dm * &b * lm * inv(&b)? * dinv;
    let denom = linalg::frob(&left);
    let r = linalg::frob(&(&left - right));
    Ok(if denom == 0.0 { r } else { r / denom })
}

/// `Phi = L U - 1` with unit-lower `L`, unit-upper `U` and off-diagonal
/// entries uniform in `[-scale, scale]`, so every leading minor of `1 + Phi`
/// equals one.
pub fn random_unit_minor<R: Rng>(n: usize, scale: f64, rng: &mut R) -> CMat {
    let mut l = CMat::identity(n, n);
    let mut u = CMat::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = C64::new(rng.random_range(-scale..=scale), 0.0);
            u[(j, i)] = C64::new(rng.random_range(-scale..=scale), 0.0);
        }
    }
    l * u - CMat::identity(n, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2(a: [[f64; 2]; 2]) -> CMat {
        CMat::from_fn(2, 2, |i, j| C64::new(a[i][j], 0.0))
    }

    #[test]
    fn worked_example() {
        let phi = m2([[0.0, 1.0], [1.0, 1.0]]);
        let chain = ProjectorChain::natural(2);
        let p = gk_factorize(&phi, &chain).unwrap();
        assert_eq!(p.k_plus, m2([[0.0, 0.0], [-1.0, 0.0]]));
        assert_eq!(p.k_minus, m2([[0.0, 1.0], [0.0, 0.0]]));
        assert!(p.is_paper_exact());
        assert_eq!(p.reconstruction_residual(), 0.0);
        let (kp, km) = glm_solve(&phi, &chain).unwrap();
        assert_eq!(kp, m2([[0.0, 0.0], [-1.0, 0.0]]));
        assert_eq!(km, m2([[0.0, 1.0], [0.0, 0.0]]));
    }

    #[test]
    fn singular_minor_is_named() {
        let chain = ProjectorChain::natural(2);
        let phi = m2([[-1.0, 0.0], [0.0, 0.0]]);
        assert!(matches!(gk_factorize(&phi, &chain), Err(Error::SingularMinor { k: 1 })));
        assert!(matches!(glm_solve(&phi, &chain), Err(Error::SingularMinor { k: 1 })));
    }

    #[test]
    fn one_sided_inputs() {
        let chain = ProjectorChain::natural(3);
        let up = CMat::from_fn(3, 3, |i, j| if j > i { C64::new((i + 2 * j) as f64, 0.0) } else { C64::new(0.0, 0.0) });
        let p = gk_factorize(&up, &chain).unwrap();
        assert_eq!(p.k_plus, CMat::zeros(3, 3));
        assert_eq!(p.k_minus, up);
        let lo = up.transpose();
        let p = gk_factorize(&lo, &chain).unwrap();
        let expect = (CMat::identity(3, 3) + &lo).try_inverse().unwrap() - CMat::identity(3, 3);
        assert!(linalg::frob(&(p.k_plus - expect)) < 1e-14);
        assert_eq!(p.k_minus, CMat::zeros(3, 3));
    }

    #[test]
    fn shear_splits_exactly() {
        let phi = CMat::from_fn(4, 4, |i, j| C64::new((i * 4 + j) as f64, (i as f64) - (j as f64)));
        let chain = ProjectorChain::new(vec![2, 0, 3, 1]).unwrap();
        let (u, l) = triangular_shear(&phi, &chain).unwrap();
        assert_eq!(&u + &l, phi);
    }
}
