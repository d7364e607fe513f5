//! Dense linear-algebra helpers on top of nalgebra: eigen-decompositions with
//! left vectors, null spaces, matrix exponential and balancing.

pub mod dd;

use nalgebra::linalg::{Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};
use crate::{CMat, C64};

pub fn frob(m: &CMat) -> f64 {
    m.norm()
}

pub fn is_hermitian(m: &CMat, rel_tol: f64) -> bool {
    m.is_square() && (m - m.adjoint()).norm() <= rel_tol * m.norm().max(f64::MIN_POSITIVE)
}

/// Eigenpairs of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let vecs = CMat::from_fn(m.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    (vals, vecs)
}

/// Right and left eigenvectors with `left^H right = I`.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<C64>,
    pub right: CMat,
    pub left: CMat,
}

/// Full eigen-decomposition of a general square matrix from its complex Schur
/// form. Right vectors come from back substitution on the triangular factor,
/// left vectors from forward substitution; clusters of equal eigenvalues are
/// re-biorthonormalized through the SVD of their cross-Gram block.
pub fn eigen_general(a: &CMat) -> Result<EigenDecomp> {
    let n = a.nrows();
    let anorm = a.norm().max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(a.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::DefectivePencil("Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let values: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    let smin = (f64::EPSILON * anorm).max(f64::MIN_POSITIVE * 1e10);

    let mut y = CMat::zeros(n, n);
    let mut z = CMat::zeros(n, n);
    for k in 0..n {
        let lam = values[k];
        y[(k, k)] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < smin {
                den = C64::new(smin, 0.0);
            }
            y[(j, k)] = -s / den;
            if y[(j, k)].norm() > 1e150 {
                let sc = 1.0 / y[(j, k)].norm();
                for l in j..=k {
                    y[(l, k)] *= sc;
                }
            }
        }
        // row vector z with z T = lam z, stored as column k
        z[(k, k)] = C64::new(1.0, 0.0);
        for j in k + 1..n {
            let mut s = C64::new(0.0, 0.0);
            for l in k..j {
                s += z[(l, k)] * t[(l, j)];
            }
            let mut den = lam - t[(j, j)];
            if den.norm() < smin {
                den = C64::new(smin, 0.0);
            }
            z[(j, k)] = s / den;
            if z[(j, k)].norm() > 1e150 {
                let sc = 1.0 / z[(j, k)].norm();
                for l in k..=j {
                    z[(l, k)] *= sc;
                }
            }
        }
    }
    let mut right = &q * y;
    // w^H = z^T Q^H  =>  w = conj(Q) ... written out: w = Q conj(z)
    let mut left = &q * z.map(|v| v.conj());
    for k in 0..n {
        let nr = right.column(k).norm();
        right.column_mut(k).scale_mut(1.0 / nr);
        let d = left.column(k).dotc(&right.column(k));
        if d.norm() == 0.0 {
            return Err(Error::DefectivePencil(format!("left/right pair {k} is orthogonal")));
        }
        let s = (C64::new(1.0, 0.0) / d).conj();
        for i in 0..n {
            left[(i, k)] *= s;
        }
    }
    let mut out = EigenDecomp { values, right, left };
    fix_clusters(a, &mut out, anorm)?;
    Ok(out)
}

fn fix_clusters(a: &CMat, dec: &mut EigenDecomp, anorm: f64) -> Result<()> {
    let n = dec.values.len();
    let tol = 1e-10 * anorm;
    let mut seen = vec![false; n];
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let members: Vec<usize> = (i..n).filter(|&j| !seen[j] && (dec.values[j] - dec.values[i]).norm() <= tol).collect();
        for &j in &members {
            seen[j] = true;
        }
        if members.len() < 2 {
            continue;
        }
        let k = members.len();
        let lam = members.iter().map(|&j| dec.values[j]).sum::<C64>() / k as f64;
        let shifted = a - CMat::identity(n, n) * lam;
        let v = smallest_singular_vectors(&shifted, k, true);
        let w = smallest_singular_vectors(&shifted.adjoint(), k, true);
        let g = w.adjoint() * &v;
        let svd = SVD::new(g, true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        let sig = svd.singular_values;
        let smin = sig.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin < 1e-8 {
            return Err(Error::DefectivePencil(format!(
                "cross-Gram block of eigenvalue {lam} has singular value {smin:e}"
            )));
        }
        let inv_sqrt = CMat::from_diagonal(&sig.map(|s| C64::new(1.0 / s.sqrt(), 0.0)));
        let vn = &v * vt.adjoint() * &inv_sqrt;
        let wn = &w * &u * &inv_sqrt;
        for (c, &j) in members.iter().enumerate() {
            dec.right.set_column(j, &vn.column(c));
            dec.left.set_column(j, &wn.column(c));
        }
    }
    Ok(())
}

/// Right singular vectors for the `k` smallest singular values.
pub fn smallest_singular_vectors(m: &CMat, k: usize, _right: bool) -> CMat {
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
    CMat::from_fn(m.ncols(), k, |i, j| vt[(order[j], i)].conj())
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = SVD::new(m.clone(), false, false).singular_values.iter().cloned().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis of the numerical null space (relative threshold) and the
/// singular values (descending).
pub fn null_space(m: &CMat, rel_tol: f64) -> (CMat, Vec<f64>) {
    let svd = SVD::new(m.clone(), false, true);
    let vt = svd.v_t.unwrap();
    let ncols = m.ncols();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let smax = sv.first().cloned().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > rel_tol * smax).count();
    // rows of v_t beyond the computed singular values span the rest of the kernel
    let mut basis: Vec<nalgebra::DVector<C64>> = Vec::new();
    for &k in order.iter().skip(rank) {
        basis.push(vt.row(k).adjoint());
    }
    if vt.nrows() < ncols {
        let full = SVD::new(m.adjoint() * m, false, true);
        let vt2 = full.v_t.unwrap();
        let mut o2: Vec<usize> = (0..full.singular_values.len()).collect();
        o2.sort_by(|&a, &b| full.singular_values[a].total_cmp(&full.singular_values[b]));
        basis = o2.iter().take(ncols - rank).map(|&k| vt2.row(k).adjoint()).collect();
    }
    let b = if basis.is_empty() { CMat::zeros(ncols, 0) } else { CMat::from_columns(&basis) };
    (b, sv)
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq_min_norm(m: &CMat, b: &crate::CVec, rel_tol: f64) -> crate::CVec {
    let svd = SVD::new(m.clone(), true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    svd.solve(b, rel_tol * smax).expect("SVD with both factors computed")
}

/// `exp(m)` by scaling and squaring with a truncated Taylor series.
pub fn expm(m: &CMat) -> CMat {
    let n = m.nrows();
    let norm1 = (0..n).map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let a = m * C64::new(0.5f64.powi(s), 0.0);
    let mut term = CMat::identity(n, n);
    let mut sum = CMat::identity(n, n);
    for k in 1..=24 {
        term = &term * &a * C64::new(1.0 / k as f64, 0.0);
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Diagonal similarity `D^-1 A D` (powers of two) equalizing row and column norms.
pub fn balance(a: &CMat) -> CMat {
    let n = a.nrows();
    let mut m = a.clone();
    let mut converged = false;
    while !converged {
        converged = true;
        for i in 0..n {
            let mut c = 0.0;
            let mut r = 0.0;
            for j in 0..n {
                if j != i {
                    c += m[(j, i)].norm();
                    r += m[(i, j)].norm();
                }
            }
            if c == 0.0 || r == 0.0 {
                continue;
            }
            let s = c + r;
            let mut f = 1.0;
            let mut g = r / 2.0;
            while c < g {
                f *= 2.0;
                c *= 4.0;
                g /= 2.0;
            }
            g = r * 2.0;
            while c >= g {
                f /= 2.0;
                c /= 4.0;
                g *= 2.0;
            }
            if (c + r) / f < 0.95 * s && f.is_finite() && f != 0.0 {
                converged = false;
                for j in 0..n {
                    m[(i, j)] /= f;
                    m[(j, i)] *= f;
                }
            }
        }
    }
    m
}

/// Eigenvalues of a general matrix (balanced complex Schur), sorted by (Re, Im).
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    let b = balance(a);
    let schur = Schur::try_new(b, f64::EPSILON, 0)
        .ok_or_else(|| Error::DefectivePencil("Schur iteration did not converge".into()))?;
    let (_, t) = schur.unpack();
    let mut v: Vec<C64> = (0..t.nrows()).map(|k| t[(k, k)]).collect();
    sort_complex(&mut v);
    Ok(v)
}

pub fn sort_complex(v: &mut [C64]) {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
}

/// Whether `m` is upper Hessenberg (exact zeros below the first subdiagonal).
pub fn is_upper_hessenberg(m: &dd::CddMat) -> bool {
    (0..m.rows).all(|i| (0..i.saturating_sub(1)).all(|j| m.get(i, j) == dd::Cdd::ZERO))
}

/// Newton refinement of an eigenvalue of an upper Hessenberg matrix held in
/// double-double, using Hyman's recursion for `det(H - lambda)` and its
/// derivative. Requires a nonzero subdiagonal.
pub fn hyman_newton(h: &dd::CddMat, lam0: C64, iters: usize) -> C64 {
    use dd::Cdd;
    let n = h.rows;
    let mut lam = Cdd::new(lam0);
    for _ in 0..iters {
        let mut x = vec![Cdd::ZERO; n];
        let mut xp = vec![Cdd::ZERO; n];
        x[n - 1] = Cdd::ONE;
        for i in (1..n).rev() {
            let mut s = Cdd::ZERO;
            let mut sp = Cdd::ZERO;
            for j in i..n {
                let hij = if i == j { h.get(i, j) - lam } else { h.get(i, j) };
                s += hij * x[j];
                sp += hij * xp[j];
            }
            sp = sp - x[i];
            let sub = h.get(i, i - 1);
            x[i - 1] = -(s / sub);
            xp[i - 1] = -(sp / sub);
            let mag = x[i - 1].abs_f64();
            if mag > 1e100 {
                let sc = 1e-100;
                for k in i - 1..n {
                    x[k] = x[k].scale(sc);
                    xp[k] = xp[k].scale(sc);
                }
            }
        }
        let mut f = Cdd::ZERO;
        let mut fp = Cdd::ZERO;
        for j in 0..n {
            let h0j = if j == 0 { h.get(0, 0) - lam } else { h.get(0, j) };
            f += h0j * x[j];
            fp += h0j * xp[j];
        }
        fp = fp - x[0];
        if fp.abs_f64() == 0.0 {
            break;
        }
        let step = f / fp;
        lam = lam - step;
        if step.abs_f64() <= 1e-28 * lam.abs_f64().max(1e-300) {
            break;
        }
    }
    lam.to_c64()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn tridiagonal_laplacian_spectrum() {
        let n = 50;
        let ev = tridiagonal_eigenvalues(&vec![2.0; n], &vec![-1.0; n - 1]);
        for (k, l) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((l - exact).abs() < 1e-13);
        }
        let m = CMat::from_fn(4, 4, |i, j| match i.abs_diff(j) {
            0 => c([1.0, -3.0, 0.5, 2.0][i]),
            1 => c([0.3, 0.0, 4.0][i.min(j)]),
            _ => c(0.0),
        });
        let (dense, _) = hermitian_eigen(&m);
        let tri = tridiagonal_eigenvalues(&[1.0, -3.0, 0.5, 2.0], &[0.3, 0.0, 4.0]);
        for (a, b) in dense.iter().zip(&tri) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn general_eigen_is_biorthonormal() {
        let a = CMat::from_fn(6, 6, |i, j| C64::new(((i * 7 + j * 3) % 5) as f64 - 2.0, ((i + 2 * j) % 3) as f64 * 0.3));
        let d = eigen_general(&a).unwrap();
        let g = d.left.adjoint() * &d.right;
        assert!((g - CMat::identity(6, 6)).norm() < 1e-10);
        for k in 0..6 {
            let r = &a * d.right.column(k) - d.right.column(k) * d.values[k];
            assert!(r.norm() < 1e-11 * a.norm());
        }
    }

    #[test]
    fn degenerate_cluster_is_repaired() {
        let s = CMat::from_row_slice(3, 3, &[c(1.0), c(2.0), c(0.0), c(0.0), c(1.0), c(1.0), c(1.0), c(0.0), c(1.0)]);
        let d0 = CMat::from_diagonal(&crate::CVec::from_vec(vec![c(2.0), c(2.0), c(-1.0)]));
        let a = &s * d0 * s.clone().try_inverse().unwrap();
        let d = eigen_general(&a).unwrap();
        let g = d.left.adjoint() * &d.right;
        assert!((g - CMat::identity(3, 3)).norm() < 1e-10);
        for k in 0..3 {
            let r = &a * d.right.column(k) - d.right.column(k) * d.values[k];
            assert!(r.norm() < 1e-10);
        }
    }

    #[test]
    fn expm_of_diagonal() {
        let a = CMat::from_diagonal(&crate::CVec::from_vec(vec![c(-3.0), c(0.5), c(10.0)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - c((-3.0f64).exp())).norm() < 1e-14);
        assert!((e[(2, 2)] - c(10f64.exp())).norm() < 1e-9 * 10f64.exp());
    }

    #[test]
    fn hyman_newton_polishes_root() {
        let n = 8;
        let m = CMat::from_fn(n, n, |i, j| {
            if i == j {
                c(2.0 + i as f64)
            } else if i == j + 1 {
                c(-1.0)
            } else if j > i {
                c(0.1 / (1 + j - i) as f64)
            } else {
                c(0.0)
            }
        });
        let vals = eigenvalues(&m).unwrap();
        let h = dd::CddMat::from_cmat(&m);
        assert!(is_upper_hessenberg(&h));
        for v in vals {
            let r = hyman_newton(&h, v + C64::new(1e-7, 0.0), 20);
            assert!((r - v).norm() < 1e-12);
        }
    }
}

/// Eigenvalues (ascending) of the real symmetric tridiagonal matrix with
/// diagonal `d` and off-diagonal `e`, by implicit QL with Wilkinson shifts.
pub fn tridiagonal_eigenvalues(d: &[f64], e: &[f64]) -> Vec<f64> {
    let n = d.len();
    assert_eq!(e.len() + 1, n.max(1), "off-diagonal must have n - 1 entries");
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().cloned().chain(std::iter::once(0.0)).collect();
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            assert!(iter < 60, "tridiagonal QL failed to converge");
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut early = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    early = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
            }
            if early {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    d.sort_by(f64::total_cmp);
    d
}
