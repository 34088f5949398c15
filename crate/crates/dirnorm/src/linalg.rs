//! Internal linear-algebra kernels.
//!
//! Everything operates matrix-free on `Vec<Complex64>` through apply
//! closures, with dense nalgebra fallbacks for small problems. Inner
//! products go through the fixed-order reductions in [`crate::par`] so
//! results do not depend on the thread count.

use nalgebra::DMatrix;
#[cfg(test)]
use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;

/// `x^H y` with conjugation on the first argument.
pub fn zdot(x: &[Complex64], y: &[Complex64]) -> Complex64 {
    debug_assert_eq!(x.len(), y.len());
    par::sum_c64(x.len(), |i| x[i].conj() * y[i])
}

pub fn znorm(x: &[Complex64]) -> f64 {
    par::sum_f64(x.len(), |i| x[i].norm_sqr()).sqrt()
}

pub fn zaxpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn zscale(alpha: Complex64, x: &mut [Complex64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Deterministic pseudo-random start vector.
pub fn seeded_vector(dim: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect()
}

/// Dense LU solve for a general complex system.
#[cfg(test)]
pub fn dense_solve(a: &DMatrix<Complex64>, b: &[Complex64]) -> Result<Vec<Complex64>> {
    let rhs = DVector::from_column_slice(b);
    a.clone()
        .lu()
        .solve(&rhs)
        .map(|x| x.iter().copied().collect())
        .ok_or_else(|| Error::SingularSolve("dense LU factorization failed".into()))
}

/// Conjugate gradients for a Hermitian positive-definite operator.
pub fn cg_hermitian<A>(apply: A, b: &[Complex64], tol: f64, max_iter: usize) -> Result<Vec<Complex64>>
where
    A: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let mut x = vec![Complex64::ZERO; n];
    let mut r = b.to_vec();
    let b_norm = znorm(b);
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut p = r.clone();
    let mut rr = zdot(&r, &r).re;
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * b_norm {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = zdot(&p, &ap).re;
        if pap <= 0.0 {
            return Err(Error::SingularSolve(format!(
                "operator is not positive definite (p^H A p = {pap:.3e})"
            )));
        }
        let alpha = Complex64::new(rr / pap, 0.0);
        zaxpy(alpha, &p, &mut x);
        zaxpy(-alpha, &ap, &mut r);
        let rr_next = zdot(&r, &r).re;
        let beta = rr_next / rr;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_next;
    }
    if rr.sqrt() <= tol * b_norm {
        Ok(x)
    } else {
        Err(Error::SingularSolve(format!(
            "CG stalled at relative residual {:.3e}",
            rr.sqrt() / b_norm
        )))
    }
}

/// BiCGStab for general (non-Hermitian) complex systems.
pub fn bicgstab<A>(apply: A, b: &[Complex64], tol: f64, max_iter: usize) -> Result<Vec<Complex64>>
where
    A: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let n = b.len();
    let b_norm = znorm(b);
    let mut x = vec![Complex64::ZERO; n];
    if b_norm == 0.0 {
        return Ok(x);
    }
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let mut rho = Complex64::ONE;
    let mut alpha = Complex64::ONE;
    let mut omega = Complex64::ONE;
    let mut v = vec![Complex64::ZERO; n];
    let mut p = vec![Complex64::ZERO; n];
    for _ in 0..max_iter {
        if znorm(&r) <= tol * b_norm {
            return Ok(x);
        }
        let rho_next = zdot(&r_hat, &r);
        if rho_next.norm() < 1e-300 {
            return Err(Error::SingularSolve("BiCGStab breakdown (rho = 0)".into()));
        }
        let beta = (rho_next / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        v = apply(&p);
        let denom = zdot(&r_hat, &v);
        if denom.norm() < 1e-300 {
            return Err(Error::SingularSolve("BiCGStab breakdown (r_hat^H v = 0)".into()));
        }
        alpha = rho_next / denom;
        let mut s = r.clone();
        zaxpy(-alpha, &v, &mut s);
        if znorm(&s) <= tol * b_norm {
            zaxpy(alpha, &p, &mut x);
            return Ok(x);
        }
        let t = apply(&s);
        let tt = zdot(&t, &t).re;
        if tt < 1e-300 {
            return Err(Error::SingularSolve("BiCGStab breakdown (t = 0)".into()));
        }
        omega = zdot(&t, &s) / tt;
        zaxpy(alpha, &p, &mut x);
        zaxpy(omega, &s, &mut x);
        r = s;
        zaxpy(-omega, &t, &mut r);
        rho = rho_next;
    }
    if znorm(&r) <= tol * b_norm {
        Ok(x)
    } else {
        Err(Error::SingularSolve(format!(
            "BiCGStab stalled at relative residual {:.3e}",
            znorm(&r) / b_norm
        )))
    }
}

/// Largest singular value of `M` via a fixed number of power iterations on
/// `M^H M`, started from a seeded vector.
pub fn operator_norm<A, At>(apply: A, apply_adjoint: At, dim: usize, seed: u64, iters: usize) -> f64
where
    A: Fn(&[Complex64]) -> Vec<Complex64>,
    At: Fn(&[Complex64]) -> Vec<Complex64>,
{
    let mut x = seeded_vector(dim, seed);
    let mut lam = 0.0;
    for _ in 0..iters {
        let nrm = znorm(&x);
        if nrm == 0.0 {
            return 0.0;
        }
        zscale(Complex64::new(1.0 / nrm, 0.0), &mut x);
        let y = apply_adjoint(&apply(&x));
        lam = zdot(&x, &y).re.max(0.0);
        x = y;
    }
    lam.sqrt()
}

/// Extremal generalized eigenvalues of a Hermitian pencil `(A, B)` with
/// `A` positive semi-definite and `B` positive definite.
pub struct PencilExtremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub vec_min: Vec<Complex64>,
    pub vec_max: Vec<Complex64>,
}

pub const EIG_TOL: f64 = 1e-9;
pub const EIG_MAX_ITER: usize = 5000;

/// Iterative extremes by a single-vector locally optimal scheme: each step
/// does a Rayleigh–Ritz solve on span{x, preconditioned residual, previous
/// update}. The top uses `B^{-1}` as preconditioner, the bottom the
/// shift-inverted `(A + tau B)^{-1}`. `solve_b` must solve `B y = r`.
pub fn pencil_extremes<A, B, Sb>(
    apply_a: &A,
    apply_b: &B,
    solve_b: &Sb,
    dim: usize,
    seed: u64,
) -> Result<PencilExtremes>
where
    A: Fn(&[Complex64]) -> Vec<Complex64>,
    B: Fn(&[Complex64]) -> Vec<Complex64>,
    Sb: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let (lambda_max, vec_max, _it_max) = pencil_lobpcg(
        apply_a,
        apply_b,
        &|r| solve_b(r),
        dim,
        seed,
        true,
        0.0,
    )?;
    let tau = (1e-6 * lambda_max).max(1e-12);
    let shifted = |x: &[Complex64]| {
        let mut y = apply_a(x);
        let bx = apply_b(x);
        zaxpy(Complex64::new(tau, 0.0), &bx, &mut y);
        y
    };
    // loose inner solves: the result only steers the search direction
    let solve_shifted = |r: &[Complex64]| cg_hermitian(shifted, r, 1e-6, 300);
    let (lambda_min, vec_min, _it_min) = pencil_lobpcg(
        apply_a,
        apply_b,
        &solve_shifted,
        dim,
        seed ^ 0x9e37_79b9,
        false,
        lambda_max,
    )?;
    Ok(PencilExtremes { lambda_min, lambda_max, vec_min, vec_max })
}

/// One extremal eigenpair of the Hermitian pencil `(A, B)`. Convergence is
/// measured by the pencil residual against `max(|lambda|, scale_hint)`, so
/// an exact zero bottom eigenvalue still converges.
fn pencil_lobpcg<A, B, P>(
    apply_a: &A,
    apply_b: &B,
    precond: &P,
    dim: usize,
    seed: u64,
    want_max: bool,
    scale_hint: f64,
) -> Result<(f64, Vec<Complex64>, usize)>
where
    A: Fn(&[Complex64]) -> Vec<Complex64>,
    B: Fn(&[Complex64]) -> Vec<Complex64>,
    P: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let mut x = seeded_vector(dim, seed);
    let mut p: Option<Vec<Complex64>> = None;
    let mut last_residual = f64::INFINITY;
    for iter in 0..EIG_MAX_ITER {
        let bx0 = apply_b(&x);
        let xbx = zdot(&x, &bx0).re;
        if !(xbx > 0.0) {
            return Err(Error::SingularSolve("pencil metric lost positivity".into()));
        }
        zscale(Complex64::new(1.0 / xbx.sqrt(), 0.0), &mut x);
        let ax = apply_a(&x);
        let bx = apply_b(&x);
        let lambda = zdot(&x, &ax).re; // x^H B x = 1
        let mut res = ax.clone();
        zaxpy(Complex64::new(-lambda, 0.0), &bx, &mut res);
        let scale = lambda.abs().max(scale_hint);
        let denom = scale * znorm(&bx) + 1e-300;
        last_residual = znorm(&res) / denom;
        if last_residual <= EIG_TOL {
            return Ok((lambda.max(0.0), x, iter));
        }
        // preconditioned residual; fall back to the raw residual if the
        // inner solve stalls (it only steers the search direction)
        let w = precond(&res).unwrap_or(res);
        let mut basis: Vec<Vec<Complex64>> = vec![x.clone(), w];
        if let Some(pv) = &p {
            basis.push(pv.clone());
        }
        for v in &mut basis {
            let n = znorm(v);
            if n > 0.0 {
                zscale(Complex64::new(1.0 / n, 0.0), v);
            }
        }
        // Rayleigh-Ritz on the subspace, shrinking it if the small metric
        // loses definiteness
        let coeffs = loop {
            let k = basis.len();
            let a_cols: Vec<Vec<Complex64>> = basis.iter().map(|v| apply_a(v)).collect();
            let b_cols: Vec<Vec<Complex64>> = basis.iter().map(|v| apply_b(v)).collect();
            let ar = DMatrix::from_fn(k, k, |r, c| zdot(&basis[r], &a_cols[c]));
            let br = DMatrix::from_fn(k, k, |r, c| zdot(&basis[r], &b_cols[c]));
            match dense_pencil_eigens(&ar, &br) {
                Ok((vals, vecs)) => {
                    let idx = if want_max { vals.len() - 1 } else { 0 };
                    break vecs.column(idx).iter().copied().collect::<Vec<Complex64>>();
                }
                Err(_) if k > 1 => {
                    basis.pop();
                }
                Err(e) => return Err(e),
            }
        };
        let mut x_new = vec![Complex64::ZERO; dim];
        let mut p_new = vec![Complex64::ZERO; dim];
        for (i, (ci, v)) in coeffs.iter().zip(&basis).enumerate() {
            zaxpy(*ci, v, &mut x_new);
            if i > 0 {
                zaxpy(*ci, v, &mut p_new);
            }
        }
        x = x_new;
        p = (znorm(&p_new) > 1e-300).then_some(p_new);
    }
    Err(Error::EigenNoConvergence { residual: last_residual, iterations: EIG_MAX_ITER })
}

/// Dense extremes for Hermitian pencils, via the Cholesky congruence
/// `L^{-1} A L^{-H}` and a symmetric eigensolve.
#[cfg(test)]
pub fn dense_pencil_extremes(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<(f64, f64)> {
    let (vals, _) = dense_pencil_eigens(a, b)?;
    Ok((vals[0], vals[vals.len() - 1]))
}

/// Relative eigenvalue threshold below which metric directions are treated
/// as the null space of `B` during dense pencil solves.
const PENCIL_DROP_TOL: f64 = 1e-12;

/// Full dense eigendecomposition of a Hermitian pencil: eigenvalues in
/// ascending order, matching B-orthonormal eigenvectors as columns.
///
/// `B` is whitened through its own spectral decomposition and directions
/// where it is numerically indefinite are dropped. This keeps the solve
/// stable when `B` is Gram-assembled from a nearly singular operator; the
/// callers' pencils satisfy `N(B) ⊆ N(A)`, so the restriction is exact.
pub fn dense_pencil_eigens(
    a: &DMatrix<Complex64>,
    b: &DMatrix<Complex64>,
) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    let bh = (b + b.adjoint()) * Complex64::new(0.5, 0.0);
    let eig_b = nalgebra::SymmetricEigen::new(bh);
    let mu_max = eig_b.eigenvalues.iter().fold(0.0_f64, |m, &v| m.max(v));
    if !(mu_max > 0.0) {
        return Err(Error::SingularSolve("pencil metric is not positive definite".into()));
    }
    let keep: Vec<usize> = (0..eig_b.eigenvalues.len())
        .filter(|&i| eig_b.eigenvalues[i] > PENCIL_DROP_TOL * mu_max)
        .collect();
    if keep.is_empty() {
        return Err(Error::SingularSolve("pencil metric is numerically zero".into()));
    }
    // W = U_keep diag(mu^{-1/2}): columns are a B-orthonormal basis of the
    // retained subspace
    let n = b.nrows();
    let mut w = DMatrix::zeros(n, keep.len());
    for (col, &i) in keep.iter().enumerate() {
        let x = eig_b.eigenvectors.column(i) * Complex64::new(1.0 / eig_b.eigenvalues[i].sqrt(), 0.0);
        w.set_column(col, &x);
    }
    let c = w.adjoint() * a * &w;
    let c = (&c + c.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = nalgebra::SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        let x = &w * eig.eigenvectors.column(i);
        vecs.set_column(col, &x);
    }
    Ok((vals, vecs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_apply(m: &DMatrix<Complex64>) -> impl Fn(&[Complex64]) -> Vec<Complex64> + '_ {
        move |x| {
            let v = DVector::from_column_slice(x);
            (m * v).iter().copied().collect()
        }
    }

    fn random_hpd(dim: usize, seed: u64) -> DMatrix<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(dim, dim, |_, _| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        &g * g.adjoint() + DMatrix::identity(dim, dim) * Complex64::new(0.5, 0.0)
    }

    #[test]
    fn cg_matches_dense_lu() {
        let a = random_hpd(24, 1);
        let b = seeded_vector(24, 2);
        let x_cg = cg_hermitian(dense_apply(&a), &b, 1e-12, 500).unwrap();
        let x_lu = dense_solve(&a, &b).unwrap();
        let diff: f64 = x_cg.iter().zip(&x_lu).map(|(p, q)| (p - q).norm()).sum();
        assert!(diff < 1e-8, "diff = {diff}");
    }

    #[test]
    fn bicgstab_solves_nonhermitian_system() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let dim = 20;
        let a = DMatrix::from_fn(dim, dim, |r, c| {
            let base = if r == c { 4.0 } else { 0.0 };
            Complex64::new(base + 0.3 * rng.gen_range(-1.0..1.0), 0.2 * rng.gen_range(-1.0..1.0))
        });
        let b = seeded_vector(dim, 8);
        let x = bicgstab(dense_apply(&a), &b, 1e-12, 1000).unwrap();
        let r = DVector::from_column_slice(&b) - &a * DVector::from_column_slice(&x);
        assert!(r.norm() < 1e-9 * DVector::from_column_slice(&b).norm());
    }

    #[test]
    fn operator_norm_of_diagonal_matrix() {
        let d = DMatrix::from_fn(16, 16, |r, c| {
            if r == c {
                Complex64::new(1.0 + r as f64, 0.0)
            } else {
                Complex64::ZERO
            }
        });
        let norm = operator_norm(dense_apply(&d), dense_apply(&d), 16, 3, 100);
        assert!((norm - 16.0).abs() < 1e-6, "norm = {norm}");
    }

    #[test]
    fn pencil_extremes_match_dense_oracle() {
        let dim = 18;
        let a = {
            let g = random_hpd(dim, 11);
            &g + g.adjoint() // Hermitian PSD-ish (actually PD)
        };
        let b = random_hpd(dim, 12);
        let (dense_min, dense_max) = dense_pencil_extremes(&a, &b).unwrap();
        let b_lu = b.clone().lu();
        let solve_b = |r: &[Complex64]| {
            b_lu.solve(&DVector::from_column_slice(r))
                .map(|x| x.iter().copied().collect())
                .ok_or_else(|| Error::SingularSolve("lu".into()))
        };
        let ext = pencil_extremes(&dense_apply(&a), &dense_apply(&b), &solve_b, dim, 21).unwrap();
        assert!((ext.lambda_max - dense_max).abs() <= 1e-6 * dense_max.abs());
        assert!((ext.lambda_min - dense_min).abs() <= 1e-6 * dense_max.abs());
    }

    #[test]
    fn pencil_handles_singular_a() {
        // A with an exact zero eigenvalue: lambda_min of (A, I) must be 0
        let dim = 12;
        let mut a = random_hpd(dim, 31);
        // deflate: A <- P A P with P projecting out a fixed direction
        let v = DVector::from_fn(dim, |i, _| Complex64::new(1.0 / ((i + 1) as f64), 0.0));
        let v = &v * Complex64::new(1.0 / v.norm(), 0.0);
        let p = DMatrix::identity(dim, dim) - &v * v.adjoint();
        a = &p * a * &p;
        a = (&a + a.adjoint()) * Complex64::new(0.5, 0.0);
        let id = DMatrix::identity(dim, dim);
        let solve_b = |r: &[Complex64]| Ok(r.to_vec());
        let ext = pencil_extremes(&dense_apply(&a), &dense_apply(&id), &solve_b, dim, 4).unwrap();
        assert!(ext.lambda_min.abs() < 1e-7, "lambda_min = {}", ext.lambda_min);
        let (_, dense_max) = dense_pencil_extremes(&a, &id).unwrap();
        assert!((ext.lambda_max - dense_max).abs() < 1e-6 * dense_max);
    }
}
