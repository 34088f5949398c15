//! Divergence-form elliptic operators and their generator decomposition.
//!
//! The operator `-T = -D_j(a^{ij} D_i .)` is assembled in conservative flux
//! form with homogeneous Dirichlet boundary and verified against the
//! decomposition `-T = (1/n) sum_i A_i* G_i A_i` with `G_i = B_i T B_i`,
//! plus the coercivity and sesquilinear bounds the decomposition rests on.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{self, test_fields, Grid, ScalarField};
use crate::geometry::AnchorSet;
use crate::linalg;
use crate::operators::{
    self, AccretivityReport, GeneratorScheme, OperatorTag, SparseOperator,
};

/// Matrix-valued coefficient field `a^{ij}(Q)`, as named built-ins.
#[derive(Debug, Clone)]
pub enum CoefficientField {
    Identity,
    /// `c * I`
    Scaled(f64),
    Diagonal(Vec<f64>),
    /// 2D diagonal conjugated by a rotation: `R(angle) diag R(angle)^T`
    RotatedDiagonal { diag: Vec<f64>, angle: f64 },
    /// identity plus a seeded smooth symmetric perturbation of size
    /// `amplitude` on a low-frequency sine basis
    SeededSmooth { seed: u64, amplitude: f64 },
}

impl CoefficientField {
    /// `a(q)` as a dense n-by-n real matrix.
    pub fn eval(&self, q: &[f64], dim: usize) -> DMatrix<f64> {
        match self {
            Self::Identity => DMatrix::identity(dim, dim),
            Self::Scaled(c) => DMatrix::identity(dim, dim) * *c,
            Self::Diagonal(d) => DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(d)),
            Self::RotatedDiagonal { diag, angle } => {
                let r = DMatrix::from_fn(dim, dim, |i, j| match (i, j) {
                    (0, 0) | (1, 1) => angle.cos(),
                    (0, 1) => -angle.sin(),
                    (1, 0) => angle.sin(),
                    _ => (i == j) as usize as f64,
                });
                let d = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag));
                &r * d * r.transpose()
            }
            Self::SeededSmooth { seed, amplitude } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut a = DMatrix::identity(dim, dim);
                for i in 0..dim {
                    for j in 0..dim {
                        // symmetric smooth bump; draw both triangles so the
                        // stream is stable under dim
                        let c1: f64 = rng.gen_range(-1.0..1.0);
                        let c2: f64 = rng.gen_range(-1.0..1.0);
                        if i > j {
                            continue;
                        }
                        let mut v = c1;
                        for (k, &x) in q.iter().enumerate() {
                            v *= (std::f64::consts::PI * x + c2 + k as f64).sin();
                        }
                        a[(i, j)] += amplitude * v;
                        if i != j {
                            a[(j, i)] += amplitude * v;
                        }
                    }
                }
                a
            }
        }
    }

    /// Ellipticity constant over the grid: min over nodes of the smallest
    /// eigenvalue of the symmetric part, cross-checked with 50 random
    /// directions per node. Errors if some node loses ellipticity.
    pub fn ellipticity_constant(&self, grid: &Grid) -> Result<f64> {
        let dim = grid.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(0xe111);
        let mut gamma = f64::INFINITY;
        for i in 0..grid.interior_count() {
            let q = grid.interior_point(i);
            let a = self.eval(&q, dim);
            if a.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config("non-finite coefficient entry".into()));
            }
            let sym = (&a + a.transpose()) * 0.5;
            let lambda_min = nalgebra::SymmetricEigen::new(sym.clone())
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |m, &v| m.min(v));
            if lambda_min <= 0.0 {
                return Err(Error::EllipticityViolation { point: q, value: lambda_min, gamma: 0.0 });
            }
            for _ in 0..50 {
                let xi: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let norm2: f64 = xi.iter().map(|v| v * v).sum();
                if norm2 < 1e-12 {
                    continue;
                }
                let mut quad = 0.0;
                for r in 0..dim {
                    for c in 0..dim {
                        quad += xi[r] * a[(r, c)] * xi[c];
                    }
                }
                if quad < lambda_min * norm2 - 1e-12 {
                    return Err(Error::EllipticityViolation {
                        point: q,
                        value: quad / norm2,
                        gamma: lambda_min,
                    });
                }
            }
            gamma = gamma.min(lambda_min);
        }
        Ok(gamma)
    }

    /// `a_1 = sup over nodes of the Frobenius norm of a(Q)`.
    pub fn a1(&self, grid: &Grid) -> f64 {
        let dim = grid.dim();
        (0..grid.interior_count())
            .map(|i| self.eval(&grid.interior_point(i), dim).norm())
            .fold(0.0, f64::max)
    }
}

/// Assembles `-T = -D_j(a^{ij} D_i .)` with homogeneous Dirichlet boundary:
/// midpoint fluxes for the diagonal part, centered differences of centered
/// fluxes for mixed terms. Reduces to the (2n+1)-point Laplacian for `a = I`.
pub fn assemble_elliptic(grid: &Arc<Grid>, coeffs: &CoefficientField) -> Result<SparseOperator> {
    coeffs.ellipticity_constant(grid)?;
    let dim = grid.dim();
    let h = grid.spacing();
    let n = grid.interior_count();
    let rows = crate::par::map_collect(n, |node| {
        let coords = grid.interior_coords(node);
        let q = grid.interior_point(node);
        let at = |offsets: &[(usize, isize)]| -> Option<usize> {
            let mut c: Vec<isize> = coords.iter().map(|&x| x as isize).collect();
            for &(axis, off) in offsets {
                c[axis] += off;
            }
            grid.interior_index_at(&c)
        };
        let point_at = |offsets: &[(usize, f64)]| -> Vec<f64> {
            let mut p = q.clone();
            for &(axis, off) in offsets {
                p[axis] += off * h;
            }
            p
        };
        let mut row: Vec<(usize, Complex64)> = Vec::new();
        let mut add = |col: Option<usize>, val: f64| {
            let Some(col) = col else { return };
            if val == 0.0 {
                return;
            }
            match row.iter_mut().find(|(c, _)| *c == col) {
                Some((_, v)) => *v += Complex64::new(val, 0.0),
                None => row.push((col, Complex64::new(val, 0.0))),
            }
        };
        for j in 0..dim {
            for i in 0..dim {
                if i == j {
                    let ap = coeffs.eval(&point_at(&[(j, 0.5)]), dim)[(i, j)];
                    let am = coeffs.eval(&point_at(&[(j, -0.5)]), dim)[(i, j)];
                    add(Some(node), (ap + am) / (h * h));
                    add(at(&[(j, 1)]), -ap / (h * h));
                    add(at(&[(j, -1)]), -am / (h * h));
                } else {
                    let ap = coeffs.eval(&point_at(&[(j, 1.0)]), dim)[(i, j)];
                    let am = coeffs.eval(&point_at(&[(j, -1.0)]), dim)[(i, j)];
                    let w = 1.0 / (4.0 * h * h);
                    add(at(&[(j, 1), (i, 1)]), -ap * w);
                    add(at(&[(j, 1), (i, -1)]), ap * w);
                    add(at(&[(j, -1), (i, 1)]), am * w);
                    add(at(&[(j, -1), (i, -1)]), -am * w);
                }
            }
        }
        row.sort_by_key(|&(c, _)| c);
        row
    });
    SparseOperator::new(n, rows, OperatorTag::Elliptic)
}

/// `G_i f = B_i (T (B_i f))`; `neg_t` is the assembled `-T`.
pub fn apply_g(
    field: &ScalarField,
    anchor: &[f64],
    neg_t: &SparseOperator,
) -> Result<ScalarField> {
    let bf = operators::ray_integral_apply(field, anchor)?;
    let tbf = neg_t.apply_field(&bf)?.scale(Complex64::new(-1.0, 0.0));
    operators::ray_integral_apply(&tbf, anchor)
}

/// Decomposition, coercivity and boundedness diagnostics in one report.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionReport {
    /// max over test pairs of the weak residual, per anchor
    pub per_anchor_weak: Vec<f64>,
    /// strong-form residual of the (1/n)-averaged decomposition
    pub averaged_strong: f64,
    pub coercivity_margin: f64,
    pub sesquilinear_ratio: f64,
    pub gamma: f64,
    pub a1: f64,
    pub h: f64,
}

/// Evaluates the weak residual `|-(Tf, g) - (G_i A_i f, A_i g)|`, scaled by
/// `||Tf|| ||g||`, per anchor, plus the strong averaged residual
/// `||-Tf - (1/n) sum_i A_i* G_i A_i f|| / ||Tf||`.
pub fn decomposition_residual(
    grid: &Arc<Grid>,
    anchors: &AnchorSet,
    coeffs: &CoefficientField,
    tests: &[ScalarField],
    scheme: GeneratorScheme,
) -> Result<DecompositionReport> {
    let neg_t = assemble_elliptic(grid, coeffs)?;
    let gamma = coeffs.ellipticity_constant(grid)?;
    let a1 = coeffs.a1(grid);
    let n = grid.dim();
    let gens: Vec<SparseOperator> = anchors
        .points()
        .iter()
        .map(|p| operators::generator_matrix(grid, p, scheme))
        .collect::<Result<_>>()?;
    let probes = test_fields::dirichlet_corpus(grid, 3, 0xdead);
    let mut per_anchor_weak = vec![0.0_f64; n];
    let mut averaged_strong = 0.0_f64;
    for f in tests {
        let tf = neg_t.apply_field(f)?;
        let tf_norm = fields::l2_norm(&tf);
        if tf_norm == 0.0 {
            continue;
        }
        let mut strong_sum = ScalarField::zeros(grid.clone());
        for (i, gen) in gens.iter().enumerate() {
            let af = gen.apply_field(f)?;
            let gaf = apply_g(&af, anchors.anchor(i), &neg_t)?;
            for g in &probes {
                let g_norm = fields::l2_norm(g);
                let ag = gen.apply_field(g)?;
                let lhs = fields::l2_inner(&tf, g)?;
                let rhs = fields::l2_inner(&gaf, &ag)?;
                let res = (lhs - rhs).norm() / (tf_norm * g_norm);
                per_anchor_weak[i] = per_anchor_weak[i].max(res);
            }
            let strong_i = gen.adjoint().apply_field(&gaf)?;
            strong_sum = strong_sum.add(&strong_i)?;
        }
        let averaged = strong_sum.scale(Complex64::new(1.0 / n as f64, 0.0));
        let res = fields::l2_norm(&tf.sub(&averaged)?) / tf_norm;
        averaged_strong = averaged_strong.max(res);
    }
    Ok(DecompositionReport {
        per_anchor_weak,
        averaged_strong,
        coercivity_margin: coercivity_check(grid, coeffs, 8)?,
        sesquilinear_ratio: sesquilinear_bound_check(grid, coeffs, 8)?,
        gamma,
        a1,
        h: grid.spacing(),
    })
}

/// `min over fields of -Re(Tf, f)/||f||^2_{H01} - gamma_a`.
pub fn coercivity_check(grid: &Arc<Grid>, coeffs: &CoefficientField, samples: usize) -> Result<f64> {
    let neg_t = assemble_elliptic(grid, coeffs)?;
    let gamma = coeffs.ellipticity_constant(grid)?;
    let corpus = test_fields::dirichlet_corpus(grid, samples, 0xc0e);
    let mut min_ratio = f64::INFINITY;
    for f in &corpus {
        let h10 = fields::h10_norm(f);
        if h10 == 0.0 {
            continue;
        }
        let quad = fields::l2_inner(&neg_t.apply_field(f)?, f)?.re;
        min_ratio = min_ratio.min(quad / (h10 * h10));
    }
    Ok(min_ratio - gamma)
}

/// `max over pairs of |(Tf, g)| / (a1 ||f||_{H01} ||g||_{H01})`.
pub fn sesquilinear_bound_check(
    grid: &Arc<Grid>,
    coeffs: &CoefficientField,
    samples: usize,
) -> Result<f64> {
    let neg_t = assemble_elliptic(grid, coeffs)?;
    let a1 = coeffs.a1(grid);
    let corpus = test_fields::dirichlet_corpus(grid, samples, 0x5e5);
    let mut max_ratio = 0.0_f64;
    for (i, f) in corpus.iter().enumerate() {
        let tf = neg_t.apply_field(f)?;
        let f_h10 = fields::h10_norm(f);
        for g in corpus.iter().skip(i) {
            let g_h10 = fields::h10_norm(g);
            if f_h10 == 0.0 || g_h10 == 0.0 {
                continue;
            }
            let pairing = fields::l2_inner(&tf, g)?.norm();
            max_ratio = max_ratio.max(pairing / (a1 * f_h10 * g_h10));
        }
    }
    Ok(max_ratio)
}

/// Accretivity and resolvent checks on `-T` plus the lower spectral bound (the
/// discrete Poincaré constant `c` in `-Re(Tf, f) >= c ||f||^2`).
pub fn elliptic_accretivity(
    grid: &Arc<Grid>,
    coeffs: &CoefficientField,
) -> Result<(AccretivityReport, f64)> {
    let neg_t = assemble_elliptic(grid, coeffs)?;
    let lambdas = [
        Complex64::new(0.1, 0.0),
        Complex64::new(1.0, 0.0),
        Complex64::new(10.0, 0.0),
    ];
    let report = operators::resolvent_check(&neg_t, &lambdas)?;
    // smallest eigenvalue of the Hermitian part against the identity metric
    let adj = neg_t.adjoint();
    let apply_sym = |x: &[Complex64]| {
        let mut y = neg_t.apply(x).expect("dim");
        let ya = adj.apply(x).expect("dim");
        for (a, b) in y.iter_mut().zip(ya) {
            *a = 0.5 * (*a + b);
        }
        y
    };
    let apply_id = |x: &[Complex64]| x.to_vec();
    let solve_id = |r: &[Complex64]| Ok(r.to_vec());
    let ext = linalg::pencil_extremes(&apply_sym, &apply_id, &solve_id, neg_t.dim(), 0x90c)?;
    Ok((report, ext.lambda_min))
}
