//! Directional quadratic forms and norm-equivalence constants.
//!
//! The semilinear form `t(f, g) = sum_i h^n sum_Q (f(Q), e_i(Q)) conj((g(Q),
//! e_i(Q)))` compares the directional norm it induces against the plain
//! vector L2 norm; the equivalence constants are the square roots of the
//! extremal generalized eigenvalues of the Gram pair. The scalar variant
//! plays the same game with the generator Grams `sum_i A_i* A_i` against the
//! H01 Gram `sum_k D_k* D_k`.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{self, Grid, ScalarField, VectorField};
use crate::geometry::AnchorSet;
use crate::linalg;
use crate::operators::{self, GeneratorScheme, SparseOperator};
use crate::par;

/// Size below which generalized eigenproblems are assembled densely.
pub const DENSE_EIG_LIMIT: usize = 1100;

/// Equivalence constants of a norm pair with the extremal witnesses.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    pub c0: f64,
    pub c1: f64,
    pub h: f64,
    pub anchors: Vec<Vec<f64>>,
    /// |delta| at or below the determinant tolerance; the report is still
    /// produced so degeneracy studies can watch c0 collapse
    pub degenerate: bool,
    /// (h, c0, c1) per refinement level, coarsest first
    pub history: Vec<(f64, f64, f64)>,
    #[serde(skip)]
    pub argmin: Vec<Complex64>,
    #[serde(skip)]
    pub argmax: Vec<Complex64>,
}

impl EquivalenceReport {
    /// CSV of the refinement history: `h,c0,c1`.
    pub fn write_history_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "h,c0,c1")?;
        for (h, c0, c1) in &self.history {
            writeln!(w, "{h},{c0},{c1}")?;
        }
        Ok(())
    }
}

/// Unit directions from each anchor at each interior node, anchor-major.
fn anchor_frames(grid: &Grid, anchors: &AnchorSet) -> Result<Vec<Vec<Vec<f64>>>> {
    anchors
        .points()
        .iter()
        .map(|p| {
            (0..grid.interior_count())
                .map(|i| {
                    let (e, _) = crate::geometry::direction_from(p, &grid.interior_point(i))?;
                    Ok(e)
                })
                .collect()
        })
        .collect()
}

/// `t(f, g) = sum_i h^n sum_Q (f(Q), e_i(Q)) conj((g(Q), e_i(Q)))`.
pub fn directional_form(
    f: &VectorField,
    g: &VectorField,
    anchors: &AnchorSet,
) -> Result<Complex64> {
    let grid = f.grid();
    if !grid.compatible(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    if f.dim() != n || g.dim() != n || anchors.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: f.dim().min(g.dim()) });
    }
    let frames = anchor_frames(grid, anchors)?;
    let vol = grid.cell_volume();
    let mut acc = Complex64::ZERO;
    for fr in &frames {
        acc += par::sum_c64(grid.interior_count(), |q| {
            let e = &fr[q];
            let pf: Complex64 = (0..n).map(|k| f.component(k).values()[q] * e[k]).sum();
            let pg: Complex64 = (0..n).map(|k| g.component(k).values()[q] * e[k]).sum();
            pf * pg.conj()
        });
    }
    Ok(acc * vol)
}

/// Directional norm `sqrt(Re t(f, f))`; guards against quadrature corruption
/// of the quadratic form.
pub fn bold_norm(f: &VectorField, anchors: &AnchorSet) -> Result<f64> {
    let q = directional_form(f, f, anchors)?;
    let scale = plain_norm_sq(f).max(q.re.abs());
    if q.im.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) || q.re < -1e-12 * scale {
        return Err(Error::IndefiniteForm { real: q.re, imag: q.im });
    }
    Ok(q.re.max(0.0).sqrt())
}

fn plain_norm_sq(f: &VectorField) -> f64 {
    f.components()
        .iter()
        .map(|c| {
            let n = fields::l2_norm(c);
            n * n
        })
        .sum()
}

/// `sqrt(sum_i ||A_i f||^2)` over the anchor generators.
pub fn ha_norm(f: &ScalarField, anchors: &AnchorSet, scheme: GeneratorScheme) -> Result<f64> {
    let grid = f.grid();
    let mut acc = 0.0;
    for p in anchors.points() {
        let a = operators::generator_matrix(grid, p, scheme)?;
        let af = a.apply_field(f)?;
        let n = fields::l2_norm(&af);
        acc += n * n;
    }
    Ok(acc.sqrt())
}

/// Equivalence constants of the directional norm against the plain vector L2
/// norm. Both Grams share the uniform `h^n` weight, and the directional Gram
/// couples only the components of one node, so the pencil splits into one
/// n-by-n block per node: `E(Q) = sum_i e_i(Q) e_i(Q)^T`. The extremes are
/// the extreme block eigenvalues.
pub fn equivalence_constants_vector(
    grid: &Arc<Grid>,
    anchors: &AnchorSet,
) -> Result<EquivalenceReport> {
    let n = grid.dim();
    if anchors.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: anchors.len() });
    }
    let degenerate = anchors.delta().abs() <= crate::geometry::det_tolerance(anchors.points());
    let frames = anchor_frames(grid, anchors)?;
    let nodes = grid.interior_count();
    let per_node: Vec<(f64, f64, Vec<Complex64>, Vec<Complex64>)> =
        par::map_collect(nodes, |q| {
            let mut e_mat = DMatrix::<f64>::zeros(n, n);
            for fr in &frames {
                let e = &fr[q];
                for r in 0..n {
                    for c in 0..n {
                        e_mat[(r, c)] += e[r] * e[c];
                    }
                }
            }
            let eig = nalgebra::SymmetricEigen::new(e_mat);
            let mut lo = 0usize;
            let mut hi = 0usize;
            for i in 1..n {
                if eig.eigenvalues[i] < eig.eigenvalues[lo] {
                    lo = i;
                }
                if eig.eigenvalues[i] > eig.eigenvalues[hi] {
                    hi = i;
                }
            }
            let vec_of = |col: usize| -> Vec<Complex64> {
                eig.eigenvectors
                    .column(col)
                    .iter()
                    .map(|&v| Complex64::new(v, 0.0))
                    .collect()
            };
            (eig.eigenvalues[lo], eig.eigenvalues[hi], vec_of(lo), vec_of(hi))
        });
    let mut min_node = 0usize;
    let mut max_node = 0usize;
    for q in 1..nodes {
        if per_node[q].0 < per_node[min_node].0 {
            min_node = q;
        }
        if per_node[q].1 > per_node[max_node].1 {
            max_node = q;
        }
    }
    let lambda_min = per_node[min_node].0.max(0.0);
    let lambda_max = per_node[max_node].1.max(0.0);
    // witnesses: the extremal block eigenvector planted at its node
    let mut argmin = vec![Complex64::ZERO; nodes * n];
    let mut argmax = vec![Complex64::ZERO; nodes * n];
    argmin[min_node * n..(min_node + 1) * n].copy_from_slice(&per_node[min_node].2);
    argmax[max_node * n..(max_node + 1) * n].copy_from_slice(&per_node[max_node].3);
    let h = grid.spacing();
    let (c0, c1) = (lambda_min.sqrt(), lambda_max.sqrt());
    Ok(EquivalenceReport {
        c0,
        c1,
        h,
        anchors: anchors.points().to_vec(),
        degenerate,
        history: vec![(h, c0, c1)],
        argmin,
        argmax,
    })
}

/// Equivalence constants of the generator norm against the H01 norm:
/// extremal generalized eigenvalues of `S = sum_i A_i* A_i` against
/// `H = sum_k D_k* D_k`, dense below [`DENSE_EIG_LIMIT`] unknowns, otherwise
/// by the locally optimal iteration.
pub fn equivalence_constants_scalar(
    grid: &Arc<Grid>,
    anchors: &AnchorSet,
    scheme: GeneratorScheme,
) -> Result<EquivalenceReport> {
    let n = grid.dim();
    if anchors.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: anchors.len() });
    }
    let degenerate = anchors.delta().abs() <= crate::geometry::det_tolerance(anchors.points());
    let gens: Vec<SparseOperator> = anchors
        .points()
        .iter()
        .map(|p| operators::generator_matrix(grid, p, scheme))
        .collect::<Result<_>>()?;
    let grads: Vec<SparseOperator> = (0..n)
        .map(|axis| gradient_operator(grid, axis))
        .collect::<Result<_>>()?;
    let dim = grid.interior_count();
    let (lambda_min, lambda_max, argmin, argmax) = if dim <= DENSE_EIG_LIMIT {
        let s = normal_dense(&gens, dim);
        let hm = normal_dense(&grads, dim);
        let (vals, vecs) = linalg::dense_pencil_eigens(&s, &hm).map_err(coarse_grid_hint)?;
        let last = vals.len() - 1;
        (
            vals[0],
            vals[last],
            vecs.column(0).iter().copied().collect(),
            vecs.column(last).iter().copied().collect(),
        )
    } else {
        let s = NormalForm::new(&gens);
        let hm = NormalForm::new(&grads);
        let apply_s = |x: &[Complex64]| s.apply(x);
        let apply_h = |x: &[Complex64]| hm.apply(x);
        // loose inner solves: the preconditioner only steers the iteration
        let solve_h =
            |r: &[Complex64]| linalg::cg_hermitian(apply_h, r, 1e-6, 300).map_err(coarse_grid_hint);
        let ext = linalg::pencil_extremes(&apply_s, &apply_h, &solve_h, dim, 0x5ca1e)?;
        (ext.lambda_min, ext.lambda_max, ext.vec_min, ext.vec_max)
    };
    let h = grid.spacing();
    let (c0, c1) = (lambda_min.max(0.0).sqrt(), lambda_max.max(0.0).sqrt());
    Ok(EquivalenceReport {
        c0,
        c1,
        h,
        anchors: anchors.points().to_vec(),
        degenerate,
        history: vec![(h, c0, c1)],
        argmin,
        argmax,
    })
}

fn coarse_grid_hint(e: Error) -> Error {
    match e {
        Error::SingularSolve(msg) => {
            Error::SingularSolve(format!("{msg} (H01 Gram singular: grid too coarse?)"))
        }
        other => other,
    }
}

/// The nodal partial derivative along `axis` as a sparse operator, sharing
/// its stencil with [`fields::gradient`] entry for entry.
pub fn gradient_operator(grid: &Arc<Grid>, axis: usize) -> Result<SparseOperator> {
    let stencils = fields::gradient_stencil_column(grid, axis);
    let rows = stencils
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|(j, w)| (j, Complex64::new(w, 0.0)))
                .collect()
        })
        .collect();
    SparseOperator::new(
        grid.interior_count(),
        rows,
        crate::operators::OperatorTag::GeneratorCentered,
    )
}

/// `sum_i O_i^H (O_i x)` with the adjoints assembled once up front.
struct NormalForm {
    pairs: Vec<(SparseOperator, SparseOperator)>,
}

impl NormalForm {
    fn new(ops: &[SparseOperator]) -> Self {
        let pairs = ops.iter().map(|op| (op.clone(), op.adjoint())).collect();
        Self { pairs }
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut acc = vec![Complex64::ZERO; x.len()];
        for (op, adj) in &self.pairs {
            let ox = op.apply(x).expect("matching dimension");
            let otox = adj.apply(&ox).expect("matching dimension");
            for (a, v) in acc.iter_mut().zip(otox) {
                *a += v;
            }
        }
        acc
    }
}

#[cfg(test)]
fn normal_apply(ops: &[SparseOperator], x: &[Complex64]) -> Vec<Complex64> {
    NormalForm::new(ops).apply(x)
}

fn normal_dense(ops: &[SparseOperator], dim: usize) -> DMatrix<Complex64> {
    let mut acc = DMatrix::zeros(dim, dim);
    for op in ops {
        let d = op.to_dense();
        acc += d.adjoint() * d;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{test_fields, Grid};
    use crate::geometry::ConvexDomain;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_vector_field(grid: &Arc<Grid>, seed: u64) -> VectorField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let comps = (0..grid.dim())
            .map(|_| {
                let values = (0..grid.interior_count())
                    .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                    .collect();
                ScalarField::from_values(grid.clone(), values).unwrap()
            })
            .collect();
        VectorField::new(comps).unwrap()
    }

    fn square_anchors() -> AnchorSet {
        AnchorSet::new(&ConvexDomain::unit_square(), vec![vec![1.0, 0.0], vec![0.0, 1.0]])
            .unwrap()
    }

    /// Dense Gram of the directional form on the flattened node-major space.
    fn dense_directional_gram(grid: &Arc<Grid>, anchors: &AnchorSet) -> DMatrix<Complex64> {
        let n = grid.dim();
        let nodes = grid.interior_count();
        let frames = anchor_frames(grid, anchors).unwrap();
        let vol = grid.cell_volume();
        let mut t = DMatrix::zeros(nodes * n, nodes * n);
        for fr in &frames {
            for q in 0..nodes {
                let e = &fr[q];
                for r in 0..n {
                    for col in 0..n {
                        t[(q * n + r, q * n + col)] += Complex64::new(vol * e[r] * e[col], 0.0);
                    }
                }
            }
        }
        t
    }

    #[test]
    fn one_dimensional_form_collapses_to_the_norm() {
        let iv = ConvexDomain::unit_interval();
        let grid = Grid::new(&iv, 1.0 / 32.0).unwrap();
        let anchors = AnchorSet::new(&iv, vec![vec![1.0]]).unwrap();
        let f = random_vector_field(&grid, 2);
        let t = directional_form(&f, &f, &anchors).unwrap();
        assert_relative_eq!(t.re, plain_norm_sq(&f), max_relative = 1e-12);
        assert!(t.im.abs() < 1e-14 * t.re);
    }

    #[test]
    fn zero_field_has_zero_form() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 0.125).unwrap();
        let z = VectorField::new(vec![
            ScalarField::zeros(grid.clone()),
            ScalarField::zeros(grid.clone()),
        ])
        .unwrap();
        assert_eq!(directional_form(&z, &z, &square_anchors()).unwrap(), Complex64::ZERO);
        assert_eq!(bold_norm(&z, &square_anchors()).unwrap(), 0.0);
    }

    #[test]
    fn form_matches_dense_gram_oracle() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 0.25).unwrap();
        let anchors = square_anchors();
        let f = random_vector_field(&grid, 5);
        let g = random_vector_field(&grid, 6);
        let t = directional_form(&f, &g, &anchors).unwrap();
        let gram = dense_directional_gram(&grid, &anchors);
        let fv = nalgebra::DVector::from_vec(f.flatten());
        let gv = nalgebra::DVector::from_vec(g.flatten());
        let oracle = (gv.adjoint() * (&gram * fv))[(0, 0)];
        assert!((t - oracle).norm() <= 1e-12 * oracle.norm().max(1.0));

        let norm = bold_norm(&f, &anchors).unwrap();
        let quad = (fv_adj_quad(&gram, &f)).sqrt();
        assert_relative_eq!(norm, quad, max_relative = 1e-10);
    }

    fn fv_adj_quad(gram: &DMatrix<Complex64>, f: &VectorField) -> f64 {
        let fv = nalgebra::DVector::from_vec(f.flatten());
        (fv.adjoint() * (gram * fv))[(0, 0)].re
    }

    #[test]
    fn vector_constants_collapse_in_one_dimension() {
        let iv = ConvexDomain::unit_interval();
        let grid = Grid::new(&iv, 1.0 / 32.0).unwrap();
        let anchors = AnchorSet::new(&iv, vec![vec![1.0]]).unwrap();
        let report = equivalence_constants_vector(&grid, &anchors).unwrap();
        assert_relative_eq!(report.c0, 1.0, epsilon = 1e-10);
        assert_relative_eq!(report.c1, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn vector_constants_match_dense_pencil_oracle() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 0.2).unwrap();
        let anchors = square_anchors();
        let report = equivalence_constants_vector(&grid, &anchors).unwrap();
        let t = dense_directional_gram(&grid, &anchors);
        let dim = t.nrows();
        let m = DMatrix::identity(dim, dim) * Complex64::new(grid.cell_volume(), 0.0);
        let (lo, hi) = linalg::dense_pencil_extremes(&t, &m).unwrap();
        assert_relative_eq!(report.c0, lo.max(0.0).sqrt(), epsilon = 1e-9);
        assert_relative_eq!(report.c1, hi.sqrt(), epsilon = 1e-9);
        assert!(report.c1 <= 2.0_f64.sqrt() + 0.01);
        // witnesses realize the extremes through the form itself
        let argmax = VectorField::from_flat(grid.clone(), 2, &report.argmax).unwrap();
        let ratio = bold_norm(&argmax, &anchors).unwrap()
            / plain_norm_sq(&argmax).sqrt();
        assert_relative_eq!(ratio, report.c1, epsilon = 1e-9);
    }

    #[test]
    fn rank_deficient_anchors_drive_c0_to_zero() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 1.0 / 16.0).unwrap();
        // both anchors on one line through the domain: directions nearly
        // collinear at nodes near that line
        let anchors = AnchorSet::new_unchecked(vec![vec![0.0, 0.0], vec![1.0, 1.0]]);
        let report = equivalence_constants_vector(&grid, &anchors).unwrap();
        assert!(report.degenerate);
        assert!(report.c0 < 1e-3, "c0 = {}", report.c0);
        assert!(report.c1 > 0.0);
    }

    #[test]
    fn scalar_constants_collapse_in_one_dimension() {
        let iv = ConvexDomain::unit_interval();
        let grid = Grid::new(&iv, 1.0 / 64.0).unwrap();
        let anchors = AnchorSet::new(&iv, vec![vec![1.0]]).unwrap();
        let report =
            equivalence_constants_scalar(&grid, &anchors, GeneratorScheme::Centered).unwrap();
        assert_relative_eq!(report.c0, 1.0, epsilon = 1e-8);
        assert_relative_eq!(report.c1, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn scalar_constants_bound_random_fields() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 1.0 / 16.0).unwrap();
        let anchors = square_anchors();
        let report =
            equivalence_constants_scalar(&grid, &anchors, GeneratorScheme::Centered).unwrap();
        assert!(report.c0 > 0.0);
        assert!(report.c1 <= 2.0_f64.sqrt() * 1.01, "c1 = {}", report.c1);
        for seed in 0..20 {
            let f = random_vector_field(&grid, 100 + seed);
            let f = f.component(0).clone();
            let ha = ha_norm(&f, &anchors, GeneratorScheme::Centered).unwrap();
            let h01 = fields::h10_norm(&f);
            let slack = 1e-9 * h01;
            assert!(report.c0 * h01 <= ha + slack, "seed {seed}");
            assert!(ha <= report.c1 * h01 + slack, "seed {seed}");
        }
    }

    #[test]
    fn iterative_and_dense_scalar_paths_agree() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 1.0 / 12.0).unwrap();
        let anchors = square_anchors();
        let dense =
            equivalence_constants_scalar(&grid, &anchors, GeneratorScheme::Centered).unwrap();
        // force the iterative path on the same problem
        let gens: Vec<SparseOperator> = anchors
            .points()
            .iter()
            .map(|p| operators::generator_matrix(&grid, p, GeneratorScheme::Centered).unwrap())
            .collect();
        let grads: Vec<SparseOperator> =
            (0..2).map(|k| gradient_operator(&grid, k).unwrap()).collect();
        let apply_s = |x: &[Complex64]| normal_apply(&gens, x);
        let apply_h = |x: &[Complex64]| normal_apply(&grads, x);
        let solve_h = |r: &[Complex64]| linalg::cg_hermitian(apply_h, r, 1e-10, 4000);
        let ext = linalg::pencil_extremes(
            &apply_s,
            &apply_h,
            &solve_h,
            grid.interior_count(),
            0x5ca1e,
        )
        .unwrap();
        assert_relative_eq!(ext.lambda_max.sqrt(), dense.c1, epsilon = 1e-6);
        assert_relative_eq!(ext.lambda_min.max(0.0).sqrt(), dense.c0, epsilon = 1e-6);
    }

    #[test]
    fn ha_norm_basics() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 1.0 / 16.0).unwrap();
        let anchors = square_anchors();
        let zero = ScalarField::zeros(grid.clone());
        assert_eq!(ha_norm(&zero, &anchors, GeneratorScheme::Centered).unwrap(), 0.0);

        let f = ScalarField::sample_on(grid.clone(), test_fields::sine_bump(&sq, &[1, 1]));
        let norm = ha_norm(&f, &anchors, GeneratorScheme::Centered).unwrap();
        assert!(norm > 0.0);
        let tripled = ha_norm(&f.scale(c(3.0)), &anchors, GeneratorScheme::Centered).unwrap();
        assert_relative_eq!(tripled, 3.0 * norm, max_relative = 1e-12);
    }

    #[test]
    fn scalar_vector_bridge_identity() {
        let sq = ConvexDomain::unit_square();
        let grid = Grid::new(&sq, 1.0 / 16.0).unwrap();
        let anchors = square_anchors();
        let f = ScalarField::sample_on(grid.clone(), test_fields::random_smooth(&sq, 4, 2));
        let ha = ha_norm(&f, &anchors, GeneratorScheme::Centered).unwrap();
        let grad = fields::gradient(&f);
        let t = directional_form(&grad, &grad, &anchors).unwrap();
        assert_relative_eq!(ha * ha, t.re, max_relative = 1e-10);
    }
}
