//! Discrete shift semigroup, directional generator, and ray integral.
//!
//! The semigroup `T_t f(Q) = f(Q + e(Q) t)` shifts each interior node away
//! from its boundary anchor with multilinear interpolation and zero
//! extension. Two generator discretizations are provided: the upwind form
//! `(I - T_h)/h`, which inherits the contraction structure of `T_h` row by
//! row, and the centered form `-(e, grad_h)`, which shares its stencil with
//! the nodal gradient and is second-order accurate. The ray integral `B`
//! integrates the field along the segment from the anchor to the node with a
//! composite trapezoid rule.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{self, Grid, ScalarField};
use crate::geometry::direction_from;
use crate::linalg;
use crate::par;

/// What a sparse operator discretizes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OperatorTag {
    GeneratorUpwind,
    GeneratorCentered,
    Shift,
    RayIntegral,
    Elliptic,
    AdjointOf(Box<OperatorTag>),
}

/// Row-compressed complex operator on the interior-node space.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
    tag: OperatorTag,
}

impl SparseOperator {
    pub fn new(dim: usize, rows: Vec<Vec<(usize, Complex64)>>, tag: OperatorTag) -> Result<Self> {
        if rows.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: rows.len() });
        }
        let mut clean = Vec::with_capacity(dim);
        for row in rows {
            let mut r = Vec::with_capacity(row.len());
            for (col, val) in row {
                if col >= dim {
                    return Err(Error::DimensionMismatch { expected: dim, got: col + 1 });
                }
                if !val.re.is_finite() || !val.im.is_finite() {
                    return Err(Error::Config("non-finite operator entry".into()));
                }
                if val != Complex64::ZERO {
                    r.push((col, val));
                }
            }
            clean.push(r);
        }
        Ok(Self { dim, rows: clean, tag })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> &OperatorTag {
        &self.tag
    }

    pub fn rows(&self) -> &[Vec<(usize, Complex64)>] {
        &self.rows
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        Ok(par::map_collect(self.dim, |i| {
            self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
        }))
    }

    pub fn apply_field(&self, f: &ScalarField) -> Result<ScalarField> {
        let values = self.apply(f.values())?;
        ScalarField::from_values(f.grid().clone(), values)
    }

    /// Conjugate transpose. With the uniform `h^n` weighting of the discrete
    /// inner product this is the exact adjoint.
    pub fn adjoint(&self) -> Self {
        let mut rows: Vec<Vec<(usize, Complex64)>> = vec![Vec::new(); self.dim];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v.conj()));
            }
        }
        for r in &mut rows {
            r.sort_by_key(|&(j, _)| j);
        }
        let tag = match &self.tag {
            OperatorTag::AdjointOf(inner) => (**inner).clone(),
            other => OperatorTag::AdjointOf(Box::new(other.clone())),
        };
        Self { dim: self.dim, rows, tag }
    }

    /// `self + lambda I`.
    pub fn shifted(&self, lambda: Complex64) -> Self {
        let mut rows = self.rows.clone();
        for (i, row) in rows.iter_mut().enumerate() {
            match row.iter_mut().find(|(j, _)| *j == i) {
                Some((_, v)) => *v += lambda,
                None => {
                    row.push((i, lambda));
                    row.sort_by_key(|&(j, _)| j);
                }
            }
        }
        Self { dim: self.dim, rows, tag: self.tag.clone() }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    /// Smallest singular value, by a dense SVD. Oracle-scale only.
    pub fn smallest_singular_value(&self) -> f64 {
        let svd = self.to_dense().svd(false, false);
        svd.singular_values.iter().fold(f64::INFINITY, |m, &s| m.min(s))
    }

    /// Coordinate-triple export: `row,col,re,im` per stored entry.
    pub fn write_triples<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "row,col,re,im")?;
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                writeln!(w, "{i},{j},{},{}", v.re, v.im)?;
            }
        }
        Ok(())
    }
}

/// Per-node ray frame (unit direction from the anchor, distance to it).
pub fn node_frames(grid: &Grid, anchor: &[f64]) -> Result<Vec<(Vec<f64>, f64)>> {
    if anchor.len() != grid.dim() {
        return Err(Error::DimensionMismatch { expected: grid.dim(), got: anchor.len() });
    }
    (0..grid.interior_count())
        .map(|i| direction_from(anchor, &grid.interior_point(i)))
        .collect()
}

/// `T_t f(Q) = f(Q + e(Q) t)` with zero extension.
pub fn shift_apply(field: &ScalarField, anchor: &[f64], t: f64) -> Result<ScalarField> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("shift parameter must be nonnegative, got {t}")));
    }
    if t == 0.0 {
        return Ok(field.clone());
    }
    let grid = field.grid().clone();
    let frames = node_frames(&grid, anchor)?;
    let values = par::map_collect(grid.interior_count(), |i| {
        let q = grid.interior_point(i);
        let (e, _) = &frames[i];
        let target: Vec<f64> = q.iter().zip(e).map(|(x, ek)| x + ek * t).collect();
        field.evaluate(&target)
    });
    ScalarField::from_values(grid, values)
}

/// Sparse matrix of `T_t` on the interior-node space.
pub fn shift_matrix(grid: &Arc<Grid>, anchor: &[f64], t: f64) -> Result<SparseOperator> {
    if !(t >= 0.0) {
        return Err(Error::Config(format!("shift parameter must be nonnegative, got {t}")));
    }
    let frames = node_frames(grid, anchor)?;
    let rows = par::map_collect(grid.interior_count(), |i| {
        if t == 0.0 {
            return vec![(i, Complex64::ONE)];
        }
        let q = grid.interior_point(i);
        let (e, _) = &frames[i];
        let target: Vec<f64> = q.iter().zip(e).map(|(x, ek)| x + ek * t).collect();
        grid.interpolation_stencil(&target)
            .into_iter()
            .map(|(j, w)| (j, Complex64::new(w, 0.0)))
            .collect()
    });
    SparseOperator::new(grid.interior_count(), rows, OperatorTag::Shift)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeneratorScheme {
    Upwind,
    Centered,
}

/// Discrete generator `A = -(e, grad)`: upwind `(I - T_h)/h` or centered
/// `-sum_k e_k D_k` with the shared second-order gradient stencils.
pub fn generator_matrix(
    grid: &Arc<Grid>,
    anchor: &[f64],
    scheme: GeneratorScheme,
) -> Result<SparseOperator> {
    let frames = node_frames(grid, anchor)?;
    let n = grid.interior_count();
    match scheme {
        GeneratorScheme::Upwind => {
            let h = grid.spacing();
            let shift = shift_matrix(grid, anchor, h)?;
            let rows = par::map_collect(n, |i| {
                let mut row: Vec<(usize, Complex64)> = shift.rows()[i]
                    .iter()
                    .map(|&(j, v)| (j, -v / h))
                    .collect();
                match row.iter_mut().find(|(j, _)| *j == i) {
                    Some((_, v)) => *v += Complex64::new(1.0 / h, 0.0),
                    None => {
                        row.push((i, Complex64::new(1.0 / h, 0.0)));
                        row.sort_by_key(|&(j, _)| j);
                    }
                }
                row
            });
            SparseOperator::new(n, rows, OperatorTag::GeneratorUpwind)
        }
        GeneratorScheme::Centered => {
            let stencils: Vec<Vec<Vec<(usize, f64)>>> = (0..grid.dim())
                .map(|axis| fields::gradient_stencil_column(grid, axis))
                .collect();
            let rows = par::map_collect(n, |i| {
                let (e, _) = &frames[i];
                let mut row: Vec<(usize, Complex64)> = Vec::new();
                for (axis, ek) in e.iter().enumerate() {
                    for &(j, w) in &stencils[axis][i] {
                        let val = Complex64::new(-ek * w, 0.0);
                        match row.iter_mut().find(|(c, _)| *c == j) {
                            Some((_, v)) => *v += val,
                            None => row.push((j, val)),
                        }
                    }
                }
                row.sort_by_key(|&(j, _)| j);
                row
            });
            SparseOperator::new(n, rows, OperatorTag::GeneratorCentered)
        }
    }
}

/// `B f(Q) = integral of f along the segment from the anchor to Q`,
/// composite trapezoid with step `min(h, r/4)`.
pub fn ray_integral_apply(field: &ScalarField, anchor: &[f64]) -> Result<ScalarField> {
    let grid = field.grid().clone();
    let frames = node_frames(&grid, anchor)?;
    let h = grid.spacing();
    let values = par::map_collect(grid.interior_count(), |i| {
        let (e, r) = &frames[i];
        ray_trapezoid(field, anchor, e, *r, h.min(r / 4.0))
    });
    ScalarField::from_values(grid, values)
}

fn ray_trapezoid(field: &ScalarField, anchor: &[f64], e: &[f64], r: f64, step: f64) -> Complex64 {
    let panels = (r / step).ceil().max(1.0) as usize;
    let ds = r / panels as f64;
    let mut acc = Complex64::ZERO;
    for k in 0..=panels {
        let s = k as f64 * ds;
        let q: Vec<f64> = anchor.iter().zip(e).map(|(a, ek)| a + s * ek).collect();
        let w = if k == 0 || k == panels { 0.5 } else { 1.0 };
        acc += w * field.evaluate(&q);
    }
    acc * ds
}

/// Max over the test fields of the relative left-inverse residual
/// `||A(Bf) + f|| / ||f||` with the centered generator; the ray integral
/// inverts the generator up to sign, so the residual measures discretization
/// error only and decays like O(h).
pub fn verify_left_inverse(
    grid: &Arc<Grid>,
    anchor: &[f64],
    tests: &[ScalarField],
) -> Result<f64> {
    let gen = generator_matrix(grid, anchor, GeneratorScheme::Centered)?;
    let mut worst = 0.0_f64;
    for f in tests {
        let norm = fields::l2_norm(f);
        if norm == 0.0 {
            continue;
        }
        let b = ray_integral_apply(f, anchor)?;
        let ab = gen.apply_field(&b)?;
        let res = fields::l2_norm(&ab.add(f)?);
        worst = worst.max(res / norm);
    }
    Ok(worst)
}

/// `||T_s T_t f - T_{s+t} f||`, zero up to interpolation error.
pub fn check_semigroup_property(
    field: &ScalarField,
    anchor: &[f64],
    s: f64,
    t: f64,
) -> Result<f64> {
    let inner = shift_apply(field, anchor, t)?;
    let two_step = shift_apply(&inner, anchor, s)?;
    let direct = shift_apply(field, anchor, s + t)?;
    Ok(fields::l2_norm(&two_step.sub(&direct)?))
}

/// `||T_t f - f||` along a decreasing sequence of times.
pub fn check_strong_continuity(
    field: &ScalarField,
    anchor: &[f64],
    t_sequence: &[f64],
) -> Result<Vec<f64>> {
    t_sequence
        .iter()
        .map(|&t| {
            let shifted = shift_apply(field, anchor, t)?;
            Ok(fields::l2_norm(&shifted.sub(field)?))
        })
        .collect()
}

/// One resolvent sample of [`resolvent_check`].
#[derive(Debug, Clone, Serialize)]
pub struct ResolventSample {
    pub lambda_re: f64,
    pub lambda_im: f64,
    pub measured_norm: f64,
    pub bound: f64,
    pub violation: bool,
}

/// Empirical m-accretivity footprint of a generator.
#[derive(Debug, Clone, Serialize)]
pub struct AccretivityReport {
    /// min over the random test set of `Re(Af, f) / ||f||^2`
    pub gamma: f64,
    pub samples: Vec<ResolventSample>,
    pub verdict: bool,
}

pub const ACCRETIVITY_TOL: f64 = 1e-10;
pub const RESOLVENT_REL_TOL: f64 = 1e-8;
const RESOLVENT_DENSE_LIMIT: usize = 4000;
pub(crate) const NORM_POWER_ITERS: usize = 50;

/// Checks `Re(Af, f) >= 0` on 500 seeded random fields and the resolvent
/// bound `||(lambda + A)^{-1}|| <= 1 / Re(lambda)` for each sample, with the
/// operator norm estimated by seeded power iteration on the inverse.
pub fn resolvent_check(op: &SparseOperator, lambda_samples: &[Complex64]) -> Result<AccretivityReport> {
    let n = op.dim();
    let mut gamma = f64::INFINITY;
    for trial in 0..500u64 {
        let f = linalg::seeded_vector(n, 0xacc0 + trial);
        let af = op.apply(&f)?;
        let quad = linalg::zdot(&f, &af).re;
        let norm2 = linalg::zdot(&f, &f).re;
        gamma = gamma.min(quad / norm2);
    }
    let mut samples = Vec::with_capacity(lambda_samples.len());
    for (k, &lambda) in lambda_samples.iter().enumerate() {
        if lambda.re <= 0.0 {
            return Err(Error::Config(format!(
                "resolvent sample {lambda} is outside the right half-plane"
            )));
        }
        let bound = 1.0 / lambda.re;
        let shifted = op.shifted(lambda);
        let adj = shifted.adjoint();
        let measured = match resolvent_norm(&shifted, &adj, 0xbeef + k as u64) {
            Ok(norm) => norm,
            // a singular resolvent violates m-accretivity by itself
            Err(Error::SingularSolve(_)) => f64::INFINITY,
            Err(other) => return Err(other),
        };
        let violation = measured > bound * (1.0 + RESOLVENT_REL_TOL);
        samples.push(ResolventSample {
            lambda_re: lambda.re,
            lambda_im: lambda.im,
            measured_norm: measured,
            bound,
            violation,
        });
    }
    let verdict = gamma >= -ACCRETIVITY_TOL && samples.iter().all(|s| !s.violation);
    Ok(AccretivityReport { gamma, samples, verdict })
}

fn resolvent_norm(shifted: &SparseOperator, adjoint: &SparseOperator, seed: u64) -> Result<f64> {
    let n = shifted.dim();
    if n < RESOLVENT_DENSE_LIMIT {
        let lu = shifted.to_dense().lu();
        let lu_adj = adjoint.to_dense().lu();
        let solve = move |m: &nalgebra::LU<Complex64, nalgebra::Dyn, nalgebra::Dyn>,
                          x: &[Complex64]|
              -> Result<Vec<Complex64>> {
            m.solve(&nalgebra::DVector::from_column_slice(x))
                .map(|v| v.iter().copied().collect())
                .ok_or_else(|| Error::SingularSolve("resolvent factorization failed".into()))
        };
        // probe solvability once so singularity surfaces as an error
        solve(&lu, &linalg::seeded_vector(n, seed))?;
        Ok(linalg::operator_norm(
            |x| solve(&lu, x).expect("checked factorization"),
            |x| solve(&lu_adj, x).expect("checked factorization"),
            n,
            seed,
            NORM_POWER_ITERS,
        ))
    } else {
        let tol = 1e-10;
        let iters = 40 * n;
        let probe = linalg::bicgstab(|x| shifted.apply(x).expect("dim"), &linalg::seeded_vector(n, seed), tol, iters);
        probe?;
        Ok(linalg::operator_norm(
            |x| linalg::bicgstab(|y| shifted.apply(y).expect("dim"), x, tol, iters).expect("resolvent solve"),
            |x| linalg::bicgstab(|y| adjoint.apply(y).expect("dim"), x, tol, iters).expect("resolvent solve"),
            n,
            seed,
            NORM_POWER_ITERS,
        ))
    }
}
