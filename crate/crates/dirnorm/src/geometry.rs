//! Convex domains, ray geometry, and anchor-point determinant algebra.
//!
//! A [`ConvexDomain`] is a bounded convex body given either as an
//! intersection of half-spaces or as a ball. An [`AnchorSet`] is a family of
//! `n` boundary points whose coordinate matrix has a nonzero determinant;
//! each anchor induces the unit direction field `e_i(Q) = (Q - P_i)/|Q - P_i|`
//! along which the shift semigroup acts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance scale for boundary membership (times domain diameter).
const BOUNDARY_TOL_SCALE: f64 = 1e-9;
/// Relative tolerance scale for the anchor determinant (times max|P_ij|^n).
const DET_TOL_SCALE: f64 = 1e-8;
/// Radii below this leave the direction field undefined.
pub const MIN_RADIUS: f64 = 1e-12;

// ---------------------------------------------------------------------------
// small vector helpers (points are plain `&[f64]`)

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn axpy(p: &[f64], t: f64, e: &[f64]) -> Vec<f64> {
    p.iter().zip(e).map(|(x, d)| x + t * d).collect()
}

// ---------------------------------------------------------------------------
// domains

/// One constraint `(normal, Q) <= offset` with a unit normal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HalfSpace {
    pub normal: Vec<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: Vec<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    fn slack(&self, q: &[f64]) -> f64 {
        self.offset - dot(&self.normal, q)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum DomainKind {
    HalfSpaces(Vec<HalfSpace>),
    Ball { center: Vec<f64>, radius: f64 },
}

/// Classification of a query point relative to the domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Membership {
    Interior,
    Boundary,
    Exterior,
}

/// A bounded convex body with membership and ray-exit queries.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvexDomain {
    kind: DomainKind,
    dim: usize,
    interior_point: Vec<f64>,
    bbox_min: Vec<f64>,
    bbox_max: Vec<f64>,
    diameter: f64,
}

impl ConvexDomain {
    /// Intersection of half-spaces. `interior_point` must satisfy every
    /// constraint with strictly positive slack; the bounding box is obtained
    /// by vertex enumeration, which also certifies boundedness.
    pub fn from_halfspaces(halfspaces: Vec<HalfSpace>, interior_point: Vec<f64>) -> Result<Self> {
        let dim = interior_point.len();
        if dim == 0 || halfspaces.is_empty() {
            return Err(Error::Config("empty domain description".into()));
        }
        let mut normalized = Vec::with_capacity(halfspaces.len());
        for hs in halfspaces {
            if hs.normal.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: hs.normal.len() });
            }
            let len = norm(&hs.normal);
            if len < 1e-14 {
                return Err(Error::Config("half-space with zero normal".into()));
            }
            normalized.push(HalfSpace {
                normal: hs.normal.iter().map(|x| x / len).collect(),
                offset: hs.offset / len,
            });
        }
        for (index, hs) in normalized.iter().enumerate() {
            let slack = hs.slack(&interior_point);
            if slack <= 0.0 {
                return Err(Error::NotInterior { index, slack });
            }
        }
        check_bounded(&normalized, dim)?;
        let vertices = enumerate_vertices(&normalized, dim)?;
        let mut bbox_min = vec![f64::INFINITY; dim];
        let mut bbox_max = vec![f64::NEG_INFINITY; dim];
        for v in &vertices {
            for k in 0..dim {
                bbox_min[k] = bbox_min[k].min(v[k]);
                bbox_max[k] = bbox_max[k].max(v[k]);
            }
        }
        let diameter = norm(&sub(&bbox_max, &bbox_min));
        if !diameter.is_finite() || diameter <= 0.0 {
            return Err(Error::DegenerateGrid("domain bounding box is degenerate".into()));
        }
        Ok(Self {
            kind: DomainKind::HalfSpaces(normalized),
            dim,
            interior_point,
            bbox_min,
            bbox_max,
            diameter,
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::Config("ball radius must be positive".into()));
        }
        let dim = center.len();
        let bbox_min = center.iter().map(|c| c - radius).collect();
        let bbox_max = center.iter().map(|c| c + radius).collect();
        Ok(Self {
            kind: DomainKind::Ball { center: center.clone(), radius },
            dim,
            interior_point: center,
            bbox_min,
            bbox_max,
            diameter: 2.0 * radius,
        })
    }

    /// Axis-aligned box `[min, max]`.
    pub fn box_domain(min: &[f64], max: &[f64]) -> Result<Self> {
        let dim = min.len();
        if max.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: max.len() });
        }
        let mut halfspaces = Vec::with_capacity(2 * dim);
        for k in 0..dim {
            if max[k] <= min[k] {
                return Err(Error::Config(format!("empty box on axis {k}")));
            }
            let mut up = vec![0.0; dim];
            up[k] = 1.0;
            halfspaces.push(HalfSpace::new(up.clone(), max[k]));
            up[k] = -1.0;
            halfspaces.push(HalfSpace::new(up, -min[k]));
        }
        let mid = min.iter().zip(max).map(|(a, b)| 0.5 * (a + b)).collect();
        Self::from_halfspaces(halfspaces, mid)
    }

    pub fn unit_interval() -> Self {
        Self::box_domain(&[0.0], &[1.0]).expect("unit interval")
    }

    pub fn unit_square() -> Self {
        Self::box_domain(&[0.0, 0.0], &[1.0, 1.0]).expect("unit square")
    }

    pub fn unit_cube() -> Self {
        Self::box_domain(&[0.0; 3], &[1.0; 3]).expect("unit cube")
    }

    pub fn unit_disk() -> Self {
        Self::ball(vec![0.0, 0.0], 1.0).expect("unit disk")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interior_point(&self) -> &[f64] {
        &self.interior_point
    }

    pub fn bounding_box(&self) -> (&[f64], &[f64]) {
        (&self.bbox_min, &self.bbox_max)
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Boundary membership tolerance, `1e-9` times the domain diameter.
    pub fn boundary_tolerance(&self) -> f64 {
        BOUNDARY_TOL_SCALE * self.diameter
    }

    /// Classifies `q`; interior means strict slack in every constraint.
    pub fn contains(&self, q: &[f64]) -> Result<Membership> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: q.len() });
        }
        let tol = self.boundary_tolerance();
        let min_slack = match &self.kind {
            DomainKind::HalfSpaces(hs) => {
                hs.iter().map(|h| h.slack(q)).fold(f64::INFINITY, f64::min)
            }
            DomainKind::Ball { center, radius } => radius - norm(&sub(q, center)),
        };
        Ok(if min_slack > tol {
            Membership::Interior
        } else if min_slack >= -tol {
            Membership::Boundary
        } else {
            Membership::Exterior
        })
    }

    /// Exit parameter `d = sup{t > 0 : p + e t in Omega}` for a ray that
    /// enters the domain. Half-space domains are clipped constraint by
    /// constraint; balls use the larger quadratic root.
    pub fn ray_exit_distance(&self, p: &[f64], e: &[f64]) -> Result<f64> {
        if p.len() != self.dim || e.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.len().max(e.len()) });
        }
        let tol = self.boundary_tolerance();
        let miss = || Error::RayMissesDomain { point: p.to_vec(), direction: e.to_vec() };
        match &self.kind {
            DomainKind::HalfSpaces(hs) => {
                let mut t_enter = 0.0_f64;
                let mut t_exit = f64::INFINITY;
                for h in hs {
                    let speed = dot(&h.normal, e);
                    let slack = h.slack(p);
                    if speed > 1e-14 {
                        t_exit = t_exit.min(slack / speed);
                    } else if speed < -1e-14 {
                        t_enter = t_enter.max(slack / speed);
                    } else if slack < -tol {
                        return Err(miss());
                    }
                }
                if !t_exit.is_finite() {
                    return Err(Error::UnboundedDomain { direction: e.to_vec() });
                }
                if t_exit <= t_enter + tol || t_exit <= tol {
                    return Err(miss());
                }
                Ok(t_exit)
            }
            DomainKind::Ball { center, radius } => {
                let rel = sub(p, center);
                let b = dot(e, &rel) / dot(e, e).sqrt();
                let c = dot(&rel, &rel) - radius * radius;
                let disc = b * b - c;
                if disc <= 0.0 {
                    return Err(miss());
                }
                let t_exit = (-b + disc.sqrt()) / dot(e, e).sqrt();
                if t_exit <= tol {
                    return Err(miss());
                }
                Ok(t_exit)
            }
        }
    }
}

/// Boundedness check: sampled directions must all be blocked by some
/// constraint. Catches lower-dimensional and unbounded descriptions at desk
/// scale without a full recession-cone computation.
fn check_bounded(halfspaces: &[HalfSpace], dim: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0b0b);
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..dim {
        let mut e = vec![0.0; dim];
        e[k] = 1.0;
        dirs.push(e.clone());
        e[k] = -1.0;
        dirs.push(e);
    }
    for _ in 0..64 * dim {
        if let Some(e) = random_unit(&mut rng, dim) {
            dirs.push(e);
        }
    }
    for e in dirs {
        let blocked = halfspaces.iter().any(|h| dot(&h.normal, &e) > 1e-10);
        if !blocked {
            return Err(Error::UnboundedDomain { direction: e });
        }
    }
    Ok(())
}

/// Vertices of the polytope: solve each n-subset of active constraints and
/// keep the feasible solutions.
fn enumerate_vertices(halfspaces: &[HalfSpace], dim: usize) -> Result<Vec<Vec<f64>>> {
    let m = halfspaces.len();
    if m < dim {
        return Err(Error::DegenerateGrid("polytope has no vertices".into()));
    }
    let mut vertices = Vec::new();
    let mut subset: Vec<usize> = (0..dim).collect();
    loop {
        if let Some(v) = solve_active(halfspaces, &subset, dim) {
            let feasible = halfspaces
                .iter()
                .all(|h| h.slack(&v) >= -1e-9 * (1.0 + h.offset.abs()));
            if feasible {
                vertices.push(v);
            }
        }
        // advance to the next dim-subset of 0..m in lexicographic order
        let mut k = dim;
        loop {
            if k == 0 {
                k = usize::MAX;
                break;
            }
            k -= 1;
            if subset[k] != k + m - dim {
                subset[k] += 1;
                for j in k + 1..dim {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
        if k == usize::MAX {
            break;
        }
    }
    if vertices.is_empty() {
        return Err(Error::DegenerateGrid("polytope has no vertices".into()));
    }
    Ok(vertices)
}

fn solve_active(halfspaces: &[HalfSpace], subset: &[usize], dim: usize) -> Option<Vec<f64>> {
    let a = DMatrix::from_fn(dim, dim, |r, c| halfspaces[subset[r]].normal[c]);
    let b = nalgebra::DVector::from_fn(dim, |r, _| halfspaces[subset[r]].offset);
    a.lu().solve(&b).map(|x| x.iter().copied().collect())
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Option<Vec<f64>> {
    for _ in 0..32 {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let len = norm(&v);
        if len > 0.1 && len <= 1.0 {
            return Some(v.iter().map(|x| x / len).collect());
        }
    }
    None
}

// ---------------------------------------------------------------------------
// determinant algebra

/// Scale-aware tolerance under which the anchor determinant counts as zero.
pub fn det_tolerance(points: &[Vec<f64>]) -> f64 {
    let n = points.len() as i32;
    let max_abs = points
        .iter()
        .flat_map(|p| p.iter().map(|x| x.abs()))
        .fold(0.0_f64, f64::max);
    DET_TOL_SCALE * max_abs.powi(n)
}

/// Determinant of the matrix whose rows are the anchor coordinates.
pub fn anchor_determinant(points: &[Vec<f64>]) -> Result<f64> {
    let n = points.len();
    for p in points {
        if p.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: p.len() });
        }
    }
    let m = DMatrix::from_fn(n, n, |r, c| points[r][c]);
    Ok(m.determinant())
}

/// Determinant with row `j` replaced by the coordinates of `q` (the cofactor
/// quantity commonly written as a subscripted delta).
pub fn substituted_determinant(points: &[Vec<f64>], q: &[f64], j: usize) -> Result<f64> {
    let n = points.len();
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.len() });
    }
    let m = DMatrix::from_fn(n, n, |r, c| if r == j { q[c] } else { points[r][c] });
    Ok(m.determinant())
}

// ---------------------------------------------------------------------------
// anchor sets

/// `n` boundary points with a nonzero coordinate determinant, each inducing a
/// unit direction field over the domain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnchorSet {
    points: Vec<Vec<f64>>,
    delta: f64,
}

impl AnchorSet {
    /// Validated constructor: every point must lie on the boundary and the
    /// determinant must exceed the scale-aware tolerance.
    pub fn new(domain: &ConvexDomain, points: Vec<Vec<f64>>) -> Result<Self> {
        let n = domain.dim();
        if points.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: points.len() });
        }
        for p in &points {
            if domain.contains(p)? != Membership::Boundary {
                let distance = boundary_gap(domain, p);
                return Err(Error::AnchorOffBoundary { point: p.clone(), distance });
            }
        }
        let delta = anchor_determinant(&points)?;
        let tolerance = det_tolerance(&points);
        if delta.abs() <= tolerance {
            return Err(Error::IllConditionedAnchors { delta, tolerance });
        }
        Ok(Self { points, delta })
    }

    /// Skips the boundary and determinant checks. Degeneracy studies need
    /// anchor sets whose determinant is intentionally (near) zero.
    pub fn new_unchecked(points: Vec<Vec<f64>>) -> Self {
        let delta = anchor_determinant(&points).unwrap_or(0.0);
        Self { points, delta }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn anchor(&self, i: usize) -> &[f64] {
        &self.points[i]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Unit direction and radius of `q` relative to anchor `i`.
    pub fn direction(&self, i: usize, q: &[f64]) -> Result<(Vec<f64>, f64)> {
        direction_from(&self.points[i], q)
    }
}

/// Unit direction and radius of `q` seen from `p`.
pub fn direction_from(p: &[f64], q: &[f64]) -> Result<(Vec<f64>, f64)> {
    let d = sub(q, p);
    let r = norm(&d);
    if r < MIN_RADIUS {
        return Err(Error::DirectionUndefined { radius: r });
    }
    Ok((d.iter().map(|x| x / r).collect(), r))
}

fn boundary_gap(domain: &ConvexDomain, p: &[f64]) -> f64 {
    match &domain.kind {
        DomainKind::HalfSpaces(hs) => hs
            .iter()
            .map(|h| h.slack(p))
            .fold(f64::INFINITY, f64::min)
            .abs(),
        DomainKind::Ball { center, radius } => (radius - norm(&sub(p, center))).abs(),
    }
}

/// Geometry of a query point relative to one anchor: unit direction, radius,
/// and the ray exit length.
#[derive(Debug, Clone)]
pub struct RayFrame {
    pub anchor: Vec<f64>,
    pub direction: Vec<f64>,
    pub radius: f64,
    pub exit_length: f64,
}

impl RayFrame {
    pub fn new(domain: &ConvexDomain, anchor: &[f64], q: &[f64]) -> Result<Self> {
        let (direction, radius) = direction_from(anchor, q)?;
        let exit_length = domain.ray_exit_distance(anchor, &direction)?;
        Ok(Self { anchor: anchor.to_vec(), direction, radius, exit_length })
    }
}

/// Deterministically samples `candidate_count` boundary points and returns
/// the n-subset with large `|delta|` found by greedy pivoted selection.
pub fn select_anchors(
    domain: &ConvexDomain,
    candidate_count: usize,
    rng_seed: u64,
) -> Result<AnchorSet> {
    let n = domain.dim();
    if candidate_count < n {
        return Err(Error::Config(format!(
            "need at least {n} anchor candidates, got {candidate_count}"
        )));
    }
    let candidates = sample_boundary_points(domain, candidate_count, rng_seed)?;
    let chosen = greedy_pivot(&candidates, n);
    let points: Vec<Vec<f64>> = chosen.iter().map(|&i| candidates[i].clone()).collect();
    let delta = anchor_determinant(&points)?;
    if delta.abs() <= det_tolerance(&points) {
        return Err(Error::DegenerateAnchorCandidates);
    }
    AnchorSet::new(domain, points).map_err(|e| match e {
        Error::IllConditionedAnchors { .. } => Error::DegenerateAnchorCandidates,
        other => other,
    })
}

/// Boundary points obtained by shooting seeded random rays from the stored
/// interior point.
pub fn sample_boundary_points(
    domain: &ConvexDomain,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut points = Vec::with_capacity(count);
    let origin = domain.interior_point().to_vec();
    let mut misses = 0usize;
    while points.len() < count {
        let Some(e) = random_unit(&mut rng, domain.dim()) else {
            continue;
        };
        match domain.ray_exit_distance(&origin, &e) {
            Ok(t) => points.push(axpy(&origin, t, &e)),
            // near-tangent rays on slivers exit within tolerance of the
            // origin; skip them, but give up on domains where that is typical
            Err(Error::RayMissesDomain { .. }) => {
                misses += 1;
                if misses > 64 * count {
                    return Err(Error::DegenerateAnchorCandidates);
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok(points)
}

/// Greedy row selection maximizing the orthogonal residual at each step,
/// which maximizes the product structure of |det|.
fn greedy_pivot(candidates: &[Vec<f64>], n: usize) -> Vec<usize> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut chosen = Vec::with_capacity(n);
    let mut used = vec![false; candidates.len()];
    for _ in 0..n {
        let mut best = None;
        let mut best_len = -1.0;
        for (i, c) in candidates.iter().enumerate() {
            if used[i] {
                continue;
            }
            let res = residual(c, &basis);
            let len = norm(&res);
            if len > best_len {
                best_len = len;
                best = Some((i, res));
            }
        }
        let (i, res) = best.expect("candidate pool exhausted");
        used[i] = true;
        chosen.push(i);
        if best_len > 1e-300 {
            basis.push(res.iter().map(|x| x / best_len).collect());
        } else {
            basis.push(vec![0.0; candidates[i].len()]);
        }
    }
    chosen
}

fn residual(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut r = v.to_vec();
    for b in basis {
        let proj = dot(&r, b);
        for (rk, bk) in r.iter_mut().zip(b) {
            *rk -= proj * bk;
        }
    }
    r
}

/// Determinant of the matrix with rows `P_i - Q`. Vanishes exactly when `Q`
/// lies in the affine hull of the anchors.
pub fn lambda_determinant(anchors: &AnchorSet, q: &[f64]) -> Result<f64> {
    let n = anchors.len();
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: q.len() });
    }
    let m = DMatrix::from_fn(n, n, |r, c| anchors.points[r][c] - q[c]);
    Ok(m.determinant())
}

/// Coefficients `alpha_j = Delta_j(Q) / Delta`. When `Lambda(Q) = 0` these
/// are the affine coordinates of `Q` in the anchor basis; in general their
/// sum is `1 - Lambda(Q)/Delta`.
pub fn barycentric_coefficients(anchors: &AnchorSet, q: &[f64]) -> Result<Vec<f64>> {
    let tolerance = det_tolerance(&anchors.points);
    if anchors.delta.abs() <= tolerance {
        return Err(Error::IllConditionedAnchors { delta: anchors.delta, tolerance });
    }
    (0..anchors.len())
        .map(|j| Ok(substituted_determinant(&anchors.points, q, j)? / anchors.delta))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent dense determinant by recursive cofactor expansion.
    fn cofactor_det(m: &[Vec<f64>]) -> f64 {
        let n = m.len();
        if n == 1 {
            return m[0][0];
        }
        let mut acc = 0.0;
        for (j, &mj) in m[0].iter().enumerate() {
            let minor: Vec<Vec<f64>> = m[1..]
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(c, _)| *c != j)
                        .map(|(_, &x)| x)
                        .collect()
                })
                .collect();
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * mj * cofactor_det(&minor);
        }
        acc
    }

    fn seeded_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect()
    }

    #[test]
    fn contains_classifies_square_points() {
        let sq = ConvexDomain::unit_square();
        assert_eq!(sq.contains(&[0.5, 0.5]).unwrap(), Membership::Interior);
        assert_eq!(sq.contains(&[1.0, 0.5]).unwrap(), Membership::Boundary);
        let ball = ConvexDomain::unit_disk();
        assert_eq!(ball.contains(&[2.0, 0.0]).unwrap(), Membership::Exterior);
    }

    #[test]
    fn contains_rejects_dimension_mismatch() {
        let sq = ConvexDomain::unit_square();
        assert!(matches!(
            sq.contains(&[0.5]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn ray_exit_on_square_edges_and_diagonal() {
        let sq = ConvexDomain::unit_square();
        let d = sq.ray_exit_distance(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(d, 1.0, max_relative = 1e-12);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = sq.ray_exit_distance(&[0.0, 0.0], &[s, s]).unwrap();
        assert_relative_eq!(d, std::f64::consts::SQRT_2, max_relative = 1e-12);
    }

    #[test]
    fn ray_exit_disk_diameter() {
        let disk = ConvexDomain::unit_disk();
        let d = disk.ray_exit_distance(&[-1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_relative_eq!(d, 2.0, max_relative = 1e-12);
    }

    #[test]
    fn ray_that_misses_is_an_error_not_zero() {
        let sq = ConvexDomain::unit_square();
        let err = sq.ray_exit_distance(&[0.0, 0.0], &[-1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::RayMissesDomain { .. }));
        let disk = ConvexDomain::unit_disk();
        let err = disk.ray_exit_distance(&[-1.0, 0.0], &[0.0, 1.0]).unwrap_err();
        assert!(matches!(err, Error::RayMissesDomain { .. }));
    }

    #[test]
    fn ray_exit_monotone_under_box_inclusion() {
        // shrinking the domain never increases the exit length
        let outer = ConvexDomain::box_domain(&[0.0, 0.0], &[2.0, 2.0]).unwrap();
        let inner = ConvexDomain::box_domain(&[0.0, 0.0], &[1.5, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let Some(e) = random_unit(&mut rng, 2) else { continue };
            let e = if e[0] + e[1] > 0.2 { e } else { continue };
            let d_out = outer.ray_exit_distance(&[0.0, 0.0], &e);
            let d_in = inner.ray_exit_distance(&[0.0, 0.0], &e);
            if let (Ok(d_out), Ok(d_in)) = (d_out, d_in) {
                assert!(d_in <= d_out + 1e-12);
            }
        }
    }

    #[test]
    fn anchor_determinant_identity_and_repeats() {
        let id = anchor_determinant(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_relative_eq!(id, 1.0);
        let rep = anchor_determinant(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_relative_eq!(rep, 0.0);
    }

    #[test]
    fn anchor_determinant_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=4 {
            for _ in 0..50 {
                let pts = seeded_points(&mut rng, n);
                let lhs = anchor_determinant(&pts).unwrap();
                let rhs = cofactor_det(&pts);
                assert_relative_eq!(lhs, rhs, epsilon = 1e-12, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn lambda_determinant_cases() {
        let anchors = AnchorSet::new_unchecked(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let lam = lambda_determinant(&anchors, &[0.0, 0.0]).unwrap();
        assert_relative_eq!(lam, anchors.delta());
        let lam = lambda_determinant(&anchors, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(lam, 0.0);
    }

    #[test]
    fn lambda_equals_delta_minus_substituted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for n in 2..=3 {
            for _ in 0..500 {
                let pts = seeded_points(&mut rng, n);
                let anchors = AnchorSet::new_unchecked(pts.clone());
                let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let lam = lambda_determinant(&anchors, &q).unwrap();
                let mut sum = 0.0;
                for j in 0..n {
                    sum += substituted_determinant(&pts, &q, j).unwrap();
                }
                let rhs = anchors.delta() - sum;
                let scale = lam.abs().max(rhs.abs()).max(1e-10);
                assert!((lam - rhs).abs() <= 1e-10 * scale, "lam={lam} rhs={rhs}");
            }
        }
    }

    #[test]
    fn barycentric_vertex_and_affine_cases() {
        let pts = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let anchors = AnchorSet::new_unchecked(pts);
        // Q = P1
        let alpha = barycentric_coefficients(&anchors, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(alpha[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(alpha[1], 0.0, epsilon = 1e-12);
        // Q on the segment between the anchors: affine combination
        let alpha = barycentric_coefficients(&anchors, &[0.25, 0.75]).unwrap();
        assert_relative_eq!(alpha[0] + alpha[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(alpha[0], 0.25, epsilon = 1e-10);
    }

    #[test]
    fn barycentric_sum_tracks_lambda_ratio() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..300 {
            let pts = seeded_points(&mut rng, 3);
            let anchors = AnchorSet::new_unchecked(pts);
            if anchors.delta().abs() < 1e-3 {
                continue;
            }
            let q: Vec<f64> = (0..3).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let alpha = barycentric_coefficients(&anchors, &q).unwrap();
            let lhs: f64 = alpha.iter().sum();
            let lam = lambda_determinant(&anchors, &q).unwrap();
            let rhs = 1.0 - lam / anchors.delta();
            assert_relative_eq!(lhs, rhs, epsilon = 1e-10, max_relative = 1e-10);
        }
    }

    #[test]
    fn barycentric_rejects_degenerate_anchor_sets() {
        let anchors = AnchorSet::new_unchecked(vec![vec![1.0, 0.0], vec![2.0, 0.0]]);
        assert!(matches!(
            barycentric_coefficients(&anchors, &[0.5, 0.5]),
            Err(Error::IllConditionedAnchors { .. })
        ));
    }

    #[test]
    fn hyperplane_degeneracy_kills_lambda() {
        // Q in the affine hull of the anchors gives Lambda(Q) = 0
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        for _ in 0..200 {
            let pts = seeded_points(&mut rng, 3);
            let anchors = AnchorSet::new_unchecked(pts.clone());
            let mut w: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            if s.abs() < 1e-3 {
                continue;
            }
            w.iter_mut().for_each(|x| *x /= s);
            let q: Vec<f64> = (0..3)
                .map(|c| (0..3).map(|j| w[j] * pts[j][c]).sum())
                .collect();
            let lam = lambda_determinant(&anchors, &q).unwrap();
            let scale = anchors.delta().abs().max(1.0);
            assert!(lam.abs() <= 1e-9 * scale, "lam = {lam}");
        }
    }

    #[test]
    fn anchor_set_requires_boundary_points() {
        let sq = ConvexDomain::unit_square();
        let err = AnchorSet::new(&sq, vec![vec![0.5, 0.5], vec![0.0, 1.0]]).unwrap_err();
        assert!(matches!(err, Error::AnchorOffBoundary { .. }));
    }

    #[test]
    fn select_anchors_is_deterministic_and_nondegenerate() {
        let sq = ConvexDomain::unit_square();
        let a = select_anchors(&sq, 32, 99).unwrap();
        let b = select_anchors(&sq, 32, 99).unwrap();
        assert_eq!(a.points(), b.points());
        assert!(a.delta().abs() > 0.0);
    }

    #[test]
    fn select_anchors_near_brute_force_on_disk() {
        let disk = ConvexDomain::unit_disk();
        let count = 24;
        let candidates = sample_boundary_points(&disk, count, 5).unwrap();
        let greedy = select_anchors(&disk, count, 5).unwrap();
        let mut best = 0.0_f64;
        for i in 0..count {
            for j in (i + 1)..count {
                let d = anchor_determinant(&[candidates[i].clone(), candidates[j].clone()])
                    .unwrap()
                    .abs();
                best = best.max(d);
            }
        }
        assert!(greedy.delta().abs() * 2.0 >= best);
    }

    #[test]
    fn select_anchors_rejects_effectively_1d_domain() {
        // a sliver of width 2e-13 is below the determinant tolerance scale
        let thin = ConvexDomain::box_domain(&[0.0, 0.0], &[1.0, 2e-13]).unwrap();
        let err = select_anchors(&thin, 16, 3).unwrap_err();
        assert!(matches!(err, Error::DegenerateAnchorCandidates));
    }

    #[test]
    fn segment_has_no_interior_point() {
        let err = ConvexDomain::box_domain(&[0.0, 0.0], &[1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn ray_frame_orders_radius_before_exit() {
        let disk = ConvexDomain::unit_disk();
        let frame = RayFrame::new(&disk, &[-1.0, 0.0], &[0.3, 0.2]).unwrap();
        assert!(frame.radius >= 0.0);
        assert!(frame.radius <= frame.exit_length + 1e-12);
        assert_relative_eq!(norm(&frame.direction), 1.0, epsilon = 1e-12);
    }
}
