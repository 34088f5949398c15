//! Masked Cartesian grids and grid-sampled complex fields.
//!
//! Functions live on the interior nodes of a uniform grid over the domain's
//! bounding box and are extended by zero outside the closed domain. All
//! off-node evaluation is multilinear interpolation, which keeps the discrete
//! shift semigroup sub-stochastic row by row.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{ConvexDomain, Membership};
use crate::par;

/// Uniform grid over the domain bounding box with an interior mask.
#[derive(Debug)]
pub struct Grid {
    domain: ConvexDomain,
    mins: Vec<f64>,
    h: f64,
    shape: Vec<usize>,
    strides: Vec<usize>,
    mask: Vec<bool>,
    interior_nodes: Vec<usize>,
    node_to_interior: Vec<u32>,
}

const NOT_INTERIOR: u32 = u32::MAX;

impl Grid {
    pub fn new(domain: &ConvexDomain, h: f64) -> Result<Arc<Self>> {
        if !(h > 0.0) {
            return Err(Error::DegenerateGrid("spacing must be positive".into()));
        }
        let dim = domain.dim();
        let (bmin, bmax) = domain.bounding_box();
        let mut shape = Vec::with_capacity(dim);
        for k in 0..dim {
            let count = ((bmax[k] - bmin[k]) / h + 1e-9).floor() as usize + 1;
            if count < 2 {
                return Err(Error::DegenerateGrid(format!(
                    "axis {k} has fewer than 2 nodes at h = {h}"
                )));
            }
            shape.push(count);
        }
        let mut strides = vec![1usize; dim];
        for k in (0..dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        let total: usize = shape.iter().product();
        let mins = bmin.to_vec();
        let mut mask = vec![false; total];
        let mut interior_nodes = Vec::new();
        let mut node_to_interior = vec![NOT_INTERIOR; total];
        let mut coords = vec![0usize; dim];
        for node in 0..total {
            let point = point_of(&mins, h, &strides, &shape, node, &mut coords);
            if domain.contains(&point)? == Membership::Interior {
                mask[node] = true;
                node_to_interior[node] = interior_nodes.len() as u32;
                interior_nodes.push(node);
            }
        }
        let grid = Self {
            domain: domain.clone(),
            mins,
            h,
            shape,
            strides,
            mask,
            interior_nodes,
            node_to_interior,
        };
        grid.check_axis_coverage()?;
        Ok(Arc::new(grid))
    }

    /// Requires at least 3 interior nodes along some grid line for every axis
    /// the domain actually extends over.
    fn check_axis_coverage(&self) -> Result<()> {
        if self.interior_nodes.is_empty() {
            return Err(Error::DegenerateGrid("no interior nodes".into()));
        }
        for k in 0..self.dim() {
            let mut per_line: HashMap<usize, usize> = HashMap::new();
            for &node in &self.interior_nodes {
                let i_k = (node / self.strides[k]) % self.shape[k];
                let line = node - i_k * self.strides[k];
                *per_line.entry(line).or_insert(0) += 1;
            }
            let best = per_line.values().copied().max().unwrap_or(0);
            if best < 3 {
                return Err(Error::DegenerateGrid(format!(
                    "axis {k}: only {best} interior nodes along the best grid line"
                )));
            }
        }
        Ok(())
    }

    pub fn domain(&self) -> &ConvexDomain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Quadrature weight of one node, `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn interior_count(&self) -> usize {
        self.interior_nodes.len()
    }

    /// Coordinates of the i-th interior node.
    pub fn interior_point(&self, i: usize) -> Vec<f64> {
        let mut coords = vec![0usize; self.dim()];
        point_of(&self.mins, self.h, &self.strides, &self.shape, self.interior_nodes[i], &mut coords)
    }

    /// Per-axis integer coordinates of the i-th interior node.
    pub fn interior_coords(&self, i: usize) -> Vec<usize> {
        let mut node = self.interior_nodes[i];
        let mut coords = vec![0usize; self.dim()];
        for k in 0..self.dim() {
            coords[k] = node / self.strides[k];
            node %= self.strides[k];
        }
        coords
    }

    /// Interior index of the node at `coords`, if it is an interior node.
    pub fn interior_index_at(&self, coords: &[isize]) -> Option<usize> {
        let mut node = 0usize;
        for k in 0..self.dim() {
            if coords[k] < 0 || coords[k] >= self.shape[k] as isize {
                return None;
            }
            node += coords[k] as usize * self.strides[k];
        }
        let idx = self.node_to_interior[node];
        (idx != NOT_INTERIOR).then_some(idx as usize)
    }

    pub fn compatible(&self, other: &Grid) -> bool {
        self.h == other.h
            && self.shape == other.shape
            && self.mins == other.mins
            && self.interior_nodes.len() == other.interior_nodes.len()
    }

    /// Multilinear interpolation of interior values at an arbitrary point,
    /// exactly zero outside the closed domain.
    pub fn interpolate(&self, values: &[Complex64], point: &[f64]) -> Complex64 {
        debug_assert_eq!(values.len(), self.interior_count());
        self.interpolation_stencil(point)
            .iter()
            .map(|&(j, w)| w * values[j])
            .sum()
    }

    /// Interpolation weights of a point as (interior index, weight) pairs;
    /// empty outside the closed domain. Weights are nonnegative and sum to
    /// at most 1 (corners outside the mask drop out).
    pub fn interpolation_stencil(&self, point: &[f64]) -> Vec<(usize, f64)> {
        match self.domain.contains(point) {
            Ok(Membership::Exterior) | Err(_) => return Vec::new(),
            _ => {}
        }
        let dim = self.dim();
        let mut base = vec![0usize; dim];
        let mut frac = vec![0.0f64; dim];
        for k in 0..dim {
            let u = (point[k] - self.mins[k]) / self.h;
            let mut i0 = u.floor() as isize;
            let upper = self.shape[k] as isize - 2;
            if i0 < 0 {
                i0 = 0;
            } else if i0 > upper {
                i0 = upper;
            }
            base[k] = i0 as usize;
            frac[k] = u - i0 as f64;
        }
        let mut out = Vec::with_capacity(1 << dim);
        for corner in 0..(1usize << dim) {
            let mut weight = 1.0;
            let mut node = 0usize;
            for k in 0..dim {
                let bit = (corner >> k) & 1;
                weight *= if bit == 1 { frac[k] } else { 1.0 - frac[k] };
                node += (base[k] + bit) * self.strides[k];
            }
            if weight == 0.0 || !self.mask[node] {
                continue;
            }
            out.push((self.node_to_interior[node] as usize, weight));
        }
        out
    }
}

fn point_of(
    mins: &[f64],
    h: f64,
    strides: &[usize],
    shape: &[usize],
    node: usize,
    coords: &mut [usize],
) -> Vec<f64> {
    let mut rest = node;
    for k in 0..shape.len() {
        coords[k] = rest / strides[k];
        rest %= strides[k];
    }
    coords.iter().zip(mins).map(|(&i, &m)| m + i as f64 * h).collect()
}

/// Complex scalar function sampled at interior nodes, zero elsewhere.
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let n = grid.interior_count();
        Self { grid, values: vec![Complex64::ZERO; n] }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.interior_count() {
            return Err(Error::DimensionMismatch {
                expected: grid.interior_count(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    /// Samples an analytic function at the interior nodes.
    pub fn sample_on<F>(grid: Arc<Grid>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let values = par::map_collect(grid.interior_count(), |i| f(&grid.interior_point(i)));
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    /// Interpolated evaluation with zero extension outside the domain.
    pub fn evaluate(&self, point: &[f64]) -> Complex64 {
        self.grid.interpolate(&self.values, point)
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        let values = self.values.iter().map(|v| factor * v).collect();
        Self { grid: self.grid.clone(), values }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| op(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    /// CSV export: `node,x_1..x_n,re,im` per interior node.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let dim = self.grid.dim();
        write!(w, "node")?;
        for k in 0..dim {
            write!(w, ",x{k}")?;
        }
        writeln!(w, ",re,im")?;
        for (i, v) in self.values.iter().enumerate() {
            let p = self.grid.interior_point(i);
            write!(w, "{i}")?;
            for x in &p {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{},{}", v.re, v.im)?;
        }
        Ok(())
    }

    /// CSV import for a field previously exported on a compatible grid.
    pub fn read_csv<R: BufRead>(grid: Arc<Grid>, r: R) -> Result<Self> {
        let mut values = vec![Complex64::ZERO; grid.interior_count()];
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 || line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != grid.dim() + 3 {
                return Err(Error::Config(format!("bad CSV row at line {}", lineno + 1)));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))
            };
            let node = cols[0]
                .trim()
                .parse::<usize>()
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
            if node >= values.len() {
                return Err(Error::Config(format!("node index {node} out of range")));
            }
            values[node] = Complex64::new(parse(cols[cols.len() - 2])?, parse(cols[cols.len() - 1])?);
        }
        Self::from_values(grid, values)
    }
}

/// `n` scalar components sharing one grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Config("vector field needs at least one component".into()));
        }
        let grid = components[0].grid.clone();
        for c in &components[1..] {
            if !grid.compatible(&c.grid) {
                return Err(Error::GridMismatch);
            }
        }
        Ok(Self { components })
    }

    pub fn sample_on<F>(grid: Arc<Grid>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<Complex64> + Sync,
    {
        let components = (0..dim)
            .map(|c| ScalarField::sample_on(grid.clone(), |p| f(p)[c]))
            .collect();
        Self { components }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.components[0].grid()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, k: usize) -> &ScalarField {
        &self.components[k]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    /// Component values at one interior node.
    pub fn at(&self, node: usize) -> Vec<Complex64> {
        self.components.iter().map(|c| c.values[node]).collect()
    }

    /// Flattened node-major layout: `node * dim + component`.
    pub fn flatten(&self) -> Vec<Complex64> {
        let n = self.grid().interior_count();
        let d = self.dim();
        let mut out = vec![Complex64::ZERO; n * d];
        for (c, comp) in self.components.iter().enumerate() {
            for (i, v) in comp.values.iter().enumerate() {
                out[i * d + c] = *v;
            }
        }
        out
    }

    pub fn from_flat(grid: Arc<Grid>, dim: usize, flat: &[Complex64]) -> Result<Self> {
        let n = grid.interior_count();
        if flat.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, got: flat.len() });
        }
        let components = (0..dim)
            .map(|c| {
                let values = (0..n).map(|i| flat[i * dim + c]).collect();
                ScalarField::from_values(grid.clone(), values)
            })
            .collect::<Result<_>>()?;
        Ok(Self { components })
    }
}

/// Builds a grid and samples `f` on it.
pub fn sample<F>(domain: &ConvexDomain, h: f64, f: F) -> Result<ScalarField>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    let grid = Grid::new(domain, h)?;
    Ok(ScalarField::sample_on(grid, f))
}

/// Midpoint-rule L2 norm, `sqrt(sum |f|^2 h^n)`.
pub fn l2_norm(field: &ScalarField) -> f64 {
    let vol = field.grid().cell_volume();
    let values = field.values();
    (par::sum_f64(values.len(), |i| values[i].norm_sqr()) * vol).sqrt()
}

/// L2 inner product `(f, g) = sum f conj(g) h^n`.
pub fn l2_inner(f: &ScalarField, g: &ScalarField) -> Result<Complex64> {
    if !f.grid().compatible(g.grid()) {
        return Err(Error::GridMismatch);
    }
    let vol = f.grid().cell_volume();
    let (a, b) = (f.values(), g.values());
    Ok(par::sum_c64(a.len(), |i| a[i] * b[i].conj()) * vol)
}

/// Inner product on vector fields with conjugation on `g`.
pub fn inner_l2n(f: &VectorField, g: &VectorField) -> Result<Complex64> {
    if f.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: g.dim() });
    }
    let mut acc = Complex64::ZERO;
    for (fc, gc) in f.components().iter().zip(g.components()) {
        acc += l2_inner(fc, gc)?;
    }
    Ok(acc)
}

/// Nodal gradient: central differences where both axis neighbors are
/// interior, second-order one-sided stencils where the central stencil
/// leaves the mask, zero extension as the last resort.
pub fn gradient(field: &ScalarField) -> VectorField {
    let grid = field.grid().clone();
    let dim = grid.dim();
    let components = (0..dim)
        .map(|axis| {
            let stencils = gradient_stencil_column(&grid, axis);
            let values = par::map_collect(grid.interior_count(), |i| {
                stencils[i]
                    .iter()
                    .map(|&(j, w)| w * field.values()[j])
                    .sum()
            });
            ScalarField::from_values(grid.clone(), values).expect("matching length")
        })
        .collect();
    VectorField::new(components).expect("shared grid")
}

/// Sparse rows of the partial-derivative stencil along `axis`, as
/// (interior column, real weight) pairs per interior node. Shared between
/// the nodal gradient and the centered generator so the two use bit-equal
/// coefficients.
pub(crate) fn gradient_stencil_column(grid: &Grid, axis: usize) -> Vec<Vec<(usize, f64)>> {
    let h = grid.spacing();
    (0..grid.interior_count())
        .map(|i| {
            let coords = grid.interior_coords(i);
            let at = |offset: isize| -> Option<usize> {
                let mut c: Vec<isize> = coords.iter().map(|&x| x as isize).collect();
                c[axis] += offset;
                grid.interior_index_at(&c)
            };
            let mut row: Vec<(usize, f64)> = Vec::with_capacity(3);
            let (m1, p1) = (at(-1), at(1));
            match (m1, p1) {
                (Some(m), Some(p)) => {
                    row.push((p, 0.5 / h));
                    row.push((m, -0.5 / h));
                }
                (None, Some(p)) if at(2).is_some() => {
                    row.push((i, -1.5 / h));
                    row.push((p, 2.0 / h));
                    row.push((at(2).unwrap(), -0.5 / h));
                }
                (Some(m), None) if at(-2).is_some() => {
                    row.push((i, 1.5 / h));
                    row.push((m, -2.0 / h));
                    row.push((at(-2).unwrap(), 0.5 / h));
                }
                _ => {
                    // central with zero extension for the missing side
                    if let Some(p) = p1 {
                        row.push((p, 0.5 / h));
                    }
                    if let Some(m) = m1 {
                        row.push((m, -0.5 / h));
                    }
                }
            }
            row
        })
        .collect()
}

/// `sqrt(sum_i ||D_i f||^2)` with the nodal gradient.
pub fn h10_norm(field: &ScalarField) -> f64 {
    let grad = gradient(field);
    let mut acc = 0.0;
    for c in grad.components() {
        let norm = l2_norm(c);
        acc += norm * norm;
    }
    acc.sqrt()
}

/// Polar-form Lp norm around a boundary anchor: tensor quadrature over the
/// sphere of entering directions and composite trapezoid along each ray.
pub fn lp_norm_polar(
    field: &ScalarField,
    anchor: &[f64],
    p: f64,
    angular_nodes: usize,
    radial_nodes: usize,
) -> Result<f64> {
    if p < 1.0 {
        return Err(Error::Config("polar norm needs p >= 1".into()));
    }
    if angular_nodes < 8 || radial_nodes < 8 {
        return Err(Error::Config("polar quadrature needs at least 8 nodes per factor".into()));
    }
    let domain = field.grid().domain();
    if domain.contains(anchor)? != Membership::Boundary {
        return Err(Error::AnchorOffBoundary { point: anchor.to_vec(), distance: f64::NAN });
    }
    let dim = domain.dim();
    let dirs: Vec<(Vec<f64>, f64)> = match dim {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        2 => (0..angular_nodes)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / angular_nodes as f64;
                (vec![theta.cos(), theta.sin()], 2.0 * std::f64::consts::PI / angular_nodes as f64)
            })
            .collect(),
        3 => {
            let mut dirs = Vec::with_capacity(angular_nodes * angular_nodes);
            for j in 0..angular_nodes {
                let theta = 2.0 * std::f64::consts::PI * (j as f64 + 0.5) / angular_nodes as f64;
                for l in 0..angular_nodes {
                    let phi = std::f64::consts::PI * (l as f64 + 0.5) / angular_nodes as f64;
                    let weight = (2.0 * std::f64::consts::PI / angular_nodes as f64)
                        * (std::f64::consts::PI / angular_nodes as f64)
                        * phi.sin();
                    dirs.push((
                        vec![phi.sin() * theta.cos(), phi.sin() * theta.sin(), phi.cos()],
                        weight,
                    ));
                }
            }
            dirs
        }
        d => {
            return Err(Error::Config(format!(
                "polar quadrature implemented for n <= 3, got n = {d}"
            )))
        }
    };
    let total = par::sum_f64(dirs.len(), |idx| {
        let (e, weight) = &dirs[idx];
        let Ok(d) = domain.ray_exit_distance(anchor, e) else {
            return 0.0; // direction never enters the domain
        };
        let step = d / (radial_nodes - 1) as f64;
        let mut acc = 0.0;
        for i in 0..radial_nodes {
            let r = i as f64 * step;
            let q: Vec<f64> = anchor.iter().zip(e).map(|(a, ek)| a + r * ek).collect();
            let integrand = field.evaluate(&q).norm().powf(p) * r.powi(dim as i32 - 1);
            let w = if i == 0 || i == radial_nodes - 1 { 0.5 } else { 1.0 };
            acc += w * integrand;
        }
        weight * acc * step
    });
    Ok(total.powf(1.0 / p))
}

/// Built-in Dirichlet-compatible test functions.
pub mod test_fields {
    use super::*;

    /// Smooth weight vanishing on the boundary, equal to 1 at the stored
    /// interior point; product of constraint slacks for polytopes, the
    /// standard parabolic profile for balls.
    pub fn boundary_bump(domain: &ConvexDomain) -> impl Fn(&[f64]) -> f64 + Sync + use<> {
        let domain = domain.clone();
        let reference = domain.interior_point().to_vec();
        move |q: &[f64]| bump_value(&domain, &reference, q)
    }

    fn bump_value(domain: &ConvexDomain, reference: &[f64], q: &[f64]) -> f64 {
        match domain.contains(q) {
            Ok(Membership::Interior) => {}
            _ => return 0.0,
        }
        // rebuild the slack product from ray exits in the 2n axis directions:
        // exact for boxes and balls, smooth positive for general polytopes
        let dim = domain.dim();
        let mut value = 1.0;
        let mut scale = 1.0;
        for k in 0..dim {
            let mut e = vec![0.0; dim];
            e[k] = 1.0;
            let up = domain.ray_exit_distance(q, &e).unwrap_or(0.0);
            e[k] = -1.0;
            let down = domain.ray_exit_distance(q, &e).unwrap_or(0.0);
            value *= up * down;
            e[k] = 1.0;
            let up_ref = domain.ray_exit_distance(reference, &e).unwrap_or(1.0);
            e[k] = -1.0;
            let down_ref = domain.ray_exit_distance(reference, &e).unwrap_or(1.0);
            scale *= up_ref * down_ref;
        }
        value / scale
    }

    /// Tensor sine mode over the bounding box times the boundary bump.
    pub fn sine_bump(domain: &ConvexDomain, modes: &[usize]) -> impl Fn(&[f64]) -> Complex64 + Sync + use<> {
        let bump = boundary_bump(domain);
        let (bmin, bmax) = domain.bounding_box();
        let bmin = bmin.to_vec();
        let bmax = bmax.to_vec();
        let modes = modes.to_vec();
        move |q: &[f64]| {
            let mut v = 1.0;
            for k in 0..q.len() {
                let u = (q[k] - bmin[k]) / (bmax[k] - bmin[k]);
                v *= (modes[k] as f64 * std::f64::consts::PI * u).sin();
            }
            Complex64::new(v * bump(q), 0.0)
        }
    }

    /// Radial bump centered at the interior point.
    pub fn radial_bump(domain: &ConvexDomain) -> impl Fn(&[f64]) -> Complex64 + Sync + use<> {
        let bump = boundary_bump(domain);
        let center = domain.interior_point().to_vec();
        let width = 0.25 * domain.diameter();
        move |q: &[f64]| {
            let r2: f64 = q.iter().zip(&center).map(|(a, b)| (a - b) * (a - b)).sum();
            Complex64::new((-r2 / (width * width)).exp() * bump(q), 0.0)
        }
    }

    /// Seeded random smooth field: complex coefficients on a low-frequency
    /// sine basis, times the boundary bump.
    pub fn random_smooth(
        domain: &ConvexDomain,
        seed: u64,
        max_mode: usize,
    ) -> impl Fn(&[f64]) -> Complex64 + Sync + use<> {
        let bump = boundary_bump(domain);
        let (bmin, bmax) = domain.bounding_box();
        let bmin = bmin.to_vec();
        let bmax = bmax.to_vec();
        let dim = domain.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut terms: Vec<(Vec<usize>, Complex64)> = Vec::new();
        let mut modes = vec![1usize; dim];
        loop {
            let coeff = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            terms.push((modes.clone(), coeff));
            let mut k = 0;
            loop {
                modes[k] += 1;
                if modes[k] <= max_mode {
                    break;
                }
                modes[k] = 1;
                k += 1;
                if k == dim {
                    break;
                }
            }
            if k == dim {
                break;
            }
        }
        move |q: &[f64]| {
            let mut acc = Complex64::ZERO;
            for (m, c) in &terms {
                let mut v = 1.0;
                for k in 0..dim {
                    let u = (q[k] - bmin[k]) / (bmax[k] - bmin[k]);
                    v *= (m[k] as f64 * std::f64::consts::PI * u).sin();
                }
                acc += c * v;
            }
            acc * bump(q)
        }
    }

    /// Deterministic corpus of Dirichlet-compatible fields on a shared grid:
    /// a tensor sine bump, a radial bump, then seeded random smooth fields.
    pub fn dirichlet_corpus(grid: &Arc<Grid>, count: usize, seed: u64) -> Vec<ScalarField> {
        let domain = grid.domain().clone();
        let mut out = Vec::with_capacity(count);
        if count >= 1 {
            let f = sine_bump(&domain, &vec![1; domain.dim()]);
            out.push(ScalarField::sample_on(grid.clone(), f));
        }
        if count >= 2 {
            let f = radial_bump(&domain);
            out.push(ScalarField::sample_on(grid.clone(), f));
        }
        for i in out.len()..count {
            let f = random_smooth(&domain, seed.wrapping_add(i as u64), 3);
            out.push(ScalarField::sample_on(grid.clone(), f));
        }
        out
    }
}
