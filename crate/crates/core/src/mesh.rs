//! Uniform triangulations of the square (-1,1)^2 and the fields living on them.
//!
//! Nodes are numbered lexicographically by (x2, x1): node `j * (level + 1) + i`
//! sits at `(-1 + 2i/level, -1 + 2j/level)`. Every grid cell is split along its
//! bottom-left to top-right diagonal. Boundary nodes are listed counter-clockwise
//! starting at the corner (-1,-1); boundary edge `k` joins boundary nodes `k`
//! and `k + 1` (cyclically).

use std::ops::{Add, Mul, Sub};

use serde::Serialize;

use crate::error::{Error, Result};

/// Side of the square a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub start: usize,
    pub end: usize,
    pub side: Side,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    level: usize,
    h: f64,
    vertices: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    boundary_nodes: Vec<usize>,
    boundary_edges: Vec<BoundaryEdge>,
    boundary_slot: Vec<Option<usize>>,
}

impl TriMesh {
    /// Builds the uniform mesh with `level` segments per side.
    pub fn uniform(level: usize) -> Result<Self> {
        if level == 0 {
            return Err(Error::InvalidLevel(level));
        }
        let n = level + 1;
        let coord = |i: usize| -1.0 + 2.0 * i as f64 / level as f64;
        let node = |i: usize, j: usize| j * n + i;

        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([coord(i), coord(j)]);
            }
        }

        let mut triangles = Vec::with_capacity(2 * level * level);
        for j in 0..level {
            for i in 0..level {
                let (n00, n10) = (node(i, j), node(i + 1, j));
                let (n01, n11) = (node(i, j + 1), node(i + 1, j + 1));
                triangles.push([n00, n10, n11]);
                triangles.push([n00, n11, n01]);
            }
        }

        let mut boundary_nodes = Vec::with_capacity(4 * level);
        let mut sides = Vec::with_capacity(4 * level);
        for i in 0..level {
            boundary_nodes.push(node(i, 0));
            sides.push(Side::Bottom);
        }
        for j in 0..level {
            boundary_nodes.push(node(level, j));
            sides.push(Side::Right);
        }
        for i in (1..=level).rev() {
            boundary_nodes.push(node(i, level));
            sides.push(Side::Top);
        }
        for j in (1..=level).rev() {
            boundary_nodes.push(node(0, j));
            sides.push(Side::Left);
        }

        let nb = boundary_nodes.len();
        let boundary_edges = (0..nb)
            .map(|k| BoundaryEdge {
                start: boundary_nodes[k],
                end: boundary_nodes[(k + 1) % nb],
                side: sides[k],
            })
            .collect();

        let mut boundary_slot = vec![None; n * n];
        for (k, &v) in boundary_nodes.iter().enumerate() {
            boundary_slot[v] = Some(k);
        }

        Ok(Self {
            level,
            h: 8f64.sqrt() / level as f64,
            vertices,
            triangles,
            boundary_nodes,
            boundary_edges,
            boundary_slot,
        })
    }

    pub fn level(&self) -> usize {
        self.level
    }

    /// Triangle diameter `sqrt(8) / level`.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_boundary_nodes(&self) -> usize {
        self.boundary_nodes.len()
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Boundary node indices in counter-clockwise order.
    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary_nodes
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    /// Position of `node` in the boundary ordering, if it lies on the boundary.
    pub fn boundary_slot(&self, node: usize) -> Option<usize> {
        self.boundary_slot[node]
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.num_vertices())
            .filter(|&v| self.boundary_slot[v].is_none())
            .collect()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise orientation).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn edge_length(&self, edge: &BoundaryEdge) -> f64 {
        let a = self.vertices[edge.start];
        let b = self.vertices[edge.end];
        (b[0] - a[0]).hypot(b[1] - a[1])
    }

    pub fn edge_midpoint(&self, edge: &BoundaryEdge) -> [f64; 2] {
        let a = self.vertices[edge.start];
        let b = self.vertices[edge.end];
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// Nodal interpolant of `func`.
    pub fn interpolate(&self, func: impl Fn([f64; 2]) -> f64) -> NodalField {
        NodalField {
            level: self.level,
            values: self.vertices.iter().map(|&x| func(x)).collect(),
        }
    }

    /// Boundary values of `func` at the boundary nodes.
    pub fn interpolate_boundary(&self, func: impl Fn([f64; 2]) -> f64) -> BoundaryField {
        let nodal = self
            .boundary_nodes
            .iter()
            .map(|&v| func(self.vertices[v]))
            .collect();
        BoundaryField::from_nodal(self.level, nodal)
    }

    /// Per-edge constants obtained by sampling `func` at edge midpoints.
    pub fn sample_edges(&self, func: impl Fn([f64; 2], Side) -> f64) -> BoundaryField {
        let edge = self
            .boundary_edges
            .iter()
            .map(|e| func(self.edge_midpoint(e), e.side))
            .collect();
        BoundaryField::from_edges(self.level, edge)
    }

    /// Dirichlet trace of a nodal field.
    pub fn trace(&self, u: &NodalField) -> Result<BoundaryField> {
        self.check(u.level)?;
        let nodal = self.boundary_nodes.iter().map(|&v| u.values[v]).collect();
        Ok(BoundaryField::from_nodal(self.level, nodal))
    }

    pub(crate) fn check(&self, level: usize) -> Result<()> {
        if level != self.level {
            return Err(Error::MeshMismatch {
                expected: self.level,
                found: level,
            });
        }
        Ok(())
    }
}

/// Coefficients of a continuous piecewise linear function, one per mesh node.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalField {
    level: usize,
    values: Vec<f64>,
}

impl NodalField {
    pub fn new(level: usize, values: Vec<f64>) -> Result<Self> {
        let expected = (level + 1) * (level + 1);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { level, values })
    }

    pub fn zeros(mesh: &TriMesh) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn constant(mesh: &TriMesh, c: f64) -> Self {
        Self {
            level: mesh.level,
            values: vec![c; mesh.num_vertices()],
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &NodalField) {
        debug_assert_eq!(self.level, other.level);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.values.iter_mut().for_each(|a| *a *= alpha);
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &NodalField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Add for &NodalField {
    type Output = NodalField;

    fn add(self, rhs: &NodalField) -> NodalField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &NodalField {
    type Output = NodalField;

    fn sub(self, rhs: &NodalField) -> NodalField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

impl Mul<&NodalField> for f64 {
    type Output = NodalField;

    fn mul(self, rhs: &NodalField) -> NodalField {
        let mut out = rhs.clone();
        out.scale(self);
        out
    }
}

/// Boundary data: the sum of a continuous piecewise linear trace (values at
/// the boundary nodes) and a piecewise constant part (one value per boundary
/// edge). Either part may be zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryField {
    level: usize,
    nodal: Vec<f64>,
    edge: Vec<f64>,
}

impl BoundaryField {
    pub fn zeros(level: usize) -> Self {
        Self {
            level,
            nodal: vec![0.0; 4 * level],
            edge: vec![0.0; 4 * level],
        }
    }

    pub fn from_nodal(level: usize, nodal: Vec<f64>) -> Self {
        assert_eq!(nodal.len(), 4 * level, "one value per boundary node");
        Self {
            level,
            nodal,
            edge: vec![0.0; 4 * level],
        }
    }

    pub fn from_edges(level: usize, edge: Vec<f64>) -> Self {
        assert_eq!(edge.len(), 4 * level, "one value per boundary edge");
        Self {
            level,
            nodal: vec![0.0; 4 * level],
            edge,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    pub fn nodal_mut(&mut self) -> &mut [f64] {
        &mut self.nodal
    }

    pub fn edge(&self) -> &[f64] {
        &self.edge
    }

    /// True when the piecewise constant part vanishes.
    pub fn is_nodal(&self) -> bool {
        self.edge.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.nodal
            .iter()
            .chain(&self.edge)
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Per-edge (left value, right value) of the represented function.
    fn edge_values<'a>(&'a self, mesh: &'a TriMesh) -> impl Iterator<Item = (f64, f64, f64)> + 'a {
        let nb = self.nodal.len();
        mesh.boundary_edges().iter().enumerate().map(move |(k, e)| {
            let len = mesh.edge_length(e);
            (
                len,
                self.nodal[k] + self.edge[k],
                self.nodal[(k + 1) % nb] + self.edge[k],
            )
        })
    }

    /// Exact integral over the boundary.
    pub fn integral(&self, mesh: &TriMesh) -> Result<f64> {
        mesh.check(self.level)?;
        Ok(self
            .edge_values(mesh)
            .map(|(len, a, b)| 0.5 * len * (a + b))
            .sum())
    }

    /// Boundary mean `∫ field / |∂Ω|`.
    pub fn mean(&self, mesh: &TriMesh) -> Result<f64> {
        let perimeter: f64 = mesh.boundary_edges().iter().map(|e| mesh.edge_length(e)).sum();
        Ok(self.integral(mesh)? / perimeter)
    }

    /// Exact `L2(∂Ω)` norm.
    pub fn l2_norm(&self, mesh: &TriMesh) -> Result<f64> {
        mesh.check(self.level)?;
        let sq: f64 = self
            .edge_values(mesh)
            .map(|(len, a, b)| len * (a * a + a * b + b * b) / 3.0)
            .sum();
        Ok(sq.max(0.0).sqrt())
    }

    /// Shifts the nodal part so that the boundary mean vanishes.
    pub fn recenter(&mut self, mesh: &TriMesh) -> Result<()> {
        let mean = self.mean(mesh)?;
        self.nodal.iter_mut().for_each(|v| *v -= mean);
        Ok(())
    }

    pub fn recentered(mut self, mesh: &TriMesh) -> Result<Self> {
        self.recenter(mesh)?;
        Ok(self)
    }

    /// Checks `|∫ field| <= 1e-10 * perimeter * max|value|`.
    pub fn is_zero_mean(&self, mesh: &TriMesh) -> Result<bool> {
        let perimeter = 8.0;
        let integral = self.integral(mesh)?;
        Ok(integral.abs() <= 1e-10 * perimeter * self.max_abs().max(f64::MIN_POSITIVE))
    }

    pub fn axpy(&mut self, alpha: f64, other: &BoundaryField) {
        debug_assert_eq!(self.level, other.level);
        for (a, b) in self.nodal.iter_mut().zip(&other.nodal) {
            *a += alpha * b;
        }
        for (a, b) in self.edge.iter_mut().zip(&other.edge) {
            *a += alpha * b;
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.nodal.iter_mut().chain(out.edge.iter_mut()).for_each(|v| *v *= alpha);
        out
    }
}

impl Sub for &BoundaryField {
    type Output = BoundaryField;

    fn sub(self, rhs: &BoundaryField) -> BoundaryField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Whether boundary data are shifted to zero mean after restriction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanPolicy {
    /// Dirichlet traces: restore the zero boundary mean.
    Recenter,
    /// Fluxes: keep sampled values.
    Keep,
}

fn level_ratio(coarse: usize, fine: usize) -> Result<usize> {
    if coarse == 0 || fine % coarse != 0 {
        return Err(Error::IncompatibleLevels { coarse, fine });
    }
    Ok(fine / coarse)
}

/// P1 interpolation of a coarse field onto a nested finer mesh.
pub fn prolong_nodal(coarse: &NodalField, fine_mesh: &TriMesh) -> Result<NodalField> {
    let lc = coarse.level;
    let lf = fine_mesh.level();
    let r = level_ratio(lc, lf)?;
    let nc = lc + 1;
    let nf = lf + 1;
    let v = &coarse.values;
    let mut values = vec![0.0; nf * nf];
    for jf in 0..nf {
        for i_f in 0..nf {
            // coarse cell and local coordinates (s,t) in [0,1]^2
            let (ic, si) = ((i_f / r).min(lc - 1), i_f - (i_f / r).min(lc - 1) * r);
            let (jc, tj) = ((jf / r).min(lc - 1), jf - (jf / r).min(lc - 1) * r);
            let s = si as f64 / r as f64;
            let t = tj as f64 / r as f64;
            let v00 = v[jc * nc + ic];
            let v10 = v[jc * nc + ic + 1];
            let v01 = v[(jc + 1) * nc + ic];
            let v11 = v[(jc + 1) * nc + ic + 1];
            let value = if (si == 0 || si == r) && (tj == 0 || tj == r) {
                match (si == 0, tj == 0) {
                    (true, true) => v00,
                    (false, true) => v10,
                    (true, false) => v01,
                    (false, false) => v11,
                }
            } else if si >= tj {
                v00 + s * (v10 - v00) + t * (v11 - v10)
            } else {
                v00 + t * (v01 - v00) + s * (v11 - v01)
            };
            values[jf * nf + i_f] = value;
        }
    }
    Ok(NodalField { level: lf, values })
}

/// Samples fine boundary data at the coarse boundary nodes.
///
/// Only the nodal part is transferred; a nonzero per-edge part is rejected.
pub fn restrict_boundary(
    fine: &BoundaryField,
    coarse_mesh: &TriMesh,
    policy: MeanPolicy,
) -> Result<BoundaryField> {
    let r = level_ratio(coarse_mesh.level(), fine.level)?;
    if !fine.is_nodal() {
        return Err(Error::InvalidArgument(
            "restriction expects nodal boundary data".into(),
        ));
    }
    let nodal = (0..coarse_mesh.num_boundary_nodes())
        .map(|k| fine.nodal[k * r])
        .collect();
    let mut out = BoundaryField::from_nodal(coarse_mesh.level(), nodal);
    if policy == MeanPolicy::Recenter {
        out.recenter(coarse_mesh)?;
    }
    Ok(out)
}
