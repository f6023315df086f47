//! P1 assembly: stiffness with piecewise constant matrix diffusion, mass,
//! boundary mass and Neumann loads.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryField, TriMesh};
use crate::sparse::SparseSymMatrix;

/// Symmetric 2x2 diffusion matrix `[[q11, q12], [q12, q22]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymTensor {
    pub q11: f64,
    pub q12: f64,
    pub q22: f64,
}

impl SymTensor {
    pub const IDENTITY: SymTensor = SymTensor {
        q11: 1.0,
        q12: 0.0,
        q22: 1.0,
    };

    pub fn new(q11: f64, q12: f64, q22: f64) -> Self {
        Self { q11, q12, q22 }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.q11 + self.q22);
        let radius = (0.5 * (self.q11 - self.q22)).hypot(self.q12);
        mean - radius
    }

    pub fn max_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.q11 + self.q22);
        let radius = (0.5 * (self.q11 - self.q22)).hypot(self.q12);
        mean + radius
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.q11 * v[0] + self.q12 * v[1],
            self.q12 * v[0] + self.q22 * v[1],
        ]
    }
}

/// Piecewise constant diffusion, one tensor per triangle.
#[derive(Debug, Clone)]
pub struct DiffusionField {
    level: usize,
    tensors: Vec<SymTensor>,
    q_min: f64,
    q_max: f64,
}

impl DiffusionField {
    /// Validates uniform ellipticity; `q_min` is the smallest eigenvalue over all triangles.
    pub fn new(mesh: &TriMesh, tensors: Vec<SymTensor>) -> Result<Self> {
        if tensors.len() != mesh.num_triangles() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_triangles(),
                found: tensors.len(),
            });
        }
        let mut q_min = f64::INFINITY;
        let mut q_max: f64 = 0.0;
        for (t, q) in tensors.iter().enumerate() {
            let lo = q.min_eigenvalue();
            if !(lo > 0.0) || !q.q11.is_finite() || !q.q12.is_finite() || !q.q22.is_finite() {
                return Err(Error::NotElliptic {
                    triangle: t,
                    min_eigenvalue: lo,
                });
            }
            q_min = q_min.min(lo);
            q_max = q_max.max(q.max_eigenvalue());
        }
        Ok(Self {
            level: mesh.level(),
            tensors,
            q_min,
            q_max,
        })
    }

    pub fn identity(mesh: &TriMesh) -> Self {
        Self::new(mesh, vec![SymTensor::IDENTITY; mesh.num_triangles()]).unwrap()
    }

    /// Samples `q` at every triangle barycenter.
    pub fn from_fn(mesh: &TriMesh, q: impl Fn([f64; 2]) -> SymTensor) -> Result<Self> {
        let tensors = (0..mesh.num_triangles()).map(|t| q(mesh.barycenter(t))).collect();
        Self::new(mesh, tensors)
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn tensors(&self) -> &[SymTensor] {
        &self.tensors
    }

    /// Ellipticity constant.
    pub fn q_min(&self) -> f64 {
        self.q_min
    }

    /// Largest eigenvalue over all triangles.
    pub fn q_max(&self) -> f64 {
        self.q_max
    }
}

/// Gradients of the three barycentric hat functions and the triangle area.
pub fn p1_gradients(p: [[f64; 2]; 3]) -> ([[f64; 2]; 3], f64) {
    let area = 0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]));
    let s = 1.0 / (2.0 * area);
    let mut grads = [[0.0; 2]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        grads[i] = [s * (p[j][1] - p[k][1]), s * (p[k][0] - p[j][0])];
    }
    (grads, area)
}

/// Element stiffness `area * (Q grad phi_a) . grad phi_b`.
pub fn p1_element_stiffness(p: [[f64; 2]; 3], q: &SymTensor) -> [[f64; 3]; 3] {
    let (grads, area) = p1_gradients(p);
    let mut ke = [[0.0; 3]; 3];
    for a in 0..3 {
        let qa = q.apply(grads[a]);
        for b in a..3 {
            let v = area * (qa[0] * grads[b][0] + qa[1] * grads[b][1]);
            ke[a][b] = v;
            ke[b][a] = v;
        }
    }
    ke
}

/// Exact P1 element mass `area / 12 * [[2,1,1],[1,2,1],[1,1,2]]`.
pub fn p1_element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn assemble_elements(mesh: &TriMesh, element: impl Fn(usize) -> [[f64; 3]; 3]) -> SparseSymMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let ke = element(t);
        for a in 0..3 {
            for b in 0..3 {
                triplets.push((tri[a], tri[b], ke[a][b]));
            }
        }
    }
    SparseSymMatrix::from_triplets(mesh.num_vertices(), triplets)
}

pub fn assemble_stiffness(mesh: &TriMesh, q: &DiffusionField) -> Result<SparseSymMatrix> {
    mesh.check(q.level())?;
    Ok(assemble_elements(mesh, |t| {
        let p = mesh.triangles()[t].map(|v| mesh.vertices()[v]);
        p1_element_stiffness(p, &q.tensors()[t])
    }))
}

pub fn assemble_mass(mesh: &TriMesh) -> SparseSymMatrix {
    assemble_elements(mesh, |t| p1_element_mass(mesh.signed_area(t)))
}

/// Boundary mass matrix over all mesh nodes; edge block `len/6 * [[2,1],[1,2]]`.
pub fn assemble_boundary_mass(mesh: &TriMesh) -> SparseSymMatrix {
    let mut triplets = Vec::with_capacity(4 * mesh.num_boundary_nodes());
    for e in mesh.boundary_edges() {
        let len = mesh.edge_length(e);
        let d = len / 3.0;
        let o = len / 6.0;
        triplets.push((e.start, e.start, d));
        triplets.push((e.start, e.end, o));
        triplets.push((e.end, e.start, o));
        triplets.push((e.end, e.end, d));
    }
    SparseSymMatrix::from_triplets(mesh.num_vertices(), triplets)
}

/// Load vector `<j, gamma phi_i>` for boundary data with nodal and per-edge parts.
pub fn neumann_load(mesh: &TriMesh, j: &BoundaryField) -> Result<Vec<f64>> {
    mesh.check(j.level())?;
    let nb = mesh.num_boundary_nodes();
    let mut load = vec![0.0; mesh.num_vertices()];
    for (k, e) in mesh.boundary_edges().iter().enumerate() {
        let len = mesh.edge_length(e);
        let a = j.nodal()[k];
        let b = j.nodal()[(k + 1) % nb];
        let c = j.edge()[k];
        load[e.start] += len * (2.0 * a + b) / 6.0 + 0.5 * len * c;
        load[e.end] += len * (a + 2.0 * b) / 6.0 + 0.5 * len * c;
    }
    Ok(load)
}
