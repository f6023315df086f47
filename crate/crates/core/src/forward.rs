//! Discrete Neumann and Dirichlet maps, the operator `T f = N_f 0 - D_f 0`,
//! and the norms used throughout.
//!
//! All `L2(Ω)` inner products are mass weighted, `(u, v) = u^T M v`, so the
//! gradients and adjoint identities hold exactly at the discrete level.

use serde::Serialize;

use crate::assembly::{
    assemble_boundary_mass, assemble_mass, assemble_stiffness, neumann_load, DiffusionField,
};
use crate::error::{Error, Result};
use crate::mesh::{BoundaryField, NodalField, TriMesh};
use crate::solvers::{DirichletSystem, NeumannSystem, SolverKind};
use crate::sparse::SparseSymMatrix;

/// Mesh, diffusion, assembled matrices and factorized solvers for one level.
#[derive(Debug)]
pub struct ForwardContext {
    mesh: TriMesh,
    diffusion: DiffusionField,
    stiffness: SparseSymMatrix,
    laplacian: SparseSymMatrix,
    mass: SparseSymMatrix,
    boundary_mass: SparseSymMatrix,
    neumann: NeumannSystem,
    dirichlet: DirichletSystem,
}

/// Noisy or exact Cauchy data: a flux `j` and a zero-mean trace `g`.
#[derive(Debug, Clone, PartialEq)]
pub struct CauchyPair {
    pub flux: BoundaryField,
    pub trace: BoundaryField,
}

impl CauchyPair {
    /// Checks that the trace is nodal with zero boundary mean.
    pub fn new(mesh: &TriMesh, flux: BoundaryField, trace: BoundaryField) -> Result<Self> {
        mesh.check(flux.level())?;
        check_trace(mesh, &trace)?;
        Ok(Self { flux, trace })
    }
}

fn check_trace(mesh: &TriMesh, g: &BoundaryField) -> Result<()> {
    mesh.check(g.level())?;
    if !g.is_nodal() || !g.is_zero_mean(mesh)? {
        return Err(Error::NotZeroMean(g.mean(mesh)?));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1_semi: f64,
    pub h1: f64,
    pub energy: f64,
}

impl ForwardContext {
    pub fn new(mesh: TriMesh, diffusion: DiffusionField) -> Result<Self> {
        Self::with_solver(mesh, diffusion, SolverKind::Auto)
    }

    pub fn with_solver(mesh: TriMesh, diffusion: DiffusionField, kind: SolverKind) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh, &diffusion)?;
        let laplacian = assemble_stiffness(&mesh, &DiffusionField::identity(&mesh))?;
        let mass = assemble_mass(&mesh);
        let boundary_mass = assemble_boundary_mass(&mesh);
        let neumann = NeumannSystem::new(stiffness.clone(), boundary_mass.row_sums(), kind, mesh.level())?;
        let dirichlet = DirichletSystem::new(stiffness.clone(), &mesh, kind)?;
        Ok(Self {
            mesh,
            diffusion,
            stiffness,
            laplacian,
            mass,
            boundary_mass,
            neumann,
            dirichlet,
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.mesh
    }

    pub fn level(&self) -> usize {
        self.mesh.level()
    }

    pub fn diffusion(&self) -> &DiffusionField {
        &self.diffusion
    }

    pub fn q_min(&self) -> f64 {
        self.diffusion.q_min()
    }

    pub fn stiffness(&self) -> &SparseSymMatrix {
        &self.stiffness
    }

    pub fn mass(&self) -> &SparseSymMatrix {
        &self.mass
    }

    pub fn boundary_mass(&self) -> &SparseSymMatrix {
        &self.boundary_mass
    }

    pub fn neumann_system(&self) -> &NeumannSystem {
        &self.neumann
    }

    pub fn dirichlet_system(&self) -> &DirichletSystem {
        &self.dirichlet
    }

    fn volume_load(&self, f: &NodalField) -> Result<Vec<f64>> {
        self.mesh.check(f.level())?;
        Ok(self.mass.matvec(f.values()))
    }

    /// `N_f j`: Neumann solution with zero boundary mean.
    pub fn neumann_map(&self, f: &NodalField, j: &BoundaryField) -> Result<NodalField> {
        let mut load = self.volume_load(f)?;
        for (l, b) in load.iter_mut().zip(neumann_load(&self.mesh, j)?) {
            *l += b;
        }
        NodalField::new(self.level(), self.neumann.solve(&load)?)
    }

    /// `D_f g`: Dirichlet solution with trace `g` (nodal, zero boundary mean).
    pub fn dirichlet_map(&self, f: &NodalField, g: &BoundaryField) -> Result<NodalField> {
        check_trace(&self.mesh, g)?;
        let load = self.volume_load(f)?;
        NodalField::new(self.level(), self.dirichlet.solve(&load, g)?)
    }

    /// `T f = N_f 0 - D_f 0`.
    pub fn t_op(&self, f: &NodalField) -> Result<NodalField> {
        let load = self.volume_load(f)?;
        let n = self.neumann.solve(&load)?;
        let d = self
            .dirichlet
            .solve(&load, &BoundaryField::zeros(self.level()))?;
        let values = n.iter().zip(&d).map(|(a, b)| a - b).collect();
        NodalField::new(self.level(), values)
    }

    /// Mass weighted inner product `(u, v)`.
    pub fn l2_inner(&self, u: &NodalField, v: &NodalField) -> f64 {
        self.mass.bilinear(u.values(), v.values())
    }

    pub fn l2_norm(&self, u: &NodalField) -> f64 {
        self.l2_inner(u, u).max(0.0).sqrt()
    }

    /// Energy inner product `[u, v] = ∫ Q ∇u · ∇v`.
    pub fn energy_inner(&self, u: &NodalField, v: &NodalField) -> f64 {
        self.stiffness.bilinear(u.values(), v.values())
    }

    pub fn energy_sq(&self, u: &NodalField) -> f64 {
        self.energy_inner(u, u).max(0.0)
    }

    pub fn norms(&self, u: &NodalField) -> Norms {
        let l2 = self.l2_norm(u);
        let h1_semi = self.laplacian.quad_form(u.values()).max(0.0).sqrt();
        Norms {
            l2,
            h1_semi,
            h1: l2.hypot(h1_semi),
            energy: self.energy_sq(u).sqrt(),
        }
    }

    pub fn h1_norm(&self, u: &NodalField) -> f64 {
        self.norms(u).h1
    }

    pub fn boundary_l2(&self, b: &BoundaryField) -> Result<f64> {
        b.l2_norm(&self.mesh)
    }

    /// Boundary integral of the trace of `u`, `b^T u`.
    pub fn boundary_integral(&self, u: &NodalField) -> f64 {
        self.neumann
            .constraint()
            .iter()
            .zip(u.values())
            .map(|(b, v)| b * v)
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(level: usize) -> ForwardContext {
        let m = TriMesh::uniform(level).unwrap();
        let q = DiffusionField::identity(&m);
        ForwardContext::new(m, q).unwrap()
    }

    #[test]
    fn zero_data_gives_zero() {
        let c = ctx(4);
        let f = NodalField::zeros(c.mesh());
        let z = BoundaryField::zeros(4);
        assert_eq!(c.neumann_map(&f, &z).unwrap().max_abs(), 0.0);
        assert_eq!(c.dirichlet_map(&f, &z).unwrap().max_abs(), 0.0);
        assert_eq!(c.t_op(&f).unwrap().max_abs(), 0.0);
        let n = c.norms(&f);
        assert_eq!((n.l2, n.h1_semi, n.h1, n.energy), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn norms_of_one() {
        let c = ctx(6);
        let one = NodalField::constant(c.mesh(), 1.0);
        let n = c.norms(&one);
        assert!((n.l2 - 2.0).abs() < 1e-12);
        assert!(n.h1_semi.abs() < 1e-6);
        assert!(n.energy.abs() < 1e-6);
    }

    #[test]
    fn dirichlet_map_requires_zero_mean() {
        let c = ctx(4);
        let f = NodalField::zeros(c.mesh());
        let g = c.mesh().interpolate_boundary(|x| 1.0 + x[0]);
        assert!(matches!(c.dirichlet_map(&f, &g), Err(Error::NotZeroMean(_))));
        let g = g.recentered(c.mesh()).unwrap();
        assert!(c.dirichlet_map(&f, &g).is_ok());
    }

    #[test]
    fn neumann_patch_test() {
        let c = ctx(4);
        let f = NodalField::zeros(c.mesh());
        // flux of x1: n·e1
        let j = c.mesh().sample_edges(|_, side| match side {
            crate::mesh::Side::Left => -1.0,
            crate::mesh::Side::Right => 1.0,
            _ => 0.0,
        });
        let u = c.neumann_map(&f, &j).unwrap();
        let expected = c.mesh().interpolate(|x| x[0]);
        assert!(u.max_abs_diff(&expected) < 1e-12);
        assert!(c.boundary_integral(&u).abs() < 1e-13);
    }

    #[test]
    fn rejects_foreign_fields() {
        let c = ctx(4);
        let f = NodalField::zeros(&TriMesh::uniform(2).unwrap());
        assert!(c.t_op(&f).is_err());
        let f = NodalField::zeros(c.mesh());
        assert!(c.neumann_map(&f, &BoundaryField::zeros(2)).is_err());
    }
}
