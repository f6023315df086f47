//! Linear solvers for the discrete Neumann and Dirichlet problems.
//!
//! Both problems reduce to symmetric positive definite solves on a subset of
//! the nodes. These are factorized once with an envelope Cholesky
//! decomposition (the lexicographic node ordering of the uniform mesh has
//! bandwidth `level + 2`), or, above [`DIRECT_LEVEL_LIMIT`], solved with
//! Jacobi preconditioned conjugate gradients.

use crate::error::{Error, Result};
use crate::mesh::{BoundaryField, NodalField, TriMesh};
use crate::sparse::{dot, norm2, SparseSymMatrix};

/// Finest level factorized directly by [`SolverKind::Auto`].
pub const DIRECT_LEVEL_LIMIT: usize = 128;

/// Acceptable relative residual of a completed solve.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;

const PCG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverKind {
    #[default]
    Auto,
    Direct,
    Iterative,
}

impl SolverKind {
    fn use_direct(self, level: usize) -> bool {
        match self {
            SolverKind::Auto => level <= DIRECT_LEVEL_LIMIT,
            SolverKind::Direct => true,
            SolverKind::Iterative => false,
        }
    }
}

/// Envelope (skyline) Cholesky factor `A = L L^T`.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    offset: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    pub fn factor(a: &SparseSymMatrix) -> Result<Self> {
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(j, _)| j).next().unwrap_or(i).min(i))
            .collect();
        let mut offset = Vec::with_capacity(n + 1);
        let mut total = 0;
        for i in 0..n {
            offset.push(total);
            total += i - first[i] + 1;
        }
        offset.push(total);
        let mut data = vec![0.0; total];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[offset[i] + j - first[i]] = v;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let (head, row_i) = data.split_at_mut(offset[i]);
                let row_j = &head[offset[j]..offset[j + 1]];
                let s = dot(&row_i[k0 - fi..j - fi], &row_j[k0 - fj..j - fj]);
                let ljj = row_j[j - fj];
                row_i[j - fi] = (row_i[j - fi] - s) / ljj;
            }
            let row_i = &mut data[offset[i]..offset[i + 1]];
            let (off, diag) = row_i.split_at_mut(i - fi);
            let d = diag[0] - dot(off, off);
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { row: i, pivot: d });
            }
            diag[0] = d.sqrt();
        }
        Ok(Self {
            first,
            offset,
            data,
        })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            let s = dot(&row[..i - fi], &x[fi..i]);
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.offset[i]..self.offset[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}

/// Jacobi preconditioned conjugate gradients.
pub fn pcg(
    a: &SparseSymMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, usize)> {
    let n = a.dim();
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|&d| 1.0 / d).collect();
    let mut x = vec![0.0; n];
    let b_norm = norm2(b);
    if b_norm == 0.0 {
        return Ok((x, 0));
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotPositiveDefinite { row: it, pivot: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm2(&r) <= rel_tol * b_norm {
            return Ok((x, it));
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iter,
        residual: norm2(&r) / b_norm,
    })
}

/// SPD solver on a fixed matrix.
#[derive(Debug, Clone)]
enum SpdSolver {
    Direct(EnvelopeCholesky),
    Iterative(SparseSymMatrix),
}

impl SpdSolver {
    fn new(a: SparseSymMatrix, direct: bool) -> Result<Self> {
        if direct {
            Ok(Self::Direct(EnvelopeCholesky::factor(&a)?))
        } else {
            Ok(Self::Iterative(a))
        }
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Direct(chol) => {
                let mut x = rhs.to_vec();
                chol.solve_in_place(&mut x);
                Ok(x)
            }
            Self::Iterative(a) => Ok(pcg(a, rhs, PCG_TOL, 10 * a.dim())?.0),
        }
    }
}

fn relative_residual(residual: &[f64], reference: &[f64]) -> f64 {
    let r = norm2(residual);
    let s = norm2(reference);
    if s == 0.0 {
        r
    } else {
        r / s
    }
}

/// Pure Neumann problem on the zero boundary mean subspace:
/// the bordered system `[[K, b], [b^T, 0]] [u; λ] = [load; 0]` with
/// `b_i = ∫_∂Ω φ_i`.
///
/// The border is eliminated exactly: `λ = 1^T load / 1^T b`, a particular
/// solution of the compatible singular system is obtained with node 0 pinned,
/// and the constant shift that enforces `b^T u = 0` is removed.
#[derive(Debug, Clone)]
pub struct NeumannSystem {
    stiffness: SparseSymMatrix,
    constraint: Vec<f64>,
    constraint_total: f64,
    reduced: SpdSolver,
}

impl NeumannSystem {
    pub fn new(stiffness: SparseSymMatrix, constraint: Vec<f64>, kind: SolverKind, level: usize) -> Result<Self> {
        let n = stiffness.dim();
        if constraint.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: constraint.len(),
            });
        }
        let constraint_total: f64 = constraint.iter().sum();
        if constraint_total.abs() <= f64::EPSILON {
            return Err(Error::InvalidArgument(
                "constraint vector must not be orthogonal to constants".into(),
            ));
        }
        let free: Vec<usize> = (1..n).collect();
        let reduced = SpdSolver::new(stiffness.principal_submatrix(&free)?, kind.use_direct(level))?;
        Ok(Self {
            stiffness,
            constraint,
            constraint_total,
            reduced,
        })
    }

    pub fn dim(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn constraint(&self) -> &[f64] {
        &self.constraint
    }

    /// Returns `(u, λ)` with `K u + λ b = load` and `b^T u = 0`.
    pub fn solve_with_multiplier(&self, load: &[f64]) -> Result<(Vec<f64>, f64)> {
        let n = self.dim();
        if load.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: load.len(),
            });
        }
        let lambda = load.iter().sum::<f64>() / self.constraint_total;
        let rhs: Vec<f64> = load
            .iter()
            .zip(&self.constraint)
            .skip(1)
            .map(|(l, b)| l - lambda * b)
            .collect();
        let reduced = self.reduced.solve(&rhs)?;
        let mut u = Vec::with_capacity(n);
        u.push(0.0);
        u.extend(reduced);
        let shift = dot(&self.constraint, &u) / self.constraint_total;
        u.iter_mut().for_each(|v| *v -= shift);

        let mut residual = self.stiffness.matvec(&u);
        for i in 0..n {
            residual[i] += lambda * self.constraint[i] - load[i];
        }
        let rel = relative_residual(&residual, load);
        if rel > SOLVE_RESIDUAL_TOL {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: rel,
            });
        }
        Ok((u, lambda))
    }

    pub fn solve(&self, load: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solve_with_multiplier(load)?.0)
    }
}

/// Dirichlet problem: interior block of `K` with nodally lifted boundary values.
#[derive(Debug, Clone)]
pub struct DirichletSystem {
    stiffness: SparseSymMatrix,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    inner: Option<SpdSolver>,
}

impl DirichletSystem {
    pub fn new(stiffness: SparseSymMatrix, mesh: &TriMesh, kind: SolverKind) -> Result<Self> {
        if stiffness.dim() != mesh.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: mesh.num_vertices(),
                found: stiffness.dim(),
            });
        }
        let interior = mesh.interior_nodes();
        let inner = if interior.is_empty() {
            None
        } else {
            Some(SpdSolver::new(
                stiffness.principal_submatrix(&interior)?,
                kind.use_direct(mesh.level()),
            )?)
        };
        Ok(Self {
            stiffness,
            interior,
            boundary: mesh.boundary_nodes().to_vec(),
            inner,
        })
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Solves with `v = g` on the boundary nodes and `(K v)_i = load_i` at interior nodes.
    pub fn solve(&self, load: &[f64], g: &BoundaryField) -> Result<Vec<f64>> {
        let n = self.stiffness.dim();
        if load.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: load.len(),
            });
        }
        if g.nodal().len() != self.boundary.len() || !g.is_nodal() {
            return Err(Error::InvalidArgument(
                "Dirichlet data must be a nodal boundary field on the same mesh".into(),
            ));
        }
        let mut v = vec![0.0; n];
        for (&node, &value) in self.boundary.iter().zip(g.nodal()) {
            v[node] = value;
        }
        let Some(inner) = &self.inner else {
            return Ok(v);
        };
        let kv = self.stiffness.matvec(&v);
        let rhs: Vec<f64> = self.interior.iter().map(|&i| load[i] - kv[i]).collect();
        let vi = inner.solve(&rhs)?;
        for (&node, value) in self.interior.iter().zip(vi) {
            v[node] = value;
        }

        let kv = self.stiffness.matvec(&v);
        let residual: Vec<f64> = self.interior.iter().map(|&i| kv[i] - load[i]).collect();
        let rel = relative_residual(&residual, &rhs);
        if rel > SOLVE_RESIDUAL_TOL {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: rel,
            });
        }
        Ok(v)
    }
}

/// Solves the Neumann system and wraps the result as a nodal field.
pub fn solve_neumann(sys: &NeumannSystem, mesh: &TriMesh, load: &[f64]) -> Result<NodalField> {
    NodalField::new(mesh.level(), sys.solve(load)?)
}

pub fn solve_dirichlet(
    sys: &DirichletSystem,
    mesh: &TriMesh,
    load: &[f64],
    g: &BoundaryField,
) -> Result<NodalField> {
    mesh.check(g.level())?;
    NodalField::new(mesh.level(), sys.solve(load, g)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_boundary_mass, assemble_stiffness, DiffusionField};

    fn laplace(level: usize) -> (TriMesh, SparseSymMatrix, Vec<f64>) {
        let m = TriMesh::uniform(level).unwrap();
        let k = assemble_stiffness(&m, &DiffusionField::identity(&m)).unwrap();
        let b = assemble_boundary_mass(&m).row_sums();
        (m, k, b)
    }

    #[test]
    fn envelope_cholesky_matches_dense() {
        // tridiagonal SPD plus a far off-diagonal entry
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        t.push((0, 5, 0.5));
        t.push((5, 0, 0.5));
        let a = SparseSymMatrix::from_triplets(n, t);
        let chol = EnvelopeCholesky::factor(&a).unwrap();
        let x_true = [1.0, -2.0, 0.5, 3.0, 0.0, -1.0];
        let mut x = a.matvec(&x_true);
        chol.solve_in_place(&mut x);
        for (a, b) in x.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn envelope_cholesky_rejects_indefinite() {
        let a = SparseSymMatrix::from_triplets(2, vec![(0, 0, 1.0), (0, 1, 2.0), (1, 0, 2.0), (1, 1, 1.0)]);
        assert!(matches!(
            EnvelopeCholesky::factor(&a),
            Err(Error::NotPositiveDefinite { row: 1, .. })
        ));
    }

    #[test]
    fn pcg_agrees_with_direct() {
        let (m, k, _) = laplace(8);
        let interior = m.interior_nodes();
        let a = k.principal_submatrix(&interior).unwrap();
        let b: Vec<f64> = (0..a.dim()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let (x, _) = pcg(&a, &b, 1e-13, 1000).unwrap();
        let mut y = b.clone();
        EnvelopeCholesky::factor(&a).unwrap().solve_in_place(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn neumann_zero_load() {
        let (m, k, b) = laplace(4);
        let sys = NeumannSystem::new(k, b, SolverKind::Auto, m.level()).unwrap();
        let u = sys.solve(&vec![0.0; m.num_vertices()]).unwrap();
        assert!(u.iter().all(|&v| v == 0.0));
        assert!(sys.solve(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn neumann_iterative_matches_direct() {
        let (m, k, b) = laplace(8);
        let direct = NeumannSystem::new(k.clone(), b.clone(), SolverKind::Direct, 8).unwrap();
        let iterative = NeumannSystem::new(k, b, SolverKind::Iterative, 8).unwrap();
        let load: Vec<f64> = m.vertices().iter().map(|x| x[0] * x[1] + 0.3).collect();
        let u1 = direct.solve(&load).unwrap();
        let u2 = iterative.solve(&load).unwrap();
        for (a, b) in u1.iter().zip(&u2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn dirichlet_zero_data() {
        let (m, k, _) = laplace(4);
        let sys = DirichletSystem::new(k, &m, SolverKind::Auto).unwrap();
        let v = sys.solve(&vec![0.0; 25], &BoundaryField::zeros(4)).unwrap();
        assert!(v.iter().all(|&v| v == 0.0));
        // per-edge data cannot be prescribed nodally
        assert!(sys.solve(&vec![0.0; 25], &BoundaryField::from_edges(4, vec![1.0; 16])).is_err());
    }

    #[test]
    fn dirichlet_on_single_cell_mesh() {
        let (m, k, _) = laplace(1);
        let sys = DirichletSystem::new(k, &m, SolverKind::Auto).unwrap();
        let g = m.interpolate_boundary(|x| x[0] + 2.0 * x[1]);
        let v = solve_dirichlet(&sys, &m, &[0.0; 4], &g).unwrap();
        assert_eq!(v, m.interpolate(|x| x[0] + 2.0 * x[1]));
    }
}
