//! Property checks over small meshes: patch tests, adjointness and
//! monotonicity of `T`, the gradient against finite differences, agreement of
//! the CG minimizer with the Lavrentiev solve, and manufactured-solution
//! convergence orders.

use serde::Serialize;

use crate::assembly::{assemble_mass, assemble_stiffness, DiffusionField, SymTensor};
use crate::error::Result;
use crate::experiments::{diffusion_tensor, eoc, same_mesh_truth, FluxCoefficients, NoiseSource};
use crate::forward::{CauchyPair, ForwardContext};
use crate::mesh::{NodalField, Side, TriMesh};
use crate::regularization::{
    cg_minimize, lavrentiev_solve, CgOptions, LavrentievOptions, RegularizedProblem,
};
use crate::solvers::{solve_dirichlet, DirichletSystem, SolverKind};

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    pub seed: u64,
    pub levels: Vec<usize>,
    /// Replace the diffusion on one triangle by an indefinite matrix.
    pub corrupt_diffusion: bool,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            levels: vec![2, 4, 8],
            corrupt_diffusion: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PropertyResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn random_field(mesh: &TriMesh, noise: &mut NoiseSource) -> NodalField {
    let mut f = NodalField::zeros(mesh);
    f.values_mut().iter_mut().for_each(|v| *v = noise.uniform_pm1());
    f
}

/// Largest nodal deviation of the Neumann and Dirichlet solutions from the
/// linear exact solutions `x1` and `x1 + x2` (Q = I, f = 0).
pub fn patch_test_error(level: usize) -> Result<f64> {
    let mesh = TriMesh::uniform(level)?;
    let q = DiffusionField::identity(&mesh);
    let ctx = ForwardContext::new(mesh, q)?;
    let mesh = ctx.mesh();
    let zero = NodalField::zeros(mesh);
    let j = mesh.sample_edges(|_, side| match side {
        Side::Left => -1.0,
        Side::Right => 1.0,
        _ => 0.0,
    });
    let u = ctx.neumann_map(&zero, &j)?;
    let u_exact = mesh.interpolate(|x| x[0]);
    let g = mesh.interpolate_boundary(|x| x[0] + x[1]);
    let v = ctx.dirichlet_map(&zero, &g)?;
    let v_exact = mesh.interpolate(|x| x[0] + x[1]);
    Ok(u.max_abs_diff(&u_exact).max(v.max_abs_diff(&v_exact)))
}

// Degree-5 seven point rule on the reference triangle (barycentric, weight).
const DUNAVANT5: [([f64; 3], f64); 7] = {
    const A1: f64 = 0.059_715_871_789_769_82;
    const B1: f64 = 0.470_142_064_105_115_1;
    const A2: f64 = 0.797_426_985_353_087_3;
    const B2: f64 = 0.101_286_507_323_456_3;
    const W0: f64 = 0.225;
    const W1: f64 = 0.132_394_152_788_506_2;
    const W2: f64 = 0.125_939_180_544_827_2;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], W0),
        ([A1, B1, B1], W1),
        ([B1, A1, B1], W1),
        ([B1, B1, A1], W1),
        ([A2, B2, B2], W2),
        ([B2, A2, B2], W2),
        ([B2, B2, A2], W2),
    ]
};

/// `(‖u_h - u‖_{L2}, ‖u_h - u‖_{H1})` for the Dirichlet problem with Q = I,
/// f = 2 and exact solution `u = -(x1² + x2²)/2`.
pub fn manufactured_errors(level: usize) -> Result<(f64, f64)> {
    let exact = |x: [f64; 2]| -(x[0] * x[0] + x[1] * x[1]) / 2.0;
    let mesh = TriMesh::uniform(level)?;
    let k = assemble_stiffness(&mesh, &DiffusionField::identity(&mesh))?;
    let sys = DirichletSystem::new(k, &mesh, SolverKind::Auto)?;
    let load = assemble_mass(&mesh).matvec(NodalField::constant(&mesh, 2.0).values());
    let g = mesh.interpolate_boundary(exact);
    let uh = solve_dirichlet(&sys, &mesh, &load, &g)?;

    let mut l2_sq = 0.0;
    let mut semi_sq = 0.0;
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = tri.map(|v| mesh.vertices()[v]);
        let vals = tri.map(|v| uh.values()[v]);
        let area = mesh.signed_area(t);
        let (grads, _) = crate::assembly::p1_gradients(p);
        let grad_h = [
            vals[0] * grads[0][0] + vals[1] * grads[1][0] + vals[2] * grads[2][0],
            vals[0] * grads[0][1] + vals[1] * grads[1][1] + vals[2] * grads[2][1],
        ];
        for (lam, w) in DUNAVANT5 {
            let x = [
                lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0],
                lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1],
            ];
            let e = lam[0] * vals[0] + lam[1] * vals[1] + lam[2] * vals[2] - exact(x);
            // ∇u = -x
            let ge = [grad_h[0] + x[0], grad_h[1] + x[1]];
            l2_sq += w * area * e * e;
            semi_sq += w * area * (ge[0] * ge[0] + ge[1] * ge[1]);
        }
    }
    Ok((l2_sq.sqrt(), (l2_sq + semi_sq).sqrt()))
}

/// Experimental orders `(L2, H1)` of the manufactured problem over `levels`.
pub fn manufactured_eoc(levels: &[usize]) -> Result<(f64, f64)> {
    let mut l2 = Vec::new();
    let mut h1 = Vec::new();
    let mut hs = Vec::new();
    for &l in levels {
        let (a, b) = manufactured_errors(l)?;
        l2.push(a);
        h1.push(b);
        hs.push(8f64.sqrt() / l as f64);
    }
    Ok((eoc(&l2, &hs)?.mean, eoc(&h1, &hs)?.mean))
}

fn check(name: impl Into<String>, passed: bool, detail: String) -> PropertyResult {
    PropertyResult {
        name: name.into(),
        passed,
        detail,
    }
}

fn example_diffusion(mesh: &TriMesh, corrupt: bool) -> Result<DiffusionField> {
    let mut tensors: Vec<SymTensor> = (0..mesh.num_triangles())
        .map(|t| diffusion_tensor(mesh.barycenter(t)))
        .collect();
    if corrupt {
        tensors[0] = SymTensor::new(1.0, 3.0, 1.0);
    }
    DiffusionField::new(mesh, tensors)
}

fn operator_checks(ctx: &ForwardContext, noise: &mut NoiseSource, out: &mut Vec<PropertyResult>) -> Result<()> {
    let level = ctx.level();
    let mesh = ctx.mesh();
    let mut worst_adj: f64 = 0.0;
    let mut worst_mono = f64::INFINITY;
    for _ in 0..20 {
        let f = random_field(mesh, noise);
        let w = random_field(mesh, noise);
        let lhs = ctx.l2_inner(&ctx.t_op(&f)?, &w);
        let rhs = ctx.l2_inner(&f, &ctx.t_op(&w)?);
        worst_adj = worst_adj.max((lhs - rhs).abs() / (ctx.l2_norm(&f) * ctx.l2_norm(&w)));
        worst_mono = worst_mono.min(ctx.l2_inner(&ctx.t_op(&f)?, &f));
    }
    out.push(check(
        format!("T self-adjoint (level {level})"),
        worst_adj <= 1e-9,
        format!("max |(Tf,w)-(f,Tw)|/(|f||w|) = {worst_adj:.3e}"),
    ));
    out.push(check(
        format!("T monotone (level {level})"),
        worst_mono >= -1e-10,
        format!("min (Tξ,ξ) = {worst_mono:.3e}"),
    ));

    let truth = same_mesh_truth(ctx, FluxCoefficients::STANDARD)?;
    let mut flux = truth.flux.clone();
    flux.axpy(0.05, &noise.boundary_noise(level));
    let mut trace = truth.trace.clone();
    trace.axpy(0.05, &noise.boundary_noise(level));
    trace.recenter(mesh)?;
    let pair = CauchyPair::new(mesh, flux, trace)?;
    let prob = RegularizedProblem::new(ctx, vec![pair], 0.01 * mesh.h(), NodalField::zeros(mesh))?;

    let f = random_field(mesh, noise);
    let grad = prob.gradient(&f)?;
    let mut worst_fd: f64 = 0.0;
    let step = 1e-4;
    for _ in 0..5 {
        let xi = random_field(mesh, noise);
        let mut fp = f.clone();
        fp.axpy(step, &xi);
        let mut fm = f.clone();
        fm.axpy(-step, &xi);
        let fd = (prob.cost(&fp)? - prob.cost(&fm)?) / (2.0 * step);
        let an = ctx.l2_inner(&grad, &xi);
        worst_fd = worst_fd.max((fd - an).abs() / an.abs().max(1e-12));
    }
    out.push(check(
        format!("gradient vs central differences (level {level})"),
        worst_fd <= 1e-5,
        format!("max relative deviation {worst_fd:.3e}"),
    ));

    let lav = lavrentiev_solve(
        &prob,
        &LavrentievOptions {
            rel_tol: 1e-13,
            max_iter: None,
        },
    )?;
    let opts = CgOptions {
        max_iter: 5000,
        tau1: 1e-12,
        tau2: 0.0,
    };
    let state = cg_minimize(&prob, &NodalField::zeros(mesh), &opts)?;
    let diff = ctx.l2_norm(&(&state.f - &lav));
    let fixed_point = prob.fixed_point_residual(&lav)?;
    out.push(check(
        format!("CG minimizer equals Lavrentiev solution (level {level})"),
        diff <= 1e-6 && fixed_point <= 1e-8,
        format!("|Δf| = {diff:.3e}, fixed-point residual {fixed_point:.3e}, {} CG iterations", state.k),
    ));
    Ok(())
}

/// Runs every property and reports one result per property.
pub fn run_selftest(opts: &SelftestOptions) -> Vec<PropertyResult> {
    let mut out = Vec::new();
    let mut noise = NoiseSource::new(opts.seed, 0);

    for &level in &opts.levels {
        match patch_test_error(level) {
            Ok(err) => out.push(check(
                format!("patch test (level {level})"),
                err <= 1e-9,
                format!("max nodal error {err:.3e}"),
            )),
            Err(e) => out.push(check(format!("patch test (level {level})"), false, e.to_string())),
        }
    }

    for &level in &opts.levels {
        let ctx = TriMesh::uniform(level)
            .and_then(|mesh| {
                let q = example_diffusion(&mesh, opts.corrupt_diffusion)?;
                ForwardContext::new(mesh, q)
            });
        let ctx = match ctx {
            Ok(ctx) => {
                out.push(check(
                    format!("diffusion ellipticity (level {level})"),
                    true,
                    format!("q_min = {}", ctx.q_min()),
                ));
                ctx
            }
            Err(e) => {
                out.push(check(format!("diffusion ellipticity (level {level})"), false, e.to_string()));
                continue;
            }
        };
        let mut results = Vec::new();
        if let Err(e) = operator_checks(&ctx, &mut noise, &mut results) {
            results.push(check(format!("operator checks (level {level})"), false, e.to_string()));
        }
        out.extend(results);
    }

    match manufactured_eoc(&[4, 8, 16, 32]) {
        Ok((l2, h1)) => out.push(check(
            "manufactured solution EOC",
            (1.8..=2.2).contains(&l2) && (0.9..=1.1).contains(&h1),
            format!("L2 EOC {l2:.4}, H1 EOC {h1:.4}"),
        )),
        Err(e) => out.push(check("manufactured solution EOC", false, e.to_string())),
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_integrates_quintics() {
        // ∫ over the reference triangle of x^2 y^3 = 2! 3! / 7! = 12/5040
        let mut s = 0.0;
        for (lam, w) in DUNAVANT5 {
            let (x, y) = (lam[1], lam[2]);
            s += w * 0.5 * x * x * y * y * y;
        }
        assert!((s - 12.0 / 5040.0).abs() < 1e-15);
        let total: f64 = DUNAVANT5.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn corrupted_diffusion_fails() {
        let opts = SelftestOptions {
            corrupt_diffusion: true,
            levels: vec![2],
            ..Default::default()
        };
        let results = run_selftest(&opts);
        assert!(results
            .iter()
            .any(|r| r.name.starts_with("diffusion ellipticity") && !r.passed));
    }
}
