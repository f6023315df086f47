//! Regularized least-gap functional, its gradient, the Fletcher–Reeves CG
//! minimizer with exact line search, and the equivalent Lavrentiev solve.
//!
//! For measurements `(j_i, g_i)`, `i = 1..I`, the cost is
//!
//! ```text
//! Υ(f) = (1/I) Σ_i ∫ Q ∇e_i · ∇e_i + ρ ‖f - f*‖²,   e_i = N_f j_i - D_f g_i,
//! ```
//!
//! with `L2` gradient `(2/I) Σ_i e_i + 2ρ (f - f*)`. Since
//! `e_i = T f + (N_0 j_i - D_0 g_i)`, the minimizer solves the linear
//! equation `(T + ρ) f = ρ f* - (1/I) Σ_i (N_0 j_i - D_0 g_i)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forward::{CauchyPair, ForwardContext};
use crate::mesh::NodalField;

pub struct RegularizedProblem<'a> {
    ctx: &'a ForwardContext,
    measurements: Vec<CauchyPair>,
    rho: f64,
    f_star: NodalField,
    /// `N_0 j_i - D_0 g_i` per measurement.
    offsets: Vec<NodalField>,
    mean_offset: NodalField,
}

/// Cost and gradient at one point.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub cost: f64,
    pub gradient: NodalField,
    pub gradient_norm: f64,
}

impl<'a> RegularizedProblem<'a> {
    pub fn new(
        ctx: &'a ForwardContext,
        measurements: Vec<CauchyPair>,
        rho: f64,
        f_star: NodalField,
    ) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "regularization parameter must be positive, got {rho}"
            )));
        }
        if measurements.is_empty() {
            return Err(Error::InvalidArgument("at least one measurement is required".into()));
        }
        ctx.mesh().check(f_star.level())?;
        let zero = NodalField::zeros(ctx.mesh());
        let mut offsets = Vec::with_capacity(measurements.len());
        for m in &measurements {
            let n = ctx.neumann_map(&zero, &m.flux)?;
            let d = ctx.dirichlet_map(&zero, &m.trace)?;
            offsets.push(&n - &d);
        }
        let mut mean_offset = zero;
        for o in &offsets {
            mean_offset.axpy(1.0 / offsets.len() as f64, o);
        }
        Ok(Self {
            ctx,
            measurements,
            rho,
            f_star,
            offsets,
            mean_offset,
        })
    }

    pub fn context(&self) -> &ForwardContext {
        self.ctx
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn f_star(&self) -> &NodalField {
        &self.f_star
    }

    pub fn measurements(&self) -> &[CauchyPair] {
        &self.measurements
    }

    /// `N_f j_i - D_f g_i`, solved directly.
    pub fn misfit(&self, f: &NodalField, i: usize) -> Result<NodalField> {
        let m = &self.measurements[i];
        let n = self.ctx.neumann_map(f, &m.flux)?;
        let d = self.ctx.dirichlet_map(f, &m.trace)?;
        Ok(&n - &d)
    }

    /// Cost and gradient through `e_i = T f + offset_i`: two solves per call
    /// regardless of the number of measurements.
    pub fn evaluate(&self, f: &NodalField) -> Result<Evaluation> {
        let tf = self.ctx.t_op(f)?;
        let count = self.offsets.len() as f64;
        let mut misfit_energy = 0.0;
        for o in &self.offsets {
            misfit_energy += self.ctx.energy_sq(&(&tf + o));
        }
        let dev = f - &self.f_star;
        let cost = misfit_energy / count + self.rho * self.ctx.l2_inner(&dev, &dev);

        let mut gradient = &tf + &self.mean_offset;
        gradient.axpy(self.rho, &dev);
        gradient.scale(2.0);
        let gradient_norm = self.ctx.l2_norm(&gradient);
        Ok(Evaluation {
            cost,
            gradient,
            gradient_norm,
        })
    }

    pub fn cost(&self, f: &NodalField) -> Result<f64> {
        Ok(self.evaluate(f)?.cost)
    }

    pub fn gradient(&self, f: &NodalField) -> Result<NodalField> {
        Ok(self.evaluate(f)?.gradient)
    }

    /// `‖f - f* + (1/ρ)(1/I) Σ_i e_i‖`, zero exactly at the minimizer.
    pub fn fixed_point_residual(&self, f: &NodalField) -> Result<f64> {
        let mut mean_misfit = NodalField::zeros(self.ctx.mesh());
        for i in 0..self.measurements.len() {
            mean_misfit.axpy(1.0 / self.measurements.len() as f64, &self.misfit(f, i)?);
        }
        let mut r = f - &self.f_star;
        r.axpy(1.0 / self.rho, &mean_misfit);
        Ok(self.ctx.l2_norm(&r))
    }

    /// `(T + ρ) d`
    fn apply_normal(&self, d: &NodalField) -> Result<NodalField> {
        let mut out = self.ctx.t_op(d)?;
        out.axpy(self.rho, d);
        Ok(out)
    }

    /// Right-hand side `ρ f* - mean offset` of the Lavrentiev equation.
    fn lavrentiev_rhs(&self) -> NodalField {
        let mut rhs = self.rho * &self.f_star;
        rhs.axpy(-1.0, &self.mean_offset);
        rhs
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub max_iter: usize,
    pub tau1: f64,
    pub tau2: f64,
}

/// One row of the iteration history. Cost, gradient norm and tolerance refer
/// to `f^k`; `step` and `beta` are `t^k` and `β^k` of the update leaving
/// `f^k` (absent for the final iterate, `β^0` is absent by definition).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CgRecord {
    pub k: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: Option<f64>,
    pub beta: Option<f64>,
    pub tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct CgState {
    pub k: usize,
    pub f: NodalField,
    pub gradient: NodalField,
    pub direction: NodalField,
    pub tolerance: f64,
    pub initial_grad_norm: f64,
    pub history: Vec<CgRecord>,
}

impl CgState {
    pub fn converged(&self) -> bool {
        self.tolerance <= 0.0
    }
}

/// Fletcher–Reeves CG with closed-form exact line search.
///
/// Stops when `‖∇Υ(f^k)‖ - τ1 - τ2 ‖∇Υ(f^0)‖ <= 0` or after `max_iter` updates.
pub fn cg_minimize(prob: &RegularizedProblem<'_>, f0: &NodalField, opts: &CgOptions) -> Result<CgState> {
    if opts.max_iter == 0 || opts.tau1 < 0.0 || opts.tau2 < 0.0 {
        return Err(Error::InvalidArgument(
            "max_iter must be positive and tau1, tau2 nonnegative".into(),
        ));
    }
    let ctx = prob.context();
    let mut f = f0.clone();
    let mut eval = prob.evaluate(&f)?;
    let initial_grad_norm = eval.gradient_norm;
    let threshold = opts.tau1 + opts.tau2 * initial_grad_norm;
    let mut tolerance = eval.gradient_norm - threshold;
    let mut history = vec![CgRecord {
        k: 0,
        cost: eval.cost,
        grad_norm: eval.gradient_norm,
        step: None,
        beta: None,
        tolerance,
    }];

    let mut direction = -1.0 * &eval.gradient;
    if initial_grad_norm == 0.0 {
        return Ok(CgState {
            k: 0,
            f,
            gradient: eval.gradient,
            direction,
            tolerance,
            initial_grad_norm,
            history,
        });
    }

    let mut k = 0;
    loop {
        let td = ctx.t_op(&direction)?;
        let d_sq = ctx.l2_inner(&direction, &direction);
        let denom = ctx.l2_inner(&direction, &td) + prob.rho() * d_sq;
        if !(denom > 0.0) {
            return Err(Error::NonPositiveCurvature(denom));
        }
        let step = -0.5 * ctx.l2_inner(&direction, &eval.gradient) / denom;
        history[k].step = Some(step);
        f.axpy(step, &direction);
        k += 1;

        let next = prob.evaluate(&f)?;
        tolerance = next.gradient_norm - threshold;
        history.push(CgRecord {
            k,
            cost: next.cost,
            grad_norm: next.gradient_norm,
            step: None,
            beta: None,
            tolerance,
        });
        if tolerance <= 0.0 || k >= opts.max_iter || next.gradient_norm == 0.0 {
            eval = next;
            break;
        }
        let beta = (next.gradient_norm / eval.gradient_norm).powi(2);
        history[k].beta = Some(beta);
        direction.scale(beta);
        direction.axpy(-1.0, &next.gradient);
        eval = next;
    }

    Ok(CgState {
        k,
        f,
        gradient: eval.gradient,
        direction,
        tolerance,
        initial_grad_norm,
        history,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LavrentievOptions {
    pub rel_tol: f64,
    /// Defaults to ten times the number of unknowns.
    pub max_iter: Option<usize>,
}

impl Default for LavrentievOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            max_iter: None,
        }
    }
}

/// Solves `(T + ρ) f = ρ f* - (1/I) Σ_i (N_0 j_i - D_0 g_i)` by matrix-free
/// conjugate gradients in the mass weighted inner product.
pub fn lavrentiev_solve(prob: &RegularizedProblem<'_>, opts: &LavrentievOptions) -> Result<NodalField> {
    let ctx = prob.context();
    let rhs = prob.lavrentiev_rhs();
    let rhs_norm = ctx.l2_norm(&rhs);
    let mut x = NodalField::zeros(ctx.mesh());
    if rhs_norm == 0.0 {
        return Ok(x);
    }
    let max_iter = opts.max_iter.unwrap_or(10 * x.len());
    let target = opts.rel_tol * rhs_norm;

    let mut iterations = 0;
    let mut residual_norm;
    // outer loop restarts from the true residual if the recursive one drifted
    loop {
        let mut r = &rhs - &prob.apply_normal(&x)?;
        let mut rr = ctx.l2_inner(&r, &r);
        residual_norm = rr.sqrt();
        if residual_norm <= target {
            return Ok(x);
        }
        if iterations >= max_iter {
            break;
        }
        let mut p = r.clone();
        while iterations < max_iter {
            iterations += 1;
            let ap = prob.apply_normal(&p)?;
            let pap = ctx.l2_inner(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::NonPositiveCurvature(pap));
            }
            let alpha = rr / pap;
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            let rr_new = ctx.l2_inner(&r, &r);
            if rr_new.sqrt() <= target {
                break;
            }
            p.scale(rr_new / rr);
            p.axpy(1.0, &r);
            rr = rr_new;
        }
    }
    Err(Error::NoConvergence {
        iterations,
        residual: residual_norm / rhs_norm,
    })
}

/// Reference solve of the Lavrentiev equation through the assembled dense
/// operator `M T + ρ M` and a Cholesky factorization. Costs two sparse solves
/// per node plus a dense factorization; intended for small meshes and tiny `ρ`.
pub fn lavrentiev_solve_dense(prob: &RegularizedProblem<'_>) -> Result<NodalField> {
    let ctx = prob.context();
    let n = ctx.mesh().num_vertices();
    let mass = ctx.mass();
    let mut op = DMatrix::<f64>::zeros(n, n);
    let mut unit = NodalField::zeros(ctx.mesh());
    for col in 0..n {
        unit.values_mut()[col] = 1.0;
        let t = ctx.t_op(&unit)?;
        unit.values_mut()[col] = 0.0;
        let mt = mass.matvec(t.values());
        for (row, v) in mt.into_iter().enumerate() {
            op[(row, col)] = v;
        }
    }
    let sym = 0.5 * (&op + op.transpose());
    let mut a = sym;
    for i in 0..n {
        for (j, v) in mass.row(i) {
            a[(i, j)] += prob.rho() * v;
        }
    }
    let rhs = prob.lavrentiev_rhs();
    let b = DVector::from_vec(mass.matvec(rhs.values()));
    let chol = a.cholesky().ok_or(Error::NotPositiveDefinite {
        row: 0,
        pivot: f64::NAN,
    })?;
    NodalField::new(ctx.level(), chol.solve(&b).as_slice().to_vec())
}

/// Mesh size, regularization parameter and noise scale of one refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Schedule {
    pub h: f64,
    pub rho: f64,
    pub theta: f64,
}

/// `h = sqrt(8)/level`, `ρ = 0.01 h`, `θ = h sqrt(ρ)`.
pub fn parameter_schedule(level: usize) -> Result<Schedule> {
    parameter_schedule_with(level, 0.01)
}

pub fn parameter_schedule_with(level: usize, rho_coeff: f64) -> Result<Schedule> {
    if level == 0 {
        return Err(Error::InvalidLevel(level));
    }
    let h = 8f64.sqrt() / level as f64;
    let rho = rho_coeff * h;
    Ok(Schedule {
        h,
        rho,
        theta: h * rho.sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::DiffusionField;
    use crate::mesh::{BoundaryField, TriMesh};

    #[test]
    fn schedule_values() {
        let s = parameter_schedule(4).unwrap();
        assert!((s.rho - 0.7071e-2).abs() < 1e-6);
        assert!((s.theta - 5.946e-2).abs() < 1e-5);
        let s = parameter_schedule(64).unwrap();
        assert!((s.rho - 0.4419e-3).abs() < 1e-7);
        assert!(parameter_schedule(0).is_err());
    }

    fn zero_problem(ctx: &ForwardContext) -> RegularizedProblem<'_> {
        let l = ctx.level();
        let pair = CauchyPair::new(ctx.mesh(), BoundaryField::zeros(l), BoundaryField::zeros(l)).unwrap();
        RegularizedProblem::new(ctx, vec![pair], 0.1, NodalField::zeros(ctx.mesh())).unwrap()
    }

    #[test]
    fn zero_data_is_optimal_at_zero() {
        let m = TriMesh::uniform(4).unwrap();
        let q = DiffusionField::identity(&m);
        let ctx = ForwardContext::new(m, q).unwrap();
        let prob = zero_problem(&ctx);
        let zero = NodalField::zeros(ctx.mesh());
        assert_eq!(prob.cost(&zero).unwrap(), 0.0);
        assert_eq!(prob.gradient(&zero).unwrap().max_abs(), 0.0);
        assert_eq!(lavrentiev_solve(&prob, &LavrentievOptions::default()).unwrap().max_abs(), 0.0);
        let opts = CgOptions {
            max_iter: 10,
            tau1: 0.0,
            tau2: 0.0,
        };
        let state = cg_minimize(&prob, &zero, &opts).unwrap();
        assert_eq!(state.k, 0);
        assert_eq!(state.f, zero);
    }

    #[test]
    fn rejects_bad_parameters() {
        let m = TriMesh::uniform(2).unwrap();
        let q = DiffusionField::identity(&m);
        let ctx = ForwardContext::new(m, q).unwrap();
        let f = NodalField::zeros(ctx.mesh());
        assert!(RegularizedProblem::new(&ctx, vec![], 0.1, f.clone()).is_err());
        let pair = CauchyPair::new(ctx.mesh(), BoundaryField::zeros(2), BoundaryField::zeros(2)).unwrap();
        assert!(RegularizedProblem::new(&ctx, vec![pair.clone()], 0.0, f.clone()).is_err());
        let prob = RegularizedProblem::new(&ctx, vec![pair], 0.1, f.clone()).unwrap();
        let bad = CgOptions {
            max_iter: 0,
            tau1: 0.0,
            tau2: 0.0,
        };
        assert!(cg_minimize(&prob, &f, &bad).is_err());
    }
}
