use cauchy_source::experiments::{example_context, same_mesh_truth, FluxCoefficients, NoiseSource};
use cauchy_source::regularization::{
    cg_minimize, lavrentiev_solve, lavrentiev_solve_dense, parameter_schedule, CgOptions, LavrentievOptions,
    RegularizedProblem,
};
use cauchy_source::{BoundaryField, CauchyPair, ForwardContext, NodalField};
use proptest::prelude::*;

fn random_field(ctx: &ForwardContext, noise: &mut NoiseSource) -> NodalField {
    let values = (0..ctx.mesh().num_vertices()).map(|_| noise.uniform_pm1()).collect();
    NodalField::new(ctx.level(), values).unwrap()
}

fn noisy_pair(ctx: &ForwardContext, theta: f64, noise: &mut NoiseSource) -> CauchyPair {
    let truth = same_mesh_truth(ctx, FluxCoefficients::STANDARD).unwrap();
    let mut flux = truth.flux.clone();
    flux.axpy(theta, &noise.boundary_noise(ctx.level()));
    let mut trace = truth.trace.clone();
    trace.axpy(theta, &noise.boundary_noise(ctx.level()));
    trace.recenter(ctx.mesh()).unwrap();
    CauchyPair::new(ctx.mesh(), flux, trace).unwrap()
}

fn tight() -> CgOptions {
    CgOptions {
        max_iter: 5000,
        tau1: 1e-12,
        tau2: 0.0,
    }
}

fn dot(a: &NodalField, b: &NodalField) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum()
}

#[test]
fn maps_are_affine() {
    let ctx = example_context(8).unwrap();
    let mesh = ctx.mesh();
    let mut noise = NoiseSource::new(1, 0);
    let zero = NodalField::zeros(mesh);
    for _ in 0..5 {
        let f = random_field(&ctx, &mut noise);
        let j = noise.boundary_noise(8);
        let g = noise.boundary_noise(8).recentered(mesh).unwrap();
        let n = ctx.neumann_map(&f, &j).unwrap();
        let split = &ctx.neumann_map(&f, &BoundaryField::zeros(8)).unwrap() + &ctx.neumann_map(&zero, &j).unwrap();
        assert!(n.max_abs_diff(&split) <= 1e-10 * n.max_abs().max(1.0));
        let d = ctx.dirichlet_map(&f, &g).unwrap();
        let split = &ctx.dirichlet_map(&f, &BoundaryField::zeros(8)).unwrap() + &ctx.dirichlet_map(&zero, &g).unwrap();
        assert!(d.max_abs_diff(&split) <= 1e-10 * d.max_abs().max(1.0));
        // derivative in f is the map with zero boundary data
        let xi = random_field(&ctx, &mut noise);
        let shifted = ctx.neumann_map(&(&f + &xi), &j).unwrap();
        let derivative = ctx.neumann_map(&xi, &BoundaryField::zeros(8)).unwrap();
        assert!((&shifted - &n).max_abs_diff(&derivative) <= 1e-10 * n.max_abs().max(1.0));
    }
}

#[test]
fn same_mesh_data_are_consistent() {
    for level in [4, 8, 16] {
        let ctx = example_context(level).unwrap();
        let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD).unwrap();
        let n = ctx.neumann_map(&truth.source, &truth.flux).unwrap();
        let d = ctx.dirichlet_map(&truth.source, &truth.trace).unwrap();
        assert!(ctx.h1_norm(&(&n - &d)) <= 1e-8);
    }
}

#[test]
fn trace_matches_iff_maps_agree() {
    let ctx = example_context(8).unwrap();
    let mesh = ctx.mesh();
    let mut noise = NoiseSource::new(2, 0);
    let f = random_field(&ctx, &mut noise);
    let j = noise.boundary_noise(8);
    let n = ctx.neumann_map(&f, &j).unwrap();
    let g = mesh.trace(&n).unwrap();
    assert!(g.mean(mesh).unwrap().abs() < 1e-12);
    let g = g.recentered(mesh).unwrap();
    let d = ctx.dirichlet_map(&f, &g).unwrap();
    assert!(d.max_abs_diff(&n) <= 1e-9);

    let mut other = g.clone();
    other.axpy(1e-3, &noise.boundary_noise(8));
    let other = other.recentered(mesh).unwrap();
    let d = ctx.dirichlet_map(&f, &other).unwrap();
    assert!(d.max_abs_diff(&n) > 1e-6);
}

#[test]
fn t_is_self_adjoint_and_monotone() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(3, 0);
    for _ in 0..20 {
        let f = random_field(&ctx, &mut noise);
        let w = random_field(&ctx, &mut noise);
        let a = ctx.l2_inner(&ctx.t_op(&f).unwrap(), &w);
        let b = ctx.l2_inner(&f, &ctx.t_op(&w).unwrap());
        assert!((a - b).abs() <= 1e-9 * ctx.l2_norm(&f) * ctx.l2_norm(&w));
    }
    for _ in 0..50 {
        let xi = random_field(&ctx, &mut noise);
        assert!(ctx.l2_inner(&ctx.t_op(&xi).unwrap(), &xi) >= -1e-10);
    }
    assert_eq!(ctx.t_op(&NodalField::zeros(ctx.mesh())).unwrap().max_abs(), 0.0);
}

#[test]
fn neumann_map_is_lipschitz_in_the_data() {
    let ctx = example_context(8).unwrap();
    let mesh = ctx.mesh();
    let mut noise = NoiseSource::new(4, 0);
    let mut ratios = Vec::new();
    for _ in 0..50 {
        let (f1, f2) = (random_field(&ctx, &mut noise), random_field(&ctx, &mut noise));
        let (j1, j2) = (noise.boundary_noise(8), noise.boundary_noise(8));
        let du = &ctx.neumann_map(&f1, &j1).unwrap() - &ctx.neumann_map(&f2, &j2).unwrap();
        let data = ctx.l2_norm(&(&f1 - &f2)) + (&j1 - &j2).l2_norm(mesh).unwrap();
        ratios.push(ctx.h1_norm(&du) / data);
    }
    let fitted = ratios.iter().cloned().fold(0.0, f64::max);
    let mut sorted = ratios.clone();
    sorted.sort_by(f64::total_cmp);
    assert!(fitted <= 2.0 * sorted[25]);
    // fresh samples respect the fitted constant with a safety factor
    for _ in 0..20 {
        let (f1, f2) = (random_field(&ctx, &mut noise), random_field(&ctx, &mut noise));
        let (j1, j2) = (noise.boundary_noise(8), noise.boundary_noise(8));
        let du = &ctx.neumann_map(&f1, &j1).unwrap() - &ctx.neumann_map(&f2, &j2).unwrap();
        let data = ctx.l2_norm(&(&f1 - &f2)) + (&j1 - &j2).l2_norm(mesh).unwrap();
        assert!(ctx.h1_norm(&du) <= 2.0 * fitted * data);
    }
}

#[test]
fn coercivity_chain_with_fitted_constant() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(5, 0);
    let zero_mean = |ctx: &ForwardContext, noise: &mut NoiseSource| {
        let mut u = random_field(ctx, noise);
        let mean = ctx.boundary_integral(&u) / 8.0;
        u.values_mut().iter_mut().for_each(|v| *v -= mean);
        u
    };
    // C_Ω: smallest constant with ‖u‖² <= C_Ω |u|²_{H1} on the zero-boundary-mean samples
    let mut c_omega: f64 = 0.0;
    for _ in 0..200 {
        let u = zero_mean(&ctx, &mut noise);
        let n = ctx.norms(&u);
        c_omega = c_omega.max(n.l2 * n.l2 / (n.h1_semi * n.h1_semi));
    }
    let q_min = ctx.q_min();
    let q_max = ctx.diffusion().q_max();
    for _ in 0..100 {
        let u = zero_mean(&ctx, &mut noise);
        let n = ctx.norms(&u);
        let lower = c_omega * q_min / (1.0 + c_omega) * n.h1 * n.h1;
        let upper = 2.0 * q_max * n.h1 * n.h1;
        let e2 = n.energy * n.energy;
        assert!(lower <= e2 && e2 <= upper, "{lower} <= {e2} <= {upper}");
    }
}

#[test]
fn cost_examples() {
    let ctx = example_context(8).unwrap();
    let mesh = ctx.mesh();
    let zero_pair = CauchyPair::new(mesh, BoundaryField::zeros(8), BoundaryField::zeros(8)).unwrap();
    let prob = RegularizedProblem::new(&ctx, vec![zero_pair], 0.01, NodalField::zeros(mesh)).unwrap();
    let zero = NodalField::zeros(mesh);
    assert_eq!(prob.cost(&zero).unwrap(), 0.0);
    assert_eq!(prob.gradient(&zero).unwrap().max_abs(), 0.0);

    let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD).unwrap();
    let pair = CauchyPair::new(mesh, truth.flux.clone(), truth.trace.clone()).unwrap();
    let prob = RegularizedProblem::new(&ctx, vec![pair], 0.01, truth.source.clone()).unwrap();
    assert!(prob.cost(&truth.source).unwrap() <= 1e-14);
}

#[test]
fn cost_is_strictly_convex() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(6, 0);
    let pair = noisy_pair(&ctx, 0.05, &mut noise);
    let rho = 0.01;
    let prob = RegularizedProblem::new(&ctx, vec![pair], rho, NodalField::zeros(ctx.mesh())).unwrap();
    for _ in 0..10 {
        let f = random_field(&ctx, &mut noise);
        let g = random_field(&ctx, &mut noise);
        let mid = 0.5 * &(&f + &g);
        let d = ctx.l2_norm(&(&f - &g));
        let lhs = prob.cost(&mid).unwrap();
        let rhs = 0.5 * (prob.cost(&f).unwrap() + prob.cost(&g).unwrap()) - rho / 4.0 * d * d + 1e-10;
        assert!(lhs < rhs);
    }
}

#[test]
fn cost_via_decomposition_matches_definition() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(7, 0);
    let pairs = vec![noisy_pair(&ctx, 0.05, &mut noise), noisy_pair(&ctx, 0.1, &mut noise)];
    let prob = RegularizedProblem::new(&ctx, pairs.clone(), 0.02, random_field(&ctx, &mut noise)).unwrap();
    let f = random_field(&ctx, &mut noise);
    let mut direct = 0.0;
    let mut grad = NodalField::zeros(ctx.mesh());
    for p in &pairs {
        let e = &ctx.neumann_map(&f, &p.flux).unwrap() - &ctx.dirichlet_map(&f, &p.trace).unwrap();
        direct += ctx.energy_sq(&e) / 2.0;
        grad.axpy(1.0, &e);
        assert!(e.max_abs_diff(&prob.misfit(&f, pairs.iter().position(|q| q == p).unwrap()).unwrap()) < 1e-12);
    }
    let reg = &f - prob.f_star();
    direct += 0.02 * ctx.l2_norm(&reg).powi(2);
    grad.axpy(0.02 * 2.0, &reg);
    let eval = prob.evaluate(&f).unwrap();
    assert!((eval.cost - direct).abs() <= 1e-12 * direct);
    assert!(eval.gradient.max_abs_diff(&grad) <= 1e-11 * grad.max_abs());
}

#[test]
fn gradient_matches_central_differences() {
    let ctx = example_context(4).unwrap();
    let mut noise = NoiseSource::new(8, 0);
    let pair = noisy_pair(&ctx, 0.05, &mut noise);
    let prob = RegularizedProblem::new(&ctx, vec![pair], parameter_schedule(4).unwrap().rho, NodalField::zeros(ctx.mesh()))
        .unwrap();
    let f = random_field(&ctx, &mut noise);
    let grad = prob.gradient(&f).unwrap();
    let step = 1e-4;
    for _ in 0..5 {
        let xi = random_field(&ctx, &mut noise);
        let plus = prob.cost(&(&f + &(step * &xi))).unwrap();
        let minus = prob.cost(&(&f - &(step * &xi))).unwrap();
        let fd = (plus - minus) / (2.0 * step);
        let analytic = ctx.l2_inner(&grad, &xi);
        assert!((fd - analytic).abs() <= 1e-5 * analytic.abs());
    }
}

#[test]
fn gradient_vanishes_at_lavrentiev_solution() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(9, 0);
    let pair = noisy_pair(&ctx, 0.05, &mut noise);
    let prob = RegularizedProblem::new(&ctx, vec![pair], parameter_schedule(8).unwrap().rho, NodalField::zeros(ctx.mesh()))
        .unwrap();
    let f = lavrentiev_solve(&prob, &LavrentievOptions { rel_tol: 1e-13, max_iter: None }).unwrap();
    let g = prob.gradient(&f).unwrap();
    assert!(ctx.l2_norm(&g) <= 1e-8 * (1.0 + ctx.l2_norm(&f)));
    assert!(prob.fixed_point_residual(&f).unwrap() <= 1e-8);
    let dense = lavrentiev_solve_dense(&prob).unwrap();
    assert!(ctx.l2_norm(&(&dense - &f)) <= 1e-8);
}

#[test]
fn zero_data_lavrentiev_solution_is_zero() {
    let ctx = example_context(4).unwrap();
    let mesh = ctx.mesh();
    let pair = CauchyPair::new(mesh, BoundaryField::zeros(4), BoundaryField::zeros(4)).unwrap();
    let prob = RegularizedProblem::new(&ctx, vec![pair], 0.01, NodalField::zeros(mesh)).unwrap();
    assert_eq!(lavrentiev_solve(&prob, &LavrentievOptions::default()).unwrap().max_abs(), 0.0);
    let state = cg_minimize(&prob, &NodalField::zeros(mesh), &tight()).unwrap();
    assert_eq!(state.k, 0);
    assert_eq!(state.f.max_abs(), 0.0);
}

#[test]
fn cg_decreases_cost_monotonically() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(10, 0);
    let pair = noisy_pair(&ctx, parameter_schedule(8).unwrap().theta, &mut noise);
    let prob = RegularizedProblem::new(&ctx, vec![pair], parameter_schedule(8).unwrap().rho, NodalField::zeros(ctx.mesh()))
        .unwrap();
    let f0 = ctx.mesh().interpolate(cauchy_source::experiments::initial_guess);
    let state = cg_minimize(&prob, &f0, &tight()).unwrap();
    assert!(state.converged());
    for w in state.history.windows(2) {
        assert!(w[1].cost <= w[0].cost + 1e-12, "{} -> {}", w[0].cost, w[1].cost);
        assert!(w[0].step.unwrap() > 0.0);
    }
    assert_eq!(state.history.len(), state.k + 1);
    assert!(state.history[0].beta.is_none());
    // tolerance bookkeeping
    let last = state.history.last().unwrap();
    assert_eq!(last.tolerance, state.tolerance);
    assert!((last.tolerance - (last.grad_norm - 1e-12)).abs() < 1e-15);
}

#[test]
fn larger_rho_pulls_towards_prior() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(11, 0);
    let pair = noisy_pair(&ctx, 0.02, &mut noise);
    let f_star = random_field(&ctx, &mut noise);
    let mut distances = Vec::new();
    for rho in [0.005, 0.01, 0.02] {
        let prob = RegularizedProblem::new(&ctx, vec![pair.clone()], rho, f_star.clone()).unwrap();
        let f = lavrentiev_solve(&prob, &LavrentievOptions::default()).unwrap();
        distances.push(ctx.l2_norm(&(&f - &f_star)));
    }
    assert!(distances[1] < distances[0] && distances[2] < distances[1]);
}

#[test]
fn tikhonov_equals_lavrentiev() {
    for level in [4, 8] {
        let ctx = example_context(level).unwrap();
        let mut noise = NoiseSource::new(12, level as u64);
        let sched = parameter_schedule(level).unwrap();
        let pair = noisy_pair(&ctx, sched.theta, &mut noise);
        let prob = RegularizedProblem::new(&ctx, vec![pair], sched.rho, NodalField::zeros(ctx.mesh())).unwrap();
        let lav = lavrentiev_solve(&prob, &LavrentievOptions { rel_tol: 1e-13, max_iter: None }).unwrap();
        let cg = cg_minimize(&prob, &ctx.mesh().interpolate(cauchy_source::experiments::initial_guess), &tight()).unwrap();
        assert!(ctx.l2_norm(&(&cg.f - &lav)) <= 1e-6);
    }
}

#[test]
fn identical_copies_do_not_change_the_minimizer() {
    let ctx = example_context(8).unwrap();
    let mut noise = NoiseSource::new(13, 0);
    let pair = noisy_pair(&ctx, 0.05, &mut noise);
    let rho = parameter_schedule(8).unwrap().rho;
    let single = RegularizedProblem::new(&ctx, vec![pair.clone()], rho, NodalField::zeros(ctx.mesh())).unwrap();
    let copies = RegularizedProblem::new(&ctx, vec![pair; 6], rho, NodalField::zeros(ctx.mesh())).unwrap();
    let opts = LavrentievOptions { rel_tol: 1e-13, max_iter: None };
    let a = lavrentiev_solve(&single, &opts).unwrap();
    let b = lavrentiev_solve(&copies, &opts).unwrap();
    assert!(ctx.l2_norm(&(&a - &b)) <= 1e-10);
    let f = random_field(&ctx, &mut noise);
    assert!((single.cost(&f).unwrap() - copies.cost(&f).unwrap()).abs() <= 1e-12 * single.cost(&f).unwrap());
}

#[test]
fn schedule_values() {
    let s = parameter_schedule(4).unwrap();
    assert!((s.rho - 0.7071e-2).abs() < 1e-6);
    assert!((s.theta - 5.946e-2).abs() < 1e-5);
    let s = parameter_schedule(64).unwrap();
    assert!((s.rho - 0.4419e-3).abs() < 1e-7);
}

#[test]
fn euclidean_and_mass_inner_products_differ() {
    // guards against accidentally using coefficient dot products for (·,·)
    let ctx = example_context(4).unwrap();
    let one = NodalField::constant(ctx.mesh(), 1.0);
    assert!((ctx.l2_inner(&one, &one) - 4.0).abs() < 1e-12);
    assert_eq!(dot(&one, &one), 25.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn t_properties_hold_for_any_seed(seed in any::<u64>()) {
        let ctx = example_context(4).unwrap();
        let mut noise = NoiseSource::new(seed, 0);
        let f = random_field(&ctx, &mut noise);
        let w = random_field(&ctx, &mut noise);
        let tf = ctx.t_op(&f).unwrap();
        let a = ctx.l2_inner(&tf, &w);
        let b = ctx.l2_inner(&f, &ctx.t_op(&w).unwrap());
        prop_assert!((a - b).abs() <= 1e-9 * ctx.l2_norm(&f) * ctx.l2_norm(&w));
        prop_assert!(ctx.l2_inner(&tf, &f) >= -1e-10);
    }

    #[test]
    fn cg_step_minimizes_along_direction(seed in any::<u64>(), scale in 0.5f64..1.5) {
        let ctx = example_context(4).unwrap();
        let mut noise = NoiseSource::new(seed, 1);
        let pair = noisy_pair(&ctx, 0.05, &mut noise);
        let prob = RegularizedProblem::new(&ctx, vec![pair], 0.01, NodalField::zeros(ctx.mesh())).unwrap();
        let f0 = random_field(&ctx, &mut noise);
        let opts = CgOptions { max_iter: 1, tau1: 0.0, tau2: 0.0 };
        let state = cg_minimize(&prob, &f0, &opts).unwrap();
        let t = state.history[0].step.unwrap();
        let g0 = prob.gradient(&f0).unwrap();
        let off = &f0 - &((scale * t) * &g0);
        prop_assert!(prob.cost(&state.f).unwrap() <= prob.cost(&off).unwrap() + 1e-12);
    }
}
