//! Acceptance criteria with pinned tolerances and runtime limits.

use std::time::{Duration, Instant};

use cauchy_source::experiments::{
    add_noise, example_context, initial_guess, make_truth_data, rate_study, run_multi, run_sweep,
    same_mesh_truth, sweep_eoc, FluxCoefficients, MultiConfig, NoiseSource, RateConfig,
    SweepConfig,
};
use cauchy_source::regularization::{
    cg_minimize, lavrentiev_solve, parameter_schedule, CgOptions, LavrentievOptions,
    RegularizedProblem,
};
use cauchy_source::selftest::{manufactured_eoc, patch_test_error};
use cauchy_source::{ForwardContext, NodalField, Result};

pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

fn random_field(ctx: &ForwardContext, noise: &mut NoiseSource) -> NodalField {
    let values = (0..ctx.mesh().num_vertices())
        .map(|_| noise.uniform_pm1())
        .collect();
    NodalField::new(ctx.level(), values).unwrap()
}

fn within(limit: Duration, elapsed: Duration) -> bool {
    elapsed < limit
}

fn patch_tests() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for level in [2, 4, 8] {
        worst = worst.max(patch_test_error(level)?);
    }
    Ok(Outcome {
        passed: worst <= 1e-9,
        detail: format!("max nodal error {worst:.2e} (limit 1e-9)"),
    })
}

fn adjointness() -> Result<Outcome> {
    let ctx = example_context(8)?;
    let mut noise = NoiseSource::new(2024, 0);
    let (mut adj, mut mono): (f64, f64) = (0.0, f64::INFINITY);
    for _ in 0..20 {
        let f = random_field(&ctx, &mut noise);
        let w = random_field(&ctx, &mut noise);
        let tf = ctx.t_op(&f)?;
        let lhs = ctx.l2_inner(&tf, &w);
        let rhs = ctx.l2_inner(&f, &ctx.t_op(&w)?);
        adj = adj.max((lhs - rhs).abs() / (ctx.l2_norm(&f) * ctx.l2_norm(&w)));
        mono = mono.min(ctx.l2_inner(&tf, &f));
    }
    Ok(Outcome {
        passed: adj <= 1e-9 && mono >= -1e-10,
        detail: format!(
            "max adjointness defect {adj:.2e} (limit 1e-9), min (Tξ,ξ) {mono:.2e} (limit -1e-10)"
        ),
    })
}

fn noisy_problem(ctx: &ForwardContext, theta: f64, seed: u64) -> Result<RegularizedProblem<'_>> {
    let truth = same_mesh_truth(ctx, FluxCoefficients::STANDARD)?;
    let (pair, _) = add_noise(ctx.mesh(), &truth, theta, &mut NoiseSource::new(seed, 0))?;
    RegularizedProblem::new(
        ctx,
        vec![pair],
        parameter_schedule(ctx.level())?.rho,
        NodalField::zeros(ctx.mesh()),
    )
}

fn gradient_check() -> Result<Outcome> {
    let ctx = example_context(4)?;
    let prob = noisy_problem(&ctx, 0.05, 3)?;
    let mut noise = NoiseSource::new(4, 0);
    let f = random_field(&ctx, &mut noise);
    let grad = prob.gradient(&f)?;
    let step = 1e-4;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let xi = random_field(&ctx, &mut noise);
        let mut fp = f.clone();
        fp.axpy(step, &xi);
        let mut fm = f.clone();
        fm.axpy(-step, &xi);
        let fd = (prob.cost(&fp)? - prob.cost(&fm)?) / (2.0 * step);
        let analytic = ctx.l2_inner(&grad, &xi);
        worst = worst.max((fd - analytic).abs() / analytic.abs());
    }
    Ok(Outcome {
        passed: worst <= 1e-5,
        detail: format!("max relative deviation {worst:.2e} (limit 1e-5)"),
    })
}

fn cg_vs_lavrentiev() -> Result<Outcome> {
    let level = 8;
    let ctx = example_context(level)?;
    let truth = make_truth_data(128, &[level], FluxCoefficients::STANDARD)?.remove(0);
    let sched = parameter_schedule(level)?;
    let mut noise = NoiseSource::new(42, (level as u64) << 32);
    let (pair, _) = add_noise(ctx.mesh(), &truth, sched.theta, &mut noise)?;
    let prob = RegularizedProblem::new(&ctx, vec![pair], sched.rho, NodalField::zeros(ctx.mesh()))?;
    let opts = CgOptions {
        max_iter: 5000,
        tau1: 1e-12,
        tau2: 0.0,
    };
    let state = cg_minimize(&prob, &ctx.mesh().interpolate(initial_guess), &opts)?;
    let lav = lavrentiev_solve(
        &prob,
        &LavrentievOptions {
            rel_tol: 1e-13,
            max_iter: None,
        },
    )?;
    let diff = ctx.l2_norm(&(&state.f - &lav));
    let residual = prob.fixed_point_residual(&lav)?;
    Ok(Outcome {
        passed: diff <= 1e-6 && residual <= 1e-8,
        detail: format!(
            "|Δf| {diff:.2e} (limit 1e-6), fixed-point residual {residual:.2e} (limit 1e-8), {} CG iterations",
            state.k
        ),
    })
}

fn manufactured() -> Result<Outcome> {
    let (l2, h1) = manufactured_eoc(&[4, 8, 16, 32])?;
    Ok(Outcome {
        passed: (1.8..=2.2).contains(&l2) && (0.9..=1.1).contains(&h1),
        detail: format!("L2 EOC {l2:.4} in [1.8,2.2], H1 EOC {h1:.4} in [0.9,1.1]"),
    })
}

struct SweepSummary {
    outcome: Outcome,
    h1_n_finest: f64,
}

fn sweep() -> Result<SweepSummary> {
    let out = run_sweep(&SweepConfig::default())?;
    if let Some((level, e)) = &out.failure {
        return Ok(SweepSummary {
            outcome: Outcome {
                passed: false,
                detail: format!("sweep failed on level {level}: {e}"),
            },
            h1_n_finest: f64::NAN,
        });
    }
    let records = out.records();
    let converged = records
        .iter()
        .all(|r| r.tolerance <= 0.0 && r.iterations <= 600);
    let decreasing = records.windows(2).all(|w| w[1].l2_f < w[0].l2_f);
    let eoc = sweep_eoc(&records)?;
    let (f, n, hn) = (eoc[0].mean, eoc[1].mean, eoc[3].mean);
    let bands = [
        (0.5..=1.2).contains(&f),
        (1.3..=2.3).contains(&n),
        (0.7..=1.4).contains(&hn),
    ];
    let iters: Vec<String> = records.iter().map(|r| r.iterations.to_string()).collect();
    let l2f: Vec<String> = records.iter().map(|r| format!("{:.3}", r.l2_f)).collect();
    let mark = |ok: bool| if ok { "ok" } else { "out of band" };
    Ok(SweepSummary {
        outcome: Outcome {
            passed: converged && decreasing && bands.iter().all(|&b| b),
            detail: format!(
                "iterations [{}] converged={converged}; L2_f [{}] strictly decreasing={decreasing}; \
                 mean EOC L2_f {f:.3} in [0.5,1.2] {}, L2_N {n:.3} in [1.3,2.3] {}, H1_N {hn:.3} in [0.7,1.4] {}",
                iters.join(","),
                l2f.join(","),
                mark(bands[0]),
                mark(bands[1]),
                mark(bands[2]),
            ),
        },
        h1_n_finest: records.last().map_or(f64::NAN, |r| r.h1_n),
    })
}

struct MultiSummary {
    outcome: Outcome,
    delta_bar: Vec<f64>,
}

fn multi() -> Result<MultiSummary> {
    let cfg = MultiConfig::default();
    let out = run_multi(&cfg)?;
    let err: Vec<f64> = out.iter().map(|o| o.record.l2_f).collect();
    let sizes: Vec<usize> = out.iter().map(|o| o.record.measurements).collect();
    if sizes != [1, 6, 16] {
        return Ok(MultiSummary {
            outcome: Outcome {
                passed: false,
                detail: format!("unexpected families {sizes:?}"),
            },
            delta_bar: Vec::new(),
        });
    }
    let ordered = err[2] < err[1] && err[1] < err[0];
    let band = (0.15..=0.6).contains(&err[0]);
    Ok(MultiSummary {
        outcome: Outcome {
            passed: ordered && band,
            detail: format!(
                "L2_f(1) {:.4}, L2_f(6) {:.4}, L2_f(16) {:.4}; ordered={ordered}; L2_f(1) in [0.15,0.6]={band}",
                err[0], err[1], err[2]
            ),
        },
        delta_bar: out.iter().map(|o| o.record.delta_bar).collect(),
    })
}

fn rates() -> Result<Outcome> {
    let out = rate_study(&RateConfig::default())?;
    let errors: Vec<String> = out
        .points
        .iter()
        .map(|p| format!("{:.3e}", p.error))
        .collect();
    Ok(Outcome {
        passed: (0.3..=0.7).contains(&out.slope),
        detail: format!(
            "slope {:.4} in [0.3,0.7]; errors [{}]; slope of the noise-induced part {:.4}",
            out.slope,
            errors.join(","),
            out.noise_slope
        ),
    })
}

pub struct Verdict {
    pub label: String,
    pub passed: bool,
    pub line: String,
}

fn report(label: &str, limit: Duration, run: impl FnOnce() -> Result<Outcome>) -> Verdict {
    let start = Instant::now();
    let result = run();
    let elapsed = start.elapsed();
    let (passed, detail) = match result {
        Ok(o) => (o.passed && within(limit, elapsed), o.detail),
        Err(e) => (false, format!("error: {e}")),
    };
    let line = format!(
        "{} {label}: {detail}; runtime {:.2} s (limit {} s)",
        if passed { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    Verdict {
        label: label.to_string(),
        passed,
        line,
    }
}

/// Runs every criterion in order; the reference-band checks come last.
pub fn run_all() -> Vec<Verdict> {
    let secs = Duration::from_secs;
    let mut out = Vec::new();
    out.push(report(
        "criterion 1 (patch tests, Q = I)",
        secs(1),
        patch_tests,
    ));
    out.push(report(
        "criterion 2 (T self-adjoint and monotone)",
        secs(5),
        adjointness,
    ));
    out.push(report(
        "criterion 3 (gradient vs central differences)",
        secs(5),
        gradient_check,
    ));
    out.push(report(
        "criterion 4 (CG minimizer equals Lavrentiev solution)",
        secs(60),
        cg_vs_lavrentiev,
    ));
    out.push(report(
        "criterion 5 (manufactured Dirichlet solution)",
        secs(30),
        manufactured,
    ));

    let mut h1_n_finest = f64::NAN;
    out.push(report("criterion 6 (refinement sweep)", secs(900), || {
        sweep().map(|s| {
            h1_n_finest = s.h1_n_finest;
            s.outcome
        })
    }));
    let mut delta_bar = Vec::new();
    out.push(report(
        "criterion 7 (multiple measurements)",
        secs(900),
        || {
            multi().map(|s| {
                delta_bar = s.delta_bar;
                s.outcome
            })
        },
    ));
    out.push(report("criterion 8 (a-priori rate)", secs(900), rates));

    out.push(report(
        "reference band: H1_N on level 64 near 4e-3 (factor 3)",
        secs(1),
        || {
            Ok(Outcome {
                passed: h1_n_finest >= 4e-3 / 3.0 && h1_n_finest <= 4e-3 * 3.0,
                detail: format!("measured {h1_n_finest:.3e}"),
            })
        },
    ));
    out.push(report(
        "reference band: mean noise level near 0.33 (factor 2)",
        secs(1),
        || {
            let ok = !delta_bar.is_empty()
                && delta_bar
                    .iter()
                    .all(|&d| (0.33 / 2.0..=0.33 * 2.0).contains(&d));
            let shown: Vec<String> = delta_bar.iter().map(|d| format!("{d:.4}")).collect();
            Ok(Outcome {
                passed: ok,
                detail: format!("measured [{}]", shown.join(",")),
            })
        },
    ));

    out
}
