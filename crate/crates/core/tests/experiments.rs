use cauchy_source::experiments::{
    add_noise, eoc, exact_source, example_context, log_log_slope, make_truth_data, measurement_family, run_sweep,
    run_sweep_with_truth, same_mesh_truth, sweep_eoc, FluxCoefficients, NoiseSource, SweepConfig, ThetaMode,
};
use cauchy_source::selftest::{run_selftest, SelftestOptions};
use cauchy_source::TriMesh;
use proptest::prelude::*;

fn small_sweep(theta: ThetaMode) -> SweepConfig {
    SweepConfig {
        levels: vec![4, 8, 16],
        fine_level: 32,
        theta,
        ..SweepConfig::default()
    }
}

#[test]
fn truth_data_examples() {
    let truths = make_truth_data(16, &[4, 8, 16], FluxCoefficients::STANDARD).unwrap();
    for t in &truths {
        let mesh = TriMesh::uniform(t.level).unwrap();
        assert!(t.flux.integral(&mesh).unwrap().abs() < 1e-12);
        assert!(t.trace.mean(&mesh).unwrap().abs() < 1e-12);
    }
    assert_eq!(exact_source([-0.5, 0.5]), 2.0);
    let mesh = TriMesh::uniform(4).unwrap();
    // node (-0.5, 0.5) is i = 1, j = 3 on level 4
    assert_eq!(truths[0].source.values()[3 * 5 + 1], 2.0);
    assert_eq!(mesh.vertices()[3 * 5 + 1], [-0.5, 0.5]);
}

#[test]
fn fine_data_restrict_consistently() {
    // the level-16 trace restricted from level 32 agrees at shared nodes with the level-32 one
    let truths = make_truth_data(32, &[16, 32], FluxCoefficients::STANDARD).unwrap();
    let coarse = truths[0].trace.nodal();
    let fine = truths[1].trace.nodal();
    let shift = truths[1].trace.mean(&TriMesh::uniform(32).unwrap()).unwrap()
        - truths[0].trace.mean(&TriMesh::uniform(16).unwrap()).unwrap();
    let offset = fine[0] - coarse[0];
    for (k, &c) in coarse.iter().enumerate() {
        assert!((fine[2 * k] - c - offset).abs() < 1e-12, "slot {k}");
    }
    assert!(shift.abs() < 1e-12);
}

#[test]
fn noise_free_data_give_zero_delta() {
    let ctx = example_context(8).unwrap();
    let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD).unwrap();
    let (pair, delta) = add_noise(ctx.mesh(), &truth, 0.0, &mut NoiseSource::new(1, 0)).unwrap();
    assert_eq!(delta, 0.0);
    assert_eq!(pair.flux, truth.flux);
    assert!(add_noise(ctx.mesh(), &truth, -1.0, &mut NoiseSource::new(1, 0)).is_err());
}

/// Consistent boundary mass of the P1 trace space, assembled edge by edge.
fn boundary_mass(level: usize) -> Vec<Vec<f64>> {
    let n = 4 * level;
    let h = 2.0 / level as f64;
    let mut m = vec![vec![0.0; n]; n];
    for e in 0..n {
        let (a, b) = (e, (e + 1) % n);
        m[a][a] += h / 3.0;
        m[b][b] += h / 3.0;
        m[a][b] += h / 6.0;
        m[b][a] += h / 6.0;
    }
    m
}

#[test]
fn expected_noise_level_matches_monte_carlo() {
    // For iid uniform(-1, 1) nodal noise R: E‖R‖² = tr(M)/3, and recentering
    // removes (1ᵀM R)²/(1ᵀM 1) whose expectation is ‖M 1‖²/(3 · 1ᵀM 1).
    let level = 16;
    let m = boundary_mass(level);
    let trace: f64 = (0..m.len()).map(|i| m[i][i]).sum();
    let row_sums: Vec<f64> = m.iter().map(|r| r.iter().sum()).collect();
    let total: f64 = row_sums.iter().sum();
    let flux_sq = trace / 3.0;
    let trace_sq = flux_sq - row_sums.iter().map(|s| s * s).sum::<f64>() / (3.0 * total);
    let oracle = flux_sq.sqrt() + trace_sq.sqrt();

    let ctx = example_context(level).unwrap();
    let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD).unwrap();
    let theta = 0.1;
    let mut sum = 0.0;
    for seed in 0..200 {
        let (_, delta) = add_noise(ctx.mesh(), &truth, theta, &mut NoiseSource::new(seed, 0)).unwrap();
        assert!(theta < delta && delta < 8.0 * theta);
        sum += delta / theta;
    }
    let mean = sum / 200.0;
    assert!((mean - oracle).abs() <= 0.03 * oracle, "mean {mean} vs {oracle}");
}

#[test]
fn noise_streams_are_reproducible_and_distinct() {
    let a: Vec<f64> = {
        let mut n = NoiseSource::new(42, 4 << 32);
        (0..10).map(|_| n.uniform_pm1()).collect()
    };
    let b: Vec<f64> = {
        let mut n = NoiseSource::new(42, 4 << 32);
        (0..10).map(|_| n.uniform_pm1()).collect()
    };
    let c: Vec<f64> = {
        let mut n = NoiseSource::new(42, 8 << 32);
        (0..10).map(|_| n.uniform_pm1()).collect()
    };
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert!(a.iter().all(|v| v.abs() < 1.0));
}

#[test]
fn sweep_is_deterministic() {
    let cfg = small_sweep(ThetaMode::Scheduled);
    let a = run_sweep(&cfg).unwrap();
    let b = run_sweep(&cfg).unwrap();
    assert!(a.failure.is_none());
    assert_eq!(a.records(), b.records());
    for (x, y) in a.levels.iter().zip(&b.levels) {
        assert_eq!(x.fields.source, y.fields.source);
    }
}

#[test]
fn sweep_levels_converge() {
    let out = run_sweep(&small_sweep(ThetaMode::Scheduled)).unwrap();
    let records = out.records();
    for r in &records {
        assert!(r.tolerance <= 0.0 && r.iterations <= 600, "level {}", r.level);
        assert_eq!(out.levels.iter().find(|l| l.record.level == r.level).unwrap().history.len(), r.iterations + 1);
    }
    assert!(records.windows(2).all(|w| w[1].l2_f < w[0].l2_f));
    assert_eq!(sweep_eoc(&records).unwrap()[0].steps.len(), 2);
}

#[test]
fn inverse_crime_is_distinguishable() {
    let cfg = small_sweep(ThetaMode::Scheduled);
    let honest = run_sweep(&cfg).unwrap().records();
    let crime = run_sweep_with_truth(&cfg, |_, ctx| same_mesh_truth(ctx, FluxCoefficients::STANDARD)).records();
    for (a, b) in honest.iter().zip(&crime) {
        assert!((a.l2_f - b.l2_f).abs() > 1e-3 * a.l2_f, "level {}", a.level);
    }
}

#[test]
fn noise_free_sweep_is_more_accurate() {
    let noisy = run_sweep(&small_sweep(ThetaMode::Scheduled)).unwrap().records();
    let clean = run_sweep(&small_sweep(ThetaMode::Fixed(0.0))).unwrap().records();
    for (n, c) in noisy.iter().zip(&clean) {
        assert_eq!(c.delta, 0.0);
        assert!(c.l2_f < n.l2_f, "level {}: {} vs {}", n.level, c.l2_f, n.l2_f);
    }
}

#[test]
fn invalid_levels_are_named() {
    let cfg = SweepConfig {
        levels: vec![4, 12],
        ..SweepConfig::default()
    };
    let err = run_sweep(&cfg).unwrap_err().to_string();
    assert!(err.contains("12"), "{err}");
}

#[test]
fn eoc_examples() {
    let e = eoc(&[0.5215, 0.3309], &[0.5, 0.25]).unwrap();
    assert!((e.steps[0] - 0.6563).abs() < 1e-4);
    let e = eoc(&[0.3, 0.3, 0.3], &[0.5, 0.25, 0.125]).unwrap();
    assert_eq!(e.mean, 0.0);
    let e = eoc(&[4.0 * std::f64::consts::E, std::f64::consts::E], &[0.5, 0.25]).unwrap();
    assert!((e.mean - 2.0).abs() < 1e-14);
    assert!(eoc(&[1.0], &[0.5]).is_err());
    assert!(eoc(&[1.0, 0.0], &[0.5, 0.25]).is_err());
}

#[test]
fn measurement_families() {
    assert_eq!(measurement_family(1).unwrap(), vec![FluxCoefficients::STANDARD]);
    for size in [6, 16] {
        let fam = measurement_family(size).unwrap();
        assert_eq!(fam.len(), size);
        for (i, a) in fam.iter().enumerate() {
            let mut sorted = a.0;
            sorted.sort_by(f64::total_cmp);
            assert_eq!(sorted, [1.0, 2.0, 3.0, 4.0]);
            assert!(fam[i + 1..].iter().all(|b| b != a));
        }
    }
    assert!(measurement_family(30).is_err());
}

#[test]
fn selftest_passes_for_several_seeds() {
    for seed in [1, 7, 9] {
        let results = run_selftest(&SelftestOptions {
            seed,
            ..SelftestOptions::default()
        });
        for r in &results {
            assert!(r.passed, "seed {seed}: {} ({})", r.name, r.detail);
        }
    }
}

#[test]
fn selftest_detects_indefinite_diffusion() {
    let results = run_selftest(&SelftestOptions {
        corrupt_diffusion: true,
        ..SelftestOptions::default()
    });
    assert!(results.iter().any(|r| !r.passed));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn eoc_recovers_power_laws(p in 0.1f64..3.0, c in 0.01f64..10.0) {
        let hs = [0.5, 0.25, 0.125, 0.0625];
        let errors: Vec<f64> = hs.iter().map(|h: &f64| c * h.powf(p)).collect();
        let e = eoc(&errors, &hs).unwrap();
        prop_assert!((e.mean - p).abs() < 1e-10);
        prop_assert!((log_log_slope(&hs, &errors) - p).abs() < 1e-10);
    }

    #[test]
    fn noise_scales_linearly(theta in 0.0f64..1.0, seed in any::<u64>()) {
        let ctx = example_context(4).unwrap();
        let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD).unwrap();
        let (_, d1) = add_noise(ctx.mesh(), &truth, theta, &mut NoiseSource::new(seed, 0)).unwrap();
        let (_, d2) = add_noise(ctx.mesh(), &truth, 2.0 * theta, &mut NoiseSource::new(seed, 0)).unwrap();
        prop_assert!((d2 - 2.0 * d1).abs() <= 1e-12 * (1.0 + d2));
    }
}
