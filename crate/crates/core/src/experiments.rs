//! Synthetic reconstruction experiments on the square with discontinuous
//! diffusion and source: data generation on a fine grid, noise injection,
//! warm-started refinement sweeps, multi-measurement runs, convergence
//! orders and the a-priori rate trend.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::assembly::{DiffusionField, SymTensor};
use crate::error::{Error, Result};
use crate::forward::{CauchyPair, ForwardContext};
use crate::mesh::{prolong_nodal, restrict_boundary, BoundaryField, MeanPolicy, NodalField, Side, TriMesh};
use crate::regularization::{
    cg_minimize, lavrentiev_solve, lavrentiev_solve_dense, parameter_schedule_with, CgOptions, CgRecord,
    LavrentievOptions, RegularizedProblem,
};

/// `5π / (7π - 192)`, the source value outside the two inclusions.
pub fn background_source() -> f64 {
    5.0 * std::f64::consts::PI / (7.0 * std::f64::consts::PI - 192.0)
}

/// Known diffusion tensor: `q11 = 3` on the square `|x1|,|x2| <= 1/2` (else 1),
/// `q12 = 1` on the diamond `|x1| + |x2| <= 1/2` (else 0),
/// `q22 = 4` on the disk `x1² + x2² <= 1/4` (else 2).
pub fn diffusion_tensor(x: [f64; 2]) -> SymTensor {
    let in_square = x[0].abs() <= 0.5 && x[1].abs() <= 0.5;
    let in_diamond = x[0].abs() + x[1].abs() <= 0.5;
    let in_disk = x[0] * x[0] + x[1] * x[1] <= 0.25;
    SymTensor::new(
        if in_square { 3.0 } else { 1.0 },
        if in_diamond { 1.0 } else { 0.0 },
        if in_disk { 4.0 } else { 2.0 },
    )
}

/// Exact source: 2 on the ellipse `9(x1+1/2)² + 16(x2-1/2)² <= 1`, -1 on the
/// disk `(x1-1/2)² + (x2+1/2)² <= 1/16`, [`background_source`] elsewhere.
pub fn exact_source(x: [f64; 2]) -> f64 {
    if 9.0 * (x[0] + 0.5).powi(2) + 16.0 * (x[1] - 0.5).powi(2) <= 1.0 {
        2.0
    } else if (x[0] - 0.5).powi(2) + (x[1] + 0.5).powi(2) <= 1.0 / 16.0 {
        -1.0
    } else {
        background_source()
    }
}

/// Starting guess `+1` on `x1 > 0`, `-1` on `x1 <= 0`.
pub fn initial_guess(x: [f64; 2]) -> f64 {
    if x[0] > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Coefficients `(A, B, C, D)` of the piecewise constant boundary flux.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FluxCoefficients(pub [f64; 4]);

impl FluxCoefficients {
    pub const STANDARD: FluxCoefficients = FluxCoefficients([1.0, 2.0, 3.0, 4.0]);

    /// Flux values `(value on s <= 0, value on s > 0)` along a side, where `s`
    /// is `x1` on the bottom/top sides and `x2` on the left/right sides.
    fn side_values(&self, side: Side) -> (f64, f64) {
        let [a, b, c, d] = self.0;
        match side {
            Side::Bottom => (-b, a),
            Side::Top => (-a, b),
            Side::Left => (c, -d),
            Side::Right => (d, -c),
        }
    }

    /// Exact average of the flux over every boundary edge.
    pub fn edge_flux(&self, mesh: &TriMesh) -> BoundaryField {
        let values = mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let (p, q) = (mesh.vertices()[e.start], mesh.vertices()[e.end]);
                let axis = match e.side {
                    Side::Bottom | Side::Top => 0,
                    Side::Left | Side::Right => 1,
                };
                let (s0, s1) = if p[axis] <= q[axis] {
                    (p[axis], q[axis])
                } else {
                    (q[axis], p[axis])
                };
                let (neg, pos) = self.side_values(e.side);
                let frac_neg = ((0.0f64).clamp(s0, s1) - s0) / (s1 - s0);
                frac_neg * neg + (1.0 - frac_neg) * pos
            })
            .collect();
        BoundaryField::from_edges(mesh.level(), values)
    }
}

/// Forward context with the experiment's diffusion on a uniform mesh.
pub fn example_context(level: usize) -> Result<ForwardContext> {
    let mesh = TriMesh::uniform(level)?;
    let q = DiffusionField::from_fn(&mesh, diffusion_tensor)?;
    ForwardContext::new(mesh, q)
}

/// Exact data on one computational level.
#[derive(Debug, Clone)]
pub struct TruthData {
    pub level: usize,
    pub source: NodalField,
    pub flux: BoundaryField,
    pub trace: BoundaryField,
}

/// Generates Dirichlet traces on the fine data grid.
pub struct FineGrid {
    ctx: ForwardContext,
    source: NodalField,
}

impl FineGrid {
    pub fn new(level: usize) -> Result<Self> {
        let ctx = example_context(level)?;
        let source = ctx.mesh().interpolate(exact_source);
        Ok(Self { ctx, source })
    }

    pub fn level(&self) -> usize {
        self.ctx.level()
    }

    /// Zero-mean trace of `N_{f†} j†` on the fine grid.
    pub fn trace(&self, flux: FluxCoefficients) -> Result<BoundaryField> {
        let j = flux.edge_flux(self.ctx.mesh());
        let u = self.ctx.neumann_map(&self.source, &j)?;
        self.ctx.mesh().trace(&u)?.recentered(self.ctx.mesh())
    }

    /// Exact data on `mesh`: interpolated source, per-edge flux and the fine
    /// trace sampled at the coarse boundary nodes.
    pub fn truth_on(&self, mesh: &TriMesh, flux: FluxCoefficients, fine_trace: &BoundaryField) -> Result<TruthData> {
        Ok(TruthData {
            level: mesh.level(),
            source: mesh.interpolate(exact_source),
            flux: flux.edge_flux(mesh),
            trace: restrict_boundary(fine_trace, mesh, MeanPolicy::Recenter)?,
        })
    }
}

/// Exact data for every level in `levels`, generated on `fine_level`.
pub fn make_truth_data(fine_level: usize, levels: &[usize], flux: FluxCoefficients) -> Result<Vec<TruthData>> {
    for &l in levels {
        if l == 0 || fine_level % l != 0 {
            return Err(Error::IncompatibleLevels { coarse: l, fine: fine_level });
        }
    }
    let fine = FineGrid::new(fine_level)?;
    let trace = fine.trace(flux)?;
    levels
        .iter()
        .map(|&l| fine.truth_on(&TriMesh::uniform(l)?, flux, &trace))
        .collect()
}

/// Exact data generated on the computational mesh itself (inverse crime).
pub fn same_mesh_truth(ctx: &ForwardContext, flux: FluxCoefficients) -> Result<TruthData> {
    let mesh = ctx.mesh();
    let source = mesh.interpolate(exact_source);
    let j = flux.edge_flux(mesh);
    let u = ctx.neumann_map(&source, &j)?;
    let trace = mesh.trace(&u)?.recentered(mesh)?;
    Ok(TruthData {
        level: mesh.level(),
        source,
        flux: j,
        trace,
    })
}

/// Seedable noise source; uniform draws on (-1, 1) from 53 random mantissa bits.
pub struct NoiseSource(ChaCha8Rng);

impl NoiseSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    pub fn uniform_pm1(&mut self) -> f64 {
        let unit = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * unit - 1.0
    }

    pub fn boundary_noise(&mut self, level: usize) -> BoundaryField {
        BoundaryField::from_nodal(level, (0..4 * level).map(|_| self.uniform_pm1()).collect())
    }
}

/// Adds `θ R` to the flux (at the boundary nodes) and the recentered `θ R'`
/// to the zero-mean trace. Returns the noisy pair and
/// `δ = ‖j_δ - j‖_{L2(∂Ω)} + ‖g_δ - g‖_{L2(∂Ω)}`.
pub fn add_noise(mesh: &TriMesh, truth: &TruthData, theta: f64, noise: &mut NoiseSource) -> Result<(CauchyPair, f64)> {
    if !(theta >= 0.0) {
        return Err(Error::InvalidArgument(format!("noise scale must be nonnegative, got {theta}")));
    }
    let level = mesh.level();
    let rj = noise.boundary_noise(level);
    let rg = noise.boundary_noise(level).recentered(mesh)?;
    let mut flux = truth.flux.clone();
    flux.axpy(theta, &rj);
    let mut trace = truth.trace.clone();
    trace.axpy(theta, &rg);
    let delta = theta * (rj.l2_norm(mesh)? + rg.l2_norm(mesh)?);
    Ok((CauchyPair::new(mesh, flux, trace)?, delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", content = "value", rename_all = "lowercase")]
pub enum ThetaMode {
    /// `θ = h sqrt(ρ)` per level.
    Scheduled,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub levels: Vec<usize>,
    pub fine_level: usize,
    pub seed: u64,
    pub theta: ThetaMode,
    pub rho_coeff: f64,
    pub tau1_coeff: f64,
    pub tau2_coeff: f64,
    pub max_iter: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            levels: vec![4, 8, 16, 32, 64],
            fine_level: 128,
            seed: 42,
            theta: ThetaMode::Scheduled,
            rho_coeff: 0.01,
            tau1_coeff: 1e-6,
            tau2_coeff: 1e-4,
            max_iter: 600,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidArgument("no refinement levels given".into()));
        }
        if self.fine_level == 0 {
            return Err(Error::InvalidLevel(0));
        }
        for &l in &self.levels {
            if l == 0 || self.fine_level % l != 0 {
                return Err(Error::InvalidArgument(format!(
                    "level {l} does not divide the fine level {}",
                    self.fine_level
                )));
            }
        }
        for w in self.levels.windows(2) {
            if w[1] % w[0] != 0 {
                return Err(Error::InvalidArgument(format!(
                    "level {} is not a refinement of level {}",
                    w[1], w[0]
                )));
            }
        }
        if !(self.rho_coeff > 0.0 && self.tau1_coeff > 0.0 && self.tau2_coeff > 0.0) {
            return Err(Error::InvalidArgument("coefficients must be positive".into()));
        }
        if let ThetaMode::Fixed(t) = self.theta {
            if !(t >= 0.0) {
                return Err(Error::InvalidArgument(format!("theta must be nonnegative, got {t}")));
            }
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the convergence history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RunRecord {
    pub level: usize,
    pub h: f64,
    pub rho: f64,
    pub delta: f64,
    pub iterations: usize,
    pub tolerance: f64,
    pub l2_f: f64,
    pub l2_n: f64,
    pub l2_d: f64,
    pub h1_n: f64,
    pub h1_d: f64,
}

/// Reconstruction and error fields of one level, for export.
#[derive(Debug, Clone)]
pub struct LevelFields {
    pub source: NodalField,
    pub exact_source: NodalField,
    /// `N_{f†} j† - N_{f_ℓ} j_δ`
    pub neumann_diff: NodalField,
    /// `D_{f†} g† - D_{f_ℓ} g_δ`
    pub dirichlet_diff: NodalField,
    /// `D_{f_ℓ} g_δ - N_{f_ℓ} j_δ`
    pub gap: NodalField,
}

#[derive(Debug, Clone)]
pub struct LevelOutput {
    pub record: RunRecord,
    pub fields: LevelFields,
    pub history: Vec<CgRecord>,
}

/// Completed levels, plus the error that stopped the sweep early, if any.
#[derive(Debug)]
pub struct SweepOutcome {
    pub levels: Vec<LevelOutput>,
    pub failure: Option<(usize, Error)>,
}

impl SweepOutcome {
    pub fn records(&self) -> Vec<RunRecord> {
        self.levels.iter().map(|l| l.record).collect()
    }
}

fn cg_options(h: f64, tau1_coeff: f64, tau2_coeff: f64, max_iter: usize) -> CgOptions {
    CgOptions {
        max_iter,
        tau1: tau1_coeff * h.sqrt(),
        tau2: tau2_coeff * h.sqrt(),
    }
}

struct Errors {
    l2_f: f64,
    l2_n: f64,
    l2_d: f64,
    h1_n: f64,
    h1_d: f64,
    fields: LevelFields,
}

fn reconstruction_errors(ctx: &ForwardContext, truth: &TruthData, data: &CauchyPair, f: &NodalField) -> Result<Errors> {
    let n_exact = ctx.neumann_map(&truth.source, &truth.flux)?;
    let d_exact = ctx.dirichlet_map(&truth.source, &truth.trace)?;
    let n = ctx.neumann_map(f, &data.flux)?;
    let d = ctx.dirichlet_map(f, &data.trace)?;
    let neumann_diff = &n_exact - &n;
    let dirichlet_diff = &d_exact - &d;
    let nn = ctx.norms(&neumann_diff);
    let dn = ctx.norms(&dirichlet_diff);
    Ok(Errors {
        l2_f: ctx.l2_norm(&(f - &truth.source)),
        l2_n: nn.l2,
        l2_d: dn.l2,
        h1_n: nn.h1,
        h1_d: dn.h1,
        fields: LevelFields {
            source: f.clone(),
            exact_source: truth.source.clone(),
            neumann_diff,
            dirichlet_diff,
            gap: &d - &n,
        },
    })
}

fn noise_stream(level: usize, tag: u64) -> u64 {
    ((level as u64) << 32) | tag
}

/// Warm-started refinement sweep with data generated on the fine level.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let truths = make_truth_data(cfg.fine_level, &cfg.levels, FluxCoefficients::STANDARD)?;
    Ok(run_sweep_with_truth(cfg, |i, _| Ok(truths[i].clone())))
}

/// Sweep with exact data supplied per level by `truth(index, ctx)`.
pub fn run_sweep_with_truth(
    cfg: &SweepConfig,
    mut truth: impl FnMut(usize, &ForwardContext) -> Result<TruthData>,
) -> SweepOutcome {
    let mut levels: Vec<LevelOutput> = Vec::new();
    let mut previous: Option<NodalField> = None;
    for (i, &level) in cfg.levels.iter().enumerate() {
        let result = (|| -> Result<LevelOutput> {
            let ctx = example_context(level)?;
            let truth = truth(i, &ctx)?;
            let sched = parameter_schedule_with(level, cfg.rho_coeff)?;
            let theta = match cfg.theta {
                ThetaMode::Scheduled => sched.theta,
                ThetaMode::Fixed(t) => t,
            };
            let mut noise = NoiseSource::new(cfg.seed, noise_stream(level, 0));
            let (data, delta) = add_noise(ctx.mesh(), &truth, theta, &mut noise)?;
            let f0 = match &previous {
                Some(f) => prolong_nodal(f, ctx.mesh())?,
                None => ctx.mesh().interpolate(initial_guess),
            };
            let prob = RegularizedProblem::new(&ctx, vec![data.clone()], sched.rho, NodalField::zeros(ctx.mesh()))?;
            let state = cg_minimize(&prob, &f0, &cg_options(sched.h, cfg.tau1_coeff, cfg.tau2_coeff, cfg.max_iter))?;
            let err = reconstruction_errors(&ctx, &truth, &data, &state.f)?;
            Ok(LevelOutput {
                record: RunRecord {
                    level,
                    h: sched.h,
                    rho: sched.rho,
                    delta,
                    iterations: state.k,
                    tolerance: state.tolerance,
                    l2_f: err.l2_f,
                    l2_n: err.l2_n,
                    l2_d: err.l2_d,
                    h1_n: err.h1_n,
                    h1_d: err.h1_d,
                },
                fields: err.fields,
                history: state.history,
            })
        })();
        match result {
            Ok(out) => {
                previous = Some(out.fields.source.clone());
                levels.push(out);
            }
            Err(e) => {
                return SweepOutcome {
                    levels,
                    failure: Some((level, e)),
                }
            }
        }
    }
    SweepOutcome { levels, failure: None }
}

/// Experimental orders of convergence between consecutive levels and their mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocSummary {
    pub steps: Vec<f64>,
    pub mean: f64,
}

/// `EOC = (ln e1 - ln e2) / (ln h1 - ln h2)` for consecutive pairs.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<EocSummary> {
    if errors.len() != hs.len() || errors.len() < 2 {
        return Err(Error::InvalidArgument(
            "need at least two errors and one mesh size per error".into(),
        ));
    }
    if errors.iter().chain(hs).any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidArgument("errors and mesh sizes must be positive".into()));
    }
    let steps: Vec<f64> = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0].ln() - e[1].ln()) / (h[0].ln() - h[1].ln()))
        .collect();
    let mean = steps.iter().sum::<f64>() / steps.len() as f64;
    Ok(EocSummary { steps, mean })
}

/// EOC of every error column of a sweep, in table order
/// `L2_f, L2_N, L2_D, H1_N, H1_D`.
pub fn sweep_eoc(records: &[RunRecord]) -> Result<[EocSummary; 5]> {
    let hs: Vec<f64> = records.iter().map(|r| r.h).collect();
    let column = |get: fn(&RunRecord) -> f64| eoc(&records.iter().map(get).collect::<Vec<_>>(), &hs);
    Ok([
        column(|r| r.l2_f)?,
        column(|r| r.l2_n)?,
        column(|r| r.l2_d)?,
        column(|r| r.h1_n)?,
        column(|r| r.h1_d)?,
    ])
}

/// Flux coefficient sets for multi-measurement runs.
///
/// `1`: `(1,2,3,4)`; `6`: `D = 4` with all orderings of `{1,2,3}`;
/// `16`: the first sixteen orderings of `{1,2,3,4}` in lexicographic order;
/// `24`: all of them.
pub fn measurement_family(size: usize) -> Result<Vec<FluxCoefficients>> {
    let to_coeffs = |p: &[u8]| FluxCoefficients([p[0] as f64, p[1] as f64, p[2] as f64, p[3] as f64]);
    match size {
        1 => Ok(vec![FluxCoefficients::STANDARD]),
        6 => Ok(permutations(&[1, 2, 3])
            .into_iter()
            .map(|mut p| {
                p.push(4);
                to_coeffs(&p)
            })
            .collect()),
        16 | 24 => Ok(permutations(&[1, 2, 3, 4])
            .iter()
            .take(size)
            .map(|p| to_coeffs(p))
            .collect()),
        _ => Err(Error::InvalidArgument(format!(
            "unsupported measurement family size {size} (expected 1, 6, 16 or 24)"
        ))),
    }
}

/// All orderings of `items` (which must be sorted) in lexicographic order.
fn permutations(items: &[u8]) -> Vec<Vec<u8>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (i, &head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

fn flux_tag(flux: &FluxCoefficients) -> u64 {
    flux.0.iter().fold(0u64, |acc, &c| acc * 16 + (c as u64 & 0xf)) + 1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiConfig {
    pub level: usize,
    pub fine_level: usize,
    pub theta: f64,
    pub families: Vec<usize>,
    pub seed: u64,
    pub rho_coeff: f64,
    pub tau1_coeff: f64,
    pub tau2_coeff: f64,
    pub max_iter: usize,
}

impl Default for MultiConfig {
    fn default() -> Self {
        Self {
            level: 64,
            fine_level: 128,
            theta: 0.1,
            families: vec![1, 6, 16],
            seed: 42,
            rho_coeff: 0.01,
            tau1_coeff: 1e-6,
            tau2_coeff: 1e-4,
            max_iter: 600,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiRecord {
    pub measurements: usize,
    pub iterations: usize,
    pub tolerance: f64,
    pub delta_bar: f64,
    pub l2_f: f64,
    pub l2_n: f64,
    pub l2_d: f64,
    pub h1_n: f64,
    pub h1_d: f64,
}

#[derive(Debug, Clone)]
pub struct MultiOutput {
    pub record: MultiRecord,
    pub fields: LevelFields,
    pub history: Vec<CgRecord>,
}

/// Minimizes the averaged functional for each measurement family at a fixed
/// level and noise scale. State errors refer to the `(1,2,3,4)` measurement,
/// which belongs to every family.
pub fn run_multi(cfg: &MultiConfig) -> Result<Vec<MultiOutput>> {
    if cfg.level == 0 || cfg.fine_level % cfg.level != 0 {
        return Err(Error::IncompatibleLevels {
            coarse: cfg.level,
            fine: cfg.fine_level,
        });
    }
    let fine = FineGrid::new(cfg.fine_level)?;
    let ctx = example_context(cfg.level)?;
    let mesh = ctx.mesh();
    let sched = parameter_schedule_with(cfg.level, cfg.rho_coeff)?;

    let mut cache: Vec<(FluxCoefficients, TruthData, CauchyPair, f64)> = Vec::new();
    let mut outputs = Vec::new();
    for &size in &cfg.families {
        let family = measurement_family(size)?;
        let mut pairs = Vec::with_capacity(family.len());
        let mut delta_sum = 0.0;
        for flux in &family {
            if !cache.iter().any(|(c, ..)| c == flux) {
                let trace = fine.trace(*flux)?;
                let truth = fine.truth_on(mesh, *flux, &trace)?;
                let mut noise = NoiseSource::new(cfg.seed, noise_stream(cfg.level, flux_tag(flux)));
                let (pair, delta) = add_noise(mesh, &truth, cfg.theta, &mut noise)?;
                cache.push((*flux, truth, pair, delta));
            }
            let (_, _, pair, delta) = cache.iter().find(|(c, ..)| c == flux).unwrap();
            pairs.push(pair.clone());
            delta_sum += delta;
        }
        let prob = RegularizedProblem::new(&ctx, pairs, sched.rho, NodalField::zeros(mesh))?;
        let f0 = mesh.interpolate(initial_guess);
        let state = cg_minimize(&prob, &f0, &cg_options(sched.h, cfg.tau1_coeff, cfg.tau2_coeff, cfg.max_iter))?;
        let (_, truth, pair, _) = cache
            .iter()
            .find(|(c, ..)| *c == FluxCoefficients::STANDARD)
            .ok_or_else(|| Error::InvalidArgument("family lacks the (1,2,3,4) measurement".into()))?;
        let err = reconstruction_errors(&ctx, truth, pair, &state.f)?;
        outputs.push(MultiOutput {
            record: MultiRecord {
                measurements: family.len(),
                iterations: state.k,
                tolerance: state.tolerance,
                delta_bar: delta_sum / family.len() as f64,
                l2_f: err.l2_f,
                l2_n: err.l2_n,
                l2_d: err.l2_d,
                h1_n: err.h1_n,
                h1_d: err.h1_d,
            },
            fields: err.fields,
            history: state.history,
        });
    }
    Ok(outputs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateConfig {
    pub level: usize,
    pub deltas: Vec<f64>,
    pub reference_rho: f64,
    pub seed: u64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            level: 32,
            deltas: vec![1e-1, 10f64.powf(-1.5), 1e-2, 10f64.powf(-2.5), 1e-3],
            reference_rho: 1e-8,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatePoint {
    pub delta: f64,
    pub rho: f64,
    pub error: f64,
    /// `‖f_ρ^δ - f_ρ^0‖`, the part of the error caused by the noise.
    pub noise_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateOutcome {
    pub points: Vec<RatePoint>,
    pub slope: f64,
    pub noise_slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// A-priori parameter choice `ρ = sqrt(δ)` on a fixed mesh with same-mesh
/// exact data. The error is measured against the noise-free solution with
/// `ρ = reference_rho`. The noise direction is drawn once and scaled so that
/// the measured `δ` matches each requested value.
pub fn rate_study(cfg: &RateConfig) -> Result<RateOutcome> {
    if cfg.deltas.len() < 2 || cfg.deltas.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidArgument("need at least two positive noise levels".into()));
    }
    let ctx = example_context(cfg.level)?;
    let mesh = ctx.mesh();
    let truth = same_mesh_truth(&ctx, FluxCoefficients::STANDARD)?;
    let f_star = NodalField::zeros(mesh);

    let exact = CauchyPair::new(mesh, truth.flux.clone(), truth.trace.clone())?;
    let reference_prob = RegularizedProblem::new(&ctx, vec![exact.clone()], cfg.reference_rho, f_star.clone())?;
    let reference = lavrentiev_solve_dense(&reference_prob)?;

    let mut noise = NoiseSource::new(cfg.seed, noise_stream(cfg.level, 0));
    let rj = noise.boundary_noise(cfg.level);
    let rg = noise.boundary_noise(cfg.level).recentered(mesh)?;
    let unit_delta = rj.l2_norm(mesh)? + rg.l2_norm(mesh)?;

    let mut points = Vec::with_capacity(cfg.deltas.len());
    for &delta in &cfg.deltas {
        let theta = delta / unit_delta;
        let mut flux = truth.flux.clone();
        flux.axpy(theta, &rj);
        let mut trace = truth.trace.clone();
        trace.axpy(theta, &rg);
        let pair = CauchyPair::new(mesh, flux, trace)?;
        let rho = delta.sqrt();
        let prob = RegularizedProblem::new(&ctx, vec![pair], rho, f_star.clone())?;
        let f = lavrentiev_solve(&prob, &LavrentievOptions::default())?;
        let clean = RegularizedProblem::new(&ctx, vec![exact.clone()], rho, f_star.clone())?;
        let f_clean = lavrentiev_solve(&clean, &LavrentievOptions::default())?;
        points.push(RatePoint {
            delta,
            rho,
            error: ctx.l2_norm(&(&f - &reference)),
            noise_error: ctx.l2_norm(&(&f - &f_clean)),
        });
    }
    let deltas: Vec<f64> = points.iter().map(|p| p.delta).collect();
    let slope = log_log_slope(&deltas, &points.iter().map(|p| p.error).collect::<Vec<_>>());
    let noise_slope = log_log_slope(&deltas, &points.iter().map(|p| p.noise_error).collect::<Vec<_>>());
    Ok(RateOutcome {
        points,
        slope,
        noise_slope,
    })
}
