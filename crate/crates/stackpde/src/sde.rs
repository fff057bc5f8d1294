//! Monte Carlo validation of the PDE layer through the underlying diffusion.
//!
//! Euler-Maruyama paths of dX = mu dt + sigma dW (nominal) or
//! dX = (mu + b_h) dt + sigma dW (perturbed) with absorption at the first
//! exit from the spatial interval. Two checks tie the probabilistic and the
//! PDE pictures together: the stopped kernel h(t, X_t) must be a mean-one
//! martingale under the nominal dynamics, and the absorbed expectation
//! E[g(X_T); tau > T] must match the Dirichlet terminal-value solve
//! (Feynman-Kac).
//!
//! Reproducibility is scheduler-independent: every path draws from its own
//! counter-based substream of one seeded generator, and reductions use a
//! fixed pairwise summation order, so the rayon thread count never changes
//! a single output bit.
//!
//! ```
//! use stackpde::mesh::{build_grid, SpaceField};
//! use stackpde::parabolic::CoefficientModel;
//! use stackpde::sde::{feynman_kac_check, SdeConfig};
//!
//! let (grid, tg) = build_grid(&[(0.0, 1.0)], &[15], 1.0, 16)?;
//! let coeffs = CoefficientModel::constant(0.02, 0.0);
//! let terminal = SpaceField::from_fn_1d(&grid, |x| (std::f64::consts::PI * x).sin());
//! let cfg = SdeConfig { n_paths: 4_000, seed: 7, ..SdeConfig::default() };
//! let report = feynman_kac_check(&grid, &tg, &coeffs, &terminal, 7, &cfg)?;
//! assert!(report.pass);
//! # Ok::<(), stackpde::Error>(())
//! ```

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::htransform::HModel;
use crate::linalg::pairwise_sum;
use crate::mesh::{SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::parabolic::{
    assemble_generator, CoefficientModel, GeneratorOptions,
};

#[derive(Debug, Clone, Copy)]
pub struct SdeConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Euler-Maruyama substeps per PDE time step.
    pub substeps: usize,
    /// Bias constant C of the acceptance bands 3*SE + C*dt and
    /// 3*SE + C*(dt + dx^2).
    pub bias_const: f64,
}

impl Default for SdeConfig {
    fn default() -> Self {
        Self {
            n_paths: 20_000,
            seed: 0,
            substeps: 4,
            bias_const: 1.0,
        }
    }
}

/// Terminal snapshot of an absorbed path ensemble.
#[derive(Debug, Clone)]
pub struct PathEnsemble {
    pub seed: u64,
    /// Position at min(T, absorption time) per path.
    pub states: Vec<f64>,
    /// Absorption time per path; `horizon` when the path survived.
    pub exit_times: Vec<f64>,
    /// Survival flag per path (no wall hit before T).
    pub alive: Vec<bool>,
    /// Drift-interpolation clamp events (perturbed runs only).
    pub clamped: usize,
}

impl PathEnsemble {
    pub fn n_paths(&self) -> usize {
        self.states.len()
    }

    pub fn survivors(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MartingaleReport {
    pub mean: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub n_paths: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct FeynmanKacReport {
    pub pde_value: f64,
    pub mc_value: f64,
    pub std_error: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub n_paths: usize,
}

/// Piecewise-constant in time (per PDE step), multilinear in space lookup of
/// a node field; positions between the wall and the first node take the
/// nearest node value. Returns (value, clamped).
fn interp_field(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    field: &SpaceTimeField,
    t: f64,
    x: f64,
) -> (f64, bool) {
    let k = ((t / tg.dt).floor() as usize).min(tg.steps - 1);
    let ax = grid.axis(0);
    let s = (x - ax.lo) / ax.dx - 1.0;
    let n = ax.n;
    if s <= 0.0 {
        return (field.values[[k, 0]], s < 0.0);
    }
    if s >= (n - 1) as f64 {
        return (field.values[[k, n - 1]], s > (n - 1) as f64);
    }
    let i = s.floor() as usize;
    let w = s - i as f64;
    (
        (1.0 - w) * field.values[[k, i]] + w * field.values[[k, i + 1]],
        false,
    )
}

struct PathOutcome {
    state: f64,
    exit_time: f64,
    alive: bool,
    clamped: usize,
}

fn run_path(
    path: usize,
    seed: u64,
    x0: f64,
    coeffs: &CoefficientModel,
    drift: Option<(&SpaceGrid, &TimeGrid, &SpaceTimeField)>,
    lo: f64,
    hi: f64,
    horizon: f64,
    n_steps: usize,
) -> PathOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    let dt = horizon / n_steps as f64;
    let sqrt_dt = dt.sqrt();
    let mut x = x0;
    let mut clamped = 0usize;
    for k in 0..n_steps {
        let t = k as f64 * dt;
        let mut mu = coeffs.mu(t, x);
        if let Some((grid, tg, b_h)) = drift {
            let (b, cl) = interp_field(grid, tg, b_h, t, x);
            mu += b;
            clamped += cl as usize;
        }
        let z: f64 = rng.sample(StandardNormal);
        x += mu * dt + coeffs.sigma(t, x) * sqrt_dt * z;
        if x <= lo || x >= hi {
            // first-crossing absorption: freeze at the wall
            return PathOutcome {
                state: x.clamp(lo, hi),
                exit_time: (k + 1) as f64 * dt,
                alive: false,
                clamped,
            };
        }
    }
    PathOutcome {
        state: x,
        exit_time: horizon,
        alive: true,
        clamped,
    }
}

fn simulate(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    drift: Option<&SpaceTimeField>,
    x0: f64,
    cfg: &SdeConfig,
) -> Result<PathEnsemble> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(
            "SDE simulation is implemented for 1D grids".into(),
        ));
    }
    if cfg.n_paths == 0 || cfg.substeps == 0 {
        return Err(Error::Sde("n_paths and substeps must be positive".into()));
    }
    let ax = grid.axis(0);
    if !(x0 > ax.lo && x0 < ax.hi) {
        return Err(Error::Sde(format!(
            "start point {x0} outside the open interval ({}, {})",
            ax.lo, ax.hi
        )));
    }
    if let Some(b) = drift {
        if b.values.dim() != (tg.n_levels(), grid.n_nodes()) {
            return Err(Error::ShapeMismatch("drift field shape vs grids".into()));
        }
    }
    let n_steps = tg.steps * cfg.substeps;
    let outcomes: Vec<PathOutcome> = (0..cfg.n_paths)
        .into_par_iter()
        .map(|p| {
            run_path(
                p,
                cfg.seed,
                x0,
                coeffs,
                drift.map(|b| (grid, tg, b)),
                ax.lo,
                ax.hi,
                tg.horizon,
                n_steps,
            )
        })
        .collect();
    let mut states = Vec::with_capacity(cfg.n_paths);
    let mut exit_times = Vec::with_capacity(cfg.n_paths);
    let mut alive = Vec::with_capacity(cfg.n_paths);
    let mut clamped = 0usize;
    for o in outcomes {
        states.push(o.state);
        exit_times.push(o.exit_time);
        alive.push(o.alive);
        clamped += o.clamped;
    }
    Ok(PathEnsemble {
        seed: cfg.seed,
        states,
        exit_times,
        alive,
        clamped,
    })
}

/// Nominal ensemble: dX = mu dt + sigma dW with wall absorption.
pub fn simulate_nominal(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    x0: f64,
    cfg: &SdeConfig,
) -> Result<PathEnsemble> {
    simulate(grid, tg, coeffs, None, x0, cfg)
}

/// Perturbed ensemble: dX = (mu + b_h) dt + sigma dW, b_h interpolated from
/// the h-model drift field.
pub fn simulate_perturbed(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    hmodel: &HModel,
    x0: f64,
    cfg: &SdeConfig,
) -> Result<PathEnsemble> {
    simulate(grid, tg, coeffs, Some(&hmodel.b_h), x0, cfg)
}

fn mean_and_se(samples: &[f64]) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = pairwise_sum(samples) / n;
    let sq: Vec<f64> = samples.iter().map(|&s| (s - mean) * (s - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0).max(1.0);
    (mean, (var / n).sqrt())
}

/// Optional-stopping check: under the nominal dynamics the stopped kernel
/// h(t /\ tau, X) is a martingale, so the path average of
/// h(T /\ tau, X_{T /\ tau}) / h(0, x0) must be 1 up to sampling noise and
/// the O(dt) Euler bias. Requires a closed-form h family.
pub fn martingale_check(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    hmodel: &HModel,
    x0: f64,
    t_check: f64,
    cfg: &SdeConfig,
) -> Result<MartingaleReport> {
    if hmodel.eval_closed_form(0.0, x0).is_none() {
        return Err(Error::Sde(
            "martingale check requires a closed-form h family (unit or analytic)".into(),
        ));
    }
    if !(t_check > 0.0 && t_check <= tg.horizon) {
        return Err(Error::Sde(format!(
            "t_check={t_check} outside (0, {}]",
            tg.horizon
        )));
    }
    let sub_tg = TimeGrid::new(t_check, ((t_check / tg.dt).ceil() as usize).max(1))?;
    let ensemble = simulate_nominal(grid, &sub_tg, coeffs, x0, cfg)?;
    let h0 = hmodel.eval_closed_form(0.0, x0).expect("closed form");
    let samples: Vec<f64> = ensemble
        .states
        .iter()
        .zip(&ensemble.exit_times)
        .map(|(&x, &t)| hmodel.eval_closed_form(t, x).expect("closed form") / h0)
        .collect();
    let (mean, std_error) = mean_and_se(&samples);
    let dt_sde = sub_tg.dt / cfg.substeps as f64;
    let tolerance = 3.0 * std_error + cfg.bias_const * dt_sde;
    Ok(MartingaleReport {
        mean,
        std_error,
        tolerance,
        pass: (mean - 1.0).abs() <= tolerance,
        n_paths: ensemble.n_paths(),
    })
}

/// Feynman-Kac check at an interior node: the absorbed Monte Carlo
/// expectation E[g(X_T); tau > T] started at node `node` must match the
/// Dirichlet terminal-value solve of -dw/dt = G w, w(T) = g at level 0.
pub fn feynman_kac_check(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    terminal: &SpaceField,
    node: usize,
    cfg: &SdeConfig,
) -> Result<FeynmanKacReport> {
    if node >= grid.n_nodes() {
        return Err(Error::Sde(format!(
            "node index {node} out of range 0..{}",
            grid.n_nodes()
        )));
    }
    if terminal.len() != grid.n_nodes() {
        return Err(Error::ShapeMismatch("terminal data length vs grid".into()));
    }
    let gen = assemble_generator(grid, tg, coeffs, None, GeneratorOptions::default())?;
    let w = gen.solve_terminal_value(&SpaceTimeField::zeros(grid, tg), terminal)?;
    let pde_value = w.values[[0, node]];

    let x0 = grid.node_1d(node);
    let ensemble = simulate_nominal(grid, tg, coeffs, x0, cfg)?;
    // survivors contribute interpolated g(X_T); absorbed paths contribute 0
    let g_st = SpaceTimeField {
        values: ndarray::Array2::from_shape_fn((2, terminal.len()), |(_, i)| terminal.values[i]),
    };
    let one_step = TimeGrid {
        horizon: tg.horizon,
        steps: 1,
        dt: tg.horizon,
    };
    let samples: Vec<f64> = ensemble
        .states
        .iter()
        .zip(&ensemble.alive)
        .map(|(&x, &alive)| {
            if alive {
                interp_field(grid, &one_step, &g_st, 0.0, x).0
            } else {
                0.0
            }
        })
        .collect();
    let (mc_value, std_error) = mean_and_se(&samples);
    let dx = grid.axis(0).dx;
    let dt_sde = tg.dt / cfg.substeps as f64;
    let tolerance = 3.0 * std_error + cfg.bias_const * (dt_sde + dx * dx);
    Ok(FeynmanKacReport {
        pde_value,
        mc_value,
        std_error,
        tolerance,
        pass: (pde_value - mc_value).abs() <= tolerance,
        n_paths: ensemble.n_paths(),
    })
}
