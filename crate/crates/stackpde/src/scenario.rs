//! Scenario files: the TOML schema driving the CLI, with strict parsing
//! (unknown keys are rejected) and load-time validation that names the
//! offending fields.
//!
//! A scenario fixes the grids, the coefficient model, the two control
//! subdomains, the follower and leader data, the h-model family, solver
//! knobs and the Monte Carlo configuration. `build` turns the declarative
//! description into ready-to-run problem objects; a relative alpha is
//! resolved against ||y_tg - y0(T)|| with one base-pair solve.
//!
//! ```
//! use stackpde::scenario::{default_scenario_toml, Scenario};
//!
//! let built = Scenario::from_toml_str(default_scenario_toml())?.build()?;
//! assert_eq!(built.grid.n_nodes(), 63);
//! assert!(built.leader.alpha > 0.0); // "relative" alpha already resolved
//! # Ok::<(), stackpde::Error>(())
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::follower::{CgConfig, FollowerProblem};
use crate::htransform::{make_h, HKind, HModel};
use crate::leader::{DualConfig, LeaderProblem};
use crate::mesh::{
    build_grid, space_norm, MaskLabel, SpaceField, SpaceGrid, SpaceTimeField, SubdomainMask,
    TimeGrid,
};
use crate::parabolic::{
    assemble_generator, BoundaryKind, CoefficientModel, GeneratorOptions, StencilRule,
};
use crate::sde::SdeConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    /// One (lo, hi) pair per spatial axis.
    pub bounds: Vec<(f64, f64)>,
    pub n_interior: Vec<usize>,
    pub horizon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientsBlock {
    Constant {
        a: f64,
        mu: f64,
    },
    AffineInX {
        a0: f64,
        a1: f64,
        mu0: f64,
        mu1: f64,
        lambda_min: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubdomainsBlock {
    /// Open box of the leader subdomain, one (lo, hi) per axis.
    pub u1: Vec<(f64, f64)>,
    /// Open box of the follower subdomain.
    pub u2: Vec<(f64, f64)>,
}

/// Space-time field presets for y_rf and the `follower` command's u1.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "preset", rename_all = "kebab-case")]
pub enum SpaceTimePreset {
    Zero,
    /// t * sin(pi x) on the first axis.
    TSinPiX,
    /// Explicit node table, shape (steps + 1, n_interior).
    Custom { table: Vec<Vec<f64>> },
}

impl Default for SpaceTimePreset {
    fn default() -> Self {
        Self::Zero
    }
}

/// Terminal-slice presets for y_tg and the numeric h terminal data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "preset", rename_all = "kebab-case")]
pub enum SpacePreset {
    /// amplitude * exp(-((x - center) / width)^2).
    Bump {
        amplitude: f64,
        center: f64,
        width: f64,
    },
    /// amplitude * sin(pi x).
    Sin { amplitude: f64 },
    Custom { values: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FollowerBlock {
    pub beta: f64,
    #[serde(default)]
    pub y_rf: SpaceTimePreset,
    /// Leader control used by the `follower` command.
    #[serde(default)]
    pub u1: SpaceTimePreset,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iters")]
    pub cg_max_iters: usize,
}

fn default_cg_tol() -> f64 {
    1e-12
}

fn default_cg_max_iters() -> usize {
    2_000
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    Absolute,
    /// alpha = value * ||y_tg - y0(T)||.
    Relative,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderBlock {
    pub alpha: f64,
    pub alpha_mode: AlphaMode,
    pub y_tg: SpacePreset,
    /// Schedule for `sweep-alpha`, same mode as `alpha`.
    #[serde(default)]
    pub sweep: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum UncertaintyBlock {
    Unit,
    Analytic { c: f64 },
    Numeric { terminal: SpacePreset },
    /// Nominal-only: no h-model object is constructed at all.
    None,
}

impl Default for UncertaintyBlock {
    fn default() -> Self {
        Self::Unit
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum StencilChoice {
    Central,
    Upwind,
    Auto,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_stencil")]
    pub stencil: StencilChoice,
    #[serde(default = "default_dual_tol_rel")]
    pub dual_tol_rel: f64,
    #[serde(default = "default_dual_max_iters")]
    pub dual_max_iters: usize,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max_iters")]
    pub inner_max_iters: usize,
    #[serde(default = "default_power_iters")]
    pub power_iters: usize,
}

fn default_theta() -> f64 {
    0.5
}

fn default_stencil() -> StencilChoice {
    StencilChoice::Auto
}

fn default_dual_tol_rel() -> f64 {
    1e-4
}

fn default_dual_max_iters() -> usize {
    20_000
}

fn default_inner_tol() -> f64 {
    1e-13
}

fn default_inner_max_iters() -> usize {
    5_000
}

fn default_power_iters() -> usize {
    30
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            theta: default_theta(),
            stencil: default_stencil(),
            dual_tol_rel: default_dual_tol_rel(),
            dual_max_iters: default_dual_max_iters(),
            inner_tol: default_inner_tol(),
            inner_max_iters: default_inner_max_iters(),
            power_iters: default_power_iters(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeBlock {
    #[serde(default = "default_n_paths")]
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default = "default_bias_const")]
    pub bias_const: f64,
    /// Start point; defaults to the domain center.
    #[serde(default)]
    pub x0: Option<f64>,
    /// Martingale check time; defaults to the horizon.
    #[serde(default)]
    pub t_check: Option<f64>,
    /// Feynman-Kac comparison node; defaults to the center node.
    #[serde(default)]
    pub fk_node: Option<usize>,
}

fn default_n_paths() -> usize {
    20_000
}

fn default_substeps() -> usize {
    4
}

fn default_bias_const() -> f64 {
    1.0
}

impl Default for SdeBlock {
    fn default() -> Self {
        Self {
            n_paths: default_n_paths(),
            seed: 0,
            substeps: default_substeps(),
            bias_const: default_bias_const(),
            x0: None,
            t_check: None,
            fk_node: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: GridBlock,
    pub coefficients: CoefficientsBlock,
    pub subdomains: SubdomainsBlock,
    pub follower: FollowerBlock,
    pub leader: LeaderBlock,
    #[serde(default)]
    pub uncertainty: UncertaintyBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    #[serde(default)]
    pub sde: SdeBlock,
}

/// Everything the CLI pipelines consume, built and validated.
#[derive(Debug, Clone)]
pub struct BuiltScenario {
    pub grid: SpaceGrid,
    pub tg: TimeGrid,
    pub coeffs: CoefficientModel,
    pub opts: GeneratorOptions,
    pub leader: LeaderProblem,
    pub hmodel: Option<HModel>,
    /// Leader control for the `follower` command.
    pub u1: SpaceTimeField,
    /// Resolved (absolute) alpha schedule for `sweep-alpha`.
    pub sweep_alphas: Vec<f64>,
    pub sde: SdeConfig,
    pub sde_x0: f64,
    pub t_check: f64,
    pub fk_node: usize,
}

fn build_spacetime(
    preset: &SpaceTimePreset,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    field_name: &str,
) -> Result<SpaceTimeField> {
    match preset {
        SpaceTimePreset::Zero => Ok(SpaceTimeField::zeros(grid, tg)),
        SpaceTimePreset::TSinPiX => {
            let pi = std::f64::consts::PI;
            Ok(SpaceTimeField::from_fn_1d(grid, tg, |t, x| {
                t * (pi * x).sin()
            }))
        }
        SpaceTimePreset::Custom { table } => {
            let (m, n) = (tg.n_levels(), grid.n_nodes());
            if table.len() != m || table.iter().any(|row| row.len() != n) {
                return Err(Error::Scenario(format!(
                    "{field_name}: custom table must have shape ({m}, {n})"
                )));
            }
            let mut f = SpaceTimeField::zeros(grid, tg);
            for (k, row) in table.iter().enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    f.values[[k, i]] = v;
                }
            }
            Ok(f)
        }
    }
}

fn build_space(preset: &SpacePreset, grid: &SpaceGrid, field_name: &str) -> Result<SpaceField> {
    match preset {
        SpacePreset::Bump {
            amplitude,
            center,
            width,
        } => {
            if !(*width > 0.0) {
                return Err(Error::Scenario(format!(
                    "{field_name}: bump width {width} must be > 0"
                )));
            }
            let (a, c, w) = (*amplitude, *center, *width);
            Ok(SpaceField::from_fn_1d(grid, |x| {
                a * (-((x - c) / w).powi(2)).exp()
            }))
        }
        SpacePreset::Sin { amplitude } => {
            let a = *amplitude;
            let pi = std::f64::consts::PI;
            Ok(SpaceField::from_fn_1d(grid, |x| a * (pi * x).sin()))
        }
        SpacePreset::Custom { values } => {
            if values.len() != grid.n_nodes() {
                return Err(Error::Scenario(format!(
                    "{field_name}: custom values length {} vs {} grid nodes",
                    values.len(),
                    grid.n_nodes()
                )));
            }
            Ok(SpaceField {
                values: ndarray::Array1::from_vec(values.clone()),
            })
        }
    }
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Scenario(format!("scenario parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    /// Load with `--set key.path=value` overrides applied to the raw TOML
    /// document before deserialization, so overrides face the same strict
    /// validation as the file itself.
    pub fn load_with_overrides(path: &std::path::Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut doc: toml::Value = toml::from_str(&text)
            .map_err(|e| Error::Scenario(format!("scenario parse error: {e}")))?;
        for ov in overrides {
            let (key, raw) = ov.split_once('=').ok_or_else(|| {
                Error::Scenario(format!("override '{ov}' is not of the form key.path=value"))
            })?;
            let value: toml::Value = toml::from_str(&format!("v = {raw}"))
                .map(|t: toml::Value| t["v"].clone())
                .unwrap_or_else(|_| toml::Value::String(raw.to_string()));
            let mut node = &mut doc;
            let parts: Vec<&str> = key.split('.').collect();
            for part in &parts[..parts.len() - 1] {
                node = node
                    .as_table_mut()
                    .ok_or_else(|| {
                        Error::Scenario(format!("override '{key}': '{part}' is not a table"))
                    })?
                    .entry(part.to_string())
                    .or_insert(toml::Value::Table(Default::default()));
            }
            node.as_table_mut()
                .ok_or_else(|| Error::Scenario(format!("override '{key}' targets a non-table")))?
                .insert(parts[parts.len() - 1].to_string(), value);
        }
        doc.try_into()
            .map_err(|e| Error::Scenario(format!("scenario parse error: {e}")))
    }

    fn coefficient_model(&self) -> CoefficientModel {
        match &self.coefficients {
            CoefficientsBlock::Constant { a, mu } => CoefficientModel::constant(*a, *mu),
            CoefficientsBlock::AffineInX {
                a0,
                a1,
                mu0,
                mu1,
                lambda_min,
            } => CoefficientModel::affine_in_x(*a0, *a1, *mu0, *mu1, *lambda_min),
        }
    }

    pub fn build(&self) -> Result<BuiltScenario> {
        let (grid, tg) = build_grid(
            &self.grid.bounds,
            &self.grid.n_interior,
            self.grid.horizon,
            self.grid.steps,
        )?;
        let coeffs = self.coefficient_model();
        let opts = GeneratorOptions {
            theta: self.solver.theta,
            boundary: BoundaryKind::Dirichlet,
            stencil: match self.solver.stencil {
                StencilChoice::Central => StencilRule::Central,
                StencilChoice::Upwind => StencilRule::Upwind,
                StencilChoice::Auto => StencilRule::Auto,
            },
        };

        let mask_u1 = SubdomainMask::from_box(&grid, MaskLabel::U1, &self.subdomains.u1)?;
        let mask_u2 = SubdomainMask::from_box(&grid, MaskLabel::U2, &self.subdomains.u2)?;
        if !mask_u1.is_disjoint_from(&mask_u2) {
            return Err(Error::Scenario(format!(
                "subdomains: U1 box {:?} overlaps U2 box {:?}",
                self.subdomains.u1, self.subdomains.u2
            )));
        }

        let generator = assemble_generator(&grid, &tg, &coeffs, None, opts)?;
        let y_rf = build_spacetime(&self.follower.y_rf, &grid, &tg, "follower.y_rf")?;
        let follower = FollowerProblem::new(
            self.follower.beta,
            y_rf,
            mask_u1,
            mask_u2,
            generator,
            grid.clone(),
            tg.clone(),
            CgConfig {
                tol: self.follower.cg_tol,
                max_iters: self.follower.cg_max_iters,
            },
        )?;

        let hmodel = match &self.uncertainty {
            UncertaintyBlock::None => None,
            UncertaintyBlock::Unit => Some(make_h(&HKind::Unit, &grid, &tg, &coeffs)?),
            UncertaintyBlock::Analytic { c } => {
                Some(make_h(&HKind::Analytic { c: *c }, &grid, &tg, &coeffs)?)
            }
            UncertaintyBlock::Numeric { terminal } => {
                let term = build_space(terminal, &grid, "uncertainty.terminal")?;
                Some(make_h(&HKind::Numeric { terminal: term }, &grid, &tg, &coeffs)?)
            }
        };

        let y_tg = build_space(&self.leader.y_tg, &grid, "leader.y_tg")?;

        // relative alpha resolves against the base-pair gap
        let gap_norm = if self.leader.alpha_mode == AlphaMode::Relative
            || (!self.leader.sweep.is_empty() && self.leader.alpha_mode == AlphaMode::Relative)
        {
            let y0 = follower
                .best_response(&SpaceTimeField::zeros(&grid, &tg))?
                .y;
            Some(space_norm(&grid, &y_tg.sub(&y0.terminal())))
        } else {
            None
        };
        let resolve = |v: f64| match self.leader.alpha_mode {
            AlphaMode::Absolute => v,
            AlphaMode::Relative => v * gap_norm.expect("gap norm computed for relative mode"),
        };
        let alpha = resolve(self.leader.alpha);
        if !(alpha > 0.0) {
            return Err(Error::Scenario(format!(
                "leader.alpha: resolved value {alpha} must be > 0"
            )));
        }
        let sweep_alphas: Vec<f64> = self.leader.sweep.iter().map(|&v| resolve(v)).collect();

        let dual = DualConfig {
            tol_rel: self.solver.dual_tol_rel,
            max_iters: self.solver.dual_max_iters,
            power_iters: self.solver.power_iters,
            inner_tol: self.solver.inner_tol,
            inner_max_iters: self.solver.inner_max_iters,
        };
        let leader = LeaderProblem::new(
            follower,
            alpha,
            y_tg,
            hmodel.clone(),
            &coeffs,
            opts,
            dual,
        )?;

        let u1 = build_spacetime(&self.follower.u1, &grid, &tg, "follower.u1")?;
        let ax = grid.axis(0);
        let sde_x0 = self.sde.x0.unwrap_or(0.5 * (ax.lo + ax.hi));
        let t_check = self.sde.t_check.unwrap_or(tg.horizon);
        let fk_node = self.sde.fk_node.unwrap_or(grid.n_nodes() / 2);
        let sde = SdeConfig {
            n_paths: self.sde.n_paths,
            seed: self.sde.seed,
            substeps: self.sde.substeps,
            bias_const: self.sde.bias_const,
        };

        Ok(BuiltScenario {
            grid,
            tg,
            coeffs,
            opts,
            leader,
            hmodel,
            u1,
            sweep_alphas,
            sde,
            sde_x0,
            t_check,
            fk_node,
        })
    }
}

/// The desk scenario: 1D heat equation, N=63, M=64, unit h.
pub fn default_scenario_toml() -> &'static str {
    r#"[grid]
bounds = [[0.0, 1.0]]
n_interior = [63]
horizon = 1.0
steps = 64

[coefficients]
kind = "constant"
a = 1.0
mu = 0.0

[subdomains]
u1 = [[0.1, 0.4]]
u2 = [[0.6, 0.9]]

[follower]
beta = 1.0

[follower.y_rf]
preset = "t-sin-pi-x"

[leader]
alpha = 0.5
alpha_mode = "relative"

[leader.y_tg]
preset = "sin"
amplitude = 0.1

[uncertainty]
kind = "unit"
"#
}
