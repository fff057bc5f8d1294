//! The model-uncertainty class: strictly positive kernels h of the forward
//! operator, the induced drift perturbation a * grad(log h), and the
//! perturbed generator.
//!
//! Three families are exposed. `Unit` is the nominal model (no perturbation).
//! `Analytic` is the exponential kernel family for constant coefficients,
//! h(t,x) = exp(c x + gamma t) with gamma = -(a c^2 / 2 + mu c), which solves
//! the kernel equation exactly. `Numeric` solves the kernel equation
//! backward from strictly positive terminal data with implicit Euler and
//! homogeneous Neumann walls, which keeps h positive through the M-matrix
//! property.
//!
//! ```
//! use stackpde::htransform::{make_h, HKind};
//! use stackpde::mesh::build_grid;
//! use stackpde::parabolic::CoefficientModel;
//!
//! let (grid, tg) = build_grid(&[(0.0, 1.0)], &[15], 1.0, 16)?;
//! let coeffs = CoefficientModel::constant(1.0, 0.0);
//! let hm = make_h(&HKind::Analytic { c: 1.0 }, &grid, &tg, &coeffs)?;
//! // h = exp(x - t/2) induces the constant drift b_h = a * grad log h = c
//! assert!(hm.b_h.values.iter().all(|v| (v - 1.0).abs() < 1e-12));
//! # Ok::<(), stackpde::Error>(())
//! ```

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::mesh::{SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};
use crate::parabolic::{
    assemble_generator, BoundaryKind, CoefficientModel, DiscreteGenerator, GeneratorOptions,
    StencilRule,
};

/// Requested h family.
#[derive(Debug, Clone)]
pub enum HKind {
    Unit,
    Analytic { c: f64 },
    Numeric { terminal: SpaceField },
}

/// Resolved family tag kept on the model (the analytic exponent is needed
/// for closed-form evaluation along SDE paths).
#[derive(Debug, Clone, PartialEq)]
pub enum HFamily {
    Unit,
    Analytic { c: f64, gamma: f64 },
    Numeric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HModel {
    pub family: HFamily,
    pub h: SpaceTimeField,
    pub grad_log_h: SpaceTimeField,
    /// Drift perturbation b_h = a * grad(log h).
    pub b_h: SpaceTimeField,
}

impl HModel {
    pub fn is_unit(&self) -> bool {
        matches!(self.family, HFamily::Unit)
    }

    /// Closed-form h(t, x) for the Unit and Analytic families.
    pub fn eval_closed_form(&self, t: f64, x: f64) -> Option<f64> {
        match self.family {
            HFamily::Unit => Some(1.0),
            HFamily::Analytic { c, gamma } => Some((c * x + gamma * t).exp()),
            HFamily::Numeric => None,
        }
    }
}

/// grad(log h) with central differences, one-sided at the wall-adjacent nodes.
fn grad_log(grid: &SpaceGrid, h: &SpaceTimeField) -> SpaceTimeField {
    let (levels, n) = h.values.dim();
    let dx = grid.axis(0).dx;
    let mut out = Array2::zeros((levels, n));
    for k in 0..levels {
        for i in 0..n {
            let l = h.values[[k, i]].ln();
            out[[k, i]] = if n == 1 {
                0.0
            } else if i == 0 {
                (h.values[[k, 1]].ln() - l) / dx
            } else if i == n - 1 {
                (l - h.values[[k, n - 2]].ln()) / dx
            } else {
                (h.values[[k, i + 1]].ln() - h.values[[k, i - 1]].ln()) / (2.0 * dx)
            };
        }
    }
    SpaceTimeField { values: out }
}

pub fn make_h(
    kind: &HKind,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
) -> Result<HModel> {
    let n = grid.n_nodes();
    match kind {
        HKind::Unit => {
            let ones = SpaceTimeField {
                values: Array2::ones((tg.n_levels(), n)),
            };
            let zeros = SpaceTimeField::zeros(grid, tg);
            Ok(HModel {
                family: HFamily::Unit,
                h: ones,
                grad_log_h: zeros.clone(),
                b_h: zeros,
            })
        }
        HKind::Analytic { c } => {
            let (a, mu) = coeffs.constant.ok_or_else(|| {
                Error::HModel("analytic h requires constant coefficients".into())
            })?;
            let c = *c;
            let gamma = -(0.5 * a * c * c + mu * c);
            let h = SpaceTimeField::from_fn_1d(grid, tg, |t, x| (c * x + gamma * t).exp());
            let grad_log_h = SpaceTimeField {
                values: Array2::from_elem((tg.n_levels(), n), c),
            };
            let b_h = SpaceTimeField {
                values: Array2::from_elem((tg.n_levels(), n), a * c),
            };
            Ok(HModel {
                family: HFamily::Analytic { c, gamma },
                h,
                grad_log_h,
                b_h,
            })
        }
        HKind::Numeric { terminal } => {
            if terminal.len() != n {
                return Err(Error::ShapeMismatch(format!(
                    "numeric h terminal of length {}, expected {n}",
                    terminal.len()
                )));
            }
            if !terminal.values.iter().all(|&v| v > 0.0 && v.is_finite()) {
                return Err(Error::HModel(
                    "numeric h terminal data must be strictly positive".into(),
                ));
            }
            let gen = assemble_generator(
                grid,
                tg,
                coeffs,
                None,
                GeneratorOptions {
                    theta: 1.0,
                    boundary: BoundaryKind::Neumann,
                    stencil: StencilRule::Auto,
                },
            )?;
            let h = gen.solve_terminal_value(&SpaceTimeField::zeros(grid, tg), terminal)?;
            for k in 0..tg.n_levels() {
                if !h.values.row(k).iter().all(|&v| v > 0.0) {
                    return Err(Error::PositivityLoss { level: k });
                }
            }
            let grad_log_h = grad_log(grid, &h);
            let mut b_h = grad_log_h.clone();
            for k in 0..tg.n_levels() {
                let t = tg.level(k);
                for i in 0..n {
                    b_h.values[[k, i]] *= coeffs.a(t, grid.node_1d(i));
                }
            }
            Ok(HModel {
                family: HFamily::Numeric,
                h,
                grad_log_h,
                b_h,
            })
        }
    }
}

/// The drift perturbation consumed by the perturbed SDE simulation.
pub fn drift_field(hmodel: &HModel) -> &SpaceTimeField {
    &hmodel.b_h
}

/// G + B(b_h): the nominal generator augmented with the b_h advection term.
/// Unit h reproduces the nominal assembly bit for bit.
pub fn perturbed_generator(
    hmodel: &HModel,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    opts: GeneratorOptions,
) -> Result<DiscreteGenerator> {
    if hmodel.is_unit() {
        assemble_generator(grid, tg, coeffs, None, opts)
    } else {
        assemble_generator(grid, tg, coeffs, Some(&hmodel.b_h), opts)
    }
}

/// Per-(step, interior node) residual of the kernel equation
/// dh/dt + L h = 0, with the spatial part evaluated on the time-averaged
/// level by central differences. Only nodes with a full central stencil
/// are reported.
pub fn kernel_residual_field(
    hmodel: &HModel,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
) -> Array2<f64> {
    residual_field(grid, tg, coeffs, &hmodel.h, false)
}

/// Max-norm of `kernel_residual_field`.
pub fn kernel_residual(
    hmodel: &HModel,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
) -> f64 {
    max_abs(&kernel_residual_field(hmodel, grid, tg, coeffs))
}

/// Residual of the log-h (Hamilton-Jacobi) form
/// d(log h)/dt + L log h + (1/2) a |grad log h|^2 = 0,
/// same stencils as `kernel_residual_field`.
pub fn hjb_residual_field(
    hmodel: &HModel,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
) -> Array2<f64> {
    let log_h = SpaceTimeField {
        values: hmodel.h.values.mapv(f64::ln),
    };
    residual_field(grid, tg, coeffs, &log_h, true)
}

/// Max-norm of `hjb_residual_field`.
pub fn hjb_residual(
    hmodel: &HModel,
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
) -> f64 {
    max_abs(&hjb_residual_field(hmodel, grid, tg, coeffs))
}

fn residual_field(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    f: &SpaceTimeField,
    quadratic_term: bool,
) -> Array2<f64> {
    let n = grid.n_nodes();
    let dx = grid.axis(0).dx;
    let dt = tg.dt;
    if n < 3 {
        return Array2::zeros((tg.steps, 0));
    }
    let mut out = Array2::zeros((tg.steps, n - 2));
    for k in 0..tg.steps {
        let t_mid = tg.level(k) + 0.5 * dt;
        for i in 1..n - 1 {
            let x = grid.node_1d(i);
            let avg = |j: usize| 0.5 * (f.values[[k, j]] + f.values[[k + 1, j]]);
            let time_diff = (f.values[[k + 1, i]] - f.values[[k, i]]) / dt;
            let d1 = (avg(i + 1) - avg(i - 1)) / (2.0 * dx);
            let d2 = (avg(i + 1) - 2.0 * avg(i) + avg(i - 1)) / (dx * dx);
            let a = coeffs.a(t_mid, x);
            let mut r = time_diff + 0.5 * a * d2 + coeffs.mu(t_mid, x) * d1;
            if quadratic_term {
                r += 0.5 * a * d1 * d1;
            }
            out[[k, i - 1]] = r;
        }
    }
    out
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}
