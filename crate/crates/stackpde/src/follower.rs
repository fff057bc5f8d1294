//! The follower's best response: the linear-quadratic tracking problem on
//! the subdomain U2, solved against the nominal (unperturbed) model.
//!
//! Minimizing
//! J2(u1, u2) = (1/2) ||y - y_rf||^2 + (beta/2) ||u||^2 over u2
//! by matrix-free conjugate gradient on the normal equations
//! (beta I + chi2 F^T F chi2) u2 = -chi2 F^T (F(chi1 u1) - y_rf),
//! where F is the discrete control-to-trajectory map. The stationarity
//! condition beta u2 + p chi2 = 0 with the adjoint state p is the exit
//! certificate.
//!
//! ```
//! use stackpde::follower::{CgConfig, FollowerProblem};
//! use stackpde::mesh::{build_grid, MaskLabel, SpaceTimeField, SubdomainMask};
//! use stackpde::parabolic::{assemble_generator, CoefficientModel, GeneratorOptions};
//!
//! let (grid, tg) = build_grid(&[(0.0, 1.0)], &[15], 1.0, 16)?;
//! let coeffs = CoefficientModel::constant(1.0, 0.0);
//! let gen = assemble_generator(&grid, &tg, &coeffs, None, GeneratorOptions::default())?;
//! let u1 = SubdomainMask::from_box(&grid, MaskLabel::U1, &[(0.1, 0.4)])?;
//! let u2 = SubdomainMask::from_box(&grid, MaskLabel::U2, &[(0.6, 0.9)])?;
//! let y_rf =
//!     SpaceTimeField::from_fn_1d(&grid, &tg, |t, x| t * (std::f64::consts::PI * x).sin());
//! let problem =
//!     FollowerProblem::new(1.0, y_rf, u1, u2, gen, grid, tg, CgConfig::default())?;
//! let zero_u1 = SpaceTimeField::zeros(&problem.grid, &problem.tg);
//! let sol = problem.best_response(&zero_u1)?;
//! assert!(sol.kkt_residual < 1e-9);
//! # Ok::<(), stackpde::Error>(())
//! ```

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::linalg::conjugate_gradient;
use crate::mesh::{
    spacetime_inner_masked, spacetime_norm, SpaceField, SpaceGrid, SpaceTimeField, SubdomainMask,
    TimeGrid,
};
use crate::parabolic::DiscreteGenerator;

#[derive(Debug, Clone, Copy)]
pub struct CgConfig {
    /// Relative residual target.
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for CgConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iters: 500,
        }
    }
}

/// Parameter bundle of the follower layer. The generator is the NOMINAL
/// one: the follower acts against an approximate model, so the perturbed
/// operator never enters this module.
#[derive(Debug, Clone)]
pub struct FollowerProblem {
    pub beta: f64,
    pub y_rf: SpaceTimeField,
    pub mask_u1: SubdomainMask,
    pub mask_u2: SubdomainMask,
    pub generator: DiscreteGenerator,
    pub grid: SpaceGrid,
    pub tg: TimeGrid,
    pub cg: CgConfig,
}

#[derive(Debug, Clone)]
pub struct FollowerSolution {
    pub u2_star: SpaceTimeField,
    pub y: SpaceTimeField,
    pub p: SpaceTimeField,
    pub kkt_residual: f64,
    pub cg_iterations: usize,
}

impl FollowerProblem {
    pub fn new(
        beta: f64,
        y_rf: SpaceTimeField,
        mask_u1: SubdomainMask,
        mask_u2: SubdomainMask,
        generator: DiscreteGenerator,
        grid: SpaceGrid,
        tg: TimeGrid,
        cg: CgConfig,
    ) -> Result<Self> {
        if !(beta > 0.0) {
            return Err(Error::Scenario(format!("beta={beta} must be > 0")));
        }
        if !mask_u1.is_disjoint_from(&mask_u2) {
            return Err(Error::Scenario(
                "subdomain masks U1 and U2 overlap".into(),
            ));
        }
        if y_rf.values.dim() != (tg.n_levels(), grid.n_nodes()) {
            return Err(Error::ShapeMismatch("y_rf shape vs grids".into()));
        }
        Ok(Self {
            beta,
            y_rf,
            mask_u1,
            mask_u2,
            generator,
            grid,
            tg,
            cg,
        })
    }

    /// State equation y' = L y + u1 chi1 + u2 chi2, y(0) = 0.
    pub fn solve_state(
        &self,
        u1: &SpaceTimeField,
        u2: &SpaceTimeField,
    ) -> Result<SpaceTimeField> {
        let source = self.mask_u1.apply(u1).add(&self.mask_u2.apply(u2));
        self.generator
            .solve_forward(&source, &SpaceField::zeros(&self.grid))
    }

    /// Adjoint equation -p' = L* p + (y - y_rf), p(T) = 0.
    pub fn solve_adjoint(&self, y: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.generator
            .solve_backward(&y.sub(&self.y_rf), &SpaceField::zeros(&self.grid))
    }

    /// J2(u1, u2); the control integral runs over U1 and U2.
    pub fn cost_j2(&self, u1: &SpaceTimeField, u2: &SpaceTimeField) -> Result<f64> {
        let y = self.solve_state(u1, u2)?;
        self.cost_j2_given_state(u1, u2, &y)
    }

    fn cost_j2_given_state(
        &self,
        u1: &SpaceTimeField,
        u2: &SpaceTimeField,
        y: &SpaceTimeField,
    ) -> Result<f64> {
        let misfit = y.sub(&self.y_rf);
        let track = spacetime_norm(&self.grid, &self.tg, &misfit).powi(2);
        let c1 = spacetime_inner_masked(&self.grid, &self.tg, u1, u1, &self.mask_u1)?;
        let c2 = spacetime_inner_masked(&self.grid, &self.tg, u2, u2, &self.mask_u2)?;
        Ok(0.5 * track + 0.5 * self.beta * (c1 + c2))
    }

    fn flatten(f: &SpaceTimeField) -> Array1<f64> {
        Array1::from_iter(f.values.iter().copied())
    }

    fn unflatten(&self, v: &Array1<f64>) -> SpaceTimeField {
        SpaceTimeField {
            values: ndarray::Array2::from_shape_vec(
                (self.tg.n_levels(), self.grid.n_nodes()),
                v.to_vec(),
            )
            .expect("shape"),
        }
    }

    /// The best-response map F(u1) = u2* = -(1/beta) p chi2.
    pub fn best_response(&self, u1: &SpaceTimeField) -> Result<FollowerSolution> {
        self.best_response_observed(u1, |_| {})
    }

    /// Same as `best_response`, reporting every CG iterate (as the masked
    /// control field) to the observer; used by monotonicity checks.
    pub fn best_response_observed(
        &self,
        u1: &SpaceTimeField,
        mut observer: impl FnMut(&SpaceTimeField),
    ) -> Result<FollowerSolution> {
        // rhs = -chi2 F^T (F(chi1 u1) - y_rf)
        let y_free = self.solve_state(u1, &SpaceTimeField::zeros(&self.grid, &self.tg))?;
        let p_free = self.solve_adjoint(&y_free)?;
        let rhs = Self::flatten(&self.mask_u2.apply(&p_free).scaled(-1.0));

        let mut inner_err: Option<Error> = None;
        let outcome = conjugate_gradient(
            |v| {
                let u = self.unflatten(v);
                let masked = self.mask_u2.apply(&u);
                let applied = self
                    .generator
                    .solve_forward(&masked, &SpaceField::zeros(&self.grid))
                    .and_then(|y| {
                        self.generator
                            .solve_backward(&y, &SpaceField::zeros(&self.grid))
                    });
                match applied {
                    Ok(p) => {
                        let out = self.mask_u2.apply(&p).add(&u.scaled(self.beta));
                        Self::flatten(&out)
                    }
                    Err(e) => {
                        inner_err = Some(e);
                        Array1::zeros(v.len())
                    }
                }
            },
            &rhs,
            self.cg.tol,
            self.cg.max_iters,
            |x| {
                let u = SpaceTimeField {
                    values: ndarray::Array2::from_shape_vec(
                        (self.tg.n_levels(), self.grid.n_nodes()),
                        x.to_vec(),
                    )
                    .expect("shape"),
                };
                observer(&u);
            },
        );
        if let Some(e) = inner_err {
            return Err(e);
        }
        if !outcome.converged {
            return Err(Error::CgNonConvergence {
                context: "follower best response".into(),
                residual: outcome.residual,
                iterations: outcome.iterations,
            });
        }
        let u2_star = self.mask_u2.apply(&self.unflatten(&outcome.x));
        let y = self.solve_state(u1, &u2_star)?;
        let p = self.solve_adjoint(&y)?;
        let stationarity = self.mask_u2.apply(&p).add(&u2_star.scaled(self.beta));
        let u2_norm = spacetime_norm(&self.grid, &self.tg, &u2_star);
        let kkt_residual =
            spacetime_norm(&self.grid, &self.tg, &stationarity) / u2_norm.max(1.0);
        Ok(FollowerSolution {
            u2_star,
            y,
            p,
            kkt_residual,
            cg_iterations: outcome.iterations,
        })
    }
}
