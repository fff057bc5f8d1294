//! The leader's controllability layer under model uncertainty.
//!
//! The leader minimizes its control energy subject to steering the terminal
//! state into the alpha-ball around the target, anticipating the follower's
//! best response. Through Fenchel duality the problem becomes an
//! unconstrained minimization over a terminal multiplier xi in L2(Omega):
//!
//!   min_xi  (1/2) ||H* xi||^2 + alpha ||xi|| - (xi, y_tg - y0(T))
//!
//! where H maps a leader control to the terminal slice z(T) of the coupled
//! perturbed system and H* is its exact discrete adjoint. The nonsmooth
//! alpha-norm term is handled by proximal steps (block soft-thresholding),
//! never by smoothing, so the degenerate xi* = 0 case and the ball-boundary
//! property at the optimum are preserved exactly.
//!
//! H* is realized as the literal transpose of the composed discrete map H
//! (transposed step matrices in reversed order, via the shared symmetric
//! inner solve), so the discrete pairing (H u1, xi) = (u1, H* xi) holds to
//! the inner-solver tolerance and the dual gradient is consistent with the
//! dual objective.
//!
//! ```
//! use stackpde::follower::{CgConfig, FollowerProblem};
//! use stackpde::leader::{DualConfig, LeaderProblem};
//! use stackpde::mesh::{
//!     build_grid, space_norm, MaskLabel, SpaceField, SpaceTimeField, SubdomainMask,
//! };
//! use stackpde::parabolic::{assemble_generator, CoefficientModel, GeneratorOptions};
//!
//! let (grid, tg) = build_grid(&[(0.0, 1.0)], &[15], 1.0, 16)?;
//! let coeffs = CoefficientModel::constant(1.0, 0.0);
//! let gen = assemble_generator(&grid, &tg, &coeffs, None, GeneratorOptions::default())?;
//! let u1 = SubdomainMask::from_box(&grid, MaskLabel::U1, &[(0.1, 0.4)])?;
//! let u2 = SubdomainMask::from_box(&grid, MaskLabel::U2, &[(0.6, 0.9)])?;
//! let y_rf =
//!     SpaceTimeField::from_fn_1d(&grid, &tg, |t, x| t * (std::f64::consts::PI * x).sin());
//! let follower = FollowerProblem::new(
//!     1.0, y_rf, u1, u2, gen, grid.clone(), tg, CgConfig::default(),
//! )?;
//!
//! // half the distance the uncontrolled terminal state leaves to the target
//! let y_tg = SpaceField::from_fn_1d(&grid, |x| 0.1 * (std::f64::consts::PI * x).sin());
//! let zero_u1 = SpaceTimeField::zeros(&follower.grid, &follower.tg);
//! let y0 = follower.best_response(&zero_u1)?.y;
//! let alpha = 0.5 * space_norm(&grid, &y_tg.sub(&y0.terminal()));
//!
//! let leader = LeaderProblem::new(
//!     follower, alpha, y_tg, None, &coeffs,
//!     GeneratorOptions::default(), DualConfig::default(),
//! )?;
//! let (_base, dual, sol) = leader.solve_pipeline()?;
//! assert!(dual.converged);
//! // an active constraint puts the terminal state on the ball boundary
//! assert!((sol.terminal_distance - alpha).abs() <= 1e-3 * alpha);
//! # Ok::<(), stackpde::Error>(())
//! ```

use ndarray::Array1;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::follower::{FollowerProblem, FollowerSolution};
use crate::htransform::{perturbed_generator, HModel};
use crate::linalg::conjugate_gradient;
use crate::mesh::{
    space_inner, space_norm, spacetime_inner_masked, SpaceField, SpaceGrid, SpaceTimeField,
    SubdomainMask, TimeGrid,
};
use crate::parabolic::{CoefficientModel, DiscreteGenerator, GeneratorOptions};

#[derive(Debug, Clone, Copy)]
pub struct DualConfig {
    /// Variational-inequality residual target, relative to alpha.
    pub tol_rel: f64,
    pub max_iters: usize,
    /// Power-method iterations for the step-size estimate of ||H H*||.
    pub power_iters: usize,
    /// Relative tolerance of the inner coupled-system CG solves.
    pub inner_tol: f64,
    pub inner_max_iters: usize,
}

impl Default for DualConfig {
    fn default() -> Self {
        Self {
            tol_rel: 1e-4,
            max_iters: 20_000,
            power_iters: 30,
            inner_tol: 1e-13,
            inner_max_iters: 5_000,
        }
    }
}

/// The leader's problem: ball radius, target, follower layer and the
/// (optionally perturbed) model the leader plans against.
#[derive(Debug, Clone)]
pub struct LeaderProblem {
    pub alpha: f64,
    pub y_tg: SpaceField,
    pub follower: FollowerProblem,
    /// None = nominal-only run that never constructs an h-model.
    pub hmodel: Option<HModel>,
    gen_h: DiscreteGenerator,
    pub dual: DualConfig,
}

/// Dual variable with iteration diagnostics.
#[derive(Debug, Clone)]
pub struct DualState {
    pub xi: SpaceField,
    pub objective_history: Vec<f64>,
    pub vi_residual: f64,
    pub step_size: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub converged: bool,
}

/// Base pair (y0, p0): the follower system with u1 = 0 under the nominal
/// model, plus the drift-orthogonality diagnostics (reported, not enforced).
#[derive(Debug, Clone)]
pub struct BasePair {
    pub y0: SpaceTimeField,
    pub p0: SpaceTimeField,
    pub orthogonality_residuals: (f64, f64),
}

/// Internals of one H* application.
#[derive(Debug, Clone)]
pub struct HstarParts {
    pub phi: SpaceTimeField,
    pub theta: SpaceTimeField,
    /// phi restricted to U1 (the leader control candidate).
    pub u1: SpaceTimeField,
}

/// All fields of the coupled optimality system plus scalar diagnostics.
#[derive(Debug, Clone)]
pub struct OptimalitySystemSolution {
    pub y: SpaceTimeField,
    pub p: SpaceTimeField,
    pub phi: SpaceTimeField,
    pub theta: SpaceTimeField,
    pub y0: SpaceTimeField,
    pub p0: SpaceTimeField,
    pub z: SpaceTimeField,
    pub q: SpaceTimeField,
    pub u1_star: SpaceTimeField,
    pub u2_star: SpaceTimeField,
    pub j1: f64,
    pub j2: f64,
    pub terminal_distance: f64,
    pub orthogonality_residuals: (f64, f64),
    pub kkt_residual: f64,
    pub follower_cg_iterations: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub alpha: f64,
    pub terminal_distance: f64,
    pub j1: f64,
    pub j2: f64,
    pub iterations: usize,
    pub converged: bool,
    pub error: Option<String>,
}

/// Block soft-thresholding: the proximal map of threshold * ||.||_{L2(Omega)}.
/// Ties at ||v|| = threshold return zero.
pub fn prox_alpha_norm(grid: &SpaceGrid, v: &SpaceField, threshold: f64) -> SpaceField {
    let norm = space_norm(grid, v);
    if norm <= threshold {
        SpaceField::zeros(grid)
    } else {
        v.scaled(1.0 - threshold / norm)
    }
}

impl LeaderProblem {
    pub fn new(
        follower: FollowerProblem,
        alpha: f64,
        y_tg: SpaceField,
        hmodel: Option<HModel>,
        coeffs: &CoefficientModel,
        opts: GeneratorOptions,
        dual: DualConfig,
    ) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Scenario(format!("alpha={alpha} must be > 0")));
        }
        if y_tg.len() != follower.grid.n_nodes() {
            return Err(Error::ShapeMismatch("y_tg length vs grid".into()));
        }
        let gen_h = match &hmodel {
            Some(hm) => perturbed_generator(hm, &follower.grid, &follower.tg, coeffs, opts)?,
            None => follower.generator.clone(),
        };
        Ok(Self {
            alpha,
            y_tg,
            follower,
            hmodel,
            gen_h,
            dual,
        })
    }

    pub fn grid(&self) -> &SpaceGrid {
        &self.follower.grid
    }

    pub fn tg(&self) -> &TimeGrid {
        &self.follower.tg
    }

    pub fn mask_u1(&self) -> &SubdomainMask {
        &self.follower.mask_u1
    }

    pub fn generator_h(&self) -> &DiscreteGenerator {
        &self.gen_h
    }

    /// max |b_h . grad field| over the cylinder; central differences with
    /// one-sided stencils at the walls.
    fn drift_orthogonality(&self, field: &SpaceTimeField) -> f64 {
        let Some(hm) = &self.hmodel else { return 0.0 };
        if hm.is_unit() {
            return 0.0;
        }
        let grid = self.grid();
        let n = grid.n_nodes();
        let dx = grid.axis(0).dx;
        let mut worst = 0.0f64;
        for k in 0..field.n_levels() {
            for i in 0..n {
                let d = if n == 1 {
                    0.0
                } else if i == 0 {
                    (field.values[[k, 1]] - field.values[[k, 0]]) / dx
                } else if i == n - 1 {
                    (field.values[[k, i]] - field.values[[k, i - 1]]) / dx
                } else {
                    (field.values[[k, i + 1]] - field.values[[k, i - 1]]) / (2.0 * dx)
                };
                worst = worst.max((hm.b_h.values[[k, i]] * d).abs());
            }
        }
        worst
    }

    /// (y0, p0) = follower best response with u1 = 0 under the nominal
    /// generator; the drift-orthogonality residuals are diagnostics only.
    pub fn solve_base_pair(&self) -> Result<BasePair> {
        let zero = SpaceTimeField::zeros(self.grid(), self.tg());
        let sol = self.follower.best_response(&zero)?;
        let orthogonality_residuals = (
            self.drift_orthogonality(&sol.y),
            self.drift_orthogonality(&sol.p),
        );
        Ok(BasePair {
            y0: sol.y,
            p0: sol.p,
            orthogonality_residuals,
        })
    }

    fn flatten(f: &SpaceTimeField) -> Array1<f64> {
        Array1::from_iter(f.values.iter().copied())
    }

    fn unflatten(&self, v: &Array1<f64>) -> SpaceTimeField {
        SpaceTimeField {
            values: ndarray::Array2::from_shape_vec(
                (self.tg().n_levels(), self.grid().n_nodes()),
                v.to_vec(),
            )
            .expect("shape"),
        }
    }

    fn forward_h(&self, source: &SpaceTimeField) -> Result<SpaceTimeField> {
        self.gen_h
            .solve_forward(source, &SpaceField::zeros(self.grid()))
    }

    fn backward_h(&self, rhs: &SpaceTimeField, terminal: &SpaceField) -> Result<SpaceTimeField> {
        self.gen_h.solve_backward(rhs, terminal)
    }

    fn inner_cg(
        &self,
        context: &str,
        apply: impl FnMut(&Array1<f64>) -> Array1<f64>,
        b: &Array1<f64>,
    ) -> Result<Array1<f64>> {
        let outcome = conjugate_gradient(
            apply,
            b,
            self.dual.inner_tol,
            self.dual.inner_max_iters,
            |_| {},
        );
        if !outcome.converged {
            return Err(Error::CgNonConvergence {
                context: context.into(),
                residual: outcome.residual,
                iterations: outcome.iterations,
            });
        }
        Ok(outcome.x)
    }

    /// Coupled pair of the leader model:
    /// z' = L^h z + u1 chi1 - (1/beta) q chi2, z(0) = 0;
    /// -q' = L^{h*} q + z, q(T) = 0.
    pub fn apply_h_parts(&self, u1: &SpaceTimeField) -> Result<(SpaceTimeField, SpaceTimeField)> {
        let beta = self.follower.beta;
        let mask2 = &self.follower.mask_u2;
        let src = self.forward_h(&self.mask_u1().apply(u1))?;
        let b = Self::flatten(&src);
        let zero_term = SpaceField::zeros(self.grid());
        let mut inner_err: Option<Error> = None;
        let z_flat = self.inner_cg(
            "leader coupled z-system",
            |v| {
                let zf = self.unflatten(v);
                let res = self
                    .backward_h(&zf, &zero_term)
                    .and_then(|q| self.forward_h(&mask2.apply(&q)));
                match res {
                    Ok(kz) => Self::flatten(&zf.add(&kz.scaled(1.0 / beta))),
                    Err(e) => {
                        inner_err = Some(e);
                        Array1::zeros(v.len())
                    }
                }
            },
            &b,
        )?;
        if let Some(e) = inner_err {
            return Err(e);
        }
        let z = self.unflatten(&z_flat);
        let q = self.backward_h(&z, &zero_term)?;
        Ok((z, q))
    }

    /// H u1 = z(T; u1).
    pub fn apply_h(&self, u1: &SpaceTimeField) -> Result<SpaceField> {
        Ok(self.apply_h_parts(u1)?.0.terminal())
    }

    /// Coupled pair defining H*:
    /// -phi' = L^{h*} phi + theta, phi(T) = xi;
    /// theta' = L^h theta - (1/beta) phi chi2, theta(0) = 0.
    /// Returns phi restricted to U1 along with the internals.
    pub fn apply_hstar_parts(&self, xi: &SpaceField) -> Result<HstarParts> {
        let beta = self.follower.beta;
        let mask2 = &self.follower.mask_u2;
        let zero_rhs = SpaceTimeField::zeros(self.grid(), self.tg());
        let zero_term = SpaceField::zeros(self.grid());
        let phibar = self.backward_h(&zero_rhs, xi)?;
        let b = Self::flatten(&mask2.apply(&phibar));
        let mut inner_err: Option<Error> = None;
        // solve (I + (1/beta) chi2 F^T F chi2) s = chi2 phibar for s = chi2 phi
        let s_flat = self.inner_cg(
            "leader coupled phi-system",
            |v| {
                let s = self.unflatten(v);
                let res = self
                    .forward_h(&mask2.apply(&s))
                    .and_then(|f| self.backward_h(&f, &zero_term));
                match res {
                    Ok(ks) => Self::flatten(&s.add(&mask2.apply(&ks).scaled(1.0 / beta))),
                    Err(e) => {
                        inner_err = Some(e);
                        Array1::zeros(v.len())
                    }
                }
            },
            &b,
        )?;
        if let Some(e) = inner_err {
            return Err(e);
        }
        let s = mask2.apply(&self.unflatten(&s_flat));
        let theta = self.forward_h(&s.scaled(-1.0 / beta))?;
        let phi = self.backward_h(&theta, xi)?;
        let u1 = self.mask_u1().apply(&phi);
        Ok(HstarParts { phi, theta, u1 })
    }

    /// H* xi = phi chi_{U1}.
    pub fn apply_hstar(&self, xi: &SpaceField) -> Result<SpaceTimeField> {
        Ok(self.apply_hstar_parts(xi)?.u1)
    }

    /// Smooth part of the dual objective and its gradient:
    /// f(xi) = (1/2)||H* xi||^2 - (xi, gap), grad f = H H* xi - gap,
    /// where gap = y_tg - y0(T). The alpha||xi|| term is included in the
    /// reported value but excluded from the gradient (handled by prox).
    pub fn dual_value_grad(&self, xi: &SpaceField, gap: &SpaceField) -> Result<(f64, SpaceField)> {
        let (smooth, grad) = self.dual_smooth_value_grad(xi, gap)?;
        let value = smooth + self.alpha * space_norm(self.grid(), xi);
        Ok((value, grad))
    }

    fn dual_smooth_value(&self, xi: &SpaceField, gap: &SpaceField) -> Result<f64> {
        let parts = self.apply_hstar_parts(xi)?;
        let quad = spacetime_inner_masked(
            self.grid(),
            self.tg(),
            &parts.phi,
            &parts.phi,
            self.mask_u1(),
        )?;
        Ok(0.5 * quad - space_inner(self.grid(), xi, gap)?)
    }

    fn dual_smooth_value_grad(
        &self,
        xi: &SpaceField,
        gap: &SpaceField,
    ) -> Result<(f64, SpaceField)> {
        let parts = self.apply_hstar_parts(xi)?;
        let quad = spacetime_inner_masked(
            self.grid(),
            self.tg(),
            &parts.phi,
            &parts.phi,
            self.mask_u1(),
        )?;
        let smooth = 0.5 * quad - space_inner(self.grid(), xi, gap)?;
        let grad = self.apply_h(&parts.u1)?.sub(gap);
        Ok((smooth, grad))
    }

    fn vi_residual(&self, xi: &SpaceField, grad: &SpaceField) -> f64 {
        let norm = space_norm(self.grid(), xi);
        if norm == 0.0 {
            (space_norm(self.grid(), grad) - self.alpha).max(0.0)
        } else {
            space_norm(self.grid(), &grad.add(&xi.scaled(self.alpha / norm)))
        }
    }

    /// 30-iteration power-method estimate of ||H H*||.
    fn estimate_lipschitz(&self) -> Result<f64> {
        let grid = self.grid();
        let mut rng = ChaCha8Rng::seed_from_u64(0xA11CE);
        let mut v = SpaceField {
            values: Array1::from_shape_fn(grid.n_nodes(), |_| rng.random::<f64>() - 0.5),
        };
        let mut lam = 0.0f64;
        for _ in 0..self.dual.power_iters {
            let norm = space_norm(grid, &v);
            if norm == 0.0 {
                break;
            }
            let vn = v.scaled(1.0 / norm);
            let w = self.apply_h(&self.apply_hstar(&vn)?)?;
            lam = space_inner(grid, &vn, &w)?;
            v = w;
        }
        Ok(lam.max(0.0))
    }

    /// Monotone accelerated proximal gradient (with function-value restart)
    /// on the dual. Terminates when the variational-inequality residual
    /// drops below tol_rel * alpha.
    pub fn solve_dual(&self, gap: &SpaceField) -> Result<DualState> {
        let grid = self.grid();
        let tol = self.dual.tol_rel * self.alpha;
        let gap_norm = space_norm(grid, gap);

        // target already inside the alpha-ball around y0(T): xi* = 0 is the
        // exact prox fixed point
        if gap_norm <= self.alpha {
            return Ok(DualState {
                xi: SpaceField::zeros(grid),
                objective_history: vec![0.0],
                vi_residual: (gap_norm - self.alpha).max(0.0),
                step_size: 0.0,
                iterations: 0,
                restarts: 0,
                converged: true,
            });
        }

        let lip = self.estimate_lipschitz()?;
        // 10% headroom over the power-method estimate
        let mut step = 1.0 / (1.1 * lip.max(f64::MIN_POSITIVE));

        let full_value = |xi: &SpaceField, smooth: f64| smooth + self.alpha * space_norm(grid, xi);

        let mut x = SpaceField::zeros(grid);
        let mut fx = self.dual_smooth_value(&x, gap)?;
        let mut best = full_value(&x, fx);
        let mut momentum = x.clone();
        let mut t_k = 1.0f64;
        let mut history = vec![best];
        let mut restarts = 0usize;
        let mut backtracks_since_refresh = 0usize;
        let mut vi = f64::INFINITY;
        let mut iterations = 0usize;

        while iterations < self.dual.max_iters {
            iterations += 1;
            let (fy, grad_y) = self.dual_smooth_value_grad(&momentum, gap)?;
            // proximal step with backtracking safeguard
            let (cand, f_cand) = loop {
                let cand = prox_alpha_norm(
                    grid,
                    &momentum.sub(&grad_y.scaled(step)),
                    step * self.alpha,
                );
                let f_cand = self.dual_smooth_value(&cand, gap)?;
                let diff = cand.sub(&momentum);
                let lin = space_inner(grid, &grad_y, &diff)?;
                let quad = space_inner(grid, &diff, &diff)? / (2.0 * step);
                if f_cand <= fy + lin + quad + 1e-12 * fy.abs().max(1.0) {
                    break (cand, f_cand);
                }
                step *= 0.5;
                backtracks_since_refresh += 1;
                if backtracks_since_refresh >= 2 {
                    let lip = self.estimate_lipschitz()?;
                    step = step.min(1.0 / (1.1 * lip.max(f64::MIN_POSITIVE)));
                    backtracks_since_refresh = 0;
                }
            };
            let v_cand = full_value(&cand, f_cand);

            let x_old = x.clone();
            if v_cand <= best {
                x = cand.clone();
                fx = f_cand;
                best = v_cand;
            } else {
                // monotone step: keep the incumbent, restart momentum
                restarts += 1;
                t_k = 1.0;
            }
            history.push(best);

            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
            momentum = cand.add(&cand.sub(&x_old).scaled((t_k - 1.0) / t_next));
            t_k = t_next;

            let (_, grad_x) = self.dual_smooth_value_grad(&x, gap)?;
            vi = self.vi_residual(&x, &grad_x);
            if vi <= tol {
                let _ = fx;
                return Ok(DualState {
                    xi: x,
                    objective_history: history,
                    vi_residual: vi,
                    step_size: step,
                    iterations,
                    restarts,
                    converged: true,
                });
            }
        }
        Ok(DualState {
            xi: x,
            objective_history: history,
            vi_residual: vi,
            step_size: step,
            iterations,
            restarts,
            converged: false,
        })
    }

    /// Populate the full optimality system from a converged dual state.
    pub fn recover_solution(
        &self,
        base: &BasePair,
        dual: &DualState,
    ) -> Result<OptimalitySystemSolution> {
        let parts = self.apply_hstar_parts(&dual.xi)?;
        let u1_star = parts.u1.clone();
        let (z, q) = self.apply_h_parts(&u1_star)?;
        let fsol: FollowerSolution = self.follower.best_response(&u1_star)?;
        let y = base.y0.add(&z);
        let p = base.p0.add(&q);
        let j1 = 0.5
            * spacetime_inner_masked(self.grid(), self.tg(), &u1_star, &u1_star, self.mask_u1())?;
        let j2 = self.follower.cost_j2(&u1_star, &fsol.u2_star)?;
        let terminal_distance = space_norm(self.grid(), &y.terminal().sub(&self.y_tg));
        Ok(OptimalitySystemSolution {
            y,
            p,
            phi: parts.phi,
            theta: parts.theta,
            y0: base.y0.clone(),
            p0: base.p0.clone(),
            z,
            q,
            u1_star,
            u2_star: fsol.u2_star,
            j1,
            j2,
            terminal_distance,
            orthogonality_residuals: base.orthogonality_residuals,
            kkt_residual: fsol.kkt_residual,
            follower_cg_iterations: fsol.cg_iterations,
        })
    }

    /// Full pipeline: base pair, dual solve, recovery.
    pub fn solve_pipeline(&self) -> Result<(BasePair, DualState, OptimalitySystemSolution)> {
        let base = self.solve_base_pair()?;
        let gap = self.y_tg.sub(&base.y0.terminal());
        let dual = self.solve_dual(&gap)?;
        let solution = self.recover_solution(&base, &dual)?;
        Ok((base, dual, solution))
    }

    /// Empirical approximate-controllability sweep: run the pipeline for a
    /// strictly decreasing alpha schedule; inner failures annotate the row
    /// and the sweep continues.
    pub fn alpha_sweep(&self, alphas: &[f64]) -> Result<Vec<SweepRow>> {
        if alphas.is_empty() {
            return Err(Error::Scenario("empty alpha schedule".into()));
        }
        for w in alphas.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::Scenario(format!(
                    "alpha schedule must be strictly decreasing, got {} then {}",
                    w[0], w[1]
                )));
            }
        }
        if !(alphas[alphas.len() - 1] > 0.0) {
            return Err(Error::Scenario("alpha values must be positive".into()));
        }
        let mut rows = Vec::with_capacity(alphas.len());
        for &alpha in alphas {
            let mut problem = self.clone();
            problem.alpha = alpha;
            match problem.solve_pipeline() {
                Ok((_, dual, sol)) => rows.push(SweepRow {
                    alpha,
                    terminal_distance: sol.terminal_distance,
                    j1: sol.j1,
                    j2: sol.j2,
                    iterations: dual.iterations,
                    converged: dual.converged,
                    error: None,
                }),
                Err(e) => rows.push(SweepRow {
                    alpha,
                    terminal_distance: f64::NAN,
                    j1: f64::NAN,
                    j2: f64::NAN,
                    iterations: 0,
                    converged: false,
                    error: Some(e.to_string()),
                }),
            }
        }
        Ok(rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::follower::CgConfig;
    use crate::htransform::{make_h, HKind};
    use crate::mesh::{build_grid, MaskLabel};
    use crate::parabolic::assemble_generator;

    fn make_leader(
        n: usize,
        m: usize,
        beta: f64,
        h: Option<HKind>,
        alpha: f64,
    ) -> LeaderProblem {
        let (grid, tg) = build_grid(&[(0.0, 1.0)], &[n], 1.0, m).unwrap();
        let coeffs = CoefficientModel::constant(1.0, 0.0);
        let opts = GeneratorOptions::default();
        let gen = assemble_generator(&grid, &tg, &coeffs, None, opts).unwrap();
        let mask_u1 = SubdomainMask::from_box(&grid, MaskLabel::U1, &[(0.1, 0.4)]).unwrap();
        let mask_u2 = SubdomainMask::from_box(&grid, MaskLabel::U2, &[(0.6, 0.9)]).unwrap();
        let pi = std::f64::consts::PI;
        let y_rf = SpaceTimeField::from_fn_1d(&grid, &tg, |t, x| t * (pi * x).sin());
        let follower = FollowerProblem::new(
            beta,
            y_rf,
            mask_u1,
            mask_u2,
            gen,
            grid.clone(),
            tg.clone(),
            CgConfig {
                tol: 1e-13,
                max_iters: 2_000,
            },
        )
        .unwrap();
        let y_tg = SpaceField::from_fn_1d(&grid, |x| 0.1 * (pi * x).sin());
        let hmodel = h.map(|kind| make_h(&kind, &grid, &tg, &coeffs).unwrap());
        LeaderProblem::new(
            follower,
            alpha,
            y_tg,
            hmodel,
            &coeffs,
            opts,
            DualConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn prox_cases() {
        let grid = SpaceGrid::new(&[(0.0, 1.0)], &[3]).unwrap();
        // ||v|| = 2 with unit node weights scaled: construct explicitly
        let w = grid.cell_weight();
        let v = SpaceField {
            values: Array1::from_elem(3, 2.0 / (3.0 * w).sqrt()),
        };
        assert!((space_norm(&grid, &v) - 2.0).abs() < 1e-12);
        let p = prox_alpha_norm(&grid, &v, 0.5);
        let expect = v.scaled(0.75);
        assert!(p.values.iter().zip(expect.values.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        // shrink to zero at/below the threshold
        let z = prox_alpha_norm(&grid, &v, 2.0);
        assert!(z.values.iter().all(|&x| x == 0.0));
        let z2 = prox_alpha_norm(&grid, &v, 5.0);
        assert!(z2.values.iter().all(|&x| x == 0.0));
        // zero threshold is the identity
        let id = prox_alpha_norm(&grid, &v, 0.0);
        assert_eq!(id, v);
    }

    #[test]
    fn hstar_of_zero_is_zero() {
        let lp = make_leader(9, 8, 1.0, None, 0.1);
        let xi = SpaceField::zeros(lp.grid());
        let out = lp.apply_hstar(&xi).unwrap();
        assert_eq!(out.values.sum(), 0.0);
        let u1 = SpaceTimeField::zeros(lp.grid(), lp.tg());
        assert_eq!(lp.apply_h(&u1).unwrap().values.sum(), 0.0);
    }

    #[test]
    fn decoupled_limit_matches_plain_solves() {
        // 1/beta ~ 0: phi is a plain backward solve, z(T) a plain forward slice
        let lp = make_leader(13, 10, 1e290, Some(HKind::Unit), 0.1);
        let pi = std::f64::consts::PI;
        let xi = SpaceField::from_fn_1d(lp.grid(), |x| (pi * x).sin() - 0.2);
        let parts = lp.apply_hstar_parts(&xi).unwrap();
        let plain = lp
            .generator_h()
            .solve_backward(&SpaceTimeField::zeros(lp.grid(), lp.tg()), &xi)
            .unwrap();
        let gap = crate::mesh::spacetime_norm(lp.grid(), lp.tg(), &parts.phi.sub(&plain));
        let scale = crate::mesh::spacetime_norm(lp.grid(), lp.tg(), &plain);
        assert!(gap / scale <= 1e-10, "phi decoupling gap {:.3e}", gap / scale);

        let u1 = SpaceTimeField::from_fn_1d(lp.grid(), lp.tg(), |t, x| (t + x).sin());
        let zt = lp.apply_h(&u1).unwrap();
        let plain_fwd = lp
            .generator_h()
            .solve_forward(&lp.mask_u1().apply(&u1), &SpaceField::zeros(lp.grid()))
            .unwrap();
        let gap2 = space_norm(lp.grid(), &zt.sub(&plain_fwd.terminal()));
        let scale2 = space_norm(lp.grid(), &plain_fwd.terminal());
        assert!(gap2 / scale2 <= 1e-10);
    }

    #[test]
    fn h_hstar_pairing() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        for kind in [None, Some(HKind::Analytic { c: 1.0 })] {
            let lp = make_leader(11, 9, 1.0, kind, 0.1);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            for _ in 0..3 {
                let u1 = SpaceTimeField {
                    values: ndarray::Array2::from_shape_fn(
                        (lp.tg().n_levels(), lp.grid().n_nodes()),
                        |_| rng.random::<f64>() - 0.5,
                    ),
                };
                let xi = SpaceField {
                    values: Array1::from_shape_fn(lp.grid().n_nodes(), |_| {
                        rng.random::<f64>() - 0.5
                    }),
                };
                let lhs = space_inner(lp.grid(), &lp.apply_h(&u1).unwrap(), &xi).unwrap();
                let rhs = spacetime_inner_masked(
                    lp.grid(),
                    lp.tg(),
                    &u1,
                    &lp.apply_hstar(&xi).unwrap(),
                    lp.mask_u1(),
                )
                .unwrap();
                let scale = lhs.abs().max(rhs.abs()).max(1e-300);
                assert!(
                    (lhs - rhs).abs() / scale <= 1e-10,
                    "pairing {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn dual_gradient_and_convexity() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let lp = make_leader(11, 9, 1.0, None, 0.1);
        let base = lp.solve_base_pair().unwrap();
        let gap = lp.y_tg.sub(&base.y0.terminal());
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let xi = SpaceField {
            values: Array1::from_shape_fn(lp.grid().n_nodes(), |_| rng.random::<f64>() - 0.5),
        };
        let delta = SpaceField {
            values: Array1::from_shape_fn(lp.grid().n_nodes(), |_| rng.random::<f64>() - 0.5),
        };
        // gradient of the smooth part against central differences
        let (_, grad) = lp.dual_smooth_value_grad(&xi, &gap).unwrap();
        let analytic = space_inner(lp.grid(), &grad, &delta).unwrap();
        let eps = 1e-5;
        let fp = lp.dual_smooth_value(&xi.add(&delta.scaled(eps)), &gap).unwrap();
        let fm = lp.dual_smooth_value(&xi.add(&delta.scaled(-eps)), &gap).unwrap();
        let fd = (fp - fm) / (2.0 * eps);
        assert!(
            (analytic - fd).abs() / analytic.abs().max(1e-300) <= 1e-6,
            "grad {analytic} vs fd {fd}"
        );
        // value at zero: 0 and gradient -(gap)
        let (v0, g0) = lp.dual_value_grad(&SpaceField::zeros(lp.grid()), &gap).unwrap();
        assert_eq!(v0, 0.0);
        let gap0 = space_norm(lp.grid(), &g0.add(&gap));
        assert!(gap0 <= 1e-14);
        // midpoint convexity of the full value along a seeded segment
        let (va, _) = lp.dual_value_grad(&xi, &gap).unwrap();
        let (vb, _) = lp.dual_value_grad(&delta, &gap).unwrap();
        let mid = SpaceField {
            values: (&xi.values + &delta.values) * 0.5,
        };
        let (vm, _) = lp.dual_value_grad(&mid, &gap).unwrap();
        assert!(vm <= 0.5 * (va + vb) + 1e-12);
    }

    #[test]
    fn degenerate_ball_gives_zero_strategy() {
        let mut lp = make_leader(11, 9, 1.0, None, 0.1);
        let base = lp.solve_base_pair().unwrap();
        let gap = lp.y_tg.sub(&base.y0.terminal());
        lp.alpha = 2.0 * space_norm(lp.grid(), &gap);
        let dual = lp.solve_dual(&gap).unwrap();
        assert!(dual.converged);
        assert_eq!(dual.xi.values.sum(), 0.0);
        let sol = lp.recover_solution(&base, &dual).unwrap();
        assert_eq!(sol.j1, 0.0);
        assert_eq!(sol.u1_star.values.sum(), 0.0);
        assert!(sol.terminal_distance <= lp.alpha);
    }

    #[test]
    fn converged_dual_sits_on_ball_boundary() {
        let mut lp = make_leader(15, 12, 1.0, None, 0.1);
        let base = lp.solve_base_pair().unwrap();
        let gap = lp.y_tg.sub(&base.y0.terminal());
        lp.alpha = 0.5 * space_norm(lp.grid(), &gap);
        let dual = lp.solve_dual(&gap).unwrap();
        assert!(dual.converged, "vi residual {:.3e}", dual.vi_residual);
        assert!(dual.vi_residual <= 1e-4 * lp.alpha);
        for w in dual.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-13);
        }
        let sol = lp.recover_solution(&base, &dual).unwrap();
        let rel = (sol.terminal_distance - lp.alpha).abs() / lp.alpha;
        assert!(rel <= 1e-3, "terminal distance off boundary by {rel:.3e}");
        // J1 identity: J1 = (1/2)||H* xi||^2
        let hs = lp.apply_hstar(&dual.xi).unwrap();
        let j1_alt = 0.5
            * spacetime_inner_masked(lp.grid(), lp.tg(), &hs, &hs, lp.mask_u1()).unwrap();
        assert!((sol.j1 - j1_alt).abs() / sol.j1.max(1e-300) <= 1e-10);
    }

    #[test]
    fn sweep_schedule_validation() {
        let lp = make_leader(9, 8, 1.0, None, 0.1);
        assert!(lp.alpha_sweep(&[0.2, 0.2]).is_err());
        assert!(lp.alpha_sweep(&[0.1, 0.2]).is_err());
        assert!(lp.alpha_sweep(&[]).is_err());
        assert!(lp.alpha_sweep(&[0.2, -0.1]).is_err());
    }
}
