//! Discrete generator assembly and theta-scheme parabolic solvers.
//!
//! Forward equations are integrated as initial-value problems
//! dy/dt = G y + source, adjoint equations as terminal-value problems; the
//! backward solver is built from the transposed step matrices of the forward
//! solver, so the discrete integration-by-parts identities hold to round-off.
//!
//! ```
//! use stackpde::mesh::{build_grid, SpaceField, SpaceTimeField};
//! use stackpde::parabolic::{assemble_generator, CoefficientModel, GeneratorOptions};
//!
//! let (grid, tg) = build_grid(&[(0.0, 1.0)], &[15], 1.0, 16)?;
//! let coeffs = CoefficientModel::constant(1.0, 0.0);
//! let gen = assemble_generator(&grid, &tg, &coeffs, None, GeneratorOptions::default())?;
//! let init = SpaceField::from_fn_1d(&grid, |x| (std::f64::consts::PI * x).sin());
//! let y = gen.solve_forward(&SpaceTimeField::zeros(&grid, &tg), &init)?;
//! // the generator is (a/2) d^2/dx^2 + mu d/dx, so the semigroup damps the
//! // first Dirichlet mode by roughly exp(-pi^2 / 2)
//! let decay = y.terminal().values[7] / init.values[7];
//! assert!((decay - (-0.5 * std::f64::consts::PI.powi(2)).exp()).abs() < 1e-3);
//! # Ok::<(), stackpde::Error>(())
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::Tridiag;
use crate::mesh::{SpaceField, SpaceGrid, SpaceTimeField, TimeGrid};

type Sampler = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift mu(t,x), diffusion a(t,x) and the ellipticity floor lambda.
#[derive(Clone)]
pub struct CoefficientModel {
    mu: Sampler,
    a: Sampler,
    pub lambda_min: f64,
    /// Set when (a, mu) are space-time constants; required by the analytic
    /// h-model family.
    pub constant: Option<(f64, f64)>,
}

impl CoefficientModel {
    pub fn constant(a: f64, mu: f64) -> Self {
        Self {
            mu: Arc::new(move |_, _| mu),
            a: Arc::new(move |_, _| a),
            lambda_min: a,
            constant: Some((a, mu)),
        }
    }

    /// a(x) = a0 + a1*x, mu(x) = mu0 + mu1*x.
    pub fn affine_in_x(a0: f64, a1: f64, mu0: f64, mu1: f64, lambda_min: f64) -> Self {
        Self {
            mu: Arc::new(move |_, x| mu0 + mu1 * x),
            a: Arc::new(move |_, x| a0 + a1 * x),
            lambda_min,
            constant: if a1 == 0.0 && mu1 == 0.0 {
                Some((a0, mu0))
            } else {
                None
            },
        }
    }

    pub fn from_fns(
        a: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        mu: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        lambda_min: f64,
    ) -> Self {
        Self {
            mu: Arc::new(mu),
            a: Arc::new(a),
            lambda_min,
            constant: None,
        }
    }

    pub fn a(&self, t: f64, x: f64) -> f64 {
        (self.a)(t, x)
    }

    pub fn mu(&self, t: f64, x: f64) -> f64 {
        (self.mu)(t, x)
    }

    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        self.a(t, x).sqrt()
    }

    /// Checks a >= lambda > 0 at every sampled (t, x) of the grid.
    pub fn validate_ellipticity(&self, grid: &SpaceGrid, tg: &TimeGrid) -> Result<()> {
        if !(self.lambda_min > 0.0) {
            return Err(Error::Ellipticity {
                t: 0.0,
                x: 0.0,
                a: self.lambda_min,
                lambda: self.lambda_min,
            });
        }
        for k in 0..=tg.steps {
            let t = tg.level(k);
            for i in 0..grid.n_nodes() {
                let x = grid.node_1d(i);
                let a = self.a(t, x);
                if !(a >= self.lambda_min) {
                    return Err(Error::Ellipticity {
                        t,
                        x,
                        a,
                        lambda: self.lambda_min,
                    });
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for CoefficientModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoefficientModel")
            .field("lambda_min", &self.lambda_min)
            .field("constant", &self.constant)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryKind {
    /// Homogeneous Dirichlet; boundary nodes are not stored.
    Dirichlet,
    /// Homogeneous Neumann via ghost-node reflection (used by the numeric
    /// h solve, where forcing h to zero at the boundary would blow up
    /// grad log h).
    Neumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilRule {
    Central,
    Upwind,
    /// Central, switching to upwind per node when the cell Peclet number
    /// |v| dx / a exceeds 2.
    Auto,
}

#[derive(Debug, Clone, Copy)]
pub struct GeneratorOptions {
    pub theta: f64,
    pub boundary: BoundaryKind,
    pub stencil: StencilRule,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        Self {
            theta: 0.5,
            boundary: BoundaryKind::Dirichlet,
            stencil: StencilRule::Auto,
        }
    }
}

impl GeneratorOptions {
    pub fn with_theta(theta: f64) -> Self {
        Self {
            theta,
            ..Self::default()
        }
    }
}

/// Per-step discrete generator G_k ~ (1/2) a d2/dx2 + v d/dx sampled at
/// t_k + theta*dt, with the theta-scheme step matrices
/// A_k = I - theta*dt*G_k and B_k = I + (1-theta)*dt*G_k precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteGenerator {
    pub n: usize,
    pub steps: usize,
    pub dt: f64,
    pub theta: f64,
    pub boundary: BoundaryKind,
    g: Vec<Tridiag>,
    a_step: Vec<Tridiag>,
    b_step: Vec<Tridiag>,
    /// Number of (step, node) entries where the Auto rule switched to
    /// upwind; surfaced in run metadata.
    pub upwind_switches: usize,
}

pub fn assemble_generator(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    coeffs: &CoefficientModel,
    perturbation: Option<&SpaceTimeField>,
    opts: GeneratorOptions,
) -> Result<DiscreteGenerator> {
    if grid.dim() != 1 {
        return Err(Error::Unsupported(
            "generator assembly is implemented for 1D grids".into(),
        ));
    }
    if !(0.5..=1.0).contains(&opts.theta) {
        return Err(Error::GridSizing(format!(
            "theta={} outside [0.5, 1]",
            opts.theta
        )));
    }
    coeffs.validate_ellipticity(grid, tg)?;
    let n = grid.n_nodes();
    if let Some(b) = perturbation {
        if b.values.dim() != (tg.n_levels(), n) {
            return Err(Error::ShapeMismatch(format!(
                "perturbation shape {:?}, expected {:?}",
                b.values.dim(),
                (tg.n_levels(), n)
            )));
        }
    }
    let dx = grid.axis(0).dx;
    let dt = tg.dt;
    let mut g = Vec::with_capacity(tg.steps);
    let mut a_step = Vec::with_capacity(tg.steps);
    let mut b_step = Vec::with_capacity(tg.steps);
    let mut upwind_switches = 0usize;

    for k in 0..tg.steps {
        let t = tg.level(k) + opts.theta * dt;
        let mut m = Tridiag::zeros(n);
        for i in 0..n {
            let x = grid.node_1d(i);
            let a = coeffs.a(t, x);
            let b_h = match perturbation {
                Some(b) => {
                    opts.theta * b.values[[k + 1, i]] + (1.0 - opts.theta) * b.values[[k, i]]
                }
                None => 0.0,
            };
            let v = coeffs.mu(t, x) + b_h;

            // diffusion (1/2) a y''
            let c = 0.5 * a / (dx * dx);
            match opts.boundary {
                BoundaryKind::Dirichlet => {
                    m.diag[i] += -2.0 * c;
                    if i > 0 {
                        m.sub[i] += c;
                    }
                    if i + 1 < n {
                        m.sup[i] += c;
                    }
                }
                BoundaryKind::Neumann => {
                    // ghost reflection: missing neighbor collapses onto the node
                    let left = i > 0;
                    let right = i + 1 < n;
                    m.diag[i] += -c * (left as u8 as f64 + right as u8 as f64);
                    if left {
                        m.sub[i] += c;
                    }
                    if right {
                        m.sup[i] += c;
                    }
                }
            }

            // advection v y'
            let interior = i > 0 && i + 1 < n;
            let upwind = match opts.stencil {
                StencilRule::Central => false,
                StencilRule::Upwind => true,
                StencilRule::Auto => {
                    let peclet = v.abs() * dx / a;
                    if peclet > 2.0 {
                        upwind_switches += 1;
                        true
                    } else {
                        false
                    }
                }
            };
            if interior && !upwind && matches!(opts.boundary, BoundaryKind::Dirichlet) {
                let w = v / (2.0 * dx);
                m.sup[i] += w;
                m.sub[i] += -w;
            } else if !upwind && matches!(opts.boundary, BoundaryKind::Dirichlet) {
                // central stencil against the implicit zero boundary value
                let w = v / (2.0 * dx);
                if i + 1 < n {
                    m.sup[i] += w;
                }
                if i > 0 {
                    m.sub[i] += -w;
                }
            } else {
                // monotone one-sided stencil (also used at Neumann edges)
                if v >= 0.0 {
                    if i + 1 < n {
                        m.sup[i] += v / dx;
                        m.diag[i] += -v / dx;
                    } else if matches!(opts.boundary, BoundaryKind::Dirichlet) {
                        m.diag[i] += -v / dx;
                    }
                } else if i > 0 {
                    m.sub[i] += -v / dx;
                    m.diag[i] += v / dx;
                } else if matches!(opts.boundary, BoundaryKind::Dirichlet) {
                    m.diag[i] += v / dx;
                }
            }
        }
        a_step.push(m.identity_plus_scaled(-opts.theta * dt));
        b_step.push(m.identity_plus_scaled((1.0 - opts.theta) * dt));
        g.push(m);
    }

    Ok(DiscreteGenerator {
        n,
        steps: tg.steps,
        dt,
        theta: opts.theta,
        boundary: opts.boundary,
        g,
        a_step,
        b_step,
        upwind_switches,
    })
}

impl DiscreteGenerator {
    /// G_k f, the generator of step k applied to a space field.
    pub fn apply_step(&self, k: usize, f: &SpaceField) -> SpaceField {
        let mut out = SpaceField {
            values: ndarray::Array1::zeros(self.n),
        };
        self.g[k].matvec(
            f.values.as_slice().unwrap(),
            out.values.as_slice_mut().unwrap(),
        );
        out
    }

    pub fn step_matrices(&self, k: usize) -> (&Tridiag, &Tridiag) {
        (&self.a_step[k], &self.b_step[k])
    }

    fn check_source(&self, source: &SpaceTimeField) -> Result<()> {
        if source.values.dim() != (self.steps + 1, self.n) {
            return Err(Error::ShapeMismatch(format!(
                "source shape {:?}, expected {:?}",
                source.values.dim(),
                (self.steps + 1, self.n)
            )));
        }
        Ok(())
    }

    fn check_space(&self, f: &SpaceField) -> Result<()> {
        if f.len() != self.n {
            return Err(Error::ShapeMismatch(format!(
                "space field of length {}, expected {}",
                f.len(),
                self.n
            )));
        }
        Ok(())
    }

    /// Initial-value theta scheme:
    /// A_k y_{k+1} = B_k y_k + dt*(theta*src_{k+1} + (1-theta)*src_k).
    pub fn solve_forward(
        &self,
        source: &SpaceTimeField,
        initial: &SpaceField,
    ) -> Result<SpaceTimeField> {
        self.check_source(source)?;
        self.check_space(initial)?;
        let mut y = SpaceTimeField {
            values: ndarray::Array2::zeros((self.steps + 1, self.n)),
        };
        y.values.row_mut(0).assign(&initial.values);
        let mut rhs = vec![0.0; self.n];
        let mut next = vec![0.0; self.n];
        for k in 0..self.steps {
            let yk = y.values.row(k);
            self.b_step[k].matvec(yk.as_slice().unwrap(), &mut rhs);
            for i in 0..self.n {
                rhs[i] += self.dt
                    * (self.theta * source.values[[k + 1, i]]
                        + (1.0 - self.theta) * source.values[[k, i]]);
            }
            self.a_step[k].solve(&rhs, &mut next).map_err(|e| match e {
                Error::StepSolve { reason, .. } => Error::StepSolve { step: k, reason },
                other => other,
            })?;
            for i in 0..self.n {
                y.values[[k + 1, i]] = next[i];
            }
        }
        Ok(y)
    }

    /// Terminal-value solve built from the transposed step matrices of
    /// `solve_forward`, marched from k = M down to 0.
    ///
    /// The returned field p satisfies, exactly in floating point,
    /// `<y(u; 0), r>_st + <y_M(u; 0), v>_Omega = <u, p>_st`
    /// for every source u, which is the discrete form of the
    /// integration-by-parts identities the optimality systems rest on.
    pub fn solve_backward(
        &self,
        rhs: &SpaceTimeField,
        terminal: &SpaceField,
    ) -> Result<SpaceTimeField> {
        self.check_source(rhs)?;
        self.check_space(terminal)?;
        let m = self.steps;
        let n = self.n;
        // pi_M = dt*r_M + v; pi_k = dt*r_k + B_k^T p~_k; p~_k = A_k^{-T} pi_{k+1}
        let mut pi: Vec<f64> = (0..n)
            .map(|i| self.dt * rhs.values[[m, i]] + terminal.values[i])
            .collect();
        let mut ptilde = ndarray::Array2::<f64>::zeros((m, n));
        let mut tmp = vec![0.0; n];
        for k in (0..m).rev() {
            self.a_step[k].solve_t(&pi, &mut tmp).map_err(|e| match e {
                Error::StepSolve { reason, .. } => Error::StepSolve { step: k, reason },
                other => other,
            })?;
            ptilde.row_mut(k).assign(&ndarray::ArrayView1::from(&tmp[..]));
            self.b_step[k].matvec_t(&tmp, &mut pi);
            for i in 0..n {
                pi[i] += self.dt * rhs.values[[k, i]];
            }
        }
        // p_j = theta*p~_{j-1} + (1-theta)*p~_j
        let mut p = SpaceTimeField {
            values: ndarray::Array2::zeros((m + 1, n)),
        };
        for j in 0..=m {
            for i in 0..n {
                let mut v = 0.0;
                if j > 0 {
                    v += self.theta * ptilde[[j - 1, i]];
                }
                if j < m {
                    v += (1.0 - self.theta) * ptilde[[j, i]];
                }
                p.values[[j, i]] = v;
            }
        }
        Ok(p)
    }

    /// Consistent terminal-value marching for kernel-type equations
    /// (-dw/dt = G w + rhs, w(T) = terminal):
    /// (I - theta*dt*G_k) w_k = (I + (1-theta)*dt*G_k) w_{k+1} + dt*rhs_{k+theta}.
    ///
    /// Unlike `solve_backward` this uses G itself (not its transpose) and is
    /// the positivity-preserving route for the numeric h-model (theta = 1).
    pub fn solve_terminal_value(
        &self,
        rhs: &SpaceTimeField,
        terminal: &SpaceField,
    ) -> Result<SpaceTimeField> {
        self.check_source(rhs)?;
        self.check_space(terminal)?;
        let m = self.steps;
        let n = self.n;
        let mut w = SpaceTimeField {
            values: ndarray::Array2::zeros((m + 1, n)),
        };
        w.values.row_mut(m).assign(&terminal.values);
        let mut rhs_vec = vec![0.0; n];
        let mut out = vec![0.0; n];
        for k in (0..m).rev() {
            let wk1 = w.values.row(k + 1);
            self.b_step[k].matvec(wk1.as_slice().unwrap(), &mut rhs_vec);
            for i in 0..n {
                rhs_vec[i] += self.dt
                    * (self.theta * rhs.values[[k, i]]
                        + (1.0 - self.theta) * rhs.values[[k + 1, i]]);
            }
            self.a_step[k].solve(&rhs_vec, &mut out).map_err(|e| match e {
                Error::StepSolve { reason, .. } => Error::StepSolve { step: k, reason },
                other => other,
            })?;
            for i in 0..n {
                w.values[[k, i]] = out[i];
            }
        }
        Ok(w)
    }
}
