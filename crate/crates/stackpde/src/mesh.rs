//! Uniform-grid discretization of the space-time cylinder (0,T) x Omega.
//!
//! Boundary nodes are never stored: the homogeneous Dirichlet condition on
//! the lateral boundary is structural, so a `SpaceField` only carries values
//! at interior nodes. Discrete inner products use the node-weight rectangle
//! rule, which is what makes the transposed step matrices downstream exact
//! discrete adjoints.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

/// One spatial axis of the grid: the open interval (lo, hi) with `n`
/// interior nodes at lo + (i+1)*dx.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub dx: f64,
}

/// Interior-node grid over an open box in 1 or 2 dimensions.
///
/// ```
/// use stackpde::mesh::SpaceGrid;
///
/// let grid = SpaceGrid::new(&[(0.0, 1.0)], &[3]).unwrap();
/// assert_eq!(grid.axis(0).dx, 0.25);
/// assert_eq!(grid.node_1d(1), 0.5);
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceGrid {
    axes: Vec<Axis>,
}

impl SpaceGrid {
    pub fn new(bounds: &[(f64, f64)], n_interior: &[usize]) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 {
            return Err(Error::GridSizing(format!(
                "dimension must be 1 or 2, got {}",
                bounds.len()
            )));
        }
        if bounds.len() != n_interior.len() {
            return Err(Error::GridSizing(
                "bounds and n_interior length mismatch".into(),
            ));
        }
        let mut axes = Vec::with_capacity(bounds.len());
        for (&(lo, hi), &n) in bounds.iter().zip(n_interior) {
            if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::GridSizing(format!(
                    "axis extent ({lo}, {hi}) is not a positive interval"
                )));
            }
            if n == 0 {
                return Err(Error::GridSizing(
                    "need at least one interior node per axis".into(),
                ));
            }
            let dx = (hi - lo) / (n as f64 + 1.0);
            axes.push(Axis { lo, hi, n, dx });
        }
        Ok(Self { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, i: usize) -> &Axis {
        &self.axes[i]
    }

    /// Total interior node count (product over axes).
    pub fn n_nodes(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    /// Quadrature weight per node, prod_i dx_i.
    pub fn cell_weight(&self) -> f64 {
        self.axes.iter().map(|a| a.dx).product()
    }

    /// Coordinate of interior node `i` on a 1D grid.
    pub fn node_1d(&self, i: usize) -> f64 {
        debug_assert_eq!(self.dim(), 1);
        let ax = &self.axes[0];
        ax.lo + (i as f64 + 1.0) * ax.dx
    }

    /// Coordinates of flat node index; row-major over axes.
    pub fn node_coords(&self, flat: usize) -> Vec<f64> {
        match self.dim() {
            1 => vec![self.node_1d(flat)],
            2 => {
                let ny = self.axes[1].n;
                let i = flat / ny;
                let j = flat % ny;
                vec![
                    self.axes[0].lo + (i as f64 + 1.0) * self.axes[0].dx,
                    self.axes[1].lo + (j as f64 + 1.0) * self.axes[1].dx,
                ]
            }
            _ => unreachable!(),
        }
    }
}

/// Uniform time levels t_k = k*dt, k = 0..=steps.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
    pub dt: f64,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::GridSizing(format!("horizon T={horizon} must be > 0")));
        }
        if steps == 0 {
            return Err(Error::GridSizing("need at least one time step".into()));
        }
        Ok(Self {
            horizon,
            steps,
            dt: horizon / steps as f64,
        })
    }

    pub fn level(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn n_levels(&self) -> usize {
        self.steps + 1
    }
}

pub fn build_grid(
    bounds: &[(f64, f64)],
    n_interior: &[usize],
    horizon: f64,
    steps: usize,
) -> Result<(SpaceGrid, TimeGrid)> {
    Ok((SpaceGrid::new(bounds, n_interior)?, TimeGrid::new(horizon, steps)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskLabel {
    U,
    U1,
    U2,
}

impl std::fmt::Display for MaskLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MaskLabel::U => write!(f, "U"),
            MaskLabel::U1 => write!(f, "U1"),
            MaskLabel::U2 => write!(f, "U2"),
        }
    }
}

/// Node indicator realizing the characteristic function of a subdomain.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdomainMask {
    pub label: MaskLabel,
    indicator: Vec<bool>,
    /// Set when the requested box missed the grid entirely.
    pub empty_warning: bool,
}

impl SubdomainMask {
    /// Mask of all nodes strictly inside the open box.
    pub fn from_box(grid: &SpaceGrid, label: MaskLabel, boxb: &[(f64, f64)]) -> Result<Self> {
        if boxb.len() != grid.dim() {
            return Err(Error::ShapeMismatch(format!(
                "box dimension {} vs grid dimension {}",
                boxb.len(),
                grid.dim()
            )));
        }
        let mut indicator = vec![false; grid.n_nodes()];
        for (flat, ind) in indicator.iter_mut().enumerate() {
            let xs = grid.node_coords(flat);
            *ind = xs
                .iter()
                .zip(boxb)
                .all(|(&x, &(lo, hi))| x > lo && x < hi);
        }
        let empty_warning = !indicator.iter().any(|&b| b);
        Ok(Self {
            label,
            indicator,
            empty_warning,
        })
    }

    pub fn full(grid: &SpaceGrid, label: MaskLabel) -> Self {
        Self {
            label,
            indicator: vec![true; grid.n_nodes()],
            empty_warning: false,
        }
    }

    pub fn len(&self) -> usize {
        self.indicator.len()
    }

    pub fn is_empty(&self) -> bool {
        !self.indicator.iter().any(|&b| b)
    }

    pub fn is_set(&self, i: usize) -> bool {
        self.indicator[i]
    }

    pub fn count(&self) -> usize {
        self.indicator.iter().filter(|&&b| b).count()
    }

    pub fn is_disjoint_from(&self, other: &SubdomainMask) -> bool {
        self.indicator
            .iter()
            .zip(&other.indicator)
            .all(|(&a, &b)| !(a && b))
    }

    pub fn is_subset_of(&self, other: &SubdomainMask) -> bool {
        self.indicator
            .iter()
            .zip(&other.indicator)
            .all(|(&a, &b)| !a || b)
    }

    /// chi_A f on a space field.
    pub fn apply_space(&self, f: &SpaceField) -> SpaceField {
        let mut out = f.clone();
        for (i, v) in out.values.iter_mut().enumerate() {
            if !self.indicator[i] {
                *v = 0.0;
            }
        }
        out
    }

    /// chi_A f on a space-time field (every level).
    pub fn apply(&self, f: &SpaceTimeField) -> SpaceTimeField {
        let mut out = f.clone();
        for mut row in out.values.rows_mut() {
            for (i, v) in row.iter_mut().enumerate() {
                if !self.indicator[i] {
                    *v = 0.0;
                }
            }
        }
        out
    }
}

/// Real values at interior nodes; carrier for xi, targets, terminal slices.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceField {
    pub values: Array1<f64>,
}

impl SpaceField {
    pub fn zeros(grid: &SpaceGrid) -> Self {
        Self {
            values: Array1::zeros(grid.n_nodes()),
        }
    }

    pub fn from_fn(grid: &SpaceGrid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = Array1::from_iter((0..grid.n_nodes()).map(|i| f(&grid.node_coords(i))));
        Self { values }
    }

    pub fn from_fn_1d(grid: &SpaceGrid, f: impl Fn(f64) -> f64) -> Self {
        Self::from_fn(grid, |xs| f(xs[0]))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: &self.values * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            values: &self.values - &other.values,
        }
    }
}

/// Real values per (time level, interior node); the unified carrier for
/// y, p, phi, theta, z, q, controls and h.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    /// Shape (M+1, N).
    pub values: Array2<f64>,
}

impl SpaceTimeField {
    pub fn zeros(grid: &SpaceGrid, tg: &TimeGrid) -> Self {
        Self {
            values: Array2::zeros((tg.n_levels(), grid.n_nodes())),
        }
    }

    pub fn from_fn_1d(grid: &SpaceGrid, tg: &TimeGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = Array2::from_shape_fn((tg.n_levels(), grid.n_nodes()), |(k, i)| {
            f(tg.level(k), grid.node_1d(i))
        });
        Self { values }
    }

    pub fn n_levels(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_nodes(&self) -> usize {
        self.values.ncols()
    }

    pub fn level(&self, k: usize) -> SpaceField {
        SpaceField {
            values: self.values.row(k).to_owned(),
        }
    }

    pub fn terminal(&self) -> SpaceField {
        self.level(self.n_levels() - 1)
    }

    pub fn set_level(&mut self, k: usize, f: &SpaceField) {
        self.values.row_mut(k).assign(&f.values);
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            values: &self.values * s,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            values: &self.values - &other.values,
        }
    }
}

fn check_space_shapes(a: &SpaceField, b: &SpaceField) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch(format!(
            "space fields of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

fn check_st_shapes(a: &SpaceTimeField, b: &SpaceTimeField) -> Result<()> {
    if a.values.dim() != b.values.dim() {
        return Err(Error::ShapeMismatch(format!(
            "space-time fields of shape {:?} and {:?}",
            a.values.dim(),
            b.values.dim()
        )));
    }
    Ok(())
}

/// L2(Omega) pairing: sum_i f_i g_i * prod(dx).
pub fn space_inner(grid: &SpaceGrid, a: &SpaceField, b: &SpaceField) -> Result<f64> {
    check_space_shapes(a, b)?;
    Ok(a.values.dot(&b.values) * grid.cell_weight())
}

/// L2(Omega) pairing restricted to a mask: <f, chi_A g>.
pub fn space_inner_masked(
    grid: &SpaceGrid,
    a: &SpaceField,
    b: &SpaceField,
    mask: &SubdomainMask,
) -> Result<f64> {
    check_space_shapes(a, b)?;
    let mut acc = 0.0;
    for i in 0..a.len() {
        if mask.is_set(i) {
            acc += a.values[i] * b.values[i];
        }
    }
    Ok(acc * grid.cell_weight())
}

pub fn space_norm(grid: &SpaceGrid, a: &SpaceField) -> f64 {
    space_inner(grid, a, a).expect("same field").sqrt()
}

/// L2((0,T) x Omega) pairing with weight prod(dx)*dt over all M+1 levels.
pub fn spacetime_inner(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    a: &SpaceTimeField,
    b: &SpaceTimeField,
) -> Result<f64> {
    check_st_shapes(a, b)?;
    let mut acc = 0.0;
    for (ra, rb) in a.values.rows().into_iter().zip(b.values.rows()) {
        acc += ra.dot(&rb);
    }
    Ok(acc * grid.cell_weight() * tg.dt)
}

pub fn spacetime_inner_masked(
    grid: &SpaceGrid,
    tg: &TimeGrid,
    a: &SpaceTimeField,
    b: &SpaceTimeField,
    mask: &SubdomainMask,
) -> Result<f64> {
    check_st_shapes(a, b)?;
    let mut acc = 0.0;
    for (ra, rb) in a.values.rows().into_iter().zip(b.values.rows()) {
        for i in 0..ra.len() {
            if mask.is_set(i) {
                acc += ra[i] * rb[i];
            }
        }
    }
    Ok(acc * grid.cell_weight() * tg.dt)
}

pub fn spacetime_norm(grid: &SpaceGrid, tg: &TimeGrid, a: &SpaceTimeField) -> f64 {
    spacetime_inner(grid, tg, a, a).expect("same field").sqrt()
}
