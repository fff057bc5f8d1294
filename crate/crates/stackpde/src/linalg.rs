//! Small dense kernels: tridiagonal systems and matrix-free CG.

use ndarray::Array1;

use crate::error::{Error, Result};

/// Tridiagonal N x N matrix. `sub[i]` couples row i to column i-1 (sub[0]
/// unused), `sup[i]` couples row i to column i+1 (sup[n-1] unused).
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn zeros(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![0.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            sub: vec![0.0; n],
            diag: vec![1.0; n],
            sup: vec![0.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    /// I + s*G, entrywise.
    pub fn identity_plus_scaled(&self, s: f64) -> Tridiag {
        let n = self.n();
        let mut out = Tridiag::zeros(n);
        for i in 0..n {
            out.sub[i] = s * self.sub[i];
            out.diag[i] = 1.0 + s * self.diag[i];
            out.sup[i] = s * self.sup[i];
        }
        out
    }

    pub fn matvec(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sub[i] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sup[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// G^T x; the transpose of a tridiagonal swaps sub and sup bands.
    pub fn matvec_t(&self, x: &[f64], out: &mut [f64]) {
        let n = self.n();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.sup[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.sub[i + 1] * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// Thomas algorithm; errors on a vanishing pivot.
    pub fn solve(&self, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        thomas(&self.sub, &self.diag, &self.sup, rhs, out)
    }

    /// Solve G^T x = rhs.
    pub fn solve_t(&self, rhs: &[f64], out: &mut [f64]) -> Result<()> {
        let n = self.n();
        // bands of the transpose
        let sub_t: Vec<f64> = (0..n)
            .map(|i| if i > 0 { self.sup[i - 1] } else { 0.0 })
            .collect();
        let sup_t: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { self.sub[i + 1] } else { 0.0 })
            .collect();
        thomas(&sub_t, &self.diag, &sup_t, rhs, out)
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64], out: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 {
        return Err(Error::StepSolve {
            step: 0,
            reason: "zero pivot in tridiagonal solve".into(),
        });
    }
    c[0] = sup[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - sub[i] * c[i - 1];
        if pivot == 0.0 {
            return Err(Error::StepSolve {
                step: i,
                reason: "zero pivot in tridiagonal solve".into(),
            });
        }
        if i + 1 < n {
            c[i] = sup[i] / pivot;
        }
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / pivot;
    }
    out[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    Ok(())
}

/// Outcome of a matrix-free CG run.
pub struct CgOutcome {
    pub x: Array1<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

/// CG on a symmetric positive definite operator. `tol` is relative to the
/// right-hand side norm. `on_iterate` sees every accepted iterate, the
/// initial zero guess included.
pub fn conjugate_gradient(
    mut apply: impl FnMut(&Array1<f64>) -> Array1<f64>,
    b: &Array1<f64>,
    tol: f64,
    max_iters: usize,
    mut on_iterate: impl FnMut(&Array1<f64>),
) -> CgOutcome {
    let n = b.len();
    let mut x = Array1::<f64>::zeros(n);
    on_iterate(&x);
    let b_norm = b.dot(b).sqrt();
    if b_norm == 0.0 {
        return CgOutcome {
            x,
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.dot(&r);
    let target = tol * b_norm;
    let mut iterations = 0;
    while rs.sqrt() > target && iterations < max_iters {
        let ap = apply(&p);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break; // loss of positive definiteness at round-off level
        }
        let alpha = rs / pap;
        x.scaled_add(alpha, &p);
        r.scaled_add(-alpha, &ap);
        let rs_new = r.dot(&r);
        let beta = rs_new / rs;
        p = &r + &(p * beta);
        rs = rs_new;
        iterations += 1;
        on_iterate(&x);
    }
    let residual = rs.sqrt() / b_norm;
    CgOutcome {
        x,
        iterations,
        residual,
        converged: residual <= tol,
    }
}

/// Pairwise (cascade) summation; deterministic and more accurate than a
/// running sum for long statistical reductions.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}
