//! The subspace generalized eigenvalue problem `Hc = ESc`.
//!
//! Sampled overlap matrices can lose positive semi-definiteness, so the solve
//! goes through canonical orthogonalization: eigendecompose S, discard
//! eigenvalues at or below a cutoff, and whiten with the surviving
//! eigenvectors. A real-symmetric fast path is used when both matrices have
//! negligible imaginary parts; the complex Hermitian path handles everything
//! else.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("H is {h_rows}x{h_cols}, S is {s_rows}x{s_cols}; need equal square matrices")]
    ShapeMismatch {
        h_rows: usize,
        h_cols: usize,
        s_rows: usize,
        s_cols: usize,
    },
    #[error("cutoff must be positive, got {0}")]
    BadCutoff(f64),
    #[error("subspace is degenerate: every overlap eigenvalue is below the cutoff {cutoff}")]
    DegenerateSubspace { cutoff: f64 },
    #[error("minimal eigenvalue is degenerate (gap {gap:.3e}); sensitivities are unreliable")]
    DegenerateEigenvalue { gap: f64 },
}

/// Threshold below which matrices are routed to the real-symmetric fast path.
const REAL_PATH_EPS: f64 = 1e-12;

/// Gap below which the minimal eigenvalue counts as degenerate for
/// first-order sensitivities.
pub const SENSITIVITY_GAP_EPS: f64 = 1e-10;

/// One subspace problem instance. Both matrices are Hermitized on
/// construction (`(A + A†)/2`).
#[derive(Clone, Debug)]
pub struct SubspaceProblem {
    h: DMatrix<Complex64>,
    s: DMatrix<Complex64>,
    cutoff: f64,
}

impl SubspaceProblem {
    pub fn new(
        h: DMatrix<Complex64>,
        s: DMatrix<Complex64>,
        cutoff: f64,
    ) -> Result<Self, SolveError> {
        if h.nrows() != h.ncols()
            || s.nrows() != s.ncols()
            || h.nrows() != s.nrows()
            || h.nrows() == 0
        {
            return Err(SolveError::ShapeMismatch {
                h_rows: h.nrows(),
                h_cols: h.ncols(),
                s_rows: s.nrows(),
                s_cols: s.ncols(),
            });
        }
        if !(cutoff > 0.0) {
            return Err(SolveError::BadCutoff(cutoff));
        }
        let h = hermitize(&h);
        let s = hermitize(&s);
        Ok(Self { h, s, cutoff })
    }

    pub fn from_real(
        h: &DMatrix<f64>,
        s: &DMatrix<f64>,
        cutoff: f64,
    ) -> Result<Self, SolveError> {
        let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
        Self::new(to_c(h), to_c(s), cutoff)
    }

    pub fn dimension(&self) -> usize {
        self.h.nrows()
    }

    pub fn cutoff(&self) -> f64 {
        self.cutoff
    }

    pub fn hamiltonian(&self) -> &DMatrix<Complex64> {
        &self.h
    }

    pub fn overlap(&self) -> &DMatrix<Complex64> {
        &self.s
    }
}

fn hermitize(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn is_real(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.im.abs() < REAL_PATH_EPS)
}

/// Ascending Hermitian eigendecomposition with a stable index tie-break.
fn sorted_eigen_complex(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

fn sorted_eigen_real(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .unwrap()
            .then(a.cmp(&b))
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

/// Whitening transform of the overlap matrix: keep eigenvalues above the
/// cutoff and scale their eigenvectors by `s^{-1/2}`, so `X†SX = I_r`.
/// Columns are ordered by descending overlap eigenvalue.
pub fn canonical_orthogonalize(
    s: &DMatrix<Complex64>,
    cutoff: f64,
) -> Result<DMatrix<Complex64>, SolveError> {
    if !(cutoff > 0.0) {
        return Err(SolveError::BadCutoff(cutoff));
    }
    let s = hermitize(s);
    let (values, vectors) = sorted_eigen_complex(&s);
    let m = s.nrows();
    let kept: Vec<usize> = (0..m).rev().filter(|&i| values[i] > cutoff).collect();
    if kept.is_empty() {
        return Err(SolveError::DegenerateSubspace { cutoff });
    }
    let mut x = DMatrix::zeros(m, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        let scale = Complex64::new(1.0 / values[i].sqrt(), 0.0);
        x.set_column(col, &(vectors.column(i) * scale));
    }
    Ok(x)
}

/// Ground solution of the subspace problem.
#[derive(Clone, Debug)]
pub struct SubspaceSolution {
    /// Minimum generalized eigenvalue (hartree).
    pub energy: f64,
    /// Coefficient vector normalized to `c†Sc = 1` in the retained metric.
    pub coeffs: DVector<Complex64>,
    /// Rank kept by canonical orthogonalization.
    pub retained_rank: usize,
    /// Gap to the next retained eigenvalue; infinite for rank 1.
    pub eigenvalue_gap: f64,
}

/// Solve `Hc = ESc` for the minimal eigenvalue via canonical
/// orthogonalization. Ties are broken toward the lowest index.
pub fn solve_gevp(prob: &SubspaceProblem) -> Result<SubspaceSolution, SolveError> {
    if is_real(&prob.h) && is_real(&prob.s) {
        let h = prob.h.map(|z| z.re);
        let s = prob.s.map(|z| z.re);
        let (values, vectors) = sorted_eigen_real(&s);
        let m = s.nrows();
        let kept: Vec<usize> = (0..m).rev().filter(|&i| values[i] > prob.cutoff).collect();
        if kept.is_empty() {
            return Err(SolveError::DegenerateSubspace {
                cutoff: prob.cutoff,
            });
        }
        let mut x = DMatrix::zeros(m, kept.len());
        for (col, &i) in kept.iter().enumerate() {
            x.set_column(col, &(vectors.column(i) / values[i].sqrt()));
        }
        let projected = {
            let xh = x.transpose() * &h * &x;
            (&xh + xh.transpose()).map(|v| v * 0.5)
        };
        let (pvalues, pvectors) = sorted_eigen_real(&projected);
        let coeffs_real = &x * pvectors.column(0);
        let gap = if pvalues.len() > 1 {
            pvalues[1] - pvalues[0]
        } else {
            f64::INFINITY
        };
        return Ok(SubspaceSolution {
            energy: pvalues[0],
            coeffs: coeffs_real.map(|v| Complex64::new(v, 0.0)),
            retained_rank: kept.len(),
            eigenvalue_gap: gap,
        });
    }

    let x = canonical_orthogonalize(&prob.s, prob.cutoff)?;
    let projected = hermitize(&(x.adjoint() * &prob.h * &x));
    let (pvalues, pvectors) = sorted_eigen_complex(&projected);
    let coeffs = &x * pvectors.column(0);
    let gap = if pvalues.len() > 1 {
        pvalues[1] - pvalues[0]
    } else {
        f64::INFINITY
    };
    Ok(SubspaceSolution {
        energy: pvalues[0],
        coeffs: coeffs.into_owned(),
        retained_rank: x.ncols(),
        eigenvalue_gap: gap,
    })
}

/// First-order sensitivities of the ground eigenvalue to the matrix entries,
/// treating `H_ij` and `S_ij` as independent entries: `∂E/∂H_ij = c̄_i c_j`
/// and `∂E/∂S_ij = −E c̄_i c_j` for a solution normalized to `c†Sc = 1`.
///
/// Unreliable (and refused) when the minimal eigenvalue is degenerate.
pub fn energy_sensitivity(
    sol: &SubspaceSolution,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>), SolveError> {
    if sol.eigenvalue_gap <= SENSITIVITY_GAP_EPS {
        return Err(SolveError::DegenerateEigenvalue {
            gap: sol.eigenvalue_gap,
        });
    }
    let m = sol.coeffs.len();
    let mut d_h = DMatrix::zeros(m, m);
    let mut d_s = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            let v = sol.coeffs[i].conj() * sol.coeffs[j];
            d_h[(i, j)] = v;
            d_s[(i, j)] = -Complex64::new(sol.energy, 0.0) * v;
        }
    }
    Ok((d_h, d_s))
}
