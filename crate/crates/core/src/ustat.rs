//! Centering, diagonal removal and covariate projection of similarity
//! matrices, and the statistics built from them.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GsuError, Result};
use crate::model::{CovariateMatrix, SimilarityMatrix, SimilarityState};

/// Projection onto the orthogonal complement of the covariate columns.
#[derive(Debug, Clone)]
pub struct ProjectionContext {
    hat_complement: DMatrix<f64>,
    basis: DMatrix<f64>,
    design: DMatrix<f64>,
    p_user: usize,
    n: usize,
}

impl ProjectionContext {
    pub fn new(x: &CovariateMatrix) -> Result<Arc<Self>> {
        let design = x.values().clone();
        let (n, k) = design.shape();
        if n <= k {
            return Err(GsuError::SingularDesign);
        }
        let qr = design.clone().qr();
        let r = qr.r();
        let rmax = r.diagonal().amax();
        if r.diagonal().iter().any(|d| d.abs() <= 1e-10 * rmax) {
            return Err(GsuError::SingularDesign);
        }
        let basis = qr.q();
        let hat_complement = DMatrix::identity(n, n) - &basis * basis.transpose();
        Ok(Arc::new(Self {
            hat_complement,
            basis,
            design,
            p_user: x.p_user(),
            n,
        }))
    }

    pub fn intercept_only(n: usize) -> Result<Arc<Self>> {
        Self::new(&CovariateMatrix::intercept_only(n))
    }

    /// `I - X (X'X)^{-1} X'`.
    pub fn hat_complement(&self) -> &DMatrix<f64> {
        &self.hat_complement
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.design
    }

    pub fn p_user(&self) -> usize {
        self.p_user
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `P S P` for symmetric `S`, using the orthonormal basis `Q` of the
    /// design: `S - Q A' - A Q' + Q (Q'A) Q'` with `A = S Q`.
    fn project(&self, s: &DMatrix<f64>) -> DMatrix<f64> {
        let q = &self.basis;
        let a = s * q;
        let b = q.transpose() * &a;
        let qa = q * a.transpose();
        let mut out = s - &qa - qa.transpose() + q * b * q.transpose();
        symmetrize(&mut out);
        out
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// `(I - J) S (I - J)` with `J` the all-`1/n` matrix.
pub fn center_similarity(s: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    s.expect_state("raw")?;
    Ok(SimilarityMatrix::from_parts(
        double_center(s.values()),
        SimilarityState::Centered,
    ))
}

pub(crate) fn double_center(s: &DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    let nf = n as f64;
    let means: Vec<f64> = (0..n).map(|i| s.row(i).sum() / nf).collect();
    let grand = means.iter().sum::<f64>() / nf;
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = s[(i, j)] - means[i] - means[j] + grand;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

pub fn zero_diagonal(s: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    s.expect_state("centered")?;
    let mut v = s.values().clone();
    v.fill_diagonal(0.0);
    Ok(SimilarityMatrix::from_parts(v, SimilarityState::ZeroDiagonal))
}

/// Two-sided projection of a zero-diagonal centered matrix.
pub fn covariate_adjust(s: &SimilarityMatrix, ctx: &Arc<ProjectionContext>) -> Result<SimilarityMatrix> {
    s.expect_state("zero_diagonal")?;
    if s.n() != ctx.n() {
        return Err(GsuError::DimensionMismatch {
            what: "projection size",
            expected: ctx.n(),
            found: s.n(),
        });
    }
    Ok(SimilarityMatrix::from_parts(
        ctx.project(s.values()),
        SimilarityState::Adjusted(Arc::clone(ctx)),
    ))
}

/// Raw -> centered -> zero-diagonal -> adjusted in one step. Returns the
/// centered and adjusted matrices.
pub fn prepare(s: &SimilarityMatrix, ctx: &Arc<ProjectionContext>) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    let centered = center_similarity(s)?;
    let adjusted = covariate_adjust(&zero_diagonal(&centered)?, ctx)?;
    Ok((centered, adjusted))
}

fn expect_centered(s: &SimilarityMatrix) -> Result<()> {
    match s.state() {
        SimilarityState::Centered | SimilarityState::ZeroDiagonal => Ok(()),
        other => Err(GsuError::WrongState {
            expected: "centered",
            found: other.name(),
        }),
    }
}

fn same_size(k: &SimilarityMatrix, s: &SimilarityMatrix) -> Result<usize> {
    if k.n() != s.n() {
        return Err(GsuError::DimensionMismatch {
            what: "similarity matrix size",
            expected: k.n(),
            found: s.n(),
        });
    }
    Ok(k.n())
}

/// Sum of `a_ij b_ij` over `i != j`.
pub(crate) fn off_diagonal_dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for j in 0..n {
        let ca = a.column(j);
        let cb = b.column(j);
        let mut col = 0.0;
        for i in 0..n {
            if i != j {
                col += ca[i] * cb[i];
            }
        }
        total += col;
    }
    total
}

/// `U = (1 / (n (n - 1))) sum_{i != j} K_ij S_ij` on centered matrices.
pub fn gsu_statistic(k: &SimilarityMatrix, s: &SimilarityMatrix) -> Result<f64> {
    expect_centered(k)?;
    expect_centered(s)?;
    let n = same_size(k, s)?;
    if n < 2 {
        return Err(GsuError::SampleTooSmall { n, min: 2 });
    }
    Ok(off_diagonal_dot(k.values(), s.values()) / (n as f64 * (n as f64 - 1.0)))
}

/// `V = (1 / n^2) sum_{i, j} K_ij S_ij` on adjusted matrices sharing one
/// projection.
pub fn adjusted_v_statistic(k: &SimilarityMatrix, s: &SimilarityMatrix) -> Result<f64> {
    let (ck, cs) = match (k.state(), s.state()) {
        (SimilarityState::Adjusted(a), SimilarityState::Adjusted(b)) => (a, b),
        (SimilarityState::Adjusted(_), other) | (other, _) => {
            return Err(GsuError::WrongState {
                expected: "adjusted",
                found: other.name(),
            })
        }
    };
    if !Arc::ptr_eq(ck, cs) {
        return Err(GsuError::ContextMismatch);
    }
    let n = same_size(k, s)? as f64;
    Ok(k.values().dot(s.values()) / (n * n))
}

/// Scale-free correlation of the off-diagonal centered similarities.
pub fn gsu_correlation(k: &SimilarityMatrix, s: &SimilarityMatrix) -> Result<f64> {
    expect_centered(k)?;
    expect_centered(s)?;
    same_size(k, s)?;
    let kk = off_diagonal_dot(k.values(), k.values());
    let ss = off_diagonal_dot(s.values(), s.values());
    if kk <= 0.0 || ss <= 0.0 {
        return Err(GsuError::UndefinedCorrelation);
    }
    let r = off_diagonal_dot(k.values(), s.values()) / (kk * ss).sqrt();
    Ok(r.clamp(-1.0, 1.0))
}
