//! Shared data types: genotype, phenotype and covariate matrices, similarity
//! matrices with their processing state, variant sets and per-set results.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{GsuError, Result};
use crate::ustat::ProjectionContext;

/// Frequencies below this are treated as monomorphic.
pub const MONOMORPHIC_MAF: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantInfo {
    pub id: String,
    pub chromosome: String,
    pub position: u64,
}

impl VariantInfo {
    pub fn new(id: impl Into<String>, chromosome: impl Into<String>, position: u64) -> Self {
        Self {
            id: id.into(),
            chromosome: chromosome.into(),
            position,
        }
    }

    /// Placeholder metadata for `m` variants on one pseudo-chromosome.
    pub fn anonymous(m: usize) -> Vec<Self> {
        (0..m)
            .map(|j| Self::new(format!("v{}", j + 1), "1", j as u64 + 1))
            .collect()
    }
}

/// Subjects-by-variants allele counts, oriented to the minor allele, with
/// missing entries imputed by the column mean.
#[derive(Debug, Clone)]
pub struct GenotypeMatrix {
    values: DMatrix<f64>,
    variants: Vec<VariantInfo>,
    mafs: Vec<f64>,
    monomorphic: Vec<bool>,
    missing_rate: Vec<f64>,
    flipped: Vec<bool>,
}

/// Validate a raw genotype matrix. Missing entries are encoded as `NaN`.
///
/// Non-missing entries must lie in `[0, 2]` so that already-imputed output can
/// be fed back in unchanged. Columns whose coded allele has frequency above 0.5
/// are flipped (`g -> 2 - g`).
pub fn validate_genotypes(raw: DMatrix<f64>, variants: Vec<VariantInfo>) -> Result<GenotypeMatrix> {
    let (n, m) = raw.shape();
    if n < 3 {
        return Err(GsuError::SampleTooSmall { n, min: 3 });
    }
    if m < 1 {
        return Err(GsuError::DimensionMismatch {
            what: "variant count",
            expected: 1,
            found: 0,
        });
    }
    if variants.len() != m {
        return Err(GsuError::DimensionMismatch {
            what: "variant metadata",
            expected: m,
            found: variants.len(),
        });
    }

    let mut values = raw;
    let mut mafs = Vec::with_capacity(m);
    let mut monomorphic = Vec::with_capacity(m);
    let mut missing_rate = Vec::with_capacity(m);
    let mut flipped = Vec::with_capacity(m);

    for j in 0..m {
        let mut sum = 0.0;
        let mut observed = 0usize;
        for i in 0..n {
            let g = values[(i, j)];
            if g.is_nan() {
                continue;
            }
            if !(0.0..=2.0).contains(&g) {
                return Err(GsuError::InvalidGenotype {
                    row: i,
                    col: j,
                    value: g,
                });
            }
            sum += g;
            observed += 1;
        }
        if observed == 0 {
            return Err(GsuError::ColumnUnusable(j));
        }
        let mut mean = sum / observed as f64;
        let flip = mean / 2.0 > 0.5;
        if flip {
            mean = 2.0 - mean;
        }
        for i in 0..n {
            let g = values[(i, j)];
            values[(i, j)] = if g.is_nan() {
                mean
            } else if flip {
                2.0 - g
            } else {
                g
            };
        }
        let maf = mean / 2.0;
        mafs.push(maf);
        monomorphic.push(maf < MONOMORPHIC_MAF);
        missing_rate.push((n - observed) as f64 / n as f64);
        flipped.push(flip);
    }

    Ok(GenotypeMatrix {
        values,
        variants,
        mafs,
        monomorphic,
        missing_rate,
        flipped,
    })
}

impl GenotypeMatrix {
    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_variants(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn variants(&self) -> &[VariantInfo] {
        &self.variants
    }

    pub fn mafs(&self) -> &[f64] {
        &self.mafs
    }

    pub fn is_monomorphic(&self, m: usize) -> bool {
        self.monomorphic[m]
    }

    pub fn monomorphic_count(&self) -> usize {
        self.monomorphic.iter().filter(|&&b| b).count()
    }

    /// Fraction of entries that were missing before imputation.
    pub fn missing_rate(&self, m: usize) -> f64 {
        self.missing_rate[m]
    }

    /// Whether column `m` was re-oriented to the minor allele.
    pub fn was_flipped(&self, m: usize) -> bool {
        self.flipped[m]
    }

    /// Sub-matrix of the given subjects and variants, re-validated so that
    /// frequencies reflect the selected subjects only.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<GenotypeMatrix> {
        let raw = DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.values[(rows[i], cols[j])]);
        let variants = cols.iter().map(|&c| self.variants[c].clone()).collect();
        validate_genotypes(raw, variants)
    }
}

/// Subjects-by-phenotypes real matrix with non-negative variable weights
/// summing to one.
#[derive(Debug, Clone)]
pub struct PhenotypeMatrix {
    values: DMatrix<f64>,
    weights: Vec<f64>,
}

/// Validate a raw phenotype matrix (`NaN` marks a missing value, which is
/// rejected). Absent weights default to `1/L`; supplied weights are
/// renormalised.
pub fn validate_phenotypes(raw: DMatrix<f64>, weights: Option<&[f64]>) -> Result<PhenotypeMatrix> {
    let (n, l) = raw.shape();
    if l == 0 {
        return Err(GsuError::DimensionMismatch {
            what: "phenotype count",
            expected: 1,
            found: 0,
        });
    }
    for j in 0..l {
        for i in 0..n {
            let y = raw[(i, j)];
            if y.is_nan() {
                return Err(GsuError::MissingPhenotype { row: i, col: j });
            }
            if !y.is_finite() {
                return Err(GsuError::InvalidParameter(format!(
                    "non-finite phenotype at row {i}, column {j}"
                )));
            }
        }
    }
    let weights = match weights {
        None => vec![1.0 / l as f64; l],
        Some(w) => {
            if w.len() != l {
                return Err(GsuError::DimensionMismatch {
                    what: "phenotype weights",
                    expected: l,
                    found: w.len(),
                });
            }
            if let Some(bad) = w.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
                return Err(GsuError::BadWeight(format!("weight {bad} is negative or not finite")));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(GsuError::BadWeight("weights sum to zero".into()));
            }
            w.iter().map(|x| x / total).collect()
        }
    };
    Ok(PhenotypeMatrix { values: raw, weights })
}

impl PhenotypeMatrix {
    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_variables(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Same weights, new values. Used by transformations that act column-wise.
    pub(crate) fn with_values(&self, values: DMatrix<f64>) -> PhenotypeMatrix {
        PhenotypeMatrix {
            values,
            weights: self.weights.clone(),
        }
    }
}

/// Design matrix whose first column is the intercept.
#[derive(Debug, Clone)]
pub struct CovariateMatrix {
    values: DMatrix<f64>,
    p_user: usize,
}

impl CovariateMatrix {
    /// Intercept-only design for `n` subjects.
    pub fn intercept_only(n: usize) -> Self {
        Self {
            values: DMatrix::from_element(n, 1, 1.0),
            p_user: 0,
        }
    }

    /// Prepend an intercept column to user covariates and check column rank.
    pub fn with_covariates(user: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = user.shape();
        if user.iter().any(|x| !x.is_finite()) {
            return Err(GsuError::InvalidParameter("covariates must be finite".into()));
        }
        let mut values = DMatrix::from_element(n, p + 1, 1.0);
        values.view_mut((0, 1), (n, p)).copy_from(user);
        if n <= p + 1 {
            return Err(GsuError::SingularDesign);
        }
        let sv = values.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if !(min > 1e-10 * max) {
            return Err(GsuError::SingularDesign);
        }
        Ok(Self { values, p_user: p })
    }

    pub fn n_subjects(&self) -> usize {
        self.values.nrows()
    }

    /// Number of user covariates (intercept excluded).
    pub fn p_user(&self) -> usize {
        self.p_user
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Processing state of a similarity matrix.
#[derive(Debug, Clone)]
pub enum SimilarityState {
    Raw,
    Centered,
    ZeroDiagonal,
    Adjusted(Arc<ProjectionContext>),
}

impl SimilarityState {
    pub fn name(&self) -> &'static str {
        match self {
            SimilarityState::Raw => "raw",
            SimilarityState::Centered => "centered",
            SimilarityState::ZeroDiagonal => "zero_diagonal",
            SimilarityState::Adjusted(_) => "adjusted",
        }
    }
}

/// Square symmetric subject-by-subject similarity matrix.
#[derive(Debug, Clone)]
pub struct SimilarityMatrix {
    values: DMatrix<f64>,
    state: SimilarityState,
}

impl SimilarityMatrix {
    /// Wrap a user-supplied raw similarity matrix, checking shape and symmetry.
    pub fn raw(values: DMatrix<f64>) -> Result<Self> {
        let (r, c) = values.shape();
        if r != c {
            return Err(GsuError::DimensionMismatch {
                what: "similarity matrix columns",
                expected: r,
                found: c,
            });
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(GsuError::InvalidParameter("similarity entries must be finite".into()));
        }
        let scale = values.amax().max(f64::MIN_POSITIVE);
        for i in 0..r {
            for j in (i + 1)..r {
                if (values[(i, j)] - values[(j, i)]).abs() > 1e-10 * scale {
                    return Err(GsuError::InvalidParameter(format!(
                        "similarity matrix not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self {
            values,
            state: SimilarityState::Raw,
        })
    }

    pub(crate) fn from_parts(values: DMatrix<f64>, state: SimilarityState) -> Self {
        Self { values, state }
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn state(&self) -> &SimilarityState {
        &self.state
    }

    pub(crate) fn expect_state(&self, expected: &'static str) -> Result<()> {
        if self.state.name() == expected {
            Ok(())
        } else {
            Err(GsuError::WrongState {
                expected,
                found: self.state.name(),
            })
        }
    }

    /// Same matrix with subjects reordered: entry `(i, j)` becomes
    /// `(perm[i], perm[j])` of the original.
    pub fn permuted(&self, perm: &[usize]) -> SimilarityMatrix {
        let n = self.n();
        assert_eq!(perm.len(), n);
        let values = DMatrix::from_fn(n, n, |i, j| self.values[(perm[i], perm[j])]);
        SimilarityMatrix {
            values,
            state: self.state.clone(),
        }
    }
}

/// A named group of variant columns tested jointly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VariantSet {
    pub name: String,
    pub chromosome: String,
    member_indices: Vec<usize>,
}

impl VariantSet {
    pub fn new(
        name: impl Into<String>,
        chromosome: impl Into<String>,
        member_indices: Vec<usize>,
        n_variants: usize,
    ) -> Result<Self> {
        let name = name.into();
        if member_indices.is_empty() {
            return Err(GsuError::EmptySet(name));
        }
        if member_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(GsuError::InvalidParameter(format!(
                "member indices of set {name} are not strictly increasing"
            )));
        }
        if let Some(&last) = member_indices.last() {
            if last >= n_variants {
                return Err(GsuError::InvalidParameter(format!(
                    "set {name} references variant {last} but only {n_variants} exist"
                )));
            }
        }
        Ok(Self {
            name,
            chromosome: chromosome.into(),
            member_indices,
        })
    }

    /// Every variant of the matrix in one set.
    pub fn all(name: impl Into<String>, g: &GenotypeMatrix) -> Self {
        let chromosome = g.variants().first().map(|v| v.chromosome.clone()).unwrap_or_default();
        Self {
            name: name.into(),
            chromosome,
            member_indices: (0..g.n_variants()).collect(),
        }
    }

    pub fn members(&self) -> &[usize] {
        &self.member_indices
    }

    pub fn len(&self) -> usize {
        self.member_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.member_indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Davies,
    Liu,
    Saddlepoint,
    Permutation,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Method::Davies => "davies",
            Method::Liu => "liu",
            Method::Saddlepoint => "saddlepoint",
            Method::Permutation => "permutation",
        };
        f.write_str(s)
    }
}

/// Outcome of testing one variant set.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub set_name: String,
    pub set_size: usize,
    /// `n` times the adjusted V statistic.
    pub statistic: f64,
    pub u_gamma: f64,
    pub p_value: f64,
    pub method: Method,
    /// Retained eigenvalue counts (genotype side, phenotype side).
    pub n_eigen_kept: (usize, usize),
    pub diagnostics: BTreeMap<String, f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn col(v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn maf_from_counts() {
        let g = validate_genotypes(col(&[0.0, 0.0, 1.0, 1.0]), VariantInfo::anonymous(1)).unwrap();
        assert!((g.mafs()[0] - 0.25).abs() < 1e-15);
        assert!(!g.is_monomorphic(0));
    }

    #[test]
    fn all_twos_flip_to_monomorphic() {
        let g = validate_genotypes(col(&[2.0; 4]), VariantInfo::anonymous(1)).unwrap();
        assert_eq!(g.mafs()[0], 0.0);
        assert!(g.is_monomorphic(0));
        assert!(g.was_flipped(0));
        assert!(g.values().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn missing_imputed_by_observed_mean() {
        let g = validate_genotypes(col(&[0.0, f64::NAN, 2.0, 0.0]), VariantInfo::anonymous(1)).unwrap();
        // observed mean of (0, 2, 0)
        let oracle = (0.0 + 2.0 + 0.0) / 3.0;
        assert!((g.values()[(1, 0)] - oracle).abs() < 1e-15);
        assert!((g.mafs()[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((g.missing_rate(0) - 0.25).abs() < 1e-15);
        let recomputed = g.values().column(0).sum() / 8.0;
        assert!((recomputed - g.mafs()[0]).abs() < 1e-12);
    }

    #[test]
    fn genotype_errors() {
        let small = DMatrix::from_element(2, 1, 0.0);
        assert!(matches!(
            validate_genotypes(small, VariantInfo::anonymous(1)),
            Err(GsuError::SampleTooSmall { n: 2, .. })
        ));
        let mut m = DMatrix::from_element(3, 2, 1.0);
        m.column_mut(1).fill(f64::NAN);
        assert!(matches!(
            validate_genotypes(m, VariantInfo::anonymous(2)),
            Err(GsuError::ColumnUnusable(1))
        ));
        assert!(matches!(
            validate_genotypes(col(&[0.0, 3.0, 1.0]), VariantInfo::anonymous(1)),
            Err(GsuError::InvalidGenotype { row: 1, .. })
        ));
    }

    #[test]
    fn orientation_is_idempotent() {
        let raw = DMatrix::from_row_slice(4, 3, &[2.0, 0.0, 1.0, 2.0, f64::NAN, 2.0, 1.0, 1.0, 2.0, 2.0, 0.0, 2.0]);
        let once = validate_genotypes(raw, VariantInfo::anonymous(3)).unwrap();
        let twice = validate_genotypes(once.values().clone(), once.variants().to_vec()).unwrap();
        assert_eq!(once.values(), twice.values());
        assert_eq!(once.mafs(), twice.mafs());
    }

    #[test]
    fn phenotype_weights() {
        let y = DMatrix::from_element(3, 4, 1.0);
        let p = validate_phenotypes(y, None).unwrap();
        assert_eq!(p.weights(), &[0.25; 4]);

        let y = DMatrix::from_element(3, 2, 1.0);
        let p = validate_phenotypes(y.clone(), Some(&[2.0, 2.0])).unwrap();
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert!(matches!(
            validate_phenotypes(y, Some(&[1.0, -1.0])),
            Err(GsuError::BadWeight(_))
        ));
    }

    #[test]
    fn missing_phenotype_rejected() {
        let mut y = DMatrix::from_element(3, 2, 1.0);
        y[(2, 1)] = f64::NAN;
        assert!(matches!(
            validate_phenotypes(y, None),
            Err(GsuError::MissingPhenotype { row: 2, col: 1 })
        ));
    }

    #[test]
    fn covariates_get_intercept_and_rank_check() {
        let x = DMatrix::from_column_slice(4, 1, &[1.0, 2.0, 3.0, 5.0]);
        let c = CovariateMatrix::with_covariates(&x).unwrap();
        assert_eq!(c.p_user(), 1);
        assert!(c.values().column(0).iter().all(|&v| v == 1.0));
        let constant = DMatrix::from_element(4, 1, 3.0);
        assert!(matches!(
            CovariateMatrix::with_covariates(&constant),
            Err(GsuError::SingularDesign)
        ));
    }

    #[test]
    fn variant_set_checks() {
        assert!(VariantSet::new("a", "1", vec![0, 2], 3).is_ok());
        assert!(VariantSet::new("a", "1", vec![], 3).is_err());
        assert!(VariantSet::new("a", "1", vec![2, 1], 3).is_err());
        assert!(VariantSet::new("a", "1", vec![0, 3], 3).is_err());
    }
}
