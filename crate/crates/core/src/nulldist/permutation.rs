//! Permutation null for the unadjusted statistic.
//!
//! Replicate `b` draws its permutation from a ChaCha stream keyed by
//! `(seed, b)`, so the p-value does not depend on how replicates are spread
//! over threads.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{GsuError, Result};
use crate::model::{SimilarityMatrix, SimilarityState};
use crate::ustat::{center_similarity, off_diagonal_dot};

/// Random stream for replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy)]
pub struct PermutationOutcome {
    pub p_value: f64,
    pub exceed: usize,
    pub permutations: usize,
    /// Observed unadjusted statistic.
    pub u_observed: f64,
}

fn centered_values(s: &SimilarityMatrix) -> Result<nalgebra::DMatrix<f64>> {
    match s.state() {
        SimilarityState::Raw => Ok(center_similarity(s)?.into_values()),
        SimilarityState::Centered | SimilarityState::ZeroDiagonal => Ok(s.values().clone()),
        other => Err(GsuError::WrongState {
            expected: "raw or centered",
            found: other.name(),
        }),
    }
}

/// `(1 + #{U_b >= U_obs}) / (B + 1)` with genotype-side subjects permuted.
pub fn permutation_pvalue(
    k: &SimilarityMatrix,
    s: &SimilarityMatrix,
    permutations: usize,
    seed: u64,
) -> Result<PermutationOutcome> {
    if permutations < 100 {
        return Err(GsuError::InvalidParameter(format!(
            "at least 100 permutations required, got {permutations}"
        )));
    }
    let kc = centered_values(k)?;
    let sc = centered_values(s)?;
    let n = kc.nrows();
    if sc.nrows() != n {
        return Err(GsuError::DimensionMismatch {
            what: "similarity matrix size",
            expected: n,
            found: sc.nrows(),
        });
    }
    if n < 2 {
        return Err(GsuError::SampleTooSmall { n, min: 2 });
    }
    let observed = off_diagonal_dot(&kc, &sc);
    let bound = (off_diagonal_dot(&kc, &kc) * off_diagonal_dot(&sc, &sc)).sqrt();
    let tie = 1e-12 * bound;

    let exceed: usize = (0..permutations)
        .into_par_iter()
        .map(|b| {
            let mut rng = replicate_rng(seed, b as u64);
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut total = 0.0;
            for j in 0..n {
                let pj = perm[j];
                let kcol = kc.column(pj);
                let scol = sc.column(j);
                let mut col = 0.0;
                for i in 0..n {
                    if i != j {
                        col += kcol[perm[i]] * scol[i];
                    }
                }
                total += col;
            }
            usize::from(total >= observed - tie)
        })
        .sum();

    Ok(PermutationOutcome {
        p_value: (1 + exceed) as f64 / (permutations + 1) as f64,
        exceed,
        permutations,
        u_observed: observed / (n as f64 * (n as f64 - 1.0)),
    })
}
