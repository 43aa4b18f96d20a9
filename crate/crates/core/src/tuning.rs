//! Tuning-parameter selection and evaluation metrics: off-diagonal MSE,
//! edge-classification scores, grid search against synthetic truth, and
//! eBIC for data without ground truth.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::EdgeSet;
use crate::hermitian::HermitianMatrix;
use crate::periodogram::SpectralMatrix;
use crate::rse::{self, RseConfig, RseResult};

/// Selection criterion for synthetic-truth grid search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Mse,
    F1,
}

impl std::str::FromStr for Criterion {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mse" => Ok(Criterion::Mse),
            "f1" => Ok(Criterion::F1),
            other => Err(Error::InvalidArgument(format!(
                "unknown criterion '{other}'"
            ))),
        }
    }
}

/// Single-replicate mean squared error over strict off-diagonal entries:
/// `(2 / (p (p-1))) sum_{q<r} |A_qr - B_qr|^2`. Complex differences enter
/// through their squared modulus. Returns zero for `p < 2`.
pub fn mse(theta_hat: &HermitianMatrix, theta_true: &HermitianMatrix) -> Result<f64> {
    if theta_hat.dim() != theta_true.dim() {
        return Err(Error::ShapeMismatch(format!(
            "dims {} vs {}",
            theta_hat.dim(),
            theta_true.dim()
        )));
    }
    let p = theta_hat.dim();
    if p < 2 {
        return Ok(0.0);
    }
    let sum: f64 = theta_hat
        .upper_triangle()
        .iter()
        .zip(theta_true.upper_triangle())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum();
    Ok(2.0 * sum / (p as f64 * (p as f64 - 1.0)))
}

/// Edge-classification scores against a ground-truth edge set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub f1: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

/// `F1 = TP / (TP + (FP + FN) / 2)`, `TPR = TP / |true|`,
/// `FPR = FP / (p(p-1)/2 - |true|)`.
///
/// Empty-denominator conventions: with no true edges the recall is vacuous
/// (`TPR = 1`); with both sets empty `F1 = 1`; with every pair a true edge
/// `FPR = 0`.
pub fn classification_scores(est: &EdgeSet, truth: &EdgeSet, p: usize) -> Scores {
    let tp = est.intersection(truth).count();
    let fp = est.difference(truth).count();
    let fn_ = truth.difference(est).count();
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        tp as f64 / (tp as f64 + 0.5 * (fp + fn_) as f64)
    };
    let tpr = if truth.is_empty() {
        1.0
    } else {
        tp as f64 / truth.len() as f64
    };
    let negatives = p * (p - 1) / 2 - truth.len();
    let fpr = if negatives == 0 {
        0.0
    } else {
        fp as f64 / negatives as f64
    };
    Scores {
        f1,
        tpr,
        fpr,
        tp,
        fp,
        fn_,
    }
}

/// Ground truth handed to the grid search.
pub struct Truth<'a> {
    pub theta: &'a HermitianMatrix,
    pub edges: &'a EdgeSet,
}

/// Scores of one `(replicate, lambda)` fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub lambda: f64,
    pub mse: f64,
    pub f1: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Outcome of the training grid search.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridSelection {
    pub lambda_star: f64,
    pub criterion: Criterion,
    pub per_replicate_optimum: Vec<f64>,
    /// `scores[replicate][grid index]`.
    pub scores: Vec<Vec<GridCell>>,
}

/// Fit every training periodogram at every grid point, pick the
/// per-replicate optimum (min MSE or max F1, ties to the smaller lambda),
/// and average the optima into `lambda_star`.
pub fn grid_select(
    training: &[SpectralMatrix],
    grid: &[f64],
    criterion: Criterion,
    truth: &Truth<'_>,
    base_config: &RseConfig,
) -> Result<GridSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    if training.is_empty() {
        return Err(Error::InvalidArgument("no training replicates".into()));
    }
    let mut per_replicate = Vec::with_capacity(training.len());
    let mut all_scores = Vec::with_capacity(training.len());
    for s_hat in training {
        let mut cells = Vec::with_capacity(grid.len());
        for &lambda in grid {
            let mut cfg = base_config.clone();
            cfg.lambda = lambda;
            let fit = rse::estimate(s_hat, &cfg)?;
            let est_edges: EdgeSet = fit
                .theta
                .upper_entries()
                .filter(|(_, _, z)| z.norm() > 0.0)
                .map(|(q, r, _)| (q, r))
                .collect();
            let scores = classification_scores(&est_edges, truth.edges, s_hat.p());
            cells.push(GridCell {
                lambda,
                mse: mse(&fit.theta, truth.theta)?,
                f1: scores.f1,
                tpr: scores.tpr,
                fpr: scores.fpr,
            });
        }
        let best = match criterion {
            Criterion::Mse => cells
                .iter()
                .fold(None::<&GridCell>, |best, c| match best {
                    Some(b) if c.mse < b.mse => Some(c),
                    Some(b) => Some(b),
                    None => Some(c),
                })
                .unwrap(),
            Criterion::F1 => cells
                .iter()
                .fold(None::<&GridCell>, |best, c| match best {
                    Some(b) if c.f1 > b.f1 => Some(c),
                    Some(b) => Some(b),
                    None => Some(c),
                })
                .unwrap(),
        };
        per_replicate.push(best.lambda);
        all_scores.push(cells);
    }
    let lambda_star = per_replicate.iter().sum::<f64>() / per_replicate.len() as f64;
    Ok(GridSelection {
        lambda_star,
        criterion,
        per_replicate_optimum: per_replicate,
        scores: all_scores,
    })
}

/// Degrees of freedom of a sparse estimate: nonzero upper-triangle entries,
/// optionally counting the diagonal (the default).
pub fn degrees_of_freedom(theta: &HermitianMatrix, count_diagonal: bool) -> usize {
    let off = theta
        .upper_entries()
        .filter(|(_, _, z)| z.norm() > 0.0)
        .count();
    let diag = if count_diagonal {
        theta.diagonal().iter().filter(|d| **d != 0.0).count()
    } else {
        0
    };
    off + diag
}

/// Extended BIC of a fit on `s_hat`:
/// `2 m_eff nll + df log(m_eff) + 4 gamma df log(p)` with `df` the nonzero
/// upper-triangle count including the diagonal.
pub fn ebic(
    result: &RseResult,
    s_hat: &SpectralMatrix,
    m_eff: usize,
    p: usize,
    gamma: f64,
) -> Result<f64> {
    if m_eff < 1 {
        return Err(Error::InvalidArgument("m_eff must be >= 1".into()));
    }
    let nll = rse::whittle_nll(&result.theta, s_hat)?;
    let df = degrees_of_freedom(&result.theta, true) as f64;
    Ok(2.0 * m_eff as f64 * nll + df * (m_eff as f64).ln() + 4.0 * gamma * df * (p as f64).ln())
}

/// One lasso-path entry scored by eBIC.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EbicCell {
    pub lambda: f64,
    pub ebic: f64,
    pub df: usize,
    pub converged: bool,
}

/// Fit a lasso path over `grid` and select the eBIC-minimising lambda
/// (ties resolved toward the larger lambda). Returns the winning fit and
/// the full path.
pub fn ebic_select(
    s_hat: &SpectralMatrix,
    grid: &[f64],
    m_eff: usize,
    gamma: f64,
    base_config: &RseConfig,
) -> Result<(RseResult, Vec<EbicCell>)> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty lambda grid".into()));
    }
    let mut sorted = grid.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best: Option<(f64, RseResult)> = None;
    let mut path = Vec::with_capacity(sorted.len());
    for &lambda in &sorted {
        let mut cfg = base_config.clone();
        cfg.lambda = lambda;
        cfg.penalty = crate::rse::Penalty::Lasso;
        let fit = rse::lasso_admm(s_hat, &cfg)?;
        let score = ebic(&fit, s_hat, m_eff, s_hat.p(), gamma)?;
        path.push(EbicCell {
            lambda,
            ebic: score,
            df: degrees_of_freedom(&fit.theta, true),
            converged: fit.converged,
        });
        // ascending scan with <= keeps the largest lambda among ties
        let replace = match &best {
            Some((s, _)) => score <= *s,
            None => true,
        };
        if replace {
            best = Some((score, fit));
        }
    }
    Ok((best.unwrap().1, path))
}

/// Default search grid: `points` log-spaced values spanning
/// `[1e-3, 10] * s_max` where `s_max = max_q S_qq`.
pub fn default_lambda_grid(s_max: f64, points: usize) -> Vec<f64> {
    let lo = 1e-3 * s_max;
    let hi = 10.0 * s_max;
    (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points.max(2) - 1) as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::periodogram::FrequencyTag;
    use approx::assert_relative_eq;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn mse_identical_is_zero() {
        let a = HermitianMatrix::identity(4);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mse_single_error_formula() {
        let a = HermitianMatrix::from_parts(vec![1.0, 1.0], vec![c(3.0, 0.0)]).unwrap();
        let b = HermitianMatrix::from_parts(vec![1.0, 1.0], vec![c(0.0, 0.0)]).unwrap();
        assert_relative_eq!(mse(&a, &b).unwrap(), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn mse_ignores_diagonal() {
        let a = HermitianMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = HermitianMatrix::from_diagonal(&[5.0, -3.0]).unwrap();
        assert_eq!(mse(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn mse_dim_mismatch() {
        let a = HermitianMatrix::identity(2);
        let b = HermitianMatrix::identity(3);
        assert!(mse(&a, &b).is_err());
    }

    fn random_herm(p: usize, seed: u64) -> HermitianMatrix {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let diag: Vec<f64> = (0..p).map(|_| rng.gen::<f64>()).collect();
        let upper = (0..p * (p - 1) / 2)
            .map(|_| c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        HermitianMatrix::from_parts(diag, upper).unwrap()
    }

    #[test]
    fn mse_symmetric_and_quasi_triangle() {
        for seed in 0..20u64 {
            let a = random_herm(4, 3 * seed);
            let b = random_herm(4, 3 * seed + 1);
            let d = random_herm(4, 3 * seed + 2);
            assert_relative_eq!(mse(&a, &b).unwrap(), mse(&b, &a).unwrap());
            let ac = mse(&a, &d).unwrap();
            let ab = mse(&a, &b).unwrap();
            let bd = mse(&b, &d).unwrap();
            assert!(ac <= 2.0 * (ab + bd) + 1e-12);
        }
    }

    #[test]
    fn classification_score_examples() {
        let truth: EdgeSet = [(0, 1), (1, 2)].into();
        let s = classification_scores(&truth.clone(), &truth, 4);
        assert_eq!((s.f1, s.tpr, s.fpr), (1.0, 1.0, 0.0));

        let s = classification_scores(&EdgeSet::new(), &truth, 4);
        assert_eq!(s.f1, 0.0);

        // TP=3, FP=1, FN=1 -> F1 = 3/4
        let truth: EdgeSet = [(0, 1), (0, 2), (0, 3), (1, 2)].into();
        let est: EdgeSet = [(0, 1), (0, 2), (0, 3), (2, 3)].into();
        let s = classification_scores(&est, &truth, 5);
        assert_relative_eq!(s.f1, 0.75);
        assert_relative_eq!(s.tpr, 0.75);
        assert_relative_eq!(s.fpr, 1.0 / 6.0);
    }

    #[test]
    fn classification_empty_conventions() {
        let empty = EdgeSet::new();
        let s = classification_scores(&empty, &empty, 3);
        assert_eq!((s.f1, s.tpr, s.fpr), (1.0, 1.0, 0.0));
    }

    #[test]
    fn classification_permutation_invariant() {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
        let p = 6;
        for _ in 0..20 {
            let mut perm: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                let j = rng.gen_range(0..=i);
                perm.swap(i, j);
            }
            let relabel = |e: &EdgeSet| -> EdgeSet {
                e.iter()
                    .map(|&(q, r)| {
                        let (a, b) = (perm[q], perm[r]);
                        (a.min(b), a.max(b))
                    })
                    .collect()
            };
            let truth: EdgeSet = [(0, 1), (2, 4), (3, 5)].into();
            let est: EdgeSet = [(0, 1), (1, 2), (3, 5)].into();
            let s1 = classification_scores(&est, &truth, p);
            let s2 = classification_scores(&relabel(&est), &relabel(&truth), p);
            assert_eq!(s1, s2);
        }
    }

    fn random_pd_spectral(p: usize, seed: u64) -> SpectralMatrix {
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let b = nalgebra::DMatrix::from_fn(p, p, |_, _| {
            c(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let dense = &b * b.adjoint() * Complex64::from(1.0 / p as f64)
            + nalgebra::DMatrix::identity(p, p).map(|v: Complex64| v * 0.3);
        SpectralMatrix::from_estimate(
            FrequencyTag::Single(0.1),
            HermitianMatrix::from_dense(&dense).unwrap(),
            100,
        )
        .unwrap()
    }

    #[test]
    fn grid_select_single_cell() {
        let s = random_pd_spectral(3, 1);
        let truth_theta = s.matrix().inverse_pd().unwrap();
        let truth_edges: EdgeSet = [(0, 1), (0, 2), (1, 2)].into();
        let cfg = RseConfig::lasso(0.1).unwrap();
        let sel = grid_select(
            &[s],
            &[0.25],
            Criterion::Mse,
            &Truth {
                theta: &truth_theta,
                edges: &truth_edges,
            },
            &cfg,
        )
        .unwrap();
        assert_eq!(sel.lambda_star, 0.25);
    }

    #[test]
    fn grid_select_averages_per_replicate_optima() {
        // two inputs engineered so MSE prefers different grid ends, then
        // lambda* is the arithmetic mean
        let s1 = random_pd_spectral(3, 11);
        let s2 = random_pd_spectral(3, 12);
        let truth_theta = s1.matrix().inverse_pd().unwrap();
        let truth_edges: EdgeSet = [(0, 1), (0, 2), (1, 2)].into();
        let cfg = RseConfig::lasso(0.1).unwrap();
        let sel = grid_select(
            &[s1, s2.clone()],
            &[1e-4, 1e-3],
            Criterion::Mse,
            &Truth {
                theta: &truth_theta,
                edges: &truth_edges,
            },
            &cfg,
        )
        .unwrap();
        let mean = sel.per_replicate_optimum.iter().sum::<f64>() / 2.0;
        assert_relative_eq!(sel.lambda_star, mean);
    }

    #[test]
    fn grid_select_f1_empty_truth_prefers_smallest_full_shrinkage() {
        let s = random_pd_spectral(3, 21);
        let truth_theta = HermitianMatrix::identity(3);
        let truth_edges = EdgeSet::new();
        let smax = s.matrix().diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
        let grid = vec![1e-3 * smax, 0.1 * smax, 20.0 * smax, 40.0 * smax];
        let cfg = RseConfig::lasso(0.1).unwrap();
        let sel = grid_select(
            &[s.clone()],
            &grid,
            Criterion::F1,
            &Truth {
                theta: &truth_theta,
                edges: &truth_edges,
            },
            &cfg,
        )
        .unwrap();
        // both huge lambdas reach F1 = 1; the tie breaks to the smaller
        let mut cfg20 = cfg.clone();
        cfg20.lambda = 20.0 * smax;
        let fit = rse::lasso_admm(&s, &cfg20).unwrap();
        let empty = fit
            .theta
            .upper_entries()
            .all(|(_, _, z)| z.norm() == 0.0);
        assert!(empty);
        assert_relative_eq!(sel.lambda_star, 20.0 * smax);
    }

    #[test]
    fn grid_select_rejects_empty_grid() {
        let s = random_pd_spectral(2, 31);
        let theta = HermitianMatrix::identity(2);
        let edges = EdgeSet::new();
        let cfg = RseConfig::lasso(0.1).unwrap();
        assert!(grid_select(
            &[s],
            &[],
            Criterion::Mse,
            &Truth {
                theta: &theta,
                edges: &edges
            },
            &cfg,
        )
        .is_err());
    }

    #[test]
    fn ebic_gamma_zero_is_bic() {
        let s = random_pd_spectral(3, 41);
        let cfg = RseConfig::lasso(0.1).unwrap();
        let fit = rse::lasso_admm(&s, &cfg).unwrap();
        let m_eff = 50;
        let e0 = ebic(&fit, &s, m_eff, 3, 0.0).unwrap();
        let nll = rse::whittle_nll(&fit.theta, &s).unwrap();
        let df = degrees_of_freedom(&fit.theta, true) as f64;
        assert_relative_eq!(
            e0,
            2.0 * m_eff as f64 * nll + df * (m_eff as f64).ln(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn ebic_rejects_zero_meff() {
        let s = random_pd_spectral(2, 43);
        let fit = rse::lasso_admm(&s, &RseConfig::lasso(0.1).unwrap()).unwrap();
        assert!(ebic(&fit, &s, 0, 2, 0.5).is_err());
    }

    #[test]
    fn ebic_gamma_half_never_denser_than_gamma_zero() {
        for seed in 0..50u64 {
            let s = random_pd_spectral(4, 700 + seed);
            let smax = s.matrix().diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
            let grid = default_lambda_grid(smax, 10);
            let cfg = RseConfig::lasso(0.1).unwrap();
            let (fit_half, _) = ebic_select(&s, &grid, 50, 0.5, &cfg).unwrap();
            let (fit_zero, _) = ebic_select(&s, &grid, 50, 0.0, &cfg).unwrap();
            let df_half = degrees_of_freedom(&fit_half.theta, true);
            let df_zero = degrees_of_freedom(&fit_zero.theta, true);
            assert!(
                df_half <= df_zero,
                "seed {seed}: df {df_half} > {df_zero}"
            );
        }
    }

    #[test]
    fn ebic_path_penalty_nonincreasing_in_lambda() {
        let s = random_pd_spectral(4, 99);
        let smax = s.matrix().diagonal().iter().fold(0.0f64, |a, &b| a.max(b));
        let grid = default_lambda_grid(smax, 12);
        let cfg = RseConfig::lasso(0.1).unwrap();
        let (_, path) = ebic_select(&s, &grid, 50, 0.5, &cfg).unwrap();
        for w in path.windows(2) {
            assert!(w[1].df <= w[0].df + 1);
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_lambda_grid(2.0, 20);
        assert_eq!(g.len(), 20);
        assert_relative_eq!(g[0], 2e-3, max_relative = 1e-12);
        assert_relative_eq!(g[19], 20.0, max_relative = 1e-12);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
