//! Monte Carlo study harnesses: the benchmark-table reproduction (estimator
//! accuracy and edge recovery on the Hawkes presets) and the diagnostic
//! figure suite (coherence distribution, elementwise deviation and condition
//! number of the periodogram as dimension grows).
//!
//! Runs are pure functions of their config: replicate `i` draws from
//! `derive_seed(seed, purpose, i)` and aggregation is an ordered reduction,
//! so reports are byte-identical across schedulings. Wall-clock time is
//! carried on the report structs but excluded from serialization.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::error::{Error, Result};
use crate::hawkes::{EdgeSet, HawkesModel, PresetId};
use crate::hermitian::HermitianMatrix;
use crate::periodogram::{goodman_density, multitaper_at, SpectralMatrix};
use crate::rse::{self, Penalty, RseConfig};
use crate::seed::{derive_seed, purpose};
use crate::taper::TaperSet;
use crate::tuning::{self, classification_scores, Criterion, Truth};

/// Configuration of one benchmark-table cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table1Config {
    pub scenario: PresetId,
    pub p: usize,
    /// Trials, each serving as one taper.
    pub m: usize,
    /// Per-trial horizon in seconds (`T'` of the taper set).
    pub t_trial: f64,
    /// Scoring replicates.
    pub n_replicates: usize,
    /// Training replicates used for the lambda search.
    pub n_training: usize,
    /// Requested evaluation frequency (rad/s); the run evaluates at the
    /// nearest Fourier frequency of `T'`.
    pub omega_request: f64,
    /// Points in the log-spaced lambda search grid.
    pub grid_points: usize,
    pub seed: u64,
    pub event_budget: f64,
}

impl Table1Config {
    /// Desk-scale defaults for a scenario/p/m cell.
    pub fn desk_scale(scenario: PresetId, p: usize, m: usize, seed: u64) -> Self {
        Self {
            scenario,
            p,
            m,
            t_trial: 200.0,
            n_replicates: 20,
            n_training: 5,
            omega_request: 0.0628,
            grid_points: 20,
            seed,
            event_budget: crate::hawkes::DEFAULT_EVENT_BUDGET,
        }
    }
}

/// Mean and standard error (sample SD over sqrt of completed count).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

fn mean_se(samples: &[f64]) -> Option<MeanSe> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let se = if samples.len() > 1 {
        let var = samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Some(MeanSe {
        mean,
        se,
        n: samples.len(),
    })
}

/// Aggregated accuracy of one estimator across replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub estimator: String,
    /// Lambda used (from training), absent for the plain inversion.
    pub lambda: Option<f64>,
    pub mse: Option<MeanSe>,
    pub f1: Option<MeanSe>,
    pub tpr: Option<MeanSe>,
    pub fpr: Option<MeanSe>,
    /// Replicates where the estimator could not produce an estimate
    /// (rank-deficient periodogram inversion).
    pub failures: usize,
}

/// Full report of one benchmark cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: Table1Config,
    pub omega_eval: f64,
    pub fourier_index: usize,
    pub estimators: Vec<EstimatorReport>,
    /// Fraction of scoring replicates in which every off-block entry of the
    /// lasso (F1-tuned) estimate is exactly zero; only meaningful for the
    /// block-diagonal scenarios.
    pub offblock_exact_zero_fraction: Option<f64>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

struct ReplicateScores {
    inverted_mse: Option<f64>,
    ridge_mse: f64,
    lasso_mse_mse: f64,
    lasso_f1_mse: f64,
    lasso_f1_scores: tuning::Scores,
    lasso_mse_scores: tuning::Scores,
    offblock_exact_zero: Option<bool>,
}

/// Simulate a training or scoring periodogram for one replicate.
fn replicate_periodogram(
    model: &HawkesModel,
    cfg: &Table1Config,
    omega: f64,
    seed: u64,
) -> Result<SpectralMatrix> {
    let data = model.simulate_with_budget(cfg.t_trial, cfg.m, seed, cfg.event_budget)?;
    let taper = TaperSet::for_trials(&data);
    multitaper_at(&data, &taper, omega)
}

/// Run one benchmark cell: train lambda for ridge (by MSE) and lasso (by
/// MSE and by F1) on held-out replicates, then score estimators on fresh
/// replicates against the model-implied truth at the evaluation frequency.
pub fn run_table1(cfg: &Table1Config) -> Result<MonteCarloReport> {
    let started = Instant::now();
    if cfg.n_replicates == 0 || cfg.n_training == 0 {
        return Err(Error::InvalidArgument(
            "need at least one scoring and one training replicate".into(),
        ));
    }
    let model = HawkesModel::preset(cfg.scenario, cfg.p)?;
    let taper = TaperSet::for_segments(cfg.m, cfg.t_trial)?;
    let (fourier_index, omega_eval) = taper.nearest_fourier_frequency(cfg.omega_request);
    let (theta_true, true_edges) = model.true_inverse_and_edges(omega_eval, None)?;

    // training
    let training: Vec<SpectralMatrix> = (0..cfg.n_training)
        .into_par_iter()
        .map(|i| {
            replicate_periodogram(
                &model,
                cfg,
                omega_eval,
                derive_seed(cfg.seed, purpose::TRAINING, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let s_max = training
        .iter()
        .flat_map(|s| s.matrix().diagonal().iter().copied())
        .fold(0.0f64, f64::max);
    let grid = tuning::default_lambda_grid(s_max, cfg.grid_points);
    let truth = Truth {
        theta: &theta_true,
        edges: &true_edges,
    };
    let lasso_cfg = RseConfig::lasso(grid[0])?;
    let ridge_cfg = RseConfig::ridge(grid[0])?;
    let lambda_ridge = tuning::grid_select(&training, &grid, Criterion::Mse, &truth, &ridge_cfg)?
        .lambda_star;
    let lambda_lasso_mse =
        tuning::grid_select(&training, &grid, Criterion::Mse, &truth, &lasso_cfg)?.lambda_star;
    let lambda_lasso_f1 =
        tuning::grid_select(&training, &grid, Criterion::F1, &truth, &lasso_cfg)?.lambda_star;

    // block structure for the exact-zero diagnostic (3-channel blocks for
    // the block-diagonal scenarios)
    let block = match cfg.scenario {
        PresetId::A | PresetId::B => Some(3usize),
        PresetId::C => None,
    };

    // scoring
    let scores: Vec<ReplicateScores> = (0..cfg.n_replicates)
        .into_par_iter()
        .map(|i| -> Result<ReplicateScores> {
            let s_hat = replicate_periodogram(
                &model,
                cfg,
                omega_eval,
                derive_seed(cfg.seed, purpose::SCORING, i as u64),
            )?;
            let inverted_mse = s_hat
                .matrix()
                .inverse_pd()
                .ok()
                .map(|inv| tuning::mse(&inv, &theta_true))
                .transpose()?;
            let ridge = rse::ridge_estimate(&s_hat, lambda_ridge)?;
            let ridge_mse = tuning::mse(&ridge.theta, &theta_true)?;

            let mut cfg_mse = lasso_cfg.clone();
            cfg_mse.lambda = lambda_lasso_mse;
            let lasso_mse_fit = rse::lasso_admm(&s_hat, &cfg_mse)?;
            let lasso_mse_mse = tuning::mse(&lasso_mse_fit.theta, &theta_true)?;

            let mut cfg_f1 = lasso_cfg.clone();
            cfg_f1.lambda = lambda_lasso_f1;
            let lasso_f1_fit = rse::lasso_admm(&s_hat, &cfg_f1)?;
            let lasso_f1_mse = tuning::mse(&lasso_f1_fit.theta, &theta_true)?;

            let edges_of = |theta: &HermitianMatrix| -> EdgeSet {
                theta
                    .upper_entries()
                    .filter(|(_, _, z)| z.norm() > 0.0)
                    .map(|(q, r, _)| (q, r))
                    .collect()
            };
            let lasso_f1_scores =
                classification_scores(&edges_of(&lasso_f1_fit.theta), &true_edges, cfg.p);
            let lasso_mse_scores =
                classification_scores(&edges_of(&lasso_mse_fit.theta), &true_edges, cfg.p);
            let offblock_exact_zero = block.map(|b| {
                lasso_f1_fit
                    .theta
                    .upper_entries()
                    .filter(|(q, r, _)| q / b != r / b)
                    .all(|(_, _, z)| z.norm() == 0.0)
            });
            Ok(ReplicateScores {
                inverted_mse,
                ridge_mse,
                lasso_mse_mse,
                lasso_f1_mse,
                lasso_f1_scores,
                lasso_mse_scores,
                offblock_exact_zero,
            })
        })
        .collect::<Result<_>>()?;

    let inverted: Vec<f64> = scores.iter().filter_map(|s| s.inverted_mse).collect();
    let failures = scores.len() - inverted.len();
    let estimators = vec![
        EstimatorReport {
            estimator: "inverted_periodogram".into(),
            lambda: None,
            mse: mean_se(&inverted),
            f1: None,
            tpr: None,
            fpr: None,
            failures,
        },
        EstimatorReport {
            estimator: "ridge".into(),
            lambda: Some(lambda_ridge),
            mse: mean_se(&scores.iter().map(|s| s.ridge_mse).collect::<Vec<_>>()),
            f1: None,
            tpr: None,
            fpr: None,
            failures: 0,
        },
        EstimatorReport {
            estimator: "lasso_mse".into(),
            lambda: Some(lambda_lasso_mse),
            mse: mean_se(&scores.iter().map(|s| s.lasso_mse_mse).collect::<Vec<_>>()),
            f1: mean_se(&scores.iter().map(|s| s.lasso_mse_scores.f1).collect::<Vec<_>>()),
            tpr: mean_se(&scores.iter().map(|s| s.lasso_mse_scores.tpr).collect::<Vec<_>>()),
            fpr: mean_se(&scores.iter().map(|s| s.lasso_mse_scores.fpr).collect::<Vec<_>>()),
            failures: 0,
        },
        EstimatorReport {
            estimator: "lasso_f1".into(),
            lambda: Some(lambda_lasso_f1),
            mse: mean_se(&scores.iter().map(|s| s.lasso_f1_mse).collect::<Vec<_>>()),
            f1: mean_se(&scores.iter().map(|s| s.lasso_f1_scores.f1).collect::<Vec<_>>()),
            tpr: mean_se(&scores.iter().map(|s| s.lasso_f1_scores.tpr).collect::<Vec<_>>()),
            fpr: mean_se(&scores.iter().map(|s| s.lasso_f1_scores.fpr).collect::<Vec<_>>()),
            failures: 0,
        },
    ];
    let offblock: Vec<bool> = scores
        .iter()
        .filter_map(|s| s.offblock_exact_zero)
        .collect();
    let offblock_exact_zero_fraction = if offblock.is_empty() {
        None
    } else {
        Some(offblock.iter().filter(|&&b| b).count() as f64 / offblock.len() as f64)
    };

    Ok(MonteCarloReport {
        config: cfg.clone(),
        omega_eval,
        fourier_index,
        estimators,
        offblock_exact_zero_fraction,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Configuration of the diagnostic figure suite (homogeneous Poisson data).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Figure1Config {
    pub rate: f64,
    /// Total horizon; the stream is segmented into `m` tapers of `T =
    /// t_total / m`.
    pub t_total: f64,
    pub m: usize,
    pub omega_request: f64,
    pub coherence_p: usize,
    pub coherence_reps: usize,
    pub deviation_ps: Vec<usize>,
    pub deviation_reps: usize,
    pub condition_ps: Vec<usize>,
    pub seed: u64,
}

impl Default for Figure1Config {
    fn default() -> Self {
        Self {
            rate: 1.0,
            t_total: 1000.0,
            m: 10,
            omega_request: 0.0628,
            coherence_p: 7,
            coherence_reps: 1000,
            deviation_ps: vec![2, 5, 10, 20],
            deviation_reps: 200,
            condition_ps: (2..=9).collect(),
            seed: 0,
        }
    }
}

/// `(p, median, lo, hi)` quantile summary row; `lo`/`hi` are the empirical
/// 2.5% and 97.5% quantiles.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrendRow {
    pub p: usize,
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Figure1Report {
    pub config: Figure1Config,
    pub omega_eval: f64,
    /// Squared-coherence samples between the first two channels.
    pub coherence_samples: Vec<f64>,
    pub deviation: Vec<TrendRow>,
    pub condition: Vec<TrendRow>,
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

fn trend_row(p: usize, mut samples: Vec<f64>) -> TrendRow {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    TrendRow {
        p,
        median: percentile(&samples, 0.5),
        lo: percentile(&samples, 0.025),
        hi: percentile(&samples, 0.975),
    }
}

fn poisson_model(rate: f64, p: usize) -> Result<HawkesModel> {
    HawkesModel::with_constant_decay(vec![rate; p], nalgebra::DMatrix::zeros(p, p), 1.0)
}

/// Run the diagnostic suite: coherence samples under independence, and the
/// elementwise deviation and condition number of the periodogram versus
/// dimension.
pub fn run_figure1(cfg: &Figure1Config) -> Result<Figure1Report> {
    let started = Instant::now();
    let t_trial = cfg.t_total / cfg.m as f64;
    let taper = TaperSet::for_segments(cfg.m, t_trial)?;
    let (_, omega_eval) = taper.nearest_fourier_frequency(cfg.omega_request);

    // panel a: coherence of two channels of a p-channel Poisson periodogram
    let coh_model = poisson_model(cfg.rate, cfg.coherence_p)?;
    let coherence_samples: Vec<f64> = (0..cfg.coherence_reps)
        .into_par_iter()
        .map(|i| -> Result<f64> {
            let data = coh_model.simulate(
                t_trial,
                cfg.m,
                derive_seed(cfg.seed, purpose::FIG_COHERENCE, i as u64),
            )?;
            let s = multitaper_at(&data, &taper, omega_eval)?;
            crate::periodogram::coherence(&s, 0, 1)
        })
        .collect::<Result<_>>()?;

    // panels b and c: one sweep per dimension, reusing draws across panels
    let mut all_ps: Vec<usize> = cfg
        .deviation_ps
        .iter()
        .chain(cfg.condition_ps.iter())
        .copied()
        .collect();
    all_ps.sort_unstable();
    all_ps.dedup();

    let mut deviation = Vec::new();
    let mut condition = Vec::new();
    for &p in &all_ps {
        let model = poisson_model(cfg.rate, p)?;
        let true_s = model.true_spectrum(omega_eval)?;
        let samples: Vec<(f64, f64)> = (0..cfg.deviation_reps)
            .into_par_iter()
            .map(|i| -> Result<(f64, f64)> {
                let data = model.simulate(
                    t_trial,
                    cfg.m,
                    derive_seed(cfg.seed, purpose::FIG_DEVIATION, (p * 100_000 + i) as u64),
                )?;
                let s_hat = multitaper_at(&data, &taper, omega_eval)?;
                let mut err = 0.0f64;
                for q in 0..p {
                    for r in 0..p {
                        err = err.max(
                            (s_hat.matrix().get(q, r) - true_s.matrix().get(q, r)).norm(),
                        );
                    }
                }
                Ok((err, s_hat.matrix().condition_number()))
            })
            .collect::<Result<_>>()?;
        if cfg.deviation_ps.contains(&p) {
            deviation.push(trend_row(p, samples.iter().map(|s| s.0).collect()));
        }
        if cfg.condition_ps.contains(&p) {
            condition.push(trend_row(p, samples.iter().map(|s| s.1).collect()));
        }
    }

    Ok(Figure1Report {
        config: cfg.clone(),
        omega_eval,
        coherence_samples,
        deviation,
        condition,
        wall_clock_secs: started.elapsed().as_secs_f64(),
    })
}

/// Write the three plot CSVs of a figure report into `dir`:
/// `figure1a.csv` (coherence histogram with the theoretical overlay),
/// `figure1b.csv` and `figure1c.csv` (trend rows).
pub fn write_figure1_csvs(dir: &std::path::Path, report: &Figure1Report) -> Result<()> {
    // histogram of panel (a) plus the density overlay on bin midpoints
    let bins = 30usize;
    let mut counts = vec![0usize; bins];
    for &x in &report.coherence_samples {
        let b = ((x * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let n = report.coherence_samples.len().max(1) as f64;
    let width = 1.0 / bins as f64;
    let mut rows = Vec::with_capacity(bins);
    for (b, &count) in counts.iter().enumerate() {
        let mid = (b as f64 + 0.5) * width;
        let empirical = count as f64 / (n * width);
        let theory = goodman_density(mid, report.config.m, 0.0)?;
        rows.push(vec![mid, empirical, theory]);
    }
    crate::io::write_plot_csv(
        &dir.join("figure1a.csv"),
        "coherence-distribution",
        &["x", "empirical_density", "theoretical_density"],
        &rows,
    )?;

    let to_rows = |rows: &[TrendRow]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| vec![r.p as f64, r.median, r.lo, r.hi])
            .collect()
    };
    crate::io::write_plot_csv(
        &dir.join("figure1b.csv"),
        "elementwise-deviation-vs-p",
        &["x", "median", "lo", "hi"],
        &to_rows(&report.deviation),
    )?;
    crate::io::write_plot_csv(
        &dir.join("figure1c.csv"),
        "condition-number-vs-p",
        &["x", "median", "lo", "hi"],
        &to_rows(&report.condition),
    )?;
    Ok(())
}
