//! Exponential-kernel multivariate Hawkes processes: simulation by thinning,
//! stationarity checks, closed-form spectra and benchmark parameterisations.
//!
//! The conditional intensity of channel `q` is
//! `nu_q + sum_r sum_{t_i^r < t} alpha_qr exp(-beta_qr (t - t_i^r))`,
//! so `alpha_qr` is the jump caused in channel `q` by an event in channel `r`
//! and `beta_qr` the corresponding decay rate. The transfer function is
//! `G(omega) = alpha / (beta + i omega)` elementwise, the stationary rate
//! `Lambda = (I - G(0))^{-1} nu`, and the spectral density
//! `S(omega) = (1/2pi) (I - G(omega))^{-1} diag(Lambda) (I - G(omega))^{-H}`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;
use crate::periodogram::{FrequencyTag, SpectralMatrix};
use crate::seed::{derive_seed, purpose};

/// Default cap on `sum(Lambda) * horizon * trials` before simulation refuses.
pub const DEFAULT_EVENT_BUDGET: f64 = 1e8;

/// Set of undirected edges `(q, r)` with `q < r`.
pub type EdgeSet = BTreeSet<(usize, usize)>;

/// Benchmark parameterisations.
///
/// `A` and `B` are built from 3x3 excitation blocks (an asymmetric
/// two-process interaction plus an independent process, and a fully
/// interacting triple); `C` repeats a sparse symmetric 12x12 pattern.
/// Background intensity is 0.2 everywhere. Decay is 0.86 for `A`/`B` and
/// 1.2 for `C`, which keeps every preset stationary with
/// `||G(0)||_2 ~ 0.83`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PresetId {
    A,
    B,
    C,
}

impl std::str::FromStr for PresetId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(PresetId::A),
            "b" => Ok(PresetId::B),
            "c" => Ok(PresetId::C),
            other => Err(Error::InvalidArgument(format!("unknown preset '{other}'"))),
        }
    }
}

impl std::fmt::Display for PresetId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PresetId::A => write!(f, "a"),
            PresetId::B => write!(f, "b"),
            PresetId::C => write!(f, "c"),
        }
    }
}

/// `(nu, alpha, beta)` parameterisation of an exponential-kernel Hawkes
/// process. `beta` is a full matrix even though the presets use a constant.
#[derive(Debug, Clone, PartialEq)]
pub struct HawkesModel {
    nu: DVector<f64>,
    alpha: DMatrix<f64>,
    beta: DMatrix<f64>,
}

impl HawkesModel {
    /// Validates shapes, finiteness and sign constraints: `nu >= 0` with at
    /// least one positive entry, `alpha >= 0`, and `beta > 0` wherever
    /// `alpha > 0`.
    pub fn new(nu: Vec<f64>, alpha: DMatrix<f64>, beta: DMatrix<f64>) -> Result<Self> {
        let p = nu.len();
        if p == 0 {
            return Err(Error::InvalidModel("empty model".into()));
        }
        if alpha.nrows() != p || alpha.ncols() != p || beta.nrows() != p || beta.ncols() != p {
            return Err(Error::ShapeMismatch(format!(
                "nu has {} channels but alpha is {}x{} and beta {}x{}",
                p,
                alpha.nrows(),
                alpha.ncols(),
                beta.nrows(),
                beta.ncols()
            )));
        }
        if nu.iter().any(|v| !v.is_finite())
            || alpha.iter().any(|v| !v.is_finite())
            || beta.iter().any(|v| !v.is_finite())
        {
            return Err(Error::NonFinite("model parameters"));
        }
        if nu.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidModel("negative background intensity".into()));
        }
        if !nu.iter().any(|&v| v > 0.0) {
            return Err(Error::InvalidModel(
                "background intensity is zero everywhere".into(),
            ));
        }
        if alpha.iter().any(|&v| v < 0.0) {
            return Err(Error::InvalidModel("negative excitation".into()));
        }
        for q in 0..p {
            for r in 0..p {
                if alpha[(q, r)] > 0.0 && beta[(q, r)] <= 0.0 {
                    return Err(Error::InvalidModel(format!(
                        "beta[{q}][{r}] must be positive where alpha > 0"
                    )));
                }
            }
        }
        Ok(Self {
            nu: DVector::from_vec(nu),
            alpha,
            beta,
        })
    }

    /// Constant-decay convenience constructor.
    pub fn with_constant_decay(nu: Vec<f64>, alpha: DMatrix<f64>, beta: f64) -> Result<Self> {
        let p = alpha.nrows();
        Self::new(nu, alpha, DMatrix::from_element(p, p, beta))
    }

    /// The benchmark models at dimension `p` (a multiple of the base block:
    /// 3 for `A`/`B`, 12 for `C`).
    pub fn preset(id: PresetId, p: usize) -> Result<Self> {
        let (base, beta) = match id {
            PresetId::A => (
                DMatrix::from_row_slice(3, 3, &[0.0, 0.60, 0.0, 0.0, 0.40, 0.0, 0.0, 0.0, 0.40]),
                0.86,
            ),
            PresetId::B => (
                DMatrix::from_row_slice(
                    3,
                    3,
                    &[0.20, 0.10, 0.25, 0.10, 0.20, 0.40, 0.25, 0.40, 0.20],
                ),
                0.86,
            ),
            PresetId::C => {
                let mut m = DMatrix::zeros(12, 12);
                for &(q, r, v) in &[(0usize, 2usize, 0.60), (2, 3, 0.80), (1, 9, 0.50)] {
                    m[(q, r)] = v;
                    m[(r, q)] = v;
                }
                (m, 1.2)
            }
        };
        let b = base.nrows();
        if p == 0 || p % b != 0 {
            return Err(Error::InvalidArgument(format!(
                "preset {id} requires p divisible by {b}, got {p}"
            )));
        }
        let mut alpha = DMatrix::zeros(p, p);
        for blk in 0..p / b {
            alpha.view_mut((blk * b, blk * b), (b, b)).copy_from(&base);
        }
        Self::with_constant_decay(vec![0.2; p], alpha, beta)
    }

    pub fn dim(&self) -> usize {
        self.nu.len()
    }

    pub fn nu(&self) -> &DVector<f64> {
        &self.nu
    }

    pub fn alpha(&self) -> &DMatrix<f64> {
        &self.alpha
    }

    pub fn beta(&self) -> &DMatrix<f64> {
        &self.beta
    }

    /// `G(0) = alpha ./ beta` with zeros where `alpha = 0`.
    fn g0(&self) -> DMatrix<f64> {
        let p = self.dim();
        DMatrix::from_fn(p, p, |q, r| {
            if self.alpha[(q, r)] > 0.0 {
                self.alpha[(q, r)] / self.beta[(q, r)]
            } else {
                0.0
            }
        })
    }

    /// Spectral radius of `G(0)`: largest eigenvalue modulus. Stationarity
    /// requires this to be `< 1`.
    pub fn spectral_radius_g0(&self) -> f64 {
        self.g0()
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    /// Largest singular value of `G(0)`. For the presets this is the ~0.83
    /// figure of merit; it upper-bounds the spectral radius.
    pub fn g0_operator_norm(&self) -> f64 {
        self.g0()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    fn require_stationary(&self) -> Result<()> {
        let radius = self.spectral_radius_g0();
        if radius >= 1.0 {
            return Err(Error::NotStationary { radius });
        }
        Ok(())
    }

    /// Stationary intensity `Lambda = (I - G(0))^{-1} nu`; all entries must
    /// be positive.
    pub fn stationary_intensity(&self) -> Result<DVector<f64>> {
        self.require_stationary()?;
        let p = self.dim();
        let lhs = DMatrix::identity(p, p) - self.g0();
        let lambda = lhs.lu().solve(&self.nu).ok_or_else(|| {
            Error::InvalidModel("I - G(0) is singular despite spectral radius < 1".into())
        })?;
        if lambda.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
            return Err(Error::InvalidModel(
                "stationary intensity has non-positive entries".into(),
            ));
        }
        Ok(lambda)
    }

    /// Transfer function `G(omega) = alpha / (beta + i omega)` elementwise.
    pub fn transfer(&self, omega: f64) -> DMatrix<Complex64> {
        let p = self.dim();
        DMatrix::from_fn(p, p, |q, r| {
            let a = self.alpha[(q, r)];
            if a > 0.0 {
                Complex64::new(a, 0.0) / Complex64::new(self.beta[(q, r)], omega)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Closed-form spectral density at `omega`:
    /// `(1/2pi) (I - G)^{-1} diag(Lambda) (I - G)^{-H}`, Hermitian positive
    /// definite for a stationary model.
    pub fn true_spectrum(&self, omega: f64) -> Result<SpectralMatrix> {
        let lambda = self.stationary_intensity()?;
        let p = self.dim();
        let id: DMatrix<Complex64> = DMatrix::identity(p, p);
        let a_inv = (id - self.transfer(omega))
            .try_inverse()
            .ok_or_else(|| Error::InvalidModel(format!("I - G({omega}) is singular")))?;
        let d = DMatrix::from_diagonal(&lambda.map(|v| Complex64::new(v, 0.0)));
        let dense = (&a_inv * d * a_inv.adjoint()).scale(1.0 / (2.0 * std::f64::consts::PI));
        let herm = HermitianMatrix::from_dense(&dense)?;
        SpectralMatrix::from_true(FrequencyTag::Single(omega), herm)
    }

    /// True inverse spectrum together with its edge set. Edge `(q, r)` with
    /// `q < r` is included iff `|Theta*_qr| > tol`; `tol = None` uses
    /// `1e-8 * max_q Theta*_qq`, large enough to absorb inversion noise on
    /// structurally zero entries.
    pub fn true_inverse_and_edges(
        &self,
        omega: f64,
        tol: Option<f64>,
    ) -> Result<(HermitianMatrix, EdgeSet)> {
        let spectrum = self.true_spectrum(omega)?;
        let theta = spectrum.matrix().inverse_pd()?;
        let tol =
            tol.unwrap_or_else(|| 1e-8 * theta.diagonal().iter().copied().fold(0.0, f64::max));
        let edges = theta
            .upper_entries()
            .filter(|(_, _, z)| z.norm() > tol)
            .map(|(q, r, _)| (q, r))
            .collect();
        Ok((theta, edges))
    }

    /// Expected total event count for a `(horizon, trials)` simulation.
    pub fn expected_events(&self, horizon: f64, trials: usize) -> Result<f64> {
        Ok(self.stationary_intensity()?.sum() * horizon * trials as f64)
    }

    /// Simulate `trials` independent realisations on `(0, horizon]` by
    /// Ogata thinning with the default event budget.
    pub fn simulate(&self, horizon: f64, trials: usize, seed: u64) -> Result<EventData> {
        self.simulate_with_budget(horizon, trials, seed, DEFAULT_EVENT_BUDGET)
    }

    /// As [`simulate`](Self::simulate) with an explicit budget cap.
    ///
    /// Trials are generated in parallel; trial `k` draws from the stream
    /// `derive_seed(seed, TRIAL, k)`, so output is a pure function of
    /// `(model, horizon, trials, seed)` regardless of scheduling.
    pub fn simulate_with_budget(
        &self,
        horizon: f64,
        trials: usize,
        seed: u64,
        budget: f64,
    ) -> Result<EventData> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if trials == 0 {
            return Err(Error::InvalidArgument("trials must be >= 1".into()));
        }
        let expected = self.expected_events(horizon, trials)?;
        if expected > budget {
            return Err(Error::BudgetExceeded {
                expected,
                cap: budget,
            });
        }
        let kernel = ThinningKernel::new(self);
        let events: Vec<Vec<Vec<f64>>> = (0..trials)
            .into_par_iter()
            .map(|k| {
                let mut rng =
                    ChaCha12Rng::seed_from_u64(derive_seed(seed, purpose::TRIAL, k as u64));
                kernel.run(horizon, &mut rng)
            })
            .collect();
        EventData::new(self.dim(), horizon, events)
    }
}

/// Precomputed sparse excitation structure for the thinning loop.
struct ThinningKernel<'a> {
    model: &'a HawkesModel,
    /// Active `(target q, source r, alpha, beta)` tuples with `alpha > 0`.
    active: Vec<(usize, usize, f64, f64)>,
    /// For each source channel, indices into `active` to bump on an event.
    by_source: Vec<Vec<usize>>,
    nu_total: f64,
}

impl<'a> ThinningKernel<'a> {
    fn new(model: &'a HawkesModel) -> Self {
        let p = model.dim();
        let mut active = Vec::new();
        let mut by_source = vec![Vec::new(); p];
        for q in 0..p {
            for r in 0..p {
                let a = model.alpha[(q, r)];
                if a > 0.0 {
                    by_source[r].push(active.len());
                    active.push((q, r, a, model.beta[(q, r)]));
                }
            }
        }
        Self {
            model,
            active,
            by_source,
            nu_total: model.nu.sum(),
        }
    }

    /// One trial of Ogata thinning. Exponential kernels are non-increasing
    /// between events, so the total intensity immediately after the last
    /// candidate dominates the intensity until the next one.
    fn run(&self, horizon: f64, rng: &mut ChaCha12Rng) -> Vec<Vec<f64>> {
        let p = self.model.dim();
        let mut events: Vec<Vec<f64>> = vec![Vec::new(); p];
        let mut acc = vec![0.0f64; self.active.len()];
        let mut lam = vec![0.0f64; p];
        let mut t = 0.0f64;
        loop {
            let bound = self.nu_total + acc.iter().sum::<f64>();
            let u: f64 = rng.gen();
            let delta = -(1.0 - u).ln() / bound;
            if delta == 0.0 {
                continue;
            }
            let cand = t + delta;
            if cand > horizon {
                break;
            }
            for (i, &(_, _, _, beta)) in self.active.iter().enumerate() {
                acc[i] *= (-beta * delta).exp();
            }
            for q in 0..p {
                lam[q] = self.model.nu[q];
            }
            for (i, &(q, _, _, _)) in self.active.iter().enumerate() {
                lam[q] += acc[i];
            }
            let total: f64 = lam.iter().sum();
            let y = rng.gen::<f64>() * bound;
            if y < total {
                // accept; reuse y to pick the channel proportionally to lam
                let mut cum = 0.0;
                let mut channel = p - 1;
                for (q, &l) in lam.iter().enumerate() {
                    cum += l;
                    if y < cum {
                        channel = q;
                        break;
                    }
                }
                events[channel].push(cand);
                for &i in &self.by_source[channel] {
                    acc[i] += self.active[i].2;
                }
            }
            t = cand;
        }
        events
    }
}

/// Observed event times of a p-variate point process over `m` trials, each
/// recorded on `(0, horizon]`. Times are strictly increasing within each
/// `(trial, channel)` cell; empty cells are permitted.
#[derive(Debug, Clone, PartialEq)]
pub struct EventData {
    p: usize,
    horizon: f64,
    /// `events[trial][channel]` -> strictly increasing times in `(0, horizon]`.
    events: Vec<Vec<Vec<f64>>>,
}

impl EventData {
    pub fn new(p: usize, horizon: f64, events: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        if !(horizon > 0.0) || !horizon.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "horizon must be positive, got {horizon}"
            )));
        }
        if events.is_empty() {
            return Err(Error::InvalidArgument("no trials".into()));
        }
        for (k, trial) in events.iter().enumerate() {
            if trial.len() != p {
                return Err(Error::ShapeMismatch(format!(
                    "trial {k} has {} channels, expected {p}",
                    trial.len()
                )));
            }
            for (q, times) in trial.iter().enumerate() {
                let mut prev = 0.0f64;
                for &t in times {
                    if !t.is_finite() {
                        return Err(Error::NonFinite("event times"));
                    }
                    if t <= prev {
                        return Err(Error::InvalidArgument(format!(
                            "times not strictly increasing in trial {k}, channel {q}"
                        )));
                    }
                    if t > horizon {
                        return Err(Error::InvalidArgument(format!(
                            "time {t} beyond horizon {horizon} in trial {k}, channel {q}"
                        )));
                    }
                    prev = t;
                }
            }
        }
        Ok(Self { p, horizon, events })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Number of trials.
    pub fn m(&self) -> usize {
        self.events.len()
    }

    /// Per-trial horizon in seconds.
    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    /// Times for `(trial, channel)`.
    pub fn times(&self, trial: usize, channel: usize) -> &[f64] {
        &self.events[trial][channel]
    }

    pub fn total_events(&self) -> usize {
        self.events
            .iter()
            .flat_map(|t| t.iter().map(|c| c.len()))
            .sum()
    }

    /// Per-channel counts summed over trials.
    pub fn channel_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.p];
        for trial in &self.events {
            for (q, times) in trial.iter().enumerate() {
                counts[q] += times.len();
            }
        }
        counts
    }

    /// Reinterpret a single continuous recording as `segments` back-to-back
    /// trials of length `horizon / segments`. An event at `t` lands in
    /// segment `ceil(t / T') - 1` with local time `t - k T'`.
    pub fn segment(&self, segments: usize) -> Result<Self> {
        if self.m() != 1 {
            return Err(Error::InvalidArgument(format!(
                "segmenting requires a single trial, got {}",
                self.m()
            )));
        }
        if segments == 0 {
            return Err(Error::InvalidArgument("segments must be >= 1".into()));
        }
        let t_prime = self.horizon / segments as f64;
        let mut out = vec![vec![Vec::new(); self.p]; segments];
        for (q, times) in self.events[0].iter().enumerate() {
            for &t in times {
                let k = ((t / t_prime).ceil() as usize).max(1) - 1;
                let k = k.min(segments - 1);
                out[k][q].push(t - k as f64 * t_prime);
            }
        }
        EventData::new(self.p, t_prime, out)
    }
}
