//! Multi-taper periodogram, coherence, the coherence sampling density,
//! band smoothing and the finite-sample deviation bound.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hawkes::EventData;
use crate::hermitian::HermitianMatrix;
use crate::taper::{mean_corrected_ft, FourierCoeffs, TaperSet};

/// Eigenvalues of a periodogram more negative than this (relative to the
/// largest) indicate a bug rather than rounding; smaller negativity is
/// clipped to zero.
pub const PSD_CLIP_TOL: f64 = 1e-10;

/// Frequency annotation of a spectral estimate: a single frequency in rad/s
/// or a band with the averaged Fourier frequencies listed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrequencyTag {
    Single(f64),
    Band {
        band_hz: [f64; 2],
        frequencies: Vec<f64>,
    },
}

impl FrequencyTag {
    /// The single frequency, if this is not a band.
    pub fn omega(&self) -> Option<f64> {
        match self {
            FrequencyTag::Single(w) => Some(*w),
            FrequencyTag::Band { .. } => None,
        }
    }
}

/// A Hermitian PSD spectral matrix tagged with its frequency (or band) and,
/// for estimates, the effective number of averaged outer products.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralMatrix {
    freq: FrequencyTag,
    matrix: HermitianMatrix,
    m_eff: Option<usize>,
}

impl SpectralMatrix {
    /// Wrap an estimate. Eigenvalues in `[-PSD_CLIP_TOL * max, 0)` are
    /// clipped to zero (outer-product averages are PSD in exact arithmetic);
    /// anything more negative is an internal error.
    pub fn from_estimate(
        freq: FrequencyTag,
        matrix: HermitianMatrix,
        m_eff: usize,
    ) -> Result<Self> {
        let eig = matrix.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        let max = eig.values.last().copied().unwrap_or(0.0).max(0.0);
        if min < -PSD_CLIP_TOL * max.max(f64::MIN_POSITIVE) {
            return Err(Error::InvalidArgument(format!(
                "periodogram has eigenvalue {min:e} beyond rounding of PSD average (max {max:e})"
            )));
        }
        let matrix = if min < 0.0 {
            let clipped: Vec<f64> = eig.values.iter().map(|c| c.max(0.0)).collect();
            eig.reconstruct(&clipped)
        } else {
            matrix
        };
        Ok(Self {
            freq,
            matrix,
            m_eff: Some(m_eff),
        })
    }

    /// Wrap a model-implied (true) spectrum: must be positive definite.
    pub fn from_true(freq: FrequencyTag, matrix: HermitianMatrix) -> Result<Self> {
        let min = matrix.eig().values.first().copied().unwrap_or(0.0);
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        Ok(Self {
            freq,
            matrix,
            m_eff: None,
        })
    }

    pub fn freq(&self) -> &FrequencyTag {
        &self.freq
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.matrix
    }

    pub fn p(&self) -> usize {
        self.matrix.dim()
    }

    /// Tapers times averaged frequencies for estimates; `None` for true
    /// spectra.
    pub fn m_eff(&self) -> Option<usize> {
        self.m_eff
    }

    /// Replace the band annotation (e.g. with the band the caller requested
    /// rather than the one inferred from the frequency list).
    pub fn with_band_hz(mut self, lo_hz: f64, hi_hz: f64) -> Self {
        if let FrequencyTag::Band { band_hz, .. } = &mut self.freq {
            *band_hz = [lo_hz, hi_hz];
        }
        self
    }
}

/// Multi-taper periodogram: the average of the `m` rank-one outer products
/// of the mean-corrected coefficient vectors.
pub fn multitaper(coeffs: &FourierCoeffs) -> Result<SpectralMatrix> {
    let m = coeffs.m();
    if m == 0 {
        return Err(Error::EmptyInput("no tapers"));
    }
    let p = coeffs.p();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(p, p);
    for k in 0..m {
        let row = coeffs.values.row(k);
        let col = row.adjoint();
        acc += &col * row;
    }
    acc.unscale_mut(m as f64);
    let herm = HermitianMatrix::hermitian_part(&acc)?;
    SpectralMatrix::from_estimate(FrequencyTag::Single(coeffs.omega), herm, m)
}

/// Multi-taper periodogram of `data` at a single frequency.
pub fn multitaper_at(data: &EventData, taper: &TaperSet, omega: f64) -> Result<SpectralMatrix> {
    multitaper(&mean_corrected_ft(data, taper, omega)?)
}

/// Trial-frequency smoothed periodogram: the average of per-frequency
/// multi-taper estimates over `band`, which must consist of Fourier
/// frequencies of `T'` (frequency zero excluded). `m_eff = m * card(band)`.
pub fn smoothed_periodogram(
    data: &EventData,
    taper: &TaperSet,
    band: &[f64],
) -> Result<SpectralMatrix> {
    if band.is_empty() {
        return Err(Error::EmptyInput("empty frequency band"));
    }
    for &w in band {
        if !taper.is_fourier_frequency(w) {
            return Err(Error::InvalidArgument(format!(
                "band frequency {w} is not a positive Fourier frequency of T' = {}",
                taper.t_prime()
            )));
        }
    }
    let p = data.p();
    let mut acc: DMatrix<Complex64> = DMatrix::zeros(p, p);
    for &w in band {
        let est = multitaper_at(data, taper, w)?;
        acc += est.matrix().to_dense();
    }
    acc.unscale_mut(band.len() as f64);
    let herm = HermitianMatrix::hermitian_part(&acc)?;
    let lo = band.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = band.iter().copied().fold(0.0, f64::max);
    SpectralMatrix::from_estimate(
        FrequencyTag::Band {
            band_hz: [lo / (2.0 * std::f64::consts::PI), hi / (2.0 * std::f64::consts::PI)],
            frequencies: band.to_vec(),
        },
        herm,
        taper.m() * band.len(),
    )
}

/// Squared coherence `|S_qr|^2 / (S_qq S_rr)`, clipped to `[0, 1]`.
pub fn coherence(s: &SpectralMatrix, q: usize, r: usize) -> Result<f64> {
    let m = s.matrix();
    for idx in [q, r] {
        if m.get(idx, idx).re <= 0.0 {
            return Err(Error::DegenerateChannel { channel: idx });
        }
    }
    let value = m.get(q, r).norm_sqr() / (m.get(q, q).re * m.get(r, r).re);
    debug_assert!(value <= 1.0 + 1e-9);
    Ok(value.clamp(0.0, 1.0))
}

/// Gauss hypergeometric `2F1(m, m; 1; z)` by power series for `0 <= z < 1`.
/// Terms are accumulated until `|term| < 1e-14 * |sum|`.
fn hyp2f1_mm1(m: usize, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let mut term = 1.0f64;
    let mut sum = 1.0f64;
    for k in 0..200_000u64 {
        let kf = k as f64;
        let ratio = (m as f64 + kf) * (m as f64 + kf) / ((kf + 1.0) * (kf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if term.abs() < 1e-14 * sum.abs() {
            break;
        }
    }
    sum
}

/// Sampling density of the squared coherence estimate between two channels
/// of an `m`-taper periodogram whose population coherence is `r2`:
///
/// `f(x) = (m-1) (1-r2)^m (1-x)^{m-2} 2F1(m, m; 1; r2 x)`.
///
/// This is the classical complex-Wishart coherence density; it integrates to
/// one and reduces to `Beta(1, m-1)` at `r2 = 0`.
pub fn goodman_density(x: f64, m: usize, r2: f64) -> Result<f64> {
    goodman_guards(x, m, r2)?;
    Ok((m as f64 - 1.0)
        * (1.0 - r2).powi(m as i32)
        * (1.0 - x).powi(m as i32 - 2)
        * hyp2f1_mm1(m, r2 * x))
}

/// The density with `(1-r2)` unexponentiated and `(1-x^2)` in place of
/// `(1-x)`. Kept verbatim for comparison; it does not integrate to one
/// (e.g. total mass ~2.70 at `m = 10`, `r2 = 0`), so [`goodman_density`]
/// is used wherever a probability density is required.
pub fn goodman_density_as_printed(x: f64, m: usize, r2: f64) -> Result<f64> {
    goodman_guards(x, m, r2)?;
    Ok((m as f64 - 1.0)
        * (1.0 - r2)
        * (1.0 - x * x).powi(m as i32 - 2)
        * hyp2f1_mm1(m, r2 * x))
}

fn goodman_guards(x: f64, m: usize, r2: f64) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!(
            "coherence density requires m >= 2, got {m}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfDomain(format!("coherence {x} outside [0, 1]")));
    }
    if !(0.0..1.0).contains(&r2) {
        return Err(Error::OutOfDomain(format!(
            "population coherence {r2} outside [0, 1)"
        )));
    }
    if r2 * x >= 1.0 {
        return Err(Error::OutOfDomain(format!(
            "hypergeometric argument {} >= 1",
            r2 * x
        )));
    }
    Ok(())
}

/// Finite-sample tail bound on a single periodogram entry:
/// `P(|S_hat_qr - S_qr| >= delta) <= 8 exp(-m delta^2 / (2^9 5^2 s_max^2))`
/// for `delta` in `(0, 80 s_max)`, with `s_max = max_q S_qq`. Values above
/// one are returned as-is (the bound is then vacuous).
pub fn deviation_bound(m: usize, delta: f64, s_max: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 80.0 * s_max) {
        return Err(Error::OutOfDomain(format!(
            "delta {delta} outside (0, {})",
            80.0 * s_max
        )));
    }
    let denom = 512.0 * 25.0 * s_max * s_max;
    Ok(8.0 * (-(m as f64) * delta * delta / denom).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hawkes::HawkesModel;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn coeffs(values: DMatrix<Complex64>, omega: f64) -> FourierCoeffs {
        FourierCoeffs { omega, values }
    }

    #[test]
    fn multitaper_zero_coeffs_zero_matrix() {
        let c = coeffs(DMatrix::zeros(3, 2), 0.5);
        let s = multitaper(&c).unwrap();
        assert_eq!(s.matrix().norm(crate::hermitian::NormKind::Frobenius), 0.0);
        assert_eq!(s.m_eff(), Some(3));
    }

    #[test]
    fn multitaper_single_outer_product() {
        let mut v = DMatrix::zeros(1, 1);
        v[(0, 0)] = Complex64::new(3.0, 4.0);
        let s = multitaper(&coeffs(v, 0.1)).unwrap();
        assert_relative_eq!(s.matrix().get(0, 0).re, 25.0, max_relative = 1e-12);
    }

    #[test]
    fn multitaper_empty_errors() {
        let c = coeffs(DMatrix::zeros(0, 2), 0.5);
        assert!(matches!(multitaper(&c), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn multitaper_rank_bounded_by_m() {
        // p = 6 channels, m = 3 tapers: at most 3 nonzero eigenvalues
        let model = HawkesModel::with_constant_decay(
            vec![1.0; 6],
            DMatrix::zeros(6, 6),
            1.0,
        )
        .unwrap();
        let data = model.simulate(60.0, 3, 5).unwrap();
        let taper = TaperSet::for_trials(&data);
        let (_, w) = taper.nearest_fourier_frequency(0.3);
        let s = multitaper_at(&data, &taper, w).unwrap();
        let eig = s.matrix().eig();
        let max = eig.values.last().copied().unwrap();
        let rank = eig.values.iter().filter(|&&c| c > 1e-9 * max).count();
        assert!(rank <= 3, "rank {rank}");
        assert!(s.matrix().condition_number().is_infinite());
    }

    #[test]
    fn poisson_diagonal_matches_bartlett_level() {
        // E S_qq = lambda / (2 pi); Monte Carlo within 3 standard errors
        let lambda = 1.0;
        let model =
            HawkesModel::with_constant_decay(vec![lambda], DMatrix::zeros(1, 1), 1.0).unwrap();
        let mut samples = Vec::new();
        for rep in 0..300 {
            let data = model.simulate(100.0, 5, 1000 + rep).unwrap();
            let taper = TaperSet::for_trials(&data);
            let (_, w) = taper.nearest_fourier_frequency(0.0628);
            let s = multitaper_at(&data, &taper, w).unwrap();
            samples.push(s.matrix().get(0, 0).re);
        }
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let sd = (samples.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let target = lambda / (2.0 * std::f64::consts::PI);
        assert!(
            (mean - target).abs() <= 3.0 * sd / n.sqrt(),
            "mean {mean} vs {target}"
        );
    }

    #[test]
    fn smoothed_singleton_band_equals_multitaper() {
        let model =
            HawkesModel::with_constant_decay(vec![1.0, 1.0], DMatrix::zeros(2, 2), 1.0).unwrap();
        let data = model.simulate(50.0, 4, 3).unwrap();
        let taper = TaperSet::for_trials(&data);
        let w = taper.fourier_frequencies(1)[0];
        let single = multitaper_at(&data, &taper, w).unwrap();
        let smoothed = smoothed_periodogram(&data, &taper, &[w]).unwrap();
        assert_relative_eq!(
            single.matrix().frobenius_distance(smoothed.matrix()).unwrap(),
            0.0,
            epsilon = 1e-14
        );
        assert_eq!(smoothed.m_eff(), Some(4));
    }

    #[test]
    fn smoothed_band_permutation_invariant_and_meff() {
        let model =
            HawkesModel::with_constant_decay(vec![1.0, 1.0], DMatrix::zeros(2, 2), 1.0).unwrap();
        let data = model.simulate(50.0, 4, 3).unwrap();
        let taper = TaperSet::for_trials(&data);
        let grid = taper.fourier_frequencies(3);
        let fwd = smoothed_periodogram(&data, &taper, &grid).unwrap();
        let rev: Vec<f64> = grid.iter().rev().copied().collect();
        let bwd = smoothed_periodogram(&data, &taper, &rev).unwrap();
        assert!(fwd.matrix().frobenius_distance(bwd.matrix()).unwrap() < 1e-13);
        assert_eq!(fwd.m_eff(), Some(12));
    }

    #[test]
    fn smoothed_rejects_offgrid_and_empty() {
        let model = HawkesModel::with_constant_decay(vec![1.0], DMatrix::zeros(1, 1), 1.0).unwrap();
        let data = model.simulate(50.0, 4, 3).unwrap();
        let taper = TaperSet::for_trials(&data);
        assert!(matches!(
            smoothed_periodogram(&data, &taper, &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(smoothed_periodogram(&data, &taper, &[0.1234]).is_err());
        assert!(smoothed_periodogram(&data, &taper, &[0.0]).is_err());
    }

    #[test]
    fn coherence_examples() {
        let diag = HermitianMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let s = SpectralMatrix::from_true(FrequencyTag::Single(0.1), diag).unwrap();
        assert_eq!(coherence(&s, 0, 1).unwrap(), 0.0);

        let m = HermitianMatrix::from_parts(vec![1.0, 1.0], vec![Complex64::new(0.6, 0.0)])
            .unwrap();
        let s = SpectralMatrix::from_true(FrequencyTag::Single(0.1), m).unwrap();
        assert_relative_eq!(coherence(&s, 0, 1).unwrap(), 0.36, max_relative = 1e-12);
    }

    #[test]
    fn coherence_rank_one_is_unity() {
        let v = nalgebra::DVector::from_vec(vec![
            Complex64::new(1.0, 0.3),
            Complex64::new(-0.5, 0.8),
        ]);
        let outer = &v * v.adjoint();
        let h = HermitianMatrix::from_dense(&outer).unwrap();
        let s = SpectralMatrix::from_estimate(FrequencyTag::Single(0.0), h, 1).unwrap();
        assert_relative_eq!(coherence(&s, 0, 1).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn coherence_degenerate_channel() {
        let s = SpectralMatrix {
            freq: FrequencyTag::Single(0.0),
            matrix: HermitianMatrix::from_diagonal(&[0.0, 1.0]).unwrap(),
            m_eff: Some(1),
        };
        assert!(matches!(
            coherence(&s, 0, 1),
            Err(Error::DegenerateChannel { channel: 0 })
        ));
    }

    #[test]
    fn goodman_density_zero_coherence() {
        // f(0) = m - 1; the r2 = 0, m = 2 density is uniform
        assert_relative_eq!(goodman_density(0.0, 10, 0.0).unwrap(), 9.0);
        assert_relative_eq!(goodman_density_as_printed(0.0, 10, 0.0).unwrap(), 9.0);
        for x in [0.0, 0.3, 0.7, 0.99] {
            assert_relative_eq!(goodman_density(x, 2, 0.0).unwrap(), 1.0);
            assert_relative_eq!(goodman_density_as_printed(x, 2, 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn goodman_density_guards() {
        assert!(goodman_density(1.5, 10, 0.0).is_err());
        assert!(goodman_density(0.5, 1, 0.0).is_err());
        assert!(goodman_density(0.5, 10, 1.0).is_err());
        assert!(goodman_density(0.5, 10, -0.1).is_err());
    }

    fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut sum = f(a) + f(b);
        for i in 1..n {
            let x = a + i as f64 * h;
            sum += f(x) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        sum * h / 3.0
    }

    #[test]
    fn goodman_density_integrates_to_one() {
        for m in [5usize, 10, 20] {
            for r2 in [0.0, 0.3] {
                let total = simpson(
                    |x| goodman_density(x, m, r2).unwrap(),
                    0.0,
                    1.0 - 1e-9,
                    20_000,
                );
                assert!(
                    (total - 1.0).abs() < 1e-3,
                    "m={m} r2={r2}: integral {total}"
                );
            }
        }
    }

    #[test]
    fn deviation_bound_examples() {
        // delta -> 0+ gives 8
        let b = deviation_bound(10, 1e-12, 1.0).unwrap();
        assert_relative_eq!(b, 8.0, max_relative = 1e-9);

        // m chosen so the exponent equals -ln 2 gives bound 4
        let s_max = 0.7;
        let delta = 0.05;
        let m = (12800.0 * s_max * s_max * std::f64::consts::LN_2 / (delta * delta)).round();
        let b = deviation_bound(m as usize, delta, s_max).unwrap();
        assert_relative_eq!(b, 4.0, max_relative = 1e-4);

        // monotone in m and delta
        assert!(deviation_bound(20, 0.1, 1.0).unwrap() < deviation_bound(10, 0.1, 1.0).unwrap());
        assert!(deviation_bound(10, 0.2, 1.0).unwrap() < deviation_bound(10, 0.1, 1.0).unwrap());

        assert!(deviation_bound(10, 0.0, 1.0).is_err());
        assert!(deviation_bound(10, 81.0, 1.0).is_err());
    }
}
