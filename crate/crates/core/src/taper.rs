//! Non-overlapping segment tapers and the mean-corrected tapered Fourier
//! transform of event streams.
//!
//! Trial `k` of an [`EventData`] occupies segment `(k T', (k+1) T']` of the
//! global axis, so the `m` experimental trials play the role of the `m`
//! tapers. Each taper is the indicator of its segment scaled by
//! `(2 pi T')^{-1/2}`, and its scaled Fourier transform is
//! `H_k(T omega) = ((2 pi T')^{-1/2} / m) sinc(omega T' / 2)
//!  exp(-i omega T' (k + 1/2))` (`k` 0-based here).
//!
//! Frequencies are not restricted to the Fourier grid `2 pi f / T'`, but the
//! distributional guarantees hold on the grid and the default pipelines stay
//! on it.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::hawkes::EventData;

/// `m` equal non-overlapping tapers of length `t_prime` covering
/// `(0, m * t_prime]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaperSet {
    m: usize,
    t_prime: f64,
}

/// Tapered Fourier coefficients: `values[(k, q)]` is the coefficient of
/// taper `k`, channel `q` at frequency `omega` (rad/s).
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCoeffs {
    pub omega: f64,
    /// `m x p` matrix of coefficients.
    pub values: DMatrix<Complex64>,
}

impl FourierCoeffs {
    pub fn m(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }
}

/// `sin(pi r) / (pi r)` with exact zeros at nonzero integer `r` and
/// `sinc(0) = 1`. The argument is reduced modulo 1 before evaluating `sin`,
/// so integral `r` yields exactly zero rather than an O(eps) residue.
fn sinc_cycles(r: f64) -> f64 {
    if r == 0.0 {
        return 1.0;
    }
    let n = r.round();
    let frac = r - n;
    if frac == 0.0 {
        return 0.0;
    }
    let sign = if (n as i64) % 2 == 0 { 1.0 } else { -1.0 };
    sign * (PI * frac).sin() / (PI * r)
}

impl TaperSet {
    /// Taper set with total horizon `t_total` split into `m` segments.
    pub fn new(m: usize, t_total: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("taper count must be >= 1".into()));
        }
        if !(t_total > 0.0) || !t_total.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "total horizon must be positive, got {t_total}"
            )));
        }
        Ok(Self {
            m,
            t_prime: t_total / m as f64,
        })
    }

    /// Taper set with `m` segments of length exactly `t_prime`.
    pub fn for_segments(m: usize, t_prime: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("taper count must be >= 1".into()));
        }
        if !(t_prime > 0.0) || !t_prime.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "segment length must be positive, got {t_prime}"
            )));
        }
        Ok(Self { m, t_prime })
    }

    /// One taper per trial of `data`, each covering the trial's horizon.
    pub fn for_trials(data: &EventData) -> Self {
        Self {
            m: data.m(),
            t_prime: data.horizon(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// Segment length `T' = T / m` in seconds.
    pub fn t_prime(&self) -> f64 {
        self.t_prime
    }

    /// Total horizon `T = m T'`.
    pub fn t_total(&self) -> f64 {
        self.m as f64 * self.t_prime
    }

    /// Taper amplitude `(2 pi T')^{-1/2}`.
    pub fn height(&self) -> f64 {
        1.0 / (2.0 * PI * self.t_prime).sqrt()
    }

    /// Fourier grid `{2 pi f / T' : f = 1..=f_max}`.
    pub fn fourier_frequencies(&self, f_max: usize) -> Vec<f64> {
        (1..=f_max)
            .map(|f| 2.0 * PI * f as f64 / self.t_prime)
            .collect()
    }

    /// Grid index and frequency nearest to `omega` (index clamped to >= 1).
    pub fn nearest_fourier_frequency(&self, omega: f64) -> (usize, f64) {
        let f = (omega * self.t_prime / (2.0 * PI)).round().max(1.0) as usize;
        (f, 2.0 * PI * f as f64 / self.t_prime)
    }

    /// Fourier frequencies lying in the band `(lo_hz, hi_hz]` (ordinary
    /// frequency in Hz; `omega = 2 pi f_hz`). Frequency zero is never
    /// included.
    pub fn band_fourier_frequencies(&self, lo_hz: f64, hi_hz: f64) -> Vec<f64> {
        let f_lo = (lo_hz * self.t_prime).floor().max(0.0) as usize + 1;
        let f_hi = (hi_hz * self.t_prime).floor() as usize;
        (f_lo..=f_hi)
            .map(|f| 2.0 * PI * f as f64 / self.t_prime)
            .filter(|w| w / (2.0 * PI) > lo_hz && w / (2.0 * PI) <= hi_hz + 1e-12)
            .collect()
    }

    /// True if `omega` lies on the Fourier grid of `T'` (relative tolerance
    /// 1e-9 on the cycle count).
    pub fn is_fourier_frequency(&self, omega: f64) -> bool {
        let r = omega * self.t_prime / (2.0 * PI);
        r >= 0.5 && (r - r.round()).abs() <= 1e-9 * r.round().max(1.0)
    }

    /// Scaled Fourier transform `H_k(T omega)` of taper `k` (0-based).
    /// `H_k(0) = (2 pi T')^{-1/2} / m`.
    pub fn taper_transform(&self, k: usize, omega: f64) -> Complex64 {
        debug_assert!(k < self.m);
        Complex64::from(self.height() / self.m as f64) * self.transfer_ratio(k, omega)
    }

    /// `H_k(T omega) / H_k(0) = sinc(omega T'/2) exp(-i omega T' (k + 1/2))`,
    /// the factor applied to `d_k(0)` by the mean correction. Exactly zero
    /// at nonzero Fourier frequencies of `T'` and exactly one at zero.
    pub fn transfer_ratio(&self, k: usize, omega: f64) -> Complex64 {
        let cycles = omega * self.t_prime / (2.0 * PI);
        let s = sinc_cycles(cycles);
        if s == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = -omega * self.t_prime * (k as f64 + 0.5);
        Complex64::from_polar(s, phase)
    }

    fn check_match(&self, data: &EventData) -> Result<()> {
        if data.m() != self.m || data.horizon() != self.t_prime {
            return Err(Error::ShapeMismatch(format!(
                "data has {} trials of {}s, tapers expect {} segments of {}s",
                data.m(),
                data.horizon(),
                self.m,
                self.t_prime
            )));
        }
        Ok(())
    }
}

/// Tapered Fourier transform: coefficient `(k, q)` is
/// `height * sum_{t in trial k, channel q} exp(-i omega (k T' + t))`.
pub fn tapered_ft(data: &EventData, taper: &TaperSet, omega: f64) -> Result<FourierCoeffs> {
    taper.check_match(data)?;
    let height = taper.height();
    let t_prime = taper.t_prime();
    let mut values = DMatrix::zeros(taper.m(), data.p());
    for k in 0..taper.m() {
        let offset = k as f64 * t_prime;
        for q in 0..data.p() {
            let mut sum = Complex64::new(0.0, 0.0);
            for &t in data.times(k, q) {
                sum += Complex64::from_polar(1.0, -omega * (offset + t));
            }
            values[(k, q)] = sum * height;
        }
    }
    Ok(FourierCoeffs { omega, values })
}

/// Mean-corrected tapered Fourier transform:
/// `d_k(omega) - d_k(0) H_k(T omega) / H_k(0)`.
///
/// At Fourier frequencies of `T'` the correction vanishes identically, and
/// at `omega = 0` the result is identically zero.
pub fn mean_corrected_ft(data: &EventData, taper: &TaperSet, omega: f64) -> Result<FourierCoeffs> {
    let d = tapered_ft(data, taper, omega)?;
    let d0 = tapered_ft(data, taper, 0.0)?;
    let mut values = d.values;
    for k in 0..taper.m() {
        let ratio = taper.transfer_ratio(k, omega);
        for q in 0..data.p() {
            values[(k, q)] -= d0.values[(k, q)] * ratio;
        }
    }
    Ok(FourierCoeffs { omega, values })
}
