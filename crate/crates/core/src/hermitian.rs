//! Complex Hermitian matrix primitives shared by the numerical modules.
//!
//! A [`HermitianMatrix`] stores the real diagonal and the strict upper
//! triangle only, so Hermitian symmetry is structural: there is no lower
//! triangle that could drift out of sync. Construction from a dense matrix
//! checks symmetry to a relative tolerance of `1e-12` and rejects non-finite
//! entries; thereafter all operations are exact with respect to symmetry.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Relative tolerance for Hermitian symmetry checks at ingestion.
pub const HERMITIAN_INGEST_TOL: f64 = 1e-12;

/// Eigenvalues below this are treated as exactly zero by the condition
/// number, which then returns the infinity sentinel.
pub const SINGULAR_EIGENVALUE_FLOOR: f64 = 1e-300;

/// Matrix norms supported by [`HermitianMatrix::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `sqrt(sum |h_qr|^2)` over all entries.
    Frobenius,
    /// `max |h_qr|` over all entries.
    ElementwiseMax,
    /// `max_q sum_r |h_qr|` (operator infinity norm).
    RowSumMax,
}

/// A `p x p` complex Hermitian matrix (real diagonal + strict upper triangle).
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    diag: Vec<f64>,
    /// Strict upper triangle in row-major order: (0,1), (0,2), ..., (p-2,p-1).
    upper: Vec<Complex64>,
}

/// Eigendecomposition `H = Q diag(values) Q^H` with ascending real eigenvalues
/// and unitary `Q` (columns are eigenvectors).
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

fn upper_index(dim: usize, q: usize, r: usize) -> usize {
    debug_assert!(q < r && r < dim);
    q * dim - q * (q + 1) / 2 + (r - q - 1)
}

impl HermitianMatrix {
    /// Zero matrix of dimension `dim`.
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            diag: vec![0.0; dim],
            upper: vec![Complex64::new(0.0, 0.0); dim * (dim.saturating_sub(1)) / 2],
        }
    }

    /// Identity matrix of dimension `dim`.
    pub fn identity(dim: usize) -> Self {
        let mut h = Self::zeros(dim);
        h.diag.iter_mut().for_each(|d| *d = 1.0);
        h
    }

    /// Diagonal matrix from real entries.
    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|d| !d.is_finite()) {
            return Err(Error::NonFinite("diagonal"));
        }
        let mut h = Self::zeros(diag.len());
        h.diag.copy_from_slice(diag);
        Ok(h)
    }

    /// Build from explicit parts. `upper` is the strict upper triangle in
    /// row-major order, length `dim*(dim-1)/2`.
    pub fn from_parts(diag: Vec<f64>, upper: Vec<Complex64>) -> Result<Self> {
        let dim = diag.len();
        if upper.len() != dim * dim.saturating_sub(1) / 2 {
            return Err(Error::ShapeMismatch(format!(
                "upper triangle has {} entries, expected {}",
                upper.len(),
                dim * dim.saturating_sub(1) / 2
            )));
        }
        if diag.iter().any(|d| !d.is_finite())
            || upper.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(Self { dim, diag, upper })
    }

    /// Ingest a dense matrix, verifying Hermitian symmetry to a relative
    /// tolerance of [`HERMITIAN_INGEST_TOL`]. Slight asymmetry within
    /// tolerance is averaged away; larger asymmetry is rejected.
    pub fn from_dense(a: &DMatrix<Complex64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        let dim = a.nrows();
        let mut scale: f64 = 1.0;
        for z in a.iter() {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::NonFinite("matrix entries"));
            }
            scale = scale.max(z.norm());
        }
        let tol = HERMITIAN_INGEST_TOL * scale;
        let mut h = Self::zeros(dim);
        for q in 0..dim {
            let d = a[(q, q)];
            if d.im.abs() > tol {
                return Err(Error::InvalidArgument(format!(
                    "diagonal entry ({q},{q}) has imaginary part {:e}",
                    d.im
                )));
            }
            h.diag[q] = d.re;
            for r in (q + 1)..dim {
                let u = a[(q, r)];
                let l = a[(r, q)];
                if (u - l.conj()).norm() > tol {
                    return Err(Error::InvalidArgument(format!(
                        "entries ({q},{r}) and ({r},{q}) are not conjugate symmetric"
                    )));
                }
                h.upper[upper_index(dim, q, r)] = (u + l.conj()) * 0.5;
            }
        }
        Ok(h)
    }

    /// Hermitian part `(A + A^H)/2` of an arbitrary square matrix.
    pub fn hermitian_part(a: &DMatrix<Complex64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} matrix is not square",
                a.nrows(),
                a.ncols()
            )));
        }
        let dim = a.nrows();
        let mut h = Self::zeros(dim);
        for q in 0..dim {
            h.diag[q] = a[(q, q)].re;
            for r in (q + 1)..dim {
                h.upper[upper_index(dim, q, r)] = (a[(q, r)] + a[(r, q)].conj()) * 0.5;
            }
        }
        if h.diag.iter().any(|d| !d.is_finite())
            || h.upper.iter().any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("matrix entries"));
        }
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Entry `(q, r)`, reconstructing the lower triangle by conjugation.
    pub fn get(&self, q: usize, r: usize) -> Complex64 {
        use std::cmp::Ordering::*;
        match q.cmp(&r) {
            Equal => Complex64::new(self.diag[q], 0.0),
            Less => self.upper[upper_index(self.dim, q, r)],
            Greater => self.upper[upper_index(self.dim, r, q)].conj(),
        }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Strict upper-triangle entries in row-major order.
    pub fn upper_triangle(&self) -> &[Complex64] {
        &self.upper
    }

    /// Iterate over strict upper-triangle entries as `(q, r, value)`.
    pub fn upper_entries(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let dim = self.dim;
        (0..dim)
            .flat_map(move |q| ((q + 1)..dim).map(move |r| (q, r)))
            .map(move |(q, r)| (q, r, self.upper[upper_index(dim, q, r)]))
    }

    /// Dense representation.
    pub fn to_dense(&self) -> DMatrix<Complex64> {
        let mut a = DMatrix::zeros(self.dim, self.dim);
        for q in 0..self.dim {
            a[(q, q)] = Complex64::new(self.diag[q], 0.0);
            for r in (q + 1)..self.dim {
                let z = self.upper[upper_index(self.dim, q, r)];
                a[(q, r)] = z;
                a[(r, q)] = z.conj();
            }
        }
        a
    }

    /// Eigendecomposition with eigenvalues sorted ascending.
    pub fn eig(&self) -> HermitianEig {
        eig_dense_hermitian(&self.to_dense())
    }

    /// `sum log(eigenvalue)`; errors unless positive definite.
    pub fn log_det_pd(&self) -> Result<f64> {
        let eig = self.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        Ok(eig.values.iter().map(|c| c.ln()).sum())
    }

    /// Inverse of a positive definite matrix via the eigendecomposition.
    pub fn inverse_pd(&self) -> Result<Self> {
        let eig = self.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        if min <= 0.0 {
            return Err(Error::NotPositiveDefinite { min_eig: min });
        }
        let inv: Vec<f64> = eig.values.iter().map(|c| 1.0 / c).collect();
        Ok(eig.reconstruct(&inv))
    }

    /// Matrix norm of the requested kind.
    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Frobenius => {
                let d: f64 = self.diag.iter().map(|d| d * d).sum();
                let u: f64 = self.upper.iter().map(|z| z.norm_sqr()).sum();
                (d + 2.0 * u).sqrt()
            }
            NormKind::ElementwiseMax => {
                let d = self.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                self.upper.iter().fold(d, |m, z| m.max(z.norm()))
            }
            NormKind::RowSumMax => (0..self.dim)
                .map(|q| (0..self.dim).map(|r| self.get(q, r).norm()).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// `max eigenvalue / min eigenvalue` for a Hermitian PSD matrix; returns
    /// `f64::INFINITY` when the smallest eigenvalue is below
    /// [`SINGULAR_EIGENVALUE_FLOOR`].
    pub fn condition_number(&self) -> f64 {
        let eig = self.eig();
        let min = eig.values.first().copied().unwrap_or(0.0);
        let max = eig.values.last().copied().unwrap_or(0.0);
        if min <= SINGULAR_EIGENVALUE_FLOOR {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Frobenius distance `||self - other||_F`.
    pub fn frobenius_distance(&self, other: &Self) -> Result<f64> {
        if self.dim != other.dim {
            return Err(Error::ShapeMismatch(format!(
                "dims {} vs {}",
                self.dim, other.dim
            )));
        }
        let d: f64 = self
            .diag
            .iter()
            .zip(&other.diag)
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        let u: f64 = self
            .upper
            .iter()
            .zip(&other.upper)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum();
        Ok((d + 2.0 * u).sqrt())
    }

    /// `self * t` for real `t`.
    pub fn scale(&self, t: f64) -> Self {
        Self {
            dim: self.dim,
            diag: self.diag.iter().map(|d| d * t).collect(),
            upper: self.upper.iter().map(|z| z * t).collect(),
        }
    }

    /// `self + lambda I`.
    pub fn add_scaled_identity(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.diag.iter_mut().for_each(|d| *d += lambda);
        out
    }
}

impl HermitianEig {
    /// Rebuild `Q diag(values) Q^H` with replacement eigenvalues, e.g. for
    /// spectral transforms like PSD clipping or inversion.
    pub fn reconstruct(&self, values: &[f64]) -> HermitianMatrix {
        let q = &self.vectors;
        let scaled = q * DMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|v| Complex64::new(*v, 0.0)),
        ));
        let dense = scaled * q.adjoint();
        HermitianMatrix::hermitian_part(&dense).expect("reconstruction is finite")
    }
}

/// Eigendecomposition of a dense Hermitian matrix, eigenvalues ascending.
///
/// The input must be Hermitian by construction; only its lower triangle is
/// read by the underlying solver.
pub fn eig_dense_hermitian(a: &DMatrix<Complex64>) -> HermitianEig {
    let se = a.clone().symmetric_eigen();
    let n = se.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[i].partial_cmp(&se.eigenvalues[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &se.eigenvectors.column(src));
    }
    HermitianEig { values, vectors }
}
