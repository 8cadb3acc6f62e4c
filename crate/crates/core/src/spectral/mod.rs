//! Spectra of PSD operators, δ-harmonic filtrations and normalization.

pub mod interleaving;
pub mod witness;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::operators::{Provenance, SheafLaplacian};

pub use interleaving::{
    interleaving_shift, verify_cone_reduction, ConeReductionReport, GroundedOperators, InterleavingMode,
    InterleavingResult,
};
pub use witness::{
    admitted_modes, coface_energy_map, global_witness, local_witness, local_witness_for, participation_ratio,
    relative_local_witness, LocalWitnessMap, Weight, WitnessConfig,
};

/// Ascending eigenpairs of a symmetric PSD operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    values: Vec<f64>,
    vectors: Mat,
    threshold: f64,
    provenance: Provenance,
}

impl Spectrum {
    /// Builds a spectrum from explicit eigenpairs (values ascending,
    /// orthonormal vectors as columns).
    pub fn from_parts(values: Vec<f64>, vectors: Mat, provenance: Provenance) -> Result<Self> {
        if vectors.ncols() != values.len() || vectors.nrows() != values.len() {
            return Err(Error::Shape(format!(
                "{} eigenvalues with eigenvector matrix of shape {:?}",
                values.len(),
                vectors.shape()
            )));
        }
        if values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidConfig("eigenvalues must be ascending".into()));
        }
        let lmax = values.last().copied().unwrap_or(0.0);
        Ok(Spectrum { threshold: linalg::zero_threshold(lmax), values, vectors, provenance })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn vectors(&self) -> &Mat {
        &self.vectors
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lambda_max(&self) -> f64 {
        self.values.last().copied().unwrap_or(0.0)
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.first().copied().unwrap_or(0.0)
    }

    /// Whether eigenvalue `i` is a numerical zero.
    pub fn is_zero(&self, i: usize) -> bool {
        self.values[i] <= self.threshold
    }

    pub fn kernel_dim(&self) -> usize {
        self.values.iter().filter(|&&l| l <= self.threshold).count()
    }

    /// Smallest eigenvalue above the zero threshold, `+inf` if none.
    pub fn spectral_gap(&self) -> f64 {
        self.values.iter().copied().find(|&l| l > self.threshold).unwrap_or(f64::INFINITY)
    }

    /// Indices spanning the δ-harmonic space: `lambda <= delta`, with the
    /// numerical kernel always included.
    pub fn harmonic_indices(&self, delta: f64) -> Vec<usize> {
        let cut = delta.max(self.threshold);
        (0..self.values.len()).filter(|&i| self.values[i] <= cut).collect()
    }

    /// Orthonormal basis of the δ-harmonic space.
    pub fn harmonic_space(&self, delta: f64) -> Result<Mat> {
        if delta.is_nan() || delta < 0.0 {
            return Err(Error::NegativeDelta(delta));
        }
        Ok(linalg::select_columns(&self.vectors, &self.harmonic_indices(delta)))
    }

    /// `dim H_delta`.
    pub fn harmonic_dim(&self, delta: f64) -> usize {
        let cut = delta.max(self.threshold);
        self.values.iter().filter(|&&l| l <= cut).count()
    }

    /// No kernel, but a nonzero δ-harmonic space at `probe_delta`.
    pub fn is_almost_non_exact(&self, probe_delta: f64) -> Result<bool> {
        if probe_delta.is_nan() || probe_delta <= 0.0 {
            return Err(Error::InvalidConfig(format!("probe delta must be positive, got {probe_delta}")));
        }
        Ok(self.kernel_dim() == 0 && self.harmonic_dim(probe_delta) > 0)
    }

    /// The same eigenvectors with eigenvalues (and threshold) divided by
    /// trace/rank. Returns the scale used; a zero operator is returned
    /// unchanged with scale 1 and `false`.
    pub fn normalized(&self) -> (Spectrum, f64, bool) {
        let rank = self.values.len() - self.kernel_dim();
        let trace: f64 = self.values.iter().filter(|&&l| l > self.threshold).sum();
        if rank == 0 || trace <= 0.0 {
            return (self.clone(), 1.0, false);
        }
        let scale = trace / rank as f64;
        let out = Spectrum {
            values: self.values.iter().map(|l| l / scale).collect(),
            vectors: self.vectors.clone(),
            threshold: self.threshold / scale,
            provenance: self.provenance,
        };
        (out, scale, true)
    }

    /// A copy with every eigenvalue moved by `shift` (eigenvectors kept).
    pub fn shifted(&self, shift: f64) -> Result<Spectrum> {
        let values = self.values.iter().map(|l| l + shift).collect();
        Spectrum::from_parts(values, self.vectors.clone(), self.provenance)
    }
}

/// Dense symmetric eigendecomposition with PSD validation.
pub fn eigendecompose(l: &SheafLaplacian) -> Result<Spectrum> {
    eigendecompose_matrix(&l.matrix, l.provenance)
}

/// Same as [`eigendecompose`] for a bare matrix.
pub fn eigendecompose_matrix(m: &Mat, provenance: Provenance) -> Result<Spectrum> {
    if !m.is_square() {
        return Err(Error::Shape(format!("operator of shape {:?} is not square", m.shape())));
    }
    let asym = linalg::max_asymmetry(m);
    if asym > linalg::ABS_ZERO * linalg::max_abs(m).max(1.0) {
        return Err(Error::Asymmetric(asym));
    }
    let (values, vectors) = linalg::sym_eigen(m);
    let lmax = values.last().copied().unwrap_or(0.0);
    if let Some(&lmin) = values.first() {
        if lmin < -linalg::REL_ZERO * lmax.abs().max(1.0) {
            return Err(Error::NotPsd(lmin));
        }
    }
    Spectrum::from_parts(values, vectors, provenance)
}

/// `dim H_delta` over an ascending grid.
pub fn indicator_profile(s: &Spectrum, grid: &[f64]) -> Result<Vec<usize>> {
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("delta grid must be ascending".into()));
    }
    if let Some(&d) = grid.iter().find(|d| d.is_nan() || **d < 0.0) {
        return Err(Error::NegativeDelta(d));
    }
    Ok(grid.iter().map(|&d| s.harmonic_dim(d)).collect())
}

/// Whether a normalized operator was the zero operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub scale: f64,
    pub applied: bool,
}

/// Scales `L` so that trace/rank = 1. The zero operator is returned
/// unchanged with `applied = false`.
pub fn normalize_spectrum(l: &SheafLaplacian) -> Result<(SheafLaplacian, Normalization)> {
    let s = eigendecompose(l)?;
    let (_, scale, applied) = s.normalized();
    let matrix = if applied { &l.matrix / scale } else { l.matrix.clone() };
    Ok((SheafLaplacian { degree: l.degree, matrix, provenance: l.provenance }, Normalization { scale, applied }))
}
