//! Second-order statistics of the one-bit quantized uplink.
//!
//! With `r = Hx + z` and `Σ_r = HHᴴ + N0·I`, the quantized output is written
//! as `y = F·r + e`, where `F = √(2/π)·diag(Σ_r)^{-1/2}` and `e` is
//! uncorrelated with `r`. Folding `F` into the channel gives the effective
//! model `y = A·x + n` with `A = F·H`, and the arcsine law yields the
//! covariance of `n`:
//!
//! ```text
//! Σ_n = (2/π)·[ arcsin(C) − C + N0·diag(Σ_r)^{-1} ],   C = D^{-1/2} Σ_r D^{-1/2}
//! ```
//!
//! These quantities follow the convention of a quantizer output normalized
//! to unit power per antenna, `(sign(Re r) + j·sign(Im r)) / √2`. The
//! simulator feeds the unnormalized `±1±j` output to the receivers; every
//! combiner is followed by per-user equalization, which cancels the common
//! √2 factor.

use std::f64::consts::{FRAC_2_PI, PI};

use crate::error::{Error, Result};
use crate::linalg::{elementwise_arcsin, ComplexMatrix};

/// Inverse signal-to-quantization-noise ratio of a one-bit ADC under the
/// additive quantization noise model.
pub const AQNM_ALPHA: f64 = 0.3634;

/// `Σ_r = HHᴴ + N0·I_N`.
pub fn received_covariance(h: &ComplexMatrix, n0: f64) -> ComplexMatrix {
    h.outer_gram().add_diag(n0)
}

/// Diagonal of the Bussgang gain, `F_ii = √(2/π) / √(Σ_r,ii)`.
pub fn bussgang_gain(sigma_r: &ComplexMatrix) -> Result<Vec<f64>> {
    sigma_r
        .diag_real()
        .into_iter()
        .enumerate()
        .map(|(index, d)| {
            if d > 0.0 && d.is_finite() {
                Ok((FRAC_2_PI / d).sqrt())
            } else {
                Err(Error::DegenerateCovariance { index, value: d })
            }
        })
        .collect()
}

/// Returns `(F, A)` with `A = F·H`.
pub fn bussgang_matrices(h: &ComplexMatrix, n0: f64) -> Result<(ComplexMatrix, ComplexMatrix)> {
    let gain = bussgang_gain(&received_covariance(h, n0))?;
    Ok((ComplexMatrix::from_diag_real(&gain), h.scale_rows(&gain)))
}

/// `C = D^{-1/2}·Σ_r·D^{-1/2}`; unit diagonal by construction.
pub fn normalized_covariance(sigma_r: &ComplexMatrix) -> Result<ComplexMatrix> {
    let inv_sqrt: Vec<f64> = bussgang_gain(sigma_r)?
        .into_iter()
        .map(|f| f / FRAC_2_PI.sqrt())
        .collect();
    let mut c = sigma_r.scale_rows_cols(&inv_sqrt, &inv_sqrt);
    for i in 0..c.rows() {
        c[(i, i)] = 1.0.into();
    }
    Ok(c)
}

/// Covariance of the effective noise `n = F·z + e`, given `Σ_r` directly.
pub fn effective_noise_covariance_from(sigma_r: &ComplexMatrix, n0: f64) -> Result<ComplexMatrix> {
    let c = normalized_covariance(sigma_r)?;
    let arcsin_c = elementwise_arcsin(&c)?;
    let mut sigma_n = &arcsin_c - &c;
    for (i, d) in sigma_r.diag_real().into_iter().enumerate() {
        sigma_n[(i, i)].re += n0 / d;
    }
    Ok(sigma_n.scale(FRAC_2_PI))
}

pub fn effective_noise_covariance(h: &ComplexMatrix, n0: f64) -> Result<ComplexMatrix> {
    effective_noise_covariance_from(&received_covariance(h, n0), n0)
}

/// Closed form of `(Σ_n)_ii`, `(2/π)(π/2 − 1 + N0/Σ_r,ii)`.
pub fn analytic_noise_diagonal(sigma_r_ii: f64, n0: f64) -> f64 {
    FRAC_2_PI * (PI / 2.0 - 1.0 + n0 / sigma_r_ii)
}

/// Everything the Bussgang receivers need for one channel realization.
#[derive(Debug, Clone)]
pub struct QuantizedStatistics {
    pub sigma_r: ComplexMatrix,
    /// Diagonal of `F`.
    pub gain: Vec<f64>,
    /// Effective channel `A = F·H`.
    pub a: ComplexMatrix,
    pub sigma_n: ComplexMatrix,
}

impl QuantizedStatistics {
    pub fn new(h: &ComplexMatrix, n0: f64) -> Result<Self> {
        Self::with_covariance(h, n0, received_covariance(h, n0))
    }

    /// Builds the statistics from a caller-supplied `Σ_r`, e.g. the large-K
    /// approximation `(K + N0)·I`.
    pub fn with_covariance(h: &ComplexMatrix, n0: f64, sigma_r: ComplexMatrix) -> Result<Self> {
        if sigma_r.shape() != (h.rows(), h.rows()) {
            return Err(Error::DimensionMismatch(format!(
                "covariance {:?} for a channel with {} antennas",
                sigma_r.shape(),
                h.rows()
            )));
        }
        let gain = bussgang_gain(&sigma_r)?;
        let a = h.scale_rows(&gain);
        let sigma_n = effective_noise_covariance_from(&sigma_r, n0)?;
        Ok(Self {
            sigma_r,
            gain,
            a,
            sigma_n,
        })
    }

    pub fn gain_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::from_diag_real(&self.gain)
    }
}

/// Additive quantization noise model: `y ≈ κ·r + q`, `q ~ CN(0, Σ_q)`.
#[derive(Debug, Clone)]
pub struct AqnmParameters {
    pub alpha: f64,
    pub kappa: f64,
    /// `α·κ·diag(HHᴴ + N0·I)`.
    pub sigma_q: ComplexMatrix,
}

pub fn aqnm_parameters_from(sigma_r: &ComplexMatrix) -> AqnmParameters {
    let alpha = AQNM_ALPHA;
    let kappa = 1.0 - alpha;
    AqnmParameters {
        alpha,
        kappa,
        sigma_q: sigma_r.diag_part().scale(alpha * kappa),
    }
}

pub fn aqnm_parameters(h: &ComplexMatrix, n0: f64) -> AqnmParameters {
    aqnm_parameters_from(&received_covariance(h, n0))
}
