//! Constellations, Rayleigh channel draws, the unquantized receive equation
//! `r = Hx + z` and the one-bit quantizer.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, ComplexVector};

/// Symbols within this distance of a point are accepted as that point.
const SYMBOL_MATCH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modulation {
    #[serde(rename = "qpsk")]
    Qpsk,
    #[serde(rename = "8psk")]
    Psk8,
    #[serde(rename = "16qam")]
    Qam16,
}

impl Modulation {
    pub const ALL: [Modulation; 3] = [Modulation::Qpsk, Modulation::Psk8, Modulation::Qam16];

    pub fn token(self) -> &'static str {
        match self {
            Modulation::Qpsk => "qpsk",
            Modulation::Psk8 => "8psk",
            Modulation::Qam16 => "16qam",
        }
    }

    pub fn bits_per_symbol(self) -> usize {
        match self {
            Modulation::Qpsk => 2,
            Modulation::Psk8 => 3,
            Modulation::Qam16 => 4,
        }
    }

    pub fn is_psk(self) -> bool {
        matches!(self, Modulation::Qpsk | Modulation::Psk8)
    }
}

impl fmt::Display for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Modulation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "qpsk" | "4psk" => Ok(Modulation::Qpsk),
            "8psk" | "psk8" => Ok(Modulation::Psk8),
            "16qam" | "qam16" => Ok(Modulation::Qam16),
            other => Err(Error::UnsupportedModulation(other.to_string())),
        }
    }
}

/// Unit-average-power symbol alphabet with Gray bit labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    modulation: Modulation,
    points: Vec<Complex64>,
    /// Bit label of each point, MSB first.
    labels: Vec<u32>,
    /// Inverse of `labels`.
    point_of_label: Vec<usize>,
}

impl Constellation {
    pub fn new(modulation: Modulation) -> Self {
        let (points, labels): (Vec<_>, Vec<_>) = match modulation {
            Modulation::Qpsk => (0..4u32)
                .map(|label| {
                    // MSB picks the in-phase sign, LSB the quadrature sign.
                    let re = if label & 0b10 == 0 { 1.0 } else { -1.0 };
                    let im = if label & 0b01 == 0 { 1.0 } else { -1.0 };
                    (Complex64::new(re, im) * FRAC_1_SQRT_2, label)
                })
                .unzip(),
            Modulation::Psk8 => (0..8u32)
                .map(|m| {
                    let point = Complex64::from_polar(1.0, 2.0 * PI * f64::from(m) / 8.0);
                    (point, gray(m))
                })
                .unzip(),
            Modulation::Qam16 => {
                let scale = 1.0 / 10f64.sqrt();
                let mut pts = Vec::with_capacity(16);
                for qi in 0..4u32 {
                    for ii in 0..4u32 {
                        let level = |i: u32| -3.0 + 2.0 * f64::from(i);
                        let point = Complex64::new(level(ii), level(qi)) * scale;
                        pts.push((point, (gray(ii) << 2) | gray(qi)));
                    }
                }
                pts.into_iter().unzip()
            }
        };
        let mut point_of_label = vec![0; points.len()];
        for (idx, &label) in labels.iter().enumerate() {
            point_of_label[label as usize] = idx;
        }
        Self {
            modulation,
            points,
            labels,
            point_of_label,
        }
    }

    pub fn modulation(&self) -> Modulation {
        self.modulation
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.modulation.bits_per_symbol()
    }

    pub fn point_for_label(&self, label: u32) -> Complex64 {
        self.points[self.point_of_label[label as usize]]
    }

    /// Index of the point closest to `z`; ties go to the lowest index.
    pub fn nearest_index(&self, z: Complex64) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = (z - p).norm_sqr();
            if d < best_dist {
                best = i;
                best_dist = d;
            }
        }
        best
    }

    pub fn index_of(&self, symbol: Complex64) -> Result<usize> {
        let idx = self.nearest_index(symbol);
        if (self.points[idx] - symbol).norm() <= SYMBOL_MATCH_TOLERANCE {
            Ok(idx)
        } else {
            Err(Error::UnknownSymbol(symbol))
        }
    }

    pub fn map_bits(&self, bits: &[u8]) -> Result<ComplexVector> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::LengthMismatch {
                bits: bits.len(),
                bits_per_symbol: bps,
            });
        }
        Ok(bits
            .chunks(bps)
            .map(|chunk| {
                let label = chunk.iter().fold(0u32, |acc, &b| (acc << 1) | u32::from(b & 1));
                self.point_for_label(label)
            })
            .collect())
    }

    pub fn symbols_to_bits(&self, symbols: &[Complex64]) -> Result<Vec<u8>> {
        let bps = self.bits_per_symbol();
        let mut bits = Vec::with_capacity(symbols.len() * bps);
        for &s in symbols {
            let label = self.labels[self.index_of(s)?];
            bits.extend((0..bps).rev().map(|shift| ((label >> shift) & 1) as u8));
        }
        Ok(bits)
    }
}

fn gray(m: u32) -> u32 {
    m ^ (m >> 1)
}

/// One operating point: `k` users, `n` antennas, noise power `n0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemConfig {
    pub k: usize,
    pub n: usize,
    pub n0: f64,
    pub modulation: Modulation,
}

impl SystemConfig {
    pub fn new(k: usize, n: usize, n0: f64, modulation: Modulation) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("at least one user is required".into()));
        }
        if n < k {
            return Err(Error::InvalidConfig(format!(
                "antenna count {n} is smaller than user count {k}"
            )));
        }
        if !(n0 > 0.0) || !n0.is_finite() {
            return Err(Error::InvalidConfig(format!("noise power {n0} must be positive")));
        }
        Ok(Self { k, n, n0, modulation })
    }

    pub fn from_snr_db(k: usize, n: usize, snr_db: f64, modulation: Modulation) -> Result<Self> {
        Self::new(k, n, snr_db_to_n0(snr_db), modulation)
    }

    /// `ρ = 1/N0`.
    pub fn snr(&self) -> f64 {
        1.0 / self.n0
    }
}

/// Unit signal power per user, so `N0 = 10^(-snr_db/10)`.
pub fn snr_db_to_n0(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
}

/// One CN(0, variance) sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}

/// i.i.d. CN(0, 1) Rayleigh channel, `n × k`.
pub fn draw_channel<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> ChannelRealization {
    ChannelRealization {
        h: ComplexMatrix::from_fn(config.n, config.k, |_, _| complex_gaussian(rng, 1.0)),
    }
}

/// `r = Hx + z` with `z ~ CN(0, n0·I)`.
pub fn transmit<R: Rng + ?Sized>(
    h: &ComplexMatrix,
    x: &[Complex64],
    n0: f64,
    rng: &mut R,
) -> Result<ComplexVector> {
    let mut r = h.mul_vec(x)?;
    for ri in &mut r {
        *ri += complex_gaussian(rng, n0);
    }
    Ok(r)
}

fn sign(a: f64) -> f64 {
    if a >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `y_i = sign(Re r_i) + j·sign(Im r_i)` with `sign(0) = +1`.
pub fn one_bit_quantize(r: &[Complex64]) -> ComplexVector {
    r.iter().map(|z| Complex64::new(sign(z.re), sign(z.im))).collect()
}
