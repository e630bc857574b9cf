//! Monte Carlo BER estimation.
//!
//! Every trial draws a fresh channel, fresh symbols and fresh noise from
//! three independent ChaCha streams keyed by `(seed, trial, attempt, tag)`.
//! Results therefore depend only on the seed and the trial indices, never on
//! how trials are spread across worker threads. The noise stream carries
//! unit-variance samples scaled by `√N0`, so the same trial index sees the
//! same `(H, x)` and the same normalized noise at every SNR point.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_2_PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bussgang::{bussgang_gain, normalized_covariance, received_covariance};
use crate::error::{Error, Result};
use crate::linalg::{elementwise_arcsin, ComplexMatrix};
use crate::receivers::{detect_pipeline_indices, ChannelContext, Combiner, ReceiverKind};
use crate::signal::{
    complex_gaussian, draw_channel, one_bit_quantize, snr_db_to_n0, transmit, Constellation, Modulation,
    SystemConfig,
};

/// Trials per scheduling unit. The stopping rule is only checked between
/// batches.
pub const BATCH_SIZE: u64 = 1000;

pub const DEFAULT_MIN_BIT_ERRORS: u64 = 200;

pub const DEFAULT_MAX_TRIALS: u64 = 200_000;

/// SNR at which error floors are read off.
pub const ERROR_FLOOR_SNR_DB: f64 = 30.0;

pub const ANTENNAS_PER_USER: usize = 8;

/// Redraws allowed for a trial whose channel cannot be inverted.
const MAX_REDRAWS: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum StreamTag {
    Channel = 1,
    Symbols = 2,
    Noise = 3,
}

/// Independent generator for one purpose within one trial attempt.
pub fn trial_rng(seed: u64, trial: u64, attempt: u32, tag: StreamTag) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&u64::from(attempt).to_le_bytes());
    key[24..].copy_from_slice(&(tag as u64).to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialPlan {
    pub k: usize,
    pub n: usize,
    pub modulation: Modulation,
    pub kinds: Vec<ReceiverKind>,
    pub snr_db_grid: Vec<f64>,
    pub max_trials: u64,
    pub min_bit_errors: u64,
    pub seed: u64,
    /// `false` bypasses the one-bit ADC and detects from `r` directly.
    pub quantized: bool,
}

impl TrialPlan {
    pub fn new(
        k: usize,
        n: usize,
        modulation: Modulation,
        kinds: Vec<ReceiverKind>,
        snr_db_grid: Vec<f64>,
    ) -> Result<Self> {
        let plan = Self {
            k,
            n,
            modulation,
            kinds,
            snr_db_grid,
            max_trials: DEFAULT_MAX_TRIALS,
            min_bit_errors: DEFAULT_MIN_BIT_ERRORS,
            seed: 0,
            quantized: true,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trials(mut self, max_trials: u64, min_bit_errors: u64) -> Self {
        self.max_trials = max_trials;
        self.min_bit_errors = min_bit_errors;
        self
    }

    pub fn with_quantized(mut self, quantized: bool) -> Self {
        self.quantized = quantized;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_trials == 0 {
            return Err(Error::InvalidConfig("max_trials must be at least 1".into()));
        }
        if self.snr_db_grid.is_empty() {
            return Err(Error::InvalidConfig("SNR grid is empty".into()));
        }
        if let Some(bad) = self.snr_db_grid.iter().find(|s| !s.is_finite()) {
            return Err(Error::InvalidConfig(format!("SNR {bad} dB is not finite")));
        }
        if self.kinds.is_empty() {
            return Err(Error::InvalidConfig("no receivers selected".into()));
        }
        for &snr in &self.snr_db_grid {
            SystemConfig::from_snr_db(self.k, self.n, snr, self.modulation)?;
        }
        Ok(())
    }

    pub fn config_at(&self, snr_db: f64) -> Result<SystemConfig> {
        SystemConfig::from_snr_db(self.k, self.n, snr_db, self.modulation)
    }
}

/// Bit-error counts of one `(receiver, SNR, K, N)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BerRecord {
    pub snr_db: f64,
    #[serde(rename = "receiver")]
    pub kind: ReceiverKind,
    pub k: usize,
    pub n: usize,
    pub modulation: Modulation,
    pub trials: u64,
    pub bits: u64,
    pub bit_errors: u64,
    pub ber: f64,
}

impl BerRecord {
    pub fn new(
        snr_db: f64,
        kind: ReceiverKind,
        k: usize,
        n: usize,
        modulation: Modulation,
        trials: u64,
        bit_errors: u64,
    ) -> Self {
        let bits = trials * (k * modulation.bits_per_symbol()) as u64;
        let ber = if bits == 0 {
            0.0
        } else {
            bit_errors as f64 / bits as f64
        };
        Self {
            snr_db,
            kind,
            k,
            n,
            modulation,
            trials,
            bits,
            bit_errors,
            ber,
        }
    }

    /// Wilson score interval for the BER at normal quantile `z`.
    pub fn wilson_interval(&self, z: f64) -> (f64, f64) {
        wilson_interval(self.bit_errors, self.bits, z)
    }
}

pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Per-kind bit errors of one trial, in the order of the requested kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub bit_errors: Vec<u64>,
    /// Channel redraws needed before every combiner could be built.
    pub redraws: u32,
}

/// Runs one trial: every kind sees the same `(H, x, z)`.
pub fn run_trial(
    config: &SystemConfig,
    kinds: &[ReceiverKind],
    seed: u64,
    trial: u64,
    quantized: bool,
) -> Result<TrialOutcome> {
    let constellation = Constellation::new(config.modulation);
    run_trial_with(&constellation, config, kinds, seed, trial, quantized)
}

fn run_trial_with(
    constellation: &Constellation,
    config: &SystemConfig,
    kinds: &[ReceiverKind],
    seed: u64,
    trial: u64,
    quantized: bool,
) -> Result<TrialOutcome> {
    let order = constellation.len() as u32;
    for attempt in 0..=MAX_REDRAWS {
        let h = draw_channel(config, &mut trial_rng(seed, trial, attempt, StreamTag::Channel)).h;
        let mut symbol_rng = trial_rng(seed, trial, attempt, StreamTag::Symbols);
        let labels: Vec<u32> = (0..config.k).map(|_| symbol_rng.gen_range(0..order)).collect();
        let x: Vec<_> = labels.iter().map(|&l| constellation.point_for_label(l)).collect();

        let ctx = ChannelContext::new(&h, config.n0)?;
        let combiners: Result<Vec<Combiner>> = kinds.iter().map(|&k| ctx.combiner(k)).collect();
        let combiners = match combiners {
            Ok(c) => c,
            Err(Error::RankDeficient | Error::DegenerateDenominator { .. }) => {
                log::warn!("trial {trial} attempt {attempt}: degenerate channel, redrawing");
                continue;
            }
            Err(e) => return Err(e),
        };

        let mut noise_rng = trial_rng(seed, trial, attempt, StreamTag::Noise);
        let r = transmit(&h, &x, config.n0, &mut noise_rng)?;
        let y = if quantized { one_bit_quantize(&r) } else { r };

        let mut bit_errors = Vec::with_capacity(kinds.len());
        for comb in &combiners {
            let detected = detect_pipeline_indices(&y, comb, constellation)?;
            let errors: u32 = detected
                .iter()
                .zip(&labels)
                .map(|(&idx, &label)| (constellation.labels()[idx] ^ label).count_ones())
                .sum();
            bit_errors.push(u64::from(errors));
        }
        return Ok(TrialOutcome {
            bit_errors,
            redraws: attempt,
        });
    }
    Err(Error::RankDeficient)
}

/// Thread pool with `workers` threads; zero picks rayon's default.
fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))
}

/// Sums the outcomes of trials `start..end` for `kinds`.
fn run_batch(
    constellation: &Constellation,
    config: &SystemConfig,
    kinds: &[ReceiverKind],
    plan: &TrialPlan,
    start: u64,
    end: u64,
) -> Result<(Vec<u64>, u64)> {
    let outcomes: Vec<TrialOutcome> = (start..end)
        .into_par_iter()
        .map(|t| run_trial_with(constellation, config, kinds, plan.seed, t, plan.quantized))
        .collect::<Result<_>>()?;
    let mut totals = vec![0u64; kinds.len()];
    let mut redraws = 0u64;
    for o in outcomes {
        for (acc, e) in totals.iter_mut().zip(o.bit_errors) {
            *acc += e;
        }
        redraws += u64::from(o.redraws);
    }
    Ok((totals, redraws))
}

/// Accumulates BER for every `(snr, kind)` of the plan.
///
/// Each kind keeps running in batches of [`BATCH_SIZE`] trials until it has
/// collected `min_bit_errors` errors or reached `max_trials`.
pub fn ber_sweep(plan: &TrialPlan, workers: usize) -> Result<Vec<BerRecord>> {
    plan.validate()?;
    let constellation = Constellation::new(plan.modulation);
    let pool = pool(workers)?;
    let mut records = Vec::with_capacity(plan.snr_db_grid.len() * plan.kinds.len());

    for &snr_db in &plan.snr_db_grid {
        let config = plan.config_at(snr_db)?;
        let mut errors = vec![0u64; plan.kinds.len()];
        let mut trials = vec![0u64; plan.kinds.len()];
        let mut active: Vec<usize> = (0..plan.kinds.len()).collect();
        let mut done = 0u64;
        let mut redraws = 0u64;

        while !active.is_empty() {
            let end = (done + BATCH_SIZE).min(plan.max_trials);
            let kinds: Vec<_> = active.iter().map(|&i| plan.kinds[i]).collect();
            let (batch, r) = pool.install(|| run_batch(&constellation, &config, &kinds, plan, done, end))?;
            redraws += r;
            for (&i, e) in active.iter().zip(batch) {
                errors[i] += e;
                trials[i] = end;
            }
            done = end;
            active.retain(|&i| errors[i] < plan.min_bit_errors && trials[i] < plan.max_trials);
        }
        if redraws > 0 {
            log::warn!("{snr_db} dB: {redraws} channel redraws");
        }
        log::info!(
            "K={} N={} {} dB: {} trials",
            plan.k,
            plan.n,
            snr_db,
            trials.iter().max().copied().unwrap_or(0)
        );
        for (i, &kind) in plan.kinds.iter().enumerate() {
            records.push(BerRecord::new(
                snr_db,
                kind,
                plan.k,
                plan.n,
                plan.modulation,
                trials[i],
                errors[i],
            ));
        }
    }
    Ok(records)
}

/// Error floors at 30 dB for each user count, with `N = 8K` and QPSK.
///
/// `template` supplies the receivers, seed, trial budget and quantizer flag;
/// its dimensions, modulation and SNR grid are ignored.
pub fn error_floor_sweep(ks: &[usize], template: &TrialPlan, workers: usize) -> Result<Vec<BerRecord>> {
    if ks.is_empty() {
        return Err(Error::InvalidConfig("no user counts given".into()));
    }
    let mut records = Vec::new();
    for &k in ks {
        let plan = TrialPlan {
            k,
            n: ANTENNAS_PER_USER * k,
            modulation: Modulation::Qpsk,
            snr_db_grid: vec![ERROR_FLOOR_SNR_DB],
            ..template.clone()
        };
        records.extend(ber_sweep(&plan, workers)?);
    }
    Ok(records)
}

/// Transmit signal used by the second-order oracles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Excitation {
    /// `x ~ CN(0, I)`: `r` is exactly Gaussian.
    Gaussian,
    /// Uniform symbols from a constellation.
    Symbols(Modulation),
}

impl Excitation {
    fn draw<R: Rng>(&self, k: usize, rng: &mut R, constellation: Option<&Constellation>) -> Vec<Complex64> {
        match (self, constellation) {
            (Excitation::Symbols(_), Some(con)) => (0..k)
                .map(|_| con.points()[rng.gen_range(0..con.len())])
                .collect(),
            _ => (0..k).map(|_| complex_gaussian(rng, 1.0)).collect(),
        }
    }

    fn constellation(&self) -> Option<Constellation> {
        match self {
            Excitation::Symbols(m) => Some(Constellation::new(*m)),
            Excitation::Gaussian => None,
        }
    }
}

/// Largest entry moduli of two sample cross-covariances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCovariance {
    /// `max |Ê[r eᴴ]|` with `e = ỹ − F·r`.
    pub signal_distortion: f64,
    /// `max |Ê[x nᴴ]|` with `n = ỹ − A·x`.
    pub symbol_noise: f64,
}

/// Sample check that the Bussgang residuals are uncorrelated with the
/// receiver input and with the symbols.
///
/// `ỹ` is the quantizer output normalized to unit power per antenna.
pub fn residual_cross_covariance<R: Rng>(
    h: &ComplexMatrix,
    n0: f64,
    samples: usize,
    excitation: Excitation,
    rng: &mut R,
) -> Result<CrossCovariance> {
    let gain = bussgang_gain(&received_covariance(h, n0))?;
    residual_cross_covariance_with_gain(h, n0, &gain, samples, excitation, rng)
}

/// As [`residual_cross_covariance`] but with an arbitrary diagonal gain `F`.
pub fn residual_cross_covariance_with_gain<R: Rng>(
    h: &ComplexMatrix,
    n0: f64,
    gain: &[f64],
    samples: usize,
    excitation: Excitation,
    rng: &mut R,
) -> Result<CrossCovariance> {
    let (n, k) = h.shape();
    if gain.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} gains for {n} antennas",
            gain.len()
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let a = h.scale_rows(gain);
    let constellation = excitation.constellation();
    let mut re = ComplexMatrix::zeros(n, n);
    let mut xn = ComplexMatrix::zeros(k, n);
    for _ in 0..samples {
        let x = excitation.draw(k, rng, constellation.as_ref());
        let r = transmit(h, &x, n0, rng)?;
        let y: Vec<_> = one_bit_quantize(&r)
            .into_iter()
            .map(|v| v * FRAC_1_SQRT_2)
            .collect();
        let ax = a.mul_vec(&x)?;
        let e: Vec<_> = (0..n).map(|i| y[i] - r[i] * gain[i]).collect();
        let noise: Vec<_> = (0..n).map(|i| y[i] - ax[i]).collect();
        for i in 0..n {
            for j in 0..n {
                re[(i, j)] += r[i] * e[j].conj();
            }
        }
        for i in 0..k {
            for j in 0..n {
                xn[(i, j)] += x[i] * noise[j].conj();
            }
        }
    }
    let s = 1.0 / samples as f64;
    Ok(CrossCovariance {
        signal_distortion: re.max_abs() * s,
        symbol_noise: xn.max_abs() * s,
    })
}

/// `Σ̂_y = (1/S)·Σ y·yᴴ` for the unnormalized `±1±j` quantizer output.
pub fn sample_output_covariance<R: Rng>(
    h: &ComplexMatrix,
    n0: f64,
    samples: usize,
    excitation: Excitation,
    rng: &mut R,
) -> Result<ComplexMatrix> {
    if samples == 0 {
        return Err(Error::InvalidConfig("need at least one sample".into()));
    }
    let (n, k) = h.shape();
    let constellation = excitation.constellation();
    let mut acc = ComplexMatrix::zeros(n, n);
    for _ in 0..samples {
        let x = excitation.draw(k, rng, constellation.as_ref());
        let y = one_bit_quantize(&transmit(h, &x, n0, rng)?);
        for i in 0..n {
            for j in 0..n {
                acc[(i, j)] += y[i] * y[j].conj();
            }
        }
    }
    Ok(acc.scale(1.0 / samples as f64))
}

/// Arcsine law for `±1±j` outputs of a Gaussian input with covariance `Σ_r`:
/// `(4/π)·[arcsin(Re C) + j·arcsin(Im C)]`. Twice the `(2/π)·arcsin(C)` of
/// the unit-power convention.
pub fn arcsine_output_covariance(sigma_r: &ComplexMatrix) -> Result<ComplexMatrix> {
    Ok(elementwise_arcsin(&normalized_covariance(sigma_r)?)?.scale(2.0 * FRAC_2_PI))
}

/// Sample mean-squared error `Ê‖x − W·ỹ‖²` for several combiners on common
/// samples, with `ỹ` normalized to unit power per antenna.
pub fn empirical_mse<R: Rng>(
    combiners: &[ComplexMatrix],
    h: &ComplexMatrix,
    n0: f64,
    samples: usize,
    excitation: Excitation,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let k = h.cols();
    let constellation = excitation.constellation();
    let mut totals = vec![0.0; combiners.len()];
    for _ in 0..samples {
        let x = excitation.draw(k, rng, constellation.as_ref());
        let y: Vec<_> = one_bit_quantize(&transmit(h, &x, n0, rng)?)
            .into_iter()
            .map(|v| v * FRAC_1_SQRT_2)
            .collect();
        for (w, total) in combiners.iter().zip(&mut totals) {
            let est = w.mul_vec(&y)?;
            *total += x.iter().zip(&est).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        }
    }
    Ok(totals.into_iter().map(|t| t / samples as f64).collect())
}

/// `N0` for each point of an SNR grid.
pub fn noise_powers(snr_db_grid: &[f64]) -> Vec<f64> {
    snr_db_grid.iter().map(|&s| snr_db_to_n0(s)).collect()
}
